//! Effect size and rank-sum significance for comparing campaign efforts.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest `n * m` for which the exact permutation distribution is used.
pub const EXACT_LIMIT: usize = 400;

/// Smallest sample size accepted by the rank tests.
pub const MIN_SAMPLE: usize = 3;

/// Vargha-Delaney Â12: probability that a draw from `a` exceeds one from
/// `b`, counting ties as one half.
pub fn a12(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.5;
    }
    let mut wins = 0.0;
    for &x in a {
        for &y in b {
            if x > y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    wins / (a.len() * b.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Pairs where `a` exceeds `b`, ties counting one half.
    pub u_a: f64,
    pub u_b: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: Method,
}

/// Midranks of the pooled sample, in input order.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Mann-Whitney U test.
///
/// Small samples use the exact permutation distribution of the rank sum
/// (midranks handle ties); larger ones fall back to the tie-corrected normal
/// approximation with continuity correction.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.len() < MIN_SAMPLE || b.len() < MIN_SAMPLE {
        return Err(Error::Usage(format!(
            "Mann-Whitney needs at least {MIN_SAMPLE} observations per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Usage("Mann-Whitney samples must be finite".into()));
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..n].iter().sum();
    let u_a = w - (n * (n + 1)) as f64 / 2.0;
    let u_b = (n * m) as f64 - u_a;
    let centre = (n * m) as f64 / 2.0;
    let dev = (u_a - centre).abs();

    if n * m <= EXACT_LIMIT {
        let p = exact_two_sided(&ranks, n, dev);
        return Ok(MannWhitney {
            u_a,
            u_b,
            p_value: p.min(1.0),
            method: Method::Exact,
        });
    }

    let total = (n + m) as f64;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = (n * m) as f64 / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((dev - 0.5).max(0.0)) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - std.cdf(z))).min(1.0)
    };
    Ok(MannWhitney {
        u_a,
        u_b,
        p_value: p,
        method: Method::Normal,
    })
}

/// P(|U - nm/2| >= dev) when `n` of the pooled midranks are drawn at random.
fn exact_two_sided(ranks: &[f64], n: usize, dev: f64) -> f64 {
    // Midranks are multiples of one half, so doubled ranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k whose doubled rank sum is s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let total: f64 = ways[n].iter().sum();
    let m = ranks.len() - n;
    let centre = (n * m) as f64 / 2.0;
    let offset = (n * (n + 1)) as f64 / 2.0;
    let hits: f64 = ways[n]
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .filter(|(s, _)| ((*s as f64 / 2.0 - offset) - centre).abs() >= dev - 1e-9)
        .map(|(_, &c)| c)
        .sum();
    hits / total
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    })
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates every split of the pooled sample.
    fn brute(a: &[f64], b: &[f64]) -> (f64, f64) {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let n = a.len();
        let nm = (a.len() * b.len()) as f64;
        let u_of = |xs: &[f64], ys: &[f64]| a12(xs, ys) * (xs.len() * ys.len()) as f64;
        let u_obs = u_of(a, b);
        let (mut hits, mut total) = (0.0, 0.0);
        for mask in 0u32..(1 << pooled.len()) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let (mut xs, mut ys) = (vec![], vec![]);
            for (i, &v) in pooled.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
            total += 1.0;
            if (u_of(&xs, &ys) - nm / 2.0).abs() >= (u_obs - nm / 2.0).abs() - 1e-9 {
                hits += 1.0;
            }
        }
        (u_obs, hits / total)
    }

    #[test]
    fn a12_basics() {
        assert_eq!(a12(&[2.0, 3.0], &[1.0]), 1.0);
        assert_eq!(a12(&[1.0], &[1.0]), 0.5);
        assert_eq!(a12(&[1.0, 3.0], &[2.0, 2.0]), 0.5);
    }

    #[test]
    fn separated_samples_are_significant() {
        let full: Vec<f64> = (1..=10).map(|x| x as f64 * 100.0).collect();
        let base: Vec<f64> = (1..=10).map(|x| 5_000.0 + x as f64).collect();
        let r = mann_whitney(&base, &full).unwrap();
        assert_eq!(r.method, Method::Exact);
        assert!((r.p_value - 2.0 / 184_756.0).abs() < 1e-15);
        assert_eq!(a12(&base, &full), 1.0);
    }

    #[test]
    fn tiny_samples_are_rejected() {
        assert!(mann_whitney(&[1.0, 2.0], &[3.0, 4.0, 5.0]).is_err());
    }

    #[test]
    fn normal_approximation_for_large_samples() {
        let a: Vec<f64> = (0..30).map(|x| x as f64).collect();
        let b: Vec<f64> = (0..30).map(|x| x as f64 + 10.0).collect();
        let r = mann_whitney(&a, &b).unwrap();
        assert_eq!(r.method, Method::Normal);
        assert!(r.p_value < 0.01 && r.p_value > 0.0);
        let same = mann_whitney(&a, &a).unwrap();
        assert!(same.p_value > 0.95);
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(
            a in prop::collection::vec(0u8..6, 3..=8),
            b in prop::collection::vec(0u8..6, 3..=8),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = mann_whitney(&a, &b).unwrap();
            let (u, p) = brute(&a, &b);
            prop_assert!((r.u_a - u).abs() < 1e-9);
            prop_assert!((r.p_value - p).abs() < 1e-12, "{} vs {}", r.p_value, p);
        }
    }
}
