//! Batches of campaigns across subjects and modes, their summary statistics,
//! and replay of recorded violations.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::fuzzer::{run_campaign, CampaignConfig, CampaignResult, Mode};
use crate::invariants::{check_pi, check_violation, PiId, Violation};
use crate::scenario::{load_scenario, validate_ranges, PlanningScenario, Seed};
use crate::stats::{a12, mann_whitney, mean, median};
use crate::subjects::{PlanningDecision, SubjectId, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    /// Scenario file, relative to the experiment file, or the name of a bundled seed.
    pub seed_file: String,
    pub subject: SubjectId,
    #[serde(default)]
    pub pi: Option<PiId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub entries: Vec<ExperimentEntry>,
    pub modes: Vec<Mode>,
    pub runs: u32,
    pub budget: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Campaign settings applied to every run; subject, mode, budget, and
    /// seed are overwritten per run.
    #[serde(default)]
    pub campaign: Option<CampaignConfig>,
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Config("experiment has no entries".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("experiment has no modes".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Campaign configuration for one run.
    pub fn config(&self, entry: &ExperimentEntry, mode: Mode, run: u32) -> CampaignConfig {
        let mut cfg = self.campaign.clone().unwrap_or_else(|| CampaignConfig::new(entry.subject));
        cfg.subject = entry.subject;
        cfg.pi = entry.pi;
        cfg.mode = mode;
        cfg.budget = self.budget;
        cfg.rng_seed = self.base_seed.wrapping_add(u64::from(run));
        cfg
    }
}

/// Loads a seed scenario from disk, falling back to the bundled seeds by file name.
pub fn resolve_seed(name: &str, base_dir: Option<&Path>) -> Result<PlanningScenario> {
    let candidate: PathBuf = match base_dir {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    };
    if candidate.is_file() {
        return load_scenario(&candidate);
    }
    let file = Path::new(name).file_name().and_then(|f| f.to_str()).unwrap_or(name);
    if fixtures::seed_json(file).is_some() {
        return fixtures::load_named(file);
    }
    Err(Error::Usage(format!(
        "seed `{name}` is neither a file nor a bundled seed ({})",
        fixtures::names().collect::<Vec<_>>().join(", ")
    )))
}

/// Effort of a run: evaluations to exposure, or the full budget when nothing was found.
pub fn effort(result: &CampaignResult, budget: u64) -> f64 {
    result.time_to_exposure().unwrap_or(budget) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub subject: SubjectId,
    pub pi: PiId,
    pub mode: Mode,
    pub runs: usize,
    pub found: usize,
    pub median_effort: f64,
    pub mean_effort: f64,
    /// Median effort relative to full mode.
    pub slowdown: Option<f64>,
    /// Â12 of this mode's effort against full mode (values above 0.5 mean this mode is slower).
    pub a12_vs_full: Option<f64>,
    pub p_value_vs_full: Option<f64>,
    pub significant: Option<bool>,
    /// Set when a comparison was requested but the samples were too small to test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub mean_wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub budget: u64,
    pub summaries: Vec<ModeSummary>,
    /// Distinct (subject, target) pairs exposed by any run.
    pub unique_vulnerabilities: Vec<(SubjectId, String)>,
    /// Full-mode runs that ended without a violation.
    pub full_failures: usize,
}

/// Significance level for the rank test.
pub const ALPHA: f64 = 0.05;

pub fn summarize(results: &[CampaignResult], budget: u64) -> ExperimentReport {
    let mut keys: Vec<(SubjectId, PiId)> = Vec::new();
    for r in results {
        if !keys.contains(&(r.subject, r.pi)) {
            keys.push((r.subject, r.pi));
        }
    }
    let mut summaries = Vec::new();
    for (subject, pi) in keys {
        let of = |mode: Mode| -> Vec<&CampaignResult> {
            results
                .iter()
                .filter(|r| r.subject == subject && r.pi == pi && r.mode == mode)
                .collect()
        };
        let full: Vec<f64> = of(Mode::Full).iter().map(|r| effort(r, budget)).collect();
        let full_median = median(&full);
        for mode in Mode::ALL {
            let runs = of(mode);
            if runs.is_empty() {
                continue;
            }
            let efforts: Vec<f64> = runs.iter().map(|r| effort(r, budget)).collect();
            let med = median(&efforts).unwrap_or(f64::NAN);
            let compare = mode != Mode::Full && !full.is_empty();
            let p_value = compare
                .then(|| mann_whitney(&efforts, &full).ok().map(|m| m.p_value))
                .flatten();
            let walls: Vec<f64> = runs.iter().map(|r| r.wall_time_secs).collect();
            summaries.push(ModeSummary {
                subject,
                pi,
                mode,
                runs: runs.len(),
                found: runs.iter().filter(|r| r.violation().is_some()).count(),
                median_effort: med,
                mean_effort: mean(&efforts).unwrap_or(f64::NAN),
                slowdown: full_median
                    .filter(|&f| compare && f > 0.0)
                    .map(|f| med / f),
                a12_vs_full: compare.then(|| a12(&efforts, &full)),
                p_value_vs_full: p_value,
                significant: p_value.map(|p| p < ALPHA),
                note: (compare && p_value.is_none()).then(|| "insufficient runs".to_string()),
                mean_wall_time_secs: mean(&walls).unwrap_or(0.0),
            });
        }
    }
    let unique: BTreeSet<(SubjectId, String)> = results
        .iter()
        .filter_map(|r| r.violation().map(|v| (v.subject, v.target.clone())))
        .collect();
    ExperimentReport {
        budget,
        summaries,
        unique_vulnerabilities: unique.into_iter().collect(),
        full_failures: results
            .iter()
            .filter(|r| r.mode == Mode::Full && r.violation().is_none())
            .count(),
    }
}

impl ExperimentReport {
    /// Fixed-width table, one row per (subject, mode).
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:<5} {:<14} {:>7} {:>12} {:>10} {:>9} {:>6} {:>10}\n",
            "subject", "pi", "mode", "found", "median_tte", "slowdown", "wall_s", "a12", "p"
        );
        let opt = |v: Option<f64>, prec: usize| match v {
            Some(x) => format!("{x:.prec$}"),
            None => "-".to_string(),
        };
        for m in &self.summaries {
            let mark = if m.found < m.runs { "*" } else { "" };
            let found = format!("{}/{}{mark}", m.found, m.runs);
            let p = match (&m.note, m.p_value_vs_full) {
                (Some(n), _) => n.clone(),
                (None, Some(p)) if p < ALPHA => format!("{p:.2e}*"),
                (None, p) => opt(p, 3),
            };
            s.push_str(&format!(
                "{:<8} {:<5} {:<14} {:>7} {:>12.0} {:>10} {:>9.3} {:>6} {:>10}\n",
                m.subject.to_string(),
                m.pi.to_string(),
                m.mode.name(),
                found,
                m.median_effort,
                m.slowdown.map_or("-".to_string(), |x| format!("{x:.2}x")),
                m.mean_wall_time_secs,
                opt(m.a12_vs_full, 2),
                p,
            ));
        }
        s.push_str(&format!(
            "unique vulnerabilities: {}; full-mode failures: {}; unfound runs (*) count as the {}-evaluation budget\n",
            self.unique_vulnerabilities.len(),
            self.full_failures,
            self.budget
        ));
        s
    }
}

/// Runs every (entry, mode, run) combination on the rayon pool. Results come
/// back in (entry, mode, run) order regardless of scheduling; `on_result` is
/// called from worker threads as runs finish.
pub fn run_experiment(
    spec: &ExperimentSpec,
    base_dir: Option<&Path>,
    on_result: impl Fn(&CampaignResult) + Sync,
) -> Result<Vec<CampaignResult>> {
    spec.validate()?;
    let seeds = spec
        .entries
        .iter()
        .map(|e| resolve_seed(&e.seed_file, base_dir).map(Seed::new))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Mode, u32)> = (0..spec.entries.len())
        .flat_map(|i| {
            spec.modes
                .iter()
                .flat_map(move |&m| (0..spec.runs).map(move |r| (i, m, r)))
        })
        .collect();
    jobs.par_iter()
        .map(|&(i, mode, run)| {
            let cfg = spec.config(&spec.entries[i], mode, run);
            let res = run_campaign(&cfg, &seeds[i])?;
            on_result(&res);
            Ok(res)
        })
        .collect()
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// One JSON document per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("serializable"));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub subject: SubjectId,
    pub pi: PiId,
    pub recorded: PlanningDecision,
    pub replayed: PlanningDecision,
    pub invariant_holds: bool,
    pub ranges_ok: bool,
    /// Undesired decision reproduced under a satisfied invariant premise.
    pub confirmed: bool,
}

/// Re-runs the subject on a recorded violation.
pub fn replay(v: &Violation) -> Result<ReplayReport> {
    v.scenario.validate().or_else(|e| match e {
        // A violation scenario may carry attacker objects the generic validator
        // would flag by range; the range check below reports those instead.
        Error::Validation { .. } => Ok(()),
        other => Err(other),
    })?;
    let mut trace = Trace::new();
    let replayed = v.subject.evaluate(&v.scenario, &mut trace)?;
    let pi = v.pi.invariant();
    let invariant_holds = check_pi(pi, &v.scenario);
    let ranges_ok = v
        .scenario
        .objects
        .iter()
        .all(|o| validate_ranges(o, &v.scenario.ego).is_ok());
    let confirmed = check_violation(pi, &v.scenario, &replayed).is_some() && replayed.verdict == v.decision.verdict;
    Ok(ReplayReport {
        subject: v.subject,
        pi: v.pi,
        recorded: v.decision.clone(),
        replayed,
        invariant_holds,
        ranges_ok,
        confirmed,
    })
}

/// Reads violations from a single violation document, a campaign result, or
/// JSON lines of either.
pub fn parse_violations(text: &str, origin: &str) -> Result<Vec<Violation>> {
    fn one(value: serde_json::Value) -> Option<Option<Violation>> {
        if let Ok(v) = serde_json::from_value::<Violation>(value.clone()) {
            return Some(Some(v));
        }
        serde_json::from_value::<CampaignResult>(value)
            .ok()
            .map(|r| r.violation().cloned())
    }
    let parse_err = |message: String| Error::Parse {
        path: origin.to_string(),
        message,
    };
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(text) {
        return match one(value) {
            Some(v) => Ok(v.into_iter().collect()),
            None => Err(parse_err("neither a violation nor a campaign result".into())),
        };
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| parse_err(format!("line {}: {e}", i + 1)))?;
        match one(value) {
            Some(v) => out.extend(v),
            None => return Err(parse_err(format!("line {}: neither a violation nor a campaign result", i + 1))),
        }
    }
    Ok(out)
}
