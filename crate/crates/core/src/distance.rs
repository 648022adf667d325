//! Vulnerability distance: how far an execution trace is from reaching an
//! attack target, combining graph distance with operand closeness.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subjects::graph::{DependenceGraph, PredicateClass};
use crate::subjects::{SubjectId, Trace};

/// Default weight of non-critical predicates.
pub const DEFAULT_WEIGHT_C: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub predicate: String,
    pub class: PredicateClass,
    pub cfd: u32,
    /// Branch outcome that leads toward a target. Only set for critical predicates.
    pub reachable_when: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub subject: SubjectId,
    pub entries: Vec<ProfileEntry>,
}

impl DistanceProfile {
    pub fn from_graph(graph: &DependenceGraph) -> Result<DistanceProfile> {
        let mut entries = Vec::new();
        for (id, class, reachable_when) in graph.predicates() {
            let cfd = graph
                .cfd(id)
                .ok_or_else(|| Error::Profile(format!("predicate `{id}` cannot reach a target")))?;
            if cfd == 0 {
                return Err(Error::Profile(format!("predicate `{id}` has zero control distance")));
            }
            let reachable_when = match class {
                PredicateClass::Critical => Some(reachable_when.ok_or_else(|| {
                    Error::Profile(format!("critical predicate `{id}` lacks a reachable side"))
                })?),
                PredicateClass::NonCritical => None,
            };
            entries.push(ProfileEntry {
                predicate: id.to_string(),
                class,
                cfd,
                reachable_when,
            });
        }
        Ok(DistanceProfile {
            subject: graph.subject,
            entries,
        })
    }

    pub fn for_subject(subject: SubjectId) -> DistanceProfile {
        DistanceProfile::from_graph(subject.graph()).expect("bundled graphs are validated on load")
    }

    pub fn entry(&self, predicate: &str) -> Option<&ProfileEntry> {
        self.entries.iter().find(|e| e.predicate == predicate)
    }

    /// Distance of a trace that executes no predicate at all.
    pub fn upper_bound(&self, c: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| match e.class {
                PredicateClass::Critical => f64::from(e.cfd),
                PredicateClass::NonCritical => c * f64::from(e.cfd),
            })
            .sum()
    }
}

/// Execution counts and operand extremes of one predicate in one evaluation.
///
/// For critical predicates side 1 is the branch leading to the target; for
/// non-critical predicates side 1 is the `true` outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchStats {
    pub n1: u32,
    pub n2: u32,
    pub min_op: Option<f64>,
    pub min_op_1: Option<f64>,
    pub min_op_2: Option<f64>,
    pub max_op: Option<f64>,
    pub max_op_1: Option<f64>,
    pub max_op_2: Option<f64>,
}

fn fold_min(acc: Option<f64>, x: f64) -> Option<f64> {
    Some(acc.map_or(x, |a| a.min(x)))
}

fn fold_max(acc: Option<f64>, x: f64) -> Option<f64> {
    Some(acc.map_or(x, |a| a.max(x)))
}

impl BranchStats {
    pub fn record(&mut self, side_one: bool, diff: f64) {
        if side_one {
            self.n1 += 1;
        } else {
            self.n2 += 1;
        }
        if !diff.is_finite() {
            return;
        }
        let diff = diff.abs();
        self.min_op = fold_min(self.min_op, diff);
        self.max_op = fold_max(self.max_op, diff);
        if side_one {
            self.min_op_1 = fold_min(self.min_op_1, diff);
            self.max_op_1 = fold_max(self.max_op_1, diff);
        } else {
            self.min_op_2 = fold_min(self.min_op_2, diff);
            self.max_op_2 = fold_max(self.max_op_2, diff);
        }
    }

    pub fn executions(&self) -> u32 {
        self.n1 + self.n2
    }
}

/// Groups trace events by predicate. Predicates outside the profile are ignored.
pub fn collect_stats(profile: &DistanceProfile, trace: &Trace) -> BTreeMap<String, BranchStats> {
    let mut out: BTreeMap<String, BranchStats> = BTreeMap::new();
    for ev in &trace.events {
        let Some(entry) = profile.entry(ev.predicate) else { continue };
        let side_one = match entry.reachable_when {
            Some(want) => ev.outcome == want,
            None => ev.outcome,
        };
        out.entry(entry.predicate.clone()).or_default().record(side_one, ev.diff);
    }
    out
}

/// Largest operand differences seen so far for one predicate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub max: f64,
    pub max_1: f64,
    pub max_2: f64,
}

impl HistoryEntry {
    fn absorb(&mut self, other: &HistoryEntry) {
        self.max = self.max.max(other.max);
        self.max_1 = self.max_1.max(other.max_1);
        self.max_2 = self.max_2.max(other.max_2);
    }
}

/// Campaign-wide operand history. Entries only ever grow.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    entries: BTreeMap<String, HistoryEntry>,
}

impl History {
    pub fn new() -> History {
        History::default()
    }

    pub fn get(&self, predicate: &str) -> HistoryEntry {
        self.entries.get(predicate).copied().unwrap_or_default()
    }

    pub fn update(&mut self, stats: &BTreeMap<String, BranchStats>) {
        for (id, s) in stats {
            let seen = HistoryEntry {
                max: s.max_op.unwrap_or(0.0),
                max_1: s.max_op_1.unwrap_or(0.0),
                max_2: s.max_op_2.unwrap_or(0.0),
            };
            self.entries.entry(id.clone()).or_default().absorb(&seen);
        }
    }

    pub fn merge(&mut self, other: &History) {
        for (id, h) in &other.entries {
            self.entries.entry(id.clone()).or_default().absorb(h);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn ratio(min: Option<f64>, max: f64) -> f64 {
    match min {
        None => 1.0,
        Some(_) if max <= 0.0 => 0.0,
        Some(m) => (m / max).clamp(0.0, 1.0),
    }
}

pub fn dfd_critical(stats: Option<&BranchStats>, hist: &HistoryEntry) -> f64 {
    let Some(s) = stats.filter(|s| s.executions() > 0) else { return 1.0 };
    let total = f64::from(s.executions());
    f64::from(s.n2) / total * ratio(s.min_op, hist.max)
}

pub fn dfd_noncritical(stats: Option<&BranchStats>, hist: &HistoryEntry) -> f64 {
    let Some(s) = stats.filter(|s| s.executions() > 0) else { return 1.0 };
    let total = f64::from(s.executions());
    let side1 = if s.n1 > 0 { f64::from(s.n1) / total * ratio(s.min_op_1, hist.max_1) } else { 0.0 };
    let side2 = if s.n2 > 0 { f64::from(s.n2) / total * ratio(s.min_op_2, hist.max_2) } else { 0.0 };
    side1 + side2
}

pub fn bpvd(
    profile: &DistanceProfile,
    stats: &BTreeMap<String, BranchStats>,
    history: &History,
    c: f64,
) -> f64 {
    let mut critical = 0.0;
    let mut non_critical = 0.0;
    for e in &profile.entries {
        let s = stats.get(&e.predicate);
        let h = history.get(&e.predicate);
        let cfd = f64::from(e.cfd);
        match e.class {
            PredicateClass::Critical => critical += cfd * dfd_critical(s, &h),
            PredicateClass::NonCritical => non_critical += cfd * dfd_noncritical(s, &h),
        }
    }
    critical + c * non_critical
}

/// Scores one trace against a frozen history snapshot.
///
/// Returns the distance together with the snapshot extended by this trace,
/// which callers merge back at the generation boundary.
pub fn score(profile: &DistanceProfile, trace: &Trace, snapshot: &History, c: f64) -> (f64, History) {
    let stats = collect_stats(profile, trace);
    let mut local = snapshot.clone();
    local.update(&stats);
    (bpvd(profile, &stats, &local, c), local)
}
