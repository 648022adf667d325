//! Instrumented reference decision procedures.
//!
//! Each subject is a pure function of a [`PlanningScenario`]. While it runs it
//! reports every instrumented branch to a [`Trace`], and it records the attack
//! target when the undesired decision is reached.

mod apollo;
mod autoware;
pub mod graph;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Lane, Polygon};
use crate::invariants::PiId;
use crate::scenario::{PhysicalObject, PlanningScenario, ScenarioKind};

pub use graph::{DependenceGraph, DepKind, GraphEdge, GraphNode, PredicateClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectId {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
    V9,
}

impl SubjectId {
    pub const ALL: [SubjectId; 9] = [
        SubjectId::V1,
        SubjectId::V2,
        SubjectId::V3,
        SubjectId::V4,
        SubjectId::V5,
        SubjectId::V6,
        SubjectId::V7,
        SubjectId::V8,
        SubjectId::V9,
    ];

    pub fn scenario_kind(self) -> ScenarioKind {
        match self {
            SubjectId::V1 | SubjectId::V8 | SubjectId::V9 => ScenarioKind::LaneFollowSingle,
            SubjectId::V2 => ScenarioKind::LaneChange,
            SubjectId::V3 | SubjectId::V4 => ScenarioKind::LaneBorrow,
            SubjectId::V5 | SubjectId::V6 => ScenarioKind::SignalIntersection,
            SubjectId::V7 => ScenarioKind::StopSignIntersection,
        }
    }

    pub fn default_pi(self) -> PiId {
        match self {
            SubjectId::V1 | SubjectId::V8 | SubjectId::V9 => PiId::PI1,
            SubjectId::V2 => PiId::PI3,
            SubjectId::V3 | SubjectId::V4 => PiId::PI4,
            SubjectId::V5 | SubjectId::V6 => PiId::PI6,
            SubjectId::V7 => PiId::PI5,
        }
    }

    /// Bundled seed scenario for this subject.
    pub fn fixture(self) -> &'static str {
        match self {
            SubjectId::V1 => "v1_narrow_lane.json",
            SubjectId::V2 => "v2_lane_change.json",
            SubjectId::V3 => "v3_lane_borrow.json",
            SubjectId::V4 => "v4_lane_borrow_offroad.json",
            SubjectId::V5 => "v5_signal_standing.json",
            SubjectId::V6 => "v6_signal_walking.json",
            SubjectId::V7 => "v7_stop_sign.json",
            SubjectId::V8 => "v8_autoware_static.json",
            SubjectId::V9 => "v9_autoware_dynamic.json",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            SubjectId::V1 => "lane following: path bounds with lateral obstacle buffer",
            SubjectId::V2 => "lane change: target-lane clearance check",
            SubjectId::V3 => "lane borrow: blocking obstacle movability",
            SubjectId::V4 => "lane borrow: perception-blocked beam scan",
            SubjectId::V5 => "signal intersection: standing pedestrian near crosswalk",
            SubjectId::V6 => "signal intersection: walking pedestrian near crosswalk",
            SubjectId::V7 => "stop-sign intersection: watch list",
            SubjectId::V8 => "lane following: static obstacle candidate rollouts",
            SubjectId::V9 => "lane following: dynamic obstacle path check",
        }
    }

    /// The dependence graph that drives the distance fitness.
    pub fn graph(self) -> &'static DependenceGraph {
        static GRAPHS: OnceLock<Vec<DependenceGraph>> = OnceLock::new();
        let all = GRAPHS.get_or_init(|| {
            GRAPH_SOURCES
                .iter()
                .map(|(name, text)| {
                    DependenceGraph::from_json(text)
                        .unwrap_or_else(|e| panic!("bundled graph {name} is invalid: {e}"))
                })
                .collect()
        });
        &all[self as usize]
    }

    pub fn evaluate(self, scenario: &PlanningScenario, trace: &mut Trace) -> Result<PlanningDecision> {
        self.evaluate_with(&SubjectConfig::default(), scenario, trace)
    }

    pub fn evaluate_with(
        self,
        cfg: &SubjectConfig,
        scenario: &PlanningScenario,
        trace: &mut Trace,
    ) -> Result<PlanningDecision> {
        if scenario.kind != self.scenario_kind() {
            return Err(Error::Usage(format!(
                "subject {self} expects a {:?} scenario, got {:?}",
                self.scenario_kind(),
                scenario.kind
            )));
        }
        match self {
            SubjectId::V1 => apollo::v1_path_bounds(cfg, scenario, trace),
            SubjectId::V2 => apollo::v2_lane_change_clear(cfg, scenario, trace),
            SubjectId::V3 => apollo::v3_blocker_movable(cfg, scenario, trace),
            SubjectId::V4 => apollo::v4_perception_blocked(cfg, scenario, trace),
            SubjectId::V5 => apollo::v5_crosswalk_static(cfg, scenario, trace),
            SubjectId::V6 => apollo::v6_crosswalk_moving(cfg, scenario, trace),
            SubjectId::V7 => apollo::v7_stop_sign_watch_list(cfg, scenario, trace),
            SubjectId::V8 => autoware::v8_static_block(cfg, scenario, trace),
            SubjectId::V9 => autoware::v9_dynamic_block(cfg, scenario, trace),
        }
    }
}

const GRAPH_SOURCES: [(&str, &str); 9] = [
    ("v1", include_str!("../../graphs/v1.json")),
    ("v2", include_str!("../../graphs/v2.json")),
    ("v3", include_str!("../../graphs/v3.json")),
    ("v4", include_str!("../../graphs/v4.json")),
    ("v5", include_str!("../../graphs/v5.json")),
    ("v6", include_str!("../../graphs/v6.json")),
    ("v7", include_str!("../../graphs/v7.json")),
    ("v8", include_str!("../../graphs/v8.json")),
    ("v9", include_str!("../../graphs/v9.json")),
];

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", *self as usize + 1)
    }
}

impl FromStr for SubjectId {
    type Err = Error;

    fn from_str(s: &str) -> Result<SubjectId> {
        SubjectId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown subject `{s}` (expected v1..v9)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Blocked,
    Clear,
    ClearToChange,
    NotClear,
    Movable,
    NonMovable,
    PerceptionBlocked,
    Ok,
    Stop,
    Proceed,
    FullyBlocked,
}

impl Verdict {
    /// Verdicts that give up the desired driving behavior.
    pub fn is_undesired(self) -> bool {
        matches!(
            self,
            Verdict::Blocked
                | Verdict::NotClear
                | Verdict::NonMovable
                | Verdict::PerceptionBlocked
                | Verdict::Stop
                | Verdict::FullyBlocked
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningDecision {
    pub subject: SubjectId,
    pub verdict: Verdict,
    pub reason: String,
    /// Attack target reached, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// One execution of an instrumented branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredicateEvent {
    pub predicate: &'static str,
    /// Value the branch condition evaluated to.
    pub outcome: bool,
    /// Absolute difference between the compared operands; 0 for flags.
    pub diff: f64,
}

/// Branch events and attack targets collected during one evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<PredicateEvent>,
    pub targets: Vec<&'static str>,
}

impl Trace {
    pub fn new() -> Trace {
        Trace::default()
    }

    /// Records a branch and hands its outcome back so the call can sit
    /// directly inside an `if`.
    pub fn branch(&mut self, predicate: &'static str, outcome: bool, diff: f64) -> bool {
        self.events.push(PredicateEvent {
            predicate,
            outcome,
            diff: diff.abs(),
        });
        outcome
    }

    pub fn hit(&mut self, target: &'static str) {
        if !self.targets.contains(&target) {
            self.targets.push(target);
        }
    }

    pub fn clear(&mut self) {
        self.events.clear();
        self.targets.clear();
    }
}

/// Tunable constants of the subjects. Defaults reproduce the published
/// pseudocode; the unvalued ones carry the documented choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubjectConfig {
    pub v1_lateral_buffer: f64,
    pub v1_slice_gap: f64,
    pub v1_lookahead: f64,
    pub v2_lateral_filter: f64,
    pub v2_backward_buffer: f64,
    pub v3_threshold: f64,
    pub v4_search_range: f64,
    pub v4_beam_length: f64,
    pub v4_beam_intensity: f64,
    pub v4_block_angle: f64,
    pub v6_strict_l_distance: f64,
    pub v7_lane_radius: f64,
    pub v7_max_stop_distance: f64,
    pub v7_timeout_cycles: u32,
    pub v8_candidates: usize,
    pub v8_candidate_spacing: f64,
    pub v8_lateral_margin: f64,
    pub v8_following_distance: f64,
    pub v9_lateral_margin: f64,
    pub v9_path_points: usize,
    pub v9_path_spacing: f64,
}

impl Default for SubjectConfig {
    fn default() -> Self {
        SubjectConfig {
            v1_lateral_buffer: 0.4,
            v1_slice_gap: 5.0,
            v1_lookahead: 60.0,
            v2_lateral_filter: 2.5,
            v2_backward_buffer: 4.0,
            v3_threshold: 8.0,
            v4_search_range: std::f64::consts::PI,
            v4_beam_length: 20.0,
            v4_beam_intensity: 0.08,
            v4_block_angle: 0.5,
            v6_strict_l_distance: 6.0,
            v7_lane_radius: 5.0,
            v7_max_stop_distance: 3.0,
            v7_timeout_cycles: 80,
            v8_candidates: 7,
            v8_candidate_spacing: 0.5,
            v8_lateral_margin: 1.2,
            v8_following_distance: 35.0,
            v9_lateral_margin: 1.2,
            v9_path_points: 51,
            v9_path_spacing: 1.0,
        }
    }
}

/// Axis-aligned extent of a footprint in a lane's Frenet frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FrenetBox {
    pub min_s: f64,
    pub max_s: f64,
    pub min_l: f64,
    pub max_l: f64,
}

impl FrenetBox {
    pub fn of(lane: &Lane, poly: &Polygon) -> FrenetBox {
        let mut b = FrenetBox {
            min_s: f64::INFINITY,
            max_s: f64::NEG_INFINITY,
            min_l: f64::INFINITY,
            max_l: f64::NEG_INFINITY,
        };
        for &p in poly.points() {
            let pr = lane.project(p);
            b.min_s = b.min_s.min(pr.s);
            b.max_s = b.max_s.max(pr.s);
            b.min_l = b.min_l.min(pr.l);
            b.max_l = b.max_l.max(pr.l);
        }
        b
    }

    /// Lateral extent in the planner's right-positive convention, as
    /// `(start_l, end_l)`.
    pub fn right_positive(&self) -> (f64, f64) {
        (-self.max_l, -self.min_l)
    }
}

/// Objects a subject can reason about, ordered by id.
pub(crate) fn sorted_objects(scenario: &PlanningScenario) -> Vec<&PhysicalObject> {
    let mut objs: Vec<&PhysicalObject> = scenario.objects.iter().filter(|o| o.is_well_formed()).collect();
    objs.sort_by_key(|o| o.id);
    objs
}

pub(crate) fn decision(
    subject: SubjectId,
    verdict: Verdict,
    reason: impl Into<String>,
    target: Option<&str>,
) -> PlanningDecision {
    PlanningDecision {
        subject,
        verdict,
        reason: reason.into(),
        target: target.map(str::to_string),
    }
}
