//! Planning invariants: the per-object constraint predicates, the registry of
//! invariants per scenario kind, and the violation oracle.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{LaneMap, Point2, Polygon};
use crate::scenario::{
    validate_ranges, ObjectType, PhysicalObject, PlanningScenario, ScenarioKind,
    SAFETY_FOLLOWING_DISTANCE,
};
use crate::subjects::{PlanningDecision, SubjectId};

/// Tolerance on the pedestrian heading test. A walker moving exactly parallel
/// to the road has a zero inner product with the direction toward the lane.
pub const HEADING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PiConstraintKind {
    #[serde(rename = "PI-C1")]
    StaticOffRoad,
    #[serde(rename = "PI-C2")]
    FollowingVehicle,
    #[serde(rename = "PI-C3")]
    IrrelevantVehicle,
    #[serde(rename = "PI-C4")]
    StaticOffRoadPedestrian,
    #[serde(rename = "PI-C5")]
    DynamicOffRoad,
    #[serde(rename = "SP-PI-C1")]
    StaticAheadOfBlocker,
    #[serde(rename = "SP-PI-C2")]
    VehicleParkedAheadOfBlocker,
}

impl PiConstraintKind {
    pub fn code(self) -> &'static str {
        match self {
            PiConstraintKind::StaticOffRoad => "PI-C1",
            PiConstraintKind::FollowingVehicle => "PI-C2",
            PiConstraintKind::IrrelevantVehicle => "PI-C3",
            PiConstraintKind::StaticOffRoadPedestrian => "PI-C4",
            PiConstraintKind::DynamicOffRoad => "PI-C5",
            PiConstraintKind::StaticAheadOfBlocker => "SP-PI-C1",
            PiConstraintKind::VehicleParkedAheadOfBlocker => "SP-PI-C2",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PiConstraintKind::StaticOffRoad => {
                "off-road, clear of every lane the ego plans to drive on"
            }
            PiConstraintKind::FollowingVehicle => "follows the ego in its lane",
            PiConstraintKind::IrrelevantVehicle => "drives on a lane the ego does not use",
            PiConstraintKind::StaticOffRoadPedestrian => "standing off-road",
            PiConstraintKind::DynamicOffRoad => "walking off-road, not toward the ego's lanes",
            PiConstraintKind::StaticAheadOfBlocker => "on-lane, in front of the blocking obstacle",
            PiConstraintKind::VehicleParkedAheadOfBlocker => {
                "parked on-lane in front of the blocking obstacle"
            }
        }
    }
}

impl fmt::Display for PiConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PiId {
    PI1,
    PI2,
    PI3,
    PI4,
    PI5,
    PI6,
    PI7,
}

impl PiId {
    pub const ALL: [PiId; 7] = [
        PiId::PI1,
        PiId::PI2,
        PiId::PI3,
        PiId::PI4,
        PiId::PI5,
        PiId::PI6,
        PiId::PI7,
    ];

    pub fn invariant(self) -> &'static PlanningInvariant {
        &REGISTRY[self as usize]
    }
}

impl fmt::Display for PiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for PiId {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<PiId> {
        PiId::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::Usage(format!("unknown planning invariant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesiredBehavior {
    KeepCruising,
    FinishLaneChange,
    FinishLaneBorrow,
    PassIntersection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningInvariant {
    pub id: PiId,
    pub kind: ScenarioKind,
    pub scenario: &'static str,
    pub desired: DesiredBehavior,
    pub static_obstacles: &'static [PiConstraintKind],
    pub vehicles: &'static [PiConstraintKind],
    pub pedestrians: &'static [PiConstraintKind],
}

impl PlanningInvariant {
    /// Constraint kinds an object of this type may satisfy. Parked bicycles
    /// are static obstacles.
    pub fn admissible(&self, kind: ObjectType) -> &'static [PiConstraintKind] {
        match kind {
            ObjectType::StaticObject | ObjectType::Bicycle => self.static_obstacles,
            ObjectType::Vehicle => self.vehicles,
            ObjectType::Pedestrian => self.pedestrians,
        }
    }
}

use PiConstraintKind as C;

const STATIC: &[C] = &[C::StaticOffRoad];
const VEHICLES: &[C] = &[C::FollowingVehicle, C::IrrelevantVehicle];
const PEDESTRIANS: &[C] = &[C::StaticOffRoadPedestrian, C::DynamicOffRoad];

static REGISTRY: [PlanningInvariant; 7] = [
    PlanningInvariant {
        id: PiId::PI1,
        kind: ScenarioKind::LaneFollowSingle,
        scenario: "lane following (single-lane road)",
        desired: DesiredBehavior::KeepCruising,
        static_obstacles: STATIC,
        vehicles: VEHICLES,
        pedestrians: PEDESTRIANS,
    },
    PlanningInvariant {
        id: PiId::PI2,
        kind: ScenarioKind::LaneFollowMulti,
        scenario: "lane following (multiple-lane road)",
        desired: DesiredBehavior::KeepCruising,
        static_obstacles: STATIC,
        vehicles: VEHICLES,
        pedestrians: PEDESTRIANS,
    },
    PlanningInvariant {
        id: PiId::PI3,
        kind: ScenarioKind::LaneChange,
        scenario: "lane change",
        desired: DesiredBehavior::FinishLaneChange,
        static_obstacles: STATIC,
        vehicles: VEHICLES,
        pedestrians: PEDESTRIANS,
    },
    PlanningInvariant {
        id: PiId::PI4,
        kind: ScenarioKind::LaneBorrow,
        scenario: "lane borrow (blocking obstacle)",
        desired: DesiredBehavior::FinishLaneBorrow,
        static_obstacles: &[C::StaticOffRoad, C::StaticAheadOfBlocker],
        vehicles: &[
            C::FollowingVehicle,
            C::IrrelevantVehicle,
            C::VehicleParkedAheadOfBlocker,
        ],
        pedestrians: PEDESTRIANS,
    },
    PlanningInvariant {
        id: PiId::PI5,
        kind: ScenarioKind::StopSignIntersection,
        scenario: "intersection with stop sign",
        desired: DesiredBehavior::PassIntersection,
        static_obstacles: STATIC,
        vehicles: VEHICLES,
        pedestrians: PEDESTRIANS,
    },
    PlanningInvariant {
        id: PiId::PI6,
        kind: ScenarioKind::SignalIntersection,
        scenario: "intersection with traffic signal",
        desired: DesiredBehavior::PassIntersection,
        static_obstacles: STATIC,
        vehicles: VEHICLES,
        pedestrians: PEDESTRIANS,
    },
    PlanningInvariant {
        id: PiId::PI7,
        kind: ScenarioKind::BareIntersection,
        scenario: "bare intersection",
        desired: DesiredBehavior::PassIntersection,
        static_obstacles: STATIC,
        vehicles: VEHICLES,
        pedestrians: PEDESTRIANS,
    },
];

pub fn registry() -> &'static [PlanningInvariant] {
    &REGISTRY
}

/// The invariant registered for a scenario kind.
pub fn pi_for_kind(kind: ScenarioKind) -> PiId {
    REGISTRY
        .iter()
        .find(|p| p.kind == kind)
        .map(|p| p.id)
        .expect("every scenario kind has an invariant")
}

fn point_in_band(map: &LaneMap, lane_id: u32, p: Point2) -> bool {
    match map.lane(lane_id) {
        Ok(lane) => lane.project(p).distance <= lane.half_width(),
        Err(_) => false,
    }
}

/// A single point is off-road when it lies strictly outside the band of every
/// route lane, outside the band of its nearest lane, and outside the junction.
pub fn point_off_road(p: Point2, scenario: &PlanningScenario) -> bool {
    let map = &scenario.map;
    if !p.is_finite() {
        return false;
    }
    if scenario.ego.route.iter().any(|&id| point_in_band(map, id, p)) {
        return false;
    }
    match map.nearest(p) {
        Ok((lane, pr)) if pr.distance <= lane.half_width() => return false,
        Err(_) => return false,
        _ => {}
    }
    if let Some(j) = &scenario.context.junction {
        if j.contains(p) {
            return false;
        }
    }
    true
}

fn polygon_off_road(poly: &Polygon, scenario: &PlanningScenario) -> bool {
    poly.points().iter().all(|&p| point_off_road(p, scenario))
        && scenario
            .context
            .junction
            .as_ref()
            .is_none_or(|j| !j.intersects(poly))
}

/// Every corner of the object's footprint is off-road.
pub fn static_off_road(x: &PhysicalObject, scenario: &PlanningScenario) -> bool {
    x.polygon()
        .map(|poly| polygon_off_road(&poly, scenario))
        .unwrap_or(false)
}

/// Unit vector from `p` toward the nearest point of any route lane centerline.
fn direction_toward_route(p: Point2, scenario: &PlanningScenario) -> Option<Point2> {
    let mut best: Option<(f64, Point2)> = None;
    for &id in &scenario.ego.route {
        if let Ok(lane) = scenario.map.lane(id) {
            let pr = lane.project(p);
            if best.is_none_or(|(d, _)| pr.distance < d) {
                best = Some((pr.distance, pr.foot));
            }
        }
    }
    let (d, foot) = best?;
    (d > 0.0).then(|| (foot - p) * (1.0 / d))
}

/// Off-road at every waypoint and not heading toward the route.
pub fn dynamic_off_road(x: &PhysicalObject, scenario: &PlanningScenario) -> bool {
    if x.trajectory.is_empty() {
        return false;
    }
    for w in &x.trajectory {
        match x.polygon_at(w.pos) {
            Ok(poly) if polygon_off_road(&poly, scenario) => {}
            _ => return false,
        }
    }
    let Some(dir) = direction_toward_route(x.center, scenario) else {
        return false;
    };
    Point2::from_heading(x.heading).dot(dir) <= HEADING_TOLERANCE
}

/// Lane ids reachable from `start` through successor links.
fn successor_chain(map: &LaneMap, start: u32) -> HashSet<u32> {
    let mut seen = HashSet::new();
    let mut stack = vec![start];
    while let Some(id) = stack.pop() {
        if seen.insert(id) {
            if let Ok(lane) = map.lane(id) {
                stack.extend(lane.successors.iter().copied());
            }
        }
    }
    seen
}

/// The vehicle stays on `lane_id` or its successors: the center of the current
/// pose and every waypoint sits inside the band of its nearest lane, and that
/// lane belongs to the successor chain.
pub fn drive_in_lane(x: &PhysicalObject, map: &LaneMap, lane_id: u32) -> bool {
    let chain = successor_chain(map, lane_id);
    let centers = std::iter::once(x.center).chain(x.trajectory.iter().map(|w| w.pos));
    for c in centers {
        match map.nearest(c) {
            Ok((lane, pr)) if chain.contains(&lane.id) && pr.distance < lane.half_width() => {}
            _ => return false,
        }
    }
    true
}

pub fn follow_vehicle(x: &PhysicalObject, scenario: &PlanningScenario) -> bool {
    if x.kind != ObjectType::Vehicle || !x.center.is_finite() {
        return false;
    }
    let Ok((lane, pr)) = scenario.map.nearest(x.center) else {
        return false;
    };
    let ego = scenario.ego_frenet();
    lane.id == scenario.ego_lane_id()
        && pr.s + SAFETY_FOLLOWING_DISTANCE < ego.s
        && x.speed <= scenario.ego.speed
        && drive_in_lane(x, &scenario.map, lane.id)
}

/// Lanes an irrelevant vehicle may not occupy: the route and the target lane.
pub fn excluded_lanes(scenario: &PlanningScenario) -> HashSet<u32> {
    let mut out: HashSet<u32> = scenario.ego.route.iter().copied().collect();
    out.extend(scenario.context.target_lane);
    out
}

pub fn irrelevant_vehicle(
    x: &PhysicalObject,
    scenario: &PlanningScenario,
    excluded: &HashSet<u32>,
) -> bool {
    if x.kind != ObjectType::Vehicle || !x.center.is_finite() {
        return false;
    }
    let map = &scenario.map;
    let Ok((lane, _)) = map.nearest(x.center) else {
        return false;
    };
    if lane.id == scenario.ego_lane_id() || excluded.contains(&lane.id) {
        return false;
    }
    if !drive_in_lane(x, map, lane.id) {
        return false;
    }
    x.trajectory.iter().all(|w| {
        map.nearest(w.pos)
            .is_ok_and(|(l, _)| l.id != scenario.ego_lane_id() && !excluded.contains(&l.id))
    })
}

/// On the ego lane with every corner longitudinally beyond the blocker.
fn ahead_of_blocker(x: &PhysicalObject, scenario: &PlanningScenario) -> bool {
    let Some(blocker) = scenario.context.blocker_id.and_then(|id| scenario.object(id)) else {
        return false;
    };
    if blocker.id == x.id {
        return false;
    }
    let Ok(lane) = scenario.map.lane(scenario.ego_lane_id()) else {
        return false;
    };
    let (Ok(bp), Ok(xp)) = (blocker.polygon(), x.polygon()) else {
        return false;
    };
    let blocker_max_s = bp
        .points()
        .iter()
        .map(|&p| lane.project(p).s)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = lane.project(x.center);
    c.distance < lane.half_width()
        && xp.points().iter().all(|&p| lane.project(p).s > blocker_max_s)
}

/// Evaluates a single constraint clause for one object.
pub fn satisfies(kind: PiConstraintKind, x: &PhysicalObject, scenario: &PlanningScenario) -> bool {
    let not_in_crosswalk = || {
        let Some(cw) = &scenario.context.crosswalk else {
            return true;
        };
        let current = x.polygon().is_ok_and(|p| !cw.intersects(&p));
        current
            && x
                .trajectory
                .iter()
                .all(|w| x.polygon_at(w.pos).is_ok_and(|p| !cw.intersects(&p)))
    };
    match kind {
        C::StaticOffRoad => x.kind.is_static_type() && x.is_static() && static_off_road(x, scenario),
        C::StaticOffRoadPedestrian => {
            x.kind == ObjectType::Pedestrian
                && x.speed == 0.0
                && static_off_road(x, scenario)
                && not_in_crosswalk()
        }
        C::DynamicOffRoad => {
            x.kind == ObjectType::Pedestrian
                && x.speed > 0.0
                && dynamic_off_road(x, scenario)
                && not_in_crosswalk()
        }
        C::FollowingVehicle => follow_vehicle(x, scenario),
        C::IrrelevantVehicle => irrelevant_vehicle(x, scenario, &excluded_lanes(scenario)),
        C::StaticAheadOfBlocker => {
            x.kind.is_static_type() && x.is_static() && ahead_of_blocker(x, scenario)
        }
        C::VehicleParkedAheadOfBlocker => {
            x.kind == ObjectType::Vehicle
                && x.speed == 0.0
                && x.trajectory.is_empty()
                && ahead_of_blocker(x, scenario)
        }
    }
}

/// Constraint clauses of `pi` that the object satisfies.
pub fn satisfied_constraints(
    pi: &PlanningInvariant,
    x: &PhysicalObject,
    scenario: &PlanningScenario,
) -> Vec<PiConstraintKind> {
    pi.admissible(x.kind)
        .iter()
        .copied()
        .filter(|&k| satisfies(k, x, scenario))
        .collect()
}

/// The "safe to drive" premise: every object other than the blocker satisfies
/// at least one admissible clause. Returns false when the scenario kind does
/// not match the invariant.
pub fn check_pi(pi: &PlanningInvariant, scenario: &PlanningScenario) -> bool {
    if pi.kind != scenario.kind {
        return false;
    }
    scenario
        .objects
        .iter()
        .filter(|o| Some(o.id) != scenario.context.blocker_id)
        .all(|o| o.is_well_formed() && pi.admissible(o.kind).iter().any(|&k| satisfies(k, o, scenario)))
}

/// A discovered denial-of-service: the invariant's premise holds and the
/// subject still gave up the desired behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub pi: PiId,
    pub subject: SubjectId,
    pub target: String,
    pub decision: PlanningDecision,
    /// Objects other than the blocker, i.e. the attacker's placement.
    pub objects: Vec<PhysicalObject>,
    pub scenario: PlanningScenario,
}

pub fn check_violation(
    pi: &PlanningInvariant,
    scenario: &PlanningScenario,
    decision: &PlanningDecision,
) -> Option<Violation> {
    if !decision.verdict.is_undesired() {
        return None;
    }
    let ranges_ok = scenario
        .objects
        .iter()
        .all(|o| validate_ranges(o, &scenario.ego).is_ok());
    if !ranges_ok || !check_pi(pi, scenario) {
        return None;
    }
    Some(Violation {
        pi: pi.id,
        subject: decision.subject,
        target: decision.target.clone().unwrap_or_default(),
        decision: decision.clone(),
        objects: scenario
            .objects
            .iter()
            .filter(|o| Some(o.id) != scenario.context.blocker_id)
            .cloned()
            .collect(),
        scenario: scenario.clone(),
    })
}
