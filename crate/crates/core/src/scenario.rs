//! Scenario data model: road objects, ego state, planning scenarios and the
//! valid-range rules every generated object has to respect.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{object_polygon, LaneMap, Point2, Polygon};

/// Default prediction horizon for synthesized trajectories (seconds).
pub const DEFAULT_HORIZON: f64 = 8.0;
/// Default sampling period for synthesized trajectories (seconds).
pub const DEFAULT_DT: f64 = 0.5;
/// Longitudinal gap a following vehicle keeps behind the ego (meters).
pub const SAFETY_FOLLOWING_DISTANCE: f64 = 5.0;
/// Objects must lie within this distance of the ego on each axis (meters).
pub const POSITION_RANGE: f64 = 80.0;
pub const DEFAULT_EGO_WIDTH: f64 = 2.11;
pub const DEFAULT_EGO_LENGTH: f64 = 4.93;

pub const STATIC_DIM_RANGE: (f64, f64) = (0.5, 2.0);
pub const PEDESTRIAN_DIMS: [f64; 3] = [0.50, 0.50, 1.80];
pub const PEDESTRIAN_MAX_SPEED: f64 = 1.4;
pub const VEHICLE_DIMS: [f64; 3] = [4.70, 2.06, 2.05];
pub const BICYCLE_DIMS: [f64; 3] = [1.80, 0.50, 1.00];

const DIM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectType {
    Pedestrian,
    Vehicle,
    Bicycle,
    StaticObject,
}

impl ObjectType {
    pub const ALL: [ObjectType; 4] = [
        ObjectType::Pedestrian,
        ObjectType::Vehicle,
        ObjectType::Bicycle,
        ObjectType::StaticObject,
    ];

    /// Types that never move (cardboard boxes, parked bicycles).
    pub fn is_static_type(self) -> bool {
        matches!(self, ObjectType::StaticObject | ObjectType::Bicycle)
    }
}

impl fmt::Display for ObjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObjectType::Pedestrian => "pedestrian",
            ObjectType::Vehicle => "vehicle",
            ObjectType::Bicycle => "bicycle",
            ObjectType::StaticObject => "static_object",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub pos: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalObject {
    pub id: u32,
    #[serde(rename = "type")]
    pub kind: ObjectType,
    pub center: Point2,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub trajectory: Vec<Waypoint>,
}

impl PhysicalObject {
    /// Box with the canonical dimensions of its type and no motion.
    pub fn new(id: u32, kind: ObjectType, center: Point2, heading: f64) -> PhysicalObject {
        let [length, width, height] = match kind {
            ObjectType::Pedestrian => PEDESTRIAN_DIMS,
            ObjectType::Vehicle => VEHICLE_DIMS,
            ObjectType::Bicycle => BICYCLE_DIMS,
            ObjectType::StaticObject => [1.0, 1.0, 1.0],
        };
        PhysicalObject {
            id,
            kind,
            center,
            length,
            width,
            height,
            heading,
            speed: 0.0,
            trajectory: Vec::new(),
        }
    }

    pub fn with_dims(mut self, length: f64, width: f64, height: f64) -> Self {
        self.length = length;
        self.width = width;
        self.height = height;
        self
    }

    pub fn polygon(&self) -> Result<Polygon> {
        object_polygon(self.center, self.length, self.width, self.heading)
    }

    /// Footprint translated to a trajectory waypoint.
    pub fn polygon_at(&self, pos: Point2) -> Result<Polygon> {
        object_polygon(pos, self.length, self.width, self.heading)
    }

    /// Stationary in the planning sense: zero speed or no predicted motion.
    pub fn is_static(&self) -> bool {
        self.speed == 0.0 || self.trajectory.is_empty()
    }

    pub fn velocity(&self) -> Point2 {
        Point2::from_heading(self.heading) * self.speed
    }

    /// All numeric fields finite and dimensions positive.
    pub fn is_well_formed(&self) -> bool {
        self.center.is_finite()
            && [self.length, self.width, self.height, self.heading, self.speed]
                .iter()
                .all(|v| v.is_finite())
            && self.length > 0.0
            && self.width > 0.0
            && self.trajectory.iter().all(|w| w.pos.is_finite() && w.t.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoState {
    pub position: Point2,
    pub heading: f64,
    pub speed: f64,
    #[serde(default = "default_ego_width")]
    pub width: f64,
    #[serde(default = "default_ego_length")]
    pub length: f64,
    /// Lane ids the ego plans to drive on, starting with its current lane.
    pub route: Vec<u32>,
}

fn default_ego_width() -> f64 {
    DEFAULT_EGO_WIDTH
}

fn default_ego_length() -> f64 {
    DEFAULT_EGO_LENGTH
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    LaneFollowSingle,
    LaneFollowMulti,
    LaneChange,
    LaneBorrow,
    StopSignIntersection,
    SignalIntersection,
    BareIntersection,
}

impl ScenarioKind {
    pub fn is_intersection(self) -> bool {
        matches!(
            self,
            ScenarioKind::StopSignIntersection
                | ScenarioKind::SignalIntersection
                | ScenarioKind::BareIntersection
        )
    }
}

/// A stop line on a lane guarded by a stop sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopLine {
    pub lane: u32,
    pub stop_s: f64,
}

/// Scenario-specific data. Which fields are required depends on the kind.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioContext {
    /// Lane-borrow: id of the obstacle blocking the ego lane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocker_id: Option<u32>,
    /// Lane change: target lane. Lane borrow: the borrowed lane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_lane: Option<u32>,
    /// Intersections: stop-line arclength on the ego's current lane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_line_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crosswalk: Option<Polygon>,
    /// Intersections: the junction area shared by crossing lanes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub junction: Option<Polygon>,
    /// Stop-sign intersections: approach lanes guarded by the sign.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub associated_lanes: Vec<StopLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningScenario {
    pub map: Arc<LaneMap>,
    pub ego: EgoState,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub context: ScenarioContext,
    #[serde(default)]
    pub objects: Vec<PhysicalObject>,
}

impl PlanningScenario {
    /// Parses and validates a scenario from JSON text. `origin` names the
    /// source in error messages.
    pub fn from_json(text: &str, origin: &str) -> Result<PlanningScenario> {
        let sc: PlanningScenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks lane references, kind/context consistency and object ranges.
    pub fn validate(&self) -> Result<()> {
        if self.map.is_empty() {
            return Err(Error::Config("map has no lanes".into()));
        }
        if self.ego.route.is_empty() {
            return Err(Error::validation("ego.route", "must name at least one lane"));
        }
        for &id in &self.ego.route {
            self.map.lane(id)?;
        }
        for w in self.ego.route.windows(2) {
            if !self.map.lane(w[0])?.successors.contains(&w[1]) && self.kind != ScenarioKind::LaneChange
            {
                return Err(Error::validation(
                    "ego.route",
                    format!("lane {} is not a successor of lane {}", w[1], w[0]),
                ));
            }
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !self.ego.position.is_finite() || !positive(self.ego.width) || !positive(self.ego.length) {
            return Err(Error::validation("ego", "invalid pose or dimensions"));
        }
        if self.ego.speed.is_nan() || self.ego.speed < 0.0 {
            return Err(Error::validation("ego.speed", "must be non-negative"));
        }
        self.validate_context()?;
        let mut ids = std::collections::HashSet::new();
        for (i, obj) in self.objects.iter().enumerate() {
            if !ids.insert(obj.id) {
                return Err(Error::validation(
                    format!("objects[{i}].id"),
                    format!("duplicate object id {}", obj.id),
                ));
            }
            if let Err(v) = validate_ranges(obj, &self.ego) {
                let first = &v[0];
                return Err(Error::validation(
                    format!("objects[{i}].{}", first.field),
                    first.message.clone(),
                ));
            }
        }
        Ok(())
    }

    fn validate_context(&self) -> Result<()> {
        let c = &self.context;
        let need = |present: bool, what: &str| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(Error::Context(format!("{:?} scenario requires `{what}`", self.kind)))
            }
        };
        match self.kind {
            ScenarioKind::LaneFollowSingle | ScenarioKind::LaneFollowMulti => {}
            ScenarioKind::LaneChange => need(c.target_lane.is_some(), "target_lane")?,
            ScenarioKind::LaneBorrow => {
                need(c.blocker_id.is_some(), "blocker_id")?;
                need(c.target_lane.is_some(), "target_lane")?;
                let id = c.blocker_id.unwrap_or_default();
                if !self.objects.iter().any(|o| o.id == id) {
                    return Err(Error::Context(format!("blocker {id} is not among the objects")));
                }
            }
            ScenarioKind::StopSignIntersection => {
                need(c.stop_line_s.is_some(), "stop_line_s")?;
                need(!c.associated_lanes.is_empty(), "associated_lanes")?;
            }
            ScenarioKind::SignalIntersection => {
                need(c.stop_line_s.is_some(), "stop_line_s")?;
                need(c.crosswalk.is_some(), "crosswalk")?;
            }
            ScenarioKind::BareIntersection => need(c.stop_line_s.is_some(), "stop_line_s")?,
        }
        if let Some(t) = c.target_lane {
            self.map.lane(t)?;
        }
        for a in &c.associated_lanes {
            self.map.lane(a.lane)?;
        }
        Ok(())
    }

    /// Copy of this scenario with `extra` objects appended.
    pub fn with_objects(&self, extra: &[PhysicalObject]) -> PlanningScenario {
        let mut sc = self.clone();
        sc.objects.extend_from_slice(extra);
        sc
    }

    pub fn ego_lane_id(&self) -> u32 {
        self.ego.route[0]
    }

    /// Ego pose in the Frenet frame of its current lane.
    pub fn ego_frenet(&self) -> crate::geom::FrenetPose {
        let lane = self
            .map
            .lane(self.ego_lane_id())
            .expect("validated route lane exists");
        lane.frenet(self.ego.position)
    }

    /// The ego's reference line: route centerlines joined end to end.
    pub fn route_polyline(&self) -> Vec<Point2> {
        let mut pts: Vec<Point2> = Vec::new();
        for &id in &self.ego.route {
            if let Ok(lane) = self.map.lane(id) {
                for &p in lane.centerline.points() {
                    if pts.last().is_none_or(|q| q.distance(p) > 1e-9) {
                        pts.push(p);
                    }
                }
            }
        }
        pts
    }

    pub fn object(&self, id: u32) -> Option<&PhysicalObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<PlanningScenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PlanningScenario::from_json(&text, &path.display().to_string())
}

pub fn save_scenario(scenario: &PlanningScenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scenario.to_json()).map_err(|e| Error::io(path, e))
}

/// A base scenario plus the attacker-controlled objects that evolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub base: PlanningScenario,
    #[serde(default)]
    pub genome: Vec<PhysicalObject>,
}

impl Seed {
    pub fn new(base: PlanningScenario) -> Seed {
        Seed {
            base,
            genome: Vec::new(),
        }
    }
}

/// One failed valid-range rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for RangeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks an object against the per-type valid ranges. Never fails early:
/// every broken rule is reported.
pub fn validate_ranges(
    obj: &PhysicalObject,
    ego: &EgoState,
) -> std::result::Result<(), Vec<RangeViolation>> {
    let mut out = Vec::new();
    let mut bad = |field: &'static str, message: String| out.push(RangeViolation { field, message });

    let dx = obj.center.x - ego.position.x;
    let dy = obj.center.y - ego.position.y;
    if !(dx.abs() <= POSITION_RANGE && dy.abs() <= POSITION_RANGE) {
        bad(
            "center",
            format!("offset ({dx:.3}, {dy:.3}) from ego exceeds ±{POSITION_RANGE} m"),
        );
    }
    let dims = [obj.length, obj.width, obj.height];
    let exact = |want: [f64; 3]| dims.iter().zip(want).all(|(d, w)| (d - w).abs() <= DIM_TOL);
    let heading_ok = |hi: f64| obj.heading >= 0.0 && obj.heading < hi;

    if !obj.speed.is_finite() || obj.speed < 0.0 {
        bad("speed", format!("must be a non-negative number, got {}", obj.speed));
    }
    match obj.kind {
        ObjectType::StaticObject => {
            let (lo, hi) = STATIC_DIM_RANGE;
            if !dims.iter().all(|d| (lo..=hi).contains(d)) {
                bad("size", format!("each dimension must lie in [{lo}, {hi}], got {dims:?}"));
            }
        }
        ObjectType::Pedestrian => {
            if !exact(PEDESTRIAN_DIMS) {
                bad("size", format!("pedestrian must be {PEDESTRIAN_DIMS:?}, got {dims:?}"));
            }
            if obj.speed > PEDESTRIAN_MAX_SPEED {
                bad(
                    "speed",
                    format!("pedestrian speed must be 0 or in (0, {PEDESTRIAN_MAX_SPEED}], got {}", obj.speed),
                );
            }
        }
        ObjectType::Vehicle => {
            if !exact(VEHICLE_DIMS) {
                bad("size", format!("vehicle must be {VEHICLE_DIMS:?}, got {dims:?}"));
            }
            if obj.speed > 0.0 && (obj.speed - ego.speed).abs() > DIM_TOL {
                bad(
                    "speed",
                    format!("moving vehicle must match ego speed {}, got {}", ego.speed, obj.speed),
                );
            }
        }
        ObjectType::Bicycle => {
            if !exact(BICYCLE_DIMS) {
                bad("size", format!("bicycle must be {BICYCLE_DIMS:?}, got {dims:?}"));
            }
        }
    }
    if obj.kind.is_static_type() {
        if obj.speed != 0.0 {
            bad("speed", format!("{} must be stationary, got {}", obj.kind, obj.speed));
        }
        if !obj.trajectory.is_empty() {
            bad("trajectory", format!("{} must have an empty trajectory", obj.kind));
        }
        if !heading_ok(std::f64::consts::PI) {
            bad("heading", format!("must lie in [0, π), got {}", obj.heading));
        }
    } else {
        if !heading_ok(2.0 * std::f64::consts::PI) {
            bad("heading", format!("must lie in [0, 2π), got {}", obj.heading));
        }
        if obj.speed > 0.0 && obj.trajectory.len() < 2 {
            bad("trajectory", "a moving object needs at least 2 waypoints".into());
        }
        if obj.speed == 0.0 && !obj.trajectory.is_empty() {
            bad("trajectory", "a stationary object must have an empty trajectory".into());
        }
    }
    if !obj.is_well_formed() {
        bad("object", "non-finite or non-positive geometry".into());
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Predicts future waypoints for a moving object.
///
/// Pedestrians walk in a straight line along their heading. Vehicles keep
/// their lateral offset and advance along their lane, continuing onto the
/// first successor lane whenever one exists.
pub fn synthesize_trajectory(
    obj: &PhysicalObject,
    map: &LaneMap,
    horizon: f64,
    dt: f64,
) -> Result<Vec<Waypoint>> {
    if obj.kind.is_static_type() || obj.speed == 0.0 {
        return Ok(Vec::new());
    }
    if !(dt > 0.0 && horizon >= 0.0) {
        return Err(Error::Synthesis(format!("invalid horizon {horizon} / dt {dt}")));
    }
    let n = (horizon / dt).round() as usize;
    let times = (0..=n).map(|k| k as f64 * dt);
    match obj.kind {
        ObjectType::Vehicle => {
            let (lane, pr) = map.nearest(obj.center)?;
            if pr.distance > lane.half_width() {
                return Err(Error::Synthesis(format!(
                    "vehicle {} is {:.2} m from the nearest lane {}, outside its width",
                    obj.id, pr.distance, lane.id
                )));
            }
            times
                .map(|t| {
                    let pos = advance_along_lanes(map, lane.id, pr.s + obj.speed * t, pr.l)?;
                    Ok(Waypoint { t, pos })
                })
                .collect()
        }
        _ => {
            let dir = Point2::from_heading(obj.heading);
            Ok(times
                .map(|t| Waypoint {
                    t,
                    pos: obj.center + dir * (obj.speed * t),
                })
                .collect())
        }
    }
}

/// World point at arclength `s` (possibly past the end of `lane_id`) with
/// lateral offset `l`, following first successors and extrapolating straight
/// past a dead end.
fn advance_along_lanes(map: &LaneMap, lane_id: u32, mut s: f64, l: f64) -> Result<Point2> {
    let mut lane = map.lane(lane_id)?;
    let mut hops = 0;
    while s > lane.length() {
        match lane.successors.first() {
            Some(&next) if hops < 64 => {
                s -= lane.length();
                lane = map.lane(next)?;
                hops += 1;
            }
            _ => {
                let len = lane.length();
                let end = lane.centerline.offset_point(len, l);
                return Ok(end + Point2::from_heading(lane.heading(len)) * (s - len));
            }
        }
    }
    Ok(lane.centerline.offset_point(s.max(0.0), l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Lane;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn straight_map() -> Arc<LaneMap> {
        Arc::new(
            LaneMap::new(vec![Lane::new(
                1,
                vec![Point2::new(0.0, 0.0), Point2::new(200.0, 0.0)],
                2.7,
            )
            .unwrap()])
            .unwrap(),
        )
    }

    fn ego() -> EgoState {
        EgoState {
            position: Point2::new(50.0, 0.0),
            heading: 0.0,
            speed: 10.0,
            width: DEFAULT_EGO_WIDTH,
            length: DEFAULT_EGO_LENGTH,
            route: vec![1],
        }
    }

    fn scenario() -> PlanningScenario {
        PlanningScenario {
            map: straight_map(),
            ego: ego(),
            kind: ScenarioKind::LaneFollowSingle,
            context: ScenarioContext::default(),
            objects: vec![],
        }
    }

    #[test]
    fn static_box_in_range_is_ok() {
        let b = PhysicalObject::new(1, ObjectType::StaticObject, Point2::new(60.0, 0.0), 0.0);
        assert!(validate_ranges(&b, &ego()).is_ok());
    }

    #[test]
    fn far_box_is_position_violation() {
        let b = PhysicalObject::new(1, ObjectType::StaticObject, Point2::new(150.0, 0.0), 0.0);
        let v = validate_ranges(&b, &ego()).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "center");
    }

    #[test]
    fn fast_pedestrian_is_speed_violation() {
        let mut p = PhysicalObject::new(1, ObjectType::Pedestrian, Point2::new(55.0, 5.0), 0.0);
        p.speed = 2.0;
        p.trajectory = vec![
            Waypoint { t: 0.0, pos: p.center },
            Waypoint { t: 1.0, pos: p.center + Point2::new(2.0, 0.0) },
        ];
        let v = validate_ranges(&p, &ego()).unwrap_err();
        assert!(v.iter().any(|r| r.field == "speed"), "{v:?}");
    }

    #[test]
    fn static_size_bounds() {
        let ok = PhysicalObject::new(1, ObjectType::StaticObject, Point2::new(55.0, 5.0), 0.0)
            .with_dims(0.5, 2.0, 1.0);
        assert!(validate_ranges(&ok, &ego()).is_ok());
        let big = ok.clone().with_dims(2.1, 1.0, 1.0);
        assert_eq!(validate_ranges(&big, &ego()).unwrap_err()[0].field, "size");
        let mut turned = ok.clone();
        turned.heading = 3.5;
        assert_eq!(validate_ranges(&turned, &ego()).unwrap_err()[0].field, "heading");
    }

    #[test]
    fn vehicle_speed_must_match_ego() {
        let mut v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(30.0, 0.0), 0.0);
        assert!(validate_ranges(&v, &ego()).is_ok());
        v.speed = 7.0;
        v.trajectory = synthesize_trajectory(&v, &straight_map(), 2.0, 0.5).unwrap();
        let errs = validate_ranges(&v, &ego()).unwrap_err();
        assert!(errs.iter().any(|r| r.field == "speed"));
    }

    #[test]
    fn pedestrian_trajectory_is_straight() {
        let mut p = PhysicalObject::new(1, ObjectType::Pedestrian, Point2::new(0.0, 0.0), 0.0);
        p.speed = 1.0;
        let w = synthesize_trajectory(&p, &straight_map(), 5.0, 1.0).unwrap();
        assert_eq!(w.len(), 6);
        for (k, wp) in w.iter().enumerate() {
            assert_abs_diff_eq!(wp.pos.x, k as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(wp.pos.y, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn static_trajectory_is_empty() {
        let b = PhysicalObject::new(1, ObjectType::StaticObject, Point2::new(10.0, 5.0), 0.0);
        assert!(synthesize_trajectory(&b, &straight_map(), 8.0, 0.5).unwrap().is_empty());
    }

    #[test]
    fn vehicle_trajectory_follows_lane() {
        let mut v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(20.0, 0.0), 0.0);
        v.speed = 10.0;
        let w = synthesize_trajectory(&v, &straight_map(), 3.0, 0.5).unwrap();
        assert_eq!(w.len(), 7);
        for pair in w.windows(2) {
            assert_abs_diff_eq!(pair[0].pos.distance(pair[1].pos), 5.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn vehicle_follows_successor_lanes() {
        let map = LaneMap::new(vec![
            Lane::new(1, vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)], 3.0)
                .unwrap()
                .with_successors(vec![2]),
            Lane::new(2, vec![Point2::new(10.0, 0.0), Point2::new(10.0, 50.0)], 3.0).unwrap(),
        ])
        .unwrap();
        let mut v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(5.0, 0.0), 0.0);
        v.speed = 10.0;
        let w = synthesize_trajectory(&v, &map, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(w[1].pos.x, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w[1].pos.y, 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w[2].pos.y, 15.0, epsilon = 1e-9);
    }

    #[test]
    fn off_lane_vehicle_cannot_be_synthesized() {
        let mut v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(20.0, 9.0), 0.0);
        v.speed = 10.0;
        assert!(matches!(
            synthesize_trajectory(&v, &straight_map(), 3.0, 0.5),
            Err(Error::Synthesis(_))
        ));
    }

    #[test]
    fn load_rejects_negative_vehicle_speed() {
        let mut sc = scenario();
        let mut v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(30.0, 0.0), 0.0);
        v.speed = -1.0;
        sc.objects.push(v);
        let text = serde_json::to_string(&sc).unwrap();
        match PlanningScenario::from_json(&text, "inline") {
            Err(Error::Validation { field, .. }) => assert!(field.ends_with("speed"), "{field}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stop_sign_without_stop_line_is_context_error() {
        let mut sc = scenario();
        sc.kind = ScenarioKind::StopSignIntersection;
        let text = serde_json::to_string(&sc).unwrap();
        assert!(matches!(
            PlanningScenario::from_json(&text, "inline"),
            Err(Error::Context(_))
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = scenario().to_json().replacen("\"kind\"", "\"bogus\": 1, \"kind\"", 1);
        assert!(matches!(
            PlanningScenario::from_json(&text, "inline"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn unknown_route_lane_is_reported() {
        let mut sc = scenario();
        sc.ego.route = vec![42];
        let text = serde_json::to_string(&sc).unwrap();
        assert!(matches!(
            PlanningScenario::from_json(&text, "inline"),
            Err(Error::UnknownLane(42))
        ));
    }

    proptest! {
        #[test]
        fn straight_spacing_is_speed_times_dt(speed in 0.1..30.0f64, dt in 0.1..1.0f64, x in 10.0..60.0f64) {
            let mut v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(x, 0.3), 0.0);
            v.speed = speed;
            let w = synthesize_trajectory(&v, &straight_map(), 4.0, dt).unwrap();
            for pair in w.windows(2) {
                prop_assert!((pair[0].pos.distance(pair[1].pos) - speed * dt).abs() < 1e-9);
            }
        }
    }
}
