//! Planar geometry: points, polylines, lanes, Frenet projection and polygon
//! distances.
//!
//! Lateral offsets follow the usual Frenet convention: `l > 0` means the point
//! lies to the left of the direction of travel.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance under which two centerline vertices are considered coincident.
const VERTEX_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2 { x: v[0], y: v[1] }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Unit vector pointing along `heading`.
    pub fn from_heading(heading: f64) -> Self {
        Point2::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3-D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    pub fn rotate(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_two_pi(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arclength of the foot point.
    pub s: f64,
    /// Signed lateral offset, positive to the left.
    pub l: f64,
    /// Unsigned distance to the foot point.
    pub distance: f64,
    /// Index of the segment that holds the foot point.
    pub segment: usize,
    pub foot: Point2,
}

/// An open polyline with cached cumulative arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point2>,
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation("centerline", "needs at least 2 points"));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(
                "centerline",
                format!("point {i} is not finite"),
            ));
        }
        let mut cum = Vec::with_capacity(points.len());
        cum.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if len <= VERTEX_EPS {
                return Err(Error::validation(
                    "centerline",
                    format!("points {} and {} coincide", i, i + 1),
                ));
            }
            cum.push(cum[i] + len);
        }
        Ok(Polyline { points, cum })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().expect("polyline has points")
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    /// Arclength at vertex `i`.
    pub fn vertex_s(&self, i: usize) -> f64 {
        self.cum[i]
    }

    fn segment_dir(&self, i: usize) -> Point2 {
        (self.points[i + 1] - self.points[i]) * (1.0 / (self.cum[i + 1] - self.cum[i]))
    }

    /// Segment that owns arclength `s`; vertices belong to the following segment.
    fn segment_at(&self, s: f64) -> usize {
        let n = self.segment_count();
        match self.cum.partition_point(|&c| c <= s) {
            0 => 0,
            k => (k - 1).min(n - 1),
        }
    }

    /// Nearest-point projection. Ties between segments go to the earlier one.
    pub fn project(&self, p: Point2) -> Projection {
        let mut best: Option<Projection> = None;
        for i in 0..self.segment_count() {
            let a = self.points[i];
            let seg_len = self.cum[i + 1] - self.cum[i];
            let dir = self.segment_dir(i);
            let t = (p - a).dot(dir).clamp(0.0, seg_len);
            let foot = a + dir * t;
            let d = p.distance(foot);
            if best.is_none_or(|b| d < b.distance) {
                let side = dir.cross(p - foot);
                let l = if side > 0.0 {
                    d
                } else if side < 0.0 {
                    -d
                } else {
                    0.0
                };
                best = Some(Projection {
                    s: self.cum[i] + t,
                    l,
                    distance: d,
                    segment: i,
                    foot,
                });
            }
        }
        best.expect("polyline has a segment")
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        let i = self.segment_at(s);
        self.points[i] + self.segment_dir(i) * (s - self.cum[i])
    }

    /// Tangent direction (radians) of the segment that owns `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let d = self.segment_dir(self.segment_at(s));
        d.y.atan2(d.x)
    }

    /// Point at arclength `s` shifted by `l` along the left normal.
    pub fn offset_point(&self, s: f64, l: f64) -> Point2 {
        let i = self.segment_at(s);
        let dir = self.segment_dir(i);
        self.points[i] + dir * (s - self.cum[i]) + dir.perp() * l
    }

    /// True when `(s, l)` has a unique nearest-point preimage, i.e. the point
    /// is not inside the wedge on the inner side of a bend where the adjacent
    /// segment is closer. There the nearest-point projection cannot be inverted.
    pub fn is_regular(&self, s: f64, l: f64) -> bool {
        for v in 1..self.segment_count() {
            let turn = normalize_angle(
                self.segment_dir(v).y.atan2(self.segment_dir(v).x)
                    - self.segment_dir(v - 1).y.atan2(self.segment_dir(v - 1).x),
            );
            if turn == 0.0 || turn * l <= 0.0 {
                continue;
            }
            let shadow = l.abs() * (turn.abs() / 2.0).tan();
            if (s - self.cum[v]).abs() <= shadow + 1e-7 {
                return false;
            }
        }
        true
    }
}

/// Raw serialized form of a lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSpec {
    pub id: u32,
    pub centerline: Vec<Point2>,
    pub width: f64,
    #[serde(default)]
    pub successors: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predecessors: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LaneSpec", into = "LaneSpec")]
pub struct Lane {
    pub id: u32,
    pub centerline: Polyline,
    pub width: f64,
    pub successors: Vec<u32>,
    pub predecessors: Vec<u32>,
}

impl TryFrom<LaneSpec> for Lane {
    type Error = Error;
    fn try_from(spec: LaneSpec) -> Result<Lane> {
        if !(spec.width > 0.0 && spec.width.is_finite()) {
            return Err(Error::validation(
                format!("lanes[{}].width", spec.id),
                format!("must be positive, got {}", spec.width),
            ));
        }
        let centerline = Polyline::new(spec.centerline).map_err(|e| match e {
            Error::Validation { field, message } => {
                Error::validation(format!("lanes[{}].{field}", spec.id), message)
            }
            other => other,
        })?;
        Ok(Lane {
            id: spec.id,
            centerline,
            width: spec.width,
            successors: spec.successors,
            predecessors: spec.predecessors,
        })
    }
}

impl From<Lane> for LaneSpec {
    fn from(l: Lane) -> LaneSpec {
        LaneSpec {
            id: l.id,
            centerline: l.centerline.points,
            width: l.width,
            successors: l.successors,
            predecessors: l.predecessors,
        }
    }
}

impl Lane {
    pub fn new(id: u32, centerline: Vec<Point2>, width: f64) -> Result<Lane> {
        Lane::try_from(LaneSpec {
            id,
            centerline,
            width,
            successors: Vec::new(),
            predecessors: Vec::new(),
        })
    }

    pub fn with_successors(mut self, successors: Vec<u32>) -> Lane {
        self.successors = successors;
        self
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }

    pub fn length(&self) -> f64 {
        self.centerline.length()
    }

    pub fn heading(&self, s: f64) -> f64 {
        self.centerline.heading_at(s)
    }

    pub fn project(&self, p: Point2) -> Projection {
        self.centerline.project(p)
    }

    pub fn frenet(&self, p: Point2) -> FrenetPose {
        let pr = self.project(p);
        FrenetPose {
            s: pr.s,
            l: pr.l,
            lane_id: self.id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrenetPose {
    pub s: f64,
    pub l: f64,
    pub lane_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneMapSpec {
    lanes: Vec<Lane>,
}

/// The road network: lanes ordered by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LaneMapSpec", into = "LaneMapSpec")]
pub struct LaneMap {
    lanes: Vec<Lane>,
    index: HashMap<u32, usize>,
}

impl TryFrom<LaneMapSpec> for LaneMap {
    type Error = Error;
    fn try_from(spec: LaneMapSpec) -> Result<LaneMap> {
        LaneMap::new(spec.lanes)
    }
}

impl From<LaneMap> for LaneMapSpec {
    fn from(m: LaneMap) -> LaneMapSpec {
        LaneMapSpec { lanes: m.lanes }
    }
}

impl LaneMap {
    /// Builds a map, checking id uniqueness and successor references.
    pub fn new(mut lanes: Vec<Lane>) -> Result<LaneMap> {
        lanes.sort_by_key(|l| l.id);
        let mut index = HashMap::with_capacity(lanes.len());
        for (i, lane) in lanes.iter().enumerate() {
            if index.insert(lane.id, i).is_some() {
                return Err(Error::validation(
                    "map.lanes",
                    format!("duplicate lane id {}", lane.id),
                ));
            }
        }
        for lane in &lanes {
            for r in lane.successors.iter().chain(&lane.predecessors) {
                if !index.contains_key(r) {
                    return Err(Error::UnknownLane(*r));
                }
            }
        }
        Ok(LaneMap { lanes, index })
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn lane(&self, id: u32) -> Result<&Lane> {
        self.index
            .get(&id)
            .map(|&i| &self.lanes[i])
            .ok_or(Error::UnknownLane(id))
    }

    pub fn contains(&self, id: u32) -> bool {
        self.index.contains_key(&id)
    }

    /// Nearest lane to `pos` together with its projection.
    pub fn nearest(&self, pos: Point2) -> Result<(&Lane, Projection)> {
        let mut best: Option<(&Lane, Projection)> = None;
        for lane in &self.lanes {
            let pr = lane.project(pos);
            if best.is_none_or(|(_, b)| pr.distance < b.distance) {
                best = Some((lane, pr));
            }
        }
        best.ok_or_else(|| Error::Config("lane map is empty".into()))
    }
}

/// Projects a world position onto the nearest lane (ties: lowest lane id).
pub fn transform(pos: Point2, map: &LaneMap) -> Result<FrenetPose> {
    let (lane, pr) = map.nearest(pos)?;
    Ok(FrenetPose {
        s: pr.s,
        l: pr.l,
        lane_id: lane.id,
    })
}

/// Inverse of [`transform`] for a given lane.
pub fn frenet_to_world(s: f64, l: f64, lane: &Lane) -> Result<Point2> {
    let len = lane.length();
    if !(0.0..=len).contains(&s) || !l.is_finite() {
        return Err(Error::Range(format!(
            "s = {s} outside [0, {len}] of lane {}",
            lane.id
        )));
    }
    Ok(lane.centerline.offset_point(s, l))
}

/// Simple polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Polygon {
    points: Vec<Point2>,
}

impl TryFrom<Vec<Point2>> for Polygon {
    type Error = Error;
    fn try_from(points: Vec<Point2>) -> Result<Polygon> {
        Polygon::new(points)
    }
}

impl From<Polygon> for Vec<Point2> {
    fn from(p: Polygon) -> Vec<Point2> {
        p.points
    }
}

impl Polygon {
    /// Accepts either orientation and stores the vertices counter-clockwise.
    pub fn new(mut points: Vec<Point2>) -> Result<Polygon> {
        if points.len() < 3 {
            return Err(Error::validation("polygon", "needs at least 3 points"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("polygon", "non-finite vertex"));
        }
        let area = signed_area(&points);
        if area.abs() <= 1e-12 {
            return Err(Error::validation("polygon", "zero area"));
        }
        if area < 0.0 {
            points.reverse();
        }
        Ok(Polygon { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// Crossing-number test; boundary points count as inside.
    pub fn contains(&self, p: Point2) -> bool {
        if self
            .edges()
            .any(|(a, b)| point_segment_distance(p, a, b) <= 1e-12)
        {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn intersects(&self, other: &Polygon) -> bool {
        self.points.iter().any(|&p| other.contains(p))
            || other.points.iter().any(|&p| self.contains(p))
            || self
                .edges()
                .any(|(a, b)| other.edges().any(|(c, d)| segments_intersect(a, b, c, d)))
    }

    pub fn translated(&self, by: Point2) -> Polygon {
        Polygon {
            points: self.points.iter().map(|&p| p + by).collect(),
        }
    }
}

fn signed_area(points: &[Point2]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| points[i].cross(points[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

/// Oriented rectangle centered at `center` with its long axis along `heading`.
pub fn object_polygon(center: Point2, length: f64, width: f64, heading: f64) -> Result<Polygon> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::validation("length", format!("must be positive, got {length}")));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::validation("width", format!("must be positive, got {width}")));
    }
    if !center.is_finite() || !heading.is_finite() {
        return Err(Error::validation("center", "non-finite pose"));
    }
    let (hl, hw) = (length / 2.0, width / 2.0);
    let corners = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)]
        .map(|(x, y)| center + Point2::new(x, y).rotate(heading));
    Ok(Polygon {
        points: corners.to_vec(),
    })
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn orientation(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, touching endpoints included.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orientation(c, d, a);
    let d2 = orientation(c, d, b);
    let d3 = orientation(a, b, c);
    let d4 = orientation(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

pub fn segment_segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Minimum Euclidean distance between a polyline and a polygon; zero when
/// they touch, cross, or the polyline runs inside the polygon.
pub fn min_lateral_distance(polyline: &[Point2], polygon: &Polygon) -> f64 {
    if polyline.is_empty() {
        return f64::INFINITY;
    }
    if polyline.iter().any(|&p| polygon.contains(p)) {
        return 0.0;
    }
    if polyline.len() == 1 {
        return polygon
            .edges()
            .map(|(a, b)| point_segment_distance(polyline[0], a, b))
            .fold(f64::INFINITY, f64::min);
    }
    let mut best = f64::INFINITY;
    for w in polyline.windows(2) {
        for (c, d) in polygon.edges() {
            best = best.min(segment_segment_distance(w[0], w[1], c, d));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn straight() -> LaneMap {
        LaneMap::new(vec![
            Lane::new(1, vec![Point2::new(0.0, 0.0), Point2::new(100.0, 0.0)], 3.0).unwrap(),
        ])
        .unwrap()
    }

    fn bend() -> Lane {
        Lane::new(
            7,
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(50.0, 0.0),
                Point2::new(50.0, 50.0),
            ],
            3.0,
        )
        .unwrap()
    }

    /// Dense-sampling projection used as an oracle.
    fn brute_project(lane: &Lane, p: Point2, samples: usize) -> (f64, f64) {
        let len = lane.length();
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=samples {
            let s = len * k as f64 / samples as f64;
            let d = lane.centerline.point_at(s).distance(p);
            if d < best.0 {
                best = (d, s);
            }
        }
        // refine between the neighbouring samples by ternary search
        let step = len / samples as f64;
        let (mut lo, mut hi) = ((best.1 - step).max(0.0), (best.1 + step).min(len));
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if lane.centerline.point_at(m1).distance(p) <= lane.centerline.point_at(m2).distance(p) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let s_ref = (lo + hi) / 2.0;
        let d_ref = lane.centerline.point_at(s_ref).distance(p);
        if d_ref < best.0 {
            best = (d_ref, s_ref);
        }
        let (d, s) = best;
        let tangent = Point2::from_heading(lane.heading(s.min(len - 1e-9)));
        let foot = lane.centerline.point_at(s);
        let sign = tangent.cross(p - foot).signum();
        (s, sign * d)
    }

    #[test]
    fn transform_straight_lane() {
        let m = straight();
        let f = transform(Point2::new(10.0, 2.0), &m).unwrap();
        assert_abs_diff_eq!(f.s, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.l, 2.0, epsilon = 1e-12);
        assert_eq!(f.lane_id, 1);
        let mid = transform(Point2::new(50.0, 0.0), &m).unwrap();
        assert_eq!(mid.l, 0.0);
    }

    #[test]
    fn transform_empty_map_is_config_error() {
        let m = LaneMap::new(vec![]).unwrap();
        assert!(matches!(
            transform(Point2::new(0.0, 0.0), &m),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn transform_tie_goes_to_lowest_id() {
        let m = LaneMap::new(vec![
            Lane::new(9, vec![Point2::new(0.0, 2.0), Point2::new(10.0, 2.0)], 3.0).unwrap(),
            Lane::new(4, vec![Point2::new(0.0, -2.0), Point2::new(10.0, -2.0)], 3.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(transform(Point2::new(5.0, 0.0), &m).unwrap().lane_id, 4);
    }

    #[test]
    fn transform_bend_matches_dense_projection() {
        let lane = bend();
        let map = LaneMap::new(vec![lane.clone()]).unwrap();
        for p in [
            Point2::new(53.0, -2.0),
            Point2::new(51.5, -0.7),
            Point2::new(48.0, 3.0),
            Point2::new(30.0, -4.0),
            Point2::new(52.0, 20.0),
        ] {
            let f = transform(p, &map).unwrap();
            let (s, l) = brute_project(&lane, p, 100_000);
            assert!((f.s - s).abs() < 1e-6, "{p:?}: {} vs {s}", f.s);
            assert!((f.l - l).abs() < 1e-6, "{p:?}: {} vs {l}", f.l);
        }
    }

    #[test]
    fn outer_corner_projects_to_vertex() {
        let lane = bend();
        let f = lane.frenet(Point2::new(53.0, -4.0));
        assert_abs_diff_eq!(f.s, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.l, -5.0, epsilon = 1e-12);
    }

    #[test]
    fn frenet_to_world_examples() {
        let m = straight();
        let lane = m.lane(1).unwrap();
        assert_eq!(frenet_to_world(10.0, 0.0, lane).unwrap(), Point2::new(10.0, 0.0));
        assert_eq!(frenet_to_world(10.0, 2.0, lane).unwrap(), Point2::new(10.0, 2.0));
        assert!(matches!(frenet_to_world(100.5, 0.0, lane), Err(Error::Range(_))));
        assert!(matches!(frenet_to_world(-0.1, 0.0, lane), Err(Error::Range(_))));
    }

    #[test]
    fn inner_shadow_is_detected() {
        let lane = bend();
        // left turn, so the inner side is l > 0
        assert!(!lane.centerline.is_regular(49.5, 1.0));
        assert!(lane.centerline.is_regular(49.5, -1.0));
        assert!(lane.centerline.is_regular(45.0, 1.0));
        let p = frenet_to_world(49.5, 1.0, &lane).unwrap();
        let back = lane.frenet(p);
        assert!((back.s - 49.5).abs() > 1e-3);
    }

    #[test]
    fn object_polygon_examples() {
        let p = object_polygon(Point2::new(0.0, 0.0), 2.0, 1.0, 0.0).unwrap();
        let expect = [(-1.0, -0.5), (1.0, -0.5), (1.0, 0.5), (-1.0, 0.5)];
        for (c, (x, y)) in p.points().iter().zip(expect) {
            assert_abs_diff_eq!(c.x, x, epsilon = 1e-12);
            assert_abs_diff_eq!(c.y, y, epsilon = 1e-12);
        }
        assert!(p.area() > 0.0);

        let q = object_polygon(Point2::new(0.0, 0.0), 2.0, 1.0, PI / 2.0).unwrap();
        let expect = [(0.5, -1.0), (0.5, 1.0), (-0.5, 1.0), (-0.5, -1.0)];
        for (c, (x, y)) in q.points().iter().zip(expect) {
            assert_abs_diff_eq!(c.x, x, epsilon = 1e-12);
            assert_abs_diff_eq!(c.y, y, epsilon = 1e-12);
        }

        let h = PI / 4.0;
        let r = object_polygon(Point2::new(3.0, -1.0), 2.0, 1.0, h).unwrap();
        for (c, (x, y)) in r.points().iter().zip([(-1.0, -0.5), (1.0, -0.5), (1.0, 0.5), (-1.0, 0.5)]) {
            let ex = 3.0 + h.cos() * x - h.sin() * y;
            let ey = -1.0 + h.sin() * x + h.cos() * y;
            assert_abs_diff_eq!(c.x, ex, epsilon = 1e-9);
            assert_abs_diff_eq!(c.y, ey, epsilon = 1e-9);
        }
    }

    #[test]
    fn object_polygon_rejects_bad_dims() {
        assert!(object_polygon(Point2::default(), 0.0, 1.0, 0.0).is_err());
        assert!(object_polygon(Point2::default(), 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn min_lateral_distance_examples() {
        let line = [Point2::new(-10.0, 0.0), Point2::new(10.0, 0.0)];
        let touching = object_polygon(Point2::new(0.0, 0.5), 1.0, 1.0, 0.0).unwrap();
        assert_eq!(min_lateral_distance(&line, &touching), 0.0);
        let left = object_polygon(Point2::new(0.0, 3.0), 1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(min_lateral_distance(&line, &left), 2.5, epsilon = 1e-12);
        let crossing = object_polygon(Point2::new(0.0, 0.0), 4.0, 4.0, 0.3).unwrap();
        assert_eq!(min_lateral_distance(&line, &crossing), 0.0);
    }

    #[test]
    fn polygon_normalizes_orientation() {
        let cw = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(cw.area() > 0.0);
        assert!(cw.contains(Point2::new(0.5, 0.5)));
        assert!(!cw.contains(Point2::new(1.5, 0.5)));
        assert!(Polygon::new(vec![Point2::default(); 3]).is_err());
    }

    #[test]
    fn lane_rejects_degenerate_input() {
        assert!(Lane::new(1, vec![Point2::default()], 3.0).is_err());
        assert!(Lane::new(1, vec![Point2::default(), Point2::default()], 3.0).is_err());
        assert!(Lane::new(1, vec![Point2::default(), Point2::new(1.0, 0.0)], 0.0).is_err());
        assert!(LaneMap::new(vec![
            Lane::new(1, vec![Point2::default(), Point2::new(1.0, 0.0)], 3.0)
                .unwrap()
                .with_successors(vec![5])
        ])
        .is_err());
    }

    #[test]
    fn normalize_angle_range() {
        assert_abs_diff_eq!(normalize_angle(PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(normalize_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_eq!(wrap_two_pi(-0.0), 0.0);
    }

    proptest! {
        #[test]
        fn left_points_have_positive_l(
            x0 in -100.0..100.0f64, y0 in -100.0..100.0f64,
            heading in 0.0..(2.0 * PI), len in 5.0..200.0f64,
            frac in 0.01..0.99f64, off in 0.01..20.0f64,
        ) {
            let a = Point2::new(x0, y0);
            let b = a + Point2::from_heading(heading) * len;
            let lane = Lane::new(1, vec![a, b], 3.0).unwrap();
            let foot = a + Point2::from_heading(heading) * (len * frac);
            let left = foot + Point2::from_heading(heading).perp() * off;
            let right = foot - Point2::from_heading(heading).perp() * off;
            prop_assert!(lane.frenet(left).l > 0.0);
            prop_assert!(lane.frenet(right).l < 0.0);
        }

        #[test]
        fn straight_round_trip(
            heading in 0.0..(2.0 * PI), len in 5.0..200.0f64,
            frac in 0.0..=1.0f64, l in -5.0..5.0f64,
        ) {
            let a = Point2::new(12.0, -7.0);
            let lane = Lane::new(3, vec![a, a + Point2::from_heading(heading) * len], 3.5).unwrap();
            let s = lane.length() * frac;
            let p = frenet_to_world(s, l, &lane).unwrap();
            let f = lane.frenet(p);
            prop_assert!((f.s - s).abs() < 1e-6 && (f.l - l).abs() < 1e-6);
        }

        #[test]
        fn transform_is_deterministic(x in -200.0..200.0f64, y in -200.0..200.0f64) {
            let m = straight();
            let p = Point2::new(x, y);
            prop_assert_eq!(transform(p, &m).unwrap(), transform(p, &m).unwrap());
        }
    }
}
