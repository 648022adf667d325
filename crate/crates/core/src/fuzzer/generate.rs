//! PI-aware object generation: random placement, Gaussian mutation, and the
//! enforcers that move each object back into the region its constraint allows.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geom::{wrap_two_pi, Lane, Point2};
use crate::invariants::{
    excluded_lanes, satisfies, PiConstraintKind, PlanningInvariant,
};
use crate::scenario::{
    synthesize_trajectory, validate_ranges, ObjectType, PhysicalObject, PlanningScenario,
    DEFAULT_DT, DEFAULT_HORIZON, PEDESTRIAN_MAX_SPEED, POSITION_RANGE, SAFETY_FOLLOWING_DISTANCE,
    STATIC_DIM_RANGE,
};

/// Distance by which enforced objects clear a forbidden boundary.
pub const ENFORCE_MARGIN: f64 = 1e-6;

const ENFORCE_PASSES: usize = 6;
const REDRAW_ATTEMPTS: usize = 24;
const DYNAMIC_RETRIES: usize = 8;

/// Walking direction of a moving pedestrian relative to the nearest route lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Forward,
    Backward,
    Away,
}

/// One attacker-controlled object plus the constraint clause it is kept in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gene {
    pub object: PhysicalObject,
    pub constraint: PiConstraintKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<Motion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationParams {
    pub sigma: f64,
    pub resize_prob: f64,
    pub reheading_prob: f64,
    pub redraw_motion_prob: f64,
}

impl Default for MutationParams {
    fn default() -> Self {
        MutationParams {
            sigma: 1.0,
            resize_prob: 0.1,
            reheading_prob: 0.1,
            redraw_motion_prob: 0.1,
        }
    }
}

/// Generation context for one base scenario and invariant.
#[derive(Debug, Clone)]
pub struct Generator<'a> {
    pub base: &'a PlanningScenario,
    pub pi: &'static PlanningInvariant,
    pub params: MutationParams,
    /// When false, objects are placed and mutated but never enforced.
    pub enforce: bool,
}

fn uniform_heading<R: Rng + ?Sized>(kind: ObjectType, rng: &mut R) -> f64 {
    let hi = if kind.is_static_type() { PI } else { 2.0 * PI };
    rng.random_range(0.0..hi)
}

fn static_dims<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let (lo, hi) = STATIC_DIM_RANGE;
    [rng.random_range(lo..=hi), rng.random_range(lo..=hi), rng.random_range(lo..=hi)]
}

/// Lateral and longitudinal half-extents of a footprint relative to a lane direction.
fn extents(obj: &PhysicalObject, lane_heading: f64) -> (f64, f64) {
    let t = Point2::from_heading(lane_heading);
    let n = t.perp();
    let Ok(poly) = obj.polygon() else { return (0.0, 0.0) };
    poly.points().iter().fold((0.0f64, 0.0f64), |(lat, lon), &p| {
        let d = p - obj.center;
        (lat.max(d.dot(n).abs()), lon.max(d.dot(t).abs()))
    })
}

/// Wraps `l` into the open band `(-a, a)` by whole band widths.
fn wrap_band(l: f64, a: f64) -> f64 {
    if l.abs() < a {
        return l;
    }
    let w = (l + a).rem_euclid(2.0 * a) - a;
    if w.abs() < a {
        w
    } else {
        0.0
    }
}

/// Reflects `s` back above `lo` when it falls short.
fn reflect_above(s: f64, lo: f64) -> f64 {
    if s < lo {
        lo + (lo - s)
    } else {
        s
    }
}

fn reflect_below(s: f64, hi: f64) -> f64 {
    if s > hi {
        hi - (s - hi)
    } else {
        s
    }
}

impl<'a> Generator<'a> {
    pub fn new(base: &'a PlanningScenario, pi: &'static PlanningInvariant) -> Generator<'a> {
        Generator {
            base,
            pi,
            params: MutationParams::default(),
            enforce: true,
        }
    }

    fn ego(&self) -> Point2 {
        self.base.ego.position
    }

    fn ego_lane(&self) -> Option<&'a Lane> {
        self.base.map.lane(self.base.ego_lane_id()).ok()
    }

    fn random_position<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        let e = self.ego();
        Point2::new(
            e.x + rng.random_range(-POSITION_RANGE..=POSITION_RANGE),
            e.y + rng.random_range(-POSITION_RANGE..=POSITION_RANGE),
        )
    }

    fn in_range(&self, p: Point2) -> bool {
        let d = p - self.ego();
        d.x.abs() <= POSITION_RANGE && d.y.abs() <= POSITION_RANGE
    }

    /// A fresh object of random type with a random admissible constraint,
    /// not yet enforced.
    pub fn raw_gene<R: Rng + ?Sized>(&self, rng: &mut R) -> Gene {
        let kind = ObjectType::ALL[rng.random_range(0..ObjectType::ALL.len())];
        let center = self.random_position(rng);
        let mut object = PhysicalObject::new(0, kind, center, uniform_heading(kind, rng));
        if kind == ObjectType::StaticObject {
            let [l, w, h] = static_dims(rng);
            object = object.with_dims(l, w, h);
        }
        let admissible = self.pi.admissible(kind);
        let constraint = admissible[rng.random_range(0..admissible.len())];
        let motion = (constraint == PiConstraintKind::DynamicOffRoad).then(|| random_motion(rng));
        if constraint == PiConstraintKind::DynamicOffRoad {
            object.speed = random_walk_speed(rng);
        }
        Gene {
            object,
            constraint,
            motion,
        }
    }

    /// A fresh gene that satisfies its constraint, or `None` when every
    /// redraw failed.
    pub fn init_gene<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Gene> {
        for _ in 0..REDRAW_ATTEMPTS {
            let raw = self.raw_gene(rng);
            if !self.enforce {
                return Some(self.unenforced_dynamics(raw));
            }
            if let Some(g) = self.enforce_gene(raw, None, rng) {
                return Some(g);
            }
        }
        None
    }

    /// Between 1 and `max_objects` enforced genes.
    pub fn init_genome<R: Rng + ?Sized>(&self, max_objects: usize, rng: &mut R) -> Vec<Gene> {
        let n = rng.random_range(1..=max_objects.max(1));
        (0..n).filter_map(|_| self.init_gene(rng)).collect()
    }

    /// Gaussian position perturbation plus occasional size or heading redraws.
    /// Constraints are not enforced here.
    pub fn mutate_static<R: Rng + ?Sized>(&self, obj: &PhysicalObject, rng: &mut R) -> PhysicalObject {
        let mut out = obj.clone();
        if self.params.sigma > 0.0 {
            let normal = Normal::new(0.0, self.params.sigma).expect("sigma is finite and positive");
            out.center = out.center + Point2::new(normal.sample(rng), normal.sample(rng));
        }
        if out.kind == ObjectType::StaticObject && rng.random_bool(self.params.resize_prob) {
            let [l, w, h] = static_dims(rng);
            out = out.with_dims(l, w, h);
        }
        if rng.random_bool(self.params.reheading_prob) {
            out.heading = uniform_heading(out.kind, rng);
        }
        out
    }

    /// Mutates a gene and re-establishes its constraint. A gene whose
    /// enforcement fails is replaced by a fresh one.
    pub fn mutate_gene<R: Rng + ?Sized>(&self, gene: &Gene, rng: &mut R) -> Option<Gene> {
        let prev = gene.object.center;
        let mut g = gene.clone();
        g.object = self.mutate_static(&gene.object, rng);
        if g.constraint == PiConstraintKind::DynamicOffRoad
            && rng.random_bool(self.params.redraw_motion_prob)
        {
            g.motion = Some(random_motion(rng));
            g.object.speed = random_walk_speed(rng);
        }
        if !self.enforce {
            return Some(self.unenforced_dynamics(g));
        }
        match self.enforce_gene(g, Some(prev), rng) {
            Some(g) => Some(g),
            None => self.init_gene(rng),
        }
    }

    /// Moves the object into the region allowed by its constraint, then
    /// generates its dynamic properties. Returns `None` on failure.
    pub fn enforce_gene<R: Rng + ?Sized>(
        &self,
        mut gene: Gene,
        prev: Option<Point2>,
        rng: &mut R,
    ) -> Option<Gene> {
        use PiConstraintKind as C;
        let ok = match gene.constraint {
            C::StaticOffRoad | C::StaticOffRoadPedestrian => {
                gene.object.speed = 0.0;
                gene.object.trajectory.clear();
                self.enforce_off_road(&mut gene.object, prev)
            }
            C::DynamicOffRoad => {
                if !self.enforce_off_road(&mut gene.object, prev) {
                    false
                } else {
                    return self.generate_dynamic(gene, rng);
                }
            }
            C::FollowingVehicle => self.enforce_follower(&mut gene.object),
            C::IrrelevantVehicle => self.enforce_irrelevant(&mut gene.object),
            C::StaticAheadOfBlocker | C::VehicleParkedAheadOfBlocker => {
                self.enforce_ahead_of_blocker(&mut gene.object, gene.constraint)
            }
        };
        (ok && self.accepts(&gene)).then_some(gene)
    }

    /// The gene's object satisfies its own clause and the valid ranges.
    pub fn accepts(&self, gene: &Gene) -> bool {
        let mut probe = gene.object.clone();
        probe.id = u32::MAX;
        validate_ranges(&probe, &self.base.ego).is_ok() && satisfies(gene.constraint, &probe, self.base)
    }

    fn off_road_ok(&self, obj: &PhysicalObject) -> bool {
        let kind = if obj.kind == ObjectType::Pedestrian {
            PiConstraintKind::StaticOffRoadPedestrian
        } else {
            PiConstraintKind::StaticOffRoad
        };
        let mut probe = obj.clone();
        probe.speed = 0.0;
        probe.trajectory.clear();
        satisfies(kind, &probe, self.base) && self.in_range(obj.center)
    }

    /// Pushes the footprint out of every lane band it overlaps. Inside a band
    /// the object is shifted by the full band width in its direction of
    /// travel, landing on the far side at the same relative offset; without a
    /// previous pose it snaps to the nearest side.
    pub fn enforce_off_road(&self, obj: &mut PhysicalObject, prev: Option<Point2>) -> bool {
        let mut prev = prev;
        for _ in 0..ENFORCE_PASSES {
            if self.off_road_ok(obj) {
                return true;
            }
            let Some(lane) = self.offending_lane(obj) else { return false };
            let pr = lane.project(obj.center);
            let heading = lane.heading(pr.s);
            let (lat, _) = extents(obj, heading);
            let b = lane.half_width() + lat + ENFORCE_MARGIN;
            if pr.l.abs() >= b {
                return false;
            }
            let moved = prev.map(|p| pr.l - lane.project(p).l).filter(|d| *d != 0.0);
            let l = match moved {
                Some(d) => pr.l + d.signum() * 2.0 * b,
                None if pr.l > 0.0 => b,
                None => -b,
            };
            obj.center = lane.centerline.offset_point(pr.s, l);
            prev = None;
        }
        self.off_road_ok(obj)
    }

    /// The lane whose band contains part of the footprint, nearest to the center.
    fn offending_lane(&self, obj: &PhysicalObject) -> Option<&'a Lane> {
        let poly = obj.polygon().ok()?;
        self.base
            .map
            .lanes()
            .iter()
            .filter(|lane| {
                poly.points()
                    .iter()
                    .any(|&p| lane.project(p).distance <= lane.half_width() + ENFORCE_MARGIN)
            })
            .min_by(|a, b| {
                let da = a.project(obj.center).distance;
                let db = b.project(obj.center).distance;
                da.total_cmp(&db).then(a.id.cmp(&b.id))
            })
    }

    /// Pedestrian heading from its motion mode, speed, and a straight-line
    /// trajectory. Redraws the mode on failure; demotes to a static off-road
    /// obstacle once the retries are spent.
    pub fn generate_dynamic<R: Rng + ?Sized>(&self, mut gene: Gene, rng: &mut R) -> Option<Gene> {
        if gene.object.kind != ObjectType::Pedestrian {
            return None;
        }
        for attempt in 0..DYNAMIC_RETRIES {
            if attempt > 0 {
                gene.motion = Some(random_motion(rng));
                gene.object.speed = random_walk_speed(rng);
            }
            let motion = *gene.motion.get_or_insert(Motion::Forward);
            if !(gene.object.speed > 0.0 && gene.object.speed <= PEDESTRIAN_MAX_SPEED) {
                gene.object.speed = random_walk_speed(rng);
            }
            let Some(h) = self.walking_heading(gene.object.center, motion) else { break };
            gene.object.heading = h;
            let Ok(traj) = synthesize_trajectory(&gene.object, &self.base.map, DEFAULT_HORIZON, DEFAULT_DT)
            else {
                continue;
            };
            gene.object.trajectory = traj;
            if self.accepts(&gene) {
                return Some(gene);
            }
        }
        self.demote(gene)
    }

    fn demote(&self, gene: Gene) -> Option<Gene> {
        let mut obj = gene.object;
        obj.kind = ObjectType::StaticObject;
        obj.speed = 0.0;
        obj.trajectory.clear();
        obj.heading = obj.heading.rem_euclid(PI);
        let g = Gene {
            object: obj,
            constraint: PiConstraintKind::StaticOffRoad,
            motion: None,
        };
        (self.pi.admissible(ObjectType::StaticObject).contains(&g.constraint) && self.accepts(&g))
            .then_some(g)
    }

    /// Heading for a walker at `p`: along the nearest route lane in either
    /// sense, or straight away from it.
    fn walking_heading(&self, p: Point2, motion: Motion) -> Option<f64> {
        let (lane, pr) = self
            .base
            .ego
            .route
            .iter()
            .filter_map(|&id| self.base.map.lane(id).ok())
            .map(|lane| (lane, lane.project(p)))
            .min_by(|a, b| a.1.distance.total_cmp(&b.1.distance))?;
        let h = match motion {
            Motion::Forward => lane.heading(pr.s),
            Motion::Backward => lane.heading(pr.s) + PI,
            Motion::Away => {
                let d = p - pr.foot;
                if d.norm() == 0.0 {
                    return None;
                }
                d.y.atan2(d.x)
            }
        };
        Some(wrap_two_pi(h))
    }

    fn drive_along(&self, obj: &mut PhysicalObject, lane: &Lane, s: f64, l: f64, speed: f64) -> bool {
        obj.center = lane.centerline.offset_point(s, l);
        obj.heading = wrap_two_pi(lane.heading(s));
        obj.speed = speed;
        match synthesize_trajectory(obj, &self.base.map, DEFAULT_HORIZON, DEFAULT_DT) {
            Ok(t) => {
                obj.trajectory = t;
                true
            }
            Err(_) => false,
        }
    }

    /// Keeps a vehicle in the ego lane at least the following distance behind the ego.
    pub fn enforce_follower(&self, obj: &mut PhysicalObject) -> bool {
        if obj.kind != ObjectType::Vehicle {
            return false;
        }
        let Some(lane) = self.ego_lane() else { return false };
        let ego_s = lane.project(self.ego()).s;
        let pr = lane.project(obj.center);
        let a = lane.half_width() - ENFORCE_MARGIN;
        let hi = ego_s - SAFETY_FOLLOWING_DISTANCE - ENFORCE_MARGIN;
        let lo = (ego_s - POSITION_RANGE + 1.0).max(0.0);
        if hi < lo {
            return false;
        }
        let s = reflect_above(reflect_below(pr.s, hi), lo).clamp(lo, hi);
        let l = wrap_band(pr.l, a);
        let speed = self.base.ego.speed;
        for l in [l, 0.0] {
            if self.drive_along(obj, lane, s, l, speed)
                && satisfies(PiConstraintKind::FollowingVehicle, obj, self.base)
            {
                return true;
            }
        }
        false
    }

    /// Moves a vehicle onto the nearest lane the ego does not use.
    pub fn enforce_irrelevant(&self, obj: &mut PhysicalObject) -> bool {
        if obj.kind != ObjectType::Vehicle {
            return false;
        }
        let excluded = excluded_lanes(self.base);
        let ego_lane = self.base.ego_lane_id();
        let mut candidates: Vec<(&Lane, f64)> = self
            .base
            .map
            .lanes()
            .iter()
            .filter(|lane| lane.id != ego_lane && !excluded.contains(&lane.id))
            .map(|lane| (lane, lane.project(obj.center).distance))
            .collect();
        candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)));
        let speed = self.base.ego.speed;
        let start = obj.center;
        for (lane, _) in candidates.into_iter().take(2) {
            let pr = lane.project(start);
            let a = lane.half_width() - ENFORCE_MARGIN;
            let s = pr.s.clamp(0.0, lane.length());
            for l in [wrap_band(pr.l, a), 0.0] {
                if self.drive_along(obj, lane, s, l, speed)
                    && self.in_range(obj.center)
                    && satisfies(PiConstraintKind::IrrelevantVehicle, obj, self.base)
                {
                    return true;
                }
            }
        }
        false
    }

    /// Places the object on the ego lane with its whole footprint beyond the blocker.
    pub fn enforce_ahead_of_blocker(&self, obj: &mut PhysicalObject, kind: PiConstraintKind) -> bool {
        if kind == PiConstraintKind::VehicleParkedAheadOfBlocker && obj.kind != ObjectType::Vehicle {
            return false;
        }
        let Some(lane) = self.ego_lane() else { return false };
        let Some(blocker) = self.base.context.blocker_id.and_then(|id| self.base.object(id)) else {
            return false;
        };
        let Ok(bp) = blocker.polygon() else { return false };
        let blocker_max_s = bp
            .points()
            .iter()
            .map(|&p| lane.project(p).s)
            .fold(f64::NEG_INFINITY, f64::max);
        let pr = lane.project(obj.center);
        if kind == PiConstraintKind::VehicleParkedAheadOfBlocker {
            obj.heading = wrap_two_pi(lane.heading(pr.s));
            obj.speed = 0.0;
            obj.trajectory.clear();
        }
        let (_, lon) = extents(obj, lane.heading(pr.s));
        let lo = blocker_max_s + lon + ENFORCE_MARGIN;
        let hi = lane.length().min(lane.project(self.ego()).s + POSITION_RANGE - lon);
        if hi <= lo {
            return false;
        }
        let s = reflect_below(reflect_above(pr.s, lo), hi).clamp(lo, hi);
        let l = wrap_band(pr.l, lane.half_width() - ENFORCE_MARGIN);
        obj.center = lane.centerline.offset_point(s, l);
        satisfies(kind, obj, self.base)
    }

    /// Dynamic properties without any constraint: pedestrians keep their
    /// heading, vehicles drive at ego speed when they sit on a lane.
    fn unenforced_dynamics(&self, mut gene: Gene) -> Gene {
        let obj = &mut gene.object;
        obj.trajectory.clear();
        match obj.kind {
            ObjectType::Pedestrian => {
                if gene.constraint != PiConstraintKind::DynamicOffRoad {
                    obj.speed = 0.0;
                }
            }
            ObjectType::Vehicle => obj.speed = self.base.ego.speed,
            _ => obj.speed = 0.0,
        }
        match synthesize_trajectory(obj, &self.base.map, DEFAULT_HORIZON, DEFAULT_DT) {
            Ok(t) => obj.trajectory = t,
            Err(_) => {
                obj.speed = 0.0;
                obj.trajectory.clear();
            }
        }
        gene
    }
}

fn random_motion<R: Rng + ?Sized>(rng: &mut R) -> Motion {
    [Motion::Forward, Motion::Backward, Motion::Away][rng.random_range(0..3)]
}

/// Walking speed in `(0, PEDESTRIAN_MAX_SPEED]`.
fn random_walk_speed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    PEDESTRIAN_MAX_SPEED * (1.0 - rng.random::<f64>())
}

/// Swaps each aligned pair of genes with probability one half, then caps lengths.
pub fn crossover<R: Rng + ?Sized>(
    a: &[Gene],
    b: &[Gene],
    max_objects: usize,
    rng: &mut R,
) -> (Vec<Gene>, Vec<Gene>) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    for i in 0..x.len().min(y.len()) {
        if rng.random_bool(0.5) {
            std::mem::swap(&mut x[i], &mut y[i]);
        }
    }
    x.truncate(max_objects);
    y.truncate(max_objects);
    (x, y)
}

/// Size-2 tournament on fitness (smaller wins, ties broken at random).
pub fn tournament<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> usize {
    assert!(!fitness.is_empty(), "tournament over an empty population");
    let i = rng.random_range(0..fitness.len());
    let j = rng.random_range(0..fitness.len());
    match fitness[i].total_cmp(&fitness[j]) {
        std::cmp::Ordering::Less => i,
        std::cmp::Ordering::Greater => j,
        std::cmp::Ordering::Equal => {
            if rng.random_bool(0.5) {
                i
            } else {
                j
            }
        }
    }
}

/// Objects of a genome with ids assigned after the base scenario's objects.
pub fn assemble(base: &PlanningScenario, genome: &[Gene]) -> PlanningScenario {
    let mut sc = base.clone();
    sc.objects.extend(genome.iter().enumerate().map(|(i, g)| {
        let mut o = g.object.clone();
        o.id = GENOME_ID_BASE + i as u32;
        o
    }));
    sc
}

/// First id handed to attacker objects.
pub const GENOME_ID_BASE: u32 = 1000;
