//! Fixed workloads shared by the planner benchmarks.

use plandos_core::fixtures::seed_for;
use plandos_core::fuzzer::{assemble, Generator};
use plandos_core::geom::Point2;
use plandos_core::scenario::{ObjectType, PhysicalObject, PlanningScenario};
use plandos_core::subjects::SubjectId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The narrow-lane seed with one box on each lane boundary.
pub fn v1_boundary_boxes() -> PlanningScenario {
    let base = seed_for(SubjectId::V1);
    let hw = base.map.lane(1).expect("seed lane").half_width();
    let boxed = |id, y: f64| {
        PhysicalObject::new(id, ObjectType::StaticObject, Point2::new(60.0, y), 0.0).with_dims(1.0, 1.0, 1.0)
    };
    base.with_objects(&[boxed(1000, hw + 0.5), boxed(1001, -hw - 0.5)])
}

/// `n` invariant-respecting scenarios for a subject, reproducible from `seed`.
pub fn generated(subject: SubjectId, n: usize, seed: u64) -> Vec<PlanningScenario> {
    let base = seed_for(subject);
    let gen = Generator::new(&base, subject.default_pi().invariant());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| assemble(&base, &gen.init_genome(4, &mut rng))).collect()
}
