//! Semantics-blind baseline: flips random bits in numeric object fields.

use rand::Rng;

use super::{assemble_objects, exhausted, Campaign, ExhaustReason, Outcome};
use crate::scenario::{ObjectType, PhysicalObject, Seed};

const MAX_FLIPS: usize = 8;

fn flip(v: f64, bit: u32) -> f64 {
    f64::from_bits(v.to_bits() ^ (1u64 << bit))
}

/// Seed objects (or default boxes at the ego position when the seed has none)
/// with a handful of random bit flips.
fn candidate<R: Rng + ?Sized>(seed: &Seed, max_objects: usize, rng: &mut R) -> Vec<PhysicalObject> {
    let mut objects = if seed.genome.is_empty() {
        let n = rng.random_range(1..=max_objects.max(1));
        (0..n)
            .map(|_| {
                let kind = ObjectType::ALL[rng.random_range(0..ObjectType::ALL.len())];
                PhysicalObject::new(0, kind, seed.base.ego.position, 0.0)
            })
            .collect()
    } else {
        seed.genome.clone()
    };
    let flips = rng.random_range(1..=MAX_FLIPS);
    for _ in 0..flips {
        let i = rng.random_range(0..objects.len());
        let o = &mut objects[i];
        let bit = rng.random_range(0..64);
        match rng.random_range(0..7) {
            0 => o.center.x = flip(o.center.x, bit),
            1 => o.center.y = flip(o.center.y, bit),
            2 => o.length = flip(o.length, bit),
            3 => o.width = flip(o.width, bit),
            4 => o.height = flip(o.height, bit),
            5 => o.heading = flip(o.heading, bit),
            _ => o.speed = flip(o.speed, bit),
        }
    }
    objects
}

pub(super) fn run(c: &mut Campaign<'_>, seed: &Seed) -> Outcome {
    let cfg = c.config;
    loop {
        if !c.budget_left() {
            return exhausted(ExhaustReason::Budget);
        }
        let scenarios: Vec<_> = (0..cfg.population)
            .map(|_| assemble_objects(c.base, &candidate(seed, cfg.max_objects, &mut c.rng)))
            .collect();
        if let Err(found) = c.generation(&scenarios, false) {
            return found;
        }
    }
}
