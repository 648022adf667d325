use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures::seed_for;
use crate::geom::Point2;
use crate::invariants::{check_pi, dynamic_off_road, PiConstraintKind as C};
use crate::scenario::{validate_ranges, ObjectType, PhysicalObject, VEHICLE_DIMS};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gene(object: PhysicalObject, constraint: C) -> Gene {
    Gene {
        object,
        constraint,
        motion: None,
    }
}

#[test]
fn init_is_deterministic_and_bounded() {
    let base = seed_for(SubjectId::V1);
    let gen = Generator::new(&base, PiId::PI1.invariant());
    let a = gen.init_genome(4, &mut rng(0));
    let b = gen.init_genome(4, &mut rng(0));
    assert_eq!(a, b);
    assert!(!a.is_empty() && a.len() <= 4);
    for _ in 0..50 {
        assert_eq!(gen.init_genome(1, &mut rng(7)).len(), 1);
    }
}

#[test]
fn generated_sets_satisfy_their_invariant() {
    let mut r = rng(3);
    for subject in SubjectId::ALL {
        let base = seed_for(subject);
        let pi = subject.default_pi().invariant();
        let gen = Generator::new(&base, pi);
        for _ in 0..150 {
            let genome = gen.init_genome(4, &mut r);
            let sc = assemble(&base, &genome);
            assert!(check_pi(pi, &sc), "{subject}: {genome:?}");
            for o in &sc.objects {
                assert!(validate_ranges(o, &sc.ego).is_ok(), "{subject}: {o:?}");
            }
        }
    }
}

#[test]
fn zero_sigma_is_identity() {
    let base = seed_for(SubjectId::V1);
    let mut gen = Generator::new(&base, PiId::PI1.invariant());
    gen.params = MutationParams {
        sigma: 0.0,
        resize_prob: 0.0,
        reheading_prob: 0.0,
        redraw_motion_prob: 0.0,
    };
    let o = PhysicalObject::new(1, ObjectType::StaticObject, Point2::new(60.0, 4.0), 0.3);
    assert_eq!(gen.mutate_static(&o, &mut rng(1)), o);
}

#[test]
fn mutation_spread_matches_sigma() {
    let base = seed_for(SubjectId::V1);
    let mut gen = Generator::new(&base, PiId::PI1.invariant());
    gen.params.sigma = 1.0;
    let o = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(0.0, 0.0), 0.0);
    let mut r = rng(11);
    let n = 100_000;
    let (mut sx, mut sy) = (0.0, 0.0);
    for _ in 0..n {
        let m = gen.mutate_static(&o, &mut r);
        assert_eq!([m.length, m.width, m.height], VEHICLE_DIMS);
        sx += m.center.x * m.center.x;
        sy += m.center.y * m.center.y;
    }
    let (stdx, stdy) = ((sx / n as f64).sqrt(), (sy / n as f64).sqrt());
    assert!((stdx - 1.0).abs() < 0.05 && (stdy - 1.0).abs() < 0.05, "{stdx} {stdy}");
}

fn small_box(x: f64, y: f64) -> PhysicalObject {
    PhysicalObject::new(1, ObjectType::StaticObject, Point2::new(x, y), 0.0).with_dims(0.5, 0.5, 0.5)
}

#[test]
fn off_road_shift_crosses_the_band() {
    let base = seed_for(SubjectId::V1);
    let gen = Generator::new(&base, PiId::PI1.invariant());
    let mut o = small_box(60.0, -1.0);
    assert!(gen.enforce_off_road(&mut o, Some(Point2::new(60.0, -2.0))));
    assert!((o.center.y - 2.2).abs() < 1e-5, "{:?}", o.center);
    assert_eq!(o.center.x, 60.0);

    let mut o = small_box(60.0, -1.0);
    assert!(gen.enforce_off_road(&mut o, Some(Point2::new(60.0, 0.5))));
    assert!((o.center.y + 4.2).abs() < 1e-5);
}

#[test]
fn off_road_feasible_is_unchanged_and_init_snaps() {
    let base = seed_for(SubjectId::V1);
    let gen = Generator::new(&base, PiId::PI1.invariant());
    let mut o = small_box(60.0, 5.0);
    let before = o.clone();
    assert!(gen.enforce_off_road(&mut o, Some(Point2::new(60.0, 6.0))));
    assert_eq!(o, before);

    let mut o = small_box(60.0, 0.0);
    assert!(gen.enforce_off_road(&mut o, None));
    assert!((o.center.y + 1.6).abs() < 1e-5, "{:?}", o.center);
    let mut o = small_box(60.0, 0.3);
    assert!(gen.enforce_off_road(&mut o, None));
    assert!((o.center.y - 1.6).abs() < 1e-5);
}

#[test]
fn follower_is_wrapped_into_its_lane_behind_ego() {
    let base = seed_for(SubjectId::V2);
    let gen = Generator::new(&base, PiId::PI3.invariant());
    // Pushed across into the target lane.
    let v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(80.0, 2.0), 0.0);
    let g = gen.enforce_gene(gene(v, C::FollowingVehicle), None, &mut rng(0)).unwrap();
    assert!((g.object.center.y + 1.5).abs() < 1e-5, "{:?}", g.object.center);
    assert_eq!(g.object.speed, base.ego.speed);
    // Ahead of the ego gets reflected behind it.
    let v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(110.0, 0.2), 1.0);
    let g = gen.enforce_gene(gene(v, C::FollowingVehicle), None, &mut rng(0)).unwrap();
    assert!(g.object.center.x < 95.0);
    assert_eq!(g.object.heading, 0.0);
}

#[test]
fn irrelevant_vehicle_snaps_to_allowed_lane() {
    let base = seed_for(SubjectId::V9);
    let gen = Generator::new(&base, PiId::PI1.invariant());
    let v = PhysicalObject::new(1, ObjectType::Vehicle, Point2::new(120.0, 1.4), 0.0);
    let g = gen.enforce_gene(gene(v, C::IrrelevantVehicle), None, &mut rng(0)).unwrap();
    let (lane, _) = base.map.nearest(g.object.center).unwrap();
    assert_eq!(lane.id, 2);
    assert!((g.object.heading - PI).abs() < 1e-9);
    assert!(!g.object.trajectory.is_empty());
}

#[test]
fn walker_heading_away_is_off_road() {
    let base = seed_for(SubjectId::V6);
    let gen = Generator::new(&base, PiId::PI6.invariant());
    let mut p = PhysicalObject::new(1, ObjectType::Pedestrian, Point2::new(40.0, -1.75 - 1.75 - 2.0 - 0.25), 0.0);
    p.speed = 1.0;
    let g = Gene {
        object: p,
        constraint: C::DynamicOffRoad,
        motion: Some(Motion::Away),
    };
    let g = gen.enforce_gene(g, None, &mut rng(0)).unwrap();
    assert!((g.object.heading - 1.5 * PI).abs() < 1e-9);
    assert!(dynamic_off_road(&g.object, &base));
}

#[test]
fn enforcement_is_idempotent() {
    let mut r = rng(5);
    for subject in SubjectId::ALL {
        let base = seed_for(subject);
        let gen = Generator::new(&base, subject.default_pi().invariant());
        for _ in 0..100 {
            let Some(g) = gen.init_gene(&mut r) else { continue };
            let prev = g.object.center;
            let m = gen.mutate_gene(&g, &mut r).unwrap();
            let again = gen.enforce_gene(m.clone(), Some(prev), &mut r).unwrap();
            assert_eq!(again, m, "{subject}");
        }
    }
}

#[test]
fn crossover_properties() {
    let base = seed_for(SubjectId::V1);
    let gen = Generator::new(&base, PiId::PI1.invariant());
    let mut r = rng(9);
    let a = gen.init_genome(4, &mut r);
    let (x, y) = crossover(&a, &a, 4, &mut r);
    assert_eq!((&x, &y), (&a, &a));
    for _ in 0..200 {
        let a = gen.init_genome(4, &mut r);
        let b = gen.init_genome(4, &mut r);
        let (x, y) = crossover(&a, &b, 4, &mut r);
        let mut pool: Vec<&Gene> = a.iter().chain(&b).collect();
        for g in x.iter().chain(&y) {
            let i = pool.iter().position(|p| *p == g).expect("offspring gene from a parent");
            pool.swap_remove(i);
        }
    }
}

#[test]
fn tournament_statistics() {
    let mut r = rng(2);
    assert_eq!(tournament(&[3.0], &mut r), 0);
    let n = 10_000;
    let wins = (0..n).filter(|_| tournament(&[0.1, 9.9], &mut r) == 0).count();
    let p = wins as f64 / n as f64;
    assert!((p - 0.75).abs() < 0.02, "{p}");
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[tournament(&[1.0; 4], &mut r)] += 1;
    }
    let e = n as f64 / 4.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 3 degrees of freedom, 0.999 quantile.
    assert!(chi2 < 16.27, "{counts:?}");
}

fn quick(subject: SubjectId, mode: Mode, seed: u64, budget: u64) -> CampaignResult {
    let mut cfg = CampaignConfig::new(subject);
    cfg.mode = mode;
    cfg.rng_seed = seed;
    cfg.budget = budget;
    run_campaign(&cfg, &Seed::new(seed_for(subject))).unwrap()
}

#[test]
fn v1_full_campaign_finds_replayable_violation() {
    let res = quick(SubjectId::V1, Mode::Full, 42, 50_000);
    let v = res.violation().expect("violation found");
    assert_eq!(v.decision.verdict, crate::subjects::Verdict::Blocked);
    let mut trace = Trace::new();
    let d = SubjectId::V1.evaluate(&v.scenario, &mut trace).unwrap();
    assert!(check_violation(PiId::PI1.invariant(), &v.scenario, &d).is_some());
    assert!(res.best_fitness.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn zero_budget_is_exhausted_immediately() {
    for mode in Mode::ALL {
        let res = quick(SubjectId::V1, mode, 1, 0);
        assert_eq!(res.outcome, Outcome::Exhausted { reason: ExhaustReason::Budget });
        assert_eq!(res.evaluations, 0);
    }
}

#[test]
fn campaigns_are_deterministic() {
    for mode in Mode::ALL {
        let a = quick(SubjectId::V8, mode, 17, 2_000);
        let b = quick(SubjectId::V8, mode, 17, 2_000);
        assert!(a.same_run(&b), "{mode}");
    }
}

#[test]
fn config_validation() {
    let mut cfg = CampaignConfig::new(SubjectId::V1);
    cfg.pi = Some(PiId::PI3);
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let mut cfg = CampaignConfig::new(SubjectId::V1);
    cfg.population = 0;
    assert!(cfg.validate().is_err());
    let text = r#"{"subject":"v8","mode":"no_guide","budget":10}"#;
    let cfg: CampaignConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.pi(), PiId::PI1);
    assert_eq!(cfg.population, 24);
    assert!(serde_json::from_str::<CampaignConfig>(r#"{"bogus":1}"#).is_err());
    assert_eq!("no_pi".parse::<Mode>().unwrap(), Mode::NoPi);
}
