use plandos_core::fixtures::seed_for;
use plandos_core::fuzzer::*;
use plandos_core::scenario::Seed;
use plandos_core::subjects::SubjectId;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let subjects: Vec<SubjectId> = if args.len() > 1 { args[1].split(',').map(|s| s.parse().unwrap()).collect() } else { SubjectId::ALL.to_vec() };
    let mode: Mode = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(Mode::Full);
    let runs: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(10);
    let budget: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(50_000);
    for s in subjects {
        let t = std::time::Instant::now();
        let mut found = 0;
        let mut ttes = vec![];
        let mut reasons = vec![];
        for r in 0..runs {
            let mut cfg = CampaignConfig::new(s);
            cfg.mode = mode;
            cfg.rng_seed = r;
            cfg.budget = budget;
            let res = run_campaign(&cfg, &Seed::new(seed_for(s))).unwrap();
            match &res.outcome {
                Outcome::Found { evaluations, .. } => { found += 1; ttes.push(*evaluations); }
                Outcome::Exhausted { reason } => { reasons.push(format!("{:?}@{}", reason, res.evaluations)); ttes.push(budget); }
            }
        }
        ttes.sort();
        println!("{s} {mode}: {found}/{runs} median {} ttes {:?} exhausted {:?} ({:.1}s)", ttes[ttes.len()/2], ttes, reasons, t.elapsed().as_secs_f64());
    }
}
