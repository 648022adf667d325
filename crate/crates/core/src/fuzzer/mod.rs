//! Evolutionary search for planning-invariant violations.
//!
//! A campaign evolves sets of attacker objects placed into a base scenario.
//! Each candidate is run through the subject planner; the vulnerability
//! distance of its trace is the fitness, and the first candidate whose
//! decision breaks the invariant ends the search.

pub mod generate;
mod unconstrained;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{score, DistanceProfile, History, DEFAULT_WEIGHT_C};
use crate::error::{Error, Result};
use crate::invariants::{check_violation, satisfied_constraints, PiId, Violation};
use crate::scenario::{PhysicalObject, PlanningScenario, Seed};
use crate::subjects::{SubjectConfig, SubjectId, Trace};

pub use generate::{
    assemble, crossover, tournament, Gene, Generator, Motion, MutationParams, ENFORCE_MARGIN,
    GENOME_ID_BASE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Distance-guided evolution with constraint enforcement.
    Full,
    /// Constraint-aware random sampling; fitness is ignored.
    NoGuide,
    /// Distance-guided evolution without enforcement; candidates that break
    /// the invariant premise are discarded.
    NoPi,
    /// Random bit flips on the object list, no enforcement and no guidance.
    Unconstrained,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Full, Mode::NoGuide, Mode::NoPi, Mode::Unconstrained];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NoGuide => "no-guide",
            Mode::NoPi => "no-pi",
            Mode::Unconstrained => "unconstrained",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::Usage(format!("unknown mode `{s}` (full, no-guide, no-pi, unconstrained)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub subject: SubjectId,
    /// Defaults to the subject's own invariant.
    pub pi: Option<PiId>,
    pub mode: Mode,
    pub population: usize,
    pub max_objects: usize,
    pub mutation: MutationParams,
    pub crossover_rate: f64,
    pub add_prob: f64,
    pub remove_prob: f64,
    /// Generations without improvement of the best fitness before the
    /// population is abandoned.
    pub stagnation_limit: u64,
    /// On stagnation, start over from a fresh population instead of stopping.
    /// The distance history is kept across restarts.
    pub restart_on_stagnation: bool,
    /// Maximum number of subject evaluations.
    pub budget: u64,
    pub rng_seed: u64,
    pub weight_c: f64,
    pub subject_config: SubjectConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig::new(SubjectId::V1)
    }
}

impl CampaignConfig {
    pub fn new(subject: SubjectId) -> CampaignConfig {
        CampaignConfig {
            subject,
            pi: None,
            mode: Mode::Full,
            population: 24,
            max_objects: 4,
            mutation: MutationParams::default(),
            crossover_rate: 0.7,
            add_prob: 0.1,
            remove_prob: 0.05,
            stagnation_limit: 100,
            restart_on_stagnation: true,
            budget: 50_000,
            rng_seed: 0,
            weight_c: DEFAULT_WEIGHT_C,
            subject_config: SubjectConfig::default(),
        }
    }

    pub fn pi(&self) -> PiId {
        self.pi.unwrap_or(self.subject.default_pi())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population == 0 {
            return bad("population must be at least 1".into());
        }
        if self.max_objects == 0 {
            return bad("max_objects must be at least 1".into());
        }
        if !(self.mutation.sigma.is_finite() && self.mutation.sigma >= 0.0) {
            return bad(format!("mutation sigma must be finite and non-negative, got {}", self.mutation.sigma));
        }
        let probs = [
            ("crossover_rate", self.crossover_rate),
            ("add_prob", self.add_prob),
            ("remove_prob", self.remove_prob),
            ("mutation.resize_prob", self.mutation.resize_prob),
            ("mutation.reheading_prob", self.mutation.reheading_prob),
            ("mutation.redraw_motion_prob", self.mutation.redraw_motion_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.weight_c.is_finite() && self.weight_c > 0.0) {
            return bad(format!("weight_c must be positive, got {}", self.weight_c));
        }
        if self.stagnation_limit == 0 {
            return bad("stagnation_limit must be at least 1".into());
        }
        let pi = self.pi();
        if pi.invariant().kind != self.subject.scenario_kind() {
            return bad(format!(
                "{} covers {:?} scenarios but subject {} plans {:?}",
                pi,
                pi.invariant().kind,
                self.subject,
                self.subject.scenario_kind()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustReason {
    Budget,
    Stagnation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Found {
        violation: Box<Violation>,
        /// Evaluations spent up to and including the violating one.
        evaluations: u64,
    },
    Exhausted {
        reason: ExhaustReason,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub subject: SubjectId,
    pub pi: PiId,
    pub mode: Mode,
    pub rng_seed: u64,
    pub outcome: Outcome,
    pub evaluations: u64,
    pub generations: u64,
    pub restarts: u64,
    /// Evaluations whose subject run returned an error; counted as non-violations.
    pub evaluation_errors: u64,
    /// Best fitness seen so far, one entry per generation.
    pub best_fitness: Vec<f64>,
    pub wall_time_secs: f64,
}

impl CampaignResult {
    pub fn violation(&self) -> Option<&Violation> {
        match &self.outcome {
            Outcome::Found { violation, .. } => Some(violation),
            Outcome::Exhausted { .. } => None,
        }
    }

    pub fn time_to_exposure(&self) -> Option<u64> {
        match self.outcome {
            Outcome::Found { evaluations, .. } => Some(evaluations),
            Outcome::Exhausted { .. } => None,
        }
    }

    /// Identical apart from wall-clock time.
    pub fn same_run(&self, other: &CampaignResult) -> bool {
        let mut a = self.clone();
        a.wall_time_secs = other.wall_time_secs;
        a == *other
    }
}

struct Evaluation {
    fitness: f64,
    violation: Option<Violation>,
    history: History,
    error: bool,
}

struct Campaign<'a> {
    config: &'a CampaignConfig,
    base: &'a PlanningScenario,
    profile: DistanceProfile,
    rng: ChaCha8Rng,
    history: History,
    evaluations: u64,
    generations: u64,
    restarts: u64,
    errors: u64,
    best: f64,
    series: Vec<f64>,
}

impl Campaign<'_> {
    fn evaluate(&self, scenario: &PlanningScenario, guided: bool) -> Evaluation {
        let mut trace = Trace::new();
        let decision = match self.config.subject.evaluate_with(&self.config.subject_config, scenario, &mut trace) {
            Ok(d) => d,
            Err(_) => {
                return Evaluation {
                    fitness: f64::INFINITY,
                    violation: None,
                    history: History::new(),
                    error: true,
                }
            }
        };
        let violation = check_violation(self.config.pi().invariant(), scenario, &decision);
        let (fitness, history) = if guided {
            score(&self.profile, &trace, &self.history, self.config.weight_c)
        } else {
            (f64::NAN, History::new())
        };
        Evaluation {
            fitness,
            violation,
            history,
            error: false,
        }
    }

    /// Evaluates as many candidates as the budget allows. Returns the fitness
    /// of each evaluated candidate, or the outcome when a violation shows up.
    fn generation(&mut self, candidates: &[PlanningScenario], guided: bool) -> std::result::Result<Vec<f64>, Outcome> {
        let left = self.config.budget.saturating_sub(self.evaluations);
        let k = candidates.len().min(usize::try_from(left).unwrap_or(usize::MAX));
        let results: Vec<Evaluation> = candidates[..k]
            .par_iter()
            .map(|sc| self.evaluate(sc, guided))
            .collect();
        let start = self.evaluations;
        self.evaluations += k as u64;
        self.generations += 1;
        for (i, r) in results.iter().enumerate() {
            if let Some(v) = &r.violation {
                return Err(Outcome::Found {
                    violation: Box::new(v.clone()),
                    evaluations: start + i as u64 + 1,
                });
            }
        }
        self.errors += results.iter().filter(|r| r.error).count() as u64;
        for r in &results {
            self.history.merge(&r.history);
        }
        let fitness: Vec<f64> = results.iter().map(|r| r.fitness).collect();
        if guided {
            let gen_best = fitness.iter().copied().fold(f64::INFINITY, f64::min);
            self.best = self.best.min(gen_best);
            self.series.push(self.best);
        }
        Ok(fitness)
    }

    fn budget_left(&self) -> bool {
        self.evaluations < self.config.budget
    }
}

/// Genes for the objects a seed already carries, each tied to a clause it
/// satisfies (or the first admissible one).
fn seed_genes(gen: &Generator<'_>, seed: &Seed, rng: &mut ChaCha8Rng) -> Vec<Gene> {
    seed.genome
        .iter()
        .filter_map(|o| {
            let probe = assemble(gen.base, &[Gene {
                object: o.clone(),
                constraint: gen.pi.admissible(o.kind)[0],
                motion: None,
            }]);
            let placed = probe.objects.last()?;
            let constraint = satisfied_constraints(gen.pi, placed, &probe)
                .first()
                .copied()
                .unwrap_or(gen.pi.admissible(o.kind)[0]);
            let gene = Gene {
                object: o.clone(),
                constraint,
                motion: None,
            };
            if gen.enforce && !gen.accepts(&gene) {
                gen.enforce_gene(gene, None, rng)
            } else {
                Some(gene)
            }
        })
        .collect()
}

/// Runs one campaign from a seed until a violation is found, the budget is
/// spent, or the best fitness stops improving.
pub fn run_campaign(config: &CampaignConfig, seed: &Seed) -> Result<CampaignResult> {
    config.validate()?;
    let base = &seed.base;
    if base.kind != config.subject.scenario_kind() {
        return Err(Error::Usage(format!(
            "seed is a {:?} scenario but subject {} plans {:?}",
            base.kind,
            config.subject,
            config.subject.scenario_kind()
        )));
    }
    base.validate()?;
    let started = Instant::now();
    let mut c = Campaign {
        config,
        base,
        profile: DistanceProfile::for_subject(config.subject),
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        history: History::new(),
        evaluations: 0,
        generations: 0,
        restarts: 0,
        errors: 0,
        best: f64::INFINITY,
        series: Vec::new(),
    };
    let outcome = match config.mode {
        Mode::Full | Mode::NoPi => evolve(&mut c, seed),
        Mode::NoGuide => sample(&mut c),
        Mode::Unconstrained => unconstrained::run(&mut c, seed),
    };
    Ok(CampaignResult {
        subject: config.subject,
        pi: config.pi(),
        mode: config.mode,
        rng_seed: config.rng_seed,
        outcome,
        evaluations: c.evaluations,
        generations: c.generations,
        restarts: c.restarts,
        evaluation_errors: c.errors,
        best_fitness: c.series,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

fn exhausted(reason: ExhaustReason) -> Outcome {
    Outcome::Exhausted { reason }
}

fn evolve(c: &mut Campaign<'_>, seed: &Seed) -> Outcome {
    let cfg = c.config;
    let mut gen = Generator::new(c.base, cfg.pi().invariant());
    gen.params = cfg.mutation;
    gen.enforce = cfg.mode != Mode::NoPi;

    let mut population: Vec<Vec<Gene>> = Vec::with_capacity(cfg.population);
    let from_seed = seed_genes(&gen, seed, &mut c.rng);
    if !from_seed.is_empty() {
        population.push(from_seed);
    }
    let fill = |population: &mut Vec<Vec<Gene>>, rng: &mut ChaCha8Rng| {
        while population.len() < cfg.population {
            population.push(gen.init_genome(cfg.max_objects, rng));
        }
    };
    fill(&mut population, &mut c.rng);

    let mut epoch_best = f64::INFINITY;
    let mut stagnant = 0u64;
    loop {
        if !c.budget_left() {
            return exhausted(ExhaustReason::Budget);
        }
        let scenarios: Vec<PlanningScenario> = population.iter().map(|g| assemble(c.base, g)).collect();
        let fitness = match c.generation(&scenarios, true) {
            Ok(f) => f,
            Err(found) => return found,
        };
        let gen_best = fitness.iter().copied().fold(f64::INFINITY, f64::min);
        if gen_best < epoch_best {
            epoch_best = gen_best;
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        if !c.budget_left() {
            return exhausted(ExhaustReason::Budget);
        }
        if stagnant >= cfg.stagnation_limit {
            if !cfg.restart_on_stagnation {
                return exhausted(ExhaustReason::Stagnation);
            }
            c.restarts += 1;
            epoch_best = f64::INFINITY;
            stagnant = 0;
            population.clear();
            fill(&mut population, &mut c.rng);
            continue;
        }
        let elite = fitness
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        let mut next = vec![population[elite].clone()];
        while next.len() < cfg.population {
            let a = &population[tournament(&fitness, &mut c.rng)];
            let b = &population[tournament(&fitness, &mut c.rng)];
            let (x, y) = if c.rng.random_bool(cfg.crossover_rate) {
                crossover(a, b, cfg.max_objects, &mut c.rng)
            } else {
                (a.clone(), b.clone())
            };
            for child in [x, y] {
                if next.len() < cfg.population {
                    next.push(mutate_genome(&gen, cfg, &child, &mut c.rng));
                }
            }
        }
        population = next;
    }
}

fn mutate_genome(gen: &Generator<'_>, cfg: &CampaignConfig, genome: &[Gene], rng: &mut ChaCha8Rng) -> Vec<Gene> {
    let mut out: Vec<Gene> = genome.iter().filter_map(|g| gen.mutate_gene(g, rng)).collect();
    if out.len() < cfg.max_objects && rng.random_bool(cfg.add_prob) {
        out.extend(gen.init_gene(rng));
    }
    if out.len() > 1 && rng.random_bool(cfg.remove_prob) {
        let i = rng.random_range(0..out.len());
        out.remove(i);
    }
    if out.is_empty() {
        out = gen.init_genome(cfg.max_objects, rng);
    }
    out
}

fn sample(c: &mut Campaign<'_>) -> Outcome {
    let cfg = c.config;
    let mut gen = Generator::new(c.base, cfg.pi().invariant());
    gen.params = cfg.mutation;
    loop {
        if !c.budget_left() {
            return exhausted(ExhaustReason::Budget);
        }
        let scenarios: Vec<PlanningScenario> = (0..cfg.population)
            .map(|_| assemble(c.base, &gen.init_genome(cfg.max_objects, &mut c.rng)))
            .collect();
        if let Err(found) = c.generation(&scenarios, false) {
            return found;
        }
    }
}

/// Places raw objects after the base scenario's own objects.
pub fn assemble_objects(base: &PlanningScenario, objects: &[PhysicalObject]) -> PlanningScenario {
    let mut sc = base.clone();
    sc.objects.extend(objects.iter().enumerate().map(|(i, o)| {
        let mut o = o.clone();
        o.id = GENOME_ID_BASE + i as u32;
        o
    }));
    sc
}

#[cfg(test)]
mod tests;
