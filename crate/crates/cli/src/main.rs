use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use plandos_core::experiment::{
    parse_violations, replay, resolve_seed, run_experiment, summarize, to_jsonl, write_atomic, ExperimentSpec,
};
use plandos_core::fuzzer::{run_campaign, CampaignConfig, Mode, Outcome};
use plandos_core::invariants::{registry, PiId};
use plandos_core::scenario::Seed;
use plandos_core::subjects::SubjectId;

/// A Full-mode run missed, a single run found nothing, or a replay failed.
const EXIT_NOT_FOUND: u8 = 2;
const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "plandos", version, about = "Fuzz behavioral planners for semantic denial-of-service decisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one fuzzing campaign.
    Run(RunArgs),
    /// Run a multi-run comparison of fuzzing modes.
    Experiment(ExperimentArgs),
    /// Re-check recorded violations against their subject and invariant.
    Replay(ReplayArgs),
    /// Print the planning invariant registry.
    ListPis,
    /// Print the available subjects with their seeds and invariants.
    ListSubjects,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    subject: SubjectId,
    /// Planning invariant; defaults to the subject's own.
    #[arg(long)]
    pi: Option<PiId>,
    #[arg(long, default_value = "full")]
    mode: Mode,
    /// Seed scenario file or bundled seed name; defaults to the subject's bundled seed.
    #[arg(long)]
    seed_file: Option<String>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    weight_c: Option<f64>,
    /// JSON campaign configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the campaign result JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment specification JSON.
    spec: PathBuf,
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long)]
    budget: Option<u64>,
    /// Base RNG seed; run `i` uses base + i.
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    weight_c: Option<f64>,
    /// Restrict the experiment to these modes (repeatable).
    #[arg(long)]
    mode: Vec<Mode>,
    /// Output directory for report.json, report.txt and results.jsonl.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Violation JSON, campaign result JSON, or JSON lines of either.
    file: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Replay(a) => cmd_replay(&a.file),
        Command::ListPis => {
            list_pis();
            Ok(true)
        }
        Command::ListSubjects => {
            list_subjects();
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NOT_FOUND),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<CampaignConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => CampaignConfig::new(a.subject),
    };
    cfg.subject = a.subject;
    cfg.mode = a.mode;
    if a.pi.is_some() {
        cfg.pi = a.pi;
    }
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    if let Some(s) = a.rng_seed {
        cfg.rng_seed = s;
    }
    if let Some(c) = a.weight_c {
        cfg.weight_c = c;
    }
    let seed_name = a.seed_file.unwrap_or_else(|| a.subject.fixture().to_string());
    let seed = Seed::new(resolve_seed(&seed_name, None)?);
    let result = run_campaign(&cfg, &seed)?;

    match &result.outcome {
        Outcome::Found { violation, evaluations } => println!(
            "{} {} {}: found `{}` ({:?}) after {} evaluations, {:.2}s",
            result.subject,
            result.pi,
            result.mode,
            violation.target,
            violation.decision.verdict,
            evaluations,
            result.wall_time_secs
        ),
        Outcome::Exhausted { reason } => println!(
            "{} {} {}: nothing found, {:?} exhausted after {} evaluations",
            result.subject, result.pi, result.mode, reason, result.evaluations
        ),
    }
    if let Some(out) = &a.out {
        write_json(out, &result)?;
        println!("wrote {}", out.display());
    }
    Ok(result.violation().is_some())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<bool> {
    let mut spec = ExperimentSpec::load(&a.spec)?;
    if let Some(r) = a.runs {
        spec.runs = r;
    }
    if let Some(b) = a.budget {
        spec.budget = b;
    }
    if let Some(s) = a.rng_seed {
        spec.base_seed = s;
    }
    if !a.mode.is_empty() {
        spec.modes = a.mode.clone();
    }
    if let Some(c) = a.weight_c {
        let subject = spec.entries.first().map_or(SubjectId::V1, |e| e.subject);
        spec.campaign.get_or_insert_with(|| CampaignConfig::new(subject)).weight_c = c;
    }
    let base_dir = a.spec.parent().map(Path::to_path_buf);
    let total = spec.entries.len() * spec.modes.len() * spec.runs as usize;
    eprintln!("running {total} campaigns");

    let results = run_experiment(&spec, base_dir.as_deref(), |r| {
        let status = match r.time_to_exposure() {
            Some(t) => format!("found at {t}"),
            None => "not found".to_string(),
        };
        eprintln!("  {} {} seed {}: {status}", r.subject, r.mode, r.rng_seed);
    })?;
    let report = summarize(&results, spec.budget);

    write_atomic(&a.out.join("results.jsonl"), to_jsonl(&results).as_bytes())?;
    write_json(&a.out.join("report.json"), &report)?;
    let table = report.table();
    write_atomic(&a.out.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    println!("wrote {}", a.out.display());
    Ok(report.full_failures == 0)
}

fn cmd_replay(file: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let violations = parse_violations(&text, &file.display().to_string())?;
    anyhow::ensure!(!violations.is_empty(), "{} contains no violations", file.display());
    let mut all = true;
    for v in &violations {
        let r = replay(v)?;
        let verdict = if r.confirmed && r.invariant_holds && r.ranges_ok {
            "PASS"
        } else {
            all = false;
            "FAIL"
        };
        let mut why = Vec::new();
        if !r.invariant_holds {
            why.push("invariant premise not satisfied".to_string());
        }
        if !r.ranges_ok {
            why.push("object outside plausible ranges".to_string());
        }
        if !r.confirmed {
            why.push(format!(
                "decision {:?} instead of {:?}",
                r.replayed.verdict, r.recorded.verdict
            ));
        }
        let detail = if why.is_empty() {
            format!("{:?} reproduced", r.replayed.verdict)
        } else {
            why.join("; ")
        };
        println!("{verdict} {} {} `{}`: {detail}", r.subject, r.pi, v.target);
    }
    Ok(all)
}

fn list_pis() {
    for pi in registry() {
        println!("{} [{:?}] {}", pi.id, pi.kind, pi.scenario);
        println!("    desired: {:?}", pi.desired);
        for (label, cs) in [
            ("static obstacles", pi.static_obstacles),
            ("vehicles", pi.vehicles),
            ("pedestrians", pi.pedestrians),
        ] {
            let codes: Vec<String> = cs.iter().map(|c| format!("{} ({})", c.code(), c.description())).collect();
            let codes = if codes.is_empty() { "not allowed".to_string() } else { codes.join(", ") };
            println!("    {label}: {codes}");
        }
    }
}

fn list_subjects() {
    for s in SubjectId::ALL {
        println!("{s:<4} {:<5} {:<28} {}", s.default_pi(), s.fixture(), s.description());
    }
}
