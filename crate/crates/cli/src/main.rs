use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glasslab::{Execution, GlassError, Mixture};
use glasslab_cli::output::Sink;
use glasslab_cli::{exit_code, run, summary_code, ExperimentConfig, Format, Kind, EXIT_FLAGGED, EXIT_OK};
use glasslab_selftest::Settings;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "glass", version, about = "Batch experiments on spherical mixed p-spin glasses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `out`, else `glass-out/<command>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; does not change results.
    #[arg(long, global = true, env = "GLASS_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium samples and energy traces.
    Simulate(Overrides),
    /// Free energy by thermodynamic integration.
    FreeEnergy(Overrides),
    /// Minimum of H on an inner sphere.
    GroundState(Overrides),
    /// Limiting free energy from the variational formula.
    Parisi(Overrides),
    /// TAP profile and its consistency with the solver.
    Tap(Overrides),
    /// Overlap analytics of Gibbs samples.
    States(Overrides),
    /// Band free energies around centres at several energies.
    Landscape(Overrides),
    /// Runs the acceptance suite.
    Selftest {
        /// Criterion ids to run (all when empty).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Args)]
struct Overrides {
    /// Mixture as JSON, e.g. '{"2": 0.5, "3": 0.5}'.
    #[arg(long)]
    mixture: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Inverse temperature; repeat for a ladder.
    #[arg(long)]
    beta: Vec<f64>,
    #[arg(long)]
    disorders: Option<usize>,
}

fn kind(c: &Command) -> Option<(Kind, &Overrides)> {
    Some(match c {
        Command::Simulate(o) => (Kind::Simulate, o),
        Command::FreeEnergy(o) => (Kind::FreeEnergy, o),
        Command::GroundState(o) => (Kind::GroundState, o),
        Command::Parisi(o) => (Kind::Parisi, o),
        Command::Tap(o) => (Kind::Tap, o),
        Command::States(o) => (Kind::States, o),
        Command::Landscape(o) => (Kind::Landscape, o),
        Command::Selftest { .. } => return None,
    })
}

fn resolve(cli: &Cli, kind: Kind, o: &Overrides) -> glasslab::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p, kind)?,
        None => ExperimentConfig::new(kind),
    };
    if let Some(m) = &o.mixture {
        cfg.mixture = serde_json::from_str(m).map_err(|e| GlassError::invalid("mixture", e.to_string()))?;
        Mixture::from_map(&cfg.mixture)?;
    }
    if let Some(n) = o.n {
        cfg.n = n;
    }
    if !o.beta.is_empty() {
        cfg.betas = o.beta.clone();
    }
    if let Some(d) = o.disorders {
        cfg.disorders = d;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct SelftestSummary {
    passed: usize,
    total: usize,
    outcomes: Vec<glasslab_selftest::Outcome>,
}

fn selftest(cli: &Cli, only: &[u32]) -> glasslab::Result<u8> {
    let mut settings = Settings::default();
    if let Some(s) = cli.seed {
        settings.seed = s;
    }
    let outcomes = glasslab_selftest::run(only, &settings, |o| println!("{}", o.line()));
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("glass-out/selftest"));
    let mut sink = Sink::create(&dir, cli.format)?;
    let total = outcomes.len();
    sink.json("summary.json", &SelftestSummary { passed, total, outcomes })?;
    Ok(if passed == total { EXIT_OK } else { EXIT_FLAGGED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        glasslab::exec::init_threads(t);
    }
    let result = match (&cli.command, kind(&cli.command)) {
        (Command::Selftest { only }, _) => selftest(&cli, only),
        (_, None) => unreachable!("every other command names an experiment"),
        (_, Some((kind, o))) => resolve(&cli, kind, o).and_then(|cfg| {
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("glass-out").join(kind.as_str()));
            let mut sink = Sink::create(&dir, cli.format)?;
            let s = run(&cfg, Execution::Parallel, &mut sink)?;
            for c in s.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} ({})", c.name, c.detail);
            }
            if s.flagged {
                eprintln!("results carry numerical flags");
            }
            println!("{}", sink.dir().join("summary.json").display());
            Ok(summary_code(&s))
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
