use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mortensen::harness::{self, ExperimentConfig, RunReport, ScenarioKind};

/// Minimum-energy estimation experiments for reflected dynamics.
///
/// Every verb writes its artifacts, `report.json` and `MANIFEST.sha256`
/// under `--out`. The exit code is 0 only if every declared tolerance holds.
#[derive(Parser)]
#[command(name = "mortensen", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Truth trajectory and observation record.
    Simulate(Common),
    /// Constrained cost-to-come by dynamic programming, with the observer path.
    Dp(Common),
    /// HJB solves in both boundary modes compared against the DP.
    Hjb(Common),
    /// DP and HJB against the Kalman cost-to-come, plus the duality check.
    Kalman(Common),
    /// Reflected Zakai filter and the Laplace sweep over epsilon.
    Zakai(Common),
    /// Whatever pipeline the config's `kind` names.
    Sweep(Common),
    /// Verify a finished run and emit plot-ready CSVs; runs the config first if given.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MORTENSEN_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("MORTENSEN_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load(config: &Path, seed: Option<u64>, kind: Option<ScenarioKind>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = kind {
        cfg.kind = k;
    }
    Ok(cfg)
}

fn run(c: &Common, kind: Option<ScenarioKind>) -> Result<RunReport> {
    let cfg = load(&c.config, c.seed, kind)?;
    let report = harness::run_scenario(&cfg, &c.out).with_context(|| format!("running {}", cfg.name))?;
    print_summary(&report);
    Ok(report)
}

fn print_summary(r: &RunReport) {
    println!("{} [{}] seed {}", r.name, r.kind.name(), r.seed);
    for c in &r.checks {
        println!(
            "  {:<4} {:<28} {:>14.6e} {} {:.6e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.bound
        );
    }
    for (stage, secs) in &r.timing {
        println!("  time {stage:<24} {secs:.3}s");
    }
}

fn report(a: &ReportArgs) -> Result<RunReport> {
    let r = match &a.config {
        Some(config) => {
            let cfg = load(config, a.seed, None)?;
            let r = harness::run_scenario(&cfg, &a.out)?;
            print_summary(&r);
            r
        }
        None => {
            let r = RunReport::load(&a.out)?;
            print_summary(&r);
            r
        }
    };
    let bad = harness::verify_manifest(&a.out)?;
    if !bad.is_empty() {
        bail!("manifest mismatch: {}", bad.join(", "));
    }
    for p in harness::emit_plotdata(&a.out)? {
        println!("  wrote {}", p.display());
    }
    Ok(r)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|_| match &cli.verb {
        Verb::Simulate(c) => run(c, Some(ScenarioKind::Simulate)),
        Verb::Dp(c) => run(c, Some(ScenarioKind::Twin)),
        Verb::Hjb(c) => run(c, Some(ScenarioKind::HjbVsDp)),
        Verb::Kalman(c) => run(c, Some(ScenarioKind::KalmanXcheck)),
        Verb::Zakai(c) => run(c, Some(ScenarioKind::LaplaceSweep)),
        Verb::Sweep(c) => run(c, None),
        Verb::Report(a) => report(a),
    });
    match outcome {
        Ok(r) if r.passed() => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("one or more tolerances failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
