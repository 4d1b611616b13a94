use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lvs_core::experiments::{
    attack_json, builtin_scenario, builtin_scenarios, run_all, run_scenario_with, write_scenario_outputs, RunOptions,
    Scenario, ScenarioRun,
};
use lvs_core::format::fmt_g12;
use lvs_core::scenario_file::load_scenario;
use lvs_core::{verify_theorems, LvsError, Mode, VerificationReport};

const EXIT_INVALID: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "lvs", version, about = "Location verification under correlated shadowing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic ROC curves per detector mode.
    Roc(ScenarioArgs),
    /// Print the attacker's optimal true location, power boost and KL divergence.
    Attack(ScenarioArgs),
    /// Monte Carlo validation of the analytic rates.
    Mc(ScenarioArgs),
    /// Randomized checks of the RSS/DRSS equivalence results.
    Verify(VerifyArgs),
    /// Run every builtin scenario plus the verification suite.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
#[group(id = "source", required = true, multiple = false)]
struct Source {
    /// Builtin scenario name (fig1 .. fig6).
    #[arg(long, group = "source")]
    scenario: Option<String>,
    /// Path to a scenario file.
    #[arg(long, group = "source")]
    scenario_file: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Output directory.
    #[arg(long, env = "LVS_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per hypothesis.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated ln λ values: the ROC grid for `roc`, the Monte Carlo
    /// thresholds otherwise.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    thresholds: Option<Vec<f64>>,
    /// Comma-separated detector modes (rss, drss).
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<Mode>>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of random geometries.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory for `verification_report.json`.
    #[arg(long, env = "LVS_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    #[command(flatten)]
    common: Overrides,
    /// Random geometries for the verification suite.
    #[arg(long, default_value_t = 100)]
    verify_trials: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum ThresholdTarget {
    Roc,
    MonteCarlo,
}

fn load(source: &Source) -> Result<Scenario, LvsError> {
    match (&source.scenario, &source.scenario_file) {
        (Some(name), None) => builtin_scenario(name).ok_or_else(|| {
            let known: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
            LvsError::InvalidScenario(format!(
                "unknown builtin scenario {name:?} (known: {})",
                known.join(", ")
            ))
        }),
        (None, Some(path)) => load_scenario(path),
        _ => unreachable!("clap enforces exactly one scenario source"),
    }
}

fn apply(mut s: Scenario, o: &Overrides, target: ThresholdTarget) -> Result<Scenario, LvsError> {
    if let Some(seed) = o.seed {
        s.mc.seed = seed;
    }
    if let Some(trials) = o.trials {
        s.mc.trials = trials;
    }
    if let Some(modes) = &o.modes {
        s.modes = modes.clone();
    }
    if let Some(t) = &o.thresholds {
        match target {
            ThresholdTarget::Roc => s.thresholds = Some(t.clone()),
            ThresholdTarget::MonteCarlo => s.mc.thresholds = t.clone(),
        }
    }
    s.validate()?;
    Ok(s)
}

fn write_report(report: &VerificationReport, out: &Path) -> Result<(), LvsError> {
    fs::create_dir_all(out)?;
    fs::write(out.join("verification_report.json"), report.to_json())?;
    Ok(())
}

fn print_report(out: &mut String, report: &VerificationReport) {
    for c in &report.checks {
        let status = if c.status == lvs_core::experiments::CheckStatus::Pass {
            "pass"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            out,
            "{status:4} {:24} worst {:>14} tolerance {}",
            c.name,
            fmt_g12(c.measured),
            fmt_g12(c.tolerance)
        );
    }
}

/// One line per Monte Carlo record; returns the number that disagree.
fn print_mc(out: &mut String, run: &ScenarioRun) -> usize {
    let mut flagged = 0;
    for v in &run.variants {
        for r in &v.mc {
            let ok = r.agrees();
            flagged += usize::from(!ok);
            let _ = writeln!(
                out,
                "{:4} {:12} {:4} {} lnλ={:>3} rate={:<14} analytic={:<14} z={:.3}",
                if ok { "ok" } else { "FAIL" },
                r.scenario,
                r.mode,
                r.hypothesis,
                fmt_g12(r.ln_lambda),
                fmt_g12(r.rate),
                fmt_g12(r.analytic),
                r.z_score()
            );
        }
    }
    flagged
}

fn print_curves(out: &mut String, run: &ScenarioRun, dir: &Path) {
    for v in &run.variants {
        for c in &v.curves {
            let _ = writeln!(
                out,
                "{} s={} auc={} -> {}",
                v.variant.name,
                fmt_g12(c.roc.separation),
                fmt_g12(c.roc.auc),
                dir.join(&v.variant.name).join(c.file_name()).display()
            );
        }
    }
}

/// Runs a command, appending its report to `out`; returns the exit code.
fn run(cli: Cli, out: &mut String) -> Result<u8, LvsError> {
    match cli.command {
        Command::Roc(a) => {
            let s = apply(load(&a.source)?, &a.common, ThresholdTarget::Roc)?;
            let run = run_scenario_with(&s, RunOptions { monte_carlo: false })?;
            write_scenario_outputs(&s, &run, &a.common.out)?;
            print_curves(out, &run, &a.common.out);
            Ok(0)
        }
        Command::Attack(a) => {
            let s = apply(load(&a.source)?, &a.common, ThresholdTarget::Roc)?;
            let run = run_scenario_with(&s, RunOptions { monte_carlo: false })?;
            let docs: Vec<_> = run.variants.iter().map(|v| attack_json(&s, v)).collect();
            let doc = if docs.len() == 1 {
                docs[0].clone()
            } else {
                serde_json::Value::Array(docs)
            };
            out.push_str(&serde_json::to_string_pretty(&doc).expect("json"));
            out.push('\n');
            Ok(0)
        }
        Command::Mc(a) => {
            let s = apply(load(&a.source)?, &a.common, ThresholdTarget::MonteCarlo)?;
            let run = run_scenario_with(&s, RunOptions { monte_carlo: true })?;
            write_scenario_outputs(&s, &run, &a.common.out)?;
            let flagged = print_mc(out, &run);
            if flagged > 0 {
                eprintln!("{flagged} Monte Carlo rates disagree with the analytic rates");
                return Ok(EXIT_CHECK_FAILED);
            }
            Ok(0)
        }
        Command::Verify(a) => {
            let report = verify_theorems(a.trials, a.seed)?;
            write_report(&report, &a.out)?;
            print_report(out, &report);
            Ok(if report.all_passed() { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::Reproduce(a) => {
            let scenarios = builtin_scenarios()
                .into_iter()
                .map(|s| apply(s, &a.common, ThresholdTarget::MonteCarlo))
                .collect::<Result<Vec<_>, _>>()?;
            let runs = run_all(&scenarios, RunOptions { monte_carlo: true })?;
            let mut flagged = 0;
            for (s, run) in scenarios.iter().zip(&runs) {
                write_scenario_outputs(s, run, &a.common.out)?;
                print_curves(out, run, &a.common.out);
                flagged += print_mc(out, run);
            }
            let report = verify_theorems(a.verify_trials, a.common.seed.unwrap_or(7))?;
            write_report(&report, &a.common.out)?;
            print_report(out, &report);
            if flagged > 0 || !report.all_passed() {
                return Ok(EXIT_CHECK_FAILED);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    let mut out = String::new();
    let result = run(cli, &mut out);
    // A closed pipe (e.g. `lvs ... | head`) is not an error.
    let _ = std::io::stdout().write_all(out.as_bytes());
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
