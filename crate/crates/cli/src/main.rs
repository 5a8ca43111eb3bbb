use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use splitsim_core::scenario;
use splitsim_core::trace::{ConstructionConfig, Trace};
use splitsim_core::tree::{Path as TreePath, Regime};
use splitsim_core::verifier;
use splitsim_core::{run_construction, true_path_estimate, Roster};

#[derive(Parser)]
#[command(name = "splitsim", about = "Priority-tree construction simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    OneSplit,
    TwoSplit,
    General,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a construction against a roster file.
    Run {
        /// Roster file (TOML; see docs/roster-schema.md).
        #[arg(long)]
        roster: PathBuf,
        #[arg(long, value_enum, default_value = "two-split")]
        regime: RegimeArg,
        /// Number of split pairs in the general regime.
        #[arg(long, default_value_t = 2)]
        splits: usize,
        #[arg(long, default_value_t = 50)]
        horizon: u32,
        /// Write the trace (line-delimited records) here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Visits needed before a node counts toward the true-path estimate.
        #[arg(long, default_value_t = 3)]
        true_path_threshold: u32,
    },
    /// Re-check an existing trace file.
    Verify {
        trace: PathBuf,
        /// Also check the recorded side-vector switches.
        #[arg(long, default_value_t = true)]
        switches: bool,
    },
    /// Run a canned scenario by name.
    Scenario {
        name: String,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        true_path_threshold: u32,
    },
    /// List canned scenarios.
    ListScenarios,
}

fn regime_of(arg: RegimeArg, splits: usize) -> Regime {
    match arg {
        RegimeArg::OneSplit => Regime::OneSplit,
        RegimeArg::TwoSplit => Regime::TwoSplit,
        RegimeArg::General => Regime::General { splits },
    }
}

fn summarize(trace: &Trace, threshold: u32, focus: Option<&TreePath>) {
    let b = trace
        .events
        .iter()
        .rev()
        .find_map(|e| match e {
            splitsim_core::Event::Final { b } => Some(b.clone()),
            _ => None,
        })
        .unwrap_or_default();
    println!("stages: {}", trace.header.config.horizon);
    println!("|B| = {}: {:?}", b.len(), b);
    let tp = true_path_estimate(trace, threshold);
    println!("true path (threshold {}): {}", threshold, tp.render());
    if let Some(q) = focus {
        let hist = verifier::outcome_history(trace, q);
        let tail: Vec<String> = hist
            .iter()
            .rev()
            .take(8)
            .rev()
            .map(|(s, o)| format!("{}:{}", s, o.token()))
            .collect();
        let label = if q.is_empty() {
            "(root)".to_string()
        } else {
            q.render()
        };
        println!(
            "focus {} — {} visits, last outcomes [{}], slow-route count {}",
            label,
            hist.len(),
            tail.join(" "),
            verifier::count_speedup_witnesses(trace, q)
        );
    }
}

fn report(reports: &[verifier::CheckReport]) -> bool {
    let mut ok = true;
    for r in reports {
        println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.name);
        for d in &r.details {
            println!("  {d}");
        }
        ok &= r.pass;
    }
    ok
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            roster,
            regime,
            splits,
            horizon,
            trace_out,
            true_path_threshold,
        } => {
            let text = fs::read_to_string(&roster)
                .with_context(|| format!("reading {}", roster.display()))?;
            let roster = Roster::parse(&text)?;
            let cfg = ConstructionConfig {
                regime: regime_of(regime, splits),
                horizon,
                seed: 0,
            };
            let trace = run_construction(cfg, roster);
            summarize(&trace, true_path_threshold, None);
            if let Some(out) = trace_out {
                fs::write(&out, trace.serialize())?;
                println!("trace written to {}", out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { trace, switches } => {
            let text = fs::read_to_string(&trace)
                .with_context(|| format!("reading {}", trace.display()))?;
            let trace = Trace::parse(&text)?;
            let mut reports = verifier::standard_checks(&trace);
            if switches {
                reports.push(verifier::check_switch_sequence(&trace));
            }
            let ok = report(&reports);
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Cmd::Scenario {
            name,
            trace_out,
            true_path_threshold,
        } => {
            let Some(sc) = scenario::by_name(&name) else {
                bail!("unknown scenario {name}; try list-scenarios");
            };
            println!("{}: {}", sc.name, sc.summary);
            let trace = run_construction(sc.cfg.clone(), sc.roster.clone());
            summarize(&trace, true_path_threshold, Some(&sc.focus));
            let mut reports = vec![verifier::check_switch_sequence(&trace)];
            if sc.check_equation {
                reports.push(verifier::check_equation_in_r(&trace, &sc.focus));
            }
            report(&reports);
            if let Some(out) = trace_out {
                fs::write(&out, trace.serialize())?;
                println!("trace written to {}", out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ListScenarios => {
            for sc in scenario::all() {
                println!(
                    "{:6} {:9} horizon {:3}  {}",
                    sc.name,
                    sc.cfg.regime.token(),
                    sc.cfg.horizon,
                    sc.summary
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
