use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use biwave_core::checks::{invariant_suite, propagator_suite, SuiteResult};
use biwave_core::conservation::to_json_lines;
use biwave_core::evolution::Evolver;
use biwave_core::io::{write_propagator, CsvParts};
use biwave_core::propagators::{advanced, retarded};
use biwave_core::scenarios::{self, ScenarioConfig, ScenarioName, ScenarioReport};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biwave", version, about = "Two-boundary density fields: scenarios and invariant checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV tables and report.
    Run {
        /// two_position, slit, double_slit, stern_gerlach,
        /// momentum_consistency or triple_measurement.
        scenario: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write only the real part of each density.
        #[arg(long)]
        real_part: bool,
    },
    /// Run the invariant suite (conservation laws, totals, reference scenarios).
    Check {
        /// Skip the reference scenario runs.
        #[arg(long)]
        quick: bool,
        /// Write the residual reports here as JSON lines.
        #[arg(long)]
        residuals: Option<PathBuf>,
        /// Print results as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check propagator identities against wavefunction evolution.
    Propcheck {
        #[arg(long)]
        json: bool,
    },
    /// Print the built-in reference config for a scenario.
    Example { scenario: String },
    /// Write the propagator matrix between two times as binary plus sidecar.
    Propagator {
        /// Scenario-style config supplying grid, dt and potential.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        out: PathBuf,
        /// Store the advanced propagator instead of the retarded one.
        #[arg(long)]
        advanced: bool,
    },
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else {
        format!("{v:.3e}")
    }
}

fn print_report(r: &ScenarioReport) {
    for a in &r.assertions {
        let cmp = match a.comparison {
            scenarios::Comparison::Below => "<",
            scenarios::Comparison::Above => ">",
        };
        let tag = if a.pass { "PASS" } else { "FAIL" };
        println!("{tag} {} {} {cmp} {}", a.name, fmt_value(a.measured), fmt_value(a.threshold));
    }
    for f in &r.flags {
        println!("FLAG {f}");
    }
}

fn print_suite(s: &SuiteResult, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(s)?);
        return Ok(());
    }
    for c in &s.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} {} {} {} {}",
            c.name,
            fmt_value(c.measured),
            c.comparison,
            fmt_value(c.threshold)
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            config,
            out,
            real_part,
        } => {
            let name: ScenarioName = scenario.parse()?;
            let cfg = load_config(&config)?;
            let report = scenarios::run(name, &cfg)?;
            let parts = if real_part { CsvParts::RealOnly } else { CsvParts::Both };
            report
                .write(&out, parts)
                .with_context(|| format!("writing outputs to {}", out.display()))?;
            print_report(&report);
            Ok(report.passed())
        }
        Command::Check { quick, residuals, json } => {
            let suite = invariant_suite(!quick)?;
            if let Some(path) = residuals {
                fs::write(&path, to_json_lines(&suite.residuals)).with_context(|| format!("writing {}", path.display()))?;
            }
            print_suite(&suite, json)?;
            Ok(suite.passed())
        }
        Command::Propcheck { json } => {
            let suite = propagator_suite()?;
            print_suite(&suite, json)?;
            Ok(suite.passed())
        }
        Command::Example { scenario } => {
            let name: ScenarioName = scenario.parse()?;
            println!("{}", serde_json::to_string_pretty(&ScenarioConfig::reference(name))?);
            Ok(true)
        }
        Command::Propagator {
            config,
            from,
            to,
            out,
            advanced: adv,
        } => {
            let cfg = load_config(&config)?;
            let potential = cfg.potential.build(&cfg.grid)?;
            let evo = Evolver::new(&cfg.grid, &potential, cfg.dt)?;
            if to < from {
                bail!("--to must not precede --from");
            }
            let p = if adv { advanced(&evo, from, to)? } else { retarded(&evo, from, to)? };
            write_propagator(&out, &p)?;
            println!("wrote {} ({} x {})", out.display(), p.matrix().nrows(), p.matrix().ncols());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
