use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twotier_cli::commands::{capacity_sweep, fit_ratios, outage_sweep};
use twotier_cli::format::sig9;
use twotier_cli::validate::validate;
use twotier_cli::{CliError, Result, RunConfig};

#[derive(Parser)]
#[command(
    name = "twotier",
    version,
    about = "Two-tier macro/femto outage and capacity analysis"
)]
struct Cli {
    /// Run configuration (key = value per line); defaults apply otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials per simulated point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Femtocell placements per analytic point.
    #[arg(long, global = true)]
    configs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit log-normal surrogates to the fading ratios and tabulate densities.
    FitRatios,
    /// Outage against distance for each sweep scenario, analytic and simulated.
    OutageSweep,
    /// Spatial throughput and QoS-limited transmission capacity.
    CapacitySweep,
    /// Run the oracle suite; exits 3 if any check fails.
    Validate,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(c) = cli.configs {
        cfg.configs = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    match cli.command {
        Command::FitRatios => {
            let out = fit_ratios(&cfg)?;
            for f in &out.fits {
                println!("{}: m = {}, s = {}", f.kind, sig9(f.fitted.m), sig9(f.fitted.s));
            }
            for p in &out.files {
                println!("wrote {}", p.display());
            }
        }
        Command::OutageSweep => {
            let rows = outage_sweep(&cfg)?;
            let worst = rows
                .iter()
                .map(|r| (r.analytic_q - r.simulated_q).abs())
                .fold(0.0, f64::max);
            println!("{} rows, largest analytic/simulated gap {}", rows.len(), sig9(worst));
            println!("wrote {}", cfg.output.join("outage_sweep.csv").display());
        }
        Command::CapacitySweep => {
            let s = capacity_sweep(&cfg)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            for (eps, l) in &s.optimal {
                match l {
                    Some(l) => println!(
                        "eps_macro {}: optimal {} femtocells per macrocell",
                        sig9(*eps),
                        sig9(l * s.curves.area_m2)
                    ),
                    None => println!("eps_macro {}: infeasible", sig9(*eps)),
                }
            }
            println!("wrote {}", cfg.output.join("capacity_sweep.csv").display());
        }
        Command::Validate => {
            let report = validate(&cfg)?;
            print!("{}", report.render());
            if report.failures() > 0 {
                return Err(CliError::Validation(report.failures()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
