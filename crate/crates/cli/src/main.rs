use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emato::scenarios::VehicleKind;
use emato_cli::check::{cmd_check, CheckKind};
use emato_cli::fit::cmd_fit;
use emato_cli::io::{load_config, resolve, Overrides};
use emato_cli::matrix::{cmd_matrix, improvements, MatrixSpec};
use emato_cli::run::{cmd_run, Scenario};
use emato_cli::{acceptance, CliError, CliResult};

#[derive(Parser)]
#[command(name = "emato", version, about = "Fuel-aware trajectory optimization for automated vehicles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit fuel-model coefficients from a synthetic engine map.
    Fit {
        #[arg(long, default_value = "truck")]
        vehicle: VehicleKind,
        /// Engine map spec (JSON or TOML); the built-in spec for the vehicle when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Emit the vehicle's tabulated coefficients without fitting.
        #[arg(long)]
        use_appendix: bool,
        #[arg(long, default_value = "fit.json")]
        out: PathBuf,
    },
    /// Run one scenario: png, acc or frenet.
    Run {
        scenario: Scenario,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a vehicle x slope x algorithm grid.
    Matrix {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "out/matrix")]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Validation suites: gradients, units or quintic.
    Check { kind: CheckKind },
    /// Run the acceptance criteria, one line per criterion.
    Accept,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit { vehicle, spec, use_appendix, out } => {
            let spec = spec.map(|p| resolve(&p)).transpose()?;
            let fit = cmd_fit(vehicle, spec.as_deref(), use_appendix, &out)?;
            match fit.holdout_accuracy {
                Some(a) => println!(
                    "{} fit from {}: holdout accuracy {a:.2}% ({} train / {} test cells)",
                    fit.vehicle, fit.source, fit.n_train, fit.n_test
                ),
                None => println!("{} coefficients from the {} table", fit.vehicle, fit.source),
            }
            println!("wrote {}", out.display());
        }
        Command::Run { scenario, overrides, out } => {
            let loaded = load_config(scenario.name(), &overrides)?;
            for r in cmd_run(scenario, &loaded, &out)? {
                let m = &r.metrics;
                println!(
                    "{:<16} {:>10.3} mL {:>9.1} m {:>8.3} mpg {:>7.2} m/s  {} events",
                    r.algorithm,
                    m.fuel_ml,
                    m.distance,
                    m.mpg,
                    m.avg_speed,
                    r.events.len()
                );
                if let Some(t) = r.mean_solve_time() {
                    println!("{:<16} mean solve {:.2} ms over {} solves", "", t * 1e3, r.solve_times.len());
                }
            }
            println!("wrote {}", out.display());
        }
        Command::Matrix { spec, out, jobs } => {
            let path = resolve(&spec)?;
            let spec = MatrixSpec::load(&path)?;
            let cells = cmd_matrix(&spec, Some(&path), &out, jobs)?;
            let failed = cells.iter().filter(|c| c.error.is_some()).count();
            let (headers, rows) = improvements(&cells);
            println!("vehicle/slope    {}", headers.join("  "));
            for (v, s, gains) in rows {
                let g: Vec<String> = gains.iter().map(|x| x.map_or("-".into(), |x| format!("{x:+.2}%"))).collect();
                println!("{:<16} {}", format!("{v}/{s}"), g.join("  "));
            }
            println!("{} cells, {failed} failed; wrote {}", cells.len(), out.display());
        }
        Command::Check { kind } => {
            let r = cmd_check(kind)?;
            println!(
                "{} {}: {} cases, worst {:.3e} (threshold {:.0e})",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.cases,
                r.worst,
                r.threshold
            );
            if !r.passed {
                return Err(CliError::Runtime(format!("{} check failed", r.name)));
            }
        }
        Command::Accept => {
            let verdicts = acceptance::run_all(|v| println!("{v}"));
            let failed = verdicts.iter().filter(|v| !v.passed).count();
            println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
            if failed > 0 {
                return Err(CliError::Runtime(format!("{failed} acceptance criteria failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
