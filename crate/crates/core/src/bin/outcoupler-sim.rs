use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use outcoupler::cli::{self, Preset, RunPlan, Task};
use outcoupler::error::Result;
use outcoupler::phys::Scheme;

#[derive(Parser)]
#[command(name = "outcoupler-sim", version, about = "Atom-laser outcoupling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Parallel sweep workers (OUTCOUPLER_SIM_THREADS overrides the default).
    #[arg(long)]
    workers: Option<usize>,
    /// Repeat every point at dz/2, dt/2 and report the shift.
    #[arg(long)]
    refine: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset (or `custom` with --config).
    Run {
        #[arg(long)]
        preset: String,
        #[command(flatten)]
        common: Common,
    },
    /// Dressed and bare potentials as CSV.
    Dressed {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -40e-6, allow_negative_numbers = true)]
        z_min: f64,
        #[arg(long, default_value_t = 40e-6, allow_negative_numbers = true)]
        z_max: f64,
        #[arg(long, default_value_t = 801)]
        points: usize,
    },
    /// 100 µs pulse calibration and drive-slope fit.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Continuous outcoupling sweep (defaults to the 3 ms comparison).
    Sweep {
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit saturating exponentials to a curve.csv.
    Fit {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Repeat a run from its manifest.json.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List presets and the figure each one reproduces.
    Presets,
}

fn plan(preset: Preset, c: &Common) -> RunPlan {
    let mut p = RunPlan::new(preset, &c.out);
    p.config = c.config.clone();
    p.refine = c.refine;
    if let Some(w) = c.workers {
        if std::env::var(cli::THREADS_ENV).is_err() {
            p.workers = w.max(1);
        }
    }
    p
}

fn report(r: Result<cli::RunReport>) -> ExitCode {
    match r {
        Ok(rep) => {
            for p in &rep.problems {
                eprintln!("warning: {p}");
            }
            println!("{}", serde_json::json!({ "success": rep.success, "outputs": rep.outputs, "r_ratio": rep.r_ratio }));
            if rep.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            let violations = e.violations();
            eprintln!("{}", serde_json::json!({ "error": e.to_string(), "violations": violations }));
            ExitCode::FAILURE
        }
    }
}

fn fit_only(curve: &PathBuf, out: &PathBuf) -> Result<cli::RunReport> {
    let curves = outcoupler::io::read_curves_csv(curve, Scheme::RfThreeState)?;
    std::fs::create_dir_all(out)?;
    let mut fits = Vec::new();
    let mut problems = Vec::new();
    for c in &curves {
        match outcoupler::analysis::fit_saturating_exponential(&c.omega0(), &c.fractions(), None) {
            Ok(f) => {
                if !f.converged {
                    problems.push(format!("{} fit did not converge", c.scheme));
                }
                fits.push((c, f));
            }
            Err(e) => problems.push(format!("{}: {e}", c.scheme)),
        }
    }
    let entries: Vec<_> = fits.iter().map(|(c, f)| serde_json::json!({ "scheme": c.scheme, "fit": f })).collect();
    outcoupler::io::write_json(&out.join("fit.json"), &entries)?;
    let pairs: Vec<_> = fits.iter().map(|(c, f)| (*c, f)).collect();
    outcoupler::io::write_residuals_csv(&out.join("residuals.csv"), &pairs)?;
    Ok(cli::RunReport {
        schemes: Vec::new(),
        calibration: None,
        r_ratio: None,
        outputs: vec!["fit.json".into(), "residuals.csv".into()],
        success: problems.is_empty() && !fits.is_empty(),
        problems,
    })
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = match args.command {
        Command::Presets => {
            for p in cli::list_presets() {
                println!("{:<16} {:<10} {}", p.name, p.figure, p.description);
            }
            return ExitCode::SUCCESS;
        }
        Command::Run { preset, common } => Preset::from_name(&preset).and_then(|p| cli::execute(&plan(p, &common))),
        Command::Sweep { preset, common } => {
            let p = match (&preset, &common.config) {
                (Some(name), _) => Preset::from_name(name),
                (None, Some(_)) => Ok(Preset::Custom),
                (None, None) => Ok(Preset::Fig5Compare3ms),
            };
            p.and_then(|p| cli::execute(&plan(p, &common)))
        }
        Command::Calibrate { common } => cli::execute(&plan(Preset::Calibration, &common)),
        Command::Dressed {
            common,
            z_min,
            z_max,
            points,
        } => {
            let p = plan(Preset::Fig1Dressed, &common);
            p.tasks().and_then(|tasks| {
                let tasks: Vec<Task> = tasks
                    .into_iter()
                    .map(|t| match t {
                        Task::Dressed { config, .. } => Task::Dressed {
                            config,
                            z_min,
                            z_max,
                            points,
                        },
                        other => other,
                    })
                    .collect();
                cli::execute_tasks(Preset::Fig1Dressed, &tasks, &p.out, p.workers, false)
            })
        }
        Command::Fit { curve, out } => fit_only(&curve, &out),
        Command::Rerun { manifest, out } => cli::rerun(&manifest, &out),
    };
    report(result)
}
