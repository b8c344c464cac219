//! Run plans: presets for each figure, execution into an output directory,
//! and the manifest that lets a run be repeated exactly.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{default_slope_bounds, fit_rabi_calibration, fit_saturating_exponential, power_law_exponent, CalibrationMap, FitResult, PowerLaw};
use crate::config::{ProtocolSection, RunConfig, SweepSpec};
use crate::dressed::{detuning_profile, dressed_potentials};
use crate::error::{Error, Result};
use crate::io;
use crate::phys::Scheme;
use crate::protocols::{run_continuous, run_pulse_calibration, ContinuousRun, ProtocolKind, ProtocolSpec, PulseSimulator, RunOptions, ShutdownCurve};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "OUTCOUPLER_SIM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1Dressed,
    Fig2Carpet,
    Fig3Zeeman14ms,
    Fig5Compare3ms,
    Calibration,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig1Dressed,
        Preset::Fig2Carpet,
        Preset::Fig3Zeeman14ms,
        Preset::Fig5Compare3ms,
        Preset::Calibration,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1Dressed => "fig1_dressed",
            Preset::Fig2Carpet => "fig2_carpet",
            Preset::Fig3Zeeman14ms => "fig3_zeeman14ms",
            Preset::Fig5Compare3ms => "fig5_compare3ms",
            Preset::Calibration => "calibration",
            Preset::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let short = |p: &Preset| p.name().split('_').next() == Some(name);
        Self::ALL.into_iter().find(|p| p.name() == name || short(p)).ok_or_else(|| {
            Error::Config(vec![crate::error::Violation::new(
                "preset",
                name,
                format!("unknown preset; expected one of {}", Self::ALL.map(|p| p.name()).join(", ")),
            )])
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub figure: &'static str,
    pub description: &'static str,
}

pub fn list_presets() -> Vec<PresetInfo> {
    Preset::ALL
        .into_iter()
        .map(|p| {
            let (figure, description) = match p {
                Preset::Fig1Dressed => ("Fig. 1", "dressed and bare potentials around the sag for a two-level coupling"),
                Preset::Fig2Carpet => ("Fig. 2(b)", "integrated density after 14 ms Zeeman-Raman outcoupling against Ω₀"),
                Preset::Fig3Zeeman14ms => ("Fig. 3", "Zeeman-Raman shutdown curve, 14 ms on, 5 ms hold, 2 ms flight, with fit"),
                Preset::Fig5Compare3ms => ("Fig. 5", "rf versus two-state Raman shutdown curves, 3 ms on, with fits and r ratio"),
                Preset::Calibration => ("Fig. 2(a)", "100 µs pulse Rabi flopping against drive and the fitted drive slope"),
                Preset::Custom => ("any", "run the protocol given in --config"),
            };
            PresetInfo {
                name: p.name(),
                figure,
                description,
            }
        })
        .collect()
}

/// One unit of work, fully specified so that a manifest can replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Dressed {
        config: RunConfig,
        z_min: f64,
        z_max: f64,
        points: usize,
    },
    Calibrate {
        config: RunConfig,
        /// Recover the drive slope by fitting the solver to the pulses.
        fit: bool,
    },
    Sweep {
        config: RunConfig,
        /// Fit a saturating exponential to the curve.
        fit: bool,
    },
}

impl Task {
    fn config(&self) -> &RunConfig {
        match self {
            Task::Dressed { config, .. } | Task::Calibrate { config, .. } | Task::Sweep { config, .. } => config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub preset: Preset,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: usize,
    pub refine: bool,
}

impl RunPlan {
    pub fn new(preset: Preset, out: impl Into<PathBuf>) -> Self {
        Self {
            preset,
            config: None,
            out: out.into(),
            workers: default_workers(),
            refine: false,
        }
    }

    /// Tasks this plan runs. A `--config` replaces the standard defaults of a
    /// preset (its protocol section still applies for `custom`).
    pub fn tasks(&self) -> Result<Vec<Task>> {
        let user = match &self.config {
            Some(p) => Some(RunConfig::load(p)?),
            None => None,
        };
        let sweep = |scheme: Scheme, protocol: ProtocolSpec| RunConfig::standard(scheme, section(&protocol));
        let tasks = match self.preset {
            Preset::Fig1Dressed => {
                let mut config = user.unwrap_or_else(|| sweep(Scheme::RamanTwoState, ProtocolSpec::compare3ms(Scheme::RamanTwoState)));
                if config.coupling.rabi_omega == 0.0 {
                    config.coupling.rabi_omega = 2.0 * PI * 500.0;
                }
                vec![Task::Dressed {
                    config,
                    z_min: -40e-6,
                    z_max: 40e-6,
                    points: 801,
                }]
            }
            Preset::Fig2Carpet => {
                let p = ProtocolSpec::zeeman14ms().with_sweep(crate::protocols::log_sweep(100.0, 3000.0, 10));
                vec![Task::Sweep {
                    config: user.unwrap_or_else(|| sweep(Scheme::RamanThreeState, p)),
                    fit: false,
                }]
            }
            Preset::Fig3Zeeman14ms => vec![Task::Sweep {
                config: user.unwrap_or_else(|| sweep(Scheme::RamanThreeState, ProtocolSpec::zeeman14ms())),
                fit: true,
            }],
            Preset::Fig5Compare3ms => match user {
                Some(c) => vec![Task::Sweep { config: c, fit: true }],
                None => [Scheme::RfThreeState, Scheme::RamanTwoState]
                    .into_iter()
                    .map(|s| Task::Sweep {
                        config: sweep(s, ProtocolSpec::compare3ms(s)),
                        fit: true,
                    })
                    .collect(),
            },
            Preset::Calibration => {
                let drives: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
                let p = ProtocolSpec::calibration(drives, 2000.0);
                vec![Task::Calibrate {
                    config: user.unwrap_or_else(|| sweep(Scheme::RamanThreeState, p)),
                    fit: true,
                }]
            }
            Preset::Custom => {
                let Some(config) = user else {
                    return Err(Error::Config(vec![crate::error::Violation::new(
                        "config",
                        "missing",
                        "the custom preset needs --config",
                    )]));
                };
                match config.protocol.kind {
                    ProtocolKind::PulseCalibration => vec![Task::Calibrate { config, fit: true }],
                    ProtocolKind::ContinuousOutcoupling => vec![Task::Sweep { config, fit: true }],
                }
            }
        };
        Ok(tasks)
    }
}

fn section(p: &ProtocolSpec) -> ProtocolSection {
    ProtocolSection {
        kind: p.kind,
        coupling_on: p.coupling_on,
        post_evolve: p.post_evolve,
        expansion: p.expansion,
        sweep: SweepSpec::Values(p.sweep.clone()),
        drive_slope: p.drive_slope,
    }
}

/// Available parallelism, overridden by [`THREADS_ENV`].
pub fn default_workers() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub preset: Preset,
    /// Seconds since the Unix epoch; the only field that changes between
    /// identical runs.
    pub created_unix: u64,
    pub workers: usize,
    pub refine: bool,
    pub tasks: Vec<Task>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub points: usize,
    pub failures: usize,
    pub plateau: f64,
    pub fit: Option<FitResult>,
    pub power_law: Option<PowerLaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schemes: Vec<SchemeSummary>,
    pub calibration: Option<CalibrationMap>,
    /// r(Raman) / r(rf) when both were fitted.
    pub r_ratio: Option<f64>,
    pub outputs: Vec<String>,
    /// All sweep points and fits succeeded.
    pub success: bool,
    pub problems: Vec<String>,
}

/// Error report written instead of outputs when a plan fails validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub violations: Vec<crate::error::Violation>,
}

pub fn execute(plan: &RunPlan) -> Result<RunReport> {
    let tasks = match plan.tasks() {
        Ok(t) => t,
        Err(e) => return Err(fail(&plan.out, e)),
    };
    execute_tasks(plan.preset, &tasks, &plan.out, plan.workers, plan.refine)
}

/// Repeat a run from its manifest alone.
pub fn rerun(manifest_path: &Path, out: &Path) -> Result<RunReport> {
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    execute_tasks(m.preset, &m.tasks, out, m.workers, m.refine)
}

fn fail(out: &Path, e: Error) -> Error {
    let report = ErrorReport {
        error: e.to_string(),
        violations: e.violations().to_vec(),
    };
    if std::fs::create_dir_all(out).is_ok() {
        let _ = io::write_json(&out.join("error.json"), &report);
    }
    e
}

const SNAPSHOT_POINTS: usize = 3;

pub fn execute_tasks(preset: Preset, tasks: &[Task], out: &Path, workers: usize, refine: bool) -> Result<RunReport> {
    // validate everything before writing anything
    let mut resolved = Vec::new();
    let mut v = Vec::new();
    for (i, t) in tasks.iter().enumerate() {
        match t.config().resolve() {
            Ok(r) => resolved.push(r),
            Err(e) => match e {
                Error::Config(list) => v.extend(list.into_iter().map(|mut x| {
                    x.field = format!("tasks[{i}].{}", x.field);
                    x
                })),
                other => return Err(fail(out, other)),
            },
        }
        if let Task::Dressed { z_min, z_max, points, .. } = t {
            if !(z_max > z_min) || *points < 2 {
                v.push(crate::error::Violation::new(format!("tasks[{i}].z_max"), z_max, "need z_max > z_min and >= 2 points"));
            }
        }
    }
    if !v.is_empty() {
        return Err(fail(out, Error::Config(v)));
    }
    if let Err(e) = std::fs::create_dir_all(out) {
        return Err(Error::Io(e));
    }
    let _ = std::fs::remove_file(out.join("error.json"));

    let mut outputs: Vec<String> = Vec::new();
    let mut problems = Vec::new();
    let mut runs: Vec<(ContinuousRun, bool)> = Vec::new();
    let mut calibration = None;
    for (task, r) in tasks.iter().zip(&resolved) {
        let exp = &r.experiment;
        match task {
            Task::Dressed { z_min, z_max, points, .. } => {
                let s = &exp.setup;
                let profile = detuning_profile(&s.constants, &s.trap, &s.species, exp.coupling.detuning_delta);
                let system = dressed_potentials(&profile, exp.coupling.rabi_omega)?;
                let z: Vec<f64> = (0..*points).map(|i| z_min + (z_max - z_min) * i as f64 / (*points - 1) as f64).collect();
                io::write_dressed_csv(&out.join("dressed.csv"), &system, &z)?;
                outputs.push("dressed.csv".into());
            }
            Task::Calibrate { fit, .. } => {
                let points = run_pulse_calibration(exp, &r.protocol, workers)?;
                let labels: Vec<&str> = crate::gpe::components_for(exp.scheme()).iter().map(|c| c.label.name()).collect();
                io::write_calibration_csv(&out.join("calibration.csv"), &points, &labels)?;
                outputs.push("calibration.csv".into());
                if *fit {
                    let sim = PulseSimulator::new(exp, r.protocol.coupling_on)?;
                    let data: Vec<(f64, f64)> = points.iter().map(|p| (p.drive, p.transferred)).collect();
                    let max_drive = data.iter().map(|d| d.0).fold(0.0, f64::max);
                    match fit_rabi_calibration(&data, default_slope_bounds(sim.pulse(), max_drive), |w| sim.transferred(w)) {
                        Ok(map) => {
                            io::write_json(&out.join("calibration_fit.json"), &map)?;
                            outputs.push("calibration_fit.json".into());
                            calibration = Some(map);
                        }
                        Err(e) => problems.push(format!("calibration fit: {e}")),
                    }
                }
            }
            Task::Sweep { fit, .. } => {
                let options = RunOptions {
                    workers,
                    refine,
                    keep_snapshots: true,
                    ..RunOptions::default()
                };
                let mut run = run_continuous(exp, &r.protocol, &options)?;
                for f in &run.failures {
                    problems.push(format!("{} point {} (Ω₀ = {} Hz): {}", run.scheme, f.index, f.omega0, f.error));
                }
                let dir = out.join("snapshots");
                std::fs::create_dir_all(&dir)?;
                let n = run.points.len();
                let keep: Vec<usize> = if n <= SNAPSHOT_POINTS { (0..n).collect() } else { vec![0, n / 2, n - 1] };
                for (k, p) in run.points.iter_mut().enumerate() {
                    let Some(snap) = p.snapshot.take() else { continue };
                    if !keep.contains(&k) {
                        continue;
                    }
                    let name = format!("snapshots/{}_{:02}.json", run.scheme.label(), p.index);
                    #[derive(Serialize)]
                    struct Meta<'a> {
                        scheme: Scheme,
                        omega0_hz: f64,
                        rabi_omega: f64,
                        protocol: &'a ProtocolSpec,
                        grid: crate::gpe::Grid,
                        regions: &'a crate::protocols::RegionClassification,
                    }
                    let meta = Meta {
                        scheme: run.scheme,
                        omega0_hz: p.omega0,
                        rabi_omega: p.rabi_omega,
                        protocol: &r.protocol,
                        grid: exp.setup.grid,
                        regions: &p.regions,
                    };
                    io::write_snapshot_json(&out.join(&name), &meta, &snap)?;
                    outputs.push(name);
                }
                runs.push((run, *fit));
            }
        }
    }

    let mut schemes = Vec::new();
    if !runs.is_empty() {
        let curves: Vec<&ShutdownCurve> = runs.iter().map(|(r, _)| &r.curve).collect();
        io::write_curves_csv(&out.join("curve.csv"), &curves)?;
        let run_refs: Vec<&ContinuousRun> = runs.iter().map(|(r, _)| r).collect();
        io::write_carpet_csv(&out.join("carpet.csv"), &run_refs)?;
        io::write_json(&out.join("points.json"), &run_refs.iter().map(|r| &r.points).collect::<Vec<_>>())?;
        outputs.extend(["curve.csv".to_string(), "carpet.csv".into(), "points.json".into()]);
        let mut fits = Vec::new();
        for (run, fit) in &runs {
            let c = &run.curve;
            let f = if *fit {
                match fit_saturating_exponential(&c.omega0(), &c.fractions(), None) {
                    Ok(f) => {
                        if !f.converged {
                            problems.push(format!("{} fit did not converge", run.scheme));
                        }
                        Some(f)
                    }
                    Err(e) => {
                        problems.push(format!("{} fit: {e}", run.scheme));
                        None
                    }
                }
            } else {
                None
            };
            let plateau = f.as_ref().filter(|f| f.converged).map_or(c.plateau(3), |f| f.a);
            let power_law = power_law_exponent(&c.omega0(), &c.fractions(), coupling_on(tasks, run.scheme), plateau).ok();
            schemes.push(SchemeSummary {
                scheme: run.scheme,
                points: c.points.len(),
                failures: run.failures.len(),
                plateau: c.plateau(3),
                fit: f.clone(),
                power_law,
            });
            if let Some(f) = f {
                fits.push((c, f));
            }
        }
        if !fits.is_empty() {
            #[derive(Serialize)]
            struct FitEntry<'a> {
                scheme: Scheme,
                fit: &'a FitResult,
            }
            let entries: Vec<FitEntry> = fits.iter().map(|(c, f)| FitEntry { scheme: c.scheme, fit: f }).collect();
            io::write_json(&out.join("fit.json"), &entries)?;
            let pairs: Vec<_> = fits.iter().map(|(c, f)| (*c, f)).collect();
            io::write_residuals_csv(&out.join("residuals.csv"), &pairs)?;
            outputs.extend(["fit.json".to_string(), "residuals.csv".into()]);
        }
    }

    let r_of = |s: Scheme| schemes.iter().find(|x| x.scheme == s).and_then(|x| x.fit.as_ref()).filter(|f| f.converged).map(|f| f.r);
    let r_rf = r_of(Scheme::RfThreeState);
    let r_raman = r_of(Scheme::RamanTwoState).or(r_of(Scheme::RamanThreeState));
    let r_ratio = r_rf.zip(r_raman).map(|(a, b)| b / a);

    outputs.push("summary.txt".into());
    std::fs::write(out.join("summary.txt"), summary_text(&schemes, calibration.as_ref(), r_ratio))?;
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        preset,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        workers,
        refine,
        tasks: tasks.to_vec(),
        outputs: outputs.clone(),
    };
    io::write_json(&out.join("manifest.json"), &manifest)?;
    Ok(RunReport {
        success: problems.is_empty(),
        schemes,
        calibration,
        r_ratio,
        outputs,
        problems,
    })
}

fn coupling_on(tasks: &[Task], scheme: Scheme) -> f64 {
    tasks
        .iter()
        .filter_map(|t| match t {
            Task::Sweep { config, .. } if config.coupling.scheme == scheme => Some(config.protocol.coupling_on),
            _ => None,
        })
        .next()
        .unwrap_or(1.0)
}

fn summary_text(schemes: &[SchemeSummary], calibration: Option<&CalibrationMap>, r_ratio: Option<f64>) -> String {
    let mut s = String::new();
    for x in schemes {
        let _ = writeln!(s, "[{}] points {} failures {}", x.scheme, x.points, x.failures);
        let _ = writeln!(s, "  plateau fraction (top 3 points): {:.4}", x.plateau);
        match &x.fit {
            Some(f) => {
                let e = f.stderr();
                let _ = writeln!(
                    s,
                    "  fit A = {:.4} ± {:.4}, x0 = {:.1} ± {:.1} Hz, r = {:.1} ± {:.1} Hz, converged {}",
                    f.a, e[0], f.x0, e[1], f.r, e[2], f.converged
                );
                let _ = writeln!(s, "  onset x0 + r = {:.1} Hz", f.knee());
            }
            None => {
                let _ = writeln!(s, "  no fit");
            }
        }
        match &x.power_law {
            Some(p) => {
                let _ = writeln!(s, "  weak-regime exponent {:.3} ± {:.3} ({} points)", p.exponent, p.stderr, p.n_points);
            }
            None => {
                let _ = writeln!(s, "  weak-regime exponent: too few points below 0.1 x plateau");
            }
        }
    }
    if let Some(r) = r_ratio {
        let _ = writeln!(s, "r ratio (Raman / rf) = {r:.3}; squared = {:.3} (golden-rule flux ratio)", r * r);
    }
    if let Some(c) = calibration {
        let _ = writeln!(s, "calibration slope = {} Hz per drive unit, misfit {:e}", c.slope, c.goodness);
    }
    s
}
