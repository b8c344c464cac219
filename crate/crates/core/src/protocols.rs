//! Scripted in-silico experiments: 100 µs pulse calibration, continuous
//! outcoupling sweeps, and region-based accounting of the expanded cloud.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed::{gravitational_sag, momentum_kick, rabi_from_oscillation, resonant_detuning, KickGeometry};
use crate::error::{Error, Result, Violation};
use crate::gpe::{ComponentLabel, Engine, FieldState, GroundStateReport, SimSetup, Snapshot};
use crate::phys::{CouplingConfig, Scheme};

/// Pulse length used for Rabi calibration, s.
pub const CALIBRATION_PULSE: f64 = 100e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    PulseCalibration,
    ContinuousOutcoupling,
}

/// Durations of one outcoupling sequence and the values it is swept over:
/// Ω₀ in Hz for continuous runs, drive amplitudes for calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    /// s
    pub coupling_on: f64,
    /// Trap on, coupling off, s.
    #[serde(default)]
    pub post_evolve: f64,
    /// Trap off, s.
    #[serde(default)]
    pub expansion: f64,
    pub sweep: Vec<f64>,
    /// Ω/2π per drive unit, Hz. Only used by calibration runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_slope: Option<f64>,
}

/// `n` logarithmically spaced values from `start` to `stop` inclusive.
pub fn log_sweep(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let ratio = (stop / start).ln();
    (0..n)
        .map(|i| {
            if i + 1 == n {
                stop
            } else {
                start * (ratio * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// 20 points from 50 Hz to 5 kHz.
pub fn default_sweep() -> Vec<f64> {
    log_sweep(50.0, 5000.0, 20)
}

impl ProtocolSpec {
    /// Zeeman-Raman shutdown sequence: 14 ms on, 5 ms in the trap, 2 ms flight.
    pub fn zeeman14ms() -> Self {
        Self {
            kind: ProtocolKind::ContinuousOutcoupling,
            coupling_on: 14e-3,
            post_evolve: 5e-3,
            expansion: 2e-3,
            sweep: default_sweep(),
            drive_slope: None,
        }
    }

    /// rf versus Raman comparison: 3 ms on, then 0.8 ms (rf) or 3.5 ms
    /// (Raman) in the trap, then 4.5 ms flight.
    pub fn compare3ms(scheme: Scheme) -> Self {
        Self {
            kind: ProtocolKind::ContinuousOutcoupling,
            coupling_on: 3e-3,
            post_evolve: if scheme.is_raman() { 3.5e-3 } else { 0.8e-3 },
            expansion: 4.5e-3,
            sweep: default_sweep(),
            drive_slope: None,
        }
    }

    /// 100 µs pulses at the given drive levels.
    pub fn calibration(drives: Vec<f64>, drive_slope: f64) -> Self {
        Self {
            kind: ProtocolKind::PulseCalibration,
            coupling_on: CALIBRATION_PULSE,
            post_evolve: 0.0,
            expansion: 0.0,
            sweep: drives,
            drive_slope: Some(drive_slope),
        }
    }

    pub fn with_sweep(mut self, sweep: Vec<f64>) -> Self {
        self.sweep = sweep;
        self
    }

    pub fn total_duration(&self) -> f64 {
        self.coupling_on + self.post_evolve + self.expansion
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        for (name, d) in [
            ("protocol.coupling_on", self.coupling_on),
            ("protocol.post_evolve", self.post_evolve),
            ("protocol.expansion", self.expansion),
        ] {
            if !(d >= 0.0 && d.is_finite()) {
                v.push(Violation::new(name, d, "durations must be >= 0"));
            }
        }
        if self.sweep.is_empty() {
            v.push(Violation::new("protocol.sweep", "[]", "sweep must not be empty"));
        }
        if let Some(i) = self.sweep.iter().position(|x| !x.is_finite() || *x < 0.0) {
            v.push(Violation::new(format!("protocol.sweep[{i}]"), self.sweep[i], "must be finite and >= 0"));
        }
        if let Some(i) = self.sweep.windows(2).position(|w| !(w[1] > w[0])) {
            v.push(Violation::new(
                format!("protocol.sweep[{}]", i + 1),
                self.sweep[i + 1],
                format!("sweep must be strictly increasing (previous {})", self.sweep[i]),
            ));
        }
        match (self.kind, self.drive_slope) {
            (ProtocolKind::PulseCalibration, None) => {
                v.push(Violation::new("protocol.drive_slope", "missing", "calibration needs a drive slope"))
            }
            (ProtocolKind::PulseCalibration, Some(s)) if !(s > 0.0 && s.is_finite()) => {
                v.push(Violation::new("protocol.drive_slope", s, "must be positive"))
            }
            _ => {}
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

/// Solver setup plus the coupling every sweep point shares (its Rabi
/// frequency is overwritten per point).
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub setup: SimSetup,
    pub coupling: CouplingConfig,
}

impl Experiment {
    /// Standard trap and atom number, coupling on resonance at the condensate
    /// including recoil. Both Raman schemes use the 140° beam geometry.
    pub fn standard(scheme: Scheme) -> Self {
        let setup = SimSetup::standard(scheme);
        let kick = if scheme.is_raman() {
            momentum_kick(&setup.constants, &setup.species, KickGeometry::Angled { theta: 140f64.to_radians() })
                .map(|k| k.gravity_wavenumber)
                .unwrap_or(0.0)
        } else {
            0.0
        };
        let coupling = CouplingConfig {
            scheme,
            rabi_omega: 0.0,
            detuning_delta: resonant_detuning(&setup.constants, &setup.trap, &setup.species, kick),
            kick_wavenumber: kick,
            one_photon: None,
        };
        Self { setup, coupling }
    }

    pub fn scheme(&self) -> Scheme {
        self.setup.scheme
    }

    pub fn check(&self) -> Result<()> {
        let mut v = Vec::new();
        self.setup.constants.check(&mut v);
        self.setup.species.check(&mut v);
        if self.coupling.scheme != self.setup.scheme {
            v.push(Violation::new(
                "coupling.scheme",
                self.coupling.scheme,
                format!("does not match the solver scheme {}", self.setup.scheme),
            ));
        }
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        crate::phys::validate_config(&self.setup.trap, &self.coupling, &self.setup.interactions).map(|_| ())
    }
}

/// Atom fractions in the three regions of the expanded cloud.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RegionTally {
    pub trapped: f64,
    pub untrapped: f64,
    pub antitrapped: f64,
}

impl RegionTally {
    pub fn sum(&self) -> f64 {
        self.trapped + self.untrapped + self.antitrapped
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.trapped - other.trapped)
            .abs()
            .max((self.untrapped - other.untrapped).abs())
            .max((self.antitrapped - other.antitrapped).abs())
    }

    fn add(&mut self, label: ComponentLabel, x: f64) {
        match label {
            ComponentLabel::Trapped => self.trapped += x,
            ComponentLabel::Untrapped | ComponentLabel::F2Untrapped => self.untrapped += x,
            ComponentLabel::Antitrapped => self.antitrapped += x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionClassification {
    /// Analysis window, m.
    pub window: (f64, f64),
    /// Anti-trapped/untrapped and untrapped/trapped boundaries, m, ascending.
    pub boundaries: (f64, f64),
    /// Integrated density per region plus absorbed norm by component.
    pub regions: RegionTally,
    /// Ground truth from the component labels.
    pub components: RegionTally,
    /// Largest per-region difference between the two tallies.
    pub discrepancy: f64,
    pub warnings: Vec<String>,
}

/// Ballistic picture of a sequence, used to place region boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kinematics {
    pub g: f64,
    pub omega_z: f64,
    /// Condensate centre before release, m.
    pub sag: f64,
    /// Trapped-cloud radius before release, m.
    pub cloud_radius: f64,
    /// Velocity along gravity given to outcoupled atoms, m/s.
    pub kick_velocity: f64,
    pub coupling_on: f64,
    pub post_evolve: f64,
    pub expansion: f64,
}

impl Kinematics {
    pub fn new(engine: &Engine, coupling: &CouplingConfig, protocol: &ProtocolSpec) -> Self {
        let s = engine.setup();
        Self {
            g: s.constants.g_grav,
            omega_z: s.trap.omega_z,
            sag: gravitational_sag(&s.constants, &s.trap),
            cloud_radius: engine.cloud_radius(),
            kick_velocity: s.constants.hbar * coupling.kick_wavenumber / s.species.mass,
            coupling_on: protocol.coupling_on,
            post_evolve: protocol.post_evolve,
            expansion: protocol.expansion,
        }
    }

    /// Scale factor of a 1D Thomas-Fermi cloud released from the trap,
    /// `b'' = ω²/b²`, integrated with RK4.
    pub fn expansion_scale(&self) -> f64 {
        let steps = 2000;
        let h = self.expansion / steps as f64;
        let w2 = self.omega_z * self.omega_z;
        let f = |b: f64, v: f64| (v, w2 / (b * b));
        let (mut b, mut v) = (1.0, 0.0);
        for _ in 0..steps {
            let (k1b, k1v) = f(b, v);
            let (k2b, k2v) = f(b + 0.5 * h * k1b, v + 0.5 * h * k1v);
            let (k3b, k3v) = f(b + 0.5 * h * k2b, v + 0.5 * h * k2v);
            let (k4b, k4v) = f(b + h * k3b, v + h * k3v);
            b += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        b
    }

    fn fallen(&self, tau: f64) -> f64 {
        self.kick_velocity * tau + 0.5 * self.g * tau * tau
    }

    /// Lower and upper edge of the trapped cloud at the end.
    pub fn trapped_envelope(&self) -> (f64, f64) {
        let centre = self.sag - 0.5 * self.g * self.expansion * self.expansion;
        let r = self.cloud_radius * self.expansion_scale();
        (centre - r, centre + r)
    }

    /// Lower and upper edge of the beam: atoms leaving during the whole
    /// coupling window, then falling freely.
    pub fn untrapped_envelope(&self) -> (f64, f64) {
        let total = self.coupling_on + self.post_evolve + self.expansion;
        let last = self.post_evolve + self.expansion;
        let r = self.cloud_radius;
        (self.sag - r - self.fallen(total), self.sag + r - self.fallen(last))
    }

    /// Highest point reached by anti-trapped atoms created at switch-off.
    pub fn antitrapped_top(&self) -> f64 {
        // z'' = ω²z − g from the cloud's top edge at rest
        let fixed = self.g / (self.omega_z * self.omega_z);
        let start = self.sag + self.cloud_radius;
        let wt = self.omega_z * self.post_evolve;
        let z_release = fixed + (start - fixed) * wt.cosh();
        let v_release = (start - fixed) * self.omega_z * wt.sinh();
        z_release + v_release * self.expansion - 0.5 * self.g * self.expansion * self.expansion
    }
}

/// Integrate the expanded snapshot over kinematic regions and compare with
/// the component ledger. `window` excludes the absorbing layers.
pub fn classify_regions(snapshot: &Snapshot, kin: &Kinematics, window: (f64, f64)) -> RegionClassification {
    let mut warnings = Vec::new();
    let (t_lo, _) = kin.trapped_envelope();
    let (u_lo, u_hi) = kin.untrapped_envelope();
    if u_hi > t_lo {
        warnings.push(format!("untrapped envelope top {u_hi:e} m overlaps the trapped cloud edge {t_lo:e} m"));
    }
    let upper = 0.5 * (u_hi + t_lo);
    if kin.antitrapped_top() > u_lo {
        warnings.push(format!(
            "late anti-trapped atoms ({:e} m) may fall inside the untrapped region (bottom {u_lo:e} m)",
            kin.antitrapped_top()
        ));
    }
    let clamp = |z: f64| z.clamp(window.0, window.1);
    let boundaries = (clamp(u_lo), clamp(upper.max(u_lo)));

    let dz = snapshot.dz();
    let mut regions = RegionTally::default();
    let mut components = RegionTally::default();
    for c in &snapshot.components {
        let mut on_grid = 0.0;
        for (z, n) in snapshot.z.iter().zip(&c.density) {
            let x = n * dz;
            on_grid += x;
            if *z < window.0 || *z > window.1 {
                continue;
            }
            if *z < boundaries.0 {
                regions.antitrapped += x;
            } else if *z < boundaries.1 {
                regions.untrapped += x;
            } else {
                regions.trapped += x;
            }
        }
        regions.add(c.label, c.absorbed);
        components.add(c.label, on_grid + c.absorbed);
    }
    RegionClassification {
        window,
        boundaries,
        discrepancy: regions.max_abs_diff(&components),
        regions,
        components,
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Hz
    pub omega0: f64,
    pub fraction: f64,
    /// Grid-refinement shift, when that pass was run.
    pub uncertainty: Option<f64>,
}

/// Outcoupled fraction against Ω₀ for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShutdownCurve {
    pub scheme: Scheme,
    pub points: Vec<CurvePoint>,
}

impl ShutdownCurve {
    pub fn new(scheme: Scheme, points: Vec<CurvePoint>) -> Result<Self> {
        let mut v = Vec::new();
        if let Some(i) = points.windows(2).position(|w| !(w[1].omega0 > w[0].omega0)) {
            v.push(Violation::new(format!("points[{}].omega0", i + 1), points[i + 1].omega0, "must be strictly increasing"));
        }
        if let Some(i) = points.iter().position(|p| !(0.0..=1.0).contains(&p.fraction)) {
            v.push(Violation::new(format!("points[{i}].fraction"), points[i].fraction, "must lie in [0, 1]"));
        }
        if v.is_empty() {
            Ok(Self { scheme, points })
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn omega0(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.omega0).collect()
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.fraction).collect()
    }

    /// Mean fraction over the top `n` sweep points.
    pub fn plateau(&self, n: usize) -> f64 {
        let tail = &self.points[self.points.len().saturating_sub(n)..];
        tail.iter().map(|p| p.fraction).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Options for [`run_continuous`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub workers: usize,
    /// Repeat points at half the spacing in space and time.
    pub refine: bool,
    /// Refine every `refine_stride`-th point (1 = all).
    pub refine_stride: usize,
    pub keep_snapshots: bool,
    /// Grid points per carpet bin.
    pub carpet_bin: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            refine: false,
            refine_stride: 1,
            keep_snapshots: false,
            carpet_bin: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointOutcome {
    pub index: usize,
    /// Hz
    pub omega0: f64,
    /// rad/s
    pub rabi_omega: f64,
    pub fraction: f64,
    pub populations: Vec<f64>,
    pub absorbed: Vec<f64>,
    pub steps: usize,
    /// |on-grid + absorbed − 1| at the end.
    pub ledger_error: f64,
    pub refined_fraction: Option<f64>,
    pub refined_ledger_error: Option<f64>,
    pub regions: RegionClassification,
    /// Integrated density per carpet bin after the full sequence.
    #[serde(skip)]
    pub carpet: Vec<f64>,
    #[serde(skip)]
    pub snapshot: Option<Snapshot>,
}

impl PointOutcome {
    pub fn uncertainty(&self) -> Option<f64> {
        self.refined_fraction.map(|f| (f - self.fraction).abs())
    }

}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub index: usize,
    pub omega0: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousRun {
    pub scheme: Scheme,
    pub curve: ShutdownCurve,
    pub points: Vec<PointOutcome>,
    pub failures: Vec<PointFailure>,
    pub ground: GroundStateReport,
    /// Carpet bin centres, m.
    pub carpet_z: Vec<f64>,
}

/// Analysis window of an engine's grid: everything inside the absorbers.
pub fn analysis_window(engine: &Engine) -> (f64, f64) {
    let g = engine.grid();
    let edge = engine.setup().numerics.absorber_fraction * (g.z_max - g.z_min);
    (g.z_min + edge, g.z_max - edge)
}

/// Ground state → sudden switch-on → coupling_on → switch-off → post_evolve
/// → trap off → expansion.
pub fn run_sequence(engine: &Engine, ground: &FieldState, coupling: &CouplingConfig, protocol: &ProtocolSpec) -> Result<(FieldState, usize)> {
    let mut state = ground.clone();
    let grid = engine.grid();
    let mut steps = 0;
    let stages = [
        (protocol.coupling_on, true, true),
        (protocol.post_evolve, false, true),
        (protocol.expansion, false, false),
    ];
    for (duration, coupling_on, trap_on) in stages {
        if duration == 0.0 {
            continue;
        }
        steps += grid.steps_in(duration)?;
        let mut p = engine.propagator(engine.hamiltonian(coupling, coupling_on, trap_on));
        p.evolve(&mut state, duration, None)?;
    }
    Ok((state, steps))
}

fn carpet(state: &FieldState, bin: usize) -> Vec<f64> {
    let density = state.total_density();
    let dz = state.dz_si();
    density.chunks(bin.max(1)).map(|c| c.iter().sum::<f64>() * dz).collect()
}

fn carpet_z(engine: &Engine, bin: usize) -> Vec<f64> {
    let z = engine.grid().positions();
    z.chunks(bin.max(1)).map(|c| 0.5 * (c[0] + c[c.len() - 1])).collect()
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Sweep Ω₀ over `protocol.sweep`. The ground state is computed once per
/// grid; a failing point is recorded and the sweep carries on. Points are
/// merged in sweep order whatever the worker count.
pub fn run_continuous(experiment: &Experiment, protocol: &ProtocolSpec, options: &RunOptions) -> Result<ContinuousRun> {
    protocol.validate()?;
    experiment.check()?;
    if protocol.kind != ProtocolKind::ContinuousOutcoupling {
        return Err(Error::Config(vec![Violation::new(
            "protocol.kind",
            "pulse_calibration",
            "run_continuous needs a continuous_outcoupling protocol",
        )]));
    }
    let scheme = experiment.scheme();
    let engine = Engine::new(experiment.setup.clone())?;
    let (ground, report) = engine.ground_state()?;
    let fine = if options.refine {
        let e = Engine::new(experiment.setup.refined())?;
        let (g, _) = e.ground_state()?;
        Some((e, g))
    } else {
        None
    };
    let kin = Kinematics::new(&engine, &experiment.coupling, protocol);
    let window = analysis_window(&engine);
    let stride = options.refine_stride.max(1);

    let run_point = |index: usize, omega0: f64| -> Result<PointOutcome> {
        let rabi = rabi_from_oscillation(omega0, scheme);
        let coupling = experiment.coupling.with_rabi_omega(rabi);
        let (state, steps) = run_sequence(&engine, &ground, &coupling, protocol)?;
        let snapshot = state.snapshot();
        let regions = classify_regions(&snapshot, &kin, window);
        let (refined_fraction, refined_ledger_error) = match &fine {
            Some((e, g)) if index % stride == 0 => {
                let (s, _) = run_sequence(e, g, &coupling, protocol)?;
                (Some(s.outcoupled_fraction()), Some((s.total() - 1.0).abs()))
            }
            _ => (None, None),
        };
        Ok(PointOutcome {
            index,
            omega0,
            rabi_omega: rabi,
            fraction: state.outcoupled_fraction(),
            populations: state.populations(),
            absorbed: state.absorbed().to_vec(),
            steps,
            ledger_error: (state.total() - 1.0).abs(),
            refined_fraction,
            refined_ledger_error,
            regions,
            carpet: carpet(&state, options.carpet_bin),
            snapshot: options.keep_snapshots.then_some(snapshot),
        })
    };

    let results: Vec<Result<PointOutcome>> = with_pool(options.workers, || {
        protocol
            .sweep
            .par_iter()
            .enumerate()
            .map(|(i, &w)| run_point(i, w))
            .collect()
    });

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => points.push(p),
            Err(e) => failures.push(PointFailure {
                index: i,
                omega0: protocol.sweep[i],
                error: e.to_string(),
            }),
        }
    }
    let curve = ShutdownCurve::new(
        scheme,
        points
            .iter()
            .map(|p| CurvePoint {
                omega0: p.omega0,
                fraction: p.fraction.clamp(0.0, 1.0),
                uncertainty: p.uncertainty(),
            })
            .collect(),
    )?;
    Ok(ContinuousRun {
        scheme,
        curve,
        points,
        failures,
        ground: report,
        carpet_z: carpet_z(&engine, options.carpet_bin),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub drive: f64,
    /// rad/s
    pub rabi_omega: f64,
    /// Hz
    pub omega0: f64,
    pub populations: Vec<f64>,
    /// Outcoupled (m_F=0 or F=2) fraction.
    pub transferred: f64,
}

/// Applies short coupling pulses to a ground state computed once.
pub struct PulseSimulator {
    engine: Engine,
    ground: FieldState,
    coupling: CouplingConfig,
    pulse: f64,
}

impl PulseSimulator {
    pub fn new(experiment: &Experiment, pulse: f64) -> Result<Self> {
        experiment.check()?;
        let engine = Engine::new(experiment.setup.clone())?;
        engine.grid().steps_in(pulse)?;
        let (ground, _) = engine.ground_state()?;
        Ok(Self {
            engine,
            ground,
            coupling: experiment.coupling,
            pulse,
        })
    }

    pub fn pulse(&self) -> f64 {
        self.pulse
    }

    /// Populations after one pulse at Rabi frequency `omega` (rad/s).
    pub fn populations(&self, omega: f64) -> Result<FieldState> {
        let mut state = self.ground.clone();
        let c = self.coupling.with_rabi_omega(omega);
        let mut p = self.engine.propagator(self.engine.hamiltonian(&c, true, true));
        p.evolve(&mut state, self.pulse, None)?;
        Ok(state)
    }

    pub fn transferred(&self, omega: f64) -> Result<f64> {
        Ok(self.populations(omega)?.outcoupled_fraction())
    }
}

/// Pulse at each drive level with Ω/2π = `drive_slope`·drive and report the
/// resulting fractions.
pub fn run_pulse_calibration(experiment: &Experiment, protocol: &ProtocolSpec, workers: usize) -> Result<Vec<CalibrationPoint>> {
    protocol.validate()?;
    let slope = protocol.drive_slope.unwrap_or(0.0);
    let sim = PulseSimulator::new(experiment, protocol.coupling_on)?;
    let scheme = experiment.scheme();
    with_pool(workers, || {
        protocol
            .sweep
            .par_iter()
            .map(|&drive| {
                let rabi = 2.0 * std::f64::consts::PI * slope * drive;
                let state = sim.populations(rabi)?;
                Ok(CalibrationPoint {
                    drive,
                    rabi_omega: rabi,
                    omega0: crate::dressed::oscillation_frequency(rabi, scheme),
                    populations: state.populations(),
                    transferred: state.outcoupled_fraction(),
                })
            })
            .collect()
    })
}
