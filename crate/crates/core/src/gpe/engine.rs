//! Split-step Fourier propagation of the coupled 1D Gross-Pitaevskii
//! equations, in oscillator units.
//!
//! Real time: half kinetic step (spectral), then the pointwise potential
//! block `D/2 · C · D/2` where `D` holds the trap, gravity, mean field and
//! absorber and `C` is the closed-form exponential of the coupling matrix,
//! then another half kinetic step. Consecutive half kinetic steps are fused
//! inside [`Propagator::evolve`]. Probability removed by either absorber is
//! booked against the component it was taken from.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::components::{components_for, ComponentSpec};
use super::coupling::CouplingMatrix;
use super::grid::Grid;
use super::state::FieldState;
use super::units::Units;
use crate::dressed::gravitational_sag;
use crate::error::{Error, Result, Violation};
use crate::phys::{Constants, CouplingConfig, InteractionConfig, Scheme, Species, TrapConfig};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Solver knobs that are not part of the physical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Imaginary-time step of the first relaxation stage, s.
    pub imag_dt: f64,
    /// Converged when the relative energy change per step drops below this.
    pub ground_tolerance: f64,
    pub max_ground_iterations: usize,
    /// Fraction of the grid covered by the absorbing ramp at each end.
    pub absorber_fraction: f64,
    /// Peak absorption rate of the position-space ramp, 1/s.
    pub absorber_rate: f64,
    /// Momenta above this fraction of the lower of the Nyquist and
    /// split-step resonance wavenumbers are absorbed.
    pub momentum_cutoff: f64,
    /// Peak absorption rate of the momentum-space ramp, 1/s.
    pub momentum_absorber_rate: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            imag_dt: 1e-5,
            ground_tolerance: 1e-10,
            max_ground_iterations: 200_000,
            absorber_fraction: 0.1,
            absorber_rate: 7.5e4,
            momentum_cutoff: 0.7,
            momentum_absorber_rate: 1.0e6,
        }
    }
}

/// Everything needed to build an [`Engine`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetup {
    pub constants: Constants,
    pub species: Species,
    pub trap: TrapConfig,
    pub scheme: Scheme,
    pub interactions: InteractionConfig,
    pub grid: Grid,
    pub numerics: Numerics,
}

impl SimSetup {
    /// ⁸⁷Rb in the 2π×(120, 13) Hz trap with 2×10⁵ atoms and the default grid.
    pub fn standard(scheme: Scheme) -> Self {
        let constants = Constants::default();
        let trap = TrapConfig::standard_trap();
        let g1d = crate::phys::effective_g1d(&constants, &trap, crate::phys::RB87_SCATTERING_LENGTH);
        Self {
            constants,
            species: crate::phys::make_rb87(),
            trap,
            scheme,
            interactions: InteractionConfig::uniform(scheme.n_components(), g1d, 2.0e5),
            grid: Grid::default(),
            numerics: Numerics::default(),
        }
    }

    /// Same setup with the mean field switched off.
    pub fn without_interactions(mut self) -> Self {
        self.interactions = InteractionConfig::none(self.scheme.n_components());
        self
    }

    pub fn with_grid(&self, grid: Grid) -> Self {
        Self { grid, ..self.clone() }
    }

    /// Same physics at half the spacing in space and time.
    pub fn refined(&self) -> Self {
        let mut s = self.with_grid(self.grid.refined());
        s.numerics.imag_dt /= 2.0;
        s
    }
}

/// Rotating-frame Hamiltonian of one protocol stage, in engine units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hamiltonian {
    pub trap_on: bool,
    /// Δ in units of ω_z.
    pub detuning: f64,
    pub coupling: Option<CouplingMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateReport {
    pub iterations: usize,
    /// Energies per atom in units of ħω_z, measured from the potential minimum.
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
    pub energy: f64,
    pub chemical_potential: f64,
    pub residual: f64,
    /// Energy after every imaginary-time step, both stages.
    pub history: Vec<f64>,
}

/// Sampling request for [`Propagator::evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverConfig {
    /// Steps between samples; the initial and final states are always sampled.
    pub stride: usize,
    /// Record SI density profiles per component.
    pub profiles: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub time: f64,
    pub populations: Vec<f64>,
    pub absorbed: Vec<f64>,
    pub outcoupled: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ObservationSeries {
    pub samples: Vec<Observation>,
}

impl ObservationSeries {
    /// Outcoupled flux (1/s) between consecutive samples.
    pub fn outcoupled_flux(&self) -> Vec<(f64, f64)> {
        self.samples
            .windows(2)
            .map(|w| {
                let dt = w[1].time - w[0].time;
                (0.5 * (w[0].time + w[1].time), (w[1].outcoupled - w[0].outcoupled) / dt)
            })
            .collect()
    }
}

pub struct Engine {
    setup: SimSetup,
    units: Units,
    components: Vec<ComponentSpec>,
    z: Vec<f64>,
    dz: f64,
    kinetic: Vec<f64>,
    gravity: f64,
    nonlinear: Vec<Vec<f64>>,
    uniform_nonlinear: Option<f64>,
    absorber: Vec<(usize, f64)>,
    k_absorber: Vec<(usize, f64)>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("setup", &self.setup).finish_non_exhaustive()
    }
}

/// Peak 1D density and Thomas-Fermi radius for N atoms with coupling g₁d in
/// a harmonic trap, SI. Returns `None` without interactions.
pub fn thomas_fermi_radius(species: &Species, trap: &TrapConfig, n_g1d: f64) -> Option<f64> {
    if n_g1d <= 0.0 {
        return None;
    }
    let mw2 = species.mass * trap.omega_z * trap.omega_z;
    let mu = (9.0 / 32.0 * n_g1d * n_g1d * mw2).cbrt();
    Some((2.0 * mu / mw2).sqrt())
}

impl Engine {
    pub fn new(setup: SimSetup) -> Result<Self> {
        let n_comp = setup.scheme.n_components();
        let inter = &setup.interactions;
        if inter.g1d_matrix.len() != n_comp || inter.g1d_matrix.iter().any(|r| r.len() != n_comp) {
            return Err(Error::Config(vec![Violation::new(
                "interactions.g1d_matrix",
                inter.g1d_matrix.len(),
                format!("must be {n_comp}x{n_comp} for {}", setup.scheme),
            )]));
        }
        let units = Units::new(&setup.constants, &setup.species, &setup.trap);
        let cloud = cloud_radius(&setup, &units);
        setup.grid.validate(gravitational_sag(&setup.constants, &setup.trap), 3.0 * cloud)?;

        let grid = setup.grid;
        let n = grid.n_points;
        let dz = units.to_length(grid.dz());
        let z: Vec<f64> = (0..n).map(|i| units.to_length(grid.z(i))).collect();
        let dk = 2.0 * PI / (n as f64 * dz);
        let k: Vec<f64> = (0..n)
            .map(|i| if i < n / 2 { i as f64 } else { i as f64 - n as f64 } * dk)
            .collect();
        let kinetic = k.iter().map(|k| 0.5 * k * k).collect();

        let nonlinear: Vec<Vec<f64>> = inter
            .g1d_matrix
            .iter()
            .map(|row| row.iter().map(|&g| units.to_g1d(g) * inter.atom_number).collect())
            .collect();
        let uniform_nonlinear = inter.is_uniform().then(|| nonlinear[0][0]);

        let num = &setup.numerics;
        let edge = (num.absorber_fraction * n as f64).round() as usize;
        let rate = units.to_rate(num.absorber_rate);
        let mut absorber = Vec::new();
        for i in 0..n {
            let depth = if i < edge {
                (edge - i) as f64 / edge as f64
            } else if i >= n - edge {
                (i + 1 - (n - edge)) as f64 / edge as f64
            } else {
                continue;
            };
            absorber.push((i, rate * depth * depth));
        }
        // Split-step Fourier goes unstable where ½k²dt = π; the ramp starts
        // below that wavenumber (or Nyquist, if lower) and is at full
        // strength from it onwards.
        let k_nyq = PI / dz;
        let k_res = (2.0 * PI / units.to_time(grid.dt)).sqrt();
        let k_top = k_nyq.min(k_res);
        let k_cut = num.momentum_cutoff * k_top;
        let k_rate = units.to_rate(num.momentum_absorber_rate);
        let k_absorber = k
            .iter()
            .enumerate()
            .filter(|(_, k)| k.abs() > k_cut)
            .map(|(i, k)| {
                let s = ((k.abs() - k_cut) / (k_top - k_cut)).min(1.0);
                (i, k_rate * s * s)
            })
            .collect();

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Self {
            gravity: units.to_acceleration(setup.constants.g_grav),
            components: components_for(setup.scheme),
            units,
            z,
            dz,
            kinetic,
            nonlinear,
            uniform_nonlinear,
            absorber,
            k_absorber,
            fft,
            ifft,
            setup,
        })
    }

    pub fn setup(&self) -> &SimSetup {
        &self.setup
    }

    pub fn units(&self) -> &Units {
        &self.units
    }

    pub fn grid(&self) -> &Grid {
        &self.setup.grid
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    /// Sag position in oscillator units.
    fn sag(&self) -> f64 {
        -self.gravity
    }

    /// Radius of the trapped cloud, m: Thomas-Fermi if interacting, else
    /// two oscillator lengths.
    pub fn cloud_radius(&self) -> f64 {
        cloud_radius(&self.setup, &self.units)
    }

    /// Coupling matrix in engine units from SI Ω (rad/s) and κ (1/m).
    pub fn coupling_matrix(&self, omega: f64, kick: f64) -> CouplingMatrix {
        CouplingMatrix::new(self.setup.scheme, self.units.to_rate(omega), self.units.to_wavenumber(kick))
    }

    pub fn hamiltonian(&self, coupling: &CouplingConfig, coupling_on: bool, trap_on: bool) -> Hamiltonian {
        Hamiltonian {
            trap_on,
            detuning: self.units.to_rate(coupling.detuning_delta),
            coupling: (coupling_on && coupling.rabi_omega > 0.0)
                .then(|| self.coupling_matrix(coupling.rabi_omega, coupling.kick_wavenumber)),
        }
    }

    pub fn empty_state(&self) -> FieldState {
        let n = self.z.len();
        FieldState {
            components: self.components.clone(),
            amplitudes: vec![vec![ZERO; n]; self.components.len()],
            absorbed: vec![0.0; self.components.len()],
            time: 0.0,
            dz: self.dz,
            length: self.units.length,
            z_min: self.setup.grid.z_min,
        }
    }

    /// State with `f(z)` (z in metres) in one component, normalised to one.
    pub fn state_from_fn(&self, component: usize, f: impl Fn(f64) -> Complex64) -> FieldState {
        let mut s = self.empty_state();
        let grid = self.setup.grid;
        for (i, a) in s.amplitudes[component].iter_mut().enumerate() {
            *a = f(grid.z(i));
        }
        let norm = s.grid_norm(component).sqrt();
        for a in s.amplitudes[component].iter_mut() {
            *a /= norm;
        }
        s
    }

    /// Harmonic-oscillator ground state of the trapped component centred at
    /// `z0` (m).
    pub fn gaussian_state(&self, component: usize, z0: f64) -> FieldState {
        let l = self.units.length;
        self.state_from_fn(component, |z| Complex64::new((-0.5 * ((z - z0) / l).powi(2)).exp(), 0.0))
    }

    fn trapped_potential(&self) -> Vec<f64> {
        let zc = self.sag();
        self.z.iter().map(|z| 0.5 * (z - zc) * (z - zc)).collect()
    }

    fn static_potential(&self, spec: &ComponentSpec, ham: &Hamiltonian) -> Vec<f64> {
        let s = f64::from(spec.potential_sign);
        self.z
            .iter()
            .map(|&z| {
                let magnetic = if ham.trap_on { 0.5 * z * z } else { 0.0 };
                s * (magnetic - ham.detuning) + self.gravity * z
            })
            .collect()
    }

    fn energy_parts(&self, psi: &[Complex64], v: &[f64], g: f64, buf: &mut Vec<Complex64>, scratch: &mut [Complex64]) -> (f64, f64, f64) {
        buf.clear();
        buf.extend_from_slice(psi);
        self.fft.process_with_scratch(buf, scratch);
        let n = psi.len() as f64;
        let kin = buf.iter().zip(&self.kinetic).map(|(a, k)| a.norm_sqr() * k).sum::<f64>() * self.dz / n;
        let (mut pot, mut int) = (0.0, 0.0);
        for (a, v) in psi.iter().zip(v) {
            let d = a.norm_sqr();
            pot += v * d;
            int += 0.5 * g * d * d;
        }
        (kin, pot * self.dz, int * self.dz)
    }

    /// Imaginary-time relaxation of the trapped component with the coupling
    /// off: first at `imag_dt`, then at the real-time step.
    pub fn ground_state(&self) -> Result<(FieldState, GroundStateReport)> {
        let n = self.z.len();
        let v = self.trapped_potential();
        let g = self.nonlinear[0][0];
        let zc = self.sag();

        // Thomas-Fermi guess with a Gaussian floor so the tails can fill in
        let mu_tf = if g > 0.0 { (9.0 / 32.0 * g * g).cbrt() } else { 0.5 };
        let mut psi: Vec<Complex64> = self
            .z
            .iter()
            .zip(&v)
            .map(|(&z, &vz)| {
                let tf = if g > 0.0 { ((mu_tf - vz) / g).max(0.0) } else { 0.0 };
                let gauss = (-(z - zc) * (z - zc)).exp();
                Complex64::new((tf + 1e-3 * gauss * (1.0 + tf)).sqrt() + if g > 0.0 { 0.0 } else { gauss }, 0.0)
            })
            .collect();
        normalise(&mut psi, self.dz);

        let mut scratch = vec![ZERO; self.fft.get_inplace_scratch_len().max(self.ifft.get_inplace_scratch_len())];
        let mut buf = Vec::with_capacity(n);
        let mut history = Vec::new();
        let mut iterations = 0;
        let tol = self.setup.numerics.ground_tolerance;
        let max_iter = self.setup.numerics.max_ground_iterations;
        let stages = [
            (self.units.to_time(self.setup.numerics.imag_dt), 0usize),
            (self.units.to_time(self.setup.grid.dt), 0usize),
        ];
        let mut residual = f64::INFINITY;
        for (stage, &(tau, _)) in stages.iter().enumerate() {
            // relax the second stage for a few oscillator periods regardless
            let min_steps = if stage == 0 { 1 } else { (4.0 / tau).ceil() as usize };
            let half_kin: Vec<f64> = self.kinetic.iter().map(|k| (-k * 0.5 * tau).exp() / n as f64).collect();
            let mut e_prev = {
                let (k, p, i) = self.energy_parts(&psi, &v, g, &mut buf, &mut scratch);
                k + p + i
            };
            let mut steps = 0;
            loop {
                if iterations >= max_iter {
                    return Err(Error::NotConverged { iterations, residual });
                }
                self.fft.process_with_scratch(&mut psi, &mut scratch);
                for (a, f) in psi.iter_mut().zip(&half_kin) {
                    *a *= *f;
                }
                self.ifft.process_with_scratch(&mut psi, &mut scratch);
                for (a, vz) in psi.iter_mut().zip(&v) {
                    *a *= (-(vz + g * a.norm_sqr()) * tau).exp();
                }
                self.fft.process_with_scratch(&mut psi, &mut scratch);
                for (a, f) in psi.iter_mut().zip(&half_kin) {
                    *a *= *f;
                }
                self.ifft.process_with_scratch(&mut psi, &mut scratch);
                normalise(&mut psi, self.dz);
                iterations += 1;
                steps += 1;

                let (k, p, i) = self.energy_parts(&psi, &v, g, &mut buf, &mut scratch);
                let e = k + p + i;
                if !e.is_finite() {
                    return Err(Error::NonFinite { step: iterations });
                }
                history.push(e);
                residual = ((e - e_prev) / e).abs();
                e_prev = e;
                if residual < tol && steps >= min_steps {
                    break;
                }
            }
        }

        let (kinetic, potential, interaction) = self.energy_parts(&psi, &v, g, &mut buf, &mut scratch);
        let mut state = self.empty_state();
        state.amplitudes[0] = psi;
        let report = GroundStateReport {
            iterations,
            kinetic,
            potential,
            interaction,
            energy: kinetic + potential + interaction,
            chemical_potential: kinetic + potential + 2.0 * interaction,
            residual,
            history,
        };
        Ok((state, report))
    }

    pub fn propagator(&self, ham: Hamiltonian) -> Propagator<'_> {
        Propagator::new(self, ham)
    }
}

fn cloud_radius(setup: &SimSetup, units: &Units) -> f64 {
    let n_g = setup.interactions.atom_number * setup.interactions.g1d_matrix.first().and_then(|r| r.first()).copied().unwrap_or(0.0);
    thomas_fermi_radius(&setup.species, &setup.trap, n_g).unwrap_or(0.0).max(2.0 * units.length)
}

fn normalise(psi: &mut [Complex64], dz: f64) {
    let norm = (psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * dz).sqrt();
    for a in psi.iter_mut() {
        *a /= norm;
    }
}

/// Precomputed operators for one [`Hamiltonian`].
pub struct Propagator<'a> {
    engine: &'a Engine,
    ham: Hamiltonian,
    tau: f64,
    static_half: Vec<Vec<Complex64>>,
    coupling: Option<Vec<Complex64>>,
    kin_half: Vec<Complex64>,
    kin_full: Vec<Complex64>,
    k_damp_half: Vec<(usize, f64)>,
    k_damp_full: Vec<(usize, f64)>,
    x_damp_half: Vec<(usize, f64)>,
    density: Vec<f64>,
    scratch: Vec<Complex64>,
    steps_taken: usize,
}

impl<'a> Propagator<'a> {
    fn new(engine: &'a Engine, ham: Hamiltonian) -> Self {
        let tau = engine.units.to_time(engine.setup.grid.dt);
        let n = engine.z.len();
        let static_half = engine
            .components
            .iter()
            .map(|spec| {
                engine
                    .static_potential(spec, &ham)
                    .into_iter()
                    .map(|v| Complex64::from_polar(1.0, -v * 0.5 * tau))
                    .collect()
            })
            .collect();
        let coupling = ham.coupling.map(|cm| {
            let dim = cm.dim();
            let mut u = Vec::with_capacity(n * dim * dim);
            for &z in &engine.z {
                u.extend(cm.exponential(z, tau));
            }
            u
        });
        let kin = |t: f64| -> (Vec<Complex64>, Vec<(usize, f64)>) {
            let mut f: Vec<Complex64> = engine
                .kinetic
                .iter()
                .map(|k| Complex64::from_polar(1.0 / n as f64, -k * t))
                .collect();
            let damp: Vec<(usize, f64)> = engine.k_absorber.iter().map(|&(i, w)| (i, (-w * t).exp())).collect();
            for &(i, d) in &damp {
                f[i] *= d;
            }
            (f, damp)
        };
        let (kin_half, k_damp_half) = kin(0.5 * tau);
        let (kin_full, k_damp_full) = kin(tau);
        let x_damp_half = engine.absorber.iter().map(|&(i, w)| (i, (-w * 0.5 * tau).exp())).collect();
        let scratch_len = engine.fft.get_inplace_scratch_len().max(engine.ifft.get_inplace_scratch_len());
        Self {
            engine,
            ham,
            tau,
            static_half,
            coupling,
            kin_half,
            kin_full,
            k_damp_half,
            k_damp_full,
            x_damp_half,
            density: vec![0.0; n],
            scratch: vec![ZERO; scratch_len],
            steps_taken: 0,
        }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    fn kinetic(&mut self, state: &mut FieldState, full: bool) {
        let (factor, damp) = if full {
            (&self.kin_full, &self.k_damp_full)
        } else {
            (&self.kin_half, &self.k_damp_half)
        };
        let n = factor.len() as f64;
        for (c, psi) in state.amplitudes.iter_mut().enumerate() {
            self.engine.fft.process_with_scratch(psi, &mut self.scratch);
            let mut removed = 0.0;
            for &(i, d) in damp {
                removed += psi[i].norm_sqr() * (1.0 - d * d);
            }
            for (a, f) in psi.iter_mut().zip(factor) {
                *a *= *f;
            }
            self.engine.ifft.process_with_scratch(psi, &mut self.scratch);
            state.absorbed[c] += removed * state.dz / n;
        }
    }

    fn potential_half(&mut self, state: &mut FieldState) {
        let half = 0.5 * self.tau;
        let eng = self.engine;
        let n_comp = state.amplitudes.len();
        match eng.uniform_nonlinear {
            Some(g) if g != 0.0 => {
                self.density.iter_mut().for_each(|d| *d = 0.0);
                for psi in &state.amplitudes {
                    for (d, a) in self.density.iter_mut().zip(psi) {
                        *d += a.norm_sqr();
                    }
                }
                for c in 0..n_comp {
                    let psi = &mut state.amplitudes[c];
                    for i in 0..psi.len() {
                        let theta = g * self.density[i] * half;
                        let phase = if theta > 1e-15 {
                            self.static_half[c][i] * Complex64::from_polar(1.0, -theta)
                        } else {
                            self.static_half[c][i]
                        };
                        psi[i] *= phase;
                    }
                }
            }
            Some(_) => {
                for c in 0..n_comp {
                    for (a, p) in state.amplitudes[c].iter_mut().zip(&self.static_half[c]) {
                        *a *= *p;
                    }
                }
            }
            None => {
                let n = state.amplitudes[0].len();
                let densities: Vec<Vec<f64>> = state
                    .amplitudes
                    .iter()
                    .map(|psi| psi.iter().map(|a| a.norm_sqr()).collect())
                    .collect();
                for c in 0..n_comp {
                    let row = &eng.nonlinear[c];
                    let psi = &mut state.amplitudes[c];
                    for i in 0..n {
                        let theta: f64 = (0..n_comp).map(|j| row[j] * densities[j][i]).sum::<f64>() * half;
                        psi[i] *= self.static_half[c][i] * Complex64::from_polar(1.0, -theta);
                    }
                }
            }
        }
        for (c, psi) in state.amplitudes.iter_mut().enumerate() {
            let mut removed = 0.0;
            for &(i, d) in &self.x_damp_half {
                removed += psi[i].norm_sqr() * (1.0 - d * d);
                psi[i] *= d;
            }
            state.absorbed[c] += removed * state.dz;
        }
    }

    fn couple(&mut self, state: &mut FieldState) {
        let Some(u) = &self.coupling else { return };
        let dim = state.amplitudes.len();
        let n = state.amplitudes[0].len();
        let mut v = [ZERO; 3];
        for i in 0..n {
            for c in 0..dim {
                v[c] = state.amplitudes[c][i];
            }
            if v[..dim].iter().all(|a| *a == ZERO) {
                continue;
            }
            let m = &u[i * dim * dim..(i + 1) * dim * dim];
            for r in 0..dim {
                let mut acc = ZERO;
                for c in 0..dim {
                    acc += m[r * dim + c] * v[c];
                }
                state.amplitudes[r][i] = acc;
            }
        }
    }

    fn potential_block(&mut self, state: &mut FieldState) {
        self.potential_half(state);
        self.couple(state);
        self.potential_half(state);
    }

    fn finish_step(&mut self, state: &mut FieldState) -> Result<()> {
        self.steps_taken += 1;
        state.time += self.engine.setup.grid.dt;
        if !state.total().is_finite() {
            return Err(Error::NonFinite { step: self.steps_taken });
        }
        Ok(())
    }

    /// One Strang step: half kinetic, full potential and coupling, half kinetic.
    pub fn step(&mut self, state: &mut FieldState) -> Result<()> {
        self.kinetic(state, false);
        self.potential_block(state);
        self.kinetic(state, false);
        self.finish_step(state)
    }

    /// Propagate for `n` steps with the inner half kinetic steps fused.
    fn run(&mut self, state: &mut FieldState, n: usize) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        self.kinetic(state, false);
        for i in 0..n {
            self.potential_block(state);
            let last = i + 1 == n;
            self.kinetic(state, !last);
            self.finish_step(state)?;
        }
        Ok(())
    }

    /// Propagate for `duration` seconds, sampling according to `observer`.
    pub fn evolve(&mut self, state: &mut FieldState, duration: f64, observer: Option<ObserverConfig>) -> Result<ObservationSeries> {
        let n = self.engine.setup.grid.steps_in(duration)?;
        let mut series = ObservationSeries::default();
        let Some(obs) = observer else {
            self.run(state, n)?;
            return Ok(series);
        };
        let stride = obs.stride.max(1);
        series.samples.push(observe(state, obs.profiles));
        let mut done = 0;
        while done < n {
            let block = stride.min(n - done);
            self.run(state, block)?;
            done += block;
            series.samples.push(observe(state, obs.profiles));
        }
        Ok(series)
    }
}

fn observe(state: &FieldState, profiles: bool) -> Observation {
    Observation {
        time: state.time,
        populations: state.populations(),
        absorbed: state.absorbed.clone(),
        outcoupled: state.outcoupled_fraction(),
        profiles: profiles.then(|| (0..state.components.len()).map(|c| state.density(c)).collect()),
    }
}
