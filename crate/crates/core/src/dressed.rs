//! Closed-form two-level dressed-state model of outcoupling from a harmonic
//! magnetic trap under gravity.
//!
//! Sign conventions: z points up, gravity contributes the potential energy
//! `+m g z`, so the condensate sags to `z_c = -g/ω_z²`. The rotating-frame
//! Hamiltonian at each point is `ħ[[δ(z), Ω], [Ω, 0]]` with
//! `ħδ(z) = ½ m ω_z² z² − ħΔ`; gravity is added to the eigenvalues after
//! diagonalisation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phys::{Constants, CouplingConfig, Scheme, Species, TrapConfig};

/// Equilibrium position of the condensate below the field minimum.
pub fn gravitational_sag(constants: &Constants, trap: &TrapConfig) -> f64 {
    -constants.g_grav / (trap.omega_z * trap.omega_z)
}

/// Detuning Δ that puts the resonance at the sagged condensate centre,
/// `m g² / (2 ħ ω_z²)`.
pub fn sag_detuning(constants: &Constants, trap: &TrapConfig, species: &Species) -> f64 {
    species.mass * constants.g_grav.powi(2) / (2.0 * constants.hbar * trap.omega_z.powi(2))
}

/// Single-photon-pair recoil shift ħκ²/2m, rad/s.
pub fn recoil_shift(constants: &Constants, species: &Species, kick_wavenumber: f64) -> f64 {
    constants.hbar * kick_wavenumber * kick_wavenumber / (2.0 * species.mass)
}

/// Δ for which transfer into a final state carrying momentum ħκ is resonant
/// at the condensate centre: the sag detuning less the recoil shift.
pub fn resonant_detuning(constants: &Constants, trap: &TrapConfig, species: &Species, kick_wavenumber: f64) -> f64 {
    sag_detuning(constants, trap, species) - recoil_shift(constants, species, kick_wavenumber)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningProfile {
    mass: f64,
    omega_z: f64,
    hbar: f64,
    g_grav: f64,
    delta_big: f64,
    roots: Option<(f64, f64)>,
}

impl DetuningProfile {
    /// δ(z) in rad/s.
    pub fn delta(&self, z: f64) -> f64 {
        (0.5 * self.mass * self.omega_z * self.omega_z * z * z - self.hbar * self.delta_big) / self.hbar
    }

    pub fn big_delta(&self) -> f64 {
        self.delta_big
    }

    /// (lower, upper) positions where δ vanishes; `None` for Δ < 0. For Δ = 0
    /// both entries are the vertex.
    pub fn resonance_roots(&self) -> Option<(f64, f64)> {
        self.roots
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

pub fn detuning_profile(constants: &Constants, trap: &TrapConfig, species: &Species, delta_big: f64) -> DetuningProfile {
    let roots = if delta_big >= 0.0 {
        let r = (2.0 * constants.hbar * delta_big / (species.mass * trap.omega_z * trap.omega_z)).sqrt();
        Some((-r, r))
    } else {
        None
    };
    DetuningProfile {
        mass: species.mass,
        omega_z: trap.omega_z,
        hbar: constants.hbar,
        g_grav: constants.g_grav,
        delta_big,
        roots,
    }
}

/// One row of a sampled dressed system; energies in J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedSample {
    pub z: f64,
    pub delta: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    pub v_bare_t: f64,
    pub v_bare_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedSystem {
    profile: DetuningProfile,
    omega: f64,
}

impl DressedSystem {
    pub fn profile(&self) -> &DetuningProfile {
        &self.profile
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    fn gravity(&self, z: f64) -> f64 {
        self.profile.mass * self.profile.g_grav * z
    }

    fn root_term(&self, delta: f64) -> f64 {
        delta.hypot(2.0 * self.omega)
    }

    pub fn v_plus(&self, z: f64) -> f64 {
        let d = self.profile.delta(z);
        0.5 * self.profile.hbar * (d + self.root_term(d)) + self.gravity(z)
    }

    pub fn v_minus(&self, z: f64) -> f64 {
        let d = self.profile.delta(z);
        // δ − √(δ²+4Ω²) written without cancellation for large positive δ
        let lower = if d > 0.0 {
            -4.0 * self.omega * self.omega / (d + self.root_term(d))
        } else {
            d - self.root_term(d)
        };
        0.5 * self.profile.hbar * lower + self.gravity(z)
    }

    /// `ħ√(δ² + 4Ω²)`.
    pub fn gap(&self, z: f64) -> f64 {
        self.profile.hbar * self.root_term(self.profile.delta(z))
    }

    /// θ with `|+⟩ = cosθ|t⟩ + sinθ|u⟩`, in [0, π/2].
    pub fn mixing_angle(&self, z: f64) -> f64 {
        mixing_angle(self.profile.delta(z), self.omega)
    }

    pub fn bare_trapped(&self, z: f64) -> f64 {
        self.profile.hbar * self.profile.delta(z) + self.gravity(z)
    }

    pub fn bare_untrapped(&self, z: f64) -> f64 {
        self.gravity(z)
    }

    pub fn sample(&self, z: f64) -> DressedSample {
        DressedSample {
            z,
            delta: self.profile.delta(z),
            v_plus: self.v_plus(z),
            v_minus: self.v_minus(z),
            v_bare_t: self.bare_trapped(z),
            v_bare_u: self.bare_untrapped(z),
        }
    }
}

pub fn dressed_potentials(profile: &DetuningProfile, omega: f64) -> Result<DressedSystem> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::domain("rabi frequency", format!("Ω = {omega} must be non-negative")));
    }
    Ok(DressedSystem {
        profile: *profile,
        omega,
    })
}

fn mixing_angle(delta: f64, omega: f64) -> f64 {
    0.5 * (2.0 * omega).atan2(delta)
}

fn basis(delta: f64, omega: f64) -> Result<(f64, f64)> {
    if omega == 0.0 && delta == 0.0 {
        return Err(Error::domain("dressed basis", "undefined at Ω = 0 and δ = 0"));
    }
    Ok(mixing_angle(delta, omega).sin_cos())
}

/// Bare (trapped, untrapped) amplitudes to dressed (+, −) amplitudes.
pub fn project_onto_dressed(bare: [Complex64; 2], delta: f64, omega: f64) -> Result<[Complex64; 2]> {
    let (s, c) = basis(delta, omega)?;
    Ok([bare[0] * c + bare[1] * s, -bare[0] * s + bare[1] * c])
}

/// Inverse of [`project_onto_dressed`].
pub fn project_onto_bare(dressed: [Complex64; 2], delta: f64, omega: f64) -> Result<[Complex64; 2]> {
    let (s, c) = basis(delta, omega)?;
    Ok([dressed[0] * c - dressed[1] * s, dressed[0] * s + dressed[1] * c])
}

fn require_positive(what: &'static str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(what, format!("{name} = {v} must be positive")))
    }
}

/// `γ = 2 exp[−π Ω^{3/2} / (√2 Δ^{1/2} ω_z)]`.
pub fn bound_decay_rate(omega: f64, delta_big: f64, omega_z: f64) -> Result<f64> {
    require_positive("decay rate", "Δ", delta_big)?;
    require_positive("decay rate", "ω_z", omega_z)?;
    if !(omega >= 0.0) {
        return Err(Error::domain("decay rate", format!("Ω = {omega} must be non-negative")));
    }
    Ok(2.0 * (-decay_exponent(omega, delta_big, omega_z)).exp())
}

fn decay_exponent(omega: f64, delta_big: f64, omega_z: f64) -> f64 {
    PI * omega.powf(1.5) / (2f64.sqrt() * delta_big.sqrt() * omega_z)
}

/// `(2 ω_z² Δ / π²)^{1/3}`, the Ω at which the decay exponent reaches one.
pub fn strong_coupling_threshold(omega_z: f64, delta_big: f64) -> Result<f64> {
    require_positive("strong-coupling threshold", "Δ", delta_big)?;
    require_positive("strong-coupling threshold", "ω_z", omega_z)?;
    Ok((2.0 * omega_z * omega_z * delta_big / (PI * PI)).cbrt())
}

fn oscillation_factor(scheme: Scheme) -> f64 {
    if scheme.is_three_state() {
        2f64.powf(1.5)
    } else {
        1.0
    }
}

/// Observable population-oscillation frequency Ω₀ in Hz.
pub fn oscillation_frequency(omega: f64, scheme: Scheme) -> f64 {
    oscillation_factor(scheme) * omega / (2.0 * PI)
}

/// Inverse of [`oscillation_frequency`]: Ω in rad/s for a given Ω₀ in Hz.
pub fn rabi_from_oscillation(omega0_hz: f64, scheme: Scheme) -> f64 {
    2.0 * PI * omega0_hz / oscillation_factor(scheme)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickGeometry {
    None,
    /// Orthogonal beams, √2 k at 45° to gravity.
    Orthogonal45,
    /// Beams separated by `theta` radians, kick 2k sin(θ/2) along gravity.
    Angled { theta: f64 },
    Counterprop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumKick {
    /// Total transferred wavenumber, 1/m.
    pub wavenumber: f64,
    pub velocity: f64,
    /// Component along gravity, 1/m. This is what the 1D engine uses.
    pub gravity_wavenumber: f64,
    pub gravity_velocity: f64,
}

pub fn momentum_kick(constants: &Constants, species: &Species, geometry: KickGeometry) -> Result<MomentumKick> {
    let k = species.photon_wavenumber_k;
    let (total, along) = match geometry {
        KickGeometry::None => (0.0, 0.0),
        KickGeometry::Orthogonal45 => {
            let t = 2f64.sqrt() * k;
            (t, t * (PI / 4.0).cos())
        }
        KickGeometry::Angled { theta } => {
            if !(theta > 0.0 && theta <= PI) {
                return Err(Error::domain("beam angle", format!("θ = {theta} must lie in (0, π]")));
            }
            let t = 2.0 * k * (theta / 2.0).sin();
            (t, t)
        }
        KickGeometry::Counterprop => (2.0 * k, 2.0 * k),
    };
    let v = |kappa: f64| constants.hbar * kappa / species.mass;
    Ok(MomentumKick {
        wavenumber: total,
        velocity: v(total),
        gravity_wavenumber: along,
        gravity_velocity: v(along),
    })
}

/// Time to fall through `width` starting at `v0` along gravity: the positive
/// root of `w = v₀t + ½gt²`.
pub fn fall_time_with(g: f64, width: f64, v0: f64) -> Result<f64> {
    require_positive("fall time", "region width", width)?;
    if !(v0 >= 0.0 && v0.is_finite()) {
        return Err(Error::domain("fall time", format!("v₀ = {v0} must be non-negative")));
    }
    if g <= 0.0 && v0 == 0.0 {
        return Err(Error::domain("fall time", "no gravity and no initial velocity"));
    }
    // 2w / (v₀ + √(v₀² + 2gw)) avoids cancellation when v₀² ≫ gw
    Ok(2.0 * width / (v0 + (v0 * v0 + 2.0 * g * width).sqrt()))
}

pub fn fall_time(constants: &Constants, width: f64, v0: f64) -> Result<f64> {
    fall_time_with(constants.g_grav, width, v0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Weak,
    Intermediate,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShutdownEstimate {
    /// Hz
    pub omega0_max: f64,
    pub tau_fall: f64,
    pub region_width: f64,
    /// Ω₀ of the supplied coupling, Hz.
    pub omega0: f64,
    pub regime: Regime,
}

/// Reporting band around `1/τ_fall` used to label a coupling intermediate.
pub const REGIME_FACTOR: f64 = 3.0;

pub fn shutdown_estimate(
    constants: &Constants,
    species: &Species,
    coupling: &CouplingConfig,
    region_width: f64,
) -> Result<ShutdownEstimate> {
    let v0 = constants.hbar * coupling.kick_wavenumber / species.mass;
    let tau = fall_time(constants, region_width, v0)?;
    let omega0_max = 1.0 / tau;
    let omega0 = oscillation_frequency(coupling.rabi_omega, coupling.scheme);
    let regime = if omega0 < omega0_max / REGIME_FACTOR {
        Regime::Weak
    } else if omega0 > REGIME_FACTOR * omega0_max {
        Regime::Strong
    } else {
        Regime::Intermediate
    };
    Ok(ShutdownEstimate {
        omega0_max,
        tau_fall: tau,
        region_width,
        omega0,
        regime,
    })
}
