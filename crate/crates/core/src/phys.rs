//! Physical constants, species data and the validated configuration types
//! shared by the rest of the crate. Everything here is SI.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Standard gravitational acceleration used throughout, m/s².
pub const G_GRAV: f64 = 9.81;
/// ⁸⁷Rb atomic mass, kg.
pub const RB87_MASS: f64 = 1.44316e-25;
/// ⁸⁷Rb D2 line wavelength, m.
pub const RB87_D2_WAVELENGTH: f64 = 780.24e-9;
/// ⁸⁷Rb s-wave scattering length, m.
pub const RB87_SCATTERING_LENGTH: f64 = 5.3e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub hbar: f64,
    pub g_grav: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            hbar: HBAR,
            g_grav: G_GRAV,
        }
    }
}

impl Constants {
    /// Constants with gravity switched off, for isolating coupling dynamics.
    pub fn without_gravity() -> Self {
        Self {
            g_grav: 0.0,
            ..Self::default()
        }
    }

    pub fn check(&self, out: &mut Vec<Violation>) {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            out.push(Violation::new("constants.hbar", self.hbar, "must be positive"));
        }
        if !(self.g_grav >= 0.0 && self.g_grav.is_finite()) {
            out.push(Violation::new("constants.g_grav", self.g_grav, "must be non-negative"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Species {
    pub name: String,
    /// kg
    pub mass: f64,
    /// Optical wavenumber of the Raman transition, 1/m.
    pub photon_wavenumber_k: f64,
}

pub fn make_rb87() -> Species {
    Species {
        name: "Rb87".to_string(),
        mass: RB87_MASS,
        photon_wavenumber_k: 2.0 * PI / RB87_D2_WAVELENGTH,
    }
}

impl Species {
    /// Single-photon recoil velocity ħk/m.
    pub fn recoil_velocity(&self, constants: &Constants) -> f64 {
        constants.hbar * self.photon_wavenumber_k / self.mass
    }

    pub fn check(&self, out: &mut Vec<Violation>) {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            out.push(Violation::new("species.mass", self.mass, "must be positive"));
        }
        if !(self.photon_wavenumber_k > 0.0 && self.photon_wavenumber_k.is_finite()) {
            out.push(Violation::new(
                "species.photon_wavenumber_k",
                self.photon_wavenumber_k,
                "must be positive",
            ));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapConfig {
    /// Vertical (tight) trap frequency, rad/s.
    pub omega_z: f64,
    /// Weak-axis trap frequency, rad/s. Only enters the effective 1D coupling.
    pub omega_y: f64,
    /// Transition frequency at the field minimum, rad/s. Reporting only.
    #[serde(default)]
    pub bias_transition_omega0: f64,
}

impl TrapConfig {
    /// ω_z = 2π×120 Hz, ω_y = 2π×13 Hz.
    pub fn standard_trap() -> Self {
        Self {
            omega_z: 2.0 * PI * 120.0,
            omega_y: 2.0 * PI * 13.0,
            bias_transition_omega0: 2.0 * PI * 1.34e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RfThreeState,
    RamanTwoState,
    RamanThreeState,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::RfThreeState, Scheme::RamanTwoState, Scheme::RamanThreeState];

    pub fn n_components(self) -> usize {
        match self {
            Scheme::RamanTwoState => 2,
            Scheme::RfThreeState | Scheme::RamanThreeState => 3,
        }
    }

    pub fn is_three_state(self) -> bool {
        self.n_components() == 3
    }

    pub fn is_raman(self) -> bool {
        !matches!(self, Scheme::RfThreeState)
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::RfThreeState => "rf_three_state",
            Scheme::RamanTwoState => "raman_two_state",
            Scheme::RamanThreeState => "raman_three_state",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One-photon parameters of a two-photon Raman coupling, all rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnePhoton {
    pub omega1: f64,
    pub omega2: f64,
    pub delta_r: f64,
}

impl OnePhoton {
    /// Effective two-photon Rabi frequency Ω₁Ω₂/2Δ_R.
    pub fn effective_rabi(&self) -> f64 {
        self.omega1 * self.omega2 / (2.0 * self.delta_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub scheme: Scheme,
    /// Ω, rad/s.
    pub rabi_omega: f64,
    /// Δ relative to the transition at the field minimum, rad/s.
    pub detuning_delta: f64,
    /// Momentum transferred along gravity (downward), 1/m. Zero for rf.
    #[serde(default)]
    pub kick_wavenumber: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_photon: Option<OnePhoton>,
}

impl CouplingConfig {
    pub fn with_rabi_omega(mut self, rabi_omega: f64) -> Self {
        self.rabi_omega = rabi_omega;
        self.one_photon = None;
        self
    }
}

/// Effective 1D mean-field couplings (J m) between component pairs, and the
/// total atom number the unit-normalised wavefunction represents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub g1d_matrix: Vec<Vec<f64>>,
    pub atom_number: f64,
}

impl InteractionConfig {
    pub fn uniform(n_components: usize, g1d: f64, atom_number: f64) -> Self {
        Self {
            g1d_matrix: vec![vec![g1d; n_components]; n_components],
            atom_number,
        }
    }

    pub fn none(n_components: usize) -> Self {
        Self::uniform(n_components, 0.0, 1.0)
    }

    /// Every pair shares the same strength.
    pub fn is_uniform(&self) -> bool {
        let first = self.g1d_matrix.first().and_then(|r| r.first()).copied().unwrap_or(0.0);
        self.g1d_matrix.iter().flatten().all(|&g| g == first)
    }
}

/// Effective 1D coupling from integrating a 3D contact interaction over
/// Gaussian transverse ground states: g₁d = 2ħ ω⊥ a_s, with ω⊥ the geometric
/// mean of the horizontal trap frequencies. The horizontal radial axis shares
/// ω_z with the vertical one, so ω⊥ = √(ω_z ω_y).
pub fn effective_g1d(constants: &Constants, trap: &TrapConfig, scattering_length: f64) -> f64 {
    let omega_perp = (trap.omega_z * trap.omega_y).sqrt();
    2.0 * constants.hbar * omega_perp * scattering_length
}

/// Configuration bundle whose invariants have all been checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedConfig {
    trap: TrapConfig,
    coupling: CouplingConfig,
    interactions: InteractionConfig,
}

impl ValidatedConfig {
    pub fn trap(&self) -> &TrapConfig {
        &self.trap
    }
    pub fn coupling(&self) -> &CouplingConfig {
        &self.coupling
    }
    pub fn interactions(&self) -> &InteractionConfig {
        &self.interactions
    }
}

fn positive(out: &mut Vec<Violation>, field: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        out.push(Violation::new(field, v, "must be positive and finite"));
    }
}

/// Check every trap, coupling and interaction invariant, reporting all of the
/// violations found rather than the first.
pub fn validate_config(
    trap: &TrapConfig,
    coupling: &CouplingConfig,
    interactions: &InteractionConfig,
) -> Result<ValidatedConfig> {
    let mut v = Vec::new();
    positive(&mut v, "trap.omega_z", trap.omega_z);
    positive(&mut v, "trap.omega_y", trap.omega_y);
    if !trap.bias_transition_omega0.is_finite() {
        v.push(Violation::new("trap.bias_transition_omega0", trap.bias_transition_omega0, "must be finite"));
    }

    if !(coupling.rabi_omega >= 0.0 && coupling.rabi_omega.is_finite()) {
        v.push(Violation::new("coupling.rabi_omega", coupling.rabi_omega, "must be non-negative"));
    }
    if !coupling.detuning_delta.is_finite() {
        v.push(Violation::new("coupling.detuning_delta", coupling.detuning_delta, "must be finite"));
    }
    if !coupling.kick_wavenumber.is_finite() || coupling.kick_wavenumber < 0.0 {
        v.push(Violation::new(
            "coupling.kick_wavenumber",
            coupling.kick_wavenumber,
            "must be finite and non-negative (signed along gravity)",
        ));
    } else if coupling.scheme == Scheme::RfThreeState && coupling.kick_wavenumber != 0.0 {
        v.push(Violation::new(
            "coupling.kick_wavenumber",
            coupling.kick_wavenumber,
            "rf coupling carries no optical momentum",
        ));
    }
    if let Some(op) = coupling.one_photon {
        let expected = op.effective_rabi();
        let rel = ((coupling.rabi_omega - expected) / expected).abs();
        if !(rel <= 1e-12) {
            v.push(Violation::new(
                "coupling.rabi_omega",
                coupling.rabi_omega,
                format!("must equal omega1*omega2/(2*delta_r) = {expected:e}"),
            ));
        }
        if coupling.scheme == Scheme::RfThreeState {
            v.push(Violation::new("coupling.one_photon", "present", "rf coupling has no optical one-photon stage"));
        }
    }

    let n = coupling.scheme.n_components();
    let m = &interactions.g1d_matrix;
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        v.push(Violation::new(
            "interactions.g1d_matrix",
            format!("{}x{}", m.len(), m.first().map_or(0, |r| r.len())),
            format!("must be {n}x{n} for {}", coupling.scheme),
        ));
    } else {
        for i in 0..n {
            if !(m[i][i] >= 0.0) {
                v.push(Violation::new(format!("interactions.g1d_matrix[{i}][{i}]"), m[i][i], "diagonal must be >= 0"));
            }
            for j in 0..n {
                if !m[i][j].is_finite() {
                    v.push(Violation::new(format!("interactions.g1d_matrix[{i}][{j}]"), m[i][j], "must be finite"));
                } else if m[i][j] != m[j][i] {
                    v.push(Violation::new(
                        format!("interactions.g1d_matrix[{i}][{j}]"),
                        m[i][j],
                        format!("matrix must be symmetric, transpose entry is {}", m[j][i]),
                    ));
                }
            }
        }
    }
    positive(&mut v, "interactions.atom_number", interactions.atom_number);

    if v.is_empty() {
        Ok(ValidatedConfig {
            trap: *trap,
            coupling: *coupling,
            interactions: interactions.clone(),
        })
    } else {
        Err(Error::Config(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rf(omega: f64) -> CouplingConfig {
        CouplingConfig {
            scheme: Scheme::RfThreeState,
            rabi_omega: omega,
            detuning_delta: 0.0,
            kick_wavenumber: 0.0,
            one_photon: None,
        }
    }

    #[test]
    fn rb87_values() {
        let rb = make_rb87();
        assert_eq!(rb.mass, 1.44316e-25);
        assert!((rb.photon_wavenumber_k - 8.053e6).abs() / 8.053e6 < 1e-3);
        let v = rb.recoil_velocity(&Constants::default());
        assert!((v - 5.885e-3).abs() / 5.885e-3 < 1e-3, "recoil {v}");
    }

    #[test]
    fn standard_trap_with_rf_is_valid() {
        let ok = validate_config(&TrapConfig::standard_trap(), &rf(2.0 * PI * 100.0), &InteractionConfig::none(3));
        assert!(ok.is_ok());
    }

    #[test]
    fn zero_trap_frequency_is_named() {
        let mut trap = TrapConfig::standard_trap();
        trap.omega_z = 0.0;
        let err = validate_config(&trap, &rf(1.0), &InteractionConfig::none(3)).unwrap_err();
        assert_eq!(err.violations().len(), 1);
        assert_eq!(err.violations()[0].field, "trap.omega_z");
        assert_eq!(err.violations()[0].value, "0");
    }

    #[test]
    fn rf_with_kick_is_rejected() {
        let mut c = rf(1.0);
        c.kick_wavenumber = 8e6;
        let err = validate_config(&TrapConfig::standard_trap(), &c, &InteractionConfig::none(3)).unwrap_err();
        assert!(err.violations().iter().any(|v| v.field == "coupling.kick_wavenumber"));
    }

    #[test]
    fn all_violations_reported() {
        let mut trap = TrapConfig::standard_trap();
        trap.omega_y = -1.0;
        let mut c = rf(-3.0);
        c.kick_wavenumber = 1.0;
        let mut inter = InteractionConfig::uniform(3, 1.0, 0.0);
        inter.g1d_matrix[0][1] = 2.0;
        let err = validate_config(&trap, &c, &inter).unwrap_err();
        let fields: Vec<_> = err.violations().iter().map(|v| v.field.as_str()).collect();
        for f in [
            "trap.omega_y",
            "coupling.rabi_omega",
            "coupling.kick_wavenumber",
            "interactions.g1d_matrix[0][1]",
            "interactions.atom_number",
        ] {
            assert!(fields.contains(&f), "missing {f} in {fields:?}");
        }
    }

    #[test]
    fn one_photon_consistency() {
        let op = OnePhoton {
            omega1: 2.0e8,
            omega2: 3.0e8,
            delta_r: 2.0 * PI * 90e9,
        };
        let mut c = CouplingConfig {
            scheme: Scheme::RamanTwoState,
            rabi_omega: op.effective_rabi(),
            detuning_delta: 0.0,
            kick_wavenumber: 1.0e7,
            one_photon: Some(op),
        };
        assert!(validate_config(&TrapConfig::standard_trap(), &c, &InteractionConfig::none(2)).is_ok());
        c.rabi_omega *= 1.0 + 1e-9;
        assert!(validate_config(&TrapConfig::standard_trap(), &c, &InteractionConfig::none(2)).is_err());
    }

    #[test]
    fn interaction_matrix_size_follows_scheme() {
        let err = validate_config(&TrapConfig::standard_trap(), &rf(1.0), &InteractionConfig::none(2)).unwrap_err();
        assert_eq!(err.violations()[0].field, "interactions.g1d_matrix");
    }

    #[test]
    fn validation_is_pure() {
        let mut trap = TrapConfig::standard_trap();
        trap.omega_z = f64::NAN;
        let a = validate_config(&trap, &rf(1.0), &InteractionConfig::none(3)).unwrap_err();
        let b = validate_config(&trap, &rf(1.0), &InteractionConfig::none(3)).unwrap_err();
        assert_eq!(a.violations(), b.violations());
    }

    #[test]
    fn g1d_formula() {
        let c = Constants::default();
        let trap = TrapConfig::standard_trap();
        let g = effective_g1d(&c, &trap, RB87_SCATTERING_LENGTH);
        // 2ħ a √(ω_z ω_y)
        let expected = 2.0 * HBAR * RB87_SCATTERING_LENGTH * (2.0 * PI) * (120.0f64 * 13.0).sqrt();
        assert!((g - expected).abs() / expected < 1e-14);
    }
}
