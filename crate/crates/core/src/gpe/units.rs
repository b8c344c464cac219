use crate::phys::{Constants, Species, TrapConfig};

/// Harmonic-oscillator units of the vertical trap: length √(ħ/mω_z),
/// time 1/ω_z, energy ħω_z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub length: f64,
    pub time: f64,
    pub energy: f64,
    pub hbar: f64,
    pub mass: f64,
    pub omega_z: f64,
}

impl Units {
    pub fn new(constants: &Constants, species: &Species, trap: &TrapConfig) -> Self {
        let length = (constants.hbar / (species.mass * trap.omega_z)).sqrt();
        Self {
            length,
            time: 1.0 / trap.omega_z,
            energy: constants.hbar * trap.omega_z,
            hbar: constants.hbar,
            mass: species.mass,
            omega_z: trap.omega_z,
        }
    }

    pub fn to_length(&self, z_si: f64) -> f64 {
        z_si / self.length
    }

    pub fn to_time(&self, t_si: f64) -> f64 {
        t_si / self.time
    }

    pub fn to_rate(&self, rad_per_s: f64) -> f64 {
        rad_per_s * self.time
    }

    pub fn to_wavenumber(&self, k_si: f64) -> f64 {
        k_si * self.length
    }

    /// Gravitational acceleration in oscillator units, g/(ω_z² ℓ).
    pub fn to_acceleration(&self, a_si: f64) -> f64 {
        a_si * self.time * self.time / self.length
    }

    /// A 1D coupling in J m to oscillator units.
    pub fn to_g1d(&self, g1d: f64) -> f64 {
        g1d / (self.energy * self.length)
    }
}
