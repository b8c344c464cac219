//! JSON run configuration. Sections: `species`, `trap`, `coupling`,
//! `interactions`, `grid`, `protocol`, plus optional `constants` and
//! `numerics`. Unknown keys anywhere are rejected.
//!
//! Convenience forms, resolved by [`RunConfig::resolve`]:
//! - `coupling.detuning_delta` may be the string `"resonant"`: on resonance
//!   at the condensate centre, including the recoil shift of the kick.
//! - `coupling.kick` may name a beam geometry instead of giving
//!   `kick_wavenumber`.
//! - `interactions` may give `scattering_length` instead of `g1d_matrix`.
//! - `protocol.sweep` may be `{"log": {"start": .., "stop": .., "points": ..}}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dressed::{momentum_kick, resonant_detuning, KickGeometry};
use crate::error::{Error, Result, Violation};
use crate::gpe::{Grid, Numerics, SimSetup};
use crate::phys::{effective_g1d, make_rb87, Constants, CouplingConfig, InteractionConfig, OnePhoton, Scheme, Species, TrapConfig};
use crate::protocols::{log_sweep, Experiment, ProtocolKind, ProtocolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Detuning {
    Value(f64),
    Named(DetuningName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningName {
    Resonant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub scheme: Scheme,
    /// rad/s; overwritten per sweep point.
    #[serde(default)]
    pub rabi_omega: f64,
    pub detuning_delta: Detuning,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kick_wavenumber: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kick: Option<KickSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_photon: Option<OnePhoton>,
}

/// Beam geometry, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case", deny_unknown_fields)]
pub enum KickSpec {
    None,
    Orthogonal45,
    Angled { theta_deg: f64 },
    Counterprop,
}

impl KickSpec {
    pub fn geometry(self) -> KickGeometry {
        match self {
            KickSpec::None => KickGeometry::None,
            KickSpec::Orthogonal45 => KickGeometry::Orthogonal45,
            KickSpec::Angled { theta_deg } => KickGeometry::Angled {
                theta: theta_deg.to_radians(),
            },
            KickSpec::Counterprop => KickGeometry::Counterprop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1d_matrix: Option<Vec<Vec<f64>>>,
    /// m; all pairs share g₁d from this length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering_length: Option<f64>,
    pub atom_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepSpec {
    Values(Vec<f64>),
    Log(LogSection),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSection {
    pub log: LogSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepSpec::Values(v) => v.clone(),
            SweepSpec::Log(LogSection { log }) => log_sweep(log.start, log.stop, log.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    pub coupling_on: f64,
    #[serde(default)]
    pub post_evolve: f64,
    #[serde(default)]
    pub expansion: f64,
    pub sweep: SweepSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    pub species: Species,
    pub trap: TrapConfig,
    pub coupling: CouplingSection,
    pub interactions: InteractionSection,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerics: Option<Numerics>,
    pub protocol: ProtocolSection,
}

/// Everything a run needs, with every convenience form resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub experiment: Experiment,
    pub protocol: ProtocolSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Standard trap and species with the given coupling scheme and protocol,
    /// on resonance, 2×10⁵ atoms.
    pub fn standard(scheme: Scheme, protocol: ProtocolSection) -> Self {
        let kick = if scheme.is_raman() {
            Some(KickSpec::Angled { theta_deg: 140.0 })
        } else {
            None
        };
        Self {
            constants: None,
            species: make_rb87(),
            trap: TrapConfig::standard_trap(),
            coupling: CouplingSection {
                scheme,
                rabi_omega: 0.0,
                detuning_delta: Detuning::Named(DetuningName::Resonant),
                kick_wavenumber: None,
                kick,
                one_photon: None,
            },
            interactions: InteractionSection {
                g1d_matrix: None,
                scattering_length: Some(crate::phys::RB87_SCATTERING_LENGTH),
                atom_number: 2.0e5,
            },
            grid: Grid::default(),
            numerics: None,
            protocol,
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let mut v = Vec::new();
        let constants = self.constants.unwrap_or_default();
        constants.check(&mut v);
        self.species.check(&mut v);
        let c = &self.coupling;
        let kick = match (c.kick_wavenumber, c.kick) {
            (Some(_), Some(_)) => {
                v.push(Violation::new("coupling.kick", "both", "give either kick_wavenumber or kick, not both"));
                0.0
            }
            (Some(k), None) => k,
            (None, Some(spec)) => match momentum_kick(&constants, &self.species, spec.geometry()) {
                Ok(k) => k.gravity_wavenumber,
                Err(e) => {
                    v.push(Violation::new("coupling.kick", format!("{spec:?}"), e.to_string()));
                    0.0
                }
            },
            (None, None) => 0.0,
        };
        let detuning = match c.detuning_delta {
            Detuning::Value(d) => d,
            Detuning::Named(DetuningName::Resonant) => resonant_detuning(&constants, &self.trap, &self.species, kick),
        };
        let n = c.scheme.n_components();
        let i = &self.interactions;
        let g1d_matrix = match (&i.g1d_matrix, i.scattering_length) {
            (Some(m), None) => m.clone(),
            (None, Some(a)) => vec![vec![effective_g1d(&constants, &self.trap, a); n]; n],
            _ => {
                v.push(Violation::new(
                    "interactions",
                    "g1d_matrix/scattering_length",
                    "give exactly one of g1d_matrix or scattering_length",
                ));
                vec![vec![0.0; n]; n]
            }
        };
        if !(i.atom_number > 0.0 && i.atom_number.is_finite()) {
            v.push(Violation::new("interactions.atom_number", i.atom_number, "must be positive"));
        }
        if let Some(a) = i.scattering_length {
            if !(a >= 0.0 && a.is_finite()) {
                v.push(Violation::new("interactions.scattering_length", a, "must be >= 0"));
            }
        }
        let coupling = CouplingConfig {
            scheme: c.scheme,
            rabi_omega: c.rabi_omega,
            detuning_delta: detuning,
            kick_wavenumber: kick,
            one_photon: c.one_photon,
        };
        let setup = SimSetup {
            constants,
            species: self.species.clone(),
            trap: self.trap,
            scheme: c.scheme,
            interactions: InteractionConfig {
                g1d_matrix,
                atom_number: i.atom_number,
            },
            grid: self.grid,
            numerics: self.numerics.unwrap_or_default(),
        };
        let experiment = Experiment { setup, coupling };
        // report every stage at once
        let mut collect = |r: Result<()>| match r {
            Ok(()) => Ok(()),
            Err(Error::Config(list)) => {
                v.extend(list);
                Ok(())
            }
            Err(e) => Err(e),
        };
        collect(experiment.check())?;
        let p = &self.protocol;
        let protocol = ProtocolSpec {
            kind: p.kind,
            coupling_on: p.coupling_on,
            post_evolve: p.post_evolve,
            expansion: p.expansion,
            sweep: p.sweep.values(),
            drive_slope: p.drive_slope,
        };
        collect(protocol.validate())?;
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        Ok(Resolved { experiment, protocol })
    }
}
