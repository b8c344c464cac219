use num_complex::Complex64;
use serde::Serialize;

use super::components::{ComponentLabel, ComponentSpec};

/// Multi-component wavefunction on the engine grid, in oscillator units,
/// normalised so that on-grid norm plus absorbed norm is one.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub(crate) components: Vec<ComponentSpec>,
    pub(crate) amplitudes: Vec<Vec<Complex64>>,
    pub(crate) absorbed: Vec<f64>,
    /// Elapsed real time, s.
    pub(crate) time: f64,
    /// Grid spacing in oscillator lengths.
    pub(crate) dz: f64,
    /// Oscillator length, m.
    pub(crate) length: f64,
    pub(crate) z_min: f64,
}

impl FieldState {
    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn amplitudes(&self, component: usize) -> &[Complex64] {
        &self.amplitudes[component]
    }

    pub fn n_points(&self) -> usize {
        self.amplitudes[0].len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn absorbed(&self) -> &[f64] {
        &self.absorbed
    }

    pub fn index_of(&self, label: ComponentLabel) -> Option<usize> {
        self.components.iter().position(|c| c.label == label)
    }

    /// On-grid norm of one component.
    pub fn grid_norm(&self, component: usize) -> f64 {
        self.amplitudes[component].iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dz
    }

    /// On-grid norm plus everything this component has lost to the absorbers.
    pub fn population(&self, component: usize) -> f64 {
        self.grid_norm(component) + self.absorbed[component]
    }

    pub fn population_of(&self, label: ComponentLabel) -> f64 {
        self.index_of(label).map_or(0.0, |i| self.population(i))
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.components.len()).map(|c| self.population(c)).collect()
    }

    /// Untrapped (and F=2 untrapped) population including absorbed atoms.
    pub fn outcoupled_fraction(&self) -> f64 {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.label.is_outcoupled())
            .map(|(i, _)| self.population(i))
            .sum()
    }

    /// Σ on-grid + Σ absorbed; one up to the ledger tolerance.
    pub fn total(&self) -> f64 {
        self.populations().iter().sum()
    }

    /// Positions in metres.
    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points())
            .map(|i| self.z_min + i as f64 * self.dz * self.length)
            .collect()
    }

    /// |ψ|² in 1/m.
    pub fn density(&self, component: usize) -> Vec<f64> {
        self.amplitudes[component]
            .iter()
            .map(|a| a.norm_sqr() / self.length)
            .collect()
    }

    pub fn total_density(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_points()];
        for c in 0..self.components.len() {
            for (o, a) in out.iter_mut().zip(&self.amplitudes[c]) {
                *o += a.norm_sqr() / self.length;
            }
        }
        out
    }

    pub fn phase(&self, component: usize) -> Vec<f64> {
        self.amplitudes[component].iter().map(|a| a.arg()).collect()
    }

    /// Grid spacing, m.
    pub fn dz_si(&self) -> f64 {
        self.dz * self.length
    }

    /// Centre of mass of one component's on-grid density, m.
    pub fn centre_of_mass(&self, component: usize) -> f64 {
        let z = self.positions();
        let (mut m0, mut m1) = (0.0, 0.0);
        for (zi, a) in z.iter().zip(&self.amplitudes[component]) {
            let n = a.norm_sqr();
            m0 += n;
            m1 += n * zi;
        }
        m1 / m0
    }

    /// ∫ over `[lo, hi)` of the total on-grid density.
    pub fn integrate_window(&self, lo: f64, hi: f64) -> f64 {
        self.window_by_component(lo, hi).iter().sum()
    }

    pub fn window_by_component(&self, lo: f64, hi: f64) -> Vec<f64> {
        let z = self.positions();
        (0..self.components.len())
            .map(|c| {
                z.iter()
                    .zip(&self.amplitudes[c])
                    .filter(|(zi, _)| **zi >= lo && **zi < hi)
                    .map(|(_, a)| a.norm_sqr())
                    .sum::<f64>()
                    * self.dz
            })
            .collect()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            time: self.time,
            z: self.positions(),
            components: self
                .components
                .iter()
                .enumerate()
                .map(|(c, spec)| ComponentSnapshot {
                    label: spec.label,
                    density: self.density(c),
                    phase: self.phase(c),
                    absorbed: self.absorbed[c],
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSnapshot {
    pub label: ComponentLabel,
    /// 1/m
    pub density: Vec<f64>,
    pub phase: Vec<f64>,
    pub absorbed: f64,
}

/// SI density and phase of every component at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub z: Vec<f64>,
    pub components: Vec<ComponentSnapshot>,
}

impl Snapshot {
    pub fn dz(&self) -> f64 {
        if self.z.len() > 1 {
            self.z[1] - self.z[0]
        } else {
            0.0
        }
    }

    pub fn index_of(&self, label: ComponentLabel) -> Option<usize> {
        self.components.iter().position(|c| c.label == label)
    }
}
