//! Multi-component 1D mean-field solver.

mod components;
mod coupling;
mod engine;
mod grid;
mod state;
mod units;

pub use components::{components_for, ComponentLabel, ComponentSpec};
pub use coupling::CouplingMatrix;
pub use engine::{
    thomas_fermi_radius, Engine, GroundStateReport, Hamiltonian, Numerics, Observation, ObservationSeries, ObserverConfig,
    Propagator, SimSetup,
};
pub use grid::Grid;
pub use state::{ComponentSnapshot, FieldState, Snapshot};
pub use units::Units;
