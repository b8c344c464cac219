//! Simulation and analysis toolkit for atom-laser outcoupling from a
//! magnetically trapped condensate: closed-form dressed-state estimates, a
//! multi-component 1D Gross-Pitaevskii engine, scripted outcoupling
//! protocols and saturating-exponential fits.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dressed;
pub mod error;
pub mod gpe;
pub mod io;
pub mod phys;
pub mod protocols;

pub use error::{Error, Result};
