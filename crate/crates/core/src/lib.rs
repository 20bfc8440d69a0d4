//! Stokes-Brinkman topology optimization of a morphing strip joining two
//! periodic lattice unit cells.
//!
//! Density convention: `rho = 1` is fluid (void channel), `rho = 0` is solid.
//! This is the opposite of the usual elasticity SIMP convention.

pub mod adapt;
pub mod config;
pub mod error;
pub mod fem;
pub mod flow;
pub mod geom;
pub mod io;
pub mod material;
pub mod mesh;
pub mod metrics;
pub mod optimize;
pub mod par;
pub mod pipeline;
pub mod verify;

pub use config::ConfluenceConfig;
pub use error::{Error, Result};
pub use pipeline::{run_confluence, sweep, ConfluenceResult};
