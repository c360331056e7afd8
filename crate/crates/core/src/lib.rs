//! Steady-state, noise and amplifier model of an optically pumped NV-diamond maser.
//!
//! The crate is organised bottom-up: [`params`] turns device inputs into rates,
//! [`meanfield`] and [`correlations`] find steady states, [`linewidth`] and
//! [`sensitivity`] compute fluctuation properties of the masing state,
//! [`amplifier`] handles the driven (input-output) problem, and [`dynamics`]
//! integrates the equations of motion in time and checks fixed-point stability.
//! [`sweep`] evaluates any of the above over a 2-D parameter grid.

pub mod amplifier;
pub mod cli;
pub mod config;
pub mod constants;
pub mod correlations;
pub mod cubic;
pub mod dynamics;
pub mod error;
pub mod golden;
pub mod linewidth;
pub mod meanfield;
pub mod numeric;
pub mod params;
pub mod sensitivity;
pub mod sweep;

pub use error::{MaserError, Result};
pub use params::{derive_rates, DerivedRates, SystemParams};
