//! Physical constants (CODATA 2018, SI units).

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permeability, N/A².
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Speed of light in vacuum, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

/// Tesla per Gauss.
pub const TESLA_PER_GAUSS: f64 = 1.0e-4;

pub const TWO_PI: f64 = std::f64::consts::TAU;
