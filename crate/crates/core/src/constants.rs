//! Physical constants (CODATA 2018 exact/recommended values), SI units.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const H_PLANCK: f64 = 2.0 * PI * HBAR;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Magnetic flux quantum h/2e, Wb.
pub const PHI0: f64 = 2.067_833_848e-15;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Weak-coupling BCS ratio Δ(0) / (k_B T_c).
pub const BCS_GAP_RATIO: f64 = 1.764;
