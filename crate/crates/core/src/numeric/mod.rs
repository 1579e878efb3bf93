//! Numerical building blocks shared by the fitters.

pub mod lm;
pub mod ode;
pub mod quad;
pub mod roots;
pub mod stats;
