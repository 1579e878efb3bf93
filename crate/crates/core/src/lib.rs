//! Numerical toolkit for lumped-element superconducting microwave resonators.
//!
//! The crate covers the full analysis chain for hanger-coupled resonators:
//!
//! - [`s21`]: notch-type transmission forward model, photon number, and
//!   point-to-detuning inversion.
//! - [`circle_fit`]: extraction of quality factors from complex sweeps.
//! - [`inductance`]: kinetic-inductance fraction, sheet-inductance
//!   regression and characteristic impedance.
//! - [`jja`]: effective Josephson-junction-array model of a strip inductor.
//! - [`loss`]: participation-ratio loss budgets and TLS saturation fits.
//! - [`qp`]: quasiparticle burst dynamics.
//! - [`mattis_bardeen`]: BCS complex conductivity and the temperature
//!   dependence of the resonance frequency.
//! - [`synth`]: seeded synthetic measurements for round-trip validation.
//! - [`io`]: configuration, trace ingestion and report formats.
//!
//! All quantities are SI internally. Unit conversion happens only in [`io`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod circle_fit;
pub mod constants;
pub mod error;
pub mod inductance;
pub mod io;
pub mod jja;
pub mod loss;
pub mod mattis_bardeen;
pub mod model;
pub mod numeric;
pub mod qp;
pub mod s21;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    CircuitModel, ComplexTrace, DeviceGeometry, FilmProperties, FitReport, GapSource,
    HangerParams, ParamEstimate, SweepAxis,
};
