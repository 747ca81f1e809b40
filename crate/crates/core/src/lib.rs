//! Second-order RC equivalent circuit model of a lithium-ion cell with
//! SOC-dependent parameters, per-interval grey-box identification, and
//! Morris / enhanced Morris sensitivity screening.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, synthetic data
//! generators and the command line live in the `ecmsense` crate.
//!
//! Conventions used throughout:
//!
//! - state of charge `z` is a fraction in `[0, 1]`; percent appears only at
//!   interval boundaries and in file formats
//! - current is positive while discharging
//! - the five parameters are `{tau1, tau2, c1, c2, rs}` with `tau1 <= tau2`

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ecm;
pub mod error;
pub mod ident;
pub mod linalg;
pub mod metrics;
pub mod morris;
pub mod ocv;
pub mod params;
pub mod rng;
pub mod schedule;

pub use ecm::{
    coulomb_count, simulate, step, Capacity, CellConfig, CellState, CurrentProfile,
    ParameterLookup, Simulation, VoltageTrace,
};
pub use error::{Error, Result};
pub use metrics::ErrorMetrics;
pub use ocv::{OcvCurve, OcvSweep, SweepDirection};
pub use params::{FixedMask, Parameter, ParameterSet};
pub use schedule::{ParameterSchedule, SocInterval};

/// Slack allowed when comparing a Coulomb-counted state of charge with an
/// interval edge or a curve's valid range. Absorbs summation rounding so a
/// profile designed to discharge exactly 10 % lands on the edge.
pub const SOC_TOLERANCE: f64 = 1e-9;
