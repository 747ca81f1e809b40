//! The five identified quantities of the two-pair RC model.

use crate::error::{Error, Result};
use core::fmt;

/// Time constant used to switch an RC pair off (single-pair mode).
pub const DEGENERATE_TAU: f64 = 1e9;
/// Capacitance used together with [`DEGENERATE_TAU`].
pub const DEGENERATE_C: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parameter {
    Tau1,
    Tau2,
    C1,
    C2,
    Rs,
}

impl Parameter {
    pub const ALL: [Parameter; 5] = [
        Parameter::Tau1,
        Parameter::Tau2,
        Parameter::C1,
        Parameter::C2,
        Parameter::Rs,
    ];

    pub const fn index(self) -> usize {
        match self {
            Parameter::Tau1 => 0,
            Parameter::Tau2 => 1,
            Parameter::C1 => 2,
            Parameter::C2 => 3,
            Parameter::Rs => 4,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Parameter::Tau1 => "tau1",
            Parameter::Tau2 => "tau2",
            Parameter::C1 => "c1",
            Parameter::C2 => "c2",
            Parameter::Rs => "rs",
        }
    }

    pub const fn unit(self) -> &'static str {
        match self {
            Parameter::Tau1 | Parameter::Tau2 => "s",
            Parameter::C1 | Parameter::C2 => "F",
            Parameter::Rs => "ohm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `{tau1, tau2, c1, c2, rs}` for one SOC interval.
///
/// All values are strictly positive and finite. The pairs are kept in
/// canonical order, fast pair first (`tau1 <= tau2`); constructing a set
/// with the pairs the other way round swaps them. The model output does not
/// depend on the pair labels, so canonicalization never changes a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSet {
    tau1: f64,
    tau2: f64,
    c1: f64,
    c2: f64,
    rs: f64,
}

impl ParameterSet {
    pub fn new(tau1: f64, tau2: f64, c1: f64, c2: f64, rs: f64) -> Result<Self> {
        Self::from_array([tau1, tau2, c1, c2, rs])
    }

    /// Values in [`Parameter::ALL`] order.
    pub fn from_array(values: [f64; 5]) -> Result<Self> {
        for p in Parameter::ALL {
            let v = values[p.index()];
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(alloc::format!(
                    "{p} must be positive and finite, got {v}"
                )));
            }
        }
        let [tau1, tau2, c1, c2, rs] = values;
        let set = if tau1 > tau2 {
            ParameterSet {
                tau1: tau2,
                tau2: tau1,
                c1: c2,
                c2: c1,
                rs,
            }
        } else {
            ParameterSet {
                tau1,
                tau2,
                c1,
                c2,
                rs,
            }
        };
        Ok(set)
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.tau1, self.tau2, self.c1, self.c2, self.rs]
    }

    pub fn get(&self, p: Parameter) -> f64 {
        self.to_array()[p.index()]
    }

    /// Replaces one entry and re-canonicalizes.
    pub fn with(&self, p: Parameter, value: f64) -> Result<Self> {
        let mut values = self.to_array();
        values[p.index()] = value;
        Self::from_array(values)
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }
    pub fn tau2(&self) -> f64 {
        self.tau2
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn rs(&self) -> f64 {
        self.rs
    }

    /// R1 = tau1 / C1
    pub fn r1(&self) -> f64 {
        self.tau1 / self.c1
    }

    /// R2 = tau2 / C2
    pub fn r2(&self) -> f64 {
        self.tau2 / self.c2
    }

    /// A pure series resistor: both RC pairs switched off.
    pub fn series_resistor(rs: f64) -> Result<Self> {
        Self::new(DEGENERATE_TAU, DEGENERATE_TAU, DEGENERATE_C, DEGENERATE_C, rs)
    }

    /// One active RC pair; the second pair is switched off.
    pub fn single_pair(tau1: f64, c1: f64, rs: f64) -> Result<Self> {
        Self::new(tau1, DEGENERATE_TAU, c1, DEGENERATE_C, rs)
    }
}

/// Per-parameter flag: `true` means the parameter is held at its
/// across-interval mean instead of following the SOC schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FixedMask([bool; 5]);

impl FixedMask {
    pub const NONE: FixedMask = FixedMask([false; 5]);
    pub const ALL: FixedMask = FixedMask([true; 5]);

    pub fn of(params: &[Parameter]) -> Self {
        let mut mask = [false; 5];
        for p in params {
            mask[p.index()] = true;
        }
        FixedMask(mask)
    }

    pub fn is_fixed(&self, p: Parameter) -> bool {
        self.0[p.index()]
    }

    pub fn fixed(&self) -> impl Iterator<Item = Parameter> + '_ {
        Parameter::ALL.into_iter().filter(|p| self.is_fixed(*p))
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|f| **f).count()
    }
}
