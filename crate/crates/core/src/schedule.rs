//! Per-SOC-interval parameter tables.

use crate::ecm::ParameterLookup;
use crate::error::{Error, Result};
use crate::params::{FixedMask, Parameter, ParameterSet};
use crate::SOC_TOLERANCE;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

/// `[hi, lo)` in percent, listed from high to low SOC.
///
/// A state of charge `z` belongs to the interval when
/// `lo/100 < z <= hi/100`, both edges shifted by [`SOC_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocInterval {
    hi: f64,
    lo: f64,
}

impl SocInterval {
    pub fn new(hi_percent: f64, lo_percent: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&hi_percent)
            || !(0.0..=100.0).contains(&lo_percent)
            || hi_percent <= lo_percent
        {
            return Err(Error::invalid(format!(
                "SOC interval [{hi_percent}%, {lo_percent}%) must have 100 >= hi > lo >= 0"
            )));
        }
        Ok(SocInterval {
            hi: hi_percent,
            lo: lo_percent,
        })
    }

    /// Consecutive intervals from a strictly descending list of edges in percent.
    pub fn from_edges(edges_percent: &[f64]) -> Result<Vec<Self>> {
        if edges_percent.len() < 2 {
            return Err(Error::invalid("need at least two SOC edges"));
        }
        if edges_percent.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("SOC edges must be strictly descending"));
        }
        edges_percent
            .windows(2)
            .map(|w| SocInterval::new(w[0], w[1]))
            .collect()
    }

    pub fn hi_percent(&self) -> f64 {
        self.hi
    }

    pub fn lo_percent(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi / 100.0
    }

    pub fn lo(&self) -> f64 {
        self.lo / 100.0
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.hi() + self.lo())
    }

    pub fn contains(&self, z: f64) -> bool {
        z <= self.hi() + SOC_TOLERANCE && z > self.lo() + SOC_TOLERANCE
    }
}

impl fmt::Display for SocInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.hi, self.lo)
    }
}

/// Returns true once `z` has reached `edge_percent` (within tolerance).
pub fn crossed(z: f64, edge_percent: f64) -> bool {
    z <= edge_percent / 100.0 + SOC_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LookupMode {
    /// Constant within each interval.
    #[default]
    PiecewiseConstant,
    /// Linear between interval midpoints, constant beyond the outermost ones.
    MidpointLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSchedule {
    intervals: Vec<(SocInterval, ParameterSet)>,
    fixed_mask: FixedMask,
    lookup: LookupMode,
    means: ParameterSet,
    stdevs: [f64; 5],
}

impl ParameterSchedule {
    /// Intervals must be contiguous and descending in SOC.
    pub fn new(intervals: Vec<(SocInterval, ParameterSet)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Structure("schedule has no intervals".into()));
        }
        for (k, w) in intervals.windows(2).enumerate() {
            let (a, b) = (w[0].0, w[1].0);
            if b.hi_percent() >= a.hi_percent() {
                return Err(Error::Structure(format!(
                    "interval {} ({b}) is not below interval {k} ({a})",
                    k + 1
                )));
            }
            if b.hi_percent() > a.lo_percent() {
                return Err(Error::Structure(format!("intervals {a} and {b} overlap")));
            }
            if b.hi_percent() < a.lo_percent() {
                return Err(Error::Structure(format!("gap between intervals {a} and {b}")));
            }
        }
        let (means, stdevs) = statistics(&intervals)?;
        Ok(ParameterSchedule {
            intervals,
            fixed_mask: FixedMask::NONE,
            lookup: LookupMode::default(),
            means,
            stdevs,
        })
    }

    pub fn intervals(&self) -> &[(SocInterval, ParameterSet)] {
        &self.intervals
    }

    pub fn fixed_mask(&self) -> FixedMask {
        self.fixed_mask
    }

    pub fn lookup_mode(&self) -> LookupMode {
        self.lookup
    }

    /// Across-interval means of each parameter.
    pub fn means(&self) -> ParameterSet {
        self.means
    }

    /// Across-interval sample standard deviations (n - 1 denominator), in
    /// [`Parameter::ALL`] order. Zero for a single interval.
    pub fn stdevs(&self) -> [f64; 5] {
        self.stdevs
    }

    pub fn stdev(&self, p: Parameter) -> f64 {
        self.stdevs[p.index()]
    }

    pub fn with_fixed(&self, mask: FixedMask) -> Self {
        ParameterSchedule {
            fixed_mask: mask,
            ..self.clone()
        }
    }

    pub fn with_lookup(&self, lookup: LookupMode) -> Self {
        ParameterSchedule {
            lookup,
            ..self.clone()
        }
    }

    /// `[lowest lo, highest hi]` as fractions.
    pub fn coverage(&self) -> (f64, f64) {
        (
            self.intervals[self.intervals.len() - 1].0.lo(),
            self.intervals[0].0.hi(),
        )
    }

    /// Index of the interval holding `z`; the bottom edge of the lowest
    /// interval is included so a profile may end exactly on it.
    pub fn interval_index(&self, z: f64) -> Option<usize> {
        if let Some(k) = self.intervals.iter().position(|(iv, _)| iv.contains(z)) {
            return Some(k);
        }
        let last = self.intervals.len() - 1;
        let lo = self.intervals[last].0.lo();
        if libm::fabs(z - lo) <= SOC_TOLERANCE {
            Some(last)
        } else {
            None
        }
    }

    fn raw_at(&self, z: f64) -> Result<[f64; 5]> {
        let k = self.interval_index(z).ok_or_else(|| {
            let (lo, hi) = self.coverage();
            Error::OutOfRange {
                what: "state of charge (schedule coverage)",
                value: z,
                lo,
                hi,
                index: None,
            }
        })?;
        match self.lookup {
            LookupMode::PiecewiseConstant => Ok(self.intervals[k].1.to_array()),
            LookupMode::MidpointLinear => Ok(self.interpolate(z)),
        }
    }

    fn interpolate(&self, z: f64) -> [f64; 5] {
        let n = self.intervals.len();
        let first = &self.intervals[0];
        if z >= first.0.midpoint() {
            return first.1.to_array();
        }
        let last = &self.intervals[n - 1];
        if z <= last.0.midpoint() {
            return last.1.to_array();
        }
        // midpoints descend with k
        let k = self
            .intervals
            .windows(2)
            .position(|w| z < w[0].0.midpoint() && z >= w[1].0.midpoint())
            .unwrap_or(n - 2);
        let (upper, lower) = (&self.intervals[k], &self.intervals[k + 1]);
        let (m_hi, m_lo) = (upper.0.midpoint(), lower.0.midpoint());
        let t = (z - m_lo) / (m_hi - m_lo);
        let (a, b) = (lower.1.to_array(), upper.1.to_array());
        core::array::from_fn(|j| a[j] + t * (b[j] - a[j]))
    }
}

impl ParameterLookup for ParameterSchedule {
    fn parameters_at(&self, z: f64) -> Result<ParameterSet> {
        let mut values = self.raw_at(z)?;
        let means = self.means.to_array();
        for p in self.fixed_mask.fixed() {
            values[p.index()] = means[p.index()];
        }
        ParameterSet::from_array(values)
    }
}

fn statistics(intervals: &[(SocInterval, ParameterSet)]) -> Result<(ParameterSet, [f64; 5])> {
    let n = intervals.len() as f64;
    // Shifted by the first row so identical rows give an exact mean.
    let base = intervals[0].1.to_array();
    let mut means = [0.0; 5];
    for (_, p) in intervals {
        for ((m, v), b) in means.iter_mut().zip(p.to_array()).zip(base) {
            *m += v - b;
        }
    }
    for (m, b) in means.iter_mut().zip(base) {
        *m = b + *m / n;
    }
    let mut stdevs = [0.0; 5];
    if intervals.len() > 1 {
        for (_, p) in intervals {
            for ((s, v), m) in stdevs.iter_mut().zip(p.to_array()).zip(means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stdevs {
            *s = libm::sqrt(*s / (n - 1.0));
        }
    }
    Ok((ParameterSet::from_array(means)?, stdevs))
}
