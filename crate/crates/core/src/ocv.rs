//! Open-circuit voltage as a polynomial in state of charge.
//!
//! Sweeps measured while charging and discharging are averaged to cancel
//! hysteresis, then fitted by least squares. The fit is solved with a
//! Householder QR factorization of the column-scaled Vandermonde matrix, and
//! the stored coefficients are plain monomial coefficients in `z` (fraction,
//! not percent).

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::metrics::ErrorMetrics;
use crate::SOC_TOLERANCE;
use alloc::format;
use alloc::vec::Vec;

pub const DEFAULT_DEGREE: usize = 10;

/// `V_oc(z) = sum_k a_k z^k` on `[z_lo, z_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcvCurve {
    coefficients: Vec<f64>,
    valid_range: (f64, f64),
}

impl OcvCurve {
    pub fn new(coefficients: Vec<f64>, z_lo: f64, z_hi: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("an OCV curve needs at least one coefficient"));
        }
        if coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("OCV coefficients must be finite"));
        }
        if !(0.0..=1.0).contains(&z_lo) || !(0.0..=1.0).contains(&z_hi) || z_lo >= z_hi {
            return Err(Error::invalid(format!(
                "OCV valid range [{z_lo}, {z_hi}] must satisfy 0 <= lo < hi <= 1"
            )));
        }
        Ok(OcvCurve {
            coefficients,
            valid_range: (z_lo, z_hi),
        })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn valid_range(&self) -> (f64, f64) {
        self.valid_range
    }

    pub fn contains(&self, z: f64) -> bool {
        let (lo, hi) = self.valid_range;
        z >= lo - SOC_TOLERANCE && z <= hi + SOC_TOLERANCE
    }

    /// Evaluates the polynomial; `z` outside the valid range is an error.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if !self.contains(z) {
            let (lo, hi) = self.valid_range;
            return Err(Error::OutOfRange {
                what: "state of charge",
                value: z,
                lo,
                hi,
                index: None,
            });
        }
        Ok(self.eval_unchecked(z))
    }

    /// Horner evaluation without the range check.
    pub fn eval_unchecked(&self, z: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, a| acc * z + a)
    }

    /// dV/dz
    pub fn derivative(&self, z: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, a)| acc * z + k as f64 * a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Charge,
    Discharge,
    Averaged,
}

/// Voltage samples over a strictly monotone SOC grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OcvSweep {
    grid: Vec<f64>,
    voltages: Vec<f64>,
    direction: SweepDirection,
}

impl OcvSweep {
    pub fn new(grid: Vec<f64>, voltages: Vec<f64>, direction: SweepDirection) -> Result<Self> {
        if grid.len() != voltages.len() {
            return Err(Error::invalid("sweep grid and voltages differ in length"));
        }
        if grid.len() < 2 {
            return Err(Error::invalid("a sweep needs at least two points"));
        }
        if grid.iter().chain(&voltages).any(|v| !v.is_finite()) {
            return Err(Error::invalid("sweep values must be finite"));
        }
        let increasing = grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::invalid("sweep grid must be strictly monotone"));
        }
        Ok(OcvSweep {
            grid,
            voltages,
            direction,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }

    pub fn direction(&self) -> SweepDirection {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `(min, max)` of the grid.
    pub fn range(&self) -> (f64, f64) {
        let (a, b) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn ascending(&self) -> (Vec<f64>, Vec<f64>) {
        if self.grid[0] < self.grid[1] {
            (self.grid.clone(), self.voltages.clone())
        } else {
            (
                self.grid.iter().rev().copied().collect(),
                self.voltages.iter().rev().copied().collect(),
            )
        }
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let k = grid.partition_point(|g| *g <= x);
    if k == 0 {
        return values[0];
    }
    if k >= grid.len() {
        return values[grid.len() - 1];
    }
    let (x0, x1) = (grid[k - 1], grid[k]);
    let t = (x - x0) / (x1 - x0);
    values[k - 1] + t * (values[k] - values[k - 1])
}

/// Pointwise mean of a charge and a discharge sweep on the intersection of
/// their SOC ranges.
///
/// Both sweeps are linearly resampled onto a uniform grid with as many points
/// as the denser sweep before averaging.
pub fn average_sweeps(charge: &OcvSweep, discharge: &OcvSweep) -> Result<OcvSweep> {
    let (c_lo, c_hi) = charge.range();
    let (d_lo, d_hi) = discharge.range();
    let lo = c_lo.max(d_lo);
    let hi = c_hi.min(d_hi);
    if lo >= hi {
        return Err(Error::OutOfRange {
            what: "sweep overlap",
            value: hi - lo,
            lo: 0.0,
            hi: 1.0,
            index: None,
        });
    }
    let n = charge.len().max(discharge.len());
    let (cg, cv) = charge.ascending();
    let (dg, dv) = discharge.ascending();
    let mut grid = Vec::with_capacity(n);
    let mut voltages = Vec::with_capacity(n);
    for k in 0..n {
        let z = if k == n - 1 {
            hi
        } else {
            lo + (hi - lo) * (k as f64) / ((n - 1) as f64)
        };
        let vc = interpolate(&cg, &cv, z);
        let vd = interpolate(&dg, &dv, z);
        grid.push(z);
        voltages.push(0.5 * (vc + vd));
    }
    OcvSweep::new(grid, voltages, SweepDirection::Averaged)
}

/// A fitted curve together with its training residuals `V_oc(z_i) - v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFit {
    pub curve: OcvCurve,
    pub residuals: Vec<f64>,
}

impl PolynomialFit {
    pub fn metrics(&self) -> ErrorMetrics {
        ErrorMetrics::from_residuals(&self.residuals)
    }
}

pub fn fit_polynomial(sweep: &OcvSweep, degree: usize) -> Result<PolynomialFit> {
    fit_points(sweep.grid(), sweep.voltages(), degree)
}

/// Least-squares polynomial through arbitrary `(z, v)` points. The valid
/// range of the result is `[min z, max z]`.
pub fn fit_points(z: &[f64], v: &[f64], degree: usize) -> Result<PolynomialFit> {
    if degree < 1 {
        return Err(Error::invalid("polynomial degree must be at least 1"));
    }
    if z.len() != v.len() {
        return Err(Error::invalid("abscissae and values differ in length"));
    }
    let cols = degree + 1;
    if z.len() < cols {
        return Err(Error::Conditioning(format!(
            "{} points cannot determine a degree-{degree} polynomial",
            z.len()
        )));
    }
    if z.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::invalid("fit data must be finite"));
    }
    let mut a = Vec::with_capacity(z.len() * cols);
    for &zi in z {
        let mut p = 1.0;
        for _ in 0..cols {
            a.push(p);
            p *= zi;
        }
    }
    let coefficients = least_squares(z.len(), cols, &a, v)?;
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let curve = OcvCurve::new(coefficients, lo, hi)?;
    let residuals = z
        .iter()
        .zip(v)
        .map(|(&zi, &vi)| curve.eval_unchecked(zi) - vi)
        .collect();
    Ok(PolynomialFit { curve, residuals })
}

/// RMSE and max error of `curve` against every point of `sweep`.
pub fn fit_metrics(curve: &OcvCurve, sweep: &OcvSweep) -> Result<ErrorMetrics> {
    let mut residuals = Vec::with_capacity(sweep.len());
    for (k, (&z, &v)) in sweep.grid().iter().zip(sweep.voltages()).enumerate() {
        residuals.push(curve.eval(z).map_err(|e| e.at_index(k))? - v);
    }
    Ok(ErrorMetrics::from_residuals(&residuals))
}
