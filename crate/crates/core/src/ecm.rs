//! Second-order RC equivalent circuit with polynomial OCV.
//!
//! States are the two RC-pair voltages and the state of charge:
//!
//! ```text
//! dV1/dt = -V1 / (R1 C1) + I / C1
//! dV2/dt = -V2 / (R2 C2) + I / C2
//! dZ/dt  = -I / Q
//! V      = Voc(Z) - V1 - V2 - I Rs
//! ```
//!
//! Current is positive while discharging. The system is diagonal, so the
//! zero-order-hold discretization is exact in closed form: for a step of
//! length `dt` with constant current, `V1' = a V1 + b I` where
//! `a = exp(-dt/tau1)` and `b = (tau1/C1)(1 - a)`.

use crate::error::{Error, Result};
use crate::ocv::OcvCurve;
use crate::params::ParameterSet;
use alloc::format;
use alloc::vec::Vec;

/// Cell capacity, stored in coulombs.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Capacity(f64);

impl Capacity {
    pub fn from_coulombs(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::invalid(format!("capacity must be positive, got {q} C")));
        }
        Ok(Capacity(q))
    }

    pub fn from_mah(mah: f64) -> Result<Self> {
        Self::from_coulombs(mah * 3.6)
    }

    pub fn coulombs(self) -> f64 {
        self.0
    }

    pub fn mah(self) -> f64 {
        self.0 / 3.6
    }

    /// Current that empties the cell in one hour, in amperes.
    pub fn one_c(self) -> f64 {
        self.0 / 3600.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub v1: f64,
    pub v2: f64,
    /// Normalized state of charge in `[0, 1]`.
    pub z: f64,
}

impl CellState {
    /// Rested cell: both RC pairs discharged.
    pub fn rested(z: f64) -> Self {
        CellState { v1: 0.0, v2: 0.0, z }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v1.is_finite() && self.v2.is_finite()) {
            return Err(Error::invalid("RC-pair voltages must be finite"));
        }
        if !(0.0..=1.0).contains(&self.z) {
            return Err(Error::OutOfRange {
                what: "state of charge",
                value: self.z,
                lo: 0.0,
                hi: 1.0,
                index: None,
            });
        }
        Ok(())
    }
}

/// Uniformly sampled current in amperes, positive for discharge.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentProfile {
    dt: f64,
    start_time: f64,
    samples: Vec<f64>,
}

impl CurrentProfile {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        Self::with_start(dt, samples, 0.0)
    }

    pub fn with_start(dt: f64, samples: Vec<f64>, start_time: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("sample period must be positive, got {dt}")));
        }
        if !start_time.is_finite() {
            return Err(Error::invalid("start time must be finite"));
        }
        if samples.len() < 2 {
            return Err(Error::invalid("a current profile needs at least two samples"));
        }
        if let Some(k) = samples.iter().position(|i| !i.is_finite()) {
            return Err(Error::invalid(format!("current sample {k} is not finite")));
        }
        Ok(CurrentProfile {
            dt,
            start_time,
            samples,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Net discharged charge in coulombs.
    pub fn charge(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt
    }

    pub fn slice(&self, range: core::ops::Range<usize>) -> Result<Self> {
        let start = self.time(range.start);
        let samples = self
            .samples
            .get(range.clone())
            .ok_or_else(|| Error::invalid("profile slice out of bounds"))?
            .to_vec();
        Self::with_start(self.dt, samples, start)
    }
}

/// Terminal voltage aligned sample for sample with a [`CurrentProfile`].
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    dt: f64,
    start_time: f64,
    samples: Vec<f64>,
}

impl VoltageTrace {
    pub fn new(dt: f64, start_time: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("sample period must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("voltage samples must be finite"));
        }
        Ok(VoltageTrace {
            dt,
            start_time,
            samples,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fails unless the trace has the same length and sample period as `profile`.
    pub fn check_aligned(&self, profile: &CurrentProfile) -> Result<()> {
        if self.samples.len() != profile.len() || self.dt != profile.dt() {
            return Err(Error::invalid(format!(
                "voltage trace ({} samples, dt {}) is not aligned with current profile ({} samples, dt {})",
                self.samples.len(),
                self.dt,
                profile.len(),
                profile.dt()
            )));
        }
        Ok(())
    }

    pub fn slice(&self, range: core::ops::Range<usize>) -> Result<Self> {
        let start = self.start_time + range.start as f64 * self.dt;
        let samples = self
            .samples
            .get(range)
            .ok_or_else(|| Error::invalid("trace slice out of bounds"))?
            .to_vec();
        Self::new(self.dt, start, samples)
    }
}

/// Anything that can supply the five model parameters at a state of charge.
pub trait ParameterLookup {
    fn parameters_at(&self, z: f64) -> Result<ParameterSet>;
}

impl ParameterLookup for ParameterSet {
    fn parameters_at(&self, _z: f64) -> Result<ParameterSet> {
        Ok(*self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CellConfig<'a, P: ParameterLookup + ?Sized> {
    pub capacity: Capacity,
    pub ocv: &'a OcvCurve,
    pub parameters: &'a P,
}

impl<'a, P: ParameterLookup + ?Sized> CellConfig<'a, P> {
    pub fn new(capacity: Capacity, ocv: &'a OcvCurve, parameters: &'a P) -> Self {
        CellConfig {
            capacity,
            ocv,
            parameters,
        }
    }
}

/// Exact one-step map of a single RC pair for a fixed step length.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PairMap {
    decay: f64,
    gain: f64,
}

impl PairMap {
    fn new(tau: f64, c: f64, dt: f64) -> Self {
        let x = -dt / tau;
        PairMap {
            decay: libm::exp(x),
            // (tau/C)(1 - e^x), with expm1 so huge tau keeps full precision
            gain: (tau / c) * -libm::expm1(x),
        }
    }

    fn apply(&self, v: f64, i: f64) -> f64 {
        self.decay * v + self.gain * i
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StepMap {
    pair1: PairMap,
    pair2: PairMap,
}

impl StepMap {
    fn new(p: &ParameterSet, dt: f64) -> Self {
        StepMap {
            pair1: PairMap::new(p.tau1(), p.c1(), dt),
            pair2: PairMap::new(p.tau2(), p.c2(), dt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: CellState,
    /// The state of charge left `[0, 1]` and was clamped.
    pub clamped: bool,
}

fn clamp_soc(z: f64) -> (f64, bool) {
    if z < 0.0 {
        (0.0, true)
    } else if z > 1.0 {
        (1.0, true)
    } else {
        (z, false)
    }
}

/// Advances the cell by one zero-order-hold step of current `i` over `dt`.
pub fn step(
    state: CellState,
    params: &ParameterSet,
    capacity: Capacity,
    i: f64,
    dt: f64,
) -> Result<StepOutcome> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("step length must be positive, got {dt}")));
    }
    if !i.is_finite() {
        return Err(Error::invalid("current must be finite"));
    }
    state.validate()?;
    let map = StepMap::new(params, dt);
    let (z, clamped) = clamp_soc(state.z - i * dt / capacity.coulombs());
    Ok(StepOutcome {
        state: CellState {
            v1: map.pair1.apply(state.v1, i),
            v2: map.pair2.apply(state.v2, i),
            z,
        },
        clamped,
    })
}

/// Result of [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub voltage: VoltageTrace,
    /// State of charge at each sample time, before that sample's step.
    pub soc: Vec<f64>,
    /// State after the final step; feed it back in to continue the run.
    pub final_state: CellState,
    /// First sample whose step pushed the state of charge out of `[0, 1]`.
    pub first_clamp: Option<usize>,
}

/// Simulates the terminal voltage for `profile` starting from `init`.
///
/// `V[k]` is evaluated from the state before step `k` and the held current
/// `I[k]`. Parameters are looked up from the state of charge at each sample.
/// The state of charge is the left Riemann sum
/// `z[k] = z0 - (dt/Q) sum_{j<k} I[j]`, matching [`coulomb_count`].
pub fn simulate<P: ParameterLookup + ?Sized>(
    profile: &CurrentProfile,
    cfg: &CellConfig<'_, P>,
    init: CellState,
) -> Result<Simulation> {
    init.validate()?;
    let dt = profile.dt();
    let scale = dt / cfg.capacity.coulombs();
    let n = profile.len();
    let mut voltage = Vec::with_capacity(n);
    let mut soc = Vec::with_capacity(n);
    let (mut v1, mut v2) = (init.v1, init.v2);
    let mut z = init.z;
    let mut discharged = 0.0;
    let mut first_clamp = None;
    let mut cached: Option<(ParameterSet, StepMap)> = None;

    for (k, &i) in profile.samples().iter().enumerate() {
        let params = cfg.parameters.parameters_at(z).map_err(|e| e.at_index(k))?;
        let ocv = cfg.ocv.eval(z).map_err(|e| e.at_index(k))?;
        voltage.push(ocv - v1 - v2 - i * params.rs());
        soc.push(z);

        let map = match cached {
            Some((p, m)) if p == params => m,
            _ => {
                let m = StepMap::new(&params, dt);
                cached = Some((params, m));
                m
            }
        };
        v1 = map.pair1.apply(v1, i);
        v2 = map.pair2.apply(v2, i);
        discharged += i;
        let (zc, clamped) = clamp_soc(init.z - scale * discharged);
        if clamped && first_clamp.is_none() {
            first_clamp = Some(k);
        }
        z = zc;
    }

    Ok(Simulation {
        voltage: VoltageTrace::new(dt, profile.start_time(), voltage)?,
        soc,
        final_state: CellState { v1, v2, z },
        first_clamp,
    })
}

/// Voltages across each RC pair from rest, sampled like [`simulate`].
pub fn rc_pair_voltages(profile: &CurrentProfile, params: &ParameterSet) -> [Vec<f64>; 2] {
    let map = StepMap::new(params, profile.dt());
    let (mut v1, mut v2) = (0.0, 0.0);
    let mut out = [Vec::with_capacity(profile.len()), Vec::with_capacity(profile.len())];
    for &i in profile.samples() {
        out[0].push(v1);
        out[1].push(v2);
        v1 = map.pair1.apply(v1, i);
        v2 = map.pair2.apply(v2, i);
    }
    out
}

/// `z[k] = z0 - (dt/q) sum_{j<k} I[j]` for `k = 0..=n`; the last entry is the
/// state of charge after the final sample. Values are not clamped.
pub fn coulomb_count(profile: &CurrentProfile, capacity: Capacity, z0: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&z0) {
        return Err(Error::OutOfRange {
            what: "initial state of charge",
            value: z0,
            lo: 0.0,
            hi: 1.0,
            index: None,
        });
    }
    let scale = profile.dt() / capacity.coulombs();
    let mut out = Vec::with_capacity(profile.len() + 1);
    let mut sum = 0.0;
    out.push(z0);
    for &i in profile.samples() {
        sum += i;
        out.push(z0 - scale * sum);
    }
    Ok(out)
}
