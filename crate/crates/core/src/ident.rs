//! Grey-box identification of `{tau1, tau2, c1, c2, rs}` per SOC interval.
//!
//! Drive-cycle data is cut into segments by Coulomb-counted state of charge.
//! Each segment is fitted by output-error least squares: the model is
//! simulated from a rested state over the segment and the sum of squared
//! voltage residuals is minimized with Levenberg-Marquardt over the logarithms
//! of the five parameters, using a central-difference Jacobian.

use crate::ecm::{coulomb_count, rc_pair_voltages, simulate, Capacity, CellConfig, CellState, CurrentProfile, VoltageTrace};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::metrics::ErrorMetrics;
use crate::ocv::OcvCurve;
use crate::params::{FixedMask, Parameter, ParameterSet};
use crate::schedule::{crossed, ParameterSchedule, SocInterval};
use crate::SOC_TOLERANCE;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

/// Minimum number of samples [`identify_segment`] accepts.
pub const MIN_SEGMENT_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub interval: SocInterval,
    /// Sample indices in the source profile.
    pub range: Range<usize>,
    pub profile: CurrentProfile,
    pub voltage: VoltageTrace,
    /// Coulomb-counted state of charge at the first sample.
    pub z_start: f64,
}

/// A rest is a run of `|I| < current_threshold` lasting longer than
/// `min_duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestDetection {
    pub current_threshold: f64,
    pub min_duration: f64,
}

impl RestDetection {
    /// `|I|` below C/500 for more than 60 s.
    pub fn for_capacity(capacity: Capacity) -> Self {
        RestDetection {
            current_threshold: capacity.one_c() / 500.0,
            min_duration: 60.0,
        }
    }

    /// Flags every sample that belongs to a rest.
    pub fn mask(&self, profile: &CurrentProfile) -> Vec<bool> {
        let samples = profile.samples();
        let mut mask = vec![false; samples.len()];
        let mut k = 0;
        while k < samples.len() {
            if libm::fabs(samples[k]) < self.current_threshold {
                let start = k;
                while k < samples.len() && libm::fabs(samples[k]) < self.current_threshold {
                    k += 1;
                }
                if (k - start) as f64 * profile.dt() > self.min_duration {
                    mask[start..k].iter_mut().for_each(|m| *m = true);
                }
            } else {
                k += 1;
            }
        }
        mask
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentationWarning {
    /// The data never reached the second edge.
    NoCrossing,
    /// The data ended before the last edge; the state of charge at the end is given.
    PartialCoverage { final_soc: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
    pub warnings: Vec<SegmentationWarning>,
}

/// Cuts `profile`/`voltage` at the first crossing of each edge (percent,
/// strictly descending). Leading and trailing rests are trimmed from each
/// segment; a rest enclosed by active samples stays in the segment so it
/// remains one contiguous record. Segments shorter than two samples are
/// dropped.
pub fn segment_by_soc(
    profile: &CurrentProfile,
    voltage: &VoltageTrace,
    capacity: Capacity,
    z0: f64,
    edges_percent: &[f64],
    rest: RestDetection,
) -> Result<Segmentation> {
    voltage.check_aligned(profile)?;
    let intervals = SocInterval::from_edges(edges_percent)?;
    if z0 < edges_percent[0] / 100.0 - SOC_TOLERANCE {
        return Err(Error::invalid(format!(
            "initial state of charge {}% is below the first edge {}%",
            z0 * 100.0,
            edges_percent[0]
        )));
    }
    let z = coulomb_count(profile, capacity, z0)?;
    let n = profile.len();
    let resting = rest.mask(profile);
    let first_crossing = |edge: f64| (0..n).find(|&k| crossed(z[k], edge));

    let mut segments = Vec::new();
    let mut warnings = Vec::new();
    for iv in &intervals {
        let Some(start) = first_crossing(iv.hi_percent()) else {
            break;
        };
        let end = first_crossing(iv.lo_percent()).unwrap_or(n);
        let mut a = start;
        let mut b = end;
        while a < b && resting[a] {
            a += 1;
        }
        while b > a && resting[b - 1] {
            b -= 1;
        }
        if b - a < 2 {
            continue;
        }
        segments.push(Segment {
            interval: *iv,
            range: a..b,
            profile: profile.slice(a..b)?,
            voltage: voltage.slice(a..b)?,
            z_start: z[a],
        });
    }

    let last_edge = edges_percent[edges_percent.len() - 1];
    if !z.iter().any(|&zk| crossed(zk, edges_percent[1])) {
        warnings.push(SegmentationWarning::NoCrossing);
    } else if !z.iter().any(|&zk| crossed(zk, last_edge)) {
        warnings.push(SegmentationWarning::PartialCoverage { final_soc: z[n] });
    }
    Ok(Segmentation { segments, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentOptions {
    /// Stop when an accepted step lowers the objective by less than this fraction.
    pub rel_cost_tol: f64,
    /// Stop when the log-parameter step is smaller than this relative to the iterate.
    pub rel_step_tol: f64,
    pub max_iterations: usize,
    /// Central-difference step in log-parameter space.
    pub fd_step: f64,
}

impl Default for IdentOptions {
    fn default() -> Self {
        IdentOptions {
            rel_cost_tol: 1e-10,
            rel_step_tol: 1e-8,
            max_iterations: 200,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdentWarning {
    /// `|ln tau1 - ln tau2| < 1e-3`: the two RC pairs cannot be told apart.
    IndistinguishableTimeConstants,
    /// RC pair 1 or 2 never contributes more than a millionth of the ohmic
    /// drop, so its time constant and capacitance are not identifiable.
    NegligiblePair(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: ParameterSet,
    pub rmse: f64,
    pub max_abs: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective `0.5 * sum r^2` after each accepted iteration, starting with the initial guess.
    pub objective_history: Vec<f64>,
    pub warnings: Vec<IdentWarning>,
}

/// Starting point: `tau1 = 10 s`, `tau2 = 100 s`, `C1 = C2 = 1000 F`, and
/// `Rs` from the voltage jump at the largest current step.
pub fn default_initial_guess(segment: &Segment) -> ParameterSet {
    let i = segment.profile.samples();
    let v = segment.voltage.samples();
    let mut best = (0.0, 0);
    for k in 1..i.len() {
        let di = libm::fabs(i[k] - i[k - 1]);
        if di > best.0 {
            best = (di, k);
        }
    }
    let mut rs = 0.01;
    if best.0 > 0.0 {
        let k = best.1;
        let est = -(v[k] - v[k - 1]) / (i[k] - i[k - 1]);
        if est.is_finite() && est > 0.0 {
            rs = est;
        }
    }
    ParameterSet::new(10.0, 100.0, 1000.0, 1000.0, rs).unwrap_or_else(|_| {
        ParameterSet::new(10.0, 100.0, 1000.0, 1000.0, 0.01).expect("constant guess is valid")
    })
}

struct Problem<'a> {
    profile: &'a CurrentProfile,
    measured: &'a [f64],
    ocv: &'a OcvCurve,
    capacity: Capacity,
    init: CellState,
}

impl Problem<'_> {
    fn params(x: &[f64; 5]) -> Option<ParameterSet> {
        ParameterSet::from_array(x.map(libm::exp)).ok()
    }

    /// `V_model - V_measured`, or `None` for an inadmissible point.
    fn residuals(&self, x: &[f64; 5]) -> Result<Option<Vec<f64>>> {
        let Some(p) = Self::params(x) else {
            return Ok(None);
        };
        let cfg = CellConfig::new(self.capacity, self.ocv, &p);
        let sim = simulate(self.profile, &cfg, self.init)?;
        let r: Vec<f64> = sim
            .voltage
            .samples()
            .iter()
            .zip(self.measured)
            .map(|(m, y)| m - y)
            .collect();
        Ok(if r.iter().all(|v| v.is_finite()) { Some(r) } else { None })
    }

    fn jacobian(&self, x: &[f64; 5], h: f64, n: usize) -> Result<Option<Vec<f64>>> {
        let mut jac = vec![0.0; n * 5];
        for j in 0..5 {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let (Some(rp), Some(rm)) = (self.residuals(&xp)?, self.residuals(&xm)?) else {
                return Ok(None);
            };
            for k in 0..n {
                jac[k * 5 + j] = (rp[k] - rm[k]) / (2.0 * h);
            }
        }
        Ok(Some(jac))
    }
}

fn half_sum_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Fits one segment, simulating from the rested state `(0, 0, z_start)`.
pub fn identify_segment(
    segment: &Segment,
    ocv: &OcvCurve,
    capacity: Capacity,
    init_guess: &ParameterSet,
    options: &IdentOptions,
) -> Result<FitReport> {
    let n = segment.profile.len();
    if n < MIN_SEGMENT_SAMPLES {
        return Err(Error::invalid(format!(
            "segment {} has {n} samples, need at least {MIN_SEGMENT_SAMPLES}",
            segment.interval
        )));
    }
    segment.voltage.check_aligned(&segment.profile)?;
    let problem = Problem {
        profile: &segment.profile,
        measured: segment.voltage.samples(),
        ocv,
        capacity,
        init: CellState::rested(segment.z_start),
    };

    let mut x = init_guess.to_array().map(libm::log);
    let mut r = problem
        .residuals(&x)?
        .ok_or_else(|| Error::invalid("initial guess produces a non-finite simulation"))?;
    let mut cost = half_sum_sq(&r);
    let mut history = vec![cost];
    let mut mu = 1e-3;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut converged = cost == 0.0;

    'outer: while !converged && iterations < options.max_iterations {
        let Some(jac) = problem.jacobian(&x, options.fd_step, n)? else {
            break;
        };
        let mut diag = [0.0; 5];
        for k in 0..n {
            for j in 0..5 {
                diag[j] += jac[k * 5 + j] * jac[k * 5 + j];
            }
        }
        let max_diag = diag.iter().fold(0.0f64, |m, d| m.max(*d));
        if max_diag == 0.0 {
            converged = true;
            break;
        }
        let floor = 1e-12 * max_diag;
        for d in &mut diag {
            *d = d.max(floor);
        }

        loop {
            iterations += 1;
            // [J; sqrt(mu D)] delta = [-r; 0]
            let mut a = Vec::with_capacity((n + 5) * 5);
            a.extend_from_slice(&jac);
            for j in 0..5 {
                for c in 0..5 {
                    a.push(if c == j { libm::sqrt(mu * diag[j]) } else { 0.0 });
                }
            }
            let mut b: Vec<f64> = r.iter().map(|v| -v).collect();
            b.extend_from_slice(&[0.0; 5]);

            let step = least_squares(n + 5, 5, &a, &b).ok();
            let rel_step = step
                .as_ref()
                .map(|d| norm(d) / (norm(&x) + options.rel_step_tol))
                .unwrap_or(f64::INFINITY);

            if let Some(delta) = step {
                let trial: [f64; 5] = core::array::from_fn(|j| x[j] + delta[j]);
                if let Some(rt) = problem.residuals(&trial)? {
                    let trial_cost = half_sum_sq(&rt);
                    if trial_cost < cost {
                        // predicted decrease of the linear model
                        let mut lin = r.clone();
                        for (k, l) in lin.iter_mut().enumerate() {
                            for j in 0..5 {
                                *l += jac[k * 5 + j] * delta[j];
                            }
                        }
                        let predicted = cost - half_sum_sq(&lin);
                        let rho = if predicted > 0.0 {
                            (cost - trial_cost) / predicted
                        } else {
                            1.0
                        };
                        let rel_decrease = (cost - trial_cost) / cost;
                        x = trial;
                        r = rt;
                        cost = trial_cost;
                        history.push(cost);
                        let t = 2.0 * rho - 1.0;
                        mu *= (1.0 - t * t * t).max(1.0 / 3.0);
                        nu = 2.0;
                        if rel_decrease < options.rel_cost_tol
                            || rel_step < options.rel_step_tol
                            || cost == 0.0
                        {
                            converged = true;
                        }
                        continue 'outer;
                    }
                }
            }
            if rel_step < options.rel_step_tol {
                converged = true;
                break 'outer;
            }
            if iterations >= options.max_iterations {
                break 'outer;
            }
            mu *= nu;
            nu *= 2.0;
        }
    }

    let params = Problem::params(&x).ok_or_else(|| Error::invalid("fit left the admissible region"))?;
    let metrics = ErrorMetrics::from_residuals(&r);
    let mut warnings = Vec::new();
    if libm::fabs(libm::log(params.tau1()) - libm::log(params.tau2())) < 1e-3 {
        warnings.push(IdentWarning::IndistinguishableTimeConstants);
    }
    let ohmic = params.rs() * segment.profile.samples().iter().fold(0.0f64, |m, i| m.max(libm::fabs(*i)));
    let pairs = rc_pair_voltages(&segment.profile, &params);
    for (k, trace) in pairs.iter().enumerate() {
        let peak = trace.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        if peak < 1e-6 * ohmic {
            warnings.push(IdentWarning::NegligiblePair(k as u8 + 1));
        }
    }
    Ok(FitReport {
        params,
        rmse: metrics.rmse,
        max_abs: metrics.max_abs,
        iterations,
        converged,
        objective_history: history,
        warnings,
    })
}

/// Assembles identified sets into a schedule; intervals must be contiguous
/// and descending.
pub fn build_schedule(reports: &[(SocInterval, FitReport)]) -> Result<ParameterSchedule> {
    ParameterSchedule::new(reports.iter().map(|(iv, r)| (*iv, r.params)).collect())
}

/// One replay scenario: the parameters in `fixed` are held at their means.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCase {
    pub name: String,
    pub fixed: FixedMask,
}

impl ValidationCase {
    pub fn new(name: impl Into<String>, fixed: FixedMask) -> Self {
        ValidationCase {
            name: name.into(),
            fixed,
        }
    }

    /// Case 1: everything follows the schedule. Case 2: the parameters in
    /// `reduced` are fixed. Case 3: all five fixed.
    pub fn standard(reduced: FixedMask) -> Vec<Self> {
        vec![
            ValidationCase::new("case1", FixedMask::NONE),
            ValidationCase::new("case2", reduced),
            ValidationCase::new("case3", FixedMask::ALL),
        ]
    }

    /// `C1`, `C2` and `tau1` fixed.
    pub fn default_reduced_mask() -> FixedMask {
        FixedMask::of(&[Parameter::C1, Parameter::C2, Parameter::Tau1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub case: ValidationCase,
    pub metrics: ErrorMetrics,
    /// `V_model - V_measured` per sample.
    pub errors: Vec<f64>,
}

/// Replays `profile` through the schedule once per case and scores each
/// against the measured voltage.
pub fn validate_cases(
    profile: &CurrentProfile,
    voltage: &VoltageTrace,
    schedule: &ParameterSchedule,
    ocv: &OcvCurve,
    capacity: Capacity,
    init: CellState,
    cases: &[ValidationCase],
) -> Result<Vec<CaseResult>> {
    voltage.check_aligned(profile)?;
    cases
        .iter()
        .map(|case| {
            let sched = schedule.with_fixed(case.fixed);
            let cfg = CellConfig::new(capacity, ocv, &sched);
            let sim = simulate(profile, &cfg, init)?;
            let errors: Vec<f64> = sim
                .voltage
                .samples()
                .iter()
                .zip(voltage.samples())
                .map(|(m, y)| m - y)
                .collect();
            Ok(CaseResult {
                case: case.clone(),
                metrics: ErrorMetrics::from_residuals(&errors),
                errors,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecm::ParameterLookup;

    fn ocv() -> OcvCurve {
        OcvCurve::new(vec![3.3, 0.9, -0.2], 0.0, 1.0).unwrap()
    }

    /// Pulse train with pseudo-random levels and durations (xorshift), mean positive.
    fn pulses(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.max(1);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let level = -0.3 + 1.5 * next();
            let len = 3 + (next() * 60.0) as usize;
            for _ in 0..len.min(n - out.len()) {
                out.push(level);
            }
        }
        out
    }

    fn segment_from(truth: &ParameterSet, n: usize, z0: f64) -> Segment {
        let q = Capacity::from_mah(740.0).unwrap();
        let ocv = ocv();
        let profile = CurrentProfile::new(1.0, pulses(n, 42)).unwrap();
        let sim = simulate(&profile, &CellConfig::new(q, &ocv, truth), CellState::rested(z0)).unwrap();
        Segment {
            interval: SocInterval::new(100.0, 0.0).unwrap(),
            range: 0..n,
            profile,
            voltage: sim.voltage,
            z_start: z0,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rest_mask() {
        let mut i = vec![1.0; 10];
        i.extend(vec![0.0; 70]);
        i.extend(vec![1.0; 5]);
        i.extend(vec![0.0; 30]);
        let p = CurrentProfile::new(1.0, i).unwrap();
        let m = RestDetection {
            current_threshold: 1e-3,
            min_duration: 60.0,
        }
        .mask(&p);
        assert!(!m[9] && m[10] && m[79] && !m[80]);
        assert!(m[85..].iter().all(|x| !x));
    }

    #[test]
    fn constant_discharge_gives_nine_equal_segments() {
        let q = Capacity::from_mah(740.0).unwrap();
        let p = CurrentProfile::new(1.0, vec![q.one_c(); 3600]).unwrap();
        let v = VoltageTrace::new(1.0, 0.0, vec![3.7; 3600]).unwrap();
        let edges: Vec<f64> = (1..=10).rev().map(|k| k as f64 * 10.0).collect();
        let seg = segment_by_soc(&p, &v, q, 1.0, &edges, RestDetection::for_capacity(q)).unwrap();
        assert_eq!(seg.segments.len(), 9);
        assert!(seg.warnings.is_empty());
        for (k, s) in seg.segments.iter().enumerate() {
            assert_eq!(s.profile.len(), 360, "segment {k}");
            assert_eq!(s.range.start, 360 * k);
        }
    }

    #[test]
    fn zero_current_gives_no_segments() {
        let q = Capacity::from_mah(740.0).unwrap();
        let p = CurrentProfile::new(1.0, vec![0.0; 500]).unwrap();
        let v = VoltageTrace::new(1.0, 0.0, vec![4.1; 500]).unwrap();
        let edges = [100.0, 90.0, 80.0];
        let seg = segment_by_soc(&p, &v, q, 1.0, &edges, RestDetection::for_capacity(q)).unwrap();
        assert!(seg.segments.is_empty());
        assert_eq!(seg.warnings, vec![SegmentationWarning::NoCrossing]);
    }

    #[test]
    fn partial_coverage_warning() {
        let q = Capacity::from_mah(740.0).unwrap();
        let p = CurrentProfile::new(1.0, vec![q.one_c(); 500]).unwrap();
        let v = VoltageTrace::new(1.0, 0.0, vec![4.1; 500]).unwrap();
        let seg = segment_by_soc(&p, &v, q, 1.0, &[100.0, 90.0, 80.0], RestDetection::for_capacity(q))
            .unwrap();
        assert_eq!(seg.segments.len(), 2);
        assert_eq!(seg.segments[1].profile.len(), 140);
        assert!(matches!(seg.warnings[0], SegmentationWarning::PartialCoverage { .. }));
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let truth = ParameterSet::new(10.0, 100.0, 500.0, 5000.0, 0.03).unwrap();
        let seg = segment_from(&truth, 1500, 0.95);
        let guess = default_initial_guess(&seg);
        let rep = identify_segment(&seg, &ocv(), Capacity::from_mah(740.0).unwrap(), &guess, &IdentOptions::default())
            .unwrap();
        assert!(rep.converged);
        for p in Parameter::ALL {
            assert!(rel(rep.params.get(p), truth.get(p)) < 5e-3, "{p}: {}", rep.params.get(p));
        }
        assert!(rep.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn swapped_pair_labels_give_same_result() {
        let truth = ParameterSet::new(10.0, 100.0, 500.0, 5000.0, 0.03).unwrap();
        let seg = segment_from(&truth, 1500, 0.95);
        let q = Capacity::from_mah(740.0).unwrap();
        let opts = IdentOptions::default();
        let a = ParameterSet::new(20.0, 60.0, 800.0, 2000.0, 0.02).unwrap();
        // raw order with the slow pair listed first; construction canonicalizes it
        let b = ParameterSet::from_array([60.0, 20.0, 2000.0, 800.0, 0.02]).unwrap();
        let ra = identify_segment(&seg, &ocv(), q, &a, &opts).unwrap();
        let rb = identify_segment(&seg, &ocv(), q, &b, &opts).unwrap();
        assert!(ra.params.tau1() <= ra.params.tau2());
        for p in Parameter::ALL {
            assert!(rel(ra.params.get(p), rb.params.get(p)) < 1e-6);
        }
    }

    #[test]
    fn series_resistor_only() {
        let truth = ParameterSet::series_resistor(0.045).unwrap();
        let seg = segment_from(&truth, 400, 0.9);
        let guess = ParameterSet::series_resistor(0.02).unwrap();
        let rep = identify_segment(&seg, &ocv(), Capacity::from_mah(740.0).unwrap(), &guess, &IdentOptions::default())
            .unwrap();
        assert!(rel(rep.params.rs(), 0.045) <= 1e-6, "{}", rep.params.rs());
        assert!(rep.warnings.contains(&IdentWarning::NegligiblePair(1)));
        assert!(rep.warnings.contains(&IdentWarning::NegligiblePair(2)));
    }

    #[test]
    fn short_segment_rejected() {
        let truth = ParameterSet::new(10.0, 100.0, 500.0, 5000.0, 0.03).unwrap();
        let seg = segment_from(&truth, 40, 0.9);
        assert!(identify_segment(&seg, &ocv(), Capacity::from_mah(740.0).unwrap(), &truth, &IdentOptions::default())
            .is_err());
    }

    #[test]
    fn validation_self_consistency_and_constant_schedule() {
        let q = Capacity::from_mah(740.0).unwrap();
        let ocv = ocv();
        let iv = SocInterval::from_edges(&[100.0, 80.0, 60.0]).unwrap();
        let a = ParameterSet::new(10.0, 100.0, 500.0, 5000.0, 0.03).unwrap();
        let b = ParameterSet::new(14.0, 160.0, 700.0, 4000.0, 0.05).unwrap();
        let sched = ParameterSchedule::new(vec![(iv[0], a), (iv[1], b)]).unwrap();
        let profile = CurrentProfile::new(1.0, pulses(1500, 9)).unwrap();
        let init = CellState::rested(0.99);
        let measured = simulate(&profile, &CellConfig::new(q, &ocv, &sched), init).unwrap().voltage;
        let cases = ValidationCase::standard(ValidationCase::default_reduced_mask());
        let res = validate_cases(&profile, &measured, &sched, &ocv, q, init, &cases).unwrap();
        assert_eq!(res[0].metrics.rmse, 0.0);
        assert!(res[1].metrics.rmse > 0.0);
        assert!(res[2].metrics.rmse >= res[1].metrics.rmse);

        let flat = ParameterSchedule::new(vec![(iv[0], a), (iv[1], a)]).unwrap();
        let res = validate_cases(&profile, &measured, &flat, &ocv, q, init, &cases).unwrap();
        assert_eq!(res[0].metrics, res[1].metrics);
        assert_eq!(res[1].metrics, res[2].metrics);
        assert_eq!(flat.with_fixed(FixedMask::ALL).parameters_at(0.7).unwrap(), a);
    }
}
