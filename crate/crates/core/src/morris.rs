//! Morris and enhanced Morris screening.
//!
//! Each run draws a start point `theta` with `theta_i ~ N(mu_i, sigma_i)`
//! (independent components, `sigma` a standard deviation), then for every
//! parameter computes the elementary effect
//!
//! ```text
//! xi_i = reduce(y(theta) - y(theta with theta_i + delta * sigma_i)) / delta
//! ```
//!
//! where `reduce` collapses the output difference over time into a scalar.
//! The sign follows `y(theta) - y(perturbed)`, the negative of the usual
//! Morris convention. Over `N` runs the Morris statistic is `mean(xi)` and
//! the enhanced statistic is `mean(|xi|)`.
//!
//! Run `k` of group `j` always draws from [`rng::stream`]`(seed, j, k)`, so a
//! report is a pure function of its inputs whatever order the runs execute in.

use crate::ecm::{simulate, Capacity, CellConfig, CellState, CurrentProfile};
use crate::error::{Error, Result};
use crate::ocv::OcvCurve;
use crate::params::{Parameter, ParameterSet};
use crate::rng::{self, Stream};
use crate::schedule::ParameterSchedule;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use rand_distr::{Distribution, StandardNormal};

/// Redraws allowed per component before sampling gives up.
pub const MAX_SAMPLING_ATTEMPTS: usize = 100;

/// Why a run was excluded from aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidRun {
    /// The state of charge left `[0, 1]` during a simulation.
    SocClamp,
    /// A perturbed point left the admissible region.
    Inadmissible,
}

pub enum Response {
    Valid(Vec<f64>),
    Invalid(InvalidRun),
}

/// A model `y(t; theta)` whose output is a time series.
pub trait ResponseModel {
    fn parameter_names(&self) -> Vec<String>;

    /// Whether `value` is allowed for parameter `index`.
    fn admissible(&self, _index: usize, value: f64) -> bool {
        value.is_finite()
    }

    fn response(&self, theta: &[f64]) -> Result<Response>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDistribution {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl ParameterDistribution {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() || mu.is_empty() {
            return Err(Error::invalid("mean and standard deviation vectors must match"));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("means must be finite"));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("standard deviations must be finite and non-negative"));
        }
        Ok(ParameterDistribution { mu, sigma })
    }

    /// Means from `set`, standard deviations in [`Parameter::ALL`] order.
    pub fn around(set: &ParameterSet, sigma: [f64; 5]) -> Result<Self> {
        Self::new(set.to_array().to_vec(), sigma.to_vec())
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.mu.clone(), self.sigma.iter().map(|s| s * factor).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Mean of the difference trace over time; keeps the sign.
    #[default]
    SignedMean,
    /// Root mean square of the difference trace over time.
    Rms,
}

impl Reduction {
    pub fn apply(self, diff: &[f64]) -> f64 {
        let n = diff.len() as f64;
        match self {
            Reduction::SignedMean => diff.iter().sum::<f64>() / n,
            Reduction::Rms => libm::sqrt(diff.iter().map(|d| d * d).sum::<f64>() / n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorrisConfig {
    pub n_runs: usize,
    pub delta: f64,
    pub seed: u64,
    pub reduction: Reduction,
    /// Redraw the start point when a run is invalid instead of dropping it.
    pub resample_on_invalid: bool,
}

impl Default for MorrisConfig {
    fn default() -> Self {
        MorrisConfig {
            n_runs: 1024,
            delta: 1.0,
            seed: 0,
            reduction: Reduction::SignedMean,
            resample_on_invalid: false,
        }
    }
}

impl MorrisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs < 1 {
            return Err(Error::invalid("at least one Morris run is required"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Draws each component from its normal distribution, redrawing values the
/// model does not admit.
pub fn sample_start_point<M: ResponseModel + ?Sized>(
    model: &M,
    dist: &ParameterDistribution,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let mut theta = Vec::with_capacity(dist.len());
    for (i, (&mu, &sigma)) in dist.mu().iter().zip(dist.sigma()).enumerate() {
        let mut attempts = 0;
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let v = mu + sigma * z;
            attempts += 1;
            if model.admissible(i, v) {
                theta.push(v);
                break;
            }
            if attempts >= MAX_SAMPLING_ATTEMPTS {
                let name = model
                    .parameter_names()
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| i.to_string());
                return Err(Error::Sampling {
                    parameter: name,
                    attempts,
                });
            }
        }
    }
    Ok(theta)
}

/// Positive-parameter draw for the cell model.
pub fn sample_parameter_set(dist: &ParameterDistribution, rng: &mut Stream) -> Result<ParameterSet> {
    let model = PositiveFive;
    let theta = sample_start_point(&model, dist, rng)?;
    ParameterSet::from_array([theta[0], theta[1], theta[2], theta[3], theta[4]])
}

struct PositiveFive;

impl ResponseModel for PositiveFive {
    fn parameter_names(&self) -> Vec<String> {
        Parameter::ALL.iter().map(|p| p.name().to_string()).collect()
    }
    fn admissible(&self, _index: usize, value: f64) -> bool {
        value.is_finite() && value > 0.0
    }
    fn response(&self, _theta: &[f64]) -> Result<Response> {
        Ok(Response::Invalid(InvalidRun::Inadmissible))
    }
}

/// Elementary effect of parameter `i` at start point `theta`, given the
/// already computed baseline response `y(theta)`.
///
/// `Ok(Err(_))` marks an invalid run; `Err(_)` is a hard model failure.
pub fn elementary_effect<M: ResponseModel + ?Sized>(
    model: &M,
    theta: &[f64],
    baseline: &[f64],
    i: usize,
    dist: &ParameterDistribution,
    cfg: &MorrisConfig,
) -> Result<core::result::Result<f64, InvalidRun>> {
    let sigma = dist.sigma()[i];
    if sigma == 0.0 {
        return Ok(Ok(0.0));
    }
    let mut perturbed = theta.to_vec();
    perturbed[i] += cfg.delta * sigma;
    if !model.admissible(i, perturbed[i]) {
        return Ok(Err(InvalidRun::Inadmissible));
    }
    let y = match model.response(&perturbed)? {
        Response::Valid(y) => y,
        Response::Invalid(why) => return Ok(Err(why)),
    };
    let diff: Vec<f64> = baseline.iter().zip(&y).map(|(a, b)| a - b).collect();
    Ok(Ok(cfg.reduction.apply(&diff) / cfg.delta))
}

/// One interval (or any other group) to screen.
#[derive(Debug, Clone)]
pub struct MorrisProblem<M> {
    pub label: String,
    pub model: M,
    pub dist: ParameterDistribution,
}

/// Effects of one run, `None` where the run was invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub effects: Vec<Option<f64>>,
}

/// Executes run `run` of problem `group`. Independent of every other run.
pub fn morris_run<M: ResponseModel + ?Sized>(
    model: &M,
    dist: &ParameterDistribution,
    cfg: &MorrisConfig,
    group: usize,
    run: usize,
) -> Result<RunRecord> {
    let mut rng = rng::stream(cfg.seed, group as u64, run as u64);
    let q = dist.len();
    let attempts = if cfg.resample_on_invalid {
        MAX_SAMPLING_ATTEMPTS
    } else {
        1
    };
    for _ in 0..attempts {
        let theta = sample_start_point(model, dist, &mut rng)?;
        let baseline = match model.response(&theta)? {
            Response::Valid(y) => y,
            Response::Invalid(_) => continue,
        };
        let mut effects = Vec::with_capacity(q);
        let mut any_invalid = false;
        for i in 0..q {
            match elementary_effect(model, &theta, &baseline, i, dist, cfg)? {
                Ok(xi) => effects.push(Some(xi)),
                Err(_) => {
                    any_invalid = true;
                    effects.push(None);
                }
            }
        }
        if any_invalid && cfg.resample_on_invalid {
            continue;
        }
        return Ok(RunRecord { effects });
    }
    Ok(RunRecord {
        effects: vec![None; q],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellStats {
    pub morris_mean: f64,
    pub enhanced_mean: f64,
    /// Sample standard deviation of the per-run effects.
    pub stdev: f64,
    pub n_effective: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSensitivity {
    pub label: String,
    /// One entry per parameter.
    pub cells: Vec<CellStats>,
    /// Raw effects, one record per run in run order.
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub parameters: Vec<String>,
    pub intervals: Vec<IntervalSensitivity>,
    pub n_runs: usize,
}

fn stats(values: &[f64]) -> CellStats {
    let n = values.len();
    if n == 0 {
        return CellStats::default();
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let enhanced = values.iter().map(|v| libm::fabs(*v)).sum::<f64>() / nf;
    let stdev = if n > 1 {
        libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0))
    } else {
        0.0
    };
    CellStats {
        morris_mean: mean,
        enhanced_mean: enhanced,
        stdev,
        n_effective: n,
    }
}

/// Reduces per-run records (ordered by run index) into per-cell statistics.
pub fn aggregate(
    parameters: Vec<String>,
    groups: Vec<(String, Vec<RunRecord>)>,
) -> Result<SensitivityReport> {
    let mut intervals = Vec::with_capacity(groups.len());
    let mut n_runs = 0;
    for (label, runs) in groups {
        n_runs = n_runs.max(runs.len());
        let mut cells = Vec::with_capacity(parameters.len());
        for (i, name) in parameters.iter().enumerate() {
            let values: Vec<f64> = runs.iter().filter_map(|r| r.effects[i]).collect();
            if values.is_empty() {
                return Err(Error::EmptyCell {
                    interval: label,
                    parameter: name.clone(),
                });
            }
            cells.push(stats(&values));
        }
        intervals.push(IntervalSensitivity { label, cells, runs });
    }
    Ok(SensitivityReport {
        parameters,
        intervals,
        n_runs,
    })
}

/// Serial Morris screening over every problem.
pub fn run_morris<M: ResponseModel>(
    problems: &[MorrisProblem<M>],
    cfg: &MorrisConfig,
) -> Result<SensitivityReport> {
    cfg.validate()?;
    let Some(first) = problems.first() else {
        return Err(Error::invalid("no intervals to screen"));
    };
    let names = first.model.parameter_names();
    let mut groups = Vec::with_capacity(problems.len());
    for (j, p) in problems.iter().enumerate() {
        check_problem(p, names.len())?;
        let runs = (0..cfg.n_runs)
            .map(|k| morris_run(&p.model, &p.dist, cfg, j, k))
            .collect::<Result<Vec<_>>>()?;
        groups.push((p.label.clone(), runs));
    }
    aggregate(names, groups)
}

pub fn check_problem<M: ResponseModel>(p: &MorrisProblem<M>, n_params: usize) -> Result<()> {
    if p.dist.len() != n_params || p.model.parameter_names().len() != n_params {
        return Err(Error::invalid(format!(
            "interval {} has a distribution of size {} for {} parameters",
            p.label,
            p.dist.len(),
            n_params
        )));
    }
    Ok(())
}

/// Parameter indices by descending enhanced mean, ties broken by name.
pub fn rank_cells(names: &[String], cells: &[CellStats]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| {
        cells[b]
            .enhanced_mean
            .partial_cmp(&cells[a].enhanced_mean)
            .unwrap_or(Ordering::Equal)
            .then_with(|| names[a].cmp(&names[b]))
    });
    order
}

/// Ranked parameter names for every interval.
pub fn rank_parameters(report: &SensitivityReport) -> Vec<Vec<String>> {
    report
        .intervals
        .iter()
        .map(|iv| {
            rank_cells(&report.parameters, &iv.cells)
                .into_iter()
                .map(|i| report.parameters[i].clone())
                .collect()
        })
        .collect()
}

/// Ranking by enhanced mean averaged over all intervals.
pub fn overall_ranking(report: &SensitivityReport) -> Vec<String> {
    let n = report.intervals.len().max(1) as f64;
    let cells: Vec<CellStats> = (0..report.parameters.len())
        .map(|i| CellStats {
            enhanced_mean: report
                .intervals
                .iter()
                .map(|iv| iv.cells[i].enhanced_mean)
                .sum::<f64>()
                / n,
            ..CellStats::default()
        })
        .collect();
    rank_cells(&report.parameters, &cells)
        .into_iter()
        .map(|i| report.parameters[i].clone())
        .collect()
}

/// `y = sum_i w_i theta_i`, a single-sample output.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>) -> Self {
        LinearModel { weights }
    }
}

impl ResponseModel for LinearModel {
    fn parameter_names(&self) -> Vec<String> {
        (1..=self.weights.len()).map(|i| format!("theta{i}")).collect()
    }

    fn response(&self, theta: &[f64]) -> Result<Response> {
        let y = self.weights.iter().zip(theta).map(|(w, t)| w * t).sum();
        Ok(Response::Valid(vec![y]))
    }
}

/// The cell model driven by a fixed current profile with constant
/// parameters; output is the terminal-voltage trace.
#[derive(Debug, Clone)]
pub struct CellResponse<'a> {
    pub profile: &'a CurrentProfile,
    pub ocv: &'a OcvCurve,
    pub capacity: Capacity,
    pub init: CellState,
}

impl ResponseModel for CellResponse<'_> {
    fn parameter_names(&self) -> Vec<String> {
        Parameter::ALL.iter().map(|p| p.name().to_string()).collect()
    }

    fn admissible(&self, _index: usize, value: f64) -> bool {
        value.is_finite() && value > 0.0
    }

    fn response(&self, theta: &[f64]) -> Result<Response> {
        let params = ParameterSet::from_array([theta[0], theta[1], theta[2], theta[3], theta[4]])?;
        let cfg = CellConfig::new(self.capacity, self.ocv, &params);
        let sim = simulate(self.profile, &cfg, self.init)?;
        if sim.first_clamp.is_some() {
            return Ok(Response::Invalid(InvalidRun::SocClamp));
        }
        Ok(Response::Valid(sim.voltage.into_samples()))
    }
}

/// One problem per schedule interval: means are the interval's identified
/// set, standard deviations the across-interval spread, and the excitation
/// starts from rest at the interval's upper edge.
pub fn schedule_problems<'a>(
    schedule: &ParameterSchedule,
    profile: &'a CurrentProfile,
    ocv: &'a OcvCurve,
    capacity: Capacity,
) -> Result<Vec<MorrisProblem<CellResponse<'a>>>> {
    schedule
        .intervals()
        .iter()
        .map(|(iv, set)| {
            Ok(MorrisProblem {
                label: iv.to_string(),
                model: CellResponse {
                    profile,
                    ocv,
                    capacity,
                    init: CellState::rested(iv.hi()),
                },
                dist: ParameterDistribution::around(set, schedule.stdevs())?,
            })
        })
        .collect()
}
