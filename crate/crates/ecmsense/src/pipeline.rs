//! One function per subcommand. Each reads its inputs, does the work, writes
//! its artifacts into `out` and returns a serializable summary. Summaries
//! hold no timings or absolute paths, so they are reproducible byte for byte.

use std::path::{Path, PathBuf};

use ecmsense_core::ident::{
    build_schedule, segment_by_soc, validate_cases, RestDetection, SegmentationWarning,
    ValidationCase, MIN_SEGMENT_SAMPLES,
};
use ecmsense_core::morris::{
    overall_ranking, rank_parameters, schedule_problems, LinearModel, MorrisConfig, MorrisProblem,
    ParameterDistribution, Reduction, SensitivityReport,
};
use ecmsense_core::ocv::{average_sweeps, fit_polynomial};
use ecmsense_core::{
    simulate, CellConfig, CellState, ErrorMetrics, FixedMask, OcvCurve, OcvSweep,
    ParameterSchedule, SweepDirection,
};
use serde::Serialize;

use crate::config::{ReductionName, RunConfig};
use crate::csvio::{self, read_drive_cycle, write_text, DriveCycle};
use crate::error::{Error, Result};
use crate::parallel;
use crate::synth::{self, Dataset, DatasetSpec};
use crate::tomlio::{self, mask_names};

pub const OCV_CURVE_FILE: &str = "ocv_curve.toml";
pub const OCV_FIT_FILE: &str = "ocv_fit.csv";
pub const SCHEDULE_FILE: &str = "schedule.toml";
pub const FIT_REPORTS_FILE: &str = "fit_reports.csv";
pub const SIMULATION_FILE: &str = "simulation.csv";
pub const SENSITIVITY_FILE: &str = "sensitivity.csv";
pub const SENSITIVITY_RUNS_FILE: &str = "sensitivity_runs.csv";
pub const RANKING_FILE: &str = "ranking.csv";
pub const VALIDATION_METRICS_FILE: &str = "validation_metrics.csv";
pub const VALIDATION_ERRORS_FILE: &str = "validation_errors.csv";
pub const DEMO_FILE: &str = "demo_linear.csv";
pub const DEMO_RUNS_FILE: &str = "demo_linear_runs.csv";

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn write_summary<T: Serialize>(out: &Path, command: &str, summary: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    write_text(&out.join(format!("{command}_summary.json")), &text)
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("data.{key} is not set")))
}

fn load_cycle(cfg: &RunConfig, path: &Path) -> Result<DriveCycle> {
    let cycle = read_drive_cycle(path, cfg.data.resample_dt_s)?;
    for g in &cycle.gaps {
        eprintln!(
            "warning: {}: gap from {} s to {} s",
            path.display(),
            g.from,
            g.to
        );
    }
    Ok(cycle)
}

#[derive(Debug, Clone, Serialize)]
pub struct OcvSummary {
    pub degree: usize,
    pub valid_range_percent: [f64; 2],
    pub points: usize,
    pub rmse_v: f64,
    pub max_abs_v: f64,
    pub coefficients: Vec<f64>,
}

/// Averages the charge and discharge sweeps (either alone is accepted) and
/// fits the polynomial.
pub fn fit_ocv(cfg: &RunConfig, out: &Path) -> Result<(OcvCurve, OcvSummary)> {
    let charge = cfg
        .data
        .ocv_charge
        .as_deref()
        .map(|p| csvio::read_ocv_sweep(p, SweepDirection::Charge))
        .transpose()?;
    let discharge = cfg
        .data
        .ocv_discharge
        .as_deref()
        .map(|p| csvio::read_ocv_sweep(p, SweepDirection::Discharge))
        .transpose()?;
    let sweep: OcvSweep = match (charge, discharge) {
        (Some(c), Some(d)) => average_sweeps(&c, &d)?,
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => {
            return Err(Error::Config(
                "data.ocv_charge or data.ocv_discharge is needed to fit the OCV curve".into(),
            ))
        }
    };
    let fit = fit_polynomial(&sweep, cfg.ocv.degree)?;
    let m = fit.metrics();
    let (lo, hi) = fit.curve.valid_range();
    tomlio::write_ocv_curve(&out.join(OCV_CURVE_FILE), &fit.curve)?;
    write_text(&out.join(OCV_FIT_FILE), &csvio::ocv_fit_csv(&sweep, &fit.residuals))?;
    let summary = OcvSummary {
        degree: fit.curve.degree(),
        valid_range_percent: [lo * 100.0, hi * 100.0],
        points: sweep.len(),
        rmse_v: m.rmse,
        max_abs_v: m.max_abs,
        coefficients: fit.curve.coefficients().to_vec(),
    };
    write_summary(out, "fit-ocv", &summary)?;
    Ok((fit.curve, summary))
}

/// The configured curve, else one written by `fit-ocv` into `out`, else a
/// fresh fit.
pub fn load_ocv(cfg: &RunConfig, out: &Path) -> Result<OcvCurve> {
    if let Some(p) = &cfg.data.ocv_curve {
        return tomlio::read_ocv_curve(p);
    }
    let cached = out.join(OCV_CURVE_FILE);
    if cached.is_file() {
        return tomlio::read_ocv_curve(&cached);
    }
    Ok(fit_ocv(cfg, out)?.0)
}

/// The configured schedule, else the one written by `identify` into `out`.
pub fn load_schedule(cfg: &RunConfig, out: &Path) -> Result<ParameterSchedule> {
    if let Some(p) = &cfg.data.schedule {
        return tomlio::read_schedule(p);
    }
    let cached = out.join(SCHEDULE_FILE);
    if cached.is_file() {
        return tomlio::read_schedule(&cached);
    }
    Err(Error::Config(format!(
        "no schedule: set data.schedule or run identify with --out {}",
        out.display()
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalFit {
    pub interval: String,
    pub start_index: usize,
    pub samples: usize,
    pub tau1_s: f64,
    pub tau2_s: f64,
    pub c1_f: f64,
    pub c2_f: f64,
    pub rs_ohm: f64,
    pub rmse_v: f64,
    pub max_abs_v: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentSummary {
    pub training_cycle: String,
    pub original_samples: usize,
    pub samples: usize,
    pub dt_s: f64,
    pub gaps: usize,
    pub warnings: Vec<String>,
    pub intervals: Vec<IntervalFit>,
    pub all_converged: bool,
}

pub struct IdentOutcome {
    pub schedule: ParameterSchedule,
    pub summary: IdentSummary,
}

pub fn identify(cfg: &RunConfig, out: &Path, workers: Option<usize>) -> Result<IdentOutcome> {
    let path = required(&cfg.data.training_cycle, "training_cycle")?;
    let ocv = load_ocv(cfg, out)?;
    let capacity = cfg.capacity()?;
    let cycle = load_cycle(cfg, path)?;
    let voltage = cycle.require_voltage(path)?;
    let rest = RestDetection {
        current_threshold: cfg
            .ident
            .rest_current_a
            .unwrap_or(capacity.one_c() / 500.0),
        min_duration: cfg.ident.rest_min_duration_s,
    };
    let seg = segment_by_soc(
        &cycle.profile,
        voltage,
        capacity,
        cfg.z0(),
        &cfg.soc_edges_percent,
        rest,
    )?;
    let mut warnings: Vec<String> = seg
        .warnings
        .iter()
        .map(|w| match w {
            SegmentationWarning::NoCrossing => "no-crossing".to_string(),
            SegmentationWarning::PartialCoverage { final_soc } => {
                format!("partial-coverage: data ends at {}%", final_soc * 100.0)
            }
        })
        .collect();
    let (segments, short): (Vec<_>, Vec<_>) = seg
        .segments
        .into_iter()
        .partition(|s| s.profile.len() >= MIN_SEGMENT_SAMPLES);
    for s in &short {
        warnings.push(format!(
            "interval {} skipped: {} samples",
            s.interval,
            s.profile.len()
        ));
    }
    if segments.is_empty() {
        return Err(Error::Config(format!(
            "{}: no interval has at least {MIN_SEGMENT_SAMPLES} samples",
            path.display()
        )));
    }

    let guess = cfg.ident.initial_guess.clone();
    let reports = parallel::identify_segments(
        &segments,
        &ocv,
        capacity,
        |base| guess.apply(base),
        &cfg.ident.options(),
        workers,
    )?;

    let rows: Vec<_> = segments
        .iter()
        .zip(&reports)
        .map(|(s, r)| (s.interval, s.profile.len(), r.clone()))
        .collect();
    let schedule = build_schedule(
        &rows
            .iter()
            .map(|(iv, _, r)| (*iv, r.clone()))
            .collect::<Vec<_>>(),
    )?;
    tomlio::write_schedule(&out.join(SCHEDULE_FILE), &schedule)?;
    write_text(&out.join(FIT_REPORTS_FILE), &csvio::fit_reports_csv(&rows))?;

    let intervals: Vec<IntervalFit> = segments
        .iter()
        .zip(&reports)
        .map(|(s, r)| IntervalFit {
            interval: s.interval.to_string(),
            start_index: s.range.start,
            samples: s.profile.len(),
            tau1_s: r.params.tau1(),
            tau2_s: r.params.tau2(),
            c1_f: r.params.c1(),
            c2_f: r.params.c2(),
            rs_ohm: r.params.rs(),
            rmse_v: r.rmse,
            max_abs_v: r.max_abs,
            iterations: r.iterations,
            converged: r.converged,
            warnings: r.warnings.iter().map(|w| format!("{w:?}")).collect(),
        })
        .collect();
    let summary = IdentSummary {
        training_cycle: file_name(path),
        original_samples: cycle.original_samples,
        samples: cycle.profile.len(),
        dt_s: cycle.profile.dt(),
        gaps: cycle.gaps.len(),
        warnings,
        all_converged: intervals.iter().all(|i| i.converged),
        intervals,
    };
    write_summary(out, "identify", &summary)?;
    Ok(IdentOutcome { schedule, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub cycle: String,
    pub samples: usize,
    pub dt_s: f64,
    pub initial_soc_percent: f64,
    pub final_soc_percent: f64,
    pub first_clamp: Option<usize>,
    /// Against the file's voltage column, when present.
    pub rmse_v: Option<f64>,
    pub max_abs_v: Option<f64>,
}

/// Replays `cycle` (default: the training cycle) through the schedule from
/// rest at the configured initial SOC.
pub fn simulate_cycle(cfg: &RunConfig, out: &Path, cycle: Option<&Path>) -> Result<SimSummary> {
    let path = match cycle {
        Some(p) => p,
        None => required(&cfg.data.training_cycle, "training_cycle")?,
    };
    let ocv = load_ocv(cfg, out)?;
    let schedule = load_schedule(cfg, out)?;
    let capacity = cfg.capacity()?;
    let data = load_cycle(cfg, path)?;
    let sim = simulate(
        &data.profile,
        &CellConfig::new(capacity, &ocv, &schedule),
        CellState::rested(cfg.z0()),
    )?;
    write_text(
        &out.join(SIMULATION_FILE),
        &csvio::simulation_csv(&data.profile, &sim),
    )?;
    let metrics = data
        .voltage
        .as_ref()
        .map(|v| ErrorMetrics::between(sim.voltage.samples(), v.samples()));
    let summary = SimSummary {
        cycle: file_name(path),
        samples: data.profile.len(),
        dt_s: data.profile.dt(),
        initial_soc_percent: cfg.initial_soc_percent,
        final_soc_percent: sim.final_state.z * 100.0,
        first_clamp: sim.first_clamp,
        rmse_v: metrics.map(|m| m.rmse),
        max_abs_v: metrics.map(|m| m.max_abs),
    };
    write_summary(out, "simulate", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MorrisOverrides {
    pub seed: u64,
    pub runs: Option<usize>,
    pub delta: Option<f64>,
    pub reduction: Option<ReductionName>,
    pub workers: Option<usize>,
}

impl MorrisOverrides {
    fn config(&self, cfg: &RunConfig) -> MorrisConfig {
        let mut m = cfg.morris_config(self.seed);
        if let Some(n) = self.runs {
            m.n_runs = n;
        }
        if let Some(d) = self.delta {
            m.delta = d;
        }
        if let Some(r) = self.reduction {
            m.reduction = r.into();
        }
        m
    }

    fn workers(&self, cfg: &RunConfig) -> Option<usize> {
        self.workers.or(cfg.morris.workers)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankEntry {
    pub parameter: String,
    pub mean_enhanced_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalRanking {
    pub interval: String,
    pub ranking: Vec<String>,
    pub min_n_effective: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MorrisSummary {
    pub seed: u64,
    pub n_runs: usize,
    pub delta: f64,
    pub reduction: &'static str,
    pub parameters: Vec<String>,
    pub overall: Vec<RankEntry>,
    pub intervals: Vec<IntervalRanking>,
}

pub struct MorrisOutcome {
    pub report: SensitivityReport,
    pub summary: MorrisSummary,
}

fn reduction_name(r: Reduction) -> &'static str {
    match r {
        Reduction::SignedMean => "mean",
        Reduction::Rms => "rms",
    }
}

fn morris_summary(report: &SensitivityReport, mc: &MorrisConfig) -> MorrisSummary {
    let n = report.intervals.len().max(1) as f64;
    let overall = overall_ranking(report)
        .into_iter()
        .map(|name| {
            let i = report.parameters.iter().position(|p| *p == name).unwrap_or(0);
            RankEntry {
                mean_enhanced_v: report
                    .intervals
                    .iter()
                    .map(|iv| iv.cells[i].enhanced_mean)
                    .sum::<f64>()
                    / n,
                parameter: name,
            }
        })
        .collect();
    let intervals = report
        .intervals
        .iter()
        .zip(rank_parameters(report))
        .map(|(iv, ranking)| IntervalRanking {
            interval: iv.label.clone(),
            ranking,
            min_n_effective: iv.cells.iter().map(|c| c.n_effective).min().unwrap_or(0),
        })
        .collect();
    MorrisSummary {
        seed: mc.seed,
        n_runs: mc.n_runs,
        delta: mc.delta,
        reduction: reduction_name(mc.reduction),
        parameters: report.parameters.clone(),
        overall,
        intervals,
    }
}

fn write_report(out: &Path, report: &SensitivityReport, main: &str, runs: &str) -> Result<()> {
    write_text(&out.join(main), &csvio::sensitivity_csv(report))?;
    write_text(&out.join(runs), &csvio::sensitivity_runs_csv(report))
}

/// Screens every interval of the schedule with the excitation cycle.
pub fn morris(cfg: &RunConfig, out: &Path, ov: &MorrisOverrides) -> Result<MorrisOutcome> {
    let path = required(&cfg.data.excitation_cycle, "excitation_cycle")?;
    let ocv = load_ocv(cfg, out)?;
    let schedule = load_schedule(cfg, out)?;
    let capacity = cfg.capacity()?;
    let cycle = load_cycle(cfg, path)?;
    let mc = ov.config(cfg);
    let problems = schedule_problems(&schedule, &cycle.profile, &ocv, capacity)?;
    let report = parallel::run_morris(&problems, &mc, ov.workers(cfg))?;
    let summary = morris_summary(&report, &mc);
    write_report(out, &report, SENSITIVITY_FILE, SENSITIVITY_RUNS_FILE)?;
    let ranked: Vec<(String, f64)> = summary
        .overall
        .iter()
        .map(|e| (e.parameter.clone(), e.mean_enhanced_v))
        .collect();
    write_text(&out.join(RANKING_FILE), &csvio::ranking_csv(&ranked))?;
    write_summary(out, "morris", &summary)?;
    Ok(MorrisOutcome { report, summary })
}

/// `y = theta1 + 5 theta2` with `theta ~ N(0, diag(10, 1))`.
pub fn demo_linear(out: &Path, mc: &MorrisConfig, workers: Option<usize>) -> Result<MorrisOutcome> {
    let problems = [MorrisProblem {
        label: "linear".to_string(),
        model: LinearModel::new(vec![1.0, 5.0]),
        dist: ParameterDistribution::new(vec![0.0, 0.0], vec![10.0, 1.0])?,
    }];
    let report = parallel::run_morris(&problems, mc, workers)?;
    let summary = morris_summary(&report, mc);
    write_report(out, &report, DEMO_FILE, DEMO_RUNS_FILE)?;
    write_summary(out, "demo-linear", &summary)?;
    Ok(MorrisOutcome { report, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseSummary {
    pub case: String,
    pub fixed: Vec<String>,
    pub rmse_v: f64,
    pub max_abs_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateSummary {
    pub validation_cycle: String,
    pub samples: usize,
    /// `config`, `morris-ranking` or `default`.
    pub mask_source: &'static str,
    pub cases: Vec<CaseSummary>,
    /// `rmse(case1) <= rmse(case2) <= rmse(case3)`.
    pub ordering_holds: bool,
}

/// Case-2 mask: configured, else the three lowest-ranked parameters of a
/// previous `morris` run, else `c1, c2, tau1`.
pub fn reduced_mask(cfg: &RunConfig, out: &Path) -> Result<(FixedMask, &'static str)> {
    if let Some(m) = cfg.validation_mask()? {
        return Ok((m, "config"));
    }
    let ranking = out.join(RANKING_FILE);
    if ranking.is_file() {
        let names = csvio::read_ranking(&ranking)?;
        if names.len() == 5 {
            let mask = tomlio::parse_mask(&names[2..]).map_err(|e| Error::Schema {
                path: ranking.clone(),
                msg: e,
            })?;
            return Ok((mask, "morris-ranking"));
        }
    }
    Ok((ValidationCase::default_reduced_mask(), "default"))
}

pub struct ValidateOutcome {
    pub results: Vec<ecmsense_core::ident::CaseResult>,
    pub summary: ValidateSummary,
}

pub fn validate(cfg: &RunConfig, out: &Path) -> Result<ValidateOutcome> {
    let path = required(&cfg.data.validation_cycle, "validation_cycle")?;
    let ocv = load_ocv(cfg, out)?;
    let schedule = load_schedule(cfg, out)?;
    let capacity = cfg.capacity()?;
    let cycle = load_cycle(cfg, path)?;
    let voltage = cycle.require_voltage(path)?;
    let (mask, source) = reduced_mask(cfg, out)?;
    let results = validate_cases(
        &cycle.profile,
        voltage,
        &schedule,
        &ocv,
        capacity,
        CellState::rested(cfg.z0()),
        &ValidationCase::standard(mask),
    )?;
    write_text(
        &out.join(VALIDATION_METRICS_FILE),
        &csvio::validation_metrics_csv(&results),
    )?;
    write_text(
        &out.join(VALIDATION_ERRORS_FILE),
        &csvio::error_traces_csv(&cycle.profile, &results),
    )?;
    let cases: Vec<CaseSummary> = results
        .iter()
        .map(|r| CaseSummary {
            case: r.case.name.clone(),
            fixed: mask_names(r.case.fixed),
            rmse_v: r.metrics.rmse,
            max_abs_v: r.metrics.max_abs,
        })
        .collect();
    let summary = ValidateSummary {
        validation_cycle: file_name(path),
        samples: cycle.profile.len(),
        mask_source: source,
        ordering_holds: cases.windows(2).all(|w| w[0].rmse_v <= w[1].rmse_v),
        cases,
    };
    write_summary(out, "validate", &summary)?;
    Ok(ValidateOutcome { results, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct GenSummary {
    pub seed: u64,
    pub noise_rms_v: f64,
    pub capacity_mah: f64,
    pub training_samples: usize,
    pub validation_samples: usize,
    pub excitation_samples: usize,
    pub truth_ocv_rmse_v: f64,
}

pub const DATA_DIR: &str = "data";
pub const TRUTH_DIR: &str = "truth";
pub const RUN_CONFIG_FILE: &str = "run.toml";

/// Writes a synthetic data set and a `run.toml` that drives the whole
/// pipeline on it. The ground truth goes to `truth/`.
pub fn gen_data(out: &Path, spec: &DatasetSpec) -> Result<(Dataset, GenSummary)> {
    let truth = synth::reference_schedule();
    let (c, d) = synth::reference_sweeps(spec.sweep_points, 0.1, 1.0, spec.hysteresis)?;
    let fit = fit_polynomial(&average_sweeps(&c, &d)?, ecmsense_core::ocv::DEFAULT_DEGREE)?;
    let data = synth::generate_dataset(spec, &truth, &fit.curve)?;

    let dir = out.join(DATA_DIR);
    write_text(&dir.join("ocv_charge.csv"), &csvio::ocv_sweep_csv(&data.charge))?;
    write_text(&dir.join("ocv_discharge.csv"), &csvio::ocv_sweep_csv(&data.discharge))?;
    csvio::write_drive_cycle(&dir.join("training.csv"), &data.training.0, Some(&data.training.1))?;
    csvio::write_drive_cycle(
        &dir.join("validation.csv"),
        &data.validation.0,
        Some(&data.validation.1),
    )?;
    csvio::write_drive_cycle(&dir.join("excitation.csv"), &data.excitation, None)?;
    tomlio::write_schedule(&out.join(TRUTH_DIR).join(SCHEDULE_FILE), &truth)?;
    tomlio::write_ocv_curve(&out.join(TRUTH_DIR).join(OCV_CURVE_FILE), &fit.curve)?;

    let mut cfg = RunConfig {
        capacity_mah: spec.capacity_mah,
        ..RunConfig::default()
    };
    let rel = |f: &str| Some(PathBuf::from(DATA_DIR).join(f));
    cfg.data.ocv_charge = rel("ocv_charge.csv");
    cfg.data.ocv_discharge = rel("ocv_discharge.csv");
    cfg.data.training_cycle = rel("training.csv");
    cfg.data.validation_cycle = rel("validation.csv");
    cfg.data.excitation_cycle = rel("excitation.csv");
    cfg.morris.seed = Some(spec.seed);
    write_text(&out.join(RUN_CONFIG_FILE), &cfg.to_toml())?;

    let summary = GenSummary {
        seed: spec.seed,
        noise_rms_v: spec.noise_rms,
        capacity_mah: spec.capacity_mah,
        training_samples: data.training.0.len(),
        validation_samples: data.validation.0.len(),
        excitation_samples: data.excitation.len(),
        truth_ocv_rmse_v: fit.metrics().rmse,
    };
    write_summary(out, "gen-data", &summary)?;
    Ok((data, summary))
}
