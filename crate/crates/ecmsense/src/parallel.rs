//! Rayon-backed Morris screening and per-segment identification. Results are
//! collected in index order, so output does not depend on the worker count.

use ecmsense_core::ident::{default_initial_guess, identify_segment, FitReport, IdentOptions, Segment};
use ecmsense_core::morris::{
    aggregate, check_problem, morris_run, MorrisConfig, MorrisProblem, ResponseModel,
    SensitivityReport,
};
use ecmsense_core::{Capacity, Error as CoreError, OcvCurve, ParameterSet};
use rayon::prelude::*;

use crate::error::{Error, Result};

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Same result as [`ecmsense_core::morris::run_morris`] for any `workers`.
pub fn run_morris<M: ResponseModel + Sync>(
    problems: &[MorrisProblem<M>],
    cfg: &MorrisConfig,
    workers: Option<usize>,
) -> Result<SensitivityReport> {
    cfg.validate()?;
    let Some(first) = problems.first() else {
        return Err(CoreError::InvalidInput("no intervals to screen".into()).into());
    };
    let names = first.model.parameter_names();
    for p in problems {
        check_problem(p, names.len())?;
    }
    let n = cfg.n_runs;
    let records = pool(workers)?.install(|| {
        (0..problems.len() * n)
            .into_par_iter()
            .map(|t| {
                let (j, k) = (t / n, t % n);
                morris_run(&problems[j].model, &problems[j].dist, cfg, j, k)
            })
            .collect::<ecmsense_core::Result<Vec<_>>>()
    })?;
    let mut records = records.into_iter();
    let groups = problems
        .iter()
        .map(|p| (p.label.clone(), records.by_ref().take(n).collect()))
        .collect();
    Ok(aggregate(names, groups)?)
}

/// Identifies every segment, starting each from its data-driven guess with
/// `overrides` applied.
pub fn identify_segments(
    segments: &[Segment],
    ocv: &OcvCurve,
    capacity: Capacity,
    overrides: impl Fn(ParameterSet) -> ecmsense_core::Result<ParameterSet> + Sync,
    options: &IdentOptions,
    workers: Option<usize>,
) -> Result<Vec<FitReport>> {
    let reports = pool(workers)?.install(|| {
        segments
            .par_iter()
            .map(|seg| {
                let guess = overrides(default_initial_guess(seg))?;
                identify_segment(seg, ocv, capacity, &guess, options)
            })
            .collect::<ecmsense_core::Result<Vec<_>>>()
    })?;
    Ok(reports)
}
