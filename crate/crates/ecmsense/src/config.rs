//! Run configuration (TOML). Relative paths resolve against the directory of
//! the config file.

use std::path::{Path, PathBuf};

use ecmsense_core::ident::IdentOptions;
use ecmsense_core::morris::{MorrisConfig, Reduction};
use ecmsense_core::{Capacity, FixedMask, ParameterSet, SocInterval};
use serde::{Deserialize, Serialize};

use crate::csvio::read_text;
use crate::error::{Error, Result};
use crate::tomlio::parse_mask;

pub const SEED_ENV: &str = "ECMSENSE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub capacity_mah: f64,
    #[serde(default = "defaults::initial_soc")]
    pub initial_soc_percent: f64,
    #[serde(default = "defaults::edges")]
    pub soc_edges_percent: Vec<f64>,
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default)]
    pub ocv: OcvSettings,
    #[serde(default)]
    pub ident: IdentSettings,
    #[serde(default)]
    pub morris: MorrisSettings,
    #[serde(default)]
    pub validation: ValidationSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocv_charge: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocv_discharge: Option<PathBuf>,
    /// Used instead of fitting when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocv_curve: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_cycle: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_cycle: Option<PathBuf>,
    /// Excitation replayed in every Morris run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation_cycle: Option<PathBuf>,
    /// Used instead of the output of `identify` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,
    /// Resampling period; the file's own median spacing when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample_dt_s: Option<f64>,
}

impl DataPaths {
    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 7] {
        [
            &mut self.ocv_charge,
            &mut self.ocv_discharge,
            &mut self.ocv_curve,
            &mut self.training_cycle,
            &mut self.validation_cycle,
            &mut self.excitation_cycle,
            &mut self.schedule,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcvSettings {
    #[serde(default = "defaults::degree")]
    pub degree: usize,
}

impl Default for OcvSettings {
    fn default() -> Self {
        OcvSettings {
            degree: defaults::degree(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialGuess {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rs: Option<f64>,
}

impl InitialGuess {
    pub fn apply(&self, base: ParameterSet) -> ecmsense_core::Result<ParameterSet> {
        let mut v = base.to_array();
        for (slot, o) in v
            .iter_mut()
            .zip([self.tau1, self.tau2, self.c1, self.c2, self.rs])
        {
            if let Some(x) = o {
                *slot = x;
            }
        }
        ParameterSet::from_array(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentSettings {
    #[serde(default = "defaults::rel_cost_tol")]
    pub rel_cost_tol: f64,
    #[serde(default = "defaults::rel_step_tol")]
    pub rel_step_tol: f64,
    #[serde(default = "defaults::max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "defaults::fd_step")]
    pub fd_step: f64,
    /// Rest threshold in amperes; C/500 when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_current_a: Option<f64>,
    #[serde(default = "defaults::rest_duration")]
    pub rest_min_duration_s: f64,
    #[serde(default)]
    pub initial_guess: InitialGuess,
}

impl Default for IdentSettings {
    fn default() -> Self {
        IdentSettings {
            rel_cost_tol: defaults::rel_cost_tol(),
            rel_step_tol: defaults::rel_step_tol(),
            max_iterations: defaults::max_iterations(),
            fd_step: defaults::fd_step(),
            rest_current_a: None,
            rest_min_duration_s: defaults::rest_duration(),
            initial_guess: InitialGuess::default(),
        }
    }
}

impl IdentSettings {
    pub fn options(&self) -> IdentOptions {
        IdentOptions {
            rel_cost_tol: self.rel_cost_tol,
            rel_step_tol: self.rel_step_tol,
            max_iterations: self.max_iterations,
            fd_step: self.fd_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionName {
    #[default]
    Mean,
    Rms,
}

impl From<ReductionName> for Reduction {
    fn from(r: ReductionName) -> Self {
        match r {
            ReductionName::Mean => Reduction::SignedMean,
            ReductionName::Rms => Reduction::Rms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorrisSettings {
    #[serde(default = "defaults::n_runs")]
    pub n_runs: usize,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub reduction: ReductionName,
    #[serde(default)]
    pub resample_on_invalid: bool,
    /// Thread count; all cores when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for MorrisSettings {
    fn default() -> Self {
        MorrisSettings {
            n_runs: defaults::n_runs(),
            delta: defaults::delta(),
            seed: None,
            reduction: ReductionName::default(),
            resample_on_invalid: false,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSettings {
    /// Parameters held at their means in case 2. When unset, the three
    /// lowest-ranked parameters of a previous `morris` run, or else
    /// `c1, c2, tau1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<Vec<String>>,
}

mod defaults {
    pub fn initial_soc() -> f64 {
        100.0
    }
    pub fn edges() -> Vec<f64> {
        (0..10).map(|k| 100.0 - 10.0 * k as f64).collect()
    }
    pub fn degree() -> usize {
        ecmsense_core::ocv::DEFAULT_DEGREE
    }
    pub fn rel_cost_tol() -> f64 {
        1e-10
    }
    pub fn rel_step_tol() -> f64 {
        1e-8
    }
    pub fn max_iterations() -> usize {
        200
    }
    pub fn fd_step() -> f64 {
        1e-6
    }
    pub fn rest_duration() -> f64 {
        60.0
    }
    pub fn n_runs() -> usize {
        1024
    }
    pub fn delta() -> f64 {
        1.0
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Parses and range-checks without touching the file system.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_ranges()?;
        Ok(cfg)
    }

    /// Parses, resolves relative paths against the file's directory and
    /// checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&read_text(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        for p in self.data.paths_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn check_files(&self) -> Result<()> {
        let mut data = self.data.clone();
        for p in data.paths_mut().into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "referenced file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check_ranges(&self) -> Result<()> {
        positive("capacity_mah", self.capacity_mah)?;
        if !(0.0..=100.0).contains(&self.initial_soc_percent) {
            return Err(Error::Config(format!(
                "initial_soc_percent must lie in [0, 100], got {}",
                self.initial_soc_percent
            )));
        }
        if self.soc_edges_percent.len() < 2 {
            return Err(Error::Config("soc_edges_percent needs at least two edges".into()));
        }
        SocInterval::from_edges(&self.soc_edges_percent)
            .map_err(|e| Error::Config(format!("soc_edges_percent: {e}")))?;
        if !(1..=20).contains(&self.ocv.degree) {
            return Err(Error::Config(format!(
                "ocv.degree must lie in 1..=20, got {}",
                self.ocv.degree
            )));
        }
        if let Some(dt) = self.data.resample_dt_s {
            positive("data.resample_dt_s", dt)?;
        }
        let id = &self.ident;
        positive("ident.rel_cost_tol", id.rel_cost_tol)?;
        positive("ident.rel_step_tol", id.rel_step_tol)?;
        positive("ident.fd_step", id.fd_step)?;
        positive("ident.rest_min_duration_s", id.rest_min_duration_s)?;
        if id.max_iterations == 0 {
            return Err(Error::Config("ident.max_iterations must be at least 1".into()));
        }
        if let Some(a) = id.rest_current_a {
            positive("ident.rest_current_a", a)?;
        }
        let g = &id.initial_guess;
        for (name, v) in [
            ("tau1", g.tau1),
            ("tau2", g.tau2),
            ("c1", g.c1),
            ("c2", g.c2),
            ("rs", g.rs),
        ] {
            if let Some(v) = v {
                positive(&format!("ident.initial_guess.{name}"), v)?;
            }
        }
        if self.morris.n_runs == 0 {
            return Err(Error::Config("morris.n_runs must be at least 1".into()));
        }
        positive("morris.delta", self.morris.delta)?;
        if self.morris.workers == Some(0) {
            return Err(Error::Config("morris.workers must be at least 1".into()));
        }
        if let Some(names) = &self.validation.fixed {
            parse_mask(names).map_err(|e| Error::Config(format!("validation.fixed: {e}")))?;
        }
        Ok(())
    }

    pub fn capacity(&self) -> Result<Capacity> {
        Ok(Capacity::from_mah(self.capacity_mah)?)
    }

    pub fn intervals(&self) -> Result<Vec<SocInterval>> {
        Ok(SocInterval::from_edges(&self.soc_edges_percent)?)
    }

    pub fn z0(&self) -> f64 {
        self.initial_soc_percent / 100.0
    }

    /// Explicit mask from the config, if any.
    pub fn validation_mask(&self) -> Result<Option<FixedMask>> {
        self.validation
            .fixed
            .as_deref()
            .map(|n| parse_mask(n).map_err(Error::Config))
            .transpose()
    }

    pub fn morris_config(&self, seed: u64) -> MorrisConfig {
        MorrisConfig {
            n_runs: self.morris.n_runs,
            delta: self.morris.delta,
            seed,
            reduction: self.morris.reduction.into(),
            resample_on_invalid: self.morris.resample_on_invalid,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            capacity_mah: 740.0,
            initial_soc_percent: defaults::initial_soc(),
            soc_edges_percent: defaults::edges(),
            data: DataPaths::default(),
            ocv: OcvSettings::default(),
            ident: IdentSettings::default(),
            morris: MorrisSettings::default(),
            validation: ValidationSettings::default(),
        }
    }
}

/// Seed precedence: explicit flag, then `ECMSENSE_SEED`, then the config,
/// then 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(raw) = env.map(str::trim).filter(|s| !s.is_empty()) {
        return raw
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")));
    }
    Ok(config.unwrap_or(0))
}
