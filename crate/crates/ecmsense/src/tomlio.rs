//! TOML files for fitted OCV curves and parameter schedules.

use std::path::Path;

use ecmsense_core::schedule::LookupMode;
use ecmsense_core::{FixedMask, OcvCurve, Parameter, ParameterSchedule, ParameterSet, SocInterval};
use serde::{Deserialize, Serialize};

use crate::csvio::{read_text, write_text};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    degree: usize,
    /// SOC fractions.
    valid_range: [f64; 2],
    /// Monomial coefficients in SOC fraction, constant term first.
    coefficients: Vec<f64>,
}

pub fn ocv_curve_toml(curve: &OcvCurve) -> String {
    let (lo, hi) = curve.valid_range();
    let file = CurveFile {
        degree: curve.degree(),
        valid_range: [lo, hi],
        coefficients: curve.coefficients().to_vec(),
    };
    let body = toml::to_string(&file).expect("curve serializes");
    format!("# OCV(z) = sum_k coefficients[k] * z^k, z = SOC fraction\n{body}")
}

pub fn parse_ocv_curve(text: &str, path: &Path) -> Result<OcvCurve> {
    let file: CurveFile = toml::from_str(text).map_err(|e| schema(path, e))?;
    if file.coefficients.len() != file.degree + 1 {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            msg: format!(
                "degree {} needs {} coefficients, found {}",
                file.degree,
                file.degree + 1,
                file.coefficients.len()
            ),
        });
    }
    Ok(OcvCurve::new(file.coefficients, file.valid_range[0], file.valid_range[1])?)
}

pub fn read_ocv_curve(path: &Path) -> Result<OcvCurve> {
    parse_ocv_curve(&read_text(path)?, path)
}

pub fn write_ocv_curve(path: &Path, curve: &OcvCurve) -> Result<()> {
    write_text(path, &ocv_curve_toml(curve))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct ParamRow {
    tau1_s: f64,
    tau2_s: f64,
    c1_f: f64,
    c2_f: f64,
    rs_ohm: f64,
}

impl From<[f64; 5]> for ParamRow {
    fn from(v: [f64; 5]) -> Self {
        ParamRow {
            tau1_s: v[0],
            tau2_s: v[1],
            c1_f: v[2],
            c2_f: v[3],
            rs_ohm: v[4],
        }
    }
}

impl ParamRow {
    fn to_array(self) -> [f64; 5] {
        [self.tau1_s, self.tau2_s, self.c1_f, self.c2_f, self.rs_ohm]
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalRow {
    soc_hi_percent: f64,
    soc_lo_percent: f64,
    #[serde(flatten)]
    params: ParamRow,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    #[serde(default = "default_lookup")]
    lookup: String,
    #[serde(default)]
    fixed: Vec<String>,
    /// Informational; recomputed from the intervals on import.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    means: Option<ParamRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stdevs: Option<ParamRow>,
    intervals: Vec<IntervalRow>,
}

fn default_lookup() -> String {
    "piecewise-constant".into()
}

fn lookup_name(mode: LookupMode) -> &'static str {
    match mode {
        LookupMode::PiecewiseConstant => "piecewise-constant",
        LookupMode::MidpointLinear => "midpoint-linear",
    }
}

fn schema(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

pub fn parse_mask(names: &[String]) -> std::result::Result<FixedMask, String> {
    let mut params = Vec::with_capacity(names.len());
    for n in names {
        params.push(Parameter::from_name(n).ok_or_else(|| {
            format!("unknown parameter {n:?}; expected one of tau1, tau2, c1, c2, rs")
        })?);
    }
    Ok(FixedMask::of(&params))
}

pub fn mask_names(mask: FixedMask) -> Vec<String> {
    mask.fixed().map(|p| p.name().to_string()).collect()
}

pub fn schedule_toml(schedule: &ParameterSchedule) -> String {
    let file = ScheduleFile {
        lookup: lookup_name(schedule.lookup_mode()).into(),
        fixed: mask_names(schedule.fixed_mask()),
        means: Some(schedule.means().to_array().into()),
        stdevs: Some(schedule.stdevs().into()),
        intervals: schedule
            .intervals()
            .iter()
            .map(|(iv, p)| IntervalRow {
                soc_hi_percent: iv.hi_percent(),
                soc_lo_percent: iv.lo_percent(),
                params: p.to_array().into(),
            })
            .collect(),
    };
    let body = toml::to_string(&file).expect("schedule serializes");
    format!("# tau in s, capacitance in F, resistance in ohm; SOC bounds in percent\n{body}")
}

pub fn parse_schedule(text: &str, path: &Path) -> Result<ParameterSchedule> {
    let file: ScheduleFile = toml::from_str(text).map_err(|e| schema(path, e))?;
    let lookup = match file.lookup.as_str() {
        "piecewise-constant" => LookupMode::PiecewiseConstant,
        "midpoint-linear" => LookupMode::MidpointLinear,
        other => return Err(schema(path, format!("unknown lookup mode {other:?}"))),
    };
    let mask = parse_mask(&file.fixed).map_err(|e| schema(path, e))?;
    let rows = file
        .intervals
        .iter()
        .map(|r| {
            Ok((
                SocInterval::new(r.soc_hi_percent, r.soc_lo_percent)?,
                ParameterSet::from_array(r.params.to_array())?,
            ))
        })
        .collect::<ecmsense_core::Result<Vec<_>>>()?;
    Ok(ParameterSchedule::new(rows)?
        .with_fixed(mask)
        .with_lookup(lookup))
}

pub fn read_schedule(path: &Path) -> Result<ParameterSchedule> {
    parse_schedule(&read_text(path)?, path)
}

pub fn write_schedule(path: &Path, schedule: &ParameterSchedule) -> Result<()> {
    write_text(path, &schedule_toml(schedule))
}
