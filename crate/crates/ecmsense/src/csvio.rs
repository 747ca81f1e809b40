//! CSV readers and writers. Numbers are written with `{}` so every value
//! round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use ecmsense_core::ident::{CaseResult, FitReport, IdentWarning};
use ecmsense_core::morris::SensitivityReport;
use ecmsense_core::{CurrentProfile, OcvSweep, Simulation, SocInterval, SweepDirection, VoltageTrace};

use crate::error::{Error, Result};

/// A jump between consecutive input rows that is long relative to the
/// resampling period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    pub profile: CurrentProfile,
    pub voltage: Option<VoltageTrace>,
    /// Rows in the file before resampling.
    pub original_samples: usize,
    pub gaps: Vec<Gap>,
}

impl DriveCycle {
    pub fn require_voltage(&self, path: &Path) -> Result<&VoltageTrace> {
        self.voltage.as_ref().ok_or_else(|| Error::Schema {
            path: path.to_path_buf(),
            msg: "column voltage_v is required here".into(),
        })
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn field(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    path: &Path,
    line: u64,
) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("").trim();
    let parse_err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    if raw.is_empty() {
        return Err(parse_err(format!("missing value for {name}")));
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(format!("{name}: cannot parse {raw:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(format!("{name} is not finite")));
    }
    Ok(v)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

/// Lower median of the positive row spacings.
fn median_spacing(times: &[f64]) -> f64 {
    let mut d: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d[(d.len() - 1) / 2]
}

/// Reads `time_s,current_a[,voltage_v]` and resamples onto a uniform grid by
/// zero-order hold. `resample_dt = None` keeps the file's median spacing.
pub fn read_drive_cycle(path: &Path, resample_dt: Option<f64>) -> Result<DriveCycle> {
    parse_drive_cycle(open(path)?, path, resample_dt)
}

pub fn parse_drive_cycle<R: Read>(
    input: R,
    path: &Path,
    resample_dt: Option<f64>,
) -> Result<DriveCycle> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let schema = |msg: String| Error::Schema {
        path: path.to_path_buf(),
        msg,
    };
    let (Some(ti), Some(ci)) = (column(&headers, "time_s"), column(&headers, "current_a")) else {
        return Err(schema(format!(
            "expected columns time_s,current_a[,voltage_v], found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    };
    let vi = column(&headers, "voltage_v");

    let mut times = Vec::new();
    let mut current = Vec::new();
    let mut voltage = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let t = field(&record, ti, "time_s", path, line)?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("time {t} s does not increase (previous row {prev} s)"),
                });
            }
        }
        times.push(t);
        current.push(field(&record, ci, "current_a", path, line)?);
        if let Some(vi) = vi {
            voltage.push(field(&record, vi, "voltage_v", path, line)?);
        }
    }
    if times.len() < 2 {
        return Err(schema("a drive cycle needs at least two rows".into()));
    }

    let spacing = median_spacing(&times);
    let dt = resample_dt.unwrap_or(spacing);
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("resample period must be positive, got {dt}")));
    }
    let gap_threshold = (5.0 * dt).min(1.5 * spacing);
    let gaps = times
        .windows(2)
        .filter(|w| w[1] - w[0] > gap_threshold)
        .map(|w| Gap { from: w[0], to: w[1] })
        .collect();

    let t0 = times[0];
    let slack = 1e-9 * dt;
    let n = ((times[times.len() - 1] - t0 + slack) / dt).floor() as usize + 1;
    let mut held_i = Vec::with_capacity(n);
    let mut held_v = Vec::with_capacity(if vi.is_some() { n } else { 0 });
    let mut row = 0;
    for j in 0..n {
        let t = t0 + j as f64 * dt;
        while row + 1 < times.len() && times[row + 1] <= t + slack {
            row += 1;
        }
        held_i.push(current[row]);
        if vi.is_some() {
            held_v.push(voltage[row]);
        }
    }
    if n < 2 {
        return Err(schema(format!(
            "resampling a {} s record at dt = {dt} s leaves fewer than two samples",
            times[times.len() - 1] - t0
        )));
    }
    let profile = CurrentProfile::with_start(dt, held_i, t0)?;
    let voltage = if vi.is_some() {
        Some(VoltageTrace::new(dt, t0, held_v)?)
    } else {
        None
    };
    Ok(DriveCycle {
        profile,
        voltage,
        original_samples: times.len(),
        gaps,
    })
}

pub fn drive_cycle_csv(profile: &CurrentProfile, voltage: Option<&VoltageTrace>) -> String {
    let mut out = String::from(if voltage.is_some() {
        "time_s,current_a,voltage_v\n"
    } else {
        "time_s,current_a\n"
    });
    for (k, i) in profile.samples().iter().enumerate() {
        let _ = write!(out, "{},{}", profile.time(k), i);
        if let Some(v) = voltage {
            let _ = write!(out, ",{}", v.samples()[k]);
        }
        out.push('\n');
    }
    out
}

pub fn write_drive_cycle(
    path: &Path,
    profile: &CurrentProfile,
    voltage: Option<&VoltageTrace>,
) -> Result<()> {
    write_text(path, &drive_cycle_csv(profile, voltage))
}

/// Reads `soc_percent,voltage_v`.
pub fn read_ocv_sweep(path: &Path, direction: SweepDirection) -> Result<OcvSweep> {
    let mut rdr = reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let (Some(si), Some(vi)) = (column(&headers, "soc_percent"), column(&headers, "voltage_v"))
    else {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            msg: "expected columns soc_percent,voltage_v".into(),
        });
    };
    let mut z = Vec::new();
    let mut v = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        z.push(field(&record, si, "soc_percent", path, line)? / 100.0);
        v.push(field(&record, vi, "voltage_v", path, line)?);
    }
    OcvSweep::new(z, v, direction).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn ocv_sweep_csv(sweep: &OcvSweep) -> String {
    let mut out = String::from("soc_percent,voltage_v\n");
    for (z, v) in sweep.grid().iter().zip(sweep.voltages()) {
        let _ = writeln!(out, "{},{}", z * 100.0, v);
    }
    out
}

pub fn simulation_csv(profile: &CurrentProfile, sim: &Simulation) -> String {
    let mut out = String::from("time_s,current_a,voltage_v,soc_percent\n");
    for (k, i) in profile.samples().iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            profile.time(k),
            i,
            sim.voltage.samples()[k],
            sim.soc[k] * 100.0
        );
    }
    out
}

pub fn sensitivity_csv(report: &SensitivityReport) -> String {
    let mut out =
        String::from("soc_interval,parameter,morris_mean_v,enhanced_mean_v,stdev_v,n_effective\n");
    for iv in &report.intervals {
        for (name, c) in report.parameters.iter().zip(&iv.cells) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                iv.label, name, c.morris_mean, c.enhanced_mean, c.stdev, c.n_effective
            );
        }
    }
    out
}

/// Long format, one row per (interval, run, parameter); invalid runs leave
/// `xi_v` empty.
pub fn sensitivity_runs_csv(report: &SensitivityReport) -> String {
    let mut out = String::from("soc_interval,run,parameter,xi_v\n");
    for iv in &report.intervals {
        for (k, run) in iv.runs.iter().enumerate() {
            for (name, xi) in report.parameters.iter().zip(&run.effects) {
                match xi {
                    Some(x) => {
                        let _ = writeln!(out, "{},{k},{name},{x}", iv.label);
                    }
                    None => {
                        let _ = writeln!(out, "{},{k},{name},", iv.label);
                    }
                }
            }
        }
    }
    out
}

pub fn ranking_csv(ranked: &[(String, f64)]) -> String {
    let mut out = String::from("rank,parameter,mean_enhanced_v\n");
    for (k, (name, v)) in ranked.iter().enumerate() {
        let _ = writeln!(out, "{},{name},{v}", k + 1);
    }
    out
}

/// Parameter names from a ranking file, most sensitive first.
pub fn read_ranking(path: &Path) -> Result<Vec<String>> {
    let mut rdr = reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let Some(pi) = column(&headers, "parameter") else {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            msg: "expected a parameter column".into(),
        });
    };
    let mut names = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        names.push(record.get(pi).unwrap_or("").trim().to_string());
    }
    Ok(names)
}

fn warning_label(w: &IdentWarning) -> String {
    match w {
        IdentWarning::IndistinguishableTimeConstants => "indistinguishable-time-constants".into(),
        IdentWarning::NegligiblePair(k) => format!("negligible-pair-{k}"),
    }
}

pub fn fit_reports_csv(reports: &[(SocInterval, usize, FitReport)]) -> String {
    let mut out = String::from(
        "soc_interval,samples,tau1_s,tau2_s,c1_f,c2_f,rs_ohm,rmse_v,max_abs_v,iterations,converged,warnings\n",
    );
    for (iv, n, r) in reports {
        let p = &r.params;
        let warnings: Vec<String> = r.warnings.iter().map(warning_label).collect();
        let _ = writeln!(
            out,
            "{iv},{n},{},{},{},{},{},{},{},{},{},{}",
            p.tau1(),
            p.tau2(),
            p.c1(),
            p.c2(),
            p.rs(),
            r.rmse,
            r.max_abs,
            r.iterations,
            r.converged,
            warnings.join(";")
        );
    }
    out
}

pub fn validation_metrics_csv(results: &[CaseResult]) -> String {
    let mut out = String::from("case,fixed,rmse_v,max_abs_v\n");
    for r in results {
        let fixed: Vec<&str> = r.case.fixed.fixed().map(|p| p.name()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.case.name,
            fixed.join(";"),
            r.metrics.rmse,
            r.metrics.max_abs
        );
    }
    out
}

/// Long format `time_s,case,error_v` for error-trace plots.
pub fn error_traces_csv(profile: &CurrentProfile, results: &[CaseResult]) -> String {
    let mut out = String::from("time_s,case,error_v\n");
    for r in results {
        for (k, e) in r.errors.iter().enumerate() {
            let _ = writeln!(out, "{},{},{e}", profile.time(k), r.case.name);
        }
    }
    out
}

/// `soc_percent,averaged_v,fitted_v,residual_v` over the averaged sweep.
pub fn ocv_fit_csv(sweep: &OcvSweep, residuals: &[f64]) -> String {
    let mut out = String::from("soc_percent,averaged_v,fitted_v,residual_v\n");
    for ((z, v), r) in sweep.grid().iter().zip(sweep.voltages()).zip(residuals) {
        let _ = writeln!(out, "{},{v},{},{r}", z * 100.0, v + r);
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(PathBuf::from(path), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, dt: Option<f64>) -> Result<DriveCycle> {
        parse_drive_cycle(text.as_bytes(), Path::new("mem.csv"), dt)
    }

    #[test]
    fn constant_hold_upsamples() {
        let c = parse("time_s,current_a\n0,1\n1,1\n", Some(0.5)).unwrap();
        assert_eq!(c.profile.samples(), &[1.0, 1.0, 1.0]);
        assert_eq!(c.profile.dt(), 0.5);
        assert_eq!(c.original_samples, 2);
        assert!(c.voltage.is_none());
        assert!(c.gaps.is_empty());
    }

    #[test]
    fn hold_uses_last_row_at_or_before_grid_point() {
        let c = parse("time_s,current_a,voltage_v\n0,1,4\n1.5,2,3.9\n3,3,3.8\n", Some(1.0)).unwrap();
        assert_eq!(c.profile.samples(), &[1.0, 1.0, 2.0, 3.0]);
        assert_eq!(c.voltage.unwrap().samples(), &[4.0, 4.0, 3.9, 3.8]);
    }

    #[test]
    fn gap_reported_at_long_jump() {
        let c = parse("time_s,current_a\n0,1\n1,1\n3,1\n", Some(1.0)).unwrap();
        assert_eq!(c.gaps, vec![Gap { from: 1.0, to: 3.0 }]);
        assert_eq!(c.profile.len(), 4);
    }

    #[test]
    fn uniform_data_has_no_gap() {
        let c = parse("time_s,current_a\n0,1\n2,1\n4,1\n6,0\n", Some(1.0)).unwrap();
        assert!(c.gaps.is_empty());
    }

    #[test]
    fn default_period_is_file_spacing() {
        let c = parse("time_s,current_a\n10,1\n12,2\n14,3\n", None).unwrap();
        assert_eq!(c.profile.dt(), 2.0);
        assert_eq!(c.profile.start_time(), 10.0);
        assert_eq!(c.profile.samples(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn non_monotone_time_names_line() {
        let err = parse("time_s,current_a\n0,1\n1,1\n1,2\n", None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_number_names_line() {
        let err = parse("time_s,current_a\n0,1\n1,abc\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let err = parse("time,current_a\n0,1\n1,1\n", None).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "{err}");
    }

    #[test]
    fn extra_columns_and_order_are_tolerated() {
        let c = parse("soc,current_a,time_s\n1,2,0\n1,3,1\n", None).unwrap();
        assert_eq!(c.profile.samples(), &[2.0, 3.0]);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let samples: Vec<f64> = (0..50).map(|k| (k as f64 * 0.37).sin() / 3.0).collect();
        let profile = CurrentProfile::with_start(0.1, samples, 2.5).unwrap();
        let volts: Vec<f64> = (0..50).map(|k| 3.7 + 1e-4 / (k as f64 + 3.0)).collect();
        let v = VoltageTrace::new(0.1, 2.5, volts).unwrap();
        let text = drive_cycle_csv(&profile, Some(&v));
        let back = parse(&text, Some(0.1)).unwrap();
        assert_eq!(back.profile.samples(), profile.samples());
        assert_eq!(back.voltage.unwrap().samples(), v.samples());
        assert!(back.gaps.is_empty());
    }
}
