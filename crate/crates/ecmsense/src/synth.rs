//! Synthetic drive cycles, OCV sweeps and a reference cell, for tests and
//! for `gen-data`. The waveforms are surrogates with the statistical flavour
//! of urban drive cycles, not reproductions of any standard profile.

use ecmsense_core::rng;
use ecmsense_core::{
    simulate, Capacity, CellConfig, CellState, CurrentProfile, OcvSweep, ParameterLookup,
    ParameterSchedule, ParameterSet, SocInterval, SweepDirection, VoltageTrace,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

// Stream groups, kept apart from the Morris groups (small interval indices).
const CYCLE_GROUP: u64 = 0xC1C1_0000;
const NOISE_GROUP: u64 = 0x0015_0000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CycleKind {
    /// Long pulses, moderate regeneration.
    FudsLike,
    /// Short stop-and-go pulses with frequent idling.
    UdcLike,
    Constant,
    /// Pseudo-random binary sequence, `+scale` or `-scale` held for
    /// `bit_period` seconds.
    Prbs { bit_period: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSpec {
    pub kind: CycleKind,
    pub duration: f64,
    pub dt: f64,
    /// Amplitude in amperes: the level of `constant` and `prbs`, the peak
    /// of the charge-neutral pulses of the pulse cycles.
    pub scale: f64,
    pub seed: u64,
    /// Mean current of the pulse cycles; `0.2 * scale` when unset.
    pub target_mean: Option<f64>,
}

impl CycleSpec {
    pub fn new(kind: CycleKind, duration: f64, dt: f64, scale: f64, seed: u64) -> Self {
        CycleSpec {
            kind,
            duration,
            dt,
            scale,
            seed,
            target_mean: None,
        }
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.target_mean = Some(mean);
        self
    }
}

struct PulseShape {
    /// Length range of one pulse of a pair, seconds.
    len: (f64, f64),
    /// Pair amplitude range as a fraction of `scale`.
    level: (f64, f64),
    /// Chance of an idle gap between pairs, and its length range in seconds.
    p_gap: f64,
    gap: (f64, f64),
    /// Carrier segment length range in seconds, and the chance a segment idles.
    carrier_len: (f64, f64),
    p_carrier_idle: f64,
    /// Moving-average window in seconds.
    smooth: f64,
}

const MIN_NET_FRACTION: f64 = 0.01;

const FUDS_LIKE: PulseShape = PulseShape {
    len: (5.0, 60.0),
    level: (0.5, 1.0),
    p_gap: 0.15,
    gap: (5.0, 40.0),
    carrier_len: (20.0, 200.0),
    p_carrier_idle: 0.15,
    smooth: 3.0,
};

const UDC_LIKE: PulseShape = PulseShape {
    len: (2.0, 20.0),
    level: (0.2, 1.0),
    p_gap: 0.3,
    gap: (3.0, 30.0),
    carrier_len: (10.0, 80.0),
    p_carrier_idle: 0.3,
    smooth: 2.0,
};

/// Builds a current profile. Pulse cycles never return to the starting
/// state of charge (every prefix of the cumulative charge is positive) and
/// end at their deepest point (every suffix is positive).
pub fn generate_synthetic_cycle(spec: &CycleSpec) -> Result<CurrentProfile> {
    if !(spec.duration.is_finite() && spec.duration > 0.0) {
        return Err(Error::Config(format!("cycle duration must be positive, got {}", spec.duration)));
    }
    if !(spec.dt.is_finite() && spec.dt > 0.0 && spec.dt <= spec.duration) {
        return Err(Error::Config(format!(
            "sample period must lie in (0, duration], got {}",
            spec.dt
        )));
    }
    if !(spec.scale.is_finite() && spec.scale >= 0.0) {
        return Err(Error::Config(format!("scale must be non-negative, got {}", spec.scale)));
    }
    let n = ((spec.duration / spec.dt) + 1e-9).floor().max(2.0) as usize;
    let mut rng = rng::stream(spec.seed, CYCLE_GROUP, 0);
    if let Some(target) = spec.target_mean {
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::Config(format!("target mean must be positive, got {target}")));
        }
    }
    let samples = match spec.kind {
        CycleKind::Constant => vec![spec.scale; n],
        CycleKind::Prbs { bit_period } => {
            if !(bit_period.is_finite() && bit_period > 0.0) {
                return Err(Error::Config(format!("bit period must be positive, got {bit_period}")));
            }
            let per_bit = ((bit_period / spec.dt).round() as usize).max(1);
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let level = if rng.random::<bool>() { spec.scale } else { -spec.scale };
                let k = per_bit.min(n - out.len());
                out.extend(std::iter::repeat_n(level, k));
            }
            out
        }
        CycleKind::FudsLike => pulses(&FUDS_LIKE, n, spec, &mut rng),
        CycleKind::UdcLike => pulses(&UDC_LIKE, n, spec, &mut rng),
    };
    Ok(CurrentProfile::new(spec.dt, samples)?)
}

fn secs(rng: &mut rng::Stream, range: (f64, f64), dt: f64) -> usize {
    ((rng.random_range(range.0..=range.1) / dt).round() as usize).max(1)
}

/// Sum of a slow non-negative carrier holding the whole mean and
/// charge-neutral pulse pairs holding the swing. Pairs discharge first in
/// the first half and regenerate first in the second, so the cumulative
/// charge stays between the start and the end.
fn pulses(shape: &PulseShape, n: usize, spec: &CycleSpec, rng: &mut rng::Stream) -> Vec<f64> {
    let dt = spec.dt;
    let mean = spec.target_mean.unwrap_or(0.2 * spec.scale);

    let tail = ((10.0 / dt).round() as usize).clamp(1, n / 4 + 1).min(n);
    let mut carrier = Vec::with_capacity(n);
    while carrier.len() < n {
        let len = secs(rng, shape.carrier_len, dt).min(n - carrier.len());
        let idle = !carrier.is_empty() && rng.random::<f64>() < shape.p_carrier_idle;
        let level = if idle { 0.0 } else { rng.random_range(0.2..1.8) };
        carrier.extend(std::iter::repeat_n(level, len));
    }
    let tail_level = rng.random_range(0.2..1.8);
    carrier[n - tail..].iter_mut().for_each(|c| *c = tail_level);
    let f = mean / (carrier.iter().sum::<f64>() / n as f64);
    carrier.iter_mut().for_each(|c| *c *= f);

    let mut out = carrier;
    let end = n - tail;
    let mut k = 0;
    while k < end {
        if rng.random::<f64>() < shape.p_gap {
            k += secs(rng, shape.gap, dt);
            continue;
        }
        let a = spec.scale * rng.random_range(shape.level.0..=shape.level.1);
        let la = secs(rng, shape.len, dt);
        let b = spec.scale * rng.random_range(shape.level.0..=shape.level.1);
        let lb = ((a * la as f64 / b).round() as usize).max(1);
        if k + la + lb > end {
            break;
        }
        // Exact compensation after rounding the second length.
        let b = a * la as f64 / lb as f64;
        let sign = if k < n / 2 { 1.0 } else { -1.0 };
        out[k..k + la].iter_mut().for_each(|v| *v += sign * a);
        out[k + la..k + la + lb].iter_mut().for_each(|v| *v -= sign * b);
        k += la + lb;
    }

    let w = ((shape.smooth / dt).round() as usize).max(1);
    let mut out: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(w - 1);
            out[lo..=k].iter().sum::<f64>() / (k - lo + 1) as f64
        })
        .collect();

    // Smoothing and pairs that outgrow the early carrier can still nudge
    // the bounds; repair those samples, then land the mean exactly.
    enforce_charge_bounds(&mut out, MIN_NET_FRACTION * mean);
    let f = mean / (out.iter().sum::<f64>() / n as f64);
    out.iter_mut().for_each(|v| *v *= f);
    out
}

/// Every prefix and every suffix of the charge must exceed `floor` per
/// sample, which keeps the start and end strict SOC extrema without
/// flattening stretches into rests.
fn enforce_charge_bounds(x: &mut [f64], floor: f64) {
    let mut acc = 0.0;
    for (k, s) in x.iter_mut().enumerate() {
        let need = floor * (k + 1) as f64;
        if acc + *s < need {
            *s = need - acc;
        }
        acc += *s;
    }
    let mut acc = 0.0;
    for (k, s) in x.iter_mut().rev().enumerate() {
        let need = floor * (k + 1) as f64;
        if acc + *s < need {
            *s = need - acc;
        }
        acc += *s;
    }
}

/// Adds zero-mean Gaussian noise of standard deviation `rms`.
pub fn add_noise(trace: &VoltageTrace, rms: f64, seed: u64) -> Result<VoltageTrace> {
    if !(rms.is_finite() && rms >= 0.0) {
        return Err(Error::Config(format!("noise RMS must be non-negative, got {rms}")));
    }
    let mut samples = trace.samples().to_vec();
    if rms > 0.0 {
        let mut rng = rng::stream(seed, NOISE_GROUP, 0);
        for v in &mut samples {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += rms * e;
        }
    }
    Ok(VoltageTrace::new(trace.dt(), trace.start_time(), samples)?)
}

/// Ground-truth terminal voltage for `profile` plus seeded noise.
pub fn generate_synthetic_cell<P: ParameterLookup + ?Sized>(
    truth: &P,
    ocv: &ecmsense_core::OcvCurve,
    capacity: Capacity,
    profile: &CurrentProfile,
    init: CellState,
    noise_rms: f64,
    seed: u64,
) -> Result<VoltageTrace> {
    let sim = simulate(profile, &CellConfig::new(capacity, ocv, truth), init)?;
    add_noise(&sim.voltage, noise_rms, seed)
}

/// Reference OCV shape: linear ramp plus a logistic knee at low SOC.
pub fn reference_ocv(z: f64) -> f64 {
    3.45 + 0.65 * z - 0.3 / (1.0 + ((z - 0.12) / 0.03).exp())
}

/// Charge sweep (ascending SOC, `+hysteresis`) and discharge sweep
/// (descending SOC, `-hysteresis`) of the reference shape on
/// `[z_lo, z_hi]`.
pub fn reference_sweeps(
    points: usize,
    z_lo: f64,
    z_hi: f64,
    hysteresis: f64,
) -> Result<(OcvSweep, OcvSweep)> {
    if points < 2 {
        return Err(Error::Config("a sweep needs at least two points".into()));
    }
    let grid: Vec<f64> = (0..points)
        .map(|k| z_lo + (z_hi - z_lo) * k as f64 / (points - 1) as f64)
        .collect();
    let charge_v = grid.iter().map(|&z| reference_ocv(z) + hysteresis).collect();
    let charge = OcvSweep::new(grid.clone(), charge_v, SweepDirection::Charge)?;
    let down: Vec<f64> = grid.into_iter().rev().collect();
    let discharge_v = down.iter().map(|&z| reference_ocv(z) - hysteresis).collect();
    let discharge = OcvSweep::new(down, discharge_v, SweepDirection::Discharge)?;
    Ok((charge, discharge))
}

/// Implementer-chosen ground truth over ten-percent intervals from 100 % to
/// 10 %. Series resistance rises at low SOC, the slow time constant has a
/// mid-SOC minimum, and the fast branch varies by under ten percent.
pub fn reference_schedule() -> ParameterSchedule {
    const TAU1: [f64; 9] = [9.0, 10.0, 10.5, 11.0, 11.0, 10.5, 10.0, 9.5, 8.5];
    const TAU2: [f64; 9] = [120.0, 105.0, 95.0, 90.0, 92.0, 100.0, 115.0, 140.0, 180.0];
    const C1: [f64; 9] = [380.0, 410.0, 440.0, 460.0, 450.0, 430.0, 410.0, 380.0, 330.0];
    const C2: [f64; 9] = [3400.0, 3600.0, 3800.0, 3900.0, 3850.0, 3700.0, 3500.0, 3250.0, 3000.0];
    const RS: [f64; 9] = [0.032, 0.030, 0.031, 0.033, 0.036, 0.041, 0.048, 0.060, 0.085];
    let intervals = SocInterval::from_edges(&[100.0, 90.0, 80.0, 70.0, 60.0, 50.0, 40.0, 30.0, 20.0, 10.0])
        .expect("edges are descending");
    let rows = intervals
        .into_iter()
        .enumerate()
        .map(|(k, iv)| {
            let p = ParameterSet::new(TAU1[k], TAU2[k], C1[k], C2[k], RS[k]).expect("positive");
            (iv, p)
        })
        .collect();
    ParameterSchedule::new(rows).expect("contiguous")
}

/// A complete synthetic data set for the full pipeline.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub capacity: Capacity,
    pub charge: OcvSweep,
    pub discharge: OcvSweep,
    /// Nine blocks of ten percent each, separated by rests.
    pub training: (CurrentProfile, VoltageTrace),
    /// One urban-style cycle from full charge down to about 15 %.
    pub validation: (CurrentProfile, VoltageTrace),
    /// A single ten-percent block for Morris screening.
    pub excitation: CurrentProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub capacity_mah: f64,
    pub dt: f64,
    pub seed: u64,
    pub noise_rms: f64,
    pub rest: f64,
    /// Mean current of each training block; its length follows from the
    /// ten-percent charge.
    pub block_mean: f64,
    /// Nominal pulse amplitude of the training and excitation blocks.
    pub block_scale: f64,
    pub validation_mean: f64,
    pub validation_end_soc: f64,
    pub hysteresis: f64,
    pub sweep_points: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            capacity_mah: 740.0,
            dt: 1.0,
            seed: 0,
            noise_rms: 1e-3,
            rest: 3600.0,
            block_mean: 0.2,
            block_scale: 2.0,
            validation_mean: 0.25,
            validation_end_soc: 0.15,
            hysteresis: 0.015,
            sweep_points: 201,
        }
    }
}

/// Builds sweeps, training, validation and excitation cycles. Terminal
/// voltages come from `truth` with `ocv` as the open-circuit curve.
pub fn generate_dataset(
    spec: &DatasetSpec,
    truth: &ParameterSchedule,
    ocv: &ecmsense_core::OcvCurve,
) -> Result<Dataset> {
    let capacity = Capacity::from_mah(spec.capacity_mah)?;
    let (charge, discharge) = reference_sweeps(spec.sweep_points, 0.1, 1.0, spec.hysteresis)?;
    let dt = spec.dt;
    let block_len = 0.1 * capacity.coulombs() / spec.block_mean;
    let block = |k: u64| {
        let s = CycleSpec::new(
            CycleKind::FudsLike,
            block_len,
            dt,
            spec.block_scale,
            spec.seed.wrapping_add(k),
        )
            .with_mean(spec.block_mean * block_len / ((block_len / dt + 1e-9).floor() * dt));
        generate_synthetic_cycle(&s)
    };

    let rest = vec![0.0; (spec.rest / dt).round() as usize];
    let mut train = Vec::new();
    for k in 0..9 {
        train.extend_from_slice(block(k)?.samples());
        train.extend_from_slice(&rest);
    }
    let train = CurrentProfile::new(dt, train)?;
    let train_v = generate_synthetic_cell(
        truth,
        ocv,
        capacity,
        &train,
        CellState::rested(1.0),
        spec.noise_rms,
        spec.seed.wrapping_add(100),
    )?;

    let val_len = (1.0 - spec.validation_end_soc) * capacity.coulombs() / spec.validation_mean;
    let val = generate_synthetic_cycle(
        &CycleSpec::new(
            CycleKind::UdcLike,
            val_len,
            dt,
            spec.block_scale,
            spec.seed.wrapping_add(200),
        )
            .with_mean(spec.validation_mean),
    )?;
    let val_v = generate_synthetic_cell(
        truth,
        ocv,
        capacity,
        &val,
        CellState::rested(1.0),
        spec.noise_rms,
        spec.seed.wrapping_add(300),
    )?;

    let excitation = block(400)?;
    Ok(Dataset {
        capacity,
        charge,
        discharge,
        training: (train, train_v),
        validation: (val, val_v),
        excitation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ecmsense_core::coulomb_count;
    use ecmsense_core::ocv::{average_sweeps, fit_polynomial};

    fn prefixes(x: &[f64]) -> Vec<f64> {
        x.iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    #[test]
    fn constant_cycle_is_flat() {
        let p = generate_synthetic_cycle(&CycleSpec::new(CycleKind::Constant, 100.0, 1.0, 1.0, 3))
            .unwrap();
        assert_eq!(p.len(), 100);
        assert!(p.samples().iter().all(|&i| i == 1.0));
    }

    #[test]
    fn prbs_alphabet_and_bit_period() {
        let spec = CycleSpec::new(CycleKind::Prbs { bit_period: 5.0 }, 1000.0, 1.0, 0.7, 11);
        let p = generate_synthetic_cycle(&spec).unwrap();
        assert!(p.samples().iter().all(|&i| i == 0.7 || i == -0.7));
        for chunk in p.samples().chunks(5) {
            assert!(chunk.iter().all(|&i| i == chunk[0]));
        }
        assert!(p.samples().contains(&0.7) && p.samples().contains(&-0.7));
    }

    #[test]
    fn normalized_block_removes_ten_percent() {
        let q = Capacity::from_coulombs(2664.0).unwrap();
        for seed in 0..5 {
            let spec = CycleSpec::new(CycleKind::FudsLike, 1332.0, 1.0, 1.0, seed).with_mean(0.2);
            let p = generate_synthetic_cycle(&spec).unwrap();
            assert_eq!(p.len(), 1332);
            let z = coulomb_count(&p, q, 1.0).unwrap();
            assert!((z[z.len() - 1] - 0.9).abs() < 1e-12, "{}", z[z.len() - 1]);
        }
    }

    #[test]
    fn pulse_cycles_start_highest_and_end_lowest() {
        for kind in [CycleKind::FudsLike, CycleKind::UdcLike] {
            for seed in 0..10 {
                let p = generate_synthetic_cycle(&CycleSpec::new(kind, 3000.0, 1.0, 2.0, seed))
                    .unwrap();
                let s = p.samples();
                let pre = prefixes(s);
                let total = pre[pre.len() - 1];
                assert!(pre.iter().all(|&c| c > 0.0));
                assert!(pre[..pre.len() - 1].iter().all(|&c| c < total));
                assert!(s[s.len() - 1] > 0.0);
                assert!(s.iter().any(|&i| i < 0.0), "no regeneration for seed {seed}");
                assert!(p.mean() > 0.0);
            }
        }
    }

    #[test]
    fn cycles_are_seed_deterministic() {
        let a = CycleSpec::new(CycleKind::UdcLike, 500.0, 0.5, 1.0, 9);
        assert_eq!(
            generate_synthetic_cycle(&a).unwrap(),
            generate_synthetic_cycle(&a).unwrap()
        );
        let b = CycleSpec { seed: 10, ..a };
        assert_ne!(
            generate_synthetic_cycle(&a).unwrap(),
            generate_synthetic_cycle(&b).unwrap()
        );
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(generate_synthetic_cycle(&CycleSpec::new(CycleKind::Constant, 0.0, 1.0, 1.0, 0)).is_err());
        assert!(generate_synthetic_cycle(&CycleSpec::new(CycleKind::Constant, 10.0, 0.0, 1.0, 0)).is_err());
    }

    #[test]
    fn noise_statistics() {
        let base = VoltageTrace::new(1.0, 0.0, vec![3.7; 100_000]).unwrap();
        let noisy = add_noise(&base, 1e-3, 4).unwrap();
        let r: Vec<f64> = noisy.samples().iter().map(|v| v - 3.7).collect();
        let rms = (r.iter().map(|e| e * e).sum::<f64>() / r.len() as f64).sqrt();
        assert!((rms - 1e-3).abs() < 2e-5, "rms {rms}");
        let other = add_noise(&base, 1e-3, 5).unwrap();
        assert_ne!(noisy.samples(), other.samples());
        assert_eq!(add_noise(&base, 0.0, 4).unwrap(), base);
    }

    #[test]
    fn reference_shape_fits_well_at_degree_ten() {
        let (c, d) = reference_sweeps(201, 0.1, 1.0, 0.015).unwrap();
        let avg = average_sweeps(&c, &d).unwrap();
        for (z, v) in avg.grid().iter().zip(avg.voltages()) {
            assert!((v - reference_ocv(*z)).abs() < 1e-12);
        }
        let m = fit_polynomial(&avg, 10).unwrap().metrics();
        assert!(m.rmse <= 5e-3 && m.max_abs <= 15e-3, "{m:?}");
    }

    #[test]
    fn reference_schedule_is_well_separated() {
        let s = reference_schedule();
        assert_eq!(s.intervals().len(), 9);
        for (_, p) in s.intervals() {
            assert!(p.tau2() / p.tau1() >= 5.0);
        }
    }
}
