use ecmsense_core::ecm::coulomb_count;
use ecmsense_core::morris::{run_morris, LinearModel, MorrisConfig, MorrisProblem, ParameterDistribution};
use ecmsense_core::{simulate, Capacity, CellConfig, CellState, CurrentProfile, OcvCurve, ParameterSet};
use proptest::prelude::*;

// Affine OCV so the whole model is linear in the current.
fn affine_ocv() -> OcvCurve {
    OcvCurve::new(vec![3.2, 0.8], 0.0, 1.0).unwrap()
}

fn big_cell() -> Capacity {
    Capacity::from_mah(1.0e6).unwrap()
}

fn params() -> impl Strategy<Value = ParameterSet> {
    (1.0f64..50.0, 1.0f64..20.0, 50.0f64..2000.0, 500.0f64..20000.0, 0.005f64..0.1).prop_map(
        |(tau1, ratio, c1, c2, rs)| ParameterSet::new(tau1, tau1 * ratio, c1, c2, rs).unwrap(),
    )
}

fn currents(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2..max_len)
}

fn run(p: &ParameterSet, dt: f64, i: Vec<f64>, init: CellState) -> Vec<f64> {
    let ocv = affine_ocv();
    let prof = CurrentProfile::new(dt, i).unwrap();
    simulate(&prof, &CellConfig::new(big_cell(), &ocv, p), init)
        .unwrap()
        .voltage
        .into_samples()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn response_superposes(p in params(), a in currents(200), seed in 0u64..1000, dt in 0.1f64..5.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(k, x)| ((k as u64 * 7 + seed) % 11) as f64 * 0.3 - 1.5 - 0.5 * x).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let init = CellState::rested(0.5);
        let rest = run(&p, dt, vec![0.0; a.len()], init);
        let va = run(&p, dt, a, init);
        let vb = run(&p, dt, b, init);
        let vs = run(&p, dt, sum, init);
        for k in 0..vs.len() {
            let lhs = vs[k] - rest[k];
            let rhs = (va[k] - rest[k]) + (vb[k] - rest[k]);
            prop_assert!((lhs - rhs).abs() <= 1e-12, "k={k} {lhs} {rhs}");
        }
    }

    #[test]
    fn split_runs_chain(p in params(), i in currents(300), cut in any::<usize>(), dt in 0.1f64..10.0) {
        prop_assume!(i.len() >= 4);
        let cut = 2 + cut % (i.len() - 3);
        let ocv = affine_ocv();
        let q = Capacity::from_mah(500.0).unwrap();
        let cfg = CellConfig::new(q, &ocv, &p);
        let init = CellState { v1: 0.01, v2: -0.02, z: 0.5 };
        let whole = simulate(&CurrentProfile::new(dt, i.clone()).unwrap(), &cfg, init).unwrap();
        prop_assume!(whole.first_clamp.is_none());
        let head = simulate(&CurrentProfile::new(dt, i[..cut].to_vec()).unwrap(), &cfg, init).unwrap();
        let tail = simulate(&CurrentProfile::new(dt, i[cut..].to_vec()).unwrap(), &cfg, head.final_state).unwrap();
        let mut joined = head.voltage.into_samples();
        joined.extend(tail.voltage.samples());
        for (a, b) in joined.iter().zip(whole.voltage.samples()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((tail.final_state.v1 - whole.final_state.v1).abs() <= 1e-12);
        prop_assert!((tail.final_state.v2 - whole.final_state.v2).abs() <= 1e-12);
        prop_assert!((tail.final_state.z - whole.final_state.z).abs() <= 1e-12);
    }

    #[test]
    fn charge_is_conserved(i in currents(500), dt in 0.01f64..10.0, mah in 100.0f64..5000.0, z0 in 0.0f64..=1.0) {
        let q = Capacity::from_mah(mah).unwrap();
        let prof = CurrentProfile::new(dt, i.clone()).unwrap();
        let z = coulomb_count(&prof, q, z0).unwrap();
        let moved: f64 = i.iter().sum::<f64>() * dt;
        prop_assert!((z[z.len() - 1] - (z0 - moved / (mah * 3.6))).abs() <= 1e-12);
        for k in 1..z.len() {
            prop_assert!((z[k - 1] - z[k] - i[k - 1] * dt / q.coulombs()).abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_current_matches_closed_form(p in params(), amps in -5.0f64..5.0, dt in 0.01f64..20.0, n in 2usize..400) {
        let ocv = affine_ocv();
        let q = big_cell();
        let v = run(&p, dt, vec![amps; n], CellState::rested(0.5));
        for (k, vk) in v.iter().enumerate() {
            let t = k as f64 * dt;
            let z = 0.5 - amps * t / q.coulombs();
            let v1 = amps * p.r1() * (1.0 - (-t / p.tau1()).exp());
            let v2 = amps * p.r2() * (1.0 - (-t / p.tau2()).exp());
            let want = ocv.eval_unchecked(z) - v1 - v2 - amps * p.rs();
            prop_assert!((vk - want).abs() <= 1e-9, "k={k} {vk} {want}");
        }
    }

    #[test]
    fn linear_effects_scale_with_sigma(
        w in prop::collection::vec(-10.0f64..10.0, 1..6),
        factor in 0.01f64..100.0,
        delta in prop::sample::select(vec![0.5, 1.0, 2.0]),
        seed in any::<u64>(),
    ) {
        let q = w.len();
        let mu: Vec<f64> = (0..q).map(|i| i as f64 - 1.0).collect();
        let sigma: Vec<f64> = (0..q).map(|i| 0.5 + i as f64).collect();
        let dist = ParameterDistribution::new(mu, sigma).unwrap();
        let problem = |d: ParameterDistribution| MorrisProblem { label: "g".into(), model: LinearModel::new(w.clone()), dist: d };
        let cfg = MorrisConfig { n_runs: 16, delta, seed, ..MorrisConfig::default() };
        let base = run_morris(&[problem(dist.clone())], &cfg).unwrap();
        let scaled = run_morris(&[problem(dist.scaled(factor).unwrap())], &cfg).unwrap();
        for (i, (a, b)) in base.intervals[0].cells.iter().zip(&scaled.intervals[0].cells).enumerate() {
            let want = -w[i] * dist.sigma()[i] * factor;
            prop_assert!((b.morris_mean - want).abs() <= 1e-12 * (1.0 + want.abs()));
            prop_assert!((b.morris_mean - factor * a.morris_mean).abs() <= 1e-12 * (1.0 + want.abs()));
            prop_assert!((b.enhanced_mean - factor * a.enhanced_mean).abs() <= 1e-12 * (1.0 + want.abs()));
            prop_assert!(b.enhanced_mean >= b.morris_mean.abs());
        }
    }
}
