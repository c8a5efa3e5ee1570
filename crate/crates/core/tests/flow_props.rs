use gfol_core::flow::{Thetas, RETRACT_TOL};
use gfol_core::linalg::max_abs;
use gfol_core::{
    builtin, closed_form_mu, integrate_flow, limit_metric, retract_and_verify, FlowConfig,
};
use proptest::prelude::*;

/// Independent logistic oracle, written out rather than calling the library.
fn oracle(mu0: f64, phi: f64, t: f64) -> f64 {
    let e = (4.0 * phi * t).exp();
    mu0 * phi / (mu0 + e * (phi - mu0))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn spectrum_follows_the_logistic_oracle_on_builtins() {
    for (name, params, phi) in [
        ("heisenberg", vec![2.0, 3.0], 1.0),
        ("heisenberg", vec![0.5], 2.0),
        ("quat_heisenberg", vec![2.0], 3.0),
        ("s_model", vec![1.0, 2.0, 3.0], 2.0),
        ("su2", vec![], 1.5),
    ] {
        let m = builtin(name, &params).unwrap();
        let traj = integrate_flow(&m, &FlowConfig::new(phi).with_t_end(-3.0)).unwrap();
        let mu0 = sorted(traj.samples[0].ric_eigs.clone());
        for s in &traj.samples {
            let want = sorted(mu0.iter().map(|&mu| oracle(mu, phi, s.t)).collect());
            let got = sorted(s.ric_eigs.clone());
            for (g, w) in got.iter().zip(&want) {
                assert!(
                    (g - w).abs() <= 1e-8 * w.max(1.0),
                    "{name} t={} {g} vs {w}",
                    s.t
                );
            }
        }
        assert!(traj.vertical_block_constant, "{name}");
    }
}

#[test]
fn diagonal_metrics_stay_diagonal_and_interpolate_monotonically() {
    let m = builtin("heisenberg", &[2.0, 3.0]).unwrap();
    let phi = 1.0;
    let ric0 = Thetas::of(&m).ric(&m.horizontal_metric()).unwrap();
    let traj = integrate_flow(&m, &FlowConfig::new(phi).with_t_end(-2.0)).unwrap();
    let mut prev: Option<Vec<f64>> = None;
    for s in &traj.samples {
        let g = s.metric();
        let diag: Vec<f64> = (0..g.nrows()).map(|i| g[(i, i)]).collect();
        let off = &g - nalgebra::DMatrix::from_diagonal(&g.diagonal());
        assert!(max_abs(&off) <= 1e-12, "t={}", s.t);
        for (k, gk) in diag.iter().enumerate() {
            let mu0 = ric0[(k, k)];
            let expect = (mu0 * mu0 / (oracle(mu0, phi, s.t) * oracle(mu0, phi, s.t))).powf(0.25);
            assert!(
                (gk - expect).abs() <= 1e-8 * expect,
                "t={} slot {k}: {gk} vs {expect}",
                s.t
            );
        }
        if let Some(p) = &prev {
            // μ₀ > Φ everywhere here, so each metric coefficient grows.
            assert!(diag.iter().zip(p).all(|(a, b)| a >= b));
        }
        prev = Some(diag);
    }
}

#[test]
fn long_integration_approaches_the_limit_metric() {
    for (name, params, phi) in [
        ("heisenberg", vec![2.0, 3.0], 1.0),
        ("quat_heisenberg", vec![2.0], 3.0),
    ] {
        let m = builtin(name, &params).unwrap();
        let limit = limit_metric(&m, phi).unwrap();
        let traj = integrate_flow(&m, &FlowConfig::new(phi).with_t_end(-6.0)).unwrap();
        assert!(traj.converged, "{name}");
        let end = traj.last().metric();
        assert!(max_abs(&(end - limit)) <= 1e-5, "{name}");
    }
}

#[test]
fn per_sample_residuals_stay_small() {
    let m = builtin("s_model", &[1.0, 2.0, 3.0]).unwrap();
    let traj = integrate_flow(&m, &FlowConfig::new(2.0).with_t_end(-2.0)).unwrap();
    for s in &traj.samples {
        for key in ["ode", "tsharp", "commutator"] {
            assert!(
                s.residuals[key] <= 1e-6,
                "{key} at t={}: {}",
                s.t,
                s.residuals[key]
            );
        }
        for key in ["compat", "a_shape", "vertical_drift"] {
            assert!(
                s.residuals[key] <= 1e-12,
                "{key} at t={}: {}",
                s.t,
                s.residuals[key]
            );
        }
    }
}

#[test]
fn retraction_of_the_s_model_is_classical() {
    let m = builtin("s_model", &[1.0, 2.0, 3.0]).unwrap();
    let rep = retract_and_verify(&m, &FlowConfig::new(2.0).with_t_end(-6.0)).unwrap();
    assert!(rep.passes, "{rep:?}");
    assert!(rep.q_deviation <= RETRACT_TOL);
    assert!(rep.classical_axioms <= RETRACT_TOL);
    assert!((rep.mixed_sectional.0 - rep.mixed_sectional_expected).abs() <= RETRACT_TOL);
    assert!((rep.mixed_sectional.1 - rep.mixed_sectional_expected).abs() <= RETRACT_TOL);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_heisenberg_weights_follow_the_oracle(
        a in 0.3f64..2.5,
        b in 0.3f64..2.5,
        phi in 0.5f64..3.0,
    ) {
        let m = builtin("heisenberg", &[a, b]).unwrap();
        let traj = integrate_flow(&m, &FlowConfig::new(phi).with_t_end(-1.0)).unwrap();
        let mu0 = sorted(traj.samples[0].ric_eigs.clone());
        let last = traj.last();
        let want = sorted(mu0.iter().map(|&mu| oracle(mu, phi, last.t)).collect());
        for (g, w) in sorted(last.ric_eigs.clone()).iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-7 * w.max(1.0));
        }
        let lib = closed_form_mu(mu0[0], phi, last.t).unwrap();
        prop_assert!((lib - want[0]).abs() <= 1e-12 * want[0].max(1.0));
    }
}
