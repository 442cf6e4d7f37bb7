use proptest::prelude::*;

use smalltime::feedback::{gain_g, gain_h};
use smalltime::hompow::dilate;
use smalltime::lyapunov::{nested_scale, v_di, w_backstep, w_nested, LyapunovCertificate};
use smalltime::sim::{integrate, run_many, SimConfig};
use smalltime::verify::{integrator_loops, ReferenceLoop};

fn loops() -> Vec<ReferenceLoop> {
    integrator_loops().unwrap()
}

fn certificate(name: &str) -> LyapunovCertificate {
    match name {
        "di_bounded" => v_di(1.0, -0.25),
        "di_nested" => w_nested(1.0, -0.25, nested_scale(-0.25, 1.0)),
        "di_backstep" => w_backstep(1.0, -0.25, 0.0, 2.0),
        _ => w_backstep(1.0, -0.1, 0.5, 3.0),
    }
    .unwrap()
}

fn settle_time(r: &ReferenceLoop, x0: &[f64], dt: f64) -> f64 {
    let cfg = SimConfig::new(dt, 40.0).with_snap_radius(1e-20);
    let t = integrate(&r.field, x0, &cfg).unwrap();
    t.settling.settle_time.expect("settles within the horizon")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn integration_is_deterministic(which in 0usize..4, x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
        let r = &loops()[which];
        let cfg = SimConfig::new(1e-3, 5.0);
        let a = integrate(&r.field, &[x1, x2], &cfg).unwrap();
        let b = run_many(&r.field, &[vec![x1, x2]], &cfg).pop().unwrap().unwrap();
        prop_assert_eq!(a.states, b.states);
        prop_assert_eq!(a.controls, b.controls);
    }

    #[test]
    fn certificates_never_increase_along_trajectories(
        which in 0usize..4, x1 in -3.0f64..3.0, x2 in -3.0f64..3.0
    ) {
        let r = &loops()[which];
        let v = certificate(r.name);
        let t = integrate(&r.field, &[x1, x2], &SimConfig::new(1e-3, 20.0)).unwrap();
        let vals: Vec<f64> = t.states.iter().map(|x| v.value(x)).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] - w[0] <= 1e-8, "{}: {} -> {}", r.name, w[0], w[1]);
        }
    }

    #[test]
    fn settling_time_is_stable_under_step_halving(
        which in 0usize..4, x1 in 0.2f64..2.0, x2 in -1.0f64..1.0
    ) {
        let r = &loops()[which];
        let a = settle_time(r, &[x1, x2], 1e-3);
        let b = settle_time(r, &[x1, x2], 5e-4);
        prop_assert!((a - b).abs() <= 0.02 * b, "{}: {a} vs {b}", r.name);
    }

    #[test]
    fn settling_time_scales_with_dilation(lambda in 0.3f64..3.0, x2 in -1.0f64..1.0) {
        let r = &loops()[2];
        let w = r.field.claim().unwrap().weight.clone();
        let x0 = [1.0, x2];
        let t1 = settle_time(r, &x0, 1e-3);
        let tl = settle_time(r, &dilate(&w, lambda, &x0).unwrap(), 1e-3);
        let expect = lambda.powf(-r.kappa) * t1;
        prop_assert!((tl - expect).abs() <= 0.02 * expect, "{tl} vs {expect}");
    }

    #[test]
    fn gain_thresholds_grow_with_the_inner_gain(
        kappa in -0.45f64..-0.01, extra in 0.01f64..4.0, k in 0.1f64..10.0, nu in 0.0f64..0.4
    ) {
        let l = 1.0 / (1.0 + kappa) + extra;
        prop_assert!(gain_g(l, kappa, 2.0 * k).unwrap() > gain_g(l, kappa, k).unwrap());
        if let (Ok(a), Ok(b)) = (gain_h(l, kappa, nu, k), gain_h(l, kappa, nu, 2.0 * k)) {
            prop_assert!(b > a && a > 0.0);
        }
    }
}
