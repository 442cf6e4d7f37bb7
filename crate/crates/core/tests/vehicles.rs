//! Two-phase behaviour of the vehicle laws at periods long enough for the
//! slow lateral loops to finish within the first half period.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smalltime::feedback::{SliderLaw, SliderOptions, UnicycleLaw};
use smalltime::hompow::{sample_sphere, Weight};
use smalltime::plants::{
    slider_inertial, slider_law_for_inertial, slider_quadratic, unicycle_exact,
    unicycle_quadratic, SliderParams, VectorField,
};
use smalltime::sim::{run_many, SimConfig};
use smalltime::verify::{slider_reference_gains, unicycle_reference_gains};

const TOL: f64 = 1e-6;

fn ics(w: &Weight, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..16).map(|_| sample_sphere(w, radius, &mut rng)).collect()
}

/// Worst `(block at T/2, block on [T/2, T], state at 2T)` in the max norm.
fn two_phase(field: &VectorField, ics: &[Vec<f64>], block: &[usize], period: f64) -> [f64; 3] {
    let cfg = SimConfig::for_period(period, 2.0 * period + period / 1000.0);
    let sup = |x: &[f64], idx: &[usize]| idx.iter().map(|&j| x[j].abs()).fold(0.0, f64::max);
    let mut worst = [0.0f64; 3];
    for run in run_many(field, ics, &cfg) {
        let t = run.unwrap();
        assert!(t.abort.is_none(), "{:?}", t.abort);
        let (ih, it) = (t.index_at(0.5 * period), t.index_at(period));
        let held = (ih..=it).map(|k| sup(&t.states[k], block)).fold(0.0, f64::max);
        let all: Vec<usize> = (0..field.state_dim()).collect();
        let end = sup(&t.states[t.index_at(2.0 * period)], &all);
        worst[0] = worst[0].max(sup(&t.states[ih], block));
        worst[1] = worst[1].max(held);
        worst[2] = worst[2].max(end);
    }
    worst
}

#[test]
fn unicycle_settles_in_two_periods_of_twenty_seconds() {
    let period = 20.0;
    let law = UnicycleLaw::new(&unicycle_reference_gains().unwrap(), period).unwrap();
    let x0 = ics(&law.phase_one_claim().weight, 0.05, 3);
    for plant in [unicycle_quadratic(), unicycle_exact()] {
        let field = plant.close_loop(law.into_feedback()).unwrap();
        let w = two_phase(&field, &x0, &[1, 2], period);
        assert!(w.iter().all(|&v| v <= TOL), "{}: {w:?}", plant.label());
    }
}

#[test]
fn slider_settles_in_two_periods_of_eighty_seconds() {
    let period = 80.0;
    let law = SliderLaw::new(&slider_reference_gains(2.0, 3.0), period, SliderOptions::default()).unwrap();
    let x0 = ics(&law.phase_one_weight(), 0.01, 4);
    let fb = law.into_feedback();
    let p = SliderParams::default();
    let fields = [
        slider_quadratic().close_loop(fb.clone()).unwrap(),
        slider_inertial(p).unwrap().close_loop(slider_law_for_inertial(&fb, p).unwrap()).unwrap(),
    ];
    for field in &fields {
        let w = two_phase(field, &x0, &[2, 3, 4, 5], period);
        assert!(w.iter().all(|&v| v <= TOL), "{}: {w:?}", field.label());
    }
}

#[test]
fn unicycle_lateral_pair_is_still_moving_at_half_of_a_unit_period() {
    let law = UnicycleLaw::new(&unicycle_reference_gains().unwrap(), 1.0).unwrap();
    let x0 = ics(&law.phase_one_claim().weight, 0.05, 3);
    let field = unicycle_quadratic().close_loop(law.into_feedback()).unwrap();
    let w = two_phase(&field, &x0, &[1, 2], 1.0);
    assert!(w[0] > 1e-2, "{w:?}");
}
