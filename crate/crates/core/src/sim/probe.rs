//! Campaigns built on many simulations: scaling, gain search, basin size.

use rayon::prelude::*;
use serde::Serialize;

use super::{integrate, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::feedback::StateFeedback;
use crate::hompow::{dilate, sample_unit_sphere, seeded_rng, Weight};
use crate::plants::VectorField;

/// Runs every initial condition in parallel; results keep the input order.
pub fn run_many(field: &VectorField, ics: &[Vec<f64>], cfg: &SimConfig) -> Vec<Result<Trajectory>> {
    ics.par_iter().map(|x0| integrate(field, x0, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub lambdas: Vec<f64>,
    pub settle_times: Vec<Option<f64>>,
    /// `T(λ)/T(1)` when λ = 1 is among the probes, else relative to the first.
    pub ratios: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub expected_slope: f64,
    pub conclusive: bool,
    pub failing_lambda: Option<f64>,
}

/// Settling time from `Λ_r(λ, x0)` for each λ and the least-squares slope
/// of `log T(λ)` against `log λ`, which should be `−κ` for a field
/// homogeneous of degree `κ`.
///
/// The time used is the first instant the state is exactly zero (the snap
/// event), so `cfg.snap_radius` should be small enough that the remaining
/// time below it is negligible.
pub fn scaling_probe(
    field: &VectorField,
    w: &Weight,
    kappa: f64,
    x0: &[f64],
    lambdas: &[f64],
    cfg: &SimConfig,
) -> Result<ScalingReport> {
    if !field.is_autonomous() {
        return Err(Error::Config("scaling probe needs an autonomous field".into()));
    }
    if !(kappa < 0.0) {
        return Err(Error::Domain(format!("scaling probe needs kappa < 0, got {kappa}")));
    }
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain(format!("invalid dilation factors {lambdas:?}")));
    }
    let ics = lambdas
        .iter()
        .map(|&l| dilate(w, l, x0))
        .collect::<Result<Vec<_>>>()?;
    let cfg = cfg.clone().with_weight(w.clone());
    let runs = run_many(field, &ics, &cfg);
    let mut settle_times = Vec::with_capacity(lambdas.len());
    let mut failing = None;
    for (run, &l) in runs.into_iter().zip(lambdas) {
        let traj = run?;
        let t = traj.first_event(super::EventKind::Snapped).or(if traj.settling.settled {
            traj.settling.settle_time
        } else {
            None
        });
        if t.is_none() && failing.is_none() {
            failing = Some(l);
        }
        settle_times.push(t);
    }
    let reference = lambdas
        .iter()
        .position(|&l| l == 1.0)
        .unwrap_or(0);
    let ratios = settle_times
        .iter()
        .map(|t| match (t, settle_times[reference]) {
            (Some(a), Some(b)) if b > 0.0 => a / b,
            _ => f64::NAN,
        })
        .collect();
    let (slope, intercept) = if failing.is_none() && lambdas.len() >= 2 {
        let pts: Vec<(f64, f64)> = lambdas
            .iter()
            .zip(&settle_times)
            .map(|(l, t)| (l.ln(), t.expect("all settled").ln()))
            .collect();
        least_squares(&pts)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ScalingReport {
        lambdas: lambdas.to_vec(),
        settle_times,
        ratios,
        slope,
        intercept,
        expected_slope: -kappa,
        conclusive: failing.is_none(),
        failing_lambda: failing,
    })
}

pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainTrial {
    pub gain: f64,
    pub pass: bool,
    /// Indices of initial conditions that did not settle.
    pub failures: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutotuneReport {
    pub gain: f64,
    pub trials: Vec<GainTrial>,
}

/// Doubling search from `k_min` followed by ten bisection steps; returns
/// the smallest gain found for which every initial condition settles
/// within `cfg.t_end`. The family is assumed monotone in the gain.
pub fn gain_autotune(
    plant: &VectorField,
    family: &(dyn Fn(f64) -> Result<StateFeedback> + Sync),
    ics: &[Vec<f64>],
    cfg: &SimConfig,
    k_min: f64,
) -> Result<AutotuneReport> {
    if ics.is_empty() {
        return Err(Error::Config("gain search needs at least one initial condition".into()));
    }
    if !(k_min > 0.0 && k_min.is_finite()) {
        return Err(Error::Domain(format!("k_min must be > 0, got {k_min}")));
    }
    let mut trials = Vec::new();
    let mut trial = |k: f64| -> Result<bool> {
        let field = plant.close_loop(family(k)?)?;
        let failures: Vec<usize> = run_many(&field, ics, cfg)
            .into_iter()
            .enumerate()
            .filter_map(|(i, r)| match r {
                Ok(t) if t.settling.settled && t.abort.is_none() => None,
                _ => Some(i),
            })
            .collect();
        let pass = failures.is_empty();
        log::debug!("gain {k}: {} of {} runs unsettled", failures.len(), ics.len());
        trials.push(GainTrial { gain: k, pass, failures });
        Ok(pass)
    };

    let cap = k_min * 2f64.powi(20);
    let mut hi = k_min;
    if trial(hi)? {
        return Ok(AutotuneReport { gain: hi, trials });
    }
    loop {
        hi *= 2.0;
        if hi > cap {
            let last = trials.last().expect("at least one trial");
            return Err(Error::Search(format!(
                "no gain up to {cap} settles all initial conditions; at {} unsettled runs: {:?}",
                last.gain, last.failures
            )));
        }
        if trial(hi)? {
            break;
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..10 {
        let mid = 0.5 * (lo + hi);
        if trial(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(AutotuneReport { gain: hi, trials })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusOutcome {
    pub radius: f64,
    pub all_settled: bool,
    /// Direction indices that failed to settle by `2T`.
    pub failures: Vec<usize>,
    pub worst_final_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinReport {
    /// Largest grid radius such that it and every smaller grid radius settled.
    pub radius: f64,
    pub outcomes: Vec<RadiusOutcome>,
}

/// Launches `directions` states on each homogeneous sphere of the grid and
/// checks that each run settles by two periods. Stops at the first radius
/// with a failure.
pub fn basin_probe(
    closed_loop: &VectorField,
    w: &Weight,
    radius_grid: &[f64],
    directions: usize,
    cfg: &SimConfig,
) -> Result<BasinReport> {
    let period = closed_loop
        .period()
        .ok_or_else(|| Error::Config("basin probe needs a periodic closed loop".into()))?;
    let deadline = 2.0 * period;
    let cfg = cfg.clone().with_weight(w.clone());
    let dwell = cfg.dwell(super::aligned_step(closed_loop, cfg.dt)?.0);
    if cfg.t_end < deadline + dwell {
        return Err(Error::Config(format!(
            "horizon {} shorter than two periods plus dwell ({})",
            cfg.t_end,
            deadline + dwell
        )));
    }
    let mut rng = seeded_rng(cfg.rng_seed);
    let dirs: Vec<Vec<f64>> = (0..directions).map(|_| sample_unit_sphere(w, &mut rng)).collect();
    let mut grid = radius_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));

    let mut best = 0.0;
    let mut outcomes = Vec::new();
    for r in grid {
        if r == 0.0 {
            outcomes.push(RadiusOutcome {
                radius: 0.0,
                all_settled: true,
                failures: vec![],
                worst_final_norm: 0.0,
            });
            continue;
        }
        let ics = dirs.iter().map(|d| dilate(w, r, d)).collect::<Result<Vec<_>>>()?;
        let runs = run_many(closed_loop, &ics, &cfg);
        let mut failures = Vec::new();
        let mut worst: f64 = 0.0;
        for (i, run) in runs.into_iter().enumerate() {
            let traj = run?;
            worst = worst.max(traj.settling.final_norm);
            let ok = traj.abort.is_none()
                && traj.settling.settled
                && traj.settling.settle_time.is_some_and(|t| t <= deadline + 0.5 * traj.dt);
            if !ok {
                failures.push(i);
            }
        }
        let all_settled = failures.is_empty();
        outcomes.push(RadiusOutcome {
            radius: r,
            all_settled,
            failures,
            worst_final_norm: worst,
        });
        if !all_settled {
            break;
        }
        best = r;
    }
    Ok(BasinReport { radius: best, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{di_law_bounded, DesingularizedLaw};
    use crate::plants::double_integrator;

    #[test]
    fn least_squares_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.3 * i as f64 - 1.0)).collect();
        let (s, c) = least_squares(&pts);
        assert!((s - 0.3).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
    }

    #[test]
    fn autotune_returns_k_min_for_origin() {
        let family = |k: f64| Ok(DesingularizedLaw::new_unchecked(1.0, k, -0.25, 0.0, 2.0).into_feedback());
        let r = gain_autotune(&double_integrator(), &family, &[vec![0.0, 0.0]], &SimConfig::new(1e-2, 1.0), 0.5)
            .unwrap();
        assert_eq!(r.gain, 0.5);
        assert_eq!(r.trials.len(), 1);
    }

    #[test]
    fn autotune_fails_for_zero_law() {
        let family = |_: f64| Ok(StateFeedback::autonomous("zero", 2, 1, |_, u| u[0] = 0.0));
        let err = gain_autotune(&double_integrator(), &family, &[vec![1.0, 0.0]], &SimConfig::new(0.1, 1.0), 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::Search(_)));
    }

    #[test]
    fn run_many_keeps_order() {
        let cl = double_integrator().close_loop(di_law_bounded(1.0, 1.0, -0.25).unwrap()).unwrap();
        let ics: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.1, 0.0]).collect();
        let runs = run_many(&cl, &ics, &SimConfig::new(1e-2, 0.1));
        for (r, x0) in runs.iter().zip(&ics) {
            assert_eq!(&r.as_ref().unwrap().states[0], x0);
        }
    }

    #[test]
    fn probes_validate_inputs() {
        let cl = double_integrator().close_loop(di_law_bounded(1.0, 1.0, -0.25).unwrap()).unwrap();
        let w = Weight::new(vec![1.0, 0.75]).unwrap();
        let cfg = SimConfig::new(1e-2, 1.0);
        assert!(scaling_probe(&cl, &w, 0.1, &[1.0, 0.0], &[1.0], &cfg).is_err());
        assert!(scaling_probe(&cl, &w, -0.25, &[1.0, 0.0], &[0.0], &cfg).is_err());
        assert!(basin_probe(&cl, &w, &[0.1], 4, &cfg).is_err());
    }
}
