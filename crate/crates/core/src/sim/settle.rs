use serde::Serialize;

use super::Trajectory;
use crate::error::{Error, Result};
use crate::hompow::Weight;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SettlingReport {
    pub settled: bool,
    pub settle_time: Option<f64>,
    /// Below tolerance at the end of the run, but for less than the dwell.
    pub undetermined: bool,
    pub final_norm: f64,
    pub tol: f64,
    pub dwell: f64,
}

/// First recorded time `t` with `ρ(x(s)) ≤ tol` for every sample in
/// `[t, t + dwell]`.
pub fn settling_time(traj: &Trajectory, w: &Weight, tol: f64, dwell: f64) -> Result<SettlingReport> {
    if traj.is_empty() {
        return Err(Error::Config("settling time of an empty trajectory".into()));
    }
    if let Some(x) = traj.states.first() {
        Error::check_dim("settling weight", w.len(), x.len())?;
    }
    let final_norm = w.norm_of(traj.final_state());
    let mut report = SettlingReport {
        final_norm,
        tol,
        dwell,
        ..Default::default()
    };
    // Half a step of slack so that a dwell equal to a whole number of steps
    // is met by the sample that lands on it.
    let slack = 0.5 * traj.dt;
    let mut start: Option<usize> = None;
    for (j, x) in traj.states.iter().enumerate() {
        if w.norm_of(x) <= tol {
            let s = *start.get_or_insert(j);
            if traj.times[j] - traj.times[s] >= dwell - slack {
                report.settled = true;
                report.settle_time = Some(traj.times[s]);
                return Ok(report);
            }
        } else {
            start = None;
        }
    }
    report.undetermined = start.is_some() && traj.abort.is_none();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(norms: &[f64], dt: f64) -> Trajectory {
        Trajectory {
            label: "t".into(),
            times: (0..norms.len()).map(|k| k as f64 * dt).collect(),
            states: norms.iter().map(|&v| vec![v]).collect(),
            controls: vec![vec![]; norms.len()],
            events: vec![],
            dt,
            dt_adjusted: false,
            weight: Weight::uniform(1),
            abort: None,
            settling: SettlingReport::default(),
        }
    }

    #[test]
    fn zero_trajectory_settles_at_start() {
        let t = traj(&[0.0; 20], 0.1);
        let r = settling_time(&t, &Weight::uniform(1), 1e-6, 1.0).unwrap();
        assert!(r.settled);
        assert_eq!(r.settle_time, Some(0.0));
    }

    #[test]
    fn ending_above_tolerance_is_not_settled() {
        let t = traj(&[1.0, 0.5, 0.2, 0.1], 0.1);
        let r = settling_time(&t, &Weight::uniform(1), 1e-6, 0.1).unwrap();
        assert!(!r.settled && !r.undetermined);
        assert_eq!(r.final_norm, 0.1);
    }

    #[test]
    fn excursion_restarts_the_window() {
        let t = traj(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0], 1.0);
        let r = settling_time(&t, &Weight::uniform(1), 1e-6, 2.0).unwrap();
        assert_eq!(r.settle_time, Some(4.0));
    }

    #[test]
    fn short_tail_is_undetermined() {
        let t = traj(&[1.0, 1.0, 1.0, 0.0, 0.0], 1.0);
        let r = settling_time(&t, &Weight::uniform(1), 1e-6, 3.0).unwrap();
        assert!(!r.settled);
        assert!(r.undetermined);
    }
}
