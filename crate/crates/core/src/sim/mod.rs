//! Fixed-step simulation of non-Lipschitz, time-piecewise closed loops.

mod export;
mod probe;
mod settle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hompow::Weight;
use crate::plants::VectorField;

pub use export::{trajectory_csv, write_trajectory_csv};
pub use probe::{
    basin_probe, gain_autotune, run_many, scaling_probe, AutotuneReport, BasinReport,
    RadiusOutcome, ScalingReport,
};
pub use settle::{settling_time, SettlingReport};

/// Steps per period used when `dt` is not given for a periodic loop.
pub const STEPS_PER_PERIOD: f64 = 20_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_settle_tol")]
    pub settle_tol: f64,
    /// Defaults to `10·dt`.
    #[serde(default)]
    pub settle_dwell: Option<f64>,
    #[serde(default = "default_snap_radius")]
    pub snap_radius: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Weight for homogeneous norms; falls back to the field's claim, then
    /// to the uniform weight.
    #[serde(default)]
    pub weight: Option<Weight>,
}

fn default_settle_tol() -> f64 {
    1e-6
}

fn default_snap_radius() -> f64 {
    1e-9
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimConfig {
            dt,
            t_end,
            settle_tol: default_settle_tol(),
            settle_dwell: None,
            snap_radius: default_snap_radius(),
            rng_seed: 0,
            weight: None,
        }
    }

    /// `dt = T/20000` for a loop of period `T`.
    pub fn for_period(period: f64, t_end: f64) -> Self {
        Self::new(period / STEPS_PER_PERIOD, t_end)
    }

    pub fn with_weight(mut self, w: Weight) -> Self {
        self.weight = Some(w);
        self
    }

    pub fn with_snap_radius(mut self, r: f64) -> Self {
        self.snap_radius = r;
        self
    }

    pub fn with_settle_tol(mut self, tol: f64) -> Self {
        self.settle_tol = tol;
        self
    }

    pub fn dwell(&self, dt: f64) -> f64 {
        self.settle_dwell.unwrap_or(10.0 * dt)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.dt.is_finite()
            && self.t_end > 0.0
            && self.t_end.is_finite()
            && self.settle_tol >= 0.0
            && self.snap_radius >= 0.0
            && self.settle_dwell.is_none_or(|d| d >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid simulation settings: {self:?}")))
        }
    }

    pub(crate) fn weight_for(&self, field: &VectorField) -> Result<Weight> {
        let w = match (&self.weight, field.claim()) {
            (Some(w), _) => w.clone(),
            (None, Some(c)) => c.weight.clone(),
            (None, None) => Weight::uniform(field.state_dim()),
        };
        Error::check_dim("simulation weight", field.state_dim(), w.len())?;
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SegmentSwitch,
    Settled,
    Snapped,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::SegmentSwitch => "segment_switch",
            EventKind::Settled => "settled",
            EventKind::Snapped => "snapped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub label: String,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    /// Step actually used, after alignment with the switch times.
    pub dt: f64,
    pub dt_adjusted: bool,
    pub weight: Weight,
    /// Set when integration stopped early on a non-finite state.
    pub abort: Option<String>,
    pub settling: SettlingReport,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| self.weight.norm_of(x)).collect()
    }

    /// Recorded sample closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t - self.times[0]) / self.dt).round();
        (k.max(0.0) as usize).min(self.len() - 1)
    }

    pub fn state_at(&self, t: f64) -> &[f64] {
        &self.states[self.index_at(t)]
    }

    pub fn first_event(&self, kind: EventKind) -> Option<f64> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.time)
    }
}

/// Largest step `≤ dt` that puts every switch time of the field's periodic
/// law on the grid. Returns the step and whether it changed.
pub fn aligned_step(field: &VectorField, dt: f64) -> Result<(f64, bool)> {
    let Some(law) = field.feedback() else {
        return Ok((dt, false));
    };
    let Some(period) = law.period() else {
        return Ok((dt, false));
    };
    let unit = law
        .segments()
        .iter()
        .map(|s| s.end - s.start)
        .fold(f64::INFINITY, f64::min);
    for s in law.segments() {
        let q = s.start / unit;
        if (q - q.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "switch time {} is not a multiple of the shortest segment {unit} (period {period})",
                s.start
            )));
        }
    }
    let n = (unit / dt * (1.0 - 1e-12)).ceil().max(1.0);
    let aligned = unit / n;
    Ok((aligned, aligned != dt))
}

/// Classical RK4 with a fixed step aligned to the law's switch times.
///
/// The segment used for a whole step is the one active at the step's
/// midpoint, so a step never straddles a switch. Once the homogeneous norm
/// drops below `snap_radius` the state is set to exactly zero.
pub fn integrate(field: &VectorField, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory> {
    integrate_from(field, 0.0, x0, cfg)
}

pub fn integrate_from(field: &VectorField, t0: f64, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = field.state_dim();
    Error::check_dim("initial state", n, x0.len())?;
    if field.control_dim() != 0 {
        return Err(Error::Config(format!(
            "'{}' has {} free inputs; close the loop first",
            field.label(),
            field.control_dim()
        )));
    }
    let weight = cfg.weight_for(field)?;
    let (dt, dt_adjusted) = aligned_step(field, cfg.dt)?;
    if dt_adjusted {
        log::debug!("step reduced from {} to {dt} to align with switch times", cfg.dt);
    }
    let steps = (cfg.t_end / dt * (1.0 - 1e-12)).ceil() as usize;
    let m = field.input_dim();

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut events = Vec::new();
    let mut abort = None;

    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut u = vec![0.0; m];
    let mut seg = field.segment_index(t0 + 0.5 * dt);

    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        let next_seg = field.segment_index(t + 0.5 * dt);
        if k > 0 && next_seg != seg {
            events.push(Event {
                time: t,
                kind: EventKind::SegmentSwitch,
            });
        }
        seg = next_seg;
        field.control_in_segment(seg, &x, &mut u);
        times.push(t);
        states.push(x.clone());
        controls.push(u.clone());
        if k == steps {
            break;
        }

        let h = dt;
        field.rhs_segment_into(seg, t, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        field.rhs_segment_into(seg, t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        field.rhs_segment_into(seg, t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        field.rhs_segment_into(seg, t + h, &tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            abort = Some(format!(
                "non-finite state component x{} at t = {} (last finite state {:?})",
                i + 1,
                t + h,
                states.last().expect("at least one sample")
            ));
            break;
        }
        if x.iter().any(|&v| v != 0.0) && weight.norm_of(&x) < cfg.snap_radius {
            x.fill(0.0);
            events.push(Event {
                time: t + h,
                kind: EventKind::Snapped,
            });
        }
    }

    let mut traj = Trajectory {
        label: field.label().to_string(),
        times,
        states,
        controls,
        events,
        dt,
        dt_adjusted,
        weight,
        abort,
        settling: SettlingReport::default(),
    };
    traj.settling = settling_time(&traj, &traj.weight.clone(), cfg.settle_tol, cfg.dwell(dt))?;
    if let Some(ts) = traj.settling.settle_time {
        traj.events.push(Event {
            time: ts,
            kind: EventKind::Settled,
        });
        traj.events
            .sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite event times"));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{di_law_bounded, StateFeedback};
    use crate::plants::double_integrator;
    use std::sync::Arc;

    #[test]
    fn zero_field_gives_constant_trajectory() {
        let f = VectorField::autonomous("zero", 2, |_, _, out| out.fill(0.0));
        let traj = integrate(&f, &[0.3, -0.7], &SimConfig::new(0.1, 1.0)).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.states.iter().all(|x| x == &vec![0.3, -0.7]));
        assert!(!traj.settling.settled);
    }

    #[test]
    fn origin_stays_exactly_zero() {
        let cl = double_integrator().close_loop(di_law_bounded(1.0, 1.0, -0.25).unwrap()).unwrap();
        let traj = integrate(&cl, &[0.0, 0.0], &SimConfig::new(1e-3, 1.0)).unwrap();
        assert!(traj.states.iter().flatten().all(|&v| v == 0.0));
        assert!(traj.first_event(EventKind::Snapped).is_none());
        assert_eq!(traj.settling.settle_time, Some(0.0));
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let f = VectorField::autonomous("x' = -x", 1, |_, x, out| out[0] = -x[0]);
        let traj = integrate(&f, &[1.0], &SimConfig::new(1e-2, 1.0)).unwrap();
        assert!((traj.final_state()[0] - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn step_is_aligned_with_switches() {
        let c = |v: f64| -> crate::feedback::ControlMap { Arc::new(move |_: &[f64], u: &mut [f64]| u[0] = v) };
        let law = StateFeedback::periodic("p", 1, 1, 1.0, vec![(0.0, 0.5, c(1.0)), (0.5, 1.0, c(-1.0))])
            .unwrap();
        let plant = VectorField::new("x' = u", 1, 1, |_, _, u, out| out[0] = u[0]);
        let cl = plant.close_loop(law).unwrap();
        let traj = integrate(&cl, &[0.0], &SimConfig::new(0.3, 2.0)).unwrap();
        assert!(traj.dt_adjusted);
        assert!((traj.dt - 0.25).abs() < 1e-15);
        // Exact triangle wave: up for half a period, down for the other.
        assert!((traj.state_at(0.5)[0] - 0.5).abs() < 1e-14);
        assert!(traj.state_at(1.0)[0].abs() < 1e-14);
        let switches: Vec<f64> = traj
            .events
            .iter()
            .filter(|e| e.kind == EventKind::SegmentSwitch)
            .map(|e| e.time)
            .collect();
        assert_eq!(switches, vec![0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn non_finite_state_aborts_with_partial_trajectory() {
        let f = VectorField::autonomous("blow-up", 1, |_, x, out| out[0] = x[0] * x[0]);
        let traj = integrate(&f, &[1.0], &SimConfig::new(0.1, 5.0)).unwrap();
        assert!(traj.abort.is_some());
        assert!(traj.len() < 51);
        assert!(!traj.settling.settled);
    }

    #[test]
    fn open_plants_are_rejected() {
        assert!(integrate(&double_integrator(), &[1.0, 0.0], &SimConfig::new(0.1, 1.0)).is_err());
    }
}
