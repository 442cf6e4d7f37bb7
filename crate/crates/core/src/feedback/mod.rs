//! Explicit feedback laws and their gain thresholds.

mod backstep;
mod double_integrator;
mod gains;
mod vehicles;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hompow::HomogeneityClaim;

pub use backstep::{backstep_extend, cascade_closed_loop, BackstepLaw, PowerLaw, VirtualControl};
pub use double_integrator::{
    di_law_backstep, di_law_bounded, di_law_nested, mdi_law, BoundedLaw, DesingularizedLaw,
    NestedLaw,
};
pub use gains::{gain_g, gain_h, nested_gain_threshold, slider_k4_threshold};
pub use vehicles::{
    slider_controller, slider_controller_with, slider_weights, unicycle_controller,
    wheel_speeds_to_body_velocity, SliderLaw, SliderOptions, SliderU1Exponent, SliderU2Form,
    UnicycleLaw,
};

/// State-to-control map used inside one time segment.
pub type ControlMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Controller parameters shared by all laws. Each law reads the entries it
/// needs; missing entries are reported as configuration errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSet {
    #[serde(default, alias = "kappa", skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k5: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k6: Option<f64>,
}

impl GainSet {
    pub fn get(&self, name: &str) -> Result<f64> {
        let v = match name {
            "kappa1" => self.kappa1,
            "kappa2" => self.kappa2,
            "nu" => self.nu,
            "mu" => self.mu,
            "l" => self.l,
            "k1" => self.k1,
            "k2" => self.k2,
            "k3" => self.k3,
            "k4" => self.k4,
            "k5" => self.k5,
            "k6" => self.k6,
            _ => None,
        };
        v.ok_or_else(|| Error::Config(format!("missing gain '{name}'")))
    }

    /// Bounded double-integrator law: `-1/2 < κ < 0`, `k1, k2 > 0`.
    pub fn check_bounded(&self) -> Result<()> {
        let kappa = self.get("kappa1")?;
        check_kappa_half(kappa, "kappa")?;
        positive("k1", self.get("k1")?)?;
        positive("k2", self.get("k2")?)
    }

    /// Nested double-integrator law: adds the closed-form threshold on `k2`.
    pub fn check_nested(&self) -> Result<()> {
        self.check_bounded()?;
        let (kappa, k1, k2) = (self.get("kappa1")?, self.get("k1")?, self.get("k2")?);
        let bound = nested_gain_threshold(kappa, k1)?;
        strictly_above("k2 > nested threshold(kappa, k1)", k2, bound)
    }

    /// Desingularized backstepping on the double integrator.
    pub fn check_backstep(&self) -> Result<()> {
        let (kappa, l, k1, k2) = (
            self.get("kappa1")?,
            self.get("l")?,
            self.get("k1")?,
            self.get("k2")?,
        );
        positive("k1", k1)?;
        let bound = gain_g(l, kappa, k1)?;
        strictly_above("k2 > g(l, kappa, k1)", k2, bound)
    }

    /// Desingularized backstepping on `x1' = |x1|^ν x2, x2' = u`.
    pub fn check_mdi(&self) -> Result<()> {
        let (kappa, nu, l, k1, k2) = (
            self.get("kappa1")?,
            self.get("nu")?,
            self.get("l")?,
            self.get("k1")?,
            self.get("k2")?,
        );
        positive("k1", k1)?;
        let bound = gain_h(l, kappa, nu, k1)?;
        strictly_above("k2 > h(l, kappa, nu, k1)", k2, bound)
    }

    /// Two-phase unicycle law.
    pub fn check_unicycle(&self) -> Result<()> {
        let (k1, k2, k3) = (self.get("k1")?, self.get("k2")?, self.get("k3")?);
        let (kappa1, kappa2, nu, l) = (
            self.get("kappa1")?,
            self.get("kappa2")?,
            self.get("nu")?,
            self.get("l")?,
        );
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::inadmissible("0 < nu < 1", nu, 0.0));
        }
        if !(kappa1 > -1.0 && kappa1 < 0.0) {
            return Err(Error::inadmissible("-1 < kappa1 < 0", kappa1, -1.0));
        }
        positive("k1", k1)?;
        positive("k2", k2)?;
        let bound = gain_h(l, kappa2, nu, k2)?;
        strictly_above("k3 > h(l, kappa2, nu, k2)", k3, bound)
    }

    /// Two-phase slider law. `k5` and `k6` only need to be positive here;
    /// their "large enough" values come from empirical tuning.
    pub fn check_slider(&self) -> Result<()> {
        let (kappa1, kappa2, mu) = (self.get("kappa1")?, self.get("kappa2")?, self.get("mu")?);
        check_kappa_half(kappa1, "kappa1")?;
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::inadmissible("0 < mu < 1", mu, 0.0));
        }
        let lower = -(1.0 - mu) / (2.0 * (2.0 - mu));
        if !(kappa2 > lower) {
            return Err(Error::inadmissible("kappa2 > -(1-mu)/(2(2-mu))", kappa2, lower));
        }
        if !(kappa2 < 0.0) {
            return Err(Error::inadmissible("kappa2 < 0", kappa2, 0.0));
        }
        for name in ["k1", "k2", "k3", "k5", "k6"] {
            positive(name, self.get(name)?)?;
        }
        let bound = slider_k4_threshold(kappa2, self.get("k3")?)?;
        strictly_above("k4 > 2^(-2 kappa2) k3^(1/(1+kappa2))", self.get("k4")?, bound)
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::inadmissible(format!("{name} > 0"), v, 0.0))
    }
}

pub(crate) fn strictly_above(constraint: &str, v: f64, bound: f64) -> Result<()> {
    if v > bound {
        Ok(())
    } else {
        Err(Error::inadmissible(constraint, v, bound))
    }
}

pub(crate) fn check_kappa_half(kappa: f64, name: &str) -> Result<()> {
    if !(kappa > -0.5) {
        return Err(Error::inadmissible(format!("{name} > -1/2"), kappa, -0.5));
    }
    if !(kappa < 0.0) {
        return Err(Error::inadmissible(format!("{name} < 0"), kappa, 0.0));
    }
    Ok(())
}

/// One stationary piece of a time-piecewise law, active on `[start, end)`
/// modulo the period.
#[derive(Clone)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    map: ControlMap,
}

/// A control law `u(t, x)`, either autonomous or periodic and stationary on
/// each segment of the period.
#[derive(Clone)]
pub struct StateFeedback {
    label: String,
    state_dim: usize,
    control_dim: usize,
    period: Option<f64>,
    segments: Vec<Segment>,
    claim: Option<HomogeneityClaim>,
    parameters: Vec<(String, f64)>,
}

impl fmt::Debug for StateFeedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateFeedback")
            .field("label", &self.label)
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("period", &self.period)
            .field(
                "segments",
                &self.segments.iter().map(|s| (s.start, s.end)).collect::<Vec<_>>(),
            )
            .field("parameters", &self.parameters)
            .finish()
    }
}

impl StateFeedback {
    pub fn autonomous(
        label: impl Into<String>,
        state_dim: usize,
        control_dim: usize,
        map: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        StateFeedback {
            label: label.into(),
            state_dim,
            control_dim,
            period: None,
            segments: vec![Segment {
                start: 0.0,
                end: f64::INFINITY,
                map: Arc::new(map),
            }],
            claim: None,
            parameters: Vec::new(),
        }
    }

    /// Periodic law from `(start, end, map)` pieces that must partition `[0, T)`.
    pub fn periodic(
        label: impl Into<String>,
        state_dim: usize,
        control_dim: usize,
        period: f64,
        pieces: Vec<(f64, f64, ControlMap)>,
    ) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Domain(format!("period must be > 0, got {period}")));
        }
        if pieces.is_empty() {
            return Err(Error::Config("periodic law needs at least one segment".into()));
        }
        let mut expected_start = 0.0;
        for (start, end, _) in &pieces {
            if *start != expected_start || !(end > start) {
                return Err(Error::Config(format!(
                    "segments must partition [0, {period}): found [{start}, {end}) after {expected_start}"
                )));
            }
            expected_start = *end;
        }
        if expected_start != period {
            return Err(Error::Config(format!(
                "segments end at {expected_start}, expected the period {period}"
            )));
        }
        Ok(StateFeedback {
            label: label.into(),
            state_dim,
            control_dim,
            period: Some(period),
            segments: pieces
                .into_iter()
                .map(|(start, end, map)| Segment { start, end, map })
                .collect(),
            claim: None,
            parameters: Vec::new(),
        })
    }

    /// Records a named constant (gain or exponent) for reports.
    pub fn with_parameter(mut self, name: impl Into<String>, value: f64) -> Self {
        self.parameters.push((name.into(), value));
        self
    }

    /// Attaches the homogeneity of the closed loop with the plant this law
    /// was designed for.
    pub fn with_claim(mut self, claim: HomogeneityClaim) -> Self {
        self.claim = Some(claim);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn claim(&self) -> Option<&HomogeneityClaim> {
        self.claim.as_ref()
    }

    pub fn parameters(&self) -> &[(String, f64)] {
        &self.parameters
    }

    /// Segment active at time `t`.
    pub fn segment_index(&self, t: f64) -> usize {
        match self.period {
            None => 0,
            Some(period) => {
                let tau = t.rem_euclid(period);
                self.segments
                    .iter()
                    .rposition(|s| s.start <= tau)
                    .unwrap_or(0)
            }
        }
    }

    pub fn control_in_segment(&self, segment: usize, x: &[f64], out: &mut [f64]) {
        (self.segments[segment].map)(x, out)
    }

    pub fn control_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.control_in_segment(self.segment_index(t), x, out)
    }

    pub fn control(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.control_dim];
        self.control_into(t, x, &mut u);
        u
    }

    /// The stationary law of one segment as an autonomous law.
    pub fn segment_law(&self, segment: usize) -> StateFeedback {
        let seg = &self.segments[segment];
        StateFeedback {
            label: format!("{} [segment {}]", self.label, segment),
            state_dim: self.state_dim,
            control_dim: self.control_dim,
            period: None,
            segments: vec![Segment {
                start: 0.0,
                end: f64::INFINITY,
                map: seg.map.clone(),
            }],
            claim: None,
            parameters: self.parameters.clone(),
        }
    }

    /// Multiplies each control channel by a constant, e.g. to turn normalized
    /// accelerations into forces and torques.
    pub fn scaled(&self, scales: Vec<f64>) -> Result<StateFeedback> {
        Error::check_dim("control scales", self.control_dim, scales.len())?;
        let scales = Arc::new(scales);
        let mut out = self.clone();
        out.segments = self
            .segments
            .iter()
            .map(|s| {
                let inner = s.map.clone();
                let scales = scales.clone();
                Segment {
                    start: s.start,
                    end: s.end,
                    map: Arc::new(move |x: &[f64], u: &mut [f64]| {
                        inner(x, u);
                        for (ui, si) in u.iter_mut().zip(scales.iter()) {
                            *ui *= si;
                        }
                    }),
                }
            })
            .collect();
        Ok(out)
    }

    /// Law evaluated on a transformed state: `u(t, x) = self(t, map(x))`.
    pub fn precomposed(
        &self,
        state_dim: usize,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> StateFeedback {
        let map = Arc::new(map);
        let mut out = self.clone();
        out.state_dim = state_dim;
        out.claim = None;
        out.segments = self
            .segments
            .iter()
            .map(|s| {
                let inner = s.map.clone();
                let map = map.clone();
                Segment {
                    start: s.start,
                    end: s.end,
                    map: Arc::new(move |x: &[f64], u: &mut [f64]| inner(&map(x), u)),
                }
            })
            .collect();
        out
    }
}
