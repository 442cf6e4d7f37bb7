//! Plant vector fields and closed-loop assembly.
//!
//! Angles are not wrapped: every state lives on ℝⁿ.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::StateFeedback;
use crate::hompow::{apow, HomogeneityClaim};

/// `(t, x, u, dx/dt)`.
pub type Dynamics = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

const STACK_CONTROLS: usize = 8;

/// A state derivative map `x' = f(t, x, u)`, optionally closed by a feedback
/// law, in which case it has no free inputs left.
#[derive(Clone)]
pub struct VectorField {
    label: String,
    state_dim: usize,
    control_dim: usize,
    claim: Option<HomogeneityClaim>,
    dynamics: Dynamics,
    feedback: Option<StateFeedback>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("label", &self.label)
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("claim", &self.claim)
            .field("feedback", &self.feedback)
            .finish()
    }
}

impl VectorField {
    pub fn new(
        label: impl Into<String>,
        state_dim: usize,
        control_dim: usize,
        dynamics: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        VectorField {
            label: label.into(),
            state_dim,
            control_dim,
            claim: None,
            dynamics: Arc::new(dynamics),
            feedback: None,
        }
    }

    /// Input-free field `x' = f(t, x)`.
    pub fn autonomous(
        label: impl Into<String>,
        state_dim: usize,
        f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, state_dim, 0, move |t, x, _, out| f(t, x, out))
    }

    pub fn with_claim(mut self, claim: HomogeneityClaim) -> Self {
        self.claim = Some(claim);
        self
    }

    pub fn without_claim(mut self) -> Self {
        self.claim = None;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Free inputs; 0 for closed loops.
    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn claim(&self) -> Option<&HomogeneityClaim> {
        self.claim.as_ref()
    }

    pub fn feedback(&self) -> Option<&StateFeedback> {
        self.feedback.as_ref()
    }

    /// Period of the attached law, if it is time-varying.
    pub fn period(&self) -> Option<f64> {
        self.feedback.as_ref().and_then(|f| f.period())
    }

    /// True when the field does not depend on time through a periodic law.
    pub fn is_autonomous(&self) -> bool {
        self.period().is_none()
    }

    /// Inputs seen by the plant: the law's output for closed loops.
    pub fn input_dim(&self) -> usize {
        match &self.feedback {
            Some(law) => law.control_dim(),
            None => self.control_dim,
        }
    }

    /// Raw plant map with explicit input `u`.
    pub fn eval(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.dynamics)(t, x, u, out)
    }

    /// `x' = f(t, x, u(t, x))` for closed loops, `f(t, x, 0)` otherwise.
    pub fn rhs_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.feedback {
            Some(law) => self.rhs_segment_into(law.segment_index(t), t, x, out),
            None => self.with_inputs(|u| (self.dynamics)(t, x, u, out), |_| {}),
        }
    }

    /// Closed-loop derivative with the law forced to one segment.
    pub fn rhs_segment_into(&self, segment: usize, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.feedback {
            Some(law) => self.with_inputs(
                |u| (self.dynamics)(t, x, u, out),
                |u| law.control_in_segment(segment, x, u),
            ),
            None => self.rhs_into(t, x, out),
        }
    }

    pub fn rhs(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.rhs_into(t, x, &mut out);
        out
    }

    /// Writes the applied input at `(t, x)` into `u` (zeros for open fields).
    pub fn control_into(&self, t: f64, x: &[f64], u: &mut [f64]) {
        match &self.feedback {
            Some(law) => law.control_into(t, x, u),
            None => u.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    pub fn control_in_segment(&self, segment: usize, x: &[f64], u: &mut [f64]) {
        match &self.feedback {
            Some(law) => law.control_in_segment(segment, x, u),
            None => u.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    pub fn segment_index(&self, t: f64) -> usize {
        self.feedback.as_ref().map_or(0, |f| f.segment_index(t))
    }

    pub fn segment_count(&self) -> usize {
        self.feedback.as_ref().map_or(1, |f| f.segments().len())
    }

    fn with_inputs(&self, apply: impl FnOnce(&[f64]), fill: impl FnOnce(&mut [f64])) {
        let m = self.input_dim();
        if m <= STACK_CONTROLS {
            let mut buf = [0.0; STACK_CONTROLS];
            fill(&mut buf[..m]);
            apply(&buf[..m]);
        } else {
            let mut buf = vec![0.0; m];
            fill(&mut buf);
            apply(&buf);
        }
    }

    /// Autonomous closed loop obtained by freezing the law on one segment.
    pub fn segment_field(&self, segment: usize) -> Result<VectorField> {
        let law = self
            .feedback
            .as_ref()
            .ok_or_else(|| Error::Config(format!("'{}' has no feedback law", self.label)))?;
        if segment >= law.segments().len() {
            return Err(Error::Config(format!(
                "segment {segment} out of range for '{}'",
                self.label
            )));
        }
        let mut out = self.clone();
        out.label = format!("{} [segment {segment}]", self.label);
        out.feedback = Some(law.segment_law(segment));
        out.claim = None;
        Ok(out)
    }

    /// Closes the loop with `law`. The law's homogeneity claim, if any, is
    /// carried over to the result.
    pub fn close_loop(&self, law: StateFeedback) -> Result<VectorField> {
        if self.feedback.is_some() {
            return Err(Error::Config(format!("'{}' is already a closed loop", self.label)));
        }
        Error::check_dim("law state dimension", self.state_dim, law.state_dim())?;
        Error::check_dim("law control dimension", self.control_dim, law.control_dim())?;
        Ok(VectorField {
            label: format!("{} + {}", self.label, law.label()),
            state_dim: self.state_dim,
            control_dim: 0,
            claim: law.claim().cloned(),
            dynamics: self.dynamics.clone(),
            feedback: Some(law),
        })
    }
}

/// Free-function form of [`VectorField::close_loop`].
pub fn close_loop(plant: &VectorField, law: StateFeedback) -> Result<VectorField> {
    plant.close_loop(law)
}

/// `x1' = x2, x2' = u`.
pub fn double_integrator() -> VectorField {
    VectorField::new("double integrator", 2, 1, |_, x, u, out| {
        out[0] = x[1];
        out[1] = u[0];
    })
}

/// `x1' = |x1|^ν x2, x2' = u`, with `|0|^0 = 1`.
pub fn modified_double_integrator(nu: f64) -> Result<VectorField> {
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::Domain(format!("nu must lie in [0, 1), got {nu}")));
    }
    Ok(VectorField::new(
        format!("modified double integrator (nu = {nu})"),
        2,
        1,
        move |_, x, u, out| {
            out[0] = apow(x[0], nu) * x[1];
            out[1] = u[0];
        },
    ))
}

/// Unicycle `x1' = u1 cos x3, x2' = u1 sin x3, x3' = u2`.
pub fn unicycle_exact() -> VectorField {
    VectorField::new("unicycle", 3, 2, |_, x, u, out| {
        let (s, c) = x[2].sin_cos();
        out[0] = u[0] * c;
        out[1] = u[0] * s;
        out[2] = u[1];
    })
}

/// Quadratic approximation `x1' = u1, x2' = u1 x3, x3' = u2`.
pub fn unicycle_quadratic() -> VectorField {
    VectorField::new("unicycle, quadratic approximation", 3, 2, |_, x, u, out| {
        out[0] = u[0];
        out[1] = u[0] * x[2];
        out[2] = u[1];
    })
}

/// Mass and rotational inertia of the slider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliderParams {
    pub m: f64,
    #[serde(rename = "I")]
    pub inertia: f64,
}

impl Default for SliderParams {
    fn default() -> Self {
        SliderParams {
            m: 1.0,
            inertia: 1.0,
        }
    }
}

impl SliderParams {
    pub fn new(m: f64, inertia: f64) -> Result<Self> {
        let p = SliderParams { m, inertia };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m > 0.0 && self.inertia > 0.0 && self.m.is_finite() && self.inertia.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "slider mass and inertia must be positive (m = {}, I = {})",
                self.m, self.inertia
            )))
        }
    }

    /// Factors turning normalized inputs `(u1, u2)` into `(τ1, τ2)`.
    pub fn input_scales(&self) -> Vec<f64> {
        vec![self.m, self.inertia]
    }
}

/// Slider in the inertial frame, state `(x, x', y, y', ψ, ψ')`, inputs `(τ1, τ2)`.
pub fn slider_inertial(params: SliderParams) -> Result<VectorField> {
    params.validate()?;
    let SliderParams { m, inertia } = params;
    Ok(VectorField::new("slider, inertial frame", 6, 2, move |_, x, u, out| {
        let (s, c) = x[4].sin_cos();
        let a = u[0] / m;
        out[0] = x[1];
        out[1] = a * c;
        out[2] = x[3];
        out[3] = a * s;
        out[4] = x[5];
        out[5] = u[1] / inertia;
    }))
}

/// Slider in body velocities, state `(x, y, ψ, v1, v2, ψ')`, inputs `(τ1, τ2)`.
pub fn slider_body(params: SliderParams) -> Result<VectorField> {
    params.validate()?;
    let SliderParams { m, inertia } = params;
    Ok(VectorField::new("slider, body frame", 6, 2, move |_, q, u, out| {
        let (s, c) = q[2].sin_cos();
        let (v1, v2, w) = (q[3], q[4], q[5]);
        out[0] = c * v1 - s * v2;
        out[1] = s * v1 + c * v2;
        out[2] = w;
        out[3] = v2 * w + u[0] / m;
        out[4] = -v1 * w;
        out[5] = u[1] / inertia;
    }))
}

/// Quadratic approximation of the slider on normalized inputs:
/// `x1' = x2, x2' = u1, x3' = x4, x4' = u1 x5, x5' = x6, x6' = u2`.
pub fn slider_quadratic() -> VectorField {
    VectorField::new("slider, quadratic approximation", 6, 2, |_, x, u, out| {
        out[0] = x[1];
        out[1] = u[0];
        out[2] = x[3];
        out[3] = u[0] * x[4];
        out[4] = x[5];
        out[5] = u[1];
    })
}

/// Body state `(x, y, ψ, v1, v2, ψ')` to inertial `(x, x', y, y', ψ, ψ')`.
pub fn body_to_inertial(q: &[f64]) -> Vec<f64> {
    let (s, c) = q[2].sin_cos();
    vec![q[0], c * q[3] - s * q[4], q[1], s * q[3] + c * q[4], q[2], q[5]]
}

/// Inverse of [`body_to_inertial`].
pub fn inertial_to_body(x: &[f64]) -> Vec<f64> {
    let (s, c) = x[4].sin_cos();
    vec![x[0], x[2], x[4], c * x[1] + s * x[3], -s * x[1] + c * x[3], x[5]]
}

/// Slider law designed on normalized inputs, applied to a force/torque
/// model in inertial coordinates.
pub fn slider_law_for_inertial(law: &StateFeedback, params: SliderParams) -> Result<StateFeedback> {
    params.validate()?;
    law.scaled(params.input_scales())
}

/// Same as [`slider_law_for_inertial`] for the body-frame model.
pub fn slider_law_for_body(law: &StateFeedback, params: SliderParams) -> Result<StateFeedback> {
    Ok(slider_law_for_inertial(law, params)?.precomposed(6, body_to_inertial))
}
