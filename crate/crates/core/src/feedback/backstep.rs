//! Desingularized backstepping through one added integrator.
//!
//! Given `x' = f(x, y)` stabilized by a virtual control `y = ȳ(x)`, the
//! extended system `x' = f(x, y), y' = v` is stabilized by
//! `v = -k⌊ ⌊y⌉^l - ⌊ȳ(x)⌉^l ⌉^{(κ+r_{n+1})/(l r_{n+1})}` for `k` large enough.

use std::fmt;
use std::sync::Arc;

use super::{positive, StateFeedback};
use crate::error::{Error, Result};
use crate::hompow::{spow, HomogeneityClaim, Weight};
use crate::plants::VectorField;

/// A scalar state map `x ↦ ȳ(x)` used as a virtual control.
pub type VirtualControl = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `ȳ(x) = -k⌊x_i⌉^p`, the usual first virtual control of an integrator chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub index: usize,
    pub gain: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn new(index: usize, gain: f64, exponent: f64) -> Self {
        PowerLaw {
            index,
            gain,
            exponent,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        -self.gain * spow(x[self.index], self.exponent)
    }

    pub fn into_virtual(self) -> VirtualControl {
        Arc::new(move |x: &[f64]| self.eval(x))
    }
}

/// The control `v(x, y)` produced by [`backstep_extend`].
#[derive(Clone)]
pub struct BackstepLaw {
    weight: Weight,
    kappa: f64,
    l: f64,
    gain: f64,
    outer: f64,
    ybar: VirtualControl,
}

impl fmt::Debug for BackstepLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackstepLaw")
            .field("weight", &self.weight)
            .field("kappa", &self.kappa)
            .field("l", &self.l)
            .field("gain", &self.gain)
            .field("outer", &self.outer)
            .finish()
    }
}

impl BackstepLaw {
    /// Full weight `(r_1, …, r_n, r_{n+1})` of the extended state.
    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn outer_exponent(&self) -> f64 {
        self.outer
    }

    fn y_weight(&self) -> f64 {
        *self.weight.as_slice().last().expect("weight has n+1 entries")
    }

    pub fn virtual_control(&self, x: &[f64]) -> f64 {
        (self.ybar)(x)
    }

    /// `v(x, y)`.
    pub fn eval(&self, x: &[f64], y: f64) -> f64 {
        let bracket = spow(y, self.l) - spow((self.ybar)(x), self.l);
        -self.gain * spow(bracket, self.outer)
    }

    /// `v` evaluated on the stacked state `(x, y)`.
    pub fn eval_stacked(&self, state: &[f64]) -> f64 {
        let n = state.len() - 1;
        self.eval(&state[..n], state[n])
    }

    /// `v` as a virtual control for one more integrator. Its weight is
    /// `r_{n+2} = r_{n+1} + κ`.
    pub fn as_virtual(&self) -> VirtualControl {
        let law = self.clone();
        Arc::new(move |state: &[f64]| law.eval_stacked(state))
    }

    pub fn next_weight(&self) -> Result<Weight> {
        self.weight.extended(self.y_weight() + self.kappa)
    }

    /// State feedback on `(x, y)` with one control channel `y' = v`.
    pub fn into_feedback(self, label: impl Into<String>) -> StateFeedback {
        let claim = HomogeneityClaim::new(self.weight.clone(), self.kappa);
        let n = self.weight.len();
        let params = [("kappa", self.kappa), ("l", self.l), ("k", self.gain), ("exp_outer", self.outer)];
        let mut law = StateFeedback::autonomous(label, n, 1, move |s, u| u[0] = self.eval_stacked(s))
            .with_claim(claim);
        for (name, v) in params {
            law = law.with_parameter(name, v);
        }
        law
    }
}

/// Builds the backstepping control for `x' = f(x, y), y' = v`.
///
/// `f` is the `n`-dimensional subsystem with `y` as its single input and
/// `weight` has `n + 1` entries, the last one being the weight of `y`. The
/// virtual control must be homogeneous of degree `r_{n+1}` and `⌊ȳ⌉^l` must
/// be C¹; both are the caller's responsibility.
pub fn backstep_extend(
    f: &VectorField,
    weight: &Weight,
    kappa: f64,
    ybar: VirtualControl,
    l: f64,
    k: f64,
) -> Result<BackstepLaw> {
    Error::check_dim("backstepping weight", f.state_dim() + 1, weight.len())?;
    Error::check_dim("subsystem input", 1, f.control_dim())?;
    positive("k", k)?;
    let r = weight.as_slice();
    let r_y = r[r.len() - 1];
    for (i, &ri) in r.iter().enumerate() {
        if !(kappa + ri > 0.0) {
            return Err(Error::inadmissible(format!("kappa + r{} > 0", i + 1), kappa, -ri));
        }
    }
    for (i, &ri) in r[..r.len() - 1].iter().enumerate() {
        let bound = ri / r_y - 1.0;
        if !(l > bound) {
            return Err(Error::inadmissible(format!("l + 1 > r{}/r{}", i + 1, r.len()), l, bound));
        }
    }
    if !(l > 0.0) {
        return Err(Error::inadmissible("l > 0", l, 0.0));
    }
    Ok(BackstepLaw {
        weight: weight.clone(),
        kappa,
        l,
        gain: k,
        outer: (kappa + r_y) / (l * r_y),
        ybar,
    })
}

/// The closed loop `x' = f(x, y), y' = v(x, y)` on `n + 1` states.
pub fn cascade_closed_loop(f: &VectorField, law: &BackstepLaw) -> Result<VectorField> {
    Error::check_dim("backstepping weight", f.state_dim() + 1, law.weight.len())?;
    let n = f.state_dim();
    let sub = f.clone();
    let plant = VectorField::new(
        format!("{} with integrator", f.label()),
        n + 1,
        1,
        move |t, s, u, out| {
            sub.eval(t, &s[..n], &s[n..], &mut out[..n]);
            out[n] = u[0];
        },
    );
    plant.close_loop(law.clone().into_feedback(format!("backstepping on {}", f.label())))
}
