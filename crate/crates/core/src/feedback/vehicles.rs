//! Two-phase periodic laws for the unicycle and the slider.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::double_integrator::{BoundedLaw, DesingularizedLaw};
use super::{ControlMap, GainSet, StateFeedback};
use crate::error::{Error, Result};
use crate::hompow::{apow, spow, HomogeneityClaim, Weight};

/// Wheel speeds to forward and angular velocity, with the convention
/// `v1 = R(ω_R + ω_L)`, `Ω = R/(2d) (ω_R − ω_L)`.
///
/// Note there is no 1/2 on `v1`; the usual kinematics would have one.
pub fn wheel_speeds_to_body_velocity(
    omega_r: f64,
    omega_l: f64,
    radius: f64,
    half_axle: f64,
) -> Result<(f64, f64)> {
    if !(radius > 0.0) || !(half_axle > 0.0) {
        return Err(Error::Domain(format!(
            "wheel radius and axle length must be positive (R = {radius}, d = {half_axle})"
        )));
    }
    Ok((
        radius * (omega_r + omega_l),
        radius / (2.0 * half_axle) * (omega_r - omega_l),
    ))
}

/// Periodic unicycle law. On `[0, T/2)` the pair `(x2, x3)` is driven to
/// zero through `x2' = |x2|^ν x3`; on `[T/2, T)` the heading is frozen and
/// `x1` is steered to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnicycleLaw {
    pub k1: f64,
    pub kappa1: f64,
    pub nu: f64,
    pub period: f64,
    lateral: DesingularizedLaw,
}

impl UnicycleLaw {
    pub fn new(gains: &GainSet, period: f64) -> Result<Self> {
        gains.check_unicycle()?;
        Self::new_unchecked(gains, period)
    }

    /// Skips the gain threshold on `k3`; still needs every entry present.
    pub fn new_unchecked(gains: &GainSet, period: f64) -> Result<Self> {
        check_period(period)?;
        Ok(UnicycleLaw {
            k1: gains.get("k1")?,
            kappa1: gains.get("kappa1")?,
            nu: gains.get("nu")?,
            period,
            lateral: DesingularizedLaw::new_unchecked(
                gains.get("k2")?,
                gains.get("k3")?,
                gains.get("kappa2")?,
                gains.get("nu")?,
                gains.get("l")?,
            ),
        })
    }

    /// Law driving `(x2, x3)` in the first half period.
    pub fn lateral(&self) -> &DesingularizedLaw {
        &self.lateral
    }

    pub fn phase_one(&self, x: &[f64], u: &mut [f64]) {
        u[0] = apow(x[1], self.nu);
        u[1] = self.lateral.control(x[1], x[2]);
    }

    pub fn phase_two(&self, x: &[f64], u: &mut [f64]) {
        u[0] = -self.k1 * spow(x[0], 1.0 + self.kappa1);
        u[1] = 0.0;
    }

    /// Homogeneity of the first-phase loop on the quadratic model:
    /// weight `(ν − κ2, 1, 1 + κ2 − ν)`, degree `κ2`.
    pub fn phase_one_claim(&self) -> HomogeneityClaim {
        let kappa2 = self.lateral.kappa;
        let w = Weight::new(vec![self.nu - kappa2, 1.0, 1.0 + kappa2 - self.nu])
            .expect("admissible exponents give a positive weight");
        HomogeneityClaim::new(w, kappa2)
    }

    pub fn into_feedback(self) -> StateFeedback {
        let half = self.period / 2.0;
        let p1: ControlMap = Arc::new(move |x: &[f64], u: &mut [f64]| self.phase_one(x, u));
        let p2: ControlMap = Arc::new(move |x: &[f64], u: &mut [f64]| self.phase_two(x, u));
        let l = &self.lateral;
        StateFeedback::periodic(
            "unicycle two-phase law",
            3,
            2,
            self.period,
            vec![(0.0, half, p1), (half, self.period, p2)],
        )
        .expect("two halves partition the period")
        .with_parameter("k1", self.k1)
        .with_parameter("k2", l.k1)
        .with_parameter("k3", l.k2)
        .with_parameter("kappa1", self.kappa1)
        .with_parameter("kappa2", l.kappa)
        .with_parameter("nu", self.nu)
        .with_parameter("l", l.l)
        .with_parameter("period", self.period)
    }
}

/// Two-phase unicycle law with admissibility checks.
pub fn unicycle_controller(gains: &GainSet, period: f64) -> Result<StateFeedback> {
    Ok(UnicycleLaw::new(gains, period)?.into_feedback())
}

/// Exponent used for `u1` during the first phase of the slider law.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliderU1Exponent {
    /// `μ(r4 + κ2)/r3`, which keeps the first-phase loop homogeneous.
    #[default]
    Homogeneous,
    /// `μ r5/r3`.
    Literal,
}

/// Bracket powers used for `u2` during the first phase of the slider law.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliderU2Form {
    /// Powers `r3/r6`, outer exponent `(r6 + κ2)/r3`.
    #[default]
    Statement,
    /// Powers `r5/r6`, outer exponent `(r6 + κ2)/r5`.
    Proof,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliderOptions {
    #[serde(default)]
    pub u1_exponent: SliderU1Exponent,
    #[serde(default)]
    pub u2_form: SliderU2Form,
}

/// Slider weights `r1..r7`:
/// `(1, 1+κ1, 1, 1+κ2, (r4+κ2)(1−μ), r5+κ2, r6+κ2)`.
pub fn slider_weights(kappa1: f64, kappa2: f64, mu: f64) -> [f64; 7] {
    let r4 = 1.0 + kappa2;
    let r5 = (r4 + kappa2) * (1.0 - mu);
    let r6 = r5 + kappa2;
    [1.0, 1.0 + kappa1, 1.0, r4, r5, r6, r6 + kappa2]
}

/// Periodic slider law on the normalized inputs `u = (τ1/m, τ2/I)`.
///
/// First half period: the chain `x3 → x4 → x5 → x6` is driven to zero by
/// nested virtual controls while `u1` stays small. Second half: `x5 = x6 = 0`
/// so `x1'' = u1` is a double integrator handled by the bounded law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliderLaw {
    pub r: [f64; 7],
    pub kappa2: f64,
    pub mu: f64,
    pub k: [f64; 6],
    pub period: f64,
    pub options: SliderOptions,
    planar: BoundedLaw,
    u1_exp: f64,
    u2_base: f64,
    u2_outer: f64,
}

impl SliderLaw {
    pub fn new(gains: &GainSet, period: f64, options: SliderOptions) -> Result<Self> {
        gains.check_slider()?;
        Self::new_unchecked(gains, period, options)
    }

    pub fn new_unchecked(gains: &GainSet, period: f64, options: SliderOptions) -> Result<Self> {
        check_period(period)?;
        let (kappa1, kappa2, mu) = (gains.get("kappa1")?, gains.get("kappa2")?, gains.get("mu")?);
        let mut k = [0.0; 6];
        for (i, ki) in k.iter_mut().enumerate() {
            *ki = gains.get(&format!("k{}", i + 1))?;
        }
        let r = slider_weights(kappa1, kappa2, mu);
        let u1_exp = match options.u1_exponent {
            SliderU1Exponent::Homogeneous => mu * (r[3] + kappa2) / r[2],
            SliderU1Exponent::Literal => mu * r[4] / r[2],
        };
        let u2_base = match options.u2_form {
            SliderU2Form::Statement => r[2],
            SliderU2Form::Proof => r[4],
        };
        Ok(SliderLaw {
            r,
            kappa2,
            mu,
            k,
            period,
            options,
            planar: BoundedLaw::new_unchecked(k[0], k[1], kappa1),
            u1_exp,
            u2_base,
            u2_outer: (r[5] + kappa2) / u2_base,
        })
    }

    /// Virtual controls `(x̄4, x̄5, x̄6)` and the two brackets that feed `u1`
    /// and `x̄6`.
    fn chain(&self, x: &[f64]) -> ([f64; 3], f64) {
        let r = &self.r;
        let [_, _, k3, k4, k5, _] = self.k;
        let e4 = r[2] / r[3];
        let e5 = r[2] / r[4];
        let x4bar = -k3 * spow(x[2], r[3] / r[2]);
        let b4 = spow(x[3], e4) - spow(x4bar, e4);
        let x5bar = -k4 * spow(b4, r[4] / r[2]);
        let b5 = spow(x[4], e5) - spow(x5bar, e5);
        let x6bar = -k5 * spow(b5, r[5] / r[2]);
        ([x4bar, x5bar, x6bar], b4)
    }

    pub fn virtual_controls(&self, x: &[f64]) -> [f64; 3] {
        self.chain(x).0
    }

    pub fn phase_one(&self, x: &[f64], u: &mut [f64]) {
        let ([_, _, x6bar], b4) = self.chain(x);
        let e6 = self.u2_base / self.r[5];
        u[0] = apow(b4, self.u1_exp);
        u[1] = -self.k[5] * spow(spow(x[5], e6) - spow(x6bar, e6), self.u2_outer);
    }

    pub fn phase_two(&self, x: &[f64], u: &mut [f64]) {
        u[0] = self.planar.control(x[0], x[1]);
        u[1] = 0.0;
    }

    /// Homogeneity of the first-phase loop on the quadratic model. Holds
    /// only with the default `u1` exponent.
    pub fn phase_one_claim(&self) -> HomogeneityClaim {
        HomogeneityClaim::new(self.phase_one_weight(), self.kappa2)
    }

    /// `(e − 2κ2, e − κ2, r3, r4, r5, r6)` with `e` the `u1` exponent times
    /// `r3`, so that `x1' = x2` and `x2' = u1` scale with degree `κ2`.
    pub fn phase_one_weight(&self) -> Weight {
        let e = self.u1_exp * self.r[2];
        Weight::new(vec![
            e - 2.0 * self.kappa2,
            e - self.kappa2,
            self.r[2],
            self.r[3],
            self.r[4],
            self.r[5],
        ])
        .expect("admissible exponents give a positive weight")
    }

    pub fn into_feedback(self) -> StateFeedback {
        let half = self.period / 2.0;
        let p1: ControlMap = Arc::new(move |x: &[f64], u: &mut [f64]| self.phase_one(x, u));
        let p2: ControlMap = Arc::new(move |x: &[f64], u: &mut [f64]| self.phase_two(x, u));
        let mut law = StateFeedback::periodic(
            "slider two-phase law",
            6,
            2,
            self.period,
            vec![(0.0, half, p1), (half, self.period, p2)],
        )
        .expect("two halves partition the period");
        for (i, k) in self.k.iter().enumerate() {
            law = law.with_parameter(format!("k{}", i + 1), *k);
        }
        for (i, r) in self.r.iter().enumerate() {
            law = law.with_parameter(format!("r{}", i + 1), *r);
        }
        law.with_parameter("kappa1", self.planar.kappa)
            .with_parameter("kappa2", self.kappa2)
            .with_parameter("mu", self.mu)
            .with_parameter("exp_u1", self.u1_exp)
            .with_parameter("exp_u2_outer", self.u2_outer)
            .with_parameter("period", self.period)
    }
}

/// Two-phase slider law with the default options.
pub fn slider_controller(gains: &GainSet, period: f64) -> Result<StateFeedback> {
    slider_controller_with(gains, period, SliderOptions::default())
}

pub fn slider_controller_with(
    gains: &GainSet,
    period: f64,
    options: SliderOptions,
) -> Result<StateFeedback> {
    Ok(SliderLaw::new(gains, period, options)?.into_feedback())
}

fn check_period(period: f64) -> Result<()> {
    if period > 0.0 && period.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("period must be > 0, got {period}")))
    }
}
