//! Small-time stabilizers for `x1' = |x1|^ν x2, x2' = u` (ν = 0 is the
//! plain double integrator).

use super::{check_kappa_half, gain_g, gain_h, nested_gain_threshold, positive, StateFeedback};
use crate::error::Result;
use crate::hompow::{spow, HomogeneityClaim, Weight};

/// `u = -k1⌊x1⌉^{1+2κ} - k2⌊x2⌉^{(1+2κ)/(1+κ)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedLaw {
    pub k1: f64,
    pub k2: f64,
    pub kappa: f64,
    e1: f64,
    e2: f64,
}

impl BoundedLaw {
    pub fn new(k1: f64, k2: f64, kappa: f64) -> Result<Self> {
        check_kappa_half(kappa, "kappa")?;
        positive("k1", k1)?;
        positive("k2", k2)?;
        Ok(Self::new_unchecked(k1, k2, kappa))
    }

    pub fn new_unchecked(k1: f64, k2: f64, kappa: f64) -> Self {
        BoundedLaw {
            k1,
            k2,
            kappa,
            e1: 1.0 + 2.0 * kappa,
            e2: (1.0 + 2.0 * kappa) / (1.0 + kappa),
        }
    }

    #[inline]
    pub fn control(&self, x1: f64, x2: f64) -> f64 {
        -self.k1 * spow(x1, self.e1) - self.k2 * spow(x2, self.e2)
    }

    pub fn into_feedback(self) -> StateFeedback {
        let claim = HomogeneityClaim::new(di_weight(self.kappa, 0.0), self.kappa);
        StateFeedback::autonomous("double integrator, bounded law", 2, 1, move |x, u| {
            u[0] = self.control(x[0], x[1])
        })
        .with_claim(claim)
        .with_parameter("k1", self.k1)
        .with_parameter("k2", self.k2)
        .with_parameter("kappa", self.kappa)
        .with_parameter("exp_x1", self.e1)
        .with_parameter("exp_x2", self.e2)
    }
}

/// `u = -k2⌊ ⌊x2⌉^{(1-κ)/(1+κ)} + k1^{(1-κ)/(1+κ)}⌊x1⌉^{1-κ} ⌉^{(1+2κ)/(1-κ)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedLaw {
    pub k1: f64,
    pub k2: f64,
    pub kappa: f64,
    inner: f64,
    coef: f64,
    outer: f64,
}

impl NestedLaw {
    pub fn new(k1: f64, k2: f64, kappa: f64) -> Result<Self> {
        let bound = nested_gain_threshold(kappa, k1)?;
        super::strictly_above("k2 > nested threshold(kappa, k1)", k2, bound)?;
        Ok(Self::new_unchecked(k1, k2, kappa))
    }

    pub fn new_unchecked(k1: f64, k2: f64, kappa: f64) -> Self {
        let inner = (1.0 - kappa) / (1.0 + kappa);
        NestedLaw {
            k1,
            k2,
            kappa,
            inner,
            coef: k1.powf(inner),
            outer: (1.0 + 2.0 * kappa) / (1.0 - kappa),
        }
    }

    /// `x̄2 = -k1⌊x1⌉^{1+κ}`, where the law vanishes.
    pub fn manifold(&self, x1: f64) -> f64 {
        -self.k1 * spow(x1, 1.0 + self.kappa)
    }

    /// `⌊x2⌉^{(1-κ)/(1+κ)} + k1^{(1-κ)/(1+κ)}⌊x1⌉^{1-κ}`, zero on the manifold.
    #[inline]
    pub fn bracket(&self, x1: f64, x2: f64) -> f64 {
        spow(x2, self.inner) + self.coef * spow(x1, 1.0 - self.kappa)
    }

    #[inline]
    pub fn control(&self, x1: f64, x2: f64) -> f64 {
        -self.k2 * spow(self.bracket(x1, x2), self.outer)
    }

    pub fn into_feedback(self) -> StateFeedback {
        let claim = HomogeneityClaim::new(di_weight(self.kappa, 0.0), self.kappa);
        StateFeedback::autonomous("double integrator, nested law", 2, 1, move |x, u| {
            u[0] = self.control(x[0], x[1])
        })
        .with_claim(claim)
        .with_parameter("k1", self.k1)
        .with_parameter("k2", self.k2)
        .with_parameter("kappa", self.kappa)
        .with_parameter("exp_inner", self.inner)
        .with_parameter("exp_outer", self.outer)
    }
}

/// Desingularized backstepping law for `x1' = |x1|^ν x2, x2' = u`:
///
/// `x̄2 = -k1⌊x1⌉^{1+κ-ν}`, `u = -k2⌊ ⌊x2⌉^l - ⌊x̄2⌉^l ⌉^{(1+2κ-ν)/(l(1+κ-ν))}`.
///
/// With ν = 0 this is the double-integrator law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesingularizedLaw {
    pub k1: f64,
    pub k2: f64,
    pub kappa: f64,
    pub nu: f64,
    pub l: f64,
    manifold_exp: f64,
    outer: f64,
}

impl DesingularizedLaw {
    pub fn new_unchecked(k1: f64, k2: f64, kappa: f64, nu: f64, l: f64) -> Self {
        let r2 = 1.0 + kappa - nu;
        DesingularizedLaw {
            k1,
            k2,
            kappa,
            nu,
            l,
            manifold_exp: r2,
            outer: (1.0 + 2.0 * kappa - nu) / (l * r2),
        }
    }

    /// Weight `(1, 1+κ-ν)` of the closed loop.
    pub fn weight(&self) -> Weight {
        di_weight(self.kappa, self.nu)
    }

    #[inline]
    pub fn manifold(&self, x1: f64) -> f64 {
        -self.k1 * spow(x1, self.manifold_exp)
    }

    /// `⌊x2⌉^l - ⌊x̄2⌉^l`.
    #[inline]
    pub fn bracket(&self, x1: f64, x2: f64) -> f64 {
        spow(x2, self.l) - spow(self.manifold(x1), self.l)
    }

    #[inline]
    pub fn control(&self, x1: f64, x2: f64) -> f64 {
        -self.k2 * spow(self.bracket(x1, x2), self.outer)
    }

    pub fn outer_exponent(&self) -> f64 {
        self.outer
    }

    fn into_feedback_labeled(self, label: &str) -> StateFeedback {
        let claim = HomogeneityClaim::new(self.weight(), self.kappa);
        StateFeedback::autonomous(label, 2, 1, move |x, u| u[0] = self.control(x[0], x[1]))
            .with_claim(claim)
            .with_parameter("k1", self.k1)
            .with_parameter("k2", self.k2)
            .with_parameter("kappa", self.kappa)
            .with_parameter("nu", self.nu)
            .with_parameter("l", self.l)
            .with_parameter("exp_manifold", self.manifold_exp)
            .with_parameter("exp_outer", self.outer)
    }

    pub fn into_feedback(self) -> StateFeedback {
        if self.nu == 0.0 {
            self.into_feedback_labeled("double integrator, desingularized backstepping")
        } else {
            self.into_feedback_labeled("modified double integrator, desingularized backstepping")
        }
    }
}

pub(crate) fn di_weight(kappa: f64, nu: f64) -> Weight {
    Weight::new(vec![1.0, 1.0 + kappa - nu]).expect("admissible kappa gives a positive weight")
}

/// Bounded small-time stabilizer of the double integrator.
pub fn di_law_bounded(k1: f64, k2: f64, kappa: f64) -> Result<StateFeedback> {
    Ok(BoundedLaw::new(k1, k2, kappa)?.into_feedback())
}

/// Nested small-time stabilizer of the double integrator; `k2` must exceed
/// [`nested_gain_threshold`].
pub fn di_law_nested(k1: f64, k2: f64, kappa: f64) -> Result<StateFeedback> {
    Ok(NestedLaw::new(k1, k2, kappa)?.into_feedback())
}

/// Desingularized backstepping for the double integrator; `k2 > g(l, κ, k1)`.
pub fn di_law_backstep(k1: f64, k2: f64, kappa: f64, l: f64) -> Result<StateFeedback> {
    let bound = gain_g(l, kappa, k1)?;
    super::strictly_above("k2 > g(l, kappa, k1)", k2, bound)?;
    Ok(DesingularizedLaw::new_unchecked(k1, k2, kappa, 0.0, l).into_feedback())
}

/// Desingularized backstepping for `x1' = |x1|^ν x2`; `k2 > h(l, κ, ν, k1)`.
pub fn mdi_law(k1: f64, k2: f64, kappa: f64, nu: f64, l: f64) -> Result<StateFeedback> {
    let bound = gain_h(l, kappa, nu, k1)?;
    super::strictly_above("k2 > h(l, kappa, nu, k1)", k2, bound)?;
    Ok(DesingularizedLaw::new_unchecked(k1, k2, kappa, nu, l).into_feedback())
}
