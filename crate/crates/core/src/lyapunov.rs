//! Explicit Lyapunov functions for the double-integrator laws and sampled
//! checks of their decay along closed loops.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::VirtualControl;
use crate::hompow::{
    apow, dspow, log_uniform, sample_sphere, seeded_rng, spow, HomogeneityReport,
    HomogeneitySampling, Weight,
};
use crate::plants::VectorField;

pub type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A homogeneous Lyapunov function with its analytic gradient.
#[derive(Clone)]
pub struct LyapunovCertificate {
    label: String,
    weight: Weight,
    degree: f64,
    value: ScalarMap,
    gradient: GradientMap,
}

impl fmt::Debug for LyapunovCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovCertificate")
            .field("label", &self.label)
            .field("weight", &self.weight)
            .field("degree", &self.degree)
            .finish()
    }
}

impl LyapunovCertificate {
    pub fn new(
        label: impl Into<String>,
        weight: Weight,
        degree: f64,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        LyapunovCertificate {
            label: label.into(),
            weight,
            degree,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    /// Homogeneity degree `α`.
    pub fn degree(&self) -> f64 {
        self.degree
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// `∇V(x)·F(t, x)`.
    pub fn derivative_along(&self, field: &VectorField, t: f64, x: &[f64]) -> f64 {
        let f = field.rhs(t, x);
        self.gradient(x).iter().zip(&f).map(|(g, v)| g * v).sum()
    }

    /// Samples `V(Λ_r(λ,x)) = λ^α V(x)`; uses the same sampler and report
    /// as vector-field homogeneity checks.
    pub fn check_homogeneity(&self, opts: &HomogeneitySampling) -> Result<HomogeneityReport> {
        let w = &self.weight;
        let mut rng = seeded_rng(opts.seed);
        let mut lx = vec![0.0; w.len()];
        let mut worst = (0.0_f64, vec![0.0; w.len()], 1.0);
        for _ in 0..opts.samples {
            let radius = log_uniform(&mut rng, opts.radius_range.0, opts.radius_range.1);
            let x = sample_sphere(w, radius, &mut rng);
            let lambda = log_uniform(&mut rng, opts.lambda_range.0, opts.lambda_range.1);
            w.dilate_into(lambda, &x, &mut lx);
            let (v, vl) = (self.value(&x), self.value(&lx));
            if !v.is_finite() || !vl.is_finite() {
                return Err(Error::NonFinite(format!("{} at x = {x:?}", self.label)));
            }
            let expected = lambda.powf(self.degree) * v;
            let residual = (vl - expected).abs() / expected.abs().max(1.0);
            if residual > worst.0 {
                worst = (residual, x, lambda);
            }
        }
        Ok(HomogeneityReport {
            label: self.label.clone(),
            samples: opts.samples,
            max_relative_residual: worst.0,
            worst_state: worst.1,
            worst_lambda: worst.2,
            tol: opts.tol,
            pass: worst.0 <= opts.tol,
        })
    }
}

/// `Φ(y, ȳ) = l/(l+1)|ȳ|^{l+1} − y⌊ȳ⌉^l + |y|^{l+1}/(l+1)`, the integral of
/// `⌊s⌉^l − ⌊ȳ⌉^l` from `ȳ` to `y`.
pub fn phi_desing(y: f64, ybar: f64, l: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::Domain(format!("l must be > 0, got {l}")));
    }
    if !y.is_finite() || !ybar.is_finite() {
        return Err(Error::NonFinite(format!("phi at y = {y}, ybar = {ybar}")));
    }
    Ok(phi(y, ybar, l))
}

#[inline]
pub(crate) fn phi(y: f64, ybar: f64, l: f64) -> f64 {
    let lp1 = l + 1.0;
    let v = l / lp1 * apow(ybar, lp1) - y * spow(ybar, l) + apow(y, lp1) / lp1;
    // Rounding can push the exact zero on y = ȳ slightly negative.
    v.max(0.0)
}

/// A virtual control `ȳ(x)` together with the gradient of `⌊ȳ(x)⌉^l`.
#[derive(Clone)]
pub struct VirtualManifold {
    value: VirtualControl,
    power_gradient: Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>,
}

impl VirtualManifold {
    /// `power_gradient(x, l, out)` must write `∇(⌊ȳ(x)⌉^l)`.
    pub fn new(
        value: VirtualControl,
        power_gradient: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        VirtualManifold {
            value,
            power_gradient: Arc::new(power_gradient),
        }
    }

    /// `ȳ(x) = −k⌊x_i⌉^p`.
    pub fn power(index: usize, gain: f64, exponent: f64) -> Self {
        VirtualManifold {
            value: Arc::new(move |x: &[f64]| -gain * spow(x[index], exponent)),
            power_gradient: Arc::new(move |x: &[f64], l: f64, out: &mut [f64]| {
                out.fill(0.0);
                out[index] = -gain.powf(l) * dspow(x[index], exponent * l);
            }),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
}

/// `W(x, y) = V(x) + a·Φ(y, ȳ(x))`, homogeneous of degree `(l+1)·r_y` for
/// the weight of `V` extended by `r_y`.
pub fn w_cascaded(
    v: &LyapunovCertificate,
    a: f64,
    manifold: &VirtualManifold,
    l: f64,
    y_weight: f64,
) -> Result<LyapunovCertificate> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("a must be > 0, got {a}")));
    }
    if !(l > 0.0) {
        return Err(Error::Domain(format!("l must be > 0, got {l}")));
    }
    let alpha = (l + 1.0) * y_weight;
    if (v.degree - alpha).abs() > 1e-12 * alpha.abs().max(1.0) {
        return Err(Error::Config(format!(
            "degree of '{}' is {}, but (l+1)·r_y = {alpha}",
            v.label, v.degree
        )));
    }
    let n = v.dim();
    let weight = v.weight.extended(y_weight)?;
    let (vv, vg) = (v.clone(), v.clone());
    let (mv, mg) = (manifold.clone(), manifold.clone());
    Ok(LyapunovCertificate::new(
        format!("{} + desingularized term", v.label),
        weight,
        alpha,
        move |s| vv.value(&s[..n]) + a * phi(s[n], mv.eval(&s[..n]), l),
        move |s, out| {
            let (x, y) = (&s[..n], s[n]);
            let ybar = mg.eval(x);
            vg.gradient_into(x, &mut out[..n]);
            let mut pg = vec![0.0; n];
            (mg.power_gradient)(x, l, &mut pg);
            for i in 0..n {
                out[i] += a * (ybar - y) * pg[i];
            }
            out[n] = a * (spow(y, l) - spow(ybar, l));
        },
    ))
}

/// `|x|^α/α` on ℝ, weight `(1)`, degree `α`.
pub fn power_certificate(alpha: f64) -> Result<LyapunovCertificate> {
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!("alpha must be > 1, got {alpha}")));
    }
    Ok(LyapunovCertificate::new(
        format!("|x|^{alpha}/{alpha}"),
        Weight::uniform(1),
        alpha,
        move |x| apow(x[0], alpha) / alpha,
        move |x, g| g[0] = spow(x[0], alpha - 1.0),
    ))
}

/// `V = k1/(2(1+κ))|x1|^{2(1+κ)} + x2²/2`.
pub fn v_di(k1: f64, kappa: f64) -> Result<LyapunovCertificate> {
    crate::feedback::GainSet {
        kappa1: Some(kappa),
        k1: Some(k1),
        k2: Some(1.0),
        ..Default::default()
    }
    .check_bounded()?;
    let p = 2.0 * (1.0 + kappa);
    let e = 1.0 + 2.0 * kappa;
    Ok(LyapunovCertificate::new(
        "double integrator energy",
        Weight::new(vec![1.0, 1.0 + kappa])?,
        p,
        move |x| k1 / p * apow(x[0], p) + 0.5 * x[1] * x[1],
        move |x, g| {
            g[0] = k1 * spow(x[0], e);
            g[1] = x[1];
        },
    ))
}

/// `V_ε = V + ε·x2⌊x1⌉^{1+κ}`, a strict Lyapunov function for small `ε`.
pub fn v_eps(k1: f64, kappa: f64, eps: f64) -> Result<LyapunovCertificate> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be > 0, got {eps}")));
    }
    let base = v_di(k1, kappa)?;
    let (bv, bg) = (base.clone(), base.clone());
    let r2 = 1.0 + kappa;
    Ok(LyapunovCertificate::new(
        format!("double integrator energy with cross term (eps = {eps})"),
        base.weight.clone(),
        base.degree,
        move |x| bv.value(x) + eps * x[1] * spow(x[0], r2),
        move |x, g| {
            bg.gradient_into(x, g);
            g[0] += eps * x[1] * r2 * apow(x[0], kappa);
            g[1] += eps * spow(x[0], r2);
        },
    ))
}

/// Scale `a` with `a·l·r2·k1^{1+l} = 1` used for the desingularized laws.
pub fn cascade_scale(l: f64, r2: f64, k1: f64) -> f64 {
    1.0 / (l * r2 * k1.powf(1.0 + l))
}

/// Scale `a` with `a(1−κ)k1^{2/(1+κ)} = 1` used for the nested law.
pub fn nested_scale(kappa: f64, k1: f64) -> f64 {
    1.0 / ((1.0 - kappa) * k1.powf(2.0 / (1.0 + kappa)))
}

/// `W = |x1|^α/α + aΦ(x2, x̄2(x1))` with `x̄2 = −k1⌊x1⌉^{1+κ−ν}`,
/// `α = (l+1)(1+κ−ν)` and `a` from [`cascade_scale`]. Covers both the plain
/// (ν = 0) and the modified double integrator.
pub fn w_backstep(k1: f64, kappa: f64, nu: f64, l: f64) -> Result<LyapunovCertificate> {
    let r2 = 1.0 + kappa - nu;
    if !(r2 > 0.0) || !(l * r2 >= 1.0 - 1e-12) {
        return Err(Error::inadmissible("l(1+kappa-nu) >= 1", l * r2, 1.0));
    }
    let v = power_certificate((l + 1.0) * r2)?;
    let manifold = VirtualManifold::power(0, k1, r2);
    w_cascaded(&v, cascade_scale(l, r2, k1), &manifold, l, r2)
}

/// `W = x1²/2 + aΦ₂` for the nested law, with `l = (1−κ)/(1+κ)` and
/// `x̄2 = −k1⌊x1⌉^{1+κ}`. A scale `a` other than [`nested_scale`] is
/// accepted with a warning.
pub fn w_nested(k1: f64, kappa: f64, a: f64) -> Result<LyapunovCertificate> {
    crate::feedback::GainSet {
        kappa1: Some(kappa),
        k1: Some(k1),
        k2: Some(1.0),
        ..Default::default()
    }
    .check_bounded()?;
    let expected = nested_scale(kappa, k1);
    if (a - expected).abs() > 1e-12 * expected {
        log::warn!("nested certificate built with a = {a}; the decay estimate assumes a = {expected}");
    }
    let v = LyapunovCertificate::new(
        "x^2/2",
        Weight::uniform(1),
        2.0,
        |x| 0.5 * x[0] * x[0],
        |x, g| g[0] = x[0],
    );
    let l = (1.0 - kappa) / (1.0 + kappa);
    let mut w = w_cascaded(&v, a, &VirtualManifold::power(0, k1, 1.0 + kappa), l, 1.0 + kappa)?;
    w.label = "nested double integrator certificate".into();
    Ok(w)
}

/// Homogeneous annulus `inner ≤ ρ(x) ≤ outer` used for decay sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecaySampling {
    pub samples: usize,
    pub inner: f64,
    pub outer: f64,
    /// Skip states with `|x_i| < ratio·ρ(x)` for this coordinate, where the
    /// derivative is known to vanish.
    pub exclude_axis: Option<(usize, f64)>,
    pub seed: u64,
}

impl Default for DecaySampling {
    fn default() -> Self {
        DecaySampling {
            samples: 10_000,
            inner: 0.01,
            outer: 10.0,
            exclude_axis: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub label: String,
    /// Smallest `−(∇V·F)/V^{(α+κ)/α}` seen.
    pub min_margin: f64,
    pub worst_state: Vec<f64>,
    pub samples: usize,
    pub pass: bool,
}

/// Samples `∇V·F` over an annulus; passes when it is negative everywhere.
/// `kappa` is the degree of the field (its claim is used when `None`).
pub fn decay_margin(
    cert: &LyapunovCertificate,
    field: &VectorField,
    kappa: Option<f64>,
    opts: &DecaySampling,
) -> Result<DecayReport> {
    Error::check_dim("certificate dimension", field.state_dim(), cert.dim())?;
    let kappa = match kappa.or_else(|| field.claim().map(|c| c.degree)) {
        Some(k) => k,
        None => {
            return Err(Error::Config(format!(
                "no homogeneity degree given for '{}'",
                field.label()
            )))
        }
    };
    if !(opts.inner > 0.0 && opts.outer >= opts.inner) || opts.samples == 0 {
        return Err(Error::Domain(format!(
            "invalid annulus [{}, {}] or sample count {}",
            opts.inner, opts.outer, opts.samples
        )));
    }
    let exponent = (cert.degree + kappa) / cert.degree;
    let w = &cert.weight;
    let mut rng = seeded_rng(opts.seed);
    let mut worst = (f64::INFINITY, Vec::new());
    let mut taken = 0;
    while taken < opts.samples {
        let radius = log_uniform(&mut rng, opts.inner, opts.outer);
        let x = sample_sphere(w, radius, &mut rng);
        if let Some((i, ratio)) = opts.exclude_axis {
            if x[i].abs() < ratio * radius {
                continue;
            }
        }
        taken += 1;
        let vdot = cert.derivative_along(field, 0.0, &x);
        let v = cert.value(&x);
        let margin = -vdot / v.powf(exponent);
        if !margin.is_finite() {
            return Err(Error::NonFinite(format!(
                "decay margin of '{}' at x = {x:?} (V = {v}, dV = {vdot})",
                cert.label
            )));
        }
        if margin < worst.0 {
            worst = (margin, x);
        }
    }
    Ok(DecayReport {
        label: format!("{} along {}", cert.label, field.label()),
        min_margin: worst.0,
        worst_state: worst.1,
        samples: opts.samples,
        pass: worst.0 > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub label: String,
    pub samples: usize,
    pub max_relative_error: f64,
    pub worst_state: Vec<f64>,
    pub pass: bool,
}

/// Compares the analytic gradient with central differences of step `h`
/// at random states with every `|x_i| ≥ 0.05` (off the coordinate axes).
pub fn gradient_check(
    cert: &LyapunovCertificate,
    samples: usize,
    h: f64,
    rtol: f64,
    seed: u64,
) -> GradientReport {
    let n = cert.dim();
    let mut rng = seeded_rng(seed);
    let mut worst = (0.0_f64, vec![0.0; n]);
    let mut xp = vec![0.0; n];
    for _ in 0..samples {
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let mag = rng.random_range(0.05..2.0);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let g = cert.gradient(&x);
        for i in 0..n {
            xp.copy_from_slice(&x);
            xp[i] = x[i] + h;
            let vp = cert.value(&xp);
            xp[i] = x[i] - h;
            let vm = cert.value(&xp);
            let fd = (vp - vm) / (2.0 * h);
            let err = (fd - g[i]).abs() / g[i].abs().max(1.0);
            if err > worst.0 {
                worst = (err, x.clone());
            }
        }
    }
    GradientReport {
        label: cert.label.clone(),
        samples,
        max_relative_error: worst.0,
        worst_state: worst.1,
        pass: worst.0 <= rtol,
    }
}
