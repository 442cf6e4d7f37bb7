//! Signed powers, dilations and homogeneous norms.
//!
//! A weight `r = (r_1, ..., r_n)` defines the dilation
//! `Λ_r(λ, x) = (λ^{r_1} x_1, ..., λ^{r_n} x_n)` and the homogeneous "norm"
//! `ρ(x) = Σ |x_i|^{1/r_i}`, which satisfies `ρ(Λ_r(λ, x)) = λ ρ(x)`.
//! A vector field `F` is r-homogeneous of degree κ when every component
//! satisfies `F_i(Λ_r(λ, x)) = λ^{κ + r_i} F_i(x)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plants::VectorField;

/// `⌊x⌉^α = sign(x)|x|^α` without argument checks.
///
/// Used on hot paths where the exponent was validated at construction.
#[inline]
pub fn spow(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(alpha)
    }
}

/// `|x|^α` with the convention `|0|^0 = 1`.
#[inline]
pub fn apow(x: f64, alpha: f64) -> f64 {
    x.abs().powf(alpha)
}

/// Signed power `sign(x)|x|^α` for `α > 0`.
pub fn signed_power(x: f64, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Domain(format!("signed power exponent must be > 0, got {alpha}")));
    }
    if x.is_nan() {
        return Err(Error::NonFinite("signed power of NaN".into()));
    }
    Ok(spow(x, alpha))
}

/// Derivative of `x ↦ ⌊x⌉^α`, i.e. `α|x|^{α-1}`, for `α ≥ 1`.
pub fn signed_power_derivative(x: f64, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 1.0 {
        return Err(Error::Domain(format!(
            "signed power derivative needs exponent >= 1, got {alpha}"
        )));
    }
    if x.is_nan() {
        return Err(Error::NonFinite("signed power derivative of NaN".into()));
    }
    Ok(dspow(x, alpha))
}

#[inline]
pub(crate) fn dspow(x: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        1.0
    } else if x == 0.0 {
        0.0
    } else {
        alpha * x.abs().powf(alpha - 1.0)
    }
}

/// Vector of positive dilation exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weight(Vec<f64>);

impl Weight {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::Domain("weight must have at least one entry".into()));
        }
        if let Some((i, v)) = r.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("weight entry r_{} = {v} is not positive", i + 1)));
        }
        Ok(Weight(r))
    }

    /// The weight `(1, ..., 1)`.
    pub fn uniform(n: usize) -> Self {
        Weight(vec![1.0; n.max(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Weight obtained by appending one coordinate.
    pub fn extended(&self, r_next: f64) -> Result<Self> {
        let mut r = self.0.clone();
        r.push(r_next);
        Weight::new(r)
    }

    /// Homogeneous norm without the dimension check.
    #[inline]
    pub fn norm_of(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(r, xi)| xi.abs().powf(1.0 / r))
            .sum()
    }

    #[inline]
    pub(crate) fn dilate_into(&self, lambda: f64, x: &[f64], out: &mut [f64]) {
        for ((o, xi), r) in out.iter_mut().zip(x).zip(&self.0) {
            *o = lambda.powf(*r) * xi;
        }
    }
}

impl TryFrom<Vec<f64>> for Weight {
    type Error = Error;

    fn try_from(r: Vec<f64>) -> Result<Self> {
        Weight::new(r)
    }
}

impl From<Weight> for Vec<f64> {
    fn from(w: Weight) -> Self {
        w.0
    }
}

/// `Λ_r(λ, x)`.
pub fn dilate(w: &Weight, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim("dilation state", w.len(), x.len())?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("dilation factor must be > 0, got {lambda}")));
    }
    let mut out = vec![0.0; x.len()];
    w.dilate_into(lambda, x, &mut out);
    Ok(out)
}

/// `ρ(x) = Σ |x_i|^{1/r_i}`.
pub fn hom_norm(w: &Weight, x: &[f64]) -> Result<f64> {
    Error::check_dim("homogeneous norm state", w.len(), x.len())?;
    Ok(w.norm_of(x))
}

/// A declared (weight, degree) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityClaim {
    pub weight: Weight,
    pub degree: f64,
}

impl HomogeneityClaim {
    pub fn new(weight: Weight, degree: f64) -> Self {
        HomogeneityClaim { weight, degree }
    }

    /// Whether `κ + min r_i > 0`, the condition under which homogeneous
    /// feedback constructions stay continuous.
    pub fn degree_admissible(&self) -> bool {
        self.degree + self.weight.min() > 0.0
    }
}

/// Random point with `ρ(x) = 1`: a Gaussian direction pulled onto the
/// homogeneous sphere by the dilation.
pub fn sample_unit_sphere<R: Rng + ?Sized>(w: &Weight, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..w.len()).map(|_| rng.sample(StandardNormal)).collect();
        let rho = w.norm_of(&g);
        if rho > 1e-12 && rho.is_finite() {
            let mut y = vec![0.0; g.len()];
            w.dilate_into(1.0 / rho, &g, &mut y);
            return y;
        }
    }
}

/// Random point with `ρ(x) = radius`.
pub fn sample_sphere<R: Rng + ?Sized>(w: &Weight, radius: f64, rng: &mut R) -> Vec<f64> {
    let y = sample_unit_sphere(w, rng);
    let mut x = vec![0.0; y.len()];
    w.dilate_into(radius, &y, &mut x);
    x
}

/// Log-uniform draw from `[lo, hi]`.
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityReport {
    pub label: String,
    pub samples: usize,
    pub max_relative_residual: f64,
    pub worst_state: Vec<f64>,
    pub worst_lambda: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Options for [`check_homogeneity`].
#[derive(Debug, Clone, Copy)]
pub struct HomogeneitySampling {
    pub samples: usize,
    /// Range for the dilation factor applied to each sample.
    pub lambda_range: (f64, f64),
    /// Range of homogeneous radii the base states are drawn from.
    pub radius_range: (f64, f64),
    pub tol: f64,
    pub seed: u64,
}

impl Default for HomogeneitySampling {
    fn default() -> Self {
        HomogeneitySampling {
            samples: 1000,
            lambda_range: (0.1, 10.0),
            radius_range: (0.1, 10.0),
            tol: 1e-9,
            seed: 0,
        }
    }
}

/// Numerically checks `F_i(Λ_r(λ,x)) = λ^{κ+r_i} F_i(x)` on random samples.
///
/// Base states are drawn on the homogeneous sphere and dilated to a
/// log-uniform radius in `radius_range`, so a ball around the origin is
/// never sampled. Each sample passes when
/// `|F_i(Λx) − λ^{κ+r_i}F_i(x)| ≤ tol·max(1, |λ^{κ+r_i}F_i(x)|)`.
pub fn check_homogeneity(
    field: &VectorField,
    claim: &HomogeneityClaim,
    opts: &HomogeneitySampling,
) -> Result<HomogeneityReport> {
    let n = field.state_dim();
    Error::check_dim("homogeneity claim weight", n, claim.weight.len())?;
    if !field.is_autonomous() {
        return Err(Error::Config(format!(
            "homogeneity check needs an autonomous field, '{}' is time-varying",
            field.label()
        )));
    }
    if opts.samples == 0 {
        return Err(Error::Domain("homogeneity check needs at least one sample".into()));
    }
    let (lo, hi) = opts.lambda_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Domain(format!("invalid lambda range [{lo}, {hi}]")));
    }

    let w = &claim.weight;
    let mut rng = seeded_rng(opts.seed);
    let mut fx = vec![0.0; n];
    let mut flx = vec![0.0; n];
    let mut lx = vec![0.0; n];
    let mut worst = (0.0_f64, vec![0.0; n], 1.0);

    for _ in 0..opts.samples {
        let radius = log_uniform(&mut rng, opts.radius_range.0, opts.radius_range.1);
        let x = sample_sphere(w, radius, &mut rng);
        let lambda = log_uniform(&mut rng, lo, hi);
        w.dilate_into(lambda, &x, &mut lx);
        field.rhs_into(0.0, &x, &mut fx);
        field.rhs_into(0.0, &lx, &mut flx);

        for i in 0..n {
            if !fx[i].is_finite() || !flx[i].is_finite() {
                return Err(Error::NonFinite(format!(
                    "field '{}' component {} at x = {:?} (lambda = {lambda})",
                    field.label(),
                    i + 1,
                    x
                )));
            }
            let expected = lambda.powf(claim.degree + w.as_slice()[i]) * fx[i];
            let residual = (flx[i] - expected).abs() / expected.abs().max(1.0);
            if residual > worst.0 {
                worst = (residual, x.clone(), lambda);
            }
        }
    }

    Ok(HomogeneityReport {
        label: field.label().to_string(),
        samples: opts.samples,
        max_relative_residual: worst.0,
        worst_state: worst.1,
        worst_lambda: worst.2,
        tol: opts.tol,
        pass: worst.0 <= opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn signed_power_examples() {
        assert_relative_eq!(signed_power(-8.0, 1.0 / 3.0).unwrap(), -2.0, max_relative = 1e-15);
        assert_eq!(signed_power(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(signed_power(2.0, 3.0).unwrap(), 8.0);
    }

    #[test]
    fn signed_power_rejects_bad_input() {
        assert!(matches!(signed_power(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(signed_power(1.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(signed_power(f64::NAN, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn signed_power_tiny_argument_is_not_flushed() {
        let x = 1e-300;
        assert!(signed_power(x, 0.5).unwrap() > 0.0);
    }

    #[test]
    fn signed_power_derivative_examples() {
        assert_eq!(signed_power_derivative(-2.0, 2.0).unwrap(), 4.0);
        assert_eq!(signed_power_derivative(0.0, 1.5).unwrap(), 0.0);
        assert_eq!(signed_power_derivative(3.0, 1.0).unwrap(), 1.0);
        assert_eq!(signed_power_derivative(0.0, 1.0).unwrap(), 1.0);
        assert!(signed_power_derivative(1.0, 0.9).is_err());
    }

    #[test]
    fn dilate_examples() {
        let w = Weight::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(dilate(&w, 3.0, &[1.0, 1.0]).unwrap(), vec![3.0, 9.0]);
        assert_eq!(dilate(&w, 1.0, &[0.3, -7.0]).unwrap(), vec![0.3, -7.0]);

        // 4^0.75 = 2^1.5 = 2.8284271247461903
        let w = Weight::new(vec![1.0, 0.75]).unwrap();
        let y = dilate(&w, 4.0, &[1.0, -1.0]).unwrap();
        assert_relative_eq!(y[0], 4.0, max_relative = 1e-15);
        assert_relative_eq!(y[1], -2.828_427_124_746_190_3, max_relative = 1e-15);
    }

    #[test]
    fn dilate_errors() {
        let w = Weight::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(dilate(&w, 2.0, &[1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(dilate(&w, 0.0, &[1.0, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(dilate(&w, -1.0, &[1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn hom_norm_examples() {
        let w = Weight::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(hom_norm(&w, &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(hom_norm(&w, &[0.0, 0.0]).unwrap(), 0.0);
        // 0.5 + 0.2^(4/3) = 0.5 + 0.11696070952851464
        let w = Weight::new(vec![1.0, 0.75]).unwrap();
        assert_relative_eq!(
            hom_norm(&w, &[0.5, -0.2]).unwrap(),
            0.616_960_709_528_514_6,
            max_relative = 1e-14
        );
        assert!(hom_norm(&w, &[1.0]).is_err());
    }

    #[test]
    fn weight_rejects_nonpositive_entries() {
        assert!(Weight::new(vec![1.0, 0.0]).is_err());
        assert!(Weight::new(vec![-1.0]).is_err());
        assert!(Weight::new(vec![]).is_err());
        assert!(serde_json::from_str::<Weight>("[1.0, -0.5]").is_err());
    }

    #[test]
    fn sphere_samples_have_requested_radius() {
        let w = Weight::new(vec![1.0, 0.4, 2.5]).unwrap();
        let mut rng = seeded_rng(7);
        for _ in 0..200 {
            let x = sample_sphere(&w, 0.37, &mut rng);
            assert_relative_eq!(w.norm_of(&x), 0.37, max_relative = 1e-12);
        }
    }

    #[test]
    fn linear_field_is_degree_zero() {
        let f = VectorField::autonomous("x' = -x", 1, |_, x, out| out[0] = -x[0]);
        let claim = HomogeneityClaim::new(Weight::uniform(1), 0.0);
        let rep = check_homogeneity(&f, &claim, &HomogeneitySampling::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn affine_field_is_not_homogeneous() {
        let f = VectorField::autonomous("x' = -x + 1", 1, |_, x, out| out[0] = -x[0] + 1.0);
        let claim = HomogeneityClaim::new(Weight::uniform(1), 0.0);
        let rep = check_homogeneity(&f, &claim, &HomogeneitySampling::default()).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn non_finite_field_aborts_with_location() {
        let f = VectorField::autonomous("bad", 1, |_, _, out| out[0] = f64::NAN);
        let claim = HomogeneityClaim::new(Weight::uniform(1), 0.0);
        let err = check_homogeneity(&f, &claim, &HomogeneitySampling::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite(ref m) if m.contains("x =")));
    }

    proptest! {
        #[test]
        fn signed_power_is_odd(x in -1e6f64..1e6, a in 0.01f64..5.0) {
            prop_assert_eq!(spow(-x, a), -spow(x, a));
        }

        #[test]
        fn signed_power_composes(x in -1e3f64..1e3, a in 0.1f64..3.0, b in 0.1f64..3.0) {
            let lhs = spow(spow(x, a), b);
            let rhs = spow(x, a * b);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn dilation_group_law_and_norm_scaling() {
        let mut rng = seeded_rng(11);
        for _ in 0..1000 {
            let n = rng.random_range(1..6);
            let w = Weight::new((0..n).map(|_| rng.random_range(0.1..3.0)).collect()).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let l = log_uniform(&mut rng, 0.05, 20.0);
            let m = log_uniform(&mut rng, 0.05, 20.0);

            let composed = dilate(&w, l, &dilate(&w, m, &x).unwrap()).unwrap();
            let direct = dilate(&w, l * m, &x).unwrap();
            for (a, b) in composed.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} vs {b}");
            }
            assert_eq!(dilate(&w, 1.0, &x).unwrap(), x);

            let rho = hom_norm(&w, &x).unwrap();
            let rho_l = hom_norm(&w, &direct).unwrap();
            assert!((rho_l - l * m * rho).abs() <= 1e-11 * rho_l.max(1e-300));
        }
    }
}
