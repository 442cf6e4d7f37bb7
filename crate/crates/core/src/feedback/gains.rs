//! Closed-form lower bounds on the outer gain of the desingularized laws.

use super::{check_kappa_half, positive};
use crate::error::{Error, Result};

/// Threshold for the outer gain of the double-integrator backstepping law:
///
/// `g = 2l(1+κ)² / ((l+1)(1+κ)+κ) · 2^{(l-1)((l+1)(1+κ)+κ)/(l(1+κ))} · k1^{1/(1+κ)}`.
pub fn gain_g(l: f64, kappa: f64, k1: f64) -> Result<f64> {
    check_kappa_half(kappa, "kappa")?;
    positive("k1", k1)?;
    let l_min = 1.0 / (1.0 + kappa);
    if !(l >= l_min) {
        return Err(Error::inadmissible("l >= 1/(1+kappa)", l, l_min));
    }
    Ok(threshold(l, kappa, 1.0 + kappa, k1))
}

/// Threshold for the modified double integrator `x1' = |x1|^ν x2`; same
/// shape as [`gain_g`] with `1+κ` replaced by `1+κ-ν`.
pub fn gain_h(l: f64, kappa: f64, nu: f64, k1: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::inadmissible("0 <= nu < 1", nu, 0.0));
    }
    let lower = -(1.0 - nu) / 2.0;
    if !(kappa > lower) {
        return Err(Error::inadmissible("kappa > -(1-nu)/2", kappa, lower));
    }
    if !(kappa < 0.0) {
        return Err(Error::inadmissible("kappa < 0", kappa, 0.0));
    }
    positive("k1", k1)?;
    let l_min = 1.0 / (1.0 + kappa - nu);
    if !(l > l_min) {
        return Err(Error::inadmissible("l > 1/(1+kappa-nu)", l, l_min));
    }
    Ok(threshold(l, kappa, 1.0 + kappa - nu, k1))
}

// `r2` is the weight of the second coordinate: 1+κ or 1+κ-ν.
fn threshold(l: f64, kappa: f64, r2: f64, k1: f64) -> f64 {
    let d = (l + 1.0) * r2 + kappa;
    2.0 * l * r2 * r2 / d * 2f64.powf((l - 1.0) * d / (l * r2)) * k1.powf(1.0 / r2)
}

/// Threshold on `k2` for the nested double-integrator law:
/// `(1-κ²)/(2+κ) · 2^{(1-4κ-3κ²)/(1-κ²)} · k1^{1/(1+κ)}`.
pub fn nested_gain_threshold(kappa: f64, k1: f64) -> Result<f64> {
    check_kappa_half(kappa, "kappa")?;
    positive("k1", k1)?;
    let one_minus_sq = 1.0 - kappa * kappa;
    Ok(one_minus_sq / (2.0 + kappa)
        * 2f64.powf((1.0 - 4.0 * kappa - 3.0 * kappa * kappa) / one_minus_sq)
        * k1.powf(1.0 / (1.0 + kappa)))
}

/// Lower bound on the slider gain `k4`: `g(1/(1+κ2), κ2, k3) = 2^{-2κ2} k3^{1/(1+κ2)}`.
pub fn slider_k4_threshold(kappa2: f64, k3: f64) -> Result<f64> {
    check_kappa_half(kappa2, "kappa2")?;
    positive("k3", k3)?;
    Ok(2f64.powf(-2.0 * kappa2) * k3.powf(1.0 / (1.0 + kappa2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hompow::seeded_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn g_reference_values() {
        // 1.125 * 2^(4/3)
        assert_relative_eq!(
            gain_g(2.0, -0.25, 1.0).unwrap(),
            2.834_822_362_263_465,
            max_relative = 1e-14
        );
        let ratio = gain_g(2.0, -0.25, 2.0).unwrap() / gain_g(2.0, -0.25, 1.0).unwrap();
        assert_relative_eq!(ratio, 2f64.powf(4.0 / 3.0), max_relative = 1e-14);
    }

    #[test]
    fn g_at_minimal_l_is_the_k4_threshold() {
        let kappa = -0.05;
        let g = gain_g(1.0 / (1.0 + kappa), kappa, 1.7).unwrap();
        let expected = 2f64.powf(-2.0 * kappa) * 1.7f64.powf(1.0 / (1.0 + kappa));
        assert_relative_eq!(g, expected, max_relative = 1e-13);
        assert_relative_eq!(slider_k4_threshold(kappa, 1.7).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn h_reference_values() {
        // 0.64 * 2^2.5
        assert_relative_eq!(
            gain_h(3.0, -0.1, 0.5, 1.0).unwrap(),
            3.620_386_719_675_123,
            max_relative = 1e-14
        );
        let h1 = gain_h(3.0, -0.1, 0.5, 1.0).unwrap();
        assert_relative_eq!(
            gain_h(3.0, -0.1, 0.5, 1.9).unwrap(),
            1.9f64.powf(2.5) * h1,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            gain_h(2.0, -0.25, 0.0, 1.0).unwrap(),
            gain_g(2.0, -0.25, 1.0).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn nested_threshold_value() {
        // 0.9375/1.75 * 2^(1.8125/0.9375)
        assert_relative_eq!(
            nested_gain_threshold(-0.25, 1.0).unwrap(),
            2.046_089_151_236_607,
            max_relative = 1e-13
        );
    }

    #[test]
    fn k4_threshold_value() {
        assert_relative_eq!(
            slider_k4_threshold(-0.05, 1.0).unwrap(),
            1.071_773_462_536_293,
            max_relative = 1e-14
        );
    }

    #[test]
    fn preconditions_name_the_bound() {
        let err = gain_g(1.0, -0.25, 1.0).unwrap_err();
        assert!(matches!(err, Error::Inadmissible { ref constraint, .. } if constraint.contains("l >= 1/(1+kappa)")));
        assert!(gain_g(2.0, -0.6, 1.0).is_err());
        assert!(gain_g(2.0, 0.1, 1.0).is_err());
        assert!(gain_g(2.0, -0.25, 0.0).is_err());
        assert!(gain_h(3.0, -0.3, 0.5, 1.0).is_err());
        assert!(gain_h(2.5, -0.1, 0.5, 1.0).is_err());
        assert!(gain_h(3.0, -0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn identities_on_random_tuples() {
        let mut rng = seeded_rng(3);
        for _ in 0..100 {
            let kappa = rng.random_range(-0.499..-0.001);
            let k = rng.random_range(0.01..50.0);
            let g = gain_g(1.0 / (1.0 + kappa), kappa, k).unwrap();
            let closed = 2f64.powf(-2.0 * kappa) * k.powf(1.0 / (1.0 + kappa));
            assert!((g - closed).abs() <= 1e-12 * closed);

            let l = 1.0 / (1.0 + kappa) + rng.random_range(1e-3..8.0);
            let h = gain_h(l, kappa, 0.0, k).unwrap();
            let g = gain_g(l, kappa, k).unwrap();
            assert!((h - g).abs() <= 1e-12 * g);
        }
    }
}
