//! Two scalar inequalities behind the gain conditions, as predicates and as
//! samplers for property campaigns.
//!
//! * `|x − y|² ≤ 2^{2(l−1)/l} |⌊x⌉^l − ⌊y⌉^l|^{2/l}` for `l > 1`.
//! * `ψ(z) = −a0 − a1 z^β + a2 z^γ` is negative on `[0, ∞)` exactly when
//!   `a0 a1^{γ/(β−γ)} > a2^{β/(β−γ)} ((γ/β)^{γ/(β−γ)} − (γ/β)^{β/(β−γ)})`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hompow::{log_uniform, spow};

/// Relative band inside which a strict inequality is reported as a tie.
pub const TIE_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `lhs = |x − y|²`, `rhs = 2^{2(l−1)/l} |⌊x⌉^l − ⌊y⌉^l|^{2/l}`; `holds`
/// allows a rounding slack of `1e-12 · max(1, rhs)`.
pub fn signed_power_gap_bound(x: f64, y: f64, l: f64) -> Result<GapBoundCheck> {
    if !(l > 1.0) {
        return Err(Error::Domain(format!("power must satisfy l > 1, got {l}")));
    }
    let lhs = (x - y).powi(2);
    let rhs = 2f64.powf(2.0 * (l - 1.0) / l) * (spow(x, l) - spow(y, l)).abs().powf(2.0 / l);
    Ok(GapBoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + TIE_BAND * rhs.max(1.0),
    })
}

/// Coefficients of `ψ(z) = −a0 − a1 z^β + a2 z^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl PsiParams {
    pub fn new(a0: f64, a1: f64, a2: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = PsiParams { a0, a1, a2, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a0", self.a0), ("a1", self.a1), ("a2", self.a2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma > 1.0 && self.beta > self.gamma && self.beta.is_finite()) {
            return Err(Error::Domain(format!(
                "exponents must satisfy beta > gamma > 1, got beta = {}, gamma = {}",
                self.beta, self.gamma
            )));
        }
        Ok(())
    }

    /// Draws `a_i` log-uniformly in `[1e-3, 1e3]` and `(β, γ)` uniformly
    /// in `(1, 5]²`, rejecting pairs with `β ≤ γ`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let a0 = log_uniform(rng, 1e-3, 1e3);
        let a1 = log_uniform(rng, 1e-3, 1e3);
        let a2 = log_uniform(rng, 1e-3, 1e3);
        loop {
            let beta = rng.random_range(1.0..=5.0);
            let gamma = rng.random_range(1.0..=5.0);
            if beta > gamma && gamma > 1.0 {
                return PsiParams { a0, a1, a2, beta, gamma };
            }
        }
    }
}

/// `ψ(z)`. Only meaningful for `z ≥ 0`; negative `z` gives NaN.
pub fn psi_eval(p: &PsiParams, z: f64) -> f64 {
    -p.a0 - p.a1 * z.powf(p.beta) + p.a2 * z.powf(p.gamma)
}

/// Maximizer `z0 = (a2 γ / (a1 β))^{1/(β−γ)}` of `ψ` on `[0, ∞)` and the
/// value there.
pub fn psi_max(p: &PsiParams) -> (f64, f64) {
    let q = p.gamma / p.beta;
    let z0 = (p.a2 * q / p.a1).powf(1.0 / (p.beta - p.gamma));
    // At z0, a1 z0^β = q a2 z0^γ, so both power terms share one factor.
    (z0, -p.a0 + p.a2 * z0.powf(p.gamma) * (1.0 - q))
}

/// Outcome of a strict inequality evaluated in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    /// Both sides agree to within the tie band.
    Tie,
}

impl Verdict {
    /// Sides given as logarithms; a relative gap of `TIE_BAND` is a log
    /// gap of about the same size.
    fn compare_log(lhs: f64, rhs: f64) -> Self {
        if (lhs - rhs).abs() <= TIE_BAND {
            Verdict::Tie
        } else if lhs > rhs {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }
}

/// Logarithms of both sides. With `q = γ/β`, the bracket on the right is
/// `q^{γ/(β−γ)} (1 − q)`; the exponents blow up as `β → γ`, so the sides
/// are only compared in log form.
fn negativity_log_sides(p: &PsiParams) -> (f64, f64) {
    let d = p.beta - p.gamma;
    let q = p.gamma / p.beta;
    let lhs = p.a0.ln() + p.gamma / d * p.a1.ln();
    let rhs = p.beta / d * p.a2.ln() + p.gamma / d * q.ln() + (-q).ln_1p();
    (lhs, rhs)
}

/// Necessary and sufficient condition for `ψ < 0` on `[0, ∞)`.
pub fn negativity_condition(p: &PsiParams) -> bool {
    let (lhs, rhs) = negativity_log_sides(p);
    lhs > rhs
}

/// As [`negativity_condition`], with near-equalities reported as ties.
pub fn negativity_verdict(p: &PsiParams) -> Verdict {
    let (lhs, rhs) = negativity_log_sides(p);
    Verdict::compare_log(lhs, rhs)
}

/// Sufficient condition `a1 > (γ/β) a2^{β/γ} / a0^{(β−γ)/γ}`.
pub fn simple_condition(p: &PsiParams) -> bool {
    p.a1 > simple_threshold(p)
}

/// Right-hand side of [`simple_condition`].
pub fn simple_threshold(p: &PsiParams) -> f64 {
    p.gamma / p.beta * p.a2.powf(p.beta / p.gamma) / p.a0.powf((p.beta - p.gamma) / p.gamma)
}

/// Brute-force maximum of `ψ` over `points` log-spaced samples of
/// `[lo, hi]`, refined by ternary search between the neighbours of the best
/// sample. Relies only on `ψ` being unimodal on `(0, ∞)`.
pub fn psi_grid_max(p: &PsiParams, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (points - 1) as f64;
    let z_at = |j: usize| (llo + step * j as f64).exp();
    let best = (0..points)
        .map(|j| (j, psi_eval(p, z_at(j))))
        .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let mut a = z_at(best.0.saturating_sub(1));
    let mut b = z_at((best.0 + 1).min(points - 1));
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if psi_eval(p, m1) < psi_eval(p, m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let z = 0.5 * (a + b);
    (z, psi_eval(p, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hompow::seeded_rng;
    use approx::assert_relative_eq;

    fn p0() -> PsiParams {
        PsiParams::new(1.0, 1.0, 1.0, 3.0, 2.0).unwrap()
    }

    #[test]
    fn gap_bound_examples() {
        assert_eq!(
            signed_power_gap_bound(0.7, 0.7, 2.5).unwrap(),
            GapBoundCheck { lhs: 0.0, rhs: 0.0, holds: true }
        );
        let c = signed_power_gap_bound(1.0, -1.0, 2.0).unwrap();
        assert_relative_eq!(c.lhs, 4.0);
        assert_relative_eq!(c.rhs, 4.0, max_relative = 1e-15);
        assert!(c.holds);
        let c = signed_power_gap_bound(2.0, 0.0, 3.0).unwrap();
        assert_eq!(c.lhs, 4.0);
        assert_relative_eq!(c.rhs, 10.079_368_399_158_986, max_relative = 1e-14);
        assert!(c.holds);
        assert!(matches!(signed_power_gap_bound(1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(signed_power_gap_bound(1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn gap_bound_is_tight_on_antipodes() {
        for l in [1.01, 1.5, 2.0, 3.7, 10.0] {
            for s in [1e-3, 1.0, 7.0] {
                let c = signed_power_gap_bound(s, -s, l).unwrap();
                assert_relative_eq!(c.rhs / c.lhs, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn psi_examples() {
        let p = p0();
        assert_eq!(psi_eval(&p, 0.0), -1.0);
        assert_eq!(psi_eval(&p, 1.0), -1.0);
        assert_eq!(psi_eval(&p, 10.0), -901.0);
        let (z0, v) = psi_max(&p);
        assert_relative_eq!(z0, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(v, -23.0 / 27.0, max_relative = 1e-14);
        let doubled = PsiParams { a0: 2.0, ..p };
        assert_relative_eq!(psi_max(&doubled).1, v - 1.0, max_relative = 1e-14);
        assert!(negativity_condition(&p));
        assert_eq!(negativity_verdict(&p), Verdict::Holds);
        let (lhs, rhs) = negativity_log_sides(&p);
        assert_eq!(lhs.exp(), 1.0);
        assert_relative_eq!(rhs.exp(), 4.0 / 27.0, max_relative = 1e-14);
        assert_relative_eq!(simple_threshold(&p), 2.0 / 3.0, max_relative = 1e-15);
        assert!(simple_condition(&p));
    }

    #[test]
    fn invalid_params() {
        assert!(PsiParams::new(0.0, 1.0, 1.0, 3.0, 2.0).is_err());
        assert!(PsiParams::new(1.0, 1.0, 1.0, 2.0, 2.0).is_err());
        assert!(PsiParams::new(1.0, 1.0, 1.0, 3.0, 1.0).is_err());
        assert!(PsiParams::new(1.0, -1.0, 1.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn small_a0_breaks_negativity() {
        let p = PsiParams { a0: 1e-6, ..p0() };
        assert!(!negativity_condition(&p));
        assert!(psi_max(&p).1 > 0.0);
    }

    #[test]
    fn simple_condition_is_strictly_weaker() {
        // a1 just under the simple threshold, where ψ stays negative.
        let mut p = p0();
        p.a1 = 0.99 * simple_threshold(&p);
        assert!(!simple_condition(&p));
        assert!(negativity_condition(&p));
        assert!(psi_max(&p).1 < 0.0);
    }

    #[test]
    fn negativity_matches_maximum_sign() {
        let mut rng = seeded_rng(11);
        let mut compared = 0;
        for _ in 0..10_000 {
            let p = PsiParams::sample(&mut rng);
            let v = psi_max(&p).1;
            if v.abs() < TIE_BAND || !v.is_finite() {
                continue;
            }
            compared += 1;
            assert_eq!(negativity_condition(&p), v < 0.0, "{p:?}");
        }
        assert!(compared > 9_000);
    }

    #[test]
    fn grid_oracle_agrees_with_closed_form() {
        let mut rng = seeded_rng(5);
        let mut checked = 0;
        while checked < 200 {
            let p = PsiParams::sample(&mut rng);
            let (z0, v) = psi_max(&p);
            if !(1e-5..=1e5).contains(&z0) {
                continue;
            }
            let (_, g) = psi_grid_max(&p, 1e-6, 1e6, 10_000);
            let scale = v.abs().max(p.a0).max(p.a1 * z0.powf(p.beta));
            assert!((g - v).abs() <= 1e-6 * scale, "{p:?}: grid {g} vs {v}");
            checked += 1;
        }
    }

    #[test]
    fn backstep_gain_threshold_makes_psi_negative() {
        use crate::feedback::gain_g;
        use crate::lyapunov::cascade_scale;
        let mut rng = seeded_rng(3);
        for _ in 0..1000 {
            let kappa = rng.random_range(-0.45..-0.01);
            let l = 1.0 / (1.0 + kappa) + rng.random_range(0.05..4.0);
            let k1 = log_uniform(&mut rng, 0.1, 10.0);
            let g = gain_g(l, kappa, k1).unwrap();
            let k2 = g * (1.0 + rng.random_range(1e-6..1.0));
            let a = cascade_scale(l, 1.0 + kappa, k1);
            let alpha = (l + 1.0) * (1.0 + kappa);
            let p = PsiParams::new(
                k1,
                a * k2,
                2f64.powf(2.0 * (l - 1.0) / l) / k1,
                alpha + kappa,
                2.0 * (1.0 + kappa),
            )
            .unwrap();
            assert!(psi_max(&p).1 < 0.0, "kappa {kappa}, l {l}, k1 {k1}, k2 {k2}");
            assert!(negativity_condition(&p));
        }
    }
}
