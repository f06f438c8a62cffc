//! Effective rank and effective dimension of a scaled spectrum.
//!
//! For eigenvalues `λ_1 ≥ λ_2 ≥ …` of a feature Gram matrix, a multiplier `a`
//! (the radius `R²` is folded into `a`), a sample count `n` and a resolution
//! `ε`, the effective rank counts the eigenvalues with `a·λ_k ≥ n·ε²/2` and the
//! effective dimension is
//!
//! ```text
//! d_eff = ½ Σ_{k ≤ r_eff} ln(8·a·λ_k / (n·ε²))
//! ```
//!
//! Every counted term is at least `ln 4`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Spectrum;

#[derive(Clone, Copy, Debug)]
pub struct ScaledSpectrum<'a> {
    pub base: &'a Spectrum,
    pub scale_a: f64,
    pub n: usize,
    pub eps: f64,
}

impl<'a> ScaledSpectrum<'a> {
    pub fn new(base: &'a Spectrum, scale_a: f64, n: usize, eps: f64) -> Self {
        ScaledSpectrum {
            base,
            scale_a,
            n,
            eps,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidResolution(self.eps));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample count n must be positive".into()));
        }
        if !(self.scale_a >= 0.0) || !self.scale_a.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale must be finite and nonnegative, got {}",
                self.scale_a
            )));
        }
        Ok(())
    }

    /// `n·ε²/2`.
    pub fn threshold(&self) -> f64 {
        self.n as f64 * self.eps * self.eps / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffDimResult {
    pub r_eff: usize,
    pub d_eff: f64,
    /// `ln(8·a·λ_k/(n·ε²))` for each counted eigenvalue.
    pub per_term: Vec<f64>,
}

pub fn effective_rank(s: &ScaledSpectrum<'_>) -> Result<usize> {
    s.validate()?;
    let thr = s.threshold();
    // Values are sorted, so the counted set is a prefix.
    Ok(s
        .base
        .values()
        .iter()
        .take_while(|&&l| l > 0.0 && s.scale_a * l >= thr)
        .count())
}

pub fn effective_dimension(s: &ScaledSpectrum<'_>) -> Result<EffDimResult> {
    let r_eff = effective_rank(s)?;
    let denom = s.n as f64 * s.eps * s.eps;
    let per_term: Vec<f64> = s.base.values()[..r_eff]
        .iter()
        .map(|&l| (8.0 * s.scale_a * l / denom).ln())
        .collect();
    let d_eff = 0.5 * compensated_sum(per_term.iter().copied());
    Ok(EffDimResult {
        r_eff,
        d_eff,
        per_term,
    })
}

/// Neumaier summation; long log-sums otherwise drift by several ulps.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Closed form for an exactly exponential spectrum `λ_k = λ₀·e^{−γ(k−1)}`:
/// `(r/2)·ln(8aλ₀R²/(nε²)) − (γ/4)·r(r−1)` with `r` from the closed-form rank.
pub fn exp_decay_deff_closed_form(
    lambda0: f64,
    gamma: f64,
    a: f64,
    radius: f64,
    n: usize,
    eps: f64,
) -> f64 {
    let r = exp_decay_rank(lambda0, gamma, a, radius, n, eps) as f64;
    let base = 8.0 * a * lambda0 * radius * radius / (n as f64 * eps * eps);
    0.5 * r * base.ln() - 0.25 * gamma * r * (r - 1.0)
}

/// `max{k : a·λ₀·e^{−γ(k−1)}·R² ≥ nε²/2}` solved in closed form.
pub fn exp_decay_rank(lambda0: f64, gamma: f64, a: f64, radius: f64, n: usize, eps: f64) -> usize {
    let ratio = 2.0 * a * lambda0 * radius * radius / (n as f64 * eps * eps);
    if !(ratio >= 1.0) {
        return 0;
    }
    1 + (ratio.ln() / gamma).floor() as usize
}

/// Upper bound for any spectrum of rank at most `q` with `λ₁ ≤ λ₀`:
/// `(q/2)·ln(e + 8aR²λ₀/(nε²))`.
pub fn low_rank_deff_upper(q: usize, lambda0: f64, a: f64, radius: f64, n: usize, eps: f64) -> f64 {
    let x = 8.0 * a * radius * radius * lambda0 / (n as f64 * eps * eps);
    0.5 * q as f64 * (std::f64::consts::E + x).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::exact(v.to_vec()).unwrap()
    }

    #[test]
    fn rank_examples() {
        let s = spec(&[4.0, 1.0, 0.25]);
        assert_eq!(effective_rank(&ScaledSpectrum::new(&s, 1.0, 2, 1.0)).unwrap(), 2);
        let z = spec(&[0.0, 0.0]);
        assert_eq!(effective_rank(&ScaledSpectrum::new(&z, 1.0, 2, 1.0)).unwrap(), 0);
        assert_eq!(effective_rank(&ScaledSpectrum::new(&s, 1.0, 2, 1e9)).unwrap(), 0);
    }

    #[test]
    fn rank_rejects_bad_eps() {
        let s = spec(&[1.0]);
        for eps in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                effective_rank(&ScaledSpectrum::new(&s, 1.0, 1, eps)),
                Err(Error::InvalidResolution(_))
            ));
        }
    }

    #[test]
    fn dimension_hand_value() {
        let s = spec(&[4.0, 1.0]);
        let r = effective_dimension(&ScaledSpectrum::new(&s, 1.0, 2, 1.0)).unwrap();
        assert_eq!(r.r_eff, 2);
        let expected = 0.5 * (16f64.ln() + 4f64.ln());
        assert!((r.d_eff - expected).abs() < 1e-15);
        assert!((r.d_eff - 2.0794415416798357).abs() < 1e-12);
    }

    #[test]
    fn zero_rank_zero_dimension() {
        let s = spec(&[1.0]);
        let r = effective_dimension(&ScaledSpectrum::new(&s, 1.0, 1, 100.0)).unwrap();
        assert_eq!((r.r_eff, r.d_eff), (0, 0.0));
    }

    #[test]
    fn closed_form_boundary_and_empty() {
        // 8aλ₀R²/(nε²) = 4 → exactly one counted eigenvalue.
        let v = exp_decay_deff_closed_form(0.5, 1.0, 1.0, 1.0, 1, 1.0);
        assert!((v - 0.5 * 4f64.ln()).abs() < 1e-15);
        assert_eq!(exp_decay_rank(0.5, 1.0, 1.0, 1.0, 1, 1.0), 1);
        assert_eq!(exp_decay_deff_closed_form(0.1, 1.0, 1.0, 1.0, 1, 1.0), 0.0);
    }

    #[test]
    fn low_rank_examples() {
        assert_eq!(low_rank_deff_upper(0, 2.0, 1.0, 1.0, 1, 1.0), 0.0);
        let e = std::f64::consts::E;
        // 8aR²λ₀/(nε²) = e(e−1) with a = R = n = ε = 1.
        let lambda0 = e * (e - 1.0) / 8.0;
        assert!((low_rank_deff_upper(1, lambda0, 1.0, 1.0, 1, 1.0) - 1.0).abs() < 1e-15);
        let s = spec(&[2.0, 1.0, 0.5, 0.0, 0.0]);
        let d = effective_dimension(&ScaledSpectrum::new(&s, 1.0, 1, 1.0)).unwrap();
        assert!(d.d_eff <= low_rank_deff_upper(3, 2.0, 1.0, 1.0, 1, 1.0));
    }

    fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..100.0, 1..20)
    }

    proptest! {
        #[test]
        fn nonincreasing_in_eps(v in spectrum_strategy(), e1 in 0.01f64..10.0, e2 in 0.01f64..10.0) {
            let s = Spectrum::exact(v).unwrap();
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = effective_dimension(&ScaledSpectrum::new(&s, 1.0, 3, lo)).unwrap();
            let b = effective_dimension(&ScaledSpectrum::new(&s, 1.0, 3, hi)).unwrap();
            prop_assert!(a.r_eff >= b.r_eff);
            prop_assert!(a.d_eff >= b.d_eff - 1e-12);
        }

        #[test]
        fn nondecreasing_in_scale(v in spectrum_strategy(), a1 in 0.0f64..10.0, a2 in 0.0f64..10.0) {
            let s = Spectrum::exact(v).unwrap();
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let x = effective_dimension(&ScaledSpectrum::new(&s, lo, 4, 1.0)).unwrap();
            let y = effective_dimension(&ScaledSpectrum::new(&s, hi, 4, 1.0)).unwrap();
            prop_assert!(x.r_eff <= y.r_eff);
            prop_assert!(x.d_eff <= y.d_eff + 1e-12);
        }

        #[test]
        fn terms_at_least_ln4(v in spectrum_strategy(), a in 0.01f64..10.0, eps in 0.05f64..5.0) {
            let s = Spectrum::exact(v).unwrap();
            let r = effective_dimension(&ScaledSpectrum::new(&s, a, 2, eps)).unwrap();
            prop_assert_eq!(r.per_term.len(), r.r_eff);
            for t in &r.per_term {
                prop_assert!(*t >= 4f64.ln() - 1e-12);
            }
            prop_assert!((r.d_eff - 0.5 * r.per_term.iter().sum::<f64>()).abs() < 1e-12);
        }

        #[test]
        fn log_scale_sensitivity(
            v in prop::collection::vec(0.01f64..100.0, 1..8),
            pad in 0usize..5,
            a in 1.0f64..1e6,
            eps in 0.05f64..5.0,
        ) {
            let q = v.len();
            let mut vals = v;
            vals.extend(std::iter::repeat(0.0).take(pad));
            let s = Spectrum::exact(vals).unwrap();
            let base = effective_dimension(&ScaledSpectrum::new(&s, 1.0, 2, eps)).unwrap();
            let scaled = effective_dimension(&ScaledSpectrum::new(&s, a, 2, eps)).unwrap();
            // Terms counted at both scales grow by ln a; a newly counted term is
            // below ln(4a) because it sat under the threshold before scaling.
            prop_assert!(scaled.d_eff - base.d_eff <= 0.5 * q as f64 * (4.0 * a).ln() + 1e-9);
        }
    }
}
