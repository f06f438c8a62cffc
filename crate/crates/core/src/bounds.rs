//! Observed-sample Riemannian Dimension and the bounds built on it.
//!
//! For layer `l` with feature Gram spectrum `λ_k(Γ_{l−1})` the multiplier is
//! `a_l = L·M̄_l²·R_W²`, where `M̄_l = ∏_{i>l} ‖W_i‖_op` and `R_W = ‖W‖_F`
//! (floored at `1e-300`). The layer contributes
//!
//! ```text
//! (d_l + d_{l−1})·d_eff(a_l·Γ_{l−1}, ε) + ½·ln(d_{l−1}·n)
//! ```
//!
//! and `d_eff` splits into an inner part `½Σ ln(8λ_k/(nε²))`, driven by the
//! observed features, and an outer part `½·r_eff·ln(a_l)`, driven by the
//! layers above. All absolute constants are 1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Spectrum;
use crate::network::{frobenius_norm_all, FcnModel, LipschitzSurrogates};
use crate::spectra::{compensated_sum, effective_dimension, ScaledSpectrum};

pub use crate::network::param_count;

/// Lower bound applied to `‖W‖_F` before it enters a logarithm.
pub const RADIUS_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsChoice {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdConfig {
    /// Lipschitz constant of the loss.
    pub beta: f64,
    pub eps: EpsChoice,
    pub eps_search_steps: usize,
    pub alpha_grid: usize,
    pub include_log_terms: bool,
    /// Confidence level for the separately reported concentration term.
    pub delta: f64,
    /// Resolution rescaling inside the integral bound.
    pub c_sub: f64,
}

impl Default for RdConfig {
    fn default() -> Self {
        RdConfig {
            beta: 1.0,
            eps: EpsChoice::Auto,
            eps_search_steps: 500,
            alpha_grid: 64,
            include_log_terms: true,
            delta: 0.01,
            c_sub: 1.0,
        }
    }
}

impl RdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        if let EpsChoice::Fixed(e) = self.eps {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::InvalidResolution(e));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        if !(self.c_sub > 0.0) {
            return Err(Error::InvalidArgument("c_sub must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerTerm {
    /// 1-based layer index.
    pub layer: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub scale_a: f64,
    pub lambda_max: f64,
    pub r_eff: usize,
    pub d_eff: f64,
    /// `(d_l + d_{l−1})·d_eff`.
    pub d_eff_combined: f64,
    pub inner_term: f64,
    pub outer_term: f64,
    pub log_term: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdBreakdown {
    pub eps: f64,
    pub d_r_total: f64,
    pub d_r_total_no_log_terms: f64,
    pub per_layer: Vec<LayerTerm>,
}

struct LayerSetup {
    d_in: usize,
    d_out: usize,
    scale_a: f64,
}

/// `d_R(ε)` for fixed spectra and weights.
pub struct RdEvaluator<'a> {
    spectra: &'a [Spectrum],
    layers: Vec<LayerSetup>,
    n: usize,
    include_log_terms: bool,
}

impl<'a> RdEvaluator<'a> {
    /// `spectra[l − 1]` must be the spectrum of `Γ_{l−1}` (layer-`l` input).
    pub fn new(
        spectra: &'a [Spectrum],
        model: &FcnModel,
        lip: &LipschitzSurrogates,
        n: usize,
        include_log_terms: bool,
    ) -> Result<Self> {
        let depth = model.depth();
        if spectra.len() != depth || lip.m_bar.len() != depth {
            return Err(Error::MismatchedLayers {
                spectra: spectra.len(),
                layers: depth,
            });
        }
        if n == 0 {
            return Err(Error::InvalidArgument("sample count n must be positive".into()));
        }
        let radius = frobenius_norm_all(model).max(RADIUS_FLOOR);
        let widths = model.widths();
        let layers = (0..depth)
            .map(|l| LayerSetup {
                d_in: widths[l],
                d_out: widths[l + 1],
                scale_a: depth as f64 * lip.m_bar[l].powi(2) * radius * radius,
            })
            .collect();
        Ok(RdEvaluator {
            spectra,
            layers,
            n,
            include_log_terms,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn breakdown(&self, eps: f64) -> Result<RdBreakdown> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidResolution(eps));
        }
        let n = self.n as f64;
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for (l, (setup, spec)) in self.layers.iter().zip(self.spectra).enumerate() {
            let eff = effective_dimension(&ScaledSpectrum::new(spec, setup.scale_a, self.n, eps))?;
            let width_sum = (setup.d_in + setup.d_out) as f64;
            let inner = compensated_sum(
                spec.values()[..eff.r_eff]
                    .iter()
                    .map(|&lam| (8.0 * lam / (n * eps * eps)).ln()),
            );
            let outer = if eff.r_eff == 0 {
                0.0
            } else {
                eff.r_eff as f64 * setup.scale_a.ln()
            };
            let log_term = 0.5 * (setup.d_in as f64 * n).ln();
            let d_eff_combined = width_sum * eff.d_eff;
            let contribution = d_eff_combined + if self.include_log_terms { log_term } else { 0.0 };
            per_layer.push(LayerTerm {
                layer: l + 1,
                d_in: setup.d_in,
                d_out: setup.d_out,
                scale_a: setup.scale_a,
                lambda_max: spec.max(),
                r_eff: eff.r_eff,
                d_eff: eff.d_eff,
                d_eff_combined,
                inner_term: width_sum * 0.5 * inner,
                outer_term: width_sum * 0.5 * outer,
                log_term,
                contribution,
            });
        }
        let no_logs: f64 = per_layer.iter().map(|t| t.d_eff_combined).sum();
        let logs: f64 = per_layer.iter().map(|t| t.log_term).sum();
        let d_r_total = if self.include_log_terms { no_logs + logs } else { no_logs };
        if !d_r_total.is_finite() {
            return Err(Error::NonFinite("Riemannian Dimension"));
        }
        Ok(RdBreakdown {
            eps,
            d_r_total,
            d_r_total_no_log_terms: no_logs,
            per_layer,
        })
    }

    pub fn d_r(&self, eps: f64) -> Result<f64> {
        Ok(self.breakdown(eps)?.d_r_total)
    }

    /// `[√(1/n), max_l √(2·a_l·λ_max(Γ_{l−1})/n)]`; beyond the upper end every
    /// effective rank is zero. A degenerate range collapses to the lower end.
    pub fn search_range(&self) -> (f64, f64) {
        let n = self.n as f64;
        let lo = (1.0 / n).sqrt();
        let hi = self
            .layers
            .iter()
            .zip(self.spectra)
            .map(|(s, spec)| (2.0 * s.scale_a * spec.max().max(0.0) / n).sqrt())
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        (lo, hi.max(lo))
    }
}

/// Convenience wrapper around [`RdEvaluator::breakdown`].
pub fn rd_dimension(
    spectra: &[Spectrum],
    model: &FcnModel,
    lip: &LipschitzSurrogates,
    n: usize,
    include_log_terms: bool,
    eps: f64,
) -> Result<RdBreakdown> {
    RdEvaluator::new(spectra, model, lip, n, include_log_terms)?.breakdown(eps)
}

/// `β·ε + √(d_R(ε)/n)`.
///
/// Only `ε > 0` is enforced: the resolution search range routinely extends
/// past `1/β`, where the bound is vacuous but still well defined.
pub fn one_shot_bound<F>(d_r: F, beta: f64, n: usize, eps: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidResolution(eps));
    }
    let d = d_r(eps)?.max(0.0);
    Ok(beta * eps + (d / n as f64).sqrt())
}

/// `√(ln(ln(2n)/δ)/n)`, reported next to the bounds rather than added to them.
pub fn confidence_term(n: usize, delta: f64) -> f64 {
    let n = n as f64;
    ((2.0 * n).ln() / delta).ln().max(0.0).sqrt() / n.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralBound {
    pub value: f64,
    /// Grid point attaining the infimum.
    pub alpha: f64,
    /// Bracket on `value` from left/right Riemann sums, valid when `√d_R`
    /// is nonincreasing on the grid.
    pub lower: f64,
    pub upper: f64,
    pub monotone: bool,
}

/// `β·min_α {α + (1/√n)·∫_α^{1/β} √d_R(c_sub·ε) dε}` over a geometric grid of
/// `alpha_grid` points on `[√(1/n), 1/β]`, integrating by trapezoids.
pub fn integral_bound<F>(d_r: F, cfg: &RdConfig, n: usize) -> Result<IntegralBound>
where
    F: Fn(f64) -> Result<f64>,
{
    cfg.validate()?;
    let beta = cfg.beta;
    let lo = (1.0 / n as f64).sqrt();
    let hi = 1.0 / beta;
    if lo >= hi {
        let v = beta * lo;
        return Ok(IntegralBound {
            value: v,
            alpha: lo,
            lower: v,
            upper: v,
            monotone: true,
        });
    }
    let k = cfg.alpha_grid.max(2);
    let ratio = (hi / lo).ln() / (k - 1) as f64;
    let mut grid: Vec<f64> = (0..k).map(|i| lo * (ratio * i as f64).exp()).collect();
    grid[k - 1] = hi;
    let root: Vec<f64> = grid
        .iter()
        .map(|&e| d_r(cfg.c_sub * e).map(|d| d.max(0.0).sqrt()))
        .collect::<Result<_>>()?;
    let monotone = root.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    if !monotone {
        log::warn!("d_R is not monotone on the integration grid");
    }
    // Tail integrals from each grid point to 1/β.
    let mut trap = vec![0.0; k];
    let mut left = vec![0.0; k];
    let mut right = vec![0.0; k];
    for i in (0..k - 1).rev() {
        let h = grid[i + 1] - grid[i];
        trap[i] = trap[i + 1] + 0.5 * h * (root[i] + root[i + 1]);
        left[i] = left[i + 1] + h * root[i];
        right[i] = right[i + 1] + h * root[i + 1];
    }
    let sn = (n as f64).sqrt();
    let objective = |tail: &[f64]| {
        (0..k)
            .map(|i| (grid[i] + tail[i] / sn, i))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    };
    let (best, idx) = objective(&trap);
    Ok(IntegralBound {
        value: beta * best,
        alpha: grid[idx],
        lower: beta * objective(&right).0,
        upper: beta * objective(&left).0,
        monotone,
    })
}

/// Ternary search on `ln ε` for `steps` iterations, returning the midpoint of
/// the final bracket.
pub fn ternary_search_log<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, steps: usize) -> f64 {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..steps {
        if b - a <= 1e-15 * a.abs().max(1.0) {
            break;
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1.exp()) <= f(m2.exp()) {
            b = m2;
        } else {
            a = m1;
        }
    }
    (0.5 * (a + b)).exp().clamp(lo, hi)
}

/// Points examined around the ternary-search incumbent.
pub const REFINE_POINTS: usize = 32;

/// Ternary search followed by a 32-point log grid spanning ±1/8 of the log
/// range around the incumbent (plus both endpoints). The objective may be a
/// step function, so the best examined point is returned.
pub fn minimize_log_scale<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, steps: usize) -> f64 {
    if !(hi > lo) {
        return lo;
    }
    let inc = ternary_search_log(&mut f, lo, hi, steps);
    let half = (hi / lo).ln() / 8.0;
    let a = (inc.ln() - half).max(lo.ln());
    let b = (inc.ln() + half).min(hi.ln());
    let mut candidates = vec![inc, lo, hi];
    candidates.extend((0..REFINE_POINTS).map(|i| {
        (a + (b - a) * i as f64 / (REFINE_POINTS - 1) as f64)
            .exp()
            .clamp(lo, hi)
    }));
    let mut best = (f(inc), inc);
    for c in candidates {
        let v = f(c);
        if v < best.0 || (v == best.0 && c < best.1) {
            best = (v, c);
        }
    }
    best.1
}

/// ε minimizing the one-shot bound over the evaluator's search range.
pub fn eps_search(eval: &RdEvaluator<'_>, cfg: &RdConfig) -> Result<f64> {
    let (lo, hi) = eval.search_range();
    if hi <= lo {
        return Ok(lo);
    }
    let n = eval.n();
    let objective = |e: f64| {
        one_shot_bound(|x| eval.d_r(x), cfg.beta, n, e).unwrap_or(f64::INFINITY)
    };
    Ok(minimize_log_scale(objective, lo, hi, cfg.eps_search_steps))
}

/// `P·L·ln P`.
pub fn vc_proxy(params: f64, depth: usize) -> f64 {
    params * depth as f64 * params.ln()
}

/// Norms of the data matrix `X` (`d₀ × n`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DataNorms {
    pub max_column_norm: f64,
    pub frobenius: f64,
}

impl DataNorms {
    pub fn of(x: &crate::linalg::Matrix) -> Self {
        DataNorms {
            max_column_norm: x.max_column_norm(),
            frobenius: x.frobenius_norm(),
        }
    }
}

/// `(β·B_x·‖W‖_F/√n)·√(L·Σ_l (d_l + d_{l−1})·∏_{i≠l} ‖W_i‖²_op)`.
pub fn spectral_bound(model: &FcnModel, lip: &LipschitzSurrogates, max_col_norm: f64, beta: f64, n: usize) -> f64 {
    let depth = model.depth();
    let widths = model.widths();
    let sum: f64 = (0..depth)
        .map(|l| (widths[l] + widths[l + 1]) as f64 * lip.product_except(l).powi(2))
        .sum();
    beta * max_col_norm * frobenius_norm_all(model) / (n as f64).sqrt() * (depth as f64 * sum).sqrt()
}

/// `(β·‖X‖_F/n)·(Σ_l ‖W_l‖_{2,1}^{2/3} · Σ_l (∏_{i≠l} ‖W_i‖_op)^{2/3})^{3/2}`.
pub fn bartlett_bound(model: &FcnModel, lip: &LipschitzSurrogates, x_frobenius: f64, beta: f64, n: usize) -> f64 {
    let two_one: f64 = model.weights().iter().map(|w| w.norm_2_1().powf(2.0 / 3.0)).sum();
    let spectral: f64 = (0..model.depth())
        .map(|l| lip.product_except(l).powf(2.0 / 3.0))
        .sum();
    beta * x_frobenius / n as f64 * (two_one * spectral).powf(1.5)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Baselines {
    pub param_count: u64,
    pub vc_proxy: f64,
    pub spectral_bound: f64,
    pub bartlett_bound: f64,
}

pub fn baselines(model: &FcnModel, lip: &LipschitzSurrogates, data: DataNorms, beta: f64, n: usize) -> Baselines {
    let p = param_count(model);
    Baselines {
        param_count: p,
        vc_proxy: vc_proxy(p as f64, model.depth()),
        spectral_bound: spectral_bound(model, lip, data.max_column_norm, beta, n),
        bartlett_bound: bartlett_bound(model, lip, data.frobenius, beta, n),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdReport {
    pub n: usize,
    pub beta: f64,
    pub eps_star: f64,
    pub eps_searched: bool,
    pub search_range: (f64, f64),
    pub d_r_total: f64,
    pub d_r_total_no_log_terms: f64,
    pub include_log_terms: bool,
    pub per_layer: Vec<LayerTerm>,
    pub one_shot_bound: f64,
    pub integral_bound: IntegralBound,
    pub confidence_term: f64,
    pub delta: f64,
    pub baselines: Baselines,
    pub frobenius_norm: f64,
    pub m_bar: Vec<f64>,
    pub sketched_layers: Vec<usize>,
}
