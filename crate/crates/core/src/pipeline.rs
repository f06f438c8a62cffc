//! End-to-end analysis of a trained network on a sample.

use serde::Serialize;

use crate::bounds::{
    baselines, confidence_term, eps_search, integral_bound, one_shot_bound, DataNorms, EpsChoice,
    RdConfig, RdEvaluator, RdReport,
};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng, SpectrumSource};
use crate::network::{
    forward_with_hooks, frobenius_norm_all, layer_gram_spectra, lipschitz_surrogates, FcnModel,
    SketchRule,
};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub rd: RdConfig,
    pub sketch: SketchRule,
}

/// Forward pass, Gram spectra, resolution choice, Riemannian Dimension, bounds
/// and baselines. `x` is `d₀ × n`.
pub fn analyze(model: &FcnModel, x: &Matrix, cfg: &AnalysisConfig, rng: &mut Rng) -> Result<RdReport> {
    cfg.rd.validate()?;
    let n = x.cols();
    if n == 0 {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let feats = forward_with_hooks(model, x)?;
    let spectra = layer_gram_spectra(&feats, cfg.sketch, rng)?;
    let lip = lipschitz_surrogates(model)?;
    let eval = RdEvaluator::new(&spectra, model, &lip, n, cfg.rd.include_log_terms)?;

    let (eps_star, searched) = match cfg.rd.eps {
        EpsChoice::Fixed(e) => (e, false),
        EpsChoice::Auto => (eps_search(&eval, &cfg.rd)?, true),
    };
    let breakdown = eval.breakdown(eps_star)?;
    let d_r = |e: f64| eval.d_r(e);
    let one_shot = one_shot_bound(d_r, cfg.rd.beta, n, eps_star)?;
    let integral = integral_bound(d_r, &cfg.rd, n)?;

    let sketched_layers = spectra
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s.source(), SpectrumSource::Sketched { .. }))
        .map(|(l, _)| l + 1)
        .collect();

    Ok(RdReport {
        n,
        beta: cfg.rd.beta,
        eps_star,
        eps_searched: searched,
        search_range: eval.search_range(),
        d_r_total: breakdown.d_r_total,
        d_r_total_no_log_terms: breakdown.d_r_total_no_log_terms,
        include_log_terms: cfg.rd.include_log_terms,
        per_layer: breakdown.per_layer,
        one_shot_bound: one_shot,
        integral_bound: integral,
        confidence_term: confidence_term(n, cfg.rd.delta),
        delta: cfg.rd.delta,
        baselines: baselines(model, &lip, DataNorms::of(x), cfg.rd.beta, n),
        frobenius_norm: frobenius_norm_all(model),
        m_bar: lip.m_bar,
        sketched_layers,
    })
}
