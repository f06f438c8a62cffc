//! Bias-free fully connected networks `F_l = σ_l(W_l F_{l−1})`, with the
//! per-layer feature matrices captured on every forward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_spectrum, sketch_dim, sketched_gram_spectrum, spectral_norm, Matrix, Rng, Spectrum};

/// Iteration cap and relative tolerance for layer operator norms.
pub const OP_NORM_ITERS: usize = 20_000;
pub const OP_NORM_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative at `x`; ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FcnModel {
    widths: Vec<usize>,
    weights: Vec<Matrix>,
    activations: Vec<Activation>,
}

impl FcnModel {
    pub fn new(weights: Vec<Matrix>, activations: Vec<Activation>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        if activations.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} activations for {} layers",
                activations.len(),
                weights.len()
            )));
        }
        let mut widths = vec![weights[0].cols()];
        for (l, w) in weights.iter().enumerate() {
            if w.cols() != *widths.last().unwrap() {
                return Err(Error::ShapeMismatch(format!(
                    "W{} is {}x{}, expected {} columns",
                    l + 1,
                    w.rows(),
                    w.cols(),
                    widths.last().unwrap()
                )));
            }
            widths.push(w.rows());
        }
        Ok(FcnModel {
            widths,
            weights,
            activations,
        })
    }

    /// ReLU on hidden layers, identity on the output layer.
    pub fn with_default_activations(weights: Vec<Matrix>) -> Result<Self> {
        let activations = default_activations(weights.len());
        FcnModel::new(weights, activations)
    }

    /// PyTorch-style default initialization: `U(−1/√fan_in, 1/√fan_in)`
    /// (Kaiming-uniform with `a = √5`).
    pub fn kaiming_uniform(widths: &[usize], rng: &mut Rng) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument("need at least two widths".into()));
        }
        let weights = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                Matrix::from_fn(fan_out, fan_in, |_, _| rng.uniform_in(-bound, bound))
            })
            .collect();
        FcnModel::with_default_activations(weights)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Replaces the weights, keeping activations; shapes must match.
    pub fn with_weights(&self, weights: Vec<Matrix>) -> Result<Self> {
        let m = FcnModel::new(weights, self.activations.clone())?;
        if m.widths != self.widths {
            return Err(Error::ShapeMismatch("replacement weights change the widths".into()));
        }
        Ok(m)
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }
}

pub fn default_activations(depth: usize) -> Vec<Activation> {
    (0..depth)
        .map(|l| {
            if l + 1 == depth {
                Activation::Identity
            } else {
                Activation::Relu
            }
        })
        .collect()
}

/// `features[0] = X`, `features[l] = F_l(W, X)` for `l = 1..=L`.
#[derive(Clone, Debug)]
pub struct LayerFeatureSet {
    pub features: Vec<Matrix>,
}

impl LayerFeatureSet {
    pub fn samples(&self) -> usize {
        self.features[0].cols()
    }

    pub fn output(&self) -> &Matrix {
        self.features.last().unwrap()
    }

    /// Each layer's features multiplied by `s`.
    pub fn scaled(&self, s: f64) -> LayerFeatureSet {
        LayerFeatureSet {
            features: self.features.iter().map(|f| f.scale(s)).collect(),
        }
    }
}

/// Pre-activations and features of one forward pass (used by the trainer).
pub(crate) struct ForwardTrace {
    pub pre: Vec<Matrix>,
    pub features: Vec<Matrix>,
}

pub(crate) fn forward_trace(model: &FcnModel, x: &Matrix) -> Result<ForwardTrace> {
    if x.rows() != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} rows, model expects {}",
            x.rows(),
            model.input_dim()
        )));
    }
    let mut features = Vec::with_capacity(model.depth() + 1);
    let mut pre = Vec::with_capacity(model.depth());
    features.push(x.clone());
    for (w, act) in model.weights.iter().zip(&model.activations) {
        let z = w.matmul(features.last().unwrap())?;
        if !z.all_finite() {
            return Err(Error::NonFinite("forward pass"));
        }
        let a = z.map(|v| act.apply(v));
        pre.push(z);
        features.push(a);
    }
    Ok(ForwardTrace { pre, features })
}

pub fn forward_with_hooks(model: &FcnModel, x: &Matrix) -> Result<LayerFeatureSet> {
    Ok(LayerFeatureSet {
        features: forward_trace(model, x)?.features,
    })
}

/// When to replace an exact Gram spectrum by a Gaussian sketch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SketchRule {
    pub threshold: usize,
    pub divisor: usize,
}

impl Default for SketchRule {
    fn default() -> Self {
        SketchRule {
            threshold: 8192,
            divisor: 8,
        }
    }
}

/// Spectra of `Γ_{l−1} = F_{l−1}F_{l−1}ᵀ` for `l = 1..=L`; entry `l − 1` uses
/// `features[l − 1]`.
pub fn layer_gram_spectra(
    feats: &LayerFeatureSet,
    rule: SketchRule,
    rng: &mut Rng,
) -> Result<Vec<Spectrum>> {
    let layers = feats.features.len().saturating_sub(1);
    feats.features[..layers]
        .iter()
        .map(|f| {
            let d = f.rows();
            if d <= rule.threshold {
                gram_spectrum(f)
            } else {
                let r = sketch_dim(d, rule.threshold, rule.divisor);
                sketched_gram_spectrum(f, r, rng)
            }
        })
        .collect()
}

/// `m_bar[l − 1] = ∏_{i > l} ‖W_i‖_op` for `l = 1..=L`; the last entry is 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzSurrogates {
    pub m_bar: Vec<f64>,
    pub op_norms: Vec<f64>,
}

impl LipschitzSurrogates {
    pub fn from_op_norms(op_norms: Vec<f64>) -> Self {
        let depth = op_norms.len();
        let mut m_bar = vec![1.0; depth];
        for l in (0..depth.saturating_sub(1)).rev() {
            m_bar[l] = op_norms[l + 1] * m_bar[l + 1];
        }
        LipschitzSurrogates { m_bar, op_norms }
    }

    /// `∏_{i ≠ l} ‖W_i‖_op` for 0-based layer index `l`.
    pub fn product_except(&self, l: usize) -> f64 {
        self.op_norms
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != l)
            .map(|(_, v)| v)
            .product()
    }
}

pub fn lipschitz_surrogates(model: &FcnModel) -> Result<LipschitzSurrogates> {
    let norms = model
        .weights
        .iter()
        .map(|w| spectral_norm(w, OP_NORM_ITERS, OP_NORM_TOL))
        .collect::<Result<Vec<_>>>()?;
    Ok(LipschitzSurrogates::from_op_norms(norms))
}

/// `‖W‖_F` of all weights concatenated.
pub fn frobenius_norm_all(model: &FcnModel) -> f64 {
    model
        .weights
        .iter()
        .map(Matrix::frobenius_norm_sq)
        .sum::<f64>()
        .sqrt()
}

/// `P = Σ_l d_l·d_{l−1}`.
pub fn param_count(model: &FcnModel) -> u64 {
    model
        .widths
        .windows(2)
        .map(|w| (w[0] * w[1]) as u64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpectrumSource;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        let w1 = Matrix::zeros(3, 2);
        let w2 = Matrix::zeros(2, 4);
        assert!(matches!(
            FcnModel::with_default_activations(vec![w1.clone(), w2]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(FcnModel::with_default_activations(vec![]).is_err());
        let model = FcnModel::with_default_activations(vec![w1]).unwrap();
        assert_eq!(model.widths(), &[2, 3]);
        assert!(matches!(
            forward_with_hooks(&model, &Matrix::zeros(3, 1)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn forward_examples() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let id = FcnModel::new(vec![Matrix::identity(2)], vec![Activation::Identity]).unwrap();
        assert_eq!(forward_with_hooks(&id, &x).unwrap().features[1], x);

        let relu = |w: Matrix| FcnModel::new(vec![w], vec![Activation::Relu]).unwrap();
        let f = forward_with_hooks(&relu(m(&[&[1.0, -1.0]])), &m(&[&[2.0], &[1.0]])).unwrap();
        assert_eq!(f.features[1], m(&[&[1.0]]));
        let f = forward_with_hooks(&relu(m(&[&[-1.0]])), &m(&[&[3.0]])).unwrap();
        assert_eq!(f.features[1], m(&[&[0.0]]));
        assert_eq!(f.features.len(), 2);
        assert_eq!(f.features[0], m(&[&[3.0]]));
    }

    #[test]
    fn overflow_is_reported() {
        let w = m(&[&[1e200]]);
        let model = FcnModel::with_default_activations(vec![w.clone(), w]).unwrap();
        assert!(matches!(
            forward_with_hooks(&model, &m(&[&[1e200]])),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn spectra_examples() {
        let mut rng = Rng::new(0);
        let feats = LayerFeatureSet {
            features: vec![Matrix::identity(2), Matrix::zeros(1, 2)],
        };
        let s = layer_gram_spectra(&feats, SketchRule::default(), &mut rng).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].values(), &[1.0, 1.0]);

        let feats = LayerFeatureSet {
            features: vec![m(&[&[3.0, 0.0], &[0.0, 0.0]]), Matrix::zeros(1, 2)],
        };
        let s = layer_gram_spectra(&feats, SketchRule::default(), &mut rng).unwrap();
        assert_eq!(s[0].values(), &[9.0, 0.0]);
        assert_eq!(s[0].source(), SpectrumSource::Exact);

        let feats = LayerFeatureSet {
            features: vec![rng.normal_matrix(1024, 4, 1.0), Matrix::zeros(1, 4)],
        };
        let rule = SketchRule {
            threshold: 64,
            divisor: 8,
        };
        let s = layer_gram_spectra(&feats, rule, &mut rng).unwrap();
        assert_eq!(s[0].source(), SpectrumSource::Sketched { sketch_dim: 64 });
    }

    #[test]
    fn surrogate_examples() {
        let id = FcnModel::with_default_activations(vec![Matrix::identity(3); 3]).unwrap();
        assert_eq!(lipschitz_surrogates(&id).unwrap().m_bar, vec![1.0, 1.0, 1.0]);

        let two = FcnModel::with_default_activations(vec![
            Matrix::from_diag(&[1.0, 0.5]),
            Matrix::from_diag(&[3.0, 1.0]),
        ])
        .unwrap();
        let lip = lipschitz_surrogates(&two).unwrap();
        assert!((lip.m_bar[0] - 3.0).abs() < 1e-9 && lip.m_bar[1] == 1.0);

        let three = FcnModel::with_default_activations(vec![
            Matrix::identity(2),
            Matrix::from_diag(&[2.0, 1.0]),
            Matrix::from_diag(&[0.5, 5.0]),
        ])
        .unwrap();
        let lip = lipschitz_surrogates(&three).unwrap();
        let want = [10.0, 5.0, 1.0];
        for (a, b) in lip.m_bar.iter().zip(want) {
            assert!((a - b).abs() < 1e-8 * b);
        }
        assert!((lip.product_except(1) - 5.0).abs() < 1e-8);
    }

    #[test]
    fn norms_and_counts() {
        let zero = FcnModel::with_default_activations(vec![Matrix::zeros(2, 2)]).unwrap();
        assert_eq!(frobenius_norm_all(&zero), 0.0);
        let one = FcnModel::with_default_activations(vec![m(&[&[3.0, 4.0]])]).unwrap();
        assert_eq!(frobenius_norm_all(&one), 5.0);
        let two = FcnModel::with_default_activations(vec![
            m(&[&[1.0, 0.0]]),
            m(&[&[0.0], &[1.0]]),
        ])
        .unwrap();
        assert!((frobenius_norm_all(&two) - 2f64.sqrt()).abs() < 1e-15);
        let mut rng = Rng::new(0);
        for (widths, p) in [(vec![784, 64, 10], 50816), (vec![1, 1], 1), (vec![2, 3, 2], 12)] {
            let model = FcnModel::kaiming_uniform(&widths, &mut rng).unwrap();
            assert_eq!(param_count(&model), p);
        }
    }

    #[test]
    fn relu_features_nonnegative() {
        let mut rng = Rng::new(8);
        let model = FcnModel::kaiming_uniform(&[5, 7, 7, 3], &mut rng).unwrap();
        let x = rng.normal_matrix(5, 20, 1.0);
        let f = forward_with_hooks(&model, &x).unwrap();
        for l in 1..model.depth() {
            assert!(f.features[l].data().iter().all(|&v| v >= 0.0));
        }
        // Exact branch: spectrum sum equals squared Frobenius norm.
        let spectra = layer_gram_spectra(&f, SketchRule::default(), &mut rng).unwrap();
        for (s, feat) in spectra.iter().zip(&f.features) {
            let fro = feat.frobenius_norm_sq();
            assert!((s.sum() - fro).abs() <= 1e-8 * fro.max(1.0));
        }
    }
}
