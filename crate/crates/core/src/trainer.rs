//! Deterministic mini-batch SGD for bias-free networks, plus a synthetic
//! Gaussian-blob data generator.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::network::{forward_trace, FcnModel};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 10,
            batch_size: 64,
            lr_decay_epochs: Vec::new(),
            lr_decay_factor: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) || !(self.lr_decay_factor > 0.0) {
            return Err(Error::InvalidArgument(
                "weight decay must be nonnegative and the decay factor positive".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate used during 0-based epoch `epoch`: every milestone
    /// `m ≤ epoch` has multiplied the base rate by the decay factor.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let steps = self.lr_decay_epochs.iter().filter(|&&m| m <= epoch).count();
        self.lr * self.lr_decay_factor.powi(steps as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    /// `d₀ × n`, one sample per column.
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != inputs.cols() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                inputs.cols()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabeledDataset {
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            inputs: self.inputs.select_columns(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainSnapshot {
    /// Number of completed epochs.
    pub epoch: usize,
    pub model: FcnModel,
    pub train_error: f64,
    pub train_loss: f64,
    /// Learning rate that the next epoch uses.
    pub next_lr: f64,
}

/// Mean softmax cross-entropy over the columns of `logits`.
fn softmax_xent(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let (k, n) = logits.shape();
    let mut grad = Matrix::zeros(k, n);
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for j in 0..n {
        let max = (0..k).map(|c| logits.get(c, j)).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = (0..k).map(|c| (logits.get(c, j) - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let y = labels[j];
        loss += z.ln() + max - logits.get(y, j);
        for c in 0..k {
            let p = exps[c] / z;
            let target = if c == y { 1.0 } else { 0.0 };
            grad.set(c, j, (p - target) * inv_n);
        }
    }
    (loss * inv_n, grad)
}

/// Mean cross-entropy and its gradient with respect to every weight matrix.
pub fn loss_and_grad(model: &FcnModel, x: &Matrix, labels: &[usize]) -> Result<(f64, Vec<Matrix>)> {
    if model.output_dim() <= labels.iter().copied().max().unwrap_or(0) {
        return Err(Error::ShapeMismatch("label exceeds model output width".into()));
    }
    let trace = forward_trace(model, x)?;
    let (loss, mut delta_out) = softmax_xent(trace.features.last().unwrap(), labels);
    let depth = model.depth();
    let mut grads = vec![Matrix::zeros(0, 0); depth];
    for l in (0..depth).rev() {
        // dL/dZ_l = dL/dF_l ⊙ σ'(Z_l)
        let act = model.activations()[l];
        let z = &trace.pre[l];
        let dz = Matrix::from_raw(
            z.rows(),
            z.cols(),
            delta_out
                .data()
                .iter()
                .zip(z.data())
                .map(|(&g, &zv)| g * act.derivative(zv))
                .collect(),
        );
        grads[l] = dz.matmul_transpose(&trace.features[l])?;
        if l > 0 {
            delta_out = model.weights()[l].transpose_matmul(&dz)?;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss"));
    }
    Ok((loss, grads))
}

/// Fraction of misclassified samples and mean loss.
pub fn evaluate(model: &FcnModel, data: &LabeledDataset) -> Result<(f64, f64)> {
    let logits = forward_trace(model, &data.inputs)?.features.pop().unwrap();
    let (loss, _) = softmax_xent(&logits, &data.labels);
    let wrong = (0..data.len())
        .filter(|&j| {
            let pred = (0..logits.rows())
                .max_by(|&a, &b| logits.get(a, j).total_cmp(&logits.get(b, j)))
                .unwrap();
            pred != data.labels[j]
        })
        .count();
    Ok((wrong as f64 / data.len().max(1) as f64, loss))
}

fn snapshot(model: &FcnModel, data: &LabeledDataset, epoch: usize, next_lr: f64) -> Result<TrainSnapshot> {
    let (train_error, train_loss) = evaluate(model, data)?;
    Ok(TrainSnapshot {
        epoch,
        model: model.clone(),
        train_error,
        train_loss,
        next_lr,
    })
}

/// Trains with heavy-ball momentum `v ← μv − lr·(g + wd·w)`, `w ← w + v`,
/// sampling mini-batches without replacement from a seeded shuffle each epoch.
/// Snapshots are taken after the listed numbers of completed epochs (0 = the
/// initial model).
pub fn train(
    model: &FcnModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    snapshot_epochs: &[usize],
) -> Result<(FcnModel, Vec<TrainSnapshot>)> {
    cfg.validate()?;
    if model.output_dim() != data.num_classes {
        return Err(Error::ShapeMismatch(format!(
            "model has {} outputs for {} classes",
            model.output_dim(),
            data.num_classes
        )));
    }
    if model.input_dim() != data.inputs.rows() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} inputs, data has {}",
            model.input_dim(),
            data.inputs.rows()
        )));
    }
    let mut model = model.clone();
    let mut snapshots = Vec::new();
    if snapshot_epochs.contains(&0) {
        snapshots.push(snapshot(&model, data, 0, cfg.lr_at(0))?);
    }
    let mut rng = Rng::new(cfg.seed);
    let mut velocity: Vec<Matrix> = model
        .weights()
        .iter()
        .map(|w| Matrix::zeros(w.rows(), w.cols()))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let xb = data.inputs.select_columns(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let (loss, grads) = match loss_and_grad(&model, &xb, &yb) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => return Err(Error::DivergedLoss { epoch }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            for ((w, v), g) in model.weights_mut().iter_mut().zip(&mut velocity).zip(&grads) {
                let (wd, vd) = (w.data_mut(), v.data_mut());
                for ((wi, vi), &gi) in wd.iter_mut().zip(vd.iter_mut()).zip(g.data()) {
                    *vi = cfg.momentum * *vi - lr * (gi + cfg.weight_decay * *wi);
                    *wi += *vi;
                }
            }
        }
        if model.weights().iter().any(|w| !w.all_finite()) {
            return Err(Error::DivergedLoss { epoch });
        }
        let done = epoch + 1;
        let next_lr = cfg.lr_at(done);
        if next_lr != lr {
            log::info!("epoch {done}: learning rate {lr} -> {next_lr}");
        }
        if snapshot_epochs.contains(&done) {
            snapshots.push(snapshot(&model, data, done, next_lr)?);
        }
    }
    Ok((model, snapshots))
}

/// Balanced Gaussian blobs. Class `c` is centred at `4·spread·s_c` where `s_c`
/// is the simplex vertex `e_{c mod d₀}` (negated for `c ≥ d₀`), and noise has
/// standard deviation `spread`. Samples are interleaved by class.
pub fn synth_blobs(n: usize, d0: usize, num_classes: usize, spread: f64, seed: u64) -> Result<LabeledDataset> {
    if num_classes < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    if d0 == 0 || num_classes > 2 * d0 {
        return Err(Error::InvalidArgument(format!(
            "{num_classes} classes do not fit distinct means in dimension {d0}"
        )));
    }
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(Error::InvalidArgument(format!("bad spread {spread}")));
    }
    let mut rng = Rng::new(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % num_classes).collect();
    let mut data = vec![0.0; d0 * n];
    for (j, &c) in labels.iter().enumerate() {
        let axis = c % d0;
        let sign = if c >= d0 { -1.0 } else { 1.0 };
        for i in 0..d0 {
            let mean = if i == axis { 4.0 * spread * sign } else { 0.0 };
            data[i * n + j] = mean + spread * rng.normal();
        }
    }
    LabeledDataset::new(Matrix::new(d0, n, data)?, labels, num_classes)
}

/// `n,d0,classes,spread` as accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d0: usize,
    pub classes: usize,
    pub spread: f64,
}

impl SyntheticSpec {
    pub fn generate(&self, seed: u64) -> Result<LabeledDataset> {
        synth_blobs(self.n, self.d0, self.classes, self.spread, seed)
    }
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "expected n,d0,classes,spread, got {s:?}"
            )));
        }
        let int = |p: &str, what: &str| {
            p.parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} {p:?}")))
        };
        let spread: f64 = parts[3]
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad spread {:?}", parts[3])))?;
        let spec = SyntheticSpec {
            n: int(parts[0], "n")?,
            d0: int(parts[1], "d0")?,
            classes: int(parts[2], "classes")?,
            spread,
        };
        if spec.n == 0 || spec.d0 == 0 || spec.classes < 2 || spec.classes > 2 * spec.d0 {
            return Err(Error::InvalidArgument(format!("unusable synthetic spec {s:?}")));
        }
        if !(spread >= 0.0) || !spread.is_finite() {
            return Err(Error::InvalidArgument(format!("bad spread {spread}")));
        }
        Ok(spec)
    }
}
