//! Two-layer GCN backbone: forward pass, exact gradients, full-batch Adam
//! training, embedding extraction, and checkpoints.
//!
//! ```text
//! S = Â X W0      H = ReLU(S)      H' = dropout(H)      Z = Â H' W1
//! ```

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::DatasetBundle;
use crate::error::{Error, Result};
use crate::graph::{gcn_normalized_adjacency, SparseGraph};
use crate::linalg::{CsrMatrix, DenseMatrix};

const CHECKPOINT_MAGIC: &[u8; 4] = b"GCN1";
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnHyper {
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for GcnHyper {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            dropout_rate: 0.5,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl GcnHyper {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Parameter("hidden_dim must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Parameter(format!(
                "dropout_rate {} is outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Parameter(format!(
                "weight_decay {} must be nonnegative",
                self.weight_decay
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Parameter("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Weights of the two layers plus the hyperparameters they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    w0: DenseMatrix,
    w1: DenseMatrix,
    hyper: GcnHyper,
}

/// Output of [`GcnModel::forward`].
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Post-ReLU first-layer activations, before dropout.
    pub hidden: DenseMatrix,
    pub logits: DenseMatrix,
}

/// Everything the backward pass needs from one forward pass.
struct Tape {
    pre_activation: DenseMatrix,
    hidden: DenseMatrix,
    dropped: DenseMatrix,
    // per-entry multiplier: 0 or 1/(1-rate)
    keep_scale: Option<Vec<f64>>,
    logits: DenseMatrix,
}

impl GcnModel {
    pub fn new(w0: DenseMatrix, w1: DenseMatrix, hyper: GcnHyper) -> Result<Self> {
        if w0.cols() != w1.rows() {
            return Err(Error::Dimension(format!(
                "W0 is {}x{} but W1 is {}x{}",
                w0.rows(),
                w0.cols(),
                w1.rows(),
                w1.cols()
            )));
        }
        if w0.cols() != hyper.hidden_dim {
            return Err(Error::Dimension(format!(
                "W0 has {} columns, hidden_dim is {}",
                w0.cols(),
                hyper.hidden_dim
            )));
        }
        if !w0.all_finite() || !w1.all_finite() {
            return Err(Error::Numeric("model weights contain non-finite values".into()));
        }
        Ok(Self { w0, w1, hyper })
    }

    /// Glorot-uniform initialization of both layers.
    pub fn glorot(
        num_features: usize,
        num_classes: usize,
        hyper: GcnHyper,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        hyper.validate()?;
        let w0 = glorot_uniform(num_features, hyper.hidden_dim, rng);
        let w1 = glorot_uniform(hyper.hidden_dim, num_classes, rng);
        Self::new(w0, w1, hyper)
    }

    pub fn w0(&self) -> &DenseMatrix {
        &self.w0
    }

    pub fn w1(&self) -> &DenseMatrix {
        &self.w1
    }

    pub fn hyper(&self) -> &GcnHyper {
        &self.hyper
    }

    pub fn num_features(&self) -> usize {
        self.w0.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.w1.cols()
    }

    /// Runs both layers. `rng` is only consulted in train mode with a nonzero
    /// dropout rate.
    pub fn forward(
        &self,
        norm_adj: &CsrMatrix,
        features: &CsrMatrix,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardOutput> {
        let tape = self.record(norm_adj, features, mode, rng)?;
        Ok(ForwardOutput {
            hidden: tape.hidden,
            logits: tape.logits,
        })
    }

    fn record(
        &self,
        norm_adj: &CsrMatrix,
        features: &CsrMatrix,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tape> {
        let n = features.rows();
        if norm_adj.rows() != n || norm_adj.cols() != n {
            return Err(Error::Dimension(format!(
                "adjacency is {}x{} for {n} nodes",
                norm_adj.rows(),
                norm_adj.cols()
            )));
        }
        if features.cols() != self.num_features() {
            return Err(Error::Dimension(format!(
                "features have {} columns, model expects {}",
                features.cols(),
                self.num_features()
            )));
        }
        let pre_activation = norm_adj.mul_dense(&features.mul_dense(&self.w0)?)?;
        if !pre_activation.all_finite() {
            return Err(Error::Numeric("non-finite activations in layer 1".into()));
        }
        let mut hidden = pre_activation.clone();
        hidden.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));

        let rate = self.hyper.dropout_rate;
        let (dropped, keep_scale) = match mode {
            Mode::Train if rate > 0.0 => {
                let rng = rng.ok_or_else(|| {
                    Error::Parameter("train-mode forward with dropout needs an rng".into())
                })?;
                let scale = 1.0 / (1.0 - rate);
                let mask: Vec<f64> = (0..hidden.as_slice().len())
                    .map(|_| if rng.random::<f64>() < rate { 0.0 } else { scale })
                    .collect();
                let mut dropped = hidden.clone();
                dropped
                    .as_mut_slice()
                    .iter_mut()
                    .zip(&mask)
                    .for_each(|(v, m)| *v *= m);
                (dropped, Some(mask))
            }
            _ => (hidden.clone(), None),
        };

        let logits = norm_adj.mul_dense(&dropped.matmul(&self.w1)?)?;
        if !logits.all_finite() {
            return Err(Error::Numeric("non-finite logits in layer 2".into()));
        }
        Ok(Tape {
            pre_activation,
            hidden,
            dropped,
            keep_scale,
            logits,
        })
    }

    /// Masked-mean softmax cross-entropy and its exact gradients with respect
    /// to W0 and W1 for the dropout mask drawn from `rng`.
    pub fn loss_and_gradients(
        &self,
        norm_adj: &CsrMatrix,
        features: &CsrMatrix,
        labels: &[usize],
        train_mask: &[bool],
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, DenseMatrix, DenseMatrix)> {
        let n = features.rows();
        if labels.len() != n || train_mask.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels and {} mask entries for {n} nodes",
                labels.len(),
                train_mask.len()
            )));
        }
        let count = train_mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(Error::Parameter("training mask is empty".into()));
        }
        let tape = self.record(norm_adj, features, mode, rng)?;
        let c = self.num_classes();

        let mut loss = 0.0;
        let mut d_logits = DenseMatrix::zeros(n, c);
        for i in (0..n).filter(|&i| train_mask[i]) {
            if labels[i] >= c {
                return Err(Error::Dimension(format!(
                    "label {} of node {i} exceeds {c} classes",
                    labels[i]
                )));
            }
            let probs = softmax(tape.logits.row(i));
            loss -= probs[labels[i]].ln();
            let row = d_logits.row_mut(i);
            for (k, p) in probs.iter().enumerate() {
                row[k] = p / count as f64;
            }
            row[labels[i]] -= 1.0 / count as f64;
        }
        loss /= count as f64;

        // Â is symmetric, so Âᵀ = Â in both layers
        let d_q = norm_adj.mul_dense(&d_logits)?;
        let grad_w1 = tape.dropped.transpose_matmul(&d_q)?;
        let mut d_hidden = d_q.matmul_transpose(&self.w1)?;
        if let Some(mask) = &tape.keep_scale {
            d_hidden
                .as_mut_slice()
                .iter_mut()
                .zip(mask)
                .for_each(|(g, m)| *g *= m);
        }
        d_hidden
            .as_mut_slice()
            .iter_mut()
            .zip(tape.pre_activation.as_slice())
            .for_each(|(g, &s)| {
                if s <= 0.0 {
                    *g = 0.0
                }
            });
        let d_p = norm_adj.mul_dense(&d_hidden)?;
        let grad_w0 = features.transpose_mul_dense(&d_p)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss is {loss}")));
        }
        Ok((loss, grad_w0, grad_w1))
    }

    /// Eval-mode hidden activations for every node.
    pub fn embed(&self, graph: &SparseGraph, features: &CsrMatrix) -> Result<DenseMatrix> {
        let adj = gcn_normalized_adjacency(graph);
        Ok(self.forward(&adj, features, Mode::Eval, None)?.hidden)
    }

    /// Eval-mode accuracy on `mask` over `graph`.
    pub fn evaluate(
        &self,
        graph: &SparseGraph,
        bundle: &DatasetBundle,
        mask: &[bool],
    ) -> Result<(f64, Vec<bool>)> {
        let adj = gcn_normalized_adjacency(graph);
        let logits = self.forward(&adj, bundle.features(), Mode::Eval, None)?.logits;
        accuracy(&logits, bundle.labels(), mask)
    }

    /// Writes the binary checkpoint (`GCN1`, d, h, C, W0, W1; little-endian).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(28 + 8 * (self.w0.as_slice().len() + self.w1.as_slice().len()));
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        for dim in [self.num_features(), self.hidden_dim(), self.num_classes()] {
            buf.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for v in self.w0.as_slice().iter().chain(self.w1.as_slice()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Reads a checkpoint. Hyperparameters other than the hidden size are not
    /// stored and come from `hyper`.
    pub fn load(path: impl AsRef<Path>, hyper: GcnHyper) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |m: &str| Error::parse(path, 0, m);
        if bytes.len() < 28 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a GCN1 checkpoint"));
        }
        let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
        let (d, h, c) = (read_u64(4), read_u64(12), read_u64(20));
        let count = d
            .checked_mul(h)
            .and_then(|a| h.checked_mul(c).and_then(|b| a.checked_add(b)))
            .ok_or_else(|| bad("checkpoint dimensions overflow"))?;
        if bytes.len() != 28 + 8 * count {
            return Err(bad("checkpoint length does not match its dimensions"));
        }
        let values: Vec<f64> = bytes[28..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let w0 = DenseMatrix::from_vec(d, h, values[..d * h].to_vec())?;
        let w1 = DenseMatrix::from_vec(h, c, values[d * h..].to_vec())?;
        Self::new(w0, w1, GcnHyper { hidden_dim: h, ..hyper })
    }
}

fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> DenseMatrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    DenseMatrix::from_vec(fan_in, fan_out, data).expect("shape matches")
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Fraction of masked rows whose argmax equals the label, and which rows those
/// are.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], mask: &[bool]) -> Result<(f64, Vec<bool>)> {
    if labels.len() != logits.rows() || mask.len() != logits.rows() {
        return Err(Error::Dimension(format!(
            "{} labels and {} mask entries for {} rows",
            labels.len(),
            mask.len(),
            logits.rows()
        )));
    }
    let total = mask.iter().filter(|&&m| m).count();
    if total == 0 {
        return Err(Error::Parameter("evaluation mask is empty".into()));
    }
    let correct: Vec<bool> = (0..logits.rows())
        .map(|i| mask[i] && argmax(logits.row(i)) == labels[i])
        .collect();
    let hits = correct.iter().filter(|&&c| c).count();
    Ok((hits as f64 / total as f64, correct))
}

/// One epoch of the training trace.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub best_test_accuracy: f64,
    /// 1-based; the first epoch reaching the maximum.
    pub best_epoch: usize,
    pub best_model: GcnModel,
    pub final_model: GcnModel,
    pub trace: Vec<EpochRecord>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// Classic L2: `decay * w` joins the gradient before the moment updates.
    fn update(&mut self, w: &mut [f64], grad: &[f64], lr: f64, decay: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        for i in 0..w.len() {
            let g = grad[i] + decay * w[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            w[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Full-batch training on `graph` with the bundle's features, labels and
/// masks. Test accuracy is recorded after every epoch.
pub fn train(bundle: &DatasetBundle, graph: &SparseGraph, hyper: &GcnHyper) -> Result<TrainReport> {
    hyper.validate()?;
    if graph.num_nodes() != bundle.num_nodes() {
        return Err(Error::Dimension(format!(
            "graph has {} nodes, dataset has {}",
            graph.num_nodes(),
            bundle.num_nodes()
        )));
    }
    let adj = gcn_normalized_adjacency(graph);
    let features = bundle.features();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = GcnModel::glorot(
        bundle.num_features(),
        bundle.num_classes(),
        hyper.clone(),
        &mut rng,
    )?;
    let mut opt0 = Adam::new(model.w0.as_slice().len());
    let mut opt1 = Adam::new(model.w1.as_slice().len());

    let mut trace = Vec::with_capacity(hyper.max_epochs);
    let mut best: Option<(f64, usize, GcnModel)> = None;
    for epoch in 1..=hyper.max_epochs {
        let (loss, g0, g1) = model.loss_and_gradients(
            &adj,
            features,
            bundle.labels(),
            bundle.train_mask(),
            Mode::Train,
            Some(&mut rng),
        )?;
        opt0.update(
            model.w0.as_mut_slice(),
            g0.as_slice(),
            hyper.learning_rate,
            hyper.weight_decay,
        );
        opt1.update(
            model.w1.as_mut_slice(),
            g1.as_slice(),
            hyper.learning_rate,
            hyper.weight_decay,
        );
        let logits = model.forward(&adj, features, Mode::Eval, None)?.logits;
        let (acc, _) = accuracy(&logits, bundle.labels(), bundle.test_mask())?;
        trace.push(EpochRecord {
            epoch,
            loss,
            test_accuracy: acc,
        });
        if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
            best = Some((acc, epoch, model.clone()));
        }
    }
    let (best_test_accuracy, best_epoch, best_model) = best.expect("at least one epoch");
    Ok(TrainReport {
        best_test_accuracy,
        best_epoch,
        best_model,
        final_model: model,
        trace,
    })
}
