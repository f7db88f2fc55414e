//! Pivot-prediction network.
//!
//! The encoder maps a non-pivot indicator vector to `h = sigmoid(W_h x_np)`
//! and the decoder predicts pivot occurrence `o = sigmoid(W_r h)`. Training
//! minimizes mean binary cross-entropy between `o` and the pivot indicators.
//! With [`DecoderMode::Frozen`] the decoder rows are fixed pivot embeddings and
//! only the encoder learns. Downstream features are the pre-activation
//! `W_h x_np` returned by [`encode`].

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{dot, sigmoid, DenseMatrix};
use crate::error::{check_dim, Error, Result};
use crate::features::{FeatureSpace, SparseBinaryVector};
use crate::seed::{derive_seed, rng_from_seed};

pub const PROB_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    TrainableDecoder,
    FrozenDecoder,
}

/// Encoder/decoder weights.
///
/// The encoder is stored transposed: row `i` of `encoder` is column `i` of
/// `W_h`, so sparse inputs touch contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprModel {
    encoder: DenseMatrix,
    decoder: DenseMatrix,
    mode: DecoderMode,
}

impl ReprModel {
    /// Builds a model from `W_h` (hidden x non-pivots) and `W_r` (pivots x hidden).
    pub fn from_weights(w_h: &DenseMatrix, w_r: DenseMatrix, mode: DecoderMode) -> Result<Self> {
        check_dim("decoder columns vs hidden dim", w_h.rows(), w_r.cols())?;
        Ok(ReprModel {
            encoder: w_h.transpose(),
            decoder: w_r,
            mode,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.cols()
    }

    pub fn num_pivots(&self) -> usize {
        self.decoder.rows()
    }

    pub fn num_nonpivots(&self) -> usize {
        self.encoder.rows()
    }

    pub fn mode(&self) -> DecoderMode {
        self.mode
    }

    /// `W_h`, hidden x non-pivots.
    pub fn w_h(&self) -> DenseMatrix {
        self.encoder.transpose()
    }

    /// `W_r`, pivots x hidden.
    pub fn w_r(&self) -> &DenseMatrix {
        &self.decoder
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: 1,
            mode: self.mode,
            hidden_dim: self.hidden_dim(),
            num_pivots: self.num_pivots(),
            num_nonpivots: self.num_nonpivots(),
            w_h: self.w_h().into_row_major(),
            w_r: self.decoder.as_slice().to_vec(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        if f.format_version != 1 {
            return Err(Error::invalid(format!(
                "unsupported model format_version {}",
                f.format_version
            )));
        }
        let w_h = DenseMatrix::from_row_major(f.hidden_dim, f.num_nonpivots, f.w_h)?;
        let w_r = DenseMatrix::from_row_major(f.num_pivots, f.hidden_dim, f.w_r)?;
        ReprModel::from_weights(&w_h, w_r, f.mode)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    mode: DecoderMode,
    hidden_dim: usize,
    num_pivots: usize,
    num_nonpivots: usize,
    w_h: Vec<f64>,
    w_r: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Half-width of the uniform initialization. `None` means `1/sqrt(|f_np|)`.
    pub init_scale: Option<f64>,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 1e-5,
            max_epochs: 20,
            seed: 0,
            init_scale: None,
        }
    }
}

impl SgdConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0) {
                return Err(Error::invalid("init_scale must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub train_loss_curve: Vec<f64>,
    pub validation_loss_curve: Vec<f64>,
}

/// One unlabeled training example: non-pivot input and pivot targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotExample {
    pub x_np: SparseBinaryVector,
    pub x_p: SparseBinaryVector,
}

/// Creates a model with uniform `[-scale, scale]` weights. In frozen mode the
/// decoder is copied from `decoder`, whose width fixes the hidden dimension.
pub fn init_model(
    hidden_dim: usize,
    space: &FeatureSpace,
    mode: DecoderMode,
    decoder: Option<&DenseMatrix>,
    seed: u64,
    init_scale: Option<f64>,
) -> Result<ReprModel> {
    let n_np = space.num_nonpivots();
    let n_p = space.num_pivots();
    if hidden_dim == 0 {
        return Err(Error::invalid("hidden_dim must be at least 1"));
    }
    let scale = init_scale.unwrap_or_else(|| 1.0 / (n_np.max(1) as f64).sqrt());
    let mut rng = rng_from_seed(derive_seed(seed, "repr-init", &[]));
    let mut uniform = |rows, cols| {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        DenseMatrix::from_row_major(rows, cols, data).expect("sized")
    };
    let encoder = uniform(n_np, hidden_dim);
    let decoder = match mode {
        DecoderMode::TrainableDecoder => uniform(n_p, hidden_dim),
        DecoderMode::FrozenDecoder => {
            let d = decoder.ok_or_else(|| {
                Error::invalid("frozen decoder mode requires a pivot embedding matrix")
            })?;
            check_dim("decoder rows vs pivot count", n_p, d.rows())?;
            check_dim("hidden dim vs embedding dimension", d.cols(), hidden_dim)?;
            d.clone()
        }
    };
    Ok(ReprModel {
        encoder,
        decoder,
        mode,
    })
}

fn pre_activation(model: &ReprModel, x_np: &SparseBinaryVector) -> Result<Vec<f64>> {
    check_dim("non-pivot input", model.num_nonpivots(), x_np.dimension())?;
    let mut a = vec![0.0; model.hidden_dim()];
    for &i in x_np.active() {
        for (aj, w) in a.iter_mut().zip(model.encoder.row(i)) {
            *aj += w;
        }
    }
    Ok(a)
}

/// The learned representation `W_h x_np` (no sigmoid).
pub fn encode(model: &ReprModel, x_np: &SparseBinaryVector) -> Result<Vec<f64>> {
    pre_activation(model, x_np)
}

/// Hidden activations and pivot probabilities.
pub fn forward(model: &ReprModel, x_np: &SparseBinaryVector) -> Result<(Vec<f64>, Vec<f64>)> {
    let h: Vec<f64> = pre_activation(model, x_np)?
        .into_iter()
        .map(sigmoid)
        .collect();
    let o = (0..model.num_pivots())
        .map(|k| sigmoid(dot(model.decoder.row(k), &h)))
        .collect();
    Ok((h, o))
}

/// Mean binary cross-entropy in nats, with probabilities clipped to
/// `[PROB_CLIP, 1 - PROB_CLIP]`.
pub fn loss(o: &[f64], x_p: &SparseBinaryVector) -> Result<f64> {
    check_dim("pivot probabilities", x_p.dimension(), o.len())?;
    if o.is_empty() {
        return Err(Error::invalid("loss over zero pivots"));
    }
    let mut active = x_p.active().iter().peekable();
    let mut total = 0.0;
    for (k, &ok) in o.iter().enumerate() {
        let p = ok.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        if active.peek() == Some(&&k) {
            active.next();
            total -= p.ln();
        } else {
            total -= (1.0 - p).ln();
        }
    }
    Ok(total / o.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// d loss / d W_h, hidden x non-pivots.
    pub w_h: DenseMatrix,
    /// d loss / d W_r, absent for a frozen decoder.
    pub w_r: Option<DenseMatrix>,
}

/// Per-example quantities shared by [`gradients`] and the training loop.
struct Backprop {
    h: Vec<f64>,
    /// (o_k - x_k) / |f_p|
    out_err: Vec<f64>,
    /// d loss / d pre-activation
    hidden_delta: Vec<f64>,
    loss: f64,
}

fn backprop(
    model: &ReprModel,
    x_np: &SparseBinaryVector,
    x_p: &SparseBinaryVector,
) -> Result<Backprop> {
    check_dim("pivot target", model.num_pivots(), x_p.dimension())?;
    let (h, o) = forward(model, x_np)?;
    let loss = loss(&o, x_p)?;
    let n_p = o.len() as f64;
    let out_err: Vec<f64> = o
        .iter()
        .enumerate()
        .map(|(k, &ok)| (ok - if x_p.contains(k) { 1.0 } else { 0.0 }) / n_p)
        .collect();
    let mut back = vec![0.0; h.len()];
    for (k, &e) in out_err.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for (b, w) in back.iter_mut().zip(model.decoder.row(k)) {
            *b += e * w;
        }
    }
    let hidden_delta = back
        .iter()
        .zip(&h)
        .map(|(b, hj)| b * hj * (1.0 - hj))
        .collect();
    Ok(Backprop {
        h,
        out_err,
        hidden_delta,
        loss,
    })
}

/// Analytic gradient of [`loss`] (ignoring the probability clip) for one example.
pub fn gradients(
    model: &ReprModel,
    x_np: &SparseBinaryVector,
    x_p: &SparseBinaryVector,
) -> Result<Gradients> {
    let bp = backprop(model, x_np, x_p)?;
    let mut g_h = DenseMatrix::zeros(model.hidden_dim(), model.num_nonpivots());
    for &i in x_np.active() {
        for (j, d) in bp.hidden_delta.iter().enumerate() {
            g_h[(j, i)] = *d;
        }
    }
    let g_r = match model.mode {
        DecoderMode::FrozenDecoder => None,
        DecoderMode::TrainableDecoder => {
            let mut g = DenseMatrix::zeros(model.num_pivots(), model.hidden_dim());
            for (k, &e) in bp.out_err.iter().enumerate() {
                for (gv, hj) in g.row_mut(k).iter_mut().zip(&bp.h) {
                    *gv = e * hj;
                }
            }
            Some(g)
        }
    };
    Ok(Gradients { w_h: g_h, w_r: g_r })
}

/// Mean loss of `model` over `examples`.
pub fn mean_loss(model: &ReprModel, examples: &[PivotExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::invalid("mean loss over an empty set"));
    }
    let losses = examples
        .par_iter()
        .map(|ex| forward(model, &ex.x_np).and_then(|(_, o)| loss(&o, &ex.x_p)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / examples.len() as f64)
}

/// The momentum + weight decay update with a zero gradient is linear in
/// `(w, v)`; `n` such steps are applied at once through the matrix power.
#[derive(Debug, Clone, Copy)]
struct DecayStep([[f64; 2]; 2]);

impl DecayStep {
    fn new(lr: f64, momentum: f64, decay: f64) -> Self {
        // v' = momentum v - lr decay w ; w' = w + v'
        DecayStep([[1.0 - lr * decay, momentum], [-lr * decay, momentum]])
    }

    fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    }

    fn pow(&self, mut n: u64) -> [[f64; 2]; 2] {
        let mut result = [[1.0, 0.0], [0.0, 1.0]];
        let mut base = self.0;
        while n > 0 {
            if n & 1 == 1 {
                result = Self::mul(result, base);
            }
            base = Self::mul(base, base);
            n >>= 1;
        }
        result
    }
}

/// Lazily-updated SGD state for the encoder: rows with no gradient at a step
/// are caught up in closed form when next touched.
struct EncoderState {
    velocity: DenseMatrix,
    last_step: Vec<u64>,
    decay: DecayStep,
}

impl EncoderState {
    fn catch_up(&mut self, encoder: &mut DenseMatrix, row: usize, now: u64) {
        let n = now - self.last_step[row];
        if n == 0 {
            return;
        }
        let m = self.decay.pow(n);
        let w = encoder.row_mut(row);
        let v = self.velocity.row_mut(row);
        for (wj, vj) in w.iter_mut().zip(v.iter_mut()) {
            let (w0, v0) = (*wj, *vj);
            *wj = m[0][0] * w0 + m[0][1] * v0;
            *vj = m[1][0] * w0 + m[1][1] * v0;
        }
        self.last_step[row] = now;
    }

    fn catch_up_all(&mut self, encoder: &mut DenseMatrix, now: u64) {
        for row in 0..encoder.rows() {
            self.catch_up(encoder, row, now);
        }
    }
}

#[inline]
fn momentum_step(w: &mut [f64], v: &mut [f64], g: impl Iterator<Item = f64>, cfg: &SgdConfig) {
    for ((wj, vj), gj) in w.iter_mut().zip(v.iter_mut()).zip(g) {
        *vj = cfg.momentum * *vj - cfg.learning_rate * (gj + cfg.weight_decay * *wj);
        *wj += *vj;
    }
}

/// Trains with per-example momentum SGD and early stopping on the mean
/// validation loss.
pub fn train(
    model: &ReprModel,
    train_docs: &[PivotExample],
    validation_docs: &[PivotExample],
    config: &SgdConfig,
) -> Result<(ReprModel, TrainReport)> {
    if validation_docs.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    train_with_monitor(model, train_docs, config, |m| mean_loss(m, validation_docs))
}

/// [`train`] with the per-epoch validation loss supplied by `validation_loss`.
///
/// Training stops at the first epoch whose validation loss exceeds the
/// previous epoch's and returns the weights from the end of that previous epoch.
pub fn train_with_monitor<F>(
    model: &ReprModel,
    train_docs: &[PivotExample],
    config: &SgdConfig,
    mut validation_loss: F,
) -> Result<(ReprModel, TrainReport)>
where
    F: FnMut(&ReprModel) -> Result<f64>,
{
    config.validate()?;
    if train_docs.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    for ex in train_docs {
        check_dim(
            "non-pivot input",
            model.num_nonpivots(),
            ex.x_np.dimension(),
        )?;
        check_dim("pivot target", model.num_pivots(), ex.x_p.dimension())?;
    }

    let mut current = model.clone();
    let mut report = TrainReport {
        epochs_run: 0,
        stopped_early: false,
        train_loss_curve: Vec::new(),
        validation_loss_curve: Vec::new(),
    };
    let mut enc_state = EncoderState {
        velocity: DenseMatrix::zeros(current.encoder.rows(), current.encoder.cols()),
        last_step: vec![0; current.encoder.rows()],
        decay: DecayStep::new(config.learning_rate, config.momentum, config.weight_decay),
    };
    let mut dec_velocity = DenseMatrix::zeros(current.decoder.rows(), current.decoder.cols());
    let trainable = current.mode == DecoderMode::TrainableDecoder;

    let mut rng = rng_from_seed(derive_seed(config.seed, "repr-sgd", &[]));
    let mut order: Vec<usize> = (0..train_docs.len()).collect();
    let mut step: u64 = 0;
    let mut previous: Option<ReprModel> = None;

    for _epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let ex = &train_docs[idx];
            step += 1;
            for &i in ex.x_np.active() {
                enc_state.catch_up(&mut current.encoder, i, step - 1);
            }
            let bp = backprop(&current, &ex.x_np, &ex.x_p)?;
            epoch_loss += bp.loss;

            if trainable {
                for (k, &e) in bp.out_err.iter().enumerate() {
                    let grad = bp.h.iter().map(|hj| e * hj);
                    momentum_step(
                        current.decoder.row_mut(k),
                        dec_velocity.row_mut(k),
                        grad,
                        config,
                    );
                }
            }
            for &i in ex.x_np.active() {
                let grad = bp.hidden_delta.iter().copied();
                momentum_step(
                    current.encoder.row_mut(i),
                    enc_state.velocity.row_mut(i),
                    grad,
                    config,
                );
                enc_state.last_step[i] = step;
            }
        }
        enc_state.catch_up_all(&mut current.encoder, step);

        let val = validation_loss(&current)?;
        report.epochs_run += 1;
        report
            .train_loss_curve
            .push(epoch_loss / train_docs.len() as f64);
        report.validation_loss_curve.push(val);

        let n = report.validation_loss_curve.len();
        if n >= 2 && val > report.validation_loss_curve[n - 2] {
            report.stopped_early = true;
            let restored = previous.take().expect("snapshot of the previous epoch");
            return Ok((restored, report));
        }
        previous = Some(current.clone());
    }
    Ok((current, report))
}
