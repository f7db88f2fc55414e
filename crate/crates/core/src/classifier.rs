//! L2-regularized binary logistic regression over original binary features
//! concatenated with a dense learned representation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dense::{dot, sigmoid};
use crate::error::{check_dim, Error, Result};
use crate::features::SparseBinaryVector;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct HybridVector {
    pub sparse_part: SparseBinaryVector,
    /// Learned representation; empty when no representation is used.
    pub dense_part: Vec<f64>,
}

impl HybridVector {
    pub fn sparse_only(sparse_part: SparseBinaryVector) -> Self {
        HybridVector {
            sparse_part,
            dense_part: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub sparse_weights: Vec<f64>,
    pub dense_weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogRegFile {
    format_version: u32,
    sparse_weights: Vec<f64>,
    dense_weights: Vec<f64>,
    bias: f64,
    l2: f64,
}

impl LogRegModel {
    pub fn zeros(sparse_dim: usize, dense_dim: usize) -> Self {
        LogRegModel {
            sparse_weights: vec![0.0; sparse_dim],
            dense_weights: vec![0.0; dense_dim],
            bias: 0.0,
            l2: 0.0,
        }
    }

    fn check(&self, x: &HybridVector) -> Result<()> {
        check_dim(
            "sparse feature dimension",
            self.sparse_weights.len(),
            x.sparse_part.dimension(),
        )?;
        check_dim(
            "dense feature dimension",
            self.dense_weights.len(),
            x.dense_part.len(),
        )
    }

    fn margin(&self, x: &HybridVector) -> f64 {
        let s: f64 = x
            .sparse_part
            .active()
            .iter()
            .map(|&i| self.sparse_weights[i])
            .sum();
        s + dot(&self.dense_weights, &x.dense_part) + self.bias
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&LogRegFile {
            format_version: 1,
            sparse_weights: self.sparse_weights.clone(),
            dense_weights: self.dense_weights.clone(),
            bias: self.bias,
            l2: self.l2,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: LogRegFile = serde_json::from_str(s)?;
        if f.format_version != 1 {
            return Err(Error::invalid(format!(
                "unsupported classifier format_version {}",
                f.format_version
            )));
        }
        Ok(LogRegModel {
            sparse_weights: f.sparse_weights,
            dense_weights: f.dense_weights,
            bias: f.bias,
            l2: f.l2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub l2: f64,
    pub max_iters: usize,
    /// Stop once the objective gradient's max-norm falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            max_iters: 1000,
            tolerance: 1e-5,
            seed: 0,
        }
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Regularized mean logistic loss of `model` on `data`.
pub fn objective(model: &LogRegModel, data: &[(HybridVector, u8)]) -> f64 {
    let n = data.len() as f64;
    let data_loss: f64 = data
        .iter()
        .map(|(x, y)| softplus(-signed(*y) * model.margin(x)))
        .sum::<f64>()
        / n;
    data_loss
        + 0.5
            * model.l2
            * (dot(&model.sparse_weights, &model.sparse_weights)
                + dot(&model.dense_weights, &model.dense_weights))
}

fn gradient(model: &LogRegModel, data: &[(HybridVector, u8)], margins: &[f64]) -> LogRegModel {
    let n = data.len() as f64;
    let mut g = LogRegModel::zeros(model.sparse_weights.len(), model.dense_weights.len());
    for ((x, y), &z) in data.iter().zip(margins) {
        // d/dz softplus(-y z) = -y sigmoid(-y z)
        let ys = signed(*y);
        let r = -ys * sigmoid(-ys * z) / n;
        for &i in x.sparse_part.active() {
            g.sparse_weights[i] += r;
        }
        for (gd, xd) in g.dense_weights.iter_mut().zip(&x.dense_part) {
            *gd += r * xd;
        }
        g.bias += r;
    }
    for (gw, w) in g.sparse_weights.iter_mut().zip(&model.sparse_weights) {
        *gw += model.l2 * w;
    }
    for (gw, w) in g.dense_weights.iter_mut().zip(&model.dense_weights) {
        *gw += model.l2 * w;
    }
    g
}

fn params(m: &LogRegModel) -> impl Iterator<Item = f64> + '_ {
    m.sparse_weights
        .iter()
        .chain(&m.dense_weights)
        .copied()
        .chain(std::iter::once(m.bias))
}

fn params_mut(m: &mut LogRegModel) -> impl Iterator<Item = &mut f64> + '_ {
    m.sparse_weights
        .iter_mut()
        .chain(m.dense_weights.iter_mut())
        .chain(std::iter::once(&mut m.bias))
}

fn max_norm(g: &LogRegModel) -> f64 {
    params(g).fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Training output with the objective after every accepted iteration
/// (the first entry is the objective at the starting point).
#[derive(Debug, Clone)]
pub struct LogRegTrace {
    pub model: LogRegModel,
    pub objective_history: Vec<f64>,
    pub final_gradient_norm: f64,
}

pub fn train_logreg(data: &[(HybridVector, u8)], config: &LogRegConfig) -> Result<LogRegModel> {
    Ok(train_logreg_traced(data, config)?.model)
}

/// Full-batch gradient descent with Barzilai-Borwein trial steps and
/// Armijo backtracking.
pub fn train_logreg_traced(
    data: &[(HybridVector, u8)],
    config: &LogRegConfig,
) -> Result<LogRegTrace> {
    let (first, _) = data
        .first()
        .ok_or_else(|| Error::invalid("classifier training set is empty"))?;
    if !(config.l2 >= 0.0) || !(config.tolerance > 0.0) {
        return Err(Error::invalid("l2 must be >= 0 and tolerance > 0"));
    }
    let sparse_dim = first.sparse_part.dimension();
    let dense_dim = first.dense_part.len();
    let mut has = [false; 2];
    for (x, y) in data {
        check_dim(
            "sparse feature dimension",
            sparse_dim,
            x.sparse_part.dimension(),
        )?;
        check_dim("dense feature dimension", dense_dim, x.dense_part.len())?;
        if *y > 1 {
            return Err(Error::invalid(format!("label {y} is not 0 or 1")));
        }
        has[*y as usize] = true;
    }
    if !(has[0] && has[1]) {
        return Err(Error::invalid(
            "classifier training data contains a single class",
        ));
    }

    let mut model = LogRegModel::zeros(sparse_dim, dense_dim);
    model.l2 = config.l2;
    // Seeded start for observed parameters. A feature that is never active has
    // zero gradient apart from L2, so it starts and stays at exactly zero.
    let mut observed = vec![false; sparse_dim];
    for (x, _) in data {
        for &i in x.sparse_part.active() {
            observed[i] = true;
        }
    }
    let mut rng = rng_from_seed(derive_seed(config.seed, "logreg-init", &[]));
    for (w, seen) in model.sparse_weights.iter_mut().zip(&observed) {
        let r = rng.random_range(-0.01..0.01);
        if *seen {
            *w = r;
        }
    }
    for w in model
        .dense_weights
        .iter_mut()
        .chain(std::iter::once(&mut model.bias))
    {
        *w = rng.random_range(-0.01..0.01);
    }

    let mut margins: Vec<f64> = data.iter().map(|(x, _)| model.margin(x)).collect();
    let mut f = objective(&model, data);
    let mut g = gradient(&model, data, &margins);
    let mut gnorm = max_norm(&g);
    let mut history = vec![f];
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for _ in 0..config.max_iters {
        if gnorm < config.tolerance {
            break;
        }
        let theta: Vec<f64> = params(&model).collect();
        let grad: Vec<f64> = params(&g).collect();
        if let Some((theta_prev, grad_prev)) = &prev {
            let mut sy = 0.0;
            let mut ss = 0.0;
            for i in 0..theta.len() {
                let s = theta[i] - theta_prev[i];
                let y = grad[i] - grad_prev[i];
                sy += s * y;
                ss += s * s;
            }
            if sy > 0.0 {
                step = (ss / sy).clamp(1e-10, 1e10);
            }
        }
        // Directional margins: change of each margin per unit step along -g.
        let dir: Vec<f64> = data.iter().map(|(x, _)| g.margin(x)).collect();
        let gsq: f64 = grad.iter().map(|v| v * v).sum();
        let mut accepted = None;
        let mut alpha = step;
        while alpha > 1e-20 {
            let mut cand = model.clone();
            for (w, gw) in params_mut(&mut cand).zip(&grad) {
                *w -= alpha * gw;
            }
            let cand_margins: Vec<f64> = margins
                .iter()
                .zip(&dir)
                .map(|(z, d)| z - alpha * d)
                .collect();
            let n = data.len() as f64;
            let data_loss: f64 = data
                .iter()
                .zip(&cand_margins)
                .map(|((_, y), z)| softplus(-signed(*y) * z))
                .sum::<f64>()
                / n;
            let fc = data_loss
                + 0.5
                    * cand.l2
                    * (dot(&cand.sparse_weights, &cand.sparse_weights)
                        + dot(&cand.dense_weights, &cand.dense_weights));
            if fc <= f - 1e-4 * alpha * gsq {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        prev = Some((theta, grad));
        model = cand;
        // Recompute margins exactly to avoid drift from the incremental update.
        margins = data.iter().map(|(x, _)| model.margin(x)).collect();
        f = fc;
        history.push(f);
        g = gradient(&model, data, &margins);
        gnorm = max_norm(&g);
        step = alpha;
    }

    Ok(LogRegTrace {
        model,
        objective_history: history,
        final_gradient_norm: gnorm,
    })
}

/// Probability of the positive class and the predicted label; a probability
/// of exactly 0.5 predicts positive.
pub fn predict(model: &LogRegModel, x: &HybridVector) -> Result<(f64, u8)> {
    model.check(x)?;
    let p = sigmoid(model.margin(x));
    Ok((p, u8::from(p >= 0.5)))
}

pub fn accuracy(model: &LogRegModel, data: &[(HybridVector, u8)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("accuracy over an empty set"));
    }
    let mut correct = 0usize;
    for (x, y) in data {
        if predict(model, x)?.1 == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
