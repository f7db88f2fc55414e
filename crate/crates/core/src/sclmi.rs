//! Structural correspondence learning baseline: one linear predictor per pivot
//! trained on non-pivot inputs, stacked into a matrix and compressed by a
//! truncated SVD into a projection of the non-pivot space.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{sigmoid, DenseMatrix};
use crate::error::{check_dim, Error, Result};
use crate::features::SparseBinaryVector;
use crate::netrepr::PivotExample;
use crate::seed::{derive_seed, rng_from_seed};

pub const DEFAULT_OVERSAMPLING: usize = 10;
pub const DEFAULT_POWER_ITERATIONS: usize = 7;

/// Column `k` holds the weight vector of the predictor for pivot `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotPredictorMatrix {
    pub weights: DenseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PivotPredictorConfig {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PivotPredictorConfig {
    fn default() -> Self {
        PivotPredictorConfig {
            l2: 1e-4,
            epochs: 3,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

/// Trains an independent bias-free logistic predictor `x_np -> [pivot k occurs]`
/// for every pivot, starting from zero weights.
pub fn train_pivot_predictors(
    data: &[PivotExample],
    num_nonpivots: usize,
    num_pivots: usize,
    config: &PivotPredictorConfig,
) -> Result<PivotPredictorMatrix> {
    if data.is_empty() {
        return Err(Error::invalid("pivot predictor training set is empty"));
    }
    if !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::invalid(
            "pivot predictor needs learning_rate > 0 and l2 >= 0",
        ));
    }
    if config.learning_rate * config.l2 >= 1.0 {
        return Err(Error::invalid("learning_rate * l2 must be below 1"));
    }
    for ex in data {
        check_dim("non-pivot input", num_nonpivots, ex.x_np.dimension())?;
        check_dim("pivot target", num_pivots, ex.x_p.dimension())?;
    }
    let columns: Vec<Vec<f64>> = (0..num_pivots)
        .into_par_iter()
        .map(|k| train_one(data, num_nonpivots, k, config))
        .collect();
    let mut weights = DenseMatrix::zeros(num_nonpivots, num_pivots);
    for (k, col) in columns.iter().enumerate() {
        for (j, &v) in col.iter().enumerate() {
            weights[(j, k)] = v;
        }
    }
    Ok(PivotPredictorMatrix { weights })
}

fn train_one(
    data: &[PivotExample],
    dim: usize,
    pivot: usize,
    cfg: &PivotPredictorConfig,
) -> Vec<f64> {
    // w = scale * u, so the L2 shrink is O(1) per step.
    let mut u = vec![0.0; dim];
    let mut scale = 1.0;
    let shrink = 1.0 - cfg.learning_rate * cfg.l2;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "pivot-predictor", &[pivot as u64]));
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let ex = &data[idx];
            let z: f64 = scale * ex.x_np.active().iter().map(|&i| u[i]).sum::<f64>();
            let y = if ex.x_p.contains(pivot) { 1.0 } else { 0.0 };
            let g = sigmoid(z) - y;
            scale *= shrink;
            let delta = cfg.learning_rate * g / scale;
            for &i in ex.x_np.active() {
                u[i] -= delta;
            }
            if scale < 1e-9 {
                u.iter_mut().for_each(|v| *v *= scale);
                scale = 1.0;
            }
        }
    }
    u.into_iter().map(|v| v * scale).collect()
}

/// Leading singular triplets of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// rows x k, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// k x cols, orthonormal rows.
    pub vt: DenseMatrix,
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out[(r, c)] = m[(r, c)];
        }
    }
    out
}

/// Dense SVD with triplets sorted by descending singular value.
fn sorted_svd(m: DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = m.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::invalid("SVD did not produce U"))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::invalid("SVD did not produce V^T"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let vt = DMatrix::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]);
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok((u, s, vt))
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Top-`k` SVD by randomized subspace iteration (oversampling 10, 7 power
/// iterations). When the sketch would span the whole column space the exact
/// dense SVD is used instead.
pub fn truncated_svd(m: &DenseMatrix, k: usize, seed: u64) -> Result<TruncatedSvd> {
    truncated_svd_with(m, k, seed, DEFAULT_OVERSAMPLING, DEFAULT_POWER_ITERATIONS)
}

pub fn truncated_svd_with(
    m: &DenseMatrix,
    k: usize,
    seed: u64,
    oversampling: usize,
    power_iterations: usize,
) -> Result<TruncatedSvd> {
    let min_dim = m.rows().min(m.cols());
    if k == 0 || k > min_dim {
        return Err(Error::invalid(format!(
            "truncated SVD rank {k} must be in 1..={min_dim} for a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let a = to_na(m);
    let sketch = (k + oversampling).min(min_dim);
    let (u, s, vt) = if sketch == min_dim {
        sorted_svd(a)?
    } else {
        let mut rng = rng_from_seed(derive_seed(seed, "rsvd", &[]));
        let omega = DMatrix::from_fn(m.cols(), sketch, |_, _| rng.random_range(-1.0..1.0));
        let mut q = orthonormal_basis(&a * omega);
        for _ in 0..power_iterations {
            let z = orthonormal_basis(a.transpose() * &q);
            q = orthonormal_basis(&a * z);
        }
        let b = q.transpose() * &a;
        let (ub, s, vt) = sorted_svd(b)?;
        (q * ub, s, vt)
    };
    Ok(TruncatedSvd {
        u: from_na(&u.columns(0, k).into_owned()),
        singular_values: s[..k].to_vec(),
        vt: from_na(&vt.rows(0, k).into_owned()),
    })
}

/// Linear map from non-pivot space to `k` dimensions with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    theta: DenseMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectionFile {
    format_version: u32,
    k: usize,
    theta: Vec<f64>,
}

impl Projection {
    pub fn from_theta(theta: DenseMatrix) -> Self {
        Projection { theta }
    }

    pub fn k(&self) -> usize {
        self.theta.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.theta.cols()
    }

    pub fn theta(&self) -> &DenseMatrix {
        &self.theta
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ProjectionFile {
            format_version: 1,
            k: self.k(),
            theta: self.theta.as_slice().to_vec(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ProjectionFile = serde_json::from_str(s)?;
        if f.format_version != 1 {
            return Err(Error::invalid(format!(
                "unsupported projection format_version {}",
                f.format_version
            )));
        }
        if f.k == 0 || f.theta.len() % f.k != 0 {
            return Err(Error::invalid(
                "projection theta length is not a multiple of k",
            ));
        }
        let cols = f.theta.len() / f.k;
        Ok(Projection {
            theta: DenseMatrix::from_row_major(f.k, cols, f.theta)?,
        })
    }
}

/// `theta = U_k^T` from the truncated SVD of the predictor matrix.
pub fn build_projection(
    predictors: &PivotPredictorMatrix,
    k: usize,
    seed: u64,
) -> Result<Projection> {
    let svd = truncated_svd(&predictors.weights, k, seed)?;
    Ok(Projection {
        theta: svd.u.transpose(),
    })
}

pub fn project(proj: &Projection, x_np: &SparseBinaryVector) -> Result<Vec<f64>> {
    check_dim("projection input", proj.input_dim(), x_np.dimension())?;
    let mut out = vec![0.0; proj.k()];
    for &i in x_np.active() {
        for (r, o) in out.iter_mut().enumerate() {
            *o += proj.theta[(r, i)];
        }
    }
    Ok(out)
}
