use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FactorMethod, LowRankFactor};
use crate::error::{Error, Result};
use crate::kernel::KernelOperator;

/// Floor applied to `|D_ii|` in the `L D L^T` factorization of the core matrix.
pub const DEFAULT_LDL_THRESHOLD: f64 = 1e-8;

/// How the Nystrom basis `Q` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NystromMode {
    /// `k` distinct coordinate vectors, sampled uniformly.
    Columns,
    /// Orthonormalized `K G` for a standard normal `n x k` matrix `G`.
    Gaussian,
}

impl fmt::Display for NystromMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NystromMode::Columns => "columns",
            NystromMode::Gaussian => "gaussian",
        })
    }
}

impl FromStr for NystromMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "columns" => Ok(NystromMode::Columns),
            "gaussian" => Ok(NystromMode::Gaussian),
            _ => Err(Error::Config(format!("unknown Nystrom mode `{s}`"))),
        }
    }
}

/// Nystrom factor `Z` with `Z^T Z = (KQ) C^{-1} (KQ)^T`, `C = Q^T K Q`.
///
/// `C` is factored as `L D L^T`; any `|D_ii| < ldl_threshold` is replaced by
/// `ldl_threshold` with its sign kept (zero counts as positive) during the
/// elimination. Then `Z = |D|^{-1/2} L^{-1} (KQ)^T`.
pub fn nystrom(
    op: &dyn KernelOperator,
    rank: usize,
    mode: NystromMode,
    seed: u64,
    ldl_threshold: f64,
) -> Result<LowRankFactor> {
    let n = op.size();
    if rank == 0 {
        return Err(Error::Config("rank must be at least 1".into()));
    }
    if rank > n {
        return Err(Error::Config(format!("rank {rank} exceeds the {n} points")));
    }
    if !(ldl_threshold > 0.0) {
        return Err(Error::Config("LDL threshold must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (kq, core, pivots, method) = match mode {
        NystromMode::Columns => {
            // sampling without replacement never draws a column twice
            let mut cols = rand::seq::index::sample(&mut rng, n, rank).into_vec();
            cols.sort_unstable();
            let mut kq = DMatrix::zeros(n, rank);
            for (c, &j) in cols.iter().enumerate() {
                kq.set_column(c, &DVector::from_vec(op.column(j)));
            }
            let core = DMatrix::from_fn(rank, rank, |a, b| kq[(cols[a], b)]);
            (kq, core, cols, FactorMethod::NystromColumns)
        }
        NystromMode::Gaussian => {
            let mut sketch = DMatrix::zeros(n, rank);
            for c in 0..rank {
                let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                sketch.set_column(c, &DVector::from_vec(op.apply(&g)));
            }
            let q = sketch.qr().q();
            let mut kq = DMatrix::zeros(n, rank);
            for c in 0..rank {
                let col: Vec<f64> = q.column(c).iter().copied().collect();
                kq.set_column(c, &DVector::from_vec(op.apply(&col)));
            }
            let core = q.tr_mul(&kq);
            (kq, core, Vec::new(), FactorMethod::NystromGaussian)
        }
    };
    let core = (&core + core.transpose()) * 0.5;

    let (lower, diag) = safeguarded_ldl(&core, ldl_threshold);
    // Z = |D|^{-1/2} L^{-1} (KQ)^T
    let mut z = kq.transpose();
    if !lower.solve_lower_triangular_with_diag_mut(&mut z, 1.0) {
        return Err(Error::Data("Nystrom core factor is singular".into()));
    }
    for (mut row, d) in z.row_iter_mut().zip(diag.iter()) {
        row /= d.abs().sqrt();
    }
    Ok(LowRankFactor {
        z,
        method,
        requested_rank: rank,
        trace_residual: None,
        pivots,
    })
}

/// `C = L D L^T` with unit lower `L`; pivots below `threshold` in magnitude
/// are replaced before they are used.
pub(crate) fn safeguarded_ldl(c: &DMatrix<f64>, threshold: f64) -> (DMatrix<f64>, Vec<f64>) {
    let k = c.nrows();
    let mut l = DMatrix::identity(k, k);
    let mut d = vec![0.0; k];
    for j in 0..k {
        let mut dj = c[(j, j)];
        for s in 0..j {
            dj -= l[(j, s)] * l[(j, s)] * d[s];
        }
        if dj.abs() < threshold {
            dj = if dj < 0.0 { -threshold } else { threshold };
        }
        d[j] = dj;
        for i in j + 1..k {
            let mut v = c[(i, j)];
            for s in 0..j {
                v -= l[(i, s)] * l[(j, s)] * d[s];
            }
            l[(i, j)] = v / dj;
        }
    }
    (l, d)
}
