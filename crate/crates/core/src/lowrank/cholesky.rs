use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FactorMethod, LowRankFactor};
use crate::error::{Error, Result};
use crate::kernel::KernelOperator;

/// Randomly pivoted Cholesky stops once the residual trace falls below this
/// fraction of the initial trace.
pub const RANDOM_PIVOT_RELATIVE_STOP: f64 = 1e-12;

/// Residual diagonals more negative than this fraction of the largest
/// initial diagonal mean the operator is not PSD.
const NEGATIVE_PIVOT_TOL: f64 = 1e-8;

/// Partial Cholesky with the largest residual diagonal as pivot (ties go to
/// the smallest index). Stops early once the largest residual diagonal or
/// the residual trace is at most `err_tol`.
pub fn pivoted_cholesky_greedy(
    op: &dyn KernelOperator,
    rank: usize,
    err_tol: f64,
) -> Result<LowRankFactor> {
    partial_cholesky(op, rank, FactorMethod::CholeskyGreedy, |residual, _| {
        let (p, &best) =
            residual
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |acc, (i, d)| {
                    if *d > *acc.1 {
                        (i, d)
                    } else {
                        acc
                    }
                });
        let trace: f64 = residual.iter().map(|d| d.max(0.0)).sum();
        (best > err_tol && trace > err_tol).then_some(p)
    })
}

/// Partial Cholesky with pivots sampled in proportion to the (clamped)
/// residual diagonal. Returns early with a lower achieved rank when the
/// residual trace vanishes.
pub fn pivoted_cholesky_random(
    op: &dyn KernelOperator,
    rank: usize,
    seed: u64,
) -> Result<LowRankFactor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stop = None;
    partial_cholesky(
        op,
        rank,
        FactorMethod::CholeskyRandom,
        |residual, initial_trace| {
            let stop = *stop.get_or_insert(RANDOM_PIVOT_RELATIVE_STOP * initial_trace);
            let trace: f64 = residual.iter().map(|d| d.max(0.0)).sum();
            if trace <= stop || trace <= 0.0 {
                return None;
            }
            let mut target = rng.random::<f64>() * trace;
            let mut last_positive = None;
            for (i, &d) in residual.iter().enumerate() {
                if d > 0.0 {
                    last_positive = Some(i);
                    target -= d;
                    if target < 0.0 {
                        return Some(i);
                    }
                }
            }
            last_positive
        },
    )
}

fn partial_cholesky(
    op: &dyn KernelOperator,
    rank: usize,
    method: FactorMethod,
    mut choose: impl FnMut(&[f64], f64) -> Option<usize>,
) -> Result<LowRankFactor> {
    if rank == 0 {
        return Err(Error::Config("rank must be at least 1".into()));
    }
    let n = op.size();
    let k = rank.min(n);
    let mut residual = op.diagonal();
    let initial_trace: f64 = residual.iter().sum();
    let max_diag = residual.iter().copied().fold(0.0, f64::max);
    let neg_tol = -NEGATIVE_PIVOT_TOL * max_diag.max(f64::MIN_POSITIVE);
    if let Some((index, &value)) = residual.iter().enumerate().find(|(_, &d)| d < neg_tol) {
        return Err(Error::NotPositiveSemidefinite { index, value });
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut pivots = Vec::with_capacity(k);
    while rows.len() < k {
        let Some(p) = choose(&residual, initial_trace) else {
            break;
        };
        let pivot = residual[p];
        if pivot <= 0.0 {
            break;
        }
        let mut col = op.column(p);
        for row in &rows {
            let scale = row[p];
            if scale != 0.0 {
                col.iter_mut().zip(row).for_each(|(c, r)| *c -= scale * r);
            }
        }
        let root = pivot.sqrt();
        col.iter_mut().for_each(|c| *c /= root);
        col[p] = root;
        for (d, c) in residual.iter_mut().zip(&col) {
            *d -= c * c;
        }
        residual[p] = 0.0;
        if let Some((index, &value)) = residual.iter().enumerate().find(|(_, &d)| d < neg_tol) {
            return Err(Error::NotPositiveSemidefinite { index, value });
        }
        rows.push(col);
        pivots.push(p);
    }

    let z = DMatrix::from_fn(rows.len(), n, |r, j| rows[r][j]);
    Ok(LowRankFactor {
        z,
        method,
        requested_rank: rank,
        trace_residual: Some(residual.iter().sum()),
        pivots,
    })
}
