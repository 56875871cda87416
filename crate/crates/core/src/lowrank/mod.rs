//! Low-rank factorizations `K ~ Z^T Z` used to precondition the Newton
//! systems, and their stacking across ANOVA windows.

mod cholesky;
mod nystrom;
mod rff;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::cholesky::{
    pivoted_cholesky_greedy, pivoted_cholesky_random, RANDOM_PIVOT_RELATIVE_STOP,
};
pub use self::nystrom::{nystrom, NystromMode, DEFAULT_LDL_THRESHOLD};
pub use self::rff::random_fourier_features;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorMethod {
    CholeskyGreedy,
    CholeskyRandom,
    NystromColumns,
    NystromGaussian,
    Rff,
}

impl FactorMethod {
    pub const ALL: [FactorMethod; 5] = [
        FactorMethod::CholeskyGreedy,
        FactorMethod::CholeskyRandom,
        FactorMethod::NystromColumns,
        FactorMethod::NystromGaussian,
        FactorMethod::Rff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FactorMethod::CholeskyGreedy => "cholesky-greedy",
            FactorMethod::CholeskyRandom => "cholesky-random",
            FactorMethod::NystromColumns => "nystrom-columns",
            FactorMethod::NystromGaussian => "nystrom-gaussian",
            FactorMethod::Rff => "rff",
        }
    }
}

impl fmt::Display for FactorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FactorMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FactorMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown factorization method `{s}`")))
    }
}

/// `K ~ Z^T Z` with `Z` of shape `achieved_rank x n`.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    pub z: DMatrix<f64>,
    pub method: FactorMethod,
    pub requested_rank: usize,
    /// Residual trace `trace(K) - |Z|_F^2` for the Cholesky variants.
    pub trace_residual: Option<f64>,
    /// Pivot or sample indices, in selection order (empty for RFF and
    /// Gaussian-sketch Nystrom).
    pub pivots: Vec<usize>,
}

impl LowRankFactor {
    pub fn achieved_rank(&self) -> usize {
        self.z.nrows()
    }

    pub fn size(&self) -> usize {
        self.z.ncols()
    }

    /// `Z^T (Z v)`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        (self.z.tr_mul(&(&self.z * v))).data.into()
    }

    /// Dense `Z^T Z`; intended for tests and small problems.
    pub fn gram(&self) -> DMatrix<f64> {
        self.z.tr_mul(&self.z)
    }
}

/// Per-window factors with `sqrt(eta_l)` folded into each block, stored as
/// one `(sum k_l) x n` matrix.
#[derive(Debug, Clone)]
pub struct StackedFactor {
    z: DMatrix<f64>,
    block_ranks: Vec<usize>,
}

/// Stacks `factors[l]` scaled by `sqrt(weights[l])`.
pub fn stack_anova_factors(factors: &[LowRankFactor], weights: &[f64]) -> Result<StackedFactor> {
    if factors.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: factors.len(),
            got: weights.len(),
        });
    }
    let n = factors.first().map_or(0, LowRankFactor::size);
    if let Some(f) = factors.iter().find(|f| f.size() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.size(),
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Config("stacking weights must be nonnegative".into()));
    }
    let total: usize = factors.iter().map(LowRankFactor::achieved_rank).sum();
    let mut z = DMatrix::zeros(total, n);
    let mut row = 0;
    for (f, &w) in factors.iter().zip(weights) {
        let k = f.achieved_rank();
        z.rows_mut(row, k).copy_from(&(&f.z * w.sqrt()));
        row += k;
    }
    Ok(StackedFactor {
        z,
        block_ranks: factors.iter().map(LowRankFactor::achieved_rank).collect(),
    })
}

impl StackedFactor {
    /// A factor with no rows; the preconditioner then reduces to `Theta`.
    pub fn empty(n: usize) -> Self {
        Self {
            z: DMatrix::zeros(0, n),
            block_ranks: Vec::new(),
        }
    }

    pub fn from_matrix(z: DMatrix<f64>) -> Self {
        let k = z.nrows();
        Self {
            z,
            block_ranks: vec![k],
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn rank(&self) -> usize {
        self.z.nrows()
    }

    pub fn size(&self) -> usize {
        self.z.ncols()
    }

    pub fn block_ranks(&self) -> &[usize] {
        &self.block_ranks
    }

    /// `sum_l eta_l Z_l^T (Z_l v)`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(v);
        (self.z.tr_mul(&(&self.z * v))).data.into()
    }
}

#[cfg(test)]
mod tests;
