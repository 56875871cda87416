use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::lowrank::StackedFactor;

/// Which approximation of `YKY + Theta` the preconditioner uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondKind {
    /// No preconditioning at all.
    Identity,
    /// `A_hat = Theta`.
    Diagonal,
    /// `A_hat = Theta + Y Z^T Z Y`.
    LowRank,
}

impl fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecondKind::Identity => "identity",
            PrecondKind::Diagonal => "diagonal",
            PrecondKind::LowRank => "low-rank",
        })
    }
}

impl FromStr for PrecondKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(PrecondKind::Identity),
            "diagonal" => Ok(PrecondKind::Diagonal),
            "low-rank" => Ok(PrecondKind::LowRank),
            _ => Err(Error::Config(format!("unknown preconditioner kind `{s}`"))),
        }
    }
}

/// Block triangular saddle preconditioner with a cached capacitance
/// factorization `I_k + Z Y Theta^{-1} Y Z^T = LU`.
///
/// [`Preconditioner::refresh`] must be called with the current barrier
/// diagonal before every solve.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PrecondKind,
    y: Vec<f64>,
    /// `Z Y`, shape `k x n`.
    zy: DMatrix<f64>,
    theta_inv: Vec<f64>,
    capacitance: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    fallback: bool,
}

impl Preconditioner {
    pub fn identity(y: &[f64]) -> Self {
        Self::build(PrecondKind::Identity, y, DMatrix::zeros(0, y.len()))
    }

    pub fn diagonal(y: &[f64]) -> Self {
        Self::build(PrecondKind::Diagonal, y, DMatrix::zeros(0, y.len()))
    }

    pub fn low_rank(factor: &StackedFactor, y: &[f64]) -> Result<Self> {
        if factor.size() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: factor.size(),
            });
        }
        let mut zy = factor.matrix().clone();
        for (mut col, &yj) in zy.column_iter_mut().zip(y) {
            col *= yj;
        }
        Ok(Self::build(PrecondKind::LowRank, y, zy))
    }

    fn build(kind: PrecondKind, y: &[f64], zy: DMatrix<f64>) -> Self {
        Self {
            kind,
            y: y.to_vec(),
            zy,
            theta_inv: vec![1.0; y.len()],
            capacitance: None,
            fallback: false,
        }
    }

    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.zy.nrows()
    }

    /// `n + 1`.
    pub fn size(&self) -> usize {
        self.y.len() + 1
    }

    /// True when the last refresh found the capacitance matrix singular and
    /// the preconditioner fell back to `A_hat = Theta`.
    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    /// Rebuilds the capacitance matrix for a new barrier diagonal.
    pub fn refresh(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.y.len(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config(
                "barrier diagonal must be positive and finite".into(),
            ));
        }
        self.theta_inv = theta.iter().map(|t| 1.0 / t).collect();
        self.fallback = false;
        self.capacitance = None;
        if self.kind != PrecondKind::LowRank || self.rank() == 0 {
            return Ok(());
        }
        match self.factor_capacitance() {
            Ok(lu) => self.capacitance = Some(lu),
            Err(e) => {
                log::warn!("{e}; using the diagonal preconditioner for this iteration");
                self.fallback = true;
            }
        }
        Ok(())
    }

    /// The current capacitance matrix `I_k + Z Y Theta^{-1} Y Z^T`.
    pub fn capacitance_matrix(&self) -> DMatrix<f64> {
        let mut scaled = self.zy.clone();
        for (mut col, &t) in scaled.column_iter_mut().zip(&self.theta_inv) {
            col *= t;
        }
        let mut c = scaled * self.zy.transpose();
        for i in 0..c.nrows() {
            c[(i, i)] += 1.0;
        }
        c
    }

    fn factor_capacitance(&self) -> Result<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let c = self.capacitance_matrix();
        let scale = c.diagonal().amax();
        let lu = c.lu();
        let u = lu.u();
        let min_pivot = u
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |m, d| m.min(d.abs()));
        if !(min_pivot > f64::EPSILON * scale) || !min_pivot.is_finite() {
            return Err(Error::SingularCapacitance);
        }
        Ok(lu)
    }

    /// `A_hat^{-1} g` with `A_hat = Theta + Y Z^T Z Y` (or `Theta` alone).
    pub fn solve_block(&self, g: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = g.iter().zip(&self.theta_inv).map(|(a, t)| a * t).collect();
        if let Some(lu) = &self.capacitance {
            let t = &self.zy * DVector::from_column_slice(&x);
            let s = lu
                .solve(&t)
                .expect("capacitance factorization was checked at refresh");
            let back = self.zy.tr_mul(&s);
            for ((xi, b), ti) in x.iter_mut().zip(back.iter()).zip(&self.theta_inv) {
                *xi -= ti * b;
            }
        }
        x
    }

    /// Solves `[A_hat 0; -y^T -1] [x1; x2] = [g1; g2]`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let n = self.y.len();
        assert_eq!(g.len(), n + 1, "preconditioner size mismatch");
        if self.kind == PrecondKind::Identity {
            return g.to_vec();
        }
        let mut x = self.solve_block(&g[..n]);
        let x2 = -self.y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - g[n];
        x.push(x2);
        x
    }
}
