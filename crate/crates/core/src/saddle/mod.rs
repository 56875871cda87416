//! The Newton saddle system of the barrier subproblem and its iterative
//! solution.
//!
//! The system matrix is
//!
//! ```text
//! [ YKY + Theta   -y ]
//! [ -y^T           0 ]
//! ```
//!
//! and is solved by right-preconditioned GMRES with the block lower
//! triangular preconditioner `[A_hat 0; -y^T -1]`, where
//! `A_hat = Theta + Y Z^T Z Y` is inverted through the Woodbury identity.

mod gmres;
mod precond;

use crate::error::{Error, Result};
use crate::kernel::KernelOperator;

pub use self::gmres::{gmres, gmres_solve, GmresStats};
pub use self::precond::{PrecondKind, Preconditioner};

/// Matrix-free action of the saddle matrix for fixed `y` and `Theta`.
pub struct SaddleOperator<'a> {
    kernel: &'a dyn KernelOperator,
    y: &'a [f64],
    theta: &'a [f64],
}

impl<'a> SaddleOperator<'a> {
    pub fn new(kernel: &'a dyn KernelOperator, y: &'a [f64], theta: &'a [f64]) -> Result<Self> {
        let n = kernel.size();
        for len in [y.len(), theta.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        if theta.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config(
                "barrier diagonal must be positive and finite".into(),
            ));
        }
        Ok(Self { kernel, y, theta })
    }

    /// `n + 1`.
    pub fn size(&self) -> usize {
        self.y.len() + 1
    }

    pub fn kernel(&self) -> &dyn KernelOperator {
        self.kernel
    }

    /// `[(YKY + Theta) v - y w; -y^T v]` for `x = [v; w]`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.y.len();
        assert_eq!(x.len(), n + 1, "saddle operator size mismatch");
        let (v, w) = (&x[..n], x[n]);
        let yv: Vec<f64> = self.y.iter().zip(v).map(|(a, b)| a * b).collect();
        let kyv = self.kernel.apply(&yv);
        let mut out = Vec::with_capacity(n + 1);
        out.extend((0..n).map(|i| self.y[i] * kyv[i] + self.theta[i] * v[i] - self.y[i] * w));
        out.push(-self.y.iter().zip(v).map(|(a, b)| a * b).sum::<f64>());
        out
    }
}
