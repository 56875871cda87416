//! Barrier interior point iteration for the soft-margin SVM dual
//!
//! ```text
//! max  e^T a - 1/2 a^T Y K Y a   s.t.  0 <= a <= C,  y^T a = 0
//! ```
//!
//! with inexact Newton steps from preconditioned GMRES, and the classifier
//! built from its solution.

mod model;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelOperator;
use crate::saddle::{gmres_solve, GmresStats, Preconditioner, SaddleOperator};

pub use self::model::{compute_bias, PredictBackend, TrainedModel, MODEL_FORMAT_VERSION};

/// Interior point parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpmConfig {
    /// Box bound on the dual coefficients.
    pub c: f64,
    /// Barrier reduction factor per iteration.
    pub sigma: f64,
    /// Fraction-to-boundary factor for both step lengths.
    pub gamma0: f64,
    pub tol_ip: f64,
    pub max_ip: usize,
    pub tol_gmres: f64,
    pub max_gmres: usize,
    pub mu0: f64,
    /// Seed of the jitter in the starting point.
    pub seed: u64,
    /// Stop with a stall once GMRES has failed to converge in more than this
    /// many consecutive iterations.
    pub max_gmres_failures: usize,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            c: 0.4,
            sigma: 0.6,
            gamma0: 0.99995,
            tol_ip: 0.1,
            max_ip: 50,
            tol_gmres: 1e-3,
            max_gmres: 100,
            mu0: 1.0,
            seed: 0,
            max_gmres_failures: 3,
        }
    }
}

impl IpmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("C", self.c)?;
        positive("sigma", self.sigma)?;
        positive("gamma0", self.gamma0)?;
        positive("tol_ip", self.tol_ip)?;
        positive("tol_gmres", self.tol_gmres)?;
        positive("mu0", self.mu0)?;
        if self.sigma >= 1.0 {
            return Err(Error::Config(format!(
                "sigma must be below 1, got {}",
                self.sigma
            )));
        }
        if self.gamma0 >= 1.0 {
            return Err(Error::Config(format!(
                "gamma0 must be below 1, got {}",
                self.gamma0
            )));
        }
        if self.max_ip == 0 || self.max_gmres == 0 {
            return Err(Error::Config("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

/// Current iterate of the interior point method.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmState {
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
    /// `mu (1/alpha^2 + 1/(C - alpha)^2)`.
    pub theta: Vec<f64>,
    /// `y^T alpha`.
    pub xi_alpha: f64,
    /// `e - YKY alpha + lambda y + mu/alpha - mu/(C - alpha)`.
    pub xi_lambda: Vec<f64>,
    pub it: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IpmStatus {
    Converged,
    MaxIterations,
    Stalled,
}

impl IpmStatus {
    pub fn name(self) -> &'static str {
        match self {
            IpmStatus::Converged => "converged",
            IpmStatus::MaxIterations => "max-iterations",
            IpmStatus::Stalled => "stalled",
        }
    }
}

impl std::fmt::Display for IpmStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Diagnostics of one interior point iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub it: usize,
    pub mu: f64,
    pub s_alpha: f64,
    pub s_lambda: f64,
    pub rel_xi_alpha: f64,
    pub rel_xi_lambda: f64,
    /// `min_j min(alpha_j, C - alpha_j)` after the step.
    pub boundary_gap: f64,
    pub gmres: GmresStats,
    pub precond_fallback: bool,
}

/// Result of [`ipm_solve`].
#[derive(Debug, Clone)]
pub struct IpmOutcome {
    pub state: IpmState,
    pub status: IpmStatus,
    pub xi_alpha0: f64,
    pub xi_lambda0_norm: f64,
    pub history: Vec<IterationRecord>,
    /// `K (y o alpha)` at the final iterate.
    pub k_y_alpha: Vec<f64>,
}

impl IpmOutcome {
    pub fn iterations(&self) -> usize {
        self.state.it
    }

    pub fn rel_xi_alpha(&self) -> f64 {
        relative(self.state.xi_alpha.abs(), self.xi_alpha0.abs())
    }

    pub fn rel_xi_lambda(&self) -> f64 {
        relative(norm(&self.state.xi_lambda), self.xi_lambda0_norm)
    }

    pub fn mean_gmres_iterations(&self) -> f64 {
        if self.history.is_empty() {
            return 0.0;
        }
        self.history
            .iter()
            .map(|r| r.gmres.iterations as f64)
            .sum::<f64>()
            / self.history.len() as f64
    }
}

/// Starting point `alpha_j = C (0.4 + 0.2 u_j)` with seeded uniform `u_j`.
pub fn initial_alpha(n: usize, c: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| c * (0.4 + 0.2 * rng.random::<f64>()))
        .collect()
}

/// `mu (1/alpha^2 + 1/(C - alpha)^2)` elementwise.
pub fn barrier_diagonal(alpha: &[f64], c: f64, mu: f64) -> Vec<f64> {
    alpha
        .iter()
        .map(|&a| mu * (1.0 / (a * a) + 1.0 / ((c - a) * (c - a))))
        .collect()
}

/// Dual residual `e - YKY alpha + lambda y + mu/alpha - mu/(C - alpha)`
/// given `k_y_alpha = K (y o alpha)`.
pub fn dual_residual(
    alpha: &[f64],
    lambda: f64,
    y: &[f64],
    k_y_alpha: &[f64],
    c: f64,
    mu: f64,
) -> Vec<f64> {
    alpha
        .iter()
        .zip(y)
        .zip(k_y_alpha)
        .map(|((&a, &yi), &ka)| 1.0 - yi * ka + lambda * yi + mu / a - mu / (c - a))
        .collect()
}

/// Right-hand side of the Newton system, using one kernel application.
pub fn assemble_newton_rhs(
    op: &dyn KernelOperator,
    alpha: &[f64],
    lambda: f64,
    y: &[f64],
    c: f64,
    mu: f64,
) -> Vec<f64> {
    let ya: Vec<f64> = y.iter().zip(alpha).map(|(a, b)| a * b).collect();
    let k_y_alpha = op.apply(&ya);
    newton_rhs(alpha, lambda, y, &k_y_alpha, c, mu)
}

fn newton_rhs(
    alpha: &[f64],
    lambda: f64,
    y: &[f64],
    k_y_alpha: &[f64],
    c: f64,
    mu: f64,
) -> Vec<f64> {
    let mut rhs = dual_residual(alpha, lambda, y, k_y_alpha, c, mu);
    rhs.push(dot(y, alpha));
    rhs
}

/// Step lengths `(s_alpha, s_lambda)`: the largest step keeping
/// `alpha + s d_alpha` in `[0, C]`, capped at 1 and scaled by `gamma0`. The
/// multiplier is unconstrained, so `s_lambda = gamma0`.
pub fn step_lengths(alpha: &[f64], d_alpha: &[f64], gamma0: f64, c: f64) -> (f64, f64) {
    let mut s_max = 1.0f64;
    for (&a, &d) in alpha.iter().zip(d_alpha) {
        if d < 0.0 {
            s_max = s_max.min(a / -d);
        } else if d > 0.0 {
            s_max = s_max.min((c - a) / d);
        }
    }
    (gamma0 * s_max, gamma0)
}

/// Runs the interior point iteration on the kernel `op` with labels `y`.
///
/// The preconditioner is refreshed with the barrier diagonal at every
/// iteration. A stall is reported through [`IpmOutcome::status`] together
/// with the last accepted iterate.
pub fn ipm_solve(
    op: &dyn KernelOperator,
    y: &[f64],
    precond: &mut Preconditioner,
    cfg: &IpmConfig,
) -> Result<IpmOutcome> {
    cfg.validate()?;
    let n = op.size();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if precond.size() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: precond.size(),
        });
    }
    let c = cfg.c;

    let alpha = initial_alpha(n, c, cfg.seed);
    let lambda = 0.0;
    let mut mu = cfg.mu0;
    let mut k_y_alpha = op.apply(&hadamard(y, &alpha));
    let xi_lambda = dual_residual(&alpha, lambda, y, &k_y_alpha, c, mu);
    let xi_alpha = dot(y, &alpha);
    let xi_alpha0 = xi_alpha;
    let xi_lambda0_norm = norm(&xi_lambda);
    let mut state = IpmState {
        theta: barrier_diagonal(&alpha, c, mu),
        alpha,
        lambda,
        mu,
        xi_alpha,
        xi_lambda,
        it: 0,
    };

    let mut history = Vec::new();
    let mut failures = 0;
    let mut status = IpmStatus::MaxIterations;
    loop {
        let rel_a = relative(state.xi_alpha.abs(), xi_alpha0.abs());
        let rel_l = relative(norm(&state.xi_lambda), xi_lambda0_norm);
        if state.mu <= cfg.tol_ip && rel_a <= cfg.tol_ip && rel_l <= cfg.tol_ip {
            status = IpmStatus::Converged;
            break;
        }
        if state.it >= cfg.max_ip {
            break;
        }

        mu *= cfg.sigma;
        let theta = barrier_diagonal(&state.alpha, c, mu);
        precond.refresh(&theta)?;
        let rhs = newton_rhs(&state.alpha, state.lambda, y, &k_y_alpha, c, mu);
        let saddle = SaddleOperator::new(op, y, &theta)?;
        let (dir, gmres) = gmres_solve(&saddle, precond, &rhs, cfg.tol_gmres, cfg.max_gmres);
        if dir.iter().any(|v| !v.is_finite()) {
            return Err(Error::Stalled {
                iterations: state.it,
            });
        }
        failures = if gmres.converged { 0 } else { failures + 1 };

        let (s_alpha, s_lambda) = step_lengths(&state.alpha, &dir[..n], cfg.gamma0, c);
        let alpha: Vec<f64> = state
            .alpha
            .iter()
            .zip(&dir[..n])
            .map(|(a, d)| a + s_alpha * d)
            .collect();
        if let Some(j) = alpha.iter().position(|&a| !(a > 0.0 && a < c)) {
            return Err(Error::Model(format!(
                "iterate left the box at index {j} (alpha = {})",
                alpha[j]
            )));
        }
        let lambda = state.lambda + s_lambda * dir[n];
        k_y_alpha = op.apply(&hadamard(y, &alpha));
        state = IpmState {
            xi_alpha: dot(y, &alpha),
            xi_lambda: dual_residual(&alpha, lambda, y, &k_y_alpha, c, mu),
            theta,
            alpha,
            lambda,
            mu,
            it: state.it + 1,
        };
        let record = IterationRecord {
            it: state.it,
            mu,
            s_alpha,
            s_lambda,
            rel_xi_alpha: relative(state.xi_alpha.abs(), xi_alpha0.abs()),
            rel_xi_lambda: relative(norm(&state.xi_lambda), xi_lambda0_norm),
            boundary_gap: state
                .alpha
                .iter()
                .fold(f64::INFINITY, |m, &a| m.min(a).min(c - a)),
            gmres,
            precond_fallback: precond.is_fallback(),
        };
        log::debug!(
            "ipm it {}: mu {:.3e} s_alpha {:.3e} xi_alpha {:.3e} xi_lambda {:.3e} gmres {} ({:.2e})",
            record.it,
            mu,
            s_alpha,
            record.rel_xi_alpha,
            record.rel_xi_lambda,
            record.gmres.iterations,
            record.gmres.final_rel_residual
        );
        history.push(record);
        if failures > cfg.max_gmres_failures {
            log::warn!("GMRES failed to converge in {failures} consecutive iterations");
            status = IpmStatus::Stalled;
            break;
        }
    }

    Ok(IpmOutcome {
        state,
        status,
        xi_alpha0,
        xi_lambda0_norm,
        history,
        k_y_alpha,
    })
}

fn relative(value: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        value / reference
    } else if value > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

pub(crate) fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
