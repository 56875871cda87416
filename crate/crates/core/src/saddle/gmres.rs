use super::{Preconditioner, SaddleOperator};

/// Outcome of one GMRES solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GmresStats {
    /// Arnoldi steps taken, one operator application each.
    pub iterations: usize,
    /// True relative residual `|b - A x| / |b|` of the returned iterate.
    pub final_rel_residual: f64,
    /// The Krylov space became invariant before the tolerance was met.
    pub breakdown: bool,
    pub converged: bool,
    /// Relative residual estimate after each step.
    pub residual_history: Vec<f64>,
}

/// Solves the saddle system with the given preconditioner.
pub fn gmres_solve(
    op: &SaddleOperator<'_>,
    precond: &Preconditioner,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, GmresStats) {
    assert_eq!(
        precond.size(),
        op.size(),
        "preconditioner does not match the operator"
    );
    gmres(|x| op.apply(x), |x| precond.apply(x), rhs, tol, max_iter)
}

/// Full (unrestarted) GMRES with right preconditioning, started from zero.
///
/// Iterates on `A M^{-1} u = b` and returns `x = M^{-1} u`. Orthogonalization
/// is modified Gram-Schmidt with one reorthogonalization pass. When the
/// residual estimate reaches `tol`, the true residual is computed and
/// iteration continues if it is still above `tol`.
pub fn gmres(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_m_inv: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, GmresStats) {
    let n = rhs.len();
    let beta = norm(rhs);
    let mut stats = GmresStats::default();
    if beta == 0.0 {
        stats.converged = true;
        return (vec![0.0; n], stats);
    }

    let mut basis: Vec<Vec<f64>> = vec![rhs.iter().map(|r| r / beta).collect()];
    // columns of the Hessenberg matrix, already rotated into triangular form
    let mut r: Vec<Vec<f64>> = Vec::new();
    let mut rotations: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];

    let solution = |r: &[Vec<f64>], g: &[f64], basis: &[Vec<f64>]| -> Vec<f64> {
        let k = r.len();
        let mut coef = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| r[j][i] * coef[j]).sum();
            coef[i] = (g[i] - s) / r[i][i];
        }
        let mut u = vec![0.0; n];
        for (c, v) in coef.iter().zip(basis) {
            u.iter_mut().zip(v).for_each(|(ui, vi)| *ui += c * vi);
        }
        apply_m_inv(&u)
    };
    let true_residual = |x: &[f64]| -> f64 {
        let ax = apply_a(x);
        let res: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        norm(&res) / beta
    };

    let mut x = vec![0.0; n];
    let mut rel = 1.0;
    while stats.iterations < max_iter {
        let j = stats.iterations;
        let z = apply_m_inv(&basis[j]);
        let mut w = apply_a(&z);
        let w_norm = norm(&w);
        let mut h = vec![0.0; j + 2];
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[i] += c;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let h_next = norm(&w);
        h[j + 1] = h_next;

        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = c * a + s * b;
            h[i + 1] = -s * a + c * b;
        }
        let (c, s) = givens(h[j], h[j + 1]);
        h[j] = c * h[j] + s * h[j + 1];
        h.truncate(j + 1);
        rotations.push((c, s));
        g.push(-s * g[j]);
        g[j] *= c;
        r.push(h);
        stats.iterations += 1;

        rel = g[j + 1].abs() / beta;
        stats.residual_history.push(rel);

        let invariant = h_next <= 1e-14 * w_norm.max(f64::MIN_POSITIVE);
        if rel <= tol || invariant || stats.iterations == max_iter {
            x = solution(&r, &g, &basis);
            rel = true_residual(&x);
            if rel <= tol {
                stats.converged = true;
                break;
            }
            if invariant {
                stats.breakdown = true;
                break;
            }
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    }
    stats.final_rel_residual = rel;
    (x, stats)
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let h = a.hypot(b);
        (a / h, b / h)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
