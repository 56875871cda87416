//! Seeded synthetic classification problems with balanced classes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Two 2-D Gaussian blobs separated by an empty band of width 2.
    Blobs,
    /// Two noisy concentric rings in 2-D (radii 1 and 2).
    Circles,
    /// `d` standard normal features; the label thresholds a sum of radial
    /// terms over consecutive feature triples at its sample median.
    Anova,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::Blobs => "blobs",
            SyntheticKind::Circles => "circles",
            SyntheticKind::Anova => "anova",
        })
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(SyntheticKind::Blobs),
            "circles" => Ok(SyntheticKind::Circles),
            "anova" => Ok(SyntheticKind::Anova),
            _ => Err(Error::Config(format!("unknown synthetic dataset `{s}`"))),
        }
    }
}

/// `n` points (`n` even, at least 2) of the given kind. `d` is only used by
/// [`SyntheticKind::Anova`].
pub fn generate(kind: SyntheticKind, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "synthetic size must be even and at least 2, got {n}"
        )));
    }
    match kind {
        SyntheticKind::Blobs => Ok(separable_blobs(n, seed)),
        SyntheticKind::Circles => Ok(concentric_circles(n, 0.1, seed)),
        SyntheticKind::Anova => anova_problem(n, d, seed),
    }
}

/// Class `+1` around `(2, 0)`, class `-1` around `(-2, 0)`, unit spread,
/// with every point at least 1 away from the line `x_0 = 0`.
pub fn separable_blobs(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, 0.7).expect("valid normal");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let x0 = loop {
            let x = 2.0 + spread.sample(&mut rng);
            if x >= 1.0 {
                break x;
            }
        };
        rows.push(vec![y * x0, spread.sample(&mut rng)]);
        labels.push(y);
    }
    Dataset::from_rows(&rows, labels).expect("balanced labels")
}

/// Inner ring (radius 1) is class `+1`, outer ring (radius 2) class `-1`;
/// radial noise has standard deviation `noise`.
pub fn concentric_circles(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (r, y) = if i % 2 == 0 { (1.0, 1.0) } else { (2.0, -1.0) };
        let angle = rng.random_range(0.0..2.0 * PI);
        let g: f64 = StandardNormal.sample(&mut rng);
        let radius = r + noise * g;
        rows.push(vec![radius * angle.cos(), radius * angle.sin()]);
        labels.push(y);
    }
    Dataset::from_rows(&rows, labels).expect("balanced labels")
}

/// Standard normal features; `score = sum_l (|x_{W_l}|^2 / |W_l| - 1) w_l`
/// over consecutive triples `W_l` with decreasing weights, labelled `+1`
/// above the sample median.
pub fn anova_problem(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if d == 0 {
        return Err(Error::Config("feature count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = DMatrix::from_fn(n, d, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let scores: Vec<f64> = (0..n)
        .map(|i| {
            (0..d)
                .step_by(3)
                .enumerate()
                .map(|(l, start)| {
                    let end = (start + 3).min(d);
                    let r2: f64 = (start..end).map(|j| points[(i, j)].powi(2)).sum();
                    (r2 / (end - start) as f64 - 1.0) / (l + 1) as f64
                })
                .sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut labels = vec![-1.0; n];
    for &i in &order[n / 2..] {
        labels[i] = 1.0;
    }
    Dataset::new(points, labels)
}
