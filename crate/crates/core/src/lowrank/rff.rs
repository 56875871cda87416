use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FactorMethod, LowRankFactor};
use crate::error::{Error, Result};
use crate::kernel::{GaussianKernel, WindowPoints};

/// Random Fourier features for `exp(-|x - x'|^2 / l^2)`.
///
/// Frequencies are drawn from the kernel's spectral density, a normal
/// distribution with per-coordinate variance `2 / l^2`; phases are uniform on
/// `[0, 2 pi)`. Row `i` of `Z` is `sqrt(2/k) cos(w_i . x_j + b_i)`.
pub fn random_fourier_features(
    points: &WindowPoints,
    kernel: GaussianKernel,
    rank: usize,
    seed: u64,
) -> Result<LowRankFactor> {
    if rank == 0 {
        return Err(Error::Config("rank must be at least 1".into()));
    }
    let d = points.dim();
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectral = Normal::new(0.0, 2f64.sqrt() / kernel.length_scale)
        .map_err(|e| Error::Config(e.to_string()))?;

    let amplitude = (2.0 / rank as f64).sqrt();
    let mut z = DMatrix::zeros(rank, n);
    let mut w = vec![0.0; d];
    for i in 0..rank {
        w.iter_mut().for_each(|x| *x = spectral.sample(&mut rng));
        let phase = rng.random_range(0.0..2.0 * PI);
        for j in 0..n {
            let dot: f64 = w.iter().zip(points.point(j)).map(|(a, b)| a * b).sum();
            z[(i, j)] = amplitude * (dot + phase).cos();
        }
    }
    Ok(LowRankFactor {
        z,
        method: FactorMethod::Rff,
        requested_rank: rank,
        trace_residual: None,
        pivots: Vec::new(),
    })
}
