//! Nonequispaced FFT building blocks on the torus `[-1/2, 1/2)^d`: Gaussian
//! spreading window, multi-dimensional FFT passes and the precomputed
//! per-node window footprints.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Truncated Gaussian spreading window on a grid of `n` points per
/// dimension with cutoff `m`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussianWindow {
    pub n: usize,
    pub m: usize,
    /// Shape parameter `2 sigma m / ((2 sigma - 1) pi)`.
    pub b: f64,
    norm: f64,
}

impl GaussianWindow {
    pub fn new(n: usize, m: usize, oversampling: f64) -> Self {
        let b = 2.0 * oversampling * m as f64 / ((2.0 * oversampling - 1.0) * PI);
        Self {
            n,
            m,
            b,
            norm: (PI * b).sqrt().recip(),
        }
    }

    /// Points touched per dimension.
    pub fn width(&self) -> usize {
        2 * self.m + 1
    }

    /// `phi(x - l/n)` where `u = n x`.
    #[inline]
    fn weight(&self, u: f64, l: i64) -> f64 {
        let t = u - l as f64;
        self.norm * (-(t * t) / self.b).exp()
    }

    /// `1 / (n * phi_hat(k))`, the per-dimension deconvolution factor.
    pub fn deconvolution(&self, k: i64) -> f64 {
        let k = k as f64;
        (self.b * PI * PI * k * k / (self.n * self.n) as f64).exp()
    }
}

/// Window footprints of a node set: for each node and dimension the first
/// grid index touched and the `2m + 1` weights.
#[derive(Debug, Clone)]
pub(crate) struct Footprints {
    dim: usize,
    width: usize,
    starts: Vec<i64>,
    weights: Vec<f64>,
}

impl Footprints {
    /// `nodes` is row-major `count x dim` in torus coordinates.
    pub fn new(nodes: &[f64], dim: usize, window: &GaussianWindow) -> Self {
        let count = nodes.len() / dim;
        let width = window.width();
        let mut starts = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count * dim * width);
        for &x in nodes {
            let u = x * window.n as f64;
            let start = u.floor() as i64 - window.m as i64;
            starts.push(start);
            weights.extend((0..width as i64).map(|a| window.weight(u, start + a)));
        }
        Self {
            dim,
            width,
            starts,
            weights,
        }
    }

    #[inline]
    fn node(&self, i: usize) -> (&[i64], &[f64]) {
        let d = self.dim;
        (
            &self.starts[i * d..(i + 1) * d],
            &self.weights[i * d * self.width..(i + 1) * d * self.width],
        )
    }

    /// Adds `v_i phi(x - l/n)` of every node onto the periodic grid.
    pub fn spread(&self, v: &[f64], grid: &mut [Complex64], n: usize) {
        let w = self.width;
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let (s, wt) = self.node(i);
            match self.dim {
                1 => {
                    for a in 0..w {
                        grid[wrap(s[0] + a as i64, n)].re += vi * wt[a];
                    }
                }
                2 => {
                    for a in 0..w {
                        let row = wrap(s[0] + a as i64, n) * n;
                        let va = vi * wt[a];
                        for b in 0..w {
                            grid[row + wrap(s[1] + b as i64, n)].re += va * wt[w + b];
                        }
                    }
                }
                _ => {
                    for a in 0..w {
                        let plane = wrap(s[0] + a as i64, n) * n;
                        let va = vi * wt[a];
                        for b in 0..w {
                            let row = (plane + wrap(s[1] + b as i64, n)) * n;
                            let vb = va * wt[w + b];
                            for c in 0..w {
                                grid[row + wrap(s[2] + c as i64, n)].re += vb * wt[2 * w + c];
                            }
                        }
                    }
                }
            }
        }
    }

    /// `sum_l grid_l phi(x_i - l/n)` (real part) for every node.
    pub fn gather(&self, grid: &[Complex64], n: usize, out: &mut [f64]) {
        let w = self.width;
        for (i, o) in out.iter_mut().enumerate() {
            let (s, wt) = self.node(i);
            let mut acc = 0.0;
            match self.dim {
                1 => {
                    for a in 0..w {
                        acc += grid[wrap(s[0] + a as i64, n)].re * wt[a];
                    }
                }
                2 => {
                    for a in 0..w {
                        let row = wrap(s[0] + a as i64, n) * n;
                        let mut inner = 0.0;
                        for b in 0..w {
                            inner += grid[row + wrap(s[1] + b as i64, n)].re * wt[w + b];
                        }
                        acc += inner * wt[a];
                    }
                }
                _ => {
                    for a in 0..w {
                        let plane = wrap(s[0] + a as i64, n) * n;
                        let mut mid = 0.0;
                        for b in 0..w {
                            let row = (plane + wrap(s[1] + b as i64, n)) * n;
                            let mut inner = 0.0;
                            for c in 0..w {
                                inner += grid[row + wrap(s[2] + c as i64, n)].re * wt[2 * w + c];
                            }
                            mid += inner * wt[w + b];
                        }
                        acc += mid * wt[a];
                    }
                }
            }
            *o = acc;
        }
    }
}

#[inline]
pub(crate) fn wrap(l: i64, n: usize) -> usize {
    l.rem_euclid(n as i64) as usize
}

/// In-place `d`-dimensional FFT of a row-major cube with side `n`.
pub(crate) fn fft_nd(data: &mut [Complex64], n: usize, dim: usize, fft: &Arc<dyn Fft<f64>>) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    // last axis is contiguous
    for chunk in data.chunks_exact_mut(n) {
        fft.process_with_scratch(chunk, &mut scratch);
    }
    let mut line = vec![Complex64::default(); n];
    for axis in 0..dim.saturating_sub(1) {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for base_block in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = base_block + offset;
                for (k, x) in line.iter_mut().enumerate() {
                    *x = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, x) in line.iter().enumerate() {
                    data[base + k * stride] = *x;
                }
            }
        }
    }
}

pub(crate) fn plan_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

/// Visits every multi-index of `{-h, .., h-1}^dim` (with `h = side/2`) in
/// row-major order together with its row-major storage offset on a cube of
/// side `grid` (negative entries wrap).
pub(crate) fn for_each_frequency(
    side: usize,
    dim: usize,
    grid: usize,
    mut f: impl FnMut(&[i64], usize),
) {
    let h = (side / 2) as i64;
    let mut idx = vec![-h; dim];
    let total = side.pow(dim as u32);
    for _ in 0..total {
        let offset = idx
            .iter()
            .fold(0usize, |acc, &k| acc * grid + wrap(k, grid));
        f(&idx, offset);
        for t in (0..dim).rev() {
            idx[t] += 1;
            if idx[t] < h {
                break;
            }
            idx[t] = -h;
        }
    }
}
