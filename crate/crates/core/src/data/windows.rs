use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Histogram range for mutual-information binning, in z-score units.
pub const MI_CLIP: f64 = 5.0;

/// Disjoint feature windows of the additive (ANOVA) Gaussian kernel.
///
/// Feature indices are 0-based. Window `l` carries weight `weights[l]` and
/// length-scale `length_scales[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindowing {
    pub windows: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    pub length_scales: Vec<f64>,
    /// Per-feature scores the windows were ranked by; empty for hand-built windows.
    #[serde(default)]
    pub mi_scores: Vec<f64>,
}

impl FeatureWindowing {
    /// Windows with uniform weights `1/P` and unit length-scales.
    pub fn new(windows: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        let p = windows.len();
        let w = Self {
            weights: vec![1.0 / p as f64; p],
            length_scales: vec![1.0; p],
            windows,
            mi_scores: Vec::new(),
        };
        w.validate(d)?;
        Ok(w)
    }

    /// One window over all `d <= 3` features.
    pub fn single(d: usize) -> Result<Self> {
        Self::new(vec![(0..d).collect()], d)
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn with_length_scales(mut self, length_scales: Vec<f64>) -> Result<Self> {
        if length_scales.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: length_scales.len(),
            });
        }
        if length_scales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config("length-scales must be positive".into()));
        }
        self.length_scales = length_scales;
        Ok(self)
    }

    /// Largest feature index referenced plus one.
    pub fn min_dim(&self) -> usize {
        self.windows
            .iter()
            .flatten()
            .map(|&j| j + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let p = self.len();
        if p == 0 {
            return Err(Error::Config(
                "at least one feature window is required".into(),
            ));
        }
        if p > d.div_ceil(3) {
            return Err(Error::Config(format!(
                "{p} windows exceed the limit ceil({d}/3) = {}",
                d.div_ceil(3)
            )));
        }
        if self.weights.len() != p || self.length_scales.len() != p {
            return Err(Error::Config(
                "one weight and one length-scale per window".into(),
            ));
        }
        let mut seen = vec![false; d];
        for w in &self.windows {
            if w.is_empty() || w.len() > 3 {
                return Err(Error::Config(format!(
                    "window {w:?} must hold between 1 and 3 features"
                )));
            }
            for &j in w {
                if j >= d {
                    return Err(Error::Config(format!(
                        "feature {j} out of range for d = {d}"
                    )));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::Config(format!("feature {j} appears in two windows")));
                }
            }
        }
        if self.weights.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config("window weights must be positive".into()));
        }
        if self
            .length_scales
            .iter()
            .any(|&l| !(l > 0.0 && l.is_finite()))
        {
            return Err(Error::Config("length-scales must be positive".into()));
        }
        Ok(())
    }
}

/// Plug-in mutual information (nats) between each feature and the label,
/// from equal-width histograms with `bins` bins over `[-5, 5]` (values
/// outside are clipped into the edge bins).
pub fn mutual_information_scores(data: &Dataset, bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::Config(
            "at least 2 histogram bins are required".into(),
        ));
    }
    let n = data.len();
    if n < bins {
        return Err(Error::Data(format!(
            "{n} samples cannot fill {bins} bins; use fewer bins"
        )));
    }
    let width = 2.0 * MI_CLIP / bins as f64;
    let nf = n as f64;
    let n_pos = data.labels.iter().filter(|&&y| y > 0.0).count() as f64;
    let label_marginal = [nf - n_pos, n_pos];

    let scores = data
        .points
        .column_iter()
        .map(|col| {
            // joint[bin][class], class 0 = negative
            let mut joint = vec![[0usize; 2]; bins];
            for (x, y) in col.iter().zip(&data.labels) {
                let b = ((x.clamp(-MI_CLIP, MI_CLIP) + MI_CLIP) / width) as usize;
                joint[b.min(bins - 1)][usize::from(*y > 0.0)] += 1;
            }
            let mut mi = 0.0;
            for cell in &joint {
                let bin_total = (cell[0] + cell[1]) as f64;
                for (c, &count) in cell.iter().enumerate() {
                    if count > 0 {
                        let count = count as f64;
                        mi += count / nf * (count * nf / (bin_total * label_marginal[c])).ln();
                    }
                }
            }
            mi.max(0.0)
        })
        .collect();
    Ok(scores)
}

/// Groups features into windows by descending score: ranks 1..=w form the
/// first window, the next `w` the second, and so on. At most `ceil(d/3)`
/// windows are formed, so smaller window sizes drop the lowest-ranked
/// features. Ties rank the smaller index first.
pub fn build_windows(mi_scores: &[f64], d: usize, window_size: usize) -> Result<FeatureWindowing> {
    if !(1..=3).contains(&window_size) {
        return Err(Error::Config(format!(
            "window size {window_size} must be 1, 2 or 3"
        )));
    }
    if mi_scores.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mi_scores.len(),
        });
    }
    if d == 0 {
        return Err(Error::Data("no features".into()));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| mi_scores[b].total_cmp(&mi_scores[a]).then(a.cmp(&b)));

    let windows: Vec<Vec<usize>> = order
        .chunks(window_size)
        .take(d.div_ceil(3))
        .map(<[usize]>::to_vec)
        .collect();
    let mut w = FeatureWindowing::new(windows, d)?;
    w.mi_scores = mi_scores.to_vec();
    Ok(w)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    /// H(X) + H(Y) - H(X, Y) from hashed counts.
    fn entropy_oracle(bin_of: &[usize], labels: &[f64]) -> f64 {
        fn entropy<K: std::hash::Hash + Eq>(counts: HashMap<K, usize>, n: f64) -> f64 {
            counts
                .values()
                .map(|&c| {
                    let p = c as f64 / n;
                    -p * p.ln()
                })
                .sum()
        }
        let n = labels.len() as f64;
        let mut hx = HashMap::new();
        let mut hy = HashMap::new();
        let mut hxy = HashMap::new();
        for (&b, &y) in bin_of.iter().zip(labels) {
            let c = y > 0.0;
            *hx.entry(b).or_insert(0) += 1;
            *hy.entry(c).or_insert(0) += 1;
            *hxy.entry((b, c)).or_insert(0) += 1;
        }
        entropy(hx, n) + entropy(hy, n) - entropy(hxy, n)
    }

    fn dataset(cols: Vec<Vec<f64>>, labels: Vec<f64>) -> Dataset {
        let n = labels.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn label_copy_scores_highest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<f64> = (0..400)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let noise: Vec<f64> = (0..400).map(|_| rng.sample(StandardNormal)).collect();
        let data = dataset(vec![noise, labels.clone()], labels);
        let mi = mutual_information_scores(&data, 10).unwrap();
        assert!(mi[1] > mi[0]);
        assert!((mi[1] - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn independent_feature_has_small_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let labels: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mi = mutual_information_scores(&dataset(vec![x], labels), 10).unwrap();
        assert!(mi[0] <= 0.01, "mi = {}", mi[0]);
    }

    #[test]
    fn matches_contingency_table_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 2000;
        let labels: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let x: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let flipped = if rng.random::<f64>() < 0.1 { -y } else { y };
                flipped + 0.7 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let bins = 10;
        let bin_of: Vec<usize> = x
            .iter()
            .map(|&v| {
                let t = (v.clamp(-5.0, 5.0) + 5.0) / 10.0 * bins as f64;
                (t.floor() as usize).min(bins - 1)
            })
            .collect();
        let expected = entropy_oracle(&bin_of, &labels);
        let mi = mutual_information_scores(&dataset(vec![x], labels), bins).unwrap();
        assert!((mi[0] - expected).abs() < 1e-12, "{} vs {expected}", mi[0]);
    }

    #[test]
    fn too_few_samples_for_bins() {
        let data = dataset(vec![vec![0.0, 1.0, 2.0]], vec![1.0, -1.0, 1.0]);
        assert!(mutual_information_scores(&data, 10).is_err());
        assert!(mutual_information_scores(&data, 1).is_err());
    }

    #[test]
    fn window_counts_follow_ranking() {
        let scores: Vec<f64> = (0..8).map(|j| j as f64).collect();
        let w = build_windows(&scores, 8, 3).unwrap();
        assert_eq!(w.windows, vec![vec![7, 6, 5], vec![4, 3, 2], vec![1, 0]]);
        assert_eq!(w.weights, vec![1.0 / 3.0; 3]);
        assert_eq!(w.length_scales, vec![1.0; 3]);

        assert_eq!(build_windows(&[0.0; 28], 28, 3).unwrap().len(), 10);
        assert_eq!(
            build_windows(&[0.1, 0.3, 0.2], 3, 3).unwrap().windows,
            vec![vec![1, 2, 0]]
        );
    }

    #[test]
    fn smaller_windows_respect_window_limit() {
        let w = build_windows(&[0.5, 0.1, 0.9, 0.3, 0.2, 0.0], 6, 1).unwrap();
        assert_eq!(w.windows, vec![vec![2], vec![0]]);
        assert!(build_windows(&[0.0; 4], 4, 4).is_err());
    }

    #[test]
    fn validation_rejects_overlap_and_oversize() {
        assert!(FeatureWindowing::new(vec![vec![0, 1], vec![1, 2]], 6).is_err());
        assert!(FeatureWindowing::new(vec![vec![0, 1, 2, 3]], 6).is_err());
        assert!(FeatureWindowing::new(vec![vec![0], vec![1]], 3).is_err());
        assert!(FeatureWindowing::new(vec![vec![0, 5]], 5).is_err());
        assert!(FeatureWindowing::new(vec![vec![0, 4], vec![2]], 5).is_ok());
    }
}
