//! Synthetic problem instances: a tiny quadratic finite sum with closed-form
//! behavior (used heavily in tests) and a generator for ill-conditioned
//! logistic-regression datasets with a controllable feature-scale span.

use crate::data::SparseDataset;
use crate::objective::{EvalCounter, FiniteSumObjective, SubsetObjective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// F(w) = (1/m) Σ_j (s_j/2)‖w − c_j‖². Gradients and curvature are exact
/// one-liners, which makes hand-computed oracles possible for every solver.
#[derive(Debug, Clone)]
pub struct QuadraticSum {
    centers: Vec<Vec<f64>>,
    scales: Vec<f64>,
}

impl QuadraticSum {
    pub fn new(centers: Vec<Vec<f64>>, scales: Vec<f64>) -> Self {
        assert!(!centers.is_empty(), "need at least one term");
        assert_eq!(centers.len(), scales.len(), "one scale per center");
        let d = centers[0].len();
        assert!(centers.iter().all(|c| c.len() == d), "ragged centers");
        assert!(scales.iter().all(|s| *s > 0.0), "scales must be positive");
        Self { centers, scales }
    }

    /// The unique minimizer (Σ s_j c_j) / (Σ s_j).
    pub fn minimizer(&self) -> Vec<f64> {
        let total: f64 = self.scales.iter().sum();
        let d = self.dim();
        let mut m = vec![0.0; d];
        for (c, s) in self.centers.iter().zip(&self.scales) {
            for i in 0..d {
                m[i] += s * c[i];
            }
        }
        m.iter_mut().for_each(|x| *x /= total);
        m
    }
}

impl FiniteSumObjective for QuadraticSum {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn sample_count(&self) -> usize {
        self.centers.len()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let m = self.sample_count() as f64;
        self.centers
            .iter()
            .zip(&self.scales)
            .map(|(c, s)| {
                let sq: f64 = w.iter().zip(c).map(|(wi, ci)| (wi - ci) * (wi - ci)).sum();
                0.5 * s * sq
            })
            .sum::<f64>()
            / m
    }

    fn gradient(&self, w: &[f64], counter: &mut EvalCounter) -> Vec<f64> {
        counter.charge(self.sample_count());
        let inv_m = 1.0 / self.sample_count() as f64;
        let mut g = vec![0.0; self.dim()];
        for (c, s) in self.centers.iter().zip(&self.scales) {
            for i in 0..g.len() {
                g[i] += s * (w[i] - c[i]) * inv_m;
            }
        }
        g
    }

    fn sample_gradient(&self, w: &[f64], k: usize, counter: &mut EvalCounter) -> Vec<f64> {
        counter.charge(1);
        let c = &self.centers[k];
        let s = self.scales[k];
        w.iter().zip(c).map(|(wi, ci)| s * (wi - ci)).collect()
    }

    fn hvp(&self, _w: &[f64], v: &[f64], counter: &mut EvalCounter) -> Vec<f64> {
        counter.charge(self.sample_count());
        let mean_scale: f64 =
            self.scales.iter().sum::<f64>() / self.sample_count() as f64;
        v.iter().map(|vi| mean_scale * vi).collect()
    }
}

impl SubsetObjective for QuadraticSum {
    fn restrict(&self, indices: &[usize]) -> Self {
        QuadraticSum::new(
            indices.iter().map(|&i| self.centers[i].clone()).collect(),
            indices.iter().map(|&i| self.scales[i]).collect(),
        )
    }
}

/// Controls for `synthetic_logistic`. `scale_span` is the ratio between the
/// largest and smallest feature scale (log-spaced across features), which
/// drives the conditioning of the loss Hessian; `label_noise` is the fraction
/// of labels flipped after planting.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub scale_span: f64,
    pub label_noise: f64,
    pub seed: u64,
}

/// Dense logistic-regression instance: features x_ij = scale_j·N(0,1), with
/// scales shaped the way unnormalized real datasets are — a mildly spread
/// bulk (log-spaced over the cube root of `scale_span`) plus a few
/// large-scale outlier columns (one per ten features, at least one)
/// log-spaced up to exactly `scale_span`. Labels come from a planted
/// weight vector w*_j ~ N(0,1)/scale_j (margins stay O(√d)), then are
/// flipped with probability `label_noise`.
pub fn synthetic_logistic(cfg: &SyntheticConfig) -> SparseDataset {
    assert!(cfg.n > 0 && cfg.d > 0);
    assert!(cfg.scale_span >= 1.0);
    assert!((0.0..1.0).contains(&cfg.label_noise));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let outliers = if cfg.d == 1 { 0 } else { (cfg.d - 1).min(cfg.d.div_ceil(10)) };
    let bulk = cfg.d - outliers;
    let bulk_span = cfg.scale_span.cbrt();
    let scales: Vec<f64> = (0..cfg.d)
        .map(|j| {
            if j < bulk {
                if bulk == 1 {
                    1.0
                } else {
                    bulk_span.powf(j as f64 / (bulk - 1) as f64)
                }
            } else {
                let rank = (j - bulk + 1) as f64;
                cfg.scale_span.powf(rank / outliers as f64)
            }
        })
        .collect();
    let planted: Vec<f64> = scales
        .iter()
        .map(|s| rng.sample::<f64, _>(StandardNormal) / s)
        .collect();
    let mut labels = Vec::with_capacity(cfg.n);
    let mut rows = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x: Vec<f64> = scales
            .iter()
            .map(|s| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let margin: f64 = x.iter().zip(&planted).map(|(a, b)| a * b).sum();
        let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < cfg.label_noise {
            y = -y;
        }
        labels.push(y);
        rows.push(x);
    }
    SparseDataset::from_dense(labels, &rows, cfg.d).expect("generated instance is well-formed")
}
