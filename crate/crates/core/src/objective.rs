//! Finite-sum objectives: ℓ2-regularized logistic loss over an index subset,
//! and the first-order-consistent coarse surrogate built on top of it.
//!
//! Cost accounting follows the effective-gradient-evaluation convention: a
//! gradient or Hessian-vector product over a subset of size s costs s/n of a
//! full-dataset gradient, a per-sample gradient costs 1/n, and plain value
//! evaluations (monitoring, line-search probes) are free.

use crate::data::{sample_nested, SparseDataset};
use crate::linalg::dot;
use rand_chacha::ChaCha8Rng;

/// Work meter in units of full-dataset gradient evaluations.
///
/// Internally counts per-sample evaluations as an integer and divides by n on
/// read, so every charge is exactly s/n and long runs accumulate no rounding
/// drift (which also keeps emitted traces byte-reproducible).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCounter {
    n_full: usize,
    sample_evals: u64,
}

impl EvalCounter {
    /// `n_full` is the sample count of the *full* dataset of the run.
    pub fn new(n_full: usize) -> Self {
        assert!(n_full > 0, "EvalCounter needs a positive dataset size");
        Self {
            n_full,
            sample_evals: 0,
        }
    }

    /// Record `samples` per-sample gradient-equivalent evaluations.
    pub fn charge(&mut self, samples: usize) {
        self.sample_evals += samples as u64;
    }

    /// Accumulated cost in effective (full-dataset) gradient evaluations.
    pub fn effective_grads(&self) -> f64 {
        self.sample_evals as f64 / self.n_full as f64
    }

    pub fn n_full(&self) -> usize {
        self.n_full
    }
}

/// A smooth objective of the form F(w) = (1/m) Σ_j f_j(w).
pub trait FiniteSumObjective {
    /// Dimension of the decision variable.
    fn dim(&self) -> usize;

    /// Number of active terms m.
    fn sample_count(&self) -> usize;

    /// F(w). Never charges the counter (monitoring rule).
    fn value(&self, w: &[f64]) -> f64;

    /// ∇F(w); charges `sample_count()` per-sample evaluations.
    fn gradient(&self, w: &[f64], counter: &mut EvalCounter) -> Vec<f64>;

    /// ∇f_k(w) for term position `k` in `0..sample_count()`; charges 1.
    fn sample_gradient(&self, w: &[f64], k: usize, counter: &mut EvalCounter) -> Vec<f64>;

    /// ∇²F(w)·v without materializing the Hessian; charges `sample_count()`.
    fn hvp(&self, w: &[f64], v: &[f64], counter: &mut EvalCounter) -> Vec<f64>;
}

/// Objectives that can be re-scoped to a subset of their terms (used by the
/// sub-sampled Newton baseline for its Hessian subset).
pub trait SubsetObjective: FiniteSumObjective + Sized {
    /// Same objective with the active term set replaced by `indices`
    /// (dataset row indices, sorted unique).
    fn restrict(&self, indices: &[usize]) -> Self;
}

/// log(1 + exp(t)) without overflow for large |t|.
pub(crate) fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic sigmoid, branch-stabilized.
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// ℓ2-regularized logistic loss over a subset D of the dataset rows:
///
///   F(w) = (1/|D|) Σ_{i∈D} log(1 + exp(−y_i⟨w, x_i⟩)) + (λ/2)‖w‖²
///
/// Per-sample terms carry the regularizer, f_i(w) = ℓ_i(w) + (λ/2)‖w‖², so
/// that F is exactly the mean of the f_i — the form every variance-reduced
/// estimator here relies on.
#[derive(Debug, Clone)]
pub struct LogisticObjective<'a> {
    dataset: &'a SparseDataset,
    subset: Option<Vec<usize>>, // None ⇒ every row
    lambda: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn full(dataset: &'a SparseDataset, lambda: f64) -> Self {
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        assert!(dataset.n_samples() > 0, "empty dataset");
        Self {
            dataset,
            subset: None,
            lambda,
        }
    }

    /// Restrict to the given dataset row indices (sorted unique, non-empty).
    pub fn over_subset(dataset: &'a SparseDataset, subset: Vec<usize>, lambda: f64) -> Self {
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        assert!(!subset.is_empty(), "empty subset");
        debug_assert!(subset.windows(2).all(|p| p[0] < p[1]), "subset not sorted unique");
        assert!(
            *subset.last().unwrap() < dataset.n_samples(),
            "subset index out of range"
        );
        Self {
            dataset,
            subset: Some(subset),
            lambda,
        }
    }

    pub fn dataset(&self) -> &'a SparseDataset {
        self.dataset
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Dataset row index of term position `k`.
    fn row_of(&self, k: usize) -> usize {
        match &self.subset {
            None => k,
            Some(s) => s[k],
        }
    }

    fn margin(&self, i: usize, w: &[f64]) -> f64 {
        let (cols, vals) = self.dataset.row(i);
        cols.iter()
            .zip(vals)
            .map(|(c, v)| v * w[*c as usize])
            .sum()
    }

    /// out += coeff * x_i
    fn add_row(&self, i: usize, coeff: f64, out: &mut [f64]) {
        let (cols, vals) = self.dataset.row(i);
        for (c, v) in cols.iter().zip(vals) {
            out[*c as usize] += coeff * v;
        }
    }

    fn check_dim(&self, w: &[f64]) {
        assert_eq!(w.len(), self.dim(), "weight dimension mismatch");
    }
}

impl FiniteSumObjective for LogisticObjective<'_> {
    fn dim(&self) -> usize {
        self.dataset.n_features()
    }

    fn sample_count(&self) -> usize {
        match &self.subset {
            None => self.dataset.n_samples(),
            Some(s) => s.len(),
        }
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.check_dim(w);
        let m = self.sample_count();
        let mut acc = 0.0;
        for k in 0..m {
            let i = self.row_of(k);
            acc += log1p_exp(-self.dataset.label(i) * self.margin(i, w));
        }
        acc / m as f64 + 0.5 * self.lambda * dot(w, w)
    }

    fn gradient(&self, w: &[f64], counter: &mut EvalCounter) -> Vec<f64> {
        self.check_dim(w);
        let m = self.sample_count();
        counter.charge(m);
        let mut g: Vec<f64> = w.iter().map(|wi| self.lambda * wi).collect();
        let inv_m = 1.0 / m as f64;
        for k in 0..m {
            let i = self.row_of(k);
            let y = self.dataset.label(i);
            let coeff = -y * sigmoid(-y * self.margin(i, w)) * inv_m;
            self.add_row(i, coeff, &mut g);
        }
        g
    }

    fn sample_gradient(&self, w: &[f64], k: usize, counter: &mut EvalCounter) -> Vec<f64> {
        self.check_dim(w);
        counter.charge(1);
        let i = self.row_of(k);
        let y = self.dataset.label(i);
        let mut g: Vec<f64> = w.iter().map(|wi| self.lambda * wi).collect();
        let coeff = -y * sigmoid(-y * self.margin(i, w));
        self.add_row(i, coeff, &mut g);
        g
    }

    fn hvp(&self, w: &[f64], v: &[f64], counter: &mut EvalCounter) -> Vec<f64> {
        self.check_dim(w);
        self.check_dim(v);
        let m = self.sample_count();
        counter.charge(m);
        let mut h: Vec<f64> = v.iter().map(|vi| self.lambda * vi).collect();
        let inv_m = 1.0 / m as f64;
        for k in 0..m {
            let i = self.row_of(k);
            let s = sigmoid(self.margin(i, w));
            let xv = self.margin_of_vec(i, v);
            let coeff = s * (1.0 - s) * xv * inv_m;
            self.add_row(i, coeff, &mut h);
        }
        h
    }
}

impl LogisticObjective<'_> {
    fn margin_of_vec(&self, i: usize, v: &[f64]) -> f64 {
        let (cols, vals) = self.dataset.row(i);
        cols.iter()
            .zip(vals)
            .map(|(c, x)| x * v[*c as usize])
            .sum()
    }

    /// Uniform Hessian subset of size `k` drawn from all rows.
    pub fn draw_subset(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let all: Vec<usize> = (0..self.dataset.n_samples()).collect();
        sample_nested(&all, k, rng)
    }
}

impl SubsetObjective for LogisticObjective<'_> {
    fn restrict(&self, indices: &[usize]) -> Self {
        LogisticObjective::over_subset(self.dataset, indices.to_vec(), self.lambda)
    }
}

#[derive(Debug, Clone)]
struct Coupling {
    anchor: Vec<f64>,
    fine_gradient: Vec<f64>,
    delta_g: Vec<f64>,
}

/// Coarse-level surrogate H(w) = F_sub(w) + ⟨δg, w − w0⟩ with
/// δg = g_fine − ∇F_sub(w0), built so that ∇H(w0) equals the fine-level
/// gradient g_fine — the first-order consistency that makes a coarse descent
/// direction a fine descent direction.
///
/// The gradient at the anchor returns the stored g_fine verbatim (the value
/// is known by construction, so nothing is evaluated and nothing is charged;
/// recomposing base + δg in floating point would also lose the exactness on
/// components that cancel). Per-sample gradients sample the δg correction
/// along with the term, ∇f_j(w) − ∇f_j(w0) + g_fine, which is what makes an
/// SGD sweep on this surrogate a variance-reduced step rather than plain SGD.
#[derive(Debug, Clone)]
pub struct CoupledObjective<'a> {
    base: LogisticObjective<'a>,
    coupling: Option<Coupling>,
}

impl<'a> CoupledObjective<'a> {
    /// Finest-level form: no correction term, behaves exactly like `base`.
    pub fn uncoupled(base: LogisticObjective<'a>) -> Self {
        Self {
            base,
            coupling: None,
        }
    }

    /// Couple `base` to a fine level: `fine_grad` is the fine-level gradient
    /// at the current fine iterate and `anchor` is that iterate. Charges one
    /// base-subset gradient evaluation (for ∇F_sub(anchor)).
    pub fn make_coupled(
        base: LogisticObjective<'a>,
        fine_grad: Vec<f64>,
        anchor: Vec<f64>,
        counter: &mut EvalCounter,
    ) -> Self {
        assert_eq!(fine_grad.len(), base.dim(), "fine gradient dimension mismatch");
        assert_eq!(anchor.len(), base.dim(), "anchor dimension mismatch");
        let base_at_anchor = base.gradient(&anchor, counter);
        let delta_g: Vec<f64> = fine_grad
            .iter()
            .zip(&base_at_anchor)
            .map(|(f, b)| f - b)
            .collect();
        Self {
            base,
            coupling: Some(Coupling {
                anchor,
                fine_gradient: fine_grad,
                delta_g,
            }),
        }
    }

    pub fn base(&self) -> &LogisticObjective<'a> {
        &self.base
    }

    pub fn is_coupled(&self) -> bool {
        self.coupling.is_some()
    }

    /// The correction vector δg; `None` at the finest level (a zero vector).
    pub fn delta_g(&self) -> Option<&[f64]> {
        self.coupling.as_ref().map(|c| c.delta_g.as_slice())
    }

    pub fn anchor(&self) -> Option<&[f64]> {
        self.coupling.as_ref().map(|c| c.anchor.as_slice())
    }

    /// The fine-level gradient this surrogate is consistent with at the anchor.
    pub fn fine_gradient(&self) -> Option<&[f64]> {
        self.coupling.as_ref().map(|c| c.fine_gradient.as_slice())
    }
}

impl FiniteSumObjective for CoupledObjective<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample_count(&self) -> usize {
        self.base.sample_count()
    }

    fn value(&self, w: &[f64]) -> f64 {
        match &self.coupling {
            None => self.base.value(w),
            Some(c) => {
                let lin: f64 = c
                    .delta_g
                    .iter()
                    .zip(w.iter().zip(&c.anchor))
                    .map(|(d, (wi, ai))| d * (wi - ai))
                    .sum();
                self.base.value(w) + lin
            }
        }
    }

    fn gradient(&self, w: &[f64], counter: &mut EvalCounter) -> Vec<f64> {
        match &self.coupling {
            None => self.base.gradient(w, counter),
            Some(c) if w == c.anchor.as_slice() => c.fine_gradient.clone(),
            Some(c) => {
                let mut g = self.base.gradient(w, counter);
                for (gi, d) in g.iter_mut().zip(&c.delta_g) {
                    *gi += d;
                }
                g
            }
        }
    }

    fn sample_gradient(&self, w: &[f64], k: usize, counter: &mut EvalCounter) -> Vec<f64> {
        match &self.coupling {
            None => self.base.sample_gradient(w, k, counter),
            Some(c) => {
                let mut g = self.base.sample_gradient(w, k, counter);
                let g0 = self.base.sample_gradient(&c.anchor, k, counter);
                for i in 0..g.len() {
                    g[i] = g[i] - g0[i] + c.fine_gradient[i];
                }
                g
            }
        }
    }

    fn hvp(&self, w: &[f64], v: &[f64], counter: &mut EvalCounter) -> Vec<f64> {
        // The linear coupling term has zero curvature.
        self.base.hvp(w, v, counter)
    }
}
