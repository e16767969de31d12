//! Reference optimizers: gradient descent, Newton-CG, SGD, SVRG, SARAH and
//! sub-sampled Newton, all driven through one loop that records
//! (effective gradient evaluations, loss gap) after every unit of progress.
//!
//! A "unit of progress" is whatever granularity the method is normally
//! plotted at: one iteration for the deterministic methods, one epoch for
//! SGD, one outer iteration for SVRG/SARAH, one V-cycle for the multilevel
//! scheme.

use crate::data::SparseDataset;
use crate::error::SolverError;
use crate::experiment::{config_digest, float_bits, RunStatus, Trace, TraceMeta, TraceRecord};
use crate::linalg::{axpy, norm2};
use crate::objective::{EvalCounter, FiniteSumObjective, LogisticObjective, SubsetObjective};
use crate::solvers::{backtracking_line_search, cg_solve, CgConfig, LineSearchConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How a method picks its step length.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    LineSearch(LineSearchConfig),
}

/// Hessian subset policy for sub-sampled Newton: redraw a fresh uniform
/// subset of the given size every iteration, or keep one fixed index set.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsetStrategy {
    Redraw(usize),
    Fixed(Vec<usize>),
}

/// Common run controls. `budget` caps total work in effective gradient
/// evaluations; `f_star` is the reference optimum the loss gap is measured
/// against.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tol: f64,
    pub budget: f64,
    pub seed: u64,
    pub f_star: f64,
    pub dataset_name: String,
}

impl RunConfig {
    pub fn new(f_star: f64) -> Self {
        Self {
            tol: 1e-9,
            budget: 1000.0,
            seed: 0,
            f_star,
            dataset_name: "dataset".into(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_dataset(mut self, name: &str) -> Self {
        self.dataset_name = name.to_string();
        self
    }
}

/// One optimizer state advancing in units of its natural progress step.
pub trait Stepper {
    /// Advance one unit (iteration / epoch / outer loop / cycle).
    fn step(&mut self) -> Result<(), SolverError>;
    fn iterate(&self) -> &[f64];
    fn effective_grads(&self) -> f64;
    /// Current objective value (monitoring — never charged).
    fn loss(&self) -> f64;
}

/// Shared outer loop: record the starting gap, then step until the gap drops
/// below `tol`, the budget is exhausted, or the loss stops being finite. A
/// step that lands past the budget is discarded from the trace so the last
/// record never exceeds the budget; a budget of zero yields just the initial
/// record. Hard solver errors propagate.
pub fn drive<S: Stepper>(
    stepper: &mut S,
    rc: &RunConfig,
    meta: TraceMeta,
) -> Result<Trace, SolverError> {
    let mut records = Vec::new();
    let mut gap = stepper.loss() - rc.f_star;
    records.push(TraceRecord {
        grad_calls: stepper.effective_grads(),
        loss_diff: gap,
    });
    let status = loop {
        if gap < rc.tol {
            break RunStatus::Converged;
        }
        if stepper.effective_grads() >= rc.budget {
            break RunStatus::BudgetExhausted;
        }
        stepper.step()?;
        if stepper.effective_grads() > rc.budget {
            break RunStatus::BudgetExhausted;
        }
        let loss = stepper.loss();
        if !loss.is_finite() {
            break RunStatus::Diverged;
        }
        gap = loss - rc.f_star;
        records.push(TraceRecord {
            grad_calls: stepper.effective_grads(),
            loss_diff: gap,
        });
    };
    Ok(Trace {
        meta,
        records,
        status,
    })
}

/// Full-gradient descent with a fixed step or backtracking line search.
#[derive(Debug, Clone)]
pub struct GdStepper<O: FiniteSumObjective> {
    obj: O,
    w: Vec<f64>,
    counter: EvalCounter,
    rule: StepRule,
}

impl<O: FiniteSumObjective> GdStepper<O> {
    pub fn new(obj: O, rule: StepRule) -> Self {
        let w = vec![0.0; obj.dim()];
        let counter = EvalCounter::new(obj.sample_count());
        Self {
            obj,
            w,
            counter,
            rule,
        }
    }
}

impl<O: FiniteSumObjective> Stepper for GdStepper<O> {
    fn step(&mut self) -> Result<(), SolverError> {
        let g = self.obj.gradient(&self.w, &mut self.counter);
        match &self.rule {
            StepRule::Fixed(alpha) => {
                axpy(-alpha, &g, &mut self.w);
            }
            StepRule::LineSearch(cfg) => {
                if norm2(&g) == 0.0 {
                    return Ok(());
                }
                let p: Vec<f64> = g.iter().map(|x| -x).collect();
                let alpha =
                    backtracking_line_search(|x| self.obj.value(x), &self.w, &p, &g, cfg)?;
                axpy(alpha, &p, &mut self.w);
            }
        }
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn effective_grads(&self) -> f64 {
        self.counter.effective_grads()
    }

    fn loss(&self) -> f64 {
        self.obj.value(&self.w)
    }
}

/// Newton-CG: solve ∇²F(w)p = −∇F(w) inexactly with matrix-free CG, then
/// step along p.
#[derive(Debug, Clone)]
pub struct NewtonCgStepper<O: FiniteSumObjective> {
    obj: O,
    w: Vec<f64>,
    counter: EvalCounter,
    cg: CgConfig,
    rule: StepRule,
}

impl<O: FiniteSumObjective> NewtonCgStepper<O> {
    pub fn new(obj: O, cg: CgConfig, rule: StepRule) -> Self {
        let w = vec![0.0; obj.dim()];
        let counter = EvalCounter::new(obj.sample_count());
        Self {
            obj,
            w,
            counter,
            cg,
            rule,
        }
    }
}

impl<O: FiniteSumObjective> Stepper for NewtonCgStepper<O> {
    fn step(&mut self) -> Result<(), SolverError> {
        let g = self.obj.gradient(&self.w, &mut self.counter);
        if norm2(&g) == 0.0 {
            return Ok(());
        }
        let b: Vec<f64> = g.iter().map(|x| -x).collect();
        let obj = &self.obj;
        let w = &self.w;
        let counter = &mut self.counter;
        let p = cg_solve(|v| obj.hvp(w, v, counter), &b, &self.cg)?;
        let alpha = match &self.rule {
            StepRule::Fixed(a) => *a,
            StepRule::LineSearch(cfg) => {
                backtracking_line_search(|x| self.obj.value(x), &self.w, &p, &g, cfg)?
            }
        };
        axpy(alpha, &p, &mut self.w);
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn effective_grads(&self) -> f64 {
        self.counter.effective_grads()
    }

    fn loss(&self) -> f64 {
        self.obj.value(&self.w)
    }
}

/// Plain SGD with a fixed step; one `step()` is an epoch of n single-sample
/// updates with uniformly drawn indices.
#[derive(Debug, Clone)]
pub struct SgdStepper<O: FiniteSumObjective> {
    obj: O,
    w: Vec<f64>,
    counter: EvalCounter,
    alpha: f64,
    rng: ChaCha8Rng,
}

impl<O: FiniteSumObjective> SgdStepper<O> {
    pub fn new(obj: O, alpha: f64, seed: u64) -> Self {
        let w = vec![0.0; obj.dim()];
        let counter = EvalCounter::new(obj.sample_count());
        Self {
            obj,
            w,
            counter,
            alpha,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl<O: FiniteSumObjective> Stepper for SgdStepper<O> {
    fn step(&mut self) -> Result<(), SolverError> {
        let n = self.obj.sample_count();
        for _ in 0..n {
            let k = self.rng.random_range(0..n);
            let g = self.obj.sample_gradient(&self.w, k, &mut self.counter);
            axpy(-self.alpha, &g, &mut self.w);
        }
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn effective_grads(&self) -> f64 {
        self.counter.effective_grads()
    }

    fn loss(&self) -> f64 {
        self.obj.value(&self.w)
    }
}

/// SVRG: one `step()` is an outer iteration — a full gradient at the snapshot
/// followed by `inner_steps` variance-reduced SGD updates
/// w ← w − α(∇f_k(w) − ∇f_k(snapshot) + ∇F(snapshot)), last iterate kept.
/// Cost per outer: 1 + 2·inner_steps/n effective gradients.
#[derive(Debug, Clone)]
pub struct SvrgStepper<O: FiniteSumObjective> {
    obj: O,
    w: Vec<f64>,
    counter: EvalCounter,
    alpha: f64,
    inner_steps: usize,
    rng: ChaCha8Rng,
}

impl<O: FiniteSumObjective> SvrgStepper<O> {
    pub fn new(obj: O, alpha: f64, inner_steps: usize, seed: u64) -> Self {
        assert!(inner_steps >= 1, "need at least one inner step");
        let w = vec![0.0; obj.dim()];
        let counter = EvalCounter::new(obj.sample_count());
        Self {
            obj,
            w,
            counter,
            alpha,
            inner_steps,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl<O: FiniteSumObjective> Stepper for SvrgStepper<O> {
    fn step(&mut self) -> Result<(), SolverError> {
        let n = self.obj.sample_count();
        let snapshot = self.w.clone();
        let full_g = self.obj.gradient(&snapshot, &mut self.counter);
        for _ in 0..self.inner_steps {
            let k = self.rng.random_range(0..n);
            let gk = self.obj.sample_gradient(&self.w, k, &mut self.counter);
            let g0 = self.obj.sample_gradient(&snapshot, k, &mut self.counter);
            for i in 0..self.w.len() {
                let dir = gk[i] - g0[i] + full_g[i];
                self.w[i] -= self.alpha * dir;
            }
        }
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn effective_grads(&self) -> f64 {
        self.counter.effective_grads()
    }

    fn loss(&self) -> f64 {
        self.obj.value(&self.w)
    }
}

/// SARAH: like SVRG but with the recursive estimator
/// v ← ∇f_k(w_t) − ∇f_k(w_{t−1}) + v. One `step()` does the full-gradient
/// update plus `inner_steps − 1` recursive updates, costing
/// 1 + 2(inner_steps−1)/n.
#[derive(Debug, Clone)]
pub struct SarahStepper<O: FiniteSumObjective> {
    obj: O,
    w: Vec<f64>,
    counter: EvalCounter,
    alpha: f64,
    inner_steps: usize,
    rng: ChaCha8Rng,
}

impl<O: FiniteSumObjective> SarahStepper<O> {
    pub fn new(obj: O, alpha: f64, inner_steps: usize, seed: u64) -> Self {
        assert!(inner_steps >= 1, "need at least one inner step");
        let w = vec![0.0; obj.dim()];
        let counter = EvalCounter::new(obj.sample_count());
        Self {
            obj,
            w,
            counter,
            alpha,
            inner_steps,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl<O: FiniteSumObjective> Stepper for SarahStepper<O> {
    fn step(&mut self) -> Result<(), SolverError> {
        let n = self.obj.sample_count();
        let mut v = self.obj.gradient(&self.w, &mut self.counter);
        let mut w_prev = self.w.clone();
        let mut w_cur = self.w.clone();
        axpy(-self.alpha, &v, &mut w_cur);
        for _ in 1..self.inner_steps {
            let k = self.rng.random_range(0..n);
            let g_cur = self.obj.sample_gradient(&w_cur, k, &mut self.counter);
            let g_prev = self.obj.sample_gradient(&w_prev, k, &mut self.counter);
            for i in 0..v.len() {
                v[i] += g_cur[i] - g_prev[i];
            }
            w_prev.copy_from_slice(&w_cur);
            axpy(-self.alpha, &v, &mut w_cur);
        }
        self.w = w_cur;
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn effective_grads(&self) -> f64 {
        self.counter.effective_grads()
    }

    fn loss(&self) -> f64 {
        self.obj.value(&self.w)
    }
}

/// Sub-sampled Newton: full gradient, Hessian-vector products restricted to a
/// sampled subset, CG for the direction, then a fixed step or a line search
/// on the full objective.
#[derive(Debug, Clone)]
pub struct SsnStepper<'a> {
    obj: LogisticObjective<'a>,
    w: Vec<f64>,
    counter: EvalCounter,
    strategy: SubsetStrategy,
    cg: CgConfig,
    rule: StepRule,
    rng: ChaCha8Rng,
}

impl<'a> SsnStepper<'a> {
    pub fn new(
        obj: LogisticObjective<'a>,
        strategy: SubsetStrategy,
        cg: CgConfig,
        rule: StepRule,
        seed: u64,
    ) -> Self {
        match &strategy {
            SubsetStrategy::Redraw(k) => {
                assert!(*k >= 1 && *k <= obj.sample_count(), "bad Hessian subset size")
            }
            SubsetStrategy::Fixed(v) => assert!(!v.is_empty(), "empty Hessian subset"),
        }
        let w = vec![0.0; obj.dim()];
        let counter = EvalCounter::new(obj.sample_count());
        Self {
            obj,
            w,
            counter,
            strategy,
            cg,
            rule,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Stepper for SsnStepper<'_> {
    fn step(&mut self) -> Result<(), SolverError> {
        let g = self.obj.gradient(&self.w, &mut self.counter);
        if norm2(&g) == 0.0 {
            return Ok(());
        }
        let subset = match &self.strategy {
            SubsetStrategy::Redraw(k) => self.obj.draw_subset(*k, &mut self.rng),
            SubsetStrategy::Fixed(v) => v.clone(),
        };
        let h_obj = self.obj.restrict(&subset);
        let b: Vec<f64> = g.iter().map(|x| -x).collect();
        let w = &self.w;
        let counter = &mut self.counter;
        let p = cg_solve(|v| h_obj.hvp(w, v, counter), &b, &self.cg)?;
        let alpha = match &self.rule {
            StepRule::Fixed(a) => *a,
            StepRule::LineSearch(cfg) => {
                backtracking_line_search(|x| self.obj.value(x), &self.w, &p, &g, cfg)?
            }
        };
        axpy(alpha, &p, &mut self.w);
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn effective_grads(&self) -> f64 {
        self.counter.effective_grads()
    }

    fn loss(&self) -> f64 {
        self.obj.value(&self.w)
    }
}

fn bits(x: f64) -> String {
    float_bits(x)
}

pub fn run_gd(
    ds: &SparseDataset,
    lambda: f64,
    rule: StepRule,
    rc: &RunConfig,
) -> Result<Trace, SolverError> {
    let obj = LogisticObjective::full(ds, lambda);
    let mut st = GdStepper::new(obj, rule.clone());
    let meta = TraceMeta {
        method: "gd".into(),
        dataset: rc.dataset_name.clone(),
        seed: rc.seed,
        config_digest: config_digest(&["gd".into(), bits(lambda), format!("{rule:?}")]),
    };
    drive(&mut st, rc, meta)
}

pub fn run_newton_cg(
    ds: &SparseDataset,
    lambda: f64,
    cg: CgConfig,
    rule: StepRule,
    rc: &RunConfig,
) -> Result<Trace, SolverError> {
    let obj = LogisticObjective::full(ds, lambda);
    let mut st = NewtonCgStepper::new(obj, cg, rule.clone());
    let meta = TraceMeta {
        method: "newton".into(),
        dataset: rc.dataset_name.clone(),
        seed: rc.seed,
        config_digest: config_digest(&[
            "newton".into(),
            bits(lambda),
            format!("{cg:?}"),
            format!("{rule:?}"),
        ]),
    };
    drive(&mut st, rc, meta)
}

pub fn run_sgd(
    ds: &SparseDataset,
    lambda: f64,
    alpha: f64,
    rc: &RunConfig,
) -> Result<Trace, SolverError> {
    let obj = LogisticObjective::full(ds, lambda);
    let mut st = SgdStepper::new(obj, alpha, rc.seed);
    let meta = TraceMeta {
        method: "sgd".into(),
        dataset: rc.dataset_name.clone(),
        seed: rc.seed,
        config_digest: config_digest(&["sgd".into(), bits(lambda), bits(alpha)]),
    };
    drive(&mut st, rc, meta)
}

pub fn run_svrg(
    ds: &SparseDataset,
    lambda: f64,
    alpha: f64,
    inner_steps: usize,
    rc: &RunConfig,
) -> Result<Trace, SolverError> {
    let obj = LogisticObjective::full(ds, lambda);
    let mut st = SvrgStepper::new(obj, alpha, inner_steps, rc.seed);
    let meta = TraceMeta {
        method: "svrg".into(),
        dataset: rc.dataset_name.clone(),
        seed: rc.seed,
        config_digest: config_digest(&[
            "svrg".into(),
            bits(lambda),
            bits(alpha),
            inner_steps.to_string(),
        ]),
    };
    drive(&mut st, rc, meta)
}

pub fn run_sarah(
    ds: &SparseDataset,
    lambda: f64,
    alpha: f64,
    inner_steps: usize,
    rc: &RunConfig,
) -> Result<Trace, SolverError> {
    let obj = LogisticObjective::full(ds, lambda);
    let mut st = SarahStepper::new(obj, alpha, inner_steps, rc.seed);
    let meta = TraceMeta {
        method: "sarah".into(),
        dataset: rc.dataset_name.clone(),
        seed: rc.seed,
        config_digest: config_digest(&[
            "sarah".into(),
            bits(lambda),
            bits(alpha),
            inner_steps.to_string(),
        ]),
    };
    drive(&mut st, rc, meta)
}

pub fn run_ssn(
    ds: &SparseDataset,
    lambda: f64,
    strategy: SubsetStrategy,
    cg: CgConfig,
    rule: StepRule,
    rc: &RunConfig,
) -> Result<Trace, SolverError> {
    let obj = LogisticObjective::full(ds, lambda);
    let mut st = SsnStepper::new(obj, strategy.clone(), cg, rule.clone(), rc.seed);
    let meta = TraceMeta {
        method: "ssn".into(),
        dataset: rc.dataset_name.clone(),
        seed: rc.seed,
        config_digest: config_digest(&[
            "ssn".into(),
            bits(lambda),
            format!("{strategy:?}"),
            format!("{cg:?}"),
            format!("{rule:?}"),
        ]),
    };
    drive(&mut st, rc, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::QuadraticSum;

    /// f1 = ½(w−1)², f2 = ½(w+3)²; F(w) = ½(w−1)²/2 + ½(w+3)²/2,
    /// minimizer −1, full gradient at 0 equals 1.
    fn toy_quadratic() -> QuadraticSum {
        QuadraticSum::new(vec![vec![1.0], vec![-3.0]], vec![1.0, 1.0])
    }

    fn toy_logistic() -> SparseDataset {
        SparseDataset::from_parts(vec![1.0, -1.0], vec![vec![(0, 1.0)], vec![(1, 1.0)]], 2)
            .unwrap()
    }

    #[test]
    fn svrg_first_outer_matches_hand_computation() {
        // At the snapshot the variance-reduced direction collapses to the
        // full gradient (=1 at w=0) no matter which index is drawn, so one
        // outer with one inner step must land exactly on −0.1.
        let mut st = SvrgStepper::new(toy_quadratic(), 0.1, 1, 123);
        st.step().unwrap();
        assert_eq!(st.iterate(), &[-0.1]);
        assert_eq!(st.effective_grads(), 1.0 + 2.0 / 2.0);
    }

    #[test]
    fn sarah_two_inner_steps_match_hand_computation() {
        // v0 = 1, w1 = −0.1; for either sampled term the gradient difference
        // is w1 − w0 = −0.1, so v1 = 0.9 and w2 = −0.19.
        let mut st = SarahStepper::new(toy_quadratic(), 0.1, 2, 7);
        st.step().unwrap();
        assert_eq!(st.iterate(), &[-0.19]);
        assert_eq!(st.effective_grads(), 1.0 + 2.0 / 2.0);
    }

    #[test]
    fn sarah_single_inner_step_is_a_gradient_step() {
        let mut st = SarahStepper::new(toy_quadratic(), 0.1, 1, 7);
        st.step().unwrap();
        assert_eq!(st.iterate(), &[-0.1]);
        assert_eq!(st.effective_grads(), 1.0);
    }

    #[test]
    fn gd_contracts_toward_the_quadratic_minimizer() {
        let mut st = GdStepper::new(toy_quadratic(), StepRule::Fixed(1.0));
        st.step().unwrap();
        // Unit scale, unit step: lands exactly on the minimizer −1.
        assert_eq!(st.iterate(), &[-1.0]);
        let mut ls = GdStepper::new(
            toy_quadratic(),
            StepRule::LineSearch(LineSearchConfig::default()),
        );
        ls.step().unwrap();
        assert_eq!(ls.iterate(), &[-1.0]); // α = 1 passes Armijo directly
    }

    #[test]
    fn newton_cg_solves_a_quadratic_in_one_step() {
        let q = QuadraticSum::new(vec![vec![1.0, -2.0], vec![3.0, 0.0]], vec![1.0, 1.0]);
        let mut st = NewtonCgStepper::new(
            q.clone(),
            CgConfig {
                max_iters: 10,
                rel_tol: 1e-14,
            },
            StepRule::Fixed(1.0),
        );
        st.step().unwrap();
        let m = q.minimizer();
        for (a, b) in st.iterate().iter().zip(&m) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ssn_with_full_subset_reproduces_newton_cg() {
        let ds = toy_logistic();
        let lambda = 0.5;
        let cg = CgConfig::default();
        let rule = StepRule::LineSearch(LineSearchConfig::default());
        let mut newton =
            NewtonCgStepper::new(LogisticObjective::full(&ds, lambda), cg, rule.clone());
        let mut ssn = SsnStepper::new(
            LogisticObjective::full(&ds, lambda),
            SubsetStrategy::Fixed(vec![0, 1]),
            cg,
            rule,
            0,
        );
        for _ in 0..3 {
            newton.step().unwrap();
            ssn.step().unwrap();
            assert_eq!(newton.iterate(), ssn.iterate());
        }
    }

    #[test]
    fn sgd_on_a_single_sample_is_exact_gradient_descent() {
        let ds = SparseDataset::from_parts(vec![1.0], vec![vec![(0, 2.0), (1, -1.0)]], 2)
            .unwrap();
        let lambda = 0.25;
        let mut sgd = SgdStepper::new(LogisticObjective::full(&ds, lambda), 0.3, 5);
        let mut gd = GdStepper::new(LogisticObjective::full(&ds, lambda), StepRule::Fixed(0.3));
        for _ in 0..4 {
            sgd.step().unwrap();
            gd.step().unwrap();
            assert_eq!(sgd.iterate(), gd.iterate());
        }
        assert_eq!(sgd.effective_grads(), gd.effective_grads());
    }

    #[test]
    fn drive_records_initial_gap_at_zero_cost() {
        let ds = toy_logistic();
        let rc = RunConfig::new(0.1).with_budget(0.0);
        let trace = run_gd(&ds, 0.0, StepRule::Fixed(0.1), &rc).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].grad_calls, 0.0);
        assert_eq!(trace.records[0].loss_diff, 2.0f64.ln() - 0.1);
        assert_eq!(trace.status, RunStatus::BudgetExhausted);
    }

    #[test]
    fn drive_never_records_past_the_budget() {
        let ds = toy_logistic();
        let rc = RunConfig::new(0.0).with_budget(2.5).with_tol(0.0);
        let trace = run_gd(&ds, 0.1, StepRule::Fixed(0.1), &rc).unwrap();
        assert_eq!(trace.status, RunStatus::BudgetExhausted);
        assert!(trace.records.iter().all(|r| r.grad_calls <= 2.5));
        // GD costs exactly one effective gradient per iteration.
        assert_eq!(trace.records.last().unwrap().grad_calls, 2.0);
    }

    #[test]
    fn drive_reports_divergence_without_recording_junk() {
        let mut st = GdStepper::new(toy_quadratic(), StepRule::Fixed(1e6));
        let rc = RunConfig::new(0.0).with_budget(1e6).with_tol(0.0);
        let meta = TraceMeta {
            method: "gd".into(),
            dataset: "toy".into(),
            seed: 0,
            config_digest: "t".into(),
        };
        let trace = drive(&mut st, &rc, meta).unwrap();
        assert_eq!(trace.status, RunStatus::Diverged);
        assert!(trace
            .records
            .iter()
            .all(|r| r.loss_diff.is_finite() && r.grad_calls.is_finite()));
    }

    #[test]
    fn newton_run_converges_on_the_toy_problem() {
        let ds = toy_logistic();
        let lambda = 0.5;
        let f_star = crate::experiment::compute_reference(&ds, lambda)
            .unwrap()
            .f_star;
        let rc = RunConfig::new(f_star);
        let trace = run_newton_cg(
            &ds,
            lambda,
            CgConfig::default(),
            StepRule::LineSearch(LineSearchConfig::default()),
            &rc,
        )
        .unwrap();
        assert_eq!(trace.status, RunStatus::Converged);
        assert!(trace.records.last().unwrap().loss_diff < 1e-9);
        assert_eq!(trace.records[0].grad_calls, 0.0);
    }

    #[test]
    fn stochastic_runs_are_seed_reproducible() {
        let ds = toy_logistic();
        let rc = RunConfig::new(0.0).with_budget(10.0).with_tol(0.0).with_seed(42);
        let a = run_svrg(&ds, 0.1, 0.2, 4, &rc).unwrap();
        let b = run_svrg(&ds, 0.1, 0.2, 4, &rc).unwrap();
        assert_eq!(a, b);
        let c = run_svrg(&ds, 0.1, 0.2, 4, &rc.clone().with_seed(43)).unwrap();
        assert_ne!(a.records, c.records);
        // Seed is identity, not configuration.
        assert_eq!(a.meta.config_digest, c.meta.config_digest);
    }

    #[test]
    fn ssn_redraw_makes_progress_within_cost_bounds() {
        let cfg = crate::synthetic::SyntheticConfig {
            n: 60,
            d: 4,
            scale_span: 10.0,
            label_noise: 0.1,
            seed: 2,
        };
        let ds = crate::synthetic::synthetic_logistic(&cfg);
        let lambda = 1.0 / 60.0;
        let mut st = SsnStepper::new(
            LogisticObjective::full(&ds, lambda),
            SubsetStrategy::Redraw(10),
            CgConfig::default(),
            StepRule::LineSearch(LineSearchConfig::default()),
            3,
        );
        let before = st.loss();
        for _ in 0..5 {
            st.step().unwrap();
        }
        assert!(st.loss() < before);
        // Gradient cost 1/iter plus at most 10 CG Hessian products at 10/60
        // each (CG may stop early on its relative tolerance).
        let cost = st.effective_grads();
        assert!(cost > 5.0 && cost <= 5.0 * (1.0 + 10.0 * 10.0 / 60.0));
    }
}
