//! Multilevel variance-reduced optimization: V-cycles over a nested sample
//! hierarchy, with each coarse level solving a cheaper subset objective that
//! is coupled to the level above so its gradient at the entry point equals
//! the fine-level gradient exactly.
//!
//! One cycle at the finest level: a few smoothing steps, a recursive coarse
//! correction (solved with Newton-CG at the coarsest level by default), a
//! safeguarded acceptance of the returned correction, and optional
//! post-smoothing. Degenerate configurations reproduce classic methods: two
//! levels with one fixed Newton step at the bottom is sub-sampled Newton, and
//! two levels with the full sample set at the bottom driven by SGD is SVRG.

use crate::data::{hierarchy_rng, SampleHierarchy, SparseDataset};
use crate::error::SolverError;
use crate::experiment::{config_digest, float_bits, Trace, TraceMeta};
use crate::linalg::{dot, norm2, sub, ulp_distance};
use crate::objective::{CoupledObjective, EvalCounter, FiniteSumObjective, LogisticObjective};
use crate::solvers::{backtracking_line_search, cg_solve, CgConfig, LineSearchConfig};
use crate::baselines::{drive, RunConfig, Stepper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inner optimizer used for smoothing and coarsest-level solves.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerKind {
    GdLineSearch,
    GdFixed(f64),
    /// One step = one single-sample stochastic gradient update.
    Sgd(f64),
    NewtonCgLineSearch,
    NewtonCgFixed(f64),
}

impl OptimizerKind {
    fn is_first_order(&self) -> bool {
        !matches!(
            self,
            OptimizerKind::NewtonCgLineSearch | OptimizerKind::NewtonCgFixed(_)
        )
    }

    fn step_size(&self) -> Option<f64> {
        match self {
            OptimizerKind::GdFixed(a)
            | OptimizerKind::Sgd(a)
            | OptimizerKind::NewtonCgFixed(a) => Some(*a),
            _ => None,
        }
    }
}

/// Whether coarse subsets are redrawn at the start of every cycle or kept
/// for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResamplePolicy {
    PerCycle,
    Frozen,
}

/// How the coarse correction is applied at the finer level: through an
/// Armijo line search along the correction (rejecting non-descent
/// directions), or verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceRule {
    LineSearch,
    Verbatim,
}

/// How many optimizer iterations to run at the coarsest level per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarsestSteps {
    /// Spend at most one full-data gradient's worth of work on the coarse
    /// solve each cycle (but always at least one step). With a coarsest level
    /// of `c` out of `n` samples this resolves to ⌊n / (c·(1 + cg iters))⌋
    /// steps for a second-order coarse optimizer and ⌊n / c⌋ for a
    /// first-order one: the smaller the coarse level, the more thoroughly it
    /// is solved, at constant cost.
    WorkBalanced,
    /// Always run exactly this many steps.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlvrConfig {
    /// Smoothing steps before the coarse correction (μ₁).
    pub pre_steps: usize,
    /// Smoothing steps after the coarse correction (μ₂).
    pub post_steps: usize,
    /// Optimizer iterations at the coarsest level (μ¹).
    pub coarsest_steps: CoarsestSteps,
    /// Smoother for every level above the coarsest (first-order only).
    pub fine_optimizer: OptimizerKind,
    pub coarsest_optimizer: OptimizerKind,
    pub cg: CgConfig,
    pub line_search: LineSearchConfig,
    pub resample: ResamplePolicy,
    pub acceptance: AcceptanceRule,
}

impl Default for MlvrConfig {
    fn default() -> Self {
        Self {
            pre_steps: 1,
            post_steps: 0,
            coarsest_steps: CoarsestSteps::WorkBalanced,
            fine_optimizer: OptimizerKind::GdLineSearch,
            coarsest_optimizer: OptimizerKind::NewtonCgLineSearch,
            cg: CgConfig::default(),
            line_search: LineSearchConfig::default(),
            resample: ResamplePolicy::PerCycle,
            acceptance: AcceptanceRule::LineSearch,
        }
    }
}

impl MlvrConfig {
    /// Two-level degeneration to sub-sampled Newton: no smoothing, one fixed
    /// Newton-CG step on a frozen coarse subset, correction taken verbatim.
    pub fn subsampled_newton(step: f64) -> Self {
        Self {
            pre_steps: 0,
            post_steps: 0,
            coarsest_steps: CoarsestSteps::Fixed(1),
            coarsest_optimizer: OptimizerKind::NewtonCgFixed(step),
            resample: ResamplePolicy::Frozen,
            acceptance: AcceptanceRule::Verbatim,
            ..Self::default()
        }
    }

    /// Two-level degeneration to SVRG (with the coarse level spanning the
    /// full dataset): `inner_steps` fixed-step stochastic updates on the
    /// coupled objective, taken verbatim.
    pub fn svrg(step: f64, inner_steps: usize) -> Self {
        Self {
            pre_steps: 0,
            post_steps: 0,
            coarsest_steps: CoarsestSteps::Fixed(inner_steps),
            coarsest_optimizer: OptimizerKind::Sgd(step),
            resample: ResamplePolicy::PerCycle,
            acceptance: AcceptanceRule::Verbatim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !self.fine_optimizer.is_first_order() {
            return Err(SolverError::Config(
                "smoothing levels use first-order optimizers only".into(),
            ));
        }
        if self.coarsest_steps == CoarsestSteps::Fixed(0) {
            return Err(SolverError::Config(
                "coarsest level needs at least one optimizer step".into(),
            ));
        }
        for kind in [&self.fine_optimizer, &self.coarsest_optimizer] {
            if let Some(a) = kind.step_size() {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(SolverError::Config(format!(
                        "step size must be positive and finite, got {a}"
                    )));
                }
            }
        }
        if self.cg.max_iters == 0 {
            return Err(SolverError::Config("cg.max_iters must be at least 1".into()));
        }
        let ls = &self.line_search;
        if !(ls.init_step > 0.0 && ls.shrink > 0.0 && ls.shrink < 1.0 && ls.c > 0.0 && ls.c < 1.0)
        {
            return Err(SolverError::Config("invalid line-search parameters".into()));
        }
        Ok(())
    }
}

/// Per-cycle diagnostics, refreshed by each `cycle()` call.
#[derive(Debug, Clone, Default)]
pub struct CycleDiagnostics {
    /// Largest componentwise ulp distance between a coupled level's gradient
    /// at its entry point and the fine-level gradient it must reproduce.
    pub consistency_max_ulps: u64,
    /// Accepted step length per coarse correction, outermost first
    /// (0 = rejected).
    pub correction_alphas: Vec<f64>,
    /// ⟨∇H(w_mid), correction⟩ per coarse correction, outermost first.
    pub correction_slopes: Vec<f64>,
}

/// A multilevel run over one dataset: owns the iterate, the hierarchy, the
/// work counter and both RNG streams (step randomness and subset resampling
/// are separate streams of the same seed, so stochastic smoothing draws are
/// unaffected by how often subsets are redrawn).
#[derive(Debug, Clone)]
pub struct MlvrRun<'a> {
    dataset: &'a SparseDataset,
    lambda: f64,
    cfg: MlvrConfig,
    /// `cfg.coarsest_steps` resolved against the hierarchy sizes.
    coarse_steps: usize,
    sizes: Vec<usize>,
    hierarchy: SampleHierarchy,
    w: Vec<f64>,
    counter: EvalCounter,
    step_rng: ChaCha8Rng,
    resample_rng: ChaCha8Rng,
    diag: CycleDiagnostics,
    cycles_done: usize,
}

impl<'a> MlvrRun<'a> {
    pub fn new(
        dataset: &'a SparseDataset,
        lambda: f64,
        level_sizes: &[usize],
        cfg: MlvrConfig,
        seed: u64,
    ) -> Result<Self, SolverError> {
        cfg.validate()?;
        if lambda < 0.0 {
            return Err(SolverError::Config("lambda must be nonnegative".into()));
        }
        SampleHierarchy::validate_sizes(level_sizes, dataset.n_samples())
            .map_err(|e| SolverError::Config(e.to_string()))?;
        let mut resample_rng = hierarchy_rng(seed);
        let hierarchy =
            SampleHierarchy::draw(dataset.n_samples(), level_sizes, seed, &mut resample_rng);
        let coarse_steps = match cfg.coarsest_steps {
            CoarsestSteps::Fixed(k) => k,
            CoarsestSteps::WorkBalanced => {
                let per_step = if cfg.coarsest_optimizer.is_first_order() {
                    level_sizes[0]
                } else {
                    level_sizes[0] * (1 + cfg.cg.max_iters)
                };
                (dataset.n_samples() / per_step).max(1)
            }
        };
        Ok(Self {
            dataset,
            lambda,
            cfg,
            coarse_steps,
            sizes: level_sizes.to_vec(),
            hierarchy,
            w: vec![0.0; dataset.n_features()],
            counter: EvalCounter::new(dataset.n_samples()),
            step_rng: ChaCha8Rng::seed_from_u64(seed),
            resample_rng,
            diag: CycleDiagnostics::default(),
            cycles_done: 0,
        })
    }

    pub fn iterate(&self) -> &[f64] {
        &self.w
    }

    pub fn effective_grads(&self) -> f64 {
        self.counter.effective_grads()
    }

    pub fn hierarchy(&self) -> &SampleHierarchy {
        &self.hierarchy
    }

    pub fn cycles_done(&self) -> usize {
        self.cycles_done
    }

    /// Diagnostics of the most recent cycle.
    pub fn diagnostics(&self) -> &CycleDiagnostics {
        &self.diag
    }

    pub fn loss(&self) -> f64 {
        LogisticObjective::full(self.dataset, self.lambda).value(&self.w)
    }

    /// Run one V-cycle from the current iterate.
    pub fn cycle(&mut self) -> Result<(), SolverError> {
        if self.cycles_done > 0 && self.cfg.resample == ResamplePolicy::PerCycle {
            self.hierarchy = SampleHierarchy::draw(
                self.dataset.n_samples(),
                &self.sizes,
                self.hierarchy.seed(),
                &mut self.resample_rng,
            );
        }
        self.diag = CycleDiagnostics::default();
        let w0 = self.w.clone();
        let top = self.hierarchy.num_levels() - 1;
        self.w = self.v_cycle(top, w0, None)?;
        self.cycles_done += 1;
        Ok(())
    }

    /// Recursive descent through the hierarchy. `coupling` carries the fine
    /// gradient and the fine iterate it was taken at (absent at the finest
    /// level, whose objective is the plain full-dataset loss).
    fn v_cycle(
        &mut self,
        level: usize,
        w0: Vec<f64>,
        coupling: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Vec<f64>, SolverError> {
        let dataset = self.dataset;
        let objective = match coupling {
            None => CoupledObjective::uncoupled(LogisticObjective::full(dataset, self.lambda)),
            Some((fine_grad, anchor)) => {
                let base = LogisticObjective::over_subset(
                    dataset,
                    self.hierarchy.level(level).to_vec(),
                    self.lambda,
                );
                let obj =
                    CoupledObjective::make_coupled(base, fine_grad, anchor, &mut self.counter);
                self.record_consistency(&obj);
                obj
            }
        };

        if level == 0 {
            let mut w = w0;
            let kind = self.cfg.coarsest_optimizer.clone();
            for _ in 0..self.coarse_steps {
                w = self.level_step(&objective, w, &kind)?;
            }
            return Ok(w);
        }

        let mut w = w0;
        let fine_kind = self.cfg.fine_optimizer.clone();
        for _ in 0..self.cfg.pre_steps {
            w = self.level_step(&objective, w, &fine_kind)?;
        }

        let g_mid = objective.gradient(&w, &mut self.counter);
        let w_coarse = self.v_cycle(level - 1, w.clone(), Some((g_mid.clone(), w.clone())))?;

        match self.cfg.acceptance {
            AcceptanceRule::Verbatim => {
                self.diag.correction_slopes.push(dot(&g_mid, &sub(&w_coarse, &w)));
                self.diag.correction_alphas.push(1.0);
                // Adopt the coarse result directly: recomposing it as
                // w + 1·(w_coarse − w) would reintroduce rounding.
                w = w_coarse;
            }
            AcceptanceRule::LineSearch => {
                let p = sub(&w_coarse, &w);
                let slope = dot(&g_mid, &p);
                self.diag.correction_slopes.push(slope);
                let alpha = if slope >= 0.0 || p.iter().all(|x| *x == 0.0) {
                    0.0 // not a certified descent direction: keep w
                } else {
                    match backtracking_line_search(
                        |x| objective.value(x),
                        &w,
                        &p,
                        &g_mid,
                        &self.cfg.line_search,
                    ) {
                        Ok(a) => a,
                        // No trial step achieved sufficient decrease (the
                        // correction may be dominated by noise near a
                        // stationary point): reject rather than move.
                        Err(SolverError::LineSearchFailed { .. }) => 0.0,
                        Err(e) => return Err(e),
                    }
                };
                self.diag.correction_alphas.push(alpha);
                if alpha != 0.0 {
                    for i in 0..w.len() {
                        w[i] += alpha * p[i];
                    }
                }
            }
        }

        for _ in 0..self.cfg.post_steps {
            w = self.level_step(&objective, w, &fine_kind)?;
        }
        Ok(w)
    }

    /// One optimizer iteration on the given level objective.
    fn level_step(
        &mut self,
        obj: &CoupledObjective<'a>,
        mut w: Vec<f64>,
        kind: &OptimizerKind,
    ) -> Result<Vec<f64>, SolverError> {
        match kind {
            OptimizerKind::GdFixed(alpha) => {
                let g = obj.gradient(&w, &mut self.counter);
                for i in 0..w.len() {
                    w[i] -= alpha * g[i];
                }
            }
            OptimizerKind::GdLineSearch => {
                let g = obj.gradient(&w, &mut self.counter);
                if norm2(&g) == 0.0 {
                    return Ok(w);
                }
                let p: Vec<f64> = g.iter().map(|x| -x).collect();
                match backtracking_line_search(
                    |x| obj.value(x),
                    &w,
                    &p,
                    &g,
                    &self.cfg.line_search,
                ) {
                    Ok(alpha) => {
                        for i in 0..w.len() {
                            w[i] += alpha * p[i];
                        }
                    }
                    // So close to a minimizer that no certifiable decrease
                    // exists at this level: keep the iterate.
                    Err(SolverError::LineSearchFailed { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            OptimizerKind::Sgd(alpha) => {
                let k = self.step_rng.random_range(0..obj.sample_count());
                let g = obj.sample_gradient(&w, k, &mut self.counter);
                for i in 0..w.len() {
                    w[i] -= alpha * g[i];
                }
            }
            OptimizerKind::NewtonCgFixed(alpha) => {
                let g = obj.gradient(&w, &mut self.counter);
                if norm2(&g) == 0.0 {
                    return Ok(w);
                }
                let b: Vec<f64> = g.iter().map(|x| -x).collect();
                let counter = &mut self.counter;
                let p = cg_solve(|v| obj.hvp(&w, v, counter), &b, &self.cfg.cg)?;
                for i in 0..w.len() {
                    w[i] += alpha * p[i];
                }
            }
            OptimizerKind::NewtonCgLineSearch => {
                let g = obj.gradient(&w, &mut self.counter);
                if norm2(&g) == 0.0 {
                    return Ok(w);
                }
                let b: Vec<f64> = g.iter().map(|x| -x).collect();
                let counter = &mut self.counter;
                let p = cg_solve(|v| obj.hvp(&w, v, counter), &b, &self.cfg.cg)?;
                match backtracking_line_search(
                    |x| obj.value(x),
                    &w,
                    &p,
                    &g,
                    &self.cfg.line_search,
                ) {
                    Ok(alpha) => {
                        for i in 0..w.len() {
                            w[i] += alpha * p[i];
                        }
                    }
                    Err(SolverError::LineSearchFailed { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(w)
    }

    /// Measure how far the coupled gradient at the entry point is from the
    /// fine gradient it must match (in ulps, worst component).
    fn record_consistency(&mut self, obj: &CoupledObjective<'_>) {
        if let (Some(anchor), Some(fine)) = (obj.anchor(), obj.fine_gradient()) {
            let at = anchor.to_vec();
            let fine = fine.to_vec();
            let g = obj.gradient(&at, &mut self.counter);
            let ulps = g
                .iter()
                .zip(&fine)
                .map(|(a, b)| ulp_distance(*a, *b))
                .max()
                .unwrap_or(0);
            self.diag.consistency_max_ulps = self.diag.consistency_max_ulps.max(ulps);
        }
    }
}

impl Stepper for MlvrRun<'_> {
    fn step(&mut self) -> Result<(), SolverError> {
        self.cycle()
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn effective_grads(&self) -> f64 {
        self.counter.effective_grads()
    }

    fn loss(&self) -> f64 {
        MlvrRun::loss(self)
    }
}

/// Run V-cycles until convergence or budget exhaustion, recording one trace
/// row per cycle.
pub fn train_mlvr(
    ds: &SparseDataset,
    lambda: f64,
    level_sizes: &[usize],
    cfg: &MlvrConfig,
    rc: &RunConfig,
) -> Result<Trace, SolverError> {
    let mut run = MlvrRun::new(ds, lambda, level_sizes, cfg.clone(), rc.seed)?;
    let meta = TraceMeta {
        method: "mlvr".into(),
        dataset: rc.dataset_name.clone(),
        seed: rc.seed,
        config_digest: config_digest(&[
            "mlvr".into(),
            float_bits(lambda),
            format!("{level_sizes:?}"),
            format!("{cfg:?}"),
        ]),
    };
    drive(&mut run, rc, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{GdStepper, SsnStepper, StepRule, SubsetStrategy, SvrgStepper};
    use crate::experiment::RunStatus;
    use crate::synthetic::{synthetic_logistic, SyntheticConfig};

    fn instance(n: usize, d: usize, seed: u64) -> SparseDataset {
        synthetic_logistic(&SyntheticConfig {
            n,
            d,
            scale_span: 10.0,
            label_noise: 0.1,
            seed,
        })
    }

    #[test]
    fn config_validation_catches_bad_setups() {
        let cfg = MlvrConfig {
            fine_optimizer: OptimizerKind::NewtonCgLineSearch,
            ..MlvrConfig::default()
        };
        assert!(cfg.validate().is_err());

        let cfg = MlvrConfig {
            pre_steps: 0,
            post_steps: 0,
            coarsest_steps: CoarsestSteps::Fixed(0),
            ..MlvrConfig::default()
        };
        assert!(cfg.validate().is_err());

        let cfg = MlvrConfig {
            coarsest_optimizer: OptimizerKind::NewtonCgFixed(-1.0),
            ..MlvrConfig::default()
        };
        assert!(cfg.validate().is_err());

        let mut cfg = MlvrConfig::default();
        cfg.line_search.shrink = 1.5;
        assert!(cfg.validate().is_err());

        assert!(MlvrConfig::default().validate().is_ok());
        assert!(MlvrConfig::svrg(0.1, 5).validate().is_ok());
        assert!(MlvrConfig::subsampled_newton(1.0).validate().is_ok());
    }

    #[test]
    fn single_level_fixed_gd_matches_plain_gradient_descent() {
        let ds = instance(30, 4, 1);
        let lambda = 1.0 / 30.0;
        let cfg = MlvrConfig {
            coarsest_optimizer: OptimizerKind::GdFixed(0.05),
            coarsest_steps: CoarsestSteps::Fixed(1),
            ..MlvrConfig::default()
        };
        let mut run = MlvrRun::new(&ds, lambda, &[30], cfg, 0).unwrap();
        let mut gd = GdStepper::new(LogisticObjective::full(&ds, lambda), StepRule::Fixed(0.05));
        for _ in 0..5 {
            run.cycle().unwrap();
            gd.step().unwrap();
            assert_eq!(run.iterate(), gd.iterate());
        }
        assert_eq!(run.effective_grads(), 5.0);

        // Same degeneration with backtracking instead of a fixed step.
        let cfg = MlvrConfig {
            coarsest_optimizer: OptimizerKind::GdLineSearch,
            ..MlvrConfig::default()
        };
        let mut run = MlvrRun::new(&ds, lambda, &[30], cfg, 0).unwrap();
        let mut gd = GdStepper::new(
            LogisticObjective::full(&ds, lambda),
            StepRule::LineSearch(LineSearchConfig::default()),
        );
        for _ in 0..3 {
            run.cycle().unwrap();
            gd.step().unwrap();
            assert_eq!(run.iterate(), gd.iterate());
        }
    }

    #[test]
    fn two_level_svrg_mode_reproduces_svrg_bitwise() {
        let ds = instance(40, 3, 2);
        let lambda = 1.0 / 40.0;
        let (alpha, m, seed) = (0.05, 10, 11);
        let mut svrg =
            SvrgStepper::new(LogisticObjective::full(&ds, lambda), alpha, m, seed);
        let mut run =
            MlvrRun::new(&ds, lambda, &[40, 40], MlvrConfig::svrg(alpha, m), seed).unwrap();
        for _ in 0..3 {
            svrg.step().unwrap();
            run.cycle().unwrap();
            assert_eq!(run.iterate(), svrg.iterate());
        }
    }

    #[test]
    fn two_level_newton_mode_reproduces_subsampled_newton_bitwise() {
        let ds = instance(60, 4, 3);
        let lambda = 1.0 / 60.0;
        let seed = 5;
        let sizes = [15, 60];
        let hierarchy = SampleHierarchy::build(&ds, &sizes, seed).unwrap();
        let mut ssn = SsnStepper::new(
            LogisticObjective::full(&ds, lambda),
            SubsetStrategy::Fixed(hierarchy.coarsest().to_vec()),
            CgConfig::default(),
            StepRule::Fixed(1.0),
            seed,
        );
        let mut run =
            MlvrRun::new(&ds, lambda, &sizes, MlvrConfig::subsampled_newton(1.0), seed)
                .unwrap();
        // The run's initial hierarchy must equal the standalone build.
        assert_eq!(run.hierarchy().coarsest(), hierarchy.coarsest());
        for _ in 0..5 {
            ssn.step().unwrap();
            run.cycle().unwrap();
            assert_eq!(run.iterate(), ssn.iterate());
        }
    }

    #[test]
    fn default_cycles_decrease_the_loss_monotonically() {
        let ds = instance(200, 5, 4);
        let lambda = 1.0 / 200.0;
        let f_star = crate::experiment::compute_reference(&ds, lambda)
            .unwrap()
            .f_star;
        for post_steps in [0, 1] {
            let cfg = MlvrConfig {
                post_steps,
                ..MlvrConfig::default()
            };
            let mut run = MlvrRun::new(&ds, lambda, &[50, 200], cfg, 7).unwrap();
            let mut prev = run.loss();
            let initial_gap = prev - f_star;
            for _ in 0..5 {
                run.cycle().unwrap();
                let cur = run.loss();
                assert!(cur < prev, "loss rose from {prev} to {cur}");
                prev = cur;
            }
            let final_gap = prev - f_star;
            assert!(
                final_gap < 0.5 * initial_gap,
                "five cycles only shrank the gap from {initial_gap} to {final_gap} \
                 (post={post_steps})"
            );
        }
    }

    #[test]
    fn cycles_survive_line_search_stalls_near_the_optimum() {
        // Drive far past the point where a gradient step can still certify an
        // Armijo decrease (the smoother's predicted decrease drops below one
        // ulp of the loss long before the Newton correction stops helping).
        // Every cycle must complete without error and never increase the loss.
        let ds = instance(40, 3, 9);
        let lambda = 1.0 / 40.0;
        let mut run = MlvrRun::new(&ds, lambda, &[10, 40], MlvrConfig::default(), 2).unwrap();
        let mut prev = run.loss();
        for _ in 0..300 {
            run.cycle().unwrap();
            let cur = run.loss();
            assert!(cur <= prev, "loss rose from {prev} to {cur}");
            prev = cur;
        }
        let f_star = crate::experiment::compute_reference(&ds, lambda)
            .unwrap()
            .f_star;
        assert!(prev - f_star < 1e-12, "gap stuck at {}", prev - f_star);
    }

    #[test]
    fn three_level_cycles_descend() {
        let ds = instance(200, 5, 8);
        let lambda = 1.0 / 200.0;
        let f_star = crate::experiment::compute_reference(&ds, lambda)
            .unwrap()
            .f_star;
        let mut run =
            MlvrRun::new(&ds, lambda, &[20, 60, 200], MlvrConfig::default(), 1).unwrap();
        let initial_gap = run.loss() - f_star;
        for _ in 0..5 {
            run.cycle().unwrap();
        }
        let final_gap = run.loss() - f_star;
        assert!(
            final_gap < 0.5 * initial_gap,
            "gap only went from {initial_gap} to {final_gap}"
        );
        // One correction per non-coarsest level.
        assert_eq!(run.diagnostics().correction_alphas.len(), 2);
    }

    #[test]
    fn coarse_corrections_are_fine_level_descent_directions() {
        // With the full sample set at the coarse level and a Newton-CG solve
        // there, the correction must be a descent direction for the fine
        // objective — the slope diagnostics record ⟨∇F(w_mid), p⟩ directly.
        for seed in 0..10 {
            let ds = instance(50, 4, 100 + seed);
            let lambda = 1.0 / 50.0;
            let mut run =
                MlvrRun::new(&ds, lambda, &[50, 50], MlvrConfig::default(), seed).unwrap();
            for _ in 0..3 {
                run.cycle().unwrap();
                for slope in &run.diagnostics().correction_slopes {
                    assert!(*slope < 0.0, "non-descent correction, slope {slope}");
                }
                for alpha in &run.diagnostics().correction_alphas {
                    assert!(*alpha > 0.0);
                }
            }
        }
    }

    #[test]
    fn coupled_levels_report_exact_consistency() {
        let ds = instance(100, 4, 5);
        let mut run =
            MlvrRun::new(&ds, 0.01, &[25, 100], MlvrConfig::default(), 3).unwrap();
        for _ in 0..4 {
            run.cycle().unwrap();
            assert_eq!(run.diagnostics().consistency_max_ulps, 0);
        }
    }

    #[test]
    fn per_cycle_resampling_redraws_subsets_and_frozen_does_not() {
        let ds = instance(100, 3, 6);
        let cfg = MlvrConfig {
            resample: ResamplePolicy::PerCycle,
            ..MlvrConfig::default()
        };
        let mut run = MlvrRun::new(&ds, 0.01, &[20, 100], cfg, 9).unwrap();
        let first = run.hierarchy().coarsest().to_vec();
        run.cycle().unwrap(); // cycle 0 uses the initial hierarchy
        assert_eq!(run.hierarchy().coarsest(), first.as_slice());
        run.cycle().unwrap();
        assert_ne!(run.hierarchy().coarsest(), first.as_slice());

        let cfg = MlvrConfig {
            resample: ResamplePolicy::Frozen,
            ..MlvrConfig::default()
        };
        let mut frozen = MlvrRun::new(&ds, 0.01, &[20, 100], cfg, 9).unwrap();
        let first = frozen.hierarchy().coarsest().to_vec();
        for _ in 0..3 {
            frozen.cycle().unwrap();
            assert_eq!(frozen.hierarchy().coarsest(), first.as_slice());
        }
    }

    #[test]
    fn runs_are_seed_reproducible() {
        let ds = instance(80, 4, 7);
        let make = |seed| {
            let mut run =
                MlvrRun::new(&ds, 0.0125, &[20, 80], MlvrConfig::default(), seed).unwrap();
            for _ in 0..3 {
                run.cycle().unwrap();
            }
            run.iterate().to_vec()
        };
        assert_eq!(make(2), make(2));
        assert_ne!(make(2), make(3));
    }

    #[test]
    fn stochastic_smoothing_cost_stays_within_bounds() {
        let ds = instance(100, 4, 9);
        let lambda = 0.01;
        let cfg = MlvrConfig {
            fine_optimizer: OptimizerKind::Sgd(0.05),
            ..MlvrConfig::default()
        };
        let mut run = MlvrRun::new(&ds, lambda, &[10, 100], cfg, 0).unwrap();
        run.cycle().unwrap();
        let n = 100.0;
        let h = 10.0;
        // One stochastic smoothing draw (1/n), the fine gradient (1), the
        // coupling gradient on the subset (h/n), and at most 10 CG products
        // (10h/n). The coarse entry gradient reuses the stored fine gradient,
        // so it adds nothing.
        let cost = run.effective_grads();
        assert!(cost > 1.0 / n + 1.0 + h / n);
        assert!(cost <= 1.0 / n + 1.0 + 11.0 * h / n);
    }

    #[test]
    fn train_mlvr_traces_budget_and_convergence() {
        let ds = instance(120, 4, 10);
        let lambda = 1.0 / 120.0;
        let f_star = crate::experiment::compute_reference(&ds, lambda)
            .unwrap()
            .f_star;

        let rc = RunConfig::new(f_star).with_budget(500.0);
        let trace =
            train_mlvr(&ds, lambda, &[30, 120], &MlvrConfig::default(), &rc).unwrap();
        assert_eq!(trace.status, RunStatus::Converged);
        assert!(trace.records.last().unwrap().loss_diff < 1e-9);
        assert_eq!(trace.records[0].grad_calls, 0.0);

        let rc = RunConfig::new(f_star).with_budget(3.0);
        let trace =
            train_mlvr(&ds, lambda, &[30, 120], &MlvrConfig::default(), &rc).unwrap();
        assert_eq!(trace.status, RunStatus::BudgetExhausted);
        assert!(trace.records.iter().all(|r| r.grad_calls <= 3.0));
    }
}
