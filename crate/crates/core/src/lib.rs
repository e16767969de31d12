//! Finite-sum optimization with multilevel variance reduction.
//!
//! The crate centers on ℓ2-regularized logistic regression over LIBSVM-style
//! datasets and compares a multilevel V-cycle scheme (`mlvr`) against
//! classical baselines (GD, Newton-CG, SGD, SVRG, SARAH, sub-sampled Newton)
//! under a common work measure: effective gradient evaluations, where a
//! gradient or Hessian-vector product over s of n samples costs s/n.
//!
//! Modules:
//! - [`data`]: sparse datasets, LIBSVM parsing, nested sample hierarchies;
//! - [`objective`]: the logistic objective, coarse coupled surrogates, and
//!   the evaluation counter;
//! - [`solvers`]: matrix-free conjugate gradient and Armijo backtracking;
//! - [`baselines`]: the reference optimizers and the shared trace driver;
//! - [`mlvr`]: the multilevel V-cycle optimizer;
//! - [`experiment`]: traces, CSV serialization, cached reference optima;
//! - [`synthetic`]: synthetic instances for tests and benchmarks.

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mlvr;
pub mod objective;
pub mod solvers;
pub mod synthetic;

pub use baselines::{
    drive, run_gd, run_newton_cg, run_sarah, run_sgd, run_ssn, run_svrg, GdStepper,
    NewtonCgStepper, RunConfig, SarahStepper, SgdStepper, SsnStepper, StepRule, Stepper,
    SubsetStrategy, SvrgStepper,
};
pub use data::{doubled_level_sizes, SampleHierarchy, SparseDataset};
pub use error::{DataError, ExperimentError, SolverError};
pub use experiment::{
    compute_reference, load_or_compute_reference, read_csv_records, ReferenceSolution, RunStatus,
    Trace, TraceMeta, TraceRecord, REFERENCE_GRAD_TOL,
};
pub use mlvr::{
    train_mlvr, AcceptanceRule, CoarsestSteps, CycleDiagnostics, MlvrConfig, MlvrRun,
    OptimizerKind, ResamplePolicy,
};
pub use objective::{
    CoupledObjective, EvalCounter, FiniteSumObjective, LogisticObjective, SubsetObjective,
};
pub use solvers::{backtracking_line_search, cg_solve, CgConfig, LineSearchConfig};
pub use synthetic::{synthetic_logistic, QuadraticSum, SyntheticConfig};
