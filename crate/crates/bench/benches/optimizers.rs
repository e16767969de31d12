//! Micro-benchmarks for the hot kernels (objective evaluations, CG solves)
//! and for one unit of work of each optimizer on a fixed synthetic instance.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use mlvr_core::{
    cg_solve, synthetic_logistic, CgConfig, EvalCounter, FiniteSumObjective, GdStepper,
    LineSearchConfig, LogisticObjective, MlvrConfig, MlvrRun, SparseDataset, SsnStepper,
    StepRule, Stepper, SubsetStrategy, SvrgStepper, SyntheticConfig,
};

const N: usize = 2000;
const D: usize = 50;

fn instance() -> SparseDataset {
    synthetic_logistic(&SyntheticConfig {
        n: N,
        d: D,
        scale_span: 1e4,
        label_noise: 0.05,
        seed: 0,
    })
}

/// A generic non-trivial point so the kernels do not benefit from w = 0
/// short-circuits in the exp/log evaluations.
fn probe_point() -> Vec<f64> {
    (0..D).map(|j| 0.01 * (j as f64 + 1.0).sin()).collect()
}

fn bench_objective_kernels(c: &mut Criterion) {
    let ds = instance();
    let lambda = 1.0 / N as f64;
    let obj = LogisticObjective::full(&ds, lambda);
    let w = probe_point();
    let v: Vec<f64> = (0..D).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();

    let mut group = c.benchmark_group("objective");
    group.throughput(Throughput::Elements(N as u64));
    group.bench_function("value", |b| {
        b.iter(|| black_box(obj.value(black_box(&w))));
    });
    group.bench_function("gradient", |b| {
        let mut counter = EvalCounter::new(N);
        b.iter(|| black_box(obj.gradient(black_box(&w), &mut counter)));
    });
    group.bench_function("hvp", |b| {
        let mut counter = EvalCounter::new(N);
        b.iter(|| black_box(obj.hvp(black_box(&w), black_box(&v), &mut counter)));
    });
    group.finish();
}

fn bench_cg_solve(c: &mut Criterion) {
    let ds = instance();
    let lambda = 1.0 / N as f64;
    let obj = LogisticObjective::full(&ds, lambda);
    let w = probe_point();
    let mut counter = EvalCounter::new(N);
    let g = obj.gradient(&w, &mut counter);
    let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
    let cg = CgConfig {
        max_iters: 10,
        rel_tol: 0.0, // force all ten iterations for a fixed amount of work
    };

    c.bench_function("cg/newton_system_10_iters", |b| {
        let mut counter = EvalCounter::new(N);
        b.iter(|| {
            cg_solve(
                |v| obj.hvp(black_box(&w), v, &mut counter),
                black_box(&rhs),
                &cg,
            )
            .unwrap()
        });
    });
}

fn bench_optimizer_units(c: &mut Criterion) {
    let ds = instance();
    let lambda = 1.0 / N as f64;

    let mut group = c.benchmark_group("optimizer_unit");
    group.sample_size(30);

    group.bench_function("gd_line_search_step", |b| {
        b.iter_batched(
            || {
                GdStepper::new(
                    LogisticObjective::full(&ds, lambda),
                    StepRule::LineSearch(LineSearchConfig::default()),
                )
            },
            |mut stepper| {
                stepper.step().unwrap();
                black_box(stepper.iterate().to_vec())
            },
            BatchSize::SmallInput,
        );
    });

    group.bench_function("svrg_outer_epoch", |b| {
        b.iter_batched(
            || SvrgStepper::new(LogisticObjective::full(&ds, lambda), 0.05, N, 0),
            |mut stepper| {
                stepper.step().unwrap();
                black_box(stepper.iterate().to_vec())
            },
            BatchSize::SmallInput,
        );
    });

    group.bench_function("ssn_newton_step", |b| {
        b.iter_batched(
            || {
                SsnStepper::new(
                    LogisticObjective::full(&ds, lambda),
                    SubsetStrategy::Redraw(100),
                    CgConfig::default(),
                    StepRule::LineSearch(LineSearchConfig::default()),
                    0,
                )
            },
            |mut stepper| {
                stepper.step().unwrap();
                black_box(stepper.iterate().to_vec())
            },
            BatchSize::SmallInput,
        );
    });

    for sizes in [vec![50, N], vec![50, 100, N]] {
        let name = format!("v_cycle_{}_levels", sizes.len());
        group.bench_function(&name, |b| {
            b.iter_batched(
                || MlvrRun::new(&ds, lambda, &sizes, MlvrConfig::default(), 0).unwrap(),
                |mut run| {
                    run.cycle().unwrap();
                    black_box(run.iterate().to_vec())
                },
                BatchSize::SmallInput,
            );
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_objective_kernels,
    bench_cg_solve,
    bench_optimizer_units
);
criterion_main!(benches);
