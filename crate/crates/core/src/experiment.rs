//! Experiment plumbing shared by every optimizer: run metadata, convergence
//! traces with CSV serialization, and cached reference optima that the
//! loss-gap column is measured against.

use crate::data::SparseDataset;
use crate::error::{ExperimentError, SolverError};
use crate::linalg::{all_finite, axpy, norm2};
use crate::objective::{EvalCounter, FiniteSumObjective, LogisticObjective};
use crate::solvers::{backtracking_line_search, cg_solve, CgConfig, LineSearchConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

/// Identity of one run. The config digest covers every parameter that shapes
/// the run except the seed, so sweeps over seeds share a digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceMeta {
    pub method: String,
    pub dataset: String,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Diverged,
}

/// One point of a convergence curve: cumulative effective gradient
/// evaluations and the loss gap F(w) − F*.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub grad_calls: f64,
    pub loss_diff: f64,
}

/// A recorded convergence curve. Costs are strictly increasing across
/// records, and the gap stays above −1e-12 when F* is a true optimum (tiny
/// negative values only reflect rounding).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
    pub status: RunStatus,
}

impl Trace {
    pub fn final_gap(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss_diff)
    }

    pub fn final_cost(&self) -> Option<f64> {
        self.records.last().map(|r| r.grad_calls)
    }

    /// Plain-decimal CSV, one row per record. The float formatting is the
    /// shortest representation that parses back to the identical bits, so
    /// emitted files round-trip exactly and identical runs produce identical
    /// bytes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "grad_calls,loss_diff")?;
        for r in &self.records {
            writeln!(out, "{},{}", r.grad_calls, r.loss_diff)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        let wrap = |source: io::Error| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(wrap)?;
            }
        }
        let file = fs::File::create(path).map_err(wrap)?;
        self.write_csv(io::BufWriter::new(file)).map_err(wrap)
    }
}

/// Parse records from CSV produced by `write_csv`. Strict about the header
/// and column count; reports 1-based line numbers on malformed input.
pub fn read_csv_records<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>, ExperimentError> {
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h == "grad_calls,loss_diff" => {}
        Some((_, Ok(h))) => {
            return Err(ExperimentError::TraceFormat {
                line: 1,
                msg: format!("unexpected header {h:?}"),
            })
        }
        Some((_, Err(e))) => {
            return Err(ExperimentError::TraceFormat {
                line: 1,
                msg: e.to_string(),
            })
        }
        None => {
            return Err(ExperimentError::TraceFormat {
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| ExperimentError::TraceFormat {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        let bad = |msg: String| ExperimentError::TraceFormat {
            line: idx + 1,
            msg,
        };
        let mut parts = line.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(bad(format!("expected two columns, got {line:?}"))),
        };
        let grad_calls: f64 = a
            .parse()
            .map_err(|e| bad(format!("bad grad_calls {a:?}: {e}")))?;
        let loss_diff: f64 = b
            .parse()
            .map_err(|e| bad(format!("bad loss_diff {b:?}: {e}")))?;
        records.push(TraceRecord {
            grad_calls,
            loss_diff,
        });
    }
    Ok(records)
}

/// Short hex digest over an ordered list of configuration fragments
/// (length-prefixed, so fragment boundaries cannot collide).
pub(crate) fn config_digest(parts: &[String]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(16);
    for byte in &digest[..8] {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

pub(crate) fn float_bits(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

/// A computed optimum for one (dataset, λ) pair. `converged` reports whether
/// the gradient-norm target was reached; otherwise `grad_norm` records the
/// best achieved norm and `f_star` the loss there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub f_star: f64,
    pub w: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient-norm target for reference solves.
pub const REFERENCE_GRAD_TOL: f64 = 1e-12;

/// Minimize the full objective to high accuracy with Newton-CG: tight CG
/// solves, backtracking line search while decreases are measurable, and unit
/// Newton steps once predicted decreases fall below float resolution (which
/// is when a backtracking search can no longer certify progress). Up to 200
/// iterations; the best-gradient-norm iterate is returned, flagged as
/// unconverged if the target was never reached.
pub fn compute_reference(
    ds: &SparseDataset,
    lambda: f64,
) -> Result<ReferenceSolution, SolverError> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(SolverError::Config(
            "reference optimum requires lambda > 0".into(),
        ));
    }
    let obj = LogisticObjective::full(ds, lambda);
    let d = obj.dim();
    let mut scratch = EvalCounter::new(ds.n_samples());
    // Finite-precision CG loses orthogonality on ill-conditioned Hessians and
    // needs several multiples of d to reach a 1e-12 residual; it stops on the
    // tolerance, so the generous cap only costs time when it is needed.
    let cg = CgConfig {
        max_iters: (10 * d).max(100),
        rel_tol: 1e-12,
    };
    let ls = LineSearchConfig::default();
    let mut w = vec![0.0; d];
    let mut best_w = w.clone();
    let mut best_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut stale = 0;
    for _ in 0..200 {
        let g = obj.gradient(&w, &mut scratch);
        let gn = norm2(&g);
        if gn < best_norm {
            best_norm = gn;
            best_w.copy_from_slice(&w);
            stale = 0;
        } else {
            // At the float floor of the gradient computation further Newton
            // steps just churn; stop once improvement has clearly ceased.
            stale += 1;
            if stale >= 10 {
                break;
            }
        }
        if gn <= REFERENCE_GRAD_TOL {
            break;
        }
        let b: Vec<f64> = g.iter().map(|x| -x).collect();
        let p = cg_solve(|v| obj.hvp(&w, v, &mut scratch), &b, &cg)?;
        let alpha = match backtracking_line_search(|x| obj.value(x), &w, &p, &g, &ls) {
            Ok(a) => a,
            Err(SolverError::LineSearchFailed { .. }) if gn <= 1e-6 => 1.0,
            Err(SolverError::NotDescent { .. }) if gn <= 1e-6 => break,
            Err(e) => return Err(e),
        };
        axpy(alpha, &p, &mut w);
        if !all_finite(&w) {
            return Err(SolverError::NonFinite {
                context: "reference iterate",
            });
        }
        iterations += 1;
    }
    Ok(ReferenceSolution {
        f_star: obj.value(&best_w),
        w: best_w,
        grad_norm: best_norm,
        iterations,
        converged: best_norm <= REFERENCE_GRAD_TOL,
    })
}

fn reference_key(ds: &SparseDataset, lambda: f64) -> String {
    format!("{}:{:016x}", ds.digest(), lambda.to_bits())
}

/// Reference optimum with a JSON sidecar cache keyed by the dataset digest
/// and the exact bits of λ. The cache file holds a map, so one file can
/// serve many (dataset, λ) pairs.
pub fn load_or_compute_reference(
    cache_path: &Path,
    ds: &SparseDataset,
    lambda: f64,
) -> Result<ReferenceSolution, ExperimentError> {
    let wrap = |source: io::Error| ExperimentError::Io {
        path: cache_path.to_path_buf(),
        source,
    };
    let key = reference_key(ds, lambda);
    let mut cache: BTreeMap<String, ReferenceSolution> = if cache_path.exists() {
        let file = fs::File::open(cache_path).map_err(wrap)?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| {
            ExperimentError::Config(format!(
                "corrupt reference cache {}: {e}",
                cache_path.display()
            ))
        })?
    } else {
        BTreeMap::new()
    };
    if let Some(hit) = cache.get(&key) {
        return Ok(hit.clone());
    }
    let solution = compute_reference(ds, lambda)?;
    cache.insert(key, solution.clone());
    if let Some(parent) = cache_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(wrap)?;
        }
    }
    let file = fs::File::create(cache_path).map_err(wrap)?;
    serde_json::to_writer_pretty(io::BufWriter::new(file), &cache)
        .map_err(|e| ExperimentError::Config(format!("cache serialization failed: {e}")))?;
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseDataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta() -> TraceMeta {
        TraceMeta {
            method: "gd".into(),
            dataset: "toy".into(),
            seed: 0,
            config_digest: "abcd".into(),
        }
    }

    #[test]
    fn csv_bytes_are_exactly_as_specified() {
        let trace = Trace {
            meta: meta(),
            records: vec![
                TraceRecord {
                    grad_calls: 0.0,
                    loss_diff: 2.0f64.ln(),
                },
                TraceRecord {
                    grad_calls: 1.0,
                    loss_diff: 0.25,
                },
                TraceRecord {
                    grad_calls: 2.5,
                    loss_diff: 1e-9,
                },
            ],
            status: RunStatus::Converged,
        };
        assert_eq!(
            trace.to_csv(),
            "grad_calls,loss_diff\n0,0.6931471805599453\n1,0.25\n2.5,0.000000001\n"
        );
    }

    #[test]
    fn csv_round_trips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let records: Vec<TraceRecord> = (0..200)
            .map(|i| TraceRecord {
                grad_calls: i as f64 + rng.random::<f64>(),
                loss_diff: rng.random::<f64>() * 10f64.powi(rng.random_range(-12..3)),
            })
            .collect();
        let trace = Trace {
            meta: meta(),
            records: records.clone(),
            status: RunStatus::BudgetExhausted,
        };
        let parsed = read_csv_records(trace.to_csv().as_bytes()).unwrap();
        assert_eq!(parsed.len(), records.len());
        for (a, b) in parsed.iter().zip(&records) {
            assert_eq!(a.grad_calls.to_bits(), b.grad_calls.to_bits());
            assert_eq!(a.loss_diff.to_bits(), b.loss_diff.to_bits());
        }
    }

    #[test]
    fn csv_reader_rejects_malformed_input() {
        let err = read_csv_records("nope\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ExperimentError::TraceFormat { line: 1, .. }));
        let err = read_csv_records("grad_calls,loss_diff\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ExperimentError::TraceFormat { line: 2, .. }));
        let err = read_csv_records("grad_calls,loss_diff\n1,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ExperimentError::TraceFormat { line: 2, .. }));
    }

    #[test]
    fn config_digest_separates_fragments() {
        let a = config_digest(&["ab".into(), "c".into()]);
        let b = config_digest(&["a".into(), "bc".into()]);
        assert_ne!(a, b);
        assert_eq!(a.len(), 16);
        assert_eq!(a, config_digest(&["ab".into(), "c".into()]));
    }

    #[test]
    fn reference_respects_problem_symmetry() {
        // Margins depend only on the first coordinate, so the optimum's
        // second coordinate is exactly zero.
        let ds = SparseDataset::from_parts(
            vec![1.0, -1.0],
            vec![vec![(0, 1.0)], vec![(0, -1.0)]],
            2,
        )
        .unwrap();
        let sol = compute_reference(&ds, 0.1).unwrap();
        assert!(sol.converged, "grad norm {}", sol.grad_norm);
        assert!(sol.w[0] > 0.0);
        assert_eq!(sol.w[1], 0.0);
    }

    #[test]
    fn reference_with_huge_regularizer_sits_at_origin() {
        let ds = SparseDataset::from_parts(
            vec![1.0, -1.0],
            vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            2,
        )
        .unwrap();
        let sol = compute_reference(&ds, 1e6).unwrap();
        assert!(norm2(&sol.w) < 1e-5);
        assert!((sol.f_star - 2.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn reference_matches_dense_newton_oracle() {
        // Independent oracle: explicit 2×2 Hessian, closed-form inverse,
        // naive (unstabilized) logistic formulas.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let n = 4;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let labels: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let ds = SparseDataset::from_dense(labels.clone(), &rows, 2).unwrap();
            let lambda = 0.25;

            let sig = |t: f64| 1.0 / (1.0 + (-t).exp());
            let mut w = [0.0f64; 2];
            for _ in 0..60 {
                let mut g = [lambda * w[0], lambda * w[1]];
                let mut h = [[lambda, 0.0], [0.0, lambda]];
                for i in 0..n {
                    let x = &rows[i];
                    let z = x[0] * w[0] + x[1] * w[1];
                    let y = labels[i];
                    let c = -y * sig(-y * z) / n as f64;
                    g[0] += c * x[0];
                    g[1] += c * x[1];
                    let s = sig(z);
                    let d = s * (1.0 - s) / n as f64;
                    h[0][0] += d * x[0] * x[0];
                    h[0][1] += d * x[0] * x[1];
                    h[1][0] += d * x[1] * x[0];
                    h[1][1] += d * x[1] * x[1];
                }
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                w[0] -= (h[1][1] * g[0] - h[0][1] * g[1]) / det;
                w[1] -= (-h[1][0] * g[0] + h[0][0] * g[1]) / det;
            }

            let sol = compute_reference(&ds, lambda).unwrap();
            assert!(sol.grad_norm < 1e-12, "grad norm {}", sol.grad_norm);
            assert!((sol.w[0] - w[0]).abs() < 1e-8);
            assert!((sol.w[1] - w[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn reference_cache_round_trips_and_keys_by_lambda() {
        let ds = SparseDataset::from_parts(
            vec![1.0, -1.0],
            vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            2,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache").join("reference.json");
        let first = load_or_compute_reference(&path, &ds, 0.5).unwrap();
        assert!(path.exists());
        let second = load_or_compute_reference(&path, &ds, 0.5).unwrap();
        assert_eq!(first, second);
        let other = load_or_compute_reference(&path, &ds, 0.25).unwrap();
        assert_ne!(first.f_star, other.f_star);
        let raw = fs::read_to_string(&path).unwrap();
        let map: BTreeMap<String, ReferenceSolution> = serde_json::from_str(&raw).unwrap();
        assert_eq!(map.len(), 2);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let ds = SparseDataset::from_parts(vec![1.0], vec![vec![(0, 1.0)]], 1).unwrap();
        assert!(compute_reference(&ds, 0.0).is_err());
    }
}
