//! Sparse datasets in LIBSVM format and nested sample hierarchies.
//!
//! A hierarchy is a chain of index sets D^1 ⊆ D^2 ⊆ … ⊆ D^L over the rows of
//! one dataset, with the finest level always the full dataset. Coarser levels
//! are drawn uniformly without replacement *from their parent level*, so the
//! nesting holds by construction.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::DataError;

/// Immutable design matrix in compressed sparse row layout plus ±1 labels.
///
/// Feature indices are 0-based in memory; the LIBSVM on-disk format is
/// 1-based and converted on the way in and out.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    n_features: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl SparseDataset {
    /// Parse LIBSVM-format text: one sample per line, `label idx:val idx:val …`
    /// with 1-based, strictly ascending indices. Whitespace-only lines are
    /// skipped. `n_features_override` may widen (never narrow) the feature
    /// count beyond the largest observed index.
    ///
    /// Raw labels already in {-1, +1} are kept; exactly two other distinct
    /// values map smaller ↦ -1, larger ↦ +1; any other label set is an error.
    pub fn parse_libsvm<R: BufRead>(
        reader: R,
        n_features_override: Option<usize>,
    ) -> Result<Self, DataError> {
        let parse_err = |line: usize, msg: String| DataError::Parse { line, msg };

        let mut raw_labels = Vec::new();
        let mut row_ptr = vec![0usize];
        let mut col_idx: Vec<u32> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut max_feature = 0usize;

        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line1 = lineno + 1;
            let mut tokens = line.split_whitespace();
            let Some(label_tok) = tokens.next() else {
                continue; // blank line
            };
            let label: f64 = label_tok
                .parse()
                .map_err(|_| parse_err(line1, format!("invalid label token {label_tok:?}")))?;
            if !label.is_finite() {
                return Err(parse_err(line1, format!("non-finite label {label_tok:?}")));
            }
            raw_labels.push(label);

            let mut prev_idx: u32 = 0;
            for tok in tokens {
                let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| {
                    parse_err(line1, format!("malformed pair {tok:?} (expected index:value)"))
                })?;
                let idx: u32 = idx_s
                    .parse()
                    .map_err(|_| parse_err(line1, format!("invalid feature index {idx_s:?}")))?;
                if idx == 0 {
                    return Err(parse_err(line1, "feature indices are 1-based".into()));
                }
                if idx <= prev_idx {
                    return Err(parse_err(
                        line1,
                        format!("non-ascending feature index {idx} after {prev_idx}"),
                    ));
                }
                prev_idx = idx;
                let val: f64 = val_s
                    .parse()
                    .map_err(|_| parse_err(line1, format!("invalid feature value {val_s:?}")))?;
                if !val.is_finite() {
                    return Err(parse_err(line1, format!("non-finite feature value {val_s:?}")));
                }
                col_idx.push(idx - 1);
                values.push(val);
                max_feature = max_feature.max(idx as usize);
            }
            row_ptr.push(col_idx.len());
        }

        if raw_labels.is_empty() {
            return Err(DataError::Config("dataset contains no samples".into()));
        }
        let n_features = match n_features_override {
            Some(d) if d < max_feature => {
                return Err(DataError::Config(format!(
                    "feature-count override {d} is below the largest observed index {max_feature}"
                )));
            }
            Some(d) => d,
            None => max_feature,
        };
        let labels = map_labels(raw_labels)?;

        Ok(Self {
            n_features,
            row_ptr,
            col_idx,
            values,
            labels,
        })
    }

    /// Build a dataset from 0-based `(index, value)` rows. Used by synthetic
    /// generators and tests; validates the same invariants the parser does.
    pub fn from_parts(
        labels: Vec<f64>,
        rows: Vec<Vec<(u32, f64)>>,
        n_features: usize,
    ) -> Result<Self, DataError> {
        if labels.len() != rows.len() {
            return Err(DataError::Config(format!(
                "{} labels for {} rows",
                labels.len(),
                rows.len()
            )));
        }
        if labels.is_empty() {
            return Err(DataError::Config("dataset contains no samples".into()));
        }
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<u32> = None;
            for &(idx, val) in row {
                if (idx as usize) >= n_features {
                    return Err(DataError::Config(format!(
                        "row {i}: feature index {idx} out of range for {n_features} features"
                    )));
                }
                if prev.is_some_and(|p| idx <= p) {
                    return Err(DataError::Config(format!(
                        "row {i}: feature indices not strictly ascending"
                    )));
                }
                if !val.is_finite() {
                    return Err(DataError::Config(format!("row {i}: non-finite value")));
                }
                prev = Some(idx);
                col_idx.push(idx);
                values.push(val);
            }
            row_ptr.push(col_idx.len());
        }
        let labels = map_labels(labels)?;
        Ok(Self {
            n_features,
            row_ptr,
            col_idx,
            values,
            labels,
        })
    }

    /// Dense-row convenience constructor; zeros are dropped.
    pub fn from_dense(
        labels: Vec<f64>,
        rows: &[Vec<f64>],
        n_features: usize,
    ) -> Result<Self, DataError> {
        let sparse = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j as u32, *v))
                    .collect()
            })
            .collect();
        Self::from_parts(labels, sparse, n_features)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Label of sample `i`, guaranteed to be -1.0 or +1.0.
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Sparse row `i` as parallel `(indices, values)` slices.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Count of +1 labels (the rest are -1).
    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|l| **l > 0.0).count()
    }

    /// Content digest (SHA-256, lowercase hex) over shape, labels, and rows.
    /// Stable across processes; used to key cached reference solutions.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"dataset-v1");
        h.update((self.n_samples() as u64).to_le_bytes());
        h.update((self.n_features as u64).to_le_bytes());
        for i in 0..self.n_samples() {
            h.update(self.labels[i].to_bits().to_le_bytes());
            let (cols, vals) = self.row(i);
            h.update((cols.len() as u64).to_le_bytes());
            for (c, v) in cols.iter().zip(vals) {
                h.update(c.to_le_bytes());
                h.update(v.to_bits().to_le_bytes());
            }
        }
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Serialize back to LIBSVM text (1-based indices). Values print in the
    /// shortest decimal form that round-trips, so parse(to_libsvm(ds)) == ds.
    pub fn to_libsvm<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for i in 0..self.n_samples() {
            if self.labels[i] > 0.0 {
                w.write_all(b"+1")?;
            } else {
                w.write_all(b"-1")?;
            }
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                write!(w, " {}:{}", c + 1, v)?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn map_labels(raw: Vec<f64>) -> Result<Vec<f64>, DataError> {
    let mut distinct = raw.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.iter().all(|l| *l == -1.0 || *l == 1.0) {
        return Ok(raw);
    }
    if distinct.len() == 2 {
        let lo = distinct[0];
        return Ok(raw
            .iter()
            .map(|l| if *l == lo { -1.0 } else { 1.0 })
            .collect());
    }
    Err(DataError::Labels(format!("{distinct:?}")))
}

/// RNG stream reserved for hierarchy draws. Optimizer step draws use the
/// default stream of the same seed, so one user-facing seed can drive both
/// without the index sequences interfering.
pub(crate) fn hierarchy_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Uniform sample of `k` elements from `parent` without replacement
/// (partial Fisher–Yates), returned sorted.
pub(crate) fn sample_nested(parent: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    debug_assert!(k <= parent.len());
    let mut pool = parent.to_vec();
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

/// Nested index sets over one dataset, coarsest level first.
///
/// `levels[l]` holds sorted dataset row indices with
/// `levels[0] ⊆ levels[1] ⊆ … ⊆ levels[L-1] = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleHierarchy {
    levels: Vec<Vec<usize>>,
    seed: u64,
}

impl SampleHierarchy {
    /// Draw a hierarchy with the given per-level sizes (coarsest first; the
    /// last size must equal the dataset's sample count). Deterministic in
    /// `seed`.
    pub fn build(
        dataset: &SparseDataset,
        level_sizes: &[usize],
        seed: u64,
    ) -> Result<Self, DataError> {
        Self::validate_sizes(level_sizes, dataset.n_samples())?;
        let mut rng = hierarchy_rng(seed);
        Ok(Self::draw(dataset.n_samples(), level_sizes, seed, &mut rng))
    }

    /// Draw from an already-positioned RNG (per-cycle resampling reuses one
    /// stream so consecutive cycles see fresh, reproducible draws).
    pub(crate) fn draw(
        n_samples: usize,
        level_sizes: &[usize],
        seed: u64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let l = level_sizes.len();
        let mut levels: Vec<Vec<usize>> = vec![Vec::new(); l];
        levels[l - 1] = (0..n_samples).collect();
        for i in (0..l - 1).rev() {
            levels[i] = sample_nested(&levels[i + 1], level_sizes[i], rng);
        }
        SampleHierarchy { levels, seed }
    }

    pub fn validate_sizes(level_sizes: &[usize], n_samples: usize) -> Result<(), DataError> {
        if level_sizes.is_empty() {
            return Err(DataError::Config("level size list is empty".into()));
        }
        if level_sizes[0] == 0 {
            return Err(DataError::Config("level sizes must be positive".into()));
        }
        for pair in level_sizes.windows(2) {
            if pair[1] < pair[0] {
                return Err(DataError::Config(format!(
                    "level sizes must be nondecreasing: {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        let last = *level_sizes.last().unwrap();
        if last != n_samples {
            return Err(DataError::Config(format!(
                "finest level size {last} must equal the sample count {n_samples}"
            )));
        }
        Ok(())
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Sorted row indices of level `l` (0 = coarsest).
    pub fn level(&self, l: usize) -> &[usize] {
        &self.levels[l]
    }

    pub fn coarsest(&self) -> &[usize] {
        self.level(0)
    }

    pub fn finest(&self) -> &[usize] {
        self.level(self.num_levels() - 1)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }
}

/// Expand a coarsest size into a full size list by repeated doubling, capped
/// at `n`; the finest level is always exactly `n`.
pub fn doubled_level_sizes(
    coarsest: usize,
    levels: usize,
    n_samples: usize,
) -> Result<Vec<usize>, DataError> {
    if levels < 2 {
        return Err(DataError::Config(
            "a hierarchy needs at least two levels".into(),
        ));
    }
    if coarsest == 0 || coarsest > n_samples {
        return Err(DataError::Config(format!(
            "coarsest size {coarsest} out of range for {n_samples} samples"
        )));
    }
    let mut sizes = Vec::with_capacity(levels);
    sizes.push(coarsest);
    for _ in 1..levels - 1 {
        let next = (sizes.last().unwrap() * 2).min(n_samples);
        sizes.push(next);
    }
    sizes.push(n_samples);
    Ok(sizes)
}
