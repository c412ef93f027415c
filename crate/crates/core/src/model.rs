//! Shared domain types: task ids, per-task solution boxes, the flat joint
//! weight vector, observation counters and the diagonal coordination weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a task in `[0, K)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId(pub usize);

impl TaskId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between ordered pairs `(i, j)`, `i != j`, over `n` items and
/// task indices in `[0, n² − n)`. Pairs are numbered row-major with the
/// diagonal skipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairIndex {
    n: usize,
}

impl PairIndex {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n.saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < self.n && j < self.n);
        i * (self.n - 1) + if j > i { j - 1 } else { j }
    }

    #[inline]
    pub fn pair(&self, z: usize) -> (usize, usize) {
        let i = z / (self.n - 1);
        let r = z % (self.n - 1);
        (i, if r >= i { r + 1 } else { r })
    }

    pub fn task(&self, i: usize, j: usize) -> TaskId {
        TaskId(self.index(i, j))
    }
}

/// Axis-aligned per-task feasible set `S_z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SolutionBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidStructure("solution box must have at least one coordinate".into()));
        }
        if let Some(k) = (0..lower.len()).find(|&k| !(lower[k] <= upper[k])) {
            return Err(Error::InvalidStructure(format!(
                "box coordinate {k}: lower {} exceeds upper {}",
                lower[k], upper[k]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lo, hi]` on each of `d` coordinates.
    pub fn uniform(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Euclidean diameter, `‖upper − lower‖₂`.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// Euclidean projection onto the box, coordinate-wise.
    pub fn clamp(&self, w: &mut [f64]) {
        for ((x, &lo), &hi) in w.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(lo, hi);
        }
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        w.len() == self.dim()
            && w.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&x, &lo), &hi)| x >= lo - tol && x <= hi + tol)
    }
}

/// Concatenation of the `K` per-task weight vectors, task-major: task `z`
/// occupies `[z·d, (z+1)·d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointVector {
    values: Vec<f64>,
    dim: usize,
}

impl JointVector {
    pub fn zeros(tasks: usize, dim: usize) -> Self {
        Self {
            values: vec![0.0; tasks * dim],
            dim,
        }
    }

    pub fn from_values(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1) * (values.len() / dim.max(1) + 1),
                actual: values.len(),
            });
        }
        Ok(Self { values, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tasks(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn task(&self, z: TaskId) -> &[f64] {
        &self.values[z.0 * self.dim..(z.0 + 1) * self.dim]
    }

    pub fn task_mut(&mut self, z: TaskId) -> &mut [f64] {
        &mut self.values[z.0 * self.dim..(z.0 + 1) * self.dim]
    }

    pub fn set_task(&mut self, z: TaskId, w: &[f64]) {
        self.task_mut(z).copy_from_slice(w);
    }
}

/// Per-task observation counts `τ_z` and the running total `t`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ObservationCounters {
    counts: Vec<u64>,
    total: u64,
}

impl ObservationCounters {
    pub fn new(tasks: usize) -> Self {
        Self {
            counts: vec![0; tasks],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn observe(&mut self, z: TaskId) -> u64 {
        self.counts[z.0] += 1;
        self.total += 1;
        self.counts[z.0]
    }

    pub fn count(&self, z: TaskId) -> u64 {
        self.counts[z.0]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn tasks(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Diagonal of the `dK × dK` coordination matrix `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    diagonal: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_diagonal(diagonal: Vec<f64>) -> Self {
        Self { diagonal }
    }

    pub fn identity(len: usize) -> Self {
        Self {
            diagonal: vec![1.0; len],
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn all_positive(&self) -> bool {
        self.diagonal.iter().all(|&q| q > 0.0)
    }
}

/// `Q = diag(√τ_1 ×d, …, √τ_K ×d)`.
pub fn build_weight_matrix(counters: &ObservationCounters, d: usize) -> WeightMatrix {
    let diagonal = counters
        .counts()
        .iter()
        .flat_map(|&tau| std::iter::repeat_n((tau as f64).sqrt(), d))
        .collect();
    WeightMatrix { diagonal }
}

/// `(a − b)ᵀ Q (a − b)` for diagonal `Q`.
///
/// Panics if the three lengths disagree.
pub fn mahalanobis_sq(a: &[f64], b: &[f64], q: &WeightMatrix) -> f64 {
    assert_eq!(a.len(), b.len(), "mahalanobis_sq: operand lengths differ");
    assert_eq!(a.len(), q.len(), "mahalanobis_sq: weight length differs");
    a.iter()
        .zip(b)
        .zip(q.diagonal())
        .map(|((x, y), w)| w * (x - y) * (x - y))
        .sum()
}

/// Subgradient reported by a learner for the instance it just served.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub task: TaskId,
    pub subgradient: Vec<f64>,
    /// Declared `‖G_z‖`.
    pub norm_bound: f64,
}

impl GradientReport {
    pub fn new(task: TaskId, subgradient: Vec<f64>, norm_bound: f64) -> Self {
        Self {
            task,
            subgradient,
            norm_bound,
        }
    }

    pub fn norm(&self) -> f64 {
        self.subgradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}
