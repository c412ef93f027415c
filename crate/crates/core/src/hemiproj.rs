//! Weighted projection onto the set of r-bounded hemimetrics.
//!
//! The solver is a dual coordinate ascent over every triangle inequality
//! (`d_ij ≤ d_ik + d_kj`) and every box face (`0 ≤ d_ij ≤ r`), i.e. triangle
//! fixing generalised to a diagonal weighting. After each sweep the current
//! primal candidate `d′ + e` is repaired into the feasible set by a
//! shortest-path relaxation, and the weighted distance of the repaired point
//! is compared with the dual objective. The loop stops once that duality gap
//! is below the requested tolerance, so every returned point is feasible and
//! carries a certificate of its suboptimality.
//!
//! Vectors in the public API are indexed by ordered pair through
//! [`PairIndex`]; internally everything runs on a dense `n × n` buffer with
//! an unused diagonal.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::PairIndex;

/// Relative floor on the stopping gap. Floating-point cancellation in the
/// dual makes gaps below this level meaningless.
pub const GAP_FLOOR: f64 = 1e-12;

/// Residual violation, relative to `1 + r`, accepted when filling unweighted
/// pairs.
const FILL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HemimetricInstance {
    pairs: PairIndex,
    r: f64,
}

impl HemimetricInstance {
    pub fn new(n: usize, r: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidStructure(format!("hemimetric needs n >= 2 items, got {n}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidStructure(format!("hemimetric bound r must be positive, got {r}")));
        }
        Ok(Self {
            pairs: PairIndex::new(n),
            r,
        })
    }

    pub fn items(&self) -> usize {
        self.pairs.items()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn pairs(&self) -> PairIndex {
        self.pairs
    }

    /// Number of ordered pairs, `n² − n`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    fn dense(&self, v: &[f64], fill: f64) -> Vec<f64> {
        let n = self.items();
        let mut m = vec![fill; n * n];
        for (z, &x) in v.iter().enumerate() {
            let (i, j) = self.pairs.pair(z);
            m[i * n + j] = x;
        }
        m
    }

    fn packed(&self, m: &[f64]) -> Vec<f64> {
        let n = self.items();
        (0..self.len())
            .map(|z| {
                let (i, j) = self.pairs.pair(z);
                m[i * n + j]
            })
            .collect()
    }

    /// Box and triangle feasibility within `tol`.
    pub fn is_member(&self, d: &[f64], tol: f64) -> bool {
        if d.len() != self.len() {
            return false;
        }
        if d.iter().any(|&x| !(x >= -tol && x <= self.r + tol)) {
            return false;
        }
        let n = self.items();
        let m = self.dense(d, 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dij = m[i * n + j];
                for k in 0..n {
                    if k != i && k != j && dij > m[i * n + k] + m[k * n + j] + tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Largest violation of any triangle inequality or box face (0 when feasible).
    pub fn max_violation(&self, d: &[f64]) -> f64 {
        let n = self.items();
        let m = self.dense(d, 0.0);
        let mut worst = 0.0f64;
        for &x in d {
            worst = worst.max(-x).max(x - self.r);
        }
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                for k in (0..n).filter(|&k| k != i && k != j) {
                    worst = worst.max(m[i * n + j] - m[i * n + k] - m[k * n + j]);
                }
            }
        }
        worst
    }
}

/// Repairs `d` into the r-bounded hemimetric set: all-pairs shortest-path
/// relaxation, which can only lower entries, followed by clipping into
/// `[0, r]`.
///
/// Rounded path sums can leave a triangle violated by an ulp; relaxation is
/// repeated until nothing changes, so the output is an exact fixed point.
pub fn floyd_warshall_clip(d: &[f64], inst: &HemimetricInstance) -> Vec<f64> {
    let n = inst.items();
    let mut m = inst.dense(d, 0.0);
    relax_clip(&mut m, n, inst.r());
    while relax(&mut m, n) {}
    inst.packed(&m)
}

fn relax_clip(m: &mut [f64], n: usize, r: f64) {
    relax(m, n);
    let mut negative = false;
    for (idx, x) in m.iter_mut().enumerate() {
        if idx % (n + 1) != 0 {
            negative |= *x < 0.0;
            *x = x.clamp(0.0, r);
        }
    }
    // Negative entries can close negative cycles, where one pass of
    // relaxation is not enough; after clipping all lengths are non-negative.
    if negative {
        relax(m, n);
    }
}

/// Returns whether any entry was lowered.
fn relax(m: &mut [f64], n: usize) -> bool {
    let mut changed = false;
    for k in 0..n {
        for i in 0..n {
            if i == k {
                continue;
            }
            let dik = m[i * n + k];
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                let via = dik + m[k * n + j];
                if m[i * n + j] > via {
                    m[i * n + j] = via;
                    changed = true;
                }
            }
        }
    }
    changed
}

/// Perturbation and dual multipliers of the triangle-fixing iteration.
///
/// `e`, `x`, `y` and the violation terms live on the dense `n × n` layout;
/// `z` and `v_z` are indexed by `(i·n + j)·n + k`. Use the `*_pairs`
/// accessors for pair-indexed views.
#[derive(Clone, Debug)]
pub struct HemimetricDualState {
    n: usize,
    r: f64,
    pub e: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub v_x: Vec<f64>,
    pub v_y: Vec<f64>,
    pub v_z: Vec<f64>,
}

impl HemimetricDualState {
    /// Zero perturbation and multipliers; violation terms are the constraint
    /// slacks of the unprojected point `d′`.
    pub fn new(inst: &HemimetricInstance, d_prime: &[f64]) -> Result<Self> {
        inst.check_len(d_prime)?;
        Ok(Self::from_dense(inst.dense(d_prime, 0.0), inst.items(), inst.r()))
    }

    fn from_dense(dm: Vec<f64>, n: usize, r: f64) -> Self {
        let mut v_z = vec![0.0; n * n * n];
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                for k in (0..n).filter(|&k| k != i && k != j) {
                    v_z[(i * n + j) * n + k] = dm[i * n + k] + dm[k * n + j] - dm[i * n + j];
                }
            }
        }
        let v_y = dm
            .iter()
            .enumerate()
            .map(|(idx, &d)| if idx % (n + 1) == 0 { 0.0 } else { r - d })
            .collect();
        Self {
            n,
            r,
            e: vec![0.0; n * n],
            x: vec![0.0; n * n],
            y: vec![0.0; n * n],
            z: vec![0.0; n * n * n],
            v_x: dm,
            v_y,
            v_z,
        }
    }

    pub fn items(&self) -> usize {
        self.n
    }

    fn pairs_of(&self, m: &[f64]) -> Vec<f64> {
        let p = PairIndex::new(self.n);
        (0..p.len())
            .map(|z| {
                let (i, j) = p.pair(z);
                m[i * self.n + j]
            })
            .collect()
    }

    pub fn e_pairs(&self) -> Vec<f64> {
        self.pairs_of(&self.e)
    }

    pub fn x_pairs(&self) -> Vec<f64> {
        self.pairs_of(&self.x)
    }

    pub fn y_pairs(&self) -> Vec<f64> {
        self.pairs_of(&self.y)
    }

    /// Triangle multiplier for the constraint `d_ij ≤ d_ik + d_kj`.
    pub fn triangle_dual(&self, i: usize, j: usize, k: usize) -> f64 {
        self.z[(i * self.n + j) * self.n + k]
    }

    pub fn min_dual(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .chain(&self.z)
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// The primal candidate `d′ + e` in pair layout.
    pub fn candidate(&self) -> Vec<f64> {
        let sum: Vec<f64> = self.v_x.iter().zip(&self.e).map(|(d, e)| d + e).collect();
        self.pairs_of(&sum)
    }

    /// One pass over all ordered triples in lexicographic `(i, j, k)` order,
    /// followed by one pass over the box faces of every pair. `inv_q` holds
    /// `1/q` on the dense layout; a zero entry pins that coordinate.
    fn sweep_dense(&mut self, inv_q: &[f64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                if j == i {
                    continue;
                }
                let ij = i * n + j;
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let ik = i * n + k;
                    let kj = k * n + j;
                    let denom = inv_q[ij] + inv_q[ik] + inv_q[kj];
                    if denom == 0.0 {
                        continue;
                    }
                    let t = ij * n + k;
                    let mut theta = (self.e[ij] - self.e[ik] - self.e[kj] - self.v_z[t]) / denom;
                    if theta < -self.z[t] {
                        theta = -self.z[t];
                    }
                    self.e[ij] -= inv_q[ij] * theta;
                    self.e[ik] += inv_q[ik] * theta;
                    self.e[kj] += inv_q[kj] * theta;
                    self.z[t] += theta;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let ij = i * n + j;
                if i == j || inv_q[ij] == 0.0 {
                    continue;
                }
                let w = 1.0 / inv_q[ij];
                let mut theta = -w * (self.e[ij] + self.v_x[ij]);
                if theta < -self.x[ij] {
                    theta = -self.x[ij];
                }
                self.e[ij] += inv_q[ij] * theta;
                self.x[ij] += theta;

                let mut theta = w * (self.e[ij] - self.v_y[ij]);
                if theta < -self.y[ij] {
                    theta = -self.y[ij];
                }
                self.e[ij] -= inv_q[ij] * theta;
                self.y[ij] += theta;
            }
        }
    }

    fn dual_value(&self, q: &[f64]) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        let mut lin = 0.0;
        #[allow(clippy::needless_range_loop)]
        for idx in 0..n * n {
            if idx % (n + 1) == 0 {
                continue;
            }
            quad += q[idx] * self.e[idx] * self.e[idx];
            lin += self.x[idx] * self.v_x[idx] + self.y[idx] * self.v_y[idx];
        }
        lin += self.z.iter().zip(&self.v_z).map(|(z, v)| z * v).sum::<f64>();
        -quad - 2.0 * lin
    }

    fn repaired(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.v_x.iter().zip(&self.e).map(|(d, e)| d + e).collect();
        relax_clip(&mut m, self.n, self.r);
        m
    }
}

fn dense_weights(inst: &HemimetricInstance, q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    inst.check_len(q)?;
    if let Some(z) = q.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidStructure(format!(
            "triangle fixing needs strictly positive weights; weight {z} is {}",
            q[z]
        )));
    }
    let qm = inst.dense(q, 0.0);
    let inv = qm.iter().map(|&w| if w > 0.0 { 1.0 / w } else { 0.0 }).collect();
    Ok((qm, inv))
}

/// One triangle-fixing sweep followed by one box pass. All weights must be
/// strictly positive.
pub fn triangle_fix_sweep(state: &mut HemimetricDualState, inst: &HemimetricInstance, q: &[f64]) -> Result<()> {
    let (_, inv) = dense_weights(inst, q)?;
    state.sweep_dense(&inv);
    Ok(())
}

/// `(primal, dual)` for the current state: `primal` is the weighted distance
/// from `d′` to `d_repaired`, `dual` is the Lagrangian dual value of the
/// multipliers. Weak duality gives `primal ≥ optimum ≥ dual`.
pub fn duality_gap(
    state: &HemimetricDualState,
    inst: &HemimetricInstance,
    d_prime: &[f64],
    q: &[f64],
    d_repaired: &[f64],
) -> Result<(f64, f64)> {
    inst.check_len(d_prime)?;
    inst.check_len(d_repaired)?;
    let (qm, _) = dense_weights(inst, q)?;
    let primal = weighted_sq(d_repaired, d_prime, q);
    Ok((primal, state.dual_value(&qm)))
}

fn weighted_sq(a: &[f64], b: &[f64], q: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(q)
        .map(|((x, y), w)| w * (x - y) * (x - y))
        .sum()
}

/// Result of an approximate projection.
#[derive(Clone, Debug, PartialEq)]
pub struct HemimetricProjection {
    /// Feasible output, pair layout.
    pub d: Vec<f64>,
    /// Weighted distance of `d` from the input.
    pub primal: f64,
    /// Best dual value seen; a lower bound on the optimum.
    pub dual: f64,
    /// `primal − dual`, an upper bound on the suboptimality of `d`.
    pub gap: f64,
    pub sweeps: usize,
    /// The sweep cap was reached before the gap fell below the tolerance.
    pub capped: bool,
}

/// Progress reported after every sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepProgress {
    pub sweep: usize,
    pub primal: f64,
    pub dual: f64,
}

/// Default sweep cap, `10·n³`.
pub fn default_sweep_cap(n: usize) -> usize {
    10 * n * n * n
}

/// Projects `d′` onto the r-bounded hemimetrics under the weighted distance
/// `Σ q (d − d′)²`, stopping once the duality gap of the repaired iterate is
/// at most `delta`. All weights must be positive; see
/// [`hemimetric_project_partial`] for weights with zeros.
pub fn hemimetric_project(
    d_prime: &[f64],
    q: &[f64],
    inst: &HemimetricInstance,
    delta: f64,
) -> Result<HemimetricProjection> {
    hemimetric_project_observed(d_prime, q, inst, delta, default_sweep_cap(inst.items()), |_| {})
}

pub fn hemimetric_project_observed(
    d_prime: &[f64],
    q: &[f64],
    inst: &HemimetricInstance,
    delta: f64,
    cap: usize,
    mut observe: impl FnMut(SweepProgress),
) -> Result<HemimetricProjection> {
    if !(delta >= 0.0) {
        return Err(Error::NegativeGap(delta));
    }
    inst.check_len(d_prime)?;
    let (qm, inv) = dense_weights(inst, q)?;
    let mut state = HemimetricDualState::new(inst, d_prime)?;

    let mut best = state.repaired();
    let dm = &state.v_x;
    let mut primal = dense_weighted_sq(&best, dm, &qm, inst.items());
    let n = inst.items();
    if (0..n * n).all(|idx| idx % (n + 1) == 0 || best[idx] == dm[idx].clamp(0.0, inst.r())) {
        // The box projection is already a hemimetric, hence optimal.
        return Ok(HemimetricProjection {
            d: inst.packed(&best),
            primal,
            dual: primal,
            gap: 0.0,
            sweeps: 0,
            capped: false,
        });
    }
    let mut dual = 0.0f64;
    let tol = delta.max(GAP_FLOOR * (1.0 + primal));
    let mut sweeps = 0;

    while primal - dual > tol && sweeps < cap {
        state.sweep_dense(&inv);
        sweeps += 1;
        let cand = state.repaired();
        let p = dense_weighted_sq(&cand, &state.v_x, &qm, inst.items());
        let dv = state.dual_value(&qm);
        observe(SweepProgress {
            sweep: sweeps,
            primal: p,
            dual: dv,
        });
        if p < primal {
            primal = p;
            best = cand;
        }
        dual = dual.max(dv);
    }

    Ok(HemimetricProjection {
        d: inst.packed(&best),
        primal,
        dual,
        gap: (primal - dual).max(0.0),
        sweeps,
        capped: primal - dual > tol,
    })
}

fn dense_weighted_sq(a: &[f64], b: &[f64], q: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for idx in 0..n * n {
        if idx % (n + 1) != 0 {
            let diff = a[idx] - b[idx];
            s += q[idx] * diff * diff;
        }
    }
    s
}

/// A path inequality `d_edge ≤ Σ_{p ∈ path} d_p` between observed pairs.
#[derive(Clone, Debug)]
struct PathConstraint {
    edge: usize,
    path: Vec<usize>,
    slack: f64,
    lambda: f64,
}

/// Weighted projection when some weights are zero.
///
/// Zero-weight pairs do not enter the objective, so the positively weighted
/// pairs `W` are projected onto the set of partial assignments that extend to
/// a full r-bounded hemimetric: the box on each pair plus, for every pair in
/// `W`, every path through other pairs of `W`. Path constraints are
/// separated lazily by shortest-path search and fixed with the same dual
/// coordinate updates as triangles. Unweighted pairs are then set to the
/// feasible completion closest to their input values, which is the limit of
/// the projection as their weights shrink to zero.
pub fn hemimetric_project_partial(
    d_prime: &[f64],
    q: &[f64],
    inst: &HemimetricInstance,
    delta: f64,
) -> Result<HemimetricProjection> {
    hemimetric_project_partial_capped(d_prime, q, inst, delta, default_sweep_cap(inst.items()))
}

pub fn hemimetric_project_partial_capped(
    d_prime: &[f64],
    q: &[f64],
    inst: &HemimetricInstance,
    delta: f64,
    cap: usize,
) -> Result<HemimetricProjection> {
    if !(delta >= 0.0) {
        return Err(Error::NegativeGap(delta));
    }
    inst.check_len(d_prime)?;
    inst.check_len(q)?;
    if let Some(z) = q.iter().position(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidStructure(format!("weight {z} is {}", q[z])));
    }
    let n = inst.items();
    let r = inst.r();
    let dm = inst.dense(d_prime, 0.0);
    let qm = inst.dense(q, 0.0);
    let observed: Vec<usize> = (0..n * n).filter(|&idx| idx % (n + 1) != 0 && qm[idx] > 0.0).collect();
    let inv: Vec<f64> = qm.iter().map(|&w| if w > 0.0 { 1.0 / w } else { 0.0 }).collect();

    let objective = |m: &[f64]| -> f64 {
        observed
            .iter()
            .map(|&idx| qm[idx] * (m[idx] - dm[idx]) * (m[idx] - dm[idx]))
            .sum()
    };
    // Observed pairs take `d′ + e`, unobserved pairs are unconstrained.
    let repair = |e: &[f64]| -> Vec<f64> {
        let mut m = vec![f64::INFINITY; n * n];
        for &idx in &observed {
            m[idx] = dm[idx] + e[idx];
        }
        relax_clip(&mut m, n, r);
        m
    };

    let mut e = vec![0.0; n * n];
    let mut best = repair(&e);
    let mut primal = objective(&best);
    let mut is_observed = vec![false; n * n];
    for &idx in &observed {
        is_observed[idx] = true;
    }
    let finish = |mut best: Vec<f64>, dual: f64, sweeps: usize, capped: bool| {
        fill_unobserved(&mut best, &dm, &is_observed, n, r, cap);
        let primal = objective(&best);
        HemimetricProjection {
            d: inst.packed(&best),
            primal,
            dual,
            gap: (primal - dual).max(0.0),
            sweeps,
            capped,
        }
    };
    if observed.iter().all(|&idx| best[idx] == dm[idx].clamp(0.0, r)) {
        return Ok(finish(best, primal, 0, false));
    }
    let mut dual = 0.0f64;
    let tol = delta.max(GAP_FLOOR * (1.0 + primal));

    let mut x = vec![0.0; n * n];
    let mut y = vec![0.0; n * n];
    let mut constraints: Vec<PathConstraint> = Vec::new();
    let mut known: HashSet<(usize, Vec<usize>)> = HashSet::new();
    let mut sweeps = 0;

    while primal - dual > tol && sweeps < cap {
        separate_paths(&dm, &e, &is_observed, n, &mut constraints, &mut known);

        for c in constraints.iter_mut() {
            let mut ae = e[c.edge];
            let mut denom = inv[c.edge];
            for &p in &c.path {
                ae -= e[p];
                denom += inv[p];
            }
            let mut theta = (ae - c.slack) / denom;
            if theta < -c.lambda {
                theta = -c.lambda;
            }
            e[c.edge] -= inv[c.edge] * theta;
            for &p in &c.path {
                e[p] += inv[p] * theta;
            }
            c.lambda += theta;
        }
        for &idx in &observed {
            let mut theta = -qm[idx] * (e[idx] + dm[idx]);
            if theta < -x[idx] {
                theta = -x[idx];
            }
            e[idx] += inv[idx] * theta;
            x[idx] += theta;

            let mut theta = qm[idx] * (e[idx] - (r - dm[idx]));
            if theta < -y[idx] {
                theta = -y[idx];
            }
            e[idx] -= inv[idx] * theta;
            y[idx] += theta;
        }
        sweeps += 1;

        let cand = repair(&e);
        let p = objective(&cand);
        let mut quad = 0.0;
        let mut lin = 0.0;
        for &idx in &observed {
            quad += qm[idx] * e[idx] * e[idx];
            lin += x[idx] * dm[idx] + y[idx] * (r - dm[idx]);
        }
        lin += constraints.iter().map(|c| c.lambda * c.slack).sum::<f64>();
        let dv = -quad - 2.0 * lin;
        if p < primal {
            primal = p;
            best = cand;
        }
        dual = dual.max(dv);
    }

    Ok(finish(best, dual, sweeps, primal - dual > tol))
}

/// Sets the unobserved entries of `m` to the hemimetric completion nearest
/// (in Euclidean distance) to their values in `dm`, holding the observed
/// entries of `m` fixed. `m` must already be completable.
///
/// The iterative solve leaves violations of up to `tol` per triangle, so a
/// path of unobserved entries may fall short of an observed entry by up to
/// `n·tol`. Lifting the entries the solve moved by twice that and repairing
/// downward removes the residue without touching observed entries. Entries
/// the solve left alone keep their input values exactly.
fn fill_unobserved(m: &mut [f64], dm: &[f64], observed: &[bool], n: usize, r: f64, cap: usize) {
    let free = |idx: usize| !idx.is_multiple_of(n + 1) && !observed[idx];
    let keeps_observed = |cand: &[f64]| (0..n * n).all(|idx| free(idx) || idx % (n + 1) == 0 || cand[idx] == m[idx]);
    let mut start = m.to_vec();
    for idx in (0..n * n).filter(|&idx| free(idx)) {
        start[idx] = dm[idx].clamp(0.0, r);
    }
    let inv: Vec<f64> = (0..n * n).map(|idx| if free(idx) { 1.0 } else { 0.0 }).collect();
    let mut state = HemimetricDualState::from_dense(start.clone(), n, r);
    if fill_violation(&state, &inv, n, r) <= 0.0 {
        m.copy_from_slice(&start);
        return;
    }
    let tol = FILL_TOL * (1.0 + r);
    for _ in 0..cap {
        state.sweep_dense(&inv);
        if fill_violation(&state, &inv, n, r) <= tol {
            break;
        }
    }
    let lift = 2.0 * n as f64 * tol;
    for lift_all in [false, true] {
        let mut cand = start.clone();
        for idx in (0..n * n).filter(|&idx| free(idx)) {
            if lift_all || state.e[idx] != 0.0 {
                cand[idx] = state.v_x[idx] + state.e[idx] + lift;
            }
        }
        relax_clip(&mut cand, n, r);
        if keeps_observed(&cand) {
            m.copy_from_slice(&cand);
            return;
        }
    }
    for idx in (0..n * n).filter(|&idx| free(idx)) {
        m[idx] = f64::INFINITY;
    }
    relax_clip(m, n, r);
}

/// Largest violation of the constraints the fill can act on.
fn fill_violation(state: &HemimetricDualState, inv: &[f64], n: usize, r: f64) -> f64 {
    let mut worst = 0.0f64;
    for idx in (0..n * n).filter(|&idx| inv[idx] > 0.0) {
        let d = state.v_x[idx] + state.e[idx];
        worst = worst.max(-d).max(d - r);
    }
    for (t, &v) in state.v_z.iter().enumerate() {
        let (ij, k) = (t / n, t % n);
        let (i, j) = (ij / n, ij % n);
        if i == j || k == i || k == j {
            continue;
        }
        let (ik, kj) = (i * n + k, k * n + j);
        if inv[ij] + inv[ik] + inv[kj] > 0.0 {
            worst = worst.max(state.e[ij] - state.e[ik] - state.e[kj] - v);
        }
    }
    worst
}

/// Adds, for every observed pair whose current value exceeds the shortest
/// path through other observed pairs, that path as a new constraint.
fn separate_paths(
    dm: &[f64],
    e: &[f64],
    observed: &[bool],
    n: usize,
    constraints: &mut Vec<PathConstraint>,
    known: &mut HashSet<(usize, Vec<usize>)>,
) {
    let cur: Vec<f64> = (0..n * n).map(|idx| dm[idx] + e[idx]).collect();
    // Shortest paths with non-negative lengths; `next[i][j]` is the first hop.
    let mut dist = vec![f64::INFINITY; n * n];
    let mut next = vec![usize::MAX; n * n];
    for idx in 0..n * n {
        if observed[idx] {
            dist[idx] = cur[idx].max(0.0);
            next[idx] = idx % n;
        }
    }
    for i in 0..n {
        dist[i * n + i] = 0.0;
        next[i * n + i] = i;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let via = dik + dist[k * n + j];
                if via < dist[i * n + j] {
                    dist[i * n + j] = via;
                    next[i * n + j] = next[i * n + k];
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let edge = i * n + j;
            if i == j || !observed[edge] || next[edge] == j {
                continue;
            }
            let mut path = Vec::new();
            let mut len = 0.0;
            let mut u = i;
            let mut ok = true;
            while u != j {
                let v = next[u * n + j];
                if v == usize::MAX || path.len() > n {
                    ok = false;
                    break;
                }
                path.push(u * n + v);
                len += cur[u * n + v];
                u = v;
            }
            if !ok || path.len() < 2 || cur[edge] <= len + 1e-14 * (1.0 + cur[edge].abs()) {
                continue;
            }
            let key = (edge, path.clone());
            if known.insert(key) {
                let slack = path.iter().map(|&p| dm[p]).sum::<f64>() - dm[edge];
                constraints.push(PathConstraint {
                    edge,
                    path,
                    slack,
                    lambda: 0.0,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n3() -> HemimetricInstance {
        HemimetricInstance::new(3, 9.0).unwrap()
    }

    /// Pair vector for n = 3 from `(i, j, value)` triples (1-based), rest `fill`.
    fn v3(entries: &[(usize, usize, f64)], fill: f64) -> Vec<f64> {
        let inst = n3();
        let mut v = vec![fill; inst.len()];
        for &(i, j, x) in entries {
            v[inst.pairs().index(i - 1, j - 1)] = x;
        }
        v
    }

    #[test]
    fn floyd_warshall_examples() {
        let inst = n3();
        let d = v3(&[(1, 2, 7.0), (1, 3, 2.0), (3, 2, 3.0)], 9.0);
        let out = floyd_warshall_clip(&d, &inst);
        assert_eq!(out, v3(&[(1, 2, 5.0), (1, 3, 2.0), (3, 2, 3.0)], 9.0));

        let feasible = v3(&[], 1.0);
        assert_eq!(floyd_warshall_clip(&feasible, &inst), feasible);

        let neg = v3(&[(1, 2, -1.0)], 1.0);
        let out = floyd_warshall_clip(&neg, &inst);
        assert_eq!(out[inst.pairs().index(0, 1)], 0.0);
        assert!(inst.is_member(&out, 0.0));
    }

    #[test]
    fn floyd_warshall_is_downward_and_idempotent() {
        let inst = HemimetricInstance::new(5, 9.0).unwrap();
        let d: Vec<f64> = (0..inst.len()).map(|z| ((z * 37) % 11) as f64 * 0.8).collect();
        let once = floyd_warshall_clip(&d, &inst);
        for (a, b) in once.iter().zip(&d) {
            assert!(*a <= b.clamp(0.0, 9.0));
        }
        assert!(inst.is_member(&once, 0.0));
        assert_eq!(floyd_warshall_clip(&once, &inst), once);
    }

    #[test]
    fn sweep_on_feasible_point_is_a_no_op() {
        let inst = n3();
        let d = v3(&[], 1.0);
        let mut st = HemimetricDualState::new(&inst, &d).unwrap();
        triangle_fix_sweep(&mut st, &inst, &[1.0; 6]).unwrap();
        assert!(st.e.iter().all(|&x| x == 0.0));
        assert_eq!(st.min_dual(), 0.0);
        assert!(st.x.iter().chain(&st.y).chain(&st.z).all(|&x| x == 0.0));
    }

    #[test]
    fn lower_bound_correction() {
        let inst = n3();
        let d = v3(&[(1, 2, -1.0), (1, 3, 1.0), (2, 1, 3.0), (2, 3, 3.0), (3, 1, 3.0), (3, 2, 1.0)], 0.0);
        let q = v3(&[(1, 2, 2.5)], 1.0);
        let mut st = HemimetricDualState::new(&inst, &d).unwrap();
        triangle_fix_sweep(&mut st, &inst, &q).unwrap();
        let z = inst.pairs().index(0, 1);
        assert!((st.e_pairs()[z] - 1.0).abs() < 1e-12);
        assert!((st.x_pairs()[z] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn violated_triangle_sweeps_approach_kkt_point() {
        let inst = n3();
        let d = v3(&[(1, 2, 8.0), (1, 3, 1.0), (3, 2, 1.0)], 1.0);
        let q = vec![1.0; 6];
        let mut st = HemimetricDualState::new(&inst, &d).unwrap();
        for _ in 0..200 {
            triangle_fix_sweep(&mut st, &inst, &q).unwrap();
        }
        let e = st.e_pairs();
        let p = inst.pairs();
        assert!((e[p.index(0, 1)] + 2.0).abs() < 1e-9);
        assert!((e[p.index(0, 2)] - 2.0).abs() < 1e-9);
        assert!((e[p.index(2, 1)] - 2.0).abs() < 1e-9);
        assert!(st.min_dual() >= 0.0);
    }

    #[test]
    fn feasible_input_has_zero_gap() {
        let inst = n3();
        let d = v3(&[], 1.0);
        let q = vec![1.0; 6];
        let st = HemimetricDualState::new(&inst, &d).unwrap();
        let rep = floyd_warshall_clip(&st.candidate(), &inst);
        let (p, dv) = duality_gap(&st, &inst, &d, &q, &rep).unwrap();
        assert_eq!((p, dv), (0.0, 0.0));

        let out = hemimetric_project(&d, &q, &inst, 0.0).unwrap();
        assert_eq!(out.d, d);
        assert_eq!(out.gap, 0.0);
        assert_eq!(out.sweeps, 0);
        assert!(!out.capped);
    }

    #[test]
    fn projects_single_violated_triangle() {
        let inst = n3();
        let d = v3(&[(1, 2, 8.0), (1, 3, 1.0), (3, 2, 1.0)], 1.0);
        let out = hemimetric_project(&d, &[1.0; 6], &inst, 1e-10).unwrap();
        let want = v3(&[(1, 2, 6.0), (1, 3, 3.0), (3, 2, 3.0)], 1.0);
        for (a, b) in out.d.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6, "{:?}", out.d);
        }
        assert!((out.primal - 12.0).abs() < 1e-6);
        assert!(out.gap < 1e-8);
        assert!(inst.is_member(&out.d, 0.0));
    }

    #[test]
    fn loose_gap_returns_early_within_tolerance() {
        let inst = n3();
        let d = v3(&[(1, 2, 8.0), (1, 3, 1.0), (3, 2, 1.0)], 1.0);
        let q = vec![1.0; 6];
        let exact = hemimetric_project(&d, &q, &inst, 1e-10).unwrap();
        let loose = hemimetric_project(&d, &q, &inst, 0.5 * exact.primal).unwrap();
        assert!(loose.gap <= 0.5 * exact.primal);
        assert!(loose.primal >= exact.primal - 1e-9);
        assert!(loose.sweeps <= exact.sweeps);
        assert!(inst.is_member(&loose.d, 0.0));
    }

    #[test]
    fn weak_duality_holds_on_every_sweep() {
        let inst = HemimetricInstance::new(4, 9.0).unwrap();
        let d: Vec<f64> = (0..inst.len()).map(|z| ((z * 7 + 3) % 10) as f64).collect();
        let q: Vec<f64> = (0..inst.len()).map(|z| 0.5 + (z % 4) as f64).collect();
        let mut count = 0;
        hemimetric_project_observed(&d, &q, &inst, 1e-10, 10_000, |p| {
            count += 1;
            assert!(p.primal >= p.dual - 1e-9, "{p:?}");
        })
        .unwrap();
        assert!(count > 0);
    }

    #[test]
    fn dense_rejects_zero_weight() {
        let inst = n3();
        let err = hemimetric_project(&[1.0; 6], &[1.0, 0.0, 1.0, 1.0, 1.0, 1.0], &inst, 0.0);
        assert!(err.is_err());
        assert!(hemimetric_project(&[1.0; 6], &[1.0; 6], &inst, -1.0).is_err());
    }

    #[test]
    fn partial_with_single_observed_pair_clamps() {
        let inst = HemimetricInstance::new(4, 9.0).unwrap();
        let mut q = vec![0.0; inst.len()];
        let mut d = vec![4.5; inst.len()];
        q[3] = 2.0;
        d[3] = 9.7;
        let out = hemimetric_project_partial(&d, &q, &inst, 0.0).unwrap();
        assert_eq!(out.d[3], 9.0);
        assert!(inst.is_member(&out.d, 0.0));
    }

    #[test]
    fn partial_fill_moves_free_pairs_minimally() {
        let inst = n3();
        let mut d = v3(&[(1, 2, 9.0), (1, 3, 1.0), (3, 2, 1.0)], 1.0);
        let q = v3(&[(1, 2, 1.0)], 0.0);
        let out = hemimetric_project_partial(&d, &q, &inst, 0.0).unwrap();
        assert!(inst.is_member(&out.d, 1e-9));
        assert_eq!(out.d[inst.pairs().index(0, 1)], 9.0);
        assert!((out.d[inst.pairs().index(0, 2)] - 4.5).abs() < 1e-6);
        assert!((out.d[inst.pairs().index(2, 1)] - 4.5).abs() < 1e-6);
        // Free pairs already consistent with the observed ones stay put.
        d[inst.pairs().index(0, 2)] = 4.5;
        d[inst.pairs().index(2, 1)] = 4.5;
        let again = hemimetric_project_partial(&d, &q, &inst, 0.0).unwrap();
        assert_eq!(again.d, d);
    }

    #[test]
    fn partial_matches_dense_with_tiny_free_weights() {
        let inst = HemimetricInstance::new(4, 9.0).unwrap();
        let p = inst.pairs();
        let mut d = vec![5.0; inst.len()];
        let mut q = vec![0.0; inst.len()];
        // Observed chain 0→1→2→3 with a long direct edge 0→3.
        for (i, j, v, w) in [(0, 1, 1.0, 1.0), (1, 2, 1.5, 2.0), (2, 3, 0.5, 1.0), (0, 3, 8.0, 3.0)] {
            d[p.index(i, j)] = v;
            q[p.index(i, j)] = w;
        }
        let part = hemimetric_project_partial(&d, &q, &inst, 1e-12).unwrap();
        assert!(inst.is_member(&part.d, 1e-9));
        let tiny: Vec<f64> = q.iter().map(|&w| if w > 0.0 { w } else { 1e-5 }).collect();
        let dense = hemimetric_project_observed(&d, &tiny, &inst, 1e-12, 1_000_000, |_| {}).unwrap();
        assert!(!dense.capped);
        for z in (0..inst.len()).filter(|&z| q[z] > 0.0) {
            assert!((part.d[z] - dense.d[z]).abs() < 1e-3, "{z}: {} vs {}", part.d[z], dense.d[z]);
        }
        // The 0→3 edge must drop to the chain length.
        let chain = part.d[p.index(0, 1)] + part.d[p.index(1, 2)] + part.d[p.index(2, 3)];
        assert!((part.d[p.index(0, 3)] - chain).abs() < 1e-6);
    }
}
