//! Reference projection by cyclic Dykstra iterations.
//!
//! Slow and generic: `S*` is written out as a list of half-spaces and each
//! step is the exact Q-weighted projection onto one of them. Meant as ground
//! truth for checking the fast projectors, not for production use.

use crate::error::{Error, Result};
use crate::model::{JointVector, WeightMatrix};

use super::{Structure, StructureSpec};

/// `a·w ≤ b` with sparse `a`.
#[derive(Clone, Debug)]
pub struct HalfSpace {
    pub coeffs: Vec<(usize, f64)>,
    pub bound: f64,
}

/// Every half-space that defines `S*`: box faces, shared-coordinate
/// equalities as opposing pairs, and triangle inequalities.
pub fn half_spaces(spec: &StructureSpec) -> Vec<HalfSpace> {
    let d = spec.dim();
    let mut out = Vec::new();
    for z in 0..spec.tasks() {
        for k in 0..d {
            let idx = z * d + k;
            out.push(HalfSpace {
                coeffs: vec![(idx, -1.0)],
                bound: -spec.bounds().lower()[k],
            });
            out.push(HalfSpace {
                coeffs: vec![(idx, 1.0)],
                bound: spec.bounds().upper()[k],
            });
        }
    }
    let shared = match spec.structure() {
        Structure::SharedAll => d,
        Structure::SharedPrefix { shared } => *shared,
        _ => 0,
    };
    for z in 1..spec.tasks() {
        for k in 0..shared {
            let (a, b) = (z * d + k, k);
            out.push(HalfSpace {
                coeffs: vec![(a, 1.0), (b, -1.0)],
                bound: 0.0,
            });
            out.push(HalfSpace {
                coeffs: vec![(a, -1.0), (b, 1.0)],
                bound: 0.0,
            });
        }
    }
    if let Structure::Hemimetric { n, .. } = *spec.structure() {
        let p = crate::model::PairIndex::new(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i != j && i != k && j != k {
                        out.push(HalfSpace {
                            coeffs: vec![(p.index(i, j), 1.0), (p.index(i, k), -1.0), (p.index(k, j), -1.0)],
                            bound: 0.0,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub point: JointVector,
    pub cycles: usize,
    /// False when the cycle cap was hit first.
    pub converged: bool,
}

/// Runs Dykstra cycles until the Q-norm change over a full cycle is below
/// `tol` or `max_cycles` is reached. Requires strictly positive weights.
pub fn dykstra_oracle(
    w: &JointVector,
    q: &WeightMatrix,
    spec: &StructureSpec,
    max_cycles: usize,
    tol: f64,
) -> Result<OracleResult> {
    let len = spec.len();
    if w.len() != len || q.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: if w.len() != len { w.len() } else { q.len() },
        });
    }
    if !q.all_positive() {
        return Err(Error::InvalidStructure("Dykstra oracle needs strictly positive weights".into()));
    }
    let inv: Vec<f64> = q.diagonal().iter().map(|x| 1.0 / x).collect();
    let cons = half_spaces(spec);
    let mut x = w.as_slice().to_vec();
    // One correction vector per half-space.
    let mut corr: Vec<Vec<f64>> = vec![vec![0.0; len]; cons.len()];
    let mut y = vec![0.0; len];

    for cycle in 1..=max_cycles {
        let start = x.clone();
        for (c, p) in cons.iter().zip(corr.iter_mut()) {
            for ((yi, xi), pi) in y.iter_mut().zip(&x).zip(p.iter()) {
                *yi = xi + pi;
            }
            let ay: f64 = c.coeffs.iter().map(|&(i, a)| a * y[i]).sum();
            let excess = ay - c.bound;
            x.copy_from_slice(&y);
            if excess > 0.0 {
                let norm: f64 = c.coeffs.iter().map(|&(i, a)| a * a * inv[i]).sum();
                let step = excess / norm;
                for &(i, a) in &c.coeffs {
                    x[i] -= step * a * inv[i];
                }
            }
            for ((pi, yi), xi) in p.iter_mut().zip(&y).zip(&x) {
                *pi = yi - xi;
            }
        }
        let change: f64 = x
            .iter()
            .zip(&start)
            .zip(q.diagonal())
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if change < tol {
            return Ok(OracleResult {
                point: JointVector::from_values(x, spec.dim())?,
                cycles: cycle,
                converged: true,
            });
        }
    }
    Ok(OracleResult {
        point: JointVector::from_values(x, spec.dim())?,
        cycles: max_cycles,
        converged: false,
    })
}
