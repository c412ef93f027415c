//! The structural set `S*` that couples the tasks, membership tests and the
//! weighted projection used by the coordinator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hemiproj::{self, HemimetricInstance};
use crate::model::{JointVector, SolutionBox, TaskId, WeightMatrix};

pub mod oracle;

/// Default tolerance for feasibility checks.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    /// `S* = S`: no coupling beyond the per-task boxes.
    Unrelated,
    /// All tasks share one weight vector.
    SharedAll,
    /// The first `shared` coordinates are common to all tasks.
    SharedPrefix { shared: usize },
    /// Tasks are ordered item pairs and `w` must be an r-bounded hemimetric.
    Hemimetric { n: usize, r: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureSpec {
    structure: Structure,
    dim: usize,
    tasks: usize,
    bounds: SolutionBox,
}

impl StructureSpec {
    pub fn new(structure: Structure, tasks: usize, bounds: SolutionBox) -> Result<Self> {
        let dim = bounds.dim();
        if tasks == 0 {
            return Err(Error::InvalidStructure("at least one task is required".into()));
        }
        match &structure {
            Structure::Unrelated | Structure::SharedAll => {}
            Structure::SharedPrefix { shared } => {
                if *shared < 1 || *shared > dim {
                    return Err(Error::InvalidStructure(format!(
                        "shared prefix length {shared} must lie in [1, {dim}]"
                    )));
                }
            }
            Structure::Hemimetric { n, r } => {
                HemimetricInstance::new(*n, *r)?;
                if dim != 1 {
                    return Err(Error::InvalidStructure("hemimetric structure requires d = 1".into()));
                }
                if tasks != n * n - n {
                    return Err(Error::InvalidStructure(format!(
                        "hemimetric over {n} items has {} tasks, got {tasks}",
                        n * n - n
                    )));
                }
                if bounds.lower()[0] != 0.0 || bounds.upper()[0] != *r {
                    return Err(Error::InvalidStructure(format!("hemimetric box must be [0, {r}]")));
                }
            }
        }
        Ok(Self {
            structure,
            dim,
            tasks,
            bounds,
        })
    }

    pub fn hemimetric(n: usize, r: f64) -> Result<Self> {
        let bounds = SolutionBox::uniform(1, 0.0, r)?;
        Self::new(Structure::Hemimetric { n, r }, n * n.saturating_sub(1), bounds)
    }

    pub fn shared_all(tasks: usize, bounds: SolutionBox) -> Result<Self> {
        Self::new(Structure::SharedAll, tasks, bounds)
    }

    pub fn unrelated(tasks: usize, bounds: SolutionBox) -> Result<Self> {
        Self::new(Structure::Unrelated, tasks, bounds)
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn bounds(&self) -> &SolutionBox {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.dim * self.tasks
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hemimetric_instance(&self) -> Option<HemimetricInstance> {
        match self.structure {
            Structure::Hemimetric { n, r } => HemimetricInstance::new(n, r).ok(),
            _ => None,
        }
    }

    /// Coordinates that must agree across tasks.
    fn shared_coords(&self) -> usize {
        match self.structure {
            Structure::SharedAll => self.dim,
            Structure::SharedPrefix { shared } => shared,
            _ => 0,
        }
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: w.len(),
            });
        }
        Ok(())
    }
}

/// True iff `w` satisfies every defining constraint of `S*` within `tol`.
pub fn is_member(w: &JointVector, spec: &StructureSpec, tol: f64) -> Result<bool> {
    spec.check(w.as_slice())?;
    if let Some(inst) = spec.hemimetric_instance() {
        return Ok(inst.is_member(w.as_slice(), tol));
    }
    let d = spec.dim;
    let in_boxes = (0..spec.tasks).all(|z| spec.bounds.contains(w.task(TaskId(z)), tol));
    if !in_boxes {
        return Ok(false);
    }
    let shared = spec.shared_coords();
    let first = w.task(TaskId(0));
    let agree = (1..spec.tasks).all(|z| {
        let wz = &w.as_slice()[z * d..z * d + shared];
        wz.iter().zip(first).all(|(a, b)| (a - b).abs() <= tol)
    });
    Ok(agree)
}

/// A feasible point together with its optimality certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: JointVector,
    /// Upper bound on `f(point) − min f`.
    pub gap: f64,
    /// Solver sweeps spent (0 for closed-form structures).
    pub sweeps: usize,
    /// The iterative solver hit its sweep cap before reaching `gap`.
    pub capped: bool,
}

/// Returns a point of `S*` whose weighted distance `(w′ − w)ᵀQ(w′ − w)` is
/// within `gap` of the minimum over `S*`.
///
/// Coordinates with zero weight do not enter the objective; they are filled
/// so that the result is feasible (the common value for shared structures,
/// the nearest feasible completion for hemimetrics).
pub fn weighted_project(w: &JointVector, q: &WeightMatrix, spec: &StructureSpec, gap: f64) -> Result<Projection> {
    if !(gap >= 0.0) {
        return Err(Error::NegativeGap(gap));
    }
    spec.check(w.as_slice())?;
    if q.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            actual: q.len(),
        });
    }
    if q.diagonal().iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidStructure("weights must be finite and non-negative".into()));
    }

    match spec.structure {
        Structure::Hemimetric { .. } => {
            let inst = spec.hemimetric_instance().expect("validated hemimetric");
            let out = if q.all_positive() {
                hemiproj::hemimetric_project(w.as_slice(), q.diagonal(), &inst, gap)?
            } else {
                hemiproj::hemimetric_project_partial(w.as_slice(), q.diagonal(), &inst, gap)?
            };
            Ok(Projection {
                point: JointVector::from_values(out.d, 1)?,
                gap: out.gap,
                sweeps: out.sweeps,
                capped: out.capped,
            })
        }
        _ => {
            let mut out = w.clone();
            project_shared(&mut out, q, spec);
            Ok(Projection {
                point: out,
                gap: 0.0,
                sweeps: 0,
                capped: false,
            })
        }
    }
}

/// Closed form for the separable structures: each shared coordinate takes the
/// weighted mean across tasks, clamped into the box; everything else is
/// clamped per task.
fn project_shared(w: &mut JointVector, q: &WeightMatrix, spec: &StructureSpec) {
    let d = spec.dim;
    let shared = spec.shared_coords();
    let lower = spec.bounds.lower();
    let upper = spec.bounds.upper();
    let qd = q.diagonal();
    for k in 0..shared {
        let (mut num, mut den) = (0.0, 0.0);
        for z in 0..spec.tasks {
            let idx = z * d + k;
            num += qd[idx] * w.as_slice()[idx];
            den += qd[idx];
        }
        let mean = if den > 0.0 {
            num / den
        } else {
            (0..spec.tasks).map(|z| w.as_slice()[z * d + k]).sum::<f64>() / spec.tasks as f64
        };
        let value = mean.clamp(lower[k], upper[k]);
        for z in 0..spec.tasks {
            w.as_mut_slice()[z * d + k] = value;
        }
    }
    for z in 0..spec.tasks {
        let block = w.task_mut(TaskId(z));
        for k in shared..d {
            block[k] = block[k].clamp(lower[k], upper[k]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mahalanobis_sq;
    use proptest::prelude::*;

    fn jv(v: &[f64]) -> JointVector {
        JointVector::from_values(v.to_vec(), 1).unwrap()
    }

    fn n3_entries(entries: &[(usize, usize, f64)], fill: f64) -> JointVector {
        let inst = HemimetricInstance::new(3, 9.0).unwrap();
        let mut v = vec![fill; 6];
        for &(i, j, x) in entries {
            v[inst.pairs().index(i - 1, j - 1)] = x;
        }
        jv(&v)
    }

    #[test]
    fn membership_examples() {
        let spec = StructureSpec::hemimetric(3, 9.0).unwrap();
        assert!(is_member(&jv(&[1.0; 6]), &spec, 0.0).unwrap());
        let bad = n3_entries(&[(1, 2, 8.0), (1, 3, 1.0), (3, 2, 1.0)], 1.0);
        assert!(!is_member(&bad, &spec, MEMBERSHIP_TOL).unwrap());

        let box1 = SolutionBox::uniform(1, 0.0, 9.0).unwrap();
        let shared = StructureSpec::shared_all(3, box1.clone()).unwrap();
        assert!(is_member(&jv(&[2.0, 2.0, 2.0]), &shared, 0.0).unwrap());
        assert!(!is_member(&jv(&[2.0, 2.5, 2.0]), &shared, 1e-6).unwrap());
        assert!(is_member(&jv(&[2.0]), &shared, 0.0).is_err());

        let unrelated = StructureSpec::unrelated(2, box1).unwrap();
        assert!(is_member(&jv(&[0.0, 9.0]), &unrelated, 0.0).unwrap());
        assert!(!is_member(&jv(&[0.0, 9.1]), &unrelated, 1e-6).unwrap());
    }

    #[test]
    fn spec_validation() {
        let b = SolutionBox::uniform(2, 0.0, 1.0).unwrap();
        assert!(StructureSpec::new(Structure::SharedPrefix { shared: 0 }, 3, b.clone()).is_err());
        assert!(StructureSpec::new(Structure::SharedPrefix { shared: 3 }, 3, b.clone()).is_err());
        assert!(StructureSpec::new(Structure::SharedPrefix { shared: 2 }, 3, b.clone()).is_ok());
        assert!(StructureSpec::new(Structure::Hemimetric { n: 3, r: 9.0 }, 6, b).is_err());
        assert!(StructureSpec::hemimetric(3, 0.0).is_err());
        assert!(StructureSpec::hemimetric(1, 1.0).is_err());
    }

    #[test]
    fn shared_projection_is_weighted_mean() {
        let spec = StructureSpec::shared_all(2, SolutionBox::uniform(1, 0.0, 9.0).unwrap()).unwrap();
        let q = WeightMatrix::from_diagonal(vec![2.0, 1.0]);
        let p = weighted_project(&jv(&[2.0, 5.0]), &q, &spec, 0.0).unwrap();
        assert_eq!(p.point.as_slice(), &[3.0, 3.0]);

        // Zero-weight tasks copy the shared value.
        let q = WeightMatrix::from_diagonal(vec![0.0, 1.0]);
        let p = weighted_project(&jv(&[2.0, 5.0]), &q, &spec, 0.0).unwrap();
        assert_eq!(p.point.as_slice(), &[5.0, 5.0]);
    }

    #[test]
    fn shared_prefix_projects_only_prefix() {
        let b = SolutionBox::uniform(2, 0.0, 4.0).unwrap();
        let spec = StructureSpec::new(Structure::SharedPrefix { shared: 1 }, 2, b).unwrap();
        let w = JointVector::from_values(vec![1.0, 5.0, 3.0, -1.0], 2).unwrap();
        let q = WeightMatrix::from_diagonal(vec![1.0, 1.0, 1.0, 1.0]);
        let p = weighted_project(&w, &q, &spec, 0.0).unwrap();
        assert_eq!(p.point.as_slice(), &[2.0, 4.0, 2.0, 0.0]);
        assert!(is_member(&p.point, &spec, 0.0).unwrap());
    }

    #[test]
    fn feasible_points_are_fixed() {
        let spec = StructureSpec::hemimetric(3, 9.0).unwrap();
        let w = jv(&[1.0, 2.0, 1.5, 1.0, 2.0, 2.5]);
        assert!(is_member(&w, &spec, 0.0).unwrap());
        let q = WeightMatrix::from_diagonal(vec![1.0, 0.0, 2.0, 1.0, 0.0, 3.0]);
        let p = weighted_project(&w, &q, &spec, 0.0).unwrap();
        for z in [0, 2, 3, 5] {
            assert_eq!(p.point.as_slice()[z], w.as_slice()[z]);
        }
        let p = weighted_project(&w, &WeightMatrix::identity(6), &spec, 0.0).unwrap();
        assert_eq!(p.point, w);
    }

    #[test]
    fn hemimetric_kkt_example() {
        let spec = StructureSpec::hemimetric(3, 9.0).unwrap();
        let w = n3_entries(&[(1, 2, 8.0), (1, 3, 1.0), (3, 2, 1.0)], 1.0);
        let q = WeightMatrix::identity(6);
        let p = weighted_project(&w, &q, &spec, 1e-10).unwrap();
        let want = n3_entries(&[(1, 2, 6.0), (1, 3, 3.0), (3, 2, 3.0)], 1.0);
        for (a, b) in p.point.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
        let o = oracle::dykstra_oracle(&w, &q, &spec, 1_000_000, 1e-12).unwrap();
        for (a, b) in o.point.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = StructureSpec::hemimetric(3, 9.0).unwrap();
        let w = jv(&[1.0; 6]);
        assert!(weighted_project(&w, &WeightMatrix::identity(6), &spec, -1.0).is_err());
        assert!(weighted_project(&w, &WeightMatrix::identity(5), &spec, 0.0).is_err());
        assert!(weighted_project(&jv(&[1.0; 5]), &WeightMatrix::identity(6), &spec, 0.0).is_err());
    }

    fn hemi_case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (3usize..=4).prop_flat_map(|n| {
            let k = n * n - n;
            (
                Just(n),
                proptest::collection::vec(-1.0f64..10.0, k),
                proptest::collection::vec(0.5f64..4.0, k),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_is_feasible_and_idempotent((n, w, q) in hemi_case()) {
            let spec = StructureSpec::hemimetric(n, 9.0).unwrap();
            let q = WeightMatrix::from_diagonal(q);
            let p = weighted_project(&jv(&w), &q, &spec, 1e-10).unwrap();
            prop_assert!(is_member(&p.point, &spec, MEMBERSHIP_TOL).unwrap());
            let again = weighted_project(&p.point, &q, &spec, 1e-10).unwrap();
            prop_assert!(mahalanobis_sq(again.point.as_slice(), p.point.as_slice(), &q) < 1e-8);
        }

        #[test]
        fn projection_with_zero_weights_is_feasible((n, w, q) in hemi_case(), mask in proptest::collection::vec(any::<bool>(), 12)) {
            let spec = StructureSpec::hemimetric(n, 9.0).unwrap();
            let q: Vec<f64> = q.iter().zip(&mask).map(|(&x, &m)| if m { x } else { 0.0 }).collect();
            let q = WeightMatrix::from_diagonal(q);
            let p = weighted_project(&jv(&w), &q, &spec, 1e-10).unwrap();
            prop_assert!(is_member(&p.point, &spec, MEMBERSHIP_TOL).unwrap());
        }

        #[test]
        fn projection_is_non_expansive((n, a, q) in hemi_case(), shift in proptest::collection::vec(-2.0f64..2.0, 12)) {
            let spec = StructureSpec::hemimetric(n, 9.0).unwrap();
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let q = WeightMatrix::from_diagonal(q);
            let pa = weighted_project(&jv(&a), &q, &spec, 1e-12).unwrap();
            let pb = weighted_project(&jv(&b), &q, &spec, 1e-12).unwrap();
            let lhs = mahalanobis_sq(pa.point.as_slice(), pb.point.as_slice(), &q).sqrt();
            let rhs = mahalanobis_sq(&a, &b, &q).sqrt();
            prop_assert!(lhs <= rhs + 1e-5, "{} > {}", lhs, rhs);
        }
    }
}
