//! Per-task online gradient learners and the uncoordinated ensemble.

use crate::model::{GradientReport, ObservationCounters, SolutionBox, TaskId};

/// Online convex programming learner for one task: gradient step with rate
/// `η/√τ`, then Euclidean projection onto the task's box.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerState {
    pub task: TaskId,
    pub w: Vec<f64>,
    pub tau: u64,
    pub eta: f64,
    pub bounds: SolutionBox,
}

impl LearnerState {
    /// Starts at the midpoint of `bounds`.
    pub fn new(task: TaskId, bounds: SolutionBox, eta: f64) -> Self {
        let w = bounds.midpoint();
        Self::with_weights(task, bounds, eta, w)
    }

    pub fn with_weights(task: TaskId, bounds: SolutionBox, eta: f64, mut w: Vec<f64>) -> Self {
        bounds.clamp(&mut w);
        Self {
            task,
            w,
            tau: 0,
            eta,
            bounds,
        }
    }

    /// Counts the visit and returns the unprojected iterate
    /// `w − (η/√τ)·g`; `w` itself is left untouched.
    pub fn gradient_step(&mut self, g: &GradientReport) -> Vec<f64> {
        debug_assert_eq!(g.task, self.task);
        self.tau += 1;
        let rate = self.eta / (self.tau as f64).sqrt();
        self.w
            .iter()
            .zip(&g.subgradient)
            .map(|(w, g)| w - rate * g)
            .collect()
    }

    /// Gradient step followed by the local box projection.
    pub fn local_update(&mut self, g: &GradientReport) {
        let mut next = self.gradient_step(g);
        self.bounds.clamp(&mut next);
        self.w = next;
    }

    /// Overwrites the weights with a value shared by the coordinator.
    pub fn receive(&mut self, w: &[f64]) {
        self.w.copy_from_slice(w);
    }
}

/// Functional form of [`LearnerState::local_update`].
pub fn local_update(state: &LearnerState, g: &GradientReport) -> LearnerState {
    let mut next = state.clone();
    next.local_update(g);
    next
}

/// `K` independent learners plus the shared observation counters.
#[derive(Clone, Debug)]
pub struct Ensemble {
    learners: Vec<LearnerState>,
    counters: ObservationCounters,
}

impl Ensemble {
    pub fn new(tasks: usize, bounds: &SolutionBox, eta: f64) -> Self {
        let learners = (0..tasks)
            .map(|z| LearnerState::new(TaskId(z), bounds.clone(), eta))
            .collect();
        Self {
            learners,
            counters: ObservationCounters::new(tasks),
        }
    }

    pub fn from_learners(learners: Vec<LearnerState>) -> Self {
        let counters = ObservationCounters::from_counts(learners.iter().map(|l| l.tau).collect());
        Self { learners, counters }
    }

    pub fn tasks(&self) -> usize {
        self.learners.len()
    }

    pub fn learner(&self, z: TaskId) -> &LearnerState {
        &self.learners[z.0]
    }

    pub fn learners(&self) -> &[LearnerState] {
        &self.learners
    }

    pub fn learners_mut(&mut self) -> &mut [LearnerState] {
        &mut self.learners
    }

    pub fn counters(&self) -> &ObservationCounters {
        &self.counters
    }

    /// Current weights of every learner, task-major.
    pub fn joint_weights(&self) -> Vec<f64> {
        self.learners.iter().flat_map(|l| l.w.iter().copied()).collect()
    }

    /// Serves one instance of `task`. `oracle` maps the played weights to
    /// `(loss, subgradient)`.
    pub fn iol_step(&mut self, task: TaskId, oracle: impl FnOnce(&[f64]) -> (f64, Vec<f64>)) -> f64 {
        let (loss, g) = self.observe(task, oracle);
        self.learners[task.0].local_update(&g);
        loss
    }

    /// Queries the oracle for `task` and bumps its counter; the caller
    /// decides how the gradient is applied.
    pub(crate) fn observe(
        &mut self,
        task: TaskId,
        oracle: impl FnOnce(&[f64]) -> (f64, Vec<f64>),
    ) -> (f64, GradientReport) {
        let (loss, grad) = oracle(&self.learners[task.0].w);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        self.counters.observe(task);
        (loss, GradientReport::new(task, grad, norm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::absolute_loss_and_grad;
    use proptest::prelude::*;

    fn learner(w: f64, eta: f64) -> LearnerState {
        LearnerState::with_weights(TaskId(0), SolutionBox::uniform(1, 0.0, 9.0).unwrap(), eta, vec![w])
    }

    fn grad(g: f64) -> GradientReport {
        GradientReport::new(TaskId(0), vec![g], 1.0)
    }

    #[test]
    fn update_examples() {
        let s = local_update(&learner(0.5, 9.0), &grad(1.0));
        assert_eq!((s.w[0], s.tau), (0.0, 1));

        let mut l = learner(5.0, 9.0);
        l.tau = 80;
        let s = local_update(&l, &grad(-1.0));
        assert_eq!((s.w[0], s.tau), (6.0, 81));

        let s = local_update(&learner(3.25, 9.0), &grad(0.0));
        assert_eq!((s.w[0], s.tau), (3.25, 1));
    }

    #[test]
    fn starts_at_midpoint() {
        let l = LearnerState::new(TaskId(2), SolutionBox::uniform(2, 0.0, 9.0).unwrap(), 1.0);
        assert_eq!(l.w, vec![4.5, 4.5]);
        assert_eq!(l.tau, 0);
    }

    #[test]
    fn iol_only_touches_addressed_learner() {
        let b = SolutionBox::uniform(1, 0.0, 9.0).unwrap();
        let mut ens = Ensemble::new(2, &b, 9.0);
        let before = ens.learner(TaskId(1)).clone();
        ens.iol_step(TaskId(0), |w| {
            let (l, g) = absolute_loss_and_grad(w[0], 1.0);
            (l, vec![g])
        });
        assert_eq!(ens.learner(TaskId(1)), &before);
        assert_eq!(ens.counters().counts(), &[1, 0]);
    }

    #[test]
    fn single_task_ensemble_equals_single_learner() {
        let b = SolutionBox::uniform(1, 0.0, 9.0).unwrap();
        let mut ens = Ensemble::new(1, &b, 9.0);
        let mut solo = LearnerState::new(TaskId(0), b, 9.0);
        for target in [1.0, 7.0, 3.0, 3.0, 8.5, 0.0] {
            let (_, g) = absolute_loss_and_grad(solo.w[0], target);
            solo.local_update(&grad(g));
            ens.iol_step(TaskId(0), |w| {
                let (l, g) = absolute_loss_and_grad(w[0], target);
                (l, vec![g])
            });
            assert_eq!(ens.learner(TaskId(0)), &solo);
        }
    }

    proptest! {
        #[test]
        fn rate_depends_only_on_own_visits(order in proptest::collection::vec(0usize..3, 1..40)) {
            let b = SolutionBox::uniform(1, -1e9, 1e9).unwrap();
            let mut ens = Ensemble::new(3, &b, 2.0);
            let mut visits = [0u64; 3];
            for &z in &order {
                visits[z] += 1;
                let before = ens.learner(TaskId(z)).w[0];
                ens.iol_step(TaskId(z), |_| (0.0, vec![1.0]));
                let step = before - ens.learner(TaskId(z)).w[0];
                prop_assert!((step - 2.0 / (visits[z] as f64).sqrt()).abs() < 1e-9);
            }
            let total: u64 = ens.counters().counts().iter().sum();
            prop_assert_eq!(total, order.len() as u64);
        }

        #[test]
        fn single_task_regret_within_ocp_bound(targets in proptest::collection::vec(0.0f64..9.0, 1..300), start in 0.0f64..9.0) {
            let b = SolutionBox::uniform(1, 0.0, 9.0).unwrap();
            let s_max = b.diameter();
            let mut l = LearnerState::with_weights(TaskId(0), b, s_max, vec![start]);
            // Best fixed competitor in hindsight is a median of the targets.
            let mut sorted = targets.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = sorted[sorted.len() / 2];
            let mut regret = 0.0;
            for &c in &targets {
                let (loss, g) = absolute_loss_and_grad(l.w[0], c);
                regret += loss - (med - c).abs();
                l.local_update(&grad(g));
            }
            let bound = 1.5 * (targets.len() as f64).sqrt() * s_max;
            prop_assert!(regret <= bound + 1e-9, "{} > {}", regret, bound);
        }
    }
}
