//! Central coordinator: decides when to coordinate, gathers the learners,
//! projects the joint weights onto the structure, and scatters them back.

pub mod bounds;

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{weighted_project, Projection, StructureSpec};
use crate::error::{Error, Result};
use crate::learners::Ensemble;
use crate::model::{build_weight_matrix, JointVector, TaskId, WeightMatrix};

/// When coordination happens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoordinationSource {
    Always,
    Never,
    Bernoulli { alpha: f64 },
    Explicit { bits: Vec<bool> },
}

/// Allowed projection gap per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapSource {
    Zero,
    CorollaryRule { c_beta: f64, beta: f64, s_max: f64, tasks: usize },
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinationSchedule {
    pub xi: CoordinationSource,
    pub delta: GapSource,
}

impl CoordinationSchedule {
    pub fn new(xi: CoordinationSource, delta: GapSource) -> Result<Self> {
        match &xi {
            CoordinationSource::Bernoulli { alpha } if !(0.0..=1.0).contains(alpha) => {
                return Err(Error::InvalidConfig(format!("alpha must lie in [0,1], got {alpha}")));
            }
            _ => {}
        }
        match &delta {
            GapSource::CorollaryRule { c_beta, beta, s_max, .. } => {
                if !(0.0..=1.0).contains(beta) || !(*c_beta >= 0.0) || !(*s_max >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "invalid gap rule: c_beta={c_beta}, beta={beta}, s_max={s_max}"
                    )));
                }
            }
            GapSource::Explicit { values } => {
                if let Some(&bad) = values.iter().find(|v| !(**v >= 0.0)) {
                    return Err(Error::NegativeGap(bad));
                }
            }
            GapSource::Zero => {}
        }
        Ok(Self { xi, delta })
    }

    pub fn never() -> Self {
        Self {
            xi: CoordinationSource::Never,
            delta: GapSource::Zero,
        }
    }

    pub fn exact() -> Self {
        Self {
            xi: CoordinationSource::Always,
            delta: GapSource::Zero,
        }
    }

    /// `ξ^t` for step `t ≥ 1`. Bernoulli draws consume one value from `rng`;
    /// the other sources leave it untouched.
    pub fn xi_at<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<bool> {
        match &self.xi {
            CoordinationSource::Always => Ok(true),
            CoordinationSource::Never => Ok(false),
            CoordinationSource::Bernoulli { alpha } => Ok(rng.gen::<f64>() < *alpha),
            CoordinationSource::Explicit { bits } => bits.get(t - 1).copied().ok_or(Error::TraceExhausted(t)),
        }
    }

    /// `δ^t` for step `t ≥ 1`.
    pub fn delta_at(&self, t: usize) -> Result<f64> {
        match &self.delta {
            GapSource::Zero => Ok(0.0),
            GapSource::CorollaryRule {
                c_beta,
                beta,
                s_max,
                tasks,
            } => Ok(corollary_delta(*c_beta, *beta, *s_max, *tasks, t)),
            GapSource::Explicit { values } => values.get(t - 1).copied().ok_or(Error::TraceExhausted(t)),
        }
    }
}

/// `c_β(1−β)²·√K/√t·‖S_max‖²`.
pub fn corollary_delta(c_beta: f64, beta: f64, s_max: f64, tasks: usize, t: usize) -> f64 {
    let slack = 1.0 - beta;
    c_beta * slack * slack * (tasks as f64).sqrt() / (t as f64).sqrt() * s_max * s_max
}

/// Metric used by the coordinator's projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    /// Each task weighted by the square root of its observation count.
    #[default]
    SqrtTau,
    /// Plain Euclidean distance.
    Identity,
}

impl WeightingMode {
    pub fn weights(self, counters: &crate::model::ObservationCounters, dim: usize) -> WeightMatrix {
        match self {
            WeightingMode::SqrtTau => build_weight_matrix(counters, dim),
            WeightingMode::Identity => WeightMatrix::identity(counters.tasks() * dim),
        }
    }
}

/// Outcome of one coordination round.
#[derive(Clone, Debug)]
pub struct Coordination {
    pub projection: Projection,
    /// Wall time of the projection call alone.
    pub elapsed: Duration,
}

/// Outcome of one protocol step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub task: TaskId,
    pub loss: f64,
    pub coordinated: bool,
    /// Gap allowed this step (0 when not coordinated).
    pub delta: f64,
    /// Certified gap of the projection (0 when not coordinated).
    pub gap: f64,
    pub sweeps: usize,
    pub proj_time: Duration,
    pub capped: bool,
}

#[derive(Clone, Debug)]
pub struct Coordinator {
    spec: StructureSpec,
    mode: WeightingMode,
}

impl Coordinator {
    pub fn new(spec: StructureSpec, mode: WeightingMode) -> Self {
        Self { spec, mode }
    }

    pub fn spec(&self) -> &StructureSpec {
        &self.spec
    }

    pub fn mode(&self) -> WeightingMode {
        self.mode
    }

    /// Gathers every learner (with `pending` overriding the stored weights
    /// of one task), projects with gap `delta`, and sends the result to all
    /// learners.
    pub fn coordinate(
        &self,
        ensemble: &mut Ensemble,
        pending: Option<(TaskId, &[f64])>,
        delta: f64,
    ) -> Result<Coordination> {
        let dim = self.spec.dim();
        if ensemble.tasks() != self.spec.tasks() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.tasks(),
                actual: ensemble.tasks(),
            });
        }
        let mut joint = JointVector::from_values(ensemble.joint_weights(), dim)?;
        if let Some((z, w)) = pending {
            joint.set_task(z, w);
        }
        let q = self.mode.weights(ensemble.counters(), dim);

        let start = Instant::now();
        let projection = weighted_project(&joint, &q, &self.spec, delta)?;
        let elapsed = start.elapsed();

        for learner in ensemble.learners_mut() {
            let z = learner.task;
            learner.receive(projection.point.task(z));
        }
        Ok(Coordination { projection, elapsed })
    }

    /// One round: the addressed learner plays, observes its subgradient and
    /// steps; with `xi` set the unclamped step joins a coordination round,
    /// otherwise it is clamped locally.
    pub fn step(
        &self,
        ensemble: &mut Ensemble,
        task: TaskId,
        xi: bool,
        delta: f64,
        oracle: impl FnOnce(&[f64]) -> (f64, Vec<f64>),
    ) -> Result<StepOutcome> {
        if task.0 >= ensemble.tasks() {
            return Err(Error::TaskOutOfRange {
                task: task.0,
                tasks: ensemble.tasks(),
            });
        }
        let (loss, g) = ensemble.observe(task, oracle);
        let learner = &mut ensemble.learners_mut()[task.0];
        let mut w_tilde = learner.gradient_step(&g);
        if !xi {
            learner.bounds.clamp(&mut w_tilde);
            learner.w = w_tilde;
            return Ok(StepOutcome {
                task,
                loss,
                coordinated: false,
                delta: 0.0,
                gap: 0.0,
                sweeps: 0,
                proj_time: Duration::ZERO,
                capped: false,
            });
        }
        let round = self.coordinate(ensemble, Some((task, &w_tilde)), delta)?;
        Ok(StepOutcome {
            task,
            loss,
            coordinated: true,
            delta,
            gap: round.projection.gap,
            sweeps: round.projection.sweeps,
            proj_time: round.elapsed,
            capped: round.projection.capped,
        })
    }
}

/// Schedule-driven step: draws `ξ^t` and `δ^t` and calls
/// [`Coordinator::step`].
pub fn cool_step<R: Rng + ?Sized>(
    t: usize,
    coordinator: &Coordinator,
    schedule: &CoordinationSchedule,
    ensemble: &mut Ensemble,
    task: TaskId,
    xi_rng: &mut R,
    oracle: impl FnOnce(&[f64]) -> (f64, Vec<f64>),
) -> Result<StepOutcome> {
    let xi = schedule.xi_at(t, xi_rng)?;
    let delta = if xi { schedule.delta_at(t)? } else { 0.0 };
    coordinator.step(ensemble, task, xi, delta, oracle)
}
