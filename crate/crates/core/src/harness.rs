//! Experiment orchestration: seeded runs, regret accounting, sweeps, bound
//! checks and CSV output.

pub mod airbnb;

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::StructureSpec;
use crate::coordinator::bounds::{
    batch_bound, cool_regret_bound, exact_cool_bound_tight, iol_bound, required_batch,
};
use crate::coordinator::{
    cool_step, CoordinationSchedule, CoordinationSource, Coordinator, GapSource, WeightingMode,
};
use crate::environments::{clustered_ground_truth, TaskOrder, TaskStream};
use crate::error::{Error, Result};
use crate::learners::Ensemble;
use crate::losses::LossModel;
use crate::model::{SolutionBox, TaskId};

pub const STEP_HEADER: [&str; 11] = [
    "run",
    "seed",
    "algorithm",
    "t",
    "task",
    "loss",
    "cum_regret",
    "reward",
    "proj_time_us",
    "coordinated",
    "gap",
];

pub const SWEEP_HEADER: [&str; 5] = [
    "param",
    "value",
    "mean_final_regret",
    "std_final_regret",
    "mean_total_proj_time_us",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "iol")]
    Iol,
    #[serde(rename = "cool")]
    Cool,
    #[serde(rename = "uw-cool")]
    UwCool,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Iol => "iol",
            Algorithm::Cool => "cool",
            Algorithm::UwCool => "uw-cool",
        }
    }

    fn index(self) -> u64 {
        match self {
            Algorithm::Iol => 0,
            Algorithm::Cool => 1,
            Algorithm::UwCool => 2,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iol" => Ok(Algorithm::Iol),
            "cool" => Ok(Algorithm::Cool),
            "uw-cool" | "uwcool" => Ok(Algorithm::UwCool),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Problem family and its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// `n(n−1)` pair tasks over two equal clusters; the box is `[0, r_out]`.
    Hemimetric { n: usize, r_in: f64, r_out: f64 },
    /// `tasks` scalar tasks that share one value `target` in `[lower, upper]`.
    SharedScalar {
        tasks: usize,
        lower: f64,
        upper: f64,
        target: f64,
    },
}

impl Scenario {
    pub fn spec(&self) -> Result<StructureSpec> {
        match *self {
            Scenario::Hemimetric { n, r_out, .. } => StructureSpec::hemimetric(n, r_out),
            Scenario::SharedScalar {
                tasks, lower, upper, ..
            } => StructureSpec::shared_all(tasks, SolutionBox::uniform(1, lower, upper)?),
        }
    }

    /// Per-task competitor `w*`, task-major.
    pub fn ground_truth(&self) -> Result<Vec<f64>> {
        match *self {
            Scenario::Hemimetric { n, r_in, r_out } => clustered_ground_truth(n, r_in, r_out),
            Scenario::SharedScalar {
                tasks,
                lower,
                upper,
                target,
            } => {
                if !(lower..=upper).contains(&target) {
                    return Err(Error::InvalidConfig(format!("target {target} outside [{lower}, {upper}]")));
                }
                Ok(vec![target; tasks])
            }
        }
    }
}

fn default_scenario() -> Scenario {
    Scenario::Hemimetric {
        n: 10,
        r_in: 1.0,
        r_out: 9.0,
    }
}
fn default_steps() -> usize {
    500
}
fn default_one() -> f64 {
    1.0
}
fn default_runs() -> usize {
    10
}
fn default_seed() -> u64 {
    42
}
fn default_true() -> bool {
    true
}

/// Everything needed to reproduce a set of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    #[serde(default = "default_loss")]
    pub loss: LossModel,
    #[serde(default = "default_order")]
    pub order: TaskOrder,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_one")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub beta: f64,
    #[serde(default = "default_one")]
    pub c_beta: f64,
    /// Learning-rate constant; `‖S_max‖/‖G_max‖` when absent.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Starting weight for every coordinate; box midpoint when absent.
    #[serde(default)]
    pub init: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Give each algorithm its own task stream instead of a shared one.
    #[serde(default)]
    pub independent_traces: bool,
    /// Measure projection wall time; when off the column is written as 0 and
    /// output is byte-reproducible.
    #[serde(default = "default_true")]
    pub timing: bool,
}

fn default_loss() -> LossModel {
    LossModel::Absolute
}
fn default_order() -> TaskOrder {
    TaskOrder::UniformRandom
}
fn default_algorithm() -> Algorithm {
    Algorithm::Cool
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: default_scenario(),
            loss: default_loss(),
            order: default_order(),
            steps: default_steps(),
            algorithm: default_algorithm(),
            alpha: 1.0,
            beta: 1.0,
            c_beta: 1.0,
            eta: None,
            init: None,
            seed: default_seed(),
            runs: default_runs(),
            independent_traces: false,
            timing: true,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Parses and validates a JSON configuration; absent fields take their
    /// defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.steps == 0 {
            return Err(Error::InvalidConfig("runs and steps must be at least 1".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if !(self.c_beta >= 0.0) {
            return Err(Error::InvalidConfig(format!("c_beta must be non-negative, got {}", self.c_beta)));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
            }
        }
        self.loss.validate()?;
        let spec = self.scenario.spec()?;
        self.scenario.ground_truth()?;
        self.order.validate(spec.tasks())?;
        if let Some(w) = self.init {
            let b = spec.bounds();
            if !b.contains(&vec![w; b.dim()], 0.0) {
                return Err(Error::InvalidConfig(format!("initial weight {w} outside the box")));
            }
        }
        Ok(())
    }

    pub fn tasks(&self) -> Result<usize> {
        Ok(self.scenario.spec()?.tasks())
    }

    /// `‖S_max‖`: diameter of one task's box.
    pub fn s_max(&self) -> Result<f64> {
        Ok(self.scenario.spec()?.bounds().diameter())
    }

    /// `‖G_max‖` of the configured loss.
    pub fn g_max(&self) -> Result<f64> {
        Ok(self.loss.gradient_bound(self.scenario.spec()?.dim()))
    }

    pub fn effective_eta(&self) -> Result<f64> {
        match self.eta {
            Some(eta) => Ok(eta),
            None => Ok(self.s_max()? / self.g_max()?),
        }
    }

    pub fn schedule(&self) -> Result<CoordinationSchedule> {
        let xi = match self.algorithm {
            Algorithm::Iol => CoordinationSource::Never,
            _ if self.alpha >= 1.0 => CoordinationSource::Always,
            _ if self.alpha <= 0.0 => CoordinationSource::Never,
            _ => CoordinationSource::Bernoulli { alpha: self.alpha },
        };
        let delta = if self.beta >= 1.0 {
            GapSource::Zero
        } else {
            GapSource::CorollaryRule {
                c_beta: self.c_beta,
                beta: self.beta,
                s_max: self.s_max()?,
                tasks: self.tasks()?,
            }
        };
        CoordinationSchedule::new(xi, delta)
    }

    /// Seed of run `run` for `algorithm`.
    pub fn run_seed(&self, run: usize, algorithm: Algorithm) -> u64 {
        let base = self.seed.wrapping_add(run as u64);
        if self.independent_traces {
            base ^ (algorithm.index() << 48)
        } else {
            base
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub t: usize,
    pub task: usize,
    pub loss: f64,
    pub cum_regret: f64,
    /// Cumulative mean reward; only for the marketplace pipeline.
    pub reward: Option<f64>,
    pub proj_time_us: f64,
    pub coordinated: bool,
    pub gap: f64,
}

/// A full run with the per-step rows and solver statistics.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub run: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub records: Vec<RunRecord>,
    /// `δ^t` allowed at each step (0 where no coordination happened).
    pub deltas: Vec<f64>,
    pub total_sweeps: usize,
    /// Steps whose projection hit the sweep cap.
    pub capped_steps: usize,
}

impl RunTrace {
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn total_proj_time_us(&self) -> f64 {
        self.records.iter().map(|r| r.proj_time_us).sum()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn coordination(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.coordinated).collect()
    }

    /// Number of steps that coordinate right after a step that did not.
    pub fn onsets(&self) -> usize {
        let mut prev = false;
        let mut n = 0;
        for r in &self.records {
            if r.coordinated && !prev {
                n += 1;
            }
            prev = r.coordinated;
        }
        n
    }
}

/// Seeded generators for one run: the task stream and the coordination
/// draws use separate ChaCha streams of the same seed.
pub fn run_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut tasks = ChaCha8Rng::seed_from_u64(seed);
    tasks.set_stream(0);
    let mut xi = ChaCha8Rng::seed_from_u64(seed);
    xi.set_stream(1);
    (tasks, xi)
}

pub(crate) fn new_ensemble(spec: &StructureSpec, eta: f64, init: Option<f64>) -> Ensemble {
    let mut ens = Ensemble::new(spec.tasks(), spec.bounds(), eta);
    if let Some(w) = init {
        for l in ens.learners_mut() {
            l.w.iter_mut().for_each(|x| *x = w);
        }
    }
    ens
}

/// Executes one run of `config.algorithm`.
pub fn run_once(config: &RunConfig, run: usize) -> Result<RunTrace> {
    let spec = config.scenario.spec()?;
    let truth = config.scenario.ground_truth()?;
    let dim = spec.dim();
    let eta = config.effective_eta()?;
    let schedule = config.schedule()?;
    let mode = match config.algorithm {
        Algorithm::UwCool => WeightingMode::Identity,
        _ => WeightingMode::SqrtTau,
    };
    let coordinator = Coordinator::new(spec.clone(), mode);
    let seed = config.run_seed(run, config.algorithm);
    let (mut task_rng, mut xi_rng) = run_rngs(seed);
    let mut stream = TaskStream::new(config.order.clone(), spec.tasks())?;
    let mut ens = new_ensemble(&spec, eta, config.init);

    let mut records = Vec::with_capacity(config.steps);
    let mut deltas = Vec::with_capacity(config.steps);
    let mut cum = 0.0;
    let mut total_sweeps = 0;
    let mut capped_steps = 0;
    for t in 1..=config.steps {
        let z = stream.next_task(t, &mut task_rng)?;
        let target = &truth[z.0 * dim..(z.0 + 1) * dim];
        let model = &config.loss;
        let oracle = |w: &[f64]| model.evaluate(w, target);
        let best = model.loss(target, target);
        let (loss, coordinated, gap, delta, proj_us) = match config.algorithm {
            Algorithm::Iol => (ens.iol_step(z, oracle), false, 0.0, 0.0, 0.0),
            _ => {
                let out = cool_step(t, &coordinator, &schedule, &mut ens, z, &mut xi_rng, oracle)?;
                total_sweeps += out.sweeps;
                capped_steps += usize::from(out.capped);
                let us = if config.timing {
                    out.proj_time.as_secs_f64() * 1e6
                } else {
                    0.0
                };
                (out.loss, out.coordinated, out.gap, out.delta, us)
            }
        };
        cum += loss - best;
        deltas.push(delta);
        records.push(RunRecord {
            run,
            seed,
            algorithm: config.algorithm,
            t,
            task: z.0,
            loss,
            cum_regret: cum,
            reward: None,
            proj_time_us: proj_us,
            coordinated,
            gap,
        });
    }
    Ok(RunTrace {
        run,
        seed,
        algorithm: config.algorithm,
        records,
        deltas,
        total_sweeps,
        capped_steps,
    })
}

/// All `config.runs` runs of the configured algorithm.
pub fn run_traces(config: &RunConfig) -> Result<Vec<RunTrace>> {
    config.validate()?;
    (0..config.runs).map(|run| run_once(config, run)).collect()
}

pub fn run_experiment(config: &RunConfig) -> Result<Vec<RunRecord>> {
    Ok(run_traces(config)?.into_iter().flat_map(|t| t.records).collect())
}

/// Runs every algorithm in `algorithms` on the same configuration; with
/// shared traces each run index sees the same task sequence.
pub fn run_paired(config: &RunConfig, algorithms: &[Algorithm]) -> Result<Vec<Vec<RunTrace>>> {
    algorithms
        .iter()
        .map(|&a| {
            run_traces(&RunConfig {
                algorithm: a,
                ..config.clone()
            })
        })
        .collect()
}

pub fn write_step_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STEP_HEADER)?;
    for r in records {
        w.write_record([
            r.run.to_string(),
            r.seed.to_string(),
            r.algorithm.name().to_string(),
            r.t.to_string(),
            r.task.to_string(),
            r.loss.to_string(),
            r.cum_regret.to_string(),
            r.reward.map_or_else(String::new, |x| x.to_string()),
            r.proj_time_us.to_string(),
            u8::from(r.coordinated).to_string(),
            r.gap.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    Beta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "beta" => Ok(SweepParam::Beta),
            _ => Err(Error::InvalidConfig(format!("unknown sweep parameter `{s}`"))),
        }
    }
}

/// Aggregate over the runs of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub mean_final_regret: f64,
    /// Sample standard deviation (0 for a single run).
    pub std_final_regret: f64,
    pub mean_total_proj_time_us: f64,
    pub mean_total_sweeps: f64,
}

impl SweepRow {
    pub fn std_error(&self, runs: usize) -> f64 {
        self.std_final_regret / (runs as f64).sqrt()
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(param: SweepParam, value: f64, traces: &[RunTrace]) -> SweepRow {
    let finals: Vec<f64> = traces.iter().map(RunTrace::final_regret).collect();
    let (mean, std) = mean_std(&finals);
    let n = traces.len() as f64;
    SweepRow {
        param,
        value,
        mean_final_regret: mean,
        std_final_regret: std,
        mean_total_proj_time_us: traces.iter().map(RunTrace::total_proj_time_us).sum::<f64>() / n,
        mean_total_sweeps: traces.iter().map(|t| t.total_sweeps as f64).sum::<f64>() / n,
    }
}

/// Runs `config` once per value of `param` and returns the cell summaries
/// with their traces.
pub fn sweep(config: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Vec<(SweepRow, Vec<RunTrace>)>> {
    values
        .iter()
        .map(|&v| {
            let mut cell = config.clone();
            match param {
                SweepParam::Alpha => cell.alpha = v,
                SweepParam::Beta => cell.beta = v,
            }
            let traces = run_traces(&cell)?;
            Ok((summarize(param, v, &traces), traces))
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.param.name().to_string(),
            r.value.to_string(),
            r.mean_final_regret.to_string(),
            r.std_final_regret.to_string(),
            r.mean_total_proj_time_us.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A closed-form bound that applies to a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppliedBound {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub run: usize,
    pub algorithm: Algorithm,
    pub realized: f64,
    pub bounds: Vec<AppliedBound>,
    /// Realised regret is within every applicable bound.
    pub pass: bool,
}

/// Checks every run against the bounds that hold for its configuration:
/// the independent-learner bound for `iol`; for `cool` the four-term bound
/// on the realised schedule, the tighter exact-coordination bound when every
/// step coordinates exactly at the default rate, and the batch bound when
/// its preconditions are met. `uw-cool` has no guarantee and gets an empty
/// list.
pub fn evaluate_bounds(config: &RunConfig, traces: &[RunTrace]) -> Result<Vec<BoundReport>> {
    let k = config.tasks()?;
    let s = config.s_max()?;
    let g = config.g_max()?;
    let eta = config.effective_eta()?;
    let t = config.steps;
    traces
        .iter()
        .map(|trace| {
            let mut bounds = Vec::new();
            match trace.algorithm {
                Algorithm::Iol => bounds.push(AppliedBound {
                    name: "iol",
                    value: iol_bound(t, k, s, g),
                }),
                Algorithm::Cool => {
                    let xi = trace.coordination();
                    let terms = cool_regret_bound(k, s, g, eta, &xi, &trace.deltas);
                    bounds.push(AppliedBound {
                        name: "cool",
                        value: terms.total(),
                    });
                    let exact = xi.iter().all(|&x| x) && trace.deltas.iter().all(|&d| d == 0.0);
                    if exact && (eta - s / g).abs() <= 1e-12 * eta {
                        bounds.push(AppliedBound {
                            name: "cool-exact",
                            value: exact_cool_bound_tight(t, k, s, g),
                        });
                    }
                    if let Some(b) = batch_setting(config) {
                        bounds.push(AppliedBound {
                            name: "cool-batch",
                            value: batch_bound(b, s, g),
                        });
                    }
                }
                Algorithm::UwCool => {}
            }
            let realized = trace.final_regret();
            let pass = bounds.iter().all(|b| realized <= b.value);
            Ok(BoundReport {
                run: trace.run,
                algorithm: trace.algorithm,
                realized,
                bounds,
                pass,
            })
        })
        .collect()
}

/// Batch length when the configuration meets the batch theorem's
/// assumptions: scalar shared structure, ε-insensitive loss, exact
/// coordination, `B ≥ ⌈(S/ε + ½)²⌉` and `T` a multiple of `B`.
fn batch_setting(config: &RunConfig) -> Option<usize> {
    let (Scenario::SharedScalar { .. }, LossModel::EpsilonInsensitive { epsilon }, TaskOrder::Batch { b }) =
        (&config.scenario, &config.loss, &config.order)
    else {
        return None;
    };
    let s = config.s_max().ok()?;
    let exact = config.alpha >= 1.0 && config.beta >= 1.0;
    (exact && *b >= required_batch(s, *epsilon) && config.steps.is_multiple_of(*b)).then_some(*b)
}

/// Task sequence of a run, for replay through [`TaskOrder::Trace`].
pub fn task_trace(trace: &RunTrace) -> Vec<TaskId> {
    trace.records.iter().map(|r| TaskId(r.task)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            scenario: Scenario::Hemimetric {
                n: 4,
                r_in: 1.0,
                r_out: 9.0,
            },
            steps: 60,
            runs: 2,
            timing: false,
            ..RunConfig::default()
        }
    }

    #[test]
    fn record_count_and_telescoping() {
        let cfg = small();
        let recs = run_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 120);
        let mut prev = 0.0;
        for r in &recs {
            if r.t == 1 {
                prev = 0.0;
            }
            assert!((r.cum_regret - (prev + r.loss)).abs() < 1e-9);
            prev = r.cum_regret;
        }
    }

    #[test]
    fn shared_traces_pair_task_sequences() {
        let cfg = RunConfig {
            alpha: 0.5,
            ..small()
        };
        let out = run_paired(&cfg, &[Algorithm::Iol, Algorithm::Cool]).unwrap();
        for (a, b) in out[0].iter().zip(&out[1]) {
            assert_eq!(task_trace(a), task_trace(b));
        }
        let indep = RunConfig {
            independent_traces: true,
            ..cfg
        };
        let out = run_paired(&indep, &[Algorithm::Iol, Algorithm::Cool]).unwrap();
        assert_ne!(task_trace(&out[0][0]), task_trace(&out[1][0]));
    }

    #[test]
    fn csv_is_byte_identical_without_timing() {
        let cfg = small();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_step_csv(&mut a, &run_experiment(&cfg).unwrap()).unwrap();
        write_step_csv(&mut b, &run_experiment(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("run,seed,algorithm,t,task,loss,cum_regret,reward,proj_time_us,coordinated,gap\n"));
        assert_eq!(text.lines().count(), 121);
    }

    #[test]
    fn config_json_round_trip_and_defaults() {
        let cfg = small();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
        let partial: RunConfig = serde_json::from_str(r#"{"algorithm":"uw-cool","steps":7}"#).unwrap();
        assert_eq!(partial.algorithm, Algorithm::UwCool);
        assert_eq!(partial.runs, 10);
        assert!(serde_json::from_str::<RunConfig>(r#"{"stepz":7}"#).is_err());
    }

    #[test]
    fn validation() {
        for bad in [
            RunConfig { runs: 0, ..small() },
            RunConfig { alpha: 1.5, ..small() },
            RunConfig { beta: -0.1, ..small() },
            RunConfig { eta: Some(0.0), ..small() },
            RunConfig { init: Some(10.0), ..small() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn zero_alpha_matches_iol() {
        let cfg = RunConfig { alpha: 0.0, ..small() };
        let out = run_paired(&cfg, &[Algorithm::Iol, Algorithm::Cool]).unwrap();
        for (a, b) in out[0].iter().zip(&out[1]) {
            assert_eq!(a.losses(), b.losses());
        }
    }

    #[test]
    fn bounds_hold_on_small_runs() {
        let cfg = small();
        for algo in [Algorithm::Iol, Algorithm::Cool] {
            let c = RunConfig { algorithm: algo, ..cfg.clone() };
            let traces = run_traces(&c).unwrap();
            for rep in evaluate_bounds(&c, &traces).unwrap() {
                assert!(rep.pass && !rep.bounds.is_empty(), "{rep:?}");
            }
        }
    }

    #[test]
    fn onsets_match_bound_accounting() {
        let cfg = RunConfig {
            alpha: 0.3,
            beta: 0.8,
            ..small()
        };
        for trace in run_traces(&cfg).unwrap() {
            let terms = cool_regret_bound(12, 9.0, 1.0, 9.0, &trace.coordination(), &trace.deltas);
            assert_eq!(terms.onsets, trace.onsets());
        }
    }

    #[test]
    fn sweep_summaries() {
        let rows = sweep(&small(), SweepParam::Beta, &[1.0, 0.5]).unwrap();
        assert_eq!(rows.len(), 2);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("param,value,mean_final_regret,std_final_regret,mean_total_proj_time_us\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
