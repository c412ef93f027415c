//! Posted-price pipeline on survey-style cost tuples: a learner per ordered
//! pair of items offers a price, the user accepts when it covers their cost.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mean_std, new_ensemble, run_rngs, Algorithm, RunRecord};
use crate::constraints::StructureSpec;
use crate::coordinator::{cool_step, CoordinationSchedule, CoordinationSource, Coordinator, GapSource, WeightingMode};
use crate::environments::{load_cost_tuples, synth_usable_cost_tuples, CostTuple, SynthConfig};
use crate::error::{Error, Result};
use crate::losses::{marketplace_reward, LossModel};
use crate::model::PairIndex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirbnbConfig {
    /// Item count; items `0..n/2` are well reviewed.
    pub items: usize,
    pub utility: f64,
    pub delta: f64,
    pub runs: usize,
    pub seed: u64,
    /// Shuffle the usable tuples before serving them.
    pub shuffle: bool,
    pub alpha: f64,
    pub beta: f64,
    pub c_beta: f64,
    pub eta: Option<f64>,
    /// Survey file; a synthetic survey is drawn per run when absent.
    pub data: Option<PathBuf>,
    pub synth: SynthConfig,
    /// Usable tuples drawn per synthetic survey.
    pub steps: usize,
    pub timing: bool,
}

impl Default for AirbnbConfig {
    fn default() -> Self {
        Self {
            items: 20,
            utility: 40.0,
            delta: 20.0,
            runs: 10,
            seed: 42,
            shuffle: true,
            alpha: 1.0,
            beta: 1.0,
            c_beta: 1.0,
            eta: None,
            data: None,
            synth: SynthConfig::default(),
            steps: 323,
            timing: true,
        }
    }
}

impl AirbnbConfig {
    pub fn loss(&self) -> LossModel {
        LossModel::PostedPrice {
            utility: self.utility,
            delta: self.delta,
        }
    }

    /// Prices live in `[0, u]`.
    pub fn spec(&self) -> Result<StructureSpec> {
        StructureSpec::hemimetric(self.items, self.utility)
    }

    pub fn effective_eta(&self) -> f64 {
        self.eta
            .unwrap_or_else(|| self.utility / self.loss().gradient_bound(1))
    }

    pub fn validate(&self) -> Result<()> {
        self.loss().validate()?;
        if self.runs == 0 || self.items < 2 || !self.items.is_multiple_of(2) {
            return Err(Error::InvalidConfig("need runs ≥ 1 and an even item count ≥ 2".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if self.synth.items != self.items {
            return Err(Error::InvalidConfig("synthetic item count differs from `items`".into()));
        }
        Ok(())
    }

    fn schedule(&self, algorithm: Algorithm) -> Result<CoordinationSchedule> {
        let xi = match algorithm {
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
                s_max: self.utility,
                tasks: self.items * (self.items - 1),
            }
        };
        CoordinationSchedule::new(xi, delta)
    }
}

/// Keeps tuples with a cost whose preferred item is well reviewed and whose
/// suggested item is not.
pub fn usable_tuples(tuples: &[CostTuple], items: usize) -> Result<Vec<CostTuple>> {
    if let Some(t) = tuples.iter().find(|t| t.i >= items || t.j >= items) {
        return Err(Error::InvalidConfig(format!(
            "tuple ({}, {}) names an item outside 0..{items}",
            t.i, t.j
        )));
    }
    let half = items / 2;
    Ok(tuples
        .iter()
        .filter(|t| t.cost.is_some() && t.i < half && t.j >= half)
        .copied()
        .collect())
}

/// The learning stream of one run.
pub fn prepare_stream(config: &AirbnbConfig, run: usize) -> Result<Vec<CostTuple>> {
    let seed = config.seed.wrapping_add(run as u64);
    let mut data_rng = ChaCha8Rng::seed_from_u64(seed);
    data_rng.set_stream(2);
    let raw = match &config.data {
        Some(path) => load_cost_tuples(path)?,
        None => synth_usable_cost_tuples(&config.synth, config.steps, &mut data_rng)?,
    };
    let mut rows = usable_tuples(&raw, config.items)?;
    if config.shuffle {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
        shuffle_rng.set_stream(3);
        rows.shuffle(&mut shuffle_rng);
    }
    Ok(rows)
}

/// One run over `stream`. `cum_regret` holds the cumulative surrogate loss
/// (the competitor is unknown) and `reward` the running mean reward.
pub fn run_stream(config: &AirbnbConfig, algorithm: Algorithm, run: usize, stream: &[CostTuple]) -> Result<Vec<RunRecord>> {
    let spec = config.spec()?;
    let pairs = PairIndex::new(config.items);
    let loss = config.loss();
    let schedule = config.schedule(algorithm)?;
    let mode = match algorithm {
        Algorithm::UwCool => WeightingMode::Identity,
        _ => WeightingMode::SqrtTau,
    };
    let coordinator = Coordinator::new(spec.clone(), mode);
    let seed = config.seed.wrapping_add(run as u64);
    let (_, mut xi_rng) = run_rngs(seed);
    let mut ens = new_ensemble(&spec, config.effective_eta(), None);

    let mut out = Vec::with_capacity(stream.len());
    let mut cum_loss = 0.0;
    let mut cum_reward = 0.0;
    for (step, tuple) in stream.iter().enumerate() {
        let t = step + 1;
        let cost = tuple.cost.expect("usable tuples carry a cost");
        let z = pairs.task(tuple.i, tuple.j);
        let price = ens.learner(z).w[0];
        let oracle = |w: &[f64]| loss.evaluate(w, &[cost]);
        let (l, coordinated, gap, us) = match algorithm {
            Algorithm::Iol => (ens.iol_step(z, oracle), false, 0.0, 0.0),
            _ => {
                let s = cool_step(t, &coordinator, &schedule, &mut ens, z, &mut xi_rng, oracle)?;
                let us = if config.timing { s.proj_time.as_secs_f64() * 1e6 } else { 0.0 };
                (s.loss, s.coordinated, s.gap, us)
            }
        };
        cum_loss += l;
        cum_reward += marketplace_reward(price, cost, config.utility);
        out.push(RunRecord {
            run,
            seed,
            algorithm,
            t,
            task: z.0,
            loss: l,
            cum_regret: cum_loss,
            reward: Some(cum_reward / t as f64),
            proj_time_us: us,
            coordinated,
            gap,
        });
    }
    Ok(out)
}

/// Paired runs: each run index serves the same stream to every algorithm.
pub fn run_airbnb(config: &AirbnbConfig, algorithms: &[Algorithm]) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let mut out = Vec::new();
    for run in 0..config.runs {
        let stream = prepare_stream(config, run)?;
        for &a in algorithms {
            out.extend(run_stream(config, a, run, &stream)?);
        }
    }
    Ok(out)
}

/// Mean and standard deviation over runs of the final running-mean reward.
pub fn final_reward_stats(records: &[RunRecord], algorithm: Algorithm) -> (f64, f64) {
    let mut finals: Vec<(usize, usize, f64)> = Vec::new();
    for r in records.iter().filter(|r| r.algorithm == algorithm) {
        match finals.last_mut() {
            Some(last) if last.0 == r.run => {
                if r.t > last.1 {
                    *last = (r.run, r.t, r.reward.unwrap_or(0.0));
                }
            }
            _ => finals.push((r.run, r.t, r.reward.unwrap_or(0.0))),
        }
    }
    let xs: Vec<f64> = finals.iter().map(|f| f.2).collect();
    mean_std(&xs)
}
