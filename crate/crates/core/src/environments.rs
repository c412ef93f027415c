//! Task orderings, synthetic ground truth, and cost-tuple datasets.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hemiproj::HemimetricInstance;
use crate::model::{PairIndex, TaskId};

/// How task instances are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskOrder {
    UniformRandom,
    /// A uniformly drawn task is repeated `b` times.
    Batch { b: usize },
    Single { task: usize },
    Trace { tasks: Vec<usize> },
}

impl TaskOrder {
    pub fn validate(&self, tasks: usize) -> Result<()> {
        match self {
            TaskOrder::UniformRandom => Ok(()),
            TaskOrder::Batch { b } if *b >= 1 => Ok(()),
            TaskOrder::Batch { .. } => Err(Error::InvalidConfig("batch length must be at least 1".into())),
            TaskOrder::Single { task } if *task < tasks => Ok(()),
            TaskOrder::Single { task } => Err(Error::TaskOutOfRange { task: *task, tasks }),
            TaskOrder::Trace { tasks: trace } => match trace.iter().find(|&&z| z >= tasks) {
                Some(&z) => Err(Error::TaskOutOfRange { task: z, tasks }),
                None => Ok(()),
            },
        }
    }
}

/// Stateful task generator for one run.
#[derive(Clone, Debug)]
pub struct TaskStream {
    order: TaskOrder,
    tasks: usize,
    current: Option<TaskId>,
}

impl TaskStream {
    pub fn new(order: TaskOrder, tasks: usize) -> Result<Self> {
        if tasks == 0 {
            return Err(Error::InvalidConfig("need at least one task".into()));
        }
        order.validate(tasks)?;
        Ok(Self {
            order,
            tasks,
            current: None,
        })
    }

    /// Task for step `t ≥ 1`. Steps must be requested in order.
    pub fn next_task<R: Rng + ?Sized>(&mut self, t: usize, rng: &mut R) -> Result<TaskId> {
        let z = match &self.order {
            TaskOrder::UniformRandom => TaskId(rng.gen_range(0..self.tasks)),
            TaskOrder::Batch { b } => match self.current {
                Some(z) if !(t - 1).is_multiple_of(*b) => z,
                _ => TaskId(rng.gen_range(0..self.tasks)),
            },
            TaskOrder::Single { task } => TaskId(*task),
            TaskOrder::Trace { tasks } => TaskId(*tasks.get(t - 1).ok_or(Error::TraceExhausted(t))?),
        };
        self.current = Some(z);
        Ok(z)
    }
}

/// Two equal clusters `{0..n/2}` and `{n/2..n}`: `r_in` within a cluster,
/// `r_out` across. Pair layout of [`PairIndex`].
pub fn clustered_ground_truth(n: usize, r_in: f64, r_out: f64) -> Result<Vec<f64>> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("item count must be even and at least 2, got {n}")));
    }
    if !(r_in >= 0.0 && r_out >= 0.0 && r_in <= 2.0 * r_out) {
        return Err(Error::InvalidConfig(format!(
            "distances r_in={r_in}, r_out={r_out} do not form a hemimetric"
        )));
    }
    let p = PairIndex::new(n);
    let half = n / 2;
    let d: Vec<f64> = (0..p.len())
        .map(|z| {
            let (i, j) = p.pair(z);
            if (i < half) == (j < half) {
                r_in
            } else {
                r_out
            }
        })
        .collect();
    let inst = HemimetricInstance::new(n, r_in.max(r_out))?;
    if !inst.is_member(&d, 0.0) {
        return Err(Error::InvalidConfig("clustered ground truth is not a hemimetric".into()));
    }
    Ok(d)
}

/// One survey response: preferred item `i`, suggested item `j`, and the
/// switching cost, `None` when the user would not switch at any price.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTuple {
    pub i: usize,
    pub j: usize,
    pub cost: Option<f64>,
}

/// Reads `i,j,cost` rows; `NA` in the cost column marks a refusal.
pub fn load_cost_tuples(path: impl AsRef<Path>) -> Result<Vec<CostTuple>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_cost_tuples(&text, path)
}

pub fn parse_cost_tuples(text: &str, path: &Path) -> Result<Vec<CostTuple>> {
    let err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut header_seen = false;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if !header_seen {
            let cols: Vec<&str> = rec.iter().collect();
            if cols != ["i", "j", "cost"] {
                return Err(err(line, format!("expected header `i,j,cost`, found `{}`", cols.join(","))));
            }
            header_seen = true;
            continue;
        }
        if rec.len() != 3 {
            return Err(err(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let item = |k: usize| -> Result<usize> {
            rec[k]
                .parse()
                .map_err(|_| err(line, format!("invalid item id `{}`", &rec[k])))
        };
        let (i, j) = (item(0)?, item(1)?);
        if i == j {
            return Err(err(line, format!("preferred and suggested item are both {i}")));
        }
        let cost = match &rec[2] {
            "NA" => None,
            s => {
                let c: f64 = s.parse().map_err(|_| err(line, format!("invalid cost `{s}`")))?;
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(err(line, format!("cost must be a non-negative number, got {s}")));
                }
                Some(c)
            }
        };
        out.push(CostTuple { i, j, cost });
    }
    Ok(out)
}

pub fn write_cost_tuples(path: impl AsRef<Path>, tuples: &[CostTuple]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "cost"])?;
    for t in tuples {
        let cost = t.cost.map_or_else(|| "NA".to_string(), |c| c.to_string());
        w.write_record([t.i.to_string(), t.j.to_string(), cost])?;
    }
    w.flush()?;
    Ok(())
}

pub const DEFAULT_COST_CATEGORIES: [f64; 5] = [0.0, 10.0, 20.0, 30.0, 40.0];
pub const DEFAULT_NA_RATE: f64 = 0.2;

/// Shape of a synthetic survey.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub na_rate: f64,
    pub categories: Vec<f64>,
    pub weights: Vec<f64>,
    /// Item count; items `0..n/2` are the well-reviewed ones.
    pub items: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 323,
            na_rate: DEFAULT_NA_RATE,
            categories: DEFAULT_COST_CATEGORIES.to_vec(),
            weights: vec![0.2; 5],
            items: 20,
        }
    }
}

/// Samples responses whose preferred item is well reviewed and whose
/// suggested item is not, with categorical costs.
pub fn synth_cost_tuples<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<Vec<CostTuple>> {
    if cfg.categories.is_empty() || cfg.categories.len() != cfg.weights.len() {
        return Err(Error::InvalidConfig("need one weight per cost category".into()));
    }
    if cfg.weights.iter().any(|&w| !(w >= 0.0)) || (cfg.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig("category weights must be non-negative and sum to 1".into()));
    }
    if cfg.categories.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
        return Err(Error::InvalidConfig("costs must be non-negative".into()));
    }
    if !(0.0..=1.0).contains(&cfg.na_rate) {
        return Err(Error::InvalidConfig(format!("na_rate must lie in [0,1], got {}", cfg.na_rate)));
    }
    if cfg.items < 2 || !cfg.items.is_multiple_of(2) {
        return Err(Error::InvalidConfig("item count must be even and at least 2".into()));
    }
    let pick = WeightedIndex::new(&cfg.weights).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let half = cfg.items / 2;
    Ok((0..cfg.count)
        .map(|_| {
            let i = rng.gen_range(0..half);
            let j = rng.gen_range(half..cfg.items);
            let na = rng.gen::<f64>() < cfg.na_rate;
            let c = cfg.categories[pick.sample(rng)];
            CostTuple {
                i,
                j,
                cost: (!na).then_some(c),
            }
        })
        .collect())
}

/// Like [`synth_cost_tuples`], but keeps sampling until `usable` rows have
/// a cost, so the learning stream has exactly that length.
pub fn synth_usable_cost_tuples<R: Rng + ?Sized>(
    cfg: &SynthConfig,
    usable: usize,
    rng: &mut R,
) -> Result<Vec<CostTuple>> {
    if usable > 0 && cfg.na_rate >= 1.0 {
        return Err(Error::InvalidConfig("na_rate of 1 never yields a usable row".into()));
    }
    let one = SynthConfig { count: 1, ..cfg.clone() };
    let mut out = Vec::new();
    let mut have = 0;
    while have < usable {
        let row = synth_cost_tuples(&one, rng)?[0];
        have += usize::from(row.cost.is_some());
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tasks(order: TaskOrder, k: usize, t: usize, seed: u64) -> Vec<usize> {
        let mut s = TaskStream::new(order, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (1..=t).map(|t| s.next_task(t, &mut rng).unwrap().0).collect()
    }

    #[test]
    fn batch_repeats() {
        let z = tasks(TaskOrder::Batch { b: 5 }, 90, 20, 3);
        for chunk in z.chunks(5) {
            assert!(chunk.iter().all(|&x| x == chunk[0]));
        }
        assert!(z.chunks(5).map(|c| c[0]).collect::<std::collections::HashSet<_>>().len() > 1);
    }

    #[test]
    fn batch_of_one_is_uniform() {
        assert_eq!(
            tasks(TaskOrder::Batch { b: 1 }, 90, 100, 8),
            tasks(TaskOrder::UniformRandom, 90, 100, 8)
        );
    }

    #[test]
    fn single_and_trace() {
        assert_eq!(tasks(TaskOrder::Single { task: 4 }, 9, 5, 0), vec![4; 5]);
        let trace = vec![3, 1, 4, 1, 5];
        assert_eq!(tasks(TaskOrder::Trace { tasks: trace.clone() }, 9, 5, 0), trace);
        let mut s = TaskStream::new(TaskOrder::Trace { tasks: trace }, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 1..=5 {
            s.next_task(t, &mut rng).unwrap();
        }
        assert!(matches!(s.next_task(6, &mut rng), Err(Error::TraceExhausted(6))));
    }

    #[test]
    fn uniform_replays_per_seed() {
        assert_eq!(tasks(TaskOrder::UniformRandom, 90, 50, 1), tasks(TaskOrder::UniformRandom, 90, 50, 1));
        assert_ne!(tasks(TaskOrder::UniformRandom, 90, 50, 1), tasks(TaskOrder::UniformRandom, 90, 50, 2));
    }

    #[test]
    fn invalid_orders() {
        assert!(TaskStream::new(TaskOrder::Batch { b: 0 }, 3).is_err());
        assert!(TaskStream::new(TaskOrder::Single { task: 3 }, 3).is_err());
        assert!(TaskStream::new(TaskOrder::Trace { tasks: vec![0, 7] }, 3).is_err());
    }

    #[test]
    fn clustered_examples() {
        let p = PairIndex::new(4);
        let d = clustered_ground_truth(4, 1.0, 9.0).unwrap();
        assert_eq!(d[p.index(0, 1)], 1.0);
        assert_eq!(d[p.index(1, 0)], 1.0);
        assert_eq!(d[p.index(0, 2)], 9.0);
        assert_eq!(d[p.index(3, 1)], 9.0);
        assert_eq!(d[p.index(2, 3)], 1.0);
        assert_eq!(clustered_ground_truth(2, 1.0, 9.0).unwrap(), vec![9.0, 9.0]);
        assert!(clustered_ground_truth(5, 1.0, 9.0).is_err());
        let big = clustered_ground_truth(10, 1.0, 9.0).unwrap();
        assert!(HemimetricInstance::new(10, 9.0).unwrap().is_member(&big, 0.0));
    }

    #[test]
    fn parse_rows() {
        let p = Path::new("x.csv");
        let rows = parse_cost_tuples("i,j,cost\n3,17,30\n3,17,NA\n", p).unwrap();
        assert_eq!(rows[0], CostTuple { i: 3, j: 17, cost: Some(30.0) });
        assert_eq!(rows[1], CostTuple { i: 3, j: 17, cost: None });
        assert!(parse_cost_tuples("", p).unwrap().is_empty());
        assert!(parse_cost_tuples("i,j,cost\n", p).unwrap().is_empty());
    }

    #[test]
    fn parse_errors_carry_line() {
        let p = Path::new("x.csv");
        for (text, line) in [
            ("i,j,cost\n1,2,3\n1,2,abc\n", 3),
            ("i,j,cost\n1,2,-4\n", 2),
            ("i,j,cost\n1,1,4\n", 2),
            ("a,b,c\n", 1),
        ] {
            match parse_cost_tuples(text, p) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_cost_tuples("i,j,cost\n1,2\n", p).is_err());
    }

    #[test]
    fn synth_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = SynthConfig {
            na_rate: 0.0,
            ..SynthConfig::default()
        };
        let rows = synth_cost_tuples(&cfg, &mut rng).unwrap();
        assert_eq!(rows.len(), 323);
        assert!(rows.iter().all(|t| t.cost.is_some() && t.i < 10 && t.j >= 10 && t.j < 20));

        let all_na = SynthConfig {
            na_rate: 1.0,
            ..SynthConfig::default()
        };
        assert!(synth_cost_tuples(&all_na, &mut rng).unwrap().iter().all(|t| t.cost.is_none()));

        let a = synth_cost_tuples(&SynthConfig::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = synth_cost_tuples(&SynthConfig::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);

        let bad = SynthConfig {
            weights: vec![0.5; 5],
            ..SynthConfig::default()
        };
        assert!(synth_cost_tuples(&bad, &mut rng).is_err());
    }

    #[test]
    fn usable_count_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows = synth_usable_cost_tuples(&SynthConfig::default(), 323, &mut rng).unwrap();
        assert_eq!(rows.iter().filter(|t| t.cost.is_some()).count(), 323);
        assert!(rows.last().unwrap().cost.is_some());
        assert!(rows.len() > 323);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = synth_cost_tuples(&SynthConfig::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        write_cost_tuples(&path, &rows).unwrap();
        assert_eq!(load_cost_tuples(&path).unwrap(), rows);
    }
}
