use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use colearn::coordinator::bounds::{
    batch_bound, corollary_expected_bound, exact_cool_bound, iol_bound, ocp_bound, required_batch,
};
use colearn::environments::TaskOrder;
use colearn::harness::airbnb::{final_reward_stats, run_airbnb, AirbnbConfig};
use colearn::harness::{
    evaluate_bounds, run_traces, sweep, write_step_csv, write_sweep_csv, Algorithm, RunConfig, Scenario, SweepParam,
};
use colearn::hemiproj::{hemimetric_project, hemimetric_project_partial, HemimetricInstance};
use colearn::losses::LossModel;

#[derive(Parser)]
#[command(name = "colearn", version, about = "Coordinated online multi-task learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write per-step rows.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the bound check for every run.
        #[arg(long)]
        check_bounds: bool,
    },
    /// Run a grid over alpha or beta and write one summary row per value.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = ["alpha", "beta"])]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a matrix onto the r-bounded hemimetrics.
    Project {
        /// n×n matrix, one row per line; the diagonal is ignored.
        #[arg(long)]
        input: PathBuf,
        /// n×n weights; unit weights when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
    /// Print closed-form regret bounds.
    Bounds(BoundArgs),
    /// Posted-price pipeline on survey tuples, CoOL against IOL.
    Airbnb(AirbnbArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StructureArg {
    Hemimetric,
    Shared,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with a full configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    structure: Option<StructureArg>,
    /// Items of the hemimetric structure.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r_in: Option<f64>,
    #[arg(long)]
    r_out: Option<f64>,
    /// Tasks of the shared structure.
    #[arg(long)]
    tasks: Option<usize>,
    /// Shared target value.
    #[arg(long)]
    target: Option<f64>,
    /// random | batch:B | single:Z
    #[arg(long)]
    order: Option<String>,
    /// absolute | eps:EPSILON
    #[arg(long)]
    loss: Option<String>,
    #[arg(long = "T")]
    steps: Option<usize>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c_beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    init: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    independent_traces: bool,
    /// Write 0 for projection times so output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        let structure = self.structure.or(match cfg.scenario {
            Scenario::Hemimetric { .. } => None,
            Scenario::SharedScalar { .. } => Some(StructureArg::Shared),
        });
        match structure {
            Some(StructureArg::Shared) => {
                let (mut tasks, mut lower, mut upper, mut target) = (5, 0.0, 1.0, 0.5);
                if let Scenario::SharedScalar {
                    tasks: t,
                    lower: l,
                    upper: u,
                    target: c,
                } = cfg.scenario
                {
                    (tasks, lower, upper, target) = (t, l, u, c);
                }
                cfg.scenario = Scenario::SharedScalar {
                    tasks: self.tasks.unwrap_or(tasks),
                    lower,
                    upper,
                    target: self.target.unwrap_or(target),
                };
            }
            _ => {
                let (mut n, mut r_in, mut r_out) = (10, 1.0, 9.0);
                if let Scenario::Hemimetric { n: a, r_in: b, r_out: c } = cfg.scenario {
                    (n, r_in, r_out) = (a, b, c);
                }
                cfg.scenario = Scenario::Hemimetric {
                    n: self.n.unwrap_or(n),
                    r_in: self.r_in.unwrap_or(r_in),
                    r_out: self.r_out.unwrap_or(r_out),
                };
            }
        }
        if let Some(o) = &self.order {
            cfg.order = parse_order(o)?;
        }
        if let Some(l) = &self.loss {
            cfg.loss = parse_loss(l)?;
        }
        if let Some(a) = &self.algo {
            cfg.algorithm = a.parse()?;
        }
        macro_rules! set {
            ($($f:ident => $g:ident),*) => { $( if let Some(v) = self.$f { cfg.$g = v; } )* };
        }
        set!(steps => steps, alpha => alpha, beta => beta, c_beta => c_beta, runs => runs, seed => seed);
        if self.eta.is_some() {
            cfg.eta = self.eta;
        }
        if self.init.is_some() {
            cfg.init = self.init;
        }
        cfg.independent_traces |= self.independent_traces;
        if self.no_timing {
            cfg.timing = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_order(s: &str) -> Result<TaskOrder> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    Ok(match kind {
        "random" => TaskOrder::UniformRandom,
        "batch" => TaskOrder::Batch {
            b: arg.parse().context("batch:B needs an integer B")?,
        },
        "single" => TaskOrder::Single {
            task: if arg.is_empty() { 0 } else { arg.parse().context("single:Z needs an integer Z")? },
        },
        _ => bail!("unknown order `{s}` (expected random, batch:B or single:Z)"),
    })
}

fn parse_loss(s: &str) -> Result<LossModel> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    Ok(match kind {
        "absolute" => LossModel::Absolute,
        "eps" => LossModel::EpsilonInsensitive {
            epsilon: arg.parse().context("eps:EPSILON needs a number")?,
        },
        _ => bail!("unknown loss `{s}` (expected absolute or eps:EPSILON)"),
    })
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long = "T")]
    t: usize,
    #[arg(long = "K", default_value_t = 1)]
    k: usize,
    #[arg(long)]
    smax: f64,
    #[arg(long)]
    gmax: f64,
    /// iol | ocp | cool | cool-exact | batch
    #[arg(long, default_value = "iol")]
    algo: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    c_beta: f64,
    /// Insensitivity of the loss for the batch bound.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct AirbnbArgs {
    /// CSV with header `i,j,cost`.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Draw a synthetic survey per run (the default when no data is given).
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    na_rate: Option<f64>,
    #[arg(long = "T")]
    steps: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    no_shuffle: bool,
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}:{}: not a number", path.display(), line + 1))?;
        rows.push(row);
    }
    let n = rows.len();
    if n < 2 || rows.iter().any(|r| r.len() != n) {
        bail!("{}: expected a square matrix with at least 2 rows", path.display());
    }
    Ok(rows)
}

fn to_pairs(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let p = colearn::model::PairIndex::new(n);
    (0..p.len())
        .map(|z| {
            let (i, j) = p.pair(z);
            m[i][j]
        })
        .collect()
}

fn project(input: &Path, weights: Option<&Path>, r: f64, delta: f64) -> Result<()> {
    let d = read_matrix(input)?;
    let n = d.len();
    let q = match weights {
        Some(p) => {
            let q = read_matrix(p)?;
            if q.len() != n {
                bail!("weights are {}×{0}, input is {n}×{n}", q.len());
            }
            to_pairs(&q)
        }
        None => vec![1.0; n * (n - 1)],
    };
    let inst = HemimetricInstance::new(n, r)?;
    let d = to_pairs(&d);
    let out = if q.iter().all(|&w| w > 0.0) {
        hemimetric_project(&d, &q, &inst, delta)?
    } else {
        hemimetric_project_partial(&d, &q, &inst, delta)?
    };
    let p = inst.pairs();
    let mut w = csv::Writer::from_writer(io::stdout());
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| if i == j { "0".into() } else { out.d[p.index(i, j)].to_string() })
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    eprintln!(
        "primal={} dual={} gap={} sweeps={}{}",
        out.primal,
        out.dual,
        out.gap,
        out.sweeps,
        if out.capped { " (sweep cap reached)" } else { "" }
    );
    Ok(())
}

fn bounds(a: &BoundArgs) -> Result<()> {
    let v = match a.algo.as_str() {
        "iol" => iol_bound(a.t, a.k, a.smax, a.gmax),
        "ocp" => ocp_bound(a.t, a.smax, a.gmax),
        "cool-exact" => exact_cool_bound(a.t, a.k, a.smax, a.gmax),
        "cool" => {
            let c_alpha = a.alpha * (a.t as f64).sqrt();
            corollary_expected_bound(a.t, a.k, a.smax, a.gmax, c_alpha, a.c_beta, a.beta)
        }
        "batch" => {
            let eps = a.eps.context("--eps is required for the batch bound")?;
            let b = required_batch(a.smax, eps);
            println!("B={b}");
            batch_bound(b, a.smax, a.gmax)
        }
        other => bail!("unknown algorithm `{other}` (expected iol, ocp, cool, cool-exact or batch)"),
    };
    println!("{v:.1}");
    Ok(())
}

fn airbnb(a: &AirbnbArgs) -> Result<()> {
    let mut cfg = AirbnbConfig {
        data: a.data.clone(),
        shuffle: !a.no_shuffle,
        timing: !a.no_timing,
        ..AirbnbConfig::default()
    };
    if let Some(x) = a.na_rate {
        cfg.synth.na_rate = x;
    }
    if let Some(x) = a.steps {
        cfg.steps = x;
    }
    if let Some(x) = a.runs {
        cfg.runs = x;
    }
    if let Some(x) = a.seed {
        cfg.seed = x;
    }
    if let Some(x) = a.alpha {
        cfg.alpha = x;
    }
    if let Some(x) = a.beta {
        cfg.beta = x;
    }
    let recs = run_airbnb(&cfg, &[Algorithm::Iol, Algorithm::Cool])?;
    write_step_csv(output(&a.out)?, &recs)?;
    for algo in [Algorithm::Iol, Algorithm::Cool] {
        let (m, s) = final_reward_stats(&recs, algo);
        eprintln!("{}: mean final average reward {m:.3} (sd {s:.3})", algo.name());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { run, out, check_bounds } => {
            let cfg = run.build()?;
            let traces = run_traces(&cfg)?;
            let capped: usize = traces.iter().map(|t| t.capped_steps).sum();
            if capped > 0 {
                eprintln!("warning: {capped} projections stopped at the sweep cap");
            }
            let recs: Vec<_> = traces.iter().flat_map(|t| t.records.clone()).collect();
            write_step_csv(output(&out)?, &recs)?;
            if check_bounds {
                for rep in evaluate_bounds(&cfg, &traces)? {
                    let list: Vec<String> = rep.bounds.iter().map(|b| format!("{}={:.1}", b.name, b.value)).collect();
                    eprintln!(
                        "run {} {}: regret {:.3} [{}] {}",
                        rep.run,
                        rep.algorithm.name(),
                        rep.realized,
                        list.join(", "),
                        if rep.pass { "ok" } else { "VIOLATED" }
                    );
                }
            }
        }
        Command::Sweep { run, param, values, out } => {
            let cfg = run.build()?;
            let param: SweepParam = param.parse()?;
            let rows: Vec<_> = sweep(&cfg, param, &values)?.into_iter().map(|(r, _)| r).collect();
            write_sweep_csv(output(&out)?, &rows)?;
        }
        Command::Project {
            input,
            weights,
            r,
            delta,
        } => project(&input, weights.as_deref(), r, delta)?,
        Command::Bounds(a) => bounds(&a)?,
        Command::Airbnb(a) => airbnb(&a)?,
    }
    Ok(())
}
