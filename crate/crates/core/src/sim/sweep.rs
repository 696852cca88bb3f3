//! Parameter sweeps over failure settings and routers, with CSV output.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::contact_plan::{ContactPlan, PlanGenerator};
use crate::dnf::{Network, RewardParams};
use crate::failure_model::{FailureModel, ModelError, DEFAULT_EPSILON};
use crate::pomcp::SolverConfig;

use super::{all_to_all, GroundTruth, RouterConfig, RouterKind, SimError, SimReport, Simulation, TxFailures};

pub const CSV_HEADER: &str = "router,mtbf,mttr,ptx,seed_count,delivery_ratio,transmissions,energy_efficiency,mean_delay,mean_hops,mean_decision_ms";

#[derive(Debug, Clone, PartialEq)]
pub enum PlanSource {
    Fixed(ContactPlan),
    /// A fresh plan per seed, drawn with that seed.
    Generated(PlanGenerator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub plan: PlanSource,
    pub mtbf: Vec<f64>,
    pub mttr: Vec<f64>,
    pub ptx: Vec<f64>,
    pub epsilon: f64,
    pub routers: Vec<RouterKind>,
    pub solver: SolverConfig,
    pub rewards: RewardParams,
    pub seeds: Vec<u64>,
    pub creation_time: u64,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            plan: PlanSource::Generated(PlanGenerator::default()),
            mtbf: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            mttr: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            ptx: vec![0.0, 0.05, 0.20],
            epsilon: DEFAULT_EPSILON,
            routers: RouterKind::ALL.to_vec(),
            solver: SolverConfig::default(),
            rewards: RewardParams::default(),
            seeds: vec![1, 2, 3, 4, 5],
            creation_time: 0,
            jobs: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweep list `{0}` is empty")]
    EmptyList(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plan(#[from] crate::contact_plan::PlanError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Seed-averaged metrics of one `(router, mtbf, mttr, ptx)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub router: RouterKind,
    pub mtbf: f64,
    pub mttr: f64,
    pub ptx: f64,
    pub seed_count: usize,
    pub delivery_ratio: f64,
    pub transmissions: f64,
    pub energy_efficiency: f64,
    pub mean_delay: f64,
    pub mean_hops: f64,
    pub decisions: usize,
    pub mean_decision_ms: f64,
    pub var_decision_ms: f64,
}

#[derive(Debug, Clone, Copy)]
struct RunKey {
    cell: usize,
    seed: u64,
}

/// Runs the Cartesian product of failure settings and routers, every cell
/// over every seed. Ground truth depends only on the seed and the failure
/// rates, so all routers in a cell face identical node outages.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepCell>, SweepError> {
    for (name, empty) in [
        ("mtbf", cfg.mtbf.is_empty()),
        ("mttr", cfg.mttr.is_empty()),
        ("ptx", cfg.ptx.is_empty()),
        ("routers", cfg.routers.is_empty()),
        ("seeds", cfg.seeds.is_empty()),
    ] {
        if empty {
            return Err(SweepError::EmptyList(name));
        }
    }

    let mut cells = Vec::new();
    for &router in &cfg.routers {
        for &mtbf in &cfg.mtbf {
            for &mttr in &cfg.mttr {
                for &ptx in &cfg.ptx {
                    FailureModel::from_mtbf_mttr(mtbf, mttr, ptx)?.with_epsilon(cfg.epsilon)?;
                    cells.push((router, mtbf, mttr, ptx));
                }
            }
        }
    }
    let plans: Vec<ContactPlan> = cfg
        .seeds
        .iter()
        .map(|&s| match &cfg.plan {
            PlanSource::Fixed(p) => Ok(p.clone()),
            PlanSource::Generated(g) => g.generate(s),
        })
        .collect::<Result<_, _>>()?;

    let runs: Vec<RunKey> = (0..cells.len())
        .flat_map(|cell| cfg.seeds.iter().map(move |&seed| RunKey { cell, seed }))
        .collect();

    let execute = |key: &RunKey| -> Result<SimReport, SweepError> {
        let (router, mtbf, mttr, ptx) = cells[key.cell];
        let seed_idx = cfg.seeds.iter().position(|&s| s == key.seed).expect("seed in list");
        let plan = plans[seed_idx].clone();
        let model = FailureModel::from_mtbf_mttr(mtbf, mttr, ptx)?.with_epsilon(cfg.epsilon)?;
        let max_prop = plan.contacts().iter().map(|c| c.t_prop).max().unwrap_or(0);
        let until = plan.horizon() + 2 * max_prop + 2;
        let truth = GroundTruth::sample(&model, plan.node_count(), until, key.seed);
        let tx = TxFailures::Seeded { seed: key.seed, p: ptx };
        let traffic = all_to_all(plan.node_count(), cfg.creation_time);
        let network = Network::new(plan, model);
        let router = RouterConfig {
            kind: router,
            solver: cfg.solver,
            rewards: cfg.rewards,
        };
        let sim = Simulation {
            network: &network,
            truth: &truth,
            tx: &tx,
            router,
            seed: key.seed,
        };
        Ok(sim.run(&traffic)?.report)
    };

    log::info!("sweep: {} cells x {} seeds", cells.len(), cfg.seeds.len());
    let reports: Vec<SimReport> = if cfg.jobs == 1 {
        runs.iter().map(execute).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?;
        pool.install(|| runs.par_iter().map(execute).collect::<Result<_, _>>())?
    };

    let per_cell = cfg.seeds.len();
    let mut out: Vec<SweepCell> = cells
        .iter()
        .zip(reports.chunks(per_cell))
        .map(|(&(router, mtbf, mttr, ptx), reps)| aggregate(router, mtbf, mttr, ptx, reps))
        .collect();
    out.sort_by(|a, b| {
        (a.router, a.mtbf, a.mttr, a.ptx)
            .partial_cmp(&(b.router, b.mtbf, b.mttr, b.ptx))
            .expect("finite sweep parameters")
    });
    Ok(out)
}

fn aggregate(router: RouterKind, mtbf: f64, mttr: f64, ptx: f64, reps: &[SimReport]) -> SweepCell {
    let avg = |f: &dyn Fn(&SimReport) -> f64| {
        let vals: Vec<f64> = reps.iter().map(f).filter(|v| !v.is_nan()).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let times: Vec<f64> = reps.iter().flat_map(|r| r.decision_ms.iter().copied()).collect();
    let (mean_ms, var_ms) = mean_var(&times);
    SweepCell {
        router,
        mtbf,
        mttr,
        ptx,
        seed_count: reps.len(),
        delivery_ratio: avg(&|r| r.delivery_ratio),
        transmissions: avg(&|r| r.transmissions as f64),
        energy_efficiency: avg(&|r| r.energy_efficiency),
        mean_delay: avg(&|r| r.mean_delay),
        mean_hops: avg(&|r| r.mean_hops),
        decisions: times.len(),
        mean_decision_ms: mean_ms,
        var_decision_ms: var_ms,
    }
}

/// Population mean and variance; NaN for an empty sample.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros removed.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// CSV with [`CSV_HEADER`]. Without `timing` the decision-time column is left
/// empty so the file depends only on the configuration and seeds.
pub fn to_csv(cells: &[SweepCell], timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        let ms = if timing && c.decisions > 0 { fmt_sig6(c.mean_decision_ms) } else { String::new() };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.router,
            fmt_sig6(c.mtbf),
            fmt_sig6(c.mttr),
            fmt_sig6(c.ptx),
            c.seed_count,
            fmt_sig6(c.delivery_ratio),
            fmt_sig6(c.transmissions),
            fmt_sig6(c.energy_efficiency),
            fmt_sig6(c.mean_delay),
            fmt_sig6(c.mean_hops),
            ms,
        )
        .unwrap();
    }
    out
}
