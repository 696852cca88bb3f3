use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dnf_core::dnf::RewardParams;
use dnf_core::failure_model::DEFAULT_EPSILON;
use dnf_core::pomcp::{Rollout, SolverConfig};
use dnf_core::sim::sweep::{run_sweep, to_csv, PlanSource, SweepCell, SweepConfig};
use dnf_core::sim::RouterKind;
use dnf_core::{ContactPlan, FailureModel, LttgMatrix, PlanGenerator};

#[derive(Parser)]
#[command(name = "dnf", version, about = "DTN routing under dependent node failures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random contact plan and write it to a file.
    Generate {
        #[command(flatten)]
        generator: GeneratorArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output plan file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate all-to-all traffic on one plan with one router.
    Run {
        /// Contact plan file.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        mtbf: f64,
        #[arg(long, default_value_t = 30.0)]
        mttr: f64,
        #[arg(long, default_value_t = 0.05)]
        ptx: f64,
        #[arg(long, value_enum, default_value_t = Router::Dnf)]
        router: Router,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the metrics as a one-row CSV.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Average metrics over a grid of failure settings, routers and seeds.
    Sweep {
        /// Fixed contact plan; without it every seed draws its own plan.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[command(flatten)]
        generator: GeneratorArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 30.0, 40.0, 50.0])]
        mtbf: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 30.0, 40.0, 50.0])]
        mttr: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.2])]
        ptx: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Router::Dnf, Router::Cgr, Router::CgrCr])]
        routers: Vec<Router>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
        seeds: Vec<u64>,
        /// Worker threads (0: one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Leave the timing column empty so the CSV is reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        common: CommonArgs,
        /// Output CSV (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the latest-time-to-goal matrix of a plan as CSV.
    Lttg {
        #[arg(long)]
        plan: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GeneratorArgs {
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(2..))]
    nodes: u32,
    /// Bidirectional contacts; each becomes two directed contacts.
    #[arg(long, default_value_t = 70)]
    contacts: u32,
    #[arg(long, default_value_t = 100)]
    horizon: u64,
    #[arg(long, default_value_t = 10)]
    duration: u64,
    /// Link propagation delay in ticks.
    #[arg(long, default_value_t = 2)]
    delay: u64,
}

impl GeneratorArgs {
    fn generator(&self) -> PlanGenerator {
        PlanGenerator {
            node_count: self.nodes,
            bidirectional_contacts: self.contacts,
            horizon: self.horizon,
            contact_duration: self.duration,
            t_prop: self.delay,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Cut-off tolerance of the failure prediction.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    iterations: usize,
    #[arg(long, default_value_t = 100.0)]
    exploration: f64,
    #[arg(long, default_value_t = 50)]
    depth: usize,
    #[arg(long, default_value_t = 0.95)]
    discount: f64,
    #[arg(long, value_enum, default_value_t = RolloutArg::Reward)]
    rollout: RolloutArg,
    /// Tick at which every bundle is created.
    #[arg(long, default_value_t = 0)]
    creation_time: u64,
}

impl CommonArgs {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            iterations: self.iterations,
            exploration_c: self.exploration,
            max_depth: self.depth,
            discount: self.discount,
            rollout: match self.rollout {
                RolloutArg::Reward => Rollout::Reward,
                RolloutArg::Random => Rollout::Random,
            },
            ..SolverConfig::default()
        }
    }

    fn rewards(&self) -> RewardParams {
        RewardParams {
            discount: self.discount,
            ..RewardParams::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Router {
    Dnf,
    Cgr,
    CgrCr,
}

impl From<Router> for RouterKind {
    fn from(r: Router) -> Self {
        match r {
            Router::Dnf => RouterKind::Dnf,
            Router::Cgr => RouterKind::Cgr,
            Router::CgrCr => RouterKind::CgrCr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RolloutArg {
    Reward,
    Random,
}

/// Errors split by exit code: bad input (2) versus failures while running (1).
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn read_plan(path: &Path) -> Result<ContactPlan, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read plan file {}", path.display()))
        .map_err(usage)?;
    ContactPlan::parse(&text)
        .with_context(|| format!("invalid plan file {}", path.display()))
        .map_err(usage)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Rejects inputs the simulator would only discover deep inside a sweep.
fn check_settings(mtbf: &[f64], mttr: &[f64], ptx: &[f64], common: &CommonArgs) -> Result<(), Failure> {
    for &b in mtbf {
        for &r in mttr {
            for &p in ptx {
                FailureModel::from_mtbf_mttr(b, r, p)
                    .and_then(|m| m.with_epsilon(common.epsilon))
                    .map_err(usage)?;
            }
        }
    }
    common.solver().validate().map_err(usage)
}

fn summary(cell: &SweepCell) -> String {
    format!(
        "router,{}\ndelivery_ratio,{:.3}\ntransmissions,{:.3}\nenergy_efficiency,{:.3}\nmean_delay,{:.3}\nmean_hops,{:.3}\nmean_decision_ms,{:.3}\n",
        cell.router,
        cell.delivery_ratio,
        cell.transmissions,
        cell.energy_efficiency,
        cell.mean_delay,
        cell.mean_hops,
        cell.mean_decision_ms,
    )
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { generator, seed, output } => {
            let plan = generator.generator().generate(seed).map_err(usage)?;
            write_output(Some(&output), &plan.to_text())?;
            println!(
                "nodes,{}\ncontacts,{}\nhorizon,{}",
                plan.node_count(),
                plan.contacts().len(),
                plan.horizon()
            );
        }
        Command::Run {
            plan,
            mtbf,
            mttr,
            ptx,
            router,
            seed,
            common,
            output,
        } => {
            let plan = read_plan(&plan)?;
            check_settings(&[mtbf], &[mttr], &[ptx], &common)?;
            let cfg = SweepConfig {
                plan: PlanSource::Fixed(plan),
                mtbf: vec![mtbf],
                mttr: vec![mttr],
                ptx: vec![ptx],
                epsilon: common.epsilon,
                routers: vec![router.into()],
                solver: common.solver(),
                rewards: common.rewards(),
                seeds: vec![seed],
                creation_time: common.creation_time,
                jobs: 1,
            };
            let cells = run_sweep(&cfg).map_err(runtime)?;
            print!("{}", summary(&cells[0]));
            if let Some(path) = output {
                write_output(Some(&path), &to_csv(&cells, true))?;
            }
        }
        Command::Sweep {
            plan,
            generator,
            mtbf,
            mttr,
            ptx,
            routers,
            seeds,
            jobs,
            no_timing,
            common,
            output,
        } => {
            let plan = match plan {
                Some(path) => PlanSource::Fixed(read_plan(&path)?),
                None => PlanSource::Generated(generator.generator()),
            };
            check_settings(&mtbf, &mttr, &ptx, &common)?;
            let cfg = SweepConfig {
                plan,
                mtbf,
                mttr,
                ptx,
                epsilon: common.epsilon,
                routers: routers.into_iter().map(RouterKind::from).collect(),
                solver: common.solver(),
                rewards: common.rewards(),
                seeds,
                creation_time: common.creation_time,
                jobs,
            };
            let cells = run_sweep(&cfg).map_err(|e| match e {
                dnf_core::sim::sweep::SweepError::EmptyList(_) => usage(e),
                e => runtime(e),
            })?;
            write_output(output.as_deref(), &to_csv(&cells, !no_timing))?;
            // pooled over cells, weighted by each cell's decision count
            let mut times = Vec::new();
            for c in cells.iter().filter(|c| c.decisions > 0) {
                times.push((c.decisions, c.mean_decision_ms, c.var_decision_ms));
            }
            let n: usize = times.iter().map(|t| t.0).sum();
            if n > 0 {
                let mean = times.iter().map(|&(k, m, _)| k as f64 * m).sum::<f64>() / n as f64;
                let var = times
                    .iter()
                    .map(|&(k, m, v)| k as f64 * (v + (m - mean).powi(2)))
                    .sum::<f64>()
                    / n as f64;
                eprintln!("decision time over {n} decisions: mean {mean:.3} ms, variance {var:.3} ms^2");
            }
        }
        Command::Lttg { plan, output } => {
            let plan = read_plan(&plan)?;
            write_output(output.as_deref(), &LttgMatrix::compute(&plan).to_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DNF_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            log::error!("run failed: {e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
