//! `rrrp`: generate instances, solve them, simulate missions and benchmark the solvers.
//!
//! Exit codes: 0 success, 2 infeasible instance, 1 any other error.

mod artifacts;
mod bench;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrrp_core::bicriteria::{bicriteria_solve, run_pipeline, BicriteriaOptions};
use rrrp_core::generate::{random_instance, random_partition, RandomInstanceConfig};
use rrrp_core::io::{instance_to_string, read_instance};
use rrrp_core::oracle::{exact_solve, reduce_evenodd, PartitionInstance, DEFAULT_NODE_CAP};
use rrrp_core::sim::scenario::{grid_scenario, GridParams};
use rrrp_core::sim::study::{run_study, summarize, write_csv, StudySpec};
use rrrp_core::sim::{write_event_log, Policy, Scenario};
use rrrp_core::{Error, RendezvousInstance, Schedule};
use serde::Serialize;
use serde_json::json;

use artifacts::{read_input, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "rrrp", version, about = "Risk-aware recharging rendezvous planning")]
struct Cli {
    /// Output format for tables and solutions.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance or scenario file.
    Gen(GenArgs),
    /// Solve an instance file.
    Solve(SolveArgs),
    /// Run simulation trials on a scenario file.
    Simulate(SimulateArgs),
    /// Compare pipeline runtime and cost against the exact solver.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Output file; stdout when omitted.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Scheduling instance reduced from an even-odd partition instance.
    Evenodd {
        /// Explicit values (an even count); random values are drawn otherwise.
        #[arg(long, value_delimiter = ',')]
        list: Option<Vec<u64>>,
        #[arg(long, default_value_t = 5)]
        pairs: usize,
        #[arg(long, default_value_t = 20)]
        max_value: u64,
    },
    /// Random scheduling instance.
    Random {
        #[arg(long, default_value_t = 4)]
        uavs: usize,
        #[arg(long, default_value_t = 2)]
        max_departures: usize,
        #[arg(long, default_value_t = 4)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        ugvs: usize,
        #[arg(long, default_value_t = 1)]
        copies: usize,
        #[arg(long, default_value_t = 12)]
        pairs: usize,
    },
    /// Grid scenario for `simulate`.
    Scenario {
        #[arg(long, default_value_t = 4)]
        uavs: usize,
        #[arg(long, default_value_t = 1)]
        ugvs: usize,
        #[arg(long, default_value_t = 10_000.0)]
        reach: f64,
        #[arg(long, default_value_t = 2000.0)]
        task_spacing: f64,
        #[arg(long, default_value_t = 1000.0)]
        block: f64,
        #[arg(long, default_value_t = 3)]
        blocks: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Algo {
    Bicriteria,
    Feasible,
    Exact,
}

#[derive(Args, Debug)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Bicriteria)]
    algo: Algo,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Replace the budget by `ln(1/rho)`.
    #[arg(long)]
    rho_override: Option<f64>,
    /// Recorded in the manifest; the solvers are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
    node_cap: u64,
    /// Solution file; stdout when omitted. A manifest is written next to it.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Policies, e.g. `rrrp`, `rrrp:bicriteria:0.5`, `greedy:0.5`, `greedy-30`.
    #[arg(long, value_delimiter = ',', default_value = "rrrp")]
    policy: Vec<String>,
    /// Defaults to the scenario's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial `i` uses `seed + i`. Defaults to the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Risk levels for risk-aware policies; defaults to the scenario's.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long, default_value = "sim-out")]
    out_dir: PathBuf,
    /// Write one newline-delimited JSON event log per trial.
    #[arg(long)]
    events: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Target edge counts.
    #[arg(long, value_delimiter = ',', default_value = "60,600,6000,60500")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    node_cap: u64,
    /// Table file; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RRRP_THREADS") {
        let n: usize = v.parse().with_context(|| format!("RRRP_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            bail!("RRRP_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        log::info!("using {n} worker threads");
    }
    Ok(())
}

/// Writes to `out` atomically, or to stdout.
fn deliver(out: Option<&Path>, bytes: &[u8], manifest: &mut RunManifest) -> Result<()> {
    match out {
        Some(path) => manifest.emit(path, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (params, text) = match &args.kind {
        GenKind::Evenodd { list, pairs, max_value } => {
            let partition = match list {
                Some(values) => PartitionInstance::new(values.clone())?,
                None => random_partition(&mut rng, *pairs, *max_value)?,
            };
            let params = json!({"kind": "evenodd", "values": partition.values});
            (params, instance_to_string(&reduce_evenodd(&partition)?)?)
        }
        GenKind::Random {
            uavs,
            max_departures,
            nodes,
            ugvs,
            copies,
            pairs,
        } => {
            let cfg = RandomInstanceConfig {
                n_uavs: *uavs,
                max_departures: *max_departures,
                n_nodes: *nodes,
                n_ugvs: *ugvs,
                copies: *copies,
                n_pairs: *pairs,
                ..Default::default()
            };
            let params = json!({"kind": "random", "config": cfg});
            (params, instance_to_string(&random_instance(&mut rng, &cfg)?)?)
        }
        GenKind::Scenario {
            uavs,
            ugvs,
            reach,
            task_spacing,
            block,
            blocks,
        } => {
            let p = GridParams {
                block: *block,
                blocks: *blocks,
                reach: *reach,
                task_spacing: *task_spacing,
                uavs: *uavs,
                ugvs: *ugvs,
            };
            let mut scn = grid_scenario(&p);
            scn.sim.seed = args.seed;
            scn.validate()?;
            (json!({"kind": "scenario", "grid": p}), serde_json::to_string_pretty(&scn)?)
        }
    };
    let mut manifest = RunManifest::new("gen", &[], params, args.seed, args.out.as_ref().and_then(|p| p.parent().map(Path::to_path_buf)));
    let mut bytes = text.into_bytes();
    bytes.push(b'\n');
    deliver(args.out.as_deref(), &bytes, &mut manifest)?;
    if let Some(out) = &args.out {
        manifest.save(&manifest_path(out))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Solution {
    algo: Algo,
    schedule: Vec<usize>,
    cost: f64,
    weight: f64,
    budget: f64,
    violation_count: usize,
    gap: f64,
    wall_time_ms: f64,
    manifest_hash: String,
}

fn solve(inst: &RendezvousInstance, args: &SolveArgs) -> Result<(Schedule, f64)> {
    Ok(match args.algo {
        Algo::Exact => (exact_solve(inst, args.node_cap)?.schedule, 0.0),
        Algo::Feasible => {
            let run = run_pipeline(inst, None)?;
            (run.feasible, run.gap)
        }
        Algo::Bicriteria => {
            let r = bicriteria_solve(inst, &BicriteriaOptions::with_epsilon(args.epsilon))?;
            (r.schedule, r.gap)
        }
    })
}

fn cmd_solve(args: &SolveArgs, format: Format) -> Result<()> {
    let bytes = read_input(&args.instance)?;
    let mut inst = read_instance(bytes.as_slice()).with_context(|| format!("parsing {}", args.instance.display()))?;
    if let Some(rho) = args.rho_override {
        if !(rho > 0.0 && rho < 1.0) {
            bail!(Error::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
        }
        inst = inst.with_budget((1.0 / rho).ln())?;
    }
    let params = json!({
        "algo": args.algo,
        "epsilon": args.epsilon,
        "rho_override": args.rho_override,
        "node_cap": args.node_cap,
    });
    let out_dir = args.out.as_ref().and_then(|p| p.parent().map(Path::to_path_buf));
    let mut manifest = RunManifest::new("solve", &[(args.instance.clone(), bytes)], params, args.seed, out_dir);

    let start = Instant::now();
    let (schedule, gap) = solve(&inst, args)?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let report = inst.check(&schedule)?;
    let sol = Solution {
        algo: args.algo,
        schedule: schedule.iter().map(|e| e.0).collect(),
        cost: report.cost,
        weight: report.weight,
        budget: report.budget,
        violation_count: report.violation_count(),
        gap,
        wall_time_ms,
        manifest_hash: manifest.config_hash.clone(),
    };
    let bytes = match format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(&sol)?;
            v.push(b'\n');
            v
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["algo", "schedule", "cost", "weight", "budget", "violation_count", "gap", "wall_time_ms", "manifest_hash"])?;
            let ids: Vec<String> = sol.schedule.iter().map(ToString::to_string).collect();
            w.write_record([
                format!("{:?}", sol.algo).to_lowercase(),
                ids.join(" "),
                sol.cost.to_string(),
                sol.weight.to_string(),
                sol.budget.to_string(),
                sol.violation_count.to_string(),
                sol.gap.to_string(),
                sol.wall_time_ms.to_string(),
                sol.manifest_hash.clone(),
            ])?;
            w.into_inner()?
        }
    };
    deliver(args.out.as_deref(), &bytes, &mut manifest)?;
    if let Some(out) = &args.out {
        manifest.save(&manifest_path(out))?;
    }
    eprintln!(
        "{:?}: cost {:.3} weight {:.4} budget {:.4} violations {} ({wall_time_ms:.1} ms)",
        args.algo, sol.cost, sol.weight, sol.budget, sol.violation_count
    );
    Ok(())
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn cmd_simulate(args: &SimulateArgs, format: Format) -> Result<()> {
    let bytes = read_input(&args.scenario)?;
    let text = std::str::from_utf8(&bytes).context("scenario is not UTF-8")?;
    let scn = Scenario::from_json(text).with_context(|| format!("parsing {}", args.scenario.display()))?;
    let policies = args.policy.iter().map(|p| p.parse::<Policy>()).collect::<Result<Vec<_>, _>>()?;
    let rhos = args.rho.clone().unwrap_or_else(|| vec![scn.sim.rho]);
    if let Some(bad) = rhos.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        bail!(Error::InvalidParameter(format!("rho must lie in (0, 1), got {bad}")));
    }
    let trials = args.trials.unwrap_or(scn.sim.trials);
    let seed = args.seed.unwrap_or(scn.sim.seed);
    let params = json!({
        "policies": policies.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "rhos": rhos,
        "trials": trials,
        "events": args.events,
    });
    let mut manifest = RunManifest::new("simulate", &[(args.scenario.clone(), bytes.clone())], params, seed, Some(args.out_dir.clone()));

    let rows = run_study(
        &scn,
        &StudySpec {
            policies: &policies,
            rhos: &rhos,
            trials,
            base_seed: seed,
            record_events: args.events,
        },
    )?;
    let summary = summarize(&rows);

    let (metrics, summary_bytes, ext) = match format {
        Format::Csv => {
            let mut m = Vec::new();
            write_csv(&rows, &mut m)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["policy", "rho", "trials", "ttff_s", "ttff_lo", "ttff_hi", "overhead", "nodes", "rdv_per_horizon"])?;
            for s in &summary {
                w.write_record([
                    s.policy.clone(),
                    s.rho.map(|r| r.to_string()).unwrap_or_default(),
                    s.trials.to_string(),
                    s.mean.ttff_s.to_string(),
                    s.ttff_ci.0.to_string(),
                    s.ttff_ci.1.to_string(),
                    s.mean.overhead.to_string(),
                    s.mean.nodes.to_string(),
                    s.mean.rdv_per_horizon.to_string(),
                ])?;
            }
            (m, w.into_inner()?, "csv")
        }
        Format::Json => (serde_json::to_vec_pretty(&rows)?, serde_json::to_vec_pretty(&summary)?, "json"),
    };
    manifest.emit(&args.out_dir.join(format!("metrics.{ext}")), &metrics)?;
    manifest.emit(&args.out_dir.join(format!("summary.{ext}")), &summary_bytes)?;
    if args.events {
        for r in &rows {
            let rho = r.rho.map(|x| format!("_rho{x}")).unwrap_or_default();
            let name = file_safe(&format!("{}{rho}_seed{}.ndjson", r.policy, r.seed));
            let mut log = Vec::new();
            write_event_log(&r.events, &mut log)?;
            manifest.emit(&args.out_dir.join("events").join(name), &log)?;
        }
    }
    manifest.save(&args.out_dir.join("manifest.json"))?;

    for s in &summary {
        let rho = s.rho.map(|r| format!(" rho={r}")).unwrap_or_default();
        println!(
            "{}{rho}: trials {} ttff {:.0} s [{:.0}, {:.0}] overhead {:.3} nodes {:.1} rdv/horizon {:.2}",
            s.policy, s.trials, s.mean.ttff_s, s.ttff_ci.0, s.ttff_ci.1, s.mean.overhead, s.mean.nodes, s.mean.rdv_per_horizon
        );
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs, format: Format) -> Result<()> {
    if args.sizes.is_empty() || args.trials == 0 {
        bail!(Error::InvalidParameter("need at least one size and one trial".into()));
    }
    let params = json!({"sizes": args.sizes, "trials": args.trials, "node_cap": args.node_cap});
    let out_dir = args.out.as_ref().and_then(|p| p.parent().map(Path::to_path_buf));
    let mut manifest = RunManifest::new("bench", &[], params, args.seed, out_dir);
    let rows = bench::run(&args.sizes, args.trials, args.seed, args.node_cap)?;
    let bytes = match format {
        Format::Csv => bench::to_csv(&rows)?,
        Format::Json => serde_json::to_vec_pretty(&rows)?,
    };
    deliver(args.out.as_deref(), &bytes, &mut manifest)?;
    if let Some(out) = &args.out {
        manifest.save(&manifest_path(out))?;
    }
    for &size in &args.sizes {
        let cell: Vec<&bench::BenchRow> = rows.iter().filter(|r| r.size == size).collect();
        let ms = cell.iter().map(|r| r.feasible_ms).sum::<f64>() / cell.len() as f64;
        let gaps: Vec<f64> = cell.iter().filter_map(|r| r.gap_pct).collect();
        let gap = if gaps.is_empty() {
            "n/a".to_string()
        } else {
            format!("{:.1}%", gaps.iter().sum::<f64>() / gaps.len() as f64)
        };
        eprintln!("size {size}: mean pipeline time {ms:.2} ms, mean gap {gap} ({} with oracle)", gaps.len());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a, cli.format),
        Command::Simulate(a) => cmd_simulate(a, cli.format),
        Command::Bench(a) => cmd_bench(a, cli.format),
    }
}

fn is_infeasible(err: &anyhow::Error) -> bool {
    err.chain().any(|e| matches!(e.downcast_ref::<Error>(), Some(Error::Infeasible { .. })))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_infeasible(&e) => {
            eprintln!("infeasible: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
