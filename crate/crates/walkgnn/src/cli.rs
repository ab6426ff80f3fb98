//! Command-line front end: training runs, substructure extraction, the
//! action-space benchmark, dataset generation, and gradient self-checks.
//!
//! Exit codes: 0 success, 2 for bad input (flags, config, data files,
//! indices), 1 for everything else.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{q_value, rollout, RolloutMode, POLICY_PREFIX};
use crate::bench::{bench_rows, write_csv, GraphFamily};
use crate::config::{ConfigLayer, RunConfig};
use crate::data::{export_tudataset, generate_ba2motifs, parse_tudataset, GraphDataset};
use crate::env::export::{to_dot, ExtractionRecord};
use crate::env::encode_state;
use crate::error::{Error, Result};
use crate::nn::blocks::mpnn_forward_plain;
use crate::nn::params::ParameterStore;
use crate::pipeline::{self, RunSummary, THETA_PREFIX};
use crate::selfcheck::{gradient_check_suite_with, REL_ERR_THRESHOLD};

/// Graph count when `--dataset ba2motifs.gen` is used without `--generate`.
const GEN_DEFAULT_GRAPHS: usize = 200;
const GEN_BASE_NODES: usize = 20;
const GEN_ATTACH_EDGES: usize = 1;

#[derive(Parser, Debug)]
#[command(name = "walkgnn", version, about = "Graph classification with a learned walk sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train with stratified cross-validation and write metrics, summary,
    /// and per-fold checkpoints.
    Train(TrainArgs),
    /// Extract substructures from a checkpoint as DOT and JSON files.
    Extract(ExtractArgs),
    /// Count cumulative feasible actions along random rollouts and write
    /// a CSV report.
    BenchActions(BenchArgs),
    /// Generate a two-motif dataset on disk in the four-file text format.
    GenData(GenDataArgs),
    /// Run finite-difference gradient checks over every network block.
    GradCheck(GradCheckArgs),
}

/// The shared run-configuration flags. Unset flags fall back to the
/// config file, then to built-in defaults.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    /// Dataset directory (directory basename is the dataset name), or the
    /// literal "ba2motifs.gen" for an in-memory generated dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Generate a two-motif dataset with this many graphs instead of
    /// reading one from disk.
    #[arg(long)]
    generate: Option<usize>,
    /// Sampler dynamics: "walk" or "subgraph".
    #[arg(long)]
    mdp: Option<String>,
    /// Maximum walk length.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Maximum subgraph size.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Substructures sampled per graph.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Discount factor.
    #[arg(long)]
    gamma: Option<f64>,
    /// Target-net blend factor.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eps_start: Option<f64>,
    #[arg(long)]
    eps_end: Option<f64>,
    #[arg(long)]
    lr_sampling: Option<f64>,
    #[arg(long)]
    lr_output: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    jobs: Option<usize>,
    /// TOML config file; keys mirror the flag names.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigFlags {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            dataset: self.dataset.clone(),
            generate: self.generate,
            mdp: self.mdp.clone(),
            l: self.l,
            n: self.n,
            k: self.k,
            epochs: self.epochs,
            batch: self.batch,
            folds: self.folds,
            seed: self.seed,
            gamma: self.gamma,
            beta: self.beta,
            eps_start: self.eps_start,
            eps_end: self.eps_end,
            lr_sampling: self.lr_sampling,
            lr_output: self.lr_output,
            out: self.out.clone(),
            jobs: self.jobs,
        }
    }

    fn resolve(&self) -> Result<RunConfig> {
        RunConfig::resolve(self.config.as_deref(), &self.layer())
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Parameter checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset indices of the graphs to extract from.
    #[arg(long, value_delimiter = ',', required = true)]
    graphs: Vec<usize>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Graph family: path, cycle, tree, ba, or complete.
    #[arg(long)]
    family: String,
    /// Graph sizes to benchmark.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
    sizes: Vec<usize>,
    /// Maximum walk length.
    #[arg(long = "L", default_value_t = 16)]
    l: usize,
    /// Maximum subgraph size.
    #[arg(long = "N", default_value_t = 16)]
    n: usize,
    /// Number of rollout seeds per instance.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Number of graphs (must be even).
    #[arg(long = "n", default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = GEN_BASE_NODES)]
    base_nodes: usize,
    #[arg(long, default_value_t = GEN_ATTACH_EDGES)]
    attach_edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset name; also the exported file prefix.
    #[arg(long, default_value = "BA2Motifs")]
    name: String,
    /// Output directory.
    #[arg(long, default_value = "data/BA2Motifs")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    /// Random instances per block.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Deliberately corrupt this block's gradients (test fixture).
    #[arg(long, hide = true)]
    corrupt: Option<String>,
}

/// Parses the process arguments, runs the selected command, and returns
/// the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::Parse { .. } | Error::Constraint(_) => 2,
        _ => 1,
    }
}

fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Train(a) => cmd_train(a),
        Command::Extract(a) => cmd_extract(a),
        Command::BenchActions(a) => cmd_bench_actions(a),
        Command::GenData(a) => cmd_gen_data(a),
        Command::GradCheck(a) => cmd_grad_check(a),
    }
}

fn cap_workers(jobs: Option<usize>) {
    if let Some(j) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
        {
            log::warn!("worker pool already configured: {e}");
        }
    }
}

/// Loads or generates the dataset a run configuration names.
fn load_dataset(rc: &RunConfig) -> Result<GraphDataset> {
    if let Some(n) = rc.generate {
        return Ok(generate_ba2motifs(n, GEN_BASE_NODES, GEN_ATTACH_EDGES, rc.seed)?.0);
    }
    let Some(path) = &rc.dataset else {
        return Err(Error::input(
            "no dataset: pass --dataset <dir>, --dataset ba2motifs.gen, or --generate <n>"
                .to_string(),
        ));
    };
    if path.as_os_str() == "ba2motifs.gen" {
        let gen = generate_ba2motifs(GEN_DEFAULT_GRAPHS, GEN_BASE_NODES, GEN_ATTACH_EDGES, rc.seed)?;
        return Ok(gen.0);
    }
    let name = path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::input(format!("dataset path {} has no basename", path.display())))?
        .to_string();
    parse_tudataset(path, &name)
}

fn write_json_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::contract(format!("serializing {}: {e}", path.display())))?;
    w.write_all(b"\n")?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let rc = args.flags.resolve()?;
    cap_workers(rc.jobs);
    let ds = load_dataset(&rc)?;
    let tc = rc.to_train_config();
    tc.validate()?;
    let out = rc.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out)?;
    log::info!(
        "training on {} ({} graphs, {} classes), {} folds",
        ds.name,
        ds.len(),
        ds.num_classes,
        rc.folds
    );
    let metrics = pipeline::evaluate_cv(&ds, &tc, rc.folds, Some(&out))?;
    pipeline::write_metrics(BufWriter::new(File::create(out.join("metrics.jsonl"))?), &metrics)?;
    let summary = RunSummary::from_metrics(&metrics);
    write_json_pretty(&out.join("summary.json"), &summary)?;
    println!(
        "mean best val acc {:.4} +- {:.4} over {} folds ({:.1}s); outputs in {}",
        summary.mean_best_val_acc,
        summary.std_best_val_acc,
        summary.folds,
        summary.wall_time_secs,
        out.display()
    );
    Ok(0)
}

fn cmd_extract(args: &ExtractArgs) -> Result<i32> {
    let rc = args.flags.resolve()?;
    let ds = load_dataset(&rc)?;
    let tc = rc.to_train_config();
    let (sm, _om) = pipeline::build_models(&tc, ds.feature_dim, ds.num_classes)?;
    let store = ParameterStore::load(&args.checkpoint)?;
    let out = rc.out.clone().unwrap_or_else(|| PathBuf::from("extracted"));
    std::fs::create_dir_all(&out)?;
    let l = sm.env.max_steps;
    let mut written = 0usize;
    for &idx in &args.graphs {
        if idx >= ds.len() {
            return Err(Error::input(format!(
                "graph index {idx} outside dataset of {} graphs",
                ds.len()
            )));
        }
        let g = &ds.graphs[idx];
        let z = mpnn_forward_plain(&store, THETA_PREFIX, &sm.mpnn, g, &ds.features[idx])?;
        // Greedy rollouts never draw from the RNG; the seed is irrelevant.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let trajectories = rollout(
            g,
            idx,
            &store,
            &sm.agent,
            &z,
            &sm.env,
            RolloutMode::Greedy,
            rc.k,
            None,
            &mut rng,
        )?;
        for (j, traj) in trajectories.iter().enumerate() {
            let mut q_values = Vec::with_capacity(traj.len());
            for t in &traj.transitions {
                let enc = encode_state(&t.state, &z, l)?;
                q_values.push(q_value(&store, POLICY_PREFIX, &sm.agent, &enc, t.action, &z)?);
            }
            let record = ExtractionRecord::new(traj.final_state(), q_values);
            let dot = to_dot(g, traj.final_state(), &format!("g{idx}"))?;
            std::fs::write(out.join(format!("g{idx}_k{j}.dot")), dot)?;
            write_json_pretty(&out.join(format!("g{idx}_k{j}.json")), &record)?;
            written += 1;
        }
    }
    println!("wrote {written} extraction(s) to {}", out.display());
    Ok(0)
}

fn cmd_bench_actions(args: &BenchArgs) -> Result<i32> {
    let family = GraphFamily::parse(&args.family)?;
    let seeds: Vec<u64> = (0..args.seeds).map(|i| args.seed + i).collect();
    let rows = bench_rows(family, &args.sizes, args.l, args.n, &seeds)?;
    match &args.out {
        Some(path) => {
            write_csv(BufWriter::new(File::create(path)?), &rows)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            write_csv(stdout.lock(), &rows)?;
        }
    }
    Ok(0)
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<i32> {
    let (mut ds, ann) = generate_ba2motifs(args.n, args.base_nodes, args.attach_edges, args.seed)?;
    ds.name = args.name.clone();
    export_tudataset(&ds, &args.out, Some(&ann))?;
    println!(
        "wrote {} graphs ({} per class) to {}",
        ds.len(),
        ds.len() / 2,
        args.out.display()
    );
    Ok(0)
}

fn cmd_grad_check(args: &GradCheckArgs) -> Result<i32> {
    let reports = gradient_check_suite_with(args.seeds, args.corrupt.as_deref())?;
    let mut failed: Vec<&str> = Vec::new();
    let mut worst = ("", 0.0f64);
    for r in &reports {
        println!(
            "{:<28} max rel err {:>12.3e}  {}",
            r.block,
            r.max_rel_err,
            if r.passed() { "pass" } else { "FAIL" }
        );
        if r.max_rel_err > worst.1 {
            worst = (r.block, r.max_rel_err);
        }
        if !r.passed() {
            failed.push(r.block);
        }
    }
    println!("worst block: {} ({:.3e})", worst.0, worst.1);
    if failed.is_empty() {
        println!("all blocks under {REL_ERR_THRESHOLD:e}");
        Ok(0)
    } else {
        eprintln!("gradient check failed: {}", failed.join(", "));
        Ok(1)
    }
}
