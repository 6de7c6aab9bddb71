//! Command-line front end: codebook design, single runs, sweeps, and map
//! inspection. All heavy lifting lives in the library.

use clap::{Args, Parser, Subcommand};
use csimap::quantizer::{design_codebook, DesignParams, SeedHints};
use csimap::sim::{
    build_state, collect_training_data, drive, run_experiment, ExperimentConfig, RunOptions,
    SimError,
};
use csimap::{Codebook, CsiMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "csimap",
    version,
    about = "Multi-cell massive MIMO TDD simulator with CSI-map learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the two-part gain codebook from simulated pilot estimates.
    DesignCodebook(DesignArgs),
    /// Run a single learning experiment and write its trajectories.
    Run(RunArgs),
    /// Reproduce the sum-rate band table and hit-ratio curve.
    Sweep(SweepArgs),
    /// Print human-readable statistics for a saved CSI map.
    MapDump(MapDumpArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the codebook.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Codebook produced by `design-codebook`.
    #[arg(long)]
    codebook: PathBuf,
    /// Output directory for fig7.csv, alpha.csv, run_meta.txt, and maps.
    #[arg(long)]
    out_dir: PathBuf,
    /// Oracle mode: skip pilots and inject the true quantized state with
    /// this probability.
    #[arg(long)]
    force_hit_ratio: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    /// Output directory for fig6.csv, fig7.csv, alpha.csv, run_meta.txt.
    #[arg(long)]
    out_dir: PathBuf,
    /// Realize the configured hit bands by oracle injection instead of
    /// searching over dwell probabilities.
    #[arg(long)]
    force_hit_ratio: bool,
}

#[derive(Args)]
struct MapDumpArgs {
    /// Map file written by `run`.
    #[arg(long)]
    map: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints its own message; route errors to the diagnostic
            // stream and fold every usage problem into the config exit code.
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(EXIT_CONFIG);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::DesignCodebook(args) => design(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::MapDump(args) => map_dump(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("csimap: {err}");
            ExitCode::from(exit_class(&err))
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

fn exit_class(err: &CliError) -> u8 {
    match err {
        CliError::Config(_) => EXIT_CONFIG,
        CliError::Runtime(_) => EXIT_RUNTIME,
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!(
            "config file not found: {}",
            path.display()
        )));
    }
    ExperimentConfig::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_codebook(path: &Path) -> Result<Codebook, CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!(
            "codebook file not found: {}",
            path.display()
        )));
    }
    Codebook::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn as_runtime(err: SimError) -> CliError {
    match err {
        SimError::Io(e) => CliError::Runtime(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn design(args: DesignArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let data = collect_training_data(&cfg.system, &cfg.mobility, cfg.quantizer.training_sessions)
        .map_err(as_runtime)?;
    let params = DesignParams {
        shadow_levels: cfg.quantizer.shadow_levels,
        distance_levels: cfg.quantizer.distance_levels,
        gamma: cfg.system.path_loss_exponent,
        max_iters: cfg.quantizer.max_iters,
        tol: cfg.quantizer.tol,
        version: 1,
    };
    let hints = SeedHints {
        distances: Some(&data.distances),
        shadows: Some(&data.shadows),
    };
    let (codebook, report) = design_codebook(&data.gains, &params, hints)
        .map_err(|e| CliError::Config(e.to_string()))?;
    codebook
        .save(&args.out)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", args.out.display())))?;
    println!(
        "designed {}x{} codebook from {} samples in {} iterations (final RMS distortion {:.3e})",
        codebook.shadow_levels(),
        codebook.distance_levels(),
        data.gains.len(),
        report.iterations,
        report.final_rms()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let codebook = load_codebook(&args.codebook)?;
    let options = RunOptions {
        force_hit_ratio: args.force_hit_ratio,
    };
    let mut state = build_state(&cfg, &codebook, options).map_err(as_runtime)?;
    let metrics = drive(&mut state, cfg.num_sessions, cfg.window, false);
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    let write = |name: &str, text: String| -> Result<(), CliError> {
        std::fs::write(args.out_dir.join(name), text)
            .map_err(|e| CliError::Runtime(format!("writing {name}: {e}")))
    };
    write(
        "fig7.csv",
        csimap::sim::experiment::render_hit_ratio_csv(&metrics),
    )?;
    write(
        "alpha.csv",
        csimap::sim::experiment::render_alpha_csv(&metrics),
    )?;
    write("run_meta.txt", {
        let mut meta = String::new();
        meta.push_str(&format!("seed: {}\n", cfg.system.rng_seed));
        meta.push_str(&format!(
            "config_sha256: {}\n",
            csimap::sim::experiment::config_hash(&cfg)
        ));
        meta.push_str(&format!("code_version: {}\n", env!("CARGO_PKG_VERSION")));
        meta
    })?;
    for cell in 0..cfg.system.cells {
        write(&format!("map_cell{cell}.map"), state.map(cell).to_text())?;
    }
    println!(
        "ran {} sessions: final hit ratio {:.4}, mean pilot fraction {:.4}, mean sum-rate {:.3} bits/s/Hz",
        metrics.sessions, metrics.final_hit_ratio, metrics.mean_alpha, metrics.mean_sum_rate
    );
    println!(
        "wrote fig7.csv, alpha.csv, run_meta.txt, and {} map files to {}",
        cfg.system.cells,
        args.out_dir.display()
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let codebook = load_codebook(&args.codebook)?;
    let outputs =
        run_experiment(&cfg, &codebook, &args.out_dir, args.force_hit_ratio).map_err(as_runtime)?;
    println!("hit band -> mean sum-rate (bits/s/Hz):");
    for row in &outputs.band_rows {
        println!("  {:>5} -> {:.4}", row.band, row.mean_sum_rate);
    }
    if !outputs.missing_bands.is_empty() {
        println!(
            "unreachable bands within the search budget: {:?}",
            outputs.missing_bands
        );
    }
    println!(
        "learning run: final hit ratio {:.4} over {} sessions",
        outputs.learning.final_hit_ratio, outputs.learning.sessions
    );
    println!(
        "wrote fig6.csv, fig7.csv, alpha.csv, run_meta.txt to {}",
        args.out_dir.display()
    );
    Ok(())
}

fn map_dump(args: MapDumpArgs) -> Result<(), CliError> {
    if !args.map.exists() {
        return Err(CliError::Config(format!(
            "map file not found: {}",
            args.map.display()
        )));
    }
    let text = std::fs::read_to_string(&args.map).map_err(|e| CliError::Runtime(e.to_string()))?;
    // Cursor lines dictate how many terminals the map must cover.
    let terminals = text
        .lines()
        .filter(|l| l.starts_with("C "))
        .filter_map(|l| l.split_whitespace().nth(1)?.parse::<usize>().ok())
        .map(|t| t + 1)
        .max()
        .unwrap_or(0);
    let map = CsiMap::from_text(&text, terminals)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.map.display())))?;
    println!("{}", args.map.display());
    println!("  codebook version : {}", map.codebook_version());
    println!("  learning rate    : {}", map.learning_rate());
    println!("  prune threshold  : {}", map.prune_threshold());
    println!("  nodes            : {}", map.node_count());
    println!("  edges            : {}", map.edge_count());
    println!(
        "  cursors          : {}",
        (0..map.terminals())
            .filter(|t| map.cursor(*t).is_some())
            .count()
    );
    let mut weights = Vec::new();
    let mut top: Vec<(usize, usize)> = Vec::new();
    for node in map.node_ids() {
        let edges = map.out_edges(node).expect("live node");
        if !edges.is_empty() {
            top.push((edges.len(), node));
        }
        weights.extend(edges.iter().map(|(_, w)| *w));
    }
    if !weights.is_empty() {
        let min = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = weights.iter().cloned().fold(0.0, f64::max);
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        println!("  edge weights     : min {min:.4}, mean {mean:.4}, max {max:.4}");
    }
    top.sort_unstable_by(|a, b| b.cmp(a));
    for (degree, node) in top.iter().take(5) {
        let q = map.qcsi_of(*node).expect("live node");
        println!(
            "  hub node {node}: out-degree {degree}, state ({}, {})",
            q.shadow_idx, q.distance_idx
        );
    }
    Ok(())
}
