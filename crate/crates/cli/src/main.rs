//! `cbcast`: command-line experiment runner for the CONGEST broadcast
//! simulator.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 some trial
//! failed to run, 3 some trial breached a checked property.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use congest_bcast::apsp::Stretch;
use congest_bcast::broadcast::Placement;
use congest_bcast::experiment::{
    run_experiment, Command, ExperimentConfig, ExperimentResult, GraphSource, PackingMode,
};
use congest_bcast::packing::{DEFAULT_BOUND_CONST, DEFAULT_C};
use congest_bcast::sim::SimConfig;

#[derive(Parser, Debug)]
#[command(
    name = "cbcast",
    version,
    about = "CONGEST-model broadcast, APSP and cut experiments"
)]
struct Cli {
    /// Base seed; trial i uses seed + i.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of independent trials.
    #[arg(long, global = true, default_value_t = 1)]
    trials: usize,
    /// Write per-trial JSON records here ("-" for stdout).
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Write the aggregate CSV row here ("-" for stdout).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Suppress the one-line summary.
    #[arg(long, global = true)]
    quiet: bool,
    /// Save the resolved configuration as JSON for `replay`.
    #[arg(long, global = true)]
    dump_config: Option<PathBuf>,
    /// Bandwidth factor b in B = b * ceil(log2 n).
    #[arg(long, global = true, default_value_t = SimConfig::default().bandwidth_factor)]
    bandwidth_factor: u32,
    /// Abort a phase after this many rounds.
    #[arg(long, global = true, default_value_t = SimConfig::default().round_cap)]
    round_cap: u64,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct GraphArg {
    /// Graph file ("n m [weighted]" header, then "u v [w]" lines) or a
    /// generator spec such as complete:64, random_regular:256:32,
    /// hypercube:6, circulant:64:8, path:10, barbell:8.
    #[arg(long)]
    graph: String,
}

#[derive(Args, Debug)]
struct Consts {
    /// C in lambda' = floor(lambda / (C ln n)).
    #[arg(long, default_value_t = DEFAULT_C)]
    c_const: f64,
    /// Parts must have diameter at most bound-const * (n ln n) / delta.
    #[arg(long, default_value_t = DEFAULT_BOUND_CONST)]
    bound_const: f64,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Generate a graph and print its statistics.
    Gen {
        #[command(flatten)]
        graph: GraphArg,
        /// Write the first trial's graph to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact statistics: degrees, edge connectivity, diameter.
    Oracle {
        #[command(flatten)]
        graph: GraphArg,
    },
    /// Random edge partition and its verification.
    Pack {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        consts: Consts,
        /// Partition for this edge connectivity instead of searching.
        #[arg(long)]
        lambda: Option<usize>,
    },
    /// k-broadcast over a tree packing.
    Broadcast {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        consts: Consts,
        /// Number of messages.
        #[arg(long)]
        k: usize,
        /// one-node, uniform or adversarial-cut.
        #[arg(long, default_value = "uniform")]
        placement: Placement,
        /// auto (exponential search), single (one tree) or exact.
        #[arg(long, default_value = "auto")]
        packing: PackingMode,
        /// Bits per message (default ceil(log2 n)).
        #[arg(long)]
        content_bits: Option<u32>,
        /// Also run the single-tree baseline and report the speedup.
        #[arg(long)]
        baseline: bool,
    },
    /// (3,2)-approximate unweighted APSP.
    ApspUnweighted {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        consts: Consts,
        /// c in the center probability c ln n / delta.
        #[arg(long, default_value_t = 3.0)]
        c_cluster: f64,
    },
    /// (2r-1)-approximate weighted APSP through a spanner.
    ApspWeighted {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        consts: Consts,
        /// Spanner parameter r.
        #[arg(
            long,
            conflicts_with = "stretch_auto",
            required_unless_present = "stretch_auto"
        )]
        stretch_r: Option<usize>,
        /// r = ceil(log2 n / log2 log2 n).
        #[arg(long)]
        stretch_auto: bool,
        /// Draw weights uniformly from [1, W] per trial.
        #[arg(long)]
        weight_max: Option<u64>,
    },
    /// Cut estimation through a broadcast sparsifier.
    Cuts {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        consts: Consts,
        /// Target relative error.
        #[arg(long)]
        epsilon: f64,
        /// c_s in q = min(1, c_s ln n / (eps^2 lambda)).
        #[arg(long, default_value_t = 1.0)]
        c_sparsifier: f64,
        /// Query file, one subset per line as space-separated node ids;
        /// every proper cut when absent (at most 20 nodes).
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Fractional bits of the quantized weight (default: all that fit).
        #[arg(long)]
        frac_bits: Option<u32>,
    },
    /// Re-run a configuration saved with --dump-config.
    Replay {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_queries(path: &Path) -> Result<Vec<Vec<usize>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| {
                        format!("{}:{}: '{t}' is not a node id", path.display(), i + 1)
                    })
                })
                .collect()
        })
        .collect()
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let sim = SimConfig {
        bandwidth_factor: cli.bandwidth_factor,
        round_cap: cli.round_cap,
        trace: false,
    };
    let (graph, command) = match &cli.command {
        Sub::Replay { config } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| format!("{}: {e}", config.display()))?;
            return serde_json::from_str(&text).map_err(|e| format!("{}: {e}", config.display()));
        }
        Sub::Gen { graph, out } => (graph, Command::Gen { out: out.clone() }),
        Sub::Oracle { graph } => (graph, Command::Oracle),
        Sub::Pack {
            graph,
            consts,
            lambda,
        } => (
            graph,
            Command::Pack {
                c: consts.c_const,
                bound_const: consts.bound_const,
                lambda: *lambda,
            },
        ),
        Sub::Broadcast {
            graph,
            consts,
            k,
            placement,
            packing,
            content_bits,
            baseline,
        } => (
            graph,
            Command::Broadcast {
                k: *k,
                placement: *placement,
                packing: *packing,
                c: consts.c_const,
                bound_const: consts.bound_const,
                content_bits: *content_bits,
                baseline: *baseline,
            },
        ),
        Sub::ApspUnweighted {
            graph,
            consts,
            c_cluster,
        } => (
            graph,
            Command::ApspUnweighted {
                c_cluster: *c_cluster,
                c_const: consts.c_const,
                bound_const: consts.bound_const,
            },
        ),
        Sub::ApspWeighted {
            graph,
            consts,
            stretch_r,
            stretch_auto,
            weight_max,
        } => (
            graph,
            Command::ApspWeighted {
                stretch: match (stretch_r, stretch_auto) {
                    (Some(r), _) => Stretch::Fixed(*r),
                    (None, _) => Stretch::Auto,
                },
                weight_max: *weight_max,
                c_const: consts.c_const,
                bound_const: consts.bound_const,
            },
        ),
        Sub::Cuts {
            graph,
            consts,
            epsilon,
            c_sparsifier,
            queries,
            frac_bits,
        } => (
            graph,
            Command::Cuts {
                epsilon: *epsilon,
                c_sparsifier: *c_sparsifier,
                c_const: consts.c_const,
                bound_const: consts.bound_const,
                queries: queries.as_deref().map(parse_queries).transpose()?,
                frac_bits: *frac_bits,
            },
        ),
    };
    let cfg = ExperimentConfig {
        graph: GraphSource::parse(&graph.graph)?,
        command,
        seed: cli.seed,
        trials: cli.trials,
        sim,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: &Path, text: &str) -> Result<(), String> {
    if path == Path::new("-") {
        print!("{text}");
        Ok(())
    } else {
        std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn write_outputs(cli: &Cli, cfg: &ExperimentConfig, res: &ExperimentResult) -> Result<(), String> {
    if let Some(p) = &cli.dump_config {
        let text = serde_json::to_string_pretty(cfg).expect("config serialises") + "\n";
        emit(p, &text)?;
    }
    if let Some(p) = &cli.json {
        emit(p, &res.records_json())?;
    }
    if let Some(p) = &cli.csv {
        emit(p, &res.aggregate_csv())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let res = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&cli, &cfg, &res) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if !cli.quiet {
        let stdout_taken = [&cli.json, &cli.csv]
            .iter()
            .any(|p| p.as_deref() == Some(Path::new("-")));
        if stdout_taken {
            eprintln!("{}", res.summary());
        } else {
            println!("{}", res.summary());
        }
    }
    for r in res.records.iter().filter(|r| !r.ok) {
        eprintln!(
            "trial {} (seed {}): {}",
            r.trial,
            r.seed,
            r.error.as_deref().unwrap_or("")
        );
    }
    ExitCode::from(res.exit_code() as u8)
}
