//! Multi-trial experiment runner shared by the command-line tool and the
//! acceptance suite.
//!
//! An [`ExperimentConfig`] names a graph source, a pipeline with its
//! parameters, a base seed and a trial count. Trial `i` runs with seed
//! `base + i` (graph generation included), trials run in parallel, and the
//! records come back sorted by trial index, so the JSON output depends only
//! on the configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::apsp::{self, ApspOptions, Stretch};
use crate::broadcast::{self, BroadcastInstance, BroadcastOptions, Placement};
use crate::cuts::{self, CutOptions};
use crate::graph::{
    exact_diameter, exact_edge_connectivity, generate, oracle_apsp, parse_graph,
    with_random_weights, write_graph, Graph, GraphError, GraphKind,
};
use crate::packing::{self, build_trees, EdgePartition, TreePacking};
use crate::seed;
use crate::sim::SimConfig;

/// Where the input graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    File(PathBuf),
    /// Generated per trial with the trial seed.
    Generate(GraphKind),
}

impl GraphSource {
    /// An existing file wins; otherwise the text must be a generator spec.
    pub fn parse(text: &str) -> Result<Self, String> {
        let path = PathBuf::from(text);
        if path.exists() {
            return Ok(GraphSource::File(path));
        }
        text.parse::<GraphKind>()
            .map(GraphSource::Generate)
            .map_err(|e| {
                format!("'{text}' is neither a readable graph file nor a generator spec ({e})")
            })
    }

    pub fn load(&self, seed: u64) -> Result<Graph, GraphError> {
        match self {
            GraphSource::File(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| GraphError::Io(format!("{}: {e}", p.display())))?;
                parse_graph(&text)
            }
            GraphSource::Generate(kind) => generate(kind, seed),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            GraphSource::File(p) => p.display().to_string(),
            GraphSource::Generate(k) => k.to_string(),
        }
    }
}

/// How `broadcast` obtains its packing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackingMode {
    /// Exponential search on the edge connectivity.
    Auto,
    /// One part: the single-tree baseline.
    #[serde(alias = "baseline")]
    Single,
    /// Partition with the exact edge connectivity.
    Exact,
}

impl std::str::FromStr for PackingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(PackingMode::Auto),
            "single" | "baseline" => Ok(PackingMode::Single),
            "exact" => Ok(PackingMode::Exact),
            _ => Err(format!(
                "unknown packing mode '{s}' (auto, single or baseline, exact)"
            )),
        }
    }
}

/// Pipeline and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Gen {
        /// Write the trial-0 graph here.
        out: Option<PathBuf>,
    },
    Oracle,
    Pack {
        c: f64,
        bound_const: f64,
        /// Use this edge connectivity instead of searching.
        lambda: Option<usize>,
    },
    Broadcast {
        k: usize,
        placement: Placement,
        packing: PackingMode,
        c: f64,
        bound_const: f64,
        content_bits: Option<u32>,
        /// Also run the single-tree baseline and report the speedup.
        baseline: bool,
    },
    ApspUnweighted {
        c_cluster: f64,
        c_const: f64,
        bound_const: f64,
    },
    ApspWeighted {
        stretch: Stretch,
        /// Random weights in `[1, w]`; the graph's own weights when absent.
        weight_max: Option<u64>,
        c_const: f64,
        bound_const: f64,
    },
    Cuts {
        epsilon: f64,
        c_sparsifier: f64,
        c_const: f64,
        bound_const: f64,
        /// One subset per entry; every proper cut when absent (n <= 20).
        queries: Option<Vec<Vec<usize>>>,
        frac_bits: Option<u32>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen { .. } => "gen",
            Command::Oracle => "oracle",
            Command::Pack { .. } => "pack",
            Command::Broadcast { .. } => "broadcast",
            Command::ApspUnweighted { .. } => "apsp-unweighted",
            Command::ApspWeighted { .. } => "apsp-weighted",
            Command::Cuts { .. } => "cuts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    #[serde(flatten)]
    pub command: Command,
    pub seed: u64,
    pub trials: usize,
    #[serde(default)]
    pub sim: SimConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("--trials must be at least 1".into());
        }
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {x}"))
            }
        };
        match &self.command {
            Command::Pack { c, bound_const, .. } => {
                positive("--c-const", *c)?;
                positive("--bound-const", *bound_const)
            }
            Command::Broadcast {
                c,
                bound_const,
                content_bits,
                ..
            } => {
                positive("--c-const", *c)?;
                positive("--bound-const", *bound_const)?;
                match content_bits {
                    Some(0) | Some(65..) => Err("--content-bits must be in 1..=64".into()),
                    _ => Ok(()),
                }
            }
            Command::ApspUnweighted {
                c_cluster,
                c_const,
                bound_const,
            } => {
                positive("--c-cluster", *c_cluster)?;
                positive("--c-const", *c_const)?;
                positive("--bound-const", *bound_const)
            }
            Command::ApspWeighted {
                stretch,
                weight_max,
                c_const,
                bound_const,
            } => {
                if *stretch == Stretch::Fixed(0) {
                    return Err("--stretch-r must be at least 1".into());
                }
                if *weight_max == Some(0) {
                    return Err("--weight-max must be at least 1".into());
                }
                positive("--c-const", *c_const)?;
                positive("--bound-const", *bound_const)
            }
            Command::Cuts {
                epsilon,
                c_sparsifier,
                c_const,
                bound_const,
                ..
            } => {
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(format!("--epsilon must be in (0, 1), got {epsilon}"));
                }
                positive("--c-sparsifier", *c_sparsifier)?;
                positive("--c-const", *c_const)?;
                positive("--bound-const", *bound_const)
            }
            Command::Gen { .. } | Command::Oracle => Ok(()),
        }
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// The pipeline ran to completion.
    pub ok: bool,
    /// Every checked property held (correctness, bounds, error targets).
    pub passed: bool,
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
    pub details: Value,
}

/// Means and maxima of every metric over the trials that ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub command: String,
    pub graph: String,
    pub trials: usize,
    pub failures: usize,
    pub breaches: usize,
    pub mean: BTreeMap<String, f64>,
    pub max: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

impl ExperimentResult {
    /// Process exit status: 0 all good, 2 some trial failed to run, 3 some
    /// trial breached a checked property.
    pub fn exit_code(&self) -> i32 {
        if self.aggregate.failures > 0 {
            2
        } else if self.aggregate.breaches > 0 {
            3
        } else {
            0
        }
    }

    pub fn records_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialise") + "\n"
    }

    /// Header and one row; columns are `mean_<metric>` and `max_<metric>`.
    pub fn aggregate_csv(&self) -> String {
        let a = &self.aggregate;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "command".to_string(),
            "graph".into(),
            "trials".into(),
            "failures".into(),
            "breaches".into(),
        ];
        let mut row = vec![
            a.command.clone(),
            a.graph.clone(),
            a.trials.to_string(),
            a.failures.to_string(),
            a.breaches.to_string(),
        ];
        for (k, v) in &a.mean {
            header.push(format!("mean_{k}"));
            row.push(format!("{v}"));
        }
        for (k, v) in &a.max {
            header.push(format!("max_{k}"));
            row.push(format!("{v}"));
        }
        w.write_record(&header).expect("in-memory write");
        w.write_record(&row).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// One human-readable line.
    pub fn summary(&self) -> String {
        let a = &self.aggregate;
        let ok = a.trials - a.failures - a.breaches;
        let mut s = format!(
            "{} on {}: {ok}/{} trials passed",
            a.command, a.graph, a.trials
        );
        if let Some(r) = a.mean.get("rounds") {
            s += &format!(", mean rounds {r:.1}");
        }
        if let Some(lb) = a.mean.get("lower_bound") {
            s += &format!(", lower bound ceil(k/lambda) {lb:.1}");
        }
        if let Some(f) = a.mean.get("formula") {
            s += &format!(", formula (n ln n)/delta + (k ln n)/lambda = {f:.1}");
        }
        if a.failures > 0 {
            s += &format!(", {} failed to run", a.failures);
        }
        if a.breaches > 0 {
            s += &format!(", {} breached a check", a.breaches);
        }
        s
    }
}

struct Trial {
    passed: bool,
    metrics: BTreeMap<String, f64>,
    details: Value,
}

fn metrics<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Runs every trial and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, String> {
    cfg.validate()?;
    let mut records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            match run_trial(cfg, seed) {
                Ok(t) => TrialRecord {
                    trial: i,
                    seed,
                    ok: true,
                    passed: t.passed,
                    error: None,
                    metrics: t.metrics,
                    details: t.details,
                },
                Err(e) => TrialRecord {
                    trial: i,
                    seed,
                    ok: false,
                    passed: false,
                    error: Some(e),
                    metrics: BTreeMap::new(),
                    details: Value::Null,
                },
            }
        })
        .collect();
    records.sort_by_key(|r| r.trial);
    let aggregate = aggregate(cfg, &records);
    Ok(ExperimentResult { records, aggregate })
}

fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Aggregate {
    let mut sum: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut max: BTreeMap<String, f64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.ok) {
        for (k, &v) in &r.metrics {
            let e = sum.entry(k.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
            let m = max.entry(k.clone()).or_insert(v);
            *m = m.max(v);
        }
    }
    Aggregate {
        command: cfg.command.name().to_string(),
        graph: cfg.graph.describe(),
        trials: records.len(),
        failures: records.iter().filter(|r| !r.ok).count(),
        breaches: records.iter().filter(|r| r.ok && !r.passed).count(),
        mean: sum
            .into_iter()
            .map(|(k, (s, c))| (k, s / c as f64))
            .collect(),
        max,
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn run_trial(cfg: &ExperimentConfig, seed: u64) -> Result<Trial, String> {
    let g = cfg.graph.load(seed).map_err(err)?;
    match &cfg.command {
        Command::Gen { out } => trial_gen(&g, out.as_ref(), seed == cfg.seed),
        Command::Oracle => Ok(trial_oracle(&g)),
        Command::Pack {
            c,
            bound_const,
            lambda,
        } => trial_pack(&g, *c, *bound_const, *lambda, cfg.sim, seed),
        Command::Broadcast {
            k,
            placement,
            packing,
            c,
            bound_const,
            content_bits,
            baseline,
        } => trial_broadcast(
            &g,
            *k,
            *placement,
            *packing,
            (*c, *bound_const),
            content_bits.unwrap_or_else(|| crate::sim::log2_ceil(g.n()).max(1)),
            *baseline,
            cfg.sim,
            seed,
        ),
        Command::ApspUnweighted {
            c_cluster,
            c_const,
            bound_const,
        } => {
            let opts = ApspOptions {
                sim: cfg.sim,
                bound_const: *bound_const,
                ..ApspOptions::default()
            };
            trial_apsp_unweighted(&g, *c_cluster, *c_const, &opts, seed)
        }
        Command::ApspWeighted {
            stretch,
            weight_max,
            c_const,
            bound_const,
        } => {
            let g = match weight_max {
                Some(w) => with_random_weights(&g, *w, seed::derive(seed, 0x3e16)).map_err(err)?,
                None => g,
            };
            let opts = ApspOptions {
                sim: cfg.sim,
                bound_const: *bound_const,
                ..ApspOptions::default()
            };
            trial_apsp_weighted(&g, *stretch, *c_const, &opts, seed)
        }
        Command::Cuts {
            epsilon,
            c_sparsifier,
            c_const,
            bound_const,
            queries,
            frac_bits,
        } => trial_cuts(
            &g,
            (*epsilon, *c_sparsifier),
            (*c_const, *bound_const),
            queries.as_deref(),
            *frac_bits,
            cfg.sim,
            seed,
        ),
    }
}

fn trial_gen(g: &Graph, out: Option<&PathBuf>, first: bool) -> Result<Trial, String> {
    if let (Some(path), true) = (out, first) {
        std::fs::write(path, write_graph(g)).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let stats = g.stats();
    Ok(Trial {
        passed: true,
        metrics: metrics([
            ("n", g.n() as f64),
            ("m", g.m() as f64),
            ("min_degree", stats.min_degree as f64),
            ("edge_connectivity", stats.edge_connectivity as f64),
        ]),
        details: json!({ "stats": stats }),
    })
}

fn trial_oracle(g: &Graph) -> Trial {
    let stats = g.stats();
    let mut m = metrics([
        ("n", g.n() as f64),
        ("m", g.m() as f64),
        ("min_degree", stats.min_degree as f64),
        ("max_degree", g.max_degree() as f64),
        ("edge_connectivity", stats.edge_connectivity as f64),
    ]);
    if let Some(d) = stats.diameter {
        m.insert("diameter".into(), d as f64);
    }
    Trial {
        passed: true,
        metrics: m,
        details: json!({ "stats": stats, "connected": stats.diameter.is_some() }),
    }
}

fn trial_pack(
    g: &Graph,
    c: f64,
    bound_const: f64,
    lambda: Option<usize>,
    sim: SimConfig,
    seed: u64,
) -> Result<Trial, String> {
    let (lambda_guess, partition, guesses) = match lambda {
        Some(l) => (l, packing::partition(g, l.max(1), c, seed), Vec::new()),
        None => {
            let s = packing::exponential_search(g, c, bound_const, seed).map_err(err)?;
            (s.lambda_guess, s.partition, s.guesses)
        }
    };
    let checks = packing::verify_packing(g, &partition, bound_const).map_err(err)?;
    let all_ok = checks.iter().all(|p| p.within_bound);
    let mut m = metrics([
        ("lambda_guess", lambda_guess as f64),
        ("parts", partition.len() as f64),
        (
            "max_part_diameter",
            checks.iter().filter_map(|p| p.diameter).max().unwrap_or(0) as f64,
        ),
        (
            "parts_within_bound",
            checks.iter().filter(|p| p.within_bound).count() as f64,
        ),
    ]);
    let mut tree_heights = Vec::new();
    if all_ok {
        let tp = build_trees(g, &partition, sim, seed).map_err(err)?;
        m.insert("rounds".into(), tp.rounds as f64);
        tree_heights = tp.trees.iter().map(|t| t.height()).collect();
    }
    Ok(Trial {
        passed: all_ok,
        metrics: m,
        details: json!({
            "guesses": guesses,
            "parts": checks,
            "part_sizes": partition.parts.iter().map(Vec::len).collect::<Vec<_>>(),
            "tree_heights": tree_heights,
        }),
    })
}

fn packing_by_mode(
    g: &Graph,
    mode: PackingMode,
    (c, bound_const): (f64, f64),
    sim: SimConfig,
    seed: u64,
) -> Result<TreePacking, String> {
    let part = match mode {
        PackingMode::Auto => {
            packing::exponential_search(g, c, bound_const, seed)
                .map_err(err)?
                .partition
        }
        PackingMode::Single => EdgePartition::single(g),
        PackingMode::Exact => packing::partition(g, exact_edge_connectivity(g).max(1), c, seed),
    };
    build_trees(g, &part, sim, seed::derive(seed, 0x7ee5)).map_err(err)
}

#[allow(clippy::too_many_arguments)]
fn trial_broadcast(
    g: &Graph,
    k: usize,
    placement: Placement,
    mode: PackingMode,
    consts: (f64, f64),
    content_bits: u32,
    baseline: bool,
    sim: SimConfig,
    seed: u64,
) -> Result<Trial, String> {
    let inst = BroadcastInstance::generate(g, k, placement, content_bits, seed);
    let lambda = exact_edge_connectivity(g);
    let opts = BroadcastOptions {
        sim,
        lambda: Some(lambda),
    };
    let tp = packing_by_mode(g, mode, consts, sim, seed)?;
    let out = broadcast::k_broadcast(g, &inst, &tp, &opts, seed).map_err(err)?;
    let r = &out.report;
    let diameter = exact_diameter(g).unwrap_or(0);
    let lower_ok = r.respects_lower_bound() && r.rounds_used >= diameter;
    let mut m = metrics([
        ("rounds", r.rounds_used as f64),
        ("max_congestion", r.max_edge_congestion as f64),
        ("parts", tp.len() as f64),
        ("lower_bound", r.reference_lower_bound.unwrap_or(0) as f64),
        ("formula", r.reference_upper_formula.unwrap_or(0.0)),
        ("correct", f64::from(u8::from(r.correctness))),
    ]);
    let mut base_report = None;
    if baseline {
        let b =
            broadcast::basic_broadcast(g, &inst, g.min_label_node(), &opts, seed).map_err(err)?;
        m.insert("baseline_rounds".into(), b.report.rounds_used as f64);
        m.insert(
            "speedup".into(),
            b.report.rounds_used as f64 / r.rounds_used.max(1) as f64,
        );
        base_report = Some(b.report);
    }
    Ok(Trial {
        passed: r.correctness && lower_ok,
        metrics: m,
        details: json!({
            "k": k,
            "lambda": lambda,
            "diameter": diameter,
            "report": r,
            "part_loads": out.part_loads,
            "baseline": base_report,
        }),
    })
}

fn trial_apsp_unweighted(
    g: &Graph,
    c_cluster: f64,
    c_const: f64,
    opts: &ApspOptions,
    seed: u64,
) -> Result<Trial, String> {
    let out = apsp::estimate_unweighted_apsp(g, c_cluster, c_const, seed, opts).map_err(err)?;
    let check = out.estimate.compare(&oracle_apsp(g, false));
    let r = &out.report;
    Ok(Trial {
        passed: check.holds() && r.correctness && out.cluster.matches_oracle,
        metrics: metrics([
            ("rounds", r.rounds_used as f64),
            ("max_congestion", r.max_edge_congestion as f64),
            ("centers", out.clusters.center_count() as f64),
            ("collisions", out.cluster.collisions as f64),
            ("worst_alpha", check.worst_ratio),
            ("worst_beta", check.worst_additive),
            ("violations", (check.below_truth + check.above_bound) as f64),
            ("attempts", out.attempts as f64),
            ("parts", out.parts as f64),
        ]),
        details: json!({
            "claimed": { "alpha": out.estimate.alpha, "beta": out.estimate.beta },
            "check": check,
            "cluster_graph_exact": out.cluster.matches_oracle,
            "virtual_bfs_rounds": out.cluster.virtual_rounds,
            "report": r,
        }),
    })
}

fn trial_apsp_weighted(
    g: &Graph,
    stretch: Stretch,
    c_const: f64,
    opts: &ApspOptions,
    seed: u64,
) -> Result<Trial, String> {
    let out = apsp::estimate_weighted_apsp(g, stretch, c_const, seed, opts).map_err(err)?;
    let check = out.estimate.compare(&oracle_apsp(g, true));
    let r = &out.report;
    Ok(Trial {
        passed: check.holds() && r.correctness,
        metrics: metrics([
            ("rounds", r.rounds_used as f64),
            ("max_congestion", r.max_edge_congestion as f64),
            ("r", out.spanner.r as f64),
            ("spanner_edges", out.spanner.len() as f64),
            ("worst_alpha", check.worst_ratio),
            ("violations", (check.below_truth + check.above_bound) as f64),
            ("parts", out.parts as f64),
        ]),
        details: json!({
            "claimed": { "alpha": out.estimate.alpha, "beta": out.estimate.beta },
            "check": check,
            "report": r,
        }),
    })
}

fn trial_cuts(
    g: &Graph,
    (epsilon, c_s): (f64, f64),
    (c, bound_const): (f64, f64),
    queries: Option<&[Vec<usize>]>,
    frac_bits: Option<u32>,
    sim: SimConfig,
    seed: u64,
) -> Result<Trial, String> {
    let lambda = exact_edge_connectivity(g);
    let sp = cuts::uniform_cut_sparsifier(g, epsilon, c_s, lambda, seed).map_err(err)?;
    let tp = packing_by_mode(g, PackingMode::Auto, (c, bound_const), sim, seed)?;
    let queries = match queries {
        Some(q) => q.to_vec(),
        None => cuts::all_cut_queries(g).map_err(err)?,
    };
    let opts = CutOptions {
        sim,
        frac_bits,
        lambda: Some(lambda),
    };
    let out = cuts::broadcast_and_estimate_cuts(g, &sp, &tp, &queries, &opts, seed).map_err(err)?;
    let worst = out
        .answers
        .iter()
        .map(|a| a.relative_error())
        .fold(0.0f64, f64::max);
    let r = &out.report;
    Ok(Trial {
        passed: worst <= epsilon && r.correctness,
        metrics: metrics([
            ("rounds", r.rounds_used as f64),
            ("m_tilde", sp.len() as f64),
            ("q", sp.q),
            ("queries", out.answers.len() as f64),
            ("max_relative_error", worst),
            ("formula", r.reference_upper_formula.unwrap_or(0.0)),
        ]),
        details: json!({
            "lambda": lambda,
            "quantization": out.quantization,
            "consistent": out.consistent,
            "report": r,
            "answers": if out.answers.len() <= 64 { json!(out.answers) } else { Value::Null },
        }),
    })
}
