use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, NodeId, DEFAULT_ID_EXPONENT};
use crate::seed;

/// Restarts allowed for the random regular sampler before giving up.
const REGULAR_RETRIES: usize = 1000;

/// Instance families with known (or oracle-checkable) edge connectivity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    Complete {
        n: usize,
    },
    Hypercube {
        dim: u32,
    },
    /// Node `i` is joined to `i +- 1, ..., i +- s` (mod n).
    Circulant {
        n: usize,
        s: usize,
    },
    RandomRegular {
        n: usize,
        d: usize,
    },
    Path {
        n: usize,
    },
    /// Two `K_k` joined by one bridge.
    Barbell {
        k: usize,
    },
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Complete { n } => write!(f, "complete:{n}"),
            GraphKind::Hypercube { dim } => write!(f, "hypercube:{dim}"),
            GraphKind::Circulant { n, s } => write!(f, "circulant:{n}:{s}"),
            GraphKind::RandomRegular { n, d } => write!(f, "random_regular:{n}:{d}"),
            GraphKind::Path { n } => write!(f, "path:{n}"),
            GraphKind::Barbell { k } => write!(f, "barbell:{k}"),
        }
    }
}

impl FromStr for GraphKind {
    type Err = GraphError;

    /// Parses `kind:param[:param]`, e.g. `random_regular:512:64`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::InvalidParameters(format!("cannot parse generator spec '{s}'"));
        let mut it = s.split(':');
        let kind = it.next().ok_or_else(bad)?;
        let nums: Vec<usize> = it
            .map(|x| x.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let arg = |i: usize| nums.get(i).copied().ok_or_else(bad);
        let kind = match kind {
            "complete" => GraphKind::Complete { n: arg(0)? },
            "hypercube" => GraphKind::Hypercube {
                dim: arg(0)? as u32,
            },
            "circulant" => GraphKind::Circulant {
                n: arg(0)?,
                s: arg(1)?,
            },
            "random_regular" | "random-regular" | "rr" => GraphKind::RandomRegular {
                n: arg(0)?,
                d: arg(1)?,
            },
            "path" => GraphKind::Path { n: arg(0)? },
            "barbell" => GraphKind::Barbell { k: arg(0)? },
            _ => return Err(bad()),
        };
        Ok(kind)
    }
}

pub fn generate(kind: &GraphKind, seed: u64) -> Result<Graph, GraphError> {
    let invalid = |msg: String| Err(GraphError::InvalidParameters(msg));
    match *kind {
        GraphKind::Complete { n } => {
            if n < 2 {
                return invalid(format!("complete graph needs n >= 2, got {n}"));
            }
            Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
        }
        GraphKind::Hypercube { dim } => {
            if dim == 0 || dim > 20 {
                return invalid(format!("hypercube dimension must be in 1..=20, got {dim}"));
            }
            let n = 1usize << dim;
            Graph::from_edges(
                n,
                (0..n).flat_map(|u| {
                    (0..dim)
                        .map(move |b| (u, u ^ (1 << b)))
                        .filter(|&(u, v)| u < v)
                }),
            )
        }
        GraphKind::Circulant { n, s } => {
            if s == 0 || 2 * s >= n {
                return invalid(format!(
                    "circulant needs 1 <= s and 2s < n, got n={n}, s={s}"
                ));
            }
            let mut edges = HashSet::new();
            for u in 0..n {
                for j in 1..=s {
                    let v = (u + j) % n;
                    edges.insert((u.min(v), u.max(v)));
                }
            }
            let mut edges: Vec<_> = edges.into_iter().collect();
            edges.sort_unstable();
            Graph::from_edges(n, edges)
        }
        GraphKind::RandomRegular { n, d } => random_regular(n, d, seed),
        GraphKind::Path { n } => {
            if n < 2 {
                return invalid(format!("path needs n >= 2, got {n}"));
            }
            Graph::from_edges(n, (0..n - 1).map(|u| (u, u + 1)))
        }
        GraphKind::Barbell { k } => {
            if k < 2 {
                return invalid(format!("barbell cliques need k >= 2, got {k}"));
            }
            let clique = move |off: usize| {
                (0..k).flat_map(move |u| (u + 1..k).map(move |v| (u + off, v + off)))
            };
            Graph::from_edges(
                2 * k,
                clique(0)
                    .chain(clique(k))
                    .chain(std::iter::once((k - 1, k))),
            )
        }
    }
}

/// Pairing-model sampler with pair-level rejection of loops and repeated
/// pairs; restarts when the leftover points admit no legal pair or when the
/// result is disconnected.
fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GraphError> {
    if d == 0 || d >= n || !(n * d).is_multiple_of(2) {
        return Err(GraphError::InvalidParameters(format!(
            "random regular graph needs 1 <= d < n and n*d even, got n={n}, d={d}"
        )));
    }
    let mut rng = seed::rng(seed, 0x7e6a1a7);
    for _ in 0..REGULAR_RETRIES {
        if let Some(edges) = try_pairing(n, d, &mut rng) {
            let g = Graph::from_edges(n, edges)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
    }
    Err(GraphError::Generation(format!(
        "no connected simple {d}-regular graph on {n} nodes after {REGULAR_RETRIES} attempts"
    )))
}

fn try_pairing(n: usize, d: usize, rng: &mut impl Rng) -> Option<Vec<(NodeId, NodeId)>> {
    let mut points: Vec<NodeId> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    points.shuffle(rng);
    let mut adj: Vec<HashSet<NodeId>> = vec![HashSet::with_capacity(d); n];
    let mut edges = Vec::with_capacity(n * d / 2);
    let mut misses = 0usize;
    while !points.is_empty() {
        let i = rng.gen_range(0..points.len());
        let j = rng.gen_range(0..points.len());
        let (u, v) = (points[i], points[j]);
        if i != j && u != v && !adj[u].contains(&v) {
            adj[u].insert(v);
            adj[v].insert(u);
            edges.push((u.min(v), u.max(v)));
            let (hi, lo) = (i.max(j), i.min(j));
            points.swap_remove(hi);
            points.swap_remove(lo);
            misses = 0;
            continue;
        }
        misses += 1;
        if misses > 64 {
            let mut open: Vec<NodeId> = points.clone();
            open.sort_unstable();
            open.dedup();
            let legal = open
                .iter()
                .enumerate()
                .any(|(a, &x)| open[a + 1..].iter().any(|&y| !adj[x].contains(&y)));
            if !legal {
                return None;
            }
            misses = 0;
        }
    }
    Some(edges)
}

/// Assigns independent uniform weights in `[1, max_weight]`.
pub fn with_random_weights(g: &Graph, max_weight: u64, seed: u64) -> Result<Graph, GraphError> {
    let cap = (g.n() as u64).saturating_pow(DEFAULT_ID_EXPONENT);
    if max_weight == 0 || max_weight > cap.max(1) {
        return Err(GraphError::InvalidParameters(format!(
            "max weight must be in [1, n^{DEFAULT_ID_EXPONENT}] = [1, {cap}], got {max_weight}"
        )));
    }
    let mut rng = seed::rng(seed, 0x3e1647);
    let weights: Vec<u64> = (0..g.m()).map(|_| rng.gen_range(1..=max_weight)).collect();
    let mut h = g.clone();
    h.set_weights(&weights)?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{exact_diameter, exact_edge_connectivity, GraphStats};

    #[test]
    fn small_families() {
        let k4 = generate(&GraphKind::Complete { n: 4 }, 0).unwrap();
        assert_eq!(k4.m(), 6);
        let p3 = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
        let pairs: Vec<_> = p3.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        let q3 = generate(&GraphKind::Hypercube { dim: 3 }, 0).unwrap();
        assert_eq!((q3.n(), q3.m()), (8, 12));
        assert!((0..8).all(|v| q3.degree(v) == 3));
        let bb = generate(&GraphKind::Barbell { k: 4 }, 0).unwrap();
        assert_eq!((bb.n(), bb.m()), (8, 13));
        let c = generate(&GraphKind::Circulant { n: 10, s: 2 }, 0).unwrap();
        assert!((0..10).all(|v| c.degree(v) == 4));
    }

    #[test]
    fn invalid_parameters() {
        for kind in [
            GraphKind::Complete { n: 1 },
            GraphKind::RandomRegular { n: 5, d: 3 },
            GraphKind::RandomRegular { n: 4, d: 4 },
            GraphKind::Circulant { n: 6, s: 3 },
            GraphKind::Path { n: 1 },
            GraphKind::Barbell { k: 1 },
            GraphKind::Hypercube { dim: 0 },
        ] {
            assert!(matches!(
                generate(&kind, 0),
                Err(GraphError::InvalidParameters(_))
            ));
        }
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "complete:8",
            "hypercube:3",
            "circulant:10:2",
            "random_regular:16:3",
            "path:3",
            "barbell:4",
        ] {
            let k: GraphKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("complete".parse::<GraphKind>().is_err());
        assert!("torus:3".parse::<GraphKind>().is_err());
    }

    #[test]
    fn random_regular_is_regular_simple_connected() {
        for (n, d) in [(16, 3), (64, 8), (256, 32), (256, 128), (512, 64)] {
            let g = generate(&GraphKind::RandomRegular { n, d }, 11).unwrap();
            assert!((0..n).all(|v| g.degree(v) == d), "n={n} d={d}");
            assert_eq!(g.m(), n * d / 2);
            assert!(g.is_connected());
        }
    }

    #[test]
    fn generator_outputs_respect_degree_and_diameter_bounds() {
        let kinds = [
            GraphKind::Complete { n: 9 },
            GraphKind::Hypercube { dim: 4 },
            GraphKind::Circulant { n: 15, s: 3 },
            GraphKind::RandomRegular { n: 20, d: 4 },
            GraphKind::Path { n: 7 },
            GraphKind::Barbell { k: 5 },
        ];
        for kind in &kinds {
            for seed in 0..3 {
                let g = generate(kind, seed).unwrap();
                let lambda = exact_edge_connectivity(&g);
                assert!(lambda >= 1 && lambda <= g.min_degree(), "{kind}");
                let d = exact_diameter(&g).unwrap() as f64;
                assert!(
                    d <= GraphStats::diameter_bound(g.n(), g.min_degree()),
                    "{kind}"
                );
            }
        }
    }

    #[test]
    fn random_regular_is_d_connected_whp() {
        // n >= 4d; d-regular random graphs are d-edge-connected whp.
        let (n, d) = (24, 4);
        let hits = (0..100)
            .filter(|&s| {
                let g = generate(&GraphKind::RandomRegular { n, d }, s).unwrap();
                exact_edge_connectivity(&g) == d
            })
            .count();
        assert!(hits >= 95, "only {hits}/100 seeds were {d}-edge-connected");
    }

    #[test]
    fn weights_are_bounded() {
        let g = generate(&GraphKind::Complete { n: 6 }, 0).unwrap();
        let h = with_random_weights(&g, 100, 3).unwrap();
        assert!(h.is_weighted());
        assert!(h.edges().iter().all(|e| (1..=100).contains(&e.w)));
        assert!(with_random_weights(&g, 0, 3).is_err());
        assert!(with_random_weights(&g, 217, 3).is_err());
    }
}
