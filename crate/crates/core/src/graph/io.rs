//! Plain-text graph format:
//!
//! ```text
//! # comment
//! n m [weighted]
//! u v [w]
//! ```
//!
//! Nodes are 0-indexed; weights default to 1.

use std::fmt::Write as _;

use super::{Graph, GraphError};

pub fn parse_graph(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(GraphError::Parse {
        line: 0,
        msg: "missing header".into(),
    })?;
    let perr = |line: usize, msg: String| GraphError::Parse { line, msg };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let weighted = match fields.get(2) {
        None => false,
        Some(&"weighted") => true,
        Some(other) => return Err(perr(hline, format!("unexpected header token '{other}'"))),
    };
    if fields.len() < 2 || fields.len() > 3 {
        return Err(perr(hline, "header must be 'n m [weighted]'".into()));
    }
    let num = |s: &str, line: usize| {
        s.parse::<u64>()
            .map_err(|_| perr(line, format!("'{s}' is not a non-negative integer")))
    };
    let n = num(fields[0], hline)? as usize;
    let m = num(fields[1], hline)? as usize;

    let mut edges = Vec::with_capacity(m);
    for (line, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        let (u, v, w) = match f.len() {
            2 => (num(f[0], line)?, num(f[1], line)?, 1),
            3 => (num(f[0], line)?, num(f[1], line)?, num(f[2], line)?),
            _ => return Err(perr(line, "expected 'u v' or 'u v w'".into())),
        };
        if !weighted && w != 1 {
            return Err(perr(line, "weight given for an unweighted graph".into()));
        }
        edges.push((u as usize, v as usize, w));
    }
    if edges.len() != m {
        return Err(perr(
            hline,
            format!("header declares {m} edges but {} were given", edges.len()),
        ));
    }
    Graph::from_weighted_edges(n, edges, weighted)
}

pub fn write_graph(g: &Graph) -> String {
    let mut out = String::new();
    if g.is_weighted() {
        let _ = writeln!(out, "{} {} weighted", g.n(), g.m());
        for e in g.edges() {
            let _ = writeln!(out, "{} {} {}", e.u, e.v, e.w);
        }
    } else {
        let _ = writeln!(out, "{} {}", g.n(), g.m());
        for e in g.edges() {
            let _ = writeln!(out, "{} {}", e.u, e.v);
        }
    }
    out
}
