//! Round-synchronous CONGEST simulation of connectivity-aware broadcast.
//!
//! The edges of a graph with edge connectivity `lambda` are split at random
//! into `Theta(lambda / log n)` parts, each a spanning subgraph of small
//! diameter. Broadcasting `k` messages then runs one pipelined tree
//! broadcast per part in parallel, for `O((n log n)/delta + (k log n)/lambda)`
//! rounds. On top of that sit approximate all-pairs shortest paths (cluster
//! graph and spanner based) and cut estimation through a sparsifier.

pub mod apsp;
pub mod broadcast;
pub mod cuts;
pub mod experiment;
pub mod graph;
pub mod packing;
pub mod seed;
pub mod sim;
