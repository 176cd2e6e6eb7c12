use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// One Henneberg move. The new vertex always receives index `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum HennebergStep {
    /// Connect the new vertex to `i` and `j`.
    VertexAddition { i: usize, j: usize },
    /// Delete edge `(i, j)` and connect the new vertex to `i`, `j` and `k`.
    EdgeSplitting { i: usize, j: usize, k: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HennebergBuild {
    pub graph: Graph,
    pub log: Vec<HennebergStep>,
}

pub fn henneberg_apply(g: &Graph, step: HennebergStep) -> Result<Graph> {
    let n = g.n_vertices();
    let check = |v: usize| {
        if v >= n {
            Err(Error::InvalidStep(format!("{step:?}: vertex {v} out of range for {n} vertices")))
        } else {
            Ok(())
        }
    };
    let mut out = g.clone();
    match step {
        HennebergStep::VertexAddition { i, j } => {
            check(i)?;
            check(j)?;
            if i == j {
                return Err(Error::InvalidStep(format!("{step:?}: endpoints must differ")));
            }
            let v = out.add_vertex();
            out.add_edge(v, i)?;
            out.add_edge(v, j)?;
        }
        HennebergStep::EdgeSplitting { i, j, k } => {
            check(i)?;
            check(j)?;
            check(k)?;
            if i == j || i == k || j == k {
                return Err(Error::InvalidStep(format!("{step:?}: vertices must be distinct")));
            }
            if !g.has_edge(i, j) {
                return Err(Error::InvalidStep(format!("{step:?}: edge ({i}, {j}) is absent")));
            }
            out.remove_edge(i, j)?;
            let v = out.add_vertex();
            out.add_edge(v, i)?;
            out.add_edge(v, j)?;
            out.add_edge(v, k)?;
        }
    }
    Ok(out)
}

/// Random Henneberg construction from a single edge on two vertices.
///
/// Each step is an edge split with probability `split_probability` (when the
/// graph has a third vertex to use), otherwise a vertex addition.
pub fn henneberg_generate(n: usize, seed: u64, split_probability: f64) -> Result<HennebergBuild> {
    if n < 2 {
        return Err(Error::invalid(format!("Henneberg construction needs n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&split_probability) {
        return Err(Error::invalid(format!(
            "split probability must lie in [0, 1], got {split_probability}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graph = Graph::from_edges(2, [(0, 1)])?;
    let mut log = Vec::with_capacity(n - 2);
    for m in 2..n {
        let split = rng.random::<f64>() < split_probability && m >= 3;
        let step = if split {
            let edges = graph.edge_list();
            let (i, j) = edges[rng.random_range(0..edges.len())];
            let mut k = rng.random_range(0..m - 2);
            for skip in [i, j] {
                if k >= skip {
                    k += 1;
                }
            }
            HennebergStep::EdgeSplitting { i, j, k }
        } else {
            let i = rng.random_range(0..m);
            let mut j = rng.random_range(0..m - 1);
            if j >= i {
                j += 1;
            }
            HennebergStep::VertexAddition { i, j }
        };
        graph = henneberg_apply(&graph, step)?;
        log.push(step);
    }
    Ok(HennebergBuild { graph, log })
}

/// Rebuilds the graph a log describes, starting from the single edge.
pub fn henneberg_replay(log: &[HennebergStep]) -> Result<Graph> {
    log.iter()
        .try_fold(Graph::from_edges(2, [(0, 1)])?, |g, &s| henneberg_apply(&g, s))
}
