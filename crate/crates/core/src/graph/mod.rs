//! Undirected simple graphs and minimal-rigidity (Laman) checks.
//!
//! Vertices are `0..n`. Edges are unordered and stored once per endpoint in
//! sorted adjacency sets, so iteration order is deterministic everywhere.

mod henneberg;
mod pebble;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use henneberg::{henneberg_apply, henneberg_generate, henneberg_replay, HennebergBuild, HennebergStep};
pub use pebble::PebbleGame;

/// Largest vertex count for which [`laman_check`] enumerates every subset.
pub const EXHAUSTIVE_LAMAN_LIMIT: usize = 12;

/// Canonical edge representation, always `(min, max)`.
pub type Edge = (usize, usize);

pub fn canonical(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;

    fn try_from(value: GraphJson) -> Result<Self> {
        Graph::from_edges(value.n, value.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<Graph> for GraphJson {
    fn from(g: Graph) -> Self {
        GraphJson {
            n: g.n_vertices(),
            edges: g.edges().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![BTreeSet::new(); n],
        }
    }

    /// Builds a graph, rejecting self-loops, duplicates and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges in canonical sorted order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.range(i + 1..).map(move |&j| (i, j)))
    }

    pub fn edge_list(&self) -> Vec<Edge> {
        self.edges().collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj.get(i).is_some_and(|nb| nb.contains(&j))
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn common_neighbors(&self, v: usize, w: usize) -> Vec<usize> {
        self.adj[v].intersection(&self.adj[w]).copied().collect()
    }

    pub fn add_vertex(&mut self) -> usize {
        self.adj.push(BTreeSet::new());
        self.adj.len() - 1
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        let n = self.n_vertices();
        if i >= n || j >= n {
            return Err(Error::invalid(format!("edge ({i}, {j}) out of range for {n} vertices")));
        }
        if i == j {
            return Err(Error::invalid(format!("self-loop on vertex {i}")));
        }
        if !self.adj[i].insert(j) {
            return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
        }
        self.adj[j].insert(i);
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if !self.has_edge(i, j) {
            return Err(Error::invalid(format!("edge ({i}, {j}) not present")));
        }
        self.adj[i].remove(&j);
        self.adj[j].remove(&i);
        Ok(())
    }

    /// Removes `v` and its incident edges; vertices above `v` shift down by one.
    pub fn remove_vertex(&self, v: usize) -> Result<Graph> {
        let n = self.n_vertices();
        if v >= n {
            return Err(Error::invalid(format!("vertex {v} out of range for {n} vertices")));
        }
        let shift = |u: usize| if u > v { u - 1 } else { u };
        let mut out = Graph::empty(n - 1);
        for (i, j) in self.edges() {
            if i != v && j != v {
                out.add_edge(shift(i), shift(j))?;
            }
        }
        Ok(out)
    }

    /// Number of edges with both endpoints in the vertex bitmask.
    fn spanned_edges(masks: &[u32], subset: u32) -> u32 {
        let mut twice = 0;
        let mut rest = subset;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            twice += (masks[v] & subset).count_ones();
            rest &= rest - 1;
        }
        twice / 2
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LamanVerdict {
    pub is_laman: bool,
    /// A vertex set `S` spanning more than `2|S| - 3` edges, when one exists.
    pub violating_subset: Option<Vec<usize>>,
}

fn laman_count_holds(g: &Graph) -> bool {
    g.edge_count() + 3 == 2 * g.n_vertices()
}

/// Laman test: `|E| = 2|V| - 3` and no subset of `k >= 2` vertices spans more
/// than `2k - 3` edges. Small graphs are checked by exhaustive enumeration,
/// larger ones with the (2,3) pebble game.
pub fn laman_check(g: &Graph) -> Result<LamanVerdict> {
    if g.n_vertices() <= EXHAUSTIVE_LAMAN_LIMIT {
        laman_check_exhaustive(g)
    } else {
        laman_check_pebble(g)
    }
}

pub fn laman_check_exhaustive(g: &Graph) -> Result<LamanVerdict> {
    let n = g.n_vertices();
    if n < 2 {
        return Err(Error::invalid(format!("Laman check needs at least 2 vertices, got {n}")));
    }
    if n > 24 {
        return Err(Error::invalid(format!(
            "exhaustive Laman check is limited to 24 vertices, got {n}"
        )));
    }
    let masks: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).fold(0u32, |m, u| m | (1 << u)))
        .collect();
    let mut violating = None;
    for subset in 1u32..(1u32 << n) {
        let k = subset.count_ones();
        if k < 2 {
            continue;
        }
        if Graph::spanned_edges(&masks, subset) > 2 * k - 3 {
            violating = Some((0..n).filter(|&v| subset & (1 << v) != 0).collect());
            break;
        }
    }
    Ok(LamanVerdict {
        is_laman: violating.is_none() && laman_count_holds(g),
        violating_subset: violating,
    })
}

pub fn laman_check_pebble(g: &Graph) -> Result<LamanVerdict> {
    let n = g.n_vertices();
    if n < 2 {
        return Err(Error::invalid(format!("Laman check needs at least 2 vertices, got {n}")));
    }
    let mut game = PebbleGame::new(n);
    let mut violating = None;
    for (i, j) in g.edges() {
        if let Err(set) = game.insert(i, j) {
            violating = Some(set);
            break;
        }
    }
    Ok(LamanVerdict {
        is_laman: violating.is_none() && laman_count_holds(g),
        violating_subset: violating,
    })
}
