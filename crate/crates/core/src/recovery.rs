//! Restoring minimal rigidity after a single vertex loss.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bearing::{Configuration, Framework};
use crate::error::{Error, Result};
use crate::graph::{canonical, laman_check, Edge, Graph};

/// Merges `w` into `v`: edges of `w` are reattached to `v`, duplicates and the
/// contracted edge disappear, and vertices above `w` shift down by one.
pub fn contract_edge(g: &Graph, v: usize, w: usize) -> Result<Graph> {
    if !g.has_edge(v, w) {
        return Err(Error::invalid(format!("edge ({v}, {w}) not present")));
    }
    let shift = |u: usize| if u > w { u - 1 } else { u };
    let mut out = Graph::empty(g.n_vertices() - 1);
    for (a, b) in g.edges() {
        let a = if a == w { v } else { a };
        let b = if b == w { v } else { b };
        if a != b && !out.has_edge(shift(a), shift(b)) {
            out.add_edge(shift(a), shift(b))?;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractibilityReason {
    /// Rejected because the endpoints share more than one neighbor.
    PreFilter,
    /// Decided by a Laman check of the contracted graph.
    Verified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contractibility {
    pub contractible: bool,
    pub reason: ContractibilityReason,
}

fn require_laman(g: &Graph) -> Result<()> {
    if !laman_check(g)?.is_laman {
        return Err(Error::invalid("graph is not minimally rigid (fails the Laman check)"));
    }
    Ok(())
}

/// Whether contracting `(v, w)` leaves a minimally rigid graph.
pub fn is_contractible(g: &Graph, v: usize, w: usize) -> Result<Contractibility> {
    require_laman(g)?;
    if !g.has_edge(v, w) {
        return Err(Error::invalid(format!("edge ({v}, {w}) not present")));
    }
    Ok(contractibility_unchecked(g, v, w))
}

fn contractibility_unchecked(g: &Graph, v: usize, w: usize) -> Contractibility {
    if g.common_neighbors(v, w).len() > 1 {
        return Contractibility {
            contractible: false,
            reason: ContractibilityReason::PreFilter,
        };
    }
    let contracted = contract_edge(g, v, w).expect("edge checked by caller");
    let contractible = contracted.n_vertices() >= 2
        && laman_check(&contracted).map(|v| v.is_laman).unwrap_or(false);
    Contractibility {
        contractible,
        reason: ContractibilityReason::Verified,
    }
}

/// The edges a repair adds, plus the neighbor the lost vertex was contracted
/// onto when the repair came from an edge contraction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repair {
    pub contraction_vertex: Option<usize>,
    pub new_edges: Vec<Edge>,
}

/// Removes `lost` and adds `new_edges` (original numbering); returns the
/// graph on the `n - 1` survivors, with indices above `lost` shifted down.
pub fn apply_repair(g: &Graph, lost: usize, new_edges: &[Edge]) -> Result<Graph> {
    let n = g.n_vertices();
    if lost >= n {
        return Err(Error::invalid(format!("vertex {lost} out of range for {n} vertices")));
    }
    let mut h = g.remove_vertex(lost)?;
    let shift = |u: usize| if u > lost { u - 1 } else { u };
    for &(a, b) in new_edges {
        if a == lost || b == lost {
            return Err(Error::invalid(format!("repair edge ({a}, {b}) touches the lost vertex")));
        }
        h.add_edge(shift(a), shift(b))?;
    }
    Ok(h)
}

fn repairs_to_laman(g: &Graph, lost: usize, new_edges: &[Edge]) -> bool {
    apply_repair(g, lost, new_edges)
        .and_then(|h| laman_check(&h))
        .map(|v| v.is_laman)
        .unwrap_or(false)
}

/// Finds `deg(lost) - 2` edges among the neighbors of `lost` that make the
/// surviving graph minimally rigid again. Contractions onto each neighbor
/// are tried in ascending index order before an exhaustive subset search.
pub fn closing_ranks(g: &Graph, lost: usize) -> Result<Repair> {
    require_laman(g)?;
    closing_ranks_unchecked(g, lost)
}

fn closing_ranks_unchecked(g: &Graph, lost: usize) -> Result<Repair> {
    let n = g.n_vertices();
    if lost >= n {
        return Err(Error::invalid(format!("vertex {lost} out of range for {n} vertices")));
    }
    let nbrs: Vec<usize> = g.neighbors(lost).collect();
    let alpha = nbrs.len();
    if alpha < 2 {
        return Err(Error::RecoveryInfeasible {
            lost,
            reason: format!("vertex has degree {alpha} < 2"),
        });
    }
    if n == 2 {
        return Err(Error::RecoveryInfeasible {
            lost,
            reason: "a single surviving vertex cannot be rigid".into(),
        });
    }
    if alpha == 2 {
        return Ok(Repair::default());
    }

    for &q in &nbrs {
        if g.common_neighbors(lost, q).len() > 1 {
            continue;
        }
        let new_edges: Vec<Edge> = nbrs
            .iter()
            .filter(|&&u| u != q && !g.has_edge(q, u))
            .map(|&u| canonical(q, u))
            .collect();
        if new_edges.len() == alpha - 2 && repairs_to_laman(g, lost, &new_edges) {
            return Ok(Repair {
                contraction_vertex: Some(q),
                new_edges,
            });
        }
    }

    let candidates: Vec<Edge> = nbrs
        .iter()
        .enumerate()
        .flat_map(|(a, &u)| nbrs[a + 1..].iter().map(move |&w| (u, w)))
        .filter(|&(u, w)| !g.has_edge(u, w))
        .collect();
    let mut chosen = Vec::with_capacity(alpha - 2);
    if search_subsets(g, lost, &candidates, 0, alpha - 2, &mut chosen) {
        return Ok(Repair {
            contraction_vertex: None,
            new_edges: chosen,
        });
    }
    Err(Error::RecoveryInfeasible {
        lost,
        reason: format!("no set of {} edges among its neighbors restores minimal rigidity", alpha - 2),
    })
}

/// Lexicographic search over `k`-subsets of `candidates`.
fn search_subsets(
    g: &Graph,
    lost: usize,
    candidates: &[Edge],
    start: usize,
    k: usize,
    chosen: &mut Vec<Edge>,
) -> bool {
    if chosen.len() == k {
        return repairs_to_laman(g, lost, chosen);
    }
    let need = k - chosen.len();
    for idx in start..candidates.len() {
        if candidates.len() - idx < need {
            break;
        }
        chosen.push(candidates[idx]);
        if search_subsets(g, lost, candidates, idx + 1, k, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Framework-level repair; only planar frameworks are supported.
pub fn closing_ranks_framework(fw: &Framework, lost: usize) -> Result<Repair> {
    if fw.dim() != 2 {
        return Err(Error::UnsupportedDimension(fw.dim()));
    }
    closing_ranks(fw.graph(), lost)
}

/// Removes `lost` from a planar framework and applies the repair, returning
/// the framework on the survivors (indices above `lost` shift down).
pub fn repair_framework(fw: &Framework, lost: usize) -> Result<(Framework, Repair)> {
    let repair = closing_ranks_framework(fw, lost)?;
    let graph = apply_repair(fw.graph(), lost, &repair.new_edges)?;
    let points: Vec<Vec<f64>> = fw
        .config()
        .points()
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| i != lost)
        .map(|(_, p)| p)
        .collect();
    let config = Configuration::new(fw.dim(), &points)?;
    Ok((Framework::new(graph, config)?, repair))
}

/// Precomputed repairs: entry `(i, j)` tells robot `i` what to do if its
/// neighbor `j` is lost.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecoveryPlan {
    pub entries: BTreeMap<(usize, usize), Repair>,
}

impl RecoveryPlan {
    pub fn get(&self, i: usize, j: usize) -> Option<&Repair> {
        self.entries.get(&(i, j))
    }

    /// The repair for losing `j`, taken from any neighbor's entry.
    pub fn for_loss(&self, j: usize) -> Option<&Repair> {
        self.entries.iter().find(|((_, jj), _)| *jj == j).map(|(_, r)| r)
    }
}

impl Serialize for RecoveryPlan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let keyed: BTreeMap<String, &Repair> = self
            .entries
            .iter()
            .map(|((i, j), r)| (format!("{i}:{j}"), r))
            .collect();
        keyed.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RecoveryPlan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let keyed = BTreeMap::<String, Repair>::deserialize(d)?;
        let mut entries = BTreeMap::new();
        for (key, repair) in keyed {
            let (i, j) = key
                .split_once(':')
                .and_then(|(i, j)| Some((i.parse().ok()?, j.parse().ok()?)))
                .ok_or_else(|| D::Error::custom(format!("plan key {key:?} is not of the form \"i:j\"")))?;
            entries.insert((i, j), repair);
        }
        Ok(RecoveryPlan { entries })
    }
}

/// Computes the repair for every vertex with a neighbor and files it under
/// each `(i, j)` with `j` adjacent to `i`. Vertices are processed in parallel.
pub fn build_recovery_plan(g: &Graph) -> Result<RecoveryPlan> {
    require_laman(g)?;
    let n = g.n_vertices();
    let per_vertex: Vec<(usize, Result<Repair>)> = (0..n)
        .into_par_iter()
        .filter(|&j| g.degree(j) > 0)
        .map(|j| (j, closing_ranks_unchecked(g, j)))
        .collect();
    let mut entries = BTreeMap::new();
    for (j, repair) in per_vertex {
        let repair = match repair {
            Ok(r) => r,
            Err(Error::RecoveryInfeasible { lost, reason }) => {
                let i = g.neighbors(j).next().expect("degree > 0");
                return Err(Error::RecoveryInfeasible {
                    lost,
                    reason: format!("planning entry ({i}, {j}): {reason}"),
                });
            }
            Err(e) => return Err(e),
        };
        for i in g.neighbors(j) {
            entries.insert((i, j), repair.clone());
        }
    }
    Ok(RecoveryPlan { entries })
}
