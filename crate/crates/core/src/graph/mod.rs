//! Immutable sparse directed graphs and the decompositions used to pick a
//! working node set: largest strongly connected component and forward
//! reachability from a seed set.

mod generate;
mod io;
mod scc;

use std::collections::HashMap;

pub use generate::{random_digraph, random_strongly_connected};
pub use io::{load_edge_list, parse_edge_list, write_edge_list, LoadOptions};
pub use scc::strongly_connected_components;

use crate::{Error, Result};

/// Directed graph in compressed sparse row form, with both out- and in-adjacency.
///
/// Neighbor lists are sorted. There are no self-loops and no parallel edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
}

impl DirectedGraph {
    /// Builds a graph on `n` nodes. Self-loops are dropped and parallel edges
    /// collapsed; endpoints must be `< n`.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs = Vec::new();
        for (u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if u != v {
                pairs.push((u, v));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_unique(n, &pairs))
    }

    fn from_sorted_unique(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(u, v) in pairs {
            out_offsets[u + 1] += 1;
            in_offsets[v + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_targets = pairs.iter().map(|&(_, v)| v).collect();
        // Pairs are sorted by source, so each in-list is filled in increasing source order.
        let mut in_sources = vec![0usize; pairs.len()];
        let mut cursor = in_offsets.clone();
        for &(u, v) in pairs {
            in_sources[cursor[v]] = u;
            cursor[v] += 1;
        }
        Self {
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
        }
    }

    pub fn node_count(&self) -> usize {
        self.out_offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    pub fn in_neighbors(&self, j: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[j]..self.in_offsets[j + 1]]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_offsets[i + 1] - self.out_offsets[i]
    }

    pub fn in_degree(&self, j: usize) -> usize {
        self.in_offsets[j + 1] - self.in_offsets[j]
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.node_count()).map(|i| self.out_degree(i)).collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        (0..self.node_count()).map(|j| self.in_degree(j)).collect()
    }

    pub fn max_out_degree(&self) -> usize {
        (0..self.node_count())
            .map(|i| self.out_degree(i))
            .max()
            .unwrap_or(0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out_neighbors(i).binary_search(&j).is_ok()
    }

    /// Position of `j` within `out_neighbors(i)`, i.e. the CSR edge slot.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.out_neighbors(i)
            .binary_search(&j)
            .ok()
            .map(|k| self.out_offsets[i] + k)
    }

    /// All edges in (source, target) lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |i| self.out_neighbors(i).iter().map(move |&j| (i, j)))
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node,
                n: self.node_count(),
            })
        }
    }

    /// Subgraph induced on `nodes`. New indices follow increasing old index,
    /// so any ordering by original ID carries over.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> (DirectedGraph, NodeMap) {
        let mut kept: Vec<usize> = nodes.to_vec();
        kept.sort_unstable();
        kept.dedup();
        let mut new_index = vec![usize::MAX; self.node_count()];
        for (k, &old) in kept.iter().enumerate() {
            new_index[old] = k;
        }
        let mut pairs = Vec::new();
        for &old in &kept {
            for &t in self.out_neighbors(old) {
                if new_index[t] != usize::MAX {
                    pairs.push((new_index[old], new_index[t]));
                }
            }
        }
        // Old adjacency is sorted and the relabeling is monotone, so pairs stay sorted.
        let sub = Self::from_sorted_unique(kept.len(), &pairs);
        let map = NodeMap::from_ids(kept.iter().map(|&i| i as u64).collect());
        (sub, map)
    }

    /// Forward and backward BFS from node 0 both reach every node.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return false;
        }
        let all = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = stack.pop() {
                let next = if forward {
                    self.out_neighbors(u)
                } else {
                    self.in_neighbors(u)
                };
                for &v in next {
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        stack.push(v);
                    }
                }
            }
            count == n
        };
        all(true) && all(false)
    }
}

/// Bijection between external node IDs and dense indices `0..n`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeMap {
    forward: HashMap<u64, usize>,
    backward: Vec<u64>,
}

impl NodeMap {
    /// `ids[k]` is the external ID of index `k`. IDs must be distinct.
    pub fn from_ids(ids: Vec<u64>) -> Self {
        let forward = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        Self {
            forward,
            backward: ids,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_ids((0..n as u64).collect())
    }

    pub fn len(&self) -> usize {
        self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backward.is_empty()
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.forward.get(&id).copied()
    }

    pub fn id_of(&self, index: usize) -> u64 {
        self.backward[index]
    }

    pub fn ids(&self) -> &[u64] {
        &self.backward
    }

    /// Chains `self` (external ID to index of an outer graph) with `inner`
    /// (outer index to index of a derived subgraph).
    pub fn then(&self, inner: &NodeMap) -> NodeMap {
        NodeMap::from_ids(
            inner
                .backward
                .iter()
                .map(|&outer| self.backward[outer as usize])
                .collect(),
        )
    }
}

/// Induced subgraph on the largest strongly connected component.
///
/// Equal-size components are ordered by their smallest node index; graphs
/// loaded from disk are indexed in increasing original-ID order, so this is
/// the smallest-original-ID tie-break.
pub fn largest_scc(g: &DirectedGraph) -> (DirectedGraph, NodeMap) {
    let comps = strongly_connected_components(g);
    let mut best: Option<&Vec<usize>> = None;
    for comp in &comps {
        best = match best {
            None => Some(comp),
            Some(b) => {
                let (bmin, cmin) = (b.iter().min(), comp.iter().min());
                if comp.len() > b.len() || (comp.len() == b.len() && cmin < bmin) {
                    Some(comp)
                } else {
                    Some(b)
                }
            }
        };
    }
    match best {
        Some(nodes) => g.induced_subgraph(nodes),
        None => g.induced_subgraph(&[]),
    }
}

/// Induced subgraph on everything reachable from `seeds` along directed edges.
pub fn reachable_set(g: &DirectedGraph, seeds: &[usize]) -> Result<(DirectedGraph, NodeMap)> {
    if seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let reached = reachable_nodes(g, seeds)?;
    Ok(g.induced_subgraph(&reached))
}

/// Sorted indices reachable from `seeds`, seeds included.
pub fn reachable_nodes(g: &DirectedGraph, seeds: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; g.node_count()];
    let mut stack = Vec::with_capacity(seeds.len());
    for &s in seeds {
        g.check_node(s)?;
        if !seen[s] {
            seen[s] = true;
            stack.push(s);
        }
    }
    while let Some(u) = stack.pop() {
        for &v in g.out_neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    Ok((0..g.node_count()).filter(|&i| seen[i]).collect())
}
