//! Candidate-path enumeration: exact K-shortest loopless paths under the
//! hop-count metric, and the derived path-indexed sets the integer program
//! consumes (per-arc membership and per-path hosting node pairs).

use crate::topology::{NodeId, NodeRoles, Demand, Topology};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("demand ({from_node}, {to_node}) has no candidate path")]
    NoPath { from_node: NodeId, to_node: NodeId },
    #[error("{0}")]
    BadInput(String),
}

/// A simple (loopless) node sequence from a demand's source to its dest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    /// Hop count = nodes.len() - 1.
    pub length: usize,
}

impl Path {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        let length = nodes.len().saturating_sub(1);
        Path { nodes, length }
    }

    /// Position of a node on this path, if present.
    pub fn position(&self, v: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&x| x == v)
    }

    /// Directed arcs traversed, in order.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Candidate paths per demand plus the two derived indices: which (demand,
/// path) combinations cross each directed arc, and for each (demand, path)
/// the ordered hosting node pairs eligible to realize consecutive chain
/// functions.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    /// Indexed like the demand list; each inner list is sorted by
    /// (length, lexicographic node sequence).
    pub per_demand: Vec<Vec<Path>>,
    /// Directed arc -> set of (demand index, path index) using that arc.
    pub link_index: BTreeMap<(NodeId, NodeId), BTreeSet<(usize, usize)>>,
    /// chain_pairs[demand][path] = ordered hosting pairs (u, v): u an NFV
    /// node on the path, v an NFV or DC node at the same or a later position;
    /// plus the self-pair (u, u) for every on-path DC node. Sorted by
    /// (position of u, position of v).
    pub chain_pairs: Vec<Vec<Vec<(NodeId, NodeId)>>>,
}

impl PathSet {
    pub fn entries_on_arc(&self, arc: (NodeId, NodeId)) -> Option<&BTreeSet<(usize, usize)>> {
        self.link_index.get(&arc)
    }
}

/// BFS hop distances from every node to `target`; unreachable = usize::MAX.
fn hop_distances_to(topology: &Topology, target: NodeId) -> BTreeMap<NodeId, usize> {
    let mut dist: BTreeMap<NodeId, usize> =
        topology.nodes.iter().map(|&v| (v, usize::MAX)).collect();
    let mut queue = VecDeque::new();
    dist.insert(target, 0);
    queue.push_back(target);
    while let Some(v) = queue.pop_front() {
        let dv = dist[&v];
        for &w in topology.neighbors(v) {
            if dist[&w] == usize::MAX {
                dist.insert(w, dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Exact K shortest loopless paths under the hop metric, ties broken by
/// lexicographic node sequence. Returns fewer than K paths iff the graph has
/// fewer simple paths between the endpoints; a disconnected pair yields an
/// empty list.
///
/// Implementation: iterative deepening over a hop bound with an admissible
/// distance-to-target prune, enumerating every simple path within the bound,
/// then sorting and truncating. This sidesteps the tie-ordering pitfalls of
/// deviation-based KSP schemes: the result is exactly the K smallest under
/// the declared total order.
pub fn k_shortest_paths(topology: &Topology, s: NodeId, d: NodeId, k: usize) -> Vec<Path> {
    if k == 0 || s == d || !topology.contains_node(s) || !topology.contains_node(d) {
        return Vec::new();
    }
    let dist = hop_distances_to(topology, d);
    if dist[&s] == usize::MAX {
        return Vec::new();
    }
    let max_bound = topology.nodes.len() - 1;
    let mut bound = dist[&s];
    loop {
        let mut found: Vec<Vec<NodeId>> = Vec::new();
        let mut on_path: BTreeSet<NodeId> = BTreeSet::new();
        let mut prefix: Vec<NodeId> = Vec::new();
        collect_within_bound(topology, s, d, bound, &dist, &mut prefix, &mut on_path, &mut found);
        if found.len() >= k || bound >= max_bound {
            let mut paths: Vec<Path> = found.into_iter().map(Path::new).collect();
            paths.sort_by(|a, b| a.length.cmp(&b.length).then_with(|| a.nodes.cmp(&b.nodes)));
            paths.truncate(k);
            return paths;
        }
        bound += 1;
    }
}

fn collect_within_bound(
    topology: &Topology,
    current: NodeId,
    d: NodeId,
    bound: usize,
    dist: &BTreeMap<NodeId, usize>,
    prefix: &mut Vec<NodeId>,
    on_path: &mut BTreeSet<NodeId>,
    found: &mut Vec<Vec<NodeId>>,
) {
    prefix.push(current);
    on_path.insert(current);
    if current == d {
        found.push(prefix.clone());
    } else {
        let used = prefix.len() - 1;
        for &w in topology.neighbors(current) {
            if on_path.contains(&w) {
                continue;
            }
            let lower = dist[&w];
            if lower == usize::MAX || used + 1 + lower > bound {
                continue;
            }
            collect_within_bound(topology, w, d, bound, dist, prefix, on_path, found);
        }
    }
    prefix.pop();
    on_path.remove(&current);
}

/// Build the full path-indexed structure for a demand list under the given
/// (already strategy-effective) roles. Errors if any demand has no candidate
/// path, naming the demand.
pub fn build_path_set(
    topology: &Topology,
    roles: &NodeRoles,
    demands: &[Demand],
    k: usize,
) -> Result<PathSet, PathError> {
    if k == 0 {
        return Err(PathError::BadInput("k must be at least 1".to_string()));
    }
    let mut per_demand = Vec::with_capacity(demands.len());
    for dm in demands {
        let paths = k_shortest_paths(topology, dm.source, dm.dest, k);
        if paths.is_empty() {
            return Err(PathError::NoPath {
                from_node: dm.source,
                to_node: dm.dest,
            });
        }
        per_demand.push(paths);
    }
    let mut link_index: BTreeMap<(NodeId, NodeId), BTreeSet<(usize, usize)>> = BTreeMap::new();
    for (di, paths) in per_demand.iter().enumerate() {
        for (pi, path) in paths.iter().enumerate() {
            for arc in path.arcs() {
                link_index.entry(arc).or_default().insert((di, pi));
            }
        }
    }
    let mut chain_pairs = Vec::with_capacity(demands.len());
    for paths in &per_demand {
        let mut per_path = Vec::with_capacity(paths.len());
        for path in paths {
            per_path.push(hosting_pairs(path, roles));
        }
        chain_pairs.push(per_path);
    }
    Ok(PathSet {
        per_demand,
        link_index,
        chain_pairs,
    })
}

/// The ordered hosting pairs for one path: (u, v) with u an on-path NFV
/// node, v an on-path NFV or DC node, position(u) <= position(v); plus
/// (u, u) for every on-path DC node. Sorted by (position(u), position(v)).
pub fn hosting_pairs(path: &Path, roles: &NodeRoles) -> Vec<(NodeId, NodeId)> {
    let mut pairs: Vec<((usize, usize), (NodeId, NodeId))> = Vec::new();
    for (pu, &u) in path.nodes.iter().enumerate() {
        if roles.nfv_nodes.contains(&u) {
            for (pv, &v) in path.nodes.iter().enumerate().skip(pu) {
                if roles.nfv_nodes.contains(&v) || roles.dc_nodes.contains(&v) {
                    pairs.push(((pu, pv), (u, v)));
                }
            }
        }
        if roles.dc_nodes.contains(&u) {
            pairs.push(((pu, pu), (u, u)));
        }
    }
    pairs.sort_unstable();
    pairs.into_iter().map(|(_, uv)| uv).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Link;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn line3() -> Topology {
        Topology::new(
            vec![1, 2, 3],
            vec![
                Link { i: 1, j: 2, capacity: 1.0 },
                Link { i: 2, j: 3, capacity: 1.0 },
            ],
        )
        .unwrap()
    }

    fn cycle4() -> Topology {
        Topology::new(
            vec![1, 2, 3, 4],
            vec![
                Link { i: 1, j: 2, capacity: 1.0 },
                Link { i: 2, j: 3, capacity: 1.0 },
                Link { i: 3, j: 4, capacity: 1.0 },
                Link { i: 4, j: 1, capacity: 1.0 },
            ],
        )
        .unwrap()
    }

    /// Independent oracle: plain recursive enumeration of every simple path,
    /// no bounds, no pruning; then the same total order and truncation.
    fn oracle_ksp(topology: &Topology, s: NodeId, d: NodeId, k: usize) -> Vec<Path> {
        fn recurse(
            topology: &Topology,
            cur: NodeId,
            d: NodeId,
            prefix: &mut Vec<NodeId>,
            acc: &mut Vec<Vec<NodeId>>,
        ) {
            prefix.push(cur);
            if cur == d {
                acc.push(prefix.clone());
            } else {
                for &w in topology.neighbors(cur) {
                    if !prefix.contains(&w) {
                        recurse(topology, w, d, prefix, acc);
                    }
                }
            }
            prefix.pop();
        }
        if s == d || !topology.contains_node(s) || !topology.contains_node(d) {
            return Vec::new();
        }
        let mut acc = Vec::new();
        recurse(topology, s, d, &mut Vec::new(), &mut acc);
        let mut paths: Vec<Path> = acc.into_iter().map(Path::new).collect();
        paths.sort_by(|a, b| a.length.cmp(&b.length).then_with(|| a.nodes.cmp(&b.nodes)));
        paths.truncate(k);
        paths
    }

    #[test]
    fn unique_path_on_line_graph() {
        let p = k_shortest_paths(&line3(), 1, 3, 3);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].nodes, vec![1, 2, 3]);
        assert_eq!(p[0].length, 2);
    }

    #[test]
    fn cycle_ties_break_lexicographically() {
        let p = k_shortest_paths(&cycle4(), 1, 3, 5);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].nodes, vec![1, 2, 3]);
        assert_eq!(p[1].nodes, vec![1, 4, 3]);
        assert_eq!(p[0].length, 2);
        assert_eq!(p[1].length, 2);
    }

    #[test]
    fn disconnected_pair_yields_empty() {
        let topo = Topology::new(
            vec![1, 2, 3],
            vec![Link { i: 1, j: 2, capacity: 1.0 }],
        )
        .unwrap();
        assert!(k_shortest_paths(&topo, 1, 3, 2).is_empty());
    }

    #[test]
    fn deterministic_across_calls() {
        let t = cycle4();
        assert_eq!(k_shortest_paths(&t, 2, 4, 4), k_shortest_paths(&t, 2, 4, 4));
    }

    #[test]
    fn hosting_pairs_nfv_only() {
        let path = Path::new(vec![1, 2, 3]);
        let roles = NodeRoles {
            dc_nodes: BTreeSet::new(),
            nfv_nodes: [2].into_iter().collect(),
            mb_locations: Default::default(),
        };
        assert_eq!(hosting_pairs(&path, &roles), vec![(2, 2)]);
    }

    #[test]
    fn hosting_pairs_with_dc_tail() {
        let path = Path::new(vec![1, 2, 3]);
        let roles = NodeRoles {
            dc_nodes: [3].into_iter().collect(),
            nfv_nodes: [2].into_iter().collect(),
            mb_locations: Default::default(),
        };
        assert_eq!(hosting_pairs(&path, &roles), vec![(2, 2), (2, 3), (3, 3)]);
    }

    #[test]
    fn endpoints_count_as_hosting_candidates() {
        let path = Path::new(vec![1, 2, 3]);
        let roles = NodeRoles {
            dc_nodes: BTreeSet::new(),
            nfv_nodes: [1, 3].into_iter().collect(),
            mb_locations: Default::default(),
        };
        assert_eq!(hosting_pairs(&path, &roles), vec![(1, 1), (1, 3), (3, 3)]);
    }

    #[test]
    fn path_set_errors_on_unreachable_demand() {
        let topo = Topology::new(
            vec![1, 2, 3],
            vec![Link { i: 1, j: 2, capacity: 1.0 }],
        )
        .unwrap();
        let demands = [Demand { source: 1, dest: 3, flow: 1.0 }];
        let err = build_path_set(&topo, &NodeRoles::default(), &demands, 2).unwrap_err();
        assert!(matches!(err, PathError::NoPath { from_node: 1, to_node: 3 }));
    }

    #[test]
    fn link_index_matches_path_lengths() {
        let topo = cycle4();
        let demands = [
            Demand { source: 1, dest: 3, flow: 1.0 },
            Demand { source: 2, dest: 4, flow: 1.0 },
        ];
        let ps = build_path_set(&topo, &NodeRoles::default(), &demands, 3).unwrap();
        for (di, paths) in ps.per_demand.iter().enumerate() {
            for (pi, path) in paths.iter().enumerate() {
                let arcs_in_index = ps
                    .link_index
                    .iter()
                    .filter(|(_, set)| set.contains(&(di, pi)))
                    .count();
                assert_eq!(arcs_in_index, path.length);
            }
        }
    }

    proptest! {
        /// Production enumeration equals the unpruned oracle on random small
        /// graphs, including the tie order.
        #[test]
        fn matches_oracle_on_small_graphs(
            n in 2usize..=7,
            edge_bits in 0u32..(1 << 21),
            k in 1usize..=4,
            s_pick in 0usize..7,
            d_pick in 0usize..7,
        ) {
            let nodes: Vec<NodeId> = (1..=n).collect();
            let mut links = Vec::new();
            let mut bit = 0;
            for i in 1..=n {
                for j in (i + 1)..=n {
                    if edge_bits & (1 << bit) != 0 {
                        links.push(Link { i, j, capacity: 1.0 });
                    }
                    bit += 1;
                }
            }
            let topo = Topology::new(nodes, links).unwrap();
            let s = 1 + (s_pick % n);
            let d = 1 + (d_pick % n);
            prop_assume!(s != d);
            let got = k_shortest_paths(&topo, s, d, k);
            let want = oracle_ksp(&topo, s, d, k);
            prop_assert_eq!(got, want);
        }
    }
}
