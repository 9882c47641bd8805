//! Compilation of a scenario + hosting strategy into a pure 0-1 integer
//! linear program, decoding of solver assignments back into domain objects,
//! an independent solution checker, and LP-format export.
//!
//! Variables (all binary):
//! * `r[dem, p]` — demand routes on its p-th candidate path.
//! * `l[f, v, dem]` — function f of the demand's chain is placed at node v.
//! * `q[f, v, p, dem]` — placement and route coincide (q = l AND r).
//! * `j[(f_k, f_{k+1}), (u, v), p, dem]` — the consecutive chain pair is
//!   realized at hosting pair (u, v) on path p (j = q AND q).
//!
//! The objective minimizes total bandwidth consumption: flow × hop count of
//! the chosen path, summed over demands.

use crate::paths::{hosting_pairs, Path, PathSet};
use crate::topology::{
    Demand, MemoryMode, NodeId, NodeRoles, Scenario, Topology,
};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path as FsPath;
use thiserror::Error;

/// Feasibility tolerance applied to every row evaluation, here and in the
/// solver: left-hand sides are sums of products of demand volumes, so exact
/// comparisons would trip over float noise at saturated constraints.
pub const ROW_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("strategy requires at least one dc node in the scenario roles")]
    MissingDc,
    #[error("invalid middle-box placement: {0}")]
    BadMbPlacement(String),
    #[error("path set does not match the strategy-effective roles: {0}")]
    RoleMismatch(String),
    #[error("{0}")]
    BadInput(String),
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("assignment has {got} values for {want} variables")]
    WrongLength { got: usize, want: usize },
    #[error("assignment violates row {row}")]
    RowViolated { row: String },
    #[error("no chain-order walk recoverable for demand ({from_node}, {to_node})")]
    NoWalk { from_node: NodeId, to_node: NodeId },
}

/// Hosting strategy: which nodes may host chain functions, and how.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Fixed middle-boxes: every chain function pinned to a node.
    Mb {
        placements: BTreeMap<NodeId, Vec<String>>,
    },
    /// Only the data-center nodes host.
    DcOnly,
    /// Data center plus an explicit subset of NFV-capable nodes.
    DcNfv { nfv: BTreeSet<NodeId> },
    /// Data center plus every other node NFV-capable.
    DcNfvAll,
    /// No data center; every node NFV-capable.
    NfvAll,
}

impl Strategy {
    pub fn id(&self) -> &'static str {
        match self {
            Strategy::Mb { .. } => "mb",
            Strategy::DcOnly => "dc-only",
            Strategy::DcNfv { .. } => "dc-nfv",
            Strategy::DcNfvAll => "dc-nfv-all",
            Strategy::NfvAll => "nfv-all",
        }
    }
}

/// Resolve the roles a strategy actually grants, starting from the scenario
/// roles. DC and NFV sets are disjoint in the result: when a strategy adds
/// NFV capability to a node already serving as the DC, the DC role wins.
pub fn effective_roles(
    topology: &Topology,
    base: &NodeRoles,
    strategy: &Strategy,
) -> Result<NodeRoles, CompileError> {
    let all: BTreeSet<NodeId> = topology.nodes.iter().copied().collect();
    let check_known = |set: &BTreeSet<NodeId>| -> Result<(), CompileError> {
        for v in set {
            if !all.contains(v) {
                return Err(CompileError::BadInput(format!("node {v} not in topology")));
            }
        }
        Ok(())
    };
    match strategy {
        Strategy::Mb { placements } => {
            let nodes: BTreeSet<NodeId> = placements.keys().copied().collect();
            check_known(&nodes)?;
            for (node, funcs) in placements {
                if funcs.len() > 3 {
                    return Err(CompileError::BadMbPlacement(format!(
                        "node {node} hosts {} middle-boxes; at most 3 allowed",
                        funcs.len()
                    )));
                }
            }
            Ok(NodeRoles {
                dc_nodes: BTreeSet::new(),
                nfv_nodes: nodes,
                mb_locations: placements.clone(),
            })
        }
        Strategy::DcOnly => {
            if base.dc_nodes.is_empty() {
                return Err(CompileError::MissingDc);
            }
            check_known(&base.dc_nodes)?;
            Ok(NodeRoles {
                dc_nodes: base.dc_nodes.clone(),
                nfv_nodes: BTreeSet::new(),
                mb_locations: BTreeMap::new(),
            })
        }
        Strategy::DcNfv { nfv } => {
            if base.dc_nodes.is_empty() {
                return Err(CompileError::MissingDc);
            }
            check_known(&base.dc_nodes)?;
            check_known(nfv)?;
            Ok(NodeRoles {
                dc_nodes: base.dc_nodes.clone(),
                nfv_nodes: nfv.difference(&base.dc_nodes).copied().collect(),
                mb_locations: BTreeMap::new(),
            })
        }
        Strategy::DcNfvAll => {
            if base.dc_nodes.is_empty() {
                return Err(CompileError::MissingDc);
            }
            check_known(&base.dc_nodes)?;
            Ok(NodeRoles {
                dc_nodes: base.dc_nodes.clone(),
                nfv_nodes: all.difference(&base.dc_nodes).copied().collect(),
                mb_locations: BTreeMap::new(),
            })
        }
        Strategy::NfvAll => Ok(NodeRoles {
            dc_nodes: BTreeSet::new(),
            nfv_nodes: all,
            mb_locations: BTreeMap::new(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKey {
    R { dem: usize, path: usize },
    L { func: usize, node: NodeId, dem: usize },
    Q { func: usize, node: NodeId, path: usize, dem: usize },
    J { pair: usize, u: NodeId, v: NodeId, path: usize, dem: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub key: VarKey,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    /// (variable index, coefficient); variables appear at most once per row.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn satisfied(&self, assignment: &[bool]) -> bool {
        let lhs: f64 = self
            .terms
            .iter()
            .map(|&(v, c)| if assignment[v] { c } else { 0.0 })
            .sum();
        match self.sense {
            Sense::Le => lhs <= self.rhs + ROW_TOL,
            Sense::Eq => (lhs - self.rhs).abs() <= ROW_TOL,
            Sense::Ge => lhs >= self.rhs - ROW_TOL,
        }
    }
}

/// Everything the branch-and-bound solver needs about the problem besides
/// the raw rows: demand data, candidate paths, chain coefficients, hosting
/// roles, and budgets. The exhaustive oracle deliberately ignores this and
/// works from rows and variables alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub strategy_id: String,
    pub demands: Vec<Demand>,
    pub paths: Vec<Vec<Path>>,
    /// chain_pairs[dem][path] = the ordered hosting pairs on that path.
    pub chain_pairs: Vec<Vec<Vec<(NodeId, NodeId)>>>,
    pub chain: Vec<String>,
    /// Per chain function: cores/Gbps, install GB, GB/Gbps.
    pub cores_per_gbps: Vec<f64>,
    pub install_mem: Vec<f64>,
    pub mem_per_gbps: Vec<f64>,
    pub roles: NodeRoles,
    pub theta: Option<f64>,
    pub upsilon: Option<f64>,
    pub memory_mode: MemoryMode,
    /// MB strategy only: per chain function, the node it is pinned to.
    pub mb_assignment: Option<Vec<NodeId>>,
    pub arcs: Vec<(NodeId, NodeId)>,
    pub arc_capacity: BTreeMap<(NodeId, NodeId), f64>,
}

impl ModelMeta {
    /// DC and NFV hosting nodes, merged and sorted.
    pub fn hosting_nodes(&self) -> Vec<NodeId> {
        self.roles
            .dc_nodes
            .union(&self.roles.nfv_nodes)
            .copied()
            .collect()
    }

    /// Whether per-node core rows apply (they never do for middle-boxes,
    /// which are fixed hardware, or when no core budget is set).
    pub fn cores_constrained(&self) -> bool {
        self.theta.is_some() && self.mb_assignment.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlpModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Minimized; references only r variables.
    pub objective: Vec<(usize, f64)>,
    pub meta: ModelMeta,
    var_index: BTreeMap<VarKey, usize>,
}

impl IlpModel {
    pub fn var(&self, key: VarKey) -> Option<usize> {
        self.var_index.get(&key).copied()
    }

    pub fn objective_value(&self, assignment: &[bool]) -> f64 {
        self.objective
            .iter()
            .map(|&(v, c)| if assignment[v] { c } else { 0.0 })
            .sum()
    }

    /// Count of variables per kind (r, l, q, j): handy for index-domain
    /// cross-checks in tests.
    pub fn var_counts(&self) -> (usize, usize, usize, usize) {
        let mut counts = (0, 0, 0, 0);
        for v in &self.vars {
            match v.key {
                VarKey::R { .. } => counts.0 += 1,
                VarKey::L { .. } => counts.1 += 1,
                VarKey::Q { .. } => counts.2 += 1,
                VarKey::J { .. } => counts.3 += 1,
            }
        }
        counts
    }
}

/// One demand's routed path and ordered function placements.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandAssignment {
    pub source: NodeId,
    pub dest: NodeId,
    pub flow: f64,
    pub path: Path,
    /// (function name, node), in chain order.
    pub placements: Vec<(String, NodeId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSolution {
    pub assignments: Vec<DemandAssignment>,
    /// Total bandwidth consumption: Σ flow × hops.
    pub objective: f64,
}

/// Compile a scenario under a strategy and a path set built for the same
/// strategy-effective roles.
pub fn compile(
    scenario: &Scenario,
    strategy: &Strategy,
    path_set: &PathSet,
) -> Result<IlpModel, CompileError> {
    let roles = effective_roles(&scenario.topology, &scenario.roles, strategy)?;
    if scenario.demands.is_empty() {
        return Err(CompileError::BadInput("scenario has no demands".to_string()));
    }
    if path_set.per_demand.len() != scenario.demands.len() {
        return Err(CompileError::RoleMismatch(format!(
            "path set covers {} demands, scenario has {}",
            path_set.per_demand.len(),
            scenario.demands.len()
        )));
    }
    // The hosting-pair index depends on the effective roles; reject a path
    // set built for different ones.
    for (di, paths) in path_set.per_demand.iter().enumerate() {
        for (pi, path) in paths.iter().enumerate() {
            let want = hosting_pairs(path, &roles);
            if path_set.chain_pairs[di][pi] != want {
                return Err(CompileError::RoleMismatch(format!(
                    "hosting pairs for demand {di} path {pi} do not match the effective roles"
                )));
            }
        }
    }

    let chain = &scenario.chain.functions;
    let n_funcs = chain.len();
    let mb_assignment = match strategy {
        Strategy::Mb { placements } => Some(mb_assignment_for_chain(chain, placements)?),
        _ => None,
    };

    let specs = scenario.chain_specs();
    let meta = ModelMeta {
        strategy_id: strategy.id().to_string(),
        demands: scenario.demands.clone(),
        paths: path_set.per_demand.clone(),
        chain_pairs: path_set.chain_pairs.clone(),
        chain: chain.clone(),
        cores_per_gbps: specs.iter().map(|s| s.cores_per_gbps).collect(),
        install_mem: specs.iter().map(|s| s.install_mem).collect(),
        mem_per_gbps: specs.iter().map(|s| s.mem_per_gbps).collect(),
        roles: roles.clone(),
        theta: scenario.budget.cores_per_nfv_node,
        upsilon: scenario.budget.mem_per_nfv_node,
        memory_mode: scenario.budget.memory_mode,
        mb_assignment,
        arcs: scenario.topology.arcs(),
        arc_capacity: scenario
            .topology
            .arcs()
            .into_iter()
            .map(|(i, j)| ((i, j), scenario.topology.arc_capacity(i, j).unwrap()))
            .collect(),
    };

    let hosting = meta.hosting_nodes();
    let demands = &meta.demands;

    // ---- Variables, in a fixed emission order. -----------------------------
    let mut vars: Vec<Variable> = Vec::new();
    let mut var_index: BTreeMap<VarKey, usize> = BTreeMap::new();
    let push_var = |vars: &mut Vec<Variable>,
                    var_index: &mut BTreeMap<VarKey, usize>,
                    key: VarKey,
                    name: String| {
        let idx = vars.len();
        vars.push(Variable { key, name });
        var_index.insert(key, idx);
        idx
    };

    for (di, dm) in demands.iter().enumerate() {
        for pi in 0..meta.paths[di].len() {
            push_var(
                &mut vars,
                &mut var_index,
                VarKey::R { dem: di, path: pi },
                format!("r_{}_{}_p{}", dm.source, dm.dest, pi),
            );
        }
    }
    for (di, dm) in demands.iter().enumerate() {
        for (fi, fname) in chain.iter().enumerate() {
            for &v in &hosting {
                push_var(
                    &mut vars,
                    &mut var_index,
                    VarKey::L { func: fi, node: v, dem: di },
                    format!("l_{}_{}_{}_{}", fname, v, dm.source, dm.dest),
                );
            }
        }
    }
    for (di, dm) in demands.iter().enumerate() {
        for (pi, path) in meta.paths[di].iter().enumerate() {
            for &v in &path.nodes {
                if !roles.dc_nodes.contains(&v) && !roles.nfv_nodes.contains(&v) {
                    continue;
                }
                for (fi, fname) in chain.iter().enumerate() {
                    push_var(
                        &mut vars,
                        &mut var_index,
                        VarKey::Q { func: fi, node: v, path: pi, dem: di },
                        format!("q_{}_{}_p{}_{}_{}", fname, v, pi, dm.source, dm.dest),
                    );
                }
            }
        }
    }
    for (di, dm) in demands.iter().enumerate() {
        for (pi, pairs) in meta.chain_pairs[di].iter().enumerate() {
            for k in 0..n_funcs.saturating_sub(1) {
                for &(u, v) in pairs {
                    push_var(
                        &mut vars,
                        &mut var_index,
                        VarKey::J { pair: k, u, v, path: pi, dem: di },
                        format!(
                            "j_{}_{}_{}_{}_p{}_{}_{}",
                            chain[k], chain[k + 1], u, v, pi, dm.source, dm.dest
                        ),
                    );
                }
            }
        }
    }

    let var =
        |key: VarKey| -> usize { *var_index.get(&key).expect("variable emitted above") };

    // ---- Rows, in a fixed emission order. ----------------------------------
    let mut rows: Vec<Row> = Vec::new();

    // One path per demand.
    for (di, dm) in demands.iter().enumerate() {
        let terms = (0..meta.paths[di].len())
            .map(|pi| (var(VarKey::R { dem: di, path: pi }), 1.0))
            .collect();
        rows.push(Row {
            name: format!("single_path_{}_{}", dm.source, dm.dest),
            terms,
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }

    // Per-arc capacity. Every directed arc gets a row, even when no
    // candidate path crosses it (the row is then trivially satisfied).
    for &(i, j) in &meta.arcs {
        let mut terms = Vec::new();
        if let Some(entries) = path_set.link_index.get(&(i, j)) {
            for &(di, pi) in entries {
                terms.push((var(VarKey::R { dem: di, path: pi }), demands[di].flow));
            }
        }
        rows.push(Row {
            name: format!("cap_{i}_{j}"),
            terms,
            sense: Sense::Le,
            rhs: meta.arc_capacity[&(i, j)],
        });
    }

    // Per-NFV-node core budget (not for middle-boxes; those are hardware
    // with their own capacity).
    if meta.cores_constrained() {
        let theta = meta.theta.unwrap();
        for &v in &roles.nfv_nodes {
            let mut terms = Vec::new();
            for (di, dm) in demands.iter().enumerate() {
                for fi in 0..n_funcs {
                    terms.push((
                        var(VarKey::L { func: fi, node: v, dem: di }),
                        dm.flow * meta.cores_per_gbps[fi],
                    ));
                }
            }
            rows.push(Row {
                name: format!("cores_{v}"),
                terms,
                sense: Sense::Le,
                rhs: theta,
            });
        }
    }

    // Per-NFV-node memory budget, by mode. Middle-box hosts provision their
    // own resources, so fixed placements carry no memory rows either.
    if meta.memory_mode != MemoryMode::Off && meta.mb_assignment.is_none() {
        let upsilon = meta
            .upsilon
            .ok_or_else(|| CompileError::BadInput("memory mode set but no upsilon".to_string()))?;
        for &v in &roles.nfv_nodes {
            let mut terms = Vec::new();
            for (di, dm) in demands.iter().enumerate() {
                for fi in 0..n_funcs {
                    let coeff = match meta.memory_mode {
                        MemoryMode::NonScaling => meta.install_mem[fi],
                        MemoryMode::Scaling => dm.flow * meta.mem_per_gbps[fi],
                        MemoryMode::Off => unreachable!(),
                    };
                    terms.push((var(VarKey::L { func: fi, node: v, dem: di }), coeff));
                }
            }
            let name = match meta.memory_mode {
                MemoryMode::NonScaling => format!("mem_inst_{v}"),
                MemoryMode::Scaling => format!("mem_scale_{v}"),
                MemoryMode::Off => unreachable!(),
            };
            rows.push(Row {
                name,
                terms,
                sense: Sense::Le,
                rhs: upsilon,
            });
        }
    }

    // q = l AND r, elementwise.
    for (di, dm) in demands.iter().enumerate() {
        for (pi, path) in meta.paths[di].iter().enumerate() {
            for &v in &path.nodes {
                if !roles.dc_nodes.contains(&v) && !roles.nfv_nodes.contains(&v) {
                    continue;
                }
                for (fi, fname) in chain.iter().enumerate() {
                    let q = var(VarKey::Q { func: fi, node: v, path: pi, dem: di });
                    let l = var(VarKey::L { func: fi, node: v, dem: di });
                    let r = var(VarKey::R { dem: di, path: pi });
                    let tag = format!("{}_{}_p{}_{}_{}", fname, v, pi, dm.source, dm.dest);
                    rows.push(Row {
                        name: format!("colo_ub_place_{tag}"),
                        terms: vec![(q, 1.0), (l, -1.0)],
                        sense: Sense::Le,
                        rhs: 0.0,
                    });
                    rows.push(Row {
                        name: format!("colo_ub_route_{tag}"),
                        terms: vec![(q, 1.0), (r, -1.0)],
                        sense: Sense::Le,
                        rhs: 0.0,
                    });
                    rows.push(Row {
                        name: format!("colo_lb_{tag}"),
                        terms: vec![(q, 1.0), (l, -1.0), (r, -1.0)],
                        sense: Sense::Ge,
                        rhs: -1.0,
                    });
                }
            }
        }
    }

    // Every chain function placed on some chosen route.
    for (di, dm) in demands.iter().enumerate() {
        for (fi, fname) in chain.iter().enumerate() {
            let mut terms = Vec::new();
            for (pi, path) in meta.paths[di].iter().enumerate() {
                for &v in &path.nodes {
                    if roles.dc_nodes.contains(&v) || roles.nfv_nodes.contains(&v) {
                        terms.push((var(VarKey::Q { func: fi, node: v, path: pi, dem: di }), 1.0));
                    }
                }
            }
            rows.push(Row {
                name: format!("placed_{}_{}_{}", fname, dm.source, dm.dest),
                terms,
                sense: Sense::Ge,
                rhs: 1.0,
            });
        }
    }

    // Inside a data center the chain continues in place: if f_k sits at an
    // on-path DC node, the (f_k, f_{k+1}) pair is realized at that node.
    for (di, dm) in demands.iter().enumerate() {
        for (pi, path) in meta.paths[di].iter().enumerate() {
            for &u in &path.nodes {
                if !roles.dc_nodes.contains(&u) {
                    continue;
                }
                for k in 0..n_funcs.saturating_sub(1) {
                    let j = var(VarKey::J { pair: k, u, v: u, path: pi, dem: di });
                    let q = var(VarKey::Q { func: k, node: u, path: pi, dem: di });
                    rows.push(Row {
                        name: format!(
                            "dc_pull_{}_{}_{}_p{}_{}_{}",
                            chain[k], chain[k + 1], u, pi, dm.source, dm.dest
                        ),
                        terms: vec![(j, 1.0), (q, -1.0)],
                        sense: Sense::Ge,
                        rhs: 0.0,
                    });
                }
            }
        }
    }

    // j = q AND q, elementwise over hosting pairs.
    for (di, dm) in demands.iter().enumerate() {
        for (pi, pairs) in meta.chain_pairs[di].iter().enumerate() {
            for k in 0..n_funcs.saturating_sub(1) {
                for &(u, v) in pairs {
                    let j = var(VarKey::J { pair: k, u, v, path: pi, dem: di });
                    let qu = var(VarKey::Q { func: k, node: u, path: pi, dem: di });
                    let qv = var(VarKey::Q { func: k + 1, node: v, path: pi, dem: di });
                    let tag = format!(
                        "{}_{}_{}_{}_p{}_{}_{}",
                        chain[k], chain[k + 1], u, v, pi, dm.source, dm.dest
                    );
                    rows.push(Row {
                        name: format!("adj_ub_u_{tag}"),
                        terms: vec![(j, 1.0), (qu, -1.0)],
                        sense: Sense::Le,
                        rhs: 0.0,
                    });
                    rows.push(Row {
                        name: format!("adj_ub_v_{tag}"),
                        terms: vec![(j, 1.0), (qv, -1.0)],
                        sense: Sense::Le,
                        rhs: 0.0,
                    });
                    rows.push(Row {
                        name: format!("adj_lb_{tag}"),
                        terms: vec![(j, 1.0), (qu, -1.0), (qv, -1.0)],
                        sense: Sense::Ge,
                        rhs: -1.0,
                    });
                }
            }
        }
    }

    // Every consecutive chain pair realized somewhere on some chosen route.
    for (di, dm) in demands.iter().enumerate() {
        for k in 0..n_funcs.saturating_sub(1) {
            let mut terms = Vec::new();
            for (pi, pairs) in meta.chain_pairs[di].iter().enumerate() {
                for &(u, v) in pairs {
                    terms.push((var(VarKey::J { pair: k, u, v, path: pi, dem: di }), 1.0));
                }
            }
            rows.push(Row {
                name: format!("adj_some_{}_{}_{}_{}", chain[k], chain[k + 1], dm.source, dm.dest),
                terms,
                sense: Sense::Ge,
                rhs: 1.0,
            });
        }
    }

    // Order propagation: realizing (f_k, f_{k+1}) outbound from an NFV node
    // u requires (f_{k-1}, f_k) realized into u from the same or an earlier
    // position.
    for (di, dm) in demands.iter().enumerate() {
        for (pi, path) in meta.paths[di].iter().enumerate() {
            let pairs = &meta.chain_pairs[di][pi];
            for k in 1..n_funcs.saturating_sub(1) {
                for &(u, v) in pairs {
                    if !roles.nfv_nodes.contains(&u) {
                        continue;
                    }
                    let pos_u = path.position(u).expect("pair node on path");
                    let mut terms = Vec::new();
                    for &(t, u2) in pairs {
                        if u2 == u
                            && roles.nfv_nodes.contains(&t)
                            && path.position(t).expect("pair node on path") <= pos_u
                        {
                            terms.push((
                                var(VarKey::J { pair: k - 1, u: t, v: u, path: pi, dem: di }),
                                1.0,
                            ));
                        }
                    }
                    let jout = var(VarKey::J { pair: k, u, v, path: pi, dem: di });
                    terms.push((jout, -1.0));
                    rows.push(Row {
                        name: format!(
                            "adj_order_{}_{}_{}_p{}_{}_{}",
                            chain[k], u, v, pi, dm.source, dm.dest
                        ),
                        terms,
                        sense: Sense::Ge,
                        rhs: 0.0,
                    });
                }
            }
        }
    }

    // Each consecutive pair realized at most once per path.
    for (di, dm) in demands.iter().enumerate() {
        for (pi, pairs) in meta.chain_pairs[di].iter().enumerate() {
            for k in 0..n_funcs.saturating_sub(1) {
                let terms: Vec<(usize, f64)> = pairs
                    .iter()
                    .map(|&(u, v)| (var(VarKey::J { pair: k, u, v, path: pi, dem: di }), 1.0))
                    .collect();
                rows.push(Row {
                    name: format!(
                        "adj_one_{}_{}_p{}_{}_{}",
                        chain[k], chain[k + 1], pi, dm.source, dm.dest
                    ),
                    terms,
                    sense: Sense::Le,
                    rhs: 1.0,
                });
            }
        }
    }

    // Tightening: a placement counts only on a route actually chosen for the
    // demand; nothing in the objective otherwise stops stray placements from
    // burning node budgets.
    for (di, dm) in demands.iter().enumerate() {
        for (fi, fname) in chain.iter().enumerate() {
            for &v in &hosting {
                let mut terms = vec![(var(VarKey::L { func: fi, node: v, dem: di }), 1.0)];
                for (pi, path) in meta.paths[di].iter().enumerate() {
                    if path.position(v).is_some() {
                        terms.push((var(VarKey::R { dem: di, path: pi }), -1.0));
                    }
                }
                rows.push(Row {
                    name: format!("on_route_{}_{}_{}_{}", fname, v, dm.source, dm.dest),
                    terms,
                    sense: Sense::Le,
                    rhs: 0.0,
                });
            }
        }
    }

    // Middle-box strategy: placements are constants.
    if let Some(assignment) = &meta.mb_assignment {
        for (di, dm) in demands.iter().enumerate() {
            for (fi, fname) in chain.iter().enumerate() {
                for &v in &hosting {
                    let fixed = if assignment[fi] == v { 1.0 } else { 0.0 };
                    rows.push(Row {
                        name: format!("mb_fix_{}_{}_{}_{}", fname, v, dm.source, dm.dest),
                        terms: vec![(var(VarKey::L { func: fi, node: v, dem: di }), 1.0)],
                        sense: Sense::Eq,
                        rhs: fixed,
                    });
                }
            }
        }
    }

    // ---- Objective: Σ flow × hops over chosen paths. -----------------------
    let mut objective = Vec::new();
    for (di, dm) in demands.iter().enumerate() {
        for (pi, path) in meta.paths[di].iter().enumerate() {
            objective.push((
                var(VarKey::R { dem: di, path: pi }),
                path.length as f64 * dm.flow,
            ));
        }
    }

    Ok(IlpModel {
        vars,
        rows,
        objective,
        meta,
        var_index,
    })
}

/// Convenience: resolve roles, enumerate paths, and compile in one step.
pub fn compile_with_paths(
    scenario: &Scenario,
    strategy: &Strategy,
    k: usize,
) -> Result<IlpModel, CompileError> {
    let roles = effective_roles(&scenario.topology, &scenario.roles, strategy)?;
    let path_set = crate::paths::build_path_set(&scenario.topology, &roles, &scenario.demands, k)
        .map_err(|e| CompileError::BadInput(e.to_string()))?;
    compile(scenario, strategy, &path_set)
}

fn mb_assignment_for_chain(
    chain: &[String],
    placements: &BTreeMap<NodeId, Vec<String>>,
) -> Result<Vec<NodeId>, CompileError> {
    let mut where_is: BTreeMap<&str, NodeId> = BTreeMap::new();
    for (&node, funcs) in placements {
        for f in funcs {
            if where_is.insert(f.as_str(), node).is_some() {
                return Err(CompileError::BadMbPlacement(format!(
                    "function {f} placed more than once"
                )));
            }
        }
    }
    let mut assignment = Vec::with_capacity(chain.len());
    for f in chain {
        match where_is.remove(f.as_str()) {
            Some(node) => assignment.push(node),
            None => {
                return Err(CompileError::BadMbPlacement(format!(
                    "chain function {f} has no middle-box location"
                )))
            }
        }
    }
    if !where_is.is_empty() {
        let extra: Vec<&str> = where_is.keys().copied().collect();
        return Err(CompileError::BadMbPlacement(format!(
            "placements list functions outside the chain: {extra:?}"
        )));
    }
    Ok(assignment)
}

/// Decode a full 0/1 assignment into domain objects. The assignment must
/// satisfy every row; the first violated row is reported by name.
///
/// Placements are canonicalized: for each demand a chain-order walk is
/// extracted from the active q variables on the chosen path (earliest
/// feasible position per function). If the active placements do not form a
/// walk but the path crosses a data center, the canonical form places the
/// whole chain there — resource-free, hence always admissible when the rows
/// hold.
pub fn decode_solution(model: &IlpModel, assignment: &[bool]) -> Result<PlacementSolution, DecodeError> {
    if assignment.len() != model.vars.len() {
        return Err(DecodeError::WrongLength {
            got: assignment.len(),
            want: model.vars.len(),
        });
    }
    for row in &model.rows {
        if !row.satisfied(assignment) {
            return Err(DecodeError::RowViolated {
                row: row.name.clone(),
            });
        }
    }
    let meta = &model.meta;
    let mut assignments = Vec::with_capacity(meta.demands.len());
    let mut objective = 0.0;
    for (di, dm) in meta.demands.iter().enumerate() {
        let chosen: Vec<usize> = (0..meta.paths[di].len())
            .filter(|&pi| assignment[model.var(VarKey::R { dem: di, path: pi }).unwrap()])
            .collect();
        debug_assert_eq!(chosen.len(), 1, "row check guarantees one route");
        let pi = chosen[0];
        let path = meta.paths[di][pi].clone();

        // Active placements per function on the chosen path.
        let mut active: Vec<Vec<NodeId>> = vec![Vec::new(); meta.chain.len()];
        for &v in &path.nodes {
            for fi in 0..meta.chain.len() {
                if let Some(q) = model.var(VarKey::Q { func: fi, node: v, path: pi, dem: di }) {
                    if assignment[q] {
                        active[fi].push(v);
                    }
                }
            }
        }
        let placements = match walk_from_active(meta, &path, &active) {
            Some(w) => w,
            None => {
                // Fall back to the whole chain at the first on-path DC.
                match path
                    .nodes
                    .iter()
                    .copied()
                    .find(|v| meta.roles.dc_nodes.contains(v))
                {
                    Some(dc) => meta.chain.iter().map(|f| (f.clone(), dc)).collect(),
                    None => {
                        return Err(DecodeError::NoWalk {
                            from_node: dm.source,
                            to_node: dm.dest,
                        })
                    }
                }
            }
        };
        objective += path.length as f64 * dm.flow;
        assignments.push(DemandAssignment {
            source: dm.source,
            dest: dm.dest,
            flow: dm.flow,
            path,
            placements,
        });
    }
    Ok(PlacementSolution {
        assignments,
        objective,
    })
}

/// Greedy earliest-position walk through the active placement nodes.
fn walk_from_active(
    meta: &ModelMeta,
    path: &Path,
    active: &[Vec<NodeId>],
) -> Option<Vec<(String, NodeId)>> {
    let mut walk = Vec::with_capacity(meta.chain.len());
    let mut min_pos = 0usize;
    for (fi, fname) in meta.chain.iter().enumerate() {
        let mut best: Option<(usize, NodeId)> = None;
        for &v in &active[fi] {
            let pos = path.position(v)?;
            if pos >= min_pos && best.map_or(true, |(bp, _)| pos < bp) {
                best = Some((pos, v));
            }
        }
        let (pos, v) = best?;
        min_pos = pos;
        walk.push((fname.clone(), v));
    }
    Some(walk)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub violations: Vec<String>,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Independent checker: re-derives every requirement from the scenario and
/// the decoded solution without consulting the compiled rows. Chain order is
/// checked as a walk (nondecreasing positions at role-appropriate nodes);
/// link loads, per-node cores, and memory are re-summed from scratch.
pub fn verify_solution(scenario: &Scenario, strategy: &Strategy, solution: &PlacementSolution) -> Verdict {
    let mut violations = Vec::new();
    let topology = &scenario.topology;
    let all: BTreeSet<NodeId> = topology.nodes.iter().copied().collect();

    // Re-derive the hosting sets directly from the strategy definition.
    let (dc, nfv, mb): (BTreeSet<NodeId>, BTreeSet<NodeId>, Option<BTreeMap<String, NodeId>>) =
        match strategy {
            Strategy::Mb { placements } => {
                let mut by_func = BTreeMap::new();
                for (&node, funcs) in placements {
                    for f in funcs {
                        by_func.insert(f.clone(), node);
                    }
                }
                (
                    BTreeSet::new(),
                    placements.keys().copied().collect(),
                    Some(by_func),
                )
            }
            Strategy::DcOnly => (scenario.roles.dc_nodes.clone(), BTreeSet::new(), None),
            Strategy::DcNfv { nfv } => (
                scenario.roles.dc_nodes.clone(),
                nfv.difference(&scenario.roles.dc_nodes).copied().collect(),
                None,
            ),
            Strategy::DcNfvAll => (
                scenario.roles.dc_nodes.clone(),
                all.difference(&scenario.roles.dc_nodes).copied().collect(),
                None,
            ),
            Strategy::NfvAll => (BTreeSet::new(), all.clone(), None),
        };

    if solution.assignments.len() != scenario.demands.len() {
        violations.push(format!(
            "solution covers {} demands, scenario has {}",
            solution.assignments.len(),
            scenario.demands.len()
        ));
        return Verdict { violations };
    }

    let chain = &scenario.chain.functions;
    let mut arc_load: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    let mut node_cores: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut node_mem: BTreeMap<NodeId, f64> = BTreeMap::new();

    for (dm, asg) in scenario.demands.iter().zip(&solution.assignments) {
        let label = format!("demand ({}, {})", dm.source, dm.dest);
        if asg.source != dm.source || asg.dest != dm.dest || (asg.flow - dm.flow).abs() > ROW_TOL {
            violations.push(format!("{label}: endpoint/flow mismatch with scenario"));
            continue;
        }
        let nodes = &asg.path.nodes;
        if nodes.first() != Some(&dm.source) || nodes.last() != Some(&dm.dest) {
            violations.push(format!("{label}: path endpoints do not match"));
            continue;
        }
        let distinct: BTreeSet<NodeId> = nodes.iter().copied().collect();
        if distinct.len() != nodes.len() {
            violations.push(format!("{label}: path repeats a node"));
        }
        let mut adjacent = true;
        for w in nodes.windows(2) {
            if topology.arc_capacity(w[0], w[1]).is_none() {
                violations.push(format!("{label}: nodes {} and {} not adjacent", w[0], w[1]));
                adjacent = false;
            }
        }
        if adjacent {
            for w in nodes.windows(2) {
                *arc_load.entry((w[0], w[1])).or_default() += dm.flow;
            }
        }

        if asg.placements.len() != chain.len() {
            violations.push(format!(
                "{label}: {} placements for a {}-function chain",
                asg.placements.len(),
                chain.len()
            ));
            continue;
        }
        let mut last_pos = 0usize;
        for (k, (fname, v)) in asg.placements.iter().enumerate() {
            if fname != &chain[k] {
                violations.push(format!(
                    "{label}: placement {k} is {fname}, chain expects {}",
                    chain[k]
                ));
                continue;
            }
            let pos = match asg.path.position(*v) {
                Some(p) => p,
                None => {
                    violations.push(format!("{label}: function {fname} at off-path node {v}"));
                    continue;
                }
            };
            if pos < last_pos {
                violations.push(format!("chain order, {label}: {fname} at node {v}"));
            }
            last_pos = last_pos.max(pos);
            match &mb {
                Some(by_func) => {
                    if by_func.get(fname) != Some(v) {
                        violations.push(format!(
                            "{label}: middle-box {fname} must sit at its fixed node, found {v}"
                        ));
                    }
                }
                None => {
                    if !dc.contains(v) && !nfv.contains(v) {
                        violations.push(format!(
                            "{label}: function {fname} at node {v} which hosts nothing"
                        ));
                    }
                }
            }
            if nfv.contains(v) && mb.is_none() {
                let spec = scenario.vnf(fname).expect("validated chain");
                *node_cores.entry(*v).or_default() += dm.flow * spec.cores_per_gbps;
                let mem = match scenario.budget.memory_mode {
                    MemoryMode::Off => 0.0,
                    MemoryMode::NonScaling => spec.install_mem,
                    MemoryMode::Scaling => dm.flow * spec.mem_per_gbps,
                };
                *node_mem.entry(*v).or_default() += mem;
            }
        }
    }

    for ((i, j), load) in &arc_load {
        let cap = topology.arc_capacity(*i, *j).unwrap_or(0.0);
        if *load > cap + ROW_TOL {
            violations.push(format!("capacity ({i}, {j}): load {load} exceeds {cap}"));
        }
    }
    if mb.is_none() {
        if let Some(theta) = scenario.budget.cores_per_nfv_node {
            for (v, used) in &node_cores {
                if *used > theta + ROW_TOL {
                    violations.push(format!("cores node {v}: {used} exceeds {theta}"));
                }
            }
        }
        if scenario.budget.memory_mode != MemoryMode::Off {
            if let Some(upsilon) = scenario.budget.mem_per_nfv_node {
                for (v, used) in &node_mem {
                    if *used > upsilon + ROW_TOL {
                        violations.push(format!("memory node {v}: {used} exceeds {upsilon}"));
                    }
                }
            }
        }
    }

    Verdict { violations }
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn push_terms(out: &mut String, terms: &[(usize, f64)], vars: &[Variable]) {
    let mut first = true;
    for &(vi, c) in terms {
        if c == 0.0 {
            continue;
        }
        if first {
            if c < 0.0 {
                out.push_str("- ");
            }
            first = false;
        } else if c < 0.0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        let a = c.abs();
        if a != 1.0 {
            out.push_str(&fmt_num(a));
            out.push(' ');
        }
        out.push_str(&vars[vi].name);
    }
}

/// Render the model in the classic textual LP dialect: `Minimize` /
/// `Subject To` with named rows / `Binary` listing every variable / `End`.
/// Rows with no terms are omitted (they are trivially satisfied and the
/// format cannot express an empty left-hand side). Output is byte-stable.
pub fn render_lp(model: &IlpModel) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj: ");
    push_terms(&mut out, &model.objective, &model.vars);
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        if row.terms.iter().all(|&(_, c)| c == 0.0) {
            continue;
        }
        out.push(' ');
        out.push_str(&row.name);
        out.push_str(": ");
        push_terms(&mut out, &row.terms, &model.vars);
        out.push(' ');
        out.push_str(row.sense.symbol());
        out.push(' ');
        out.push_str(&fmt_num(row.rhs));
        out.push('\n');
    }
    out.push_str("Binary\n");
    for v in &model.vars {
        out.push(' ');
        out.push_str(&v.name);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(model: &IlpModel, path: impl AsRef<FsPath>) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(render_lp(model).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Link, ResourceBudget, ServiceChain, VnfSpec};

    /// Line graph 1-2-3, one demand 1->3 of 1 Gbps, single-function chain.
    pub(crate) fn line_scenario(nfv2: bool) -> Scenario {
        let topology = Topology::new(
            vec![1, 2, 3],
            vec![
                Link { i: 1, j: 2, capacity: 10.0 },
                Link { i: 2, j: 3, capacity: 10.0 },
            ],
        )
        .unwrap();
        let roles = if nfv2 {
            NodeRoles {
                dc_nodes: BTreeSet::new(),
                nfv_nodes: [2].into_iter().collect(),
                mb_locations: BTreeMap::new(),
            }
        } else {
            NodeRoles {
                dc_nodes: [2].into_iter().collect(),
                nfv_nodes: BTreeSet::new(),
                mb_locations: BTreeMap::new(),
            }
        };
        Scenario {
            topology,
            roles,
            demands: vec![Demand { source: 1, dest: 3, flow: 1.0 }],
            catalog: vec![VnfSpec {
                name: "a".to_string(),
                cores_per_gbps: 1.0,
                install_mem: 0.0,
                mem_per_gbps: 0.0,
                assumed: false,
            }],
            chain: ServiceChain {
                functions: vec!["a".to_string()],
            },
            budget: ResourceBudget {
                cores_per_nfv_node: Some(2.0),
                mem_per_nfv_node: None,
                memory_mode: MemoryMode::Off,
            },
        }
    }

    fn compile_line(nfv2: bool) -> IlpModel {
        let sc = line_scenario(nfv2);
        if nfv2 {
            // Pin hosting to node 2 alone: a single middle-box-free NFV node.
            let strategy = Strategy::Mb {
                placements: [(2, vec!["a".to_string()])].into_iter().collect(),
            };
            compile_with_paths(&sc, &strategy, 1).unwrap()
        } else {
            compile_with_paths(&sc, &Strategy::DcOnly, 1).unwrap()
        }
    }

    #[test]
    fn line_graph_nfv_all_var_counts() {
        // NfvAll on the line graph: 3 hosting nodes, 1 path of 3 nodes,
        // 1 function => r = 1, l = 3, q = 3, and no pair variables.
        let sc = line_scenario(true);
        let model = compile_with_paths(&sc, &Strategy::NfvAll, 1).unwrap();
        assert_eq!(model.var_counts(), (1, 3, 3, 0));
        assert_eq!(
            model.rows.iter().filter(|r| r.name.starts_with("cap_")).count(),
            4
        );
        assert_eq!(
            model.rows.iter().filter(|r| r.name.starts_with("cores_")).count(),
            3
        );
    }

    #[test]
    fn line_graph_single_host_var_counts() {
        // Hosting restricted to node 2: one of each structural kind.
        let model = compile_line(true);
        assert_eq!(model.var_counts(), (1, 1, 1, 0));
        // Middle-box compilation fixes the placement and skips core rows.
        assert!(model.rows.iter().any(|r| r.name == "mb_fix_a_2_1_3"));
        assert!(model.rows.iter().all(|r| !r.name.starts_with("cores_")));
    }

    #[test]
    fn line_graph_dc_has_no_core_rows() {
        let model = compile_line(false);
        assert_eq!(model.var_counts(), (1, 1, 1, 0));
        assert!(model.rows.iter().all(|r| !r.name.starts_with("cores_")));
        assert_eq!(
            model.rows.iter().filter(|r| r.name.starts_with("cap_")).count(),
            4
        );
    }

    #[test]
    fn trivial_objective_line() {
        let model = compile_line(false);
        let lp = render_lp(&model);
        assert!(lp.starts_with("Minimize\n obj: 2 r_1_3_p0\n"), "{lp}");
        assert!(lp.contains("Subject To\n"));
        assert!(lp.contains("Binary\n"));
        assert!(lp.trim_end().ends_with("End"));
    }

    #[test]
    fn export_is_byte_stable() {
        let m1 = compile_line(false);
        let m2 = compile_line(false);
        assert_eq!(render_lp(&m1), render_lp(&m2));
    }

    #[test]
    fn decode_trivial_model() {
        let model = compile_line(false);
        let mut assignment = vec![false; model.vars.len()];
        for i in 0..model.vars.len() {
            assignment[i] = true; // r, l, q all 1
        }
        let sol = decode_solution(&model, &assignment).unwrap();
        assert_eq!(sol.objective, 2.0);
        assert_eq!(sol.assignments[0].path.nodes, vec![1, 2, 3]);
        assert_eq!(sol.assignments[0].placements, vec![("a".to_string(), 2)]);
    }

    #[test]
    fn decode_rejects_route_violation_by_row_name() {
        let model = compile_line(false);
        let assignment = vec![false; model.vars.len()];
        let err = decode_solution(&model, &assignment).unwrap_err();
        match err {
            DecodeError::RowViolated { row } => {
                assert_eq!(row, "single_path_1_3");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn verify_passes_on_decoded_optimum() {
        let sc = line_scenario(false);
        let model = compile_with_paths(&sc, &Strategy::DcOnly, 1).unwrap();
        let assignment = vec![true; model.vars.len()];
        let sol = decode_solution(&model, &assignment).unwrap();
        let verdict = verify_solution(&sc, &Strategy::DcOnly, &sol);
        assert!(verdict.ok(), "{:?}", verdict.violations);
    }

    #[test]
    fn verify_flags_chain_disorder() {
        let sc = {
            let mut sc = line_scenario(false);
            sc.catalog.push(VnfSpec {
                name: "b".to_string(),
                cores_per_gbps: 0.0,
                install_mem: 0.0,
                mem_per_gbps: 0.0,
                assumed: false,
            });
            sc.chain.functions.push("b".to_string());
            sc.roles.dc_nodes = [1, 2].into_iter().collect();
            sc
        };
        let solution = PlacementSolution {
            assignments: vec![DemandAssignment {
                source: 1,
                dest: 3,
                flow: 1.0,
                path: Path::new(vec![1, 2, 3]),
                placements: vec![("a".to_string(), 2), ("b".to_string(), 1)],
            }],
            objective: 2.0,
        };
        let verdict = verify_solution(&sc, &Strategy::DcOnly, &solution);
        assert!(verdict
            .violations
            .iter()
            .any(|v| v.starts_with("chain order, demand (1, 3)")), "{:?}", verdict.violations);
    }

    #[test]
    fn verify_flags_overloaded_arc() {
        let mut sc = line_scenario(false);
        sc.demands[0].flow = 48.0;
        sc.topology = Topology::new(
            vec![1, 2, 3],
            vec![
                Link { i: 1, j: 2, capacity: 40.0 },
                Link { i: 2, j: 3, capacity: 40.0 },
            ],
        )
        .unwrap();
        let solution = PlacementSolution {
            assignments: vec![DemandAssignment {
                source: 1,
                dest: 3,
                flow: 48.0,
                path: Path::new(vec![1, 2, 3]),
                placements: vec![("a".to_string(), 2)],
            }],
            objective: 96.0,
        };
        let verdict = verify_solution(&sc, &Strategy::DcOnly, &solution);
        assert!(verdict
            .violations
            .iter()
            .any(|v| v.starts_with("capacity (1, 2)")), "{:?}", verdict.violations);
    }

    #[test]
    fn compile_is_deterministic() {
        let sc = line_scenario(false);
        let m1 = compile_with_paths(&sc, &Strategy::DcOnly, 1).unwrap();
        let m2 = compile_with_paths(&sc, &Strategy::DcOnly, 1).unwrap();
        assert_eq!(m1.vars, m2.vars);
        assert_eq!(m1.rows, m2.rows);
        assert_eq!(m1.objective, m2.objective);
    }

    #[test]
    fn mb_requires_full_coverage() {
        let sc = {
            let mut sc = line_scenario(false);
            sc.roles.dc_nodes.clear();
            sc
        };
        let strategy = Strategy::Mb {
            placements: BTreeMap::new(),
        };
        let err = compile_with_paths(&sc, &strategy, 1).unwrap_err();
        assert!(matches!(err, CompileError::BadMbPlacement(_)));
    }

    #[test]
    fn dc_nfv_overlap_resolves_to_dc() {
        let sc = line_scenario(false); // dc at 2
        let roles = effective_roles(
            &sc.topology,
            &sc.roles,
            &Strategy::DcNfv { nfv: [2, 3].into_iter().collect() },
        )
        .unwrap();
        assert!(roles.dc_nodes.contains(&2));
        assert!(!roles.nfv_nodes.contains(&2));
        assert!(roles.nfv_nodes.contains(&3));
    }
}
