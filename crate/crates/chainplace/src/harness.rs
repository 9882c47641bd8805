//! Experiment harness: placement enumeration per strategy family, grid
//! sweeps producing flat CSV records, the memory-budget sweep, and the
//! command-line interface.

use crate::analysis::{congestion_sweep, inflection_point, link_loads, Feasibility};
use crate::ilp::{compile_with_paths, export_lp, Strategy};
use crate::solver::{solve, SolverConfig, Status};
use crate::topology::{
    load_scenario, load_scenario_lenient, looks_like_nsfnet, nsfnet_consistency,
    scale_demands_to_mean, MemoryMode, NodeId, Scenario,
};
use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    BadRequest(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::BadRequest(msg.into())
}

// ---------------------------------------------------------------------------
// Placement enumeration.
// ---------------------------------------------------------------------------

/// A strategy family whose concrete placements a sweep enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyFamily {
    /// Fixed middle-boxes hosting the chain in contiguous blocks.
    Mb,
    /// Everything in one data center; one placement per location.
    DcOnly,
    /// One data center plus a fixed-size subset of NFV candidates.
    DcNfv(usize),
    /// One data center, every other node NFV-capable.
    DcNfvAll,
    /// No data center, every node NFV-capable.
    NfvAll,
}

impl StrategyFamily {
    /// Label used in the CSV `strategy` column.
    pub fn label(&self) -> String {
        match self {
            StrategyFamily::Mb => "mb".to_string(),
            StrategyFamily::DcOnly => "dc-only".to_string(),
            StrategyFamily::DcNfv(x) => format!("dc-nfv-{x}"),
            StrategyFamily::DcNfvAll => "dc-nfv-all".to_string(),
            StrategyFamily::NfvAll => "nfv-all".to_string(),
        }
    }
}

/// Parse a family label; `dc-nfv` takes its subset size from `default_x`,
/// and `dc-nfv-<x>` carries it inline.
pub fn parse_family(s: &str, default_x: Option<usize>) -> Result<StrategyFamily, HarnessError> {
    match s {
        "mb" => Ok(StrategyFamily::Mb),
        "dc-only" => Ok(StrategyFamily::DcOnly),
        "dc-nfv-all" => Ok(StrategyFamily::DcNfvAll),
        "nfv-all" => Ok(StrategyFamily::NfvAll),
        "dc-nfv" => match default_x {
            Some(x) => Ok(StrategyFamily::DcNfv(x)),
            None => Err(bad("strategy dc-nfv requires --x <subset size>")),
        },
        other => {
            if let Some(x) = other.strip_prefix("dc-nfv-").and_then(|t| t.parse().ok()) {
                Ok(StrategyFamily::DcNfv(x))
            } else {
                Err(bad(format!(
                    "unknown strategy '{other}' (expected mb, dc-only, dc-nfv, dc-nfv-all, nfv-all)"
                )))
            }
        }
    }
}

/// One concrete placement: the strategy plus the data-center location it
/// assumes (placements of DC-less strategies carry `dc: None`).
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementConfig {
    pub strategy: Strategy,
    pub dc: Option<NodeId>,
    pub id: String,
}

impl PlacementConfig {
    /// Point the scenario's data-center role at this placement's location.
    pub fn apply_roles(&self, scenario: &mut Scenario) {
        if let Some(v) = self.dc {
            scenario.roles.dc_nodes = [v].into_iter().collect();
        }
    }
}

/// Stable textual identity of a placement, used in the CSV `placement`
/// column: `dc=<n>;nfv=<n,n,...>` or `mb=<n:f1|f2,...>`.
pub fn placement_id(strategy: &Strategy, dc: Option<NodeId>, all_nodes: &[NodeId]) -> String {
    match strategy {
        Strategy::Mb { placements } => {
            let parts: Vec<String> = placements
                .iter()
                .map(|(v, fs)| format!("{v}:{}", fs.join("|")))
                .collect();
            format!("mb={}", parts.join(","))
        }
        Strategy::DcOnly => format!("dc={};nfv=", fmt_dc(dc)),
        Strategy::DcNfv { nfv } => {
            let list: Vec<String> = nfv
                .iter()
                .filter(|v| Some(**v) != dc)
                .map(|v| v.to_string())
                .collect();
            format!("dc={};nfv={}", fmt_dc(dc), list.join(","))
        }
        Strategy::DcNfvAll => {
            let list: Vec<String> = all_nodes
                .iter()
                .filter(|v| Some(**v) != dc)
                .map(|v| v.to_string())
                .collect();
            format!("dc={};nfv={}", fmt_dc(dc), list.join(","))
        }
        Strategy::NfvAll => {
            let list: Vec<String> = all_nodes.iter().map(|v| v.to_string()).collect();
            format!("dc=;nfv={}", list.join(","))
        }
    }
}

fn fmt_dc(dc: Option<NodeId>) -> String {
    dc.map(|v| v.to_string()).unwrap_or_default()
}

/// Enumerate every placement of a family. `all_nodes` is the data-center
/// location universe; `candidates` hosts NFV subsets and middle-boxes.
///
/// Middle-box configurations are the order-preserving splits of the chain
/// into contiguous blocks of at most 3 functions on distinct candidate
/// nodes — a box is a physical appliance with a small fixed slot count, and
/// revisiting a node would force the route to loop back.
pub fn enumerate_placements(
    family: StrategyFamily,
    all_nodes: &[NodeId],
    candidates: &[NodeId],
    chain: &[String],
) -> Result<Vec<PlacementConfig>, HarnessError> {
    let mut out = Vec::new();
    match family {
        StrategyFamily::DcOnly => {
            for &v in all_nodes {
                let strategy = Strategy::DcOnly;
                out.push(PlacementConfig {
                    id: placement_id(&strategy, Some(v), all_nodes),
                    strategy,
                    dc: Some(v),
                });
            }
        }
        StrategyFamily::DcNfvAll => {
            for &v in all_nodes {
                let strategy = Strategy::DcNfvAll;
                out.push(PlacementConfig {
                    id: placement_id(&strategy, Some(v), all_nodes),
                    strategy,
                    dc: Some(v),
                });
            }
        }
        StrategyFamily::NfvAll => {
            let strategy = Strategy::NfvAll;
            out.push(PlacementConfig {
                id: placement_id(&strategy, None, all_nodes),
                strategy,
                dc: None,
            });
        }
        StrategyFamily::DcNfv(x) => {
            if x == 0 {
                return Err(bad("dc-nfv subset size must be at least 1"));
            }
            if x > candidates.len() {
                return Err(bad(format!(
                    "dc-nfv subset size {x} exceeds the {} candidate nodes",
                    candidates.len()
                )));
            }
            let subsets = combinations(candidates, x);
            for subset in &subsets {
                for &v in all_nodes {
                    let strategy = Strategy::DcNfv {
                        nfv: subset.iter().copied().collect(),
                    };
                    out.push(PlacementConfig {
                        id: placement_id(&strategy, Some(v), all_nodes),
                        strategy,
                        dc: Some(v),
                    });
                }
            }
        }
        StrategyFamily::Mb => {
            if chain.is_empty() {
                return Err(bad("middle-box enumeration needs a nonempty chain"));
            }
            let len = chain.len();
            let max_m = len.min(candidates.len());
            let min_m = len.div_ceil(3);
            for m in min_m..=max_m {
                for parts in compositions(len, m) {
                    for hosts in arrangements(candidates, m) {
                        let mut placements: BTreeMap<NodeId, Vec<String>> = BTreeMap::new();
                        let mut at = 0usize;
                        for (seg, &host) in parts.iter().zip(&hosts) {
                            placements.insert(host, chain[at..at + seg].to_vec());
                            at += seg;
                        }
                        let strategy = Strategy::Mb { placements };
                        out.push(PlacementConfig {
                            id: placement_id(&strategy, None, all_nodes),
                            strategy,
                            dc: None,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// All x-element subsets of `items`, in lexicographic index order.
fn combinations(items: &[NodeId], x: usize) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..x).collect();
    if x == 0 || x > items.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        // Advance.
        let mut i = x;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] + 1 <= items.len() - (x - i) {
                idx[i] += 1;
                for j in i + 1..x {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// All compositions of `total` into `m` parts, each between 1 and 3,
/// lexicographically.
fn compositions(total: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, m: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m == 0 {
            if total == 0 {
                out.push(acc.clone());
            }
            return;
        }
        for part in 1..=3.min(total) {
            if total - part >= m - 1 && total - part <= 3 * (m - 1) {
                acc.push(part);
                rec(total - part, m - 1, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(total, m, &mut Vec::new(), &mut out);
    out
}

/// All ordered selections of `m` distinct items, in lexicographic index
/// order.
fn arrangements(items: &[NodeId], m: usize) -> Vec<Vec<NodeId>> {
    fn rec(items: &[NodeId], m: usize, used: &mut Vec<bool>, acc: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        if acc.len() == m {
            out.push(acc.clone());
            return;
        }
        for i in 0..items.len() {
            if !used[i] {
                used[i] = true;
                acc.push(items[i]);
                rec(items, m, used, acc, out);
                acc.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(items, m, &mut vec![false; items.len()], &mut Vec::new(), &mut out);
    out
}

// ---------------------------------------------------------------------------
// Sweeps.
// ---------------------------------------------------------------------------

/// One CSV row: a single solve at a grid point, or a per-family aggregate
/// (status `mean`, placement `mean:<feasible>/<total>`, omega averaged over
/// the feasible placements).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub strategy: String,
    pub placement: String,
    pub theta: Option<f64>,
    pub traffic: f64,
    pub upsilon: Option<f64>,
    pub status: String,
    pub omega: Option<f64>,
    pub omega_norm: Option<f64>,
    pub max_link_load: Option<f64>,
    pub wall_ms: u128,
}

pub struct SweepSpec<'a> {
    pub families: &'a [StrategyFamily],
    pub thetas: &'a [f64],
    pub traffics: &'a [f64],
    pub k: usize,
    /// NFV-subset / middle-box candidate hosts.
    pub candidates: &'a [NodeId],
}

/// Run the full grid. Records appear family-major, then θ, then traffic,
/// then placement, with one aggregate row after each placement group. A
/// placement failing to solve never aborts the sweep — it becomes an
/// `infeasible` or `timeout` row. Reruns produce identical records except
/// for wall-clock times.
pub fn run_sweep(
    template: &Scenario,
    spec: &SweepSpec,
    config: &SolverConfig,
) -> Result<Vec<SweepRecord>, HarnessError> {
    let all_nodes = template.topology.nodes.clone();
    let mut records = Vec::new();
    for family in spec.families {
        let placements = enumerate_placements(
            *family,
            &all_nodes,
            spec.candidates,
            &template.chain.functions,
        )?;
        if placements.is_empty() {
            return Err(bad(format!("family {} has no placements", family.label())));
        }
        for &theta in spec.thetas {
            for &traffic in spec.traffics {
                let mut scenario = template.clone();
                scenario.demands = scale_demands_to_mean(&template.demands, traffic)
                    .map_err(|e| bad(e.to_string()))?;
                scenario.budget.cores_per_nfv_node = Some(theta);
                let upsilon = if scenario.budget.memory_mode != MemoryMode::Off {
                    scenario.budget.mem_per_nfv_node
                } else {
                    None
                };
                let mut feasible = 0usize;
                let mut sum = 0.0;
                let mut group_wall: u128 = 0;
                for p in &placements {
                    let mut sc = scenario.clone();
                    p.apply_roles(&mut sc);
                    let model = compile_with_paths(&sc, &p.strategy, spec.k)
                        .map_err(|e| bad(e.to_string()))?;
                    let res = solve(&model, config);
                    let wall_ms = res.wall.as_millis();
                    group_wall += wall_ms;
                    let (status, omega, mll) = match res.status {
                        Status::Optimal => {
                            let obj = res.objective.expect("optimal has objective");
                            feasible += 1;
                            sum += obj;
                            let profile =
                                link_loads(res.solution.as_ref().unwrap(), &sc.topology);
                            ("optimal", Some(obj), Some(profile.max_load))
                        }
                        Status::Infeasible => ("infeasible", None, None),
                        Status::Timeout => ("timeout", None, None),
                    };
                    records.push(SweepRecord {
                        strategy: family.label(),
                        placement: p.id.clone(),
                        theta: Some(theta),
                        traffic,
                        upsilon,
                        status: status.to_string(),
                        omega,
                        omega_norm: None,
                        max_link_load: mll,
                        wall_ms,
                    });
                }
                records.push(SweepRecord {
                    strategy: family.label(),
                    placement: format!("mean:{feasible}/{}", placements.len()),
                    theta: Some(theta),
                    traffic,
                    upsilon,
                    status: "mean".to_string(),
                    omega: if feasible > 0 {
                        Some(sum / feasible as f64)
                    } else {
                        None
                    },
                    omega_norm: None,
                    max_link_load: None,
                    wall_ms: group_wall,
                });
            }
        }
    }
    fill_normalized(&mut records);
    Ok(records)
}

/// Normalize omega against the dc-nfv-all aggregate mean at the same grid
/// point, where that baseline exists and is nonzero.
fn fill_normalized(records: &mut [SweepRecord]) {
    let mut baseline: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for r in records.iter() {
        if r.strategy == "dc-nfv-all" && r.status == "mean" {
            if let Some(omega) = r.omega {
                baseline.insert(
                    (r.theta.unwrap_or(f64::NAN).to_bits(), r.traffic.to_bits()),
                    omega,
                );
            }
        }
    }
    for r in records.iter_mut() {
        if let (Some(omega), Some(&base)) = (
            r.omega,
            baseline.get(&(r.theta.unwrap_or(f64::NAN).to_bits(), r.traffic.to_bits())),
        ) {
            if base.abs() > 1e-12 {
                r.omega_norm = Some(omega / base);
            }
        }
    }
}

/// Memory-budget sweep: all candidates NFV beside each possible data
/// center, cores unconstrained, memory accounted in the given mode. With
/// non-scaling memory, rows must stay constant across budgets once
/// feasible; with scaling memory, omega is nonincreasing in the budget.
pub fn memory_sweep(
    template: &Scenario,
    mode: MemoryMode,
    upsilons: &[f64],
    traffics: &[f64],
    k: usize,
    candidates: &[NodeId],
    config: &SolverConfig,
) -> Result<Vec<SweepRecord>, HarnessError> {
    if mode == MemoryMode::Off {
        return Err(bad("memory sweep requires non_scaling or scaling mode"));
    }
    if candidates.is_empty() {
        return Err(bad("memory sweep needs NFV candidate nodes"));
    }
    let all_nodes = template.topology.nodes.clone();
    let family = StrategyFamily::DcNfv(candidates.len());
    let placements =
        enumerate_placements(family, &all_nodes, candidates, &template.chain.functions)?;
    let mut records = Vec::new();
    for &upsilon in upsilons {
        for &traffic in traffics {
            let mut scenario = template.clone();
            scenario.demands = scale_demands_to_mean(&template.demands, traffic)
                .map_err(|e| bad(e.to_string()))?;
            scenario.budget.cores_per_nfv_node = None;
            scenario.budget.memory_mode = mode;
            scenario.budget.mem_per_nfv_node = Some(upsilon);
            let mut feasible = 0usize;
            let mut sum = 0.0;
            let mut group_wall: u128 = 0;
            for p in &placements {
                let mut sc = scenario.clone();
                p.apply_roles(&mut sc);
                let model =
                    compile_with_paths(&sc, &p.strategy, k).map_err(|e| bad(e.to_string()))?;
                let res = solve(&model, config);
                let wall_ms = res.wall.as_millis();
                group_wall += wall_ms;
                let (status, omega, mll) = match res.status {
                    Status::Optimal => {
                        let obj = res.objective.expect("optimal has objective");
                        feasible += 1;
                        sum += obj;
                        let profile = link_loads(res.solution.as_ref().unwrap(), &sc.topology);
                        ("optimal", Some(obj), Some(profile.max_load))
                    }
                    Status::Infeasible => ("infeasible", None, None),
                    Status::Timeout => ("timeout", None, None),
                };
                records.push(SweepRecord {
                    strategy: family.label(),
                    placement: p.id.clone(),
                    theta: None,
                    traffic,
                    upsilon: Some(upsilon),
                    status: status.to_string(),
                    omega,
                    omega_norm: None,
                    max_link_load: mll,
                    wall_ms,
                });
            }
            records.push(SweepRecord {
                strategy: family.label(),
                placement: format!("mean:{feasible}/{}", placements.len()),
                theta: None,
                traffic,
                upsilon: Some(upsilon),
                status: "mean".to_string(),
                omega: if feasible > 0 {
                    Some(sum / feasible as f64)
                } else {
                    None
                },
                omega_norm: None,
                max_link_load: None,
                wall_ms: group_wall,
            });
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// CSV.
// ---------------------------------------------------------------------------

pub const CSV_HEADER: &str =
    "strategy,placement,theta,traffic_gbps,upsilon_gb,status,omega,omega_norm,max_link_load_gbps,wall_ms";

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.strategy),
            csv_field(&r.placement),
            fmt_opt(r.theta),
            r.traffic,
            fmt_opt(r.upsilon),
            csv_field(&r.status),
            fmt_opt(r.omega),
            fmt_opt(r.omega_norm),
            fmt_opt(r.max_link_load),
            r.wall_ms
        ));
    }
    out
}

pub fn write_csv(records: &[SweepRecord], path: impl AsRef<std::path::Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    std::fs::write(path, render_csv(records)).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Command-line interface.
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "chainplace",
    about = "Exact service-chain placement and flow-routing optimizer",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one placement instance and print the routing.
    Solve(SolveArgs),
    /// Grid sweep over strategy families, core budgets, and traffic levels.
    Sweep(SweepArgs),
    /// Feasibility of candidate data-center locations under rising traffic.
    Congestion(CongestionArgs),
    /// Sweep per-node memory budgets with cores unconstrained.
    MemorySweep(MemorySweepArgs),
    /// Smallest core budget at which the optimum meets the hop-count bound.
    Inflection(InflectionArgs),
    /// Write the compiled model in LP format.
    ExportLp(ExportLpArgs),
    /// Scenario lint and reference-topology consistency checks.
    Validate(ValidateArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// mb | dc-only | dc-nfv | dc-nfv-all | nfv-all
    #[arg(long)]
    strategy: String,
    /// NFV nodes for dc-nfv (comma-separated), overriding the scenario roles.
    #[arg(long)]
    nfv_nodes: Option<String>,
    /// Data-center node, overriding the scenario roles.
    #[arg(long)]
    dc: Option<NodeId>,
    /// Per-NFV-node core budget override.
    #[arg(long)]
    theta: Option<f64>,
    /// Rescale demands to this mean flow (Gbps).
    #[arg(long)]
    traffic: Option<f64>,
    /// Candidate paths per demand.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Solver time limit in seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout_s: f64,
    /// off | non_scaling | scaling
    #[arg(long)]
    memory_mode: Option<String>,
    /// Per-NFV-node memory budget override (GB).
    #[arg(long)]
    upsilon: Option<f64>,
    /// Write the solution as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated families, e.g. "mb,dc-only,dc-nfv-2,dc-nfv-all".
    #[arg(long)]
    strategy: String,
    /// Subset size for a bare "dc-nfv" entry.
    #[arg(long)]
    x: Option<usize>,
    /// Comma-separated core budgets.
    #[arg(long)]
    theta: String,
    /// Comma-separated mean traffic levels (Gbps).
    #[arg(long)]
    traffic: String,
    /// NFV / middle-box candidate nodes (defaults to the scenario roles).
    #[arg(long)]
    nfv_nodes: Option<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 120.0)]
    timeout_s: f64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CongestionArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated ascending mean traffic levels (Gbps).
    #[arg(long)]
    traffic: String,
    /// Candidate data-center nodes (defaults to every node).
    #[arg(long)]
    dc: Option<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 120.0)]
    timeout_s: f64,
    /// Output CSV path (traffic_gbps,node,status).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct MemorySweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// non_scaling | scaling
    #[arg(long)]
    memory_mode: String,
    /// Comma-separated memory budgets (GB).
    #[arg(long)]
    upsilon: String,
    /// Comma-separated mean traffic levels (Gbps).
    #[arg(long)]
    traffic: String,
    /// NFV candidate nodes (defaults to the scenario roles).
    #[arg(long)]
    nfv_nodes: Option<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 120.0)]
    timeout_s: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct InflectionArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated ascending core budgets.
    #[arg(long)]
    theta: String,
    /// Strategy family to probe (default dc-nfv-all).
    #[arg(long, default_value = "dc-nfv-all")]
    strategy: String,
    #[arg(long)]
    x: Option<usize>,
    /// Rescale demands to this mean flow (Gbps).
    #[arg(long)]
    traffic: Option<f64>,
    /// NFV candidate nodes for dc-nfv (defaults to the scenario roles).
    #[arg(long)]
    nfv_nodes: Option<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 120.0)]
    timeout_s: f64,
}

#[derive(clap::Args)]
struct ExportLpArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    nfv_nodes: Option<String>,
    #[arg(long)]
    dc: Option<NodeId>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    traffic: Option<f64>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Output LP path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// auto | none | nsfnet — which reference profile to check against.
    #[arg(long, default_value = "auto")]
    profile: String,
}

/// Run the CLI against an argv-style vector. Exit codes: 0 success,
/// 1 usage/validation error, 2 infeasible (solve only), 3 timeout.
pub fn cli_main(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    let run = match cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Congestion(a) => cmd_congestion(a),
        Cmd::MemorySweep(a) => cmd_memory_sweep(a),
        Cmd::Inflection(a) => cmd_inflection(a),
        Cmd::ExportLp(a) => cmd_export_lp(a),
        Cmd::Validate(a) => cmd_validate(a),
    };
    match run {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad {what} value '{t}'"))
        })
        .collect()
}

fn parse_node_list(s: &str) -> Result<Vec<NodeId>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<NodeId>()
                .map_err(|_| format!("bad node id '{t}'"))
        })
        .collect()
}

fn parse_mode(s: &str) -> Result<MemoryMode, String> {
    match s {
        "off" => Ok(MemoryMode::Off),
        "non_scaling" => Ok(MemoryMode::NonScaling),
        "scaling" => Ok(MemoryMode::Scaling),
        other => Err(format!(
            "bad memory mode '{other}' (expected off, non_scaling, scaling)"
        )),
    }
}

fn solver_config(timeout_s: f64) -> SolverConfig {
    SolverConfig {
        time_limit: Some(Duration::from_secs_f64(timeout_s)),
        ..SolverConfig::default()
    }
}

fn apply_overrides(
    scenario: &mut Scenario,
    traffic: Option<f64>,
    theta: Option<f64>,
    upsilon: Option<f64>,
    memory_mode: &Option<String>,
) -> Result<(), String> {
    if let Some(t) = traffic {
        scenario.demands =
            scale_demands_to_mean(&scenario.demands, t).map_err(|e| e.to_string())?;
    }
    if let Some(th) = theta {
        scenario.budget.cores_per_nfv_node = Some(th);
    }
    if let Some(u) = upsilon {
        scenario.budget.mem_per_nfv_node = Some(u);
    }
    if let Some(m) = memory_mode {
        scenario.budget.memory_mode = parse_mode(m)?;
    }
    Ok(())
}

/// Build the concrete strategy for single-instance commands, applying the
/// --dc / --nfv-nodes overrides to the scenario roles where relevant.
fn build_strategy(
    name: &str,
    scenario: &mut Scenario,
    dc: Option<NodeId>,
    nfv_nodes: &Option<String>,
) -> Result<Strategy, String> {
    if let Some(v) = dc {
        scenario.roles.dc_nodes = [v].into_iter().collect();
    }
    match name {
        "mb" => {
            if scenario.roles.mb_locations.is_empty() {
                return Err("strategy mb needs mb_locations in the scenario roles".to_string());
            }
            Ok(Strategy::Mb {
                placements: scenario.roles.mb_locations.clone(),
            })
        }
        "dc-only" => Ok(Strategy::DcOnly),
        "dc-nfv" => {
            let nfv: std::collections::BTreeSet<NodeId> = match nfv_nodes {
                Some(s) => parse_node_list(s)?.into_iter().collect(),
                None => scenario.roles.nfv_nodes.clone(),
            };
            if nfv.is_empty() {
                return Err("strategy dc-nfv needs --nfv-nodes or scenario nfv roles".to_string());
            }
            Ok(Strategy::DcNfv { nfv })
        }
        "dc-nfv-all" => Ok(Strategy::DcNfvAll),
        "nfv-all" => Ok(Strategy::NfvAll),
        other => Err(format!(
            "unknown strategy '{other}' (expected mb, dc-only, dc-nfv, dc-nfv-all, nfv-all)"
        )),
    }
}

fn cmd_solve(a: SolveArgs) -> Result<i32, String> {
    let mut scenario = load_scenario(&a.scenario).map_err(|e| e.to_string())?;
    apply_overrides(&mut scenario, a.traffic, a.theta, a.upsilon, &a.memory_mode)?;
    let strategy = build_strategy(&a.strategy, &mut scenario, a.dc, &a.nfv_nodes)?;
    let model = compile_with_paths(&scenario, &strategy, a.k).map_err(|e| e.to_string())?;
    let res = solve(&model, &solver_config(a.timeout_s));
    let status = match res.status {
        Status::Optimal => "optimal",
        Status::Infeasible => "infeasible",
        Status::Timeout => "timeout",
    };
    println!("status: {status}");
    if let Some(obj) = res.objective {
        println!("omega: {obj}");
    }
    if let Some(sol) = &res.solution {
        let profile = link_loads(sol, &scenario.topology);
        println!("max_link_load_gbps: {}", profile.max_load);
        for asg in &sol.assignments {
            let hops: Vec<String> = asg.path.nodes.iter().map(|v| v.to_string()).collect();
            let places: Vec<String> = asg
                .placements
                .iter()
                .map(|(f, v)| format!("{f}@{v}"))
                .collect();
            println!(
                "demand {}->{} ({} Gbps): path {} | {}",
                asg.source,
                asg.dest,
                asg.flow,
                hops.join("-"),
                places.join(", ")
            );
        }
    }
    println!("explored: {}", res.explored);
    println!("wall_ms: {}", res.wall.as_millis());
    if let Some(out) = &a.out {
        let sol_json = res.solution.as_ref().map(|sol| {
            serde_json::json!({
                "objective": sol.objective,
                "assignments": sol.assignments.iter().map(|asg| {
                    serde_json::json!({
                        "source": asg.source,
                        "dest": asg.dest,
                        "flow": asg.flow,
                        "path": asg.path.nodes,
                        "placements": asg.placements,
                    })
                }).collect::<Vec<_>>(),
            })
        });
        let doc = serde_json::json!({
            "status": status,
            "objective": res.objective,
            "explored": res.explored,
            "wall_ms": res.wall.as_millis() as u64,
            "solution": sol_json,
        });
        std::fs::write(out, serde_json::to_string_pretty(&doc).expect("serializable"))
            .map_err(|e| format!("writing {}: {e}", out.display()))?;
    }
    Ok(match res.status {
        Status::Optimal => 0,
        Status::Infeasible => 2,
        Status::Timeout => 3,
    })
}

fn candidates_from(
    nfv_nodes: &Option<String>,
    scenario: &Scenario,
) -> Result<Vec<NodeId>, String> {
    match nfv_nodes {
        Some(s) => parse_node_list(s),
        None => Ok(scenario.roles.nfv_nodes.iter().copied().collect()),
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<i32, String> {
    let scenario = load_scenario(&a.scenario).map_err(|e| e.to_string())?;
    let families: Vec<StrategyFamily> = a
        .strategy
        .split(',')
        .map(|s| parse_family(s.trim(), a.x).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let thetas = parse_f64_list(&a.theta, "theta")?;
    let traffics = parse_f64_list(&a.traffic, "traffic")?;
    let candidates = candidates_from(&a.nfv_nodes, &scenario)?;
    let spec = SweepSpec {
        families: &families,
        thetas: &thetas,
        traffics: &traffics,
        k: a.k,
        candidates: &candidates,
    };
    let records =
        run_sweep(&scenario, &spec, &solver_config(a.timeout_s)).map_err(|e| e.to_string())?;
    match &a.out {
        Some(path) => write_csv(&records, path).map_err(|e| e.to_string())?,
        None => print!("{}", render_csv(&records)),
    }
    Ok(0)
}

fn cmd_congestion(a: CongestionArgs) -> Result<i32, String> {
    let scenario = load_scenario(&a.scenario).map_err(|e| e.to_string())?;
    let traffics = parse_f64_list(&a.traffic, "traffic")?;
    let candidates: Vec<NodeId> = match &a.dc {
        Some(s) => parse_node_list(s)?,
        None => scenario.topology.nodes.clone(),
    };
    let report = congestion_sweep(
        &scenario,
        &traffics,
        &candidates,
        a.k,
        &solver_config(a.timeout_s),
    )
    .map_err(|e| e.to_string())?;
    let mut csv = String::from("traffic_gbps,node,status\n");
    for row in &report.rows {
        let infeasible: Vec<String> = row
            .per_node
            .iter()
            .filter(|(_, f)| **f == Feasibility::Infeasible)
            .map(|(v, _)| v.to_string())
            .collect();
        println!(
            "traffic {} Gbps: {}/{} locations infeasible [{}]",
            row.traffic,
            row.infeasible_count,
            row.per_node.len(),
            infeasible.join(",")
        );
        for (node, f) in &row.per_node {
            let s = match f {
                Feasibility::Feasible => "feasible",
                Feasibility::Infeasible => "infeasible",
                Feasibility::Unknown => "unknown",
            };
            csv.push_str(&format!("{},{},{}\n", row.traffic, node, s));
        }
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for v in &report.monotonicity_violations {
        println!("monotonicity violation: {v}");
    }
    match report.congestion_point {
        Some(t) => println!("congestion point: {t} Gbps"),
        None => println!("congestion point: none in probed range"),
    }
    if let Some(out) = &a.out {
        std::fs::write(out, csv).map_err(|e| format!("writing {}: {e}", out.display()))?;
    }
    Ok(0)
}

fn cmd_memory_sweep(a: MemorySweepArgs) -> Result<i32, String> {
    let scenario = load_scenario(&a.scenario).map_err(|e| e.to_string())?;
    let mode = parse_mode(&a.memory_mode)?;
    let upsilons = parse_f64_list(&a.upsilon, "upsilon")?;
    let traffics = parse_f64_list(&a.traffic, "traffic")?;
    let candidates = candidates_from(&a.nfv_nodes, &scenario)?;
    let records = memory_sweep(
        &scenario,
        mode,
        &upsilons,
        &traffics,
        a.k,
        &candidates,
        &solver_config(a.timeout_s),
    )
    .map_err(|e| e.to_string())?;
    match &a.out {
        Some(path) => write_csv(&records, path).map_err(|e| e.to_string())?,
        None => print!("{}", render_csv(&records)),
    }
    Ok(0)
}

fn cmd_inflection(a: InflectionArgs) -> Result<i32, String> {
    let mut scenario = load_scenario(&a.scenario).map_err(|e| e.to_string())?;
    if let Some(t) = a.traffic {
        scenario.demands =
            scale_demands_to_mean(&scenario.demands, t).map_err(|e| e.to_string())?;
    }
    let thetas = parse_f64_list(&a.theta, "theta")?;
    let family = parse_family(&a.strategy, a.x).map_err(|e| e.to_string())?;
    let candidates = candidates_from(&a.nfv_nodes, &scenario)?;
    let placements = enumerate_placements(
        family,
        &scenario.topology.nodes,
        &candidates,
        &scenario.chain.functions,
    )
    .map_err(|e| e.to_string())?;
    let result = inflection_point(
        &scenario,
        &placements,
        &thetas,
        a.k,
        &solver_config(a.timeout_s),
    )
    .map_err(|e| e.to_string())?;
    println!("shortest-path bound: {}", result.bound);
    for p in &result.points {
        println!(
            "theta {}: feasible {}/{} infeasible {} timeout {} mean {} matches_bound {}",
            p.theta,
            p.feasible,
            p.feasible + p.infeasible + p.timeout,
            p.infeasible,
            p.timeout,
            p.mean_omega.map(|m| m.to_string()).unwrap_or_else(|| "-".to_string()),
            p.matches_bound
        );
    }
    match result.inflection {
        Some(t) => println!("inflection: {t}"),
        None => println!("inflection: none in probed range"),
    }
    Ok(0)
}

fn cmd_export_lp(a: ExportLpArgs) -> Result<i32, String> {
    let mut scenario = load_scenario(&a.scenario).map_err(|e| e.to_string())?;
    apply_overrides(&mut scenario, a.traffic, a.theta, None, &None)?;
    let strategy = build_strategy(&a.strategy, &mut scenario, a.dc, &a.nfv_nodes)?;
    let model = compile_with_paths(&scenario, &strategy, a.k).map_err(|e| e.to_string())?;
    export_lp(&model, &a.out).map_err(|e| e.to_string())?;
    println!(
        "wrote {} ({} variables, {} rows)",
        a.out.display(),
        model.vars.len(),
        model.rows.len()
    );
    Ok(0)
}

fn cmd_validate(a: ValidateArgs) -> Result<i32, String> {
    let scenario = load_scenario_lenient(&a.scenario).map_err(|e| e.to_string())?;
    println!(
        "ok: {} nodes, {} links, {} demands, chain length {}",
        scenario.topology.nodes.len(),
        scenario.topology.links.len(),
        scenario.demands.len(),
        scenario.chain.functions.len()
    );
    let run_profile = match a.profile.as_str() {
        "none" => false,
        "nsfnet" => true,
        "auto" => looks_like_nsfnet(&scenario.topology),
        other => return Err(format!("bad profile '{other}' (expected auto, none, nsfnet)")),
    };
    let mut failed = false;
    if run_profile {
        for check in nsfnet_consistency(&scenario.topology) {
            let tag = if check.pass { "pass" } else { "FAIL" };
            println!("check {}: {} ({})", check.name, tag, check.detail);
            if !check.pass {
                failed = true;
            }
        }
    }
    Ok(if failed { 1 } else { 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{
        Demand, Link, NodeRoles, ResourceBudget, ServiceChain, Topology, VnfSpec,
    };

    fn toy_chain(n: usize) -> Vec<String> {
        ["nat", "ts", "ao", "ipsec", "wana"][..n]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn five_function_chain_over_four_hosts_has_264_configs() {
        let placements =
            enumerate_placements(StrategyFamily::Mb, &[1, 2, 3, 4], &[1, 2, 3, 4], &toy_chain(5))
                .unwrap();
        assert_eq!(placements.len(), 264);
        // Spot-check the first id: two blocks (2|3 split cannot be first —
        // smallest m is 2, composition (2,3) on hosts (1,2)).
        assert_eq!(placements[0].id, "mb=1:nat|ts,2:ao|ipsec|wana");
    }

    #[test]
    fn two_function_chain_over_two_hosts_has_4_configs() {
        let placements =
            enumerate_placements(StrategyFamily::Mb, &[1, 2], &[1, 2], &toy_chain(2)).unwrap();
        let ids: Vec<&str> = placements.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(
            ids,
            vec![
                "mb=1:nat|ts",
                "mb=2:nat|ts",
                "mb=1:nat,2:ts",
                "mb=1:ts,2:nat"
            ]
        );
    }

    #[test]
    fn dc_nfv_crosses_subsets_with_locations() {
        let placements =
            enumerate_placements(StrategyFamily::DcNfv(2), &[1, 2, 3], &[1, 2, 3, 4], &toy_chain(1))
                .unwrap();
        assert_eq!(placements.len(), 6 * 3);
        assert_eq!(placements[0].id, "dc=1;nfv=2");
        assert_eq!(placements[1].id, "dc=2;nfv=1");
        assert_eq!(placements[2].id, "dc=3;nfv=1,2");
    }

    #[test]
    fn dc_only_and_nfv_all_ids() {
        let dc = enumerate_placements(StrategyFamily::DcOnly, &[1, 2], &[], &toy_chain(1)).unwrap();
        assert_eq!(dc.len(), 2);
        assert_eq!(dc[0].id, "dc=1;nfv=");
        let nfv =
            enumerate_placements(StrategyFamily::NfvAll, &[1, 2, 3], &[], &toy_chain(1)).unwrap();
        assert_eq!(nfv.len(), 1);
        assert_eq!(nfv[0].id, "dc=;nfv=1,2,3");
    }

    fn four_line_scenario() -> Scenario {
        Scenario {
            topology: Topology::new(
                vec![1, 2, 3, 4],
                (1..4)
                    .map(|i| Link { i, j: i + 1, capacity: 10.0 })
                    .collect(),
            )
            .unwrap(),
            roles: NodeRoles::default(),
            demands: vec![Demand { source: 1, dest: 2, flow: 1.0 }],
            catalog: vec![VnfSpec {
                name: "nat".to_string(),
                cores_per_gbps: 1.0,
                install_mem: 1.0,
                mem_per_gbps: 0.5,
                assumed: false,
            }],
            chain: ServiceChain { functions: vec!["nat".to_string()] },
            budget: ResourceBudget {
                cores_per_nfv_node: Some(4.0),
                mem_per_nfv_node: None,
                memory_mode: MemoryMode::Off,
            },
        }
    }

    #[test]
    fn sweep_aggregates_over_feasible_placements_only() {
        // K=1 gives the lone shortest path [1,2]; data centers at 3 and 4
        // are off-path, so 2 of 4 dc-only placements are infeasible.
        let template = four_line_scenario();
        let spec = SweepSpec {
            families: &[StrategyFamily::DcOnly],
            thetas: &[4.0],
            traffics: &[1.0],
            k: 1,
            candidates: &[],
        };
        let records = run_sweep(&template, &spec, &SolverConfig::default()).unwrap();
        assert_eq!(records.len(), 5);
        let mean = records.last().unwrap();
        assert_eq!(mean.status, "mean");
        assert_eq!(mean.placement, "mean:2/4");
        assert!((mean.omega.unwrap() - 1.0).abs() < 1e-9);
        let statuses: Vec<&str> = records.iter().map(|r| r.status.as_str()).collect();
        assert_eq!(
            statuses,
            vec!["optimal", "optimal", "infeasible", "infeasible", "mean"]
        );
    }

    #[test]
    fn sweep_records_are_reproducible_modulo_wall_time() {
        let template = four_line_scenario();
        let spec = SweepSpec {
            families: &[StrategyFamily::DcOnly, StrategyFamily::NfvAll],
            thetas: &[2.0, 4.0],
            traffics: &[1.0, 2.0],
            k: 2,
            candidates: &[],
        };
        let strip = |rs: &[SweepRecord]| -> Vec<SweepRecord> {
            rs.iter()
                .map(|r| SweepRecord { wall_ms: 0, ..r.clone() })
                .collect()
        };
        let a = run_sweep(&template, &spec, &SolverConfig::default()).unwrap();
        let b = run_sweep(&template, &spec, &SolverConfig::default()).unwrap();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn normalization_divides_by_dc_nfv_all_mean() {
        let template = four_line_scenario();
        let spec = SweepSpec {
            families: &[StrategyFamily::DcNfvAll, StrategyFamily::NfvAll],
            thetas: &[4.0],
            traffics: &[1.0],
            k: 1,
            candidates: &[],
        };
        let records = run_sweep(&template, &spec, &SolverConfig::default()).unwrap();
        // Every placement is feasible with omega 1, so all norms are 1.
        for r in &records {
            if r.omega.is_some() {
                assert!((r.omega_norm.unwrap() - 1.0).abs() < 1e-9, "{r:?}");
            }
        }
    }

    #[test]
    fn memory_sweep_rows_constant_across_budgets_when_non_scaling_fits() {
        let mut template = four_line_scenario();
        template.budget.memory_mode = MemoryMode::NonScaling;
        template.budget.mem_per_nfv_node = Some(8.0);
        let records = memory_sweep(
            &template,
            MemoryMode::NonScaling,
            &[8.0, 16.0],
            &[1.0],
            2,
            &[2, 3],
            &SolverConfig::default(),
        )
        .unwrap();
        let at8: Vec<_> = records
            .iter()
            .filter(|r| r.upsilon == Some(8.0))
            .map(|r| (r.placement.clone(), r.status.clone(), r.omega))
            .collect();
        let at16: Vec<_> = records
            .iter()
            .filter(|r| r.upsilon == Some(16.0))
            .map(|r| (r.placement.clone(), r.status.clone(), r.omega))
            .collect();
        assert_eq!(at8, at16);
        assert!(records.iter().any(|r| r.status == "optimal"));
        assert!(records.iter().all(|r| r.theta.is_none()));
    }

    #[test]
    fn csv_layout_is_pinned() {
        let records = vec![SweepRecord {
            strategy: "dc-only".to_string(),
            placement: "dc=4;nfv=".to_string(),
            theta: Some(192.0),
            traffic: 1.5,
            upsilon: None,
            status: "optimal".to_string(),
            omega: Some(24.0),
            omega_norm: Some(1.25),
            max_link_load: Some(3.6),
            wall_ms: 7,
        }];
        let csv = render_csv(&records);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "strategy,placement,theta,traffic_gbps,upsilon_gb,status,omega,omega_norm,max_link_load_gbps,wall_ms"
        );
        assert_eq!(
            lines.next().unwrap(),
            "dc-only,dc=4;nfv=,192,1.5,,optimal,24,1.25,3.6,7"
        );
    }

    #[test]
    fn csv_quotes_fields_containing_commas() {
        let records = vec![SweepRecord {
            strategy: "mb".to_string(),
            placement: "mb=3:nat|ts,5:ao".to_string(),
            theta: None,
            traffic: 1.0,
            upsilon: None,
            status: "infeasible".to_string(),
            omega: None,
            omega_norm: None,
            max_link_load: None,
            wall_ms: 0,
        }];
        let csv = render_csv(&records);
        assert!(csv.contains("\"mb=3:nat|ts,5:ao\""));
    }
}
