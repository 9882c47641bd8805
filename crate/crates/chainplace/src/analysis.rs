//! Post-solve metrics and the two experiment analyses built on repeated
//! solves: the congestion sweep (how rising traffic shrinks the set of
//! workable data-center locations) and the inflection probe (the smallest
//! per-node core budget at which placement flexibility stops costing any
//! bandwidth, i.e. the optimum meets the shortest-path bound).

use crate::harness::PlacementConfig;
use crate::ilp::{compile_with_paths, PlacementSolution, Strategy};
use crate::paths::k_shortest_paths;
use crate::solver::{solve, SolverConfig, Status};
use crate::topology::{scale_demands_to_mean, NodeId, Scenario, Topology};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("baseline series entry '{0}' is missing")]
    MissingBaseline(String),
    #[error("baseline series entry '{0}' is zero")]
    ZeroBaseline(String),
    #[error("bad input: {0}")]
    BadInput(String),
}

/// Total bandwidth consumption of a routed solution: Σ flow × hop count.
pub fn resource_consumption(solution: &PlacementSolution) -> f64 {
    solution
        .assignments
        .iter()
        .map(|a| a.flow * a.path.length as f64)
        .sum()
}

/// Per-directed-arc carried load. Every arc of the topology appears, loaded
/// or not, so profiles of different solutions line up key-for-key.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub arc_loads: BTreeMap<(NodeId, NodeId), f64>,
    pub max_load: f64,
    pub mean_load: f64,
}

pub fn link_loads(solution: &PlacementSolution, topology: &Topology) -> LoadProfile {
    let mut arc_loads: BTreeMap<(NodeId, NodeId), f64> =
        topology.arcs().into_iter().map(|a| (a, 0.0)).collect();
    for a in &solution.assignments {
        for arc in a.path.arcs() {
            *arc_loads.entry(arc).or_insert(0.0) += a.flow;
        }
    }
    let max_load = arc_loads.values().copied().fold(0.0, f64::max);
    let mean_load = if arc_loads.is_empty() {
        0.0
    } else {
        arc_loads.values().sum::<f64>() / arc_loads.len() as f64
    };
    LoadProfile {
        arc_loads,
        max_load,
        mean_load,
    }
}

/// Scale every value in a named series by the entry under `baseline`.
pub fn normalize(
    series: &BTreeMap<String, f64>,
    baseline: &str,
) -> Result<BTreeMap<String, f64>, AnalysisError> {
    let base = *series
        .get(baseline)
        .ok_or_else(|| AnalysisError::MissingBaseline(baseline.to_string()))?;
    if base.abs() < 1e-12 {
        return Err(AnalysisError::ZeroBaseline(baseline.to_string()));
    }
    Ok(series
        .iter()
        .map(|(k, v)| (k.clone(), v / base))
        .collect())
}

/// Sum of flow × true shortest-path hops over all demands: no feasible
/// routing can consume less bandwidth than this.
pub fn shortest_path_bound(scenario: &Scenario) -> f64 {
    scenario
        .demands
        .iter()
        .map(|d| {
            let sp = k_shortest_paths(&scenario.topology, d.source, d.dest, 1);
            let hops = sp
                .first()
                .expect("connected topology has a shortest path")
                .length;
            d.flow * hops as f64
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Congestion sweep.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible,
    /// The solver hit a limit before deciding; excluded from conclusions.
    Unknown,
}

#[derive(Debug, Clone)]
pub struct CongestionRow {
    pub traffic: f64,
    pub per_node: BTreeMap<NodeId, Feasibility>,
    pub infeasible_count: usize,
}

#[derive(Debug, Clone)]
pub struct CongestionReport {
    pub rows: Vec<CongestionRow>,
    /// Smallest traffic level at which no candidate location works.
    pub congestion_point: Option<f64>,
    /// Nodes that became feasible again after being infeasible at a lower
    /// traffic level — empty on well-behaved instances.
    pub monotonicity_violations: Vec<String>,
    pub warnings: Vec<String>,
}

/// For each traffic level (ascending) and each candidate node, rescale the
/// template's demands to the given mean, place a lone data center at the
/// candidate, and test feasibility.
pub fn congestion_sweep(
    template: &Scenario,
    traffics: &[f64],
    candidates: &[NodeId],
    k: usize,
    config: &SolverConfig,
) -> Result<CongestionReport, AnalysisError> {
    if traffics.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::BadInput(
            "traffic levels must be strictly ascending".to_string(),
        ));
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut monotonicity_violations = Vec::new();
    let mut congestion_point = None;
    let mut last_infeasible: BTreeMap<NodeId, f64> = BTreeMap::new();

    for &traffic in traffics {
        let mut scenario = template.clone();
        scenario.demands = scale_demands_to_mean(&template.demands, traffic)
            .map_err(|e| AnalysisError::BadInput(e.to_string()))?;
        let mut per_node = BTreeMap::new();
        for &node in candidates {
            let mut sc = scenario.clone();
            sc.roles.dc_nodes = [node].into_iter().collect();
            sc.roles.nfv_nodes.clear();
            let model = compile_with_paths(&sc, &Strategy::DcOnly, k)
                .map_err(|e| AnalysisError::BadInput(e.to_string()))?;
            let res = solve(&model, config);
            let f = match res.status {
                Status::Optimal => Feasibility::Feasible,
                Status::Infeasible => Feasibility::Infeasible,
                Status::Timeout => {
                    warnings.push(format!(
                        "node {node} at {traffic} Gbps undecided within limits; excluded"
                    ));
                    Feasibility::Unknown
                }
            };
            if f == Feasibility::Feasible {
                if let Some(at) = last_infeasible.get(&node) {
                    monotonicity_violations.push(format!(
                        "node {node}: feasible at {traffic} Gbps after infeasible at {at} Gbps"
                    ));
                }
            }
            if f == Feasibility::Infeasible {
                last_infeasible.entry(node).or_insert(traffic);
            }
            per_node.insert(node, f);
        }
        let infeasible_count = per_node
            .values()
            .filter(|&&f| f == Feasibility::Infeasible)
            .count();
        let decided = per_node
            .values()
            .filter(|&&f| f != Feasibility::Unknown)
            .count();
        if congestion_point.is_none() && decided > 0 && infeasible_count == decided {
            congestion_point = Some(traffic);
        }
        rows.push(CongestionRow {
            traffic,
            per_node,
            infeasible_count,
        });
    }
    Ok(CongestionReport {
        rows,
        congestion_point,
        monotonicity_violations,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Inflection probe.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ThetaPoint {
    pub theta: f64,
    pub feasible: usize,
    pub infeasible: usize,
    pub timeout: usize,
    /// Mean consumption over the feasible placement variants.
    pub mean_omega: Option<f64>,
    /// All variants feasible and the mean meets the shortest-path bound.
    pub matches_bound: bool,
}

#[derive(Debug, Clone)]
pub struct InflectionResult {
    pub bound: f64,
    pub points: Vec<ThetaPoint>,
    /// Smallest probed budget whose point matches the bound.
    pub inflection: Option<f64>,
}

/// Probe ascending per-node core budgets: for each θ, solve every placement
/// of the strategy family and average the feasible optima. The inflection is
/// the first θ where every placement is feasible and the mean equals the
/// shortest-path bound within the solver tolerance.
pub fn inflection_point(
    template: &Scenario,
    placements: &[PlacementConfig],
    thetas: &[f64],
    k: usize,
    config: &SolverConfig,
) -> Result<InflectionResult, AnalysisError> {
    if thetas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::BadInput(
            "theta values must be strictly ascending".to_string(),
        ));
    }
    if placements.is_empty() {
        return Err(AnalysisError::BadInput(
            "at least one placement is required".to_string(),
        ));
    }
    let bound = shortest_path_bound(template);
    let mut points = Vec::new();
    let mut inflection = None;
    for &theta in thetas {
        let mut scenario = template.clone();
        scenario.budget.cores_per_nfv_node = Some(theta);
        let mut feasible = 0usize;
        let mut infeasible = 0usize;
        let mut timeout = 0usize;
        let mut sum = 0.0;
        for placement in placements {
            let mut sc = scenario.clone();
            placement.apply_roles(&mut sc);
            let model = compile_with_paths(&sc, &placement.strategy, k)
                .map_err(|e| AnalysisError::BadInput(e.to_string()))?;
            let res = solve(&model, config);
            match res.status {
                Status::Optimal => {
                    feasible += 1;
                    sum += res.objective.expect("optimal result has an objective");
                }
                Status::Infeasible => infeasible += 1,
                Status::Timeout => timeout += 1,
            }
        }
        let mean_omega = if feasible > 0 {
            Some(sum / feasible as f64)
        } else {
            None
        };
        let matches_bound = infeasible == 0
            && timeout == 0
            && feasible == placements.len()
            && mean_omega.map_or(false, |m| (m - bound).abs() <= config.tolerance);
        if matches_bound && inflection.is_none() {
            inflection = Some(theta);
        }
        points.push(ThetaPoint {
            theta,
            feasible,
            infeasible,
            timeout,
            mean_omega,
            matches_bound,
        });
    }
    Ok(InflectionResult {
        bound,
        points,
        inflection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::DemandAssignment;
    use crate::paths::Path;
    use crate::topology::{
        Demand, Link, MemoryMode, NodeRoles, ResourceBudget, ServiceChain, VnfSpec,
    };

    fn line_topology() -> Topology {
        Topology::new(
            vec![1, 2, 3],
            vec![
                Link { i: 1, j: 2, capacity: 10.0 },
                Link { i: 2, j: 3, capacity: 10.0 },
            ],
        )
        .unwrap()
    }

    fn line_scenario(flow: f64) -> Scenario {
        Scenario {
            topology: line_topology(),
            roles: NodeRoles::default(),
            demands: vec![Demand { source: 1, dest: 3, flow }],
            catalog: vec![VnfSpec {
                name: "a".to_string(),
                cores_per_gbps: 1.0,
                install_mem: 0.0,
                mem_per_gbps: 0.0,
                assumed: false,
            }],
            chain: ServiceChain { functions: vec!["a".to_string()] },
            budget: ResourceBudget {
                cores_per_nfv_node: Some(2.0),
                mem_per_nfv_node: None,
                memory_mode: MemoryMode::Off,
            },
        }
    }

    fn hand_solution(flow: f64) -> PlacementSolution {
        let path = Path::new(vec![1, 2, 3]);
        PlacementSolution {
            assignments: vec![DemandAssignment {
                source: 1,
                dest: 3,
                flow,
                path,
                placements: vec![("a".to_string(), 2)],
            }],
            objective: 2.0 * flow,
        }
    }

    #[test]
    fn consumption_is_flow_times_hops() {
        assert!((resource_consumption(&hand_solution(1.0)) - 2.0).abs() < 1e-12);
        assert!((resource_consumption(&hand_solution(3.5)) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn loads_cover_all_arcs_and_sum_to_consumption() {
        let profile = link_loads(&hand_solution(3.0), &line_topology());
        assert_eq!(profile.arc_loads.len(), 4);
        assert_eq!(profile.arc_loads[&(1, 2)], 3.0);
        assert_eq!(profile.arc_loads[&(2, 1)], 0.0);
        let total: f64 = profile.arc_loads.values().sum();
        assert!((total - resource_consumption(&hand_solution(3.0))).abs() < 1e-12);
        assert_eq!(profile.max_load, 3.0);
    }

    #[test]
    fn normalize_divides_by_baseline() {
        let series: BTreeMap<String, f64> = [
            ("mb".to_string(), 6.0),
            ("dc-only".to_string(), 3.0),
            ("dc-nfv-all".to_string(), 2.0),
        ]
        .into_iter()
        .collect();
        let normed = normalize(&series, "dc-nfv-all").unwrap();
        assert_eq!(normed["mb"], 3.0);
        assert_eq!(normed["dc-only"], 1.5);
        assert_eq!(normed["dc-nfv-all"], 1.0);
        assert!(matches!(
            normalize(&series, "absent"),
            Err(AnalysisError::MissingBaseline(_))
        ));
        let zeroed: BTreeMap<String, f64> = [("z".to_string(), 0.0)].into_iter().collect();
        assert!(matches!(
            normalize(&zeroed, "z"),
            Err(AnalysisError::ZeroBaseline(_))
        ));
    }

    #[test]
    fn congestion_point_is_first_fully_blocked_traffic() {
        let report = congestion_sweep(
            &line_scenario(1.0),
            &[1.0, 20.0],
            &[2],
            2,
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(report.rows[0].per_node[&2], Feasibility::Feasible);
        assert_eq!(report.rows[1].per_node[&2], Feasibility::Infeasible);
        assert_eq!(report.congestion_point, Some(20.0));
        assert!(report.monotonicity_violations.is_empty());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn congestion_rejects_unsorted_traffic() {
        assert!(matches!(
            congestion_sweep(
                &line_scenario(1.0),
                &[10.0, 5.0],
                &[2],
                2,
                &SolverConfig::default()
            ),
            Err(AnalysisError::BadInput(_))
        ));
    }

    #[test]
    fn inflection_is_first_budget_meeting_the_bound() {
        // Chain [a] at 1 core/Gbps on a 2 Gbps demand: per-node need is 2.
        let template = line_scenario(2.0);
        let placements = vec![PlacementConfig {
            strategy: Strategy::NfvAll,
            dc: None,
            id: "dc=;nfv=1,2,3".to_string(),
        }];
        let result = inflection_point(
            &template,
            &placements,
            &[1.0, 2.0, 4.0],
            2,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((result.bound - 4.0).abs() < 1e-12);
        assert_eq!(result.points[0].infeasible, 1);
        assert!(!result.points[0].matches_bound);
        assert!(result.points[1].matches_bound);
        assert_eq!(result.inflection, Some(2.0));
    }
}
