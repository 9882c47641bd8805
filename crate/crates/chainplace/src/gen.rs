//! Deterministic random instance generation for cross-checking the solver
//! against the exhaustive oracle. Instances stay small enough that the
//! oracle's enumeration guards are never hit: at most 6 nodes, 3 demands,
//! 3 chain functions, and 3 candidate paths per demand.

use crate::ilp::Strategy;
use crate::topology::{
    Demand, Link, MemoryMode, NodeId, NodeRoles, ResourceBudget, Scenario, ServiceChain, Topology,
    VnfSpec,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Build a random small scenario, strategy, and path budget from a seed.
/// The same seed always yields the same instance.
pub fn random_instance(seed: u64) -> (Scenario, Strategy, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Connected random topology: a spanning tree plus a few extra links.
    let n: usize = rng.gen_range(3..=6);
    let nodes: Vec<NodeId> = (1..=n).collect();
    let mut links: Vec<Link> = Vec::new();
    let mut have: Vec<(NodeId, NodeId)> = Vec::new();
    for v in 2..=n {
        let parent = rng.gen_range(1..v);
        links.push(Link {
            i: parent,
            j: v,
            capacity: 0.0,
        });
        have.push((parent, v));
    }
    for i in 1..=n {
        for j in (i + 1)..=n {
            if !have.contains(&(i, j)) && rng.gen_bool(0.35) {
                links.push(Link { i, j, capacity: 0.0 });
                have.push((i, j));
            }
        }
    }
    for link in &mut links {
        link.capacity = *[3.0, 5.0, 10.0, 40.0].choose(&mut rng).unwrap();
    }
    let topology = Topology::new(nodes.clone(), links).expect("generated topology is well-formed");

    // Catalog of three functions with varied resource profiles.
    let catalog: Vec<VnfSpec> = (0..3)
        .map(|i| VnfSpec {
            name: format!("f{i}"),
            cores_per_gbps: *[0.5, 1.0, 2.0].choose(&mut rng).unwrap(),
            install_mem: *[0.0, 1.0, 2.0].choose(&mut rng).unwrap(),
            mem_per_gbps: *[0.0, 0.5, 1.0].choose(&mut rng).unwrap(),
            assumed: false,
        })
        .collect();
    let mut names: Vec<String> = catalog.iter().map(|s| s.name.clone()).collect();
    names.shuffle(&mut rng);
    let chain_len = rng.gen_range(1..=3);
    let chain = ServiceChain {
        functions: names[..chain_len].to_vec(),
    };

    // Demands with distinct endpoints.
    let n_dem = rng.gen_range(1..=3);
    let mut demands = Vec::new();
    for _ in 0..n_dem {
        let s = *nodes.choose(&mut rng).unwrap();
        let mut d = *nodes.choose(&mut rng).unwrap();
        while d == s {
            d = *nodes.choose(&mut rng).unwrap();
        }
        demands.push(Demand {
            source: s,
            dest: d,
            flow: *[0.5, 1.0, 2.0, 4.0].choose(&mut rng).unwrap(),
        });
    }

    let memory_mode = match rng.gen_range(0..4) {
        0 | 1 => MemoryMode::Off,
        2 => MemoryMode::NonScaling,
        _ => MemoryMode::Scaling,
    };
    let budget = ResourceBudget {
        cores_per_nfv_node: Some(*[1.0, 2.0, 4.0].choose(&mut rng).unwrap()),
        mem_per_nfv_node: if memory_mode == MemoryMode::Off {
            None
        } else {
            Some(*[2.0, 4.0, 8.0].choose(&mut rng).unwrap())
        },
        memory_mode,
    };

    // Strategy and the roles it needs.
    let mut roles = NodeRoles::default();
    let strategy = match rng.gen_range(0..5) {
        0 => {
            roles.dc_nodes = [*nodes.choose(&mut rng).unwrap()].into_iter().collect();
            Strategy::DcOnly
        }
        1 => {
            roles.dc_nodes = [*nodes.choose(&mut rng).unwrap()].into_iter().collect();
            let nfv = nodes
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.5))
                .collect();
            Strategy::DcNfv { nfv }
        }
        2 => {
            roles.dc_nodes = [*nodes.choose(&mut rng).unwrap()].into_iter().collect();
            Strategy::DcNfvAll
        }
        3 => Strategy::NfvAll,
        _ => {
            // Contiguous chain segments on distinct random nodes.
            let m = rng.gen_range(1..=chain_len.min(n));
            let mut cuts: Vec<usize> = (1..chain_len).collect();
            cuts.shuffle(&mut rng);
            let mut cuts: Vec<usize> = cuts[..m - 1].to_vec();
            cuts.sort_unstable();
            cuts.insert(0, 0);
            cuts.push(chain_len);
            let mut hosts = nodes.clone();
            hosts.shuffle(&mut rng);
            let mut placements: BTreeMap<NodeId, Vec<String>> = BTreeMap::new();
            for (si, w) in cuts.windows(2).enumerate() {
                placements.insert(hosts[si], chain.functions[w[0]..w[1]].to_vec());
            }
            Strategy::Mb { placements }
        }
    };

    let scenario = Scenario {
        topology,
        roles,
        demands,
        catalog,
        chain,
        budget,
    };
    let k = rng.gen_range(1..=3);
    (scenario, strategy, k)
}
