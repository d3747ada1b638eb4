use crate::graph::{build_topology, make_chain, make_star, Topology};
use crate::performance::PerformanceSpec;
use crate::sim::{Mode, SimConfig};

use super::{Scenario, ScenarioError};

/// Built-in scenarios: `(name, description)`. `chain5_f2` and `chain5_f3`
/// are aliases of their certified gain variants.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "tree6",
        "6-node tree, leaders {4,5,6}, l = 1, G = I (inferred edge set)",
    ),
    ("tree6-noctl", "tree6 without control input"),
    ("chain5_f2", "alias of chain5_f2-g200"),
    ("chain5_f2-g200", "5-chain, followers {1,2}, l = 2, G = diag(1,200,1,1)"),
    ("chain5_f2-g10", "5-chain, followers {1,2}, l = 2, G = diag(1,10,1,1)"),
    ("chain5_f2-noctl", "5-chain, followers {1,2}, l = 2, no control input"),
    ("chain5_f3", "alias of chain5_f3-g100"),
    (
        "chain5_f3-g100",
        "5-chain, followers {1,2,3}, l = 1, G = diag(1,1,100,1)",
    ),
    ("chain5_f3-g10", "5-chain, followers {1,2,3}, l = 1, G = diag(1,1,10,1)"),
    ("chain5_f3-noctl", "5-chain, followers {1,2,3}, l = 1, no control input"),
    ("star11", "11-node star, centre leader, l = 1, G = I"),
    ("star11-noctl", "star11 without control input"),
    ("star11-all", "star11 with the control input on every agent"),
];

const CHAIN5_XBAR0: [f64; 4] = [4.8, 3.0, -2.0, 1.0];
const STAR11_XBAR0: [f64; 10] = [4.0, 3.0, -2.0, -3.0, 4.9, 1.0, 4.7, -4.0, 1.0, 4.8];
const TREE6_XBAR0: [f64; 5] = [4.6, 4.9, 4.5, 4.7, 4.5];

/// `ρ(t) = 4.9 e^{-l t} + 0.1`, `M = 1`.
fn funnel(l: f64) -> PerformanceSpec {
    PerformanceSpec::new(5.0, 0.1, l, 1.0).expect("preset funnel is valid")
}

fn tree6_topology() -> Topology {
    // followers 1..3 all hang off leader 4; leaders form the path 4-5-6
    build_topology(6, &[(1, 4), (2, 4), (3, 4), (4, 5), (5, 6)], &[4, 5, 6]).expect("preset tree")
}

struct Spec {
    topology: Topology,
    l: f64,
    gains: Vec<f64>,
    xbar0: &'static [f64],
    mode: Mode,
    inferred: bool,
}

/// Looks up a built-in scenario by name.
pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
    let canonical = match name {
        "chain5_f2" => "chain5_f2-g200",
        "chain5_f3" => "chain5_f3-g100",
        other => other,
    };
    let chain = |n_f| make_chain(5, n_f).expect("preset chain");
    let star = || make_star(11, &[11]).expect("preset star");
    let s = match canonical {
        "tree6" | "tree6-noctl" => Spec {
            topology: tree6_topology(),
            l: 1.0,
            gains: vec![1.0; 5],
            xbar0: &TREE6_XBAR0,
            mode: if canonical == "tree6" {
                Mode::LeaderPpc
            } else {
                Mode::NoControl
            },
            inferred: true,
        },
        "chain5_f2-g200" | "chain5_f2-g10" | "chain5_f2-noctl" => {
            let (gains, mode) = match canonical {
                "chain5_f2-g200" => (vec![1.0, 200.0, 1.0, 1.0], Mode::LeaderPpc),
                "chain5_f2-g10" => (vec![1.0, 10.0, 1.0, 1.0], Mode::LeaderPpc),
                _ => (vec![1.0; 4], Mode::NoControl),
            };
            Spec {
                topology: chain(2),
                l: 2.0,
                gains,
                xbar0: &CHAIN5_XBAR0,
                mode,
                inferred: false,
            }
        }
        "chain5_f3-g100" | "chain5_f3-g10" | "chain5_f3-noctl" => {
            let (gains, mode) = match canonical {
                "chain5_f3-g100" => (vec![1.0, 1.0, 100.0, 1.0], Mode::LeaderPpc),
                "chain5_f3-g10" => (vec![1.0, 1.0, 10.0, 1.0], Mode::LeaderPpc),
                _ => (vec![1.0; 4], Mode::NoControl),
            };
            Spec {
                topology: chain(3),
                l: 1.0,
                gains,
                xbar0: &CHAIN5_XBAR0,
                mode,
                inferred: false,
            }
        }
        "star11" | "star11-noctl" | "star11-all" => Spec {
            topology: star(),
            l: 1.0,
            gains: vec![1.0; 10],
            xbar0: &STAR11_XBAR0,
            mode: match canonical {
                "star11" => Mode::LeaderPpc,
                "star11-noctl" => Mode::NoControl,
                _ => Mode::AllAgentsPpc,
            },
            inferred: false,
        },
        _ => return Err(ScenarioError::UnknownPreset(name.to_string())),
    };
    let sim = SimConfig {
        mode: s.mode,
        ..SimConfig::default()
    };
    Scenario::new(
        canonical,
        s.topology,
        funnel(s.l),
        s.gains,
        s.xbar0.to_vec(),
        sim,
        s.inferred,
    )
}
