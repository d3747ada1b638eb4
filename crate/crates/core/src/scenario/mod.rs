//! Scenario documents, the certify-then-simulate driver and run summaries.
//!
//! A scenario document is JSON:
//!
//! ```json
//! {
//!   "name": "star11",
//!   "n": 11,
//!   "edges": [[1, 11], [2, 11]],
//!   "leaders": [11],
//!   "perf": { "rho0": 5.0, "rho_inf": 0.1, "l": 1.0, "M": 1.0 },
//!   "gains": [1.0, 1.0],
//!   "xbar0": [4.0, 3.0],
//!   "mode": "leader_ppc",
//!   "dt": 0.001,
//!   "t_end": 10.0,
//!   "inferred_topology": false
//! }
//! ```
//!
//! `mode`, `dt`, `t_end`, `inferred_topology` and `substeps` are optional.

mod emit;
mod presets;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{certify, GammaBar, Method};
use crate::graph::{build_topology, derive_matrices, Topology};
use crate::performance::{EdgeChannel, PerformanceSpec};
use crate::sim::{centroid, integrate, Mode, SimConfig, SimError, SimTrace};

pub use emit::{emit, write_csv, OutputFormat};
pub use presets::{preset, PRESETS};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    /// Funnel shared by every edge.
    pub perf: PerformanceSpec,
    /// Diagonal of the gain matrix `G`, one entry per edge.
    pub gains: Vec<f64>,
    /// Initial relative positions, one per edge.
    pub xbar0: Vec<f64>,
    /// Simulation settings, including the control mode.
    pub sim: SimConfig,
    pub inferred_topology: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: String,
    n: usize,
    edges: Vec<[usize; 2]>,
    leaders: Vec<usize>,
    perf: PerformanceSpec,
    gains: Vec<f64>,
    xbar0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inferred_topology: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    substeps: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

impl Scenario {
    /// Builds and validates a scenario; `sim.consensus_tol` is set to `ρ∞`.
    pub fn new(
        name: impl Into<String>,
        topology: Topology,
        perf: PerformanceSpec,
        gains: Vec<f64>,
        xbar0: Vec<f64>,
        mut sim: SimConfig,
        inferred_topology: bool,
    ) -> Result<Self, ScenarioError> {
        sim.consensus_tol = perf.rho_inf;
        let sc = Self {
            name: name.into(),
            topology,
            perf,
            gains,
            xbar0,
            sim,
            inferred_topology,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let m = self.topology.m();
        if self.name.is_empty() {
            return Err(invalid("name is empty"));
        }
        self.perf.validate().map_err(|e| invalid(e.to_string()))?;
        if self.gains.len() != m {
            return Err(invalid(format!("{} gains for {m} edges", self.gains.len())));
        }
        if let Some(g) = self.gains.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(invalid(format!("gain {g} is not positive")));
        }
        if self.xbar0.len() != m {
            return Err(invalid(format!(
                "{} initial relative positions for {m} edges",
                self.xbar0.len()
            )));
        }
        for (k, &x) in self.xbar0.iter().enumerate() {
            if !(x.is_finite() && x.abs() < self.perf.rho0) {
                return Err(invalid(format!(
                    "xbar0[{}] = {x} lies outside the initial funnel (-{r}, {r})",
                    k + 1,
                    r = self.perf.rho0
                )));
            }
        }
        self.sim.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.sim.mode
    }

    pub fn channels(&self) -> Vec<EdgeChannel> {
        self.xbar0
            .iter()
            .zip(&self.gains)
            .map(|(&x, &g)| EdgeChannel::new(self.perf, x, g).expect("validated scenario"))
            .collect()
    }

    /// Node positions with vertex n pinned at 0.
    pub fn initial_positions(&self) -> Vec<f64> {
        self.topology.positions_from_relative(&self.xbar0)
    }

    pub fn to_document(&self) -> String {
        let doc = ScenarioDoc {
            name: self.name.clone(),
            n: self.topology.n(),
            edges: self.topology.edges().iter().map(|&(h, t)| [h, t]).collect(),
            leaders: self.topology.leaders(),
            perf: self.perf,
            gains: self.gains.clone(),
            xbar0: self.xbar0.clone(),
            mode: Some(self.sim.mode),
            dt: Some(self.sim.dt),
            t_end: Some(self.sim.t_end),
            inferred_topology: Some(self.inferred_topology),
            substeps: self.sim.substeps,
        };
        serde_json::to_string_pretty(&doc).expect("scenario serialises")
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_document() + "\n")?;
        Ok(())
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let edges: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
    let topology = build_topology(doc.n, &edges, &doc.leaders).map_err(|e| invalid(e.to_string()))?;
    let defaults = SimConfig::default();
    let sim = SimConfig {
        dt: doc.dt.unwrap_or(defaults.dt),
        t_end: doc.t_end.unwrap_or(defaults.t_end),
        mode: doc.mode.unwrap_or_default(),
        substeps: doc.substeps,
        ..defaults
    };
    Scenario::new(
        doc.name,
        topology,
        doc.perf,
        doc.gains,
        doc.xbar0,
        sim,
        doc.inferred_topology.unwrap_or(false),
    )
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    load_scenario(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub mode: Mode,
    pub approved: bool,
    pub method: Method,
    pub gamma_bar: GammaBar,
    pub decay_bound: Option<f64>,
    /// `γ` used by the Lyapunov monitor.
    pub lyapunov_gamma: f64,
    pub violation_count: usize,
    pub first_violation: Option<f64>,
    pub converged_at: Option<f64>,
    pub final_max_abs_xbar: f64,
    /// `centroid(t_end) - centroid(0)`.
    pub centroid_drift: f64,
    pub v_monotone: bool,
    pub substeps: usize,
}

impl RunSummary {
    pub fn clean(&self) -> bool {
        self.violation_count == 0
    }

    /// 0 when certified and violation-free, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.approved && self.clean() {
            0
        } else {
            2
        }
    }
}

/// Certifies the scenario's decay rate, then simulates it.
pub fn run(sc: &Scenario) -> Result<(SimTrace, RunSummary), ScenarioError> {
    let dm = derive_matrices(&sc.topology);
    let report = certify(&sc.topology, &dm, sc.perf.l);
    let cfg = SimConfig {
        gamma: report.lyapunov_gamma(),
        ..sc.sim.clone()
    };
    let trace = integrate(&sc.topology, &sc.channels(), &sc.initial_positions(), &cfg)?;
    let summary = RunSummary {
        scenario: sc.name.clone(),
        mode: cfg.mode,
        approved: report.approved,
        method: report.method,
        gamma_bar: report.gamma_bar,
        decay_bound: report.decay_bound,
        lyapunov_gamma: cfg.gamma,
        violation_count: trace.violations.len(),
        first_violation: trace.violations.first().map(|v| v.time),
        converged_at: trace.converged_at,
        final_max_abs_xbar: trace.final_max_abs_xbar(),
        centroid_drift: centroid(trace.x.last().unwrap()) - centroid(&trace.x[0]),
        v_monotone: trace.lyapunov_nonincreasing(),
        substeps: trace.substeps,
    };
    Ok((trace, summary))
}
