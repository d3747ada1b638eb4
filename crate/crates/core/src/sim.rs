//! Closed-loop simulation of the leader-follower network.
//!
//! Node dynamics are `ẋ = -L x + B u` with the prescribed-performance input
//! `u = -D_i J_T G ε` applied to the leaders only (or to every agent in
//! [`Mode::AllAgentsPpc`]). Integration is classical fixed-step RK4. Each
//! output interval `dt` is split into a fixed number of equal substeps so
//! the stiff late phase (narrow funnel, large gains) stays inside the RK4
//! stability region while the trace keeps a uniform `dt` grid.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{derive_matrices, DerivedMatrices, Topology};
use crate::performance::{EdgeChannel, FunnelError};

/// Target for `h · λ_est` when choosing the substep count. RK4 is stable on
/// the negative real axis up to about 2.78.
const STIFFNESS_TARGET: f64 = 1.0;

/// Tolerance of the stepwise Lyapunov descent check.
pub const LYAPUNOV_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("edge {edge}: {source}")]
    OutOfFunnel { edge: usize, source: FunnelError },
    #[error("initial error {value} on edge {edge} is outside its funnel ({lo}, {hi})")]
    InitialConditionOutsideFunnel { edge: usize, value: f64, lo: f64, hi: f64 },
    #[error("state became non-finite at t = {time}")]
    NumericalBlowup { time: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Plain consensus protocol, no external input.
    NoControl,
    /// Prescribed-performance input on the leaders only.
    #[default]
    LeaderPpc,
    /// Prescribed-performance input on every agent (`B = I`).
    AllAgentsPpc,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::NoControl => "no_control",
            Mode::LeaderPpc => "leader_ppc",
            Mode::AllAgentsPpc => "all_agents_ppc",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no_control" => Ok(Mode::NoControl),
            "leader_ppc" => Ok(Mode::LeaderPpc),
            "all_agents_ppc" => Ok(Mode::AllAgentsPpc),
            other => Err(format!(
                "unknown mode {other:?}, expected no_control, leader_ppc or all_agents_ppc"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Output step.
    pub dt: f64,
    pub t_end: f64,
    /// Relative slack on the funnel bound before a violation is recorded.
    pub violation_margin: f64,
    pub consensus_tol: f64,
    pub mode: Mode,
    /// RK4 steps per output step; `None` picks a count from a stiffness
    /// estimate at the narrowest funnel.
    pub substeps: Option<usize>,
    /// `γ` of the Lyapunov function recorded in the trace.
    pub gamma: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            violation_margin: 0.0,
            consensus_tol: 0.1,
            mode: Mode::LeaderPpc,
            substeps: None,
            gamma: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidConfig(msg.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end > self.dt && self.t_end.is_finite()) {
            return bad("t_end must exceed dt");
        }
        if !(self.consensus_tol > 0.0) {
            return bad("consensus_tol must be positive");
        }
        if !(self.violation_margin >= 0.0) {
            return bad("violation_margin must be nonnegative");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if self.substeps == Some(0) {
            return bad("substeps must be at least 1");
        }
        Ok(())
    }

    /// Number of output steps after the initial state.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

/// A recorded funnel exit. `edge` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time: f64,
    pub edge: usize,
    pub value: f64,
    /// The bound that was crossed (already scaled by the margin).
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xbar: Vec<Vec<f64>>,
    /// Per-edge funnel radius at each output time.
    pub rho: Vec<Vec<f64>>,
    /// Lyapunov value; infinite while some edge is outside its funnel
    /// (`null` in JSON).
    #[serde(with = "infinite_as_null")]
    pub v: Vec<f64>,
    /// Inputs at each output time: one per leader, or one per agent in
    /// [`Mode::AllAgentsPpc`].
    pub u: Vec<Vec<f64>>,
    pub violations: Vec<Violation>,
    /// Whether any violation was recorded in `(t_{k-1}, t_k]`.
    pub step_violated: Vec<bool>,
    pub converged_at: Option<f64>,
    pub substeps: usize,
    /// RK4 stage evaluations in which some modulated error had to be clamped.
    pub clamped_stages: usize,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs_xbar(&self, k: usize) -> f64 {
        self.xbar[k].iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn final_max_abs_xbar(&self) -> f64 {
        self.max_abs_xbar(self.len() - 1)
    }

    /// True when `V` never rises by more than [`LYAPUNOV_SLACK`] between
    /// consecutive output steps.
    pub fn lyapunov_nonincreasing(&self) -> bool {
        self.v
            .windows(2)
            .all(|w| w[0].is_finite() && w[1].is_finite() && w[1] <= w[0] + LYAPUNOV_SLACK)
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

fn check_channels(m: usize, channels: &[EdgeChannel]) -> Result<(), SimError> {
    if channels.len() != m {
        return Err(SimError::DimensionMismatch(format!(
            "{} channels for {m} edges",
            channels.len()
        )));
    }
    Ok(())
}

fn drives(channels: &[EdgeChannel], xbar: &DVector<f64>, t: f64) -> Result<DVector<f64>, SimError> {
    let mut w = DVector::zeros(channels.len());
    for (k, ch) in channels.iter().enumerate() {
        w[k] = ch
            .drive(xbar[k], t)
            .map_err(|source| SimError::OutOfFunnel { edge: k, source })?;
    }
    Ok(w)
}

/// Leader input in stacked form, `u = -D_i J_T G ε`.
pub fn control_input(
    dm: &DerivedMatrices,
    channels: &[EdgeChannel],
    x: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>, SimError> {
    check_channels(dm.m(), channels)?;
    let w = drives(channels, &dm.edge_states(x), t)?;
    Ok(-(&dm.d_i * w))
}

/// Leader input as the per-leader neighbour sum
/// `u_i = -Σ_{j ∈ N_i} g_ij J_ij ε_ij`, each term seen from leader i's side
/// of the edge.
pub fn control_input_per_leader(
    topology: &Topology,
    channels: &[EdgeChannel],
    x: &[f64],
    t: f64,
) -> Result<Vec<f64>, SimError> {
    check_channels(topology.m(), channels)?;
    let mut u = Vec::with_capacity(topology.n_leaders());
    for leader in topology.leaders() {
        let mut acc = 0.0;
        for (k, &(h, tail)) in topology.edges().iter().enumerate() {
            let (ch, neighbour) = if h == leader {
                (channels[k], tail)
            } else if tail == leader {
                (channels[k].reversed(), h)
            } else {
                continue;
            };
            let x_ij = x[leader - 1] - x[neighbour - 1];
            acc += ch
                .drive(x_ij, t)
                .map_err(|source| SimError::OutOfFunnel { edge: k, source })?;
        }
        u.push(-acc);
    }
    Ok(u)
}

/// Node derivative `ẋ` in matrix form.
pub fn node_rhs(
    dm: &DerivedMatrices,
    channels: &[EdgeChannel],
    x: &DVector<f64>,
    t: f64,
    mode: Mode,
) -> Result<DVector<f64>, SimError> {
    let consensus = -(&dm.laplacian * x);
    match mode {
        Mode::NoControl => Ok(consensus),
        Mode::LeaderPpc => Ok(consensus + &dm.b * control_input(dm, channels, x, t)?),
        Mode::AllAgentsPpc => {
            check_channels(dm.m(), channels)?;
            let w = drives(channels, &dm.edge_states(x), t)?;
            Ok(consensus - &dm.d * w)
        }
    }
}

/// `V = ½ εᵀ G ε + (γ/2) x̄ᵀ x̄`.
pub fn lyapunov(channels: &[EdgeChannel], gamma: f64, xbar: &[f64], t: f64) -> Result<f64, SimError> {
    check_channels(xbar.len(), channels)?;
    let mut v = 0.0;
    for (k, (ch, &x)) in channels.iter().zip(xbar).enumerate() {
        let eps = ch
            .epsilon(x, t)
            .map_err(|source| SimError::OutOfFunnel { edge: k, source })?;
        v += 0.5 * ch.gain * eps * eps + 0.5 * gamma * x * x;
    }
    Ok(v)
}

pub fn centroid(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Upper bound on the spectral radius of the edge-space Jacobian at
/// consensus once every funnel has contracted to `ρ∞`:
/// `‖L_e + P·diag(g T'(0)² / ρ∞²)‖_∞` with `P` the actuation Gram matrix.
pub fn stiffness_estimate(dm: &DerivedMatrices, channels: &[EdgeChannel], mode: Mode) -> f64 {
    let m = dm.m();
    let p = match mode {
        Mode::NoControl => DMatrix::zeros(m, m),
        Mode::LeaderPpc => dm.di_t_di.clone(),
        Mode::AllAgentsPpc => dm.edge_laplacian.clone(),
    };
    let mut worst: f64 = 0.0;
    for r in 0..m {
        let mut row = 0.0;
        for c in 0..m {
            let ch = &channels[c];
            let k = ch.gain * ch.centre_slope().powi(2) / ch.spec.rho_inf.powi(2);
            row += (dm.edge_laplacian[(r, c)] + p[(r, c)] * k).abs();
        }
        worst = worst.max(row);
    }
    worst
}

/// RK4 substeps per output step keeping `h · λ_est <= 1`.
pub fn suggested_substeps(dm: &DerivedMatrices, channels: &[EdgeChannel], cfg: &SimConfig) -> usize {
    let lambda = stiffness_estimate(dm, channels, cfg.mode);
    ((cfg.dt * lambda / STIFFNESS_TARGET).ceil() as usize).max(1)
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn step<F>(&mut self, f: &mut F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        f(t, y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Edge-list form of the closed loop used inside the integrator.
struct Plant<'a> {
    edges: Vec<(usize, usize)>,
    channels: &'a [EdgeChannel],
    mode: Mode,
    leader: Vec<bool>,
    actuated: Vec<bool>,
}

impl<'a> Plant<'a> {
    fn new(topology: &Topology, channels: &'a [EdgeChannel], mode: Mode) -> Self {
        let edges: Vec<_> = topology.edges().iter().map(|&(h, t)| (h - 1, t - 1)).collect();
        let leader: Vec<bool> = (1..=topology.n()).map(|v| topology.is_leader(v)).collect();
        let actuated = edges
            .iter()
            .map(|&(h, t)| match mode {
                Mode::NoControl => false,
                Mode::LeaderPpc => leader[h] || leader[t],
                Mode::AllAgentsPpc => true,
            })
            .collect();
        Self {
            edges,
            channels,
            mode,
            leader,
            actuated,
        }
    }

    /// Writes `ẋ` into `out`; returns whether any stage value was clamped.
    fn rhs(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut clamped = false;
        for (k, &(h, tail)) in self.edges.iter().enumerate() {
            let xb = x[h] - x[tail];
            out[h] -= xb;
            out[tail] += xb;
            if !self.actuated[k] {
                continue;
            }
            let (w, c) = self.channels[k].drive_clamped(xb, t);
            clamped |= c;
            let all = self.mode == Mode::AllAgentsPpc;
            if all || self.leader[h] {
                out[h] -= w;
            }
            if all || self.leader[tail] {
                out[tail] += w;
            }
        }
        clamped
    }

    fn inputs(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut full = vec![0.0; n];
        for (k, &(h, tail)) in self.edges.iter().enumerate() {
            if !self.actuated[k] {
                continue;
            }
            let (w, _) = self.channels[k].drive_clamped(x[h] - x[tail], t);
            full[h] -= w;
            full[tail] += w;
        }
        match self.mode {
            Mode::AllAgentsPpc => full,
            _ => (0..n).filter(|&i| self.leader[i]).map(|i| full[i]).collect(),
        }
    }
}

/// Integrates the closed loop from node positions `x0` over `[0, t_end]`.
///
/// Funnel exits are recorded in the trace, they do not stop the run.
pub fn integrate(
    topology: &Topology,
    channels: &[EdgeChannel],
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    check_channels(topology.m(), channels)?;
    if x0.len() != topology.n() {
        return Err(SimError::DimensionMismatch(format!(
            "{} initial positions for {} agents",
            x0.len(),
            topology.n()
        )));
    }
    let xbar0 = topology.edge_states(x0);
    for (k, (ch, &value)) in channels.iter().zip(&xbar0).enumerate() {
        if !ch.region.contains(ch.modulated(value, 0.0)) {
            let (lo, hi) = ch.bounds(0.0);
            return Err(SimError::InitialConditionOutsideFunnel { edge: k, value, lo, hi });
        }
    }

    let dm = derive_matrices(topology);
    let substeps = cfg.substeps.unwrap_or_else(|| suggested_substeps(&dm, channels, cfg));
    let h = cfg.dt / substeps as f64;
    let steps = cfg.steps();
    let plant = Plant::new(topology, channels, cfg.mode);
    let scale = 1.0 + cfg.violation_margin;

    let mut trace = SimTrace {
        times: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        xbar: Vec::with_capacity(steps + 1),
        rho: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        violations: Vec::new(),
        step_violated: Vec::with_capacity(steps + 1),
        converged_at: None,
        substeps,
        clamped_stages: 0,
    };

    let record = |trace: &mut SimTrace, t: f64, x: &[f64], violated: bool| {
        let xbar = topology.edge_states(x);
        trace
            .v
            .push(lyapunov(channels, cfg.gamma, &xbar, t).unwrap_or(f64::INFINITY));
        trace.rho.push(channels.iter().map(|c| c.rho(t)).collect());
        trace.u.push(plant.inputs(t, x));
        trace.times.push(t);
        trace.x.push(x.to_vec());
        trace.xbar.push(xbar);
        trace.step_violated.push(violated);
    };

    let mut x = x0.to_vec();
    record(&mut trace, 0.0, &x, false);

    let mut rk = Rk4::new(x.len());
    let mut clamped_stages = 0usize;
    let mut f = |t: f64, y: &[f64], out: &mut [f64]| {
        if plant.rhs(t, y, out) {
            clamped_stages += 1;
        }
    };

    for k in 0..steps {
        let t0 = k as f64 * cfg.dt;
        let mut violated = false;
        for j in 0..substeps {
            let t = t0 + j as f64 * h;
            rk.step(&mut f, t, &mut x, h);
            let t_next = if j + 1 == substeps {
                (k + 1) as f64 * cfg.dt
            } else {
                t0 + (j + 1) as f64 * h
            };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NumericalBlowup { time: t_next });
            }
            for (e, &(hd, tl)) in plant.edges.iter().enumerate() {
                let value = x[hd] - x[tl];
                let (lo, hi) = channels[e].bounds(t_next);
                let bound = if value >= hi * scale {
                    hi * scale
                } else if value <= lo * scale {
                    lo * scale
                } else {
                    continue;
                };
                violated = true;
                trace.violations.push(Violation {
                    time: t_next,
                    edge: e,
                    value,
                    bound,
                });
            }
        }
        record(&mut trace, (k + 1) as f64 * cfg.dt, &x, violated);
    }
    trace.clamped_stages = clamped_stages;

    let mut first_settled = None;
    for k in (0..trace.len()).rev() {
        if trace.max_abs_xbar(k) < cfg.consensus_tol {
            first_settled = Some(k);
        } else {
            break;
        }
    }
    trace.converged_at = first_settled.map(|k| trace.times[k]);
    Ok(trace)
}

/// Samples of a linear edge-space system `ẏ = A y`.
#[derive(Debug, Clone)]
pub struct LinearTrace {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

/// Integrates `ẏ = A y` with the same RK4 stepper used by [`integrate`],
/// one step per `dt`.
pub fn integrate_linear(a: &DMatrix<f64>, y0: &DVector<f64>, dt: f64, t_end: f64) -> LinearTrace {
    assert!(a.is_square() && a.nrows() == y0.len());
    let steps = (t_end / dt + 1e-9).floor() as usize;
    let mut y: Vec<f64> = y0.iter().copied().collect();
    let mut rk = Rk4::new(y.len());
    let mut f = |_t: f64, s: &[f64], out: &mut [f64]| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..s.len()).map(|c| a[(r, c)] * s[c]).sum();
        }
    };
    let mut times = vec![0.0];
    let mut states = vec![y0.clone()];
    for k in 0..steps {
        rk.step(&mut f, k as f64 * dt, &mut y, dt);
        times.push((k + 1) as f64 * dt);
        states.push(DVector::from_column_slice(&y));
    }
    LinearTrace { times, states }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_chain, make_star};
    use crate::performance::PerformanceSpec;

    fn spec() -> PerformanceSpec {
        PerformanceSpec::new(5.0, 0.1, 1.0, 1.0).unwrap()
    }

    fn unit_channels(xbar0: &[f64]) -> Vec<EdgeChannel> {
        xbar0
            .iter()
            .map(|&x| EdgeChannel::new(spec(), x, 1.0).unwrap())
            .collect()
    }

    #[test]
    fn zero_input_at_consensus() {
        let t = make_star(4, &[4]).unwrap();
        let dm = derive_matrices(&t);
        let ch = unit_channels(&[1.0, 1.0, 1.0]);
        let x = DVector::from_element(4, 2.5);
        assert_eq!(control_input(&dm, &ch, &x, 0.3).unwrap(), DVector::zeros(1));
        for mode in [Mode::NoControl, Mode::LeaderPpc, Mode::AllAgentsPpc] {
            assert_eq!(node_rhs(&dm, &ch, &x, 0.3, mode).unwrap(), DVector::zeros(4));
        }
    }

    #[test]
    fn single_edge_leader_input() {
        let t = make_chain(2, 1).unwrap();
        let dm = derive_matrices(&t);
        let ch = unit_channels(&[1.0]);
        let u = control_input(&dm, &ch, &DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap();
        let eps = (1.2f64 / 0.8).ln();
        let jac = 2.0 / (1.0 - 0.04) / 5.0;
        assert!((u[0] - jac * eps).abs() < 1e-15);
        assert!((u[0] - 0.168944).abs() < 1e-6);
    }

    #[test]
    fn symmetric_star_input_cancels() {
        let t = make_star(3, &[3]).unwrap();
        let dm = derive_matrices(&t);
        let a = 0.7;
        let ch = unit_channels(&[a, -a]);
        let u = control_input(&dm, &ch, &DVector::from_vec(vec![a, -a, 0.0]), 0.2).unwrap();
        assert!(u[0].abs() < 1e-15);
    }

    #[test]
    fn uncontrolled_chain_rhs() {
        let dm = derive_matrices(&make_chain(3, 2).unwrap());
        let ch = unit_channels(&[1.0, 0.0]);
        let dx = node_rhs(&dm, &ch, &DVector::from_vec(vec![1.0, 0.0, 0.0]), 0.0, Mode::NoControl).unwrap();
        assert_eq!(dx, DVector::from_vec(vec![-1.0, 1.0, 0.0]));
    }

    #[test]
    fn out_of_funnel_is_reported_with_edge() {
        let t = make_chain(3, 1).unwrap();
        let dm = derive_matrices(&t);
        let ch = unit_channels(&[1.0, 1.0]);
        let err = control_input(&dm, &ch, &DVector::from_vec(vec![0.0, 0.0, -6.0]), 0.0).unwrap_err();
        assert!(matches!(err, SimError::OutOfFunnel { edge: 1, .. }), "{err:?}");
    }

    #[test]
    fn lyapunov_values() {
        let ch = unit_channels(&[1.0]);
        assert_eq!(lyapunov(&ch, 1.0, &[0.0], 0.0).unwrap(), 0.0);
        let eps = (1.2f64 / 0.8).ln();
        let v = lyapunov(&ch, 1.0, &[1.0], 0.0).unwrap();
        assert!((v - (0.5 * eps * eps + 0.5)).abs() < 1e-15);
        assert!((v - 0.582201).abs() < 1e-6);
    }

    #[test]
    fn centroid_mean() {
        assert_eq!(centroid(&[1.0, 2.0, 3.0]), 2.0);
    }

    #[test]
    fn consensus_start_stays_put() {
        let t = make_star(4, &[4]).unwrap();
        let ch = unit_channels(&[0.0, 0.0, 0.0]);
        let cfg = SimConfig {
            t_end: 1.0,
            ..SimConfig::default()
        };
        let tr = integrate(&t, &ch, &[3.0; 4], &cfg).unwrap();
        assert_eq!(tr.converged_at, Some(0.0));
        assert!(tr.x.iter().all(|x| x.iter().all(|&v| v == 3.0)));
        assert_eq!(tr.len(), 1001);
        assert!(tr.violations.is_empty());
    }

    #[test]
    fn rejects_initial_state_outside_funnel() {
        let t = make_chain(2, 1).unwrap();
        let ch = unit_channels(&[1.0]);
        let err = integrate(&t, &ch, &[5.5, 0.0], &SimConfig::default()).unwrap_err();
        assert!(matches!(err, SimError::InitialConditionOutsideFunnel { edge: 0, .. }));
    }

    #[test]
    fn config_validation() {
        let bad = SimConfig {
            dt: 2.0,
            t_end: 1.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let zero = SimConfig {
            substeps: Some(0),
            ..SimConfig::default()
        };
        assert!(zero.validate().is_err());
        assert_eq!(SimConfig::default().steps(), 10_000);
    }

    #[test]
    fn mode_parsing() {
        for m in [Mode::NoControl, Mode::LeaderPpc, Mode::AllAgentsPpc] {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("ppc".parse::<Mode>().is_err());
    }

    #[test]
    fn edge_list_rhs_matches_matrix_form() {
        let t = make_star(5, &[4, 5]).unwrap();
        let dm = derive_matrices(&t);
        let xbar0 = [1.0, -2.0, 0.5, 3.0];
        let ch: Vec<_> = xbar0
            .iter()
            .enumerate()
            .map(|(k, &x)| EdgeChannel::new(spec(), x, 1.0 + k as f64).unwrap())
            .collect();
        let x = t.positions_from_relative(&[0.4, -1.1, 2.0, -0.3]);
        for mode in [Mode::NoControl, Mode::LeaderPpc, Mode::AllAgentsPpc] {
            let plant = Plant::new(&t, &ch, mode);
            let mut out = vec![0.0; 5];
            assert!(!plant.rhs(0.7, &x, &mut out));
            let reference = node_rhs(&dm, &ch, &DVector::from_column_slice(&x), 0.7, mode).unwrap();
            for i in 0..5 {
                assert!((out[i] - reference[i]).abs() < 1e-12, "{mode}: {out:?} vs {reference}");
            }
        }
    }
}
