//! Decay-rate certification.
//!
//! A funnel decay rate `l` is certified for a tree when `l <= γ̄`, the largest
//! `γ` with
//!
//! ```text
//!       ⎡ D_iᵀD_i                    ½(L_e - γ(I - D_iᵀD_i)) ⎤
//! Γ(γ) = ⎢                                                   ⎥ ⪰ 0.
//!       ⎣ ½(L_e - γ(I - D_iᵀD_i))    γ L_e                   ⎦
//! ```
//!
//! `Γ` is affine in `γ`, so `λ_min(Γ(γ))` is concave and the feasible set is
//! an interval, possibly a single point (a star with its centre as the only
//! leader is feasible at `γ = 1` alone). The search therefore maximises
//! `λ_min` first and only then looks for the right end of the feasible set.
//!
//! Chains with two or three followers and stars led from the centre have
//! dedicated bounds that hold even where `Γ` is infeasible.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DerivedMatrices, Topology};

/// Default PSD tolerance on the minimum eigenvalue.
pub const PSD_TOL: f64 = 1e-9;

/// Slack allowed when comparing `γ̄` with the requested decay rate; matches
/// the resolution of the supremum search.
pub const APPROVAL_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("wrong topology: {0}")]
    WrongTopology(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaBar {
    Value(f64),
    UnboundedAbove,
    Infeasible,
}

impl GammaBar {
    /// Whether this `γ̄` covers decay rate `l`.
    pub fn admits(&self, l: f64) -> bool {
        match *self {
            GammaBar::Value(g) => g >= l - APPROVAL_SLACK,
            GammaBar::UnboundedAbove => true,
            GammaBar::Infeasible => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Theorem1,
    ChainSpecial,
    StarSpecial,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Theorem1 => "theorem1",
            Method::ChainSpecial => "chain_special",
            Method::StarSpecial => "star_special",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub gamma_bar: GammaBar,
    /// Largest requested decay rate.
    pub l_max: f64,
    pub approved: bool,
    /// `(γ, λ_min(Γ(γ)))` over the scan grid.
    pub gamma_grid_spectra: Vec<(f64, f64)>,
    pub method: Method,
    /// Decay bound of the chain or star special case, when one applies.
    pub decay_bound: Option<f64>,
    /// Grid points where the Γ and Schur-complement verdicts differ.
    pub schur_mismatches: usize,
    /// Smallest feasible grid `γ`, if any.
    pub gamma_lo: Option<f64>,
}

impl FeasibilityReport {
    /// `γ` to use in the Lyapunov monitor: `γ̄` on the general path, 1 for the
    /// special cases.
    pub fn lyapunov_gamma(&self) -> f64 {
        match (self.method, self.gamma_bar) {
            (Method::Theorem1, GammaBar::Value(g)) => g,
            (Method::Theorem1, GammaBar::UnboundedAbove) => {
                self.l_max.max(self.gamma_lo.unwrap_or(1.0)).max(f64::MIN_POSITIVE)
            }
            _ => 1.0,
        }
    }
}

/// `Γ(γ)`, 2m × 2m.
pub fn gamma_matrix(dm: &DerivedMatrices, gamma: f64) -> DMatrix<f64> {
    let m = dm.m();
    let off = cross_block(dm, gamma) * 0.5;
    let mut g = DMatrix::zeros(2 * m, 2 * m);
    g.view_mut((0, 0), (m, m)).copy_from(&dm.di_t_di);
    g.view_mut((0, m), (m, m)).copy_from(&off);
    g.view_mut((m, 0), (m, m)).copy_from(&off);
    g.view_mut((m, m), (m, m)).copy_from(&(&dm.edge_laplacian * gamma));
    g
}

/// `L_e - γ (I - D_iᵀD_i)`.
fn cross_block(dm: &DerivedMatrices, gamma: f64) -> DMatrix<f64> {
    let m = dm.m();
    &dm.edge_laplacian - (DMatrix::identity(m, m) - &dm.di_t_di) * gamma
}

/// Minimum eigenvalue of a symmetric matrix and the verdict
/// `λ_min >= -tol`.
pub fn min_eig_psd(m: &DMatrix<f64>, tol: f64) -> Result<(f64, bool), CertifyError> {
    if !m.is_square() {
        return Err(CertifyError::InvalidArgument("matrix is not square".into()));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 {
        return Err(CertifyError::NotSymmetric(asym));
    }
    let lambda = min_eig(m);
    Ok((lambda, lambda >= -tol))
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn gamma_min_eig(dm: &DerivedMatrices, gamma: f64) -> f64 {
    min_eig(&gamma_matrix(dm, gamma))
}

/// PSD test through the Schur complement of the `γ L_e` block:
/// `D_iᵀD_i - S L_e⁻¹ S / (4γ) ⪰ 0` with `S = L_e - γ(I - D_iᵀD_i)`.
///
/// Returns the minimum eigenvalue of the complement and the verdict.
pub fn schur_psd(dm: &DerivedMatrices, gamma: f64, tol: f64) -> Result<(f64, bool), CertifyError> {
    if !(gamma > 0.0) {
        return Err(CertifyError::InvalidArgument("gamma must be positive".into()));
    }
    let chol = dm
        .edge_laplacian
        .clone()
        .cholesky()
        .ok_or_else(|| CertifyError::WrongTopology("edge Laplacian is not positive definite".into()))?;
    let s = cross_block(dm, gamma);
    let le_inv_s = chol.solve(&s);
    let mut comp = &dm.di_t_di - (&s * le_inv_s) / (4.0 * gamma);
    comp = (&comp + comp.transpose()) * 0.5;
    let lambda = min_eig(&comp);
    Ok((lambda, lambda >= -tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSearch {
    pub gamma_min: f64,
    pub gamma_cap: f64,
    pub points: usize,
    pub psd_tol: f64,
}

impl Default for GammaSearch {
    fn default() -> Self {
        Self {
            gamma_min: 1e-3,
            gamma_cap: 1e3,
            points: 400,
            psd_tol: PSD_TOL,
        }
    }
}

impl GammaSearch {
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.gamma_min.ln(), self.gamma_cap.ln());
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.gamma_cap
                } else {
                    (lo + (hi - lo) * i as f64 / last).exp()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub gamma: f64,
    pub min_eig: f64,
    pub psd: bool,
    pub schur_min_eig: f64,
    pub schur_psd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaScan {
    pub gamma_bar: GammaBar,
    pub grid: Vec<GridPoint>,
    /// Maximiser of `λ_min(Γ(γ))` on `[gamma_min, gamma_cap]` and its value.
    pub peak: (f64, f64),
}

impl GammaScan {
    pub fn schur_mismatches(&self) -> usize {
        self.grid.iter().filter(|p| p.psd != p.schur_psd).count()
    }

    pub fn gamma_lo(&self) -> Option<f64> {
        self.grid.iter().find(|p| p.psd).map(|p| p.gamma)
    }
}

/// Golden-section maximisation of a unimodal function on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-13 * b.abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Finds `γ̄`, the supremum of `{γ : Γ(γ) ⪰ 0}` on the search range.
pub fn max_gamma(dm: &DerivedMatrices, search: &GammaSearch) -> GammaScan {
    let tol = search.psd_tol;
    let grid: Vec<GridPoint> = search
        .grid()
        .into_iter()
        .map(|gamma| {
            let min_eig = gamma_min_eig(dm, gamma);
            let (schur_min_eig, schur_psd) = schur_psd(dm, gamma, tol).unwrap_or((f64::NAN, false));
            GridPoint {
                gamma,
                min_eig,
                psd: min_eig >= -tol,
                schur_min_eig,
                schur_psd,
            }
        })
        .collect();

    let best = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.min_eig.total_cmp(&b.1.min_eig))
        .map(|(i, _)| i)
        .expect("search grid is empty");
    let lo = grid[best.saturating_sub(1)].gamma;
    let hi = grid[(best + 1).min(grid.len() - 1)].gamma;
    let f = |g: f64| gamma_min_eig(dm, g);
    let mut peak = golden_max(f, lo, hi);
    if grid[best].min_eig > peak.1 {
        peak = (grid[best].gamma, grid[best].min_eig);
    }

    let last = grid.last().unwrap();
    let gamma_bar = if peak.1 < -tol {
        GammaBar::Infeasible
    } else if last.psd {
        GammaBar::UnboundedAbove
    } else if peak.1 <= 0.0 {
        // tangential feasibility: the feasible set is (numerically) the peak
        GammaBar::Value(peak.0)
    } else {
        let right = grid
            .iter()
            .find(|p| p.gamma > peak.0 && p.min_eig < 0.0)
            .map(|p| p.gamma)
            .unwrap_or(last.gamma);
        let (mut a, mut b) = (peak.0, right);
        while b - a > 1e-12 * b.max(1.0) {
            let mid = 0.5 * (a + b);
            if f(mid) >= 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        GammaBar::Value(a)
    };
    GammaScan { gamma_bar, grid, peak }
}

fn report_from_scan(
    scan: &GammaScan,
    l_max: f64,
    method: Method,
    decay_bound: Option<f64>,
    approved: bool,
) -> FeasibilityReport {
    FeasibilityReport {
        gamma_bar: scan.gamma_bar,
        l_max,
        approved,
        gamma_grid_spectra: scan.grid.iter().map(|p| (p.gamma, p.min_eig)).collect(),
        method,
        decay_bound,
        schur_mismatches: scan.schur_mismatches(),
        gamma_lo: scan.gamma_lo(),
    }
}

/// General-tree check: approved iff `γ̄ >= l_max`.
pub fn check_theorem1(dm: &DerivedMatrices, l_max: f64) -> FeasibilityReport {
    let scan = max_gamma(dm, &GammaSearch::default());
    let approved = scan.gamma_bar.admits(l_max);
    report_from_scan(&scan, l_max, Method::Theorem1, None, approved)
}

/// Decay bound for a chain whose first `n_f` vertices are followers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainBound {
    /// A single follower: the general condition applies.
    DeferToTheorem1,
    Bound(f64),
    /// Four or more followers: no decay rate is guaranteed.
    NoGuarantee,
}

pub fn chain_bound(n_followers: usize) -> ChainBound {
    match n_followers {
        0 | 1 => ChainBound::DeferToTheorem1,
        2 => ChainBound::Bound(2.0),
        3 => ChainBound::Bound(1.0),
        _ => ChainBound::NoGuarantee,
    }
}

/// Decay bound for a star led from its centre.
pub fn star_bound(topology: &Topology) -> Result<f64, CertifyError> {
    if !topology.is_star() {
        return Err(CertifyError::WrongTopology("not a star centred on vertex n".into()));
    }
    if topology.leaders() != [topology.n()] {
        return Err(CertifyError::WrongTopology(format!(
            "star bound needs the centre {} as the only leader, got {:?}",
            topology.n(),
            topology.leaders()
        )));
    }
    Ok(1.0)
}

/// Zero-input analysis of the follower edges of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainAnalysis {
    pub n_followers: usize,
    /// Follower-edge block, tridiagonal with -2 on the diagonal and 1 beside it.
    pub a: DMatrix<f64>,
    pub lambda_max: f64,
    /// Smallest `k` with `|x̄⁰(t)| <= k ρ₀ e^{λ_max t}` for unit-scaled
    /// initial conditions, sampled on the grid and at `t → ∞`.
    pub k_factor: f64,
    pub admissible_l: Option<f64>,
}

pub fn chain_follower_block(n_followers: usize) -> DMatrix<f64> {
    let d = n_followers.saturating_sub(1);
    DMatrix::from_fn(d, d, |r, c| match r.abs_diff(c) {
        0 => -2.0,
        1 => 1.0,
        _ => 0.0,
    })
}

/// Default time grid for [`chain_k_factor`]: `[0, 10]` in steps of `1e-3`.
pub fn default_k_grid() -> Vec<f64> {
    (0..=10_000).map(|i| i as f64 * 1e-3).collect()
}

fn max_abs_row_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn chain_k_factor(n_followers: usize, t_grid: &[f64]) -> Result<ChainAnalysis, CertifyError> {
    if n_followers < 2 {
        return Err(CertifyError::InvalidArgument(format!(
            "need at least 2 followers for a follower-edge block, got {n_followers}"
        )));
    }
    let a = chain_follower_block(n_followers);
    let eig = SymmetricEigen::new(a.clone());
    let (imax, lambda_max) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap();
    let v = &eig.eigenvectors;
    let shifted_exp = |t: f64| {
        let decay = eig.eigenvalues.map(|l| ((l - lambda_max) * t).exp());
        v * DMatrix::from_diagonal(&decay) * v.transpose()
    };
    let limit = v.column(imax) * v.column(imax).transpose();
    let k_factor = t_grid
        .iter()
        .map(|&t| max_abs_row_sum(&shifted_exp(t)))
        .fold(max_abs_row_sum(&limit), f64::max);
    let admissible_l = match chain_bound(n_followers) {
        ChainBound::Bound(b) => Some(b),
        _ => None,
    };
    Ok(ChainAnalysis {
        n_followers,
        a,
        lambda_max,
        k_factor,
        admissible_l,
    })
}

/// Certifies decay rate `l_max`, routing chains with 2+ followers and stars
/// led from the centre through their dedicated bounds.
pub fn certify(topology: &Topology, dm: &DerivedMatrices, l_max: f64) -> FeasibilityReport {
    let scan = max_gamma(dm, &GammaSearch::default());
    let general = scan.gamma_bar.admits(l_max);
    if let Ok(bound) = star_bound(topology) {
        return report_from_scan(
            &scan,
            l_max,
            Method::StarSpecial,
            Some(bound),
            general || l_max <= bound,
        );
    }
    if topology.is_chain() && topology.n_followers() >= 2 {
        let (bound, ok) = match chain_bound(topology.n_followers()) {
            ChainBound::Bound(b) => (Some(b), l_max <= b),
            _ => (None, false),
        };
        return report_from_scan(&scan, l_max, Method::ChainSpecial, bound, general || ok);
    }
    report_from_scan(&scan, l_max, Method::Theorem1, None, general)
}
