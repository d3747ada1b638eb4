//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ppc_consensus::certify::{chain_follower_block, chain_k_factor, default_k_grid, max_gamma, GammaSearch};
use ppc_consensus::scenario::preset;
use ppc_consensus::sim::{centroid, integrate_linear};
use ppc_consensus::{
    certify, derive_matrices, integrate, make_star, run, EdgeChannel, GammaBar, Method, Mode, PerformanceSpec,
    RunSummary, SimConfig, SimTrace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Runs(HashMap<&'static str, (SimTrace, RunSummary)>);

impl Runs {
    fn get(&self, name: &str) -> &(SimTrace, RunSummary) {
        &self.0[name]
    }

    fn summary(&self, name: &str) -> &RunSummary {
        &self.get(name).1
    }
}

const PRESET_RUNS: &[&str] = &[
    "star11",
    "star11-noctl",
    "star11-all",
    "chain5_f2-noctl",
    "chain5_f2-g10",
    "chain5_f2-g200",
    "chain5_f3-noctl",
    "chain5_f3-g100",
    "tree6",
];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn expect_violations(runs: &Runs, name: &str) -> Result<usize, String> {
    let s = runs.summary(name);
    ensure(s.violation_count > 0, || {
        format!("{name}: expected violations, saw none")
    })?;
    Ok(s.violation_count)
}

fn expect_clean<'a>(runs: &'a Runs, name: &str) -> Result<&'a RunSummary, String> {
    let s = runs.summary(name);
    ensure(s.violation_count == 0, || {
        format!(
            "{name}: {} violations, first at t={:?}",
            s.violation_count, s.first_violation
        )
    })?;
    Ok(s)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 3..=11 {
        let dm = derive_matrices(&make_star(n, &[n]).unwrap());
        match max_gamma(&dm, &GammaSearch::default()).gamma_bar {
            GammaBar::Value(g) => {
                ensure((g - 1.0).abs() <= 1e-6, || format!("n={n}: gamma_bar={g}"))?;
                worst = worst.max((g - 1.0).abs());
            }
            other => return Err(format!("n={n}: {other:?}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("max |gamma_bar - 1| = {worst:.1e} over n=3..11 in {secs:.2}s"))
}

fn criterion_2(runs: &Runs) -> Outcome {
    let s = expect_clean(runs, "star11")?;
    ensure(s.final_max_abs_xbar < 0.1, || {
        format!("max|xbar(10)| = {}", s.final_max_abs_xbar)
    })?;
    let v = expect_violations(runs, "star11-noctl")?;
    Ok(format!(
        "leader_ppc clean, max|xbar(10)|={:.2e}; no_control {v} violations",
        s.final_max_abs_xbar
    ))
}

fn criterion_3(runs: &Runs) -> Outcome {
    let v0 = expect_violations(runs, "chain5_f2-noctl")?;
    let v10 = expect_violations(runs, "chain5_f2-g10")?;
    let s = expect_clean(runs, "chain5_f2-g200")?;
    ensure(s.final_max_abs_xbar < 0.1, || {
        format!("max|xbar(10)| = {}", s.final_max_abs_xbar)
    })?;
    Ok(format!(
        "no_control {v0} and g=10 {v10} violations; g=200 clean, max|xbar(10)|={:.2e}",
        s.final_max_abs_xbar
    ))
}

fn criterion_4(runs: &Runs) -> Outcome {
    let v0 = expect_violations(runs, "chain5_f3-noctl")?;
    let s = expect_clean(runs, "chain5_f3-g100")?;
    let t = s.converged_at.ok_or("g=100 did not converge")?;
    Ok(format!(
        "no_control {v0} violations; g=100 clean, converged at t={t:.3}"
    ))
}

fn criterion_5(runs: &Runs) -> Outcome {
    let sc = preset("tree6").unwrap();
    let report = certify(&sc.topology, &derive_matrices(&sc.topology), sc.perf.l);
    ensure(report.method == Method::Theorem1, || {
        format!("method {:?}", report.method)
    })?;
    ensure(report.approved, || "not approved".into())?;
    let g = match report.gamma_bar {
        GammaBar::Value(g) => g,
        GammaBar::UnboundedAbove => f64::INFINITY,
        GammaBar::Infeasible => return Err("Gamma infeasible".into()),
    };
    ensure(g >= 1.0 - 1e-6, || format!("gamma_bar = {g}"))?;
    let s = expect_clean(runs, "tree6")?;
    let t = s.converged_at.ok_or("did not converge")?;
    Ok(format!(
        "theorem1 approved, gamma_bar={g:.9}; clean, converged at t={t:.3}"
    ))
}

fn criterion_6() -> Outcome {
    let grid = default_k_grid();
    let mut ks = Vec::new();
    for n_f in 2..=8 {
        let k = chain_k_factor(n_f, &grid).map_err(|e| e.to_string())?.k_factor;
        if n_f <= 3 {
            ensure((k - 1.0).abs() <= 1e-9, || format!("n_f={n_f}: k={k}"))?;
        } else {
            ensure(k > 1.0 + 1e-6, || format!("n_f={n_f}: k={k}"))?;
        }
        ks.push(format!("{n_f}:{k:.6}"));
    }
    Ok(format!("k = [{}]", ks.join(" ")))
}

fn criterion_7() -> Outcome {
    let x0 = 4.8;
    let a = chain_follower_block(2);
    let trace = integrate_linear(&a, &DVector::from_element(1, x0), 1e-3, 1.0);
    ensure(trace.times.len() == 1001, || format!("{} samples", trace.times.len()))?;
    let worst = trace
        .times
        .iter()
        .zip(&trace.states)
        .skip(1)
        .map(|(t, y)| (y[0] - x0 * (-2.0 * t).exp()).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-8, || format!("max error {worst:.2e}"))?;
    Ok(format!("max |xbar_1 - 4.8 e^(-2t)| = {worst:.2e} over 1000 samples"))
}

fn criterion_8(runs: &Runs) -> Outcome {
    let mut parts = Vec::new();
    for name in ["star11", "tree6", "chain5_f2-g200", "chain5_f3-g100"] {
        let (trace, s) = runs.get(name);
        ensure(s.approved && s.clean(), || format!("{name} not approved and clean"))?;
        let worst_rise = trace
            .v
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(trace.lyapunov_nonincreasing(), || {
            format!("{name}: V rises by {worst_rise:.2e}")
        })?;
        parts.push(format!("{name}(gamma={:.3}, rise {worst_rise:.1e})", s.lyapunov_gamma));
    }
    Ok(parts.join(", "))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut points = 0;
    for i in 0..20 {
        let n = rng.gen_range(2..=10);
        let topo = common::random_tree(&mut rng, n);
        let scan = max_gamma(&derive_matrices(&topo), &GammaSearch::default());
        let bad = scan.schur_mismatches();
        ensure(bad == 0, || format!("tree {i} (n={n}): {bad} disagreements"))?;
        points += scan.grid.len();
    }
    Ok(format!("20 trees, {points} grid points, 0 disagreements"))
}

fn criterion_10(runs: &Runs) -> Outcome {
    let (trace, _) = runs.get("star11-all");
    let c0 = centroid(&trace.x[0]);
    let drift = trace.x.iter().map(|x| (centroid(x) - c0).abs()).fold(0.0, f64::max);
    ensure(drift < 1e-6, || format!("drift {drift:.2e}"))?;
    Ok(format!("max centroid drift {drift:.2e} over {} steps", trace.len()))
}

/// Max error of the simulator against `x̄(t) = exp(-L_e t) x̄(0)`.
fn rk4_error(dt: f64) -> Result<f64, String> {
    let topo = make_star(4, &[4]).unwrap();
    let dm = derive_matrices(&topo);
    let xbar0 = [1.0, -2.0, 0.5];
    let spec = PerformanceSpec::new(5.0, 0.1, 1.0, 1.0).unwrap();
    let channels: Vec<_> = xbar0.iter().map(|&x| EdgeChannel::new(spec, x, 1.0).unwrap()).collect();
    let cfg = SimConfig {
        dt,
        t_end: 2.0,
        mode: Mode::NoControl,
        substeps: Some(1),
        ..SimConfig::default()
    };
    let trace = integrate(&topo, &channels, &topo.positions_from_relative(&xbar0), &cfg).map_err(|e| e.to_string())?;
    let eig = SymmetricEigen::new(dm.edge_laplacian.clone());
    let y0 = DVector::from_column_slice(&xbar0);
    let exact = |t: f64| {
        let decay = eig.eigenvalues.map(|l| (-l * t).exp());
        &eig.eigenvectors * DMatrix::from_diagonal(&decay) * eig.eigenvectors.transpose() * &y0
    };
    Ok(trace
        .times
        .iter()
        .zip(&trace.xbar)
        .map(|(&t, xb)| (DVector::from_column_slice(xb) - exact(t)).amax())
        .fold(0.0, f64::max))
}

fn criterion_11() -> Outcome {
    let (coarse, fine) = (rk4_error(0.1)?, rk4_error(0.05)?);
    let ratio = coarse / fine;
    ensure((8.0..=32.0).contains(&ratio), || format!("order ratio {ratio:.2}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut jac_worst: f64 = 0.0;
    let mut anti_worst: f64 = 0.0;
    for overshoot in [1.0, 0.5, 2.0] {
        let spec = PerformanceSpec::new(5.0, 0.1, 1.0, overshoot).unwrap();
        for x0 in [1.0, -1.0] {
            let ch = EdgeChannel::new(spec, x0, 1.0).unwrap();
            let rev = ch.reversed();
            let (lo, hi) = (ch.region.lo, ch.region.hi);
            let margin = 0.01 * (hi - lo);
            for _ in 0..1000 {
                let t = rng.gen_range(0.0..10.0);
                let rho = spec.rho(t);
                let x_hat = rng.gen_range(lo + margin..hi - margin);
                let h = 1e-5 * rho;
                let x = x_hat * rho;
                let fd = (ch.epsilon(x + h, t).unwrap() - ch.epsilon(x - h, t).unwrap()) / (2.0 * h);
                let jac = ch.jacobian(x_hat, t).unwrap();
                jac_worst = jac_worst.max(((fd - jac) / jac).abs());

                let e = ch.transform(x_hat).unwrap();
                anti_worst = anti_worst.max((rev.transform(-x_hat).unwrap() + e).abs());
                if overshoot == 1.0 {
                    anti_worst = anti_worst.max((ch.transform(-x_hat).unwrap() + e).abs());
                }
            }
        }
    }
    ensure(jac_worst < 1e-6, || format!("jacobian rel error {jac_worst:.2e}"))?;
    ensure(anti_worst < 1e-12, || format!("antisymmetry error {anti_worst:.2e}"))?;
    Ok(format!(
        "RK4 error ratio {ratio:.2} ({coarse:.2e}/{fine:.2e}); jacobian rel err {jac_worst:.1e}; antisymmetry {anti_worst:.1e}"
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = Runs(
        PRESET_RUNS
            .iter()
            .map(|&name| {
                let sc = preset(name).expect("preset exists");
                (name, run(&sc).expect("preset runs"))
            })
            .collect(),
    );

    let results: Vec<(&str, Outcome)> = vec![
        ("star gamma_bar certification", criterion_1()),
        ("star simulation", criterion_2(&runs)),
        ("chain gain escalation", criterion_3(&runs)),
        ("chain three-follower", criterion_4(&runs)),
        ("tree preset", criterion_5(&runs)),
        ("k-factor oracle", criterion_6()),
        ("closed-form follower edge", criterion_7()),
        ("Lyapunov descent", criterion_8(&runs)),
        ("Gamma/Schur equivalence", criterion_9()),
        ("centroid conservation", criterion_10(&runs)),
        ("numerical hygiene", criterion_11()),
    ];

    let mut failed = 0;
    for (i, (title, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {:>2}. {title}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2}. {title}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
