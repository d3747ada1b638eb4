//! Runs every built-in scenario and prints a one-line summary for each.

use std::time::Instant;

use ppc_consensus::scenario::{preset, run, PRESETS};

fn main() {
    for (name, description) in PRESETS {
        if description.starts_with("alias") {
            continue;
        }
        let sc = preset(name).expect("preset");
        let start = Instant::now();
        match run(&sc) {
            Ok((trace, s)) => println!(
                "{:<16} mode={:<15} approved={:<5} method={} gamma={:.6} violations={:<5} first={:?} converged={:?} final|xbar|={:.3e} drift={:.2e} V_mono={} substeps={} clamped={} ({:.2?})",
                s.scenario,
                s.mode,
                s.approved,
                s.method.as_str(),
                s.lyapunov_gamma,
                s.violation_count,
                s.first_violation,
                s.converged_at,
                s.final_max_abs_xbar,
                s.centroid_drift,
                s.v_monotone,
                s.substeps,
                trace.clamped_stages,
                start.elapsed()
            ),
            Err(e) => println!("{name:<16} error: {e}"),
        }
    }
}
