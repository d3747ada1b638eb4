use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ppc_consensus::scenario::{emit, load_scenario_file, preset, OutputFormat, PRESETS};
use ppc_consensus::{certify, derive_matrices, run, GammaBar, Mode, RunSummary, Scenario};
use rayon::prelude::*;

/// Leader-follower consensus under prescribed performance control.
///
/// Exit status: 0 when every scenario is certified and stays inside its
/// funnel, 2 when a run has violations or a decay rate is not certified,
/// 1 on errors.
#[derive(Debug, Parser)]
#[command(name = "ppcsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify and simulate scenarios, writing a trace and summary per scenario.
    Simulate(SimulateArgs),
    /// Certify the decay rate of a scenario without simulating it.
    Certify(CertifyArgs),
    /// List the built-in scenarios.
    Presets {
        /// Also write each preset as a scenario document into this directory.
        #[arg(long, value_name = "DIR")]
        write: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Source {
    /// Scenario documents (JSON).
    #[arg(value_name = "SCENARIO")]
    files: Vec<PathBuf>,
    /// Built-in scenario; may be repeated.
    #[arg(long = "preset", value_name = "NAME")]
    presets: Vec<String>,
}

impl Source {
    fn load(&self) -> Result<Vec<Scenario>> {
        if self.files.is_empty() && self.presets.is_empty() {
            bail!("no scenario given; pass a scenario file or --preset NAME");
        }
        let mut out = Vec::new();
        for path in &self.files {
            out.push(load_scenario_file(path).with_context(|| format!("loading {}", path.display()))?);
        }
        for name in &self.presets {
            out.push(preset(name)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Output sampling step.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// no_control, leader_ppc or all_agents_ppc.
    #[arg(long)]
    mode: Option<Mode>,
    /// RK4 substeps per output step (default: chosen from a stiffness bound).
    #[arg(long)]
    substeps: Option<usize>,
    /// Output root; each scenario writes into DIR/<name>/.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Scenarios to run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    source: Source,
    /// Decay rate to certify instead of the scenario's own.
    #[arg(long)]
    l: Option<f64>,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |t| format!("{t:.3}"))
}

fn fmt_gamma(g: GammaBar) -> String {
    match g {
        GammaBar::Value(v) => format!("{v:.6}"),
        GammaBar::UnboundedAbove => "unbounded".to_string(),
        GammaBar::Infeasible => "infeasible".to_string(),
    }
}

fn summary_line(s: &RunSummary, dir: &Path) -> String {
    format!(
        "{:<16} {:<14} {:<8} method={} gamma_bar={} violations={} converged_at={} max|xbar|={:.3e} V_monotone={} -> {}",
        s.scenario,
        s.mode.as_str(),
        if s.approved { "approved" } else { "REJECTED" },
        s.method.as_str(),
        fmt_gamma(s.gamma_bar),
        s.violation_count,
        fmt_opt(s.converged_at),
        s.final_max_abs_xbar,
        s.v_monotone,
        dir.display(),
    )
}

fn simulate(args: SimulateArgs) -> Result<u8> {
    let mut scenarios = args.source.load()?;
    let mut seen = HashSet::new();
    for sc in &mut scenarios {
        if !seen.insert(sc.name.clone()) {
            bail!("scenario {:?} given twice; output directories would collide", sc.name);
        }
        if let Some(dt) = args.dt {
            sc.sim.dt = dt;
        }
        if let Some(t_end) = args.t_end {
            sc.sim.t_end = t_end;
        }
        if let Some(mode) = args.mode {
            sc.sim.mode = mode;
        }
        if args.substeps.is_some() {
            sc.sim.substeps = args.substeps;
        }
        sc.validate().with_context(|| format!("scenario {}", sc.name))?;
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let results: Vec<Result<(RunSummary, PathBuf)>> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|sc| {
                let (trace, summary) = run(sc).with_context(|| format!("running {}", sc.name))?;
                let dir = args.out.join(&sc.name);
                emit(&trace, &summary, args.format, &dir).with_context(|| format!("writing {}", dir.display()))?;
                Ok((summary, dir))
            })
            .collect()
    });

    let mut code = 0;
    for result in results {
        let (summary, dir) = result?;
        println!("{}", summary_line(&summary, &dir));
        if summary.exit_code() != 0 {
            code = 2;
        }
    }
    Ok(code)
}

fn certify_cmd(args: CertifyArgs) -> Result<u8> {
    let mut code = 0;
    for sc in args.source.load()? {
        let l = args.l.unwrap_or(sc.perf.l);
        let report = certify(&sc.topology, &derive_matrices(&sc.topology), l);
        if args.json {
            println!("{}", serde_json::to_string_pretty(&report)?);
        } else {
            let bound = report.decay_bound.map_or_else(|| "-".to_string(), |b| format!("{b}"));
            println!(
                "{:<16} l={l} method={} gamma_bar={} special_bound={bound} schur_mismatches={} {}",
                sc.name,
                report.method.as_str(),
                fmt_gamma(report.gamma_bar),
                report.schur_mismatches,
                if report.approved { "approved" } else { "REJECTED" },
            );
        }
        if !report.approved {
            code = 2;
        }
    }
    Ok(code)
}

fn presets(write: Option<PathBuf>) -> Result<u8> {
    if let Some(dir) = &write {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for (name, description) in PRESETS {
        println!("{name:<16} {description}");
        if let Some(dir) = &write {
            preset(name)?.save(&dir.join(format!("{name}.json")))?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for violations here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Certify(args) => certify_cmd(args),
        Command::Presets { write } => presets(write),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
