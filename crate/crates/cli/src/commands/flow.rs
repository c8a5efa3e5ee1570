use std::path::{Path, PathBuf};

use gfol_core::flow::{fmt12, RetractionReport};
use gfol_core::{
    integrate_flow, retract_and_verify, FlowConfig, FlowError, FlowTrajectory, LieFoliationModel,
};

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::write_text;
use crate::source::ModelSource;
use crate::Status;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    source: ModelSource,
    /// Target Einstein constant Φ.
    #[arg(long, required_unless_present = "sweep_phi")]
    phi: Option<f64>,
    /// Run one flow per value, concurrently (comma separated).
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "phi",
        value_name = "PHI,.."
    )]
    sweep_phi: Vec<f64>,
    /// Horizon; defaults to -max(3, 6/(4Φ)).
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Convergence tolerance on ‖Ric⊥ - Φ id‖∞.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Record every k-th step.
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    /// Verify the classical structure at the limit metric.
    #[arg(long)]
    retract: bool,
    /// Trajectory output; `.csv` selects CSV, anything else JSON. Sweeps
    /// insert `-phi<value>` before the extension.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the retraction report as JSON.
    #[arg(long, value_name = "PATH", requires = "retract")]
    report: Option<PathBuf>,
}

struct Run {
    cfg: FlowConfig,
    trajectory: Result<FlowTrajectory, FlowError>,
    retraction: Option<Result<RetractionReport, FlowError>>,
}

pub fn run(args: &Args, manifest: &mut RunManifest) -> Result<Status, CliError> {
    let (model, _) = args.source.load()?;
    manifest.inputs.push(args.source.describe());
    let phis: Vec<f64> = match args.phi {
        Some(phi) => vec![phi],
        None => args.sweep_phi.clone(),
    };
    let configs: Vec<FlowConfig> = phis.iter().map(|&phi| config(args, phi)).collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    manifest.config = serde_json::json!({ "runs": configs, "retract": args.retract });

    let runs: Vec<Run> = if configs.len() == 1 {
        vec![execute(&model, &configs[0], args.retract)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .map(|cfg| scope.spawn(|| execute(&model, cfg, args.retract)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("flow worker panicked"))
                .collect()
        })
    };

    let sweep = runs.len() > 1;
    let mut status = Status::Ok;
    let mut first_error = None;
    for run in runs {
        let cfg = &run.cfg;
        println!(
            "model: {}  phi: {}  t_end: {}  dt: {}",
            model.name(),
            fmt12(cfg.phi),
            fmt12(cfg.t_end),
            fmt12(cfg.dt)
        );
        let traj = match run.trajectory {
            Ok(t) => t,
            Err(e) => {
                if sweep {
                    println!("  error: {e}");
                }
                first_error.get_or_insert(e);
                continue;
            }
        };
        summarize(&traj, cfg);
        if let Some(path) = &args.out {
            let path = if sweep {
                suffixed(path, cfg.phi)
            } else {
                path.clone()
            };
            write_trajectory(&traj, &path)?;
            manifest.output(&path);
        }
        if !traj.converged {
            status = status.max(Status::NotConverged);
        }
        match run.retraction {
            Some(Ok(rep)) => {
                summarize_retraction(&rep);
                if !rep.passes {
                    status = status.max(Status::ExpectationFailed);
                }
                if let Some(path) = &args.report {
                    let path = if sweep {
                        suffixed(path, cfg.phi)
                    } else {
                        path.clone()
                    };
                    write_text(
                        &path,
                        &serde_json::to_string_pretty(&rep).expect("report serializes"),
                    )?;
                    manifest.output(&path);
                }
            }
            Some(Err(e)) => {
                println!("  retraction: {e}");
                if !matches!(e, FlowError::NotConverged(_)) {
                    first_error.get_or_insert(e);
                }
            }
            None => {}
        }
    }
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(status),
    }
}

fn config(args: &Args, phi: f64) -> FlowConfig {
    let mut cfg = FlowConfig::new(phi)
        .with_dt(args.dt)
        .with_tol(args.tol)
        .with_record_every(args.record_every);
    if let Some(t) = args.t_end {
        cfg = cfg.with_t_end(t);
    }
    cfg
}

fn execute(model: &LieFoliationModel, cfg: &FlowConfig, retract: bool) -> Run {
    let trajectory = integrate_flow(model, cfg);
    let retraction = match (&trajectory, retract) {
        (Ok(t), true) if t.converged => Some(retract_and_verify(model, cfg)),
        (Ok(t), true) => Some(Err(FlowError::NotConverged(t.last().deviation))),
        _ => None,
    };
    Run {
        cfg: cfg.clone(),
        trajectory,
        retraction,
    }
}

fn summarize(traj: &FlowTrajectory, cfg: &FlowConfig) {
    let last = traj.last();
    let eigs: Vec<String> = last.ric_eigs.iter().map(|v| fmt12(*v)).collect();
    println!("  samples: {}", traj.samples.len());
    println!("  ric_eigs(t_end): [{}]", eigs.join(", "));
    println!("  deviation(t_end): {}", fmt12(last.deviation));
    match traj.converged_at {
        Some(t) if traj.converged => {
            println!("  converged: yes (first within tol at t = {})", fmt12(t))
        }
        _ => println!("  converged: no"),
    }
    match traj.rate_estimate {
        Some(r) => println!("  rate: {} (4*phi = {})", fmt12(r), fmt12(4.0 * cfg.phi)),
        None => println!("  rate: n/a (too few samples in the fit window)"),
    }
    let worst = |key: &str| {
        traj.samples
            .iter()
            .filter_map(|s| s.residuals.get(key))
            .fold(0.0_f64, |a, &b| a.max(b))
    };
    let keys = [
        "ode",
        "tsharp",
        "commutator",
        "compat",
        "a_shape",
        "normality",
        "vertical_drift",
    ];
    let parts: Vec<String> = keys
        .iter()
        .map(|k| format!("{k}={}", fmt12(worst(k))))
        .collect();
    println!("  max residuals: {}", parts.join(" "));
}

fn summarize_retraction(rep: &RetractionReport) {
    println!("  retraction ({}):", rep.kind);
    println!("    at horizon: {}", rep.at_horizon.label);
    println!("    at limit:   {}", rep.at_limit.label);
    println!("    |G(t_end) - G_limit|: {}", fmt12(rep.limit_distance));
    println!("    |Q - id|: {}", fmt12(rep.q_deviation));
    println!("    classical axioms: {}", fmt12(rep.classical_axioms));
    if let Some(c) = rep.composition {
        println!("    composition table: {}", fmt12(c));
    }
    println!(
        "    mixed sectional curvature: [{}, {}] (expected {})",
        fmt12(rep.mixed_sectional.0),
        fmt12(rep.mixed_sectional.1),
        fmt12(rep.mixed_sectional_expected)
    );
    println!("    verified: {}", if rep.passes { "yes" } else { "NO" });
}

fn suffixed(path: &Path, phi: f64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-phi{phi}.{}", ext.to_string_lossy()),
        None => format!("{stem}-phi{phi}"),
    };
    path.with_file_name(name)
}

fn write_trajectory(traj: &FlowTrajectory, path: &Path) -> Result<(), CliError> {
    if path.extension().is_some_and(|e| e == "csv") {
        let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        traj.write_csv(file)
            .map_err(|e| CliError::io(path, std::io::Error::other(e)))
    } else {
        write_text(path, &traj.to_json())
    }
}
