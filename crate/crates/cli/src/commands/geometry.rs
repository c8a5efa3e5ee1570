use std::path::PathBuf;

use gfol_core::flow::fmt12;
use gfol_core::GeometryReport;

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::{print_matrix, print_residuals, write_text};
use crate::source::ModelSource;
use crate::Status;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    source: ModelSource,
    /// Write the full report (Christoffel symbols, curvature, tensors) as JSON.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

pub fn run(args: &Args, manifest: &mut RunManifest) -> Result<Status, CliError> {
    let (model, _) = args.source.load()?;
    manifest.inputs.push(args.source.describe());
    let rep = GeometryReport::compute(&model)?;
    let m = rep.horizontal.len();

    println!(
        "model: {} (dim {}, p = {})",
        rep.model,
        rep.dim,
        rep.vertical.len()
    );
    print_matrix("Ric_perp (curvature route)", m, &rep.ric_perp);
    match (&rep.ric_perp_algebraic, rep.ric_discrepancy) {
        (Some(alg), Some(d)) => {
            print_matrix("Ric_perp (-sum T#^2)", m, alg);
            println!("route discrepancy: {}", fmt12(d));
        }
        _ => println!("model is not compatible; algebraic route skipped"),
    }
    for (i, t) in rep.tsharp.iter().enumerate() {
        print_matrix(&format!("T#_{}", i + 1), m, t);
    }
    let r = &rep.residuals;
    println!("residuals:");
    let mut rows = vec![
        ("metric_compatibility", r.metric_compatibility),
        ("torsion", r.torsion),
        ("curvature_symmetry", r.curvature_symmetry),
        ("bianchi", r.bianchi),
        ("splitting", r.splitting),
        ("totally_geodesic", r.totally_geodesic),
        ("riemannian", r.riemannian),
    ];
    if let Some(v) = r.mixed_jacobi {
        rows.push(("mixed_jacobi", v));
    }
    if let Some(v) = r.commutator_identity {
        rows.push(("commutator_identity", v));
    }
    print_residuals(rows);

    manifest.config = serde_json::json!({});
    if let Some(path) = &args.json {
        write_text(
            path,
            &serde_json::to_string_pretty(&rep).expect("report serializes"),
        )?;
        manifest.output(path);
    }
    Ok(Status::Ok)
}
