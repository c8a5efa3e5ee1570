use std::path::PathBuf;

use gfol_core::structures::{
    check_axioms, check_metric_compat, default_kind, perturb_structure,
    random_commuting_perturbation, slug, FramedStructure, StructureKind,
};
use gfol_core::{classify, Classification};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::{print_residuals, write_text};
use crate::source::ModelSource;
use crate::Status;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    source: ModelSource,
    /// Structure kind: contact, p_contact, f_structure or para_phi. Defaults
    /// to the structure embedded in the model file, else to the model's
    /// natural kind.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<StructureKind>,
    /// Target class, as a label or slug (e.g. `sasakian-classical`).
    #[arg(long)]
    expect: Option<String>,
    /// Write the report as JSON (`-` for stdout).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Also check N random commuting perturbations of the structure.
    #[arg(long, value_name = "N")]
    perturb: Option<usize>,
    /// Entry scale of the random perturbations.
    #[arg(long, default_value_t = 0.3)]
    scale: f64,
    /// Seed for `--perturb`; the GFOL_SEED environment variable overrides it.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_kind(s: &str) -> Result<StructureKind, String> {
    StructureKind::parse(s).ok_or_else(|| format!("unknown structure kind `{s}`"))
}

#[derive(Serialize)]
struct PerturbationSummary {
    seed: u64,
    count: usize,
    scale: f64,
    passed: usize,
    max_axiom_residual: f64,
    max_metric_residual: f64,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    model: &'a str,
    classification: &'a Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    expect: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expectation_met: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perturbations: Option<&'a PerturbationSummary>,
}

pub fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    match std::env::var("GFOL_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("GFOL_SEED must be an unsigned integer, got `{v}`"))
        }),
        Err(_) => Ok(flag.unwrap_or(DEFAULT_SEED)),
    }
}

pub fn run(args: &Args, manifest: &mut RunManifest) -> Result<Status, CliError> {
    let (model, file) = args.source.load()?;
    manifest.inputs.push(args.source.describe());
    let embedded = file.and_then(|f| f.structure);
    let structure = match (args.kind, embedded) {
        (None, Some(sf)) => sf.to_structure(&model)?,
        (kind, _) => {
            FramedStructure::canonical(&model, kind.unwrap_or_else(|| default_kind(&model)))?
        }
    };
    let class = classify(&structure, &model);

    println!("model: {}", model.name());
    println!("kind:  {}", structure.kind);
    println!("class: {} [{}]", class.label, class.slug);
    println!("residuals:");
    print_residuals(class.residuals.iter().map(|(k, v)| (k.as_str(), *v)));

    let perturbations = match args.perturb {
        Some(n) => {
            let seed = resolve_seed(args.seed)?;
            manifest.seed = Some(seed);
            Some(perturb(&model, &structure, n, args.scale, seed)?)
        }
        None => None,
    };
    if let Some(p) = &perturbations {
        println!(
            "perturbations: {}/{} pass (seed {}, scale {}, max axiom residual {}, max metric residual {})",
            p.passed,
            p.count,
            p.seed,
            p.scale,
            gfol_core::flow::fmt12(p.max_axiom_residual),
            gfol_core::flow::fmt12(p.max_metric_residual),
        );
    }

    let expectation_met = args.expect.as_deref().map(|e| {
        let target = e.trim().to_lowercase();
        target == class.slug || target == class.label.to_lowercase() || slug(&target) == class.slug
    });
    if let (Some(e), Some(met)) = (&args.expect, expectation_met) {
        println!("expect: {e} -> {}", if met { "met" } else { "NOT met" });
    }

    manifest.config = serde_json::json!({
        "kind": structure.kind,
        "expect": args.expect,
        "perturb": args.perturb,
        "scale": args.scale,
    });
    if let Some(path) = &args.json {
        let report = VerifyReport {
            model: model.name(),
            classification: &class,
            expect: args.expect.as_deref(),
            expectation_met,
            perturbations: perturbations.as_ref(),
        };
        write_text(
            path,
            &serde_json::to_string_pretty(&report).expect("report serializes"),
        )?;
        manifest.output(path);
    }

    let perturb_ok = perturbations.as_ref().is_none_or(|p| p.passed == p.count);
    if expectation_met == Some(false) || !perturb_ok {
        Ok(Status::ExpectationFailed)
    } else {
        Ok(Status::Ok)
    }
}

fn perturb(
    model: &gfol_core::LieFoliationModel,
    structure: &FramedStructure,
    count: usize,
    scale: f64,
    seed: u64,
) -> Result<PerturbationSummary, CliError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(CliError::Usage(format!(
            "--scale must be positive, got {scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = PerturbationSummary {
        seed,
        count,
        scale,
        passed: 0,
        max_axiom_residual: 0.0,
        max_metric_residual: 0.0,
    };
    for _ in 0..count {
        let dphi = random_commuting_perturbation(model, structure, scale, true, &mut rng)?;
        let weak = perturb_structure(structure, &dphi, model)?;
        let axioms = check_axioms(&weak, model);
        let metric = check_metric_compat(&weak, model);
        summary.max_axiom_residual = summary.max_axiom_residual.max(axioms.max_residual());
        summary.max_metric_residual = summary.max_metric_residual.max(metric.max_residual());
        if axioms.passes() && metric.passes() {
            summary.passed += 1;
        }
    }
    Ok(summary)
}
