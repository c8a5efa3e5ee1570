//! WebAssembly entry points for the browser demo in `www/`.
//!
//! Every export takes plain values and returns a JSON string; the page does
//! the drawing. The `*_json` functions are the same operations without the
//! `wasm_bindgen` wrapper.

use gfol_core::flow::{fmt12, FlowTrajectory};
use gfol_core::structures::{default_kind, FramedStructure, StructureKind};
use gfol_core::{
    builtin_from_ref, classify, closed_form_mu, integrate_flow, FlowConfig, GeometryReport,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_STEPS: f64 = 200_000.0;

#[derive(Serialize)]
struct FlowPlot {
    model: String,
    phi: f64,
    t: Vec<f64>,
    /// `eigs[k][s]`: k-th eigenvalue (ascending) at sample `s`.
    eigs: Vec<Vec<f64>>,
    /// Logistic prediction for each initial eigenvalue, on the same grid.
    closed_form: Vec<Vec<f64>>,
    max_gap: f64,
    converged: bool,
    rate: Option<f64>,
}

/// Integrates the flow on a built-in model and pairs each Ric⊥ eigenvalue
/// with its closed-form curve.
pub fn flow_vs_closed_form_json(model_ref: &str, phi: f64, t_end: f64) -> Result<String, String> {
    let model = builtin_from_ref(model_ref).map_err(|e| e.to_string())?;
    if t_end.abs() / 1e-3 > MAX_STEPS {
        return Err(format!("|t_end| must be at most {}", MAX_STEPS * 1e-3));
    }
    let cfg = FlowConfig::new(phi).with_t_end(t_end).with_record_every(20);
    let traj = integrate_flow(&model, &cfg).map_err(|e| e.to_string())?;
    Ok(to_json(&plot(&traj, phi)))
}

fn plot(traj: &FlowTrajectory, phi: f64) -> FlowPlot {
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let k = traj.samples[0].ric_eigs.len();
    let eigs: Vec<Vec<f64>> = (0..k)
        .map(|i| traj.samples.iter().map(|s| s.ric_eigs[i]).collect())
        .collect();
    let closed_form: Vec<Vec<f64>> = eigs
        .iter()
        .map(|e| {
            t.iter()
                .map(|&ti| closed_form_mu(e[0], phi, ti).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    let max_gap = eigs
        .iter()
        .zip(&closed_form)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    FlowPlot {
        model: traj.model.clone(),
        phi,
        t,
        eigs,
        closed_form,
        max_gap,
        converged: traj.converged,
        rate: traj.rate_estimate,
    }
}

#[derive(Serialize)]
struct StructureSummary {
    model: String,
    kind: StructureKind,
    label: String,
    slug: String,
    residuals: Vec<(String, String)>,
    horizontal_dim: usize,
    ric_perp: Vec<f64>,
    ric_discrepancy: Option<f64>,
}

/// Classifies the canonical structure of `kind` (empty for the model's
/// natural kind) and reports Ric⊥.
pub fn classify_json(model_ref: &str, kind: &str) -> Result<String, String> {
    let model = builtin_from_ref(model_ref).map_err(|e| e.to_string())?;
    let kind = match kind.trim() {
        "" => default_kind(&model),
        k => StructureKind::parse(k).ok_or_else(|| format!("unknown structure kind `{k}`"))?,
    };
    let s = FramedStructure::canonical(&model, kind).map_err(|e| e.to_string())?;
    let c = classify(&s, &model);
    let geo = GeometryReport::compute(&model).map_err(|e| e.to_string())?;
    Ok(to_json(&StructureSummary {
        model: model.name().to_string(),
        kind,
        label: c.label,
        slug: c.slug,
        residuals: c
            .residuals
            .into_iter()
            .map(|(k, v)| (k, fmt12(v)))
            .collect(),
        horizontal_dim: geo.horizontal.len(),
        ric_perp: geo.ric_perp,
        ric_discrepancy: geo.ric_discrepancy,
    }))
}

#[derive(Serialize)]
struct Curves {
    phi: f64,
    t: Vec<f64>,
    mu0: Vec<f64>,
    mu: Vec<Vec<f64>>,
}

/// `μ(t)` on `n` evenly spaced times in `[t_start, t_end]` for each `μ₀`.
pub fn closed_form_curves_json(
    mu0: &[f64],
    phi: f64,
    t_start: f64,
    t_end: f64,
    n: usize,
) -> Result<String, String> {
    if !(2..=5000).contains(&n) {
        return Err("n must lie in 2..=5000".into());
    }
    let t: Vec<f64> = (0..n)
        .map(|i| t_start + (t_end - t_start) * i as f64 / (n - 1) as f64)
        .collect();
    let mu = mu0
        .iter()
        .map(|&m| {
            t.iter()
                .map(|&ti| closed_form_mu(m, phi, ti).map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(to_json(&Curves {
        phi,
        t,
        mu0: mu0.to_vec(),
        mu,
    }))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo payload serializes")
}

#[wasm_bindgen]
pub fn flow_vs_closed_form(model_ref: &str, phi: f64, t_end: f64) -> Result<String, JsError> {
    flow_vs_closed_form_json(model_ref, phi, t_end).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn classify_model(model_ref: &str, kind: &str) -> Result<String, JsError> {
    classify_json(model_ref, kind).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn closed_form_curves(
    mu0: &[f64],
    phi: f64,
    t_start: f64,
    t_end: f64,
    n: usize,
) -> Result<String, JsError> {
    closed_form_curves_json(mu0, phi, t_start, t_end, n).map_err(|e| JsError::new(&e))
}
