//! Normalized partial Ricci flow `∂ₜg = -2r_g + 2Φg^⊥` on models.
//!
//! Brackets are fixed, so `Θ_i(X,Y) = ½g([X,Y], ξ_i)` is constant on `𝒟` and
//! everything else is algebraic in the horizontal metric `G`:
//! `T♯_i = G⁻¹Θ_iᵀ`, `Ric^⊥ = -Σ(T♯_i)²`, `r_G = G·Ric^⊥ = -ΣΘ_iG⁻¹Θ_i`.
//! The flow is integrated as an ODE in `G` with fixed-step RK4 in `s = -t`.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{FlowError, GeometryError};
use crate::geometry::{self, COMPAT_TOL};
use crate::linalg::{self, max_abs, RANK_TOL};
use crate::model::{self, LieFoliationModel};
use crate::structures::{self, default_kind, Classification, FramedStructure, StructureKind};

/// Threshold for the limit-metric stationarity check.
pub const LIMIT_TOL: f64 = 1e-10;
/// Bounds on `‖Ric^⊥ - Φ·id‖∞` for samples used in the rate fit.
pub const RATE_WINDOW: (f64, f64) = (1e-12, 1e-2);
pub const RATE_MIN_SAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub phi: f64,
    pub t_end: f64,
    pub dt: f64,
    pub tol: f64,
    pub record_every: usize,
}

impl FlowConfig {
    /// Defaults: `t_end = -max(3, 6/(4Φ))`, `dt = 1e-3`, `tol = 1e-8`,
    /// a sample every 10 steps.
    pub fn new(phi: f64) -> Self {
        FlowConfig {
            phi,
            t_end: -(6.0 / (4.0 * phi)).max(3.0),
            dt: 1e-3,
            tol: 1e-8,
            record_every: 10,
        }
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::BadParams(m));
        if !(self.phi.is_finite() && self.phi > 0.0) {
            return bad(format!("phi must be positive, got {}", self.phi));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= 1e-2) {
            return bad(format!("dt must lie in (0, 1e-2], got {}", self.dt));
        }
        if !self.t_end.is_finite() || self.t_end == 0.0 {
            return bad(format!(
                "t_end must be finite and nonzero, got {}",
                self.t_end
            ));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        Ok(())
    }
}

/// The constant forms `Θ_i` of a model on `𝒟`.
#[derive(Clone, Debug)]
pub struct Thetas {
    pub forms: Vec<DMatrix<f64>>,
}

impl Thetas {
    pub fn of(model: &LieFoliationModel) -> Self {
        let hz = model.horizontal();
        let c = model.brackets();
        let g = model.metric();
        let forms = model
            .vertical()
            .iter()
            .map(|&v| {
                DMatrix::from_fn(hz.len(), hz.len(), |a, b| {
                    0.5 * (0..model.dim())
                        .map(|k| c.get(hz[a], hz[b], k) * g[(k, v)])
                        .sum::<f64>()
                })
            })
            .collect();
        Thetas { forms }
    }

    pub fn m(&self) -> usize {
        self.forms.first().map_or(0, |f| f.nrows())
    }

    fn inverse(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        if linalg::min_singular_value(g) <= RANK_TOL {
            return None;
        }
        g.clone().try_inverse()
    }

    /// `T♯_i = G⁻¹Θ_iᵀ`.
    pub fn tsharp(&self, g: &DMatrix<f64>) -> Option<Vec<DMatrix<f64>>> {
        let g_inv = Self::inverse(g)?;
        Some(self.forms.iter().map(|t| &g_inv * t.transpose()).collect())
    }

    /// `Ric^⊥ = -Σ(T♯_i)²`.
    pub fn ric(&self, g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        Some(geometry::ric_from_tsharp(&self.tsharp(g)?))
    }

    /// `r_G = -ΣΘ_iG⁻¹Θ_i`.
    pub fn r(&self, g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let g_inv = Self::inverse(g)?;
        let m = self.m();
        Some(
            self.forms
                .iter()
                .fold(DMatrix::zeros(m, m), |acc, t| acc - t * &g_inv * t),
        )
    }

    fn rhs(&self, g: &DMatrix<f64>, phi: f64) -> Option<DMatrix<f64>> {
        Some(self.r(g)? * -2.0 + g * (2.0 * phi))
    }
}

/// `-2r_G + 2Φ·G` for a horizontal metric `G`.
pub fn flow_rhs(
    g: &DMatrix<f64>,
    model: &LieFoliationModel,
    phi: f64,
) -> Result<DMatrix<f64>, FlowError> {
    let m = model.horizontal().len();
    if g.nrows() != m || g.ncols() != m {
        return Err(FlowError::BadParams(format!(
            "horizontal metric must be {m}x{m}"
        )));
    }
    Thetas::of(model)
        .rhs(g, phi)
        .ok_or(FlowError::SingularMetric { t: f64::NAN })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSample {
    pub t: f64,
    /// Horizontal metric, row-major.
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    /// Eigenvalues of `Ric^⊥`, ascending.
    pub ric_eigs: Vec<f64>,
    /// `‖T♯_i‖∞` per vertical field.
    pub tsharp_norms: Vec<f64>,
    /// `‖Ric^⊥ - Φ·id‖∞`.
    pub deviation: f64,
    pub residuals: BTreeMap<String, f64>,
}

impl FlowSample {
    pub fn metric(&self) -> DMatrix<f64> {
        let m = (self.g.len() as f64).sqrt().round() as usize;
        DMatrix::from_row_slice(m, m, &self.g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowTrajectory {
    pub model: String,
    pub phi: f64,
    pub dt: f64,
    pub t_end: f64,
    pub samples: Vec<FlowSample>,
    pub converged: bool,
    /// First sample time at which `‖Ric^⊥ - Φ·id‖∞ ≤ tol`.
    pub converged_at: Option<f64>,
    pub rate_estimate: Option<f64>,
    /// True when the vertical block of the full metric stayed bit-identical.
    pub vertical_block_constant: bool,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    /// Columns `t, mu_1..mu_k, res_ode, res_tsharp, res_commutator, res_compat`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.samples.first().map_or(0, |s| s.ric_eigs.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=k).map(|i| format!("mu_{i}")));
        header.extend(["res_ode", "res_tsharp", "res_commutator", "res_compat"].map(String::from));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![fmt12(s.t)];
            row.extend(s.ric_eigs.iter().map(|v| fmt12(*v)));
            for key in ["ode", "tsharp", "commutator", "compat"] {
                row.push(fmt12(s.residuals.get(key).copied().unwrap_or(f64::NAN)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting, capped at 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.11e}");
    let parsed: f64 = s.parse().unwrap_or(v);
    if (1e-4..1e12).contains(&parsed.abs()) {
        format!("{parsed}")
    } else {
        format!("{parsed:e}")
    }
}

/// Spectrum of `Ric^⊥` at `G` (ascending) for Riemannian `G`.
fn ric_spectrum(g: &DMatrix<f64>, ric: &DMatrix<f64>) -> Option<Vec<f64>> {
    linalg::g_self_adjoint_eigen(g, ric).map(|(v, _)| v)
}

/// Real spectrum of `Ric^⊥(0)`, or the offending value.
fn initial_spectrum(model: &LieFoliationModel, ric: &DMatrix<f64>) -> Result<Vec<f64>, FlowError> {
    let eigs = if model.is_riemannian() {
        ric_spectrum(&model.horizontal_metric(), ric).ok_or(FlowError::SingularMetric { t: 0.0 })?
    } else {
        let general = linalg::eigenvalues_general(ric);
        if let Some(&(re, _)) = general.iter().find(|(_, im)| im.abs() > RANK_TOL) {
            return Err(FlowError::NotPositive(re));
        }
        general.into_iter().map(|(re, _)| re).collect()
    };
    match eigs.iter().copied().reduce(f64::min) {
        Some(lo) if lo > RANK_TOL => Ok(eigs),
        Some(lo) => Err(FlowError::NotPositive(lo)),
        None => Err(FlowError::BadParams(
            "model has no horizontal directions".into(),
        )),
    }
}

fn require_compatible(model: &LieFoliationModel) -> Result<(), FlowError> {
    let rep = model::check_compatible(model);
    if rep.max() > COMPAT_TOL {
        return Err(GeometryError::NotCompatible {
            residual: rep.max(),
            tolerance: COMPAT_TOL,
        }
        .into());
    }
    Ok(())
}

/// Forward pole time of `μ₀Φ/(μ₀ + e^{4Φt}(Φ - μ₀))` for `μ₀ > Φ`.
fn pole_time(mu0: f64, limit: f64, rate: f64) -> Option<f64> {
    (mu0 > limit).then(|| (mu0 / (mu0 - limit)).ln() / rate)
}

fn rk4_step(thetas: &Thetas, g: &DMatrix<f64>, phi: f64, h: f64) -> Option<DMatrix<f64>> {
    let k1 = thetas.rhs(g, phi)?;
    let k2 = thetas.rhs(&(g + &k1 * (h / 2.0)), phi)?;
    let k3 = thetas.rhs(&(g + &k2 * (h / 2.0)), phi)?;
    let k4 = thetas.rhs(&(g + &k3 * h), phi)?;
    Some(g + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Five-point derivative of `f` along the flow field at `g`.
fn flow_derivative<F>(thetas: &Thetas, g: &DMatrix<f64>, phi: f64, f: F) -> Option<DMatrix<f64>>
where
    F: Fn(&DMatrix<f64>) -> Option<DMatrix<f64>>,
{
    let v = thetas.rhs(g, phi)?;
    let vn = max_abs(&v);
    let f0 = f(g)?;
    if vn == 0.0 {
        return Some(DMatrix::zeros(f0.nrows(), f0.ncols()));
    }
    let h = 1e-3 * max_abs(g) / vn;
    let at = |c: f64| f(&(g + &v * (c * h)));
    Some((at(-2.0)? - at(-1.0)? * 8.0 + at(1.0)? * 8.0 - at(2.0)?) / (12.0 * h))
}

fn sample_at(
    model: &LieFoliationModel,
    thetas: &Thetas,
    g: &DMatrix<f64>,
    t: f64,
    phi: f64,
) -> Result<FlowSample, FlowError> {
    let singular = FlowError::SingularMetric { t };
    let ts = thetas.tsharp(g).ok_or(singular.clone())?;
    let ric = geometry::ric_from_tsharp(&ts);
    let m = g.nrows();
    let id = DMatrix::<f64>::identity(m, m);
    let eigs = ric_spectrum(g, &ric).ok_or(singular.clone())?;

    let mut residuals = BTreeMap::new();
    let d_ric = flow_derivative(thetas, g, phi, |x| thetas.ric(x)).ok_or(singular.clone())?;
    let mut ode_rhs = &ric * (&ric - &id * (2.0 * phi)) * 2.0;
    for t_i in &ts {
        ode_rhs -= t_i * &ric * t_i * 2.0;
    }
    residuals.insert("ode".into(), max_abs(&(d_ric - ode_rhs)));

    let mut tsharp_res = 0.0_f64;
    for i in 0..ts.len() {
        let d_t = flow_derivative(thetas, g, phi, |x| thetas.tsharp(x).map(|v| v[i].clone()))
            .ok_or(singular.clone())?;
        let rhs = (&ric - &id * phi) * &ts[i] * 2.0;
        tsharp_res = tsharp_res.max(max_abs(&(d_t - rhs)));
    }
    residuals.insert("tsharp".into(), tsharp_res);

    let current = model.with_horizontal_metric(g)?;
    let vertical = model.vertical();
    let drift = max_abs(
        &(linalg::submatrix(current.metric(), vertical, vertical)
            - linalg::submatrix(model.metric(), vertical, vertical)),
    );
    residuals.insert("vertical_drift".into(), drift);
    let conn = geometry::levi_civita(&current)?;
    let tensors = geometry::foliation_tensors(&current, &conn);
    residuals.insert(
        "commutator".into(),
        geometry::commutator_identity_residual(&current, &conn, &tensors),
    );
    let compat = model::compatibility_from(&current, &conn, &tensors);
    residuals.insert("compat".into(), compat.max());
    residuals.insert("a_shape".into(), compat.riemannian);
    let normality = FramedStructure::canonical(&current, default_kind(&current))
        .map(|s| geometry::normality_residual(&current, &s))
        .unwrap_or(f64::NAN);
    residuals.insert("normality".into(), normality);

    Ok(FlowSample {
        t,
        g: linalg::to_row_major(g),
        ric_eigs: eigs,
        tsharp_norms: ts.iter().map(max_abs).collect(),
        deviation: max_abs(&(&ric - &id * phi)),
        residuals,
    })
}

/// RK4 integration from `t = 0` to `cfg.t_end`; backward runs substitute
/// `s = -t`.
pub fn integrate_flow(
    model: &LieFoliationModel,
    cfg: &FlowConfig,
) -> Result<FlowTrajectory, FlowError> {
    cfg.validate()?;
    require_compatible(model)?;
    let thetas = Thetas::of(model);
    let g0 = model.horizontal_metric();
    let ric0 = thetas
        .ric(&g0)
        .ok_or(FlowError::SingularMetric { t: 0.0 })?;
    let mu0 = initial_spectrum(model, &ric0)?;
    if !model.is_riemannian() {
        return Err(FlowError::BadParams(
            "the flow is integrated for Riemannian horizontal metrics only".into(),
        ));
    }
    if cfg.t_end > 0.0 {
        let rate = 4.0 * cfg.phi;
        if let Some(tp) = mu0
            .iter()
            .filter_map(|&mu| pole_time(mu, cfg.phi, rate))
            .reduce(f64::min)
        {
            if tp <= cfg.t_end {
                return Err(FlowError::PoleReached(tp));
            }
        }
    }

    let direction = cfg.t_end.signum();
    let span = cfg.t_end.abs();
    let steps = (span / cfg.dt).round().max(1.0) as usize;
    let h = span / steps as f64;
    // With t = direction · s, dG/ds = direction · F(G); one RK4 step in s of
    // size h is one step in t of size direction · h.
    let mut g = g0.clone();
    let mut samples = vec![sample_at(model, &thetas, &g, 0.0, cfg.phi)?];
    for step in 1..=steps {
        let t = direction * h * step as f64;
        g = rk4_step(&thetas, &g, cfg.phi, direction * h).ok_or(FlowError::SingularMetric { t })?;
        g = linalg::symmetric_part(&g);
        if !linalg::is_positive_definite(&g) {
            return Err(FlowError::SingularMetric { t });
        }
        let r = thetas.r(&g).ok_or(FlowError::SingularMetric { t })?;
        if !linalg::is_positive_definite(&linalg::symmetric_part(&r)) {
            let lo = ric_spectrum(
                &g,
                &geometry::ric_from_tsharp(&thetas.tsharp(&g).unwrap_or_default()),
            )
            .and_then(|e| e.first().copied())
            .unwrap_or(f64::NAN);
            return Err(FlowError::PositivityLost { t, eigenvalue: lo });
        }
        if step % cfg.record_every == 0 || step == steps {
            samples.push(sample_at(model, &thetas, &g, t, cfg.phi)?);
        }
    }

    let converged_at = samples.iter().find(|s| s.deviation <= cfg.tol).map(|s| s.t);
    let converged = samples.last().is_some_and(|s| s.deviation <= cfg.tol);
    let vertical_block_constant = samples
        .iter()
        .all(|s| s.residuals.get("vertical_drift") == Some(&0.0));
    let mut traj = FlowTrajectory {
        model: model.name().to_string(),
        phi: cfg.phi,
        dt: h,
        t_end: cfg.t_end,
        samples,
        converged,
        converged_at,
        rate_estimate: None,
        vertical_block_constant,
    };
    traj.rate_estimate = convergence_report(&traj, cfg.phi).ok().map(|r| r.rate);
    Ok(traj)
}

/// `μ(t) = μ₀Φ/(μ₀ + e^{4Φt}(Φ - μ₀))`.
pub fn closed_form_mu(mu0: f64, phi: f64, t: f64) -> Result<f64, FlowError> {
    if !(mu0 > 0.0 && phi > 0.0 && t.is_finite()) {
        return Err(FlowError::BadParams(format!(
            "need mu0 > 0, phi > 0 and finite t (got {mu0}, {phi}, {t})"
        )));
    }
    logistic(mu0, phi, 4.0 * phi, t)
}

fn logistic(mu0: f64, limit: f64, rate: f64, t: f64) -> Result<f64, FlowError> {
    if let Some(tp) = pole_time(mu0, limit, rate) {
        if t >= tp {
            return Err(FlowError::PoleReached(tp));
        }
    }
    Ok(mu0 * limit / (mu0 + (rate * t).exp() * (limit - mu0)))
}

/// `μ(t) = μ₀(2Φ - α)/(μ₀ + e^{4Φt}(2Φ - α - μ₀))`, requiring `2Φ > α`.
pub fn comparison_closed_form(mu0: f64, alpha: f64, phi: f64, t: f64) -> Result<f64, FlowError> {
    if !(mu0 > 0.0 && phi > 0.0 && alpha.is_finite() && t.is_finite()) {
        return Err(FlowError::BadParams(format!(
            "need mu0 > 0, phi > 0, finite alpha and t (got {mu0}, {phi}, {alpha}, {t})"
        )));
    }
    if 2.0 * phi <= alpha {
        return Err(FlowError::BadParams(format!(
            "need 2*phi > alpha (got phi = {phi}, alpha = {alpha})"
        )));
    }
    logistic(mu0, 2.0 * phi - alpha, 4.0 * phi, t)
}

/// RK4 solution of the comparison ODE `μ̇ = 2μ(μ + α - 2Φ)` sampled at every step.
pub fn comparison_rk4(
    mu0: f64,
    alpha: f64,
    phi: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>, FlowError> {
    scalar_rk4(mu0, t_end, dt, |mu| 2.0 * mu * (mu + alpha - 2.0 * phi))
}

fn scalar_rk4<F: Fn(f64) -> f64>(
    mu0: f64,
    t_end: f64,
    dt: f64,
    f: F,
) -> Result<Vec<(f64, f64)>, FlowError> {
    if !(dt > 0.0 && dt.is_finite() && t_end.is_finite() && t_end != 0.0) {
        return Err(FlowError::BadParams(format!(
            "need dt > 0 and finite nonzero t_end (got {dt}, {t_end})"
        )));
    }
    let direction = t_end.signum();
    let steps = (t_end.abs() / dt).round().max(1.0) as usize;
    let h = direction * t_end.abs() / steps as f64;
    let mut mu = mu0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, mu));
    for step in 1..=steps {
        let k1 = f(mu);
        let k2 = f(mu + 0.5 * h * k1);
        let k3 = f(mu + 0.5 * h * k2);
        let k4 = f(mu + h * k3);
        mu += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t = h * step as f64;
        if !mu.is_finite() || mu.abs() > 1e12 {
            return Err(FlowError::BlowupDetected(t));
        }
        out.push((t, mu));
    }
    Ok(out)
}

/// Scalar model `μ̇ = 4μ(μ + Ψ₁) - Ψ₂` with comparison constant `α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalarOdeSpec {
    pub psi1: f64,
    pub psi2: f64,
    pub alpha: f64,
    pub mu0: f64,
}

impl ScalarOdeSpec {
    pub fn rhs(&self, mu: f64) -> f64 {
        4.0 * mu * (mu + self.psi1) - self.psi2
    }

    /// `μ± = ½(-Ψ₁ ± √(Ψ₁² + Ψ₂))`.
    pub fn stationary(&self) -> (f64, f64) {
        let root = (self.psi1 * self.psi1 + self.psi2).sqrt();
        (0.5 * (-self.psi1 + root), 0.5 * (-self.psi1 - root))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarCaseResult {
    pub trajectory: Vec<(f64, f64)>,
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// `|μ(t_end) - μ₊|`.
    pub distance_to_plus: f64,
}

/// RK4 integration of the scalar model to `t_end` (backward when negative).
pub fn scalar_case_i(
    spec: &ScalarOdeSpec,
    t_end: f64,
    dt: f64,
) -> Result<ScalarCaseResult, FlowError> {
    if !(spec.psi2 >= 0.0 && spec.psi1.is_finite() && spec.psi2.is_finite() && spec.mu0.is_finite())
    {
        return Err(FlowError::BadParams(format!(
            "need finite psi1, mu0 and psi2 >= 0 (got {}, {}, {})",
            spec.psi1, spec.mu0, spec.psi2
        )));
    }
    let (mu_plus, mu_minus) = spec.stationary();
    let trajectory = scalar_rk4(spec.mu0, t_end, dt, |mu| spec.rhs(mu))?;
    let end = trajectory.last().map_or(spec.mu0, |p| p.1);
    Ok(ScalarCaseResult {
        trajectory,
        mu_plus,
        mu_minus,
        distance_to_plus: (end - mu_plus).abs(),
    })
}

/// `ĝ` with `ĝ(e_i, e_j) = δ_ij √(μ_i(0)/Φ)` in a `G₀`-orthonormal eigenframe
/// `(e_i)` of `Ric^⊥(0)`, checked against `r_ĝ = Φ·ĝ`.
pub fn limit_metric(model: &LieFoliationModel, phi: f64) -> Result<DMatrix<f64>, FlowError> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(FlowError::BadParams(format!(
            "phi must be positive, got {phi}"
        )));
    }
    let thetas = Thetas::of(model);
    let g0 = model.horizontal_metric();
    let ric0 = thetas
        .ric(&g0)
        .ok_or(FlowError::SingularMetric { t: 0.0 })?;
    initial_spectrum(model, &ric0)?;
    let (mu, frame) =
        linalg::g_self_adjoint_eigen(&g0, &ric0).ok_or(FlowError::NotPositive(f64::NAN))?;
    let frame_inv = frame
        .try_inverse()
        .ok_or(FlowError::SingularMetric { t: 0.0 })?;
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        mu.len(),
        mu.iter().map(|m| (m / phi).sqrt()),
    ));
    let g_hat = linalg::symmetric_part(&(frame_inv.transpose() * scale * &frame_inv));
    let r = thetas.r(&g_hat).ok_or(FlowError::SingularMetric {
        t: f64::NEG_INFINITY,
    })?;
    let residual = max_abs(&(r - &g_hat * phi));
    if residual > LIMIT_TOL {
        return Err(FlowError::LimitNotStationary(residual));
    }
    Ok(g_hat)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Least-squares slope of `log‖Ric^⊥ - Φ·id‖∞` against `t`.
    pub rate: f64,
    /// Root-mean-square residual of the linear fit.
    pub fit_error: f64,
    pub samples_used: usize,
}

pub fn convergence_report(traj: &FlowTrajectory, phi: f64) -> Result<ConvergenceReport, FlowError> {
    let _ = phi;
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.deviation > RATE_WINDOW.0 && s.deviation < RATE_WINDOW.1)
        .map(|s| (s.t, s.deviation.ln()))
        .collect();
    if pts.len() < RATE_MIN_SAMPLES {
        return Err(FlowError::InsufficientSamples {
            needed: RATE_MIN_SAMPLES,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let rate = sxy / sxx;
    let intercept = my - rate * mt;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - rate * p.0).powi(2))
        .sum();
    Ok(ConvergenceReport {
        rate,
        fit_error: (sse / n).sqrt(),
        samples_used: pts.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RetractionReport {
    pub model: String,
    pub kind: StructureKind,
    pub phi: f64,
    pub t_end: f64,
    pub converged_at: Option<f64>,
    /// Classification of `(φ_i(t_end), ξ_i, ηⁱ, Q_{t_end})` on `(M, g_{t_end})`.
    pub at_horizon: Classification,
    /// Classification at the analytic limit metric `ĝ`.
    pub at_limit: Classification,
    /// `‖G(t_end) - ĝ‖∞`.
    pub limit_distance: f64,
    /// `‖Q̂ - id‖∞` at `ĝ`.
    pub q_deviation: f64,
    /// Worst residual of the classical axioms for the kind at `ĝ`.
    pub classical_axioms: f64,
    pub normality: f64,
    pub d_eta_minus_f: f64,
    /// Composition table residual (p-contact only).
    pub composition: Option<f64>,
    /// Range of `K̂(ξ_i, e_a)` over vertical fields and horizontal frame vectors.
    pub mixed_sectional: (f64, f64),
    /// `Φ/p`.
    pub mixed_sectional_expected: f64,
    pub passes: bool,
}

/// Tolerance for the classical-limit checks of [`retract_and_verify`].
pub const RETRACT_TOL: f64 = 1e-6;

/// Runs the flow, rebuilds the structure with `Q = (1/p)Ric^⊥` and
/// `φ_i|𝒟 = T♯_i` at the horizon and at the limit metric, and verifies the
/// classical axioms at the limit.
pub fn retract_and_verify(
    model: &LieFoliationModel,
    cfg: &FlowConfig,
) -> Result<RetractionReport, FlowError> {
    let traj = integrate_flow(model, cfg)?;
    if !traj.converged {
        return Err(FlowError::NotConverged(traj.last().deviation));
    }
    let kind = default_kind(model);
    let end_model = model.with_horizontal_metric(&traj.last().metric())?;
    let end_structure = FramedStructure::canonical(&end_model, kind)?;
    let at_horizon = structures::classify(&end_structure, &end_model);

    let g_hat = limit_metric(model, cfg.phi)?;
    let hat_model = model.with_horizontal_metric(&g_hat)?;
    let hat = FramedStructure::canonical(&hat_model, kind)?;
    let at_limit = structures::classify(&hat, &hat_model);
    let axioms = structures::check_axioms(&hat, &hat_model);
    let contact = structures::check_contact_metric(&hat, &hat_model);
    let normality = geometry::normality_residual(&hat_model, &hat);
    let d_eta_minus_f = contact.d_eta_minus_f.iter().copied().fold(0.0, f64::max);
    let d_eta_minus_f_h = contact
        .d_eta_minus_f_horizontal
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let composition =
        (kind == StructureKind::PContact).then(|| axioms.get("composition").unwrap_or(f64::NAN));
    let classical_axioms = match kind {
        StructureKind::Contact => axioms.max_residual().max(normality).max(d_eta_minus_f),
        StructureKind::PContact => axioms.max_residual().max(d_eta_minus_f_h),
        StructureKind::FStructure | StructureKind::ParaPhi => {
            axioms.max_residual().max(d_eta_minus_f)
        }
    };

    let conn = geometry::levi_civita(&hat_model)?;
    let curv = geometry::curvature(&hat_model, &conn);
    let n = hat_model.dim();
    let mut k_range = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..hat_model.p() {
        for &a in hat_model.horizontal() {
            let mut e = nalgebra::DVector::zeros(n);
            e[a] = 1.0;
            let k = curv.sectional(&hat_model, &hat_model.xi(i), &e);
            k_range = (k_range.0.min(k), k_range.1.max(k));
        }
    }
    let expected = cfg.phi / model.p() as f64;
    let q_deviation = hat.q_deviation();
    let passes = q_deviation <= RETRACT_TOL
        && classical_axioms <= RETRACT_TOL
        && (k_range.0 - expected).abs() <= RETRACT_TOL
        && (k_range.1 - expected).abs() <= RETRACT_TOL;
    Ok(RetractionReport {
        model: model.name().to_string(),
        kind,
        phi: cfg.phi,
        t_end: cfg.t_end,
        converged_at: traj.converged_at,
        at_horizon,
        at_limit,
        limit_distance: max_abs(&(traj.last().metric() - &g_hat)),
        q_deviation,
        classical_axioms,
        normality,
        d_eta_minus_f,
        composition,
        mixed_sectional: k_range,
        mixed_sectional_expected: expected,
        passes,
    })
}
