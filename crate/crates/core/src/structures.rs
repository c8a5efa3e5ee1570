//! Weak almost contact, weak p-contact, weak f- and weak para-φ structures on
//! models: axiom checks, construction and classification.
//!
//! Every endomorphism is an `N×N` matrix in the invariant frame; covectors
//! are coefficient vectors, so `η(X) = ηᵀX` and `η⊗ξ` is the matrix `ξηᵀ`.
//! A bilinear form `B(X,Y)` is the matrix `B` with `B(X,Y) = XᵀBY`; in
//! particular `F(X,Y) = g(X,φY)` is `Gφ`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::StructureError;
use crate::geometry;
use crate::linalg::{self, max_abs, max_abs_vec, RANK_TOL};
use crate::model::LieFoliationModel;

/// Residual threshold for "passes".
pub const PASS_TOL: f64 = 1e-10;
/// Threshold on `‖Q - id‖∞` for the classical flag.
pub const CLASSICAL_TOL: f64 = 1e-10;
/// Threshold on `‖[φ, φ']‖∞` accepted by [`perturb_structure`].
pub const COMMUTE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    Contact,
    PContact,
    FStructure,
    ParaPhi,
}

impl StructureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureKind::Contact => "contact",
            StructureKind::PContact => "p_contact",
            StructureKind::FStructure => "f_structure",
            StructureKind::ParaPhi => "para_phi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "contact" => Some(StructureKind::Contact),
            "p_contact" => Some(StructureKind::PContact),
            "f_structure" | "f" => Some(StructureKind::FStructure),
            "para_phi" | "para" => Some(StructureKind::ParaPhi),
            _ => None,
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(φ or φ_1..φ_p, ξ_i, ηⁱ, Q)` on a model.
#[derive(Clone, Debug, PartialEq)]
pub struct FramedStructure {
    pub kind: StructureKind,
    pub phis: Vec<DMatrix<f64>>,
    pub xis: Vec<DVector<f64>>,
    pub etas: Vec<DVector<f64>>,
    pub q: DMatrix<f64>,
}

impl FramedStructure {
    /// Checks shapes and that `Q` is nonsingular. The remaining axioms are
    /// reported by the `check_*` functions.
    pub fn new(
        kind: StructureKind,
        phis: Vec<DMatrix<f64>>,
        xis: Vec<DVector<f64>>,
        etas: Vec<DVector<f64>>,
        q: DMatrix<f64>,
    ) -> Result<Self, StructureError> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(StructureError::Shape("Q must be square".into()));
        }
        let p = xis.len();
        if p == 0 || etas.len() != p {
            return Err(StructureError::Shape(format!(
                "need as many eta as xi (got {} and {})",
                etas.len(),
                p
            )));
        }
        let want_phis = if kind == StructureKind::PContact {
            p
        } else {
            1
        };
        if phis.len() != want_phis {
            return Err(StructureError::Shape(format!(
                "{kind} structure needs {want_phis} phi tensor(s), got {}",
                phis.len()
            )));
        }
        if phis.iter().any(|m| m.nrows() != n || m.ncols() != n)
            || xis.iter().chain(etas.iter()).any(|v| v.len() != n)
        {
            return Err(StructureError::Shape(format!(
                "all tensors must have dimension {n}"
            )));
        }
        if kind == StructureKind::Contact && p != 1 {
            return Err(StructureError::Shape(
                "contact structures have one xi".into(),
            ));
        }
        if kind == StructureKind::PContact && p > 3 {
            return Err(StructureError::UnsupportedRank(p));
        }
        let smin = linalg::min_singular_value(&q);
        if smin <= RANK_TOL {
            return Err(StructureError::SingularQ(smin));
        }
        Ok(FramedStructure {
            kind,
            phis,
            xis,
            etas,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn p(&self) -> usize {
        self.xis.len()
    }

    /// The (first) structure tensor.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phis[0]
    }

    /// `Σ_i ηⁱ⊗ξ_i`.
    pub fn projector(&self) -> DMatrix<f64> {
        self.xis
            .iter()
            .zip(&self.etas)
            .fold(DMatrix::zeros(self.dim(), self.dim()), |acc, (x, e)| {
                acc + x * e.transpose()
            })
    }

    /// `‖Q - id‖∞`.
    pub fn q_deviation(&self) -> f64 {
        max_abs(&(&self.q - DMatrix::identity(self.dim(), self.dim())))
    }

    pub fn is_classical(&self) -> bool {
        self.q_deviation() <= CLASSICAL_TOL
    }

    /// Canonical structure of a model: `φ|𝒟` built from the integrability
    /// operators `T♯_{ξ_i}`, `φ` zero on the vertical distribution (rotating
    /// it for `p_contact` with `p = 3`) and `Q` matching the composition law.
    pub fn canonical(
        model: &LieFoliationModel,
        kind: StructureKind,
    ) -> Result<Self, StructureError> {
        let conn = geometry::levi_civita(model)?;
        let tensors = geometry::foliation_tensors(model, &conn);
        let p = model.p();
        let m = model.horizontal().len();
        let n = model.dim();
        let xis: Vec<_> = (0..p).map(|i| model.xi(i)).collect();
        let etas: Vec<_> = (0..p).map(|i| model.eta(i)).collect();
        let mean = tensors
            .tsharp
            .iter()
            .fold(DMatrix::zeros(m, m), |acc, t| acc + t)
            / p as f64;
        let with_vertical_id = |qh: &DMatrix<f64>| {
            let mut q = embed(model, qh);
            for &v in model.vertical() {
                q[(v, v)] = 1.0;
            }
            q
        };
        let (phis, q) = match kind {
            StructureKind::Contact => {
                if p != 1 {
                    return Err(StructureError::Shape(format!(
                        "contact structures need p = 1, model has p = {p}"
                    )));
                }
                let t = &tensors.tsharp[0];
                (vec![embed(model, t)], with_vertical_id(&-(t * t)))
            }
            StructureKind::FStructure => (
                vec![embed(model, &mean)],
                with_vertical_id(&-(&mean * &mean)),
            ),
            StructureKind::ParaPhi => (
                vec![embed(model, &mean)],
                with_vertical_id(&(&mean * &mean)),
            ),
            StructureKind::PContact => {
                if p > 3 {
                    return Err(StructureError::UnsupportedRank(p));
                }
                let ric = geometry::ric_from_tsharp(&tensors.tsharp) / p as f64;
                let phis = (0..p)
                    .map(|i| {
                        let mut phi = embed(model, &tensors.tsharp[i]);
                        for j in 0..p {
                            for k in 0..p {
                                let e = epsilon(p, i, j, k);
                                if e != 0.0 {
                                    phi[(model.vertical()[k], model.vertical()[j])] = e;
                                }
                            }
                        }
                        phi
                    })
                    .collect();
                (phis, with_vertical_id(&ric))
            }
        };
        debug_assert_eq!(q.nrows(), n);
        FramedStructure::new(kind, phis, xis, etas, q)
    }

    pub fn to_file(&self) -> StructureFile {
        let (phi, phis) = if self.kind == StructureKind::PContact {
            (
                None,
                Some(self.phis.iter().map(linalg::to_row_major).collect()),
            )
        } else {
            (Some(linalg::to_row_major(self.phi())), None)
        };
        StructureFile {
            kind: self.kind,
            phi,
            phis,
            q: linalg::to_row_major(&self.q),
            xi: self
                .xis
                .iter()
                .map(|x| x.iter().position(|v| *v == 1.0).unwrap_or(usize::MAX))
                .collect(),
            eta: Some(
                self.etas
                    .iter()
                    .map(|e| e.iter().copied().collect())
                    .collect(),
            ),
        }
    }
}

/// `ε_ijk` for `p = 3`, zero otherwise.
pub fn epsilon(p: usize, i: usize, j: usize, k: usize) -> f64 {
    if p != 3 || i == j || j == k || i == k {
        return 0.0;
    }
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        _ => -1.0,
    }
}

/// Extends an operator on `𝒟` by zero on the vertical distribution.
pub fn embed(model: &LieFoliationModel, op: &DMatrix<f64>) -> DMatrix<f64> {
    let n = model.dim();
    let hz = model.horizontal();
    let mut out = DMatrix::zeros(n, n);
    for (a, &ia) in hz.iter().enumerate() {
        for (b, &ib) in hz.iter().enumerate() {
            out[(ia, ib)] = op[(a, b)];
        }
    }
    out
}

/// Kind chosen for a model when none is requested.
pub fn default_kind(model: &LieFoliationModel) -> StructureKind {
    if !model.is_riemannian() {
        return StructureKind::ParaPhi;
    }
    match model.p() {
        1 => StructureKind::Contact,
        3 => {
            let anticommuting = geometry::levi_civita(model)
                .map(|conn| {
                    let ts = geometry::foliation_tensors(model, &conn).tsharp;
                    let nonzero = ts.iter().all(|t| max_abs(t) > PASS_TOL);
                    let mut worst = 0.0_f64;
                    for i in 0..3 {
                        for j in (i + 1)..3 {
                            worst = worst.max(max_abs(&(&ts[i] * &ts[j] + &ts[j] * &ts[i])));
                        }
                    }
                    nonzero && worst <= PASS_TOL
                })
                .unwrap_or(false);
            if anticommuting {
                StructureKind::PContact
            } else {
                StructureKind::FStructure
            }
        }
        _ => StructureKind::FStructure,
    }
}

/// Structure as embedded in a model file under the key `structure`.
/// Matrices are row-major; `xi` lists frame slots; `eta` defaults to the
/// metric duals of the `xi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureFile {
    pub kind: StructureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phis: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub xi: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<Vec<f64>>>,
}

impl StructureFile {
    pub fn to_structure(
        &self,
        model: &LieFoliationModel,
    ) -> Result<FramedStructure, StructureError> {
        let n = model.dim();
        let mat = |v: &[f64], what: &str| {
            linalg::from_row_major(n, v)
                .ok_or_else(|| StructureError::Shape(format!("{what} needs {} entries", n * n)))
        };
        let phis = match (&self.phi, &self.phis) {
            (Some(phi), None) => vec![mat(phi, "phi")?],
            (None, Some(list)) => list
                .iter()
                .map(|v| mat(v, "phis[i]"))
                .collect::<Result<_, _>>()?,
            _ => {
                return Err(StructureError::Shape(
                    "give exactly one of phi or phis".into(),
                ))
            }
        };
        let xis = self
            .xi
            .iter()
            .map(|&k| {
                if k >= n {
                    return Err(StructureError::Shape(format!("xi slot {k} out of range")));
                }
                let mut v = DVector::zeros(n);
                v[k] = 1.0;
                Ok(v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let etas = match &self.eta {
            Some(list) => list
                .iter()
                .map(|e| {
                    (e.len() == n)
                        .then(|| DVector::from_column_slice(e))
                        .ok_or_else(|| StructureError::Shape(format!("eta needs {n} entries")))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => xis.iter().map(|x| model.metric() * x).collect(),
        };
        FramedStructure::new(self.kind, phis, xis, etas, mat(&self.q, "Q")?)
    }
}

/// Named residuals of one check, compared against [`PASS_TOL`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: &'static str,
    pub residuals: BTreeMap<String, f64>,
}

impl CheckReport {
    fn new(check: &'static str) -> Self {
        CheckReport {
            check,
            residuals: BTreeMap::new(),
        }
    }

    fn put(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        let slot = self.residuals.entry(name).or_insert(0.0);
        *slot = slot.max(value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }

    /// Largest residual; NaN counts as infinite.
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .values()
            .map(|v| if v.is_nan() { f64::INFINITY } else { *v })
            .fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.max_residual() <= PASS_TOL
    }
}

fn kind_mismatch(expected: StructureKind, s: &FramedStructure) -> StructureError {
    StructureError::KindMismatch {
        expected: expected.as_str(),
        found: s.kind.as_str(),
    }
}

/// Axioms of a weak almost contact structure and the derived identities
/// `φξ = 0`, `η∘φ = 0`, `[Q,φ] = 0`, `rank φ = 2n`.
pub fn check_weak_almost_contact(
    s: &FramedStructure,
    model: &LieFoliationModel,
) -> Result<CheckReport, StructureError> {
    if s.kind != StructureKind::Contact {
        return Err(kind_mismatch(StructureKind::Contact, s));
    }
    Ok(single_phi_axioms(s, model, "weak_almost_contact"))
}

/// Composition law of the structure's own kind together with the derived
/// identities.
pub fn check_axioms(s: &FramedStructure, model: &LieFoliationModel) -> CheckReport {
    match s.kind {
        StructureKind::Contact => single_phi_axioms(s, model, "weak_almost_contact"),
        StructureKind::FStructure => single_phi_axioms(s, model, "weak_f"),
        StructureKind::ParaPhi => single_phi_axioms(s, model, "weak_para_phi"),
        StructureKind::PContact => p_contact_axioms(s, model),
    }
}

fn single_phi_axioms(
    s: &FramedStructure,
    model: &LieFoliationModel,
    name: &'static str,
) -> CheckReport {
    let mut r = CheckReport::new(name);
    let phi = s.phi();
    let proj = s.projector();
    // φ² = -Q + Ση⊗ξ (almost contact, f); φ² = Q - Ση⊗ξ (para).
    let law = if s.kind == StructureKind::ParaPhi {
        phi * phi - &s.q + &proj
    } else {
        phi * phi + &s.q - &proj
    };
    r.put("phi_squared", max_abs(&law));
    frame_identities(&mut r, s);
    for (x, e) in s.xis.iter().zip(&s.etas) {
        r.put("phi_xi", max_abs_vec(&(phi * x)));
        r.put("eta_phi", (e.transpose() * phi).amax());
    }
    r.put("q_phi_commutator", max_abs(&linalg::commutator(&s.q, phi)));
    let expected = model.horizontal().len();
    r.put("rank", (linalg::rank(phi) as f64 - expected as f64).abs());
    r
}

fn frame_identities(r: &mut CheckReport, s: &FramedStructure) {
    for (i, e) in s.etas.iter().enumerate() {
        for (j, x) in s.xis.iter().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            r.put("eta_xi", (e.dot(x) - delta).abs());
        }
    }
    for x in &s.xis {
        r.put("q_xi", max_abs_vec(&(&s.q * x - x)));
    }
}

/// `φ_iφ_j + δ_ijQ - ηʲ⊗ξ_i - Σ_k ε_ijk φ_k = 0` for all `(i, j)`, together with
/// `φ_iξ_j = Σ_k ε_ijk ξ_k`, `ηⁱ∘φ_j = Σ_k ε_ijk ηᵏ`, `Qξ_i = ξ_i`, `[Q, φ_i] = 0`
/// and the rank of each `φ_i`.
pub fn check_p_contact(
    s: &FramedStructure,
    model: &LieFoliationModel,
) -> Result<CheckReport, StructureError> {
    if s.kind != StructureKind::PContact {
        return Err(kind_mismatch(StructureKind::PContact, s));
    }
    Ok(p_contact_axioms(s, model))
}

fn p_contact_axioms(s: &FramedStructure, model: &LieFoliationModel) -> CheckReport {
    let mut r = CheckReport::new("weak_p_contact");
    let p = s.p();
    let n = s.dim();
    for i in 0..p {
        for j in 0..p {
            let mut lhs = &s.phis[i] * &s.phis[j] - &s.xis[i] * s.etas[j].transpose();
            if i == j {
                lhs += &s.q;
            }
            let mut rot_xi = DVector::zeros(n);
            let mut rot_eta = DVector::zeros(n);
            for k in 0..p {
                let e = epsilon(p, i, j, k);
                if e != 0.0 {
                    lhs -= &s.phis[k] * e;
                    rot_xi += &s.xis[k] * e;
                    rot_eta += &s.etas[k] * e;
                }
            }
            r.put("composition", max_abs(&lhs));
            r.put("phi_xi", max_abs_vec(&(&s.phis[i] * &s.xis[j] - rot_xi)));
            r.put(
                "eta_phi",
                (s.etas[i].transpose() * &s.phis[j] - rot_eta.transpose()).amax(),
            );
        }
    }
    frame_identities(&mut r, s);
    let expected = model.horizontal().len() + if p == 3 { 2 } else { 0 };
    for phi in &s.phis {
        r.put("q_phi_commutator", max_abs(&linalg::commutator(&s.q, phi)));
        r.put("rank", (linalg::rank(phi) as f64 - expected as f64).abs());
    }
    r
}

/// Metric compatibility: `g(φX,φY) = g(X,QY) - Σηⁱ(X)ηⁱ(Y)` (contact, f;
/// per `i` for p-contact) or `g(φX,φY) = -g(X,QY) + Σηⁱ(X)ηⁱ(Y)` (para),
/// plus `φ` g-skew, `Q` g-self-adjoint and `ξ_i` g-orthonormal.
pub fn check_metric_compat(s: &FramedStructure, model: &LieFoliationModel) -> CheckReport {
    let mut r = CheckReport::new("metric_compatibility");
    let g = model.metric();
    let gq = g * &s.q;
    let eta_pair = |i: usize| &s.etas[i] * s.etas[i].transpose();
    match s.kind {
        StructureKind::PContact => {
            for (i, phi) in s.phis.iter().enumerate() {
                let lhs = phi.transpose() * g * phi;
                r.put("compatibility", max_abs(&(lhs - &gq + eta_pair(i))));
            }
        }
        kind => {
            let phi = s.phi();
            let lhs = phi.transpose() * g * phi;
            let pairs =
                (0..s.p()).fold(DMatrix::zeros(s.dim(), s.dim()), |acc, i| acc + eta_pair(i));
            let res = if kind == StructureKind::ParaPhi {
                lhs + &gq - pairs
            } else {
                lhs - &gq + pairs
            };
            r.put("compatibility", max_abs(&res));
        }
    }
    for phi in &s.phis {
        r.put("phi_skew", linalg::skew_residual(&(g * phi)));
    }
    r.put("q_self_adjoint", linalg::asymmetry(&gq));
    for (i, x) in s.xis.iter().enumerate() {
        for (j, y) in s.xis.iter().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            r.put(
                "xi_orthonormal",
                ((x.transpose() * g * y)[(0, 0)] - delta).abs(),
            );
        }
    }
    r
}

/// Residuals of `dηⁱ = F`, `dηⁱ = 0` and `dF = 0`, with `F = g(·, φ·)`
/// (`F_i` from `φ_i` for p-contact).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContactMetricReport {
    /// `‖dηⁱ - F‖∞` per `i`.
    pub d_eta_minus_f: Vec<f64>,
    /// Same, restricted to horizontal pairs.
    pub d_eta_minus_f_horizontal: Vec<f64>,
    /// `‖dηⁱ‖∞` per `i`.
    pub d_eta: Vec<f64>,
    /// `max |dF|` over frame triples (worst `F_i` for p-contact).
    pub d_f: f64,
}

impl ContactMetricReport {
    pub fn contact_ok(&self) -> bool {
        self.d_eta_minus_f.iter().all(|v| *v <= PASS_TOL)
    }

    pub fn closed_ok(&self) -> bool {
        self.d_eta.iter().all(|v| *v <= PASS_TOL)
    }

    pub fn df_ok(&self) -> bool {
        self.d_f <= PASS_TOL
    }
}

pub fn check_contact_metric(s: &FramedStructure, model: &LieFoliationModel) -> ContactMetricReport {
    let g = model.metric();
    let hz = model.horizontal();
    let mut out = ContactMetricReport {
        d_eta_minus_f: Vec::new(),
        d_eta_minus_f_horizontal: Vec::new(),
        d_eta: Vec::new(),
        d_f: 0.0,
    };
    for (i, eta) in s.etas.iter().enumerate() {
        let phi = if s.kind == StructureKind::PContact {
            &s.phis[i]
        } else {
            s.phi()
        };
        let f = g * phi;
        let de = geometry::d_eta(model, eta);
        let diff = &de - &f;
        out.d_eta_minus_f.push(max_abs(&diff));
        out.d_eta_minus_f_horizontal
            .push(max_abs(&linalg::submatrix(&diff, hz, hz)));
        out.d_eta.push(max_abs(&de));
    }
    for phi in &s.phis {
        out.d_f = out
            .d_f
            .max(geometry::d_two_form_residual(model, &(g * phi)));
    }
    out
}

/// `φ + φ'` with `Q = id - (φφ' + φ'φ) - φ'²` on `𝒟` and `Q = id` on the
/// vertical distribution.
pub fn perturb_structure(
    classical: &FramedStructure,
    phi_prime: &DMatrix<f64>,
    model: &LieFoliationModel,
) -> Result<FramedStructure, StructureError> {
    if classical.kind == StructureKind::PContact {
        return Err(StructureError::KindMismatch {
            expected: "contact or f_structure",
            found: classical.kind.as_str(),
        });
    }
    let n = classical.dim();
    if phi_prime.nrows() != n || phi_prime.ncols() != n {
        return Err(StructureError::Shape(format!("phi' must be {n}x{n}")));
    }
    let phi = classical.phi();
    let comm = max_abs(&linalg::commutator(phi, phi_prime));
    if comm > COMMUTE_TOL {
        return Err(StructureError::NonCommuting(comm));
    }
    let mut leak = 0.0_f64;
    for (x, e) in classical.xis.iter().zip(&classical.etas) {
        leak = leak
            .max(max_abs_vec(&(phi_prime * x)))
            .max((e.transpose() * phi_prime).amax());
    }
    if leak > COMMUTE_TOL {
        return Err(StructureError::VerticalLeak(leak));
    }
    let id = DMatrix::identity(n, n);
    let mut q = &id - (phi * phi_prime + phi_prime * phi) - phi_prime * phi_prime;
    for &v in model.vertical() {
        for k in 0..n {
            q[(v, k)] = id[(v, k)];
            q[(k, v)] = id[(k, v)];
        }
    }
    FramedStructure::new(
        classical.kind,
        vec![phi + phi_prime],
        classical.xis.clone(),
        classical.etas.clone(),
        q,
    )
}

/// Random `φ'` commuting with `φ`, zero on the vertical distribution, with
/// entries of order `scale`. Requires `φ|𝒟` to be a complex structure
/// (`φ² = -id` on `𝒟`); the commutant projection `M ↦ ½(M - φMφ)` is
/// applied to a random matrix on `𝒟`, skew-symmetrized first when `skew`.
pub fn random_commuting_perturbation<R: Rng + ?Sized>(
    model: &LieFoliationModel,
    classical: &FramedStructure,
    scale: f64,
    skew: bool,
    rng: &mut R,
) -> Result<DMatrix<f64>, StructureError> {
    let hz = model.horizontal();
    let m = hz.len();
    let j = linalg::submatrix(classical.phi(), hz, hz);
    let sq = max_abs(&(&j * &j + DMatrix::identity(m, m)));
    if sq > PASS_TOL {
        return Err(StructureError::Shape(format!(
            "phi on the horizontal distribution is not a complex structure (residual {sq:e})"
        )));
    }
    let mut raw = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0) * scale);
    if skew {
        raw = (&raw - raw.transpose()) * 0.5;
    }
    let projected = (&raw - &j * &raw * &j) * 0.5;
    Ok(embed(model, &projected))
}

/// Metric in which the columns of `frame` are orthonormal, `G = (S Sᵀ)⁻¹`.
/// Requires `S⁻¹φS` to be antisymmetric.
pub fn compatible_metric_from_frame(
    phi: &DMatrix<f64>,
    frame: &DMatrix<f64>,
) -> Result<DMatrix<f64>, StructureError> {
    let n = phi.nrows();
    if phi.ncols() != n || frame.nrows() != n || frame.ncols() != n {
        return Err(StructureError::Shape(
            "phi and frame must be square of equal size".into(),
        ));
    }
    if linalg::min_singular_value(frame) <= RANK_TOL {
        return Err(StructureError::SingularFrame);
    }
    let s_inv = frame
        .clone()
        .try_inverse()
        .ok_or(StructureError::SingularFrame)?;
    let in_frame = &s_inv * phi * frame;
    let skew = linalg::skew_residual(&in_frame) * 0.5;
    if skew > PASS_TOL {
        return Err(StructureError::NotSkewInFrame(skew));
    }
    Ok(s_inv.transpose() * &s_inv)
}

/// Largest `|Re λ|` over the eigenvalues of `φ`. Skew representations have
/// purely imaginary spectrum, so a positive value rules out every frame.
pub fn real_eigenvalue_obstruction(phi: &DMatrix<f64>) -> f64 {
    linalg::eigenvalues_general(phi)
        .into_iter()
        .map(|(re, _)| re.abs())
        .fold(0.0, f64::max)
}

/// Taxonomy of weak structures, ordered within each family by specificity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureClass {
    NotAStructure,
    WeakAlmostContact,
    WeakAlmostContactMetric,
    WeakContactMetric,
    WeakSasakian,
    WeakAlmostPContact,
    WeakAlmostPContactMetric,
    WeakPContactMetric,
    WeakPSasakian,
    WeakGloballyFramedF,
    MetricWeakF,
    WeakAlmostS,
    WeakAlmostC,
    WeakK,
    WeakS,
    WeakC,
    WeakAlmostParaPhi,
    MetricWeakParaPhi,
    WeakAlmostParaS,
    WeakParaS,
}

/// Pass/fail flags feeding [`StructureClass::from_flags`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ClassFlags {
    pub axioms: bool,
    pub metric: bool,
    /// `dηⁱ = F` for every `i`.
    pub contact: bool,
    /// `dηⁱ = 0` for every `i`.
    pub closed: bool,
    /// `dF = 0`.
    pub df: bool,
    pub normal: bool,
}

impl StructureClass {
    pub fn from_flags(kind: StructureKind, f: ClassFlags) -> Self {
        use StructureClass::*;
        if !f.axioms {
            return NotAStructure;
        }
        match kind {
            StructureKind::Contact | StructureKind::PContact => {
                let p = kind == StructureKind::PContact;
                match (f.metric, f.contact, f.normal) {
                    (false, _, _) => {
                        if p {
                            WeakAlmostPContact
                        } else {
                            WeakAlmostContact
                        }
                    }
                    (true, true, true) => {
                        if p {
                            WeakPSasakian
                        } else {
                            WeakSasakian
                        }
                    }
                    (true, true, false) => {
                        if p {
                            WeakPContactMetric
                        } else {
                            WeakContactMetric
                        }
                    }
                    (true, false, _) => {
                        if p {
                            WeakAlmostPContactMetric
                        } else {
                            WeakAlmostContactMetric
                        }
                    }
                }
            }
            StructureKind::FStructure => {
                if !f.metric {
                    WeakGloballyFramedF
                } else if f.normal && f.df && f.contact {
                    WeakS
                } else if f.normal && f.df && f.closed {
                    WeakC
                } else if f.normal && f.df {
                    WeakK
                } else if f.contact {
                    WeakAlmostS
                } else if f.closed {
                    WeakAlmostC
                } else {
                    MetricWeakF
                }
            }
            StructureKind::ParaPhi => match (f.metric, f.contact, f.normal) {
                (false, _, _) => WeakAlmostParaPhi,
                (true, true, true) => WeakParaS,
                (true, true, false) => WeakAlmostParaS,
                (true, false, _) => MetricWeakParaPhi,
            },
        }
    }

    /// Specificity within a family; larger is more specific.
    pub fn rank(self) -> u8 {
        use StructureClass::*;
        match self {
            NotAStructure => 0,
            WeakAlmostContact | WeakAlmostPContact | WeakGloballyFramedF | WeakAlmostParaPhi => 1,
            WeakAlmostContactMetric
            | WeakAlmostPContactMetric
            | MetricWeakF
            | MetricWeakParaPhi => 2,
            WeakContactMetric | WeakPContactMetric | WeakAlmostS | WeakAlmostC | WeakK
            | WeakAlmostParaS => 3,
            WeakSasakian | WeakPSasakian | WeakS | WeakC | WeakParaS => 4,
        }
    }

    /// Human-readable label; `classical` switches to the `Q = id` wording.
    pub fn label(self, classical: bool) -> &'static str {
        use StructureClass::*;
        let (weak, classic) = match self {
            NotAStructure => ("not a weak structure", "not a weak structure"),
            WeakAlmostContact => ("weak almost contact", "almost contact (classical)"),
            WeakAlmostContactMetric => (
                "weak almost contact metric",
                "almost contact metric (classical)",
            ),
            WeakContactMetric => (
                "weak contact metric, non-normal",
                "contact metric (classical), non-normal",
            ),
            WeakSasakian => ("weak Sasakian", "Sasakian (classical)"),
            WeakAlmostPContact => ("weak almost p-contact", "almost p-contact (classical)"),
            WeakAlmostPContactMetric => (
                "weak almost p-contact metric",
                "almost p-contact metric (classical)",
            ),
            WeakPContactMetric => (
                "weak p-contact metric, non-normal",
                "p-contact metric (classical), non-normal",
            ),
            WeakPSasakian => ("weak p-Sasakian", "p-Sasakian (classical)"),
            WeakGloballyFramedF => ("weak globally framed f", "globally framed f (classical)"),
            MetricWeakF => ("metric weak f", "metric f (classical)"),
            WeakAlmostS => ("weak almost S", "almost S-structure (classical)"),
            WeakAlmostC => ("weak almost C", "almost C-structure (classical)"),
            WeakK => ("weak K", "metric K-structure (classical)"),
            WeakS => ("weak S", "metric S-structure (classical)"),
            WeakC => ("weak C", "metric C-structure (classical)"),
            WeakAlmostParaPhi => ("weak almost para-phi", "almost para-phi (classical)"),
            MetricWeakParaPhi => ("metric weak para-phi", "metric para-phi (classical)"),
            WeakAlmostParaS => ("weak almost para-S", "almost para-S (classical)"),
            WeakParaS => ("weak para-S", "para-S (classical)"),
        };
        if classical {
            classic
        } else {
            weak
        }
    }
}

/// Lowercase label with runs of non-alphanumerics collapsed to `-`.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub label: String,
    pub slug: String,
    pub kind: StructureKind,
    pub class: StructureClass,
    pub classical: bool,
    pub residuals: BTreeMap<String, f64>,
}

/// Most specific class whose defining residuals all pass.
pub fn classify(s: &FramedStructure, model: &LieFoliationModel) -> Classification {
    let axioms = check_axioms(s, model);
    let metric = check_metric_compat(s, model);
    let contact = check_contact_metric(s, model);
    let normality = geometry::normality_residual(model, s);
    let flags = ClassFlags {
        axioms: axioms.passes(),
        metric: metric.passes(),
        contact: contact.contact_ok(),
        closed: contact.closed_ok(),
        df: contact.df_ok(),
        normal: normality <= PASS_TOL,
    };
    let class = StructureClass::from_flags(s.kind, flags);
    let classical = s.is_classical();
    let label = class.label(classical).to_string();
    let mut residuals = BTreeMap::new();
    for (k, v) in &axioms.residuals {
        residuals.insert(format!("axioms.{k}"), *v);
    }
    for (k, v) in &metric.residuals {
        residuals.insert(format!("metric.{k}"), *v);
    }
    let worst = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    residuals.insert("d_eta_minus_f".into(), worst(&contact.d_eta_minus_f));
    residuals.insert(
        "d_eta_minus_f_horizontal".into(),
        worst(&contact.d_eta_minus_f_horizontal),
    );
    residuals.insert("d_eta".into(), worst(&contact.d_eta));
    residuals.insert("d_f".into(), contact.d_f);
    residuals.insert("normality".into(), normality);
    residuals.insert("q_minus_id".into(), s.q_deviation());
    Classification {
        slug: slug(&label),
        label,
        kind: s.kind,
        class,
        classical,
        residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;

    fn canonical(name: &str, params: &[f64]) -> (LieFoliationModel, FramedStructure) {
        let m = builtin(name, params).unwrap();
        let s = FramedStructure::canonical(&m, default_kind(&m)).unwrap();
        (m, s)
    }

    #[test]
    fn classical_heisenberg_has_zero_residuals() {
        let (m, s) = canonical("heisenberg", &[1.0]);
        let r = check_weak_almost_contact(&s, &m).unwrap();
        assert_eq!(r.max_residual(), 0.0, "{r:?}");
        assert!(s.is_classical());
    }

    #[test]
    fn heterogeneous_heisenberg_q_blocks() {
        let (m, s) = canonical("heisenberg", &[2.0, 3.0]);
        let diag: Vec<f64> = (0..5).map(|i| s.q[(i, i)]).collect();
        assert_eq!(diag, vec![4.0, 4.0, 9.0, 9.0, 1.0]);
        assert!(check_weak_almost_contact(&s, &m).unwrap().passes());

        let bad = FramedStructure {
            q: DMatrix::identity(5, 5),
            ..s
        };
        let r = check_weak_almost_contact(&bad, &m).unwrap();
        assert_eq!(r.get("phi_squared"), Some(8.0));
        assert!(!r.passes());
    }

    #[test]
    fn kind_mismatch_reported() {
        let (m, s) = canonical("quat_heisenberg", &[1.0]);
        assert_eq!(s.kind, StructureKind::PContact);
        assert!(matches!(
            check_weak_almost_contact(&s, &m),
            Err(StructureError::KindMismatch { .. })
        ));
        let (m, s) = canonical("heisenberg", &[1.0]);
        assert!(matches!(
            check_p_contact(&s, &m),
            Err(StructureError::KindMismatch { .. })
        ));
    }

    #[test]
    fn metric_compatibility_examples() {
        for (name, params) in [
            ("heisenberg", vec![2.0, 3.0]),
            ("heisenberg", vec![1.0]),
            ("para_model", vec![1.0, 1.0]),
        ] {
            let (m, s) = canonical(name, &params);
            let r = check_metric_compat(&s, &m);
            assert!(r.passes(), "{name}: {r:?}");
        }
    }

    #[test]
    fn d_eta_equals_f_on_heisenberg() {
        let (m, s) = canonical("heisenberg", &[2.0, 3.0]);
        let de = geometry::d_eta(&m, &s.etas[0]);
        let f = m.metric() * s.phi();
        assert_eq!(de[(0, 1)], -2.0);
        assert_eq!(f[(0, 1)], -2.0);
        let rep = check_contact_metric(&s, &m);
        assert!(rep.contact_ok());
    }

    #[test]
    fn s_model_is_almost_s() {
        for a in [1.0, 3.0] {
            let (m, s) = canonical("s_model", &[1.0, 2.0, a]);
            assert_eq!(s.kind, StructureKind::FStructure);
            let rep = check_contact_metric(&s, &m);
            assert!(rep.contact_ok(), "{rep:?}");
            let de = geometry::d_eta(&m, &s.etas[1]);
            assert_eq!(de[(0, 1)], -a);
        }
    }

    #[test]
    fn abelian_model_is_almost_c() {
        let m = LieFoliationModel::abelian(4, 2).unwrap();
        let mut phi = DMatrix::zeros(4, 4);
        phi[(1, 0)] = 1.0;
        phi[(0, 1)] = -1.0;
        let q = DMatrix::identity(4, 4);
        let s = FramedStructure::new(
            StructureKind::FStructure,
            vec![phi],
            vec![m.xi(0), m.xi(1)],
            vec![m.eta(0), m.eta(1)],
            q,
        )
        .unwrap();
        let rep = check_contact_metric(&s, &m);
        assert!(rep.closed_ok());
        let c = classify(&s, &m);
        // Brackets vanish, so the structure is also normal and dF = 0.
        assert_eq!(c.class, StructureClass::WeakC);
    }

    #[test]
    fn quaternionic_composition_table() {
        let (m, s) = canonical("quat_heisenberg", &[1.0]);
        let r = check_p_contact(&s, &m).unwrap();
        assert_eq!(r.max_residual(), 0.0, "{r:?}");
        for a in [2.0, 0.5, -1.5] {
            let (m, s) = canonical("quat_heisenberg", &[a]);
            let r = check_p_contact(&s, &m).unwrap();
            assert!(
                (r.get("composition").unwrap() - (a * a - a).abs()).abs() < 1e-12,
                "{r:?}"
            );
            assert!((s.q[(0, 0)] - a * a).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_examples() {
        let (m, s) = canonical("heisenberg", &[1.0]);
        let same = perturb_structure(&s, &DMatrix::zeros(3, 3), &m).unwrap();
        assert_eq!(same, s);

        let scaled = perturb_structure(&s, &(s.phi() * 0.1), &m).unwrap();
        assert!((scaled.q[(0, 0)] - 1.21).abs() < 1e-15);
        assert!((scaled.q[(1, 1)] - 1.21).abs() < 1e-15);
        assert_eq!(scaled.q[(2, 2)], 1.0);
        assert!(check_weak_almost_contact(&scaled, &m).unwrap().passes());

        assert!(matches!(
            perturb_structure(&s, &-s.phi(), &m),
            Err(StructureError::SingularQ(_))
        ));
        let mut sym = DMatrix::zeros(3, 3);
        sym[(0, 0)] = 0.1;
        assert!(matches!(
            perturb_structure(&s, &sym, &m),
            Err(StructureError::NonCommuting(_))
        ));
    }

    #[test]
    fn compatible_metric_examples() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert_eq!(
            compatible_metric_from_frame(&j, &DMatrix::identity(2, 2)).unwrap(),
            DMatrix::identity(2, 2)
        );
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let phi = &s * &j * s.clone().try_inverse().unwrap();
        let g = compatible_metric_from_frame(&phi, &s).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0]));
        // With Q = -φ²: g(φX, φY) = g(X, QY).
        let q = -(&phi * &phi);
        assert!(max_abs(&(phi.transpose() * &g * &phi - &g * q)) < 1e-15);

        let hyperbolic = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(real_eigenvalue_obstruction(&hyperbolic) > 0.5);
        assert!(matches!(
            compatible_metric_from_frame(&hyperbolic, &DMatrix::identity(2, 2)),
            Err(StructureError::NotSkewInFrame(_))
        ));
        assert!(matches!(
            compatible_metric_from_frame(&j, &DMatrix::zeros(2, 2)),
            Err(StructureError::SingularFrame)
        ));
    }

    #[test]
    fn classification_examples() {
        let (m, s) = canonical("heisenberg", &[1.0]);
        assert_eq!(classify(&s, &m).label, "Sasakian (classical)");
        let (m, s) = canonical("heisenberg", &[2.0, 3.0]);
        let c = classify(&s, &m);
        assert_eq!(c.label, "weak contact metric, non-normal");
        assert_eq!(c.slug, "weak-contact-metric-non-normal");
        let (m, s) = canonical("s_model", &[1.0, 2.0, 1.0]);
        assert_eq!(classify(&s, &m).label, "metric S-structure (classical)");
        let (m, s) = canonical("para_model", &[1.0, 1.0]);
        assert_eq!(classify(&s, &m).label, "para-S (classical)");
        let (m, s) = canonical("su2", &[]);
        assert_eq!(classify(&s, &m).label, "Sasakian (classical)");
    }

    #[test]
    fn structure_file_round_trip() {
        let (m, s) = canonical("quat_heisenberg", &[2.0]);
        let text = serde_json::to_string(&s.to_file()).unwrap();
        let back: StructureFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_structure(&m).unwrap(), s);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Sasakian (classical)"), "sasakian-classical");
        assert_eq!(slug("metric weak para-phi"), "metric-weak-para-phi");
    }
}
