//! Connection, curvature and foliation tensors of a model.
//!
//! Conventions:
//! * `∇_{E_i} E_j = Σ_k Γ^k_ij E_k` from the Koszul formula on invariant fields.
//! * `R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_{[X,Y]} Z`.
//! * Mixed curvature is oriented so that the Jacobi operator
//!   `X ↦ (R(X,ξ)ξ)^⊥` and hence `Ric^⊥` are nonnegative on compatible models;
//!   this is the orientation in which `Ric^⊥ = -Σ_i (T♯_{ξ_i})²`.
//! * `dη(X,Y) = ½(Xη(Y) - Yη(X) - η([X,Y]))`, which on invariant fields is
//!   `-½ η([X,Y])`.
//!
//! Operators on `𝒟` are `m×m` matrices in the horizontal frame slots
//! (`m = N - p`), acting on column coordinate vectors.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::GeometryError;
use crate::linalg::{self, max_abs, RANK_TOL};
use crate::model::{self, LieFoliationModel};
use crate::structures::{FramedStructure, StructureKind};

/// Tolerance on the compatibility residuals for the algebraic identities.
pub const COMPAT_TOL: f64 = 1e-10;

/// Levi-Civita connection as one matrix per frame direction:
/// `nabla(i)[(k, j)] = Γ^k_ij`.
#[derive(Clone, Debug)]
pub struct Connection {
    dim: usize,
    ops: Vec<DMatrix<f64>>,
}

impl Connection {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Matrix of `∇_{E_i}` acting on constant-coefficient fields.
    pub fn nabla(&self, i: usize) -> &DMatrix<f64> {
        &self.ops[i]
    }

    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        self.ops[i][(k, j)]
    }

    /// `∇_X Y` for constant-coefficient fields.
    pub fn covariant(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (i, op) in self.ops.iter().enumerate() {
            if x[i] != 0.0 {
                out += op * y * x[i];
            }
        }
        out
    }

    /// `max_i ‖G·∇_i + (G·∇_i)ᵀ‖∞`, zero for a metric connection.
    pub fn metric_residual(&self, model: &LieFoliationModel) -> f64 {
        self.ops
            .iter()
            .map(|op| linalg::skew_residual(&(model.metric() * op)))
            .fold(0.0, f64::max)
    }

    /// `max |Γ^k_ij - Γ^k_ji - c^k_ij|`.
    pub fn torsion_residual(&self, model: &LieFoliationModel) -> f64 {
        let n = self.dim;
        let c = model.brackets();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let r = self.gamma(k, i, j) - self.gamma(k, j, i) - c.get(i, j, k);
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }

    /// `Γ^k_ij` at flat index `(k·N + i)·N + j`.
    pub fn flattened(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out.push(self.gamma(k, i, j));
                }
            }
        }
        out
    }
}

/// Koszul formula on the invariant frame:
/// `2g(∇_{E_i}E_j, E_k) = g([E_i,E_j],E_k) - g([E_j,E_k],E_i) + g([E_k,E_i],E_j)`.
pub fn levi_civita(model: &LieFoliationModel) -> Result<Connection, GeometryError> {
    let n = model.dim();
    let g = model.metric();
    let smin = linalg::min_singular_value(g);
    if smin <= RANK_TOL {
        return Err(GeometryError::DegenerateMetric(smin));
    }
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or(GeometryError::DegenerateMetric(smin))?;
    let c = model.brackets();
    // lowered[(i*n + j)*n + k] = g([E_i,E_j], E_k)
    let mut lowered = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for m in 0..n {
                    s += c.get(i, j, m) * g[(m, k)];
                }
                lowered[(i * n + j) * n + k] = s;
            }
        }
    }
    let low = |i: usize, j: usize, k: usize| lowered[(i * n + j) * n + k];
    let mut ops = Vec::with_capacity(n);
    for i in 0..n {
        let koszul = DMatrix::from_fn(n, n, |j, l| {
            0.5 * (low(i, j, l) - low(j, l, i) + low(l, i, j))
        });
        // koszul[(j, l)] = g(∇_i E_j, E_l); raise l.
        ops.push(&g_inv * koszul.transpose());
    }
    Ok(Connection { dim: n, ops })
}

/// Curvature operators `R(E_i, E_j)` stored at `i·N + j`.
#[derive(Clone, Debug)]
pub struct Curvature {
    dim: usize,
    ops: Vec<DMatrix<f64>>,
}

impl Curvature {
    pub fn operator(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.ops[i * self.dim + j]
    }

    /// `R(X,Y)Z` for constant-coefficient fields.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let w = x[i] * y[j];
                if w != 0.0 {
                    out += self.operator(i, j) * z * w;
                }
            }
        }
        out
    }

    /// `g(R(E_i,E_j)E_k, E_l)`.
    pub fn component(
        &self,
        model: &LieFoliationModel,
        i: usize,
        j: usize,
        k: usize,
        l: usize,
    ) -> f64 {
        let col = self.operator(i, j).column(k);
        (model.metric().row(l) * col)[(0, 0)]
    }

    /// Sectional curvature `g(R(X,Y)Y, X) / (|X|²|Y|² - g(X,Y)²)`.
    pub fn sectional(&self, model: &LieFoliationModel, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let g = model.metric();
        let num = (x.transpose() * g * self.apply(x, y, y))[(0, 0)];
        let gxx = (x.transpose() * g * x)[(0, 0)];
        let gyy = (y.transpose() * g * y)[(0, 0)];
        let gxy = (x.transpose() * g * y)[(0, 0)];
        num / (gxx * gyy - gxy * gxy)
    }

    /// Largest violation of the pair symmetries of `R(X,Y,Z,W)`.
    pub fn symmetry_residual(&self, model: &LieFoliationModel) -> f64 {
        let n = self.dim;
        let mut comp = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                let gr = model.metric() * self.operator(i, j);
                for k in 0..n {
                    for l in 0..n {
                        comp[((i * n + j) * n + k) * n + l] = gr[(l, k)];
                    }
                }
            }
        }
        let at = |i: usize, j: usize, k: usize, l: usize| comp[((i * n + j) * n + k) * n + l];
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = at(i, j, k, l);
                        worst = worst
                            .max((r + at(j, i, k, l)).abs())
                            .max((r + at(i, j, l, k)).abs())
                            .max((r - at(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// `max ‖R(E_i,E_j)E_k + R(E_j,E_k)E_i + R(E_k,E_i)E_j‖∞`.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = self.operator(i, j).column(k)
                        + self.operator(j, k).column(i)
                        + self.operator(k, i).column(j);
                    worst = worst.max(s.amax());
                }
            }
        }
        worst
    }

    /// `l`-th coordinate of `R(E_i,E_j)E_k` at flat index `((i·N + j)·N + k)·N + l`.
    pub fn flattened(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = Vec::with_capacity(n * n * n * n);
        for i in 0..n {
            for j in 0..n {
                let op = self.operator(i, j);
                for k in 0..n {
                    for l in 0..n {
                        out.push(op[(l, k)]);
                    }
                }
            }
        }
        out
    }
}

/// `R(E_i,E_j) = [∇_i, ∇_j] - Σ_m c^m_ij ∇_m`.
pub fn curvature(model: &LieFoliationModel, conn: &Connection) -> Curvature {
    let n = model.dim();
    let c = model.brackets();
    let mut ops = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut r = linalg::commutator(conn.nabla(i), conn.nabla(j));
            for m in 0..n {
                let w = c.get(i, j, m);
                if w != 0.0 {
                    r -= conn.nabla(m) * w;
                }
            }
            ops.push(r);
        }
    }
    Curvature { dim: n, ops }
}

/// Foliation tensors, one entry per vertical field `ξ_i`.
#[derive(Clone, Debug)]
pub struct FoliationTensors {
    /// `g(h(E_a,E_b), ξ_i)` on horizontal slots.
    pub h: Vec<DMatrix<f64>>,
    /// `g(T(E_a,E_b), ξ_i)` on horizontal slots.
    pub t: Vec<DMatrix<f64>>,
    pub a: Vec<DMatrix<f64>>,
    pub tsharp: Vec<DMatrix<f64>>,
    pub c: Vec<DMatrix<f64>>,
    /// `max_i ‖C_ξ - A_ξ - T♯_ξ‖∞`.
    pub splitting_residual: f64,
}

pub fn foliation_tensors(model: &LieFoliationModel, conn: &Connection) -> FoliationTensors {
    let hz = model.horizontal();
    let m = hz.len();
    let g = model.metric();
    let gh_inv = model
        .horizontal_metric()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::zeros(m, m));
    let mut out = FoliationTensors {
        h: Vec::new(),
        t: Vec::new(),
        a: Vec::new(),
        tsharp: Vec::new(),
        c: Vec::new(),
        splitting_residual: 0.0,
    };
    for &v in model.vertical() {
        let g_xi = g.column(v).into_owned();
        let along = |w: DVector<f64>| w.dot(&g_xi);
        let mut h = DMatrix::zeros(m, m);
        let mut t = DMatrix::zeros(m, m);
        for (a, &ia) in hz.iter().enumerate() {
            for (b, &ib) in hz.iter().enumerate() {
                let xy = conn.nabla(ia).column(ib).into_owned();
                let yx = conn.nabla(ib).column(ia).into_owned();
                h[(a, b)] = 0.5 * along(&xy + &yx);
                t[(a, b)] = 0.5 * along(&xy - &yx);
            }
        }
        let a_op = &gh_inv * h.transpose();
        let ts = &gh_inv * t.transpose();
        let c_op = DMatrix::from_fn(m, m, |r, col| -conn.nabla(hz[col])[(hz[r], v)]);
        let split = max_abs(&(&c_op - &a_op - &ts));
        out.splitting_residual = out.splitting_residual.max(split);
        out.h.push(h);
        out.t.push(t);
        out.a.push(a_op);
        out.tsharp.push(ts);
        out.c.push(c_op);
    }
    out
}

/// `∇_{ξ_i}` of an invariant operator on `𝒟`: `[∇_{ξ_i}|_𝒟, op]`.
pub fn nabla_vertical(
    model: &LieFoliationModel,
    conn: &Connection,
    i: usize,
    op: &DMatrix<f64>,
) -> DMatrix<f64> {
    let hz = model.horizontal();
    let block = linalg::submatrix(conn.nabla(model.vertical()[i]), hz, hz);
    linalg::commutator(&block, op)
}

/// Partial Ricci curvature: the bilinear `r_g` on the full frame (zero off
/// `𝒟`) and its `g`-adjoint `Ric^⊥` on `𝒟`.
#[derive(Clone, Debug)]
pub struct PartialRicci {
    pub r_g: DMatrix<f64>,
    pub ric_perp: DMatrix<f64>,
}

impl PartialRicci {
    /// `‖r_g - r_gᵀ‖∞`.
    pub fn asymmetry(&self) -> f64 {
        linalg::asymmetry(&self.r_g)
    }
}

/// `Ric^⊥ X = Σ_i (R(X, ξ_i) ξ_i)^⊥` from the full curvature tensor.
pub fn partial_ricci(model: &LieFoliationModel, curv: &Curvature) -> PartialRicci {
    let hz = model.horizontal();
    let m = hz.len();
    let mut ric = DMatrix::zeros(m, m);
    for &v in model.vertical() {
        for (a, &ia) in hz.iter().enumerate() {
            let col = curv.operator(ia, v).column(v);
            for (b, &ib) in hz.iter().enumerate() {
                ric[(b, a)] += col[ib];
            }
        }
    }
    let bilinear: DMatrix<f64> = ric.transpose() * model.horizontal_metric();
    let n = model.dim();
    let mut r_g = DMatrix::zeros(n, n);
    for (a, &ia) in hz.iter().enumerate() {
        for (b, &ib) in hz.iter().enumerate() {
            r_g[(ia, ib)] = bilinear[(a, b)];
        }
    }
    PartialRicci { r_g, ric_perp: ric }
}

fn require_compatible(model: &LieFoliationModel) -> Result<(), GeometryError> {
    let rep = model::check_compatible(model);
    if rep.max() > COMPAT_TOL {
        return Err(GeometryError::NotCompatible {
            residual: rep.max(),
            tolerance: COMPAT_TOL,
        });
    }
    Ok(())
}

/// `-Σ_i (T♯_{ξ_i})²` on `𝒟`; valid on compatible models only.
pub fn partial_ricci_algebraic(model: &LieFoliationModel) -> Result<DMatrix<f64>, GeometryError> {
    require_compatible(model)?;
    let conn = levi_civita(model)?;
    let tensors = foliation_tensors(model, &conn);
    Ok(ric_from_tsharp(&tensors.tsharp))
}

pub(crate) fn ric_from_tsharp(tsharp: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = tsharp.first().map_or(0, |t| t.nrows());
    tsharp
        .iter()
        .fold(DMatrix::zeros(m, m), |acc, t| acc - t * t)
}

/// `X ↦ (R(X, ξ_i) ξ_j)^⊥` on `𝒟`; the Jacobi operator `R_ξ` when `i = j`.
pub fn mixed_jacobi(
    model: &LieFoliationModel,
    curv: &Curvature,
    i: usize,
    j: usize,
) -> Result<DMatrix<f64>, GeometryError> {
    let p = model.p();
    if i >= p || j >= p {
        return Err(GeometryError::BadVerticalIndex(i, j));
    }
    require_compatible(model)?;
    let hz = model.horizontal();
    let (vi, vj) = (model.vertical()[i], model.vertical()[j]);
    Ok(DMatrix::from_fn(hz.len(), hz.len(), |b, a| {
        curv.operator(hz[a], vi)[(hz[b], vj)]
    }))
}

/// Right-hand side `∇_{ξ_i}T♯_{ξ_j} - T♯_{ξ_j} T♯_{ξ_i}` of the mixed curvature identity.
pub fn mixed_jacobi_rhs(
    model: &LieFoliationModel,
    conn: &Connection,
    tensors: &FoliationTensors,
    i: usize,
    j: usize,
) -> DMatrix<f64> {
    nabla_vertical(model, conn, i, &tensors.tsharp[j]) - &tensors.tsharp[j] * &tensors.tsharp[i]
}

/// `max_{i,j} ‖(R(·,ξ_i)ξ_j)^⊥ - (∇_{ξ_i}T♯_{ξ_j} - T♯_{ξ_j}T♯_{ξ_i})‖∞`.
pub fn mixed_jacobi_residual(
    model: &LieFoliationModel,
    conn: &Connection,
    curv: &Curvature,
    tensors: &FoliationTensors,
) -> Result<f64, GeometryError> {
    let mut worst = 0.0_f64;
    for i in 0..model.p() {
        for j in 0..model.p() {
            let lhs = mixed_jacobi(model, curv, i, j)?;
            let rhs = mixed_jacobi_rhs(model, conn, tensors, i, j);
            worst = worst.max(max_abs(&(lhs - rhs)));
        }
    }
    Ok(worst)
}

/// `max_i ‖∇_{ξ_i} Ric^⊥ - [Ric^⊥, T♯_{ξ_i}]‖∞` with `Ric^⊥ = -Σ(T♯)²`.
pub fn commutator_identity_residual(
    model: &LieFoliationModel,
    conn: &Connection,
    tensors: &FoliationTensors,
) -> f64 {
    let ric = ric_from_tsharp(&tensors.tsharp);
    (0..model.p())
        .map(|i| {
            let lhs = nabla_vertical(model, conn, i, &ric);
            let rhs = linalg::commutator(&ric, &tensors.tsharp[i]);
            max_abs(&(lhs - rhs))
        })
        .fold(0.0, f64::max)
}

/// `‖T‖² = Σ_i Σ_{a,b} g(T(e_a,e_b), ξ_i)²` over a `g`-orthonormal horizontal
/// frame, written as `-Σ_i tr((T♯_i)²)`.
pub fn integrability_norm_sq(tensors: &FoliationTensors) -> f64 {
    -tensors.tsharp.iter().map(|t| (t * t).trace()).sum::<f64>()
}

/// `dη(E_i,E_j) = -½ η([E_i,E_j])` for an invariant covector `η`.
pub fn d_eta(model: &LieFoliationModel, eta: &DVector<f64>) -> DMatrix<f64> {
    let n = model.dim();
    let c = model.brackets();
    DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (0..n).map(|k| eta[k] * c.get(i, j, k)).sum::<f64>()
    })
}

/// `max |dF(E_i,E_j,E_k)|` for an invariant 2-form, where
/// `dF(X,Y,Z) = -⅓(F([X,Y],Z) + F([Y,Z],X) + F([Z,X],Y))`.
pub fn d_two_form_residual(model: &LieFoliationModel, form: &DMatrix<f64>) -> f64 {
    let n = model.dim();
    let c = model.brackets();
    let f_br = |i: usize, j: usize, k: usize| -> f64 {
        (0..n).map(|m| c.get(i, j, m) * form[(m, k)]).sum()
    };
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let v = -(f_br(i, j, k) + f_br(j, k, i) + f_br(k, i, j)) / 3.0;
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// Nijenhuis torsion on all frame pairs.
#[derive(Clone, Debug)]
pub struct Nijenhuis {
    dim: usize,
    values: Vec<DVector<f64>>,
}

impl Nijenhuis {
    /// `N_φ(E_i, E_j)`.
    pub fn at(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.values[i * self.dim + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(linalg::max_abs_vec)
            .fold(0.0, f64::max)
    }
}

/// `N_φ(X,Y) = φ²[X,Y] + [φX,φY] - φ[φX,Y] - φ[X,φY]`.
pub fn nijenhuis(model: &LieFoliationModel, phi: &DMatrix<f64>) -> Nijenhuis {
    let n = model.dim();
    let c = model.brackets();
    let phi2 = phi * phi;
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let px = phi.column(i).into_owned();
            let py = phi.column(j).into_owned();
            let ex = unit(n, i);
            let ey = unit(n, j);
            let v = &phi2 * c.bracket_basis(i, j) + c.bracket(&px, &py)
                - phi * c.bracket(&px, &ey)
                - phi * c.bracket(&ex, &py);
            values.push(v);
        }
    }
    Nijenhuis { dim: n, values }
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

/// `‖N_φ + 2Σ_i dηⁱ⊗ξ_i‖∞` over frame pairs (minus sign for para-φ
/// structures). For p-contact structures the maximum over each
/// `(φ_i, ξ_i, ηⁱ)` is taken.
pub fn normality_residual(model: &LieFoliationModel, s: &FramedStructure) -> f64 {
    let n = model.dim();
    let sign = if s.kind == StructureKind::ParaPhi {
        -1.0
    } else {
        1.0
    };
    let d_etas: Vec<DMatrix<f64>> = s.etas.iter().map(|e| d_eta(model, e)).collect();
    let torsion_residual = |phi: &DMatrix<f64>, terms: &[usize]| -> f64 {
        let nij = nijenhuis(model, phi);
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut v = nij.at(i, j).clone();
                for &k in terms {
                    v += &s.xis[k] * (2.0 * sign * d_etas[k][(i, j)]);
                }
                worst = worst.max(linalg::max_abs_vec(&v));
            }
        }
        worst
    };
    if s.kind == StructureKind::PContact {
        s.phis
            .iter()
            .enumerate()
            .map(|(k, phi)| torsion_residual(phi, &[k]))
            .fold(0.0, f64::max)
    } else {
        let all: Vec<usize> = (0..s.xis.len()).collect();
        torsion_residual(&s.phis[0], &all)
    }
}

/// Serializable summary of the full geometry of a model.
///
/// Index order: `gamma[(k·N + i)·N + j] = Γ^k_ij`;
/// `curvature[((i·N + j)·N + k)·N + l]` is the `l`-th coordinate of
/// `R(E_i,E_j)E_k`; `r_g` is `N×N` row-major; `tsharp`, `a`, `c` and
/// `ric_perp` are row-major `m×m` operators on the horizontal slots.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryReport {
    pub model: String,
    pub dim: usize,
    pub vertical: Vec<usize>,
    pub horizontal: Vec<usize>,
    pub gamma_index_order: &'static str,
    pub curvature_index_order: &'static str,
    pub gamma: Vec<f64>,
    pub curvature: Vec<f64>,
    pub tsharp: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub r_g: Vec<f64>,
    pub ric_perp: Vec<f64>,
    /// `-Σ(T♯)²`, present when the model is compatible.
    pub ric_perp_algebraic: Option<Vec<f64>>,
    /// `‖ric_perp - ric_perp_algebraic‖∞`.
    pub ric_discrepancy: Option<f64>,
    pub residuals: GeometryResiduals,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryResiduals {
    pub metric_compatibility: f64,
    pub torsion: f64,
    pub curvature_symmetry: f64,
    pub bianchi: f64,
    pub splitting: f64,
    pub totally_geodesic: f64,
    pub riemannian: f64,
    pub mixed_jacobi: Option<f64>,
    pub commutator_identity: Option<f64>,
}

impl GeometryReport {
    pub fn compute(model: &LieFoliationModel) -> Result<Self, GeometryError> {
        let conn = levi_civita(model)?;
        let curv = curvature(model, &conn);
        let tensors = foliation_tensors(model, &conn);
        let pr = partial_ricci(model, &curv);
        let compat = model::compatibility_from(model, &conn, &tensors);
        let compatible = compat.max() <= COMPAT_TOL;
        let (alg, discrepancy, mixed, comm) = if compatible {
            let alg = ric_from_tsharp(&tensors.tsharp);
            let d = max_abs(&(&pr.ric_perp - &alg));
            let mixed = mixed_jacobi_residual(model, &conn, &curv, &tensors).ok();
            let comm = commutator_identity_residual(model, &conn, &tensors);
            (Some(linalg::to_row_major(&alg)), Some(d), mixed, Some(comm))
        } else {
            (None, None, None, None)
        };
        let rm = |v: &Vec<DMatrix<f64>>| v.iter().map(linalg::to_row_major).collect();
        Ok(GeometryReport {
            model: model.name().to_string(),
            dim: model.dim(),
            vertical: model.vertical().to_vec(),
            horizontal: model.horizontal().to_vec(),
            gamma_index_order: "(k*N + i)*N + j -> Gamma^k_ij",
            curvature_index_order: "((i*N + j)*N + k)*N + l -> l-th coordinate of R(E_i,E_j)E_k",
            gamma: conn.flattened(),
            curvature: curv.flattened(),
            tsharp: rm(&tensors.tsharp),
            a: rm(&tensors.a),
            c: rm(&tensors.c),
            r_g: linalg::to_row_major(&pr.r_g),
            ric_perp: linalg::to_row_major(&pr.ric_perp),
            ric_perp_algebraic: alg,
            ric_discrepancy: discrepancy,
            residuals: GeometryResiduals {
                metric_compatibility: conn.metric_residual(model),
                torsion: conn.torsion_residual(model),
                curvature_symmetry: curv.symmetry_residual(model),
                bianchi: curv.bianchi_residual(),
                splitting: tensors.splitting_residual,
                totally_geodesic: compat.totally_geodesic,
                riemannian: compat.riemannian,
                mixed_jacobi: mixed,
                commutator_identity: comm,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;
    use crate::structures::{default_kind, FramedStructure};

    fn setup(
        name: &str,
        params: &[f64],
    ) -> (LieFoliationModel, Connection, Curvature, FoliationTensors) {
        let m = builtin(name, params).unwrap();
        let conn = levi_civita(&m).unwrap();
        let curv = curvature(&m, &conn);
        let t = foliation_tensors(&m, &conn);
        (m, conn, curv, t)
    }

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn flat_abelian_model() {
        let m = LieFoliationModel::abelian(4, 1).unwrap();
        let conn = levi_civita(&m).unwrap();
        assert!(conn.flattened().iter().all(|v| *v == 0.0));
        let curv = curvature(&m, &conn);
        assert!(curv.flattened().iter().all(|v| *v == 0.0));
        let t = foliation_tensors(&m, &conn);
        assert_eq!(max_abs(&t.h[0]), 0.0);
        assert_eq!(max_abs(&t.t[0]), 0.0);
        assert_eq!(max_abs(&partial_ricci_algebraic(&m).unwrap()), 0.0);
        assert_eq!(max_abs(&d_eta(&m, &m.eta(0))), 0.0);
        let phi = DMatrix::from_fn(4, 4, |r, c| (r as f64) - 2.0 * c as f64);
        assert_eq!(nijenhuis(&m, &phi).max_abs(), 0.0);
    }

    #[test]
    fn heisenberg_connection_by_hand() {
        let (m, conn, curv, _) = setup("heisenberg", &[1.0]);
        assert_eq!(conn.covariant(&e(3, 0), &e(3, 1)), e(3, 2));
        assert_eq!(conn.covariant(&e(3, 0), &e(3, 2)), -e(3, 1));
        assert_eq!(curv.component(&m, 0, 2, 2, 0), 1.0);
        assert!(conn.metric_residual(&m) <= 1e-12);
        assert!(conn.torsion_residual(&m) <= 1e-12);
    }

    #[test]
    fn round_sphere() {
        let (m, conn, curv, t) = setup("su2", &[]);
        assert_eq!(conn.covariant(&e(3, 0), &e(3, 1)), e(3, 2));
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let k = curv.sectional(&m, &e(3, i), &e(3, j));
                    assert!((k - 1.0).abs() <= 1e-12, "K(e{i}, e{j}) = {k}");
                }
            }
        }
        let pr = partial_ricci(&m, &curv);
        assert!(max_abs(&(&pr.ric_perp - DMatrix::identity(2, 2))) <= 1e-12);
        assert!(((&t.tsharp[0] * t.tsharp[0].transpose()).trace() - 2.0).abs() <= 1e-12);
        assert!(max_abs(&t.a[0]) <= 1e-12);
    }

    #[test]
    fn heterogeneous_heisenberg_tensors() {
        let (m, _, curv, t) = setup("heisenberg", &[2.0, 3.0]);
        let mut want = DMatrix::zeros(4, 4);
        want[(1, 0)] = 2.0;
        want[(0, 1)] = -2.0;
        want[(3, 2)] = 3.0;
        want[(2, 3)] = -3.0;
        assert_eq!(t.tsharp[0], want);
        assert_eq!(max_abs(&t.a[0]), 0.0);
        assert!(t.splitting_residual <= 1e-12);
        let pr = partial_ricci(&m, &curv);
        assert!(max_abs(&(&pr.ric_perp - diag(&[4.0, 4.0, 9.0, 9.0]))) <= 1e-12);
        assert_eq!(
            partial_ricci_algebraic(&m).unwrap(),
            diag(&[4.0, 4.0, 9.0, 9.0])
        );
        let jac = mixed_jacobi(&m, &curv, 0, 0).unwrap();
        assert!(max_abs(&(jac - diag(&[4.0, 4.0, 9.0, 9.0]))) <= 1e-12);
    }

    #[test]
    fn quaternionic_partial_ricci_is_three() {
        let (m, conn, curv, t) = setup("quat_heisenberg", &[1.0]);
        let pr = partial_ricci(&m, &curv);
        for a in 0..4 {
            assert!((pr.r_g[(a, a)] - 3.0).abs() <= 1e-12);
        }
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(mixed_jacobi(&m, &curv, i, j).unwrap().trace().abs() <= 1e-12);
                }
            }
        }
        assert!(mixed_jacobi_residual(&m, &conn, &curv, &t).unwrap() <= 1e-12);
        assert!(matches!(
            mixed_jacobi(&m, &curv, 0, 3),
            Err(GeometryError::BadVerticalIndex(0, 3))
        ));
    }

    #[test]
    fn s_model_algebraic_ricci() {
        for a in [1.0, 3.0] {
            let m = builtin("s_model", &[1.0, 2.0, a]).unwrap();
            let ric = partial_ricci_algebraic(&m).unwrap();
            assert!(max_abs(&(ric - DMatrix::identity(2, 2) * (2.0 * a * a))) <= 1e-12);
            let de = d_eta(&m, &m.eta(0));
            assert_eq!(de[(0, 1)], -a);
        }
    }

    #[test]
    fn incompatible_model_is_refused() {
        let m = builtin("su2", &[])
            .unwrap()
            .with_metric(diag(&[1.0, 2.0, 1.0]))
            .unwrap();
        assert!(matches!(
            partial_ricci_algebraic(&m),
            Err(GeometryError::NotCompatible { .. })
        ));
        let conn = levi_civita(&m).unwrap();
        let curv = curvature(&m, &conn);
        assert!(matches!(
            mixed_jacobi(&m, &curv, 0, 0),
            Err(GeometryError::NotCompatible { .. })
        ));
    }

    #[test]
    fn nijenhuis_and_normality_of_weighted_heisenberg() {
        for a in [1.0, 2.0, 0.5] {
            let m = builtin("heisenberg", &[a]).unwrap();
            let s = FramedStructure::canonical(&m, default_kind(&m)).unwrap();
            let nij = nijenhuis(&m, s.phi());
            assert!((nij.at(0, 1) - e(3, 2) * (2.0 * a * a * a)).amax() <= 1e-12);
            let want = (2.0 * a * (a * a - 1.0)).abs();
            assert!((normality_residual(&m, &s) - want).abs() <= 1e-12);
        }
        let m = builtin("heisenberg", &[2.0, 3.0]).unwrap();
        let s = FramedStructure::canonical(&m, default_kind(&m)).unwrap();
        let nij = nijenhuis(&m, s.phi());
        let de = d_eta(&m, &s.etas[0]);
        let at_12 = (nij.at(0, 1) + &s.xis[0] * (2.0 * de[(0, 1)])).amax();
        assert!((at_12 - 12.0).abs() <= 1e-12);
        assert!((normality_residual(&m, &s) - 48.0).abs() <= 1e-12);
        assert_eq!(nijenhuis(&m, &DMatrix::zeros(5, 5)).max_abs(), 0.0);
    }

    #[test]
    fn commutator_identity_and_leafwise_norm() {
        for (name, params) in [
            ("heisenberg", vec![2.0, 3.0]),
            ("quat_heisenberg", vec![2.0]),
            ("s_model", vec![2.0, 2.0, 1.5]),
            ("su2", vec![]),
        ] {
            let (m, conn, curv, t) = setup(name, &params);
            assert!(
                commutator_identity_residual(&m, &conn, &t) <= 1e-12,
                "{name}"
            );
            let pr = partial_ricci(&m, &curv);
            assert!(
                (integrability_norm_sq(&t) - pr.ric_perp.trace()).abs() <= 1e-12,
                "{name}"
            );
        }
    }

    #[test]
    fn report_serializes_with_documented_shapes() {
        let m = builtin("heisenberg", &[2.0, 3.0]).unwrap();
        let r = GeometryReport::compute(&m).unwrap();
        assert_eq!(r.gamma.len(), 125);
        assert_eq!(r.curvature.len(), 625);
        assert_eq!(r.r_g.len(), 25);
        assert_eq!(r.ric_perp.len(), 16);
        assert!(r.ric_discrepancy.unwrap() <= 1e-12);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["gamma", "curvature", "tsharp", "a", "c", "r_g", "ric_perp"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
