//! Lie-algebra presentations of g-foliations with a compatible metric.
//!
//! A model is a real Lie algebra with basis `E_0..E_{N-1}`, a distinguished
//! vertical index set `V` (the Lie parallelism `ξ_1..ξ_p` along the leaves)
//! and a left-invariant metric `G₀`. The horizontal distribution `𝒟` is
//! spanned by the remaining frame vectors.

mod builtin;
mod file;

pub use builtin::{builtin, builtin_from_ref, BuiltinFamily, BUILTIN_FAMILIES};
pub use file::{load_model, load_model_file, serialize_model, BracketEntry, MetricSpec, ModelFile};

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::ModelError;
use crate::geometry;
use crate::linalg::{self, RANK_TOL};

/// Residual threshold for model invariants.
pub const VALIDATION_TOL: f64 = 1e-12;

/// `(i, j, [(k, c^k_ij)])` for one nonzero bracket.
pub type SparseBracket = (usize, usize, Vec<(usize, f64)>);

/// Dense structure constants `c^k_ij` of `[E_i, E_j] = Σ_k c^k_ij E_k`.
///
/// Only `i < j` is ever written; the `j > i` half is the exact negation.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketTable {
    dim: usize,
    coeffs: Vec<f64>,
}

impl BracketTable {
    pub fn zeros(dim: usize) -> Self {
        BracketTable {
            dim,
            coeffs: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    /// Sets `c^k_ij = value` and `c^k_ji = -value`. Diagonal pairs are ignored.
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        if i == j {
            return;
        }
        let (lo, hi, v) = if i < j { (i, j, value) } else { (j, i, -value) };
        let a = self.offset(lo, hi, k);
        let b = self.offset(hi, lo, k);
        self.coeffs[a] = v;
        self.coeffs[b] = -v;
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.coeffs[self.offset(i, j, k)]
    }

    /// Coordinates of `[E_i, E_j]`.
    pub fn bracket_basis(&self, i: usize, j: usize) -> DVector<f64> {
        let start = self.offset(i, j, 0);
        DVector::from_column_slice(&self.coeffs[start..start + self.dim])
    }

    /// Bracket of two constant-coefficient fields.
    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += w * self.get(i, j, k);
                }
            }
        }
        out
    }

    /// `‖Σ_cyc [E_i,[E_j,E_k]]‖∞` over all triples.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += self.get(j, k, m) * self.get(i, m, l)
                                + self.get(k, i, m) * self.get(j, m, l)
                                + self.get(i, j, m) * self.get(k, m, l);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest `|c^k_ij + c^k_ji|`; zero by construction.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.get(i, j, k) + self.get(j, i, k)).abs());
                }
            }
        }
        worst
    }

    /// Nonzero entries with `i < j`, in lexicographic order.
    pub fn sparse_entries(&self) -> Vec<SparseBracket> {
        let n = self.dim;
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let coeffs: Vec<(usize, f64)> = (0..n)
                    .map(|k| (k, self.get(i, j, k)))
                    .filter(|(_, v)| *v != 0.0)
                    .collect();
                if !coeffs.is_empty() {
                    out.push((i, j, coeffs));
                }
            }
        }
        out
    }

    fn all_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }
}

/// A validated g-foliation model. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct LieFoliationModel {
    name: String,
    frame: Vec<String>,
    vertical: Vec<usize>,
    horizontal: Vec<usize>,
    brackets: BracketTable,
    metric: DMatrix<f64>,
}

impl LieFoliationModel {
    pub fn new(
        name: impl Into<String>,
        frame: Vec<String>,
        vertical: Vec<usize>,
        brackets: BracketTable,
        metric: DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        let dim = frame.len();
        if dim == 0 {
            return Err(ModelError::Parse("dimension must be positive".into()));
        }
        if brackets.dim() != dim {
            return Err(ModelError::Parse(format!(
                "bracket table has dimension {}, frame has {}",
                brackets.dim(),
                dim
            )));
        }
        if metric.nrows() != dim || metric.ncols() != dim {
            return Err(ModelError::Parse(format!("metric must be {dim}x{dim}")));
        }
        let mut seen = HashSet::new();
        if !frame.iter().all(|l| seen.insert(l.as_str())) {
            return Err(ModelError::invalid("frame_labels_unique", f64::NAN));
        }
        if vertical.is_empty() {
            return Err(ModelError::invalid("vertical_nonempty", f64::NAN));
        }
        let mut vseen = HashSet::new();
        for &v in &vertical {
            if v >= dim || !vseen.insert(v) {
                return Err(ModelError::Parse(format!("bad vertical index {v}")));
            }
        }
        let horizontal: Vec<usize> = (0..dim).filter(|i| !vseen.contains(i)).collect();

        if !brackets.all_finite() || metric.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::invalid("finite_entries", f64::NAN));
        }
        let jacobi = brackets.jacobi_residual();
        if jacobi > VALIDATION_TOL {
            return Err(ModelError::invalid("jacobi", jacobi));
        }
        let asym = linalg::asymmetry(&metric);
        if asym > VALIDATION_TOL {
            return Err(ModelError::invalid("metric_symmetric", asym));
        }
        let vblock = linalg::submatrix(&metric, &vertical, &vertical);
        let vres = linalg::max_abs(&(vblock - DMatrix::identity(vertical.len(), vertical.len())));
        if vres > VALIDATION_TOL {
            return Err(ModelError::invalid("vertical_orthonormal", vres));
        }
        let cross = linalg::max_abs(&linalg::submatrix(&metric, &vertical, &horizontal));
        if cross > VALIDATION_TOL {
            return Err(ModelError::invalid("block_diagonal", cross));
        }
        if !horizontal.is_empty() {
            let hblock = linalg::submatrix(&metric, &horizontal, &horizontal);
            let smin = linalg::min_singular_value(&hblock);
            if smin <= RANK_TOL {
                return Err(ModelError::invalid("horizontal_nondegenerate", smin));
            }
        }
        let mut leak = 0.0_f64;
        for &v in &vertical {
            for &h in &horizontal {
                for &u in &vertical {
                    leak = leak.max(brackets.get(v, h, u).abs());
                }
            }
        }
        if leak > VALIDATION_TOL {
            return Err(ModelError::invalid("horizontal_invariance", leak));
        }

        Ok(LieFoliationModel {
            name: name.into(),
            frame,
            vertical,
            horizontal,
            brackets,
            metric,
        })
    }

    /// Abelian algebra of dimension `dim` whose last `p` frame vectors are vertical.
    pub fn abelian(dim: usize, p: usize) -> Result<Self, ModelError> {
        if p == 0 || p > dim {
            return Err(ModelError::bad_params("abelian", "need 1 <= p <= dim"));
        }
        let frame = (0..dim)
            .map(|i| {
                if i + p >= dim {
                    format!("xi{}", i + p + 1 - dim)
                } else {
                    format!("e{}", i + 1)
                }
            })
            .collect();
        Self::new(
            format!("abelian:{dim},{p}"),
            frame,
            ((dim - p)..dim).collect(),
            BracketTable::zeros(dim),
            DMatrix::identity(dim, dim),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    /// Number of vertical fields `p`.
    pub fn p(&self) -> usize {
        self.vertical.len()
    }

    pub fn frame(&self) -> &[String] {
        &self.frame
    }

    pub fn vertical(&self) -> &[usize] {
        &self.vertical
    }

    /// Frame slots spanning `𝒟`, in increasing order.
    pub fn horizontal(&self) -> &[usize] {
        &self.horizontal
    }

    pub fn brackets(&self) -> &BracketTable {
        &self.brackets
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn horizontal_metric(&self) -> DMatrix<f64> {
        linalg::submatrix(&self.metric, &self.horizontal, &self.horizontal)
    }

    /// True when the horizontal block is positive definite.
    pub fn is_riemannian(&self) -> bool {
        linalg::is_positive_definite(&self.horizontal_metric())
    }

    /// Coordinates of the `i`-th vertical field `ξ_{i+1}`.
    pub fn xi(&self, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[self.vertical[i]] = 1.0;
        v
    }

    /// The metric dual `g(ξ_i, ·)` of the `i`-th vertical field.
    pub fn eta(&self, i: usize) -> DVector<f64> {
        &self.metric * self.xi(i)
    }

    /// Same algebra with the horizontal block of the metric replaced.
    pub fn with_horizontal_metric(&self, horizontal: &DMatrix<f64>) -> Result<Self, ModelError> {
        let m = self.horizontal.len();
        if horizontal.nrows() != m || horizontal.ncols() != m {
            return Err(ModelError::Parse(format!(
                "horizontal metric must be {m}x{m}"
            )));
        }
        let sym = linalg::symmetric_part(horizontal);
        let mut metric = self.metric.clone();
        for (a, &ia) in self.horizontal.iter().enumerate() {
            for (b, &ib) in self.horizontal.iter().enumerate() {
                metric[(ia, ib)] = sym[(a, b)];
            }
        }
        Self::new(
            self.name.clone(),
            self.frame.clone(),
            self.vertical.clone(),
            self.brackets.clone(),
            metric,
        )
    }

    pub fn with_metric(&self, metric: DMatrix<f64>) -> Result<Self, ModelError> {
        Self::new(
            self.name.clone(),
            self.frame.clone(),
            self.vertical.clone(),
            self.brackets.clone(),
            metric,
        )
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Residuals of the bundle-like / totally geodesic conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompatibilityReport {
    /// `max_{i,j} ‖(∇_{ξ_i} ξ_j)^⊥‖∞`.
    pub totally_geodesic: f64,
    /// `max_i ‖A_{ξ_i}‖∞`.
    pub riemannian: f64,
}

impl CompatibilityReport {
    pub fn max(&self) -> f64 {
        self.totally_geodesic.max(self.riemannian)
    }

    pub fn is_compatible(&self) -> bool {
        self.max() <= VALIDATION_TOL
    }
}

/// Totally-geodesic and Riemannian-foliation residuals of a model.
pub fn check_compatible(model: &LieFoliationModel) -> CompatibilityReport {
    match geometry::levi_civita(model) {
        Ok(conn) => {
            let tensors = geometry::foliation_tensors(model, &conn);
            compatibility_from(model, &conn, &tensors)
        }
        Err(_) => CompatibilityReport {
            totally_geodesic: f64::INFINITY,
            riemannian: f64::INFINITY,
        },
    }
}

pub(crate) fn compatibility_from(
    model: &LieFoliationModel,
    conn: &geometry::Connection,
    tensors: &geometry::FoliationTensors,
) -> CompatibilityReport {
    let mut tg = 0.0_f64;
    for &vi in model.vertical() {
        let op = conn.nabla(vi);
        for &vj in model.vertical() {
            for &h in model.horizontal() {
                tg = tg.max(op[(h, vj)].abs());
            }
        }
    }
    let riem = tensors
        .a
        .iter()
        .map(linalg::max_abs)
        .fold(0.0_f64, f64::max);
    CompatibilityReport {
        totally_geodesic: tg,
        riemannian: riem,
    }
}
