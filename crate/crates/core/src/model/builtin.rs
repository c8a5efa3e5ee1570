use nalgebra::DMatrix;

use super::{BracketTable, LieFoliationModel};
use crate::error::ModelError;

/// Description of one built-in family, for listings.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct BuiltinFamily {
    pub name: &'static str,
    pub params: &'static str,
    pub dim: &'static str,
    pub instantiates: &'static str,
}

pub const BUILTIN_FAMILIES: [BuiltinFamily; 5] = [
    BuiltinFamily {
        name: "heisenberg",
        params: "a1,...,an (nonzero)",
        dim: "2n+1",
        instantiates: "weak Sasakian (classical Sasakian when all ak = 1)",
    },
    BuiltinFamily {
        name: "quat_heisenberg",
        params: "a (nonzero)",
        dim: "7",
        instantiates: "weak almost 3-contact metric (quaternionic, classical when a = 1)",
    },
    BuiltinFamily {
        name: "s_model",
        params: "n,p,a (n,p >= 1 integers, a nonzero)",
        dim: "2n+p",
        instantiates: "metric weak almost S-structure (S-structure when a = 1)",
    },
    BuiltinFamily {
        name: "para_model",
        params: "n,p[,a] (n,p >= 1 integers, a nonzero, default 1)",
        dim: "2n+p",
        instantiates: "metric weak para-S-structure on a neutral horizontal metric",
    },
    BuiltinFamily {
        name: "su2",
        params: "(none)",
        dim: "3",
        instantiates: "Sasakian structure of the round 3-sphere",
    },
];

/// Parses a `name:param,param` reference such as `heisenberg:2,3`.
pub fn builtin_from_ref(reference: &str) -> Result<LieFoliationModel, ModelError> {
    let (name, rest) = match reference.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (reference.trim(), ""),
    };
    let params = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    ModelError::bad_params(name, format!("cannot parse parameter `{s}`"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    builtin(name, &params)
}

fn positive_integer(model: &str, what: &str, v: f64) -> Result<usize, ModelError> {
    if v.fract() != 0.0 || !(1.0..=64.0).contains(&v) {
        return Err(ModelError::bad_params(
            model,
            format!("{what} must be a positive integer, got {v}"),
        ));
    }
    Ok(v as usize)
}

fn nonzero(model: &str, v: f64) -> Result<f64, ModelError> {
    if v == 0.0 || !v.is_finite() {
        return Err(ModelError::bad_params(
            model,
            format!("coefficient must be finite and nonzero, got {v}"),
        ));
    }
    Ok(v)
}

fn format_ref(name: &str, params: &[f64]) -> String {
    if params.is_empty() {
        name.to_string()
    } else {
        let p: Vec<String> = params.iter().map(|v| format!("{v}")).collect();
        format!("{name}:{}", p.join(","))
    }
}

/// Builds one of the built-in model families.
pub fn builtin(name: &str, params: &[f64]) -> Result<LieFoliationModel, ModelError> {
    let model = match name {
        "heisenberg" => heisenberg(params)?,
        "quat_heisenberg" => quat_heisenberg(params)?,
        "s_model" => s_model(params)?,
        "para_model" => para_model(params)?,
        "su2" => su2(params)?,
        other => return Err(ModelError::UnknownModel(other.to_string())),
    };
    Ok(model.renamed(format_ref(name, params)))
}

fn heisenberg(params: &[f64]) -> Result<LieFoliationModel, ModelError> {
    if params.is_empty() {
        return Err(ModelError::bad_params(
            "heisenberg",
            "need at least one weight",
        ));
    }
    let n = params.len();
    let dim = 2 * n + 1;
    let xi = 2 * n;
    let mut brackets = BracketTable::zeros(dim);
    for (k, &a) in params.iter().enumerate() {
        let a = nonzero("heisenberg", a)?;
        brackets.set(2 * k, 2 * k + 1, xi, 2.0 * a);
    }
    let mut frame: Vec<String> = (1..=2 * n).map(|i| format!("e{i}")).collect();
    frame.push("xi".into());
    LieFoliationModel::new(
        "heisenberg",
        frame,
        vec![xi],
        brackets,
        DMatrix::identity(dim, dim),
    )
}

/// Left multiplication by `i`, `j`, `k` on ℍ = ℝ⁴ with basis (1, i, j, k).
/// These satisfy `J_a J_b = Σ_c ε_abc J_c - δ_ab`.
pub(crate) fn quaternion_structures() -> [DMatrix<f64>; 3] {
    fn mul(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
        let [a1, b1, c1, d1] = p;
        let [a2, b2, c2, d2] = q;
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ]
    }
    let unit = |k: usize| {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        e
    };
    let left = |q: [f64; 4]| DMatrix::from_fn(4, 4, |r, c| mul(q, unit(c))[r]);
    [left(unit(1)), left(unit(2)), left(unit(3))]
}

fn quat_heisenberg(params: &[f64]) -> Result<LieFoliationModel, ModelError> {
    let [a] = params else {
        return Err(ModelError::bad_params(
            "quat_heisenberg",
            "expects exactly one parameter",
        ));
    };
    let a = nonzero("quat_heisenberg", *a)?;
    let js = quaternion_structures();
    let mut brackets = BracketTable::zeros(7);
    for (i, j) in js.iter().enumerate() {
        for x in 0..4 {
            for y in (x + 1)..4 {
                // <J_i e_x, e_y>
                let v = j[(y, x)];
                if v != 0.0 {
                    brackets.set(x, y, 4 + i, 2.0 * a * v);
                }
            }
        }
    }
    let frame = ["x0", "x1", "x2", "x3", "xi1", "xi2", "xi3"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    LieFoliationModel::new(
        "quat_heisenberg",
        frame,
        vec![4, 5, 6],
        brackets,
        DMatrix::identity(7, 7),
    )
}

fn s_model(params: &[f64]) -> Result<LieFoliationModel, ModelError> {
    let [n, p, a] = params else {
        return Err(ModelError::bad_params("s_model", "expects n,p,a"));
    };
    let n = positive_integer("s_model", "n", *n)?;
    let p = positive_integer("s_model", "p", *p)?;
    let a = nonzero("s_model", *a)?;
    let dim = 2 * n + p;
    let mut brackets = BracketTable::zeros(dim);
    for k in 0..n {
        for v in 0..p {
            brackets.set(2 * k, 2 * k + 1, 2 * n + v, 2.0 * a);
        }
    }
    let mut frame: Vec<String> = (1..=2 * n).map(|i| format!("e{i}")).collect();
    frame.extend((1..=p).map(|i| format!("xi{i}")));
    LieFoliationModel::new(
        "s_model",
        frame,
        (2 * n..dim).collect(),
        brackets,
        DMatrix::identity(dim, dim),
    )
}

/// Horizontal frame `u_1..u_n, w_1..w_n` with isotropic halves paired by
/// `g(u_k, w_k) = 1` and `[u_k, w_k] = 2a Σ ξ_i`.
fn para_model(params: &[f64]) -> Result<LieFoliationModel, ModelError> {
    let (n, p, a) = match params {
        [n, p] => (*n, *p, 1.0),
        [n, p, a] => (*n, *p, *a),
        _ => return Err(ModelError::bad_params("para_model", "expects n,p[,a]")),
    };
    let n = positive_integer("para_model", "n", n)?;
    let p = positive_integer("para_model", "p", p)?;
    let a = nonzero("para_model", a)?;
    let dim = 2 * n + p;
    let mut brackets = BracketTable::zeros(dim);
    let mut metric = DMatrix::zeros(dim, dim);
    for k in 0..n {
        metric[(k, n + k)] = 1.0;
        metric[(n + k, k)] = 1.0;
        for v in 0..p {
            brackets.set(k, n + k, 2 * n + v, 2.0 * a);
        }
    }
    for v in 0..p {
        metric[(2 * n + v, 2 * n + v)] = 1.0;
    }
    let mut frame: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
    frame.extend((1..=n).map(|i| format!("w{i}")));
    frame.extend((1..=p).map(|i| format!("xi{i}")));
    LieFoliationModel::new(
        "para_model",
        frame,
        (2 * n..dim).collect(),
        brackets,
        metric,
    )
}

fn su2(params: &[f64]) -> Result<LieFoliationModel, ModelError> {
    if !params.is_empty() {
        return Err(ModelError::bad_params("su2", "takes no parameters"));
    }
    let mut brackets = BracketTable::zeros(3);
    brackets.set(0, 1, 2, 2.0);
    brackets.set(1, 2, 0, 2.0);
    brackets.set(2, 0, 1, 2.0);
    let frame = vec!["e1".into(), "e2".into(), "e3".into()];
    LieFoliationModel::new("su2", frame, vec![2], brackets, DMatrix::identity(3, 3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_shapes() {
        let h = builtin("heisenberg", &[1.0]).unwrap();
        assert_eq!((h.dim(), h.p()), (3, 1));
        let h = builtin("heisenberg", &[2.0, 3.0]).unwrap();
        assert_eq!((h.dim(), h.p()), (5, 1));
        assert_eq!(h.brackets().get(0, 1, 4), 4.0);
        assert_eq!(h.brackets().get(2, 3, 4), 6.0);
        assert_eq!(h.name(), "heisenberg:2,3");
    }

    #[test]
    fn quaternion_table() {
        // J_i J_j = ε_ijk J_k - δ_ij, expanded from the quaternion product i·j = k.
        let js = quaternion_structures();
        let id = DMatrix::<f64>::identity(4, 4);
        for j in &js {
            assert_eq!(j * j, -&id);
        }
        assert_eq!(&js[0] * &js[1], js[2]);
        assert_eq!(&js[1] * &js[2], js[0]);
        assert_eq!(&js[2] * &js[0], js[1]);
        assert_eq!(&js[1] * &js[0], -&js[2]);
    }

    #[test]
    fn bad_params_and_unknown() {
        assert!(matches!(
            builtin("heisenberg", &[0.0]),
            Err(ModelError::BadParams { .. })
        ));
        assert!(matches!(
            builtin("s_model", &[1.5, 2.0, 1.0]),
            Err(ModelError::BadParams { .. })
        ));
        assert!(matches!(
            builtin("nope", &[]),
            Err(ModelError::UnknownModel(_))
        ));
        assert!(matches!(
            builtin("su2", &[1.0]),
            Err(ModelError::BadParams { .. })
        ));
    }

    #[test]
    fn reference_syntax() {
        let m = builtin_from_ref("heisenberg:2,3").unwrap();
        assert_eq!(m.dim(), 5);
        let m = builtin_from_ref("su2").unwrap();
        assert_eq!(m.dim(), 3);
        assert!(builtin_from_ref("heisenberg:x").is_err());
    }

    #[test]
    fn para_metric_is_neutral() {
        let m = builtin("para_model", &[1.0, 1.0]).unwrap();
        assert!(!m.is_riemannian());
        let g = m.horizontal_metric();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }
}
