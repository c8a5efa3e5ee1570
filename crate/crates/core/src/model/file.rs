//! JSON model files.
//!
//! ```json
//! {"name":"heisenberg5","dim":5,"vertical":[4],"frame":["e1","e2","e3","e4","xi"],
//!  "brackets":[{"i":0,"j":1,"coeffs":{"4":4.0}},{"i":2,"j":3,"coeffs":{"4":6.0}}],
//!  "metric":"identity"}
//! ```
//!
//! `metric` is either the string `"identity"` or a row-major array of `dim²`
//! reals. An optional `structure` key embeds a framed structure. Unknown keys
//! are rejected.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BracketTable, LieFoliationModel};
use crate::error::ModelError;
use crate::linalg;
use crate::structures::StructureFile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub coeffs: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    RowMajor(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub dim: usize,
    pub vertical: Vec<usize>,
    pub frame: Vec<String>,
    pub brackets: Vec<BracketEntry>,
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureFile>,
}

impl ModelFile {
    pub fn parse(bytes: &[u8]) -> Result<Self, ModelError> {
        let text = std::str::from_utf8(bytes).map_err(|e| ModelError::Parse(e.to_string()))?;
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_model(&self) -> Result<LieFoliationModel, ModelError> {
        let n = self.dim;
        if self.frame.len() != n {
            return Err(ModelError::Parse(format!(
                "frame has {} labels, dim is {n}",
                self.frame.len()
            )));
        }
        let mut table = BracketTable::zeros(n);
        let mut seen = std::collections::HashSet::new();
        for entry in &self.brackets {
            if entry.i >= entry.j || entry.j >= n {
                return Err(ModelError::Parse(format!(
                    "bracket entry ({}, {}) must satisfy i < j < dim",
                    entry.i, entry.j
                )));
            }
            if !seen.insert((entry.i, entry.j)) {
                return Err(ModelError::Parse(format!(
                    "duplicate bracket entry ({}, {})",
                    entry.i, entry.j
                )));
            }
            for (slot, &value) in &entry.coeffs {
                let k: usize = slot
                    .parse()
                    .map_err(|_| ModelError::Parse(format!("bad slot key `{slot}`")))?;
                if k >= n {
                    return Err(ModelError::Parse(format!("slot {k} out of range")));
                }
                table.set(entry.i, entry.j, k, value);
            }
        }
        let metric = match &self.metric {
            MetricSpec::Named(s) if s == "identity" => DMatrix::identity(n, n),
            MetricSpec::Named(s) => {
                return Err(ModelError::Parse(format!("unknown metric keyword `{s}`")))
            }
            MetricSpec::RowMajor(v) => linalg::from_row_major(n, v).ok_or_else(|| {
                ModelError::Parse(format!("metric needs {} entries, got {}", n * n, v.len()))
            })?,
        };
        LieFoliationModel::new(
            self.name.clone(),
            self.frame.clone(),
            self.vertical.clone(),
            table,
            metric,
        )
    }

    pub fn from_model(model: &LieFoliationModel) -> Self {
        let n = model.dim();
        let brackets = model
            .brackets()
            .sparse_entries()
            .into_iter()
            .map(|(i, j, coeffs)| BracketEntry {
                i,
                j,
                coeffs: coeffs
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            })
            .collect();
        let metric = if *model.metric() == DMatrix::identity(n, n) {
            MetricSpec::Named("identity".into())
        } else {
            MetricSpec::RowMajor(linalg::to_row_major(model.metric()))
        };
        ModelFile {
            name: model.name().to_string(),
            dim: n,
            vertical: model.vertical().to_vec(),
            frame: model.frame().to_vec(),
            brackets,
            metric,
            structure: None,
        }
    }
}

/// Parses and validates model-file content.
pub fn load_model(bytes: &[u8]) -> Result<LieFoliationModel, ModelError> {
    ModelFile::parse(bytes)?.to_model()
}

/// Parses a model file, returning the validated model and the raw file
/// (which may carry an embedded structure).
pub fn load_model_file(bytes: &[u8]) -> Result<(LieFoliationModel, ModelFile), ModelError> {
    let file = ModelFile::parse(bytes)?;
    let model = file.to_model()?;
    Ok((model, file))
}

pub fn serialize_model(model: &LieFoliationModel) -> String {
    serde_json::to_string(&ModelFile::from_model(model)).expect("model file serializes")
}
