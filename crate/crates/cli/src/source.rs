use std::path::PathBuf;

use gfol_core::model::{load_model_file, ModelFile};
use gfol_core::{builtin_from_ref, LieFoliationModel};

use crate::error::CliError;

#[derive(clap::Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct ModelSource {
    /// Built-in model reference, e.g. `heisenberg:2,3` or `su2`.
    #[arg(long, value_name = "NAME[:P,P..]")]
    pub builtin: Option<String>,
    /// JSON model file.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
}

impl ModelSource {
    pub fn describe(&self) -> String {
        match (&self.builtin, &self.model) {
            (Some(r), _) => r.clone(),
            (None, Some(p)) => p.display().to_string(),
            (None, None) => String::new(),
        }
    }

    /// The model, plus the raw file when it was read from disk.
    pub fn load(&self) -> Result<(LieFoliationModel, Option<ModelFile>), CliError> {
        match (&self.builtin, &self.model) {
            (Some(r), _) => Ok((builtin_from_ref(r)?, None)),
            (None, Some(path)) => {
                let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
                let (model, file) = load_model_file(&bytes)?;
                Ok((model, Some(file)))
            }
            (None, None) => Err(CliError::Usage(
                "one of --builtin or --model is required".into(),
            )),
        }
    }
}
