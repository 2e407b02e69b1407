//! Persisted model format shared by `train`, `sweep`, and `predict`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use opident_core::{Error, Network, NormalizationSpec, Result};

/// A trained network together with everything needed to evaluate it on
/// raw (engineering-unit) inputs: the normalization fitted on the
/// training corpus and the column names, so misuse is caught by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub input_names: Vec<String>,
    pub target_name: String,
    pub normalization: NormalizationSpec,
    pub network: Network,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::from(e).with_path(path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).with_path(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Evaluates the model on one raw input row, returning the
    /// prediction in original units and whether any input lay outside
    /// the range the normalization was fitted on (extrapolation).
    pub fn predict_raw(&self, raw: &[f64]) -> Result<(f64, bool)> {
        if raw.len() != self.input_names.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} inputs ({}), got {}",
                self.input_names.len(),
                self.input_names.join(", "),
                raw.len()
            )));
        }
        let extrapolating = self.normalization.input_exceeds_fit_range(raw);
        let normalized = self.normalization.normalize_input(raw)?;
        let y_norm = self.network.predict(&normalized)?;
        Ok((self.normalization.denormalize_output(y_norm), extrapolating))
    }
}
