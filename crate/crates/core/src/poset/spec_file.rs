use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kernel::{ActivationRule, Field, KernelSpec};
use super::system::{build_s_system, SSystemPlan};
use super::ScalePoset;
use crate::error::{Error, Result};

/// One layer entry of a system file; `weights` are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub rows: usize,
    pub cols: usize,
    pub field: Field,
    pub rule: ActivationRule,
    pub weights: Vec<f64>,
}

impl LayerEntry {
    pub fn from_kernel(kernel: &KernelSpec, rule: ActivationRule) -> Self {
        let w = &kernel.weight;
        let weights = (0..w.nrows())
            .flat_map(|i| (0..w.ncols()).map(move |j| w[(i, j)]))
            .collect();
        LayerEntry {
            rows: w.nrows(),
            cols: w.ncols(),
            field: kernel.field,
            rule,
            weights,
        }
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        if self.weights.len() != self.rows * self.cols {
            return Err(Error::Shape(format!(
                "layer declares {}x{} but lists {} weights",
                self.rows,
                self.cols,
                self.weights.len()
            )));
        }
        crate::error::ensure_finite(&self.weights, "layer weights")?;
        Ok(KernelSpec::new(
            DMatrix::from_row_slice(self.rows, self.cols, &self.weights),
            self.field,
        ))
    }
}

/// JSON description of a scale poset and its per-scale layers.
///
/// ```json
/// {"nodes": ["x", "h1", "out"], "edges": [["x", "h1"], ["h1", "out"]],
///  "layers": {"h1": {"rows": 2, "cols": 3, "field": "01", "rule": "relu", "weights": [...]}}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub layers: BTreeMap<String, LayerEntry>,
    /// Dimension of the raw input; inferred from the first layer when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("system file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }

    pub fn poset(&self) -> Result<ScalePoset> {
        ScalePoset::new(&self.nodes, &self.edges)
    }

    pub fn layer_specs(&self) -> Result<BTreeMap<String, (KernelSpec, ActivationRule)>> {
        self.layers
            .iter()
            .map(|(id, entry)| Ok((id.clone(), (entry.kernel()?, entry.rule))))
            .collect()
    }

    /// Input dimension, taken from the file or from a layer fed only by `s0`.
    pub fn resolved_input_dim(&self, poset: &ScalePoset) -> Result<usize> {
        if let Some(d) = self.input_dim {
            return Ok(d);
        }
        let s0 = poset.minimal();
        for s in poset.successor(s0)? {
            if poset.predecessor(&s)?.len() == 1 {
                if let Some(entry) = self.layers.get(&s) {
                    return Ok(entry.rows);
                }
            }
        }
        if poset.len() == 1 {
            return Err(Error::Domain("single-scale system needs an explicit input_dim".into()));
        }
        Err(Error::Domain("cannot infer input dimension".into()))
    }

    pub fn build(&self) -> Result<SSystemPlan> {
        let poset = self.poset()?;
        let input_dim = self.resolved_input_dim(&poset)?;
        build_s_system(&poset, input_dim, &self.layer_specs()?)
    }
}
