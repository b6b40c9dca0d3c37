//! The orbit JSON file: `{meta, z, q, action, report, verification}`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use orbits_core::action::ActionBreakdown;
use orbits_core::solver::SolveReport;
use orbits_core::verify::VerificationReport;
use orbits_core::{FieldModel, Loop, Parity, PresetConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitMeta {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub exclusion_radius: f64,
    pub parity: Parity,
    #[serde(rename = "N")]
    pub n: usize,
    /// Family parameter for continuation members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

impl OrbitMeta {
    pub fn new(model: &FieldModel, z: &Loop) -> OrbitMeta {
        OrbitMeta {
            model: model.id().to_string(),
            params: model.params().clone(),
            exclusion_radius: model.exclusion_radius(),
            parity: z.parity(),
            n: z.len(),
            s: None,
        }
    }

    pub fn field_model(&self) -> orbits_core::Result<FieldModel> {
        PresetConfig {
            preset: self.model.clone(),
            params: self.params.clone(),
            exclusion_radius: Some(self.exclusion_radius),
        }
        .build()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitFile {
    pub meta: OrbitMeta,
    pub z: Loop,
    pub q: Loop,
    pub action: ActionBreakdown,
    pub report: SolveReport,
    #[serde(default)]
    pub verification: Option<VerificationReport>,
}

impl OrbitFile {
    pub fn read(path: &Path) -> anyhow::Result<OrbitFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if text.trim().is_empty() {
            bail!("orbit file {} is empty", path.display());
        }
        let orbit: OrbitFile =
            serde_json::from_str(&text).with_context(|| format!("parsing orbit file {}", path.display()))?;
        if orbit.meta.parity != orbit.z.parity() || orbit.meta.n != orbit.z.len() {
            bail!("orbit file {}: meta does not describe the stored loop", path.display());
        }
        Ok(orbit)
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Reads a `z` loop from an orbit file or from a bare loop file.
pub fn read_loop(path: &Path) -> anyhow::Result<Loop> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        bail!("loop file {} is empty", path.display());
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let z = match value.get("z") {
        Some(z) => z.clone(),
        None => value,
    };
    serde_json::from_value(z).with_context(|| format!("{} does not hold a loop", path.display()))
}
