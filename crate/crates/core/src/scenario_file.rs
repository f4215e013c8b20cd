//! Scenario files and the scenarios shipped with the crate.
//!
//! Files are TOML with exactly the keys `mode`, `k`, `z0`, `sources` and
//! `collectors`; each source is `{ x, y, z, weight? }` and each collector
//! `{ u, v }`. Unknown keys are rejected. JSON with the same schema is also
//! accepted, which is how result documents embed their scenario.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Collector, Mode, Scenario, SourcePoint};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    mode: Mode,
    k: f64,
    z0: f64,
    sources: Vec<SourceEntry>,
    collectors: Vec<Collector>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceEntry {
    x: f64,
    y: f64,
    z: f64,
    weight: Option<f64>,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        let weighted = self.sources.iter().filter(|s| s.weight.is_some()).count();
        if weighted != 0 && weighted != self.sources.len() {
            return Err(Error::Validation(
                "either every source carries a weight or none does".into(),
            ));
        }
        let sources = self
            .sources
            .into_iter()
            .map(|s| SourcePoint::new(s.x, s.y, s.z, s.weight.unwrap_or(1.0)))
            .collect();
        Scenario::new(self.mode, self.k, self.z0, sources, self.collectors)
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Validation(e.message().to_string()))?;
        file.into_scenario()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        file.into_scenario()
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_value(value).map_err(|e| Error::Validation(e.to_string()))?;
        file.into_scenario()
    }

    /// Reads a scenario; `.json` files are parsed as JSON, everything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scenario serializes to JSON")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes to JSON");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A scenario file shipped with the crate.
#[derive(Debug, Clone, Copy)]
pub struct BundledScenario {
    pub name: &'static str,
    pub text: &'static str,
}

impl BundledScenario {
    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::from_toml_str(self.text)
    }
}

const BUNDLED: &[BundledScenario] = &[
    BundledScenario {
        name: "two_collector.scn",
        text: include_str!("../scenarios/two_collector.scn"),
    },
    BundledScenario {
        name: "two_collector_wide.scn",
        text: include_str!("../scenarios/two_collector_wide.scn"),
    },
    BundledScenario {
        name: "four_collector.scn",
        text: include_str!("../scenarios/four_collector.scn"),
    },
    BundledScenario {
        name: "four_collector_qft.scn",
        text: include_str!("../scenarios/four_collector_qft.scn"),
    },
    BundledScenario {
        name: "disc_aperture_r1.scn",
        text: include_str!("../scenarios/disc_aperture_r1.scn"),
    },
];

pub fn bundled_scenarios() -> &'static [BundledScenario] {
    BUNDLED
}

/// Looks up a bundled scenario by file name, with or without the `.scn` suffix.
pub fn bundled(name: &str) -> Option<&'static BundledScenario> {
    let name = name.strip_prefix("bundled:").unwrap_or(name);
    BUNDLED
        .iter()
        .find(|b| b.name == name || b.name.strip_suffix(".scn") == Some(name))
}
