//! Canonical JSON form of an [`Instance`].
//!
//! ```json
//! { "version": 1, "horizon": 1.0,
//!   "resources": [{"capacity": 2, "expiry": 0.5}],
//!   "types": [{"rate_pieces": [[0.0, 1.0, 3.0]], "rewards": [0.9]}] }
//! ```
//!
//! Floats are written in shortest round-trip form, so `load(save(x)) == x`
//! holds bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CustomerType, Instance, ModelError, RateFunction, RatePiece, Resource};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u64,
    horizon: f64,
    resources: Vec<ResourceFile>,
    types: Vec<TypeFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResourceFile {
    capacity: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expiry: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeFile {
    rate_pieces: Vec<[f64; 3]>,
    rewards: Vec<f64>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u64>,
}

impl From<&Instance> for InstanceFile {
    fn from(x: &Instance) -> Self {
        InstanceFile {
            version: SCHEMA_VERSION,
            horizon: x.horizon,
            resources: x
                .resources
                .iter()
                .map(|r| ResourceFile { capacity: r.capacity, expiry: r.expiry })
                .collect(),
            types: x
                .types
                .iter()
                .map(|t| TypeFile {
                    rate_pieces: t.rate.pieces.iter().map(|p| [p.start, p.end, p.rate]).collect(),
                    rewards: t.rewards.clone(),
                })
                .collect(),
        }
    }
}

impl From<InstanceFile> for Instance {
    fn from(f: InstanceFile) -> Self {
        Instance {
            horizon: f.horizon,
            resources: f
                .resources
                .into_iter()
                .map(|r| Resource { capacity: r.capacity, expiry: r.expiry })
                .collect(),
            types: f
                .types
                .into_iter()
                .map(|t| CustomerType {
                    rate: RateFunction::new(
                        t.rate_pieces.iter().map(|&[a, b, r]| RatePiece::new(a, b, r)).collect(),
                    ),
                    rewards: t.rewards,
                })
                .collect(),
        }
    }
}

fn parse_error(field: String, e: &serde_json::Error) -> ModelError {
    // serde_json appends " at line L column C"; the position is reported separately.
    let msg = e.to_string();
    let message = match msg.rfind(" at line ") {
        Some(idx) => msg[..idx].to_string(),
        None => msg,
    };
    ModelError::Parse { field, line: e.line(), column: e.column(), message }
}

/// Serialises without validating.
pub fn to_json_string(instance: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from(instance))
        .expect("instance serialisation cannot fail");
    s.push('\n');
    s
}

/// Parses and validates an instance document.
pub fn from_json_str(text: &str) -> Result<Instance, ModelError> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| parse_error("version".into(), &e))?;
    match probe.version {
        Some(SCHEMA_VERSION) => {}
        Some(found) => return Err(ModelError::SchemaVersion { found, expected: SCHEMA_VERSION }),
        None => {
            return Err(ModelError::Parse {
                field: "version".into(),
                line: 1,
                column: 1,
                message: "missing field `version`".into(),
            })
        }
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let file: InstanceFile = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| parse_error(e.path().to_string(), e.inner()))?;
    Instance::from(file).validated()
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    from_json_str(&text)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, to_json_string(instance))
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}
