pub mod otdr;
pub mod scan;
pub mod switch;

use std::path::Path;

use serde::de::DeserializeOwned;
use xtalk_core::schema::{parse_json, SchemaMode};

use crate::failure::{CliResult, Failure};
use crate::manifest::{Run, SCHEMA_VERSION};

pub(crate) fn mode(lax: bool) -> SchemaMode {
    if lax {
        SchemaMode::Lax
    } else {
        SchemaMode::Strict
    }
}

/// Load a JSON document, accepting an optional top-level `schema_version`
/// that must match the supported one.
pub(crate) fn load_doc<T: DeserializeOwned>(run: &mut Run, path: &Path, lax: bool) -> CliResult<T> {
    let text = run.read_string(path)?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(v) = obj.remove("schema_version") {
            if v.as_u64() != Some(SCHEMA_VERSION as u64) {
                return Err(Failure::input(format!(
                    "{}: unsupported schema_version {v} (expected {SCHEMA_VERSION})",
                    path.display()
                )));
            }
        }
    }
    parse_json(&value.to_string(), mode(lax)).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}
