//! Strict or lenient JSON document parsing with field paths in errors.

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// How unknown keys in a document are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchemaMode {
    #[default]
    Strict,
    Lax,
}

/// Deserialize a JSON document. Errors name the offending field path, and
/// strict mode rejects keys the target type does not know.
pub fn parse_json<T: DeserializeOwned>(document: &str, mode: SchemaMode) -> Result<T> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(document);
    let mut record = |path: serde_ignored::Path<'_>| unknown.push(bracketed(&path));
    let ignoring = serde_ignored::Deserializer::new(&mut de, &mut record);
    let value: T = serde_path_to_error::deserialize(ignoring).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        path: ".".into(),
        message: e.to_string(),
    })?;
    if mode == SchemaMode::Strict {
        if let Some(path) = unknown.into_iter().next() {
            return Err(Error::Parse {
                path,
                message: "unknown key (use lax mode to ignore)".into(),
            });
        }
    }
    Ok(value)
}

/// `a.b[2].c` style, matching the paths in deserialization errors.
fn bracketed(path: &serde_ignored::Path<'_>) -> String {
    use serde_ignored::Path;
    match path {
        Path::Root => String::new(),
        Path::Seq { parent, index } => format!("{}[{index}]", bracketed(parent)),
        Path::Map { parent, key } => {
            let head = bracketed(parent);
            if head.is_empty() {
                key.clone()
            } else {
                format!("{head}.{key}")
            }
        }
        Path::Some { parent } | Path::NewtypeStruct { parent } | Path::NewtypeVariant { parent } => bracketed(parent),
    }
}
