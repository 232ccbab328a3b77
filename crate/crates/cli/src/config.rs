//! `--config` handling: keys of a flat TOML table replace the values parsed
//! from the command line. Keys use the long flag names with `_` or `-`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

pub fn overlay<T: Serialize + DeserializeOwned>(
    args: T,
    path: Option<&Path>,
) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut merged = serde_json::to_value(&args).expect("arguments serialize");
    let obj = merged.as_object_mut().expect("arguments are a struct");
    for (key, value) in table {
        let key = key.replace('-', "_");
        if !obj.contains_key(&key) {
            return Err(CliError::usage(format!(
                "{}: unknown key {key:?}",
                path.display()
            )));
        }
        let value = serde_json::to_value(value).map_err(|e| CliError::usage(e.to_string()))?;
        obj.insert(key, value);
    }
    serde_json::from_value(merged).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// The resolved configuration as embedded in report headers.
pub fn resolved<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}
