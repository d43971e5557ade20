use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{input, Result};

/// Top-level keys besides per-subcommand sections.
const GLOBAL_KEYS: [&str; 3] = ["seed", "threads", "out"];

/// Parses a config object holding global keys and per-subcommand sections.
pub fn parse(text: &str, sections: &[&str]) -> Result<Map<String, Value>> {
    let map = match serde_json::from_str(text) {
        Ok(Value::Object(m)) => m,
        Ok(_) => return Err(input("config must be a JSON object")),
        Err(e) => return Err(input(format!("config: {e}"))),
    };
    if let Some(k) = map.keys().find(|k| !GLOBAL_KEYS.contains(&k.as_str()) && !sections.contains(&k.as_str())) {
        return Err(input(format!("config: unknown key {k:?}")));
    }
    Ok(map)
}

/// Values from the `section` object of the config, overridden by every flag
/// that was given on the command line.
pub fn resolve<A: Serialize + DeserializeOwned>(
    args: &A,
    config: Option<&Map<String, Value>>,
    section: &str,
) -> Result<A> {
    let mut merged = Map::new();
    match config.and_then(|c| c.get(section)) {
        Some(Value::Object(m)) => merged = m.clone(),
        Some(_) => return Err(input(format!("config: {section} must be an object"))),
        None => {}
    }
    let flags = serde_json::to_value(args).map_err(|e| input(e.to_string()))?;
    if let Value::Object(m) = flags {
        for (k, v) in m {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| input(format!("config {section}: {e}")))
}

pub fn global<T: DeserializeOwned>(config: Option<&Map<String, Value>>, key: &str) -> Result<Option<T>> {
    match config.and_then(|c| c.get(key)) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| input(format!("config {key}: {e}"))),
    }
}
