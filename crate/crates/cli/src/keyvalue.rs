//! `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment. Keys are the field names of
//! the model, training and conversion configs (for example `lr = 5e-5`,
//! `structure = liae`, `color_mode = rct`). Values are read as JSON scalars
//! when possible and as bare strings otherwise.

use std::collections::BTreeMap;
use std::path::Path;

use facelab_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub fn parse(text: &str) -> Result<BTreeMap<String, Value>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidArgument(format!("line {}: expected `key = value`", n + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::InvalidArgument(format!("line {}: empty key", n + 1)));
        }
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        if out.insert(k.to_string(), value).is_some() {
            return Err(Error::InvalidArgument(format!("line {}: duplicate key {k}", n + 1)));
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

/// Overwrites the fields of `base` named in `entries`, consuming the keys it
/// knows. Unknown keys stay in `entries` for the caller to report.
pub fn apply<T: Serialize + DeserializeOwned>(base: &T, entries: &mut BTreeMap<String, Value>) -> Result<T> {
    let mut obj = serde_json::to_value(base).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let fields = obj.as_object_mut().expect("config structs serialize to objects");
    let known: Vec<String> = entries.keys().filter(|k| fields.contains_key(*k)).cloned().collect();
    for k in known {
        let v = entries.remove(&k).expect("key listed above");
        fields.insert(k, v);
    }
    serde_json::from_value(obj).map_err(|e| Error::InvalidArgument(format!("bad config value: {e}")))
}

pub fn reject_unknown(entries: &BTreeMap<String, Value>) -> Result<()> {
    match entries.keys().next() {
        Some(k) => Err(Error::InvalidArgument(format!("unknown config key {k}"))),
        None => Ok(()),
    }
}
