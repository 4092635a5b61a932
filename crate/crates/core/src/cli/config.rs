use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};

/// Schema version accepted in every run config.
pub const CONFIG_VERSION: u32 = 1;

/// Reads a TOML file (or starts empty) and applies `key.path=value` overrides.
pub fn user_table(path: Option<&Path>, sets: &[String]) -> Result<Table> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str::<Table>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for s in sets {
        apply_set(&mut table, s)?;
    }
    Ok(table)
}

/// Parses `a.b.c=value`. The value is read as a TOML literal, falling back to a bare
/// string.
pub fn apply_set(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(|k| k.trim().is_empty()) {
        return Err(Error::Config(format!("override '{assignment}' has an empty key")));
    }
    let value = toml::from_str::<Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    set_path(table, key, value)
}

pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    let mut cur = table;
    for (i, p) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{}' is not a table", parts[..=i].join("."))))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn get_path<'a>(table: &'a Table, key: &str) -> Option<&'a Value> {
    let mut parts = key.split('.');
    let mut v = table.get(parts.next()?)?;
    for p in parts {
        v = v.as_table()?.get(p)?;
    }
    Some(v)
}

/// Overlays `top` on `base`. Tables merge key by key, except tables carrying a `kind`
/// tag, which replace the base wholesale.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) if !t.contains_key("kind") => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Fills `user` from the serialized `defaults`, checks `version` and deserializes.
pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, user: Table) -> Result<T> {
    if let Some(v) = user.get("version") {
        if v.as_integer() != Some(CONFIG_VERSION as i64) {
            return Err(Error::Config(format!(
                "unsupported config version {v}; expected {CONFIG_VERSION}"
            )));
        }
    }
    let mut table = Table::try_from(defaults).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut table, user);
    table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string().trim().to_string()))
}
