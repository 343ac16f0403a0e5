//! Setting layers: command-line flags, an optional TOML file and `QK_*`
//! environment variables, looked up in that order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Keys accepted in config files and as `QK_<KEY>` variables.
pub const KEYS: &[&str] = &[
    "data",
    "test",
    "label_column",
    "header",
    "zero_based",
    "method",
    "learner_c",
    "class_weight",
    "protocol",
    "sample_size",
    "n_prevpoints",
    "budget",
    "repeats",
    "metrics",
    "smoothing",
    "seed",
    "jobs",
    "folds",
    "val_split",
    "search_split",
    "error",
    "refit",
    "out",
    "param",
];

/// Keys that may hold a list.
const LIST_KEYS: &[&str] = &["data", "method", "metrics", "param"];

pub type Layer = BTreeMap<String, Vec<String>>;

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_").to_ascii_lowercase()
}

fn scalar(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(Error::invalid(format!("config key `{key}` must be a string, number or boolean"))),
    }
}

fn insert(layer: &mut Layer, key: &str, value: &toml::Value) -> Result<()> {
    let key = normalize_key(key);
    if !KEYS.contains(&key.as_str()) {
        return Err(Error::invalid(format!("unknown config key `{key}`")));
    }
    if layer.contains_key(&key) {
        return Err(Error::invalid(format!("config key `{key}` given twice")));
    }
    let values = match value {
        toml::Value::Array(items) => {
            if !LIST_KEYS.contains(&key.as_str()) {
                return Err(Error::invalid(format!("config key `{key}` takes a single value")));
            }
            items.iter().map(|v| scalar(&key, v)).collect::<Result<Vec<_>>>()?
        }
        v => vec![scalar(&key, v)?],
    };
    layer.insert(key, values);
    Ok(())
}

/// Parses a config file. Keys may sit at the top level or inside one level of
/// `[section]` tables; section names only group keys.
pub fn parse_config(text: &str) -> Result<Layer> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::invalid(format!("config: {}", e.message())))?;
    let mut layer = Layer::new();
    for (k, v) in &table {
        match v {
            toml::Value::Table(inner) => {
                for (k2, v2) in inner {
                    if v2.is_table() {
                        return Err(Error::invalid(format!("config section `{k}.{k2}` nests too deep")));
                    }
                    insert(&mut layer, k2, v2)?;
                }
            }
            v => insert(&mut layer, k, v)?,
        }
    }
    Ok(layer)
}

/// `QK_SAMPLE_SIZE=50` style variables; list keys split on `;`.
pub fn env_layer(lookup: &dyn Fn(&str) -> Option<String>) -> Layer {
    let mut layer = Layer::new();
    for key in KEYS {
        if let Some(v) = lookup(&format!("QK_{}", key.to_ascii_uppercase())) {
            let values: Vec<String> = if LIST_KEYS.contains(key) {
                v.split(';').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            } else {
                vec![v.trim().to_string()]
            };
            if !values.is_empty() {
                layer.insert(key.to_string(), values);
            }
        }
    }
    layer
}

/// Ordered layers, highest precedence first.
pub struct Layers(pub Vec<Layer>);

impl Layers {
    /// The values and layer rank of the first layer defining `key`.
    pub fn find(&self, key: &str) -> Option<(usize, &[String])> {
        self.0
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.get(key).map(|v| (i, v.as_slice())))
    }

    pub fn list(&self, key: &str) -> &[String] {
        self.find(key).map(|(_, v)| v).unwrap_or(&[])
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.find(key).and_then(|(_, v)| v.last()).map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::invalid(format!("bad value `{s}` for `{key}`"))),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some(s) => parse_bool(s).ok_or_else(|| Error::invalid(format!("bad boolean `{s}` for `{key}`"))),
        }
    }
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}
