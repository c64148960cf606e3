use std::path::Path;

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SCENARIO_VERSION: u64 = 1;
const SECTIONS: [&str; 5] = ["threshold", "certify", "sweep", "phonon-depth", "verify"];

/// Parsed scenario file: one optional block per command.
#[derive(Debug, Default)]
pub struct Scenario {
    blocks: Map<String, Value>,
}

impl Scenario {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("scenario {} is not JSON", path.display()))?;
        let Value::Object(mut blocks) = value else { bail!("schema error: scenario must be a JSON object") };
        match blocks.remove("version") {
            Some(v) if v.as_u64() == Some(SCENARIO_VERSION) => {}
            Some(v) => bail!("schema error: unsupported scenario version {v}"),
            None => bail!("schema error: scenario lacks \"version\""),
        }
        if let Some(k) = blocks.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            bail!("schema error: unknown scenario block \"{k}\"");
        }
        Ok(Self { blocks })
    }

    /// The block for `name` with every flag that was given on the command line laid over it.
    pub fn section<T: Serialize + DeserializeOwned>(&self, name: &str, flags: &T) -> anyhow::Result<T> {
        let mut merged = match self.blocks.get(name) {
            Some(Value::Object(m)) => m.clone(),
            Some(_) => bail!("schema error: scenario block \"{name}\" must be an object"),
            None => Map::new(),
        };
        serde_json::from_value::<T>(Value::Object(merged.clone())).with_context(|| format!("schema error in scenario block \"{name}\""))?;
        let Value::Object(given) = serde_json::to_value(flags)? else { unreachable!("argument structs serialize to objects") };
        for (k, v) in given {
            if !(v.is_null() || v == Value::Bool(false)) {
                merged.insert(k, v);
            }
        }
        Ok(serde_json::from_value(Value::Object(merged))?)
    }
}

/// Parses a kebab-case enum name the way the JSON files spell it.
pub fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}
