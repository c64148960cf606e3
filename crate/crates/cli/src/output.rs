use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qnglab::{ThresholdCurve, CONVENTION_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TABLE_DIR_VAR: &str = "QNGLAB_TABLE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub convention_version: u32,
}

impl Header {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Self {
            tool: "qnglab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            convention_version: CONVENTION_VERSION,
        }
    }

    fn comment_block(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "# tool: {}\n# version: {}\n# command: {}\n# seed: {seed}\n# convention_version: {}\n",
            self.tool, self.version, self.command, self.convention_version
        )
    }
}

/// Rows with a fixed column order, rendered as CSV under a comment header or as JSON.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn render(&self, header: &Header, format: Format) -> anyhow::Result<String> {
        match format {
            Format::Json => {
                #[derive(Serialize)]
                struct Doc<'a> {
                    header: &'a Header,
                    columns: &'a [String],
                    rows: &'a [Vec<Value>],
                }
                let doc = Doc { header, columns: &self.columns, rows: &self.rows };
                Ok(serde_json::to_string_pretty(&doc)? + "\n")
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(cell))?;
                }
                Ok(header.comment_block() + &String::from_utf8(w.into_inner()?)?)
            }
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Writes to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn table_dir() -> PathBuf {
    std::env::var_os(TABLE_DIR_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// A table path as given, or looked up inside the table directory when it does not exist as given.
pub fn resolve_table(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        path.to_path_buf()
    } else {
        table_dir().join(path)
    }
}

/// Threshold table file: the curve plus the provenance needed to regenerate it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    pub header: Header,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<qnglab::GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absolute: Option<qnglab::AbsoluteThreshold>,
    pub curve: ThresholdCurve,
}

pub fn load_table(path: &Path) -> anyhow::Result<ThresholdCurve> {
    let path = resolve_table(path);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading table {}", path.display()))?;
    let file: TableFile = serde_json::from_str(&text).with_context(|| format!("schema error in table {}", path.display()))?;
    if file.header.convention_version != CONVENTION_VERSION {
        bail!("table {} uses convention version {}, expected {CONVENTION_VERSION}", path.display(), file.header.convention_version);
    }
    file.curve.validate()?;
    Ok(file.curve)
}
