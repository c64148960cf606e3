use std::path::PathBuf;

use anyhow::Context;
use qnglab::{nearest_csv, run_verification_multi, SamplerRanges, SamplerSpec, VerifyReport, DEFAULT_TOP_K};
use serde::{Deserialize, Serialize};

use crate::output::{emit, load_table, Header};
use crate::Outcome;

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Args {
    /// gaussian-1m, gaussian-product-2m, gaussian-product-3m, modulated-core or modulated-core-2m.
    #[arg(long)]
    pub family: Option<String>,
    /// Core order of the modulated-core families.
    #[arg(long)]
    pub core_order: Option<usize>,
    #[arg(long)]
    pub cycles: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Closest samples kept in the report.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(skip)]
    pub ranges: Option<SamplerRanges>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the closest samples as CSV.
    #[arg(long)]
    pub nearest_csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Document {
    header: Header,
    spec: SamplerSpec,
    report: VerifyReport,
}

pub fn run(a: Args) -> anyhow::Result<Outcome> {
    let family = a.family.as_deref().context("--family is required")?;
    let mut tagged = serde_json::json!({ "family": family });
    if let Some(n) = a.core_order {
        tagged["n"] = n.into();
    }
    let spec = SamplerSpec {
        family: serde_json::from_value(tagged).with_context(|| format!("unknown family {family:?} or missing --core-order"))?,
        ranges: a.ranges.unwrap_or_default(),
        cycles: a.cycles.unwrap_or(100_000),
        seed: a.seed.unwrap_or(0),
    };
    let curve = load_table(a.table.as_deref().context("--table is required")?)?;
    let report = run_verification_multi(&spec, &[curve], a.top_k.unwrap_or(DEFAULT_TOP_K))?.remove(0);
    if let Some(p) = &a.nearest_csv {
        emit(Some(p), &nearest_csv(&report))?;
    }
    let passed = report.violations == 0;
    let doc = Document { header: Header::new("verify", Some(spec.seed)), spec, report };
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(if passed { Outcome::Done } else { Outcome::VerdictFailed })
}
