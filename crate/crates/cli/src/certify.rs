use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qnglab::{certify_counts, qng_verdict, qng_verdict_counts, AlphaBeta, ClickCounts, CurveScheme, ThresholdCurve, Verdict};
use serde::{Deserialize, Serialize};

use crate::output::{emit, load_table, Header};
use crate::Outcome;

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Args {
    /// Click records (CSV: window_id,click_1,..,click_N) or aggregated counts (.json).
    #[arg(long)]
    pub clicks: Option<PathBuf>,
    /// Threshold table produced by `threshold`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Required margin in standard deviations.
    #[arg(long)]
    pub k_sigma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Windows with the first n designated detectors clicking (success) and the first n + 1 (error).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub windows: u64,
    pub success: u64,
    pub error: u64,
}

struct Records {
    counts: Counts,
    hbt: Option<ClickCounts>,
}

fn read_csv(path: &Path, curve: &ThresholdCurve) -> anyhow::Result<Records> {
    if !matches!(curve.scheme, CurveScheme::Multiplex | CurveScheme::Genuine) {
        bail!("click records need a multiplex or genuine table, got {:?}", curve.scheme);
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers().context("schema error: missing CSV header")?.clone();
    let expected: Vec<String> = std::iter::once("window_id".to_string()).chain((1..=curve.n_spads).map(|i| format!("click_{i}"))).collect();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        bail!("schema error: CSV header must be {}", expected.join(","));
    }
    let n = curve.order;
    let (mut c, mut pair) = (Counts { windows: 0, success: 0, error: 0 }, [0u64; 3]);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("schema error in record {}", line + 1))?;
        rec[0].trim().parse::<u64>().with_context(|| format!("schema error: bad window_id in record {}", line + 1))?;
        let clicks = rec
            .iter()
            .skip(1)
            .map(|f| match f.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => bail!("schema error: click value {other:?} in record {} is not 0 or 1", line + 1),
            })
            .collect::<anyhow::Result<Vec<bool>>>()?;
        c.windows += 1;
        c.success += clicks[..n].iter().all(|&b| b) as u64;
        c.error += clicks[..=n].iter().all(|&b| b) as u64;
        pair[0] += clicks[0] as u64;
        pair[1] += clicks[1] as u64;
        pair[2] += (clicks[0] && clicks[1]) as u64;
    }
    let hbt = (curve.n_spads == 2).then_some(ClickCounts { windows: c.windows, click_1: pair[0], click_2: pair[1], coincidences: pair[2] });
    Ok(Records { counts: c, hbt })
}

fn read_counts(path: &Path) -> anyhow::Result<Records> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let counts: Counts = serde_json::from_str(&text).context("schema error in counts file")?;
    Ok(Records { counts, hbt: None })
}

#[derive(Debug, Serialize)]
struct Report {
    header: Header,
    table: TableId,
    counts: Counts,
    verdict: Verdict,
    k_sigma: f64,
    passed: bool,
    nonclassicality: Option<AlphaBeta>,
}

#[derive(Debug, Serialize)]
struct TableId {
    scheme: CurveScheme,
    n: usize,
    #[serde(rename = "N")]
    n_spads: usize,
}

pub fn run(a: Args) -> anyhow::Result<Outcome> {
    let curve = load_table(a.table.as_deref().context("--table is required")?)?;
    let clicks = a.clicks.as_deref().context("--clicks is required")?;
    let k = a.k_sigma.unwrap_or(3.0);
    if !(k >= 0.0) {
        bail!("--k-sigma must be non-negative");
    }
    let rec = if clicks.extension().is_some_and(|e| e == "json") { read_counts(clicks)? } else { read_csv(clicks, &curve)? };
    let c = rec.counts;
    let verdict = match curve.scheme {
        CurveScheme::TwoModeSpad | CurveScheme::TwoModePnrd => {
            if c.windows == 0 {
                bail!(qnglab::Error::InsufficientCounts("no windows recorded"));
            }
            qng_verdict(c.success as f64 / c.windows as f64, c.error as f64 / c.windows as f64, &curve)?
        }
        _ => qng_verdict_counts(c.success, c.error, c.windows, &curve)?,
    };
    let passed = verdict.passed && verdict.sigma.map_or(true, |s| s >= k);
    let nonclassicality = rec.hbt.and_then(|h| certify_counts(&h).ok());
    let report = Report {
        header: Header::new("certify", None),
        table: TableId { scheme: curve.scheme, n: curve.order, n_spads: curve.n_spads },
        counts: c,
        verdict,
        k_sigma: k,
        passed,
        nonclassicality,
    };
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(if passed { Outcome::Done } else { Outcome::VerdictFailed })
}
