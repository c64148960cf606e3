use std::path::PathBuf;

use anyhow::{bail, Context};
use qnglab::{absolute_threshold, genuine_threshold_curve, qng_threshold_numeric, CurveScheme, GridSpec, PairDetection, ThresholdCurve};
use serde::{Deserialize, Serialize};

use crate::config::kebab;
use crate::output::{table_dir, Header, TableFile};
use crate::Outcome;

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Args {
    /// multiplex, genuine, absolute, two-mode-spad or two-mode-pnrd.
    #[arg(long, value_parser = kebab::<CurveScheme>)]
    pub scheme: Option<CurveScheme>,
    /// Order of the criterion.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of detectors in the multiplex network (default n + 1).
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_spads: Option<usize>,
    /// Squeezing grid points.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Displacement scan points per squeezing value.
    #[arg(long)]
    pub scan: Option<usize>,
    /// Output file; defaults to a scheme-named file in the table directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an existing table.
    #[arg(long)]
    pub force: bool,
}

fn grid(a: &Args) -> anyhow::Result<GridSpec> {
    let d = GridSpec::default();
    let g = GridSpec {
        points: a.points.unwrap_or(d.points),
        t_min: a.t_min.unwrap_or(d.t_min),
        t_max: a.t_max.unwrap_or(d.t_max),
        scan: a.scan.unwrap_or(d.scan),
    };
    g.validate()?;
    Ok(g)
}

pub fn default_name(scheme: CurveScheme, n: usize, n_spads: usize) -> String {
    match scheme {
        CurveScheme::Multiplex => format!("multiplex-n{n}-N{n_spads}.json"),
        CurveScheme::Genuine => format!("genuine-n{n}-N{n_spads}.json"),
        CurveScheme::Absolute => format!("absolute-n{n}.json"),
        CurveScheme::TwoModeSpad => "two-mode-spad.json".into(),
        CurveScheme::TwoModePnrd => "two-mode-pnrd.json".into(),
    }
}

pub fn build(a: &Args) -> anyhow::Result<TableFile> {
    let scheme = a.scheme.context("--scheme is required")?;
    let n = a.n.unwrap_or(1);
    let n_spads = a.n_spads.unwrap_or(n + 1);
    let g = grid(a)?;
    let (curve, grid, absolute) = match scheme {
        CurveScheme::Multiplex => (qng_threshold_numeric(n, n_spads, &g)?, Some(g), None),
        CurveScheme::Genuine => (genuine_threshold_curve(n, n_spads, &g)?, Some(g), None),
        CurveScheme::Absolute => {
            let abs = absolute_threshold(n)?;
            (ThresholdCurve::absolute(n, abs.value), None, Some(abs))
        }
        CurveScheme::TwoModeSpad => (ThresholdCurve::two_mode(PairDetection::Spad, g.points), None, None),
        CurveScheme::TwoModePnrd => (ThresholdCurve::two_mode(PairDetection::Pnrd, g.points), None, None),
    };
    Ok(TableFile { header: Header::new("threshold", None), grid, absolute, curve })
}

pub fn run(a: Args) -> anyhow::Result<Outcome> {
    let scheme = a.scheme.context("--scheme is required")?;
    let n = a.n.unwrap_or(1);
    let out = a.out.clone().unwrap_or_else(|| table_dir().join(default_name(scheme, n, a.n_spads.unwrap_or(n + 1))));
    if out.exists() && !a.force {
        bail!("refusing to overwrite {} without --force", out.display());
    }
    let table = build(&a)?;
    let text = serde_json::to_string_pretty(&table)? + "\n";
    std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
    println!("{}", out.display());
    Ok(Outcome::Done)
}
