use std::path::PathBuf;

use anyhow::bail;
use qnglab::{thermal_depth, DepthCriterion, DepthOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::output::{emit, num, Format, Header, Table};
use crate::Outcome;

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Args {
    /// Fock numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// absolute-qng, metrological, wigner-annuli (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<String>>,
    /// The metrological criterion compares |n> against |n - offset>.
    #[arg(long)]
    pub reference_offset: Option<usize>,
    #[arg(long)]
    pub initial_nbar: Option<f64>,
    /// Upper end of the thermal-noise bracket.
    #[arg(long)]
    pub max_nbar: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn criterion(name: &str, n: usize, offset: usize) -> anyhow::Result<DepthCriterion> {
    Ok(match name {
        "absolute-qng" => DepthCriterion::AbsoluteQng,
        "wigner-annuli" => DepthCriterion::WignerAnnuli,
        "metrological" => match n.checked_sub(offset) {
            Some(reference) if offset > 0 => DepthCriterion::Metrological { reference },
            _ => bail!(qnglab::Error::InvalidParameter(format!("no reference |n-{offset}> below |{n}>"))),
        },
        other => bail!("unknown depth criterion {other:?}"),
    })
}

pub fn run(a: Args) -> anyhow::Result<Outcome> {
    let ns = a.n.unwrap_or_else(|| vec![2, 5, 10]);
    let names = a.criteria.unwrap_or_else(|| ["metrological", "absolute-qng", "wigner-annuli"].map(String::from).to_vec());
    let offset = a.reference_offset.unwrap_or(1);
    let d = DepthOptions::default();
    let opts = DepthOptions {
        initial_nbar: a.initial_nbar.unwrap_or(d.initial_nbar),
        max_nbar: a.max_nbar.unwrap_or(d.max_nbar),
        rtol: a.rtol.unwrap_or(d.rtol),
        intensities: d.intensities,
    };
    let jobs = ns
        .iter()
        .flat_map(|&n| names.iter().map(move |c| (n, c)))
        .map(|(n, c)| Ok((n, criterion(c, n, offset)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows = jobs
        .par_iter()
        .map(|&(n, c)| Ok(vec![Value::from(n), Value::from(c.label()), num(thermal_depth(n, c, &opts)?)]))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let table = Table { columns: ["n", "criterion", "depth"].map(String::from).to_vec(), rows };
    emit(a.out.as_deref(), &table.render(&Header::new("phonon-depth", None), a.format.unwrap_or_default())?)?;
    Ok(Outcome::Done)
}
