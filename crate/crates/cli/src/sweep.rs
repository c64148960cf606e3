use std::path::PathBuf;

use anyhow::{bail, Context};
use qnglab::{
    alpha_beta, cascade_probabilities, coincidence_bound, hbt_probabilities, qng_verdict, ClickKernel, CurveScheme, Error, PairDetection,
    SourceModel, ThresholdCurve,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::kebab;
use crate::output::{emit, load_table, num, Format, Header, Table};
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// Success against a threshold table.
    Qng,
    AlphaBeta,
    CoincidenceSpad,
    CoincidencePnrd,
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Args {
    /// Source model file (JSON).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// qng, alpha-beta, coincidence-spad or coincidence-pnrd.
    #[arg(long, value_parser = kebab::<Criterion>)]
    pub criterion: Option<Criterion>,
    /// Model field to sweep.
    #[arg(long)]
    pub param: Option<String>,
    /// start:stop:count.
    #[arg(long)]
    pub range: Option<String>,
    /// Logarithmic spacing.
    #[arg(long)]
    pub log: bool,
    /// Threshold table, required by the qng criterion.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `model` with the numeric field `param` set to `x`.
fn with_param(model: &SourceModel, param: &str, x: f64) -> anyhow::Result<SourceModel> {
    let mut v = serde_json::to_value(model)?;
    let slot = v.get_mut(param).filter(|s| s.is_number()).with_context(|| format!("model has no numeric parameter {param:?}"))?;
    *slot = if slot.is_u64() {
        if !(x >= 0.0 && x.fract() == 0.0) {
            bail!("parameter {param} takes non-negative integers, got {x}");
        }
        Value::from(x as u64)
    } else {
        num(x)
    };
    Ok(serde_json::from_value(v)?)
}

fn grid(range: &str, log: bool) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = range.split(':').collect();
    let [a, b, n] = parts[..] else { bail!("range must be start:stop:count, got {range:?}") };
    let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
    let n: usize = n.trim().parse()?;
    if n < 2 || !a.is_finite() || !b.is_finite() || (log && !(a > 0.0 && b > 0.0)) {
        bail!("bad range {range:?}");
    }
    Ok((0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            if i == 0 || i == n - 1 {
                [a, b][i.min(1)]
            } else if log {
                (a.ln() + f * (b.ln() - a.ln())).exp()
            } else {
                a + f * (b - a)
            }
        })
        .collect())
}

fn columns(criterion: Criterion, param: &str) -> Vec<String> {
    let rest: &[&str] = match criterion {
        Criterion::Qng => &["success", "error", "threshold", "margin", "passed"],
        Criterion::AlphaBeta => &["alpha", "beta", "passed"],
        Criterion::CoincidenceSpad | Criterion::CoincidencePnrd => &["Ps", "Pe1", "Pe2", "bound", "margin", "passed"],
    };
    std::iter::once(param).chain(rest.iter().copied()).map(String::from).collect()
}

fn qng_row(model: &SourceModel, curve: &ThresholdCurve, kernel: Option<&ClickKernel>) -> anyhow::Result<Vec<Value>> {
    let d = model.signal_distribution()?;
    let (s, e) = match kernel {
        Some(k) => k.evaluate(&d.probs)?,
        None => (d.p(curve.order), (1.0 - d.probs[..=curve.order.min(d.probs.len() - 1)].iter().sum::<f64>()).max(0.0)),
    };
    let out = match qng_verdict(s, e, curve) {
        Ok(v) => vec![num(v.bound), num(v.margin), Value::Bool(v.passed)],
        Err(Error::OutOfDomain { .. }) => vec![Value::Null, Value::Null, Value::Bool(false)],
        Err(err) => return Err(err.into()),
    };
    Ok([num(s), num(e)].into_iter().chain(out).collect())
}

fn row(
    model: &SourceModel,
    criterion: Criterion,
    curve: Option<&ThresholdCurve>,
    kernel: Option<&ClickKernel>,
) -> anyhow::Result<Vec<Value>> {
    match criterion {
        Criterion::Qng => qng_row(model, curve.expect("qng sweeps load a table"), kernel),
        Criterion::AlphaBeta => {
            let p = hbt_probabilities(&model.signal_distribution()?, 0.5, 1.0)?;
            Ok(match alpha_beta(&p) {
                Ok(ab) => vec![num(ab.alpha), num(ab.beta), Value::Bool(ab.alpha_verdict.passed || ab.beta_verdict.passed)],
                Err(Error::InsufficientCounts(_)) => vec![Value::Null, Value::Null, Value::Bool(false)],
                Err(err) => return Err(err.into()),
            })
        }
        Criterion::CoincidenceSpad | Criterion::CoincidencePnrd => {
            let detection = if criterion == Criterion::CoincidenceSpad { PairDetection::Spad } else { PairDetection::Pnrd };
            let (c, opts, _) = model.cascade()?;
            let p = cascade_probabilities(&c, detection, &opts)?;
            let (ps, pe1, pe2) = (p.get("Ps")?, p.get("Pe1")?, p.get("Pe2")?);
            let bound = coincidence_bound(detection, 0.5 * (pe1 + pe2));
            Ok(vec![num(ps), num(pe1), num(pe2), num(bound), num(ps - bound), Value::Bool(ps > bound)])
        }
    }
}

pub fn run(a: Args) -> anyhow::Result<Outcome> {
    let path = a.model.as_deref().context("--model is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    let model: SourceModel = serde_json::from_str(&text).with_context(|| format!("schema error in model {}", path.display()))?;
    let criterion = a.criterion.context("--criterion is required")?;
    let param = a.param.as_deref().context("--param is required")?;
    let xs = grid(a.range.as_deref().context("--range is required")?, a.log)?;
    let models = xs.iter().map(|&x| with_param(&model, param, x)).collect::<anyhow::Result<Vec<_>>>()?;
    let curve = match criterion {
        Criterion::Qng => Some(load_table(a.table.as_deref().context("the qng criterion needs --table")?)?),
        _ => None,
    };
    let kernel = match &curve {
        Some(c) if matches!(c.scheme, CurveScheme::Multiplex | CurveScheme::Genuine) => Some(ClickKernel::new(c.order, c.n_spads)?),
        Some(c) if c.scheme != CurveScheme::Absolute => {
            bail!(Error::IncompatibleScheme("two-mode tables need a coincidence criterion".into()))
        }
        _ => None,
    };
    let rows = xs
        .par_iter()
        .zip(&models)
        .map(|(&x, m)| Ok(std::iter::once(num(x)).chain(row(m, criterion, curve.as_ref(), kernel.as_ref())?).collect()))
        .collect::<anyhow::Result<Vec<Vec<Value>>>>()?;
    let table = Table { columns: columns(criterion, param), rows };
    emit(a.out.as_deref(), &table.render(&Header::new("sweep", None), a.format.unwrap_or_default())?)?;
    Ok(Outcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_hit_their_endpoints() {
        assert_eq!(grid("0:1:3", false).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = grid("1e-3:1e-1:3", true).unwrap();
        assert!((g[1] - 1e-2).abs() < 1e-15 && g[2] == 0.1);
        assert!(grid("0:1", false).is_err() && grid("0:1:2", true).is_err() && grid("0:1:1", false).is_err());
    }

    #[test]
    fn integer_parameters_refuse_fractions() {
        let m = SourceModel::Ensemble { m: 1, eta: 0.5, nbar: 0.0 };
        assert!(matches!(with_param(&m, "M", 3.0).unwrap(), SourceModel::Ensemble { m: 3, .. }));
        assert!(with_param(&m, "M", 2.5).is_err() && with_param(&m, "T", 0.5).is_err() && with_param(&m, "model", 1.0).is_err());
    }
}
