//! Nonclassicality criteria from click statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::click::{ClickProbabilities, Scheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub statistic: f64,
    pub bound: f64,
    /// Positive exactly when the criterion is passed.
    pub margin: f64,
    /// Margin in units of its standard deviation, when error bars are known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
}

impl Verdict {
    /// Criterion of the form statistic < bound.
    pub fn below(statistic: f64, bound: f64) -> Self {
        let margin = bound - statistic;
        Self { passed: margin > 0.0, statistic, bound, margin, sigma: None }
    }

    /// Criterion of the form statistic > bound.
    pub fn above(statistic: f64, bound: f64) -> Self {
        let margin = statistic - bound;
        Self { passed: margin > 0.0, statistic, bound, margin, sigma: None }
    }

    pub fn with_std(mut self, std: f64) -> Self {
        if std > 0.0 {
            self.sigma = Some(self.margin / std);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_verdict: Verdict,
    pub beta_verdict: Verdict,
}

/// alpha = Pc/(Ps1 Ps2) and beta = P00/(P0_1 P0_2); values below 1 certify nonclassicality.
pub fn alpha_beta(p: &ClickProbabilities) -> Result<AlphaBeta> {
    if p.scheme != Scheme::Hbt {
        return Err(Error::IncompatibleScheme(format!("{:?} given, HBT required", p.scheme)));
    }
    let (ps1, ps2, pc) = (p.get("Ps1")?, p.get("Ps2")?, p.get("Pc")?);
    let (p01, p02, p00) = (p.get("P0_1")?, p.get("P0_2")?, p.get("P00")?);
    if !(ps1 > 0.0 && ps2 > 0.0) {
        return Err(Error::InsufficientCounts("no single-detector clicks"));
    }
    if !(p01 > 0.0 && p02 > 0.0) {
        return Err(Error::InsufficientCounts("no empty windows"));
    }
    let alpha = pc / (ps1 * ps2);
    let beta = p00 / (p01 * p02);
    Ok(AlphaBeta { alpha, beta, alpha_verdict: Verdict::below(alpha, 1.0), beta_verdict: Verdict::below(beta, 1.0) })
}

/// Outcome probabilities of one window: (neither, only detector 2, only detector 1, both).
fn outcome_probs(p: &ClickProbabilities) -> Result<[f64; 4]> {
    let (p01, p02, p00, pc) = (p.get("P0_1")?, p.get("P0_2")?, p.get("P00")?, p.get("Pc")?);
    let only2 = (p01 - p00).max(0.0);
    let only1 = (p02 - p00).max(0.0);
    let q = [p00, only2, only1, pc.max(0.0)];
    let s: f64 = q.iter().sum();
    Ok(q.map(|x| x / s))
}

/// Aggregated records of a two-detector measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickCounts {
    pub windows: u64,
    pub click_1: u64,
    pub click_2: u64,
    pub coincidences: u64,
}

impl ClickCounts {
    pub fn validate(&self) -> Result<()> {
        if self.windows == 0 {
            return Err(Error::InsufficientCounts("no windows recorded"));
        }
        if self.coincidences > self.click_1.min(self.click_2) || self.click_1 + self.click_2 - self.coincidences > self.windows {
            return Err(Error::InvalidParameter("inconsistent click counts".into()));
        }
        Ok(())
    }

    fn cells(&self) -> [u64; 4] {
        let only1 = self.click_1 - self.coincidences;
        let only2 = self.click_2 - self.coincidences;
        [self.windows - only1 - only2 - self.coincidences, only2, only1, self.coincidences]
    }

    pub fn probabilities(&self) -> Result<ClickProbabilities> {
        self.validate()?;
        Ok(probabilities_from_cells(self.cells()))
    }
}

fn probabilities_from_cells(c: [u64; 4]) -> ClickProbabilities {
    let n = c.iter().sum::<u64>() as f64;
    let q = c.map(|x| x as f64 / n);
    ClickProbabilities::new(
        Scheme::Hbt,
        &[("P00", q[0]), ("P0_1", q[0] + q[1]), ("P0_2", q[0] + q[2]), ("Ps1", q[2] + q[3]), ("Ps2", q[1] + q[3]), ("Pc", q[3])],
    )
}

/// Delta-method variances of alpha and beta for `n` windows with outcome probabilities `q`.
fn delta_variances(q: [f64; 4], n: f64) -> (Option<f64>, Option<f64>) {
    let var = |g: [f64; 4]| {
        let m: f64 = g.iter().zip(&q).map(|(a, b)| a * b).sum();
        let s: f64 = g.iter().zip(&q).map(|(a, b)| a * a * b).sum();
        (s - m * m) / n
    };
    let (p01, p02) = (q[0] + q[1], q[0] + q[2]);
    let (ps1, ps2) = (q[2] + q[3], q[1] + q[3]);
    let vb = if q[0] > 0.0 {
        let b = q[0] / (p01 * p02);
        Some(var([b * (1.0 / q[0] - 1.0 / p01 - 1.0 / p02), -b / p01, -b / p02, 0.0]))
    } else {
        None
    };
    let va = if q[3] > 0.0 {
        let a = q[3] / (ps1 * ps2);
        Some(var([0.0, -a / ps2, -a / ps1, a * (1.0 / q[3] - 1.0 / ps1 - 1.0 / ps2)]))
    } else {
        None
    };
    (va, vb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBars {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub var_alpha: Option<f64>,
    pub var_beta: Option<f64>,
    /// (1 - beta)/std(beta).
    pub reliability_ratio: Option<f64>,
    pub closed_form_var_alpha: Option<f64>,
    pub closed_form_var_beta: Option<f64>,
    /// Set when coincidences or empty windows were never observed.
    pub unresolved: bool,
}

pub const BOOTSTRAP_REPLICATES: usize = 256;

fn sample_cells(rng: &mut ChaCha8Rng, n: u64, q: [f64; 4]) -> [u64; 4] {
    let mut out = [0u64; 4];
    let mut left = n;
    let mut mass = 1.0;
    for i in 0..3 {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let p = (q[i] / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, p).map(|b| b.sample(rng)).unwrap_or(0);
        out[i] = k;
        left -= k;
        mass -= q[i];
    }
    out[3] = left;
    out
}

fn alpha_beta_of(cells: [u64; 4]) -> (Option<f64>, Option<f64>) {
    let p = probabilities_from_cells(cells);
    let get = |k: &str| p.get(k).unwrap_or(0.0);
    let beta = if get("P0_1") > 0.0 && get("P0_2") > 0.0 { Some(get("P00") / (get("P0_1") * get("P0_2"))) } else { None };
    let alpha = if get("Ps1") > 0.0 && get("Ps2") > 0.0 && cells[3] > 0 { Some(get("Pc") / (get("Ps1") * get("Ps2"))) } else { None };
    (alpha, beta)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Simulates `n_runs` detection windows of the model, then bootstraps the variances of alpha and beta.
pub fn error_bars_mc(model: &ClickProbabilities, n_runs: u64, seed: u64) -> Result<ErrorBars> {
    if n_runs < 10_000 {
        return Err(Error::InvalidParameter(format!("at least 1e4 windows required, got {n_runs}")));
    }
    let q = outcome_probs(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let observed = sample_cells(&mut rng, n_runs, q);
    let (alpha, beta) = alpha_beta_of(observed);
    let n = n_runs as f64;
    let qhat = observed.map(|c| c as f64 / n);
    let reps: Vec<(Option<f64>, Option<f64>)> = (0..BOOTSTRAP_REPLICATES)
        .into_par_iter()
        .map(|b| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(b as u64 + 1);
            alpha_beta_of(sample_cells(&mut r, n_runs, qhat))
        })
        .collect();
    let var_alpha = reps.iter().map(|r| r.0).collect::<Option<Vec<f64>>>().map(|v| sample_variance(&v));
    let var_beta = reps.iter().map(|r| r.1).collect::<Option<Vec<f64>>>().map(|v| sample_variance(&v));
    let (cva, cvb) = delta_variances(qhat, n);
    let unresolved = observed[3] == 0 || observed[0] == 0;
    let reliability_ratio = match (beta, var_beta) {
        (Some(b), Some(v)) if v > 0.0 => Some((1.0 - b) / v.sqrt()),
        _ => None,
    };
    Ok(ErrorBars { alpha, beta, var_alpha, var_beta, reliability_ratio, closed_form_var_alpha: cva, closed_form_var_beta: cvb, unresolved })
}

/// alpha/beta verdicts for measured counts with k-sigma margins from the delta method.
pub fn certify_counts(counts: &ClickCounts) -> Result<AlphaBeta> {
    let p = counts.probabilities()?;
    let mut ab = alpha_beta(&p)?;
    let q = outcome_probs(&p)?;
    let (va, vb) = delta_variances(q, counts.windows as f64);
    if let Some(v) = va {
        ab.alpha_verdict = ab.alpha_verdict.with_std(v.sqrt());
    }
    if let Some(v) = vb {
        ab.beta_verdict = ab.beta_verdict.with_std(v.sqrt());
    }
    Ok(ab)
}

/// Binomial Fano factor of the click-number histogram over c = 0..=N (counts or probabilities).
pub fn binomial_fano(histogram: &[f64], n_spads: usize) -> Result<Verdict> {
    if histogram.len() != n_spads + 1 {
        return Err(Error::InvalidParameter(format!("histogram needs {} bins", n_spads + 1)));
    }
    let total: f64 = histogram.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Undefined("empty click histogram"));
    }
    let m1: f64 = histogram.iter().enumerate().map(|(c, w)| c as f64 * w).sum::<f64>() / total;
    let m2: f64 = histogram.iter().enumerate().map(|(c, w)| (c * c) as f64 * w).sum::<f64>() / total;
    let nf = n_spads as f64;
    if m1 <= 0.0 || m1 >= nf {
        return Err(Error::Undefined("binomial Fano factor with mean click number 0 or N"));
    }
    let fb = nf * (m2 - m1 * m1).max(0.0) / (m1 * (nf - m1));
    Ok(Verdict::below(fb, 1.0))
}

/// Klyshko-type ratio (n+1) p_{n-1} p_{n+1} / (n p_n^2); values below 1 certify nonclassicality.
pub fn klyshko(p_nm1: f64, p_n: f64, p_np1: f64, n: usize) -> Result<Verdict> {
    if n == 0 {
        return Err(Error::InvalidParameter("Klyshko ratio needs n >= 1".into()));
    }
    if !(p_n > 0.0) {
        return Err(Error::Undefined("Klyshko ratio with p_n = 0"));
    }
    let stat = (n + 1) as f64 * p_nm1 * p_np1 / (n as f64 * p_n * p_n);
    Ok(Verdict::below(stat, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::click::{click_histogram, hbt_probabilities, SplittingNetwork};
    use crate::gauss::FockDistribution;
    use crate::sources::EmitterEnsemble;

    #[test]
    fn coherent_is_at_the_boundary() {
        let p = hbt_probabilities(&FockDistribution::poisson(0.3, 60), 0.4, 0.7).unwrap();
        let ab = alpha_beta(&p).unwrap();
        assert!((ab.alpha - 1.0).abs() < 1e-12 && (ab.beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_photon_has_no_coincidences() {
        let p = hbt_probabilities(&FockDistribution::fock(1, 4).unwrap(), 0.3, 0.6).unwrap();
        let ab = alpha_beta(&p).unwrap();
        assert!(ab.alpha.abs() < 1e-16 && ab.alpha_verdict.passed);
    }

    #[test]
    fn ensemble_beta_matches_closed_form() {
        let e = EmitterEnsemble::new(2, 0.1, 0.0).unwrap();
        let p = hbt_probabilities(&e.distribution(10).unwrap(), 0.5, 1.0).unwrap();
        let ab = alpha_beta(&p).unwrap();
        let (p0, p00) = e.hbt_noclick();
        assert!((ab.beta - p00 / (p0 * p0)).abs() < 1e-12);
        assert!(ab.alpha < 1.0 && ab.beta < 1.0);
    }

    #[test]
    fn klyshko_examples() {
        assert_eq!(klyshko(0.0, 1.0, 0.0, 3).unwrap().statistic, 0.0);
        let p = FockDistribution::poisson(1.7, 60);
        for n in 1..6 {
            let v = klyshko(p.probs[n - 1], p.probs[n], p.probs[n + 1], n).unwrap();
            assert!((v.statistic - 1.0).abs() < 1e-12);
        }
        let t = FockDistribution::thermal(1.0, 60);
        let v = klyshko(t.probs[0], t.probs[1], t.probs[2], 1).unwrap();
        assert!((v.statistic - 2.0).abs() < 1e-12 && !v.passed);
        assert!(klyshko(0.1, 0.0, 0.1, 1).is_err());
    }

    #[test]
    fn binomial_fano_examples() {
        let mut h = vec![0.0; 5];
        h[2] = 10.0;
        let v = binomial_fano(&h, 4).unwrap();
        assert_eq!(v.statistic, 0.0);
        assert!(v.passed);
        let net = SplittingNetwork::balanced(4).unwrap();
        let fock = click_histogram(&FockDistribution::fock(4, 6).unwrap(), &net).unwrap();
        assert!(binomial_fano(&fock, 4).unwrap().statistic < 1.0);
        let coh = click_histogram(&FockDistribution::poisson(2.0, 80), &net).unwrap();
        assert!((binomial_fano(&coh, 4).unwrap().statistic - 1.0).abs() < 1e-12);
        let mut all = vec![0.0; 5];
        all[4] = 3.0;
        assert!(binomial_fano(&all, 4).is_err());
    }

    #[test]
    fn vacuum_error_bars_are_unresolved() {
        let p = hbt_probabilities(&FockDistribution::vacuum(3), 0.5, 1.0).unwrap();
        let e = error_bars_mc(&p, 10_000, 1).unwrap();
        assert!(e.unresolved);
        assert_eq!(e.var_beta, Some(0.0));
        assert!(e.reliability_ratio.is_none());
    }

    #[test]
    fn coherent_beta_within_three_sigma() {
        let p = hbt_probabilities(&FockDistribution::poisson(0.1, 40), 0.5, 1.0).unwrap();
        let e = error_bars_mc(&p, 1_000_000, 7).unwrap();
        let b = e.beta.unwrap();
        assert!((b - 1.0).abs() < 3.0 * e.var_beta.unwrap().sqrt());
    }

    #[test]
    fn error_bars_are_seed_deterministic() {
        let p = hbt_probabilities(&FockDistribution::poisson(0.05, 40), 0.5, 1.0).unwrap();
        assert_eq!(error_bars_mc(&p, 50_000, 3).unwrap(), error_bars_mc(&p, 50_000, 3).unwrap());
    }

    #[test]
    fn counts_certification() {
        let c = ClickCounts { windows: 1_000_000, click_1: 5000, click_2: 5100, coincidences: 2 };
        let ab = certify_counts(&c).unwrap();
        assert!(ab.alpha_verdict.passed && ab.alpha_verdict.sigma.unwrap() > 3.0);
        let bad = ClickCounts { windows: 10, click_1: 5, click_2: 2, coincidences: 3 };
        assert!(certify_counts(&bad).is_err());
    }
}
