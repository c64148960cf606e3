//! Seeded Monte-Carlo soundness checks: sampled state families against threshold curves.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{modulation_columns, GaussianPure};
use crate::genuine::{CoreState, ModulatedCore};
use crate::qng::{settled_probs, ClickKernel, CurveScheme, ThresholdCurve};

/// Samples drawn from one counter stream.
pub const CHUNK: u64 = 1024;
pub const DEFAULT_TOP_K: usize = 50;
/// Excess above the curve that counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-9;
const TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Family {
    #[serde(rename = "gaussian-1m")]
    Gaussian1m,
    #[serde(rename = "gaussian-product-2m")]
    GaussianProduct2m,
    #[serde(rename = "gaussian-product-3m")]
    GaussianProduct3m,
    /// D(alpha) S(xi) applied to a random superposition of |0> .. |n-1>.
    #[serde(rename = "modulated-core")]
    ModulatedCore { n: usize },
    /// Two-mode core sum C_kl |k>|l> with k + l < n, modulated mode by mode.
    #[serde(rename = "modulated-core-2m")]
    ModulatedCore2m { n: usize },
}

impl Family {
    pub fn label(&self) -> String {
        match self {
            Self::Gaussian1m => "gaussian-1m".into(),
            Self::GaussianProduct2m => "gaussian-product-2m".into(),
            Self::GaussianProduct3m => "gaussian-product-3m".into(),
            Self::ModulatedCore { n } => format!("modulated-core({n})"),
            Self::ModulatedCore2m { n } => format!("modulated-core-2m({n})"),
        }
    }

    fn core_order(&self) -> Option<usize> {
        match self {
            Self::ModulatedCore { n } | Self::ModulatedCore2m { n } => Some(*n),
            _ => None,
        }
    }

    /// Whether every sampled state is covered by the optimization behind `curve`.
    pub fn compatible(&self, curve: &ThresholdCurve) -> bool {
        match curve.scheme {
            CurveScheme::Multiplex => self.core_order().is_none(),
            CurveScheme::Genuine | CurveScheme::Absolute => self.core_order().map_or(true, |n| n <= curve.order),
            CurveScheme::TwoModeSpad | CurveScheme::TwoModePnrd => false,
        }
    }
}

/// Uniform sampling intervals: displacement magnitude, minimal quadrature variance and all phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerRanges {
    pub alpha: [f64; 2],
    pub variance: [f64; 2],
    pub phase: [f64; 2],
}

impl Default for SamplerRanges {
    fn default() -> Self {
        Self { alpha: [0.0, 1.2], variance: [0.05, 1.0], phase: [0.0, 2.0 * std::f64::consts::PI] }
    }
}

impl SamplerRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !(ok(self.alpha) && ok(self.variance) && ok(self.phase)) {
            return Err(Error::InvalidParameter(format!("bad sampling ranges {self:?}")));
        }
        if self.alpha[0] < 0.0 || self.variance[0] <= 0.0 || self.variance[1] > 1.0 {
            return Err(Error::InvalidParameter(format!("sampling ranges outside their domains {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    #[serde(flatten)]
    pub family: Family,
    pub ranges: SamplerRanges,
    pub cycles: u64,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn new(family: Family, cycles: u64, seed: u64) -> Self {
        Self { family, ranges: SamplerRanges::default(), cycles, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(Error::InvalidParameter("cycles must be at least 1".into()));
        }
        if let Some(n) = self.family.core_order() {
            if n == 0 {
                return Err(Error::InvalidParameter("core order must be at least 1".into()));
            }
        }
        self.ranges.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearPoint {
    /// Position of the sample in the seeded sequence.
    pub index: u64,
    pub params: Vec<f64>,
    pub error_prob: f64,
    pub success_prob: f64,
    pub threshold: f64,
    /// (threshold - success) / threshold; negative above the curve.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub family: String,
    pub scheme: CurveScheme,
    pub order: usize,
    pub n_spads: usize,
    pub cycles: u64,
    pub seed: u64,
    pub violations: u64,
    /// Largest success - threshold over all in-domain samples.
    pub max_excess: f64,
    /// Samples whose error probability lies beyond the certified domain.
    pub out_of_domain: u64,
    pub nearest: Vec<NearPoint>,
}

struct Sample {
    params: Vec<f64>,
    probs: Vec<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    r[0] + (r[1] - r[0]) * rng.gen::<f64>()
}

fn draw_gaussian(rng: &mut ChaCha8Rng, ranges: &SamplerRanges, params: &mut Vec<f64>) -> Result<GaussianPure> {
    let a = uniform(rng, ranges.alpha);
    let a_phase = uniform(rng, ranges.phase);
    let v = uniform(rng, ranges.variance);
    let x_phase = uniform(rng, ranges.phase);
    params.extend([a, a_phase, v, x_phase]);
    GaussianPure::new(Complex64::from_polar(a, a_phase), -0.5 * v.ln(), x_phase)
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize, params: &mut Vec<f64>) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = (0..len).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in c.iter_mut() {
        *z /= norm;
        params.extend([z.re, z.im]);
    }
    c
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn product_gaussian(rng: &mut ChaCha8Rng, ranges: &SamplerRanges, modes: usize) -> Result<Sample> {
    let mut params = Vec::with_capacity(4 * modes);
    let mut probs = vec![1.0];
    for _ in 0..modes {
        let g = draw_gaussian(rng, ranges, &mut params)?;
        probs = convolve(&probs, &settled_probs(&g, g.mean_photons())?);
    }
    Ok(Sample { params, probs })
}

fn modulated_core(rng: &mut ChaCha8Rng, ranges: &SamplerRanges, n: usize) -> Result<Sample> {
    let mut params = Vec::with_capacity(4 + 2 * n);
    let g = draw_gaussian(rng, ranges, &mut params)?;
    let coeffs = random_unit(rng, n, &mut params);
    let m = ModulatedCore { core: CoreState { coeffs }, alpha: g.alpha, xi_mag: g.xi_mag, xi_phase: g.xi_phase };
    let probs = settled_probs(&m, m.mean_photons_bound())?;
    Ok(Sample { params, probs })
}

fn modulated_core_2m(rng: &mut ChaCha8Rng, ranges: &SamplerRanges, n: usize) -> Result<Sample> {
    let mut params = Vec::new();
    let g1 = draw_gaussian(rng, ranges, &mut params)?;
    let g2 = draw_gaussian(rng, ranges, &mut params)?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..n - k).map(move |l| (k, l))).collect();
    let coeffs = random_unit(rng, pairs.len(), &mut params);
    let bound = |g: &GaussianPure| {
        let grow = (2.0 * g.xi_mag).exp();
        (g.alpha.norm() + (n as f64 * grow).sqrt()).powi(2)
    };
    let mut cut = [bound(&g1), bound(&g2)].map(|b| (4.0 * b) as usize + 24);
    loop {
        let a1 = modulation_columns(g1.alpha, g1.xi_mag, g1.xi_phase, n - 1, cut[0])?;
        let a2 = modulation_columns(g2.alpha, g2.xi_mag, g2.xi_phase, n - 1, cut[1])?;
        // mixed[k][m2] = sum_l C_kl <m2|D S|l>
        let mut mixed = vec![vec![Complex64::new(0.0, 0.0); cut[1] + 1]; n];
        for (&(k, l), c) in pairs.iter().zip(&coeffs) {
            for (x, a) in mixed[k].iter_mut().zip(&a2[l]) {
                *x += c * a;
            }
        }
        let mut probs = vec![0.0; cut[0] + cut[1] + 1];
        for m1 in 0..=cut[0] {
            for m2 in 0..=cut[1] {
                let amp: Complex64 = (0..n).map(|k| a1[k][m1] * mixed[k][m2]).sum();
                probs[m1 + m2] += amp.norm_sqr();
            }
        }
        let tail = 1.0 - probs.iter().sum::<f64>();
        if tail < TAIL_TOL {
            return Ok(Sample { params, probs });
        }
        if cut.iter().any(|c| *c > 512) {
            return Err(Error::CutoffTooLow { tail, limit: TAIL_TOL });
        }
        cut = cut.map(|c| 2 * c);
    }
}

fn draw(family: Family, ranges: &SamplerRanges, rng: &mut ChaCha8Rng) -> Result<Sample> {
    match family {
        Family::Gaussian1m => product_gaussian(rng, ranges, 1),
        Family::GaussianProduct2m => product_gaussian(rng, ranges, 2),
        Family::GaussianProduct3m => product_gaussian(rng, ranges, 3),
        Family::ModulatedCore { n } => modulated_core(rng, ranges, n),
        Family::ModulatedCore2m { n } => modulated_core_2m(rng, ranges, n),
    }
}

/// Statistic of a sample as compared with one curve.
enum Probe {
    Clicks(ClickKernel),
    Fock(usize),
}

impl Probe {
    fn new(curve: &ThresholdCurve) -> Result<Self> {
        Ok(match curve.scheme {
            CurveScheme::Absolute => Self::Fock(curve.order),
            _ => Self::Clicks(ClickKernel::new(curve.order, curve.n_spads)?),
        })
    }

    /// (success, error).
    fn evaluate(&self, probs: &[f64]) -> Result<(f64, f64)> {
        match self {
            Self::Clicks(k) => k.evaluate(probs),
            Self::Fock(n) => Ok((probs.get(*n).copied().unwrap_or(0.0), 0.0)),
        }
    }
}

#[derive(Default)]
struct Tally {
    violations: u64,
    max_excess: f64,
    out_of_domain: u64,
    nearest: Vec<NearPoint>,
}

impl Tally {
    fn new() -> Self {
        Self { max_excess: f64::NEG_INFINITY, ..Default::default() }
    }

    fn absorb(&mut self, other: Tally, k: usize) {
        self.violations += other.violations;
        self.out_of_domain += other.out_of_domain;
        self.max_excess = self.max_excess.max(other.max_excess);
        self.nearest.extend(other.nearest);
        trim(&mut self.nearest, k);
    }
}

fn trim(points: &mut Vec<NearPoint>, k: usize) {
    points.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
    points.truncate(k);
}

fn run_chunk(spec: &SamplerSpec, curves: &[ThresholdCurve], probes: &[Probe], chunk: u64, k: usize) -> Result<Vec<Tally>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(chunk);
    let start = chunk * CHUNK;
    let end = (start + CHUNK).min(spec.cycles);
    let mut tallies: Vec<Tally> = curves.iter().map(|_| Tally::new()).collect();
    for index in start..end {
        let sample = draw(spec.family, &spec.ranges, &mut rng)?;
        for ((curve, probe), tally) in curves.iter().zip(probes).zip(tallies.iter_mut()) {
            let (success, error) = probe.evaluate(&sample.probs)?;
            if error > curve.domain_limit() {
                tally.out_of_domain += 1;
                continue;
            }
            let threshold = curve.eval(error)?;
            let excess = success - threshold;
            tally.max_excess = tally.max_excess.max(excess);
            if excess > VIOLATION_TOL {
                tally.violations += 1;
            }
            let distance = if threshold > 0.0 { -excess / threshold } else { -excess };
            let worst = tally.nearest.last().map_or(f64::INFINITY, |p| p.distance);
            if tally.nearest.len() < k || distance < worst {
                tally.nearest.push(NearPoint {
                    index,
                    params: sample.params.clone(),
                    error_prob: error,
                    success_prob: success,
                    threshold,
                    distance,
                });
                if tally.nearest.len() > 2 * k {
                    trim(&mut tally.nearest, k);
                }
            }
        }
        for t in tallies.iter_mut() {
            trim(&mut t.nearest, k);
        }
    }
    Ok(tallies)
}

/// Checks one sampled family against several curves, sharing the sampled states.
pub fn run_verification_multi(spec: &SamplerSpec, curves: &[ThresholdCurve], top_k: usize) -> Result<Vec<VerifyReport>> {
    spec.validate()?;
    for c in curves {
        c.validate()?;
        if !spec.family.compatible(c) {
            return Err(Error::IncompatibleScheme(format!(
                "{} samples cannot be checked against a {:?} curve of order {}",
                spec.family.label(),
                c.scheme,
                c.order
            )));
        }
    }
    let probes = curves.iter().map(Probe::new).collect::<Result<Vec<_>>>()?;
    let chunks = spec.cycles.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<Tally>>> = (0..chunks).into_par_iter().map(|c| run_chunk(spec, curves, &probes, c, top_k)).collect();
    let mut totals: Vec<Tally> = curves.iter().map(|_| Tally::new()).collect();
    for part in parts {
        for (total, t) in totals.iter_mut().zip(part?) {
            total.absorb(t, top_k);
        }
    }
    Ok(totals
        .into_iter()
        .zip(curves)
        .map(|(t, c)| VerifyReport {
            family: spec.family.label(),
            scheme: c.scheme,
            order: c.order,
            n_spads: c.n_spads,
            cycles: spec.cycles,
            seed: spec.seed,
            violations: t.violations,
            max_excess: t.max_excess,
            out_of_domain: t.out_of_domain,
            nearest: t.nearest,
        })
        .collect())
}

pub fn run_verification(spec: &SamplerSpec, curve: &ThresholdCurve) -> Result<VerifyReport> {
    let mut r = run_verification_multi(spec, std::slice::from_ref(curve), DEFAULT_TOP_K)?;
    Ok(r.remove(0))
}

/// Signed relative distance of a (success, error) pair below `curve`.
pub fn distance_to_curve(curve: &ThresholdCurve, success: f64, error: f64) -> Result<f64> {
    let threshold = curve.eval(error)?;
    let excess = success - threshold;
    Ok(if threshold > 0.0 { -excess / threshold } else { -excess })
}

/// Nearest points as CSV rows: index, error_prob, success_prob, threshold, distance.
pub fn nearest_csv(report: &VerifyReport) -> String {
    let mut out = String::from("index,error_prob,success_prob,threshold,distance\n");
    for p in &report.nearest {
        out.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", p.index, p.error_prob, p.success_prob, p.threshold, p.distance));
    }
    out
}
