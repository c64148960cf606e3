//! Quantum non-Gaussianity thresholds for multiplexed click detection and two-mode coincidences.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::click::{ClickProbabilities, Scheme};
use crate::error::{check_nonneg, Error, Result};
use crate::gauss::{GaussianPure, PureFockState};
use crate::nc::Verdict;
use crate::numeric::{bisect_predicate, find_root, hermite, hermite_largest_root, logspace, nelder_mead};
use crate::sources::{cascade_probabilities, reduced_signal_state, CascadeOptions, CascadeSource, EmitterEnsemble, PairDetection};

/// Version tag of the conventions behind stored threshold tables.
pub const CONVENTION_VERSION: u32 = 1;

/// Largest photon number carried by click kernels.
pub const KERNEL_CUTOFF: usize = 1536;

const SETTLE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveScheme {
    Multiplex,
    Genuine,
    Absolute,
    TwoModeSpad,
    TwoModePnrd,
}

/// Upper boundary of the success probability reachable by the free states at a given error probability.
///
/// Between tabulated points the boundary is the lower envelope of the tangent lines `slopes`,
/// which never undercuts the exact boundary when the points are exact optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub scheme: CurveScheme,
    #[serde(rename = "n")]
    pub order: usize,
    #[serde(rename = "N")]
    pub n_spads: usize,
    pub convention_version: u32,
    /// (error probability, success probability) pairs.
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slopes: Vec<f64>,
}

impl ThresholdCurve {
    pub fn absolute(order: usize, level: f64) -> Self {
        Self {
            scheme: CurveScheme::Absolute,
            order,
            n_spads: 0,
            convention_version: CONVENTION_VERSION,
            points: vec![[0.0, level]],
            slopes: vec![0.0],
        }
    }

    /// Two-mode coincidence boundary tabulated from its closed form.
    pub fn two_mode(detection: PairDetection, points: usize) -> Self {
        let scheme = match detection {
            PairDetection::Spad => CurveScheme::TwoModeSpad,
            PairDetection::Pnrd => CurveScheme::TwoModePnrd,
        };
        let pts = logspace(1e-10, 0.25, points.max(2)).into_iter().map(|e| [e, coincidence_bound(detection, e)]).collect();
        Self { scheme, order: 1, n_spads: 0, convention_version: CONVENTION_VERSION, points: pts, slopes: Vec::new() }
    }

    /// Largest error probability the curve certifies.
    pub fn domain_limit(&self) -> f64 {
        match self.scheme {
            CurveScheme::Absolute => f64::INFINITY,
            CurveScheme::TwoModeSpad | CurveScheme::TwoModePnrd => 1.0,
            _ => self.points.last().map_or(0.0, |p| p[0]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.convention_version != CONVENTION_VERSION {
            return Err(Error::IncompatibleScheme(format!(
                "table convention {} differs from {}",
                self.convention_version, CONVENTION_VERSION
            )));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidParameter("threshold table has no points".into()));
        }
        if self.points.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter("threshold table has invalid entries".into()));
        }
        for w in self.points.windows(2) {
            if !(w[1][0] > w[0][0] && w[1][1] > w[0][1]) {
                return Err(Error::InvalidParameter("threshold table is not strictly increasing".into()));
            }
        }
        if matches!(self.scheme, CurveScheme::Multiplex | CurveScheme::Genuine) && self.slopes.len() != self.points.len() {
            return Err(Error::InvalidParameter("threshold table needs one slope per point".into()));
        }
        Ok(())
    }

    fn tangent(&self, i: usize, e: f64) -> f64 {
        let [ei, si] = self.points[i];
        si + self.slopes[i] * (e - ei)
    }

    /// Threshold success probability at error probability `e`.
    pub fn eval(&self, e: f64) -> Result<f64> {
        if !(e >= 0.0) {
            return Err(Error::InvalidParameter(format!("error probability {e} is negative")));
        }
        match self.scheme {
            CurveScheme::Absolute => Ok(self.points[0][1]),
            CurveScheme::TwoModeSpad => Ok(coincidence_bound(PairDetection::Spad, e)),
            CurveScheme::TwoModePnrd => Ok(coincidence_bound(PairDetection::Pnrd, e)),
            CurveScheme::Multiplex | CurveScheme::Genuine => {
                let limit = self.domain_limit();
                if e > limit * (1.0 + 1e-12) {
                    return Err(Error::OutOfDomain { error: e, limit });
                }
                let idx = self.points.partition_point(|p| p[0] <= e);
                let lo = idx.saturating_sub(3);
                let hi = (idx + 3).min(self.points.len());
                Ok((lo..hi).map(|i| self.tangent(i, e)).fold(f64::INFINITY, f64::min))
            }
        }
    }

    /// sup over the certified domain of curve(e) - a e.
    pub fn support(&self, a: f64) -> Result<f64> {
        match self.scheme {
            CurveScheme::Absolute => Ok(self.points[0][1]),
            CurveScheme::Multiplex | CurveScheme::Genuine => Ok(support_over(&self.corners()?, a)),
            _ => Err(Error::IncompatibleScheme(format!("{:?} has no linear-functional form", self.scheme))),
        }
    }

    /// Points of the piecewise-linear evaluated curve where its slope can change.
    fn corners(&self) -> Result<Vec<[f64; 2]>> {
        let limit = self.domain_limit();
        let mut cand = vec![0.0, limit];
        for (i, p) in self.points.iter().enumerate() {
            cand.push(p[0]);
            if i + 1 < self.points.len() {
                let (l0, l1) = (self.slopes[i], self.slopes[i + 1]);
                if l0 != l1 {
                    let q = self.points[i + 1];
                    let x = (q[1] - l1 * q[0] - p[1] + l0 * p[0]) / (l0 - l1);
                    if x.is_finite() {
                        cand.push(x.clamp(0.0, limit));
                    }
                }
            }
        }
        cand.into_iter().map(|e| Ok([e, self.eval(e)?])).collect()
    }

    /// Local slope of the threshold.
    pub fn slope_at(&self, e: f64) -> Result<f64> {
        match self.scheme {
            CurveScheme::Absolute => Ok(0.0),
            CurveScheme::Multiplex | CurveScheme::Genuine => {
                let idx = self.points.partition_point(|p| p[0] <= e);
                let lo = idx.saturating_sub(3);
                let hi = (idx + 3).min(self.points.len());
                let best = (lo..hi).min_by(|&i, &j| self.tangent(i, e).total_cmp(&self.tangent(j, e))).unwrap_or(0);
                Ok(self.slopes[best])
            }
            _ => {
                let h = 1e-6 * e.max(1e-12);
                Ok((self.eval(e + h)? - self.eval((e - h).max(0.0))?) / (e + h - (e - h).max(0.0)))
            }
        }
    }
}

/// Click probabilities of `order` and `order + 1` designated detectors of an ideal balanced network,
/// tabulated per photon number.
#[derive(Debug, Clone)]
pub struct ClickKernel {
    pub order: usize,
    pub n_spads: usize,
    success: Vec<f64>,
    error: Vec<f64>,
}

fn designated_table(k: usize, n_total: usize, len: usize) -> Vec<f64> {
    let nf = n_total as f64;
    let mut occ = vec![0.0; k + 1];
    occ[0] = 1.0;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(occ[k]);
        for c in (0..=k).rev() {
            let mut v = occ[c] * (c + n_total - k) as f64 / nf;
            if c > 0 {
                v += occ[c - 1] * (k - c + 1) as f64 / nf;
            }
            occ[c] = v;
        }
    }
    out
}

impl ClickKernel {
    pub fn new(order: usize, n_spads: usize) -> Result<Self> {
        if order == 0 || order >= n_spads {
            return Err(Error::InvalidParameter(format!("need 1 <= n < N, got n={order}, N={n_spads}")));
        }
        Ok(Self {
            order,
            n_spads,
            success: designated_table(order, n_spads, KERNEL_CUTOFF + 1),
            error: designated_table(order + 1, n_spads, KERNEL_CUTOFF + 1),
        })
    }

    /// (P_n, P_n+1) of a photon-number distribution.
    pub fn evaluate(&self, probs: &[f64]) -> Result<(f64, f64)> {
        if probs.len() > KERNEL_CUTOFF + 1 {
            let tail: f64 = probs[KERNEL_CUTOFF + 1..].iter().sum();
            if tail > SETTLE_TOL {
                return Err(Error::CutoffExceeded { requested: probs.len() - 1, limit: KERNEL_CUTOFF });
            }
        }
        let s = probs.iter().zip(&self.success).map(|(p, q)| p * q).sum();
        let e = probs.iter().zip(&self.error).map(|(p, q)| p * q).sum();
        Ok((s, e))
    }
}

/// Photon-number distribution of a pure state with the cutoff grown until the tail is negligible.
pub fn settled_probs<S: PureFockState>(state: &S, mean_photons: f64) -> Result<Vec<f64>> {
    let mut cutoff = ((4.0 * mean_photons + 24.0) as usize).min(KERNEL_CUTOFF);
    loop {
        let probs: Vec<f64> = state.amplitudes(cutoff)?.iter().map(|c| c.norm_sqr()).collect();
        let tail = 1.0 - probs.iter().sum::<f64>();
        if tail < SETTLE_TOL {
            return Ok(probs);
        }
        if cutoff >= KERNEL_CUTOFF {
            return Err(Error::CutoffTooLow { tail, limit: SETTLE_TOL });
        }
        cutoff = (cutoff * 2).min(KERNEL_CUTOFF);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of squeezing values.
    pub points: usize,
    /// Smallest and largest 1 - V.
    pub t_min: f64,
    pub t_max: f64,
    /// Scan points per squeezing value when bracketing stationary displacements.
    pub scan: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 240, t_min: 1e-8, t_max: 0.95, scan: 40 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 4 || self.scan < 4 || !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max < 1.0) {
            return Err(Error::InvalidParameter(format!("bad grid {self:?}")));
        }
        Ok(())
    }
}

/// One stationary point of the success/error trade-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub error: f64,
    pub success: f64,
    pub slope: f64,
}

const FD_STEP: f64 = 1e-3;

/// Central Richardson derivatives of both probabilities along one coordinate.
pub(crate) fn pair_derivative<F>(f: &F, x: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let h = FD_STEP;
    let (a1, b1) = f(x + h)?;
    let (a2, b2) = f(x - h)?;
    let (a3, b3) = f(x + h / 2.0)?;
    let (a4, b4) = f(x - h / 2.0)?;
    let da = (4.0 * (a3 - a4) / h - (a1 - a2) / (2.0 * h)) / 3.0;
    let db = (4.0 * (b3 - b4) / h - (b1 - b2) / (2.0 * h)) / 3.0;
    Ok((da, db))
}

/// Finds every sign change of `jac` on the scan grid and refines it into a candidate.
pub(crate) fn stationary_candidates<J, P>(grid: &[f64], jac: J, point: P) -> (Vec<Candidate>, bool)
where
    J: Fn(f64) -> Result<f64>,
    P: Fn(f64) -> Result<Candidate>,
{
    let vals: Vec<Option<f64>> = grid.iter().map(|&u| jac(u).ok().filter(|v| v.is_finite())).collect();
    let mut out = Vec::new();
    let mut failed = false;
    for k in 0..grid.len() - 1 {
        let (Some(a), Some(b)) = (vals[k], vals[k + 1]) else { continue };
        if a == 0.0 || a.signum() == b.signum() {
            continue;
        }
        let root = find_root(|u| jac(u).unwrap_or(f64::NAN), grid[k], grid[k + 1], 1e-12, 0.0);
        match root.map(&point) {
            Some(Ok(c)) if c.error.is_finite() && c.success.is_finite() => out.push(c),
            _ => failed = true,
        }
    }
    (out, failed)
}

/// Upper concave envelope of the candidates anchored at the origin, cut at its maximum.
pub(crate) fn envelope(mut cands: Vec<Candidate>) -> (Vec<[f64; 2]>, Vec<f64>) {
    cands.retain(|c| c.error > 0.0 && c.success > 0.0);
    cands.sort_by(|a, b| a.error.total_cmp(&b.error).then(b.success.total_cmp(&a.success)));
    cands.dedup_by(|b, a| b.error == a.error);
    let mut hull: Vec<Candidate> = vec![Candidate { error: 0.0, success: 0.0, slope: f64::INFINITY }];
    for c in cands {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.error - a.error) * (c.success - a.success) - (b.success - a.success) * (c.error - a.error);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(c);
    }
    let peak = hull.iter().enumerate().fold(0, |best, (i, c)| if c.success > hull[best].success { i } else { best });
    let at_peak = peak + 1 < hull.len();
    hull.truncate(peak + 1);
    let mut points = Vec::with_capacity(hull.len());
    let mut slopes = Vec::with_capacity(hull.len());
    for i in 1..hull.len() {
        let (a, b) = (hull[i - 1], hull[i]);
        let left = (b.success - a.success) / (b.error - a.error);
        let right = if i + 1 < hull.len() {
            let c = hull[i + 1];
            (c.success - b.success) / (c.error - b.error)
        } else if at_peak {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        let s = if b.slope.is_finite() { b.slope } else { left };
        points.push([b.error, b.success]);
        slopes.push(s.min(left).max(right).max(0.0));
    }
    (points, slopes)
}

fn multiplex_probs(kernel: &ClickKernel, u: f64, w: f64, amplitude: bool) -> Result<(f64, f64)> {
    let g = GaussianPure::from_variance(u.exp(), 1.0 - w.exp(), amplitude)?;
    kernel.evaluate(&settled_probs(&g, g.mean_photons())?)
}

fn multiplex_candidates(kernel: &ClickKernel, w: f64, scan: usize) -> (Vec<Candidate>, bool) {
    let t = w.exp();
    let lo = (0.01 * t.sqrt()).ln();
    let hi = (4.0 * t.sqrt() + 1.0).min(4.0).ln();
    let grid: Vec<f64> = (0..scan).map(|i| lo + (hi - lo) * i as f64 / (scan - 1) as f64).collect();
    let mut all = Vec::new();
    let mut any_failed = false;
    for amplitude in [true, false] {
        let jac = |u: f64| -> Result<f64> {
            let (dsu, deu) = pair_derivative(&|x| multiplex_probs(kernel, x, w, amplitude), u)?;
            let (dsw, dew) = pair_derivative(&|x| multiplex_probs(kernel, u, x, amplitude), w)?;
            Ok(dsu * dew - deu * dsw)
        };
        let point = |u: f64| -> Result<Candidate> {
            let (s, e) = multiplex_probs(kernel, u, w, amplitude)?;
            let (dsu, deu) = pair_derivative(&|x| multiplex_probs(kernel, x, w, amplitude), u)?;
            Ok(Candidate { error: e, success: s, slope: dsu / deu })
        };
        let (c, failed) = stationary_candidates(&grid, jac, point);
        any_failed |= failed;
        all.extend(c);
    }
    let failed = any_failed && all.is_empty();
    (all, failed)
}

/// Slopes at which the envelope is also resolved by direct maximization of success - slope * error.
pub(crate) fn dual_slopes() -> Vec<f64> {
    logspace(0.02, 50.0, 48)
}

/// Support points of the achievable region for each slope: the best point of a coarse parameter
/// cloud is refined by Nelder-Mead on success - slope * error.
pub(crate) fn dual_support<F>(eval: F, axes: &[Vec<f64>], slopes: &[f64]) -> Vec<Candidate>
where
    F: Fn(&[f64]) -> Result<(f64, f64)> + Sync,
{
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        grid = grid.into_iter().flat_map(|g| axis.iter().map(move |x| [g.as_slice(), &[*x]].concat())).collect();
    }
    let cloud: Vec<(Vec<f64>, f64, f64)> = grid
        .into_par_iter()
        .filter_map(|x| {
            let (s, e) = eval(&x).ok()?;
            Some((x, s, e))
        })
        .collect();
    slopes
        .par_iter()
        .filter_map(|&a| {
            let start = cloud.iter().max_by(|p, q| (p.1 - a * p.2).total_cmp(&(q.1 - a * q.2)))?;
            let objective = |x: &[f64]| eval(x).map_or(f64::INFINITY, |(s, e)| -(s - a * e));
            let (x1, _) = nelder_mead(objective, &start.0, 0.05, 1e-14, 4000);
            let (x2, _) = nelder_mead(objective, &x1, 0.01, 1e-15, 4000);
            let (s, e) = eval(&x2).ok()?;
            (s - a * e >= start.1 - a * start.2).then_some(Candidate { error: e, success: s, slope: a })
        })
        .collect()
}

/// Builds a curve from per-grid-point candidate sets, applying the dropped-point policy.
pub(crate) fn assemble_curve(
    scheme: CurveScheme,
    order: usize,
    n_spads: usize,
    per_point: Vec<(Vec<Candidate>, bool)>,
    extra: Vec<Candidate>,
) -> Result<ThresholdCurve> {
    let total = per_point.len();
    let dropped = per_point.iter().filter(|(c, failed)| c.is_empty() || *failed).count();
    if dropped > 0 {
        log::warn!("{dropped} of {total} grid points dropped while building the {scheme:?} curve n={order} N={n_spads}");
    }
    if dropped * 10 > total {
        return Err(Error::CurveUnresolved { dropped, total });
    }
    let mut cands: Vec<Candidate> = per_point.into_iter().flat_map(|(c, _)| c).collect();
    cands.extend(extra);
    let (points, slopes) = envelope(cands);
    let curve = ThresholdCurve { scheme, order, n_spads, convention_version: CONVENTION_VERSION, points, slopes };
    curve.validate()?;
    Ok(curve)
}

/// Multiplex QNG threshold of order `n` for `n_spads` detectors, optimized over pure Gaussian states.
pub fn qng_threshold_numeric(n: usize, n_spads: usize, grid: &GridSpec) -> Result<ThresholdCurve> {
    grid.validate()?;
    let kernel = ClickKernel::new(n, n_spads)?;
    let ws: Vec<f64> = logspace(grid.t_min, grid.t_max, grid.points).into_iter().map(f64::ln).collect();
    let per_point: Vec<(Vec<Candidate>, bool)> = ws.par_iter().map(|&w| multiplex_candidates(&kernel, w, grid.scan)).collect();
    // coherent states complete the candidate set
    let extra: Vec<Candidate> = logspace(1e-3, 3.0, 200)
        .into_iter()
        .filter_map(|a| {
            let f = |x: f64| kernel.evaluate(&settled_probs(&GaussianPure::from_variance(x, 1.0, true)?, x * x)?);
            let (s, e) = f(a).ok()?;
            let h = 1e-4 * a;
            let (s1, e1) = f(a + h).ok()?;
            let (s0, e0) = f(a - h).ok()?;
            Some(Candidate { error: e, success: s, slope: (s1 - s0) / (e1 - e0) })
        })
        .collect();
    let mut extra = extra;
    let eval = |x: &[f64]| -> Result<(f64, f64)> {
        if x[1].abs() > 3.0 {
            return Err(Error::InvalidParameter("squeezing outside the search box".into()));
        }
        let phase = if x[1] >= 0.0 { 0.0 } else { std::f64::consts::PI };
        let g = GaussianPure::new(Complex64::new(x[0], 0.0), x[1].abs(), phase)?;
        kernel.evaluate(&settled_probs(&g, g.mean_photons())?)
    };
    let axes = [linspace(0.0, 3.0, 31), linspace(-1.6, 1.6, 33)];
    extra.extend(dual_support(eval, &axes, &dual_slopes()));
    assemble_curve(CurveScheme::Multiplex, n, n_spads, per_point, extra)
}

/// Pure Gaussian states at squeezing 1 - V = `t` that are stationary for the order-`n` trade-off,
/// with their (success, error) probabilities.
pub fn multiplex_witnesses(n: usize, n_spads: usize, t: f64, scan: usize) -> Result<Vec<(GaussianPure, f64, f64)>> {
    if !(t > 0.0 && t < 1.0) || scan < 4 {
        return Err(Error::InvalidParameter(format!("t={t}, scan={scan}")));
    }
    let kernel = ClickKernel::new(n, n_spads)?;
    let w = t.ln();
    let lo = (0.01 * t.sqrt()).ln();
    let hi = (4.0 * t.sqrt() + 1.0).min(4.0).ln();
    let grid: Vec<f64> = (0..scan).map(|i| lo + (hi - lo) * i as f64 / (scan - 1) as f64).collect();
    let mut out = Vec::new();
    for amplitude in [true, false] {
        let roots = std::cell::RefCell::new(Vec::new());
        let jac = |u: f64| -> Result<f64> {
            let (dsu, deu) = pair_derivative(&|x| multiplex_probs(&kernel, x, w, amplitude), u)?;
            let (dsw, dew) = pair_derivative(&|x| multiplex_probs(&kernel, u, x, amplitude), w)?;
            Ok(dsu * dew - deu * dsw)
        };
        let point = |u: f64| -> Result<Candidate> {
            let (s, e) = multiplex_probs(&kernel, u, w, amplitude)?;
            roots.borrow_mut().push(u);
            Ok(Candidate { error: e, success: s, slope: f64::NAN })
        };
        let (cands, _) = stationary_candidates(&grid, jac, point);
        for (u, c) in roots.into_inner().into_iter().zip(cands) {
            out.push((GaussianPure::from_variance(u.exp(), 1.0 - t, amplitude)?, c.success, c.error));
        }
    }
    Ok(out)
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Largest root of H_{n+1}.
pub fn approx_root(n: usize) -> f64 {
    hermite_largest_root(n + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxPoint {
    pub success: f64,
    pub error: f64,
    /// The expansion is trusted for error probabilities below 1e-4.
    pub within_validity: bool,
}

pub const APPROX_VALIDITY: f64 = 1e-4;

/// Weak-state expansion of the order-`n` multiplex threshold with curve parameter `t`.
pub fn qng_threshold_approx(n: usize, t: f64) -> Result<ApproxPoint> {
    if n == 0 || !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("need n >= 1 and t > 0, got n={n}, t={t}")));
    }
    let x = approx_root(n);
    let nf = n as f64;
    let h2 = hermite(n, x).powi(2);
    let lead = h2 / (1.0 + nf).powi(n as i32);
    let success = t.powi(n as i32) * lead / 2f64.powi(1 + 2 * n as i32) * (2.0 + nf * t);
    let bracket = x * t + 24.0 * (1.0 + nf).powi(2) * t + 3.0 * (1.0 + nf) * (16.0 - x * t + 8.0 * t);
    let error = t.powi(n as i32 + 2) * lead / (3.0 * 2f64.powi(7 + 2 * n as i32)) * bracket;
    Ok(ApproxPoint { success, error, within_validity: error < APPROX_VALIDITY })
}

/// Coarse closed-form bound on the success probability. It sits below the exact threshold,
/// so passing it does not certify anything on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseBound {
    pub bound: f64,
    pub may_false_positive: bool,
}

pub fn qng_coarse_bound(n: usize, error: f64) -> Result<CoarseBound> {
    if n == 0 {
        return Err(Error::InvalidParameter("order must be at least 1".into()));
    }
    check_nonneg("error probability", error)?;
    let x = approx_root(n);
    let nf = n as f64;
    let rhs = hermite(n, x).powi(4) * (error / (2.0 * (nf + 1.0).powi(3))).powi(n as i32);
    log::warn!("coarse QNG bound lies below the exact threshold and can give false positives");
    Ok(CoarseBound { bound: rhs.powf(1.0 / (nf + 2.0)), may_false_positive: true })
}

/// Weak-light single-photon condition P1^3 > (3/2) P_{2+} in terms of true photon numbers.
pub fn weak_single_photon_condition(p1: f64, p2plus: f64) -> Verdict {
    Verdict::above(p1.powi(3), 1.5 * p2plus)
}

pub fn qng_verdict(p_n: f64, p_np1: f64, curve: &ThresholdCurve) -> Result<Verdict> {
    for (name, p) in [("P_n", p_n), ("P_n+1", p_np1)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("{name}={p} outside [0,1]")));
        }
    }
    Ok(Verdict::above(p_n, curve.eval(p_np1)?))
}

/// The same decision as [`qng_verdict`] expressed through linear functionals P_n - a P_n+1.
pub fn qng_verdict_functional(p_n: f64, p_np1: f64, curve: &ThresholdCurve) -> Result<bool> {
    let limit = curve.domain_limit();
    if p_np1 > limit * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain { error: p_np1, limit });
    }
    let mut weights = curve.slopes.clone();
    weights.push(0.0);
    if curve.scheme == CurveScheme::Absolute {
        return Ok(p_n > curve.support(0.0)?);
    }
    let corners = curve.corners()?;
    Ok(weights.into_iter().any(|a| p_n - a * p_np1 > support_over(&corners, a)))
}

fn support_over(corners: &[[f64; 2]], a: f64) -> f64 {
    corners.iter().map(|c| c[1] - a * c[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Verdict from detection counts with a binomial standard deviation of the margin.
pub fn qng_verdict_counts(success: u64, error: u64, windows: u64, curve: &ThresholdCurve) -> Result<Verdict> {
    if windows == 0 {
        return Err(Error::InsufficientCounts("no windows recorded"));
    }
    if error > success || success > windows {
        return Err(Error::InvalidParameter("error events must be a subset of success events".into()));
    }
    let w = windows as f64;
    let (ps, pe) = (success as f64 / w, error as f64 / w);
    let v = qng_verdict(ps, pe, curve)?;
    let lam = curve.slope_at(pe)?;
    let var = (ps * (1.0 - ps) + lam * lam * pe * (1.0 - pe) - 2.0 * lam * (pe - ps * pe)) / w;
    Ok(v.with_std(var.max(0.0).sqrt()))
}

/// Gaussian mixtures satisfy W(0,0) >= exp(-2<n>(1+<n>))/(2 pi).
pub fn wigner_origin_qng(w00: f64, mean_n: f64) -> Result<Verdict> {
    check_nonneg("mean photon number", mean_n)?;
    let bound = (-2.0 * mean_n * (1.0 + mean_n)).exp() / (2.0 * std::f64::consts::PI);
    Ok(Verdict::below(w00, bound))
}

fn coincidence_terms(p: &ClickProbabilities) -> Result<(f64, f64, f64)> {
    if !matches!(p.scheme, Scheme::TwoModeSpad | Scheme::TwoModePnrd) {
        return Err(Error::IncompatibleScheme(format!("{:?} given, two-mode scheme required", p.scheme)));
    }
    Ok((p.get("Ps")?, p.get("Pe1")?, p.get("Pe2")?))
}

/// Cauchy-Schwarz Ps^2 > Pe1 Pe2 and linear 2 Ps/(Pe1 + Pe2) > 1 nonclassicality tests.
/// With no error events and Ps > 0 the linear test passes by convention.
pub fn coincidence_nonclassical(p: &ClickProbabilities) -> Result<(Verdict, Verdict)> {
    let (ps, pe1, pe2) = coincidence_terms(p)?;
    let cs = Verdict::above(ps * ps, pe1 * pe2);
    let sum = pe1 + pe2;
    let linear = if sum == 0.0 {
        if ps > 0.0 {
            Verdict { passed: true, statistic: f64::INFINITY, bound: 1.0, margin: f64::INFINITY, sigma: None }
        } else {
            Verdict::above(0.0, 1.0)
        }
    } else {
        Verdict::above(2.0 * ps / sum, 1.0)
    };
    Ok((cs, linear))
}

/// Largest coincidence probability of Gaussian mixtures at mean error probability `pe`.
pub fn coincidence_bound(detection: PairDetection, pe: f64) -> f64 {
    match detection {
        PairDetection::Spad => 0.5 * (pe / (8.0 + pe)).sqrt() * (2.0 + pe + (pe * (8.0 + pe)).sqrt()),
        PairDetection::Pnrd => pe.sqrt() - pe,
    }
}

pub fn coincidence_qng(p: &ClickProbabilities) -> Result<Verdict> {
    let (ps, pe1, pe2) = coincidence_terms(p)?;
    let detection = if p.scheme == Scheme::TwoModeSpad { PairDetection::Spad } else { PairDetection::Pnrd };
    Ok(Verdict::above(ps, coincidence_bound(detection, 0.5 * (pe1 + pe2))))
}

/// Critical model parameter and the closed-form estimate it is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub value: f64,
    pub approx: f64,
}

const SEARCH_FLOOR: f64 = 1e-9;

/// Smallest parameter in [SEARCH_FLOOR, 1] for which `passes` holds, assuming monotonicity.
pub(crate) fn crossing<F: Fn(f64) -> Result<bool>>(passes: F) -> Result<f64> {
    if !passes(1.0)? {
        return Err(Error::NoCrossing("never passes"));
    }
    if passes(SEARCH_FLOOR)? {
        return Err(Error::NoCrossing("always passes"));
    }
    let mut err = None;
    let x = bisect_predicate(
        |x| match passes(x) {
            Ok(p) => !p,
            Err(e) => {
                err.get_or_insert(e);
                true
            }
        },
        SEARCH_FLOOR,
        1.0,
        1e-9,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(x),
    }
}

/// Printed weak-noise estimate of the minimal ensemble efficiency.
pub fn ensemble_min_eta_approx(m: usize, nbar: f64) -> f64 {
    let mf = m as f64;
    let x = approx_root(m);
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    hermite(m, x).abs().powf(2.0 / mf) / fact.powf(1.0 / mf) * (mf * nbar / (2.0 * (mf + 1.0))).sqrt()
}

/// Minimal efficiency of an M-emitter ensemble with Poissonian noise passing the order-M multiplex
/// criterion with M + 1 detectors (`curve` must be that curve).
pub fn ensemble_min_eta(m: usize, nbar: f64, curve: &ThresholdCurve) -> Result<Feasibility> {
    if curve.scheme != CurveScheme::Multiplex || curve.order != m || curve.n_spads != m + 1 {
        return Err(Error::IncompatibleScheme(format!("need the n={m}, N={} multiplex curve", m + 1)));
    }
    let approx = ensemble_min_eta_approx(m, nbar);
    if nbar == 0.0 {
        return Ok(Feasibility { value: 0.0, approx });
    }
    let kernel = ClickKernel::new(m, m + 1)?;
    let cutoff = m + 40 + (20.0 * nbar) as usize;
    let value = crossing(|eta| {
        let d = EmitterEnsemble::new(m, eta, nbar)?.distribution(cutoff)?;
        let (s, e) = kernel.evaluate(&d.probs)?;
        Ok(qng_verdict(s, e, curve)?.passed)
    })?;
    Ok(Feasibility { value, approx })
}

/// Minimal transmission of the unheralded signal mode of a cascade passing the n=1, N=2 criterion.
pub fn cascade_unheralded_min_t(eta: f64, nbar: f64, curve: &ThresholdCurve, opts: &CascadeOptions) -> Result<Feasibility> {
    if curve.scheme != CurveScheme::Multiplex || curve.order != 1 || curve.n_spads != 2 {
        return Err(Error::IncompatibleScheme("need the n=1, N=2 multiplex curve".into()));
    }
    let kernel = ClickKernel::new(1, 2)?;
    let value = crossing(|t| {
        let d = reduced_signal_state(&CascadeSource::new(eta, t, nbar)?, false, opts)?;
        let (s, e) = kernel.evaluate(&d.probs)?;
        Ok(qng_verdict(s, e, curve)?.passed)
    })?;
    Ok(Feasibility { value, approx: (2.0 * nbar).sqrt() / eta })
}

/// Minimal transmission for QNG coincidences of a cascade under SPAD detection.
pub fn cascade_coincidence_min_t(eta: f64, nbar: f64, opts: &CascadeOptions) -> Result<Feasibility> {
    let value = crossing(|t| {
        let p = cascade_probabilities(&CascadeSource::new(eta, t, nbar)?, PairDetection::Spad, opts)?;
        Ok(coincidence_qng(&p)?.passed)
    })?;
    Ok(Feasibility { value, approx: (nbar / eta).sqrt() })
}
