//! Phonon-state noise models, displacement sensing and thermal depths of Fock-state features.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{modulation_columns, FockDistribution};
use crate::genuine::absolute_threshold;
use crate::numeric::{gauss_laguerre, logspace};

const NEGATIVE_TOL: f64 = 1e-15;
const HEATING_TAIL: f64 = 1e-3;
const DISPLACED_TOL: f64 = 1e-10;
const FISHER_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Gaussian average over displacements.
    #[serde(rename = "full-map")]
    Full,
    /// First-order expansion with coefficient nbar.
    Linearized,
    /// First-order expansion with coefficient nbar^2, nbar read as a Lamb-Dicke parameter.
    LinearizedLambDicke,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub nbar: f64,
    pub mode: NoiseMode,
}

impl NoiseParams {
    pub fn full(nbar: f64) -> Self {
        Self { nbar, mode: NoiseMode::Full }
    }
}

fn support(probs: &[f64]) -> usize {
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Thermal displacement noise adding `nbar` quanta on average, truncated at `cutoff`.
pub fn thermal_map(d: &FockDistribution, p: &NoiseParams, cutoff: usize) -> Result<FockDistribution> {
    let nbar = p.nbar;
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("nbar={nbar}")));
    }
    let top = support(&d.probs);
    let needed = top + (10.0 * nbar).ceil() as usize + 20;
    if cutoff < needed {
        return Err(Error::InvalidParameter(format!("cutoff {cutoff} below {needed}")));
    }
    let input = d.with_cutoff(cutoff);
    if nbar == 0.0 {
        return Ok(input);
    }
    let probs = match p.mode {
        NoiseMode::Full => displacement_average(&input.probs, top, nbar, cutoff)?,
        NoiseMode::Linearized => linearized(&input.probs, nbar)?,
        NoiseMode::LinearizedLambDicke => linearized(&input.probs, nbar * nbar)?,
    };
    let mut out = FockDistribution::from_truncated(probs);
    out.tail = out.tail.max(d.tail);
    Ok(out)
}

// Radial average of |<m|D(alpha)|k>|^2 e^{x} against e^{-x/nbar}/nbar, x = |alpha|^2, by Gauss-Laguerre
// after rescaling so the quadrature is exact for the polynomial part.
fn displacement_average(probs: &[f64], top: usize, nbar: f64, cutoff: usize) -> Result<Vec<f64>> {
    let scale = nbar / (1.0 + nbar);
    let (nodes, weights) = gauss_laguerre((cutoff + top) / 2 + 2);
    let mut out = vec![0.0; cutoff + 1];
    for (y, w) in nodes.into_iter().zip(weights) {
        let x = scale * y;
        let factor = w * x.exp() / (1.0 + nbar);
        if factor == 0.0 {
            continue;
        }
        let cols = modulation_columns(num_complex::Complex64::new(x.sqrt(), 0.0), 0.0, 0.0, top, cutoff)?;
        for (k, col) in cols.iter().enumerate() {
            let pk = probs[k];
            if pk == 0.0 {
                continue;
            }
            for (m, a) in col.iter().enumerate() {
                out[m] += factor * pk * a.norm_sqr();
            }
        }
    }
    Ok(out)
}

fn linearized(probs: &[f64], coeff: f64) -> Result<Vec<f64>> {
    let len = probs.len();
    let at = |m: usize| probs.get(m).copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(len);
    for m in 0..len {
        let mf = m as f64;
        let lower = if m > 0 { mf * at(m - 1) } else { 0.0 };
        let v = at(m) + coeff * ((mf + 1.0) * at(m + 1) + lower - (2.0 * mf + 1.0) * at(m));
        out.push(v);
    }
    let worst = out.iter().copied().fold(f64::INFINITY, f64::min);
    if worst < -NEGATIVE_TOL {
        return Err(Error::LinearizationInvalid(worst));
    }
    Ok(out)
}

/// Damping and excitation rates of the birth-death master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub damping: f64,
    pub excitation: f64,
}

impl RateParams {
    pub fn new(damping: f64, excitation: f64) -> Result<Self> {
        if !(damping >= 0.0 && excitation >= 0.0 && damping.is_finite() && excitation.is_finite()) {
            return Err(Error::InvalidParameter(format!("rates A={damping}, B={excitation}")));
        }
        Ok(Self { damping, excitation })
    }

    /// Mean occupation of the Bose-Einstein steady state, when one exists.
    pub fn steady_mean(&self) -> Option<f64> {
        (self.damping > self.excitation).then(|| self.excitation / (self.damping - self.excitation))
    }
}

/// Integrates the rate equations up to `t_final` by uniformization in steps of at most `dt`.
/// The top level of the distribution reflects.
pub fn rate_evolve(d: &FockDistribution, r: &RateParams, t_final: f64, dt: f64) -> Result<FockDistribution> {
    let r = RateParams::new(r.damping, r.excitation)?;
    if !(t_final >= 0.0 && t_final.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("t_final={t_final}, dt={dt}")));
    }
    let top = d.cutoff();
    let birth: Vec<f64> = (0..=top).map(|m| if m < top { r.excitation * (m + 1) as f64 } else { 0.0 }).collect();
    let death: Vec<f64> = (0..=top).map(|m| r.damping * m as f64).collect();
    let lambda = birth.iter().zip(&death).map(|(b, d)| b + d).fold(0.0, f64::max);
    let mut p = d.probs.clone();
    if lambda == 0.0 || t_final == 0.0 {
        return Ok(d.clone());
    }
    let watch_from = (9 * top).div_ceil(10).max(1);
    let mut t = 0.0;
    while t < t_final {
        let h = dt.min(t_final - t).min(50.0 / lambda);
        p = uniformized(&p, &birth, &death, lambda * h, lambda);
        t += h;
        let tail: f64 = p[watch_from..].iter().sum::<f64>() + d.tail;
        if tail > HEATING_TAIL {
            return Err(if r.damping <= r.excitation {
                Error::HeatingDivergence(tail)
            } else {
                Error::CutoffTooLow { tail, limit: HEATING_TAIL }
            });
        }
    }
    Ok(FockDistribution { probs: p, tail: d.tail })
}

fn uniformized(p: &[f64], birth: &[f64], death: &[f64], mu: f64, lambda: f64) -> Vec<f64> {
    let len = p.len();
    let mut v = p.to_vec();
    let mut weight = (-mu).exp();
    let mut wsum = weight;
    let mut acc: Vec<f64> = v.iter().map(|x| weight * x).collect();
    let mut j = 0usize;
    loop {
        j += 1;
        let mut next = vec![0.0; len];
        for m in 0..len {
            let stay = 1.0 - (birth[m] + death[m]) / lambda;
            let mut x = v[m] * stay;
            if m > 0 {
                x += v[m - 1] * birth[m - 1] / lambda;
            }
            if m + 1 < len {
                x += v[m + 1] * death[m + 1] / lambda;
            }
            next[m] = x;
        }
        v = next;
        weight *= mu / j as f64;
        wsum += weight;
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += weight * x;
        }
        if j as f64 > mu && weight < 1e-18 {
            break;
        }
    }
    acc.iter().map(|a| a / wsum).collect()
}

/// A state whose photon distribution after a real displacement of intensity `u` can be computed.
pub trait DisplacedDistribution {
    fn displaced(&self, intensity: f64, cutoff: usize) -> Result<Vec<f64>>;
}

/// Phase-insensitive state with the given diagonal.
impl DisplacedDistribution for FockDistribution {
    fn displaced(&self, intensity: f64, cutoff: usize) -> Result<Vec<f64>> {
        if !(intensity >= 0.0) {
            return Err(Error::InvalidParameter(format!("intensity {intensity}")));
        }
        let probs: Vec<f64> = self.probs.iter().map(|p| p.max(0.0)).collect();
        let top = probs.iter().rposition(|p| *p > 1e-16).unwrap_or(0);
        let cols = modulation_columns(num_complex::Complex64::new(intensity.sqrt(), 0.0), 0.0, 0.0, top, cutoff)?;
        let mut out = vec![0.0; cutoff + 1];
        for (k, col) in cols.iter().enumerate() {
            for (m, a) in col.iter().enumerate() {
                out[m] += probs[k] * a.norm_sqr();
            }
        }
        let kept: f64 = probs[..=top].iter().sum();
        let missing = kept - out.iter().sum::<f64>();
        if missing > DISPLACED_TOL {
            return Err(Error::CutoffTooLow { tail: missing, limit: DISPLACED_TOL });
        }
        Ok(out)
    }
}

/// Fisher information about the displacement intensity `u`.
pub fn fisher_information<S: DisplacedDistribution + ?Sized>(state: &S, u: f64, cutoff: usize) -> Result<f64> {
    let h = (1e-3 * u).max(1e-5);
    if !(u > h && u.is_finite()) {
        return Err(Error::InvalidParameter(format!("intensity {u} too small for step {h}")));
    }
    let at = |x: f64| state.displaced(x, cutoff);
    let p0 = at(u)?;
    let (pp, pm) = (at(u + h)?, at(u - h)?);
    let (qp, qm) = (at(u + 0.5 * h)?, at(u - 0.5 * h)?);
    let mut clamped = false;
    let mut f = 0.0;
    for m in 0..p0.len() {
        let mut p = p0[m];
        if p < 0.0 {
            clamped = true;
            p = 0.0;
        }
        if p < FISHER_FLOOR {
            continue;
        }
        let d1 = (pp[m] - pm[m]) / (2.0 * h);
        let d2 = (qp[m] - qm[m]) / h;
        let d = (4.0 * d2 - d1) / 3.0;
        f += d * d / p;
    }
    if clamped {
        warn!("negative probabilities clamped in Fisher information at u={u}");
    }
    Ok(f)
}

/// Ratio of displacement-intensity uncertainties against the ground state; below one is an advantage.
pub fn metrological_ratio<S: DisplacedDistribution + ?Sized>(state: &S, u: f64, cutoff: usize) -> Result<f64> {
    let f = fisher_information(state, u, cutoff)?;
    if f <= 0.0 {
        return Err(Error::Undefined("zero Fisher information"));
    }
    Ok((1.0 / (u * f)).sqrt())
}

/// Ratio attained by the ideal Fock state |k>.
pub fn fock_ratio(k: usize) -> f64 {
    1.0 / ((2 * k + 1) as f64).sqrt()
}

/// Wigner function of a phase-insensitive state at squared phase-space radius `r2`.
pub fn wigner_radial(d: &FockDistribution, r2: f64) -> f64 {
    parity_sum(&d.probs, r2) * (-0.5 * r2).exp() / (2.0 * std::f64::consts::PI)
}

fn parity_sum(probs: &[f64], r2: f64) -> f64 {
    let mut l0 = 1.0;
    let mut l1 = 1.0 - r2;
    let mut s = probs.first().copied().unwrap_or(0.0);
    for (m, p) in probs.iter().enumerate().skip(1) {
        if m > 1 {
            let k = (m - 1) as f64;
            let l2 = ((2.0 * k + 1.0 - r2) * l1 - k * l0) / (k + 1.0);
            l0 = l1;
            l1 = l2;
        }
        s += if m % 2 == 0 { p * l1 } else { -p * l1 };
    }
    s
}

/// Sign changes of the radial Wigner function on (0, r2_max].
pub fn wigner_sign_changes(d: &FockDistribution, r2_max: f64, samples: usize) -> usize {
    let vals: Vec<f64> = (0..=samples).map(|i| parity_sum(&d.probs, r2_max * i as f64 / samples as f64)).collect();
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut last = 0.0f64;
    let mut changes = 0;
    for v in vals {
        if v.abs() <= 1e-12 * scale {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            changes += 1;
        }
        last = v;
    }
    changes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "criterion")]
pub enum DepthCriterion {
    AbsoluteQng,
    /// Sensing advantage over the ideal Fock state |reference>.
    Metrological {
        reference: usize,
    },
    WignerAnnuli,
}

impl DepthCriterion {
    pub fn label(&self) -> String {
        match self {
            Self::AbsoluteQng => "absolute-qng".into(),
            Self::Metrological { reference } => format!("metrological-{reference}"),
            Self::WignerAnnuli => "wigner-annuli".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthOptions {
    /// First upper end of the nbar bracket; doubled while the feature survives.
    pub initial_nbar: f64,
    pub max_nbar: f64,
    pub rtol: f64,
    /// Displacement intensities probed by the metrological criterion.
    pub intensities: Vec<f64>,
}

impl Default for DepthOptions {
    fn default() -> Self {
        Self { initial_nbar: 0.01, max_nbar: 20.0, rtol: 1e-6, intensities: logspace(0.01, 0.5, 6) }
    }
}

/// Noisy Fock state |n> after the full thermal map.
pub fn noisy_fock(n: usize, nbar: f64) -> Result<FockDistribution> {
    let cutoff = n + (10.0 * nbar).ceil() as usize + 20;
    thermal_map(&FockDistribution::fock(n, n)?, &NoiseParams::full(nbar), cutoff)
}

/// Whether the noisy Fock state |n> keeps the feature named by `criterion`.
pub fn depth_predicate(n: usize, criterion: DepthCriterion, nbar: f64, opts: &DepthOptions, pbar: f64) -> Result<bool> {
    let rho = noisy_fock(n, nbar)?;
    Ok(match criterion {
        DepthCriterion::AbsoluteQng => rho.p(n) > pbar,
        DepthCriterion::Metrological { reference } => {
            let cutoff = rho.cutoff() + 30;
            let bound = fock_ratio(reference);
            let mut best = f64::INFINITY;
            for &u in &opts.intensities {
                best = best.min(metrological_ratio(&rho, u, cutoff)?);
            }
            best < bound
        }
        DepthCriterion::WignerAnnuli => {
            let r2_max = 4.0 * n as f64 + 12.0 + 4.0 * nbar;
            wigner_sign_changes(&rho, r2_max, 4000) >= n
        }
    })
}

/// Largest mean added phonon number for which the noisy |n> keeps the feature.
pub fn thermal_depth(n: usize, criterion: DepthCriterion, opts: &DepthOptions) -> Result<f64> {
    if !(1..=12).contains(&n) {
        return Err(Error::InvalidParameter(format!("depth supports 1 <= n <= 12, got {n}")));
    }
    if let DepthCriterion::Metrological { reference } = criterion {
        if reference >= n {
            return Err(Error::InvalidParameter(format!("reference |{reference}> not below |{n}>")));
        }
    }
    if !(opts.initial_nbar > 0.0 && opts.max_nbar >= opts.initial_nbar && opts.rtol > 0.0) {
        return Err(Error::InvalidParameter("bad depth search options".into()));
    }
    let pbar = match criterion {
        DepthCriterion::AbsoluteQng => absolute_threshold(n)?.value,
        _ => 0.0,
    };
    let pred = |nbar: f64| depth_predicate(n, criterion, nbar, opts, pbar);
    let (mut lo, mut hi) = (0.0, opts.initial_nbar);
    while pred(hi)? {
        lo = hi;
        if hi >= opts.max_nbar {
            return Err(Error::RangeExhausted(opts.max_nbar));
        }
        hi = (2.0 * hi).min(opts.max_nbar);
    }
    while hi - lo > opts.rtol * hi {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean occupation of the Bose-Einstein distribution `d`, used as the fixed-point check of the rate equations.
pub fn thermal_drift(d: &FockDistribution, r: &RateParams, t_final: f64) -> Result<f64> {
    let evolved = rate_evolve(d, r, t_final, t_final.max(f64::MIN_POSITIVE))?;
    Ok(evolved.probs.iter().zip(&d.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn vacuum_becomes_thermal() {
        for nbar in [0.05, 0.5, 2.0] {
            let cutoff = 120;
            let out = thermal_map(&FockDistribution::vacuum(0), &NoiseParams::full(nbar), cutoff).unwrap();
            let th = FockDistribution::thermal(nbar, cutoff);
            assert!(max_diff(&out.probs, &th.probs) < 1e-12, "nbar={nbar} {}", max_diff(&out.probs, &th.probs));
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let d = FockDistribution::fock(3, 3).unwrap();
        for mode in [NoiseMode::Full, NoiseMode::Linearized, NoiseMode::LinearizedLambDicke] {
            let out = thermal_map(&d, &NoiseParams { nbar: 0.0, mode }, 30).unwrap();
            assert_eq!(out.p(3), 1.0);
        }
    }

    #[test]
    fn linearized_matches_full_to_second_order() {
        let one = FockDistribution::fock(1, 1).unwrap();
        let gap = |nbar: f64| {
            let full = thermal_map(&one, &NoiseParams::full(nbar), 40).unwrap();
            let lin = thermal_map(&one, &NoiseParams { nbar, mode: NoiseMode::Linearized }, 40).unwrap();
            max_diff(&full.probs, &lin.probs) / (nbar * nbar)
        };
        // |1>: P0 = nbar/(1+nbar)^2 exactly
        let full = thermal_map(&one, &NoiseParams::full(0.05), 40).unwrap();
        assert!((full.p(0) - 0.05 / 1.05f64.powi(2)).abs() < 1e-14);
        let (coarse, fine) = (gap(0.05), gap(0.001));
        assert!(coarse < 10.0 && fine < 10.0 && (coarse - fine).abs() < 1.5);
        let big = FockDistribution::fock(5, 5).unwrap();
        let err = thermal_map(&big, &NoiseParams { nbar: 0.5, mode: NoiseMode::Linearized }, 40).unwrap_err();
        assert!(matches!(err, Error::LinearizationInvalid(_)));
    }

    #[test]
    fn cutoff_precondition() {
        let d = FockDistribution::fock(2, 2).unwrap();
        assert!(thermal_map(&d, &NoiseParams::full(1.0), 20).is_err());
    }

    #[test]
    fn pure_damping_of_one_phonon() {
        let r = RateParams::new(0.7, 0.0).unwrap();
        let out = rate_evolve(&FockDistribution::fock(1, 10).unwrap(), &r, 1.3, 0.1).unwrap();
        let decay = (-0.7f64 * 1.3).exp();
        assert!((out.p(1) - decay).abs() < 1e-13);
        assert!((out.p(0) - (1.0 - decay)).abs() < 1e-13);
    }

    #[test]
    fn relaxes_to_bose_einstein() {
        let r = RateParams::new(2.0, 1.0).unwrap();
        let out = rate_evolve(&FockDistribution::fock(3, 80).unwrap(), &r, 30.0, 1.0).unwrap();
        let th = FockDistribution::thermal(r.steady_mean().unwrap(), 80);
        assert!(max_diff(&out.probs, &th.probs) < 1e-10);
        assert!((out.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heating_is_flagged() {
        let r = RateParams::new(1.0, 1.0).unwrap();
        assert_eq!(r.steady_mean(), None);
        let err = rate_evolve(&FockDistribution::vacuum(30), &r, 100.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::HeatingDivergence(_)));
        assert!(rate_evolve(&FockDistribution::vacuum(30), &r, 0.01, 0.01).is_ok());
    }

    #[test]
    fn ground_state_fisher() {
        let g = FockDistribution::vacuum(0);
        for u in [0.01, 0.1, 0.5, 2.0] {
            let f = fisher_information(&g, u, 60).unwrap();
            assert!((f * u - 1.0).abs() < 1e-6, "u={u} f={f}");
        }
        assert!(matches!(fisher_information(&g, 30.0, 20), Err(Error::CutoffTooLow { .. })));
    }

    #[test]
    fn fock_ratio_is_flat() {
        for n in [1usize, 4, 10] {
            let d = FockDistribution::fock(n, n).unwrap();
            for u in [0.01, 0.1, 0.5] {
                let r = metrological_ratio(&d, u, n + 40).unwrap();
                assert!((r - fock_ratio(n)).abs() < 1e-3, "n={n} u={u} r={r}");
            }
        }
    }

    #[test]
    fn fock_wigner_nodes() {
        for n in 0..6 {
            let d = FockDistribution::fock(n, n).unwrap();
            assert_eq!(wigner_sign_changes(&d, 4.0 * n as f64 + 12.0, 4000), n);
        }
        let vac = FockDistribution::vacuum(0);
        assert!((wigner_radial(&vac, 0.0) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }
}
