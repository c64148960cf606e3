//! Genuine n-photon quantum non-Gaussianity: Gaussian-modulated core states and their thresholds.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{modulation_columns, FockDistribution, PureFockState};
use crate::numeric::{find_root, logspace, nelder_mead};
use crate::qng::{
    assemble_curve, dual_slopes, dual_support, linspace, pair_derivative, qng_threshold_numeric, qng_verdict, settled_probs,
    stationary_candidates, Candidate, ClickKernel, CurveScheme, Feasibility, GridSpec, ThresholdCurve,
};
use crate::sources::EmitterEnsemble;

/// Superposition of the Fock states |0> .. |n-1>.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreState {
    pub coeffs: Vec<Complex64>,
}

impl CoreState {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("core state needs at least one coefficient".into()));
        }
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("core state norm {norm} differs from 1")));
        }
        Ok(Self { coeffs })
    }

    pub fn fock(k: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        coeffs[k] = Complex64::new(1.0, 0.0);
        Self { coeffs }
    }

    /// c|k> + sqrt(1 - c^2)|k-1> written through the lower amplitude `lower`, |lower| <= 1.
    pub fn top_two(k: usize, lower: f64) -> Result<Self> {
        if k == 0 || lower.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!("need k >= 1 and |lower| <= 1, got k={k}, lower={lower}")));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        coeffs[k] = Complex64::new((1.0 - lower * lower).sqrt(), 0.0);
        coeffs[k - 1] = Complex64::new(lower, 0.0);
        Ok(Self { coeffs })
    }

    /// Highest Fock number present in the superposition.
    pub fn top(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// D(alpha) S(xi) applied to a core state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulatedCore {
    pub core: CoreState,
    pub alpha: Complex64,
    pub xi_mag: f64,
    pub xi_phase: f64,
}

impl PureFockState for ModulatedCore {
    fn amplitudes(&self, cutoff: usize) -> Result<Vec<Complex64>> {
        let cols = modulation_columns(self.alpha, self.xi_mag, self.xi_phase, self.core.top(), cutoff)?;
        let mut out = vec![Complex64::new(0.0, 0.0); cutoff + 1];
        for (c, col) in self.core.coeffs.iter().zip(&cols) {
            if *c != Complex64::new(0.0, 0.0) {
                for (o, a) in out.iter_mut().zip(col) {
                    *o += c * a;
                }
            }
        }
        Ok(out)
    }
}

impl ModulatedCore {
    pub fn mean_photons_bound(&self) -> f64 {
        let k = self.core.top() as f64;
        let g = self.xi_mag.cosh() + self.xi_mag.sinh();
        (k + 1.0) * g * g + self.alpha.norm_sqr()
    }
}

pub fn modulated_core_distribution(m: &ModulatedCore, cutoff: usize) -> Result<FockDistribution> {
    let n = m.core.coeffs.len();
    if cutoff < 4 * n + 20 {
        return Err(Error::InvalidParameter(format!("cutoff {cutoff} below {}", 4 * n + 20)));
    }
    let d = m.photon_distribution(cutoff)?;
    if d.tail > 1e-8 {
        return Err(Error::CutoffTooLow { tail: d.tail, limit: 1e-8 });
    }
    Ok(d)
}

fn core_at(n: usize, alpha: f64, w: f64, lower: f64, amplitude: bool) -> Result<ModulatedCore> {
    let v = 1.0 - w.exp();
    if !(v > 0.0) {
        return Err(Error::InvalidParameter("variance must stay positive".into()));
    }
    Ok(ModulatedCore {
        core: CoreState::top_two(n - 1, lower.clamp(-1.0, 1.0))?,
        alpha: Complex64::new(alpha, 0.0),
        xi_mag: -0.5 * v.ln(),
        xi_phase: if amplitude { 0.0 } else { std::f64::consts::PI },
    })
}

fn core_probs(kernel: &ClickKernel, n: usize, u: f64, w: f64, lower: f64, amplitude: bool) -> Result<(f64, f64)> {
    let m = core_at(n, u.exp(), w, lower, amplitude)?;
    kernel.evaluate(&settled_probs(&m, m.mean_photons_bound())?)
}

/// Fixed-point iteration limits for the alternating displacement/core solves.
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const FIXED_POINT_MAX_ITER: usize = 50;

/// Root of `f` nearest to `x0`, bracketed by expanding steps on both sides within [lo, hi].
fn nearest_root<F: Fn(f64) -> f64>(f: F, x0: f64, step: f64, lo: f64, hi: f64) -> Option<f64> {
    let f0 = f(x0);
    if !f0.is_finite() {
        return None;
    }
    if f0 == 0.0 {
        return Some(x0);
    }
    let mut d = step;
    let (mut prev_up, mut prev_dn) = (x0, x0);
    for _ in 0..60 {
        let up = (x0 + d).min(hi);
        let dn = (x0 - d).max(lo);
        for (a, b) in [(prev_dn, dn), (prev_up, up)] {
            if a == b {
                continue;
            }
            let (fa, fb) = (f(a), f(b));
            if fa.is_finite() && fb.is_finite() && fa.signum() != fb.signum() {
                return find_root(&f, a.min(b), a.max(b), 1e-13, 0.0);
            }
        }
        prev_up = up;
        prev_dn = dn;
        if up >= hi && dn <= lo {
            break;
        }
        d *= 1.6;
    }
    None
}

/// Accepts `x0` when `f` touches zero there without crossing.
fn touching_root<F: Fn(f64) -> f64>(f: F, x0: f64) -> Option<f64> {
    let d = 0.01;
    let (f0, fl, fr) = (f(x0), f(x0 - d), f(x0 + d));
    let same_sign = f0.signum() == fl.signum() && f0.signum() == fr.signum();
    (same_sign && f0.abs() < 1e-2 * fl.abs().min(fr.abs())).then_some(x0)
}

fn genuine_candidates(kernel: &ClickKernel, n: usize, w: f64, scan: usize) -> (Vec<Candidate>, bool) {
    let t = w.exp();
    let lo = (0.01 * t.sqrt()).ln();
    let hi = (4.0 * t.sqrt() + 1.0).min(4.0).ln();
    let grid: Vec<f64> = (0..scan).map(|i| lo + (hi - lo) * i as f64 / (scan - 1) as f64).collect();
    let mut out = Vec::new();
    let mut failed = false;
    for amplitude in [true, false] {
        let probs = |u: f64, w: f64, l: f64| core_probs(kernel, n, u, w, l, amplitude);
        let jac_alpha = |u: f64, l: f64| -> Result<f64> {
            let (dsu, deu) = pair_derivative(&|x| probs(x, w, l), u)?;
            let (dsw, dew) = pair_derivative(&|x| probs(u, x, l), w)?;
            Ok(dsu * dew - deu * dsw)
        };
        let jac_core = |u: f64, l: f64| -> Result<f64> {
            let (dsu, deu) = pair_derivative(&|x| probs(x, w, l), u)?;
            let (dsl, del) = pair_derivative(&|x| probs(u, w, x), l)?;
            Ok(dsl * deu - del * dsu)
        };
        // seeds: stationary displacements of the pure top Fock state
        let (seeds, _) = stationary_candidates(&grid, |u| jac_alpha(u, 0.0), |u| Ok(Candidate { error: u, success: 0.0, slope: 0.0 }));
        for seed in seeds {
            let (mut u, mut l) = (seed.error, 0.0);
            let mut converged = false;
            let mut last_delta = f64::INFINITY;
            let mut damping = 1.0;
            for _ in 0..FIXED_POINT_MAX_ITER {
                let Some(nu) = nearest_root(|x| jac_alpha(x, l).unwrap_or(f64::NAN), u, 0.01, lo - 3.0, hi + 1.0) else { break };
                let core_jac = |x: f64| jac_core(nu, x).unwrap_or(f64::NAN);
                let Some(nl) = nearest_root(core_jac, l, 1e-3, -0.999, 0.999).or_else(|| touching_root(core_jac, l)) else {
                    break;
                };
                let delta = (nu - u).abs() + (nl - l).abs();
                if delta > last_delta {
                    damping = 0.5;
                }
                last_delta = delta;
                u += damping * (nu - u);
                l += damping * (nl - l);
                if delta < FIXED_POINT_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                failed = true;
                continue;
            }
            let point = (|| -> Result<Candidate> {
                let (s, e) = probs(u, w, l)?;
                let (dsu, deu) = pair_derivative(&|x| probs(x, w, l), u)?;
                Ok(Candidate { error: e, success: s, slope: dsu / deu })
            })();
            match point {
                Ok(c) => out.push(c),
                Err(_) => failed = true,
            }
        }
    }
    let failed = failed && out.is_empty();
    (out, failed)
}

/// Genuine order-`n` threshold for `n_spads` detectors; order 1 coincides with the QNG threshold.
pub fn genuine_threshold_curve(n: usize, n_spads: usize, grid: &GridSpec) -> Result<ThresholdCurve> {
    if n == 1 {
        let mut c = qng_threshold_numeric(1, n_spads, grid)?;
        c.scheme = CurveScheme::Genuine;
        return Ok(c);
    }
    grid.validate()?;
    let kernel = ClickKernel::new(n, n_spads)?;
    let ws: Vec<f64> = logspace(grid.t_min, grid.t_max, grid.points).into_iter().map(f64::ln).collect();
    let per_point: Vec<(Vec<Candidate>, bool)> = ws.par_iter().map(|&w| genuine_candidates(&kernel, n, w, grid.scan)).collect();
    let eval = |x: &[f64]| -> Result<(f64, f64)> {
        if x[1].abs() > 3.0 {
            return Err(Error::InvalidParameter("squeezing outside the search box".into()));
        }
        let m = ModulatedCore {
            core: CoreState::top_two(n - 1, x[2].sin())?,
            alpha: Complex64::new(x[0], 0.0),
            xi_mag: x[1].abs(),
            xi_phase: if x[1] >= 0.0 { 0.0 } else { std::f64::consts::PI },
        };
        kernel.evaluate(&settled_probs(&m, m.mean_photons_bound())?)
    };
    let half_pi = 0.5 * std::f64::consts::PI;
    let axes = [linspace(0.0, 3.0, 31), linspace(-1.6, 1.6, 33), linspace(-half_pi, half_pi, 21)];
    let mut extra = dual_support(eval, &axes, &dual_slopes());
    // Gaussian states belong to every genuine family
    let plain = qng_threshold_numeric(n, n_spads, grid)?;
    extra.extend(plain.points.iter().zip(&plain.slopes).map(|(p, &slope)| Candidate { error: p[0], success: p[1], slope }));
    assemble_curve(CurveScheme::Genuine, n, n_spads, per_point, extra)
}

/// Weak-squeezing expansion of the genuine order-`n` threshold with curve parameter `t`.
pub fn genuine_threshold_approx(n: usize, t: f64) -> Result<crate::qng::ApproxPoint> {
    if n == 0 || !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("need n >= 1 and t > 0, got n={n}, t={t}")));
    }
    let nf = n as f64;
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let success = nf * fact / (12.0 * (nf + 1.0).powi(n as i32)) * t * (6.0 + t * (6.0 + 12.0 * nf + nf * nf));
    let error = nf * fact * (2.0 + nf).powi(2) / (55296.0 * (nf + 1.0).powi(n as i32 - 1))
        * t.powi(3)
        * (384.0 + t * (896.0 + 307.0 * nf + 99.0 * nf * nf));
    Ok(crate::qng::ApproxPoint { success, error, within_validity: error < crate::qng::APPROX_VALIDITY })
}

/// Largest |<n| D(alpha) S(r) |core>|^2 over cores below |n>, which is sum_k<n |<n| D S |k>|^2,
/// for real displacement and signed real squeezing.
pub fn absolute_overlap(n: usize, alpha: f64, r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("order must be at least 1".into()));
    }
    let phase = if r >= 0.0 { 0.0 } else { std::f64::consts::PI };
    let cols = modulation_columns(Complex64::new(alpha, 0.0), r.abs(), phase, n - 1, n)?;
    Ok(cols.iter().map(|c| c[n].norm_sqr()).sum())
}

/// Optimized absolute threshold and the parameters reaching it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteThreshold {
    pub n: usize,
    pub value: f64,
    pub alpha: f64,
    pub squeezing: f64,
}

/// Largest |<n|psi>|^2 over Gaussian-modulated cores below |n>.
pub fn absolute_threshold(n: usize) -> Result<AbsoluteThreshold> {
    if !(1..=12).contains(&n) {
        return Err(Error::InvalidParameter(format!("absolute threshold supports 1 <= n <= 12, got {n}")));
    }
    let f = |a: f64, r: f64| absolute_overlap(n, a, r).unwrap_or(0.0);
    let mut width = 1.0;
    for _ in 0..3 {
        let mut best = (0.0, 0.0, f64::NEG_INFINITY);
        let steps = 80;
        for i in 0..=steps {
            let a = 3.0 * width * i as f64 / steps as f64;
            for j in 0..=steps {
                let r = width * (2.0 * j as f64 / steps as f64 - 1.0);
                let v = f(a, r);
                if v > best.2 {
                    best = (a, r, v);
                }
            }
        }
        let (x, v) = nelder_mead(|p| -f(p[0], p[1]), &[best.0, best.1], 0.02, 1e-15, 4000);
        let on_edge = x[0] >= 3.0 * width * 0.99 || x[1].abs() >= width * 0.99;
        if !on_edge {
            return Ok(AbsoluteThreshold { n, value: -v, alpha: x[0].abs(), squeezing: x[1] });
        }
        width *= 2.0;
    }
    Err(Error::Stagnation(format!("absolute threshold n={n} kept hitting the search boundary")))
}

/// Printed weak-noise estimate of the minimal efficiency for genuine M-photon QNG.
pub fn genuine_model_approx(m: usize, nbar: f64) -> f64 {
    let mf = m as f64;
    (12.0 * mf / ((mf + 1.0) * (mf + 2.0).powi(2)).sqrt() * nbar.sqrt()).powf(1.0 / mf)
}

/// Minimal efficiency of an M-emitter ensemble with Poissonian noise showing genuine M-photon QNG
/// with M + 1 detectors (`curve` must be the genuine order-M curve).
pub fn genuine_model_condition(m: usize, nbar: f64, curve: &ThresholdCurve) -> Result<Feasibility> {
    if curve.scheme != CurveScheme::Genuine || curve.order != m || curve.n_spads != m + 1 {
        return Err(Error::IncompatibleScheme(format!("need the genuine n={m}, N={} curve", m + 1)));
    }
    let approx = genuine_model_approx(m, nbar);
    if nbar == 0.0 {
        return Ok(Feasibility { value: 0.0, approx });
    }
    let kernel = ClickKernel::new(m, m + 1)?;
    let cutoff = m + 40 + (20.0 * nbar) as usize;
    let passes = |eta: f64| -> Result<bool> {
        let d = EmitterEnsemble::new(m, eta, nbar)?.distribution(cutoff)?;
        let (s, e) = kernel.evaluate(&d.probs)?;
        Ok(qng_verdict(s, e, curve)?.passed)
    };
    let value = crate::qng::crossing(passes)?;
    Ok(Feasibility { value, approx })
}
