//! Fock distributions, pure single-mode Gaussian states and multimode Gaussian states.
//!
//! Quadratures are X = a + a^dag and P = i(a^dag - a), so the vacuum covariance is the identity
//! and a coherent state |alpha> has mean (2 Re alpha, 2 Im alpha).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_unit, Error, Result};
use crate::numeric::binomial_pmf;

pub const DEFAULT_CUTOFF: usize = 64;
/// Largest photon number handled by the amplitude recurrences.
pub const MAX_CUTOFF: usize = 2048;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockDistribution {
    pub probs: Vec<f64>,
    pub tail: f64,
}

impl FockDistribution {
    pub fn new(probs: Vec<f64>, tail: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative or non-finite probability {p}")));
        }
        if !(tail >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative tail {tail}")));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail;
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("total mass {total} is not 1")));
        }
        Ok(Self { probs, tail })
    }

    /// Builds a distribution whose missing mass becomes the tail. Tiny negatives from rounding are clamped.
    pub fn from_truncated(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let s: f64 = probs.iter().sum();
        let tail = (1.0 - s).max(0.0);
        Self { probs, tail }
    }

    /// Rescales the entries so that they carry the full mass; the tail is cleared.
    pub fn renormalized(&self) -> Self {
        let s: f64 = self.probs.iter().sum();
        Self { probs: self.probs.iter().map(|p| p / s).collect(), tail: 0.0 }
    }

    pub fn vacuum(cutoff: usize) -> Self {
        let mut probs = vec![0.0; cutoff + 1];
        probs[0] = 1.0;
        Self { probs, tail: 0.0 }
    }

    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(Error::CutoffExceeded { requested: n, limit: cutoff });
        }
        let mut probs = vec![0.0; cutoff + 1];
        probs[n] = 1.0;
        Ok(Self { probs, tail: 0.0 })
    }

    pub fn poisson(mean: f64, cutoff: usize) -> Self {
        let mut probs = vec![0.0; cutoff + 1];
        let mut p = (-mean).exp();
        for (m, slot) in probs.iter_mut().enumerate() {
            if m > 0 {
                p *= mean / m as f64;
            }
            *slot = p;
        }
        Self::from_truncated(probs)
    }

    /// Bose-Einstein distribution with the given mean.
    pub fn thermal(mean: f64, cutoff: usize) -> Self {
        let ratio = mean / (1.0 + mean);
        let mut probs = vec![0.0; cutoff + 1];
        let mut p = 1.0 / (1.0 + mean);
        for slot in probs.iter_mut() {
            *slot = p;
            p *= ratio;
        }
        Self::from_truncated(probs)
    }

    pub fn binomial(n: usize, p: f64, cutoff: usize) -> Result<Self> {
        check_unit("p", p)?;
        let pmf = binomial_pmf(n, p);
        let mut probs = vec![0.0; cutoff + 1];
        for (k, v) in pmf.into_iter().enumerate() {
            if k <= cutoff {
                probs[k] = v;
            }
        }
        Ok(Self::from_truncated(probs))
    }

    /// Largest represented photon number.
    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn p(&self, m: usize) -> f64 {
        self.probs.get(m).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum()
    }

    fn factorial_moment2(&self) -> f64 {
        self.probs.iter().enumerate().map(|(m, p)| (m * m.saturating_sub(1)) as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs.iter().enumerate().map(|(m, p)| (m as f64 - mean).powi(2) * p).sum()
    }

    fn require_small_tail(&self) -> Result<()> {
        if self.tail > 1e-6 {
            return Err(Error::CutoffTooLow { tail: self.tail, limit: 1e-6 });
        }
        Ok(())
    }

    /// Zero-delay second-order correlation <n(n-1)>/<n>^2.
    pub fn g2_zero(&self) -> Result<f64> {
        self.require_small_tail()?;
        let mean = self.mean();
        if mean <= 0.0 {
            return Err(Error::Undefined("g2 of a state with zero mean"));
        }
        Ok(self.factorial_moment2() / (mean * mean))
    }

    pub fn fano(&self) -> Result<f64> {
        self.require_small_tail()?;
        let mean = self.mean();
        if mean <= 0.0 {
            return Err(Error::Undefined("Fano factor of a state with zero mean"));
        }
        Ok(self.variance() / mean)
    }

    /// Wigner function at the phase-space origin, (1/2pi) sum (-1)^m p_m.
    pub fn wigner_origin(&self) -> f64 {
        let parity: f64 = self.probs.iter().enumerate().map(|(m, p)| if m % 2 == 0 { *p } else { -*p }).sum();
        parity / (2.0 * std::f64::consts::PI)
    }

    /// Distribution of the sum of two independent photon numbers.
    pub fn convolve(&self, other: &FockDistribution, cutoff: usize) -> Self {
        let mut probs = vec![0.0; cutoff + 1];
        for (i, a) in self.probs.iter().enumerate() {
            if *a == 0.0 || i > cutoff {
                continue;
            }
            for (j, b) in other.probs.iter().enumerate().take(cutoff + 1 - i) {
                probs[i + j] += a * b;
            }
        }
        let mut out = Self::from_truncated(probs);
        // mass that was already missing from either factor stays missing
        out.tail = out.tail.max(self.tail + other.tail);
        out
    }

    /// Binomial thinning: each quantum survives with probability `t`.
    pub fn attenuate(&self, t: f64) -> Result<Self> {
        check_unit("T", t)?;
        let mut probs = vec![0.0; self.probs.len()];
        for (m, pm) in self.probs.iter().enumerate() {
            if *pm == 0.0 {
                continue;
            }
            for (j, b) in binomial_pmf(m, t).into_iter().enumerate() {
                probs[j] += pm * b;
            }
        }
        Ok(Self { probs, tail: self.tail })
    }

    /// Convex mixture of distributions sharing one cutoff.
    pub fn mixture(weights: &[f64], parts: &[FockDistribution]) -> Result<Self> {
        if weights.len() != parts.len() || parts.is_empty() {
            return Err(Error::InvalidParameter("mixture weights and parts differ in length".into()));
        }
        let len = parts.iter().map(|d| d.probs.len()).max().unwrap_or(1);
        let mut probs = vec![0.0; len];
        let mut tail = 0.0;
        for (w, d) in weights.iter().zip(parts) {
            check_nonneg("weight", *w)?;
            for (m, p) in d.probs.iter().enumerate() {
                probs[m] += w * p;
            }
            tail += w * d.tail;
        }
        Ok(Self { probs, tail })
    }

    /// Copy padded or truncated to the given cutoff; truncated mass moves to the tail.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut probs = self.probs.clone();
        let mut tail = self.tail;
        if probs.len() > cutoff + 1 {
            tail += probs[cutoff + 1..].iter().sum::<f64>();
            probs.truncate(cutoff + 1);
        } else {
            probs.resize(cutoff + 1, 0.0);
        }
        Self { probs, tail }
    }
}

/// A pure single-mode state with computable Fock amplitudes.
pub trait PureFockState {
    fn amplitudes(&self, cutoff: usize) -> Result<Vec<Complex64>>;

    fn photon_distribution(&self, cutoff: usize) -> Result<FockDistribution> {
        let amps = self.amplitudes(cutoff)?;
        Ok(FockDistribution::from_truncated(amps.iter().map(|c| c.norm_sqr()).collect()))
    }
}

/// D(alpha) S(xi) |0> with xi = xi_mag e^{i xi_phase}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPure {
    pub alpha: Complex64,
    pub xi_mag: f64,
    pub xi_phase: f64,
}

impl GaussianPure {
    pub fn new(alpha: Complex64, xi_mag: f64, xi_phase: f64) -> Result<Self> {
        check_nonneg("xi_mag", xi_mag)?;
        if !alpha.re.is_finite() || !alpha.im.is_finite() || !xi_phase.is_finite() {
            return Err(Error::InvalidParameter("non-finite Gaussian parameters".into()));
        }
        Ok(Self { alpha, xi_mag, xi_phase: xi_phase.rem_euclid(2.0 * std::f64::consts::PI) })
    }

    pub fn vacuum() -> Self {
        Self { alpha: Complex64::new(0.0, 0.0), xi_mag: 0.0, xi_phase: 0.0 }
    }

    pub fn coherent(alpha: Complex64) -> Self {
        Self { alpha, xi_mag: 0.0, xi_phase: 0.0 }
    }

    /// Real displacement with squeezing of minimal variance `v`; `amplitude_squeezed` squeezes along
    /// the displacement direction, otherwise orthogonal to it.
    pub fn from_variance(alpha: f64, v: f64, amplitude_squeezed: bool) -> Result<Self> {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidParameter(format!("variance {v} outside (0,1]")));
        }
        let phase = if amplitude_squeezed { 0.0 } else { std::f64::consts::PI };
        Self::new(Complex64::new(alpha, 0.0), -0.5 * v.ln(), phase)
    }

    /// Minimal quadrature variance exp(-2 |xi|).
    pub fn min_variance(&self) -> f64 {
        (-2.0 * self.xi_mag).exp()
    }

    pub fn mean_photons(&self) -> f64 {
        self.alpha.norm_sqr() + self.xi_mag.sinh().powi(2)
    }

    pub fn to_state(&self) -> GaussianState {
        let mut s = GaussianState::vacuum(1);
        s.apply_squeeze(0, self.xi_mag, self.xi_phase);
        s.apply_displace(0, self.alpha);
        s
    }
}

impl PureFockState for GaussianPure {
    fn amplitudes(&self, cutoff: usize) -> Result<Vec<Complex64>> {
        gaussian_amplitudes(self.alpha, self.xi_mag, self.xi_phase, cutoff)
    }
}

fn squeeze_coefficients(xi_mag: f64, xi_phase: f64) -> (f64, Complex64) {
    (xi_mag.cosh(), Complex64::from_polar(xi_mag.sinh(), xi_phase))
}

fn gaussian_amplitudes(alpha: Complex64, xi_mag: f64, xi_phase: f64, cutoff: usize) -> Result<Vec<Complex64>> {
    if cutoff > MAX_CUTOFF {
        return Err(Error::CutoffExceeded { requested: cutoff, limit: MAX_CUTOFF });
    }
    let (mu, nu) = squeeze_coefficients(xi_mag, xi_phase);
    let gamma = alpha * mu + nu * alpha.conj();
    let expo = -0.5 * alpha.norm_sqr() - alpha.conj() * alpha.conj() * nu / (2.0 * mu);
    let mut out = Vec::with_capacity(cutoff + 1);
    out.push(expo.exp() / mu.sqrt());
    for n in 0..cutoff {
        let prev = if n > 0 { out[n - 1] } else { Complex64::new(0.0, 0.0) };
        let next = (gamma * out[n] - nu * (n as f64).sqrt() * prev) / (mu * ((n + 1) as f64).sqrt());
        out.push(next);
    }
    Ok(out)
}

/// Amplitudes <m| D(alpha) S(xi) |k> for k = 0..=kmax and m = 0..=cutoff, one vector per k.
pub fn modulation_columns(alpha: Complex64, xi_mag: f64, xi_phase: f64, kmax: usize, cutoff: usize) -> Result<Vec<Vec<Complex64>>> {
    let work = cutoff + kmax + 8;
    if work > MAX_CUTOFF {
        return Err(Error::CutoffExceeded { requested: work, limit: MAX_CUTOFF });
    }
    let (mu, nu) = squeeze_coefficients(xi_mag, xi_phase);
    let (ac, nc) = (alpha.conj(), nu.conj());
    let mut col = gaussian_amplitudes(alpha, xi_mag, xi_phase, work)?;
    let mut cols = Vec::with_capacity(kmax + 1);
    cols.push(col[..=cutoff].to_vec());
    // D S a^dag S^dag D^dag = mu (a^dag - alpha*) + nu* (a - alpha)
    for k in 0..kmax {
        let scale = 1.0 / ((k + 1) as f64).sqrt();
        let len = col.len();
        let mut next = vec![Complex64::new(0.0, 0.0); len - 1];
        for m in 0..len - 1 {
            let raise = if m > 0 { col[m - 1] * (m as f64).sqrt() } else { Complex64::new(0.0, 0.0) };
            let lower = col[m + 1] * ((m + 1) as f64).sqrt();
            next[m] = (mu * (raise - ac * col[m]) + nc * (lower - alpha * col[m])) * scale;
        }
        col = next;
        cols.push(col[..=cutoff].to_vec());
    }
    Ok(cols)
}

/// <n| D(alpha) S(xi) |0>.
pub fn fock_amplitude_in_gaussian(state: &GaussianPure, n: usize) -> Result<Complex64> {
    Ok(state.amplitudes(n)?[n])
}

/// Squeezed-displaced Fock state D(alpha) S(xi) |n>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedDisplacedFock {
    pub n: usize,
    pub alpha: Complex64,
    pub xi_mag: f64,
    pub xi_phase: f64,
}

impl PureFockState for SqueezedDisplacedFock {
    fn amplitudes(&self, cutoff: usize) -> Result<Vec<Complex64>> {
        let mut cols = modulation_columns(self.alpha, self.xi_mag, self.xi_phase, self.n, cutoff)?;
        Ok(cols.swap_remove(self.n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GaussianOp {
    Displace { mode: usize, alpha: Complex64 },
    Squeeze { mode: usize, xi_mag: f64, xi_phase: f64 },
    Beamsplit { i: usize, j: usize, t: f64 },
}

/// M-mode Gaussian state in (x1, p1, x2, p2, ...) ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GaussianStateRepr", try_from = "GaussianStateRepr")]
pub struct GaussianState {
    pub n_modes: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianStateRepr {
    n_modes: usize,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl From<GaussianState> for GaussianStateRepr {
    fn from(s: GaussianState) -> Self {
        let d = 2 * s.n_modes;
        Self {
            n_modes: s.n_modes,
            mean: s.mean.iter().copied().collect(),
            cov: (0..d).map(|r| (0..d).map(|c| s.cov[(r, c)]).collect()).collect(),
        }
    }
}

impl TryFrom<GaussianStateRepr> for GaussianState {
    type Error = Error;
    fn try_from(r: GaussianStateRepr) -> Result<Self> {
        let d = 2 * r.n_modes;
        if r.n_modes == 0 || r.mean.len() != d || r.cov.len() != d || r.cov.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParameter("Gaussian state dimensions do not match n_modes".into()));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| r.cov[i][j]);
        let s = GaussianState { n_modes: r.n_modes, mean: DVector::from_vec(r.mean), cov };
        s.check_physical(1e-9)?;
        Ok(s)
    }
}

fn rotation(angle: f64) -> [[f64; 2]; 2] {
    let (s, c) = angle.sin_cos();
    [[c, -s], [s, c]]
}

impl GaussianState {
    pub fn vacuum(n_modes: usize) -> Self {
        let d = 2 * n_modes;
        Self { n_modes, mean: DVector::zeros(d), cov: DMatrix::identity(d, d) }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::InvalidMode { index: mode, n_modes: self.n_modes });
        }
        Ok(())
    }

    pub fn apply(&mut self, op: &GaussianOp) -> Result<()> {
        match *op {
            GaussianOp::Displace { mode, alpha } => {
                self.check_mode(mode)?;
                self.apply_displace(mode, alpha);
            }
            GaussianOp::Squeeze { mode, xi_mag, xi_phase } => {
                self.check_mode(mode)?;
                check_nonneg("xi_mag", xi_mag)?;
                self.apply_squeeze(mode, xi_mag, xi_phase);
            }
            GaussianOp::Beamsplit { i, j, t } => {
                self.check_mode(i)?;
                self.check_mode(j)?;
                if i == j {
                    return Err(Error::InvalidParameter("beam splitter needs two distinct modes".into()));
                }
                check_unit("T", t)?;
                self.apply_beamsplit(i, j, t);
            }
        }
        Ok(())
    }

    fn apply_displace(&mut self, mode: usize, alpha: Complex64) {
        self.mean[2 * mode] += 2.0 * alpha.re;
        self.mean[2 * mode + 1] += 2.0 * alpha.im;
    }

    fn apply_symplectic(&mut self, s: &DMatrix<f64>) {
        self.mean = s * &self.mean;
        self.cov = s * &self.cov * s.transpose();
        self.cov = 0.5 * (&self.cov + self.cov.transpose());
    }

    fn apply_squeeze(&mut self, mode: usize, xi_mag: f64, xi_phase: f64) {
        let rot = rotation(0.5 * xi_phase);
        let (a, b) = ((-xi_mag).exp(), xi_mag.exp());
        let d = 2 * self.n_modes;
        let mut s = DMatrix::identity(d, d);
        for r in 0..2 {
            for c in 0..2 {
                s[(2 * mode + r, 2 * mode + c)] = a * rot[r][0] * rot[c][0] + b * rot[r][1] * rot[c][1];
            }
        }
        self.apply_symplectic(&s);
    }

    fn apply_beamsplit(&mut self, i: usize, j: usize, t: f64) {
        let (ct, st) = (t.sqrt(), (1.0 - t).sqrt());
        let d = 2 * self.n_modes;
        let mut s = DMatrix::identity(d, d);
        for q in 0..2 {
            s[(2 * i + q, 2 * i + q)] = ct;
            s[(2 * i + q, 2 * j + q)] = st;
            s[(2 * j + q, 2 * i + q)] = -st;
            s[(2 * j + q, 2 * j + q)] = ct;
        }
        self.apply_symplectic(&s);
    }

    /// Pure-loss channel with transmission `t` on one mode.
    pub fn attenuate(&self, mode: usize, t: f64) -> Result<Self> {
        self.check_mode(mode)?;
        check_unit("T", t)?;
        let mut out = self.clone();
        let d = 2 * self.n_modes;
        let g = t.sqrt();
        for q in 0..2 {
            let r = 2 * mode + q;
            out.mean[r] *= g;
            for c in 0..d {
                out.cov[(r, c)] *= g;
                out.cov[(c, r)] *= g;
            }
        }
        for q in 0..2 {
            out.cov[(2 * mode + q, 2 * mode + q)] += 1.0 - t;
        }
        Ok(out)
    }

    /// Reduced state of the selected modes, in the given order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let d = idx.len();
        Ok(Self {
            n_modes: modes.len(),
            mean: DVector::from_fn(d, |i, _| self.mean[idx[i]]),
            cov: DMatrix::from_fn(d, d, |i, j| self.cov[(idx[i], idx[j])]),
        })
    }

    /// Smallest eigenvalue of the real embedding of cov + i*Omega.
    pub fn physicality_margin(&self) -> f64 {
        let d = 2 * self.n_modes;
        let mut omega = DMatrix::zeros(d, d);
        for k in 0..self.n_modes {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        let mut emb = DMatrix::zeros(2 * d, 2 * d);
        emb.view_mut((0, 0), (d, d)).copy_from(&self.cov);
        emb.view_mut((d, d), (d, d)).copy_from(&self.cov);
        emb.view_mut((0, d), (d, d)).copy_from(&(-&omega));
        emb.view_mut((d, 0), (d, d)).copy_from(&omega);
        SymmetricEigen::new(emb).eigenvalues.min()
    }

    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let asym = (&self.cov - self.cov.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::InvalidParameter(format!("covariance asymmetric by {asym:.3e}")));
        }
        let m = self.physicality_margin();
        if m < -tol {
            return Err(Error::Unphysical(m));
        }
        Ok(())
    }
}

pub fn build_gaussian(n_modes: usize, ops: &[GaussianOp]) -> Result<GaussianState> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be positive".into()));
    }
    let mut s = GaussianState::vacuum(n_modes);
    for op in ops {
        s.apply(op)?;
    }
    Ok(s)
}

/// Probability that every mode in `mask` is found empty, the others traced out.
pub fn vacuum_projection(state: &GaussianState, mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::InvalidParameter("empty vacuum-projection mask".into()));
    }
    let sub = state.reduced(mask)?;
    let d = 2 * mask.len();
    let m = &sub.cov + DMatrix::<f64>::identity(d, d);
    let chol = m.clone().cholesky().ok_or(Error::DegenerateCovariance)?;
    let det: f64 = chol.l().diagonal().iter().map(|x| x * x).product();
    if !(det > 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    let sol = chol.solve(&sub.mean);
    let quad = sub.mean.dot(&sol);
    let k = mask.len() as i32;
    Ok((2f64.powi(k) / det.sqrt() * (-0.5 * quad).exp()).clamp(0.0, 1.0))
}

/// Photon-number distribution of one mode of a Gaussian state, from the Taylor series of its
/// generating function sum_m p_m z^m = P_vac(1 - z).
pub fn gaussian_photon_distribution(state: &GaussianState, mode: usize, cutoff: usize) -> Result<FockDistribution> {
    if cutoff > MAX_CUTOFF {
        return Err(Error::CutoffExceeded { requested: cutoff, limit: MAX_CUTOFF });
    }
    let sub = state.reduced(&[mode])?;
    let s = &sub.cov;
    let d = [sub.mean[0], sub.mean[1]];
    // M(z) = (sigma + I) + z (I - sigma)
    let m0 = [[s[(0, 0)] + 1.0, s[(0, 1)]], [s[(1, 0)], s[(1, 1)] + 1.0]];
    let m1 = [[1.0 - s[(0, 0)], -s[(0, 1)]], [-s[(1, 0)], 1.0 - s[(1, 1)]]];
    let q0 = m0[0][0] * m0[1][1] - m0[0][1] * m0[1][0];
    let q1 = m0[0][0] * m1[1][1] + m1[0][0] * m0[1][1] - m0[0][1] * m1[1][0] - m1[0][1] * m0[1][0];
    let q2 = m1[0][0] * m1[1][1] - m1[0][1] * m1[1][0];
    if !(q0 > 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    let quad = |a: [[f64; 2]; 2]| {
        // d^T adj(a) d
        a[1][1] * d[0] * d[0] - (a[0][1] + a[1][0]) * d[0] * d[1] + a[0][0] * d[1] * d[1]
    };
    let (l0, l1) = (quad(m0), quad(m1));

    let len = cutoff + 1;
    let mut inv_q = vec![0.0; len];
    inv_q[0] = 1.0 / q0;
    for n in 1..len {
        let mut acc = q1 * inv_q[n - 1];
        if n >= 2 {
            acc += q2 * inv_q[n - 2];
        }
        inv_q[n] = -acc / q0;
    }
    // log G = ln 2 - (1/2) ln q(z) - (1 - z)(l0 + l1 z) / (2 q(z))
    let mut f = vec![0.0; len];
    f[0] = std::f64::consts::LN_2 - 0.5 * q0.ln();
    for n in 1..len {
        // coefficient n of ln q is (1/n) [z^{n-1}] q'(z)/q(z)
        let mut c = q1 * inv_q[n - 1];
        if n >= 2 {
            c += 2.0 * q2 * inv_q[n - 2];
        }
        f[n] = -0.5 * c / n as f64;
    }
    // (1 - z)(l0 + l1 z) = l0 + (l1 - l0) z - l1 z^2
    let poly = [l0, l1 - l0, -l1];
    for n in 0..len {
        let mut acc = 0.0;
        for (k, pk) in poly.iter().enumerate() {
            if k <= n {
                acc += pk * inv_q[n - k];
            }
        }
        f[n] -= 0.5 * acc;
    }
    let mut h = vec![0.0; len];
    h[0] = f[0].exp();
    for n in 1..len {
        let acc: f64 = (1..=n).map(|k| k as f64 * f[k] * h[n - k]).sum();
        h[n] = acc / n as f64;
    }
    Ok(FockDistribution::from_truncated(h))
}

/// Joint distribution of transmitted and reflected photon numbers when `n` photons meet a beam
/// splitter of transmission `t`. Entries are (transmitted, reflected, probability).
pub fn fock_split(n: usize, t: f64) -> Result<Vec<(usize, usize, f64)>> {
    check_unit("T", t)?;
    Ok(binomial_pmf(n, t).into_iter().enumerate().map(|(k, p)| (k, n - k, p)).collect())
}
