//! Detection networks of binary single-photon detectors and photon-number-resolving detectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::gauss::{vacuum_projection, FockDistribution, GaussianPure};
use crate::numeric::{binomial, neumaier_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    BalancedTree,
    Cascade,
}

/// Beam-splitter network feeding `n_spads` binary detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingNetwork {
    pub n_spads: usize,
    pub topology: Topology,
    pub overall_efficiency: f64,
    /// Intensity fraction reaching each detector.
    pub fractions: Vec<f64>,
    /// Independent per-window dark-click probability of each detector.
    #[serde(default)]
    pub dark_prob: f64,
}

impl SplittingNetwork {
    pub fn new(n_spads: usize, topology: Topology, overall_efficiency: f64) -> Result<Self> {
        if n_spads < 2 {
            return Err(Error::InvalidParameter(format!("network needs at least 2 detectors, got {n_spads}")));
        }
        if !(overall_efficiency > 0.0 && overall_efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!("efficiency {overall_efficiency} outside (0,1]")));
        }
        if topology == Topology::BalancedTree && !n_spads.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("balanced tree needs a power-of-two detector count, got {n_spads}")));
        }
        let fractions = vec![1.0 / n_spads as f64; n_spads];
        Ok(Self { n_spads, topology, overall_efficiency, fractions, dark_prob: 0.0 })
    }

    /// Balanced cascade with unit efficiency, valid for every detector count.
    pub fn balanced(n_spads: usize) -> Result<Self> {
        Self::new(n_spads, Topology::Cascade, 1.0)
    }

    pub fn with_fractions(fractions: Vec<f64>, overall_efficiency: f64) -> Result<Self> {
        let mut net = Self::new(fractions.len(), Topology::Cascade, overall_efficiency)?;
        if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("detector fractions must be non-negative and sum to 1".into()));
        }
        net.fractions = fractions;
        Ok(net)
    }

    pub fn with_dark_prob(mut self, p: f64) -> Result<Self> {
        check_unit("dark_prob", p)?;
        self.dark_prob = p;
        Ok(self)
    }

    pub fn is_balanced(&self) -> bool {
        let f0 = 1.0 / self.n_spads as f64;
        self.fractions.iter().all(|f| (f - f0).abs() < 1e-15)
    }

    /// Transmissions of the cascade beam splitters that realize the detector fractions.
    pub fn cascade_transmissions(&self) -> Vec<f64> {
        let mut rest = 1.0;
        let mut out = Vec::with_capacity(self.n_spads - 1);
        for f in &self.fractions[..self.n_spads - 1] {
            let reflect = if rest > 0.0 { f / rest } else { 0.0 };
            out.push(1.0 - reflect);
            rest -= f;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Hbt,
    MultiplexN,
    TwoModeSpad,
    TwoModePnrd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickProbabilities {
    pub scheme: Scheme,
    pub entries: BTreeMap<String, f64>,
}

impl ClickProbabilities {
    pub fn new(scheme: Scheme, entries: &[(&str, f64)]) -> Self {
        Self { scheme, entries: entries.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.entries.get(key).copied().ok_or_else(|| Error::InvalidParameter(format!("missing click probability entry {key}")))
    }
}

/// No-click probability P_0(tau) of a pure Gaussian state seen through transmission `tau`.
pub fn no_click_gaussian(state: &GaussianPure, tau: f64) -> Result<f64> {
    check_unit("tau", tau)?;
    let s = state.to_state().attenuate(0, tau)?;
    vacuum_projection(&s, &[0])
}

/// Probability that `n` designated detectors of a balanced `n_total`-detector network all click,
/// by inclusion-exclusion over the no-click function `p0`.
pub fn multiplex_click_prob<F: Fn(f64) -> f64>(p0: F, n: usize, n_total: usize) -> Result<f64> {
    if n > n_total || n_total == 0 {
        return Err(Error::InvalidParameter(format!("need 0 <= n <= N, got n={n}, N={n_total}")));
    }
    let terms = (0..=n).map(|k| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * binomial(n, k) * p0(k as f64 / n_total as f64)
    });
    let (sum, abs) = neumaier_sum(terms);
    let bound = 4.0 * f64::EPSILON * abs;
    if bound > 1e-12 {
        return Err(Error::PrecisionLoss { bound });
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Probability that all `n` designated detectors click, from a photon-number distribution.
pub fn designated_clicks(d: &FockDistribution, net: &SplittingNetwork, n: usize) -> Result<f64> {
    let total = net.n_spads;
    if n > total {
        return Err(Error::InvalidParameter(format!("n={n} exceeds detector count {total}")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let eta = net.overall_efficiency;
    let dark = net.dark_prob;
    if net.is_balanced() {
        // occ[c]: probability that exactly c designated detectors have received a photon
        let nf = total as f64;
        let mut occ = vec![0.0; n + 1];
        occ[0] = 1.0;
        let mut acc = 0.0;
        for (m, pm) in d.probs.iter().enumerate() {
            if *pm > 0.0 {
                let hit = if dark > 0.0 { (0..=n).map(|c| occ[c] * dark.powi((n - c) as i32)).sum() } else { occ[n] };
                acc += pm * hit;
            }
            if m + 1 == d.probs.len() {
                break;
            }
            for c in (0..=n).rev() {
                let stay = (1.0 - eta) + eta * (c as f64 + (total - n) as f64) / nf;
                let mut v = occ[c] * stay;
                if c > 0 {
                    v += occ[c - 1] * eta * (n - c + 1) as f64 / nf;
                }
                occ[c] = v;
            }
        }
        return Ok(acc.clamp(0.0, 1.0));
    }
    // unbalanced fractions: inclusion-exclusion over subsets of the designated detectors
    if n > 24 {
        return Err(Error::InvalidParameter("unbalanced networks support at most 24 designated detectors".into()));
    }
    let frac = &net.fractions[..n];
    let mut terms = Vec::with_capacity(1 << n);
    for mask in 0u32..(1u32 << n) {
        let k = mask.count_ones() as i32;
        let f: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| frac[i]).sum();
        let base = 1.0 - eta * f;
        let p0: f64 = d.probs.iter().enumerate().map(|(m, p)| p * base.powi(m as i32)).sum();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(sign * (1.0 - dark).powi(k) * p0);
    }
    Ok(neumaier_sum(terms).0.clamp(0.0, 1.0))
}

/// Success and error probabilities of the order-`n` multiplex criterion.
pub fn multiplex_probabilities(d: &FockDistribution, net: &SplittingNetwork, n: usize) -> Result<ClickProbabilities> {
    if n + 1 > net.n_spads {
        return Err(Error::InvalidParameter(format!("order {n} needs at least {} detectors", n + 1)));
    }
    let pn = designated_clicks(d, net, n)?;
    let pn1 = designated_clicks(d, net, n + 1)?;
    Ok(ClickProbabilities::new(Scheme::MultiplexN, &[("P_n", pn), ("P_n+1", pn1)]))
}

/// Distribution of the total number of clicking detectors, c = 0..=N.
pub fn click_histogram(d: &FockDistribution, net: &SplittingNetwork) -> Result<Vec<f64>> {
    if !net.is_balanced() {
        return Err(Error::InvalidParameter("click histogram needs a balanced network".into()));
    }
    let total = net.n_spads;
    let nf = total as f64;
    let eta = net.overall_efficiency;
    let mut occ = vec![0.0; total + 1];
    occ[0] = 1.0;
    let mut hist = vec![0.0; total + 1];
    for (m, pm) in d.probs.iter().enumerate() {
        if *pm > 0.0 {
            for (c, o) in occ.iter().enumerate() {
                hist[c] += pm * o;
            }
        }
        if m + 1 == d.probs.len() {
            break;
        }
        for c in (0..=total).rev() {
            let mut v = occ[c] * ((1.0 - eta) + eta * c as f64 / nf);
            if c > 0 {
                v += occ[c - 1] * eta * (total - c + 1) as f64 / nf;
            }
            occ[c] = v;
        }
    }
    if net.dark_prob > 0.0 {
        let dark = net.dark_prob;
        let mut out = vec![0.0; total + 1];
        for (c, h) in hist.iter().enumerate() {
            for extra in 0..=(total - c) {
                out[c + extra] += h * binomial(total - c, extra) * dark.powi(extra as i32) * (1.0 - dark).powi((total - c - extra) as i32);
            }
        }
        hist = out;
    }
    Ok(hist)
}

/// Hanbury Brown-Twiss layout: beam splitter `t`, detector efficiency `q`.
pub fn hbt_probabilities(d: &FockDistribution, t: f64, q: f64) -> Result<ClickProbabilities> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("T={t} outside (0,1)")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("q={q} outside (0,1]")));
    }
    let (a, b, ab) = (1.0 - q * t, 1.0 - q * (1.0 - t), 1.0 - q);
    let mut p01 = 0.0;
    let mut p02 = 0.0;
    let mut p00 = 0.0;
    let mut pc = 0.0;
    let (mut pa, mut pb, mut pab) = (1.0, 1.0, 1.0);
    for pm in &d.probs {
        p01 += pm * pa;
        p02 += pm * pb;
        p00 += pm * pab;
        pc += pm * ((1.0 - pa) - (pb - pab));
        pa *= a;
        pb *= b;
        pab *= ab;
    }
    let total: f64 = d.probs.iter().sum();
    Ok(ClickProbabilities::new(
        Scheme::Hbt,
        &[("P0_1", p01), ("P0_2", p02), ("P00", p00), ("Ps1", total - p01), ("Ps2", total - p02), ("Pc", pc.max(0.0))],
    ))
}

/// Joint photon-number distribution of two modes, `probs[n1][n2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub probs: Vec<Vec<f64>>,
    pub tail: f64,
}

impl JointDistribution {
    pub fn from_truncated(probs: Vec<Vec<f64>>) -> Self {
        let s: f64 = probs.iter().flatten().sum();
        Self { probs, tail: (1.0 - s).max(0.0) }
    }

    pub fn product(a: &FockDistribution, b: &FockDistribution) -> Self {
        let probs = a.probs.iter().map(|pa| b.probs.iter().map(|pb| pa * pb).collect()).collect();
        Self::from_truncated(probs)
    }

    /// Two-mode squeezed vacuum sqrt(1-x) sum x^{n/2} |n,n>.
    pub fn two_mode_squeezed(x: f64, cutoff: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("x={x} outside [0,1)")));
        }
        let mut probs = vec![vec![0.0; cutoff + 1]; cutoff + 1];
        let mut p = 1.0 - x;
        for (n, row) in probs.iter_mut().enumerate() {
            row[n] = p;
            p *= x;
        }
        Ok(Self::from_truncated(probs))
    }

    pub fn fock_pair(n1: usize, n2: usize) -> Self {
        let mut probs = vec![vec![0.0; n2 + 1]; n1 + 1];
        probs[n1][n2] = 1.0;
        Self { probs, tail: 0.0 }
    }

    pub fn marginal(&self, mode: usize) -> Vec<f64> {
        if mode == 0 {
            self.probs.iter().map(|r| r.iter().sum()).collect()
        } else {
            let len = self.probs.iter().map(Vec::len).max().unwrap_or(0);
            (0..len).map(|j| self.probs.iter().map(|r| r.get(j).copied().unwrap_or(0.0)).sum()).collect()
        }
    }
}

/// Each mode is split by its own beam splitter onto detectors a_i (transmitted) and b_i.
/// Ps: a_1 and a_2 click; Pe_i: a_i and b_i click.
pub fn two_mode_coincidence_spad(joint: &JointDistribution, t1: f64, t2: f64) -> Result<ClickProbabilities> {
    for (name, t) in [("T1", t1), ("T2", t2)] {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameter(format!("{name}={t} outside (0,1)")));
        }
    }
    let click = |n: usize, t: f64| 1.0 - (1.0 - t).powi(n as i32);
    let both = |n: usize, t: f64| {
        if n == 0 {
            0.0
        } else {
            1.0 - t.powi(n as i32) - (1.0 - t).powi(n as i32)
        }
    };
    let mut ps = 0.0;
    for (n1, row) in joint.probs.iter().enumerate() {
        let c1 = click(n1, t1);
        if c1 == 0.0 {
            continue;
        }
        for (n2, p) in row.iter().enumerate() {
            ps += p * c1 * click(n2, t2);
        }
    }
    let pe1: f64 = joint.marginal(0).iter().enumerate().map(|(n, p)| p * both(n, t1)).sum();
    let pe2: f64 = joint.marginal(1).iter().enumerate().map(|(n, p)| p * both(n, t2)).sum();
    Ok(ClickProbabilities::new(Scheme::TwoModeSpad, &[("Ps", ps), ("Pe1", pe1), ("Pe2", pe2)]))
}

/// Photon-number-resolving detection of both modes: Ps = P(1,1), Pe_i = P(n_i >= 2).
pub fn two_mode_coincidence_pnrd(joint: &JointDistribution) -> Result<ClickProbabilities> {
    if joint.tail > 1e-6 {
        return Err(Error::CutoffTooLow { tail: joint.tail, limit: 1e-6 });
    }
    let ps = joint.probs.get(1).and_then(|r| r.get(1)).copied().unwrap_or(0.0);
    let pe = |m: Vec<f64>| {
        let low = m.first().copied().unwrap_or(0.0) + m.get(1).copied().unwrap_or(0.0);
        (1.0 - low).max(0.0)
    };
    let pe1 = pe(joint.marginal(0));
    let pe2 = pe(joint.marginal(1));
    Ok(ClickProbabilities::new(Scheme::TwoModePnrd, &[("Ps", ps), ("Pe1", pe1), ("Pe2", pe2)]))
}
