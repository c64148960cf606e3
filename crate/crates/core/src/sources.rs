//! Parametric source models: emitter ensembles with background noise and a lossy photon-pair cascade.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::click::{two_mode_coincidence_pnrd, two_mode_coincidence_spad, ClickProbabilities, JointDistribution};
use crate::error::{check_nonneg, check_unit, Error, Result};
use crate::gauss::{FockDistribution, PureFockState, SqueezedDisplacedFock};

/// M independent emitters, each emitting one photon with probability `eta`, plus Poissonian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterEnsemble {
    #[serde(rename = "M")]
    pub m: usize,
    pub eta: f64,
    pub nbar: f64,
}

impl EmitterEnsemble {
    pub fn new(m: usize, eta: f64, nbar: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("emitter count must be at least 1".into()));
        }
        check_unit("eta", eta)?;
        check_nonneg("nbar", nbar)?;
        Ok(Self { m, eta, nbar })
    }

    /// Binomial(M, eta) convolved with Poisson(nbar).
    pub fn distribution(&self, cutoff: usize) -> Result<FockDistribution> {
        if cutoff < self.m {
            return Err(Error::CutoffExceeded { requested: self.m, limit: cutoff });
        }
        let signal = FockDistribution::binomial(self.m, self.eta, cutoff)?;
        Ok(signal.convolve(&FockDistribution::poisson(self.nbar, cutoff), cutoff))
    }

    /// No-click probabilities of one detector and of both detectors behind a balanced splitter.
    pub fn hbt_noclick(&self) -> (f64, f64) {
        let m = self.m as i32;
        let p0 = (1.0 - self.eta / 2.0).powi(m) * (-self.nbar / 2.0).exp();
        let p00 = (1.0 - self.eta).powi(m) * (-self.nbar).exp();
        (p0, p00)
    }

    /// Loss maps the ensemble onto another ensemble.
    pub fn attenuate(&self, t: f64) -> Result<Self> {
        check_unit("T", t)?;
        Ok(Self { m: self.m, eta: self.eta * t, nbar: self.nbar * t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Independent Poissonian photons added to the mode.
    #[default]
    PoissonAdditive,
    /// Displacement with amplitude sqrt(nbar) and uniformly random phase.
    PhaseRandomizedDisplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseOrder {
    #[default]
    BeforeLoss,
    AfterLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeOptions {
    pub noise: NoiseModel,
    pub order: NoiseOrder,
    pub cutoff: usize,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self { noise: NoiseModel::default(), order: NoiseOrder::default(), cutoff: 40 }
    }
}

/// Photon pair emitted with probability `eta`, both modes noisy and attenuated by `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeSource {
    pub eta: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub nbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairDetection {
    Spad,
    Pnrd,
}

impl CascadeSource {
    pub fn new(eta: f64, t: f64, nbar: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        check_unit("T", t)?;
        check_nonneg("nbar", nbar)?;
        Ok(Self { eta, t, nbar })
    }
}

fn noise_applied(k: usize, nbar: f64, model: NoiseModel, cutoff: usize) -> Result<FockDistribution> {
    match model {
        NoiseModel::PoissonAdditive => {
            let fock = FockDistribution::fock(k, cutoff)?;
            Ok(fock.convolve(&FockDistribution::poisson(nbar, cutoff), cutoff))
        }
        NoiseModel::PhaseRandomizedDisplacement => {
            // the photon statistics of D(beta)|k> do not depend on the phase of beta
            let s = SqueezedDisplacedFock { n: k, alpha: Complex64::new(nbar.sqrt(), 0.0), xi_mag: 0.0, xi_phase: 0.0 };
            s.photon_distribution(cutoff)
        }
    }
}

/// One mode starting in |k>, passing through noise and loss in the configured order.
pub fn noisy_lossy_mode(k: usize, t: f64, nbar: f64, opts: &CascadeOptions) -> Result<FockDistribution> {
    match opts.order {
        NoiseOrder::BeforeLoss => noise_applied(k, nbar, opts.noise, opts.cutoff)?.attenuate(t),
        NoiseOrder::AfterLoss => {
            let lost = FockDistribution::fock(k, opts.cutoff)?.attenuate(t)?;
            let parts = (0..=k).map(|j| noise_applied(j, nbar, opts.noise, opts.cutoff)).collect::<Result<Vec<_>>>()?;
            FockDistribution::mixture(&lost.probs[..=k], &parts)
        }
    }
}

/// Joint photon distribution of the two cascade modes.
pub fn cascade_joint(c: &CascadeSource, opts: &CascadeOptions) -> Result<JointDistribution> {
    let a0 = noisy_lossy_mode(0, c.t, c.nbar, opts)?;
    let a1 = noisy_lossy_mode(1, c.t, c.nbar, opts)?;
    let probs = (0..a0.probs.len())
        .map(|i| (0..a0.probs.len()).map(|j| c.eta * a1.probs[i] * a1.probs[j] + (1.0 - c.eta) * a0.probs[i] * a0.probs[j]).collect())
        .collect();
    Ok(JointDistribution::from_truncated(probs))
}

pub fn cascade_probabilities(c: &CascadeSource, scheme: PairDetection, opts: &CascadeOptions) -> Result<ClickProbabilities> {
    let joint = cascade_joint(c, opts)?;
    match scheme {
        PairDetection::Spad => two_mode_coincidence_spad(&joint, 0.5, 0.5),
        PairDetection::Pnrd => two_mode_coincidence_pnrd(&joint),
    }
}

/// Probability that the signal mode holds the emitted photon given a click of the idler detector.
pub fn heralded_efficiency(c: &CascadeSource, opts: &CascadeOptions) -> Result<f64> {
    let miss1 = noisy_lossy_mode(1, c.t, c.nbar, opts)?.p(0);
    let miss0 = noisy_lossy_mode(0, c.t, c.nbar, opts)?.p(0);
    let with_photon = c.eta * (1.0 - miss1);
    let herald = with_photon + (1.0 - c.eta) * (1.0 - miss0);
    if !(herald > 0.0) {
        return Err(Error::NoHeraldEvents);
    }
    Ok(with_photon / herald)
}

/// The closed expression eta T [1 - e^{-nT}(1 - T + n T^2)] / [1 - e^{-nT}(1 - eta T + eta n T^2)].
pub fn heralded_efficiency_printed(c: &CascadeSource) -> Result<f64> {
    let (eta, t, n) = (c.eta, c.t, c.nbar);
    let e = (-n * t).exp();
    let den = 1.0 - e * (1.0 - eta * t + eta * n * t * t);
    if !(den > 0.0) {
        return Err(Error::NoHeraldEvents);
    }
    Ok(eta * t * (1.0 - e * (1.0 - t + n * t * t)) / den)
}

/// Signal-mode distribution of eta_s|1><1| + (1-eta_s)|0><0| after noise and loss.
pub fn reduced_signal_state(c: &CascadeSource, heralded: bool, opts: &CascadeOptions) -> Result<FockDistribution> {
    let eta_s = if heralded { heralded_efficiency(c, opts)? } else { c.eta };
    let a0 = noisy_lossy_mode(0, c.t, c.nbar, opts)?;
    let a1 = noisy_lossy_mode(1, c.t, c.nbar, opts)?;
    FockDistribution::mixture(&[1.0 - eta_s, eta_s], &[a0, a1])
}

/// Model parameter file contents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceModel {
    Ensemble {
        #[serde(rename = "M")]
        m: usize,
        eta: f64,
        nbar: f64,
    },
    Cascade {
        eta: f64,
        #[serde(rename = "T")]
        t: f64,
        nbar: f64,
        /// Condition the signal mode on an idler click.
        #[serde(default)]
        heralded: bool,
        #[serde(default)]
        noise: NoiseModel,
        #[serde(default)]
        order: NoiseOrder,
    },
}

impl SourceModel {
    /// The validated cascade, its options and the heralding flag.
    pub fn cascade(&self) -> Result<(CascadeSource, CascadeOptions, bool)> {
        match *self {
            Self::Cascade { eta, t, nbar, heralded, noise, order } => {
                Ok((CascadeSource::new(eta, t, nbar)?, CascadeOptions { noise, order, ..CascadeOptions::default() }, heralded))
            }
            Self::Ensemble { .. } => Err(Error::IncompatibleScheme("a cascade model is required".into())),
        }
    }

    /// Photon-number distribution of the single mode sent to the detectors.
    pub fn signal_distribution(&self) -> Result<FockDistribution> {
        match *self {
            Self::Ensemble { m, eta, nbar } => EmitterEnsemble::new(m, eta, nbar)?.distribution(m + 40 + (20.0 * nbar).ceil() as usize),
            Self::Cascade { .. } => {
                let (c, opts, heralded) = self.cascade()?;
                reduced_signal_state(&c, heralded, &opts)
            }
        }
    }
}
