//! Photon and phonon click statistics, nonclassicality and quantum non-Gaussianity thresholds.

pub mod click;
pub mod error;
pub mod gauss;
pub mod genuine;
pub mod mcverify;
pub mod nc;
pub mod numeric;
pub mod phonon;
pub mod qng;
pub mod sources;

pub use click::{
    click_histogram, designated_clicks, hbt_probabilities, multiplex_click_prob, multiplex_probabilities, no_click_gaussian,
    two_mode_coincidence_pnrd, two_mode_coincidence_spad, ClickProbabilities, JointDistribution, Scheme, SplittingNetwork, Topology,
};
pub use error::{Error, Result};
pub use gauss::{
    build_gaussian, fock_amplitude_in_gaussian, fock_split, gaussian_photon_distribution, vacuum_projection, FockDistribution, GaussianOp,
    GaussianPure, GaussianState, PureFockState, SqueezedDisplacedFock,
};
pub use genuine::{
    absolute_overlap, absolute_threshold, genuine_model_approx, genuine_model_condition, genuine_threshold_approx, genuine_threshold_curve,
    modulated_core_distribution, AbsoluteThreshold, CoreState, ModulatedCore,
};
pub use mcverify::{
    distance_to_curve, nearest_csv, run_verification, run_verification_multi, Family, NearPoint, SamplerRanges, SamplerSpec, VerifyReport,
    DEFAULT_TOP_K,
};
pub use nc::{alpha_beta, binomial_fano, certify_counts, error_bars_mc, klyshko, AlphaBeta, ClickCounts, ErrorBars, Verdict};
pub use num_complex::Complex64;
pub use phonon::{
    depth_predicate, fisher_information, fock_ratio, metrological_ratio, noisy_fock, rate_evolve, thermal_depth, thermal_drift,
    thermal_map, wigner_radial, wigner_sign_changes, DepthCriterion, DepthOptions, DisplacedDistribution, NoiseMode, NoiseParams,
    RateParams,
};
pub use qng::{
    approx_root, cascade_coincidence_min_t, cascade_unheralded_min_t, coincidence_bound, coincidence_nonclassical, coincidence_qng,
    ensemble_min_eta, ensemble_min_eta_approx, multiplex_witnesses, qng_coarse_bound, qng_threshold_approx, qng_threshold_numeric,
    qng_verdict, qng_verdict_counts, qng_verdict_functional, settled_probs, weak_single_photon_condition, wigner_origin_qng, ApproxPoint,
    ClickKernel, CoarseBound, CurveScheme, Feasibility, GridSpec, ThresholdCurve, APPROX_VALIDITY, CONVENTION_VERSION, KERNEL_CUTOFF,
};
pub use sources::{
    cascade_joint, cascade_probabilities, heralded_efficiency, heralded_efficiency_printed, noisy_lossy_mode, reduced_signal_state,
    CascadeOptions, CascadeSource, EmitterEnsemble, NoiseModel, NoiseOrder, PairDetection, SourceModel,
};
