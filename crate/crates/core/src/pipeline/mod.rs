//! Data pipeline: ground truth, cleansing, normalization, segmentation,
//! estimator fitting and evaluation.

pub mod cleanse;
pub mod coulomb;
pub mod estimator;
pub mod metrics;
pub mod normalize;
pub mod segment;

pub use cleanse::{cleanse, Channel, CleanseRules, OutlierReason, Removal};
pub use coulomb::{coulomb_count, CoulombConfig, CoulombResult};
pub use estimator::{
    estimate_soc, fit_estimator, holdout_metrics, EstimatorBundle, FitOptions, FitReport, Holdout, ModelKind,
    NetworkReport, Networks, Soc0Policy, SocEstimate, SocModel, BUNDLE_FORMAT,
};
pub use metrics::{evaluate, Metrics};
pub use normalize::{denormalize_soc, normalize, normalize_soc, ChannelRange, NormStats};
pub use segment::{segment_by_regime, Regime, Segment, SegmentConfig};
