//! SOC estimation for hybrid battery/supercapacitor packs with a NARX
//! network, plus an equivalent-circuit simulator for synthetic data.
//!
//! Current is positive on discharge throughout.

pub mod baseline;
pub mod error;
pub mod mlp;
pub mod narx;
pub mod pipeline;
pub mod series;
pub mod sim;
pub mod trainer;

pub use baseline::{build_ann_rows, AnnConfig, AnnNetwork};
pub use error::{Error, Result};
pub use mlp::Mlp;
pub use narx::{
    build_open_loop_rows, forward, forward_gradient, predict_closed_loop, predict_open_loop, ClosedLoopState,
    NarxConfig, NarxNetwork, NormalizedSeries, RegressorRow,
};
pub use pipeline::{
    cleanse, coulomb_count, denormalize_soc, estimate_soc, evaluate, fit_estimator, holdout_metrics, normalize,
    segment_by_regime, CleanseRules, CoulombConfig, EstimatorBundle, FitOptions, FitReport, Metrics, ModelKind,
    NormStats, Regime, Segment, SegmentConfig, Soc0Policy, SocEstimate,
};
pub use series::{Device, SampleSeries};
pub use sim::{
    profile_cccv, profile_udds_like, simulate_battery, simulate_sc, CurrentProfile, EcmBatteryParams, NoiseConfig,
    Phase, Preset, ScParams, SimOutput,
};
pub use trainer::{
    lm_jacobian, solve_damped, split_rows, train_ann_baseline, train_narx, StopReason, TrainConfig, TrainReport,
};
