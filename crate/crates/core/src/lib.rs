//! Risk-sensitive offline reinforcement learning under the entropic risk
//! measure `(1/β) log E[exp(β R)]` in linear MDPs.
//!
//! The crate provides
//!
//! * [`mdp`]: episodic finite MDPs, feature maps, behavior policies, trajectory
//!   sampling and JSON-lines offline datasets;
//! * [`dp`]: exact entropic dynamic programming, a brute-force enumeration
//!   oracle and suboptimality measurement;
//! * [`regression`]: (weighted) ridge regression on a Cholesky-factored Gram
//!   matrix and the elliptical uncertainty bonus;
//! * [`rspvi`]: risk-sensitive pessimistic value iteration;
//! * [`va_rspvi`]: its variance-aware variant with an auxiliary-data variance
//!   estimator.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the harness uses.

pub mod dp;
pub mod mdp;
pub mod regression;
pub mod rspvi;
mod scalar;
pub mod va_rspvi;

pub use dp::{
    brute_force_value, evaluate_policy, optimal_values, risk_neutral_value, shift_scale,
    suboptimality, DpError, RiskParams, ValueTable,
};
pub use mdp::{
    generate_dataset, load_dataset, model_win, sample_trajectory, save_dataset, split_dataset,
    tabular_feature_map, uniform_policy, DatasetError, FeatureMap, FiniteMdp, MdpError,
    OfflineDataset, Provenance, StochasticPolicy, Trajectory, TrajectoryStep,
};
pub use regression::{bonus, ridge_solve, GramFactor, RegressionError, RidgeFit};
pub use rspvi::{
    default_gamma, default_lambda, q_transform, rspvi, AlgoConfig, GammaMode, LearnedPolicy,
    RspviError, StepEstimate,
};
pub use scalar::{clip, Scalar};
pub use va_rspvi::{
    default_lambda_alg2, default_sigma_floor, estimate_variance, va_rspvi, va_rspvi_with_estimator,
    AuxSource, VaConfig, VarianceEstimator,
};

pub type FiniteMdp64 = FiniteMdp<f64>;
pub type FeatureMap64 = FeatureMap<f64>;
pub type StochasticPolicy64 = StochasticPolicy<f64>;
pub type OfflineDataset64 = OfflineDataset<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type RiskParams64 = RiskParams<f64>;
pub type ValueTable64 = ValueTable<f64>;
pub type GramFactor64 = GramFactor<f64>;
pub type AlgoConfig64 = AlgoConfig<f64>;
pub type VaConfig64 = VaConfig<f64>;
pub type LearnedPolicy64 = LearnedPolicy<f64>;
pub type VarianceEstimator64 = VarianceEstimator<f64>;

pub type FiniteMdp32 = FiniteMdp<f32>;
pub type RiskParams32 = RiskParams<f32>;
pub type ValueTable32 = ValueTable<f32>;
