//! Variance-aware RSPVI.
//!
//! A variance estimator for the shifted-and-scaled next-step value is fitted on
//! an auxiliary dataset (a separate one, or a random half of the input), and
//! the RSPVI backward pass then runs with regression weights `1 / σ̂²_h(s, a)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dp::{shift_scale_unchecked, RiskParams};
use crate::mdp::{split_dataset, FeatureMap, OfflineDataset};
use crate::regression::{ridge_solve, GramFactor};
use crate::rspvi::{
    default_gamma, pessimistic_backward_pass, rspvi, validate_dataset, AlgoConfig, GammaMode,
    LearnedPolicy, RspviError,
};
use crate::scalar::{clip, dot, Scalar};

/// `λ = (exp(|β|(H+1)) − exp(|β|))⁻²`.
pub fn default_lambda_alg2<T: Scalar>(params: &RiskParams<T>) -> T {
    let span = params.abs_beta().exp() * params.r_beta();
    (span * span).recip()
}

/// `σ̲² = R_β² / d`.
pub fn default_sigma_floor<T: Scalar>(d: usize, params: &RiskParams<T>) -> T {
    let r = params.r_beta();
    r * r / T::lit(d as f64)
}

/// Clipped conditional-variance estimate
/// `σ̂²_h = max{σ̲², {φᵀη̂⁽²⁾}_[0, R_β²] − ({φᵀη̂⁽¹⁾}_[0, R_β])²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimator<T> {
    // [h - 1]
    eta1: Vec<Vec<T>>,
    eta2: Vec<Vec<T>>,
    sigma_floor: T,
    r_beta: T,
    fmap: FeatureMap<T>,
}

impl<T: Scalar> VarianceEstimator<T> {
    /// Estimator that always returns `sigma_floor` (all moment coefficients zero).
    pub fn constant(fmap: &FeatureMap<T>, params: &RiskParams<T>, sigma_floor: T) -> Self {
        let zeros = vec![vec![T::zero(); fmap.dim()]; params.horizon()];
        Self {
            eta1: zeros.clone(),
            eta2: zeros,
            sigma_floor,
            r_beta: params.r_beta(),
            fmap: fmap.clone(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.eta1.len()
    }

    pub fn sigma_floor(&self) -> T {
        self.sigma_floor
    }

    /// First-moment coefficients `η̂⁽¹⁾_h`.
    pub fn first_moment(&self, h: usize) -> &[T] {
        &self.eta1[h - 1]
    }

    /// Second-moment coefficients `η̂⁽²⁾_h`.
    pub fn second_moment(&self, h: usize) -> &[T] {
        &self.eta2[h - 1]
    }

    pub fn estimate(&self, h: usize, s: usize, a: usize) -> T {
        let phi = self.fmap.phi(s, a);
        let r = self.r_beta;
        let m1 = clip(dot(phi, &self.eta1[h - 1]), T::zero(), r);
        let m2 = clip(dot(phi, &self.eta2[h - 1]), T::zero(), r * r);
        self.sigma_floor.max(m2 - m1 * m1)
    }
}

/// Fits the variance estimator on `aux`.
///
/// `V̂^aux` comes from running RSPVI on `aux` with `rspvi_config`; both moment
/// regressions use unit weights and regulariser `lambda`.
pub fn estimate_variance<T: Scalar>(
    aux: &OfflineDataset<T>,
    fmap: &FeatureMap<T>,
    params: &RiskParams<T>,
    sigma_floor: T,
    lambda: T,
    rspvi_config: &AlgoConfig<T>,
) -> Result<VarianceEstimator<T>, RspviError> {
    if !(sigma_floor > T::zero() && sigma_floor.is_finite()) {
        return Err(RspviError::InvalidConfig(format!(
            "variance floor must be positive, got {sigma_floor}"
        )));
    }
    validate_dataset(aux, fmap, params)?;
    let reference = rspvi(aux, fmap, params, rspvi_config)?;
    let horizon = params.horizon();
    let d = fmap.dim();
    let trajectories = aux.trajectories();

    let mut eta1 = Vec::with_capacity(horizon);
    let mut eta2 = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        let features: Vec<&[T]> = trajectories
            .iter()
            .map(|t| {
                let st = t.step(h);
                fmap.phi(st.state, st.action)
            })
            .collect();
        let gram = GramFactor::unweighted(d, features.iter().copied(), lambda)?;
        let first: Vec<T> = if h == horizon {
            vec![T::zero(); trajectories.len()]
        } else {
            trajectories
                .iter()
                .map(|t| {
                    shift_scale_unchecked(
                        reference.v_hat(h + 1, t.step(h + 1).state),
                        h + 1,
                        params,
                    )
                })
                .collect()
        };
        let second: Vec<T> = first.iter().map(|&y| y * y).collect();
        eta1.push(ridge_solve(&gram, &features, &first, None)?.coefficients);
        eta2.push(ridge_solve(&gram, &features, &second, None)?.coefficients);
    }
    Ok(VarianceEstimator {
        eta1,
        eta2,
        sigma_floor,
        r_beta: params.r_beta(),
        fmap: fmap.clone(),
    })
}

/// Where the auxiliary data for variance estimation comes from.
#[derive(Debug, Clone, Copy)]
pub enum AuxSource<'a, T> {
    /// Split the input at random by trajectories: the `⌊K/2⌋` half fits the
    /// variance estimator, the `⌈K/2⌉` half drives the weighted regressions.
    Split { seed: u64 },
    /// A separate, independently collected dataset.
    Explicit(&'a OfflineDataset<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaConfig<T> {
    /// Regulariser of the weighted regressions; `None` selects [`default_lambda_alg2`].
    pub lambda: Option<T>,
    pub gamma: GammaMode<T>,
    pub delta: T,
    pub gamma_constant: T,
    /// `σ̲²`; `None` selects [`default_sigma_floor`].
    pub sigma_floor: Option<T>,
    /// Regulariser of the two moment regressions; `None` reuses the main one.
    pub aux_lambda: Option<T>,
    /// Configuration of the RSPVI run that produces `V̂^aux`.
    pub aux_config: AlgoConfig<T>,
}

impl<T: Scalar> Default for VaConfig<T> {
    fn default() -> Self {
        Self {
            lambda: None,
            gamma: GammaMode::Thm3,
            delta: T::lit(0.1),
            gamma_constant: T::one(),
            sigma_floor: None,
            aux_lambda: None,
            aux_config: AlgoConfig::default(),
        }
    }
}

impl<T: Scalar> VaConfig<T> {
    fn main_config(&self) -> AlgoConfig<T> {
        AlgoConfig {
            lambda: self.lambda,
            gamma: self.gamma,
            delta: self.delta,
            gamma_constant: self.gamma_constant,
        }
    }

    fn resolved_lambda(&self, params: &RiskParams<T>) -> T {
        self.lambda.unwrap_or_else(|| default_lambda_alg2(params))
    }
}

/// Weighted backward pass given an already fitted variance estimator.
pub fn va_rspvi_with_estimator<T: Scalar>(
    dataset: &OfflineDataset<T>,
    estimator: &VarianceEstimator<T>,
    fmap: &FeatureMap<T>,
    params: &RiskParams<T>,
    config: &VaConfig<T>,
) -> Result<LearnedPolicy<T>, RspviError> {
    config.main_config().validate()?;
    if estimator.horizon() != params.horizon() {
        return Err(RspviError::HorizonMismatch {
            dataset: estimator.horizon(),
            params: params.horizon(),
        });
    }
    let lambda = config.resolved_lambda(params);
    let gamma = default_gamma(
        fmap.dim(),
        dataset.len(),
        params,
        config.delta,
        config.gamma_constant,
        config.gamma,
    );
    let weight = |h: usize, s: usize, a: usize| estimator.estimate(h, s, a).recip();
    pessimistic_backward_pass(dataset, fmap, params, lambda, gamma, Some(weight))
}

/// Runs VA-RSPVI end to end.
pub fn va_rspvi<T: Scalar>(
    dataset: &OfflineDataset<T>,
    aux: AuxSource<'_, T>,
    fmap: &FeatureMap<T>,
    params: &RiskParams<T>,
    config: &VaConfig<T>,
) -> Result<LearnedPolicy<T>, RspviError> {
    config.main_config().validate()?;
    config.aux_config.validate()?;
    validate_dataset(dataset, fmap, params)?;
    let split;
    let (aux_data, main_data) = match aux {
        AuxSource::Split { seed } => {
            split = split_dataset(dataset, &mut ChaCha8Rng::seed_from_u64(seed))?;
            (&split.0, &split.1)
        }
        AuxSource::Explicit(aux) => (aux, dataset),
    };
    let floor = config
        .sigma_floor
        .unwrap_or_else(|| default_sigma_floor(fmap.dim(), params));
    let aux_lambda = config
        .aux_lambda
        .unwrap_or_else(|| config.resolved_lambda(params));
    let estimator = estimate_variance(
        aux_data,
        fmap,
        params,
        floor,
        aux_lambda,
        &config.aux_config,
    )?;
    va_rspvi_with_estimator(main_data, &estimator, fmap, params, config)
}
