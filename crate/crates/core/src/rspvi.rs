//! Risk-sensitive pessimistic value iteration (RSPVI).
//!
//! For `h = H, …, 1` the learner fits two ridge regressions on the step-`h`
//! samples, one for the reward and one for the shifted-and-scaled next-step
//! value, then undoes the shift, subtracts the elliptical bonus and takes the
//! greedy action of the resulting pessimistic `Q̂_h`.

use thiserror::Error;

use crate::dp::{greedy_action, shift_scale_unchecked, DpError, RiskParams};
use crate::mdp::{FeatureMap, MdpError, OfflineDataset, StochasticPolicy};
use crate::regression::{bonus, ridge_solve, GramFactor, RegressionError};
use crate::scalar::{clip, dot, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RspviError {
    #[error(transparent)]
    Risk(#[from] DpError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("dataset horizon {dataset} differs from H={params}")]
    HorizonMismatch { dataset: usize, params: usize },
    #[error("trajectory {index} visits (s={state}, a={action}) outside the feature map grid")]
    OutOfGrid {
        index: usize,
        state: usize,
        action: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
}

/// How the bonus scale `γ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode<T> {
    /// Use the given value as is.
    Fixed(T),
    /// `c · d · R_β · sqrt(ζ)`, no coverage assumption.
    Thm1,
    /// `c · sqrt(d ζ) · R_β`, under data coverage.
    Thm2,
    /// `c · sqrt(d ζ)`, for the variance-weighted learner.
    Thm3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoConfig<T> {
    /// Ridge regulariser; `None` selects [`default_lambda`].
    pub lambda: Option<T>,
    pub gamma: GammaMode<T>,
    /// Confidence level `δ ∈ (0, 1)` entering `ζ`.
    pub delta: T,
    /// Multiplier `c` on the theory-shaped `γ`.
    pub gamma_constant: T,
}

impl<T: Scalar> Default for AlgoConfig<T> {
    fn default() -> Self {
        Self {
            lambda: None,
            gamma: GammaMode::Thm2,
            delta: T::lit(0.1),
            gamma_constant: T::one(),
        }
    }
}

impl<T: Scalar> AlgoConfig<T> {
    pub fn validate(&self) -> Result<(), RspviError> {
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(RspviError::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if let Some(l) = self.lambda {
            if !(l > T::zero() && l.is_finite()) {
                return Err(RspviError::InvalidConfig(format!(
                    "lambda must be positive, got {l}"
                )));
            }
        }
        if !(self.gamma_constant >= T::zero() && self.gamma_constant.is_finite()) {
            return Err(RspviError::InvalidConfig(format!(
                "gamma constant must be non-negative, got {}",
                self.gamma_constant
            )));
        }
        if let GammaMode::Fixed(g) = self.gamma {
            if !(g >= T::zero() && g.is_finite()) {
                return Err(RspviError::InvalidConfig(format!(
                    "gamma must be non-negative, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// `λ = exp(−2|β|)`.
pub fn default_lambda<T: Scalar>(params: &RiskParams<T>) -> T {
    (-T::lit(2.0) * params.abs_beta()).exp()
}

/// Bonus scale for `d` features, `k` trajectories and confidence `delta`,
/// with `ζ = log(3 d H K exp(|β|) / δ)`.
pub fn default_gamma<T: Scalar>(
    d: usize,
    k: usize,
    params: &RiskParams<T>,
    delta: T,
    c: T,
    mode: GammaMode<T>,
) -> T {
    let d_t = T::lit(d as f64);
    let zeta = || {
        (T::lit(3.0 * d as f64 * params.horizon() as f64 * k as f64) * params.abs_beta().exp()
            / delta)
            .ln()
    };
    match mode {
        GammaMode::Fixed(g) => g,
        GammaMode::Thm1 => c * d_t * params.r_beta() * zeta().sqrt(),
        GammaMode::Thm2 => c * (d_t * zeta()).sqrt() * params.r_beta(),
        GammaMode::Thm3 => c * (d_t * zeta()).sqrt(),
    }
}

/// Pessimistic `Q̂_h(s, a)` from the clipped reward estimate `r̂`, the transition
/// prediction `φᵀŵ_h` and the bonus `Γ_h(s, a)`.
///
/// The intermediate `q` is an estimate of `exp(β Q_h)`:
///
/// * `β > 0`: `q = exp(β(1−h)) [exp(β(r̂−1)) (φᵀŵ + exp(βh)) − Γ]`
/// * `β < 0`: `q = exp(βH) [exp(βr̂) (exp(−βH) − φᵀŵ) + Γ]`
///
/// `q` is clamped to the interval whose image under `(1/β) log` is
/// `[0, H+1−h]` before taking the logarithm, so non-positive `q` maps to 0.
pub fn q_transform<T: Scalar>(r_hat: T, wphi: T, bonus: T, h: usize, params: &RiskParams<T>) -> T {
    let beta = params.beta();
    let horizon = T::lit(params.horizon() as f64);
    let step = T::lit(h as f64);
    let cap = params.value_cap(h);
    let top = (beta * cap).exp();
    let q = if params.is_risk_seeking() {
        (beta * (T::one() - step)).exp()
            * ((beta * (r_hat - T::one())).exp() * (wphi + (beta * step).exp()) - bonus)
    } else {
        (beta * horizon).exp() * ((beta * r_hat).exp() * ((-beta * horizon).exp() - wphi) + bonus)
    };
    let (lo, hi) = if params.is_risk_seeking() {
        (T::one(), top)
    } else {
        (top, T::one())
    };
    // NaN only arises from non-finite inputs; treat it as fully pessimistic.
    let q = if q.is_nan() {
        if params.is_risk_seeking() {
            lo
        } else {
            hi
        }
    } else {
        clip(q, lo, hi)
    };
    clip(q.ln() / beta, T::zero(), cap)
}

/// Learned parameters at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEstimate<T> {
    pub h: usize,
    pub theta_hat: Vec<T>,
    pub w_hat: Vec<T>,
    pub gram: GramFactor<T>,
    pub gamma: T,
}

/// Greedy policy of the pessimistic `Q̂`, with the tables needed to audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedPolicy<T> {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    beta: T,
    lambda: T,
    gamma: T,
    steps: Vec<StepEstimate<T>>,
    // [(h * S + s) * A + a], h zero-based
    q_hat: Vec<T>,
    // [h * S + s], includes V̂_{H+1} ≡ 0
    v_hat: Vec<T>,
    // [h * S + s]
    actions: Vec<usize>,
}

impl<T: Scalar> LearnedPolicy<T> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Regulariser actually used.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Bonus scale actually used.
    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// Per-step estimates, `steps()[h - 1]` for step `h`.
    pub fn steps(&self) -> &[StepEstimate<T>] {
        &self.steps
    }

    pub fn q_hat(&self, h: usize, s: usize, a: usize) -> T {
        self.q_hat[((h - 1) * self.num_states + s) * self.num_actions + a]
    }

    pub fn q_hat_row(&self, h: usize, s: usize) -> &[T] {
        let start = ((h - 1) * self.num_states + s) * self.num_actions;
        &self.q_hat[start..start + self.num_actions]
    }

    /// `V̂_h(s)` for `h ∈ 1..=H+1`.
    pub fn v_hat(&self, h: usize, s: usize) -> T {
        self.v_hat[(h - 1) * self.num_states + s]
    }

    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[(h - 1) * self.num_states + s]
    }

    /// `(1/β) log ⟨exp(β Q̂_h(s, ·)), π̂_h(· | s)⟩`, evaluated relative to the
    /// selected action so that a one-hot `π̂` returns `Q̂_h(s, π̂)` exactly.
    pub fn log_inner_product_value(&self, h: usize, s: usize) -> T {
        let row = self.q_hat_row(h, s);
        let chosen = self.action(h, s);
        let pivot = row[chosen];
        let mass: T = row
            .iter()
            .enumerate()
            .map(|(a, &q)| {
                let p = if a == chosen { T::one() } else { T::zero() };
                if p == T::zero() {
                    T::zero()
                } else {
                    p * (self.beta * (q - pivot)).exp()
                }
            })
            .sum();
        pivot + mass.ln() / self.beta
    }

    /// The learned greedy policy as a Markov policy.
    pub fn to_policy(&self) -> StochasticPolicy<T> {
        let actions: Vec<Vec<usize>> = self
            .actions
            .chunks(self.num_states)
            .map(<[usize]>::to_vec)
            .collect();
        StochasticPolicy::deterministic(&actions, self.num_actions, "learned-greedy")
            .expect("learned actions are in range")
    }
}

pub(crate) fn validate_dataset<T: Scalar>(
    dataset: &OfflineDataset<T>,
    fmap: &FeatureMap<T>,
    params: &RiskParams<T>,
) -> Result<(), RspviError> {
    if dataset.is_empty() {
        return Err(RspviError::EmptyDataset);
    }
    if dataset.horizon() != params.horizon() {
        return Err(RspviError::HorizonMismatch {
            dataset: dataset.horizon(),
            params: params.horizon(),
        });
    }
    for (index, t) in dataset.trajectories().iter().enumerate() {
        for st in &t.steps {
            if st.state >= fmap.num_states() || st.action >= fmap.num_actions() {
                return Err(RspviError::OutOfGrid {
                    index,
                    state: st.state,
                    action: st.action,
                });
            }
        }
    }
    Ok(())
}

/// Backward pass shared by both learners. `weight(h, s, a)` is the regression
/// weight of a step-`h` sample at `(s, a)`; `None` means unit weights.
pub(crate) fn pessimistic_backward_pass<T, W>(
    dataset: &OfflineDataset<T>,
    fmap: &FeatureMap<T>,
    params: &RiskParams<T>,
    lambda: T,
    gamma: T,
    weight: Option<W>,
) -> Result<LearnedPolicy<T>, RspviError>
where
    T: Scalar,
    W: Fn(usize, usize, usize) -> T,
{
    validate_dataset(dataset, fmap, params)?;
    let horizon = params.horizon();
    let (ns, na, d) = (fmap.num_states(), fmap.num_actions(), fmap.dim());
    let trajectories = dataset.trajectories();

    let mut q_hat = vec![T::zero(); horizon * ns * na];
    let mut v_hat = vec![T::zero(); (horizon + 1) * ns];
    let mut actions = vec![0usize; horizon * ns];
    let mut steps = Vec::with_capacity(horizon);

    for h in (1..=horizon).rev() {
        let features: Vec<&[T]> = trajectories
            .iter()
            .map(|t| {
                let st = t.step(h);
                fmap.phi(st.state, st.action)
            })
            .collect();
        let weights: Option<Vec<T>> = weight.as_ref().map(|w| {
            trajectories
                .iter()
                .map(|t| {
                    let st = t.step(h);
                    w(h, st.state, st.action)
                })
                .collect()
        });
        let gram = match &weights {
            Some(ws) => {
                GramFactor::accumulate(d, features.iter().copied().zip(ws.iter().copied()), lambda)?
            }
            None => GramFactor::unweighted(d, features.iter().copied(), lambda)?,
        };

        let rewards: Vec<T> = trajectories.iter().map(|t| t.step(h).reward).collect();
        let targets: Vec<T> = if h == horizon {
            vec![T::zero(); trajectories.len()]
        } else {
            let v_next = &v_hat[h * ns..(h + 1) * ns];
            trajectories
                .iter()
                .map(|t| shift_scale_unchecked(v_next[t.step(h + 1).state], h + 1, params))
                .collect()
        };
        let theta_hat = ridge_solve(&gram, &features, &rewards, weights.as_deref())?.coefficients;
        let w_hat = ridge_solve(&gram, &features, &targets, weights.as_deref())?.coefficients;

        for s in 0..ns {
            let base = ((h - 1) * ns + s) * na;
            for a in 0..na {
                let phi = fmap.phi(s, a);
                let r_hat = clip(dot(phi, &theta_hat), T::zero(), T::one());
                let wphi = dot(phi, &w_hat);
                let gam = bonus(&gram, phi, gamma);
                q_hat[base + a] = q_transform(r_hat, wphi, gam, h, params);
            }
            let best = greedy_action(&q_hat[base..base + na]);
            actions[(h - 1) * ns + s] = best;
            v_hat[(h - 1) * ns + s] = q_hat[base + best];
        }
        steps.push(StepEstimate {
            h,
            theta_hat,
            w_hat,
            gram,
            gamma,
        });
    }
    steps.reverse();

    Ok(LearnedPolicy {
        horizon,
        num_states: ns,
        num_actions: na,
        beta: params.beta(),
        lambda,
        gamma,
        steps,
        q_hat,
        v_hat,
        actions,
    })
}

/// Runs RSPVI on `dataset` with unit-weight regressions.
pub fn rspvi<T: Scalar>(
    dataset: &OfflineDataset<T>,
    fmap: &FeatureMap<T>,
    params: &RiskParams<T>,
    config: &AlgoConfig<T>,
) -> Result<LearnedPolicy<T>, RspviError> {
    config.validate()?;
    let lambda = config.lambda.unwrap_or_else(|| default_lambda(params));
    let gamma = default_gamma(
        fmap.dim(),
        dataset.len(),
        params,
        config.delta,
        config.gamma_constant,
        config.gamma,
    );
    pessimistic_backward_pass(
        dataset,
        fmap,
        params,
        lambda,
        gamma,
        None::<fn(usize, usize, usize) -> T>,
    )
}
