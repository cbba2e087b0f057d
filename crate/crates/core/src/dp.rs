//! Exact entropic-risk dynamic programming on finite MDPs.
//!
//! Backward recursions run on exponentiated values `W_h(s) = exp(β V_h(s))`:
//!
//! ```text
//! exp(β Q_h(s, a)) = exp(β r_h(s, a)) · Σ_{s'} P_h(s' | s, a) W_{h+1}(s')
//! W_h(s)           = Σ_a π_h(a | s) exp(β Q_h(s, a))
//! ```
//!
//! and a single logarithm is taken per table entry.

use thiserror::Error;

use crate::mdp::{FiniteMdp, StochasticPolicy};
use crate::scalar::Scalar;

/// Smallest accepted `|β|`; use [`risk_neutral_value`] for the `β → 0` limit.
pub const MIN_ABS_BETA: f64 = 1e-6;
/// Largest accepted `|β| H`, keeping `exp(|β| H)` well inside double precision.
pub const MAX_ABS_BETA_HORIZON: f64 = 30.0;
/// Largest `(|S| |A|)^H` that [`brute_force_value`] will enumerate.
pub const MAX_ENUMERATED_TRAJECTORIES: f64 = 1e7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("|beta| = {0} is below {MIN_ABS_BETA}; use the risk-neutral recursion instead")]
    BetaTooSmall(f64),
    #[error("|beta| * H = {0} exceeds {MAX_ABS_BETA_HORIZON}")]
    Overflow(f64),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("value {value} outside [0, {upper}] at step {h}")]
    OutOfRange { value: f64, h: usize, upper: f64 },
    #[error("step {h} outside 1..={max}")]
    StepOutOfRange { h: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("enumeration of {count:e} items exceeds the limit {limit:e}")]
    EnumerationTooLarge { count: f64, limit: f64 },
}

/// Risk parameter `β ≠ 0` together with the horizon it is used at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams<T> {
    beta: T,
    horizon: usize,
}

impl<T: Scalar> RiskParams<T> {
    pub fn new(beta: T, horizon: usize) -> Result<Self, DpError> {
        if horizon == 0 {
            return Err(DpError::EmptyHorizon);
        }
        let b = beta.to_f64_lossy();
        if !b.is_finite() || b.abs() < MIN_ABS_BETA {
            return Err(DpError::BetaTooSmall(b));
        }
        let bh = b.abs() * horizon as f64;
        if bh > MAX_ABS_BETA_HORIZON {
            return Err(DpError::Overflow(bh));
        }
        Ok(Self { beta, horizon })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn abs_beta(&self) -> T {
        self.beta.abs()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_risk_seeking(&self) -> bool {
        self.beta > T::zero()
    }

    /// `R_β = exp(|β| H) − 1`, the range of shifted-and-scaled targets.
    pub fn r_beta(&self) -> T {
        (self.abs_beta() * T::lit(self.horizon as f64)).exp_m1()
    }

    /// Upper end `H + 1 − h` of the value range at step `h`.
    pub fn value_cap(&self, h: usize) -> T {
        T::lit((self.horizon + 1 - h) as f64)
    }
}

pub(crate) fn shift_scale_unchecked<T: Scalar>(f: T, h: usize, params: &RiskParams<T>) -> T {
    let beta = params.beta();
    let g = (beta * f).exp_m1();
    if params.is_risk_seeking() {
        (beta * T::lit((h - 1) as f64)).exp() * g
    } else {
        -(-beta * T::lit(params.horizon() as f64)).exp() * g
    }
}

/// Shifting-and-scaling transform of a value `f ∈ [0, H+1−h]` at step `h ∈ 1..=H+1`:
///
/// * `β > 0`: `exp(β(h−1)) (exp(β f) − 1)`
/// * `β < 0`: `−exp(−β H) (exp(β f) − 1)`
///
/// The image is `[0, exp(|β| H) − 1]` for every step and sign of `β`.
pub fn shift_scale<T: Scalar>(f: T, h: usize, params: &RiskParams<T>) -> Result<T, DpError> {
    let max_h = params.horizon() + 1;
    if h == 0 || h > max_h {
        return Err(DpError::StepOutOfRange { h, max: max_h });
    }
    let upper = params.value_cap(h);
    if !(f >= T::zero() && f <= upper) {
        return Err(DpError::OutOfRange {
            value: f.to_f64_lossy(),
            h,
            upper: upper.to_f64_lossy(),
        });
    }
    Ok(shift_scale_unchecked(f, h, params))
}

/// `Q_h(s, a)` and `V_h(s)` tables; `V_{H+1} ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable<T> {
    beta: T,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    // [(h * S + s) * A + a], h zero-based
    q: Vec<T>,
    // [h * S + s], h zero-based, includes the terminal row
    v: Vec<T>,
}

impl<T: Scalar> ValueTable<T> {
    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `Q_h(s, a)` for `h ∈ 1..=H+1`.
    pub fn q(&self, h: usize, s: usize, a: usize) -> T {
        if h == self.horizon + 1 {
            return T::zero();
        }
        self.q[((h - 1) * self.num_states + s) * self.num_actions + a]
    }

    /// `Q_h(s, ·)` for `h ∈ 1..=H`.
    pub fn q_row(&self, h: usize, s: usize) -> &[T] {
        let start = ((h - 1) * self.num_states + s) * self.num_actions;
        &self.q[start..start + self.num_actions]
    }

    /// `V_h(s)` for `h ∈ 1..=H+1`.
    pub fn v(&self, h: usize, s: usize) -> T {
        self.v[(h - 1) * self.num_states + s]
    }

    /// Whether `a` maximises `Q_h(s, ·)` under the same tie tolerance as the greedy rule.
    pub fn is_greedy(&self, h: usize, s: usize, a: usize) -> bool {
        let row = self.q_row(h, s);
        row[a] >= tie_cutoff(row)
    }
}

fn tie_cutoff<T: Scalar>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    max - T::tie_tol() * T::one().max(max.abs())
}

/// Lowest-index action whose value is within [`Scalar::tie_tol`] (relative) of the maximum.
pub(crate) fn greedy_action<T: Scalar>(row: &[T]) -> usize {
    let cutoff = tie_cutoff(row);
    row.iter().position(|&q| q >= cutoff).unwrap_or(0)
}

fn backward_pass<T, F>(mdp: &FiniteMdp<T>, params: &RiskParams<T>, mut weigh: F) -> ValueTable<T>
where
    T: Scalar,
    // (h, s, Q_h(s, ·), exp(β Q_h(s, ·))) -> exp(β V_h(s))
    F: FnMut(usize, usize, &[T], &[T]) -> T,
{
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let beta = params.beta();
    let mut q = vec![T::zero(); horizon * ns * na];
    let mut v = vec![T::zero(); (horizon + 1) * ns];
    let mut w_next = vec![T::one(); ns];
    let mut w_cur = vec![T::zero(); ns];
    let mut exp_q = vec![T::zero(); na];
    for h in (1..=horizon).rev() {
        for s in 0..ns {
            let base = ((h - 1) * ns + s) * na;
            for a in 0..na {
                let cont: T = mdp
                    .transition(h, s, a)
                    .iter()
                    .zip(&w_next)
                    .map(|(&p, &w)| p * w)
                    .sum();
                exp_q[a] = (beta * mdp.reward(h, s, a)).exp() * cont;
                q[base + a] = exp_q[a].ln() / beta;
            }
            w_cur[s] = weigh(h, s, &q[base..base + na], &exp_q);
            v[(h - 1) * ns + s] = w_cur[s].ln() / beta;
        }
        std::mem::swap(&mut w_next, &mut w_cur);
    }
    ValueTable {
        beta,
        horizon,
        num_states: ns,
        num_actions: na,
        q,
        v,
    }
}

fn check_horizon<T: Scalar>(mdp: &FiniteMdp<T>, params: &RiskParams<T>) -> Result<(), DpError> {
    if mdp.horizon() != params.horizon() {
        return Err(DpError::DimensionMismatch(format!(
            "MDP horizon {} but risk parameters use H={}",
            mdp.horizon(),
            params.horizon()
        )));
    }
    Ok(())
}

fn check_policy<T: Scalar>(
    mdp: &FiniteMdp<T>,
    policy: &StochasticPolicy<T>,
) -> Result<(), DpError> {
    if policy.horizon() != mdp.horizon()
        || policy.num_states() != mdp.num_states()
        || policy.num_actions() != mdp.num_actions()
    {
        return Err(DpError::DimensionMismatch(
            "policy does not match MDP dimensions".into(),
        ));
    }
    Ok(())
}

/// Optimal `Q*`, `V*` and a deterministic greedy optimal policy (ties to the lowest action).
pub fn optimal_values<T: Scalar>(
    mdp: &FiniteMdp<T>,
    params: &RiskParams<T>,
) -> Result<(ValueTable<T>, StochasticPolicy<T>), DpError> {
    check_horizon(mdp, params)?;
    let mut actions = vec![vec![0usize; mdp.num_states()]; mdp.horizon()];
    let table = backward_pass(mdp, params, |h, s, q, exp_q| {
        let a = greedy_action(q);
        actions[h - 1][s] = a;
        exp_q[a]
    });
    let policy = StochasticPolicy::deterministic(&actions, mdp.num_actions(), "optimal-greedy")
        .expect("greedy actions are in range");
    Ok((table, policy))
}

/// Exact entropic values of a (possibly stochastic) Markov policy.
pub fn evaluate_policy<T: Scalar>(
    mdp: &FiniteMdp<T>,
    policy: &StochasticPolicy<T>,
    params: &RiskParams<T>,
) -> Result<ValueTable<T>, DpError> {
    check_horizon(mdp, params)?;
    check_policy(mdp, policy)?;
    Ok(backward_pass(mdp, params, |h, s, _, exp_q| {
        policy
            .probs(h, s)
            .iter()
            .zip(exp_q)
            .map(|(&p, &e)| p * e)
            .sum()
    }))
}

/// Calls `visit(probability, total_reward)` for every trajectory with positive probability.
pub fn enumerate_returns<T, F>(
    mdp: &FiniteMdp<T>,
    policy: &StochasticPolicy<T>,
    mut visit: F,
) -> Result<(), DpError>
where
    T: Scalar,
    F: FnMut(T, T),
{
    check_policy(mdp, policy)?;
    let count = ((mdp.num_states() * mdp.num_actions()) as f64).powi(mdp.horizon() as i32);
    if count > MAX_ENUMERATED_TRAJECTORIES {
        return Err(DpError::EnumerationTooLarge {
            count,
            limit: MAX_ENUMERATED_TRAJECTORIES,
        });
    }

    fn walk<T: Scalar, F: FnMut(T, T)>(
        mdp: &FiniteMdp<T>,
        policy: &StochasticPolicy<T>,
        h: usize,
        s: usize,
        prob: T,
        total: T,
        visit: &mut F,
    ) {
        if h > mdp.horizon() {
            visit(prob, total);
            return;
        }
        for (a, &pa) in policy.probs(h, s).iter().enumerate() {
            if pa <= T::zero() {
                continue;
            }
            let total = total + mdp.reward(h, s, a);
            if h == mdp.horizon() {
                visit(prob * pa, total);
                continue;
            }
            for (s2, &ps) in mdp.transition(h, s, a).iter().enumerate() {
                if ps > T::zero() {
                    walk(mdp, policy, h + 1, s2, prob * pa * ps, total, visit);
                }
            }
        }
    }

    walk(
        mdp,
        policy,
        1,
        mdp.initial_state(),
        T::one(),
        T::zero(),
        &mut visit,
    );
    Ok(())
}

/// `(1/β) log E[exp(β Σ_h r_h)]` from the initial state, by enumerating every trajectory.
///
/// Independent of the backward recursion; used as its oracle.
pub fn brute_force_value<T: Scalar>(
    mdp: &FiniteMdp<T>,
    policy: &StochasticPolicy<T>,
    params: &RiskParams<T>,
) -> Result<T, DpError> {
    check_horizon(mdp, params)?;
    let beta = params.beta();
    let mut acc = T::zero();
    enumerate_returns(mdp, policy, |p, total| acc = acc + p * (beta * total).exp())?;
    Ok(acc.ln() / beta)
}

/// Maximum of [`brute_force_value`] over every deterministic Markov policy.
///
/// Fails when `|A|^(|S| H)` exceeds `max_policies`.
pub fn brute_force_optimal_value<T: Scalar>(
    mdp: &FiniteMdp<T>,
    params: &RiskParams<T>,
    max_policies: usize,
) -> Result<T, DpError> {
    check_horizon(mdp, params)?;
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let digits = ns * horizon;
    let count = (na as f64).powi(digits as i32);
    if count > max_policies as f64 {
        return Err(DpError::EnumerationTooLarge {
            count,
            limit: max_policies as f64,
        });
    }
    let mut code = vec![0usize; digits];
    let mut best = T::neg_infinity();
    loop {
        let actions: Vec<Vec<usize>> = code.chunks(ns).map(<[usize]>::to_vec).collect();
        let policy = StochasticPolicy::deterministic(&actions, na, "enumerated")
            .expect("enumerated actions are in range");
        best = best.max(brute_force_value(mdp, &policy, params)?);
        // odometer increment in base |A|
        let mut i = 0;
        while i < digits {
            code[i] += 1;
            if code[i] < na {
                break;
            }
            code[i] = 0;
            i += 1;
        }
        if i == digits {
            return Ok(best);
        }
    }
}

/// Expected total reward of `policy` from the initial state.
pub fn risk_neutral_value<T: Scalar>(
    mdp: &FiniteMdp<T>,
    policy: &StochasticPolicy<T>,
) -> Result<T, DpError> {
    check_policy(mdp, policy)?;
    let ns = mdp.num_states();
    let mut v_next = vec![T::zero(); ns];
    for h in (1..=mdp.horizon()).rev() {
        let v_cur: Vec<T> = (0..ns)
            .map(|s| {
                policy
                    .probs(h, s)
                    .iter()
                    .enumerate()
                    .map(|(a, &pa)| {
                        let cont: T = mdp
                            .transition(h, s, a)
                            .iter()
                            .zip(&v_next)
                            .map(|(&p, &v)| p * v)
                            .sum();
                        pa * (mdp.reward(h, s, a) + cont)
                    })
                    .sum()
            })
            .collect();
        v_next = v_cur;
    }
    Ok(v_next[mdp.initial_state()])
}

/// `V*_1(s_1) − V^π_1(s_1)`.
pub fn suboptimality<T: Scalar>(
    mdp: &FiniteMdp<T>,
    policy: &StochasticPolicy<T>,
    params: &RiskParams<T>,
) -> Result<T, DpError> {
    let (opt, _) = optimal_values(mdp, params)?;
    let eval = evaluate_policy(mdp, policy, params)?;
    let s1 = mdp.initial_state();
    Ok(opt.v(1, s1) - eval.v(1, s1))
}
