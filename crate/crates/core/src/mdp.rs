//! Episodic finite MDPs, feature maps, behavior policies and offline datasets.
//!
//! Steps are numbered `1..=H` in every public signature, matching the usual
//! episodic convention; storage is zero-based internally.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{dot, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("transition row (h={h}, s={s}, a={a}) sums to {sum}, expected 1")]
    NotStochastic {
        h: usize,
        s: usize,
        a: usize,
        sum: f64,
    },
    #[error("negative or non-finite probability at (h={h}, s={s}, a={a})")]
    InvalidProbability { h: usize, s: usize, a: usize },
    #[error("reward {value} at (h={h}, s={s}, a={a}) is outside [0, 1]")]
    RewardOutOfRange {
        h: usize,
        s: usize,
        a: usize,
        value: f64,
    },
    #[error("initial state {initial} out of range for {num_states} states")]
    InvalidInitialState { initial: usize, num_states: usize },
    #[error("feature vector for (s={s}, a={a}) has norm {norm} > 1")]
    FeatureNorm { s: usize, a: usize, norm: f64 },
    #[error("non-finite feature entry at (s={s}, a={a})")]
    NonFiniteFeature { s: usize, a: usize },
    #[error("policy distribution at (h={h}, s={s}) is not a probability vector")]
    InvalidPolicy { h: usize, s: usize },
    #[error("dataset needs at least {needed} trajectories, got {got}")]
    TooFewTrajectories { needed: usize, got: usize },
    #[error("trajectory {index} has {len} steps, expected {horizon}")]
    TrajectoryLength {
        index: usize,
        len: usize,
        horizon: usize,
    },
}

/// Episodic MDP `(S, A, P, r, H, s_1)` with explicit, possibly step-dependent tables.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp<T> {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    // [((h * S + s) * A + a) * S + s']
    transitions: Vec<T>,
    // [(h * S + s) * A + a]
    rewards: Vec<T>,
    initial_state: usize,
}

impl<T: Scalar> FiniteMdp<T> {
    /// Builds and validates an MDP from `transitions[h][s][a][s']` and `rewards[h][s][a]`.
    ///
    /// Rows within `1e-9` of stochastic are accepted and renormalised.
    pub fn new(
        transitions: Vec<Vec<Vec<Vec<T>>>>,
        rewards: Vec<Vec<Vec<T>>>,
        initial_state: usize,
    ) -> Result<Self, MdpError> {
        let horizon = transitions.len();
        if horizon == 0 {
            return Err(MdpError::EmptyHorizon);
        }
        if rewards.len() != horizon {
            return Err(MdpError::DimensionMismatch(format!(
                "{} transition steps but {} reward steps",
                horizon,
                rewards.len()
            )));
        }
        let num_states = transitions[0].len();
        let num_actions = transitions[0].first().map_or(0, Vec::len);
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::DimensionMismatch(
                "no states or no actions".into(),
            ));
        }
        if initial_state >= num_states {
            return Err(MdpError::InvalidInitialState {
                initial: initial_state,
                num_states,
            });
        }

        let tol = T::validation_tol();
        let mut flat_p = Vec::with_capacity(horizon * num_states * num_actions * num_states);
        let mut flat_r = Vec::with_capacity(horizon * num_states * num_actions);
        for (h, (p_h, r_h)) in transitions.iter().zip(&rewards).enumerate() {
            if p_h.len() != num_states || r_h.len() != num_states {
                return Err(MdpError::DimensionMismatch(format!(
                    "step {} state count",
                    h + 1
                )));
            }
            for (s, (p_hs, r_hs)) in p_h.iter().zip(r_h).enumerate() {
                if p_hs.len() != num_actions || r_hs.len() != num_actions {
                    return Err(MdpError::DimensionMismatch(format!(
                        "step {} state {} action count",
                        h + 1,
                        s
                    )));
                }
                for (a, (row, &r)) in p_hs.iter().zip(r_hs).enumerate() {
                    if row.len() != num_states {
                        return Err(MdpError::DimensionMismatch(format!(
                            "row (h={}, s={}, a={}) has length {}",
                            h + 1,
                            s,
                            a,
                            row.len()
                        )));
                    }
                    if row.iter().any(|&p| !p.is_finite() || p < T::zero()) {
                        return Err(MdpError::InvalidProbability { h: h + 1, s, a });
                    }
                    let sum: T = row.iter().copied().sum();
                    if (sum - T::one()).abs() > tol {
                        return Err(MdpError::NotStochastic {
                            h: h + 1,
                            s,
                            a,
                            sum: sum.to_f64_lossy(),
                        });
                    }
                    flat_p.extend(row.iter().map(|&p| p / sum));
                    if !(r >= T::zero() && r <= T::one()) {
                        return Err(MdpError::RewardOutOfRange {
                            h: h + 1,
                            s,
                            a,
                            value: r.to_f64_lossy(),
                        });
                    }
                    flat_r.push(r);
                }
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            transitions: flat_p,
            rewards: flat_r,
            initial_state,
        })
    }

    /// Time-homogeneous MDP: the same `transitions[s][a][s']` and `rewards[s][a]` at every step.
    pub fn homogeneous(
        horizon: usize,
        transitions: Vec<Vec<Vec<T>>>,
        rewards: Vec<Vec<T>>,
        initial_state: usize,
    ) -> Result<Self, MdpError> {
        if horizon == 0 {
            return Err(MdpError::EmptyHorizon);
        }
        Self::new(
            vec![transitions; horizon],
            vec![rewards; horizon],
            initial_state,
        )
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Next-state distribution `P_h(· | s, a)` for step `h ∈ 1..=H`.
    pub fn transition(&self, h: usize, s: usize, a: usize) -> &[T] {
        let start = (((h - 1) * self.num_states + s) * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    /// Reward `r_h(s, a)` for step `h ∈ 1..=H`.
    pub fn reward(&self, h: usize, s: usize, a: usize) -> T {
        self.rewards[((h - 1) * self.num_states + s) * self.num_actions + a]
    }
}

/// The three-state, two-action ModelWin variant.
///
/// From `S1`, action `a1` moves to `S2`/`S3` with probability 0.5 each;
/// `a2` stays in `S1` with probability 0.6 and otherwise moves to `S2`/`S3`
/// with probability 0.2 each. `S2` and `S3` return to `S1` under both
/// actions. Rewards depend on the state only: 0.5, 1 and 0. Dynamics are the
/// same at every step. States and actions are zero-based (`S1 = 0`, `a1 = 0`).
pub fn model_win<T: Scalar>(horizon: usize) -> Result<FiniteMdp<T>, MdpError> {
    let l = T::lit;
    let back = vec![l(1.0), l(0.0), l(0.0)];
    let transitions = vec![
        vec![vec![l(0.0), l(0.5), l(0.5)], vec![l(0.6), l(0.2), l(0.2)]],
        vec![back.clone(), back.clone()],
        vec![back.clone(), back],
    ];
    let rewards = vec![
        vec![l(0.5), l(0.5)],
        vec![l(1.0), l(1.0)],
        vec![l(0.0), l(0.0)],
    ];
    FiniteMdp::homogeneous(horizon, transitions, rewards, 0)
}

/// Feature map `φ: S × A → R^d`, tabulated over the finite grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    // [(s * A + a) * d + i]
    table: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    /// Evaluates `f` on every `(s, a)` and checks `‖φ(s, a)‖ ≤ 1`.
    pub fn from_fn<F>(
        num_states: usize,
        num_actions: usize,
        dim: usize,
        f: F,
    ) -> Result<Self, MdpError>
    where
        F: Fn(usize, usize) -> Vec<T>,
    {
        if dim == 0 {
            return Err(MdpError::DimensionMismatch(
                "feature dimension must be positive".into(),
            ));
        }
        let mut table = Vec::with_capacity(num_states * num_actions * dim);
        for s in 0..num_states {
            for a in 0..num_actions {
                let phi = f(s, a);
                if phi.len() != dim {
                    return Err(MdpError::DimensionMismatch(format!(
                        "φ({s}, {a}) has length {}, expected {dim}",
                        phi.len()
                    )));
                }
                if phi.iter().any(|x| !x.is_finite()) {
                    return Err(MdpError::NonFiniteFeature { s, a });
                }
                let norm = dot(&phi, &phi).sqrt();
                if norm > T::one() + T::validation_tol() {
                    return Err(MdpError::FeatureNorm {
                        s,
                        a,
                        norm: norm.to_f64_lossy(),
                    });
                }
                table.extend(phi);
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            dim,
            table,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn phi(&self, s: usize, a: usize) -> &[T] {
        let start = (s * self.num_actions + a) * self.dim;
        &self.table[start..start + self.dim]
    }
}

/// Canonical-basis embedding: `d = |S||A|`, `φ(s, a) = e_{s·|A| + a}`.
pub fn tabular_feature_map<T: Scalar>(mdp: &FiniteMdp<T>) -> FeatureMap<T> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let dim = ns * na;
    FeatureMap::from_fn(ns, na, dim, |s, a| {
        let mut phi = vec![T::zero(); dim];
        phi[s * na + a] = T::one();
        phi
    })
    .expect("one-hot features are valid")
}

/// Markov policy with a distribution over actions at every `(h, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy<T> {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    // [(h * S + s) * A + a]
    probs: Vec<T>,
    label: String,
}

impl<T: Scalar> StochasticPolicy<T> {
    /// `probs[h][s][a]`, validated to be probability vectors within tolerance.
    pub fn new(probs: Vec<Vec<Vec<T>>>, label: impl Into<String>) -> Result<Self, MdpError> {
        let horizon = probs.len();
        if horizon == 0 {
            return Err(MdpError::EmptyHorizon);
        }
        let num_states = probs[0].len();
        let num_actions = probs[0].first().map_or(0, Vec::len);
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::DimensionMismatch("empty policy table".into()));
        }
        let tol = T::validation_tol();
        let mut flat = Vec::with_capacity(horizon * num_states * num_actions);
        for (h, p_h) in probs.iter().enumerate() {
            if p_h.len() != num_states {
                return Err(MdpError::DimensionMismatch(format!(
                    "policy step {} state count",
                    h + 1
                )));
            }
            for (s, dist) in p_h.iter().enumerate() {
                if dist.len() != num_actions {
                    return Err(MdpError::DimensionMismatch(format!(
                        "policy (h={}, s={s}) action count",
                        h + 1
                    )));
                }
                let sum: T = dist.iter().copied().sum();
                if dist.iter().any(|&p| !p.is_finite() || p < T::zero())
                    || (sum - T::one()).abs() > tol
                {
                    return Err(MdpError::InvalidPolicy { h: h + 1, s });
                }
                flat.extend(dist.iter().map(|&p| p / sum));
            }
        }
        Ok(Self {
            horizon,
            num_states,
            num_actions,
            probs: flat,
            label: label.into(),
        })
    }

    /// Deterministic policy from `actions[h][s]` (zero-based step index in the outer vector).
    pub fn deterministic(
        actions: &[Vec<usize>],
        num_actions: usize,
        label: impl Into<String>,
    ) -> Result<Self, MdpError> {
        let probs = actions
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&a| {
                        if a >= num_actions {
                            return Err(MdpError::DimensionMismatch(format!(
                                "action {a} out of range for {num_actions} actions"
                            )));
                        }
                        let mut dist = vec![T::zero(); num_actions];
                        dist[a] = T::one();
                        Ok(dist)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(probs, label)
    }

    /// Always plays `action`.
    pub fn constant(mdp: &FiniteMdp<T>, action: usize) -> Result<Self, MdpError> {
        let actions = vec![vec![action; mdp.num_states()]; mdp.horizon()];
        Self::deterministic(
            &actions,
            mdp.num_actions(),
            format!("always-a{}", action + 1),
        )
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

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `π_h(· | s)` for `h ∈ 1..=H`.
    pub fn probs(&self, h: usize, s: usize) -> &[T] {
        let start = ((h - 1) * self.num_states + s) * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }

    pub(crate) fn matches(&self, mdp: &FiniteMdp<T>) -> bool {
        self.horizon == mdp.horizon()
            && self.num_states == mdp.num_states()
            && self.num_actions == mdp.num_actions()
    }
}

/// Uniformly random behavior policy.
pub fn uniform_policy<T: Scalar>(mdp: &FiniteMdp<T>) -> StochasticPolicy<T> {
    let na = mdp.num_actions();
    let p = T::one() / T::lit(na as f64);
    StochasticPolicy {
        horizon: mdp.horizon(),
        num_states: mdp.num_states(),
        num_actions: na,
        probs: vec![p; mdp.horizon() * mdp.num_states() * na],
        label: "uniform".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep<T> {
    pub state: usize,
    pub action: usize,
    pub reward: T,
}

/// One episode of exactly `H` `(state, action, reward)` records.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub steps: Vec<TrajectoryStep<T>>,
}

impl<T> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Record at step `h ∈ 1..=H`.
    pub fn step(&self, h: usize) -> &TrajectoryStep<T> {
        &self.steps[h - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub policy_id: String,
}

/// `K ≥ 1` trajectories sharing horizon `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset<T> {
    horizon: usize,
    trajectories: Vec<Trajectory<T>>,
    provenance: Provenance,
}

impl<T: Scalar> OfflineDataset<T> {
    pub fn new(
        horizon: usize,
        trajectories: Vec<Trajectory<T>>,
        provenance: Provenance,
    ) -> Result<Self, MdpError> {
        if horizon == 0 {
            return Err(MdpError::EmptyHorizon);
        }
        if trajectories.is_empty() {
            return Err(MdpError::TooFewTrajectories { needed: 1, got: 0 });
        }
        for (index, t) in trajectories.iter().enumerate() {
            if t.len() != horizon {
                return Err(MdpError::TrajectoryLength {
                    index,
                    len: t.len(),
                    horizon,
                });
            }
        }
        Ok(Self {
            horizon,
            trajectories,
            provenance,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[Trajectory<T>] {
        &self.trajectories
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

fn sample_index<T: Scalar, R: Rng + ?Sized>(dist: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in dist.iter().enumerate() {
        let p = p.to_f64_lossy();
        if p <= 0.0 {
            continue;
        }
        last_positive = i;
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum.
    last_positive
}

/// Rolls out one episode from the initial state.
pub fn sample_trajectory<T: Scalar, R: Rng + ?Sized>(
    mdp: &FiniteMdp<T>,
    policy: &StochasticPolicy<T>,
    rng: &mut R,
) -> Result<Trajectory<T>, MdpError> {
    if !policy.matches(mdp) {
        return Err(MdpError::DimensionMismatch(
            "policy does not match MDP dimensions".into(),
        ));
    }
    let mut state = mdp.initial_state();
    let mut steps = Vec::with_capacity(mdp.horizon());
    for h in 1..=mdp.horizon() {
        let action = sample_index(policy.probs(h, state), rng);
        steps.push(TrajectoryStep {
            state,
            action,
            reward: mdp.reward(h, state, action),
        });
        state = sample_index(mdp.transition(h, state, action), rng);
    }
    Ok(Trajectory { steps })
}

/// Collects `k` independent episodes with a ChaCha8 generator seeded by `seed`.
pub fn generate_dataset<T: Scalar>(
    mdp: &FiniteMdp<T>,
    policy: &StochasticPolicy<T>,
    k: usize,
    seed: u64,
) -> Result<OfflineDataset<T>, MdpError> {
    if k == 0 {
        return Err(MdpError::TooFewTrajectories { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories = (0..k)
        .map(|_| sample_trajectory(mdp, policy, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    OfflineDataset::new(
        mdp.horizon(),
        trajectories,
        Provenance {
            seed: Some(seed),
            policy_id: policy.label().to_string(),
        },
    )
}

/// Random partition of `0..k` into sorted index sets of sizes `⌊k/2⌋` and `⌈k/2⌉`.
pub fn split_indices<R: Rng + ?Sized>(k: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut first = order[..k / 2].to_vec();
    let mut second = order[k / 2..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

/// Splits the trajectories at random into halves of sizes `⌊K/2⌋` and `⌈K/2⌉`.
pub fn split_dataset<T: Scalar, R: Rng + ?Sized>(
    dataset: &OfflineDataset<T>,
    rng: &mut R,
) -> Result<(OfflineDataset<T>, OfflineDataset<T>), MdpError> {
    if dataset.len() < 2 {
        return Err(MdpError::TooFewTrajectories {
            needed: 2,
            got: dataset.len(),
        });
    }
    let (first, second) = split_indices(dataset.len(), rng);
    let pick = |idx: &[usize]| {
        OfflineDataset::new(
            dataset.horizon,
            idx.iter()
                .map(|&i| dataset.trajectories[i].clone())
                .collect(),
            dataset.provenance.clone(),
        )
    };
    Ok((pick(&first)?, pick(&second)?))
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid dataset: {0}")]
    Validation(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    #[serde(rename = "H")]
    horizon: usize,
    #[serde(rename = "K")]
    k: usize,
    seed: Option<u64>,
    policy_id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    steps: Vec<(usize, usize, f64)>,
}

/// Writes a JSON-lines file: one header object `{H, K, seed, policy_id}`,
/// then one `{"steps": [[state, action, reward], ...]}` object per trajectory.
pub fn save_dataset<T: Scalar>(
    dataset: &OfflineDataset<T>,
    path: impl AsRef<Path>,
) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = Header {
        horizon: dataset.horizon,
        k: dataset.len(),
        seed: dataset.provenance.seed,
        policy_id: dataset.provenance.policy_id.clone(),
    };
    let to_io = |e: serde_json::Error| DatasetError::Io(e.into());
    serde_json::to_writer(&mut out, &header).map_err(to_io)?;
    out.write_all(b"\n")?;
    for t in &dataset.trajectories {
        let line = Line {
            steps: t
                .steps
                .iter()
                .map(|st| (st.state, st.action, st.reward.to_f64_lossy()))
                .collect(),
        };
        serde_json::to_writer(&mut out, &line).map_err(to_io)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<OfflineDataset<T>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let parse_err = |line: usize, e: serde_json::Error| DatasetError::Parse {
        line,
        message: e.to_string(),
    };

    let (n, first) = lines.next().ok_or_else(|| DatasetError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let header: Header = serde_json::from_str(&first?).map_err(|e| parse_err(n, e))?;

    let mut trajectories = Vec::with_capacity(header.k);
    for (n, text) in lines {
        let line: Line = serde_json::from_str(&text?).map_err(|e| parse_err(n, e))?;
        if line.steps.len() != header.horizon {
            return Err(DatasetError::Validation(format!(
                "line {n}: trajectory has {} steps but header says H={}",
                line.steps.len(),
                header.horizon
            )));
        }
        let steps = line
            .steps
            .into_iter()
            .map(|(state, action, r)| {
                if !(0.0..=1.0).contains(&r) {
                    return Err(DatasetError::Validation(format!(
                        "line {n}: reward {r} outside [0, 1]"
                    )));
                }
                Ok(TrajectoryStep {
                    state,
                    action,
                    reward: T::lit(r),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        trajectories.push(Trajectory { steps });
    }
    if trajectories.len() != header.k {
        return Err(DatasetError::Validation(format!(
            "header says K={} but file holds {} trajectories",
            header.k,
            trajectories.len()
        )));
    }
    OfflineDataset::new(
        header.horizon,
        trajectories,
        Provenance {
            seed: header.seed,
            policy_id: header.policy_id,
        },
    )
    .map_err(|e| DatasetError::Validation(e.to_string()))
}
