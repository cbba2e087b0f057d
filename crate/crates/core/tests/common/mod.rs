#![allow(dead_code)]

use entropic_orl::{FeatureMap, FiniteMdp, StochasticPolicy};
use rand::Rng;

/// Random probability vector with some exact zeros.
pub fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                rng.gen::<f64>() + 1e-3
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.gen_range(0..n)] = 1.0;
    }
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    v
}

/// Random step-dependent MDP.
pub fn random_mdp<R: Rng>(ns: usize, na: usize, horizon: usize, rng: &mut R) -> FiniteMdp<f64> {
    let transitions = (0..horizon)
        .map(|_| {
            (0..ns)
                .map(|_| (0..na).map(|_| random_simplex(ns, rng)).collect())
                .collect()
        })
        .collect();
    let rewards = (0..horizon)
        .map(|_| {
            (0..ns)
                .map(|_| (0..na).map(|_| rng.gen::<f64>()).collect())
                .collect()
        })
        .collect();
    FiniteMdp::new(transitions, rewards, rng.gen_range(0..ns)).unwrap()
}

pub fn random_policy<R: Rng>(mdp: &FiniteMdp<f64>, rng: &mut R) -> StochasticPolicy<f64> {
    let probs = (0..mdp.horizon())
        .map(|_| {
            (0..mdp.num_states())
                .map(|_| random_simplex(mdp.num_actions(), rng))
                .collect()
        })
        .collect();
    StochasticPolicy::new(probs, "random").unwrap()
}

/// Random sizes with `|S| ≤ 4`, `|A| ≤ 3`, `H ≤ 6` and at most `max_leaves` trajectories.
pub fn random_sizes<R: Rng>(rng: &mut R, max_leaves: f64) -> (usize, usize, usize) {
    loop {
        let (ns, na, h) = (
            rng.gen_range(1..=4),
            rng.gen_range(1..=3),
            rng.gen_range(1..=6),
        );
        if ((ns * na) as f64).powi(h as i32) <= max_leaves {
            return (ns, na, h);
        }
    }
}

/// Random features of dimension `dim` with norms in `(0, 1]`.
pub fn random_feature_map<R: Rng>(
    ns: usize,
    na: usize,
    dim: usize,
    rng: &mut R,
) -> FeatureMap<f64> {
    let table: Vec<Vec<f64>> = (0..ns * na)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            let scale = rng.gen_range(0.2..=1.0) / n;
            v.into_iter().map(|x| x * scale).collect()
        })
        .collect();
    FeatureMap::from_fn(ns, na, dim, |s, a| table[s * na + a].clone()).unwrap()
}
