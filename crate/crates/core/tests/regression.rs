use entropic_orl::{bonus, ridge_solve, GramFactor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_vector<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn naive_gram(d: usize, rows: &[Vec<f64>], weights: &[f64], lambda: f64) -> Vec<f64> {
    let mut g = vec![0.0; d * d];
    for (phi, w) in rows.iter().zip(weights) {
        for r in 0..d {
            for c in 0..d {
                g[r * d + c] += w * phi[r] * phi[c];
            }
        }
    }
    for i in 0..d {
        g[i * d + i] += lambda;
    }
    g
}

#[test]
fn factor_reconstructs_gram() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 6;
    let rows: Vec<Vec<f64>> = (0..1000).map(|_| unit_vector(d, &mut rng)).collect();
    let g = GramFactor::unweighted(d, rows.iter().map(Vec::as_slice), 0.1).unwrap();
    let naive = naive_gram(d, &rows, &vec![1.0; rows.len()], 0.1);
    let frob: f64 = g
        .reconstruct()
        .iter()
        .zip(&naive)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(frob <= 1e-9, "{frob}");
    for r in 0..d {
        for c in r + 1..d {
            assert_eq!(g.factor_entry(r, c), 0.0);
        }
    }
}

#[test]
fn tabular_features_recover_sample_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = 5;
    let basis: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let idx: Vec<usize> = (0..2000).map(|_| rng.gen_range(0..d)).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| i as f64 + rng.gen::<f64>()).collect();
    let feats: Vec<&[f64]> = idx.iter().map(|&i| basis[i].as_slice()).collect();
    let g = GramFactor::unweighted(d, feats.iter().copied(), 1e-8).unwrap();
    let fit = ridge_solve(&g, &feats, &ys, None).unwrap();
    for (i, b) in basis.iter().enumerate().take(d) {
        let (sum, n) = idx
            .iter()
            .zip(&ys)
            .filter(|(&j, _)| j == i)
            .fold((0.0, 0), |(s, n), (_, y)| (s + y, n + 1));
        assert!((fit.coefficients[i] - sum / n as f64).abs() <= 1e-6);
        assert!((fit.predict(b) - sum / n as f64).abs() <= 1e-6);
    }
}

#[test]
fn scaled_weights_match_scaled_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 4;
    let rows: Vec<Vec<f64>> = (0..300).map(|_| unit_vector(d, &mut rng)).collect();
    let ys: Vec<f64> = (0..300).map(|_| rng.gen::<f64>() * 10.0).collect();
    let feats: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    for c in [0.01, 0.5, 7.0, 250.0] {
        let lambda = 0.3;
        let ws = vec![c; rows.len()];
        let weighted =
            GramFactor::accumulate(d, feats.iter().copied().zip(ws.iter().copied()), lambda)
                .unwrap();
        let a = ridge_solve(&weighted, &feats, &ys, Some(&ws)).unwrap();
        let plain = GramFactor::unweighted(d, feats.iter().copied(), lambda / c).unwrap();
        let b = ridge_solve(&plain, &feats, &ys, None).unwrap();
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((x - y).abs() <= 1e-10, "c={c}: {x} vs {y}");
        }
    }
}

#[test]
fn normal_equations_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let d = rng.gen_range(1..=8);
        let n = rng.gen_range(0..40);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| unit_vector(d, &mut rng)).collect();
        let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..100.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let lambda = 10f64.powf(rng.gen_range(-3.0..1.0));
        let feats: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let g = GramFactor::accumulate(d, feats.iter().copied().zip(ws.iter().copied()), lambda)
            .unwrap();
        let fit = ridge_solve(&g, &feats, &ys, Some(&ws)).unwrap();
        let lhs = g.apply(&fit.coefficients);
        let mut rhs = vec![0.0; d];
        for ((phi, w), y) in rows.iter().zip(&ws).zip(&ys) {
            for r in 0..d {
                rhs[r] += w * y * phi[r];
            }
        }
        let scale = rhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() <= 1e-9 * scale, "{l} vs {r}");
        }
    }
}

#[test]
fn bonus_shrinks_when_samples_are_appended() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let d = rng.gen_range(1..=6);
        let mut rows: Vec<Vec<f64>> = (0..rng.gen_range(0..20))
            .map(|_| unit_vector(d, &mut rng))
            .collect();
        let query = unit_vector(d, &mut rng);
        let lambda = 10f64.powf(rng.gen_range(-2.0..1.0));
        let before = GramFactor::unweighted(d, rows.iter().map(Vec::as_slice), lambda).unwrap();
        rows.push(unit_vector(d, &mut rng));
        let after = GramFactor::unweighted(d, rows.iter().map(Vec::as_slice), lambda).unwrap();
        let (b0, b1) = (bonus(&before, &query, 1.0), bonus(&after, &query, 1.0));
        assert!(b1 <= b0 * (1.0 + 1e-12), "{b1} > {b0}");
        assert!(b0 <= (1.0 / lambda).sqrt() * (1.0 + 1e-12));
    }
}

proptest! {
    #[test]
    fn solve_inverts_apply(seed in any::<u64>(), d in 1usize..8, n in 0usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| unit_vector(d, &mut rng)).collect();
        let g = GramFactor::unweighted(d, rows.iter().map(Vec::as_slice), 0.5).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = g.solve(&g.apply(&x));
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let quad: f64 = x.iter().zip(g.solve(&x)).map(|(a, b)| a * b).sum();
        prop_assert!((g.inverse_quad_form(&x) - quad).abs() <= 1e-10);
    }
}
