//! Weighted ridge regression on a Cholesky-factored Gram matrix.
//!
//! `Λ = Σ_τ w_τ φ_τ φ_τᵀ + λ I` is factored as `L Lᵀ` once per build; inverse
//! matrices are never formed, every solve and quadratic form goes through
//! triangular substitution.

use thiserror::Error;

use crate::scalar::{dot, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("regulariser must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("sample {0} has a non-positive or non-finite weight")]
    InvalidWeight(usize),
    #[error("sample {0} has a non-finite feature or target")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Gram matrix is not numerically positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
}

/// Symmetric positive-definite Gram matrix and its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GramFactor<T> {
    dim: usize,
    lambda: T,
    // row-major d×d
    matrix: Vec<T>,
    // row-major lower triangle, zeros above the diagonal
    chol: Vec<T>,
}

impl<T: Scalar> GramFactor<T> {
    /// Builds `Σ_τ w_τ φ_τ φ_τᵀ + λ I` from `(φ_τ, w_τ)` pairs and factors it.
    pub fn accumulate<'a, I>(dim: usize, samples: I, lambda: T) -> Result<Self, RegressionError>
    where
        I: IntoIterator<Item = (&'a [T], T)>,
    {
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(RegressionError::InvalidLambda(lambda.to_f64_lossy()));
        }
        let mut matrix = vec![T::zero(); dim * dim];
        for (i, (phi, w)) in samples.into_iter().enumerate() {
            if phi.len() != dim {
                return Err(RegressionError::DimensionMismatch(format!(
                    "sample {i} has length {}, expected {dim}",
                    phi.len()
                )));
            }
            if !(w > T::zero() && w.is_finite()) {
                return Err(RegressionError::InvalidWeight(i));
            }
            if phi.iter().any(|x| !x.is_finite()) {
                return Err(RegressionError::NonFinite(i));
            }
            for r in 0..dim {
                let wr = w * phi[r];
                if wr == T::zero() {
                    continue;
                }
                let row = &mut matrix[r * dim..r * dim + r + 1];
                for (m, &pc) in row.iter_mut().zip(&phi[..=r]) {
                    *m = *m + wr * pc;
                }
            }
        }
        for r in 0..dim {
            matrix[r * dim + r] = matrix[r * dim + r] + lambda;
            for c in 0..r {
                matrix[c * dim + r] = matrix[r * dim + c];
            }
        }
        let chol = cholesky(&matrix, dim)?;
        Ok(Self {
            dim,
            lambda,
            matrix,
            chol,
        })
    }

    /// Unit-weight Gram matrix.
    pub fn unweighted<'a, I>(dim: usize, features: I, lambda: T) -> Result<Self, RegressionError>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        Self::accumulate(dim, features.into_iter().map(|phi| (phi, T::one())), lambda)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Entry `(r, c)` of the Gram matrix.
    pub fn entry(&self, r: usize, c: usize) -> T {
        self.matrix[r * self.dim + c]
    }

    /// Entry `(r, c)` of the lower-triangular factor `L`.
    pub fn factor_entry(&self, r: usize, c: usize) -> T {
        self.chol[r * self.dim + c]
    }

    /// `L Lᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<T> {
        let d = self.dim;
        let mut out = vec![T::zero(); d * d];
        for r in 0..d {
            for c in 0..d {
                let k_max = r.min(c);
                out[r * d + c] = (0..=k_max)
                    .map(|k| self.chol[r * d + k] * self.chol[c * d + k])
                    .sum();
            }
        }
        out
    }

    /// `Λ x` using the stored matrix.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.matrix
            .chunks(self.dim)
            .map(|row| dot(row, x))
            .collect()
    }

    /// `L⁻¹ x` by forward substitution.
    pub fn forward_solve(&self, x: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut y = vec![T::zero(); d];
        for r in 0..d {
            let row = &self.chol[r * d..r * d + r];
            y[r] = (x[r] - dot(row, &y[..r])) / self.chol[r * d + r];
        }
        y
    }

    /// `Λ⁻¹ x`.
    pub fn solve(&self, x: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut z = self.forward_solve(x);
        for r in (0..d).rev() {
            let mut acc = z[r];
            for (k, &zk) in z.iter().enumerate().skip(r + 1) {
                acc = acc - self.chol[k * d + r] * zk;
            }
            z[r] = acc / self.chol[r * d + r];
        }
        z
    }

    /// `φᵀ Λ⁻¹ φ = ‖L⁻¹ φ‖²`.
    pub fn inverse_quad_form(&self, phi: &[T]) -> T {
        let y = self.forward_solve(phi);
        dot(&y, &y)
    }
}

fn cholesky<T: Scalar>(a: &[T], d: usize) -> Result<Vec<T>, RegressionError> {
    let mut l = vec![T::zero(); d * d];
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag = diag - l[j * d + k] * l[j * d + k];
        }
        if diag.is_nan() || diag <= T::zero() {
            return Err(RegressionError::NotPositiveDefinite(j));
        }
        let ljj = diag.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let mut acc = a[i * d + j];
            for k in 0..j {
                acc = acc - l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = acc / ljj;
        }
    }
    Ok(l)
}

/// Ridge coefficients `Λ⁻¹ Σ_τ w_τ φ_τ y_τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit<T> {
    pub coefficients: Vec<T>,
}

impl<T: Scalar> RidgeFit<T> {
    pub fn predict(&self, phi: &[T]) -> T {
        dot(&self.coefficients, phi)
    }
}

/// Minimises `Σ_τ w_τ (y_τ − φ_τᵀ c)² + λ ‖c‖²` given the matching Gram factor.
///
/// `weights = None` means unit weights.
pub fn ridge_solve<T: Scalar>(
    gram: &GramFactor<T>,
    features: &[&[T]],
    targets: &[T],
    weights: Option<&[T]>,
) -> Result<RidgeFit<T>, RegressionError> {
    if features.len() != targets.len() || weights.is_some_and(|w| w.len() != targets.len()) {
        return Err(RegressionError::DimensionMismatch(
            "features, targets and weights must have equal length".into(),
        ));
    }
    let d = gram.dim();
    let mut rhs = vec![T::zero(); d];
    for (i, (phi, &y)) in features.iter().zip(targets).enumerate() {
        if phi.len() != d {
            return Err(RegressionError::DimensionMismatch(format!(
                "sample {i} has length {}, expected {d}",
                phi.len()
            )));
        }
        if !y.is_finite() {
            return Err(RegressionError::NonFinite(i));
        }
        let wy = weights.map_or(T::one(), |w| w[i]) * y;
        for (r, &p) in rhs.iter_mut().zip(phi.iter()) {
            *r = *r + p * wy;
        }
    }
    Ok(RidgeFit {
        coefficients: gram.solve(&rhs),
    })
}

/// Elliptical bonus `γ ‖φ‖_{Λ⁻¹} = γ sqrt(φᵀ Λ⁻¹ φ)`.
pub fn bonus<T: Scalar>(gram: &GramFactor<T>, phi: &[T], gamma: T) -> T {
    if gamma == T::zero() {
        return T::zero();
    }
    gamma * gram.inverse_quad_form(phi).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_gram_is_lambda_identity() {
        let g = GramFactor::<f64>::unweighted(2, std::iter::empty(), 1.0).unwrap();
        assert_eq!(g.reconstruct(), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!((g.entry(0, 0), g.entry(0, 1)), (1.0, 0.0));
    }

    #[test]
    fn single_sample_gram_and_fit() {
        let e1 = [1.0, 0.0, 0.0];
        let g = GramFactor::<f64>::unweighted(3, [&e1[..]], 1.0).unwrap();
        assert_eq!(
            (g.entry(0, 0), g.entry(1, 1), g.entry(2, 2)),
            (2.0, 1.0, 1.0)
        );
        let fit = ridge_solve(&g, &[&e1], &[1.0], None).unwrap();
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-15);
        assert_eq!(&fit.coefficients[1..], &[0.0, 0.0]);
        let zero = ridge_solve(&g, &[&e1], &[0.0], None).unwrap();
        assert_eq!(zero.coefficients, vec![0.0; 3]);
    }

    #[test]
    fn bonus_closed_forms() {
        let lambda = 0.25;
        let e2 = [0.0, 1.0];
        let g = GramFactor::<f64>::unweighted(2, std::iter::empty(), lambda).unwrap();
        assert!((bonus(&g, &e2, 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(bonus(&g, &e2, 0.0), 0.0);
        for n in [1usize, 4, 9, 30] {
            let g = GramFactor::<f64>::unweighted(2, std::iter::repeat_n(&e2[..], n), 1.0).unwrap();
            let expected = 3.0 / ((n + 1) as f64).sqrt();
            assert!((bonus(&g, &e2, 3.0) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let e1 = [1.0, 0.0];
        assert!(matches!(
            GramFactor::<f64>::unweighted(2, std::iter::empty(), 0.0),
            Err(RegressionError::InvalidLambda(_))
        ));
        assert!(matches!(
            GramFactor::<f64>::accumulate(2, [(&e1[..], -1.0)], 1.0),
            Err(RegressionError::InvalidWeight(0))
        ));
        let nan = [f64::NAN, 0.0];
        assert!(matches!(
            GramFactor::<f64>::unweighted(2, [&nan[..]], 1.0),
            Err(RegressionError::NonFinite(0))
        ));
        assert!(matches!(
            GramFactor::<f64>::unweighted(3, [&e1[..]], 1.0),
            Err(RegressionError::DimensionMismatch(_))
        ));
        let g = GramFactor::<f64>::unweighted(2, [&e1[..]], 1.0).unwrap();
        assert!(ridge_solve(&g, &[&e1], &[1.0, 2.0], None).is_err());
    }
}
