//! Kernel descriptors and exact evaluation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TgpError};
use crate::input::Coord;
use crate::linalg::Matrix;

/// A kernel on one input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `σ_f² exp(-½ Σ_c (x_c - y_c)² / ℓ_c²)`; a single lengthscale is isotropic.
    SquaredExponential { variance: f64, lengthscales: Vec<f64> },
    /// `σ_f² exp(-2 Σ_c sin²(π |x_c - y_c| / p) / ℓ²)`, a product of one-dimensional periodic kernels.
    Periodic {
        variance: f64,
        lengthscale: f64,
        period: f64,
    },
    /// `1` when the categorical ids agree, `0` otherwise.
    Delta,
    /// Inner product of the coordinates' covariate vectors.
    Linear,
    /// `Σ_t weight_t · k_t` with non-negative weights (the squared scales).
    Sum { terms: Vec<WeightedKernel> },
    /// `∏_t k_t`.
    Product { factors: Vec<KernelSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedKernel {
    pub weight: f64,
    pub kernel: KernelSpec,
}

impl KernelSpec {
    pub fn se(variance: f64, lengthscale: f64) -> Self {
        KernelSpec::SquaredExponential {
            variance,
            lengthscales: vec![lengthscale],
        }
    }

    pub fn periodic(variance: f64, lengthscale: f64, period: f64) -> Self {
        KernelSpec::Periodic {
            variance,
            lengthscale,
            period,
        }
    }

    /// `Σ weight · kernel`; weights are squared scales such as `a²`, `b²`.
    pub fn sum(terms: Vec<(f64, KernelSpec)>) -> Self {
        KernelSpec::Sum {
            terms: terms
                .into_iter()
                .map(|(weight, kernel)| WeightedKernel { weight, kernel })
                .collect(),
        }
    }

    pub fn product(factors: Vec<KernelSpec>) -> Self {
        KernelSpec::Product { factors }
    }

    /// The side-information kernel `a² δ + b² ωᵀω'`.
    pub fn side_info(a: f64, b: f64) -> Self {
        KernelSpec::sum(vec![(a * a, KernelSpec::Delta), (b * b, KernelSpec::Linear)])
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(TgpError::invalid(format!("{name} must be positive, got {x}")))
            }
        };
        match self {
            KernelSpec::SquaredExponential {
                variance,
                lengthscales,
            } => {
                positive("signal variance", *variance)?;
                if lengthscales.is_empty() {
                    return Err(TgpError::invalid("squared exponential needs a lengthscale"));
                }
                lengthscales.iter().try_for_each(|&l| positive("lengthscale", l))
            }
            KernelSpec::Periodic {
                variance,
                lengthscale,
                period,
            } => {
                positive("signal variance", *variance)?;
                positive("lengthscale", *lengthscale)?;
                positive("period", *period)
            }
            KernelSpec::Delta | KernelSpec::Linear => Ok(()),
            KernelSpec::Sum { terms } => {
                if terms.is_empty() {
                    return Err(TgpError::invalid("empty kernel sum"));
                }
                for t in terms {
                    if !(t.weight >= 0.0 && t.weight.is_finite()) {
                        return Err(TgpError::invalid(format!(
                            "sum weight must be non-negative, got {}",
                            t.weight
                        )));
                    }
                    t.kernel.validate()?;
                }
                Ok(())
            }
            KernelSpec::Product { factors } => {
                if factors.is_empty() {
                    return Err(TgpError::invalid("empty kernel product"));
                }
                factors.iter().try_for_each(KernelSpec::validate)
            }
        }
    }

    /// `k(x, x)` for stationary kernels.
    pub fn stationary_variance(&self) -> Option<f64> {
        match self {
            KernelSpec::SquaredExponential { variance, .. } | KernelSpec::Periodic { variance, .. } => {
                Some(*variance)
            }
            KernelSpec::Delta => Some(1.0),
            KernelSpec::Linear => None,
            KernelSpec::Sum { terms } => terms
                .iter()
                .map(|t| t.kernel.stationary_variance().map(|v| t.weight * v))
                .sum(),
            KernelSpec::Product { factors } => {
                factors.iter().map(KernelSpec::stationary_variance).product()
            }
        }
    }

    pub fn eval(&self, x: &Coord, y: &Coord) -> Result<f64> {
        match self {
            KernelSpec::SquaredExponential {
                variance,
                lengthscales,
            } => {
                let (a, b) = paired_values(x, y)?;
                let r2 = if lengthscales.len() == 1 {
                    let l = lengthscales[0];
                    a.iter().zip(b).map(|(p, q)| ((p - q) / l).powi(2)).sum::<f64>()
                } else if lengthscales.len() == a.len() {
                    a.iter()
                        .zip(b)
                        .zip(lengthscales)
                        .map(|((p, q), l)| ((p - q) / l).powi(2))
                        .sum::<f64>()
                } else {
                    return Err(TgpError::mismatch(format!(
                        "{} lengthscales for {} covariates",
                        lengthscales.len(),
                        a.len()
                    )));
                };
                Ok(variance * (-0.5 * r2).exp())
            }
            KernelSpec::Periodic {
                variance,
                lengthscale,
                period,
            } => {
                let (a, b) = paired_values(x, y)?;
                let s2: f64 = a.iter().zip(b).map(|(p, q)| (PI * (p - q).abs() / period).sin().powi(2)).sum();
                Ok(variance * (-2.0 * s2 / (lengthscale * lengthscale)).exp())
            }
            KernelSpec::Delta => Ok(if x.category()? == y.category()? { 1.0 } else { 0.0 }),
            KernelSpec::Linear => {
                if x.values.len() != y.values.len() {
                    return Err(TgpError::mismatch(format!(
                        "side vectors of lengths {} and {}",
                        x.values.len(),
                        y.values.len()
                    )));
                }
                Ok(x.values.iter().zip(&y.values).map(|(p, q)| p * q).sum())
            }
            KernelSpec::Sum { terms } => terms
                .iter()
                .map(|t| Ok(t.weight * t.kernel.eval(x, y)?))
                .sum(),
            KernelSpec::Product { factors } => factors.iter().map(|k| k.eval(x, y)).product(),
        }
    }

    /// Gram matrix `K_ij = k(points_i, points_j)`.
    pub fn gram(&self, points: &[Coord]) -> Result<Matrix> {
        if points.is_empty() {
            return Err(TgpError::Empty("gram matrix of no points"));
        }
        let n = points.len();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(&points[i], &points[j])?;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Cross-covariance `K_ij = k(rows_i, cols_j)`.
    pub fn cross(&self, rows: &[Coord], cols: &[Coord]) -> Result<Matrix> {
        let mut k = Matrix::zeros(rows.len(), cols.len());
        for (i, x) in rows.iter().enumerate() {
            for (j, y) in cols.iter().enumerate() {
                k[(i, j)] = self.eval(x, y)?;
            }
        }
        Ok(k)
    }
}

fn paired_values<'a>(x: &'a Coord, y: &'a Coord) -> Result<(&'a [f64], &'a [f64])> {
    let a = x.covariates()?;
    let b = y.covariates()?;
    if a.len() != b.len() {
        return Err(TgpError::mismatch(format!(
            "covariate vectors of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok((a, b))
}

/// Convenience for [`KernelSpec::eval`].
pub fn kernel_eval(spec: &KernelSpec, x: &Coord, y: &Coord) -> Result<f64> {
    spec.eval(x, y)
}

/// Convenience for [`KernelSpec::gram`].
pub fn gram(spec: &KernelSpec, points: &[Coord]) -> Result<Matrix> {
    spec.gram(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_on_ids() {
        let k = KernelSpec::Delta;
        assert_eq!(k.eval(&Coord::id(7), &Coord::id(7)).unwrap(), 1.0);
        assert_eq!(k.eval(&Coord::id(7), &Coord::id(8)).unwrap(), 0.0);
    }

    #[test]
    fn se_values() {
        let k = KernelSpec::se(1.0, 1.0);
        assert_eq!(k.eval(&Coord::scalar(0.3), &Coord::scalar(0.3)).unwrap(), 1.0);
        let v = k.eval(&Coord::scalar(0.0), &Coord::scalar(1.0)).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn ard_lengthscales() {
        let k = KernelSpec::SquaredExponential {
            variance: 2.0,
            lengthscales: vec![1.0, 2.0],
        };
        let v = k
            .eval(&Coord::real(vec![0.0, 0.0]), &Coord::real(vec![1.0, 2.0]))
            .unwrap();
        assert!((v - 2.0 * (-0.5f64 * 2.0).exp()).abs() < 1e-15);
        let bad = KernelSpec::SquaredExponential {
            variance: 1.0,
            lengthscales: vec![1.0, 2.0, 3.0],
        };
        assert!(bad
            .eval(&Coord::real(vec![0.0, 0.0]), &Coord::real(vec![1.0, 2.0]))
            .is_err());
    }

    #[test]
    fn periodic_repeats() {
        let k = KernelSpec::periodic(1.5, 0.7, 2.0);
        let a = k.eval(&Coord::scalar(0.1), &Coord::scalar(0.6)).unwrap();
        let b = k.eval(&Coord::scalar(0.1), &Coord::scalar(2.6)).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(k.eval(&Coord::scalar(1.0), &Coord::scalar(1.0)).unwrap(), 1.5);
    }

    #[test]
    fn signature_mismatch() {
        let k = KernelSpec::se(1.0, 1.0);
        assert!(k.eval(&Coord::id(1), &Coord::scalar(1.0)).is_err());
        assert!(KernelSpec::Delta
            .eval(&Coord::scalar(1.0), &Coord::scalar(1.0))
            .is_err());
    }

    #[test]
    fn side_kernel_decomposes() {
        let k = KernelSpec::side_info(0.5, 0.3);
        let x = Coord::with_side(1, vec![1.0, 0.0, 1.0, 1.0]);
        let y = Coord::with_side(2, vec![1.0, 1.0, 1.0, 0.0]);
        assert!((k.eval(&x, &y).unwrap() - 0.09 * 2.0).abs() < 1e-15);
        assert!((k.eval(&x, &x).unwrap() - (0.25 + 0.09 * 3.0)).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::se(0.0, 1.0).validate().is_err());
        assert!(KernelSpec::se(1.0, -1.0).validate().is_err());
        assert!(KernelSpec::periodic(1.0, 1.0, 0.0).validate().is_err());
        assert!(KernelSpec::sum(vec![(-1.0, KernelSpec::Delta)]).validate().is_err());
        assert!(KernelSpec::side_info(0.5, 0.5).validate().is_ok());
    }

    #[test]
    fn gram_examples() {
        let ids: Vec<Coord> = (0..4).map(Coord::id).collect();
        assert_eq!(KernelSpec::Delta.gram(&ids).unwrap(), Matrix::identity(4));
        let single = KernelSpec::se(2.5, 1.0).gram(&[Coord::scalar(0.0)]).unwrap();
        assert_eq!(single.as_slice(), &[2.5]);
        assert!(KernelSpec::Delta.gram(&[]).is_err());
    }
}
