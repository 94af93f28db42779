//! Smoothing kernels for the particle update.
//!
//! Only the Gaussian kernel ships: K_r(x, y) = pi^(-d/2) exp(-|x - y|^2 / r).
//! The interface (evaluation plus first-argument gradient) is all the
//! dynamics needs, so alternative kernels can slot in later.

use crate::error::{Error, Result};

/// Gaussian kernel with bandwidth `r` on d-dimensional points.
#[derive(Clone, Debug)]
pub struct GaussianKernel {
    bandwidth: f64,
    dim: usize,
    prefactor: f64,
}

impl GaussianKernel {
    /// Default bandwidth: r = 1.
    pub const DEFAULT_BANDWIDTH: f64 = 1.0;

    pub fn new(bandwidth: f64, dim: usize) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self {
            bandwidth,
            dim,
            prefactor: std::f64::consts::PI.powf(-(dim as f64) / 2.0),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper bound of the kernel, attained exactly on the diagonal.
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    fn check(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: y.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Gradient in the first argument: -(2/r) (x - y) K_r(x, y).
    pub fn grad_first(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check(x, y)?;
        let (k, scale) = self.eval_with_grad_scale(x, y);
        Ok(x.iter().zip(y).map(|(a, b)| scale * (a - b) * k).collect())
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut sq = 0.0;
        for (a, b) in x.iter().zip(y) {
            let d = a - b;
            sq += d * d;
        }
        self.prefactor * (-sq / self.bandwidth).exp()
    }

    /// Kernel value together with the shared gradient factor -2/r, so hot
    /// loops form gradient components as `scale * (x_c - y_c) * k` without
    /// allocating.
    pub(crate) fn eval_with_grad_scale(&self, x: &[f64], y: &[f64]) -> (f64, f64) {
        (self.eval_unchecked(x, y), -2.0 / self.bandwidth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::core::SeededRng;

    const INV_PI: f64 = 0.3183098861837907;
    const EXP_NEG1_OVER_PI: f64 = 0.11709966304863832;

    #[test]
    fn diagonal_value_is_the_prefactor() {
        let k = GaussianKernel::new(1.0, 2).unwrap();
        let x = [0.3, -4.5];
        assert_eq!(k.eval(&x, &x).unwrap(), INV_PI);
        assert_eq!(k.prefactor(), INV_PI);
    }

    #[test]
    fn unit_distance_value() {
        let k = GaussianKernel::new(1.0, 2).unwrap();
        let v = k.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((v - EXP_NEG1_OVER_PI).abs() < 1e-16);
    }

    #[test]
    fn gradient_closed_form() {
        let k = GaussianKernel::new(1.0, 2).unwrap();
        let g = k.grad_first(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((g[0] - (-2.0 * EXP_NEG1_OVER_PI)).abs() < 1e-16);
        assert_eq!(g[1], 0.0);

        let zero = k.grad_first(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = GaussianKernel::new(2.5, 3).unwrap();
        let mut rng = SeededRng::new(11);
        let h = 1e-6;
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = k.grad_first(&x, &y).unwrap();
            for c in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let fd = (k.eval(&xp, &y).unwrap() - k.eval(&xm, &y).unwrap()) / (2.0 * h);
                let tol = 1e-5 * (1.0 + g[c].abs());
                assert!((g[c] - fd).abs() < tol, "coord {c}: {} vs {}", g[c], fd);
            }
        }
    }

    #[test]
    fn symmetry_antisymmetry_and_bounds() {
        let k = GaussianKernel::new(0.7, 2).unwrap();
        let mut rng = SeededRng::new(3);
        for _ in 0..200 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random_range(-5.0..5.0)).collect();
            let kxy = k.eval(&x, &y).unwrap();
            let kyx = k.eval(&y, &x).unwrap();
            assert_eq!(kxy, kyx);
            assert!(kxy > 0.0);
            assert!(kxy < k.prefactor() || x == y);
            let gxy = k.grad_first(&x, &y).unwrap();
            let gyx = k.grad_first(&y, &x).unwrap();
            for (a, b) in gxy.iter().zip(&gyx) {
                assert_eq!(*a, -b);
            }
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(GaussianKernel::new(0.0, 2).is_err());
        assert!(GaussianKernel::new(-1.0, 2).is_err());
        assert!(GaussianKernel::new(f64::NAN, 2).is_err());
        assert!(GaussianKernel::new(1.0, 0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = GaussianKernel::new(1.0, 2).unwrap();
        assert!(k.eval(&[0.0], &[0.0, 0.0]).is_err());
        assert!(k.grad_first(&[0.0, 0.0], &[0.0]).is_err());
    }
}
