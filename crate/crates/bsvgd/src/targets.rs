//! Benchmark target distributions: log-density, analytic score, and exact
//! sampling.
//!
//! Two families ship: an isotropic Gaussian mixture on a grid and a mixture
//! of banana-shaped distributions with t-tails (a multivariate t pushed
//! through the unit-Jacobian shear (x1, x2) -> (x1, x2 + b x1^2 - 100 b)).
//! Scores are closed-form; a central finite-difference oracle is provided
//! for validating them.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::core::SeededRng;
use crate::error::{Error, Result};

/// A target known through its log-density and score.
///
/// `log_density` may be shifted by an additive constant without affecting
/// the dynamics; the built-in models return the fully normalized value.
pub trait ScoreModel: Send + Sync {
    fn dimension(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// Gradient of `log_density` at `x`.
    fn score(&self, x: &[f64]) -> Vec<f64>;
}

/// Exact i.i.d. sampling, used to build reference clouds for evaluation.
pub trait ExactSampler: Send + Sync {
    fn sample(&self, n: usize, rng: &mut SeededRng) -> Vec<Vec<f64>>;
}

/// Central finite differences of the log-density, step `h` per coordinate.
/// This is the independent oracle the analytic scores are tested against.
pub fn finite_difference_score<M: ScoreModel + ?Sized>(
    model: &M,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut grad = Vec::with_capacity(x.len());
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    for c in 0..x.len() {
        plus[c] = x[c] + h;
        minus[c] = x[c] - h;
        grad.push((model.log_density(&plus) - model.log_density(&minus)) / (2.0 * h));
        plus[c] = x[c];
        minus[c] = x[c];
    }
    Ok(grad)
}

fn validate_weights(weights: &[f64], count: usize) -> Result<Vec<f64>> {
    if weights.len() != count {
        return Err(Error::InvalidParameter(format!(
            "{} weights for {} components",
            weights.len(),
            count
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::InvalidParameter(
            "mixture weights must be positive and finite".into(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "mixture weights sum to {sum}, expected 1"
        )));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

/// Draws a component index from normalized weights via their prefix sums.
fn categorical(cumulative: &[f64], rng: &mut SeededRng) -> usize {
    let u: f64 = rng.random();
    for (k, c) in cumulative.iter().enumerate() {
        if u < *c {
            return k;
        }
    }
    cumulative.len() - 1
}

fn prefix_sums(weights: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cum.push(acc);
    }
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }
    cum
}

/// Log-sum-exp over `terms`, stable at far tails.
fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Mixture of K isotropic Gaussians sharing one variance.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    dim: usize,
    means: Vec<Vec<f64>>,
    variance: f64,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    cumulative: Vec<f64>,
    log_norm: f64,
}

impl GaussianMixture {
    /// Weights must be positive and sum to 1 within 1e-9; they are
    /// renormalized exactly at construction.
    pub fn new(means: Vec<Vec<f64>>, variance: f64, weights: Vec<f64>) -> Result<Self> {
        let first = means
            .first()
            .ok_or_else(|| Error::InvalidParameter("mixture needs components".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        for m in &means {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.len(),
                });
            }
            if m.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "variance must be positive, got {variance}"
            )));
        }
        let weights = validate_weights(&weights, means.len())?;
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let cumulative = prefix_sums(&weights);
        let log_norm =
            -(dim as f64) / 2.0 * (2.0 * std::f64::consts::PI * variance).ln();
        Ok(Self {
            dim,
            means,
            variance,
            weights,
            log_weights,
            cumulative,
            log_norm,
        })
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Per-component log w_k - |x - mu_k|^2 / (2 s^2), without the shared
    /// normalizer.
    fn exponents(&self, x: &[f64]) -> Vec<f64> {
        self.means
            .iter()
            .zip(&self.log_weights)
            .map(|(mean, lw)| {
                let mut sq = 0.0;
                for (a, b) in x.iter().zip(mean) {
                    let d = a - b;
                    sq += d * d;
                }
                lw - sq / (2.0 * self.variance)
            })
            .collect()
    }
}

impl ScoreModel for GaussianMixture {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.exponents(x)) + self.log_norm
    }

    /// Sum of responsibility-weighted single-Gaussian scores (mu_k - x)/s^2.
    fn score(&self, x: &[f64]) -> Vec<f64> {
        let exponents = self.exponents(x);
        let lse = log_sum_exp(&exponents);
        let mut out = vec![0.0; self.dim];
        for (mean, a) in self.means.iter().zip(&exponents) {
            let resp = (a - lse).exp();
            for (o, (m, xc)) in out.iter_mut().zip(mean.iter().zip(x)) {
                *o += resp * (m - xc) / self.variance;
            }
        }
        out
    }
}

impl ExactSampler for GaussianMixture {
    fn sample(&self, n: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
        let std = self.variance.sqrt();
        (0..n)
            .map(|_| {
                let k = categorical(&self.cumulative, rng);
                self.means[k]
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + std * z
                    })
                    .collect()
            })
            .collect()
    }
}

/// Applies the banana shear: second coordinate becomes x2 + b x1^2 - 100 b.
pub fn banana_forward(x: &[f64], b: f64) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::BananaDimension);
    }
    let mut y = x.to_vec();
    y[1] = x[1] + b * x[0] * x[0] - 100.0 * b;
    Ok(y)
}

/// Inverse of [`banana_forward`]: second coordinate minus b x1^2 - 100 b.
pub fn banana_inverse(x: &[f64], b: f64) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::BananaDimension);
    }
    let mut y = x.to_vec();
    y[1] = x[1] - b * x[0] * x[0] + 100.0 * b;
    Ok(y)
}

/// One banana component: a multivariate t with diagonal scale, sheared.
#[derive(Clone, Debug)]
pub struct BananaComponent {
    location: Vec<f64>,
    dof: f64,
    nonlinearity: f64,
    scale_diag: Vec<f64>,
}

impl BananaComponent {
    /// Standard scale diag(100, 1, ..., 1).
    pub fn new(location: Vec<f64>, dof: f64, nonlinearity: f64) -> Result<Self> {
        let mut scale_diag = vec![1.0; location.len()];
        if let Some(first) = scale_diag.first_mut() {
            *first = 100.0;
        }
        Self::with_scale_diag(location, dof, nonlinearity, scale_diag)
    }

    pub fn with_scale_diag(
        location: Vec<f64>,
        dof: f64,
        nonlinearity: f64,
        scale_diag: Vec<f64>,
    ) -> Result<Self> {
        if location.len() < 2 {
            return Err(Error::BananaDimension);
        }
        if location.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !dof.is_finite() || dof <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "degrees of freedom must be positive, got {dof}"
            )));
        }
        if !nonlinearity.is_finite() || nonlinearity <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "nonlinearity must be positive, got {nonlinearity}"
            )));
        }
        if scale_diag.len() != location.len() {
            return Err(Error::DimensionMismatch {
                expected: location.len(),
                actual: scale_diag.len(),
            });
        }
        if scale_diag.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidParameter(
                "scale diagonal must be positive".into(),
            ));
        }
        Ok(Self {
            location,
            dof,
            nonlinearity,
            scale_diag,
        })
    }

    pub fn location(&self) -> &[f64] {
        &self.location
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn nonlinearity(&self) -> f64 {
        self.nonlinearity
    }

    pub fn scale_diag(&self) -> &[f64] {
        &self.scale_diag
    }

    /// Log of the t normalizing constant over this component's scale.
    fn log_norm(&self) -> f64 {
        let p = self.location.len() as f64;
        let r = self.dof;
        let log_det: f64 = self.scale_diag.iter().map(|s| s.ln()).sum();
        libm::lgamma((r + p) / 2.0)
            - libm::lgamma(r / 2.0)
            - p / 2.0 * (r.ln() + std::f64::consts::PI.ln())
            - 0.5 * log_det
    }

    /// Quadratic form (u - y)' inv(Sigma) (u - y) at u = shear inverse of x.
    fn quadratic(&self, x: &[f64]) -> f64 {
        let b = self.nonlinearity;
        let mut q = 0.0;
        for (i, (s, y)) in self.scale_diag.iter().zip(&self.location).enumerate() {
            let u = if i == 1 {
                x[1] - b * x[0] * x[0] + 100.0 * b
            } else {
                x[i]
            };
            let d = u - y;
            q += d * d / s;
        }
        q
    }
}

/// Mixture of banana components; the pattern of modes is controlled by the
/// component locations and nonlinearity parameters.
#[derive(Clone, Debug)]
pub struct BananaTMixture {
    dim: usize,
    components: Vec<BananaComponent>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    cumulative: Vec<f64>,
    log_norms: Vec<f64>,
}

impl BananaTMixture {
    pub fn new(components: Vec<BananaComponent>, weights: Vec<f64>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("mixture needs components".into()))?;
        let dim = first.location.len();
        for c in &components {
            if c.location.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.location.len(),
                });
            }
        }
        let weights = validate_weights(&weights, components.len())?;
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let cumulative = prefix_sums(&weights);
        let log_norms = components.iter().map(|c| c.log_norm()).collect();
        Ok(Self {
            dim,
            components,
            weights,
            log_weights,
            cumulative,
            log_norms,
        })
    }

    pub fn components(&self) -> &[BananaComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Image of each component location under its shear; the point where
    /// that component's density peaks.
    pub fn mode_centers(&self) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| banana_forward(&c.location, c.nonlinearity).expect("dim checked"))
            .collect()
    }

    /// Per-component log w_k + log f_k(x); the shear has unit Jacobian so
    /// no volume correction appears.
    fn exponents(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .zip(&self.log_weights)
            .zip(&self.log_norms)
            .map(|((c, lw), ln)| {
                let p = self.dim as f64;
                let q = c.quadratic(x);
                lw + ln - (c.dof + p) / 2.0 * (q / c.dof).ln_1p()
            })
            .collect()
    }
}

impl ScoreModel for BananaTMixture {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.exponents(x))
    }

    /// Chain rule through the shear: with g the t-score in unsheared
    /// coordinates, the first coordinate picks up -2 b x1 g2.
    fn score(&self, x: &[f64]) -> Vec<f64> {
        let exponents = self.exponents(x);
        let lse = log_sum_exp(&exponents);
        let p = self.dim as f64;
        let mut out = vec![0.0; self.dim];
        for (c, a) in self.components.iter().zip(&exponents) {
            let resp = (a - lse).exp();
            let b = c.nonlinearity;
            let q = c.quadratic(x);
            let factor = -(c.dof + p) / (c.dof + q);
            for i in 0..self.dim {
                let u = if i == 1 {
                    x[1] - b * x[0] * x[0] + 100.0 * b
                } else {
                    x[i]
                };
                let g = factor * (u - c.location[i]) / c.scale_diag[i];
                if i == 1 {
                    out[0] += resp * (-2.0 * b * x[0]) * g;
                }
                out[i] += resp * g;
            }
        }
        out
    }
}

impl ExactSampler for BananaTMixture {
    /// Component, then a t draw (normal over sqrt of scaled chi-square)
    /// under the diagonal scale, pushed through the shear.
    fn sample(&self, n: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let k = categorical(&self.cumulative, rng);
                let c = &self.components[k];
                let z: Vec<f64> = (0..self.dim)
                    .map(|_| StandardNormal.sample(rng))
                    .collect();
                let chi = ChiSquared::new(c.dof).expect("dof checked").sample(rng);
                let t_factor = (c.dof / chi).sqrt();
                let u: Vec<f64> = c
                    .location
                    .iter()
                    .zip(&c.scale_diag)
                    .zip(&z)
                    .map(|((y, s), zc)| y + s.sqrt() * zc * t_factor)
                    .collect();
                banana_forward(&u, c.nonlinearity).expect("dim checked")
            })
            .collect()
    }
}

/// A benchmark target of either family, for config-driven dispatch.
#[derive(Clone, Debug)]
pub enum Target {
    Gaussian(GaussianMixture),
    Banana(BananaTMixture),
}

impl Target {
    /// Centers of the density bumps, for coverage diagnostics.
    pub fn mode_centers(&self) -> Vec<Vec<f64>> {
        match self {
            Target::Gaussian(m) => m.means().to_vec(),
            Target::Banana(m) => m.mode_centers(),
        }
    }
}

impl ScoreModel for Target {
    fn dimension(&self) -> usize {
        match self {
            Target::Gaussian(m) => m.dimension(),
            Target::Banana(m) => m.dimension(),
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Target::Gaussian(m) => m.log_density(x),
            Target::Banana(m) => m.log_density(x),
        }
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Target::Gaussian(m) => m.score(x),
            Target::Banana(m) => m.score(x),
        }
    }
}

impl ExactSampler for Target {
    fn sample(&self, n: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
        match self {
            Target::Gaussian(m) => m.sample(n, rng),
            Target::Banana(m) => m.sample(n, rng),
        }
    }
}

/// The two built-in benchmark targets with their standard parameters.
pub mod presets {
    use super::*;

    pub const GAUSS25: &str = "paper-gauss25";
    pub const BANANA3: &str = "paper-banana3";

    /// Tail heaviness for the banana benchmark. Not prescribed by the
    /// benchmark's source; chosen heavy but with finite variance, and
    /// exposed as a config parameter.
    pub const DEFAULT_BANANA_DOF: f64 = 7.0;

    /// 25 Gaussians with means on the grid {0,2,4,6,8}^2, common variance
    /// 5 (modes overlap strongly; kept as stated), and weights k/325 for
    /// k = 1..25 assigned in lexicographic mean order.
    pub fn gauss25() -> GaussianMixture {
        let mut means = Vec::with_capacity(25);
        let mut weights = Vec::with_capacity(25);
        let mut k = 0.0;
        for a in [0.0, 2.0, 4.0, 6.0, 8.0] {
            for b in [0.0, 2.0, 4.0, 6.0, 8.0] {
                k += 1.0;
                means.push(vec![a, b]);
                weights.push(k / 325.0);
            }
        }
        GaussianMixture::new(means, 5.0, weights).expect("static parameters")
    }

    /// Three banana components at (0,0), (0,5), (15,15) with nonlinearity
    /// 0.03, 0.05, 0.03, weights 0.4, 0.4, 0.2, scale diag(100, 1).
    pub fn banana3(dof: f64) -> Result<BananaTMixture> {
        let components = vec![
            BananaComponent::new(vec![0.0, 0.0], dof, 0.03)?,
            BananaComponent::new(vec![0.0, 5.0], dof, 0.05)?,
            BananaComponent::new(vec![15.0, 15.0], dof, 0.03)?,
        ];
        BananaTMixture::new(components, vec![0.4, 0.4, 0.2])
    }
}
