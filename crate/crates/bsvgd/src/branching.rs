//! Colored branching step for growing the particle population.
//!
//! Each particle independently spawns a random number of offspring drawn
//! from an integer law chosen by its color; optimizers spawn nothing and
//! the spine always spawns at least one, so the population never stalls.
//! Offspring are placed by an isotropic Gaussian proposal around the
//! parent and colored Explorer, pre-existing particles keep their
//! positions and are recolored Optimizer, and finally one particle chosen
//! uniformly over the whole output becomes the new spine.
//!
//! The RNG consumption order is fixed (parents in index order: count then
//! that parent's offspring positions; spine index last), which makes the
//! step reproducible from the seed alone.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{Color, ParticleCloud, SeededRng};
use crate::error::{Error, Result};

/// A probability law on finitely many non-negative integers.
#[derive(Clone, Debug)]
pub struct IntegerLaw {
    support: Vec<usize>,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

impl IntegerLaw {
    /// Entries are (value, probability) pairs; probabilities must be
    /// positive and sum to 1 within 1e-12. Entries are stored sorted by
    /// value and duplicates are rejected.
    pub fn new(entries: &[(usize, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter(
                "integer law needs at least one entry".into(),
            ));
        }
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|(v, _)| *v);
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(
                "integer law has duplicate support values".into(),
            ));
        }
        if sorted.iter().any(|(_, p)| !p.is_finite() || *p <= 0.0) {
            return Err(Error::InvalidParameter(
                "integer law probabilities must be positive".into(),
            ));
        }
        let sum: f64 = sorted.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "integer law probabilities sum to {sum}, expected 1"
            )));
        }
        let support = sorted.iter().map(|(v, _)| *v).collect();
        let probabilities: Vec<f64> = sorted.iter().map(|(_, p)| *p).collect();
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut acc = 0.0;
        for p in &probabilities {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(Self {
            support,
            probabilities,
            cumulative,
        })
    }

    pub fn point_mass(value: usize) -> Self {
        Self {
            support: vec![value],
            probabilities: vec![1.0],
            cumulative: vec![1.0],
        }
    }

    pub fn uniform(values: &[usize]) -> Result<Self> {
        let p = 1.0 / values.len() as f64;
        let entries: Vec<(usize, f64)> = values.iter().map(|v| (*v, p)).collect();
        Self::new(&entries)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .map(|(v, p)| *v as f64 * p)
            .sum()
    }

    pub fn is_point_mass_at_zero(&self) -> bool {
        self.support == [0]
    }

    pub fn assigns_mass_to_zero(&self) -> bool {
        self.support.first() == Some(&0)
    }

    pub fn sample(&self, rng: &mut SeededRng) -> usize {
        let u: f64 = rng.random();
        for (value, c) in self.support.iter().zip(&self.cumulative) {
            if u < *c {
                return *value;
            }
        }
        *self.support.last().expect("nonempty by construction")
    }
}

/// Offspring laws per color plus the positional proposal scale.
#[derive(Clone, Debug)]
pub struct OffspringLaws {
    q_e: IntegerLaw,
    q_o: IntegerLaw,
    q_s: IntegerLaw,
    proposal_std: f64,
}

impl OffspringLaws {
    /// The optimizer law must be the point mass at zero and the spine law
    /// must give zero no mass, so the population can only grow and never
    /// stalls.
    pub fn new(
        q_e: IntegerLaw,
        q_o: IntegerLaw,
        q_s: IntegerLaw,
        proposal_std: f64,
    ) -> Result<Self> {
        if !q_o.is_point_mass_at_zero() {
            return Err(Error::InvalidParameter(
                "optimizer offspring law must be the point mass at 0".into(),
            ));
        }
        if q_s.assigns_mass_to_zero() {
            return Err(Error::InvalidParameter(
                "spine offspring law must not assign mass to 0".into(),
            ));
        }
        if !proposal_std.is_finite() || proposal_std <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "proposal std must be positive, got {proposal_std}"
            )));
        }
        Ok(Self {
            q_e,
            q_o,
            q_s,
            proposal_std,
        })
    }

    /// Explorer and spine laws with the optimizer law fixed at zero.
    pub fn with_defaults_for_optimizer(
        q_e: IntegerLaw,
        q_s: IntegerLaw,
        proposal_std: f64,
    ) -> Result<Self> {
        Self::new(q_e, IntegerLaw::point_mass(0), q_s, proposal_std)
    }

    /// Stock benchmark laws: q_E = {0: 0.5, 1: 0.2, 2: 0.3} and
    /// q_S = uniform over {1, 2, 3}.
    pub fn defaults(proposal_std: f64) -> Result<Self> {
        Self::with_defaults_for_optimizer(
            IntegerLaw::new(&[(0, 0.5), (1, 0.2), (2, 0.3)])?,
            IntegerLaw::uniform(&[1, 2, 3])?,
            proposal_std,
        )
    }

    pub fn q_e(&self) -> &IntegerLaw {
        &self.q_e
    }

    pub fn q_o(&self) -> &IntegerLaw {
        &self.q_o
    }

    pub fn q_s(&self) -> &IntegerLaw {
        &self.q_s
    }

    pub fn proposal_std(&self) -> f64 {
        self.proposal_std
    }

    pub fn law_for(&self, color: Color) -> &IntegerLaw {
        match color {
            Color::Explorer => &self.q_e,
            Color::Optimizer => &self.q_o,
            Color::Spine => &self.q_s,
        }
    }
}

/// Number of offspring for a particle governed by `law`.
pub fn sample_offspring_count(law: &IntegerLaw, rng: &mut SeededRng) -> usize {
    law.sample(rng)
}

/// Offspring position: the parent plus an isotropic Gaussian displacement.
pub fn sample_proposal(parent: &[f64], proposal_std: f64, rng: &mut SeededRng) -> Vec<f64> {
    parent
        .iter()
        .map(|p| {
            let z: f64 = StandardNormal.sample(rng);
            p + proposal_std * z
        })
        .collect()
}

/// One branching transition. Returns the grown cloud; the input must hold
/// exactly one spine.
pub fn branch_step(
    cloud: &ParticleCloud,
    laws: &OffspringLaws,
    rng: &mut SeededRng,
) -> Result<ParticleCloud> {
    branch_step_with_counts(cloud, laws, rng).map(|(cloud, _)| cloud)
}

/// [`branch_step`] that also reports the per-parent offspring counts, in
/// parent index order.
pub fn branch_step_with_counts(
    cloud: &ParticleCloud,
    laws: &OffspringLaws,
    rng: &mut SeededRng,
) -> Result<(ParticleCloud, Vec<usize>)> {
    let spines = cloud.spine_count();
    if spines != 1 {
        return Err(Error::InvalidBranchState { spines });
    }
    let ell = cloud.len();
    let dim = cloud.dim();

    let mut coords = cloud.coords().to_vec();
    let mut counts = Vec::with_capacity(ell);
    for i in 0..ell {
        let count = laws.law_for(cloud.color(i)).sample(rng);
        counts.push(count);
        let parent = cloud.position(i);
        for _ in 0..count {
            coords.extend(sample_proposal(parent, laws.proposal_std, rng));
        }
    }

    let total = coords.len() / dim;
    let mut colors = vec![Color::Optimizer; ell];
    colors.resize(total, Color::Explorer);
    let spine_index = rng.random_range(0..total);
    colors[spine_index] = Color::Spine;

    Ok((ParticleCloud::from_parts(dim, coords, colors)?, counts))
}
