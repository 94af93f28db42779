//! Particle data model and the seeded random-number contract.
//!
//! A cloud is an ordered, nonempty list of particles sharing one dimension;
//! ordering is significant everywhere (branching indexes offspring by parent
//! order) and every operation preserves it. Clouds are immutable values:
//! "mutation" means constructing a new cloud.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A point of the state space: finite 64-bit coordinates, dimension >= 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Position(Vec<f64>);

impl Position {
    /// Rejects empty coordinate lists and non-finite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter(
                "position needs at least one coordinate".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for Position {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Position {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Position {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

/// Role of a particle in the branching system.
///
/// Explorers search and reproduce moderately, optimizers only refine their
/// position and never reproduce, and the single spine is guaranteed
/// offspring so the population cannot stall.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    Explorer,
    Optimizer,
    Spine,
}

impl Color {
    pub fn as_char(self) -> char {
        match self {
            Color::Explorer => 'E',
            Color::Optimizer => 'O',
            Color::Spine => 'S',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'E' => Ok(Color::Explorer),
            'O' => Ok(Color::Optimizer),
            'S' => Ok(Color::Spine),
            other => Err(Error::Parse(format!("unknown color {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub position: Position,
    pub color: Color,
}

impl Particle {
    pub fn new(position: Position, color: Color) -> Self {
        Self { position, color }
    }
}

/// Ordered nonempty population of particles of one dimension.
///
/// Coordinates are stored row-major for cache-friendly pairwise loops.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    dim: usize,
    coords: Vec<f64>,
    colors: Vec<Color>,
}

impl ParticleCloud {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        let first = particles.first().ok_or(Error::EmptyCloud)?;
        let dim = first.position.dim();
        let mut coords = Vec::with_capacity(particles.len() * dim);
        let mut colors = Vec::with_capacity(particles.len());
        for p in &particles {
            if p.position.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.position.dim(),
                });
            }
            coords.extend_from_slice(p.position.coords());
            colors.push(p.color);
        }
        Ok(Self { dim, coords, colors })
    }

    /// Builds a cloud from row-major coordinates and per-particle colors.
    pub fn from_parts(dim: usize, coords: Vec<f64>, colors: Vec<Color>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if colors.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if coords.len() != colors.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: colors.len() * dim,
                actual: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, coords, colors })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn position(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn color(&self, index: usize) -> Color {
        self.colors[index]
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn particle(&self, index: usize) -> Particle {
        Particle::new(
            Position(self.position(index).to_vec()),
            self.colors[index],
        )
    }

    /// Coordinate-wise arithmetic mean of all positions.
    pub fn empirical_mean(&self) -> Position {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for row in self.positions() {
            for (m, c) in mean.iter_mut().zip(row) {
                *m += c;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        Position(mean)
    }

    /// Copy of the cloud with one particle recolored; everything else,
    /// including ordering, is untouched.
    pub fn recolored(&self, index: usize, color: Color) -> Result<Self> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        let mut out = self.clone();
        out.colors[index] = color;
        Ok(out)
    }

    /// Copy of the cloud with new coordinates and unchanged colors.
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.dim, coords, self.colors.clone())
    }

    pub fn spine_count(&self) -> usize {
        self.colors
            .iter()
            .filter(|c| **c == Color::Spine)
            .count()
    }
}

/// Deterministic generator: a ChaCha8 stream keyed by a 64-bit seed.
///
/// The algorithm is fixed on purpose; identical seed and call sequence
/// reproduce identical draws on every platform and thread count.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// Stream convention shared by the library and its harness: particle
/// initialization, algorithm randomness (branching), and metric
/// replication each draw from their own stream of the run seed.
pub const STREAM_INIT: u64 = 0;
pub const STREAM_ALGORITHM: u64 = 1;
pub const STREAM_METRICS: u64 = 2;

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream under the same seed; streams never overlap, so
    /// one run can hand out separate generators for initialization, the
    /// dynamics, and metric replication.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child generator seeded from the next draw of this one.
    pub fn spawn(&mut self) -> SeededRng {
        SeededRng::new(self.inner.next_u64())
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest);
    }
}
