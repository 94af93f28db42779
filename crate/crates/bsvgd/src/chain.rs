//! Branched SVGD: alternate SVGD refinement with branching until the
//! population exceeds its cap.
//!
//! Each level runs the dynamics on the current cloud with a stopping
//! threshold that tightens as the population grows (default 1/l, which
//! avoids early stops at small populations), then branches. After the
//! branch that pushes the population past the cap, one final refinement
//! runs so the returned state, like every level's, is a post-dynamics
//! cloud.
//!
//! The trace records a snapshot after every phase together with cumulative
//! wall time and a deterministic work counter (pairwise interactions for
//! dynamics phases, emitted particles for branch phases); the counter
//! gives a seed-reproducible time axis for byte-stable artifacts.

use std::time::{Duration, Instant};

use crate::branching::{branch_step, OffspringLaws};
use crate::core::{ParticleCloud, SeededRng, STREAM_ALGORITHM};
use crate::error::{Error, Result};
use crate::svgd::{self, SvgdConfig};
use crate::targets::ScoreModel;

/// Default population cap for desk-scale runs.
pub const DEFAULT_MAX_POPULATION: usize = 500;

/// Stopping threshold 1/l for a population of l particles.
pub fn precision_default(ell: usize) -> Result<f64> {
    if ell < 1 {
        return Err(Error::InvalidParameter(
            "precision rule needs a population of at least 1".into(),
        ));
    }
    Ok(1.0 / ell as f64)
}

/// Level-dependent stopping threshold for the per-level dynamics.
#[derive(Clone, Debug)]
pub enum PrecisionRule {
    /// eta(l) = 1/l.
    OneOverEll,
    /// The same threshold at every level.
    Fixed(f64),
}

impl PrecisionRule {
    pub fn threshold(&self, ell: usize) -> Result<f64> {
        match self {
            PrecisionRule::OneOverEll => precision_default(ell),
            PrecisionRule::Fixed(eta) => {
                if !eta.is_finite() || *eta <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "fixed precision must be positive, got {eta}"
                    )));
                }
                Ok(*eta)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    PostSvgd,
    PostBranch,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PostSvgd => "post-svgd",
            Phase::PostBranch => "post-branch",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        match s {
            "post-svgd" => Ok(Phase::PostSvgd),
            "post-branch" => Ok(Phase::PostBranch),
            other => Err(Error::Parse(format!("unknown phase {other:?}"))),
        }
    }
}

/// Snapshot of the state after one phase.
#[derive(Clone, Debug)]
pub struct TraceEntry {
    /// Population size of the recorded snapshot.
    pub level: usize,
    pub phase: Phase,
    /// Cumulative wall time since the run started.
    pub wall_time: Duration,
    /// Cumulative deterministic work counter.
    pub work_units: u64,
    /// Iterations the dynamics used, for post-dynamics entries.
    pub svgd_iterations: Option<usize>,
    /// Mean displacement of the last iteration, for post-dynamics entries.
    pub svgd_displacement: Option<f64>,
    pub cloud: ParticleCloud,
}

#[derive(Clone, Debug, Default)]
pub struct BsvgdTrace {
    pub entries: Vec<TraceEntry>,
}

impl BsvgdTrace {
    pub fn populations(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.cloud.len()).collect()
    }

    pub fn final_cloud(&self) -> Option<&ParticleCloud> {
        self.entries.last().map(|e| &e.cloud)
    }
}

#[derive(Clone, Debug)]
pub struct BsvgdConfig {
    /// Template for the per-level dynamics; its threshold is replaced by
    /// the precision rule at each level.
    pub svgd: SvgdConfig,
    pub precision: PrecisionRule,
    pub laws: OffspringLaws,
    /// Branching continues while the population is at most this cap, so
    /// the final population exceeds it by at most the largest offspring
    /// count of one branch.
    pub max_population: usize,
    /// Start state; must hold exactly one spine.
    pub initial_cloud: ParticleCloud,
    pub seed: u64,
}

impl BsvgdConfig {
    pub fn new(
        svgd: SvgdConfig,
        precision: PrecisionRule,
        laws: OffspringLaws,
        max_population: usize,
        initial_cloud: ParticleCloud,
        seed: u64,
    ) -> Result<Self> {
        if max_population < initial_cloud.len() {
            return Err(Error::InvalidParameter(format!(
                "max_population {} is below the initial population {}",
                max_population,
                initial_cloud.len()
            )));
        }
        let spines = initial_cloud.spine_count();
        if spines != 1 {
            return Err(Error::InvalidBranchState { spines });
        }
        if svgd.kernel.dim() != initial_cloud.dim() {
            return Err(Error::DimensionMismatch {
                expected: initial_cloud.dim(),
                actual: svgd.kernel.dim(),
            });
        }
        Ok(Self {
            svgd,
            precision,
            laws,
            max_population,
            initial_cloud,
            seed,
        })
    }
}

/// Runs the alternation and returns the full phase-by-phase trace.
pub fn run_bsvgd<M: ScoreModel + ?Sized>(
    model: &M,
    config: &BsvgdConfig,
) -> Result<BsvgdTrace> {
    if model.dimension() != config.initial_cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.initial_cloud.dim(),
            actual: model.dimension(),
        });
    }
    let dim = config.initial_cloud.dim();
    // Branching draws live on their own stream, so initialization draws
    // derived elsewhere from the same seed stay independent.
    let mut rng = SeededRng::with_stream(config.seed, STREAM_ALGORITHM);
    let mut cloud = config.initial_cloud.clone();
    let mut entries = Vec::new();
    let mut work: u64 = 0;
    let started = Instant::now();

    loop {
        let ell = cloud.len();
        let threshold = config.precision.threshold(ell)?;
        let level_config = config.svgd.with_threshold(threshold)?;
        let mut coords = cloud.coords().to_vec();
        let report = svgd::run_flat(&mut coords, dim, model, &level_config, None)
            .map_err(|e| match e {
                Error::DivergentDynamics { iteration, .. } => Error::DivergentDynamics {
                    iteration,
                    level: Some(ell),
                },
                other => other,
            })?;
        cloud = cloud.with_coords(coords)?;
        work += report.iterations_used as u64 * (ell * ell) as u64;
        entries.push(TraceEntry {
            level: ell,
            phase: Phase::PostSvgd,
            wall_time: started.elapsed(),
            work_units: work,
            svgd_iterations: Some(report.iterations_used),
            svgd_displacement: Some(report.final_displacement),
            cloud: cloud.clone(),
        });

        if ell > config.max_population {
            break;
        }

        cloud = branch_step(&cloud, &config.laws, &mut rng)?;
        work += cloud.len() as u64;
        entries.push(TraceEntry {
            level: cloud.len(),
            phase: Phase::PostBranch,
            wall_time: started.elapsed(),
            work_units: work,
            svgd_iterations: None,
            svgd_displacement: None,
            cloud: cloud.clone(),
        });
    }

    Ok(BsvgdTrace { entries })
}
