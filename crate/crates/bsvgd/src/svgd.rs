//! Stein variational gradient descent: kernelized score-field updates of a
//! fixed-size particle population.
//!
//! One iteration moves every particle along
//!   phi(x_i) = (1/l) sum_j [ K(x_j, x_i) score(x_j) + grad_1 K(x_j, x_i) ]
//! evaluated at the current (pre-update) positions, scaled by the step
//! schedule. The loop stops at the iteration cap or when the mean particle
//! displacement falls to the threshold.
//!
//! Updates are synchronous and the sum over j runs in ascending order, so
//! results are bitwise reproducible at any thread count.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::core::Position;
use crate::error::{Error, Result};
use crate::kernels::GaussianKernel;
use crate::targets::ScoreModel;

/// Default iteration cap for standalone runs. A working default, not a
/// prescribed value; override it in config for serious experiments.
pub const DEFAULT_MAX_ITERATIONS: usize = 2000;

/// Step-size sequence for the Euler updates.
#[derive(Clone, Debug)]
pub enum StepSchedule {
    /// Fixed step. Zero is allowed so a no-motion run is expressible.
    Constant { eps: f64 },
    /// Smooth interpolation from `e_start` down to `e_end` over
    /// `max_iterations` steps:
    ///   eps_d = e_start - (e_start - e_end) / (1 + exp(-0.01 (d - M/2))).
    Sigmoid {
        e_start: f64,
        e_end: f64,
        max_iterations: usize,
    },
}

impl StepSchedule {
    pub fn constant(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "constant step must be non-negative, got {eps}"
            )));
        }
        Ok(StepSchedule::Constant { eps })
    }

    pub fn sigmoid(e_start: f64, e_end: f64, max_iterations: usize) -> Result<Self> {
        if !e_start.is_finite() || !e_end.is_finite() || e_end <= 0.0 || e_start < e_end {
            return Err(Error::InvalidParameter(format!(
                "sigmoid schedule needs e_start >= e_end > 0, got {e_start} and {e_end}"
            )));
        }
        if max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "schedule needs at least one iteration".into(),
            ));
        }
        Ok(StepSchedule::Sigmoid {
            e_start,
            e_end,
            max_iterations,
        })
    }

    /// Step size for iteration `d` (0-based). Sigmoid schedules are defined
    /// for 0 <= d <= M.
    pub fn step_size(&self, d: usize) -> Result<f64> {
        match self {
            StepSchedule::Constant { eps } => Ok(*eps),
            StepSchedule::Sigmoid {
                e_start,
                e_end,
                max_iterations,
            } => {
                if d > *max_iterations {
                    return Err(Error::ScheduleOutOfRange {
                        index: d,
                        max: *max_iterations,
                    });
                }
                let m = *max_iterations as f64;
                let sig = 1.0 / (1.0 + (-0.01 * (d as f64 - m / 2.0)).exp());
                Ok(e_start - (e_start - e_end) * sig)
            }
        }
    }

    /// Largest iteration index the schedule can serve.
    fn max_index(&self) -> usize {
        match self {
            StepSchedule::Constant { .. } => usize::MAX,
            StepSchedule::Sigmoid { max_iterations, .. } => *max_iterations,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SvgdConfig {
    pub schedule: StepSchedule,
    pub max_iterations: usize,
    pub threshold: f64,
    pub kernel: GaussianKernel,
}

impl SvgdConfig {
    pub fn new(
        schedule: StepSchedule,
        max_iterations: usize,
        threshold: f64,
        kernel: GaussianKernel,
    ) -> Result<Self> {
        if max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        if schedule.max_index() < max_iterations.saturating_sub(1) {
            return Err(Error::InvalidParameter(
                "schedule covers fewer iterations than max_iterations".into(),
            ));
        }
        Ok(Self {
            schedule,
            max_iterations,
            threshold,
            kernel,
        })
    }

    /// Same settings with a different stopping threshold.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(
            self.schedule.clone(),
            self.max_iterations,
            threshold,
            self.kernel.clone(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct SvgdRunReport {
    /// Positions after the last iteration, in the input particle order.
    pub final_positions: Vec<Position>,
    pub iterations_used: usize,
    /// Mean displacement of the last iteration.
    pub final_displacement: f64,
    pub per_iteration_wall_time: Vec<Duration>,
}

pub(crate) struct FlatReport {
    pub iterations_used: usize,
    pub final_displacement: f64,
    pub per_iteration_wall_time: Vec<Duration>,
}

/// The update direction phi for particle `i`, summed in ascending particle
/// order over the current positions.
pub fn direction<M: ScoreModel + ?Sized>(
    positions: &[Position],
    i: usize,
    model: &M,
    kernel: &GaussianKernel,
) -> Result<Position> {
    let ell = positions.len();
    if ell == 0 {
        return Err(Error::EmptyCloud);
    }
    if i >= ell {
        return Err(Error::IndexOutOfRange { index: i, len: ell });
    }
    let dim = positions[0].dim();
    if dim != kernel.dim() || dim != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            actual: dim,
        });
    }
    let xi = positions[i].coords();
    let mut acc = vec![0.0; dim];
    let scale = -2.0 / kernel.bandwidth();
    for xj in positions {
        let xj = xj.coords();
        let k = kernel.eval(xj, xi)?;
        let score = model.score(xj);
        if score.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: score.len(),
            });
        }
        for c in 0..dim {
            acc[c] += k * score[c] + scale * (xj[c] - xi[c]) * k;
        }
    }
    for a in &mut acc {
        *a /= ell as f64;
        if !a.is_finite() {
            return Err(Error::DivergentDynamics {
                iteration: 0,
                level: None,
            });
        }
    }
    Position::new(acc)
}

/// Accumulates one iteration's direction sums (not yet divided by l).
///
/// Serial path: each unordered pair is visited once and contributes to both
/// endpoints; the shared exponential dominates the cost, so this halves the
/// work. Parallel path: each particle computes its full row independently.
/// Both produce additions to a given accumulator in ascending-j order, so
/// their outputs are bitwise identical.
fn accumulate_directions(
    coords: &[f64],
    scores: &[f64],
    dim: usize,
    kernel: &GaussianKernel,
    dirs: &mut [f64],
) {
    let ell = coords.len() / dim;
    let pref = kernel.prefactor();
    let bw = kernel.bandwidth();
    let scale = -2.0 / bw;
    dirs.fill(0.0);

    if rayon::current_num_threads() > 1 && ell >= 64 {
        dirs.par_chunks_mut(dim).enumerate().for_each(|(i, out)| {
            let xi = &coords[i * dim..(i + 1) * dim];
            for j in 0..ell {
                let xj = &coords[j * dim..(j + 1) * dim];
                let sj = &scores[j * dim..(j + 1) * dim];
                let mut sq = 0.0;
                for c in 0..dim {
                    let d = xj[c] - xi[c];
                    sq += d * d;
                }
                let k = pref * (-sq / bw).exp();
                for c in 0..dim {
                    out[c] += k * sj[c] + scale * (xj[c] - xi[c]) * k;
                }
            }
        });
        return;
    }

    for i in 0..ell {
        let xi = i * dim;
        // Diagonal term: the kernel gradient vanishes, K(x, x) is the
        // prefactor exactly.
        for c in 0..dim {
            dirs[xi + c] += pref * scores[xi + c] + scale * 0.0 * pref;
        }
        for j in (i + 1)..ell {
            let xj = j * dim;
            let mut sq = 0.0;
            for c in 0..dim {
                let d = coords[xj + c] - coords[xi + c];
                sq += d * d;
            }
            let k = pref * (-sq / bw).exp();
            for c in 0..dim {
                let diff = coords[xj + c] - coords[xi + c];
                dirs[xi + c] += k * scores[xj + c] + scale * diff * k;
                dirs[xj + c] += k * scores[xi + c] + scale * (coords[xi + c] - coords[xj + c]) * k;
            }
        }
    }
}

/// Core loop over row-major coordinates, mutated in place.
pub(crate) fn run_flat<M: ScoreModel + ?Sized>(
    coords: &mut [f64],
    dim: usize,
    model: &M,
    config: &SvgdConfig,
    mut observer: Option<&mut dyn FnMut(usize, &[f64])>,
) -> Result<FlatReport> {
    let ell = coords.len() / dim;
    if ell == 0 {
        return Err(Error::EmptyCloud);
    }
    let expected = kernel_dim_checked(config, model)?;
    if dim != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: dim,
        });
    }
    let ell_f = ell as f64;
    let mut scores = vec![0.0; coords.len()];
    let mut dirs = vec![0.0; coords.len()];
    let mut times = Vec::new();

    // Start above the threshold so at least one iteration runs.
    let mut h = 2.0 * config.threshold;
    let mut d = 0;
    while d < config.max_iterations && h > config.threshold {
        let started = Instant::now();
        let eps = config.schedule.step_size(d)?;

        for (j, row) in coords.chunks_exact(dim).enumerate() {
            let s = model.score(row);
            scores[j * dim..(j + 1) * dim].copy_from_slice(&s);
        }
        accumulate_directions(coords, &scores, dim, &config.kernel, &mut dirs);

        let mut sum_norm = 0.0;
        for i in 0..ell {
            let mut sq = 0.0;
            for c in 0..dim {
                let delta = eps * (dirs[i * dim + c] / ell_f);
                coords[i * dim + c] += delta;
                sq += delta * delta;
            }
            sum_norm += sq.sqrt();
        }
        h = sum_norm / ell_f;

        if coords.iter().any(|c| !c.is_finite()) || !h.is_finite() {
            return Err(Error::DivergentDynamics {
                iteration: d,
                level: None,
            });
        }
        times.push(started.elapsed());
        d += 1;
        if let Some(obs) = observer.as_mut() {
            obs(d, coords);
        }
    }

    Ok(FlatReport {
        iterations_used: d,
        final_displacement: h,
        per_iteration_wall_time: times,
    })
}

fn kernel_dim_checked<M: ScoreModel + ?Sized>(
    config: &SvgdConfig,
    model: &M,
) -> Result<usize> {
    if config.kernel.dim() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            actual: config.kernel.dim(),
        });
    }
    Ok(config.kernel.dim())
}

/// Runs the iteration to the cap or the displacement threshold and reports
/// final positions in the input order.
pub fn run<M: ScoreModel + ?Sized>(
    positions: &[Position],
    model: &M,
    config: &SvgdConfig,
) -> Result<SvgdRunReport> {
    run_observed(positions, model, config, |_, _| {})
}

/// Like [`run`], with a callback invoked after every completed iteration
/// with (iterations done, row-major coordinates). Callback time is excluded
/// from the per-iteration timings.
pub fn run_observed<M: ScoreModel + ?Sized, F: FnMut(usize, &[f64])>(
    positions: &[Position],
    model: &M,
    config: &SvgdConfig,
    mut observer: F,
) -> Result<SvgdRunReport> {
    if positions.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let dim = kernel_dim_checked(config, model)?;
    for p in positions {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
    }
    let mut coords: Vec<f64> = Vec::with_capacity(positions.len() * dim);
    for p in positions {
        coords.extend_from_slice(p.coords());
    }
    let report = run_flat(
        &mut coords,
        dim,
        model,
        config,
        Some(&mut |iter: usize, c: &[f64]| observer(iter, c)),
    )?;
    let final_positions = coords
        .chunks_exact(dim)
        .map(|row| Position::new(row.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SvgdRunReport {
        final_positions,
        iterations_used: report.iterations_used,
        final_displacement: report.final_displacement,
        per_iteration_wall_time: report.per_iteration_wall_time,
    })
}
