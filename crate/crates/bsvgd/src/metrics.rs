//! Exact empirical 2-Wasserstein distance between equal-size clouds,
//! averaged distance-to-target estimators, and cloud diagnostics.
//!
//! The distance solves the underlying assignment problem exactly with a
//! shortest-augmenting-path method in O(l^3); no entropic or sliced
//! approximations, so values are reproducible to the bit for a fixed
//! seed. Selected squared distances are summed in sorted order, which
//! makes the distance bitwise symmetric in its arguments and bitwise
//! invariant under permuting either sample.

use std::time::Duration;

use rayon::prelude::*;

use crate::chain::BsvgdTrace;
use crate::core::{ParticleCloud, Position, SeededRng};
use crate::error::{Error, Result};
use crate::targets::ExactSampler;

/// Optimal assignment for a square cost matrix.
#[derive(Clone, Debug)]
pub struct AssignmentResult {
    /// `permutation[i]` is the column assigned to row `i`; a bijection.
    pub permutation: Vec<usize>,
    /// Sum of the selected cost entries in row order.
    pub total_cost: f64,
}

/// Finds a permutation minimizing the total selected cost.
///
/// Shortest augmenting path with dual potentials; exact optimum for any
/// finite cost matrix.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Result<AssignmentResult> {
    let n = cost.len();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "assignment needs a non-empty cost matrix".into(),
        ));
    }
    let mut flat = Vec::with_capacity(n * n);
    for row in cost {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        if row.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        flat.extend_from_slice(row);
    }
    Ok(solve_assignment_flat(&flat, n))
}

/// Core solver on a row-major matrix already known to be square and finite.
pub(crate) fn solve_assignment_flat(cost: &[f64], n: usize) -> AssignmentResult {
    debug_assert_eq!(cost.len(), n * n);
    // 1-based arrays with a virtual column 0; p[j] is the row matched to
    // column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let reduced = row[j - 1] - u[i0] - v[j];
                    if reduced < minv[j] {
                        minv[j] = reduced;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut permutation = vec![0usize; n];
    for j in 1..=n {
        permutation[p[j] - 1] = j - 1;
    }
    let total_cost = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    AssignmentResult {
        permutation,
        total_cost,
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn check_sample<A: AsRef<[f64]>>(points: &[A], dim: usize) -> Result<()> {
    for p in points {
        let coords = p.as_ref();
        if coords.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(())
}

/// Exact empirical 2-Wasserstein distance between two equal-size samples.
///
/// Square root of the optimal mean squared pairing distance.
pub fn wasserstein2<A, B>(mu: &[A], nu: &[B]) -> Result<f64>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    if mu.len() != nu.len() {
        return Err(Error::UnequalSampleSizes {
            left: mu.len(),
            right: nu.len(),
        });
    }
    if mu.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let dim = mu[0].as_ref().len();
    check_sample(mu, dim)?;
    check_sample(nu, dim)?;
    let n = mu.len();
    let mut cost = vec![0.0f64; n * n];
    for (i, row) in cost.chunks_exact_mut(n).enumerate() {
        let a = mu[i].as_ref();
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = squared_distance(a, nu[j].as_ref());
        }
    }
    let assignment = solve_assignment_flat(&cost, n);
    let mut selected: Vec<f64> = assignment
        .permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .collect();
    selected.sort_by(f64::total_cmp);
    let total: f64 = selected.iter().sum();
    Ok((total / n as f64).sqrt())
}

/// Mean distance to the target together with the per-replicate values.
#[derive(Clone, Debug)]
pub struct WassersteinEstimate {
    pub mean: f64,
    pub replicates: Vec<f64>,
}

/// Averages the distance from a snapshot to `replicates` fresh target
/// samples of the snapshot's own size.
///
/// All reference samples are drawn first, so the RNG stream does not
/// depend on how the distance evaluations are scheduled.
pub fn w_estimator<A, S>(
    snapshot: &[A],
    target: &S,
    replicates: usize,
    rng: &mut SeededRng,
) -> Result<WassersteinEstimate>
where
    A: AsRef<[f64]> + Sync,
    S: ExactSampler + ?Sized,
{
    if replicates < 1 {
        return Err(Error::InvalidParameter(
            "estimator needs at least one replicate".into(),
        ));
    }
    if snapshot.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let ell = snapshot.len();
    let samples: Vec<Vec<Vec<f64>>> = (0..replicates).map(|_| target.sample(ell, rng)).collect();
    let distances: Vec<f64> = samples
        .par_iter()
        .map(|sample| wasserstein2(snapshot, sample))
        .collect::<Result<_>>()?;
    let mean = distances.iter().sum::<f64>() / replicates as f64;
    Ok(WassersteinEstimate {
        mean,
        replicates: distances,
    })
}

/// Distance estimate for one recorded snapshot.
#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub phase_index: usize,
    pub wall_time: Duration,
    pub work_units: u64,
    pub sample_size: usize,
    pub estimate: WassersteinEstimate,
}

/// Distance-to-target trajectory over a run, one point per snapshot.
#[derive(Clone, Debug, Default)]
pub struct DistanceTrajectory {
    pub points: Vec<TrajectoryPoint>,
}

/// Evaluates the averaged estimator on every snapshot of a trace.
///
/// Wall times and work counters pass through verbatim; the reference
/// sample size follows each snapshot's population. Fresh target samples
/// are drawn for every snapshot and replicate.
pub fn trajectory_report<S>(
    trace: &BsvgdTrace,
    target: &S,
    replicates: usize,
    rng: &mut SeededRng,
) -> Result<DistanceTrajectory>
where
    S: ExactSampler + ?Sized,
{
    if trace.entries.is_empty() {
        return Err(Error::InvalidParameter(
            "trajectory report needs a non-empty trace".into(),
        ));
    }
    let mut points = Vec::with_capacity(trace.entries.len());
    for (phase_index, entry) in trace.entries.iter().enumerate() {
        let snapshot: Vec<&[f64]> = entry.cloud.positions().collect();
        let estimate = w_estimator(&snapshot, target, replicates, rng)?;
        points.push(TrajectoryPoint {
            phase_index,
            wall_time: entry.wall_time,
            work_units: entry.work_units,
            sample_size: entry.cloud.len(),
            estimate,
        });
    }
    Ok(DistanceTrajectory { points })
}

/// Draws `ell` independent target points as validated positions.
pub fn exact_target_sampler<S>(
    target: &S,
    ell: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Position>>
where
    S: ExactSampler + ?Sized,
{
    if ell < 1 {
        return Err(Error::InvalidParameter(
            "sampler needs at least one draw".into(),
        ));
    }
    target
        .sample(ell, rng)
        .into_iter()
        .map(Position::new)
        .collect()
}

/// Fraction of particles that share a cluster of pairwise distance
/// below `tol`; 0 means every pairwise distance is at least `tol`.
pub fn atom_diagnostic(cloud: &ParticleCloud, tol: f64) -> Result<f64> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "atom tolerance must be positive, got {tol}"
        )));
    }
    let ell = cloud.len();
    let tol_sq = tol * tol;
    let mut clustered = vec![false; ell];
    for i in 0..ell {
        for j in (i + 1)..ell {
            if squared_distance(cloud.position(i), cloud.position(j)) < tol_sq {
                clustered[i] = true;
                clustered[j] = true;
            }
        }
    }
    let count = clustered.iter().filter(|&&c| c).count();
    Ok(count as f64 / ell as f64)
}

/// Number of mode centers with at least one particle within `radius`.
pub fn mode_coverage<A: AsRef<[f64]>>(
    cloud: &ParticleCloud,
    mode_centers: &[A],
    radius: f64,
) -> Result<usize> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "coverage radius must be positive, got {radius}"
        )));
    }
    check_sample(mode_centers, cloud.dim())?;
    let radius_sq = radius * radius;
    let covered = mode_centers
        .iter()
        .filter(|center| {
            cloud
                .positions()
                .any(|p| squared_distance(p, center.as_ref()) <= radius_sq)
        })
        .count();
    Ok(covered)
}
