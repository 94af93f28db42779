//! The `run` subcommand: execute one configured sampling run (or a block
//! of replicas) and write its artifacts.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bsvgd::chain::{self, BsvgdConfig, BsvgdTrace, Phase, TraceEntry};
use bsvgd::core::{
    Color, Particle, ParticleCloud, Position, SeededRng, STREAM_INIT, STREAM_METRICS,
};
use bsvgd::io;
use bsvgd::metrics;
use bsvgd::svgd;
use bsvgd::targets::{ScoreModel, Target};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{canonical_toml, parse_config, Algorithm, RunConfig};
use crate::presets;

/// Failure classes mapped onto the process exit codes: configuration and
/// usage problems exit 2, numeric divergence exits 3.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Divergence(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Divergence(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) | Failure::Divergence(msg) => f.write_str(msg),
        }
    }
}

impl From<bsvgd::Error> for Failure {
    fn from(e: bsvgd::Error) -> Self {
        match e {
            bsvgd::Error::DivergentDynamics { .. } => Failure::Divergence(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct RunArgs {
    /// Config file path, or the name of an embedded preset.
    #[arg(long)]
    pub config: String,
    /// Override the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: "<config name>-seed<seed>").
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the config's algorithm.
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    /// Run this many independent replicas with seeds seed, seed+1, ...
    /// in subdirectories replica_00, replica_01, ...
    #[arg(long)]
    pub replicas: Option<usize>,
    /// For svgd runs: record a snapshot every this many iterations in
    /// addition to the final state.
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    /// Write the deterministic work counter instead of measured seconds
    /// into the wall_time_s columns, making re-runs byte-identical.
    #[arg(long)]
    pub logical_time: bool,
}

pub fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let (text, name) = resolve_config(&args.config)?;
    let mut config = parse_config(&text).map_err(Failure::Usage)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(algorithm) = args.algorithm {
        config.algorithm = algorithm;
        // The override may demand sections the original algorithm didn't.
        config.validate().map_err(Failure::Usage)?;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{name}-seed{}", config.seed)));
    match args.replicas {
        None => {
            let summary = execute(&config, &out, args)?;
            println!("{}", summary.describe(&out));
        }
        Some(0) => return Err(Failure::Usage("--replicas must be >= 1".into())),
        Some(n) => {
            for i in 0..n {
                let mut replica = config.clone();
                replica.seed = config.seed.wrapping_add(i as u64);
                let dir = out.join(format!("replica_{i:02}"));
                let summary = execute(&replica, &dir, args)?;
                println!("{}", summary.describe(&dir));
            }
        }
    }
    Ok(())
}

fn resolve_config(spec: &str) -> Result<(String, String), Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {spec:?}: {e}")))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        return Ok((text, name));
    }
    match presets::lookup(spec) {
        Some(text) => Ok((text.to_string(), spec.to_string())),
        None => Err(Failure::Usage(format!(
            "--config {spec:?} is neither a readable file nor a preset (presets: {})",
            presets::NAMES.join(", ")
        ))),
    }
}

struct ExecSummary {
    phases: usize,
    final_population: usize,
    final_w: Option<f64>,
}

impl ExecSummary {
    fn describe(&self, dir: &Path) -> String {
        let w = match self.final_w {
            Some(w) => format!(", final W {}", io::format_float(w)),
            None => String::new(),
        };
        format!(
            "wrote {} ({} phases, final population {}{w})",
            dir.display(),
            self.phases,
            self.final_population
        )
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    version: &'static str,
    algorithm: &'static str,
    seed: u64,
    config_sha256: String,
    logical_time: bool,
    total_wall_time_s: f64,
    converged: bool,
    convergence_time_s: Option<f64>,
    config: &'a RunConfig,
}

fn execute(config: &RunConfig, out: &Path, args: &RunArgs) -> Result<ExecSummary, Failure> {
    let target = config.target.build().map_err(Failure::Usage)?;
    let kernel = config
        .kernel
        .build(target.dimension())
        .map_err(Failure::Usage)?;
    let svgd_config = config.svgd.build(kernel).map_err(Failure::Usage)?;
    fs::create_dir_all(out)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out.display())))?;

    let started = Instant::now();
    let (trace, converged) = match config.algorithm {
        Algorithm::Svgd => run_svgd(config, &target, &svgd_config, args.snapshot_every)?,
        Algorithm::Bsvgd => (run_branched(config, &target, svgd_config)?, true),
    };
    let elapsed = started.elapsed().as_secs_f64();

    let rows = io::write_run_artifacts(out, &trace, args.logical_time)?;
    // Under logical time every reported duration comes from the work
    // ledger, so run.json stays reproducible alongside the CSVs.
    let total_wall_time_s = if args.logical_time {
        rows.last().map(|r| r.wall_time_s).unwrap_or(0.0)
    } else {
        elapsed
    };
    let mut final_w = None;
    if config.metrics.enabled {
        let mut rng = SeededRng::with_stream(config.seed, STREAM_METRICS);
        let trajectory =
            metrics::trajectory_report(&trace, &target, config.metrics.replicates, &mut rng)?;
        io::write_metrics_file(&out.join(io::METRICS_FILE), &trajectory, args.logical_time)?;
        final_w = trajectory.points.last().map(|p| p.estimate.mean);
    }

    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION"),
        algorithm: config.algorithm.as_str(),
        seed: config.seed,
        config_sha256: sha256_hex(canonical_toml(config).as_bytes()),
        logical_time: args.logical_time,
        total_wall_time_s,
        converged,
        convergence_time_s: converged
            .then(|| rows.last().map(|r| r.wall_time_s))
            .flatten(),
        config,
    };
    let json = serde_json::to_string_pretty(&record)
        .map_err(|e| Failure::Usage(format!("cannot serialize run.json: {e}")))?;
    fs::write(out.join("run.json"), json + "\n")
        .map_err(|e| Failure::Usage(format!("cannot write run.json: {e}")))?;

    Ok(ExecSummary {
        phases: trace.entries.len(),
        final_population: trace.final_cloud().map(|c| c.len()).unwrap_or(0),
        final_w,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn standard_normal_coords(dim: usize, std: f64, rng: &mut SeededRng) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        })
        .collect()
}

fn run_svgd(
    config: &RunConfig,
    target: &Target,
    svgd_config: &svgd::SvgdConfig,
    snapshot_every: Option<usize>,
) -> Result<(BsvgdTrace, bool), Failure> {
    let init = config.init.as_ref().expect("validated");
    let dim = target.dimension();
    let mut rng = SeededRng::with_stream(config.seed, STREAM_INIT);
    let positions = (0..init.count)
        .map(|_| Position::new(standard_normal_coords(dim, init.std, &mut rng)))
        .collect::<bsvgd::Result<Vec<Position>>>()?;

    let every = snapshot_every.filter(|&k| k > 0);
    let mut recorded: Vec<(usize, Vec<f64>)> = Vec::new();
    let report = svgd::run_observed(&positions, target, svgd_config, |iteration, coords| {
        if every.is_some_and(|k| iteration % k == 0) {
            recorded.push((iteration, coords.to_vec()));
        }
    })?;
    if recorded.last().map(|r| r.0) != Some(report.iterations_used) {
        let mut coords = Vec::with_capacity(init.count * dim);
        for p in &report.final_positions {
            coords.extend_from_slice(p.coords());
        }
        recorded.push((report.iterations_used, coords));
    }

    let mut cumulative = Vec::with_capacity(report.per_iteration_wall_time.len());
    let mut acc = Duration::ZERO;
    for d in &report.per_iteration_wall_time {
        acc += *d;
        cumulative.push(acc);
    }
    let colors = vec![Color::Explorer; init.count];
    let pair_work = (init.count * init.count) as u64;
    let entries = recorded
        .into_iter()
        .map(|(iteration, coords)| {
            Ok(TraceEntry {
                level: init.count,
                phase: Phase::PostSvgd,
                wall_time: cumulative[iteration - 1],
                work_units: iteration as u64 * pair_work,
                svgd_iterations: Some(iteration),
                svgd_displacement: (iteration == report.iterations_used)
                    .then_some(report.final_displacement),
                cloud: ParticleCloud::from_parts(dim, coords, colors.clone())?,
            })
        })
        .collect::<bsvgd::Result<Vec<TraceEntry>>>()?;
    let converged = report.final_displacement <= svgd_config.threshold;
    Ok((BsvgdTrace { entries }, converged))
}

fn run_branched(
    config: &RunConfig,
    target: &Target,
    svgd_config: svgd::SvgdConfig,
) -> Result<BsvgdTrace, Failure> {
    let section = config.bsvgd.as_ref().expect("validated");
    let laws = config
        .branching
        .as_ref()
        .expect("validated")
        .build()
        .map_err(Failure::Usage)?;
    let precision = section.precision.build().map_err(Failure::Usage)?;
    let dim = target.dimension();
    let mut rng = SeededRng::with_stream(config.seed, STREAM_INIT);
    let particles = (0..section.initial.count)
        .map(|i| {
            let position = Position::new(standard_normal_coords(dim, section.initial.std, &mut rng))?;
            let color = if i == 0 { Color::Spine } else { Color::Explorer };
            Ok(Particle::new(position, color))
        })
        .collect::<bsvgd::Result<Vec<Particle>>>()?;
    let initial_cloud = ParticleCloud::new(particles)?;
    let bsvgd_config = BsvgdConfig::new(
        svgd_config,
        precision,
        laws,
        section.max_population,
        initial_cloud,
        config.seed,
    )?;
    Ok(chain::run_bsvgd(target, &bsvgd_config)?)
}
