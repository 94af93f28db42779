//! The `wasserstein` and `report` subcommands: distance between snapshot
//! files, and a merged comparison table over completed run directories.

use std::fs;
use std::path::{Path, PathBuf};

use bsvgd::io;
use bsvgd::metrics;
use serde::Deserialize;

use crate::run::Failure;

pub fn cmd_wasserstein(file_a: &Path, file_b: &Path) -> Result<(), Failure> {
    let a = io::read_snapshot_file(file_a)?;
    let b = io::read_snapshot_file(file_b)?;
    let positions_a: Vec<&[f64]> = a.positions().collect();
    let positions_b: Vec<&[f64]> = b.positions().collect();
    let distance = metrics::wasserstein2(&positions_a, &positions_b)?;
    println!("{distance:.11e}");
    Ok(())
}

/// The slice of run.json the report needs; extra fields are ignored.
#[derive(Deserialize)]
struct RunMeta {
    algorithm: String,
    converged: bool,
    convergence_time_s: Option<f64>,
}

pub fn cmd_report(runs: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    let mut replicate_count: Option<usize> = None;
    let mut lines = Vec::new();
    for dir in runs {
        let metrics_path = dir.join(io::METRICS_FILE);
        if !metrics_path.is_file() {
            return Err(Failure::Usage(format!(
                "{} has no {}",
                dir.display(),
                io::METRICS_FILE
            )));
        }
        let rows = io::read_metrics_file(&metrics_path)?;
        let meta_path = dir.join("run.json");
        let meta_text = fs::read_to_string(&meta_path).map_err(|e| {
            Failure::Usage(format!("cannot read {}: {e}", meta_path.display()))
        })?;
        let meta: RunMeta = serde_json::from_str(&meta_text).map_err(|e| {
            Failure::Usage(format!("{} is not a run record: {e}", meta_path.display()))
        })?;
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());

        for row in rows {
            match replicate_count {
                None => replicate_count = Some(row.replicates.len()),
                Some(count) if count == row.replicates.len() => {}
                Some(count) => {
                    return Err(Failure::Usage(format!(
                        "cannot merge runs with different replicate counts ({count} vs {})",
                        row.replicates.len()
                    )))
                }
            }
            let mut line = format!(
                "{},{},{},{},{},{},{},{}",
                name,
                meta.algorithm,
                meta.converged,
                meta.convergence_time_s
                    .map(io::format_float)
                    .unwrap_or_default(),
                row.phase_index,
                io::format_float(row.wall_time_s),
                row.sample_size,
                io::format_float(row.w_mean),
            );
            for w in &row.replicates {
                line.push(',');
                line.push_str(&io::format_float(*w));
            }
            lines.push(line);
        }
    }

    let mut table = String::from("run,algorithm,converged,convergence_time_s,");
    table.push_str(&io::metrics_header(replicate_count.unwrap_or(0)));
    table.push('\n');
    for line in &lines {
        table.push_str(line);
        table.push('\n');
    }

    match out {
        Some(path) => fs::write(path, table)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{table}"),
    }
    Ok(())
}
