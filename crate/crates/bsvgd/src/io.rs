//! CSV artifacts for runs: cloud snapshots, the phase-by-phase trace
//! index, and distance-metric tables.
//!
//! Floats are written in their shortest round-trip decimal form, so a
//! repeated run with the same seed produces byte-identical files and the
//! readers recover every coordinate exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use crate::chain::{BsvgdTrace, Phase};
use crate::core::{Color, Particle, ParticleCloud, Position};
use crate::error::{Error, Result};
use crate::metrics::DistanceTrajectory;

pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRACE_HEADER: &str = "phase_index,level,phase,wall_time_s,sample_size,snapshot_file";

/// Shortest decimal form that parses back to the same bits.
pub fn format_float(value: f64) -> String {
    ryu::Buffer::new().format(value).to_string()
}

/// Seconds column for a trace entry: real elapsed time, or the
/// deterministic work counter on a comparable scale.
pub fn wall_seconds(wall_time: Duration, work_units: u64, logical_time: bool) -> f64 {
    if logical_time {
        work_units as f64 / 1e6
    } else {
        wall_time.as_secs_f64()
    }
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{context}: invalid number {field:?}")))
}

fn parse_usize(field: &str, context: &str) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("{context}: invalid count {field:?}")))
}

pub fn snapshot_header(dim: usize) -> String {
    let mut header = String::new();
    for i in 0..dim {
        header.push_str(&format!("x{i},"));
    }
    header.push_str("color");
    header
}

pub fn write_snapshot<W: Write>(mut out: W, cloud: &ParticleCloud) -> Result<()> {
    writeln!(out, "{}", snapshot_header(cloud.dim()))?;
    let mut buffer = ryu::Buffer::new();
    let mut line = String::new();
    for (position, color) in cloud.positions().zip(cloud.colors()) {
        line.clear();
        for coord in position {
            line.push_str(buffer.format(*coord));
            line.push(',');
        }
        line.push(color.as_char());
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_snapshot_file(path: &Path, cloud: &ParticleCloud) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write_snapshot(&mut out, cloud)?;
    out.flush()?;
    Ok(())
}

fn parse_snapshot_header(header: &str) -> Result<usize> {
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 2 || *fields.last().unwrap() != "color" {
        return Err(Error::Parse(format!(
            "snapshot header must end in a color column, got {header:?}"
        )));
    }
    let dim = fields.len() - 1;
    for (i, field) in fields[..dim].iter().enumerate() {
        if *field != format!("x{i}") {
            return Err(Error::Parse(format!(
                "snapshot header column {i} should be x{i}, got {field:?}"
            )));
        }
    }
    Ok(dim)
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<ParticleCloud> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("snapshot file is empty".into()))??;
    let dim = parse_snapshot_header(&header)?;
    let mut particles = Vec::new();
    for (index, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let context = format!("snapshot line {}", index + 2);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse(format!(
                "{context}: expected {} fields, found {}",
                dim + 1,
                fields.len()
            )));
        }
        let coords = fields[..dim]
            .iter()
            .map(|f| parse_f64(f, &context))
            .collect::<Result<Vec<f64>>>()?;
        let mut chars = fields[dim].chars();
        let color = match (chars.next(), chars.next()) {
            (Some(c), None) => Color::from_char(c)?,
            _ => {
                return Err(Error::Parse(format!(
                    "{context}: color must be one character, got {:?}",
                    fields[dim]
                )))
            }
        };
        particles.push(Particle::new(Position::new(coords)?, color));
    }
    ParticleCloud::new(particles)
}

pub fn read_snapshot_file(path: &Path) -> Result<ParticleCloud> {
    let file = fs::File::open(path)?;
    read_snapshot(BufReader::new(file))
}

/// One line of the trace index.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub phase_index: usize,
    pub level: usize,
    pub phase: Phase,
    pub wall_time_s: f64,
    pub sample_size: usize,
    pub snapshot_file: String,
}

pub fn snapshot_file_name(phase_index: usize) -> String {
    format!("snapshot_{phase_index:04}.csv")
}

pub fn write_trace_csv<W: Write>(mut out: W, rows: &[TraceRow]) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    let mut buffer = ryu::Buffer::new();
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.phase_index,
            row.level,
            row.phase.as_str(),
            buffer.format(row.wall_time_s),
            row.sample_size,
            row.snapshot_file
        )?;
    }
    Ok(())
}

pub fn read_trace_csv<R: BufRead>(input: R) -> Result<Vec<TraceRow>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("trace file is empty".into()))??;
    if header != TRACE_HEADER {
        return Err(Error::Parse(format!(
            "trace header should be {TRACE_HEADER:?}, got {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (index, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let context = format!("trace line {}", index + 2);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!(
                "{context}: expected 6 fields, found {}",
                fields.len()
            )));
        }
        rows.push(TraceRow {
            phase_index: parse_usize(fields[0], &context)?,
            level: parse_usize(fields[1], &context)?,
            phase: Phase::from_str(fields[2])?,
            wall_time_s: parse_f64(fields[3], &context)?,
            sample_size: parse_usize(fields[4], &context)?,
            snapshot_file: fields[5].to_string(),
        });
    }
    Ok(rows)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRow>> {
    let file = fs::File::open(path)?;
    read_trace_csv(BufReader::new(file))
}

/// Writes one snapshot CSV per trace entry plus the `trace.csv` index
/// into `dir`, creating it if needed. Returns the index rows.
pub fn write_run_artifacts(
    dir: &Path,
    trace: &BsvgdTrace,
    logical_time: bool,
) -> Result<Vec<TraceRow>> {
    fs::create_dir_all(dir)?;
    let mut rows = Vec::with_capacity(trace.entries.len());
    for (phase_index, entry) in trace.entries.iter().enumerate() {
        let snapshot_file = snapshot_file_name(phase_index);
        write_snapshot_file(&dir.join(&snapshot_file), &entry.cloud)?;
        rows.push(TraceRow {
            phase_index,
            level: entry.level,
            phase: entry.phase,
            wall_time_s: wall_seconds(entry.wall_time, entry.work_units, logical_time),
            sample_size: entry.cloud.len(),
            snapshot_file,
        });
    }
    let file = fs::File::create(dir.join(TRACE_FILE))?;
    let mut out = BufWriter::new(file);
    write_trace_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(rows)
}

/// One line of the metrics table.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub phase_index: usize,
    pub wall_time_s: f64,
    pub sample_size: usize,
    pub w_mean: f64,
    pub replicates: Vec<f64>,
}

pub fn metrics_header(replicates: usize) -> String {
    let mut header = String::from("phase_index,wall_time_s,sample_size,w_mean");
    for i in 0..replicates {
        header.push_str(&format!(",w_rep{i}"));
    }
    header
}

pub fn write_metrics_csv<W: Write>(
    mut out: W,
    trajectory: &DistanceTrajectory,
    logical_time: bool,
) -> Result<()> {
    let first = trajectory
        .points
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let replicates = first.estimate.replicates.len();
    writeln!(out, "{}", metrics_header(replicates))?;
    let mut buffer = ryu::Buffer::new();
    for point in &trajectory.points {
        if point.estimate.replicates.len() != replicates {
            return Err(Error::InvalidParameter(format!(
                "trajectory mixes replicate counts {} and {}",
                replicates,
                point.estimate.replicates.len()
            )));
        }
        let seconds = wall_seconds(point.wall_time, point.work_units, logical_time);
        let mut line = format!("{},", point.phase_index);
        line.push_str(buffer.format(seconds));
        line.push_str(&format!(",{},", point.sample_size));
        line.push_str(buffer.format(point.estimate.mean));
        for w in &point.estimate.replicates {
            line.push(',');
            line.push_str(buffer.format(*w));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_metrics_file(
    path: &Path,
    trajectory: &DistanceTrajectory,
    logical_time: bool,
) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write_metrics_csv(&mut out, trajectory, logical_time)?;
    out.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: BufRead>(input: R) -> Result<Vec<MetricsRow>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("metrics file is empty".into()))??;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 4 || fields[..4] != ["phase_index", "wall_time_s", "sample_size", "w_mean"] {
        return Err(Error::Parse(format!("unrecognized metrics header {header:?}")));
    }
    let replicates = fields.len() - 4;
    for (i, field) in fields[4..].iter().enumerate() {
        if *field != format!("w_rep{i}") {
            return Err(Error::Parse(format!(
                "metrics header replicate column {i} should be w_rep{i}, got {field:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for (index, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let context = format!("metrics line {}", index + 2);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + replicates {
            return Err(Error::Parse(format!(
                "{context}: expected {} fields, found {}",
                4 + replicates,
                fields.len()
            )));
        }
        rows.push(MetricsRow {
            phase_index: parse_usize(fields[0], &context)?,
            wall_time_s: parse_f64(fields[1], &context)?,
            sample_size: parse_usize(fields[2], &context)?,
            w_mean: parse_f64(fields[3], &context)?,
            replicates: fields[4..]
                .iter()
                .map(|f| parse_f64(f, &context))
                .collect::<Result<Vec<f64>>>()?,
        });
    }
    Ok(rows)
}

pub fn read_metrics_file(path: &Path) -> Result<Vec<MetricsRow>> {
    let file = fs::File::open(path)?;
    read_metrics_csv(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::TraceEntry;
    use crate::metrics::{TrajectoryPoint, WassersteinEstimate};
    use proptest::prelude::*;

    fn cloud_from(rows: &[(Vec<f64>, Color)]) -> ParticleCloud {
        ParticleCloud::new(
            rows.iter()
                .map(|(coords, color)| {
                    Particle::new(Position::new(coords.clone()).unwrap(), *color)
                })
                .collect(),
        )
        .unwrap()
    }

    fn bitwise_equal(a: &ParticleCloud, b: &ParticleCloud) -> bool {
        a.dim() == b.dim()
            && a.colors() == b.colors()
            && a.coords().len() == b.coords().len()
            && a.coords()
                .iter()
                .zip(b.coords())
                .all(|(x, y)| x.to_bits() == y.to_bits())
    }

    #[test]
    fn snapshot_layout_is_exact() {
        let cloud = cloud_from(&[
            (vec![1.5, -2.0], Color::Spine),
            (vec![0.25, 3.0], Color::Explorer),
        ]);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &cloud).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "x0,x1,color\n1.5,-2.0,S\n0.25,3.0,E\n");
    }

    #[test]
    fn snapshot_round_trips_awkward_floats() {
        let cloud = cloud_from(&[
            (vec![-0.0, 1e300, 5e-324], Color::Optimizer),
            (
                vec![-1.2345678901234567, 0.1, std::f64::consts::PI],
                Color::Spine,
            ),
        ]);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &cloud).unwrap();
        let back = read_snapshot(&bytes[..]).unwrap();
        assert!(bitwise_equal(&cloud, &back));
    }

    #[test]
    fn snapshot_writing_is_reproducible() {
        let cloud = cloud_from(&[(vec![0.1, 0.2], Color::Explorer)]);
        let mut first = Vec::new();
        let mut second = Vec::new();
        write_snapshot(&mut first, &cloud).unwrap();
        write_snapshot(&mut second, &cloud).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn snapshot_reader_rejects_malformed_input() {
        assert!(read_snapshot(&b""[..]).is_err());
        assert!(read_snapshot(&b"a,b,color\n"[..]).is_err());
        assert!(read_snapshot(&b"x0,x1\n"[..]).is_err());
        // No data rows: an empty cloud is not representable.
        assert!(read_snapshot(&b"x0,x1,color\n"[..]).is_err());
        let wrong_fields = read_snapshot(&b"x0,x1,color\n1.0,S\n"[..]).unwrap_err();
        assert!(wrong_fields.to_string().contains("line 2"));
        assert!(read_snapshot(&b"x0,x1,color\n1.0,oops,S\n"[..]).is_err());
        assert!(read_snapshot(&b"x0,x1,color\n1.0,2.0,Q\n"[..]).is_err());
        assert!(read_snapshot(&b"x0,x1,color\n1.0,2.0,SS\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn snapshot_round_trips_any_finite_cloud(
            rows in proptest::collection::vec(
                (
                    proptest::collection::vec(
                        any::<f64>().prop_filter("finite", |x| x.is_finite()),
                        3,
                    ),
                    prop_oneof![
                        Just(Color::Explorer),
                        Just(Color::Optimizer),
                        Just(Color::Spine)
                    ],
                ),
                1..8,
            )
        ) {
            let cloud = cloud_from(&rows);
            let mut bytes = Vec::new();
            write_snapshot(&mut bytes, &cloud).unwrap();
            let back = read_snapshot(&bytes[..]).unwrap();
            prop_assert!(bitwise_equal(&cloud, &back));
        }
    }

    #[test]
    fn trace_rows_round_trip() {
        let rows = vec![
            TraceRow {
                phase_index: 0,
                level: 1,
                phase: Phase::PostSvgd,
                wall_time_s: 0.125,
                sample_size: 1,
                snapshot_file: "snapshot_0000.csv".into(),
            },
            TraceRow {
                phase_index: 1,
                level: 3,
                phase: Phase::PostBranch,
                wall_time_s: 0.25,
                sample_size: 3,
                snapshot_file: "snapshot_0001.csv".into(),
            },
        ];
        let mut bytes = Vec::new();
        write_trace_csv(&mut bytes, &rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("phase_index,level,phase,wall_time_s,sample_size,snapshot_file\n"));
        assert!(text.contains("0,1,post-svgd,0.125,1,snapshot_0000.csv\n"));
        assert!(text.contains("1,3,post-branch,0.25,3,snapshot_0001.csv\n"));
        let back = read_trace_csv(&bytes[..]).unwrap();
        assert_eq!(back, rows);

        assert!(read_trace_csv(&b"bogus\n"[..]).is_err());
    }

    #[test]
    fn run_artifacts_cover_every_trace_entry() {
        let cloud_a = cloud_from(&[(vec![0.0, 0.0], Color::Spine)]);
        let cloud_b = cloud_from(&[
            (vec![0.0, 0.0], Color::Optimizer),
            (vec![1.0, 1.0], Color::Spine),
        ]);
        let trace = BsvgdTrace {
            entries: vec![
                TraceEntry {
                    level: 1,
                    phase: Phase::PostSvgd,
                    wall_time: Duration::from_millis(10),
                    work_units: 4_000_000,
                    svgd_iterations: Some(2),
                    svgd_displacement: Some(0.5),
                    cloud: cloud_a.clone(),
                },
                TraceEntry {
                    level: 2,
                    phase: Phase::PostBranch,
                    wall_time: Duration::from_millis(20),
                    work_units: 6_000_000,
                    svgd_iterations: None,
                    svgd_displacement: None,
                    cloud: cloud_b.clone(),
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let rows = write_run_artifacts(dir.path(), &trace, true).unwrap();
        assert_eq!(rows.len(), 2);
        // Logical time divides the work counter by a fixed scale.
        assert_eq!(rows[0].wall_time_s, 4.0);
        assert_eq!(rows[1].wall_time_s, 6.0);

        let index = read_trace_file(&dir.path().join(TRACE_FILE)).unwrap();
        assert_eq!(index, rows);
        for (row, cloud) in index.iter().zip([&cloud_a, &cloud_b]) {
            let back = read_snapshot_file(&dir.path().join(&row.snapshot_file)).unwrap();
            assert!(bitwise_equal(cloud, &back));
            assert_eq!(back.len(), row.sample_size);
        }
    }

    #[test]
    fn metrics_rows_round_trip() {
        let trajectory = DistanceTrajectory {
            points: vec![
                TrajectoryPoint {
                    phase_index: 0,
                    wall_time: Duration::from_millis(500),
                    work_units: 2_000_000,
                    sample_size: 10,
                    estimate: WassersteinEstimate {
                        mean: 1.5,
                        replicates: vec![1.0, 2.0],
                    },
                },
                TrajectoryPoint {
                    phase_index: 1,
                    wall_time: Duration::from_secs(1),
                    work_units: 3_000_000,
                    sample_size: 12,
                    estimate: WassersteinEstimate {
                        mean: 0.75,
                        replicates: vec![0.5, 1.0],
                    },
                },
            ],
        };
        let mut bytes = Vec::new();
        write_metrics_csv(&mut bytes, &trajectory, false).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("phase_index,wall_time_s,sample_size,w_mean,w_rep0,w_rep1\n"));
        assert!(text.contains("0,0.5,10,1.5,1.0,2.0\n"));
        let rows = read_metrics_csv(&bytes[..]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].w_mean, 1.5);
        assert_eq!(rows[0].replicates, vec![1.0, 2.0]);
        assert_eq!(rows[1].phase_index, 1);
        assert_eq!(rows[1].wall_time_s, 1.0);

        assert!(read_metrics_csv(&b"nope\n"[..]).is_err());
        assert!(read_metrics_csv(&b"phase_index,wall_time_s,sample_size,w_mean,bogus\n"[..])
            .is_err());
    }
}
