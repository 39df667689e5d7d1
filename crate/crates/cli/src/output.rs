//! Deterministic text outputs. Floats print with Rust's shortest
//! round-trip formatting so identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ontosim_core::Trajectory;

/// RFC-4180-style quoting; our fields are numeric so this only fires on
/// pathological header names.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_trajectories_csv(path: &Path, trajectories: &[Trajectory]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let dims = trajectories
        .first()
        .map(|t| t.samples[0].positions.len())
        .unwrap_or(1);
    write!(w, "member,time")?;
    for a in 0..dims {
        write!(w, ",x{a}")?;
    }
    writeln!(w, ",status")?;
    for (i, t) in trajectories.iter().enumerate() {
        let status = match t.status {
            ontosim_core::TrajectoryStatus::Completed => "ok",
            ontosim_core::TrajectoryStatus::NodeAborted { .. } => "node_abort",
        };
        for s in &t.samples {
            write!(w, "{i},{}", s.time)?;
            for x in &s.positions {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{status}")?;
        }
    }
    w.flush()
}

pub fn write_histogram_csv(path: &Path, centers: &[f64], counts: &[u64]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "bin_center,count")?;
    for (c, n) in centers.iter().zip(counts.iter()) {
        writeln!(w, "{c},{n}")?;
    }
    w.flush()
}

/// Histogram of positions over [-extent, extent) with the given bin count.
pub fn histogram(values: &[f64], extent: f64, bins: usize) -> (Vec<f64>, Vec<u64>) {
    let width = 2.0 * extent / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let b = (((v + extent) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[b] += 1;
    }
    let centers = (0..bins)
        .map(|b| -extent + (b as f64 + 0.5) * width)
        .collect();
    (centers, counts)
}
