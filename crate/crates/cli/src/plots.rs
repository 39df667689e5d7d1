//! Conversion of run outputs into gnuplot-ready columnar text files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use ontosim_core::MatterDensityField;

use crate::manifest::RunManifest;
use crate::pipeline::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    LandingHistogram,
    TrajectoryFan,
    DensityFrames,
    FlashScatter,
}

fn find_output(manifest_dir: &Path, manifest: &RunManifest, name: &str) -> Option<PathBuf> {
    // prefer the ontology dirs in manifest order
    for ontology in &manifest.ontologies {
        let rel = format!("{ontology}/{name}");
        if manifest.outputs.iter().any(|o| o.path == rel) {
            return Some(manifest_dir.join(rel));
        }
    }
    None
}

/// Write the plot files for `kind`, returning the produced paths.
pub fn emit_plots(
    manifest_path: &Path,
    kind: PlotKind,
    out_dir: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let manifest = RunManifest::load(manifest_path)
        .map_err(|e| CliError::Config(format!("cannot load manifest: {e}")))?;
    let manifest_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let plot_dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| manifest_dir.join("plots"));
    fs::create_dir_all(&plot_dir).map_err(|e| CliError::Other(e.to_string()))?;

    let missing = |name: &str| {
        CliError::Config(format!(
            "manifest lists no '{name}' output; run the required ontology first"
        ))
    };

    match kind {
        PlotKind::LandingHistogram => {
            let src = find_output(manifest_dir, &manifest, "landing_histogram.csv")
                .ok_or_else(|| missing("landing_histogram.csv"))?;
            let text = fs::read_to_string(&src).map_err(|e| CliError::Other(e.to_string()))?;
            let dst = plot_dir.join("landing_histogram.dat");
            let mut w = fs::File::create(&dst).map_err(|e| CliError::Other(e.to_string()))?;
            for line in text.lines().skip(1) {
                writeln!(w, "{}", line.replace(',', " "))
                    .map_err(|e| CliError::Other(e.to_string()))?;
            }
            Ok(vec![dst])
        }
        PlotKind::TrajectoryFan => {
            let src = find_output(manifest_dir, &manifest, "trajectories.csv")
                .ok_or_else(|| missing("trajectories.csv"))?;
            let text = fs::read_to_string(&src).map_err(|e| CliError::Other(e.to_string()))?;
            let dst = plot_dir.join("trajectory_fan.dat");
            let mut w = fs::File::create(&dst).map_err(|e| CliError::Other(e.to_string()))?;
            let mut current_member = String::new();
            for line in text.lines().skip(1) {
                let mut parts = line.split(',');
                let member = parts.next().unwrap_or_default();
                let time = parts.next().unwrap_or_default();
                let x = parts.next().unwrap_or_default();
                if member != current_member {
                    if !current_member.is_empty() {
                        writeln!(w).map_err(|e| CliError::Other(e.to_string()))?;
                    }
                    current_member = member.to_string();
                }
                writeln!(w, "{time} {x}").map_err(|e| CliError::Other(e.to_string()))?;
            }
            Ok(vec![dst])
        }
        PlotKind::DensityFrames => {
            let src = find_output(manifest_dir, &manifest, "density.bin")
                .ok_or_else(|| missing("density.bin"))?;
            let bytes = fs::read(&src).map_err(|e| CliError::Other(e.to_string()))?;
            let mut cursor: &[u8] = &bytes;
            let mut produced = Vec::new();
            let mut index = 0usize;
            while !cursor.is_empty() {
                let field = MatterDensityField::read_binary(&mut cursor)
                    .map_err(|e| CliError::Other(format!("corrupt density.bin: {e}")))?;
                let dst = plot_dir.join(format!("density_frame_{index:04}.dat"));
                let mut w =
                    fs::File::create(&dst).map_err(|e| CliError::Other(e.to_string()))?;
                writeln!(w, "# t = {}", field.time).map_err(|e| CliError::Other(e.to_string()))?;
                for (idx, v) in field.values.indexed_iter() {
                    for a in 0..field.grid.dims() {
                        write!(w, "{} ", field.grid.coord(idx[a]))
                            .map_err(|e| CliError::Other(e.to_string()))?;
                    }
                    writeln!(w, "{v}").map_err(|e| CliError::Other(e.to_string()))?;
                }
                produced.push(dst);
                index += 1;
            }
            if produced.is_empty() {
                return Err(CliError::Config("density.bin holds no frames".into()));
            }
            Ok(produced)
        }
        PlotKind::FlashScatter => {
            let src = find_output(manifest_dir, &manifest, "flashes.csv")
                .ok_or_else(|| missing("flashes.csv"))?;
            let text = fs::read_to_string(&src).map_err(|e| CliError::Other(e.to_string()))?;
            let dst = plot_dir.join("flash_scatter.dat");
            let mut w = fs::File::create(&dst).map_err(|e| CliError::Other(e.to_string()))?;
            for line in text.lines().skip(1) {
                let mut parts = line.split(',');
                let time = parts.next().unwrap_or_default();
                let _particle = parts.next();
                let x = parts.next().unwrap_or_default();
                writeln!(w, "{time} {x}").map_err(|e| CliError::Other(e.to_string()))?;
            }
            Ok(vec![dst])
        }
    }
}
