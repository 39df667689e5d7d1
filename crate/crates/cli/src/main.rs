use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ontosim_cli::compare::{compare, render_text};
use ontosim_cli::pipeline::{
    execute_run, expand_ontologies, CliError, OntologyArg, RunOptions, EXIT_METRICS_FAILED,
};
use ontosim_cli::plots::{emit_plots, PlotKind};

/// Batch experiment runner comparing Bohmian trajectories, matter-density
/// collapse and flash records on one shared wave-function engine.
#[derive(Parser)]
#[command(name = "ontosim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario under the selected ontology pipelines.
    Run {
        /// Built-in scenario name or path to a scenario JSON document.
        #[arg(long)]
        scenario: String,
        /// Which ontology pipeline(s) to execute.
        #[arg(long, value_enum, default_value = "all")]
        ontology: OntologyArg,
        /// Master seed; all random streams derive from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override scenario fields, e.g. --set collapse.lambda=8.0
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Override the density-frame stride (PDE steps per frame).
        #[arg(long)]
        frames: Option<usize>,
        /// Escalate diagnostics (boundary mass, node aborts) into failures.
        #[arg(long)]
        strict: bool,
    },
    /// Compare manifests produced by runs of the same scenario document.
    Compare {
        /// Paths to manifest.json files (first is the reference).
        manifests: Vec<PathBuf>,
        /// Write the JSON report here (text goes to stdout regardless).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert run outputs into gnuplot-ready columnar files.
    EmitPlots {
        /// Path to a run's manifest.json.
        manifest: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output directory (defaults to <manifest dir>/plots).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            ontology,
            seed,
            out,
            sets,
            frames,
            strict,
        } => {
            let opts = RunOptions {
                scenario,
                ontologies: expand_ontologies(ontology),
                seed,
                out_dir: out,
                sets,
                frames,
                strict,
            };
            match execute_run(&opts) {
                Ok(manifest) => {
                    for m in &manifest.metrics {
                        println!(
                            "{} {}: statistic {:.6e} vs {:.6e} ({})",
                            if m.pass { "pass" } else { "FAIL" },
                            m.name,
                            m.statistic,
                            m.threshold,
                            match m.criterion {
                                ontosim_core::Criterion::AtMost => "at most",
                                ontosim_core::Criterion::AtLeast => "at least",
                            }
                        );
                    }
                    println!(
                        "manifest: {}",
                        opts.out_dir.join("manifest.json").display()
                    );
                    if manifest.all_passed {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("error: one or more run metrics failed");
                        ExitCode::from(EXIT_METRICS_FAILED)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Compare { manifests, out } => {
            let paths: Vec<&std::path::Path> = manifests.iter().map(PathBuf::as_path).collect();
            match compare(&paths) {
                Ok(report) => {
                    print!("{}", render_text(&report));
                    if let Some(out) = out {
                        match serde_json::to_string_pretty(&report) {
                            Ok(json) => {
                                if let Err(e) = std::fs::write(&out, json) {
                                    return fail(CliError::Other(e.to_string()));
                                }
                            }
                            Err(e) => return fail(CliError::Other(e.to_string())),
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::EmitPlots {
            manifest,
            kind,
            out,
        } => match emit_plots(&manifest, kind, out.as_deref()) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
