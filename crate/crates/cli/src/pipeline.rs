//! Run orchestration: resolve the scenario, execute the selected ontology
//! pipelines on one shared engine configuration, write plot-ready outputs,
//! and assemble the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;

use ontosim_core::scenario::InitialStateDoc;
use ontosim_core::{
    delocation_report, evolve_ensemble, matter_density, sample_equilibrium, Cdf, Criterion,
    DensityTimeSeries, EnsembleOptions, Error as CoreError, FlashHistory, FrameKind, Propagator,
    Region, RunPhase, ScenarioSpec, ScheduledJump, TestReport, TrajectoryStatus, WaveFunction,
};

use crate::manifest::{hash_file, sha256_hex, OutputFile, RunManifest, MANIFEST_SCHEMA_VERSION};
use crate::output;

/// Errors classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit code 2: bad configuration (scenario, overrides, flags).
    Config(String),
    /// Exit code 3: numerical abort during a run.
    Numeric(String),
    /// Exit code 1: anything else (I/O and internal errors).
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical abort: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

/// Exit code signalling that the run completed but some metric failed.
pub const EXIT_METRICS_FAILED: u8 = 4;

fn classify(err: CoreError) -> CliError {
    match err {
        CoreError::NonFinite { .. }
        | CoreError::ZeroNorm
        | CoreError::NodeProximity { .. }
        | CoreError::ImpossibleCenter { .. } => CliError::Numeric(err.to_string()),
        CoreError::Io(e) => CliError::Other(e.to_string()),
        _ => CliError::Config(err.to_string()),
    }
}

fn io_err(err: std::io::Error) -> CliError {
    CliError::Other(err.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OntologyArg {
    Bohm,
    Grwm,
    Grwf,
    Schrodinger,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ontology {
    Bohm,
    Grwm,
    Grwf,
    Schrodinger,
}

impl Ontology {
    pub fn name(self) -> &'static str {
        match self {
            Ontology::Bohm => "bohm",
            Ontology::Grwm => "grwm",
            Ontology::Grwf => "grwf",
            Ontology::Schrodinger => "schrodinger",
        }
    }
}

pub fn expand_ontologies(arg: OntologyArg) -> Vec<Ontology> {
    match arg {
        OntologyArg::Bohm => vec![Ontology::Bohm],
        OntologyArg::Grwm => vec![Ontology::Grwm],
        OntologyArg::Grwf => vec![Ontology::Grwf],
        OntologyArg::Schrodinger => vec![Ontology::Schrodinger],
        OntologyArg::All => vec![Ontology::Bohm, Ontology::Grwm, Ontology::Grwf],
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Built-in scenario name or path to a scenario document.
    pub scenario: String,
    pub ontologies: Vec<Ontology>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Raw `key.path=value` overrides applied to the document.
    pub sets: Vec<String>,
    /// Overrides run.frame_stride when given.
    pub frames: Option<usize>,
    pub strict: bool,
}

/// Resolve the scenario text: an existing path wins, otherwise a built-in.
fn resolve_scenario_text(scenario: &str) -> Result<(String, String), CliError> {
    let path = Path::new(scenario);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(io_err)?;
        Ok((text, scenario.to_string()))
    } else if let Some(text) = ontosim_core::builtin_document(scenario) {
        Ok((text.to_string(), format!("builtin:{scenario}")))
    } else {
        Err(CliError::Config(format!(
            "scenario '{scenario}' is neither a file nor a built-in ({})",
            ontosim_core::BUILTIN_NAMES.join(", ")
        )))
    }
}

/// Apply one `path.to.key=value` override to a JSON document, creating
/// intermediate objects as needed.
fn apply_override(doc: &mut serde_json::Value, setting: &str) -> Result<(), CliError> {
    let (path, raw) = setting.split_once('=').ok_or_else(|| {
        CliError::Config(format!("override '{setting}' is not of the form key=value"))
    })?;
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("override path '{path}' has an empty segment")));
        }
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("override path '{path}' descends into a non-object"))
        })?;
        if i == parts.len() - 1 {
            obj.insert(part.to_string(), value);
            break;
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

/// Resolved run inputs shared by every pipeline.
struct Prepared {
    spec: ScenarioSpec,
    resolved_text: String,
    scenario_sha256: String,
    source: String,
}

fn prepare(opts: &RunOptions) -> Result<Prepared, CliError> {
    let (text, source) = resolve_scenario_text(&opts.scenario)?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    for setting in &opts.sets {
        apply_override(&mut value, setting)?;
    }
    if let Some(frames) = opts.frames {
        apply_override(&mut value, &format!("run.frame_stride={frames}"))?;
    }
    let resolved_text =
        serde_json::to_string_pretty(&value).map_err(|e| CliError::Other(e.to_string()))?;
    let spec = ontosim_core::load_scenario(&resolved_text).map_err(classify)?;
    let scenario_sha256 = sha256_hex(resolved_text.as_bytes());
    Ok(Prepared {
        spec,
        resolved_text,
        scenario_sha256,
        source,
    })
}

struct PipelineOutput {
    metrics: Vec<TestReport>,
    summaries: BTreeMap<String, f64>,
    reports: BTreeMap<String, serde_json::Value>,
    files: Vec<PathBuf>,
}

/// Execute a run end to end; the manifest is written even when metrics fail
/// (the caller decides the exit code from `all_passed`).
pub fn execute_run(opts: &RunOptions) -> Result<RunManifest, CliError> {
    let prepared = prepare(opts)?;
    let spec = &prepared.spec;
    fs::create_dir_all(&opts.out_dir).map_err(io_err)?;

    let mut metrics = Vec::new();
    let mut summaries = BTreeMap::new();
    let mut reports = BTreeMap::new();
    let mut files: Vec<PathBuf> = Vec::new();
    let mut timings: BTreeMap<String, u64> = BTreeMap::new();
    let mut rng_streams = vec![];

    // grwm and grwf share one stochastic history per seed
    let mut stochastic: Option<StochasticRun> = None;

    for &ontology in &opts.ontologies {
        let dir = opts.out_dir.join(ontology.name());
        fs::create_dir_all(&dir).map_err(io_err)?;
        let started = Instant::now();
        let out = match ontology {
            Ontology::Schrodinger => run_schrodinger(spec, &dir, opts)?,
            Ontology::Bohm => {
                rng_streams.push("equilibrium".to_string());
                run_bohm(spec, &dir, opts)?
            }
            Ontology::Grwm | Ontology::Grwf => {
                if stochastic.is_none() {
                    rng_streams.push("grw/schedule".to_string());
                    rng_streams.push("grw/centers".to_string());
                    stochastic = Some(run_stochastic(spec, opts.seed)?);
                }
                let run = stochastic.as_ref().unwrap();
                match ontology {
                    Ontology::Grwm => emit_grwm(spec, run, &dir, opts)?,
                    Ontology::Grwf => emit_grwf(spec, run, &dir, opts)?,
                    _ => unreachable!(),
                }
            }
        };
        timings.insert(
            ontology.name().to_string(),
            started.elapsed().as_millis() as u64,
        );
        let prefix = ontology.name();
        for m in out.metrics {
            metrics.push(TestReport {
                name: format!("{prefix}/{}", m.name),
                ..m
            });
        }
        for (k, v) in out.summaries {
            summaries.insert(format!("{prefix}/{k}"), v);
        }
        for (k, v) in out.reports {
            reports.insert(format!("{prefix}/{k}"), v);
        }
        files.extend(out.files);
    }

    let mut outputs = Vec::with_capacity(files.len());
    for f in &files {
        let mut entry: OutputFile = hash_file(f).map_err(|e| CliError::Other(e.to_string()))?;
        entry.path = f
            .strip_prefix(&opts.out_dir)
            .unwrap_or(f)
            .to_string_lossy()
            .into_owned();
        outputs.push(entry);
    }
    outputs.sort_by(|a, b| a.path.cmp(&b.path));

    let all_passed = metrics.iter().all(|m| m.pass);
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        app_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_name: spec.doc.name.clone(),
        scenario_source: prepared.source,
        scenario_sha256: prepared.scenario_sha256,
        resolved_scenario: spec.doc.clone(),
        overrides: opts.sets.clone(),
        master_seed: opts.seed,
        rng_streams,
        ontologies: opts.ontologies.iter().map(|o| o.name().to_string()).collect(),
        metrics,
        summaries,
        reports,
        outputs,
        timings_ms: timings,
        all_passed,
    };
    manifest
        .write(&opts.out_dir.join("manifest.json"))
        .map_err(|e| CliError::Other(e.to_string()))?;
    let _ = prepared.resolved_text;
    Ok(manifest)
}

fn norm_threshold(steps: usize) -> f64 {
    1e-9 * (steps as f64 / 1e4).max(1.0)
}

fn static_potential(spec: &ScenarioSpec) -> bool {
    spec.hamiltonian.potential.time_boundaries().is_empty()
}

fn record_axis(spec: &ScenarioSpec) -> usize {
    spec.doc
        .analysis
        .record_axis
        .unwrap_or(spec.doc.analysis.branch_axis)
}

fn shared_metrics(
    spec: &ScenarioSpec,
    psi0: &WaveFunction,
    psi_t: &WaveFunction,
    strict: bool,
    metrics: &mut Vec<TestReport>,
) -> Result<(), CliError> {
    let steps = spec.n_steps();
    metrics.push(TestReport::check(
        "norm/final_error",
        (psi_t.norm() - 1.0).abs(),
        norm_threshold(steps),
        Criterion::AtMost,
        steps,
        None,
    ));
    if static_potential(spec) {
        let e0 = ontosim_core::energy_expectation(psi0, &spec.hamiltonian).map_err(classify)?;
        let et = ontosim_core::energy_expectation(psi_t, &spec.hamiltonian).map_err(classify)?;
        metrics.push(TestReport::check(
            "energy/relative_drift",
            (et - e0).abs() / e0.abs().max(1e-300),
            1e-6,
            Criterion::AtMost,
            steps,
            None,
        ));
    }
    if strict {
        metrics.push(TestReport::check(
            "boundary/mass",
            psi_t.boundary_mass(),
            1e-8,
            Criterion::AtMost,
            steps,
            None,
        ));
    }
    Ok(())
}

fn run_schrodinger(
    spec: &ScenarioSpec,
    dir: &Path,
    opts: &RunOptions,
) -> Result<PipelineOutput, CliError> {
    let psi0 = spec.initial_state().map_err(classify)?;
    let dt = spec.doc.run.dt;
    let stride = spec.doc.run.frame_stride;
    let masses = spec.hamiltonian.masses.clone();

    let mut prop = Propagator::new(&spec.grid, &spec.hamiltonian, dt).map_err(classify)?;
    let mut psi = psi0.clone();
    let mut series = DensityTimeSeries {
        frames: Vec::new(),
        frame_interval: dt * stride as f64,
    };
    series
        .push(FrameKind::Regular, matter_density(&psi, &masses).map_err(classify)?)
        .map_err(classify)?;
    for step in 1..=spec.n_steps() {
        prop.step(&mut psi).map_err(classify)?;
        if step % stride == 0 {
            series
                .push(FrameKind::Regular, matter_density(&psi, &masses).map_err(classify)?)
                .map_err(classify)?;
        }
    }

    let mut files = Vec::new();
    files.extend(write_density_series(dir, &series).map_err(io_err)?);

    let mut metrics = Vec::new();
    shared_metrics(spec, &psi0, &psi, opts.strict, &mut metrics)?;

    let mut summaries = BTreeMap::new();
    let axis = record_axis(spec);
    let low = ontosim_core::branch_mass(
        &psi,
        &Region::half_space(spec.grid.dims(), axis, spec.doc.analysis.boundary, false),
    )
    .map_err(classify)?;
    summaries.insert("branch_mass_low".into(), low);
    summaries.insert("branch_mass_high".into(), 1.0 - low);
    summaries.insert("frames".into(), series.frames.len() as f64);

    Ok(PipelineOutput {
        metrics,
        summaries,
        reports: BTreeMap::new(),
        files,
    })
}

fn run_bohm(spec: &ScenarioSpec, dir: &Path, opts: &RunOptions) -> Result<PipelineOutput, CliError> {
    let psi0 = spec.initial_state().map_err(classify)?;
    let n = spec.doc.ensemble.size;
    let ensemble = sample_equilibrium(&psi0, n, opts.seed).map_err(classify)?;
    let run = evolve_ensemble(
        &psi0,
        &spec.hamiltonian,
        &ensemble,
        spec.doc.run.dt,
        spec.doc.run.t_final,
        EnsembleOptions {
            sample_stride: spec.doc.run.frame_stride,
        },
    )
    .map_err(classify)?;

    let traj_path = dir.join("trajectories.csv");
    output::write_trajectories_csv(&traj_path, &run.trajectories).map_err(io_err)?;

    let axis = record_axis(spec);
    let finals: Vec<f64> = run
        .trajectories
        .iter()
        .filter(|t| matches!(t.status, TrajectoryStatus::Completed))
        .map(|t| t.final_configuration().positions[axis])
        .collect();
    let aborted = n - finals.len();

    let bins = spec.doc.analysis.histogram_bins;
    let (centers, counts) = output::histogram(&finals, spec.grid.extent(), bins);
    let hist_path = dir.join("landing_histogram.csv");
    output::write_histogram_csv(&hist_path, &centers, &counts).map_err(io_err)?;

    // equivariance: final positions against the evolved marginal on the axis
    let particle = spec.grid.layout()[axis].particle;
    let marginal = run.final_psi.marginal_density(particle).map_err(classify)?;
    let flat: Vec<f64> = marginal.iter().copied().collect();
    let coords = spec.grid.axis_coords();
    let cdf = Cdf::from_density(&coords, &flat, spec.grid.spacing()).map_err(classify)?;
    let mut sorted = finals.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks = ontosim_core::ks_distance(&sorted, &cdf).map_err(classify)?;

    let mut metrics = Vec::new();
    metrics.push(TestReport::check(
        "equivariance/ks",
        ks,
        ontosim_core::KS_CRIT_1PCT / (sorted.len() as f64).sqrt(),
        Criterion::AtMost,
        sorted.len(),
        Some(opts.seed),
    ));
    metrics.push(TestReport::check(
        "trajectories/node_abort_fraction",
        aborted as f64 / n as f64,
        if opts.strict { 0.0 } else { 1e-3 },
        Criterion::AtMost,
        n,
        Some(opts.seed),
    ));
    shared_metrics(spec, &psi0, &run.final_psi, opts.strict, &mut metrics)?;

    let boundary = spec.doc.analysis.boundary;
    let high = finals.iter().filter(|&&x| x >= boundary).count() as f64 / finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let spread = (finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / finals.len() as f64)
        .sqrt();
    let mut summaries = BTreeMap::new();
    summaries.insert("record_fraction_high".into(), high);
    summaries.insert("record_fraction_low".into(), 1.0 - high);
    summaries.insert("landing_mean".into(), mean);
    summaries.insert("landing_spread".into(), spread);
    summaries.insert("node_aborts".into(), aborted as f64);

    Ok(PipelineOutput {
        metrics,
        summaries,
        reports: BTreeMap::new(),
        files: vec![traj_path, hist_path],
    })
}

struct StochasticRun {
    final_psi: WaveFunction,
    history: FlashHistory,
    series: DensityTimeSeries,
}

fn run_stochastic(spec: &ScenarioSpec, seed: u64) -> Result<StochasticRun, CliError> {
    let psi0 = spec.initial_state().map_err(classify)?;
    let dt = spec.doc.run.dt;
    let t_final = spec.doc.run.t_final;
    let stride = spec.doc.run.frame_stride;
    let masses = spec.hamiltonian.masses.clone();

    let mut jumps: Vec<ScheduledJump> = Vec::new();
    let mut sigma_record = None;
    if let Some(c) = &spec.doc.collapse {
        let drawn = ontosim_core::draw_jump_schedule(
            spec.grid.particle_count(),
            c.lambda,
            t_final,
            seed,
        )
        .map_err(classify)?;
        jumps.extend(drawn.into_iter().map(|(time, particle)| ScheduledJump {
            time,
            particle,
            sigma: c.sigma,
        }));
        sigma_record = Some(c.sigma);
    }
    if let Some(d) = &spec.doc.detection {
        jumps.push(ScheduledJump {
            time: d.time,
            particle: d.particle,
            sigma: d.sigma,
        });
        sigma_record.get_or_insert(d.sigma);
    }
    if jumps.is_empty() && spec.doc.collapse.is_none() && spec.doc.detection.is_none() {
        return Err(CliError::Config(
            "scenario defines neither collapse parameters nor a detection; \
             grwm/grwf have nothing to run"
                .into(),
        ));
    }

    let mut center_rng = ontosim_core::rng::stream(seed, "grw/centers");
    let mut series = DensityTimeSeries {
        frames: Vec::new(),
        frame_interval: dt * stride as f64,
    };
    let mut frame_error: Option<CoreError> = None;
    let (final_psi, events) = ontosim_core::run_with_jumps(
        &psi0,
        &spec.hamiltonian,
        &jumps,
        dt,
        t_final,
        &mut center_rng,
        |phase, psi| {
            if frame_error.is_some() {
                return;
            }
            let kind = match phase {
                RunPhase::Initial => Some(FrameKind::Regular),
                RunPhase::Stepped { step } if step % stride == 0 => Some(FrameKind::Regular),
                RunPhase::PreCollapse { .. } => Some(FrameKind::PreCollapse),
                RunPhase::PostCollapse { .. } => Some(FrameKind::PostCollapse),
                _ => None,
            };
            if let Some(kind) = kind {
                match matter_density(psi, &masses) {
                    Ok(field) => {
                        if let Err(e) = series.push(kind, field) {
                            frame_error = Some(e);
                        }
                    }
                    Err(e) => frame_error = Some(e),
                }
            }
        },
    )
    .map_err(classify)?;
    if let Some(e) = frame_error {
        return Err(classify(e));
    }

    let mut history = FlashHistory {
        events: Vec::new(),
        seed,
        sigma: sigma_record.unwrap_or(0.0),
        lambda: spec.doc.collapse.as_ref().map(|c| c.lambda),
    };
    for e in events {
        history.push(e).map_err(classify)?;
    }
    Ok(StochasticRun {
        final_psi,
        history,
        series,
    })
}

fn write_density_series(
    dir: &Path,
    series: &DensityTimeSeries,
) -> std::io::Result<Vec<PathBuf>> {
    let bin_path = dir.join("density.bin");
    let mut bin = std::io::BufWriter::new(fs::File::create(&bin_path)?);
    for frame in &series.frames {
        frame.field.write_binary(&mut bin)?;
    }
    drop(bin);

    let idx_path = dir.join("density_index.csv");
    let mut idx = std::io::BufWriter::new(fs::File::create(&idx_path)?);
    use std::io::Write;
    writeln!(idx, "frame,time,kind")?;
    for (i, frame) in series.frames.iter().enumerate() {
        let kind = match frame.kind {
            FrameKind::Regular => "regular",
            FrameKind::PreCollapse => "pre_collapse",
            FrameKind::PostCollapse => "post_collapse",
        };
        writeln!(idx, "{i},{},{kind}", frame.field.time)?;
    }
    drop(idx);
    Ok(vec![bin_path, idx_path])
}

fn collapse_metrics(history: &FlashHistory, seed: u64, metrics: &mut Vec<TestReport>) {
    let max_err = history
        .events
        .iter()
        .map(|e| (e.post_norm - 1.0).abs())
        .fold(0.0f64, f64::max);
    metrics.push(TestReport::check(
        "collapse/max_norm_error",
        max_err,
        1e-12,
        Criterion::AtMost,
        history.events.len(),
        Some(seed),
    ));
}

fn emit_grwm(
    spec: &ScenarioSpec,
    run: &StochasticRun,
    dir: &Path,
    opts: &RunOptions,
) -> Result<PipelineOutput, CliError> {
    let mut files = write_density_series(dir, &run.series).map_err(io_err)?;
    let flash_path = dir.join("flashes.csv");
    {
        let mut w = std::io::BufWriter::new(fs::File::create(&flash_path).map_err(io_err)?);
        run.history.write_csv(&mut w).map_err(io_err)?;
    }
    files.push(flash_path);

    let mut metrics = Vec::new();
    let mut reports = BTreeMap::new();
    collapse_metrics(&run.history, opts.seed, &mut metrics);

    let boundary = spec.doc.analysis.boundary;
    if matches!(spec.doc.initial_state, InitialStateDoc::SplitPackets { .. }) {
        if let Some(event) = run.history.events.first() {
            let report = delocation_report(&run.series, boundary, event.time).map_err(classify)?;
            // side masses as fractions of the total mass
            let total_before = report.before.0 + report.before.1;
            let total_after = report.after.0 + report.after.1;
            metrics.push(TestReport::check(
                "delocation/pre_balance_error",
                (report.before.0 / total_before - 0.5).abs(),
                1e-3,
                Criterion::AtMost,
                1,
                Some(opts.seed),
            ));
            let far = if event.center[0] > boundary {
                report.after.0
            } else {
                report.after.1
            };
            metrics.push(TestReport::check(
                "delocation/far_side_mass",
                far / total_after,
                1e-4,
                Criterion::AtMost,
                1,
                Some(opts.seed),
            ));
            reports.insert(
                "delocation".to_string(),
                serde_json::to_value(&report).map_err(|e| CliError::Other(e.to_string()))?,
            );
        }
    }
    if matches!(
        spec.doc.initial_state,
        InitialStateDoc::PointerSuperposition { .. }
    ) && spec.doc.collapse.is_some()
    {
        let axis = spec.doc.analysis.branch_axis;
        let low = ontosim_core::branch_mass(
            &run.final_psi,
            &Region::half_space(spec.grid.dims(), axis, boundary, false),
        )
        .map_err(classify)?;
        metrics.push(TestReport::check(
            "resolution/max_branch_mass",
            low.max(1.0 - low),
            0.999,
            Criterion::AtLeast,
            run.history.events.len(),
            Some(opts.seed),
        ));
    }
    shared_metrics(spec, &spec.initial_state().map_err(classify)?, &run.final_psi, opts.strict, &mut metrics)?;
    // collapses inject energy on purpose: the unitary drift bound does not apply
    metrics.retain(|m| !(m.name == "energy/relative_drift" && !run.history.events.is_empty()));

    let mut summaries = BTreeMap::new();
    summaries.insert("event_count".into(), run.history.events.len() as f64);
    summaries.insert("frames".into(), run.series.frames.len() as f64);
    let axis = record_axis(spec);
    let low = ontosim_core::branch_mass(
        &run.final_psi,
        &Region::half_space(spec.grid.dims(), axis, boundary, false),
    )
    .map_err(classify)?;
    summaries.insert("branch_mass_low".into(), low);
    summaries.insert("branch_mass_high".into(), 1.0 - low);
    if let Some(v) = reports.get("delocation") {
        if let Ok(rep) = serde_json::from_value::<ontosim_core::DelocationReport>(v.clone()) {
            let total = rep.before.0 + rep.before.1;
            summaries.insert(
                "delocation_magnitude".into(),
                (rep.after.0 - rep.before.0).abs() / total,
            );
        }
    }

    Ok(PipelineOutput {
        metrics,
        summaries,
        reports,
        files,
    })
}

fn emit_grwf(
    spec: &ScenarioSpec,
    run: &StochasticRun,
    dir: &Path,
    opts: &RunOptions,
) -> Result<PipelineOutput, CliError> {
    let flash_path = dir.join("flashes.csv");
    {
        let mut w = std::io::BufWriter::new(fs::File::create(&flash_path).map_err(io_err)?);
        run.history.write_csv(&mut w).map_err(io_err)?;
    }

    let validated =
        ontosim_core::extract_flashes(&run.history, &spec.grid).map_err(classify)?;
    let boundary = spec.doc.analysis.boundary;
    let counts = ontosim_core::flash_region_counts(&validated.events, &[boundary]);

    let mut metrics = Vec::new();
    let mut reports = BTreeMap::new();
    collapse_metrics(&validated, opts.seed, &mut metrics);

    if matches!(
        spec.doc.initial_state,
        InitialStateDoc::PointerSuperposition { .. }
    ) && spec.doc.collapse.is_some()
    {
        // after the resolution settles, system-particle flashes concentrate
        // in the surviving branch
        let axis = spec.doc.analysis.branch_axis;
        let low = ontosim_core::branch_mass(
            &run.final_psi,
            &Region::half_space(spec.grid.dims(), axis, boundary, false),
        )
        .map_err(classify)?;
        let winner_high = low < 0.5;
        let half_t = spec.doc.run.t_final / 2.0;
        let late: Vec<&ontosim_core::CollapseEvent> = validated
            .events
            .iter()
            .filter(|e| e.particle == spec.grid.layout()[axis].particle && e.time > half_t)
            .collect();
        if !late.is_empty() {
            let aligned = late
                .iter()
                .filter(|e| (e.center[0] > boundary) == winner_high)
                .count();
            metrics.push(TestReport::check(
                "flashes/late_branch_concentration",
                aligned as f64 / late.len() as f64,
                0.9,
                Criterion::AtLeast,
                late.len(),
                Some(opts.seed),
            ));
        }
    }

    reports.insert(
        "flash_region_counts".to_string(),
        serde_json::json!({
            "edges": [boundary],
            "counts": counts,
        }),
    );

    let mut summaries = BTreeMap::new();
    summaries.insert("event_count".into(), validated.events.len() as f64);
    summaries.insert(
        "flash_fraction_high".into(),
        if validated.events.is_empty() {
            0.0
        } else {
            counts[1] as f64 / validated.events.len() as f64
        },
    );

    Ok(PipelineOutput {
        metrics,
        summaries,
        reports,
        files: vec![flash_path],
    })
}
