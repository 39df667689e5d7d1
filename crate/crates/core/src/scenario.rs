//! Scenario documents: JSON-described initial states, potentials and run
//! parameters, with strict validation, plus the built-in experiment set.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::grw::validate_sigma;
use crate::hamiltonian::{HamiltonianParams, PotentialSpec};
use crate::propagator::Propagator;
use crate::wavefunction::WaveFunction;

pub const SCHEMA_VERSION: u32 = 1;

pub const BUILTIN_NAMES: [&str; 5] = [
    "free_gaussian",
    "harmonic",
    "double_slit",
    "einstein_box",
    "pointer_measurement",
];

/// The JSON text of a built-in scenario, if `name` is one.
pub fn builtin_document(name: &str) -> Option<&'static str> {
    match name {
        "free_gaussian" => Some(include_str!("scenarios/free_gaussian.json")),
        "harmonic" => Some(include_str!("scenarios/harmonic.json")),
        "double_slit" => Some(include_str!("scenarios/double_slit.json")),
        "einstein_box" => Some(include_str!("scenarios/einstein_box.json")),
        "pointer_measurement" => Some(include_str!("scenarios/pointer_measurement.json")),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub dims: usize,
    pub extent: f64,
    pub points: usize,
    pub particles: Vec<ParticleDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleDoc {
    pub axes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianDoc {
    pub masses: Vec<f64>,
    pub potential: PotentialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateDoc {
    /// Normalized Gaussian, center `c`, mean momentum `k`, width `a` per axis.
    GaussianPacket {
        center: Vec<f64>,
        momentum: Vec<f64>,
        width: f64,
    },
    /// Equal superposition of two coherent packets at +/- separation/2.
    DoubleSlit {
        separation: f64,
        slit_width: f64,
        momentum: f64,
    },
    /// Two half-box packets at -/+ offset flying apart with -/+ momentum.
    SplitPackets {
        offset: f64,
        momentum: f64,
        width: f64,
    },
    /// (sqrt(w+) f(x1 - off) + sqrt(1-w+) f(x1 + off)) phi(x2).
    PointerSuperposition {
        weight_plus: f64,
        system_offset: f64,
        system_width: f64,
        pointer_width: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_frame_stride")]
    pub frame_stride: usize,
}

fn default_frame_stride() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleDoc {
    pub size: usize,
}

impl Default for EnsembleDoc {
    fn default() -> Self {
        Self { size: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseDoc {
    pub lambda: f64,
    pub sigma: f64,
    /// Conventional SI rate (~1e-15 per second), provenance only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub si_lambda_per_s: Option<f64>,
    /// Conventional SI width (~1e-7 m), provenance only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub si_sigma_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionDoc {
    /// Forced localization time (a measurement, not a spontaneous jump).
    pub time: f64,
    #[serde(default)]
    pub particle: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisDoc {
    /// Axis whose half-spaces define the outcome branches.
    #[serde(default)]
    pub branch_axis: usize,
    #[serde(default)]
    pub boundary: f64,
    /// Axis carrying the macroscopic record (the pointer), when distinct.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_axis: Option<usize>,
    #[serde(default = "default_histogram_bins")]
    pub histogram_bins: usize,
}

fn default_histogram_bins() -> usize {
    64
}

impl Default for AnalysisDoc {
    fn default() -> Self {
        Self {
            branch_axis: 0,
            boundary: 0.0,
            record_axis: None,
            histogram_bins: default_histogram_bins(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiUnitsDoc {
    pub length_m_per_unit: f64,
    pub time_s_per_unit: f64,
}

/// A parsed scenario document. Unknown keys are rejected at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub schema_version: u32,
    pub name: String,
    pub grid: GridDoc,
    pub hamiltonian: HamiltonianDoc,
    pub initial_state: InitialStateDoc,
    pub run: RunDoc,
    #[serde(default)]
    pub ensemble: EnsembleDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse: Option<CollapseDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionDoc>,
    #[serde(default)]
    pub analysis: AnalysisDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub si_units: Option<SiUnitsDoc>,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub doc: ScenarioDoc,
    pub grid: GridSpec,
    pub hamiltonian: HamiltonianParams,
}

fn on_step_grid(t: f64, dt: f64) -> bool {
    let n = (t / dt).round();
    (n * dt - t).abs() <= 1e-9 * t.abs().max(1.0)
}

impl ScenarioSpec {
    /// Validate a parsed document exhaustively; every violation is listed.
    pub fn from_doc(doc: ScenarioDoc) -> Result<Self> {
        let mut issues: Vec<String> = Vec::new();

        if doc.schema_version != SCHEMA_VERSION {
            issues.push(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                doc.schema_version
            ));
        }

        let axis_total: usize = doc.grid.particles.iter().map(|p| p.axes).sum();
        if axis_total != doc.grid.dims {
            issues.push(format!(
                "grid.dims = {} but particles own {axis_total} axes in total",
                doc.grid.dims
            ));
        }
        let counts: Vec<usize> = doc.grid.particles.iter().map(|p| p.axes).collect();
        let grid = match GridSpec::build(
            doc.grid.dims,
            doc.grid.extent,
            doc.grid.points,
            &GridSpec::layout_from_counts(&counts),
        ) {
            Ok(g) => Some(g),
            Err(e) => {
                issues.push(e.to_string());
                None
            }
        };

        let hamiltonian = HamiltonianParams::new(
            doc.hamiltonian.masses.clone(),
            doc.hamiltonian.potential.clone(),
        );

        if let Some(grid) = grid.as_ref() {
            if let Err(e) = hamiltonian.validate(grid) {
                issues.push(e.to_string());
            }

            if !(doc.run.t_final > 0.0) {
                issues.push("run.t_final must be positive".into());
            }
            if !(doc.run.dt > 0.0) {
                issues.push("run.dt must be positive".into());
            } else {
                let bound = Propagator::dt_bound(grid, &hamiltonian);
                if doc.run.dt > bound {
                    issues.push(format!(
                        "run.dt = {} exceeds the stability bound {bound:.6} for this grid",
                        doc.run.dt
                    ));
                }
                if !on_step_grid(doc.run.t_final, doc.run.dt) {
                    issues.push(format!(
                        "run.t_final = {} is not a whole number of steps of dt = {}",
                        doc.run.t_final, doc.run.dt
                    ));
                }
            }
            if doc.run.frame_stride == 0 {
                issues.push("run.frame_stride must be >= 1".into());
            }
            if doc.ensemble.size == 0 {
                issues.push("ensemble.size must be >= 1".into());
            }

            validate_initial_state(&doc, grid, &mut issues);

            if let Some(c) = &doc.collapse {
                if !(c.lambda > 0.0 && c.lambda.is_finite()) {
                    issues.push(format!("collapse.lambda must be positive, got {}", c.lambda));
                }
                if let Err(e) = validate_sigma(c.sigma, grid) {
                    issues.push(e.to_string());
                }
            }
            if let Some(d) = &doc.detection {
                if let Err(e) = validate_sigma(d.sigma, grid) {
                    issues.push(e.to_string());
                }
                if !(d.time > 0.0 && d.time < doc.run.t_final) {
                    issues.push(format!(
                        "detection.time = {} must lie inside (0, t_final)",
                        d.time
                    ));
                }
                if doc.run.dt > 0.0 && !on_step_grid(d.time, doc.run.dt) {
                    issues.push(format!(
                        "detection.time = {} must fall on the dt step grid",
                        d.time
                    ));
                }
                if d.particle >= grid.particle_count() {
                    issues.push(format!("detection.particle {} out of range", d.particle));
                }
            }

            if doc.analysis.branch_axis >= grid.dims() {
                issues.push(format!(
                    "analysis.branch_axis {} out of range",
                    doc.analysis.branch_axis
                ));
            }
            if let Some(r) = doc.analysis.record_axis {
                if r >= grid.dims() {
                    issues.push(format!("analysis.record_axis {r} out of range"));
                }
            }
            if doc.analysis.histogram_bins < 2 {
                issues.push("analysis.histogram_bins must be >= 2".into());
            }
            if doc.analysis.boundary.abs() >= grid.extent() {
                issues.push("analysis.boundary lies outside the grid".into());
            }
        }

        if !issues.is_empty() {
            return Err(Error::ScenarioInvalid { issues });
        }
        let grid = grid.unwrap();
        Ok(Self {
            doc,
            grid,
            hamiltonian,
        })
    }

    pub fn n_steps(&self) -> usize {
        (self.doc.run.t_final / self.doc.run.dt).round() as usize
    }

    /// Construct and normalize the scenario's initial wave function.
    pub fn initial_state(&self) -> Result<WaveFunction> {
        match &self.doc.initial_state {
            InitialStateDoc::GaussianPacket {
                center,
                momentum,
                width,
            } => gaussian_packet(&self.grid, center, momentum, *width),
            InitialStateDoc::DoubleSlit {
                separation,
                slit_width,
                momentum,
            } => double_slit(&self.grid, *separation, *slit_width, *momentum),
            InitialStateDoc::SplitPackets {
                offset,
                momentum,
                width,
            } => split_packets(&self.grid, *offset, *momentum, *width),
            InitialStateDoc::PointerSuperposition {
                weight_plus,
                system_offset,
                system_width,
                pointer_width,
            } => pointer_superposition(
                &self.grid,
                *weight_plus,
                *system_offset,
                *system_width,
                *pointer_width,
            ),
        }
    }
}

fn validate_initial_state(doc: &ScenarioDoc, grid: &GridSpec, issues: &mut Vec<String>) {
    let l = grid.extent();
    let k_max = std::f64::consts::PI / grid.spacing();
    match &doc.initial_state {
        InitialStateDoc::GaussianPacket {
            center,
            momentum,
            width,
        } => {
            if center.len() != grid.dims() || momentum.len() != grid.dims() {
                issues.push("gaussian_packet center/momentum must have one entry per axis".into());
            }
            if !(*width > 0.0) {
                issues.push("gaussian_packet width must be positive".into());
            } else {
                for &c in center {
                    if c.abs() + 5.0 * width > l {
                        issues.push(format!(
                            "gaussian_packet at {c} is closer than 5 widths to the boundary"
                        ));
                    }
                }
            }
        }
        InitialStateDoc::DoubleSlit {
            separation,
            slit_width,
            momentum,
        } => {
            if grid.dims() != 1 {
                issues.push("double_slit needs a one-axis grid".into());
            }
            if !(*slit_width > 0.0 && *separation > 0.0) {
                issues.push("double_slit needs positive separation and slit width".into());
            } else {
                if separation <= &(4.0 * slit_width) {
                    issues.push(format!(
                        "slits not distinct: separation {separation} <= 4 x slit width"
                    ));
                }
                let overlap = (-separation * separation / (8.0 * slit_width * slit_width)).exp();
                if overlap > 0.5 {
                    issues.push(format!("slit packets overlap too much ({overlap:.3} > 0.5)"));
                }
                if separation / 2.0 + 5.0 * slit_width > l {
                    issues.push("slit packets too close to the boundary".into());
                }
                if momentum.abs() + 1.5 / slit_width > 0.9 * k_max {
                    issues.push("double_slit momentum content exceeds the grid bandwidth".into());
                }
            }
        }
        InitialStateDoc::SplitPackets {
            offset,
            momentum,
            width,
        } => {
            if grid.dims() != 1 {
                issues.push("split_packets needs a one-axis grid".into());
            }
            if !(*offset > 0.0 && *width > 0.0 && *momentum >= 0.0) {
                issues.push("split_packets needs offset > 0, width > 0, momentum >= 0".into());
            } else {
                if offset + 5.0 * width > l {
                    issues.push("split packets too close to the boundary".into());
                }
                if momentum + 1.5 / width > 0.9 * k_max {
                    issues.push("split_packets momentum content exceeds the grid bandwidth".into());
                }
                if let Some(d) = &doc.detection {
                    let sep = 2.0 * (offset + momentum * d.time);
                    if sep < 6.0 * d.sigma {
                        issues.push(format!(
                            "separation at detection ({sep:.3}) below 6 x detection sigma"
                        ));
                    }
                    if sep < 8.0 * width {
                        issues.push(format!(
                            "separation at detection ({sep:.3}) below 8 x packet width"
                        ));
                    }
                }
            }
        }
        InitialStateDoc::PointerSuperposition {
            weight_plus,
            system_offset,
            system_width,
            pointer_width,
        } => {
            if grid.dims() != 2 || grid.particle_count() != 2 {
                issues.push(
                    "pointer_superposition needs two particles on a two-axis grid".into(),
                );
            }
            if !(0.0 < *weight_plus && *weight_plus < 1.0) {
                issues.push("weight_plus must lie strictly between 0 and 1".into());
            }
            if !(*system_offset > 0.0 && *system_width > 0.0 && *pointer_width > 0.0) {
                issues.push("pointer packet geometry must be positive".into());
            } else {
                if system_offset + 5.0 * system_width > l {
                    issues.push("system packets too close to the boundary".into());
                }
                if system_offset < &(3.0 * system_width) {
                    issues.push("system packets not distinct (offset < 3 widths)".into());
                }
                if let PotentialSpec::PointerCoupling {
                    strength,
                    window,
                    switch_width,
                } = &doc.hamiltonian.potential
                {
                    if grid.dims() == 2 {
                        let m2 = doc.hamiltonian.masses[grid.layout()[1].particle];
                        let tau = window.1 - window.0;
                        let sep = strength * tau * tau / m2;
                        let spread = pointer_width
                            * (1.0 + (window.1 / (2.0 * m2 * pointer_width * pointer_width))
                                .powi(2))
                            .sqrt();
                        if sep < 6.0 * spread {
                            issues.push(format!(
                                "pointer branches separate by {sep:.3} at window end, \
                                 below 6 x pointer spread = {:.3}",
                                6.0 * spread
                            ));
                        }
                        if strength * tau + 1.5 / pointer_width > 0.9 * k_max {
                            issues.push(
                                "pointer momentum kick exceeds the grid bandwidth".into(),
                            );
                        }
                        if system_offset < &(3.0 * switch_width) {
                            issues.push(
                                "system packets sit inside the coupling switch region".into(),
                            );
                        }
                        if doc.run.dt > 0.0
                            && (!on_step_grid(window.0, doc.run.dt)
                                || !on_step_grid(window.1, doc.run.dt))
                        {
                            issues.push(
                                "coupling window boundaries must fall on the dt step grid".into(),
                            );
                        }
                    }
                } else {
                    issues.push(
                        "pointer_superposition requires the pointer_coupling potential".into(),
                    );
                }
            }
        }
    }
}

/// Parse and validate a scenario document (strict: unknown keys rejected).
pub fn load_scenario(text: &str) -> Result<ScenarioSpec> {
    let doc: ScenarioDoc =
        serde_json::from_str(text).map_err(|e| Error::ScenarioParse(e.to_string()))?;
    ScenarioSpec::from_doc(doc)
}

fn normalized(mut psi: WaveFunction) -> Result<WaveFunction> {
    psi.normalize()?;
    Ok(psi)
}

/// Normalized Gaussian packet with the given per-axis center and momentum.
pub fn gaussian_packet(
    grid: &GridSpec,
    center: &[f64],
    momentum: &[f64],
    width: f64,
) -> Result<WaveFunction> {
    if center.len() != grid.dims() || momentum.len() != grid.dims() {
        return Err(Error::InvalidParameter(
            "center and momentum must have one entry per grid axis".into(),
        ));
    }
    if !(width > 0.0) {
        return Err(Error::InvalidParameter("width must be positive".into()));
    }
    for &c in center {
        if c.abs() + 5.0 * width > grid.extent() {
            return Err(Error::InvalidParameter(format!(
                "packet at {c} violates the 5-width boundary margin"
            )));
        }
    }
    let c = center.to_vec();
    let k = momentum.to_vec();
    let inv = 1.0 / (4.0 * width * width);
    normalized(WaveFunction::from_fn(grid.clone(), 0.0, |x| {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..x.len() {
            let d = x[a] - c[a];
            r2 += d * d;
            phase += k[a] * x[a];
        }
        Complex64::from_polar((-r2 * inv).exp(), phase)
    }))
}

/// Equal superposition of two coherent packets at +/- separation/2 with a
/// common momentum, normalized including the overlap correction.
pub fn double_slit(
    grid: &GridSpec,
    separation: f64,
    slit_width: f64,
    momentum: f64,
) -> Result<WaveFunction> {
    if grid.dims() != 1 {
        return Err(Error::InvalidParameter("double_slit needs one axis".into()));
    }
    if !(separation > 4.0 * slit_width) {
        return Err(Error::InvalidParameter(format!(
            "slits not distinct: separation {separation} <= 4 x slit width {slit_width}"
        )));
    }
    let overlap = (-separation * separation / (8.0 * slit_width * slit_width)).exp();
    if overlap > 0.5 {
        return Err(Error::InvalidParameter(format!(
            "slit packets overlap too much ({overlap:.3} > 0.5)"
        )));
    }
    if separation / 2.0 + 5.0 * slit_width > grid.extent() {
        return Err(Error::InvalidParameter(
            "slit packets too close to the boundary".into(),
        ));
    }
    let h = separation / 2.0;
    let inv = 1.0 / (4.0 * slit_width * slit_width);
    normalized(WaveFunction::from_fn(grid.clone(), 0.0, |x| {
        let env = (-(x[0] - h) * (x[0] - h) * inv).exp() + (-(x[0] + h) * (x[0] + h) * inv).exp();
        Complex64::from_polar(env, momentum * x[0])
    }))
}

/// Two half-box packets at -/+ offset moving apart with -/+ momentum.
pub fn split_packets(
    grid: &GridSpec,
    offset: f64,
    momentum: f64,
    width: f64,
) -> Result<WaveFunction> {
    if grid.dims() != 1 {
        return Err(Error::InvalidParameter("split_packets needs one axis".into()));
    }
    let inv = 1.0 / (4.0 * width * width);
    normalized(WaveFunction::from_fn(grid.clone(), 0.0, |x| {
        let right = Complex64::from_polar(
            (-(x[0] - offset) * (x[0] - offset) * inv).exp(),
            momentum * x[0],
        );
        let left = Complex64::from_polar(
            (-(x[0] + offset) * (x[0] + offset) * inv).exp(),
            -momentum * x[0],
        );
        right + left
    }))
}

/// System two-packet superposition (weights w+, 1-w+) times a pointer packet
/// at rest.
pub fn pointer_superposition(
    grid: &GridSpec,
    weight_plus: f64,
    system_offset: f64,
    system_width: f64,
    pointer_width: f64,
) -> Result<WaveFunction> {
    if grid.dims() != 2 {
        return Err(Error::InvalidParameter(
            "pointer_superposition needs two axes".into(),
        ));
    }
    if !(0.0 < weight_plus && weight_plus < 1.0) {
        return Err(Error::InvalidParameter(
            "weight_plus must lie strictly between 0 and 1".into(),
        ));
    }
    let cp = weight_plus.sqrt();
    let cm = (1.0 - weight_plus).sqrt();
    let inv_s = 1.0 / (4.0 * system_width * system_width);
    let inv_p = 1.0 / (4.0 * pointer_width * pointer_width);
    normalized(WaveFunction::from_fn(grid.clone(), 0.0, |x| {
        let sys = cp * (-(x[0] - system_offset) * (x[0] - system_offset) * inv_s).exp()
            + cm * (-(x[0] + system_offset) * (x[0] + system_offset) * inv_s).exp();
        let ptr = (-x[1] * x[1] * inv_p).exp();
        Complex64::new(sys * ptr, 0.0)
    }))
}

/// Separation protocol for the box-splitting experiment.
#[derive(Debug, Clone, Copy)]
pub struct SeparationProtocol {
    /// Speed of each half-box (units of length/time).
    pub speed: f64,
    /// Forced detection time.
    pub detection_time: f64,
    /// Localization width of the detection hit.
    pub detection_sigma: f64,
}

/// Box-splitting scenario: one packet splits into two half-box packets flying
/// apart, then a detection localizes the contents on one side.
pub fn einstein_box(box_width: f64, protocol: &SeparationProtocol) -> Result<ScenarioSpec> {
    if !(box_width > 0.0) {
        return Err(Error::InvalidParameter("box width must be positive".into()));
    }
    let mut doc: ScenarioDoc = serde_json::from_str(builtin_document("einstein_box").unwrap())
        .expect("builtin einstein_box parses");
    doc.initial_state = InitialStateDoc::SplitPackets {
        offset: box_width / 2.0,
        momentum: protocol.speed * doc.hamiltonian.masses[0],
        width: box_width / 4.0,
    };
    doc.detection = Some(DetectionDoc {
        time: protocol.detection_time,
        particle: 0,
        sigma: protocol.detection_sigma,
    });
    ScenarioSpec::from_doc(doc)
}

/// Measurement scenario: a system superposition entangles with a pointer
/// through V = g s(x1) x2 during the window, producing two macroscopically
/// separated pointer branches.
pub fn pointer_measurement(coupling: f64, window: (f64, f64)) -> Result<ScenarioSpec> {
    let mut doc: ScenarioDoc =
        serde_json::from_str(builtin_document("pointer_measurement").unwrap())
            .expect("builtin pointer_measurement parses");
    if let PotentialSpec::PointerCoupling {
        strength,
        window: w,
        ..
    } = &mut doc.hamiltonian.potential
    {
        *strength = coupling;
        *w = window;
    }
    ScenarioSpec::from_doc(doc)
}
