//! Shared numerical engine for comparing three accounts of quantum dynamics
//! on the same footing: deterministic particle trajectories guided by the
//! wave function, stochastic spontaneous localization read as a matter
//! density, and the same localization events read as a bare flash record.
//!
//! The crate provides the configuration-space grid and split-step spectral
//! propagator, the guiding-equation trajectory integrator with |psi|^2
//! ensemble sampling, the Poisson-timed collapse dynamics, extraction of each
//! account's primitive variables, scenario documents for the standard thought
//! experiments, and the goodness-of-fit statistics used to verify that all
//! three reproduce Born-rule outcome frequencies.

pub mod bohmian;
pub mod error;
pub mod grid;
pub mod grw;
pub mod hamiltonian;
mod interp;
pub mod ontology;
pub mod propagator;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod wavefunction;

pub use bohmian::{
    evolve_ensemble, integrate_trajectory, sample_equilibrium, velocity_field, EnsembleOptions,
    EnsembleRun, EquilibriumEnsemble, ParticleConfiguration, Trajectory, TrajectoryStatus,
};
pub use error::{Error, Result};
pub use grid::{build_grid, AxisOwner, GridSpec};
pub use grw::{
    apply_collapse, collapse_center_density, draw_jump_schedule, run_grw, run_with_jumps,
    run_with_schedule, tail_mass, CollapseEvent, CollapseParams, FlashHistory, RunPhase,
    ScheduledJump,
};
pub use hamiltonian::{HamiltonianParams, PotentialSpec};
pub use ontology::{
    delocation_report, extract_flashes, flash_region_counts, half_space_mass, matter_density,
    DelocationReport, DensityFrame, DensityTimeSeries, FrameKind, MatterDensityField,
};
pub use propagator::{energy_expectation, evolve_schrodinger, spectral_gradient, Propagator};
pub use scenario::{
    builtin_document, double_slit, einstein_box, gaussian_packet, load_scenario,
    pointer_measurement, pointer_superposition, split_packets, ScenarioDoc, ScenarioSpec,
    SeparationProtocol, BUILTIN_NAMES,
};
pub use stats::{
    branch_mass, chi_square_counts, ks_distance, Cdf, ChiSquare, Criterion, Region, TestReport,
    KS_CRIT_1PCT,
};
pub use wavefunction::WaveFunction;
