//! End-to-end scenario checks: built-in smoke runs, the double-slit fringe
//! oracle, the box-splitting delocation contrast, and pointer-measurement
//! branch accounting.

use approx::assert_abs_diff_eq;
use ontosim_core::{
    branch_mass, builtin_document, delocation_report, evolve_ensemble, evolve_schrodinger,
    half_space_mass, load_scenario, matter_density, run_grw, run_with_schedule,
    sample_equilibrium, CollapseParams, DensityTimeSeries, EnsembleOptions, FrameKind,
    Propagator, Region, RunPhase, ScenarioSpec, TrajectoryStatus,
};

fn spec(name: &str) -> ScenarioSpec {
    load_scenario(builtin_document(name).unwrap()).unwrap()
}

#[test]
fn builtins_survive_short_smoke_runs() {
    for name in ontosim_core::BUILTIN_NAMES {
        let spec = spec(name);
        let mut psi = spec.initial_state().unwrap();
        let mut prop = Propagator::new(&spec.grid, &spec.hamiltonian, spec.doc.run.dt)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        for _ in 0..10 {
            prop.step(&mut psi).unwrap();
        }
        assert!((psi.norm() - 1.0).abs() < 1e-9, "{name} norm drifted");
        assert!(
            psi.boundary_mass() < 1e-8,
            "{name} leaks to the boundary: {}",
            psi.boundary_mass()
        );
    }
}

#[test]
fn double_slit_fringe_spacing_matches_the_interference_formula() {
    let spec = spec("double_slit");
    let psi0 = spec.initial_state().unwrap();
    let (m, d) = (1.0, 4.5);
    let psi = evolve_schrodinger(&psi0, &spec.hamiltonian, spec.doc.run.dt, spec.n_steps())
        .unwrap();
    let t = psi.time;
    let dens = psi.probability_density();
    let grid = &psi.grid;

    // locate maxima near the center with quadratic refinement
    let mut maxima = Vec::new();
    let n = grid.points();
    let floor = dens.iter().copied().fold(0.0f64, f64::max) * 1e-4;
    for i in 1..n - 1 {
        let (y0, y1, y2) = (dens[[i - 1]], dens[[i]], dens[[i + 1]]);
        if y1 > y0 && y1 > y2 && y1 > floor && grid.coord(i).abs() < 18.0 {
            let delta = 0.5 * (y0 - y2) / (y0 - 2.0 * y1 + y2);
            maxima.push(grid.coord(i) + delta * grid.spacing());
        }
    }
    maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let predicted = 2.0 * std::f64::consts::PI * t / (m * d);
    assert!(
        maxima.len() >= 5,
        "found only {} maxima: {maxima:?}",
        maxima.len()
    );
    // first three spacings around the center
    let central: Vec<f64> = maxima
        .iter()
        .copied()
        .filter(|x| x.abs() < 2.6 * predicted)
        .collect();
    for w in central.windows(2) {
        let spacing = w[1] - w[0];
        assert!(
            (spacing - predicted).abs() / predicted < 0.05,
            "fringe spacing {spacing} vs predicted {predicted}"
        );
    }
}

#[test]
fn box_splitting_delocates_matter_on_detection() {
    let spec = spec("einstein_box");
    let psi0 = spec.initial_state().unwrap();
    let detection = spec.doc.detection.clone().unwrap();
    let dt = spec.doc.run.dt;
    let masses = spec.hamiltonian.masses.clone();

    let mut series = DensityTimeSeries {
        frames: Vec::new(),
        frame_interval: dt * spec.doc.run.frame_stride as f64,
    };
    let stride = spec.doc.run.frame_stride;
    let mut center_rng = ontosim_core::rng::stream(11, "grw/centers");
    let (_, events) = run_with_schedule(
        &psi0,
        &spec.hamiltonian,
        detection.sigma,
        &[(detection.time, detection.particle)],
        dt,
        spec.doc.run.t_final,
        &mut center_rng,
        |phase, psi| {
            let kind = match phase {
                RunPhase::Initial => Some(FrameKind::Regular),
                RunPhase::Stepped { step } if step % stride == 0 => Some(FrameKind::Regular),
                RunPhase::PreCollapse { .. } => Some(FrameKind::PreCollapse),
                RunPhase::PostCollapse { .. } => Some(FrameKind::PostCollapse),
                _ => None,
            };
            if let Some(kind) = kind {
                series
                    .push(kind, matter_density(psi, &masses).unwrap())
                    .unwrap();
            }
        },
    )
    .unwrap();

    assert_eq!(events.len(), 1);
    let event = &events[0];
    assert_abs_diff_eq!(event.post_norm, 1.0, epsilon = 1e-12);

    let report = delocation_report(&series, 0.0, event.time).unwrap();
    assert!((report.before.0 - 0.5).abs() < 1e-3, "{:?}", report.before);
    assert!((report.before.1 - 0.5).abs() < 1e-3);
    let (near, far) = if event.center[0] > 0.0 {
        (report.after.1, report.after.0)
    } else {
        (report.after.0, report.after.1)
    };
    assert!(far < 1e-4, "far-side mass {far}");
    assert!(near > 1.0 - 1e-4);
    assert_eq!(report.frame_interval, 0.0);

    // total mass is conserved frame to frame, collapse included
    for frame in &series.frames {
        assert!((frame.field.total_mass() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn box_splitting_bohmian_particle_never_switches_sides() {
    let spec = spec("einstein_box");
    let psi0 = spec.initial_state().unwrap();
    let n = 40;
    let ensemble = sample_equilibrium(&psi0, n, 321).unwrap();
    let run = evolve_ensemble(
        &psi0,
        &spec.hamiltonian,
        &ensemble,
        spec.doc.run.dt,
        spec.doc.run.t_final,
        EnsembleOptions::default(),
    )
    .unwrap();
    for (traj, start) in run.trajectories.iter().zip(ensemble.members.iter()) {
        assert!(matches!(traj.status, TrajectoryStatus::Completed));
        assert_eq!(traj.axis_crossings[0], 0);
        let x0 = start.positions[0];
        let x1 = traj.final_configuration().positions[0];
        assert!(
            x0.signum() == x1.signum(),
            "side switched: {x0} -> {x1}"
        );
    }
}

#[test]
fn pointer_without_collapse_stays_superposed() {
    let spec = spec("pointer_measurement");
    let psi0 = spec.initial_state().unwrap();
    let psi = evolve_schrodinger(&psi0, &spec.hamiltonian, spec.doc.run.dt, spec.n_steps())
        .unwrap();
    // the record axis carries two well-separated branches of equal weight
    let record = spec.doc.analysis.record_axis.unwrap();
    let lower = branch_mass(&psi, &Region::half_space(2, record, 0.0, false)).unwrap();
    let upper = branch_mass(&psi, &Region::half_space(2, record, 0.0, true)).unwrap();
    assert!(
        lower > 0.45 && upper > 0.45,
        "branches not preserved: {lower:.3} / {upper:.3}"
    );
    assert_abs_diff_eq!(lower + upper, 1.0, epsilon = 1e-6);
}

#[test]
fn pointer_with_collapse_resolves_one_branch() {
    let spec = spec("pointer_measurement");
    let psi0 = spec.initial_state().unwrap();
    let collapse = spec.doc.collapse.clone().unwrap();
    let params = CollapseParams {
        lambda: collapse.lambda,
        sigma: collapse.sigma,
    };
    let (psi, history) = run_grw(
        &psi0,
        &spec.hamiltonian,
        &params,
        spec.doc.run.dt,
        spec.doc.run.t_final,
        17,
    )
    .unwrap();
    assert!(
        !history.events.is_empty(),
        "expected around 20 events, got none"
    );
    for e in &history.events {
        assert_abs_diff_eq!(e.post_norm, 1.0, epsilon = 1e-12);
    }
    let branch = spec.doc.analysis.branch_axis;
    let plus = branch_mass(&psi, &Region::half_space(2, branch, 0.0, true)).unwrap();
    let resolved = plus.max(1.0 - plus);
    assert!(resolved > 0.999, "unresolved: branch mass {resolved}");

    // flashes on the system particle cluster in the surviving branch
    let winner_positive = plus > 0.5;
    let late: Vec<&ontosim_core::CollapseEvent> = history
        .events
        .iter()
        .filter(|e| e.particle == 0 && e.time > 0.5)
        .collect();
    if !late.is_empty() {
        let in_branch = late
            .iter()
            .filter(|e| (e.center[0] > 0.0) == winner_positive)
            .count();
        assert!(
            in_branch * 10 >= late.len() * 9,
            "{in_branch} of {} late flashes in the surviving branch",
            late.len()
        );
    }
}

#[test]
fn entangled_branches_weight_the_matter_density() {
    let grid = ontosim_core::build_grid(2, 12.0, 128, &[(0, 0), (1, 0)]).unwrap();
    let w = 0.3f64;
    let mut psi = ontosim_core::WaveFunction::from_fn(grid.clone(), 0.0, |x| {
        let plus = w.sqrt()
            * (-(x[0] - 3.0).powi(2) / 0.8).exp()
            * (-(x[1] - 3.0).powi(2) / 0.8).exp();
        let minus = (1.0 - w).sqrt()
            * (-(x[0] + 3.0).powi(2) / 0.8).exp()
            * (-(x[1] + 3.0).powi(2) / 0.8).exp();
        num_complex::Complex64::new(plus + minus, 0.0)
    });
    psi.normalize().unwrap();
    let masses = [1.0, 2.0];
    let field = matter_density(&psi, &masses).unwrap();
    assert_abs_diff_eq!(field.total_mass(), 3.0, epsilon = 1e-6);
    let (left, right) = half_space_mass(&field, 0.0);
    assert_abs_diff_eq!(right, w * 3.0, epsilon = 1e-6);
    assert_abs_diff_eq!(left, (1.0 - w) * 3.0, epsilon = 1e-6);
}
