//! Ensemble transport checks: equivariance of |psi|^2 sampling under the
//! Bohmian flow, mirror symmetry, no-crossing order preservation, and
//! bit-identical determinism.

use ontosim_core::{
    builtin_document, evolve_ensemble, load_scenario, sample_equilibrium, Cdf, EnsembleOptions,
    TrajectoryStatus,
};

fn sorted_finals(run: &ontosim_core::EnsembleRun) -> Vec<f64> {
    let mut xs: Vec<f64> = run
        .trajectories
        .iter()
        .filter(|t| matches!(t.status, TrajectoryStatus::Completed))
        .map(|t| t.final_configuration().positions[0])
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs
}

#[test]
fn free_gaussian_ensemble_stays_born_distributed() {
    let spec = load_scenario(builtin_document("free_gaussian").unwrap()).unwrap();
    let psi0 = spec.initial_state().unwrap();
    let n = 3000;
    let ensemble = sample_equilibrium(&psi0, n, 2024).unwrap();
    // half the builtin horizon keeps this test quick
    let run = evolve_ensemble(
        &psi0,
        &spec.hamiltonian,
        &ensemble,
        spec.doc.run.dt,
        2.0,
        EnsembleOptions::default(),
    )
    .unwrap();
    let xs = sorted_finals(&run);
    assert_eq!(xs.len(), n, "no member should abort on a nodeless state");

    let dens = run.final_psi.probability_density();
    let coords = run.final_psi.grid.axis_coords();
    let flat: Vec<f64> = dens.iter().copied().collect();
    let cdf = Cdf::from_density(&coords, &flat, run.final_psi.grid.spacing()).unwrap();
    let d = ontosim_core::ks_distance(&xs, &cdf).unwrap();
    let bound = ontosim_core::KS_CRIT_1PCT / (n as f64).sqrt();
    assert!(d < 1.3 * bound, "KS = {d:.4}, bound = {bound:.4}");
}

#[test]
fn mirror_members_stay_mirrored() {
    let spec = load_scenario(builtin_document("double_slit").unwrap()).unwrap();
    let psi0 = spec.initial_state().unwrap();
    let mut ensemble = sample_equilibrium(&psi0, 2, 1).unwrap();
    ensemble.members[0].positions[0] = 1.7;
    ensemble.members[1].positions[0] = -1.7;
    let run = evolve_ensemble(
        &psi0,
        &spec.hamiltonian,
        &ensemble,
        spec.doc.run.dt,
        2.0,
        EnsembleOptions { sample_stride: 50 },
    )
    .unwrap();
    for (a, b) in run.trajectories[0]
        .samples
        .iter()
        .zip(run.trajectories[1].samples.iter())
    {
        assert!(
            (a.positions[0] + b.positions[0]).abs() < 1e-8,
            "mirror broken: {} vs {}",
            a.positions[0],
            b.positions[0]
        );
    }
}

#[test]
fn double_slit_trajectories_preserve_order_and_never_cross_the_axis() {
    let spec = load_scenario(builtin_document("double_slit").unwrap()).unwrap();
    let psi0 = spec.initial_state().unwrap();
    let n = 400;
    let ensemble = sample_equilibrium(&psi0, n, 7).unwrap();
    let run = evolve_ensemble(
        &psi0,
        &spec.hamiltonian,
        &ensemble,
        spec.doc.run.dt,
        2.0,
        EnsembleOptions::default(),
    )
    .unwrap();

    let mut paired: Vec<(f64, f64, &TrajectoryStatus)> = run
        .trajectories
        .iter()
        .zip(ensemble.members.iter())
        .filter(|(t, _)| matches!(t.status, TrajectoryStatus::Completed))
        .map(|(t, m)| {
            (
                m.positions[0],
                t.final_configuration().positions[0],
                &t.status,
            )
        })
        .collect();
    let aborted = n - paired.len();
    assert!(
        (aborted as f64) < 0.001 * n as f64 + 1.0,
        "{aborted} node aborts in {n} members"
    );

    // first-order flow: initial order must be preserved at the end
    paired.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in paired.windows(2) {
        assert!(
            w[1].1 >= w[0].1 - 1e-9,
            "crossing: starts {:.4},{:.4} -> ends {:.4},{:.4}",
            w[0].0,
            w[1].0,
            w[0].1,
            w[1].1
        );
    }

    // symmetry axis is never crossed
    for (t, m) in run.trajectories.iter().zip(ensemble.members.iter()) {
        if matches!(t.status, TrajectoryStatus::Completed) {
            assert_eq!(
                t.axis_crossings[0], 0,
                "member starting at {} crossed the axis",
                m.positions[0]
            );
        }
    }
}

#[test]
fn identical_seeds_give_bit_identical_trajectories() {
    let spec = load_scenario(builtin_document("free_gaussian").unwrap()).unwrap();
    let psi0 = spec.initial_state().unwrap();
    let opts = EnsembleOptions { sample_stride: 100 };
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let ensemble = sample_equilibrium(&psi0, 64, 99).unwrap();
        let run = evolve_ensemble(&psi0, &spec.hamiltonian, &ensemble, 0.002, 1.0, opts).unwrap();
        let bits: Vec<u64> = run
            .trajectories
            .iter()
            .flat_map(|t| t.samples.iter())
            .flat_map(|s| s.positions.iter().map(|x| x.to_bits()))
            .collect();
        outputs.push(bits);
    }
    assert_eq!(outputs[0], outputs[1]);
}
