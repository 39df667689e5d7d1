//! Property tests on small grids: linearity and reversibility of the
//! evolution, norm restoration under collapse, sampling bounds, and
//! statistic invariances.

use num_complex::Complex64;
use ontosim_core::{
    apply_collapse, branch_mass, build_grid, evolve_schrodinger, ks_distance, sample_equilibrium,
    Cdf, HamiltonianParams, PotentialSpec, Region, WaveFunction,
};
use proptest::prelude::*;

fn arb_state(points: usize) -> impl Strategy<Value = WaveFunction> {
    let coeffs = prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), points);
    coeffs.prop_filter_map("state must have usable norm", move |cs| {
        let grid = build_grid(1, 8.0, points, &[(0, 0)]).unwrap();
        // random band-limited state: low FFT modes with random coefficients
        let m = points;
        let mut psi = WaveFunction::from_fn(grid, 0.0, |x| {
            let mut v = Complex64::default();
            for (j, &(re, im)) in cs.iter().enumerate().take(6) {
                let k = 2.0 * std::f64::consts::PI * (j as f64) / (m as f64 * 0.25);
                v += Complex64::new(re, im) * Complex64::from_polar(1.0, k * x[0]);
            }
            v
        });
        match psi.normalize() {
            Ok(_) => Some(psi),
            Err(_) => None,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_is_linear_on_random_states(
        a in arb_state(32),
        b in arb_state(32),
        ca in -1.0f64..1.0,
        cb in -1.0f64..1.0,
    ) {
        let h = HamiltonianParams::new(vec![1.0], PotentialSpec::Harmonic { omega: 1.0 });
        let mut combo = a.clone();
        combo.amplitudes.zip_mut_with(&b.amplitudes, |x, y| {
            *x = Complex64::new(ca, 0.0) * *x + Complex64::new(cb, 0.0) * *y
        });
        let lhs = evolve_schrodinger(&combo, &h, 0.002, 50).unwrap();
        let ea = evolve_schrodinger(&a, &h, 0.002, 50).unwrap();
        let eb = evolve_schrodinger(&b, &h, 0.002, 50).unwrap();
        for ((l, x), y) in lhs.amplitudes.iter().zip(ea.amplitudes.iter()).zip(eb.amplitudes.iter()) {
            let rhs = Complex64::new(ca, 0.0) * x + Complex64::new(cb, 0.0) * y;
            prop_assert!((l - rhs).norm() < 1e-8);
        }
    }

    #[test]
    fn evolution_reverses(state in arb_state(64), steps in 10usize..80) {
        let h = HamiltonianParams::new(vec![1.0], PotentialSpec::Harmonic { omega: 0.7 });
        let fwd = evolve_schrodinger(&state, &h, 0.003, steps).unwrap();
        let back = evolve_schrodinger(&fwd, &h, -0.003, steps).unwrap();
        for (x, y) in back.amplitudes.iter().zip(state.amplitudes.iter()) {
            prop_assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn norm_survives_evolution(state in arb_state(64), steps in 1usize..200) {
        let h = HamiltonianParams::new(vec![1.0], PotentialSpec::Free);
        let out = evolve_schrodinger(&state, &h, 0.002, steps).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn collapse_restores_unit_norm(state in arb_state(64), center in -5.0f64..5.0) {
        let out = apply_collapse(&state, 0, &[center], 0.6);
        if let Ok(out) = out {
            prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_stay_inside_the_grid(state in arb_state(32), n in 1usize..200, seed in 0u64..1000) {
        let ens = sample_equilibrium(&state, n, seed).unwrap();
        prop_assert_eq!(ens.members.len(), n);
        for m in &ens.members {
            prop_assert!(m.positions[0] >= -8.0 - 0.26 && m.positions[0] < 8.0 + 0.26);
        }
    }

    #[test]
    fn branch_masses_partition_to_one(state in arb_state(64), cut1 in -6.0f64..0.0, cut2 in 0.0f64..6.0) {
        let cuts = [f64::NEG_INFINITY, cut1, cut2, f64::INFINITY];
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let region = Region { bounds: vec![Some((w[0], w[1]))] };
            total += branch_mass(&state, &region).unwrap();
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ks_is_invariant_under_affine_maps(
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
        seed in 0u64..500,
    ) {
        let grid = build_grid(1, 8.0, 64, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / 4.0).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let ens = sample_equilibrium(&psi, 200, seed).unwrap();
        let mut xs: Vec<f64> = ens.members.iter().map(|m| m.positions[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let dens = psi.probability_density();
        let coords = grid.axis_coords();
        let flat: Vec<f64> = dens.iter().copied().collect();
        let cdf = Cdf::from_density(&coords, &flat, grid.spacing()).unwrap();
        let d1 = ks_distance(&xs, &cdf).unwrap();

        let mapped: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let mapped_coords: Vec<f64> = coords.iter().map(|x| scale * x + shift).collect();
        let mapped_dens: Vec<f64> = flat.iter().map(|v| v / scale).collect();
        let cdf2 = Cdf::from_density(&mapped_coords, &mapped_dens, grid.spacing() * scale).unwrap();
        let d2 = ks_distance(&mapped, &cdf2).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-12);
    }
}
