//! Unitary Schroedinger evolution by second-order Strang splitting.
//!
//! One step applies exp(-i V dt/2), the exact kinetic factor
//! exp(-i K dt) in the frequency domain, then exp(-i V dt/2) again. Every
//! factor is a pure phase, so the scheme conserves the norm up to FFT
//! round-off without any renormalization. Periodic boundaries are implied;
//! scenarios keep wave packets far enough from the edges that the boundary
//! mass stays negligible.

use std::sync::Arc;

use ndarray::{ArrayD, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hamiltonian::HamiltonianParams;
use crate::wavefunction::WaveFunction;

/// Steps between non-finiteness checks during long evolutions.
const CHECK_INTERVAL: usize = 64;

pub(crate) struct AxisFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl AxisFft {
    pub(crate) fn new(points: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            line: vec![Complex64::default(); points],
        }
    }

    /// FFT every 1-D lane of `arr` along `axis`, in place. No normalization.
    pub(crate) fn transform(&mut self, arr: &mut ArrayD<Complex64>, axis: usize, inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        for mut lane in arr.lanes_mut(Axis(axis)) {
            if let Some(slice) = lane.as_slice_mut() {
                plan.process_with_scratch(slice, &mut self.scratch);
            } else {
                for (b, v) in self.line.iter_mut().zip(lane.iter()) {
                    *b = *v;
                }
                plan.process_with_scratch(&mut self.line, &mut self.scratch);
                for (v, b) in lane.iter_mut().zip(self.line.iter()) {
                    *v = *b;
                }
            }
        }
    }
}

/// Reusable split-step engine for a fixed grid, Hamiltonian and dt.
pub struct Propagator {
    grid: GridSpec,
    hamiltonian: HamiltonianParams,
    dt: f64,
    /// exp(-i K dt) including the 1/M^dims inverse-FFT normalization.
    kinetic_phase: ArrayD<Complex64>,
    /// exp(-i V dt/2) for the current potential segment.
    potential_half: ArrayD<Complex64>,
    segment: usize,
    fft: AxisFft,
    steps_since_check: usize,
}

impl Propagator {
    pub fn new(grid: &GridSpec, hamiltonian: &HamiltonianParams, dt: f64) -> Result<Self> {
        hamiltonian.validate(grid)?;
        let bound = Self::dt_bound(grid, hamiltonian);
        if dt == 0.0 || !dt.is_finite() || dt.abs() > bound {
            return Err(Error::TimeStepTooLarge { dt, bound });
        }
        let shape = grid.shape();
        let norm = 1.0 / grid.total_points() as f64;
        let kinetic_phase = ArrayD::from_shape_fn(shape, |idx| {
            let mut e = 0.0;
            for a in 0..grid.dims() {
                let k = grid.wavenumber(idx[a]);
                e += k * k / (2.0 * hamiltonian.axis_mass(grid, a));
            }
            Complex64::from_polar(norm, -e * dt)
        });
        let mut p = Self {
            grid: grid.clone(),
            hamiltonian: hamiltonian.clone(),
            dt,
            kinetic_phase,
            potential_half: ArrayD::zeros(grid.shape()),
            segment: usize::MAX,
            fft: AxisFft::new(grid.points()),
            steps_since_check: 0,
        };
        p.refresh_potential(0.0);
        Ok(p)
    }

    /// Accuracy bound on |dt|: the largest kinetic phase advanced per step
    /// stays below pi.
    pub fn dt_bound(grid: &GridSpec, hamiltonian: &HamiltonianParams) -> f64 {
        let k_nyq = std::f64::consts::PI / grid.spacing();
        let e_max: f64 = (0..grid.dims())
            .map(|a| k_nyq * k_nyq / (2.0 * hamiltonian.axis_mass(grid, a)))
            .sum();
        std::f64::consts::PI / e_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn refresh_potential(&mut self, t: f64) {
        let seg = self.hamiltonian.potential.segment(t);
        if seg == self.segment {
            return;
        }
        let v = self
            .hamiltonian
            .potential
            .evaluate(&self.grid, &self.hamiltonian.masses, t);
        let half = -0.5 * self.dt;
        self.potential_half = v.mapv(|vi| Complex64::from_polar(1.0, vi * half));
        self.segment = seg;
    }

    /// Advance `psi` by one step of dt.
    pub fn step(&mut self, psi: &mut WaveFunction) -> Result<()> {
        self.refresh_potential(psi.time);
        psi.amplitudes.zip_mut_with(&self.potential_half, |a, p| *a *= p);
        for axis in 0..self.grid.dims() {
            self.fft.transform(&mut psi.amplitudes, axis, false);
        }
        psi.amplitudes.zip_mut_with(&self.kinetic_phase, |a, p| *a *= p);
        for axis in 0..self.grid.dims() {
            self.fft.transform(&mut psi.amplitudes, axis, true);
        }
        psi.amplitudes.zip_mut_with(&self.potential_half, |a, p| *a *= p);
        psi.time += self.dt;

        self.steps_since_check += 1;
        if self.steps_since_check >= CHECK_INTERVAL {
            self.steps_since_check = 0;
            if !psi.norm().is_finite() {
                return Err(Error::NonFinite {
                    context: format!("evolution at t = {}", psi.time),
                });
            }
        }
        Ok(())
    }

    pub fn evolve(&mut self, psi: &mut WaveFunction, n_steps: usize) -> Result<()> {
        for _ in 0..n_steps {
            self.step(psi)?;
        }
        if !psi.is_finite() {
            return Err(Error::NonFinite {
                context: format!("evolution at t = {}", psi.time),
            });
        }
        Ok(())
    }
}

/// Evolve a wave function by `n_steps` of `dt` under `hamiltonian`.
///
/// Deterministic and unitary; `dt` may be negative to run the evolution
/// backwards.
pub fn evolve_schrodinger(
    psi: &WaveFunction,
    hamiltonian: &HamiltonianParams,
    dt: f64,
    n_steps: usize,
) -> Result<WaveFunction> {
    let mut out = psi.clone();
    if n_steps == 0 {
        return Ok(out);
    }
    let mut prop = Propagator::new(&psi.grid, hamiltonian, dt)?;
    prop.evolve(&mut out, n_steps)?;
    Ok(out)
}

/// Expectation value of the Hamiltonian (kinetic part evaluated spectrally).
pub fn energy_expectation(psi: &WaveFunction, hamiltonian: &HamiltonianParams) -> Result<f64> {
    hamiltonian.validate(&psi.grid)?;
    let grid = &psi.grid;
    let mut hat = psi.amplitudes.clone();
    let mut fft = AxisFft::new(grid.points());
    for axis in 0..grid.dims() {
        fft.transform(&mut hat, axis, false);
    }
    let dv = grid.cell_volume();
    let spectral_weight = dv / grid.total_points() as f64;
    let mut kinetic = 0.0;
    for (idx, a) in hat.indexed_iter() {
        let mut e = 0.0;
        for ax in 0..grid.dims() {
            let k = grid.wavenumber(idx[ax]);
            e += k * k / (2.0 * hamiltonian.axis_mass(grid, ax));
        }
        kinetic += e * a.norm_sqr();
    }
    kinetic *= spectral_weight;
    let v = hamiltonian
        .potential
        .evaluate(grid, &hamiltonian.masses, psi.time);
    let potential: f64 = psi
        .amplitudes
        .iter()
        .zip(v.iter())
        .map(|(a, vi)| vi * a.norm_sqr())
        .sum::<f64>()
        * dv;
    Ok(kinetic + potential)
}

/// Spectral derivative of `psi` along one grid axis (Nyquist mode dropped).
pub fn spectral_gradient(psi: &WaveFunction, axis: usize) -> ArrayD<Complex64> {
    let grid = &psi.grid;
    let m = grid.points();
    let mut hat = psi.amplitudes.clone();
    let mut fft = AxisFft::new(m);
    fft.transform(&mut hat, axis, false);
    let scale = 1.0 / m as f64;
    for (idx, a) in hat.indexed_iter_mut() {
        let j = idx[axis];
        let k = if j == m / 2 { 0.0 } else { grid.wavenumber(j) };
        *a *= Complex64::new(0.0, k * scale);
    }
    fft.transform(&mut hat, axis, true);
    hat
}
