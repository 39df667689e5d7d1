//! Guiding-equation velocity field, trajectory integration and
//! quantum-equilibrium ensemble sampling.
//!
//! Particle velocities are dx_k/dt = (1/m_k) Im(grad_k psi / psi) evaluated at
//! the full configuration (hbar = 1). The wave function advances on a fixed
//! PDE step; particle positions integrate with classical RK4, interpolating
//! psi cubically in space and linearly in time between stored steps. Near
//! wave-function nodes the particle step is halved down to dt/256, after
//! which the trajectory is flagged and frozen rather than silently dropped.

use ndarray::ArrayD;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hamiltonian::HamiltonianParams;
use crate::interp::interpolate_fields;
use crate::propagator::{spectral_gradient, Propagator};
use crate::rng;
use crate::wavefunction::WaveFunction;

/// Node guard: velocities are rejected where |psi|^2 < NODE_EPS_REL * max|psi|^2.
pub const NODE_EPS_REL: f64 = 1e-12;

/// Particle steps may shrink to dt / 2^MAX_HALVINGS before aborting.
pub const MAX_HALVINGS: u32 = 8;

/// Instantaneous particle positions, one coordinate per grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfiguration {
    pub positions: Vec<f64>,
    pub time: f64,
}

impl ParticleConfiguration {
    pub fn new(positions: Vec<f64>, time: f64) -> Self {
        Self { positions, time }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.positions.len() != grid.dims() {
            return Err(Error::InvalidParameter(format!(
                "configuration has {} coordinates for a {}-axis grid",
                self.positions.len(),
                grid.dims()
            )));
        }
        for (a, &x) in self.positions.iter().enumerate() {
            if !grid.contains(x) {
                return Err(Error::OutOfDomain(format!("axis {a} coordinate {x}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryStatus {
    Completed,
    /// Velocity evaluation kept hitting a node; position frozen at `time`.
    NodeAborted { time: f64 },
}

/// Time-ordered configuration samples for one ensemble member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<ParticleConfiguration>,
    /// PDE step underlying the integration.
    pub dt: f64,
    /// Steps between recorded samples (0 = endpoints only).
    pub stride: usize,
    pub status: TrajectoryStatus,
    /// Largest particle speed encountered (diagnostic bound for continuity).
    pub max_speed: f64,
    /// Sign changes of each coordinate about 0, counted per micro-step.
    pub axis_crossings: Vec<u32>,
}

impl Trajectory {
    pub fn final_configuration(&self) -> &ParticleConfiguration {
        self.samples.last().expect("trajectory has samples")
    }
}

/// Initial configurations drawn i.i.d. from |psi|^2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumEnsemble {
    pub members: Vec<ParticleConfiguration>,
    pub seed: u64,
    /// Time of the sampled wave function.
    pub source_time: f64,
}

/// Draw `n` configurations from the discrete |psi|^2 dV mass function with
/// uniform in-cell jitter, reproducibly from `seed` (stream `"equilibrium"`).
pub fn sample_equilibrium(psi: &WaveFunction, n: usize, seed: u64) -> Result<EquilibriumEnsemble> {
    if n == 0 {
        return Err(Error::InvalidParameter("ensemble size must be >= 1".into()));
    }
    let grid = &psi.grid;
    let dens = psi.probability_density();
    let dv = grid.cell_volume();
    let mut cdf = Vec::with_capacity(dens.len());
    let mut acc = 0.0;
    for v in dens.iter() {
        acc += v * dv;
        cdf.push(acc);
    }
    if !(acc.is_finite() && acc > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let total = acc;
    let shape = grid.shape();
    let mut rng = rng::stream(seed, "equilibrium");
    let mut members = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * total;
        let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        // unflatten (row-major)
        let mut rem = cell;
        let mut positions = vec![0.0; grid.dims()];
        for a in (0..grid.dims()).rev() {
            let i = rem % shape[a];
            rem /= shape[a];
            positions[a] = grid.coord(i);
        }
        for x in positions.iter_mut() {
            let jitter: f64 = rng.gen::<f64>() - 0.5;
            *x += jitter * grid.spacing();
        }
        members.push(ParticleConfiguration::new(positions, psi.time));
    }
    Ok(EquilibriumEnsemble {
        members,
        seed,
        source_time: psi.time,
    })
}

/// Velocity evaluator for one PDE step, shared read-only across members.
struct StepFields<'a> {
    grid: &'a GridSpec,
    inv_axis_mass: &'a [f64],
    /// psi then its axis gradients, at the step start.
    prev: Vec<&'a ArrayD<Complex64>>,
    /// Same fields at the step end.
    next: Vec<&'a ArrayD<Complex64>>,
    t_start: f64,
    dt: f64,
    eps_node: f64,
}

struct NodeHit;

impl StepFields<'_> {
    /// Guiding velocity at `point` and absolute time `t` within this step.
    fn velocity(
        &self,
        point: &[f64],
        t: f64,
        vals: &mut [Complex64],
        out: &mut [f64],
    ) -> std::result::Result<(), NodeHit> {
        let d = self.grid.dims();
        let theta = ((t - self.t_start) / self.dt).clamp(0.0, 1.0);
        let (pv, nv) = vals.split_at_mut(d + 1);
        interpolate_fields(self.grid, &self.prev, point, pv);
        interpolate_fields(self.grid, &self.next, point, nv);
        let psi = (1.0 - theta) * pv[0] + theta * nv[0];
        let dens = psi.norm_sqr();
        if !(dens >= self.eps_node) {
            return Err(NodeHit);
        }
        for a in 0..d {
            let grad = (1.0 - theta) * pv[a + 1] + theta * nv[a + 1];
            out[a] = self.inv_axis_mass[a] * (grad * psi.conj()).im / dens;
        }
        Ok(())
    }
}

struct MemberState {
    x: Vec<f64>,
    status: TrajectoryStatus,
    max_speed: f64,
    crossings: Vec<u32>,
    samples: Vec<ParticleConfiguration>,
}

impl MemberState {
    fn new(config: &ParticleConfiguration, dims: usize) -> Self {
        Self {
            x: config.positions.clone(),
            status: TrajectoryStatus::Completed,
            max_speed: 0.0,
            crossings: vec![0; dims],
            samples: vec![config.clone()],
        }
    }

    /// One RK4 micro-step of size `h` starting at absolute time `t`.
    fn rk4(&mut self, fields: &StepFields, t: f64, h: f64) -> std::result::Result<(), NodeHit> {
        let d = self.x.len();
        let mut vals = vec![Complex64::default(); 2 * (d + 1)];
        let mut k1 = vec![0.0; d];
        let mut k2 = vec![0.0; d];
        let mut k3 = vec![0.0; d];
        let mut k4 = vec![0.0; d];
        let mut xt = vec![0.0; d];

        fields.velocity(&self.x, t, &mut vals, &mut k1)?;
        for a in 0..d {
            xt[a] = self.x[a] + 0.5 * h * k1[a];
        }
        fields.velocity(&xt, t + 0.5 * h, &mut vals, &mut k2)?;
        for a in 0..d {
            xt[a] = self.x[a] + 0.5 * h * k2[a];
        }
        fields.velocity(&xt, t + 0.5 * h, &mut vals, &mut k3)?;
        for a in 0..d {
            xt[a] = self.x[a] + h * k3[a];
        }
        fields.velocity(&xt, t + h, &mut vals, &mut k4)?;

        for a in 0..d {
            let old = self.x[a];
            let v = (k1[a] + 2.0 * (k2[a] + k3[a]) + k4[a]) / 6.0;
            self.max_speed = self.max_speed.max(v.abs());
            let new = old + h * v;
            if old != 0.0 && new != 0.0 && old.signum() != new.signum() {
                self.crossings[a] += 1;
            }
            self.x[a] = new;
        }
        Ok(())
    }

    /// Advance across one full PDE step, halving on node proximity.
    fn advance(&mut self, fields: &StepFields) {
        if !matches!(self.status, TrajectoryStatus::Completed) {
            return;
        }
        let t_end = fields.t_start + fields.dt;
        let mut t = fields.t_start;
        let mut h = fields.dt;
        let h_min = fields.dt / 2f64.powi(MAX_HALVINGS as i32);
        while t < t_end - 1e-12 * fields.dt {
            h = h.min(t_end - t);
            let trial = self.x.clone();
            match self.rk4(fields, t, h) {
                Ok(()) => {
                    t += h;
                    h = (h * 2.0).min(fields.dt);
                }
                Err(NodeHit) => {
                    self.x = trial;
                    h *= 0.5;
                    if h < h_min {
                        self.status = TrajectoryStatus::NodeAborted { time: t };
                        return;
                    }
                }
            }
        }
    }
}

/// Options for ensemble trajectory integration.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleOptions {
    /// PDE steps between recorded samples; 0 records endpoints only.
    pub sample_stride: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { sample_stride: 0 }
    }
}

/// Result of transporting an ensemble along the Bohmian flow.
pub struct EnsembleRun {
    pub trajectories: Vec<Trajectory>,
    pub final_psi: WaveFunction,
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && t_final > 0.0) {
        return Err(Error::InvalidParameter(
            "trajectory integration needs dt > 0 and t_final > 0".into(),
        ));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "t_final = {t_final} is not a whole number of steps of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Transport every member of `ensemble` from `psi0.time` to
/// `psi0.time + t_final`, co-evolving the wave function once and sharing it
/// read-only across members. Members are mutually independent and integrate
/// in parallel; per-member failures are flagged in the returned trajectories.
pub fn evolve_ensemble(
    psi0: &WaveFunction,
    hamiltonian: &HamiltonianParams,
    ensemble: &EquilibriumEnsemble,
    dt: f64,
    t_final: f64,
    opts: EnsembleOptions,
) -> Result<EnsembleRun> {
    let grid = &psi0.grid;
    for m in &ensemble.members {
        m.validate(grid)?;
    }
    let n_steps = step_count(t_final, dt)?;
    let d = grid.dims();
    let inv_axis_mass: Vec<f64> = (0..d)
        .map(|a| 1.0 / hamiltonian.axis_mass(grid, a))
        .collect();

    let mut prop = Propagator::new(grid, hamiltonian, dt)?;
    let mut psi_prev = psi0.clone();
    let mut grads_prev: Vec<ArrayD<Complex64>> =
        (0..d).map(|a| spectral_gradient(&psi_prev, a)).collect();

    let mut members: Vec<MemberState> = ensemble
        .members
        .iter()
        .map(|c| MemberState::new(c, d))
        .collect();

    for step in 0..n_steps {
        let mut psi_next = psi_prev.clone();
        prop.step(&mut psi_next)?;
        let grads_next: Vec<ArrayD<Complex64>> =
            (0..d).map(|a| spectral_gradient(&psi_next, a)).collect();

        let max_dens = psi_prev
            .amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .fold(0.0f64, f64::max);
        let mut prev_fields: Vec<&ArrayD<Complex64>> = vec![&psi_prev.amplitudes];
        prev_fields.extend(grads_prev.iter());
        let mut next_fields: Vec<&ArrayD<Complex64>> = vec![&psi_next.amplitudes];
        next_fields.extend(grads_next.iter());
        let fields = StepFields {
            grid,
            inv_axis_mass: &inv_axis_mass,
            prev: prev_fields,
            next: next_fields,
            t_start: psi_prev.time,
            dt,
            eps_node: NODE_EPS_REL * max_dens,
        };

        let t_after = psi_next.time;
        let record = opts.sample_stride > 0 && (step + 1) % opts.sample_stride == 0;
        members.par_iter_mut().for_each(|m| {
            m.advance(&fields);
            if record && matches!(m.status, TrajectoryStatus::Completed) {
                m.samples
                    .push(ParticleConfiguration::new(m.x.clone(), t_after));
            }
        });

        psi_prev = psi_next;
        grads_prev = grads_next;
    }

    let t_end = psi_prev.time;
    let trajectories = members
        .into_iter()
        .map(|mut m| {
            let needs_final = match m.status {
                TrajectoryStatus::Completed => m
                    .samples
                    .last()
                    .map(|s| (s.time - t_end).abs() > 1e-12)
                    .unwrap_or(true),
                TrajectoryStatus::NodeAborted { .. } => false,
            };
            if needs_final {
                m.samples.push(ParticleConfiguration::new(m.x, t_end));
            }
            Trajectory {
                samples: m.samples,
                dt,
                stride: opts.sample_stride,
                status: m.status,
                max_speed: m.max_speed,
                axis_crossings: m.crossings,
            }
        })
        .collect();

    Ok(EnsembleRun {
        trajectories,
        final_psi: psi_prev,
    })
}

/// Integrate a single trajectory, recording every PDE step.
pub fn integrate_trajectory(
    psi0: &WaveFunction,
    hamiltonian: &HamiltonianParams,
    config0: &ParticleConfiguration,
    dt: f64,
    t_final: f64,
) -> Result<Trajectory> {
    config0.validate(&psi0.grid)?;
    let ensemble = EquilibriumEnsemble {
        members: vec![config0.clone()],
        seed: 0,
        source_time: psi0.time,
    };
    let run = evolve_ensemble(
        psi0,
        hamiltonian,
        &ensemble,
        dt,
        t_final,
        EnsembleOptions { sample_stride: 1 },
    )?;
    Ok(run.trajectories.into_iter().next().unwrap())
}

/// Guiding velocity (one component per grid axis) at a single configuration.
pub fn velocity_field(
    psi: &WaveFunction,
    hamiltonian: &HamiltonianParams,
    config: &ParticleConfiguration,
) -> Result<Vec<f64>> {
    config.validate(&psi.grid)?;
    hamiltonian.validate(&psi.grid)?;
    let grid = &psi.grid;
    let d = grid.dims();
    let grads: Vec<ArrayD<Complex64>> = (0..d).map(|a| spectral_gradient(psi, a)).collect();
    let mut fields: Vec<&ArrayD<Complex64>> = vec![&psi.amplitudes];
    fields.extend(grads.iter());
    let mut vals = vec![Complex64::default(); d + 1];
    interpolate_fields(grid, &fields, &config.positions, &mut vals);
    let max_dens = psi
        .amplitudes
        .iter()
        .map(|a| a.norm_sqr())
        .fold(0.0f64, f64::max);
    let dens = vals[0].norm_sqr();
    if !(dens >= NODE_EPS_REL * max_dens) {
        return Err(Error::NodeProximity { time: psi.time });
    }
    let mut v = vec![0.0; d];
    for a in 0..d {
        v[a] = (vals[a + 1] * vals[0].conj()).im / (dens * hamiltonian.axis_mass(grid, a));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "velocity field".into(),
        });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::hamiltonian::PotentialSpec;
    use approx::assert_abs_diff_eq;

    fn free_h() -> HamiltonianParams {
        HamiltonianParams::new(vec![1.0], PotentialSpec::Free)
    }

    #[test]
    fn plane_phase_state_moves_at_its_wavenumber() {
        let grid = build_grid(1, 10.0, 128, &[(0, 0)]).unwrap();
        let k0 = grid.wavenumber(5);
        let mut psi =
            WaveFunction::from_fn(grid.clone(), 0.0, |x| Complex64::from_polar(1.0, k0 * x[0]));
        psi.normalize().unwrap();
        for x0 in [-3.3, 0.0, 2.71] {
            let v = velocity_field(&psi, &free_h(), &ParticleConfiguration::new(vec![x0], 0.0))
                .unwrap();
            assert_abs_diff_eq!(v[0], k0, epsilon = 1e-9);
        }
    }

    #[test]
    fn real_state_is_at_rest() {
        let grid = build_grid(1, 10.0, 128, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / 4.0).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let v = velocity_field(&psi, &free_h(), &ParticleConfiguration::new(vec![0.7], 0.0))
            .unwrap();
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn node_proximity_is_reported() {
        let grid = build_grid(1, 10.0, 128, &[(0, 0)]).unwrap();
        // sin mode has a node at x = 0
        let k = grid.wavenumber(2);
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((k * x[0]).sin(), 0.0)
        });
        psi.normalize().unwrap();
        let err = velocity_field(&psi, &free_h(), &ParticleConfiguration::new(vec![0.0], 0.0));
        assert!(matches!(err, Err(Error::NodeProximity { .. })));
    }

    #[test]
    fn stationary_state_gives_static_trajectory() {
        let grid = build_grid(1, 10.0, 256, &[(0, 0)]).unwrap();
        let width = 1.0 / (2.0f64).sqrt();
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / (4.0 * width * width)).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let h = HamiltonianParams::new(vec![1.0], PotentialSpec::Harmonic { omega: 1.0 });
        let config0 = ParticleConfiguration::new(vec![1.3], 0.0);
        // dt small enough that the O(dt^2) splitting phase stays below the
        // 1e-8 displacement budget
        let traj = integrate_trajectory(&psi, &h, &config0, 2e-4, 1.0).unwrap();
        assert!(matches!(traj.status, TrajectoryStatus::Completed));
        let x_end = traj.final_configuration().positions[0];
        assert!((x_end - 1.3).abs() < 1e-8, "drifted to {x_end}");
    }

    #[test]
    fn near_delta_sampling_stays_in_cell() {
        let grid = build_grid(1, 10.0, 256, &[(0, 0)]).unwrap();
        let x0 = 2.5;
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-(x[0] - x0).powi(2) / (4.0 * 1e-4)).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let ens = sample_equilibrium(&psi, 200, 9).unwrap();
        for m in &ens.members {
            assert!((m.positions[0] - x0).abs() <= grid.spacing());
        }
    }

    #[test]
    fn symmetric_sampling_has_centered_mean() {
        let grid = build_grid(1, 20.0, 256, &[(0, 0)]).unwrap();
        let a = 1.0;
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / (4.0 * a * a)).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let n = 10_000;
        let ens = sample_equilibrium(&psi, n, 123).unwrap();
        let mean: f64 = ens.members.iter().map(|m| m.positions[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * a / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let grid = build_grid(1, 10.0, 64, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / 4.0).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let a = sample_equilibrium(&psi, 50, 77).unwrap();
        let b = sample_equilibrium(&psi, 50, 77).unwrap();
        assert_eq!(a.members, b.members);
    }

    #[test]
    fn ensemble_of_one_matches_single_trajectory() {
        let grid = build_grid(1, 20.0, 128, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / 4.0).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let config0 = ParticleConfiguration::new(vec![0.9], 0.0);
        let traj = integrate_trajectory(&psi, &free_h(), &config0, 0.01, 0.5).unwrap();
        let ens = EquilibriumEnsemble {
            members: vec![config0],
            seed: 0,
            source_time: 0.0,
        };
        let run = evolve_ensemble(
            &psi,
            &free_h(),
            &ens,
            0.01,
            0.5,
            EnsembleOptions { sample_stride: 1 },
        )
        .unwrap();
        assert_eq!(
            traj.final_configuration().positions,
            run.trajectories[0].final_configuration().positions
        );
    }

    #[test]
    fn time_zero_snapshot_equals_input() {
        let grid = build_grid(1, 20.0, 128, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / 4.0).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let ens = sample_equilibrium(&psi, 20, 5).unwrap();
        let run = evolve_ensemble(
            &psi,
            &free_h(),
            &ens,
            0.01,
            0.1,
            EnsembleOptions::default(),
        )
        .unwrap();
        for (t, m) in run.trajectories.iter().zip(ens.members.iter()) {
            assert_eq!(t.samples[0], *m);
        }
    }
}
