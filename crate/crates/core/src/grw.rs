//! Spontaneous-localization dynamics: Poisson-timed collapses interleaved
//! with unitary Schroedinger evolution.
//!
//! Jumps arrive as a Poisson process of total rate N*lambda; each jump picks
//! a particle uniformly and multiplies the wave function by the square root
//! of a Gaussian localization operator of width sigma centered at a random
//! point x, distributed with density p(x) = ||L^{1/2} psi||^2. The state is
//! renormalized after every hit.

use std::io::Write;

use ndarray::ArrayD;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hamiltonian::HamiltonianParams;
use crate::propagator::Propagator;
use crate::rng;
use crate::wavefunction::WaveFunction;

/// Collapse rate and localization width, simulation units.
///
/// The conventional SI values are lambda ~ 1e-15 per second per particle and
/// sigma ~ 1e-7 m; desk-scale scenarios override lambda so that a run sees
/// tens of events, recording the SI values only for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseParams {
    /// Per-particle mean jump rate (1/time).
    pub lambda: f64,
    /// Localization width (length).
    pub sigma: f64,
}

impl CollapseParams {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "collapse rate must be positive, got {}",
                self.lambda
            )));
        }
        validate_sigma(self.sigma, grid)
    }
}

pub(crate) fn validate_sigma(sigma: f64, grid: &GridSpec) -> Result<()> {
    if !(sigma.is_finite() && sigma >= 2.0 * grid.spacing()) {
        return Err(Error::InvalidParameter(format!(
            "localization width {sigma} is not resolvable: need sigma >= 2 dx = {}",
            2.0 * grid.spacing()
        )));
    }
    Ok(())
}

/// One localization event. `time` is the scheduled jump time (applied at the
/// first step boundary at or after it); `center` has one coordinate per
/// spatial axis of the hit particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub time: f64,
    pub particle: usize,
    pub center: Vec<f64>,
    /// Norm right after multiplying by the localization root, before
    /// renormalization (sqrt of the center density at the drawn center).
    pub pre_norm: f64,
    /// Norm after renormalization.
    pub post_norm: f64,
}

/// Complete, time-ordered record of the localization events of one run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FlashHistory {
    pub events: Vec<CollapseEvent>,
    pub seed: u64,
    pub sigma: f64,
    pub lambda: Option<f64>,
}

impl FlashHistory {
    pub fn push(&mut self, event: CollapseEvent) -> Result<()> {
        if let Some(last) = self.events.last() {
            if event.time <= last.time {
                return Err(Error::InvalidParameter(format!(
                    "flash times must be strictly increasing ({} after {})",
                    event.time, last.time
                )));
            }
        }
        self.events.push(event);
        Ok(())
    }

    /// CSV with columns time, particle, center coordinates, pre/post norms.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.events.iter().map(|e| e.center.len()).max().unwrap_or(1);
        write!(w, "time,particle")?;
        for a in 0..d {
            write!(w, ",center_{a}")?;
        }
        writeln!(w, ",pre_norm,post_norm")?;
        for e in &self.events {
            write!(w, "{},{}", e.time, e.particle)?;
            for a in 0..d {
                match e.center.get(a) {
                    Some(c) => write!(w, ",{c}")?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w, ",{},{}", e.pre_norm, e.post_norm)?;
        }
        Ok(())
    }
}

/// Draw the Poisson jump schedule for `n_particles` at per-particle rate
/// `lambda` on `[0, t_final)`: exponential gaps at total rate N*lambda, with
/// the hit particle uniform per event. Reproducible from `seed` (stream
/// `"grw/schedule"`).
pub fn draw_jump_schedule(
    n_particles: usize,
    lambda: f64,
    t_final: f64,
    seed: u64,
) -> Result<Vec<(f64, usize)>> {
    if n_particles == 0 {
        return Err(Error::InvalidParameter("need at least one particle".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "jump rate must be positive, got {lambda}"
        )));
    }
    if t_final < 0.0 {
        return Err(Error::InvalidParameter("t_final must be >= 0".into()));
    }
    let mut rng = rng::stream(seed, "grw/schedule");
    Ok(draw_schedule_with(&mut rng, n_particles, lambda, t_final))
}

pub(crate) fn draw_schedule_with(
    rng: &mut ChaCha12Rng,
    n_particles: usize,
    lambda: f64,
    t_final: f64,
) -> Vec<(f64, usize)> {
    let rate = n_particles as f64 * lambda;
    let mut schedule = Vec::new();
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / rate;
        if !(t < t_final) {
            break;
        }
        let particle = rng.gen_range(0..n_particles);
        schedule.push((t, particle));
    }
    schedule
}

/// Density p(x) of collapse centers for a hit on `particle`: the particle's
/// marginal |psi|^2 convolved with the Gaussian of width `sigma`, evaluated
/// on the particle's spatial grid.
pub fn collapse_center_density(
    psi: &WaveFunction,
    particle: usize,
    sigma: f64,
) -> Result<ArrayD<f64>> {
    validate_sigma(sigma, &psi.grid)?;
    let marginal = psi.marginal_density(particle)?;
    let grid = &psi.grid;
    let m = grid.points();
    let dx = grid.spacing();
    // 1-D Gaussian kernel sampled on node offsets (zero padding outside the
    // box: amplitudes there are negligible by the boundary contract).
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt();
    let kernel: Vec<f64> = (0..m)
        .map(|j| {
            let d = j as f64 * dx;
            norm * (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    // Separable convolution along every axis of the marginal.
    let mut out = marginal;
    let ndim = out.ndim();
    for axis in 0..ndim {
        let mut next = ArrayD::<f64>::zeros(out.shape().to_vec());
        for (idx, v) in out.indexed_iter() {
            if *v == 0.0 {
                continue;
            }
            let i = idx[axis];
            let mut target = idx.clone();
            for j in 0..m {
                let gap = i.abs_diff(j);
                target[axis] = j;
                next[&target] += v * kernel[gap] * dx;
            }
        }
        out = next;
    }
    Ok(out)
}

/// Multiply `psi` in place by the square root of the localization operator
/// centered at `center` on `particle`'s axes, then renormalize. Returns
/// (pre-renormalization norm, post norm).
pub fn collapse_in_place(
    psi: &mut WaveFunction,
    particle: usize,
    center: &[f64],
    sigma: f64,
) -> Result<(f64, f64)> {
    validate_sigma(sigma, &psi.grid)?;
    let grid = psi.grid.clone();
    let axes = grid.axes_of(particle);
    if center.len() != axes.len() {
        return Err(Error::InvalidParameter(format!(
            "center has {} coordinates but particle {particle} owns {} axes",
            center.len(),
            axes.len()
        )));
    }
    for &c in center {
        if !grid.contains(c) {
            return Err(Error::OutOfDomain(format!("collapse center {c}")));
        }
    }
    let d = axes.len() as f64;
    let prefactor = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-d / 4.0);
    let inv_four_sigma2 = 1.0 / (4.0 * sigma * sigma);
    for (idx, a) in psi.amplitudes.indexed_iter_mut() {
        let mut r2 = 0.0;
        for (ci, &axis) in axes.iter().enumerate() {
            let dx = grid.coord(idx[axis]) - center[ci];
            r2 += dx * dx;
        }
        *a *= prefactor * (-r2 * inv_four_sigma2).exp();
    }
    let pre = psi.norm();
    if pre * pre < 1e-30 {
        return Err(Error::ImpossibleCenter { norm: pre });
    }
    psi.normalize()?;
    Ok((pre, psi.norm()))
}

/// Pure form of the collapse map.
pub fn apply_collapse(
    psi: &WaveFunction,
    particle: usize,
    center: &[f64],
    sigma: f64,
) -> Result<WaveFunction> {
    let mut out = psi.clone();
    collapse_in_place(&mut out, particle, center, sigma)?;
    Ok(out)
}

/// What the observer hook sees during a stochastic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunPhase {
    /// Before the first step.
    Initial,
    /// After a completed PDE step (`step` counts from 1).
    Stepped { step: usize },
    /// Immediately before applying the collapse with this schedule entry.
    PreCollapse { time: f64, particle: usize },
    /// Immediately after the collapse.
    PostCollapse { time: f64, particle: usize },
}

/// One entry of an explicit jump schedule (times relative to the run start).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledJump {
    pub time: f64,
    pub particle: usize,
    pub sigma: f64,
}

/// Run the full stochastic dynamics with an explicit jump schedule, each jump
/// applied at the first step boundary at or after its scheduled time. Centers
/// are drawn from `collapse_center_density` via `center_rng`. The observer is
/// called at every phase transition.
pub fn run_with_schedule(
    psi0: &WaveFunction,
    hamiltonian: &HamiltonianParams,
    sigma: f64,
    schedule: &[(f64, usize)],
    dt: f64,
    t_final: f64,
    center_rng: &mut ChaCha12Rng,
    observer: impl FnMut(RunPhase, &WaveFunction),
) -> Result<(WaveFunction, Vec<CollapseEvent>)> {
    let jumps: Vec<ScheduledJump> = schedule
        .iter()
        .map(|&(time, particle)| ScheduledJump {
            time,
            particle,
            sigma,
        })
        .collect();
    run_with_jumps(psi0, hamiltonian, &jumps, dt, t_final, center_rng, observer)
}

/// As [`run_with_schedule`] but with a per-jump localization width.
pub fn run_with_jumps(
    psi0: &WaveFunction,
    hamiltonian: &HamiltonianParams,
    schedule: &[ScheduledJump],
    dt: f64,
    t_final: f64,
    center_rng: &mut ChaCha12Rng,
    mut observer: impl FnMut(RunPhase, &WaveFunction),
) -> Result<(WaveFunction, Vec<CollapseEvent>)> {
    for jump in schedule {
        validate_sigma(jump.sigma, &psi0.grid)?;
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let n_steps = (t_final / dt).round() as usize;
    if ((n_steps as f64) * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "t_final = {t_final} is not a whole number of steps of dt = {dt}"
        )));
    }
    let mut order: Vec<ScheduledJump> = schedule.to_vec();
    order.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    if order.iter().any(|j| j.time < 0.0 || j.time > t_final) {
        return Err(Error::InvalidParameter(
            "scheduled jump outside the run window".into(),
        ));
    }

    let mut prop = Propagator::new(&psi0.grid, hamiltonian, dt)?;
    let mut psi = psi0.clone();
    let t0 = psi0.time;
    let mut events = Vec::with_capacity(order.len());
    let mut next_event = 0;
    observer(RunPhase::Initial, &psi);

    for step in 0..=n_steps {
        let boundary = step as f64 * dt;
        while next_event < order.len() && order[next_event].time <= boundary + 1e-9 * dt {
            let jump = order[next_event];
            observer(
                RunPhase::PreCollapse {
                    time: jump.time,
                    particle: jump.particle,
                },
                &psi,
            );
            let density = collapse_center_density(&psi, jump.particle, jump.sigma)?;
            let center = draw_center(&psi.grid, &density, center_rng);
            let (pre, post) = collapse_in_place(&mut psi, jump.particle, &center, jump.sigma)?;
            events.push(CollapseEvent {
                time: t0 + jump.time,
                particle: jump.particle,
                center,
                pre_norm: pre,
                post_norm: post,
            });
            observer(
                RunPhase::PostCollapse {
                    time: jump.time,
                    particle: jump.particle,
                },
                &psi,
            );
            next_event += 1;
        }
        if step < n_steps {
            prop.step(&mut psi)?;
            observer(RunPhase::Stepped { step: step + 1 }, &psi);
        }
    }
    Ok((psi, events))
}

fn draw_center(grid: &GridSpec, density: &ArrayD<f64>, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let d = density.ndim();
    let dv = grid.spacing().powi(d as i32);
    let total: f64 = density.iter().sum::<f64>() * dv;
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut flat = 0usize;
    for (i, v) in density.iter().enumerate() {
        acc += v * dv;
        flat = i;
        if acc > u {
            break;
        }
    }
    let shape = density.shape();
    let mut center = vec![0.0; d];
    let mut rem = flat;
    for a in (0..d).rev() {
        center[a] = grid.coord(rem % shape[a]);
        rem /= shape[a];
    }
    center
}

/// Full stochastic run: draw the jump schedule from `seed`, interleave
/// Schroedinger steps and collapses, and return the final state with the
/// complete flash record. Deterministic per seed.
pub fn run_grw(
    psi0: &WaveFunction,
    hamiltonian: &HamiltonianParams,
    params: &CollapseParams,
    dt: f64,
    t_final: f64,
    seed: u64,
) -> Result<(WaveFunction, FlashHistory)> {
    params.validate(&psi0.grid)?;
    let schedule = draw_jump_schedule(
        psi0.grid.particle_count(),
        params.lambda,
        t_final,
        seed,
    )?;
    let mut center_rng = rng::stream(seed, "grw/centers");
    let (psi, events) = run_with_schedule(
        psi0,
        hamiltonian,
        params.sigma,
        &schedule,
        dt,
        t_final,
        &mut center_rng,
        |_, _| {},
    )?;
    Ok((
        psi,
        FlashHistory {
            events,
            seed,
            sigma: params.sigma,
            lambda: Some(params.lambda),
        },
    ))
}

/// Probability mass outside the ball of `radius` around `center` (a full
/// configuration-space point). Boundary cells are split exactly in one
/// dimension; in higher dimensions cells count by their centers.
pub fn tail_mass(psi: &WaveFunction, center: &[f64], radius: f64) -> Result<f64> {
    let grid = &psi.grid;
    if center.len() != grid.dims() {
        return Err(Error::InvalidParameter(format!(
            "center has {} coordinates for a {}-axis grid",
            center.len(),
            grid.dims()
        )));
    }
    if radius <= 0.0 {
        return Ok(1.0_f64.min(psi.norm().powi(2)));
    }
    let dens = psi.probability_density();
    let dv = grid.cell_volume();
    let dx = grid.spacing();
    let mut mass = 0.0;
    if grid.dims() == 1 {
        let c = center[0];
        for (idx, v) in dens.indexed_iter() {
            let x = grid.coord(idx[0]);
            let lo = x - 0.5 * dx;
            let hi = x + 0.5 * dx;
            let inside = (hi.min(c + radius) - lo.max(c - radius)).max(0.0);
            mass += v * dv * (1.0 - inside / dx);
        }
    } else {
        let r2 = radius * radius;
        for (idx, v) in dens.indexed_iter() {
            let mut d2 = 0.0;
            for a in 0..grid.dims() {
                let dxa = grid.coord(idx[a]) - center[a];
                d2 += dxa * dxa;
            }
            if d2 > r2 {
                mass += v * dv;
            }
        }
    }
    Ok(mass.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::hamiltonian::PotentialSpec;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn uniform_psi(points: usize, extent: f64) -> WaveFunction {
        let grid = build_grid(1, extent, points, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid, 0.0, |_| Complex64::new(1.0, 0.0));
        psi.normalize().unwrap();
        psi
    }

    #[test]
    fn empty_schedule_for_zero_horizon() {
        assert!(draw_jump_schedule(3, 1.0, 0.0, 1).unwrap().is_empty());
    }

    #[test]
    fn astronomical_rate_never_fires_at_lab_scale() {
        // lambda ~ 1e-15 per second: no events over any laboratory horizon
        let sched = draw_jump_schedule(1, 1e-15, 1e6, 42).unwrap();
        assert!(sched.is_empty());
    }

    #[test]
    fn schedule_is_reproducible_and_ordered() {
        let a = draw_jump_schedule(4, 2.0, 10.0, 9).unwrap();
        let b = draw_jump_schedule(4, 2.0, 10.0, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(a.iter().all(|&(t, p)| t > 0.0 && t < 10.0 && p < 4));
        // rough rate sanity: N*lambda*T = 80
        assert!((a.len() as f64 - 80.0).abs() < 4.0 * 80.0f64.sqrt());
    }

    #[test]
    fn center_density_of_even_state_is_even() {
        let grid = build_grid(1, 10.0, 128, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let p = collapse_center_density(&psi, 0, 0.5).unwrap();
        let m = grid.points();
        // node i and node m - i sit at +/- the same coordinate (node 0 has no mirror)
        for i in 1..m {
            assert_abs_diff_eq!(p[[i]], p[[m - i]], epsilon = 1e-10);
        }
        let total: f64 = p.iter().sum::<f64>() * grid.spacing();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn unresolvable_sigma_rejected() {
        let psi = uniform_psi(64, 10.0);
        let dx = psi.grid.spacing();
        assert!(collapse_center_density(&psi, 0, dx).is_err());
        assert!(apply_collapse(&psi, 0, &[0.0], 1.9 * dx).is_err());
    }

    #[test]
    fn collapsed_uniform_state_is_gaussian() {
        let psi = uniform_psi(512, 16.0);
        let sigma = 0.5;
        let x0 = 1.0;
        let out = apply_collapse(&psi, 0, &[x0], sigma).unwrap();
        assert_abs_diff_eq!(out.norm(), 1.0, epsilon = 1e-12);
        let dens = out.probability_density();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt();
        for (idx, v) in dens.indexed_iter() {
            let x = out.grid.coord(idx[0]);
            let expected = norm * (-(x - x0) * (x - x0) / (2.0 * sigma * sigma)).exp();
            assert!((v - expected).abs() < 1e-8, "at x={x}: {v} vs {expected}");
        }
    }

    #[test]
    fn repeated_collapse_narrows_by_sqrt2_and_restores_norm() {
        let psi = uniform_psi(512, 16.0);
        let sigma = 0.6;
        let once = apply_collapse(&psi, 0, &[0.0], sigma).unwrap();
        let twice = apply_collapse(&once, 0, &[0.0], sigma).unwrap();
        assert_abs_diff_eq!(twice.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(once.position_spread(0), sigma, epsilon = 1e-6);
        assert_abs_diff_eq!(
            twice.position_spread(0),
            sigma / 2.0f64.sqrt(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn tail_mass_extremes() {
        let psi = uniform_psi(256, 10.0);
        let collapsed = apply_collapse(&psi, 0, &[0.0], 0.5).unwrap();
        assert_abs_diff_eq!(
            tail_mass(&collapsed, &[0.0], 0.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let beyond = tail_mass(&collapsed, &[0.0], 10.0).unwrap();
        assert!(beyond < 1e-8, "tail beyond the grid: {beyond}");
    }

    #[test]
    fn no_jumps_reduces_to_pure_schrodinger() {
        let grid = build_grid(1, 10.0, 128, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid.clone(), 0.0, |x| {
            Complex64::new((-x[0] * x[0] / 4.0).exp(), 0.0)
        });
        psi.normalize().unwrap();
        let h = HamiltonianParams::new(vec![1.0], PotentialSpec::Harmonic { omega: 1.0 });
        let mut center_rng = rng::stream(0, "grw/centers");
        let (out, events) = run_with_schedule(
            &psi,
            &h,
            0.5,
            &[],
            0.001,
            0.5,
            &mut center_rng,
            |_, _| {},
        )
        .unwrap();
        assert!(events.is_empty());
        let pure = crate::propagator::evolve_schrodinger(&psi, &h, 0.001, 500).unwrap();
        assert_eq!(out.amplitudes, pure.amplitudes);
    }

    #[test]
    fn flash_history_rejects_out_of_order_events() {
        let mut h = FlashHistory::default();
        let ev = |t: f64| CollapseEvent {
            time: t,
            particle: 0,
            center: vec![0.0],
            pre_norm: 1.0,
            post_norm: 1.0,
        };
        h.push(ev(1.0)).unwrap();
        assert!(h.push(ev(0.5)).is_err());
        assert!(h.push(ev(1.0)).is_err());
        h.push(ev(2.0)).unwrap();
    }
}
