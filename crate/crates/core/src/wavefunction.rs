//! Complex amplitudes on the configuration-space grid.

use ndarray::{ArrayD, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A wave function sampled on a [`GridSpec`], with its simulation time.
///
/// Natural units with hbar = 1 throughout.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    pub grid: GridSpec,
    pub amplitudes: ArrayD<Complex64>,
    pub time: f64,
}

impl WaveFunction {
    pub fn new(grid: GridSpec, amplitudes: ArrayD<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.shape() != grid.shape().as_slice() {
            return Err(Error::Grid(format!(
                "amplitude shape {:?} does not match grid shape {:?}",
                amplitudes.shape(),
                grid.shape()
            )));
        }
        Ok(Self {
            grid,
            amplitudes,
            time,
        })
    }

    /// Build from a function of the node coordinates (one per grid axis).
    pub fn from_fn(grid: GridSpec, time: f64, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let shape = grid.shape();
        let mut coords = vec![0.0; grid.dims()];
        let amplitudes = ArrayD::from_shape_fn(shape, |idx| {
            for (a, c) in coords.iter_mut().enumerate() {
                *c = grid.coord(idx[a]);
            }
            f(&coords)
        });
        Self {
            grid,
            amplitudes,
            time,
        }
    }

    /// L2 norm, sqrt(sum |psi|^2 dV).
    pub fn norm(&self) -> f64 {
        let s: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Scale to unit norm; returns the prior norm.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !n.is_finite() {
            return Err(Error::NonFinite {
                context: "normalize".into(),
            });
        }
        if n < 1e-150 {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / n;
        self.amplitudes.mapv_inplace(|a| a * inv);
        Ok(n)
    }

    /// Pointwise |psi|^2.
    pub fn probability_density(&self) -> ArrayD<f64> {
        self.amplitudes.mapv(|a| a.norm_sqr())
    }

    /// |psi|^2 integrated over every axis not owned by `particle`.
    ///
    /// The result lives on that particle's spatial axes (in spatial-axis
    /// order) and integrates to the wave function's squared norm.
    pub fn marginal_density(&self, particle: usize) -> Result<ArrayD<f64>> {
        if particle >= self.grid.particle_count() {
            return Err(Error::InvalidParameter(format!(
                "particle index {particle} out of range (grid has {})",
                self.grid.particle_count()
            )));
        }
        let keep = self.grid.axes_of(particle);
        let mut dens = self.probability_density();
        // Sum out non-kept axes from the highest index down so positions stay valid.
        let mut removed = 0usize;
        for axis in (0..self.grid.dims()).rev() {
            if !keep.contains(&axis) {
                dens = dens.sum_axis(Axis(axis));
                removed += 1;
            }
        }
        let dv = self.grid.spacing().powi(removed as i32);
        dens.mapv_inplace(|v| v * dv);
        // Reorder so the result's axes follow the particle's spatial-axis order.
        let kept_sorted: Vec<usize> = {
            let mut k = keep.clone();
            k.sort_unstable();
            k
        };
        if kept_sorted != keep {
            let perm: Vec<usize> = keep
                .iter()
                .map(|g| kept_sorted.iter().position(|s| s == g).unwrap())
                .collect();
            dens = dens.permuted_axes(perm).as_standard_layout().to_owned();
        }
        Ok(dens)
    }

    /// Mean of the coordinate along one grid axis under |psi|^2.
    pub fn mean_position(&self, axis: usize) -> f64 {
        let dens = self.probability_density();
        let dv = self.grid.cell_volume();
        let mut mean = 0.0;
        for (idx, v) in dens.indexed_iter() {
            mean += self.grid.coord(idx[axis]) * v;
        }
        mean * dv
    }

    /// Standard deviation of the coordinate along one grid axis under |psi|^2.
    pub fn position_spread(&self, axis: usize) -> f64 {
        let dens = self.probability_density();
        let dv = self.grid.cell_volume();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (idx, v) in dens.indexed_iter() {
            let x = self.grid.coord(idx[axis]);
            m1 += x * v;
            m2 += x * x * v;
        }
        m1 *= dv;
        m2 *= dv;
        (m2 - m1 * m1).max(0.0).sqrt()
    }

    /// Total |psi|^2 mass in grid cells lying on the boundary faces.
    pub fn boundary_mass(&self) -> f64 {
        let dens = self.probability_density();
        let m = self.grid.points();
        let dv = self.grid.cell_volume();
        let mut s = 0.0;
        for (idx, v) in dens.indexed_iter() {
            if (0..self.grid.dims()).any(|a| idx[a] == 0 || idx[a] == m - 1) {
                s += v;
            }
        }
        s * dv
    }
}
