//! Discretized configuration space.
//!
//! The grid is a `dims`-dimensional cube `[-L, L)^dims` sampled at `points`
//! equidistant nodes per axis, `x_i = -L + i * spacing`. Each grid axis is
//! owned by exactly one (particle, spatial axis) pair, so the same machinery
//! covers one particle in up to three spatial dimensions or several particles
//! in one dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of one grid axis to a particle's spatial axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisOwner {
    /// Particle index, starting at 0.
    pub particle: usize,
    /// Spatial axis within that particle (0 = x, 1 = y, 2 = z).
    pub axis: usize,
}

/// Validated description of the configuration-space grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dims: usize,
    extent: f64,
    points: usize,
    spacing: f64,
    layout: Vec<AxisOwner>,
}

/// Maximum number of grid axes; memory grows as `points^dims`.
pub const MAX_DIMS: usize = 3;

/// Minimum number of points per axis for the spectral scheme.
pub const MIN_POINTS: usize = 16;

impl GridSpec {
    /// Validate and build a grid (`dims` axes, half-width `extent`, `points`
    /// nodes per axis, `layout[i]` = owner of grid axis `i`).
    pub fn build(dims: usize, extent: f64, points: usize, layout: &[AxisOwner]) -> Result<Self> {
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::Grid(format!(
                "dims must be between 1 and {MAX_DIMS}, got {dims}"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Grid(format!("extent must be positive, got {extent}")));
        }
        if points < MIN_POINTS || !points.is_power_of_two() {
            return Err(Error::Grid(format!(
                "points must be a power of two >= {MIN_POINTS}, got {points}"
            )));
        }
        if layout.len() != dims {
            return Err(Error::Grid(format!(
                "layout assigns {} axes but the grid has {dims}",
                layout.len()
            )));
        }
        let mut seen = Vec::new();
        for owner in layout {
            if seen.contains(&(owner.particle, owner.axis)) {
                return Err(Error::Grid(format!(
                    "duplicate layout entry for particle {} axis {}",
                    owner.particle, owner.axis
                )));
            }
            seen.push((owner.particle, owner.axis));
        }
        let particles = layout.iter().map(|o| o.particle).max().unwrap() + 1;
        for p in 0..particles {
            if !layout.iter().any(|o| o.particle == p) {
                return Err(Error::Grid(format!("particle {p} owns no grid axis")));
            }
        }
        let spacing = 2.0 * extent / points as f64;
        Ok(Self {
            dims,
            extent,
            points,
            spacing,
            layout: layout.to_vec(),
        })
    }

    /// Convenience layout: `counts[k]` spatial axes for particle `k`, assigned
    /// to grid axes in order.
    pub fn layout_from_counts(counts: &[usize]) -> Vec<AxisOwner> {
        let mut layout = Vec::new();
        for (particle, &n) in counts.iter().enumerate() {
            for axis in 0..n {
                layout.push(AxisOwner { particle, axis });
            }
        }
        layout
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn layout(&self) -> &[AxisOwner] {
        &self.layout
    }

    pub fn particle_count(&self) -> usize {
        self.layout.iter().map(|o| o.particle).max().unwrap() + 1
    }

    /// Grid axes owned by `particle`, in spatial-axis order.
    pub fn axes_of(&self, particle: usize) -> Vec<usize> {
        let mut axes: Vec<(usize, usize)> = self
            .layout
            .iter()
            .enumerate()
            .filter(|(_, o)| o.particle == particle)
            .map(|(i, o)| (o.axis, i))
            .collect();
        axes.sort_unstable();
        axes.into_iter().map(|(_, i)| i).collect()
    }

    /// Coordinate of node `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing
    }

    /// All node coordinates along one axis.
    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Angular wavenumber of FFT bin `j` (signed convention, Nyquist positive).
    pub fn wavenumber(&self, j: usize) -> f64 {
        let m = self.points;
        let idx = if j <= m / 2 {
            j as isize
        } else {
            j as isize - m as isize
        };
        2.0 * std::f64::consts::PI * idx as f64 / (m as f64 * self.spacing)
    }

    /// Shape of the amplitude array.
    pub fn shape(&self) -> Vec<usize> {
        vec![self.points; self.dims]
    }

    pub fn total_points(&self) -> usize {
        self.points.pow(self.dims as u32)
    }

    /// Volume element dV = spacing^dims.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dims as i32)
    }

    /// Wrap a coordinate into `[-L, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let span = 2.0 * self.extent;
        let mut y = (x + self.extent).rem_euclid(span) - self.extent;
        if y >= self.extent {
            y -= span;
        }
        y
    }

    pub fn contains(&self, x: f64) -> bool {
        (-self.extent..self.extent).contains(&x)
    }

    /// The physical-space grid shared by all particles, if every particle owns
    /// the same number of axes (all axes share extent and points by
    /// construction).
    pub fn physical_grid(&self) -> Result<GridSpec> {
        let particles = self.particle_count();
        let d = self.axes_of(0).len();
        for p in 1..particles {
            if self.axes_of(p).len() != d {
                return Err(Error::Grid(format!(
                    "particle {p} has a different spatial dimensionality than particle 0"
                )));
            }
        }
        GridSpec::build(
            d,
            self.extent,
            self.points,
            &GridSpec::layout_from_counts(&[d]),
        )
    }
}

/// Build a validated grid; `layout[i] = (particle, spatial axis)` per grid axis.
pub fn build_grid(
    dims: usize,
    extent: f64,
    points: usize,
    layout: &[(usize, usize)],
) -> Result<GridSpec> {
    let owners: Vec<AxisOwner> = layout
        .iter()
        .map(|&(particle, axis)| AxisOwner { particle, axis })
        .collect();
    GridSpec::build(dims, extent, points, &owners)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_exact() {
        let g = build_grid(1, 20.0, 256, &[(0, 0)]).unwrap();
        assert_eq!(g.spacing(), 0.15625);
        assert_eq!(g.spacing() * g.points() as f64, 2.0 * g.extent());
    }

    #[test]
    fn two_particles_in_one_dimension() {
        let g = build_grid(2, 10.0, 128, &[(0, 0), (1, 0)]).unwrap();
        assert_eq!(g.particle_count(), 2);
        assert_eq!(g.axes_of(0), vec![0]);
        assert_eq!(g.axes_of(1), vec![1]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(build_grid(1, 20.0, 100, &[(0, 0)]).is_err());
    }

    #[test]
    fn rejects_excess_dims_and_bad_layout() {
        assert!(build_grid(4, 10.0, 64, &[(0, 0), (0, 1), (0, 2), (0, 3)]).is_err());
        // duplicate owner
        assert!(build_grid(2, 10.0, 64, &[(0, 0), (0, 0)]).is_err());
        // particle 0 owns nothing
        assert!(build_grid(1, 10.0, 64, &[(1, 0)]).is_err());
    }

    #[test]
    fn wavenumbers_cover_signed_spectrum() {
        let g = build_grid(1, 1.0, 16, &[(0, 0)]).unwrap();
        assert_eq!(g.wavenumber(0), 0.0);
        assert!(g.wavenumber(1) > 0.0);
        assert!(g.wavenumber(15) < 0.0);
        assert!((g.wavenumber(1) + g.wavenumber(15)).abs() < 1e-12);
    }

    #[test]
    fn wrap_is_periodic() {
        let g = build_grid(1, 2.0, 16, &[(0, 0)]).unwrap();
        assert!((g.wrap(2.5) - (-1.5)).abs() < 1e-12);
        assert!((g.wrap(-2.5) - 1.5).abs() < 1e-12);
        assert_eq!(g.wrap(1.0), 1.0);
    }
}
