//! Hamiltonian parameters: per-particle masses and the external potential.
//!
//! H = sum_k -1/(2 m_k) laplacian_k + V(x_1..x_N), hbar = 1.

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Analytic potential evaluated on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// V = 0.
    Free,
    /// V = 1/2 sum_k m_k omega^2 |x_k|^2.
    Harmonic { omega: f64 },
    /// Quartic double well along every axis: V = barrier * ((2x/separation)^2 - 1)^2.
    DoubleWell { barrier: f64, separation: f64 },
    /// Flat box of the given width centered at 0 with soft walls of the given height.
    BoxWalls { width: f64, height: f64 },
    /// Measurement coupling V = strength * tanh(x_sys / switch_width) * x_ptr,
    /// active only for t in [window.0, window.1). Grid axis 0 is the measured
    /// system coordinate, axis 1 the pointer coordinate.
    PointerCoupling {
        strength: f64,
        window: (f64, f64),
        switch_width: f64,
    },
}

impl PotentialSpec {
    /// Validate parameter ranges; `grid` supplies the dimensional context.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        match *self {
            PotentialSpec::Free => Ok(()),
            PotentialSpec::Harmonic { omega } => {
                if omega > 0.0 && omega.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "harmonic omega must be positive, got {omega}"
                    )))
                }
            }
            PotentialSpec::DoubleWell { barrier, separation } => {
                if barrier > 0.0 && separation > 0.0 && separation < 2.0 * grid.extent() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "double well needs barrier > 0 and 0 < separation < 2L".into(),
                    ))
                }
            }
            PotentialSpec::BoxWalls { width, height } => {
                if width > 0.0 && width < 2.0 * grid.extent() && height > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "box walls need 0 < width < 2L and height > 0".into(),
                    ))
                }
            }
            PotentialSpec::PointerCoupling {
                strength,
                window,
                switch_width,
            } => {
                if grid.dims() != 2 {
                    return Err(Error::InvalidParameter(
                        "pointer coupling requires a two-axis grid (system x pointer)".into(),
                    ));
                }
                if strength <= 0.0 || switch_width <= 0.0 || window.1 <= window.0 {
                    return Err(Error::InvalidParameter(
                        "pointer coupling needs strength > 0, switch_width > 0 and a nonempty window"
                            .into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Times at which the potential changes; evaluation is constant between
    /// consecutive boundaries.
    pub fn time_boundaries(&self) -> Vec<f64> {
        match *self {
            PotentialSpec::PointerCoupling { window, .. } => vec![window.0, window.1],
            _ => Vec::new(),
        }
    }

    /// Index of the piecewise-constant segment containing time `t`.
    pub fn segment(&self, t: f64) -> usize {
        self.time_boundaries().iter().filter(|&&b| t >= b).count()
    }

    /// Evaluate the potential on the grid at time `t`.
    pub fn evaluate(&self, grid: &GridSpec, masses: &[f64], t: f64) -> ArrayD<f64> {
        let shape = grid.shape();
        match *self {
            PotentialSpec::Free => ArrayD::zeros(shape),
            PotentialSpec::Harmonic { omega } => ArrayD::from_shape_fn(shape, |idx| {
                let mut v = 0.0;
                for (a, owner) in grid.layout().iter().enumerate() {
                    let x = grid.coord(idx[a]);
                    v += 0.5 * masses[owner.particle] * omega * omega * x * x;
                }
                v
            }),
            PotentialSpec::DoubleWell { barrier, separation } => {
                ArrayD::from_shape_fn(shape, |idx| {
                    let mut v = 0.0;
                    for a in 0..grid.dims() {
                        let u = 2.0 * grid.coord(idx[a]) / separation;
                        let q = u * u - 1.0;
                        v += barrier * q * q;
                    }
                    v
                })
            }
            PotentialSpec::BoxWalls { width, height } => ArrayD::from_shape_fn(shape, |idx| {
                let mut v = 0.0;
                for a in 0..grid.dims() {
                    if grid.coord(idx[a]).abs() > width / 2.0 {
                        v += height;
                    }
                }
                v
            }),
            PotentialSpec::PointerCoupling {
                strength,
                window,
                switch_width,
            } => {
                if t >= window.0 && t < window.1 {
                    ArrayD::from_shape_fn(shape, |idx| {
                        let xs = grid.coord(idx[0]);
                        let xp = grid.coord(idx[1]);
                        strength * (xs / switch_width).tanh() * xp
                    })
                } else {
                    ArrayD::zeros(shape)
                }
            }
        }
    }
}

/// Masses and potential defining the Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    /// Per-particle masses, natural units.
    pub masses: Vec<f64>,
    pub potential: PotentialSpec,
}

impl HamiltonianParams {
    pub fn new(masses: Vec<f64>, potential: PotentialSpec) -> Self {
        Self { masses, potential }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.masses.len() != grid.particle_count() {
            return Err(Error::InvalidParameter(format!(
                "{} masses given for {} particles",
                self.masses.len(),
                grid.particle_count()
            )));
        }
        if self.masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter("all masses must be positive".into()));
        }
        self.potential.validate(grid)?;
        let v = self.potential.evaluate(grid, &self.masses, 0.0);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "potential evaluation".into(),
            });
        }
        Ok(())
    }

    /// Mass attached to a grid axis (the mass of the particle owning it).
    pub fn axis_mass(&self, grid: &GridSpec, axis: usize) -> f64 {
        self.masses[grid.layout()[axis].particle]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn harmonic_potential_on_grid() {
        let grid = build_grid(1, 5.0, 32, &[(0, 0)]).unwrap();
        let h = HamiltonianParams::new(vec![2.0], PotentialSpec::Harmonic { omega: 3.0 });
        h.validate(&grid).unwrap();
        let v = h.potential.evaluate(&grid, &h.masses, 0.0);
        let x = grid.coord(5);
        assert!((v[[5]] - 0.5 * 2.0 * 9.0 * x * x).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_mass() {
        let grid = build_grid(1, 5.0, 32, &[(0, 0)]).unwrap();
        let h = HamiltonianParams::new(vec![0.0], PotentialSpec::Free);
        assert!(h.validate(&grid).is_err());
    }

    #[test]
    fn pointer_coupling_needs_two_axes() {
        let grid = build_grid(1, 5.0, 32, &[(0, 0)]).unwrap();
        let pot = PotentialSpec::PointerCoupling {
            strength: 1.0,
            window: (0.0, 1.0),
            switch_width: 0.2,
        };
        assert!(pot.validate(&grid).is_err());
    }

    #[test]
    fn coupling_window_segments() {
        let pot = PotentialSpec::PointerCoupling {
            strength: 1.0,
            window: (0.5, 1.5),
            switch_width: 0.2,
        };
        assert_eq!(pot.segment(0.0), 0);
        assert_eq!(pot.segment(0.5), 1);
        assert_eq!(pot.segment(1.49), 1);
        assert_eq!(pot.segment(1.5), 2);
        let grid = build_grid(2, 5.0, 32, &[(0, 0), (1, 0)]).unwrap();
        let v_in = pot.evaluate(&grid, &[1.0, 1.0], 1.0);
        let v_out = pot.evaluate(&grid, &[1.0, 1.0], 2.0);
        assert!(v_in.iter().any(|&x| x != 0.0));
        assert!(v_out.iter().all(|&x| x == 0.0));
    }
}
