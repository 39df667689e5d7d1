//! Periodic Catmull-Rom interpolation of grid fields at off-grid points.

use ndarray::ArrayD;
use num_complex::Complex64;

use crate::grid::GridSpec;

/// Per-axis stencil: four wrapped node indices and their cubic weights.
#[derive(Clone, Copy)]
struct AxisStencil {
    idx: [usize; 4],
    w: [f64; 4],
}

fn axis_stencil(grid: &GridSpec, x: f64) -> AxisStencil {
    let m = grid.points();
    let u = (grid.wrap(x) + grid.extent()) / grid.spacing();
    let i0 = u.floor();
    let t = u - i0;
    let base = i0 as isize;
    let wrap = |j: isize| -> usize { j.rem_euclid(m as isize) as usize };
    let t2 = t * t;
    let t3 = t2 * t;
    AxisStencil {
        idx: [wrap(base - 1), wrap(base), wrap(base + 1), wrap(base + 2)],
        w: [
            -0.5 * t3 + t2 - 0.5 * t,
            1.5 * t3 - 2.5 * t2 + 1.0,
            -1.5 * t3 + 2.0 * t2 + 0.5 * t,
            0.5 * t3 - 0.5 * t2,
        ],
    }
}

/// Interpolate several fields at one configuration-space point, writing one
/// value per field into `out`. All fields share `grid`'s shape.
pub(crate) fn interpolate_fields(
    grid: &GridSpec,
    fields: &[&ArrayD<Complex64>],
    point: &[f64],
    out: &mut [Complex64],
) {
    debug_assert_eq!(point.len(), grid.dims());
    debug_assert_eq!(fields.len(), out.len());
    out.fill(Complex64::default());
    match grid.dims() {
        1 => {
            let s = axis_stencil(grid, point[0]);
            for (f, o) in fields.iter().zip(out.iter_mut()) {
                for t in 0..4 {
                    *o += s.w[t] * f[[s.idx[t]]];
                }
            }
        }
        2 => {
            let s0 = axis_stencil(grid, point[0]);
            let s1 = axis_stencil(grid, point[1]);
            for (f, o) in fields.iter().zip(out.iter_mut()) {
                for a in 0..4 {
                    let mut row = Complex64::default();
                    for b in 0..4 {
                        row += s1.w[b] * f[[s0.idx[a], s1.idx[b]]];
                    }
                    *o += s0.w[a] * row;
                }
            }
        }
        3 => {
            let s0 = axis_stencil(grid, point[0]);
            let s1 = axis_stencil(grid, point[1]);
            let s2 = axis_stencil(grid, point[2]);
            for (f, o) in fields.iter().zip(out.iter_mut()) {
                for a in 0..4 {
                    let mut plane = Complex64::default();
                    for b in 0..4 {
                        let mut row = Complex64::default();
                        for c in 0..4 {
                            row += s2.w[c] * f[[s0.idx[a], s1.idx[b], s2.idx[c]]];
                        }
                        plane += s1.w[b] * row;
                    }
                    *o += s0.w[a] * plane;
                }
            }
        }
        _ => unreachable!("grid dims capped at 3"),
    }
}
