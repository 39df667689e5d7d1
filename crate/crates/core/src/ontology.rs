//! Primitive-variable extraction: the mass-density field on physical space,
//! density time series with collapse-bracketing frames, the delocation
//! diagnostic, and validated flash records.

use std::io::{Read, Write};

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::grw::{CollapseEvent, FlashHistory};
use crate::wavefunction::WaveFunction;

/// Mass-weighted density on physical space at one instant:
/// m(x) = sum_k m_k * marginal_k(x). Integrates to the total mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatterDensityField {
    /// Physical-space grid (single-particle axes).
    pub grid: GridSpec,
    pub values: ArrayD<f64>,
    pub time: f64,
}

impl MatterDensityField {
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// CSV rows of grid coordinates and the density value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.grid.dims();
        for a in 0..d {
            write!(w, "x{a},")?;
        }
        writeln!(w, "value")?;
        for (idx, v) in self.values.indexed_iter() {
            for a in 0..d {
                write!(w, "{},", self.grid.coord(idx[a]))?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    /// Compact binary layout, little-endian:
    /// `[u32 dims][u32 points][f64 spacing][f64 time][f64 values...]`
    /// with `points^dims` values in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.grid.dims() as u32).to_le_bytes())?;
        w.write_all(&(self.grid.points() as u32).to_le_bytes())?;
        w.write_all(&self.grid.spacing().to_le_bytes())?;
        w.write_all(&self.time.to_le_bytes())?;
        for v in self.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut u32buf = [0u8; 4];
        let mut f64buf = [0u8; 8];
        r.read_exact(&mut u32buf)?;
        let dims = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let points = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut f64buf)?;
        let spacing = f64::from_le_bytes(f64buf);
        r.read_exact(&mut f64buf)?;
        let time = f64::from_le_bytes(f64buf);
        let extent = spacing * points as f64 / 2.0;
        let grid = GridSpec::build(
            dims,
            extent,
            points,
            &GridSpec::layout_from_counts(&[dims]),
        )?;
        let n = grid.total_points();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut f64buf)?;
            values.push(f64::from_le_bytes(f64buf));
        }
        let values = ArrayD::from_shape_vec(grid.shape(), values)
            .map_err(|e| Error::Grid(e.to_string()))?;
        Ok(Self { grid, values, time })
    }
}

/// Extract the matter density field from a wave function.
///
/// All particles must share the same per-particle spatial grid; the result
/// lives on that shared physical space.
pub fn matter_density(psi: &WaveFunction, masses: &[f64]) -> Result<MatterDensityField> {
    let grid = &psi.grid;
    if masses.len() != grid.particle_count() {
        return Err(Error::InvalidParameter(format!(
            "{} masses for {} particles",
            masses.len(),
            grid.particle_count()
        )));
    }
    if masses.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidParameter("masses must be positive".into()));
    }
    let physical = grid.physical_grid()?;
    let mut values = ArrayD::<f64>::zeros(physical.shape());
    for (k, &mk) in masses.iter().enumerate() {
        let marg = psi.marginal_density(k)?;
        values.zip_mut_with(&marg, |v, m| *v += mk * m);
    }
    Ok(MatterDensityField {
        grid: physical,
        values,
        time: psi.time,
    })
}

/// Integrals of the field on either side of `boundary` along axis 0, with the
/// straddling cell split exactly. Returns (left, right); the two sum to the
/// total mass.
pub fn half_space_mass(field: &MatterDensityField, boundary: f64) -> (f64, f64) {
    let grid = &field.grid;
    let dx = grid.spacing();
    let dv = grid.cell_volume();
    let (mut left, mut right) = (0.0, 0.0);
    for (idx, v) in field.values.indexed_iter() {
        let x = grid.coord(idx[0]);
        let lo = x - 0.5 * dx;
        let hi = x + 0.5 * dx;
        let mass = v * dv;
        if hi <= boundary {
            left += mass;
        } else if lo >= boundary {
            right += mass;
        } else {
            let frac_left = (boundary - lo) / dx;
            left += mass * frac_left;
            right += mass * (1.0 - frac_left);
        }
    }
    (left, right)
}

/// Role of a stored frame relative to collapse events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    Regular,
    PreCollapse,
    PostCollapse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityFrame {
    pub kind: FrameKind,
    pub field: MatterDensityField,
}

/// Time-ordered matter-density frames; the recorder forces a pre and a post
/// frame at every collapse so mass transfer is bracketed exactly.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DensityTimeSeries {
    pub frames: Vec<DensityFrame>,
    /// Nominal spacing between regular frames.
    pub frame_interval: f64,
}

impl DensityTimeSeries {
    pub fn push(&mut self, kind: FrameKind, field: MatterDensityField) -> Result<()> {
        if let Some(last) = self.frames.last() {
            if field.time < last.field.time - 1e-12 {
                return Err(Error::InvalidParameter(
                    "density frames must be time-ordered".into(),
                ));
            }
        }
        self.frames.push(DensityFrame { kind, field });
        Ok(())
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.frames.first()?.field.time;
        let last = self.frames.last()?.field.time;
        Some((first, last))
    }
}

/// Half-space masses immediately before and after a collapse event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelocationReport {
    pub event_time: f64,
    pub boundary: f64,
    pub before: (f64, f64),
    pub after: (f64, f64),
    /// Time between the bracketing frames (zero when the recorder forced
    /// frames at the event itself: the transfer is instantaneous).
    pub frame_interval: f64,
}

/// Report the mass redistribution across `boundary` around `event_time`.
///
/// Picks the last frame at or before the event (preferring a forced
/// pre-collapse frame) and the first frame at or after it (preferring the
/// forced post-collapse frame).
pub fn delocation_report(
    series: &DensityTimeSeries,
    boundary: f64,
    event_time: f64,
) -> Result<DelocationReport> {
    let (t0, t1) = series
        .span()
        .ok_or_else(|| Error::InvalidParameter("empty density series".into()))?;
    if event_time < t0 - 1e-12 || event_time > t1 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "event time {event_time} outside series span [{t0}, {t1}]"
        )));
    }
    let eps = 1e-9 * (t1 - t0).abs().max(1.0);
    let mut before: Option<&DensityFrame> = None;
    let mut after: Option<&DensityFrame> = None;
    for frame in &series.frames {
        let t = frame.field.time;
        if t <= event_time + eps && frame.kind != FrameKind::PostCollapse {
            before = Some(frame);
        }
        if after.is_none() && t >= event_time - eps && frame.kind != FrameKind::PreCollapse {
            // the first post/regular frame at or after the event
            if frame.kind == FrameKind::PostCollapse || t > event_time - eps {
                after = Some(frame);
            }
        }
    }
    let before = before
        .ok_or_else(|| Error::InvalidParameter("no frame at or before the event".into()))?;
    let after =
        after.ok_or_else(|| Error::InvalidParameter("no frame at or after the event".into()))?;
    Ok(DelocationReport {
        event_time,
        boundary,
        before: half_space_mass(&before.field, boundary),
        after: half_space_mass(&after.field, boundary),
        frame_interval: after.field.time - before.field.time,
    })
}

/// Validated pass over a flash record: ordering and in-domain centers are
/// enforced, the events themselves are returned unchanged.
pub fn extract_flashes(history: &FlashHistory, grid: &GridSpec) -> Result<FlashHistory> {
    let mut out = FlashHistory {
        events: Vec::with_capacity(history.events.len()),
        seed: history.seed,
        sigma: history.sigma,
        lambda: history.lambda,
    };
    for e in &history.events {
        for &c in &e.center {
            if !grid.contains(c) {
                return Err(Error::OutOfDomain(format!(
                    "flash center {c} at t = {}",
                    e.time
                )));
            }
        }
        out.push(e.clone())?;
    }
    Ok(out)
}

/// Count flashes per interval of the first center coordinate; `edges` are the
/// interval boundaries, producing `edges.len() + 1` bins (open at both ends).
pub fn flash_region_counts(events: &[CollapseEvent], edges: &[f64]) -> Vec<usize> {
    let mut counts = vec![0usize; edges.len() + 1];
    for e in events {
        let x = e.center[0];
        let bin = edges.partition_point(|&b| b <= x);
        counts[bin] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn gaussian_1d(center: f64, width: f64) -> WaveFunction {
        let grid = build_grid(1, 10.0, 128, &[(0, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid, 0.0, |x| {
            Complex64::new((-(x[0] - center).powi(2) / (4.0 * width * width)).exp(), 0.0)
        });
        psi.normalize().unwrap();
        psi
    }

    #[test]
    fn single_particle_density_is_psi_squared() {
        let psi = gaussian_1d(0.5, 0.8);
        let field = matter_density(&psi, &[1.0]).unwrap();
        let dens = psi.probability_density();
        for (f, d) in field.values.iter().zip(dens.iter()) {
            assert_abs_diff_eq!(f, d, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(field.total_mass(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn product_state_density_adds_mass_weighted_marginals() {
        let grid = build_grid(2, 10.0, 64, &[(0, 0), (1, 0)]).unwrap();
        let mut psi = WaveFunction::from_fn(grid, 0.0, |x| {
            let f = (-(x[0] - 1.0).powi(2) / 2.0).exp();
            let g = (-(x[1] + 2.0).powi(2) / 3.0).exp();
            Complex64::new(f * g, 0.0)
        });
        psi.normalize().unwrap();
        let field = matter_density(&psi, &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(field.total_mass(), 3.0, epsilon = 1e-6);
        assert!(field.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn symmetric_field_splits_evenly() {
        let psi = gaussian_1d(0.0, 1.0);
        let field = matter_density(&psi, &[1.0]).unwrap();
        let (l, r) = half_space_mass(&field, 0.0);
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(l + r, field.total_mass(), epsilon = 1e-9);
    }

    #[test]
    fn one_sided_field_has_empty_far_side() {
        let psi = gaussian_1d(-4.0, 0.5);
        let field = matter_density(&psi, &[1.0]).unwrap();
        let (l, r) = half_space_mass(&field, 0.0);
        assert!(r < 1e-8);
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn binary_roundtrip_preserves_field() {
        let psi = gaussian_1d(1.0, 0.7);
        let field = matter_density(&psi, &[1.0]).unwrap();
        let mut buf = Vec::new();
        field.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 8 * field.grid.total_points());
        let back = MatterDensityField::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.grid, field.grid);
        assert_eq!(back.time, field.time);
        assert_eq!(back.values, field.values);
    }

    #[test]
    fn delocation_report_brackets_forced_frames() {
        let make = |center: f64, t: f64| {
            let mut f = matter_density(&gaussian_1d(center, 0.5), &[1.0]).unwrap();
            f.time = t;
            f
        };
        let mut series = DensityTimeSeries {
            frames: Vec::new(),
            frame_interval: 0.5,
        };
        series.push(FrameKind::Regular, make(0.0, 0.0)).unwrap();
        series.push(FrameKind::PreCollapse, make(0.0, 1.0)).unwrap();
        series.push(FrameKind::PostCollapse, make(3.0, 1.0)).unwrap();
        series.push(FrameKind::Regular, make(3.0, 2.0)).unwrap();

        let rep = delocation_report(&series, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(rep.before.0, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(rep.after.0, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rep.after.1, 1.0, epsilon = 1e-6);
        assert_eq!(rep.frame_interval, 0.0);

        assert!(delocation_report(&series, 0.0, 5.0).is_err());
    }

    #[test]
    fn no_event_reports_identical_sides() {
        let make = |t: f64| {
            let mut f = matter_density(&gaussian_1d(0.0, 0.5), &[1.0]).unwrap();
            f.time = t;
            f
        };
        let mut series = DensityTimeSeries {
            frames: Vec::new(),
            frame_interval: 1.0,
        };
        series.push(FrameKind::Regular, make(0.0)).unwrap();
        series.push(FrameKind::Regular, make(1.0)).unwrap();
        let rep = delocation_report(&series, 0.0, 0.5).unwrap();
        assert_abs_diff_eq!(rep.before.0, rep.after.0, epsilon = 1e-12);
    }

    #[test]
    fn flash_extraction_validates_and_counts() {
        let grid = build_grid(1, 10.0, 64, &[(0, 0)]).unwrap();
        let mk = |t: f64, x: f64| CollapseEvent {
            time: t,
            particle: 0,
            center: vec![x],
            pre_norm: 0.5,
            post_norm: 1.0,
        };
        let hist = FlashHistory {
            events: vec![mk(0.5, -3.0), mk(1.0, 2.0), mk(1.5, 2.5)],
            seed: 1,
            sigma: 0.5,
            lambda: Some(1.0),
        };
        let ok = extract_flashes(&hist, &grid).unwrap();
        assert_eq!(ok.events.len(), 3);
        let counts = flash_region_counts(&ok.events, &[0.0]);
        assert_eq!(counts, vec![1, 2]);
        assert_eq!(counts.iter().sum::<usize>(), 3);

        let empty = extract_flashes(&FlashHistory::default(), &grid).unwrap();
        assert!(empty.events.is_empty());

        let bad = FlashHistory {
            events: vec![mk(1.0, 2.0), mk(0.5, 1.0)],
            ..FlashHistory::default()
        };
        assert!(extract_flashes(&bad, &grid).is_err());
    }
}
