//! Goodness-of-fit statistics and region masses backing the pass/fail
//! metrics: Kolmogorov-Smirnov distance against a tabulated CDF, Pearson
//! chi-square with an in-crate regularized incomplete gamma for the p-value,
//! and |psi|^2 masses of axis-aligned regions.

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavefunction::WaveFunction;

/// Asymptotic Kolmogorov critical coefficient at 1% significance:
/// reject when sqrt(n) * D exceeds this.
pub const KS_CRIT_1PCT: f64 = 1.63;

/// Direction of a pass criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Pass when statistic <= threshold.
    AtMost,
    /// Pass when statistic >= threshold.
    AtLeast,
}

/// One pass/fail metric with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub criterion: Criterion,
    pub sample_size: usize,
    pub pass: bool,
    pub seed: Option<u64>,
}

impl TestReport {
    pub fn check(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        criterion: Criterion,
        sample_size: usize,
        seed: Option<u64>,
    ) -> Self {
        let pass = statistic.is_finite()
            && match criterion {
                Criterion::AtMost => statistic <= threshold,
                Criterion::AtLeast => statistic >= threshold,
            };
        Self {
            name: name.into(),
            statistic,
            threshold,
            criterion,
            sample_size,
            pass,
            seed,
        }
    }
}

/// Tabulated cumulative distribution, evaluated by linear interpolation.
#[derive(Debug, Clone)]
pub struct Cdf {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

impl Cdf {
    pub fn new(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self> {
        if xs.len() != ps.len() || xs.len() < 2 {
            return Err(Error::Stats("cdf needs at least two support points".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Stats("cdf support must be strictly increasing".into()));
        }
        if ps.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(Error::Stats("cdf values must be monotone".into()));
        }
        if ps.iter().any(|p| !p.is_finite()) {
            return Err(Error::Stats("cdf values must be finite".into()));
        }
        let span = ps.last().unwrap() - ps.first().unwrap();
        if span <= 0.0 {
            return Err(Error::Stats("cdf carries no probability mass".into()));
        }
        Ok(Self { xs, ps })
    }

    /// CDF of a density tabulated on equally spaced nodes: each cell's mass
    /// accumulates at the cell's right edge.
    pub fn from_density(coords: &[f64], density: &[f64], spacing: f64) -> Result<Self> {
        if coords.len() != density.len() || coords.is_empty() {
            return Err(Error::Stats("density table shape mismatch".into()));
        }
        let mut xs = Vec::with_capacity(coords.len() + 1);
        let mut ps = Vec::with_capacity(coords.len() + 1);
        xs.push(coords[0] - 0.5 * spacing);
        ps.push(0.0);
        let mut acc = 0.0;
        for (&x, &d) in coords.iter().zip(density.iter()) {
            acc += d * spacing;
            xs.push(x + 0.5 * spacing);
            ps.push(acc);
        }
        let total = acc;
        if total <= 0.0 {
            return Err(Error::Stats("density carries no mass".into()));
        }
        for p in ps.iter_mut() {
            *p /= total;
        }
        Self::new(xs, ps)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ps[0];
        }
        if x >= *self.xs.last().unwrap() {
            return *self.ps.last().unwrap();
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ps[i] + t * (self.ps[i + 1] - self.ps[i])
    }
}

/// Sup-norm distance between the empirical CDF of `sorted_samples` and the
/// target CDF. Samples must be sorted ascending and free of NaN.
pub fn ks_distance(sorted_samples: &[f64], cdf: &Cdf) -> Result<f64> {
    if sorted_samples.len() < 10 {
        return Err(Error::Stats("need at least 10 samples".into()));
    }
    if sorted_samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Stats("samples contain NaN".into()));
    }
    if sorted_samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Stats("samples must be sorted ascending".into()));
    }
    let n = sorted_samples.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in sorted_samples.iter().enumerate() {
        let f = cdf.eval(x);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        sup = sup.max(lo).max(hi);
    }
    Ok(sup)
}

/// Result of a Pearson chi-square test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected counts.
///
/// Adjacent bins are merged left to right until every expected count is at
/// least 5 (a trailing light bin merges backwards); degrees of freedom are
/// the merged bin count minus one.
pub fn chi_square_counts(observed: &[u64], expected: &[f64]) -> Result<ChiSquare> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::Stats("observed/expected length mismatch".into()));
    }
    if expected.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::Stats("expected counts must be finite and >= 0".into()));
    }
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected.iter()) {
        obs_acc += o as f64;
        exp_acc += e;
        if exp_acc >= 5.0 {
            merged.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 || obs_acc > 0.0 {
        if let Some(last) = merged.last_mut() {
            last.0 += obs_acc;
            last.1 += exp_acc;
        } else {
            return Err(Error::Stats(
                "expected counts too small to form a single bin of 5".into(),
            ));
        }
    }
    if merged.len() < 2 {
        return Err(Error::Stats(
            "chi-square needs at least two bins after merging (dof >= 1)".into(),
        ));
    }
    if merged.iter().any(|&(_, e)| e <= 0.0) {
        return Err(Error::Stats("zero expected count after merging".into()));
    }
    let statistic: f64 = merged
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = merged.len() - 1;
    let p_value = reg_gamma_upper(dof as f64 / 2.0, statistic / 2.0);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
    })
}

/// Axis-aligned region of configuration space: per-axis optional bounds
/// (lo, hi); `None` leaves an axis unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub bounds: Vec<Option<(f64, f64)>>,
}

impl Region {
    pub fn all(dims: usize) -> Self {
        Self {
            bounds: vec![None; dims],
        }
    }

    /// Half-space along one axis: `x_axis < boundary` (below) or
    /// `x_axis >= boundary` (above).
    pub fn half_space(dims: usize, axis: usize, boundary: f64, above: bool) -> Self {
        let mut bounds = vec![None; dims];
        bounds[axis] = Some(if above {
            (boundary, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, boundary)
        });
        Self { bounds }
    }

    fn is_empty(&self) -> bool {
        self.bounds
            .iter()
            .flatten()
            .any(|&(lo, hi)| !(hi > lo))
    }
}

/// |psi|^2 mass inside `region`, with cells straddling a bound split exactly
/// per axis.
pub fn branch_mass(psi: &WaveFunction, region: &Region) -> Result<f64> {
    let grid = &psi.grid;
    if region.bounds.len() != grid.dims() {
        return Err(Error::Stats(format!(
            "region has {} axes for a {}-axis grid",
            region.bounds.len(),
            grid.dims()
        )));
    }
    if region.is_empty() {
        return Err(Error::Stats("empty region".into()));
    }
    let dx = grid.spacing();
    let dv = grid.cell_volume();
    let dens = psi.probability_density();
    let mut mass = 0.0;
    for (idx, v) in dens.indexed_iter() {
        let mut frac = 1.0;
        for (a, bound) in region.bounds.iter().enumerate() {
            if let Some((lo, hi)) = bound {
                let x = grid.coord(idx[a]);
                let cell_lo = x - 0.5 * dx;
                let cell_hi = x + 0.5 * dx;
                let overlap = (cell_hi.min(*hi) - cell_lo.max(*lo)).max(0.0);
                frac *= overlap / dx;
                if frac == 0.0 {
                    break;
                }
            }
        }
        mass += v * frac;
    }
    Ok(mass * dv)
}

/// Mass of a real density field inside a region (same cell-splitting rule).
pub fn field_region_mass(values: &ArrayD<f64>, grid: &crate::grid::GridSpec, region: &Region) -> f64 {
    let dx = grid.spacing();
    let dv = grid.cell_volume();
    let mut mass = 0.0;
    for (idx, v) in values.indexed_iter() {
        let mut frac = 1.0;
        for (a, bound) in region.bounds.iter().enumerate() {
            if let Some((lo, hi)) = bound {
                let x = grid.coord(idx[a]);
                let overlap = ((x + 0.5 * dx).min(*hi) - (x - 0.5 * dx).max(*lo)).max(0.0);
                frac *= overlap / dx;
            }
        }
        mass += v * frac;
    }
    mass * dv
}

/// Regularized upper incomplete gamma Q(s, x) = Gamma(s, x) / Gamma(s),
/// by the power series for x < s + 1 and the Lentz continued fraction
/// otherwise. Absolute accuracy better than 1e-10 over the tested range.
pub fn reg_gamma_upper(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0, "invalid gamma arguments");
    if x == 0.0 {
        return 1.0;
    }
    if x < s + 1.0 {
        1.0 - gamma_series_p(s, x)
    } else {
        gamma_cf_q(s, x)
    }
}

/// Lower regularized P(s, x) via its power series.
fn gamma_series_p(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut a = s;
    for _ in 0..500 {
        a += 1.0;
        term *= x / a;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + s * x.ln() - ln_gamma(s)).exp()
}

/// Upper regularized Q(s, x) via the modified Lentz continued fraction.
fn gamma_cf_q(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x + s * x.ln() - ln_gamma(s)).exp()
}

/// Natural log of the gamma function (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        a += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}
