//! 2π-periodic fields sampled on piecewise-uniform angular grids, circle
//! geometry, and restriction of coefficient fields to circles.
//!
//! A grid is a cyclic partition of the circle by its breakpoints; each piece is
//! sampled uniformly *including both endpoints*, so a field that jumps at a
//! breakpoint stores both one-sided limits. Trapezoid quadrature per piece is
//! therefore exact for piecewise-constant integrands and spectrally accurate
//! for smooth periodic ones on a single-piece grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::merge_breakpoints;
use crate::linalg::Mat2;
use crate::reduction::{BeltramiPair, MatrixField};

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Nodes per circle unless configured otherwise.
pub const DEFAULT_NODES: usize = 2048;

/// Every piece gets at least this many sub-intervals.
pub const MIN_INTERVALS_PER_PIECE: usize = 2;

/// Maps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TWO_PI);
    if t >= TWO_PI {
        0.0
    } else {
        t
    }
}

/// Principal argument shifted into `[0, 2π)`.
pub fn arg(z: Complex64) -> f64 {
    normalize_angle(z.arg())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    /// May exceed 2π for the piece that wraps around.
    pub end: f64,
    pub intervals: usize,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn step(&self) -> f64 {
        self.len() / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.intervals {
            self.end
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pieces: Vec<Piece>,
}

impl AngularGrid {
    /// Single piece starting at 0.
    pub fn uniform(node_count: usize) -> Result<Self> {
        Self::with_breakpoints(node_count, &[0.0])
    }

    /// Distributes about `node_count` intervals over the pieces in proportion
    /// to their length.
    pub fn with_breakpoints(node_count: usize, breakpoints: &[f64]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGrid("node_count must be positive".into()));
        }
        if let Some(i) = breakpoints.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        let breaks = merge_breakpoints(breakpoints);
        let n = breaks.len();
        let pieces = (0..n)
            .map(|j| {
                let start = breaks[j];
                let end = if j + 1 < n {
                    breaks[j + 1]
                } else {
                    breaks[0] + TWO_PI
                };
                let share = node_count as f64 * (end - start) / TWO_PI;
                Piece {
                    start,
                    end,
                    intervals: (share.round() as usize).max(MIN_INTERVALS_PER_PIECE),
                }
            })
            .collect();
        Ok(Self { pieces })
    }

    /// Explicit per-piece interval counts.
    pub fn from_pieces(breakpoints: &[f64], intervals: &[usize]) -> Result<Self> {
        let breaks = merge_breakpoints(breakpoints);
        if breaks.len() != intervals.len() {
            return Err(Error::InvalidGrid(format!(
                "{} distinct breakpoints for {} interval counts",
                breaks.len(),
                intervals.len()
            )));
        }
        if intervals.iter().any(|&m| m == 0) {
            return Err(Error::InvalidGrid("empty piece".into()));
        }
        let n = breaks.len();
        let pieces = (0..n)
            .map(|j| Piece {
                start: breaks[j],
                end: if j + 1 < n {
                    breaks[j + 1]
                } else {
                    breaks[0] + TWO_PI
                },
                intervals: intervals[j],
            })
            .collect();
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Number of distinct nodes on the circle.
    pub fn node_count(&self) -> usize {
        self.pieces.iter().map(|p| p.intervals).sum()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.start).collect()
    }

    /// Same breakpoints, `factor` times as many intervals per piece.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    intervals: p.intervals * factor.max(1),
                    ..*p
                })
                .collect(),
        }
    }

    /// Distinct node angles in increasing order starting at the first breakpoint.
    pub fn nodes(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .flat_map(|p| (0..p.intervals).map(move |i| p.node(i)))
            .collect()
    }

    /// Piece containing `theta` and the offset of `theta` from the piece start.
    pub fn locate(&self, theta: f64) -> (usize, f64) {
        let first = self.pieces[0].start;
        let t = first + normalize_angle(theta - first);
        let j = self
            .pieces
            .iter()
            .rposition(|p| p.start <= t)
            .unwrap_or(self.pieces.len() - 1);
        (j, t - self.pieces[j].start)
    }

    pub fn has_node_at(&self, theta: f64, tol: f64) -> bool {
        let (j, off) = self.locate(theta);
        let p = &self.pieces[j];
        let h = p.step();
        let k = (off / h).round();
        (off - k * h).abs() <= tol || (p.len() - off).abs() <= tol
    }

    /// Smallest piece length.
    pub fn min_piece_len(&self) -> f64 {
        self.pieces
            .iter()
            .map(Piece::len)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sample types a [`PeriodicField`] can hold.
pub trait Sample: Copy + Send + Sync {
    fn lerp(a: Self, b: Self, w: f64) -> Self;
    fn is_finite_sample(&self) -> bool;
}

impl Sample for f64 {
    fn lerp(a: Self, b: Self, w: f64) -> Self {
        a + (b - a) * w
    }
    fn is_finite_sample(&self) -> bool {
        self.is_finite()
    }
}

impl Sample for Complex64 {
    fn lerp(a: Self, b: Self, w: f64) -> Self {
        a + (b - a) * w
    }
    fn is_finite_sample(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Sample for Mat2 {
    fn lerp(a: Self, b: Self, w: f64) -> Self {
        a + (b - a).scale(w)
    }
    fn is_finite_sample(&self) -> bool {
        self.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Smooth,
    PiecewiseConstant,
}

/// Samples of a periodic function on an [`AngularGrid`]. `values[j]` holds
/// `intervals + 1` samples of piece `j`, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicField<T> {
    grid: AngularGrid,
    values: Vec<Vec<T>>,
    kind: FieldKind,
}

impl<T: Sample> PeriodicField<T> {
    /// Samples `f(piece, theta)` at every node, both endpoints of every piece.
    pub fn from_fn(
        grid: &AngularGrid,
        kind: FieldKind,
        mut f: impl FnMut(usize, f64) -> T,
    ) -> Self {
        let values = grid
            .pieces()
            .iter()
            .enumerate()
            .map(|(j, p)| (0..=p.intervals).map(|i| f(j, p.node(i))).collect())
            .collect();
        Self {
            grid: grid.clone(),
            values,
            kind,
        }
    }

    pub fn try_from_fn(
        grid: &AngularGrid,
        kind: FieldKind,
        mut f: impl FnMut(usize, f64) -> Result<T>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.pieces().len());
        for (j, p) in grid.pieces().iter().enumerate() {
            let mut row = Vec::with_capacity(p.intervals + 1);
            for i in 0..=p.intervals {
                row.push(f(j, p.node(i))?);
            }
            values.push(row);
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            kind,
        })
    }

    pub fn from_values(grid: &AngularGrid, kind: FieldKind, values: Vec<Vec<T>>) -> Result<Self> {
        if values.len() != grid.pieces().len()
            || values
                .iter()
                .zip(grid.pieces())
                .any(|(v, p)| v.len() != p.intervals + 1)
        {
            return Err(Error::InvalidGrid(
                "sample layout does not match grid".into(),
            ));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            kind,
        })
    }

    /// One value per piece.
    pub fn piecewise_constant(grid: &AngularGrid, piece_values: &[T]) -> Result<Self> {
        if piece_values.len() != grid.pieces().len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} pieces",
                piece_values.len(),
                grid.pieces().len()
            )));
        }
        Ok(Self::from_fn(grid, FieldKind::PiecewiseConstant, |j, _| {
            piece_values[j]
        }))
    }

    pub fn constant(grid: &AngularGrid, value: T) -> Self {
        Self::from_fn(grid, FieldKind::PiecewiseConstant, |_, _| value)
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn piece_values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn map<U: Sample>(&self, mut f: impl FnMut(T) -> U) -> PeriodicField<U> {
        PeriodicField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|&v| f(v)).collect())
                .collect(),
            kind: self.kind,
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map<U: Sample, V: Sample>(
        &self,
        other: &PeriodicField<U>,
        mut f: impl FnMut(T, U) -> V,
    ) -> Result<PeriodicField<V>> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("fields live on different grids".into()));
        }
        let kind = if self.kind == FieldKind::PiecewiseConstant
            && other.kind == FieldKind::PiecewiseConstant
        {
            FieldKind::PiecewiseConstant
        } else {
            FieldKind::Smooth
        };
        Ok(PeriodicField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
            kind,
        })
    }

    /// Linear interpolation inside the piece containing `theta`.
    pub fn value_at(&self, theta: f64) -> T {
        let (j, off) = self.grid.locate(theta);
        let row = &self.values[j];
        if self.kind == FieldKind::PiecewiseConstant {
            return row[0];
        }
        let p = &self.grid.pieces()[j];
        let x = off / p.step();
        let i = (x.floor() as usize).min(p.intervals - 1);
        T::lerp(row[i], row[i + 1], x - i as f64)
    }

    /// Samples at the distinct nodes (piece end points dropped).
    pub fn node_values(&self) -> Vec<T> {
        self.values
            .iter()
            .flat_map(|row| row[..row.len() - 1].iter().copied())
            .collect()
    }

    /// Iterates `(piece, index in piece, theta, value)` over all stored samples.
    pub fn samples(&self) -> impl Iterator<Item = (usize, usize, f64, T)> + '_ {
        self.values.iter().enumerate().flat_map(move |(j, row)| {
            let p = self.grid.pieces()[j];
            row.iter()
                .enumerate()
                .map(move |(i, &v)| (j, i, p.node(i), v))
        })
    }

    /// Flat index (in [`Self::samples`] order) of the first non-finite sample.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.samples()
            .position(|(_, _, _, v)| !v.is_finite_sample())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }
}

impl PeriodicField<f64> {
    /// Mean over one period (trapezoid per piece).
    pub fn mean(&self) -> f64 {
        let total: f64 = self
            .grid
            .pieces()
            .iter()
            .zip(&self.values)
            .map(|(p, row)| piece_integral(p, row, self.kind))
            .sum();
        total / TWO_PI
    }

    /// Integral over each piece, divided by 2π.
    pub fn piece_means(&self) -> Vec<f64> {
        self.grid
            .pieces()
            .iter()
            .zip(&self.values)
            .map(|(p, row)| piece_integral(p, row, self.kind) / TWO_PI)
            .collect()
    }

    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-piece `(min, max)`.
    pub fn piece_extrema(&self) -> Vec<(f64, f64)> {
        self.values
            .iter()
            .map(|row| {
                row.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .collect()
    }
}

impl PeriodicField<Complex64> {
    pub fn mean(&self) -> Complex64 {
        let re = self.map(|v| v.re).mean();
        let im = self.map(|v| v.im).mean();
        Complex64::new(re, im)
    }
}

fn piece_integral(p: &Piece, row: &[f64], kind: FieldKind) -> f64 {
    match kind {
        FieldKind::PiecewiseConstant => row[0] * p.len(),
        FieldKind::Smooth => {
            let n = row.len();
            let inner: f64 = row[1..n - 1].iter().sum();
            p.step() * (0.5 * (row[0] + row[n - 1]) + inner)
        }
    }
}

/// Mean value of a real field over one period.
pub fn periodic_quadrature(field: &PeriodicField<f64>) -> Result<f64> {
    field.check_finite()?;
    Ok(field.mean())
}

/// `(inf, sup)` over the samples of a real field. Complex fields are rejected
/// by the type system.
pub fn field_extrema(field: &PeriodicField<f64>) -> Result<(f64, f64)> {
    field.check_finite()?;
    Ok((field.min(), field.max()))
}

/// A circle `S_rho(x)` with its sampling resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub center: Complex64,
    pub radius: f64,
    pub resolution: usize,
}

impl CircleSpec {
    pub fn new(center: Complex64, radius: f64, resolution: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        if !center.re.is_finite() || !center.im.is_finite() {
            return Err(Error::Domain("circle center must be finite".into()));
        }
        if resolution < 4 {
            return Err(Error::InvalidGrid(format!(
                "resolution {resolution} below 4"
            )));
        }
        Ok(Self {
            center,
            radius,
            resolution,
        })
    }

    pub fn origin(radius: f64, resolution: usize) -> Result<Self> {
        Self::new(Complex64::new(0.0, 0.0), radius, resolution)
    }

    pub fn point(&self, t: f64) -> Complex64 {
        self.center + Complex64::from_polar(self.radius, t)
    }

    /// Outer unit normal at parameter `t`.
    pub fn normal(&self, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t)
    }

    pub fn is_origin_centered(&self) -> bool {
        self.center.norm() <= 1e-14
    }

    pub fn passes_through_origin(&self) -> bool {
        (self.center.norm() - self.radius).abs() <= 1e-12 * self.radius.max(1.0)
    }

    /// Closure of the circle lies in the disk of radius `r`.
    pub fn inside_disk(&self, r: f64) -> bool {
        self.center.norm() + self.radius <= r
    }

    /// Parameters `t` where the circle meets the ray `{s e^{i beta} : s > 0}`.
    pub fn ray_crossings(&self, beta: f64) -> Vec<f64> {
        if self.is_origin_centered() {
            return vec![normalize_angle(beta)];
        }
        let dir = Complex64::from_polar(1.0, beta);
        let b = (self.center.conj() * dir).re;
        let c = self.center.norm_sqr() - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        [b - sq, b + sq]
            .into_iter()
            .filter(|&s| s > 0.0)
            .map(|s| arg(dir * s - self.center))
            .collect()
    }

    /// Grid in the circle parameter whose breakpoints include every crossing
    /// of the given polar angles, with pieces further split so the grid has at
    /// least `min_pieces` pieces.
    pub fn grid(&self, polar_breakpoints: &[f64], min_pieces: usize) -> Result<AngularGrid> {
        let mut ts: Vec<f64> = polar_breakpoints
            .iter()
            .flat_map(|&b| self.ray_crossings(b))
            .collect();
        if ts.is_empty() {
            ts.push(0.0);
        }
        let coarse = merge_breakpoints(&ts);
        let breaks = subdivide(&coarse, min_pieces);
        AngularGrid::with_breakpoints(self.resolution, &breaks)
    }

    /// Polar angle of the midpoint of each grid piece; used to read
    /// piecewise-constant angular coefficients on the correct side of a jump.
    pub fn sector_hints(&self, grid: &AngularGrid) -> Vec<f64> {
        grid.pieces()
            .iter()
            .map(|p| arg(self.point(p.midpoint())))
            .collect()
    }
}

/// Splits the cyclic partition `breaks` so that it has about `target` pieces,
/// each original piece receiving a share proportional to its length.
pub fn subdivide(breaks: &[f64], target: usize) -> Vec<f64> {
    let n = breaks.len();
    if target <= n {
        return breaks.to_vec();
    }
    let mut out = Vec::with_capacity(target);
    for j in 0..n {
        let start = breaks[j];
        let end = if j + 1 < n {
            breaks[j + 1]
        } else {
            breaks[0] + TWO_PI
        };
        let parts = ((target as f64 * (end - start) / TWO_PI).round() as usize).max(1);
        for k in 0..parts {
            out.push(normalize_angle(
                start + (end - start) * k as f64 / parts as f64,
            ));
        }
    }
    out
}

/// Coefficients of a Beltrami pair sampled along a circle.
#[derive(Debug, Clone)]
pub struct CirclePair {
    pub circle: CircleSpec,
    pub normal: PeriodicField<Complex64>,
    pub mu: PeriodicField<Complex64>,
    pub nu: PeriodicField<Complex64>,
}

/// A matrix field sampled along a circle.
#[derive(Debug, Clone)]
pub struct CircleMatrix {
    pub circle: CircleSpec,
    pub normal: PeriodicField<Complex64>,
    pub matrix: PeriodicField<Mat2>,
}

impl CircleMatrix {
    /// The entry `a_ij` (1-based) as a real field.
    pub fn entry(&self, i: usize, j: usize) -> PeriodicField<f64> {
        self.matrix.map(|m| match (i, j) {
            (1, 1) => m.a11,
            (1, 2) => m.a12,
            (2, 1) => m.a21,
            _ => m.a22,
        })
    }
}

fn check_circle_for_angular(circle: &CircleSpec, angular: bool) -> Result<()> {
    if angular && circle.passes_through_origin() {
        return Err(Error::OriginOnCircle);
    }
    Ok(())
}

/// Samples `(mu, nu)` along `circle` on its default grid.
pub fn restrict_to_circle(pair: &BeltramiPair, circle: &CircleSpec) -> Result<CirclePair> {
    let grid = circle.grid(&pair.angular_breakpoints(), 1)?;
    restrict_pair_on_grid(pair, circle, &grid)
}

/// Samples `(mu, nu)` along `circle` at the nodes of `grid` (circle parameter).
pub fn restrict_pair_on_grid(
    pair: &BeltramiPair,
    circle: &CircleSpec,
    grid: &AngularGrid,
) -> Result<CirclePair> {
    check_circle_for_angular(circle, pair.has_angular_part())?;
    let hints = circle.sector_hints(grid);
    let mut mu_rows = Vec::with_capacity(grid.pieces().len());
    let mut nu_rows = Vec::with_capacity(grid.pieces().len());
    for (j, p) in grid.pieces().iter().enumerate() {
        let mut mu_row = Vec::with_capacity(p.intervals + 1);
        let mut nu_row = Vec::with_capacity(p.intervals + 1);
        for i in 0..=p.intervals {
            let (mu, nu) = pair.eval(circle.point(p.node(i)), Some(hints[j]))?;
            mu_row.push(mu);
            nu_row.push(nu);
        }
        mu_rows.push(mu_row);
        nu_rows.push(nu_row);
    }
    Ok(CirclePair {
        circle: *circle,
        normal: PeriodicField::from_fn(grid, FieldKind::Smooth, |_, t| circle.normal(t)),
        mu: PeriodicField::from_values(grid, FieldKind::Smooth, mu_rows)?,
        nu: PeriodicField::from_values(grid, FieldKind::Smooth, nu_rows)?,
    })
}

/// Samples a matrix field along `circle` on its default grid.
pub fn restrict_matrix_to_circle(field: &MatrixField, circle: &CircleSpec) -> Result<CircleMatrix> {
    let grid = circle.grid(&field.angular_breakpoints(), 1)?;
    restrict_matrix_on_grid(field, circle, &grid)
}

pub fn restrict_matrix_on_grid(
    field: &MatrixField,
    circle: &CircleSpec,
    grid: &AngularGrid,
) -> Result<CircleMatrix> {
    check_circle_for_angular(circle, field.has_angular_part())?;
    let hints = circle.sector_hints(grid);
    let matrix = PeriodicField::try_from_fn(grid, FieldKind::Smooth, |j, t| {
        field.eval(circle.point(t), Some(hints[j]))
    })?;
    Ok(CircleMatrix {
        circle: *circle,
        normal: PeriodicField::from_fn(grid, FieldKind::Smooth, |_, t| circle.normal(t)),
        matrix,
    })
}
