//! Lower bounds for the Hölder exponent of solutions.
//!
//! For each circle `S` the inner quantity is
//!
//! ```text
//! Q(φ, ψ) = sqrt(sup φ / inf ψ) · mean(sqrt(ψ/φ) g) / ((4/π) arctan(ratio^(1/4)))
//! ratio   = inf(D/(φψ)) / sup(D/(φψ))
//! ```
//!
//! with `g = ⟨n, An⟩ / sqrt(det A)` and `D = det A` (matrix form) or the
//! equivalent expressions in `(μ, ν)`. The bound is the reciprocal of the
//! largest over circles of the smallest `Q` found over the weight family.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::periodic::{
    restrict_matrix_on_grid, restrict_pair_on_grid, AngularGrid, CircleMatrix, CirclePair,
    CircleSpec, FieldKind, PeriodicField, DEFAULT_NODES,
};
use crate::reduction::{BeltramiPair, MatrixField};

/// Lower clamp of the det ratio inside the arctan.
pub const RATIO_FLOOR: f64 = 1e-15;

/// `(4/π) arctan(ratio^(1/4))` with the ratio clamped to `[1e-15, 1]`.
pub fn arctan_factor(ratio: f64) -> f64 {
    let r = if ratio.is_nan() {
        RATIO_FLOOR
    } else {
        ratio.clamp(RATIO_FLOOR, 1.0)
    };
    4.0 / PI * r.powf(0.25).atan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Constant,
    Remark,
    Piecewise,
}

/// A weight pair `(φ, ψ)` on one circle.
#[derive(Debug, Clone, Serialize)]
pub struct WeightPair {
    pub kind: WeightKind,
    pub phi: PeriodicField<f64>,
    pub psi: PeriodicField<f64>,
}

impl WeightPair {
    pub fn new(kind: WeightKind, phi: PeriodicField<f64>, psi: PeriodicField<f64>) -> Result<Self> {
        if phi.grid() != psi.grid() {
            return Err(Error::InvalidGrid(
                "phi and psi live on different grids".into(),
            ));
        }
        for w in [&phi, &psi] {
            w.check_finite()?;
            if !(w.min() > 0.0) {
                return Err(Error::Domain(format!(
                    "weight infimum {} is not positive",
                    w.min()
                )));
            }
        }
        Ok(Self { kind, phi, psi })
    }

    pub fn constant(grid: &AngularGrid) -> Self {
        Self {
            kind: WeightKind::Constant,
            phi: PeriodicField::constant(grid, 1.0),
            psi: PeriodicField::constant(grid, 1.0),
        }
    }

    /// Piecewise-constant weights from per-piece values.
    pub fn piecewise(grid: &AngularGrid, phi: &[f64], psi: &[f64]) -> Result<Self> {
        Self::new(
            WeightKind::Piecewise,
            PeriodicField::piecewise_constant(grid, phi)?,
            PeriodicField::piecewise_constant(grid, psi)?,
        )
    }

    pub fn inf_phi(&self) -> f64 {
        self.phi.min()
    }

    pub fn inf_psi(&self) -> f64 {
        self.psi.min()
    }

    /// `(1/φ, 1/ψ)` swapped: the pair `(ψ⁻¹, φ⁻¹)`.
    pub fn dual(&self) -> Self {
        Self {
            kind: self.kind,
            phi: self.psi.map(|v| 1.0 / v),
            psi: self.phi.map(|v| 1.0 / v),
        }
    }
}

/// Per-node data of the inner functional on one circle.
#[derive(Debug, Clone)]
pub struct CircleData {
    pub circle: CircleSpec,
    /// `⟨n, An⟩ / sqrt(det A)`.
    pub g: PeriodicField<f64>,
    /// `det A`.
    pub det: PeriodicField<f64>,
    /// `⟨n, An⟩`, the first remark weight.
    pub flux: PeriodicField<f64>,
}

impl CircleData {
    /// Direct evaluation from `(μ, ν)` with real `ν`.
    pub fn from_pair(cp: &CirclePair) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        Self::build(cp.circle, &cp.normal, |j, i, n| {
            let mu = cp.mu.piece_values()[j][i];
            let nu = cp.nu.piece_values()[j][i];
            let pt = cp.circle.point(crate::periodic::arg(n));
            if nu.im.abs() > 1e-14 {
                return Err(Error::Unsupported(format!(
                    "Im(nu) = {} at z = {pt}",
                    nu.im
                )));
            }
            let v = nu.re;
            let m = mu.norm();
            let top = (one - n.conj() * n.conj() * mu).norm_sqr() - v * v;
            let r1 = 1.0 - (m + v) * (m + v);
            let r2 = 1.0 - (m - v) * (m - v);
            let d1 = (1.0 + v) * (1.0 + v) - m * m;
            let d2 = (1.0 - v) * (1.0 - v) - m * m;
            if !(r1 > 0.0 && r2 > 0.0 && d1 > 0.0 && d2 > 0.0) {
                return Err(Error::Ellipticity {
                    location: pt,
                    modulus_sum: m + v.abs(),
                    margin: 1.0,
                });
            }
            Ok([top / (r1.sqrt() * r2.sqrt()), d2 / d1, top / d1])
        })
    }

    /// Evaluation from a symmetric positive definite matrix field.
    pub fn from_matrix(cm: &CircleMatrix) -> Result<Self> {
        Self::build(cm.circle, &cm.normal, |j, i, n| {
            let m = cm.matrix.piece_values()[j][i];
            let scale = m.a11.abs().max(m.a22.abs()).max(1.0);
            if (m.a12 - m.a21).abs() > 1e-12 * scale {
                return Err(Error::Unsupported("matrix field is not symmetric".into()));
            }
            let d = m.det();
            let q = m.quadratic([n.re, n.im]);
            if !(d > 0.0 && m.a11 > 0.0 && q > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    location: cm.circle.point(crate::periodic::arg(n)),
                    a11: m.a11,
                    det: d,
                });
            }
            Ok([q / d.sqrt(), d, q])
        })
    }

    fn build(
        circle: CircleSpec,
        normal: &PeriodicField<Complex64>,
        f: impl Fn(usize, usize, Complex64) -> Result<[f64; 3]>,
    ) -> Result<Self> {
        let grid = normal.grid();
        let mut rows: [Vec<Vec<f64>>; 3] = Default::default();
        for (j, nrow) in normal.piece_values().iter().enumerate() {
            let mut r: [Vec<f64>; 3] = Default::default();
            for (i, &n) in nrow.iter().enumerate() {
                let v = f(j, i, n)?;
                for k in 0..3 {
                    r[k].push(v[k]);
                }
            }
            for k in 0..3 {
                rows[k].push(std::mem::take(&mut r[k]));
            }
        }
        let [g, det, flux] = rows;
        Ok(Self {
            circle,
            g: PeriodicField::from_values(grid, FieldKind::Smooth, g)?,
            det: PeriodicField::from_values(grid, FieldKind::Smooth, det)?,
            flux: PeriodicField::from_values(grid, FieldKind::Smooth, flux)?,
        })
    }

    pub fn grid(&self) -> &AngularGrid {
        self.g.grid()
    }
}

/// `sqrt(ψ/φ) · g` at every node.
pub fn circle_integrand(cp: &CirclePair, weights: &WeightPair) -> Result<PeriodicField<f64>> {
    let data = CircleData::from_pair(cp)?;
    weighted_integrand(&data, weights)
}

fn weighted_integrand(data: &CircleData, w: &WeightPair) -> Result<PeriodicField<f64>> {
    let ratio = w.psi.zip_map(&w.phi, |s, f| (s / f).sqrt())?;
    ratio.zip_map(&data.g, |r, g| r * g)
}

/// The inner functional `Q(φ, ψ)` on one circle.
pub fn objective(data: &CircleData, w: &WeightPair) -> Result<f64> {
    let mean = weighted_integrand(data, w)?.mean();
    let prod = w.phi.zip_map(&w.psi, |a, b| a * b)?;
    let scaled = data.det.zip_map(&prod, |d, p| d / p)?;
    let ratio = scaled.min() / scaled.max();
    Ok((w.phi.max() / w.psi.min()).sqrt() * mean / arctan_factor(ratio))
}

/// The weights used in the classical comparison:
/// `φ = ⟨n, An⟩`, `ψ = det A / φ`, so that `φψ = det A`.
pub fn remark_weights(cp: &CirclePair) -> Result<WeightPair> {
    remark_from_data(&CircleData::from_pair(cp)?)
}

fn remark_from_data(data: &CircleData) -> Result<WeightPair> {
    let psi = data.det.zip_map(&data.flux, |d, f| d / f)?;
    WeightPair::new(WeightKind::Remark, data.flux.clone(), psi)
}

/// Per-piece reduction of [`CircleData`] for piecewise-constant weights.
#[derive(Debug, Clone)]
pub struct PieceTable {
    /// Integral of `g` over each piece divided by 2π.
    pub mass: Vec<f64>,
    pub det_min: Vec<f64>,
    pub det_max: Vec<f64>,
}

impl PieceTable {
    pub fn new(data: &CircleData) -> Self {
        let (det_min, det_max) = data.det.piece_extrema().into_iter().unzip();
        Self {
            mass: data.g.piece_means(),
            det_min,
            det_max,
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `Q` at `φ_j = e^(x_j)`, `ψ_j = e^(y_j)`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = Search::new(self, x.to_vec(), y.to_vec());
        s.value()
    }
}

/// Optimizer state with cached per-piece terms so that moving one piece
/// costs three exponentials.
struct Search<'a> {
    t: &'a PieceTable,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    evals: usize,
}

impl<'a> Search<'a> {
    fn new(t: &'a PieceTable, x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = t.len();
        let mut s = Self {
            t,
            x,
            y,
            w: vec![0.0; n],
            lo: vec![0.0; n],
            hi: vec![0.0; n],
            evals: 0,
        };
        for j in 0..n {
            s.set(j, s.x[j], s.y[j]);
        }
        s
    }

    fn set(&mut self, j: usize, xj: f64, yj: f64) {
        self.x[j] = xj;
        self.y[j] = yj;
        let e = (-(xj + yj)).exp();
        self.w[j] = self.t.mass[j] * (0.5 * (yj - xj)).exp();
        self.lo[j] = self.t.det_min[j] * e;
        self.hi[j] = self.t.det_max[j] * e;
    }

    fn value(&mut self) -> f64 {
        self.evals += 1;
        let maxx = self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let miny = self.y.iter().copied().fold(f64::INFINITY, f64::min);
        let mean: f64 = self.w.iter().sum();
        let lo = self.lo.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.hi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0.5 * (maxx - miny)).exp() * mean / arctan_factor(lo / hi)
    }

    fn try_move(&mut self, changes: &[(usize, f64, f64)], best: &mut f64) -> bool {
        let old: Vec<(usize, f64, f64)> = changes
            .iter()
            .map(|&(j, _, _)| (j, self.x[j], self.y[j]))
            .collect();
        for &(j, dx, dy) in changes {
            self.set(j, self.x[j] + dx, self.y[j] + dy);
        }
        let v = self.value();
        if v < *best - 1e-12 * best.abs() {
            *best = v;
            return true;
        }
        for &(j, x, y) in old.iter().rev() {
            self.set(j, x, y);
        }
        false
    }

    /// Moves of the pieces that attain `max x`, `min y`, `min lo`, `max hi`.
    fn group_moves(&self, step: f64) -> [Vec<(usize, f64, f64)>; 4] {
        let maxx = self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let miny = self.y.iter().copied().fold(f64::INFINITY, f64::min);
        let lo = self.lo.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.hi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n = self.x.len();
        let pick = |f: &dyn Fn(usize) -> bool, dx: f64, dy: f64| -> Vec<(usize, f64, f64)> {
            (0..n).filter(|&j| f(j)).map(|j| (j, dx, dy)).collect()
        };
        [
            pick(&|j| self.x[j] >= maxx - 1e-12, -step, 0.0),
            pick(&|j| self.y[j] <= miny + 1e-12, 0.0, step),
            pick(
                &|j| self.lo[j] <= lo * (1.0 + 1e-9),
                -0.5 * step,
                -0.5 * step,
            ),
            pick(&|j| self.hi[j] >= hi * (1.0 - 1e-9), 0.5 * step, 0.5 * step),
        ]
    }

    fn recenter(&mut self) {
        let maxx = self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let miny = self.y.iter().copied().fold(f64::INFINITY, f64::min);
        for j in 0..self.x.len() {
            self.set(j, self.x[j] - maxx, self.y[j] - miny);
        }
    }
}

const DIRECTIONS: [(f64, f64); 8] = [
    (-1.0, 0.0),
    (1.0, 0.0),
    (0.0, -1.0),
    (0.0, 1.0),
    (-1.0, -1.0),
    (1.0, 1.0),
    (-1.0, 1.0),
    (1.0, -1.0),
];

/// Coordinate descent on log-weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub starts: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_sweeps: usize,
    /// Half-width of the uniform perturbation of random starts (log scale).
    pub spread: f64,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            starts: 8,
            initial_step: 0.5,
            min_step: 1e-6,
            max_sweeps: 4000,
            spread: 1.0,
            seed: 0x5eed,
        }
    }
}

/// Result of one local search.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub value: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sweeps: usize,
    pub evaluations: usize,
}

/// Minimizes `Q` over piecewise-constant log-weights from the given start.
pub fn descend(
    table: &PieceTable,
    x0: Vec<f64>,
    y0: Vec<f64>,
    settings: &OptimizerSettings,
) -> Optimum {
    let mut s = Search::new(table, x0, y0);
    let mut best = s.value();
    let mut step = settings.initial_step;
    let mut sweeps = 0;
    while step >= settings.min_step && sweeps < settings.max_sweeps {
        sweeps += 1;
        let mut improved = false;
        for j in 0..table.len() {
            for (dx, dy) in DIRECTIONS {
                improved |= s.try_move(&[(j, dx * step, dy * step)], &mut best);
            }
        }
        for mask in 1..16usize {
            let groups = s.group_moves(step);
            let mut dense: HashMap<usize, (f64, f64)> = HashMap::new();
            for (k, g) in groups.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    for &(j, dx, dy) in g {
                        let e = dense.entry(j).or_insert((0.0, 0.0));
                        e.0 += dx;
                        e.1 += dy;
                    }
                }
            }
            let mut changes: Vec<(usize, f64, f64)> =
                dense.into_iter().map(|(j, (a, b))| (j, a, b)).collect();
            changes.sort_by_key(|c| c.0);
            improved |= s.try_move(&changes, &mut best);
        }
        s.recenter();
        best = s.value();
        if !improved {
            step *= 0.5;
        }
    }
    Optimum {
        value: best,
        x: s.x,
        y: s.y,
        sweeps,
        evaluations: s.evals,
    }
}

/// Multi-started descent: constant start, projected remark start, then
/// seeded random perturbations of both.
pub fn optimize_pieces(
    data: &CircleData,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<(WeightPair, Optimum)> {
    let table = PieceTable::new(data);
    let n = table.len();
    let remark = remark_from_data(data)?;
    let rx: Vec<f64> = remark
        .phi
        .piece_means()
        .iter()
        .zip(data.grid().pieces())
        .map(|(m, p)| (m * 2.0 * PI / p.len()).ln())
        .collect();
    let ry: Vec<f64> = remark
        .psi
        .piece_means()
        .iter()
        .zip(data.grid().pieces())
        .map(|(m, p)| (m * 2.0 * PI / p.len()).ln())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Optimum> = None;
    let (mut sweeps, mut evals) = (0, 0);
    for k in 0..settings.starts.max(1) {
        let (bx, by) = if k % 2 == 0 {
            (vec![0.0; n], vec![0.0; n])
        } else {
            (rx.clone(), ry.clone())
        };
        let (x0, y0) = if k < 2 {
            (bx, by)
        } else {
            let a = settings.spread;
            (
                bx.iter().map(|v| v + rng.gen_range(-a..=a)).collect(),
                by.iter().map(|v| v + rng.gen_range(-a..=a)).collect(),
            )
        };
        let opt = descend(&table, x0, y0, settings);
        sweeps += opt.sweeps;
        evals += opt.evaluations;
        if best.as_ref().map_or(true, |b| opt.value < b.value) {
            best = Some(opt);
        }
    }
    let mut best = best.expect("at least one start");
    best.sweeps = sweeps;
    best.evaluations = evals;
    let phi: Vec<f64> = best.x.iter().map(|v| v.exp()).collect();
    let psi: Vec<f64> = best.y.iter().map(|v| v.exp()).collect();
    let w = WeightPair::piecewise(data.grid(), &phi, &psi)?;
    Ok((w, best))
}

/// Which weight candidates enter the inner infimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFamily {
    Constant,
    /// Constant and remark weights.
    Remark,
    /// Constant and optimized piecewise-constant weights.
    Piecewise,
    /// All of the above.
    All,
}

impl WeightFamily {
    pub fn has_remark(&self) -> bool {
        matches!(self, WeightFamily::Remark | WeightFamily::All)
    }

    pub fn has_pieces(&self) -> bool {
        matches!(self, WeightFamily::Piecewise | WeightFamily::All)
    }
}

impl std::str::FromStr for WeightFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "remark" => Ok(Self::Remark),
            "piecewise" => Ok(Self::Piecewise),
            "all" => Ok(Self::All),
            _ => Err(Error::Domain(format!("unknown weight family '{s}'"))),
        }
    }
}

/// Default number of pieces of the circle grids and of piecewise weights.
pub const DEFAULT_PIECES: usize = 64;

fn default_pieces() -> usize {
    DEFAULT_PIECES
}

/// Circles and weight candidates of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub circles: Vec<CircleSpec>,
    pub family: WeightFamily,
    /// Minimum number of pieces of each circle grid; piecewise weights
    /// take one value per piece. Shared by every family so that all
    /// quantities of one configuration use the same quadrature.
    #[serde(default = "default_pieces")]
    pub pieces: usize,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl SweepConfig {
    pub fn new(circles: Vec<CircleSpec>, family: WeightFamily) -> Result<Self> {
        let cfg = Self {
            circles,
            family,
            pieces: DEFAULT_PIECES,
            optimizer: OptimizerSettings::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.circles.is_empty() {
            return Err(Error::EmptyCircleSet);
        }
        if self.pieces == 0 {
            return Err(Error::Domain(
                "weight family needs at least one piece".into(),
            ));
        }
        if let Some(c) = self.circles.iter().find(|c| !c.inside_disk(1.0)) {
            return Err(Error::Domain(format!(
                "circle at {} with radius {} leaves the unit disk",
                c.center, c.radius
            )));
        }
        Ok(())
    }

    /// Every combination of the given centers and radii.
    pub fn from_centers_radii(
        centers: &[Complex64],
        radii: &[f64],
        nodes: usize,
        family: WeightFamily,
    ) -> Result<Self> {
        let mut circles = Vec::with_capacity(centers.len() * radii.len());
        for &c in centers {
            for &r in radii {
                circles.push(CircleSpec::new(c, r, nodes)?);
            }
        }
        Self::new(circles, family)
    }

    pub fn origin_centered(radii: &[f64], nodes: usize, family: WeightFamily) -> Result<Self> {
        Self::from_centers_radii(&[Complex64::new(0.0, 0.0)], radii, nodes, family)
    }

    /// One origin circle plus centers at 5 radii × 8 angles, each circle
    /// keeping a 5% margin to the unit circle.
    pub fn polar_lattice(nodes: usize, family: WeightFamily) -> Result<Self> {
        let mut circles = vec![CircleSpec::origin(0.5, nodes)?];
        for &r0 in &[0.15, 0.3, 0.45, 0.6, 0.75] {
            for k in 0..8 {
                let c = Complex64::from_polar(r0, PI / 4.0 * k as f64 + PI / 8.0);
                circles.push(CircleSpec::new(c, 0.95 * (1.0 - r0), nodes)?);
            }
        }
        Self::new(circles, family)
    }

    pub fn with_pieces(mut self, pieces: usize) -> Self {
        self.pieces = pieces;
        self
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerSettings) -> Self {
        self.optimizer = optimizer;
        self
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self::polar_lattice(DEFAULT_NODES, WeightFamily::All).expect("default lattice is valid")
    }
}

/// Inner infimum on one circle.
#[derive(Debug, Clone, Serialize)]
pub struct CircleValue {
    pub circle: CircleSpec,
    pub value: f64,
    pub constant: f64,
    pub remark: Option<f64>,
    pub optimized: Option<f64>,
    pub best: WeightKind,
    pub sweeps: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub nodes: usize,
    pub family: WeightFamily,
    pub pieces: usize,
    pub starts: usize,
    pub circles: usize,
    pub distinct_circles: usize,
    pub sweeps: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentReport {
    /// Which functional was evaluated, e.g. `"beta"` or `"gamma"`.
    pub quantity: String,
    /// `min(1, 1/sup_inf)`.
    pub bound: f64,
    /// Largest inner infimum over the circles.
    pub sup_inf: f64,
    /// True when `sup_inf < 1` and the bound was capped at 1.
    pub clamped: bool,
    pub attaining_circle: CircleSpec,
    pub attaining_weights: WeightPair,
    pub per_circle_values: Vec<CircleValue>,
    /// Bound from constant weights alone.
    pub constant_bound: f64,
    /// Bound from remark weights alone, when they are in the family.
    pub remark_bound: Option<f64>,
    pub diagnostics: Diagnostics,
}

fn reciprocal_bound(sup: f64) -> (f64, bool) {
    if sup < 1.0 {
        (1.0, true)
    } else {
        (1.0 / sup, false)
    }
}

struct Outcome {
    value: CircleValue,
    weights: WeightPair,
}

fn evaluate_circle(data: &CircleData, cfg: &SweepConfig, seed: u64) -> Result<Outcome> {
    let unit = WeightPair::constant(data.grid());
    let constant = objective(data, &unit)?;
    let mut best = (constant, unit);
    let mut remark = None;
    if cfg.family.has_remark() {
        let w = remark_from_data(data)?;
        let v = objective(data, &w)?;
        remark = Some(v);
        if v < best.0 {
            best = (v, w);
        }
    }
    let (mut optimized, mut sweeps, mut evaluations) = (None, 0, 0);
    if cfg.family.has_pieces() {
        let (w, opt) = optimize_pieces(data, &cfg.optimizer, seed)?;
        let v = objective(data, &w)?;
        optimized = Some(v);
        sweeps = opt.sweeps;
        evaluations = opt.evaluations;
        if v < best.0 {
            best = (v, w);
        }
    }
    Ok(Outcome {
        value: CircleValue {
            circle: data.circle,
            value: best.0,
            constant,
            remark,
            optimized,
            best: best.1.kind,
            sweeps,
            evaluations,
        },
        weights: best.1,
    })
}

/// Runs the per-circle evaluation over the sweep. Origin-centered circles
/// of an angular-only field differ only in radius and are computed once.
fn sweep<F>(
    quantity: &str,
    cfg: &SweepConfig,
    angular_only: bool,
    data: F,
) -> Result<ExponentReport>
where
    F: Fn(&CircleSpec) -> Result<CircleData> + Sync,
{
    cfg.validate()?;
    let mut slot = Vec::with_capacity(cfg.circles.len());
    let mut unique: Vec<usize> = Vec::new();
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (i, c) in cfg.circles.iter().enumerate() {
        if angular_only && c.is_origin_centered() {
            if let Some(&u) = seen.get(&c.resolution) {
                slot.push(u);
                continue;
            }
            seen.insert(c.resolution, unique.len());
        }
        slot.push(unique.len());
        unique.push(i);
    }
    let outcomes: Vec<Outcome> = unique
        .par_iter()
        .enumerate()
        .map(|(u, &i)| {
            let d = data(&cfg.circles[i])?;
            let seed = cfg.optimizer.seed ^ (u as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            evaluate_circle(&d, cfg, seed)
        })
        .collect::<Result<_>>()?;

    let per_circle: Vec<CircleValue> = cfg
        .circles
        .iter()
        .zip(&slot)
        .map(|(c, &u)| CircleValue {
            circle: *c,
            ..outcomes[u].value.clone()
        })
        .collect();
    let arg = (0..per_circle.len())
        .max_by(|&a, &b| per_circle[a].value.total_cmp(&per_circle[b].value))
        .ok_or(Error::EmptyCircleSet)?;
    let sup = per_circle[arg].value;
    let (bound, clamped) = reciprocal_bound(sup);
    let csup = per_circle
        .iter()
        .map(|c| c.constant)
        .fold(f64::NEG_INFINITY, f64::max);
    let remark_bound = if cfg.family.has_remark() {
        let r = per_circle
            .iter()
            .filter_map(|c| c.remark)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(reciprocal_bound(r).0)
    } else {
        None
    };
    Ok(ExponentReport {
        quantity: quantity.to_string(),
        bound,
        sup_inf: sup,
        clamped,
        attaining_circle: cfg.circles[arg],
        attaining_weights: outcomes[slot[arg]].weights.clone(),
        constant_bound: reciprocal_bound(csup).0,
        remark_bound,
        diagnostics: Diagnostics {
            nodes: cfg.circles.iter().map(|c| c.resolution).max().unwrap_or(0),
            family: cfg.family,
            pieces: cfg.pieces,
            starts: if cfg.family.has_pieces() {
                cfg.optimizer.starts
            } else {
                0
            },
            circles: cfg.circles.len(),
            distinct_circles: unique.len(),
            sweeps: outcomes.iter().map(|o| o.value.sweeps).sum(),
            evaluations: outcomes.iter().map(|o| o.value.evaluations).sum(),
        },
        per_circle_values: per_circle,
    })
}

/// Sampling grid of `circle` shared by every quantity of one sweep.
pub fn circle_grid(circle: &CircleSpec, breakpoints: &[f64], pieces: usize) -> Result<AngularGrid> {
    circle.grid(breakpoints, pieces)
}

pub fn pair_circle_data(
    pair: &BeltramiPair,
    circle: &CircleSpec,
    pieces: usize,
) -> Result<CircleData> {
    let grid = circle_grid(circle, &pair.angular_breakpoints(), pieces)?;
    CircleData::from_pair(&restrict_pair_on_grid(pair, circle, &grid)?)
}

pub fn matrix_circle_data(
    a: &MatrixField,
    circle: &CircleSpec,
    pieces: usize,
) -> Result<CircleData> {
    let grid = circle_grid(circle, &a.angular_breakpoints(), pieces)?;
    CircleData::from_matrix(&restrict_matrix_on_grid(a, circle, &grid)?)
}

fn require_real_nu(pair: &BeltramiPair) -> Result<()> {
    if pair.real_nu() || pair.nu().is_real() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "the exponent estimate requires real nu".into(),
        ))
    }
}

/// Estimate of `γ(A)` for a symmetric positive definite field.
pub fn gamma_estimate(a: &MatrixField, cfg: &SweepConfig) -> Result<ExponentReport> {
    if !a.is_symmetric() {
        return Err(Error::Unsupported(
            "gamma estimate requires a symmetric matrix field".into(),
        ));
    }
    sweep("gamma", cfg, a.is_angular_only(), |c| {
        matrix_circle_data(a, c, cfg.pieces)
    })
}

/// Estimate of `β(μ, ν)` for real `ν`.
pub fn beta_estimate(pair: &BeltramiPair, cfg: &SweepConfig) -> Result<ExponentReport> {
    require_real_nu(pair)?;
    sweep("beta", cfg, pair.is_angular_only(), |c| {
        pair_circle_data(pair, c, cfg.pieces)
    })
}

/// The bound with `φ = ψ = 1`.
pub fn corollary_bound(pair: &BeltramiPair, cfg: &SweepConfig) -> Result<f64> {
    require_real_nu(pair)?;
    cfg.validate()?;
    let sup = cfg
        .circles
        .par_iter()
        .map(|c| {
            let d = pair_circle_data(pair, c, cfg.pieces)?;
            objective(&d, &WeightPair::constant(d.grid()))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(reciprocal_bound(sup).0)
}

/// Reciprocal of the largest circle mean of `|1 - n̄²μ|² / (1 - |μ|²)`.
/// Requires `ν ≡ 0`.
pub fn nu_zero_bound(pair: &BeltramiPair, cfg: &SweepConfig) -> Result<f64> {
    if !pair.nu().is_zero() {
        return Err(Error::Unsupported("nu must vanish identically".into()));
    }
    cfg.validate()?;
    let one = Complex64::new(1.0, 0.0);
    let sup = cfg
        .circles
        .par_iter()
        .map(|c| {
            let grid = circle_grid(c, &pair.angular_breakpoints(), cfg.pieces)?;
            let cp = restrict_pair_on_grid(pair, c, &grid)?;
            let f = cp.normal.zip_map(&cp.mu, |n, mu| {
                (one - n.conj() * n.conj() * mu).norm_sqr() / (1.0 - mu.norm_sqr())
            })?;
            f.check_finite()?;
            Ok(f.mean())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(reciprocal_bound(sup).0)
}

/// Largest over circles of `(4/π) arctan(sqrt(inf h / sup h))` with
/// `h = (1 - ν)/(1 + ν)`. Requires `μ ≡ 0` and real `ν`.
pub fn mu_zero_bound(pair: &BeltramiPair, cfg: &SweepConfig) -> Result<f64> {
    if !pair.mu().is_zero() {
        return Err(Error::Unsupported("mu must vanish identically".into()));
    }
    require_real_nu(pair)?;
    cfg.validate()?;
    let values = cfg
        .circles
        .par_iter()
        .map(|c| {
            let grid = circle_grid(c, &pair.angular_breakpoints(), cfg.pieces)?;
            let cp = restrict_pair_on_grid(pair, c, &grid)?;
            let h = cp.nu.map(|v| (1.0 - v.re) / (1.0 + v.re));
            h.check_finite()?;
            Ok(4.0 / PI * (h.min() / h.max()).sqrt().atan())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `(1 - s)/(1 + s)` with `s = sup(|μ| + |ν|)`, the reciprocal of the
/// largest distortion.
pub fn classical_bound(pair: &BeltramiPair) -> Result<f64> {
    let s = match pair.sup_modulus_sum() {
        Some(s) => s,
        None => sampled_modulus_sum(pair)?,
    };
    if !(s < 1.0) {
        return Err(Error::Ellipticity {
            location: Complex64::new(f64::NAN, f64::NAN),
            modulus_sum: s,
            margin: pair.kappa(),
        });
    }
    Ok((1.0 - s) / (1.0 + s))
}

fn sampled_modulus_sum(pair: &BeltramiPair) -> Result<f64> {
    let mut s: f64 = 0.0;
    for i in 0..64 {
        let r = (i as f64 + 0.5) / 64.0;
        for k in 0..256 {
            let z = Complex64::from_polar(r, 2.0 * PI * k as f64 / 256.0);
            let (mu, nu) = pair.eval(z, None)?;
            s = s.max(mu.norm() + nu.norm());
        }
    }
    Ok(s)
}
