//! Independent checks of computed maps: pointwise Beltrami residuals,
//! discrete weak-form residuals of `div(A∇u) = 0`, and a fitted Hölder
//! exponent at the origin.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::periodic::{normalize_angle, AngularGrid, TWO_PI};
use crate::reduction::{BeltramiPair, MatrixField};
use crate::stretching::AngularStretching;

/// Tensor grid of geometric radii and angular nodes; the origin is never a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub radii: Vec<f64>,
    pub angles: AngularGrid,
    /// `(center, half width)` of arcs skipped by pointwise residuals.
    pub excluded_arcs: Vec<(f64, f64)>,
}

impl PolarGrid {
    /// `n_radii` radii in geometric progression from `r_min` to `r_max`.
    /// Arcs around the breakpoints of `angles` are excluded.
    pub fn geometric(r_min: f64, r_max: f64, n_radii: usize, angles: AngularGrid) -> Result<Self> {
        if !(r_min > 0.0 && r_min < r_max && r_max <= 1.0) {
            return Err(Error::Domain(format!(
                "radii must satisfy 0 < {r_min} < {r_max} <= 1"
            )));
        }
        if n_radii < 2 {
            return Err(Error::GridTooCoarse(format!("{n_radii} radii")));
        }
        let q = (r_max / r_min).ln() / (n_radii - 1) as f64;
        let mut radii: Vec<f64> = (0..n_radii).map(|i| r_min * (q * i as f64).exp()).collect();
        radii[n_radii - 1] = r_max;
        let half = 0.5
            * angles
                .pieces()
                .iter()
                .map(|p| p.step())
                .fold(f64::INFINITY, f64::min);
        let excluded_arcs = angles
            .breakpoints()
            .into_iter()
            .map(|b| (b, half))
            .collect();
        Ok(Self {
            radii,
            angles,
            excluded_arcs,
        })
    }

    /// Radii `2⁻¹, 2⁻², …, 2⁻ˡᵉᵛᵉˡˢ`, largest first.
    pub fn dyadic(levels: usize, angles: AngularGrid) -> Result<Self> {
        if levels < 1 {
            return Err(Error::GridTooCoarse("no dyadic scales".into()));
        }
        Ok(Self {
            radii: (1..=levels).map(|k| 0.5f64.powi(k as i32)).collect(),
            angles,
            excluded_arcs: Vec::new(),
        })
    }

    /// Twice the angular resolution and `2n - 1` radii, nested in the original.
    pub fn refined(&self) -> Self {
        let mut radii = Vec::with_capacity(2 * self.radii.len() - 1);
        for w in self.radii.windows(2) {
            radii.push(w[0]);
            radii.push((w[0] * w[1]).sqrt());
        }
        radii.push(*self.radii.last().unwrap());
        let angles = self.angles.refined(2);
        let half = 0.5
            * angles
                .pieces()
                .iter()
                .map(|p| p.step())
                .fold(f64::INFINITY, f64::min);
        Self {
            radii,
            excluded_arcs: self.excluded_arcs.iter().map(|&(c, _)| (c, half)).collect(),
            angles,
        }
    }

    pub fn is_excluded(&self, theta: f64) -> bool {
        self.excluded_arcs.iter().any(|&(c, h)| {
            let d = normalize_angle(theta - c);
            d.min(TWO_PI - d) < h
        })
    }

    /// Angular step used to report convergence.
    pub fn spacing(&self) -> f64 {
        self.angles
            .pieces()
            .iter()
            .map(|p| p.step())
            .fold(0.0, f64::max)
    }
}

/// Values at every `(radius, angular node)` of a [`PolarGrid`];
/// `values[i][k]` belongs to `radii[i]` and `angles.nodes()[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarSamples<T> {
    pub grid: PolarGrid,
    pub values: Vec<Vec<T>>,
}

impl<T: Copy + Send + Sync> PolarSamples<T> {
    pub fn from_fn(grid: &PolarGrid, f: impl Fn(Complex64) -> T + Sync) -> Self {
        let nodes = grid.angles.nodes();
        let values = grid
            .radii
            .par_iter()
            .map(|&r| {
                nodes
                    .iter()
                    .map(|&t| f(Complex64::from_polar(r, t)))
                    .collect()
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn try_from_fn(
        grid: &PolarGrid,
        f: impl Fn(Complex64) -> Result<T> + Sync,
    ) -> Result<Self> {
        let nodes = grid.angles.nodes();
        let values = grid
            .radii
            .par_iter()
            .map(|&r| {
                nodes
                    .iter()
                    .map(|&t| f(Complex64::from_polar(r, t)))
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn map<U: Copy + Send + Sync>(&self, f: impl Fn(T) -> U) -> PolarSamples<U> {
        PolarSamples {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub angular_nodes: usize,
    pub radii: usize,
    /// Number of residual entries that entered the statistics.
    pub evaluated: usize,
    /// Log-log slope of `max_residual` against the mesh size, when a
    /// refinement sequence was run.
    pub slope: Option<f64>,
    /// Same slope for `mean_residual`.
    pub mean_slope: Option<f64>,
    pub warnings: Vec<String>,
}

impl ResidualReport {
    fn from_values(values: &[f64], grid: &PolarGrid, warnings: Vec<String>) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        Self {
            max_residual: max,
            mean_residual: mean,
            angular_nodes: grid.angles.node_count(),
            radii: grid.radii.len(),
            evaluated: values.len(),
            slope: None,
            mean_slope: None,
            warnings,
        }
    }
}

fn check_resolution(grid: &PolarGrid, min_radii: usize) -> Result<()> {
    if grid.angles.pieces().iter().any(|p| p.intervals < 2) {
        return Err(Error::GridTooCoarse(
            "fewer than 3 nodes on an angular piece".into(),
        ));
    }
    if grid.radii.len() < min_radii {
        return Err(Error::GridTooCoarse(format!(
            "{} radii, need {min_radii}",
            grid.radii.len()
        )));
    }
    Ok(())
}

fn relative_residual(
    pair: &BeltramiPair,
    z: Complex64,
    dz: Complex64,
    dzbar: Complex64,
) -> Result<f64> {
    let (mu, nu) = pair.eval(z, Some(crate::periodic::arg(z)))?;
    let res = (dzbar - mu * dz - nu * dz.conj()).norm();
    let scale = dz.norm() + dzbar.norm();
    Ok(if scale > 0.0 { res / scale } else { res })
}

/// `(∂f, ∂̄f)` from the polar derivatives at `r e^{iθ}`.
fn wirtinger(theta: f64, r: f64, fr: Complex64, ft: Complex64) -> (Complex64, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    let e = Complex64::from_polar(0.5, theta);
    (e.conj() * (fr - i * ft / r), e * (fr + i * ft / r))
}

/// Relative residual `|∂̄f - μ∂f - ν conj(∂f)| / (|∂f| + |∂̄f|)` from
/// finite differences of the samples (second order in `ln r` and `θ`),
/// at interior radii and outside the excluded arcs.
pub fn beltrami_residual(
    samples: &PolarSamples<Complex64>,
    pair: &BeltramiPair,
) -> Result<ResidualReport> {
    let grid = &samples.grid;
    check_resolution(grid, 3)?;
    let nodes = grid.angles.nodes();
    let n = nodes.len();
    let rows: Vec<Vec<f64>> = (1..grid.radii.len() - 1)
        .into_par_iter()
        .map(|i| {
            let r = grid.radii[i];
            let (hm, hp) = ((r / grid.radii[i - 1]).ln(), (grid.radii[i + 1] / r).ln());
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let t = nodes[k];
                if grid.is_excluded(t) {
                    continue;
                }
                let (km, kp) = ((k + n - 1) % n, (k + 1) % n);
                let am = normalize_angle(t - nodes[km]);
                let ap = normalize_angle(nodes[kp] - t);
                let v = &samples.values;
                // r ∂_r f = ∂_{ln r} f
                let fr = three_point(v[i - 1][k], v[i][k], v[i + 1][k], hm, hp) / r;
                let ft = three_point(v[i][km], v[i][k], v[i][kp], am, ap);
                let (dz, dzbar) = wirtinger(t, r, fr, ft);
                out.push(relative_residual(
                    pair,
                    Complex64::from_polar(r, t),
                    dz,
                    dzbar,
                )?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let all: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(ResidualReport::from_values(&all, grid, Vec::new()))
}

fn three_point(fm: Complex64, f0: Complex64, fp: Complex64, hm: f64, hp: f64) -> Complex64 {
    fm * (-hp / (hm * (hm + hp))) + f0 * ((hp - hm) / (hm * hp)) + fp * (hm / (hp * (hm + hp)))
}

/// Same residual with the closed-form derivatives of `|z|^α η(arg z)`.
pub fn beltrami_residual_exact(
    map: &AngularStretching,
    pair: &BeltramiPair,
    grid: &PolarGrid,
) -> Result<ResidualReport> {
    check_resolution(grid, 1)?;
    let nodes = grid.angles.nodes();
    let a = map.alpha();
    let rows: Vec<Vec<f64>> = grid
        .radii
        .par_iter()
        .map(|&r| {
            let mut out = Vec::with_capacity(nodes.len());
            for &t in &nodes {
                if grid.is_excluded(t) {
                    continue;
                }
                let e = map.profile_at(t);
                let ra = r.powf(a);
                let fr = Complex64::new(e[0], e[1]) * (a * ra / r);
                let ft = Complex64::new(e[2], e[3]) * ra;
                let (dz, dzbar) = wirtinger(t, r, fr, ft);
                out.push(relative_residual(
                    pair,
                    Complex64::from_polar(r, t),
                    dz,
                    dzbar,
                )?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let all: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(ResidualReport::from_values(&all, grid, Vec::new()))
}

/// Assembled weak residual of `div(A∇u) = 0` for the piecewise-linear
/// interpolant of `u` on the triangulated annulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidual {
    /// `∫ A∇u_h·∇w_i` for every interior node, ring by ring.
    pub vector: Vec<f64>,
    /// `(∫_{supp w_i} |A∇u_h|) / (3 r_i)`: the size `∫ w_i · |A∇u|/r` the
    /// entry would have if `u` were not a solution.
    pub scale: Vec<f64>,
    pub report: ResidualReport,
}

fn grad_p1(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let two_a =
        (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        g[a] = [(p[b][1] - p[c][1]) / two_a, (p[c][0] - p[b][0]) / two_a];
    }
    (g, 0.5 * two_a.abs())
}

/// Residual of `u` against `A` with piecewise-linear hat functions on the
/// polar mesh (each cell split into two triangles). Test functions vanish on
/// the inner and outer circles, so only interior rings are reported.
pub fn weak_form_residual(u: &PolarSamples<f64>, a: &MatrixField) -> Result<WeakResidual> {
    let grid = &u.grid;
    check_resolution(grid, 3)?;
    let mut warnings = Vec::new();
    for b in a.angular_breakpoints() {
        if !grid.angles.has_node_at(b, 1e-12) {
            warnings.push(format!("coefficient breakpoint {b} is not a mesh angle"));
        }
    }
    let nodes = grid.angles.nodes();
    let n = nodes.len();
    let nr = grid.radii.len();
    // ring i holds the cells between radii i and i+1
    let rings: Vec<(Vec<f64>, Vec<f64>)> = (0..nr - 1)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; 2 * n];
            let mut abs = vec![0.0; 2 * n];
            let pt = |ii: usize, k: usize| {
                let z = Complex64::from_polar(grid.radii[ii], nodes[k]);
                [z.re, z.im]
            };
            for k in 0..n {
                let kp = (k + 1) % n;
                // (ring offset, angular index) of each vertex
                let tris = [[(0, k), (1, k), (1, kp)], [(0, k), (1, kp), (0, kp)]];
                for tri in tris {
                    let p = tri.map(|(o, kk)| pt(i + o, kk));
                    let (g, area) = grad_p1(p);
                    let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
                    let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
                    let c = Complex64::new(cx, cy);
                    let m = a.eval(c, Some(crate::periodic::arg(c)))?;
                    let mut gu = [0.0; 2];
                    for (v, &(o, kk)) in tri.iter().enumerate() {
                        let val = u.values[i + o][kk];
                        gu[0] += val * g[v][0];
                        gu[1] += val * g[v][1];
                    }
                    let flux = m.apply(gu);
                    let size = area * flux[0].hypot(flux[1]);
                    for (v, &(o, kk)) in tri.iter().enumerate() {
                        acc[o * n + kk] += area * (flux[0] * g[v][0] + flux[1] * g[v][1]);
                        abs[o * n + kk] += size;
                    }
                }
            }
            Ok((acc, abs))
        })
        .collect::<Result<_>>()?;
    let mut vector = vec![0.0; (nr - 2) * n];
    let mut scale = vec![0.0; (nr - 2) * n];
    for (i, (acc, abs)) in rings.iter().enumerate() {
        for o in 0..2 {
            let ring = i + o;
            if ring == 0 || ring == nr - 1 {
                continue;
            }
            for k in 0..n {
                vector[(ring - 1) * n + k] += acc[o * n + k];
                scale[(ring - 1) * n + k] += abs[o * n + k] / (3.0 * grid.radii[ring]);
            }
        }
    }
    let rel: Vec<f64> = vector
        .iter()
        .zip(&scale)
        .map(|(v, s)| if *s > 0.0 { v.abs() / s } else { v.abs() })
        .collect();
    let report = ResidualReport::from_values(&rel, grid, warnings);
    Ok(WeakResidual {
        vector,
        scale,
        report,
    })
}

/// Least-squares slope of `ln(max_residual)` against `ln(spacing)`.
pub fn convergence_slope(reports: &[(f64, ResidualReport)]) -> Option<f64> {
    slope_of(reports, |r| r.max_residual)
}

fn slope_of(
    reports: &[(f64, ResidualReport)],
    pick: impl Fn(&ResidualReport) -> f64,
) -> Option<f64> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|(_, r)| pick(r) > 0.0)
        .map(|(h, r)| (h.ln(), pick(r).ln()))
        .collect();
    linear_fit(&pts).map(|f| f.0)
}

/// Runs `residual` on `levels` successively refined grids and returns the
/// finest report with the fitted slope.
pub fn refinement_study(
    base: &PolarGrid,
    levels: usize,
    residual: impl Fn(&PolarGrid) -> Result<ResidualReport>,
) -> Result<(ResidualReport, Vec<ResidualReport>)> {
    let mut grid = base.clone();
    let mut all = Vec::with_capacity(levels);
    for l in 0..levels.max(1) {
        if l > 0 {
            grid = grid.refined();
        }
        all.push((grid.spacing(), residual(&grid)?));
    }
    let slope = convergence_slope(&all);
    let mut finest = all.last().unwrap().1.clone();
    finest.slope = slope;
    finest.mean_slope = slope_of(&all, |r| r.mean_residual);
    Ok((finest, all.into_iter().map(|(_, r)| r).collect()))
}

/// `(slope, intercept, R²)` of an ordinary least-squares line.
fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some((slope, my - slope * mx, r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub scales: usize,
}

/// Fits `ln max_θ |f(r e^{iθ})| = α ln r + c` over the sampled radii, taking
/// `f(0) = 0`.
pub fn empirical_holder(samples: &PolarSamples<Complex64>) -> Result<HolderFit> {
    let radii = &samples.grid.radii;
    if radii.len() < 4 {
        return Err(Error::GridTooCoarse(format!(
            "{} scales, need 4",
            radii.len()
        )));
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&samples.values)
        .map(|(&r, row)| {
            (
                r.ln(),
                row.iter().map(|v| v.norm()).fold(0.0, f64::max).ln(),
            )
        })
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Domain("map vanishes on a whole circle".into()));
    }
    let (exponent, intercept, r_squared) =
        linear_fit(&pts).ok_or_else(|| Error::Inconsistent("degenerate radii".into()))?;
    Ok(HolderFit {
        exponent,
        intercept,
        r_squared,
        scales: radii.len(),
    })
}
