//! Angular stretchings `f(z) = |z|^α (η₁ + iη₂)(arg z)` and the linear system
//! `η̇₁ = -α η₂ / k₂`, `η̇₂ = α k₁ η₁` they satisfy.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{merge_breakpoints, AngularProfile};
use crate::linalg::Mat2;
use crate::periodic::{
    arg, normalize_angle, AngularGrid, FieldKind, PeriodicField, DEFAULT_NODES, TWO_PI,
};

/// Samples used to bound smooth k-profiles.
const PROFILE_BOUND_SAMPLES: usize = 4096;

/// Pointwise `(k₁, k₂)` from `(μ₀, ν₀)`.
pub fn k_pair_from_munu(mu0: f64, nu0: f64) -> Result<(f64, f64)> {
    let s = mu0.abs() + nu0.abs();
    if !(s < 1.0) {
        return Err(Error::Ellipticity {
            location: Complex64::new(f64::NAN, f64::NAN),
            modulus_sum: s,
            margin: 1.0,
        });
    }
    let k1 = (1.0 + mu0 + nu0) / (1.0 - mu0 - nu0);
    let k2 = (1.0 - mu0 + nu0) / (1.0 + mu0 - nu0);
    Ok((k1, k2))
}

/// Pointwise `(μ₀, ν₀)` from `(k₁, k₂)`.
pub fn munu_pair_from_k(k1: f64, k2: f64) -> Result<(f64, f64)> {
    if !(k1 > 0.0 && k2 > 0.0 && k1.is_finite() && k2.is_finite()) {
        return Err(Error::Domain(format!(
            "k-profile values ({k1}, {k2}) must be positive and finite"
        )));
    }
    let den = (1.0 + k1) * (1.0 + k2);
    Ok(((k1 - k2) / den, (k1 * k2 - 1.0) / den))
}

/// Positive, bounded pair `(k₁, k₂)` of periodic profiles.
#[derive(Debug, Clone)]
pub struct KProfile {
    k1: AngularProfile,
    k2: AngularProfile,
    lower: f64,
    upper: f64,
}

impl KProfile {
    pub fn new(k1: AngularProfile, k2: AngularProfile) -> Result<Self> {
        let (lo1, hi1) = profile_bounds(&k1);
        let (lo2, hi2) = profile_bounds(&k2);
        let lower = lo1.min(lo2);
        let upper = hi1.max(hi2);
        if !(lower > 0.0) || !upper.is_finite() {
            return Err(Error::Domain(format!(
                "k-profile range [{lower}, {upper}] is not positive and bounded"
            )));
        }
        Ok(Self {
            k1,
            k2,
            lower,
            upper,
        })
    }

    pub fn constant(k1: f64, k2: f64) -> Result<Self> {
        Self::new(AngularProfile::constant(k1), AngularProfile::constant(k2))
    }

    pub fn k1(&self) -> &AngularProfile {
        &self.k1
    }

    pub fn k2(&self) -> &AngularProfile {
        &self.k2
    }

    /// Lower bound over both profiles.
    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn eval(&self, theta: f64) -> (f64, f64) {
        (self.k1.eval(theta), self.k2.eval(theta))
    }

    pub fn is_piecewise(&self) -> bool {
        self.k1.is_piecewise() && self.k2.is_piecewise()
    }

    /// Jump angles of both profiles together with 0.
    pub fn partition(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.k1.breakpoints());
        b.extend(self.k2.breakpoints());
        merge_breakpoints(&b)
    }

    /// `k₁ k₂ ≡ 1`, the case `ν = 0`.
    pub fn is_nu_zero(&self, tol: f64) -> bool {
        let prod = AngularProfile::combine(&self.k1, &self.k2, |a, b| a * b);
        (prod.sup() - 1.0).abs() <= tol && (prod.inf() - 1.0).abs() <= tol
    }

    /// Samples of `(k₁, k₂)` on `grid`; piecewise profiles are evaluated at
    /// piece midpoints so each grid piece carries one-sided values.
    pub fn sampled(&self, grid: &AngularGrid) -> (PeriodicField<f64>, PeriodicField<f64>) {
        if self.is_piecewise() {
            let mids: Vec<(f64, f64)> = grid
                .pieces()
                .iter()
                .map(|p| self.eval(p.midpoint()))
                .collect();
            let k1 = PeriodicField::from_fn(grid, FieldKind::PiecewiseConstant, |j, _| mids[j].0);
            let k2 = PeriodicField::from_fn(grid, FieldKind::PiecewiseConstant, |j, _| mids[j].1);
            (k1, k2)
        } else {
            (
                PeriodicField::from_fn(grid, FieldKind::Smooth, |_, t| self.k1.eval(t)),
                PeriodicField::from_fn(grid, FieldKind::Smooth, |_, t| self.k2.eval(t)),
            )
        }
    }

    /// Constant pieces `[start, end)` covering `[0, 2π)` with their values.
    fn segments(&self) -> Vec<Segment> {
        let b = self.partition();
        (0..b.len())
            .map(|j| {
                let start = b[j];
                let end = if j + 1 < b.len() { b[j + 1] } else { TWO_PI };
                let (k1, k2) = self.eval(0.5 * (start + end));
                Segment { start, end, k1, k2 }
            })
            .collect()
    }
}

fn profile_bounds(p: &AngularProfile) -> (f64, f64) {
    if p.is_piecewise() {
        (p.inf(), p.sup())
    } else {
        (0..PROFILE_BOUND_SAMPLES)
            .map(|i| p.eval(TWO_PI * i as f64 / PROFILE_BOUND_SAMPLES as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// `k₁ = (1+μ₀+ν₀)/(1-μ₀-ν₀)`, `k₂ = (1-μ₀+ν₀)/(1+μ₀-ν₀)`.
pub fn k_from_munu(mu0: &AngularProfile, nu0: &AngularProfile) -> Result<KProfile> {
    let sum = AngularProfile::combine(mu0, nu0, |a, b| a.abs() + b.abs());
    let sup = if sum.is_piecewise() {
        sum.sup()
    } else {
        profile_bounds(&sum).1
    };
    if !(sup < 1.0) {
        return Err(Error::Ellipticity {
            location: Complex64::new(f64::NAN, f64::NAN),
            modulus_sum: sup,
            margin: 1.0,
        });
    }
    let k1 = AngularProfile::combine(mu0, nu0, |m, n| (1.0 + m + n) / (1.0 - m - n));
    let k2 = AngularProfile::combine(mu0, nu0, |m, n| (1.0 - m + n) / (1.0 + m - n));
    KProfile::new(k1, k2)
}

/// Inverse of [`k_from_munu`].
pub fn munu_from_k(k: &KProfile) -> Result<(AngularProfile, AngularProfile)> {
    let mu0 = AngularProfile::combine(&k.k1, &k.k2, |a, b| (a - b) / ((1.0 + a) * (1.0 + b)));
    let nu0 = AngularProfile::combine(&k.k1, &k.k2, |a, b| (a * b - 1.0) / ((1.0 + a) * (1.0 + b)));
    let sum = AngularProfile::combine(&mu0, &nu0, |a, b| a.abs() + b.abs());
    let sup = profile_bounds(&sum)
        .1
        .max(if sum.is_piecewise() { sum.sup() } else { 0.0 });
    if !(sup < 1.0) {
        return Err(Error::Ellipticity {
            location: Complex64::new(f64::NAN, f64::NAN),
            modulus_sum: sup,
            margin: 1.0,
        });
    }
    Ok((mu0, nu0))
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    end: f64,
    k1: f64,
    k2: f64,
}

/// Exact solution operator over a length `s` with constant `k₁, k₂`.
pub fn constant_propagator(alpha: f64, k1: f64, k2: f64, s: f64) -> Mat2 {
    let omega = alpha * (k1 / k2).sqrt();
    let sigma = (k1 * k2).sqrt();
    let (sn, cs) = (omega * s).sin_cos();
    Mat2::new(cs, -sn / sigma, sigma * sn, cs)
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TWO_PI) - PI;
    if y <= -PI {
        y + TWO_PI
    } else {
        y
    }
}

/// Lifted argument after a constant-coefficient step, starting from the
/// lifted argument `a0`. In the coordinates `(η₁, η₂/σ)` the step is a
/// rotation by `ω s`.
fn lifted_step(a0: f64, omega_s: f64, sigma: f64) -> f64 {
    let psi0 = a0 + wrap_pi((a0.sin() / sigma).atan2(a0.cos()) - a0);
    let psi1 = psi0 + omega_s;
    psi1 + wrap_pi((sigma * psi1.sin()).atan2(psi1.cos()) - psi1)
}

fn rhs(alpha: f64, k1: f64, k2: f64, v: [f64; 2]) -> [f64; 2] {
    [-alpha * v[1] / k2, alpha * k1 * v[0]]
}

fn rk4_step(k: &KProfile, alpha: f64, t: f64, h: f64, v: [f64; 2]) -> [f64; 2] {
    let f = |t: f64, v: [f64; 2]| {
        let (k1, k2) = k.eval(t);
        rhs(alpha, k1, k2, v)
    };
    let a = f(t, v);
    let b = f(t + 0.5 * h, [v[0] + 0.5 * h * a[0], v[1] + 0.5 * h * a[1]]);
    let c = f(t + 0.5 * h, [v[0] + 0.5 * h * b[0], v[1] + 0.5 * h * b[1]]);
    let d = f(t + h, [v[0] + h * c[0], v[1] + h * c[1]]);
    [
        v[0] + h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
        v[1] + h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
    ]
}

fn angle_of(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0])
}

/// Monodromy over `[0, 2π]` together with the lifted rotation of `e₁`.
#[derive(Debug, Clone, Copy)]
struct Transport {
    phi: Mat2,
    lift_e1: f64,
}

fn transport(k: &KProfile, alpha: f64, smooth_steps: usize) -> Transport {
    if k.is_piecewise() {
        let mut phi = Mat2::IDENTITY;
        let mut a = 0.0;
        for seg in k.segments() {
            let s = seg.end - seg.start;
            let p = constant_propagator(alpha, seg.k1, seg.k2, s);
            phi = p * phi;
            let omega = alpha * (seg.k1 / seg.k2).sqrt();
            a = lifted_step(a, omega * s, (seg.k1 * seg.k2).sqrt());
        }
        Transport { phi, lift_e1: a }
    } else {
        let n = smooth_steps.max(16);
        let h = TWO_PI / n as f64;
        let mut c1 = [1.0, 0.0];
        let mut c2 = [0.0, 1.0];
        let mut a = 0.0;
        for i in 0..n {
            let t = i as f64 * h;
            let next = rk4_step(k, alpha, t, h, c1);
            a += wrap_pi(angle_of(next) - angle_of(c1));
            c1 = next;
            c2 = rk4_step(k, alpha, t, h, c2);
        }
        Transport {
            phi: Mat2::new(c1[0], c2[0], c1[1], c2[1]),
            lift_e1: a,
        }
    }
}

/// Monodromy matrix `Φ(α)` of the system over one period.
pub fn monodromy(k: &KProfile, alpha: f64) -> Result<Mat2> {
    check_alpha(alpha)?;
    Ok(transport(k, alpha, 2 * DEFAULT_NODES).phi)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "exponent alpha = {alpha} must be positive"
        )));
    }
    Ok(())
}

/// `min` and `max` over initial directions of the lifted rotation of the
/// solution's argument over one period.
fn rotation_range(t: &Transport) -> (f64, f64) {
    let phi = t.phi;
    let base = angle_of(phi.apply([1.0, 0.0]));
    let g = |p: f64| {
        let w = phi.apply([p.cos(), p.sin()]);
        t.lift_e1 + (angle_of(w) - base).rem_euclid(TWO_PI) - p
    };
    let s = phi.transpose() * phi - Mat2::IDENTITY;
    let (p, q, r) = (s.a11, s.a12, s.a22);
    let mut cands: Vec<f64> = (0..32).map(|i| PI * i as f64 / 32.0).collect();
    cands.push(0.5 * PI);
    if r.abs() > 1e-300 {
        let disc = (q * q - p * r).max(0.0).sqrt();
        for t in [(-q + disc) / r, (-q - disc) / r] {
            cands.push(t.atan().rem_euclid(PI));
        }
    }
    cands.push((-p).atan2(2.0 * q).rem_euclid(PI));
    cands
        .into_iter()
        .filter(|c| c.is_finite())
        .map(g)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// Which side of the winding-`n` band a root lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandEdge {
    /// Smallest α admitting a periodic solution of winding `n`.
    Lower,
    /// Largest such α.
    Upper,
    /// Both edges coincide (for instance when `k₁ k₂ ≡ 1`).
    Both,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeriodicRoot {
    pub alpha: f64,
    pub branch: u32,
    pub edge: BandEdge,
    /// `tr Φ(α) - 2`.
    pub trace_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchSettings {
    pub alpha_max: f64,
    pub rel_tol: f64,
    /// RK4 steps per period for smooth profiles.
    pub smooth_steps: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            alpha_max: 1e3,
            rel_tol: 1e-15,
            smooth_steps: 2 * DEFAULT_NODES,
        }
    }
}

fn band_edge(k: &KProfile, branch: u32, upper: bool, settings: &SearchSettings) -> Result<f64> {
    if branch == 0 {
        return Err(Error::Domain("branch index starts at 1".into()));
    }
    let target = TWO_PI * branch as f64;
    let h = |alpha: f64| {
        let (lo, hi) = rotation_range(&transport(k, alpha, settings.smooth_steps));
        if upper {
            lo - target
        } else {
            hi - target
        }
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut fhi = h(hi);
    while fhi < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > settings.alpha_max {
            let rot = h(settings.alpha_max) + target;
            return Err(Error::RootNotBracketed {
                branch,
                alpha_max: settings.alpha_max,
                rotation: rot,
            });
        }
        fhi = h(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= settings.rel_tol * hi || mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest α for which the system has a 2π-periodic solution whose argument
/// winds `branch` times; at that α the monodromy has trace 2.
pub fn find_periodic_alpha(k: &KProfile, branch: u32) -> Result<f64> {
    find_periodic_alpha_with(k, branch, &SearchSettings::default())
}

pub fn find_periodic_alpha_with(
    k: &KProfile,
    branch: u32,
    settings: &SearchSettings,
) -> Result<f64> {
    band_edge(k, branch, false, settings)
}

/// All band edges for windings `1..=max_branch`, in increasing order.
pub fn periodic_alpha_roots(
    k: &KProfile,
    max_branch: u32,
    settings: &SearchSettings,
) -> Result<Vec<PeriodicRoot>> {
    let mut out = Vec::new();
    for n in 1..=max_branch {
        let lo = band_edge(k, n, false, settings)?;
        let hi = band_edge(k, n, true, settings)?;
        let trace = |a: f64| transport(k, a, settings.smooth_steps).phi.trace() - 2.0;
        if (hi - lo).abs() <= 1e-9 * hi.max(1.0) {
            out.push(PeriodicRoot {
                alpha: lo,
                branch: n,
                edge: BandEdge::Both,
                trace_residual: trace(lo),
            });
        } else {
            out.push(PeriodicRoot {
                alpha: lo,
                branch: n,
                edge: BandEdge::Lower,
                trace_residual: trace(lo),
            });
            out.push(PeriodicRoot {
                alpha: hi,
                branch: n,
                edge: BandEdge::Upper,
                trace_residual: trace(hi),
            });
        }
    }
    Ok(out)
}

/// Initial vector of a periodic solution at a root, scaled so that
/// `max(|η₁(0)|, |η₂(0)|) = 1`.
pub fn periodic_initial(k: &KProfile, alpha: f64) -> Result<[f64; 2]> {
    check_alpha(alpha)?;
    let phi = monodromy(k, alpha)?;
    let r1 = [phi.a11 - 1.0, phi.a12];
    let r2 = [phi.a21, phi.a22 - 1.0];
    let n1 = r1[0].hypot(r1[1]);
    let n2 = r2[0].hypot(r2[1]);
    let row = if n1 >= n2 { r1 } else { r2 };
    let mut v = if n1.max(n2) < 1e-12 {
        [1.0, 0.0]
    } else {
        [-row[1], row[0]]
    };
    let m = v[0].abs().max(v[1].abs());
    v = [v[0] / m, v[1] / m];
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    Ok(v)
}

/// Periodic solution on the given winding branch.
pub fn periodic_stretching(k: &KProfile, branch: u32) -> Result<AngularStretching> {
    let alpha = find_periodic_alpha(k, branch)?;
    let init = periodic_initial(k, alpha)?;
    solve_system(k, alpha, init)
}

/// Profile values `[η₁, η₂, η̇₁, η̇₂]` at an angle.
pub type ProfileFn = Arc<dyn Fn(f64) -> [f64; 4] + Send + Sync>;

#[derive(Debug, Clone)]
struct ExactSegments {
    alpha: f64,
    segments: Vec<Segment>,
    states: Vec<[f64; 2]>,
}

impl ExactSegments {
    fn eval(&self, theta: f64) -> [f64; 4] {
        let t = normalize_angle(theta);
        let j = self
            .segments
            .iter()
            .rposition(|s| s.start <= t)
            .unwrap_or(0);
        let seg = &self.segments[j];
        let v =
            constant_propagator(self.alpha, seg.k1, seg.k2, t - seg.start).apply(self.states[j]);
        let d = rhs(self.alpha, seg.k1, seg.k2, v);
        [v[0], v[1], d[0], d[1]]
    }
}

#[derive(Clone)]
enum Source {
    Sampled,
    Segments(Arc<ExactSegments>),
    Closed(ProfileFn),
    /// Per-piece formula evaluated at `(piece, θ)` with `θ` inside the piece.
    Pieces(PieceFn, AngularGrid),
}

/// Profile values on grid piece `j` at an angle inside that piece.
pub type PieceFn = Arc<dyn Fn(usize, f64) -> [f64; 4] + Send + Sync>;

/// `f(z) = |z|^α (η₁(θ) + iη₂(θ))` with node samples of the profiles and
/// their derivatives.
#[derive(Clone)]
pub struct AngularStretching {
    alpha: f64,
    eta1: PeriodicField<f64>,
    eta2: PeriodicField<f64>,
    deta1: PeriodicField<f64>,
    deta2: PeriodicField<f64>,
    source: Source,
}

impl fmt::Debug for AngularStretching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match self.source {
            Source::Sampled => "sampled",
            Source::Segments(_) => "exact-piecewise",
            Source::Closed(_) | Source::Pieces(..) => "closed-form",
        };
        f.debug_struct("AngularStretching")
            .field("alpha", &self.alpha)
            .field("nodes", &self.eta1.grid().node_count())
            .field("source", &src)
            .finish()
    }
}

impl AngularStretching {
    /// Samples a closed-form profile; evaluation between nodes stays exact.
    pub fn from_closed_form(
        alpha: f64,
        grid: &AngularGrid,
        f: impl Fn(f64) -> [f64; 4] + Send + Sync + 'static,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let f: ProfileFn = Arc::new(f);
        let mut s = Self::sample_with(alpha, grid, &|_, t| f(t))?;
        s.source = Source::Closed(f);
        Ok(s)
    }

    /// Closed form given piece by piece, so that piece end points carry the
    /// one-sided values of their own piece.
    pub fn from_piece_formula(
        alpha: f64,
        grid: &AngularGrid,
        f: impl Fn(usize, f64) -> [f64; 4] + Send + Sync + 'static,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let f: PieceFn = Arc::new(f);
        let mut s = Self::sample_with(alpha, grid, &|j, t| f(j, t))?;
        s.source = Source::Pieces(f, grid.clone());
        Ok(s)
    }

    /// Node samples only; evaluation between nodes is linear.
    pub fn from_samples(
        alpha: f64,
        eta1: PeriodicField<f64>,
        eta2: PeriodicField<f64>,
        deta1: PeriodicField<f64>,
        deta2: PeriodicField<f64>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        for f in [&eta2, &deta1, &deta2] {
            if f.grid() != eta1.grid() {
                return Err(Error::InvalidGrid(
                    "profile samples on different grids".into(),
                ));
            }
        }
        for f in [&eta1, &eta2, &deta1, &deta2] {
            if let Some(i) = f.first_non_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(Self {
            alpha,
            eta1,
            eta2,
            deta1,
            deta2,
            source: Source::Sampled,
        })
    }

    fn sample_with(
        alpha: f64,
        grid: &AngularGrid,
        f: &dyn Fn(usize, f64) -> [f64; 4],
    ) -> Result<Self> {
        let mut vals: [Vec<Vec<f64>>; 4] = Default::default();
        for (j, p) in grid.pieces().iter().enumerate() {
            let mut cols: [Vec<f64>; 4] = Default::default();
            for i in 0..=p.intervals {
                let e = f(j, p.node(i));
                for c in 0..4 {
                    cols[c].push(e[c]);
                }
            }
            for c in 0..4 {
                vals[c].push(std::mem::take(&mut cols[c]));
            }
        }
        let [a, b, c, d] = vals;
        Self::from_samples(
            alpha,
            PeriodicField::from_values(grid, FieldKind::Smooth, a)?,
            PeriodicField::from_values(grid, FieldKind::Smooth, b)?,
            PeriodicField::from_values(grid, FieldKind::Smooth, c)?,
            PeriodicField::from_values(grid, FieldKind::Smooth, d)?,
        )
    }

    /// `f(z) = |z|^(α-1) z`.
    pub fn power(alpha: f64, nodes: usize) -> Result<Self> {
        let grid = AngularGrid::uniform(nodes)?;
        Self::from_closed_form(alpha, &grid, |t| {
            let (s, c) = t.sin_cos();
            [c, s, -s, c]
        })
    }

    pub fn identity(nodes: usize) -> Result<Self> {
        Self::power(1.0, nodes)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &AngularGrid {
        self.eta1.grid()
    }

    pub fn eta1(&self) -> &PeriodicField<f64> {
        &self.eta1
    }

    pub fn eta2(&self) -> &PeriodicField<f64> {
        &self.eta2
    }

    pub fn deta1(&self) -> &PeriodicField<f64> {
        &self.deta1
    }

    pub fn deta2(&self) -> &PeriodicField<f64> {
        &self.deta2
    }

    /// Between-node evaluation is exact rather than interpolated.
    pub fn has_exact_profile(&self) -> bool {
        !matches!(self.source, Source::Sampled)
    }

    /// `[η₁, η₂, η̇₁, η̇₂]` at `theta`; derivatives are right-sided at jumps.
    pub fn profile_at(&self, theta: f64) -> [f64; 4] {
        match &self.source {
            Source::Closed(f) => f(normalize_angle(theta)),
            Source::Segments(s) => s.eval(theta),
            Source::Pieces(f, grid) => {
                let (j, off) = grid.locate(theta);
                f(j, grid.pieces()[j].start + off)
            }
            Source::Sampled => [
                self.eta1.value_at(theta),
                self.eta2.value_at(theta),
                self.deta1.value_at(theta),
                self.deta2.value_at(theta),
            ],
        }
    }

    /// `|η(2π⁻) - η(0)|`, zero for periodic profiles.
    pub fn closure_gap(&self) -> f64 {
        let first = &self.eta1.piece_values()[0];
        let last = self.eta1.piece_values().last().unwrap();
        let first2 = &self.eta2.piece_values()[0];
        let last2 = self.eta2.piece_values().last().unwrap();
        (last.last().unwrap() - first[0]).hypot(last2.last().unwrap() - first2[0])
    }

    /// Largest `max(|η₁|, |η₂|)` over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.eta1
            .node_values()
            .iter()
            .chain(self.eta2.node_values().iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `f(z) = |z|^α (η₁ + iη₂)(arg z)`.
pub fn eval_stretching(s: &AngularStretching, z: Complex64) -> Result<Complex64> {
    if z.norm() == 0.0 || !z.norm().is_finite() {
        return Err(Error::Domain(format!("stretching evaluated at z = {z}")));
    }
    let e = s.profile_at(arg(z));
    Ok(Complex64::new(e[0], e[1]) * z.norm().powf(s.alpha))
}

/// r-independent factors of the Jacobian, `|Df|²` and the distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferentialQuantities {
    /// `α (η₁η̇₂ - η̇₁η₂)`.
    pub jacobian: f64,
    /// Largest eigenvalue of `DfᵀDf` divided by `r^(2(α-1))`.
    pub grad_norm_sq: f64,
    pub distortion: f64,
    /// `tr² - 4 det` of `DfDfᵀ`.
    pub discriminant: f64,
    /// Same quantity as a sum of squares.
    pub discriminant_squares: f64,
}

pub fn quantities_from_profile(alpha: f64, e: [f64; 4]) -> DifferentialQuantities {
    let [h1, h2, d1, d2] = e;
    let w = h1 * d2 - d1 * h2;
    let jacobian = alpha * w;
    let tr = alpha * alpha * (h1 * h1 + h2 * h2) + d1 * d1 + d2 * d2;
    let discriminant = tr * tr - 4.0 * jacobian * jacobian;
    let a2 = alpha * alpha;
    let discriminant_squares = (a2 * h1 * h1 - d2 * d2).powi(2)
        + (a2 * h2 * h2 - d1 * d1).powi(2)
        + 2.0 * (a2 * h1 * h2 + d1 * d2).powi(2)
        + 2.0 * a2 * (h1 * d1 + h2 * d2).powi(2);
    let grad_norm_sq = 0.5 * (tr + discriminant_squares.sqrt());
    DifferentialQuantities {
        jacobian,
        grad_norm_sq,
        distortion: grad_norm_sq / jacobian,
        discriminant,
        discriminant_squares,
    }
}

/// Differential quantities at `theta`; rejects points where `J ≤ 0`.
pub fn differential_quantities(
    s: &AngularStretching,
    theta: f64,
) -> Result<DifferentialQuantities> {
    let q = quantities_from_profile(s.alpha, s.profile_at(theta));
    if !(q.jacobian > 0.0) {
        return Err(Error::NotSensePreserving {
            theta: normalize_angle(theta),
            jacobian: q.jacobian,
        });
    }
    Ok(q)
}

/// Distortion `|Df|²/J_f` of a system solution written in terms of `k₁, k₂`.
pub fn knorm_distortion(k1: f64, k2: f64, eta1: f64, eta2: f64) -> f64 {
    let (a, b) = (eta1 * eta1, eta2 * eta2);
    let ik2 = 1.0 / k2;
    let root = ((1.0 - k1 * k1).powi(2) * a * a
        + (1.0 - ik2 * ik2).powi(2) * b * b
        + 2.0 * ((1.0 - k1 * ik2).powi(2) + (k1 - ik2).powi(2)) * a * b)
        .sqrt();
    ((1.0 + k1 * k1) * a + (1.0 + ik2 * ik2) * b + root) / (2.0 * (k1 * a + ik2 * b))
}

pub fn solve_system(k: &KProfile, alpha: f64, initial: [f64; 2]) -> Result<AngularStretching> {
    solve_system_on(k, alpha, initial, DEFAULT_NODES)
}

/// Solves the system over `[0, 2π]` from `(η₁(0), η₂(0)) = initial` on a grid
/// of about `nodes` points aligned with the jumps of `k`.
pub fn solve_system_on(
    k: &KProfile,
    alpha: f64,
    initial: [f64; 2],
    nodes: usize,
) -> Result<AngularStretching> {
    check_alpha(alpha)?;
    if !(initial[0].is_finite() && initial[1].is_finite()) {
        return Err(Error::NonFinite { index: 0 });
    }
    let grid = AngularGrid::with_breakpoints(nodes, &k.partition())?;
    if k.is_piecewise() {
        let segments = k.segments();
        let mut states = Vec::with_capacity(segments.len());
        let mut v = initial;
        for seg in &segments {
            states.push(v);
            v = constant_propagator(alpha, seg.k1, seg.k2, seg.end - seg.start).apply(v);
        }
        let exact = Arc::new(ExactSegments {
            alpha,
            segments,
            states,
        });
        // grid pieces coincide with the segments
        let ex = exact.clone();
        let eval_piece = move |j: usize, t: f64| {
            let seg = &ex.segments[j];
            let v = constant_propagator(alpha, seg.k1, seg.k2, t - seg.start).apply(ex.states[j]);
            let d = rhs(alpha, seg.k1, seg.k2, v);
            [v[0], v[1], d[0], d[1]]
        };
        if grid.pieces().len() != exact.segments.len() {
            return Err(Error::Inconsistent(
                "grid pieces differ from k segments".into(),
            ));
        }
        let mut s = AngularStretching::sample_with(alpha, &grid, &eval_piece)?;
        s.source = Source::Segments(exact);
        Ok(s)
    } else {
        let mut v = initial;
        let mut pieces = Vec::with_capacity(grid.pieces().len());
        for p in grid.pieces() {
            let h = p.step();
            let mut vals = Vec::with_capacity(p.intervals + 1);
            for i in 0..=p.intervals {
                let t = p.node(i);
                let (k1, k2) = k.eval(t);
                let d = rhs(alpha, k1, k2, v);
                vals.push([v[0], v[1], d[0], d[1]]);
                if i < p.intervals {
                    v = rk4_step(k, alpha, t, h, v);
                }
            }
            pieces.push(vals);
        }
        AngularStretching::sample_with(alpha, &grid, &|j, t| {
            let p = &grid.pieces()[j];
            let i = ((t - p.start) / p.step()).round() as usize;
            pieces[j][i.min(p.intervals)]
        })
    }
}

/// Which injectivity condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum InjectivityFailure {
    /// `η₁² + η₂²` vanishes.
    Vanishing { theta: f64 },
    /// The profiles do not close up after one period.
    NotClosed { gap: f64 },
    /// The argument of `η₁ + iη₂` winds other than once.
    Period { winding: i64 },
    /// `η₁η̇₂ - η̇₁η₂` takes both signs.
    SignChange { positive_at: f64, negative_at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectivityCertificate {
    pub injective: bool,
    pub winding: i64,
    pub min_modulus_sq: f64,
    pub min_wronskian: f64,
    pub max_wronskian: f64,
    pub failure: Option<InjectivityFailure>,
}

/// Checks on node samples: non-vanishing profile, winding number ±1 of its
/// argument (minimal period 2π for a monotone argument) and a constant sign of
/// `η₁η̇₂ - η̇₁η₂`.
pub fn injectivity_check(s: &AngularStretching) -> InjectivityCertificate {
    let scale = s.sup_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale * scale;
    let mut min_mod = f64::INFINITY;
    let mut min_mod_at = 0.0;
    let mut min_w = f64::INFINITY;
    let mut max_w = f64::NEG_INFINITY;
    let (mut pos_at, mut neg_at) = (None, None);
    let mut total = 0.0;
    let grid = s.grid();
    for (j, p) in grid.pieces().iter().enumerate() {
        let h1 = &s.eta1.piece_values()[j];
        let h2 = &s.eta2.piece_values()[j];
        let d1 = &s.deta1.piece_values()[j];
        let d2 = &s.deta2.piece_values()[j];
        for i in 0..=p.intervals {
            let m = h1[i] * h1[i] + h2[i] * h2[i];
            if m < min_mod {
                min_mod = m;
                min_mod_at = p.node(i);
            }
            let w = h1[i] * d2[i] - d1[i] * h2[i];
            min_w = min_w.min(w);
            max_w = max_w.max(w);
            if w > tol && pos_at.is_none() {
                pos_at = Some(normalize_angle(p.node(i)));
            }
            if w < -tol && neg_at.is_none() {
                neg_at = Some(normalize_angle(p.node(i)));
            }
            if i > 0 {
                total += wrap_pi(h2[i].atan2(h1[i]) - h2[i - 1].atan2(h1[i - 1]));
            }
        }
    }
    let winding = (total / TWO_PI).round() as i64;
    let gap = s.closure_gap();
    let failure = if min_mod <= tol {
        Some(InjectivityFailure::Vanishing {
            theta: normalize_angle(min_mod_at),
        })
    } else if gap > 1e-6 * scale {
        Some(InjectivityFailure::NotClosed { gap })
    } else if winding.abs() != 1 {
        Some(InjectivityFailure::Period { winding })
    } else if let (Some(p), Some(n)) = (pos_at, neg_at) {
        Some(InjectivityFailure::SignChange {
            positive_at: p,
            negative_at: n,
        })
    } else {
        None
    };
    InjectivityCertificate {
        injective: failure.is_none(),
        winding,
        min_modulus_sq: min_mod,
        min_wronskian: min_w,
        max_wronskian: max_w,
        failure,
    }
}

/// Largest relative weak residuals of `(k₂η̇₁)' + α²k₁η₁ = 0` and
/// `(η̇₂/k₁)' + α²η₂/k₂ = 0` against the periodic hat functions of the grid:
/// `|∫ k₂η̇₁ w' - α² ∫ k₁η₁ w|` divided by the integral of the absolute
/// values of both terms. Integrals use 4-point Gauss rules per interval on
/// the profile and on `k`. The hat at `θ = 0` straddles the seam and is only
/// tested when the profile closes up.
pub fn sturm_liouville_residuals(s: &AngularStretching, k: &KProfile) -> (f64, f64) {
    const GX: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const GW: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let nodes = s.grid().nodes();
    let n = nodes.len();
    let a2 = s.alpha * s.alpha;
    // per node: (signed, absolute) for both equations
    let mut acc = vec![[0.0f64; 4]; n];
    for i in 0..n {
        let t0 = nodes[i];
        let h = normalize_angle(nodes[(i + 1) % n] - t0);
        let h = if h == 0.0 { TWO_PI } else { h };
        for (x, w) in GX.iter().zip(GW) {
            let u = 0.5 * (1.0 + x);
            let t = t0 + u * h;
            let e = s.profile_at(t);
            let (k1, k2) = k.eval(normalize_angle(t));
            let wq = 0.5 * h * w;
            let q1 = k2 * e[2];
            let q2 = e[3] / k1;
            let m1 = a2 * k1 * e[0];
            let m2 = a2 * e[1] / k2;
            // hat of node i falls from 1 to 0, hat of node i+1 rises
            for (node, hat, slope) in [(i, 1.0 - u, -1.0 / h), ((i + 1) % n, u, 1.0 / h)] {
                let c = &mut acc[node];
                c[0] += wq * (q1 * slope - m1 * hat);
                c[1] += wq * ((q1 * slope).abs() + (m1 * hat).abs());
                c[2] += wq * (q2 * slope - m2 * hat);
                c[3] += wq * ((q2 * slope).abs() + (m2 * hat).abs());
            }
        }
    }
    let closed = s.closure_gap() <= 1e-10 * s.sup_norm();
    let skip = usize::from(!closed);
    acc[skip..].iter().fold((0.0f64, 0.0f64), |(r1, r2), c| {
        let rel = |v: f64, d: f64| if d > 0.0 { v.abs() / d } else { v.abs() };
        (r1.max(rel(c[0], c[1])), r2.max(rel(c[2], c[3])))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_square_root_maps() {
        let id = AngularStretching::identity(512).unwrap();
        for z in [c(0.3, -0.7), c(-2.0, 0.1), c(0.0, 5.0)] {
            assert!((eval_stretching(&id, z).unwrap() - z).norm() < 1e-14 * z.norm());
        }
        let sq = AngularStretching::power(0.5, 512).unwrap();
        assert!((eval_stretching(&sq, c(4.0, 0.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-14);
        assert!(eval_stretching(&sq, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn quantities_of_simple_maps() {
        let id = AngularStretching::identity(256).unwrap();
        let q = differential_quantities(&id, 0.4).unwrap();
        assert!((q.jacobian - 1.0).abs() < 1e-15);
        assert!((q.grad_norm_sq - 1.0).abs() < 1e-15);
        assert!((q.distortion - 1.0).abs() < 1e-15);
        for alpha in [0.2, 0.5, 0.9] {
            let s = AngularStretching::power(alpha, 256).unwrap();
            let q = differential_quantities(&s, 1.3).unwrap();
            assert!((q.distortion - 1.0 / alpha).abs() < 1e-13);
        }
    }

    #[test]
    fn orientation_reversing_profile_is_rejected() {
        let grid = AngularGrid::uniform(64).unwrap();
        let s = AngularStretching::from_closed_form(1.0, &grid, |t| {
            let (s, c) = t.sin_cos();
            [c, -s, -s, -c]
        })
        .unwrap();
        assert!(matches!(
            differential_quantities(&s, 0.3),
            Err(Error::NotSensePreserving { .. })
        ));
    }

    #[test]
    fn k_and_munu_examples() {
        assert_eq!(k_pair_from_munu(0.0, 0.0).unwrap(), (1.0, 1.0));
        assert_eq!(munu_pair_from_k(1.0, 1.0).unwrap(), (0.0, 0.0));
        let alpha: f64 = 0.3;
        let (m, n) = munu_pair_from_k(1.0 / alpha, alpha).unwrap();
        assert!((m - (1.0 - alpha) / (1.0 + alpha)).abs() < 1e-15);
        assert!(n.abs() < 1e-15);
        let big = 5.0;
        let (m, n) = munu_pair_from_k(big, big).unwrap();
        assert!(m.abs() < 1e-16);
        assert!((n - (big - 1.0) / (big + 1.0)).abs() < 1e-15);
        assert!(k_pair_from_munu(0.6, 0.4).is_err());
        assert!(munu_pair_from_k(0.0, 1.0).is_err());
    }

    #[test]
    fn propagator_matches_rk4() {
        let k = KProfile::new(
            AngularProfile::smooth(|t| 2.0 + t.cos()),
            AngularProfile::smooth(|t| 1.5 + 0.5 * t.sin()),
        )
        .unwrap();
        let kc = KProfile::constant(2.5, 0.7).unwrap();
        let exact = monodromy(&kc, 0.8).unwrap();
        let smooth_const = KProfile::new(
            AngularProfile::smooth(|_| 2.5),
            AngularProfile::smooth(|_| 0.7),
        )
        .unwrap();
        let numeric = monodromy(&smooth_const, 0.8).unwrap();
        assert!(exact.max_abs_diff(&numeric) < 1e-10);
        assert!((monodromy(&k, 0.7).unwrap().det() - 1.0).abs() < 1e-10);
        assert!((exact.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_profile_gives_rotation() {
        let k = KProfile::constant(1.0, 1.0).unwrap();
        let s = solve_system(&k, 1.0, [1.0, 0.0]).unwrap();
        for t in [0.0, 0.5, 2.0, 6.0] {
            let e = s.profile_at(t);
            assert!((e[0] - t.cos()).abs() < 1e-13 && (e[1] - t.sin()).abs() < 1e-13);
        }
        assert!((find_periodic_alpha(&k, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((find_periodic_alpha(&k, 3).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn quantization_when_nu_vanishes() {
        let k = KProfile::constant(2.0, 0.5).unwrap();
        assert!((find_periodic_alpha(&k, 1).unwrap() - 0.5).abs() < 1e-12);
        let prof = AngularProfile::piecewise(&[0.0, 1.0, 4.0], &[1.0, 3.0, 0.5]).unwrap();
        let k = KProfile::new(prof.clone(), prof.map(|v| 1.0 / v)).unwrap();
        let integral = 1.0 * 1.0 + 3.0 * 3.0 + 0.5 * (TWO_PI - 4.0);
        let alpha = find_periodic_alpha(&k, 2).unwrap();
        assert!((alpha - 2.0 * TWO_PI / integral).abs() < 1e-11);
        let roots = periodic_alpha_roots(&k, 2, &SearchSettings::default()).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().all(|r| r.edge == BandEdge::Both));
    }

    #[test]
    fn periodic_solution_closes_and_is_injective() {
        let k1 = AngularProfile::piecewise(&[0.0, 2.0, 3.5], &[1.0, 4.0, 2.0]).unwrap();
        let k2 = AngularProfile::piecewise(&[1.0, 5.0], &[0.7, 1.8]).unwrap();
        let k = KProfile::new(k1, k2).unwrap();
        let s = periodic_stretching(&k, 1).unwrap();
        assert!(s.closure_gap() < 1e-9, "gap {}", s.closure_gap());
        let cert = injectivity_check(&s);
        assert!(cert.injective, "{cert:?}");
        let phi = monodromy(&k, s.alpha()).unwrap();
        assert!((phi.trace() - 2.0).abs() < 1e-9);
        let (r1, r2) = sturm_liouville_residuals(&s, &k);
        assert!(r1 < 1e-4 && r2 < 1e-4, "{r1} {r2}");
    }

    #[test]
    fn double_winding_is_not_injective() {
        let grid = AngularGrid::uniform(512).unwrap();
        let s = AngularStretching::from_closed_form(1.0, &grid, |t| {
            let (s, c) = (2.0 * t).sin_cos();
            [c, s, -2.0 * s, 2.0 * c]
        })
        .unwrap();
        let cert = injectivity_check(&s);
        assert!(!cert.injective);
        assert_eq!(
            cert.failure,
            Some(InjectivityFailure::Period { winding: 2 })
        );
        assert!(injectivity_check(&AngularStretching::identity(512).unwrap()).injective);
    }

    #[test]
    fn discriminant_forms_and_knorm_agree() {
        let k1 = AngularProfile::piecewise(&[0.0, 3.0], &[1.5, 0.6]).unwrap();
        let k2 = AngularProfile::piecewise(&[0.0, 1.0], &[2.0, 0.9]).unwrap();
        let k = KProfile::new(k1, k2).unwrap();
        let s = solve_system(&k, 0.83, [0.4, -1.0]).unwrap();
        for i in 0..200 {
            let t = 0.0314 * i as f64 + 0.001;
            let e = s.profile_at(t);
            let q = quantities_from_profile(s.alpha(), e);
            assert!(
                (q.discriminant - q.discriminant_squares).abs()
                    <= 1e-12 * (1.0 + q.discriminant.abs())
            );
            let (a, b) = k.eval(t);
            let kn = knorm_distortion(a, b, e[0], e[1]);
            assert!(
                (kn - q.distortion).abs() < 1e-10 * q.distortion,
                "{kn} {}",
                q.distortion
            );
            let jac = s.alpha() * s.alpha() * (a * e[0] * e[0] + e[1] * e[1] / b);
            assert!((q.jacobian - jac).abs() < 1e-12 * jac);
        }
    }
}
