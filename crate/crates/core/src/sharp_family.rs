//! The extremal family indexed by `M > 1` and `τ ∈ [0, 1]`.
//!
//! On the four arcs `[0, cπ/2)`, `[cπ/2, π)`, `[π, π+cπ/2)`, `[π+cπ/2, 2π)`
//! the coefficient profiles are piecewise constant and the periodic solution
//! of the angular system is known in closed form with exponent `d/c`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::AngularProfile;
use crate::periodic::{normalize_angle, AngularGrid, FieldKind, PeriodicField, DEFAULT_NODES};
use crate::reduction::{BeltramiPair, MatrixField};
use crate::stretching::{eval_stretching, AngularStretching, KProfile};

/// `c = 2/(1 + M^-τ)`, `d = (4/π) arctan M^(-(1-τ)/2)`.
pub fn cd_params(m: f64, tau: f64) -> Result<(f64, f64)> {
    check_params(m, tau)?;
    let c = 2.0 / (1.0 + m.powf(-tau));
    let d = 4.0 / PI * m.powf(-(1.0 - tau) / 2.0).atan();
    Ok((c, d))
}

fn check_params(m: f64, tau: f64) -> Result<()> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::Domain(format!("M = {m} must exceed 1")));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau = {tau} outside [0, 1]")));
    }
    Ok(())
}

/// Closed-form data of one member of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpParams {
    pub m: f64,
    pub tau: f64,
    pub c: f64,
    pub d: f64,
}

impl SharpParams {
    pub fn new(m: f64, tau: f64) -> Result<Self> {
        let (c, d) = cd_params(m, tau)?;
        Ok(Self { m, tau, c, d })
    }

    /// `d/c`, the exponent of the extremal map.
    pub fn alpha(&self) -> f64 {
        self.d / self.c
    }

    /// `{0, cπ/2, π, π + cπ/2}`.
    pub fn breakpoints(&self) -> [f64; 4] {
        [0.0, self.c * PI / 2.0, PI, PI + self.c * PI / 2.0]
    }

    /// Index 0..4 of the arc containing `theta`.
    pub fn arc(&self, theta: f64) -> usize {
        let t = normalize_angle(theta);
        let b = self.breakpoints();
        b.iter().rposition(|&x| x <= t).unwrap_or(0)
    }

    /// `(k₁, k₂)` on the outer arcs 2 and 4; both are 1 on arcs 1 and 3.
    pub fn k_values(&self) -> (f64, f64) {
        (self.m, self.m.powf(1.0 - 2.0 * self.tau))
    }

    /// `(μ₀, ν₀)` on arcs 2 and 4; both vanish on arcs 1 and 3.
    pub fn munu_values(&self) -> (f64, f64) {
        let m = self.m;
        let den = 1.0 + m + m.powf(1.0 - 2.0 * self.tau) + m.powf(2.0 * (1.0 - self.tau));
        (
            (m - m.powf(1.0 - 2.0 * self.tau)) / den,
            (m.powf(2.0 * (1.0 - self.tau)) - 1.0) / den,
        )
    }

    /// `[Θ₁, Θ₂, Θ̇₁, Θ̇₂]` at `theta`; derivatives are right-sided at the
    /// arc boundaries.
    pub fn theta(&self, theta: f64) -> [f64; 4] {
        let t = normalize_angle(theta);
        arc_formula(self, self.arc(t), t)
    }
}

/// One member of the family with all derived profiles.
#[derive(Debug, Clone)]
pub struct SharpFamily {
    params: SharpParams,
    k: KProfile,
    mu0: AngularProfile,
    nu0: AngularProfile,
    grid: AngularGrid,
    theta1: PeriodicField<f64>,
    theta2: PeriodicField<f64>,
}

impl SharpFamily {
    pub fn params(&self) -> SharpParams {
        self.params
    }

    pub fn m(&self) -> f64 {
        self.params.m
    }

    pub fn tau(&self) -> f64 {
        self.params.tau
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }

    pub fn d(&self) -> f64 {
        self.params.d
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha()
    }

    pub fn breakpoints(&self) -> [f64; 4] {
        self.params.breakpoints()
    }

    pub fn k(&self) -> &KProfile {
        &self.k
    }

    pub fn mu0(&self) -> &AngularProfile {
        &self.mu0
    }

    pub fn nu0(&self) -> &AngularProfile {
        &self.nu0
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn theta1(&self) -> &PeriodicField<f64> {
        &self.theta1
    }

    pub fn theta2(&self) -> &PeriodicField<f64> {
        &self.theta2
    }

    /// `μ(z) = -μ₀(arg z) z/z̄`, `ν(z) = -ν₀(arg z)`.
    pub fn pair(&self) -> Result<BeltramiPair> {
        BeltramiPair::angular(&self.mu0, &self.nu0)
    }

    /// Largest jump of `(Θ₁, Θ₂)` across the four arc boundaries.
    pub fn junction_defect(&self) -> f64 {
        let p = &self.params;
        let b = p.breakpoints();
        (0..4)
            .map(|j| {
                let prev = (j + 3) % 4;
                let at = if j == 0 { 2.0 * PI } else { b[j] };
                let left = arc_formula(p, prev, at);
                let right = arc_formula(p, j, b[j]);
                (left[0] - right[0]).abs().max((left[1] - right[1]).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the family member for `(M, τ)` on a grid of about 2048 nodes.
pub fn build_family(m: f64, tau: f64) -> Result<SharpFamily> {
    build_family_on(m, tau, DEFAULT_NODES)
}

pub fn build_family_on(m: f64, tau: f64, nodes: usize) -> Result<SharpFamily> {
    let params = SharpParams::new(m, tau)?;
    let b = params.breakpoints();
    let (k1o, k2o) = params.k_values();
    let (mu, nu) = params.munu_values();
    let k1 = AngularProfile::piecewise(&b, &[1.0, k1o, 1.0, k1o])?;
    let k2 = AngularProfile::piecewise(&b, &[1.0, k2o, 1.0, k2o])?;
    let k = KProfile::new(k1, k2)?;
    let mu0 = AngularProfile::piecewise(&b, &[0.0, mu, 0.0, mu])?;
    let nu0 = AngularProfile::piecewise(&b, &[0.0, nu, 0.0, nu])?;
    let grid = AngularGrid::with_breakpoints(nodes, &b)?;
    if grid.pieces().len() != 4 {
        return Err(Error::Inconsistent(
            "arc boundaries merged on the grid".into(),
        ));
    }
    let mut v1 = Vec::with_capacity(4);
    let mut v2 = Vec::with_capacity(4);
    for (j, piece) in grid.pieces().iter().enumerate() {
        let vals: Vec<[f64; 4]> = (0..=piece.intervals)
            .map(|i| arc_formula(&params, j, piece.node(i)))
            .collect();
        v1.push(vals.iter().map(|e| e[0]).collect());
        v2.push(vals.iter().map(|e| e[1]).collect());
    }
    let theta1 = PeriodicField::from_values(&grid, FieldKind::Smooth, v1)?;
    let theta2 = PeriodicField::from_values(&grid, FieldKind::Smooth, v2)?;
    Ok(SharpFamily {
        params,
        k,
        mu0,
        nu0,
        grid,
        theta1,
        theta2,
    })
}

/// Arc `j` formula without reducing `t` modulo 2π or re-selecting the arc.
fn arc_formula(p: &SharpParams, j: usize, t: f64) -> [f64; 4] {
    let (c, d) = (p.c, p.d);
    let q = PI / 4.0;
    let lo = p.m.powf(-(1.0 - p.tau) / 2.0);
    let hi = p.m.powf((1.0 - p.tau) / 2.0);
    let mt = p.m.powf(p.tau);
    let sign = if j < 2 { 1.0 } else { -1.0 };
    let s = t - if j < 2 { 0.0 } else { PI };
    if j % 2 == 0 {
        let u = d * (s / c - q);
        let w = d / c;
        let (su, cu) = u.sin_cos();
        [sign * su, -sign * cu, sign * w * cu, sign * w * su]
    } else {
        let u = d * (mt * (s - c * PI / 2.0) / c - q);
        let w = d * mt / c;
        let (su, cu) = u.sin_cos();
        [
            sign * lo * cu,
            sign * hi * su,
            -sign * lo * w * su,
            sign * hi * w * cu,
        ]
    }
}

/// `A_τ(z) = J(θ) diag(k₁(θ), k₂(θ)) J(θ)ᵀ`.
pub fn build_matrix(family: &SharpFamily) -> MatrixField {
    MatrixField::Angular {
        k1: family.k.k1().clone(),
        k2: family.k.k2().clone(),
    }
}

/// Real part `u = |z|^α Θ₁(arg z)` of the extremal map.
#[derive(Debug, Clone)]
pub struct ScalarMap {
    map: AngularStretching,
}

impl ScalarMap {
    pub fn alpha(&self) -> f64 {
        self.map.alpha()
    }

    pub fn eval(&self, z: Complex64) -> Result<f64> {
        Ok(eval_stretching(&self.map, z)?.re)
    }

    pub fn stretching(&self) -> &AngularStretching {
        &self.map
    }
}

/// `f_τ(z) = |z|^(d/c) (Θ₁ + iΘ₂)(arg z)` and its real part.
pub fn build_maps(family: &SharpFamily) -> Result<(AngularStretching, ScalarMap)> {
    let p = family.params;
    let f = AngularStretching::from_piece_formula(p.alpha(), &family.grid, move |j, t| {
        arc_formula(&p, j, t)
    })?;
    Ok((f.clone(), ScalarMap { map: f }))
}
