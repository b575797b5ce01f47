//! Coefficient sources on the plane: constants, purely angular profiles and
//! general closures.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::periodic::{normalize_angle, TWO_PI};

const BREAKPOINT_TOL: f64 = 1e-12;

/// Dense sampling used to bound smooth profiles.
const SMOOTH_PROFILE_SAMPLES: usize = 8192;

/// A real 2π-periodic function of the polar angle.
#[derive(Clone)]
pub enum AngularProfile {
    /// Value `values[j]` on `[breakpoints[j], breakpoints[j+1])`, cyclically.
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Smooth(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for AngularProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngularProfile::Piecewise {
                breakpoints,
                values,
            } => f
                .debug_struct("Piecewise")
                .field("breakpoints", breakpoints)
                .field("values", values)
                .finish(),
            AngularProfile::Smooth(_) => f.write_str("Smooth(<fn>)"),
        }
    }
}

impl AngularProfile {
    pub fn constant(value: f64) -> Self {
        AngularProfile::Piecewise {
            breakpoints: vec![0.0],
            values: vec![value],
        }
    }

    /// Piecewise-constant profile. Breakpoints are normalized into `[0, 2π)`
    /// and sorted together with their values.
    pub fn piecewise(breakpoints: &[f64], values: &[f64]) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} breakpoints for {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        let mut pairs: Vec<(f64, f64)> = breakpoints
            .iter()
            .map(|&b| normalize_angle(b))
            .zip(values.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            if w[1].0 - w[0].0 < BREAKPOINT_TOL {
                return Err(Error::InvalidGrid(format!(
                    "duplicate breakpoint at {}",
                    w[0].0
                )));
            }
        }
        let (breakpoints, values) = pairs.into_iter().unzip();
        Ok(AngularProfile::Piecewise {
            breakpoints,
            values,
        })
    }

    pub fn smooth(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        AngularProfile::Smooth(Arc::new(f))
    }

    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            AngularProfile::Piecewise {
                breakpoints,
                values,
            } => values[piece_index(breakpoints, theta)],
            AngularProfile::Smooth(f) => f(normalize_angle(theta)),
        }
    }

    /// Evaluates at `theta`, except that piecewise-constant profiles are read
    /// at `sector` when given. Callers pass the midpoint angle of the sector
    /// that contains `theta` so nodes sitting on a jump pick the correct side.
    pub fn eval_in_sector(&self, theta: f64, sector: Option<f64>) -> f64 {
        match (self, sector) {
            (AngularProfile::Piecewise { .. }, Some(s)) => self.eval(s),
            _ => self.eval(theta),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            AngularProfile::Piecewise {
                breakpoints,
                values,
            } => {
                if values.iter().all(|&v| v == values[0]) {
                    Vec::new()
                } else {
                    breakpoints.clone()
                }
            }
            AngularProfile::Smooth(_) => Vec::new(),
        }
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self, AngularProfile::Piecewise { .. })
    }

    /// Supremum of `|profile|`: exact for piecewise profiles, sampled otherwise.
    pub fn sup_abs(&self) -> f64 {
        self.sample_values()
            .into_iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn inf(&self) -> f64 {
        self.sample_values()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sup(&self) -> f64 {
        self.sample_values()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_identically(&self, value: f64) -> bool {
        match self {
            AngularProfile::Piecewise { values, .. } => values.iter().all(|&v| v == value),
            AngularProfile::Smooth(_) => self.sample_values().iter().all(|&v| v == value),
        }
    }

    fn sample_values(&self) -> Vec<f64> {
        match self {
            AngularProfile::Piecewise { values, .. } => values.clone(),
            AngularProfile::Smooth(f) => (0..SMOOTH_PROFILE_SAMPLES)
                .map(|i| f(TWO_PI * i as f64 / SMOOTH_PROFILE_SAMPLES as f64))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        match self {
            AngularProfile::Piecewise {
                breakpoints,
                values,
            } => AngularProfile::Piecewise {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|&v| f(v)).collect(),
            },
            AngularProfile::Smooth(g) => {
                let g = Arc::clone(g);
                AngularProfile::Smooth(Arc::new(move |t| f(g(t))))
            }
        }
    }

    /// Pointwise combination on the common refinement of both partitions.
    pub fn combine(
        a: &AngularProfile,
        b: &AngularProfile,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> AngularProfile {
        match (a, b) {
            (AngularProfile::Piecewise { .. }, AngularProfile::Piecewise { .. }) => {
                let mut breaks: Vec<f64> = a.raw_breakpoints();
                breaks.extend(b.raw_breakpoints());
                let breaks = merge_breakpoints(&breaks);
                let values = (0..breaks.len())
                    .map(|j| {
                        let mid = piece_midpoint(&breaks, j);
                        f(a.eval(mid), b.eval(mid))
                    })
                    .collect();
                AngularProfile::Piecewise {
                    breakpoints: breaks,
                    values,
                }
            }
            _ => {
                let (a, b) = (a.clone(), b.clone());
                AngularProfile::Smooth(Arc::new(move |t| f(a.eval(t), b.eval(t))))
            }
        }
    }

    fn raw_breakpoints(&self) -> Vec<f64> {
        match self {
            AngularProfile::Piecewise { breakpoints, .. } => breakpoints.clone(),
            AngularProfile::Smooth(_) => Vec::new(),
        }
    }
}

/// Index of the piece `[b_j, b_{j+1})` containing `theta` (cyclic).
pub(crate) fn piece_index(breakpoints: &[f64], theta: f64) -> usize {
    let t = normalize_angle(theta);
    match breakpoints.iter().rposition(|&b| b <= t) {
        Some(j) => j,
        // before the first breakpoint: belongs to the wrapping last piece
        None => breakpoints.len() - 1,
    }
}

pub(crate) fn piece_midpoint(breakpoints: &[f64], j: usize) -> f64 {
    let start = breakpoints[j];
    let end = if j + 1 < breakpoints.len() {
        breakpoints[j + 1]
    } else {
        breakpoints[0] + TWO_PI
    };
    normalize_angle(0.5 * (start + end))
}

/// Normalizes, sorts and de-duplicates a set of angles.
pub fn merge_breakpoints(angles: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = angles.iter().map(|&a| normalize_angle(a)).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for a in v {
        if out.last().is_none_or(|&l| a - l > BREAKPOINT_TOL) {
            out.push(a);
        }
    }
    if out.len() > 1 && out[0] + TWO_PI - out[out.len() - 1] <= BREAKPOINT_TOL {
        out.pop();
    }
    if out.is_empty() {
        out.push(0.0);
    }
    out
}

/// A complex coefficient defined on the plane.
#[derive(Clone)]
pub enum PlanarCoefficient {
    Constant(Complex64),
    /// `value(z) = profile(arg z) · (z / z̄)^twist`.
    Angular {
        profile: AngularProfile,
        twist: i32,
    },
    /// Arbitrary field; `real_valued` declares that the imaginary part vanishes.
    Planar {
        f: Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>,
        real_valued: bool,
    },
}

impl fmt::Debug for PlanarCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanarCoefficient::Constant(c) => write!(f, "Constant({c})"),
            PlanarCoefficient::Angular { profile, twist } => f
                .debug_struct("Angular")
                .field("profile", profile)
                .field("twist", twist)
                .finish(),
            PlanarCoefficient::Planar { real_valued, .. } => {
                write!(f, "Planar {{ real_valued: {real_valued} }}")
            }
        }
    }
}

impl PlanarCoefficient {
    pub fn zero() -> Self {
        PlanarCoefficient::Constant(Complex64::new(0.0, 0.0))
    }

    /// `mu(z) = -mu0(arg z) z / z̄`.
    pub fn angular_mu(mu0: &AngularProfile) -> Self {
        PlanarCoefficient::Angular {
            profile: mu0.map(|v| -v),
            twist: 1,
        }
    }

    /// `nu(z) = -nu0(arg z)`.
    pub fn angular_nu(nu0: &AngularProfile) -> Self {
        PlanarCoefficient::Angular {
            profile: nu0.map(|v| -v),
            twist: 0,
        }
    }

    pub fn planar(
        f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
        real_valued: bool,
    ) -> Self {
        PlanarCoefficient::Planar {
            f: Arc::new(f),
            real_valued,
        }
    }

    pub fn eval(&self, z: Complex64, sector: Option<f64>) -> Result<Complex64> {
        match self {
            PlanarCoefficient::Constant(c) => Ok(*c),
            PlanarCoefficient::Angular { profile, twist } => {
                if z.norm() == 0.0 {
                    return Err(Error::OriginOnCircle);
                }
                let theta = normalize_angle(z.arg());
                let v = profile.eval_in_sector(theta, sector);
                if *twist == 0 {
                    Ok(Complex64::new(v, 0.0))
                } else {
                    Ok(Complex64::from_polar(v, 2.0 * *twist as f64 * theta))
                }
            }
            PlanarCoefficient::Planar { f, .. } => Ok(f(z)),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            PlanarCoefficient::Constant(c) => c.im == 0.0,
            PlanarCoefficient::Angular { profile, twist } => {
                *twist == 0 || profile.is_identically(0.0)
            }
            PlanarCoefficient::Planar { real_valued, .. } => *real_valued,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PlanarCoefficient::Constant(c) => c.norm() == 0.0,
            PlanarCoefficient::Angular { profile, .. } => profile.is_identically(0.0),
            PlanarCoefficient::Planar { .. } => false,
        }
    }

    /// True when the value depends on `arg z` only (through the profile and the twist).
    pub fn is_angular_only(&self) -> bool {
        !matches!(self, PlanarCoefficient::Planar { .. })
    }

    pub fn angular_breakpoints(&self) -> Vec<f64> {
        match self {
            PlanarCoefficient::Angular { profile, .. } => profile.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// `|value|` as an angular profile, when the modulus depends on the angle only.
    pub fn modulus_profile(&self) -> Option<AngularProfile> {
        match self {
            PlanarCoefficient::Constant(c) => Some(AngularProfile::constant(c.norm())),
            PlanarCoefficient::Angular { profile, .. } => Some(profile.map(f64::abs)),
            PlanarCoefficient::Planar { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn piecewise_lookup_wraps() {
        let p = AngularProfile::piecewise(&[PI / 2.0, 3.0 * PI / 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(p.eval(PI), 1.0);
        assert_eq!(p.eval(0.1), 2.0);
        assert_eq!(p.eval(PI / 2.0), 1.0);
        assert_eq!(p.eval(-0.1), 2.0);
        assert_eq!(p.eval(2.0 * PI + PI), 1.0);
    }

    #[test]
    fn combine_refines_partitions() {
        let a = AngularProfile::piecewise(&[0.0, PI], &[1.0, 3.0]).unwrap();
        let b = AngularProfile::piecewise(&[PI / 2.0, 3.0 * PI / 2.0], &[10.0, 20.0]).unwrap();
        let c = AngularProfile::combine(&a, &b, |x, y| x + y);
        assert_eq!(c.breakpoints().len(), 4);
        assert_eq!(c.eval(0.1), 21.0);
        assert_eq!(c.eval(1.7), 11.0);
        assert_eq!(c.eval(3.5), 13.0);
        assert_eq!(c.eval(5.0), 23.0);
    }

    #[test]
    fn angular_mu_carries_twist() {
        let mu0 = AngularProfile::constant(0.25);
        let mu = PlanarCoefficient::angular_mu(&mu0);
        let z = Complex64::from_polar(2.0, 0.3);
        let expected = -0.25 * z / z.conj();
        assert!((mu.eval(z, None).unwrap() - expected).norm() < 1e-15);
        assert!(matches!(
            mu.eval(Complex64::new(0.0, 0.0), None),
            Err(Error::OriginOnCircle)
        ));
    }

    #[test]
    fn merge_drops_wrapped_duplicates() {
        let m = merge_breakpoints(&[0.0, 2.0 * PI - 1e-14, 1.0, 1.0]);
        assert_eq!(m, vec![0.0, 1.0]);
    }
}
