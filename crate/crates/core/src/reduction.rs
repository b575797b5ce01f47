//! Conversions between Beltrami coefficient pairs and divergence-form
//! coefficient matrices.
//!
//! For `∂̄f = μ ∂f + ν conj(∂f)` the real part of `f` solves `div(B ∇u) = 0`
//! and the imaginary part solves `div(B̃ ∇v) = 0`, with
//!
//! ```text
//! B  = ( [[|1-μ|², -2 Im(μ-ν)], [-2 Im(μ+ν), |1+μ|²]] - |ν|² I ) / (|1+ν|² - |μ|²)
//! B̃ = ( [[|1-μ|², -2 Im(μ+ν)], [-2 Im(μ-ν), |1+μ|²]] - |ν|² I ) / (|1-ν|² - |μ|²)
//! ```
//!
//! For real ν the matrix `B` is symmetric and `B̃ = B / det B`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{AngularProfile, PlanarCoefficient};
use crate::linalg::Mat2;
use crate::periodic::arg;
use crate::stretching::{k_pair_from_munu, munu_pair_from_k};

/// Slack allowed between sampled `|μ|+|ν|` and the stored margin.
pub const ELLIPTICITY_TOL: f64 = 1e-10;

/// Beltrami coefficients with their ellipticity margin `κ ≥ sup(|μ|+|ν|)`.
#[derive(Debug, Clone)]
pub struct BeltramiPair {
    mu: PlanarCoefficient,
    nu: PlanarCoefficient,
    kappa: f64,
    real_nu: bool,
}

impl BeltramiPair {
    /// Pair whose margin is computed exactly; closures need [`Self::with_margin`].
    pub fn new(mu: PlanarCoefficient, nu: PlanarCoefficient) -> Result<Self> {
        let kappa = sup_modulus_sum(&mu, &nu).ok_or_else(|| {
            Error::Unsupported("planar closures require an explicit ellipticity margin".into())
        })?;
        Self::with_margin(mu, nu, kappa)
    }

    pub fn with_margin(mu: PlanarCoefficient, nu: PlanarCoefficient, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa < 1.0) {
            return Err(Error::Ellipticity {
                location: Complex64::new(f64::NAN, f64::NAN),
                modulus_sum: kappa,
                margin: kappa,
            });
        }
        if let Some(sup) = sup_modulus_sum(&mu, &nu) {
            if sup > kappa + ELLIPTICITY_TOL {
                return Err(Error::Ellipticity {
                    location: Complex64::new(f64::NAN, f64::NAN),
                    modulus_sum: sup,
                    margin: kappa,
                });
            }
        }
        let real_nu = nu.is_real();
        Ok(Self {
            mu,
            nu,
            kappa,
            real_nu,
        })
    }

    /// `μ(z) = -μ₀(arg z) z/z̄`, `ν(z) = -ν₀(arg z)`.
    pub fn angular(mu0: &AngularProfile, nu0: &AngularProfile) -> Result<Self> {
        Self::new(
            PlanarCoefficient::angular_mu(mu0),
            PlanarCoefficient::angular_nu(nu0),
        )
    }

    pub fn constant(mu: Complex64, nu: Complex64) -> Result<Self> {
        Self::new(
            PlanarCoefficient::Constant(mu),
            PlanarCoefficient::Constant(nu),
        )
    }

    pub fn zero() -> Self {
        Self {
            mu: PlanarCoefficient::zero(),
            nu: PlanarCoefficient::zero(),
            kappa: 0.0,
            real_nu: true,
        }
    }

    /// Coefficients of `f(z) = |z|^(α-1) z`: `μ = -(1-α)/(1+α) z/z̄`, `ν = 0`.
    pub fn radial_stretch(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!(
                "radial stretch exponent {alpha} outside (0, 1]"
            )));
        }
        let mu0 = (1.0 - alpha) / (1.0 + alpha);
        Self::angular(
            &AngularProfile::constant(mu0),
            &AngularProfile::constant(0.0),
        )
    }

    pub fn mu(&self) -> &PlanarCoefficient {
        &self.mu
    }

    pub fn nu(&self) -> &PlanarCoefficient {
        &self.nu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn real_nu(&self) -> bool {
        self.real_nu
    }

    /// `(μ(z), ν(z))`, checked against the margin.
    pub fn eval(&self, z: Complex64, sector: Option<f64>) -> Result<(Complex64, Complex64)> {
        let mu = self.mu.eval(z, sector)?;
        let nu = self.nu.eval(z, sector)?;
        let s = mu.norm() + nu.norm();
        if !s.is_finite() || s > self.kappa + ELLIPTICITY_TOL || s >= 1.0 {
            return Err(Error::Ellipticity {
                location: z,
                modulus_sum: s,
                margin: self.kappa,
            });
        }
        if self.real_nu && nu.im != 0.0 {
            return Err(Error::Inconsistent(format!(
                "nu declared real but Im(nu({z})) = {}",
                nu.im
            )));
        }
        Ok((mu, nu))
    }

    pub fn angular_breakpoints(&self) -> Vec<f64> {
        let mut b = self.mu.angular_breakpoints();
        b.extend(self.nu.angular_breakpoints());
        b
    }

    /// Both coefficients depend on `arg z` only.
    pub fn is_angular_only(&self) -> bool {
        self.mu.is_angular_only() && self.nu.is_angular_only()
    }

    /// Some coefficient is undefined at the origin.
    pub fn has_angular_part(&self) -> bool {
        matches!(self.mu, PlanarCoefficient::Angular { .. })
            || matches!(self.nu, PlanarCoefficient::Angular { .. })
    }

    /// Exact `sup(|μ|+|ν|)` when both coefficients are structured.
    pub fn sup_modulus_sum(&self) -> Option<f64> {
        sup_modulus_sum(&self.mu, &self.nu)
    }
}

fn sup_modulus_sum(mu: &PlanarCoefficient, nu: &PlanarCoefficient) -> Option<f64> {
    let a = mu.modulus_profile()?;
    let b = nu.modulus_profile()?;
    Some(AngularProfile::combine(&a, &b, |x, y| x + y).sup())
}

fn check_pointwise(mu: Complex64, nu: Complex64) -> Result<()> {
    let s = mu.norm() + nu.norm();
    if !s.is_finite() || s >= 1.0 {
        return Err(Error::Ellipticity {
            location: Complex64::new(f64::NAN, f64::NAN),
            modulus_sum: s,
            margin: 1.0,
        });
    }
    Ok(())
}

/// Pointwise `(B, B̃)` for a coefficient value pair.
pub fn pair_to_matrices(mu: Complex64, nu: Complex64) -> Result<(Mat2, Mat2)> {
    check_pointwise(mu, nu)?;
    let one = Complex64::new(1.0, 0.0);
    let d1 = (one + nu).norm_sqr() - mu.norm_sqr();
    let d2 = (one - nu).norm_sqr() - mu.norm_sqr();
    let nn = nu.norm_sqr();
    let p = (one - mu).norm_sqr() - nn;
    let q = (one + mu).norm_sqr() - nn;
    let minus = -2.0 * (mu - nu).im;
    let plus = -2.0 * (mu + nu).im;
    let b = Mat2::new(p, minus, plus, q).scale(1.0 / d1);
    let bt = Mat2::new(p, plus, minus, q).scale(1.0 / d2);
    Ok((b, bt))
}

/// Recovers `(μ, ν)` from `B`.
pub fn matrix_to_pair(b: Mat2) -> Result<(Complex64, Complex64)> {
    let den = 1.0 + b.trace() + b.det();
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Inconsistent(format!("1 + tr B + det B = {den}")));
    }
    let mu = -Complex64::new(b.a11 - b.a22, b.a12 + b.a21) / den;
    let nu = Complex64::new(1.0 - b.det(), b.a12 - b.a21) / den;
    Ok((mu, nu))
}

/// `A / det A`.
pub fn normalize(a: Mat2) -> Result<Mat2> {
    let det = a.det();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::NotPositiveDefinite {
            location: Complex64::new(f64::NAN, f64::NAN),
            a11: a.a11,
            det,
        });
    }
    Ok(a.scale(1.0 / det))
}

/// `J(θ) diag(k1, k2) J(θ)ᵀ = (k1 - k2) z⊗z/|z|² + k2 I`.
pub fn rotated_diagonal(theta: f64, k1: f64, k2: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(
        k1 * c * c + k2 * s * s,
        (k1 - k2) * s * c,
        (k1 - k2) * s * c,
        k1 * s * s + k2 * c * c,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionKind {
    /// Governs the real part.
    B,
    /// Governs the imaginary part.
    BTilde,
}

/// Matrix-valued coefficient field of `div(A ∇u) = 0`.
#[derive(Clone)]
pub enum MatrixField {
    Constant(Mat2),
    /// `J(arg z) diag(k1, k2) J(arg z)ᵀ`.
    Angular {
        k1: AngularProfile,
        k2: AngularProfile,
    },
    FromPair {
        pair: BeltramiPair,
        kind: ReductionKind,
    },
    Normalized(Box<MatrixField>),
    Planar {
        f: Arc<dyn Fn(Complex64) -> Mat2 + Send + Sync>,
        symmetric: bool,
    },
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixField::Constant(m) => write!(f, "Constant({m:?})"),
            MatrixField::Angular { k1, k2 } => f
                .debug_struct("Angular")
                .field("k1", k1)
                .field("k2", k2)
                .finish(),
            MatrixField::FromPair { pair, kind } => f
                .debug_struct("FromPair")
                .field("pair", pair)
                .field("kind", kind)
                .finish(),
            MatrixField::Normalized(inner) => f.debug_tuple("Normalized").field(inner).finish(),
            MatrixField::Planar { symmetric, .. } => {
                write!(f, "Planar {{ symmetric: {symmetric} }}")
            }
        }
    }
}

impl MatrixField {
    pub fn planar(f: impl Fn(Complex64) -> Mat2 + Send + Sync + 'static, symmetric: bool) -> Self {
        MatrixField::Planar {
            f: Arc::new(f),
            symmetric,
        }
    }

    /// Value at `z`, checked for `a11 > 0`, `det > 0`.
    pub fn eval(&self, z: Complex64, sector: Option<f64>) -> Result<Mat2> {
        let m = self.eval_unchecked(z, sector)?;
        let det = m.det();
        if !m.is_finite() || !(m.a11 > 0.0) || !(det > 0.0) {
            return Err(Error::NotPositiveDefinite {
                location: z,
                a11: m.a11,
                det,
            });
        }
        Ok(m)
    }

    fn eval_unchecked(&self, z: Complex64, sector: Option<f64>) -> Result<Mat2> {
        match self {
            MatrixField::Constant(m) => Ok(*m),
            MatrixField::Angular { k1, k2 } => {
                if z.norm() == 0.0 {
                    return Err(Error::OriginOnCircle);
                }
                let theta = arg(z);
                Ok(rotated_diagonal(
                    theta,
                    k1.eval_in_sector(theta, sector),
                    k2.eval_in_sector(theta, sector),
                ))
            }
            MatrixField::FromPair { pair, kind } => {
                let (mu, nu) = pair.eval(z, sector)?;
                let (b, bt) = pair_to_matrices(mu, nu)?;
                Ok(match kind {
                    ReductionKind::B => b,
                    ReductionKind::BTilde => bt,
                })
            }
            MatrixField::Normalized(inner) => {
                let a = inner.eval(z, sector)?;
                normalize(a).map_err(|_| Error::NotPositiveDefinite {
                    location: z,
                    a11: a.a11,
                    det: a.det(),
                })
            }
            MatrixField::Planar { f, .. } => Ok(f(z)),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            MatrixField::Constant(m) => m.is_symmetric(0.0),
            MatrixField::Angular { .. } => true,
            MatrixField::FromPair { pair, .. } => pair.real_nu(),
            MatrixField::Normalized(inner) => inner.is_symmetric(),
            MatrixField::Planar { symmetric, .. } => *symmetric,
        }
    }

    pub fn angular_breakpoints(&self) -> Vec<f64> {
        match self {
            MatrixField::Angular { k1, k2 } => {
                let mut b = k1.breakpoints();
                b.extend(k2.breakpoints());
                b
            }
            MatrixField::FromPair { pair, .. } => pair.angular_breakpoints(),
            MatrixField::Normalized(inner) => inner.angular_breakpoints(),
            _ => Vec::new(),
        }
    }

    pub fn has_angular_part(&self) -> bool {
        match self {
            MatrixField::Angular { .. } => true,
            MatrixField::FromPair { pair, .. } => pair.has_angular_part(),
            MatrixField::Normalized(inner) => inner.has_angular_part(),
            _ => false,
        }
    }

    pub fn is_angular_only(&self) -> bool {
        match self {
            MatrixField::Constant(_) | MatrixField::Angular { .. } => true,
            MatrixField::FromPair { pair, .. } => pair.is_angular_only(),
            MatrixField::Normalized(inner) => inner.is_angular_only(),
            MatrixField::Planar { .. } => false,
        }
    }
}

/// `(B_{μ,ν}, B̃_{μ,ν})` as fields.
pub fn beltrami_to_matrices(pair: &BeltramiPair) -> Result<(MatrixField, MatrixField)> {
    if pair.kappa() >= 1.0 {
        return Err(Error::Ellipticity {
            location: Complex64::new(f64::NAN, f64::NAN),
            modulus_sum: pair.kappa(),
            margin: pair.kappa(),
        });
    }
    Ok((
        MatrixField::FromPair {
            pair: pair.clone(),
            kind: ReductionKind::B,
        },
        MatrixField::FromPair {
            pair: pair.clone(),
            kind: ReductionKind::BTilde,
        },
    ))
}

/// The pair whose `B` matrix is the given field.
pub fn matrix_to_beltrami(field: &MatrixField) -> Result<BeltramiPair> {
    match field {
        MatrixField::Constant(m) => {
            let (mu, nu) = matrix_to_pair(*m)?;
            BeltramiPair::constant(mu, nu)
        }
        MatrixField::Angular { k1, k2 } => {
            let mu0 = AngularProfile::combine(k1, k2, |a, b| {
                munu_pair_from_k(a, b).map(|p| p.0).unwrap_or(f64::NAN)
            });
            let nu0 = AngularProfile::combine(k1, k2, |a, b| {
                munu_pair_from_k(a, b).map(|p| p.1).unwrap_or(f64::NAN)
            });
            BeltramiPair::angular(&mu0, &nu0)
        }
        MatrixField::FromPair {
            pair,
            kind: ReductionKind::B,
        } => Ok(pair.clone()),
        other => {
            let symmetric = other.is_symmetric();
            let (fm, fn_) = (other.clone(), other.clone());
            let mu = PlanarCoefficient::planar(
                move |z| {
                    fm.eval(z, None)
                        .and_then(matrix_to_pair)
                        .map(|p| p.0)
                        .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
                },
                false,
            );
            let nu = PlanarCoefficient::planar(
                move |z| {
                    fn_.eval(z, None)
                        .and_then(matrix_to_pair)
                        .map(|p| p.1)
                        .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
                },
                symmetric,
            );
            // bounded SPD fields give sup(|μ|+|ν|) < 1; the actual value is
            // only known on samples, which are checked against strict < 1
            BeltramiPair::with_margin(mu, nu, 1.0 - f64::EPSILON)
        }
    }
}

/// `Â = A / det A`.
pub fn normalize_matrix(field: &MatrixField) -> MatrixField {
    match field {
        MatrixField::Constant(m) => match normalize(*m) {
            Ok(n) => MatrixField::Constant(n),
            Err(_) => MatrixField::Normalized(Box::new(field.clone())),
        },
        MatrixField::Angular { k1, k2 } => {
            let det = AngularProfile::combine(k1, k2, |a, b| a * b);
            MatrixField::Angular {
                k1: AngularProfile::combine(k1, &det, |a, d| a / d),
                k2: AngularProfile::combine(k2, &det, |b, d| b / d),
            }
        }
        _ => MatrixField::Normalized(Box::new(field.clone())),
    }
}

/// `A(z) = J(θ) diag(k1(θ), k2(θ)) J(θ)ᵀ` for the angular coefficients
/// `μ = -μ₀(θ) z/z̄`, `ν = -ν₀(θ)`.
pub fn angular_to_matrix(mu0: &AngularProfile, nu0: &AngularProfile) -> Result<MatrixField> {
    let sum = AngularProfile::combine(mu0, nu0, |a, b| a.abs() + b.abs());
    let sup = sum.sup();
    if sup >= 1.0 {
        return Err(Error::Ellipticity {
            location: Complex64::new(f64::NAN, f64::NAN),
            modulus_sum: sup,
            margin: 1.0,
        });
    }
    let k1 = AngularProfile::combine(mu0, nu0, |m, n| {
        k_pair_from_munu(m, n).map(|k| k.0).unwrap_or(f64::NAN)
    });
    let k2 = AngularProfile::combine(mu0, nu0, |m, n| {
        k_pair_from_munu(m, n).map(|k| k.1).unwrap_or(f64::NAN)
    });
    Ok(MatrixField::Angular { k1, k2 })
}
