use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite sample at node {index}")]
    NonFinite { index: usize },

    #[error("invalid angular grid: {0}")]
    InvalidGrid(String),

    #[error("parameter out of range: {0}")]
    Domain(String),

    /// `|mu| + |nu|` reached or exceeded the admissible margin.
    #[error("ellipticity violated at z = {location}: |mu|+|nu| = {modulus_sum} (margin {margin})")]
    Ellipticity {
        location: Complex64,
        modulus_sum: f64,
        margin: f64,
    },

    #[error("matrix not positive definite at z = {location}: a11 = {a11}, det = {det}")]
    NotPositiveDefinite {
        location: Complex64,
        a11: f64,
        det: f64,
    },

    #[error("circle passes through the origin where angular coefficients are undefined")]
    OriginOnCircle,

    #[error("map is not sense-preserving at theta = {theta} (jacobian factor {jacobian})")]
    NotSensePreserving { theta: f64, jacobian: f64 },

    #[error(
        "no periodic exponent for branch {branch} below alpha = {alpha_max} (rotation {rotation})"
    )]
    RootNotBracketed {
        branch: u32,
        alpha_max: f64,
        rotation: f64,
    },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("empty circle set")]
    EmptyCircleSet,

    #[error("internal consistency failure: {0}")]
    Inconsistent(String),
}

impl Error {
    /// True for the failures that come from the coefficients themselves
    /// rather than from the requested configuration.
    pub fn is_ellipticity(&self) -> bool {
        matches!(
            self,
            Error::Ellipticity { .. } | Error::NotPositiveDefinite { .. }
        )
    }
}
