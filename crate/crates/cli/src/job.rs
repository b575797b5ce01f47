//! Job specification: config file contents merged with command-line flags.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use beltrami_core::estimator::{OptimizerSettings, SweepConfig, WeightFamily};
use beltrami_core::field::AngularProfile;
use beltrami_core::periodic::CircleSpec;
use beltrami_core::reduction::BeltramiPair;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Estimate,
    Sharp,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Constant `(μ₀, ν₀)` from `start` up to the next interval's start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub start: f64,
    pub mu0: f64,
    pub nu0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    Sharp { m: f64, tau: f64 },
    RadialStretch { alpha: f64 },
    Angular { intervals: Vec<Interval> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub m: Vec<f64>,
    pub tau: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    pub nodes: Option<usize>,
    pub circles: Option<usize>,
    pub radii: Option<Vec<f64>>,
    pub weight_pieces: Option<usize>,
    pub family: Option<WeightFamily>,
    pub starts: Option<usize>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
}

/// Contents of a `--config` file. Every field may be overridden by a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobSpec {
    pub command: Option<CommandKind>,
    pub source: Option<Source>,
    pub sweep: Option<SweepGrid>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub flip_mu: bool,
    pub resolution: Resolution,
}

pub const DEFAULT_NODES: usize = 2048;
pub const DEFAULT_CIRCLES: usize = 8;
pub const DEFAULT_RADII: [f64; 1] = [0.5];
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
const RING: f64 = 0.3;

/// Fully validated job.
#[derive(Debug, Clone)]
pub struct Job {
    pub command: CommandKind,
    pub points: Vec<Source>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub flip_mu: bool,
    pub nodes: usize,
    pub circles: usize,
    pub radii: Vec<f64>,
    pub pieces: usize,
    pub family: WeightFamily,
    pub optimizer: OptimizerSettings,
    pub tolerance: f64,
}

/// Coefficient-file contents.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffFile {
    intervals: Vec<Interval>,
}

pub fn read_config(path: &Path) -> Result<JobSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::spec(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::spec(format!("{}: {e}", path.display())))
}

pub fn read_coeff_file(path: &Path) -> Result<Source, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::spec(format!("{}: {e}", path.display())))?;
    let f: CoeffFile = serde_json::from_str(&text)
        .map_err(|e| CliError::spec(format!("{}: {e}", path.display())))?;
    Ok(Source::Angular {
        intervals: f.intervals,
    })
}

impl JobSpec {
    pub fn into_job(self) -> Result<Job, CliError> {
        let command = self
            .command
            .ok_or_else(|| CliError::spec("no command given"))?;
        let points = match command {
            CommandKind::Sweep => {
                if self.source.is_some() {
                    return Err(CliError::spec(
                        "sweep takes a parameter grid, not a single source",
                    ));
                }
                expand_grid(&self.sweep.unwrap_or_default())?
            }
            _ => {
                if self.sweep.is_some() {
                    return Err(CliError::spec("parameter lists are only accepted by sweep"));
                }
                vec![self
                    .source
                    .ok_or_else(|| CliError::spec("no coefficient source given"))?]
            }
        };
        for p in &points {
            validate_source(p)?;
        }
        if command == CommandKind::Sharp && !matches!(points[0], Source::Sharp { .. }) {
            return Err(CliError::spec("sharp needs --M and --tau"));
        }
        let r = self.resolution;
        let nodes = r.nodes.unwrap_or(DEFAULT_NODES);
        if !(16..=1 << 20).contains(&nodes) {
            return Err(CliError::spec(format!(
                "nodes = {nodes} outside [16, 2^20]"
            )));
        }
        let circles = r.circles.unwrap_or(DEFAULT_CIRCLES);
        if circles > 256 {
            return Err(CliError::spec(format!("circles = {circles} exceeds 256")));
        }
        let radii = r.radii.unwrap_or_else(|| DEFAULT_RADII.to_vec());
        if radii.is_empty() || radii.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(CliError::spec("radii must be a non-empty list in (0, 1)"));
        }
        let pieces = r
            .weight_pieces
            .unwrap_or(beltrami_core::estimator::DEFAULT_PIECES);
        if pieces == 0 {
            return Err(CliError::spec("weight-pieces must be positive"));
        }
        let mut optimizer = OptimizerSettings::default();
        if let Some(s) = r.seed {
            optimizer.seed = s;
        }
        if let Some(s) = r.starts {
            if s == 0 {
                return Err(CliError::spec("starts must be positive"));
            }
            optimizer.starts = s;
        }
        let tolerance = r.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(CliError::spec(format!(
                "tolerance = {tolerance} must be positive"
            )));
        }
        Ok(Job {
            command,
            points,
            format: self.format.unwrap_or_default(),
            out: self.out,
            flip_mu: self.flip_mu,
            nodes,
            circles,
            radii,
            pieces,
            family: r.family.unwrap_or(WeightFamily::All),
            optimizer,
            tolerance,
        })
    }
}

fn expand_grid(g: &SweepGrid) -> Result<Vec<Source>, CliError> {
    let sharp = !g.m.is_empty() || !g.tau.is_empty();
    if sharp && !g.alpha.is_empty() {
        return Err(CliError::spec(
            "a sweep runs over (M, tau) or over alpha, not both",
        ));
    }
    if sharp {
        if g.m.is_empty() || g.tau.is_empty() {
            return Err(CliError::spec("an (M, tau) sweep needs both lists"));
        }
        Ok(g.tau
            .iter()
            .flat_map(|&tau| g.m.iter().map(move |&m| Source::Sharp { m, tau }))
            .collect())
    } else if !g.alpha.is_empty() {
        Ok(g.alpha
            .iter()
            .map(|&alpha| Source::RadialStretch { alpha })
            .collect())
    } else {
        Err(CliError::spec("empty sweep grid"))
    }
}

pub fn validate_source(s: &Source) -> Result<(), CliError> {
    match *s {
        Source::Sharp { m, tau } => {
            if !(m > 1.0 && m.is_finite()) {
                return Err(CliError::spec(format!("M = {m} must exceed 1")));
            }
            if !(0.0..=1.0).contains(&tau) {
                return Err(CliError::spec(format!("tau = {tau} outside [0, 1]")));
            }
        }
        Source::RadialStretch { alpha } => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(CliError::spec(format!("alpha = {alpha} outside (0, 1]")));
            }
        }
        Source::Angular { ref intervals } => {
            if intervals.is_empty() {
                return Err(CliError::spec("coefficient file has no intervals"));
            }
            for (i, iv) in intervals.iter().enumerate() {
                if !(0.0..TAU).contains(&iv.start) || !iv.mu0.is_finite() || !iv.nu0.is_finite() {
                    return Err(CliError::spec(format!("interval {i} is malformed")));
                }
                if i > 0 && iv.start <= intervals[i - 1].start {
                    return Err(CliError::spec("interval starts must increase strictly"));
                }
            }
            for (i, iv) in intervals.iter().enumerate() {
                let sum = iv.mu0.abs() + iv.nu0.abs();
                if !(sum < 1.0) {
                    let end = intervals
                        .get(i + 1)
                        .map_or(intervals[0].start + TAU, |n| n.start);
                    return Err(CliError::Ellipticity {
                        message: format!("|mu0| + |nu0| = {sum} on interval {i}"),
                        location: json!({
                            "interval": i,
                            "theta_start": iv.start,
                            "theta_end": end,
                            "modulus_sum": sum,
                        }),
                    });
                }
            }
        }
    }
    Ok(())
}

impl Source {
    pub fn label(&self) -> String {
        match self {
            Source::Sharp { m, tau } => format!("sharp(M={m}, tau={tau})"),
            Source::RadialStretch { alpha } => format!("radial_stretch(alpha={alpha})"),
            Source::Angular { intervals } => format!("angular({} intervals)", intervals.len()),
        }
    }

    /// `(μ₀, ν₀)` profiles; the pair is `μ = -μ₀ z/z̄`, `ν = -ν₀`.
    pub fn profiles(&self) -> Result<(AngularProfile, AngularProfile), CliError> {
        match self {
            Source::Sharp { m, tau } => {
                let fam = beltrami_core::build_family(*m, *tau)?;
                Ok((fam.mu0().clone(), fam.nu0().clone()))
            }
            Source::RadialStretch { alpha } => Ok((
                AngularProfile::constant((1.0 - alpha) / (1.0 + alpha)),
                AngularProfile::constant(0.0),
            )),
            Source::Angular { intervals } => {
                let b: Vec<f64> = intervals.iter().map(|i| i.start).collect();
                let mu: Vec<f64> = intervals.iter().map(|i| i.mu0).collect();
                let nu: Vec<f64> = intervals.iter().map(|i| i.nu0).collect();
                if b.len() == 1 {
                    return Ok((
                        AngularProfile::constant(mu[0]),
                        AngularProfile::constant(nu[0]),
                    ));
                }
                Ok((
                    AngularProfile::piecewise(&b, &mu)?,
                    AngularProfile::piecewise(&b, &nu)?,
                ))
            }
        }
    }

    pub fn pair(&self, flip_mu: bool) -> Result<BeltramiPair, CliError> {
        let (mu0, nu0) = self.profiles()?;
        let mu0 = if flip_mu { mu0.map(|v| -v) } else { mu0 };
        Ok(BeltramiPair::angular(&mu0, &nu0)?)
    }

    /// Exponent the constructed map should have, when known in closed form.
    pub fn target(&self) -> Option<f64> {
        match *self {
            Source::Sharp { m, tau } => beltrami_core::sharp_family::SharpParams::new(m, tau)
                .ok()
                .map(|p| p.alpha()),
            Source::RadialStretch { alpha } => Some(alpha),
            Source::Angular { .. } => None,
        }
    }
}

impl Job {
    /// Origin circles at the given radii plus `circles` off-center circles on
    /// a ring of radius 0.3.
    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let mut cs = Vec::with_capacity(self.radii.len() + self.circles);
        for &r in &self.radii {
            cs.push(CircleSpec::origin(r, self.nodes)?);
        }
        for j in 0..self.circles {
            let c = Complex64::from_polar(RING, PI * (2 * j + 1) as f64 / self.circles as f64);
            cs.push(CircleSpec::new(c, 0.95 * (1.0 - RING), self.nodes)?);
        }
        Ok(SweepConfig::new(cs, self.family)?
            .with_pieces(self.pieces)
            .with_optimizer(self.optimizer))
    }
}
