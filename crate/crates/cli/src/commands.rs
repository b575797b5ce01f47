//! The four commands. Each returns a JSON document and a CSV table; the
//! caller writes whichever format was requested.

use std::f64::consts::TAU;

use beltrami_core::estimator::{
    beta_estimate, classical_bound, corollary_bound, mu_zero_bound, nu_zero_bound, ExponentReport,
    SweepConfig,
};
use beltrami_core::periodic::AngularGrid;
use beltrami_core::reduction::{beltrami_to_matrices, BeltramiPair};
use beltrami_core::sharp_family::{build_family_on, build_maps};
use beltrami_core::stretching::{
    eval_stretching, k_from_munu, periodic_stretching, AngularStretching,
};
use beltrami_core::verify::{
    beltrami_residual, beltrami_residual_exact, empirical_holder, refinement_study,
    weak_form_residual, PolarGrid, PolarSamples, ResidualReport,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::job::{Job, Source};
use crate::table::{num, opt, Table};

/// Finished command. `failure` is set when the report was produced but a
/// check did not pass.
pub struct Output {
    pub json: Value,
    pub table: Table,
    pub failure: Option<CliError>,
}

/// Relative slack for the ordering checks.
const ORDER_SLACK: f64 = 1e-12;
const HOLDER_TOLERANCE: f64 = 0.01;
/// The mean weak residual of a solution decays at order 2 on aligned meshes;
/// the maximum sits at derivative kinks and decays at order 1 at best.
const MIN_WEAK_MEAN_SLOPE: f64 = 1.0;
const MIN_WEAK_MAX_SLOPE: f64 = 0.5;

#[derive(Debug, Clone, Serialize)]
struct Bounds {
    beta: f64,
    corollary: f64,
    classical: f64,
    mu_zero: Option<f64>,
    nu_zero: Option<f64>,
}

fn all_bounds(
    pair: &BeltramiPair,
    cfg: &SweepConfig,
) -> Result<(Bounds, ExponentReport), CliError> {
    let report = beta_estimate(pair, cfg)?;
    let b = Bounds {
        beta: report.bound,
        corollary: corollary_bound(pair, cfg)?,
        classical: classical_bound(pair)?,
        mu_zero: if pair.mu().is_zero() {
            Some(mu_zero_bound(pair, cfg)?)
        } else {
            None
        },
        nu_zero: if pair.nu().is_zero() {
            Some(nu_zero_bound(pair, cfg)?)
        } else {
            None
        },
    };
    Ok((b, report))
}

fn ordering(b: &Bounds) -> Value {
    let tol = ORDER_SLACK * b.beta.max(1.0);
    json!({
        "beta_ge_corollary": b.beta >= b.corollary - tol,
        "beta_minus_corollary": b.beta - b.corollary,
        "beta_ge_classical": b.beta >= b.classical - tol,
        "beta_minus_classical": b.beta - b.classical,
        "slack": tol,
    })
}

const ROW_HEADER: [&str; 19] = [
    "source",
    "M",
    "tau",
    "alpha",
    "target",
    "beta",
    "beta_rel_dev",
    "beta_sup_inf",
    "beta_clamped",
    "corollary",
    "beta_minus_corollary",
    "classical",
    "beta_minus_classical",
    "mu_zero",
    "nu_zero",
    "best_weights",
    "evaluations",
    "status",
    "message",
];

fn source_cells(s: &Source) -> [String; 4] {
    let (m, tau, alpha) = match *s {
        Source::Sharp { m, tau } => (Some(m), Some(tau), None),
        Source::RadialStretch { alpha } => (None, None, Some(alpha)),
        Source::Angular { .. } => (None, None, None),
    };
    [s.label(), opt(m), opt(tau), opt(alpha)]
}

fn row_cells(s: &Source, res: &Result<(Bounds, ExponentReport), CliError>) -> Vec<String> {
    let mut row: Vec<String> = source_cells(s).into();
    let target = s.target();
    row.push(opt(target));
    match res {
        Ok((b, r)) => {
            let best = r
                .per_circle_values
                .iter()
                .find(|c| c.circle == r.attaining_circle)
                .map(|c| format!("{:?}", c.best).to_lowercase())
                .unwrap_or_default();
            row.extend([
                num(b.beta),
                opt(target.map(|t| (b.beta - t) / t)),
                num(r.sup_inf),
                r.clamped.to_string(),
                num(b.corollary),
                num(b.beta - b.corollary),
                num(b.classical),
                num(b.beta - b.classical),
                opt(b.mu_zero),
                opt(b.nu_zero),
                best,
                r.diagnostics.evaluations.to_string(),
                "ok".into(),
                String::new(),
            ]);
        }
        Err(e) => {
            row.extend(std::iter::repeat(String::new()).take(12));
            row.push(e.kind().into());
            row.push(e.to_string());
        }
    }
    row
}

fn job_summary(job: &Job, cfg: &SweepConfig) -> Value {
    json!({
        "nodes": job.nodes,
        "radii": job.radii,
        "off_center_circles": job.circles,
        "total_circles": cfg.circles.len(),
        "weight_pieces": job.pieces,
        "family": job.family,
        "optimizer": job.optimizer,
        "flip_mu": job.flip_mu,
    })
}

pub fn estimate(job: &Job) -> Result<Output, CliError> {
    let src = &job.points[0];
    let cfg = job.sweep_config()?;
    let pair = src.pair(job.flip_mu)?;
    let res = all_bounds(&pair, &cfg);
    let mut table = Table::new(&ROW_HEADER);
    table.push(row_cells(src, &res));
    let (b, report) = res?;
    let checks = ordering(&b);
    let ok = checks["beta_ge_corollary"].as_bool() == Some(true)
        && checks["beta_ge_classical"].as_bool() == Some(true);
    let json = json!({
        "command": "estimate",
        "source": src,
        "config": job_summary(job, &cfg),
        "bounds": b,
        "target": src.target(),
        "checks": checks,
        "beta_report": report,
    });
    let failure = (!ok).then(|| CliError::Verification("bound ordering violated".into()));
    Ok(Output {
        json,
        table,
        failure,
    })
}

pub fn sweep(job: &Job) -> Result<Output, CliError> {
    let cfg = job.sweep_config()?;
    let results: Vec<Result<(Bounds, ExponentReport), CliError>> = job
        .points
        .par_iter()
        .map(|s| all_bounds(&s.pair(job.flip_mu)?, &cfg))
        .collect();
    let mut table = Table::new(&ROW_HEADER);
    let mut rows = Vec::with_capacity(results.len());
    for (s, r) in job.points.iter().zip(&results) {
        table.push(row_cells(s, r));
        rows.push(match r {
            Ok((b, rep)) => json!({
                "source": s,
                "status": "ok",
                "target": s.target(),
                "bounds": b,
                "checks": ordering(b),
                "sup_inf": rep.sup_inf,
                "clamped": rep.clamped,
                "attaining_circle": rep.attaining_circle,
                "diagnostics": rep.diagnostics,
            }),
            Err(e) => json!({ "source": s, "status": e.kind(), "error": e.to_json() }),
        });
    }
    if results.iter().all(|r| r.is_err()) {
        if let Some(Err(e)) = results.into_iter().next() {
            return Err(e);
        }
    }
    let json = json!({
        "command": "sweep",
        "config": job_summary(job, &cfg),
        "rows": rows,
    });
    Ok(Output {
        json,
        table,
        failure: None,
    })
}

fn angular_grid(nodes: usize, breaks: &[f64]) -> Result<AngularGrid, CliError> {
    Ok(if breaks.is_empty() {
        AngularGrid::uniform(nodes)?
    } else {
        AngularGrid::with_breakpoints(nodes, breaks)?
    })
}

fn residual_grid(nodes: usize, breaks: &[f64]) -> Result<PolarGrid, CliError> {
    Ok(PolarGrid::geometric(
        0.05,
        1.0,
        16,
        angular_grid(nodes.min(1024), breaks)?,
    )?)
}

pub fn sharp(job: &Job) -> Result<Output, CliError> {
    let Source::Sharp { m, tau } = job.points[0] else {
        return Err(CliError::spec("sharp needs --M and --tau"));
    };
    let fam = build_family_on(m, tau, job.nodes)?;
    let p = fam.params();
    let (f, _) = build_maps(&fam)?;
    let pair = job.points[0].pair(job.flip_mu)?;

    const SAMPLES: usize = 64;
    let mut table = Table::new(&[
        "theta", "k1", "k2", "mu0", "nu0", "theta1", "theta2", "dtheta1", "dtheta2",
    ]);
    let mut profiles = Vec::with_capacity(SAMPLES);
    for i in 0..SAMPLES {
        let t = TAU * i as f64 / SAMPLES as f64;
        let (k1, k2) = fam.k().eval(t);
        let (mu0, nu0) = (fam.mu0().eval(t), fam.nu0().eval(t));
        let th = p.theta(t);
        table.push(
            [t, k1, k2, mu0, nu0, th[0], th[1], th[2], th[3]]
                .iter()
                .map(|&x| num(x))
                .collect(),
        );
        profiles.push(json!({
            "theta": t, "k1": k1, "k2": k2, "mu0": mu0, "nu0": nu0,
            "theta1": th[0], "theta2": th[1], "dtheta1": th[2], "dtheta2": th[3],
        }));
    }
    let mut map_samples = Vec::new();
    for &r in &job.radii {
        for i in 0..16 {
            let t = TAU * i as f64 / 16.0;
            let w = eval_stretching(&f, Complex64::from_polar(r, t))?;
            map_samples.push(json!({ "r": r, "theta": t, "re": w.re, "im": w.im }));
        }
    }

    let residual =
        beltrami_residual_exact(&f, &pair, &residual_grid(job.nodes, &fam.breakpoints())?)?;
    let cfg = job.sweep_config()?;
    let beta = beta_estimate(&pair, &cfg)?;
    let mu_zero = fam.mu0().is_identically(0.0);
    let nu_zero = fam.nu0().is_identically(0.0);
    let residual_ok = residual.max_residual <= job.tolerance;
    let vanishing_ok = mu_zero == (tau == 0.0) && nu_zero == (tau == 1.0);
    let json = json!({
        "command": "sharp",
        "params": p,
        "breakpoints": fam.breakpoints(),
        "outer_arcs": {
            "k1": p.k_values().0, "k2": p.k_values().1,
            "mu0": p.munu_values().0, "nu0": p.munu_values().1,
        },
        "junction_defect": fam.junction_defect(),
        "profiles": profiles,
        "map_samples": map_samples,
        "clauses": {
            "solves_equation": {
                "max_residual": residual.max_residual,
                "tolerance": job.tolerance,
                "pass": residual_ok,
                "report": residual,
            },
            "beta_equals_alpha": {
                "beta": beta.bound,
                "alpha": p.alpha(),
                "rel_dev": (beta.bound - p.alpha()) / p.alpha(),
                "clamped": beta.clamped,
            },
            "vanishing": {
                "mu0_identically_zero": mu_zero,
                "nu0_identically_zero": nu_zero,
                "pass": vanishing_ok,
            },
        },
        "config": job_summary(job, &cfg),
    });
    let failure = if !residual_ok {
        Some(CliError::Verification(format!(
            "Beltrami residual {:e} exceeds {:e}",
            residual.max_residual, job.tolerance
        )))
    } else if !vanishing_ok {
        Some(CliError::Verification(
            "unexpected vanishing pattern of the coefficients".into(),
        ))
    } else {
        None
    };
    Ok(Output {
        json,
        table,
        failure,
    })
}

/// Map built from the source together with the coefficient breakpoints.
fn constructed_map(src: &Source, nodes: usize) -> Result<(AngularStretching, Vec<f64>), CliError> {
    match src {
        Source::Sharp { m, tau } => {
            let fam = build_family_on(*m, *tau, nodes)?;
            Ok((build_maps(&fam)?.0, fam.breakpoints().to_vec()))
        }
        Source::RadialStretch { alpha } => {
            Ok((AngularStretching::power(*alpha, nodes)?, Vec::new()))
        }
        Source::Angular { intervals } => {
            let (mu0, nu0) = src.profiles()?;
            let k = k_from_munu(&mu0, &nu0)?;
            let breaks = if intervals.len() > 1 {
                intervals.iter().map(|i| i.start).collect()
            } else {
                Vec::new()
            };
            Ok((periodic_stretching(&k, 1)?, breaks))
        }
    }
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    /// `"max"`: value must not exceed the tolerance; `"min"`: must reach it.
    kind: &'static str,
    pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            kind: "max",
            pass: value <= tolerance,
        }
    }

    fn at_least(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            kind: "min",
            pass: value >= tolerance,
        }
    }
}

pub fn verify(job: &Job) -> Result<Output, CliError> {
    let src = &job.points[0];
    let (map, breaks) = constructed_map(src, job.nodes)?;
    let pair = src.pair(job.flip_mu)?;
    let (b, bt) = beltrami_to_matrices(&pair)?;

    let exact = beltrami_residual_exact(&map, &pair, &residual_grid(job.nodes, &breaks)?)?;
    let fd_base = PolarGrid::geometric(0.25, 1.0, 9, angular_grid(64, &breaks)?)?;
    let (fd, _) = refinement_study(&fd_base, 3, |g| {
        beltrami_residual(
            &PolarSamples::try_from_fn(g, |z| eval_stretching(&map, z))?,
            &pair,
        )
    })?;
    let weak_base = PolarGrid::geometric(0.25, 1.0, 9, angular_grid(32, &breaks)?)?;
    let weak = |imag: bool| -> Result<ResidualReport, CliError> {
        let a = if imag { &bt } else { &b };
        let (fin, _) = refinement_study(&weak_base, 3, |g| {
            let s = PolarSamples::try_from_fn(g, |z| {
                let w = eval_stretching(&map, z)?;
                Ok(if imag { w.im } else { w.re })
            })?;
            Ok(weak_form_residual(&s, a)?.report)
        })?;
        Ok(fin)
    };
    let weak_re = weak(false)?;
    let weak_im = weak(true)?;
    let holder = empirical_holder(&PolarSamples::try_from_fn(
        &PolarGrid::dyadic(10, angular_grid(512, &breaks)?)?,
        |z| eval_stretching(&map, z),
    )?)?;

    let checks = vec![
        Check::at_most("beltrami_residual", exact.max_residual, job.tolerance),
        Check::at_least(
            "weak_mean_slope_real_part",
            weak_re.mean_slope.unwrap_or(f64::NAN),
            MIN_WEAK_MEAN_SLOPE,
        ),
        Check::at_least(
            "weak_max_slope_real_part",
            weak_re.slope.unwrap_or(f64::NAN),
            MIN_WEAK_MAX_SLOPE,
        ),
        Check::at_least(
            "weak_mean_slope_imaginary_part",
            weak_im.mean_slope.unwrap_or(f64::NAN),
            MIN_WEAK_MEAN_SLOPE,
        ),
        Check::at_least(
            "weak_max_slope_imaginary_part",
            weak_im.slope.unwrap_or(f64::NAN),
            MIN_WEAK_MAX_SLOPE,
        ),
        Check::at_most(
            "holder_deviation",
            (holder.exponent - map.alpha()).abs(),
            HOLDER_TOLERANCE,
        ),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let mut warnings = Vec::new();
    if job.flip_mu && src.profiles()?.0.is_identically(0.0) {
        warnings.push("flip_mu has no effect because mu vanishes identically");
    }
    let mut table = Table::new(&["check", "value", "tolerance", "kind", "pass"]);
    for c in &checks {
        table.push(vec![
            c.name.into(),
            num(c.value),
            num(c.tolerance),
            c.kind.into(),
            c.pass.to_string(),
        ]);
    }
    let json = json!({
        "command": "verify",
        "source": src,
        "flip_mu": job.flip_mu,
        "alpha": map.alpha(),
        "target": src.target(),
        "pass": pass,
        "warnings": warnings,
        "checks": checks,
        "exact_residual": exact,
        "finite_difference_residual": fd,
        "weak_residual_real_part": weak_re,
        "weak_residual_imaginary_part": weak_im,
        "holder": holder,
    });
    let failure = (!pass).then(|| {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        CliError::Verification(format!("failed checks: {}", failed.join(", ")))
    });
    Ok(Output {
        json,
        table,
        failure,
    })
}
