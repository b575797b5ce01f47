//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use beltrami_core::estimator::*;
use beltrami_core::field::AngularProfile;
use beltrami_core::periodic::{AngularGrid, CircleSpec};
use beltrami_core::reduction::{
    beltrami_to_matrices, matrix_to_pair, normalize_matrix, pair_to_matrices, BeltramiPair,
};
use beltrami_core::sharp_family::{build_family, build_maps, build_matrix};
use beltrami_core::stretching::{
    differential_quantities, eval_stretching, find_periodic_alpha, knorm_distortion,
    quantities_from_profile, solve_system, sturm_liouville_residuals, AngularStretching, KProfile,
};
use beltrami_core::verify::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn run(id: u32, title: &str, budget: Duration, body: impl FnOnce() -> Check) -> bool {
    let t0 = Instant::now();
    let outcome = body();
    let dt = t0.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) if dt <= budget => (true, d),
        Ok(d) => (
            false,
            format!("{d}; over budget {:.1}s", budget.as_secs_f64()),
        ),
        Err(e) => (false, e),
    };
    println!(
        "{} criterion {id} {title}: {detail} ({:.2}s)",
        if ok { "PASS" } else { "FAIL" },
        dt.as_secs_f64()
    );
    ok
}

fn radial_stretch(alpha: f64) -> Check {
    let pair = BeltramiPair::radial_stretch(alpha).map_err(err)?;
    let cfg = SweepConfig::origin_centered(&[0.25, 0.5, 0.75], 512, WeightFamily::All)
        .map_err(err)?
        .with_pieces(16);
    let cl = classical_bound(&pair).map_err(err)?;
    let co = corollary_bound(&pair, &cfg).map_err(err)?;
    let be = beta_estimate(&pair, &cfg).map_err(err)?.bound;
    let worst = [cl, co, be]
        .iter()
        .map(|v| (v - alpha).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-6, || {
        format!("alpha={alpha}: classical={cl} corollary={co} beta={be}")
    })?;
    Ok(format!("alpha={alpha} max deviation {worst:.1e}"))
}

fn origin_cfg(nodes: usize) -> Result<SweepConfig, String> {
    SweepConfig::origin_centered(&[0.5], nodes, WeightFamily::All).map_err(err)
}

fn sharp_tau_zero() -> Check {
    let mut out = Vec::new();
    for m in [2.0f64, 4.0] {
        let fam = build_family(m, 0.0).map_err(err)?;
        let pair = fam.pair().map_err(err)?;
        let d = 4.0 / PI * m.powf(-0.5).atan();
        let cfg = origin_cfg(2048)?;
        let b = beta_estimate(&pair, &cfg).map_err(err)?.bound;
        let mz = mu_zero_bound(&pair, &cfg).map_err(err)?;
        ensure((b / d - 1.0).abs() < 0.02, || {
            format!("M={m}: beta={b} d={d}")
        })?;
        ensure((mz - d).abs() < 1e-10, || {
            format!("M={m}: mu_zero={mz} d={d}")
        })?;
        out.push(format!("M={m} beta={b:.6} d={d:.6}"));
    }
    Ok(out.join(", "))
}

fn sharp_tau_one() -> Check {
    let m = 1.5;
    let fam = build_family(m, 1.0).map_err(err)?;
    let target = (1.0 + 1.0 / m) / 2.0;
    let b = beta_estimate(&fam.pair().map_err(err)?, &origin_cfg(2048)?)
        .map_err(err)?
        .bound;
    ensure((b / target - 1.0).abs() < 0.02, || {
        format!("beta={b} target={target}")
    })?;
    Ok(format!("beta={b:.6} target={target:.6}"))
}

fn mixed_case() -> Check {
    let fam = build_family(1.5, 0.5).map_err(err)?;
    ensure(!fam.mu0().is_identically(0.0), || "mu0 vanishes".into())?;
    ensure(!fam.nu0().is_identically(0.0), || "nu0 vanishes".into())?;
    let pair = fam.pair().map_err(err)?;
    let b = beta_estimate(&pair, &origin_cfg(2048)?).map_err(err)?.bound;
    let cl = classical_bound(&pair).map_err(err)?;
    ensure(b > cl, || format!("beta={b} classical={cl}"))?;
    let (f, _) = build_maps(&fam).map_err(err)?;
    let grid = PolarGrid::geometric(
        0.05,
        1.0,
        16,
        AngularGrid::with_breakpoints(1024, &fam.breakpoints()).map_err(err)?,
    )
    .map_err(err)?;
    let r = beltrami_residual_exact(&f, &pair, &grid).map_err(err)?;
    ensure(r.max_residual < 1e-8, || {
        format!("residual {}", r.max_residual)
    })?;
    Ok(format!(
        "beta={b:.6} classical={cl:.6} residual={:.1e}",
        r.max_residual
    ))
}

fn reduction_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut trip, mut tilde) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let s = rng.gen_range(0.0..0.95);
        let w = rng.gen_range(0.0..=1.0);
        let mu = Complex64::from_polar(s * w, rng.gen_range(0.0..TAU));
        let nu = Complex64::new(
            s * (1.0 - w) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            0.0,
        );
        let (b, bt) = pair_to_matrices(mu, nu).map_err(err)?;
        let (m2, n2) = matrix_to_pair(b).map_err(err)?;
        trip = trip.max((m2 - mu).norm()).max((n2 - nu).norm());
        tilde = tilde.max(bt.max_abs_diff(&b.scale(1.0 / b.det())));
    }
    ensure(trip < 1e-12, || format!("round trip {trip:.1e}"))?;
    ensure(tilde < 1e-12, || format!("tilde {tilde:.1e}"))?;

    let mut dual = 0.0f64;
    for _ in 0..1000 {
        let pair = common::random_angular_pair(&mut rng, 4, 0.9);
        let (a, _) = beltrami_to_matrices(&pair).map_err(err)?;
        let ah = normalize_matrix(&a);
        let c = CircleSpec::new(
            Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
            rng.gen_range(0.1..0.6),
            64,
        )
        .map_err(err)?;
        let d1 = matrix_circle_data(&a, &c, 4).map_err(err)?;
        let d2 = matrix_circle_data(&ah, &c, 4).map_err(err)?;
        let n = d1.grid().pieces().len();
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
        let psi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
        let w = WeightPair::piecewise(d1.grid(), &phi, &psi).map_err(err)?;
        let q1 = objective(&d1, &w).map_err(err)?;
        let q2 = objective(&d2, &w.dual()).map_err(err)?;
        dual = dual.max((q1 - q2).abs() / q1);
    }
    ensure(dual < 1e-12, || format!("dual identity {dual:.1e}"))?;
    Ok(format!(
        "round trip {trip:.1e}, tilde {tilde:.1e}, dual {dual:.1e}"
    ))
}

fn orderings() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let circles = vec![
        CircleSpec::origin(0.5, 256).map_err(err)?,
        CircleSpec::new(Complex64::new(0.3, 0.1), 0.5, 256).map_err(err)?,
        CircleSpec::new(Complex64::new(-0.2, -0.4), 0.3, 256).map_err(err)?,
        CircleSpec::new(Complex64::new(0.0, 0.6), 0.35, 256).map_err(err)?,
    ];
    let opt = OptimizerSettings {
        starts: 2,
        min_step: 1e-4,
        ..OptimizerSettings::default()
    };
    let cfg = SweepConfig::new(circles, WeightFamily::All)
        .map_err(err)?
        .with_pieces(8)
        .with_optimizer(opt);
    let mut violations = 0;
    let mut margin = f64::INFINITY;
    for _ in 0..200 {
        let pair = common::random_angular_pair(&mut rng, 5, 0.9);
        let b = beta_estimate(&pair, &cfg).map_err(err)?.bound;
        let co = corollary_bound(&pair, &cfg).map_err(err)?;
        let cl = classical_bound(&pair).map_err(err)?;
        if b < co || b < cl {
            violations += 1;
        }
        margin = margin.min(b - co.max(cl));
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("0 violations, smallest margin {margin:.2e}"))
}

fn ode_machinery() -> Check {
    let mut worst_k = 0.0f64;
    let piecewise =
        AngularProfile::piecewise(&[0.0, 1.0, 2.5, 4.0], &[1.5, 0.7, 2.2, 1.1]).map_err(err)?;
    let integral = 1.5 * 1.0 + 0.7 * 1.5 + 2.2 * 1.5 + 1.1 * (TAU - 4.0);
    let inverse = piecewise.map(|v| 1.0 / v);
    let cases = [
        (KProfile::constant(1.7, 1.0 / 1.7).map_err(err)?, TAU * 1.7),
        (KProfile::constant(0.6, 1.0 / 0.6).map_err(err)?, TAU * 0.6),
        (KProfile::new(piecewise, inverse).map_err(err)?, integral),
    ];
    for (k, int) in &cases {
        for n in [1u32, 2] {
            let a = find_periodic_alpha(k, n).map_err(err)?;
            let exact = TAU * n as f64 / int;
            ensure((a - exact).abs() < 1e-9, || {
                format!("branch {n}: {a} vs {exact}")
            })?;
            worst_k = worst_k.max((a - exact).abs());
        }
    }
    let (mut worst_s, mut worst_t, mut worst_sl) = (0.0f64, 0.0f64, 0.0f64);
    for (m, tau) in [(2.0, 0.0), (4.0, 0.0), (1.5, 0.5), (1.5, 1.0), (3.0, 0.3)] {
        let fam = build_family(m, tau).map_err(err)?;
        let a = find_periodic_alpha(fam.k(), 1).map_err(err)?;
        worst_s = worst_s.max((a - fam.alpha()).abs());
        let (f, _) = build_maps(&fam).map_err(err)?;
        let e0 = f.profile_at(0.0);
        let s = solve_system(fam.k(), fam.alpha(), [e0[0], e0[1]]).map_err(err)?;
        for t in s.grid().nodes() {
            let (x, y) = (s.profile_at(t), f.profile_at(t));
            worst_t = worst_t.max((x[0] - y[0]).abs()).max((x[1] - y[1]).abs());
        }
        let (r1, r2) = sturm_liouville_residuals(&s, fam.k());
        worst_sl = worst_sl.max(r1).max(r2);
    }
    ensure(worst_s < 1e-9, || {
        format!("sharp exponent error {worst_s:.1e}")
    })?;
    ensure(worst_t < 1e-10, || format!("profile error {worst_t:.1e}"))?;
    ensure(worst_sl < 1e-8, || {
        format!("Sturm-Liouville residual {worst_sl:.1e}")
    })?;
    Ok(format!(
        "k-integral {worst_k:.1e}, sharp {worst_s:.1e}, profiles {worst_t:.1e}, SL {worst_sl:.1e}"
    ))
}

fn verification_suite() -> Check {
    let fam = build_family(4.0, 0.0).map_err(err)?;
    let (f, u) = build_maps(&fam).map_err(err)?;
    let a = build_matrix(&fam);
    let base = PolarGrid::geometric(
        0.25,
        1.0,
        9,
        AngularGrid::with_breakpoints(32, &fam.breakpoints()).map_err(err)?,
    )
    .map_err(err)?;
    let (fin, all) = refinement_study(&base, 3, |g| {
        Ok(weak_form_residual(&PolarSamples::try_from_fn(g, |z| u.eval(z))?, &a)?.report)
    })
    .map_err(err)?;
    let slope = fin.slope.ok_or("no slope")?;
    ensure(slope >= 1.0, || format!("weak slope {slope}"))?;
    ensure(
        all.windows(2)
            .all(|w| w[1].max_residual < w[0].max_residual),
        || "weak residual not decreasing".into(),
    )?;

    let g = PolarGrid::dyadic(10, AngularGrid::uniform(256).map_err(err)?).map_err(err)?;
    let h_id = empirical_holder(&PolarSamples::from_fn(&g, |z| z))
        .map_err(err)?
        .exponent;
    let rs = AngularStretching::power(0.5, 256).map_err(err)?;
    let h_rs =
        empirical_holder(&PolarSamples::try_from_fn(&g, |z| eval_stretching(&rs, z)).map_err(err)?)
            .map_err(err)?
            .exponent;
    let gs = PolarGrid::dyadic(
        10,
        AngularGrid::with_breakpoints(512, &fam.breakpoints()).map_err(err)?,
    )
    .map_err(err)?;
    let h_f =
        empirical_holder(&PolarSamples::try_from_fn(&gs, |z| eval_stretching(&f, z)).map_err(err)?)
            .map_err(err)?
            .exponent;
    ensure((h_id - 1.0).abs() < 0.01, || format!("holder(z) = {h_id}"))?;
    ensure((h_rs - 0.5).abs() < 0.01, || {
        format!("holder(radial) = {h_rs}")
    })?;
    ensure((h_f - fam.alpha()).abs() < 0.01, || {
        format!("holder(f) = {h_f} vs {}", fam.alpha())
    })?;
    Ok(format!(
        "weak slope {slope:.2}, holder z={h_id:.4} radial={h_rs:.4} sharp={h_f:.4} (target {:.4})",
        fam.alpha()
    ))
}

fn distortion_identities() -> Check {
    let mut worst = 0.0f64;
    let k1 = AngularProfile::piecewise(&[0.0, 2.0, 4.5], &[1.8, 0.5, 1.2]).map_err(err)?;
    let k2 = AngularProfile::piecewise(&[0.0, 1.0, 3.0], &[0.7, 2.5, 1.4]).map_err(err)?;
    let general = KProfile::new(k1, k2).map_err(err)?;
    for (k, alpha, init) in [
        (&general, 0.83, [0.4, -1.0]),
        (&general, 1.7, [1.0, 0.2]),
        (&KProfile::constant(3.0, 0.5).map_err(err)?, 0.6, [0.0, 1.0]),
    ] {
        let s = solve_system(k, alpha, init).map_err(err)?;
        for t in s.grid().nodes() {
            let e = s.profile_at(t);
            let q = quantities_from_profile(s.alpha(), e);
            let (a, b) = k.eval(t);
            let kn = knorm_distortion(a, b, e[0], e[1]);
            worst = worst.max((kn - q.distortion).abs() / q.distortion);
        }
    }
    ensure(worst < 1e-10, || format!("knorm mismatch {worst:.1e}"))?;
    let mut radial = 0.0f64;
    for alpha in [0.25, 0.5, 0.75, 1.0] {
        let k = 1.0 / alpha;
        let s = AngularStretching::power(alpha, 256).map_err(err)?;
        for t in s.grid().nodes() {
            let q = differential_quantities(&s, t).map_err(err)?;
            radial = radial.max((q.distortion - k.max(1.0 / k)).abs());
        }
    }
    ensure(radial <= 4.0 * f64::EPSILON * 4.0, || {
        format!("radial distortion error {radial:.1e}")
    })?;
    Ok(format!("knorm {worst:.1e}, radial {radial:.1e}"))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= run(1, "radial-stretch sharpness", secs(3), || {
        let mut parts = Vec::new();
        for alpha in [0.25, 0.5, 0.75] {
            let t0 = Instant::now();
            parts.push(radial_stretch(alpha)?);
            ensure(t0.elapsed() < secs(1), || {
                format!("alpha={alpha} took {:?}", t0.elapsed())
            })?;
        }
        Ok(parts.join("; "))
    });
    ok &= run(2, "sharp family, tau = 0", secs(30), sharp_tau_zero);
    ok &= run(3, "sharp family, tau = 1", secs(30), sharp_tau_one);
    ok &= run(4, "mixed case tau = 0.5", secs(30), mixed_case);
    ok &= run(5, "reduction identities", secs(5), reduction_identities);
    ok &= run(6, "ordering properties", secs(60), orderings);
    ok &= run(7, "ODE machinery", secs(5), ode_machinery);
    ok &= run(8, "verification suite", secs(60), verification_suite);
    ok &= run(9, "distortion identities", secs(1), distortion_identities);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
