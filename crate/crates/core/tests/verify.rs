use beltrami_core::periodic::AngularGrid;
use beltrami_core::reduction::{beltrami_to_matrices, BeltramiPair, MatrixField};
use beltrami_core::sharp_family::{build_family, build_maps, build_matrix};
use beltrami_core::stretching::{eval_stretching, AngularStretching};
use beltrami_core::verify::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn sharp_grid(b: &[f64], nodes: usize, radii: usize) -> PolarGrid {
    PolarGrid::geometric(
        0.25,
        1.0,
        radii,
        AngularGrid::with_breakpoints(nodes, b).unwrap(),
    )
    .unwrap()
}

#[test]
fn radial_stretch_solves_its_equation() {
    for alpha in [0.25, 0.5, 0.75] {
        let pair = BeltramiPair::radial_stretch(alpha).unwrap();
        let f = AngularStretching::power(alpha, 256).unwrap();
        let g = PolarGrid::geometric(0.1, 1.0, 12, AngularGrid::uniform(256).unwrap()).unwrap();
        let r = beltrami_residual_exact(&f, &pair, &g).unwrap();
        assert!(r.max_residual < 1e-8, "{}", r.max_residual);
    }
}

#[test]
fn sharp_maps_solve_their_equations() {
    for (m, tau) in [(4.0, 0.0), (1.5, 0.5), (1.5, 1.0), (2.0, 0.3)] {
        let fam = build_family(m, tau).unwrap();
        let (f, _) = build_maps(&fam).unwrap();
        let pair = fam.pair().unwrap();
        let g = sharp_grid(&fam.breakpoints(), 512, 10);
        let r = beltrami_residual_exact(&f, &pair, &g).unwrap();
        assert!(r.max_residual < 1e-8, "M={m} tau={tau}: {}", r.max_residual);
        assert!(r.evaluated > 4000);
    }
}

#[test]
fn sampled_sharp_map_residual_is_second_order() {
    let fam = build_family(1.5, 0.5).unwrap();
    let (f, _) = build_maps(&fam).unwrap();
    let pair = fam.pair().unwrap();
    let (fin, all) = refinement_study(&sharp_grid(&fam.breakpoints(), 64, 9), 3, |g| {
        beltrami_residual(
            &PolarSamples::try_from_fn(g, |z| eval_stretching(&f, z))?,
            &pair,
        )
    })
    .unwrap();
    assert!(all[2].max_residual < all[0].max_residual);
    assert!(fin.slope.unwrap() > 1.8, "{:?}", fin.slope);
}

#[test]
fn sharp_scalar_map_is_weak_solution() {
    let fam = build_family(4.0, 0.0).unwrap();
    let (_, u) = build_maps(&fam).unwrap();
    let a = build_matrix(&fam);
    let (fin, _) = refinement_study(&sharp_grid(&fam.breakpoints(), 32, 9), 3, |g| {
        Ok(weak_form_residual(&PolarSamples::try_from_fn(g, |z| u.eval(z))?, &a)?.report)
    })
    .unwrap();
    assert!(fin.slope.unwrap() >= 1.0);
    assert!(fin.warnings.is_empty());
}

#[test]
fn real_and_imaginary_parts_solve_reduced_equations() {
    let fam = build_family(1.5, 0.5).unwrap();
    let (f, _) = build_maps(&fam).unwrap();
    let (b, bt) = beltrami_to_matrices(&fam.pair().unwrap()).unwrap();
    for (a, part) in [(&b, 0), (&bt, 1)] {
        let (fin, _) = refinement_study(&sharp_grid(&fam.breakpoints(), 32, 9), 3, |g| {
            let s = PolarSamples::try_from_fn(g, |z| {
                let w = eval_stretching(&f, z)?;
                Ok(if part == 0 { w.re } else { w.im })
            })?;
            Ok(weak_form_residual(&s, a)?.report)
        })
        .unwrap();
        assert!(fin.slope.unwrap() >= 1.0, "part {part}: {:?}", fin.slope);
    }
}

#[test]
fn misaligned_mesh_is_reported() {
    let fam = build_family(2.0, 0.5).unwrap();
    let (_, u) = build_maps(&fam).unwrap();
    let g = PolarGrid::geometric(0.25, 1.0, 5, AngularGrid::uniform(30).unwrap()).unwrap();
    let s = PolarSamples::try_from_fn(&g, |z| u.eval(z)).unwrap();
    let w = weak_form_residual(&s, &build_matrix(&fam)).unwrap();
    assert!(!w.report.warnings.is_empty());
}

#[test]
fn holder_exponents() {
    let angles = AngularGrid::uniform(256).unwrap();
    let g = PolarGrid::dyadic(10, angles).unwrap();
    let id = empirical_holder(&PolarSamples::from_fn(&g, |z| z)).unwrap();
    assert!((id.exponent - 1.0).abs() < 0.01);
    let rs = AngularStretching::power(0.5, 256).unwrap();
    let h = empirical_holder(&PolarSamples::try_from_fn(&g, |z| eval_stretching(&rs, z)).unwrap())
        .unwrap();
    assert!((h.exponent - 0.5).abs() < 0.01);
    let fam = build_family(4.0, 0.0).unwrap();
    let (f, _) = build_maps(&fam).unwrap();
    let gs = PolarGrid::dyadic(
        10,
        AngularGrid::with_breakpoints(512, &fam.breakpoints()).unwrap(),
    )
    .unwrap();
    let h = empirical_holder(&PolarSamples::try_from_fn(&gs, |z| eval_stretching(&f, z)).unwrap())
        .unwrap();
    assert!((h.exponent - fam.alpha()).abs() < 0.01, "{}", h.exponent);
    assert!(h.r_squared > 0.999);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residual_ignores_real_scaling(k in -3.0..3.0f64) {
        prop_assume!(k.abs() > 1e-3);
        let fam = build_family(2.0, 0.5).unwrap();
        let (f, _) = build_maps(&fam).unwrap();
        let pair = fam.pair().unwrap();
        let g = sharp_grid(&fam.breakpoints(), 64, 6);
        let s = PolarSamples::try_from_fn(&g, |z| eval_stretching(&f, z)).unwrap();
        let r1 = beltrami_residual(&s, &pair).unwrap();
        let r2 = beltrami_residual(&s.map(|v| v * k), &pair).unwrap();
        prop_assert!((r1.max_residual - r2.max_residual).abs() <= 1e-12 * r1.max_residual);
    }

    // with nu = 0 the equation is complex-linear
    #[test]
    fn residual_ignores_complex_scaling_without_nu(re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 1e-3);
        let fam = build_family(1.5, 1.0).unwrap();
        let (f, _) = build_maps(&fam).unwrap();
        let pair = fam.pair().unwrap();
        let g = sharp_grid(&fam.breakpoints(), 64, 6);
        let s = PolarSamples::try_from_fn(&g, |z| eval_stretching(&f, z)).unwrap();
        let r1 = beltrami_residual(&s, &pair).unwrap();
        let r2 = beltrami_residual(&s.map(|v| c * v), &pair).unwrap();
        prop_assert!((r1.max_residual - r2.max_residual).abs() <= 1e-12 * r1.max_residual);
    }

    #[test]
    fn weak_residual_is_homogeneous(s in 0.01..100.0f64) {
        let fam = build_family(2.0, 0.0).unwrap();
        let (_, u) = build_maps(&fam).unwrap();
        let a = build_matrix(&fam);
        let a2 = a.clone();
        let sa = MatrixField::planar(move |z| a2.eval(z, None).unwrap().scale(s), true);
        let g = sharp_grid(&fam.breakpoints(), 32, 5);
        let samples = PolarSamples::try_from_fn(&g, |z| u.eval(z)).unwrap();
        let w1 = weak_form_residual(&samples, &a).unwrap();
        let w2 = weak_form_residual(&samples, &sa).unwrap();
        let top = w1.vector.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in w1.vector.iter().zip(&w2.vector) {
            prop_assert!((s * x - y).abs() <= 1e-12 * s * top.max(1e-300));
        }
    }

    #[test]
    fn holder_ignores_profile_scale(k in 0.01..100.0f64) {
        let g = PolarGrid::dyadic(8, AngularGrid::uniform(64).unwrap()).unwrap();
        let rs = AngularStretching::power(0.3, 64).unwrap();
        let s = PolarSamples::try_from_fn(&g, |z| eval_stretching(&rs, z)).unwrap();
        let a = empirical_holder(&s).unwrap().exponent;
        let b = empirical_holder(&s.map(|v| v * k)).unwrap().exponent;
        prop_assert!((a - b).abs() < 1e-12);
    }
}
