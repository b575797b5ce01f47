mod common;

use std::f64::consts::{PI, TAU};

use beltrami_core::estimator::*;
use beltrami_core::field::AngularProfile;
use beltrami_core::periodic::CircleSpec;
use beltrami_core::reduction::{beltrami_to_matrices, normalize_matrix, BeltramiPair, MatrixField};
use beltrami_core::sharp_family::build_family;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_optimizer() -> OptimizerSettings {
    OptimizerSettings {
        starts: 2,
        min_step: 1e-4,
        ..OptimizerSettings::default()
    }
}

fn small_cfg(family: WeightFamily) -> SweepConfig {
    let circles = vec![
        CircleSpec::origin(0.5, 256).unwrap(),
        CircleSpec::new(Complex64::new(0.3, 0.1), 0.5, 256).unwrap(),
        CircleSpec::new(Complex64::new(-0.2, -0.4), 0.3, 256).unwrap(),
    ];
    SweepConfig::new(circles, family)
        .unwrap()
        .with_optimizer(small_optimizer())
}

#[test]
fn nu_zero_bound_matches_exact_sector_sum() {
    // on an origin circle n̄²μ = -μ₀, so the mean is Σ |I_j|/2π · (1+m_j)/(1-m_j)
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rand::Rng::gen_range(&mut rng, 1..6);
        let b = common::random_breakpoints(&mut rng, n, 0.1);
        let m: Vec<f64> = (0..n)
            .map(|_| rand::Rng::gen_range(&mut rng, -0.8..0.8))
            .collect();
        let mu0 = AngularProfile::piecewise(&b, &m).unwrap();
        let pair = BeltramiPair::angular(&mu0, &AngularProfile::constant(0.0)).unwrap();
        let cfg = SweepConfig::origin_centered(&[0.3, 0.7], 512, WeightFamily::Constant).unwrap();
        let mean: f64 = (0..n)
            .map(|j| {
                let len = if j + 1 < n {
                    b[j + 1] - b[j]
                } else {
                    b[0] + TAU - b[j]
                };
                len / TAU * (1.0 + m[j]) / (1.0 - m[j])
            })
            .sum();
        let exact = (1.0 / mean).min(1.0);
        let got = nu_zero_bound(&pair, &cfg).unwrap();
        assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");
        assert!((got - corollary_bound(&pair, &cfg).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn mu_zero_bound_on_two_valued_nu() {
    let f = build_family(4.0, 0.0).unwrap();
    let pair = f.pair().unwrap();
    let cfg = SweepConfig::origin_centered(&[0.5], 512, WeightFamily::Constant).unwrap();
    let d = 4.0 / PI * 0.5f64.atan();
    assert!((mu_zero_bound(&pair, &cfg).unwrap() - d).abs() < 1e-12);
    assert!((d - 0.590334).abs() < 1e-6);
    let k = 1.0 / classical_bound(&pair).unwrap();
    assert!(mu_zero_bound(&pair, &cfg).unwrap() >= 4.0 / PI * (1.0 / k).atan());
}

#[test]
fn constant_nu_gives_unit_mu_zero_bound() {
    let pair = BeltramiPair::constant(Complex64::new(0.0, 0.0), Complex64::new(0.4, 0.0)).unwrap();
    let cfg = small_cfg(WeightFamily::Constant);
    assert!((mu_zero_bound(&pair, &cfg).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn gamma_of_sharp_matrix() {
    let f = build_family(4.0, 0.0).unwrap();
    let a = beltrami_core::sharp_family::build_matrix(&f);
    let cfg = SweepConfig::origin_centered(&[0.5], 2048, WeightFamily::Piecewise)
        .unwrap()
        .with_pieces(64);
    let r = gamma_estimate(&a, &cfg).unwrap();
    assert!((r.bound / f.alpha() - 1.0).abs() < 0.02, "{}", r.bound);
}

#[test]
fn gamma_rejects_nonsymmetric() {
    let a = MatrixField::Constant(beltrami_core::linalg::Mat2::new(1.0, 0.2, 0.0, 1.0));
    assert!(gamma_estimate(&a, &small_cfg(WeightFamily::Constant)).is_err());
}

#[test]
fn report_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pair = common::random_angular_pair(&mut rng, 4, 0.8);
    let cfg = small_cfg(WeightFamily::All).with_pieces(8);
    let r = beta_estimate(&pair, &cfg).unwrap();
    assert_eq!(r.per_circle_values.len(), 3);
    let sup = r
        .per_circle_values
        .iter()
        .map(|c| c.value)
        .fold(f64::MIN, f64::max);
    assert_eq!(sup, r.sup_inf);
    assert!(r.bound > 0.0 && r.bound <= 1.0);
    if !r.clamped {
        assert!((r.bound * r.sup_inf - 1.0).abs() < 1e-15);
    }
    let json = serde_json::to_string(&r.per_circle_values).unwrap();
    assert!(json.contains("constant"));
    // origin circles of an angular field are evaluated once
    let two = SweepConfig::origin_centered(&[0.2, 0.6], 256, WeightFamily::Constant).unwrap();
    assert_eq!(
        beta_estimate(&pair, &two)
            .unwrap()
            .diagnostics
            .distinct_circles,
        1
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn orderings_hold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = common::random_angular_pair(&mut rng, 4, 0.85);
        let cfg = small_cfg(WeightFamily::All).with_pieces(8);
        let r = beta_estimate(&pair, &cfg).unwrap();
        let cor = corollary_bound(&pair, &cfg).unwrap();
        let cl = classical_bound(&pair).unwrap();
        prop_assert!(r.bound >= cor);
        prop_assert!(r.bound >= cl);
        prop_assert!(r.remark_bound.unwrap() >= cl);
        prop_assert!(r.bound > 0.0 && r.bound <= 1.0);
        prop_assert!(cor > 0.0 && cor <= 1.0);
    }

    #[test]
    fn beta_equals_gamma_of_b(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = common::random_angular_pair(&mut rng, 3, 0.8);
        let cfg = small_cfg(WeightFamily::All).with_pieces(6);
        let (b, _) = beltrami_to_matrices(&pair).unwrap();
        let rb = beta_estimate(&pair, &cfg).unwrap();
        let rg = gamma_estimate(&b, &cfg).unwrap();
        prop_assert!((rb.bound - rg.bound).abs() < 1e-10, "{} {}", rb.bound, rg.bound);
    }

    #[test]
    fn objective_dual_identity(seed in any::<u64>(), cx in -0.3..0.3f64, cy in -0.3..0.3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = common::random_angular_pair(&mut rng, 4, 0.85);
        let (a, _) = beltrami_to_matrices(&pair).unwrap();
        let ah = normalize_matrix(&a);
        let c = CircleSpec::new(Complex64::new(cx, cy), 0.4, 128).unwrap();
        let fam = 6;
        let d1 = matrix_circle_data(&a, &c, fam).unwrap();
        let d2 = matrix_circle_data(&ah, &c, fam).unwrap();
        let n = d1.grid().pieces().len();
        let phi: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0.2..5.0)).collect();
        let psi: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0.2..5.0)).collect();
        let w = WeightPair::piecewise(d1.grid(), &phi, &psi).unwrap();
        let q1 = objective(&d1, &w).unwrap();
        let q2 = objective(&d2, &w.dual()).unwrap();
        prop_assert!((q1 - q2).abs() <= 1e-12 * q1, "{q1} {q2}");
    }

    #[test]
    fn more_circles_never_raise_the_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = common::random_angular_pair(&mut rng, 3, 0.8);
        let small = small_cfg(WeightFamily::Piecewise).with_pieces(4);
        let mut big = small.clone();
        big.circles.push(CircleSpec::new(Complex64::new(0.0, 0.5), 0.45, 256).unwrap());
        prop_assert!(beta_estimate(&pair, &big).unwrap().bound <= beta_estimate(&pair, &small).unwrap().bound);
    }

    #[test]
    fn more_weights_never_lower_the_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = common::random_angular_pair(&mut rng, 3, 0.8);
        let b = |f| beta_estimate(&pair, &small_cfg(f).with_pieces(4)).unwrap().bound;
        let (c, r, p, a) = (
            b(WeightFamily::Constant),
            b(WeightFamily::Remark),
            b(WeightFamily::Piecewise),
            b(WeightFamily::All),
        );
        prop_assert!(c <= r && c <= p && r <= a && p <= a);
    }

    #[test]
    fn mu_zero_dominates_corollary(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, nu0) = common::random_angular_profiles(&mut rng, 4, 0.85);
        let pair = BeltramiPair::angular(&AngularProfile::constant(0.0), &nu0).unwrap();
        let cfg = small_cfg(WeightFamily::Constant);
        let mz = mu_zero_bound(&pair, &cfg).unwrap();
        prop_assert!(corollary_bound(&pair, &cfg).unwrap() <= mz + 1e-14);
        let origin = SweepConfig::origin_centered(&[0.5], 256, WeightFamily::Constant).unwrap();
        let eq = (corollary_bound(&pair, &origin).unwrap() - mu_zero_bound(&pair, &origin).unwrap()).abs();
        prop_assert!(eq < 1e-12);
    }
}
