#![allow(dead_code)]

use std::f64::consts::TAU;

use beltrami_core::field::AngularProfile;
use beltrami_core::reduction::BeltramiPair;
use rand::Rng;

/// Sorted random breakpoints in `[0, 2π)` at least `gap` apart.
pub fn random_breakpoints<R: Rng>(rng: &mut R, pieces: usize, gap: f64) -> Vec<f64> {
    loop {
        let mut b: Vec<f64> = (0..pieces).map(|_| rng.gen_range(0.0..TAU)).collect();
        b.sort_by(f64::total_cmp);
        let ok = b.windows(2).all(|w| w[1] - w[0] > gap) && (b[0] + TAU - b[pieces - 1]) > gap;
        if ok {
            return b;
        }
    }
}

/// Piecewise-constant angular `(μ₀, ν₀)` with `|μ₀| + |ν₀| ≤ smax`.
pub fn random_angular_profiles<R: Rng>(
    rng: &mut R,
    max_pieces: usize,
    smax: f64,
) -> (AngularProfile, AngularProfile) {
    let n = rng.gen_range(1..=max_pieces);
    let b = random_breakpoints(rng, n, 0.2);
    let mut mu = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    for _ in 0..n {
        let s = rng.gen_range(0.0..smax);
        let w = rng.gen_range(0.0..=1.0);
        let sm = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let sn = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        mu.push(sm * s * w);
        nu.push(sn * s * (1.0 - w));
    }
    (
        AngularProfile::piecewise(&b, &mu).unwrap(),
        AngularProfile::piecewise(&b, &nu).unwrap(),
    )
}

pub fn random_angular_pair<R: Rng>(rng: &mut R, max_pieces: usize, smax: f64) -> BeltramiPair {
    let (mu0, nu0) = random_angular_profiles(rng, max_pieces, smax);
    BeltramiPair::angular(&mu0, &nu0).unwrap()
}
