//! Slow, independent oracles for the acceptance suite. Nothing here shares
//! code with the implementation paths it checks: the normal CDF is composite
//! Simpson quadrature, its inverse is bisection over that quadrature, and
//! the even-degree chi-square survival is the closed-form Erlang sum.
#![allow(dead_code)]

fn phi_simpson(x: f64, n: usize) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let a = x.abs().min(12.0);
    let h = a / n as f64;
    let mut sum = pdf(0.0) + pdf(a);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * pdf(i as f64 * h);
    }
    let integral = sum * h / 3.0;
    if x >= 0.0 {
        0.5 + integral
    } else {
        0.5 - integral
    }
}

/// Standard normal CDF by composite Simpson over [0, |x|].
pub fn phi_oracle(x: f64) -> f64 {
    phi_simpson(x, 40_000)
}

/// Inverse of the quadrature CDF by bisection (coarser grid inside the
/// loop; the bisection itself converges to ~1e-28, far below the grid
/// error of ~1e-11).
pub fn qnorm_oracle(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-12.0f64, 12.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if phi_simpson(mid, 2_000) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Chi-square survival at even degrees of freedom df = 2s:
/// exp(-x/2) * sum_{k < s} (x/2)^k / k!.
pub fn chi2_sf_even_oracle(x: f64, s: usize) -> f64 {
    assert!(s >= 1);
    if x <= 0.0 {
        return 1.0;
    }
    let half = x / 2.0;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..s {
        term *= half / k as f64;
        sum += term;
    }
    (-half).exp() * sum
}

/// Fisher's combination through the oracle route only.
pub fn fisher_oracle(p: &[f64]) -> f64 {
    let stat: f64 = -2.0 * p.iter().map(|x| x.ln()).sum::<f64>();
    chi2_sf_even_oracle(stat, p.len())
}

/// Stouffer's combination through the oracle route only.
pub fn stouffer_oracle(p: &[f64]) -> f64 {
    let z: f64 = p.iter().map(|&x| qnorm_oracle(1.0 - x)).sum();
    1.0 - phi_oracle(z / (p.len() as f64).sqrt())
}
