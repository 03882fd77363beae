//! Scalar probability helpers used across the crate: standard-normal pdf, cdf,
//! inverse cdf, and the closed-form expected improvement.

use std::f64::consts::PI;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density φ(x).
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cumulative distribution Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Inverse of the standard normal cdf, Φ⁻¹(p).
///
/// Acklam's rational approximation followed by one Halley refinement step,
/// accurate to close to machine precision on (0, 1).
pub fn normal_inv_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_inv_cdf requires p in (0,1), got {p}");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement against the forward cdf.
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Exponential over a slice, in place. Cody-Waite argument reduction with a
/// Taylor polynomial; the loop body is branch-free so it vectorizes. Keeps
/// ~1 ulp accuracy on the range the kernels produce.
pub fn exp_in_place(xs: &mut [f64]) {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // 1/k! for the Taylor series of exp on |r| <= ln(2)/2
    const C: [f64; 13] = [
        1.0,
        1.0,
        0.5,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362880.0,
        1.0 / 3628800.0,
        1.0 / 39916800.0,
        1.0 / 479001600.0,
    ];
    for x in xs.iter_mut() {
        let v = (*x).clamp(-746.0, 709.0);
        let k = (v * LOG2E).round();
        let r = k.mul_add(-LN2_LO, k.mul_add(-LN2_HI, v));
        let mut p = C[12];
        for c in C[..12].iter().rev() {
            p = p.mul_add(r, *c);
        }
        // scale by 2^k in two halves so the subnormal tail stays exact
        let ki = k as i64;
        let k1 = ki >> 1;
        let k2 = ki - k1;
        let s1 = f64::from_bits(((k1 + 1023) as u64) << 52);
        let s2 = f64::from_bits(((k2 + 1023) as u64) << 52);
        *x = p * s1 * s2;
    }
}

/// Closed-form expected improvement of a Gaussian `(mean, variance)` over
/// `baseline`: E[max(X − baseline, 0)].
pub fn expected_improvement(mean: f64, variance: f64, baseline: f64) -> f64 {
    debug_assert!(variance >= 0.0);
    let diff = mean - baseline;
    if variance <= 0.0 {
        return diff.max(0.0);
    }
    let sd = variance.sqrt();
    let z = diff / sd;
    if z < -40.0 {
        return 0.0;
    }
    (diff * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_symmetry_and_known_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-12);
        assert!((normal_cdf(-1.0) + normal_cdf(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inv_cdf_round_trip() {
        for &p in &[1e-7, 1e-4, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-7] {
            let x = normal_inv_cdf(p);
            assert!(
                (normal_cdf(x) - p).abs() < 1e-12 * p.max(1e-3),
                "round trip failed at p={p}: cdf(inv)={}",
                normal_cdf(x)
            );
        }
        assert!(normal_inv_cdf(0.5).abs() < 1e-15);
    }

    #[test]
    fn batch_exp_matches_libm() {
        let mut xs: Vec<f64> = (-8000..100)
            .map(|i| i as f64 * 0.09)
            .chain([0.0, -1e-12, 1e-12, -745.5, -708.0, 700.0])
            .collect();
        let want: Vec<f64> = xs.iter().map(|&x| x.exp()).collect();
        exp_in_place(&mut xs);
        for (got, want) in xs.iter().zip(want.iter()) {
            if *want < 1e-290 {
                // subnormal tail: absolute agreement is all that is
                // representable
                assert!((got - want).abs() < 1e-300, "tail mismatch: {got} vs {want}");
            } else {
                let rel = (got - want).abs() / want;
                assert!(rel < 5e-15, "exp mismatch: {got} vs {want}");
            }
        }
    }

    #[test]
    fn ei_symmetric_case() {
        // mean == baseline, unit sd: EI = φ(0)
        let ei = expected_improvement(1.0, 1.0, 1.0);
        assert!((ei - normal_pdf(0.0)).abs() < 1e-14);
    }

    #[test]
    fn ei_deterministic_limit() {
        assert_eq!(expected_improvement(3.0, 0.0, 1.0), 2.0);
        assert_eq!(expected_improvement(0.0, 0.0, 1.0), 0.0);
    }
}
