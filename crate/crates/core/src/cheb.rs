//! Chebyshev-angle utilities shared by band quadrature and potential theory.
//!
//! A band [lo, hi] is parametrised as t = m + h cos θ, θ ∈ [0, π]. Smooth
//! factors s(θ) are sampled at the midpoint angles and expanded in cos(jθ).

use num_complex::Complex64;
use std::f64::consts::PI;

/// Midpoint angles ordered so that t increases (θ decreasing from π).
pub fn angles(m: usize) -> Vec<f64> {
    (0..m).map(|i| (2 * (m - i) - 1) as f64 * PI / (2 * m) as f64).collect()
}

pub fn band_nodes(lo: f64, hi: f64, theta: &[f64]) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    theta.iter().map(|&t| (mid + h * t.cos()).clamp(lo, hi)).collect()
}

/// Coefficients a_j with s(θ) = a_0 + Σ a_j cos(jθ), from midpoint samples.
pub fn cos_coefficients(theta: &[f64], samples: &[f64]) -> Vec<f64> {
    let m = samples.len();
    let mut a = vec![0.0; m];
    for (&th, &s) in theta.iter().zip(samples) {
        // cos(jθ) by the Chebyshev recurrence
        let c1 = th.cos();
        let (mut prev, mut cur) = (1.0, c1);
        a[0] += s;
        for aj in a.iter_mut().skip(1) {
            *aj += s * cur;
            let next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    let inv = 1.0 / m as f64;
    a[0] *= inv;
    for aj in a.iter_mut().skip(1) {
        *aj *= 2.0 * inv;
    }
    a
}

/// The root ψ of ψ² − 2uψ + 1 = 0 with |ψ| ≤ 1.
pub fn joukowski_inverse(u: Complex64) -> Complex64 {
    let w = (u * u - 1.0).sqrt();
    let p = u + w;
    let q = u - w;
    if p.norm() >= q.norm() {
        1.0 / p
    } else {
        1.0 / q
    }
}

/// (1/π) ∫_0^π log|u − cos θ| s(θ) dθ for the cosine series `a` of s.
pub fn log_kernel(a: &[f64], u: Complex64) -> f64 {
    let psi = joukowski_inverse(u);
    let mut acc = a[0] * (-(2f64.ln()) - psi.norm().ln());
    let mut pw = Complex64::new(1.0, 0.0);
    for (j, &aj) in a.iter().enumerate().skip(1) {
        pw *= psi;
        acc -= aj * pw.re / j as f64;
    }
    acc
}

/// (1/π) ∫_{θ1}^{θ2} s(θ) dθ.
pub fn partial_integral(a: &[f64], th1: f64, th2: f64) -> f64 {
    let mut acc = a[0] * (th2 - th1);
    for (j, &aj) in a.iter().enumerate().skip(1) {
        let jf = j as f64;
        acc += aj * ((jf * th2).sin() - (jf * th1).sin()) / jf;
    }
    acc / PI
}

/// Fejér first-rule weights on [−1, 1] at the nodes cos θ_i.
pub fn fejer_weights(theta: &[f64]) -> Vec<f64> {
    let m = theta.len();
    theta
        .iter()
        .map(|&th| {
            let c2 = (2.0 * th).cos();
            let (mut prev, mut cur) = (1.0, c2);
            let mut s = 0.0;
            for j in 1..=m / 2 {
                s += cur / (4.0 * (j * j) as f64 - 1.0);
                let next = 2.0 * c2 * cur - prev;
                prev = cur;
                cur = next;
            }
            2.0 / m as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_of_trig_polynomial() {
        let th = angles(16);
        let s: Vec<f64> = th.iter().map(|t| 1.0 + 0.5 * (3.0 * t).cos()).collect();
        let a = cos_coefficients(&th, &s);
        assert!((a[0] - 1.0).abs() < 1e-14);
        assert!((a[3] - 0.5).abs() < 1e-14);
        assert!(a[1].abs() < 1e-14 && a[5].abs() < 1e-14);
    }

    #[test]
    fn log_kernel_arcsine() {
        // ∫ log|x − t| dω_arcsine(t) = −log 2 on [−1, 1]
        let a = [1.0];
        for x in [-0.9, 0.0, 0.3] {
            assert!((log_kernel(&a, Complex64::new(x, 0.0)) + 2f64.ln()).abs() < 1e-15);
        }
        let u = Complex64::new(0.0, 1.0);
        let exact = ((u + (u * u - 1.0).sqrt()) / 2.0).norm().ln();
        assert!((log_kernel(&a, u) - exact).abs() < 1e-14);
    }

    #[test]
    fn fejer_integrates_polynomials() {
        let th = angles(20);
        let w = fejer_weights(&th);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let x2: f64 = th.iter().zip(&w).map(|(t, w)| t.cos().powi(2) * w).sum();
        assert!((x2 - 2.0 / 3.0).abs() < 1e-14);
    }
}
