//! Polynomial roots. Real-rooted numerators are bracketed on a grid and
//! refined by regula falsi; Aberth iteration is the general fallback.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rug::Float;

use crate::error::{Error, Result};
use crate::mp::MpComplex;

pub(crate) type Poly = Vec<Float>;

pub(crate) fn poly_mul(a: &[Float], b: &[Float], prec: u32) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Float::new(prec); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// acc += s · p
pub(crate) fn poly_add_scaled(acc: &mut Poly, p: &[Float], s: &Float, prec: u32) {
    if acc.len() < p.len() {
        acc.resize(p.len(), Float::new(prec));
    }
    for (a, x) in acc.iter_mut().zip(p) {
        *a += x * s;
    }
}

/// Powers p^0..=p^e.
pub(crate) fn poly_powers(p: &[Float], e: usize, prec: u32) -> Vec<Poly> {
    let mut out = vec![vec![Float::with_val(prec, 1)]];
    for i in 0..e {
        let next = poly_mul(&out[i], p, prec);
        out.push(next);
    }
    out
}

fn companion_eigenvalues(c: &[f64]) -> Option<Vec<Complex64>> {
    let d = c.len() - 1;
    let lead = c[d];
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        m[(i, d - 1)] = -c[i] / lead;
    }
    let ev = m.complex_eigenvalues();
    let v: Vec<Complex64> = ev.iter().map(|z| Complex64::new(z.re, z.im)).collect();
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(v)
}

fn horner(p: &[Float], z: &MpComplex) -> (MpComplex, MpComplex) {
    let prec = z.prec();
    let mut v = MpComplex::zero(prec);
    let mut dv = MpComplex::zero(prec);
    for c in p.iter().rev() {
        dv = dv.mul(z).add(&v);
        v = v.mul(z).add_real(c);
    }
    (v, dv)
}

fn eval_real(p: &[Float], x: &Float) -> Float {
    let mut v = Float::new(x.prec());
    for c in p.iter().rev() {
        v *= x;
        v += c;
    }
    v
}

fn sign(x: &Float) -> i8 {
    if x.is_zero() {
        0
    } else if x.is_sign_negative() {
        -1
    } else {
        1
    }
}

fn push_geometric(out: &mut Vec<f64>, from: f64, toward: f64, levels: usize) {
    let w = toward - from;
    for j in 1..=levels {
        out.push(from + w * 2f64.powi(-(j as i32)));
    }
}

/// Grid on the real line, dense in `bands` (Chebyshev clustering with `k`
/// points each) and geometric toward the ends of every gap.
fn bracket_grid(bands: &[(f64, f64)], radius: f64, k: usize, levels: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let lo = bands.iter().map(|b| b.0).fold(f64::INFINITY, f64::min).min(-radius);
    let hi = bands.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max).max(radius);
    let mut edges = vec![lo];
    for &(a, b) in bands {
        edges.push(a);
        edges.push(b);
        for i in 0..=k {
            out.push(a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / k as f64).cos()));
        }
    }
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    // gaps between consecutive edges (band interiors are already covered)
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !(b > a) {
            continue;
        }
        let inside = bands.iter().any(|&(x, y)| a >= x && b <= y);
        if inside {
            continue;
        }
        for i in 0..=64 {
            out.push(a + (b - a) * i as f64 / 64.0);
        }
        push_geometric(&mut out, a, b, levels);
        push_geometric(&mut out, b, a, levels);
    }
    // unbounded ends: geometric out to the root bound
    for (edge, dir) in [(lo, -1.0), (hi, 1.0)] {
        let mut t = 1e-12 * (1.0 + edge.abs());
        while t < 2.0 * radius + edge.abs() {
            out.push(edge + dir * t);
            t *= 1.5;
        }
    }
    out.retain(|x| x.is_finite());
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Illinois regula falsi on a sign change of p in [a, b].
fn refine(p: &[Float], mut a: Float, mut fa: Float, mut b: Float, mut fb: Float, prec: u32) -> Float {
    let tol_bits = (prec as i32 - 4).min(120);
    let mut side = 0i8;
    for it in 0..400 {
        let width = Float::with_val(prec, &b - &a);
        let scale = Float::with_val(prec, a.abs_ref()).max(&Float::with_val(prec, 1));
        if width <= Float::with_val(prec, &scale >> tol_bits as u32) {
            break;
        }
        let mut c = Float::with_val(prec, &fb - &fa);
        c = Float::with_val(prec, &b - Float::with_val(prec, &fb * &width) / &c);
        // every eighth step, or when the secant leaves the bracket, bisect
        if it % 8 == 7 || !(c > a && c < b) {
            c = Float::with_val(prec, &a + &b) / 2;
        }
        let fc = eval_real(p, &c);
        match sign(&fc) {
            0 => return c,
            s if s == sign(&fb) => {
                b = c;
                fb = fc;
                if side == 1 {
                    fa /= 2;
                }
                side = 1;
            }
            _ => {
                a = c;
                fa = fc;
                if side == -1 {
                    fb /= 2;
                }
                side = -1;
            }
        }
    }
    Float::with_val(prec, &a + &b) / 2
}

/// Real roots of p located by sign changes. `bands` are the intervals where
/// roots are expected to cluster. Returns fewer than deg p roots when some
/// are non-real or were not separated.
pub(crate) fn real_roots(p: &[Float], prec: u32, bands: &[(f64, f64)], density: usize) -> Vec<Float> {
    let d = p.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = Float::with_val(prec, p[d].abs_ref());
    let radius = p[..d]
        .iter()
        .map(|c| (Float::with_val(prec, c.abs_ref()) / &lead).to_f64())
        .fold(0.0, f64::max)
        .min(1e300)
        + 1.0;
    let grid = bracket_grid(bands, radius, density * d + 16, 48);
    let mut found = Vec::with_capacity(d);
    let mut prev: Option<(Float, Float)> = None;
    for x in grid {
        let xf = Float::with_val(prec, x);
        let fx = eval_real(p, &xf);
        if sign(&fx) == 0 {
            found.push(xf);
            prev = None;
            continue;
        }
        if let Some((a, fa)) = prev.take() {
            if sign(&fa) != sign(&fx) {
                found.push(refine(p, a, fa, xf.clone(), fx.clone(), prec));
            }
        }
        prev = Some((xf, fx));
    }
    found
}

/// All roots of p (ascending coefficients, nonzero leading coefficient).
pub(crate) fn roots(p: &[Float], prec: u32) -> Result<Vec<MpComplex>> {
    let d = p.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let cf: Vec<f64> = p.iter().map(|x| x.to_f64()).collect();
    let init = companion_eigenvalues(&cf).unwrap_or_else(|| {
        let r = (cf[0] / cf[d]).abs().powf(1.0 / d as f64).max(1e-3);
        (0..d)
            .map(|i| Complex64::from_polar(r, 2.0 * std::f64::consts::PI * (i as f64 + 0.25) / d as f64))
            .collect()
    });
    // keep starting points distinct and off the real axis
    let mut z: Vec<MpComplex> = init
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let s = 1e-8 * (1.0 + w.norm()) * (1.0 + i as f64 / d as f64);
            MpComplex::from_c64(prec, w + Complex64::new(s, s))
        })
        .collect();
    let tol = Float::with_val(prec, 2f64.powi(-(prec as i32 - 24)));
    // coefficients carry cancellation error, so steps may stall above `tol`;
    // a stall below `floor` counts as converged
    let floor = Float::with_val(prec, 2f64.powi(-64));
    let mut best = Float::with_val(prec, f64::INFINITY);
    let mut stalled = 0;
    for _ in 0..1000 {
        let mut max_rel = Float::new(prec);
        for i in 0..d {
            let (v, dv) = horner(p, &z[i]);
            if v.is_zero() {
                continue;
            }
            let ratio = v.div(&dv);
            let mut s = MpComplex::zero(prec);
            for j in 0..d {
                if j != i {
                    s = s.add(&z[i].sub(&z[j]).recip());
                }
            }
            let one = MpComplex::from_real(Float::with_val(prec, 1));
            let step = ratio.div(&one.sub(&ratio.mul(&s)));
            let mut scale = z[i].abs();
            if scale < 1 {
                scale = Float::with_val(prec, 1);
            }
            let rel = Float::with_val(prec, step.abs() / &scale);
            if rel > max_rel {
                max_rel = rel;
            }
            z[i] = z[i].sub(&step);
        }
        if max_rel <= tol {
            return Ok(z);
        }
        if Float::with_val(prec, &max_rel * 2) < best {
            best = max_rel.clone();
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 8 && best <= floor {
                return Ok(z);
            }
        }
    }
    Err(Error::NoConvergence(format!("Aberth iteration for degree {d}")))
}
