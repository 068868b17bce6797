use rug::Float;
use serde::Serialize;

use super::roots::{poly_add_scaled, poly_mul, poly_powers, real_roots, roots, Poly};
use super::{orthonormalize, OrthoSystem, PrecisionPolicy};
use crate::error::{Error, Result};
use crate::measure::{Measure, SupportArc};
use crate::moebius::ExtendedReal;
use crate::mp::{self, MpComplex};

/// Relative distance below which a root is treated as a cancelled pole.
pub const CANCELLATION_TOL: f64 = 1e-7;

#[derive(Clone, Debug, Serialize)]
pub struct ZeroSet {
    pub n: usize,
    /// Sorted, ∞ last.
    pub zeros: Vec<ExtendedReal>,
    pub degree: usize,
    /// Roots of the numerator discarded as cancellations against other poles.
    pub cancelled: Vec<ExtendedReal>,
    /// Kept roots lying within ten times the cancellation tolerance of a pole.
    pub borderline: Vec<ExtendedReal>,
    pub bits: u32,
}

/// ν_n: atoms of weight 1/n at the zeros.
pub fn counting_measure(zs: &ZeroSet) -> Vec<(ExtendedReal, f64)> {
    let w = if zs.n == 0 { 0.0 } else { 1.0 / zs.n as f64 };
    zs.zeros.iter().map(|&z| (z, w)).collect()
}

/// Scale used for cancellation tests.
fn support_scale(mu: &Measure) -> f64 {
    if let Some(e) = mu.finite_gap_set() {
        return e.scale();
    }
    let pts: Vec<f64> = mu.rule().points.iter().filter_map(|p| p.as_finite()).collect();
    let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

/// Numerator polynomial of τ_n in the frame w that sends the own pole to ∞.
fn numerator(sys: &OrthoSystem, n: usize) -> Poly {
    let prec = sys.bits();
    let poles = sys.poles();
    let period = poles.period();
    let own = poles.slot_of(n);
    let ck = poles.get(own);
    let t = sys.coefficients_mp(n);
    let f = |x: f64| Float::with_val(prec, x);
    let w = vec![f(0.0), f(1.0)];
    let one = vec![f(1.0)];
    // u_m = num_m / den_m in the w frame
    let linear: Vec<(Poly, Poly)> = (1..=period)
        .map(|m| {
            if m == own {
                return (w.clone(), one.clone());
            }
            match (ck, poles.get(m)) {
                (ExtendedReal::Finite(c), ExtendedReal::Finite(cm)) => (w.clone(), vec![f(1.0), f(cm - c)]),
                (ExtendedReal::Finite(c), ExtendedReal::Infinity) => (vec![f(-1.0), f(c)], w.clone()),
                (ExtendedReal::Infinity, ExtendedReal::Finite(cm)) => (one.clone(), vec![f(cm), f(-1.0)]),
                (ExtendedReal::Infinity, ExtendedReal::Infinity) => unreachable!("poles are distinct"),
            }
        })
        .collect();
    let max_power: Vec<usize> = (1..=period)
        .map(|m| if n >= m { (n - m) / period + 1 } else { 0 })
        .collect();
    let den_pow: Vec<Vec<Poly>> =
        (0..period).map(|m| poly_powers(&linear[m].1, max_power[m], prec)).collect();
    let denominator_without = |skip: Option<usize>| -> Poly {
        let mut d = one.clone();
        for m in 0..period {
            if m + 1 != own && Some(m) != skip {
                d = poly_mul(&d, &den_pow[m][max_power[m]], prec);
            }
        }
        d
    };
    let full = denominator_without(None);
    let mut p: Poly = Vec::new();
    poly_add_scaled(&mut p, &full, &t[0], prec);
    for m in 0..period {
        let e = max_power[m];
        if e == 0 {
            continue;
        }
        let num_pow = poly_powers(&linear[m].0, e, prec);
        let mut q: Poly = Vec::new();
        for power in 1..=e {
            let idx = (power - 1) * period + m + 1;
            let term = poly_mul(&num_pow[power], &den_pow[m][e - power], prec);
            poly_add_scaled(&mut q, &term, &t[idx], prec);
        }
        let rest = if m + 1 == own { full.clone() } else { denominator_without(Some(m)) };
        let contrib = poly_mul(&rest, &q, prec);
        poly_add_scaled(&mut p, &contrib, &Float::with_val(prec, 1), prec);
    }
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

/// Image of z in the frame w of the own pole.
fn to_frame(own: ExtendedReal, z: ExtendedReal) -> f64 {
    match (own, z) {
        (ExtendedReal::Infinity, ExtendedReal::Finite(x)) => x,
        (ExtendedReal::Finite(_), ExtendedReal::Infinity) => 0.0,
        (ExtendedReal::Finite(c), ExtendedReal::Finite(x)) => 1.0 / (c - x),
        (ExtendedReal::Infinity, ExtendedReal::Infinity) => f64::INFINITY,
    }
}

/// Zeros of τ_n and cancelled poles are real and simple, so bracketing finds
/// all of them; Aberth iteration is kept for anything it misses.
fn numerator_roots(mu: &Measure, own: ExtendedReal, p: &[Float], prec: u32) -> Result<Vec<MpComplex>> {
    let d = p.len() - 1;
    let mut bands: Vec<(f64, f64)> = mu
        .support_pieces()
        .iter()
        .map(|arc| {
            let (a, b) = (to_frame(own, arc.start), to_frame(own, arc.end));
            (a.min(b), a.max(b))
        })
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    bands.sort_by(|x, y| x.0.total_cmp(&y.0));
    for density in [8, 32] {
        let rs = real_roots(p, prec, &bands, density);
        if rs.len() == d {
            return Ok(rs.into_iter().map(MpComplex::from_real).collect());
        }
    }
    roots(p, prec)
}

fn zeros_at(sys: &OrthoSystem, n: usize) -> Result<ZeroSet> {
    let prec = sys.bits();
    let poles = sys.poles();
    let own = poles.slot_of(n);
    let ck = poles.get(own);
    let g = poles.genus();
    if n == 0 {
        return Ok(ZeroSet { n, zeros: vec![], degree: 0, cancelled: vec![], borderline: vec![], bits: prec });
    }
    let p = numerator(sys, n);
    let rs = numerator_roots(sys.measure(), ck, &p, prec)?;
    let scale = support_scale(sys.measure());
    let mut zeros = Vec::new();
    let mut cancelled = Vec::new();
    let mut borderline = Vec::new();
    for r in &rs {
        let w = r.to_c64();
        let mag = 1.0 + w.norm();
        if w.im.abs() > 1e-10 * mag {
            return Err(Error::Invariant(format!("tau_{n} has a non-real zero (w = {w})")));
        }
        let z = match ck {
            ExtendedReal::Infinity => ExtendedReal::Finite(r.re.to_f64()),
            ExtendedReal::Finite(c) => {
                if r.re.is_zero() {
                    ExtendedReal::Infinity
                } else {
                    let inv = Float::with_val(prec, r.re.recip_ref());
                    ExtendedReal::from((Float::with_val(prec, c) - inv).to_f64())
                }
            }
        };
        // relative distance to the other poles
        let mut nearest = f64::INFINITY;
        for (m, &cm) in poles.points().iter().enumerate() {
            if m + 1 == own {
                continue;
            }
            let d = match (cm, z) {
                (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => (a - b).abs() / scale,
                (ExtendedReal::Infinity, ExtendedReal::Finite(b)) => scale / b.abs().max(f64::MIN_POSITIVE),
                (ExtendedReal::Finite(_), ExtendedReal::Infinity) => f64::INFINITY,
                (ExtendedReal::Infinity, ExtendedReal::Infinity) => 0.0,
            };
            nearest = nearest.min(d);
        }
        if nearest < CANCELLATION_TOL {
            cancelled.push(z);
        } else {
            if nearest < 10.0 * CANCELLATION_TOL {
                borderline.push(z);
            }
            zeros.push(z);
        }
    }
    zeros.sort_by(|a, b| a.total_cmp(b));
    let degree = zeros.len();
    if degree + g < n || degree > n {
        return Err(Error::Invariant(format!("tau_{n} has {degree} zeros, expected between {} and {n}", n.saturating_sub(g))));
    }
    for pair in zeros.windows(2) {
        if let (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) = (pair[0], pair[1]) {
            if (b - a).abs() <= 1e-10 * scale.max(a.abs()) {
                return Err(Error::Invariant(format!("tau_{n} has a repeated zero near {a}")));
            }
        }
    }
    check_gap_rule(sys.measure(), ck, n, &zeros)?;
    Ok(ZeroSet { n, zeros, degree, cancelled, borderline, bits: prec })
}

fn check_gap_rule(mu: &Measure, own_pole: ExtendedReal, n: usize, zeros: &[ExtendedReal]) -> Result<()> {
    let gaps: Vec<SupportArc> = mu.gap_components();
    for gap in &gaps {
        let open = |x: ExtendedReal| gap.contains(x, 0.0) && x != gap.start && x != gap.end;
        let count = zeros.iter().filter(|&&z| open(z)).count();
        if count > 1 {
            return Err(Error::Invariant(format!("tau_{n} has {count} zeros in one gap")));
        }
        if count == 1 && open(own_pole) {
            return Err(Error::Invariant(format!("tau_{n} vanishes in the gap of its own pole")));
        }
    }
    Ok(())
}

/// Zeros of τ_n; on a precision failure the system is rebuilt at higher precision.
pub(crate) fn zeros(sys: &OrthoSystem, n: usize) -> Result<ZeroSet> {
    if n > sys.n_max() {
        return Err(Error::InvalidInput(format!("n = {n} exceeds N = {}", sys.n_max())));
    }
    let first = zeros_at(sys, n);
    let mut last_err = match first {
        Ok(z) => return Ok(z),
        Err(e @ (Error::Invariant(_) | Error::NoConvergence(_))) => e,
        Err(e) => return Err(e),
    };
    for bits in mp::LADDER.iter().copied().chain([2048]).filter(|&b| b > sys.bits()) {
        let rebuilt = orthonormalize(sys.measure(), sys.poles(), n, PrecisionPolicy::fixed(bits))?;
        match zeros_at(&rebuilt, n) {
            Ok(z) => return Ok(z),
            Err(e @ (Error::Invariant(_) | Error::NoConvergence(_))) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PrecisionExhausted(format!("zeros of tau_{n}: {last_err}")))
}
