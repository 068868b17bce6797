//! Orthonormal rational functions τ_0..τ_N by Cholesky of the Gram matrix.

mod basis;
mod roots;
mod zeros;

pub use basis::{basis_r, gram, gram_f64, BasisFunction};
pub use zeros::{counting_measure, ZeroSet};

use num_complex::Complex64;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteRule, Measure, PoleSequence};
use crate::moebius::ExtendedReal;
use crate::mp::{self, MpComplex, Neumaier};
use basis::{slot_values_complex, BasisRows};

/// Bits that must survive cancellation in every Cholesky pivot.
pub const RETAINED_BITS: f64 = 43.0;
/// Observed error growth relative to the per-pivot cancellation estimate
/// is about 1.3; the rule uses 1.5.
pub const LOSS_FACTOR: f64 = 1.5;
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionPolicy {
    pub start_bits: u32,
    pub max_bits: u32,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy { start_bits: 53, max_bits: 1024 }
    }
}

impl PrecisionPolicy {
    pub fn fixed(bits: u32) -> Self {
        PrecisionPolicy { start_bits: bits, max_bits: bits }
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_bits < 53 || self.max_bits < self.start_bits {
            return Err(Error::Config(format!(
                "precision policy needs 53 <= start_bits <= max_bits, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Attempt {
    pub bits: u32,
    pub outcome: String,
}

#[derive(Clone, Debug)]
pub struct OrthoSystem {
    measure: Measure,
    poles: PoleSequence,
    n_max: usize,
    bits: u32,
    coeffs: Vec<Vec<Float>>,
    kappas: Vec<f64>,
    log_kappas: Vec<f64>,
    rule: DiscreteRule,
    values: Vec<Vec<f64>>,
    orthonormality_error: f64,
    attempts: Vec<Attempt>,
}

struct PivotFailure {
    index: usize,
    lost_bits: f64,
}

struct Factor {
    coeffs: Vec<Vec<Float>>,
    rows: BasisRows,
}

/// Left-looking Cholesky of the Gram matrix with an early exit when a pivot
/// loses too many bits, followed by T = L⁻¹.
fn factor(rule: &DiscreteRule, poles: &PoleSequence, n_max: usize, prec: u32) -> Result<std::result::Result<Factor, PivotFailure>> {
    let mut rows = BasisRows::new(rule, poles, prec)?;
    let w: Vec<Float> = rule.weights.iter().map(|&w| Float::with_val(prec, w)).collect();
    let mut l: Vec<Vec<Float>> = Vec::with_capacity(n_max + 1);
    let mut wr = Vec::with_capacity(rule.len());
    // mul then add is cheaper than MPFR's exact fma
    let mut tmp = Float::new(prec);
    for n in 0..=n_max {
        rows.push_next();
        wr.clear();
        wr.extend(rows.row(n).iter().zip(&w).map(|(r, w)| Float::with_val(prec, r * w)));
        let mut row: Vec<Float> = Vec::with_capacity(n + 1);
        for m in 0..=n {
            let mut g = Float::new(prec);
            for (a, b) in wr.iter().zip(rows.row(m)) {
                tmp.assign(a * b);
                g += &tmp;
            }
            if m < n {
                for (a, b) in row.iter().zip(&l[m][..m]) {
                    g -= a * b;
                }
                g /= &l[m][m];
                row.push(g);
            } else {
                let diag = g.clone();
                for a in &row {
                    g -= a * a;
                }
                if diag.is_zero() || g <= 0 {
                    return Ok(Err(PivotFailure { index: n, lost_bits: f64::INFINITY }));
                }
                let ratio = Float::with_val(prec, &g / &diag);
                let lost = -ratio.log2().to_f64();
                if LOSS_FACTOR * lost > prec as f64 - RETAINED_BITS {
                    return Ok(Err(PivotFailure { index: n, lost_bits: lost }));
                }
                row.push(g.sqrt());
            }
        }
        l.push(row);
    }
    // T = L⁻¹, row by row
    let mut t: Vec<Vec<Float>> = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let tnn = Float::with_val(prec, l[n][n].recip_ref());
        let mut row = vec![Float::new(prec); n + 1];
        for m in 0..n {
            let mut acc = Float::new(prec);
            for j in m..n {
                acc += &l[n][j] * &t[j][m];
            }
            acc *= &tnn;
            row[m] = -acc;
        }
        row[n] = tnn;
        t.push(row);
    }
    Ok(Ok(Factor { coeffs: t, rows }))
}

/// τ_n(x_i) = Σ T[n][ℓ] r_ℓ(x_i), converted to f64.
fn tau_values(coeffs: &[Vec<Float>], rows: &BasisRows, count: usize, prec: u32) -> Vec<Vec<f64>> {
    coeffs
        .iter()
        .map(|t| {
            (0..count)
                .map(|i| {
                    let mut acc = Float::new(prec);
                    let mut tmp = Float::new(prec);
                    for (l, c) in t.iter().enumerate() {
                        tmp.assign(c * &rows.row(l)[i]);
                        acc += &tmp;
                    }
                    acc.to_f64()
                })
                .collect()
        })
        .collect()
}

fn orthonormality_defect(values: &[Vec<f64>], weights: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for m in 0..values.len() {
        for n in 0..=m {
            let mut s = Neumaier::new();
            for ((a, b), w) in values[m].iter().zip(&values[n]).zip(weights) {
                s.add(w * a * b);
            }
            let target = if m == n { 1.0 } else { 0.0 };
            let d = (s.value() - target).abs();
            if !d.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(d);
        }
    }
    worst
}

/// Build τ_0..τ_N for (μ, C), escalating precision as needed.
pub fn orthonormalize(
    mu: &Measure,
    poles: &PoleSequence,
    n_max: usize,
    policy: PrecisionPolicy,
) -> Result<OrthoSystem> {
    policy.validate()?;
    poles.validate_for(mu)?;
    if mu.support_size() <= n_max {
        return Err(Error::RankDeficient(format!(
            "measure has {} support points, N = {n_max}",
            mu.support_size()
        )));
    }
    let rule = mu.rule();
    let check_rule = if mu.is_purely_atomic() {
        rule.clone()
    } else {
        mu.rule_with_nodes(mu.nodes() + mu.nodes() / 4 + 1)
    };
    let mut attempts = Vec::new();
    // bits the projected loss at N calls for, from the last failed pivot
    let mut projected = 0.0;
    for bits in mp::ladder(policy.start_bits, policy.max_bits) {
        if (bits as f64) < projected && bits < policy.max_bits {
            attempts.push(Attempt { bits, outcome: format!("skipped, projected need {projected:.0} bits") });
            continue;
        }
        let f = match factor(&rule, poles, n_max, bits)? {
            Ok(f) => f,
            Err(PivotFailure { index, lost_bits }) => {
                attempts.push(Attempt {
                    bits,
                    outcome: format!("pivot {index} lost {lost_bits:.1} bits"),
                });
                // cancellation grows about linearly in n
                if lost_bits.is_finite() && index > 0 {
                    projected = LOSS_FACTOR * lost_bits * n_max as f64 / index as f64 + RETAINED_BITS;
                }
                continue;
            }
        };
        let check_rows = {
            let mut r = BasisRows::new(&check_rule, poles, bits)?;
            for _ in 0..=n_max {
                r.push_next();
            }
            r
        };
        let check_values = tau_values(&f.coeffs, &check_rows, check_rule.len(), bits);
        let defect = orthonormality_defect(&check_values, &check_rule.weights);
        if !(defect <= ORTHONORMALITY_TOL) {
            attempts.push(Attempt { bits, outcome: format!("orthonormality defect {defect:.3e}") });
            continue;
        }
        attempts.push(Attempt { bits, outcome: format!("accepted, orthonormality defect {defect:.3e}") });
        let values = tau_values(&f.coeffs, &f.rows, rule.len(), bits);
        let kappas = f.coeffs.iter().enumerate().map(|(n, r)| r[n].to_f64()).collect();
        let log_kappas = f.coeffs.iter().enumerate().map(|(n, r)| r[n].clone().ln().to_f64()).collect();
        return Ok(OrthoSystem {
            measure: mu.clone(),
            poles: poles.clone(),
            n_max,
            bits,
            coeffs: f.coeffs,
            kappas,
            log_kappas,
            rule,
            values,
            orthonormality_error: defect,
            attempts,
        });
    }
    let last = attempts.last().map(|a| a.outcome.clone()).unwrap_or_default();
    Err(Error::PrecisionExhausted(format!(
        "N = {n_max} not resolved at {} bits ({last})",
        policy.max_bits
    )))
}

impl OrthoSystem {
    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn poles(&self) -> &PoleSequence {
        &self.poles
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn genus(&self) -> usize {
        self.poles.genus()
    }

    /// Working precision actually used.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn attempts(&self) -> &[Attempt] {
        &self.attempts
    }

    pub fn orthonormality_error(&self) -> f64 {
        self.orthonormality_error
    }

    pub fn kappa(&self, n: usize) -> f64 {
        self.kappas[n]
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn log_kappa(&self, n: usize) -> f64 {
        self.log_kappas[n]
    }

    pub fn log_kappas(&self) -> &[f64] {
        &self.log_kappas
    }

    /// Row n of T at working precision.
    pub fn coefficients_mp(&self, n: usize) -> &[Float] {
        &self.coeffs[n]
    }

    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        self.coeffs[n].iter().map(|x| x.to_f64()).collect()
    }

    pub fn rule(&self) -> &DiscreteRule {
        &self.rule
    }

    /// τ_n at the rule points.
    pub fn values(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    fn eval_mp(&self, n: usize, z: &MpComplex) -> Result<MpComplex> {
        if n > self.n_max {
            return Err(Error::InvalidInput(format!("n = {n} exceeds N = {}", self.n_max)));
        }
        let prec = self.bits;
        let u = slot_values_complex(&self.poles, z)?;
        let period = self.poles.period();
        let t = &self.coeffs[n];
        let mut total = MpComplex::from_real(t[0].clone());
        for (k, uk) in u.iter().enumerate() {
            // indices ℓ = (q−1)(g+1) + k + 1 for powers q = 1, 2, …
            let idx: Vec<usize> = (k + 1..=n).step_by(period).collect();
            let mut acc = MpComplex::zero(prec);
            for &l in idx.iter().rev() {
                acc = acc.add_real(&t[l]).mul(uk);
            }
            total = total.add(&acc);
        }
        Ok(total)
    }

    fn point(&self, z: Complex64) -> MpComplex {
        MpComplex::from_c64(self.bits, z)
    }

    /// τ_n(z) for finite complex z.
    pub fn evaluate(&self, n: usize, z: Complex64) -> Result<Complex64> {
        Ok(self.eval_mp(n, &self.point(z))?.to_c64())
    }

    /// τ_n at a point of ℝ̄.
    pub fn evaluate_ext(&self, n: usize, x: ExtendedReal) -> Result<f64> {
        match x {
            ExtendedReal::Finite(x) => Ok(self.evaluate(n, Complex64::new(x, 0.0))?.re),
            ExtendedReal::Infinity => {
                if self.poles.infinity_slot().is_some() && n >= self.poles.infinity_slot().unwrap() {
                    return Err(Error::EvaluationAtPole("inf".into()));
                }
                Ok(self.coeffs[n][0].to_f64())
            }
        }
    }

    /// log|τ_n(z)| computed at working precision (no overflow).
    pub fn log_abs(&self, n: usize, z: Complex64) -> Result<f64> {
        Ok(self.eval_mp(n, &self.point(z))?.ln_abs().to_f64())
    }

    /// (1/n) log|τ_n(z)|.
    pub fn growth_exponent(&self, n: usize, z: Complex64) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidInput("growth exponent needs n >= 1".into()));
        }
        Ok(self.log_abs(n, z)? / n as f64)
    }

    pub fn zeros(&self, n: usize) -> Result<ZeroSet> {
        zeros::zeros(self, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::ExtendedReal::*;

    fn arcsine(n: usize) -> OrthoSystem {
        let mu = Measure::arcsine(-2.0, 2.0).unwrap();
        orthonormalize(&mu, &PoleSequence::infinity(), n, PrecisionPolicy::default()).unwrap()
    }

    #[test]
    fn chebyshev_kappas() {
        let s = arcsine(40);
        assert!((s.kappa(0) - 1.0).abs() < 1e-14);
        for n in 1..=40 {
            assert!((s.kappa(n) - 0.5f64.sqrt()).abs() < 1e-10, "n = {n}: {}", s.kappa(n));
        }
        assert!(s.bits() > 53);
    }

    #[test]
    fn chebyshev_values() {
        let s = arcsine(4);
        let r2 = 2f64.sqrt();
        let c = s.coefficients(2);
        assert!((c[0] + r2).abs() < 1e-13 && c[1].abs() < 1e-13 && (c[2] - r2 / 2.0).abs() < 1e-13);
        assert!((s.evaluate(1, Complex64::new(2.0, 0.0)).unwrap().re - r2).abs() < 1e-13);
        assert!((s.evaluate(2, Complex64::new(0.0, 0.0)).unwrap().re + r2).abs() < 1e-13);
        assert!((s.evaluate(0, Complex64::new(0.3, 1.0)).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn growth_toward_green_function() {
        let s = arcsine(100);
        let g = (1.0 + 2f64.sqrt()).ln();
        let v = s.growth_exponent(100, Complex64::new(0.0, 2.0)).unwrap();
        assert!((v - g).abs() < 0.02);
        let v3 = s.growth_exponent(100, Complex64::new(3.0, 0.0)).unwrap();
        assert!((v3 - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 0.02);
    }

    #[test]
    fn rational_system_is_orthonormal() {
        let mu = Measure::arcsine(-1.0, 1.0).unwrap();
        let c = PoleSequence::new(vec![Finite(2.0), Infinity, Finite(-3.0)]).unwrap();
        let s = orthonormalize(&mu, &c, 12, PrecisionPolicy::default()).unwrap();
        assert!(s.orthonormality_error() < 1e-10);
        assert!(s.kappas().iter().all(|&k| k > 0.0));
        assert!(matches!(s.evaluate(1, Complex64::new(2.0, 0.0)), Err(Error::EvaluationAtPole(_))));
    }

    #[test]
    fn atomic_rank_guard() {
        let atoms: Vec<_> = (0..5).map(|i| (Finite(i as f64), 1.0)).collect();
        let mu = Measure::atomic(&atoms).unwrap();
        assert!(orthonormalize(&mu, &PoleSequence::infinity(), 4, PrecisionPolicy::default()).is_ok());
        assert!(matches!(
            orthonormalize(&mu, &PoleSequence::infinity(), 5, PrecisionPolicy::default()),
            Err(Error::RankDeficient(_))
        ));
    }
}
