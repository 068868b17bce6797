use num_complex::Complex64;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{DiscreteRule, Measure, PoleSequence};
use crate::moebius::ExtendedReal;
use crate::mp::MpComplex;

/// r_n = 1/(c_k − z)^p, or z^p when c_k = ∞; r_0 = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BasisFunction {
    pub n: usize,
    pub slot: usize,
    pub pole: ExtendedReal,
    pub power: usize,
}

pub fn basis_r(n: usize, poles: &PoleSequence) -> BasisFunction {
    let slot = poles.slot_of(n);
    BasisFunction { n, slot, pole: poles.get(slot), power: poles.power_of(n) }
}

impl BasisFunction {
    pub fn eval(&self, z: Complex64) -> Option<Complex64> {
        if self.power == 0 {
            return Some(Complex64::new(1.0, 0.0));
        }
        let u = match self.pole {
            ExtendedReal::Finite(c) => {
                let d = Complex64::new(c, 0.0) - z;
                if d.norm() == 0.0 {
                    return None;
                }
                1.0 / d
            }
            ExtendedReal::Infinity => z,
        };
        Some(u.powi(self.power as i32))
    }

    pub fn eval_ext(&self, x: ExtendedReal) -> Option<f64> {
        match x {
            ExtendedReal::Finite(x) => self.eval(Complex64::new(x, 0.0)).map(|v| v.re),
            ExtendedReal::Infinity => match (self.power, self.pole) {
                (0, _) => Some(1.0),
                (_, ExtendedReal::Finite(_)) => Some(0.0),
                (_, ExtendedReal::Infinity) => None,
            },
        }
    }
}

/// u_k(x) = 1/(c_k − x) or x at every rule point, at `prec` bits.
pub(crate) fn slot_values(points: &[ExtendedReal], pole: ExtendedReal, prec: u32) -> Result<Vec<Float>> {
    points
        .iter()
        .map(|&x| match (pole, x) {
            (ExtendedReal::Finite(c), ExtendedReal::Finite(x)) => {
                let mut d = Float::with_val(prec, c);
                d -= x;
                if d.is_zero() {
                    return Err(Error::PoleInSupport(format!("{c}")));
                }
                Ok(d.recip())
            }
            (ExtendedReal::Finite(_), ExtendedReal::Infinity) => Ok(Float::new(prec)),
            (ExtendedReal::Infinity, ExtendedReal::Finite(x)) => Ok(Float::with_val(prec, x)),
            (ExtendedReal::Infinity, ExtendedReal::Infinity) => {
                Err(Error::PoleInSupport("inf".into()))
            }
        })
        .collect()
}

/// Basis values r_n(x_i), produced row by row.
pub(crate) struct BasisRows {
    slots: Vec<Vec<Float>>,
    rows: Vec<Vec<Float>>,
    period: usize,
    prec: u32,
    len: usize,
}

impl BasisRows {
    pub fn new(rule: &DiscreteRule, poles: &PoleSequence, prec: u32) -> Result<Self> {
        let slots = poles
            .points()
            .iter()
            .map(|&c| slot_values(&rule.points, c, prec))
            .collect::<Result<Vec<_>>>()?;
        Ok(BasisRows { slots, rows: Vec::new(), period: poles.period(), prec, len: rule.len() })
    }

    /// Computes and stores row n (rows must be requested in order).
    pub fn push_next(&mut self) -> &[Float] {
        let n = self.rows.len();
        let row = if n == 0 {
            vec![Float::with_val(self.prec, 1); self.len]
        } else {
            let k = (n + self.period - 1) % self.period;
            let u = &self.slots[k];
            if n > self.period {
                let prev = &self.rows[n - self.period];
                prev.iter().zip(u).map(|(a, b)| Float::with_val(self.prec, a * b)).collect()
            } else {
                u.clone()
            }
        };
        self.rows.push(row);
        &self.rows[n]
    }

    pub fn row(&self, n: usize) -> &[Float] {
        &self.rows[n]
    }
}

/// Gram matrix ⟨r_m, r_n⟩ over μ at `prec` bits.
pub fn gram(mu: &Measure, poles: &PoleSequence, n_max: usize, prec: u32) -> Result<Vec<Vec<Float>>> {
    poles.validate_for(mu)?;
    if mu.support_size() <= n_max {
        return Err(Error::RankDeficient(format!(
            "measure has {} support points, N = {n_max}",
            mu.support_size()
        )));
    }
    let rule = mu.rule();
    let mut rows = BasisRows::new(&rule, poles, prec)?;
    let w: Vec<Float> = rule.weights.iter().map(|&w| Float::with_val(prec, w)).collect();
    let mut g = vec![vec![Float::new(prec); n_max + 1]; n_max + 1];
    for n in 0..=n_max {
        rows.push_next();
        let rn: Vec<Float> = rows.row(n).iter().zip(&w).map(|(r, w)| Float::with_val(prec, r * w)).collect();
        for m in 0..=n {
            let mut acc = Float::new(prec);
            for (a, b) in rn.iter().zip(rows.row(m)) {
                acc += a * b;
            }
            g[m][n] = acc.clone();
            g[n][m] = acc;
        }
    }
    Ok(g)
}

/// f64 Gram matrix, for quick checks.
pub fn gram_f64(mu: &Measure, poles: &PoleSequence, n_max: usize) -> Result<Vec<Vec<f64>>> {
    Ok(gram(mu, poles, n_max, 53)?
        .into_iter()
        .map(|r| r.into_iter().map(|x| x.to_f64()).collect())
        .collect())
}

/// u_k(z) for every slot at a complex point; `None` entries mark u = ∞.
pub(crate) fn slot_values_complex(
    poles: &PoleSequence,
    z: &MpComplex,
) -> Result<Vec<MpComplex>> {
    let prec = z.prec();
    poles
        .points()
        .iter()
        .map(|&c| match c {
            ExtendedReal::Finite(c) => {
                let d = MpComplex::from_real(Float::with_val(prec, c)).sub(z);
                if d.is_zero() {
                    Err(Error::EvaluationAtPole(format!("{c}")))
                } else {
                    Ok(d.recip())
                }
            }
            ExtendedReal::Infinity => Ok(z.clone()),
        })
        .collect()
}
