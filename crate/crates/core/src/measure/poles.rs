use serde::{Deserialize, Serialize};

use super::Measure;
use crate::error::{Error, Result};
use crate::moebius::{ExtendedReal, MoebiusMap};

/// Distance kept between poles and supp μ.
pub const POLE_MARGIN: f64 = 1e-9;

/// The periodically repeated poles c_1..c_{g+1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ExtendedReal>", into = "Vec<ExtendedReal>")]
pub struct PoleSequence {
    points: Vec<ExtendedReal>,
}

impl TryFrom<Vec<ExtendedReal>> for PoleSequence {
    type Error = Error;
    fn try_from(v: Vec<ExtendedReal>) -> Result<Self> {
        PoleSequence::new(v)
    }
}

impl From<PoleSequence> for Vec<ExtendedReal> {
    fn from(p: PoleSequence) -> Self {
        p.points
    }
}

impl PoleSequence {
    pub fn new(points: Vec<ExtendedReal>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("pole sequence is empty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if let ExtendedReal::Finite(x) = p {
                if !x.is_finite() {
                    return Err(Error::InvalidInput("pole must be finite or inf".into()));
                }
            }
            if points[..i].contains(p) {
                return Err(Error::InvalidInput(format!("repeated pole {p}")));
            }
        }
        Ok(PoleSequence { points })
    }

    pub fn infinity() -> Self {
        PoleSequence { points: vec![ExtendedReal::Infinity] }
    }

    pub fn points(&self) -> &[ExtendedReal] {
        &self.points
    }

    pub fn genus(&self) -> usize {
        self.points.len() - 1
    }

    pub fn period(&self) -> usize {
        self.points.len()
    }

    /// c_k for the 1-based slot k.
    pub fn get(&self, k: usize) -> ExtendedReal {
        self.points[k - 1]
    }

    /// 1-based slot of the pole at ∞, if present.
    pub fn infinity_slot(&self) -> Option<usize> {
        self.points.iter().position(|p| p.is_infinite()).map(|i| i + 1)
    }

    /// Slot k(n) ∈ 1..=g+1 of the basis element r_n (r_0 counts in slot g+1).
    pub fn slot_of(&self, n: usize) -> usize {
        let p = self.period();
        (n + p - 1) % p + 1
    }

    /// Power j+1 of r_n = 1/(c_k − z)^{j+1}; zero for r_0.
    pub fn power_of(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else {
            (n - 1) / self.period() + 1
        }
    }

    pub fn map(&self, f: &MoebiusMap) -> PoleSequence {
        PoleSequence { points: self.points.iter().map(|p| f.apply(*p)).collect() }
    }

    /// Rejects poles inside supp μ (with a small margin).
    pub fn validate_for(&self, mu: &Measure) -> Result<()> {
        for p in &self.points {
            let tol = match p {
                ExtendedReal::Finite(x) => POLE_MARGIN * x.abs().max(1.0),
                ExtendedReal::Infinity => 0.0,
            };
            if mu.support_contains(*p, tol) {
                return Err(Error::PoleInSupport(p.to_string()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtendedReal::*;

    #[test]
    fn slots_and_powers() {
        let c = PoleSequence::new(vec![Finite(0.0), Infinity]).unwrap();
        assert_eq!(c.slot_of(0), 2);
        assert_eq!(c.slot_of(1), 1);
        assert_eq!(c.slot_of(2), 2);
        assert_eq!(c.slot_of(3), 1);
        assert_eq!(c.power_of(0), 0);
        assert_eq!(c.power_of(1), 1);
        assert_eq!(c.power_of(2), 1);
        assert_eq!(c.power_of(3), 2);
        assert_eq!(c.infinity_slot(), Some(2));
    }

    #[test]
    fn validation() {
        assert!(PoleSequence::new(vec![Infinity, Infinity]).is_err());
        let mu = Measure::arcsine(-2.0, 2.0).unwrap();
        assert!(PoleSequence::new(vec![Finite(1.0)]).unwrap().validate_for(&mu).is_err());
        assert!(PoleSequence::new(vec![Finite(3.0), Infinity]).unwrap().validate_for(&mu).is_ok());
        let pushed = mu.pushforward(&MoebiusMap::inversion());
        assert!(PoleSequence::infinity().validate_for(&pushed).is_err());
    }
}
