//! Real Möbius transformations acting on the extended real line.

use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A point of ℝ ∪ {∞}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinity,
}

impl ExtendedReal {
    pub fn finite(x: f64) -> Result<Self> {
        if x.is_finite() {
            Ok(ExtendedReal::Finite(x))
        } else {
            Err(Error::InvalidInput(format!("non-finite real {x}")))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedReal::Infinity)
    }

    pub fn as_finite(&self) -> Option<f64> {
        match *self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinity => None,
        }
    }

    /// Angle of the point on the circle ℝ̄ ≅ S¹ (∞ at π).
    pub fn circle_angle(&self) -> f64 {
        match *self {
            ExtendedReal::Finite(x) => 2.0 * x.atan(),
            ExtendedReal::Infinity => std::f64::consts::PI,
        }
    }

    /// Total order on ℝ̄ with ∞ placed last.
    pub fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::Infinity) => Less,
            (ExtendedReal::Infinity, ExtendedReal::Finite(_)) => Greater,
            (ExtendedReal::Infinity, ExtendedReal::Infinity) => Equal,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            ExtendedReal::Finite(x)
        } else {
            ExtendedReal::Infinity
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for ExtendedReal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            // one point at infinity, so both signs name it
            "inf" | "infinity" | "+inf" | "-inf" | "+infinity" | "-infinity" | "∞" => return Ok(ExtendedReal::Infinity),
            _ => {}
        }
        let x: f64 = t.parse().map_err(|_| Error::InvalidInput(format!("not an extended real: {t:?}")))?;
        ExtendedReal::finite(x)
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            ExtendedReal::Finite(x) => s.serialize_f64(x),
            ExtendedReal::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtendedReal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a finite number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<ExtendedReal, E> {
                if x.is_finite() {
                    Ok(ExtendedReal::Finite(x))
                } else {
                    Err(E::custom("non-finite number"))
                }
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(x as f64))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(x as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<ExtendedReal, E> {
                match s.trim().to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "+inf" | "∞" => Ok(ExtendedReal::Infinity),
                    other => Err(E::custom(format!("unrecognised extended real {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Local dilation factor of a map at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dilation {
    pub factor: f64,
    /// True when the map reverses orientation and the factor belongs to `reflect ∘ f`.
    pub reflected: bool,
}

/// z ↦ (a z + b)/(c z + d) with |ad − bc| = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl MoebiusMap {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite Möbius coefficient".into()));
        }
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidInput("degenerate Möbius map (ad - bc = 0)".into()));
        }
        let s = det.abs().sqrt();
        Ok(MoebiusMap { a: a / s, b: b / s, c: c / s, d: d / s })
    }

    fn raw(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a, b, c, d).expect("valid Möbius coefficients")
    }

    pub fn identity() -> Self {
        MoebiusMap { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn translation(t: f64) -> Self {
        Self::raw(1.0, t, 0.0, 1.0)
    }

    pub fn scaling(s: f64) -> Result<Self> {
        Self::new(s, 0.0, 0.0, 1.0)
    }

    /// z ↦ −1/z
    pub fn inversion() -> Self {
        Self::raw(0.0, -1.0, 1.0, 0.0)
    }

    /// z ↦ −z
    pub fn reflection() -> Self {
        Self::raw(-1.0, 0.0, 0.0, 1.0)
    }

    /// z ↦ 1/(c − z), sending c to ∞.
    pub fn resolvent_frame(c: f64) -> Self {
        Self::raw(0.0, 1.0, -1.0, c)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// ρ = sign(ad − bc).
    pub fn orientation(&self) -> i8 {
        if self.determinant() > 0.0 {
            1
        } else {
            -1
        }
    }

    /// The point sent to ∞.
    pub fn pole(&self) -> ExtendedReal {
        if self.c == 0.0 {
            ExtendedReal::Infinity
        } else {
            ExtendedReal::Finite(-self.d / self.c)
        }
    }

    pub fn apply(&self, z: ExtendedReal) -> ExtendedReal {
        match z {
            ExtendedReal::Infinity => {
                if self.c == 0.0 {
                    ExtendedReal::Infinity
                } else {
                    ExtendedReal::Finite(self.a / self.c)
                }
            }
            ExtendedReal::Finite(x) => {
                let den = self.c * x + self.d;
                if den == 0.0 {
                    ExtendedReal::Infinity
                } else {
                    let v = (self.a * x + self.b) / den;
                    if v.is_finite() {
                        ExtendedReal::Finite(v)
                    } else {
                        ExtendedReal::Infinity
                    }
                }
            }
        }
    }

    pub fn apply_real(&self, x: f64) -> ExtendedReal {
        self.apply(ExtendedReal::Finite(x))
    }

    /// Image of a finite complex point; `None` stands for ∞.
    pub fn apply_complex(&self, z: Complex64) -> Option<Complex64> {
        let den = z * self.c + self.d;
        if den.norm() == 0.0 {
            return None;
        }
        Some((z * self.a + self.b) / den)
    }

    /// f ∘ g
    pub fn compose(&self, g: &MoebiusMap) -> MoebiusMap {
        Self::raw(
            self.a * g.a + self.b * g.c,
            self.a * g.b + self.b * g.d,
            self.c * g.a + self.d * g.c,
            self.c * g.b + self.d * g.d,
        )
    }

    pub fn invert(&self) -> MoebiusMap {
        Self::raw(self.d, -self.b, -self.c, self.a)
    }

    /// Local dilation f'(c) in the pole-basis convention: the limit of
    /// r(z; c) / r(f(z); f(c)) with r(z; w) = 1/(w − z) or z when w = ∞.
    pub fn derivative_at(&self, c: ExtendedReal) -> Dilation {
        let reflected = self.orientation() < 0;
        let g = if reflected { Self::reflection().compose(self) } else { *self };
        let det = g.determinant();
        let image = g.apply(c);
        let factor = match (c, image) {
            (ExtendedReal::Finite(x), ExtendedReal::Finite(_)) => {
                let den = g.c * x + g.d;
                det / (den * den)
            }
            (ExtendedReal::Infinity, ExtendedReal::Finite(_)) => det / (g.c * g.c),
            (ExtendedReal::Finite(_), ExtendedReal::Infinity) => g.c * g.c / det,
            (ExtendedReal::Infinity, ExtendedReal::Infinity) => g.d * g.d / det,
        };
        Dilation { factor, reflected }
    }

    /// Maximum coefficient difference after fixing the projective sign.
    pub fn distance(&self, other: &MoebiusMap) -> f64 {
        let p = self.coefficients();
        let q = other.coefficients();
        let plus = p.iter().zip(&q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let minus = p.iter().zip(&q).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        plus.min(minus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(x: f64) -> ExtendedReal {
        ExtendedReal::Finite(x)
    }

    #[test]
    fn apply_conventions() {
        let f = MoebiusMap::inversion();
        assert_eq!(f.apply(fin(2.0)), fin(-0.5));
        assert_eq!(f.apply(ExtendedReal::Infinity), fin(0.0));
        assert_eq!(f.apply(fin(0.0)), ExtendedReal::Infinity);
        assert_eq!(MoebiusMap::translation(1.0).apply(fin(2.0)), fin(3.0));
    }

    #[test]
    fn compose_examples() {
        let id = MoebiusMap::identity();
        let t = MoebiusMap::translation(1.0).compose(&MoebiusMap::translation(-1.0));
        assert!(t.distance(&id) < 1e-15);
        let r = MoebiusMap::reflection().compose(&MoebiusMap::reflection());
        assert!(r.distance(&id) < 1e-15);
        assert_eq!(r.orientation(), 1);
        let i = MoebiusMap::inversion().compose(&MoebiusMap::inversion());
        assert!(i.distance(&id) < 1e-15);
    }

    #[test]
    fn invert_examples() {
        let f = MoebiusMap::translation(3.0).invert();
        assert!(f.distance(&MoebiusMap::translation(-3.0)) < 1e-15);
        let s = MoebiusMap::scaling(2.0).unwrap().invert();
        assert_eq!(s.apply(fin(4.0)), fin(2.0));
        assert!(MoebiusMap::inversion().invert().distance(&MoebiusMap::inversion()) < 1e-15);
    }

    #[test]
    fn dilation_examples() {
        assert!((MoebiusMap::translation(3.0).derivative_at(fin(5.0)).factor - 1.0).abs() < 1e-15);
        assert!((MoebiusMap::scaling(2.0).unwrap().derivative_at(fin(0.0)).factor - 2.0).abs() < 1e-15);
        let d = MoebiusMap::inversion().derivative_at(fin(2.0));
        assert!((d.factor - 0.25).abs() < 1e-15);
        assert!(!d.reflected);
        assert!(MoebiusMap::reflection().derivative_at(fin(1.0)).reflected);
    }

    // r(z; w) / r(f(z); f(w)) approached numerically.
    fn r_ratio(f: &MoebiusMap, c: ExtendedReal, z: f64) -> f64 {
        let r = |x: f64, w: ExtendedReal| match w {
            ExtendedReal::Finite(w) => 1.0 / (w - x),
            ExtendedReal::Infinity => x,
        };
        let fz = f.apply(fin(z)).as_finite().unwrap();
        r(z, c) / r(fz, f.apply(c))
    }

    #[test]
    fn dilation_matches_limit_of_basis_ratio() {
        let maps = [
            MoebiusMap::inversion(),
            MoebiusMap::new(2.0, 1.0, 1.0, 3.0).unwrap(),
            MoebiusMap::new(1.0, 4.0, 0.0, 0.5).unwrap(),
            MoebiusMap::new(0.3, -1.0, 2.0, 1.0).unwrap(),
        ];
        for f in maps {
            for c in [fin(2.0), fin(-0.7), ExtendedReal::Infinity, f.pole()] {
                let z = match c {
                    ExtendedReal::Finite(x) => x + 1e-7,
                    ExtendedReal::Infinity => 1e8,
                };
                let limit = r_ratio(&f, c, z);
                let d = f.derivative_at(c).factor;
                assert!((limit - d).abs() <= 1e-5 * d.abs(), "{f:?} at {c}: {limit} vs {d}");
            }
        }
    }

    #[test]
    fn extended_real_serde() {
        let v: Vec<ExtendedReal> = serde_json::from_str(r#"[1.5, "inf", 2]"#).unwrap();
        assert_eq!(v, vec![fin(1.5), ExtendedReal::Infinity, fin(2.0)]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[1.5,"inf",2.0]"#);
        assert!(serde_json::from_str::<ExtendedReal>("\"nan\"").is_err());
    }
}
