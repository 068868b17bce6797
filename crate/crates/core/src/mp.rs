//! Multiprecision helpers over MPFR floats.

use num_complex::Complex64;
use rug::ops::CompleteRound;
use rug::Float;

/// Precision ladder used when escalating.
pub const LADDER: [u32; 8] = [53, 128, 192, 256, 384, 512, 768, 1024];

pub fn ladder(start_bits: u32, max_bits: u32) -> Vec<u32> {
    let mut steps: Vec<u32> = LADDER
        .iter()
        .copied()
        .filter(|&b| b >= start_bits && b <= max_bits)
        .collect();
    if steps.first() != Some(&start_bits) && start_bits <= max_bits {
        steps.insert(0, start_bits);
    }
    if steps.last().is_none_or(|&b| b < max_bits) {
        steps.push(max_bits);
    }
    steps
}

pub fn float(prec: u32, x: f64) -> Float {
    Float::with_val(prec, x)
}

/// Complex number with MPFR components.
#[derive(Clone, Debug)]
pub struct MpComplex {
    pub re: Float,
    pub im: Float,
}

impl MpComplex {
    pub fn zero(prec: u32) -> Self {
        MpComplex { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn from_c64(prec: u32, z: Complex64) -> Self {
        MpComplex { re: Float::with_val(prec, z.re), im: Float::with_val(prec, z.im) }
    }

    pub fn from_real(x: Float) -> Self {
        let prec = x.prec();
        MpComplex { re: x, im: Float::new(prec) }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn norm_sqr(&self) -> Float {
        let mut s = Float::with_val(self.prec(), self.re.square_ref());
        s += &self.im * &self.im;
        s
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn ln_abs(&self) -> Float {
        self.abs().ln()
    }

    pub fn add(&self, o: &MpComplex) -> MpComplex {
        let p = self.prec();
        MpComplex { re: Float::with_val(p, &self.re + &o.re), im: Float::with_val(p, &self.im + &o.im) }
    }

    pub fn sub(&self, o: &MpComplex) -> MpComplex {
        let p = self.prec();
        MpComplex { re: Float::with_val(p, &self.re - &o.re), im: Float::with_val(p, &self.im - &o.im) }
    }

    pub fn mul(&self, o: &MpComplex) -> MpComplex {
        let p = self.prec();
        let re = (&self.re * &o.re).complete(p) - (&self.im * &o.im).complete(p);
        let im = (&self.re * &o.im).complete(p) + (&self.im * &o.re).complete(p);
        MpComplex { re, im }
    }

    pub fn scale(&self, s: &Float) -> MpComplex {
        let p = self.prec();
        MpComplex { re: Float::with_val(p, &self.re * s), im: Float::with_val(p, &self.im * s) }
    }

    pub fn add_real(&self, s: &Float) -> MpComplex {
        MpComplex { re: Float::with_val(self.prec(), &self.re + s), im: self.im.clone() }
    }

    pub fn recip(&self) -> MpComplex {
        let n = self.norm_sqr();
        let re = Float::with_val(self.prec(), &self.re / &n);
        let im = -Float::with_val(self.prec(), &self.im / &n);
        MpComplex { re, im }
    }

    pub fn div(&self, o: &MpComplex) -> MpComplex {
        self.mul(&o.recip())
    }

    pub fn neg(&self) -> MpComplex {
        MpComplex { re: -self.re.clone(), im: -self.im.clone() }
    }

    /// self += a * b
    pub fn add_mul_real(&mut self, a: &MpComplex, b: &Float) {
        self.re += &a.re * b;
        self.im += &a.im * b;
    }
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = Neumaier::new();
    for x in it {
        s.add(x);
    }
    s.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_shapes() {
        assert_eq!(ladder(53, 512), vec![53, 128, 192, 256, 384, 512]);
        assert_eq!(ladder(256, 256), vec![256]);
        assert_eq!(ladder(100, 300), vec![100, 128, 192, 256, 300]);
    }

    #[test]
    fn complex_arithmetic() {
        let a = MpComplex::from_c64(128, Complex64::new(1.0, 2.0));
        let b = MpComplex::from_c64(128, Complex64::new(-3.0, 0.5));
        let q = a.div(&b).mul(&b);
        assert!((q.to_c64() - Complex64::new(1.0, 2.0)).norm() < 1e-30);
        assert!((a.abs().to_f64() - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(v), 2.0);
    }
}
