//! Double-double arithmetic (~31 significant digits) for oracle computations.
//!
//! The main pipeline runs in f64; this extended mode exists so that reference
//! values for tests can be computed with headroom. Algorithms are the classic
//! error-free transformations (Dekker / Knuth two-sum, FMA two-product).

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = f64::mul_add(a, b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from(a: f64) -> Dd {
        Dd { hi: a, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let s2 = s2 + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, o.hi);
        let p2 = p2 + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo: lo + q3 }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        // one Newton step on x = sqrt(a) starting from the f64 root
        let x = Dd::from(self.hi.sqrt());
        let half = Dd { hi: 0.5, lo: 0.0 };
        x.add(self.div(x)).mul(half)
    }
}

/// Complex double-double, just enough for polynomial evaluation oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdComplex {
    pub re: Dd,
    pub im: Dd,
}

impl DdComplex {
    pub const ZERO: DdComplex = DdComplex { re: Dd::ZERO, im: Dd::ZERO };

    pub fn from_c64(z: Complex64) -> DdComplex {
        DdComplex { re: Dd::from(z.re), im: Dd::from(z.im) }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(self) -> DdComplex {
        DdComplex { re: self.re, im: self.im.neg() }
    }

    pub fn add(self, o: DdComplex) -> DdComplex {
        DdComplex { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    pub fn sub(self, o: DdComplex) -> DdComplex {
        DdComplex { re: self.re.sub(o.re), im: self.im.sub(o.im) }
    }

    pub fn mul(self, o: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub fn div(self, o: DdComplex) -> DdComplex {
        let den = o.re.mul(o.re).add(o.im.mul(o.im));
        let num = self.mul(o.conj());
        DdComplex { re: num.re.div(den), im: num.im.div(den) }
    }

    pub fn norm_f64(self) -> f64 {
        let z = self.to_c64();
        z.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_mul_recovers_splitting_error() {
        let a = Dd::from(1.0).div(Dd::from(3.0));
        let three = Dd::from(3.0);
        let back = a.mul(three);
        assert!((back.to_f64() - 1.0).abs() < 1e-30);
        // hi alone cannot represent 1/3 * 3 exactly, the lo limb must carry it
        assert!((back.hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dd_sqrt_squares_back() {
        let x = Dd::from(2.0).sqrt();
        let err = x.mul(x).sub(Dd::from(2.0));
        assert!(err.to_f64().abs() < 1e-30);
    }

    #[test]
    fn ddcomplex_div_roundtrip() {
        let a = DdComplex::from_c64(Complex64::new(0.3, -1.7));
        let b = DdComplex::from_c64(Complex64::new(-2.1, 0.4));
        let q = a.div(b);
        let back = q.mul(b);
        assert!(back.sub(a).norm_f64() < 1e-29);
    }
}
