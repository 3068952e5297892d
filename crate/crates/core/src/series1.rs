//! Truncated univariate power series over `Complex64`.
//!
//! Used for parameter-direction series: the formal invariant b(eps), the
//! canonical reparametrization eps(eta), and the square-root algebra in
//! nu = sqrt(eta) needed by the preparation step.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series1 {
    /// Coefficient of x^k at index k. Length = truncation order + 1.
    pub c: Vec<Complex64>,
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

impl Series1 {
    pub fn zero(order: usize) -> Series1 {
        Series1 { c: vec![ZERO; order + 1] }
    }

    pub fn constant(a: Complex64, order: usize) -> Series1 {
        let mut s = Series1::zero(order);
        s.c[0] = a;
        s
    }

    pub fn identity(order: usize) -> Series1 {
        let mut s = Series1::zero(order);
        if order >= 1 {
            s.c[1] = Complex64::new(1.0, 0.0);
        }
        s
    }

    pub fn from_coeffs(c: Vec<Complex64>) -> Series1 {
        Series1 { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn truncated(&self, order: usize) -> Series1 {
        let mut c = self.c.clone();
        c.resize(order + 1, ZERO);
        Series1 { c }
    }

    pub fn add(&self, o: &Series1) -> Series1 {
        let n = self.c.len().max(o.c.len());
        let mut c = vec![ZERO; n];
        for (i, v) in self.c.iter().enumerate() {
            c[i] += v;
        }
        for (i, v) in o.c.iter().enumerate() {
            c[i] += v;
        }
        Series1 { c }
    }

    pub fn sub(&self, o: &Series1) -> Series1 {
        let n = self.c.len().max(o.c.len());
        let mut c = vec![ZERO; n];
        for (i, v) in self.c.iter().enumerate() {
            c[i] += v;
        }
        for (i, v) in o.c.iter().enumerate() {
            c[i] -= v;
        }
        Series1 { c }
    }

    pub fn scale(&self, a: Complex64) -> Series1 {
        Series1 { c: self.c.iter().map(|v| v * a).collect() }
    }

    pub fn mul(&self, o: &Series1) -> Series1 {
        let n = self.order().max(o.order());
        let mut c = vec![ZERO; n + 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                if i + j > n {
                    break;
                }
                c[i + j] += a * b;
            }
        }
        Series1 { c }
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn recip(&self) -> Result<Series1> {
        let a0 = self.c[0];
        if a0.norm() == 0.0 {
            return Err(Error::SingularSeries);
        }
        let n = self.order();
        let mut r = vec![ZERO; n + 1];
        r[0] = Complex64::new(1.0, 0.0) / a0;
        for k in 1..=n {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.c[j] * r[k - j];
            }
            r[k] = -acc / a0;
        }
        Ok(Series1 { c: r })
    }

    pub fn div(&self, o: &Series1) -> Result<Series1> {
        Ok(self.mul(&o.recip()?))
    }

    /// Principal square root; requires a nonzero constant term.
    pub fn sqrt(&self) -> Result<Series1> {
        let a0 = self.c[0];
        if a0.norm() == 0.0 {
            return Err(Error::SingularSeries);
        }
        let n = self.order();
        let s0 = a0.sqrt();
        let mut s = vec![ZERO; n + 1];
        s[0] = s0;
        for k in 1..=n {
            let mut acc = ZERO;
            for j in 1..k {
                acc += s[j] * s[k - j];
            }
            s[k] = (self.c[k] - acc) / (s0 * 2.0);
        }
        Ok(Series1 { c: s })
    }

    /// log(self / self(0)) + Log(self(0)), principal branch on the constant.
    pub fn log(&self) -> Result<Series1> {
        let a0 = self.c[0];
        if a0.norm() == 0.0 {
            return Err(Error::SingularSeries);
        }
        if a0.re < 0.0 && a0.im == 0.0 {
            return Err(Error::BranchCut);
        }
        let n = self.order();
        // log' = self'/self, integrate term by term
        let dself = self.derivative();
        let quot = dself.mul(&self.recip()?);
        let mut c = vec![ZERO; n + 1];
        c[0] = a0.ln();
        for k in 1..=n {
            c[k] = quot.c[k - 1] / (k as f64);
        }
        Ok(Series1 { c })
    }

    pub fn derivative(&self) -> Series1 {
        let n = self.order();
        let mut c = vec![ZERO; n + 1];
        for k in 1..=n {
            c[k - 1] = self.c[k] * (k as f64);
        }
        Series1 { c }
    }

    /// Composition self(inner), requiring inner(0) = 0.
    pub fn compose(&self, inner: &Series1) -> Result<Series1> {
        if inner.c[0].norm() > 0.0 {
            return Err(Error::Misuse("composition requires inner(0) = 0".into()));
        }
        let n = self.order().max(inner.order());
        let mut acc = Series1::constant(self.c[self.order()], n);
        for k in (0..self.order()).rev() {
            acc = acc.mul(&inner.truncated(n));
            acc.c[0] += self.c[k];
        }
        Ok(acc)
    }

    /// Reversion: T with self(T(x)) = x. Requires c0 = 0, c1 != 0.
    pub fn revert(&self) -> Result<Series1> {
        if self.c[0].norm() > 0.0 {
            return Err(Error::Misuse("reversion requires vanishing constant term".into()));
        }
        if self.c[1].norm() == 0.0 {
            return Err(Error::SingularSeries);
        }
        let n = self.order();
        let mut t = Series1::zero(n);
        t.c[1] = Complex64::new(1.0, 0.0) / self.c[1];
        for _ in 0..n {
            // Newton: t <- t - (self∘t - id) / (self'∘t)
            let err = self.compose(&t)?.sub(&Series1::identity(n));
            let dpt = self.derivative().compose(&t)?;
            t = t.sub(&err.mul(&dpt.recip()?));
        }
        Ok(t.truncated(n))
    }

    /// Keep only even powers, as a series in x^2 (coefficient of x^{2k} lands at index k).
    pub fn even_in_square(&self) -> Series1 {
        let m = self.order() / 2;
        let mut c = vec![ZERO; m + 1];
        for k in 0..=m {
            c[k] = self.c[2 * k];
        }
        Series1 { c }
    }

    /// Odd part divided by x, as a series in x^2.
    pub fn odd_in_square(&self) -> Series1 {
        let m = self.order() / 2;
        let mut c = vec![ZERO; m + 1];
        for k in 0..=m {
            if 2 * k + 1 <= self.order() {
                c[k] = self.c[2 * k + 1];
            }
        }
        Series1 { c }
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for k in (0..self.c.len()).rev() {
            acc = acc * x + self.c[k];
        }
        acc
    }

    pub fn conj_coeffs(&self) -> Series1 {
        Series1 { c: self.c.iter().map(|v| v.conj()).collect() }
    }

    /// Multiply by x, dropping the top coefficient.
    pub fn shift_up(&self) -> Series1 {
        let mut c = vec![ZERO; self.c.len()];
        for k in 1..c.len() {
            c[k] = self.c[k - 1];
        }
        Series1 { c }
    }

    /// Divide by x; the constant term (returned) is dropped.
    pub fn shift_down(&self) -> (Series1, Complex64) {
        let mut c = vec![ZERO; self.c.len()];
        for k in 1..self.c.len() {
            c[k - 1] = self.c[k];
        }
        (Series1 { c }, self.c[0])
    }

    pub fn max_im(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, v| m.max(v.im.abs()))
    }

    pub fn real_coeffs(&self) -> Vec<f64> {
        self.c.iter().map(|v| v.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn recip_times_self_is_one() {
        let s = Series1::from_coeffs(vec![c(2.0), c(-1.0), c(0.25), c(3.0), c(0.0), c(1.0)]);
        let r = s.recip().unwrap();
        let p = s.mul(&r);
        assert!((p.c[0] - c(1.0)).norm() < 1e-15);
        for k in 1..=5 {
            assert!(p.c[k].norm() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let s = Series1::from_coeffs(vec![c(1.0), c(2.0), c(-0.5), c(0.125), c(7.0)]);
        let q = s.sqrt().unwrap();
        let back = q.mul(&q);
        for k in 0..=4 {
            assert!((back.c[k] - s.c[k]).norm() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn log_of_exp_series() {
        // exp(x) truncated, log should give back x
        let n = 8;
        let mut e = Series1::zero(n);
        let mut fact = 1.0;
        for k in 0..=n {
            if k > 0 {
                fact *= k as f64;
            }
            e.c[k] = c(1.0 / fact);
        }
        let l = e.log().unwrap();
        assert!((l.c[1] - c(1.0)).norm() < 1e-14);
        for k in [0usize, 2, 3, 4, 5] {
            assert!(l.c[k].norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn revert_round_trip() {
        let n = 9;
        let mut s = Series1::zero(n);
        s.c[1] = c(1.0);
        s.c[2] = c(1.0); // x + x^2
        let t = s.revert().unwrap();
        // Lagrange reversion of x + x^2: signed Catalan numbers
        let expect = [0.0, 1.0, -1.0, 2.0, -5.0, 14.0, -42.0, 132.0, -429.0, 1430.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((t.c[k] - c(*e)).norm() < 1e-9 * e.abs().max(1.0), "k={k}");
        }
        let round = s.compose(&t).unwrap();
        assert!((round.c[1] - c(1.0)).norm() < 1e-12);
        for k in 2..=n {
            assert!(round.c[k].norm() < 1e-8, "k={k} -> {}", round.c[k]);
        }
    }
}
