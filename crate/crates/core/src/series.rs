//! Truncated formal power series in (eps, w) for mix analytic and mix
//! anti-analytic germs.
//!
//! A `SeriesFamily` stores a polynomial P(eps, w) together with a
//! `conjugating` flag. The family acts on the space variable as
//!
//! * `z -> P(eps, z)`        when `conjugating == false` (mix analytic);
//! * `z -> P(conj eps, conj z)` when `conjugating == true` (mix anti-analytic).
//!
//! For real parameter values the conjugation of eps is invisible; it is what
//! makes the complexified family anti-holomorphic in the parameter.
//! All arithmetic is exact on the retained coefficients: a coefficient of
//! eps^k w^j with j <= deg_w, k <= deg_eps never receives contributions from
//! discarded ones, provided inner factors fix the origin at eps = 0.

use num_complex::Complex64;

use crate::dd::DdComplex;
use crate::error::{Error, Result};
use crate::series1::Series1;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFamily {
    deg_w: usize,
    deg_eps: usize,
    conjugating: bool,
    /// coefficient of eps^k * w^j at index k * (deg_w + 1) + j
    coeffs: Vec<Complex64>,
}

impl SeriesFamily {
    pub fn zero(deg_w: usize, deg_eps: usize, conjugating: bool) -> SeriesFamily {
        SeriesFamily {
            deg_w,
            deg_eps,
            conjugating,
            coeffs: vec![ZERO; (deg_w + 1) * (deg_eps + 1)],
        }
    }

    /// The identity map w.
    pub fn identity(deg_w: usize, deg_eps: usize) -> SeriesFamily {
        let mut s = SeriesFamily::zero(deg_w, deg_eps, false);
        s.set(1, 0, ONE);
        s
    }

    /// Complex conjugation z -> conj(z) as a family.
    pub fn sigma(deg_w: usize, deg_eps: usize) -> SeriesFamily {
        let mut s = SeriesFamily::zero(deg_w, deg_eps, true);
        s.set(1, 0, ONE);
        s
    }

    pub fn deg_w(&self) -> usize {
        self.deg_w
    }

    pub fn deg_eps(&self) -> usize {
        self.deg_eps
    }

    pub fn conjugating(&self) -> bool {
        self.conjugating
    }

    pub fn set_conjugating(&mut self, flag: bool) {
        self.conjugating = flag;
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        if j > self.deg_w || k > self.deg_eps {
            return ZERO;
        }
        self.coeffs[k * (self.deg_w + 1) + j]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: Complex64) {
        assert!(j <= self.deg_w && k <= self.deg_eps, "coefficient out of truncation range");
        self.coeffs[k * (self.deg_w + 1) + j] = v;
    }

    pub fn add_to(&mut self, j: usize, k: usize, v: Complex64) {
        let cur = self.get(j, k);
        self.set(j, k, cur + v);
    }

    pub fn resized(&self, deg_w: usize, deg_eps: usize) -> Result<SeriesFamily> {
        for k in 0..=self.deg_eps {
            for j in 0..=self.deg_w {
                if (j > deg_w || k > deg_eps) && self.get(j, k).norm() != 0.0 {
                    return Err(Error::TruncationOverflow {
                        requested: j.max(k),
                        max: deg_w.min(deg_eps),
                    });
                }
            }
        }
        let mut out = SeriesFamily::zero(deg_w, deg_eps, self.conjugating);
        for k in 0..=self.deg_eps.min(deg_eps) {
            for j in 0..=self.deg_w.min(deg_w) {
                out.set(j, k, self.get(j, k));
            }
        }
        Ok(out)
    }

    /// w-degree coefficients as eps-series.
    pub fn w_coefficient(&self, j: usize) -> Series1 {
        let mut c = vec![ZERO; self.deg_eps + 1];
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = self.get(j, k);
        }
        Series1 { c }
    }

    pub fn set_w_coefficient(&mut self, j: usize, s: &Series1) {
        for k in 0..=self.deg_eps {
            let v = if k < s.c.len() { s.c[k] } else { ZERO };
            self.set(j, k, v);
        }
    }

    pub fn add(&self, o: &SeriesFamily) -> SeriesFamily {
        let mut out = SeriesFamily::zero(
            self.deg_w.max(o.deg_w),
            self.deg_eps.max(o.deg_eps),
            self.conjugating,
        );
        for k in 0..=out.deg_eps {
            for j in 0..=out.deg_w {
                out.set(j, k, self.get(j, k) + o.get(j, k));
            }
        }
        out
    }

    pub fn sub(&self, o: &SeriesFamily) -> SeriesFamily {
        let mut out = SeriesFamily::zero(
            self.deg_w.max(o.deg_w),
            self.deg_eps.max(o.deg_eps),
            self.conjugating,
        );
        for k in 0..=out.deg_eps {
            for j in 0..=out.deg_w {
                out.set(j, k, self.get(j, k) - o.get(j, k));
            }
        }
        out
    }

    pub fn scale(&self, a: Complex64) -> SeriesFamily {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= a;
        }
        out
    }

    /// Truncated product of the stored polynomials.
    pub fn mul(&self, o: &SeriesFamily) -> SeriesFamily {
        let dw = self.deg_w.max(o.deg_w);
        let de = self.deg_eps.max(o.deg_eps);
        let mut out = SeriesFamily::zero(dw, de, self.conjugating);
        for ka in 0..=self.deg_eps {
            for ja in 0..=self.deg_w {
                let a = self.get(ja, ka);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for kb in 0..=(de - ka).min(o.deg_eps) {
                    for jb in 0..=(dw.saturating_sub(ja)).min(o.deg_w) {
                        let b = o.get(jb, kb);
                        if b.norm_sqr() == 0.0 {
                            continue;
                        }
                        out.add_to(ja + jb, ka + kb, a * b);
                    }
                }
            }
        }
        out
    }

    /// Multiply by eps (drops the top eps order).
    pub fn mul_eps(&self) -> SeriesFamily {
        let mut out = SeriesFamily::zero(self.deg_w, self.deg_eps, self.conjugating);
        for k in 1..=self.deg_eps {
            for j in 0..=self.deg_w {
                out.set(j, k, self.get(j, k - 1));
            }
        }
        out
    }

    /// Coefficient-wise complex conjugation of the stored polynomial.
    pub fn conj_coeffs(&self) -> SeriesFamily {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c = c.conj();
        }
        out
    }

    /// Derivative of the stored polynomial with respect to the space variable.
    pub fn derivative_w(&self) -> SeriesFamily {
        let mut out = SeriesFamily::zero(self.deg_w, self.deg_eps, self.conjugating);
        for k in 0..=self.deg_eps {
            for j in 1..=self.deg_w {
                out.set(j - 1, k, self.get(j, k) * (j as f64));
            }
        }
        out
    }

    pub fn max_im(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.im.abs()))
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    pub fn max_diff(&self, o: &SeriesFamily) -> f64 {
        let mut m = 0.0f64;
        for k in 0..=self.deg_eps.max(o.deg_eps) {
            for j in 0..=self.deg_w.max(o.deg_w) {
                m = m.max((self.get(j, k) - o.get(j, k)).norm());
            }
        }
        m
    }

    /// Polynomial coefficients in w at a numeric parameter value, honoring the
    /// anti-holomorphic parameter dependence of conjugating families.
    pub fn weights_at(&self, eps: Complex64) -> Vec<Complex64> {
        let e = if self.conjugating { eps.conj() } else { eps };
        let mut weights = vec![ZERO; self.deg_w + 1];
        for (j, wj) in weights.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in (0..=self.deg_eps).rev() {
                acc = acc * e + self.get(j, k);
            }
            *wj = acc;
        }
        weights
    }

    /// Evaluate the family as a map at (eps, z).
    pub fn evaluate(&self, eps: Complex64, z: Complex64) -> Complex64 {
        let weights = self.weights_at(eps);
        let arg = if self.conjugating { z.conj() } else { z };
        horner(&weights, arg)
    }

    /// Double-double evaluation for oracle use (real parameter path only).
    pub fn evaluate_dd(&self, eps: Complex64, z: Complex64) -> DdComplex {
        let e = DdComplex::from_c64(if self.conjugating { eps.conj() } else { eps });
        let arg = DdComplex::from_c64(if self.conjugating { z.conj() } else { z });
        let mut acc = DdComplex::ZERO;
        for j in (0..=self.deg_w).rev() {
            let mut cj = DdComplex::ZERO;
            for k in (0..=self.deg_eps).rev() {
                cj = cj.mul(e).add(DdComplex::from_c64(self.get(j, k)));
            }
            acc = acc.mul(arg).add(cj);
        }
        acc
    }

    /// Composition as maps; the flag of the result is the XOR of the flags.
    pub fn compose(outer: &SeriesFamily, inner: &SeriesFamily) -> Result<SeriesFamily> {
        if inner.get(0, 0).norm() != 0.0 {
            return Err(Error::Misuse(
                "inner family must fix the origin at eps = 0 (w^0 eps^0 coefficient nonzero)"
                    .into(),
            ));
        }
        let dw = outer.deg_w.max(inner.deg_w);
        let de = outer.deg_eps.max(inner.deg_eps);
        let inner_stored = if outer.conjugating { inner.conj_coeffs() } else { inner.clone() };
        let mut acc = SeriesFamily::zero(dw, de, false);
        for k in 0..=outer.deg_eps.min(de) {
            acc.set(0, k, outer.get(outer.deg_w, k));
        }
        for j in (0..outer.deg_w).rev() {
            acc = acc.mul(&inner_stored);
            for k in 0..=outer.deg_eps.min(de) {
                acc.add_to(0, k, outer.get(j, k));
            }
        }
        acc.conjugating = outer.conjugating ^ inner.conjugating;
        Ok(acc)
    }

    /// Reciprocal of the stored polynomial, requiring a nonzero value at the origin.
    pub fn recip(&self) -> Result<SeriesFamily> {
        let c00 = self.get(0, 0);
        if c00.norm() == 0.0 {
            return Err(Error::SingularSeries);
        }
        let mut x = SeriesFamily::zero(self.deg_w, self.deg_eps, self.conjugating);
        x.set(0, 0, ONE / c00);
        let two = SeriesFamily::zero(self.deg_w, self.deg_eps, self.conjugating);
        let mut iterations = 1;
        let mut span = 1usize;
        while span < self.deg_w + self.deg_eps + 1 {
            span *= 2;
            iterations += 1;
        }
        for _ in 0..iterations {
            // x <- x (2 - self * x)
            let mut t = two.clone();
            t.set(0, 0, Complex64::new(2.0, 0.0));
            let sx = self.mul(&x);
            x = x.mul(&t.sub(&sx));
        }
        Ok(x)
    }

    /// Inverse map: compose(self, inverse) = identity up to truncation.
    pub fn invert(&self) -> Result<SeriesFamily> {
        if self.get(1, 0).norm() == 0.0 {
            return Err(Error::SingularSeries);
        }
        if self.get(0, 0).norm() != 0.0 {
            return Err(Error::Misuse("inversion requires a family fixing the origin".into()));
        }
        // Revert the stored polynomial, then undo the storage conjugation.
        let p = self;
        let dw = p.deg_w;
        let de = p.deg_eps;
        let id = SeriesFamily::identity(dw, de);
        // initial guess (w - a0(eps)) / a1(0)
        let mut t = SeriesFamily::zero(dw, de, false);
        let a1_inv = ONE / p.get(1, 0);
        t.set(1, 0, a1_inv);
        for k in 1..=de {
            t.set(0, k, -p.get(0, k) * a1_inv);
        }
        let dp = p.plain().derivative_w();
        let steps = (dw + de).next_power_of_two().trailing_zeros() as usize + 2;
        for _ in 0..steps {
            let err = SeriesFamily::compose(&p.plain(), &t)?.sub(&id);
            let denom = SeriesFamily::compose(&dp, &t)?;
            t = t.sub(&err.mul(&denom.recip()?));
        }
        let mut out = if self.conjugating { t.conj_coeffs() } else { t };
        out.conjugating = self.conjugating;
        Ok(out)
    }

    /// Same coefficients with the conjugating flag cleared; internal helper.
    fn plain(&self) -> SeriesFamily {
        let mut s = self.clone();
        s.conjugating = false;
        s
    }

    /// sigma . self . sigma: conjugate every coefficient, flag unchanged.
    pub fn conjugate_by_sigma(&self) -> SeriesFamily {
        self.conj_coeffs()
    }

    /// Substitute eps = sub(eta) (sub(0) = 0) into every coefficient series.
    pub fn param_subst(&self, sub: &Series1) -> Result<SeriesFamily> {
        let mut out = SeriesFamily::zero(self.deg_w, self.deg_eps, self.conjugating);
        for j in 0..=self.deg_w {
            let a = self.w_coefficient(j);
            let composed = a.compose(&sub.truncated(self.deg_eps))?;
            out.set_w_coefficient(j, &composed);
        }
        Ok(out)
    }

    /// Divide the stored polynomial by the monic quadratic
    /// w^2 + a1(eps) w + a0(eps); returns (quotient, r0, r1) with
    /// remainder r0(eps) + r1(eps) w.
    pub fn divide_by_quadratic(
        &self,
        a1: &Series1,
        a0: &Series1,
    ) -> (SeriesFamily, Series1, Series1) {
        let mut cur: Vec<Series1> =
            (0..=self.deg_w).map(|j| self.w_coefficient(j).truncated(self.deg_eps)).collect();
        let mut q: Vec<Series1> = vec![Series1::zero(self.deg_eps); self.deg_w + 1];
        let a1t = a1.truncated(self.deg_eps);
        let a0t = a0.truncated(self.deg_eps);
        for j in (2..=self.deg_w).rev() {
            let qj = cur[j].clone();
            q[j - 2] = qj.clone();
            cur[j - 1] = cur[j - 1].sub(&qj.mul(&a1t).truncated(self.deg_eps));
            cur[j - 2] = cur[j - 2].sub(&qj.mul(&a0t).truncated(self.deg_eps));
        }
        let mut quot = SeriesFamily::zero(self.deg_w, self.deg_eps, self.conjugating);
        for (j, qj) in q.iter().enumerate().take(self.deg_w.saturating_sub(1)) {
            quot.set_w_coefficient(j, qj);
        }
        (quot, cur[0].clone(), cur[1].clone())
    }

    /// Divide by (w^2 - eps).
    pub fn divide_by_w2_minus_eps(&self) -> (SeriesFamily, Series1, Series1) {
        let a1 = Series1::zero(self.deg_eps);
        let mut a0 = Series1::zero(self.deg_eps);
        if self.deg_eps >= 1 {
            a0.c[1] = -ONE;
        }
        self.divide_by_quadratic(&a1, &a0)
    }

    /// Stored polynomial recentered in the space variable: P(eps, w + d).
    /// Exact for the polynomial object (binomial recombination).
    pub fn shift_argument(&self, d: Complex64) -> SeriesFamily {
        let mut out = SeriesFamily::zero(self.deg_w, self.deg_eps, self.conjugating);
        let mut binom = vec![vec![0.0f64; self.deg_w + 1]; self.deg_w + 1];
        for j in 0..=self.deg_w {
            binom[j][0] = 1.0;
            for l in 1..=j {
                binom[j][l] = binom[j - 1][l - 1] + if l <= j - 1 { binom[j - 1][l] } else { 0.0 };
            }
        }
        for k in 0..=self.deg_eps {
            for j in 0..=self.deg_w {
                let a = self.get(j, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let mut dpow = ONE;
                for l in (0..=j).rev() {
                    out.add_to(l, k, a * binom[j][l] * dpow);
                    dpow *= d;
                }
            }
        }
        out
    }

    /// Conjugation by the translation z -> z + d:  T_d . f . T_{-d}.
    pub fn conjugate_by_translation(&self, d: Complex64) -> SeriesFamily {
        // f(z - d) + d; for a conjugating family the stored argument shifts
        // by -conj(d)
        let arg_shift = if self.conjugating { -d.conj() } else { -d };
        let mut out = self.shift_argument(arg_shift);
        out.add_to(0, 0, d);
        out
    }
}

#[inline]
pub fn horner(weights: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = ZERO;
    for w in weights.iter().rev() {
        acc = acc * z + w;
    }
    acc
}

/// Monic quadratic factor produced by Weierstrass preparation.
#[derive(Debug, Clone)]
pub struct QuadraticFactor {
    pub alpha1: Series1,
    pub alpha0: Series1,
}

impl QuadraticFactor {
    pub fn eval(&self, eps: Complex64, w: Complex64) -> Complex64 {
        w * w + self.alpha1.eval(eps) * w + self.alpha0.eval(eps)
    }

    /// As a SeriesFamily w^2 + a1(eps) w + a0(eps).
    pub fn as_family(&self, deg_w: usize, deg_eps: usize) -> SeriesFamily {
        let mut f = SeriesFamily::zero(deg_w, deg_eps, false);
        f.set(2, 0, ONE);
        f.set_w_coefficient(1, &self.alpha1.truncated(deg_eps));
        f.set_w_coefficient(0, &self.alpha0.truncated(deg_eps));
        f
    }
}

/// Weierstrass preparation at vanishing order exactly 2: F = P * h with
/// P a monic quadratic in w with eps-series coefficients and h a unit.
pub fn weierstrass_prepare(f: &SeriesFamily) -> Result<(QuadraticFactor, SeriesFamily)> {
    let de = f.deg_eps();
    let dw = f.deg_w();
    let scale = f.max_norm().max(1.0);
    let tol = 1e-13 * scale;
    if f.get(0, 0).norm() > tol || f.get(1, 0).norm() > tol {
        let found = if f.get(0, 0).norm() > tol { 0 } else { 1 };
        return Err(Error::Degeneracy { found, expected: 2 });
    }
    if f.get(2, 0).norm() <= tol {
        return Err(Error::Degeneracy { found: 3, expected: 2 });
    }

    // F_k(w) = sum over eps^k; solve order by order in eps.
    let fk = |k: usize| -> Vec<Complex64> { (0..=dw).map(|j| f.get(j, k)).collect() };
    let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(de + 1);
    let mut alpha0 = vec![ZERO; de + 1];
    let mut alpha1 = vec![ZERO; de + 1];

    // eps^0: F_0 = w^2 h_0
    let f0 = fk(0);
    let h0: Vec<Complex64> = (2..=dw).map(|j| f0[j]).collect();
    let h00 = h0[0];
    if h00.norm() == 0.0 {
        return Err(Error::UnitInconsistency);
    }
    h.push(h0);

    for k in 1..=de {
        let mut rk = fk(k);
        for m in 1..k {
            let hmk = &h[k - m];
            for (j, hj) in hmk.iter().enumerate() {
                // (alpha0_m + alpha1_m w) * h_{k-m}
                if j <= dw {
                    rk[j] -= alpha0[m] * hj;
                }
                if j + 1 <= dw {
                    rk[j + 1] -= alpha1[m] * hj;
                }
            }
        }
        // rk = alpha0_k h0 + alpha1_k w h0 + w^2 h_k  (h0 here unshifted in w)
        let h0 = &h[0];
        alpha0[k] = rk[0] / h00;
        alpha1[k] = (rk[1] - alpha0[k] * h0.get(1).copied().unwrap_or(ZERO)) / h00;
        let mut hk = vec![ZERO; dw.saturating_sub(1)];
        for (j, hkj) in hk.iter_mut().enumerate() {
            let mut v = rk[j + 2];
            if j + 2 < h0.len() + 2 {
                // subtract (alpha0_k + alpha1_k w) h0 at degree j+2
                if let Some(h0j) = h0.get(j + 2) {
                    v -= alpha0[k] * h0j;
                }
                if let Some(h0j) = h0.get(j + 1) {
                    v -= alpha1[k] * h0j;
                }
            }
            *hkj = v;
        }
        h.push(hk);
    }

    let mut unit = SeriesFamily::zero(dw, de, false);
    for (k, hk) in h.iter().enumerate() {
        for (j, v) in hk.iter().enumerate() {
            if j <= dw {
                unit.set(j, k, *v);
            }
        }
    }
    let quad = QuadraticFactor {
        alpha1: Series1::from_coeffs(alpha1),
        alpha0: Series1::from_coeffs(alpha0),
    };
    Ok((quad, unit))
}
