//! Germ families: unfoldings of antiholomorphic (or holomorphic) parabolic
//! fixed points, their second iterates, genericity and fixed-point data.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::chart::{ParamLift, Side, TimeChart};
use crate::error::{Error, Result};
use crate::series::SeriesFamily;
use crate::series1::Series1;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// How the family is evaluated.
///
/// `Series` holds a truncated polynomial family. The two model backends
/// evaluate through the closed-form time chart of the model field, which
/// keeps the normal form exact instead of truncated: `ModelHalf` is
/// sigma . v^{1/2} (antiholomorphic), `ModelOne` is v^1 (its second iterate).
#[derive(Debug, Clone)]
pub enum Backend {
    Series(SeriesFamily),
    ModelHalf { b: Series1 },
    ModelOne { b: Series1 },
}

#[derive(Debug, Clone)]
pub struct GermFamily {
    pub backend: Backend,
    pub radius: f64,
    pub param_radius: f64,
    pub label: String,
}

/// Fixed points (or the 2-periodic orbit) of the second iterate, with
/// multipliers.
#[derive(Debug, Clone)]
pub struct FixedPointData {
    pub eps: Complex64,
    pub points: [Complex64; 2],
    pub multipliers: [Complex64; 2],
    /// d f / d zbar at the two points, when the family is antiholomorphic.
    pub tau: Option<[Complex64; 2]>,
    /// true when the pair is a 2-periodic orbit of f rather than fixed points
    pub periodic_flag: bool,
    /// true when eps is at (or numerically indistinguishable from) the merge
    pub double_point: bool,
    pub newton_residual: f64,
}

impl GermFamily {
    pub fn from_series(series: SeriesFamily, radius: f64, param_radius: f64) -> GermFamily {
        GermFamily { backend: Backend::Series(series), radius, param_radius, label: String::new() }
    }

    pub fn with_label(mut self, label: &str) -> GermFamily {
        self.label = label.to_string();
        self
    }

    /// The model family sigma . v^{1/2} for a given formal invariant series.
    pub fn model_antiholomorphic(b: Series1, radius: f64, param_radius: f64) -> GermFamily {
        GermFamily {
            backend: Backend::ModelHalf { b },
            radius,
            param_radius,
            label: "model".into(),
        }
    }

    /// The holomorphic model v^1.
    pub fn model_time_one(b: Series1, radius: f64, param_radius: f64) -> GermFamily {
        GermFamily {
            backend: Backend::ModelOne { b },
            radius,
            param_radius,
            label: "model-sq".into(),
        }
    }

    pub fn conjugating(&self) -> bool {
        match &self.backend {
            Backend::Series(s) => s.conjugating(),
            Backend::ModelHalf { .. } => true,
            Backend::ModelOne { .. } => false,
        }
    }

    pub fn b_series(&self) -> Option<&Series1> {
        match &self.backend {
            Backend::ModelHalf { b } | Backend::ModelOne { b } => Some(b),
            Backend::Series(_) => None,
        }
    }

    fn model_chart(b: &Series1, eps: Complex64, radius: f64) -> TimeChart {
        let lift = if eps.im == 0.0 {
            ParamLift::from_real(eps.re)
        } else {
            ParamLift::new(eps.norm(), eps.arg())
        };
        TimeChart::new(lift, b.eval(eps), radius, Side::Plus)
    }

    /// Evaluate the family as a map at (eps, z).
    pub fn evaluate(&self, eps: Complex64, z: Complex64) -> Result<Complex64> {
        match &self.backend {
            Backend::Series(s) => Ok(s.evaluate(eps, z)),
            Backend::ModelHalf { b } => {
                let ch = Self::model_chart(b, eps.conj(), self.radius);
                ch.flow(z.conj(), Complex64::new(0.5, 0.0), 1e-13)
            }
            Backend::ModelOne { b } => {
                let ch = Self::model_chart(b, eps, self.radius);
                ch.flow(z, ONE, 1e-13)
            }
        }
    }

    /// d f / d zbar for antiholomorphic families, d f / d z otherwise.
    pub fn derivative(&self, eps: Complex64, z: Complex64) -> Result<Complex64> {
        match &self.backend {
            Backend::Series(s) => {
                let d = s.derivative_w();
                let e = if s.conjugating() { eps.conj() } else { eps };
                let arg = if s.conjugating() { z.conj() } else { z };
                let mut acc = ZERO;
                for j in (0..=d.deg_w()).rev() {
                    let mut cj = ZERO;
                    for k in (0..=d.deg_eps()).rev() {
                        cj = cj * e + d.get(j, k);
                    }
                    acc = acc * arg + cj;
                }
                Ok(acc)
            }
            Backend::ModelHalf { b } => {
                let ch = Self::model_chart(b, eps.conj(), self.radius);
                ch.flow_derivative(z.conj(), Complex64::new(0.5, 0.0), 1e-13)
            }
            Backend::ModelOne { b } => {
                let ch = Self::model_chart(b, eps, self.radius);
                ch.flow_derivative(z, ONE, 1e-13)
            }
        }
    }

    /// The second-iterate map g_eps = f_{conj eps} . f_eps evaluated
    /// pointwise (the family itself when it is already holomorphic).
    pub fn second_map(&self, eps: Complex64, z: Complex64) -> Result<Complex64> {
        if !self.conjugating() {
            return self.evaluate(eps, z);
        }
        match &self.backend {
            Backend::ModelHalf { b } => {
                let ch = Self::model_chart(b, eps, self.radius);
                ch.flow(z, ONE, 1e-13)
            }
            _ => {
                let u = self.evaluate(eps, z)?;
                self.evaluate(eps.conj(), u)
            }
        }
    }

    /// Holomorphic derivative of the second-iterate map.
    pub fn second_map_prime(&self, eps: Complex64, z: Complex64) -> Result<Complex64> {
        if !self.conjugating() {
            return self.derivative(eps, z);
        }
        match &self.backend {
            Backend::ModelHalf { b } => {
                let ch = Self::model_chart(b, eps, self.radius);
                ch.flow_derivative(z, ONE, 1e-13)
            }
            _ => {
                let u = self.evaluate(eps, z)?;
                let outer = self.derivative(eps.conj(), u)?;
                let inner = self.derivative(eps, z)?;
                Ok(outer * inner.conj())
            }
        }
    }

    /// Formal second iterate as a family; flips the conjugating flag.
    pub fn second_iterate(&self) -> Result<GermFamily> {
        if !self.conjugating() {
            return Err(Error::Misuse(
                "second_iterate applies to antiholomorphic (conjugating) families".into(),
            ));
        }
        let backend = match &self.backend {
            Backend::ModelHalf { b } => Backend::ModelOne { b: b.clone() },
            Backend::Series(s) => Backend::Series(SeriesFamily::compose(s, s)?),
            Backend::ModelOne { .. } => unreachable!(),
        };
        Ok(GermFamily {
            backend,
            radius: self.radius,
            param_radius: self.param_radius,
            label: format!("{}^2", self.label),
        })
    }

    /// Truncated series form of the family (Picard expansion of the model
    /// flow for the model backends).
    pub fn to_series(&self, deg_w: usize, deg_eps: usize) -> Result<SeriesFamily> {
        match &self.backend {
            Backend::Series(s) => s.resized(deg_w, deg_eps),
            Backend::ModelHalf { b } => {
                let v = model_flow_series(b, 0.5, deg_w, deg_eps)?;
                let mut f = v.conj_coeffs();
                f.set_conjugating(true);
                Ok(f)
            }
            Backend::ModelOne { b } => model_flow_series(b, 1.0, deg_w, deg_eps),
        }
    }

    /// d Re(a0) / d eps at 0: the transversality margin of the unfolding.
    pub fn genericity_margin(&self) -> Result<f64> {
        match &self.backend {
            Backend::Series(s) => Ok(s.get(0, 1).re),
            _ => Ok(self.to_series(4, 2)?.get(0, 1).re),
        }
    }

    pub fn is_generic(&self, threshold: f64) -> Result<bool> {
        Ok(self.genericity_margin()?.abs() > threshold)
    }

    /// Locate the fixed points of the second iterate (or the 2-periodic orbit
    /// of f) near +-sqrt(eps) by Newton, with multipliers.
    pub fn fixed_point_data(&self, lift: ParamLift, tol: f64) -> Result<FixedPointData> {
        let eps = lift.value();
        if lift.rho < 1e-14 {
            return Ok(FixedPointData {
                eps,
                points: [ZERO, ZERO],
                multipliers: [ONE, ONE],
                tau: self.conjugating().then_some([ONE, ONE]),
                periodic_flag: false,
                double_point: true,
                newton_residual: 0.0,
            });
        }
        let s = lift.sqrt();
        let mut points = [ZERO; 2];
        let mut residual = 0.0f64;
        for (idx, seed) in [s, -s].into_iter().enumerate() {
            let mut z = seed;
            let mut last = f64::INFINITY;
            for it in 0..120 {
                let val = self.second_map(eps, z)? - z;
                last = val.norm();
                if last < tol {
                    break;
                }
                let d = self.second_map_prime(eps, z)? - ONE;
                if d.norm() < 1e-300 {
                    return Err(Error::NewtonDiverged { residual: last, iterations: it });
                }
                let mut step = val / d;
                let cap = 0.6 * s.norm();
                if step.norm() > cap {
                    step *= cap / step.norm();
                }
                z -= step;
            }
            if last > tol * 1e3 {
                return Err(Error::NewtonDiverged { residual: last, iterations: 120 });
            }
            points[idx] = z;
            residual = residual.max(last);
        }
        // deflate onto the opposite root if both Newton runs collapsed together
        if (points[0] - points[1]).norm() < 0.1 * s.norm() {
            let mut z = -points[0];
            for _ in 0..200 {
                let val = self.second_map(eps, z)? - z;
                if val.norm() < tol {
                    break;
                }
                let d = self.second_map_prime(eps, z)? - ONE;
                let denom = z - points[0];
                let defl = val / denom;
                let ddefl = d / denom - val / (denom * denom);
                z -= defl / ddefl;
            }
            points[1] = z;
        }
        let multipliers =
            [self.second_map_prime(eps, points[0])?, self.second_map_prime(eps, points[1])?];
        let (tau, periodic_flag) = if self.conjugating() {
            let t0 = self.derivative(eps, points[0])?;
            let t1 = self.derivative(eps, points[1])?;
            let f0 = self.evaluate(eps, points[0])?;
            let swaps = (f0 - points[1]).norm() < (f0 - points[0]).norm();
            (Some([t0, t1]), swaps)
        } else {
            (None, false)
        };
        Ok(FixedPointData {
            eps,
            points,
            multipliers,
            tau,
            periodic_flag,
            double_point: false,
            newton_residual: residual,
        })
    }

    /// Structural checks for input families: fixes the origin, parabolic
    /// linear part at eps = 0.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut notes = Vec::new();
        let s = self.to_series(self.max_deg_w(), self.max_deg_eps())?;
        if s.get(0, 0).norm() > 1e-12 {
            return Err(Error::Invalid(format!(
                "family does not fix the origin at eps = 0: |c00| = {:e}",
                s.get(0, 0).norm()
            )));
        }
        let lin = s.get(1, 0).norm();
        if (lin - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!(
                "linear part at the origin is not parabolic: |c10| = {lin}"
            )));
        }
        if s.get(2, 0).norm() < 1e-9 {
            notes.push(
                "warning: quadratic coefficient at eps=0 is tiny; codimension may exceed 1"
                    .to_string(),
            );
        }
        let margin = self.genericity_margin()?;
        notes.push(format!("genericity margin d Re(a0)/d eps (0) = {margin:.6e}"));
        Ok(notes)
    }

    fn max_deg_w(&self) -> usize {
        match &self.backend {
            Backend::Series(s) => s.deg_w(),
            _ => 12,
        }
    }

    fn max_deg_eps(&self) -> usize {
        match &self.backend {
            Backend::Series(s) => s.deg_eps(),
            _ => 6,
        }
    }

    /// Extract (B0, B1, Q) of a family in prepared shape
    /// f = zbar + (zbar^2 - eps)(B0 + B1 zbar + (zbar^2 - eps) Q)
    /// together with the worst division remainder.
    pub fn prepared_parts(&self) -> Result<(Series1, Series1, SeriesFamily, f64)> {
        let s = self.to_series(self.max_deg_w(), self.max_deg_eps())?;
        if !s.conjugating() {
            return Err(Error::Misuse("prepared_parts expects an antiholomorphic family".into()));
        }
        let id = SeriesFamily::identity(s.deg_w(), s.deg_eps());
        let diff = {
            let mut d = s.clone();
            d.set_conjugating(false);
            d.sub(&id)
        };
        // f - id = (w^2 - eps) * q1 exactly for prepared families, and then
        // q1 = (w^2 - eps) * Q + (B0 + B1 w): the B's are the second remainder
        let (q1, r0, r1) = diff.divide_by_w2_minus_eps();
        let worst = r0.c.iter().chain(r1.c.iter()).fold(0.0f64, |m, v| m.max(v.norm()));
        let (q2, b0, b1) = q1.divide_by_w2_minus_eps();
        Ok((b0, b1, q2, worst))
    }

    /// Assemble a prepared family from its parts (normal-form and test
    /// constructor).
    pub fn from_prepared_parts(
        b0: &Series1,
        b1: &Series1,
        q: &SeriesFamily,
        deg_w: usize,
        deg_eps: usize,
        radius: f64,
        param_radius: f64,
    ) -> GermFamily {
        let mut w2e = SeriesFamily::zero(deg_w, deg_eps, false);
        w2e.set(2, 0, ONE);
        w2e.set(0, 1, -ONE);
        let mut factor = SeriesFamily::zero(deg_w, deg_eps, false);
        factor.set_w_coefficient(0, &b0.truncated(deg_eps));
        factor.set_w_coefficient(1, &b1.truncated(deg_eps));
        let factor = factor.add(&w2e.mul(q));
        let mut f = SeriesFamily::identity(deg_w, deg_eps).add(&w2e.mul(&factor));
        f.set_conjugating(true);
        GermFamily::from_series(f, radius, param_radius)
    }

    /// A reproducible pseudo-random generic unfolding for tests and demos.
    pub fn random_generic(
        seed: u64,
        b0: f64,
        deg_w: usize,
        deg_eps: usize,
        radius: f64,
        param_radius: f64,
    ) -> GermFamily {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut small =
            |scale: f64| Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
        let mut f = SeriesFamily::zero(deg_w, deg_eps, true);
        f.set(1, 0, ONE);
        f.set(2, 0, Complex64::new(0.5, 0.0));
        f.set(3, 0, Complex64::new(0.25 - b0 / 2.0, 0.0));
        for j in 4..=deg_w.min(6) {
            f.set(j, 0, small(0.3));
        }
        // unfolding terms a_j(eps); a0 transversal
        f.set(0, 1, Complex64::new(-1.0, 0.0) + small(0.2));
        f.set(0, 2, small(0.5));
        for j in 1..=3usize {
            f.set(j, 1, small(0.4));
            if deg_eps >= 2 {
                f.set(j, 2, small(0.4));
            }
        }
        GermFamily::from_series(f, radius, param_radius).with_label("random")
    }
}

/// Picard expansion of the time-t map of dz/dt = (z^2 - eps)/(1 + b(eps) z).
pub fn model_flow_series(
    b: &Series1,
    t: f64,
    deg_w: usize,
    deg_eps: usize,
) -> Result<SeriesFamily> {
    let s_orders = deg_w + 2 * deg_eps + 3;
    // field V(w) = (w^2 - eps) * recip(1 + b(eps) w)
    let mut w2e = SeriesFamily::zero(deg_w, deg_eps, false);
    w2e.set(2, 0, ONE);
    w2e.set(0, 1, -ONE);
    let mut denom = SeriesFamily::zero(deg_w, deg_eps, false);
    denom.set(0, 0, ONE);
    denom.set_w_coefficient(1, &b.truncated(deg_eps));
    let vfield = w2e.mul(&denom.recip()?);

    // phi(s) = sum c_m s^m with c_0 = w, (m+1) c_{m+1} = [V(phi)]_m
    let mut c: Vec<SeriesFamily> = vec![SeriesFamily::identity(deg_w, deg_eps)];
    for m in 0..s_orders {
        let vp = compose_family_with_s_poly(&vfield, &c, m);
        let next = vp[m].scale(Complex64::new(1.0 / (m as f64 + 1.0), 0.0));
        c.push(next);
    }
    // evaluate at s = t
    let mut acc = SeriesFamily::zero(deg_w, deg_eps, false);
    for cm in c.iter().rev() {
        acc = acc.scale(Complex64::new(t, 0.0)).add(cm);
    }
    Ok(acc)
}

/// Compose an (eps,w) polynomial with an s-polynomial of families, truncated
/// at s^m_max; returns the s-coefficients.
fn compose_family_with_s_poly(
    outer: &SeriesFamily,
    inner: &[SeriesFamily],
    m_max: usize,
) -> Vec<SeriesFamily> {
    let dw = outer.deg_w();
    let de = outer.deg_eps();
    let zero = SeriesFamily::zero(dw, de, false);
    let mut acc: Vec<SeriesFamily> = vec![zero.clone(); m_max + 1];
    for k in 0..=de {
        acc[0].set(0, k, outer.get(dw, k));
    }
    for j in (0..dw).rev() {
        // acc = acc * inner + A_j
        let mut next: Vec<SeriesFamily> = vec![zero.clone(); m_max + 1];
        for (ma, a) in acc.iter().enumerate() {
            for (mb, bfam) in inner.iter().enumerate() {
                if ma + mb > m_max {
                    break;
                }
                let prod = a.mul(bfam);
                next[ma + mb] = next[ma + mb].add(&prod);
            }
        }
        for k in 0..=de {
            next[0].add_to(0, k, outer.get(j, k));
        }
        acc = next;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn f0_quadratic() -> GermFamily {
        // f0(z) = zbar + 1/2 zbar^2
        let mut s = SeriesFamily::zero(8, 2, true);
        s.set(1, 0, c(1.0, 0.0));
        s.set(2, 0, c(0.5, 0.0));
        GermFamily::from_series(s, 0.5, 0.05)
    }

    #[test]
    fn evaluate_direct_arithmetic() {
        let f = f0_quadratic();
        let got = f.evaluate(ZERO, c(0.1, 0.0)).unwrap();
        assert!((got - c(0.105, 0.0)).norm() < 1e-15);
        let got = f.evaluate(ZERO, c(0.0, 0.1)).unwrap();
        assert!((got - c(-0.005, -0.1)).norm() < 1e-15);
    }

    #[test]
    fn model_fixes_origin_at_zero() {
        let b = Series1::constant(c(0.3, 0.0), 4);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        let got = m.evaluate(ZERO, ZERO).unwrap();
        assert!(got.norm() < 1e-13);
    }

    #[test]
    fn second_iterate_series_oracle() {
        // (f0 . f0)(z) = z + z^2 + 1/2 z^3 + 1/8 z^4 for f0 = zbar + 1/2 zbar^2
        let f = f0_quadratic();
        let g = f.second_iterate().unwrap();
        assert!(!g.conjugating());
        let s = g.to_series(8, 2).unwrap();
        let expect = [0.0, 1.0, 1.0, 0.5, 0.125, 0.0];
        for (j, e) in expect.iter().enumerate() {
            assert!((s.get(j, 0) - c(*e, 0.0)).norm() < 1e-14, "j={j}: {}", s.get(j, 0));
        }
    }

    #[test]
    fn sigma_composition_is_identity() {
        let s = SeriesFamily::sigma(6, 1);
        let f = GermFamily::from_series(s, 0.5, 0.05);
        let g = f.second_iterate().unwrap();
        let id = SeriesFamily::identity(6, 1);
        assert!(g.to_series(6, 1).unwrap().max_diff(&id) < 1e-15);
    }

    #[test]
    fn model_second_iterate_is_time_one_map() {
        // (sigma . v^{1/2})^2 = v^1, checked pointwise through the chart flow
        let b = Series1::constant(c(0.3, 0.0), 4);
        let m = GermFamily::model_antiholomorphic(b.clone(), 0.5, 0.05);
        let g = m.second_iterate().unwrap();
        for &(eps, z) in &[(0.01, c(0.2, 0.1)), (-0.02, c(-0.1, 0.15)), (0.0, c(0.1, -0.2))] {
            let e = c(eps, 0.0);
            let via_double = {
                let u = m.evaluate(e, z).unwrap();
                m.evaluate(e.conj(), u).unwrap()
            };
            let via_model = g.evaluate(e, z).unwrap();
            assert!((via_double - via_model).norm() < 1e-11, "eps={eps} z={z}");
        }
    }

    #[test]
    fn model_series_matches_flow() {
        let b = Series1::constant(c(0.2, 0.0), 4);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        let s = m.to_series(14, 5).unwrap();
        assert!(s.conjugating());
        for &(eps, z) in &[(0.01, c(0.08, 0.05)), (-0.015, c(-0.06, 0.04))] {
            let e = c(eps, 0.0);
            let exact = m.evaluate(e, z).unwrap();
            let approx = s.evaluate(e, z);
            assert!((exact - approx).norm() < 1e-10, "eps={eps} z={z}: {exact} vs {approx}");
        }
        // prenormal shape: zbar + 1/2 zbar^2 + (1/4 - b/2) zbar^3 at eps=0
        assert!((s.get(1, 0) - ONE).norm() < 1e-14);
        assert!((s.get(2, 0) - c(0.5, 0.0)).norm() < 1e-13);
        assert!((s.get(3, 0) - c(0.25 - 0.1, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn genericity_margins() {
        // f_eps(z) = zbar - eps + 1/2 zbar^2: margin -1
        let mut s = SeriesFamily::zero(6, 2, true);
        s.set(1, 0, ONE);
        s.set(2, 0, c(0.5, 0.0));
        s.set(0, 1, c(-1.0, 0.0));
        let f = GermFamily::from_series(s, 0.5, 0.05);
        assert!((f.genericity_margin().unwrap() + 1.0).abs() < 1e-15);

        // f_eps(z) = zbar - i eps + 1/2 zbar^2: margin 0 (non-generic)
        let mut s = SeriesFamily::zero(6, 2, true);
        s.set(1, 0, ONE);
        s.set(2, 0, c(0.5, 0.0));
        s.set(0, 1, c(0.0, -1.0));
        let f = GermFamily::from_series(s, 0.5, 0.05);
        assert!(f.genericity_margin().unwrap().abs() < 1e-15);
        assert!(!f.is_generic(1e-9).unwrap());

        // prepared family: margin = -B0(0) = -1/2
        let b0 = Series1::constant(c(0.5, 0.0), 2);
        let b1 = Series1::constant(c(0.25, 0.0), 2);
        let q = SeriesFamily::zero(8, 2, false);
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 8, 2, 0.5, 0.05);
        assert!((f.genericity_margin().unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn fixed_points_of_model_positive_eps() {
        // normal form b = 0, eps = 0.04: points +-0.2, multipliers e^{+-0.4}
        let b = Series1::zero(4);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        let data = m.fixed_point_data(ParamLift::from_real(0.04), 1e-13).unwrap();
        assert!((data.points[0] - c(0.2, 0.0)).norm() < 1e-11);
        assert!((data.points[1] + c(0.2, 0.0)).norm() < 1e-11);
        assert!((data.multipliers[0] - c((0.4f64).exp(), 0.0)).norm() < 1e-10);
        assert!((data.multipliers[1] - c((-0.4f64).exp(), 0.0)).norm() < 1e-10);
        assert!(!data.periodic_flag);
        // lambda = conj(tau^2) for real positive eps
        let tau = data.tau.unwrap();
        for i in 0..2 {
            let diff = (data.multipliers[i] - (tau[i] * tau[i]).conj()).norm();
            assert!(diff < 1e-9, "i={i}: {diff:e}");
        }
    }

    #[test]
    fn fixed_points_merge_at_zero() {
        let b = Series1::zero(4);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        let data = m.fixed_point_data(ParamLift::from_real(0.0), 1e-13).unwrap();
        assert!(data.double_point);
        assert!((data.multipliers[0] - ONE).norm() == 0.0);
    }

    #[test]
    fn periodic_orbit_for_negative_eps() {
        // normal form b = 0, eps = -0.04: 2-periodic orbit {0.2i, -0.2i},
        // tau_+ = conj(tau_-)
        let b = Series1::zero(4);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        let data = m.fixed_point_data(ParamLift::from_real(-0.04), 1e-13).unwrap();
        assert!((data.points[0] - c(0.0, 0.2)).norm() < 1e-11, "{}", data.points[0]);
        assert!((data.points[1] - c(0.0, -0.2)).norm() < 1e-11);
        assert!(data.periodic_flag);
        let tau = data.tau.unwrap();
        assert!((tau[0] - tau[1].conj()).norm() < 1e-10);
    }

    #[test]
    fn prepared_roundtrip_parts() {
        let b0 = Series1::from_coeffs(vec![c(0.5, 0.0), c(0.1, 0.0)]);
        let b1 = Series1::from_coeffs(vec![c(0.25, 0.0), c(-0.2, 0.0)]);
        let mut q = SeriesFamily::zero(10, 3, false);
        q.set(0, 0, c(0.3, 0.0));
        q.set(1, 0, c(-0.15, 0.0));
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 10, 3, 0.5, 0.05);
        let (g0, g1, gq, worst) = f.prepared_parts().unwrap();
        assert!(worst < 1e-14);
        assert!((g0.c[0] - c(0.5, 0.0)).norm() < 1e-14);
        assert!((g0.c[1] - c(0.1, 0.0)).norm() < 1e-14);
        assert!((g1.c[0] - c(0.25, 0.0)).norm() < 1e-14);
        assert!((gq.get(0, 0) - c(0.3, 0.0)).norm() < 1e-14);
        assert!((gq.get(1, 0) - c(-0.15, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn random_family_is_generic_and_parabolic() {
        let f = GermFamily::random_generic(42, 0.2, 10, 3, 0.5, 0.05);
        let notes = f.validate().unwrap();
        assert!(!notes.is_empty());
        assert!(f.is_generic(1e-9).unwrap());
    }

    #[test]
    fn prepared_family_fixed_points_at_sqrt_eps() {
        // prepared shape guarantees g(+-sqrt eps) = +-sqrt eps
        let b0 = Series1::constant(c(0.5, 0.0), 3);
        let b1 = Series1::constant(c(0.25, 0.0), 3);
        let q = SeriesFamily::zero(12, 3, false);
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 12, 3, 0.5, 0.05);
        for &eps in &[0.01f64, 0.04, -0.01, -0.04] {
            let data = f.fixed_point_data(ParamLift::from_real(eps), 1e-12).unwrap();
            let s = ParamLift::from_real(eps).sqrt();
            assert!((data.points[0] - s).norm() < 1e-10, "eps={eps}");
            assert!((data.points[1] + s).norm() < 1e-10, "eps={eps}");
            let g_at = f.second_map(c(eps, 0.0), data.points[0]).unwrap();
            assert!((g_at - data.points[0]).norm() < 1e-10);
        }
    }
}
