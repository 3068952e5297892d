//! Canonical parameter, formal invariant, and the prepared form.
//!
//! The canonical parameter and the invariant b are read off the multipliers
//! of the second iterate at its two fixed points through
//!
//!   eps = (1/log lambda_+ - 1/log lambda_-)^{-2},
//!   b   =  1/log lambda_+ + 1/log lambda_-,
//!
//! with principal logarithms. They are computed two ways: as formal series in
//! the parameter (exact within the truncation) and pointwise on a grid fitted
//! afterwards; the two routes cross-check each other.
//!
//! `prepare` normalizes a generic unfolding in three steps: flatten the
//! fixed-point locus onto the real axis, translate so the fixed points sit at
//! Z^2 = eta, then apply the quadratic change and linear rescale that make
//! the multiplier data match the model family in its canonical parameter.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::{ParamLift, Side, TimeChart};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::germ::{Backend, GermFamily};
use crate::series::{weierstrass_prepare, SeriesFamily};
use crate::series1::Series1;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Canonical parameter and formal invariant of a family.
#[derive(Debug, Clone)]
pub struct PreparedInvariants {
    /// Canonical reparametrization eps(eta) as a series in the normalized
    /// parameter eta (fixed points at Z^2 = eta).
    pub eps_of_eta: Series1,
    /// Formal invariant as a series in the canonical parameter.
    pub b_of_eps: Series1,
    pub b0: Series1,
    pub b1: Series1,
    pub q: SeriesFamily,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreparationReport {
    pub residuals: BTreeMap<String, f64>,
    pub b_coefficients: Vec<f64>,
    pub eps_of_eta_coefficients: Vec<f64>,
    pub change_coefficients: Vec<(usize, usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub change: SeriesFamily,
    pub prepared: GermFamily,
    pub invariants: PreparedInvariants,
    pub report: PreparationReport,
}

/// Pointwise canonical data at one parameter value.
pub fn canonical_pair(fam: &GermFamily, lift: ParamLift, tol: f64) -> Result<(Complex64, Complex64)> {
    let data = fam.fixed_point_data(lift, tol)?;
    if data.double_point {
        return Ok((ZERO, ZERO));
    }
    canonical_from_multipliers(data.multipliers[0], data.multipliers[1])
}

pub fn canonical_from_multipliers(
    lambda_plus: Complex64,
    lambda_minus: Complex64,
) -> Result<(Complex64, Complex64)> {
    for l in [lambda_plus, lambda_minus] {
        if l.im == 0.0 && l.re <= 0.0 {
            return Err(Error::BranchCut);
        }
    }
    let u = lambda_plus.ln();
    let v = lambda_minus.ln();
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return Err(Error::BranchCut);
    }
    let d = 1.0 / u - 1.0 / v;
    if d.norm() == 0.0 {
        return Err(Error::BranchCut);
    }
    Ok((1.0 / (d * d), 1.0 / u + 1.0 / v))
}

/// Evaluate a family's stored polynomial at w = sign * nu as a series in nu,
/// with eps = nu^2.
fn eval_at_nu(s: &SeriesFamily, sign: f64, order: usize) -> Series1 {
    let mut out = Series1::zero(order);
    for k in 0..=s.deg_eps() {
        for j in 0..=s.deg_w() {
            let p = 2 * k + j;
            if p > order {
                continue;
            }
            let sgn = if sign < 0.0 && j % 2 == 1 { -ONE } else { ONE };
            out.c[p] += s.get(j, k) * sgn;
        }
    }
    out
}

/// Formal canonical pair as series in eta, from the multiplier series of the
/// second iterate at +-sqrt(eta).
pub fn formal_canonical(fam_series: &SeriesFamily) -> Result<(Series1, Series1)> {
    let de = fam_series.deg_eps();
    let order = 2 * de + 4;
    let g = if fam_series.conjugating() {
        SeriesFamily::compose(fam_series, fam_series)?
    } else {
        fam_series.clone()
    };
    let gp = g.derivative_w();
    let lam_plus = eval_at_nu(&gp, 1.0, order);
    let lam_minus = eval_at_nu(&gp, -1.0, order);
    // u = log lambda = nu * L(nu), M = 1/L
    let (lp, c0p) = lam_plus.log()?.shift_down();
    let (lm, c0m) = lam_minus.log()?.shift_down();
    if c0p.norm() > 1e-10 || c0m.norm() > 1e-10 {
        return Err(Error::Invalid("multiplier series do not vanish at eta = 0".into()));
    }
    let mp = lp.recip()?;
    let mm = lm.recip()?;
    // with u+ = nu lp and u- = nu lm (lm(0) < 0):
    // 1/u+ - 1/u- = (Mp - Mm)/nu (even), 1/u+ + 1/u- = (Mp + Mm)/nu (odd/nu)
    let e_d = mp.sub(&mm);
    let o_b = mp.add(&mm);
    let eps_eta = e_d.mul(&e_d).recip()?.even_in_square().shift_up().truncated(de + 1);
    // (M+ - M-)/nu is even; its nu^{2k} coefficients are the eta^k ones of b
    let (b_shift, b_odd) = o_b.shift_down();
    if b_odd.norm() > 1e-9 {
        return Err(Error::Invalid("formal invariant series has an odd leading term".into()));
    }
    let b_eta = b_shift.even_in_square().truncated(de + 1);
    Ok((eps_eta, b_eta))
}

#[derive(Debug, Clone)]
pub struct CanonicalFit {
    pub eps_of_eta: Series1,
    pub b_of_eta: Series1,
    pub max_imag: f64,
    pub grid: Vec<(f64, Complex64, Complex64)>,
}

/// Grid route: pointwise multipliers on Chebyshev nodes, then polynomial fit.
pub fn canonical_invariants(fam: &GermFamily, cfg: &RunConfig) -> Result<CanonicalFit> {
    if !fam.is_generic(1e-9)? {
        return Err(Error::NotGeneric { margin: fam.genericity_margin()? });
    }
    let radius = 0.9 * fam.param_radius.min(cfg.param_radius);
    let n = cfg.fit_nodes.max(8);
    let mut grid = Vec::with_capacity(n);
    let mut max_imag = 0.0f64;
    let mut eps_vals = Vec::with_capacity(n);
    let mut b_vals = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let x = (std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * n as f64)).cos();
        let eta = radius * x;
        let (eps, b) = canonical_pair(fam, ParamLift::from_real(eta), cfg.newton_tol)?;
        max_imag = max_imag.max(eps.im.abs()).max(b.im.abs());
        grid.push((eta, eps, b));
        nodes.push(x);
        eps_vals.push(Complex64::new(eps.re, 0.0));
        b_vals.push(Complex64::new(b.re, 0.0));
    }
    let degree = (n - 1).min(cfg.deg_eps + 6);
    let mut eps_fit = chebyshev_fit(&nodes, &eps_vals, degree, radius);
    let b_fit = chebyshev_fit(&nodes, &b_vals, degree, radius);
    // eps(0) = 0 by construction; the fitted constant is noise
    eps_fit.c[0] = ZERO;
    Ok(CanonicalFit {
        eps_of_eta: eps_fit.truncated(cfg.deg_eps + 1),
        b_of_eta: b_fit.truncated(cfg.deg_eps + 1),
        max_imag,
        grid,
    })
}

/// Chebyshev interpolation on Gauss nodes, converted to monomials in eta.
fn chebyshev_fit(nodes_x: &[f64], values: &[Complex64], degree: usize, radius: f64) -> Series1 {
    let n = nodes_x.len();
    let mut cheb = vec![ZERO; degree + 1];
    for (k, ck) in cheb.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (j, &x) in nodes_x.iter().enumerate() {
            let theta = x.acos();
            acc += values[j] * (k as f64 * theta).cos();
        }
        *ck = acc * (if k == 0 { 1.0 } else { 2.0 } / n as f64);
    }
    // convert sum c_k T_k(x) to monomials in x, then rescale x = eta / radius
    let mut mono = vec![ZERO; degree + 1];
    let mut t_prev = vec![0.0f64; degree + 1];
    let mut t_cur = vec![0.0f64; degree + 1];
    t_prev[0] = 1.0; // T_0
    if degree >= 1 {
        t_cur[1] = 1.0; // T_1
    }
    for (i, m) in t_prev.iter().enumerate() {
        mono[i] += cheb[0] * *m;
    }
    if degree >= 1 {
        for (i, m) in t_cur.iter().enumerate() {
            mono[i] += cheb[1] * *m;
        }
    }
    for k in 2..=degree {
        let mut t_next = vec![0.0f64; degree + 1];
        for i in 0..degree {
            t_next[i + 1] += 2.0 * t_cur[i];
        }
        for i in 0..=degree {
            t_next[i] -= t_prev[i];
        }
        for (i, m) in t_next.iter().enumerate() {
            mono[i] += cheb[k] * *m;
        }
        t_prev = t_cur;
        t_cur = t_next;
    }
    let mut c = vec![ZERO; degree + 1];
    let mut scale = 1.0;
    for k in 0..=degree {
        c[k] = mono[k] * scale;
        scale /= radius;
    }
    Series1 { c }
}

/// Imaginary part of f(x + i y) - (x + i y) as a polynomial in y with
/// (eps, x)-series coefficients. All output coefficients are real.
fn imag_y_poly(s: &SeriesFamily) -> Vec<SeriesFamily> {
    let dw = s.deg_w();
    let de = s.deg_eps();
    let mut u: Vec<SeriesFamily> = (0..=dw).map(|_| SeriesFamily::zero(dw, de, false)).collect();
    // binomial table
    let mut binom = vec![vec![0.0f64; dw + 1]; dw + 1];
    for j in 0..=dw {
        binom[j][0] = 1.0;
        for l in 1..=j {
            binom[j][l] = binom[j - 1][l - 1] + if l <= j - 1 { binom[j - 1][l] } else { 0.0 };
        }
    }
    let mi = -I;
    for k in 0..=de {
        for j in 0..=dw {
            let a = s.get(j, k);
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let mut ipow = ONE;
            for l in 0..=j {
                u[l].add_to(j - l, k, a * binom[j][l] * ipow);
                ipow *= mi;
            }
        }
    }
    // subtract z = x + i y
    u[0].add_to(1, 0, -ONE);
    u[1].add_to(0, 0, -I);
    // imaginary parts
    u.into_iter()
        .map(|ul| {
            let mut v = SeriesFamily::zero(dw, de, false);
            for k in 0..=de {
                for j in 0..=dw {
                    v.set(j, k, Complex64::new(ul.get(j, k).im, 0.0));
                }
            }
            v
        })
        .collect()
}

fn horner_y(poly: &[SeriesFamily], m: &SeriesFamily) -> SeriesFamily {
    let mut acc = poly[poly.len() - 1].clone();
    for l in (0..poly.len() - 1).rev() {
        acc = acc.mul(m).add(&poly[l]);
    }
    acc
}

/// Solve Im f(x + i m(x, eps)) = x-axis condition for the real-analytic
/// curve y = m(x, eps) through the fixed points.
fn solve_curve(v: &[SeriesFamily]) -> Result<SeriesFamily> {
    let dw = v[0].deg_w();
    let de = v[0].deg_eps();
    let dv: Vec<SeriesFamily> = (1..v.len())
        .map(|l| v[l].scale(Complex64::new(l as f64, 0.0)))
        .collect();
    let mut m = SeriesFamily::zero(dw, de, false);
    let steps = (dw + de).next_power_of_two().trailing_zeros() as usize + 2;
    for _ in 0..steps {
        let f = horner_y(v, &m);
        let d = horner_y(&dv, &m);
        m = m.sub(&f.mul(&d.recip()?));
    }
    Ok(m)
}

/// Full preparation pipeline.
pub fn prepare(fam: &GermFamily, cfg: &RunConfig) -> Result<Prepared> {
    let dw = cfg.deg_w;
    let de = cfg.deg_eps;
    let mut residuals = BTreeMap::new();

    if !fam.conjugating() {
        return Err(Error::Misuse("prepare expects an antiholomorphic unfolding".into()));
    }
    let margin = fam.genericity_margin()?;
    if margin.abs() <= 1e-9 {
        return Err(Error::NotGeneric { margin });
    }
    let s = fam.to_series(dw, de)?;
    if s.get(0, 0).norm() > 1e-10 {
        return Err(Error::Invalid(
            "prepare expects the germ at eps = 0 to fix the origin (prenormal form)".into(),
        ));
    }

    // 1. flatten the fixed-point locus onto the real axis
    let v = imag_y_poly(&s);
    let mut m = solve_curve(&v)?;
    residuals.insert("curve_imag_coeffs".into(), m.max_im());
    // m is real-analytic; strip imaginary rounding noise and the origin term
    let mut m_clean = SeriesFamily::zero(dw, de, false);
    for k in 0..=de {
        for j in 0..=dw {
            m_clean.set(j, k, Complex64::new(m.get(j, k).re, 0.0));
        }
    }
    residuals.insert("curve_origin".into(), m_clean.get(0, 0).norm());
    m_clean.set(0, 0, ZERO);
    m = m_clean;

    let ch1 = SeriesFamily::identity(dw, de).add(&m.scale(I));
    let f1 = SeriesFamily::compose(&ch1.invert()?, &SeriesFamily::compose(&s, &ch1)?)?;

    // 2. real part on the axis, quadratic factor of the fixed-point equation
    let mut r_axis = SeriesFamily::zero(dw, de, false);
    let mut im_axis = SeriesFamily::zero(dw, de, false);
    for k in 0..=de {
        for j in 0..=dw {
            let c = f1.get(j, k) - if j == 1 && k == 0 { ONE } else { ZERO };
            im_axis.set(j, k, Complex64::new(c.im, 0.0));
            r_axis.set(j, k, Complex64::new(c.re, 0.0));
        }
    }
    let imag_on_axis = {
        let mut worst = 0.0f64;
        let rho = 0.9 * fam.param_radius.min(cfg.param_radius);
        for &x in &[0.3 * fam.radius, -0.3 * fam.radius, 0.15 * fam.radius] {
            for &e in &[rho, -rho, 0.5 * rho] {
                worst = worst
                    .max(im_axis.evaluate(Complex64::new(e, 0.0), Complex64::new(x, 0.0)).norm());
            }
        }
        worst
    };
    residuals.insert("axis_imag_residual".into(), imag_on_axis);
    let (quad, _unit) = weierstrass_prepare(&r_axis)?;

    // 3. recenter: Z = z1 + alpha1/2, new parameter eta = alpha1^2/4 - alpha0
    let half_a1 = quad.alpha1.scale(Complex64::new(0.5, 0.0));
    let mut ch2 = SeriesFamily::identity(dw, de);
    ch2.set_w_coefficient(0, &half_a1.truncated(de));
    let f2 = SeriesFamily::compose(&ch2, &SeriesFamily::compose(&f1, &ch2.invert()?)?)?;

    let eta_of_t = half_a1.mul(&half_a1).sub(&quad.alpha0).truncated(de);
    if eta_of_t.c.len() < 2 || eta_of_t.c[1].norm() < 1e-9 {
        return Err(Error::NotGeneric { margin: 0.0 });
    }
    let t_of_eta = eta_of_t.revert()?;
    let f_tilde = f2.param_subst(&t_of_eta)?;

    // fixed points now at Z^2 = eta: check the division remainder
    let (c_parts, rem0, rem1) = {
        let mut d = f_tilde.clone();
        d.set_conjugating(false);
        d.sub(&SeriesFamily::identity(dw, de)).divide_by_w2_minus_eps()
    };
    let rho = 0.9 * fam.param_radius.min(cfg.param_radius);
    let eps_samples = [rho, -rho, 0.5 * rho, -0.5 * rho, 0.25 * rho, -0.25 * rho];
    let pts_rem = series1_max_on(&rem0, &eps_samples) + series1_max_on(&rem1, &eps_samples);
    residuals.insert("pts_fixes_remainder".into(), pts_rem);

    // 4. quadratic change from the square roots of the multipliers of f
    let (_, c0_ser, c1_ser) = c_parts.divide_by_w2_minus_eps();
    let order_nu = 2 * de + 4;
    let mut tau_plus = Series1::zero(order_nu);
    tau_plus.c[0] = ONE;
    for k in 0..=de {
        if 2 * k + 1 <= order_nu {
            tau_plus.c[2 * k + 1] += 2.0 * c0_ser.c[k];
        }
        if 2 * k + 2 <= order_nu {
            tau_plus.c[2 * k + 2] += 2.0 * c1_ser.c[k];
        }
    }
    // unit-modulus phase factor d = conj(sqrt tau)/|sqrt tau|: the induced
    // change turns tau into |tau| (conjugate-symmetric in nu) and reduces to
    // the identity when the tau-conditions already hold
    let s_plus = tau_plus.sqrt()?;
    let cs = s_plus.conj_coeffs();
    let modulus = s_plus.mul(&cs).sqrt()?;
    let d = cs.mul(&modulus.recip()?);
    let a0_eta = d.odd_in_square().scale(Complex64::new(0.5, 0.0)).truncated(de);
    let a1_eta = {
        let e = d.even_in_square();
        let (shifted, c0) = e.sub(&Series1::constant(ONE, e.order())).shift_down();
        residuals.insert("phase_factor_origin".into(), c0.norm());
        shifted.scale(Complex64::new(0.5, 0.0)).truncated(de)
    };
    let mut w_eta = SeriesFamily::identity(dw, de);
    {
        let mut w2e = SeriesFamily::zero(dw, de, false);
        w2e.set(2, 0, ONE);
        w2e.set(0, 1, -ONE);
        let mut lin = SeriesFamily::zero(dw, de, false);
        lin.set_w_coefficient(0, &a0_eta);
        lin.set_w_coefficient(1, &a1_eta);
        w_eta = w_eta.add(&w2e.mul(&lin));
    }
    let f_dag = SeriesFamily::compose(&w_eta, &SeriesFamily::compose(&f_tilde, &w_eta.invert()?)?)?;

    // 5. canonical parameter and formal invariant
    let (eps_of_eta, b_of_eta) = formal_canonical(&f_dag)?;
    let rho0 = 0.9 * fam.param_radius.min(cfg.param_radius);
    let eta_samples = [rho0, -rho0, 0.5 * rho0, -0.5 * rho0];
    residuals.insert("eps_of_eta_imag".into(), series1_im_max_on(&eps_of_eta, &eta_samples));
    residuals.insert("b_of_eta_imag".into(), series1_im_max_on(&b_of_eta, &eta_samples));

    // 6. linear rescale c(eta) = sqrt(eps(eta)/eta) and reparametrization
    let (ratio, c0) = eps_of_eta.shift_down();
    residuals.insert("eps_of_eta_origin".into(), c0.norm());
    let c_eta = ratio.truncated(de).sqrt()?;
    let mut l_c = SeriesFamily::zero(dw, de, false);
    l_c.set_w_coefficient(1, &c_eta);
    let f_prep_eta = SeriesFamily::compose(&l_c, &SeriesFamily::compose(&f_dag, &l_c.invert()?)?)?;

    let mut eps_ser = eps_of_eta.truncated(de);
    eps_ser.c[0] = ZERO;
    let eta_of_eps = eps_ser.revert()?;
    let f_prep = f_prep_eta.param_subst(&eta_of_eps)?;
    let b_of_eps = b_of_eta.truncated(de).compose(&eta_of_eps)?;

    let prepared =
        GermFamily::from_series(f_prep, fam.radius, fam.param_radius).with_label("prepared");

    // 7. extract the prepared parts and verify the normal-form constraints
    let (b0, b1, q, _) = prepared.prepared_parts()?;
    let prep_rem = {
        let s_out = prepared.to_series(dw, de)?;
        let mut d = s_out.clone();
        d.set_conjugating(false);
        let (_, r0, r1) = d.sub(&SeriesFamily::identity(dw, de)).divide_by_w2_minus_eps();
        series1_max_on(&r0, &eps_samples) + series1_max_on(&r1, &eps_samples)
    };
    residuals.insert("prepared_remainder".into(), prep_rem);
    residuals.insert("b0_imag".into(), series1_im_max_on(&b0, &eps_samples));
    residuals.insert("b1_imag".into(), series1_im_max_on(&b1, &eps_samples));
    residuals.insert("b0_at_zero_minus_half".into(), (b0.c[0] - Complex64::new(0.5, 0.0)).norm());

    // 8. total change of coordinates, expressed in the canonical parameter
    let ch1_eta = ch1.param_subst(&t_of_eta)?;
    let ch2_eta = ch2.param_subst(&t_of_eta)?;
    let total_eta = SeriesFamily::compose(
        &l_c,
        &SeriesFamily::compose(&w_eta, &SeriesFamily::compose(&ch2_eta, &ch1_eta)?)?,
    )?;
    let change = total_eta.param_subst(&eta_of_eps)?;

    // 9. numeric verification at sample parameters
    let mut tau_real_pos = 0.0f64;
    let mut tau_conj_neg = 0.0f64;
    let mut mult_match = 0.0f64;
    let mut canon_round = 0.0f64;
    for &frac in &[0.5, 0.2] {
        let e = fam.param_radius.min(cfg.param_radius) * frac;
        for &sign in &[1.0f64, -1.0] {
            let lift = ParamLift::from_real(sign * e);
            let data = prepared.fixed_point_data(lift, cfg.newton_tol)?;
            let tau = data.tau.expect("prepared family is antiholomorphic");
            if sign > 0.0 {
                tau_real_pos = tau_real_pos.max(tau[0].im.abs()).max(tau[1].im.abs());
            } else {
                tau_conj_neg = tau_conj_neg.max((tau[0] - tau[1].conj()).norm());
            }
            for i in 0..2 {
                mult_match =
                    mult_match.max((data.multipliers[i] - (tau[i] * tau[i]).conj()).norm());
            }
            let (eps_back, _) = canonical_pair(&prepared, lift, cfg.newton_tol)?;
            canon_round = canon_round.max((eps_back - lift.value()).norm());
        }
    }
    residuals.insert("tau_real_for_positive_eps".into(), tau_real_pos);
    residuals.insert("tau_conjugate_pair_for_negative_eps".into(), tau_conj_neg);
    residuals.insert("multiplier_tau_square_match".into(), mult_match);
    residuals.insert("canonical_roundtrip".into(), canon_round);

    let hard_keys = ["pts_fixes_remainder", "b0_imag", "b1_imag", "multiplier_tau_square_match"];
    let worst =
        hard_keys.iter().filter_map(|k| residuals.get(*k)).fold(0.0f64, |mx, v| mx.max(*v));
    if worst > 1e-6 {
        return Err(Error::PreparationInconsistency { worst, tol: 1e-6 });
    }

    let report = PreparationReport {
        residuals,
        b_coefficients: b_of_eps.real_coeffs(),
        eps_of_eta_coefficients: eps_of_eta.real_coeffs(),
        change_coefficients: change_nonzero(&change),
    };
    Ok(Prepared {
        change,
        prepared,
        invariants: PreparedInvariants { eps_of_eta, b_of_eps, b0, b1, q },
        report,
    })
}

/// Largest |s(eps)| over a set of real parameter samples.
fn series1_max_on(s: &Series1, samples: &[f64]) -> f64 {
    samples.iter().fold(0.0f64, |m, &x| m.max(s.eval(Complex64::new(x, 0.0)).norm()))
}

/// Largest |Im s(eps)| over real parameter samples.
fn series1_im_max_on(s: &Series1, samples: &[f64]) -> f64 {
    samples.iter().fold(0.0f64, |m, &x| m.max(s.eval(Complex64::new(x, 0.0)).im.abs()))
}

fn change_nonzero(s: &SeriesFamily) -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for k in 0..=s.deg_eps() {
        for j in 0..=s.deg_w() {
            let c = s.get(j, k);
            if c.norm() > 1e-14 {
                out.push((j, k, c.re, c.im));
            }
        }
    }
    out
}

/// A single-parameter snapshot of a prepared family, recentered pointwise so
/// that its canonical parameter is exactly the requested one and the fixed
/// points sit exactly at +-sqrt(eps). This removes the series-truncation
/// mismatch between the family and the model at the chart's singular points.
#[derive(Debug, Clone)]
pub struct FamilySlice {
    pub lift: ParamLift,
    pub eps: Complex64,
    pub b: Complex64,
    pub radius: f64,
    backend: SliceBackend,
}

/// One map in factored prepared shape, acting on the conjugated variable:
/// w + (w^2 - quad)(beta0 + beta1 w + (w^2 - quad) R(w)).
/// Storing the factorization (rather than raw weights) keeps the fixed
/// points of the second iterate at +-sqrt(eps) to machine precision, which
/// the deep Fatou anchors need.
#[derive(Debug, Clone)]
pub struct FactoredMap {
    pub quad: Complex64,
    pub beta0: Complex64,
    pub beta1: Complex64,
    pub rest: Vec<Complex64>,
}

impl FactoredMap {
    /// Project raw polynomial weights onto the factored shape; returns the
    /// dropped remainder size.
    pub fn project(weights: &[Complex64], quad: Complex64) -> (FactoredMap, f64) {
        let mut cur = weights.to_vec();
        if cur.len() < 2 {
            cur.resize(2, ZERO);
        }
        cur[1] -= ONE; // subtract the identity
        let (q1, r0a, r1a) = divide_quadratic_point(&cur, quad);
        let (rest, b0, b1) = divide_quadratic_point(&q1, quad);
        let dropped = r0a.norm().max(r1a.norm());
        (FactoredMap { quad, beta0: b0, beta1: b1, rest }, dropped)
    }

    pub fn apply(&self, w: Complex64) -> Complex64 {
        let u = w * w - self.quad;
        let r = crate::series::horner(&self.rest, w);
        w + u * (self.beta0 + self.beta1 * w + u * r)
    }

    pub fn derivative(&self, w: Complex64) -> Complex64 {
        let u = w * w - self.quad;
        let r = crate::series::horner(&self.rest, w);
        let rp = horner_prime(&self.rest, w);
        let f = self.beta0 + self.beta1 * w + u * r;
        let fp = self.beta1 + 2.0 * w * r + u * rp;
        1.0 + 2.0 * w * f + u * fp
    }
}

/// Synthetic division of a w-polynomial by (w^2 - quad): quotient and the
/// remainder r0 + r1 w.
fn divide_quadratic_point(
    weights: &[Complex64],
    quad: Complex64,
) -> (Vec<Complex64>, Complex64, Complex64) {
    let n = weights.len();
    let mut cur = weights.to_vec();
    let mut q = vec![ZERO; n.saturating_sub(2)];
    for j in (2..n).rev() {
        let c = cur[j];
        q[j - 2] = c;
        cur[j - 2] += c * quad;
    }
    (q, cur[0], if n > 1 { cur[1] } else { ZERO })
}

#[derive(Debug, Clone)]
enum SliceBackend {
    /// Exact antiholomorphic model: flows of the model field.
    Model,
    /// Exact holomorphic model v^1.
    ModelHolo,
    /// Factored polynomial maps for f_{eps} and f_{conj eps}.
    Poly { fwd: FactoredMap, bwd: FactoredMap },
    /// A holomorphic unfolding given directly (no square root known):
    /// only the second-iterate interface is available.
    Holo { g: FactoredMap },
}

impl FamilySlice {
    pub fn chart(&self, side: Side) -> TimeChart {
        TimeChart::new(self.lift, self.b, self.radius, side)
    }

    /// Whether the antiholomorphic member maps are available.
    pub fn has_f(&self) -> bool {
        matches!(self.backend, SliceBackend::Model | SliceBackend::Poly { .. })
    }

    /// f_{eps-hat}(z)
    pub fn f(&self, z: Complex64) -> Result<Complex64> {
        match &self.backend {
            SliceBackend::Model => {
                let ch = TimeChart::new(self.lift.conj(), self.b.conj(), self.radius, Side::Plus);
                ch.flow(z.conj(), Complex64::new(0.5, 0.0), 3e-14)
            }
            SliceBackend::Poly { fwd, .. } => Ok(fwd.apply(z.conj())),
            _ => Err(Error::Misuse("this family has no antiholomorphic member".into())),
        }
    }

    /// f_{conj eps-hat}(z)
    pub fn f_conj_param(&self, z: Complex64) -> Result<Complex64> {
        match &self.backend {
            SliceBackend::Model => {
                let ch = self.chart(Side::Plus);
                ch.flow(z.conj(), Complex64::new(0.5, 0.0), 3e-14)
            }
            SliceBackend::Poly { bwd, .. } => Ok(bwd.apply(z.conj())),
            _ => Err(Error::Misuse("this family has no antiholomorphic member".into())),
        }
    }

    /// Second iterate g = f_{conj eps} . f_{eps} (or the family itself when
    /// it is already holomorphic).
    pub fn g(&self, z: Complex64) -> Result<Complex64> {
        match &self.backend {
            SliceBackend::Model | SliceBackend::ModelHolo => {
                self.chart(Side::Plus).flow(z, ONE, 3e-14)
            }
            SliceBackend::Poly { .. } => {
                let u = self.f(z)?;
                self.f_conj_param(u)
            }
            SliceBackend::Holo { g } => Ok(g.apply(z)),
        }
    }

    pub fn g_prime(&self, z: Complex64) -> Result<Complex64> {
        match &self.backend {
            SliceBackend::Model | SliceBackend::ModelHolo => {
                self.chart(Side::Plus).flow_derivative(z, ONE, 3e-14)
            }
            SliceBackend::Poly { fwd, bwd } => {
                let u = fwd.apply(z.conj());
                let dfwd = fwd.derivative(z.conj());
                let dbwd = bwd.derivative(u.conj());
                Ok(dbwd * dfwd.conj())
            }
            SliceBackend::Holo { g } => Ok(g.derivative(z)),
        }
    }

    /// Inverse of g by Newton from a seed, iterated to step-size
    /// convergence: near the fixed points the residual scale shrinks like
    /// the square of the distance, so an absolute residual cutoff would
    /// leave a large relative error in the step.
    pub fn g_inverse(&self, w: Complex64, seed: Complex64, tol: f64) -> Result<Complex64> {
        let mut z = seed;
        let mut last_step = f64::MAX;
        for _ in 0..100 {
            let val = self.g(z)? - w;
            if !val.re.is_finite() || !val.im.is_finite() {
                return Err(Error::Escape { z });
            }
            let d = self.g_prime(z)?;
            let mut step = val / d;
            // keep Newton local near the domain edge, where one dynamical
            // step is not small compared to the distance to the boundary
            let cap = 0.15 * (1.0 + z.norm());
            if step.norm() > cap {
                step *= cap / step.norm();
            }
            z -= step;
            let sn = step.norm();
            if sn < 1e-16 * (1.0 + z.norm()) {
                return Ok(z);
            }
            if sn >= last_step && sn < 3e-14 * (1.0 + z.norm()) {
                // stalled at rounding level
                return Ok(z);
            }
            last_step = sn;
        }
        let res = (self.g(z)? - w).norm();
        if res < 1e3 * tol {
            return Ok(z);
        }
        Err(Error::NewtonDiverged { residual: res, iterations: 100 })
    }

    /// Inverse of f (antiholomorphic) by Newton on the conjugated variable,
    /// iterated to step-size convergence like `g_inverse`.
    pub fn f_inverse(&self, w: Complex64, seed: Complex64, tol: f64) -> Result<Complex64> {
        // solve f(z) = w; f(z) = F(conj z) with F holomorphic
        let mut zb = seed.conj();
        let mut last_step = f64::MAX;
        for _ in 0..100 {
            let val = self.f_of_conj(zb)? - w;
            let d = self.f_of_conj_prime(zb)?;
            let step = val / d;
            zb -= step;
            let sn = step.norm();
            if sn < 1e-16 * (1.0 + zb.norm()) {
                return Ok(zb.conj());
            }
            if sn >= last_step && sn < 3e-14 * (1.0 + zb.norm()) {
                return Ok(zb.conj());
            }
            last_step = sn;
        }
        let res = (self.f_of_conj(zb)? - w).norm();
        if res < 1e3 * tol {
            return Ok(zb.conj());
        }
        Err(Error::NewtonDiverged { residual: res, iterations: 100 })
    }

    fn f_of_conj(&self, zb: Complex64) -> Result<Complex64> {
        match &self.backend {
            SliceBackend::Model => {
                let ch = TimeChart::new(self.lift.conj(), self.b.conj(), self.radius, Side::Plus);
                ch.flow(zb, Complex64::new(0.5, 0.0), 3e-14)
            }
            SliceBackend::Poly { fwd, .. } => Ok(fwd.apply(zb)),
            _ => Err(Error::Misuse("this family has no antiholomorphic member".into())),
        }
    }

    fn f_of_conj_prime(&self, zb: Complex64) -> Result<Complex64> {
        match &self.backend {
            SliceBackend::Model => {
                let ch = TimeChart::new(self.lift.conj(), self.b.conj(), self.radius, Side::Plus);
                ch.flow_derivative(zb, Complex64::new(0.5, 0.0), 3e-14)
            }
            SliceBackend::Poly { fwd, .. } => Ok(fwd.derivative(zb)),
            _ => Err(Error::Misuse("this family has no antiholomorphic member".into())),
        }
    }

    /// Slice at the sector-conjugate parameter.
    pub fn conj_slice(&self) -> FamilySlice {
        FamilySlice {
            lift: self.lift.conj(),
            eps: self.eps.conj(),
            b: self.b.conj(),
            radius: self.radius,
            backend: match &self.backend {
                SliceBackend::Model => SliceBackend::Model,
                SliceBackend::ModelHolo => SliceBackend::ModelHolo,
                SliceBackend::Poly { fwd, bwd } => {
                    SliceBackend::Poly { fwd: bwd.clone(), bwd: fwd.clone() }
                }
                SliceBackend::Holo { g } => {
                    let mut flipped = g.clone();
                    flipped.quad = g.quad.conj();
                    flipped.beta0 = g.beta0.conj();
                    flipped.beta1 = g.beta1.conj();
                    flipped.rest = g.rest.iter().map(|c| c.conj()).collect();
                    SliceBackend::Holo { g: flipped }
                }
            },
        }
    }
}

fn horner_prime(weights: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = ZERO;
    for j in (1..weights.len()).rev() {
        acc = acc * z + weights[j] * (j as f64);
    }
    acc
}

/// Build the pointwise-canonical slice of a prepared family at a lifted
/// parameter value.
pub fn canonical_slice(fam: &GermFamily, lift: ParamLift, cfg: &RunConfig) -> Result<FamilySlice> {
    let radius = fam.radius;
    if let Backend::ModelHalf { b } = &fam.backend {
        // the model is exactly canonical
        return Ok(FamilySlice {
            lift,
            eps: lift.value(),
            b: b.eval(lift.value()),
            radius,
            backend: SliceBackend::Model,
        });
    }
    if let Backend::ModelOne { b } = &fam.backend {
        return Ok(FamilySlice {
            lift,
            eps: lift.value(),
            b: b.eval(lift.value()),
            radius,
            backend: SliceBackend::ModelHolo,
        });
    }
    if !fam.conjugating() {
        return holomorphic_slice(fam, lift, cfg);
    }
    let target = lift.value();
    if lift.rho < 1e-14 {
        // at the merge the canonical recentering is trivial
        let s = fam.to_series(fam_deg_w(fam), fam_deg_e(fam))?;
        let (fwd, _) = FactoredMap::project(&s.weights_at(target), target);
        let (bwd, _) = FactoredMap::project(&s.weights_at(target.conj()), target.conj());
        let (_, b) = merged_b(fam)?;
        return Ok(FamilySlice {
            lift,
            eps: target,
            b,
            radius,
            backend: SliceBackend::Poly { fwd, bwd },
        });
    }
    // solve for the raw parameter t whose canonical value is the target
    let mut t = target;
    for _ in 0..30 {
        let lt = lift_near(t, lift);
        let (eps_c, _) = canonical_pair(fam, lt, cfg.newton_tol)?;
        let err = eps_c - target;
        if err.norm() < 1e-15 * (1.0 + target.norm()) {
            break;
        }
        t -= err;
    }
    let s = fam.to_series(fam_deg_w(fam), fam_deg_e(fam))?;
    // f_t acts as P(conj t, conj z); rescale by c = sqrt(target / t) and
    // project onto the factored prepared shape so the fixed points are exact
    let c = (target / t).sqrt();
    let (fwd, drop_f) = FactoredMap::project(&rescale_weights(&s.weights_at(t), c), target);
    let (bwd, drop_b) =
        FactoredMap::project(&rescale_weights(&s.weights_at(t.conj()), c), target.conj());
    let mut slice = FamilySlice {
        lift,
        eps: target,
        b: ZERO,
        radius,
        backend: SliceBackend::Poly { fwd, bwd },
    };
    // recompute b from the projected multipliers so the chart matches exactly
    let sq = lift.sqrt();
    let lam_p = slice.g_prime(sq)?;
    let lam_m = slice.g_prime(-sq)?;
    let (eps_back, b_exact) = canonical_from_multipliers(lam_p, lam_m)?;
    slice.b = b_exact;
    let drift = (eps_back - target).norm();
    if drift > 1e-7 || drop_f.max(drop_b) > 1e-6 {
        return Err(Error::PreparationInconsistency {
            worst: drift.max(drop_f).max(drop_b),
            tol: 1e-6,
        });
    }
    Ok(slice)
}

fn fam_deg_w(fam: &GermFamily) -> usize {
    match &fam.backend {
        Backend::Series(s) => s.deg_w(),
        _ => 12,
    }
}

fn fam_deg_e(fam: &GermFamily) -> usize {
    match &fam.backend {
        Backend::Series(s) => s.deg_eps(),
        _ => 6,
    }
}

/// L_c . f . L_c^{-1} on the stored weights of an antiholomorphic map:
/// new_j = c * w_j / conj(c)^j.
fn rescale_weights(weights: &[Complex64], c: Complex64) -> Vec<Complex64> {
    let cb = c.conj();
    let mut out = Vec::with_capacity(weights.len());
    let mut denom = ONE;
    for w in weights {
        out.push(c * w / denom);
        denom *= cb;
    }
    out
}

/// Formal invariant at the merged parameter, from the cubic coefficient of
/// the prenormal form: c3 = 1/4 - b/2 for antiholomorphic germs,
/// c3 = 1 - b for their second iterates.
fn merged_b(fam: &GermFamily) -> Result<(Complex64, Complex64)> {
    let s = fam.to_series(fam_deg_w(fam).max(4), fam_deg_e(fam).max(1))?;
    let c3 = s.get(3, 0);
    if fam.conjugating() {
        Ok((ZERO, (Complex64::new(0.25, 0.0) - c3) * 2.0))
    } else {
        Ok((ZERO, Complex64::new(1.0, 0.0) - c3))
    }
}

/// Pointwise-canonical slice of a holomorphic unfolding given directly.
fn holomorphic_slice(fam: &GermFamily, lift: ParamLift, cfg: &RunConfig) -> Result<FamilySlice> {
    let radius = fam.radius;
    let target = lift.value();
    let s = fam.to_series(fam_deg_w(fam), fam_deg_e(fam))?;
    if lift.rho < 1e-14 {
        let (g, _) = FactoredMap::project(&s.weights_at(target), target);
        let (_, b) = merged_b(fam)?;
        return Ok(FamilySlice { lift, eps: target, b, radius, backend: SliceBackend::Holo { g } });
    }
    let mut t = target;
    for _ in 0..30 {
        let lt = lift_near(t, lift);
        let (eps_c, _) = canonical_pair(fam, lt, cfg.newton_tol)?;
        let err = eps_c - target;
        if err.norm() < 1e-15 * (1.0 + target.norm()) {
            break;
        }
        t -= err;
    }
    // rescale z by c = sqrt(target/t): holomorphic conjugation of weights
    let c = (target / t).sqrt();
    let raw = s.weights_at(t);
    let mut resc = Vec::with_capacity(raw.len());
    let mut denom = ONE;
    for w in &raw {
        resc.push(c * w / denom);
        denom *= c;
    }
    let (g, drop) = FactoredMap::project(&resc, target);
    let mut slice =
        FamilySlice { lift, eps: target, b: ZERO, radius, backend: SliceBackend::Holo { g } };
    let sq = lift.sqrt();
    let lam_p = slice.g_prime(sq)?;
    let lam_m = slice.g_prime(-sq)?;
    let (eps_back, b_exact) = canonical_from_multipliers(lam_p, lam_m)?;
    slice.b = b_exact;
    let drift = (eps_back - target).norm();
    if drift > 1e-7 || drop > 1e-6 {
        return Err(Error::PreparationInconsistency { worst: drift.max(drop), tol: 1e-6 });
    }
    Ok(slice)
}

fn lift_near(value: Complex64, reference: ParamLift) -> ParamLift {
    if value.im == 0.0 && (reference.theta == 0.0 || reference.theta == crate::chart::PI) {
        return ParamLift::from_real(value.re);
    }
    let base = reference.theta;
    let mut arg = value.arg();
    while arg < base - std::f64::consts::PI {
        arg += 2.0 * std::f64::consts::PI;
    }
    while arg > base + std::f64::consts::PI {
        arg -= 2.0 * std::f64::consts::PI;
    }
    ParamLift::new(value.norm(), arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg() -> RunConfig {
        RunConfig::default()
    }

    #[test]
    fn canonical_pair_of_model_round_trips() {
        // b = 0, eta = 0.04: eps = (2.5 + 2.5)^{-2} = 0.04, b = 0
        let m = GermFamily::model_antiholomorphic(Series1::zero(6), 0.5, 0.05);
        let (eps, b) = canonical_pair(&m, ParamLift::from_real(0.04), 1e-13).unwrap();
        assert!((eps - c(0.04, 0.0)).norm() < 1e-11, "eps={eps}");
        assert!(b.norm() < 1e-10);
        // direct frozen check of the formulas at lambda = e^{+-0.4}
        let (e2, b2) =
            canonical_from_multipliers(c((0.4f64).exp(), 0.0), c((-0.4f64).exp(), 0.0)).unwrap();
        assert!((e2 - c(0.04, 0.0)).norm() < 1e-16);
        assert!(b2.norm() < 1e-15);
    }

    #[test]
    fn canonical_pair_model_with_b() {
        let b = Series1::constant(c(0.3, 0.0), 6);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        for &eta in &[0.04f64, -0.04, 0.01] {
            let (eps, bv) = canonical_pair(&m, ParamLift::from_real(eta), 1e-13).unwrap();
            assert!((eps - c(eta, 0.0)).norm() < 1e-10, "eta={eta} eps={eps}");
            assert!((bv - c(0.3, 0.0)).norm() < 1e-9, "eta={eta} b={bv}");
        }
    }

    #[test]
    fn formal_canonical_of_model_is_identity() {
        let b = Series1::constant(c(0.3, 0.0), 5);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        let s = m.to_series(14, 5).unwrap();
        let (eps_eta, b_eta) = formal_canonical(&s).unwrap();
        assert!((eps_eta.c[1] - ONE).norm() < 1e-11, "{:?}", &eps_eta.c[..3]);
        for k in [0usize, 2, 3] {
            assert!(eps_eta.c[k].norm() < 1e-9, "k={k}: {}", eps_eta.c[k]);
        }
        assert!((b_eta.c[0] - c(0.3, 0.0)).norm() < 1e-10);
        for k in 1..=3 {
            assert!(b_eta.c[k].norm() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn grid_fit_matches_formal_on_model() {
        let b = Series1::constant(c(0.3, 0.0), 5);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        let fit = canonical_invariants(&m, &cfg()).unwrap();
        assert!(fit.max_imag < 1e-10, "imag {}", fit.max_imag);
        assert!((fit.eps_of_eta.c[1] - ONE).norm() < 1e-8);
        assert!((fit.b_of_eta.c[0] - c(0.3, 0.0)).norm() < 1e-8);
        // realness of pointwise values on the real grid
        for (_, eps, bv) in &fit.grid {
            assert!(eps.im.abs() < 1e-10 && bv.im.abs() < 1e-10);
        }
    }

    /// sup |change(eps, z) - z| over the working polydisk.
    fn change_from_identity(change: &SeriesFamily) -> f64 {
        let mut worst = 0.0f64;
        for &e in &[0.04f64, -0.04, 0.01, -0.01, 0.0] {
            for &z in &[c(0.3, 0.0), c(0.0, 0.25), c(-0.2, 0.15), c(0.12, -0.28)] {
                let val = change.evaluate(c(e, 0.0), z);
                worst = worst.max((val - z).norm());
            }
        }
        worst
    }

    #[test]
    fn prepare_is_idempotent() {
        // the model family is exactly canonical: identity change
        let b = Series1::constant(c(0.3, 0.0), 6);
        let m = GermFamily::model_antiholomorphic(b, 0.5, 0.05);
        let m_series = GermFamily::from_series(m.to_series(12, 6).unwrap(), 0.5, 0.05);
        let out = prepare(&m_series, &cfg()).unwrap();
        let diff = change_from_identity(&out.change);
        assert!(diff < 1e-10, "model change differs from identity by {diff:e}");

        // applying prepare to its own output is the identity
        let b0 = Series1::constant(c(0.5, 0.0), 6);
        let b1 = Series1::constant(c(0.25, 0.0), 6);
        let q = SeriesFamily::zero(12, 6, false);
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 12, 6, 0.5, 0.05);
        let once = prepare(&f, &cfg()).unwrap();
        let twice = prepare(&once.prepared, &cfg()).unwrap();
        let diff = change_from_identity(&twice.change);
        assert!(diff < 1e-10, "second change differs from identity by {diff:e}");
        // and the family itself is reproduced on the domain
        let mut worst = 0.0f64;
        for &e in &[0.04f64, -0.04, 0.01] {
            for &z in &[c(0.25, 0.1), c(-0.15, 0.2)] {
                let a = once.prepared.evaluate(c(e, 0.0), z).unwrap();
                let bv = twice.prepared.evaluate(c(e, 0.0), z).unwrap();
                worst = worst.max((a - bv).norm());
            }
        }
        assert!(worst < 1e-9, "prepared families differ by {worst:e}");
    }

    #[test]
    fn prepare_flagship_family() {
        // f_eta(z) = zbar + (zbar^2 - eta)(1/2 + 1/4 zbar)
        let b0 = Series1::constant(c(0.5, 0.0), 6);
        let b1 = Series1::constant(c(0.25, 0.0), 6);
        let q = SeriesFamily::zero(12, 6, false);
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 12, 6, 0.5, 0.05);
        let out = prepare(&f, &cfg()).unwrap();
        let inv = &out.invariants;
        assert!((inv.b0.c[0] - c(0.5, 0.0)).norm() < 1e-10);
        assert!((inv.b1.c[0] - c(0.25, 0.0)).norm() < 1e-10);
        // b(0) = 2 (1/4 - B1(0)) = 0 for this family
        assert!(inv.b_of_eps.c[0].norm() < 1e-9, "b(0) = {}", inv.b_of_eps.c[0]);
        // cross-check b against the pointwise multiplier formula
        for &e in &[0.01f64, -0.02] {
            let (_, b_pt) =
                canonical_pair(&out.prepared, ParamLift::from_real(e), 1e-13).unwrap();
            let b_ser = inv.b_of_eps.eval(c(e, 0.0));
            assert!((b_pt - b_ser).norm() < 1e-7, "e={e}: {b_pt} vs {b_ser}");
        }
    }

    #[test]
    fn prepare_recovers_invariants_after_coordinate_change() {
        let b0 = Series1::constant(c(0.5, 0.0), 6);
        let b1 = Series1::from_coeffs(vec![c(0.25, 0.0), c(0.3, 0.0)]);
        let mut q = SeriesFamily::zero(12, 6, false);
        q.set(0, 0, c(0.2, 0.0));
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 12, 6, 0.5, 0.05);
        let base = prepare(&f, &cfg()).unwrap();

        // conjugate by a mix-analytic change with real-linear part
        let mut ell = SeriesFamily::identity(12, 6);
        ell.set(2, 0, c(0.1, 0.05));
        ell.set(1, 1, c(0.2, -0.1));
        let fs = f.to_series(12, 6).unwrap();
        let conj_fam = SeriesFamily::compose(
            &ell,
            &SeriesFamily::compose(&fs, &ell.invert().unwrap()).unwrap(),
        )
        .unwrap();
        let g = GermFamily::from_series(conj_fam, 0.5, 0.05);
        let out = prepare(&g, &cfg()).unwrap();

        for k in 0..=3 {
            let d = (out.invariants.b_of_eps.c[k] - base.invariants.b_of_eps.c[k]).norm();
            assert!(d < 1e-8, "b coefficient {k} differs by {d:e}");
        }
        // canonical parameter invariance, pointwise
        for &e in &[0.02f64, -0.03] {
            let (e1, b1v) = canonical_pair(&f, ParamLift::from_real(e), 1e-13).unwrap();
            let (e2, b2v) = canonical_pair(&g, ParamLift::from_real(e), 1e-13).unwrap();
            assert!((e1 - e2).norm() < 1e-9, "eps at {e}");
            assert!((b1v - b2v).norm() < 1e-8, "b at {e}");
        }
    }

    #[test]
    fn canonical_slice_matches_model_multipliers() {
        let b0 = Series1::constant(c(0.5, 0.0), 6);
        let b1 = Series1::constant(c(0.25, 0.0), 6);
        let q = SeriesFamily::zero(12, 6, false);
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 12, 6, 0.5, 0.05);
        let out = prepare(&f, &cfg()).unwrap();
        for &e in &[0.01f64, -0.01, 0.04] {
            let lift = ParamLift::from_real(e);
            let slice = canonical_slice(&out.prepared, lift, &cfg()).unwrap();
            let s = lift.sqrt();
            // fixed points at +-sqrt(eps) to machine precision
            let res_p = (slice.g(s).unwrap() - s).norm();
            let res_m = (slice.g(-s).unwrap() + s).norm();
            assert!(res_p < 1e-13 && res_m < 1e-13, "e={e}: {res_p:e} {res_m:e}");
            // multipliers match the model built from (eps, b) of the slice
            let mu = 2.0 * s / (1.0 + slice.b * s);
            let lam_model = mu.exp();
            let lam = slice.g_prime(s).unwrap();
            assert!((lam - lam_model).norm() < 1e-9, "e={e}: {lam} vs {lam_model}");
        }
    }

    #[test]
    fn translated_family_same_canonical_pair() {
        // recentering: conjugate by z -> z + 0.01; multipliers, hence (eps, b),
        // are unchanged. Seeds still converge because the shift is small.
        let b0 = Series1::constant(c(0.5, 0.0), 6);
        let b1 = Series1::constant(c(0.25, 0.0), 6);
        let q = SeriesFamily::zero(12, 6, false);
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 12, 6, 0.5, 0.05);
        let fs = f.to_series(12, 6).unwrap();
        let shifted = fs.conjugate_by_translation(c(0.01, 0.0));
        let g = GermFamily::from_series(shifted, 0.5, 0.05);
        for &eta in &[0.04f64, -0.04] {
            let (e1, b1v) = canonical_pair(&f, ParamLift::from_real(eta), 1e-13).unwrap();
            let (e2, b2v) = canonical_pair(&g, ParamLift::from_real(eta), 1e-13).unwrap();
            assert!((e1 - e2).norm() < 1e-8, "eta={eta}: {e1} vs {e2}");
            assert!((b1v - b2v).norm() < 1e-8, "eta={eta}");
        }
    }
}
