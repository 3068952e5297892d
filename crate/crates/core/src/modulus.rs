//! Transition (horn) maps between the two Fatou charts, their Fourier
//! coefficients, the normalization pipeline, and the weak/strong moduli.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{ParamLift, Side, PI};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fatou::{
    antiholomorphic_constant, f_lift, fatou_pair, FatouCoordinate, FatouPair, LiftPoint,
};
use crate::germ::GermFamily;
use crate::prepare::canonical_slice;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    /// Above the principal hole, eps <= 0 and sector rays.
    Inf,
    /// Below the principal hole, eps <= 0.
    Zero,
    /// Gate band above the principal hole, eps > 0 (the upper component).
    GateUpper,
    /// Gate band below: T_{alpha-} . Gate . T_{alpha+}.
    GateLower,
}

/// A transition map Psi = Phi^- . T_{-+ i pi b} . (Phi^+)^{-1} with its
/// sampling level.
pub struct TransitionMap<'a> {
    pub kind: TransitionKind,
    pub plus: &'a FatouCoordinate,
    pub minus: &'a FatouCoordinate,
    pub b: Complex64,
    /// representative point of the sampling line (the line runs horizontally
    /// through it)
    pub anchor_level: Complex64,
}

impl<'a> TransitionMap<'a> {
    /// The chart-identification constant inserted between the two charts.
    fn insertion(&self) -> Complex64 {
        match self.kind {
            TransitionKind::Inf | TransitionKind::GateUpper | TransitionKind::GateLower => {
                -I * PI * self.b
            }
            TransitionKind::Zero => I * PI * self.b,
        }
    }

    /// Evaluate the transition map at V (in the image of Phi^+).
    pub fn eval(&self, v: Complex64) -> Result<Complex64> {
        let v_eff = match self.kind {
            TransitionKind::GateLower => v + self.plus.chart.alpha_plus(),
            _ => v,
        };
        let p = self.plus.inverse(v_eff)?;
        let w_minus_hint = p.w + self.insertion();
        let q = self.minus_point(p, w_minus_hint)?;
        let out = self.minus.eval(q)?;
        Ok(match self.kind {
            TransitionKind::GateLower => out + self.minus.chart.alpha_minus(),
            _ => out,
        })
    }

    /// Resolve the same z-point in the minus chart on its canonical sheet.
    fn minus_point(&self, p: LiftPoint, hint: Complex64) -> Result<LiftPoint> {
        if !self.minus.sheet_sensitive() {
            return Ok(LiftPoint { z: p.z, w: hint });
        }
        let chart = &self.minus.chart;
        let mut candidates = vec![ZERO];
        for k in [1i64, -1] {
            candidates.push(chart.deck(k, 0));
            candidates.push(chart.deck(0, k));
        }
        for cand in candidates {
            let lp = self.minus.lift_point(hint + cand)?;
            if (lp.z - p.z).norm() < 1e-8 * (1.0 + p.z.norm()) {
                return Ok(lp);
            }
        }
        Err(Error::Geometry(
            "could not identify the minus-chart sheet of a transition point".into(),
        ))
    }

    /// Inverse transition by damped fixed-point iteration.
    pub fn inverse(&self, v: Complex64) -> Result<Complex64> {
        let mut w = v - self.insertion();
        let mut best = (f64::MAX, w);
        for _ in 0..60 {
            let val = self.eval(w)?;
            let err = val - v;
            let en = err.norm();
            if en < best.0 {
                best = (en, w);
            }
            if en < 1e-11 {
                return Ok(w);
            }
            if en > 2.0 * best.0 && best.0 < 1e-8 {
                return Ok(best.1);
            }
            w -= err;
        }
        if best.0 < 1e-8 {
            return Ok(best.1);
        }
        Err(Error::NewtonDiverged { residual: best.0, iterations: 60 })
    }
}

/// Fourier coefficients c_n, |n| <= n_max, of Psi(W) - W sampled over one
/// period at the given line; returns (coeffs indexed n - (-n_max), alias
/// estimate from a second line a quarter unit higher).
pub fn fourier_modulus(
    psi: &dyn Fn(Complex64) -> Result<Complex64>,
    anchor: Complex64,
    n_max: usize,
    samples: usize,
) -> Result<(Vec<Complex64>, f64)> {
    let m = samples.max(4 * n_max).max(32);
    let extract = |level: Complex64| -> Result<Vec<Complex64>> {
        let mut d = Vec::with_capacity(m);
        for j in 0..m {
            let w = level + Complex64::new(j as f64 / m as f64, 0.0);
            d.push(psi(w)? - w);
        }
        let scale = d.iter().fold(0.0f64, |mx, v| mx.max(v.norm()));
        // coefficients smaller than this at the sampling line cannot be
        // distinguished from evaluation noise; the level correction would
        // amplify pure noise, so they are reported as exact zeros
        let floor = 1e-13 * scale.max(1.0);
        let mut out = Vec::with_capacity(2 * n_max + 1);
        for n in -(n_max as i64)..=(n_max as i64) {
            let mut acc = ZERO;
            for (j, dj) in d.iter().enumerate() {
                let x = j as f64 / m as f64;
                acc += dj * (-2.0 * PI * I * (n as f64) * x).exp();
            }
            acc /= m as f64;
            if acc.norm() < floor {
                out.push(ZERO);
            } else {
                // undo the sampling-line factor e^{2 pi i n level}
                out.push(acc * (-2.0 * PI * I * (n as f64) * level).exp());
            }
        }
        Ok(out)
    };
    let c1 = extract(anchor)?;
    let c2 = extract(anchor + Complex64::new(0.0, 0.25))?;
    let mut alias = 0.0f64;
    for (a, b) in c1.iter().zip(c2.iter()) {
        let scale = a.norm().max(1.0);
        alias = alias.max((a - b).norm() / scale);
    }
    Ok((c1, alias))
}

/// Extraction at several levels approaching the hole: each mode is taken
/// from the shallowest level at which it rises above the noise floor, and
/// the cross-level agreement of resolved modes is the accuracy estimate.
pub fn fourier_modulus_adaptive(
    psi: &dyn Fn(Complex64) -> Result<Complex64>,
    base_level: Complex64,
    toward_hole: f64,
    n_max: usize,
    samples: usize,
) -> Result<(Vec<Complex64>, f64, f64)> {
    let offsets = [0.0, -0.7 * toward_hole, -0.85 * toward_hole];
    let mut per_level = Vec::new();
    for (i, off) in offsets.into_iter().enumerate() {
        let level = base_level + Complex64::new(0.0, off);
        match fourier_modulus(psi, level, n_max, samples) {
            Ok((c, _)) => per_level.push((level, c)),
            // levels close to the hole may leave the working domain (the
            // backward orbits exit the disk); the base level must succeed
            Err(e) if i > 0 => {
                let _ = e;
                continue;
            }
            Err(e) => return Err(e),
        }
    }
    let mut out = vec![ZERO; 2 * n_max + 1];
    let mut chosen_level = per_level[0].0.im;
    let mut agree = 0.0f64;
    for k in 0..=2 * n_max {
        // shallowest level (latest in the list) where the mode is resolved
        let mut value = ZERO;
        let mut values = Vec::new();
        for (_, c) in &per_level {
            if c[k].norm() > 0.0 {
                values.push(c[k]);
            }
        }
        if let Some(v) = values.last() {
            value = *v;
            for other in &values {
                agree = agree.max((other - v).norm() / v.norm().max(1e-300));
            }
        }
        out[k] = value;
        if value.norm() > 0.0 {
            chosen_level = per_level.last().unwrap().0.im;
        }
    }
    Ok((out, agree, chosen_level))
}

/// One parameter sample of the modulus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusRecord {
    pub eps_re: f64,
    pub eps_im: f64,
    pub arg_lift: f64,
    pub b_re: f64,
    pub b_im: f64,
    /// c_n for n = 0..n_max of the transition above the hole (Inf or GateUpper)
    pub c_inf: Vec<(f64, f64)>,
    /// c_n for n = 0..n_max below the hole (eps <= 0 only)
    pub c_zero: Vec<(f64, f64)>,
    /// full two-sided list n = -n_max..n_max for the gate transition
    pub c_gate: Option<Vec<(f64, f64)>>,
    pub sample_level: f64,
    pub alias_estimate: f64,
    pub residuals: BTreeMap<String, f64>,
    pub normalization: String,
    pub failed: Option<String>,
}

impl ModulusRecord {
    pub fn c_inf_complex(&self) -> Vec<Complex64> {
        self.c_inf.iter().map(|(re, im)| Complex64::new(*re, *im)).collect()
    }

    pub fn c_zero_complex(&self) -> Vec<Complex64> {
        self.c_zero.iter().map(|(re, im)| Complex64::new(*re, *im)).collect()
    }

    pub fn b(&self) -> Complex64 {
        Complex64::new(self.b_re, self.b_im)
    }

    pub fn eps(&self) -> Complex64 {
        Complex64::new(self.eps_re, self.eps_im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusData {
    pub family: String,
    pub normalization: String,
    pub records: Vec<ModulusRecord>,
}

/// The full per-parameter computation: Fatou pair, normalizations, transition
/// maps, Fourier data and the relation report.
pub struct RecordWorkspace {
    pub pair: FatouPair,
    pub b: Complex64,
    pub lift: ParamLift,
    pub gate: bool,
}

pub fn record_workspace(
    fam: &GermFamily,
    lift: ParamLift,
    cfg: &RunConfig,
) -> Result<RecordWorkspace> {
    let slice = canonical_slice(fam, lift, cfg)?;
    let b = slice.b;
    let mut pair = fatou_pair(&slice, cfg)?;
    let gate = (!lift.is_zero() && lift.is_real_positive())
        || (!lift.is_zero() && !lift.is_real_negative() && {
            // rays handled like the positive axis when the holes are steep
            let hd = pair.plus.chart.hole_dir();
            hd.im.abs() > 0.97
        });

    // 1. base-point normalization of Phi+
    let base_note;
    if !pair.plus.sheet_sensitive() {
        // X = Z+(r) = 0 is reachable through the orbit anchors
        match pair.plus.lift_point(ZERO).and_then(|p| pair.plus.eval(p)) {
            Ok(v0) => {
                pair.plus.shift -= v0;
                base_note = "phi_plus(0)=0";
            }
            Err(_) => {
                let x = pair.plus.domain.base;
                let v = pair.plus.eval_w(x)?;
                pair.plus.shift -= v;
                base_note = "phi_plus(base)=0";
            }
        }
    } else {
        let x = pair.plus.domain.base;
        let v = pair.plus.eval_w(x)?;
        pair.plus.shift -= v;
        base_note = "phi_plus(strip base)=0";
    }

    // 2. antiholomorphic adjustment at real parameters: P = Sigma T_C with
    // C = 1/2 + i y; the shift T_{i y/2} makes C = 1/2
    let has_f = pair.plus.slice.has_f();
    if has_f && (lift.theta == 0.0 || lift.is_real_negative()) {
        for side in [Side::Plus, Side::Minus] {
            let fc = match side {
                Side::Plus => &mut pair.plus,
                Side::Minus => &mut pair.minus,
            };
            let heights = match fc.domain.kind {
                crate::fatou::DomainKind::Glutsyuk => vec![-2.0, 1.0, 3.0],
                _ => vec![-4.0, -2.5, 2.5, 4.0],
            };
            let (c, _spread) = antiholomorphic_constant(fc, &heights)?;
            fc.shift += I * (c.im / 2.0);
        }
    }

    let mut ws = RecordWorkspace { pair, b, lift, gate };

    // 3. c0 normalization: shift Phi- so the constant term of the upper
    // transition is -i pi b
    let c0 = ws.measure_c0()?;
    let delta = -I * PI * b - c0;
    ws.pair.minus.shift += delta;
    ws.pair.minus.normalization = format!("{base_note}; c0=-i pi b");
    ws.pair.plus.normalization = base_note.to_string();
    Ok(ws)
}

impl RecordWorkspace {
    pub fn upper_kind(&self) -> TransitionKind {
        if self.gate {
            TransitionKind::GateUpper
        } else {
            TransitionKind::Inf
        }
    }

    /// Sampling line anchor for a transition kind.
    pub fn level(&self, kind: TransitionKind, h: f64) -> Complex64 {
        let dom = &self.pair.plus.domain;
        match kind {
            TransitionKind::Inf => Complex64::new(dom.hole_center.re, dom.hole_top + h),
            TransitionKind::Zero => Complex64::new(dom.hole_center.re, dom.hole_bottom - h),
            TransitionKind::GateUpper => {
                let alpha = self.pair.plus.chart.alpha_plus();
                dom.hole_center + alpha * 0.5
            }
            TransitionKind::GateLower => {
                let alpha = self.pair.plus.chart.alpha_plus();
                dom.hole_center - alpha * 0.5
            }
        }
    }

    pub fn transition(&self, kind: TransitionKind, h: f64) -> TransitionMap<'_> {
        TransitionMap {
            kind,
            plus: &self.pair.plus,
            minus: &self.pair.minus,
            b: self.b,
            anchor_level: self.level(kind, h),
        }
    }

    fn measure_c0(&self) -> Result<Complex64> {
        let kind = self.upper_kind();
        let tr = self.transition(kind, 1.5);
        let anchor = tr.anchor_level;
        let m = 16;
        let mut acc = ZERO;
        for j in 0..m {
            let w = anchor + Complex64::new(j as f64 / m as f64, 0.0);
            acc += tr.eval(w)? - w;
        }
        Ok(acc / (m as f64))
    }

    /// Full record: Fourier data plus the relation report.
    pub fn record(&self, cfg: &RunConfig) -> Result<ModulusRecord> {
        let h = cfg.sample_height;
        let n_max = cfg.nmax;
        let samples = (8 * n_max).max(64);
        let kind_up = self.upper_kind();
        let tr_up = self.transition(kind_up, h);
        let up_eval = |w: Complex64| tr_up.eval(w);
        let (c_up, alias, _) = if kind_up == TransitionKind::Inf {
            fourier_modulus_adaptive(&up_eval, tr_up.anchor_level, h, n_max, samples)?
        } else {
            let (c, a) = fourier_modulus(&up_eval, tr_up.anchor_level, n_max, samples)?;
            (c, a, tr_up.anchor_level.im)
        };

        let mut residuals = self.relation_report(cfg)?;

        // one-sidedness for the Inf kind: negative modes at noise level
        let c_inf: Vec<(f64, f64)> = c_up[n_max..].iter().map(|c| (c.re, c.im)).collect();
        let c_gate: Option<Vec<(f64, f64)>> = if kind_up == TransitionKind::Inf {
            let neg = c_up[..n_max].iter().fold(0.0f64, |m, c| m.max(c.norm()));
            residuals.insert("one_sidedness_neg_modes".into(), neg);
            None
        } else {
            Some(c_up.iter().map(|c| (c.re, c.im)).collect())
        };

        let mut c_zero = Vec::new();
        if !self.gate {
            let tr_zero = self.transition(TransitionKind::Zero, h);
            let zero_eval = |w: Complex64| tr_zero.eval(w);
            let (cz, _, _) =
                fourier_modulus_adaptive(&zero_eval, tr_zero.anchor_level, -h, n_max, samples)?;
            // the lower transition carries the modes n <= 0: store d_{-k} at
            // index k
            c_zero = (0..=n_max).map(|k| (cz[n_max - k].re, cz[n_max - k].im)).collect();
            let pos = cz[n_max + 1..].iter().fold(0.0f64, |m, c| m.max(c.norm()));
            residuals.insert("one_sidedness_zero_pos_modes".into(), pos);
            // c0_inf - c0_zero = -2 i pi b
            let c0_diff = (c_up[n_max] - cz[n_max] + 2.0 * I * PI * self.b).norm();
            residuals.insert("c0_inf_minus_c0_zero_plus_2ipib".into(), c0_diff);
        }

        residuals.insert(
            "im_c0_plus_pi_b".into(),
            (c_up[n_max].im + PI * self.b.re).abs(),
        );
        residuals.insert("abel_plus".into(), self.pair.plus.abel_residual);
        residuals.insert("abel_minus".into(), self.pair.minus.abel_residual);

        Ok(ModulusRecord {
            eps_re: self.lift.value().re,
            eps_im: self.lift.value().im,
            arg_lift: self.lift.theta,
            b_re: self.b.re,
            b_im: self.b.im,
            c_inf,
            c_zero,
            c_gate,
            sample_level: tr_up.anchor_level.im,
            alias_estimate: alias,
            residuals,
            normalization: self.pair.minus.normalization.clone(),
            failed: None,
        })
    }

    /// Residuals of the identities the transition maps satisfy.
    pub fn relation_report(&self, cfg: &RunConfig) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        let h = cfg.sample_height;
        let kind_up = self.upper_kind();
        let tr_up = self.transition(kind_up, h);

        // T1 commutation
        let mut t1 = 0.0f64;
        for j in 0..4 {
            let w = tr_up.anchor_level + Complex64::new(0.13 + j as f64 * 0.22, 0.4);
            let a = tr_up.eval(w + 1.0)?;
            let b = tr_up.eval(w)?;
            t1 = t1.max((a - b - 1.0).norm());
        }
        out.insert("t1_commutation".into(), t1);

        let stt = |w: Complex64| w.conj() + 0.5;

        if !self.gate {
            // for eps <= 0 (and the nearby rays at real negative):
            // Psi_inf . Sigma T_1/2 = Sigma T_1/2 . Psi_zero on samples
            if self.lift.is_real_negative() || self.lift.is_zero() {
                let tr_zero = self.transition(TransitionKind::Zero, h);
                let mut worst = 0.0f64;
                for j in 0..4 {
                    let w = tr_zero.anchor_level + Complex64::new(0.2 * j as f64, -0.3);
                    let lhs = tr_up.eval(stt(w))?;
                    let rhs = stt(tr_zero.eval(w)?);
                    worst = worst.max((lhs - rhs).norm());
                }
                out.insert("inf_zero_antiholomorphic_commutation".into(), worst);
            }
            // Lavaurs translation: first-return structure
            if self.lift.is_real_negative() {
                let alpha_p = self.pair.plus.chart.alpha_plus();
                let mut tl = Vec::new();
                for j in 0..4 {
                    let w = tr_up.anchor_level + Complex64::new(0.21 * j as f64, 0.6);
                    let p = self.pair.plus.inverse(w)?;
                    let q = self.pair.plus.lift_point(p.w - alpha_p)?;
                    let r = self.pair.plus.eval(q)?;
                    let psi_w = tr_up.eval(w)?;
                    tl.push(r - psi_w);
                }
                let mean = tl.iter().sum::<Complex64>() / (tl.len() as f64);
                let spread = tl.iter().fold(0.0f64, |m, v| m.max((v - mean).norm()));
                out.insert("lavaurs_translation_spread".into(), spread);
                let s = self.lift.sqrt();
                out.insert("lavaurs_value_vs_minus_ipi_sqrt".into(), (mean + I * PI / s).norm());
            }
        } else {
            // eps > 0: Psi_U . Sigma T_1/2 = Sigma T_1/2 . Psi_L
            let tr_low = self.transition(TransitionKind::GateLower, h);
            let mut worst = 0.0f64;
            for j in 0..4 {
                let w = tr_low.anchor_level + Complex64::new(0.25 * j as f64, 0.2);
                let lhs = tr_up.eval(stt(w))?;
                let rhs = stt(tr_low.eval(w)?);
                worst = worst.max((lhs - rhs).norm());
            }
            out.insert("gate_upper_lower_commutation".into(), worst);
            // alpha commutation of the Fatou coordinates
            let alpha = self.pair.plus.chart.alpha_plus();
            let mut ca = 0.0f64;
            for j in 0..3 {
                let w = self.pair.plus.domain.base + self.pair.plus.domain.dir * (j as f64 - 1.0);
                let p = self.pair.plus.lift_point(w)?;
                let v1 = self.pair.plus.eval(p)?;
                let p2 = LiftPoint { z: p.z, w: p.w + alpha };
                let v2 = self.pair.plus.eval(p2)?;
                ca = ca.max((v2 - v1 - alpha).norm());
            }
            out.insert("glutsyuk_alpha_commutation".into(), ca);
        }

        // antiholomorphic relation of the Fatou pair at real parameters
        if self.pair.plus.slice.has_f() && (self.lift.theta == 0.0 || self.lift.is_real_negative())
        {
            let mut worst = 0.0f64;
            for side in [Side::Plus, Side::Minus] {
                let fc = match side {
                    Side::Plus => &self.pair.plus,
                    Side::Minus => &self.pair.minus,
                };
                let chart_out = fc.chart.clone();
                for &t in &[-2.0, 2.5] {
                    let w = fc.domain.base + fc.domain.dir * t;
                    let p = fc.lift_point(w)?;
                    let v = fc.eval(p)?;
                    let q = f_lift(&fc.slice, &fc.chart, &chart_out, p)?;
                    let pv = fc.eval(q)?;
                    worst = worst.max((pv - stt(v)).norm());
                }
            }
            out.insert("fatou_antiholomorphic_relation".into(), worst);
        }
        Ok(out)
    }
}

/// Weak modulus: records over a real parameter grid.
pub fn weak_modulus(fam: &GermFamily, eps_grid: &[f64], cfg: &RunConfig) -> Result<ModulusData> {
    let records: Vec<ModulusRecord> = eps_grid
        .par_iter()
        .map(|&e| compute_record(fam, ParamLift::from_real(e), cfg))
        .collect();
    Ok(ModulusData {
        family: fam.label.clone(),
        normalization: "weak".into(),
        records,
    })
}

/// Strong modulus: records on sector rays of the lifted parameter.
pub fn strong_modulus(
    fam: &GermFamily,
    rays: &[f64],
    radii: &[f64],
    cfg: &RunConfig,
) -> Result<ModulusData> {
    let mut lifts = Vec::new();
    for &theta in rays {
        for &rho in radii {
            lifts.push(ParamLift::new(rho, theta));
        }
    }
    let records: Vec<ModulusRecord> =
        lifts.par_iter().map(|&l| compute_record(fam, l, cfg)).collect();
    Ok(ModulusData {
        family: fam.label.clone(),
        normalization: "strong".into(),
        records,
    })
}

fn compute_record(fam: &GermFamily, lift: ParamLift, cfg: &RunConfig) -> ModulusRecord {
    match record_workspace(fam, lift, cfg).and_then(|ws| ws.record(cfg)) {
        Ok(r) => r,
        Err(e) => ModulusRecord {
            eps_re: lift.value().re,
            eps_im: lift.value().im,
            arg_lift: lift.theta,
            b_re: f64::NAN,
            b_im: f64::NAN,
            c_inf: Vec::new(),
            c_zero: Vec::new(),
            c_gate: None,
            sample_level: f64::NAN,
            alias_estimate: f64::NAN,
            residuals: BTreeMap::new(),
            normalization: String::new(),
            failed: Some(e.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series1::Series1;

    fn cfg() -> RunConfig {
        RunConfig::default()
    }

    fn model(b: f64) -> GermFamily {
        GermFamily::model_antiholomorphic(Series1::constant(Complex64::new(b, 0.0), 6), 0.5, 0.05)
    }

    fn flagship_prepared() -> GermFamily {
        let b0 = Series1::constant(Complex64::new(0.5, 0.0), 6);
        let b1 = Series1::constant(Complex64::new(0.25, 0.0), 6);
        let q = crate::series::SeriesFamily::zero(12, 6, false);
        let f = GermFamily::from_prepared_parts(&b0, &b1, &q, 12, 6, 0.5, 0.05);
        crate::prepare::prepare(&f, &cfg()).unwrap().prepared
    }

    #[test]
    fn fourier_of_synthetic_maps() {
        // Psi = T_c: c0 = c, others at noise level
        let c = Complex64::new(0.37, -0.8);
        let psi = move |w: Complex64| Ok(w + c);
        let (coef, _) =
            fourier_modulus(&psi, Complex64::new(0.0, 1.5), 8, 64).unwrap();
        assert!((coef[8] - c).norm() < 1e-12);
        for (k, v) in coef.iter().enumerate() {
            if k != 8 {
                assert!(v.norm() == 0.0, "mode {k} should be floored to zero");
            }
        }
        // Psi = W + 0.1 e^{2 i pi W}: c1 = 0.1 within 1e-10
        let psi2 = |w: Complex64| Ok(w + 0.1 * (2.0 * PI * I * w).exp());
        let (coef2, alias) = fourier_modulus(&psi2, Complex64::new(0.3, 1.5), 8, 64).unwrap();
        assert!((coef2[9] - Complex64::new(0.1, 0.0)).norm() < 1e-10, "{}", coef2[9]);
        assert!(alias < 1e-9);
    }

    #[test]
    fn model_transitions_are_pure_translations() {
        let m = model(0.3);
        for &eps in &[-0.01f64, 0.01] {
            let ws = record_workspace(&m, ParamLift::from_real(eps), &cfg()).unwrap();
            let rec = ws.record(&cfg()).unwrap();
            assert!(rec.failed.is_none());
            // c0 = -i pi b, everything else at noise level
            let c = rec.c_inf_complex();
            assert!((c[0] + I * PI * 0.3).norm() < 1e-8, "eps={eps}: c0={}", c[0]);
            for (n, v) in c.iter().enumerate().skip(1) {
                assert!(v.norm() < 1e-8, "eps={eps} mode {n}: {}", v.norm());
            }
        }
    }

    #[test]
    fn lavaurs_record_relations() {
        let f = flagship_prepared();
        let ws = record_workspace(&f, ParamLift::from_real(-0.01), &cfg()).unwrap();
        let rec = ws.record(&cfg()).unwrap();
        assert!(rec.failed.is_none());
        let r = &rec.residuals;
        assert!(r["t1_commutation"] < 1e-9, "t1 {}", r["t1_commutation"]);
        assert!(r["c0_inf_minus_c0_zero_plus_2ipib"] < 1e-6, "{}", r["c0_inf_minus_c0_zero_plus_2ipib"]);
        assert!(r["im_c0_plus_pi_b"] < 1e-6);
        assert!(r["one_sidedness_neg_modes"] < 1e-9);
        assert!(r["inf_zero_antiholomorphic_commutation"] < 1e-6);
        assert!(r["lavaurs_translation_spread"] < 1e-6);
        assert!(r["lavaurs_value_vs_minus_ipi_sqrt"] < 1e-6);
        assert!(r["fatou_antiholomorphic_relation"] < 1e-7);
        // the c0 normalization pinned the constant term
        let c = rec.c_inf_complex();
        assert!((c[0] - (-I * PI * rec.b())).norm() < 1e-9);
    }

    #[test]
    fn glutsyuk_record_relations() {
        let f = flagship_prepared();
        let ws = record_workspace(&f, ParamLift::from_real(0.01), &cfg()).unwrap();
        let rec = ws.record(&cfg()).unwrap();
        assert!(rec.failed.is_none(), "{:?}", rec.failed);
        let r = &rec.residuals;
        assert!(r["t1_commutation"] < 1e-9, "t1 {}", r["t1_commutation"]);
        assert!(r["gate_upper_lower_commutation"] < 1e-7, "{}", r["gate_upper_lower_commutation"]);
        assert!(r["glutsyuk_alpha_commutation"] < 1e-7);
        assert!(r["fatou_antiholomorphic_relation"] < 1e-7, "{}", r["fatou_antiholomorphic_relation"]);
    }

    #[test]
    fn seam_consistency_between_weak_and_strong_path() {
        // records at arg = pi coincide with the real-negative ones
        let f = flagship_prepared();
        let w1 = record_workspace(&f, ParamLift::from_real(-0.01), &cfg()).unwrap();
        let w2 = record_workspace(&f, ParamLift::new(0.01, PI), &cfg()).unwrap();
        let r1 = w1.record(&cfg()).unwrap();
        let r2 = w2.record(&cfg()).unwrap();
        let c1 = r1.c_inf_complex();
        let c2 = r2.c_inf_complex();
        for n in 0..4 {
            let scale = c1[n].norm().max(1.0);
            assert!((c1[n] - c2[n]).norm() / scale < 1e-7, "mode {n}: {} vs {}", c1[n], c2[n]);
        }
    }
}
