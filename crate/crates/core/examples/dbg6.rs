use germlab::chart::ParamLift;
use germlab::config::RunConfig;
use germlab::modulus::*;
use germlab::series1::Series1;
use germlab::series::SeriesFamily;
use germlab::GermFamily;
use num_complex::Complex64;

fn main() {
    let cfg = RunConfig::default();
    let b0 = Series1::constant(Complex64::new(0.5, 0.0), 6);
    let b1 = Series1::constant(Complex64::new(0.25, 0.0), 6);
    let q = SeriesFamily::zero(12, 6, false);
    let f0 = GermFamily::from_prepared_parts(&b0, &b1, &q, 12, 6, 0.5, 0.05);
    let f = germlab::prepare::prepare(&f0, &cfg).unwrap().prepared;
    let wf = record_workspace(&f, ParamLift::from_real(-0.01), &cfg).unwrap();
    let stt = |w: Complex64| w.conj() + 0.5;
    let tr_up = wf.transition(wf.upper_kind(), 1.5);
    let tr_zero = wf.transition(TransitionKind::Zero, 1.5);
    let dom = &wf.pair.plus.domain;
    println!("hole_top={:.3} hole_bottom={:.3}", dom.hole_top, dom.hole_bottom);
    for &h in &[0.3f64, 0.8, 1.5, 2.5] {
        let w = Complex64::new(dom.hole_center.re + 0.23, dom.hole_bottom - h);
        match (tr_up.eval(stt(w)), tr_zero.eval(w)) {
            (Ok(lhs), Ok(rz)) => {
                let rhs = stt(rz);
                println!("h={h}: pointwise residual {:.3e}", (lhs - rhs).norm());
            }
            (a, b) => println!("h={h}: errs {:?} {:?}", a.err().map(|e| e.to_string()), b.err().map(|e| e.to_string())),
        }
    }
}
