use pacbound::linalg::{Matrix, RngSeed};
use pacbound::verify::{closed_form_min_d, d_objective, oracle_min_d};
use rand::Rng;

fn main() {
    let mut rng = RngSeed(81).rng();
    let a = Matrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
    let eta2 = 0.9;
    // manual GD with the noise-tolerant acceptance, tracing gradient norms
    let n = 5;
    let s = a.transpose().matmul(&a).unwrap();
    let mut r = Matrix::identity(n);
    let mut alpha = 0.1f64;
    let obj = |r: &Matrix| d_objective(&a, eta2, r).unwrap_or(f64::INFINITY);
    let mut o = obj(&r);
    for it in 0..30000 {
        let rinv = pacbound::linalg::spd_inverse(&r).unwrap();
        let mut g = s.scale(eta2);
        for i in 0..n { for j in 0..n {
            let v = g.at(i,j) + if i==j {1.0} else {0.0} - rinv.at(i,j);
            g.set(i,j,v);
        }}
        let gn = g.frobenius_norm();
        if it % 1000 == 0 { println!("it {it}: obj {o:.12} gn {gn:.3e} alpha {alpha:.3e}"); }
        if gn < 1e-10 { println!("converged at {it}"); break; }
        let noise = 1e-12 * (1.0 + o.abs());
        let mut ok = false;
        for _ in 0..60 {
            let cand_raw = r.sub(&g.scale(alpha)).unwrap();
            let cand = Matrix::from_fn(n,n,|i,j| 0.5*(cand_raw.at(i,j)+cand_raw.at(j,i)));
            let co = obj(&cand);
            if co <= o + noise { r = cand; o = co.min(o); alpha = (alpha*1.5).min(1.0); ok = true; break; }
            alpha *= 0.5;
        }
        if !ok { println!("stall at {it}, gn {gn:.3e}"); break; }
    }
    let closed = closed_form_min_d(&a, eta2).unwrap();
    println!("diff {}", r.sub(&closed).unwrap().frobenius_norm());
    match oracle_min_d(&a, eta2, 50_000, 1e-10) {
        Ok(rr) => println!("oracle ok diff {}", rr.sub(&closed).unwrap().frobenius_norm()),
        Err(e) => println!("oracle err {e}"),
    }
}
