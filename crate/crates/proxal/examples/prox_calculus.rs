//! Tour of the regularizer toolbox: proximal operators, Moreau envelopes,
//! and the envelope gradient identity.
//!
//! For each kind the example prints `prox_{μg}(v)` and `M_{μg}(v)` on a
//! small vector and then verifies two identities numerically:
//! `∇M(v) = (v − prox(v))/μ` against central differences, and the envelope
//! sandwich `M_{μg}(v) ≤ g(v)` with equality at fixed points of the prox.
//!
//! Run with `cargo run --example prox_calculus`.

use nalgebra::DVector;
use proxal::regularizer::Regularizer;

fn central_diff(g: &Regularizer, v: &DVector<f64>, mu: f64, h: f64) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| {
        let mut hi = v.clone();
        let mut lo = v.clone();
        hi[i] += h;
        lo[i] -= h;
        (g.moreau(&hi, mu) - g.moreau(&lo, mu)) / (2.0 * h)
    })
}

fn main() {
    let v = DVector::from_vec(vec![-1.8, -0.3, 0.0, 0.4, 2.5]);
    let mu = 0.7;

    let kinds: Vec<(&str, Regularizer)> = vec![
        ("l1(0.5)", Regularizer::l1(0.5)),
        ("shifted_l1_nonneg(0.5)", Regularizer::shifted_l1_nonneg(0.5)),
        ("box_indicator(-1, 1)", Regularizer::box_indicator(-1.0, 1.0)),
        (
            "pattern_nonneg([t,t,f,t,f])",
            Regularizer::pattern_nonneg(vec![true, true, false, true, false]),
        ),
        ("zero_set", Regularizer::zero_set()),
        (
            "sum_separable(l1 | box)",
            Regularizer::sum_separable(vec![
                (Regularizer::l1(0.5), 0..2),
                (Regularizer::box_indicator(0.0, 1.0), 2..5),
            ]),
        ),
    ];

    println!("v = {:?},  mu = {mu}", v.as_slice());
    println!();

    for (name, g) in &kinds {
        let p = g.prox(&v, mu);
        let env = g.moreau(&v, mu);
        let grad = g.moreau_grad(&v, mu);
        let fd = central_diff(g, &v, mu, 1e-6);
        let grad_err = (&grad - &fd).amax();

        // The envelope never exceeds the function it smooths, and the
        // infimum defining it is attained at the prox point.
        let g_at_v = g.value(&v);
        let attained = g.value(&p) + (&p - &v).norm_squared() / (2.0 * mu);

        println!("{name}");
        println!("  prox      = {:?}", p.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>());
        println!("  envelope  = {env:.6}  (g(v) = {g_at_v:.6})");
        println!("  grad err vs central differences = {grad_err:.2e}");
        assert!(grad_err < 1e-6, "gradient identity violated for {name}");
        assert!(env <= g_at_v + 1e-12, "envelope exceeds g for {name}");
        assert!((env - attained).abs() < 1e-12, "infimum not attained at the prox for {name}");
        println!();
    }

    println!("all identities verified");
}
