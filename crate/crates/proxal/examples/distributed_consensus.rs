//! Distributed consensus optimization and the EXTRA equivalence.
//!
//! Agents on a cycle each hold a private scalar objective `½(xᵢ − bᵢ)²`
//! and must agree on one value. Discretizing the saddle flow of the
//! consensus-constrained problem gives a protocol where each agent mixes
//! with its neighbors and follows its own gradient; with step size matched
//! as `β = 1/(2αμ)` and mixing matrix `W = I − (α/μ)L`, that protocol is
//! the EXTRA recursion, exactly, not asymptotically.
//!
//! Run with `cargo run --example distributed_consensus`.

use nalgebra::{DMatrix, DVector};
use proxal::flow::{extra_step, network_flow_step, ExtraHistory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let n = 10;
    // Directed cycle incidence; its Gram matrix is the cycle Laplacian.
    let mut t = DMatrix::zeros(n, n);
    for e in 0..n - 1 {
        t[(e, e)] = 1.0;
        t[(e, e + 1)] = -1.0;
    }
    t[(n - 1, n - 1)] = 1.0;
    t[(n - 1, 0)] = -1.0;
    let laplacian = t.tr_mul(&t);

    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let b = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let consensus_value = b.mean();

    let (alpha, mu) = (0.05, 1.0);
    let beta = 1.0 / (2.0 * alpha * mu);
    let w_mix = DMatrix::identity(n, n) - &laplacian * (alpha / mu);

    let grad_agent = |i: usize, xi: f64| xi - b[i];
    let grad_vec = |x: &DVector<f64>| x - &b;

    let x0 = DVector::from_fn(n, |i, _| (0.3 * i as f64).cos());
    let mut x_net = x0.clone();
    let mut y_net = DVector::zeros(n);
    let mut x_extra = x0;
    let mut history = ExtraHistory::new(n);

    println!("{:>5} {:>16} {:>16} {:>12}", "step", "spread", "consensus err", "net vs extra");
    let mut max_dev: f64 = 0.0;
    for step in 1..=400 {
        let (xn, yn) =
            network_flow_step(&grad_agent, &laplacian, &x_net, &y_net, mu, beta, alpha);
        x_net = xn;
        y_net = yn;
        x_extra = extra_step(&w_mix, &grad_vec, alpha, &x_extra, &mut history);
        max_dev = max_dev.max((&x_net - &x_extra).norm());

        if step % 80 == 0 || step == 1 {
            let spread = x_net.max() - x_net.min();
            let err = (x_net.add_scalar(-consensus_value)).norm();
            println!("{step:>5} {spread:>16.6e} {err:>16.6e} {max_dev:>12.2e}");
        }
    }

    println!();
    println!("consensus target (mean of b) = {consensus_value:.6}");
    println!("max deviation between the two recursions = {max_dev:.2e}");
    assert!(max_dev < 1e-10, "the recursions should coincide to round-off");
}
