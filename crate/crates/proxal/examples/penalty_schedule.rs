//! The multiplier method's outer-loop bookkeeping.
//!
//! After each outer stage the feasibility and stationarity targets `η`,
//! `ω` that the inner solver must meet tighten; the penalty `μ` shrinks
//! only when the constraint residual misses its target, and every sequence
//! is floored at its final value. The example prints the recorded schedule
//! of one solve so the coupling between the three sequences is visible.
//!
//! Run with `cargo run --example penalty_schedule`.

use nalgebra::DVector;
use proxal::cli::{generate_lasso, lasso_problem};
use proxal::mm::{mm_solve, MmOptions};

fn main() {
    let (a, b) = generate_lasso(7, 30, 15);
    let problem = lasso_problem(&a, &b, 0.1);
    let opts = MmOptions::default();

    let report =
        mm_solve(&problem, DVector::zeros(15), DVector::zeros(15), &opts).unwrap();

    println!(
        "mu0 = {}, shrink = {}, eta_final = {:.0e}, omega_final = {:.0e}",
        opts.mu0, opts.mu_shrink, opts.eta_final, opts.omega_final
    );
    println!();
    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>7} {:>14} {:>12}",
        "stage", "mu", "eta", "omega", "inner", "primal res", "grad norm"
    );
    for rec in &report.history {
        println!(
            "{:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>7} {:>14.4e} {:>12.4e}",
            rec.iter, rec.mu, rec.eta, rec.omega, rec.inner_iters, rec.primal_res, rec.grad_norm
        );
    }

    println!();
    println!(
        "converged = {}, outer = {}, inner total = {}, final mu = {:.2e}",
        report.converged, report.outer_iters, report.total_inner_iters, report.mu_final
    );
    println!(
        "KKT residuals: grad {:.2e}, feasibility {:.2e}, subgradient {:.2e}",
        report.kkt.grad, report.kkt.feas, report.kkt.subgrad
    );
}
