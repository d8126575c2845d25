//! ISTA, ADMM, and the proximal method of multipliers on one LASSO
//! instance, `min ½‖Ax − b‖² + γ‖x‖₁`.
//!
//! All three land on the same objective value; they differ in how many
//! iterations of what cost they take to get there. ISTA does one cheap
//! prox-gradient step per iteration, ADMM alternates an inner smooth solve
//! with a prox and a dual update at fixed penalty, and the multiplier
//! method drives its penalty to zero across a handful of outer stages.
//!
//! Run with `cargo run --example lasso_comparison`.

use nalgebra::DVector;
use proxal::baselines::{admm_solve, ista_solve, AdmmOptions, StepRule};
use proxal::cli::{generate_lasso, lasso_problem};
use proxal::mm::{mm_solve, MmOptions};

fn main() {
    let (a, b) = generate_lasso(42, 40, 20);
    let gamma = 0.1;
    let problem = lasso_problem(&a, &b, gamma);
    let n = a.ncols();

    let ista = ista_solve(&a, &b, gamma, StepRule::Backtracking, 1e-10, 200_000);
    assert!(ista.converged);

    let admm = admm_solve(
        &problem,
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
        &AdmmOptions::default(),
    )
    .unwrap();

    let mm = mm_solve(&problem, DVector::zeros(n), DVector::zeros(n), &MmOptions::default())
        .unwrap();

    println!("LASSO, n = {n}, rows = {}, gamma = {gamma}", a.nrows());
    println!();
    println!("{:<8} {:>8} {:>12} {:>18} {:>12}", "solver", "outer", "inner total", "objective", "kkt max");
    let kkt_ista = {
        let y = -(a.transpose() * (&a * &ista.x - &b));
        problem.kkt_residuals(&ista.x, &y).max()
    };
    println!(
        "{:<8} {:>8} {:>12} {:>18.12} {:>12.2e}",
        "ista",
        ista.iters,
        ista.iters,
        problem.objective(&ista.x),
        kkt_ista
    );
    println!(
        "{:<8} {:>8} {:>12} {:>18.12} {:>12.2e}",
        "admm",
        admm.outer_iters,
        admm.total_inner_iters,
        problem.objective(&admm.x),
        admm.kkt.max()
    );
    println!(
        "{:<8} {:>8} {:>12} {:>18.12} {:>12.2e}",
        "mm",
        mm.outer_iters,
        mm.total_inner_iters,
        problem.objective(&mm.x),
        mm.kkt.max()
    );

    let nonzero = mm.x.iter().filter(|&&xi| xi.abs() > 1e-8).count();
    println!();
    println!("support size at the solution: {nonzero} of {n}");
}
