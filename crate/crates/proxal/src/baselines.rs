//! Baseline solvers: ADMM on the general composite problem and ISTA for
//! `ℓ₁`-regularized least squares.
//!
//! Both serve as independent cross-checks for the multiplier method. ADMM
//! alternates an inexact x-minimization of the augmented Lagrangian, an exact
//! z-update (a single prox evaluation), and a multiplier ascent step with
//! step size `1/μ`. The optional adaptive mode rebalances `μ` when the primal
//! and dual residuals drift apart by more than a fixed ratio.

use nalgebra::{DMatrix, DVector};
use std::time::Instant;

use crate::mm::{
    line_search_minimize, ArmijoOptions, InnerMethod, OuterRecord, SolveReport, SolverError,
};
use crate::problem::CompositeProblem;
use crate::regularizer::soft_threshold;

/// Options for [`admm_solve`].
///
/// The penalty convention matches the rest of the crate: the quadratic term
/// is `‖Tx − z‖²/(2μ)`, so a *smaller* `μ` means a *stronger* penalty. The
/// rescale factors are named for their effect on the penalty: when the primal
/// residual dominates, the penalty is increased (`μ` divided by `tau_incr`);
/// when the dual residual dominates, it is decreased (`μ` multiplied by
/// `tau_decr`).
#[derive(Clone, Debug)]
pub struct AdmmOptions {
    pub mu: f64,
    /// Enables residual balancing.
    pub adaptive: bool,
    pub tau_incr: f64,
    pub tau_decr: f64,
    /// Rescale only when one residual exceeds the other by this factor.
    pub mu_ratio_threshold: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    /// Line-search method for the x-update, which is solved to gradient norm
    /// `tol_primal / 10`.
    pub inner: InnerMethod,
    pub max_inner: usize,
    pub armijo: ArmijoOptions,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            mu: 1.0,
            adaptive: false,
            tau_incr: 2.0,
            tau_decr: 2.0,
            mu_ratio_threshold: 10.0,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            max_iter: 5000,
            inner: InnerMethod::default(),
            max_inner: 5000,
            armijo: ArmijoOptions::default(),
        }
    }
}

/// Runs ADMM on `min f(x) + g(z)` subject to `Tx = z` from `(x0, z0, y0)`.
///
/// Per sweep: `x ← argmin f(x) + ⟨y, Tx − z⟩ + ‖Tx − z‖²/(2μ)` (inexact,
/// warm-started), `z ← prox_{μg}(Tx + μy)`, `y ← y + (Tx − z)/μ`. Stops when
/// the primal residual `‖Tx − z‖` and the dual residual `‖Tᵀ(z⁺ − z)/μ‖`
/// fall below their tolerances; an exhausted budget returns the last iterate
/// with `converged = false`, mirroring [`crate::mm::mm_solve`].
///
/// In the report's history, `primal_res`/`grad_norm` hold the primal/dual
/// residuals, `eta`/`omega` the corresponding tolerances, and `accepted`
/// means `μ` was not rescaled that sweep. The multiplier `y` needs no
/// adjustment on rescale because it is the unscaled dual variable.
pub fn admm_solve(
    problem: &CompositeProblem,
    x0: DVector<f64>,
    z0: DVector<f64>,
    y0: DVector<f64>,
    opts: &AdmmOptions,
) -> Result<SolveReport, SolverError> {
    validate_admm_options(opts)?;
    let mut x = x0;
    let mut z = z0;
    let mut y = y0;
    let mut mu = opts.mu;
    let tol_x = opts.tol_primal / 10.0;

    let mut history = Vec::new();
    let mut total_inner = 0;
    let mut converged = false;

    for iter in 0..opts.max_iter {
        let clock = Instant::now();
        let mu_used = mu;

        let inner = {
            let value = |x: &DVector<f64>| {
                let r = problem.t.apply(x) - &z;
                problem.f.value(x) + y.dot(&r) + r.norm_squared() / (2.0 * mu)
            };
            let value_grad = |x: &DVector<f64>| {
                let r = problem.t.apply(x) - &z;
                let val = problem.f.value(x) + y.dot(&r) + r.norm_squared() / (2.0 * mu);
                let grad = problem.f.gradient(x) + problem.t.adjoint(&(&y + &r / mu));
                (val, grad)
            };
            line_search_minimize(&value, &value_grad, x, tol_x, opts.inner, opts.max_inner, &opts.armijo)
        };
        x = inner.x;
        total_inner += inner.iters;

        let tx = problem.t.apply(&x);
        let z_next = problem.g.prox(&(&tx + &y * mu), mu);
        let primal = (&tx - &z_next).norm();
        let dual = (problem.t.adjoint(&(&z_next - &z)) / mu).norm();
        y += (&tx - &z_next) / mu;
        z = z_next;

        let done = primal <= opts.tol_primal && dual <= opts.tol_dual;
        let mut rescaled = false;
        if opts.adaptive && !done {
            if primal > opts.mu_ratio_threshold * dual {
                mu /= opts.tau_incr;
                rescaled = true;
            } else if dual > opts.mu_ratio_threshold * primal {
                mu *= opts.tau_decr;
                rescaled = true;
            }
        }

        history.push(OuterRecord {
            iter,
            mu: mu_used,
            eta: opts.tol_primal,
            omega: opts.tol_dual,
            primal_res: primal,
            grad_norm: dual,
            inner_iters: inner.iters,
            accepted: !rescaled,
            stalled: inner.stalled,
            wall_time: clock.elapsed().as_secs_f64(),
        });

        if done {
            converged = true;
            break;
        }
    }

    let kkt = problem.kkt_residuals(&x, &y);
    Ok(SolveReport {
        x,
        y,
        mu_final: mu,
        converged,
        outer_iters: history.len(),
        total_inner_iters: total_inner,
        kkt,
        history,
    })
}

fn validate_admm_options(opts: &AdmmOptions) -> Result<(), SolverError> {
    if !(opts.mu > 0.0) {
        return Err(SolverError::InvalidOptions("mu must be positive".into()));
    }
    if !(opts.tau_incr > 1.0 && opts.tau_decr > 1.0 && opts.mu_ratio_threshold > 1.0) {
        return Err(SolverError::InvalidOptions(
            "rescale factors and ratio threshold must exceed 1".into(),
        ));
    }
    if !(opts.tol_primal > 0.0 && opts.tol_dual > 0.0) {
        return Err(SolverError::InvalidOptions("tolerances must be positive".into()));
    }
    if opts.inner == InnerMethod::ProximalGradient {
        return Err(SolverError::InvalidOptions(
            "the ADMM x-step is smooth; choose a line-search method".into(),
        ));
    }
    Ok(())
}

/// Step-size rule for [`ista_solve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepRule {
    /// Fixed `α = 1/‖AᵀA‖₂`, computed from the largest singular value of `A`.
    Fixed,
    /// Halve `α` until the candidate satisfies the quadratic upper bound of
    /// the least-squares term; the accepted `α` carries over to later steps.
    Backtracking,
}

/// Result of an ISTA run.
pub struct IstaReport {
    pub x: DVector<f64>,
    pub iters: usize,
    pub converged: bool,
}

/// Iterative soft-thresholding for `min ½‖Ax − b‖² + γ‖x‖₁`, started at the
/// origin: `x⁺ = 𝒮_{γα}(x − α Aᵀ(Ax − b))`. Stops when the prox-gradient
/// step length `‖x⁺ − x‖/α` drops to `tol`; an exhausted budget returns the
/// last iterate with `converged = false`.
pub fn ista_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    gamma: f64,
    step: StepRule,
    tol: f64,
    max_iter: usize,
) -> IstaReport {
    assert!(gamma > 0.0, "gamma must be positive");
    assert_eq!(a.nrows(), b.len(), "A and b must have matching row counts");

    let fixed_alpha = match step {
        StepRule::Fixed => {
            let sigma_max = a
                .clone()
                .singular_values()
                .iter()
                .fold(0.0_f64, |m, &s| m.max(s));
            assert!(sigma_max > 0.0, "fixed step rule needs a nonzero matrix");
            Some(1.0 / (sigma_max * sigma_max))
        }
        StepRule::Backtracking => None,
    };
    let mut alpha = fixed_alpha.unwrap_or(1.0);

    let least_squares = |x: &DVector<f64>| 0.5 * (a * x - b).norm_squared();

    let mut x = DVector::zeros(a.ncols());
    for iter in 0..max_iter {
        let residual = a * &x - b;
        let grad = a.tr_mul(&residual);
        let fx = 0.5 * residual.norm_squared();
        // Near a solution the predicted decrease drops below the rounding
        // noise of the function values, so the upper-bound test needs this
        // slack; without it the step size collapses to zero on spurious
        // rejections and the run stops short of the requested tolerance.
        let slack = 1e-12 * (1.0 + fx.abs());

        let x_next = loop {
            let w = &x - &grad * alpha;
            let candidate = w.map(|wi| soft_threshold(wi, gamma * alpha));
            if fixed_alpha.is_some() {
                break candidate;
            }
            let d = &candidate - &x;
            let bound = fx + grad.dot(&d) + d.norm_squared() / (2.0 * alpha);
            if least_squares(&candidate) <= bound + slack {
                break candidate;
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                return IstaReport { x, iters: iter, converged: false };
            }
        };

        let step_len = (&x_next - &x).norm() / alpha;
        x = x_next;
        if step_len <= tol {
            return IstaReport { x, iters: iter + 1, converged: true };
        }
    }
    IstaReport { x, iters: max_iter, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mm::{mm_solve, MmOptions};
    use crate::problem::{LinearMap, SmoothObjective};
    use crate::regularizer::Regularizer;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_lasso(seed: u64, rows: usize, cols: usize) -> (DMatrix<f64>, DVector<f64>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
            + DMatrix::identity(rows, cols);
        let b = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        let gamma = 0.1 * a.tr_mul(&b).amax();
        (a, b, gamma)
    }

    fn lasso_problem(a: &DMatrix<f64>, b: &DVector<f64>, gamma: f64) -> CompositeProblem {
        CompositeProblem::new(
            SmoothObjective::least_squares(a.clone(), b.clone()),
            Regularizer::l1(gamma),
            LinearMap::identity(a.ncols()),
        )
        .unwrap()
    }

    #[test]
    fn ista_zero_data_returns_origin() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::zeros(3);
        let report = ista_solve(&a, &b, 0.5, StepRule::Fixed, 1e-12, 100);
        assert!(report.converged);
        assert_eq!(report.x, DVector::zeros(2));
    }

    #[test]
    fn ista_large_gamma_returns_origin() {
        let (a, b, _) = random_lasso(7, 6, 4);
        let gamma = a.tr_mul(&b).amax();
        let report = ista_solve(&a, &b, gamma, StepRule::Fixed, 1e-12, 100);
        assert!(report.converged);
        assert_eq!(report.x, DVector::zeros(4));
    }

    #[test]
    fn ista_step_rules_agree() {
        let (a, b, gamma) = random_lasso(11, 8, 5);
        let fixed = ista_solve(&a, &b, gamma, StepRule::Fixed, 1e-11, 200_000);
        let back = ista_solve(&a, &b, gamma, StepRule::Backtracking, 1e-11, 200_000);
        assert!(fixed.converged && back.converged);
        assert!((&fixed.x - &back.x).norm() <= 1e-8, "step rules diverged");
    }

    #[test]
    fn ista_solution_satisfies_kkt() {
        let (a, b, gamma) = random_lasso(3, 8, 5);
        let report = ista_solve(&a, &b, gamma, StepRule::Fixed, 1e-10, 500_000);
        assert!(report.converged);
        let problem = lasso_problem(&a, &b, gamma);
        // The natural multiplier for T = I is y = −∇f(x*).
        let y = -a.tr_mul(&(&a * &report.x - &b));
        let kkt = problem.kkt_residuals(&report.x, &y);
        assert!(kkt.max() <= 1e-8, "kkt residuals {:?}", kkt);
    }

    #[test]
    fn admm_z_and_y_steps_compose_as_soft_threshold() {
        let (a, b, gamma) = random_lasso(19, 6, 4);
        let problem = lasso_problem(&a, &b, gamma);
        let mu = 0.7;
        let y0 = DVector::from_fn(4, |i, _| 0.1 * (i as f64 + 1.0));
        let opts = AdmmOptions { mu, max_iter: 1, ..AdmmOptions::default() };
        let report =
            admm_solve(&problem, DVector::zeros(4), DVector::zeros(4), y0.clone(), &opts).unwrap();

        // One sweep with T = I leaves z recoverable from the multiplier
        // update: z¹ = x¹ − μ(y¹ − y⁰), and z¹ must be the soft-threshold
        // of x¹ + μy⁰ at level γμ.
        let z = &report.x - (&report.y - &y0) * mu;
        let v = &report.x + &y0 * mu;
        let expected = v.map(|vi| soft_threshold(vi, gamma * mu));
        assert_relative_eq!(z, expected, epsilon = 1e-12);
    }

    #[test]
    fn admm_started_at_optimum_stops_in_one_sweep() {
        let (a, b, gamma) = random_lasso(29, 8, 5);
        let problem = lasso_problem(&a, &b, gamma);
        let oracle = ista_solve(&a, &b, gamma, StepRule::Fixed, 1e-12, 500_000);
        assert!(oracle.converged);
        let x_star = oracle.x;
        let y_star = -a.tr_mul(&(&a * &x_star - &b));

        let opts = AdmmOptions { mu: 0.5, adaptive: true, ..AdmmOptions::default() };
        let report =
            admm_solve(&problem, x_star.clone(), x_star.clone(), y_star, &opts).unwrap();
        assert!(report.converged);
        assert_eq!(report.outer_iters, 1);
        assert!(report.history.iter().all(|r| r.accepted), "no rescale at a fixed point");
        assert_relative_eq!(report.mu_final, opts.mu);
        assert!((&report.x - &x_star).norm() <= 1e-9);
    }

    #[test]
    fn admm_agrees_with_mm_and_ista_on_lasso() {
        let (a, b, gamma) = random_lasso(41, 12, 10);
        let problem = lasso_problem(&a, &b, gamma);
        let n = a.ncols();

        let oracle = ista_solve(&a, &b, gamma, StepRule::Fixed, 1e-10, 500_000);
        assert!(oracle.converged);
        let mm = mm_solve(&problem, DVector::zeros(n), DVector::zeros(n), &MmOptions::default())
            .unwrap();
        assert!(mm.converged);
        let admm = admm_solve(
            &problem,
            DVector::zeros(n),
            DVector::zeros(n),
            DVector::zeros(n),
            &AdmmOptions::default(),
        )
        .unwrap();
        assert!(admm.converged);

        assert!((&admm.x - &oracle.x).norm() <= 1e-5);
        assert!((&mm.x - &oracle.x).norm() <= 1e-5);
        let f_star = problem.objective(&oracle.x);
        for f in [problem.objective(&admm.x), problem.objective(&mm.x)] {
            assert!((f - f_star).abs() <= 1e-6 * f_star.abs().max(1.0));
        }
    }

    #[test]
    fn admm_handles_nondiagonal_map_with_box_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let n = 3;
        let m = 4;
        let h = {
            let s = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            &s * s.transpose() + DMatrix::identity(n, n) * 2.0
        };
        let q = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let t = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let problem = CompositeProblem::new(
            SmoothObjective::quadratic(h, q),
            Regularizer::box_indicator(-0.5, 0.5),
            LinearMap::new(t),
        )
        .unwrap();

        let admm = admm_solve(
            &problem,
            DVector::zeros(n),
            DVector::zeros(m),
            DVector::zeros(m),
            &AdmmOptions::default(),
        )
        .unwrap();
        let mm = mm_solve(&problem, DVector::zeros(n), DVector::zeros(m), &MmOptions::default())
            .unwrap();
        assert!(admm.converged && mm.converged);
        assert!((&admm.x - &mm.x).norm() <= 1e-4, "solvers disagree");
        assert!(problem.t.apply(&admm.x).amax() <= 0.5 + 1e-6);
        assert!(admm.kkt.max() <= 1e-5, "kkt residuals {:?}", admm.kkt);
    }

    #[test]
    fn admm_tail_primal_residuals_nonincreasing() {
        let (a, b, gamma) = random_lasso(61, 10, 8);
        let problem = lasso_problem(&a, &b, gamma);
        let opts = AdmmOptions { tol_primal: 1e-8, tol_dual: 1e-8, ..AdmmOptions::default() };
        let report = admm_solve(
            &problem,
            DVector::zeros(8),
            DVector::zeros(8),
            DVector::zeros(8),
            &opts,
        )
        .unwrap();
        assert!(report.converged);
        let residuals: Vec<f64> = report.history.iter().map(|r| r.primal_res).collect();
        let tail_start = residuals.len() - residuals.len() / 4;
        for w in residuals[tail_start..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "primal residual increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn admm_adaptive_rebalances_unbalanced_residuals() {
        let (a, b, gamma) = random_lasso(73, 10, 8);
        let problem = lasso_problem(&a, &b, gamma);
        // A penalty this weak leaves the primal residual dominant, so the
        // balancing rule must strengthen it along the way.
        let opts = AdmmOptions { mu: 100.0, adaptive: true, ..AdmmOptions::default() };
        let report = admm_solve(
            &problem,
            DVector::zeros(8),
            DVector::zeros(8),
            DVector::zeros(8),
            &opts,
        )
        .unwrap();
        assert!(report.converged);
        assert!(report.history.iter().any(|r| !r.accepted), "expected at least one rescale");
        assert!(report.mu_final < opts.mu);

        let fixed = admm_solve(
            &problem,
            DVector::zeros(8),
            DVector::zeros(8),
            DVector::zeros(8),
            &AdmmOptions { mu: 100.0, ..AdmmOptions::default() },
        )
        .unwrap();
        assert!(
            report.outer_iters < fixed.outer_iters,
            "balancing should beat the mistuned fixed penalty ({} vs {})",
            report.outer_iters,
            fixed.outer_iters
        );
    }

    #[test]
    fn admm_rejects_prox_gradient_inner() {
        let (a, b, gamma) = random_lasso(83, 4, 3);
        let problem = lasso_problem(&a, &b, gamma);
        let opts = AdmmOptions { inner: InnerMethod::ProximalGradient, ..AdmmOptions::default() };
        let err = admm_solve(
            &problem,
            DVector::zeros(3),
            DVector::zeros(3),
            DVector::zeros(3),
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::InvalidOptions(_)));
    }
}
