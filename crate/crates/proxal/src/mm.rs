//! Method of multipliers on the proximal augmented Lagrangian.
//!
//! The outer loop alternates an inexact primal minimization of `L_μ(·; y)`
//! with either a multiplier step or a penalty tightening, steered by two
//! tolerance sequences:
//!
//! * solve `x^{k+1} ≈ argmin_x L_μ(x; y^k)` until `‖∇_x L_μ‖ ≤ ω_k`;
//! * if the primal residual satisfies `‖∇_y L_μ‖ ≤ η_k`, accept the step:
//!   `y^{k+1} = y^k + ∇_y L_μ / μ_k`, keep `μ`, and tighten
//!   `η_{k+1} = η_k μ^0.9`, `ω_{k+1} = ω_k μ`;
//! * otherwise keep `y`, shrink `μ_{k+1} = max{μ_k/5, μ_min}`, and reset
//!   `η_{k+1} = μ_{k+1}^0.1`, `ω_{k+1} = μ_{k+1}`.
//!
//! Iteration stops once both residuals meet their final tolerances. The
//! exponents 0.9/0.1 are part of the update law, not knobs; the shrink
//! factor and the initial/minimal penalties are options.
//!
//! Inner solvers share an Armijo backtracking line search: plain gradient
//! descent, limited-memory BFGS, and (for `T = I`) a proximal-gradient
//! iteration whose prox of the Moreau envelope is itself computed by a
//! contractive fixed point.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::pal::KktResiduals;
use crate::problem::CompositeProblem;
use crate::regularizer::Regularizer;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("proximal-gradient inner method requires T = I")]
    ProximalGradientRequiresIdentity,
    #[error("prox fixed point stopped at residual {residual:.3e} after {iters} iterations")]
    FixedPointDidNotConverge { residual: f64, iters: usize },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Error)]
#[error("line search failed: {0}")]
pub struct LineSearchError(pub &'static str);

/// Armijo backtracking parameters: accept the first `α = α₀ βʲ` with
/// `φ(x + αd) ≤ φ(x) + c α ⟨∇φ(x), d⟩`.
#[derive(Clone, Copy, Debug)]
pub struct ArmijoOptions {
    pub c: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub max_halvings: usize,
}

impl Default for ArmijoOptions {
    fn default() -> Self {
        ArmijoOptions { c: 1e-4, beta: 0.5, alpha0: 1.0, max_halvings: 60 }
    }
}

/// Backtracks along a ray. `phi` evaluates the objective at step `α`,
/// `phi0 = φ(0)`, and `slope = ⟨∇φ(x), d⟩` must be negative. Returns the
/// accepted `(α, φ(α))`. Infinite trial values (indicator regions, unstable
/// closed loops) are rejected like any other insufficient decrease.
pub fn armijo_step(
    phi: impl Fn(f64) -> f64,
    phi0: f64,
    slope: f64,
    opts: &ArmijoOptions,
) -> Result<(f64, f64), LineSearchError> {
    if !(slope < 0.0) {
        return Err(LineSearchError("not a descent direction"));
    }
    let mut alpha = opts.alpha0;
    for _ in 0..=opts.max_halvings {
        let value = phi(alpha);
        if value <= phi0 + opts.c * alpha * slope {
            return Ok((alpha, value));
        }
        alpha *= opts.beta;
    }
    Err(LineSearchError("no acceptable step within the halving budget"))
}

/// Curvature pairs for the limited-memory BFGS two-loop recursion.
pub struct LbfgsHistory {
    pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)>,
    memory: usize,
}

impl LbfgsHistory {
    pub fn new(memory: usize) -> Self {
        assert!(memory > 0, "memory must be positive");
        LbfgsHistory { pairs: VecDeque::new(), memory }
    }

    /// Stores `(s, u) = (x⁺ - x, ∇φ⁺ - ∇φ)`. Pairs without positive
    /// curvature `⟨s, u⟩ > 0` are discarded; Armijo alone does not
    /// guarantee the curvature condition.
    pub fn push(&mut self, s: DVector<f64>, u: DVector<f64>) {
        let su = s.dot(&u);
        if su <= 0.0 {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, u, 1.0 / su));
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Two-loop recursion: returns the quasi-Newton descent direction
/// `-H_k ∇φ`, seeding the diagonal with `⟨s, u⟩ / ⟨u, u⟩` from the most
/// recent pair. With no stored pairs this is steepest descent.
pub fn lbfgs_direction(history: &LbfgsHistory, grad: &DVector<f64>) -> DVector<f64> {
    if history.pairs.is_empty() {
        return -grad;
    }
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(history.pairs.len());
    for (s, u, rho) in history.pairs.iter().rev() {
        let a = rho * s.dot(&q);
        q -= u * a;
        alphas.push(a);
    }
    let (s_last, u_last, _) = history.pairs.back().unwrap();
    let gamma = s_last.dot(u_last) / u_last.dot(u_last);
    let mut r = q * gamma;
    for ((s, u, rho), a) in history.pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * u.dot(&r);
        r += s * (a - b);
    }
    -r
}

/// Evaluates `prox_{α M_{μg}}(v)` through the fixed point
/// `x = (α prox_{μg}(x) + μ v) / (μ + α)`, a contraction with modulus
/// `α / (μ + α)`. Iterates until the fixed-point residual drops below
/// `1e-10 * (1 + ‖v‖)`.
pub fn prox_of_moreau(
    g: &Regularizer,
    v: &DVector<f64>,
    mu: f64,
    alpha: f64,
) -> Result<DVector<f64>, SolverError> {
    assert!(mu > 0.0 && alpha > 0.0, "parameters must be positive");
    let tol = 1e-10 * (1.0 + v.norm());
    let mut x = v.clone();
    let max_iters = 100_000;
    for i in 0..max_iters {
        let next = (g.prox(&x, mu) * alpha + v * mu) / (mu + alpha);
        let residual = (&next - &x).norm();
        x = next;
        if residual <= tol {
            return Ok(x);
        }
        let _ = i;
    }
    let residual = ((g.prox(&x, mu) * alpha + v * mu) / (mu + alpha) - &x).norm();
    Err(SolverError::FixedPointDidNotConverge { residual, iters: max_iters })
}

/// Inner minimization method for `min_x L_μ(x; y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMethod {
    GradientDescent,
    /// Forward-backward splitting on `f + M_{μg}(· + μy)`; valid only when
    /// `T = I`, where the envelope's prox is available via [`prox_of_moreau`].
    ProximalGradient,
    LBfgs { memory: usize },
}

impl Default for InnerMethod {
    fn default() -> Self {
        InnerMethod::LBfgs { memory: 10 }
    }
}

/// Outcome of one inner solve: final iterate, achieved gradient norm, and
/// whether the iteration stalled before reaching its tolerance.
pub struct InnerResult {
    pub x: DVector<f64>,
    pub grad_norm: f64,
    pub iters: usize,
    pub stalled: bool,
}

/// Minimizes `x ↦ L_μ(x; y)` from `x0` until `‖∇_x L_μ‖ ≤ tol`.
///
/// A failed line search or an exhausted iteration budget is reported as a
/// stall rather than an error; the outer loop decides how to proceed.
pub fn inner_minimize(
    problem: &CompositeProblem,
    y: &DVector<f64>,
    mu: f64,
    x0: DVector<f64>,
    tol: f64,
    method: InnerMethod,
    max_iter: usize,
    armijo: &ArmijoOptions,
) -> Result<InnerResult, SolverError> {
    match method {
        InnerMethod::ProximalGradient => {
            if !problem.t.is_identity() {
                return Err(SolverError::ProximalGradientRequiresIdentity);
            }
            prox_gradient_inner(problem, y, mu, x0, tol, max_iter)
        }
        InnerMethod::GradientDescent | InnerMethod::LBfgs { .. } => {
            line_search_inner(problem, y, mu, x0, tol, method, max_iter, armijo)
        }
    }
}

fn line_search_inner(
    problem: &CompositeProblem,
    y: &DVector<f64>,
    mu: f64,
    x: DVector<f64>,
    tol: f64,
    method: InnerMethod,
    max_iter: usize,
    armijo: &ArmijoOptions,
) -> Result<InnerResult, SolverError> {
    // A single `pal_eval` shares one prox evaluation between the value and
    // the gradient, so the combined oracle costs the same as either alone.
    let value = |x: &DVector<f64>| problem.pal_eval(x, y, mu).value();
    let value_grad = |x: &DVector<f64>| {
        let eval = problem.pal_eval(x, y, mu);
        (eval.value(), eval.grad_x())
    };
    Ok(line_search_minimize(&value, &value_grad, x, tol, method, max_iter, armijo))
}

/// Descent with an Armijo line search, optionally preconditioned by an
/// L-BFGS model, on an arbitrary smooth function. Shared by the inner solve
/// of [`mm_solve`] and the x-update of ADMM. `ProximalGradient` is not a
/// line-search method and is treated as plain gradient descent here; callers
/// dispatch it separately.
pub(crate) fn line_search_minimize(
    value: &dyn Fn(&DVector<f64>) -> f64,
    value_grad: &dyn Fn(&DVector<f64>) -> (f64, DVector<f64>),
    mut x: DVector<f64>,
    tol: f64,
    method: InnerMethod,
    max_iter: usize,
    armijo: &ArmijoOptions,
) -> InnerResult {
    let mut history = match method {
        InnerMethod::LBfgs { memory } => Some(LbfgsHistory::new(memory)),
        _ => None,
    };
    let (mut fx, mut grad) = value_grad(&x);

    for iter in 0..max_iter {
        let grad_norm = grad.norm();
        if grad_norm <= tol {
            return InnerResult { x, grad_norm, iters: iter, stalled: false };
        }

        let mut direction = match &history {
            Some(h) => lbfgs_direction(h, &grad),
            None => -&grad,
        };
        let mut slope = grad.dot(&direction);
        if slope >= 0.0 {
            // A stale quasi-Newton model can propose ascent; fall back to
            // steepest descent and start the model over.
            if let Some(h) = history.as_mut() {
                h.clear();
            }
            direction = -&grad;
            slope = -grad_norm * grad_norm;
        }

        let phi = |alpha: f64| value(&(&x + &direction * alpha));
        let (alpha, new_value) = match armijo_step(phi, fx, slope, armijo) {
            Ok(step) => step,
            Err(_) => {
                return InnerResult { x, grad_norm, iters: iter, stalled: true };
            }
        };

        let step = &direction * alpha;
        let x_next = &x + &step;
        let (_, grad_next) = value_grad(&x_next);
        if let Some(h) = history.as_mut() {
            h.push(step, &grad_next - &grad);
        }
        x = x_next;
        fx = new_value;
        grad = grad_next;
    }

    let grad_norm = grad.norm();
    let stalled = grad_norm > tol;
    InnerResult { x, grad_norm, iters: max_iter, stalled }
}

fn prox_gradient_inner(
    problem: &CompositeProblem,
    y: &DVector<f64>,
    mu: f64,
    mut x: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<InnerResult, SolverError> {
    let mu_y = y * mu;
    // With a known Lipschitz constant the step 1/L_f is safe; otherwise
    // backtrack on the standard quadratic-upper-bound condition.
    let fixed_alpha = problem.f.gradient_lipschitz().map(|l| 1.0 / l.max(f64::MIN_POSITIVE));
    let mut alpha = fixed_alpha.unwrap_or(1.0);

    let mut grad_norm = problem.pal_eval(&x, y, mu).grad_x().norm();
    for iter in 0..max_iter {
        if grad_norm <= tol {
            return Ok(InnerResult { x, grad_norm, iters: iter, stalled: false });
        }
        let fx = problem.f.value(&x);
        let gx = problem.f.gradient(&x);
        // The slack keeps rounding noise in the function values from
        // rejecting steps whose predicted decrease is below machine
        // precision, which would collapse the step size near a solution.
        let slack = 1e-12 * (1.0 + fx.abs());
        let x_next = loop {
            let w = &x - &gx * alpha;
            let candidate = prox_of_moreau(&problem.g, &(&w + &mu_y), mu, alpha)? - &mu_y;
            if fixed_alpha.is_some() {
                break candidate;
            }
            let d = &candidate - &x;
            let bound = fx + gx.dot(&d) + d.norm_squared() / (2.0 * alpha);
            if problem.f.value(&candidate) <= bound + slack {
                break candidate;
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                return Ok(InnerResult { x, grad_norm, iters: iter, stalled: true });
            }
        };
        x = x_next;
        grad_norm = problem.pal_eval(&x, y, mu).grad_x().norm();
    }
    let stalled = grad_norm > tol;
    Ok(InnerResult { x, grad_norm, iters: max_iter, stalled })
}

/// Options for [`mm_solve`]. The defaults reproduce the reference schedule:
/// `μ₀ = 0.1`, `μ_min = 1e-5`, shrink factor 5.
#[derive(Clone, Debug)]
pub struct MmOptions {
    pub mu0: f64,
    pub mu_min: f64,
    /// Multiplicative factor applied to `μ` on the tightening branch.
    pub mu_shrink: f64,
    /// Final dual (primal-residual) tolerance.
    pub eta_final: f64,
    /// Final primal (gradient-norm) tolerance.
    pub omega_final: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner: InnerMethod,
    pub armijo: ArmijoOptions,
}

impl Default for MmOptions {
    fn default() -> Self {
        MmOptions {
            mu0: 0.1,
            mu_min: 1e-5,
            mu_shrink: 0.2,
            eta_final: 1e-6,
            omega_final: 1e-6,
            max_outer: 100,
            max_inner: 5000,
            inner: InnerMethod::default(),
            armijo: ArmijoOptions::default(),
        }
    }
}

/// One outer iteration's bookkeeping. For the multiplier method, `eta`/
/// `omega` are the tolerances in force, `primal_res = ‖∇_y L_μ‖`,
/// `grad_norm = ‖∇_x L_μ‖` after the inner solve, and `accepted` marks the
/// multiplier-update branch (as opposed to penalty tightening). ADMM reuses
/// the shape with `primal_res`/`grad_norm` as its primal/dual residuals and
/// `eta`/`omega` as its stopping tolerances; there `accepted` means the
/// penalty was not rescaled.
#[derive(Clone, Debug)]
pub struct OuterRecord {
    pub iter: usize,
    pub mu: f64,
    pub eta: f64,
    pub omega: f64,
    pub primal_res: f64,
    pub grad_norm: f64,
    pub inner_iters: usize,
    pub accepted: bool,
    pub stalled: bool,
    pub wall_time: f64,
}

/// Result of an outer solve (multiplier method or ADMM).
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub mu_final: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    pub kkt: KktResiduals,
    pub history: Vec<OuterRecord>,
}

/// Runs the adaptive method of multipliers from `(x0, y0)`.
///
/// Returns the best iterate with `converged = false` when the outer budget
/// is exhausted; option validation is the only error path besides a
/// non-converging inner fixed point.
///
/// The forcing-sequence tolerances never drop below `eta_final` and
/// `omega_final`: the stopping test needs nothing tighter, and inner
/// tolerances far below the line search's floating-point resolution would
/// only stall.
///
/// The reported multiplier is the first-order estimate
/// `∇M_{μg}(Tx + μy)` at the final iterate (one multiplier step past the
/// stopping test). It lies in `∂g(z*)` exactly, so the reported KKT
/// residuals reflect the achieved tolerances rather than lagging by `η/μ`.
pub fn mm_solve(
    problem: &CompositeProblem,
    x0: DVector<f64>,
    y0: DVector<f64>,
    opts: &MmOptions,
) -> Result<SolveReport, SolverError> {
    validate_mm_options(opts)?;
    let mut x = x0;
    let mut y = y0;
    let mut mu = opts.mu0;
    // The working tolerances follow the classic forcing schedule but are
    // floored at the requested finals: tightening past them would demand
    // inner accuracy the line search cannot certify in floating point, and
    // the stopping test only needs the finals.
    let mut omega = opts.mu0.max(opts.omega_final);
    let mut eta = opts.mu0.powf(0.1).max(opts.eta_final);

    let mut history = Vec::new();
    let mut total_inner = 0;
    let mut converged = false;

    for iter in 0..opts.max_outer {
        let clock = Instant::now();
        let inner = inner_minimize(problem, &y, mu, x, omega, opts.inner, opts.max_inner, &opts.armijo)?;
        x = inner.x;
        total_inner += inner.iters;

        let primal = problem.pal_eval(&x, &y, mu).grad_y();
        let primal_norm = primal.norm();

        let dual_ok = !inner.stalled && primal_norm <= eta;
        history.push(OuterRecord {
            iter,
            mu,
            eta,
            omega,
            primal_res: primal_norm,
            grad_norm: inner.grad_norm,
            inner_iters: inner.iters,
            accepted: dual_ok,
            stalled: inner.stalled,
            wall_time: clock.elapsed().as_secs_f64(),
        });

        if dual_ok {
            if primal_norm <= opts.eta_final && inner.grad_norm <= opts.omega_final {
                converged = true;
                break;
            }
            y += &primal / mu;
            eta = (eta * mu.powf(0.9)).max(opts.eta_final);
            omega = (omega * mu).max(opts.omega_final);
        } else {
            mu = (mu * opts.mu_shrink).max(opts.mu_min);
            eta = mu.powf(0.1).max(opts.eta_final);
            omega = mu.max(opts.omega_final);
        }
    }

    if !history.is_empty() {
        y = problem.pal_eval(&x, &y, mu).moreau_grad();
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

fn validate_mm_options(opts: &MmOptions) -> Result<(), SolverError> {
    if !(opts.mu0 > 0.0 && opts.mu_min > 0.0 && opts.mu_min <= opts.mu0) {
        return Err(SolverError::InvalidOptions("need 0 < mu_min <= mu0".into()));
    }
    if !(opts.mu_shrink > 0.0 && opts.mu_shrink < 1.0) {
        return Err(SolverError::InvalidOptions("mu_shrink must lie in (0, 1)".into()));
    }
    if !(opts.eta_final > 0.0 && opts.omega_final > 0.0) {
        return Err(SolverError::InvalidOptions("final tolerances must be positive".into()));
    }
    Ok(())
}
