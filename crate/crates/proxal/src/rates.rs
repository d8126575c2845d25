//! Exponential-rate certificates for the gradient-flow dynamics.
//!
//! For strongly convex `f` and full-rank `TTᵀ`, the flow contracts to the
//! primal-dual optimum at a provable exponential rate once `μ ≥ L_f − m_f`.
//! Three tools quantify that rate:
//!
//! * [`rate_estimates`] evaluates closed-form bounds `ρ₁`, `ρ₂` built from
//!   `γ̂ = μ + m_f + λ_min/μ` and certifies `ρ` slightly inside the bound.
//! * [`check_quad_condition`] verifies the underlying frequency-domain
//!   inequality directly: for every eigenvalue `λᵢ` of `TTᵀ`, a quadratic in
//!   `ω²` must stay positive. The analytic vertex gives a grid-free
//!   certificate; an `ω` grid cross-checks it.
//! * [`build_iqc_model`] assembles the linear system and multiplier matrix
//!   whose feedback interconnection with the two nonlinear blocks (the
//!   shifted gradient of `f` and the prox residual) produces those
//!   conditions.
//!
//! Certified and empirically fitted rates are kept separate:
//! [`fit_log_slope`] measures a trajectory's decay without touching the
//! certificates.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RateError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

/// Closed-form rate bounds for the flow. `rho` is the certified rate
/// (0.99 of the governing bound, keeping the defining inequalities strict);
/// `tau_fit` is an optional empirically fitted prefactor and is never used
/// in certification.
#[derive(Clone, Debug)]
pub struct RateEstimate {
    pub m_f: f64,
    pub l_f: f64,
    pub mu: f64,
    pub lambda_min: f64,
    pub gamma_hat: f64,
    pub rho1: f64,
    pub rho2: Option<f64>,
    pub rho: f64,
    pub tau_fit: Option<f64>,
}

/// Evaluates the closed-form rate bounds.
///
/// `ρ₁ = ½(γ̂ − √(γ̂² − 4λ_min))` is always real; `ρ₂ = ¼(s − √(s² − 8γ̂m_f))`
/// with `s = γ̂ + μ + m_f` is real whenever `m_f ≤ μ` and is `None` when its
/// discriminant is negative. The certified rate is `0.99·ρ₁` when `m_f ≥ μ`
/// and `0.99·min(ρ₁, ρ₂)` otherwise.
pub fn rate_estimates(
    m_f: f64,
    l_f: f64,
    mu: f64,
    lambda_min: f64,
) -> Result<RateEstimate, RateError> {
    if !(m_f > 0.0) {
        return Err(RateError::PreconditionViolated("m_f must be positive".into()));
    }
    if !(l_f >= m_f) {
        return Err(RateError::PreconditionViolated("L_f must be at least m_f".into()));
    }
    if !(lambda_min > 0.0) {
        return Err(RateError::PreconditionViolated("lambda_min must be positive (full-rank TTᵀ)".into()));
    }
    if !(mu > 0.0) || mu < (l_f - m_f) - 1e-12 * l_f.abs().max(1.0) {
        return Err(RateError::PreconditionViolated(format!(
            "need mu >= L_f - m_f = {}, got {}",
            l_f - m_f,
            mu
        )));
    }

    let gamma_hat = mu + m_f + lambda_min / mu;
    let rho1 = 0.5 * (gamma_hat - (gamma_hat * gamma_hat - 4.0 * lambda_min).max(0.0).sqrt());
    let s = gamma_hat + mu + m_f;
    let disc2 = s * s - 8.0 * gamma_hat * m_f;
    let rho2 = if disc2 >= 0.0 { Some(0.25 * (s - disc2.sqrt())) } else { None };

    let bound = if m_f >= mu {
        rho1
    } else {
        // The discriminant of ρ₂ equals 4(μ² − m_f²) + 4c(μ − m_f) + c²
        // with c = λ_min/μ, which is nonnegative for m_f ≤ μ.
        rho1.min(rho2.expect("rho2 is real when m_f < mu"))
    };
    Ok(RateEstimate {
        m_f,
        l_f,
        mu,
        lambda_min,
        gamma_hat,
        rho1,
        rho2,
        rho: 0.99 * bound,
        tau_fit: None,
    })
}

/// Log-spaced frequency grid `10⁻³..10³` with 200 points.
pub fn default_omega_grid() -> Vec<f64> {
    let n = 200;
    (0..n)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Checks the per-eigenvalue frequency condition at decay rate `rho`:
/// for each `λᵢ` of `TTᵀ`, with `m̂ = m_f − ρ` and `μ̂ = μ − ρ`,
///
/// ```text
/// ω⁴ + (m̂λᵢ/μ + m̂² + μm̂ − ρμ̂) ω² + m̂μ̂(μ̂λᵢ/μ − ρ(μ + m̂)) > 0
/// ```
///
/// must hold for all `ω ≥ 0`. The minimum over `ω²` is evaluated at the
/// analytic vertex of the quadratic; the supplied grid is checked as well.
pub fn check_quad_condition(
    rho: f64,
    m_f: f64,
    mu: f64,
    eigs_ttt: &[f64],
    omega_grid: &[f64],
) -> Result<bool, RateError> {
    if !(rho >= 0.0 && rho < m_f.min(mu)) {
        return Err(RateError::PreconditionViolated(format!(
            "need 0 <= rho < min(m_f, mu) = {}, got {}",
            m_f.min(mu),
            rho
        )));
    }
    if eigs_ttt.is_empty() || eigs_ttt.iter().any(|&l| l <= 0.0) {
        return Err(RateError::PreconditionViolated(
            "eigenvalues of TTᵀ must be positive (full rank)".into(),
        ));
    }

    let m_hat = m_f - rho;
    let mu_hat = mu - rho;
    for &lam in eigs_ttt {
        let b = m_hat * lam / mu + m_hat * m_hat + mu * m_hat - rho * mu_hat;
        let c = m_hat * mu_hat * (mu_hat * lam / mu - rho * (mu + m_hat));
        let vertex_min = if b >= 0.0 { c } else { c - 0.25 * b * b };
        if vertex_min <= 0.0 {
            return Ok(false);
        }
        for &omega in omega_grid {
            let t = omega * omega;
            if t * t + b * t + c <= 0.0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Largest decay rate in `(0, min(m_f, μ))` accepted by
/// [`check_quad_condition`], located by bisection. The feasible rates form
/// an interval from zero in all observed cases; the returned value always
/// passes the check itself.
pub fn bisect_rate(
    m_f: f64,
    mu: f64,
    eigs_ttt: &[f64],
    omega_grid: &[f64],
) -> Result<f64, RateError> {
    let upper = m_f.min(mu);
    let mut lo = 0.0;
    let mut hi = upper * (1.0 - 1e-12);
    if check_quad_condition(hi, m_f, mu, eigs_ttt, omega_grid)? {
        return Ok(hi);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if check_quad_condition(mid, m_f, mu, eigs_ttt, omega_grid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// State-space data of the feedback interconnection behind the rate proof.
///
/// The linear part is `ẇ = Aw + Bu`, `ξ = Cw` with `w = (x, y)`; the
/// nonlinear part feeds back `u₁ = ∇f(ξ₁) − m_f ξ₁` and
/// `u₂ = ξ₂ − prox_{μg}(ξ₂)`. Both blocks are gradients of convex functions
/// with Lipschitz constants `l_hat1 = L_f − m_f` and `l_hat2 = 1`, and `pi`
/// is the block multiplier encoding the resulting co-coercivity of each.
#[derive(Clone, Debug)]
pub struct IqcModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    pub l_hat1: f64,
    pub l_hat2: f64,
}

/// Assembles the interconnection matrices for given problem constants.
pub fn build_iqc_model(m_f: f64, l_f: f64, mu: f64, t: &DMatrix<f64>) -> IqcModel {
    assert!(m_f > 0.0 && mu > 0.0, "m_f and mu must be positive");
    assert!(l_f >= m_f, "L_f must be at least m_f");
    let n = t.ncols();
    let m = t.nrows();
    let dim = n + m;

    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..n {
        a[(i, i)] = -m_f;
    }
    for i in 0..m {
        a[(n + i, n + i)] = -mu;
    }

    let mut b = DMatrix::zeros(dim, dim);
    for i in 0..n {
        b[(i, i)] = -1.0;
    }
    b.view_mut((0, n), (n, m)).copy_from(&(t.transpose() * (-1.0 / mu)));
    for i in 0..m {
        b[(n + i, n + i)] = 1.0;
    }

    let mut c = DMatrix::zeros(dim, dim);
    for i in 0..n {
        c[(i, i)] = 1.0;
    }
    c.view_mut((n, 0), (m, n)).copy_from(t);
    for i in 0..m {
        c[(n + i, n + i)] = mu;
    }

    let l_hat1 = l_f - m_f;
    let l_hat2 = 1.0;
    // Multiplier ordering: η = [ξ₁; ξ₂; u₁; u₂].
    let mut pi = DMatrix::zeros(2 * dim, 2 * dim);
    for i in 0..n {
        pi[(i, dim + i)] = l_hat1;
        pi[(dim + i, i)] = l_hat1;
        pi[(dim + i, dim + i)] = -2.0;
    }
    for i in 0..m {
        pi[(n + i, dim + n + i)] = l_hat2;
        pi[(dim + n + i, n + i)] = l_hat2;
        pi[(dim + n + i, dim + n + i)] = -2.0;
    }

    IqcModel { a, b, c, pi, l_hat1, l_hat2 }
}

/// Least-squares slope and intercept of `ln d(t)` over the window
/// `[window.0, window.1]`. Samples with `d ≤ floor` are excluded so a
/// trajectory that bottoms out at the integrator's accuracy floor does not
/// flatten the fit; returns `None` with fewer than two usable samples.
pub fn fit_log_slope(
    times: &[f64],
    dists: &[f64],
    window: (f64, f64),
    floor: f64,
) -> Option<(f64, f64)> {
    assert_eq!(times.len(), dists.len(), "times and distances must align");
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(dists)
        .filter(|(&t, &d)| t >= window.0 && t <= window.1 && d > floor && d > 0.0)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let l_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, l) in &pts {
        num += (t - t_mean) * (l - l_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    if den == 0.0 {
        return None;
    }
    let slope = num / den;
    Some((slope, l_mean - slope * t_mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_flow, FlowConfig};
    use crate::numerics::symmetric_eigs;
    use crate::problem::{CompositeProblem, LinearMap, SmoothObjective};
    use crate::regularizer::Regularizer;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn admissible_draw(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
        let m_f: f64 = rng.random_range(0.1..3.0);
        let l_f = m_f * rng.random_range(1.0..3.0);
        let mu = (l_f - m_f).max(1e-3) + rng.random_range(0.1..2.0);
        let lambda_min = rng.random_range(0.01..5.0);
        (m_f, l_f, mu, lambda_min)
    }

    #[test]
    fn unit_parameters_give_golden_ratio_rate() {
        let est = rate_estimates(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(est.gamma_hat, 3.0);
        assert_relative_eq!(est.rho1, 0.5 * (3.0 - 5.0_f64.sqrt()), epsilon = 1e-15);
        assert_eq!(est.rho2, Some(1.0));
        assert_relative_eq!(est.rho, 0.99 * est.rho1, epsilon = 1e-15);
    }

    #[test]
    fn rate_vanishes_with_lambda_min() {
        let est = rate_estimates(1.0, 1.0, 1.0, 1e-14).unwrap();
        assert!(est.rho1 <= 1e-13, "rho1 = {:e}", est.rho1);
    }

    #[test]
    fn preconditions_are_enforced() {
        assert!(rate_estimates(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(rate_estimates(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(rate_estimates(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(rate_estimates(1.0, 3.0, 1.0, 1.0).is_err());
        assert!(rate_estimates(1.0, 3.0, 2.0, 1.0).is_ok());
    }

    #[test]
    fn defining_quadratics_hold_at_certified_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (m_f, l_f, mu, lambda_min) = admissible_draw(&mut rng);
            let est = rate_estimates(m_f, l_f, mu, lambda_min).unwrap();
            let g = est.gamma_hat;
            let rho = est.rho;
            assert!(rho > 0.0);
            assert!(rho * rho - g * rho + lambda_min > 0.0, "first quadratic failed");
            if m_f < mu {
                let q2 = 2.0 * rho * rho - (g + mu + m_f) * rho + g * m_f;
                assert!(q2 > 0.0, "second quadratic failed");
            }
        }
    }

    #[test]
    fn quad_condition_true_at_rho_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let grid = default_omega_grid();
        for _ in 0..50 {
            let (m_f, _, mu, _) = admissible_draw(&mut rng);
            let eigs = [rng.random_range(0.01..4.0), rng.random_range(0.01..4.0)];
            assert!(check_quad_condition(0.0, m_f, mu, &eigs, &grid).unwrap());
        }
    }

    #[test]
    fn quad_condition_holds_at_certified_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = default_omega_grid();
        for _ in 0..100 {
            let (m_f, l_f, mu, lambda_min) = admissible_draw(&mut rng);
            let est = rate_estimates(m_f, l_f, mu, lambda_min).unwrap();
            // Larger eigenvalues only help; λ_min is the binding one.
            let eigs = [lambda_min, lambda_min * 2.5, lambda_min * 10.0];
            assert!(
                check_quad_condition(est.rho, m_f, mu, &eigs, &grid).unwrap(),
                "certified rate rejected for m_f={m_f} mu={mu} lambda={lambda_min}"
            );
        }
    }

    #[test]
    fn quad_condition_fails_near_upper_rate_with_tiny_lambda() {
        let grid = default_omega_grid();
        let rho = 0.999;
        assert!(!check_quad_condition(rho, 1.0, 1.0, &[1e-6], &grid).unwrap());
    }

    #[test]
    fn quad_condition_rejects_bad_inputs() {
        let grid = default_omega_grid();
        assert!(check_quad_condition(1.0, 1.0, 1.0, &[1.0], &grid).is_err());
        assert!(check_quad_condition(0.5, 1.0, 1.0, &[], &grid).is_err());
        assert!(check_quad_condition(0.5, 1.0, 1.0, &[-1.0], &grid).is_err());
    }

    #[test]
    fn bisection_tightens_the_closed_form_bound() {
        let grid = default_omega_grid();
        let (m_f, l_f, mu, lambda_min) = (1.0, 2.0, 1.5, 0.8);
        let est = rate_estimates(m_f, l_f, mu, lambda_min).unwrap();
        let rho_b = bisect_rate(m_f, mu, &[lambda_min], &grid).unwrap();
        assert!(check_quad_condition(rho_b, m_f, mu, &[lambda_min], &grid).unwrap());
        assert!(
            rho_b >= est.rho,
            "bisection ({rho_b}) fell below the closed-form certificate ({})",
            est.rho
        );
    }

    #[test]
    fn iqc_model_recovers_flow_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, m) = (3, 4);
        let (m_f, l_f, mu) = (0.6, 2.1, 1.1);
        // Hessian with known extreme eigenvalues m_f and L_f.
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize();
        let h = DMatrix::identity(n, n) * m_f + &u * u.transpose() * (l_f - m_f);
        let t = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let g = Regularizer::l1(0.3);
        let problem = CompositeProblem::new(
            SmoothObjective::quadratic(h.clone(), DVector::zeros(n)),
            g.clone(),
            LinearMap::new(t.clone()),
        )
        .unwrap();
        let model = build_iqc_model(m_f, l_f, mu, &t);
        assert_eq!(model.a.nrows(), n + m);
        assert_eq!(model.c.nrows(), n + m);
        assert_relative_eq!(model.l_hat1, l_f - m_f);

        for _ in 0..10 {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let y = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
            let mut w = DVector::zeros(n + m);
            w.rows_mut(0, n).copy_from(&x);
            w.rows_mut(n, m).copy_from(&y);

            let xi = &model.c * &w;
            let xi2 = DVector::from(xi.rows(n, m).into_owned());
            let u1 = &h * &x - &x * m_f;
            let u2 = &xi2 - g.prox(&xi2, mu);
            let mut uu = DVector::zeros(n + m);
            uu.rows_mut(0, n).copy_from(&u1);
            uu.rows_mut(n, m).copy_from(&u2);

            let wdot = &model.a * &w + &model.b * &uu;
            let eval = problem.pal_eval(&x, &y, mu);
            let expected_dx = -eval.grad_x();
            let expected_dy = eval.grad_y();
            assert_relative_eq!(DVector::from(wdot.rows(0, n).into_owned()), expected_dx, epsilon = 1e-12);
            assert_relative_eq!(DVector::from(wdot.rows(n, m).into_owned()), expected_dy, epsilon = 1e-12);
        }
    }

    #[test]
    fn iqc_blocks_satisfy_their_quadratic_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, m) = (4, 3);
        let (m_f, l_f, mu) = (0.5, 3.0, 0.9);
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize();
        let h = DMatrix::identity(n, n) * m_f + &u * u.transpose() * (l_f - m_f);
        let t = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let g = Regularizer::l1(0.4);
        let model = build_iqc_model(m_f, l_f, mu, &t);
        let dim = n + m;

        for _ in 0..200 {
            let xa = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let xb = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let xi1 = &xa - &xb;
            let u1 = &h * &xi1 - &xi1 * m_f;
            let mut eta = DVector::zeros(2 * dim);
            eta.rows_mut(0, n).copy_from(&xi1);
            eta.rows_mut(dim, n).copy_from(&u1);
            let q1 = (eta.transpose() * &model.pi * &eta)[(0, 0)];
            assert!(q1 >= -1e-10, "gradient block violated its constraint: {q1}");

            let va = DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0));
            let vb = DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0));
            let xi2 = &va - &vb;
            let u2 = (&va - g.prox(&va, mu)) - (&vb - g.prox(&vb, mu));
            let mut eta = DVector::zeros(2 * dim);
            eta.rows_mut(n, m).copy_from(&xi2);
            eta.rows_mut(dim + n, m).copy_from(&u2);
            let q2 = (eta.transpose() * &model.pi * &eta)[(0, 0)];
            assert!(q2 >= -1e-10, "prox block violated its constraint: {q2}");
        }
    }

    #[test]
    fn log_slope_fit_recovers_synthetic_decay() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let dists: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let (slope, intercept) = fit_log_slope(&times, &dists, (2.0, 8.0), 0.0).unwrap();
        assert_relative_eq!(slope, -0.7, epsilon = 1e-12);
        assert_relative_eq!(intercept, 3.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_slope_fit_ignores_floored_samples() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let floor = 1e-2;
        let dists: Vec<f64> =
            times.iter().map(|t| (3.0 * (-0.7 * t).exp()).max(floor)).collect();
        let (slope, _) = fit_log_slope(&times, &dists, (2.0, 10.0), floor).unwrap();
        assert_relative_eq!(slope, -0.7, epsilon = 1e-9);
        assert!(fit_log_slope(&times, &dists, (9.5, 10.0), floor).is_none());
    }

    #[test]
    fn trajectory_decays_at_least_at_certified_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 3;
        let h = {
            let s = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.6..0.6));
            &s * s.transpose() + DMatrix::identity(n, n)
        };
        let t = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.2..0.2));
        let f = SmoothObjective::quadratic(h, DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
        let m_f = f.strong_convexity();
        let l_f = f.gradient_lipschitz().unwrap();
        let mu = (l_f - m_f).max(1e-3);
        let ttt = &t * t.transpose();
        let lambda_min = *symmetric_eigs(&ttt).unwrap().values.first().unwrap();
        let est = rate_estimates(m_f, l_f, mu, lambda_min).unwrap();

        let problem =
            CompositeProblem::new(f, Regularizer::l1(0.2), LinearMap::new(t.clone())).unwrap();
        let x_opt = crate::mm::mm_solve(
            &problem,
            DVector::zeros(n),
            DVector::zeros(n),
            &crate::mm::MmOptions::default(),
        )
        .unwrap();
        assert!(x_opt.converged);

        let t_end = (4.1 / est.rho).min(60.0);
        let x0 = DVector::from_element(n, 1.5);
        let y0 = DVector::zeros(n);
        let cfg = FlowConfig::new(mu, t_end);
        let traj =
            integrate_flow(&problem, &x0, &y0, &cfg, Some((&x_opt.x, &x_opt.y))).unwrap();
        let dist = traj.distance_to_ref.unwrap();
        let d0 = dist[0];
        let (slope, _) =
            fit_log_slope(&traj.times, &dist, (t_end / 4.0, t_end), 1e-8 * d0).unwrap();
        assert!(
            slope <= -0.95 * est.rho,
            "fitted slope {slope} is slower than the certified rate {}",
            est.rho
        );
    }
}
