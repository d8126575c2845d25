//! Primal-descent dual-ascent gradient-flow dynamics.
//!
//! The flow pairs a gradient descent in `x` with a gradient ascent in `y` on
//! the proximal augmented Lagrangian:
//!
//! ```text
//! ẋ = −(∇f(x) + Tᵀ ∇M_{μg}(Tx + μy))
//! ẏ =  μ (∇M_{μg}(Tx + μy) − y)
//! ```
//!
//! The right-hand side is continuous because the envelope gradient is
//! `1/μ`-Lipschitz, so standard ODE integrators apply directly; no
//! subgradient selections or projections are involved.
//!
//! For separable `f` and an incidence-structured `T` the flow specializes to
//! a distributed protocol in the node variables `x` and edge aggregates
//! `ỹ = Tᵀy`; [`network_flow_step`] is its forward-Euler discretization and
//! [`extra_step`] reproduces the EXTRA recursion, which coincides with the
//! network iteration for a matched step size and mixing matrix.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problem::CompositeProblem;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("step size underflow at t = {t:.6e}: dynamics too stiff for the requested tolerances")]
    StepSizeUnderflow { t: f64 },
}

/// Time-stepping scheme for [`integrate_flow`].
#[derive(Clone, Copy, Debug)]
pub enum Integrator {
    /// Embedded Dormand-Prince 4(5) pair with proportional error control.
    Rk45 { rtol: f64, atol: f64 },
    /// Fixed-step forward Euler. Steps are clipped at sample boundaries, so
    /// `alpha` is an upper bound on the step actually taken.
    Euler { alpha: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Rk45 { rtol: 1e-8, atol: 1e-10 }
    }
}

/// Configuration for [`integrate_flow`].
#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub mu: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Requested output times. When empty, a uniform 201-point grid over
    /// `[0, t_end]` is used.
    pub sample_times: Vec<f64>,
}

impl FlowConfig {
    pub fn new(mu: f64, t_end: f64) -> Self {
        FlowConfig { mu, t_end, integrator: Integrator::default(), sample_times: Vec::new() }
    }

    pub fn with_samples(mut self, samples: Vec<f64>) -> Self {
        self.sample_times = samples;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), FlowError> {
        if !(self.mu > 0.0) {
            return Err(FlowError::InvalidConfig("mu must be positive".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(FlowError::InvalidConfig("t_end must be positive".into()));
        }
        if let Integrator::Euler { alpha } = self.integrator {
            if !(alpha > 0.0) {
                return Err(FlowError::InvalidConfig("Euler step must be positive".into()));
            }
        }
        if let Integrator::Rk45 { rtol, atol } = self.integrator {
            if !(rtol > 0.0 && atol > 0.0) {
                return Err(FlowError::InvalidConfig("tolerances must be positive".into()));
            }
        }
        for pair in self.sample_times.windows(2) {
            if pair[1] <= pair[0] {
                return Err(FlowError::InvalidConfig("sample times must be strictly increasing".into()));
            }
        }
        if let (Some(&first), Some(&last)) = (self.sample_times.first(), self.sample_times.last()) {
            if first < 0.0 || last > self.t_end {
                return Err(FlowError::InvalidConfig("sample times must lie in [0, t_end]".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn samples(&self) -> Vec<f64> {
        if self.sample_times.is_empty() {
            let n = 200;
            (0..=n).map(|i| self.t_end * i as f64 / n as f64).collect()
        } else {
            self.sample_times.clone()
        }
    }
}

/// A trajectory sampled at the configured output times.
#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<(DVector<f64>, DVector<f64>)>,
    /// `‖(x, y)(tᵢ) − (x*, y*)‖` when a reference pair was supplied.
    pub distance_to_ref: Option<Vec<f64>>,
}

/// Right-hand side of the flow: `(−∇ₓL_μ, ∇ᵧL_μ)` at `(x, y)`.
pub fn flow_rhs(
    problem: &CompositeProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    mu: f64,
) -> (DVector<f64>, DVector<f64>) {
    let eval = problem.pal_eval(x, y, mu);
    (-eval.grad_x(), eval.grad_y())
}

/// Integrates the flow from `(x0, y0)` and samples it at the configured
/// times, recording distances to `reference` when one is given.
pub fn integrate_flow(
    problem: &CompositeProblem,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &FlowConfig,
    reference: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<FlowTrajectory, FlowError> {
    cfg.validate()?;
    let n = problem.n();
    assert_eq!(x0.len(), n, "x0 has wrong dimension");
    assert_eq!(y0.len(), problem.m(), "y0 has wrong dimension");

    let mu = cfg.mu;
    let rhs = |_t: f64, w: &DVector<f64>| -> DVector<f64> {
        let x = DVector::from(w.rows(0, n).into_owned());
        let y = DVector::from(w.rows(n, w.len() - n).into_owned());
        let (dx, dy) = flow_rhs(problem, &x, &y, mu);
        stack(&dx, &dy)
    };

    let w0 = stack(x0, y0);
    let samples = cfg.samples();
    let states_w = match cfg.integrator {
        Integrator::Rk45 { rtol, atol } => {
            rk45_sampled(&rhs, w0, &samples, rtol, atol, cfg.t_end)?
        }
        Integrator::Euler { alpha } => euler_sampled(&rhs, w0, &samples, alpha),
    };

    let states: Vec<(DVector<f64>, DVector<f64>)> = states_w
        .into_iter()
        .map(|w| {
            let x = DVector::from(w.rows(0, n).into_owned());
            let y = DVector::from(w.rows(n, w.len() - n).into_owned());
            (x, y)
        })
        .collect();
    let distance_to_ref = reference.map(|(xr, yr)| {
        states.iter().map(|(x, y)| ((x - xr).norm_squared() + (y - yr).norm_squared()).sqrt()).collect()
    });

    Ok(FlowTrajectory { times: samples, states, distance_to_ref })
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut w = DVector::zeros(a.len() + b.len());
    w.rows_mut(0, a.len()).copy_from(a);
    w.rows_mut(a.len(), b.len()).copy_from(b);
    w
}

// Dormand-Prince 4(5) tableau. The last stage is evaluated at the accepted
// point, so it seeds the first stage of the next step.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn rk45_sampled(
    rhs: &dyn Fn(f64, &DVector<f64>) -> DVector<f64>,
    w0: DVector<f64>,
    samples: &[f64],
    rtol: f64,
    atol: f64,
    t_end: f64,
) -> Result<Vec<DVector<f64>>, FlowError> {
    let dim = w0.len();
    let mut t = 0.0_f64;
    let mut w = w0;
    let mut k1 = rhs(t, &w);
    let mut h = (0.01 * (1.0 + w.norm()) / (1.0 + k1.norm())).min(t_end);
    let h_min = 1e-14 * t_end.max(1.0);
    let mut out = Vec::with_capacity(samples.len());

    for &ts in samples {
        while ts - t > h_min {
            let h_try = h.min(ts - t);
            let mut k = vec![DVector::zeros(dim); 7];
            k[0] = k1.clone();
            for stage in 0..6 {
                let mut arg = w.clone();
                for (j, &coeff) in DP_A[stage].iter().enumerate() {
                    if coeff != 0.0 {
                        arg.axpy(h_try * coeff, &k[j], 1.0);
                    }
                }
                k[stage + 1] = rhs(t + DP_C[stage] * h_try, &arg);
            }
            // The fifth stage row of the tableau is also the fifth-order
            // solution weight vector, so k[6] is the derivative at w_new.
            let mut w_new = w.clone();
            for (j, &coeff) in DP_A[5].iter().enumerate() {
                if coeff != 0.0 {
                    w_new.axpy(h_try * coeff, &k[j], 1.0);
                }
            }
            let mut err = DVector::zeros(dim);
            for (j, &coeff) in DP_ERR.iter().enumerate() {
                if coeff != 0.0 {
                    err.axpy(h_try * coeff, &k[j], 1.0);
                }
            }
            let mut acc = 0.0;
            for i in 0..dim {
                let scale = atol + rtol * w[i].abs().max(w_new[i].abs());
                let r = err[i] / scale;
                acc += r * r;
            }
            let err_norm = (acc / dim as f64).sqrt();

            if err_norm.is_finite() && err_norm <= 1.0 {
                t += h_try;
                w = w_new;
                k1 = k[6].clone();
                let factor = if err_norm == 0.0 {
                    5.0
                } else {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                // Grow from the natural step, not the output-clipped one.
                h = (h_try * factor).max(h);
            } else {
                let factor = if err_norm.is_finite() {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 0.9)
                } else {
                    0.5
                };
                h = h_try * factor;
                if h < h_min {
                    return Err(FlowError::StepSizeUnderflow { t });
                }
            }
        }
        out.push(w.clone());
    }
    Ok(out)
}

fn euler_sampled(
    rhs: &dyn Fn(f64, &DVector<f64>) -> DVector<f64>,
    w0: DVector<f64>,
    samples: &[f64],
    alpha: f64,
) -> Vec<DVector<f64>> {
    let mut t = 0.0_f64;
    let mut w = w0;
    let mut out = Vec::with_capacity(samples.len());
    for &ts in samples {
        while ts - t > 1e-14 * ts.max(1.0) {
            let h = alpha.min(ts - t);
            let dw = rhs(t, &w);
            w.axpy(h, &dw, 1.0);
            t += h;
        }
        out.push(w.clone());
    }
    out
}

/// One synchronous round of the distributed discretization
/// `x⁺ = (I − (α/μ)L)x − α∇f(x) − αỹ`, `ỹ⁺ = ỹ + αβLx`.
///
/// `grad_f` maps `(agent index, agent state)` to that agent's local gradient.
/// Each agent's update reads only its own state, its dual aggregate, and the
/// states of neighbors with a nonzero Laplacian entry.
pub fn network_flow_step(
    grad_f: &dyn Fn(usize, f64) -> f64,
    laplacian: &DMatrix<f64>,
    x: &DVector<f64>,
    y_tilde: &DVector<f64>,
    mu: f64,
    beta: f64,
    alpha: f64,
) -> (DVector<f64>, DVector<f64>) {
    let n = laplacian.nrows();
    assert_eq!(laplacian.ncols(), n, "Laplacian must be square");
    assert_eq!(x.len(), n, "x has wrong dimension");
    assert_eq!(y_tilde.len(), n, "y_tilde has wrong dimension");
    assert!(mu > 0.0 && beta > 0.0 && alpha > 0.0, "parameters must be positive");

    let mut lx = DVector::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let w = laplacian[(i, j)];
            if w != 0.0 {
                acc += w * x[j];
            }
        }
        lx[i] = acc;
    }
    let x_next =
        DVector::from_fn(n, |i, _| x[i] - alpha / mu * lx[i] - alpha * grad_f(i, x[i]) - alpha * y_tilde[i]);
    let y_next = DVector::from_fn(n, |i, _| y_tilde[i] + alpha * beta * lx[i]);
    (x_next, y_next)
}

/// Running correction `½ Σ_{i<k} (W − I)xⁱ` for [`extra_step`], updated
/// incrementally so each step costs one extra matrix-vector product.
#[derive(Clone, Debug)]
pub struct ExtraHistory {
    correction: DVector<f64>,
}

impl ExtraHistory {
    pub fn new(n: usize) -> Self {
        ExtraHistory { correction: DVector::zeros(n) }
    }
}

/// One step of the EXTRA recursion
/// `x^{k+1} = Wx^k − α∇f(x^k) + ½ Σ_{i<k} (W − I)xⁱ`.
///
/// With `W = I − (α/μ)L` and `β = 1/(2αμ)`, the iterates coincide with the
/// x-component of [`network_flow_step`] started from `ỹ⁰ = 0`.
pub fn extra_step(
    w_mix: &DMatrix<f64>,
    grad_f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    alpha: f64,
    x: &DVector<f64>,
    history: &mut ExtraHistory,
) -> DVector<f64> {
    assert_eq!(w_mix.nrows(), w_mix.ncols(), "mixing matrix must be square");
    assert_eq!(x.len(), w_mix.nrows(), "x has wrong dimension");
    assert_eq!(history.correction.len(), x.len(), "history has wrong dimension");

    let wx = w_mix * x;
    let x_next = &wx - grad_f(x) * alpha + &history.correction;
    history.correction += (&wx - x) * 0.5;
    x_next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{ista_solve, StepRule};
    use crate::problem::{LinearMap, SmoothObjective};
    use crate::regularizer::Regularizer;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lasso_fixture(seed: u64, n: usize) -> (CompositeProblem, DVector<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
            + DMatrix::identity(n, n) * 2.0;
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let gamma = 0.1 * a.tr_mul(&b).amax();
        let oracle = ista_solve(&a, &b, gamma, StepRule::Fixed, 1e-12, 1_000_000);
        assert!(oracle.converged);
        let y_star = -a.tr_mul(&(&a * &oracle.x - &b));
        let problem = CompositeProblem::new(
            SmoothObjective::least_squares(a, b),
            Regularizer::l1(gamma),
            LinearMap::identity(n),
        )
        .unwrap();
        (problem, oracle.x, y_star)
    }

    fn path_incidence(n: usize) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(n - 1, n);
        for e in 0..n - 1 {
            t[(e, e)] = 1.0;
            t[(e, e + 1)] = -1.0;
        }
        t
    }

    #[test]
    fn rhs_matches_pal_gradients() {
        let (problem, _, _) = lasso_fixture(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let mu = 0.7;
        let (dx, dy) = flow_rhs(&problem, &x, &y, mu);
        let eval = problem.pal_eval(&x, &y, mu);
        assert_eq!(dx, -eval.grad_x());
        assert_eq!(dy, eval.grad_y());
    }

    #[test]
    fn rhs_vanishes_at_kkt_point() {
        let (problem, x_star, y_star) = lasso_fixture(9, 6);
        let (dx, dy) = flow_rhs(&problem, &x_star, &y_star, 0.5);
        assert!(dx.norm() <= 1e-10, "dx norm {}", dx.norm());
        assert!(dy.norm() <= 1e-10, "dy norm {}", dy.norm());
    }

    #[test]
    fn rhs_closed_form_for_zero_set() {
        let n = 4;
        let problem = CompositeProblem::new(
            SmoothObjective::new(|_| 0.0, |x| DVector::zeros(x.len())),
            Regularizer::zero_set(),
            LinearMap::identity(n),
        )
        .unwrap();
        let mu = 0.3;
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = DVector::from_vec(vec![0.2, 0.0, -1.0, 0.4]);
        let (dx, dy) = flow_rhs(&problem, &x, &y, mu);
        let expected_dx = -(&x + &y * mu) / mu;
        assert_relative_eq!(dx, expected_dx, epsilon = 1e-14);
        assert_relative_eq!(dy, x, epsilon = 1e-14);
    }

    #[test]
    fn equilibrium_stays_stationary() {
        let (problem, x_star, y_star) = lasso_fixture(17, 5);
        let cfg = FlowConfig::new(1.0, 10.0);
        let traj = integrate_flow(&problem, &x_star, &y_star, &cfg, Some((&x_star, &y_star))).unwrap();
        let drift = traj.distance_to_ref.unwrap();
        assert!(drift.iter().all(|&d| d <= 1e-8), "max drift {:e}", drift.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn lasso_flow_converges_to_reference() {
        let (problem, x_star, y_star) = lasso_fixture(23, 5);
        let mu = {
            let l = problem.f.gradient_lipschitz().unwrap();
            let m = problem.f.strong_convexity();
            (l - m).max(0.5)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let x0 = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let y0 = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let cfg = FlowConfig::new(mu, 50.0);
        let traj = integrate_flow(&problem, &x0, &y0, &cfg, Some((&x_star, &y_star))).unwrap();
        let dist = traj.distance_to_ref.unwrap();
        assert!(*dist.last().unwrap() <= 1e-6, "final distance {:e}", dist.last().unwrap());
        for w in dist.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "distance increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn explicit_sample_times_are_respected() {
        let (problem, x_star, y_star) = lasso_fixture(31, 4);
        let cfg = FlowConfig::new(1.0, 3.0).with_samples(vec![0.5, 1.0, 2.5]);
        let traj = integrate_flow(&problem, &x_star, &y_star, &cfg, None).unwrap();
        assert_eq!(traj.times, vec![0.5, 1.0, 2.5]);
        assert_eq!(traj.states.len(), 3);
        assert!(traj.distance_to_ref.is_none());
    }

    #[test]
    fn euler_tracks_rk45_to_first_order() {
        let (problem, _, _) = lasso_fixture(37, 4);
        let x0 = DVector::from_vec(vec![1.0, -1.0, 0.5, 0.0]);
        let y0 = DVector::zeros(4);
        let sample = vec![2.0];
        let reference = {
            let cfg = FlowConfig::new(1.0, 2.0).with_samples(sample.clone());
            integrate_flow(&problem, &x0, &y0, &cfg, None).unwrap().states.remove(0)
        };
        let err_at = |alpha: f64| {
            let cfg = FlowConfig {
                integrator: Integrator::Euler { alpha },
                ..FlowConfig::new(1.0, 2.0).with_samples(sample.clone())
            };
            let state = integrate_flow(&problem, &x0, &y0, &cfg, None).unwrap().states.remove(0);
            ((&state.0 - &reference.0).norm_squared() + (&state.1 - &reference.1).norm_squared())
                .sqrt()
        };
        let e1 = err_at(1e-2);
        let e2 = err_at(5e-3);
        let ratio = e1 / e2;
        assert!((1.5..2.5).contains(&ratio), "halving the step scaled the error by {ratio}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (problem, x, y) = lasso_fixture(43, 3);
        for cfg in [
            FlowConfig::new(0.0, 1.0),
            FlowConfig::new(1.0, -1.0),
            FlowConfig { integrator: Integrator::Euler { alpha: 0.0 }, ..FlowConfig::new(1.0, 1.0) },
            FlowConfig::new(1.0, 1.0).with_samples(vec![0.5, 0.5]),
            FlowConfig::new(1.0, 1.0).with_samples(vec![0.5, 2.0]),
        ] {
            assert!(matches!(
                integrate_flow(&problem, &x, &y, &cfg, None),
                Err(FlowError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn non_finite_dynamics_underflow_instead_of_hanging() {
        let problem = CompositeProblem::new(
            SmoothObjective::new(|_| f64::NAN, |x| DVector::from_element(x.len(), f64::NAN)),
            Regularizer::l1(1.0),
            LinearMap::identity(2),
        )
        .unwrap();
        let cfg = FlowConfig::new(1.0, 1.0);
        let result = integrate_flow(&problem, &DVector::zeros(2), &DVector::zeros(2), &cfg, None);
        assert!(matches!(result, Err(FlowError::StepSizeUnderflow { .. })));
    }

    #[test]
    fn network_step_fixed_point_at_consensus() {
        let n = 5;
        let t = path_incidence(n);
        let laplacian = t.tr_mul(&t);
        let b = DVector::from_element(n, 2.0);
        let grad = move |i: usize, xi: f64| xi - b[i];
        let x = DVector::from_element(n, 2.0);
        let y = DVector::zeros(n);
        let (x1, y1) = network_flow_step(&grad, &laplacian, &x, &y, 1.0, 1.0, 0.1);
        assert_eq!(x1, x);
        assert_eq!(y1, y);
    }

    #[test]
    fn network_step_preserves_dual_orthogonality_and_locality() {
        let n = 6;
        let t = path_incidence(n);
        let laplacian = t.tr_mul(&t);
        let b = DVector::from_fn(n, |i, _| i as f64);
        let grad = move |i: usize, xi: f64| xi - b[i];
        let mut x = DVector::from_fn(n, |i, _| (i as f64 * 0.7).sin());
        let mut y = DVector::zeros(n);
        let ones = DVector::from_element(n, 1.0);
        for _ in 0..200 {
            let (xn, yn) = network_flow_step(&grad, &laplacian, &x, &y, 1.0, 1.0, 0.1);
            x = xn;
            y = yn;
            assert!(y.dot(&ones).abs() <= 1e-12, "dual left the zero-sum subspace");
        }

        // Agent 0's update must ignore agents outside its neighborhood.
        let mut x_far = x.clone();
        x_far[n - 1] += 10.0;
        let (x1, _) = network_flow_step(&grad, &laplacian, &x, &y, 1.0, 1.0, 0.1);
        let (x2, _) = network_flow_step(&grad, &laplacian, &x_far, &y, 1.0, 1.0, 0.1);
        assert_eq!(x1[0], x2[0]);
        assert_eq!(x1[1], x2[1]);
        assert_ne!(x1[n - 1], x2[n - 1]);
    }

    #[test]
    fn network_steps_reach_consensus_mean() {
        let n = 5;
        let t = path_incidence(n);
        let laplacian = t.tr_mul(&t);
        let b = DVector::from_vec(vec![1.0, -2.0, 4.0, 0.5, 3.5]);
        let mean = b.sum() / n as f64;
        let grad = {
            let b = b.clone();
            move |i: usize, xi: f64| xi - b[i]
        };
        let mut x = DVector::zeros(n);
        let mut y = DVector::zeros(n);
        for _ in 0..20_000 {
            let (xn, yn) = network_flow_step(&grad, &laplacian, &x, &y, 1.0, 1.0, 0.05);
            x = xn;
            y = yn;
        }
        for i in 0..n {
            assert_relative_eq!(x[i], mean, epsilon = 1e-6);
        }
    }

    #[test]
    fn network_euler_tracks_continuous_flow() {
        // The networked dynamics with β = 1 are the composite flow for
        // g = indicator of the origin in edge space, read through ỹ = Tᵀy.
        let n = 5;
        let t = path_incidence(n);
        let laplacian = t.tr_mul(&t);
        let m = t.nrows();
        let b = DVector::from_vec(vec![1.0, -2.0, 4.0, 0.5, 3.5]);
        let problem = CompositeProblem::new(
            SmoothObjective::quadratic(DMatrix::identity(n, n), -b.clone()),
            Regularizer::zero_set(),
            LinearMap::new(t.clone()),
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![0.2, 0.0, -0.3, 0.6, 0.1]);
        let t_end = 2.0;
        let cfg = FlowConfig::new(1.0, t_end).with_samples(vec![t_end]);
        let x_ref = integrate_flow(&problem, &x0, &DVector::zeros(m), &cfg, None)
            .unwrap()
            .states
            .remove(0)
            .0;

        let grad = {
            let b = b.clone();
            move |i: usize, xi: f64| xi - b[i]
        };
        let err_at = |alpha: f64| {
            let mut x = x0.clone();
            let mut y = DVector::zeros(n);
            let steps = (t_end / alpha).round() as usize;
            for _ in 0..steps {
                let (xn, yn) = network_flow_step(&grad, &laplacian, &x, &y, 1.0, 1.0, alpha);
                x = xn;
                y = yn;
            }
            (&x - &x_ref).norm()
        };
        let e1 = err_at(1e-2);
        let e2 = err_at(5e-3);
        let ratio = e1 / e2;
        assert!((1.5..2.5).contains(&ratio), "halving the step scaled the error by {ratio}");
    }

    #[test]
    fn extra_first_step_has_no_correction() {
        let w = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.8]);
        let grad = |x: &DVector<f64>| x.clone();
        let x0 = DVector::from_vec(vec![1.0, -1.0]);
        let mut history = ExtraHistory::new(2);
        let x1 = extra_step(&w, &grad, 0.1, &x0, &mut history);
        let expected = &w * &x0 - &x0 * 0.1;
        assert_relative_eq!(x1, expected, epsilon = 1e-15);
    }

    #[test]
    fn extra_identity_mixing_zero_step_is_stationary() {
        let w = DMatrix::identity(3, 3);
        let grad = |x: &DVector<f64>| x.clone();
        let x0 = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let mut history = ExtraHistory::new(3);
        let mut x = x0.clone();
        for _ in 0..5 {
            x = extra_step(&w, &grad, 0.0, &x, &mut history);
        }
        assert_eq!(x, x0);
    }

    #[test]
    fn extra_recovers_network_iterates() {
        let n = 10;
        let t = {
            // Cycle graph: one extra edge closing the path.
            let mut t = DMatrix::zeros(n, n);
            for e in 0..n - 1 {
                t[(e, e)] = 1.0;
                t[(e, e + 1)] = -1.0;
            }
            t[(n - 1, n - 1)] = 1.0;
            t[(n - 1, 0)] = -1.0;
            t
        };
        let laplacian = t.tr_mul(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let b = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let alpha = 0.05;
        let mu = 1.0;
        let beta = 1.0 / (2.0 * alpha * mu);
        let w_mix = DMatrix::identity(n, n) - &laplacian * (alpha / mu);

        let grad_agent = {
            let b = b.clone();
            move |i: usize, xi: f64| xi - b[i]
        };
        let grad_vec = {
            let b = b.clone();
            move |x: &DVector<f64>| x - &b
        };

        let x0 = DVector::from_fn(n, |i, _| (i as f64 * 0.3).cos());
        let mut x_net = x0.clone();
        let mut y_net = DVector::zeros(n);
        let mut x_extra = x0.clone();
        let mut history = ExtraHistory::new(n);
        for step in 0..50 {
            let (xn, yn) = network_flow_step(&grad_agent, &laplacian, &x_net, &y_net, mu, beta, alpha);
            x_net = xn;
            y_net = yn;
            x_extra = extra_step(&w_mix, &grad_vec, alpha, &x_extra, &mut history);
            assert!(
                (&x_net - &x_extra).norm() <= 1e-12,
                "iterates diverged at step {step}: {:e}",
                (&x_net - &x_extra).norm()
            );
        }
    }
}
