//! The proximal augmented Lagrangian.
//!
//! For `min f(x) + g(z)` subject to `Tx = z`, the augmented Lagrangian with
//! penalty `μ > 0` is
//!
//! ```text
//! L_μ(x, z; y) = f(x) + g(z) + ⟨y, Tx - z⟩ + ‖Tx - z‖² / (2μ)
//! ```
//!
//! Completing the square turns the `z`-dependent part into the proximal
//! objective of `g` at `v = Tx + μy`, so minimizing over `z` in closed form
//! gives the continuously differentiable *proximal* augmented Lagrangian
//!
//! ```text
//! L_μ(x; y) = f(x) + M_{μg}(Tx + μy) - (μ/2)‖y‖²,
//! ```
//!
//! with minimizer `z*_μ(x, y) = prox_{μg}(Tx + μy)` and partial gradients
//!
//! ```text
//! ∇_x L_μ = ∇f(x) + Tᵀ ∇M_{μg}(Tx + μy)
//! ∇_y L_μ = Tx - z*_μ(x, y) = μ (∇M_{μg}(Tx + μy) - y).
//! ```
//!
//! `∇_y L_μ` is the primal residual, so method-of-multiplier updates and the
//! saddle-point gradient flow both read off this one object. Every quantity
//! at a fixed `(x, y, μ)` shares a single prox evaluation through
//! [`PalEval`].

use nalgebra::DVector;

use crate::problem::{CompositeProblem, PrimalDualPoint};

/// All proximal-augmented-Lagrangian quantities at one `(x, y, μ)`. The
/// constructor performs the only prox evaluation; accessors reuse it.
pub struct PalEval<'a> {
    problem: &'a CompositeProblem,
    x: &'a DVector<f64>,
    y: &'a DVector<f64>,
    mu: f64,
    tx: DVector<f64>,
    /// `v = Tx + μy`, the prox argument.
    v: DVector<f64>,
    z_star: DVector<f64>,
}

impl<'a> PalEval<'a> {
    pub fn new(
        problem: &'a CompositeProblem,
        x: &'a DVector<f64>,
        y: &'a DVector<f64>,
        mu: f64,
    ) -> Self {
        assert!(mu > 0.0, "penalty parameter must be positive");
        assert_eq!(x.len(), problem.n(), "primal dimension mismatch");
        assert_eq!(y.len(), problem.m(), "dual dimension mismatch");
        let tx = problem.t.apply(x);
        let v = &tx + y * mu;
        let z_star = problem.g.prox(&v, mu);
        PalEval { problem, x, y, mu, tx, v, z_star }
    }

    /// The auxiliary-variable minimizer `z*_μ(x, y) = prox_{μg}(Tx + μy)`.
    pub fn z_star(&self) -> &DVector<f64> {
        &self.z_star
    }

    /// `L_μ(x; y)`.
    pub fn value(&self) -> f64 {
        let envelope = self.problem.g.value(&self.z_star)
            + (&self.z_star - &self.v).norm_squared() / (2.0 * self.mu);
        self.problem.f.value(self.x) + envelope - 0.5 * self.mu * self.y.norm_squared()
    }

    /// `∇M_{μg}(Tx + μy) = (v - z*) / μ`.
    pub fn moreau_grad(&self) -> DVector<f64> {
        (&self.v - &self.z_star) / self.mu
    }

    /// `∇_x L_μ = ∇f(x) + Tᵀ ∇M_{μg}(Tx + μy)`.
    pub fn grad_x(&self) -> DVector<f64> {
        self.problem.f.gradient(self.x) + self.problem.t.adjoint(&self.moreau_grad())
    }

    /// `∇_y L_μ = Tx - z*`, the primal residual.
    pub fn grad_y(&self) -> DVector<f64> {
        &self.tx - &self.z_star
    }
}

/// KKT residuals of the composite problem at `(x, y)`, measured at the
/// reference penalty `μ = 1`:
///
/// * `grad` — stationarity `‖∇f(x) + Tᵀy‖`,
/// * `feas` — primal feasibility `‖Tx - z‖` with `z = prox_g(Tx + y)`,
/// * `subgrad` — multiplier consistency `dist(y, ∂g(z))`.
#[derive(Clone, Copy, Debug)]
pub struct KktResiduals {
    pub grad: f64,
    pub feas: f64,
    pub subgrad: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.grad.max(self.feas).max(self.subgrad)
    }
}

impl CompositeProblem {
    pub fn pal_eval<'a>(
        &'a self,
        x: &'a DVector<f64>,
        y: &'a DVector<f64>,
        mu: f64,
    ) -> PalEval<'a> {
        PalEval::new(self, x, y, mu)
    }

    /// `z*_μ(x, y) = prox_{μg}(Tx + μy)`.
    pub fn z_star(&self, pt: &PrimalDualPoint) -> DVector<f64> {
        self.pal_eval(&pt.x, &pt.y, pt.mu).z_star().clone()
    }

    /// The proximal augmented Lagrangian `L_μ(x; y)`.
    pub fn eval_pal(&self, pt: &PrimalDualPoint) -> f64 {
        self.pal_eval(&pt.x, &pt.y, pt.mu).value()
    }

    /// The (non-reduced) augmented Lagrangian `L_μ(x, z; y)`; extended-real
    /// because `g(z)` may be an indicator.
    pub fn eval_aug_lagrangian(
        &self,
        x: &DVector<f64>,
        z: &DVector<f64>,
        y: &DVector<f64>,
        mu: f64,
    ) -> f64 {
        assert!(mu > 0.0, "penalty parameter must be positive");
        let r = self.t.apply(x) - z;
        self.f.value(x) + self.g.value(z) + y.dot(&r) + r.norm_squared() / (2.0 * mu)
    }

    pub fn grad_x(&self, pt: &PrimalDualPoint) -> DVector<f64> {
        self.pal_eval(&pt.x, &pt.y, pt.mu).grad_x()
    }

    pub fn grad_y(&self, pt: &PrimalDualPoint) -> DVector<f64> {
        self.pal_eval(&pt.x, &pt.y, pt.mu).grad_y()
    }

    /// KKT residuals at the reference penalty `μ = 1`; solver-independent, so
    /// different methods can be compared on one scale.
    pub fn kkt_residuals(&self, x: &DVector<f64>, y: &DVector<f64>) -> KktResiduals {
        let eval = self.pal_eval(x, y, 1.0);
        let grad = (self.f.gradient(x) + self.t.adjoint(y)).norm();
        let feas = eval.grad_y().norm();
        let subgrad = self.g.subgradient_distance(eval.z_star(), y);
        KktResiduals { grad, feas, subgrad }
    }
}
