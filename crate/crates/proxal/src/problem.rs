//! Problem data for composite minimization: a smooth term `f`, a linear map
//! `T`, and a nonsmooth regularizer `g`, posed as
//!
//! ```text
//! minimize  f(x) + g(T x)
//! ```
//!
//! with `f` convex and continuously differentiable and `g` one of the
//! [`Regularizer`] kinds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::numerics::symmetric_eigs;
use crate::regularizer::{Regularizer, RegularizerError};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("T maps dimension {t_cols} but f/x₀ use dimension {expected}")]
    PrimalDimensionMismatch { t_cols: usize, expected: usize },
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
}

type ValueFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// First-order oracle for the smooth term, with its convexity constants when
/// known. `m_f` is the strong-convexity modulus (0 when merely convex) and
/// `l_f` the gradient Lipschitz constant (None when not supplied).
#[derive(Clone)]
pub struct SmoothObjective {
    value_fn: Arc<ValueFn>,
    grad_fn: Arc<GradFn>,
    m_f: f64,
    l_f: Option<f64>,
}

impl SmoothObjective {
    pub fn new(
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        SmoothObjective {
            value_fn: Arc::new(value),
            grad_fn: Arc::new(gradient),
            m_f: 0.0,
            l_f: None,
        }
    }

    /// Records convexity constants. `m_f ≥ 0` and, when given, `l_f ≥ m_f`.
    pub fn with_convexity(mut self, m_f: f64, l_f: Option<f64>) -> Self {
        assert!(m_f >= 0.0, "strong convexity modulus must be nonnegative");
        if let Some(l) = l_f {
            assert!(l >= m_f, "Lipschitz constant cannot be below the convexity modulus");
        }
        self.m_f = m_f;
        self.l_f = l_f;
        self
    }

    /// `½ xᵀH x + qᵀx` for symmetric positive semidefinite `H`; convexity
    /// constants are the extreme eigenvalues.
    pub fn quadratic(h: DMatrix<f64>, q: DVector<f64>) -> Self {
        assert_eq!(h.nrows(), q.len(), "H and q disagree");
        let eig = symmetric_eigs(&h).expect("quadratic Hessian must be symmetric");
        let lam_min = *eig.values.first().expect("empty Hessian");
        let lam_max = *eig.values.last().unwrap();
        assert!(
            lam_min >= -1e-10 * lam_max.abs().max(1.0),
            "quadratic objective must be convex (λ_min = {lam_min})"
        );
        let h = Arc::new(h);
        let q = Arc::new(q);
        let (hv, qv) = (h.clone(), q.clone());
        SmoothObjective::new(
            move |x| 0.5 * x.dot(&(&*hv * x)) + qv.dot(x),
            move |x| &*h * x + &*q,
        )
        .with_convexity(lam_min.max(0.0), Some(lam_max))
    }

    /// `½ ‖A x - b‖²`; convexity constants are the squared extreme singular
    /// values of `A`.
    pub fn least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len(), "A and b disagree");
        let sv = a.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = if a.nrows() >= a.ncols() {
            sv.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        let a = Arc::new(a);
        let b = Arc::new(b);
        let (av, bv) = (a.clone(), b.clone());
        SmoothObjective::new(
            move |x| (&*av * x - &*bv).norm_squared() * 0.5,
            move |x| a.transpose() * (&*a * x - &*b),
        )
        .with_convexity(smin * smin, Some(smax * smax))
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value_fn)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.grad_fn)(x)
    }

    pub fn strong_convexity(&self) -> f64 {
        self.m_f
    }

    pub fn gradient_lipschitz(&self) -> Option<f64> {
        self.l_f
    }
}

/// Dense linear map with its adjoint. The matrix is stored explicitly so
/// spectral quantities (for step sizes and rate certificates) are available.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    m: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(m: DMatrix<f64>) -> Self {
        LinearMap { m }
    }

    pub fn identity(n: usize) -> Self {
        LinearMap { m: DMatrix::identity(n, n) }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        self.m.tr_mul(y)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> usize {
        self.m.nrows()
    }

    pub fn cols(&self) -> usize {
        self.m.ncols()
    }

    /// Exact structural identity test; gates the proximal-gradient inner
    /// method, which is only valid for `T = I`.
    pub fn is_identity(&self) -> bool {
        self.m.is_square() && self.m == DMatrix::identity(self.m.nrows(), self.m.ncols())
    }
}

/// A composite problem `min f(x) + g(Tx)` with consistent dimensions:
/// `T: ℝⁿ → ℝᵐ`, `g` on `ℝᵐ`.
pub struct CompositeProblem {
    pub f: SmoothObjective,
    pub g: Regularizer,
    pub t: LinearMap,
}

impl CompositeProblem {
    pub fn new(f: SmoothObjective, g: Regularizer, t: LinearMap) -> Result<Self, ProblemError> {
        g.check_dim(t.rows())?;
        Ok(CompositeProblem { f, g, t })
    }

    /// Primal dimension `n`.
    pub fn n(&self) -> usize {
        self.t.cols()
    }

    /// Constraint dimension `m`.
    pub fn m(&self) -> usize {
        self.t.rows()
    }

    /// The composite objective `f(x) + g(Tx)`, extended-real valued.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.f.value(x) + self.g.value(&self.t.apply(x))
    }
}

/// A primal-dual pair together with the penalty parameter in force.
#[derive(Clone, Debug)]
pub struct PrimalDualPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub mu: f64,
}

impl PrimalDualPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>, mu: f64) -> Self {
        assert!(mu > 0.0, "penalty parameter must be positive");
        PrimalDualPoint { x, y, mu }
    }
}
