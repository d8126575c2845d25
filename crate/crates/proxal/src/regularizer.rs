//! Separable nonsmooth regularizers with closed-form proximal operators and
//! Moreau envelopes.
//!
//! For a convex `g` and `μ > 0` the proximal operator and Moreau envelope are
//!
//! ```text
//! prox_{μg}(v) = argmin_z  g(z) + ‖z - v‖² / (2μ)
//! M_{μg}(v)    = g(prox_{μg}(v)) + ‖prox_{μg}(v) - v‖² / (2μ)
//! ```
//!
//! `M_{μg}` is continuously differentiable with the 1/μ-Lipschitz gradient
//! `∇M_{μg}(v) = (v - prox_{μg}(v)) / μ`, which is how [`Regularizer::moreau_grad`]
//! computes it; the per-kind closed forms (Huber derivative, saturation at γ,
//! scaled clamp distances) serve as test oracles. Every kind here is
//! coordinate-separable, so proximal operators act componentwise.

use std::ops::Range;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegularizerError {
    #[error("regularizer expects dimension {expected}, argument has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid regularizer: {0}")]
    Invalid(String),
    #[error("bad regularizer descriptor: {0}")]
    BadDescriptor(#[from] serde_json::Error),
}

/// A convex, coordinate-separable regularizer. Indicator-type kinds take the
/// value `+∞` outside their set; [`Regularizer::value`] returns that honestly,
/// and line searches treat it as a rejected point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    /// `γ ‖z‖₁`. Prox is soft thresholding at `γμ`; the envelope is the Huber
    /// function, and its gradient saturates at `±γ`.
    L1 { gamma: f64 },
    /// `γ 1ᵀz + I(z ≥ 0)`: a linear cost plus the nonnegativity indicator.
    /// Prox is `max{0, v - γμ}` componentwise.
    ShiftedL1Nonneg { gamma: f64 },
    /// Indicator of `{z : z_i = 0 off the pattern, z_i ≥ 0 on it}`. Prox is
    /// the Euclidean projection: zero off-pattern, clamp at zero on-pattern.
    PatternNonneg {
        #[serde(with = "pattern_bits")]
        pattern: Vec<bool>,
    },
    /// Indicator of the box `[lo, hi]^m`. Prox clamps componentwise.
    #[serde(rename = "box")]
    BoxIndicator { lo: f64, hi: f64 },
    /// Indicator of `{0}`. Prox is the zero map and the envelope is `‖v‖²/2μ`.
    ZeroSet,
    /// Block-separable sum: each entry applies a regularizer to a coordinate
    /// range. Ranges must be disjoint; uncovered coordinates are unregularized
    /// (their prox is the identity).
    SumSeparable { blocks: Vec<(Regularizer, Range<usize>)> },
}

impl Regularizer {
    pub fn l1(gamma: f64) -> Self {
        assert!(gamma >= 0.0, "l1 weight must be nonnegative");
        Regularizer::L1 { gamma }
    }

    pub fn shifted_l1_nonneg(gamma: f64) -> Self {
        assert!(gamma >= 0.0, "linear weight must be nonnegative");
        Regularizer::ShiftedL1Nonneg { gamma }
    }

    pub fn pattern_nonneg(pattern: Vec<bool>) -> Self {
        assert!(!pattern.is_empty(), "pattern must be nonempty");
        Regularizer::PatternNonneg { pattern }
    }

    pub fn box_indicator(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "box bounds must be ordered");
        Regularizer::BoxIndicator { lo, hi }
    }

    pub fn zero_set() -> Self {
        Regularizer::ZeroSet
    }

    pub fn sum_separable(blocks: Vec<(Regularizer, Range<usize>)>) -> Self {
        let reg = Regularizer::SumSeparable { blocks };
        reg.validate().expect("invalid block structure");
        reg
    }

    /// Parses a JSON descriptor such as `{"kind":"l1","gamma":1.0}` or
    /// `{"kind":"box","lo":-1,"hi":1}` and validates its parameters.
    pub fn from_json(text: &str) -> Result<Self, RegularizerError> {
        let reg: Regularizer = serde_json::from_str(text)?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("regularizer serialization cannot fail")
    }

    /// Parameter validation for descriptors that bypassed the constructors.
    pub fn validate(&self) -> Result<(), RegularizerError> {
        match self {
            Regularizer::L1 { gamma } | Regularizer::ShiftedL1Nonneg { gamma } => {
                if !(*gamma >= 0.0) {
                    return Err(RegularizerError::Invalid(format!("negative weight {gamma}")));
                }
            }
            Regularizer::PatternNonneg { pattern } => {
                if pattern.is_empty() {
                    return Err(RegularizerError::Invalid("empty pattern".into()));
                }
            }
            Regularizer::BoxIndicator { lo, hi } => {
                if !(lo <= hi) {
                    return Err(RegularizerError::Invalid(format!("bad box [{lo}, {hi}]")));
                }
            }
            Regularizer::ZeroSet => {}
            Regularizer::SumSeparable { blocks } => {
                let mut sorted: Vec<&Range<usize>> = blocks.iter().map(|(_, r)| r).collect();
                sorted.sort_by_key(|r| r.start);
                for w in sorted.windows(2) {
                    if w[1].start < w[0].end {
                        return Err(RegularizerError::Invalid(format!(
                            "overlapping blocks {:?} and {:?}",
                            w[0], w[1]
                        )));
                    }
                }
                for (reg, r) in blocks {
                    if r.start >= r.end {
                        return Err(RegularizerError::Invalid(format!("empty block {r:?}")));
                    }
                    reg.validate()?;
                    if let Regularizer::PatternNonneg { pattern } = reg {
                        if pattern.len() != r.len() {
                            return Err(RegularizerError::DimensionMismatch {
                                expected: pattern.len(),
                                got: r.len(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that the regularizer accepts arguments of length `m`.
    /// Pattern kinds pin the dimension exactly; block sums need at least
    /// their largest covered index; scalarwise kinds accept any length.
    pub fn check_dim(&self, m: usize) -> Result<(), RegularizerError> {
        match self {
            Regularizer::PatternNonneg { pattern } if pattern.len() != m => {
                Err(RegularizerError::DimensionMismatch { expected: pattern.len(), got: m })
            }
            Regularizer::SumSeparable { blocks } => {
                let needed = blocks.iter().map(|(_, r)| r.end).max().unwrap_or(0);
                if m < needed {
                    Err(RegularizerError::DimensionMismatch { expected: needed, got: m })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Evaluates `g(z)`, returning `f64::INFINITY` outside the domain.
    /// Indicator membership is exact, which is the right semantics for
    /// arguments produced by [`Regularizer::prox`].
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        self.value_slice(z.as_slice())
    }

    fn value_slice(&self, z: &[f64]) -> f64 {
        match self {
            Regularizer::L1 { gamma } => gamma * z.iter().map(|zi| zi.abs()).sum::<f64>(),
            Regularizer::ShiftedL1Nonneg { gamma } => {
                if z.iter().any(|&zi| zi < 0.0) {
                    f64::INFINITY
                } else {
                    gamma * z.iter().sum::<f64>()
                }
            }
            Regularizer::PatternNonneg { pattern } => {
                assert_eq!(pattern.len(), z.len(), "pattern length mismatch");
                let feasible = pattern
                    .iter()
                    .zip(z)
                    .all(|(&on, &zi)| if on { zi >= 0.0 } else { zi == 0.0 });
                if feasible {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::BoxIndicator { lo, hi } => {
                if z.iter().all(|&zi| *lo <= zi && zi <= *hi) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::ZeroSet => {
                if z.iter().all(|&zi| zi == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::SumSeparable { blocks } => blocks
                .iter()
                .map(|(reg, r)| reg.value_slice(&z[r.clone()]))
                .sum(),
        }
    }

    /// The proximal operator `prox_{μg}(v)`, componentwise in closed form.
    pub fn prox(&self, v: &DVector<f64>, mu: f64) -> DVector<f64> {
        assert!(mu > 0.0, "prox parameter must be positive");
        let mut out = v.clone();
        self.prox_slice(out.as_mut_slice(), mu);
        out
    }

    /// In-place prox on a slice; entry point for block recursion.
    fn prox_slice(&self, v: &mut [f64], mu: f64) {
        match self {
            Regularizer::L1 { gamma } => {
                let t = gamma * mu;
                for vi in v.iter_mut() {
                    *vi = soft_threshold(*vi, t);
                }
            }
            Regularizer::ShiftedL1Nonneg { gamma } => {
                let t = gamma * mu;
                for vi in v.iter_mut() {
                    *vi = (*vi - t).max(0.0);
                }
            }
            Regularizer::PatternNonneg { pattern } => {
                assert_eq!(pattern.len(), v.len(), "pattern length mismatch");
                for (vi, &on) in v.iter_mut().zip(pattern) {
                    *vi = if on { vi.max(0.0) } else { 0.0 };
                }
            }
            Regularizer::BoxIndicator { lo, hi } => {
                for vi in v.iter_mut() {
                    *vi = vi.clamp(*lo, *hi);
                }
            }
            Regularizer::ZeroSet => v.fill(0.0),
            Regularizer::SumSeparable { blocks } => {
                for (reg, r) in blocks {
                    reg.prox_slice(&mut v[r.clone()], mu);
                }
            }
        }
    }

    /// The Moreau envelope `M_{μg}(v)`, in closed form per kind: Huber for the
    /// l1 kinds, scaled squared set-distance for the indicators.
    pub fn moreau(&self, v: &DVector<f64>, mu: f64) -> f64 {
        assert!(mu > 0.0, "envelope parameter must be positive");
        self.moreau_slice(v.as_slice(), mu)
    }

    fn moreau_slice(&self, v: &[f64], mu: f64) -> f64 {
        match self {
            Regularizer::L1 { gamma } => v
                .iter()
                .map(|&vi| {
                    let a = vi.abs();
                    if a <= gamma * mu {
                        a * a / (2.0 * mu)
                    } else {
                        gamma * (a - gamma * mu / 2.0)
                    }
                })
                .sum(),
            Regularizer::ShiftedL1Nonneg { gamma } => v
                .iter()
                .map(|&vi| {
                    if vi <= gamma * mu {
                        vi * vi / (2.0 * mu)
                    } else {
                        gamma * (vi - gamma * mu / 2.0)
                    }
                })
                .sum(),
            Regularizer::PatternNonneg { pattern } => {
                assert_eq!(pattern.len(), v.len(), "pattern length mismatch");
                v.iter()
                    .zip(pattern)
                    .map(|(&vi, &on)| {
                        let d = if on { vi.min(0.0) } else { vi };
                        d * d / (2.0 * mu)
                    })
                    .sum()
            }
            Regularizer::BoxIndicator { lo, hi } => v
                .iter()
                .map(|&vi| {
                    let d = (vi - hi).max(0.0) + (lo - vi).max(0.0);
                    d * d / (2.0 * mu)
                })
                .sum(),
            Regularizer::ZeroSet => v.iter().map(|&vi| vi * vi).sum::<f64>() / (2.0 * mu),
            Regularizer::SumSeparable { blocks } => {
                let mut total = 0.0;
                let mut covered = vec![false; v.len()];
                for (reg, r) in blocks {
                    total += reg.moreau_slice(&v[r.clone()], mu);
                    covered[r.clone()].fill(true);
                }
                // Uncovered coordinates carry no regularization, hence no
                // envelope contribution.
                let _ = covered;
                total
            }
        }
    }

    /// The envelope gradient, computed exactly as `(v - prox_{μg}(v)) / μ`.
    pub fn moreau_grad(&self, v: &DVector<f64>, mu: f64) -> DVector<f64> {
        let p = self.prox(v, mu);
        (v - p) / mu
    }

    /// Euclidean distance from `y` to the subdifferential `∂g(z)`, the
    /// multiplier-consistency term of the KKT residual. Componentwise the
    /// subdifferentials are intervals, so the distance is elementary; an
    /// infeasible `z` for an indicator kind gives `+∞`.
    pub fn subgradient_distance(&self, z: &DVector<f64>, y: &DVector<f64>) -> f64 {
        assert_eq!(z.len(), y.len(), "dimension mismatch");
        self.subgrad_dist_sq(z.as_slice(), y.as_slice()).sqrt()
    }

    fn subgrad_dist_sq(&self, z: &[f64], y: &[f64]) -> f64 {
        let per_coord: Box<dyn Fn(f64, f64) -> f64> = match self {
            Regularizer::L1 { gamma } => Box::new(move |zi: f64, yi: f64| {
                if zi == 0.0 {
                    (yi.abs() - gamma).max(0.0)
                } else {
                    (yi - gamma * zi.signum()).abs()
                }
            }),
            Regularizer::ShiftedL1Nonneg { gamma } => Box::new(move |zi: f64, yi: f64| {
                if zi < 0.0 {
                    f64::INFINITY
                } else if zi == 0.0 {
                    // ∂g(0) = γ + (-∞, 0]
                    (yi - gamma).max(0.0)
                } else {
                    (yi - gamma).abs()
                }
            }),
            Regularizer::BoxIndicator { lo, hi } => Box::new(move |zi: f64, yi: f64| {
                if zi < *lo || zi > *hi {
                    f64::INFINITY
                } else {
                    let mut d: f64 = yi.abs();
                    if zi == *lo {
                        d = d.min(yi.max(0.0));
                    }
                    if zi == *hi {
                        d = d.min((-yi).max(0.0));
                    }
                    d
                }
            }),
            Regularizer::ZeroSet => Box::new(|zi: f64, _| if zi == 0.0 { 0.0 } else { f64::INFINITY }),
            Regularizer::PatternNonneg { pattern } => {
                let mut total = 0.0;
                for ((&zi, &yi), &on) in z.iter().zip(y).zip(pattern) {
                    let d = if on {
                        if zi < 0.0 {
                            f64::INFINITY
                        } else if zi == 0.0 {
                            yi.max(0.0)
                        } else {
                            yi.abs()
                        }
                    } else if zi == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    total += d * d;
                }
                return total;
            }
            Regularizer::SumSeparable { blocks } => {
                let mut total = 0.0;
                let mut covered = vec![false; z.len()];
                for (reg, r) in blocks {
                    total += reg.subgrad_dist_sq(&z[r.clone()], &y[r.clone()]);
                    covered[r.clone()].fill(true);
                }
                for (i, c) in covered.iter().enumerate() {
                    if !c {
                        total += y[i] * y[i];
                    }
                }
                return total;
            }
        };
        z.iter().zip(y).map(|(&zi, &yi)| { let d = per_coord(zi, yi); d * d }).sum()
    }
}

/// Scalar soft-threshold `sign(v)·max(|v| − t, 0)`, the prox of `t·|·|`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Serializes boolean patterns as 0/1 integer arrays, the descriptor wire
/// format.
mod pattern_bits {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(pattern: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(pattern.iter().map(|&b| u8::from(b)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let bits: Vec<u8> = Vec::deserialize(d)?;
        Ok(bits.into_iter().map(|b| b != 0).collect())
    }
}
