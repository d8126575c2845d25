//! Nonsmooth composite optimization via the proximal augmented Lagrangian.
//!
//! The toolkit solves `min f(x) + g(Tx)` for smooth `f`, a closed-form-prox
//! regularizer `g`, and a linear map `T`. One construction powers
//! everything here: replacing `g` by its Moreau envelope inside the
//! augmented Lagrangian gives a once-differentiable saddle function whose
//! minimizers, saddle points, and gradient-flow equilibria all coincide
//! with the KKT points of the original problem.
//!
//! Module map:
//!
//! - [`regularizer`]: prox operators, Moreau envelopes, and subdifferential
//!   distances for the supported `g` kinds.
//! - [`problem`] and [`pal`]: composite problem containers, the proximal
//!   augmented Lagrangian, and KKT residuals.
//! - [`mm`]: the adaptive-penalty method of multipliers.
//! - [`baselines`]: ISTA and ADMM for comparison studies.
//! - [`flow`]: primal-descent dual-ascent dynamics, their distributed
//!   discretization, and the EXTRA recursion.
//! - [`rates`]: exponential decay estimates and certificates for the flow.
//! - [`consensus`]: sparsity-promoting edge addition for consensus
//!   networks, with polishing and exhaustive-search baselines.
//! - [`placement`]: multi-agent target tracking under distance bounds.
//! - [`numerics`]: shared linear-algebra helpers.
//! - [`cli`]: the config-driven experiment harness behind the `proxal`
//!   binary.
//!
//! Each capability has a runnable demonstration under `examples/`:
//! `prox_calculus`, `lasso_comparison`, `penalty_schedule`, `saddle_flow`,
//! `rate_certificate`, `distributed_consensus`, `edge_addition`,
//! `agent_placement`, and `scaling_study`.

pub mod baselines;
pub mod cli;
pub mod consensus;
pub mod flow;
pub mod mm;
pub mod numerics;
pub mod pal;
pub mod placement;
pub mod problem;
pub mod rates;
pub mod regularizer;
