//! Choosing sparse sets of directed edges to add to a consensus network.
//!
//! A plant digraph runs the consensus dynamics `ψ̇ = -(L_p + L_x(z)) ψ + w`
//! with unit white noise `w` entering every node. `L_p` is the plant
//! Laplacian and `L_x(z)` the Laplacian of the added edges, weighted by
//! `z ≥ 0` and drawn from a candidate list. The design cost is the
//! steady-state variance of the consensus error plus a quadratic penalty on
//! the coupling effort,
//!
//! ```text
//! f(z) = ⟨Vᵀ(Q + L_x(z)ᵀ R L_x(z)) V, X⟩,    Â X + X Âᵀ + I = 0,
//! Â    = -Vᵀ(L_p + L_x(z)) V,
//! ```
//!
//! where `Q = I - 11ᵀ/n` projects out the agreement mode and `V` is an
//! orthonormal basis of its range, so `Â` is the noise-to-error dynamics on
//! the disagreement subspace. Off the stability region the cost is `+∞`.
//!
//! Averaging is only preserved when the weighted digraph stays balanced
//! (in-weight equals out-weight at every node), a linear constraint
//! `E z = 0` on the weights. `T` is an orthonormal basis of that subspace,
//! so the free variable is `x` with `z = T x` and the balance constraint
//! holds identically.
//!
//! Selection runs in two phases. [`sparsify`] minimizes
//! `f(Tx) + γ 1ᵀ(Tx)` subject to `Tx ≥ 0` over a decreasing-to-increasing
//! grid of penalty weights `γ` (a warm-started homotopy); the support of the
//! result is the selected edge set. [`polish`] then re-minimizes with the
//! support fixed and the penalty dropped, giving the best weights for that
//! edge set. [`brute_force_best_subset`] certifies small instances by
//! enumerating every k-subset of candidates and polishing each.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mm::{mm_solve, MmOptions, SolverError};
use crate::numerics::{
    nullspace_basis, ones_complement, solve_lyapunov, spectral_abscissa, symmetric_eigs,
};
use crate::problem::{CompositeProblem, LinearMap, SmoothObjective};
use crate::regularizer::Regularizer;

/// Enumeration ceiling for [`brute_force_best_subset`].
const SUBSET_BUDGET: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("plant is not balanced: in/out weight mismatch up to {imbalance:.3e}")]
    PlantNotBalanced { imbalance: f64 },
    #[error("plant is not connected: algebraic connectivity {fiedler:.3e}")]
    PlantNotConnected { fiedler: f64 },
    #[error("closed loop is unstable at the evaluation point (spectral abscissa {abscissa:.3e})")]
    UnstablePoint { abscissa: f64 },
    #[error("C({m}, {k}) = {subsets:.3e} subsets exceeds the enumeration budget {budget:.0e}")]
    SubsetBudgetExceeded { m: usize, k: usize, subsets: f64, budget: f64 },
    #[error("graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// A weighted digraph on nodes `1..=n`. An edge `(from, to, w)` couples the
/// state of `from` into the update of `to` with strength `w ≥ 0`, so the
/// consensus dynamics read `ψ̇_to += w (ψ_from - ψ_to)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectedGraph {
    #[serde(rename = "n")]
    pub n_nodes: usize,
    /// 1-based `(from, to, weight)` triples.
    pub edges: Vec<(usize, usize, f64)>,
}

impl DirectedGraph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self, ConsensusError> {
        let g = DirectedGraph { n_nodes, edges };
        g.validate()?;
        Ok(g)
    }

    /// Parses `{"n": 7, "edges": [[1, 2, 1.0], ...]}`.
    pub fn from_json(text: &str) -> Result<Self, ConsensusError> {
        let g: DirectedGraph = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.n_nodes < 2 {
            return Err(ConsensusError::InvalidGraph("need at least two nodes".into()));
        }
        for &(from, to, w) in &self.edges {
            check_node_pair(from, to, self.n_nodes)?;
            if !w.is_finite() || w < 0.0 {
                return Err(ConsensusError::InvalidGraph(format!(
                    "edge ({from}, {to}) has weight {w}; weights must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }

    /// The graph Laplacian under the convention above: edge `(from, to, w)`
    /// contributes `w (e_to e_toᵀ - e_to e_fromᵀ)`. Row sums are zero by
    /// construction; column sums are zero exactly when the graph is balanced.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n_nodes, self.n_nodes);
        for &(from, to, w) in &self.edges {
            accumulate_edge(&mut l, from, to, w);
        }
        l
    }
}

fn check_node_pair(from: usize, to: usize, n: usize) -> Result<(), ConsensusError> {
    if from == 0 || to == 0 || from > n || to > n {
        return Err(ConsensusError::InvalidGraph(format!(
            "edge ({from}, {to}) outside the 1-based node range 1..={n}"
        )));
    }
    if from == to {
        return Err(ConsensusError::InvalidGraph(format!("self-loop at node {from}")));
    }
    Ok(())
}

fn accumulate_edge(l: &mut DMatrix<f64>, from: usize, to: usize, w: f64) {
    let (i, j) = (to - 1, from - 1);
    l[(i, i)] += w;
    l[(i, j)] -= w;
}

/// An edge-addition design problem: plant, candidate edges, effort weight
/// `R`, and the default sparsity penalty `γ`. Construction precomputes the
/// balance-preserving weight basis `T` and the reduced operators on the
/// disagreement subspace.
#[derive(Clone, Debug)]
pub struct ConsensusProblem {
    plant: DirectedGraph,
    lp: DMatrix<f64>,
    /// 1-based `(from, to)` pairs, in a fixed order shared by `E`, `T`, and
    /// every weight vector.
    candidates: Vec<(usize, usize)>,
    /// Balance map: column `l` is `e_to - e_from`, so balanced weight
    /// vectors are exactly `E z = 0`.
    e_mat: DMatrix<f64>,
    /// Orthonormal basis of `ker E`; weights are parametrized as `z = T x`.
    t_basis: DMatrix<f64>,
    /// Orthonormal basis of `1 ⊥`; the reduced state is `Vᵀψ`.
    v: DMatrix<f64>,
    r: DMatrix<f64>,
    gamma: f64,
    /// `Vᵀ L_p V`.
    base_a: DMatrix<f64>,
    /// `Vᵀ (I - 11ᵀ/n) V`.
    q_reduced: DMatrix<f64>,
}

/// Shared pieces of one closed-loop evaluation. `gram` is the controllability
/// Gramian of the reduced loop, absent when the loop is unstable.
struct ClosedLoop {
    r_lx_v: DMatrix<f64>,
    a_hat: DMatrix<f64>,
    w_o: DMatrix<f64>,
    gram: Option<DMatrix<f64>>,
    value: f64,
}

pub fn build_consensus_problem(
    plant: DirectedGraph,
    candidates: Vec<(usize, usize)>,
    r: DMatrix<f64>,
    gamma: f64,
) -> Result<ConsensusProblem, ConsensusError> {
    plant.validate()?;
    let n = plant.n_nodes;
    let lp = plant.laplacian();
    let scale = 1.0 + lp.amax();

    let imbalance = (0..n).map(|j| lp.column(j).sum().abs()).fold(0.0, f64::max);
    if imbalance > 1e-9 * scale {
        return Err(ConsensusError::PlantNotBalanced { imbalance });
    }

    let sym = (&lp + lp.transpose()) * 0.5;
    let eig = symmetric_eigs(&sym).expect("symmetrized Laplacian is symmetric");
    let fiedler = eig.values[1];
    if fiedler <= 1e-9 * scale {
        return Err(ConsensusError::PlantNotConnected { fiedler });
    }

    for (l, &(from, to)) in candidates.iter().enumerate() {
        check_node_pair(from, to, n)?;
        if candidates[..l].contains(&(from, to)) {
            return Err(ConsensusError::InvalidGraph(format!(
                "candidate edge ({from}, {to}) listed twice"
            )));
        }
    }

    if (r.nrows(), r.ncols()) != (n, n) {
        return Err(ConsensusError::InvalidGraph(format!(
            "effort weight R is {}x{}, expected {n}x{n}",
            r.nrows(),
            r.ncols()
        )));
    }
    let r_eigs = symmetric_eigs(&r)
        .map_err(|_| ConsensusError::InvalidGraph("effort weight R must be symmetric".into()))?;
    if r_eigs.values[0] < -1e-10 * (1.0 + r.amax()) {
        return Err(ConsensusError::InvalidGraph(
            "effort weight R must be positive semidefinite".into(),
        ));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(ConsensusError::InvalidGraph(format!("penalty weight {gamma} is invalid")));
    }

    let m = candidates.len();
    let mut e_mat = DMatrix::zeros(n, m);
    for (l, &(from, to)) in candidates.iter().enumerate() {
        e_mat[(to - 1, l)] += 1.0;
        e_mat[(from - 1, l)] -= 1.0;
    }
    let t_basis = nullspace_basis(&e_mat);
    let v = ones_complement(n);
    let (base_a, q_reduced) = reduced_operators(&lp, n, &v);

    Ok(ConsensusProblem {
        plant,
        lp,
        candidates,
        e_mat,
        t_basis,
        v,
        r,
        gamma,
        base_a,
        q_reduced,
    })
}

fn reduced_operators(
    lp: &DMatrix<f64>,
    n: usize,
    v: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    (v.tr_mul(lp) * v, v.tr_mul(&q) * v)
}

impl ConsensusProblem {
    pub fn plant(&self) -> &DirectedGraph {
        &self.plant
    }

    pub fn plant_laplacian(&self) -> &DMatrix<f64> {
        &self.lp
    }

    pub fn candidates(&self) -> &[(usize, usize)] {
        &self.candidates
    }

    pub fn n_nodes(&self) -> usize {
        self.plant.n_nodes
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Dimension of the balance-preserving weight subspace.
    pub fn dim(&self) -> usize {
        self.t_basis.ncols()
    }

    pub fn t_basis(&self) -> &DMatrix<f64> {
        &self.t_basis
    }

    pub fn reduction_basis(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn balance_map(&self) -> &DMatrix<f64> {
        &self.e_mat
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Candidate edge weights `z = T x` for subspace coordinates `x`.
    pub fn edge_weights(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.t_basis * x
    }

    /// Laplacian of the added edges at subspace coordinates `x`.
    pub fn controller_laplacian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.laplacian_from_weights(&self.edge_weights(x))
    }

    /// Laplacian of the added edges for an explicit weight vector, one entry
    /// per candidate.
    pub fn laplacian_from_weights(&self, z: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(z.len(), self.candidates.len(), "one weight per candidate");
        let mut l = DMatrix::zeros(self.n_nodes(), self.n_nodes());
        for (l_idx, &(from, to)) in self.candidates.iter().enumerate() {
            accumulate_edge(&mut l, from, to, z[l_idx]);
        }
        l
    }

    /// Candidate indices whose weight exceeds `1e-6 · max(1, ‖z‖_∞)` at
    /// `z = T x`.
    pub fn support_of(&self, x: &DVector<f64>) -> Vec<usize> {
        let z = self.edge_weights(x);
        let tol = 1e-6 * z.amax().max(1.0);
        (0..z.len()).filter(|&l| z[l] > tol).collect()
    }

    /// Design cost with no added edges.
    pub fn baseline_value(&self) -> f64 {
        self.h2_value_weights(&DVector::zeros(self.n_candidates()))
    }

    /// Design cost at subspace coordinates `x`; `+∞` when the closed loop is
    /// unstable.
    pub fn h2_value(&self, x: &DVector<f64>) -> f64 {
        self.h2_value_weights(&self.edge_weights(x))
    }

    /// Design cost at an explicit weight vector.
    pub fn h2_value_weights(&self, z: &DVector<f64>) -> f64 {
        self.close_loop(z).value
    }

    /// Gradient of the design cost in subspace coordinates, `Tᵀ ∇_z f`.
    pub fn h2_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, ConsensusError> {
        let s = self.h2_gradient_weights(&self.edge_weights(x))?;
        Ok(self.t_basis.tr_mul(&s))
    }

    /// Gradient of the design cost with respect to the edge weights.
    pub fn h2_gradient_weights(&self, z: &DVector<f64>) -> Result<DVector<f64>, ConsensusError> {
        let closed = self.close_loop(z);
        self.weight_gradient(&closed)
    }

    /// Composite model `f(x) + γ 1ᵀ(Tx) + indicator(Tx ≥ 0)` for the
    /// sparsity-promoting phase.
    pub fn sparsify_problem(&self, gamma: f64) -> CompositeProblem {
        let f = H2Oracle::new(self).objective();
        CompositeProblem::new(
            f,
            Regularizer::shifted_l1_nonneg(gamma),
            LinearMap::new(self.t_basis.clone()),
        )
        .expect("dimensions agree by construction")
    }

    /// Composite model that fixes the sparsity pattern: weights off the
    /// support are pinned to zero, weights on it constrained nonnegative,
    /// and the penalty dropped.
    pub fn polish_problem(&self, support: &[usize]) -> CompositeProblem {
        let mut pattern = vec![false; self.n_candidates()];
        for &l in support {
            pattern[l] = true;
        }
        CompositeProblem::new(
            H2Oracle::new(self).objective(),
            Regularizer::pattern_nonneg(pattern),
            LinearMap::new(self.t_basis.clone()),
        )
        .expect("dimensions agree by construction")
    }

    /// Assembles the reduced closed loop at weights `z` and solves for the
    /// Gramian. `L_x V` is accumulated edge by edge, two rows per candidate.
    fn close_loop(&self, z: &DVector<f64>) -> ClosedLoop {
        let k = self.v.ncols();
        let mut lx_v = DMatrix::zeros(self.n_nodes(), k);
        for (l, &(from, to)) in self.candidates.iter().enumerate() {
            let w = z[l];
            if w == 0.0 {
                continue;
            }
            let (i, j) = (to - 1, from - 1);
            for c in 0..k {
                lx_v[(i, c)] += w * (self.v[(i, c)] - self.v[(j, c)]);
            }
        }
        let a_hat = -(&self.base_a + self.v.tr_mul(&lx_v));
        let r_lx_v = &self.r * &lx_v;
        let w_o = &self.q_reduced + lx_v.tr_mul(&r_lx_v);
        match solve_lyapunov(&a_hat, &DMatrix::identity(k, k)) {
            Ok(gram) => {
                let value = w_o.dot(&gram);
                ClosedLoop { r_lx_v, a_hat, w_o, gram: Some(gram), value }
            }
            Err(_) => ClosedLoop { r_lx_v, a_hat, w_o, gram: None, value: f64::INFINITY },
        }
    }

    /// `∇_z f` from a solved loop: with `P` the observability Gramian and
    /// `M = (R L_x V - V P) X Vᵀ`, the component for candidate `(from, to)`
    /// is `2 (M_to,to - M_to,from)`.
    fn weight_gradient(&self, closed: &ClosedLoop) -> Result<DVector<f64>, ConsensusError> {
        let Some(gram) = &closed.gram else {
            return Err(ConsensusError::UnstablePoint {
                abscissa: spectral_abscissa(&closed.a_hat),
            });
        };
        let p = solve_lyapunov(&closed.a_hat.transpose(), &closed.w_o)
            .expect("the adjoint Lyapunov equation is solvable whenever the loop is stable");
        let m_mat = (&closed.r_lx_v - &self.v * p) * gram * self.v.transpose();
        let mut s = DVector::zeros(self.candidates.len());
        for (l, &(from, to)) in self.candidates.iter().enumerate() {
            let (i, j) = (to - 1, from - 1);
            s[l] = 2.0 * (m_mat[(i, i)] - m_mat[(i, j)]);
        }
        Ok(s)
    }

    #[cfg(test)]
    fn with_reduction_basis(mut self, v: DMatrix<f64>) -> Self {
        let (base_a, q_reduced) = reduced_operators(&self.lp, self.n_nodes(), &v);
        self.base_a = base_a;
        self.q_reduced = q_reduced;
        self.v = v;
        self
    }
}

/// First-order oracle for the design cost in subspace coordinates, with a
/// one-point memo: the loop solved for a value is reused by a gradient call
/// at the same point, which is the common pattern after a line search
/// accepts a step.
#[derive(Clone)]
pub struct H2Oracle {
    cp: Arc<ConsensusProblem>,
    memo: Arc<Mutex<Option<(DVector<f64>, Arc<ClosedLoop>)>>>,
}

impl H2Oracle {
    pub fn new(cp: &ConsensusProblem) -> Self {
        H2Oracle { cp: Arc::new(cp.clone()), memo: Arc::new(Mutex::new(None)) }
    }

    fn closed_loop_at(&self, x: &DVector<f64>) -> Arc<ClosedLoop> {
        let mut memo = self.memo.lock().expect("oracle memo lock");
        if let Some((cached_x, closed)) = memo.as_ref() {
            if cached_x == x {
                return closed.clone();
            }
        }
        let closed = Arc::new(self.cp.close_loop(&self.cp.edge_weights(x)));
        *memo = Some((x.clone(), closed.clone()));
        closed
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.closed_loop_at(x).value
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, ConsensusError> {
        let closed = self.closed_loop_at(x);
        let s = self.cp.weight_gradient(&closed)?;
        Ok(self.cp.t_basis.tr_mul(&s))
    }

    /// Adapts the oracle to the smooth-term interface. The gradient closure
    /// panics off the stability region; line searches reject infinite values,
    /// so gradients are only ever requested at stable iterates.
    pub fn objective(&self) -> SmoothObjective {
        let for_value = self.clone();
        let for_grad = self.clone();
        SmoothObjective::new(
            move |x| for_value.value(x),
            move |x| {
                for_grad
                    .gradient(x)
                    .expect("gradient requested at an unstable iterate")
            },
        )
    }
}

/// One solve of the warm-started homotopy in [`sparsify`].
#[derive(Clone, Debug)]
pub struct HomotopyPoint {
    pub gamma: f64,
    pub x: DVector<f64>,
    /// Candidate indices selected at this penalty.
    pub support: Vec<usize>,
    /// Design cost alone, penalty excluded.
    pub f_value: f64,
    pub solve_time: f64,
    pub outer_iters: usize,
}

/// Minimizes `f(Tx) + γ 1ᵀ(Tx)` over `Tx ≥ 0` for each `γ` in turn, warm
/// starting both the point and the multiplier from the previous solve.
pub fn sparsify(
    cp: &ConsensusProblem,
    gammas: &[f64],
    opts: &MmOptions,
) -> Result<Vec<HomotopyPoint>, ConsensusError> {
    let mut x = DVector::zeros(cp.dim());
    let mut y = DVector::zeros(cp.n_candidates());
    let mut points = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let problem = cp.sparsify_problem(gamma);
        let clock = Instant::now();
        let report = mm_solve(&problem, x, y, opts)?;
        let solve_time = clock.elapsed().as_secs_f64();
        points.push(HomotopyPoint {
            gamma,
            x: report.x.clone(),
            support: cp.support_of(&report.x),
            f_value: cp.h2_value(&report.x),
            solve_time,
            outer_iters: report.outer_iters,
        });
        x = report.x;
        y = report.y;
    }
    Ok(points)
}

/// Re-minimizes the design cost with the sparsity pattern fixed to `support`
/// and no penalty. Returns the polished coordinates and their cost; an empty
/// support short-circuits to the no-edge baseline.
pub fn polish(
    cp: &ConsensusProblem,
    support: &[usize],
    opts: &MmOptions,
) -> Result<(DVector<f64>, f64), ConsensusError> {
    let m = cp.n_candidates();
    if let Some(&bad) = support.iter().find(|&&l| l >= m) {
        return Err(ConsensusError::InvalidGraph(format!(
            "support index {bad} out of range for {m} candidates"
        )));
    }
    if support.is_empty() {
        return Ok((DVector::zeros(cp.dim()), cp.baseline_value()));
    }
    let problem = cp.polish_problem(support);
    let report = mm_solve(&problem, DVector::zeros(cp.dim()), DVector::zeros(m), opts)?;
    let f = cp.h2_value(&report.x);
    Ok((report.x, f))
}

/// Polishes every k-subset of candidates and returns the best, with ties
/// broken toward the lexicographically first subset. Refuses instances with
/// more than [`SUBSET_BUDGET`] subsets.
pub fn brute_force_best_subset(
    cp: &ConsensusProblem,
    k: usize,
    opts: &MmOptions,
) -> Result<(Vec<usize>, f64), ConsensusError> {
    let m = cp.n_candidates();
    if k > m {
        return Err(ConsensusError::InvalidGraph(format!(
            "subset size {k} exceeds the {m} candidates"
        )));
    }
    if k == 0 {
        return Ok((Vec::new(), cp.baseline_value()));
    }
    let subsets = binomial(m, k);
    if subsets > SUBSET_BUDGET {
        return Err(ConsensusError::SubsetBudgetExceeded {
            m,
            k,
            subsets,
            budget: SUBSET_BUDGET,
        });
    }

    let flat = k_subsets_flat(m, k);
    let costs: Result<Vec<f64>, ConsensusError> = flat
        .par_chunks(k)
        .map(|subset| polish(cp, subset, opts).map(|(_, f)| f))
        .collect();
    let costs = costs?;

    // Sequential scan with a strict improvement test keeps the winner
    // deterministic regardless of the parallel schedule.
    let mut best = 0;
    for (idx, &f) in costs.iter().enumerate() {
        if f < costs[best] {
            best = idx;
        }
    }
    Ok((flat[best * k..(best + 1) * k].to_vec(), costs[best]))
}

/// Relative loss of a design against a reference cost, in percent.
pub fn loss_percent(f: f64, f_ref: f64) -> f64 {
    100.0 * (f - f_ref) / f_ref
}

/// All `n(n-1)` ordered node pairs in from-major order; the candidate list
/// when any directed edge may be added.
pub fn all_ordered_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n - 1));
    for from in 1..=n {
        for to in 1..=n {
            if to != from {
                pairs.push((from, to));
            }
        }
    }
    pairs
}

/// Unit-weight directed cycle `1 → 2 → … → n → 1`.
pub fn directed_cycle(n: usize) -> DirectedGraph {
    let edges = (1..=n).map(|i| (i, i % n + 1, 1.0)).collect();
    DirectedGraph::new(n, edges).expect("a cycle is a valid graph")
}

/// A balanced seven-node demo plant: a directed cycle through nodes 1-4 with
/// a bidirectional chain 2-5-6-7 hanging off node 2. Unit weights.
pub fn seven_node_demo_plant() -> DirectedGraph {
    let edges = vec![
        (1, 2, 1.0),
        (2, 3, 1.0),
        (3, 4, 1.0),
        (4, 1, 1.0),
        (2, 5, 1.0),
        (5, 2, 1.0),
        (5, 6, 1.0),
        (6, 5, 1.0),
        (6, 7, 1.0),
        (7, 6, 1.0),
    ];
    DirectedGraph::new(7, edges).expect("the demo plant is a valid graph")
}

fn binomial(m: usize, k: usize) -> f64 {
    if k > m {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k {
        c = c * (m - i) as f64 / (i + 1) as f64;
    }
    c
}

/// All k-subsets of `0..m` in lexicographic order, flattened into chunks of
/// length k.
fn k_subsets_flat(m: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.extend_from_slice(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == m - k + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
