//! Experiment harness behind the `proxal` binary.
//!
//! Three subcommands mirror the library's case studies. `lasso` compares
//! ISTA, ADMM, and the multiplier method on one seeded instance and writes
//! a per-solver table. `consensus` runs the edge-addition pipeline in four
//! modes: `sparsify` (penalty homotopy), `polish` (re-solve on a fixed
//! support), `brute` (exhaustive subset search), and `scaling` (cycle-graph
//! benchmark of the multiplier method against both ADMM variants).
//! `flow` integrates saddle-flow experiments in three modes: `rate`
//! (certified contraction rate vs. the fitted trajectory slope), `placement`
//! (agent tracking with a target switch), and `extra` (equivalence of the
//! EXTRA recursion with the discretized network flow).
//!
//! Configs are JSON; results are CSV or JSON tables under `--out`. Every
//! output row carries the first 12 hex digits of the SHA-256 of the
//! effective config (the file content after `--seed`/`--mode` overrides),
//! so any table line traces back to the exact run that produced it. With
//! `"zero_timings": true` every wall-clock column is written as zero, which
//! makes reruns of the same config byte-identical.
//!
//! Exit codes: `0` on success, `2` for an unusable config (unreadable
//! file, malformed JSON, failed validation, bad flags), `3` for a failure
//! while running (solver errors, degenerate fixtures, unwritable outputs,
//! or a violated certificate in an enforcing mode).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{admm_solve, ista_solve, AdmmOptions, StepRule};
use crate::consensus::{
    all_ordered_pairs, brute_force_best_subset, build_consensus_problem, directed_cycle,
    loss_percent, polish, seven_node_demo_plant, sparsify, ConsensusProblem, DirectedGraph,
};
use crate::flow::{
    extra_step, integrate_flow, network_flow_step, ExtraHistory, FlowConfig, FlowTrajectory,
};
use crate::mm::{mm_solve, MmOptions};
use crate::numerics::{read_matrix_text, symmetric_eigs};
use crate::placement::{five_agent_demo, simulate_placement, PlacementScenario};
use crate::problem::{CompositeProblem, LinearMap, SmoothObjective};
use crate::rates::{check_quad_condition, default_omega_grid, fit_log_slope, rate_estimates};
use crate::regularizer::Regularizer;

/// Harness failure split by exit code: unusable configs exit `2`,
/// failures during the run exit `3`.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}

fn cfg_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

fn run_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Run(msg.to_string())
}

#[derive(Parser)]
#[command(name = "proxal", about = "Experiment harness for the proxal library", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Compare ISTA, ADMM, and the multiplier method on one LASSO instance.
    Lasso(CommonArgs),
    /// Edge-addition experiments: sparsify, polish, brute, or scaling.
    Consensus(CommonArgs),
    /// Saddle-flow experiments: rate, placement, or extra.
    Flow(CommonArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for result tables (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for grid experiments; 0 or absent means all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides the config's `mode`.
    #[arg(long)]
    pub mode: Option<String>,
}

/// Parses the process arguments, dispatches, and maps errors to exit codes.
pub fn run() -> u8 {
    match dispatch(Cli::parse()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Lasso(args) => cmd_lasso(&args),
        Command::Consensus(args) => cmd_consensus(&args),
        Command::Flow(args) => cmd_flow(&args),
    }
}

fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))
}

/// First 12 hex digits of the SHA-256 of the effective config.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let canon = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canon.as_bytes());
    let mut hex = String::with_capacity(12);
    for byte in digest.iter().take(6) {
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    hex
}

/// Fixed-width scientific float formatting so identical runs yield
/// identical bytes.
fn fnum(v: f64) -> String {
    format!("{v:.12e}")
}

fn elapsed(t0: Instant) -> f64 {
    t0.elapsed().as_secs_f64()
}

/// Timing as written to tables: zeroed when the config asks for
/// byte-reproducible output.
fn timing(value: f64, zero_timings: bool) -> f64 {
    if zero_timings {
        0.0
    } else {
        value
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| run_err(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| run_err(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

// ---------------------------------------------------------------------------
// lasso

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoConfig {
    /// Unknowns; ignored when the instance comes from files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Observation rows; defaults to `2n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default)]
    pub zero_timings: bool,
    /// Design matrix in the matrix text format instead of a seeded draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_file: Option<String>,
    /// Right-hand side as a `rows x 1` matrix text file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs_file: Option<String>,
}

impl LassoConfig {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(cfg_err("gamma must be positive and finite"));
        }
        match (&self.matrix_file, &self.rhs_file) {
            (Some(_), Some(_)) => Ok(()),
            (None, None) => {
                let n = self.n.ok_or_else(|| cfg_err("either n or matrix/rhs files required"))?;
                if n == 0 {
                    return Err(cfg_err("n must be at least 1"));
                }
                if self.rows == Some(0) {
                    return Err(cfg_err("rows must be at least 1"));
                }
                Ok(())
            }
            _ => Err(cfg_err("matrix_file and rhs_file must be given together")),
        }
    }
}

/// Seeded LASSO data: unit-norm columns, a sparse ground truth with about a
/// quarter of the entries active, and lightly noised observations.
pub fn generate_lasso(seed: u64, rows: usize, cols: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let x_true = DVector::from_fn(cols, |_, _| {
        if rng.random_range(0.0..1.0) < 0.25 {
            if rng.random_range(0.0..1.0) < 0.5 {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    });
    let noise = DVector::from_fn(rows, |_, _| rng.random_range(-0.01..0.01));
    let b = &a * x_true + noise;
    (a, b)
}

/// `½‖Ax − b‖² + γ‖x‖₁` as a composite problem with the identity map.
pub fn lasso_problem(a: &DMatrix<f64>, b: &DVector<f64>, gamma: f64) -> CompositeProblem {
    CompositeProblem::new(
        SmoothObjective::least_squares(a.clone(), b.clone()),
        Regularizer::l1(gamma),
        LinearMap::identity(a.ncols()),
    )
    .expect("an l1 penalty fits any dimension")
}

#[derive(Clone, Debug)]
pub struct LassoRow {
    pub solver: &'static str,
    pub iters_outer: usize,
    pub iters_inner_total: usize,
    pub f_value: f64,
    pub kkt_grad: f64,
    pub kkt_feas: f64,
    pub kkt_subgrad: f64,
    pub wall_time: f64,
}

fn lasso_data(cfg: &LassoConfig) -> Result<(DMatrix<f64>, DVector<f64>), CliError> {
    if let (Some(af), Some(bf)) = (&cfg.matrix_file, &cfg.rhs_file) {
        let read = |p: &str| -> Result<DMatrix<f64>, CliError> {
            let file = fs::File::open(p).map_err(|e| cfg_err(format!("cannot read {p}: {e}")))?;
            read_matrix_text(std::io::BufReader::new(file))
                .map_err(|e| cfg_err(format!("{p}: {e}")))
        };
        let a = read(af)?;
        let b = read(bf)?;
        if b.ncols() != 1 || b.nrows() != a.nrows() {
            return Err(cfg_err(format!(
                "rhs must be a {} x 1 matrix, got {} x {}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok((a, b.column(0).into_owned()))
    } else {
        let n = cfg.n.expect("validated");
        let rows = cfg.rows.unwrap_or(2 * n);
        Ok(generate_lasso(cfg.seed, rows, n))
    }
}

/// Runs all three solvers on the configured instance. Rows carry real wall
/// times; zeroing is applied only when tables are rendered.
pub fn run_lasso(cfg: &LassoConfig) -> Result<Vec<LassoRow>, CliError> {
    cfg.validate()?;
    let (a, b) = lasso_data(cfg)?;
    let problem = lasso_problem(&a, &b, cfg.gamma);
    let n = a.ncols();

    let t0 = Instant::now();
    let ista = ista_solve(&a, &b, cfg.gamma, StepRule::Backtracking, 1e-10, 200_000);
    let ista_time = elapsed(t0);
    if !ista.converged {
        return Err(run_err("ISTA exhausted its iteration budget"));
    }
    // The prox-gradient multiplier estimate makes the stationarity
    // residual exact and leaves the subgradient residual as the readout.
    let y_ista = -(a.transpose() * (&a * &ista.x - &b));
    let kkt_i = problem.kkt_residuals(&ista.x, &y_ista);

    // The smooth-block iterate leaks objective error linearly in the
    // stopping residual, so the 1e-6 agreement gate needs residuals well
    // below it, just as ISTA runs at 1e-10.
    let admm_opts = AdmmOptions { tol_primal: 1e-8, tol_dual: 1e-8, ..AdmmOptions::default() };
    let t0 = Instant::now();
    let admm = admm_solve(
        &problem,
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
        &admm_opts,
    )
    .map_err(run_err)?;
    let admm_time = elapsed(t0);

    let mm_opts = MmOptions { eta_final: 1e-7, omega_final: 1e-7, ..MmOptions::default() };
    let t0 = Instant::now();
    let mm = mm_solve(&problem, DVector::zeros(n), DVector::zeros(n), &mm_opts)
        .map_err(run_err)?;
    let mm_time = elapsed(t0);

    let rows = vec![
        LassoRow {
            solver: "ista",
            iters_outer: ista.iters,
            iters_inner_total: ista.iters,
            f_value: problem.objective(&ista.x),
            kkt_grad: kkt_i.grad,
            kkt_feas: kkt_i.feas,
            kkt_subgrad: kkt_i.subgrad,
            wall_time: ista_time,
        },
        LassoRow {
            solver: "admm",
            iters_outer: admm.outer_iters,
            iters_inner_total: admm.total_inner_iters,
            f_value: problem.objective(&admm.x),
            kkt_grad: admm.kkt.grad,
            kkt_feas: admm.kkt.feas,
            kkt_subgrad: admm.kkt.subgrad,
            wall_time: admm_time,
        },
        LassoRow {
            solver: "mm",
            iters_outer: mm.outer_iters,
            iters_inner_total: mm.total_inner_iters,
            f_value: problem.objective(&mm.x),
            kkt_grad: mm.kkt.grad,
            kkt_feas: mm.kkt.feas,
            kkt_subgrad: mm.kkt.subgrad,
            wall_time: mm_time,
        },
    ];

    let f_ref = rows[0].f_value;
    for row in &rows[1..] {
        if (row.f_value - f_ref).abs() > 1e-6 * f_ref.abs().max(1e-12) {
            return Err(run_err(format!(
                "{} objective {:.12e} disagrees with the ISTA reference {:.12e}",
                row.solver, row.f_value, f_ref
            )));
        }
    }
    Ok(rows)
}

fn cmd_lasso(args: &CommonArgs) -> Result<(), CliError> {
    if args.mode.is_some() {
        return Err(cfg_err("the lasso command has no --mode"));
    }
    let mut cfg: LassoConfig = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let hash = config_hash(&cfg);
    let rows = run_lasso(&cfg)?;

    let mut out = String::from(
        "solver,iters_outer,iters_inner_total,f_value,kkt_grad,kkt_feas,kkt_subgrad,wall_time,config_hash\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.solver,
            r.iters_outer,
            r.iters_inner_total,
            fnum(r.f_value),
            fnum(r.kkt_grad),
            fnum(r.kkt_feas),
            fnum(r.kkt_subgrad),
            fnum(timing(r.wall_time, cfg.zero_timings)),
            hash
        ));
    }
    ensure_out_dir(&args.out)?;
    write_text(&args.out.join("lasso.csv"), &out)
}

// ---------------------------------------------------------------------------
// consensus

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConsensusMode {
    Sparsify,
    Polish,
    Brute,
    Scaling,
}

fn consensus_mode(s: &str) -> Result<ConsensusMode, CliError> {
    match s {
        "sparsify" => Ok(ConsensusMode::Sparsify),
        "polish" => Ok(ConsensusMode::Polish),
        "brute" => Ok(ConsensusMode::Brute),
        "scaling" => Ok(ConsensusMode::Scaling),
        other => Err(cfg_err(format!(
            "unknown consensus mode {other:?} (expected sparsify, polish, brute, or scaling)"
        ))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub zero_timings: bool,
    /// Inline plant graph; alternatives are `graph_file` and `builtin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<DirectedGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_file: Option<String>,
    /// `"seven_node_demo"` or `"cycle:<N>"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Effort weight `R = r_scale · I`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_scale: Option<f64>,
    /// Penalty grid for sparsify mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Vec<f64>>,
    /// Reference penalty for modes that carry one in the problem record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Edges to keep in polish mode, as (from, to) pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<(usize, usize)>>,
    /// Subset size for brute mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Scaling sweep bounds (cycle sizes), defaults 5..=15, capped at 50.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Scaling penalties; defaults to 0.01, 0.1, 0.2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn resolve_graph(cfg: &ConsensusConfig) -> Result<DirectedGraph, CliError> {
    let picks =
        cfg.graph.is_some() as u8 + cfg.graph_file.is_some() as u8 + cfg.builtin.is_some() as u8;
    if picks != 1 {
        return Err(cfg_err("give exactly one of graph, graph_file, or builtin"));
    }
    if let Some(g) = &cfg.graph {
        g.validate().map_err(cfg_err)?;
        return Ok(g.clone());
    }
    if let Some(path) = &cfg.graph_file {
        let text =
            fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {path}: {e}")))?;
        return DirectedGraph::from_json(&text).map_err(cfg_err);
    }
    match cfg.builtin.as_deref().expect("checked") {
        "seven_node_demo" => Ok(seven_node_demo_plant()),
        other => {
            if let Some(n) = other.strip_prefix("cycle:") {
                let n: usize =
                    n.parse().map_err(|_| cfg_err(format!("bad cycle size in {other:?}")))?;
                if n < 3 {
                    return Err(cfg_err("cycle builtin needs at least 3 nodes"));
                }
                Ok(directed_cycle(n))
            } else {
                Err(cfg_err(format!(
                    "unknown builtin {other:?} (expected seven_node_demo or cycle:<N>)"
                )))
            }
        }
    }
}

fn consensus_problem(cfg: &ConsensusConfig, gamma: f64) -> Result<ConsensusProblem, CliError> {
    let plant = resolve_graph(cfg)?;
    let n = plant.n_nodes;
    let r_scale = cfg.r_scale.unwrap_or(1.0);
    if !(r_scale >= 0.0) || !r_scale.is_finite() {
        return Err(cfg_err("r_scale must be finite and nonnegative"));
    }
    let r = DMatrix::identity(n, n) * r_scale;
    build_consensus_problem(plant, all_ordered_pairs(n), r, gamma).map_err(cfg_err)
}

/// Maps (from, to) pairs to indices in the all-ordered-pairs candidate list.
fn pair_indices(n: usize, pairs: &[(usize, usize)]) -> Result<Vec<usize>, CliError> {
    let all = all_ordered_pairs(n);
    pairs
        .iter()
        .map(|p| {
            all.iter()
                .position(|q| q == p)
                .ok_or_else(|| cfg_err(format!("({}, {}) is not a candidate edge", p.0, p.1)))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ScalingRow {
    pub n: usize,
    pub gamma: f64,
    pub solver: &'static str,
    pub total_time: f64,
    pub outer_iters: usize,
    pub time_per_outer: f64,
}

/// Cycle-graph benchmark: for each network size and penalty, one sparsify
/// solve per solver. Rows carry real times and arrive sorted by
/// (size, penalty, solver).
pub fn run_scaling(cfg: &ConsensusConfig, workers: Option<usize>) -> Result<Vec<ScalingRow>, CliError> {
    use rayon::prelude::*;

    let n_min = cfg.n_min.unwrap_or(5);
    let n_max = cfg.n_max.unwrap_or(15);
    if n_min < 3 || n_max < n_min {
        return Err(cfg_err("need 3 <= n_min <= n_max"));
    }
    if n_max > 50 {
        return Err(cfg_err("scaling sweeps are capped at n_max = 50"));
    }
    let gammas = cfg.gammas.clone().unwrap_or_else(|| vec![0.01, 0.1, 0.2]);
    if gammas.is_empty() || gammas.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(cfg_err("gammas must be positive and finite"));
    }

    let mut cells = Vec::new();
    for n in n_min..=n_max {
        for &gamma in &gammas {
            cells.push((n, gamma));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| run_err(format!("cannot build worker pool: {e}")))?;

    let solvers: [&'static str; 3] = ["pal", "admm", "admm_adaptive"];
    let results: Vec<Result<Vec<ScalingRow>, CliError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, gamma)| {
                let plant = directed_cycle(n);
                let r = DMatrix::identity(n, n);
                let cp = build_consensus_problem(plant, all_ordered_pairs(n), r, gamma)
                    .map_err(run_err)?;
                let problem = cp.sparsify_problem(gamma);
                let dim = cp.dim();
                let m = cp.n_candidates();

                let mut rows = Vec::with_capacity(3);
                for solver in solvers {
                    let t0 = Instant::now();
                    let outer = match solver {
                        "pal" => {
                            let report = mm_solve(
                                &problem,
                                DVector::zeros(dim),
                                DVector::zeros(m),
                                &MmOptions::default(),
                            )
                            .map_err(run_err)?;
                            report.outer_iters
                        }
                        _ => {
                            let opts = AdmmOptions {
                                adaptive: solver == "admm_adaptive",
                                ..AdmmOptions::default()
                            };
                            let report = admm_solve(
                                &problem,
                                DVector::zeros(dim),
                                DVector::zeros(m),
                                DVector::zeros(m),
                                &opts,
                            )
                            .map_err(run_err)?;
                            report.outer_iters
                        }
                    };
                    let total = elapsed(t0);
                    rows.push(ScalingRow {
                        n,
                        gamma,
                        solver,
                        total_time: total,
                        outer_iters: outer,
                        time_per_outer: if outer > 0 { total / outer as f64 } else { 0.0 },
                    });
                }
                Ok(rows)
            })
            .collect()
    });

    let mut rows = Vec::new();
    for cell in results {
        rows.extend(cell?);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct PolishReport {
    config_hash: String,
    f_value: f64,
    loss_percent_vs_all_candidates: f64,
    weights: Vec<(usize, usize, f64)>,
}

#[derive(Serialize)]
struct BruteReport {
    config_hash: String,
    k: usize,
    f_value: f64,
    support: Vec<(usize, usize)>,
}

fn cmd_consensus(args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg: ConsensusConfig = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = &args.mode {
        cfg.mode = Some(mode.clone());
    }
    let mode = consensus_mode(
        cfg.mode.as_deref().ok_or_else(|| cfg_err("mode required (config or --mode)"))?,
    )?;
    let hash = config_hash(&cfg);
    ensure_out_dir(&args.out)?;
    let opts = MmOptions::default();

    match mode {
        ConsensusMode::Sparsify => {
            let grid = cfg
                .gamma_grid
                .clone()
                .ok_or_else(|| cfg_err("sparsify mode needs gamma_grid"))?;
            if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
                return Err(cfg_err("gamma_grid must be positive and finite"));
            }
            let cp = consensus_problem(&cfg, grid[0])?;
            let all: Vec<usize> = (0..cp.n_candidates()).collect();
            let (_, f_central) = polish(&cp, &all, &opts).map_err(run_err)?;
            let points = sparsify(&cp, &grid, &opts).map_err(run_err)?;

            let mut out = String::from(
                "gamma,n_edges,f_value,loss_percent,solve_time,outer_iters,config_hash\n",
            );
            for p in &points {
                let (_, f_polished) = polish(&cp, &p.support, &opts).map_err(run_err)?;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    fnum(p.gamma),
                    p.support.len(),
                    fnum(p.f_value),
                    fnum(loss_percent(f_polished, f_central)),
                    fnum(timing(p.solve_time, cfg.zero_timings)),
                    p.outer_iters,
                    hash
                ));
            }
            write_text(&args.out.join("homotopy.csv"), &out)
        }
        ConsensusMode::Polish => {
            let pairs =
                cfg.support.clone().ok_or_else(|| cfg_err("polish mode needs support"))?;
            let cp = consensus_problem(&cfg, cfg.gamma.unwrap_or(0.0))?;
            let support = pair_indices(cp.n_nodes(), &pairs)?;
            let all: Vec<usize> = (0..cp.n_candidates()).collect();
            let (_, f_central) = polish(&cp, &all, &opts).map_err(run_err)?;
            let (x, f_value) = polish(&cp, &support, &opts).map_err(run_err)?;
            let z = cp.edge_weights(&x);
            let weights = support
                .iter()
                .map(|&l| {
                    let (from, to) = cp.candidates()[l];
                    (from, to, z[l])
                })
                .collect();
            write_json(
                &args.out.join("polish.json"),
                &PolishReport {
                    config_hash: hash,
                    f_value,
                    loss_percent_vs_all_candidates: loss_percent(f_value, f_central),
                    weights,
                },
            )
        }
        ConsensusMode::Brute => {
            let k = cfg.k.ok_or_else(|| cfg_err("brute mode needs k"))?;
            let cp = consensus_problem(&cfg, cfg.gamma.unwrap_or(0.0))?;
            let (support, f_value) = brute_force_best_subset(&cp, k, &opts).map_err(run_err)?;
            let pairs = support.iter().map(|&l| cp.candidates()[l]).collect();
            write_json(
                &args.out.join("brute.json"),
                &BruteReport { config_hash: hash, k, f_value, support: pairs },
            )
        }
        ConsensusMode::Scaling => {
            if cfg.graph.is_some() || cfg.graph_file.is_some() || cfg.builtin.is_some() {
                return Err(cfg_err("scaling mode builds its own cycle graphs"));
            }
            let rows = run_scaling(&cfg, args.workers.or(cfg.workers))?;
            let mut out = String::from(
                "n,gamma,solver,total_time,outer_iters,time_per_outer,config_hash\n",
            );
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.n,
                    fnum(r.gamma),
                    r.solver,
                    fnum(timing(r.total_time, cfg.zero_timings)),
                    r.outer_iters,
                    fnum(timing(r.time_per_outer, cfg.zero_timings)),
                    hash
                ));
            }
            write_text(&args.out.join("scaling.csv"), &out)
        }
    }
}

// ---------------------------------------------------------------------------
// flow

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowMode {
    Rate,
    Placement,
    Extra,
}

fn flow_mode(s: &str) -> Result<FlowMode, CliError> {
    match s {
        "rate" => Ok(FlowMode::Rate),
        "placement" => Ok(FlowMode::Placement),
        "extra" => Ok(FlowMode::Extra),
        other => Err(cfg_err(format!(
            "unknown flow mode {other:?} (expected rate, placement, or extra)"
        ))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub zero_timings: bool,
    /// Primal dimension in rate mode; node count in extra mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Constraint rows in rate mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_f: Option<f64>,
    /// Penalty; rate mode defaults to `max(L_f − m_f, 1e-3)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// l1 weight of the rate fixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// When true (the default), a violated certificate fails the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enforce: Option<bool>,
    /// Placement scenario, inline; alternatives are `scenario_file` and
    /// `builtin: "five_agent_demo"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PlacementScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Trajectory sample count, default 201.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Step count in extra mode, default 50.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Step size in extra mode, default 0.05.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Serialize)]
pub struct RateReport {
    pub config_hash: String,
    pub n: usize,
    pub m: usize,
    pub m_f: f64,
    pub l_f: f64,
    pub mu: f64,
    pub gamma: f64,
    pub lambda_min: f64,
    pub rho_certified: f64,
    pub rho_checked: f64,
    pub quad_condition_ok: bool,
    pub fitted_slope: f64,
    pub slope_threshold: f64,
    pub pass: bool,
}

/// Strongly convex rate fixture: a quadratic with spectrum exactly spanning
/// `[m_f, l_f]`, an l1 term through a random wide map with full-rank `TTᵀ`.
pub fn rate_fixture(
    seed: u64,
    n: usize,
    m: usize,
    m_f: f64,
    l_f: f64,
    gamma: f64,
) -> (CompositeProblem, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let u = raw.qr().q();
    let lambdas = DVector::from_fn(n, |i, _| {
        m_f + (l_f - m_f) * i as f64 / (n - 1).max(1) as f64
    });
    let h_raw = &u * DMatrix::from_diagonal(&lambdas) * u.transpose();
    let h = (&h_raw + h_raw.transpose()) * 0.5;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let t = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let problem = CompositeProblem::new(
        SmoothObjective::quadratic(h, q),
        Regularizer::l1(gamma),
        LinearMap::new(t.clone()),
    )
    .expect("an l1 penalty fits any dimension");
    (problem, t)
}

pub fn run_rate(
    cfg: &FlowExperimentConfig,
    hash: &str,
) -> Result<(RateReport, FlowTrajectory), CliError> {
    let n = cfg.n.unwrap_or(6);
    let m = cfg.m.unwrap_or(3);
    if n < 2 || m == 0 || m > n {
        return Err(cfg_err("rate mode needs n >= 2 and 1 <= m <= n"));
    }
    let m_f = cfg.m_f.unwrap_or(1.0);
    let l_f = cfg.l_f.unwrap_or(4.0);
    if !(m_f > 0.0 && l_f >= m_f) {
        return Err(cfg_err("need 0 < m_f <= l_f"));
    }
    let mu = cfg.mu.unwrap_or((l_f - m_f).max(1e-3));
    if !(mu > 0.0) {
        return Err(cfg_err("mu must be positive"));
    }
    let gamma = cfg.gamma.unwrap_or(0.1);
    if !(gamma > 0.0) {
        return Err(cfg_err("gamma must be positive"));
    }
    let t_end = cfg.t_end.unwrap_or(40.0);
    if !(t_end > 0.0) {
        return Err(cfg_err("t_end must be positive"));
    }

    let (problem, t) = rate_fixture(cfg.seed, n, m, m_f, l_f, gamma);
    let gram = &t * t.transpose();
    let eigs = symmetric_eigs(&gram).map_err(run_err)?.values;
    let lambda_min = eigs[0];
    if lambda_min <= 1e-10 {
        return Err(run_err(format!(
            "drawn T has nearly singular TTᵀ (lambda_min = {lambda_min:.3e}); pick another seed"
        )));
    }

    let est = rate_estimates(m_f, l_f, mu, lambda_min).map_err(run_err)?;
    let rho_checked = 0.99 * est.rho;
    let quad_ok = check_quad_condition(rho_checked, m_f, mu, eigs.as_slice(), &default_omega_grid())
        .map_err(run_err)?;

    let tight = MmOptions { eta_final: 1e-7, omega_final: 1e-7, ..MmOptions::default() };
    let sol = mm_solve(&problem, DVector::zeros(n), DVector::zeros(m), &tight).map_err(run_err)?;
    if !sol.converged {
        return Err(run_err("reference solve did not converge"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let flow_cfg = FlowConfig::new(mu, t_end);
    let traj = integrate_flow(&problem, &x0, &DVector::zeros(m), &flow_cfg, Some((&sol.x, &sol.y)))
        .map_err(run_err)?;
    let dists = traj.distance_to_ref.as_ref().expect("reference supplied");
    let (slope, _) = fit_log_slope(&traj.times, dists, (1.0, t_end), 1e-6)
        .ok_or_else(|| run_err("not enough trajectory points to fit a rate"))?;

    let slope_threshold = -0.95 * rho_checked;
    let pass = quad_ok && slope <= slope_threshold;
    let report = RateReport {
        config_hash: hash.to_string(),
        n,
        m,
        m_f,
        l_f,
        mu,
        gamma,
        lambda_min,
        rho_certified: est.rho,
        rho_checked,
        quad_condition_ok: quad_ok,
        fitted_slope: slope,
        slope_threshold,
        pass,
    };
    Ok((report, traj))
}

#[derive(Serialize)]
pub struct ExtraReport {
    pub config_hash: String,
    pub n: usize,
    pub steps: usize,
    pub alpha: f64,
    pub mu: f64,
    pub max_deviation: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Runs the EXTRA recursion and the discretized network flow side by side
/// on a seeded cycle-graph least-squares consensus instance.
pub fn run_extra(cfg: &FlowExperimentConfig, hash: &str) -> Result<ExtraReport, CliError> {
    let n = cfg.n.unwrap_or(10);
    if n < 3 {
        return Err(cfg_err("extra mode needs at least 3 nodes"));
    }
    let steps = cfg.steps.unwrap_or(50);
    let alpha = cfg.alpha.unwrap_or(0.05);
    let mu = cfg.mu.unwrap_or(1.0);
    if !(alpha > 0.0 && mu > 0.0) {
        return Err(cfg_err("alpha and mu must be positive"));
    }

    let mut t = DMatrix::zeros(n, n);
    for e in 0..n - 1 {
        t[(e, e)] = 1.0;
        t[(e, e + 1)] = -1.0;
    }
    t[(n - 1, n - 1)] = 1.0;
    t[(n - 1, 0)] = -1.0;
    let laplacian = t.tr_mul(&t);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let b = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
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

    let mut x_net = x0.clone();
    let mut y_net = DVector::zeros(n);
    let mut x_extra = x0;
    let mut history = ExtraHistory::new(n);
    let mut max_dev: f64 = 0.0;
    for _ in 0..steps {
        let (xn, yn) = network_flow_step(&grad_agent, &laplacian, &x_net, &y_net, mu, beta, alpha);
        x_net = xn;
        y_net = yn;
        x_extra = extra_step(&w_mix, &grad_vec, alpha, &x_extra, &mut history);
        max_dev = max_dev.max((&x_net - &x_extra).norm());
    }

    let threshold = 1e-12;
    Ok(ExtraReport {
        config_hash: hash.to_string(),
        n,
        steps,
        alpha,
        mu,
        max_deviation: max_dev,
        threshold,
        pass: max_dev <= threshold,
    })
}

fn resolve_scenario(cfg: &FlowExperimentConfig) -> Result<PlacementScenario, CliError> {
    let picks = cfg.scenario.is_some() as u8
        + cfg.scenario_file.is_some() as u8
        + cfg.builtin.is_some() as u8;
    if picks != 1 {
        return Err(cfg_err("give exactly one of scenario, scenario_file, or builtin"));
    }
    if let Some(sc) = &cfg.scenario {
        return Ok(sc.clone());
    }
    if let Some(path) = &cfg.scenario_file {
        let text =
            fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {path}: {e}")))?;
        return PlacementScenario::from_json(&text).map_err(cfg_err);
    }
    match cfg.builtin.as_deref().expect("checked") {
        "five_agent_demo" => Ok(five_agent_demo(cfg.seed)),
        other => Err(cfg_err(format!("unknown builtin {other:?} (expected five_agent_demo)"))),
    }
}

/// Runs a placement scenario and returns the trajectory together with the
/// per-sample distance to the active stage's optimum.
pub fn run_placement(
    cfg: &FlowExperimentConfig,
) -> Result<(PlacementScenario, FlowTrajectory, Vec<f64>), CliError> {
    let scenario = resolve_scenario(cfg)?;
    let problem = scenario.problem().map_err(cfg_err)?;
    let (x0, y0) = scenario.initial_state(&problem).map_err(cfg_err)?;

    let count = cfg.samples.unwrap_or(201);
    if count < 2 {
        return Err(cfg_err("samples must be at least 2"));
    }
    // Uniform grid plus the exact switch times, so the table always has a
    // row at each target change.
    let mut samples: Vec<f64> =
        (0..count).map(|k| scenario.t_end * k as f64 / (count - 1) as f64).collect();
    for (t, _) in problem.schedule() {
        if *t > 0.0 && *t < scenario.t_end {
            samples.push(*t);
        }
    }
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    samples.dedup();

    let flow_cfg = scenario.flow_config().with_samples(samples);
    let traj = simulate_placement(&problem, &x0, &y0, &flow_cfg).map_err(run_err)?;

    // Stage optima for the distance column, warm-started along the way.
    let tight = MmOptions { eta_final: 1e-8, omega_final: 1e-8, ..MmOptions::default() };
    let mut refs = Vec::new();
    let mut x_warm = x0.clone();
    for stage in 0..problem.n_stages() {
        let sol = mm_solve(
            &problem.composite(stage),
            x_warm.clone(),
            DVector::zeros(problem.n_edges()),
            &tight,
        )
        .map_err(run_err)?;
        x_warm = sol.x.clone();
        refs.push((sol.x, sol.y));
    }
    let dists = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, (x, y))| {
            let stage =
                problem.schedule().iter().rposition(|(s, _)| *s <= t).unwrap_or(0);
            let (xr, yr) = &refs[stage];
            ((x - xr).norm_squared() + (y - yr).norm_squared()).sqrt()
        })
        .collect();
    Ok((scenario, traj, dists))
}

/// Renders a sampled trajectory as CSV with one position column per agent,
/// one dual column per edge, and the distance-to-reference column.
pub fn trajectory_csv(traj: &FlowTrajectory, dists: &[f64], hash: &str) -> String {
    let (nx, ny) = match traj.states.first() {
        Some((x, y)) => (x.len(), y.len()),
        None => (0, 0),
    };
    let mut header = String::from("t");
    for i in 1..=nx {
        write!(header, ",x_{i}").expect("writing to a String cannot fail");
    }
    for k in 1..=ny {
        write!(header, ",y_{k}").expect("writing to a String cannot fail");
    }
    header.push_str(",dist_to_ref,config_hash\n");

    let mut out = header;
    for (i, (t, (x, y))) in traj.times.iter().zip(&traj.states).enumerate() {
        out.push_str(&fnum(*t));
        for v in x.iter() {
            out.push(',');
            out.push_str(&fnum(*v));
        }
        for v in y.iter() {
            out.push(',');
            out.push_str(&fnum(*v));
        }
        out.push(',');
        out.push_str(&fnum(dists[i]));
        out.push(',');
        out.push_str(hash);
        out.push('\n');
    }
    out
}

fn cmd_flow(args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg: FlowExperimentConfig = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = &args.mode {
        cfg.mode = Some(mode.clone());
    }
    let mode =
        flow_mode(cfg.mode.as_deref().ok_or_else(|| cfg_err("mode required (config or --mode)"))?)?;
    let hash = config_hash(&cfg);
    ensure_out_dir(&args.out)?;
    let enforce = cfg.enforce.unwrap_or(true);

    match mode {
        FlowMode::Rate => {
            let (report, traj) = run_rate(&cfg, &hash)?;
            let dists = traj.distance_to_ref.clone().expect("reference supplied");
            write_text(&args.out.join("trajectory.csv"), &trajectory_csv(&traj, &dists, &hash))?;
            write_json(&args.out.join("rate_report.json"), &report)?;
            if enforce && !report.pass {
                return Err(run_err(format!(
                    "rate certificate violated: quad_condition_ok = {}, fitted slope {:.4} vs threshold {:.4}",
                    report.quad_condition_ok, report.fitted_slope, report.slope_threshold
                )));
            }
            Ok(())
        }
        FlowMode::Placement => {
            let (_, traj, dists) = run_placement(&cfg)?;
            write_text(&args.out.join("trajectory.csv"), &trajectory_csv(&traj, &dists, &hash))
        }
        FlowMode::Extra => {
            let report = run_extra(&cfg, &hash)?;
            write_json(&args.out.join("extra_report.json"), &report)?;
            if enforce && !report.pass {
                return Err(run_err(format!(
                    "EXTRA equivalence violated: max deviation {:.3e} beyond {:.1e}",
                    report.max_deviation, report.threshold
                )));
            }
            Ok(())
        }
    }
}
