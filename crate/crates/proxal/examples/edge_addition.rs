//! Sparsity-promoting edge addition for a consensus network.
//!
//! A directed seven-node plant runs consensus dynamics; we may add any of
//! the 42 ordered node pairs as weighted feedback edges. Growing an l1-type
//! penalty on the edge weights trades design cost against the number of
//! added edges; at each support the weights are then re-optimized with the
//! penalty dropped ("polishing"). Exhaustive search over all 2-edge
//! subsets confirms the homotopy's pick.
//!
//! Run with `cargo run --example edge_addition` (takes a minute; the brute
//! force solves 861 subset problems).

use proxal::consensus::{
    all_ordered_pairs, brute_force_best_subset, build_consensus_problem, loss_percent, polish,
    seven_node_demo_plant, sparsify,
};
use nalgebra::DMatrix;
use proxal::mm::MmOptions;

fn main() {
    let plant = seven_node_demo_plant();
    let n = plant.n_nodes;
    let cp = build_consensus_problem(
        plant,
        all_ordered_pairs(n),
        DMatrix::identity(n, n),
        1.0,
    )
    .unwrap();
    let opts = MmOptions::default();

    // Centralized reference: every candidate edge available, no penalty.
    let all: Vec<usize> = (0..cp.n_candidates()).collect();
    let (_, f_central) = polish(&cp, &all, &opts).unwrap();
    let f_baseline = cp.baseline_value();
    println!("baseline (no added edges) {f_baseline:.4}, all 42 edges {f_central:.4}");
    println!();

    let grid = [0.5, 1.0, 2.0, 3.5, 6.0, 10.0];
    let points = sparsify(&cp, &grid, &opts).unwrap();

    println!(
        "{:>7} {:>8} {:>12} {:>22} {:>22}",
        "gamma", "edges", "polished f", "loss vs centralized", "gain vs baseline"
    );
    for p in &points {
        let (_, f_polished) = polish(&cp, &p.support, &opts).unwrap();
        println!(
            "{:>7.2} {:>8} {:>12.4} {:>21.2}% {:>21.2}%",
            p.gamma,
            p.support.len(),
            f_polished,
            loss_percent(f_polished, f_central),
            -loss_percent(f_polished, f_baseline),
        );
    }

    // The reference penalty keeps exactly two edges; check them against
    // exhaustive search over all C(42,2) pairs plus the singletons.
    let two_edge = points.iter().find(|p| p.support.len() == 2).expect("a 2-edge point");
    let picked: Vec<(usize, usize)> =
        two_edge.support.iter().map(|&l| cp.candidates()[l]).collect();
    println!();
    println!("homotopy keeps {picked:?} at gamma = {}", two_edge.gamma);

    let (best, f_best) = brute_force_best_subset(&cp, 2, &opts).unwrap();
    let best_pairs: Vec<(usize, usize)> = best.iter().map(|&l| cp.candidates()[l]).collect();
    println!("exhaustive best 2-subset: {best_pairs:?} with f = {f_best:.4}");
    assert_eq!(two_edge.support, best, "homotopy and brute force disagree");
    println!("homotopy pick confirmed optimal");
}
