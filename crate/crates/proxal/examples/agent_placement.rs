//! Agents tracking moving targets under inter-agent distance bounds.
//!
//! Five agents on a line chase private targets while every neighboring
//! pair must stay within unit distance. The controller is the saddle flow
//! of the tracking objective under a box indicator on the pairwise gaps,
//! so each agent only ever reads its neighbors' states. At t = 5 the
//! targets jump to a scattered configuration the agents cannot reach
//! exactly; the flow re-converges to the constrained optimum, with the
//! binding gaps pinned at the bound by the dual variables.
//!
//! Run with `cargo run --example agent_placement`.

use proxal::flow::flow_rhs;
use proxal::placement::{five_agent_demo, simulate_placement};

fn main() {
    let scenario = five_agent_demo(7);
    let problem = scenario.problem().unwrap();
    let (x0, y0) = scenario.initial_state(&problem).unwrap();

    println!("schedule:");
    for (stage, (t, b)) in problem.schedule().iter().enumerate() {
        let gaps: Vec<f64> = problem
            .edges()
            .iter()
            .map(|&(i, j)| ((b[i - 1] - b[j - 1]) * 100.0).round() / 100.0)
            .collect();
        println!("  stage {stage} at t = {t}: targets {:?}", b.as_slice());
        println!("           target gaps {gaps:?}  (bound {})", problem.bound());
    }

    let samples: Vec<f64> = (0..=160).map(|k| scenario.t_end * k as f64 / 160.0).collect();
    let cfg = scenario.flow_config().with_samples(samples);
    let traj = simulate_placement(&problem, &x0, &y0, &cfg).unwrap();

    println!();
    println!("{:>7} {:>10} {:>12} {:>12}", "t", "max |gap|", "kkt", "speed");
    for (i, &t) in traj.times.iter().enumerate() {
        if i % 20 != 0 && (t - 5.0).abs() > 0.25 {
            continue;
        }
        let (x, y) = &traj.states[i];
        let stage = problem.schedule().iter().rposition(|(s, _)| *s <= t).unwrap();
        let composite = problem.composite(stage);
        let kkt = composite.kkt_residuals(x, y).max();
        let (dx, dy) = flow_rhs(&composite, x, y, scenario.mu);
        let speed = (dx.norm_squared() + dy.norm_squared()).sqrt();
        let gaps = problem.incidence() * x;
        println!("{t:>7.2} {:>10.4} {kkt:>12.3e} {speed:>12.3e}", gaps.amax());
    }

    let (x_end, _) = traj.states.last().unwrap();
    let final_gaps = problem.incidence() * x_end;
    println!();
    println!("final positions {:?}", x_end.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>());
    println!("final gaps      {:?}", final_gaps.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>());
    assert!(final_gaps.amax() <= problem.bound() + 1e-6, "distance bound violated");
    println!("all inter-agent distances within the bound");
}
