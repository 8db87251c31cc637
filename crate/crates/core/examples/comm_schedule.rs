//! Prints the three matchings and how long data takes to reach everyone.

use coopnav::comm::{propagation_steps, steps_lower_bound, vertices_reached, CommSchedule};

fn main() {
    let n = 8;
    let sched = CommSchedule::new(n);
    for k in 0..3 {
        println!("E{k}: {:?}", sched.edge_set(k));
    }
    println!("measured pairs: {}", sched.measured_pairs().len());

    println!("\nfrom UAV 0 at step 0:");
    for k in 1..=propagation_steps(n) {
        let informed = sched.informed_after(0, 0, k);
        let ids: Vec<usize> = (0..n).filter(|&i| informed[i]).collect();
        println!("  after {k} exchanges: {ids:?}");
    }

    println!("\n  N  steps  bound");
    for n in [2, 4, 7, 8, 16, 32, 64] {
        println!("{n:3}  {:5}  {:5}", propagation_steps(n), steps_lower_bound(n));
    }
    println!("\nreached after k+1 exchanges, k = 0..7: {:?}", (0..8).map(vertices_reached).collect::<Vec<_>>());
}
