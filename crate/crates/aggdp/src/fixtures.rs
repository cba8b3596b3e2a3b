//! Small models and seeded random instances used by tests, benchmarks, and
//! the CLI's built-in suites.

use crate::mdp::{Mdp, Transitions};
use crate::rng::SplitMix64;

/// Two states, discount 1/2, deterministic cycle 1 -> 2 -> 1 with stage
/// costs (1, 0). The unique policy costs (4/3, 2/3).
pub fn two_state() -> Mdp {
    Mdp::discounted(
        2,
        0.5,
        vec![
            vec![vec![(2, 1.0, 1.0)]],
            vec![vec![(1, 1.0, 0.0)]],
        ],
    )
    .expect("fixture is valid")
}

/// [`two_state`] plus a second control at state 1: a free self-loop, which
/// the optimal policy takes.
pub fn two_state_two_controls() -> Mdp {
    Mdp::discounted(
        2,
        0.5,
        vec![
            vec![vec![(2, 1.0, 1.0)], vec![(1, 1.0, 0.0)]],
            vec![vec![(1, 1.0, 0.0)]],
        ],
    )
    .expect("fixture is valid")
}

/// One state, discount 1/2, a single self-loop of cost 1. Its cost vector is
/// the scalar 2.
pub fn one_state_loop() -> Mdp {
    Mdp::discounted(1, 0.5, vec![vec![vec![(1, 1.0, 1.0)]]]).expect("fixture is valid")
}

/// Seeded random discounted model: every state gets 1..=`max_controls`
/// controls, each with a small random support, normalized probabilities, and
/// costs in `[0, 1)`.
pub fn random_discounted(seed: u64, n: usize, max_controls: usize, alpha: f64) -> Mdp {
    let mut rng = SplitMix64::stream(seed, 0);
    let mut transitions: Transitions = Vec::with_capacity(n);
    for _ in 0..n {
        let controls = 1 + rng.below(max_controls);
        let mut rows = Vec::with_capacity(controls);
        for _ in 0..controls {
            rows.push(random_row(&mut rng, n));
        }
        transitions.push(rows);
    }
    Mdp::discounted(n, alpha, transitions).expect("generated rows are valid")
}

fn random_row(rng: &mut SplitMix64, n: usize) -> Vec<(usize, f64, f64)> {
    let support = 1 + rng.below(n.min(4));
    let mut dests: Vec<usize> = (1..=n).collect();
    rng.shuffle(&mut dests);
    dests.truncate(support);
    dests.sort_unstable();
    let weights: Vec<f64> = (0..support).map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = weights.iter().sum();
    let mut row: Vec<(usize, f64, f64)> = Vec::with_capacity(support);
    let mut acc = 0.0;
    for (k, (&to, &w)) in dests.iter().zip(&weights).enumerate() {
        let p = if k + 1 == support {
            1.0 - acc
        } else {
            w / total
        };
        acc += p;
        row.push((to, p, rng.next_f64()));
    }
    row
}

/// Seeded random partition of `1..=n` into exactly `q` nonempty cells,
/// returned with members sorted.
pub fn random_partition(seed: u64, n: usize, q: usize) -> Vec<Vec<usize>> {
    assert!(q >= 1 && q <= n, "need 1 <= q <= n");
    let mut rng = SplitMix64::stream(seed, 1);
    let mut states: Vec<usize> = (1..=n).collect();
    rng.shuffle(&mut states);
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); q];
    for (idx, state) in states.into_iter().enumerate() {
        if idx < q {
            cells[idx].push(state);
        } else {
            let cell = rng.below(q);
            cells[cell].push(state);
        }
    }
    for cell in &mut cells {
        cell.sort_unstable();
    }
    cells
}

/// Contiguous partition of `1..=n` into `q` blocks of near-equal size.
pub fn contiguous_partition(n: usize, q: usize) -> Vec<Vec<usize>> {
    assert!(q >= 1 && q <= n, "need 1 <= q <= n");
    let mut cells = Vec::with_capacity(q);
    let mut start = 1;
    for l in 0..q {
        let end = 1 + (n * (l + 1)) / q;
        cells.push((start..end).collect::<Vec<_>>());
        start = end;
    }
    cells
}
