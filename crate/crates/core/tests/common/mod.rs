#![allow(dead_code)]

use ppc_consensus::{build_topology, Topology};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random labelled tree on `n` vertices with random edge orientations and a
/// leader suffix of random size.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Topology {
    let n_leaders = rng.gen_range(1..n);
    random_tree_with_leaders(rng, n, n_leaders)
}

pub fn random_tree_with_leaders(rng: &mut ChaCha8Rng, n: usize, n_leaders: usize) -> Topology {
    let edges = random_edges(rng, n);
    let leaders: Vec<usize> = (n - n_leaders + 1..=n).collect();
    build_topology(n, &edges, &leaders).expect("random tree is valid")
}

/// Edges of a random labelled tree: a random attachment order over a random
/// vertex permutation, each edge randomly oriented.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    (1..n)
        .map(|i| {
            let a = order[i];
            let b = order[rng.gen_range(0..i)];
            if rng.gen_bool(0.5) {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}
