#![allow(dead_code)]

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twisted_hj::forms::Cocycle;
use twisted_hj::space::{Edge, GraphSpace, ScalarField};
use twisted_hj::testing::random_space;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random connected graph together with the generator that built it.
pub fn instance(n: usize, extra: usize, seed: u64) -> (GraphSpace, ChaCha8Rng) {
    let mut r = rng(seed);
    let space = random_space(n, extra, &mut r);
    (space, r)
}

pub fn sizes() -> impl Strategy<Value = (usize, usize, u64)> {
    (3usize..10, 0usize..4, any::<u64>())
}

/// Periodic `k × k` grid with unit lengths and conductances, uniform measure,
/// and its square faces. Vertex `(i, j)` has index `i + k j`; horizontal
/// edges come first.
pub fn torus(k: usize) -> (GraphSpace, Vec<Vec<usize>>) {
    let idx = |i: usize, j: usize| (i % k) + k * (j % k);
    let mut edges = Vec::new();
    for j in 0..k {
        for i in 0..k {
            edges.push(Edge { tail: idx(i, j), head: idx(i + 1, j), length: 1.0, conductance: 1.0 });
        }
    }
    for j in 0..k {
        for i in 0..k {
            edges.push(Edge { tail: idx(i, j), head: idx(i, j + 1), length: 1.0, conductance: 1.0 });
        }
    }
    let space = GraphSpace::new(vec![1.0 / (k * k) as f64; k * k], edges).unwrap();
    let faces = (0..k)
        .flat_map(|j| (0..k).map(move |i| vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]))
        .collect();
    (space, faces)
}

/// `a` on horizontal edges and `b` on vertical ones: a closed form on the torus.
pub fn torus_form(space: &GraphSpace, k: usize, a: f64, b: f64) -> Cocycle {
    let values = (0..2 * k * k).map(|e| if e < k * k { a } else { b }).collect();
    Cocycle::from_edge_values(space, values).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn field_close(a: &ScalarField, b: &ScalarField, tol: f64) -> bool {
    (a - b).amax() <= tol * (1.0 + a.amax().max(b.amax()))
}
