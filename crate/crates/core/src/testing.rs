//! Random instance generators shared by the test suites and the CLI sweeps.

use rand::Rng;

use crate::space::{Edge, GraphSpace, ScalarField};

/// A connected graph on `n` vertices: a random spanning tree plus up to
/// `extra` further edges, with random lengths, conductances and measure.
pub fn random_space<R: Rng>(n: usize, extra: usize, rng: &mut R) -> GraphSpace {
    let mut edges: Vec<Edge> = Vec::new();
    let edge = |a: usize, b: usize, rng: &mut R| Edge {
        tail: a,
        head: b,
        length: rng.random_range(0.5..1.5),
        conductance: rng.random_range(0.5..2.0),
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.push(edge(j, i, rng));
    }
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 100 {
        tries += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let key = (a.min(b), a.max(b));
        if a == b || edges.iter().any(|e| (e.tail.min(e.head), e.tail.max(e.head)) == key) {
            continue;
        }
        edges.push(edge(a, b, rng));
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    GraphSpace::new(raw.iter().map(|v| v / total).collect(), edges).expect("generated graph is valid")
}

/// Independent uniform entries in `[lo, hi)`.
pub fn random_field<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> ScalarField {
    ScalarField::from_fn(n, |_, _| rng.random_range(lo..hi))
}
