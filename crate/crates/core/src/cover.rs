//! Covering graphs on which a closed form becomes exact.
//!
//! Cut the graph open along the chords of a spanning tree: the form has a
//! primitive `f₀` on the tree, and crossing a chord changes it by the chord's
//! period. Each chord is assigned an integer coordinate in `ℤᵏ` (the face
//! relations are eliminated so that the coordinates live in the free homology
//! group), and the lifted vertex `(x, h)` carries the primitive
//! `φ(x, h) = f₀(x) + h·P`, where `P` holds the periods of the `k`
//! generators. Crossing a chord shifts `h` by its coordinate, so `dφ = ω∘σ`
//! on every lifted edge.
//!
//! Only the window `|h|∞ <= H` is materialized. Walks that leave it raise
//! [`Error::WindowExceeded`] instead of being truncated.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{Cocycle, CycleBasis, VertexPath};
use crate::space::{GraphSpace, ScalarField};

/// One entry of a lifted vertex's adjacency list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftedNeighbor {
    pub vertex: usize,
    /// Index of the projected edge in the base graph.
    pub base_edge: usize,
    /// `+1.0` when the move follows the base edge's reference orientation.
    pub sign: f64,
}

/// Compact description of a cover, for run reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSummary {
    pub rank: usize,
    pub periods: Vec<f64>,
    pub h_max: usize,
    pub lifted_vertices: usize,
    pub lifted_edges: usize,
}

/// Windowed covering graph of a closed form.
#[derive(Clone, Debug)]
pub struct CoverWindow {
    base_vertices: usize,
    rank: usize,
    h_max: usize,
    beta: f64,
    periods: DVector<f64>,
    /// Deck coordinate gained when crossing each base edge along its reference orientation.
    edge_shift: Vec<Vec<i64>>,
    base_primitive: ScalarField,
    base_measure: Vec<f64>,
    adjacency: Vec<Vec<LiftedNeighbor>>,
    phi: Vec<f64>,
}

impl CoverWindow {
    /// Builds the window `|h|∞ <= h_max` for `form`, with weight parameter `β`.
    pub fn build(space: &GraphSpace, form: &Cocycle, h_max: usize, beta: f64) -> Result<Self> {
        form.check_space(space)?;
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        let basis = CycleBasis::new(space);
        let base_primitive = basis.tree_primitive(space, form);
        let chord_periods = form.periods(space, &basis);
        let scale = 1.0 + form.edge_values().iter().map(|v| v.abs()).sum::<f64>();
        let exact = chord_periods.iter().all(|p| p.abs() <= 1e-12 * scale);

        let r = basis.rank();
        let (rank, coords) = if exact {
            (0, vec![Vec::new(); r])
        } else {
            let relations: Vec<Vec<i64>> = form
                .faces()
                .iter()
                .map(|face| {
                    let mut loop_ = face.clone();
                    loop_.push(face[0]);
                    let walk = VertexPath::new(space, loop_)?;
                    Ok(basis.chord_crossings(space, &walk))
                })
                .collect::<Result<_>>()?;
            free_coordinates(r, &relations)?
        };

        let mut generator_periods = DVector::zeros(rank);
        for (c, coord) in coords.iter().enumerate() {
            if let Some(j) = unit_index(coord) {
                generator_periods[j] = chord_periods[c];
            }
        }
        let mut edge_shift = vec![vec![0; rank]; space.edge_count()];
        for (c, &k) in basis.chords().iter().enumerate() {
            edge_shift[k] = coords[c].clone();
        }

        let mut cover = CoverWindow {
            base_vertices: space.vertex_count(),
            rank,
            h_max,
            beta,
            periods: generator_periods,
            edge_shift,
            base_primitive,
            base_measure: space.measure().to_vec(),
            adjacency: Vec::new(),
            phi: Vec::new(),
        };
        cover.materialize(space)?;
        Ok(cover)
    }

    fn materialize(&mut self, space: &GraphSpace) -> Result<()> {
        let total = self
            .sheet_count()
            .and_then(|s| s.checked_mul(self.base_vertices))
            .filter(|&t| t <= 50_000_000)
            .ok_or_else(|| Error::InvalidArgument(format!("cover window H = {} is too large", self.h_max)))?;
        self.adjacency = Vec::with_capacity(total);
        self.phi = Vec::with_capacity(total);
        for idx in 0..total {
            let (x, h) = self.vertex(idx);
            let hp: f64 = h.iter().zip(self.periods.iter()).map(|(&a, &p)| a as f64 * p).sum();
            self.phi.push(self.base_primitive[x] + hp);
            let mut list = Vec::with_capacity(space.neighbors(x).len());
            for nb in space.neighbors(x) {
                let target: Vec<i64> = h
                    .iter()
                    .zip(&self.edge_shift[nb.edge])
                    .map(|(&a, &s)| a + nb.sign as i64 * s)
                    .collect();
                if let Some(t) = self.index(nb.vertex, &target) {
                    list.push(LiftedNeighbor { vertex: t, base_edge: nb.edge, sign: nb.sign });
                }
            }
            self.adjacency.push(list);
        }
        Ok(())
    }

    fn side(&self) -> usize {
        2 * self.h_max + 1
    }

    fn sheet_count(&self) -> Option<usize> {
        self.side().checked_pow(self.rank as u32)
    }

    /// Deck rank `k`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn h_max(&self) -> usize {
        self.h_max
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Periods `P` of the deck generators.
    pub fn periods(&self) -> &DVector<f64> {
        &self.periods
    }

    /// Deck shift gained when crossing base edge `k` along its reference orientation.
    pub fn edge_shift(&self, k: usize) -> &[i64] {
        &self.edge_shift[k]
    }

    /// Primitive of the form along the spanning tree of the base.
    pub fn base_primitive(&self) -> &ScalarField {
        &self.base_primitive
    }

    pub fn lifted_vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn lifted_edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, idx: usize) -> &[LiftedNeighbor] {
        &self.adjacency[idx]
    }

    /// Index of `(x, h)` if it lies in the window.
    pub fn index(&self, x: usize, h: &[i64]) -> Option<usize> {
        if x >= self.base_vertices || h.len() != self.rank {
            return None;
        }
        let hm = self.h_max as i64;
        let mut sheet = 0usize;
        for &a in h.iter().rev() {
            if a < -hm || a > hm {
                return None;
            }
            sheet = sheet * self.side() + (a + hm) as usize;
        }
        Some(sheet * self.base_vertices + x)
    }

    /// `(x, h)` of a lifted index.
    pub fn vertex(&self, idx: usize) -> (usize, Vec<i64>) {
        let x = idx % self.base_vertices;
        let mut sheet = idx / self.base_vertices;
        let mut h = Vec::with_capacity(self.rank);
        for _ in 0..self.rank {
            h.push((sheet % self.side()) as i64 - self.h_max as i64);
            sheet /= self.side();
        }
        (x, h)
    }

    /// Projection `σ(x, h) = x`.
    pub fn project(&self, idx: usize) -> usize {
        idx % self.base_vertices
    }

    /// `φ(x, h) = f₀(x) + h·P`.
    pub fn phi(&self, idx: usize) -> f64 {
        self.phi[idx]
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi
    }

    /// `m̃(x, h) = m(x)`.
    pub fn lifted_measure(&self, idx: usize) -> f64 {
        self.base_measure[self.project(idx)]
    }

    /// `m̂ = e^{2βφ} m̃`.
    pub fn weighted_measure(&self, idx: usize) -> f64 {
        (2.0 * self.beta * self.phi[idx]).exp() * self.lifted_measure(idx)
    }

    /// Deck map `T_s(x, h) = (x, h + s)`, if the image lies in the window.
    pub fn deck(&self, idx: usize, shift: &[i64]) -> Option<usize> {
        let (x, h) = self.vertex(idx);
        if shift.len() != self.rank {
            return None;
        }
        let target: Vec<i64> = h.iter().zip(shift).map(|(a, b)| a + b).collect();
        self.index(x, &target)
    }

    /// The zero sheet `{(x, 0)}`, whose deck translates tile the window.
    pub fn fundamental_domain(&self) -> Vec<usize> {
        let zero = vec![0; self.rank];
        (0..self.base_vertices).map(|x| self.index(x, &zero).unwrap()).collect()
    }

    /// The deck translate `T_h B_ω` containing a lifted vertex.
    pub fn translate_of(&self, idx: usize) -> Vec<i64> {
        self.vertex(idx).1
    }

    /// `max |φ(head) - φ(tail) - ω(σ tail, σ head)|` over lifted edges.
    pub fn exactness_defect(&self, form: &Cocycle) -> f64 {
        let mut worst = 0.0_f64;
        for (idx, list) in self.adjacency.iter().enumerate() {
            for nb in list {
                let w = nb.sign * form.edge_values()[nb.base_edge];
                worst = worst.max((self.phi[nb.vertex] - self.phi[idx] - w).abs());
            }
        }
        worst
    }

    /// Unique lift of `path` starting on sheet `start_sheet`.
    pub fn lift_path(&self, space: &GraphSpace, path: &VertexPath, start_sheet: &[i64]) -> Result<Vec<usize>> {
        let v = path.vertices();
        let mut current = self
            .index(v[0], start_sheet)
            .ok_or(Error::WindowExceeded { h_max: self.h_max })?;
        let mut lifted = vec![current];
        for w in v.windows(2) {
            if w[0] != w[1] {
                let (k, _) = space.find_edge(w[0], w[1]).ok_or(Error::NotAdjacent(w[0], w[1]))?;
                current = self.adjacency[current]
                    .iter()
                    .find(|nb| nb.base_edge == k)
                    .ok_or(Error::WindowExceeded { h_max: self.h_max })?
                    .vertex;
            }
            lifted.push(current);
        }
        Ok(lifted)
    }

    /// Checks that every lifted walk of `steps` moves from the zero sheet stays
    /// inside the window, so a recursion over such walks is never truncated.
    pub fn check_reach(&self, space: &GraphSpace, steps: usize) -> Result<()> {
        let n = self.lifted_vertex_count();
        let mut depth = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for idx in self.fundamental_domain() {
            depth[idx] = 0;
            queue.push_back(idx);
        }
        while let Some(idx) = queue.pop_front() {
            if depth[idx] >= steps {
                continue;
            }
            if self.adjacency[idx].len() < space.neighbors(self.project(idx)).len() {
                return Err(Error::WindowExceeded { h_max: self.h_max });
            }
            for nb in &self.adjacency[idx] {
                if depth[nb.vertex] == usize::MAX {
                    depth[nb.vertex] = depth[idx] + 1;
                    queue.push_back(nb.vertex);
                }
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> CoverSummary {
        CoverSummary {
            rank: self.rank,
            periods: self.periods.iter().copied().collect(),
            h_max: self.h_max,
            lifted_vertices: self.lifted_vertex_count(),
            lifted_edges: self.lifted_edge_count(),
        }
    }
}

fn unit_index(v: &[i64]) -> Option<usize> {
    let mut found = None;
    for (i, &a) in v.iter().enumerate() {
        match a {
            0 => {}
            1 if found.is_none() => found = Some(i),
            _ => return None,
        }
    }
    found
}

/// Eliminates the face relations among `r` chord generators. Returns the number
/// of free generators and, per chord, its coordinate in terms of them.
fn free_coordinates(r: usize, relations: &[Vec<i64>]) -> Result<(usize, Vec<Vec<i64>>)> {
    // expr[c] = combination of the original chords representing chord c.
    let mut expr: Vec<Vec<i64>> = (0..r)
        .map(|c| {
            let mut e = vec![0; r];
            e[c] = 1;
            e
        })
        .collect();
    let mut eliminated = vec![false; r];
    for rel in relations {
        let mut reduced = vec![0i64; r];
        for (c, &a) in rel.iter().enumerate() {
            if a != 0 {
                for (j, &b) in expr[c].iter().enumerate() {
                    reduced[j] += a * b;
                }
            }
        }
        if reduced.iter().all(|&a| a == 0) {
            continue;
        }
        let p = reduced.iter().position(|a| a.abs() == 1).ok_or_else(|| {
            Error::InvalidArgument("face relations have torsion; only free homology is supported".into())
        })?;
        // x_p = -r_p Σ_{j≠p} r_j x_j
        let rp = reduced[p];
        let substitute: Vec<i64> = reduced
            .iter()
            .enumerate()
            .map(|(j, &a)| if j == p { 0 } else { -rp * a })
            .collect();
        for e in expr.iter_mut() {
            let coeff = e[p];
            if coeff != 0 {
                for j in 0..r {
                    e[j] += coeff * substitute[j];
                }
                e[p] = 0;
            }
        }
        eliminated[p] = true;
    }
    let free: Vec<usize> = (0..r).filter(|&c| !eliminated[c]).collect();
    let coords = expr.iter().map(|e| free.iter().map(|&j| e[j]).collect()).collect();
    Ok((free.len(), coords))
}
