//! Closed one-forms on a graph.
//!
//! A [`Cocycle`] stores one real value per edge, read along the edge's
//! reference orientation; the opposite orientation carries the negated value.
//! Closedness is relative to an optional list of faces: vertex cycles declared
//! contractible, over which the circulation must vanish. Without faces every
//! cycle may carry a period, which is how a circle-like graph supports a
//! non-exact form.
//!
//! A [`ChartForm`] is the local-primitive description `{(U_i, f_i)}`: each
//! `U_i` induces a connected subgraph and on every component of an overlap the
//! primitives differ by a constant.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::space::{GraphSpace, ScalarField};

const CLOSURE_TOL: f64 = 1e-12;

/// A walk through the graph; consecutive vertices are adjacent or equal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VertexPath {
    vertices: Vec<usize>,
}

impl VertexPath {
    pub fn new(space: &GraphSpace, vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidArgument("empty path".into()));
        }
        let n = space.vertex_count();
        if let Some(&x) = vertices.iter().find(|&&x| x >= n) {
            return Err(Error::InvalidArgument(format!("path visits missing vertex {x}")));
        }
        for w in vertices.windows(2) {
            if w[0] != w[1] && !space.are_adjacent(w[0], w[1]) {
                return Err(Error::NotAdjacent(w[0], w[1]));
            }
        }
        Ok(VertexPath { vertices })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn start(&self) -> usize {
        self.vertices[0]
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().unwrap()
    }

    /// Sum of the lengths of the traversed edges.
    pub fn length(&self, space: &GraphSpace) -> f64 {
        self.vertices
            .windows(2)
            .filter(|w| w[0] != w[1])
            .map(|w| space.edges()[space.find_edge(w[0], w[1]).unwrap().0].length)
            .sum()
    }

    /// `self` followed by `other`, which must start where `self` ends.
    pub fn concat(&self, other: &VertexPath) -> Result<VertexPath> {
        if self.end() != other.start() {
            return Err(Error::InvalidArgument(format!(
                "cannot join a path ending at {} with one starting at {}",
                self.end(),
                other.start()
            )));
        }
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices[1..]);
        Ok(VertexPath { vertices })
    }

    /// A random walk of `steps` moves (stays allowed) from `start`.
    pub fn random<R: Rng>(space: &GraphSpace, start: usize, steps: usize, rng: &mut R) -> VertexPath {
        let mut vertices = vec![start];
        let mut x = start;
        for _ in 0..steps {
            let nbs = space.neighbors(x);
            let pick = rng.random_range(0..=nbs.len());
            if pick < nbs.len() {
                x = nbs[pick].vertex;
            }
            vertices.push(x);
        }
        VertexPath { vertices }
    }
}

/// Antisymmetric edge function with declared contractible cycles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cocycle {
    values: Vec<f64>,
    faces: Vec<Vec<usize>>,
}

impl Cocycle {
    pub fn zero(space: &GraphSpace) -> Self {
        Cocycle { values: vec![0.0; space.edge_count()], faces: Vec::new() }
    }

    /// Values aligned with `space.edges()`, read along each edge's reference orientation.
    pub fn from_edge_values(space: &GraphSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.edge_count() {
            return Err(Error::DimensionMismatch { expected: space.edge_count(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("cocycle has non-finite values".into()));
        }
        Ok(Cocycle { values, faces: Vec::new() })
    }

    /// From `(x, y, ω(x,y))` triples; unlisted edges get `0`.
    pub fn from_oriented(space: &GraphSpace, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut values = vec![0.0; space.edge_count()];
        let mut set = vec![false; space.edge_count()];
        for &(x, y, v) in entries {
            let (k, sign) = space.find_edge(x, y).ok_or(Error::NotAdjacent(x, y))?;
            if set[k] && values[k] != sign * v {
                return Err(Error::InvalidArgument(format!("conflicting values on edge {x}-{y}")));
            }
            values[k] = sign * v;
            set[k] = true;
        }
        Self::from_edge_values(space, values)
    }

    /// The exact form `df(x,y) = f(y) - f(x)`.
    pub fn exact(space: &GraphSpace, f: &ScalarField) -> Result<Self> {
        space.check_len(f)?;
        Ok(Cocycle {
            values: space.edges().iter().map(|e| f[e.head] - f[e.tail]).collect(),
            faces: Vec::new(),
        })
    }

    /// `ω = c · ℓ(e)` along every edge's reference orientation. On a builtin
    /// cycle this is the constant form `c dx` with loop period `c L`.
    pub fn constant(space: &GraphSpace, c: f64) -> Self {
        Cocycle { values: space.edges().iter().map(|e| c * e.length).collect(), faces: Vec::new() }
    }

    /// Declares contractible cycles; fails with `NotClosed` if a circulation
    /// exceeds `1e-12` (relative to the size of its terms).
    pub fn with_faces(mut self, space: &GraphSpace, faces: Vec<Vec<usize>>) -> Result<Self> {
        for (i, face) in faces.iter().enumerate() {
            if face.len() < 3 {
                return Err(Error::InvalidArgument(format!("face {i} has fewer than 3 vertices")));
            }
            let mut circulation = 0.0;
            let mut scale = 1.0;
            for j in 0..face.len() {
                let (a, b) = (face[j], face[(j + 1) % face.len()]);
                if a >= space.vertex_count() || b >= space.vertex_count() {
                    return Err(Error::InvalidArgument(format!("face {i} visits a missing vertex")));
                }
                let v = self.value(space, a, b)?;
                circulation += v;
                scale += v.abs();
            }
            if circulation.abs() > CLOSURE_TOL * scale {
                return Err(Error::NotClosed { face: i, circulation });
            }
        }
        self.faces = faces;
        Ok(self)
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn edge_values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn check_space(&self, space: &GraphSpace) -> Result<()> {
        if self.values.len() != space.edge_count() {
            return Err(Error::DimensionMismatch { expected: space.edge_count(), got: self.values.len() });
        }
        Ok(())
    }

    /// `ω(x,y)` for adjacent `x, y`; `ω(x,x) = 0`.
    pub fn value(&self, space: &GraphSpace, x: usize, y: usize) -> Result<f64> {
        if x == y {
            return Ok(0.0);
        }
        let (k, sign) = space.find_edge(x, y).ok_or(Error::NotAdjacent(x, y))?;
        Ok(sign * self.values[k])
    }

    fn merged_faces(&self, other: &Cocycle) -> Vec<Vec<usize>> {
        let mut faces = self.faces.clone();
        for f in &other.faces {
            if !faces.contains(f) {
                faces.push(f.clone());
            }
        }
        faces
    }

    /// Edgewise sum; the face lists are merged.
    pub fn add(&self, other: &Cocycle) -> Cocycle {
        Cocycle {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            faces: self.merged_faces(other),
        }
    }

    pub fn scale(&self, a: f64) -> Cocycle {
        Cocycle { values: self.values.iter().map(|v| a * v).collect(), faces: self.faces.clone() }
    }

    pub fn sub(&self, other: &Cocycle) -> Cocycle {
        self.add(&other.scale(-1.0))
    }

    /// `ω + df`.
    pub fn add_exact(&self, space: &GraphSpace, f: &ScalarField) -> Result<Cocycle> {
        Ok(self.add(&Cocycle::exact(space, f)?))
    }

    /// Sum of `ω` over the traversed oriented edges.
    pub fn integrate(&self, space: &GraphSpace, path: &VertexPath) -> f64 {
        path.vertices
            .windows(2)
            .map(|w| self.value(space, w[0], w[1]).expect("validated path"))
            .sum()
    }

    /// `C₂ = max_e |ω(e)| / ℓ(e)`, so that `|∫_p ω| <= C₂ · length(p)`.
    pub fn path_bound_constant(&self, space: &GraphSpace) -> f64 {
        self.values
            .iter()
            .zip(space.edges())
            .map(|(v, e)| v.abs() / e.length)
            .fold(0.0, f64::max)
    }

    /// Circulations over the basis cycles.
    pub fn periods(&self, space: &GraphSpace, basis: &CycleBasis) -> DVector<f64> {
        let f0 = basis.tree_primitive(space, self);
        DVector::from_iterator(
            basis.chords.len(),
            basis.chords.iter().map(|&k| {
                let e = space.edges()[k];
                f0[e.tail] + self.values[k] - f0[e.head]
            }),
        )
    }

    /// Whether `self - other` is exact, i.e. all its periods vanish.
    pub fn equivalent(&self, space: &GraphSpace, other: &Cocycle) -> bool {
        let basis = CycleBasis::new(space);
        let diff = self.sub(other);
        let periods = diff.periods(space, &basis);
        let scale = 1.0 + self.values.iter().chain(&other.values).map(|v| v.abs()).fold(0.0, f64::max);
        periods.iter().all(|p| p.abs() <= 1e-10 * scale * space.vertex_count() as f64)
    }

    /// `div ω(x) = (1/m(x)) Σ_y w(xy) ω(x,y)`, the Laplacian of any local primitive.
    pub fn divergence(&self, space: &GraphSpace) -> ScalarField {
        ScalarField::from_fn(space.vertex_count(), |x, _| {
            let s: f64 = space
                .neighbors(x)
                .iter()
                .map(|nb| space.edges()[nb.edge].conductance * nb.sign * self.values[nb.edge])
                .sum();
            s / space.measure()[x]
        })
    }

    pub fn harmonicity(&self, space: &GraphSpace, tol: f64) -> Harmonicity {
        let residual = self.divergence(space);
        let max_residual = residual.amax();
        Harmonicity { harmonic: max_residual <= tol, max_residual, residual }
    }

    pub fn is_harmonic(&self, space: &GraphSpace, tol: f64) -> bool {
        self.harmonicity(space, tol).harmonic
    }

    /// The equivalent harmonic form `ω + dh`, where `Δh = -div ω` and `Σ h m = 0`.
    pub fn harmonic_representative(&self, space: &GraphSpace) -> Result<(Cocycle, ScalarField)> {
        self.check_space(space)?;
        let n = space.vertex_count();
        // -MΔ is positive semidefinite with kernel the constants; adding 11ᵀ makes it definite.
        let a = -space.stiffness_matrix() + DMatrix::from_element(n, n, 1.0);
        let div = self.divergence(space);
        let rhs = ScalarField::from_fn(n, |x, _| div[x] * space.measure()[x]);
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Singular("harmonic projection".into()))?;
        let mut h = chol.solve(&rhs);
        let mean = space.integrate(&h);
        h.add_scalar_mut(-mean);
        let form = self.add_exact(space, &h)?;
        Ok((Cocycle { faces: self.faces.clone(), ..form }, h))
    }

    /// `Γ̂(ω, df)`, the pairing of `ω` with the exact form of a vertex field.
    pub fn pair_with_gradient(&self, space: &GraphSpace, f: &ScalarField) -> ScalarField {
        ScalarField::from_fn(space.vertex_count(), |x, _| {
            let s: f64 = space
                .neighbors(x)
                .iter()
                .map(|nb| {
                    let w = space.edges()[nb.edge].conductance;
                    w * nb.sign * self.values[nb.edge] * (f[nb.vertex] - f[x])
                })
                .sum();
            s / (2.0 * space.measure()[x])
        })
    }

    /// A cocycle with independent uniform values in `[-scale, scale]`.
    pub fn random<R: Rng>(space: &GraphSpace, scale: f64, rng: &mut R) -> Cocycle {
        Cocycle {
            values: (0..space.edge_count()).map(|_| rng.random_range(-scale..=scale)).collect(),
            faces: Vec::new(),
        }
    }
}

/// `Γ̂(ω₁, ω₂)(x) = (1/(2m(x))) Σ_y w(xy) ω₁(x,y) ω₂(x,y)`.
pub fn gamma_hat(space: &GraphSpace, a: &Cocycle, b: &Cocycle) -> ScalarField {
    ScalarField::from_fn(space.vertex_count(), |x, _| {
        let s: f64 = space
            .neighbors(x)
            .iter()
            .map(|nb| space.edges()[nb.edge].conductance * a.values[nb.edge] * b.values[nb.edge])
            .sum();
        s / (2.0 * space.measure()[x])
    })
}

/// Outcome of a harmonicity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Harmonicity {
    pub harmonic: bool,
    pub max_residual: f64,
    #[serde(skip)]
    pub residual: ScalarField,
}

/// Spanning tree (BFS from vertex 0) plus chords; each chord closes one basis cycle.
#[derive(Clone, Debug)]
pub struct CycleBasis {
    /// BFS order of the vertices.
    order: Vec<usize>,
    /// Tree edge reaching each vertex from its parent (`None` at the root).
    parent: Vec<Option<(usize, usize)>>,
    chords: Vec<usize>,
}

impl CycleBasis {
    pub fn new(space: &GraphSpace) -> Self {
        let n = space.vertex_count();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut tree_edge = vec![false; space.edge_count()];
        let mut order = Vec::with_capacity(n);
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for nb in space.neighbors(x) {
                if !seen[nb.vertex] {
                    seen[nb.vertex] = true;
                    parent[nb.vertex] = Some((x, nb.edge));
                    tree_edge[nb.edge] = true;
                    queue.push_back(nb.vertex);
                }
            }
        }
        let chords = (0..space.edge_count()).filter(|&k| !tree_edge[k]).collect();
        CycleBasis { order, parent, chords }
    }

    /// Edge indices of the chords, one per basis cycle.
    pub fn chords(&self) -> &[usize] {
        &self.chords
    }

    pub fn rank(&self) -> usize {
        self.chords.len()
    }

    pub fn is_tree_edge(&self, k: usize) -> bool {
        !self.chords.contains(&k)
    }

    /// Primitive of `ω` along the tree, zero at the root.
    pub fn tree_primitive(&self, space: &GraphSpace, form: &Cocycle) -> ScalarField {
        let mut f = ScalarField::zeros(space.vertex_count());
        for &x in &self.order {
            if let Some((p, k)) = self.parent[x] {
                let sign = if space.edges()[k].tail == p { 1.0 } else { -1.0 };
                f[x] = f[p] + sign * form.values[k];
            }
        }
        f
    }

    /// Tree path from the root to `x`.
    fn root_path(&self, mut x: usize) -> Vec<usize> {
        let mut path = vec![x];
        while let Some((p, _)) = self.parent[x] {
            path.push(p);
            x = p;
        }
        path.reverse();
        path
    }

    /// The basis cycle of chord `i` as a closed vertex path: along the chord
    /// `a -> b`, then back to `a` through the tree.
    pub fn cycle(&self, space: &GraphSpace, i: usize) -> VertexPath {
        let e = space.edges()[self.chords[i]];
        let pa = self.root_path(e.tail);
        let pb = self.root_path(e.head);
        let common = pa.iter().zip(&pb).take_while(|(a, b)| a == b).count();
        let mut vertices = vec![e.tail];
        // b up to the last common ancestor, then down to a.
        vertices.extend(pb[common - 1..].iter().rev());
        vertices.extend(&pa[common..]);
        VertexPath { vertices }
    }

    /// Signed number of times a closed walk crosses each chord.
    pub fn chord_crossings(&self, space: &GraphSpace, path: &VertexPath) -> Vec<i64> {
        let mut counts = vec![0; self.chords.len()];
        for w in path.vertices.windows(2) {
            if w[0] == w[1] {
                continue;
            }
            let (k, sign) = space.find_edge(w[0], w[1]).expect("validated path");
            if let Some(i) = self.chords.iter().position(|&c| c == k) {
                counts[i] += sign as i64;
            }
        }
        counts
    }
}

/// One chart `(U, f)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chart {
    pub vertices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Chart {
    fn position(&self, x: usize) -> Option<usize> {
        self.vertices.binary_search(&x).ok()
    }

    fn get(&self, x: usize) -> Option<f64> {
        self.position(x).map(|i| self.values[i])
    }

    fn contains_edge(&self, x: usize, y: usize) -> bool {
        self.position(x).is_some() && self.position(y).is_some()
    }
}

/// A closed form given by local primitives on connected vertex sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartForm {
    charts: Vec<Chart>,
}

/// One segment of an adapted partition: the sub-walk from the previous
/// boundary up to path position `end`, integrated in chart `chart`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub chart: usize,
    pub end: usize,
}

impl ChartForm {
    pub fn new(space: &GraphSpace, charts: Vec<(Vec<usize>, Vec<f64>)>) -> Result<Self> {
        let n = space.vertex_count();
        let mut covered = vec![false; n];
        let mut out = Vec::with_capacity(charts.len());
        for (i, (vertices, values)) in charts.into_iter().enumerate() {
            if vertices.is_empty() || vertices.len() != values.len() {
                return Err(Error::InvalidArgument(format!("chart {i} is empty or has mismatched values")));
            }
            let mut pairs: Vec<(usize, f64)> = vertices.into_iter().zip(values).collect();
            pairs.sort_by_key(|p| p.0);
            if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidArgument(format!("chart {i} repeats a vertex")));
            }
            if let Some(&(x, _)) = pairs.iter().find(|p| p.0 >= n) {
                return Err(Error::InvalidArgument(format!("chart {i} references missing vertex {x}")));
            }
            if pairs.iter().any(|p| !p.1.is_finite()) {
                return Err(Error::InvalidArgument(format!("chart {i} has non-finite values")));
            }
            let chart = Chart {
                vertices: pairs.iter().map(|p| p.0).collect(),
                values: pairs.iter().map(|p| p.1).collect(),
            };
            if induced_components(space, &chart.vertices).len() != 1 {
                return Err(Error::InvalidArgument(format!("chart {i} does not induce a connected subgraph")));
            }
            for &x in &chart.vertices {
                covered[x] = true;
            }
            out.push(chart);
        }
        if let Some(x) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidArgument(format!("vertex {x} lies in no chart")));
        }
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                let overlap: Vec<usize> =
                    out[i].vertices.iter().copied().filter(|&x| out[j].position(x).is_some()).collect();
                for comp in induced_components(space, &overlap) {
                    let d0 = out[i].get(comp[0]).unwrap() - out[j].get(comp[0]).unwrap();
                    for &x in &comp[1..] {
                        let d = out[i].get(x).unwrap() - out[j].get(x).unwrap();
                        let scale = 1.0 + d.abs().max(d0.abs());
                        if (d - d0).abs() > CLOSURE_TOL * scale {
                            return Err(Error::ChartMismatch { i, j });
                        }
                    }
                }
            }
        }
        Ok(ChartForm { charts: out })
    }

    /// Edge charts `U_e = {a, b}` with `f_e = (0, ω(a,b))`; valid for any cocycle.
    pub fn from_cocycle(space: &GraphSpace, form: &Cocycle) -> Result<Self> {
        form.check_space(space)?;
        let mut charts: Vec<(Vec<usize>, Vec<f64>)> = space
            .edges()
            .iter()
            .zip(&form.values)
            .map(|(e, &v)| (vec![e.tail, e.head], vec![0.0, v]))
            .collect();
        if space.edge_count() == 0 {
            charts.push((vec![0], vec![0.0]));
        }
        Self::new(space, charts)
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    /// Indices of the charts containing both endpoints of a move.
    pub fn charts_containing(&self, x: usize, y: usize) -> Vec<usize> {
        (0..self.charts.len()).filter(|&i| self.charts[i].contains_edge(x, y)).collect()
    }

    /// Coboundary of the local primitives, edge by edge.
    pub fn to_cocycle(&self, space: &GraphSpace) -> Result<Cocycle> {
        let values = space
            .edges()
            .iter()
            .map(|e| {
                let c = self
                    .charts
                    .iter()
                    .find(|c| c.contains_edge(e.tail, e.head))
                    .ok_or(Error::ChartGap { from: e.tail, to: e.head })?;
                Ok(c.get(e.head).unwrap() - c.get(e.tail).unwrap())
            })
            .collect::<Result<Vec<f64>>>()?;
        Cocycle::from_edge_values(space, values)
    }

    /// Integral over `path` using the greedy maximal-segment partition.
    pub fn integrate(&self, path: &VertexPath) -> Result<f64> {
        let segments = self.greedy_partition(path)?;
        self.integrate_with_partition(path, &segments)
    }

    /// Greedy adapted partition: from each boundary, take the chart that
    /// extends furthest along the path (smallest index on ties).
    pub fn greedy_partition(&self, path: &VertexPath) -> Result<Vec<Segment>> {
        let v = &path.vertices;
        let mut segments = Vec::new();
        let mut start = 0;
        while start + 1 < v.len() {
            let mut best: Option<Segment> = None;
            for (i, c) in self.charts.iter().enumerate() {
                let mut end = start;
                while end + 1 < v.len() && c.contains_edge(v[end], v[end + 1]) {
                    end += 1;
                }
                if end > start && best.is_none_or(|b| end > b.end) {
                    best = Some(Segment { chart: i, end });
                }
            }
            let seg = best.ok_or(Error::ChartGap { from: v[start], to: v[start + 1] })?;
            segments.push(seg);
            start = seg.end;
        }
        Ok(segments)
    }

    /// Integral over `path` using a caller-supplied adapted partition.
    pub fn integrate_with_partition(&self, path: &VertexPath, segments: &[Segment]) -> Result<f64> {
        let v = &path.vertices;
        let mut start = 0;
        let mut total = 0.0;
        for seg in segments {
            let c = self
                .charts
                .get(seg.chart)
                .ok_or_else(|| Error::InvalidArgument(format!("no chart {}", seg.chart)))?;
            if seg.end <= start || seg.end >= v.len() {
                return Err(Error::InvalidArgument("partition is not increasing within the path".into()));
            }
            for p in start..seg.end {
                if !c.contains_edge(v[p], v[p + 1]) {
                    return Err(Error::ChartGap { from: v[p], to: v[p + 1] });
                }
            }
            total += c.get(v[seg.end]).unwrap() - c.get(v[start]).unwrap();
            start = seg.end;
        }
        if start + 1 < v.len() {
            return Err(Error::InvalidArgument("partition does not cover the path".into()));
        }
        Ok(total)
    }

    /// A random adapted partition of `path`.
    pub fn random_partition<R: Rng>(&self, path: &VertexPath, rng: &mut R) -> Result<Vec<Segment>> {
        let v = &path.vertices;
        let mut segments = Vec::new();
        let mut start = 0;
        while start + 1 < v.len() {
            let options = self.charts_containing(v[start], v[start + 1]);
            if options.is_empty() {
                return Err(Error::ChartGap { from: v[start], to: v[start + 1] });
            }
            let chart = options[rng.random_range(0..options.len())];
            let mut reach = start + 1;
            while reach + 1 < v.len() && self.charts[chart].contains_edge(v[reach], v[reach + 1]) {
                reach += 1;
            }
            let end = rng.random_range(start + 1..=reach);
            segments.push(Segment { chart, end });
            start = end;
        }
        Ok(segments)
    }

    /// Adds a constant to chart `i` on every vertex; the form is unchanged.
    pub fn shift_chart(&mut self, i: usize, c: f64) {
        for v in &mut self.charts[i].values {
            *v += c;
        }
    }
}

/// Connected components of the subgraph induced by `vertices`.
fn induced_components(space: &GraphSpace, vertices: &[usize]) -> Vec<Vec<usize>> {
    let mut inside = vec![false; space.vertex_count()];
    for &x in vertices {
        inside[x] = true;
    }
    let mut seen = vec![false; space.vertex_count()];
    let mut components = Vec::new();
    for &s in vertices {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for nb in space.neighbors(x) {
                if inside[nb.vertex] && !seen[nb.vertex] {
                    seen[nb.vertex] = true;
                    comp.push(nb.vertex);
                    queue.push_back(nb.vertex);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Constants controlling the viscous problem for a given form and potential.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// `‖Γ̂(ω,ω)‖_{L∞}`.
    pub gamma_hat_linf: f64,
    /// `‖Γ̂(ω,ω)‖_{V¹∞}`.
    pub gamma_hat_v1: f64,
    /// Largest probed `‖Γ̂(ω,dv)‖_{V¹∞} / ‖v‖_{V²∞}`.
    pub d5_estimate: f64,
    /// Index of the probe attaining `d5_estimate`.
    pub d5_argmax_probe: usize,
    pub probes: usize,
    /// `sup_{t,x} |V|`.
    pub potential_sup: f64,
    /// Spatial Lipschitz constant of `V`, uniform in time.
    pub potential_lipschitz: f64,
    /// Largest step for which `I - Δt·B` stays diagonally positive, i.e.
    /// `1 / sup((β/2)Γ̂(ω,ω) + βV)₊` (infinite if the bracket is never positive).
    pub implicit_step_bound: f64,
}

pub fn check_hypotheses<R: Rng>(
    space: &GraphSpace,
    form: &Cocycle,
    potential: &Potential,
    beta: f64,
    probes: usize,
    rng: &mut R,
) -> Result<HypothesisReport> {
    form.check_space(space)?;
    potential.check(space)?;
    let n = space.vertex_count();
    let gh = gamma_hat(space, form, form);
    let gh_norms = space.v_norms(&gh);
    let mut d5 = 0.0;
    let mut argmax = 0;
    for i in 0..probes {
        let v = ScalarField::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let denom = space.v_norms(&v).v2;
        if denom == 0.0 {
            continue;
        }
        let ratio = space.v_norms(&form.pair_with_gradient(space, &v)).v1 / denom;
        if ratio > d5 {
            d5 = ratio;
            argmax = i;
        }
    }
    let growth = (0..n)
        .map(|x| 0.5 * beta * gh[x] + beta * potential_upper(potential, x))
        .fold(0.0, f64::max);
    Ok(HypothesisReport {
        gamma_hat_linf: gh_norms.linf,
        gamma_hat_v1: gh_norms.v1,
        d5_estimate: d5,
        d5_argmax_probe: argmax,
        probes,
        potential_sup: potential.sup_abs(),
        potential_lipschitz: potential.lipschitz_constant(space),
        implicit_step_bound: if growth > 0.0 { 1.0 / growth } else { f64::INFINITY },
    })
}

/// Upper bound of `V(·, x)` over time.
fn potential_upper(potential: &Potential, x: usize) -> f64 {
    match potential {
        Potential::Zero => 0.0,
        Potential::Static(v) => v[x],
        Potential::Modulated { profile, .. } => profile[x].abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_form_on_cycle() {
        let s = GraphSpace::cycle(16, 1.0).unwrap();
        let w = Cocycle::constant(&s, 3.0);
        let lp = VertexPath::new(&s, (0..=16).map(|i| i % 16).collect()).unwrap();
        assert!((w.integrate(&s, &lp) - 3.0).abs() < 1e-12);
        let basis = CycleBasis::new(&s);
        assert_eq!(basis.rank(), 1);
        let p = w.periods(&s, &basis);
        assert!((p[0].abs() - 3.0).abs() < 1e-12);
        assert!((w.path_bound_constant(&s) - 3.0).abs() < 1e-12);
        assert!(gamma_hat(&s, &w, &w).iter().all(|v| (v - 9.0).abs() < 1e-12));
        let h = w.harmonicity(&s, 1e-12);
        assert!(h.harmonic && h.max_residual < 1e-12);
    }

    #[test]
    fn two_plus_one_has_loop_integral_three() {
        let s = GraphSpace::cycle(10, 2.0).unwrap();
        let sum = Cocycle::constant(&s, 1.0).add(&Cocycle::constant(&s, 2.0));
        let lp = VertexPath::new(&s, (0..=10).map(|i| i % 10).collect()).unwrap();
        assert!((sum.integrate(&s, &lp) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equivalence() {
        let s = GraphSpace::cycle(8, 1.0).unwrap();
        let w = Cocycle::constant(&s, 1.0);
        let f = ScalarField::from_fn(8, |i, _| (i as f64).sin());
        assert!(w.equivalent(&s, &w));
        assert!(w.equivalent(&s, &w.add_exact(&s, &f).unwrap()));
        assert!(!w.equivalent(&s, &Cocycle::constant(&s, 2.0)));
    }

    #[test]
    fn exact_forms_have_zero_periods_and_telescoping_integrals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = GraphSpace::cycle(9, 1.0).unwrap();
        let f = ScalarField::from_fn(9, |_, _| rng.random_range(-1.0..1.0));
        let df = Cocycle::exact(&s, &f).unwrap();
        assert!(df.periods(&s, &CycleBasis::new(&s)).amax() < 1e-14);
        let p = VertexPath::random(&s, 3, 20, &mut rng);
        assert!((df.integrate(&s, &p) - (f[p.end()] - f[p.start()])).abs() < 1e-12);
        assert!(gamma_hat(&s, &df, &df) == s.gamma(&f, &f));
        let r = df.harmonicity(&s, 1e-12);
        assert!((r.residual - s.laplacian(&f)).amax() < 1e-12);
    }

    #[test]
    fn harmonic_representative_removes_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = GraphSpace::cycle(12, 1.0).unwrap();
        let w = Cocycle::random(&s, 1.0, &mut rng);
        let (h, _) = w.harmonic_representative(&s).unwrap();
        assert!(h.harmonicity(&s, 1e-10).harmonic);
        assert!(h.equivalent(&s, &w));
    }

    #[test]
    fn faces_enforce_closure() {
        // Square with a diagonal: two triangles.
        let s = GraphSpace::new(
            vec![0.25; 4],
            [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]
                .iter()
                .map(|&(a, b)| crate::space::Edge { tail: a, head: b, length: 1.0, conductance: 1.0 })
                .collect(),
        )
        .unwrap();
        let f = ScalarField::from_vec(vec![0.0, 1.0, 3.0, 2.0]);
        let df = Cocycle::exact(&s, &f).unwrap();
        assert!(df.clone().with_faces(&s, vec![vec![0, 1, 2], vec![0, 2, 3]]).is_ok());
        let bad = Cocycle::from_oriented(&s, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            bad.with_faces(&s, vec![vec![0, 1, 2]]),
            Err(Error::NotClosed { face: 0, .. })
        ));
    }

    #[test]
    fn chart_form_validation_and_round_trip() {
        let s = GraphSpace::cycle(6, 1.0).unwrap();
        let w = Cocycle::constant(&s, 2.0);
        let charts = ChartForm::from_cocycle(&s, &w).unwrap();
        assert_eq!(charts.to_cocycle(&s).unwrap().edge_values(), w.edge_values());
        // Two arcs overlapping in two components with different offsets: a
        // valid chart form with nonzero period.
        let a = (vec![0, 1, 2, 3], vec![0.0, 1.0, 2.0, 3.0]);
        let b = (vec![3, 4, 5, 0], vec![3.0, 4.0, 5.0, 6.0]);
        let cf = ChartForm::new(&s, vec![a.clone(), b.clone()]).unwrap();
        let lp = VertexPath::new(&s, vec![0, 1, 2, 3, 4, 5, 0]).unwrap();
        assert!((cf.integrate(&lp).unwrap() - 6.0).abs() < 1e-12);
        // Same offset mismatch inside one component is rejected.
        let c = (vec![2, 3, 4], vec![2.0, 3.5, 4.0]);
        assert!(matches!(ChartForm::new(&s, vec![a, b, c]), Err(Error::ChartMismatch { i: 0, j: 2 })));
    }

    #[test]
    fn chart_gap_is_reported() {
        let s = GraphSpace::cycle(6, 1.0).unwrap();
        let cf = ChartForm::new(&s, vec![(vec![0, 1, 2], vec![0.0; 3]), (vec![3, 4, 5], vec![0.0; 3])]).unwrap();
        let p = VertexPath::new(&s, vec![1, 2, 3]).unwrap();
        assert_eq!(cf.integrate(&p), Err(Error::ChartGap { from: 2, to: 3 }));
    }

    #[test]
    fn basis_cycles_are_closed_walks_through_their_chord() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = crate::testing::random_space(10, 5, &mut rng);
        let basis = CycleBasis::new(&s);
        for i in 0..basis.rank() {
            let c = basis.cycle(&s, i);
            assert!(VertexPath::new(&s, c.vertices().to_vec()).is_ok());
            assert_eq!(c.start(), c.end());
            let crossings = basis.chord_crossings(&s, &c);
            let mut unit = vec![0; basis.rank()];
            unit[i] = 1;
            assert_eq!(crossings, unit);
        }
    }

    #[test]
    fn hypotheses_for_constant_form() {
        let s = GraphSpace::cycle(20, 1.0).unwrap();
        let w = Cocycle::constant(&s, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = check_hypotheses(&s, &w, &Potential::Zero, 1.0, 50, &mut rng).unwrap();
        assert!((r.gamma_hat_linf - 4.0).abs() < 1e-12);
        assert!((r.gamma_hat_v1 - 4.0).abs() < 1e-10);
        assert!(r.d5_estimate.is_finite() && r.d5_estimate > 0.0);
        let z = check_hypotheses(&s, &Cocycle::zero(&s), &Potential::Zero, 1.0, 10, &mut rng).unwrap();
        assert_eq!((z.gamma_hat_linf, z.gamma_hat_v1, z.d5_estimate), (0.0, 0.0, 0.0));
    }
}
