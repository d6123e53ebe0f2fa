//! Finite metric measure spaces: weighted graphs carrying a Dirichlet form.
//!
//! A [`GraphSpace`] holds a probability measure `m` on the vertices and, for
//! every edge, a length (which generates the shortest-path metric) and a
//! conductance (which generates the energy). From these we get
//!
//! * the carré du champ `Γ(f,g)(x) = (1/(2 m(x))) Σ_{y~x} w(xy) (f(y)-f(x)) (g(y)-g(x))`,
//! * the Laplacian `Δf(x) = (1/m(x)) Σ_{y~x} w(xy) (f(y)-f(x))`,
//! * the heat semigroup `P_τ = exp((τ/2β) Δ)`.
//!
//! With these definitions summation by parts, `-Σ Δf·g·m = Σ Γ(f,g)·m`, holds
//! exactly (up to rounding), and the energy is a quadratic form by
//! construction. All reductions run in vertex index order so results are
//! bit-reproducible.

use std::collections::{HashMap, VecDeque};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values of a function on the vertices of a [`GraphSpace`].
pub type ScalarField = DVector<f64>;

/// An undirected edge, stored with a reference orientation `tail -> head`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
    pub conductance: f64,
}

/// One entry of a vertex's adjacency list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub vertex: usize,
    pub edge: usize,
    /// `+1.0` when the edge's reference orientation leaves the owning vertex.
    pub sign: f64,
}

/// How [`GraphSpace::heat_flow`] evaluates `exp((τ/2β) Δ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum HeatBackend {
    /// Exact functional calculus through the eigendecomposition of `Δ`.
    #[default]
    Spectral,
    /// `η` implicit-Euler substeps; `None` picks `η` from the spectral error bound.
    ImplicitEuler { substeps: Option<usize> },
}

/// Eigendecomposition of `Δ`, symmetrized in the `m`-weighted inner product:
/// `Δ = M^{-1/2} Q Λ Qᵀ M^{1/2}`.
#[derive(Clone, Debug)]
pub struct Spectral {
    /// Eigenvalues of `Δ`, all `<= 0`.
    pub eigenvalues: DVector<f64>,
    basis: DMatrix<f64>,
    basis_t: DMatrix<f64>,
    sqrt_m: DVector<f64>,
}

impl Spectral {
    /// Coordinates of `f` in the eigenbasis.
    pub fn to_modes(&self, f: &ScalarField) -> DVector<f64> {
        &self.basis_t * f.component_mul(&self.sqrt_m)
    }

    /// Inverse of [`Spectral::to_modes`].
    pub fn from_modes(&self, c: &DVector<f64>) -> ScalarField {
        (&self.basis * c).component_div(&self.sqrt_m)
    }

    /// Multiplier of each mode under `P_τ`.
    pub fn heat_multipliers(&self, tau: f64, beta: f64) -> DVector<f64> {
        self.eigenvalues.map(|l| (l * tau / (2.0 * beta)).exp())
    }
}

/// Sup, V¹∞ and V²∞ norms of a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VNorms {
    pub linf: f64,
    pub v1: f64,
    pub v2: f64,
}

/// A connected weighted graph with a probability measure on its vertices.
#[derive(Clone, Debug)]
pub struct GraphSpace {
    measure: Vec<f64>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<Neighbor>>,
    edge_index: HashMap<(usize, usize), usize>,
    spectral: OnceLock<Spectral>,
    edge_distances: OnceLock<Vec<f64>>,
    distances: OnceLock<DMatrix<f64>>,
}

const MASS_TOL: f64 = 1e-9;

impl GraphSpace {
    pub fn new(measure: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return Err(Error::InvalidGraph("no vertices".into()));
        }
        if let Some((x, &mx)) = measure.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::InvalidGraph(format!("measure of vertex {x} is {mx}, expected (0,1]")));
        }
        let total: f64 = measure.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidGraph(format!("measure sums to {total}, expected 1")));
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            if e.tail >= n || e.head >= n {
                return Err(Error::InvalidGraph(format!("edge {k} references a missing vertex")));
            }
            if e.tail == e.head {
                return Err(Error::InvalidGraph(format!("edge {k} is a self-loop")));
            }
            if !(e.length > 0.0 && e.length.is_finite()) {
                return Err(Error::InvalidGraph(format!("edge {k} has length {}", e.length)));
            }
            if !(e.conductance > 0.0 && e.conductance.is_finite()) {
                return Err(Error::InvalidGraph(format!("edge {k} has conductance {}", e.conductance)));
            }
            let key = (e.tail.min(e.head), e.tail.max(e.head));
            if edge_index.insert(key, k).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate edge {}-{}", key.0, key.1)));
            }
            adjacency[e.tail].push(Neighbor { vertex: e.head, edge: k, sign: 1.0 });
            adjacency[e.head].push(Neighbor { vertex: e.tail, edge: k, sign: -1.0 });
        }
        for list in adjacency.iter_mut() {
            list.sort_by_key(|nb| nb.vertex);
        }

        let space = GraphSpace {
            measure,
            edges,
            adjacency,
            edge_index,
            spectral: OnceLock::new(),
            edge_distances: OnceLock::new(),
            distances: OnceLock::new(),
        };
        let components = space.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(space)
    }

    /// Uniform cycle of `n` vertices and total length `length`.
    ///
    /// Edges are oriented `i -> i+1 (mod n)`, with `ℓ = h = length/n`,
    /// `m = 1/n` and `w = m/h²`, so that `Γ(f,f) ≈ |f'|²` and `Δf ≈ f''`.
    pub fn cycle(n: usize, length: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("a cycle needs at least 3 vertices, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("cycle length must be positive, got {length}")));
        }
        let h = length / n as f64;
        let m = 1.0 / n as f64;
        let edges = (0..n)
            .map(|i| Edge { tail: i, head: (i + 1) % n, length: h, conductance: m / (h * h) })
            .collect();
        Self::new(vec![m; n], edges)
    }

    /// Uniform path of `n` vertices spanning `length`, same scaling as [`GraphSpace::cycle`].
    pub fn path(n: usize, length: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("a path needs at least 2 vertices, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("path length must be positive, got {length}")));
        }
        let h = length / (n - 1) as f64;
        let m = 1.0 / n as f64;
        let edges = (0..n - 1)
            .map(|i| Edge { tail: i, head: i + 1, length: h, conductance: m / (h * h) })
            .collect();
        Self::new(vec![m; n], edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.measure.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[Neighbor] {
        &self.adjacency[x]
    }

    /// Index of the edge joining `x` and `y`, with `+1` if stored as `x -> y`.
    pub fn find_edge(&self, x: usize, y: usize) -> Option<(usize, f64)> {
        let k = *self.edge_index.get(&(x.min(y), x.max(y)))?;
        let sign = if self.edges[k].tail == x { 1.0 } else { -1.0 };
        Some((k, sign))
    }

    pub fn are_adjacent(&self, x: usize, y: usize) -> bool {
        self.edge_index.contains_key(&(x.min(y), x.max(y)))
    }

    pub(crate) fn check_len(&self, f: &ScalarField) -> Result<()> {
        if f.len() != self.vertex_count() {
            return Err(Error::DimensionMismatch { expected: self.vertex_count(), got: f.len() });
        }
        Ok(())
    }

    fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut components = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            components += 1;
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for nb in &self.adjacency[x] {
                    if !seen[nb.vertex] {
                        seen[nb.vertex] = true;
                        queue.push_back(nb.vertex);
                    }
                }
            }
        }
        components
    }

    /// `Σ_x f(x) m(x)`.
    pub fn integrate(&self, f: &ScalarField) -> f64 {
        f.iter().zip(&self.measure).map(|(v, m)| v * m).sum()
    }

    pub fn inner(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        f.iter().zip(g.iter()).zip(&self.measure).map(|((a, b), m)| a * b * m).sum()
    }

    pub fn l2_norm(&self, f: &ScalarField) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Carré du champ `Γ(f,g)`.
    pub fn gamma(&self, f: &ScalarField, g: &ScalarField) -> ScalarField {
        ScalarField::from_fn(self.vertex_count(), |x, _| {
            let s: f64 = self.adjacency[x]
                .iter()
                .map(|nb| {
                    let w = self.edges[nb.edge].conductance;
                    w * (f[nb.vertex] - f[x]) * (g[nb.vertex] - g[x])
                })
                .sum();
            s / (2.0 * self.measure[x])
        })
    }

    /// Energy `Σ_x Γ(f,f)(x) m(x)`, i.e. twice the Cheeger energy.
    pub fn energy(&self, f: &ScalarField) -> f64 {
        self.integrate(&self.gamma(f, f))
    }

    /// Norm of the energy space: `(‖f‖²_{L²} + Σ Γ(f,f) m)^{1/2}`.
    pub fn energy_norm(&self, f: &ScalarField) -> f64 {
        (self.inner(f, f) + self.energy(f)).sqrt()
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        ScalarField::from_fn(self.vertex_count(), |x, _| {
            let s: f64 = self.adjacency[x]
                .iter()
                .map(|nb| self.edges[nb.edge].conductance * (f[nb.vertex] - f[x]))
                .sum();
            s / self.measure[x]
        })
    }

    /// Dense matrix of `Δ` (rows scaled by `1/m`).
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let mut l = self.stiffness_matrix();
        for x in 0..self.vertex_count() {
            let inv = 1.0 / self.measure[x];
            l.row_mut(x).scale_mut(inv);
        }
        l
    }

    /// Symmetric matrix `MΔ`: off-diagonal `w(xy)`, diagonal `-Σ_y w(xy)`.
    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        let n = self.vertex_count();
        let mut l = DMatrix::zeros(n, n);
        for e in &self.edges {
            let w = e.conductance;
            l[(e.tail, e.head)] += w;
            l[(e.head, e.tail)] += w;
            l[(e.tail, e.tail)] -= w;
            l[(e.head, e.head)] -= w;
        }
        l
    }

    /// Cached eigendecomposition of `Δ`.
    pub fn spectral(&self) -> &Spectral {
        self.spectral.get_or_init(|| {
            let n = self.vertex_count();
            let sqrt_m = DVector::from_iterator(n, self.measure.iter().map(|m| m.sqrt()));
            let mut s = self.stiffness_matrix();
            for i in 0..n {
                for j in 0..n {
                    s[(i, j)] /= sqrt_m[i] * sqrt_m[j];
                }
            }
            let eig = SymmetricEigen::new(s);
            // Clamp the rounding noise around the zero mode.
            let eigenvalues = eig.eigenvalues.map(|l| l.min(0.0));
            let basis_t = eig.eigenvectors.transpose();
            Spectral { eigenvalues, basis: eig.eigenvectors, basis_t, sqrt_m }
        })
    }

    /// Upper bound on `|λ|` for eigenvalues of `Δ` (Gershgorin).
    pub fn spectral_radius_bound(&self) -> f64 {
        (0..self.vertex_count())
            .map(|x| {
                2.0 * self.adjacency[x].iter().map(|nb| self.edges[nb.edge].conductance).sum::<f64>()
                    / self.measure[x]
            })
            .fold(0.0, f64::max)
    }

    /// Forward heat flow `exp((τ/2β) Δ) f` over a duration `τ >= 0`.
    pub fn heat_flow(&self, f: &ScalarField, tau: f64, beta: f64, backend: HeatBackend) -> Result<ScalarField> {
        self.check_len(f)?;
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("heat flow duration must be >= 0, got {tau}")));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if tau == 0.0 {
            return Ok(f.clone());
        }
        match backend {
            HeatBackend::Spectral => {
                let sp = self.spectral();
                let c = sp.to_modes(f).component_mul(&sp.heat_multipliers(tau, beta));
                Ok(sp.from_modes(&c))
            }
            HeatBackend::ImplicitEuler { substeps } => {
                let eta = substeps.unwrap_or_else(|| self.implicit_euler_substeps(tau, beta, 1e-8));
                let eta = eta.max(1);
                let dt = tau / eta as f64;
                let n = self.vertex_count();
                let a = DMatrix::identity(n, n) - self.laplacian_matrix() * (dt / (2.0 * beta));
                let lu = a.lu();
                let mut g = f.clone();
                for _ in 0..eta {
                    g = lu
                        .solve(&g)
                        .ok_or_else(|| Error::Singular("implicit Euler heat step".into()))?;
                }
                Ok(g)
            }
        }
    }

    /// Smallest substep count whose implicit-Euler error is below `tol` for every
    /// mode up to the Gershgorin bound, capped at `MAX_SUBSTEPS`.
    pub fn implicit_euler_substeps(&self, tau: f64, beta: f64, tol: f64) -> usize {
        const MAX_SUBSTEPS: usize = 1 << 17;
        let x_max = self.spectral_radius_bound() * tau / (2.0 * beta);
        let samples: Vec<f64> = (0..=400)
            .map(|i| x_max * (i as f64 / 400.0).powi(2))
            .collect();
        let err = |eta: usize| {
            samples
                .iter()
                .map(|&x| ((-x).exp() - (1.0 + x / eta as f64).powf(-(eta as f64))).abs())
                .fold(0.0, f64::max)
        };
        let mut eta = 1;
        while eta < MAX_SUBSTEPS && err(eta) > tol {
            eta *= 2;
        }
        if eta >= MAX_SUBSTEPS {
            log::warn!("implicit Euler heat flow capped at {MAX_SUBSTEPS} substeps (bound {:e})", err(eta));
        }
        eta
    }

    pub fn v_norms(&self, f: &ScalarField) -> VNorms {
        let linf = f.amax();
        let g = self.gamma(f, f).amax();
        let d = self.laplacian(f).amax();
        let v1sq = linf * linf + g;
        VNorms { linf, v1: v1sq.sqrt(), v2: (v1sq + d * d).sqrt() }
    }

    /// Metric distance between the endpoints of each edge (at most its length).
    pub fn edge_distances(&self) -> &[f64] {
        self.edge_distances.get_or_init(|| {
            self.edges
                .iter()
                .map(|e| self.bounded_dijkstra(e.tail, e.head, e.length))
                .collect()
        })
    }

    /// Metric distance `d(x,y)` for adjacent vertices, `None` otherwise.
    pub fn neighbor_distance(&self, x: usize, y: usize) -> Option<f64> {
        if x == y {
            return Some(0.0);
        }
        self.find_edge(x, y).map(|(k, _)| self.edge_distances()[k])
    }

    fn bounded_dijkstra(&self, source: usize, target: usize, bound: f64) -> f64 {
        let dist = self.dijkstra(source, Some(bound));
        dist[target].min(bound)
    }

    /// Shortest-path distances from `source`; with a bound, exploration stops past it.
    pub fn dijkstra(&self, source: usize, bound: Option<f64>) -> Vec<f64> {
        use std::cmp::Ordering;
        use std::collections::BinaryHeap;

        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
            }
        }

        let n = self.vertex_count();
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::from([Item(0.0, source)]);
        while let Some(Item(d, x)) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            if bound.is_some_and(|b| d > b) {
                break;
            }
            for nb in &self.adjacency[x] {
                let nd = d + self.edges[nb.edge].length;
                if nd < dist[nb.vertex] {
                    dist[nb.vertex] = nd;
                    heap.push(Item(nd, nb.vertex));
                }
            }
        }
        dist
    }

    /// Vertices of a shortest walk from `source` to `target`, both included.
    pub fn shortest_path(&self, source: usize, target: usize) -> Vec<usize> {
        let dist = self.dijkstra(source, None);
        let mut path = vec![target];
        let mut x = target;
        while x != source {
            x = self.adjacency[x]
                .iter()
                .map(|nb| (dist[nb.vertex] + self.edges[nb.edge].length, nb.vertex))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, y)| y)
                .expect("connected graph");
            path.push(x);
        }
        path.reverse();
        path
    }

    /// All-pairs distance matrix (cached; intended for small graphs).
    pub fn distance_matrix(&self) -> &DMatrix<f64> {
        self.distances.get_or_init(|| {
            let n = self.vertex_count();
            let mut d = DMatrix::zeros(n, n);
            for x in 0..n {
                for (y, v) in self.dijkstra(x, None).into_iter().enumerate() {
                    d[(x, y)] = v;
                }
            }
            d
        })
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.distance_matrix()[(x, y)]
    }

    /// Empirical constant in `‖P_τ f‖_{energy} <= C τ^{-1/2} ‖f‖_{L²}`:
    /// the largest `√τ ‖P_τ f‖_{energy} / ‖f‖_{L²}` over `probes` random fields.
    pub fn smoothing_constant<R: Rng>(&self, tau: f64, beta: f64, probes: usize, rng: &mut R) -> Result<f64> {
        let n = self.vertex_count();
        let mut best = 0.0_f64;
        for _ in 0..probes {
            let f = ScalarField::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let p = self.heat_flow(&f, tau, beta, HeatBackend::Spectral)?;
            best = best.max(tau.sqrt() * self.energy_norm(&p) / self.l2_norm(&f));
        }
        Ok(best)
    }

    /// `‖Δη(f) - η'(f)Δf - η''(f)Γ(f,f)‖_{L∞}`: the defect of the continuum
    /// chain rule, which vanishes only in the mesh limit.
    pub fn chain_rule_defect(
        &self,
        f: &ScalarField,
        eta: impl Fn(f64) -> f64,
        d_eta: impl Fn(f64) -> f64,
        dd_eta: impl Fn(f64) -> f64,
    ) -> f64 {
        let lhs = self.laplacian(&f.map(&eta));
        let lf = self.laplacian(f);
        let gf = self.gamma(f, f);
        (0..self.vertex_count())
            .map(|x| (lhs[x] - d_eta(f[x]) * lf[x] - dd_eta(f[x]) * gf[x]).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinates of the vertices of a builtin cycle or path, `x_i = i·h`.
    pub fn uniform_coordinates(&self) -> Vec<f64> {
        let mut coords = vec![0.0; self.vertex_count()];
        for x in 1..self.vertex_count() {
            coords[x] = coords[x - 1]
                + self
                    .find_edge(x - 1, x)
                    .map(|(k, _)| self.edges[k].length)
                    .unwrap_or(0.0);
        }
        coords
    }
}
