//! Exact Wasserstein-1 distances between discrete measures on the joint
//! input/output space, under the mixed cost `|x1 - x2| + |y1 - y2|`.
//!
//! Two exact backends: a shortest-augmenting-path assignment solver for
//! equal-weight empirical measures, and a successive-shortest-path
//! transportation solver for general weights on small supports. Both are
//! exact by design — the stability theorem is an exact inequality, and an
//! approximate (entropic) distance would contaminate the bound checks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, numerical, Result};
use crate::linalg;
use crate::pca::Projection;

/// Ground cost between labeled points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostSpec {
    /// `|x1 - x2| + |y1 - y2|` — the cost defining the joint Wasserstein
    /// distance used by the stability bound.
    MixedXy,
    /// `|x1 - x2|` — inputs only.
    XOnly,
}

impl CostSpec {
    /// Evaluates the ground cost between two labeled points.
    pub fn cost(&self, x1: &[f64], y1: f64, x2: &[f64], y2: f64) -> f64 {
        let dx2: f64 = x1
            .iter()
            .zip(x2.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let dx = dx2.sqrt();
        match self {
            CostSpec::MixedXy => dx + (y1 - y2).abs(),
            CostSpec::XOnly => dx,
        }
    }
}

/// A weighted labeled point cloud: atoms `(x_i, y_i)` with non-negative
/// weights summing to one.
#[derive(Debug, Clone)]
pub struct LabeledMeasure {
    /// Input locations, one row per atom.
    pub xs: DMatrix<f64>,
    /// Output labels, one per atom.
    pub ys: DVector<f64>,
    /// Atom weights; non-negative, summing to 1 within `1e-12`.
    pub weights: DVector<f64>,
}

impl LabeledMeasure {
    /// Builds a measure, validating shapes, finiteness and normalization.
    pub fn new(xs: DMatrix<f64>, ys: DVector<f64>, weights: DVector<f64>) -> Result<Self> {
        let n = xs.nrows();
        if n == 0 {
            return Err(invalid("measure needs at least one atom"));
        }
        if ys.len() != n || weights.len() != n {
            return Err(invalid(format!(
                "{} points but {} labels and {} weights",
                n,
                ys.len(),
                weights.len()
            )));
        }
        if !xs.iter().all(|v| v.is_finite())
            || !ys.iter().all(|v| v.is_finite())
            || !weights.iter().all(|v| v.is_finite())
        {
            return Err(invalid("non-finite entries in labeled measure"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(invalid("negative weight"));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        let weights = weights / total;
        Ok(Self { xs, ys, weights })
    }

    /// Uniform empirical measure on labeled points.
    pub fn uniform(xs: DMatrix<f64>, ys: DVector<f64>) -> Result<Self> {
        let n = xs.nrows();
        if n == 0 {
            return Err(invalid("measure needs at least one atom"));
        }
        let weights = DVector::from_element(n, 1.0 / n as f64);
        Self::new(xs, ys, weights)
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.xs.nrows()
    }

    /// Whether the measure has no atoms (never true once validated).
    pub fn is_empty(&self) -> bool {
        self.xs.nrows() == 0
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.xs.ncols()
    }

    fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&v| (v - w).abs() <= 1e-12)
    }
}

fn cost_matrix(a: &LabeledMeasure, b: &LabeledMeasure, cost: CostSpec) -> Result<DMatrix<f64>> {
    if a.dim() != b.dim() {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (m, n) = (a.len(), b.len());
    let mut c = DMatrix::zeros(m, n);
    for i in 0..m {
        let xi = linalg::row_vec(&a.xs, i);
        for j in 0..n {
            let xj = linalg::row_vec(&b.xs, j);
            c[(i, j)] = cost.cost(&xi, a.ys[i], &xj, b.ys[j]);
        }
    }
    Ok(c)
}

/// Exact solution of the square assignment problem by the shortest
/// augmenting path (Jonker–Volgenant style) method; returns the minimal
/// total cost. O(n^3).
fn solve_assignment(c: &DMatrix<f64>) -> f64 {
    let n = c.nrows();
    // 1-based arrays with a virtual 0 column, classic formulation with
    // dual potentials u (rows) and v (columns).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = c[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=n {
        total += c[(p[j] - 1, j - 1)];
    }
    total
}

/// Wasserstein-1 distance between two equal-size uniform empirical
/// measures: solves the n-by-n assignment problem minimizing the average
/// matched cost over permutations, which is optimal among all couplings by
/// Birkhoff's theorem.
pub fn w1_equal_weight(s1: &LabeledMeasure, s2: &LabeledMeasure, cost: CostSpec) -> Result<f64> {
    if s1.len() != s2.len() {
        return Err(invalid(format!(
            "size mismatch: {} vs {}",
            s1.len(),
            s2.len()
        )));
    }
    if !s1.is_uniform() || !s2.is_uniform() {
        return Err(invalid("equal-weight solver requires uniform weights"));
    }
    let c = cost_matrix(s1, s2, cost)?;
    Ok(solve_assignment(&c) / s1.len() as f64)
}

/// Largest support size accepted by the general-weights solver; larger
/// inputs are refused rather than approximated.
pub const MAX_DISCRETE_ATOMS: usize = 64;

/// Wasserstein-1 distance between two weighted labeled measures: solves
/// the transportation linear program over couplings exactly by successive
/// shortest augmenting paths with Dijkstra and node potentials.
///
/// Supports of more than [`MAX_DISCRETE_ATOMS`] atoms are refused.
pub fn w1_discrete(mu: &LabeledMeasure, nu: &LabeledMeasure, cost: CostSpec) -> Result<f64> {
    let (m, n) = (mu.len(), nu.len());
    if m > MAX_DISCRETE_ATOMS || n > MAX_DISCRETE_ATOMS {
        return Err(invalid(format!(
            "support sizes {m}x{n} exceed the exact-solver limit of {MAX_DISCRETE_ATOMS} atoms"
        )));
    }
    let c = cost_matrix(mu, nu, cost)?;

    // Successive shortest paths on the bipartite transportation graph.
    // Node indexing: 0..m supplies, m..m+n demands, then a super-source
    // and super-sink. Dijkstra runs on reduced costs kept non-negative by
    // the node potentials.
    let source = m + n;
    let sink = m + n + 1;
    let nn = m + n + 2;
    let mut supply: Vec<f64> = mu.weights.iter().copied().collect();
    let mut demand: Vec<f64> = nu.weights.iter().copied().collect();
    let mut flow = DMatrix::<f64>::zeros(m, n);
    let mut pot = vec![0.0f64; nn];
    let mut total_cost = 0.0;
    let mut remaining: f64 = supply.iter().sum();
    let eps = 1e-15;
    let max_iters = 8 * (m + n) * (m + n) + 64;
    let mut iters = 0usize;

    while remaining > eps {
        iters += 1;
        if iters > max_iters {
            return Err(numerical(format!(
                "transportation solver exceeded {max_iters} augmentations (degenerate weights?)"
            )));
        }
        let mut dist = vec![f64::INFINITY; nn];
        let mut prev = vec![usize::MAX; nn];
        let mut done = vec![false; nn];
        dist[source] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nn {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let relax = |v: usize, cost: f64, u: usize, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                let rc = (cost + pot[u] - pot[v]).max(0.0);
                let nd = dist[u] + rc;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                }
            };
            if u == source {
                for i in 0..m {
                    if supply[i] > eps {
                        relax(i, 0.0, u, &mut dist, &mut prev);
                    }
                }
            } else if u < m {
                let i = u;
                for j in 0..n {
                    relax(m + j, c[(i, j)], u, &mut dist, &mut prev);
                }
            } else if u < m + n {
                let j = u - m;
                if demand[j] > eps {
                    relax(sink, 0.0, u, &mut dist, &mut prev);
                }
                for i in 0..m {
                    if flow[(i, j)] > eps {
                        relax(i, -c[(i, j)], u, &mut dist, &mut prev);
                    }
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(numerical(
                "transportation solver found no augmenting path (unbalanced weights?)",
            ));
        }
        for v in 0..nn {
            if dist[v].is_finite() {
                pot[v] += dist[v];
            }
        }
        // Trace the path and find the bottleneck.
        let mut path = Vec::new();
        let mut v = sink;
        while prev[v] != usize::MAX {
            path.push((prev[v], v));
            v = prev[v];
        }
        path.reverse();
        let start = path[0].1; // supply entered from the super-source
        let target = path[path.len() - 1].0; // demand feeding the sink
        let mut bottleneck = supply[start].min(demand[target - m]);
        for &(a, b) in &path {
            if a >= m && a < m + n && b < m {
                // backward arc j -> i carries existing flow[i][j]
                bottleneck = bottleneck.min(flow[(b, a - m)]);
            }
        }
        // Apply the augmentation.
        supply[start] -= bottleneck;
        demand[target - m] -= bottleneck;
        remaining -= bottleneck;
        for &(a, b) in &path {
            if a < m && b >= m && b < m + n {
                flow[(a, b - m)] += bottleneck;
                total_cost += bottleneck * c[(a, b - m)];
            } else if a >= m && a < m + n && b < m {
                flow[(b, a - m)] -= bottleneck;
                total_cost -= bottleneck * c[(b, a - m)];
            }
        }
    }
    Ok(total_cost)
}

/// Exact Wasserstein-1 for uniform equal-size inputs by exhaustive
/// enumeration of all `n!` matchings. Testing oracle; refuses `n > 8`.
pub fn brute_force_w1(s1: &LabeledMeasure, s2: &LabeledMeasure, cost: CostSpec) -> Result<f64> {
    let n = s1.len();
    if n != s2.len() {
        return Err(invalid(format!("size mismatch: {} vs {}", n, s2.len())));
    }
    if n > 8 {
        return Err(invalid(format!("brute force limited to 8 points, got {n}")));
    }
    let c = cost_matrix(s1, s2, cost)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    // Heap's algorithm.
    let mut stack = vec![0usize; n];
    let eval = |perm: &[usize]| -> f64 { perm.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum() };
    best = best.min(eval(&perm));
    let mut i = 1usize;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            best = best.min(eval(&perm));
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    Ok(best / n as f64)
}

/// Upper bound `S * ||P1 - P2||_op` with `S = (1/n) sum |x_i|` on the
/// Wasserstein-1 distance between the projected empirical measures
/// `{(P1 x_i, y_i)}` and `{(P2 x_i, y_i)}` (identical labels, so the
/// identity coupling costs at most `|P1 x_i - P2 x_i| <= ||P1-P2||_op |x_i|`
/// per point).
pub fn perturbation_w1_bound(p1: &Projection, p2: &Projection, xs: &DMatrix<f64>) -> Result<f64> {
    if p1.projector.nrows() != p2.projector.nrows() {
        return Err(invalid(format!(
            "projector dimension mismatch: {} vs {}",
            p1.projector.nrows(),
            p2.projector.nrows()
        )));
    }
    if xs.ncols() != p1.projector.nrows() {
        return Err(invalid(format!(
            "points have dimension {} but projectors act on {}",
            xs.ncols(),
            p1.projector.nrows()
        )));
    }
    let n = xs.nrows();
    if n == 0 {
        return Err(invalid("need at least one point"));
    }
    let s: f64 = (0..n).map(|i| xs.row(i).norm()).sum::<f64>() / n as f64;
    let diff = &p1.projector - &p2.projector;
    Ok(s * linalg::operator_norm(&diff))
}
