//! Brute-force oracles and synthetic shape generators shared by the
//! integration tests.

#![allow(dead_code)]

use lgw_core::ingest::{raster_to_space, GrayImage};
use lgw_core::{MmSpace, TransportPlan};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3, ArrayView2};
use rand::Rng;

pub fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// All vertices of the transportation polytope with marginals `mu`, `nu`:
/// every nonsingular choice of `r + c - 1` cells whose basic solution is
/// nonnegative.
pub fn transport_vertices(mu: &[f64], nu: &[f64]) -> Vec<Array2<f64>> {
    let (r, c) = (mu.len(), nu.len());
    let k = r + c - 1;
    let mut out: Vec<Array2<f64>> = Vec::new();
    for cells in combinations(r * c, k) {
        // Row sums, then the first c - 1 column sums (the last is implied).
        let a = DMatrix::from_fn(k, k, |eq, var| {
            let (i, j) = (cells[var] / c, cells[var] % c);
            if eq < r {
                (i == eq) as u8 as f64
            } else {
                (j == eq - r) as u8 as f64
            }
        });
        let b = DVector::from_iterator(k, mu.iter().chain(&nu[..c - 1]).copied());
        let Some(x) = a.lu().solve(&b) else { continue };
        if x.iter().any(|v| *v < -1e-12 || !v.is_finite()) {
            continue;
        }
        let mut plan = Array2::zeros((r, c));
        for (var, &cell) in cells.iter().enumerate() {
            plan[[cell / c, cell % c]] = x[var].max(0.0);
        }
        let col_ok = (0..c).all(|j| (plan.column(j).sum() - nu[j]).abs() < 1e-9);
        if col_ok && !out.iter().any(|v| (v - &plan).mapv(f64::abs).sum() < 1e-12) {
            out.push(plan);
        }
    }
    out
}

/// Minimum of `<cost, pi>` over the vertices of the transportation polytope.
pub fn ot_by_enumeration(cost: &Array2<f64>, mu: &[f64], nu: &[f64]) -> f64 {
    transport_vertices(mu, nu)
        .iter()
        .map(|v| (v * cost).sum())
        .fold(f64::INFINITY, f64::min)
}

/// `sum_{i,j,k,l} (dx[i,k] - dy[j,l])^2 pi[i,j] pi[k,l]` by four loops.
pub fn gw_naive(dx: ArrayView2<f64>, dy: ArrayView2<f64>, pi: ArrayView2<f64>) -> f64 {
    let (n, m) = pi.dim();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            for k in 0..n {
                for l in 0..m {
                    let d = dx[[i, k]] - dy[[j, l]];
                    total += d * d * pi[[i, j]] * pi[[k, l]];
                }
            }
        }
    }
    total
}

/// All-pairs shortest paths; unreachable pairs stay infinite.
pub fn floyd_warshall(v: usize, edges: &[(usize, usize, f64)]) -> Array2<f64> {
    let mut fw = Array2::from_elem((v, v), f64::INFINITY);
    for i in 0..v {
        fw[[i, i]] = 0.0;
    }
    for &(a, b, w) in edges {
        fw[[a, b]] = fw[[a, b]].min(w);
        fw[[b, a]] = fw[[b, a]].min(w);
    }
    for k in 0..v {
        for i in 0..v {
            for j in 0..v {
                let via = fw[[i, k]] + fw[[k, j]];
                if via < fw[[i, j]] {
                    fw[[i, j]] = via;
                }
            }
        }
    }
    fw
}

/// Random graph on `v` vertices with edge lengths that are multiples of
/// 1/8, so that path sums are exact in floating point.
pub fn dyadic_graph(rng: &mut impl Rng, v: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for a in 0..v {
        for b in (a + 1)..v {
            if rng.gen_bool(density) {
                edges.push((a, b, rng.gen_range(1..=24) as f64 / 8.0));
            }
        }
    }
    edges
}

pub fn pairwise(points: &Array2<f64>) -> Array2<f64> {
    lgw_core::measure::euclidean_distances(points.view(), points.view())
}

pub const GRID: usize = 20;

/// Filled ellipse with semi-axes `a`, `b`, rotated by `theta` around
/// `(cx, cy)`, rasterized on the 20x20 grid.
pub fn ellipse_image(a: f64, b: f64, theta: f64, cx: f64, cy: f64) -> GrayImage {
    let (s, c) = theta.sin_cos();
    GrayImage::from_fn(GRID, GRID, |row, col| {
        let (x, y) = (col as f64 + 0.5 - cx, row as f64 + 0.5 - cy);
        let (u, v) = (c * x + s * y, -s * x + c * y);
        if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
            1.0
        } else {
            0.0
        }
    })
    .expect("valid raster")
}

/// Plus-shaped cross with arm half-length `len` and half-width `half`.
pub fn cross_image(len: f64, half: f64, theta: f64, cx: f64, cy: f64) -> GrayImage {
    let (s, c) = theta.sin_cos();
    GrayImage::from_fn(GRID, GRID, |row, col| {
        let (x, y) = (col as f64 + 0.5 - cx, row as f64 + 0.5 - cy);
        let (u, v) = (c * x + s * y, -s * x + c * y);
        let horizontal = u.abs() <= len && v.abs() <= half;
        let vertical = v.abs() <= len && u.abs() <= half;
        if horizontal || vertical {
            1.0
        } else {
            0.0
        }
    })
    .expect("valid raster")
}

/// Uniform space on the bright pixels, thinned to at most `cap` points.
pub fn image_space(id: &str, image: &GrayImage, cap: usize, seed: u64) -> MmSpace {
    let count = image.bright_pixels(0.5).nrows();
    raster_to_space(id, image, 0.5, count.min(cap), seed).expect("shape has pixels")
}

/// Row-stochastic random plan with row marginal `sigma` and dense support.
pub fn random_plan(rng: &mut impl Rng, sigma: &[f64], m: usize) -> TransportPlan {
    let mut matrix = Array2::zeros((sigma.len(), m));
    for (i, &s) in sigma.iter().enumerate() {
        let row = simplex(rng, m);
        for j in 0..m {
            matrix[[i, j]] = s * row[j];
        }
    }
    let col = matrix.sum_axis(ndarray::Axis(0)).to_vec();
    TransportPlan::new(matrix, sigma.to_vec(), col)
}

/// Dense LP over all `n*m*k` 3-plan entries with squared-Euclidean cost.
pub fn w_sigma_by_lp(a: &TransportPlan, b: &TransportPlan, px: &Array2<f64>, py: &Array2<f64>) -> f64 {
    let (n, m, k) = (a.rows(), a.cols(), b.cols());
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Array3::from_elem((n, m, k), None);
    for i in 0..n {
        for j in 0..m {
            for l in 0..k {
                let d2: f64 = (0..px.ncols()).map(|t| (px[[j, t]] - py[[l, t]]).powi(2)).sum();
                vars[[i, j, l]] = Some(lp.add_var(d2, (0.0, f64::INFINITY)));
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            let terms: Vec<_> = (0..k).map(|l| (vars[[i, j, l]].unwrap(), 1.0)).collect();
            lp.add_constraint(&terms, ComparisonOp::Eq, a.matrix()[[i, j]]);
        }
        for l in 0..k {
            let terms: Vec<_> = (0..m).map(|j| (vars[[i, j, l]].unwrap(), 1.0)).collect();
            lp.add_constraint(&terms, ComparisonOp::Eq, b.matrix()[[i, l]]);
        }
    }
    lp.solve().unwrap().objective()
}
