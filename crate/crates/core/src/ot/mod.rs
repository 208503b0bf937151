//! Exact discrete optimal transport, barycentric projections and the
//! linear (fixed-reference) OT quantities built on them.

mod simplex;

use ndarray::{Array2, Array3, ArrayView2, Axis};

pub use simplex::Basis;

use crate::error::{Error, Result};
use crate::measure::{max_abs_diff, squared_euclidean, ThreePlan, TransportPlan, MARGINAL_TOL};

/// An optimal plan and its objective.
#[derive(Clone, Debug)]
pub struct OtResult {
    pub plan: TransportPlan,
    /// `sum_ij c_ij pi_ij`.
    pub cost: f64,
    /// Square root of `cost`.
    pub distance: f64,
}

/// Solves the transportation problem exactly. The returned plan is an
/// optimal vertex with at most `n + m - 1` nonzero entries.
pub fn solve_ot(cost: ArrayView2<f64>, mu: &[f64], nu: &[f64]) -> Result<OtResult> {
    solve_ot_warm(cost, mu, nu, None).map(|(r, _)| r)
}

/// Like [`solve_ot`] but starts from `warm` when it is a feasible basis for
/// these marginals, and returns the final basis for the next call.
pub fn solve_ot_warm(
    cost: ArrayView2<f64>,
    mu: &[f64],
    nu: &[f64],
    warm: Option<&Basis>,
) -> Result<(OtResult, Basis)> {
    let (n, m) = cost.dim();
    if n != mu.len() || m != nu.len() || n == 0 || m == 0 {
        return Err(Error::DimensionMismatch(format!(
            "cost is {n}x{m}, measures have {} and {} atoms",
            mu.len(),
            nu.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Validation("cost matrix must be finite".into()));
    }
    if mu.iter().chain(nu).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Validation("weights must be finite and nonnegative".into()));
    }
    let (mass_mu, mass_nu) = (mu.iter().sum::<f64>(), nu.iter().sum::<f64>());
    let difference = (mass_mu - mass_nu).abs();
    if difference > MARGINAL_TOL {
        return Err(Error::Infeasible { difference });
    }
    let demand: Vec<f64> = if difference == 0.0 {
        nu.to_vec()
    } else {
        nu.iter().map(|w| w * mass_mu / mass_nu).collect()
    };

    let flat: Vec<f64> = match cost.as_slice() {
        Some(s) => s.to_vec(),
        None => cost.iter().copied().collect(),
    };
    let solution = simplex::solve(&flat, mu, &demand, warm);
    log::trace!("transport simplex on {n}x{m}: {} pivots", solution.pivots);

    let mut matrix = Array2::zeros((n, m));
    let mut objective = 0.0;
    for &(i, j, x) in &solution.flows {
        matrix[[i, j]] = x;
        objective += flat[i * m + j] * x;
    }
    let plan = TransportPlan::new(matrix, mu.to_vec(), demand);
    Ok((
        OtResult {
            plan,
            cost: objective,
            distance: objective.max(0.0).sqrt(),
        },
        solution.basis,
    ))
}

/// Squared-Euclidean OT between two weighted point clouds.
pub fn wasserstein(
    points_a: ArrayView2<f64>,
    mu: &[f64],
    points_b: ArrayView2<f64>,
    nu: &[f64],
) -> Result<OtResult> {
    if points_a.ncols() != points_b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "point dimensions {} and {}",
            points_a.ncols(),
            points_b.ncols()
        )));
    }
    solve_ot(squared_euclidean(points_a, points_b).view(), mu, nu)
}

/// Per-reference-atom image of a barycentric projection.
#[derive(Clone, Debug, PartialEq)]
pub enum BarycentricMap {
    /// Ambient coordinates, one row per reference atom.
    Euclidean(Array2<f64>),
    /// Indices into the target support.
    Metric(Vec<usize>),
}

impl BarycentricMap {
    pub fn len(&self) -> usize {
        match self {
            BarycentricMap::Euclidean(p) => p.nrows(),
            BarycentricMap::Metric(idx) => idx.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn check_rows_positive(plan: &TransportPlan) -> Result<()> {
    match plan.row_marginal().iter().position(|&s| s <= 0.0) {
        Some(row) => Err(Error::ZeroRow { row }),
        None => Ok(()),
    }
}

/// Maps reference atom `i` to the conditional mean
/// `(1 / sigma_i) sum_j pi_ij x_j` of the target points.
pub fn euclidean_barycentric_projection(
    plan: &TransportPlan,
    target_points: ArrayView2<f64>,
) -> Result<BarycentricMap> {
    if target_points.nrows() != plan.cols() {
        return Err(Error::DimensionMismatch(format!(
            "plan has {} columns, {} target points",
            plan.cols(),
            target_points.nrows()
        )));
    }
    check_rows_positive(plan)?;
    let mut images = plan.matrix().dot(&target_points);
    for (mut row, &sigma) in images.axis_iter_mut(Axis(0)).zip(plan.row_marginal()) {
        row.mapv_inplace(|x| x / sigma);
    }
    Ok(BarycentricMap::Euclidean(images))
}

/// Generalized LOT between two Euclidean maps from the same reference:
/// `( sum_i sigma_i |T_a(s_i) - T_b(s_i)|^2 )^(1/2)`.
pub fn glot(ref_weights: &[f64], map_a: &BarycentricMap, map_b: &BarycentricMap) -> Result<f64> {
    let (BarycentricMap::Euclidean(a), BarycentricMap::Euclidean(b)) = (map_a, map_b) else {
        return Err(Error::DimensionMismatch(
            "gLOT needs Euclidean barycentric maps".into(),
        ));
    };
    if a.dim() != b.dim() || a.nrows() != ref_weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "maps {:?} and {:?} over {} reference atoms",
            a.dim(),
            b.dim(),
            ref_weights.len()
        )));
    }
    let total: f64 = ref_weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let d2: f64 = a
                .row(i)
                .iter()
                .zip(b.row(i).iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            w * d2
        })
        .sum();
    Ok(total.sqrt())
}

/// Conditional row `plan[i, .] / sigma_i` restricted to its support.
pub(crate) fn conditional_row(plan: &TransportPlan, i: usize) -> (Vec<usize>, Vec<f64>) {
    let matrix = plan.matrix();
    let row = matrix.row(i);
    let mass: f64 = row.sum();
    row.iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(j, &x)| (j, x / mass))
        .unzip()
}

pub(crate) fn check_shared_reference(plan_a: &TransportPlan, plan_b: &TransportPlan) -> Result<()> {
    if plan_a.rows() != plan_b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "plans have {} and {} reference atoms",
            plan_a.rows(),
            plan_b.rows()
        )));
    }
    plan_a.validate()?;
    plan_b.validate()?;
    let deviation = max_abs_diff(plan_a.row_marginal(), plan_b.row_marginal());
    if deviation > MARGINAL_TOL {
        return Err(Error::Marginal {
            max_violation: deviation,
        });
    }
    Ok(())
}

/// Minimizes `sum_ijk |x_j - y_k|^2 pi_ijk` over 3-plans gluing `plan_a`
/// and `plan_b` along the reference. The constraints decouple over the
/// reference index, so this is one transportation problem per atom.
/// Returns the optimal 3-plan and the square root of its objective.
pub fn w_sigma_lp(
    plan_a: &TransportPlan,
    plan_b: &TransportPlan,
    points_x: ArrayView2<f64>,
    points_y: ArrayView2<f64>,
) -> Result<(ThreePlan, f64)> {
    check_shared_reference(plan_a, plan_b)?;
    if points_x.nrows() != plan_a.cols()
        || points_y.nrows() != plan_b.cols()
        || points_x.ncols() != points_y.ncols()
    {
        return Err(Error::DimensionMismatch(
            "target points do not match the plans".into(),
        ));
    }
    let (n, m, k) = (plan_a.rows(), plan_a.cols(), plan_b.cols());
    let cost = squared_euclidean(points_x, points_y);
    let mut tensor = Array3::zeros((n, m, k));
    let mut objective = 0.0;
    for i in 0..n {
        let sigma = plan_a.row_marginal()[i];
        if sigma <= 0.0 {
            continue;
        }
        let (sx, wx) = conditional_row(plan_a, i);
        let (sy, wy) = conditional_row(plan_b, i);
        let sub = cost.select(Axis(0), &sx).select(Axis(1), &sy);
        let result = solve_ot(sub.view(), &wx, &wy)?;
        objective += sigma * result.cost;
        for ((a, b), &x) in result.plan.matrix().indexed_iter() {
            if x > 0.0 {
                tensor[[i, sx[a], sy[b]]] = sigma * x;
            }
        }
    }
    let three = ThreePlan::new(tensor, plan_a.matrix().to_owned(), plan_b.matrix().to_owned());
    Ok((three, objective.max(0.0).sqrt()))
}
