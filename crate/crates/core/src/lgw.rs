//! Linear Gromov–Wasserstein machinery against a fixed reference space:
//! generalized barycentric projection, gLGW, the 3-plan relaxation and
//! the bound checks relating it to GW.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gw::{self, frobenius, quadratic_step, GwConfig, GwProblem, InitSpec};
use crate::measure::{MmSpace, ThreePlan, TransportPlan};
use crate::ot::{self, check_rows_positive, check_shared_reference, BarycentricMap, Basis};
use crate::rng;

/// Maps each reference atom `i` to the target index minimizing
/// `sum_j pi_ij d(x, x_j)^2`. Ties go to the lowest index.
pub fn generalized_barycentric_projection(
    plan: &TransportPlan,
    target_metric: ArrayView2<f64>,
) -> Result<BarycentricMap> {
    let m = plan.cols();
    if target_metric.dim() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "plan has {m} columns, target metric is {:?}",
            target_metric.dim()
        )));
    }
    check_rows_positive(plan)?;
    let squared = target_metric.mapv(|d| d * d);
    // scores[i, x] = sum_j pi_ij d^2(x_j, x)
    let scores = plan.matrix().dot(&squared);
    let map = scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (x, &score) in row.iter().enumerate().skip(1) {
                let incumbent = row[best];
                if score < incumbent - 1e-12 * incumbent.abs().max(1.0) {
                    best = x;
                }
            }
            best
        })
        .collect();
    Ok(BarycentricMap::Metric(map))
}

/// A target space pulled back to the reference support through the
/// generalized barycentric projection of a fixed GW plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LgwEmbedding {
    pub ref_id: String,
    pub target_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_label: Option<String>,
    /// Reference weights, so that stored embeddings are self-contained.
    pub ref_weights: Vec<f64>,
    pub map: Vec<usize>,
    /// `d_X(map(i), map(j))`.
    #[serde(with = "matrix_rows")]
    pub embedded_metric: Array2<f64>,
    /// GW objective of the plan the map was built from.
    pub plan_cost: f64,
}

mod matrix_rows {
    use ndarray::Array2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let w = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != w) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(Array2::from_shape_fn((n, w), |(i, j)| rows[i][j]))
    }
}

impl LgwEmbedding {
    /// Tabulates `d_target(map(i), map(j))` for a given map.
    pub fn from_map(
        reference: &MmSpace,
        target: &MmSpace,
        map: Vec<usize>,
        plan_cost: f64,
    ) -> Result<Self> {
        if map.len() != reference.len() || map.iter().any(|&x| x >= target.len()) {
            return Err(Error::DimensionMismatch(
                "map does not send the reference into the target".into(),
            ));
        }
        let d = target.metric();
        let embedded_metric = Array2::from_shape_fn((map.len(), map.len()), |(i, j)| d[[map[i], map[j]]]);
        Ok(LgwEmbedding {
            ref_id: reference.id().to_owned(),
            target_id: target.id().to_owned(),
            target_label: target.label().map(str::to_owned),
            ref_weights: reference.weights().to_vec(),
            map,
            embedded_metric,
            plan_cost,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("embedding serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let emb: LgwEmbedding = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        let n = emb.ref_weights.len();
        if emb.map.len() != n || emb.embedded_metric.dim() != (n, n) {
            return Err(Error::parse(path, "embedding sizes disagree with the reference"));
        }
        Ok(emb)
    }
}

/// Solves GW from the reference to `target` and embeds the target through
/// the generalized barycentric projection of the returned plan.
pub fn embed(reference: &MmSpace, target: &MmSpace, config: &GwConfig) -> Result<LgwEmbedding> {
    let result = gw::solve_gw(reference, target, config)?;
    embed_with_plan(reference, target, &result.plan, result.cost)
}

/// Embedding from an already fixed plan.
pub fn embed_with_plan(
    reference: &MmSpace,
    target: &MmSpace,
    plan: &TransportPlan,
    plan_cost: f64,
) -> Result<LgwEmbedding> {
    let BarycentricMap::Metric(map) = generalized_barycentric_projection(plan, target.metric())? else {
        unreachable!("metric projection yields index maps")
    };
    LgwEmbedding::from_map(reference, target, map, plan_cost)
}

/// `( sum_ij sigma_i sigma_j (A_ij - B_ij)^2 )^(1/2)` over the embedded metrics.
pub fn glgw(ref_weights: &[f64], emb_a: &LgwEmbedding, emb_b: &LgwEmbedding) -> Result<f64> {
    if emb_a.ref_id != emb_b.ref_id {
        return Err(Error::RefMismatch(emb_a.ref_id.clone(), emb_b.ref_id.clone()));
    }
    let n = ref_weights.len();
    if emb_a.embedded_metric.dim() != (n, n) || emb_b.embedded_metric.dim() != (n, n) {
        return Err(Error::RefMismatch(
            format!("{} ({} atoms)", emb_a.ref_id, emb_a.embedded_metric.nrows()),
            format!("{} ({} atoms)", emb_b.ref_id, emb_b.embedded_metric.nrows()),
        ));
    }
    let (a, b) = (&emb_a.embedded_metric, &emb_b.embedded_metric);
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let diff = a[[i, j]] - b[[i, j]];
            row += ref_weights[j] * diff * diff;
        }
        total += ref_weights[i] * row;
    }
    Ok(total.sqrt())
}

/// The 3-plan whose conditional couplings given each reference atom are
/// independent: `pi_ijk = a_ij b_ik / sigma_i`.
pub fn independent_glue(plan_a: &TransportPlan, plan_b: &TransportPlan) -> Result<ThreePlan> {
    check_shared_reference(plan_a, plan_b)?;
    let (n, m, k) = (plan_a.rows(), plan_a.cols(), plan_b.cols());
    let (a, b) = (plan_a.matrix(), plan_b.matrix());
    let tensor = Array3::from_shape_fn((n, m, k), |(i, j, l)| {
        let sigma = plan_a.row_marginal()[i];
        if sigma > 0.0 {
            a[[i, j]] * b[[i, l]] / sigma
        } else {
            0.0
        }
    });
    Ok(ThreePlan::new(tensor, a.to_owned(), b.to_owned()))
}

/// `sum (dX[j,j'] - dY[k,k'])^2 pi_ijk pi_i'j'k'`. The integrand ignores the
/// reference coordinate, so this is the GW objective of the `(X,Y)` marginal.
pub fn three_plan_objective(
    three: &ThreePlan,
    metric_x: ArrayView2<f64>,
    metric_y: ArrayView2<f64>,
) -> f64 {
    let p23 = three.p23();
    let mu = p23.sum_axis(Axis(1)).to_vec();
    let nu = p23.sum_axis(Axis(0)).to_vec();
    GwProblem::new(metric_x, metric_y, &mu, &nu)
        .objective(&p23)
        .max(0.0)
}

struct Conditional {
    sigma: f64,
    support_x: Vec<usize>,
    weights_x: Vec<f64>,
    support_y: Vec<usize>,
    weights_y: Vec<f64>,
}

fn conditionals(plan_a: &TransportPlan, plan_b: &TransportPlan) -> Vec<Conditional> {
    (0..plan_a.rows())
        .map(|i| {
            let (support_x, weights_x) = ot::conditional_row(plan_a, i);
            let (support_y, weights_y) = ot::conditional_row(plan_b, i);
            Conditional {
                sigma: plan_a.row_marginal()[i],
                support_x,
                weights_x,
                support_y,
                weights_y,
            }
        })
        .collect()
}

/// Minimizes `sum_i sigma_i <cost, gamma_i>` over conditional couplings.
/// Returns the 3-plan as a tensor.
fn glue_vertex(
    parts: &[Conditional],
    cost: &Array2<f64>,
    bases: &mut [Option<Basis>],
) -> Result<Array3<f64>> {
    let (m, k) = cost.dim();
    let mut tensor = Array3::zeros((parts.len(), m, k));
    for (i, part) in parts.iter().enumerate() {
        if part.sigma <= 0.0 {
            continue;
        }
        let sub = cost
            .select(Axis(0), &part.support_x)
            .select(Axis(1), &part.support_y);
        let (result, basis) =
            ot::solve_ot_warm(sub.view(), &part.weights_x, &part.weights_y, bases[i].as_ref())?;
        bases[i] = Some(basis);
        for ((a, b), &x) in result.plan.matrix().indexed_iter() {
            if x > 0.0 {
                tensor[[i, part.support_x[a], part.support_y[b]]] = part.sigma * x;
            }
        }
    }
    Ok(tensor)
}

struct GlueRun {
    tensor: Array3<f64>,
    cost: f64,
}

fn glue_frank_wolfe(
    problem: &GwProblem<'_>,
    parts: &[Conditional],
    start: Array3<f64>,
    config: &GwConfig,
) -> Result<GlueRun> {
    let mut tensor = start;
    let mut p23 = tensor.sum_axis(Axis(0));
    let mut cross = problem.cross(&p23);
    let mut cost = problem.objective_with(&p23, &cross);
    let mut bases: Vec<Option<Basis>> = vec![None; parts.len()];

    for _ in 0..config.max_iter {
        // The gradient in pi_ijk is the GW gradient at P23, for every i.
        let gradient = cross.mapv(|a| -4.0 * a);
        let vertex = glue_vertex(parts, &gradient, &mut bases)?;
        let vertex_p23 = vertex.sum_axis(Axis(0));
        let direction = &vertex_p23 - &p23;
        let vertex_cross = problem.cross(&vertex_p23);
        let cross_step = &vertex_cross - &cross;
        let a = -2.0 * frobenius(&cross_step, &direction);
        let b = -4.0 * frobenius(&cross, &direction);
        if b >= 0.0 {
            break;
        }
        let t = quadratic_step(a, b);
        if t == 0.0 {
            break;
        }
        tensor *= 1.0 - t;
        tensor.scaled_add(t, &vertex);
        p23.scaled_add(t, &direction);
        cross.scaled_add(t, &cross_step);
        let next = problem.objective_with(&p23, &cross);
        let change = (cost - next).abs() / next.max(1e-16);
        cost = next;
        if change < config.rel_tol {
            break;
        }
    }
    tensor.mapv_inplace(|x| x.max(0.0));
    let p23 = tensor.sum_axis(Axis(0));
    Ok(GlueRun {
        cost: problem.objective(&p23).max(0.0),
        tensor,
    })
}

/// The glue of a plan with itself that couples each conditional diagonally.
fn diagonal_glue(plan: &TransportPlan) -> Array3<f64> {
    let (n, m) = plan.matrix().dim();
    let mut tensor = Array3::zeros((n, m, m));
    for ((i, j), &x) in plan.matrix().indexed_iter() {
        tensor[[i, j, j]] = x;
    }
    tensor
}

/// Frank–Wolfe over 3-plans gluing `plan_a` (reference to X) and `plan_b`
/// (reference to Y). Always starts from the independent glue; `Identity`
/// in `config.inits` adds the diagonal glue (when both plans coincide),
/// `Random` inits and `config.restarts` add random glue vertices. Returns
/// the best 3-plan and the square root of its objective, an upper bound on
/// the 3-plan optimum.
pub fn gw_s_three_plan(
    reference: &MmSpace,
    plan_a: &TransportPlan,
    plan_b: &TransportPlan,
    metric_x: ArrayView2<f64>,
    metric_y: ArrayView2<f64>,
    config: &GwConfig,
) -> Result<(ThreePlan, f64)> {
    config.validate()?;
    check_shared_reference(plan_a, plan_b)?;
    if plan_a.rows() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "reference has {} atoms, plans have {}",
            reference.len(),
            plan_a.rows()
        )));
    }
    if plan_a.row_marginal() != reference.weights() {
        plan_a.check_couples(reference.weights(), plan_a.col_marginal())?;
    }
    let (m, k) = (plan_a.cols(), plan_b.cols());
    if metric_x.dim() != (m, m) || metric_y.dim() != (k, k) {
        return Err(Error::DimensionMismatch(
            "target metrics do not match the plans".into(),
        ));
    }
    let parts = conditionals(plan_a, plan_b);
    let problem = GwProblem::new(metric_x, metric_y, plan_a.col_marginal(), plan_b.col_marginal());

    let mut starts = vec![("independent".to_owned(), independent_glue(plan_a, plan_b)?.tensor().clone())];
    let random_vertex = |seed: u64| -> Result<Array3<f64>> {
        let mut draw = rng::rng(seed);
        let cost = Array2::from_shape_fn((m, k), |_| draw.gen::<f64>());
        glue_vertex(&parts, &cost, &mut vec![None; parts.len()])
    };
    for init in &config.inits {
        match init {
            InitSpec::Identity if plan_a == plan_b => starts.push((init.tag(), diagonal_glue(plan_a))),
            InitSpec::Random(seed) => starts.push((init.tag(), random_vertex(*seed)?)),
            _ => {}
        }
    }
    let stream = rng::substream(config.seed, "glue");
    for r in 0..config.restarts as u64 {
        let seed = rng::indexed(stream, r);
        starts.push((format!("random({seed})"), random_vertex(seed)?));
    }

    let runs: Vec<(String, GlueRun)> = starts
        .into_par_iter()
        .map(|(tag, start)| glue_frank_wolfe(&problem, &parts, start, config).map(|r| (tag, r)))
        .collect::<Result<_>>()?;
    let (_, best) = runs
        .into_iter()
        .min_by(|(ta, a), (tb, b)| a.cost.total_cmp(&b.cost).then_with(|| ta.cmp(tb)))
        .expect("at least one start");
    let three = ThreePlan::new(best.tensor, plan_a.matrix().to_owned(), plan_b.matrix().to_owned());
    Ok((three, best.cost.sqrt()))
}

/// Absolute tolerance for the bound checks, on distances.
pub const BOUND_TOL: f64 = 1e-6;

/// Quantities and slacks of the two testable inequalities
/// `GW(X,Y) <= GW_S(X,Y)` and `GW_S(X,Y) <= GW(S,X) + GW(S,Y)`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub gw_xy: f64,
    pub gw_sx: f64,
    pub gw_sy: f64,
    /// Best 3-plan value found.
    pub gw_s: f64,
    /// Value of the conditionally independent glue.
    pub independent_glue: f64,
    /// `gw_s - gw_xy`; must be >= -tol.
    pub lower_slack: f64,
    /// `gw_sx + gw_sy - independent_glue`; must be >= -tol.
    pub upper_slack: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
    pub violations: usize,
}

pub fn check_lgw_bounds(
    reference: &MmSpace,
    x: &MmSpace,
    y: &MmSpace,
    config: &GwConfig,
) -> Result<BoundReport> {
    let sx = gw::solve_gw(reference, x, config)?;
    let sy = gw::solve_gw(reference, y, config)?;
    let (three, gw_s) = gw_s_three_plan(reference, &sx.plan, &sy.plan, x.metric(), y.metric(), config)?;
    let indep = independent_glue(&sx.plan, &sy.plan)?;
    let independent = three_plan_objective(&indep, x.metric(), y.metric()).sqrt();

    let glue_marginal = TransportPlan::new(three.p23(), x.weights().to_vec(), y.weights().to_vec());
    let mut xy_config = config.clone();
    xy_config.inits.push(InitSpec::plan("p23", glue_marginal));
    let xy = gw::solve_gw(x, y, &xy_config)?;

    let lower_slack = gw_s - xy.distance;
    let upper_slack = sx.distance + sy.distance - independent;
    let lower_holds = lower_slack >= -BOUND_TOL;
    let upper_holds = upper_slack >= -BOUND_TOL && gw_s <= independent + BOUND_TOL;
    Ok(BoundReport {
        gw_xy: xy.distance,
        gw_sx: sx.distance,
        gw_sy: sy.distance,
        gw_s,
        independent_glue: independent,
        lower_slack,
        upper_slack,
        lower_holds,
        upper_holds,
        violations: usize::from(!lower_holds) + usize::from(!upper_holds),
    })
}

/// Embeds every target against one reference, in input order.
pub fn embed_all(reference: &MmSpace, targets: &[MmSpace], config: &GwConfig) -> Result<Vec<LgwEmbedding>> {
    targets
        .par_iter()
        .map(|t| embed(reference, t, config))
        .collect()
}

/// Pairwise gLGW matrix over embeddings that share one reference.
pub fn glgw_matrix(embeddings: &[LgwEmbedding]) -> Result<Array2<f64>> {
    let n = embeddings.len();
    let Some(first) = embeddings.first() else {
        return Ok(Array2::zeros((0, 0)));
    };
    let weights = &first.ref_weights;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| glgw(weights, &embeddings[i], &embeddings[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(out)
}
