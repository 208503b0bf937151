//! Gromov–Wasserstein distance by conditional gradient (Frank–Wolfe) over
//! the coupling polytope, with exact line search and multiple starts.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{max_abs_diff, MmSpace, TransportPlan, MARGINAL_TOL};
use crate::ot::{self, Basis};
use crate::rng;

/// Starting plan for one Frank–Wolfe run.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    /// The independent coupling `mu nu^T`.
    Product,
    /// Optimal squared-Euclidean coupling of the ambient points. Skipped
    /// when either space has no coordinates.
    Wasserstein,
    /// `diag(mu)`. Skipped unless both spaces have the same weights.
    Identity,
    /// Optimal plan for a seeded random `U[0,1)` cost: a random vertex.
    Random(u64),
    /// A caller-supplied feasible plan.
    Plan { tag: String, plan: TransportPlan },
}

impl InitSpec {
    pub fn tag(&self) -> String {
        match self {
            InitSpec::Product => "product".into(),
            InitSpec::Wasserstein => "wasserstein".into(),
            InitSpec::Identity => "identity".into(),
            InitSpec::Random(seed) => format!("random({seed})"),
            InitSpec::Plan { tag, .. } => format!("plan({tag})"),
        }
    }

    pub fn plan(tag: impl Into<String>, plan: TransportPlan) -> Self {
        InitSpec::Plan {
            tag: tag.into(),
            plan,
        }
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// Solver knobs.
#[derive(Clone, Debug)]
pub struct GwConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub inits: Vec<InitSpec>,
    /// Extra random-vertex starts, seeded from `seed`.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GwConfig {
    fn default() -> Self {
        GwConfig {
            max_iter: 1000,
            rel_tol: 1e-9,
            inits: vec![InitSpec::Product, InitSpec::Wasserstein],
            restarts: 5,
            seed: 0,
        }
    }
}

impl GwConfig {
    /// Single start from `init`, no random restarts.
    pub fn single(init: InitSpec) -> Self {
        GwConfig {
            inits: vec![init],
            restarts: 0,
            ..Self::default()
        }
    }

    pub fn with_inits(mut self, inits: Vec<InitSpec>) -> Self {
        self.inits = inits;
        self
    }

    pub fn with_restarts(mut self, restarts: usize, seed: u64) -> Self {
        self.restarts = restarts;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::Config("rel_tol must be positive".into()));
        }
        Ok(())
    }

    /// Explicit inits followed by the seeded random restarts.
    pub fn all_inits(&self) -> Vec<InitSpec> {
        let stream = rng::substream(self.seed, "init");
        self.inits
            .iter()
            .cloned()
            .chain((0..self.restarts as u64).map(|r| InitSpec::Random(rng::indexed(stream, r))))
            .collect()
    }
}

/// Best plan found and its objective.
#[derive(Clone, Debug)]
pub struct GwResult {
    pub plan: TransportPlan,
    /// Quartic objective at `plan` (an upper bound on GW^2).
    pub cost: f64,
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub init_used: String,
    /// Objective before the first step and after every step of the winning run.
    pub trace: Vec<f64>,
}

#[derive(Serialize)]
struct GwSummary<'a> {
    distance: f64,
    cost: f64,
    iterations: usize,
    converged: bool,
    init_used: &'a str,
}

impl GwResult {
    /// `{distance, cost, iterations, converged, init_used}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&GwSummary {
            distance: self.distance,
            cost: self.cost,
            iterations: self.iterations,
            converged: self.converged,
            init_used: &self.init_used,
        })
        .expect("summary serializes")
    }
}

/// Precomputed pieces of the squared-loss decomposition
/// `(a - b)^2 = a^2 + b^2 - 2ab` for one pair of spaces.
pub(crate) struct GwProblem<'a> {
    dx: ArrayView2<'a, f64>,
    dy: ArrayView2<'a, f64>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    /// `(dx o dx) mu`
    cx: Array1<f64>,
    /// `(dy o dy) nu`
    cy: Array1<f64>,
    constant: f64,
}

impl<'a> GwProblem<'a> {
    pub(crate) fn new<'x: 'a, 'y: 'a>(
        dx: ArrayView2<'x, f64>,
        dy: ArrayView2<'y, f64>,
        mu: &[f64],
        nu: &[f64],
    ) -> Self {
        let cx = dx.mapv(|d| d * d).dot(&Array1::from(mu.to_vec()));
        let cy = dy.mapv(|d| d * d).dot(&Array1::from(nu.to_vec()));
        let constant = cx.iter().zip(mu).map(|(c, w)| c * w).sum::<f64>()
            + cy.iter().zip(nu).map(|(c, w)| c * w).sum::<f64>();
        GwProblem {
            dx: dx.reborrow(),
            dy: dy.reborrow(),
            mu: mu.to_vec(),
            nu: nu.to_vec(),
            cx,
            cy,
            constant,
        }
    }

    /// `dx pi dy`.
    pub(crate) fn cross(&self, plan: &Array2<f64>) -> Array2<f64> {
        self.dx.dot(plan).dot(&self.dy)
    }

    /// Objective from a precomputed cross term.
    pub(crate) fn objective_with(&self, plan: &Array2<f64>, cross: &Array2<f64>) -> f64 {
        self.constant - 2.0 * frobenius(cross, plan)
    }

    pub(crate) fn objective(&self, plan: &Array2<f64>) -> f64 {
        self.objective_with(plan, &self.cross(plan))
    }

    /// Gradient `2 (cx 1^T + 1 cy^T - 2 dx pi dy)`.
    fn gradient(&self, cross: &Array2<f64>) -> Array2<f64> {
        let mut g = cross.mapv(|a| -4.0 * a);
        for (i, mut row) in g.rows_mut().into_iter().enumerate() {
            let ci = 2.0 * self.cx[i];
            Zip::from(&mut row).and(&self.cy).for_each(|gij, &cj| *gij += ci + 2.0 * cj);
        }
        g
    }
}

pub(crate) fn frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + x * y)
}

/// Minimizer on `[0, 1]` of `a t^2 + b t`.
pub(crate) fn quadratic_step(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else if a + b < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Outcome of one Frank–Wolfe run.
#[derive(Clone, Debug)]
pub(crate) struct FwRun {
    pub plan: Array2<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

pub(crate) fn frank_wolfe(
    problem: &GwProblem<'_>,
    start: Array2<f64>,
    max_iter: usize,
    rel_tol: f64,
) -> Result<FwRun> {
    let mut plan = start;
    let mut cross = problem.cross(&plan);
    let mut cost = problem.objective_with(&plan, &cross);
    let mut trace = vec![cost];
    let mut basis: Option<Basis> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let gradient = problem.gradient(&cross);
        let (vertex, next_basis) =
            ot::solve_ot_warm(gradient.view(), &problem.mu, &problem.nu, basis.as_ref())?;
        basis = Some(next_basis);
        let vertex = vertex.plan.into_matrix();

        let direction = &vertex - &plan;
        let vertex_cross = problem.cross(&vertex);
        let cross_step = &vertex_cross - &cross;
        // f(plan + t D) - f(plan) = a t^2 + b t on the polytope.
        let a = -2.0 * frobenius(&cross_step, &direction);
        let b = -4.0 * frobenius(&cross, &direction);
        if b >= 0.0 {
            converged = true;
            break;
        }
        let t = quadratic_step(a, b);
        if t == 0.0 {
            converged = true;
            break;
        }
        plan.scaled_add(t, &direction);
        cross.scaled_add(t, &cross_step);
        let next = problem.objective_with(&plan, &cross);
        trace.push(next);
        let change = (cost - next).abs() / next.max(1e-16);
        cost = next;
        if change < rel_tol {
            converged = true;
            break;
        }
    }
    // Tiny negative entries can appear from `plan + t (vertex - plan)`.
    plan.mapv_inplace(|x| x.max(0.0));
    Ok(FwRun {
        cost: problem.objective(&plan).max(0.0),
        plan,
        iterations,
        converged,
        trace,
    })
}

/// `sum (dX[i,i'] - dY[j,j'])^2 pi_ij pi_i'j'`, evaluated in
/// `O(n^2 m + n m^2)` through the squared-loss decomposition.
pub fn gw_objective(space_x: &MmSpace, space_y: &MmSpace, plan: &TransportPlan) -> Result<f64> {
    plan.check_couples(space_x.weights(), space_y.weights())?;
    let problem = GwProblem::new(
        space_x.metric(),
        space_y.metric(),
        space_x.weights(),
        space_y.weights(),
    );
    Ok(problem.objective(&plan.matrix().to_owned()).max(0.0))
}

/// Optimal squared-Euclidean coupling of the ambient coordinates.
pub fn wasserstein_init(space_x: &MmSpace, space_y: &MmSpace) -> Result<TransportPlan> {
    let px = space_x
        .points()
        .ok_or_else(|| Error::NoPoints(space_x.id().to_owned()))?;
    let py = space_y
        .points()
        .ok_or_else(|| Error::NoPoints(space_y.id().to_owned()))?;
    Ok(ot::wasserstein(px, space_x.weights(), py, space_y.weights())?.plan)
}

/// Random vertex of the coupling polytope.
pub fn random_vertex(mu: &[f64], nu: &[f64], seed: u64) -> Result<TransportPlan> {
    let mut r = rng::rng(seed);
    let cost = Array2::from_shape_fn((mu.len(), nu.len()), |_| r.gen::<f64>());
    Ok(ot::solve_ot(cost.view(), mu, nu)?.plan)
}

fn start_plan(init: &InitSpec, x: &MmSpace, y: &MmSpace) -> Result<Option<Array2<f64>>> {
    let (mu, nu) = (x.weights(), y.weights());
    let plan = match init {
        InitSpec::Product => TransportPlan::product(mu, nu),
        InitSpec::Wasserstein => match (x.points(), y.points()) {
            (Some(px), Some(py)) if px.ncols() == py.ncols() => wasserstein_init(x, y)?,
            _ => return Ok(None),
        },
        InitSpec::Identity => {
            if mu.len() != nu.len() || max_abs_diff(mu, nu) > MARGINAL_TOL {
                return Ok(None);
            }
            TransportPlan::diagonal(mu)
        }
        InitSpec::Random(seed) => random_vertex(mu, nu, *seed)?,
        InitSpec::Plan { plan, .. } => {
            plan.check_couples(mu, nu)?;
            plan.clone()
        }
    };
    Ok(Some(plan.into_matrix()))
}

/// Runs Frank–Wolfe from every configured start and keeps the lowest
/// objective (ties: lexicographically smallest init tag).
pub fn solve_gw(space_x: &MmSpace, space_y: &MmSpace, config: &GwConfig) -> Result<GwResult> {
    config.validate()?;
    let problem = GwProblem::new(
        space_x.metric(),
        space_y.metric(),
        space_x.weights(),
        space_y.weights(),
    );
    let mut inits = config.all_inits();
    let mut starts = Vec::with_capacity(inits.len());
    for init in &inits {
        match start_plan(init, space_x, space_y)? {
            Some(plan) => starts.push((init.tag(), plan)),
            None => log::debug!("init {init} not applicable to {} vs {}", space_x.id(), space_y.id()),
        }
    }
    if starts.is_empty() {
        inits = vec![InitSpec::Product];
        starts.push((
            inits[0].tag(),
            TransportPlan::product(space_x.weights(), space_y.weights()).into_matrix(),
        ));
    }

    let runs: Vec<(String, FwRun)> = starts
        .into_par_iter()
        .map(|(tag, start)| {
            frank_wolfe(&problem, start, config.max_iter, config.rel_tol).map(|run| (tag, run))
        })
        .collect::<Result<_>>()?;

    let (tag, best) = runs
        .into_iter()
        .min_by(|(ta, a), (tb, b)| a.cost.total_cmp(&b.cost).then_with(|| ta.cmp(tb)))
        .expect("at least one start");
    Ok(GwResult {
        plan: TransportPlan::new(best.plan, space_x.weights().to_vec(), space_y.weights().to_vec()),
        cost: best.cost,
        distance: best.cost.sqrt(),
        iterations: best.iterations,
        converged: best.converged,
        init_used: tag,
        trace: best.trace,
    })
}
