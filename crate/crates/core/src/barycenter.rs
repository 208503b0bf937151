//! Fixed-support, fixed-weight Gromov–Wasserstein barycenters by block
//! coordinate descent: alternate GW plans to every input with the closed
//! form metric update for fixed plans.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gw::{solve_gw, GwConfig, InitSpec};
use crate::measure::{uniform_weights, MetricKind, MmSpace, TransportPlan};
use crate::rng;

/// Stop once no metric entry moves by more than this.
pub const METRIC_CHANGE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub enum BarycenterInit {
    /// Symmetric zero-diagonal `U[0,1)` matrix from the configured seed.
    Random,
    /// Start from this metric.
    Metric(Array2<f64>),
    /// Start with a metric update from these plans (one per input).
    Plans(Vec<TransportPlan>),
}

#[derive(Clone, Debug)]
pub struct BarycenterConfig {
    pub id: String,
    /// Support size of the barycenter.
    pub points: usize,
    /// Simplex weights of the inputs; uniform when `None`.
    pub lambdas: Option<Vec<f64>>,
    pub outer_iters: usize,
    pub seed: u64,
    pub inner_gw: GwConfig,
    pub init: BarycenterInit,
}

impl BarycenterConfig {
    pub fn new(points: usize) -> Self {
        BarycenterConfig {
            id: "barycenter".into(),
            points,
            lambdas: None,
            outer_iters: 20,
            seed: 0,
            inner_gw: GwConfig::default(),
            init: BarycenterInit::Random,
        }
    }

    fn lambdas(&self, k: usize) -> Result<Vec<f64>> {
        let lambdas = self.lambdas.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
        if lambdas.len() != k {
            return Err(Error::Config(format!("{} lambdas for {k} spaces", lambdas.len())));
        }
        if lambdas.iter().any(|&l| l < 0.0) || (lambdas.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config("lambdas must be a probability vector".into()));
        }
        Ok(lambdas)
    }
}

#[derive(Clone, Debug)]
pub struct Barycenter {
    pub space: MmSpace,
    /// `sum_k lambda_k GW^2` at the plans of each sweep.
    pub objective_history: Vec<f64>,
    pub sweeps: usize,
    pub seed: u64,
}

fn random_metric(points: usize, seed: u64) -> Array2<f64> {
    let mut draw = rng::rng(rng::substream(seed, "barycenter"));
    let mut m = Array2::zeros((points, points));
    for p in 0..points {
        for q in (p + 1)..points {
            let v: f64 = draw.gen();
            m[[p, q]] = v;
            m[[q, p]] = v;
        }
    }
    m
}

/// `d[p,q] = sum_k lambda_k (pi_k D_k pi_k^T)[p,q] / (w_p w_q)`, symmetrized
/// with a zero diagonal.
fn metric_update(
    spaces: &[MmSpace],
    plans: &[TransportPlan],
    lambdas: &[f64],
    weights: &[f64],
) -> Array2<f64> {
    let n = weights.len();
    let mut acc = Array2::<f64>::zeros((n, n));
    for ((space, plan), &lambda) in spaces.iter().zip(plans).zip(lambdas) {
        let pulled = plan.matrix().dot(&space.metric()).dot(&plan.matrix().t());
        acc.scaled_add(lambda, &pulled);
    }
    Array2::from_shape_fn((n, n), |(p, q)| {
        if p == q {
            0.0
        } else {
            0.5 * (acc[[p, q]] + acc[[q, p]]) / (weights[p] * weights[q])
        }
    })
}

pub fn solve_barycenter(spaces: &[MmSpace], config: &BarycenterConfig) -> Result<Barycenter> {
    if spaces.is_empty() {
        return Err(Error::Config("barycenter needs at least one space".into()));
    }
    if config.points == 0 {
        return Err(Error::Config("barycenter needs at least one point".into()));
    }
    config.inner_gw.validate()?;
    let lambdas = config.lambdas(spaces.len())?;
    let weights = uniform_weights(config.points);

    let (mut metric, mut warm): (Array2<f64>, Vec<Option<TransportPlan>>) = match &config.init {
        BarycenterInit::Random => (random_metric(config.points, config.seed), vec![None; spaces.len()]),
        BarycenterInit::Metric(m) => (m.clone(), vec![None; spaces.len()]),
        BarycenterInit::Plans(plans) => {
            if plans.len() != spaces.len() {
                return Err(Error::Config(format!(
                    "{} initial plans for {} spaces",
                    plans.len(),
                    spaces.len()
                )));
            }
            for (plan, space) in plans.iter().zip(spaces) {
                plan.check_couples(&weights, space.weights())?;
            }
            (
                metric_update(spaces, plans, &lambdas, &weights),
                plans.iter().cloned().map(Some).collect(),
            )
        }
    };

    let mut history = Vec::new();
    let mut sweeps = 0;
    for _ in 0..config.outer_iters {
        sweeps += 1;
        let current = MmSpace::new(
            config.id.clone(),
            weights.clone(),
            metric.clone(),
            MetricKind::Explicit,
            None,
        )?;
        let results = spaces
            .par_iter()
            .zip(warm.par_iter())
            .map(|(space, previous)| {
                let cfg = match previous {
                    Some(plan) => GwConfig {
                        inits: vec![InitSpec::plan("warm", plan.clone())],
                        restarts: 0,
                        ..config.inner_gw.clone()
                    },
                    None => config.inner_gw.clone(),
                };
                solve_gw(&current, space, &cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        history.push(results.iter().zip(&lambdas).map(|(r, l)| l * r.cost).sum());
        let plans: Vec<TransportPlan> = results.into_iter().map(|r| r.plan).collect();

        let next = metric_update(spaces, &plans, &lambdas, &weights);
        let change = next
            .iter()
            .zip(metric.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        metric = next;
        warm = plans.into_iter().map(Some).collect();
        log::debug!("barycenter sweep {sweeps}: objective {:e}, metric change {change:e}", history[sweeps - 1]);
        if change < METRIC_CHANGE_TOL {
            break;
        }
    }

    let space = MmSpace::new(config.id.clone(), weights, metric, MetricKind::Explicit, None)?;
    Ok(Barycenter {
        space,
        objective_history: history,
        sweeps,
        seed: config.seed,
    })
}

/// `sum_k lambda_k GW^2(bary, X_k)` with fresh solves under `config`.
pub fn barycenter_objective(
    bary: &MmSpace,
    spaces: &[MmSpace],
    lambdas: &[f64],
    config: &GwConfig,
) -> Result<f64> {
    if lambdas.len() != spaces.len() {
        return Err(Error::Config(format!(
            "{} lambdas for {} spaces",
            lambdas.len(),
            spaces.len()
        )));
    }
    let costs = spaces
        .par_iter()
        .map(|s| solve_gw(bary, s, config).map(|r| r.cost))
        .collect::<Result<Vec<f64>>>()?;
    Ok(costs.iter().zip(lambdas).map(|(c, l)| c * l).sum())
}
