//! Solvers checked against independent brute-force or LP computations.

mod common;

use common::{
    dyadic_graph, floyd_warshall, ot_by_enumeration, random_plan, simplex, transport_vertices,
    w_sigma_by_lp,
};
use lgw_core::ingest::{dijkstra_distances, WeightedGraph};
use lgw_core::lgw::{gw_s_three_plan, three_plan_objective};
use lgw_core::ot::{solve_ot, w_sigma_lp};
use lgw_core::{GwConfig, InitSpec, MmSpace, ThreePlan};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_ot_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (r, c) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
        for _ in 0..25 {
            let mu = simplex(&mut rng, r);
            let nu = simplex(&mut rng, c);
            let cost = Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..3.0));
            let best = ot_by_enumeration(&cost, &mu, &nu);
            let got = solve_ot(cost.view(), &mu, &nu).unwrap();
            assert!((got.cost - best).abs() < 1e-12, "{r}x{c}: {} vs {best}", got.cost);
        }
    }
}

#[test]
fn exact_ot_on_integer_costs_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..40 {
        let mu = vec![1.0 / 3.0; 3];
        let nu = vec![1.0 / 3.0; 3];
        let cost = Array2::from_shape_fn((3, 3), |_| rng.gen_range(0..3) as f64);
        let best = ot_by_enumeration(&cost, &mu, &nu);
        let got = solve_ot(cost.view(), &mu, &nu).unwrap();
        assert!((got.cost - best).abs() < 1e-12);
    }
}

#[test]
fn w_sigma_matches_dense_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let (n, m, k) = (3, 4, 3);
        let sigma = simplex(&mut rng, n);
        let a = random_plan(&mut rng, &sigma, m);
        let b = random_plan(&mut rng, &sigma, k);
        let px: Array2<f64> = Array2::from_shape_fn((m, 2), |_| rng.gen_range(-1.0..1.0));
        let py: Array2<f64> = Array2::from_shape_fn((k, 2), |_| rng.gen_range(-1.0..1.0));

        let oracle = w_sigma_by_lp(&a, &b, &px, &py);
        let (three, value) = w_sigma_lp(&a, &b, px.view(), py.view()).unwrap();
        assert!((value * value - oracle).abs() < 1e-8, "{} vs {oracle}", value * value);
        three.validate().unwrap();
    }
}

#[test]
fn dijkstra_matches_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let v = rng.gen_range(1..=8);
        let edges = dyadic_graph(&mut rng, v, 0.35);
        let fw = floyd_warshall(v, &edges);
        let graph = WeightedGraph::new(v, edges).unwrap();
        let sources: Vec<usize> = (0..v).collect();
        let d = dijkstra_distances(&graph, &sources);
        for i in 0..v {
            for j in 0..v {
                assert_eq!(d.values[[i, j]], fw[[i, j]]);
            }
        }
        assert_eq!(d.unreachable, fw.iter().filter(|x| x.is_infinite()).count());
    }
}

/// The 3-plan objective is concave for Euclidean metrics, so its minimum is
/// attained at a product of per-atom conditional transport vertices.
#[test]
fn three_plan_solver_reaches_exhaustive_vertex_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for trial in 0..6 {
        let (n, m, k) = (2, 3, 3);
        let sigma = simplex(&mut rng, n);
        let a = random_plan(&mut rng, &sigma, m);
        let b = random_plan(&mut rng, &sigma, k);
        let px: Array2<f64> = Array2::from_shape_fn((m, 2), |_| rng.gen_range(-1.0..1.0));
        let py: Array2<f64> = Array2::from_shape_fn((k, 2), |_| rng.gen_range(-1.0..1.0));
        let x = MmSpace::uniform_from_points("x", px).unwrap();
        let y = MmSpace::uniform_from_points("y", py).unwrap();
        let reference = MmSpace::uniform_from_points("s", Array2::from_shape_fn((n, 1), |(i, _)| i as f64))
            .unwrap();
        let reference = MmSpace::new("s", sigma.clone(), reference.metric().to_owned(), reference.kind(), None)
            .unwrap();

        let per_atom: Vec<Vec<Array2<f64>>> = (0..n)
            .map(|i| {
                let cx: Vec<f64> = a.matrix().row(i).iter().map(|v| v / sigma[i]).collect();
                let cy: Vec<f64> = b.matrix().row(i).iter().map(|v| v / sigma[i]).collect();
                transport_vertices(&cx, &cy)
            })
            .collect();
        let mut best = f64::INFINITY;
        for v0 in &per_atom[0] {
            for v1 in &per_atom[1] {
                let mut tensor = Array3::zeros((n, m, k));
                for (i, v) in [v0, v1].into_iter().enumerate() {
                    for j in 0..m {
                        for l in 0..k {
                            tensor[[i, j, l]] = sigma[i] * v[[j, l]];
                        }
                    }
                }
                let three = ThreePlan::new(tensor, a.matrix().to_owned(), b.matrix().to_owned());
                best = best.min(three_plan_objective(&three, x.metric(), y.metric()));
            }
        }

        let cfg = GwConfig {
            inits: vec![InitSpec::Product],
            ..GwConfig::default()
        }
        .with_restarts(40, trial);
        let (three, value) = gw_s_three_plan(&reference, &a, &b, x.metric(), y.metric(), &cfg).unwrap();
        three.validate().unwrap();
        assert!(value * value >= best - 1e-10);
        assert!((value * value - best).abs() < 1e-9, "trial {trial}: {} vs {best}", value * value);
    }
}
