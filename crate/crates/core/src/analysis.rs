//! Diagnostics on distance matrices: classical MDS, nearest-representative
//! confusion matrices, agreement statistics and GW kernels.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::DistanceMatrix;
use crate::rng;

/// Reference distances at or below this are left out of the relative error.
pub const MRE_FLOOR: f64 = 1e-12;

/// Classical (Torgerson) scaling into `dim` coordinates. Columns follow
/// descending eigenvalues, negative eigenvalues are clamped to zero, and
/// each column's first nonzero entry is positive.
pub fn classical_mds(dist: &DistanceMatrix, dim: usize) -> Result<Array2<f64>> {
    if dim == 0 {
        return Err(Error::Config("MDS dimension must be at least 1".into()));
    }
    let n = dist.len();
    let d = dist.values();
    let sq = DMatrix::from_fn(n, n, |i, j| d[[i, j]] * d[[i, j]]);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n.max(1) as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut coords = Array2::zeros((n, dim));
    for (col, &k) in order.iter().take(dim).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        let sign = v
            .iter()
            .find(|x| (x.abs() * scale) > 1e-12)
            .map_or(1.0, |x| x.signum());
        for i in 0..n {
            coords[[i, col]] = sign * scale * v[i];
        }
    }
    Ok(coords)
}

/// Row-stochastic class-to-class matrix; rows and columns follow `classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub values: Array2<f64>,
}

impl ConfusionMatrix {
    /// CSV with a `class,<names...>` header and one row per true class.
    pub fn to_csv(&self) -> String {
        let mut out = format!("class,{}\n", self.classes.join(","));
        for (name, row) in self.classes.iter().zip(self.values.rows()) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }
}

/// Repeatedly picks one random representative per class and assigns every
/// other item to the class of its nearest representative (ties to the
/// lowest item index). Counts are pooled over all repetitions and each row
/// is normalized.
pub fn confusion_matrix(
    dist: &DistanceMatrix,
    labels: &[String],
    repetitions: usize,
    seed: u64,
) -> Result<ConfusionMatrix> {
    let n = dist.len();
    if labels.len() != n {
        return Err(Error::IdMismatch(format!("{} labels for {n} items", labels.len())));
    }
    if repetitions == 0 {
        return Err(Error::Config("at least one repetition is required".into()));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        members.entry(label).or_default().push(i);
    }
    if let Some((class, items)) = members.iter().find(|(_, items)| items.len() < 2) {
        return Err(Error::ClassTooSmall {
            class: class.to_string(),
            members: items.len(),
        });
    }
    let classes: Vec<String> = members.keys().map(|c| c.to_string()).collect();
    let class_of: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is a class"))
        .collect();
    let groups: Vec<&Vec<usize>> = members.values().collect();
    let c = classes.len();
    let d = dist.values();
    let stream = rng::substream(seed, "confusion");

    let counts = (0..repetitions as u64)
        .into_par_iter()
        .map(|rep| {
            let mut draw = rng::rng(rng::indexed(stream, rep));
            let reps: Vec<usize> = groups.iter().map(|g| g[draw.gen_range(0..g.len())]).collect();
            let mut counts = vec![0u64; c * c];
            for item in 0..n {
                if reps.contains(&item) {
                    continue;
                }
                let mut best = 0;
                for k in 1..c {
                    let (dk, db) = (d[[item, reps[k]]], d[[item, reps[best]]]);
                    if dk < db || (dk == db && reps[k] < reps[best]) {
                        best = k;
                    }
                }
                counts[class_of[item] * c + best] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; c * c],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let mut values = Array2::zeros((c, c));
    for t in 0..c {
        let total: u64 = counts[t * c..(t + 1) * c].iter().sum();
        for p in 0..c {
            values[[t, p]] = counts[t * c + p] as f64 / total as f64;
        }
    }
    Ok(ConfusionMatrix { classes, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Agreement {
    /// Mean of `|b - a| / a` over pairs with `a > MRE_FLOOR`.
    pub mre: f64,
    /// Pearson correlation over all unordered pairs.
    pub pcc: f64,
    /// Number of pairs entering the relative error.
    pub pairs_used: usize,
}

/// Compares `b` against the reference `a` over unordered pairs `k < l`.
pub fn compare_distance_matrices(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<Agreement> {
    if a.ids() != b.ids() {
        return Err(Error::IdMismatch("distance matrices list different ids".into()));
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::Validation(format!("need at least 3 items, got {n}")));
    }
    let (va, vb) = (a.values(), b.values());
    let pairs: Vec<(f64, f64)> = (0..n)
        .flat_map(|k| ((k + 1)..n).map(move |l| (k, l)))
        .map(|(k, l)| (va[[k, l]], vb[[k, l]]))
        .collect();

    let relative: Vec<f64> = pairs
        .iter()
        .filter(|(x, _)| *x > MRE_FLOOR)
        .map(|(x, y)| (y - x).abs() / x)
        .collect();
    if relative.is_empty() {
        return Err(Error::DegenerateVariance("reference matrix is identically zero".into()));
    }
    let mre = relative.iter().sum::<f64>() / relative.len() as f64;

    let m = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / m, my / m);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateVariance("a matrix has constant off-diagonal entries".into()));
    }
    Ok(Agreement {
        mre,
        pcc: sxy / (sxx * syy).sqrt(),
        pairs_used: relative.len(),
    })
}

/// Entrywise `exp(-alpha d)`.
pub fn gw_kernel(dist: &DistanceMatrix, alpha: f64) -> Result<Array2<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("kernel parameter must be positive, got {alpha}")));
    }
    Ok(dist.values().mapv(|d| (-alpha * d).exp()))
}
