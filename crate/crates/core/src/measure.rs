//! Discrete metric-measure spaces, couplings and their on-disk formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a weight vector.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Tolerance on metric symmetry and the zero diagonal.
pub const METRIC_SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance between stored metric and recomputed Euclidean distances.
pub const EUCLIDEAN_TOL: f64 = 1e-9;
/// Tolerance on plan marginals.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Where the metric of a space came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Geodesic,
    Explicit,
}

/// A finite metric-measure space: a symmetric distance matrix with a
/// strictly positive probability vector on its points.
///
/// Instances are validated on construction and immutable afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct MmSpace {
    id: String,
    label: Option<String>,
    weights: Vec<f64>,
    metric: Array2<f64>,
    kind: MetricKind,
    points: Option<Array2<f64>>,
}

impl MmSpace {
    pub fn new(
        id: impl Into<String>,
        weights: Vec<f64>,
        metric: Array2<f64>,
        kind: MetricKind,
        points: Option<Array2<f64>>,
    ) -> Result<Self> {
        let space = MmSpace {
            id: id.into(),
            label: None,
            weights,
            metric,
            kind,
            points,
        };
        space.validate()?;
        Ok(space)
    }

    /// Euclidean space on the rows of `points`.
    pub fn from_points(
        id: impl Into<String>,
        points: Array2<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let metric = euclidean_distances(points.view(), points.view());
        Self::new(id, weights, metric, MetricKind::Euclidean, Some(points))
    }

    /// Euclidean space with uniform weights.
    pub fn uniform_from_points(id: impl Into<String>, points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::from_points(id, points, uniform_weights(n))
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn metric(&self) -> ArrayView2<'_, f64> {
        self.metric.view()
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn points(&self) -> Option<ArrayView2<'_, f64>> {
        self.points.as_ref().map(|p| p.view())
    }

    fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 {
            return Err(Error::Validation("space has no points (n >= 1)".into()));
        }
        if self.metric.dim() != (n, n) {
            return Err(Error::Validation(format!(
                "metric has shape {:?}, expected ({n}, {n})",
                self.metric.dim()
            )));
        }
        validate_weights(&self.weights)?;
        for i in 0..n {
            let dii = self.metric[[i, i]];
            if dii.abs() > METRIC_SYMMETRY_TOL {
                return Err(Error::Validation(format!(
                    "metric diagonal is not zero: d[{i}][{i}] = {dii}"
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (self.metric[[i, j]], self.metric[[j, i]]);
                if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
                    return Err(Error::Validation(format!(
                        "metric entries must be finite and nonnegative: d[{i}][{j}] = {a}"
                    )));
                }
                if (a - b).abs() > METRIC_SYMMETRY_TOL {
                    return Err(Error::Validation(format!(
                        "metric is not symmetric: d[{i}][{j}] = {a}, d[{j}][{i}] = {b}"
                    )));
                }
            }
        }
        if let Some(points) = &self.points {
            if points.nrows() != n {
                return Err(Error::Validation(format!(
                    "points has {} rows, expected {n}",
                    points.nrows()
                )));
            }
            if self.kind == MetricKind::Euclidean {
                let recomputed = euclidean_distances(points.view(), points.view());
                let worst = recomputed
                    .iter()
                    .zip(self.metric.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if worst > EUCLIDEAN_TOL {
                    return Err(Error::Validation(format!(
                        "euclidean metric disagrees with point distances by {worst:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest violation `d[i][k] - d[i][j] - d[j][k]` of the triangle
    /// inequality, or zero when it holds everywhere. O(n^3).
    pub fn triangle_violation(&self) -> f64 {
        let n = self.len();
        let d = &self.metric;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max(d[[i, k]] - d[[i, j]] - d[[j, k]]);
                }
            }
        }
        worst
    }

    pub fn to_json(&self) -> String {
        let file = MmSpaceFile {
            id: self.id.clone(),
            label: self.label.clone(),
            n: self.len(),
            weights: self.weights.clone(),
            metric_kind: self.kind,
            metric: rows_of(&self.metric),
            points: self.points.as_ref().map(rows_of),
        };
        let mut s = serde_json::to_string(&file).expect("space serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &Path, drop_zero: bool) -> Result<Self> {
        let file: MmSpaceFile = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        file.into_space(drop_zero)
    }
}

/// Serialized form of an [`MmSpace`]; field order is the canonical order.
#[derive(Debug, Serialize, Deserialize)]
struct MmSpaceFile {
    id: String,
    label: Option<String>,
    n: usize,
    weights: Vec<f64>,
    metric_kind: MetricKind,
    metric: Vec<Vec<f64>>,
    points: Option<Vec<Vec<f64>>>,
}

impl MmSpaceFile {
    fn into_space(self, drop_zero: bool) -> Result<MmSpace> {
        let MmSpaceFile {
            id,
            label,
            n,
            mut weights,
            metric_kind,
            metric,
            points,
        } = self;
        if weights.len() != n {
            return Err(Error::Validation(format!(
                "n = {n} but {} weights given",
                weights.len()
            )));
        }
        let mut metric = matrix_from_rows(&metric, n, n, "metric")?;
        let mut points = match points {
            Some(rows) => {
                let d = rows.first().map_or(0, Vec::len);
                Some(matrix_from_rows(&rows, n, d, "points")?)
            }
            None => None,
        };
        if drop_zero && weights.contains(&0.0) {
            let keep: Vec<usize> = (0..n).filter(|&i| weights[i] != 0.0).collect();
            weights = keep.iter().map(|&i| weights[i]).collect();
            metric = metric.select(Axis(0), &keep).select(Axis(1), &keep);
            points = points.map(|p| p.select(Axis(0), &keep));
        }
        Ok(MmSpace::new(id, weights, metric, metric_kind, points)?.with_label(label))
    }
}

fn rows_of(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize, d: usize, what: &str) -> Result<Array2<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Validation(format!(
            "{what} must be a {n}x{d} matrix"
        )));
    }
    Ok(Array2::from_shape_fn((n, d), |(i, j)| rows[i][j]))
}

pub fn load_mm_space(path: impl AsRef<Path>) -> Result<MmSpace> {
    load_mm_space_with(path, false)
}

/// Loads a space, optionally removing atoms with zero mass instead of
/// rejecting them.
pub fn load_mm_space_with(path: impl AsRef<Path>, drop_zero: bool) -> Result<MmSpace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MmSpace::from_json(&text, path, drop_zero)
}

pub fn save_mm_space(space: &MmSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, space.to_json()).map_err(|e| Error::io(path, e))
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub fn validate_weights(weights: &[f64]) -> Result<()> {
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w > 0.0))
    {
        return Err(Error::Validation(format!(
            "weights must be strictly positive: weight[{i}] = {w}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Validation(format!(
            "weights must sum to 1, got {total}"
        )));
    }
    Ok(())
}

/// Pairwise Euclidean distances between the rows of `a` and `b`.
pub fn euclidean_distances(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    squared_euclidean(a, b).mapv(f64::sqrt)
}

/// Pairwise squared Euclidean distances between the rows of `a` and `b`.
pub fn squared_euclidean(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        a.row(i)
            .iter()
            .zip(b.row(j).iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    })
}

/// A coupling between two discrete measures.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    matrix: Array2<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl TransportPlan {
    /// Wraps a matrix with the marginals it is supposed to have. No checks
    /// are made; call [`validate`](Self::validate) for that.
    pub fn new(matrix: Array2<f64>, row_marginal: Vec<f64>, col_marginal: Vec<f64>) -> Self {
        TransportPlan {
            matrix,
            row_marginal,
            col_marginal,
        }
    }

    /// The independent coupling `mu nu^T`.
    pub fn product(mu: &[f64], nu: &[f64]) -> Self {
        let matrix = Array2::from_shape_fn((mu.len(), nu.len()), |(i, j)| mu[i] * nu[j]);
        Self::new(matrix, mu.to_vec(), nu.to_vec())
    }

    /// `diag(mu)`; only a coupling when both marginals are the same vector.
    pub fn diagonal(mu: &[f64]) -> Self {
        let n = mu.len();
        let mut matrix = Array2::zeros((n, n));
        for (i, &w) in mu.iter().enumerate() {
            matrix[[i, i]] = w;
        }
        Self::new(matrix, mu.to_vec(), mu.to_vec())
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.matrix
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn transpose(&self) -> Self {
        Self::new(
            self.matrix.t().to_owned(),
            self.col_marginal.clone(),
            self.row_marginal.clone(),
        )
    }

    pub fn nonzeros(&self) -> usize {
        self.matrix.iter().filter(|&&x| x != 0.0).count()
    }

    /// Largest absolute deviation of the row and column sums from the
    /// prescribed marginals.
    pub fn marginal_violation(&self) -> f64 {
        if self.row_marginal.len() != self.rows() || self.col_marginal.len() != self.cols() {
            return f64::INFINITY;
        }
        let rows = self.matrix.sum_axis(Axis(1));
        let cols = self.matrix.sum_axis(Axis(0));
        let r = rows
            .iter()
            .zip(&self.row_marginal)
            .map(|(a, b)| (a - b).abs());
        let c = cols
            .iter()
            .zip(&self.col_marginal)
            .map(|(a, b)| (a - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        validate_plan(self)
    }

    /// Checks that this plan couples `mu` and `nu`.
    pub fn check_couples(&self, mu: &[f64], nu: &[f64]) -> Result<()> {
        if self.rows() != mu.len() || self.cols() != nu.len() {
            return Err(Error::DimensionMismatch(format!(
                "plan is {}x{}, measures have {} and {} atoms",
                self.rows(),
                self.cols(),
                mu.len(),
                nu.len()
            )));
        }
        let deviation = max_abs_diff(&self.row_marginal, mu).max(max_abs_diff(&self.col_marginal, nu));
        if deviation > MARGINAL_TOL {
            return Err(Error::Marginal {
                max_violation: deviation,
            });
        }
        validate_plan(self)
    }

    /// Writes the nonzero entries as `i,j,mass` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("i,j,mass\n");
        for ((i, j), &x) in self.matrix.indexed_iter() {
            if x != 0.0 {
                out.push_str(&format!("{i},{j},{x}\n"));
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads `i,j,mass` triplets as a plan between `mu` and `nu`.
    pub fn read_csv(path: impl AsRef<Path>, mu: &[f64], nu: &[f64]) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut matrix = Array2::zeros((mu.len(), nu.len()));
        for record in reader.deserialize::<(usize, usize, f64)>() {
            let (i, j, x) = record.map_err(|e| Error::parse(path, e))?;
            if i >= mu.len() || j >= nu.len() {
                return Err(Error::parse(path, format!("entry ({i},{j}) out of range")));
            }
            matrix[[i, j]] += x;
        }
        let plan = Self::new(matrix, mu.to_vec(), nu.to_vec());
        plan.validate()?;
        Ok(plan)
    }
}

/// Passes iff all entries are nonnegative and both marginals match.
pub fn validate_plan(plan: &TransportPlan) -> Result<()> {
    if let Some(x) = plan.matrix.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Validation(format!(
            "plan entries must be nonnegative, found {x}"
        )));
    }
    let violation = plan.marginal_violation();
    if violation > MARGINAL_TOL {
        return Err(Error::Marginal {
            max_violation: violation,
        });
    }
    Ok(())
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A coupling on `S x X x Y` with prescribed `(S,X)` and `(S,Y)` marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreePlan {
    tensor: Array3<f64>,
    marginal12: Array2<f64>,
    marginal13: Array2<f64>,
}

impl ThreePlan {
    pub fn new(tensor: Array3<f64>, marginal12: Array2<f64>, marginal13: Array2<f64>) -> Self {
        ThreePlan {
            tensor,
            marginal12,
            marginal13,
        }
    }

    pub fn tensor(&self) -> &Array3<f64> {
        &self.tensor
    }

    pub fn marginal12(&self) -> ArrayView2<'_, f64> {
        self.marginal12.view()
    }

    pub fn marginal13(&self) -> ArrayView2<'_, f64> {
        self.marginal13.view()
    }

    /// Sum over the third axis.
    pub fn p12(&self) -> Array2<f64> {
        self.tensor.sum_axis(Axis(2))
    }

    /// Sum over the second axis.
    pub fn p13(&self) -> Array2<f64> {
        self.tensor.sum_axis(Axis(1))
    }

    /// Sum over the reference axis: a coupling of the two targets.
    pub fn p23(&self) -> Array2<f64> {
        self.tensor.sum_axis(Axis(0))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(x) = self.tensor.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Validation(format!(
                "3-plan entries must be nonnegative, found {x}"
            )));
        }
        let (n, m, k) = self.tensor.dim();
        if self.marginal12.dim() != (n, m) || self.marginal13.dim() != (n, k) {
            return Err(Error::DimensionMismatch(
                "3-plan marginals do not match tensor shape".into(),
            ));
        }
        let d12 = max_abs_matrix_diff(&self.p12(), &self.marginal12);
        let d13 = max_abs_matrix_diff(&self.p13(), &self.marginal13);
        let violation = d12.max(d13);
        if violation > MARGINAL_TOL {
            return Err(Error::Marginal {
                max_violation: violation,
            });
        }
        Ok(())
    }
}

pub(crate) fn max_abs_matrix_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Symmetric matrix of pairwise distances between labelled items.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: Array2<f64>,
    labels: Option<Vec<String>>,
}

impl DistanceMatrix {
    pub fn new(ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let n = ids.len();
        if values.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "{n} ids but a {:?} matrix",
                values.dim()
            )));
        }
        if let Some(id) = ids.iter().find(|id| id.contains([',', '\n', '"'])) {
            return Err(Error::Validation(format!(
                "id `{id}` may not contain commas, quotes or newlines"
            )));
        }
        for i in 0..n {
            if values[[i, i]].abs() > MARGINAL_TOL {
                return Err(Error::Validation(format!(
                    "distance diagonal is not zero at {i}"
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (values[[i, j]], values[[j, i]]);
                if !(a >= 0.0 && b >= 0.0) || (a - b).abs() > MARGINAL_TOL {
                    return Err(Error::Validation(format!(
                        "distances must be symmetric and nonnegative: ({i},{j}) = {a}, ({j},{i}) = {b}"
                    )));
                }
            }
        }
        Ok(DistanceMatrix {
            ids,
            values,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.ids.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} ids",
                    l.len(),
                    self.ids.len()
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for id in &self.ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for v in self.values.row(i) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let header = reader.headers().map_err(|e| Error::parse(path, e))?.clone();
        if header.get(0) != Some("id") {
            return Err(Error::parse(path, "header must start with `id`"));
        }
        let ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let n = ids.len();
        let mut values = Array2::zeros((n, n));
        let mut rows = 0;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::parse(path, e))?;
            if i >= n {
                return Err(Error::parse(path, "more rows than header ids"));
            }
            if record.get(0) != Some(ids[i].as_str()) {
                return Err(Error::parse(
                    path,
                    format!("row {i} id does not match header id `{}`", ids[i]),
                ));
            }
            if record.len() != n + 1 {
                return Err(Error::parse(path, format!("row {i} has {} fields", record.len())));
            }
            for j in 0..n {
                values[[i, j]] = record[j + 1]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, format!("row {i}, column {j}: {e}")))?;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::parse(path, format!("{rows} rows for {n} ids")));
        }
        Self::new(ids, values)
    }

    /// Writes the `id,label` sidecar. Items without a label are skipped.
    pub fn write_labels_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("id,label\n");
        if let Some(labels) = &self.labels {
            for (id, label) in self.ids.iter().zip(labels) {
                out.push_str(&format!("{id},{label}\n"));
            }
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Reads an `id,label` CSV into pairs in file order.
pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
    reader
        .deserialize::<(String, String)>()
        .map(|r| r.map_err(|e| Error::parse(path, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn line_space(id: &str, xs: &[f64]) -> MmSpace {
        let n = xs.len();
        let metric = Array2::from_shape_fn((n, n), |(i, j)| (xs[i] - xs[j]).abs());
        MmSpace::new(id, uniform_weights(n), metric, MetricKind::Explicit, None).unwrap()
    }

    #[test]
    fn singleton_space_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.json");
        fs::write(
            &path,
            r#"{"id":"one","label":null,"n":1,"weights":[1.0],"metric_kind":"explicit","metric":[[0.0]],"points":null}"#,
        )
        .unwrap();
        let space = load_mm_space(&path).unwrap();
        assert_eq!(space.len(), 1);
        assert_eq!(space.weights(), &[1.0]);
    }

    #[test]
    fn weights_not_summing_to_one_are_rejected() {
        let err = MmSpace::new(
            "bad",
            vec![0.45, 0.45],
            array![[0.0, 1.0], [1.0, 0.0]],
            MetricKind::Explicit,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("sum to 1")));
    }

    #[test]
    fn zero_weight_rejected_unless_dropped() {
        let text = r#"{"id":"z","label":null,"n":3,"weights":[0.5,0.0,0.5],"metric_kind":"explicit","metric":[[0,1,2],[1,0,1],[2,1,0]],"points":null}"#;
        let err = MmSpace::from_json(text, Path::new("z.json"), false).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("strictly positive")));
        let space = MmSpace::from_json(text, Path::new("z.json"), true).unwrap();
        assert_eq!(space.len(), 2);
        assert_eq!(space.metric()[[0, 1]], 2.0);
    }

    #[test]
    fn asymmetric_or_nonzero_diagonal_metric_rejected() {
        let asym = MmSpace::new(
            "a",
            vec![0.5, 0.5],
            array![[0.0, 1.0], [2.0, 0.0]],
            MetricKind::Explicit,
            None,
        );
        assert!(matches!(asym, Err(Error::Validation(ref m)) if m.contains("symmetric")));
        let diag = MmSpace::new(
            "d",
            vec![0.5, 0.5],
            array![[0.1, 1.0], [1.0, 0.0]],
            MetricKind::Explicit,
            None,
        );
        assert!(matches!(diag, Err(Error::Validation(ref m)) if m.contains("diagonal")));
    }

    #[test]
    fn euclidean_metric_must_match_points() {
        let points = array![[0.0, 0.0], [3.0, 4.0]];
        let ok = MmSpace::new(
            "e",
            vec![0.5, 0.5],
            array![[0.0, 5.0], [5.0, 0.0]],
            MetricKind::Euclidean,
            Some(points.clone()),
        );
        assert!(ok.is_ok());
        let bad = MmSpace::new(
            "e",
            vec![0.5, 0.5],
            array![[0.0, 4.0], [4.0, 0.0]],
            MetricKind::Euclidean,
            Some(points),
        );
        assert!(matches!(bad, Err(Error::Validation(ref m)) if m.contains("euclidean")));
    }

    #[test]
    fn line_reference_round_trips_exactly() {
        let space = line_space("S", &[0.0, 1.0, 2.0, 3.0, 6.0]);
        assert_eq!(space.metric()[[0, 4]], 6.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        save_mm_space(&space, &path).unwrap();
        let back = load_mm_space(&path).unwrap();
        assert_eq!(back, space);
        let first = fs::read(&path).unwrap();
        save_mm_space(&back, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn save_to_unwritable_path_is_io_error() {
        let space = line_space("x", &[0.0]);
        let err = save_mm_space(&space, "/nonexistent-dir/x.json").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        let err = MmSpace::from_json("{not json", Path::new("x"), false).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn plan_validation() {
        let mu = [0.25, 0.75];
        let nu = [0.5, 0.3, 0.2];
        assert!(validate_plan(&TransportPlan::product(&mu, &nu)).is_ok());

        let scaled_identity = Array2::from_diag(&ndarray::arr1(&[1.0 / 3.0; 3]));
        let plan = TransportPlan::new(scaled_identity, vec![0.5, 0.25, 0.25], vec![1.0 / 3.0; 3]);
        match validate_plan(&plan) {
            Err(Error::Marginal { max_violation }) => {
                assert!((max_violation - (0.5 - 1.0 / 3.0)).abs() < 1e-12)
            }
            other => panic!("expected marginal error, got {other:?}"),
        }

        // 2x2 layout with row sums equal to the reference masses.
        let plan = TransportPlan::new(
            array![[0.1, 0.3], [0.4, 0.2]],
            vec![0.4, 0.6],
            vec![0.5, 0.5],
        );
        assert!(validate_plan(&plan).is_ok());
    }

    #[test]
    fn triangle_violation_detects_gauges() {
        let space = line_space("l", &[0.0, 1.0, 3.0]);
        assert_eq!(space.triangle_violation(), 0.0);
        let gauge = MmSpace::new(
            "g",
            uniform_weights(3),
            array![[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]],
            MetricKind::Explicit,
            None,
        )
        .unwrap();
        assert_eq!(gauge.triangle_violation(), 3.0);
    }

    #[test]
    fn distance_matrix_csv_round_trip() {
        let dm = DistanceMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            array![[0.0, 0.1, 2.5], [0.1, 0.0, 1.0 / 3.0], [2.5, 1.0 / 3.0, 0.0]],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        dm.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,a,b,c\na,0,0.1,2.5\n"));
        assert_eq!(DistanceMatrix::read_csv(&path).unwrap(), dm);
    }

    #[test]
    fn plan_csv_round_trip() {
        let mu = [0.5, 0.5];
        let nu = [0.25, 0.75];
        let plan = TransportPlan::new(array![[0.25, 0.25], [0.0, 0.5]], mu.to_vec(), nu.to_vec());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        plan.write_csv(&path).unwrap();
        assert_eq!(TransportPlan::read_csv(&path, &mu, &nu).unwrap(), plan);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
                let s: f64 = w.iter().sum();
                let mut w: Vec<f64> = w.iter().map(|x| x / s).collect();
                let rest: f64 = w[1..].iter().sum();
                w[0] = 1.0 - rest;
                w
            })
        }

        proptest! {
            #[test]
            fn product_coupling_always_validates(mu in (1usize..7).prop_flat_map(weights),
                                                 nu in (1usize..7).prop_flat_map(weights)) {
                prop_assert!(validate_plan(&TransportPlan::product(&mu, &nu)).is_ok());
            }

            #[test]
            fn canonical_serialization_is_stable(
                pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..8)
            ) {
                let n = pts.len();
                let points = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { pts[i].0 } else { pts[i].1 });
                let space = MmSpace::uniform_from_points("p", points).unwrap();
                let first = space.to_json();
                let back = MmSpace::from_json(&first, Path::new("p"), false).unwrap();
                prop_assert_eq!(&back, &space);
                prop_assert_eq!(back.to_json(), first);
            }
        }
    }
}
