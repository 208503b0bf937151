use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::path::Path;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::fps::farthest_point_sample;
use super::image::{file_stem, row_distance};
use crate::error::{Error, Result};
use crate::measure::{MetricKind, MmSpace};
use crate::rng;

/// Triangle mesh: vertex coordinates (one row per vertex) and faces.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Array2<f64>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn to_off(&self) -> String {
        let mut out = format!("OFF\n{} {} 0\n", self.vertices.nrows(), self.faces.len());
        for row in self.vertices.rows() {
            let coords: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&coords.join(" "));
            out.push('\n');
        }
        for [a, b, c] in &self.faces {
            out.push_str(&format!("3 {a} {b} {c}\n"));
        }
        out
    }

    pub fn write_off(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_off()).map_err(|e| Error::io(path, e))
    }
}

pub fn parse_off(text: &str, origin: &Path) -> Result<Mesh> {
    let err = |detail: String| Error::parse(origin, detail);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (_, header) = lines.next().ok_or_else(|| err("empty file".into()))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| err(format!("expected `OFF` header, found `{header}`")))?
        .trim();
    let counts_line = if rest.is_empty() {
        lines.next().ok_or_else(|| err("missing element counts".into()))?
    } else {
        (1, rest)
    };
    let counts: Vec<usize> = counts_line
        .1
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(format!("line {}: invalid counts: {e}", counts_line.0)))?;
    let (nv, nf) = match counts[..] {
        [nv, nf, ..] => (nv, nf),
        _ => return Err(err(format!("line {}: expected vertex and face counts", counts_line.0))),
    };

    let mut coords = Vec::with_capacity(nv * 3);
    for _ in 0..nv {
        let (no, line) = lines.next().ok_or_else(|| err("truncated vertex list".into()))?;
        let xyz: Vec<f64> = line
            .split_whitespace()
            .take(3)
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(format!("line {no}: {e}")))?;
        if xyz.len() != 3 || xyz.iter().any(|v| !v.is_finite()) {
            return Err(err(format!("line {no}: expected three finite coordinates")));
        }
        coords.extend(xyz);
    }
    let mut faces = Vec::with_capacity(nf);
    for face in 0..nf {
        let (no, line) = lines.next().ok_or_else(|| err("truncated face list".into()))?;
        let mut tokens = line.split_whitespace();
        let count: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(format!("line {no}: invalid face size")))?;
        if count != 3 {
            return Err(Error::NonTriangleFace { face, vertices: count });
        }
        let mut idx = [0usize; 3];
        for slot in &mut idx {
            *slot = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .filter(|&v: &usize| v < nv)
                .ok_or_else(|| err(format!("line {no}: invalid vertex index")))?;
        }
        faces.push(idx);
    }
    Ok(Mesh {
        vertices: Array2::from_shape_vec((nv, 3), coords).expect("three coordinates per vertex"),
        faces,
    })
}

pub fn read_off(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_off(&text, path)
}

/// Undirected graph with positive edge lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(u, v, len) in &edges {
            if u == v {
                return Err(Error::Validation(format!("self-loop at vertex {u}")));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::Validation(format!("edge ({u}, {v}) out of range")));
            }
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::Validation(format!("edge ({u}, {v}) has length {len}")));
            }
        }
        Ok(WeightedGraph { vertex_count, edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(u, v, len) in &self.edges {
            adj[u].push((v, len));
            adj[v].push((u, len));
        }
        adj
    }
}

/// Graph on the mesh vertices with one edge per distinct triangle side,
/// weighted by Euclidean length.
pub fn mesh_to_graph(mesh: &Mesh) -> Result<WeightedGraph> {
    let mut sides = BTreeSet::new();
    for &[a, b, c] in &mesh.faces {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            if u != v {
                sides.insert((u.min(v), u.max(v)));
            }
        }
    }
    let edges = sides
        .into_iter()
        .map(|(u, v)| (u, v, row_distance(&mesh.vertices, u, v)))
        .collect();
    WeightedGraph::new(mesh.vertices.nrows(), edges)
}

/// Shortest-path lengths from each source (rows) to every vertex (columns).
#[derive(Clone, Debug)]
pub struct GeodesicDistances {
    pub values: Array2<f64>,
    /// Number of (source, vertex) entries left at `+inf`.
    pub unreachable: usize,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, source)]);
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, len) in &adj[u] {
            let nd = d + len;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

pub fn dijkstra_distances(graph: &WeightedGraph, sources: &[usize]) -> GeodesicDistances {
    let adj = graph.adjacency();
    let rows: Vec<Vec<f64>> = sources.par_iter().map(|&s| dijkstra(&adj, s)).collect();
    let values = Array2::from_shape_vec((sources.len(), graph.vertex_count), rows.concat())
        .expect("one row per source");
    let unreachable = values.iter().filter(|d| d.is_infinite()).count();
    if unreachable > 0 {
        log::warn!("{unreachable} source/vertex pairs are not connected");
    }
    GeodesicDistances { values, unreachable }
}

/// Two-step reduction of a mesh: Euclidean farthest-point sampling to
/// `coarse` vertices, then geodesic farthest-point sampling to `points`
/// vertices weighted by the size of their geodesic Voronoi cells among the
/// coarse vertices.
pub fn mesh_data_to_space(
    id: impl Into<String>,
    mesh: &Mesh,
    coarse: usize,
    points: usize,
    seed: u64,
) -> Result<MmSpace> {
    let graph = mesh_to_graph(mesh)?;
    let nv = graph.vertex_count();
    if nv == 0 || points == 0 {
        return Err(Error::Config("mesh reduction needs vertices and points".into()));
    }
    let coarse = coarse.max(points);
    let coarse_idx: Vec<usize> = if nv > coarse {
        let vertices = &mesh.vertices;
        let mut keep = farthest_point_sample(
            |a, b| row_distance(vertices, a, b),
            nv,
            coarse,
            rng::substream(seed, "fps-euclidean"),
        );
        keep.sort_unstable();
        keep
    } else {
        (0..nv).collect()
    };

    let geo = dijkstra_distances(&graph, &coarse_idx);
    if geo.unreachable > 0 {
        return Err(Error::DisconnectedMesh {
            unreachable: geo.unreachable,
        });
    }
    let c = coarse_idx.len();
    let dc = Array2::from_shape_fn((c, c), |(a, b)| {
        geo.values[[a, coarse_idx[b]]].min(geo.values[[b, coarse_idx[a]]])
    });

    let finals: Vec<usize> = if c > points {
        let mut keep = farthest_point_sample(|a, b| dc[[a, b]], c, points, rng::substream(seed, "fps-geodesic"));
        keep.sort_unstable();
        keep
    } else {
        (0..c).collect()
    };

    let mut counts = vec![0usize; finals.len()];
    for a in 0..c {
        let mut best = 0;
        for f in 1..finals.len() {
            if dc[[a, finals[f]]] < dc[[a, finals[best]]] {
                best = f;
            }
        }
        counts[best] += 1;
    }
    let weights = counts.iter().map(|&k| k as f64 / c as f64).collect();
    let metric = dc.select(Axis(0), &finals).select(Axis(1), &finals);
    let vertex_ids: Vec<usize> = finals.iter().map(|&f| coarse_idx[f]).collect();
    let coords = mesh.vertices.select(Axis(0), &vertex_ids);
    MmSpace::new(id, weights, metric, MetricKind::Geodesic, Some(coords))
}

/// [`mesh_data_to_space`] on an OFF file; the id is the file stem.
pub fn mesh_to_space(
    path: impl AsRef<Path>,
    coarse: usize,
    points: usize,
    seed: u64,
) -> Result<MmSpace> {
    let path = path.as_ref();
    let mesh = read_off(path)?;
    mesh_data_to_space(file_stem(path), &mesh, coarse, points, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gw::{solve_gw, GwConfig};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Mesh {
        Mesh {
            vertices: array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            faces: vec![[0, 1, 2]],
        }
    }

    fn tetrahedron() -> Mesh {
        Mesh {
            vertices: array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            faces: vec![[0, 1, 2], [0, 1, 3], [1, 2, 3], [0, 2, 3]],
        }
    }

    /// Open cylinder of `rings` circles of `around` vertices, radially
    /// jittered so that farthest-point sampling meets no exact ties.
    fn cylinder(rings: usize, around: usize, length: f64, radius: f64, seed: u64) -> Mesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coords = Vec::new();
        for r in 0..rings {
            for k in 0..around {
                let t = std::f64::consts::TAU * k as f64 / around as f64;
                let rad = radius * (1.0 + rng.gen_range(-0.02..0.02));
                let z = length * r as f64 / (rings - 1) as f64 + rng.gen_range(-0.01..0.01);
                coords.extend([rad * t.cos(), rad * t.sin(), z]);
            }
        }
        let mut faces = Vec::new();
        for r in 0..rings - 1 {
            for k in 0..around {
                let a = r * around + k;
                let b = r * around + (k + 1) % around;
                faces.push([a, b, a + around]);
                faces.push([b, b + around, a + around]);
            }
        }
        Mesh {
            vertices: Array2::from_shape_vec((rings * around, 3), coords).unwrap(),
            faces,
        }
    }

    fn rotated(mesh: &Mesh, seed: u64) -> Mesh {
        use std::f64::consts::TAU;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c): (f64, f64, f64) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        let rz = array![[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
        let ry = array![[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
        let rx = array![[1.0, 0.0, 0.0], [0.0, c.cos(), -c.sin()], [0.0, c.sin(), c.cos()]];
        let rot = rz.dot(&ry).dot(&rx);
        Mesh {
            vertices: mesh.vertices.dot(&rot.t()) + &array![[3.0, -1.0, 2.0]],
            faces: mesh.faces.clone(),
        }
    }

    #[test]
    fn single_triangle_edges() {
        let g = mesh_to_graph(&triangle()).unwrap();
        let mut lens: Vec<f64> = g.edges().iter().map(|e| e.2).collect();
        lens.sort_by(f64::total_cmp);
        assert_eq!(lens, vec![1.0, 1.0, 2f64.sqrt()]);
    }

    #[test]
    fn shared_sides_counted_once() {
        let mut mesh = triangle();
        mesh.vertices = array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        mesh.faces.push([1, 3, 2]);
        assert_eq!(mesh_to_graph(&mesh).unwrap().edges().len(), 5);
        assert_eq!(mesh_to_graph(&tetrahedron()).unwrap().edges().len(), 6);
    }

    #[test]
    fn off_round_trip_and_errors() {
        let mesh = tetrahedron();
        let parsed = parse_off(&mesh.to_off(), Path::new("t.off")).unwrap();
        assert_eq!(parsed, mesh);

        let inline = "OFF 3 1 0\n# c\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2 255 0 0\n";
        assert_eq!(parse_off(inline, Path::new("i.off")).unwrap(), triangle());

        let quad = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(
            parse_off(quad, Path::new("q.off")),
            Err(Error::NonTriangleFace { face: 0, vertices: 4 })
        ));
        for bad in ["PLY\n", "OFF\n3 1 0\n0 0 0\n", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"] {
            assert!(matches!(parse_off(bad, Path::new("b.off")), Err(Error::Parse { .. })));
        }
    }

    #[test]
    fn dijkstra_small_cases() {
        let path = WeightedGraph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(dijkstra_distances(&path, &[0]).values[[0, 2]], 2.0);
        let single = WeightedGraph::new(1, vec![]).unwrap();
        assert_eq!(dijkstra_distances(&single, &[0]).values[[0, 0]], 0.0);
        let split = WeightedGraph::new(3, vec![(0, 1, 1.0)]).unwrap();
        let d = dijkstra_distances(&split, &[0, 2]);
        assert_eq!(d.unreachable, 3);
        assert!(d.values[[0, 2]].is_infinite());
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(WeightedGraph::new(2, vec![(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::new(2, vec![(0, 2, 1.0)]).is_err());
        assert!(WeightedGraph::new(2, vec![(0, 1, 0.0)]).is_err());
    }

    #[test]
    fn identity_reduction_when_mesh_is_small() {
        let s = mesh_data_to_space("tet", &tetrahedron(), 4000, 4, 0).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.weights(), &[0.25; 4]);
        assert_eq!(s.kind(), MetricKind::Geodesic);
        assert_eq!(s.metric()[[0, 1]], 1.0);
        assert_eq!(s.metric()[[1, 2]], 2f64.sqrt());
    }

    #[test]
    fn voronoi_weights_and_geodesic_metric() {
        let mesh = cylinder(12, 8, 6.0, 0.5, 1);
        let s = mesh_data_to_space("cyl", &mesh, 60, 10, 5).unwrap();
        assert_eq!(s.len(), 10);
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.weights().iter().all(|&w| w >= 1.0 / 60.0));
        let m = s.metric();
        for i in 0..10 {
            assert_eq!(m[[i, i]], 0.0);
            for j in 0..10 {
                assert_eq!(m[[i, j]], m[[j, i]]);
            }
        }
        // Geodesics on the surface are never shorter than chords.
        let pts = s.points().unwrap().to_owned();
        for i in 0..10 {
            for j in 0..10 {
                assert!(m[[i, j]] + 1e-12 >= row_distance(&pts, i, j));
            }
        }
    }

    #[test]
    fn disconnected_mesh_is_rejected() {
        let mut mesh = tetrahedron();
        let far = array![[10.0, 0.0, 0.0], [11.0, 0.0, 0.0], [10.0, 1.0, 0.0]];
        mesh.vertices.append(Axis(0), far.view()).unwrap();
        mesh.faces.push([4, 5, 6]);
        assert!(matches!(
            mesh_data_to_space("two", &mesh, 100, 3, 0),
            Err(Error::DisconnectedMesh { .. })
        ));
    }

    #[test]
    fn rotated_cylinder_is_gw_close() {
        let mesh = cylinder(40, 10, 10.0, 0.6, 2);
        let a = mesh_data_to_space("a", &mesh, 200, 30, 9).unwrap();
        let b = mesh_data_to_space("b", &rotated(&mesh, 3), 200, 30, 9).unwrap();
        let r = solve_gw(&a, &b, &GwConfig::default()).unwrap();
        assert!(r.distance <= 2e-2, "GW = {}", r.distance);
    }
}
