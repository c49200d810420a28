//! Patch cloud, nearest-neighbour graph and geodesic distances.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::linalg::Matrix;

/// One row per pixel (row-major pixel order), holding the `rho x rho`
/// window centred there, itself vectorized row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    rho: usize,
    image_rows: usize,
    image_cols: usize,
    /// Row-major `n_points x dim`.
    data: Vec<f64>,
}

impl PatchMatrix {
    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn n_points(&self) -> usize {
        self.image_rows * self.image_cols
    }

    pub fn dim(&self) -> usize {
        self.rho * self.rho
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.image_rows, self.image_cols)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.data[k * d..(k + 1) * d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column-major `n_points x dim` copy: column `c` collects coordinate `c`
    /// of every patch.
    pub fn to_matrix(&self) -> Matrix {
        let (n, d) = (self.n_points(), self.dim());
        let mut m = Matrix::zeros(n, d);
        for k in 0..n {
            for (c, &v) in self.row(k).iter().enumerate() {
                m[(k, c)] = v;
            }
        }
        m
    }

    /// Inverse of [`PatchMatrix::to_matrix`].
    pub fn from_matrix(m: &Matrix, rho: usize, image_rows: usize, image_cols: usize) -> Result<Self> {
        if m.rows() != image_rows * image_cols || m.cols() != rho * rho {
            return Err(Error::DimensionMismatch {
                expected: (image_rows * image_cols, rho * rho),
                found: m.shape(),
            });
        }
        let (n, d) = (m.rows(), m.cols());
        let mut data = vec![0.0; n * d];
        for c in 0..d {
            for (k, &v) in m.col(c).iter().enumerate() {
                data[k * d + c] = v;
            }
        }
        Ok(Self {
            rho,
            image_rows,
            image_cols,
            data,
        })
    }
}

/// Mirror index for offsets up to one image length outside `0..len`
/// (`-1 -> 1`, `len -> len - 2`).
fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r.clamp(0, n - 1) as usize
}

pub fn check_rho(rho: usize, rows: usize, cols: usize) -> Result<()> {
    if rho.is_multiple_of(2) {
        return Err(Error::param("rho", "patch side must be odd"));
    }
    if rho < 3 {
        return Err(Error::param("rho", "patch side must be at least 3"));
    }
    if rho > rows.min(cols) {
        return Err(Error::param(
            "rho",
            alloc::format!("patch side {rho} exceeds the image size {rows}x{cols}"),
        ));
    }
    Ok(())
}

/// Patches centred at every pixel; coordinates outside the image are
/// reflected about the border (without repeating the edge pixel).
pub fn extract_patches(image: &GrayImage, rho: usize) -> Result<PatchMatrix> {
    let (rows, cols) = (image.rows(), image.cols());
    check_rho(rho, rows, cols)?;
    let half = (rho / 2) as isize;
    let dim = rho * rho;
    let mut data = Vec::with_capacity(rows * cols * dim);
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            for di in -half..=half {
                let r = reflect(i + di, rows);
                for dj in -half..=half {
                    data.push(image.get(r, reflect(j + dj, cols)));
                }
            }
        }
    }
    Ok(PatchMatrix {
        rho,
        image_rows: rows,
        image_cols: cols,
        data,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    delta: usize,
    /// Per vertex, `(neighbour, weight)` sorted by neighbour index.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    /// Undirected graph from an edge list (duplicates keep the smaller
    /// weight). `delta` is informational.
    pub fn from_edges(n_vertices: usize, edges: &[(usize, usize, f64)], delta: usize) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n_vertices];
        for &(a, b, w) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::param("edges", "vertex index out of range"));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::param("edges", "weights must be finite and non-negative"));
            }
            if a == b {
                continue;
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            list.dedup_by_key(|e| e.0);
        }
        Ok(Self { delta, adjacency })
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn neighbors(&self, k: usize) -> &[(usize, f64)] {
        &self.adjacency[k]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        let list = &self.adjacency[a];
        list.binary_search_by_key(&b, |e| e.0).ok().map(|i| list[i].1)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Each point is joined to its `delta` nearest other points (Euclidean
/// distance between patch rows, ties to the lower index); the edge set is
/// then symmetrized by union.
pub fn knn_graph(patches: &PatchMatrix, delta: usize) -> Result<NeighborGraph> {
    let n = patches.n_points();
    if delta == 0 || delta >= n {
        return Err(Error::param(
            "delta",
            alloc::format!("neighbour count must lie in 1..{n}, got {delta}"),
        ));
    }
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for k in 0..n {
        scratch.clear();
        let pk = patches.row(k);
        scratch.extend(
            (0..n)
                .filter(|&t| t != k)
                .map(|t| (squared_distance(pk, patches.row(t)), t)),
        );
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if delta < scratch.len() {
            scratch.select_nth_unstable_by(delta - 1, by_key);
        }
        let nearest = &mut scratch[..delta];
        nearest.sort_by(by_key);
        for &(d2, t) in nearest.iter() {
            let w = libm::sqrt(d2);
            adjacency[k].push((t, w));
            adjacency[t].push((k, w));
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|e| e.0);
        list.dedup_by_key(|e| e.0);
    }
    Ok(NeighborGraph { delta, adjacency })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicAlgorithm {
    Floyd,
    DijkstraAll,
}

/// Symmetric all-pairs shortest-path distances.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicMatrix {
    d: Matrix,
}

impl GeodesicMatrix {
    /// Wraps a distance matrix after checking it is square, finite,
    /// non-negative, zero on the diagonal and symmetric.
    pub fn new(d: Matrix) -> Result<Self> {
        if !d.is_square() {
            return Err(Error::InvalidMatrix("distance matrix must be square".into()));
        }
        let n = d.rows();
        let scale = d.max_abs();
        for j in 0..n {
            if d[(j, j)] != 0.0 {
                return Err(Error::InvalidMatrix(alloc::format!(
                    "diagonal entry {j} is {} instead of 0",
                    d[(j, j)]
                )));
            }
            for (i, &x) in d.col(j).iter().enumerate() {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::InvalidMatrix(alloc::format!(
                        "entry ({i}, {j}) = {x} is not a finite non-negative distance"
                    )));
                }
            }
        }
        let asym = d.asymmetry();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self { d })
    }

    pub fn n(&self) -> usize {
        self.d.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.d
    }

    pub fn into_matrix(self) -> Matrix {
        self.d
    }
}

pub fn geodesic_distances(graph: &NeighborGraph, algorithm: GeodesicAlgorithm) -> Result<GeodesicMatrix> {
    let d = match algorithm {
        GeodesicAlgorithm::Floyd => floyd(graph),
        GeodesicAlgorithm::DijkstraAll => dijkstra_all(graph),
    }?;
    Ok(GeodesicMatrix { d })
}

fn disconnected(d: &Matrix, delta: usize) -> Option<Error> {
    for j in 0..d.cols() {
        if let Some(i) = d.col(j).iter().position(|x| x.is_infinite()) {
            return Some(Error::DisconnectedGraph { from: j, to: i, delta });
        }
    }
    None
}

fn floyd(graph: &NeighborGraph) -> Result<Matrix> {
    let n = graph.n_vertices();
    // Symmetric throughout, so the column-major buffer doubles as row-major.
    let mut d = Matrix::zeros(n, n);
    d.as_mut_slice().fill(f64::INFINITY);
    for a in 0..n {
        d[(a, a)] = 0.0;
        for &(b, w) in graph.neighbors(a) {
            d[(a, b)] = w;
        }
    }
    let data = d.as_mut_slice();
    let mut row_k = vec![0.0; n];
    for k in 0..n {
        row_k.copy_from_slice(&data[k * n..(k + 1) * n]);
        for i in 0..n {
            let dik = row_k[i];
            if dik.is_infinite() {
                continue;
            }
            let row_i = &mut data[i * n..(i + 1) * n];
            for (x, &dkj) in row_i.iter_mut().zip(&row_k) {
                let via = dik + dkj;
                if via < *x {
                    *x = via;
                }
            }
        }
    }
    if let Some(err) = disconnected(&d, graph.delta()) {
        return Err(err);
    }
    Ok(d)
}

#[derive(PartialEq)]
struct Candidate {
    dist: f64,
    vertex: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, then vertex index.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra_all(graph: &NeighborGraph) -> Result<Matrix> {
    let n = graph.n_vertices();
    let mut d = Matrix::zeros(n, n);
    let mut heap = BinaryHeap::new();
    for s in 0..n {
        let dist = d.col_mut(s);
        dist.fill(f64::INFINITY);
        dist[s] = 0.0;
        heap.clear();
        heap.push(Candidate { dist: 0.0, vertex: s });
        while let Some(Candidate { dist: du, vertex: u }) = heap.pop() {
            if du > dist[u] {
                continue;
            }
            for &(v, w) in graph.neighbors(u) {
                let alt = du + w;
                if alt < dist[v] {
                    dist[v] = alt;
                    heap.push(Candidate { dist: alt, vertex: v });
                }
            }
        }
        if let Some(t) = dist.iter().position(|x| x.is_infinite()) {
            return Err(Error::DisconnectedGraph {
                from: s,
                to: t,
                delta: graph.delta(),
            });
        }
    }
    // Both directions are shortest-path lengths that may differ in the last
    // bit (different summation order); keep the smaller one.
    for j in 0..n {
        for i in j + 1..n {
            let m = d[(i, j)].min(d[(j, i)]);
            d[(i, j)] = m;
            d[(j, i)] = m;
        }
    }
    Ok(d)
}
