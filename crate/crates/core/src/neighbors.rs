//! Exact K-nearest-neighbor graph and centered neighborhood matrices.

use std::io::Write;

use faer::Mat;

use crate::datasets::PointCloud;
use crate::error::{LleError, Result};

/// Row `i` holds the `k` nearest neighbors of point `i` (self excluded),
/// ordered by increasing distance; equal distances are ordered by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    k: usize,
    indices: Vec<Vec<usize>>,
}

impl NeighborGraph {
    /// Builds a graph from explicit neighbor lists, checking the structural invariants.
    pub fn from_lists(indices: Vec<Vec<usize>>) -> Result<Self> {
        let n = indices.len();
        let k = indices.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(LleError::InvalidArgument("neighbor lists must be non-empty".into()));
        }
        for (i, row) in indices.iter().enumerate() {
            if row.len() != k {
                return Err(LleError::ShapeMismatch(format!(
                    "row {i} has {} neighbors, expected {k}",
                    row.len()
                )));
            }
            for (a, &j) in row.iter().enumerate() {
                if j >= n || j == i || row[..a].contains(&j) {
                    return Err(LleError::InvalidArgument(format!(
                        "row {i}: invalid neighbor index {j}"
                    )));
                }
            }
        }
        Ok(Self { k, indices })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.indices.iter().map(Vec::as_slice)
    }

    /// One line of comma-separated indices per point.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for row in &self.indices {
            let line: Vec<String> = row.iter().map(usize::to_string).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn squared_distance(cloud: &PointCloud, i: usize, j: usize) -> f64 {
    let x = cloud.as_mat();
    (0..x.ncols())
        .map(|c| {
            let d = x[(i, c)] - x[(j, c)];
            d * d
        })
        .sum()
}

/// Brute-force exact K-nearest neighbors under Euclidean distance.
pub fn knn(cloud: &PointCloud, k: usize) -> Result<NeighborGraph> {
    let n = cloud.len();
    if k < 1 || k >= n {
        return Err(LleError::InvalidArgument(format!(
            "K must satisfy 1 <= K <= N-1 (K = {k}, N = {n})"
        )));
    }
    let mut indices = Vec::with_capacity(n);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        candidates.clear();
        candidates.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(cloud, i, j), j)),
        );
        let by_distance =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k - 1, by_distance);
            candidates.truncate(k);
        }
        candidates.sort_unstable_by(by_distance);
        indices.push(candidates.iter().map(|&(_, j)| j).collect());
    }
    Ok(NeighborGraph { k, indices })
}

/// `K x D` matrix with rows `eta_j - x_i`, in the graph's neighbor order.
#[derive(Debug, Clone)]
pub struct NeighborhoodMatrix {
    pub center_index: usize,
    pub rows: Mat<f64>,
    /// `max_j ||eta_j - x_i||`
    pub radius: f64,
}

impl NeighborhoodMatrix {
    /// Wraps an explicit neighborhood (rows already centered).
    pub fn from_rows(rows: Mat<f64>) -> Self {
        let radius = (0..rows.nrows())
            .map(|r| row_norm(&rows, r))
            .fold(0.0, f64::max);
        Self {
            center_index: 0,
            rows,
            radius,
        }
    }

    pub fn k(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let rows = Mat::from_fn(self.k(), self.dim(), |i, j| c * self.rows[(i, j)]);
        Self {
            center_index: self.center_index,
            radius: self.radius * c.abs(),
            rows,
        }
    }
}

fn row_norm(m: &Mat<f64>, r: usize) -> f64 {
    (0..m.ncols()).map(|c| m[(r, c)] * m[(r, c)]).sum::<f64>().sqrt()
}

pub fn neighborhood_matrix(
    cloud: &PointCloud,
    graph: &NeighborGraph,
    i: usize,
) -> Result<NeighborhoodMatrix> {
    if graph.len() != cloud.len() {
        return Err(LleError::ShapeMismatch(format!(
            "graph has {} rows but cloud has {} points",
            graph.len(),
            cloud.len()
        )));
    }
    if i >= cloud.len() {
        return Err(LleError::InvalidArgument(format!(
            "point index {i} out of range (N = {})",
            cloud.len()
        )));
    }
    let x = cloud.as_mat();
    let nb = graph.neighbors(i);
    let rows = Mat::from_fn(nb.len(), cloud.dim(), |r, c| x[(nb[r], c)] - x[(i, c)]);
    let mut m = NeighborhoodMatrix::from_rows(rows);
    m.center_index = i;
    Ok(m)
}

/// `r_max = max_i r(i)` over every neighborhood of the graph.
pub fn max_radius(cloud: &PointCloud, graph: &NeighborGraph) -> Result<f64> {
    (0..cloud.len()).try_fold(0.0_f64, |acc, i| {
        Ok(acc.max(neighborhood_matrix(cloud, graph, i)?.radius))
    })
}
