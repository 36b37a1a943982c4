//! Reconstruction weights.
//!
//! Two solvers are provided for each neighborhood matrix `X_i` (rows `eta_j - x_i`):
//!
//! * [`lle_weights`]: the classical regularized solve `(G + delta I) w = 1`,
//!   `G = X_i X_i'`, `delta = (Delta / K) trace(G)`, followed by normalization.
//! * [`ldr_weights`]: weights computed against the best rank-`d` representation
//!   `U_1 L_1 V_1'` of `X_i`. They are the minimum-norm vector in
//!   `span{u_{d+1}, ..., u_K}` with entries summing to one, which has the closed form
//!   `w = U_2 U_2' 1 / (1' U_2 U_2' 1)`.
//!
//! The second method needs no regularization when `K > D` and is insensitive to
//! rescaling of the neighborhood.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::datasets::PointCloud;
use crate::error::{LleError, Result};
use crate::neighbors::{neighborhood_matrix, NeighborGraph, NeighborhoodMatrix};

/// Regularization constant used when none is given.
pub const DEFAULT_DELTA: f64 = 1e-9;

/// Below this reciprocal condition number an unregularized Gram matrix is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Relative gap `(lambda_d - lambda_{d+1}) / lambda_1` below which the rank-`d` split is flagged.
pub const GAP_WARNING: f64 = 1e-6;

/// Floor on `1' U_2 U_2' 1`, per neighbor.
pub const GENERAL_POSITION_EPS: f64 = 1e-12;

/// SVD summary of one neighborhood, split at the target dimension `d`.
#[derive(Debug, Clone)]
pub struct NeighborhoodSpectrum {
    pub center_index: usize,
    /// `lambda_1 >= ... >= lambda_K >= 0`, zero-padded when `D < K`.
    pub singular_values: Vec<f64>,
    /// `K x d` left singular vectors of the leading singular values.
    pub u1: Mat<f64>,
    /// `K x (K - d)` remaining left singular vectors.
    pub u2: Mat<f64>,
    /// `(1/K) 1' U_1 U_1' 1`; strictly below one iff the projected points are in general position.
    pub alpha: f64,
    pub d: usize,
    pub radius: f64,
    pub gap_warning: bool,
}

impl NeighborhoodSpectrum {
    pub fn k(&self) -> usize {
        self.singular_values.len()
    }

    /// 1-based singular value `lambda_j` (zero beyond the padded length).
    pub fn lambda(&self, j: usize) -> f64 {
        self.singular_values.get(j - 1).copied().unwrap_or(0.0)
    }

    /// `1' U_2 U_2' 1 = ||U_2' 1||^2`.
    pub fn complement_mass(&self) -> f64 {
        let k = self.k();
        (0..self.u2.ncols())
            .map(|c| {
                let s: f64 = (0..k).map(|r| self.u2[(r, c)]).sum();
                s * s
            })
            .sum()
    }
}

/// Flips each column so that its entry of largest magnitude is positive (first such entry on ties).
pub(crate) fn normalize_column_signs(m: &mut Mat<f64>) {
    for c in 0..m.ncols() {
        let mut best = 0;
        for r in 1..m.nrows() {
            if m[(r, c)].abs() > m[(best, c)].abs() {
                best = r;
            }
        }
        if m[(best, c)] < 0.0 {
            for r in 0..m.nrows() {
                m[(r, c)] = -m[(r, c)];
            }
        }
    }
}

pub fn neighborhood_spectrum(xi: &NeighborhoodMatrix, d: usize) -> Result<NeighborhoodSpectrum> {
    let k = xi.k();
    if d < 1 || d >= k {
        return Err(LleError::InvalidArgument(format!(
            "target dimension must satisfy 1 <= d < K (d = {d}, K = {k})"
        )));
    }
    let svd = xi
        .rows
        .svd()
        .map_err(|e| LleError::Numerical(format!("neighborhood SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let mut singular_values = vec![0.0; k];
    for (j, v) in singular_values.iter_mut().enumerate().take(s.nrows()) {
        *v = s[j];
    }
    let mut u = svd.U().to_owned();
    normalize_column_signs(&mut u);
    let u1 = u.subcols(0, d).to_owned();
    let u2 = u.subcols(d, k - d).to_owned();

    let mass1: f64 = (0..d)
        .map(|c| {
            let s: f64 = (0..k).map(|r| u1[(r, c)]).sum();
            s * s
        })
        .sum();
    let alpha = (mass1 / k as f64).clamp(0.0, 1.0);

    let l1 = singular_values[0];
    let gap_warning = l1 <= 0.0 || (singular_values[d - 1] - singular_values[d]) / l1 < GAP_WARNING;

    Ok(NeighborhoodSpectrum {
        center_index: xi.center_index,
        singular_values,
        u1,
        u2,
        alpha,
        d,
        radius: xi.radius,
        gap_warning,
    })
}

/// Weight vector aligned with the neighbor order of its neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &WeightVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn normalized(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if sum == 0.0 || !sum.is_finite() {
            return Err(LleError::DegenerateWeights);
        }
        let w: Vec<f64> = raw.into_iter().map(|v| v / sum).collect();
        if w.iter().any(|v| !v.is_finite()) {
            return Err(LleError::DegenerateWeights);
        }
        Ok(Self(w))
    }
}

pub(crate) fn gram(xi: MatRef<'_, f64>) -> Mat<f64> {
    xi * xi.transpose()
}

/// Ascending eigenvalues of a small symmetric matrix.
fn symmetric_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| LleError::Numerical(format!("eigenvalue computation failed: {e:?}")))
}

fn reciprocal_condition(eigs: &[f64]) -> f64 {
    let max = eigs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eigs.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Classical LLE weights: solve `(G + delta I) w = 1` and normalize, `delta = (Delta/K) trace(G)`.
pub fn lle_weights(xi: &NeighborhoodMatrix, delta: f64) -> Result<WeightVector> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(LleError::InvalidArgument(format!(
            "regularization constant must be finite and non-negative, got {delta}"
        )));
    }
    let k = xi.k();
    let mut a = gram(xi.rows.as_ref());
    let trace: f64 = (0..k).map(|i| a[(i, i)]).sum();
    let shift = delta / k as f64 * trace;
    for i in 0..k {
        a[(i, i)] += shift;
    }
    let rcond = reciprocal_condition(&symmetric_eigenvalues(&a)?);
    let floor = if delta == 0.0 { SINGULAR_RCOND } else { f64::EPSILON };
    if rcond.is_nan() || rcond < floor {
        return Err(LleError::SingularNeighborhood { rcond });
    }
    let mut rhs = Mat::<f64>::ones(k, 1);
    a.partial_piv_lu().solve_in_place(&mut rhs);
    WeightVector::normalized((0..k).map(|i| rhs[(i, 0)]).collect())
}

/// Unregularized classical weights for a possibly singular `G`: the `Delta -> 0+` limit of
/// [`lle_weights`].
///
/// When `1` has a component in the null space of `G`, the limit is that component
/// (normalized); otherwise it is `G^+ 1`. Agrees with [`lle_weights`] at `Delta = 0` whenever
/// `G` is nonsingular.
pub fn lle_weights_pseudoinverse(xi: &NeighborhoodMatrix) -> Result<WeightVector> {
    let k = xi.k();
    let g = gram(xi.rows.as_ref());
    let evd = g
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LleError::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let max = (0..k).fold(0.0_f64, |m, j| m.max(s[j].abs()));
    let cutoff = max * k as f64 * f64::EPSILON;
    let sums: Vec<f64> = (0..k).map(|j| (0..k).map(|r| u[(r, j)]).sum()).collect();
    let null_mass: f64 = (0..k).filter(|&j| s[j] <= cutoff).map(|j| sums[j] * sums[j]).sum();
    let mut w = vec![0.0; k];
    for j in 0..k {
        let coef = if null_mass > GENERAL_POSITION_EPS * k as f64 {
            if s[j] <= cutoff { sums[j] } else { 0.0 }
        } else if s[j] > cutoff {
            sums[j] / s[j]
        } else {
            0.0
        };
        for (r, wr) in w.iter_mut().enumerate() {
            *wr += u[(r, j)] * coef;
        }
    }
    WeightVector::normalized(w)
}

/// Weights from a precomputed spectrum: `w = U_2 U_2' 1 / (1' U_2 U_2' 1)`.
pub fn ldr_weights_from_spectrum(spec: &NeighborhoodSpectrum) -> Result<WeightVector> {
    let k = spec.k();
    let u2 = &spec.u2;
    let proj: Vec<f64> = (0..u2.ncols())
        .map(|c| (0..k).map(|r| u2[(r, c)]).sum())
        .collect();
    let mass: f64 = proj.iter().map(|p| p * p).sum();
    if mass.is_nan() || mass <= GENERAL_POSITION_EPS * k as f64 {
        return Err(LleError::GeneralPosition {
            alpha: spec.alpha,
            mass,
        });
    }
    let w = (0..k)
        .map(|r| {
            (0..u2.ncols())
                .map(|c| u2[(r, c)] * proj[c])
                .sum::<f64>()
                / mass
        })
        .collect();
    Ok(WeightVector(w))
}

/// Weights against the best rank-`d` representation of the neighborhood.
pub fn ldr_weights(xi: &NeighborhoodMatrix, d: usize) -> Result<WeightVector> {
    ldr_weights_from_spectrum(&neighborhood_spectrum(xi, d)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightMethod {
    /// Regularized classical weights with constant `Delta`.
    Classical { delta: f64 },
    /// Low-dimensional representation at the target dimension.
    Ldr,
}

impl WeightMethod {
    pub fn name(&self) -> &'static str {
        match self {
            WeightMethod::Classical { .. } => "classical",
            WeightMethod::Ldr => "ldr",
        }
    }
}

/// `N x N` row-stochastic weight matrix stored by rows; row `i` is nonzero only at the neighbors of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeightMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseWeightMatrix {
    /// Validates zero diagonal, in-range columns and unit row sums (within 1e-10).
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&(j, _)| j >= n || j == i) {
                return Err(LleError::InvalidArgument(format!(
                    "row {i}: column out of range or on the diagonal"
                )));
            }
            let sum: f64 = row.iter().map(|&(_, v)| v).sum();
            if (sum - 1.0).abs() > 1e-10 {
                return Err(LleError::InvalidArgument(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .filter(|&&(c, _)| c == j)
            .map(|&(_, v)| v)
            .sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v).sum())
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.n();
        let mut m = Mat::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Coordinate format, one `i,j,value` line per stored entry.
    pub fn write_coo<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                writeln!(out, "{i},{j},{v:?}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WeightAssembly {
    pub matrix: SparseWeightMatrix,
    pub weights: Vec<WeightVector>,
    /// Per-point spectra at dimension `d`; empty for the classical method when `d >= K`.
    pub spectra: Vec<NeighborhoodSpectrum>,
}

/// Computes every neighborhood's weights and assembles `W`.
///
/// `d` is the target embedding dimension: it selects the rank of the low-dimensional
/// representation for [`WeightMethod::Ldr`] and the split reported in the spectra.
pub fn assemble_weight_matrix(
    cloud: &PointCloud,
    graph: &NeighborGraph,
    method: WeightMethod,
    d: usize,
) -> Result<WeightAssembly> {
    let n = cloud.len();
    if graph.len() != n {
        return Err(LleError::ShapeMismatch(format!(
            "graph has {} rows but cloud has {n} points",
            graph.len()
        )));
    }
    let k = graph.k();
    if let WeightMethod::Ldr = method {
        if d < 1 || d >= k {
            return Err(LleError::InvalidArgument(format!(
                "low-dimensional weights need 1 <= d < K (d = {d}, K = {k})"
            )));
        }
    }
    let want_spectra = d >= 1 && d < k;
    let mut rows = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut spectra = Vec::with_capacity(if want_spectra { n } else { 0 });
    for i in 0..n {
        let xi = neighborhood_matrix(cloud, graph, i)?;
        let spectrum = if want_spectra {
            Some(neighborhood_spectrum(&xi, d).map_err(|e| e.at_point(i))?)
        } else {
            None
        };
        let w = match method {
            WeightMethod::Classical { delta } => lle_weights(&xi, delta),
            WeightMethod::Ldr => ldr_weights_from_spectrum(spectrum.as_ref().expect("d < K")),
        }
        .map_err(|e| e.at_point(i))?;
        rows.push(
            graph
                .neighbors(i)
                .iter()
                .copied()
                .zip(w.values().iter().copied())
                .collect(),
        );
        weights.push(w);
        spectra.extend(spectrum);
    }
    Ok(WeightAssembly {
        matrix: SparseWeightMatrix { rows },
        weights,
        spectra,
    })
}

/// One line per point: `i, lambda_1..lambda_K, alpha_i, r(i)`.
pub fn write_spectra_csv<W: Write>(spectra: &[NeighborhoodSpectrum], out: &mut W) -> std::io::Result<()> {
    for s in spectra {
        write!(out, "{}", s.center_index)?;
        for l in &s.singular_values {
            write!(out, ",{l:?}")?;
        }
        writeln!(out, ",{:?},{:?}", s.alpha, s.radius)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nbhd(rows: &[&[f64]]) -> NeighborhoodMatrix {
        let k = rows.len();
        let d = rows[0].len();
        NeighborhoodMatrix::from_rows(Mat::from_fn(k, d, |i, j| rows[i][j]))
    }

    fn cross() -> NeighborhoodMatrix {
        nbhd(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]])
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn spectrum_of_segment() {
        let s = neighborhood_spectrum(&nbhd(&[&[-1.0, 0.0], &[1.0, 0.0]]), 1).unwrap();
        assert_close(&s.singular_values, &[2f64.sqrt(), 0.0], 1e-12);
        let h = 0.5f64.sqrt();
        assert_close(&[s.u2[(0, 0)], s.u2[(1, 0)]], &[h, h], 1e-12);
        assert!(s.alpha.abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_cross() {
        let s = neighborhood_spectrum(&cross(), 2).unwrap();
        let r = 2f64.sqrt();
        assert_close(&s.singular_values, &[r, r, 0.0, 0.0], 1e-12);
        assert!(s.alpha.abs() < 1e-12);
        assert!(!s.gap_warning);
        // d = 1 splits the repeated singular value
        assert!(neighborhood_spectrum(&cross(), 1).unwrap().gap_warning);
    }

    #[test]
    fn spectrum_rejects_bad_dimension() {
        assert!(matches!(
            neighborhood_spectrum(&cross(), 4),
            Err(LleError::InvalidArgument(_))
        ));
        assert!(neighborhood_spectrum(&cross(), 0).is_err());
    }

    #[test]
    fn spectrum_sign_convention() {
        let s = neighborhood_spectrum(&nbhd(&[&[3.0, 1.0], &[-1.0, 2.0], &[0.5, -2.0]]), 1).unwrap();
        for m in [&s.u1, &s.u2] {
            for c in 0..m.ncols() {
                let col: Vec<f64> = (0..m.nrows()).map(|r| m[(r, c)]).collect();
                let big = col.iter().copied().fold(0.0_f64, |a, v| if v.abs() > a.abs() { v } else { a });
                assert!(big > 0.0);
            }
        }
    }

    #[test]
    fn classical_cross_is_uniform() {
        for delta in [1e-9, 1e-3, 1.0] {
            assert_close(lle_weights(&cross(), delta).unwrap().values(), &[0.25; 4], 1e-9);
        }
        // G is singular at Delta = 0; the zero-regularization limit is still uniform
        assert_close(lle_weights_pseudoinverse(&cross()).unwrap().values(), &[0.25; 4], 1e-12);
    }

    #[test]
    fn classical_two_neighbors() {
        // minimize a^2 + 4(1-a)^2  ->  a = 0.8
        let w = lle_weights(&nbhd(&[&[1.0, 0.0], &[0.0, 2.0]]), 0.0).unwrap();
        assert_close(w.values(), &[0.8, 0.2], 1e-12);
        let p = lle_weights_pseudoinverse(&nbhd(&[&[1.0, 0.0], &[0.0, 2.0]])).unwrap();
        assert_close(p.values(), &[0.8, 0.2], 1e-12);
    }

    #[test]
    fn classical_singular_without_regularization() {
        let err = lle_weights(&nbhd(&[&[-1.0, 0.0], &[1.0, 0.0]]), 0.0).unwrap_err();
        assert!(matches!(err, LleError::SingularNeighborhood { .. }));
        assert!(lle_weights(&cross(), 0.0).is_err());
        assert!(lle_weights(&cross(), -1.0).is_err());
    }

    #[test]
    fn classical_large_regularization_tends_to_uniform() {
        let w = lle_weights(&cross(), 1e6).unwrap();
        assert_close(w.values(), &[0.25; 4], 1e-6);
        let w = lle_weights(&nbhd(&[&[1.0, 0.0], &[0.0, 2.0], &[0.3, 0.7]]), 1e6).unwrap();
        assert_close(w.values(), &[1.0 / 3.0; 3], 1e-6);
    }

    #[test]
    fn ldr_segment_and_cross() {
        let w = ldr_weights(&nbhd(&[&[-1.0, 0.0], &[1.0, 0.0]]), 1).unwrap();
        assert_close(w.values(), &[0.5, 0.5], 1e-12);
        let w = ldr_weights(&cross(), 2).unwrap();
        assert_close(w.values(), &[0.25; 4], 1e-12);
    }

    #[test]
    fn ldr_general_position_violation() {
        // three collinear points through the center direction: 1 lies in span(U1) for d = 1
        let xi = nbhd(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let err = ldr_weights(&xi, 1).unwrap_err();
        match err {
            LleError::GeneralPosition { alpha, .. } => assert!((alpha - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ldr_tolerates_zero_rows() {
        let xi = nbhd(&[&[0.0, 0.0], &[1.0, 0.0], &[-1.0, 0.1]]);
        let w = ldr_weights(&xi, 1).unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-12);
        let w = lle_weights(&xi, 1e-3).unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_matrix_validation_and_coo() {
        assert!(SparseWeightMatrix::from_rows(vec![vec![(0, 1.0)], vec![(0, 1.0)]]).is_err());
        assert!(SparseWeightMatrix::from_rows(vec![vec![(1, 0.5)], vec![(0, 1.0)]]).is_err());
        let w = SparseWeightMatrix::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)]]).unwrap();
        let mut buf = Vec::new();
        w.write_coo(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,1,1.0\n1,0,1.0\n");
        assert_eq!(w.get(0, 1), 1.0);
        assert_eq!(w.get(0, 0), 0.0);
    }
}
