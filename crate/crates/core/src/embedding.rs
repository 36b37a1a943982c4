//! Spectral step: bottom non-constant eigenvectors of `M = (I - W)'(I - W)`.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Side};

use crate::error::{LleError, Result};
use crate::rng::SampleRng;
use crate::weights::{normalize_column_signs, SparseWeightMatrix};

/// Largest N handled by the dense eigensolver under [`EigenSolver::Auto`].
pub const DENSE_LIMIT: usize = 2048;

/// Eigenvalues below this fraction of `lambda_max(M)` are treated as zero.
pub const NULL_TOLERANCE: f64 = 1e-9;

/// Minimum correlation with the constant vector for the discarded eigenvector.
pub const CONSTANT_CORRELATION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSolver {
    /// Dense for `N <= DENSE_LIMIT`, shift-invert Lanczos above.
    #[default]
    Auto,
    Dense,
    ShiftInvertLanczos,
}

#[derive(Debug, Clone)]
pub struct Embedding {
    /// `N x d`, centered, orthonormal columns.
    pub y: Mat<f64>,
    /// Rayleigh quotients `y_c' M y_c`; ascending, up to rounding inside a degenerate block.
    pub eigenvalues: Vec<f64>,
    pub dropped_eigenvalue: f64,
    pub solver: EigenSolver,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.y.ncols()
    }
}

/// `M = (I - W)'(I - W)` as a sparse symmetric matrix.
pub fn build_m(w: &SparseWeightMatrix) -> SparseColMat<usize, f64> {
    let n = w.n();
    let triplets = m_triplets(w, 0.0);
    SparseColMat::try_new_from_triplets(n, n, &triplets).expect("triplets are unique and in range")
}

/// Dense `(I - W)'(I - W)`.
pub fn build_m_dense(w: &SparseWeightMatrix) -> Mat<f64> {
    let n = w.n();
    let mut m = Mat::zeros(n, n);
    for t in m_triplets(w, 0.0) {
        m[(t.row, t.col)] = t.val;
    }
    m
}

/// Rows of `I - W` as sparse `(column, value)` lists.
fn residual_rows(w: &SparseWeightMatrix) -> Vec<Vec<(usize, f64)>> {
    (0..w.n())
        .map(|i| {
            let mut row = vec![(i, 1.0)];
            row.extend(w.row(i).iter().map(|&(j, v)| (j, -v)));
            row
        })
        .collect()
}

fn m_triplets(w: &SparseWeightMatrix, shift: f64) -> Vec<Triplet<usize, usize, f64>> {
    let n = w.n();
    let mut cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for row in residual_rows(w) {
        for &(a, va) in &row {
            for &(b, vb) in &row {
                *cols[b].entry(a).or_insert(0.0) += va * vb;
            }
        }
    }
    if shift != 0.0 {
        for (j, col) in cols.iter_mut().enumerate() {
            *col.entry(j).or_insert(0.0) += shift;
        }
    }
    cols.into_iter()
        .enumerate()
        .flat_map(|(j, col)| col.into_iter().map(move |(i, v)| Triplet::new(i, j, v)))
        .collect()
}

/// `(I - W) x`
fn apply_residual(w: &SparseWeightMatrix, x: &[f64]) -> Vec<f64> {
    (0..w.n())
        .map(|i| x[i] - w.row(i).iter().map(|&(j, v)| v * x[j]).sum::<f64>())
        .collect()
}

/// `M x = (I - W)'(I - W) x`
fn apply_m(w: &SparseWeightMatrix, x: &[f64]) -> Vec<f64> {
    let r = apply_residual(w, x);
    let mut out = r.clone();
    for (i, &ri) in r.iter().enumerate() {
        for &(j, v) in w.row(i) {
            out[j] -= v * ri;
        }
    }
    out
}

fn column(y: MatRef<'_, f64>, c: usize) -> Vec<f64> {
    (0..y.nrows()).map(|r| y[(r, c)]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Phi(Y) = sum_i ||y_i - sum_j w_ij y_j||^2` for any number of columns.
pub fn phi(y: MatRef<'_, f64>, w: &SparseWeightMatrix) -> Result<f64> {
    if y.nrows() != w.n() {
        return Err(LleError::ShapeMismatch(format!(
            "Y has {} rows, W is {}x{}",
            y.nrows(),
            w.n(),
            w.n()
        )));
    }
    Ok((0..y.ncols())
        .map(|c| {
            let r = apply_residual(w, &column(y, c));
            dot(&r, &r)
        })
        .sum())
}

/// Number of weakly connected components of the graph with an edge `i - j` for each stored weight.
pub fn connected_components(w: &SparseWeightMatrix) -> usize {
    let n = w.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for &(j, _) in w.row(i) {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

pub fn embed(w: &SparseWeightMatrix, d: usize) -> Result<Embedding> {
    embed_with(w, d, EigenSolver::Auto)
}

pub fn embed_with(w: &SparseWeightMatrix, d: usize, solver: EigenSolver) -> Result<Embedding> {
    let n = w.n();
    if d < 1 || d + 2 > n {
        return Err(LleError::InvalidArgument(format!(
            "embedding dimension must satisfy 1 <= d <= N-2 (d = {d}, N = {n})"
        )));
    }
    let components = connected_components(w);
    if components > 1 {
        return Err(LleError::DisconnectedGraph { components });
    }
    let solver = match solver {
        EigenSolver::Auto if n <= DENSE_LIMIT => EigenSolver::Dense,
        EigenSolver::Auto => EigenSolver::ShiftInvertLanczos,
        s => s,
    };
    let (values, vectors, lambda_max) = match solver {
        EigenSolver::Dense => dense_bottom(w)?,
        _ => lanczos_bottom(w, d + 1)?,
    };
    let (dropped_eigenvalue, candidates) = remove_constant_vector(&values, vectors, lambda_max)?;
    if candidates.ncols() < d {
        return Err(LleError::Numerical(format!(
            "eigensolver returned {} usable vectors, need {d}",
            candidates.ncols()
        )));
    }

    // Enforce Y'1 = 0 and Y'Y = I on the selected columns; the corrections are at rounding level.
    let mut cols: Vec<Vec<f64>> = (0..d).map(|c| column(candidates.as_ref(), c)).collect();
    for c in 0..d {
        for _ in 0..2 {
            let mean = cols[c].iter().sum::<f64>() / n as f64;
            cols[c].iter_mut().for_each(|v| *v -= mean);
            for p in 0..c {
                let proj = dot(&cols[c], &cols[p]);
                let (head, tail) = cols.split_at_mut(c);
                tail[0].iter_mut().zip(&head[p]).for_each(|(v, q)| *v -= proj * q);
            }
            let nrm = norm(&cols[c]);
            if nrm == 0.0 {
                return Err(LleError::Numerical("embedding column collapsed".into()));
            }
            cols[c].iter_mut().for_each(|v| *v /= nrm);
        }
    }

    // Columns keep the solver's ascending order. Sorting by the recomputed quotients would
    // shuffle a degenerate near-null block, whose quotients differ only by rounding.
    let eigenvalues: Vec<f64> = cols
        .iter()
        .map(|y| {
            let r = apply_residual(w, y);
            dot(&r, &r)
        })
        .collect();
    let mut y = Mat::from_fn(n, d, |r, c| cols[c][r]);
    normalize_column_signs(&mut y);
    Ok(Embedding {
        y,
        eigenvalues,
        dropped_eigenvalue,
        solver,
    })
}

/// Every eigenpair of dense `M`, ascending, plus `lambda_max`.
fn dense_bottom(w: &SparseWeightMatrix) -> Result<(Vec<f64>, Mat<f64>, f64)> {
    let m = build_m_dense(w);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LleError::Numerical(format!("dense eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    let lambda_max = values.last().copied().unwrap_or(0.0);
    Ok((values, evd.U().to_owned(), lambda_max))
}

/// Splits off the eigenvector along `1`. When several eigenvalues are numerically zero and
/// none of them is individually aligned with `1`, the near-null block is rotated so that
/// its first vector is the projection of `1` onto it.
fn remove_constant_vector(
    values: &[f64],
    vectors: Mat<f64>,
    lambda_max: f64,
) -> Result<(f64, Mat<f64>)> {
    let n = vectors.nrows();
    let tol = NULL_TOLERANCE * lambda_max.max(f64::MIN_POSITIVE);
    let null: Vec<usize> = (0..values.len()).filter(|&i| values[i] < tol).collect();
    if null.is_empty() {
        return Err(LleError::Numerical(
            "no numerically zero eigenvalue; weight rows may not sum to one".into(),
        ));
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let corr: Vec<f64> = null
        .iter()
        .map(|&c| (0..n).map(|r| vectors[(r, c)]).sum::<f64>() * inv_sqrt_n)
        .collect();
    let keep = |skip: usize| -> Vec<usize> { (0..values.len()).filter(|&c| c != skip).collect() };

    let aligned: Vec<usize> = (0..null.len())
        .filter(|&k| corr[k].abs() > CONSTANT_CORRELATION)
        .collect();
    if let [k] = aligned[..] {
        let idx = null[k];
        let cols = keep(idx);
        return Ok((
            values[idx],
            Mat::from_fn(n, cols.len(), |r, c| vectors[(r, cols[c])]),
        ));
    }

    let a_norm = corr.iter().map(|v| v * v).sum::<f64>().sqrt();
    if a_norm < CONSTANT_CORRELATION {
        return Err(LleError::Numerical(format!(
            "constant vector not found in the numerical null space (projection {a_norm:.4})"
        )));
    }
    // Householder reflector H = I - 2 v v' with H e_1 = a / |a|; its remaining columns
    // span the part of the null block orthogonal to 1.
    let c = null.len();
    let mut v: Vec<f64> = corr.iter().map(|x| -x / a_norm).collect();
    v[0] += 1.0;
    let vn = norm(&v);
    let h = |i: usize, j: usize| -> f64 {
        let id = if i == j { 1.0 } else { 0.0 };
        if vn == 0.0 {
            id
        } else {
            id - 2.0 * v[i] * v[j] / (vn * vn)
        }
    };
    let dropped = null.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
    let rest: Vec<usize> = (0..values.len()).filter(|i| !null.contains(i)).collect();
    let out = Mat::from_fn(n, c - 1 + rest.len(), |r, col| {
        if col < c - 1 {
            (0..c).map(|k| vectors[(r, null[k])] * h(k, col + 1)).sum()
        } else {
            vectors[(r, rest[col - (c - 1)])]
        }
    });
    Ok((dropped, out))
}

fn power_lambda_max(w: &SparseWeightMatrix) -> f64 {
    let n = w.n();
    let mut rng = SampleRng::new(0x6c61_6d62);
    let mut x: Vec<f64> = (0..n).map(|_| rng.uniform() - 0.5).collect();
    let mut est = 0.0;
    for _ in 0..50 {
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = apply_m(w, &x);
        est = dot(&x, &y);
        x = y;
    }
    est
}

/// Bottom `nev` eigenpairs of `M` by Lanczos on `(M + sigma I)^{-1}` with full reorthogonalization.
fn lanczos_bottom(w: &SparseWeightMatrix, nev: usize) -> Result<(Vec<f64>, Mat<f64>, f64)> {
    let n = w.n();
    let lambda_max = power_lambda_max(w);
    let scale = lambda_max.max(f64::MIN_POSITIVE);
    let mut sigma = 1e-10 * scale;
    let factor = loop {
        let triplets = m_triplets(w, sigma);
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| LleError::Numerical(format!("sparse assembly failed: {e:?}")))?;
        match a.sp_cholesky(Side::Lower) {
            Ok(f) => break f,
            Err(_) if sigma < 1e-4 * scale => sigma *= 100.0,
            Err(e) => {
                return Err(LleError::Numerical(format!(
                    "sparse Cholesky of shifted M failed: {e:?}"
                )))
            }
        }
    };
    let solve = |x: &[f64]| -> Vec<f64> {
        let mut rhs = Mat::from_fn(n, 1, |i, _| x[i]);
        factor.solve_in_place(&mut rhs);
        (0..n).map(|i| rhs[(i, 0)]).collect()
    };

    let max_steps = n.min(300.max(20 * nev));
    let tol = 1e-10 * scale;
    let mut rng = SampleRng::new(0x6c61_6e63);
    let mut q: Vec<f64> = (0..n).map(|_| rng.uniform() - 0.5).collect();
    let q_norm = norm(&q);
    q.iter_mut().for_each(|v| *v /= q_norm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    loop {
        let m = basis.len();
        let mut z = solve(&basis[m - 1]);
        let a = dot(&z, &basis[m - 1]);
        alphas.push(a);
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&z, b);
                z.iter_mut().zip(b).for_each(|(zi, bi)| *zi -= p * bi);
            }
        }
        let beta = norm(&z);
        let exhausted = beta <= 1e-14 * a.abs().max(1.0) || m >= max_steps;

        if m >= nev && (m.is_multiple_of(10) || exhausted) {
            if let Some(result) = ritz_pairs(w, &basis, &alphas, &betas, nev, tol)? {
                return Ok((result.0, result.1, lambda_max));
            }
        }
        if exhausted {
            return Err(LleError::Numerical(format!(
                "Lanczos did not converge in {m} steps"
            )));
        }
        z.iter_mut().for_each(|v| *v /= beta);
        betas.push(beta);
        basis.push(z);
    }
}

/// Converged bottom Ritz pairs, or `None` if any residual exceeds `tol`.
fn ritz_pairs(
    w: &SparseWeightMatrix,
    basis: &[Vec<f64>],
    alphas: &[f64],
    betas: &[f64],
    nev: usize,
    tol: f64,
) -> Result<Option<(Vec<f64>, Mat<f64>)>> {
    let m = alphas.len();
    let n = basis[0].len();
    let t = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LleError::Numerical(format!("tridiagonal eigensolver failed: {e:?}")))?;
    let theta = evd.S().column_vector();
    let s = evd.U();
    let mut values = Vec::with_capacity(nev);
    let mut vectors = Mat::zeros(n, nev);
    // largest theta of the inverse operator = smallest eigenvalues of M
    for k in 0..nev {
        let idx = m - 1 - k;
        let mut x = vec![0.0; n];
        for (j, b) in basis.iter().enumerate() {
            let c = s[(j, idx)];
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mx = apply_m(w, &x);
        let mu = dot(&x, &mx);
        let res = mx
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - mu * b) * (a - mu * b))
            .sum::<f64>()
            .sqrt();
        if res > tol || theta[idx] <= 0.0 {
            return Ok(None);
        }
        values.push(mu);
        for (r, v) in x.into_iter().enumerate() {
            vectors[(r, k)] = v;
        }
    }
    Ok(Some((values, vectors)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cycle on `n` nodes, each point reconstructed by its two ring neighbors with weight 1/2.
    fn cycle(n: usize) -> SparseWeightMatrix {
        SparseWeightMatrix::from_rows(
            (0..n)
                .map(|i| vec![((i + n - 1) % n, 0.5), ((i + 1) % n, 0.5)])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn m_annihilates_ones_and_is_symmetric() {
        let w = cycle(8);
        let m = build_m_dense(&w);
        for i in 0..8 {
            let s: f64 = (0..8).map(|j| m[(i, j)]).sum();
            assert!(s.abs() < 1e-12);
            for j in 0..8 {
                assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
        let sp = build_m(&w);
        assert_eq!(sp.nrows(), 8);
    }

    #[test]
    fn cycle_eigenvalues_match_dense_oracle() {
        // For the circulant M of the uniform cycle, the eigenvalue at frequency k is
        // (1 - cos(2 pi k / n))^2. Independent check: a dense eigensolve of M itself.
        let n = 8;
        let w = cycle(n);
        let m = build_m_dense(&w);
        let dense = m.self_adjoint_eigenvalues(Side::Lower).unwrap();
        let mut closed: Vec<f64> = (0..n)
            .map(|k| (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).powi(2))
            .collect();
        closed.sort_by(f64::total_cmp);
        for (a, b) in dense.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-12, "{dense:?} vs {closed:?}");
        }
    }

    #[test]
    fn cycle_embedding_spans_first_harmonic() {
        let n = 8;
        let e = embed(&cycle(n), 2).unwrap();
        let t = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let c: Vec<f64> = (0..n).map(|i| t(i).cos()).collect();
        let s: Vec<f64> = (0..n).map(|i| t(i).sin()).collect();
        // project cos and sin onto span(Y); both must lie in it
        for v in [c, s] {
            let nv = norm(&v);
            let proj: f64 = (0..2)
                .map(|k| {
                    let p = dot(&v, &column(e.y.as_ref(), k));
                    p * p
                })
                .sum::<f64>()
                .sqrt();
            assert!((proj / nv - 1.0).abs() < 1e-10);
        }
        let expected = (1.0 - (2.0 * std::f64::consts::PI / n as f64).cos()).powi(2);
        for ev in &e.eigenvalues {
            assert!((ev - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn disconnected_graph_reports_components() {
        let w = SparseWeightMatrix::from_rows(vec![
            vec![(1, 1.0)],
            vec![(0, 1.0)],
            vec![(3, 1.0)],
            vec![(2, 1.0)],
        ])
        .unwrap();
        assert_eq!(connected_components(&w), 2);
        match embed(&w, 1) {
            Err(LleError::DisconnectedGraph { components }) => assert_eq!(components, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn embed_rejects_bad_dimension() {
        assert!(embed(&cycle(5), 4).is_err());
        assert!(embed(&cycle(5), 0).is_err());
    }

    #[test]
    fn phi_on_three_point_chain() {
        // 0 <- 1 (endpoint uses its only neighbor), 1 <- (0, 2) uniformly, 2 <- 1
        let w = SparseWeightMatrix::from_rows(vec![
            vec![(1, 1.0)],
            vec![(0, 0.5), (2, 0.5)],
            vec![(1, 1.0)],
        ])
        .unwrap();
        let y = Mat::from_fn(3, 1, |i, _| i as f64);
        // residuals: 0 - 1, 1 - 1, 2 - 1
        assert!((phi(y.as_ref(), &w).unwrap() - 2.0).abs() < 1e-15);
        let bad = Mat::<f64>::zeros(2, 1);
        assert!(matches!(phi(bad.as_ref(), &w), Err(LleError::ShapeMismatch(_))));
    }

    #[test]
    fn phi_zero_at_fixed_point() {
        let w = cycle(6);
        let y = Mat::from_fn(6, 2, |_, c| c as f64 + 1.0);
        assert!(phi(y.as_ref(), &w).unwrap().abs() < 1e-15);
    }

    #[test]
    fn lanczos_matches_dense_on_irregular_cycle() {
        // uneven weights break the double eigenvalues of the uniform cycle
        let n = 40;
        let mut rng = SampleRng::new(9);
        let w = SparseWeightMatrix::from_rows(
            (0..n)
                .map(|i| {
                    let a = 0.2 + 0.6 * rng.uniform();
                    vec![((i + n - 1) % n, a), ((i + 1) % n, 1.0 - a)]
                })
                .collect(),
        )
        .unwrap();
        let a = embed_with(&w, 3, EigenSolver::Dense).unwrap();
        let b = embed_with(&w, 3, EigenSolver::ShiftInvertLanczos).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
