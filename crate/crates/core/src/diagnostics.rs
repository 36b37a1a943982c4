//! Verification harnesses: reconstruction errors, the weight-perturbation experiment and its
//! bound, the pre-image objective check, and embedding quality statistics.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::datasets::{GeneratedSample, PointCloud};
use crate::embedding::{phi, Embedding};
use crate::error::{LleError, Result};
use crate::neighbors::{knn, max_radius, NeighborhoodMatrix};
use crate::rng::SampleRng;
use crate::weights::{
    assemble_weight_matrix, ldr_weights, lle_weights, lle_weights_pseudoinverse,
    neighborhood_spectrum, SparseWeightMatrix, WeightMethod, WeightVector,
};

/// `phi_i(w) = w' X_i X_i' w = ||sum_j w_j (eta_j - x_i)||^2`.
pub fn reconstruction_error(xi: &NeighborhoodMatrix, w: &WeightVector) -> Result<f64> {
    if w.len() != xi.k() {
        return Err(LleError::ShapeMismatch(format!(
            "weight vector has {} entries, neighborhood has {} rows",
            w.len(),
            xi.k()
        )));
    }
    Ok((0..xi.dim())
        .map(|c| {
            let s: f64 = (0..xi.k()).map(|r| w.0[r] * xi.rows[(r, c)]).sum();
            s * s
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem1Bound {
    Bound(f64),
    PreconditionFailure,
}

impl Theorem1Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Theorem1Bound::Bound(b) => Some(b),
            Theorem1Bound::PreconditionFailure => None,
        }
    }
}

/// `20 eps / (lambda_d^2 (1 - alpha))`, valid when
/// `eps < min(lambda_d^4 / 72, lambda_d^2 (1 - alpha) / 72)`.
///
/// The caller is responsible for the remaining hypotheses: `lambda_1 < 1` (rescale the
/// neighborhood) and the spectral gap checked by [`has_spectral_gap`].
pub fn theorem1_bound(lambda_d: f64, alpha: f64, epsilon: f64) -> Result<Theorem1Bound> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(LleError::InvalidArgument(format!(
            "perturbation size must be positive, got {epsilon}"
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(LleError::InvalidArgument(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    if !(lambda_d > 0.0 && lambda_d.is_finite()) {
        return Err(LleError::InvalidArgument(format!(
            "lambda_d must be positive, got {lambda_d}"
        )));
    }
    let l2 = lambda_d * lambda_d;
    let limit = (l2 * l2 / 72.0).min(l2 * (1.0 - alpha) / 72.0);
    if epsilon < limit {
        Ok(Theorem1Bound::Bound(20.0 * epsilon / (l2 * (1.0 - alpha))))
    } else {
        Ok(Theorem1Bound::PreconditionFailure)
    }
}

/// `lambda_{d+1} < min(lambda_d^2, lambda_d / 72)`: the neighborhood is essentially d-dimensional.
pub fn has_spectral_gap(lambda_d: f64, lambda_dp1: f64) -> bool {
    lambda_dp1 < (lambda_d * lambda_d).min(lambda_d / 72.0)
}

/// Largest singular value of the base neighborhood used by the perturbation experiment.
pub const CROSS_TOP_SINGULAR_VALUE: f64 = 0.99;

/// A grid point and its four nearest neighbors, `(+-s, 0, 0, 0)` and `(0, +-s, 0, 0)`,
/// with `s` chosen so that `lambda_1 = lambda_2 = 0.99`. Padding to four coordinates makes
/// `K = D = 4`.
pub fn grid_cross_neighborhood() -> NeighborhoodMatrix {
    let s = CROSS_TOP_SINGULAR_VALUE / 2f64.sqrt();
    let rows = Mat::from_fn(4, 4, |i, j| match (i, j) {
        (0, 0) | (2, 1) => s,
        (1, 0) | (3, 1) => -s,
        _ => 0.0,
    });
    NeighborhoodMatrix::from_rows(rows)
}

/// Rank of the low-dimensional representation used for the cross.
pub const CROSS_DIM: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-2, 1e-4, 1e-6],
            trials: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub epsilon: f64,
    pub trials: usize,
    /// `||w - w~||` to the uniform vector, classical weights with `Delta = 0`.
    pub distances_classical: Vec<f64>,
    pub distances_ldr: Vec<f64>,
    /// Bound value when the hypotheses hold.
    pub bound: Option<f64>,
    pub preconditions_met: Vec<bool>,
    pub lambda_d: f64,
    pub alpha: f64,
}

impl PerturbationReport {
    /// LDR trials with hypotheses satisfied whose distance reaches the bound.
    pub fn violations(&self) -> usize {
        match self.bound {
            None => 0,
            Some(b) => self
                .distances_ldr
                .iter()
                .zip(&self.preconditions_met)
                .filter(|(d, &ok)| ok && **d >= b)
                .count(),
        }
    }

    pub fn summary(&self) -> PerturbationSummary {
        PerturbationSummary {
            epsilon: self.epsilon,
            trials: self.trials,
            bound: self.bound,
            preconditions_met: self.preconditions_met.iter().filter(|&&b| b).count(),
            lambda_d: self.lambda_d,
            alpha: self.alpha,
            ldr: DistanceStats::new(&self.distances_ldr),
            classical: DistanceStats::new(&self.distances_classical),
            violations: self.violations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl DistanceStats {
    pub fn new(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            median: median_sorted(&v),
            p95: quantile_sorted(&v, 0.95),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Nearest-rank quantile.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let rank = (q * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationSummary {
    pub epsilon: f64,
    pub trials: usize,
    pub bound: Option<f64>,
    pub preconditions_met: usize,
    pub lambda_d: f64,
    pub alpha: f64,
    pub ldr: DistanceStats,
    pub classical: DistanceStats,
    pub violations: usize,
}

/// Classical weights without regularization, using the pseudo-inverse when `G` is singular.
fn unregularized_classical(xi: &NeighborhoodMatrix) -> Result<WeightVector> {
    match lle_weights(xi, 0.0) {
        Err(LleError::SingularNeighborhood { .. }) => lle_weights_pseudoinverse(xi),
        other => other,
    }
}

/// Random `K x D` matrix with i.i.d. normal entries scaled to unit Frobenius norm.
fn unit_noise(rng: &mut SampleRng, k: usize, d: usize) -> Mat<f64> {
    let mut e = Mat::from_fn(k, d, |_, _| rng.normal());
    let fro = e.norm_l2();
    e /= faer::Scale(fro);
    e
}

/// Perturbs the grid cross with `eps * E`, `||E||_F = 1`, and records how far both weight
/// vectors move from the uniform vector. Trial `t` draws `E` from stream `t` of the master
/// seed, so every epsilon sees the same noise directions.
pub fn perturbation_experiment(config: &PerturbationConfig) -> Result<Vec<PerturbationReport>> {
    if config.epsilons.is_empty() {
        return Err(LleError::InvalidArgument("no perturbation sizes given".into()));
    }
    if let Some(e) = config.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(LleError::InvalidArgument(format!(
            "perturbation sizes must be positive, got {e}"
        )));
    }
    let base = grid_cross_neighborhood();
    let (k, dim) = (base.k(), base.dim());
    let spec = neighborhood_spectrum(&base, CROSS_DIM)?;
    let lambda_1 = spec.lambda(1);
    let lambda_d = spec.lambda(CROSS_DIM);
    let gap = has_spectral_gap(lambda_d, spec.lambda(CROSS_DIM + 1));
    let uniform = WeightVector(vec![1.0 / k as f64; k]);

    let noise: Vec<Mat<f64>> = (0..config.trials)
        .map(|t| unit_noise(&mut SampleRng::with_stream(config.seed, t as u64), k, dim))
        .collect();

    config
        .epsilons
        .iter()
        .map(|&eps| {
            let bound = if spec.alpha < 1.0 && lambda_1 < 1.0 && gap {
                theorem1_bound(lambda_d, spec.alpha, eps)?.value()
            } else {
                None
            };
            let mut distances_classical = Vec::with_capacity(config.trials);
            let mut distances_ldr = Vec::with_capacity(config.trials);
            let mut preconditions_met = Vec::with_capacity(config.trials);
            for e in &noise {
                let perturbed = NeighborhoodMatrix::from_rows(&base.rows + faer::Scale(eps) * e);
                distances_classical.push(unregularized_classical(&perturbed)?.distance(&uniform));
                distances_ldr.push(ldr_weights(&perturbed, CROSS_DIM)?.distance(&uniform));
                preconditions_met.push(bound.is_some());
            }
            Ok(PerturbationReport {
                epsilon: eps,
                trials: config.trials,
                distances_classical,
                distances_ldr,
                bound,
                preconditions_met,
                lambda_d,
                alpha: spec.alpha,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// `Phi(Z) / N` with LDR weights computed on `X`.
    pub phi_z_over_n: f64,
    pub max_lambda_dp1: f64,
    pub r_max: f64,
    /// `(Phi(Z)/N) / (max_i lambda_{d+1}^i * r_max^2)`
    pub ratio: f64,
    /// Mean `Phi(Z_perm)/N` over random row permutations of `Z`.
    pub null_phi_over_n: f64,
    /// `null_phi_over_n / phi_z_over_n`
    pub null_factor: f64,
}

/// Number of permutations averaged for the null model.
pub const NULL_PERMUTATIONS: usize = 10;

/// Pre-image objective statistics for an arbitrary sample `X` with ground truth `Z`.
pub fn theorem2_statistics(
    cloud: &PointCloud,
    preimage: MatRef<'_, f64>,
    k: usize,
    d: usize,
    null_seed: u64,
) -> Result<Theorem2Report> {
    let n = cloud.len();
    if preimage.nrows() != n {
        return Err(LleError::ShapeMismatch(format!(
            "pre-image has {} rows, sample has {n} points",
            preimage.nrows()
        )));
    }
    let graph = knn(cloud, k)?;
    let assembly = assemble_weight_matrix(cloud, &graph, WeightMethod::Ldr, d)?;
    theorem2_from_weights(&assembly.matrix, &assembly.spectra, cloud, &graph, preimage, d, null_seed)
}

fn theorem2_from_weights(
    w: &SparseWeightMatrix,
    spectra: &[crate::weights::NeighborhoodSpectrum],
    cloud: &PointCloud,
    graph: &crate::neighbors::NeighborGraph,
    preimage: MatRef<'_, f64>,
    d: usize,
    null_seed: u64,
) -> Result<Theorem2Report> {
    let n = cloud.len();
    let phi_z_over_n = phi(preimage, w)? / n as f64;
    let max_lambda_dp1 = spectra.iter().map(|s| s.lambda(d + 1)).fold(0.0, f64::max);
    let r_max = max_radius(cloud, graph)?;
    let ratio = phi_z_over_n / (max_lambda_dp1 * r_max * r_max);

    let mut rng = SampleRng::new(null_seed);
    let null_phi_over_n = (0..NULL_PERMUTATIONS)
        .map(|_| {
            let p = rng.permutation(n);
            let zp = Mat::from_fn(n, preimage.ncols(), |i, j| preimage[(p[i], j)]);
            phi(zp.as_ref(), w).map(|v| v / n as f64)
        })
        .sum::<Result<f64>>()?
        / NULL_PERMUTATIONS as f64;

    Ok(Theorem2Report {
        n,
        k: graph.k(),
        d,
        phi_z_over_n,
        max_lambda_dp1,
        r_max,
        ratio,
        null_phi_over_n,
        null_factor: null_phi_over_n / phi_z_over_n,
    })
}

/// Seed offset separating the null-model permutations from the sample's own draws.
const NULL_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn theorem2_check(sample: &GeneratedSample, k: usize, d: usize) -> Result<Theorem2Report> {
    theorem2_statistics(
        &sample.points,
        sample.preimage.as_ref(),
        k,
        d,
        sample.seed ^ NULL_SEED_SALT,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDiagnostics {
    pub phi_value: f64,
    pub linear_r2: f64,
    pub procrustes_residual: Option<f64>,
    pub rank_correlation: Option<f64>,
}

fn centered(m: MatRef<'_, f64>) -> Mat<f64> {
    let n = m.nrows() as f64;
    let means: Vec<f64> = (0..m.ncols())
        .map(|c| (0..m.nrows()).map(|r| m[(r, c)]).sum::<f64>() / n)
        .collect();
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] - means[c])
}

/// Coefficient of determination of the least-squares affine map `X -> Y`,
/// `1 - ||Y - X B - 1 c'||_F^2 / ||Y - mean(Y)||_F^2`.
pub fn linear_r2(x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(LleError::ShapeMismatch(format!(
            "X has {} rows, Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let xc = centered(x);
    let yc = centered(y);
    let total = yc.squared_norm_l2();
    if total == 0.0 {
        return Err(LleError::InvalidArgument("Y is constant; R^2 is undefined".into()));
    }
    let svd = xc
        .thin_svd()
        .map_err(|e| LleError::Numerical(format!("SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = if s.nrows() > 0 { s[0] } else { 0.0 };
    let cutoff = smax * x.nrows().max(x.ncols()) as f64 * f64::EPSILON;
    let u = svd.U();
    // The fitted values are the projection of Yc onto the column space of Xc.
    let mut explained = 0.0;
    for j in (0..s.nrows()).filter(|&j| s[j] > cutoff) {
        for c in 0..yc.ncols() {
            let p: f64 = (0..yc.nrows()).map(|r| u[(r, j)] * yc[(r, c)]).sum();
            explained += p * p;
        }
    }
    Ok((explained / total).clamp(0.0, 1.0))
}

/// Residual `||A R - B||_F^2` after centering both matrices, scaling each to unit Frobenius
/// norm and choosing the best orthogonal `R`. Zero for a perfect match, at most 4.
pub fn procrustes_residual(y: MatRef<'_, f64>, reference: MatRef<'_, f64>) -> Result<f64> {
    if y.nrows() != reference.nrows() || y.ncols() != reference.ncols() {
        return Err(LleError::ShapeMismatch(format!(
            "Y is {}x{}, reference is {}x{}",
            y.nrows(),
            y.ncols(),
            reference.nrows(),
            reference.ncols()
        )));
    }
    let mut a = centered(y);
    let mut b = centered(reference);
    let (na, nb) = (a.norm_l2(), b.norm_l2());
    if na == 0.0 || nb == 0.0 {
        return Err(LleError::InvalidArgument("cannot align a constant configuration".into()));
    }
    a /= faer::Scale(na);
    b /= faer::Scale(nb);
    let cross = a.transpose() * &b;
    let nuclear: f64 = cross
        .singular_values()
        .map_err(|e| LleError::Numerical(format!("SVD failed: {e:?}")))?
        .iter()
        .sum();
    Ok((2.0 - 2.0 * nuclear).max(0.0))
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            ranks[p] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(LleError::UndefinedCorrelation);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation between a 1-D embedding and a 1-D pre-image.
pub fn monotonicity_1d(y: MatRef<'_, f64>, preimage: MatRef<'_, f64>) -> Result<f64> {
    if y.ncols() != 1 || preimage.ncols() != 1 || y.nrows() != preimage.nrows() {
        return Err(LleError::ShapeMismatch(format!(
            "expected two N x 1 columns, got {}x{} and {}x{}",
            y.nrows(),
            y.ncols(),
            preimage.nrows(),
            preimage.ncols()
        )));
    }
    let a: Vec<f64> = (0..y.nrows()).map(|r| y[(r, 0)]).collect();
    let b: Vec<f64> = (0..preimage.nrows()).map(|r| preimage[(r, 0)]).collect();
    pearson(&average_ranks(&a), &average_ranks(&b))
}

/// Full quality summary of an embedding of `x` with weights `w`. The Procrustes residual and
/// (for one-dimensional outputs) the rank correlation are filled in when a reference is given.
pub fn linear_projection_diagnostic(
    x: &PointCloud,
    embedding: &Embedding,
    w: &SparseWeightMatrix,
    reference: Option<MatRef<'_, f64>>,
) -> Result<EmbeddingDiagnostics> {
    let y = embedding.y.as_ref();
    if y.nrows() != x.len() {
        return Err(LleError::ShapeMismatch(format!(
            "embedding has {} rows, input has {} points",
            y.nrows(),
            x.len()
        )));
    }
    let procrustes = reference
        .filter(|r| r.ncols() == y.ncols())
        .map(|r| procrustes_residual(y, r))
        .transpose()?;
    let rank_correlation = match reference {
        Some(r) if r.ncols() == 1 && y.ncols() == 1 => Some(monotonicity_1d(y, r)?),
        _ => None,
    };
    Ok(EmbeddingDiagnostics {
        phi_value: phi(y, w)?,
        linear_r2: linear_r2(x.as_mat(), y)?,
        procrustes_residual: procrustes,
        rank_correlation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nbhd(rows: &[&[f64]]) -> NeighborhoodMatrix {
        NeighborhoodMatrix::from_rows(Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
    }

    #[test]
    fn reconstruction_error_examples() {
        let cross = nbhd(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        let u = WeightVector(vec![0.25; 4]);
        assert!(reconstruction_error(&cross, &u).unwrap().abs() < 1e-15);

        let xi = nbhd(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let w = WeightVector(vec![0.8, 0.2]);
        assert!((reconstruction_error(&xi, &w).unwrap() - 0.8).abs() < 1e-12);
        // scalar oracle: a^2 + 4(1-a)^2 on a fine grid has its minimum 0.8 at a = 0.8
        let best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .map(|a| a * a + 4.0 * (1.0 - a) * (1.0 - a))
            .fold(f64::INFINITY, f64::min);
        assert!((best - 0.8).abs() < 1e-8);

        let scaled = xi.scaled(3.0);
        assert!((reconstruction_error(&scaled, &w).unwrap() - 9.0 * 0.8).abs() < 1e-12);
        assert!(reconstruction_error(&xi, &WeightVector(vec![1.0])).is_err());
    }

    #[test]
    fn theorem1_bound_examples() {
        assert_eq!(
            theorem1_bound(0.5, 0.5, 1e-4).unwrap().value().map(|b| (b * 1e6).round() / 1e6),
            Some(0.016)
        );
        let eps = 0.5f64.powi(4) / 72.0;
        assert_eq!(theorem1_bound(0.5, 0.0, eps).unwrap(), Theorem1Bound::PreconditionFailure);
        assert_eq!(
            theorem1_bound(0.5, 1.0 - 1e-12, 1e-8).unwrap(),
            Theorem1Bound::PreconditionFailure
        );
        assert!(theorem1_bound(0.5, 1.0, 1e-8).is_err());
        assert!(theorem1_bound(0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn grid_cross_spectrum() {
        let s = neighborhood_spectrum(&grid_cross_neighborhood(), CROSS_DIM).unwrap();
        assert!((s.lambda(1) - 0.99).abs() < 1e-12);
        assert!((s.lambda(2) - 0.99).abs() < 1e-12);
        assert!(s.lambda(3).abs() < 1e-12);
        assert!(s.alpha.abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let s = DistanceStats::new(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.p95, 4.0);
    }

    #[test]
    fn perturbation_rejects_nonpositive_epsilon() {
        let cfg = PerturbationConfig {
            epsilons: vec![0.0],
            trials: 2,
            seed: 0,
        };
        assert!(perturbation_experiment(&cfg).is_err());
    }

    #[test]
    fn small_perturbation_run() {
        let cfg = PerturbationConfig {
            epsilons: vec![1e-4],
            trials: 50,
            seed: 3,
        };
        let r = &perturbation_experiment(&cfg).unwrap()[0];
        assert_eq!(r.distances_ldr.len(), 50);
        assert!(r.bound.is_some());
        assert_eq!(r.violations(), 0);
        assert!(r.distances_ldr.iter().chain(&r.distances_classical).all(|d| *d >= 0.0));
    }

    #[test]
    fn linear_r2_exact_projection() {
        let x = Mat::from_fn(30, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 + 0.1 * j as f64 * i as f64);
        let y = Mat::from_fn(30, 2, |i, j| 2.0 * x[(i, j)] - 0.5 * x[(i, 2)] + 4.0);
        assert!((linear_r2(x.as_ref(), y.as_ref()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_examples() {
        let z = Mat::from_fn(10, 1, |i, _| (i as f64).powi(3));
        let y = Mat::from_fn(10, 1, |i, _| i as f64);
        assert!((monotonicity_1d(y.as_ref(), z.as_ref()).unwrap() - 1.0).abs() < 1e-15);
        let neg = Mat::from_fn(10, 1, |i, _| -(i as f64));
        assert!((monotonicity_1d(neg.as_ref(), z.as_ref()).unwrap() + 1.0).abs() < 1e-15);
        let c = Mat::from_fn(10, 1, |_, _| 1.0);
        assert!(matches!(
            monotonicity_1d(c.as_ref(), z.as_ref()),
            Err(LleError::UndefinedCorrelation)
        ));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn procrustes_zero_for_rotated_copy() {
        let a = Mat::from_fn(20, 2, |i, j| ((i * 3 + j * 5) % 7) as f64 + i as f64 * 0.1);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let b = Mat::from_fn(20, 2, |i, j| {
            let (x, y) = (a[(i, 0)], a[(i, 1)]);
            5.0 * if j == 0 { c * x - s * y } else { s * x + c * y } + 1.0
        });
        assert!(procrustes_residual(a.as_ref(), b.as_ref()).unwrap() < 1e-12);
    }
}
