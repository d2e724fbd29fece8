//! Quadratic inference functions: basis-matrix families for the inverse
//! working correlation, the stacked extended score, its empirical weight,
//! the GMM objective, the QIF estimating function, and the covariance of
//! the resulting estimate.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::baseline::BaselineCdf;
use crate::data::{ClusteredDataset, Coefficients, CorrelationFamily};
use crate::error::{Error, Result};
use crate::gee::{cluster_works, weighted_cluster_jacobian, weighted_cluster_score, ClusterWork};

/// Number of basis matrices spanning the inverse working correlation:
/// 1 (independence), 2 (exchangeable), 3 (AR(1)).
pub fn basis_count(family: CorrelationFamily) -> usize {
    match family {
        CorrelationFamily::Independence => 1,
        CorrelationFamily::Exchangeable => 2,
        CorrelationFamily::Ar1 => 3,
    }
}

/// 0/1 basis matrices for a cluster of size `n`. `M_1` is always the
/// identity; exchangeable adds the all-ones-off-diagonal matrix; AR(1) adds
/// the first off-diagonal band and the two corner entries. Every family
/// degenerates to `[I_1]` at `n = 1`, where the extra patterns are empty.
pub fn basis_matrices(family: CorrelationFamily, n: usize) -> Vec<DMatrix<f64>> {
    assert!(n >= 1, "cluster size must be at least 1");
    let identity = DMatrix::identity(n, n);
    if n == 1 {
        return vec![identity];
    }
    match family {
        CorrelationFamily::Independence => vec![identity],
        CorrelationFamily::Exchangeable => {
            let m2 = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
            vec![identity, m2]
        }
        CorrelationFamily::Ar1 => {
            let m2 = DMatrix::from_fn(n, n, |i, j| {
                if i.abs_diff(j) == 1 {
                    1.0
                } else {
                    0.0
                }
            });
            let mut m3 = DMatrix::zeros(n, n);
            m3[(0, 0)] = 1.0;
            m3[(n - 1, n - 1)] = 1.0;
            vec![identity, m2, m3]
        }
    }
}

/// The extended score pieces at one beta: per-cluster stacked blocks `g_i`,
/// their mean `G_K`, the empirical second moment `C_K`, and the analytic
/// Jacobian `dG_K/dbeta`.
#[derive(Debug, Clone)]
pub struct ExtendedScore {
    pub per_cluster: Vec<DVector<f64>>,
    pub mean: DVector<f64>,
    pub weight: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
}

fn cluster_blocks(
    work: &ClusterWork,
    family: CorrelationFamily,
    m_count: usize,
    p: usize,
) -> DVector<f64> {
    let n = work.mu_vec.len();
    let bases = basis_matrices(family, n);
    let mut g = DVector::zeros(m_count * p);
    for (s, m) in bases.iter().enumerate() {
        let block = weighted_cluster_score(work, m);
        g.rows_mut(s * p, p).copy_from(&block);
    }
    // Size-one clusters leave the extra blocks zero: their basis patterns
    // are empty but the stacking dimension is fixed by the family.
    g
}

fn cluster_block_jacobian(
    work: &ClusterWork,
    family: CorrelationFamily,
    m_count: usize,
    p: usize,
) -> DMatrix<f64> {
    let n = work.mu_vec.len();
    let bases = basis_matrices(family, n);
    let mut jac = DMatrix::zeros(m_count * p, p);
    for (s, m) in bases.iter().enumerate() {
        let block = weighted_cluster_jacobian(work, m);
        jac.rows_mut(s * p, p).copy_from(&block);
    }
    jac
}

/// Assemble the extended score at `beta`. Block `s` of `g_i` is
/// `(dmu/dbeta)' B^{-1/2} M_s B^{-1/2} W (kappa - mu)`; block 1 equals the
/// per-cluster independence score exactly.
pub fn extended_score(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    family: CorrelationFamily,
) -> Result<ExtendedScore> {
    let p = beta.len();
    let m_count = basis_count(family);
    let dim = m_count * p;
    let k = dataset.n_clusters() as f64;

    let works = cluster_works(beta, dataset, baseline)?;
    let mut per_cluster = Vec::with_capacity(works.len());
    let mut mean = DVector::zeros(dim);
    let mut weight = DMatrix::zeros(dim, dim);
    let mut jacobian = DMatrix::zeros(dim, p);
    for work in &works {
        let g = cluster_blocks(work, family, m_count, p);
        mean += &g;
        weight += &g * g.transpose();
        jacobian += cluster_block_jacobian(work, family, m_count, p);
        per_cluster.push(g);
    }
    mean /= k;
    weight /= k;
    jacobian /= k;
    Ok(ExtendedScore {
        per_cluster,
        mean,
        weight,
        jacobian,
    })
}

/// Analytic `dG_K/dbeta`, matching central finite differences of the
/// extended score mean.
pub fn extended_score_jacobian(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    family: CorrelationFamily,
) -> Result<DMatrix<f64>> {
    Ok(extended_score(beta, dataset, baseline, family)?.jacobian)
}

/// Ridge policy for the empirical weight: when the smallest eigenvalue of
/// `C_K` falls below 1e-10 of its trace, add `1e-8 * trace / dim` to the
/// diagonal. Returns whether the repair was applied.
fn regularize_weight(c: &mut DMatrix<f64>) -> bool {
    let dim = c.nrows();
    let trace = c.trace();
    if trace <= 0.0 {
        return false;
    }
    let min_eig = c
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v));
    if min_eig < 1e-10 * trace {
        let ridge = 1e-8 * trace / dim as f64;
        for i in 0..dim {
            c[(i, i)] += ridge;
        }
        true
    } else {
        false
    }
}

pub(crate) struct QifSystem {
    pub ext: ExtendedScore,
    pub chol: Cholesky<f64, nalgebra::Dyn>,
    pub ridged: bool,
}

pub(crate) fn qif_system(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    family: CorrelationFamily,
) -> Result<QifSystem> {
    let ext = extended_score(beta, dataset, baseline, family)?;
    let mut c = ext.weight.clone();
    let ridged = regularize_weight(&mut c);
    let chol = Cholesky::new(c).ok_or(Error::SingularMatrix {
        context: "extended score weight C_K".into(),
    })?;
    Ok(QifSystem { ext, chol, ridged })
}

/// GMM objective `Q(beta) = G_K' C_K^{-1} G_K`; nonnegative, zero iff the
/// extended score mean vanishes.
pub fn qif_objective(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    family: CorrelationFamily,
) -> Result<f64> {
    let ext = extended_score(beta, dataset, baseline, family)?;
    if ext.mean.amax() == 0.0 {
        return Ok(0.0);
    }
    let mut c = ext.weight.clone();
    regularize_weight(&mut c);
    let chol = Cholesky::new(c).ok_or(Error::SingularMatrix {
        context: "extended score weight C_K".into(),
    })?;
    let solved = chol.solve(&ext.mean);
    Ok(ext.mean.dot(&solved))
}

/// QIF estimating function `U^Q = Gdot' C_K^{-1} G_K`.
pub fn score_qif(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    family: CorrelationFamily,
) -> Result<DVector<f64>> {
    let sys = qif_system(beta, dataset, baseline, family)?;
    let solved = sys.chol.solve(&sys.ext.mean);
    Ok(sys.ext.jacobian.transpose() * solved)
}

/// Exact gradient of [`qif_objective`]:
/// `2 Gdot' C^{-1} G - (y' Cdot_w y)_w` with `y = C^{-1} G`, where the
/// second piece carries the derivative of the empirical weight. Away from
/// the solution this term can dominate, which is why the line-search
/// fallback uses the exact gradient rather than the score.
pub fn qif_gradient(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    family: CorrelationFamily,
) -> Result<DVector<f64>> {
    let sys = qif_system(beta, dataset, baseline, family)?;
    let p = beta.len();
    let m_count = basis_count(family);
    let k = dataset.n_clusters() as f64;
    let y = sys.chol.solve(&sys.ext.mean);

    let mut grad = sys.ext.jacobian.transpose() * &y * 2.0;
    let works = cluster_works(beta, dataset, baseline)?;
    for (work, g) in works.iter().zip(&sys.ext.per_cluster) {
        let jac_i = cluster_block_jacobian(work, family, m_count, p);
        let s_i = g.dot(&y);
        let v_i = jac_i.transpose() * &y;
        // y' Cdot_w y = (2/K) sum_i (y' dg_i/dbeta_w)(g_i' y)
        grad -= v_i * (2.0 * s_i / k);
    }
    Ok(grad)
}

/// Covariance of the QIF estimate.
#[derive(Debug, Clone)]
pub struct QifCovariance {
    /// Full sandwich form: the finite-sample covariance of the estimate.
    pub covariance: DMatrix<f64>,
    /// Simplified form `(1/K) [Gdot' C^{-1} Gdot]^{-1}`.
    pub simplified: DMatrix<f64>,
    /// Largest elementwise gap between the two forms relative to the
    /// simplified form's largest entry; nonzero when the ridge repair or
    /// rounding makes the algebraic identity between them inexact.
    pub max_rel_gap: f64,
    pub ridged: bool,
}

pub fn qif_covariance(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    family: CorrelationFamily,
) -> Result<QifCovariance> {
    let sys = qif_system(beta, dataset, baseline, family)?;
    let p = beta.len();
    let k = dataset.n_clusters() as f64;

    let c_inv_gdot = sys.chol.solve(&sys.ext.jacobian);
    let inner = sys.ext.jacobian.transpose() * &c_inv_gdot; // Gdot' C^{-1} Gdot
    let bread = &inner * k;

    let mut omega = DMatrix::zeros(p, p);
    for g in &sys.ext.per_cluster {
        let u_i = c_inv_gdot.transpose() * g;
        omega += &u_i * u_i.transpose();
    }

    let lu = bread.clone().lu();
    let tmp = lu.solve(&omega).ok_or(Error::SingularMatrix {
        context: "QIF bread Gdot' C^{-1} Gdot".into(),
    })?;
    let cov_t = lu.solve(&tmp.transpose()).ok_or(Error::SingularMatrix {
        context: "QIF bread Gdot' C^{-1} Gdot".into(),
    })?;
    let mut covariance = cov_t.transpose();
    covariance = (&covariance + covariance.transpose()) * 0.5;

    let simplified = inner.try_inverse().ok_or(Error::SingularMatrix {
        context: "QIF bread Gdot' C^{-1} Gdot".into(),
    })? / k;

    let denom = simplified.amax().max(1e-300);
    let max_rel_gap = (&covariance - &simplified).amax() / denom;

    Ok(QifCovariance {
        covariance,
        simplified,
        max_rel_gap,
        ridged: sys.ridged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::StepCdf;
    use crate::data::{Cluster, Observation, WorkingCorrelation};
    use crate::gee;

    fn cluster(obs: &[(f64, u8, Vec<f64>)]) -> Cluster {
        Cluster::new(
            "c",
            obs.iter()
                .map(|(t, e, x)| Observation::new(*t, *e, x.clone()))
                .collect(),
        )
    }

    fn small_dataset() -> (ClusteredDataset, Coefficients, StepCdf) {
        let ds = ClusteredDataset::new(
            vec![
                cluster(&[(0.4, 1, vec![0.3]), (1.2, 0, vec![-0.2])]),
                cluster(&[(0.9, 1, vec![1.1]), (2.0, 1, vec![0.0]), (0.2, 0, vec![0.5])]),
                cluster(&[(1.4, 1, vec![-0.6])]),
                cluster(&[(0.6, 0, vec![0.8]), (1.1, 1, vec![0.1])]),
            ],
            1,
        );
        let beta = Coefficients::new(vec![0.1, -0.3]).unwrap();
        let base =
            StepCdf::new(vec![0.4, 0.9, 1.1, 1.4, 2.0], vec![0.2, 0.3, 0.2, 0.15, 0.15]).unwrap();
        (ds, beta, base)
    }

    #[test]
    fn basis_matrices_match_displayed_patterns() {
        let exch = basis_matrices(CorrelationFamily::Exchangeable, 3);
        assert_eq!(exch.len(), 2);
        assert_eq!(exch[0], DMatrix::identity(3, 3));
        let want =
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(exch[1], want);

        let ar1 = basis_matrices(CorrelationFamily::Ar1, 3);
        assert_eq!(ar1.len(), 3);
        let m2 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let m3 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(ar1[1], m2);
        assert_eq!(ar1[2], m3);

        for family in [
            CorrelationFamily::Independence,
            CorrelationFamily::Exchangeable,
            CorrelationFamily::Ar1,
        ] {
            let degenerate = basis_matrices(family, 1);
            assert_eq!(degenerate, vec![DMatrix::identity(1, 1)]);
        }
    }

    #[test]
    fn independence_family_mean_is_scaled_score() {
        let (ds, beta, base) = small_dataset();
        let ext = extended_score(&beta, &ds, &base, CorrelationFamily::Independence).unwrap();
        let u = gee::score_independent(&beta, &ds, &base).unwrap();
        let k = ds.n_clusters() as f64;
        for i in 0..u.len() {
            assert!((ext.mean[i] - u[i] / k).abs() < 1e-14);
        }
    }

    #[test]
    fn block_one_equals_independence_score() {
        let (ds, beta, base) = small_dataset();
        let p = beta.len();
        for family in [CorrelationFamily::Exchangeable, CorrelationFamily::Ar1] {
            let ext = extended_score(&beta, &ds, &base, family).unwrap();
            let k = ds.n_clusters() as f64;
            let u = gee::score_independent(&beta, &ds, &base).unwrap();
            for i in 0..p {
                assert!((ext.mean[i] * k - u[i]).abs() < 1e-12);
            }
            // Stacking order: block s occupies rows s*p..(s+1)*p.
            assert_eq!(ext.mean.len(), basis_count(family) * p);
        }
    }

    #[test]
    fn second_block_matches_dense_construction_oracle() {
        // Single cluster of two observations, exchangeable family: block 2
        // applies M2 explicitly on the standardized scale.
        let ds = ClusteredDataset::new(
            vec![cluster(&[(0.5, 1, vec![0.4]), (1.0, 1, vec![-0.7])])],
            1,
        );
        let beta = Coefficients::new(vec![0.2, 0.5]).unwrap();
        let base = StepCdf::new(vec![0.5, 1.0], vec![0.5, 0.5]).unwrap();
        let ext = extended_score(&beta, &ds, &base, CorrelationFamily::Exchangeable).unwrap();

        let work = gee::ClusterWork::build(&beta, &ds.clusters[0], &base).unwrap();
        let m2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let bh_inv = DMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                1.0 / work.mu_vec[i].sqrt()
            } else {
                0.0
            }
        });
        let dmu_t = work.design.transpose()
            * DMatrix::from_fn(2, 2, |i, j| if i == j { work.mu_vec[i] } else { 0.0 });
        let wr = DVector::from_fn(2, |j, _| work.w_diag[j] * (work.kappa[j] - work.mu_vec[j]));
        let block2 = dmu_t * &bh_inv * m2 * &bh_inv * wr;
        for i in 0..2 {
            assert!((ext.per_cluster[0][2 + i] - block2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn size_one_clusters_contribute_zero_extra_blocks() {
        let ds = ClusteredDataset::new(
            vec![
                cluster(&[(0.5, 1, vec![0.4])]),
                cluster(&[(0.8, 1, vec![0.1]), (1.0, 0, vec![0.2])]),
            ],
            1,
        );
        let beta = Coefficients::new(vec![0.0, 0.0]).unwrap();
        let base = StepCdf::new(vec![0.5, 0.8], vec![0.5, 0.5]).unwrap();
        let ext = extended_score(&beta, &ds, &base, CorrelationFamily::Ar1).unwrap();
        assert_eq!(ext.per_cluster[0].len(), 6);
        for i in 2..6 {
            assert_eq!(ext.per_cluster[0][i], 0.0);
        }
        assert!(ext.per_cluster[1].rows(2, 2).amax() > 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (ds, beta, base) = small_dataset();
        for family in [
            CorrelationFamily::Independence,
            CorrelationFamily::Exchangeable,
            CorrelationFamily::Ar1,
        ] {
            let jac = extended_score_jacobian(&beta, &ds, &base, family).unwrap();
            let f = |b: &Coefficients| {
                extended_score(b, &ds, &base, family).unwrap().mean
            };
            let fd = crate::testutil::finite_difference_jacobian(&f, &beta, 1e-6);
            let scale = jac.amax().max(1e-12);
            assert!(
                (&jac - &fd).amax() / scale < 1e-5,
                "{family}: mismatch {}",
                (&jac - &fd).amax() / scale
            );
        }
    }

    #[test]
    fn independence_intercept_only_jacobian_reduction() {
        let ds = ClusteredDataset::new(
            vec![cluster(&[(0.5, 1, vec![]), (1.5, 1, vec![])])],
            0,
        );
        let beta = Coefficients::new(vec![0.3]).unwrap();
        let base = StepCdf::new(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap();
        let jac = extended_score_jacobian(&beta, &ds, &base, CorrelationFamily::Independence)
            .unwrap();
        let want: f64 = ds
            .iter_obs()
            .map(|o| -base.cdf(o.time) * 0.3_f64.exp())
            .sum();
        // One cluster: Gdot = (1/K) sum dU_i/dbeta with K = 1.
        assert!((jac[(0, 0)] - want).abs() < 1e-12);
    }

    #[test]
    fn objective_zero_iff_mean_zero() {
        // delta = F mu for all observations makes every residual zero; the
        // extended score mean and objective vanish (weight flagged singular).
        let ds = ClusteredDataset::new(
            vec![cluster(&[(1.0, 1, vec![])]), cluster(&[(1.0, 1, vec![])])],
            0,
        );
        let beta = Coefficients::zeros(1);
        let base = StepCdf::new(vec![1.0], vec![1.0]).unwrap();
        let q = qif_objective(&beta, &ds, &base, CorrelationFamily::Independence).unwrap();
        assert_eq!(q, 0.0);
        // score_qif on the same degenerate data cannot factor C at all.
        assert!(score_qif(&beta, &ds, &base, CorrelationFamily::Independence).is_err());
    }

    #[test]
    fn single_cluster_ridge_path_matches_sherman_morrison() {
        // K = 1: C = g g' is rank one; after the ridge eps I the objective is
        // g' (g g' + eps I)^{-1} g = |g|^2 / (|g|^2 + eps).
        let ds = ClusteredDataset::new(
            vec![cluster(&[(0.5, 1, vec![0.4]), (1.0, 0, vec![-0.7])])],
            1,
        );
        let beta = Coefficients::new(vec![0.3, -0.2]).unwrap();
        let base = StepCdf::new(vec![0.5], vec![1.0]).unwrap();
        let family = CorrelationFamily::Exchangeable;

        let ext = extended_score(&beta, &ds, &base, family).unwrap();
        let g = &ext.per_cluster[0];
        let g_norm2 = g.dot(g);
        let dim = g.len() as f64;
        let eps = 1e-8 * g_norm2 / dim; // trace(g g') = |g|^2
        let want = g_norm2 / (g_norm2 + eps);

        let got = qif_objective(&beta, &ds, &base, family).unwrap();
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));

        // Pseudo-inverse oracle: for rank-one C the Moore-Penrose value is
        // exactly 1; the ridge answer agrees to the ridge magnitude.
        assert!((got - 1.0).abs() < 1e-6);
    }

    #[test]
    fn objective_matches_dense_oracle() {
        // Enough clusters that C_K is positive definite for the largest
        // stacking dimension (3 blocks x 2 parameters). Clusters of size 2
        // are avoided: the AR(1) corner pattern coincides with the identity
        // there and would make the stack structurally singular.
        let ds = ClusteredDataset::new(
            vec![
                cluster(&[(0.4, 1, vec![0.3]), (1.2, 0, vec![-0.2]), (0.6, 1, vec![1.3])]),
                cluster(&[(0.9, 1, vec![1.1]), (2.0, 1, vec![0.0]), (0.2, 0, vec![0.5])]),
                cluster(&[(1.4, 1, vec![-0.6]), (0.8, 1, vec![0.9]), (1.1, 0, vec![0.0])]),
                cluster(&[(0.6, 0, vec![0.8]), (1.1, 1, vec![0.1]), (1.7, 1, vec![-0.3])]),
                cluster(&[(0.3, 1, vec![-1.2]), (1.9, 0, vec![0.4]), (0.9, 1, vec![0.8])]),
                cluster(&[(0.7, 1, vec![0.6]), (1.3, 1, vec![-0.4]), (0.4, 0, vec![1.0])]),
                cluster(&[(1.0, 0, vec![0.2]), (1.6, 1, vec![1.4]), (1.2, 1, vec![-0.8])]),
                cluster(&[(0.5, 1, vec![-0.9]), (1.8, 1, vec![0.7]), (1.5, 0, vec![0.2])]),
            ],
            1,
        );
        let beta = Coefficients::new(vec![0.1, -0.3]).unwrap();
        let base =
            StepCdf::new(vec![0.3, 0.7, 1.1, 1.5, 2.0], vec![0.2, 0.3, 0.2, 0.15, 0.15]).unwrap();
        for family in [CorrelationFamily::Exchangeable, CorrelationFamily::Ar1] {
            let ext = extended_score(&beta, &ds, &base, family).unwrap();
            let eig = ext.weight.clone().symmetric_eigen();
            let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                min_eig > 1e-10 * ext.weight.trace(),
                "weight not PD; test setup broken"
            );
            let c_inv = ext.weight.clone().try_inverse().unwrap();
            let want = (ext.mean.transpose() * c_inv * &ext.mean)[(0, 0)];
            let got = qif_objective(&beta, &ds, &base, family).unwrap();
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn score_is_half_gradient_up_to_weight_derivative() {
        // |grad Q / 2 - U^Q| involves only the derivative of C_K, which is
        // second order in the residual mean; it shrinks relative to |U^Q|
        // as the cluster count grows.
        let rel_gap = |reps: usize, seed: u64| -> f64 {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut clusters = Vec::new();
            for i in 0..reps {
                let obs = (0..3)
                    .map(|_| {
                        let t: f64 = rng.gen_range(0.1..2.0);
                        let e = u8::from(rng.gen_bool(0.8));
                        Observation::new(t, e, vec![rng.gen_range(-1.0..1.0)])
                    })
                    .collect();
                clusters.push(Cluster::new(format!("c{i}"), obs));
            }
            let ds = ClusteredDataset::new(clusters, 1);
            let base = |t: f64| (t / 2.0).clamp(0.0, 1.0);
            let beta = Coefficients::new(vec![-0.1, 0.2]).unwrap();
            let family = CorrelationFamily::Exchangeable;

            let u = score_qif(&beta, &ds, &base, family).unwrap();
            let h = 1e-6;
            let mut grad_half = DVector::zeros(beta.len());
            for k in 0..beta.len() {
                let mut plus = beta.as_slice().to_vec();
                let mut minus = plus.clone();
                plus[k] += h;
                minus[k] -= h;
                let qp = qif_objective(&Coefficients::new(plus).unwrap(), &ds, &base, family)
                    .unwrap();
                let qm = qif_objective(&Coefficients::new(minus).unwrap(), &ds, &base, family)
                    .unwrap();
                grad_half[k] = (qp - qm) / (4.0 * h);
            }
            (&grad_half - &u).amax() / u.amax()
        };
        let small = rel_gap(10, 42);
        let large = rel_gap(100, 42);
        assert!(
            large < small,
            "expected shrinking gap: K=10 -> {small}, K=100 -> {large}"
        );
    }

    #[test]
    fn independence_covariance_agrees_with_gee_sandwich() {
        let (ds, beta, base) = small_dataset();
        let qc =
            qif_covariance(&beta, &ds, &base, CorrelationFamily::Independence).unwrap();
        let sc = gee::sandwich_covariance(
            &beta,
            &ds,
            &base,
            &WorkingCorrelation::independence(),
        )
        .unwrap();
        let scale = sc.covariance.amax();
        assert!(
            (&qc.covariance - &sc.covariance).amax() / scale < 1e-6,
            "gap {}",
            (&qc.covariance - &sc.covariance).amax() / scale
        );
    }

    #[test]
    fn covariance_is_symmetric_psd_and_forms_agree() {
        let (ds, beta, base) = small_dataset();
        for family in [CorrelationFamily::Exchangeable, CorrelationFamily::Ar1] {
            let qc = qif_covariance(&beta, &ds, &base, family).unwrap();
            assert!((&qc.covariance - qc.covariance.transpose()).amax() < 1e-10);
            let eig = qc.covariance.clone().symmetric_eigen();
            let trace = qc.covariance.trace();
            for ev in eig.eigenvalues.iter() {
                assert!(*ev >= -1e-8 * trace);
            }
            // Without a ridge the sandwich and simplified forms coincide.
            if !qc.ridged {
                assert!(qc.max_rel_gap < 1e-8, "gap {}", qc.max_rel_gap);
            }
        }
    }
}
