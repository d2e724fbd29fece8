//! Generalized estimating equations for the marginal cure model: the
//! independence score, the weighted GEE score, moment estimators for the
//! dispersion and working correlation parameters, the analytic Jacobian,
//! and the sandwich covariance estimator.

use nalgebra::{DMatrix, DVector};

use crate::baseline::BaselineCdf;
use crate::corr::inverse_correlation;
use crate::data::{mu, Cluster, ClusteredDataset, Coefficients, CorrelationFamily, WorkingCorrelation};
use crate::error::{Error, Result};

/// Per-cluster quantities entering every estimating function.
///
/// `residual = delta - F_p(t) * mu` equals `W (kappa - mu)` entrywise, with
/// `kappa = delta / F_p(t)` set to exactly zero for censored observations so
/// early censored times with `F_p(t) = 0` stay well defined.
#[derive(Debug, Clone)]
pub struct ClusterWork {
    pub design: DMatrix<f64>,
    pub mu_vec: DVector<f64>,
    pub w_diag: DVector<f64>,
    pub kappa: DVector<f64>,
    pub residual: DVector<f64>,
    pub events: Vec<bool>,
}

impl ClusterWork {
    pub fn build(
        beta: &Coefficients,
        cluster: &Cluster,
        baseline: &dyn BaselineCdf,
    ) -> Result<Self> {
        let n = cluster.len();
        let p = beta.len();
        let mut design = DMatrix::zeros(n, p);
        let mut mu_vec = DVector::zeros(n);
        let mut w_diag = DVector::zeros(n);
        let mut kappa = DVector::zeros(n);
        let mut residual = DVector::zeros(n);
        let mut events = Vec::with_capacity(n);
        for (j, obs) in cluster.observations.iter().enumerate() {
            let m = mu(beta, obs)?;
            let fp = baseline.cdf(obs.time);
            let delta = obs.event as f64;
            design[(j, 0)] = 1.0;
            for (k, &x) in obs.covariates.iter().enumerate() {
                design[(j, k + 1)] = x;
            }
            mu_vec[j] = m;
            w_diag[j] = fp;
            kappa[j] = if obs.is_event() { 1.0 / fp } else { 0.0 };
            residual[j] = delta - fp * m;
            events.push(obs.is_event());
        }
        Ok(Self {
            design,
            mu_vec,
            w_diag,
            kappa,
            residual,
            events,
        })
    }

    /// Diagonal of `B`, which equals the mean vector for this model.
    pub fn b_diag(&self) -> &DVector<f64> {
        &self.mu_vec
    }
}

pub(crate) fn cluster_works(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
) -> Result<Vec<ClusterWork>> {
    dataset
        .clusters
        .iter()
        .map(|c| ClusterWork::build(beta, c, baseline))
        .collect()
}

/// Per-cluster score with a symmetric weight matrix `M` applied on the
/// standardized scale:
/// `X' diag(sqrt(mu)) M diag(1/sqrt(mu)) residual`.
pub(crate) fn weighted_cluster_score(work: &ClusterWork, m: &DMatrix<f64>) -> DVector<f64> {
    let n = work.mu_vec.len();
    let b = DVector::from_fn(n, |j, _| work.residual[j] / work.mu_vec[j].sqrt());
    let t = m * b;
    let scaled = DVector::from_fn(n, |j, _| work.mu_vec[j].sqrt() * t[j]);
    work.design.transpose() * scaled
}

/// Per-cluster Jacobian of [`weighted_cluster_score`] with respect to beta,
/// holding the baseline (and any nuisance inside `M`) fixed:
/// `1/2 [X' diag(a .* M b) X - X' diag(a) M diag(b) X] - X' diag(a) M diag(F .* a) X`
/// with `a = sqrt(mu)` and `b = residual / sqrt(mu)`.
pub(crate) fn weighted_cluster_jacobian(work: &ClusterWork, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = work.mu_vec.len();
    let a = DVector::from_fn(n, |j, _| work.mu_vec[j].sqrt());
    let b = DVector::from_fn(n, |j, _| work.residual[j] / a[j]);
    let fa = DVector::from_fn(n, |j, _| work.w_diag[j] * a[j]);

    let mb = m * &b;
    let x = &work.design;
    let xt = x.transpose();

    let diag_amb = DMatrix::from_fn(n, n, |i, j| if i == j { a[i] * mb[i] } else { 0.0 });
    let xa = scale_rows(x, &a);
    let xb = scale_rows(x, &b);
    let xfa = scale_rows(x, &fa);

    let term1 = (&xt * diag_amb * x - xa.transpose() * m * xb) * 0.5;
    let term2 = xa.transpose() * m * xfa;
    term1 - term2
}

fn scale_rows(x: &DMatrix<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (j, mut row) in out.row_iter_mut().enumerate() {
        row *= scale[j];
    }
    out
}

/// Independence score `sum_ij X_ij (delta_ij - F_p(t_ij) mu_ij)`.
pub fn score_independent(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
) -> Result<DVector<f64>> {
    let p = beta.len();
    let mut total = DVector::zeros(p);
    for cluster in &dataset.clusters {
        let work = ClusterWork::build(beta, cluster, baseline)?;
        total += work.design.transpose() * &work.residual;
    }
    Ok(total)
}

/// Standardized Pearson residuals `(kappa - mu) / sqrt(mu)` grouped by
/// cluster, dataset order within each cluster.
pub fn pearson_residuals_by_cluster(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
) -> Result<Vec<Vec<f64>>> {
    dataset
        .clusters
        .iter()
        .map(|cluster| {
            let work = ClusterWork::build(beta, cluster, baseline)?;
            Ok((0..cluster.len())
                .map(|j| (work.kappa[j] - work.mu_vec[j]) / work.mu_vec[j].sqrt())
                .collect())
        })
        .collect()
}

/// Flat Pearson residuals in dataset order.
pub fn pearson_residuals(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
) -> Result<Vec<f64>> {
    Ok(pearson_residuals_by_cluster(beta, dataset, baseline)?
        .into_iter()
        .flatten()
        .collect())
}

/// Moment estimator of the dispersion:
/// `phi = sum e^2 / (N - p_X - 1)`. A zero estimate is legal here; callers
/// that divide by it apply the floor.
pub fn estimate_phi(residuals: &[f64], n_params: usize) -> Result<f64> {
    let n = residuals.len();
    if n <= n_params {
        return Err(Error::DegenerateDispersion { n, params: n_params });
    }
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    Ok(ss / (n - n_params) as f64)
}

/// Result of the working-correlation moment estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoEstimate {
    pub rho: f64,
    /// Raw moment value before clipping into the positive-definite range.
    pub raw: f64,
    pub clipped: bool,
}

/// Moment estimator of `rho` for the exchangeable or AR(1) structure,
/// clipped into the positive-definite range for the observed cluster sizes.
pub fn estimate_rho(
    residuals_by_cluster: &[Vec<f64>],
    family: CorrelationFamily,
    phi: f64,
    p_x: usize,
) -> Result<RhoEstimate> {
    let n_max = residuals_by_cluster.iter().map(Vec::len).max().unwrap_or(0);
    let (pair_sum, pair_count) = match family {
        CorrelationFamily::Exchangeable => {
            // Sum over ordered pairs j != k: (sum_j e_j)^2 - sum_j e_j^2.
            let mut sum = 0.0;
            let mut count = 0usize;
            for res in residuals_by_cluster {
                let s: f64 = res.iter().sum();
                let ss: f64 = res.iter().map(|e| e * e).sum();
                sum += s * s - ss;
                count += res.len() * res.len().saturating_sub(1);
            }
            (sum, count)
        }
        CorrelationFamily::Ar1 => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for res in residuals_by_cluster {
                for w in res.windows(2) {
                    sum += w[0] * w[1];
                }
                count += res.len().saturating_sub(1);
            }
            (sum, count)
        }
        CorrelationFamily::Independence => {
            return Err(Error::Config(
                "rho is not estimated under the independence structure".into(),
            ))
        }
    };
    if pair_count == 0 {
        return Err(Error::NoCorrelationPairs);
    }
    let denom = pair_count as f64 - p_x as f64 - 1.0;
    if denom <= 0.0 {
        return Err(Error::NoCorrelationPairs);
    }
    let raw = pair_sum / (phi * denom);
    let (rho, clipped) = crate::corr::clip_rho(family, raw, n_max);
    Ok(RhoEstimate { rho, raw, clipped })
}

fn inverse_scaled_weight(
    corr: &WorkingCorrelation,
    n: usize,
    cache: &mut Vec<Option<DMatrix<f64>>>,
) -> Result<DMatrix<f64>> {
    if n < cache.len() {
        if let Some(m) = &cache[n] {
            return Ok(m.clone());
        }
    } else {
        cache.resize(n + 1, None);
    }
    let qinv = inverse_correlation(corr.family, corr.rho_or_zero(), n)?;
    let m = qinv / corr.phi;
    cache[n] = Some(m.clone());
    Ok(m)
}

/// Weighted GEE score
/// `sum_i (dmu/dbeta)' {B^{1/2} Q(rho) B^{1/2} phi}^{-1} W (kappa - mu)`.
/// Reduces exactly to [`score_independent`] under independence with phi = 1.
pub fn score_gee(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    corr: &WorkingCorrelation,
) -> Result<DVector<f64>> {
    let p = beta.len();
    let mut total = DVector::zeros(p);
    let mut cache: Vec<Option<DMatrix<f64>>> = Vec::new();
    for cluster in &dataset.clusters {
        let work = ClusterWork::build(beta, cluster, baseline)?;
        let m = inverse_scaled_weight(corr, cluster.len(), &mut cache)?;
        total += weighted_cluster_score(&work, &m);
    }
    Ok(total)
}

/// Per-cluster GEE scores, used to assemble the sandwich meat.
pub fn cluster_scores_gee(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    corr: &WorkingCorrelation,
) -> Result<Vec<DVector<f64>>> {
    let mut cache: Vec<Option<DMatrix<f64>>> = Vec::new();
    dataset
        .clusters
        .iter()
        .map(|cluster| {
            let work = ClusterWork::build(beta, cluster, baseline)?;
            let m = inverse_scaled_weight(corr, cluster.len(), &mut cache)?;
            Ok(weighted_cluster_score(&work, &m))
        })
        .collect()
}

/// Analytic `d U^G / d beta` with the baseline and nuisance parameters held
/// fixed. Matches central finite differences of [`score_gee`].
pub fn jacobian_gee(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    corr: &WorkingCorrelation,
) -> Result<DMatrix<f64>> {
    let p = beta.len();
    let mut total = DMatrix::zeros(p, p);
    let mut cache: Vec<Option<DMatrix<f64>>> = Vec::new();
    for cluster in &dataset.clusters {
        let work = ClusterWork::build(beta, cluster, baseline)?;
        let m = inverse_scaled_weight(corr, cluster.len(), &mut cache)?;
        total += weighted_cluster_jacobian(&work, &m);
    }
    Ok(total)
}

/// Sandwich covariance pieces: `bread = -dU/dbeta`, `meat = sum U_i U_i'`,
/// and `covariance = bread^{-1} meat bread^{-T}`, the finite-sample
/// covariance of the estimate.
#[derive(Debug, Clone)]
pub struct SandwichCovariance {
    pub bread: DMatrix<f64>,
    pub meat: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
}

pub fn sandwich_covariance(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    corr: &WorkingCorrelation,
) -> Result<SandwichCovariance> {
    let p = beta.len();
    let bread = -jacobian_gee(beta, dataset, baseline, corr)?;
    let scores = cluster_scores_gee(beta, dataset, baseline, corr)?;
    let mut meat = DMatrix::zeros(p, p);
    for u in &scores {
        meat += u * u.transpose();
    }
    let lu = bread.clone().lu();
    let inv_meat = lu.solve(&meat).ok_or(Error::SingularMatrix {
        context: "sandwich bread".into(),
    })?;
    // covariance = bread^{-1} meat bread^{-T} = (bread^{-1} (bread^{-1} meat)')'
    let cov_t = lu.solve(&inv_meat.transpose()).ok_or(Error::SingularMatrix {
        context: "sandwich bread".into(),
    })?;
    let mut covariance = cov_t.transpose();
    // Kill the last-bit asymmetry from the two triangular solves.
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(SandwichCovariance {
        bread,
        meat,
        covariance,
    })
}
