//! The complete alternating estimation procedure: update the baseline CDF at
//! the current coefficients, refresh nuisance parameters, run a damped
//! Newton solve of the selected estimating equation, and repeat to
//! convergence. Also the cluster bootstrap for nuisance-parameter variances.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{estimate_baseline, BaselineCdf, CureThreshold, StepCdf};
use crate::data::{validate, ClusteredDataset, Coefficients, CorrelationFamily};
use crate::error::{Error, Result};
use crate::estimator::{create_strategy, Diagnostic, Method, Strategy};

/// Everything needed to run one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: Method,
    pub family: CorrelationFamily,
    /// Cure threshold; defaults to the largest uncensored time.
    pub tau: Option<f64>,
    pub beta_init: Option<Vec<f64>>,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl FitConfig {
    pub fn new(method: Method, family: CorrelationFamily) -> Self {
        Self {
            method,
            family,
            tau: None,
            beta_init: None,
            outer_tol: 1e-6,
            outer_max_iter: 100,
            newton_tol: 1e-8,
            newton_max_iter: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0) || !(self.newton_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.outer_max_iter == 0 || self.newton_max_iter == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fit output: coefficients, covariance, baseline, nuisance estimates, and
/// convergence diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub family: CorrelationFamily,
    pub beta_hat: Vec<f64>,
    pub se: Vec<f64>,
    /// Row-major (p+1) x (p+1) covariance of the coefficient estimate.
    pub covariance: Vec<Vec<f64>>,
    pub baseline: StepCdf,
    pub tau: f64,
    pub phi_hat: Option<f64>,
    pub rho_hat: Option<f64>,
    pub qif_value: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the estimating function at the returned iterate.
    pub score_norm: f64,
    pub diagnostics: Vec<String>,
    pub n_clusters: usize,
    pub n_obs: usize,
    pub covariate_names: Vec<String>,
}

impl FitResult {
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.beta_hat.len();
        DMatrix::from_fn(p, p, |i, j| self.covariance[i][j])
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Coefficient table (`term,estimate,se`); GEE appends `rho` and `phi`
    /// rows without standard errors (those come from the bootstrap).
    pub fn write_table_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "term,estimate,se")?;
        writeln!(writer, "intercept,{},{}", self.beta_hat[0], self.se[0])?;
        for (i, name) in self.covariate_names.iter().enumerate() {
            writeln!(writer, "{name},{},{}", self.beta_hat[i + 1], self.se[i + 1])?;
        }
        if let Some(rho) = self.rho_hat {
            writeln!(writer, "rho,{rho},")?;
        }
        if let Some(phi) = self.phi_hat {
            writeln!(writer, "phi,{phi},")?;
        }
        Ok(())
    }
}

struct NewtonOutcome {
    beta: Coefficients,
    halvings: usize,
}

struct TrialState {
    beta: Coefficients,
    score: DVector<f64>,
    norm: f64,
    merit: f64,
}

/// Damped Newton solve of `score(beta) = 0` with the baseline and nuisance
/// held fixed.
///
/// Each step is halved (up to 30 times) until the score norm or the
/// strategy's merit decreases; trial evaluations that overflow count as
/// failures. When the Newton direction stalls and the strategy provides an
/// exact descent direction on its merit, one backtracked step along it
/// restarts progress (the QIF Newton direction comes from a Gauss-Newton
/// curvature, which can point uphill far from the solution).
fn newton_solve(
    strategy: &dyn Strategy,
    beta0: &Coefficients,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let (score0, merit0) = strategy.evaluate(beta0, dataset, baseline)?;
    let mut state = TrialState {
        norm: score0.amax(),
        beta: beta0.clone(),
        score: score0,
        merit: merit0,
    };
    let mut halvings = 0usize;

    for _ in 0..max_iter {
        if state.norm < tol {
            return Ok(NewtonOutcome {
                beta: state.beta,
                halvings,
            });
        }
        let jac = strategy.jacobian(&state.beta, dataset, baseline)?;
        let step = jac
            .lu()
            .solve(&(-&state.score))
            .ok_or(Error::SingularMatrix {
                context: format!("{} newton step", strategy.method()),
            })?;

        let mut accepted =
            backtrack(strategy, dataset, baseline, &mut state, &step, &mut halvings)?;
        if !accepted {
            if let Some(direction) =
                strategy.descent_direction(&state.beta, dataset, baseline)?
            {
                accepted = backtrack(
                    strategy,
                    dataset,
                    baseline,
                    &mut state,
                    &direction,
                    &mut halvings,
                )?;
            }
        }
        if !accepted {
            // Nothing improves either criterion; report the current iterate.
            return Ok(NewtonOutcome {
                beta: state.beta,
                halvings,
            });
        }
    }
    Ok(NewtonOutcome {
        beta: state.beta,
        halvings,
    })
}

fn backtrack(
    strategy: &dyn Strategy,
    dataset: &ClusteredDataset,
    baseline: &dyn BaselineCdf,
    state: &mut TrialState,
    direction: &DVector<f64>,
    halvings: &mut usize,
) -> Result<bool> {
    let mut alpha = 1.0;
    for _ in 0..=30 {
        let trial = trial_beta(&state.beta, direction, alpha);
        match strategy.evaluate(&trial, dataset, baseline) {
            Ok((score, merit)) => {
                let norm = score.amax();
                if norm < state.norm || merit < state.merit {
                    *state = TrialState {
                        beta: trial,
                        score,
                        norm,
                        merit,
                    };
                    return Ok(true);
                }
            }
            Err(Error::LinearPredictorOverflow { .. }) => {}
            Err(Error::SingularMatrix { .. }) => {}
            Err(e) => return Err(e),
        }
        alpha *= 0.5;
        *halvings += 1;
    }
    Ok(false)
}

fn trial_beta(beta: &Coefficients, step: &DVector<f64>, alpha: f64) -> Coefficients {
    let v: Vec<f64> = beta
        .as_slice()
        .iter()
        .zip(step.iter())
        .map(|(b, s)| b + alpha * s)
        .collect();
    Coefficients::new(v).expect("finite trial coefficients")
}

/// Run the full alternating procedure on a validated dataset.
pub fn fit(dataset: &ClusteredDataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let violations = validate(dataset);
    if !violations.is_empty() {
        return Err(Error::InvalidDataset {
            count: violations.len(),
            first: violations[0].to_string(),
        });
    }

    let tau = match config.tau {
        Some(t) => CureThreshold::new(t, dataset)?,
        None => CureThreshold::from_dataset(dataset)?,
    };
    let p = dataset.n_params();
    let mut beta = match &config.beta_init {
        Some(v) => {
            if v.len() != p {
                return Err(Error::Dimension(format!(
                    "beta_init has length {}, expected {p}",
                    v.len()
                )));
            }
            Coefficients::new(v.clone())?
        }
        // The continuous-updating GMM objective is only trustworthy near
        // the solution; seed the QIF solve with the independence estimate,
        // which is root-n consistent for the same target.
        None if config.method == Method::Qif => {
            let mut warm = config.clone();
            warm.method = Method::Npm;
            warm.family = CorrelationFamily::Independence;
            Coefficients::new(fit(dataset, &warm)?.beta_hat)?
        }
        None => Coefficients::zeros(p),
    };

    let mut strategy = create_strategy(config.method, config.family);
    let mut baseline = estimate_baseline(&beta, dataset, tau)?;
    let mut diagnostics: Vec<Diagnostic> = Vec::new();

    let mut converged = false;
    let mut iterations = 0usize;
    let mut best: Option<(f64, Coefficients)> = None;

    for outer in 1..=config.outer_max_iter {
        iterations = outer;
        // Failures on an interim iterate (a wild trial can make the
        // multiplier equation degenerate) end the iteration and fall back to
        // the best iterate; only a failure before any progress is an error.
        let step = (|| -> Result<(Coefficients, usize)> {
            strategy.update_nuisance(&beta, dataset, &baseline)?;
            let nr = newton_solve(
                strategy.as_ref(),
                &beta,
                dataset,
                &baseline,
                config.newton_tol,
                config.newton_max_iter,
            )?;
            Ok((nr.beta, nr.halvings))
        })();
        let (beta_new, halvings) = match step {
            Ok(v) => v,
            Err(e) if best.is_some() => {
                diagnostics.push(Diagnostic::IterationAbandoned {
                    outer_iteration: outer,
                    reason: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        if halvings > 0 {
            diagnostics.push(Diagnostic::StepHalved {
                outer_iteration: outer,
                halvings,
            });
        }
        let delta = max_abs_diff(beta.as_slice(), beta_new.as_slice());

        let refreshed = (|| -> Result<(StepCdf, f64)> {
            let baseline_new = estimate_baseline(&beta_new, dataset, tau)?;
            // The joint fixed point must satisfy the estimating equation
            // with the refreshed baseline, not just the one Newton solved
            // against.
            let norm = strategy.score(&beta_new, dataset, &baseline_new)?.amax();
            Ok((baseline_new, norm))
        })();
        let norm_after = match refreshed {
            Ok((baseline_new, norm)) => {
                beta = beta_new;
                baseline = baseline_new;
                norm
            }
            Err(e) if best.is_some() => {
                diagnostics.push(Diagnostic::IterationAbandoned {
                    outer_iteration: outer,
                    reason: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        if best.as_ref().map_or(true, |(n, _)| norm_after < *n) {
            best = Some((norm_after, beta.clone()));
        }
        if delta < config.outer_tol && norm_after < 10.0 * config.newton_tol {
            converged = true;
            break;
        }
    }

    if !converged {
        if let Some((norm, b)) = best {
            diagnostics.push(Diagnostic::NonConvergence {
                best_score_norm: norm,
            });
            beta = b;
            baseline = estimate_baseline(&beta, dataset, tau)?;
        }
    }

    // Refresh nuisance at the fixed point so the covariance and reported
    // values correspond to the returned iterate.
    strategy.update_nuisance(&beta, dataset, &baseline)?;
    let score_norm = strategy.score(&beta, dataset, &baseline)?.amax();
    let covariance = strategy.covariance(&beta, dataset, &baseline)?;
    let se: Vec<f64> = (0..p).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
    let qif_value = strategy.objective(&beta, dataset, &baseline)?;
    let nuisance = strategy.nuisance();
    diagnostics.extend(strategy.drain_diagnostics());

    Ok(FitResult {
        method: config.method,
        family: strategy.family(),
        beta_hat: beta.as_slice().to_vec(),
        se,
        covariance: (0..p)
            .map(|i| (0..p).map(|j| covariance[(i, j)]).collect())
            .collect(),
        baseline,
        tau: tau.value(),
        phi_hat: nuisance.phi,
        rho_hat: nuisance.rho,
        qif_value,
        iterations,
        converged,
        score_norm,
        diagnostics: diagnostics.iter().map(ToString::to_string).collect(),
        n_clusters: dataset.n_clusters(),
        n_obs: dataset.n_obs(),
        covariate_names: dataset.covariate_names.clone(),
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Cluster bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config("bootstrap needs at least 2 replicates".into()));
        }
        Ok(())
    }
}

/// Bootstrap variance estimates for the nuisance quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub failed: usize,
    pub var_phi: Option<f64>,
    pub var_rho: Option<f64>,
    /// `(query time, variance of the baseline CDF value there)`.
    pub var_baseline: Vec<(f64, f64)>,
}

/// Resample clusters with replacement, refit each replicate, and report the
/// sample variances of the nuisance estimates. Aborts when more than 20% of
/// replicates fail to converge.
pub fn bootstrap(
    dataset: &ClusteredDataset,
    config: &FitConfig,
    boot: &BootstrapConfig,
    query_times: Option<&[f64]>,
) -> Result<BootstrapSummary> {
    boot.validate()?;
    let base_fit = fit(dataset, config)?;
    if !base_fit.converged {
        return Err(Error::Fit(
            "bootstrap requires a converged fit on the original data".into(),
        ));
    }

    let queries: Vec<f64> = match query_times {
        Some(q) => q.to_vec(),
        None => default_query_times(dataset),
    };

    let replicate_results: Vec<Option<(Option<f64>, Option<f64>, Vec<f64>)>> = (0..boot
        .replicates)
        .into_par_iter()
        .map(|r| {
            let resampled = resample_clusters(dataset, mix_seed(boot.seed, r as u64));
            match fit(&resampled, config) {
                Ok(res) if res.converged => {
                    let fp: Vec<f64> = queries.iter().map(|&t| res.baseline.cdf(t)).collect();
                    Some((res.phi_hat, res.rho_hat, fp))
                }
                _ => None,
            }
        })
        .collect();

    let used: Vec<&(Option<f64>, Option<f64>, Vec<f64>)> =
        replicate_results.iter().flatten().collect();
    let failed = boot.replicates - used.len();
    if failed * 5 > boot.replicates {
        return Err(Error::BootstrapFailures {
            failed,
            total: boot.replicates,
        });
    }

    let phis: Vec<f64> = used.iter().filter_map(|(p, _, _)| *p).collect();
    let rhos: Vec<f64> = used.iter().filter_map(|(_, r, _)| *r).collect();
    let var_phi = (phis.len() == used.len() && used.len() >= 2).then(|| sample_variance(&phis));
    let var_rho = (rhos.len() == used.len() && used.len() >= 2).then(|| sample_variance(&rhos));
    let var_baseline = queries
        .iter()
        .enumerate()
        .map(|(qi, &t)| {
            let vals: Vec<f64> = used.iter().map(|(_, _, fp)| fp[qi]).collect();
            (t, sample_variance(&vals))
        })
        .collect();

    Ok(BootstrapSummary {
        replicates_requested: boot.replicates,
        replicates_used: used.len(),
        failed,
        var_phi,
        var_rho,
        var_baseline,
    })
}

fn default_query_times(dataset: &ClusteredDataset) -> Vec<f64> {
    let mut times: Vec<f64> = dataset
        .iter_obs()
        .filter(|o| o.is_event())
        .map(|o| o.time)
        .collect();
    times.sort_by(f64::total_cmp);
    if times.is_empty() {
        return Vec::new();
    }
    [0.25, 0.5, 0.75]
        .iter()
        .map(|&q| times[(((times.len() - 1) as f64) * q).round() as usize])
        .collect()
}

/// Draw K clusters uniformly with replacement, preserving within-cluster
/// observation order.
pub fn resample_clusters(dataset: &ClusteredDataset, seed: u64) -> ClusteredDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = dataset.n_clusters();
    let clusters: Vec<_> = (0..k)
        .map(|_| dataset.clusters[rng.gen_range(0..k)].clone())
        .collect();
    let mut out = ClusteredDataset::new(clusters, dataset.p_x);
    out.covariate_names = dataset.covariate_names.clone();
    out
}

pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
}

/// Deterministic sub-seed derivation (SplitMix64 over the pair).
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cluster, Observation};

    fn toy_dataset(seed: u64, k: usize, n: usize) -> ClusteredDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clusters = (0..k)
            .map(|i| {
                let obs = (0..n)
                    .map(|_| {
                        let t: f64 = rng.gen_range(0.05..2.5);
                        let e = u8::from(rng.gen_bool(0.75));
                        Observation::new(t, e, vec![rng.gen_range(-1.0..1.0)])
                    })
                    .collect();
                Cluster::new(format!("c{i}"), obs)
            })
            .collect();
        ClusteredDataset::new(clusters, 1)
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = toy_dataset(7, 25, 3);
        let cfg = FitConfig::new(Method::Gee, CorrelationFamily::Exchangeable);
        let a = fit(&ds, &cfg).unwrap();
        let b = fit(&ds, &cfg).unwrap();
        assert_eq!(a.beta_hat, b.beta_hat);
        assert_eq!(a.se, b.se);
        assert_eq!(a.rho_hat, b.rho_hat);
    }

    #[test]
    fn converged_fit_has_small_score_and_proper_baseline() {
        let ds = toy_dataset(11, 30, 3);
        for method in [Method::Npm, Method::Gee, Method::Qif] {
            let cfg = FitConfig::new(method, CorrelationFamily::Exchangeable);
            let res = fit(&ds, &cfg).unwrap();
            assert!(res.converged, "{method} did not converge");
            assert!(
                res.score_norm < 10.0 * cfg.newton_tol,
                "{method}: |U| = {}",
                res.score_norm
            );
            assert!((res.baseline.total_mass() - 1.0).abs() < 1e-10);
            for i in 0..res.se.len() {
                assert!((res.se[i] - res.covariance[i][i].sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gee_independence_matches_npm_estimates() {
        let ds = toy_dataset(23, 20, 4);
        let npm = fit(&ds, &FitConfig::new(Method::Npm, CorrelationFamily::Independence)).unwrap();
        let gee = fit(&ds, &FitConfig::new(Method::Gee, CorrelationFamily::Independence)).unwrap();
        for i in 0..npm.beta_hat.len() {
            assert!((npm.beta_hat[i] - gee.beta_hat[i]).abs() < 1e-8);
        }
        // GEE reports a dispersion estimate; NPM does not.
        assert!(gee.phi_hat.is_some());
        assert!(npm.phi_hat.is_none());
    }

    #[test]
    fn cluster_relabeling_leaves_estimates_unchanged() {
        let ds = toy_dataset(31, 12, 3);
        let mut permuted = ds.clone();
        permuted.clusters.reverse();
        let cfg = FitConfig::new(Method::Gee, CorrelationFamily::Ar1);
        let a = fit(&ds, &cfg).unwrap();
        let b = fit(&permuted, &cfg).unwrap();
        for i in 0..a.beta_hat.len() {
            assert!((a.beta_hat[i] - b.beta_hat[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_dataset_is_rejected() {
        let ds = ClusteredDataset::new(
            vec![Cluster::new("a", vec![Observation::new(1.0, 2, vec![])])],
            0,
        );
        let cfg = FitConfig::new(Method::Npm, CorrelationFamily::Independence);
        assert!(matches!(
            fit(&ds, &cfg),
            Err(Error::InvalidDataset { .. })
        ));
    }

    #[test]
    fn bootstrap_single_cluster_has_zero_variance() {
        // Every resample of a one-cluster dataset is that cluster again.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs = (0..6)
            .map(|_| {
                Observation::new(
                    rng.gen_range(0.1..2.0),
                    u8::from(rng.gen_bool(0.8)),
                    vec![rng.gen_range(-1.0..1.0)],
                )
            })
            .collect();
        let ds = ClusteredDataset::new(vec![Cluster::new("only", obs)], 1);
        let cfg = FitConfig::new(Method::Gee, CorrelationFamily::Exchangeable);
        let boot = BootstrapConfig {
            replicates: 4,
            seed: 99,
        };
        let summary = bootstrap(&ds, &cfg, &boot, None).unwrap();
        assert_eq!(summary.failed, 0);
        assert!(summary.var_phi.unwrap() < 1e-24);
        assert!(summary.var_rho.unwrap() < 1e-24);
        for (_, v) in &summary.var_baseline {
            assert!(*v < 1e-24);
        }
    }

    #[test]
    fn bootstrap_baseline_variance_positive_on_mixed_data() {
        let ds = toy_dataset(41, 20, 3);
        let cfg = FitConfig::new(Method::Npm, CorrelationFamily::Independence);
        let boot = BootstrapConfig {
            replicates: 12,
            seed: 5,
        };
        let summary = bootstrap(&ds, &cfg, &boot, None).unwrap();
        assert!(summary
            .var_baseline
            .iter()
            .any(|(_, v)| *v > 0.0));
    }

    #[test]
    fn table_csv_has_nuisance_rows_for_gee() {
        let ds = toy_dataset(51, 15, 3);
        let res = fit(
            &ds,
            &FitConfig::new(Method::Gee, CorrelationFamily::Exchangeable),
        )
        .unwrap();
        let mut out = Vec::new();
        res.write_table_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("term,estimate,se\n"));
        assert!(text.contains("\nrho,"));
        assert!(text.contains("\nphi,"));

        let npm = fit(&ds, &FitConfig::new(Method::Npm, CorrelationFamily::Independence)).unwrap();
        let mut out = Vec::new();
        npm.write_table_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(!text.contains("rho"));
    }
}
