//! Estimation strategies behind a common trait.
//!
//! Each method (NPM, GEE, QIF) implements [`Strategy`]: an estimating
//! function, its Jacobian, a nuisance update run once per outer iteration,
//! and a covariance estimator at the solution. Strategies are registered by
//! name and constructed at runtime from config or CLI input.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baseline::BaselineCdf;
use crate::data::{ClusteredDataset, Coefficients, CorrelationFamily, WorkingCorrelation};
use crate::error::{Error, Result};
use crate::{gee, qif};

/// Estimation method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Npm,
    Gee,
    Qif,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Npm => "npm",
            Method::Gee => "gee",
            Method::Qif => "qif",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "npm" => Ok(Method::Npm),
            "gee" => Ok(Method::Gee),
            "qif" => Ok(Method::Qif),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected one of: {})",
                method_names().join(", ")
            ))),
        }
    }
}

/// Events worth surfacing in the fit result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    RhoClipped { raw: f64, clipped: f64 },
    PhiFloored { raw: f64 },
    WeightRidged,
    CovarianceFormGap { max_rel_gap: f64 },
    StepHalved { outer_iteration: usize, halvings: usize },
    IterationAbandoned { outer_iteration: usize, reason: String },
    NonConvergence { best_score_norm: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::RhoClipped { raw, clipped } => {
                write!(f, "rho moment estimate {raw:.6} clipped to {clipped:.6}")
            }
            Diagnostic::PhiFloored { raw } => {
                write!(f, "dispersion estimate {raw:.3e} floored before division")
            }
            Diagnostic::WeightRidged => write!(f, "ridge added to the extended-score weight"),
            Diagnostic::CovarianceFormGap { max_rel_gap } => {
                write!(f, "sandwich vs simplified covariance gap {max_rel_gap:.3e}")
            }
            Diagnostic::StepHalved {
                outer_iteration,
                halvings,
            } => write!(
                f,
                "newton step halved {halvings} time(s) in outer iteration {outer_iteration}"
            ),
            Diagnostic::IterationAbandoned {
                outer_iteration,
                reason,
            } => write!(f, "outer iteration {outer_iteration} abandoned: {reason}"),
            Diagnostic::NonConvergence { best_score_norm } => write!(
                f,
                "did not converge; best iterate has score norm {best_score_norm:.3e}"
            ),
        }
    }
}

/// Current nuisance parameter values (populated by GEE strategies).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    pub phi: Option<f64>,
    pub rho: Option<f64>,
}

/// One interchangeable estimating-equation strategy.
pub trait Strategy: Send {
    fn method(&self) -> Method;

    fn family(&self) -> CorrelationFamily;

    /// Re-estimate nuisance parameters at the current iterate. Called once
    /// per outer iteration before the Newton solve; a no-op for methods
    /// without nuisance parameters.
    fn update_nuisance(
        &mut self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<()>;

    /// The estimating function whose root is the estimate.
    fn score(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DVector<f64>>;

    /// Analytic derivative of [`Strategy::score`] with nuisance and baseline
    /// held fixed.
    fn jacobian(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DMatrix<f64>>;

    /// Finite-sample covariance of the estimate at the solution.
    fn covariance(
        &mut self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DMatrix<f64>>;

    /// Merit function for the Newton line search. Root-finding methods with
    /// an exact Jacobian damp on the score norm; the GMM method damps on
    /// its objective.
    fn merit(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<f64> {
        Ok(self.score(beta, dataset, baseline)?.amax())
    }

    /// Score and merit in one evaluation, for the line search. Strategies
    /// whose score and merit share intermediate work override this.
    fn evaluate(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<(DVector<f64>, f64)> {
        let score = self.score(beta, dataset, baseline)?;
        let merit = self.merit(beta, dataset, baseline)?;
        Ok((score, merit))
    }

    /// Steepest-descent fallback direction on the merit, for solvers whose
    /// Newton direction is built from an approximate Jacobian and can fail
    /// the line search far from the solution.
    fn descent_direction(
        &self,
        _beta: &Coefficients,
        _dataset: &ClusteredDataset,
        _baseline: &dyn BaselineCdf,
    ) -> Result<Option<DVector<f64>>> {
        Ok(None)
    }

    fn nuisance(&self) -> Nuisance {
        Nuisance::default()
    }

    /// Objective value for methods that minimize one (QIF).
    fn objective(
        &self,
        _beta: &Coefficients,
        _dataset: &ClusteredDataset,
        _baseline: &dyn BaselineCdf,
    ) -> Result<Option<f64>> {
        Ok(None)
    }

    fn drain_diagnostics(&mut self) -> Vec<Diagnostic> {
        Vec::new()
    }
}

/// Independence-working-assumption estimator: the comparison baseline.
struct NpmStrategy;

impl Strategy for NpmStrategy {
    fn method(&self) -> Method {
        Method::Npm
    }

    fn family(&self) -> CorrelationFamily {
        CorrelationFamily::Independence
    }

    fn update_nuisance(
        &mut self,
        _beta: &Coefficients,
        _dataset: &ClusteredDataset,
        _baseline: &dyn BaselineCdf,
    ) -> Result<()> {
        Ok(())
    }

    fn score(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DVector<f64>> {
        gee::score_independent(beta, dataset, baseline)
    }

    fn jacobian(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DMatrix<f64>> {
        gee::jacobian_gee(beta, dataset, baseline, &WorkingCorrelation::independence())
    }

    fn covariance(
        &mut self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DMatrix<f64>> {
        let s = gee::sandwich_covariance(
            beta,
            dataset,
            baseline,
            &WorkingCorrelation::independence(),
        )?;
        Ok(s.covariance)
    }
}

struct GeeStrategy {
    family: CorrelationFamily,
    corr: WorkingCorrelation,
    phi_raw: Option<f64>,
    diagnostics: Vec<Diagnostic>,
}

impl GeeStrategy {
    fn new(family: CorrelationFamily) -> Self {
        // Before the first nuisance update the working matrix is the
        // identity, so the first Newton solve starts from the independence
        // equations.
        let corr = match family {
            CorrelationFamily::Independence => WorkingCorrelation::independence(),
            f => WorkingCorrelation::new(f, 0.0, 1.0).expect("identity start"),
        };
        Self {
            family,
            corr,
            phi_raw: None,
            diagnostics: Vec::new(),
        }
    }
}

impl Strategy for GeeStrategy {
    fn method(&self) -> Method {
        Method::Gee
    }

    fn family(&self) -> CorrelationFamily {
        self.family
    }

    fn update_nuisance(
        &mut self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<()> {
        let residuals = gee::pearson_residuals_by_cluster(beta, dataset, baseline)?;
        let flat: Vec<f64> = residuals.iter().flatten().copied().collect();
        let phi = gee::estimate_phi(&flat, dataset.n_params())?;
        self.phi_raw = Some(phi);
        let phi_used = if phi < 1e-8 {
            self.diagnostics.push(Diagnostic::PhiFloored { raw: phi });
            1e-8
        } else {
            phi
        };
        match self.family {
            CorrelationFamily::Independence => {
                // The working matrix keeps phi = 1: the score is only scaled
                // by the dispersion, which moves neither the root nor the
                // sandwich. phi is still reported as a nuisance estimate.
                self.corr = WorkingCorrelation::independence();
            }
            family => {
                let est = gee::estimate_rho(&residuals, family, phi_used, dataset.p_x)?;
                if est.clipped {
                    self.diagnostics.push(Diagnostic::RhoClipped {
                        raw: est.raw,
                        clipped: est.rho,
                    });
                }
                self.corr = WorkingCorrelation::new(family, est.rho, phi_used)?;
            }
        }
        Ok(())
    }

    fn score(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DVector<f64>> {
        gee::score_gee(beta, dataset, baseline, &self.corr)
    }

    fn jacobian(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DMatrix<f64>> {
        gee::jacobian_gee(beta, dataset, baseline, &self.corr)
    }

    fn covariance(
        &mut self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DMatrix<f64>> {
        let s = gee::sandwich_covariance(beta, dataset, baseline, &self.corr)?;
        Ok(s.covariance)
    }

    fn nuisance(&self) -> Nuisance {
        Nuisance {
            phi: self.phi_raw,
            rho: self.corr.rho,
        }
    }

    fn drain_diagnostics(&mut self) -> Vec<Diagnostic> {
        std::mem::take(&mut self.diagnostics)
    }
}

struct QifStrategy {
    family: CorrelationFamily,
    diagnostics: Vec<Diagnostic>,
}

impl Strategy for QifStrategy {
    fn method(&self) -> Method {
        Method::Qif
    }

    fn family(&self) -> CorrelationFamily {
        self.family
    }

    fn update_nuisance(
        &mut self,
        _beta: &Coefficients,
        _dataset: &ClusteredDataset,
        _baseline: &dyn BaselineCdf,
    ) -> Result<()> {
        // The QIF construction absorbs the correlation parameters into the
        // GMM weighting; nothing to estimate here.
        Ok(())
    }

    fn score(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DVector<f64>> {
        qif::score_qif(beta, dataset, baseline, self.family)
    }

    fn jacobian(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DMatrix<f64>> {
        // Central finite differences of the full score, weight included.
        // The Gauss-Newton curvature Gdot' C^{-1} Gdot ignores the
        // derivatives of C and Gdot and fails to contract when the moment
        // residual is large.
        let p = beta.len();
        let mut jac = DMatrix::zeros(p, p);
        for w in 0..p {
            let h = 1e-6 * beta.as_slice()[w].abs().max(1.0);
            let mut plus = beta.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[w] += h;
            minus[w] -= h;
            let up = qif::score_qif(&Coefficients::new(plus)?, dataset, baseline, self.family)?;
            let um = qif::score_qif(&Coefficients::new(minus)?, dataset, baseline, self.family)?;
            for r in 0..p {
                jac[(r, w)] = (up[r] - um[r]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    fn covariance(
        &mut self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<DMatrix<f64>> {
        let qc = qif::qif_covariance(beta, dataset, baseline, self.family)?;
        if qc.ridged {
            self.diagnostics.push(Diagnostic::WeightRidged);
        }
        self.diagnostics.push(Diagnostic::CovarianceFormGap {
            max_rel_gap: qc.max_rel_gap,
        });
        Ok(qc.covariance)
    }

    fn objective(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<Option<f64>> {
        Ok(Some(qif::qif_objective(
            beta,
            dataset,
            baseline,
            self.family,
        )?))
    }

    fn merit(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<f64> {
        qif::qif_objective(beta, dataset, baseline, self.family)
    }

    fn evaluate(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<(DVector<f64>, f64)> {
        let sys = qif::qif_system(beta, dataset, baseline, self.family)?;
        let solved = sys.chol.solve(&sys.ext.mean);
        let score = sys.ext.jacobian.transpose() * &solved;
        let merit = sys.ext.mean.dot(&solved);
        Ok((score, merit))
    }

    fn descent_direction(
        &self,
        beta: &Coefficients,
        dataset: &ClusteredDataset,
        baseline: &dyn BaselineCdf,
    ) -> Result<Option<DVector<f64>>> {
        Ok(Some(-qif::qif_gradient(
            beta,
            dataset,
            baseline,
            self.family,
        )?))
    }

    fn drain_diagnostics(&mut self) -> Vec<Diagnostic> {
        std::mem::take(&mut self.diagnostics)
    }
}

/// Registry entry: a method name and its constructor.
pub struct MethodEntry {
    pub name: &'static str,
    pub build: fn(CorrelationFamily) -> Box<dyn Strategy>,
}

/// All registered strategies, selectable by name.
pub static METHODS: &[MethodEntry] = &[
    MethodEntry {
        name: "npm",
        build: |_family| Box::new(NpmStrategy),
    },
    MethodEntry {
        name: "gee",
        build: |family| Box::new(GeeStrategy::new(family)),
    },
    MethodEntry {
        name: "qif",
        build: |family| Box::new(QifStrategy {
            family,
            diagnostics: Vec::new(),
        }),
    },
];

pub fn method_names() -> Vec<&'static str> {
    METHODS.iter().map(|e| e.name).collect()
}

/// Construct a strategy by registered name. NPM ignores the family: it is
/// the independence estimator by definition.
pub fn create_strategy_by_name(
    name: &str,
    family: CorrelationFamily,
) -> Result<Box<dyn Strategy>> {
    let entry = METHODS
        .iter()
        .find(|e| e.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown method `{name}` (expected one of: {})",
                method_names().join(", ")
            ))
        })?;
    Ok((entry.build)(family))
}

pub fn create_strategy(method: Method, family: CorrelationFamily) -> Box<dyn Strategy> {
    create_strategy_by_name(method.as_str(), family).expect("registered method")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::StepCdf;
    use crate::data::{Cluster, Observation};

    fn dataset() -> (ClusteredDataset, Coefficients, StepCdf) {
        let mk = |id: &str, obs: &[(f64, u8, f64)]| {
            Cluster::new(
                id,
                obs.iter()
                    .map(|&(t, e, x)| Observation::new(t, e, vec![x]))
                    .collect(),
            )
        };
        let ds = ClusteredDataset::new(
            vec![
                mk("a", &[(0.4, 1, 0.3), (1.2, 0, -0.2)]),
                mk("b", &[(0.9, 1, 1.1), (2.0, 1, 0.0)]),
            ],
            1,
        );
        let beta = Coefficients::new(vec![0.1, -0.3]).unwrap();
        let base = StepCdf::new(vec![0.4, 0.9, 2.0], vec![0.3, 0.4, 0.3]).unwrap();
        (ds, beta, base)
    }

    #[test]
    fn registry_resolves_all_names() {
        for name in method_names() {
            let s = create_strategy_by_name(name, CorrelationFamily::Exchangeable).unwrap();
            assert_eq!(s.method().as_str(), name);
        }
        assert!(create_strategy_by_name("ols", CorrelationFamily::Independence).is_err());
    }

    #[test]
    fn npm_ignores_family() {
        let s = create_strategy(Method::Npm, CorrelationFamily::Ar1);
        assert_eq!(s.family(), CorrelationFamily::Independence);
    }

    #[test]
    fn gee_strategy_updates_nuisance_and_reports_it() {
        let (ds, beta, base) = dataset();
        let mut s = create_strategy(Method::Gee, CorrelationFamily::Exchangeable);
        assert!(s.nuisance().phi.is_none());
        s.update_nuisance(&beta, &ds, &base).unwrap();
        let nu = s.nuisance();
        assert!(nu.phi.unwrap() > 0.0);
        assert!(nu.rho.is_some());
    }

    #[test]
    fn strategies_score_through_the_trait() {
        let (ds, beta, base) = dataset();
        for method in [Method::Npm, Method::Gee, Method::Qif] {
            let s = create_strategy(method, CorrelationFamily::Exchangeable);
            let u = s.score(&beta, &ds, &base).unwrap();
            assert_eq!(u.len(), 2);
            let j = s.jacobian(&beta, &ds, &base).unwrap();
            assert_eq!((j.nrows(), j.ncols()), (2, 2));
        }
    }
}
