//! Core domain types for clustered right-censored survival data with a cure
//! fraction, plus dataset validation and CSV ingestion.
//!
//! The model for an observation with design row `x = (1, x*)` is
//! `S(t | x) = exp(-exp(beta' x) * F_p(t))` with cure probability
//! `exp(-exp(beta' x))`, where `F_p` is a proper baseline CDF.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear predictors beyond this magnitude are treated as overflow rather
/// than silently saturating `exp`.
pub const LINEAR_PREDICTOR_LIMIT: f64 = 700.0;

/// One follow-up record: observed time, event indicator, covariates without
/// the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    /// 1 = failure observed, 0 = censored. Stored as an integer so that
    /// validation can report non-binary inputs instead of rejecting them at
    /// construction.
    pub event: u8,
    pub covariates: Vec<f64>,
}

impl Observation {
    pub fn new(time: f64, event: u8, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }

    pub fn is_event(&self) -> bool {
        self.event == 1
    }
}

/// A cluster of observations. Within-cluster order is meaningful (the AR(1)
/// structures are indexed by position) and is preserved everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub observations: Vec<Observation>,
}

impl Cluster {
    pub fn new(id: impl Into<String>, observations: Vec<Observation>) -> Self {
        Self {
            id: id.into(),
            observations,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Clustered dataset: `K` clusters, `p_x` covariates per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredDataset {
    pub clusters: Vec<Cluster>,
    pub p_x: usize,
    pub covariate_names: Vec<String>,
}

impl ClusteredDataset {
    pub fn new(clusters: Vec<Cluster>, p_x: usize) -> Self {
        let covariate_names = (1..=p_x).map(|i| format!("x{i}")).collect();
        Self {
            clusters,
            p_x,
            covariate_names,
        }
    }

    /// Number of regression parameters including the intercept.
    pub fn n_params(&self) -> usize {
        self.p_x + 1
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_obs(&self) -> usize {
        self.clusters.iter().map(Cluster::len).sum()
    }

    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().map(Cluster::len).max().unwrap_or(0)
    }

    pub fn n_events(&self) -> usize {
        self.iter_obs().filter(|o| o.is_event()).count()
    }

    /// Iterate observations in dataset order (cluster order, then
    /// within-cluster order).
    pub fn iter_obs(&self) -> impl Iterator<Item = &Observation> {
        self.clusters.iter().flat_map(|c| c.observations.iter())
    }

    /// Largest uncensored time, if any event was observed.
    pub fn max_uncensored_time(&self) -> Option<f64> {
        self.iter_obs()
            .filter(|o| o.is_event())
            .map(|o| o.time)
            .fold(None, |acc, t| Some(acc.map_or(t, |a: f64| a.max(t))))
    }

    /// Read the documented CSV format: header `cluster,time,event,x1,...,xp`.
    /// Rows are grouped by the cluster column; cluster order follows first
    /// appearance and within-cluster order follows file order.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let headers = rdr
            .headers()
            .map_err(|e| csv_error(1, e.to_string()))?
            .clone();
        if headers.len() < 3 {
            return Err(csv_error(
                1,
                format!(
                    "expected header `cluster,time,event,x1,...`, found {} column(s)",
                    headers.len()
                ),
            ));
        }
        for (idx, expected) in ["cluster", "time", "event"].iter().enumerate() {
            if !headers[idx].eq_ignore_ascii_case(expected) {
                return Err(csv_error(
                    1,
                    format!("column {} must be `{expected}`, found `{}`", idx + 1, &headers[idx]),
                ));
            }
        }
        let covariate_names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
        let p_x = covariate_names.len();

        let mut order: Vec<String> = Vec::new();
        let mut grouped: std::collections::HashMap<String, Vec<Observation>> =
            std::collections::HashMap::new();

        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, csv::Position::line);
                csv_error(line, e.to_string())
            })?;
            let line = record.position().map_or(0, csv::Position::line);
            if record.len() != 3 + p_x {
                return Err(csv_error(
                    line,
                    format!("expected {} fields, found {}", 3 + p_x, record.len()),
                ));
            }
            let cluster_id = record[0].to_string();
            let time: f64 = parse_field(&record[1], "time", line)?;
            let event: u8 = parse_field(&record[2], "event", line)?;
            let mut covariates = Vec::with_capacity(p_x);
            for (j, name) in covariate_names.iter().enumerate() {
                covariates.push(parse_field(&record[3 + j], name, line)?);
            }
            if !grouped.contains_key(&cluster_id) {
                order.push(cluster_id.clone());
            }
            grouped
                .entry(cluster_id)
                .or_default()
                .push(Observation::new(time, event, covariates));
        }

        let clusters = order
            .into_iter()
            .map(|id| {
                let observations = grouped.remove(&id).unwrap_or_default();
                Cluster { id, observations }
            })
            .collect();

        Ok(Self {
            clusters,
            p_x,
            covariate_names,
        })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Write the same CSV format consumed by `from_csv_reader`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        write!(writer, "cluster,time,event")?;
        for name in &self.covariate_names {
            write!(writer, ",{name}")?;
        }
        writeln!(writer)?;
        for cluster in &self.clusters {
            for obs in &cluster.observations {
                write!(writer, "{},{},{}", cluster.id, obs.time, obs.event)?;
                for x in &obs.covariates {
                    write!(writer, ",{x}")?;
                }
                writeln!(writer)?;
            }
        }
        Ok(())
    }
}

fn csv_error(line: u64, message: String) -> Error {
    Error::Csv { line, message }
}

fn parse_field<T: FromStr>(raw: &str, name: &str, line: u64) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| csv_error(line, format!("cannot parse `{raw}` as {name}")))
}

/// A single invariant violation found by [`validate`], with coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Cluster index (dataset order), when the violation is local.
    pub cluster: Option<usize>,
    /// Observation index within the cluster, when applicable.
    pub observation: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.cluster, self.observation) {
            (Some(c), Some(o)) => write!(f, "cluster {c}, observation {o}: {}", self.message),
            (Some(c), None) => write!(f, "cluster {c}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

fn violation(cluster: Option<usize>, observation: Option<usize>, message: String) -> Violation {
    Violation {
        cluster,
        observation,
        message,
    }
}

/// Check every dataset invariant and return the list of violations.
/// An empty report means the dataset is valid. Violations are data, not
/// errors, so this never fails.
pub fn validate(dataset: &ClusteredDataset) -> Vec<Violation> {
    let mut report = Vec::new();

    if dataset.clusters.is_empty() {
        report.push(violation(None, None, "dataset has no clusters".into()));
    }
    for (ci, cluster) in dataset.clusters.iter().enumerate() {
        if cluster.is_empty() {
            report.push(violation(Some(ci), None, "cluster is empty".into()));
        }
        for (oi, obs) in cluster.observations.iter().enumerate() {
            if !obs.time.is_finite() || obs.time < 0.0 {
                report.push(violation(
                    Some(ci),
                    Some(oi),
                    format!("time {} is not a finite nonnegative number", obs.time),
                ));
            }
            if obs.event > 1 {
                report.push(violation(
                    Some(ci),
                    Some(oi),
                    format!("event not binary (found {})", obs.event),
                ));
            }
            if obs.covariates.len() != dataset.p_x {
                report.push(violation(
                    Some(ci),
                    Some(oi),
                    format!(
                        "covariate count {} differs from dataset p_x {}",
                        obs.covariates.len(),
                        dataset.p_x
                    ),
                ));
            }
            if obs.covariates.iter().any(|x| !x.is_finite()) {
                report.push(violation(
                    Some(ci),
                    Some(oi),
                    "covariate is not finite".into(),
                ));
            }
        }
    }

    // Only meaningful once every event indicator is actually binary.
    let events_binary = report.is_empty();
    if events_binary && dataset.n_events() == 0 && dataset.n_obs() > 0 {
        report.push(violation(
            None,
            None,
            "no uncensored observation; the baseline CDF is undefined".into(),
        ));
    }

    // Rank check on the design matrix with the intercept prepended, via the
    // Gram matrix (p is small). Datasets with fewer observations than
    // parameters can only be full row rank.
    if report.is_empty() && dataset.n_obs() > 0 {
        let full = dataset.n_params().min(dataset.n_obs());
        if design_rank(dataset) < full {
            report.push(violation(
                None,
                None,
                "design matrix (with intercept) is rank deficient".into(),
            ));
        }
    }

    report
}

fn design_rank(dataset: &ClusteredDataset) -> usize {
    let p = dataset.n_params();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(p, p);
    for obs in dataset.iter_obs() {
        let row = design_row(obs);
        for a in 0..p {
            for b in 0..p {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    let eig = gram.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if max_ev == 0.0 {
        return 0;
    }
    let tol = max_ev * (p as f64) * f64::EPSILON * 16.0;
    eig.eigenvalues.iter().filter(|&&v| v.abs() > tol).count()
}

/// Design row `(1, x*)` for one observation.
pub fn design_row(obs: &Observation) -> Vec<f64> {
    let mut row = Vec::with_capacity(obs.covariates.len() + 1);
    row.push(1.0);
    row.extend_from_slice(&obs.covariates);
    row
}

/// Regression coefficients `(beta_0, beta_1, ..., beta_pX)`, intercept first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    values: Vec<f64>,
}

impl Coefficients {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("coefficient vector is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("coefficient vector has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        Self {
            values: v.iter().copied().collect(),
        }
    }
}

/// `beta' x` with the intercept handled; errors on length mismatch.
pub fn linear_predictor(beta: &Coefficients, obs: &Observation) -> Result<f64> {
    if beta.len() != obs.covariates.len() + 1 {
        return Err(Error::Dimension(format!(
            "coefficient length {} does not match covariate count {} + intercept",
            beta.len(),
            obs.covariates.len()
        )));
    }
    let b = beta.as_slice();
    let mut lp = b[0];
    for (bk, xk) in b[1..].iter().zip(&obs.covariates) {
        lp += bk * xk;
    }
    Ok(lp)
}

/// Mean function `mu(x) = exp(beta' x)`. Reports overflow instead of
/// saturating, so a wild Newton step is visible to the caller.
pub fn mu(beta: &Coefficients, obs: &Observation) -> Result<f64> {
    let lp = linear_predictor(beta, obs)?;
    if lp.abs() > LINEAR_PREDICTOR_LIMIT {
        return Err(Error::LinearPredictorOverflow {
            value: lp,
            limit: LINEAR_PREDICTOR_LIMIT,
        });
    }
    Ok(lp.exp())
}

/// Cure probability `exp(-exp(beta' x))`, the long-run survival level.
pub fn cure_probability(beta: &Coefficients, obs: &Observation) -> Result<f64> {
    let lp = linear_predictor(beta, obs)?;
    Ok((-lp.exp()).exp())
}

/// Working correlation structure family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrelationFamily {
    Independence,
    Exchangeable,
    Ar1,
}

impl CorrelationFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorrelationFamily::Independence => "independence",
            CorrelationFamily::Exchangeable => "exchangeable",
            CorrelationFamily::Ar1 => "ar1",
        }
    }
}

impl fmt::Display for CorrelationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrelationFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independence" | "independent" | "ind" => Ok(CorrelationFamily::Independence),
            "exchangeable" | "exch" | "cs" => Ok(CorrelationFamily::Exchangeable),
            "ar1" | "ar(1)" => Ok(CorrelationFamily::Ar1),
            other => Err(Error::Config(format!(
                "unknown correlation family `{other}` (expected independence, exchangeable, or ar1)"
            ))),
        }
    }
}

/// A working correlation matrix family together with its nuisance
/// parameters. Independence carries no rho and a unit dispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingCorrelation {
    pub family: CorrelationFamily,
    pub rho: Option<f64>,
    pub phi: f64,
}

impl WorkingCorrelation {
    pub fn independence() -> Self {
        Self {
            family: CorrelationFamily::Independence,
            rho: None,
            phi: 1.0,
        }
    }

    pub fn new(family: CorrelationFamily, rho: f64, phi: f64) -> Result<Self> {
        if family == CorrelationFamily::Independence {
            return Ok(Self::independence());
        }
        if !(-1.0..1.0).contains(&rho) || !rho.is_finite() {
            return Err(Error::Config(format!("rho {rho} outside (-1, 1)")));
        }
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(Error::Config(format!("dispersion phi {phi} must be positive")));
        }
        Ok(Self {
            family,
            rho: Some(rho),
            phi,
        })
    }

    pub fn rho_or_zero(&self) -> f64 {
        self.rho.unwrap_or(0.0)
    }

    /// Check that the implied matrix is positive definite for every cluster
    /// size up to `n_max`.
    pub fn check_positive_definite(&self, n_max: usize) -> Result<()> {
        let rho = self.rho_or_zero();
        let lb = crate::corr::rho_lower_bound(self.family, n_max);
        if rho <= lb || rho >= 1.0 {
            return Err(Error::Config(format!(
                "rho {rho} leaves the positive-definite range ({lb}, 1) for {} at size {n_max}",
                self.family
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(time: f64, event: u8, covariates: &[f64]) -> Observation {
        Observation::new(time, event, covariates.to_vec())
    }

    fn one_cluster_dataset(observations: Vec<Observation>, p_x: usize) -> ClusteredDataset {
        ClusteredDataset::new(vec![Cluster::new("c1", observations)], p_x)
    }

    #[test]
    fn minimal_valid_dataset_has_empty_report() {
        let ds = one_cluster_dataset(vec![obs(1.0, 1, &[0.5])], 1);
        assert!(validate(&ds).is_empty());
    }

    #[test]
    fn non_binary_event_is_reported() {
        let ds = one_cluster_dataset(vec![obs(1.0, 2, &[0.5])], 1);
        let report = validate(&ds);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("event not binary"));
        assert_eq!(report[0].cluster, Some(0));
        assert_eq!(report[0].observation, Some(0));
    }

    /// Oracle: rank by Gaussian elimination with partial pivoting on the
    /// stacked design rows.
    fn rank_by_elimination(rows: &[Vec<f64>]) -> usize {
        let mut m: Vec<Vec<f64>> = rows.to_vec();
        let nrows = m.len();
        let ncols = m[0].len();
        let mut rank = 0;
        let mut row = 0;
        for col in 0..ncols {
            let mut pivot = row;
            for r in row..nrows {
                if m[r][col].abs() > m[pivot][col].abs() {
                    pivot = r;
                }
            }
            if m[pivot][col].abs() < 1e-12 {
                continue;
            }
            m.swap(row, pivot);
            for r in 0..nrows {
                if r != row {
                    let f = m[r][col] / m[row][col];
                    for c in col..ncols {
                        m[r][c] -= f * m[row][c];
                    }
                }
            }
            rank += 1;
            row += 1;
            if row == nrows {
                break;
            }
        }
        rank
    }

    #[test]
    fn rank_check_matches_elimination_oracle() {
        // A non-constant covariate keeps the design full rank.
        let ds_ok = one_cluster_dataset(vec![obs(1.0, 1, &[0.0]), obs(2.0, 1, &[0.7])], 1);
        let rows: Vec<Vec<f64>> = ds_ok.iter_obs().map(design_row).collect();
        assert_eq!(rank_by_elimination(&rows), 2);
        assert!(validate(&ds_ok).is_empty());

        // A zero column is linearly dependent by the elimination oracle,
        // exactly like a covariate duplicating the intercept.
        let ds_zero = one_cluster_dataset(vec![obs(1.0, 1, &[0.0]), obs(2.0, 1, &[0.0])], 1);
        let rows: Vec<Vec<f64>> = ds_zero.iter_obs().map(design_row).collect();
        assert_eq!(rank_by_elimination(&rows), 1);
        let report = validate(&ds_zero);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("rank"));

        let ds_one = one_cluster_dataset(vec![obs(1.0, 1, &[1.0]), obs(2.0, 1, &[1.0])], 1);
        let rows: Vec<Vec<f64>> = ds_one.iter_obs().map(design_row).collect();
        assert_eq!(rank_by_elimination(&rows), 1);
        let report = validate(&ds_one);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("rank"));
    }

    #[test]
    fn all_censored_dataset_is_flagged() {
        let ds = one_cluster_dataset(vec![obs(1.0, 0, &[0.5])], 1);
        let report = validate(&ds);
        assert!(report.iter().any(|v| v.message.contains("no uncensored")));
    }

    #[test]
    fn design_row_prepends_single_intercept() {
        assert_eq!(design_row(&obs(1.0, 1, &[])), vec![1.0]);
        assert_eq!(design_row(&obs(1.0, 1, &[2.0, -1.0])), vec![1.0, 2.0, -1.0]);
        assert_eq!(design_row(&obs(1.0, 1, &[0.3])), vec![1.0, 0.3]);
    }

    #[test]
    fn mu_matches_scalar_evaluation() {
        let zero = Coefficients::zeros(1);
        assert_eq!(mu(&zero, &obs(1.0, 1, &[])).unwrap(), 1.0);

        let beta = Coefficients::new(vec![-0.5, 1.0, 1.0]).unwrap();
        let m = mu(&beta, &obs(1.0, 1, &[0.0, 0.0])).unwrap();
        assert!((m - (-0.5_f64).exp()).abs() < 1e-12);
        assert!((m - 0.60653).abs() < 1e-5);

        let beta1 = Coefficients::new(vec![1.0]).unwrap();
        assert!((mu(&beta1, &obs(1.0, 1, &[])).unwrap() - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn mu_reports_overflow() {
        let beta = Coefficients::new(vec![800.0]).unwrap();
        match mu(&beta, &obs(1.0, 1, &[])) {
            Err(Error::LinearPredictorOverflow { value, .. }) => assert_eq!(value, 800.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn cure_probability_known_values() {
        let zero = Coefficients::zeros(1);
        let p = cure_probability(&zero, &obs(1.0, 1, &[])).unwrap();
        assert!((p - (-1.0_f64).exp()).abs() < 1e-12);

        let table8_intercept = Coefficients::new(vec![-2.336, 0.0]).unwrap();
        let p = cure_probability(&table8_intercept, &obs(1.0, 1, &[0.0])).unwrap();
        assert!((p - 0.9078).abs() < 1e-4);
    }

    #[test]
    fn cure_probability_strictly_decreasing_in_linear_predictor() {
        let mut last = f64::INFINITY;
        for i in 0..100 {
            let lp = -6.0 + 12.0 * (i as f64) / 99.0;
            let beta = Coefficients::new(vec![lp]).unwrap();
            let p = cure_probability(&beta, &obs(1.0, 1, &[])).unwrap();
            assert!(p < last, "not decreasing at lp={lp}");
            last = p;
        }
        // Limit behavior: large positive predictor drives the probability to 0.
        let beta = Coefficients::new(vec![600.0]).unwrap();
        assert_eq!(cure_probability(&beta, &obs(1.0, 1, &[])).unwrap(), 0.0);
    }

    #[test]
    fn csv_round_trip_and_cluster_order() {
        let text = "cluster,time,event,x1\nB,1.0,1,0.5\nA,2.0,0,-0.25\nB,3.0,1,0.125\n";
        let ds = ClusteredDataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(ds.n_clusters(), 2);
        assert_eq!(ds.clusters[0].id, "B");
        assert_eq!(ds.clusters[0].len(), 2);
        assert_eq!(ds.clusters[1].id, "A");
        assert_eq!(ds.p_x, 1);

        let mut out = Vec::new();
        ds.write_csv(&mut out).unwrap();
        let ds2 = ClusteredDataset::from_csv_reader(out.as_slice()).unwrap();
        assert_eq!(ds, ds2);
    }

    #[test]
    fn csv_parse_failure_reports_line_number() {
        let text = "cluster,time,event,x1\nA,1.0,1,0.5\nA,oops,1,0.5\n";
        match ClusteredDataset::from_csv_reader(text.as_bytes()) {
            Err(Error::Csv { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("expected csv error, got {other:?}"),
        }
    }

    #[test]
    fn working_correlation_invariants() {
        let ind = WorkingCorrelation::independence();
        assert_eq!(ind.phi, 1.0);
        assert!(ind.rho.is_none());

        assert!(WorkingCorrelation::new(CorrelationFamily::Exchangeable, 1.5, 1.0).is_err());
        assert!(WorkingCorrelation::new(CorrelationFamily::Exchangeable, 0.5, -1.0).is_err());

        let w = WorkingCorrelation::new(CorrelationFamily::Exchangeable, -0.4, 1.0).unwrap();
        assert!(w.check_positive_definite(2).is_ok());
        assert!(w.check_positive_definite(5).is_err());
    }
}
