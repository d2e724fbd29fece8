//! Monte Carlo replication harness: simulate, fit every configured method,
//! and aggregate bias / variance / coverage / efficiency summaries, plus a
//! clustering-blind Kaplan-Meier utility for descriptive curves.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClusteredDataset, CorrelationFamily};
use crate::error::{Error, Result};
use crate::estimator::Method;
use crate::fit::{bootstrap, fit, mix_seed, sample_variance, BootstrapConfig, FitConfig};
use crate::normal::std_normal_quantile;
use crate::sim::{generate_dataset, SimConfig};

/// One (method, working family) pair to run in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub family: CorrelationFamily,
}

impl MethodSpec {
    pub fn new(method: Method, family: CorrelationFamily) -> Self {
        Self { method, family }
    }

    pub fn label(&self) -> String {
        match self.method {
            Method::Npm => "npm".to_string(),
            m => format!("{m}:{}", self.family),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    /// `npm`, `gee:exchangeable`, `qif:ar1`, ...
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None => Ok(MethodSpec::new(s.parse()?, CorrelationFamily::Independence)),
            Some((m, f)) => Ok(MethodSpec::new(m.parse()?, f.parse()?)),
        }
    }
}

/// Bootstrap sub-study settings for the variance of the correlation
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoBootstrapSpec {
    /// How many of the replicated datasets to bootstrap.
    pub datasets: usize,
    /// Bootstrap replicates per dataset.
    pub replicates: usize,
}

/// Full study description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyDesign {
    pub sim: SimConfig,
    pub methods: Vec<MethodSpec>,
    pub replications: usize,
    pub confidence: f64,
    pub seed: u64,
    pub fit: FitConfig,
    pub rho_bootstrap: Option<RhoBootstrapSpec>,
}

impl StudyDesign {
    pub fn new(sim: SimConfig, methods: Vec<MethodSpec>, replications: usize, seed: u64) -> Self {
        let fit = FitConfig::new(Method::Npm, CorrelationFamily::Independence);
        Self {
            sim,
            methods,
            replications,
            confidence: 0.95,
            seed,
            fit,
            rho_bootstrap: None,
        }
    }

    fn fit_config(&self, spec: MethodSpec) -> FitConfig {
        let mut cfg = self.fit.clone();
        cfg.method = spec.method;
        cfg.family = spec.family;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Config("a study needs at least 2 replications".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("a study needs at least one method".into()));
        }
        if !(0.0..1.0).contains(&self.confidence) || self.confidence <= 0.0 {
            return Err(Error::Config("confidence must lie in (0, 1)".into()));
        }
        self.sim.validate()
    }
}

/// Per-replication, per-method record kept for aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRecord {
    pub converged: bool,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    /// Row-major covariance, kept for the variance-ordering diagnostics.
    pub covariance: Vec<Vec<f64>>,
    pub rho: Option<f64>,
    pub phi: Option<f64>,
}

/// One replication: the simulation seed actually used and each method's
/// outcome (`None` when the fit errored).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRecord {
    pub replication: usize,
    pub sim_seed: u64,
    pub results: Vec<Option<MethodRecord>>,
}

/// Bias / variance / coverage summary for one method and coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub method: String,
    pub coefficient: usize,
    pub bias: f64,
    pub var: f64,
    pub var_star: f64,
    pub cp: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoSummaryRow {
    pub method: String,
    pub mean: f64,
    pub var: f64,
    /// Average bootstrap variance, when the sub-study ran.
    pub var_star: Option<f64>,
}

/// Efficiency ratios: MSE relative to the independence baseline and the
/// cross-method / cross-structure ratios.
#[derive(Debug, Clone, Serialize, Default)]
pub struct EfficiencyTable {
    /// `(method label, per-coefficient MSE ratio vs npm)`.
    pub vs_npm: Vec<(String, Vec<f64>)>,
    /// Named cross ratios RE1..RE4 when all four method/family pairs ran.
    pub cross: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub rows: Vec<CoefficientRow>,
    /// `(method label, replications excluded as non-converged or failed)`.
    pub excluded: Vec<(String, usize)>,
    pub replications: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyOutput {
    pub methods: Vec<String>,
    pub beta_true: Vec<f64>,
    pub summary: StudySummary,
    pub efficiency: EfficiencyTable,
    pub rho: Vec<RhoSummaryRow>,
    pub records: Vec<RepRecord>,
}

impl StudyOutput {
    pub fn row(&self, label: &str, coefficient: usize) -> Option<&CoefficientRow> {
        self.summary
            .rows
            .iter()
            .find(|r| r.method == label && r.coefficient == coefficient)
    }

    pub fn mse_ratio_vs_npm(&self, label: &str, coefficient: usize) -> Option<f64> {
        self.efficiency
            .vs_npm
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v[coefficient])
    }

    /// Average estimated covariance matrix over converged replications of
    /// one method.
    pub fn mean_covariance(&self, label: &str) -> Option<DMatrix<f64>> {
        let idx = self.methods.iter().position(|m| m == label)?;
        let p = self.beta_true.len();
        let mut acc = DMatrix::zeros(p, p);
        let mut count = 0.0;
        for rec in &self.records {
            if let Some(Some(m)) = rec.results.get(idx) {
                if m.converged {
                    for i in 0..p {
                        for j in 0..p {
                            acc[(i, j)] += m.covariance[i][j];
                        }
                    }
                    count += 1.0;
                }
            }
        }
        (count > 0.0).then(|| acc / count)
    }
}

/// Run the full replication study. Per-replication failures are recorded,
/// not raised; aggregates exclude non-converged fits and report the count.
pub fn run_study(design: &StudyDesign) -> Result<StudyOutput> {
    design.validate()?;
    let method_labels: Vec<String> = design.methods.iter().map(MethodSpec::label).collect();

    let records: Vec<RepRecord> = (0..design.replications)
        .into_par_iter()
        .map(|rep| {
            let sim_seed = mix_seed(design.seed, rep as u64);
            let mut sim = design.sim.clone();
            sim.seed = sim_seed;
            let results = match generate_dataset(&sim) {
                Ok((dataset, _diags)) => design
                    .methods
                    .iter()
                    .map(|spec| {
                        fit(&dataset, &design.fit_config(*spec))
                            .ok()
                            .map(|r| MethodRecord {
                                converged: r.converged,
                                beta: r.beta_hat,
                                se: r.se,
                                covariance: r.covariance,
                                rho: r.rho_hat,
                                phi: r.phi_hat,
                            })
                    })
                    .collect(),
                Err(_) => vec![None; design.methods.len()],
            };
            RepRecord {
                replication: rep,
                sim_seed,
                results,
            }
        })
        .collect();

    let p = design.sim.beta_true.len();
    let z = std_normal_quantile(0.5 + design.confidence / 2.0);

    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut mse_by_method: Vec<Vec<f64>> = Vec::new();
    for (mi, label) in method_labels.iter().enumerate() {
        let converged: Vec<&MethodRecord> = records
            .iter()
            .filter_map(|r| r.results[mi].as_ref())
            .filter(|m| m.converged)
            .collect();
        excluded.push((label.clone(), design.replications - converged.len()));

        let mut mses = vec![f64::NAN; p];
        for coef in 0..p {
            let truth = design.sim.beta_true[coef];
            let estimates: Vec<f64> = converged.iter().map(|m| m.beta[coef]).collect();
            let n = estimates.len();
            if n < 2 {
                rows.push(CoefficientRow {
                    method: label.clone(),
                    coefficient: coef,
                    bias: f64::NAN,
                    var: f64::NAN,
                    var_star: f64::NAN,
                    cp: f64::NAN,
                    mse: f64::NAN,
                });
                continue;
            }
            let mean = estimates.iter().sum::<f64>() / n as f64;
            let bias = mean - truth;
            let var = sample_variance(&estimates);
            let var_star =
                converged.iter().map(|m| m.se[coef] * m.se[coef]).sum::<f64>() / n as f64;
            let hits = converged
                .iter()
                .filter(|m| (m.beta[coef] - truth).abs() <= z * m.se[coef])
                .count();
            let cp = 100.0 * hits as f64 / n as f64;
            let mse = estimates
                .iter()
                .map(|b| (b - truth).powi(2))
                .sum::<f64>()
                / n as f64;
            mses[coef] = mse;
            rows.push(CoefficientRow {
                method: label.clone(),
                coefficient: coef,
                bias,
                var,
                var_star,
                cp,
                mse,
            });
        }
        mse_by_method.push(mses);
    }

    let efficiency = efficiency_table(&method_labels, &mse_by_method, p);
    let rho = rho_summary(design, &method_labels, &records)?;

    Ok(StudyOutput {
        methods: method_labels,
        beta_true: design.sim.beta_true.clone(),
        summary: StudySummary {
            rows,
            excluded,
            replications: design.replications,
        },
        efficiency,
        rho,
        records,
    })
}

fn efficiency_table(
    labels: &[String],
    mse_by_method: &[Vec<f64>],
    p: usize,
) -> EfficiencyTable {
    let mut table = EfficiencyTable::default();
    let find = |l: &str| labels.iter().position(|x| x == l);
    if let Some(npm) = find("npm") {
        for (mi, label) in labels.iter().enumerate() {
            if mi == npm {
                continue;
            }
            let ratios: Vec<f64> = (0..p)
                .map(|c| mse_by_method[mi][c] / mse_by_method[npm][c])
                .collect();
            table.vs_npm.push((label.clone(), ratios));
        }
    }
    let ratio = |num: usize, den: usize| -> Vec<f64> {
        (0..p)
            .map(|c| mse_by_method[num][c] / mse_by_method[den][c])
            .collect()
    };
    if let (Some(ge), Some(ga), Some(qe), Some(qa)) = (
        find("gee:exchangeable"),
        find("gee:ar1"),
        find("qif:exchangeable"),
        find("qif:ar1"),
    ) {
        table.cross.push(("RE1".into(), ratio(ge, ga)));
        table.cross.push(("RE2".into(), ratio(qe, qa)));
        table.cross.push(("RE3".into(), ratio(qe, ga)));
        table.cross.push(("RE4".into(), ratio(qa, ge)));
    }
    table
}

fn rho_summary(
    design: &StudyDesign,
    labels: &[String],
    records: &[RepRecord],
) -> Result<Vec<RhoSummaryRow>> {
    let mut out = Vec::new();
    for (mi, label) in labels.iter().enumerate() {
        let rhos: Vec<f64> = records
            .iter()
            .filter_map(|r| r.results[mi].as_ref())
            .filter(|m| m.converged)
            .filter_map(|m| m.rho)
            .collect();
        if rhos.len() < 2 {
            continue;
        }
        let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
        let var = sample_variance(&rhos);
        let var_star = match &design.rho_bootstrap {
            Some(spec) if design.methods[mi].method == Method::Gee => Some(
                bootstrap_rho_variance(design, design.methods[mi], spec, records)?,
            ),
            _ => None,
        };
        out.push(RhoSummaryRow {
            method: label.clone(),
            mean,
            var,
            var_star,
        });
    }
    Ok(out)
}

/// Rerun a handful of replicated datasets under the cluster bootstrap and
/// average the bootstrap variances of the correlation estimate.
fn bootstrap_rho_variance(
    design: &StudyDesign,
    spec: MethodSpec,
    boot_spec: &RhoBootstrapSpec,
    records: &[RepRecord],
) -> Result<f64> {
    let cfg = design.fit_config(spec);
    let take: Vec<&RepRecord> = records.iter().take(boot_spec.datasets).collect();
    let vars: Vec<f64> = take
        .par_iter()
        .filter_map(|rec| {
            let mut sim = design.sim.clone();
            sim.seed = rec.sim_seed;
            let (dataset, _) = generate_dataset(&sim).ok()?;
            let boot = BootstrapConfig {
                replicates: boot_spec.replicates,
                seed: mix_seed(design.seed ^ 0xB007, rec.replication as u64),
            };
            bootstrap(&dataset, &cfg, &boot, Some(&[])).ok()?.var_rho
        })
        .collect();
    if vars.is_empty() {
        return Err(Error::Fit(
            "no bootstrap replicate produced a rho variance".into(),
        ));
    }
    Ok(vars.iter().sum::<f64>() / vars.len() as f64)
}

/// One step of the product-limit curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KmPoint {
    pub time: f64,
    pub n_risk: usize,
    pub n_events: usize,
    pub survival: f64,
}

/// Product-limit estimate ignoring clustering. Events at a tied time are
/// processed before censorings at that time.
pub fn kaplan_meier(dataset: &ClusteredDataset) -> Vec<KmPoint> {
    let mut obs: Vec<(f64, bool)> = dataset
        .iter_obs()
        .map(|o| (o.time, o.is_event()))
        .collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out = Vec::new();
    let mut survival = 1.0;
    let mut at_risk = obs.len();
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut events = 0;
        let mut total = 0;
        while i < obs.len() && obs[i].0 == t {
            events += usize::from(obs[i].1);
            total += 1;
            i += 1;
        }
        if events > 0 {
            survival *= 1.0 - events as f64 / at_risk as f64;
            out.push(KmPoint {
                time: t,
                n_risk: at_risk,
                n_events: events,
                survival,
            });
        }
        at_risk -= total;
    }
    out
}

pub fn write_km_csv<W: Write>(curve: &[KmPoint], mut writer: W) -> Result<()> {
    writeln!(writer, "time,n_risk,n_events,survival")?;
    for p in curve {
        writeln!(writer, "{},{},{},{}", p.time, p.n_risk, p.n_events, p.survival)?;
    }
    Ok(())
}

/// Write the study tables for a set of labeled runs (one per cure-rate
/// setting): three summary tables, the two efficiency tables, the rho
/// table, a convergence table, and the raw records bundle.
pub fn write_study_tables(
    dir: &std::path::Path,
    runs: &[(String, StudyOutput)],
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    // Summary tables: one file per configured setting slot (three slots to
    // mirror the published layout; missing slots leave a header-only file).
    for slot in 0..3 {
        let path = dir.join(format!("table{}.csv", slot + 1));
        let mut f = std::fs::File::create(&path)?;
        writeln!(f, "setting,method,coefficient,bias,var,var_star,cp")?;
        if let Some((label, output)) = runs.get(slot) {
            for row in &output.summary.rows {
                writeln!(
                    f,
                    "{label},{},b{},{},{},{},{}",
                    row.method, row.coefficient, row.bias, row.var, row.var_star, row.cp
                )?;
            }
        }
        written.push(path);
    }

    let path = dir.join("table5.csv");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "setting,method,coefficient,mse_ratio_vs_npm")?;
    for (label, output) in runs {
        for (method, ratios) in &output.efficiency.vs_npm {
            for (c, r) in ratios.iter().enumerate() {
                writeln!(f, "{label},{method},b{c},{r}")?;
            }
        }
    }
    written.push(path);

    let path = dir.join("table6.csv");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "setting,comparison,coefficient,mse_ratio")?;
    for (label, output) in runs {
        for (name, ratios) in &output.efficiency.cross {
            for (c, r) in ratios.iter().enumerate() {
                writeln!(f, "{label},{name},b{c},{r}")?;
            }
        }
    }
    written.push(path);

    let path = dir.join("table7.csv");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "setting,method,mean_rho,var,var_star")?;
    for (label, output) in runs {
        for row in &output.rho {
            let vs = row.var_star.map_or(String::new(), |v| v.to_string());
            writeln!(f, "{label},{},{},{},{vs}", row.method, row.mean, row.var)?;
        }
    }
    written.push(path);

    let path = dir.join("convergence.csv");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "setting,method,replications,excluded")?;
    for (label, output) in runs {
        for (method, count) in &output.summary.excluded {
            writeln!(f, "{label},{method},{},{count}", output.summary.replications)?;
        }
    }
    written.push(path);

    let path = dir.join("records.json");
    let f = std::fs::File::create(&path)?;
    let slim: Vec<serde_json::Value> = runs
        .iter()
        .map(|(label, output)| {
            serde_json::json!({
                "setting": label,
                "methods": output.methods,
                "beta_true": output.beta_true,
                "records": output.records,
            })
        })
        .collect();
    serde_json::to_writer(f, &slim)?;
    written.push(path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cluster, Observation};

    fn km_dataset(times_events: &[(f64, u8)]) -> ClusteredDataset {
        let obs = times_events
            .iter()
            .map(|&(t, e)| Observation::new(t, e, vec![]))
            .collect();
        ClusteredDataset::new(vec![Cluster::new("c", obs)], 0)
    }

    #[test]
    fn km_no_censoring_is_empirical_survival() {
        let curve = kaplan_meier(&km_dataset(&[(1.0, 1), (2.0, 1), (3.0, 1)]));
        let survs: Vec<f64> = curve.iter().map(|p| p.survival).collect();
        assert!((survs[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((survs[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(survs[2].abs() < 1e-15);
    }

    #[test]
    fn km_all_censored_is_flat_one() {
        let curve = kaplan_meier(&km_dataset(&[(1.0, 0), (2.0, 0)]));
        assert!(curve.is_empty());
    }

    #[test]
    fn km_mixed_case_matches_hand_product_limit() {
        // times: 1 (event), 2 (censored), 3 (event), 4 (censored)
        // S(1) = 3/4; at t=3 two at risk: S(3) = 3/4 * 1/2 = 3/8.
        let curve = kaplan_meier(&km_dataset(&[(1.0, 1), (2.0, 0), (3.0, 1), (4.0, 0)]));
        assert_eq!(curve.len(), 2);
        assert!((curve[0].survival - 0.75).abs() < 1e-15);
        assert!((curve[1].survival - 0.375).abs() < 1e-15);
        assert_eq!(curve[0].n_risk, 4);
        assert_eq!(curve[1].n_risk, 2);
    }

    #[test]
    fn km_tied_event_and_censoring_processes_events_first() {
        // The censoring at t=1 leaves two at risk at t=2; the censoring tied
        // with the event at t=2 still counts as at risk there:
        // S(2) = 1 - 1/2.
        let curve = kaplan_meier(&km_dataset(&[(1.0, 0), (2.0, 1), (2.0, 0)]));
        assert_eq!(curve.len(), 1);
        assert!((curve[0].survival - 0.5).abs() < 1e-15);
        assert_eq!(curve[0].n_risk, 2);
    }

    #[test]
    fn method_spec_parsing() {
        let spec: MethodSpec = "gee:exchangeable".parse().unwrap();
        assert_eq!(spec.method, Method::Gee);
        assert_eq!(spec.family, CorrelationFamily::Exchangeable);
        let spec: MethodSpec = "npm".parse().unwrap();
        assert_eq!(spec.method, Method::Npm);
        assert!("gee:diagonal".parse::<MethodSpec>().is_err());
    }

    #[test]
    fn tiny_study_runs_and_reproduces() {
        let mut sim = SimConfig::new(25, 3, 0);
        sim.nu = 0.27;
        let design = StudyDesign::new(
            sim,
            vec![
                MethodSpec::new(Method::Npm, CorrelationFamily::Independence),
                MethodSpec::new(Method::Gee, CorrelationFamily::Exchangeable),
            ],
            4,
            123,
        );
        let a = run_study(&design).unwrap();
        let b = run_study(&design).unwrap();
        assert_eq!(
            serde_json::to_string(&a.summary.rows).unwrap(),
            serde_json::to_string(&b.summary.rows).unwrap()
        );
        assert_eq!(a.summary.rows.len(), 2 * 3);
        assert_eq!(a.efficiency.vs_npm.len(), 1);
    }
}
