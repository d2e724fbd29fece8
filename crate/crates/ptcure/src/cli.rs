//! Command-line front end: `fit`, `simulate`, `study`, `bootstrap`, `km`.
//!
//! Exit codes: 0 success, 1 input error, 2 fit did not converge (outputs
//! still written), 3 internal numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{ClusteredDataset, CorrelationFamily};
use crate::error::{Error, Result};
use crate::estimator::Method;
use crate::fit::{bootstrap, fit, BootstrapConfig, FitConfig};
use crate::sim::{generate_dataset, preset_for_cure_rate, CorrelationStrength, SimConfig};
use crate::study::{
    kaplan_meier, run_study, write_km_csv, write_study_tables, MethodSpec, RhoBootstrapSpec,
    StudyDesign, StudyOutput,
};

/// Parse simple `key=value` config text. Blank lines and `#` comments are
/// skipped; duplicate keys are errors, as are lines without `=`.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, found `{line}`", idx + 1))
        })?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

#[cfg(debug_assertions)]
const VERSION_METADATA: &str =
    concat!(env!("CARGO_PKG_VERSION"), " (", env!("CARGO_PKG_NAME"), ", debug build)");
#[cfg(not(debug_assertions))]
const VERSION_METADATA: &str =
    concat!(env!("CARGO_PKG_VERSION"), " (", env!("CARGO_PKG_NAME"), ", release build)");

#[derive(Parser)]
#[command(
    name = "ptcure",
    version = VERSION_METADATA,
    about = "Marginal promotion time cure model estimation for clustered survival data"
)]
pub struct Cli {
    /// Worker thread cap (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit the model to a clustered CSV dataset.
    Fit(FitArgs),
    /// Generate a synthetic clustered dataset.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo replication study.
    Study(StudyArgs),
    /// Cluster-bootstrap variances of the nuisance estimates.
    Bootstrap(BootstrapArgs),
    /// Kaplan-Meier curve of a dataset (clustering ignored).
    Km(KmArgs),
}

#[derive(Args)]
pub struct FitArgs {
    /// Input dataset (`cluster,time,event,x1,...`).
    #[arg(long)]
    pub data: PathBuf,
    /// Optional key=value (or .json) fit configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Estimation method (npm, gee, qif); overrides the config file.
    #[arg(long)]
    pub method: Option<String>,
    /// Working structure (independence, exchangeable, ar1).
    #[arg(long)]
    pub family: Option<String>,
    /// Cure threshold override.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Output directory for fit.json and table.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// key=value (or .json) generation settings.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed (overrides the config value).
    #[arg(long)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct StudyArgs {
    /// key=value study configuration; optional when --preset is given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in designs: `scaled` (K=100, n=5, 200 reps) or `full`
    /// (K=284, n=9, 1000 reps).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: u64,
    /// Output directory for the table CSVs and records.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub family: Option<String>,
    /// Number of bootstrap replicates.
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct KmArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Run the CLI; the return value is the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Study(args) => cmd_study(&args),
        Command::Bootstrap(args) => cmd_bootstrap(&args),
        Command::Km(args) => cmd_km(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Csv { .. }
        | Error::Config(_)
        | Error::Dimension(_)
        | Error::InvalidDataset { .. }
        | Error::InvalidCureThreshold { .. }
        | Error::Io(_)
        | Error::Json(_) => 1,
        _ => 3,
    }
}

fn read_config_map(path: Option<&Path>) -> Result<BTreeMap<String, String>> {
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            if p.extension().is_some_and(|e| e == "json") {
                let value: serde_json::Value = serde_json::from_str(&text)?;
                let obj = value
                    .as_object()
                    .ok_or_else(|| Error::Config("json config must be an object".into()))?;
                let mut map = BTreeMap::new();
                for (k, v) in obj {
                    let s = match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    map.insert(k.clone(), s);
                }
                Ok(map)
            } else {
                parse_kv(&text)
            }
        }
    }
}

fn build_fit_config(
    map: &BTreeMap<String, String>,
    method: Option<&str>,
    family: Option<&str>,
    tau: Option<f64>,
) -> Result<FitConfig> {
    let mut cfg = FitConfig::new(Method::Npm, CorrelationFamily::Independence);
    for (key, value) in map {
        match key.as_str() {
            "method" => cfg.method = value.parse()?,
            "family" => cfg.family = value.parse()?,
            "tau" => cfg.tau = Some(parse_value(key, value)?),
            "beta_init" => {
                cfg.beta_init = Some(
                    value
                        .split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::Config(format!("bad beta_init entry `{v}`")))
                        })
                        .collect::<Result<_>>()?,
                )
            }
            "outer_tol" => cfg.outer_tol = parse_value(key, value)?,
            "outer_max_iter" => cfg.outer_max_iter = parse_value(key, value)?,
            "newton_tol" => cfg.newton_tol = parse_value(key, value)?,
            "newton_max_iter" => cfg.newton_max_iter = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown fit key `{other}`"))),
        }
    }
    if let Some(m) = method {
        cfg.method = m.parse()?;
    }
    if let Some(f) = family {
        cfg.family = f.parse()?;
    }
    if let Some(t) = tau {
        cfg.tau = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for key `{key}`")))
}

fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let dataset = ClusteredDataset::from_csv_path(&args.data)?;
    let map = read_config_map(args.config.as_deref())?;
    let cfg = build_fit_config(
        &map,
        args.method.as_deref(),
        args.family.as_deref(),
        args.tau,
    )?;
    let result = fit(&dataset, &cfg)?;

    fs::create_dir_all(&args.out)?;
    result.write_json(fs::File::create(args.out.join("fit.json"))?)?;
    result.write_table_csv(fs::File::create(args.out.join("table.csv"))?)?;
    result
        .baseline
        .write_csv(fs::File::create(args.out.join("baseline.csv"))?)?;

    println!(
        "fit: method={} family={} converged={} iterations={} score_norm={:.3e}",
        result.method, result.family, result.converged, result.iterations, result.score_norm
    );
    Ok(if result.converged { 0 } else { 2 })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.config)?;
    let mut cfg = if args
        .config
        .extension()
        .is_some_and(|e| e == "json")
    {
        let parsed: SimConfig = serde_json::from_str(&text)?;
        parsed.validate()?;
        parsed
    } else {
        SimConfig::from_kv(&text)?
    };
    cfg.seed = args.seed;
    let (dataset, diags) = generate_dataset(&cfg)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    dataset.write_csv(fs::File::create(&args.out)?)?;
    println!(
        "simulate: k={} n={} events={} clamped_pairs={} repaired={}",
        cfg.k,
        cfg.n,
        dataset.n_events(),
        diags.zeta_clamped_pairs,
        diags.sigma_v_repaired
    );
    Ok(0)
}

struct StudyPlan {
    /// `(setting label, design)` in emission order.
    settings: Vec<(String, StudyDesign)>,
}

fn default_methods() -> Vec<MethodSpec> {
    vec![
        MethodSpec::new(Method::Npm, CorrelationFamily::Independence),
        MethodSpec::new(Method::Gee, CorrelationFamily::Exchangeable),
        MethodSpec::new(Method::Qif, CorrelationFamily::Exchangeable),
        MethodSpec::new(Method::Gee, CorrelationFamily::Ar1),
        MethodSpec::new(Method::Qif, CorrelationFamily::Ar1),
    ]
}

fn build_study_plan(args: &StudyArgs) -> Result<StudyPlan> {
    let map = read_config_map(args.config.as_deref())?;

    let preset = args.preset.as_deref().or(map.get("preset").map(String::as_str));
    let (mut k, mut n, mut reps) = match preset {
        None => (100, 5, 200),
        Some("scaled") => (100, 5, 200),
        Some("full") => (284, 9, 1000),
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (expected scaled or full)"
            )))
        }
    };

    let mut structure = CorrelationFamily::Exchangeable;
    let mut strength = CorrelationStrength::Strong;
    let mut methods = default_methods();
    let mut cure_rates = vec![0.10, 0.40, 0.85];
    let mut confidence = 0.95;
    let mut rho_bootstrap = None;

    for (key, value) in &map {
        match key.as_str() {
            "preset" => {}
            "k" => k = parse_value(key, value)?,
            "n" => n = parse_value(key, value)?,
            "replications" => reps = parse_value(key, value)?,
            "structure" => structure = value.parse()?,
            "strength" => strength = value.parse()?,
            "confidence" => confidence = parse_value(key, value)?,
            "methods" => {
                methods = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?;
            }
            "cure_rates" => {
                cure_rates = value
                    .split(',')
                    .map(|s| parse_value("cure_rates", s.trim()))
                    .collect::<Result<_>>()?;
            }
            "rho_bootstrap_datasets" => {
                let datasets = parse_value(key, value)?;
                rho_bootstrap = Some(match rho_bootstrap {
                    Some(RhoBootstrapSpec { replicates, .. }) => RhoBootstrapSpec {
                        datasets,
                        replicates,
                    },
                    None => RhoBootstrapSpec {
                        datasets,
                        replicates: 50,
                    },
                });
            }
            "rho_bootstrap_replicates" => {
                let replicates = parse_value(key, value)?;
                rho_bootstrap = Some(match rho_bootstrap {
                    Some(RhoBootstrapSpec { datasets, .. }) => RhoBootstrapSpec {
                        datasets,
                        replicates,
                    },
                    None => RhoBootstrapSpec {
                        datasets: 20,
                        replicates,
                    },
                });
            }
            other => return Err(Error::Config(format!("unknown study key `{other}`"))),
        }
    }

    let (tau_corr, eta_corr) = strength.tau_eta();
    let mut settings = Vec::new();
    for (idx, &rate) in cure_rates.iter().enumerate() {
        let preset = preset_for_cure_rate(rate)?;
        let mut sim = SimConfig::new(k, n, 0);
        sim.structure = if strength == CorrelationStrength::None {
            CorrelationFamily::Independence
        } else {
            structure
        };
        sim.tau_corr = tau_corr;
        sim.eta_corr = eta_corr;
        sim.nu = preset.nu;
        let mut design = StudyDesign::new(sim, methods.clone(), reps, args.seed ^ (idx as u64));
        design.confidence = confidence;
        design.rho_bootstrap = rho_bootstrap;
        let label = format!("cure{:02}", (rate * 100.0).round() as u64);
        settings.push((label, design));
    }
    Ok(StudyPlan { settings })
}

fn cmd_study(args: &StudyArgs) -> Result<i32> {
    let plan = build_study_plan(args)?;
    let mut runs: Vec<(String, StudyOutput)> = Vec::new();
    for (label, design) in plan.settings {
        let output = run_study(&design)?;
        println!(
            "study {label}: {} methods x {} replications done",
            output.methods.len(),
            output.summary.replications
        );
        runs.push((label, output));
    }
    let written = write_study_tables(&args.out, &runs)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_bootstrap(args: &BootstrapArgs) -> Result<i32> {
    let dataset = ClusteredDataset::from_csv_path(&args.data)?;
    let map = read_config_map(args.config.as_deref())?;
    let cfg = build_fit_config(&map, args.method.as_deref(), args.family.as_deref(), None)?;
    let boot = BootstrapConfig {
        replicates: args.replicates,
        seed: args.seed,
    };
    let summary = bootstrap(&dataset, &cfg, &boot, None)?;
    fs::create_dir_all(&args.out)?;
    serde_json::to_writer_pretty(
        fs::File::create(args.out.join("bootstrap.json"))?,
        &summary,
    )?;
    println!(
        "bootstrap: used {}/{} replicates (var_rho={:?})",
        summary.replicates_used, summary.replicates_requested, summary.var_rho
    );
    Ok(0)
}

fn cmd_km(args: &KmArgs) -> Result<i32> {
    let dataset = ClusteredDataset::from_csv_path(&args.data)?;
    let curve = kaplan_meier(&dataset);
    fs::create_dir_all(&args.out)?;
    write_km_csv(&curve, fs::File::create(args.out.join("km.csv"))?)?;
    println!("km: {} event times", curve.len());
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parser_handles_comments_and_rejects_junk() {
        let map = parse_kv("# comment\nk=3\n\nn = 4\n").unwrap();
        assert_eq!(map["k"], "3");
        assert_eq!(map["n"], "4");
        assert!(parse_kv("novalue\n").is_err());
        assert!(parse_kv("a=1\na=2\n").is_err());
    }

    #[test]
    fn fit_config_rejects_unknown_keys() {
        let mut map = BTreeMap::new();
        map.insert("method".into(), "gee".into());
        map.insert("familly".into(), "ar1".into());
        assert!(build_fit_config(&map, None, None, None).is_err());
    }

    #[test]
    fn flag_overrides_beat_config() {
        let mut map = BTreeMap::new();
        map.insert("method".into(), "npm".into());
        let cfg = build_fit_config(&map, Some("qif"), Some("ar1"), Some(2.0)).unwrap();
        assert_eq!(cfg.method, Method::Qif);
        assert_eq!(cfg.family, CorrelationFamily::Ar1);
        assert_eq!(cfg.tau, Some(2.0));
    }
}
