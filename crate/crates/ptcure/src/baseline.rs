//! Nonparametric baseline CDF estimation.
//!
//! The baseline `F_p` is estimated as a step function with jumps at the
//! uncensored times. The jump mass at an uncensored time `T` is
//! `(1/N) / (R(T) - lambda)`, where `R(u)` is the average at-risk weight
//! `(1/N) sum_ls exp(beta' X_ls) (I(u <= T_ls <= tau) + I(T_ls > tau))`
//! and the multiplier `lambda` is chosen so that the masses sum to one.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{mu, ClusteredDataset, Coefficients};
use crate::error::{Error, Result};

/// Anything that can evaluate a baseline CDF at observed times. The step
/// estimator implements it, and test oracles can supply parametric truths.
pub trait BaselineCdf {
    fn cdf(&self, t: f64) -> f64;
}

/// A proper CDF represented by finitely many positive jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCdf {
    jump_times: Vec<f64>,
    jump_masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepCdf {
    /// Build from strictly increasing jump times and positive masses that
    /// sum to one (tolerance 1e-10).
    pub fn new(jump_times: Vec<f64>, jump_masses: Vec<f64>) -> Result<Self> {
        if jump_times.len() != jump_masses.len() || jump_times.is_empty() {
            return Err(Error::Baseline(
                "jump times and masses must be nonempty and of equal length".into(),
            ));
        }
        for w in jump_times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Baseline(format!(
                    "jump times must be strictly increasing (found {} then {})",
                    w[0], w[1]
                )));
            }
        }
        if jump_times[0] <= 0.0 || !jump_times[0].is_finite() {
            return Err(Error::Baseline(format!(
                "jump times must be positive and finite (first is {})",
                jump_times[0]
            )));
        }
        if jump_masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::Baseline("jump masses must be positive".into()));
        }
        let mut cumulative = Vec::with_capacity(jump_masses.len());
        let mut acc = 0.0;
        for &m in &jump_masses {
            acc += m;
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > 1e-10 {
            return Err(Error::Baseline(format!(
                "jump masses sum to {acc}, not 1 within 1e-10"
            )));
        }
        Ok(Self {
            jump_times,
            jump_masses,
            cumulative,
        })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_masses(&self) -> &[f64] {
        &self.jump_masses
    }

    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Serialize as `time,mass,cdf` rows for plotting.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "time,mass,cdf")?;
        for i in 0..self.jump_times.len() {
            writeln!(
                writer,
                "{},{},{}",
                self.jump_times[i], self.jump_masses[i], self.cumulative[i]
            )?;
        }
        Ok(())
    }
}

impl BaselineCdf for StepCdf {
    /// Right-continuous evaluation: the sum of masses at jump times `<= t`.
    fn cdf(&self, t: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&jt| jt <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }
}

impl<F: Fn(f64) -> f64> BaselineCdf for F {
    fn cdf(&self, t: f64) -> f64 {
        self(t)
    }
}

/// The cure threshold: observations beyond it are treated as cured in the
/// at-risk weight. Must not fall below the largest uncensored time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CureThreshold {
    tau: f64,
}

impl CureThreshold {
    pub fn new(tau: f64, dataset: &ClusteredDataset) -> Result<Self> {
        let max_uncensored = dataset
            .max_uncensored_time()
            .ok_or_else(|| Error::Baseline("no uncensored observation".into()))?;
        if !(tau > 0.0) || !tau.is_finite() || tau < max_uncensored {
            return Err(Error::InvalidCureThreshold {
                tau,
                max_uncensored,
            });
        }
        Ok(Self { tau })
    }

    /// Default rule: the smallest admissible threshold, the largest
    /// uncensored time in the data.
    pub fn from_dataset(dataset: &ClusteredDataset) -> Result<Self> {
        let tau = dataset
            .max_uncensored_time()
            .ok_or_else(|| Error::Baseline("no uncensored observation".into()))?;
        Ok(Self { tau })
    }

    pub fn value(&self) -> f64 {
        self.tau
    }
}

/// Precomputed at-risk curve for a fixed `beta`: sorted observation times
/// with suffix-summed weights, split at the cure threshold. Summation order
/// is fixed (sorted order) so results are reproducible.
struct RiskCurve {
    times: Vec<f64>,
    /// `suffix[i]` = sum of weights of in-threshold observations with index >= i.
    suffix: Vec<f64>,
    /// Total weight of observations strictly beyond the threshold.
    tail: f64,
    n: f64,
}

impl RiskCurve {
    fn build(beta: &Coefficients, dataset: &ClusteredDataset, tau: CureThreshold) -> Result<Self> {
        let mut inside: Vec<(f64, f64)> = Vec::with_capacity(dataset.n_obs());
        let mut tail = 0.0;
        for obs in dataset.iter_obs() {
            let w = mu(beta, obs)?;
            if obs.time > tau.value() {
                tail += w;
            } else {
                inside.push((obs.time, w));
            }
        }
        inside.sort_by(|a, b| a.0.total_cmp(&b.0));
        let times: Vec<f64> = inside.iter().map(|p| p.0).collect();
        let mut suffix = vec![0.0; inside.len() + 1];
        for i in (0..inside.len()).rev() {
            suffix[i] = suffix[i + 1] + inside[i].1;
        }
        Ok(Self {
            times,
            suffix,
            tail,
            n: dataset.n_obs() as f64,
        })
    }

    /// `R(u) = (1/N) [ sum of weights with u <= T <= tau  +  tail ]`.
    fn eval(&self, u: f64) -> f64 {
        let idx = self.times.partition_point(|&t| t < u);
        (self.suffix[idx] + self.tail) / self.n
    }
}

/// Average at-risk weight `R(u)`; nonincreasing in `u` on `[0, tau]`.
pub fn risk_weight(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    u: f64,
    tau: CureThreshold,
) -> Result<f64> {
    Ok(RiskCurve::build(beta, dataset, tau)?.eval(u))
}

/// Solve for the multiplier so the implied jump masses sum to one:
/// `(1/N) sum_ij delta_ij / (R(T_ij) - lambda) = 1` with
/// `lambda < min R(T_ij)` over uncensored times (every mass positive).
pub fn solve_lambda(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    tau: CureThreshold,
) -> Result<f64> {
    let curve = RiskCurve::build(beta, dataset, tau)?;
    let risks = uncensored_risks(dataset, &curve)?;
    solve_lambda_from_risks(&risks, curve.n)
}

fn uncensored_risks(dataset: &ClusteredDataset, curve: &RiskCurve) -> Result<Vec<f64>> {
    let risks: Vec<f64> = dataset
        .iter_obs()
        .filter(|o| o.is_event())
        .map(|o| curve.eval(o.time))
        .collect();
    if risks.is_empty() {
        return Err(Error::Baseline("no uncensored observation".into()));
    }
    Ok(risks)
}

fn solve_lambda_from_risks(risks: &[f64], n: f64) -> Result<f64> {
    let m = risks.iter().fold(f64::INFINITY, |a, &r| a.min(r));
    // g is strictly increasing in lambda on (-inf, m); g -> 0 at -inf and
    // g -> +inf at m, so a bracket always exists in exact arithmetic.
    let g = |lambda: f64| risks.iter().map(|&r| 1.0 / (r - lambda)).sum::<f64>() / n;

    let scale = m.abs().max(1.0);
    let mut hi = m - 1e-6 * scale;
    let mut shrink = 0;
    while g(hi) < 1.0 {
        hi = m - (m - hi) * 0.5;
        shrink += 1;
        if shrink > 80 {
            return Err(Error::NonBracketableRoot(format!(
                "left side stays below 1 up to lambda = {hi}"
            )));
        }
    }
    let mut width = scale;
    let mut lo = m - width;
    while g(lo) > 1.0 {
        width *= 2.0;
        lo = m - width;
        if width > 1e14 * scale {
            return Err(Error::NonBracketableRoot(
                "left side stays above 1 for arbitrarily negative lambda".into(),
            ));
        }
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let v = g(mid);
        if (v - 1.0).abs() <= 1e-12 {
            return Ok(mid);
        }
        if v < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * scale {
            break;
        }
    }
    let residual = (g(mid) - 1.0).abs();
    if residual <= 1e-9 {
        Ok(mid)
    } else {
        Err(Error::NonBracketableRoot(format!(
            "bisection stalled with residual {residual:.3e}"
        )))
    }
}

/// Estimate the baseline CDF at the given coefficients. Jump masses at tied
/// uncensored times are merged by summation.
pub fn estimate_baseline(
    beta: &Coefficients,
    dataset: &ClusteredDataset,
    tau: CureThreshold,
) -> Result<StepCdf> {
    let curve = RiskCurve::build(beta, dataset, tau)?;
    let risks = uncensored_risks(dataset, &curve)?;
    let lambda = solve_lambda_from_risks(&risks, curve.n)?;

    let mut jumps: Vec<(f64, f64)> = dataset
        .iter_obs()
        .filter(|o| o.is_event())
        .zip(risks.iter())
        .map(|(o, &r)| (o.time, (1.0 / curve.n) / (r - lambda)))
        .collect();
    if let Some(&(t, m)) = jumps.iter().find(|&&(_, m)| !(m > 0.0)) {
        return Err(Error::Baseline(format!(
            "nonpositive jump mass {m} at time {t}; multiplier {lambda} inadmissible"
        )));
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut times = Vec::with_capacity(jumps.len());
    let mut masses: Vec<f64> = Vec::with_capacity(jumps.len());
    for (t, m) in jumps {
        match times.last() {
            Some(&last) if last == t => *masses.last_mut().unwrap() += m,
            _ => {
                times.push(t);
                masses.push(m);
            }
        }
    }
    StepCdf::new(times, masses)
}
