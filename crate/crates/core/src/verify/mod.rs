//! Monte Carlo validation of the probabilistic bounds.
//!
//! An experiment runs a list of named checks for `trials` replications. Each
//! trial of each check reads only from streams derived from
//! `(master_seed, check name, trial index)`, so trials can run on any number
//! of threads and the report is a pure function of the config.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundParams;
use crate::constants::ConeSpec;
use crate::ensembles::{ensemble_constants, EnsembleConstants, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::matcore::fmt_f64;
use crate::rng::{derive, mix64};

mod checks;
pub mod lasso;

pub use checks::CHECKS;
pub use lasso::{lasso_fit, oracle_inequality_check, problem_compat, InequalityStatus, LassoFit, LassoProblem, OracleInequalityRecord};

/// Absolute slack separating solver error from a statistical violation.
pub const VIOLATION_SLACK: f64 = 1e-3;
pub const THREADS_ENV: &str = "ISOQUAD_THREADS";

fn default_true() -> bool {
    true
}

fn default_n_grid() -> Vec<usize> {
    vec![100, 400, 1600]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferOptions {
    pub p_min: usize,
    pub p_max: usize,
    pub d: Vec<usize>,
    pub probes: usize,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self { p_min: 4, p_max: 12, d: vec![2, 3], probes: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoOptions {
    pub lambda_factor: f64,
    pub noise_sd: f64,
    pub amplitude: f64,
    /// Trials `0..noiseless_trials` use `xi = 0` and `noiseless_lambda`.
    pub noiseless_trials: usize,
    pub noiseless_lambda: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { lambda_factor: 2.0, noise_sd: 1.0, amplitude: 1.0, noiseless_trials: 0, noiseless_lambda: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckOptions {
    /// Sample sizes for the trend rules.
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    pub moment_directions: usize,
    pub deviation_probes: usize,
    pub transfer: TransferOptions,
    pub lasso: LassoOptions,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            n_grid: default_n_grid(),
            moment_directions: 50,
            deviation_probes: 1000,
            transfer: TransferOptions::default(),
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    pub n: usize,
    pub trials: usize,
    #[serde(default)]
    pub bound_params: BoundParams,
    pub cone: ConeSpec,
    pub master_seed: u64,
    pub checks: Vec<String>,
    /// Replace the ensemble-dependent fields of `bound_params` (`C_m`,
    /// `sigma_X`, `K_X`, ...) by the ensemble's known constants.
    #[serde(default = "default_true")]
    pub derive_constants: bool,
    #[serde(default)]
    pub options: CheckOptions,
}

impl ExperimentConfig {
    pub fn new(ensemble: EnsembleSpec, n: usize, trials: usize, cone: ConeSpec, master_seed: u64, checks: &[&str]) -> Self {
        Self {
            ensemble,
            n,
            trials,
            bound_params: BoundParams::default(),
            cone,
            master_seed,
            checks: checks.iter().map(|s| s.to_string()).collect(),
            derive_constants: true,
            options: CheckOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        if self.checks.is_empty() {
            return invalid("no checks listed");
        }
        for c in &self.checks {
            if !CHECKS.contains(&c.as_str()) {
                return Err(Error::UnknownCheck(c.clone()));
            }
        }
        self.ensemble.validate()?;
        self.cone.validate(self.ensemble.p)
    }

    /// `bound_params` with `n`, `p`, `L`, `s` taken from the experiment and,
    /// when `derive_constants` is set, the ensemble's constants filled in.
    pub fn effective_params(&self) -> Result<(BoundParams, EnsembleConstants)> {
        let k = ensemble_constants(&self.ensemble)?;
        let mut bp = self.bound_params.clone();
        bp.n = self.n as f64;
        bp.p = self.ensemble.p as f64;
        bp.l = self.cone.l;
        bp.s = self.cone.s() as f64;
        if self.derive_constants {
            bp.m = k.m;
            let fill = |slot: &mut f64, v: Option<f64>| {
                if let Some(v) = v {
                    *slot = v;
                }
            };
            fill(&mut bp.c_m, k.c_m);
            fill(&mut bp.ctilde_m, k.ctilde_m);
            fill(&mut bp.sigma_x, k.sigma_x);
            fill(&mut bp.k_x, k.k_x);
            fill(&mut bp.c, k.sub_gaussian_c);
            fill(&mut bp.kappa1, k.kappa1);
            fill(&mut bp.alpha, k.alpha);
            fill(&mut bp.mu_m, k.mu_m);
            fill(&mut bp.k, k.innovation_k);
            if let Some(mb) = &k.martingale {
                bp.m0 = mb.m0;
            }
        }
        Ok((bp, k))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub check: String,
    pub trial_index: usize,
    pub metrics: BTreeMap<String, f64>,
    /// Wall time; kept out of the serialized report so reruns are byte-identical.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl TrialRecord {
    pub fn metric(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }

    pub fn flag(&self, key: &str) -> bool {
        self.metrics.get(key).is_some_and(|v| *v != 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Event frequency at most `target + 3 sqrt(target (1 - target) / R)`.
    Rate,
    /// Event count must be zero.
    Zero,
    /// Monte Carlo mean at most `bound + 3 SE`.
    Mean,
    /// Medians strictly decreasing along the sample-size grid.
    Trend,
    /// Reported, not asserted.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub rule: String,
    pub kind: RuleKind,
    pub observed: f64,
    pub target: f64,
    pub threshold: f64,
    pub count: usize,
    pub total: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Monte Carlo allowance `target + 3 sqrt(q (1 - q) / R)` with `q = min(target, 1)`.
pub fn rate_threshold(target: f64, total: usize) -> f64 {
    let q = target.clamp(0.0, 1.0);
    target + 3.0 * (q * (1.0 - q) / total.max(1) as f64).sqrt()
}

impl RuleOutcome {
    pub fn rate(rule: &str, count: usize, total: usize, target: f64) -> Self {
        let observed = if total == 0 { 0.0 } else { count as f64 / total as f64 };
        let threshold = rate_threshold(target, total);
        Self {
            rule: rule.into(),
            kind: RuleKind::Rate,
            observed,
            target,
            threshold,
            count,
            total,
            passed: observed <= threshold,
            note: None,
        }
    }

    pub fn zero(rule: &str, count: usize, total: usize) -> Self {
        let observed = if total == 0 { 0.0 } else { count as f64 / total as f64 };
        Self {
            rule: rule.into(),
            kind: RuleKind::Zero,
            observed,
            target: 0.0,
            threshold: 0.0,
            count,
            total,
            passed: count == 0,
            note: None,
        }
    }

    pub fn mean(rule: &str, estimate: f64, se: f64, bound: f64, total: usize) -> Self {
        let threshold = bound + 3.0 * se;
        Self {
            rule: rule.into(),
            kind: RuleKind::Mean,
            observed: estimate,
            target: bound,
            threshold,
            count: 0,
            total,
            passed: estimate <= threshold,
            note: None,
        }
    }

    pub fn info(rule: &str, observed: f64, note: impl Into<String>) -> Self {
        Self {
            rule: rule.into(),
            kind: RuleKind::Info,
            observed,
            target: 0.0,
            threshold: 0.0,
            count: 0,
            total: 0,
            passed: true,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub trials: usize,
    pub rules: Vec<RuleOutcome>,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl CheckReport {
    pub fn rule(&self, name: &str) -> Option<&RuleOutcome> {
        self.rules.iter().find(|r| r.rule == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.check == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per trial per check; metrics as `key=value` pairs joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,trial,metrics\n");
        for t in &self.trials {
            let m: Vec<String> = t.metrics.iter().map(|(k, v)| format!("{k}={}", fmt_f64(*v))).collect();
            out.push_str(&format!("{},{},{}\n", t.check, t.trial_index, m.join(";")));
        }
        out
    }
}

/// Rayon pool sized by `ISOQUAD_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize =
            v.trim().parse().map_err(|_| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return invalid(format!("{THREADS_ENV} must be at least 1"));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xC4EC_u64, |acc, b| mix64(acc ^ b as u64))
}

/// Seed for one trial of one check.
pub fn trial_seed(master_seed: u64, check: &str, trial: usize) -> u64 {
    derive(master_seed, &[name_key(check), trial as u64])
}

/// Recomputes a single trial from the config alone.
pub fn replay_trial(config: &ExperimentConfig, check: &str, trial: usize) -> Result<TrialRecord> {
    config.validate()?;
    let c = checks::prepare(check, config)?;
    run_one(c.as_ref(), config, check, trial)
}

fn run_one(c: &dyn checks::Check, config: &ExperimentConfig, name: &str, trial: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let metrics = c.trial(trial, trial_seed(config.master_seed, name, trial))?;
    Ok(TrialRecord { check: name.to_string(), trial_index: trial, metrics, elapsed: start.elapsed() })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let pool = thread_pool()?;
    pool.install(|| {
        let mut reports = Vec::new();
        let mut all = Vec::new();
        for name in &config.checks {
            let c = checks::prepare(name, config)?;
            let records: Vec<Result<TrialRecord>> =
                (0..config.trials).into_par_iter().map(|i| run_one(c.as_ref(), config, name, i)).collect();
            let records: Vec<TrialRecord> = records.into_iter().collect::<Result<_>>()?;
            let mut report = c.summarize(&records);
            report.passed = report.rules.iter().all(|r| r.passed);
            reports.push(report);
            all.extend(records);
        }
        let passed = reports.iter().all(|r| r.passed);
        Ok(ExperimentReport { config: config.clone(), checks: reports, passed, trials: all })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(rate_threshold(0.0, 100), 0.0);
        let t = (-2f64).exp();
        assert!((rate_threshold(t, 500) - (t + 3.0 * (t * (1.0 - t) / 500.0).sqrt())).abs() < 1e-15);
        assert_eq!(rate_threshold(1.5, 10), 1.5);
    }

    #[test]
    fn unknown_check_rejected() {
        let cfg = ExperimentConfig::new(EnsembleSpec::gaussian(3), 10, 2, ConeSpec::compat(vec![0], 1.0), 1, &["nope"]);
        assert!(matches!(cfg.validate(), Err(Error::UnknownCheck(_))));
    }

    #[test]
    fn seeds_depend_on_check_and_trial() {
        assert_ne!(trial_seed(1, "sandwich", 0), trial_seed(1, "sandwich", 1));
        assert_ne!(trial_seed(1, "sandwich", 0), trial_seed(1, "lasso", 0));
    }
}
