//! Single solves and full experiments with their reports.

use serde::{Deserialize, Serialize};

use crate::analysis::{monte_carlo_prepared, prefix_ratios, run_trial, strata_betas, MonteCarloReport, Prepared, DEFAULT_STRATA};
use crate::certificate::{check_table, content_hash, parse_certificate, TABLE1_JSON};
use crate::config_lp::DEFAULT_JOB_CAP;
use crate::error::{Error, Result};
use crate::generate::{gen_instance, GeneratorSpec};
use crate::instance::Instance;
use crate::partition::DEFAULT_RHO;
use crate::stats::{fixed_beta_checks, FixedBetaReport};

/// Ratio the end-to-end and prefix checks are held to.
pub const TARGET_RATIO: f64 = 1.36;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub seed: u64,
    pub rho: f64,
    pub beta: f64,
    pub machine_of: Vec<usize>,
    pub cost: f64,
    pub lp_bound: f64,
    pub ratio: f64,
    pub iterations: usize,
}

fn solve_prepared(prep: &Prepared, seed: u64, rho: f64) -> Result<SolveReport> {
    let rec = run_trial(prep, seed, 0, DEFAULT_STRATA, rho)?;
    Ok(SolveReport {
        seed,
        rho,
        beta: rec.beta,
        cost: rec.total_cost,
        lp_bound: prep.lp.objective,
        ratio: rec.total_cost / prep.lp.objective,
        machine_of: rec.machine_of,
        iterations: rec.iterations,
    })
}

/// Swap, solve the LP, draw a shift, round every class. The result is
/// trial 0 of an experiment with the same seed.
pub fn solve(inst: &Instance, seed: u64, rho: f64) -> Result<SolveReport> {
    solve_prepared(&Prepared::new(inst)?, seed, rho)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Generated(GeneratorSpec),
    File(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub rho: f64,
    pub source: InstanceSource,
    /// Trials for the fixed-shift correlation checks; 0 skips them.
    pub fixed_beta_trials: usize,
}

impl ExperimentConfig {
    pub fn new(source: InstanceSource, seed: u64, trials: usize) -> Self {
        ExperimentConfig {
            seed,
            trials,
            rho: DEFAULT_RHO,
            source,
            fixed_beta_trials: trials,
        }
    }

    pub fn load_instance(&self) -> Result<Instance> {
        match &self.source {
            InstanceSource::Generated(spec) => gen_instance(spec, self.seed),
            InstanceSource::File(path) => Instance::from_json(&std::fs::read_to_string(path)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub machines: usize,
    pub jobs: usize,
    pub certificate_hash: String,
    pub certificate_mean_alpha: f64,
    pub lp_objective: f64,
    pub lp_dual_bound: f64,
    pub first_trial: SolveReport,
    pub monte_carlo: MonteCarloReport,
    pub max_prefix_ratio: f64,
    pub fixed_beta: Option<FixedBetaReport>,
    pub checks: Vec<NamedCheck>,
    pub passed: bool,
    /// Seconds since the Unix epoch; the only field that differs between
    /// reruns.
    pub timestamp: u64,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.trials == 0 {
        return Err(Error::InvalidInstance("trials must be at least 1".into()));
    }
    if !(config.rho > 1.0) {
        return Err(Error::InvalidInstance("rho must exceed 1".into()));
    }
    let inst = config.load_instance()?;
    if inst.job_count() > DEFAULT_JOB_CAP {
        return Err(Error::TooManyJobs {
            jobs: inst.job_count(),
            cap: DEFAULT_JOB_CAP,
        });
    }
    let prep = Prepared::new(&inst)?;
    let rho = config.rho;
    let first_trial = solve_prepared(&prep, config.seed, rho)?;
    let mc = monte_carlo_prepared(&prep, config.trials, config.seed, rho, DEFAULT_STRATA)?;

    let mut checks = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        checks.push(NamedCheck {
            name: name.into(),
            passed,
            detail,
        })
    };

    let gap = prep.lp.duality_gap();
    check("lp duality gap", gap <= 1e-7 * (1.0 + prep.lp.objective.abs()), format!("{gap:.3e}"));
    let worst_eq6 = mc
        .machines
        .iter()
        .map(|m| (m.eq6_value - m.lp_cost).abs())
        .fold(0.0, f64::max);
    check("lp cost rewrite", worst_eq6 <= 1e-9 * (1.0 + prep.lp.objective), format!("{worst_eq6:.3e}"));
    let below: Vec<usize> = mc.machines.iter().filter(|m| !m.within_bound()).map(|m| m.machine).collect();
    check("averaged conditional bound", below.is_empty(), format!("machines over bound: {below:?}"));
    check(
        "mean ratio",
        mc.ratio <= TARGET_RATIO + mc.ratio_half_width,
        format!("{:.6} +- {:.6}", mc.ratio, mc.ratio_half_width),
    );
    check("ratio at least one", mc.ratio >= 1.0 - 1e-9, format!("{:.6}", mc.ratio));

    let max_prefix_ratio = if rho == DEFAULT_RHO {
        let ratios = prefix_ratios(&prep.lp, &prep.swapped, &strata_betas(DEFAULT_STRATA, rho), rho)?;
        let max = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
        check("stratified prefix ratio", max <= TARGET_RATIO + 1e-3, format!("{max:.6}"));
        max
    } else {
        f64::NAN
    };

    let fixed_beta = if config.fixed_beta_trials > 0 {
        let rep = fixed_beta_checks(&prep, first_trial.beta, rho, config.fixed_beta_trials, config.seed)?;
        for fam in rep.families() {
            check(
                &fam.name,
                fam.passed(),
                format!("{} checks, {} failures", fam.count, fam.failures.len()),
            );
        }
        Some(rep)
    } else {
        None
    };

    let table = check_table(&parse_certificate(TABLE1_JSON)?)?;
    check("certificate", table.passed, format!("mean alpha {:.7}", table.mean_alpha));

    let passed = checks.iter().all(|c| c.passed);
    Ok(ExperimentReport {
        config: config.clone(),
        machines: inst.machine_count(),
        jobs: inst.job_count(),
        certificate_hash: content_hash(TABLE1_JSON),
        certificate_mean_alpha: table.mean_alpha,
        lp_objective: prep.lp.objective,
        lp_dual_bound: prep.lp.dual_bound,
        first_trial,
        monte_carlo: mc,
        max_prefix_ratio,
        fixed_beta,
        checks,
        passed,
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}
