//! Per-machine cost accounting: the prefix rewrite of the LP cost, the
//! conditional bound on the rounded cost for a fixed shift, and Monte-Carlo
//! estimates of both the per-machine and the overall cost.
//!
//! Both formulas walk the jobs of machine `i` in descending Smith ratio
//! `sigma_j = w_ij / p_j` (ties by index) and weight the prefix `[j*]` by
//! `sigma_{j*} - sigma_{j*+1}` with `sigma_{n+1} = 0`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config_lp::{solve_config_lp, ConfigLpSolution};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::partition::{beta_from_unit, EdgeGraph, ShiftedClasses};
use crate::rng::{self, Purpose};
use crate::rounding::round_all;

pub const DEFAULT_STRATA: usize = 10;

/// One prefix `[j*]` of a machine's Smith order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrefixTerm {
    /// Last job of the prefix.
    pub job: usize,
    /// `sigma_{j*} - sigma_{j*+1}`.
    pub gap: f64,
    pub bracket: f64,
}

fn total(terms: &[PrefixTerm]) -> f64 {
    pairwise_sum(&terms.iter().map(|t| t.gap * t.bracket).collect::<Vec<_>>())
}

/// Jobs eligible on `machine` in Smith order with the ratio gaps.
fn smith_prefixes(inst: &Instance, machine: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let order = inst.smith_order(machine, &inst.eligible_jobs(machine))?;
    let sigma: Vec<f64> = order
        .iter()
        .map(|&j| {
            let c = inst.cell(machine, j).expect("eligible");
            c.w / c.p
        })
        .collect();
    let gaps = (0..order.len())
        .map(|r| sigma[r] - sigma.get(r + 1).copied().unwrap_or(0.0))
        .collect();
    Ok((order, gaps))
}

/// Prefix terms of the LP cost on `machine`:
/// `1/2 (sum_{j<=j*} z_ij p_j^2 + sum_f y_f p(f & [j*])^2)`.
pub fn eq6_terms(sol: &ConfigLpSolution, inst: &Instance, machine: usize) -> Result<Vec<PrefixTerm>> {
    let (order, gaps) = smith_prefixes(inst, machine)?;
    let mut rank = vec![usize::MAX; inst.job_count()];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }
    let size = |j: usize| inst.proc_time(machine, j).expect("eligible");
    let mut linear = vec![0.0; order.len()];
    let mut quad = vec![0.0; order.len()];
    for cfg in sol.masses.iter().filter(|c| c.machine == machine && c.mass != 0.0) {
        // per-rank size of this configuration, then prefix sums
        let mut at = vec![0.0; order.len()];
        for &j in &cfg.jobs {
            if rank[j] == usize::MAX {
                return Err(Error::Ineligible { machine, job: j });
            }
            at[rank[j]] = size(j);
        }
        let mut acc = 0.0;
        for r in 0..order.len() {
            acc += at[r];
            linear[r] += cfg.mass * at[r] * at[r];
            quad[r] += cfg.mass * acc * acc;
        }
    }
    let mut lin_acc = 0.0;
    Ok(order
        .iter()
        .enumerate()
        .map(|(r, &j)| {
            lin_acc += linear[r];
            PrefixTerm {
                job: j,
                gap: gaps[r],
                bracket: 0.5 * (lin_acc + quad[r]),
            }
        })
        .collect())
}

/// The LP cost of `machine` written as a sum over Smith prefixes.
pub fn eq6_rewrite(sol: &ConfigLpSolution, inst: &Instance, machine: usize) -> Result<f64> {
    Ok(total(&eq6_terms(sol, inst, machine)?))
}

/// Prefix terms of the conditional bound together with the bracket of the
/// independent-rounding bound (same without the capped class volumes).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundTerm {
    pub job: usize,
    pub gap: f64,
    pub bracket: f64,
    pub independent_bracket: f64,
    /// `1/2 sum_k min(vol([j*] & J_k), beta rho^k)^2`.
    pub capped: f64,
}

/// Terms of the conditional bound
/// `sum_{j<=j*} z p^2 + 1/2 vol^2 - 1/2 sum_k min(vol_k, beta rho^k)^2`.
pub fn eq7_terms(z: &[Vec<f64>], inst: &Instance, machine: usize, classes: &ShiftedClasses) -> Result<Vec<BoundTerm>> {
    let sizes = inst
        .uniform_sizes()
        .ok_or(Error::MachineDependentSizes(machine))?;
    let (order, gaps) = smith_prefixes(inst, machine)?;
    let members = classes.members();
    let class_ids: Vec<i32> = members.keys().copied().collect();
    let mut class_vol = vec![0.0; class_ids.len()];
    let mut sq = 0.0;
    let mut vol = 0.0;
    let mut out = Vec::with_capacity(order.len());
    for (r, &j) in order.iter().enumerate() {
        let v = z[machine][j] * sizes[j];
        sq += v * sizes[j];
        vol += v;
        let k = classes.class_of_job[j];
        let slot = class_ids.binary_search(&k).expect("class listed");
        class_vol[slot] += v;
        let capped: f64 = class_ids
            .iter()
            .zip(&class_vol)
            .map(|(&k, &cv)| cv.min(classes.threshold(k)).powi(2))
            .sum::<f64>()
            * 0.5;
        let independent = sq + 0.5 * vol * vol;
        out.push(BoundTerm {
            job: j,
            gap: gaps[r],
            bracket: independent - capped,
            independent_bracket: independent,
            capped,
        });
    }
    Ok(out)
}

pub fn eq7_bound(z: &[Vec<f64>], inst: &Instance, machine: usize, beta: f64, rho: f64) -> Result<f64> {
    let sizes = inst
        .uniform_sizes()
        .ok_or(Error::MachineDependentSizes(machine))?;
    let classes = ShiftedClasses::new(&sizes, beta, rho);
    let terms = eq7_terms(z, inst, machine, &classes)?;
    Ok(pairwise_sum(&terms.iter().map(|t| t.gap * t.bracket).collect::<Vec<_>>()))
}

/// Same prefix sum without the capped class term.
pub fn independent_bound(z: &[Vec<f64>], inst: &Instance, machine: usize, beta: f64, rho: f64) -> Result<f64> {
    let sizes = inst
        .uniform_sizes()
        .ok_or(Error::MachineDependentSizes(machine))?;
    let classes = ShiftedClasses::new(&sizes, beta, rho);
    let terms = eq7_terms(z, inst, machine, &classes)?;
    Ok(pairwise_sum(
        &terms.iter().map(|t| t.gap * t.independent_bracket).collect::<Vec<_>>(),
    ))
}

/// Midpoint shifts of `strata` equal slices of `[0, 1)` in log scale.
pub fn strata_betas(strata: usize, rho: f64) -> Vec<f64> {
    (0..strata)
        .map(|s| beta_from_unit((s as f64 + 0.5) / strata as f64, rho))
        .collect()
}

/// For each machine and prefix with a non-zero LP bracket: the conditional
/// bracket averaged over `betas`, divided by the LP bracket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrefixRatio {
    pub machine: usize,
    pub job: usize,
    pub ratio: f64,
}

pub fn prefix_ratios(sol: &ConfigLpSolution, inst: &Instance, betas: &[f64], rho: f64) -> Result<Vec<PrefixRatio>> {
    let sizes = inst.uniform_sizes().ok_or(Error::MachineDependentSizes(0))?;
    let class_sets: Vec<ShiftedClasses> = betas
        .iter()
        .map(|&b| ShiftedClasses::new(&sizes, b, rho))
        .collect();
    let mut out = Vec::new();
    for i in 0..inst.machine_count() {
        let lp = eq6_terms(sol, inst, i)?;
        let mut avg = vec![0.0; lp.len()];
        for classes in &class_sets {
            for (a, t) in avg.iter_mut().zip(eq7_terms(&sol.z, inst, i, classes)?) {
                *a += t.bracket / betas.len() as f64;
            }
        }
        for (t, a) in lp.iter().zip(avg) {
            if t.bracket > 1e-12 {
                out.push(PrefixRatio {
                    machine: i,
                    job: t.job,
                    ratio: a / t.bracket,
                });
            }
        }
    }
    Ok(out)
}

/// Sum by recursive halving so the result does not depend on thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and the standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Shift for trial `t`: stratum `(t + offset) mod strata` with a seed-derived
/// offset, uniform within the stratum. With `strata = 1` this is a plain
/// log-uniform draw.
pub fn trial_beta(seed: u64, trial: u64, strata: usize, rho: f64) -> f64 {
    let strata = strata.max(1) as u64;
    let offset = rng::stream(seed, Purpose::Beta, u64::MAX, 0).gen_range(0..strata);
    let s = (trial + offset) % strata;
    let u: f64 = rng::stream(seed, Purpose::Beta, trial, 0).gen();
    beta_from_unit((s as f64 + u) / strata as f64, rho)
}

/// Swapped instance with machine-independent sizes and its LP optimum.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub original: Instance,
    pub swapped: Instance,
    pub sizes: Vec<f64>,
    pub lp: ConfigLpSolution,
}

impl Prepared {
    pub fn new(inst: &Instance) -> Result<Self> {
        let swapped = inst.swap();
        let sizes = swapped.uniform_sizes().ok_or_else(|| {
            let j = (0..inst.job_count())
                .find(|&j| {
                    let ws: Vec<f64> = (0..inst.machine_count())
                        .filter_map(|i| inst.weight(i, j))
                        .collect();
                    ws.windows(2).any(|w| w[0] != w[1])
                })
                .unwrap_or(0);
            Error::MachineDependentSizes(j)
        })?;
        let lp = solve_config_lp(&swapped)?;
        Ok(Prepared {
            original: inst.clone(),
            swapped,
            sizes,
            lp,
        })
    }

    pub fn graph(&self, beta: f64, rho: f64) -> Result<EdgeGraph> {
        let classes = ShiftedClasses::new(&self.sizes, beta, rho);
        EdgeGraph::build(&self.lp.z, &self.swapped, &classes)
    }
}

/// Outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub beta: f64,
    pub machine_of: Vec<usize>,
    pub machine_costs: Vec<f64>,
    pub total_cost: f64,
    pub iterations: usize,
}

pub fn run_trial(prep: &Prepared, seed: u64, trial: u64, strata: usize, rho: f64) -> Result<TrialRecord> {
    let beta = trial_beta(seed, trial, strata, rho);
    let graph = prep.graph(beta, rho)?;
    let outcome = round_all(&graph, seed, trial, None)?;
    // per-machine costs agree between the two instances
    let machine_costs = prep.original.machine_costs(&outcome.machine_of)?;
    Ok(TrialRecord {
        trial,
        beta,
        total_cost: pairwise_sum(&machine_costs),
        machine_of: outcome.machine_of,
        machine_costs,
        iterations: outcome.classes.iter().map(|c| c.iterations).sum(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MachineCostReport {
    pub machine: usize,
    pub lp_cost: f64,
    pub eq6_value: f64,
    pub eq7_bound_mean: f64,
    pub eq7_bound_per_beta: Vec<(f64, f64)>,
    pub empirical_wc_mean: f64,
    /// Four standard errors.
    pub half_width: f64,
    pub trials: usize,
}

impl MachineCostReport {
    /// Mean cost within the averaged conditional bound plus the half width.
    pub fn within_bound(&self) -> bool {
        self.empirical_wc_mean <= self.eq7_bound_mean + self.half_width + 1e-9 * (1.0 + self.eq7_bound_mean)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub seed: u64,
    pub rho: f64,
    pub strata: usize,
    pub lp_objective: f64,
    pub machines: Vec<MachineCostReport>,
    pub mean_cost: f64,
    pub cost_half_width: f64,
    pub ratio: f64,
    pub ratio_half_width: f64,
}

pub fn monte_carlo(inst: &Instance, trials: usize, seed: u64, rho: f64) -> Result<MonteCarloReport> {
    let prep = Prepared::new(inst)?;
    monte_carlo_prepared(&prep, trials, seed, rho, DEFAULT_STRATA)
}

pub fn monte_carlo_prepared(prep: &Prepared, trials: usize, seed: u64, rho: f64, strata: usize) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::InvalidInstance("at least one trial is required".into()));
    }
    let m = prep.swapped.machine_count();
    let records: Vec<(TrialRecord, Vec<f64>)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let rec = run_trial(prep, seed, t, strata, rho)?;
            let bounds = (0..m)
                .map(|i| eq7_bound(&prep.lp.z, &prep.swapped, i, rec.beta, rho))
                .collect::<Result<Vec<_>>>()?;
            Ok((rec, bounds))
        })
        .collect::<Result<_>>()?;

    let lp_objective = prep.lp.objective;
    let machines = (0..m)
        .map(|i| {
            let costs: Vec<f64> = records.iter().map(|(r, _)| r.machine_costs[i]).collect();
            let bounds: Vec<f64> = records.iter().map(|(_, b)| b[i]).collect();
            let (mean, se) = mean_and_stderr(&costs);
            Ok(MachineCostReport {
                machine: i,
                lp_cost: prep.lp.lp_cost_on_machine(i),
                eq6_value: eq6_rewrite(&prep.lp, &prep.swapped, i)?,
                eq7_bound_mean: pairwise_sum(&bounds) / trials as f64,
                eq7_bound_per_beta: records.iter().map(|(r, _)| r.beta).zip(bounds).collect(),
                empirical_wc_mean: mean,
                half_width: 4.0 * se,
                trials,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<f64> = records.iter().map(|(r, _)| r.total_cost).collect();
    let (mean_cost, se) = mean_and_stderr(&totals);
    Ok(MonteCarloReport {
        trials,
        seed,
        rho,
        strata,
        lp_objective,
        machines,
        mean_cost,
        cost_half_width: 4.0 * se,
        ratio: mean_cost / lp_objective,
        ratio_half_width: 4.0 * se / lp_objective,
    })
}
