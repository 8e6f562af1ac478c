//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use common::*;
use wct_core::analysis::{mean_and_stderr, monte_carlo_prepared, trial_beta, Prepared};
use wct_core::certificate::{self, check_table, search_params, SearchGrid};
use wct_core::config_lp::{solve_config_lp, ConfigLpSolution};
use wct_core::partition::EdgeGraph;
use wct_core::rng::{self as keyed, Purpose};
use wct_core::rounding::{round_all, RoundingState};
use wct_core::Instance;

const SEED: u64 = 20240601;

/// Alpha column of the published parameter table, typed in separately from
/// the bundled asset.
const PUBLISHED_ALPHA: [f64; 10] = [
    1.376228, 1.370445, 1.364426, 1.356049, 1.349022, 1.344238, 1.341530, 1.340912, 1.356413, 1.375000,
];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

// ---------------------------------------------------------------- oracles

/// Jobs eligible on `machine` by descending `w / p`, ties by index, using
/// cross-multiplication.
fn oracle_order(inst: &Instance, machine: usize) -> Vec<usize> {
    let mut jobs: Vec<usize> = (0..inst.job_count()).filter(|&j| inst.eligible(machine, j)).collect();
    jobs.sort_by(|&a, &b| {
        let (pa, wa) = (rat(inst.proc_time(machine, a).unwrap()), rat(inst.weight(machine, a).unwrap()));
        let (pb, wb) = (rat(inst.proc_time(machine, b).unwrap()), rat(inst.weight(machine, b).unwrap()));
        (wb * pa).cmp(&(wa * pb)).then(a.cmp(&b))
    });
    jobs
}

fn sigma_gaps(inst: &Instance, machine: usize, order: &[usize]) -> Vec<f64> {
    let sigma: Vec<f64> = order
        .iter()
        .map(|&j| inst.weight(machine, j).unwrap() / inst.proc_time(machine, j).unwrap())
        .collect();
    (0..order.len())
        .map(|r| sigma[r] - if r + 1 < sigma.len() { sigma[r + 1] } else { 0.0 })
        .collect()
}

fn oracle_class(p: f64, beta: f64) -> i32 {
    (p / beta).log2().floor() as i32
}

/// Conditional-bound brackets per Smith prefix of `machine`.
fn oracle_eq7_brackets(prep: &Prepared, machine: usize, beta: f64) -> Vec<f64> {
    let inst = &prep.swapped;
    let order = oracle_order(inst, machine);
    let mut out = Vec::new();
    for r in 0..order.len() {
        let prefix = &order[..=r];
        let mut sq = 0.0;
        let mut vol = 0.0;
        let mut by_class = std::collections::BTreeMap::<i32, f64>::new();
        for &j in prefix {
            let p = prep.sizes[j];
            let z = prep.lp.z[machine][j];
            sq += z * p * p;
            vol += z * p;
            *by_class.entry(oracle_class(p, beta)).or_default() += z * p;
        }
        let capped: f64 = by_class
            .iter()
            .map(|(&k, &v)| v.min(beta * 2f64.powi(k)).powi(2))
            .sum();
        out.push(sq + 0.5 * vol * vol - 0.5 * capped);
    }
    out
}

fn oracle_eq7(prep: &Prepared, machine: usize, beta: f64) -> f64 {
    let order = oracle_order(&prep.swapped, machine);
    let gaps = sigma_gaps(&prep.swapped, machine, &order);
    gaps.iter().zip(oracle_eq7_brackets(prep, machine, beta)).map(|(g, b)| g * b).sum()
}

/// LP-cost brackets per Smith prefix of `machine`.
fn oracle_eq6_brackets(sol: &ConfigLpSolution, inst: &Instance, machine: usize) -> Vec<f64> {
    let order = oracle_order(inst, machine);
    (0..order.len())
        .map(|r| {
            let prefix = &order[..=r];
            let size = |j: usize| inst.proc_time(machine, j).unwrap();
            let lin: f64 = prefix.iter().map(|&j| sol.z[machine][j] * size(j) * size(j)).sum();
            let quad: f64 = sol
                .masses
                .iter()
                .filter(|c| c.machine == machine)
                .map(|c| {
                    let s: f64 = c.jobs.iter().filter(|j| prefix.contains(j)).map(|&j| size(j)).sum();
                    c.mass * s * s
                })
                .sum();
            0.5 * (lin + quad)
        })
        .collect()
}

fn fractional_instances(count: usize, machines: usize, jobs: usize) -> Vec<Prepared> {
    let mut out = Vec::new();
    let mut idx = 0;
    while out.len() < count {
        let inst = mixed_instance(idx, machines + (idx as usize % 2), jobs);
        idx += 1;
        let prep = Prepared::new(&inst).unwrap();
        if lp_is_fractional(&prep.lp) {
            out.push(prep);
        }
    }
    out
}

// ---------------------------------------------------------------- criteria

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let report = check_table(&certificate::table1()).unwrap();
    let elapsed = start.elapsed();
    let oracle_mean = PUBLISHED_ALPHA.iter().sum::<f64>() / 10.0;
    let cases = report.intervals.len() * 2 * (6 + 23);
    let ok = report.passed
        && report.worst_case_value <= 1e-9
        && (report.mean_alpha - 1.3574263).abs() <= 1e-6
        && (report.mean_alpha - oracle_mean).abs() <= 1e-12
        && report.mean_alpha < 1.358
        && elapsed < Duration::from_secs(1);
    outcome(
        ok,
        format!(
            "{cases} case maxima, worst {:.3e}, mean alpha {:.7}, {:?}",
            report.worst_case_value, report.mean_alpha, elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let results: Vec<(usize, bool)> = (0..200u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded(SEED ^ k);
            let m = rng.gen_range(1..=3);
            let n = rng.gen_range(1..=6);
            let inst = random_instance_with_density(&mut rng, m, n, 1.0);
            let swapped = inst.swap();
            let all = all_assignments(&inst);
            let ok = all.len() == m.pow(n as u32)
                && all.iter().all(|a| {
                    let c = oracle_total_cost(&inst, a);
                    c == oracle_total_cost(&swapped, a) && c == inst.total_cost_exact(a).unwrap()
                });
            (all.len(), ok)
        })
        .collect();
    let elapsed = start.elapsed();
    let checked: usize = results.iter().map(|r| r.0).sum();
    let bad = results.iter().filter(|r| !r.1).count();
    outcome(
        bad == 0 && elapsed < Duration::from_secs(30),
        format!("200 instances, {checked} assignments, {bad} mismatching instances, {elapsed:?}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let worst: Vec<f64> = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded(SEED.wrapping_mul(31) ^ k);
            let m = rng.gen_range(1..=4);
            let n = rng.gen_range(1..=10);
            let inst = random_general_instance(&mut rng, m, n);
            let parts = rng.gen_range(1..=4);
            let y = random_feasible_y(&mut rng, &inst, parts);
            let sol = ConfigLpSolution::from_masses(&inst, y.clone()).unwrap();
            (0..m)
                .map(|i| {
                    let direct = oracle_lp_cost(&inst, &y, i);
                    let rhs = wct_core::analysis::eq6_rewrite(&sol, &inst, i).unwrap();
                    (direct - rhs).abs() / (1.0 + direct.abs())
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let elapsed = start.elapsed();
    let max = worst.iter().cloned().fold(0.0, f64::max);
    outcome(
        max <= 1e-9 && elapsed < Duration::from_secs(30),
        format!("1000 fractional solutions, worst relative gap {max:.2e}, {elapsed:?}"),
    )
}

#[derive(Default)]
struct RunCheck {
    runs: usize,
    iterations: usize,
    violations: Vec<String>,
}

/// Drive the rounding of every class by hand and check each invariant.
fn checked_run(g: &EdgeGraph, seed: u64, trial: u64) -> std::result::Result<usize, String> {
    let mut iterations = 0;
    let mut assigned = vec![0usize; g.jobs];
    for k in g.class_ids() {
        let mut state = RoundingState::new(g, k);
        let mut rng = keyed::stream(seed, Purpose::Rounding, trial, k as i64);
        let cap = state.len();
        let mut iters = 0;
        let marked_stats = |s: &RoundingState| {
            let mut vol = vec![0.0; g.machines];
            let mut deg = vec![0usize; g.machines];
            for l in 0..s.len() {
                let e = s.edge(l);
                if e.marked && s.values()[l] > 0.0 {
                    vol[e.machine] += s.values()[l] * e.size;
                    deg[e.machine] += 1;
                }
            }
            (vol, deg)
        };
        let job_sums = |s: &RoundingState| {
            let mut sums = vec![0.0; g.jobs];
            for l in 0..s.len() {
                sums[s.edge(l).job] += s.values()[l];
            }
            sums
        };
        while let Some(s) = state.find_structure() {
            iters += 1;
            let a = state.build_direction(&s).map_err(|e| e.to_string())?;
            let (vol0, deg0) = marked_stats(&state);
            let jobs0 = job_sums(&state);
            state.step(&a, &mut rng).map_err(|e| e.to_string())?;
            let (vol1, _) = marked_stats(&state);
            for i in 0..g.machines {
                if deg0[i] >= 2 && (vol1[i] - vol0[i]).abs() > 1e-9 {
                    return Err(format!("class {k}: marked volume on machine {i} moved by {:e}", vol1[i] - vol0[i]));
                }
            }
            for (j, (b, a)) in jobs0.iter().zip(job_sums(&state)).enumerate() {
                if (b - a).abs() > 1e-9 {
                    return Err(format!("class {k}: job {j} total moved"));
                }
            }
        }
        if iters > cap {
            return Err(format!("class {k}: {iters} iterations for {cap} edges"));
        }
        iterations += iters;
        if let Some(v) = state.values().iter().find(|&&v| v.min(1.0 - v).abs() > 1e-6) {
            return Err(format!("class {k}: fractional final value {v}"));
        }
        let mut marked_hits = vec![0usize; g.machines];
        for l in 0..state.len() {
            if state.values()[l] > 0.5 {
                let e = state.edge(l);
                assigned[e.job] += 1;
                if e.marked {
                    marked_hits[e.machine] += 1;
                }
            }
        }
        if marked_hits.iter().any(|&c| c > 1) {
            return Err(format!("class {k}: two marked edges selected on one machine"));
        }
    }
    if let Some(j) = assigned.iter().position(|&c| c != 1) {
        return Err(format!("job {j} assigned {} times", assigned[j]));
    }
    // the library path must agree with the hand-driven one
    let lib = round_all(g, seed, trial, None).map_err(|e| e.to_string())?;
    if lib.classes.iter().map(|c| c.iterations).sum::<usize>() != iterations {
        return Err("library run diverged from the hand-driven run".into());
    }
    Ok(iterations)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let per_instance: Vec<RunCheck> = (0..50u64)
        .into_par_iter()
        .map(|idx| {
            let inst = mixed_instance(idx, 2 + idx as usize % 3, 6 + idx as usize % 5);
            let prep = Prepared::new(&inst).unwrap();
            let mut rc = RunCheck::default();
            for t in 0..200u64 {
                let beta = trial_beta(SEED + idx, t, 10, 2.0);
                let g = prep.graph(beta, 2.0).unwrap();
                rc.runs += 1;
                match checked_run(&g, SEED + idx, t) {
                    Ok(it) => rc.iterations += it,
                    Err(e) => rc.violations.push(format!("instance {idx} trial {t}: {e}")),
                }
            }
            rc
        })
        .collect();
    let elapsed = start.elapsed();
    let runs: usize = per_instance.iter().map(|r| r.runs).sum();
    let iterations: usize = per_instance.iter().map(|r| r.iterations).sum();
    let violations: Vec<&String> = per_instance.iter().flat_map(|r| &r.violations).collect();
    for v in violations.iter().take(5) {
        eprintln!("  {v}");
    }
    outcome(
        violations.is_empty() && runs == 10_000 && elapsed < Duration::from_secs(300),
        format!("{runs} runs, {iterations} iterations, {} violations, {elapsed:?}", violations.len()),
    )
}

struct Family {
    count: usize,
    failures: usize,
    worst: f64,
}

impl Family {
    fn new() -> Self {
        Family {
            count: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// `excess = deviation - band`; positive is a failure.
    fn add(&mut self, excess: f64) {
        self.count += 1;
        self.worst = self.worst.max(excess);
        if excess > 0.0 {
            self.failures += 1;
        }
    }

    fn line(&self, name: &str) -> String {
        format!("{name}: {} checks, {} over band (worst excess {:.2e})", self.count, self.failures, self.worst)
    }
}

/// Criteria 5 and 6 share their runs.
fn criteria_5_and_6() -> (Outcome, Outcome) {
    const N: usize = 10_000;
    let start = Instant::now();
    let instances = fractional_instances(10, 2, 8);
    let mut marg = Family::new();
    let mut pairs = Family::new();
    let mut groups = Family::new();
    let mut bound = Family::new();
    for (idx, prep) in instances.iter().enumerate() {
        let beta = trial_beta(SEED + 7 * idx as u64, 0, 1, 2.0);
        let g = prep.graph(beta, 2.0).unwrap();
        let samples: Vec<(Vec<bool>, Vec<f64>)> = (0..N as u64)
            .into_par_iter()
            .map(|t| {
                let out = round_all(&g, SEED + idx as u64, t, None).unwrap();
                let costs = (0..g.machines)
                    .map(|i| {
                        let jobs: Vec<usize> = (0..g.jobs).filter(|&j| out.machine_of[j] == i).collect();
                        to_f64(&oracle_machine_cost(&prep.swapped, i, &jobs))
                    })
                    .collect();
                (out.chosen, costs)
            })
            .collect();
        let n = N as f64;
        let col = |f: &dyn Fn(&[bool]) -> f64| -> Vec<f64> { samples.iter().map(|(c, _)| f(c)).collect() };
        for e in &g.edges {
            let (mean, se) = mean_and_stderr(&col(&|c| c[e.id] as u8 as f64));
            marg.add((mean - e.x).abs() - (4.0 * se + 1.0 / n));
        }
        for k in g.class_ids() {
            for i in 0..g.machines {
                let group: Vec<_> = g.edges.iter().filter(|e| e.class == k && e.machine == i).collect();
                let unmarked: Vec<_> = group.iter().filter(|e| !e.marked).collect();
                let marked: Vec<_> = group.iter().filter(|e| e.marked).collect();
                for (a, e) in unmarked.iter().enumerate() {
                    for f in &unmarked[a + 1..] {
                        let (mean, se) = mean_and_stderr(&col(&|c| (c[e.id] && c[f.id]) as u8 as f64));
                        pairs.add(mean - e.x * f.x - (4.0 * se + 1.0 / n));
                    }
                    if marked.is_empty() {
                        continue;
                    }
                    let range: f64 = marked.iter().map(|m| m.size).sum();
                    let xs = col(&|c| {
                        if c[e.id] {
                            marked.iter().filter(|m| c[m.id]).map(|m| m.size).sum()
                        } else {
                            0.0
                        }
                    });
                    let (mean, se) = mean_and_stderr(&xs);
                    let lp: f64 = e.x * marked.iter().map(|m| m.x * m.size).sum::<f64>();
                    groups.add(mean - lp - (4.0 * se + range / n));
                }
            }
        }
        for i in 0..g.machines {
            let costs: Vec<f64> = samples.iter().map(|(_, c)| c[i]).collect();
            let (mean, se) = mean_and_stderr(&costs);
            let b = oracle_eq7(prep, i, beta);
            bound.add(mean - b - (4.0 * se + 1e-9 * (1.0 + b)));
        }
    }
    let elapsed = start.elapsed();
    let five = outcome(
        marg.failures + pairs.failures + groups.failures == 0 && elapsed < Duration::from_secs(600),
        format!(
            "{}; {}; {}; {elapsed:?}",
            marg.line("marginals"),
            pairs.line("unmarked pairs"),
            groups.line("unmarked x marked group")
        ),
    );
    let six = outcome(bound.failures == 0, bound.line("machines"));
    (five, six)
}

fn criterion_7() -> Outcome {
    const N: usize = 10_000;
    let start = Instant::now();
    let mids: Vec<f64> = (0..10).map(|s| 2f64.powf((s as f64 + 0.5) / 10.0)).collect();
    let rows: Vec<(f64, f64, f64, bool)> = (0..50u64)
        .map(|idx| {
            let mut rng = seeded(SEED + 500 + idx);
            let m = rng.gen_range(2..=4);
            let n = rng.gen_range(6..=12);
            let inst = mixed_instance(500 + idx, m, n);
            let prep = Prepared::new(&inst).unwrap();
            let mc = monte_carlo_prepared(&prep, N, SEED + idx, 2.0, 10).unwrap();
            let mut worst_prefix: f64 = 0.0;
            for i in 0..prep.swapped.machine_count() {
                let lp = oracle_eq6_brackets(&prep.lp, &prep.swapped, i);
                let mut avg = vec![0.0; lp.len()];
                for &b in &mids {
                    for (a, v) in avg.iter_mut().zip(oracle_eq7_brackets(&prep, i, b)) {
                        *a += v / mids.len() as f64;
                    }
                }
                for (l, a) in lp.iter().zip(avg) {
                    if *l > 1e-12 {
                        worst_prefix = worst_prefix.max(a / l);
                    }
                }
            }
            (mc.ratio, mc.ratio_half_width, worst_prefix, lp_is_fractional(&prep.lp))
        })
        .collect();
    let elapsed = start.elapsed();
    let over = rows.iter().filter(|r| r.0 > 1.36 + r.1).count();
    let worst_ratio = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_prefix = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let fractional = rows.iter().filter(|r| r.3).count();
    outcome(
        over == 0 && worst_prefix <= 1.36 + 1e-3 && elapsed < Duration::from_secs(900),
        format!(
            "50 instances ({fractional} with fractional LP), max mean ratio {worst_ratio:.5}, \
             {over} over 1.36 + 4 sigma, max stratified prefix ratio {worst_prefix:.5}, {elapsed:?}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let rows: Vec<(f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded(SEED.wrapping_mul(7) ^ k);
            let m = rng.gen_range(1..=3);
            let n = rng.gen_range(1..=6);
            let inst = random_general_instance(&mut rng, m, n);
            let lp = solve_config_lp(&inst).unwrap();
            let opt = to_f64(&oracle_optimum(&inst));
            (lp.objective - opt, lp.duality_gap())
        })
        .collect();
    let elapsed = start.elapsed();
    let excess = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let gap = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        excess <= 1e-7 && gap <= 1e-7 && elapsed < Duration::from_secs(120),
        format!("200 instances, max LP - OPT {excess:.2e}, max duality gap {gap:.2e}, {elapsed:?}"),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let row5 = certificate::table1().into_iter().find(|r| r.o == 5).unwrap();
    let found = search_params(5, &SearchGrid::around(&row5, 3, 0.01)).unwrap();
    let elapsed = start.elapsed();
    let verified = certificate::check_interval(&found).passed;
    outcome(
        verified && found.alpha <= 1.349022 + 0.002 && elapsed < Duration::from_secs(120),
        format!("alpha {:.6} (published 1.349022), re-checked {verified}, {elapsed:?}", found.alpha),
    )
}

fn main() {
    // `cargo test -- <filter>` passes arguments; run everything regardless
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!("criterion {id} {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    report(1, "certificate reproduction", criterion_1());
    report(2, "swap lemma", criterion_2());
    report(3, "LP cost rewrite", criterion_3());
    report(4, "rounding structure", criterion_4());
    let (five, six) = criteria_5_and_6();
    report(5, "marginals and correlations", five);
    report(6, "conditional bound", six);
    report(7, "end-to-end ratio", criterion_7());
    report(8, "LP optimality", criterion_8());
    report(9, "parameter search", criterion_9());
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all 9 criteria PASS");
    } else {
        println!("acceptance: FAIL {failed:?}");
        std::process::exit(1);
    }
}
