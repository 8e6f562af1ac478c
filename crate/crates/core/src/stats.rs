//! Statistical checks of the rounding at a fixed shift: edge marginals,
//! negative correlation inside a (machine, class) group and the conditional
//! per-machine cost bound.
//!
//! Every check compares a sample mean against its LP counterpart with a
//! band of four standard errors plus `range / N`, the value of a single
//! sample. The second term covers variables whose sample variance is zero
//! only because the event is rare.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{eq7_bound, mean_and_stderr, Prepared};
use crate::error::Result;
use crate::rounding::round_all;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckFailure {
    pub what: String,
    pub observed: f64,
    pub reference: f64,
    pub band: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckFamily {
    pub name: String,
    pub count: usize,
    /// Largest `observed - reference - band` (two-sided checks use the
    /// absolute deviation).
    pub worst_excess: f64,
    pub failures: Vec<CheckFailure>,
}

impl CheckFamily {
    fn new(name: &str) -> Self {
        CheckFamily {
            name: name.into(),
            count: 0,
            worst_excess: f64::NEG_INFINITY,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, what: impl FnOnce() -> String, deviation: f64, observed: f64, reference: f64, band: f64) {
        self.count += 1;
        let excess = deviation - band;
        self.worst_excess = self.worst_excess.max(excess);
        if excess > 0.0 {
            self.failures.push(CheckFailure {
                what: what(),
                observed,
                reference,
                band,
            });
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MachineBound {
    pub machine: usize,
    pub eq7_bound: f64,
    pub mean_cost: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedBetaReport {
    pub beta: f64,
    pub rho: f64,
    pub trials: usize,
    pub edges: usize,
    pub marginals: CheckFamily,
    pub unmarked_pairs: CheckFamily,
    pub unmarked_vs_marked: CheckFamily,
    pub conditional_bound: CheckFamily,
    pub machines: Vec<MachineBound>,
}

impl FixedBetaReport {
    pub fn families(&self) -> [&CheckFamily; 4] {
        [
            &self.marginals,
            &self.unmarked_pairs,
            &self.unmarked_vs_marked,
            &self.conditional_bound,
        ]
    }

    pub fn passed(&self) -> bool {
        self.families().iter().all(|f| f.passed())
    }
}

fn band(stderr: f64, range: f64, n: usize) -> f64 {
    4.0 * stderr + range / n as f64
}

/// Run `trials` roundings of the graph for `beta` and check the
/// correlation claims and the per-machine conditional bound.
pub fn fixed_beta_checks(prep: &Prepared, beta: f64, rho: f64, trials: usize, seed: u64) -> Result<FixedBetaReport> {
    let graph = prep.graph(beta, rho)?;
    let samples: Vec<(Vec<bool>, Vec<f64>)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let out = round_all(&graph, seed, t, None)?;
            let costs = prep.swapped.machine_costs(&out.machine_of)?;
            Ok((out.chosen, costs))
        })
        .collect::<Result<_>>()?;
    let n = trials;
    let column = |f: &dyn Fn(&Vec<bool>) -> f64| -> Vec<f64> { samples.iter().map(|(c, _)| f(c)).collect() };

    let mut marginals = CheckFamily::new("edge marginals");
    for e in &graph.edges {
        let xs = column(&|c| c[e.id] as u8 as f64);
        let (mean, se) = mean_and_stderr(&xs);
        marginals.record(
            || format!("edge {} (machine {}, job {})", e.id, e.machine, e.job),
            (mean - e.x).abs(),
            mean,
            e.x,
            band(se, 1.0, n),
        );
    }

    let mut pairs = CheckFamily::new("unmarked pair products");
    let mut groups = CheckFamily::new("unmarked edge times marked group volume");
    for k in graph.class_ids() {
        for i in 0..graph.machines {
            let group: Vec<_> = graph.edges_of_class(k).filter(|e| e.machine == i).collect();
            let unmarked: Vec<_> = group.iter().filter(|e| !e.marked).collect();
            let marked: Vec<_> = group.iter().filter(|e| e.marked).collect();
            for (a, e) in unmarked.iter().enumerate() {
                for f in &unmarked[a + 1..] {
                    let xs = column(&|c| (c[e.id] && c[f.id]) as u8 as f64);
                    let (mean, se) = mean_and_stderr(&xs);
                    let reference = e.x * f.x;
                    pairs.record(
                        || format!("edges {} and {}", e.id, f.id),
                        mean - reference,
                        mean,
                        reference,
                        band(se, 1.0, n),
                    );
                }
                if marked.is_empty() {
                    continue;
                }
                let range: f64 = marked.iter().map(|m| m.size).sum();
                let xs = column(&|c| {
                    if c[e.id] {
                        marked.iter().filter(|m| c[m.id]).map(|m| m.size).sum()
                    } else {
                        0.0
                    }
                });
                let (mean, se) = mean_and_stderr(&xs);
                let reference = e.x * marked.iter().map(|m| m.volume()).sum::<f64>();
                groups.record(
                    || format!("edge {} against marked group (machine {i}, class {k})", e.id),
                    mean - reference,
                    mean,
                    reference,
                    band(se, range, n),
                );
            }
        }
    }

    let mut bound = CheckFamily::new("conditional cost bound");
    let mut machines = Vec::new();
    for i in 0..graph.machines {
        let costs: Vec<f64> = samples.iter().map(|(_, c)| c[i]).collect();
        let (mean, se) = mean_and_stderr(&costs);
        let eq7 = eq7_bound(&prep.lp.z, &prep.swapped, i, beta, rho)?;
        bound.record(
            || format!("machine {i}"),
            mean - eq7,
            mean,
            eq7,
            4.0 * se + 1e-9 * (1.0 + eq7.abs()),
        );
        machines.push(MachineBound {
            machine: i,
            eq7_bound: eq7,
            mean_cost: mean,
            half_width: 4.0 * se,
        });
    }

    Ok(FixedBetaReport {
        beta,
        rho,
        trials,
        edges: graph.edges.len(),
        marginals,
        unmarked_pairs: pairs,
        unmarked_vs_marked: groups,
        conditional_bound: bound,
        machines,
    })
}
