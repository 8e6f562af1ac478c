//! Random geometric job classes and the marked/unmarked edge multigraph.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;

pub const DEFAULT_RHO: f64 = 2.0;

/// Edges below this `x` after a split are discarded.
const MIN_EDGE_X: f64 = 1e-12;
/// Relative distance to a class boundary that counts as on the boundary.
const BOUNDARY_SNAP: f64 = 1e-12;

/// `beta = rho^u`, so `ln beta` is uniform on `[0, ln rho)` when `u` is
/// uniform on `[0, 1)`.
pub fn beta_from_unit(u: f64, rho: f64) -> f64 {
    rho.powf(u)
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, rho: f64) -> f64 {
    assert!(rho > 1.0, "rho must exceed 1");
    beta_from_unit(rng.gen::<f64>(), rho)
}

/// Class `k` with `beta rho^k <= p < beta rho^(k+1)`. A size within a
/// relative `1e-12` below a boundary is placed in the class that starts at
/// that boundary.
pub fn classify(p: f64, beta: f64, rho: f64) -> i32 {
    assert!(p > 0.0 && beta > 0.0 && rho > 1.0);
    let mut k = ((p / beta).ln() / rho.ln()).floor() as i32;
    let lower = |k: i32| beta * rho.powi(k);
    while p < lower(k) {
        k -= 1;
    }
    while p >= lower(k + 1) {
        k += 1;
    }
    if p >= lower(k + 1) * (1.0 - BOUNDARY_SNAP) {
        k += 1;
    }
    k
}

/// Job classes for one draw of `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedClasses {
    pub rho: f64,
    pub beta: f64,
    pub class_of_job: Vec<i32>,
}

impl ShiftedClasses {
    pub fn new(sizes: &[f64], beta: f64, rho: f64) -> Self {
        assert!((1.0..rho).contains(&beta), "beta must lie in [1, rho)");
        ShiftedClasses {
            rho,
            beta,
            class_of_job: sizes.iter().map(|&p| classify(p, beta, rho)).collect(),
        }
    }

    /// Lower size boundary `beta rho^k` of class `k`; also the marked-volume
    /// budget of each (machine, class) group.
    pub fn threshold(&self, k: i32) -> f64 {
        self.beta * self.rho.powi(k)
    }

    /// Jobs of each non-empty class, by ascending class.
    pub fn members(&self) -> BTreeMap<i32, Vec<usize>> {
        let mut map: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (j, &k) in self.class_of_job.iter().enumerate() {
            map.entry(k).or_default().push(j);
        }
        map
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub id: usize,
    pub machine: usize,
    pub job: usize,
    pub x: f64,
    pub marked: bool,
    pub class: i32,
    #[serde(skip)]
    pub smith_ratio: f64,
    #[serde(skip)]
    pub size: f64,
}

impl Edge {
    pub fn volume(&self) -> f64 {
        self.x * self.size
    }
}

/// Bipartite multigraph between machines and jobs. Edge ids equal their
/// position in `edges`, which is creation order: grouped by class, then
/// machine, each group in descending Smith ratio with marked edges first.
#[derive(Clone, Debug)]
pub struct EdgeGraph {
    pub machines: usize,
    pub jobs: usize,
    pub sizes: Vec<f64>,
    pub classes: ShiftedClasses,
    pub edges: Vec<Edge>,
}

impl EdgeGraph {
    /// Build the graph from a fractional assignment `z` on an instance with
    /// machine-independent sizes.
    pub fn build(z: &[Vec<f64>], inst: &Instance, classes: &ShiftedClasses) -> Result<Self> {
        let sizes = inst.uniform_sizes().ok_or_else(|| {
            let j = (0..inst.job_count())
                .find(|&j| {
                    let mut it = (0..inst.machine_count()).filter_map(|i| inst.proc_time(i, j));
                    let first = it.next();
                    it.any(|p| Some(p) != first)
                })
                .unwrap_or(0);
            Error::MachineDependentSizes(j)
        })?;
        let (m, n) = (inst.machine_count(), inst.job_count());
        if z.len() != m || z.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidFractional("z has the wrong shape".into()));
        }
        for j in 0..n {
            let total: f64 = (0..m).map(|i| z[i][j]).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidFractional(format!(
                    "job {j} has total fractional assignment {total}"
                )));
            }
            for i in 0..m {
                if z[i][j] < -1e-12 || z[i][j] > 1.0 + 1e-9 {
                    return Err(Error::InvalidFractional(format!("z[{i}][{j}] = {}", z[i][j])));
                }
                if z[i][j] > 0.0 && !inst.eligible(i, j) {
                    return Err(Error::Ineligible { machine: i, job: j });
                }
            }
        }

        let mut edges = Vec::new();
        for (k, members) in classes.members() {
            let budget = classes.threshold(k);
            for i in 0..m {
                let mut group: Vec<(usize, f64)> = members
                    .iter()
                    .filter(|&&j| z[i][j] > 0.0)
                    .map(|&j| (j, inst.weight(i, j).expect("eligible") / sizes[j]))
                    .collect();
                group.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
                let mut used = 0.0;
                for (j, ratio) in group {
                    let (p, zij) = (sizes[j], z[i][j]);
                    let vol = p * zij;
                    let mut push = |x: f64, marked: bool| {
                        if x >= MIN_EDGE_X {
                            edges.push(Edge {
                                id: edges.len(),
                                machine: i,
                                job: j,
                                x,
                                marked,
                                class: k,
                                smith_ratio: ratio,
                                size: p,
                            });
                        }
                    };
                    if used + vol <= budget {
                        push(zij, true);
                    } else if used >= budget {
                        push(zij, false);
                    } else {
                        let xm = (budget - used) / p;
                        push(xm, true);
                        push(zij - xm, false);
                    }
                    used += vol;
                }
            }
        }
        Ok(EdgeGraph {
            machines: m,
            jobs: n,
            sizes,
            classes: classes.clone(),
            edges,
        })
    }

    pub fn class_ids(&self) -> Vec<i32> {
        self.classes.members().into_keys().collect()
    }

    pub fn edges_of_class(&self, k: i32) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.class == k)
    }

    /// `vol(delta_i^k)`.
    pub fn group_volume(&self, machine: usize, k: i32) -> f64 {
        self.edges_of_class(k)
            .filter(|e| e.machine == machine)
            .map(Edge::volume)
            .sum()
    }

    /// `vol(delta_i^{k,mk})`.
    pub fn marked_volume(&self, machine: usize, k: i32) -> f64 {
        self.edges_of_class(k)
            .filter(|e| e.machine == machine && e.marked)
            .map(Edge::volume)
            .sum()
    }

    /// Parallel edges merged back into a machine-by-job matrix.
    pub fn merged_x(&self) -> Vec<Vec<f64>> {
        let mut z = vec![vec![0.0; self.jobs]; self.machines];
        for e in &self.edges {
            z[e.machine][e.job] += e.x;
        }
        z
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.edges).expect("serializable")
    }
}
