//! Configuration LP: one variable per (machine, job subset), solved exactly by
//! enumerating every subset of the eligible jobs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::simplex::{LinearProgram, SimplexOptions};

pub const DEFAULT_JOB_CAP: usize = 14;

/// A job set on one machine together with its Smith-rule cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    /// Sorted job indices.
    pub jobs: Vec<usize>,
    pub cost: f64,
}

/// Every subset of the jobs eligible on `machine`, empty set included.
pub fn enumerate_configs(inst: &Instance, machine: usize, cap: usize) -> Result<Vec<Configuration>> {
    if inst.job_count() > cap {
        return Err(Error::TooManyJobs {
            jobs: inst.job_count(),
            cap,
        });
    }
    let eligible = inst.eligible_jobs(machine);
    // Walking each subset in Smith order gives its schedule directly.
    let order = inst.smith_order(machine, &eligible)?;
    let cells: Vec<_> = order
        .iter()
        .map(|&j| inst.cell(machine, j).expect("eligible"))
        .collect();
    let count = 1usize << order.len();
    let configs = (0..count)
        .map(|mask| {
            let mut jobs = Vec::with_capacity(mask.count_ones() as usize);
            let mut clock = 0.0;
            let mut cost = 0.0;
            for (pos, (&j, c)) in order.iter().zip(&cells).enumerate() {
                if mask >> pos & 1 == 1 {
                    jobs.push(j);
                    clock += c.p;
                    cost += c.w * clock;
                }
            }
            jobs.sort_unstable();
            Configuration { jobs, cost }
        })
        .collect();
    Ok(configs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigMass {
    pub machine: usize,
    pub jobs: Vec<usize>,
    pub mass: f64,
    #[serde(skip)]
    pub cost: f64,
}

/// Configuration masses with the derived fractional assignment.
#[derive(Clone, Debug)]
pub struct ConfigLpSolution {
    /// Non-zero masses only.
    pub masses: Vec<ConfigMass>,
    /// `z[i][j]`: total mass of configurations on `i` containing `j`.
    pub z: Vec<Vec<f64>>,
    pub objective: f64,
    /// Lagrangian lower bound on the LP optimum from the final duals.
    pub dual_bound: f64,
    pub iterations: usize,
}

impl ConfigLpSolution {
    /// Wrap an arbitrary set of masses (e.g. an integral assignment or a
    /// hand-built fractional point). No optimality claim is attached.
    pub fn from_masses(inst: &Instance, masses: Vec<(usize, Vec<usize>, f64)>) -> Result<Self> {
        let masses = masses
            .into_iter()
            .map(|(machine, mut jobs, mass)| {
                jobs.sort_unstable();
                let cost = inst.smith_cost_f64(machine, &jobs)?;
                Ok(ConfigMass {
                    machine,
                    jobs,
                    mass,
                    cost,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let z = derive_z(inst, &masses);
        let objective = masses.iter().map(|m| m.mass * m.cost).sum();
        Ok(ConfigLpSolution {
            masses,
            z,
            objective,
            dual_bound: f64::NEG_INFINITY,
            iterations: 0,
        })
    }

    /// Integral solution placing each job on `machine_of[j]`.
    pub fn from_assignment(inst: &Instance, machine_of: &[usize]) -> Result<Self> {
        let masses = (0..inst.machine_count())
            .map(|i| {
                let jobs = (0..inst.job_count()).filter(|&j| machine_of[j] == i).collect();
                (i, jobs, 1.0)
            })
            .collect();
        Self::from_masses(inst, masses)
    }

    pub fn duality_gap(&self) -> f64 {
        self.objective - self.dual_bound
    }

    /// Per-machine summand of the LP objective.
    pub fn lp_cost_on_machine(&self, machine: usize) -> f64 {
        self.masses
            .iter()
            .filter(|m| m.machine == machine)
            .map(|m| m.mass * m.cost)
            .sum()
    }

    /// Check one-configuration-per-machine, one-cover-per-job and the
    /// consistency of `z` and the objective.
    pub fn check_constraints(&self, inst: &Instance, tol: f64) -> Result<()> {
        let m = inst.machine_count();
        let n = inst.job_count();
        let mut per_machine = vec![0.0; m];
        let mut per_job = vec![0.0; n];
        for c in &self.masses {
            if c.mass < -tol {
                return Err(Error::InvalidFractional(format!("negative mass {}", c.mass)));
            }
            per_machine[c.machine] += c.mass;
            for &j in &c.jobs {
                per_job[j] += c.mass;
            }
        }
        for (i, s) in per_machine.iter().enumerate() {
            if (s - 1.0).abs() > tol {
                return Err(Error::InvalidFractional(format!("machine {i} has total mass {s}")));
            }
        }
        for (j, s) in per_job.iter().enumerate() {
            if (s - 1.0).abs() > tol {
                return Err(Error::InvalidFractional(format!("job {j} is covered {s} times")));
            }
        }
        let z = derive_z(inst, &self.masses);
        for i in 0..m {
            for j in 0..n {
                if (z[i][j] - self.z[i][j]).abs() > 1e-12 {
                    return Err(Error::InvalidFractional(format!("z[{i}][{j}] is stale")));
                }
            }
        }
        let obj: f64 = self.masses.iter().map(|c| c.mass * c.cost).sum();
        if (obj - self.objective).abs() > tol * (1.0 + obj.abs()) {
            return Err(Error::InvalidFractional("objective is stale".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            configurations: &'a [ConfigMass],
            z: &'a [Vec<f64>],
            objective: f64,
        }
        serde_json::to_string_pretty(&Dump {
            configurations: &self.masses,
            z: &self.z,
            objective: self.objective,
        })
        .expect("serializable")
    }
}

fn derive_z(inst: &Instance, masses: &[ConfigMass]) -> Vec<Vec<f64>> {
    let mut z = vec![vec![0.0; inst.job_count()]; inst.machine_count()];
    for c in masses {
        for &j in &c.jobs {
            z[c.machine][j] += c.mass;
        }
    }
    z
}

pub fn solve_config_lp(inst: &Instance) -> Result<ConfigLpSolution> {
    solve_config_lp_with(inst, DEFAULT_JOB_CAP, &SimplexOptions::default())
}

pub fn solve_config_lp_with(inst: &Instance, cap: usize, opts: &SimplexOptions) -> Result<ConfigLpSolution> {
    let m = inst.machine_count();
    let n = inst.job_count();
    let per_machine: Vec<Vec<Configuration>> = (0..m)
        .into_par_iter()
        .map(|i| enumerate_configs(inst, i, cap))
        .collect::<Result<_>>()?;

    // rows: one per machine, then one per job
    let mut lp = LinearProgram {
        rhs: vec![1.0; m + n],
        ..Default::default()
    };
    let mut owner = Vec::new();
    for (i, configs) in per_machine.iter().enumerate() {
        for (c, cfg) in configs.iter().enumerate() {
            let mut entries = Vec::with_capacity(cfg.jobs.len() + 1);
            entries.push((i, 1.0));
            entries.extend(cfg.jobs.iter().map(|&j| (m + j, 1.0)));
            lp.add_column(cfg.cost, entries);
            owner.push((i, c));
        }
    }
    let sol = lp.solve(opts)?;

    // Any feasible y has unit mass per machine, so
    // c.y >= pi.b + sum_i min(0, min_f reduced_cost(i, f)).
    let mut min_reduced = vec![0.0f64; m];
    for (col, &(i, _)) in owner.iter().enumerate() {
        min_reduced[i] = min_reduced[i].min(lp.reduced_cost(col, &sol.duals));
    }
    let dual_bound = sol.duals.iter().sum::<f64>() + min_reduced.iter().sum::<f64>();

    let masses: Vec<ConfigMass> = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(col, &mass)| {
            let (i, c) = owner[col];
            let cfg = &per_machine[i][c];
            ConfigMass {
                machine: i,
                jobs: cfg.jobs.clone(),
                mass,
                cost: cfg.cost,
            }
        })
        .collect();
    let z = derive_z(inst, &masses);
    Ok(ConfigLpSolution {
        objective: sol.objective,
        masses,
        z,
        dual_bound,
        iterations: sol.iterations,
    })
}
