//! Scheduling instances, Smith-rule costs and the size/weight swap.
//!
//! All numeric inputs are stored as `f64`. Every finite `f64` is a dyadic
//! rational, so the `*_exact` functions lift values into [`BigRational`]
//! without loss and evaluate costs with exact arithmetic.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Processing time and weight of one eligible (machine, job) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub p: f64,
    pub w: f64,
}

/// An unrelated-machine instance. Pairs with infinite processing time are
/// stored as `None` and may never be used by an assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    machines: usize,
    jobs: usize,
    cells: Vec<Option<Cell>>,
}

/// Lossless conversion of a finite float into a rational.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

impl Instance {
    /// Build an instance from a row per machine of processing times and a
    /// weight matrix of the same shape. Weight entries at ineligible pairs are
    /// ignored.
    pub fn new(p: Vec<Vec<Option<f64>>>, w: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let machines = p.len();
        if machines == 0 {
            return Err(Error::InvalidInstance("no machines".into()));
        }
        let jobs = p[0].len();
        if jobs == 0 {
            return Err(Error::InvalidInstance("no jobs".into()));
        }
        if w.len() != machines {
            return Err(Error::InvalidInstance(format!(
                "weight matrix has {} rows, expected {machines}",
                w.len()
            )));
        }
        let mut cells = Vec::with_capacity(machines * jobs);
        for (i, (prow, wrow)) in p.iter().zip(&w).enumerate() {
            if prow.len() != jobs || wrow.len() != jobs {
                return Err(Error::InvalidInstance(format!(
                    "row {i} does not have {jobs} entries"
                )));
            }
            for (j, (pv, wv)) in prow.iter().zip(wrow).enumerate() {
                let cell = match pv {
                    None => None,
                    Some(pv) => {
                        let wv = wv.ok_or_else(|| {
                            Error::InvalidInstance(format!("missing weight for ({i}, {j})"))
                        })?;
                        if !(pv.is_finite() && *pv > 0.0) {
                            return Err(Error::InvalidInstance(format!(
                                "processing time at ({i}, {j}) must be positive, got {pv}"
                            )));
                        }
                        if !(wv.is_finite() && wv > 0.0) {
                            return Err(Error::InvalidInstance(format!(
                                "weight at ({i}, {j}) must be positive, got {wv}"
                            )));
                        }
                        Some(Cell { p: *pv, w: wv })
                    }
                };
                cells.push(cell);
            }
        }
        let inst = Instance {
            machines,
            jobs,
            cells,
        };
        for j in 0..jobs {
            if !(0..machines).any(|i| inst.eligible(i, j)) {
                return Err(Error::InvalidInstance(format!(
                    "job {j} has no machine with finite processing time"
                )));
            }
        }
        Ok(inst)
    }

    /// Standard input form: machine-dependent processing times and one weight
    /// per job.
    pub fn standard(p: Vec<Vec<Option<f64>>>, w: Vec<f64>) -> Result<Self> {
        let rows = p.len();
        let wm = vec![w.iter().copied().map(Some).collect::<Vec<_>>(); rows];
        if rows > 0 && w.len() != p[0].len() {
            return Err(Error::InvalidInstance(format!(
                "{} weights for {} jobs",
                w.len(),
                p[0].len()
            )));
        }
        Self::new(p, wm)
    }

    pub fn machine_count(&self) -> usize {
        self.machines
    }

    pub fn job_count(&self) -> usize {
        self.jobs
    }

    pub fn cell(&self, machine: usize, job: usize) -> Option<Cell> {
        self.cells[machine * self.jobs + job]
    }

    pub fn eligible(&self, machine: usize, job: usize) -> bool {
        self.cell(machine, job).is_some()
    }

    pub fn proc_time(&self, machine: usize, job: usize) -> Option<f64> {
        self.cell(machine, job).map(|c| c.p)
    }

    pub fn weight(&self, machine: usize, job: usize) -> Option<f64> {
        self.cell(machine, job).map(|c| c.w)
    }

    pub fn eligible_jobs(&self, machine: usize) -> Vec<usize> {
        (0..self.jobs).filter(|&j| self.eligible(machine, j)).collect()
    }

    fn uniform_per_job(&self, field: impl Fn(&Cell) -> f64) -> Option<Vec<f64>> {
        (0..self.jobs)
            .map(|j| {
                let mut vals = (0..self.machines).filter_map(|i| self.cell(i, j).map(|c| field(&c)));
                let first = vals.next()?;
                vals.all(|v| v == first).then_some(first)
            })
            .collect()
    }

    /// Per-job sizes when processing times do not depend on the machine.
    pub fn uniform_sizes(&self) -> Option<Vec<f64>> {
        self.uniform_per_job(|c| c.p)
    }

    /// Per-job weights when weights do not depend on the machine.
    pub fn uniform_weights(&self) -> Option<Vec<f64>> {
        self.uniform_per_job(|c| c.w)
    }

    pub fn sizes_machine_independent(&self) -> bool {
        self.uniform_sizes().is_some()
    }

    /// Exchange processing times and weights on every eligible pair.
    pub fn swap(&self) -> Instance {
        Instance {
            machines: self.machines,
            jobs: self.jobs,
            cells: self
                .cells
                .iter()
                .map(|c| c.map(|c| Cell { p: c.w, w: c.p }))
                .collect(),
        }
    }

    fn checked_cells(&self, machine: usize, jobs: &[usize]) -> Result<Vec<(usize, Cell)>> {
        jobs.iter()
            .map(|&j| {
                self.cell(machine, j)
                    .map(|c| (j, c))
                    .ok_or(Error::Ineligible { machine, job: j })
            })
            .collect()
    }

    /// Jobs of `jobs` in Smith order on `machine`: descending `w/p`, ties by
    /// ascending job index.
    pub fn smith_order(&self, machine: usize, jobs: &[usize]) -> Result<Vec<usize>> {
        let mut cells = self.checked_cells(machine, jobs)?;
        cells.sort_by(|(ja, a), (jb, b)| smith_cmp(a, b).then(ja.cmp(jb)));
        Ok(cells.into_iter().map(|(j, _)| j).collect())
    }

    /// Exact Smith-rule cost of `jobs` on `machine`, from the order-free
    /// formula `sum p_j w_j + sum_{pairs} min(p_j w_j', p_j' w_j)`.
    pub fn smith_cost(&self, machine: usize, jobs: &[usize]) -> Result<BigRational> {
        let cells = self.checked_cells(machine, jobs)?;
        let exact_cells: Vec<(BigRational, BigRational)> =
            cells.iter().map(|(_, c)| (exact(c.p), exact(c.w))).collect();
        let mut total = BigRational::zero();
        for (a, (pa, wa)) in exact_cells.iter().enumerate() {
            total += pa * wa;
            for (pb, wb) in &exact_cells[a + 1..] {
                let x = pa * wb;
                let y = pb * wa;
                total += if x < y { x } else { y };
            }
        }
        Ok(total)
    }

    /// Floating-point Smith-rule cost: schedule in Smith order and
    /// accumulate weighted completion times.
    pub fn smith_cost_f64(&self, machine: usize, jobs: &[usize]) -> Result<f64> {
        let order = self.smith_order(machine, jobs)?;
        let mut clock = 0.0;
        let mut cost = 0.0;
        for j in order {
            let c = self.cell(machine, j).expect("checked");
            clock += c.p;
            cost += c.w * clock;
        }
        Ok(cost)
    }

    fn jobs_per_machine(&self, machine_of: &[usize]) -> Result<Vec<Vec<usize>>> {
        if machine_of.len() != self.jobs {
            return Err(Error::Unassigned {
                job: machine_of.len().min(self.jobs),
            });
        }
        let mut per = vec![Vec::new(); self.machines];
        for (j, &i) in machine_of.iter().enumerate() {
            if i >= self.machines {
                return Err(Error::Unassigned { job: j });
            }
            per[i].push(j);
        }
        Ok(per)
    }

    /// Exact total weighted completion time of an assignment.
    pub fn total_cost_exact(&self, machine_of: &[usize]) -> Result<BigRational> {
        let per = self.jobs_per_machine(machine_of)?;
        let mut total = BigRational::zero();
        for (i, jobs) in per.iter().enumerate() {
            total += self.smith_cost(i, jobs)?;
        }
        Ok(total)
    }

    pub fn total_cost(&self, machine_of: &[usize]) -> Result<f64> {
        Ok(self.machine_costs(machine_of)?.iter().sum())
    }

    /// Weighted completion time on each machine.
    pub fn machine_costs(&self, machine_of: &[usize]) -> Result<Vec<f64>> {
        let per = self.jobs_per_machine(machine_of)?;
        per.iter()
            .enumerate()
            .map(|(i, jobs)| self.smith_cost_f64(i, jobs))
            .collect()
    }

    /// Cheapest assignment over all `m^n` choices. Only meant for tiny
    /// instances.
    pub fn brute_force_optimum(&self) -> (Vec<usize>, BigRational) {
        let mut best: Option<(Vec<usize>, BigRational)> = None;
        let mut phi = vec![0usize; self.jobs];
        loop {
            if phi.iter().enumerate().all(|(j, &i)| self.eligible(i, j)) {
                let cost = self.total_cost_exact(&phi).expect("eligible");
                if best.as_ref().map_or(true, |(_, b)| cost < *b) {
                    best = Some((phi.clone(), cost));
                }
            }
            if !advance_odometer(&mut phi, self.machines) {
                break;
            }
        }
        best.expect("every job has an eligible machine")
    }
}

/// Step `digits` to the next base-`base` number. Returns false on wrap-around.
pub fn advance_odometer(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Smith-ratio comparison putting larger `w/p` first.
fn smith_cmp(a: &Cell, b: &Cell) -> Ordering {
    (b.w * a.p).partial_cmp(&(a.w * b.p)).unwrap_or(Ordering::Equal)
}

/// Integral job-to-machine map with its Smith-rule cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub machine_of: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn new(inst: &Instance, machine_of: Vec<usize>) -> Result<Self> {
        for (j, &i) in machine_of.iter().enumerate() {
            if i >= inst.machine_count() {
                return Err(Error::Unassigned { job: j });
            }
            if !inst.eligible(i, j) {
                return Err(Error::Ineligible { machine: i, job: j });
            }
        }
        let total_cost = inst.total_cost(&machine_of)?;
        Ok(Assignment {
            machine_of,
            total_cost,
        })
    }

    pub fn exact_cost(&self, inst: &Instance) -> Result<BigRational> {
        inst.total_cost_exact(&self.machine_of)
    }
}

/// Rational to float for reporting.
pub fn to_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or_else(|| {
        let n: &BigInt = x.numer();
        let d: &BigInt = x.denom();
        n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
    })
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightsJson {
    PerJob(Vec<f64>),
    PerCell(Vec<Vec<Option<f64>>>),
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    machines: usize,
    jobs: usize,
    p: Vec<Vec<Option<f64>>>,
    w: WeightsJson,
    weights_machine_dependent: bool,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(text)?;
        if raw.p.len() != raw.machines {
            return Err(Error::InvalidInstance(format!(
                "\"machines\" is {} but \"p\" has {} rows",
                raw.machines,
                raw.p.len()
            )));
        }
        if raw.p.iter().any(|r| r.len() != raw.jobs) {
            return Err(Error::InvalidInstance(format!(
                "every row of \"p\" must have {} entries",
                raw.jobs
            )));
        }
        match (raw.w, raw.weights_machine_dependent) {
            (WeightsJson::PerJob(w), false) => Self::standard(raw.p, w),
            (WeightsJson::PerCell(w), true) => Self::new(raw.p, w),
            (_, flag) => Err(Error::InvalidInstance(format!(
                "\"w\" shape does not match weights_machine_dependent = {flag}"
            ))),
        }
    }

    pub fn to_json(&self) -> String {
        let p = (0..self.machines)
            .map(|i| (0..self.jobs).map(|j| self.proc_time(i, j)).collect())
            .collect();
        let (w, dependent) = match self.uniform_weights() {
            Some(w) => (WeightsJson::PerJob(w), false),
            None => (
                WeightsJson::PerCell(
                    (0..self.machines)
                        .map(|i| (0..self.jobs).map(|j| self.weight(i, j)).collect())
                        .collect(),
                ),
                true,
            ),
        };
        serde_json::to_string_pretty(&InstanceJson {
            machines: self.machines,
            jobs: self.jobs,
            p,
            w,
            weights_machine_dependent: dependent,
        })
        .expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn rat(x: i64) -> BigRational {
        BigRational::from_i64(x).unwrap()
    }

    #[test]
    fn single_job_swap() {
        let inst = Instance::standard(vec![vec![Some(2.0)]], vec![3.0]).unwrap();
        let sw = inst.swap();
        assert_eq!(sw.proc_time(0, 0), Some(3.0));
        assert_eq!(sw.weight(0, 0), Some(2.0));
        assert_eq!(inst.total_cost_exact(&[0]).unwrap(), rat(6));
        assert_eq!(sw.total_cost_exact(&[0]).unwrap(), rat(6));
    }

    #[test]
    fn two_jobs_one_machine() {
        let inst = Instance::standard(vec![vec![Some(1.0), Some(2.0)]], vec![2.0, 1.0]).unwrap();
        assert_eq!(inst.smith_order(0, &[0, 1]).unwrap(), vec![0, 1]);
        assert_eq!(inst.smith_cost(0, &[0, 1]).unwrap(), rat(5));
        // reverse order costs 2*1 + 3*2 = 8
        assert_eq!(inst.swap().smith_cost(0, &[0, 1]).unwrap(), rat(5));
        assert_eq!(inst.smith_cost_f64(0, &[1, 0]).unwrap(), 5.0);
    }

    #[test]
    fn trivial_costs() {
        let inst = Instance::standard(vec![vec![Some(4.0)]], vec![3.0]).unwrap();
        assert_eq!(inst.smith_cost(0, &[]).unwrap(), rat(0));
        assert_eq!(inst.smith_cost(0, &[0]).unwrap(), rat(12));
    }

    #[test]
    fn unit_jobs_split_or_together() {
        let inst = Instance::standard(
            vec![vec![Some(1.0), Some(1.0)], vec![Some(1.0), Some(1.0)]],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert_eq!(inst.total_cost_exact(&[0, 1]).unwrap(), rat(2));
        assert_eq!(inst.total_cost_exact(&[1, 1]).unwrap(), rat(3));
        assert_eq!(
            inst.total_cost_exact(&[0, 0]).unwrap(),
            inst.smith_cost(0, &[0, 1]).unwrap()
        );
    }

    #[test]
    fn standard_swap_gives_uniform_sizes() {
        let inst = Instance::standard(
            vec![vec![Some(1.0), Some(5.0)], vec![Some(3.0), None]],
            vec![2.0, 7.0],
        )
        .unwrap();
        assert!(!inst.sizes_machine_independent());
        let sw = inst.swap();
        assert_eq!(sw.uniform_sizes(), Some(vec![2.0, 7.0]));
        assert!(!sw.eligible(1, 1));
        assert_eq!(sw.swap(), inst);
    }

    #[test]
    fn ineligible_job_is_reported() {
        let inst = Instance::standard(vec![vec![Some(1.0), None], vec![Some(1.0), Some(1.0)]], vec![1.0, 1.0])
            .unwrap();
        match inst.smith_cost(0, &[0, 1]) {
            Err(Error::Ineligible { machine: 0, job: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(Assignment::new(&inst, vec![0, 0]).is_err());
        assert!(inst.total_cost(&[0]).is_err());
    }

    #[test]
    fn rejects_invalid_instances() {
        assert!(Instance::standard(vec![vec![None]], vec![1.0]).is_err());
        assert!(Instance::standard(vec![vec![Some(0.0)]], vec![1.0]).is_err());
        assert!(Instance::standard(vec![vec![Some(1.0)]], vec![-1.0]).is_err());
        assert!(Instance::standard(vec![vec![Some(f64::INFINITY)]], vec![1.0]).is_err());
    }

    #[test]
    fn json_roundtrip_and_nulls() {
        let text = r#"{"machines": 2, "jobs": 2, "p": [[1.5, null], [2, 3]], "w": [4, 1], "weights_machine_dependent": false}"#;
        let inst = Instance::from_json(text).unwrap();
        assert!(!inst.eligible(0, 1));
        assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
        let sw = inst.swap();
        assert_eq!(Instance::from_json(&sw.to_json()).unwrap(), sw);
        let bad = r#"{"machines": 1, "jobs": 1, "p": [[1]], "w": [[1]], "weights_machine_dependent": false}"#;
        assert!(Instance::from_json(bad).is_err());
    }

    #[test]
    fn brute_force_finds_split() {
        let inst = Instance::standard(
            vec![vec![Some(1.0), Some(1.0)], vec![Some(1.0), Some(1.0)]],
            vec![1.0, 1.0],
        )
        .unwrap();
        let (_, cost) = inst.brute_force_optimum();
        assert_eq!(cost, rat(2));
    }
}
