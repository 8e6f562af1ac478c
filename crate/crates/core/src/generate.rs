//! Reproducible random instances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::{self, Purpose};

/// Values are drawn on a 1/16 grid so they stay short dyadic rationals.
const GRID: f64 = 16.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub machines: usize,
    pub jobs: usize,
    /// Probability that a (machine, job) pair is eligible.
    pub density: f64,
    /// Processing times are log-uniform in this range.
    pub size_range: (f64, f64),
    /// Weights are uniform in this range.
    pub weight_range: (f64, f64),
}

impl GeneratorSpec {
    pub fn new(machines: usize, jobs: usize) -> Self {
        GeneratorSpec {
            machines,
            jobs,
            density: 1.0,
            size_range: (1.0, 64.0),
            weight_range: (1.0, 10.0),
        }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInstance(msg.to_string()));
        if self.machines == 0 || self.jobs == 0 {
            return bad("generator needs at least one machine and one job");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad("density must be in (0, 1]");
        }
        let (lo, hi) = self.size_range;
        if !(lo >= 1.0 / GRID && lo <= hi) {
            return bad("size range must be positive and ordered");
        }
        let (lo, hi) = self.weight_range;
        if !(lo >= 1.0 / GRID && lo <= hi) {
            return bad("weight range must be positive and ordered");
        }
        Ok(())
    }
}

fn snap(x: f64, lo: f64) -> f64 {
    ((x * GRID).round() / GRID).max(lo)
}

/// Standard instance (one weight per job) from `(spec, seed)`.
pub fn gen_instance(spec: &GeneratorSpec, seed: u64) -> Result<Instance> {
    spec.validate()?;
    let mut rng = rng::stream(seed, Purpose::Generate, 0, 0);
    let (slo, shi) = spec.size_range;
    let (wlo, whi) = spec.weight_range;
    let mut p = vec![vec![None; spec.jobs]; spec.machines];
    for j in 0..spec.jobs {
        for row in p.iter_mut() {
            if rng.gen::<f64>() < spec.density {
                let u: f64 = rng.gen();
                row[j] = Some(snap(slo * (shi / slo).powf(u), slo));
            }
        }
        if p.iter().all(|row| row[j].is_none()) {
            let i = rng.gen_range(0..spec.machines);
            let u: f64 = rng.gen();
            p[i][j] = Some(snap(slo * (shi / slo).powf(u), slo));
        }
    }
    let w = (0..spec.jobs)
        .map(|_| snap(rng.gen_range(wlo..=whi), wlo))
        .collect();
    Instance::standard(p, w)
}
