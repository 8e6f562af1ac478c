//! Grid search for multipliers with the smallest feasible alpha.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{case_max_unchecked, case_tables, sub1_threshold, CertificateRow, Multipliers, Program, SizeConfigCase, INTERVALS};
use crate::error::{Error, Result};

const BISECTION_STEPS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ParamRange {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        ParamRange { lo, hi, step }
    }

    /// `center +- half * step`, cut at zero.
    pub fn around(center: f64, half: usize, step: f64) -> Self {
        let w = half as f64 * step;
        ParamRange {
            lo: (center - w).max(0.0),
            hi: center + w,
            step,
        }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let ok = self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.lo <= self.hi;
        if !ok || !(self.step > 0.0) {
            return Err(Error::Search(format!(
                "empty parameter range [{}, {}] step {}",
                self.lo, self.hi, self.step
            )));
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| self.lo + k as f64 * self.step).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub mu13: ParamRange,
    pub l1_13: ParamRange,
    pub l2_13: ParamRange,
    pub mu14: ParamRange,
    pub l0: ParamRange,
    pub l1: ParamRange,
    pub l2: ParamRange,
    /// Each round re-centers on the incumbent with steps ten times smaller.
    pub refine_rounds: usize,
    /// Points on each side of the incumbent in a refinement round.
    pub refine_half: usize,
}

impl SearchGrid {
    /// Box of `+- half` steps around a row's multipliers.
    pub fn around(row: &CertificateRow, half: usize, step: f64) -> Self {
        let r = |c| ParamRange::around(c, half, step);
        SearchGrid {
            mu13: r(row.mu13),
            l1_13: r(row.l1_13),
            l2_13: r(row.l2_13),
            mu14: r(row.mu14),
            l0: r(row.l0),
            l1: r(row.l1),
            l2: r(row.l2),
            refine_rounds: 2,
            refine_half: half,
        }
    }

    /// A single point at the row's multipliers, no refinement.
    pub fn point(row: &CertificateRow) -> Self {
        let mut g = Self::around(row, 0, 1.0);
        g.refine_rounds = 0;
        g
    }
}

fn feasible(cases: &[SizeConfigCase], o: u32, alpha: f64, p: &Multipliers) -> bool {
    let (l, r) = super::interval_endpoints(o);
    [l, r]
        .iter()
        .all(|&l| cases.iter().all(|c| case_max_unchecked(c, alpha, l, p).value <= 0.0))
}

/// Smallest alpha in `(1, 1.5]` for which every case is non-positive.
fn min_alpha(cases: &[SizeConfigCase], o: u32, p: &Multipliers) -> Option<f64> {
    if !feasible(cases, o, 1.5, p) {
        return None;
    }
    let (mut lo, mut hi) = (1.0, 1.5);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if feasible(cases, o, mid, p) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Best multipliers over a product grid; ties keep the earliest point.
fn best_on_grid(cases: &[SizeConfigCase], o: u32, axes: &[Vec<f64>; 4]) -> Option<(f64, Multipliers)> {
    let dims: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = dims.iter().product();
    (0..total)
        .into_par_iter()
        .filter_map(|mut idx| {
            let mut v = [0.0; 4];
            for d in (0..4).rev() {
                v[d] = axes[d][idx % dims[d]];
                idx /= dims[d];
            }
            let p = Multipliers {
                mu: v[0],
                l0: v[1],
                l1: v[2],
                l2: v[3],
            };
            min_alpha(cases, o, &p).map(|a| (a, p))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None, |best: Option<(f64, Multipliers)>, cand| match best {
            Some(b) if b.0 <= cand.0 => Some(b),
            _ => Some(cand),
        })
}

fn search_program(
    program: Program,
    cases: &[SizeConfigCase],
    o: u32,
    ranges: [ParamRange; 4],
    rounds: usize,
    half: usize,
) -> Result<(f64, Multipliers)> {
    let axes = |r: &[ParamRange; 4]| -> Result<[Vec<f64>; 4]> {
        Ok([r[0].points()?, r[1].points()?, r[2].points()?, r[3].points()?])
    };
    let mut best = best_on_grid(cases, o, &axes(&ranges)?).ok_or_else(|| {
        Error::Search(format!(
            "no feasible multipliers for interval {o} ({program:?}); widen the grid bounds"
        ))
    })?;
    let mut steps = ranges.map(|r| r.step);
    for _ in 0..rounds {
        steps = steps.map(|s| s / 10.0);
        let p = best.1;
        let centers = [p.mu, p.l0, p.l1, p.l2];
        let mut refined: [ParamRange; 4] =
            std::array::from_fn(|d| ParamRange::around(centers[d], half, steps[d]));
        if program == Program::Thirteen {
            refined[1] = ParamRange::new(0.0, 0.0, 1.0);
        }
        if let Some(cand) = best_on_grid(cases, o, &axes(&refined)?) {
            if cand.0 < best.0 {
                best = cand;
            }
        }
    }
    Ok(best)
}

/// Row for interval `o` with the smallest alpha found on the grid.
pub fn search_params(o: u32, grid: &SearchGrid) -> Result<CertificateRow> {
    if !(1..=INTERVALS).contains(&o) {
        return Err(Error::Search(format!("interval index {o} out of 1..=10")));
    }
    let (c13, c14) = case_tables();
    let zero = ParamRange::new(0.0, 0.0, 1.0);
    let (a13, p13) = search_program(
        Program::Thirteen,
        &c13,
        o,
        [grid.mu13, zero, grid.l1_13, grid.l2_13],
        grid.refine_rounds,
        grid.refine_half,
    )?;
    let (a14, p14) = search_program(
        Program::Fourteen,
        &c14,
        o,
        [grid.mu14, grid.l0, grid.l1, grid.l2],
        grid.refine_rounds,
        grid.refine_half,
    )?;
    Ok(CertificateRow {
        o,
        alpha: a13.max(a14).max(sub1_threshold(o)),
        mu13: p13.mu,
        l1_13: p13.l1,
        l2_13: p13.l2,
        mu14: p14.mu,
        l0: p14.l0,
        l1: p14.l1,
        l2: p14.l2,
    })
}
