//! Checker for the per-interval approximation factors `alpha_L` with rho = 2.
//!
//! `L` ranges over `[2, 4)`, split into ten log-uniform intervals. For each
//! interval a row gives `alpha` and two sets of Lagrange multipliers; the row
//! is valid when `alpha >= 3/2 - 2/L^2` at the right endpoint and every
//! size-configuration case of both Lagrangian bounds has a non-positive
//! maximum at both endpoints. The objectives are convex in `L`, so the two
//! endpoints suffice, and concave in the one flexible element of a case, so
//! its maximum is at a range endpoint or at the vertex.

mod cases;
mod search;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use cases::{case_tables, ElemType, Flexible, Program, SizeConfigCase};
pub use search::{search_params, ParamRange, SearchGrid};

pub const INTERVALS: u32 = 10;
/// A case passes when its maximum is at most this.
pub const MARGIN: f64 = 1e-9;
pub const TABLE1_JSON: &str = include_str!("../../assets/table1.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub o: u32,
    pub alpha: f64,
    pub mu13: f64,
    pub l1_13: f64,
    pub l2_13: f64,
    pub mu14: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Left and right end of interval `o`: `2^(1+(o-1)/10)` and `2^(1+o/10)`.
pub fn interval_endpoints(o: u32) -> (f64, f64) {
    let at = |k: u32| 2f64.powf(1.0 + k as f64 / INTERVALS as f64);
    (at(o - 1), at(o))
}

/// Smallest alpha the first sub-program allows on interval `o`.
pub fn sub1_threshold(o: u32) -> f64 {
    let (_, r) = interval_endpoints(o);
    1.5 - 2.0 / (r * r)
}

impl CertificateRow {
    pub fn params(&self, program: Program) -> Multipliers {
        match program {
            Program::Thirteen => Multipliers {
                mu: self.mu13,
                l0: 0.0,
                l1: self.l1_13,
                l2: self.l2_13,
            },
            Program::Fourteen => Multipliers {
                mu: self.mu14,
                l0: self.l0,
                l1: self.l1,
                l2: self.l2,
            },
        }
    }

    pub fn sub1_threshold(&self) -> f64 {
        sub1_threshold(self.o)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=INTERVALS).contains(&self.o) {
            return Err(format!("interval index {} out of 1..=10", self.o));
        }
        let mults = [self.mu13, self.l1_13, self.l2_13, self.mu14, self.l0, self.l1, self.l2];
        if mults.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(format!("row {}: multipliers must be finite and non-negative", self.o));
        }
        if !(self.alpha > 1.0 && self.alpha <= 1.5) {
            return Err(format!("row {}: alpha {} outside (1, 1.5]", self.o, self.alpha));
        }
        Ok(())
    }
}

/// Multipliers of one bound; `l0` is unused by the three-multiplier bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Multipliers {
    pub mu: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Multipliers {
    fn of_type(&self, t: ElemType) -> f64 {
        match t {
            ElemType::Zero => self.l0,
            ElemType::One => self.l1,
            ElemType::Two => self.l2,
            ElemType::Small | ElemType::Big => 0.0,
        }
    }
}

/// `(sum a^2, sum a, v0, v1, v2)`; the v-terms go by type, not by value.
fn summarize(g: &[(f64, ElemType)]) -> (f64, f64, [f64; 3]) {
    let mut sq = 0.0;
    let mut sum = 0.0;
    let mut v = [0.0; 3];
    for &(a, t) in g {
        sq += a * a;
        sum += a;
        match t {
            ElemType::Zero => v[0] += a,
            ElemType::One => v[1] += a,
            ElemType::Two => v[2] += a,
            _ => {}
        }
    }
    (sq, sum, v)
}

pub fn objective13(g: &[(f64, ElemType)], alpha: f64, l: f64, mu: f64, l1: f64, l2: f64) -> f64 {
    let (sq, s, v) = summarize(g);
    (1.0 - alpha / 2.0) * sq - alpha / 2.0 * s * s + mu * s - l1 * v[1] - l2 * v[2] + 0.5 * l * l
        - mu * l
        - 0.5
        + 0.5 * (l1 * l1 + l2 * l2)
}

pub fn objective14(g: &[(f64, ElemType)], alpha: f64, l: f64, mu: f64, l0: f64, l1: f64, l2: f64) -> f64 {
    let (sq, s, v) = summarize(g);
    (1.0 - alpha / 2.0) * sq - alpha / 2.0 * s * s + mu * s - l0 * v[0] - l1 * v[1] - l2 * v[2]
        + 0.5 * l * l
        - mu * l
        + 0.5 * (l0 * l0 + l1 * l1 + l2 * l2)
}

pub fn objective(program: Program, g: &[(f64, ElemType)], alpha: f64, l: f64, p: &Multipliers) -> f64 {
    match program {
        Program::Thirteen => objective13(g, alpha, l, p.mu, p.l1, p.l2),
        Program::Fourteen => objective14(g, alpha, l, p.mu, p.l0, p.l1, p.l2),
    }
}

/// Coefficients `(c2, c1)` of the objective as a polynomial in the
/// flexible element.
pub fn flexible_coefficients(case: &SizeConfigCase, alpha: f64, p: &Multipliers) -> Option<(f64, f64)> {
    let f = case.flexible?;
    let fixed_sum: f64 = case.fixed.iter().map(|(a, _)| a).sum();
    Some((1.0 - alpha, -alpha * fixed_sum + p.mu - p.of_type(f.kind)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CaseMax {
    /// Maximizing flexible value, if the case has one.
    pub a: Option<f64>,
    pub value: f64,
}

/// Maximum over the flexible element for any `alpha`; `+inf` when the
/// objective grows without bound on an unbounded range.
fn case_max_unchecked(case: &SizeConfigCase, alpha: f64, l: f64, p: &Multipliers) -> CaseMax {
    let mut g = case.fixed.clone();
    let Some(f) = case.flexible else {
        return CaseMax {
            a: None,
            value: objective(case.program, &g, alpha, l, p),
        };
    };
    let (c2, c1) = flexible_coefficients(case, alpha, p).expect("flexible");
    if f.hi.is_infinite() && (c2 > 0.0 || (c2 == 0.0 && c1 > 0.0)) {
        return CaseMax {
            a: Some(f64::INFINITY),
            value: f64::INFINITY,
        };
    }
    let mut candidates = vec![f.lo];
    if f.hi.is_finite() {
        candidates.push(f.hi);
    }
    if c2 < 0.0 {
        let vertex = -c1 / (2.0 * c2);
        if f.lo < vertex && vertex < f.hi {
            candidates.push(vertex);
        }
    }
    g.push((0.0, f.kind));
    let mut best = CaseMax {
        a: None,
        value: f64::NEG_INFINITY,
    };
    for a in candidates {
        g.last_mut().unwrap().0 = a;
        let value = objective(case.program, &g, alpha, l, p);
        if value > best.value {
            best = CaseMax { a: Some(a), value };
        }
    }
    best
}

pub fn max_over_case(case: &SizeConfigCase, alpha: f64, l: f64, p: &Multipliers) -> Result<CaseMax> {
    if !(alpha > 1.0) {
        return Err(Error::Certificate(format!(
            "alpha = {alpha}: the flexible element is not strictly concave"
        )));
    }
    Ok(case_max_unchecked(case, alpha, l, p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub o: u32,
    /// `None` for the sub-program threshold check.
    pub l: Option<f64>,
    pub program: Option<Program>,
    pub case_id: Option<usize>,
    pub case: String,
    pub a: Option<f64>,
    pub value: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.l, self.program, self.case_id) {
            (Some(l), Some(p), Some(id)) => write!(
                f,
                "interval {} L={:.6} {:?} case {} {}: max {:.3e} at a={}",
                self.o,
                l,
                p,
                id,
                self.case,
                self.value,
                self.a.map_or("-".into(), |a| format!("{a:.6}"))
            ),
            _ => write!(f, "interval {}: {} ({})", self.o, self.case, self.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalReport {
    pub o: u32,
    pub alpha: f64,
    pub l_left: f64,
    pub l_right: f64,
    pub sub1_threshold: f64,
    /// Largest case maximum of each bound over both endpoints.
    pub worst13: f64,
    pub worst14: f64,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

/// Worst case maximum of one program at the given `alpha` and both ends.
fn worst_of(program: Program, cases: &[SizeConfigCase], o: u32, alpha: f64, p: &Multipliers) -> (f64, Vec<Violation>) {
    let (l_left, l_right) = interval_endpoints(o);
    let mut worst = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for l in [l_left, l_right] {
        for case in cases {
            let m = case_max_unchecked(case, alpha, l, p);
            worst = worst.max(m.value);
            if !(m.value <= MARGIN) {
                bad.push(Violation {
                    o,
                    l: Some(l),
                    program: Some(program),
                    case_id: Some(case.id),
                    case: case.label(),
                    a: m.a,
                    value: m.value,
                });
            }
        }
    }
    (worst, bad)
}

pub fn check_interval(row: &CertificateRow) -> IntervalReport {
    let (c13, c14) = case_tables();
    check_interval_with(row, &c13, &c14)
}

fn check_interval_with(row: &CertificateRow, c13: &[SizeConfigCase], c14: &[SizeConfigCase]) -> IntervalReport {
    let o = row.o.clamp(1, INTERVALS);
    let (l_left, l_right) = interval_endpoints(o);
    let threshold = sub1_threshold(o);
    let mut violations = Vec::new();
    if let Err(msg) = row.validate() {
        violations.push(Violation {
            o: row.o,
            l: None,
            program: None,
            case_id: None,
            case: msg,
            a: None,
            value: row.alpha,
        });
    }
    if row.alpha < threshold {
        violations.push(Violation {
            o: row.o,
            l: None,
            program: None,
            case_id: None,
            case: format!("alpha below first sub-program threshold {threshold:.7}"),
            a: None,
            value: row.alpha,
        });
    }
    let (worst13, bad) = worst_of(Program::Thirteen, c13, o, row.alpha, &row.params(Program::Thirteen));
    violations.extend(bad);
    let (worst14, bad) = worst_of(Program::Fourteen, c14, o, row.alpha, &row.params(Program::Fourteen));
    violations.extend(bad);
    IntervalReport {
        o: row.o,
        alpha: row.alpha,
        l_left,
        l_right,
        sub1_threshold: threshold,
        worst13,
        worst14,
        passed: violations.is_empty(),
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableReport {
    pub intervals: Vec<IntervalReport>,
    pub mean_alpha: f64,
    pub margin: f64,
    /// Worst case maximum over every interval, endpoint and case.
    pub worst_case_value: f64,
    pub passed: bool,
}

impl TableReport {
    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.intervals.iter().flat_map(|r| &r.violations)
    }
}

pub fn check_table(rows: &[CertificateRow]) -> Result<TableReport> {
    if rows.len() != INTERVALS as usize {
        return Err(Error::Certificate(format!("expected 10 rows, got {}", rows.len())));
    }
    let mut seen: Vec<u32> = rows.iter().map(|r| r.o).collect();
    seen.sort_unstable();
    if seen != (1..=INTERVALS).collect::<Vec<_>>() {
        return Err(Error::Certificate("rows must cover intervals 1..=10 once each".into()));
    }
    let (c13, c14) = case_tables();
    let intervals: Vec<IntervalReport> = rows
        .par_iter()
        .map(|row| check_interval_with(row, &c13, &c14))
        .collect();
    let mean_alpha = rows.iter().map(|r| r.alpha).sum::<f64>() / INTERVALS as f64;
    let worst_case_value = intervals
        .iter()
        .map(|r| r.worst13.max(r.worst14))
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = intervals.iter().all(|r| r.passed) && mean_alpha < 1.36;
    Ok(TableReport {
        intervals,
        mean_alpha,
        margin: MARGIN,
        worst_case_value,
        passed,
    })
}

pub fn parse_certificate(text: &str) -> Result<Vec<CertificateRow>> {
    Ok(serde_json::from_str(text)?)
}

/// The bundled parameter table.
pub fn table1() -> Vec<CertificateRow> {
    parse_certificate(TABLE1_JSON).expect("bundled table parses")
}

/// Git-style object hash (`blob <len>\0` header, SHA-256) of a certificate file.
pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
