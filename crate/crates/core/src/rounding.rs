//! Randomized iterative rounding of one job class at a time.
//!
//! Each iteration finds a cycle of live marked edges or a pseudo-marked-path,
//! builds the balancing direction `a` on it and moves `x` by `+theta a` or
//! `-theta' a` with probabilities that keep every coordinate a martingale.
//! At least one edge drops to zero per iteration. When no structure is left
//! the live `x` is integral and picks exactly one edge per job, and at most
//! one marked edge per (machine, class).

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Assignment, Instance};
use crate::partition::{Edge, EdgeGraph};
use crate::rng::{self, Purpose};

/// Residual values below this are treated as zero.
const ZERO_TOL: f64 = 1e-12;
/// Distance from {0, 1} tolerated before the final snap.
const INTEGRAL_TOL: f64 = 1e-6;
/// Tolerance on per-iteration conservation laws.
const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    Cycle,
    PseudoPath,
}

/// A cycle `(i0, j1, i1, ..., jt, i0)` of live marked edges, or a
/// pseudo-marked-path `(i0, j1, i1, ..., jt, it)`. `edges[2o]` joins
/// `machines[o]` to `jobs[o]` and `edges[2o+1]` joins `jobs[o]` to
/// `machines[o+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    pub kind: StructureKind,
    /// Local edge indices of the class, in walk order.
    pub edges: Vec<usize>,
    pub machines: Vec<usize>,
    pub jobs: Vec<usize>,
}

/// Live `x` values for the edges of one class.
#[derive(Clone, Debug)]
pub struct RoundingState<'g> {
    graph: &'g EdgeGraph,
    class: i32,
    ids: Vec<usize>,
    x: Vec<f64>,
}

/// One iteration, for replay and debugging.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub class: i32,
    pub kind: StructureKind,
    pub edge_ids: Vec<usize>,
    pub theta: f64,
    pub theta_prime: f64,
    pub plus: bool,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub theta: f64,
    pub theta_prime: f64,
    pub plus: bool,
    /// Local indices of edges that dropped to zero.
    pub removed: Vec<usize>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

impl<'g> RoundingState<'g> {
    /// Start from the graph's `x` restricted to class `k`.
    pub fn new(graph: &'g EdgeGraph, class: i32) -> Self {
        let ids: Vec<usize> = graph.edges_of_class(class).map(|e| e.id).collect();
        let x = ids.iter().map(|&id| graph.edges[id].x).collect();
        RoundingState { graph, class, ids, x }
    }

    /// Start from explicit values, one per class edge in id order.
    pub fn with_values(graph: &'g EdgeGraph, class: i32, x: Vec<f64>) -> Self {
        let mut state = Self::new(graph, class);
        assert_eq!(x.len(), state.ids.len());
        state.x = x;
        state
    }

    pub fn class(&self) -> i32 {
        self.class
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn global_id(&self, local: usize) -> usize {
        self.ids[local]
    }

    pub fn edge(&self, local: usize) -> &'g Edge {
        &self.graph.edges[self.ids[local]]
    }

    pub fn is_live(&self, local: usize) -> bool {
        self.x[local] > 0.0
    }

    pub fn live_count(&self) -> usize {
        self.x.iter().filter(|&&v| v > 0.0).count()
    }

    fn live_marked(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&l| self.is_live(l) && self.edge(l).marked)
    }

    /// `|delta_i^{k,mk} cap E-bar|` for every machine.
    pub fn live_marked_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.graph.machines];
        for l in self.live_marked() {
            deg[self.edge(l).machine] += 1;
        }
        deg
    }

    /// `sum_{e in delta_i^{k,mk}} x_e p_e` for every machine.
    pub fn marked_volumes(&self) -> Vec<f64> {
        let mut vol = vec![0.0; self.graph.machines];
        for l in self.live_marked() {
            let e = self.edge(l);
            vol[e.machine] += self.x[l] * e.size;
        }
        vol
    }

    /// Total live `x` of each job of the class (zero for other jobs).
    pub fn job_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.graph.jobs];
        for l in 0..self.len() {
            if self.is_live(l) {
                sums[self.edge(l).job] += self.x[l];
            }
        }
        sums
    }

    fn job_node(&self, job: usize) -> usize {
        self.graph.machines + job
    }

    /// Cycle of live marked edges if any, else a pseudo-marked-path if any.
    pub fn find_structure(&self) -> Option<Structure> {
        let m = self.graph.machines;
        let nodes = m + self.graph.jobs;
        let mut uf = UnionFind::new(nodes);
        // forest adjacency: node -> [(neighbor, local edge)]
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
        for l in self.live_marked() {
            let e = self.edge(l);
            let (a, b) = (e.machine, self.job_node(e.job));
            if !uf.union(a, b) {
                // tree path job -> machine closes a cycle with this edge
                let path = tree_path(&adj, b, a).expect("same component");
                let mut edges = vec![l];
                edges.extend(path);
                return Some(self.walk(StructureKind::Cycle, e.machine, edges));
            }
            adj[a].push((b, l));
            adj[b].push((a, l));
        }

        // Marked forest: look for two end attachments in one tree.
        let degree = self.live_marked_degrees();
        let mut per_tree: BTreeMap<usize, (Vec<(usize, usize)>, Vec<(usize, usize)>)> = BTreeMap::new();
        let mut tree_order = Vec::new();
        for l in 0..self.len() {
            if !self.is_live(l) {
                continue;
            }
            let e = self.edge(l);
            let root = uf.find(self.job_node(e.job));
            let entry = per_tree.entry(root).or_insert_with(|| {
                tree_order.push(root);
                (Vec::new(), Vec::new())
            });
            if !e.marked {
                entry.0.push((e.job, l));
            } else if degree[e.machine] == 1 {
                entry.1.push((e.job, l));
            }
        }
        // order trees by their smallest job
        let job_roots: Vec<usize> = (0..self.graph.jobs).map(|j| uf.find(self.job_node(j))).collect();
        tree_order.sort_by_key(|&root| job_roots.iter().position(|&r| r == root).unwrap_or(usize::MAX));
        for root in tree_order {
            let (unmarked, leaf_marked) = &per_tree[&root];
            let mut ends = unmarked.iter().chain(leaf_marked.iter());
            let (Some(&(ja, ea)), Some(&(jb, eb))) = (ends.next(), ends.next()) else {
                continue;
            };
            let inner = tree_path(&adj, self.job_node(ja), self.job_node(jb)).expect("same tree");
            let mut edges = vec![ea];
            edges.extend(inner);
            edges.push(eb);
            let start = self.edge(ea).machine;
            return Some(self.walk(StructureKind::PseudoPath, start, edges));
        }
        None
    }

    /// Recover the alternating node sequence of an edge walk from `start`.
    fn walk(&self, kind: StructureKind, start: usize, edges: Vec<usize>) -> Structure {
        let mut machines = vec![start];
        let mut jobs = Vec::new();
        for (pos, &l) in edges.iter().enumerate() {
            let e = self.edge(l);
            if pos % 2 == 0 {
                debug_assert_eq!(e.machine, *machines.last().unwrap());
                jobs.push(e.job);
            } else {
                debug_assert_eq!(e.job, *jobs.last().unwrap());
                machines.push(e.machine);
            }
        }
        Structure {
            kind,
            edges,
            machines,
            jobs,
        }
    }

    /// Direction vector on the structure: `+1` on the first edge, zero sum
    /// at each job, zero size-weighted sum at each interior machine.
    pub fn build_direction(&self, s: &Structure) -> Result<Vec<(usize, f64)>> {
        if s.edges.len() < 2 || s.edges.len() != 2 * s.jobs.len() {
            return Err(Error::Invariant("malformed structure".into()));
        }
        let mut a = Vec::with_capacity(s.edges.len());
        let mut prev = 1.0;
        a.push((s.edges[0], prev));
        for pos in 1..s.edges.len() {
            let value = if pos % 2 == 1 {
                -prev
            } else {
                let (from, to) = (s.jobs[pos / 2 - 1], s.jobs[pos / 2]);
                -prev * self.graph.sizes[from] / self.graph.sizes[to]
            };
            a.push((s.edges[pos], value));
            prev = value;
        }
        self.check_direction(&a)?;
        Ok(a)
    }

    fn check_direction(&self, a: &[(usize, f64)]) -> Result<()> {
        let mut job_sum = vec![0.0; self.graph.jobs];
        let mut machine_sum = vec![0.0; self.graph.machines];
        let mut seen = vec![false; self.len()];
        for &(l, v) in a {
            if !self.is_live(l) || std::mem::replace(&mut seen[l], true) {
                return Err(Error::Invariant(format!("direction reuses or leaves the live support at edge {l}")));
            }
            let e = self.edge(l);
            job_sum[e.job] += v;
            if e.marked {
                machine_sum[e.machine] += v * e.size;
            }
        }
        if let Some(j) = job_sum.iter().position(|s| s.abs() > 1e-9) {
            return Err(Error::Invariant(format!("direction is unbalanced at job {j}")));
        }
        let degree = self.live_marked_degrees();
        for (i, s) in machine_sum.iter().enumerate() {
            if degree[i] >= 2 && s.abs() > 1e-9 * (1.0 + self.graph.sizes.iter().cloned().fold(0.0, f64::max)) {
                return Err(Error::Invariant(format!("direction changes marked volume at machine {i}")));
            }
        }
        Ok(())
    }

    /// One randomized move along `a`. Coordinates that reach zero are set to
    /// exactly zero.
    pub fn step<R: Rng + ?Sized>(&mut self, a: &[(usize, f64)], rng: &mut R) -> Result<StepOutcome> {
        let limit = |sign: f64| {
            a.iter()
                .filter(|(_, v)| sign * v > 0.0)
                .map(|&(l, v)| self.x[l] / (sign * v).abs())
                .fold(f64::INFINITY, f64::min)
        };
        // theta: largest move along +a, theta': largest along -a
        let theta = limit(-1.0);
        let theta_prime = limit(1.0);
        if !(theta.is_finite() && theta_prime.is_finite()) {
            return Err(Error::Invariant("direction vector is one-signed".into()));
        }
        let plus = rng.gen::<f64>() * (theta + theta_prime) < theta_prime;
        let (scale, bind_sign, bound) = if plus {
            (theta, -1.0, theta)
        } else {
            (-theta_prime, 1.0, theta_prime)
        };
        let mut removed = Vec::new();
        for &(l, v) in a {
            let binding = bind_sign * v > 0.0 && self.x[l] / v.abs() <= bound;
            let next = self.x[l] + scale * v;
            self.x[l] = if binding || next.abs() < ZERO_TOL { 0.0 } else { next };
            if self.x[l] == 0.0 {
                removed.push(l);
            }
        }
        if removed.is_empty() {
            return Err(Error::Invariant("step removed no edge".into()));
        }
        Ok(StepOutcome {
            theta,
            theta_prime,
            plus,
            removed,
        })
    }

    /// Run the loop to completion. Returns the selected local edge of each
    /// class job together with the iteration count.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        mut trace: Option<&mut Vec<TraceRecord>>,
    ) -> Result<usize> {
        let cap = self.len();
        let mut iterations = 0;
        while let Some(s) = self.find_structure() {
            iterations += 1;
            if iterations > cap {
                return Err(Error::Invariant(format!(
                    "class {} needed more than |E_k| = {cap} iterations",
                    self.class
                )));
            }
            let a = self.build_direction(&s)?;
            let degree = self.live_marked_degrees();
            let vol_before = self.marked_volumes();
            let jobs_before = self.job_sums();
            let outcome = self.step(&a, rng)?;
            let vol_after = self.marked_volumes();
            for i in 0..self.graph.machines {
                if degree[i] >= 2 && (vol_after[i] - vol_before[i]).abs() > CONSERVATION_TOL {
                    return Err(Error::Invariant(format!(
                        "marked volume on machine {i} moved from {} to {}",
                        vol_before[i], vol_after[i]
                    )));
                }
            }
            for (j, (b, a)) in jobs_before.iter().zip(self.job_sums()).enumerate() {
                if (b - a).abs() > CONSERVATION_TOL {
                    return Err(Error::Invariant(format!("job {j} total moved from {b} to {a}")));
                }
            }
            if let Some(log) = trace.as_deref_mut() {
                log.push(TraceRecord {
                    class: self.class,
                    kind: s.kind,
                    edge_ids: s.edges.iter().map(|&l| self.ids[l]).collect(),
                    theta: outcome.theta,
                    theta_prime: outcome.theta_prime,
                    plus: outcome.plus,
                });
            }
        }
        Ok(iterations)
    }

    /// Snap the terminal `x` to {0, 1} and check the selection rules.
    /// Returns `(job, local edge)` for every job of the class.
    pub fn finish(&mut self) -> Result<Vec<(usize, usize)>> {
        for (l, v) in self.x.iter_mut().enumerate() {
            if v.abs() <= INTEGRAL_TOL {
                *v = 0.0;
            } else if (*v - 1.0).abs() <= INTEGRAL_TOL {
                *v = 1.0;
            } else {
                return Err(Error::Invariant(format!(
                    "class {} ended with fractional x = {v} on edge {}",
                    self.class, self.ids[l]
                )));
            }
        }
        let mut chosen: BTreeMap<usize, usize> = BTreeMap::new();
        let mut marked_hits = vec![0usize; self.graph.machines];
        for l in 0..self.len() {
            if self.x[l] == 1.0 {
                let e = self.edge(l);
                if chosen.insert(e.job, l).is_some() {
                    return Err(Error::Invariant(format!("job {} selected twice", e.job)));
                }
                if e.marked {
                    marked_hits[e.machine] += 1;
                }
            }
        }
        if let Some(i) = marked_hits.iter().position(|&c| c > 1) {
            return Err(Error::Invariant(format!(
                "machine {i} received {} marked edges of class {}",
                marked_hits[i], self.class
            )));
        }
        let members = self.graph.classes.members();
        for &j in members.get(&self.class).map(Vec::as_slice).unwrap_or(&[]) {
            if !chosen.contains_key(&j) {
                return Err(Error::Invariant(format!("job {j} was not assigned")));
            }
        }
        Ok(chosen.into_iter().collect())
    }
}

/// Edge sequence of the unique forest path from `from` to `to`.
fn tree_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = Vec::new();
            let mut cur = to;
            while cur != from {
                let (prev, edge) = parent[cur].expect("reached");
                path.push(edge);
                cur = prev;
            }
            path.reverse();
            return Some(path);
        }
        for &(v, edge) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some((u, edge));
                queue.push_back(v);
            }
        }
    }
    None
}

/// Result of rounding one class.
#[derive(Clone, Debug)]
pub struct ClassOutcome {
    pub class: i32,
    pub iterations: usize,
    pub edge_count: usize,
    /// `(job, global edge id)` selected for each job in the class.
    pub selected: Vec<(usize, usize)>,
}

pub fn round_class<R: Rng + ?Sized>(
    graph: &EdgeGraph,
    class: i32,
    rng: &mut R,
    trace: Option<&mut Vec<TraceRecord>>,
) -> Result<ClassOutcome> {
    let mut state = RoundingState::new(graph, class);
    let iterations = state.run(rng, trace)?;
    let selected = state
        .finish()?
        .into_iter()
        .map(|(j, l)| (j, state.global_id(l)))
        .collect();
    Ok(ClassOutcome {
        class,
        iterations,
        edge_count: state.len(),
        selected,
    })
}

/// Integral outcome of rounding every class.
#[derive(Clone, Debug)]
pub struct RoundingOutcome {
    pub machine_of: Vec<usize>,
    /// Final indicator per global edge id.
    pub chosen: Vec<bool>,
    pub classes: Vec<ClassOutcome>,
}

impl RoundingOutcome {
    pub fn assignment(&self, inst: &Instance) -> Result<Assignment> {
        Assignment::new(inst, self.machine_of.clone())
    }
}

/// Round all classes; class `k` draws from stream `(seed, trial, k)`.
pub fn round_all(
    graph: &EdgeGraph,
    seed: u64,
    trial: u64,
    trace: Option<&mut Vec<TraceRecord>>,
) -> Result<RoundingOutcome> {
    round_all_in_order(graph, &graph.class_ids(), seed, trial, trace)
}

/// As [`round_all`] with an explicit class processing order.
pub fn round_all_in_order(
    graph: &EdgeGraph,
    order: &[i32],
    seed: u64,
    trial: u64,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<RoundingOutcome> {
    let mut machine_of = vec![usize::MAX; graph.jobs];
    let mut chosen = vec![false; graph.edges.len()];
    let mut classes = Vec::with_capacity(order.len());
    for &k in order {
        let mut rng = rng::stream(seed, Purpose::Rounding, trial, k as i64);
        let outcome = round_class(graph, k, &mut rng, trace.as_deref_mut())?;
        for &(j, id) in &outcome.selected {
            machine_of[j] = graph.edges[id].machine;
            chosen[id] = true;
        }
        classes.push(outcome);
    }
    if let Some(j) = machine_of.iter().position(|&i| i == usize::MAX) {
        return Err(Error::Unassigned { job: j });
    }
    Ok(RoundingOutcome {
        machine_of,
        chosen,
        classes,
    })
}
