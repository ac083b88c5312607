//! Comparison walks: Metropolis-Hastings on the undirected version of a
//! graph, and the directed unbiased random walk with random jumps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::Checkpoints;
use crate::graph::DirectedGraph;
use crate::metrics::{self, MetricsLog, MetricsRow};
use crate::oracle::SparseOperator;
use crate::{Error, Result};

/// Symmetric, de-duplicated adjacency of a directed graph.
#[derive(Clone, Debug, PartialEq)]
pub struct UndirectedView {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    max_degree: usize,
}

impl UndirectedView {
    pub fn new(g: &DirectedGraph) -> Self {
        let n = g.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let start = neighbors.len();
            neighbors.extend_from_slice(g.out_neighbors(i));
            neighbors.extend_from_slice(g.in_neighbors(i));
            neighbors[start..].sort_unstable();
            let mut list = neighbors.split_off(start);
            list.dedup();
            neighbors.extend(list);
            offsets.push(neighbors.len());
        }
        let max_degree = (0..n).map(|i| offsets[i + 1] - offsets[i]).max().unwrap_or(0);
        Self {
            offsets,
            neighbors,
            max_degree,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MhVariant {
    /// Propose each neighbor with probability `1 / d_max`, otherwise stay.
    MaxDegree,
    /// Propose a uniform neighbor.
    SimpleRandomWalk,
}

impl MhVariant {
    fn proposal(self, view: &UndirectedView, i: usize) -> f64 {
        match self {
            Self::MaxDegree => 1.0 / view.max_degree() as f64,
            Self::SimpleRandomWalk => 1.0 / view.degree(i) as f64,
        }
    }

    fn acceptance(self, view: &UndirectedView, pi: &[f64], i: usize, j: usize) -> f64 {
        (pi[j] * self.proposal(view, j) / (pi[i] * self.proposal(view, i))).min(1.0)
    }
}

/// Outcome of one Metropolis-Hastings transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MhMove {
    pub next: usize,
    /// A proposal was made and refused; the walker stays put.
    pub rejected: bool,
}

/// One transition towards `pi`. Rejection keeps the walker in place.
pub fn mh_step<R: Rng + ?Sized>(
    view: &UndirectedView,
    variant: MhVariant,
    pi: &[f64],
    current: usize,
    rng: &mut R,
) -> MhMove {
    let nbrs = view.neighbors(current);
    let stay = MhMove {
        next: current,
        rejected: false,
    };
    if nbrs.is_empty() {
        return stay;
    }
    let j = match variant {
        MhVariant::MaxDegree => {
            let r = rng.random_range(0..view.max_degree());
            match nbrs.get(r) {
                Some(&j) => j,
                None => return stay,
            }
        }
        MhVariant::SimpleRandomWalk => nbrs[rng.random_range(0..nbrs.len())],
    };
    if rng.random::<f64>() < variant.acceptance(view, pi, current, j) {
        MhMove { next: j, rejected: false }
    } else {
        MhMove {
            next: current,
            rejected: true,
        }
    }
}

/// The full transition matrix of the walk.
pub fn mh_kernel(view: &UndirectedView, variant: MhVariant, pi: &[f64]) -> Result<SparseOperator> {
    let n = view.node_count();
    if pi.len() != n {
        return Err(Error::LengthMismatch(pi.len(), n));
    }
    let mut entries = Vec::new();
    for i in 0..n {
        let mut leave = 0.0;
        for &j in view.neighbors(i) {
            let p = variant.proposal(view, i) * variant.acceptance(view, pi, i, j);
            leave += p;
            entries.push((i, j, p));
        }
        let stay = 1.0 - leave;
        if stay > 1e-15 {
            entries.push((i, i, stay));
        }
    }
    SparseOperator::new(n, entries)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MhConfig {
    pub variant: MhVariant,
    pub agents: usize,
    pub steps: u64,
    pub seed: u64,
    pub checkpoints: Checkpoints,
}

/// Independent MH walkers with pooled visit frequencies, logged against
/// `pi`. Each walker starts at a uniform node.
pub fn mh_run(view: &UndirectedView, pi: &[f64], config: &MhConfig) -> Result<MetricsLog> {
    let n = view.node_count();
    if pi.len() != n {
        return Err(Error::LengthMismatch(pi.len(), n));
    }
    if config.agents == 0 || config.steps == 0 {
        return Err(Error::Config("agents and steps must be positive".into()));
    }
    let hash = metrics::config_hash(&format!("{config:?}"));
    let mut log = MetricsLog::new(hash, config.seed);
    let mut counts = vec![0u64; n];
    let mut visited = vec![false; n];
    let mut unique = 0u64;
    let mut rejections = 0u64;
    let mut walkers: Vec<(usize, ChaCha8Rng)> = (0..config.agents)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            (rng.random_range(0..n), rng)
        })
        .collect();
    for (node, _) in &walkers {
        counts[*node] += 1;
        if !std::mem::replace(&mut visited[*node], true) {
            unique += 1;
        }
    }
    let mut t = 0;
    for checkpoint in config.checkpoints.steps(config.steps) {
        while t < checkpoint {
            t += 1;
            for (node, rng) in &mut walkers {
                let mv = mh_step(view, config.variant, pi, *node, rng);
                rejections += mv.rejected as u64;
                *node = mv.next;
                counts[*node] += 1;
                if !std::mem::replace(&mut visited[*node], true) {
                    unique += 1;
                }
            }
        }
        let total: u64 = counts.iter().sum();
        let estimate: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        log.push(MetricsRow {
            step: t,
            tvd: metrics::tvd(&estimate, pi)?,
            nrmse: None,
            unique_queries: unique as f64,
            unique_query_pct: 100.0 * unique as f64 / n as f64,
            c_t_max: None,
            absorptions: rejections,
        })?;
    }
    Ok(log)
}

/// Importance-weighted estimate `x̂(i) ∝ Σ_k 1{X_k = i} / π'(X_k)` from
/// `(node, π'(node))` samples.
pub fn ratio_estimate(samples: &[(usize, f64)], n: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut out = vec![0.0; n];
    for &(node, weight) in samples {
        if node >= n {
            return Err(Error::NodeOutOfRange { node, n });
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidTarget(format!("sample weight {weight} for node {node}")));
        }
        out[node] += 1.0 / weight;
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DurwConfig {
    /// Jump weight `w`.
    pub w: f64,
    /// Query cost charged per random jump.
    pub c_jump: f64,
    pub steps: u64,
    pub seed: u64,
    pub checkpoints: Checkpoints,
}

impl DurwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::Config(format!("jump weight must be positive, got {}", self.w)));
        }
        if !(self.c_jump >= 1.0 && self.c_jump.is_finite()) {
            return Err(Error::Config(format!("jump cost must be at least 1, got {}", self.c_jump)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        Ok(())
    }
}

/// A single DURW crawler. Each node's undirected neighbor list is fixed at
/// its first visit: its out-neighbors not visited at that moment, plus
/// earlier-visited nodes that converted an edge towards it.
#[derive(Clone, Debug)]
pub struct DurwState {
    pruned: Vec<Vec<usize>>,
    visited: Vec<bool>,
    current: usize,
    w: f64,
    c_jump: f64,
    move_visits: u64,
    jumps: u64,
    /// Running `Σ 1/π'` per node, the numerator of the ratio estimate.
    inverse_weights: Vec<f64>,
    samples: u64,
}

impl DurwState {
    /// Starts at `start`, charged as one query.
    pub fn new(g: &DirectedGraph, w: f64, c_jump: f64, start: usize) -> Result<Self> {
        g.check_node(start)?;
        let n = g.node_count();
        let mut s = Self {
            pruned: vec![Vec::new(); n],
            visited: vec![false; n],
            current: start,
            w,
            c_jump,
            move_visits: 0,
            jumps: 0,
            inverse_weights: vec![0.0; n],
            samples: 0,
        };
        s.first_visit(g, start);
        s.move_visits = 1;
        s.log_sample();
        Ok(s)
    }

    fn first_visit(&mut self, g: &DirectedGraph, v: usize) -> bool {
        if self.visited[v] {
            return false;
        }
        self.visited[v] = true;
        for &u in g.out_neighbors(v) {
            if !self.visited[u] {
                self.pruned[v].push(u);
                self.pruned[u].push(v);
            }
        }
        true
    }

    fn log_sample(&mut self) {
        let weight = self.pruned_degree(self.current) as f64 + self.w;
        self.inverse_weights[self.current] += 1.0 / weight;
        self.samples += 1;
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn pruned_degree(&self, i: usize) -> usize {
        self.pruned[i].len()
    }

    pub fn pruned_neighbors(&self, i: usize) -> &[usize] {
        &self.pruned[i]
    }

    pub fn is_visited(&self, i: usize) -> bool {
        self.visited[i]
    }

    /// Unique move visits plus `c_jump` per jump.
    pub fn query_cost(&self) -> f64 {
        self.move_visits as f64 + self.c_jump * self.jumps as f64
    }

    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    /// Moves to a uniform pruned neighbor with probability `d / (d + w)`,
    /// otherwise jumps to a uniform node of the whole graph.
    pub fn step<R: Rng + ?Sized>(&mut self, g: &DirectedGraph, rng: &mut R) {
        let d = self.pruned_degree(self.current) as f64;
        if rng.random::<f64>() * (d + self.w) < d {
            let nbrs = &self.pruned[self.current];
            let next = nbrs[rng.random_range(0..nbrs.len())];
            if self.first_visit(g, next) {
                self.move_visits += 1;
            }
            self.current = next;
        } else {
            let next = rng.random_range(0..g.node_count());
            self.first_visit(g, next);
            self.jumps += 1;
            self.current = next;
        }
        self.log_sample();
    }

    /// The current ratio estimate over all nodes.
    pub fn estimate(&self) -> Vec<f64> {
        let total: f64 = self.inverse_weights.iter().sum();
        self.inverse_weights.iter().map(|x| x / total).collect()
    }
}

/// Runs one DURW crawler from a uniform start and logs TVD of its estimate
/// against `reference` by query cost.
pub fn durw_run(g: &DirectedGraph, reference: &[f64], config: &DurwConfig) -> Result<(Vec<f64>, MetricsLog)> {
    config.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if reference.len() != n {
        return Err(Error::LengthMismatch(reference.len(), n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = rng.random_range(0..n);
    let mut state = DurwState::new(g, config.w, config.c_jump, start)?;
    let mut log = MetricsLog::new(metrics::config_hash(&format!("{config:?}")), config.seed);
    let mut t = 0;
    for checkpoint in config.checkpoints.steps(config.steps) {
        while t < checkpoint {
            t += 1;
            state.step(g, &mut rng);
        }
        let cost = state.query_cost();
        log.push(MetricsRow {
            step: t,
            tvd: metrics::tvd(&state.estimate(), reference)?,
            nrmse: None,
            unique_queries: cost,
            unique_query_pct: 100.0 * cost / n as f64,
            c_t_max: None,
            absorptions: state.jumps(),
        })?;
    }
    Ok((state.estimate(), log))
}

/// TVD of two methods compared at the same query budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetComparison {
    pub budget: f64,
    pub nmmc_tvd: f64,
    pub baseline_tvd: f64,
}

impl BudgetComparison {
    pub fn nmmc_wins(&self) -> bool {
        self.nmmc_tvd < self.baseline_tvd
    }
}

/// Compares the last checkpoints of each log that stay within the smaller
/// of the two final query costs.
pub fn compare_at_budget(nmmc: &MetricsLog, baseline: &MetricsLog) -> Option<BudgetComparison> {
    let budget = nmmc.last()?.unique_queries.min(baseline.last()?.unique_queries);
    let within = |log: &MetricsLog| log.rows.iter().rev().find(|r| r.unique_queries <= budget).map(|r| r.tvd);
    Some(BudgetComparison {
        budget,
        nmmc_tvd: within(nmmc)?,
        baseline_tvd: within(baseline)?,
    })
}
