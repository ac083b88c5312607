//! The multi-agent simulator: proposals, acceptance against a static or
//! learned constant, redistribution from each agent's own history, and
//! unique-query accounting.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::empirical::{merge, EmpiricalMeasure, MergeMode, WeightSchedule};
use crate::graph::DirectedGraph;
use crate::metrics::{self, MetricsLog, MetricsRow};
use crate::oracle::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::target::{AcceptanceModel, ProposalChain, TargetSpec};
use crate::{Error, Result};

/// How the acceptance constant is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// Use the exact `c_true`.
    Static,
    /// Start from `c = 1` and raise it to an observed `b_ij` with probability `p`.
    Dynamic { p: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InDegreeMode {
    #[default]
    Exact,
    /// Count only in-edges discovered by proposals, starting from one.
    OnlineEstimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Checkpoints {
    Stride(u64),
    /// Roughly `per_decade` checkpoints per factor of ten in `t`.
    LogSpaced { per_decade: u32 },
}

impl Checkpoints {
    /// Sorted checkpoint steps in `1..=steps`, always including `steps`.
    pub fn steps(&self, steps: u64) -> Vec<u64> {
        let mut out = match *self {
            Self::Stride(s) => (1..=steps / s.max(1)).map(|k| k * s.max(1)).collect(),
            Self::LogSpaced { per_decade } => {
                let per = per_decade.max(1) as f64;
                let mut v = Vec::new();
                for k in 0u32.. {
                    let t = 10f64.powf(k as f64 / per).round() as u64;
                    if t > steps {
                        break;
                    }
                    v.push(t);
                }
                v
            }
        };
        out.push(steps);
        out.dedup();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub target: TargetSpec,
    pub chain: ProposalChain,
    pub schedule: WeightSchedule,
    pub mode: Mode,
    pub agents: usize,
    pub steps: u64,
    pub seed: u64,
    pub indegree_mode: InDegreeMode,
    pub checkpoints: Checkpoints,
    /// Distribution of the starting nodes. Defaults to uniform over the
    /// seeds of a teleporting proposal, otherwise uniform over all nodes.
    pub initial: Option<Vec<f64>>,
    pub merge: MergeMode,
    /// One constant learned jointly by all agents instead of one per agent.
    pub shared_c: bool,
}

impl RunConfig {
    pub fn new(target: TargetSpec, chain: ProposalChain) -> Self {
        Self {
            target,
            chain,
            schedule: WeightSchedule::Constant,
            mode: Mode::Static,
            agents: 1,
            steps: 1000,
            seed: 0,
            indegree_mode: InDegreeMode::Exact,
            checkpoints: Checkpoints::LogSpaced { per_decade: 10 },
            initial: None,
            merge: MergeMode::Pooled,
            shared_c: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(Error::Config("at least one agent is required".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        if let Mode::Dynamic { p } = self.mode {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("updating probability must lie in [0, 1], got {p}")));
            }
        }
        if self.checkpoints == Checkpoints::Stride(0) {
            return Err(Error::Config("checkpoint stride must be positive".into()));
        }
        self.schedule.validate()
    }

    /// Digest of the full configuration, embedded in every output.
    pub fn hash(&self) -> String {
        metrics::config_hash(&format!("{self:?}"))
    }
}

/// One walker.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub current: usize,
    pub measure: EmpiricalMeasure,
    /// Running constant; equals `c_true` throughout in static mode.
    pub c_t: f64,
    pub rng: ChaCha8Rng,
    pub absorbed: u64,
    /// First tick at which `c_t` reached `c_true`.
    pub t_star: Option<u64>,
}

/// State shared by all agents: the query cache and discovered in-edges.
#[derive(Clone, Debug)]
pub struct SharedKnowledge {
    visited: Vec<bool>,
    unique_queries: u64,
    discovered: Vec<bool>,
    in_counts: Vec<u32>,
}

impl SharedKnowledge {
    pub fn new(g: &DirectedGraph) -> Self {
        Self {
            visited: vec![false; g.node_count()],
            unique_queries: 0,
            discovered: vec![false; g.edge_count()],
            in_counts: vec![0; g.node_count()],
        }
    }

    pub fn is_visited(&self, node: usize) -> bool {
        self.visited[node]
    }

    pub fn unique_queries(&self) -> u64 {
        self.unique_queries
    }

    /// `d̂_j⁻`: discovered in-edges of `j`, at least one.
    pub fn indegree_estimate(&self, j: usize) -> f64 {
        self.in_counts[j].max(1) as f64
    }

    pub fn discovered_in_edges(&self, j: usize) -> u32 {
        self.in_counts[j]
    }

    /// Whether edge `i → j` has been proposed (tracked in online mode only).
    pub fn is_discovered(&self, g: &DirectedGraph, i: usize, j: usize) -> bool {
        g.edge_index(i, j).is_some_and(|e| self.discovered[e])
    }

    fn visit(&mut self, node: usize) {
        if !self.visited[node] {
            self.visited[node] = true;
            self.unique_queries += 1;
        }
    }

    fn discover(&mut self, g: &DirectedGraph, i: usize, j: usize) {
        if let Some(e) = g.edge_index(i, j) {
            if !self.discovered[e] {
                self.discovered[e] = true;
                self.in_counts[j] += 1;
            }
        }
    }
}

/// Read-only inputs of a single step.
#[derive(Clone, Copy, Debug)]
pub struct StepContext<'a> {
    pub g: &'a DirectedGraph,
    pub model: &'a AcceptanceModel,
    pub schedule: &'a WeightSchedule,
    pub indegree_mode: InDegreeMode,
}

impl StepContext<'_> {
    /// Proposes `j` from the agent's position and evaluates `b_ij`.
    fn propose(&self, agent: &mut AgentState, shared: &mut SharedKnowledge) -> Result<(usize, f64)> {
        let i = agent.current;
        let j = self.model.chain().propose(self.g, i, &mut agent.rng)?;
        let b = match self.indegree_mode {
            InDegreeMode::Exact => self.model.ratio(self.g, i, j),
            InDegreeMode::OnlineEstimate => {
                shared.discover(self.g, i, j);
                self.model.ratio_with(self.g, i, j, |k| shared.indegree_estimate(k))
            }
        };
        Ok((j, b))
    }

    /// Moves to `j` if `u ≤ min(1, b / c)`, otherwise redistributes from the
    /// history so far; then records the new position.
    fn resolve(
        &self,
        agent: &mut AgentState,
        shared: &mut SharedKnowledge,
        j: usize,
        b: f64,
        c: f64,
        u: f64,
    ) -> Result<()> {
        if u <= (b / c).min(1.0) {
            agent.current = j;
            shared.visit(j);
        } else {
            agent.current = agent.measure.sample(&mut agent.rng)?;
            agent.absorbed += 1;
        }
        agent.measure.record(agent.current, self.schedule)
    }
}

/// One tick against the exact constant `c_true`.
pub fn step_static(agent: &mut AgentState, ctx: &StepContext, shared: &mut SharedKnowledge) -> Result<()> {
    let (j, b) = ctx.propose(agent, shared)?;
    let u = agent.rng.random::<f64>();
    ctx.resolve(agent, shared, j, b, ctx.model.c_true(), u)
}

/// One tick that may first raise the agent's constant to `b_ij`.
pub fn step_dynamic(
    agent: &mut AgentState,
    ctx: &StepContext,
    shared: &mut SharedKnowledge,
    p: f64,
    t: u64,
) -> Result<()> {
    let (j, b) = ctx.propose(agent, shared)?;
    let u1 = agent.rng.random::<f64>();
    let u2 = agent.rng.random::<f64>();
    if u1 <= p && agent.c_t < b {
        agent.c_t = b;
    }
    if agent.t_star.is_none() && agent.c_t >= ctx.model.c_true() {
        agent.t_star = Some(t);
    }
    let c = agent.c_t;
    ctx.resolve(agent, shared, j, b, c, u2)
}

/// A set of agents advancing in lockstep on one graph.
pub struct Simulation<'g> {
    g: &'g DirectedGraph,
    model: AcceptanceModel,
    config: RunConfig,
    agents: Vec<AgentState>,
    shared: SharedKnowledge,
    t: u64,
}

impl<'g> Simulation<'g> {
    pub fn new(g: &'g DirectedGraph, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let n = g.node_count();
        let model = AcceptanceModel::build(g, &config.chain, &config.target)?;
        let start = match (&config.initial, &config.chain) {
            (Some(dist), _) => {
                if dist.len() != n {
                    return Err(Error::LengthMismatch(dist.len(), n));
                }
                let sum: f64 = dist.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::NotNormalized(sum));
                }
                dist.clone()
            }
            (None, ProposalChain::Teleporting(t)) => {
                let mut v = vec![0.0; n];
                let each = 1.0 / t.seeds().len() as f64;
                for &s in t.seeds() {
                    g.check_node(s)?;
                    v[s] = each;
                }
                v
            }
            (None, ProposalChain::SimpleRandomWalk) => vec![1.0 / n as f64; n],
        };
        let picker = WeightedIndex::new(&start).map_err(|e| Error::Config(format!("initial distribution: {e}")))?;
        let c0 = match config.mode {
            Mode::Static => model.c_true(),
            Mode::Dynamic { .. } => 1.0,
        };
        let mut shared = SharedKnowledge::new(g);
        let mut agents = Vec::with_capacity(config.agents);
        for k in 0..config.agents {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            let current = picker.sample(&mut rng);
            let mut measure = EmpiricalMeasure::new(n);
            measure.record(current, &config.schedule)?;
            shared.visit(current);
            agents.push(AgentState {
                current,
                measure,
                c_t: c0,
                rng,
                absorbed: 0,
                t_star: (c0 >= model.c_true()).then_some(0),
            });
        }
        Ok(Self {
            g,
            model,
            config,
            agents,
            shared,
            t: 0,
        })
    }

    pub fn model(&self) -> &AcceptanceModel {
        &self.model
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn shared(&self) -> &SharedKnowledge {
        &self.shared
    }

    /// Ticks completed so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    /// Advances every agent by one step, in agent order.
    pub fn step(&mut self) -> Result<()> {
        self.t += 1;
        let ctx = StepContext {
            g: self.g,
            model: &self.model,
            schedule: &self.config.schedule,
            indegree_mode: self.config.indegree_mode,
        };
        let mut joint_c = self.agents.iter().map(|a| a.c_t).fold(f64::NEG_INFINITY, f64::max);
        for agent in &mut self.agents {
            match self.config.mode {
                Mode::Static => step_static(agent, &ctx, &mut self.shared)?,
                Mode::Dynamic { p } => {
                    if self.config.shared_c {
                        agent.c_t = joint_c;
                    }
                    step_dynamic(agent, &ctx, &mut self.shared, p, self.t)?;
                    joint_c = joint_c.max(agent.c_t);
                }
            }
        }
        if self.config.shared_c {
            for agent in &mut self.agents {
                agent.c_t = joint_c;
            }
        }
        Ok(())
    }

    /// All agents' histories combined into one distribution.
    pub fn merged(&self) -> Result<Vec<f64>> {
        let measures: Vec<EmpiricalMeasure> = self.agents.iter().map(|a| a.measure.clone()).collect();
        merge(&measures, self.config.merge)
    }

    pub fn c_t_max(&self) -> f64 {
        self.agents.iter().map(|a| a.c_t).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn absorptions(&self) -> u64 {
        self.agents.iter().map(|a| a.absorbed).sum()
    }

    fn row(&self, reference: &[f64], merged: &[f64]) -> Result<MetricsRow> {
        let uq = self.shared.unique_queries() as f64;
        Ok(MetricsRow {
            step: self.t,
            tvd: metrics::tvd(merged, reference)?,
            nrmse: None,
            unique_queries: uq,
            unique_query_pct: 100.0 * uq / self.g.node_count() as f64,
            c_t_max: Some(self.c_t_max()),
            absorptions: self.absorptions(),
        })
    }
}

/// Runs the configuration and logs TVD against the oracle target at each
/// checkpoint.
pub fn run(g: &DirectedGraph, config: &RunConfig) -> Result<MetricsLog> {
    let reference = config.target.distribution(g, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    run_with_reference(g, config, &reference)
}

/// As [`run`], against a precomputed reference distribution.
pub fn run_with_reference(g: &DirectedGraph, config: &RunConfig, reference: &[f64]) -> Result<MetricsLog> {
    run_observed(g, config, reference, |_, _| {})
}

/// As [`run_with_reference`], handing each checkpoint's merged distribution
/// to `observe`.
pub fn run_observed(
    g: &DirectedGraph,
    config: &RunConfig,
    reference: &[f64],
    mut observe: impl FnMut(u64, &[f64]),
) -> Result<MetricsLog> {
    if reference.len() != g.node_count() {
        return Err(Error::LengthMismatch(reference.len(), g.node_count()));
    }
    let mut sim = Simulation::new(g, config.clone())?;
    let mut log = MetricsLog::new(config.hash(), config.seed);
    for checkpoint in config.checkpoints.steps(config.steps) {
        while sim.time() < checkpoint {
            sim.step()?;
        }
        let merged = sim.merged()?;
        log.push(sim.row(reference, &merged)?)?;
        observe(checkpoint, &merged);
    }
    Ok(log)
}

/// Outcome of independent repetitions of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Repetitions {
    pub runs: Vec<MetricsLog>,
    /// Per-checkpoint means across runs, with NRMSE filled in.
    pub aggregate: MetricsLog,
}

/// Seed used by repetition `r`.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// Runs `reps` independent copies (in parallel) with seeds
/// [`repetition_seed`]`(config.seed, r)`.
pub fn run_repeated(g: &DirectedGraph, config: &RunConfig, reference: &[f64], reps: usize) -> Result<Repetitions> {
    if reps == 0 {
        return Err(Error::Config("at least one repetition is required".into()));
    }
    let outputs: Vec<(MetricsLog, Vec<Vec<f64>>)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut cfg = config.clone();
            cfg.seed = repetition_seed(config.seed, r);
            let mut snapshots = Vec::new();
            let log = run_observed(g, &cfg, reference, |_, d| snapshots.push(d.to_vec()))?;
            Ok((log, snapshots))
        })
        .collect::<Result<_>>()?;
    let mut aggregate = MetricsLog::new(config.hash(), config.seed);
    let reps_f = reps as f64;
    for (k, row) in outputs[0].0.rows.iter().enumerate() {
        let mean = |f: &dyn Fn(&MetricsRow) -> f64| outputs.iter().map(|(l, _)| f(&l.rows[k])).sum::<f64>() / reps_f;
        let nrmse = if reps >= 2 {
            let estimates: Vec<Vec<f64>> = outputs.iter().map(|(_, s)| s[k].clone()).collect();
            Some(metrics::nrmse(&estimates, reference)?)
        } else {
            None
        };
        aggregate.push(MetricsRow {
            step: row.step,
            tvd: mean(&|r| r.tvd).clamp(0.0, 1.0),
            nrmse,
            unique_queries: mean(&|r| r.unique_queries),
            unique_query_pct: mean(&|r| r.unique_query_pct),
            c_t_max: outputs
                .iter()
                .filter_map(|(l, _)| l.rows[k].c_t_max)
                .reduce(f64::max),
            absorptions: outputs.iter().map(|(l, _)| l.rows[k].absorptions).sum::<u64>() / reps as u64,
        })?;
    }
    Ok(Repetitions {
        runs: outputs.into_iter().map(|(l, _)| l).collect(),
        aggregate,
    })
}
