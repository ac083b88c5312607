//! The subcommands, as library functions returning printable summaries.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nmmc_core::baselines::{self, DurwConfig, MhConfig, MhVariant, UndirectedView};
use nmmc_core::empirical::{MergeMode, WeightSchedule};
use nmmc_core::engine::{self, Checkpoints, InDegreeMode, Mode, RunConfig};
use nmmc_core::graph::{self, DirectedGraph, LoadOptions, NodeMap};
use nmmc_core::metrics::{self, MetricsLog, SlopeFit};
use nmmc_core::oracle::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use nmmc_core::target::{ProposalChain, TargetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{
    BaselineMethod, BaselineSection, ExperimentConfig, InDegreeKind, MergeKind, ModeKind, RunSection, ScheduleKind,
    TargetKind, WorkingSet,
};

/// How to cut the working graph out of a raw dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkingSetSpec {
    pub mode: WorkingSet,
    pub seeds: usize,
    pub seed_choice: u64,
    pub p_follow: f64,
}

impl WorkingSetSpec {
    pub fn lscc() -> Self {
        Self {
            mode: WorkingSet::Lscc,
            seeds: 0,
            seed_choice: 0,
            p_follow: 0.95,
        }
    }
}

/// A loaded dataset reduced to its working set.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub raw_nodes: usize,
    pub raw_edges: usize,
    pub graph: DirectedGraph,
    /// Original dataset IDs of the working nodes.
    pub ids: NodeMap,
    /// Teleport seeds (working indices) for the reachable working set.
    pub seeds: Option<Vec<usize>>,
    pub p_follow: f64,
    pub mode: WorkingSet,
}

impl Prepared {
    pub fn summary(&self) -> String {
        let label = match self.mode {
            WorkingSet::Lscc => "LSCC",
            WorkingSet::Reachable => "Reachable",
            WorkingSet::AsIs => "Working set",
        };
        format!(
            "Graph: {} nodes, {} edges\n{label}: {} nodes, {} edges",
            self.raw_nodes,
            self.raw_edges,
            self.graph.node_count(),
            self.graph.edge_count()
        )
    }

    pub fn chain(&self) -> Result<ProposalChain> {
        Ok(match &self.seeds {
            Some(seeds) => ProposalChain::teleporting(seeds.clone(), self.p_follow)?,
            None => ProposalChain::SimpleRandomWalk,
        })
    }
}

/// Loads an edge list and reduces it to the requested working set.
pub fn prepare_graph(path: &Path, spec: &WorkingSetSpec) -> Result<Prepared> {
    let (g, map) = graph::load_edge_list(path, LoadOptions::default())?;
    let (raw_nodes, raw_edges) = (g.node_count(), g.edge_count());
    let (graph, ids, seeds) = match spec.mode {
        WorkingSet::Lscc => {
            let (h, sub) = graph::largest_scc(&g);
            (h, map.then(&sub), None)
        }
        WorkingSet::AsIs => (g, map, None),
        WorkingSet::Reachable => {
            // Everything reachable from the LSCC; teleport seeds are drawn
            // inside the LSCC so every working node stays reachable from them.
            let (_, core) = graph::largest_scc(&g);
            let core_nodes: Vec<usize> = core.ids().iter().map(|&v| v as usize).collect();
            ensure!(
                (1..=core_nodes.len()).contains(&spec.seeds),
                "cannot draw {} seeds from an LSCC of {} nodes",
                spec.seeds,
                core_nodes.len()
            );
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed_choice);
            let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, core_nodes.len(), spec.seeds)
                .into_iter()
                .map(|k| core_nodes[k])
                .collect();
            chosen.sort_unstable();
            let (h, sub) = graph::reachable_set(&g, &core_nodes)?;
            let local = chosen
                .iter()
                .map(|&s| sub.index_of(s as u64).expect("seeds are reachable from themselves"))
                .collect();
            (h, map.then(&sub), Some(local))
        }
    };
    Ok(Prepared {
        raw_nodes,
        raw_edges,
        graph,
        ids,
        seeds,
        p_follow: spec.p_follow,
        mode: spec.mode,
    })
}

/// `prepare`: writes the working graph (and seeds) and returns the summary.
pub fn cmd_prepare(input: &Path, spec: &WorkingSetSpec, out_dir: Option<&Path>) -> Result<String> {
    let prepared = prepare_graph(input, spec)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("graph.txt");
        let mut out = BufWriter::new(create(&path)?);
        graph::write_edge_list(&prepared.graph, &prepared.ids, &mut out)?;
        out.flush()?;
        if let Some(seeds) = &prepared.seeds {
            let mut out = BufWriter::new(create(&dir.join("seeds.txt"))?);
            for &s in seeds {
                writeln!(out, "{}", prepared.ids.id_of(s))?;
            }
            out.flush()?;
        }
    }
    Ok(prepared.summary())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

/// Builds a target for the working graph, reading custom masses by
/// original ID and renormalizing them over the working set.
pub fn target_spec(kind: TargetKind, custom: Option<&Path>, ids: &NodeMap) -> Result<TargetSpec> {
    Ok(match kind {
        TargetKind::Uniform => TargetSpec::Uniform,
        TargetKind::Indegree => TargetSpec::InDegree,
        TargetKind::Evc => TargetSpec::Evc,
        TargetKind::Custom => {
            let path = custom.context("custom target needs a distribution file")?;
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let dist = metrics::read_distribution_csv(file).with_context(|| format!("reading {}", path.display()))?;
            let mut pi = vec![f64::NAN; ids.len()];
            for (id, v) in dist.ids.iter().zip(&dist.values) {
                if let Some(k) = ids.index_of(*id) {
                    pi[k] = *v;
                }
            }
            if let Some(k) = pi.iter().position(|x| x.is_nan()) {
                bail!("custom target has no mass for node {}", ids.id_of(k));
            }
            let total: f64 = pi.iter().sum();
            ensure!(total > 0.0 && total.is_finite(), "custom target masses sum to {total}");
            TargetSpec::custom(pi.iter().map(|x| x / total).collect())?
        }
    })
}

/// `oracle`: writes the reference distribution of a prepared graph.
pub fn cmd_oracle(graph_path: &Path, kind: TargetKind, custom: Option<&Path>, out: &mut dyn Write) -> Result<String> {
    let (g, ids) = graph::load_edge_list(graph_path, LoadOptions::default())?;
    let spec = target_spec(kind, custom, &ids)?;
    let (pi, eigenvalue) = match spec {
        TargetSpec::Evc => {
            let r = nmmc_core::oracle::evc(&g, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            (r.vector, Some(r.eigenvalue))
        }
        _ => (spec.distribution(&g, DEFAULT_TOL, DEFAULT_MAX_ITER)?, None),
    };
    metrics::write_distribution_csv(&mut *out, ids.ids(), &pi, eigenvalue)?;
    Ok(match eigenvalue {
        Some(l) => format!("{} nodes, leading eigenvalue {l}", g.node_count()),
        None => format!("{} nodes", g.node_count()),
    })
}

fn checkpoints(stride: Option<u64>, per_decade: Option<u32>) -> Checkpoints {
    match stride {
        Some(s) => Checkpoints::Stride(s),
        None => Checkpoints::LogSpaced {
            per_decade: per_decade.unwrap_or(10),
        },
    }
}

/// One point of a `[run]` sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub config: RunConfig,
}

/// Expands the `[run]` section into one engine configuration per
/// `(alpha, p)` combination.
pub fn sweep(run: &RunSection, target: &TargetSpec, chain: &ProposalChain) -> Vec<SweepPoint> {
    let alphas: Vec<Option<f64>> = match &run.alpha {
        Some(a) => a.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let ps: Vec<Option<f64>> = match &run.p {
        Some(p) => p.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut points = Vec::new();
    for &alpha in &alphas {
        for &p in &ps {
            let mut parts = vec!["run".to_string()];
            if alphas.len() > 1 {
                parts.push(format!("alpha{}", alpha.unwrap_or_default()));
            }
            if ps.len() > 1 {
                parts.push(format!("p{}", p.unwrap_or_default()));
            }
            let mut config = RunConfig::new(target.clone(), chain.clone());
            config.schedule = match run.schedule {
                ScheduleKind::Constant => WeightSchedule::Constant,
                ScheduleKind::Polynomial => WeightSchedule::Polynomial(alpha.unwrap_or_default()),
                ScheduleKind::Subexponential => WeightSchedule::SubExponential,
            };
            config.mode = match run.mode {
                ModeKind::Static => Mode::Static,
                ModeKind::Dynamic => Mode::Dynamic { p: p.unwrap_or_default() },
            };
            config.agents = run.agents;
            config.steps = run.steps;
            config.seed = run.seed;
            config.indegree_mode = match run.indegree {
                InDegreeKind::Exact => InDegreeMode::Exact,
                InDegreeKind::Online => InDegreeMode::OnlineEstimate,
            };
            config.checkpoints = checkpoints(run.checkpoint_stride, run.checkpoints_per_decade);
            config.merge = match run.merge {
                MergeKind::Pooled => MergeMode::Pooled,
                MergeKind::Averaged => MergeMode::Averaged,
            };
            config.shared_c = run.shared_c;
            points.push(SweepPoint {
                label: parts.join("_"),
                config,
            });
        }
    }
    points
}

fn write_log(log: &MetricsLog, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(create(path)?);
    log.write_csv(&mut out).with_context(|| format!("writing {}", path.display()))?;
    out.flush()?;
    Ok(())
}

fn stamped(mut log: MetricsLog, hash: &str) -> MetricsLog {
    log.config_hash = hash.to_string();
    log
}

/// Final row of one output file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub path: PathBuf,
    pub log: MetricsLog,
}

impl RunSummary {
    pub fn line(&self) -> String {
        let last = self.log.last().expect("logs have at least one checkpoint");
        format!(
            "{}: step {} tvd {:.6} unique queries {} ({:.2}%) -> {}",
            self.label,
            last.step,
            last.tvd,
            last.unique_queries,
            last.unique_query_pct,
            self.path.display()
        )
    }
}

struct Experiment {
    prepared: Prepared,
    out_dir: PathBuf,
    hash: String,
}

impl Experiment {
    fn new(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<Self> {
        let d = &cfg.dataset;
        let spec = WorkingSetSpec {
            mode: d.working_set,
            seeds: d.seeds,
            seed_choice: d.seed_choice,
            p_follow: d.p_follow,
        };
        let prepared = prepare_graph(&d.path, &spec).with_context(|| format!("loading {}", d.path.display()))?;
        let out_dir = out_override.unwrap_or(&cfg.output.dir).to_path_buf();
        fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self {
            prepared,
            out_dir,
            hash: cfg.source_hash.clone(),
        })
    }

    fn reference(&self, target: &TargetSpec) -> Result<Vec<f64>> {
        Ok(target.distribution(&self.prepared.graph, DEFAULT_TOL, DEFAULT_MAX_ITER)?)
    }

    fn nmmc(&self, run: &RunSection) -> Result<Vec<RunSummary>> {
        let target = target_spec(run.target, run.custom.as_deref(), &self.prepared.ids)?;
        let reference = self.reference(&target)?;
        let points = sweep(run, &target, &self.prepared.chain()?);
        let g = &self.prepared.graph;
        let per_point: Vec<Vec<RunSummary>> = points
            .par_iter()
            .map(|pt| -> Result<Vec<RunSummary>> {
                let path = self.out_dir.join(format!("{}.csv", pt.label));
                if run.repetitions == 1 {
                    let log = stamped(engine::run_with_reference(g, &pt.config, &reference)?, &self.hash);
                    write_log(&log, &path)?;
                    return Ok(vec![RunSummary {
                        label: pt.label.clone(),
                        path,
                        log,
                    }]);
                }
                let reps = engine::run_repeated(g, &pt.config, &reference, run.repetitions)?;
                let mut out = Vec::new();
                for (r, log) in reps.runs.into_iter().enumerate() {
                    let log = stamped(log, &self.hash);
                    let rep_path = self.out_dir.join(format!("{}_rep{r}.csv", pt.label));
                    write_log(&log, &rep_path)?;
                    out.push(RunSummary {
                        label: format!("{} rep {r}", pt.label),
                        path: rep_path,
                        log,
                    });
                }
                let aggregate = stamped(reps.aggregate, &self.hash);
                write_log(&aggregate, &path)?;
                out.push(RunSummary {
                    label: format!("{} mean of {}", pt.label, run.repetitions),
                    path,
                    log: aggregate,
                });
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(per_point.into_iter().flatten().collect())
    }
}

/// `run`: executes every sweep point and writes one CSV per run.
pub fn cmd_run(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<Vec<RunSummary>> {
    let run = cfg.run.as_ref().context("configuration has no [run] section")?;
    let exp = Experiment::new(cfg, out_override)?;
    exp.nmmc(run)
}

/// NMMC against one baseline run at equal query budget.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub nmmc: String,
    pub baseline: String,
    pub comparison: baselines::BudgetComparison,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineReport {
    pub runs: Vec<RunSummary>,
    pub comparisons: Vec<ComparisonRow>,
}

impl BaselineReport {
    pub fn lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self.runs.iter().map(RunSummary::line).collect();
        if !self.comparisons.is_empty() {
            let wins = self.comparisons.iter().filter(|c| c.comparison.nmmc_wins()).count();
            lines.push(format!(
                "NMMC lower TVD at equal query budget in {wins} of {} comparisons",
                self.comparisons.len()
            ));
        }
        lines
    }
}

fn baseline_runs(exp: &Experiment, b: &BaselineSection) -> Result<Vec<RunSummary>> {
    let g = &exp.prepared.graph;
    let target = target_spec(b.target, None, &exp.prepared.ids)?;
    let reference = exp.reference(&target)?;
    let cps = checkpoints(b.checkpoint_stride, b.checkpoints_per_decade);
    let variant = match b.method {
        BaselineMethod::MhMax => Some((MhVariant::MaxDegree, "mh-max")),
        BaselineMethod::MhSrw => Some((MhVariant::SimpleRandomWalk, "mh-srw")),
        BaselineMethod::Durw => None,
    };
    if let Some((variant, label)) = variant {
        let view = UndirectedView::new(g);
        let cfg = MhConfig {
            variant,
            agents: b.agents,
            steps: b.steps,
            seed: b.seed,
            checkpoints: cps,
        };
        let log = stamped(baselines::mh_run(&view, &reference, &cfg)?, &exp.hash);
        let path = exp.out_dir.join(format!("{label}.csv"));
        write_log(&log, &path)?;
        return Ok(vec![RunSummary {
            label: label.to_string(),
            path,
            log,
        }]);
    }
    let ws = b.w.as_ref().map(|x| x.values()).unwrap_or_default();
    let cs = b.c_jump.as_ref().map(|x| x.values()).unwrap_or_default();
    let grid: Vec<(f64, f64)> = ws.iter().flat_map(|&w| cs.iter().map(move |&c| (w, c))).collect();
    grid.par_iter()
        .map(|&(w, c_jump)| {
            let cfg = DurwConfig {
                w,
                c_jump,
                steps: b.steps,
                seed: b.seed,
                checkpoints: cps,
            };
            let (_, log) = baselines::durw_run(g, &reference, &cfg)?;
            let log = stamped(log, &exp.hash);
            let label = format!("durw_w{w}_c{c_jump}");
            let path = exp.out_dir.join(format!("{label}.csv"));
            write_log(&log, &path)?;
            Ok(RunSummary { label, path, log })
        })
        .collect()
}

/// `baseline`: runs the baseline and, when asked, the NMMC comparison.
pub fn cmd_baseline(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<BaselineReport> {
    let b = cfg.baseline.as_ref().context("configuration has no [baseline] section")?;
    let exp = Experiment::new(cfg, out_override)?;
    let mut runs = baseline_runs(&exp, b)?;
    let mut comparisons = Vec::new();
    if b.compare {
        let run = cfg.run.as_ref().context("comparison needs a [run] section")?;
        ensure!(run.repetitions == 1, "comparison uses single runs; set run.repetitions = 1");
        let nmmc = exp.nmmc(run)?;
        for n in &nmmc {
            for base in &runs {
                if let Some(comparison) = baselines::compare_at_budget(&n.log, &base.log) {
                    comparisons.push(ComparisonRow {
                        nmmc: n.label.clone(),
                        baseline: base.label.clone(),
                        comparison,
                    });
                }
            }
        }
        let path = exp.out_dir.join("comparison.csv");
        let mut out = BufWriter::new(create(&path)?);
        writeln!(out, "# config_hash={}", exp.hash)?;
        writeln!(out, "nmmc,baseline,budget,nmmc_tvd,baseline_tvd,nmmc_lower")?;
        for c in &comparisons {
            let k = &c.comparison;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.nmmc,
                c.baseline,
                k.budget,
                k.nmmc_tvd,
                k.baseline_tvd,
                k.nmmc_wins()
            )?;
        }
        out.flush()?;
        runs.extend(nmmc);
    }
    Ok(BaselineReport { runs, comparisons })
}

/// `slope`: log-log slope of TVD over the tail of a metrics file.
pub fn cmd_slope(path: &Path, tail_fraction: f64) -> Result<SlopeFit> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let log = MetricsLog::read_csv(file).with_context(|| format!("reading {}", path.display()))?;
    Ok(metrics::loglog_slope(&log, tail_fraction)?)
}
