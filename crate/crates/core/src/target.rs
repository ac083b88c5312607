//! Proposal chains and acceptance ratios whose transient kernel has a chosen
//! quasi-stationary distribution.
//!
//! With proposal `Q` and support sets `S_j = {k : Q_kj > 0}`, accepting a
//! proposed move `i → j` with probability `b_ij / c`, where
//!
//! ```text
//! b_ij = (π(j) / π(i)) · 1 / (Q_ij |S_j|)
//! ```
//!
//! and `c ≥ max b_ij`, gives the sub-stochastic kernel `P̃_ij = Q_ij b_ij / c`
//! the left Perron vector `π` with eigenvalue `1/c`. Taking `b_ij = A_ij / Q_ij`
//! instead makes `P̃ = A / c`, whose Perron vector is the eigenvector
//! centrality.

use rand::Rng;

use crate::graph::DirectedGraph;
use crate::oracle::{self, SparseOperator};
use crate::{Error, Result};

/// Smallest admissible target probability.
const MIN_TARGET_MASS: f64 = 1e-300;

/// Which distribution the walk should realize as its QSD.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetSpec {
    Uniform,
    /// `π(j) ∝ d_j⁻`.
    InDegree,
    /// Explicit positive probability vector over the working node set.
    Custom(Vec<f64>),
    /// Eigenvector centrality of the adjacency matrix.
    Evc,
}

impl TargetSpec {
    pub fn custom(pi: Vec<f64>) -> Result<Self> {
        validate_distribution(&pi)?;
        Ok(Self::Custom(pi))
    }

    /// The target as an explicit vector. `Evc` is resolved by power iteration.
    pub fn distribution(&self, g: &DirectedGraph, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = g.node_count();
        match self {
            Self::Uniform => Ok(vec![1.0 / n as f64; n]),
            Self::InDegree => {
                let total = g.edge_count() as f64;
                let pi: Vec<f64> = (0..n).map(|j| g.in_degree(j) as f64 / total).collect();
                validate_distribution(&pi)?;
                Ok(pi)
            }
            Self::Custom(pi) => {
                if pi.len() != n {
                    return Err(Error::LengthMismatch(pi.len(), n));
                }
                Ok(pi.clone())
            }
            Self::Evc => Ok(oracle::evc(g, tol, max_iter)?.vector),
        }
    }
}

fn validate_distribution(pi: &[f64]) -> Result<()> {
    if let Some(k) = pi.iter().position(|&x| !(x.is_finite() && x >= MIN_TARGET_MASS)) {
        return Err(Error::InvalidTarget(format!(
            "entry {k} = {} is not a positive probability",
            pi[k]
        )));
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(sum));
    }
    Ok(())
}

/// Seeds and follow probability of the teleporting proposal.
#[derive(Clone, Debug, PartialEq)]
pub struct Teleport {
    seeds: Vec<usize>,
    p_follow: f64,
}

impl Teleport {
    pub fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    pub fn p_follow(&self) -> f64 {
        self.p_follow
    }

    pub fn is_seed(&self, j: usize) -> bool {
        self.seeds.binary_search(&j).is_ok()
    }
}

/// The proposal walk `Q`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProposalChain {
    /// `Q_ij = A_ij / d_i⁺`.
    SimpleRandomWalk,
    /// Follow a uniform out-edge with probability `p_follow`, otherwise (and
    /// always at a dangling node) jump to a uniform seed.
    Teleporting(Teleport),
}

impl ProposalChain {
    pub fn teleporting(mut seeds: Vec<usize>, p_follow: f64) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::EmptySeeds);
        }
        if !(p_follow > 0.0 && p_follow < 1.0) {
            return Err(Error::Config(format!("p_follow must lie in (0, 1), got {p_follow}")));
        }
        seeds.sort_unstable();
        seeds.dedup();
        Ok(Self::Teleporting(Teleport { seeds, p_follow }))
    }

    /// Draws `j` with probability `Q_ij`.
    pub fn propose<R: Rng + ?Sized>(&self, g: &DirectedGraph, i: usize, rng: &mut R) -> Result<usize> {
        let out = g.out_neighbors(i);
        match self {
            Self::SimpleRandomWalk => {
                if out.is_empty() {
                    return Err(Error::Dangling(i));
                }
                Ok(out[rng.random_range(0..out.len())])
            }
            Self::Teleporting(t) => {
                if !out.is_empty() && rng.random::<f64>() < t.p_follow {
                    Ok(out[rng.random_range(0..out.len())])
                } else {
                    Ok(t.seeds[rng.random_range(0..t.seeds.len())])
                }
            }
        }
    }

    /// `Q_ij`.
    pub fn probability(&self, g: &DirectedGraph, i: usize, j: usize) -> f64 {
        let d = g.out_degree(i);
        match self {
            Self::SimpleRandomWalk => {
                if g.has_edge(i, j) {
                    1.0 / d as f64
                } else {
                    0.0
                }
            }
            Self::Teleporting(t) => {
                let s = t.seeds.len() as f64;
                let mut q = 0.0;
                if t.is_seed(j) {
                    q += if d == 0 { 1.0 / s } else { (1.0 - t.p_follow) / s };
                }
                if d > 0 && g.has_edge(i, j) {
                    q += t.p_follow / d as f64;
                }
                q
            }
        }
    }

    /// Targets `j` with `Q_ij > 0`, sorted.
    pub fn support_from(&self, g: &DirectedGraph, i: usize) -> Vec<usize> {
        match self {
            Self::SimpleRandomWalk => g.out_neighbors(i).to_vec(),
            Self::Teleporting(t) => {
                let mut v: Vec<usize> = g.out_neighbors(i).iter().chain(&t.seeds).copied().collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }

    /// `|S_j|`, the number of states that can propose `j`, given in-degrees.
    pub fn support_size_with(&self, g: &DirectedGraph, j: usize, in_degree: impl Fn(usize) -> f64) -> f64 {
        match self {
            Self::SimpleRandomWalk => in_degree(j),
            // Every node reaches a seed by teleporting; otherwise only
            // in-neighbors (which have d⁺ > 0 by definition) can propose j.
            Self::Teleporting(t) if t.is_seed(j) => g.node_count() as f64,
            Self::Teleporting(_) => in_degree(j),
        }
    }

    /// The full proposal matrix.
    pub fn kernel(&self, g: &DirectedGraph) -> Result<SparseOperator> {
        let mut entries = Vec::new();
        for i in 0..g.node_count() {
            for j in self.support_from(g, i) {
                entries.push((i, j, self.probability(g, i, j)));
            }
        }
        SparseOperator::new(g.node_count(), entries)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Rule {
    Uniform,
    InDegree,
    Custom(Vec<f64>),
    Evc,
    /// Explicit `b` per CSR edge slot (general support weights α).
    PerEdge(Vec<f64>),
}

/// Acceptance ratios `b_ij` and their exact normalizing constant.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptanceModel {
    rule: Rule,
    chain: ProposalChain,
    c_true: f64,
}

impl AcceptanceModel {
    /// Builds `b_ij` for `target` under `chain`, with uniform support weights
    /// `α_kj = 1/|S_j|`.
    pub fn build(g: &DirectedGraph, chain: &ProposalChain, target: &TargetSpec) -> Result<Self> {
        let n = g.node_count();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let rule = match target {
            TargetSpec::Uniform => Rule::Uniform,
            TargetSpec::InDegree => {
                if let Some(j) = (0..n).find(|&j| g.in_degree(j) == 0) {
                    return Err(Error::InvalidTarget(format!("node {j} has in-degree 0")));
                }
                Rule::InDegree
            }
            TargetSpec::Custom(pi) => {
                if pi.len() != n {
                    return Err(Error::LengthMismatch(pi.len(), n));
                }
                validate_distribution(pi)?;
                Rule::Custom(pi.clone())
            }
            TargetSpec::Evc => {
                if matches!(chain, ProposalChain::Teleporting(_)) {
                    return Err(Error::InvalidTarget(
                        "eigenvector centrality needs a strongly connected graph, not a teleporting proposal".into(),
                    ));
                }
                Rule::Evc
            }
        };
        if let ProposalChain::SimpleRandomWalk = chain {
            if let Some(i) = (0..n).find(|&i| g.out_degree(i) == 0) {
                return Err(Error::Dangling(i));
            }
        }
        let mut model = Self {
            rule,
            chain: chain.clone(),
            c_true: 0.0,
        };
        model.c_true = model.max_ratio(g);
        Ok(model)
    }

    /// Simple-random-walk proposal with general support weights: `alpha(k, j)`
    /// must be positive on every edge `k → j` and sum to one over each in-list.
    pub fn with_support_weights(
        g: &DirectedGraph,
        pi: &[f64],
        alpha: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let n = g.node_count();
        if pi.len() != n {
            return Err(Error::LengthMismatch(pi.len(), n));
        }
        validate_distribution(pi)?;
        for j in 0..n {
            let total: f64 = g.in_neighbors(j).iter().map(|&k| alpha(k, j)).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidTarget(format!("support weights into node {j} sum to {total}")));
            }
        }
        let mut per_edge = Vec::with_capacity(g.edge_count());
        for (i, j) in g.edges() {
            let a = alpha(i, j);
            if !(a > 0.0) {
                return Err(Error::InvalidTarget(format!("support weight α({i}, {j}) = {a}")));
            }
            per_edge.push(pi[j] / pi[i] * a * g.out_degree(i) as f64);
        }
        let c_true = per_edge.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            rule: Rule::PerEdge(per_edge),
            chain: ProposalChain::SimpleRandomWalk,
            c_true,
        })
    }

    pub fn chain(&self) -> &ProposalChain {
        &self.chain
    }

    /// `max b_ij` over all proposable pairs.
    pub fn c_true(&self) -> f64 {
        self.c_true
    }

    /// `b_ij` with exact in-degrees.
    pub fn ratio(&self, g: &DirectedGraph, i: usize, j: usize) -> f64 {
        self.ratio_with(g, i, j, |k| g.in_degree(k) as f64)
    }

    /// `b_ij` evaluated with caller-supplied in-degrees (e.g. online estimates).
    pub fn ratio_with(&self, g: &DirectedGraph, i: usize, j: usize, in_degree: impl Fn(usize) -> f64) -> f64 {
        let d_out = g.out_degree(i) as f64;
        match (&self.rule, &self.chain) {
            (Rule::Evc, _) => d_out,
            (Rule::PerEdge(b), _) => b[g.edge_index(i, j).expect("ratio queried off the edge set")],
            (Rule::Uniform, ProposalChain::SimpleRandomWalk) => d_out / in_degree(j),
            (Rule::InDegree, ProposalChain::SimpleRandomWalk) => d_out / in_degree(i),
            (Rule::Custom(pi), ProposalChain::SimpleRandomWalk) => pi[j] / pi[i] * d_out / in_degree(j),
            (rule, chain) => {
                let mass = match rule {
                    Rule::Uniform => 1.0,
                    Rule::InDegree => in_degree(j) / in_degree(i),
                    Rule::Custom(pi) => pi[j] / pi[i],
                    Rule::Evc | Rule::PerEdge(_) => unreachable!(),
                };
                mass / (chain.probability(g, i, j) * chain.support_size_with(g, j, &in_degree))
            }
        }
    }

    /// `γ_ij = min(1, b_ij / c)`.
    pub fn acceptance(&self, g: &DirectedGraph, i: usize, j: usize, c: f64) -> f64 {
        (self.ratio(g, i, j) / c).min(1.0)
    }

    fn max_ratio(&self, g: &DirectedGraph) -> f64 {
        let mut best = 0.0f64;
        for i in 0..g.node_count() {
            for j in self.chain.support_from(g, i) {
                best = best.max(self.ratio(g, i, j));
            }
        }
        best
    }
}

/// Sub-stochastic kernel `P̃_ij = Q_ij · min(1, b_ij / c_true)`.
pub fn transient_kernel(g: &DirectedGraph, model: &AcceptanceModel) -> Result<SparseOperator> {
    let chain = model.chain();
    let mut entries = Vec::new();
    for i in 0..g.node_count() {
        for j in chain.support_from(g, i) {
            let p = chain.probability(g, i, j) * model.acceptance(g, i, j, model.c_true());
            entries.push((i, j, p));
        }
    }
    SparseOperator::new(g.node_count(), entries)
}

/// Ergodic chain that follows `kernel` and, on absorption, restarts from `nu`:
/// `P^ν_ij = P̃_ij + P_i0 ν(j)` with `P_i0 = 1 − Σ_j P̃_ij`.
pub fn redistribution_kernel(kernel: &SparseOperator, nu: &[f64]) -> Result<SparseOperator> {
    let n = kernel.dim();
    if nu.len() != n {
        return Err(Error::LengthMismatch(nu.len(), n));
    }
    let mut entries: Vec<_> = kernel.entries().collect();
    for (i, sum) in kernel.row_sums().into_iter().enumerate() {
        let absorb = 1.0 - sum;
        if absorb > 0.0 {
            entries.extend(nu.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(j, &v)| (i, j, absorb * v)));
        }
    }
    SparseOperator::new(n, entries)
}
