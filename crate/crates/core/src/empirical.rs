//! Weighted historical empirical measure of a walk.
//!
//! After steps `0..=t` the measure is `Σ_k w_k δ_{Z_k} / Σ_k w_k`. It is kept
//! as accumulated raw weights in a sum tree, which makes both recording a
//! visit and drawing a node proportionally to its mass `O(log n)`.
//! Accumulating raw weights is algebraically the same as the recursive update
//! `μ̂_t = (1 − η_t) μ̂_{t−1} + η_t δ_{Z_t}` with `η_t = w_t / W_t`.

use rand::Rng;

use crate::{Error, Result};

/// Stored masses are renormalized once the total would pass this value.
const RESCALE_ABOVE: f64 = 1e300;

/// Per-step visit weight `w_k`, `k ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightSchedule {
    /// `w_k = 1`.
    Constant,
    /// `w_k = (k + 1)^α`. Shifted by one so that `w_0 > 0`.
    Polynomial(f64),
    /// `w_k = 2^√k`.
    SubExponential,
}

impl WeightSchedule {
    pub fn ln_weight(&self, k: u64) -> f64 {
        match *self {
            Self::Constant => 0.0,
            Self::Polynomial(alpha) => alpha * ((k + 1) as f64).ln(),
            Self::SubExponential => (k as f64).sqrt() * std::f64::consts::LN_2,
        }
    }

    pub fn weight(&self, k: u64) -> f64 {
        self.ln_weight(k).exp()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Polynomial(alpha) if !(alpha.is_finite() && alpha >= 0.0) => {
                Err(Error::Config(format!("polynomial exponent must be finite and >= 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }
}

/// How per-agent measures are combined into one distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MergeMode {
    /// Sum raw masses across agents, then normalize.
    #[default]
    Pooled,
    /// Average the per-agent normalized distributions.
    Averaged,
}

#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    /// Implicit binary sum tree; leaves start at `leaves`, root at index 1.
    tree: Vec<f64>,
    leaves: usize,
    n: usize,
    /// Raw mass = stored mass × exp(ln_scale).
    ln_scale: f64,
    steps: u64,
}

impl EmpiricalMeasure {
    /// Empty measure awaiting its first visit.
    pub fn new(n: usize) -> Self {
        let leaves = n.max(1).next_power_of_two();
        Self {
            tree: vec![0.0; 2 * leaves],
            leaves,
            n,
            ln_scale: 0.0,
            steps: 0,
        }
    }

    /// Measure with an arbitrary initial distribution `μ̂₀`, given as
    /// unnormalized `(node, mass)` pairs. It stands in for step 0, so the
    /// next visit is recorded with `w_1`.
    pub fn with_initial(n: usize, seed: &[(usize, f64)]) -> Result<Self> {
        let mut m = Self::new(n);
        let mut total = 0.0;
        for &(node, mass) in seed {
            if node >= n {
                return Err(Error::NodeOutOfRange { node, n });
            }
            if !(mass.is_finite() && mass >= 0.0) {
                return Err(Error::InvalidTarget(format!("initial mass {mass} on node {node}")));
            }
            total += mass;
        }
        if !(total > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        for &(node, mass) in seed {
            m.tree[m.leaves + node] += mass / total;
        }
        m.rebuild();
        m.steps = 1;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        !(self.total() > 0.0)
    }

    /// Number of recorded steps (the initial measure counts as one).
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Total stored mass.
    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    /// Stored (scaled) mass of `node`.
    pub fn mass(&self, node: usize) -> f64 {
        self.tree[self.leaves + node]
    }

    /// Natural log of the factor between stored and raw masses.
    pub fn ln_scale(&self) -> f64 {
        self.ln_scale
    }

    /// Adds `w_t` to `node`, where `t` is the current step count.
    pub fn record(&mut self, node: usize, schedule: &WeightSchedule) -> Result<()> {
        if node >= self.n {
            return Err(Error::NodeOutOfRange { node, n: self.n });
        }
        let ln_w = schedule.ln_weight(self.steps);
        let mut w = (ln_w - self.ln_scale).exp();
        let total = self.total();
        if !(total + w <= RESCALE_ABOVE) {
            let rel = ln_w - self.ln_scale;
            let ln_new_total = if total > 0.0 { ln_add_exp(rel, total.ln()) } else { rel };
            self.rescale(ln_new_total);
            w = (ln_w - self.ln_scale).exp();
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::WeightOverflow(self.steps));
        }
        let leaf = self.leaves + node;
        self.tree[leaf] += w;
        self.propagate(leaf);
        self.steps += 1;
        Ok(())
    }

    /// Draws a node with probability proportional to its mass.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        let mut x = rng.random::<f64>() * total;
        if x >= total {
            x = f64::from_bits(total.to_bits() - 1);
        }
        let mut idx = 1;
        while idx < self.leaves {
            let left = self.tree[2 * idx];
            let right = self.tree[2 * idx + 1];
            // Only descend into subtrees with positive mass.
            if left > 0.0 && (x < left || !(right > 0.0)) {
                idx *= 2;
            } else {
                x -= left;
                idx = 2 * idx + 1;
            }
        }
        Ok(idx - self.leaves)
    }

    /// Normalized measure.
    pub fn as_distribution(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        Ok(self.tree[self.leaves..self.leaves + self.n].iter().map(|m| m / total).collect())
    }

    /// Relative gap between the cached total and a fresh sum of the leaves.
    pub fn audit(&self) -> f64 {
        let fresh: f64 = self.tree[self.leaves..self.leaves + self.n].iter().sum();
        if fresh == 0.0 {
            return self.total().abs();
        }
        ((self.total() - fresh) / fresh).abs()
    }

    /// Divides every stored mass by `exp(ln_factor)`.
    pub fn rescale(&mut self, ln_factor: f64) {
        let k = (-ln_factor).exp();
        for leaf in &mut self.tree[self.leaves..] {
            *leaf *= k;
        }
        self.ln_scale += ln_factor;
        self.rebuild();
    }

    fn propagate(&mut self, mut idx: usize) {
        while idx > 1 {
            idx /= 2;
            self.tree[idx] = self.tree[2 * idx] + self.tree[2 * idx + 1];
        }
    }

    fn rebuild(&mut self) {
        for idx in (1..self.leaves).rev() {
            self.tree[idx] = self.tree[2 * idx] + self.tree[2 * idx + 1];
        }
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Combines several measures over the same node set into one distribution.
pub fn merge(measures: &[EmpiricalMeasure], mode: MergeMode) -> Result<Vec<f64>> {
    let first = measures.first().ok_or(Error::EmptyMeasure)?;
    let n = first.len();
    if let Some(m) = measures.iter().find(|m| m.len() != n) {
        return Err(Error::LengthMismatch(m.len(), n));
    }
    let live: Vec<&EmpiricalMeasure> = measures.iter().filter(|m| !m.is_empty()).collect();
    if live.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut out = vec![0.0; n];
    match mode {
        MergeMode::Pooled => {
            let ln_ref = live.iter().map(|m| m.ln_scale + m.total().ln()).fold(f64::NEG_INFINITY, f64::max);
            for m in &live {
                let k = (m.ln_scale - ln_ref).exp();
                for (o, i) in out.iter_mut().zip(0..n) {
                    *o += m.mass(i) * k;
                }
            }
        }
        MergeMode::Averaged => {
            for m in &live {
                let total = m.total();
                for (o, i) in out.iter_mut().zip(0..n) {
                    *o += m.mass(i) / total;
                }
            }
        }
    }
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    Ok(out)
}
