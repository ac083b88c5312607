use rand::seq::SliceRandom;
use rand::Rng;

use super::DirectedGraph;

/// Random strongly connected digraph: a Hamiltonian cycle through a random
/// permutation, plus each remaining ordered pair independently with
/// probability `extra_edge_prob`.
pub fn random_strongly_connected<R: Rng + ?Sized>(
    n: usize,
    extra_edge_prob: f64,
    rng: &mut R,
) -> DirectedGraph {
    assert!(n >= 2, "need at least two nodes");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|k| (order[k], order[(k + 1) % n])).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < extra_edge_prob {
                edges.push((i, j));
            }
        }
    }
    DirectedGraph::from_edges(n, edges).expect("indices in range")
}

/// Sparse random digraph with skewed degrees: every node draws
/// `1 + Geometric` out-edges with the given mean, and targets are picked with
/// probability proportional to a per-node Pareto attractiveness.
pub fn random_digraph<R: Rng + ?Sized>(n: usize, mean_out_degree: f64, rng: &mut R) -> DirectedGraph {
    assert!(n >= 2 && mean_out_degree >= 1.0);
    let attractiveness: Vec<f64> = (0..n)
        .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 1.5))
        .collect();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for a in &attractiveness {
        acc += a;
        cumulative.push(acc);
    }
    let stop = 1.0 / mean_out_degree;
    let mut edges = Vec::new();
    for i in 0..n {
        loop {
            let x = rng.random::<f64>() * acc;
            let j = cumulative.partition_point(|&c| c <= x).min(n - 1);
            edges.push((i, j));
            if rng.random::<f64>() < stop {
                break;
            }
        }
    }
    DirectedGraph::from_edges(n, edges).expect("indices in range")
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn generated_graphs_are_strongly_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..40 {
            let g = random_strongly_connected(n, 0.1, &mut rng);
            assert!(g.is_strongly_connected());
        }
    }

    #[test]
    fn skewed_digraph_has_requested_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_digraph(5000, 4.0, &mut rng);
        let mean = g.edge_count() as f64 / 5000.0;
        assert!((3.0..4.5).contains(&mean), "mean out-degree {mean}");
    }
}
