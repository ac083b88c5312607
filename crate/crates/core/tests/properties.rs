use std::collections::{HashSet, VecDeque};

use nmmc_core::empirical::{EmpiricalMeasure, WeightSchedule};
use nmmc_core::engine::{RunConfig, Simulation};
use nmmc_core::graph::{largest_scc, random_strongly_connected, reachable_nodes, DirectedGraph};
use nmmc_core::metrics::tvd;
use nmmc_core::oracle::{left_leading_eigen, SparseOperator, DEFAULT_MAX_ITER, DEFAULT_TOL};
use nmmc_core::target::{transient_kernel, AcceptanceModel, ProposalChain, TargetSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn edge_lists(max_n: usize, max_edges: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_n).prop_flat_map(move |n| (Just(n), prop::collection::vec((0..n, 0..n), 0..=max_edges)))
}

fn scc_graph(seed: u64, n: usize, p: f64) -> DirectedGraph {
    random_strongly_connected(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn bfs(n: usize, start: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for u in next(v) {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("all zero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn degrees_match_brute_force((n, edges) in edge_lists(100, 400)) {
        let g = DirectedGraph::from_edges(n, edges.iter().copied()).unwrap();
        let distinct: HashSet<(usize, usize)> = edges.into_iter().filter(|(a, b)| a != b).collect();
        prop_assert_eq!(g.edge_count(), distinct.len());
        for v in 0..n {
            prop_assert_eq!(g.out_degree(v), distinct.iter().filter(|e| e.0 == v).count());
            prop_assert_eq!(g.in_degree(v), distinct.iter().filter(|e| e.1 == v).count());
        }
    }

    #[test]
    fn largest_scc_is_strongly_connected_and_idempotent((n, edges) in edge_lists(60, 200)) {
        let g = DirectedGraph::from_edges(n, edges).unwrap();
        let (h, map) = largest_scc(&g);
        let m = h.node_count();
        prop_assert!(m >= 1);
        let fwd = bfs(m, 0, |v| h.out_neighbors(v).to_vec());
        let bwd = bfs(m, 0, |v| h.in_neighbors(v).to_vec());
        prop_assert!(fwd.iter().all(|&x| x) && bwd.iter().all(|&x| x));
        let (h2, map2) = largest_scc(&h);
        prop_assert_eq!(&h2, &h);
        let composed = map.then(&map2);
        prop_assert_eq!(composed.ids(), map.ids());
    }

    #[test]
    fn reachable_set_is_closed((n, edges) in edge_lists(60, 150), raw_seeds in prop::collection::vec(0usize..1000, 1..5)) {
        let g = DirectedGraph::from_edges(n, edges).unwrap();
        let seeds: Vec<usize> = raw_seeds.into_iter().map(|s| s % n).collect();
        let nodes = reachable_nodes(&g, &seeds).unwrap();
        let set: HashSet<usize> = nodes.iter().copied().collect();
        prop_assert!(seeds.iter().all(|s| set.contains(s)));
        for &v in &nodes {
            prop_assert!(g.out_neighbors(v).iter().all(|u| set.contains(u)));
        }
    }

    #[test]
    fn transient_kernel_spectrum(seed in any::<u64>(), n in 2usize..30, target in 0usize..3) {
        let g = scc_graph(seed, n, 0.15);
        let spec = [TargetSpec::Uniform, TargetSpec::InDegree, TargetSpec::Evc][target].clone();
        let model = AcceptanceModel::build(&g, &ProposalChain::SimpleRandomWalk, &spec).unwrap();
        for (i, j) in g.edges() {
            let r = model.ratio(&g, i, j) / model.c_true();
            prop_assert!(r > 0.0 && r <= 1.0);
        }
        let p = transient_kernel(&g, &model).unwrap();
        let rows = p.row_sums();
        prop_assert!(rows.iter().all(|&r| r <= 1.0 + 1e-12));
        let res = left_leading_eigen(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let killed: f64 = res.vector.iter().zip(&rows).map(|(v, r)| v * (1.0 - r)).sum();
        prop_assert!((res.eigenvalue - (1.0 - killed)).abs() < 1e-9);
        let mut again = vec![0.0; n];
        p.left_mul(&res.vector, &mut again);
        let l: f64 = again.iter().sum();
        let drift: f64 = again.iter().zip(&res.vector).map(|(a, v)| (a / l - v).abs()).sum();
        prop_assert!(drift < 1e-9);
    }

    #[test]
    fn eigen_scales_with_operator(seed in any::<u64>(), n in 2usize..20, k in 0.01f64..100.0) {
        let g = scc_graph(seed, n, 0.3);
        let a = SparseOperator::adjacency(&g);
        let base = left_leading_eigen(&a, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let scaled = left_leading_eigen(&a.scaled(k).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert!((scaled.eigenvalue - k * base.eigenvalue).abs() < 1e-9 * k * base.eigenvalue);
        let d: f64 = base.vector.iter().zip(&scaled.vector).map(|(x, y)| (x - y).abs()).sum();
        prop_assert!(d < 1e-9);
    }

    #[test]
    fn measure_rescaling_preserves_distribution(visits in prop::collection::vec(0usize..8, 1..200), ln_k in -500.0f64..500.0, seed in any::<u64>()) {
        let mut m = EmpiricalMeasure::new(8);
        for &v in &visits {
            m.record(v, &WeightSchedule::Polynomial(2.0)).unwrap();
        }
        let mut r = m.clone();
        r.rescale(ln_k);
        let a = m.as_distribution().unwrap();
        let b = r.as_distribution().unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let x = m.sample(&mut r1).unwrap();
            let y = r.sample(&mut r2).unwrap();
            // Leaf boundaries can move by an ulp; only the support is guaranteed.
            prop_assert!(m.mass(y) > 0.0 && r.mass(x) > 0.0);
        }
    }

    #[test]
    fn sampling_stays_in_support(visits in prop::collection::vec(0usize..50, 1..40), seed in any::<u64>()) {
        let mut m = EmpiricalMeasure::new(50);
        for &v in &visits {
            m.record(v, &WeightSchedule::SubExponential).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            prop_assert!(visits.contains(&m.sample(&mut rng).unwrap()));
        }
    }

    #[test]
    fn tvd_is_a_metric((p, q, r) in (1usize..30).prop_flat_map(|n| (distribution(n), distribution(n), distribution(n)))) {
        let pq = tvd(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert_eq!(pq, tvd(&q, &p).unwrap());
        prop_assert_eq!(tvd(&p, &p).unwrap(), 0.0);
        prop_assert!(pq <= tvd(&p, &r).unwrap() + tvd(&r, &q).unwrap() + 1e-12);
    }

    #[test]
    fn tvd_equals_largest_event_gap(p in distribution(12), q in distribution(12)) {
        let mut best = 0.0f64;
        for mask in 0u32..(1 << 12) {
            let gap: f64 = (0..12).filter(|i| mask >> i & 1 == 1).map(|i| p[i] - q[i]).sum();
            best = best.max(gap.abs());
        }
        prop_assert!((tvd(&p, &q).unwrap() - best).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recursive_update_matches_batch_weights(
        path in prop::collection::vec(0usize..16, 1..10_000),
        schedule in prop_oneof![
            Just(WeightSchedule::Constant),
            (0.0f64..10.0).prop_map(WeightSchedule::Polynomial),
            Just(WeightSchedule::SubExponential),
        ],
    ) {
        let ln_w = |k: usize| match schedule {
            WeightSchedule::Constant => 0.0,
            WeightSchedule::Polynomial(a) => a * ((k + 1) as f64).ln(),
            WeightSchedule::SubExponential => (k as f64).sqrt() * 2f64.ln(),
        };
        let mut m = EmpiricalMeasure::new(16);
        let mut recursive = [0.0; 16];
        let mut ln_total = f64::NEG_INFINITY;
        let mut prev_eta = f64::INFINITY;
        for (k, &v) in path.iter().enumerate() {
            m.record(v, &schedule).unwrap();
            let lw = ln_w(k);
            ln_total = if ln_total == f64::NEG_INFINITY { lw } else { ln_total.max(lw) + (-(ln_total - lw).abs()).exp().ln_1p() };
            let eta = (lw - ln_total).exp();
            prop_assert!(eta <= prev_eta * (1.0 + 1e-12));
            prev_eta = eta;
            recursive.iter_mut().for_each(|x| *x *= 1.0 - eta);
            recursive[v] += eta;
        }
        let shift = (0..path.len()).map(ln_w).fold(f64::NEG_INFINITY, f64::max);
        let mut batch = [0.0; 16];
        for (k, &v) in path.iter().enumerate() {
            batch[v] += (ln_w(k) - shift).exp();
        }
        let total: f64 = batch.iter().sum();
        let got = m.as_distribution().unwrap();
        for i in 0..16 {
            prop_assert!((got[i] - batch[i] / total).abs() < 1e-12);
            prop_assert!((got[i] - recursive[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn redistribution_stays_on_visited_nodes(seed in any::<u64>(), n in 3usize..40, dynamic in any::<bool>()) {
        let g = scc_graph(seed, n, 0.1);
        let mut config = RunConfig::new(TargetSpec::InDegree, ProposalChain::SimpleRandomWalk);
        config.agents = 3;
        config.seed = seed;
        if dynamic {
            config.mode = nmmc_core::engine::Mode::Dynamic { p: 0.05 };
        }
        let mut sim = Simulation::new(&g, config).unwrap();
        let mut last_queries = sim.shared().unique_queries();
        for _ in 0..2000 {
            sim.step().unwrap();
            for a in sim.agents() {
                prop_assert!(sim.shared().is_visited(a.current));
            }
            let q = sim.shared().unique_queries();
            prop_assert!(q >= last_queries && q as usize <= n);
            last_queries = q;
        }
        for a in sim.agents() {
            for v in 0..n {
                prop_assert!(a.measure.mass(v) == 0.0 || sim.shared().is_visited(v));
            }
        }
    }
}
