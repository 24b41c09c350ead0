use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qng::coefficients::{propagate_all, CoefficientTable, PropagationOptions};
use qng::filter::run_game;
use qng::game::{
    best_response_scalar, coordination_spec, cournot_spec, utility_scalar, GameSpec, QuadraticGame, VectorGameSpec,
};
use qng::graph::NetworkGraph;
use qng::linalg::{max_abs_diff, min_eigenvalue};
use qng::oracle::{self, BatchCheck};

fn jsonl(table: &CoefficientTable) -> Vec<u8> {
    let mut out = Vec::new();
    table.write_jsonl(&mut out).unwrap();
    out
}

fn is_connected(g: &NetworkGraph) -> bool {
    let n = g.n_agents();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in g.neighbors(i).unwrap() {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn check_simple_sorted(g: &NetworkGraph) {
    for i in 0..g.n_agents() {
        let nb = g.neighbors(i).unwrap();
        assert!(
            nb.windows(2).all(|w| w[0] < w[1]),
            "neighbors of {i} not strictly sorted"
        );
        assert!(!nb.contains(&i), "self loop at {i}");
        for &j in nb {
            assert!(g.neighbors(j).unwrap().contains(&i), "edge {i}-{j} not symmetric");
        }
    }
}

/// Golden-section maximizer of a concave function on `[lo, hi]`, polished
/// by one parabolic vertex step through points one unit apart.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-9 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let c = 0.5 * (lo + hi);
    let (fl, fc, fr) = (f(c - 1.0), f(c), f(c + 1.0));
    c + 0.5 * (fl - fr) / (fl - 2.0 * fc + fr)
}

fn scalar_game(n: usize, raw: &[f64], delta: f64, noise: &[f64], theta: f64, dominance: f64) -> GameSpec {
    let mut beta = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { raw[i * n + j] });
    for i in 0..n {
        let row: f64 = beta.row(i).iter().map(|v| v.abs()).sum();
        if row > 0.0 {
            beta.row_mut(i).scale_mut(dominance / row);
        }
    }
    GameSpec::new(beta, delta, DVector::from_row_slice(&noise[..n]), theta).unwrap()
}

#[test]
fn path_and_cycle_diameters() {
    for k in 2..=10 {
        assert_eq!(NetworkGraph::path(k).unwrap().diameter(), k - 1);
    }
    for k in 2..=10 {
        assert_eq!(NetworkGraph::ring(2 * k).unwrap().diameter(), k);
    }
}

#[test]
fn coefficient_table_ignores_state_and_signals() {
    let g = NetworkGraph::path(5).unwrap();
    let low = cournot_spec(12.0, 0.0, vec![1.0; 5], 5).unwrap();
    let high = cournot_spec(40.0, 3.0, vec![1.0; 5], 5).unwrap();
    let a = propagate_all(&low, &g, 6, PropagationOptions::default()).unwrap();
    let b = propagate_all(&high, &g, 6, PropagationOptions::default()).unwrap();
    assert_eq!(jsonl(&a), jsonl(&b));
    // Two signal draws replay the same table.
    let s1 = low.draw_signals(1);
    let s2 = low.draw_signals(2);
    assert_ne!(s1.stacked(), s2.stacked());
    let t1 = run_game(&a, &g, &s1).unwrap();
    let t2 = run_game(&a, &g, &s2).unwrap();
    assert_eq!(t1.horizon(), t2.horizon());
}

#[test]
fn table_is_independent_of_thread_count() {
    let g = NetworkGraph::erdos_renyi(8, 0.4, 3).unwrap();
    let spec = cournot_spec(12.0, 0.0, (0..8).map(|i| 0.5 + i as f64 * 0.25).collect(), 8).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| propagate_all(&spec, &g, 5, PropagationOptions::default()).unwrap())
    };
    assert_eq!(jsonl(&run(1)), jsonl(&run(4)));
}

#[test]
fn scalar_game_as_vector_game_gives_the_same_table() {
    let g = NetworkGraph::ring(5).unwrap();
    let spec = scalar_game(5, &[0.3; 25], 0.8, &[1.0, 2.0, 0.5, 1.5, 1.0], 2.0, 0.6);
    let scalar = propagate_all(&spec, &g, 4, PropagationOptions::default()).unwrap();
    let vector = propagate_all(&spec.to_vector(), &g, 4, PropagationOptions::default()).unwrap();
    for t in 0..=4 {
        for i in 0..5 {
            let (a, b) = (scalar.agent(i, t), vector.agent(i, t));
            assert!(max_abs_diff(&a.action, &b.action) < 1e-12);
            assert!(max_abs_diff(&a.state.m_xx, &b.state.m_xx) < 1e-12);
            assert!(max_abs_diff(&a.state.q, &b.state.q) < 1e-12);
        }
    }
}

#[test]
fn decoupled_vector_game_plays_its_estimate() {
    let n = 4;
    let m = 2;
    let coupling = vec![vec![DMatrix::zeros(m, m); n]; n];
    let noise = (0..n)
        .map(|i| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 + i as f64, 0.5])))
        .collect();
    let spec = VectorGameSpec::new(
        coupling,
        DMatrix::identity(m, m),
        noise,
        DVector::from_vec(vec![1.0, -2.0]),
    )
    .unwrap();
    let g = NetworkGraph::star(n, 0).unwrap();
    let table = propagate_all(&spec, &g, 3, PropagationOptions::default()).unwrap();
    for t in 0..=3 {
        for i in 0..n {
            let rec = table.agent(i, t);
            assert!(max_abs_diff(&rec.weights, &rec.state.q) < 1e-10);
        }
    }
}

#[test]
fn coordination_coefficients_are_permutation_symmetric() {
    let n = 3;
    let noise = vec![DMatrix::identity(2, 2); n];
    let spec = coordination_spec(0.5, noise, n, DVector::from_vec(vec![10.0, 20.0])).unwrap();
    let g = NetworkGraph::complete(n).unwrap();
    let table = propagate_all(&spec, &g, 0, PropagationOptions::default()).unwrap();
    let m = 2;
    // Swapping agents i and j maps U_i onto U_j.
    for i in 0..n {
        for j in 0..n {
            let ui = &table.agent(i, 0).action;
            let uj = &table.agent(j, 0).action;
            // Signal columns are component-major: index k·N + agent.
            let swap = |b: usize| {
                if b == i {
                    j
                } else if b == j {
                    i
                } else {
                    b
                }
            };
            let permuted = DMatrix::from_fn(m, n * m, |r, c| ui[(r, (c / n) * n + swap(c % n))]);
            assert!(max_abs_diff(&permuted, uj) < 1e-12, "agents {i} and {j}");
        }
    }
}

#[test]
fn run_game_is_deterministic() {
    let g = NetworkGraph::geometric(12, 2.0, 0.9, 5).unwrap();
    let spec = cournot_spec(12.0, 0.0, vec![1.0; 12], 12).unwrap();
    let once = || {
        let table = propagate_all(&spec, &g, 6, PropagationOptions::default()).unwrap();
        let traj = run_game(&table, &g, &spec.draw_signals(9)).unwrap();
        let mut csv = Vec::new();
        traj.write_actions_csv(&mut csv).unwrap();
        (jsonl(&table), csv)
    };
    assert_eq!(once(), once());
}

#[test]
fn cournot_benchmarks_stop_learning_after_convergence() {
    let graphs = [
        NetworkGraph::path(5).unwrap(),
        NetworkGraph::star(5, 4).unwrap(),
        NetworkGraph::ring(10).unwrap(),
    ];
    for g in graphs {
        let n = g.n_agents();
        let spec = cournot_spec(12.0, 0.0, vec![1.0; n], n).unwrap();
        let table = propagate_all(&spec, &g, 10, PropagationOptions::default()).unwrap();
        let traj = run_game(&table, &g, &spec.draw_signals(1)).unwrap();
        let conv = traj.convergence_step(1e-6).expect("converges");
        assert!(conv <= g.diameter());
        for t in conv..10 {
            for i in 0..n {
                let update = table.agent(i, t).update.as_ref().unwrap();
                assert_eq!(update.gains.state.amax(), 0.0);
                assert_eq!(update.gains.theta.amax(), 0.0);
                assert!(traj.step(t).innovations.as_ref().unwrap()[i].amax() < 1e-12);
                assert_eq!(traj.step(t).beliefs[i].mean_x, traj.step(t + 1).beliefs[i].mean_x);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_graphs_are_connected_simple_and_sorted(n in 2usize..30, seed in any::<u64>(), p in 0.15f64..1.0) {
        if let Ok(g) = NetworkGraph::erdos_renyi(n, p, seed) {
            prop_assert!(is_connected(&g));
            check_simple_sorted(&g);
            let again = NetworkGraph::erdos_renyi(n, p, seed).unwrap();
            prop_assert_eq!(g.edges(), again.edges());
        }
        if let Ok(g) = NetworkGraph::geometric(n, 2.0, 1.2, seed) {
            prop_assert!(is_connected(&g));
            check_simple_sorted(&g);
            let again = NetworkGraph::geometric(n, 2.0, 1.2, seed).unwrap();
            prop_assert_eq!(g.edges(), again.edges());
        }
    }

    #[test]
    fn edge_lists_round_trip(n in 2usize..12, extra in proptest::collection::vec((0usize..12, 0usize..12), 0..20)) {
        // A path backbone keeps the graph connected.
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        for (a, b) in extra {
            let fresh = !edges.iter().any(|&(u, v)| (u, v) == (a, b) || (v, u) == (a, b));
            if a < n && b < n && a != b && fresh {
                edges.push((a, b));
            }
        }
        let g = NetworkGraph::from_edges(n, &edges).unwrap();
        check_simple_sorted(&g);
        for &(a, b) in &edges {
            prop_assert!(g.neighbors(a).unwrap().contains(&b));
        }
        let rebuilt = NetworkGraph::from_edges(n, g.edges()).unwrap();
        prop_assert_eq!(rebuilt.edges(), g.edges());
    }

    #[test]
    fn scalar_utility_has_unit_curvature(
        n in 2usize..6,
        raw in proptest::collection::vec(-1.0f64..1.0, 36),
        actions in proptest::collection::vec(-10.0f64..10.0, 6),
        theta in -10.0f64..10.0,
        h in 0.01f64..3.0,
        i in 0usize..6,
    ) {
        let i = i % n;
        let spec = scalar_game(n, &raw, 0.7, &[1.0; 6], 0.0, 0.9);
        let at = |d: f64| {
            let mut a = actions[..n].to_vec();
            a[i] += d;
            utility_scalar(&spec, i, &a, theta)
        };
        let second = at(h) - 2.0 * at(0.0) + at(-h);
        let scale = at(0.0).abs().max(1.0);
        prop_assert!((second + h * h).abs() < 1e-12 * scale * 10.0);
    }

    #[test]
    fn best_response_maximizes_utility(
        n in 2usize..6,
        raw in proptest::collection::vec(-1.0f64..1.0, 36),
        actions in proptest::collection::vec(-10.0f64..10.0, 6),
        theta in -10.0f64..10.0,
        i in 0usize..6,
    ) {
        let i = i % n;
        let spec = scalar_game(n, &raw, 1.3, &[1.0; 6], 0.0, 0.9);
        let u = |ai: f64| {
            let mut a = actions[..n].to_vec();
            a[i] = ai;
            utility_scalar(&spec, i, &a, theta)
        };
        let found = golden_max(u, -100.0, 100.0);
        let exact = best_response_scalar(&spec, i, &actions[..n], theta);
        prop_assert!((found - exact).abs() < 1e-8, "golden {found} vs {exact}");
    }

    #[test]
    fn random_games_satisfy_filter_invariants(
        n in 2usize..6,
        raw in proptest::collection::vec(-1.0f64..1.0, 36),
        noise in proptest::collection::vec(0.2f64..3.0, 6),
        delta in 0.2f64..2.0,
        dominance in 0.0f64..0.95,
        horizon in 1usize..6,
        graph_seed in 0u64..1000,
        signal_seed in any::<u64>(),
    ) {
        let spec = scalar_game(n, &raw, delta, &noise, 5.0, dominance);
        let graph = NetworkGraph::erdos_renyi(n, 0.6, graph_seed).unwrap();
        let table = propagate_all(&spec, &graph, horizon, PropagationOptions::default()).unwrap();
        prop_assert!(table.max_residual() < 1e-9);
        for i in 0..n {
            for t in 0..=horizon {
                let s = &table.agent(i, t).state;
                prop_assert!(min_eigenvalue(&s.m_xx) > -1e-8);
                if t > 0 {
                    let prev = &table.agent(i, t - 1).state;
                    prop_assert!(s.m_xx.trace() <= prev.m_xx.trace() + 1e-9);
                    prop_assert!(s.m_thth[(0, 0)] <= prev.m_thth[(0, 0)] + 1e-9);
                }
            }
        }
        let signals = spec.draw_signals(signal_seed);
        let traj = run_game(&table, &graph, &signals).unwrap();
        let report = oracle::verify(&traj, &table, &signals, &spec, &graph, BatchCheck::All);
        prop_assert!(report.max_action_gap < 1e-9, "clairvoyant gap {}", report.max_action_gap);
        prop_assert!(report.max_batch_gap.unwrap() < 1e-8, "batch gap {:?}", report.max_batch_gap);
    }
}
