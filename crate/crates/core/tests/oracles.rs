//! Cross-checks against oracles computed independently of the library's
//! own solvers: brute-force path enumeration, test-local policy iteration,
//! closed forms and Monte Carlo.

use std::collections::HashMap;

use approx::assert_abs_diff_eq;
use covertime_core::graph::{
    make_binary_tree, make_cycle, make_path, make_random_regular, make_torus, Ball, Graph, Region,
};
use covertime_core::green::{exit_distribution, green_table};
use covertime_core::mdp::{self, Model};
use covertime_core::walk::{
    self, cover_tail_exact, cover_time_sample, killed_visit_sample, policy_visit_moments,
    simulate_policy_walk, simulate_srw, tail_probability_mc, tail_probability_splitting,
    UniformPolicy, SAFETY_CAP,
};
use covertime_core::Execution;

/// `P(τ_cov ≤ T)` by summing over every path of length `T`.
fn brute_force_tail(g: &Graph, start: usize, horizon: usize) -> f64 {
    fn go(g: &Graph, at: usize, left: usize, seen: u64, full: u64, p: f64) -> f64 {
        if seen == full {
            return p;
        }
        if left == 0 {
            return 0.0;
        }
        let nb = g.neighbors(at);
        nb.iter()
            .map(|&x| go(g, x, left - 1, seen | 1 << x, full, p / nb.len() as f64))
            .sum()
    }
    go(g, start, horizon, 1 << start, (1 << g.n()) - 1, 1.0)
}

#[test]
fn exact_tail_matches_path_enumeration() {
    let cases = [
        (make_cycle(5).unwrap(), 0, 8),
        (make_path(5).unwrap(), 2, 9),
        (make_binary_tree(2).unwrap(), 3, 9),
        (make_random_regular(8, 3, 1).unwrap(), 0, 9),
        (make_cycle(3).unwrap(), 0, 2),
    ];
    for (g, start, horizon) in cases {
        for t in 0..=horizon {
            assert_abs_diff_eq!(
                cover_tail_exact(&g, start, t).unwrap(),
                brute_force_tail(&g, start, t),
                epsilon = 1e-12
            );
        }
    }
}

#[test]
fn expected_cover_time_of_triangle() {
    // One step covers a second vertex; each later step finds the third with
    // probability 1/2, so E τ_cov = 1 + 2 = 3.
    let g = make_cycle(3).unwrap();
    let exact: f64 = (0..200).map(|t| 1.0 - cover_tail_exact(&g, 0, t).unwrap()).sum();
    assert_abs_diff_eq!(exact, 3.0, epsilon = 1e-9);
    let samples = 100_000;
    let times = Execution::default()
        .moments(samples, |i| cover_time_sample(&g, 0, 77, i).unwrap() as f64);
    assert!((times.mean() - 3.0).abs() <= 3.0 * times.std_error(), "{times:?}");
}

#[test]
fn path_middle_needs_three_steps() {
    let g = make_path(3).unwrap();
    for i in 0..200 {
        assert!(cover_time_sample(&g, 1, 5, i).unwrap() >= 3);
    }
}

#[test]
fn neighbor_frequencies_are_uniform() {
    let g = make_random_regular(12, 3, 2).unwrap();
    let traj = simulate_srw(&g, 0, 1234, 300_000);
    let mut from0: HashMap<usize, u64> = HashMap::new();
    let mut total = 0;
    for w in traj.steps.windows(2) {
        if w[0] == 0 {
            *from0.entry(w[1]).or_default() += 1;
            total += 1;
        }
    }
    let sigma = (total as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for &y in g.neighbors(0) {
        let k = from0[&y] as f64;
        assert!((k - total as f64 / 3.0).abs() <= 3.0 * sigma, "{from0:?}");
    }
}

#[test]
fn local_times_sum_to_elapsed_time() {
    let g = make_torus(4, 2).unwrap();
    let traj = simulate_srw(&g, 3, 9, 500);
    for t in [0, 1, 17, 250, 501] {
        let total: usize = traj.local_times(g.n(), t).iter().sum();
        assert_eq!(total, t.min(traj.steps.len()));
    }
}

#[test]
fn monte_carlo_interval_contains_exact_tail() {
    let g = make_cycle(3).unwrap();
    let est = tail_probability_mc(&g, 0, 2, 100_000, 8).unwrap();
    assert!(est.contains(0.5), "{est:?}");

    let g = make_cycle(12).unwrap();
    let exact = cover_tail_exact(&g, 0, 12).unwrap();
    let est = tail_probability_mc(&g, 0, 12, 100_000, 21).unwrap();
    assert!(est.contains(exact), "{exact} vs {est:?}");
}

#[test]
fn splitting_agrees_with_exact_tail() {
    let g = make_cycle(12).unwrap();
    let exact = cover_tail_exact(&g, 0, 12).unwrap();
    let est = tail_probability_splitting(&g, 0, 12, &[4, 7, 10, 12], 2000, 5).unwrap();
    assert!(est.contains(exact), "{exact} vs {est:?}");
    assert!(!est.level_unreachable);

    let g = make_cycle(8).unwrap();
    let one = tail_probability_splitting(&g, 0, 8, &[8], 20_000, 1).unwrap();
    let mc = tail_probability_mc(&g, 0, 8, 20_000, 2).unwrap();
    assert!(one.ci_low() <= mc.ci_high() && mc.ci_low() <= one.ci_high());
}

#[test]
fn mc_and_exact_agree_on_small_corpus() {
    for g in [make_path(6).unwrap(), make_binary_tree(2).unwrap(), make_torus(3, 2).unwrap()] {
        let t = 2 * g.n();
        let exact = cover_tail_exact(&g, 0, t).unwrap();
        let est = tail_probability_mc(&g, 0, t, 100_000, 1).unwrap();
        assert!(est.contains(exact), "{exact} vs {est:?}");
    }
}

#[test]
fn green_values_match_killed_walks() {
    let g = make_torus(4, 2).unwrap();
    let ball = Ball::new(&g, 0, 2).unwrap();
    let table = green_table(&g, 0, 2).unwrap();
    for &(w, a) in &table.annulus_values {
        let m = Execution::default()
            .moments(40_000, |i| killed_visit_sample(&g, &ball, w, 3, i).unwrap() as f64);
        assert!((m.mean() - a).abs() <= 3.0 * m.std_error() + 1e-12, "{w}: {a} vs {m:?}");
    }
}

#[test]
fn green_edge_identity_by_exit_distribution() {
    // d_w a^v_w(r) = d_v P_v(first annulus hit is w); the right side comes
    // from separate absorbing-chain solves.
    for (g, v, r) in [
        (make_binary_tree(3).unwrap(), 1, 2),
        (make_random_regular(12, 3, 2).unwrap(), 5, 1),
        (make_path(9).unwrap(), 4, 3),
    ] {
        let table = green_table(&g, v, r).unwrap();
        let exits = exit_distribution(&g, v, r).unwrap();
        assert_abs_diff_eq!(exits.iter().map(|e| e.1).sum::<f64>(), 1.0, epsilon = 1e-9);
        for (w, p) in exits {
            let a = table.annulus_value(w).unwrap();
            assert_abs_diff_eq!(g.degree(w) as f64 * a, g.degree(v) as f64 * p, epsilon = 1e-9);
        }
    }
}

/// Minimal cover values by policy iteration on a state space built here
/// from scratch, with dense Gaussian elimination for policy evaluation.
fn policy_iteration(g: &Graph, v: usize, r: usize) -> HashMap<(usize, u64), f64> {
    let dist = g.distances_from(v);
    let members: Vec<usize> = (0..g.n()).filter(|&w| dist[w] <= r).collect();
    let bit = |w: usize| members.iter().position(|&m| m == w);
    let full = (1u64 << members.len()) - 1;
    let step = |m: u64, w: usize| bit(w).map_or(m, |b| m | 1 << b);
    let terminal = |x: usize, m: u64| dist[x] > r && m == full;

    let mut index = HashMap::new();
    let mut states = Vec::new();
    let mut stack: Vec<(usize, u64)> = (0..g.n()).filter(|&x| dist[x] > r).map(|x| (x, 0)).collect();
    while let Some(s) = stack.pop() {
        if terminal(s.0, s.1) || index.contains_key(&s) {
            continue;
        }
        index.insert(s, states.len());
        states.push(s);
        for &y in g.neighbors(s.0) {
            stack.push((y, step(s.1, y)));
        }
    }
    let k = states.len();

    let evaluate = |policy: &[Option<usize>]| -> Vec<f64> {
        let mut a = vec![vec![0.0; k + 1]; k];
        for (i, &(x, m)) in states.iter().enumerate() {
            a[i][i] = 1.0;
            a[i][k] = if x == v { 1.0 } else { 0.0 };
            let moves: Vec<usize> = match policy[i] {
                Some(y) => vec![y],
                None => g.neighbors(x).to_vec(),
            };
            for &y in &moves {
                let next = (y, step(m, y));
                if let Some(&j) = index.get(&next) {
                    a[i][j] -= 1.0 / moves.len() as f64;
                }
            }
        }
        for c in 0..k {
            let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            for i in 0..k {
                if i != c {
                    let f = a[i][c] / a[c][c];
                    if f != 0.0 {
                        for j in c..=k {
                            a[i][j] -= f * a[c][j];
                        }
                    }
                }
            }
        }
        (0..k).map(|i| a[i][k] / a[i][i]).collect()
    };

    // Start from the simple random walk, which is proper.
    let mut policy: Vec<Option<usize>> = vec![None; k];
    let mut values = evaluate(&policy);
    loop {
        let value_of = |y: usize, m: u64, values: &[f64]| {
            let next = (y, step(m, y));
            if terminal(next.0, next.1) { 0.0 } else { values[index[&next]] }
        };
        let mut changed = false;
        for (i, &(x, m)) in states.iter().enumerate() {
            if dist[x] <= r {
                continue;
            }
            let current = match policy[i] {
                Some(y) => value_of(y, m, &values),
                None => {
                    let nb = g.neighbors(x);
                    nb.iter().map(|&y| value_of(y, m, &values)).sum::<f64>() / nb.len() as f64
                }
            };
            let (best_y, best) = g
                .neighbors(x)
                .iter()
                .map(|&y| (y, value_of(y, m, &values)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if best < current - 1e-12 {
                policy[i] = Some(best_y);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        values = evaluate(&policy);
    }
    states.into_iter().zip(values).collect()
}

#[test]
fn mdp_values_match_policy_iteration() {
    let cases = [
        (make_path(4).unwrap(), 0, 1),
        (make_path(7).unwrap(), 3, 1),
        (make_cycle(6).unwrap(), 0, 1),
        (make_cycle(8).unwrap(), 0, 2),
        (make_binary_tree(3).unwrap(), 1, 1),
        (make_random_regular(8, 3, 1).unwrap(), 2, 1),
    ];
    for (g, v, r) in cases {
        let oracle = policy_iteration(&g, v, r);
        let ball = Ball::new(&g, v, r).unwrap();
        for model in [Model::Full, Model::Collapsed] {
            let value = mdp::solve(&g, &ball, model).unwrap();
            for (&(x, m), &want) in &oracle {
                let got = value.value(x, m).unwrap();
                assert_abs_diff_eq!(got, want, epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn optimal_policy_attains_psi_on_path() {
    let g = make_path(4).unwrap();
    let value = mdp::solve_cover_mdp(&g, &Ball::new(&g, 0, 1).unwrap()).unwrap();
    let m = policy_visit_moments(&g, &value, 3, 100_000, 4, Execution::default()).unwrap();
    assert!((m.mean() - 2.0).abs() <= 3.0 * m.std_error(), "{m:?}");
}

#[test]
fn uniform_policy_walk_is_a_simple_random_walk() {
    // Two-sample Kolmogorov-Smirnov on cover-and-exit times of B_0(1).
    let g = make_cycle(7).unwrap();
    let region = Region::from(&Ball::new(&g, 0, 1).unwrap());
    let samples = 100_000;
    let policy: Vec<usize> = Execution::default().map(samples, |i| {
        simulate_policy_walk(&g, &region, &UniformPolicy, 3, 10, i, SAFETY_CAP).unwrap().len()
    });
    let srw: Vec<usize> = Execution::default().map(samples, |i| {
        let mut horizon = 64;
        loop {
            let t = walk::simulate_srw_sample(&g, 3, 99, i, horizon);
            if let Some(tau) = t.cover_exit_time(&region) {
                return tau;
            }
            horizon *= 2;
        }
    });
    let cdf = |xs: &[usize], t: usize| xs.iter().filter(|&&x| x <= t).count() as f64 / xs.len() as f64;
    let max_t = *policy.iter().chain(&srw).max().unwrap();
    let ks = (0..=max_t).map(|t| (cdf(&policy, t) - cdf(&srw, t)).abs()).fold(0.0, f64::max);
    let critical = 1.36 * (2.0 / samples as f64).sqrt();
    assert!(ks < critical, "KS {ks} >= {critical}");
}

#[test]
fn cover_exit_is_monotone_in_radius() {
    let g = make_torus(5, 2).unwrap();
    for s in 0..50 {
        let traj = walk::simulate_srw_sample(&g, 12, 6, s, 5000);
        let mut last = 0;
        for r in 0..=2 {
            let region = Region::from(&Ball::new(&g, 0, r).unwrap());
            if let Some(t) = traj.cover_exit_time(&region) {
                assert!(t >= last);
                last = t;
            }
        }
    }
}

/// Exact law of `ℓ^v(r)` under a deterministic outside policy, by forward
/// propagation over `(position, visited set, ℓ^v)` until the live mass is
/// negligible. Returns `P(ℓ^v(r) < threshold)`.
fn exact_visit_law_below(
    g: &Graph,
    value: &covertime_core::mdp::CoverValue,
    start: usize,
    threshold: f64,
) -> f64 {
    let ball = &value.ball;
    let v = ball.center;
    let mut live: HashMap<(usize, u64, u32), f64> = HashMap::from([((start, 0, 0), 1.0)]);
    let mut below = 0.0;
    for _ in 0..100_000 {
        let mut next: HashMap<(usize, u64, u32), f64> = HashMap::new();
        for (&(x, m, l), &p) in &live {
            let l2 = l + u32::from(x == v);
            let moves: Vec<usize> = if ball.contains(x) {
                g.neighbors(x).to_vec()
            } else {
                match value.action(x, m).unwrap() {
                    covertime_core::mdp::Action::Move(y) => vec![y],
                    covertime_core::mdp::Action::Terminate => unreachable!(),
                }
            };
            for &y in &moves {
                let m2 = value.step_mask(m, y);
                let q = p / moves.len() as f64;
                if value.is_terminal(y, m2) {
                    if (l2 as f64) < threshold {
                        below += q;
                    }
                } else {
                    *next.entry((y, m2, l2)).or_default() += q;
                }
            }
        }
        live = next;
        if live.values().sum::<f64>() < 1e-13 {
            break;
        }
    }
    below
}

#[test]
fn weak_concentration_matches_exact_law() {
    let g = make_cycle(8).unwrap();
    let value = mdp::solve_cover_mdp(&g, &Ball::new(&g, 0, 1).unwrap()).unwrap();
    let (k, eps) = (1.5, 0.1);
    let threshold = k * 2.0 - eps;
    let exact = exact_visit_law_below(&g, &value, 4, threshold);
    let res = walk::check_weak_concentration(
        &g,
        &[(0, 1.0)],
        1,
        k,
        eps,
        &value,
        4,
        100_000,
        12,
        Execution::default(),
    )
    .unwrap();
    assert_abs_diff_eq!(res.threshold, threshold, epsilon = 1e-12);
    assert!(res.ci_low <= exact && exact <= res.ci_high, "{exact} vs {res:?}");
}

#[test]
fn weak_concentration_two_centers_is_measured() {
    let g = make_cycle(10).unwrap();
    let res = walk::check_weak_concentration(
        &g,
        &[(0, 0.5), (5, 0.5)],
        1,
        1.0,
        0.1,
        &UniformPolicy,
        2,
        5_000,
        1,
        Execution::default(),
    )
    .unwrap();
    assert!((0.0..=1.0).contains(&res.probability));
    assert!(res.ci_low <= res.probability && res.probability <= res.ci_high);
}
