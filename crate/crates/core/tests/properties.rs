use covertime_core::graph::{
    make_binary_tree, make_cycle, make_path, make_random_regular, make_torus, parse_graph,
    serialize_graph, Ball, Graph,
};
use covertime_core::green::green_table;
use covertime_core::martingale::{check_bounded_range, check_submartingale, solve_full};
use covertime_core::mdp::{self, Model};
use covertime_core::walk::{bit_process_inequality, simulate_srw_sample};
use covertime_core::Error;
use proptest::prelude::*;

fn small_graph() -> impl Strategy<Value = Graph> {
    prop_oneof![
        (2usize..14).prop_map(|n| make_path(n).unwrap()),
        (3usize..14).prop_map(|n| make_cycle(n).unwrap()),
        (1usize..4).prop_map(|h| make_binary_tree(h).unwrap()),
        (3usize..5).prop_map(|s| make_torus(s, 2).unwrap()),
        (3usize..8, any::<u64>()).prop_map(|(h, seed)| make_random_regular(2 * h, 3, seed).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn serialization_round_trips(g in small_graph()) {
        let text = serialize_graph(&g);
        prop_assert_eq!(parse_graph(&text).unwrap(), g.clone());
        prop_assert_eq!(serialize_graph(&parse_graph(&text).unwrap()), text);
    }

    #[test]
    fn ball_geometry(g in small_graph(), v in any::<prop::sample::Index>(), r in 0usize..4) {
        let v = v.index(g.n());
        let ball = Ball::new(&g, v, r).unwrap();
        let dist = g.distances_from(v);
        for w in 0..g.n() {
            prop_assert_eq!(ball.contains(w), dist[w] <= r);
            prop_assert_eq!(ball.annulus.contains(&w), dist[w] == r);
        }
        if r == 0 {
            prop_assert_eq!(&ball.annulus, &vec![v]);
            prop_assert!(ball.interior.is_empty());
        }
        let mut seen = ball.members.clone();
        for comp in &ball.outside_components {
            prop_assert!(!comp.entry_edges.is_empty());
            seen.extend(&comp.vertices);
        }
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..g.n()).collect::<Vec<_>>());
        let d = g.max_degree();
        if d >= 2 {
            prop_assert!(ball.size() <= d.pow(r as u32 + 1));
        }
    }

    #[test]
    fn reversibility_identity(g in small_graph(), v in any::<prop::sample::Index>(), r in 0usize..4) {
        let v = v.index(g.n());
        match green_table(&g, v, r) {
            Ok(t) => {
                prop_assert!(t.reversibility_residual(&g) <= 1e-9);
                // d_w a_w = d_v P(exit at w), so a_w ≤ d_v / d_w.
                let dv = g.degree(v) as f64;
                for &(w, a) in &t.annulus_values {
                    prop_assert!(a > 0.0 && a <= dv / g.degree(w) as f64 + 1e-12);
                }
            }
            Err(Error::EmptyAnnulus { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn bit_process_holds(ps in prop::collection::vec(0.0f64..=0.5, 0..40)) {
        let (product, bound) = bit_process_inequality(&ps).unwrap();
        prop_assert!(product >= bound * (1.0 - 1e-12));
    }

    #[test]
    fn walks_are_deterministic_and_valid(g in small_graph(), seed in any::<u64>(), sample in 0u64..1000) {
        let a = simulate_srw_sample(&g, 0, seed, sample, 200);
        prop_assert!(a.is_walk_on(&g));
        prop_assert_eq!(&a, &simulate_srw_sample(&g, 0, seed, sample, 200));
        let total: usize = a.local_times(g.n(), 200).iter().sum();
        prop_assert_eq!(total, 200);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn psi_floor_and_monotonicity(g in small_graph(), v in any::<prop::sample::Index>()) {
        let v = v.index(g.n());
        let mut last = None;
        for r in 0..3 {
            let res = match mdp::psi_normalized_with(&g, v, r, Model::Collapsed) {
                Ok(p) => p,
                Err(Error::BallCoversGraph { .. }) => break,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert!(res.psi >= 1.0 - 1e-9);
            if r == 0 {
                prop_assert!((res.psi - 1.0).abs() <= 1e-9);
            }
            if let Some(prev) = last {
                prop_assert!(res.psi >= prev - 1e-9);
            }
            last = Some(res.psi);
        }
    }

    #[test]
    fn submartingale_on_random_regular(h in 4usize..7, seed in any::<u64>(), v in 0usize..8) {
        let g = make_random_regular(2 * h, 3, seed).unwrap();
        let value = solve_full(&g, v, 1).unwrap();
        let rep = check_submartingale(&g, &value).unwrap();
        prop_assert!(rep.pass(), "{:?}", rep);
        prop_assert!(check_bounded_range(&g, &value).unwrap() <= 1e-9);
    }
}
