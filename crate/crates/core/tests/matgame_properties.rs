mod common;

use proptest::prelude::*;
use ucsg_core::matgame::{solve, MatrixGame};

fn game() -> impl Strategy<Value = MatrixGame> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(n, m)| {
        prop::collection::vec(-1.0f64..1.0, n * m).prop_map(move |g| MatrixGame::new(n, m, g).unwrap())
    })
}

fn support(p: &[f64]) -> Vec<usize> {
    p.iter()
        .enumerate()
        .filter(|(_, &x)| x > 1e-9)
        .map(|(i, _)| i)
        .collect()
}

proptest! {
    #![proptest_config(common::proptest_config(300))]

    #[test]
    fn strategies_certify_the_value(g in game()) {
        let sol = solve(&g).unwrap();
        let lo = sol.row_guarantee(&g);
        let hi = sol.col_guarantee(&g);
        prop_assert!(lo >= sol.value - 1e-8);
        prop_assert!(hi <= sol.value + 1e-8);
        prop_assert!(hi - lo <= 1e-8);
        prop_assert!(sol.duality_gap <= 1e-8);
        for p in [&sol.row_strategy, &sol.col_strategy] {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn positive_affine_maps_commute_with_solving(g in game(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let base = solve(&g).unwrap();
        let moved = MatrixGame::new(g.rows(), g.cols(), (0..g.rows() * g.cols())
            .map(|k| a * g.get(k / g.cols(), k % g.cols()) + b).collect()).unwrap();
        let sol = solve(&moved).unwrap();
        prop_assert!((sol.value - (a * base.value + b)).abs() <= 1e-8 * (1.0 + a));
        // The original optimum stays optimal in the transformed game.
        prop_assert!(base.row_guarantee(&moved) >= sol.value - 1e-7 * (1.0 + a));
        prop_assert!(base.col_guarantee(&moved) <= sol.value + 1e-7 * (1.0 + a));
        prop_assert_eq!(support(&sol.row_strategy), support(&base.row_strategy));
        prop_assert_eq!(support(&sol.col_strategy), support(&base.col_strategy));
    }
}

#[test]
fn small_examples() {
    let s = solve(&MatrixGame::from_rows(&[vec![0.3]]).unwrap()).unwrap();
    assert_eq!(
        (s.value, s.row_strategy.clone(), s.col_strategy.clone()),
        (0.3, vec![1.0], vec![1.0])
    );

    let s = solve(&MatrixGame::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
    assert!((s.value - 0.5).abs() < 1e-12);
    assert!(s
        .row_strategy
        .iter()
        .chain(&s.col_strategy)
        .all(|x| (x - 0.5).abs() < 1e-12));

    let s = solve(&MatrixGame::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap()).unwrap();
    assert!((s.value - 1.0).abs() < 1e-12);
    assert_eq!(s.row_strategy, vec![1.0, 0.0]);
}
