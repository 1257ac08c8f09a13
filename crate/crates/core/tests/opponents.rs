use ucsg_core::confidence::ConfidenceRegion;
use ucsg_core::matgame::{solve, MatrixGame};
use ucsg_core::opponents::{BestResponseOpponent, History, Opponent, StationaryOpponent};
use ucsg_core::sg::{Player, SgModel, StationaryPolicy};

fn pennies() -> SgModel {
    SgModel::from_nested(&[vec![vec![1.0, 0.0], vec![0.0, 1.0]]], &[vec![vec![vec![1.0]; 2]; 2]]).unwrap()
}

fn empty_history(t: u64) -> History<'static> {
    History {
        t,
        state: 0,
        states: &[],
        actions_p1: &[],
        actions_p2: &[],
        rewards: &[],
    }
}

#[test]
fn best_response_to_the_equilibrium_is_a_column_solution() {
    let model = pennies();
    let game = MatrixGame::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let sol = solve(&game).unwrap();
    let pi1 = StationaryPolicy::from_rows(Player::One, std::slice::from_ref(&sol.row_strategy)).unwrap();
    let mut opp = BestResponseOpponent::new(model);
    opp.on_phase_start(&pi1).unwrap();
    let q = opp.act(&empty_history(1));
    // Against the equilibrium row every column earns the value, so any
    // response is optimal; the returned one must guarantee exactly 0.5.
    let payoff: f64 = game
        .row_mix_payoffs(&sol.row_strategy)
        .iter()
        .zip(&q)
        .map(|(a, b)| a * b)
        .sum();
    assert!((payoff - sol.value).abs() < 1e-12);
    assert_eq!(opp.response().row(0), q.as_slice());
}

#[test]
fn best_response_punishes_a_lopsided_row_player() {
    let mut opp = BestResponseOpponent::new(pennies());
    let pi1 = StationaryPolicy::from_rows(Player::One, &[vec![0.8, 0.2]]).unwrap();
    opp.on_phase_start(&pi1).unwrap();
    assert_eq!(opp.act(&empty_history(7)), vec![0.0, 1.0]);
}

#[test]
fn stationary_opponent_returns_its_row() {
    let policy = StationaryPolicy::from_rows(Player::Two, &[vec![0.25, 0.75]]).unwrap();
    let mut opp = StationaryOpponent { policy };
    assert_eq!(opp.act(&empty_history(3)), vec![0.25, 0.75]);
}

#[test]
fn kernel_outside_one_ball_is_rejected() {
    let model = pennies();
    let region = ConfidenceRegion::collapsed(&model);
    assert!(region.contains(&model));
    let two_state = SgModel::from_nested(
        &[vec![vec![0.0]], vec![vec![0.0]]],
        &[vec![vec![vec![0.5, 0.5]]], vec![vec![vec![0.5, 0.5]]]],
    )
    .unwrap();
    let tight = ConfidenceRegion::collapsed(&two_state);
    let mut shifted = two_state.transitions().to_vec();
    shifted[2] = 0.6;
    shifted[3] = 0.4;
    assert!(tight.contains_kernel(two_state.transitions()));
    assert!(!tight.contains_kernel(&shifted));
}
