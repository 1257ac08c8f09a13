mod common;

use proptest::prelude::*;
use ucsg_core::confidence::{l1_radius, ConfidenceRegion, Counts};
use ucsg_core::envgen::{generate, Family, GenSpec};
use ucsg_core::opponents::{BestResponseOpponent, History, Opponent};
use ucsg_core::planning::{maximin_evi, pessimistic_response_evi, ViConfig};
use ucsg_core::sg::{Player, SgModel, StationaryPolicy};
use ucsg_core::ucsg::{
    exact_worst_case, l_epsilon, offline_certificate, optimistic_value, run, run_online, Mode, RunConfig,
};

fn game(seed: u64) -> SgModel {
    generate(&GenSpec::new(Family::ErgodicRandom, 3, 2, 2, 0.3, seed))
        .unwrap()
        .0
}

fn injected_region(model: &SgModel, n: u64) -> ConfidenceRegion {
    let d = model.dims();
    let mut counts = Counts::new(d);
    for c in 0..d.cells() {
        counts.inject(c, model.cell_row(c), n);
    }
    counts.start_phase(n * d.cells() as u64 + 1);
    ConfidenceRegion::build(&counts, 0.1, 1 << 40)
}

fn certificate(model: &SgModel, region: &ConfidenceRegion, gamma: f64) -> f64 {
    let vi = ViConfig::default().with_gamma(gamma);
    let opt = maximin_evi(region, model.rewards(), &vi).unwrap();
    let pess = pessimistic_response_evi(region, &opt.plan.pi1, model.rewards(), &vi).unwrap();
    let rho = optimistic_value(&opt, 0).unwrap();
    offline_certificate(rho, &opt.plan.pi1, pess, gamma, 0).unwrap().u
}

#[test]
fn collapsed_regions_certify_exactly_two_gamma() {
    for seed in 0..5 {
        let model = game(seed);
        // Tight solves: both values coincide with the truth.
        let gamma = 1e-9;
        let u = certificate(&model, &ConfidenceRegion::collapsed(&model), gamma);
        assert!((u - 2.0 * gamma).abs() <= 1e-9, "seed {seed}: u {u}");
        let u = certificate(&model, &injected_region(&model, 1 << 40), gamma);
        assert!((u - 2.0 * gamma).abs() <= 1e-4, "seed {seed}: u {u}");
        // Coarse solves: the response is only γ-optimal, so u lands in [γ, 2γ].
        let gamma = 0.05;
        let u = certificate(&model, &ConfidenceRegion::collapsed(&model), gamma);
        assert!(u >= gamma - 1e-9 && u <= 2.0 * gamma + 1e-9, "seed {seed}: u {u}");
    }
}

#[test]
fn deterministic_single_state_game_stops_regretting() {
    // Pure saddle point at (row 1, column 0), value 0.6.
    let model = SgModel::from_nested(&[vec![vec![0.2, 0.1], vec![0.6, 0.9]]], &[vec![vec![vec![1.0]; 2]; 2]]).unwrap();
    let mut opp = BestResponseOpponent::new(model.clone());
    let report = run_online(&model, &mut opp, &RunConfig::new(500, 0.1, Mode::Online, 2)).unwrap();
    let first = report.phases[0].length as usize;
    for (r, phase) in report
        .trajectory
        .rewards
        .iter()
        .zip(&report.trajectory.phases)
        .skip(first)
    {
        assert!((r - 0.6).abs() < 1e-12, "phase {phase}: reward {r}");
    }
}

#[test]
fn phases_partition_the_horizon_and_respect_the_count_bound() {
    let model = game(4);
    for mode in [Mode::Online, Mode::Offline] {
        for horizon in [2, 17, 1000, 5000] {
            let report = run(&model, &RunConfig::new(horizon, 0.1, mode, 6)).unwrap();
            assert_eq!(report.phases.iter().map(|p| p.length).sum::<u64>(), horizon);
            assert_eq!(report.trajectory.len() as u64, horizon);
            assert!(report.phases.len() as f64 <= report.phase_count_bound(model.dims()));
            for (i, p) in report.phases.iter().enumerate() {
                assert_eq!(p.k, i + 1);
                assert_eq!(p.gamma, 1.0 / (p.t_k as f64).sqrt());
            }
        }
    }
}

#[test]
fn offline_output_is_epsilon_optimal() {
    let model = game(7);
    let report = run(&model, &RunConfig::new(20_000, 0.1, Mode::Offline, 1)).unwrap();
    let best = report.best_policy.as_ref().unwrap();
    let worst = exact_worst_case(&model, &best.policy).unwrap();
    let min_u = report
        .phases
        .iter()
        .map(|p| p.offline.as_ref().unwrap().u)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best.u, min_u);
    let oracle = common::worst_case(&model, &common::policy_rows(&best.policy));
    for (w, o) in worst.iter().zip(&oracle) {
        assert!((w - o).abs() < 1e-8);
        assert!(report.rho_star - o <= min_u + 2e-6);
    }
}

proptest! {
    #![proptest_config(common::proptest_config(24))]

    #[test]
    fn l_epsilon_shrinks_as_epsilon_grows(seed in 0u64..1000, horizon in 50u64..3000) {
        let model = game(seed % 5);
        let report = run(&model, &RunConfig::new(horizon, 0.1, Mode::Online, seed)).unwrap();
        let mut prev = u64::MAX;
        for k in 1..100 {
            let l = l_epsilon(report.rho_star, &report.phases, k as f64 / 100.0);
            prop_assert!(l <= prev);
            prop_assert!(l <= horizon);
            prev = l;
        }
    }

    #[test]
    fn radius_never_grows_with_more_samples(s in 1usize..10, n in 1u64..100_000, d1 in 1e-9f64..0.5) {
        prop_assert!(l1_radius(s, n + 1, d1) <= l1_radius(s, n, d1));
        prop_assert!(l1_radius(s, n, d1) <= 2.0);
    }

    #[test]
    fn empirical_center_is_always_inside(seed in any::<u64>(), samples in 0u64..60) {
        let model = game(seed % 3);
        let d = model.dims();
        let mut rng = common::rng(seed);
        let mut counts = Counts::new(d);
        for c in 0..d.cells() {
            let (s, a1, a2) = d.cell_coords(c);
            for _ in 0..samples {
                counts.observe(s, a1, a2, common::draw(&mut rng, model.cell_row(c)));
            }
        }
        counts.start_phase(samples * d.cells() as u64 + 1);
        let region = ConfidenceRegion::build(&counts, 0.1, 10_000);
        prop_assert!(region.contains_kernel(region.phat()));
    }
}

#[test]
fn region_shrinks_around_the_truth() {
    let model = game(11);
    let d = model.dims();
    let mut rng = common::rng(5);
    let mut counts = Counts::new(d);
    let cell = 3;
    let (s, a1, a2) = d.cell_coords(cell);
    for _ in 0..100_000 {
        counts.observe(s, a1, a2, common::draw(&mut rng, model.cell_row(cell)));
    }
    counts.start_phase(100_001);
    let region = ConfidenceRegion::build(&counts, 0.1, 100_000);
    let c = region.cell(cell);
    assert!(c.l1_radius < 0.05, "radius {}", c.l1_radius);
    assert!(c.contains(model.cell_row(cell)));
    let width = c.lo.iter().zip(c.hi).map(|(l, h)| h - l).fold(0.0, f64::max);
    assert!(width < 0.05);
}

#[test]
fn best_response_opponent_holds_a_fixed_learner_to_its_worst_case() {
    let model = game(2);
    let d = model.dims();
    let pi1 = StationaryPolicy::from_rows(Player::One, &[vec![0.3, 0.7], vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap();
    let worst = common::worst_case(&model, &common::policy_rows(&pi1));
    let mut opp = BestResponseOpponent::new(model.clone());
    opp.on_phase_start(&pi1).unwrap();

    let horizon = 100_000;
    let mut rng = common::rng(99);
    let (mut states, mut a1s, mut a2s, mut rewards) = (vec![], vec![], vec![], vec![]);
    let mut s = 0;
    for t in 1..=horizon {
        let q = opp.act(&History {
            t,
            state: s,
            states: &states,
            actions_p1: &a1s,
            actions_p2: &a2s,
            rewards: &rewards,
        });
        assert_eq!(q.len(), d.actions_p2);
        let a1 = common::draw(&mut rng, pi1.row(s));
        let a2 = common::draw(&mut rng, &q);
        states.push(s);
        a1s.push(a1);
        a2s.push(a2);
        rewards.push(model.reward(s, a1, a2));
        s = common::draw(&mut rng, model.next_state_probs(s, a1, a2));
    }
    let average = rewards.iter().sum::<f64>() / horizon as f64;
    // The induced chain is ergodic, so every start state shares the worst case.
    assert!(worst.iter().all(|w| (w - worst[0]).abs() < 1e-9));
    assert!(
        (average - worst[0]).abs() <= 0.02,
        "average {average} vs worst case {}",
        worst[0]
    );
}
