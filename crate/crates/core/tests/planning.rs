mod common;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use ucsg_core::confidence::{coordinate_box, l1_radius, CellRegion, ConfidenceRegion, Counts};
use ucsg_core::envgen::{generate, Family, GenSpec};
use ucsg_core::planning::{
    inner_max_transition, inner_min_transition, maximin_evi, pessimistic_response_evi, schweitzer_vi, ViConfig,
};
use ucsg_core::sg::{Dims, SgModel};

/// Dense LP over `{p : lo ≤ p ≤ hi, Σp = 1, ‖p − p̂‖₁ ≤ r}`.
fn lp_optimum(cell: &CellRegion<'_>, v: &[f64], dir: OptimizationDirection) -> f64 {
    let n = v.len();
    let mut lp = Problem::new(dir);
    let p: Vec<_> = (0..n).map(|i| lp.add_var(v[i], (cell.lo[i], cell.hi[i]))).collect();
    let d: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 2.0))).collect();
    lp.add_constraint(p.iter().map(|&x| (x, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    for i in 0..n {
        lp.add_constraint([(d[i], 1.0), (p[i], -1.0)], ComparisonOp::Ge, -cell.phat[i]);
        lp.add_constraint([(d[i], 1.0), (p[i], 1.0)], ComparisonOp::Ge, cell.phat[i]);
    }
    lp.add_constraint(
        d.iter().map(|&x| (x, 1.0)).collect::<Vec<_>>(),
        ComparisonOp::Le,
        cell.l1_radius,
    );
    lp.solve().expect("feasible LP").objective()
}

struct OwnedCell {
    phat: Vec<f64>,
    radius: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl OwnedCell {
    fn view(&self) -> CellRegion<'_> {
        CellRegion {
            phat: &self.phat,
            l1_radius: self.radius,
            lo: &self.lo,
            hi: &self.hi,
        }
    }
}

fn random_cell(rng: &mut impl Rng) -> OwnedCell {
    let s = rng.random_range(2..=6);
    let n: u64 = rng.random_range(1..=400);
    let mut counts = vec![0u64; s];
    for _ in 0..n {
        counts[rng.random_range(0..s)] += 1;
    }
    let phat: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let d1 = 10f64.powf(-rng.random_range(1.0..6.0));
    // Alternate between the formula radius and a free one so that both the
    // L1 budget and the boxes end up binding.
    let radius = if rng.random_bool(0.5) {
        l1_radius(s, n, d1)
    } else {
        rng.random_range(0.0..2.0)
    };
    let (lo, hi) = phat.iter().map(|&p| coordinate_box(p, n, d1)).unzip();
    OwnedCell { phat, radius, lo, hi }
}

#[test]
fn inner_optimizers_match_dense_lp() {
    let mut rng = common::rng(41);
    for _ in 0..200 {
        let cell = random_cell(&mut rng);
        let view = cell.view();
        let v: Vec<f64> = (0..cell.phat.len()).map(|_| rng.random_range(-3.0..3.0)).collect();

        let (p, val) = inner_max_transition(&view, &v).unwrap();
        let lp = lp_optimum(&view, &v, OptimizationDirection::Maximize);
        assert!((val - lp).abs() <= 1e-8, "max: greedy {val} lp {lp}");
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        assert!(view.contains(&p));

        let (q, val) = inner_min_transition(&view, &v).unwrap();
        let lp = lp_optimum(&view, &v, OptimizationDirection::Minimize);
        assert!((val - lp).abs() <= 1e-8, "min: greedy {val} lp {lp}");
        assert!(view.contains(&q));
    }
}

#[test]
fn box_caps_transfer_on_three_coordinates() {
    let phat = [0.5, 0.3, 0.2];
    let lo = [0.0, 0.0, 0.0];
    let hi = [1.0, 1.0, 0.25];
    let cell = CellRegion {
        phat: &phat,
        l1_radius: 1.5,
        lo: &lo,
        hi: &hi,
    };
    let v = [0.0, 0.0, 1.0];
    let (p, val) = inner_max_transition(&cell, &v).unwrap();
    let lp = lp_optimum(&cell, &v, OptimizationDirection::Maximize);
    assert!((p[2] - 0.25).abs() < 1e-12);
    assert!((val - lp).abs() < 1e-12);
}

fn counts_for(model: &SgModel, samples: u64, rng: &mut rand_chacha::ChaCha8Rng) -> Counts {
    let d = model.dims();
    let mut c = Counts::new(d);
    for s in 0..d.states {
        for a1 in 0..d.actions_p1 {
            for a2 in 0..d.actions_p2 {
                for _ in 0..samples {
                    let next = common::draw(rng, model.next_state_probs(s, a1, a2));
                    c.observe(s, a1, a2, next);
                }
            }
        }
    }
    c
}

#[test]
fn widening_the_region_never_lowers_optimism() {
    let model = generate(&GenSpec::new(Family::ErgodicRandom, 3, 2, 2, 0.3, 5))
        .unwrap()
        .0;
    let mut rng = common::rng(3);
    let counts = counts_for(&model, 30, &mut rng);
    let cfg = ViConfig::default().with_gamma(1e-7);
    let mut prev = f64::NEG_INFINITY;
    // Larger δ gives a smaller region; walk from small to large regions.
    for delta in [0.9, 0.5, 0.1, 1e-3, 1e-6, 1e-12] {
        let region = ConfidenceRegion::build(&counts, delta, 1000);
        let plan = maximin_evi(&region, model.rewards(), &cfg).unwrap();
        assert!(
            plan.plan.rho_star >= prev - 2e-7,
            "delta {delta}: {} < {prev}",
            plan.plan.rho_star
        );
        prev = plan.plan.rho_star;
    }
}

#[test]
fn turn_based_three_states_match_enumeration() {
    for seed in 0..5 {
        let model = generate(&GenSpec::new(Family::TurnBased, 3, 2, 2, 0.3, seed))
            .unwrap()
            .0;
        let plan = schweitzer_vi(&model, &ViConfig::default()).unwrap();
        let oracle = common::det_maximin(&model);
        for o in oracle {
            assert!(
                (plan.rho_star - o).abs() <= 1e-4,
                "seed {seed}: {} vs {o}",
                plan.rho_star
            );
        }
    }
}

#[test]
fn single_state_pessimism_is_min_over_actions() {
    // One state, so every kernel is the point mass and only rewards matter.
    let model = SgModel::new(Dims::new(1, 2, 3), vec![0.9, 0.4, 0.7, 0.1, 0.6, 0.2], vec![1.0; 6]).unwrap();
    let pi1 = ucsg_core::sg::StationaryPolicy::from_rows(ucsg_core::sg::Player::One, &[vec![0.25, 0.75]]).unwrap();
    let region = ConfidenceRegion::collapsed(&model);
    let cfg = ViConfig::default().with_gamma(1e-9);
    let pess = pessimistic_response_evi(&region, &pi1, model.rewards(), &cfg).unwrap();
    let by_column: Vec<f64> = (0..3)
        .map(|a2| 0.25 * model.reward(0, 0, a2) + 0.75 * model.reward(0, 1, a2))
        .collect();
    let expect = by_column.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((pess.rho_lower - expect).abs() <= 1e-9);
    assert_eq!(pess.pi2.row(0), &[1.0, 0.0, 0.0]);
}

#[test]
fn span_of_iterates_stays_within_diameter() {
    for seed in 0..10 {
        let (model, cert) = generate(&GenSpec::new(Family::ErgodicRandom, 4, 2, 2, 0.4, seed)).unwrap();
        let plan = schweitzer_vi(&model, &ViConfig::default()).unwrap();
        assert!(plan.max_iterate_span <= cert.bound() + 1e-9);
    }
}
