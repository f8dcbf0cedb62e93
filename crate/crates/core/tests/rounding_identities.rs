//! Cross-checks of the rounding machinery: the two conditional enumerators
//! agree exactly, the independence claim holds (and its corrupted variant
//! fails), and the single-shot and distance identities behave as the
//! enumeration predicts.

use std::collections::{BTreeMap, BTreeSet};

use num::{One, Zero};
use parrep_core::game::{anchor, build_free_uniform, build_ghz, repeat, Game, Predicate, Strategy};
use parrep_core::rat::{rat, Rat};
use parrep_core::rounding::{
    breaker_conditional, breaker_conditional_factored, check_claim22, conditional_cells,
    enumerate_full_breakers, pipeline, single_shot_exact, tv_rat, BreakerDist, Odometer,
    PipelineOptions, RoundingInstance, StrategyChoice, SubsetChoice,
};
use parrep_core::value::{game_value, Method, SearchOptions};

fn optimal_repeated_strategy(base: &Game, n: usize) -> Strategy {
    let repeated = repeat(base, n).unwrap();
    game_value(&repeated, Method::BestResponse, &SearchOptions::default())
        .unwrap()
        .witness
}

/// A two-player free game with the parity predicate: accept iff the XOR of
/// the answers equals the AND of the questions.
fn chsh() -> Game {
    let g = build_free_uniform(2, 2).unwrap();
    let mut accepts = BTreeSet::new();
    for x in [[0u32, 0], [0, 1], [1, 0], [1, 1]] {
        for a in [[0u32, 0], [0, 1], [1, 0], [1, 1]] {
            let conj = x[0] & x[1];
            if (a[0] ^ a[1]) == conj {
                accepts.insert((x.to_vec(), a.to_vec()));
            }
        }
    }
    g.with_predicate(Predicate::AcceptTable(accepts)).unwrap()
}

#[test]
fn direct_and_factored_enumerators_agree_everywhere() {
    // correlated strategies, several subsets, several games
    let ghz = build_ghz();
    let anchored = anchor(&ghz, &rat(1, 2)).unwrap();
    let cases: Vec<(Game, usize, Strategy)> = vec![
        (ghz.clone(), 2, optimal_repeated_strategy(&ghz, 2)),
        (
            ghz.clone(),
            3,
            Strategy::cyclic_coupled(
                &ghz,
                &game_value(&ghz, Method::BestResponse, &SearchOptions::default())
                    .unwrap()
                    .witness,
                3,
            ),
        ),
        (
            anchored.clone(),
            2,
            Strategy::cyclic_coupled(
                &anchored,
                &game_value(&anchored, Method::BestResponse, &SearchOptions::default())
                    .unwrap()
                    .witness,
                2,
            ),
        ),
        (chsh(), 2, optimal_repeated_strategy(&chsh(), 2)),
    ];
    for (game, n, strategy) in &cases {
        let inst = RoundingInstance::build(game, *n, strategy, 1 << 20).unwrap();
        assert!(inst.supp.len().pow(*n as u32) <= 4096);
        for s in [vec![], vec![*n - 1]] {
            for i in (0..*n).filter(|i| !s.contains(i)) {
                for x_idx in 0..inst.supp.len() {
                    let direct = breaker_conditional(&inst, &s, i, x_idx);
                    let factored = breaker_conditional_factored(&inst, &s, i, x_idx);
                    match (direct, factored) {
                        (Ok(d), Ok(f)) => assert_eq!(d, f, "n={n} S={s:?} i={i} x={x_idx}"),
                        (Err(_), Err(_)) => {}
                        (d, f) => panic!("one enumerator failed: {:?} vs {:?}", d.is_ok(), f.is_ok()),
                    }
                }
            }
        }
    }
}

#[test]
fn claim22_holds_for_correlated_strategies() {
    let ghz = build_ghz();
    let strategy = optimal_repeated_strategy(&ghz, 2);
    let inst = RoundingInstance::build(&ghz, 2, &strategy, 1 << 20).unwrap();
    for s in [vec![], vec![0], vec![1]] {
        let summary = check_claim22(&inst, &s);
        assert!(summary.checked > 0);
        assert!(summary.counterexample.is_none());
    }
}

/// Dropping the answers from the conditioning (but not from the joint)
/// must break the independence factorization on a correlated strategy.
/// The instance needs slack in the conditionals (a free question
/// distribution) and answers tied across coordinates, so the parity game
/// with the coupled strategy is used rather than the rigid GHZ support.
#[test]
fn corrupted_conditioning_finds_a_counterexample() {
    let game = chsh();
    let base = game_value(&game, Method::BestResponse, &SearchOptions::default()).unwrap();
    let strategy = Strategy::cyclic_coupled(&game, &base.witness, 3);
    let inst = RoundingInstance::build(&game, 3, &strategy, 1 << 20).unwrap();
    let s = vec![2usize];
    let k = 2;
    let mut found = false;
    for r in enumerate_full_breakers(&inst, &s) {
        if r.a_s.is_empty() {
            continue;
        }
        let joint_cells = conditional_cells(&inst, &s, &r, true);
        let loose_cells = conditional_cells(&inst, &s, &r, false);
        if joint_cells.is_empty() {
            continue;
        }
        let joint_total: Rat = joint_cells.iter().map(|(_, w)| w.clone()).sum();
        let loose_total: Rat = loose_cells.iter().map(|(_, w)| w.clone()).sum();
        // marginals from the corrupted (answer-free) conditioning
        let mut marginals: Vec<BTreeMap<Vec<u32>, Rat>> = vec![BTreeMap::new(); k];
        for (cell, w) in &loose_cells {
            for t in 0..k {
                *marginals[t].entry(cell[t].clone()).or_insert_with(Rat::zero) += w.clone();
            }
        }
        let mut joint_map: BTreeMap<Vec<Vec<u32>>, Rat> = BTreeMap::new();
        for (cell, w) in &joint_cells {
            *joint_map.entry(cell.clone()).or_insert_with(Rat::zero) += w.clone();
        }
        let keys: Vec<Vec<&Vec<u32>>> = marginals.iter().map(|m| m.keys().collect()).collect();
        for pick in Odometer::new(keys.iter().map(|ks| ks.len()).collect()) {
            let cell: Vec<Vec<u32>> = (0..k).map(|t| keys[t][pick[t]].clone()).collect();
            let pj = joint_map
                .get(&cell)
                .cloned()
                .unwrap_or_else(Rat::zero)
                / joint_total.clone();
            let mut pp = Rat::one();
            for t in 0..k {
                pp *= marginals[t][&cell[t]].clone() / loose_total.clone();
            }
            if pj != pp {
                found = true;
            }
        }
        if found {
            break;
        }
    }
    assert!(found, "corrupted conditioning should violate the product form");
}

#[test]
fn single_shot_exact_identity_for_empty_subsets_even_when_correlated() {
    // With S empty the conditioned event is the sure event, so the identity
    // holds for any strategy, including the correlated optimum.
    let ghz = build_ghz();
    let strategy = optimal_repeated_strategy(&ghz, 2);
    let inst = RoundingInstance::build(&ghz, 2, &strategy, 1 << 20).unwrap();
    let s: Vec<usize> = vec![];
    let mut conds: BTreeMap<usize, Vec<BreakerDist>> = BTreeMap::new();
    for i in 0..2 {
        conds.insert(
            i,
            (0..inst.supp.len())
                .map(|x| breaker_conditional(&inst, &s, i, x).unwrap())
                .collect(),
        );
    }
    let ss = single_shot_exact(&inst, &s, &conds);
    let mut rhs = Rat::zero();
    for i in 0..2 {
        rhs += inst.conditional_win(i, &s).unwrap();
    }
    rhs /= Rat::from_integer(2.into());
    assert_eq!(ss, rhs);
}

#[test]
fn tv_is_a_metric_on_breaker_distributions() {
    let ghz = build_ghz();
    let strategy = optimal_repeated_strategy(&ghz, 2);
    let inst = RoundingInstance::build(&ghz, 2, &strategy, 1 << 20).unwrap();
    let s = vec![1usize];
    let conds: Vec<BreakerDist> = (0..inst.supp.len())
        .map(|x| breaker_conditional(&inst, &s, 0, x).unwrap())
        .collect();
    for a in &conds {
        assert!(tv_rat(a, a).is_zero());
        for b in &conds {
            let d = tv_rat(a, b);
            assert!(d >= Rat::zero() && d <= Rat::one());
            assert_eq!(d, tv_rat(b, a));
            for c in &conds {
                assert!(tv_rat(a, c) <= tv_rat(a, b) + tv_rat(b, c));
            }
        }
    }
}

/// The distance-to-global bound path on a connected instance: the reported
/// average distance is dominated by sqrt(edge energy / lambda) plus the
/// normalization correction. The chain is a theorem for connected graphs,
/// so it is asserted here on the free parity game.
#[test]
fn eq1_bound_path_dominates_distance_on_free_game() {
    let game = chsh();
    let opts = PipelineOptions {
        strategy: StrategyChoice::RepeatedOptimal,
        subset: SubsetChoice::Fixed(vec![1]),
        check_claim22: false,
        ..Default::default()
    };
    let rep = pipeline(&game, 2, &opts).unwrap();
    let lambda = rep.lambda.unwrap();
    assert!((lambda - 0.5).abs() < 1e-8, "free 2-player gap is 1/2");
    let bound = rep.eq1_distance_bound.expect("connected graph has a bound");
    assert!(
        rep.avg_ptilde_distance <= bound + 1e-9,
        "distance {} vs bound {}",
        rep.avg_ptilde_distance,
        bound
    );
    assert!(rep.hellinger.max_violation <= 1e-9);
    // spread is controlled by edge energy through the spectral gap
    assert!(rep.hellinger.spread <= rep.hellinger.edge_energy / lambda + 1e-9);
}

#[test]
fn pipeline_negative_control_shapes() {
    // disconnected base: zero diagnostic, nonzero distance under the
    // correlated optimum
    let ghz = build_ghz();
    let opts = PipelineOptions {
        strategy: StrategyChoice::RepeatedOptimal,
        ..Default::default()
    };
    let rep = pipeline(&ghz, 2, &opts).unwrap();
    assert!(rep.lambda.unwrap().abs() < 1e-8);
    assert!(rep.diagnostic.is_zero());
    assert!(rep.avg_ptilde_distance > 0.01);
    assert!(rep.claim22_ok);
    assert!(rep.normalization_ok);
    assert!(rep.ss_gap_within_distance);
}

#[test]
fn single_shot_with_coordinatewise_play_recovers_base_value_on_free_game() {
    let game = chsh();
    let base = game_value(&game, Method::BestResponse, &SearchOptions::default()).unwrap();
    assert_eq!(base.value, rat(3, 4));
    let lifted = Strategy::coordinatewise(&game, &base.witness, 2);
    let inst = RoundingInstance::build(&game, 2, &lifted, 1 << 20).unwrap();
    let s: Vec<usize> = vec![];
    let mut conds: BTreeMap<usize, Vec<BreakerDist>> = BTreeMap::new();
    for i in 0..2 {
        conds.insert(
            i,
            (0..inst.supp.len())
                .map(|x| breaker_conditional(&inst, &s, i, x).unwrap())
                .collect(),
        );
    }
    assert_eq!(single_shot_exact(&inst, &s, &conds), rat(3, 4));
}
