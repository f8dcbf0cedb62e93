//! Independent oracles for the exact value search.
//!
//! The oracles deliberately avoid the library's packed search: one walks the
//! full strategy space through plain table odometers and win_probability,
//! the other enumerates the first k-1 players' tables naively and derives
//! the last player's best response by direct mass counting. Frozen expected
//! values in this file were produced by the oracles.

use std::collections::BTreeMap;

use num::Zero;
use parrep_core::corpus::{value_corpus, CorpusParams};
use parrep_core::game::{anchor, build_ghz, repeat, Game, Strategy, SymId};
use parrep_core::rat::{rat, Rat};
use parrep_core::value::{game_value, win_probability, Method, SearchOptions};

/// Every deterministic strategy, by brute odometer over the answer tables.
fn all_strategies(game: &Game) -> Vec<Strategy> {
    let k = game.players();
    let domains: Vec<Vec<SymId>> = (0..k)
        .map(|t| game.question_projection(t).into_iter().collect())
        .collect();
    let acounts: Vec<usize> = (0..k).map(|t| game.answer_alphabet(t).len()).collect();
    let slots: Vec<(usize, SymId)> = domains
        .iter()
        .enumerate()
        .flat_map(|(t, d)| d.iter().map(move |&q| (t, q)))
        .collect();
    let mut out = Vec::new();
    let mut assignment = vec![0usize; slots.len()];
    loop {
        let mut tables: Vec<BTreeMap<SymId, SymId>> = vec![BTreeMap::new(); k];
        for (s, &(t, q)) in slots.iter().enumerate() {
            tables[t].insert(q, assignment[s] as SymId);
        }
        out.push(Strategy::new(tables));
        let mut d = slots.len();
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            assignment[d] += 1;
            if assignment[d] < acounts[slots[d].0] {
                break;
            }
            assignment[d] = 0;
        }
        if assignment.iter().all(|&v| v == 0) {
            return out;
        }
    }
}

/// Oracle 1: maximum win probability over every full strategy.
fn oracle_plain(game: &Game) -> Rat {
    let mut best = Rat::zero();
    for s in all_strategies(game) {
        let v = win_probability(game, &s).unwrap();
        if v > best {
            best = v;
        }
    }
    best
}

/// Oracle 2: enumerate the first k-1 players' tables naively; for each,
/// give the last player its best answer per question by direct mass count.
fn oracle_partial_best_response(game: &Game) -> Rat {
    let k = game.players();
    let domains: Vec<Vec<SymId>> = (0..k)
        .map(|t| game.question_projection(t).into_iter().collect())
        .collect();
    let acounts: Vec<usize> = (0..k).map(|t| game.answer_alphabet(t).len()).collect();
    let slots: Vec<(usize, SymId)> = domains
        .iter()
        .take(k - 1)
        .enumerate()
        .flat_map(|(t, d)| d.iter().map(move |&q| (t, q)))
        .collect();
    let support: Vec<(&Vec<SymId>, &Rat)> = game.distribution().iter().collect();
    let mut best = Rat::zero();
    let mut assignment = vec![0usize; slots.len()];
    loop {
        let mut tables: Vec<BTreeMap<SymId, SymId>> = vec![BTreeMap::new(); k];
        for (s, &(t, q)) in slots.iter().enumerate() {
            tables[t].insert(q, assignment[s] as SymId);
        }
        // best response of the last player, question by question
        let mut value = Rat::zero();
        for &q in &domains[k - 1] {
            let mut best_mass = Rat::zero();
            for a_last in 0..acounts[k - 1] {
                let mut mass = Rat::zero();
                for (x, p) in &support {
                    if x[k - 1] != q {
                        continue;
                    }
                    let mut answers: Vec<SymId> =
                        (0..k - 1).map(|t| tables[t][&x[t]]).collect();
                    answers.push(a_last as SymId);
                    if game.accepts(x, &answers) {
                        mass += (*p).clone();
                    }
                }
                if mass > best_mass {
                    best_mass = mass;
                }
            }
            value += best_mass;
        }
        if value > best {
            best = value;
        }
        let mut d = slots.len();
        loop {
            if d == 0 {
                return best;
            }
            d -= 1;
            assignment[d] += 1;
            if assignment[d] < acounts[slots[d].0] {
                break;
            }
            assignment[d] = 0;
        }
        if assignment.iter().all(|&v| v == 0) {
            return best;
        }
    }
}

#[test]
fn oracles_agree_with_search_on_ghz() {
    let g = build_ghz();
    assert_eq!(oracle_plain(&g), rat(3, 4));
    assert_eq!(oracle_partial_best_response(&g), rat(3, 4));
    for method in [Method::PlainExhaustive, Method::BestResponse] {
        let r = game_value(&g, method, &SearchOptions::default()).unwrap();
        assert_eq!(r.value, rat(3, 4));
    }
}

#[test]
fn oracles_agree_with_search_on_random_micro_games() {
    for game in value_corpus(10, 2024) {
        let plain = oracle_plain(&game);
        let partial = oracle_partial_best_response(&game);
        assert_eq!(plain, partial);
        for method in [Method::PlainExhaustive, Method::BestResponse] {
            let r = game_value(&game, method, &SearchOptions::default()).unwrap();
            assert_eq!(r.value, plain, "method {method:?}");
            assert_eq!(win_probability(&game, &r.witness).unwrap(), plain);
        }
    }
}

#[test]
fn oracles_agree_on_transformed_games() {
    let params = CorpusParams {
        players: 2,
        questions: 2,
        answers: 2,
        support: 3,
        max_weight: 5,
        accept_density: 0.5,
    };
    let g = parrep_core::corpus::random_game(&params, 11);
    let anchored = anchor(&g, &rat(1, 3)).unwrap();
    let doubled = repeat(&g, 2).unwrap();
    for game in [anchored, doubled] {
        let expect = oracle_partial_best_response(&game);
        for method in [Method::PlainExhaustive, Method::BestResponse] {
            let r = game_value(&game, method, &SearchOptions::default()).unwrap();
            assert_eq!(r.value, expect);
        }
    }
}

/// Frozen after the first oracle run: the exact value of the doubled GHZ
/// game and the lexicographically first optimal witness of the reduced
/// search. 9/16 <= 5/8 <= 3/4 brackets it between independent play and the
/// single-round value.
#[test]
fn double_ghz_fixture() {
    let g = build_ghz();
    let r2 = repeat(&g, 2).unwrap();
    let oracle = oracle_partial_best_response(&r2);
    assert_eq!(oracle, rat(5, 8));
    let br = game_value(&r2, Method::BestResponse, &SearchOptions::default()).unwrap();
    assert_eq!(br.value, rat(5, 8));
    assert!(br.value >= rat(9, 16) && br.value <= rat(3, 4));
    let expected_tables: Vec<Vec<(SymId, SymId)>> = vec![
        vec![(0, 0), (1, 0), (2, 0), (3, 0)],
        vec![(0, 0), (1, 0), (2, 0), (3, 1)],
        vec![(0, 0), (1, 0), (2, 0), (3, 2)],
    ];
    let got: Vec<Vec<(SymId, SymId)>> = br
        .witness
        .tables()
        .iter()
        .map(|t| t.iter().map(|(&q, &a)| (q, a)).collect())
        .collect();
    assert_eq!(got, expected_tables);
}
