//! Structural properties of connection graphs over the randomized corpus,
//! cross-checked against an independent implementation of the two-step
//! random process that defines the weights.

use std::collections::BTreeMap;

use num::Zero;
use parrep_core::corpus::{graph_corpus, value_corpus};
use parrep_core::game::{anchor, build_free_uniform, build_ghz, repeat, Game};
use parrep_core::graph::{build_connection_graph, check_graph_invariants};
use parrep_core::rat::{rat, rat_int, Rat};

/// Joint law of: draw x from mu, pick a player uniformly, redraw that
/// player's question conditioned on the others. Written against the raw
/// distribution map, not the graph builder.
fn process_law(game: &Game) -> BTreeMap<(Vec<u32>, Vec<u32>), Rat> {
    let k = game.players();
    let mut law = BTreeMap::new();
    for (x, px) in game.distribution() {
        for t in 0..k {
            let mut marginal = Rat::zero();
            for (y, py) in game.distribution() {
                if (0..k).all(|u| u == t || y[u] == x[u]) {
                    marginal += py.clone();
                }
            }
            for (y, py) in game.distribution() {
                if (0..k).all(|u| u == t || y[u] == x[u]) {
                    let w = px.clone() * py.clone() / (&marginal * rat_int(k as i64));
                    *law.entry((x.clone(), y.clone())).or_insert_with(Rat::zero) += w;
                }
            }
        }
    }
    law
}

#[test]
fn corpus_invariants_hold_exactly() {
    let mut games = graph_corpus(40, 31337);
    games.push(build_ghz());
    games.push(build_free_uniform(3, 2).unwrap());
    games.push(anchor(&build_ghz(), &rat(1, 2)).unwrap());
    games.push(repeat(&build_ghz(), 2).unwrap());
    for game in &games {
        let h = build_connection_graph(game).unwrap();
        let problems = check_graph_invariants(game, &h);
        assert!(problems.is_empty(), "{problems:?}");
    }
}

#[test]
fn random_process_reproduces_rho_on_small_supports() {
    let mut games: Vec<Game> = value_corpus(8, 555);
    games.push(build_ghz());
    games.push(build_free_uniform(2, 3).unwrap());
    games.push(anchor(&build_ghz(), &rat(1, 4)).unwrap());
    for game in &games {
        if game.support_len() > 64 {
            continue;
        }
        let h = build_connection_graph(game).unwrap();
        let law = process_law(game);
        for (i, x) in h.vertices().iter().enumerate() {
            for (j, y) in h.vertices().iter().enumerate() {
                let expect = law
                    .get(&(x.clone(), y.clone()))
                    .cloned()
                    .unwrap_or_else(Rat::zero);
                assert_eq!(h.weight(i, j), expect);
            }
        }
    }
}

#[test]
fn rho_min_respects_uniform_support_bound() {
    // uniform mu over a set S: rho_min >= 1/(k |S|^2)
    for game in [
        build_ghz(),
        build_free_uniform(2, 2).unwrap(),
        build_free_uniform(3, 3).unwrap(),
    ] {
        let h = build_connection_graph(&game).unwrap();
        let s = game.support_len() as i64;
        let k = game.players() as i64;
        assert!(*h.rho_min() >= rat(1, k * s * s));
    }
}
