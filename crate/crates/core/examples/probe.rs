use parrep_core::corpus::{anchor_bases, graph_corpus, value_corpus};
use parrep_core::game::{anchor, build_ghz, repeat, Strategy};
use parrep_core::graph::{build_connection_graph, check_graph_invariants};
use parrep_core::congestion::{anchored_canonical_paths, congestion, validate_paths};
use parrep_core::rat::{format_rat, rat, rat_to_f64, Rat};
use parrep_core::rounding::{pipeline, PipelineOptions, StrategyChoice, SubsetChoice};
use parrep_core::spectral::{lambda2, normalized_laplacian};
use parrep_core::value::{game_value, win_probability, Method, SearchOptions};
use std::time::Instant;

fn main() {
    // claim22 cost at n=3 on anchored ghz, coordinatewise
    let g = build_ghz();
    let a = anchor(&g, &rat(1, 2)).unwrap();
    let t0 = Instant::now();
    let opts = PipelineOptions {
        strategy: StrategyChoice::Coordinatewise,
        subset: SubsetChoice::Auto,
        check_claim22: true,
        ..Default::default()
    };
    let rep = pipeline(&a, 3, &opts).unwrap();
    println!("anchored coordw n=3 WITH claim22: checked={} ok={} elapsed={:?}", rep.claim22_checked, rep.claim22_ok, t0.elapsed());

    // criterion 6 corpus timing
    let t0 = Instant::now();
    let corpus = value_corpus(12, 99);
    let sopts = SearchOptions::default();
    for (idx, game) in corpus.iter().enumerate() {
        let v1b = game_value(game, Method::BestResponse, &sopts).unwrap();
        let v1p = game_value(game, Method::PlainExhaustive, &sopts).unwrap();
        assert_eq!(v1b.value, v1p.value);
        let r2 = repeat(game, 2).unwrap();
        let v2b = game_value(&r2, Method::BestResponse, &sopts).unwrap();
        let v2p = game_value(&r2, Method::PlainExhaustive, &sopts).unwrap();
        assert_eq!(v2b.value, v2p.value);
        assert!(v2b.value <= v1b.value);
        assert!(v2b.value >= &v1b.value * &v1b.value);
        let anch = anchor(game, &rat(1, 3)).unwrap();
        let va = game_value(&anch, Method::BestResponse, &sopts).unwrap();
        let k = game.players() as i32;
        let keep = (Rat::from_integer(1.into()) - rat(1,3)).pow(k);
        assert_eq!(va.value, Rat::from_integer(1.into()) - keep * (Rat::from_integer(1.into()) - v1b.value.clone()));
        if idx == 0 { println!("first corpus game done at {:?}", t0.elapsed()); }
    }
    println!("value corpus (12 games, laws incl ^2 both methods + anchor law): {:?}", t0.elapsed());

    // criterion 4 timing
    let t0 = Instant::now();
    let graphs = graph_corpus(100, 1234);
    for game in &graphs {
        let h = build_connection_graph(game).unwrap();
        assert!(check_graph_invariants(game, &h).is_empty());
    }
    println!("graph corpus invariants (100 games): {:?}", t0.elapsed());

    // criterion 5 timing: anchored spectra + congestion for GHZ + 10 random bases x 3 alphas
    let t0 = Instant::now();
    let mut bases = vec![build_ghz()];
    bases.extend(anchor_bases(10, 777));
    for base in &bases {
        for (num, den) in [(1i64, 10i64), (1, 4), (2, 5)] {
            let alpha = rat(num, den);
            let anch = anchor(base, &alpha).unwrap();
            let h = build_connection_graph(&anch).unwrap();
            let paths = anchored_canonical_paths(&anch, &h).unwrap();
            validate_paths(&h, &paths).unwrap();
            let zeta = congestion(&h, &paths).unwrap();
            let k = anch.players() as i32;
            let cap = rat(8 * k as i64, 1) / alpha.pow(k);
            assert!(zeta <= cap);
            assert!(paths.max_len() <= 2 * anch.players());
            let l = normalized_laplacian(&h);
            let l2 = lambda2(&l).unwrap();
            assert!(l2.value >= 1.0 / rat_to_f64(&zeta) - 1e-8);
            let alpha_f = rat_to_f64(&alpha);
            assert!(l2.value >= alpha_f.powi(k) / (8.0 * k as f64) - 1e-8, "lemma bound base k={k} alpha={alpha_f} lambda={}", l2.value);
        }
    }
    println!("anchored certificates (11 bases x 3 alphas): {:?}", t0.elapsed());

    // ghz n=2 repeated-optimal pipeline with claim22 (criterion-style)
    let t0 = Instant::now();
    let opts = PipelineOptions { strategy: StrategyChoice::RepeatedOptimal, ..Default::default() };
    let rep = pipeline(&g, 2, &opts).unwrap();
    println!("ghz n=2 repeated-optimal: p_w={} dist={:.4} claim22={} ok={} eq={} elapsed={:?}",
        format_rat(&rep.p_w), rep.avg_ptilde_distance, rep.claim22_checked, rep.claim22_ok, rep.ss_exact_equals_rhs, t0.elapsed());

    // sanity: win_probability of coupled strategy
    let coupled = Strategy::cyclic_coupled(&g, &game_value(&g, Method::BestResponse, &SearchOptions::default()).unwrap().witness, 2);
    let r2 = repeat(&g, 2).unwrap();
    println!("coupled ghz^2 win prob = {}", format_rat(&win_probability(&r2, &coupled).unwrap()));
}
