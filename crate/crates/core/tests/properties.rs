//! Property tests for the exact-arithmetic plumbing and the transforms.

use num::{One, Zero};
use proptest::prelude::*;

use parrep_core::bounds::{theorem_bound, BoundParams};
use parrep_core::corpus::{random_game, CorpusParams};
use parrep_core::game::{anchor, decode_vec, encode_vec, repeat};
use parrep_core::rat::{format_rat, parse_rat, Rat};

proptest! {
    #[test]
    fn rational_strings_roundtrip(n in 0u32..1_000_000, d in 1u32..1_000_000) {
        let r = Rat::new(n.into(), d.into());
        let s = format_rat(&r);
        let back = parse_rat(&s).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn mixed_radix_roundtrip(radix in 2usize..6, len in 1usize..5, seed in any::<u64>()) {
        let mut v = Vec::with_capacity(len);
        let mut s = seed;
        for _ in 0..len {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            v.push((s % radix as u64) as u32);
        }
        let id = encode_vec(&v, radix);
        prop_assert_eq!(decode_vec(id, radix, len), v);
    }

    #[test]
    fn anchoring_preserves_total_mass(seed in any::<u64>(), a in 1i64..9) {
        let params = CorpusParams {
            players: 2,
            questions: 2,
            answers: 2,
            support: 3,
            max_weight: 7,
            accept_density: 0.5,
        };
        let g = random_game(&params, seed);
        let alpha = Rat::new(a.into(), 10.into());
        let anchored = anchor(&g, &alpha).unwrap();
        let total: Rat = anchored.distribution().values().cloned().sum();
        prop_assert_eq!(total, Rat::one());
        // every bottom-containing tuple accepts everything
        let bots = anchored.anchor_ids().unwrap().to_vec();
        for x in anchored.support() {
            if x.iter().zip(&bots).any(|(q, b)| q == b) {
                for c in 0..anchored.answer_combo_count() {
                    let ans = anchored.decode_answer_combo(c);
                    prop_assert!(anchored.accepts(x, &ans));
                }
            }
        }
    }

    #[test]
    fn repetition_support_is_the_exact_product(seed in any::<u64>(), n in 1usize..3) {
        let params = CorpusParams {
            players: 2,
            questions: 2,
            answers: 2,
            support: 4,
            max_weight: 5,
            accept_density: 0.5,
        };
        let g = random_game(&params, seed);
        let r = repeat(&g, n).unwrap();
        prop_assert_eq!(r.support_len(), g.support_len().pow(n as u32));
        let total: Rat = r.distribution().values().cloned().sum();
        prop_assert_eq!(total, Rat::one());
    }

    #[test]
    fn theorem_bound_stays_in_unit_interval(
        eps in 0.0f64..=1.0,
        lambda in 0.0f64..=1.0,
        n in 1u64..100_000,
        c in 0.0f64..10.0,
    ) {
        let p = BoundParams {
            epsilon: eps,
            lambda,
            n,
            log2_answers: 3.0,
            c,
            k: 3,
            alpha: None,
            rho_min: None,
        };
        let b = theorem_bound(&p).unwrap();
        prop_assert!(b.value >= 0.0 && b.value <= 1.0);
        // zero only through f64 underflow of a huge exponent
        if b.value == 0.0 {
            let exponent = c * eps.powi(5) * lambda.powi(2) * n as f64 / 3.0;
            prop_assert!(exponent > 700.0);
        }
        prop_assert_eq!(b.vacuous, eps * lambda * c == 0.0);
        let _ = Rat::zero();
    }
}
