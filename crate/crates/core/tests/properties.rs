use hbrb_core::io::{decode_descriptors, encode_descriptors, parse_vocab_text, vocab_to_text};
use hbrb_core::{score_l1, train, BinaryDescriptor, BowVector, DescriptorSet, TrainConfig};
use proptest::prelude::*;

fn descriptor(bytes: usize) -> impl Strategy<Value = BinaryDescriptor> {
    proptest::collection::vec(any::<u8>(), bytes).prop_map(BinaryDescriptor::from_bytes)
}

fn bow() -> impl Strategy<Value = BowVector> {
    proptest::collection::vec((0usize..40, 0.0f64..5.0), 0..12).prop_map(BowVector::from_weights)
}

fn strategy() -> impl Strategy<Value = hbrb_core::Strategy> {
    prop_oneof![
        Just(hbrb_core::Strategy::KMajority),
        Just(hbrb_core::Strategy::LocalBrb),
        Just(hbrb_core::Strategy::GlobalHbrb),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decoding_arbitrary_bytes_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode_descriptors(&bytes);
    }

    #[test]
    fn descriptor_container_round_trips(
        descs in proptest::collection::vec(descriptor(4), 0..60),
        cut in 0usize..60,
    ) {
        let n = descs.len();
        let ends = if n == 0 { vec![] } else { let c = cut % n; if c == 0 { vec![n] } else { vec![c, n] } };
        let set = DescriptorSet::new(32, descs, ends).unwrap();
        let bytes = encode_descriptors(&set);
        prop_assert_eq!(bytes.len(), 28 + 4 * n + 8 * set.group_ends().len());
        let back = decode_descriptors(&bytes).unwrap();
        prop_assert_eq!(encode_descriptors(&back), bytes);
        prop_assert_eq!(back, set);
    }

    #[test]
    fn score_is_symmetric_bounded_and_reflexive(a in bow(), b in bow()) {
        let s = score_l1(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, score_l1(&b, &a));
        if !a.is_empty() {
            prop_assert_eq!(score_l1(&a, &a), 1.0);
        }
        if a.iter().all(|(w, _)| b.get(w).is_none()) {
            prop_assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn trained_trees_round_trip_through_text(
        descs in proptest::collection::vec(descriptor(4), 1..120),
        k in 2usize..5,
        depth in 1usize..4,
        strategy in strategy(),
        seed in any::<u64>(),
    ) {
        let set = DescriptorSet::single(descs.clone()).unwrap();
        let vocab = train(&set, &TrainConfig { k, depth, strategy, seed, ..TrainConfig::default() }).unwrap();
        let text = vocab_to_text(&vocab);
        let loaded = parse_vocab_text(&text).unwrap();
        prop_assert_eq!(vocab_to_text(&loaded), text);
        prop_assert_eq!(loaded.word_count(), vocab.word_count());
        for d in &descs {
            prop_assert_eq!(loaded.lookup_word(d).unwrap(), vocab.lookup_word(d).unwrap());
        }
        // Depth never exceeds L and every internal node has at most k children.
        let depths = vocab.node_depths();
        prop_assert!(depths.iter().all(|&d| d <= depth));
        prop_assert!(vocab.nodes().iter().all(|n| n.children.len() <= k));
    }
}
