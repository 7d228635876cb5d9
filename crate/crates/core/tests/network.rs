use std::collections::BTreeMap;

use geohin_core::hetnet::{build_network, ClusteredRecord, NodeId, NodeType};
use geohin_core::rng;
use geohin_core::walker::{generate_corpus, walk, Metapath, WalkConfig};
use proptest::prelude::*;

fn rec(t: u32, l: u32, words: &[&str]) -> ClusteredRecord {
    ClusteredRecord { time: t, location: l, keywords: words.iter().map(|w| w.to_string()).collect() }
}

fn two_records() -> Vec<ClusteredRecord> {
    vec![rec(1, 1, &["a"]), rec(1, 2, &["a"])]
}

#[test]
fn two_record_weights_by_hand() {
    let g = build_network(&two_records());
    let w = |a: NodeId, b: NodeId| g.weight(&a, &b);
    assert_eq!(w(NodeId::Time(1), NodeId::word("a")), Some(2));
    assert_eq!(w(NodeId::Location(1), NodeId::word("a")), Some(1));
    assert_eq!(w(NodeId::Location(2), NodeId::word("a")), Some(1));
    assert_eq!(w(NodeId::Time(1), NodeId::Location(1)), Some(1));
    assert_eq!(w(NodeId::Time(1), NodeId::Location(2)), Some(1));
    assert_eq!(g.edge_count(), 5);
    let t = g.neighbors_of_type(&NodeId::word("a"), NodeType::T).unwrap();
    assert_eq!(t, vec![(NodeId::Time(1), 2)]);
}

#[test]
fn two_record_walks_follow_adjacency() {
    let g = build_network(&two_records());
    let adjacent: BTreeMap<(NodeId, NodeId), u64> =
        [("a", 1), ("a", 2)].iter().map(|&(w, l)| ((NodeId::word(w), NodeId::Location(l)), 1)).collect();
    let cfg = WalkConfig { metapath: Metapath::word_location(), num_walks: 20, walk_length: 9, seed: 3 };
    let (corpus, stats) = generate_corpus(&g, &cfg).unwrap();
    assert_eq!(stats.attempted, 20);
    // A lone word has no word neighbour, so every walk dead-ends at once.
    assert!(corpus.is_empty());
    let mut r = rng::stream(1, &[]);
    let wl = Metapath::new(vec![NodeType::W, NodeType::L, NodeType::W]).unwrap();
    for _ in 0..50 {
        let w = walk(&g, &wl, g.index_of(&NodeId::word("a")).unwrap(), 7, &mut r).unwrap();
        for pair in w.windows(2) {
            let (u, v) = (g.node(pair[0]).clone(), g.node(pair[1]).clone());
            if u.node_type() == NodeType::W {
                assert!(adjacent.contains_key(&(u, v)));
            }
        }
    }
}

#[test]
fn walk_count_contract() {
    let g = build_network(&[rec(0, 0, &["a", "b", "c"])]);
    let cfg = WalkConfig { metapath: Metapath::word_location(), num_walks: 30, walk_length: 10, seed: 1 };
    let (corpus, stats) = generate_corpus(&g, &cfg).unwrap();
    assert_eq!(stats.attempted, 90);
    assert_eq!(corpus.len(), 90);
    assert_eq!(generate_corpus(&g, &cfg).unwrap().0, corpus);
}

fn records() -> impl Strategy<Value = Vec<ClusteredRecord>> {
    let one = (0u32..3, 0u32..3, prop::collection::btree_set("[a-f]", 0..5))
        .prop_map(|(t, l, ws)| ClusteredRecord { time: t, location: l, keywords: ws.into_iter().collect() });
    prop::collection::vec(one, 1..15)
}

fn metapaths() -> impl Strategy<Value = Metapath> {
    prop_oneof![
        Just(Metapath::word_location()),
        Just(Metapath::word_location_time()),
        Just("W-L-W".parse().unwrap()),
        Just("W-T-L-W".parse().unwrap()),
    ]
}

proptest! {
    #[test]
    fn walks_conform_to_schedule_and_edges(recs in records(), mp in metapaths(), len in 2usize..25, seed in 0u64..1000) {
        let g = build_network(&recs);
        let cyc = mp.len() - 1;
        let cfg = WalkConfig { metapath: mp.clone(), num_walks: 2, walk_length: len, seed };
        let Ok((corpus, _)) = generate_corpus(&g, &cfg) else { return Ok(()); };
        for i in 0..corpus.len() {
            let w: Vec<&NodeId> = corpus.walk_ids(i).collect();
            prop_assert!(w.len() <= len);
            for (j, n) in w.iter().enumerate() {
                prop_assert_eq!(n.node_type(), mp.types()[j % cyc]);
            }
            for pair in w.windows(2) {
                prop_assert!(g.weight(pair[0], pair[1]).is_some());
            }
        }
    }

    #[test]
    fn graph_is_order_independent(mut recs in records(), seed in any::<u64>()) {
        let g = build_network(&recs);
        let n = recs.len();
        recs.rotate_left((seed as usize) % n);
        recs.reverse();
        prop_assert_eq!(build_network(&recs), g);
    }
}
