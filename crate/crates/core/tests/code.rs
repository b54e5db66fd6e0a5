mod common;

use std::collections::{BTreeSet, HashSet};

use common::{edge, gf, naive_rank, random_code, rows_of, src};
use mnet_core::code::received;
use mnet_core::polymatroid::{check_axioms, from_subspaces, LabeledRankOracle};
use mnet_core::{
    build, butterfly, propagate, routing_code, verify_solution, Error, FMatrix, InducedRankOracle, LinearCode,
    MessageRef, Network, RankOracle,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Selection rows for `demands`, built from the sorted source order without
/// going through the library.
fn selection_by_hand(net: &Network, demands: &[String], p: u64, d: usize) -> FMatrix {
    let mut sources: Vec<&String> = net.source_messages.keys().collect();
    sources.sort();
    let width = sources.len() * d;
    let mut rows = Vec::new();
    for msg in demands {
        let block = sources.iter().position(|s| &net.source_messages[*s] == msg).unwrap();
        for r in 0..d {
            let mut row = vec![0u64; width];
            row[block * d + r] = 1;
            rows.push(row);
        }
    }
    FMatrix::from_rows(gf(p), &rows, width).unwrap()
}

#[test]
fn routing_codes_decode_bit_exact() {
    for m in 2..=4 {
        let (net, _) = build(m).unwrap();
        for p in [2, 3, 5] {
            let code = routing_code(m, p).unwrap();
            assert!(code.is_selection_only());
            let transfer = propagate(&net, &code).unwrap();
            let verdict = verify_solution(&net, &code).unwrap();
            assert!(verdict.solution, "m = {m}, p = {p}");
            for tv in &verdict.terminals {
                let decoder = tv.decoder.as_ref().unwrap();
                let b = received(&net, &transfer, &tv.terminal).unwrap();
                let want = selection_by_hand(&net, &net.demands[&tv.terminal], p, m);
                assert_eq!(decoder.mul(&b).unwrap(), want);
                assert_eq!(tv.supplied_decoder_consistent, Some(true));
            }
        }
    }
}

#[test]
fn routing_code_over_gf7() {
    let (net, _) = build(2).unwrap();
    assert!(verify_solution(&net, &routing_code(2, 7).unwrap()).unwrap().solution);
    assert!(matches!(routing_code(2, 6), Err(Error::CompositeModulus(6))));
}

#[test]
fn zero_code_fails_everywhere() {
    for (net, d) in [(butterfly(), 1), (build(2).unwrap().0, 2), (build(3).unwrap().0, 3)] {
        let code = LinearCode::zero(&net, gf(2), d).unwrap();
        let verdict = verify_solution(&net, &code).unwrap();
        assert!(!verdict.solution);
        assert_eq!(verdict.failing().count(), net.terminals().len());
        assert!(verdict.failing().all(|t| t.witness.is_some()));
    }
}

#[test]
fn wrong_dimension_is_a_shape_error() {
    let (net, _) = build(2).unwrap();
    let mut code = routing_code(2, 2).unwrap();
    code.set_map("e_1_1", edge("sv_1_1"), FMatrix::identity(gf(2), 3));
    assert!(matches!(propagate(&net, &code), Err(Error::ShapeMismatch(_))));
}

#[test]
fn routing_subspace_rank_of_y11_x11_is_three() {
    let (net, l) = build(2).unwrap();
    let transfer = propagate(&net, &routing_code(2, 2).unwrap()).unwrap();
    let y = transfer.message_matrix(&l.y_diag_ref(0)).unwrap();
    let x = transfer.message_matrix(&l.x_ref(0, 0)).unwrap();
    let table = from_subspaces(&[y.clone(), x.clone()]).unwrap();
    assert_eq!(table.rank_mask(0b11), 3);
    assert_eq!(naive_rank(2, &rows_of(&[&y, &x])), 3);
}

fn global_rows(oracle: &InducedRankOracle, refs: &[MessageRef]) -> Vec<Vec<u64>> {
    let ms: Vec<&FMatrix> = refs.iter().map(|r| oracle.matrix(r).unwrap()).collect();
    rows_of(&ms)
}

/// Edges reachable from `edge`'s head, `edge` excluded.
fn downstream(net: &Network, start: &str) -> HashSet<String> {
    let mut out = HashSet::new();
    let mut stack = vec![net.edge(start).unwrap().head.clone()];
    while let Some(node) = stack.pop() {
        for e in net.out_edges(&node).unwrap() {
            if out.insert(e.id.clone()) {
                stack.push(e.head.clone());
            }
        }
    }
    out
}

fn scaled(code: &LinearCode, net: &Network, target: &str, k: u32) -> LinearCode {
    let mut out = code.clone();
    for input in net.node_inputs(&net.edge(target).unwrap().tail).unwrap() {
        if let Some(m) = code.map(target, &input) {
            out.set_map(target, input, m.scale(k));
        }
    }
    out
}

fn small_networks() -> Vec<(Network, usize)> {
    vec![(butterfly(), 1), (butterfly(), 2), (build(2).unwrap().0, 1), (build(2).unwrap().0, 2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn edge_adds_nothing_to_its_inputs(seed in any::<u64>(), which in 0usize..4, p in prop::sample::select(vec![2u64, 3, 5])) {
        let (net, d) = small_networks().swap_remove(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let code = random_code(&mut rng, &net, gf(p), d);
        let oracle = InducedRankOracle::new(&net, &code).unwrap();
        for e in &net.edges {
            let inputs = net.node_inputs(&e.tail).unwrap();
            let mut with = inputs.clone();
            with.push(edge(&e.id));
            let base = oracle.rank_refs(&inputs).unwrap();
            prop_assert_eq!(base, oracle.rank_refs(&with).unwrap());
            prop_assert_eq!(base, naive_rank(p, &global_rows(&oracle, &inputs)));
        }
    }

    #[test]
    fn decodable_terminals_satisfy_decoder_equation(seed in any::<u64>(), which in 0usize..4, p in prop::sample::select(vec![2u64, 3])) {
        let (net, d) = small_networks().swap_remove(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let code = random_code(&mut rng, &net, gf(p), d);
        let transfer = propagate(&net, &code).unwrap();
        let verdict = verify_solution(&net, &code).unwrap();
        prop_assert_eq!(verdict.solution, verdict.terminals.iter().all(|t| t.decodable));
        for tv in &verdict.terminals {
            let b = received(&net, &transfer, &tv.terminal).unwrap();
            let want = selection_by_hand(&net, &net.demands[&tv.terminal], p, d);
            // independent decodability test: the demand rows add no rank
            let rb = naive_rank(p, &rows_of(&[&b]));
            let rbw = naive_rank(p, &rows_of(&[&b, &want]));
            prop_assert_eq!(tv.decodable, rb == rbw);
            if let Some(dec) = &tv.decoder {
                prop_assert_eq!(dec.mul(&b).unwrap(), want);
            }
        }
    }

    #[test]
    fn induced_ranks_form_a_polymatroid(seed in any::<u64>(), which in 0usize..4, n in 1usize..=8) {
        let (net, d) = small_networks().swap_remove(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = if seed % 2 == 0 { 2 } else { 3 };
        let code = random_code(&mut rng, &net, gf(p), d);
        let oracle = InducedRankOracle::new(&net, &code).unwrap();
        let all = oracle.elements().to_vec();
        let picks: Vec<MessageRef> = (0..n).map(|_| all[rng.gen_range(0..all.len())].clone()).collect();
        let mats: Vec<FMatrix> = picks.iter().map(|r| oracle.matrix(r).unwrap().clone()).collect();
        let table = from_subspaces(&mats).unwrap();
        let report = check_axioms(&table);
        prop_assert!(report.pass, "{:?}", report.witnesses);
        // the table agrees with the oracle and the independent rank
        for mask in 0..1usize << n {
            let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| oracle.index_of(&picks[i]).unwrap()).collect();
            prop_assert_eq!(table.rank_mask(mask), oracle.rank(&idx));
        }
    }

    /// Scaling every map on one edge by a nonzero constant leaves that
    /// edge's row space alone, so only sets containing a strictly downstream
    /// edge can change rank, and nothing changes for terminal in-edges.
    #[test]
    fn scaling_an_edge_only_moves_downstream_ranks(seed in any::<u64>(), which in 0usize..4) {
        let (net, d) = small_networks().swap_remove(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 5;
        let code = random_code(&mut rng, &net, gf(p), d);
        let target = net.edges[rng.gen_range(0..net.edges.len())].id.clone();
        let k = rng.gen_range(1..p as u32);
        let before = InducedRankOracle::new(&net, &code).unwrap();
        let after = InducedRankOracle::new(&net, &scaled(&code, &net, &target, k)).unwrap();
        let below = downstream(&net, &target);
        let elements = before.elements().to_vec();
        for _ in 0..64 {
            let size = rng.gen_range(1..=4);
            let subset: BTreeSet<usize> = (0..size).map(|_| rng.gen_range(0..elements.len())).collect();
            let subset: Vec<usize> = subset.into_iter().collect();
            let touches = subset.iter().any(|&i| below.contains(elements[i].id()) && matches!(elements[i], MessageRef::Edge(_)));
            if !touches {
                prop_assert_eq!(before.rank(&subset), after.rank(&subset));
            }
            if below.is_empty() {
                prop_assert_eq!(before.rank(&subset), after.rank(&subset));
            }
        }
    }
}

/// Two relays each add the same two sources; scaling one single-input
/// source edge feeding the first relay changes the joint rank of the two
/// relay outputs, although neither output is the scaled edge.
#[test]
fn scaling_upstream_can_change_unrelated_looking_sets() {
    let text = r#"{
      "nodes": [{"id":"s1","role":"source"},{"id":"s2","role":"source"},
                {"id":"a","role":"intermediate"},{"id":"b","role":"intermediate"},
                {"id":"t","role":"terminal"}],
      "edges": [{"id":"e1","tail":"s1","head":"a"},{"id":"e2","tail":"s2","head":"a"},
                {"id":"e3","tail":"s1","head":"b"},{"id":"e4","tail":"s2","head":"b"},
                {"id":"f1","tail":"a","head":"t"},{"id":"f2","tail":"b","head":"t"}],
      "source_messages": {"s1":"x1","s2":"x2"},
      "demands": {"t":["x1"]}
    }"#;
    let net = Network::parse(text).unwrap();
    let f = gf(3);
    let one = FMatrix::identity(f, 1);
    let mut code = LinearCode::new(f, 1);
    for (e, input) in [("e1", src("x1")), ("e2", src("x2")), ("e3", src("x1")), ("e4", src("x2"))] {
        code.set_map(e, input, one.clone());
    }
    for (e, input) in [("f1", edge("e1")), ("f1", edge("e2")), ("f2", edge("e3")), ("f2", edge("e4"))] {
        code.set_map(e, input, one.clone());
    }
    let pair = [edge("f1"), edge("f2")];
    let before = InducedRankOracle::new(&net, &code).unwrap();
    let after = InducedRankOracle::new(&net, &scaled(&code, &net, "e1", 2)).unwrap();
    assert_eq!(before.rank_refs(&pair).unwrap(), 1);
    assert_eq!(after.rank_refs(&pair).unwrap(), 2);
}

#[test]
fn code_json_round_trip_and_errors() {
    let code = routing_code(2, 3).unwrap();
    let back = LinearCode::parse(&code.to_json()).unwrap();
    assert_eq!(back, code);
    let bad = r#"{"p":2,"d":2,"local_maps":[{"edge":"e_1_1","input":{"kind":"edge","id":"sv_1_1"},"matrix":[[1,0,0],[0,1,0]]}]}"#;
    assert!(matches!(LinearCode::parse(bad), Err(Error::ShapeMismatch(_))));
    let composite = r#"{"p":4,"d":1,"local_maps":[]}"#;
    assert!(matches!(LinearCode::parse(composite), Err(Error::CompositeModulus(4))));
}
