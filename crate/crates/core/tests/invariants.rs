use coulomb_core::monopole::{coulomb_hilbert_series, EngineError, HsRequest, Strategy as Engine};
use coulomb_core::quiver::{
    build_bouquet_quiver, build_linear_nilpotent_quiver, build_partial_implosion_quiver,
    expected_coulomb_dimension_real, node_balance, ungauge, GaugeGroup, Quiver, QuiverNode,
};
use proptest::prelude::*;

/// Random unitary tree: node `k` hangs off an earlier node, every node may get flavors.
fn tree() -> impl Strategy<Value = Quiver> {
    (1usize..=3)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(1u32..=2, n),
                proptest::collection::vec(0u32..=4, n),
                proptest::collection::vec(any::<prop::sample::Index>(), n),
            )
        })
        .prop_map(|(ranks, flavors, parents)| {
            let mut nodes = Vec::new();
            let mut edges = Vec::new();
            for (k, &r) in ranks.iter().enumerate() {
                nodes.push(QuiverNode::gauge(format!("g{k}"), GaugeGroup::unitary(r)));
                if k > 0 {
                    edges.push((format!("g{}", parents[k].index(k)), format!("g{k}")));
                }
                if flavors[k] > 0 {
                    nodes
                        .push(QuiverNode::flavor(format!("f{k}"), GaugeGroup::unitary(flavors[k])));
                    edges.push((format!("g{k}"), format!("f{k}")));
                }
            }
            Quiver::new(nodes, edges).unwrap()
        })
}

fn kind<T>(r: Result<T, EngineError>) -> Result<T, std::mem::Discriminant<EngineError>> {
    r.map_err(|e| std::mem::discriminant(&e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn strategies_agree(q in tree()) {
        let fact = kind(coulomb_hilbert_series(&HsRequest::new(q.clone(), 4)));
        let direct = kind(
            coulomb_hilbert_series(&HsRequest::new(q, 4).strategy(Engine::Direct)),
        );
        match (fact, direct) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.series, b.series);
                prop_assert_eq!(a.stats.charge_count, b.stats.charge_count);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.map(|r| r.series), b.map(|r| r.series)),
        }
    }

    #[test]
    fn threads_do_not_change_series(q in tree(), threads in 2usize..=4) {
        let one = coulomb_hilbert_series(&HsRequest::new(q.clone(), 6));
        let many = coulomb_hilbert_series(&HsRequest::new(q, 6).threads(Some(threads)));
        match (one, many) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.series, b.series),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn quiver_json_round_trips(q in tree()) {
        let back = Quiver::from_json_str(&q.to_json_string()).unwrap();
        prop_assert_eq!(back.to_json_string(), q.to_json_string());
        prop_assert!(back.is_isomorphic_to(&q));
    }

    #[test]
    fn bouquet_leaves_and_dimension(n in 2u32..=12) {
        let q = build_bouquet_quiver(n).unwrap();
        for j in 1..=n {
            prop_assert_eq!(node_balance(&q, &format!("b{j}")).unwrap(), n as i64 - 3);
        }
        let fixed = ungauge(&q, "b1").unwrap();
        prop_assert_eq!(
            expected_coulomb_dimension_real(&fixed).unwrap(),
            2 * (n * n + n - 2) as usize
        );
    }

    #[test]
    fn chain_is_balanced(n in 2u32..=12) {
        let q = build_linear_nilpotent_quiver(n).unwrap();
        for j in 1..n {
            prop_assert_eq!(node_balance(&q, &format!("c{j}")).unwrap(), 0);
        }
    }
}

#[test]
fn partial_implosion_rank_drops_by_one_when_ungauged() {
    let q = build_partial_implosion_quiver(4, &[2, 2]).unwrap();
    let before: usize = coulomb_core::quiver::gauge_group_rank(&q);
    let leaf = q
        .nodes()
        .iter()
        .find(|n| n.is_gauge() && n.group == GaugeGroup::unitary(1) && n.id.starts_with('l'))
        .map(|n| n.id.clone())
        .unwrap();
    let after = coulomb_core::quiver::gauge_group_rank(&ungauge(&q, &leaf).unwrap());
    assert_eq!((before, after), (12, 11));
}
