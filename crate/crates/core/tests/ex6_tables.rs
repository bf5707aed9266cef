//! Recomputes every marginal-notification table of the six-device example
//! from the fixture edges. Printed ratios are two-decimal truncations.

use crowdmech::fixtures::{self, EX6_COSTS, EX6_EDGES};
use crowdmech::{NodeId, Rational, SocialGraph};

fn truncated_hundredths(r: Rational) -> i128 {
    (r * Rational::from_integer(100)).floor().to_integer()
}

fn check_table(g: &SocialGraph, set: &[u64], rows: &[(u64, usize, i128)]) {
    let oracle = g.coverage_oracle();
    let set: Vec<NodeId> = set.iter().map(|&o| g.dense_id(o).unwrap()).collect();
    for &(id, gain, hundredths) in rows {
        let node = g.dense_id(id).unwrap();
        let h = if set.contains(&node) {
            0
        } else {
            oracle.marginal(node, &set).unwrap()
        };
        assert_eq!(h, gain, "marginal of {id} given {set:?}");
        let ratio = Rational::new(h as i128, EX6_COSTS[id as usize - 1] as i128);
        assert_eq!(truncated_hundredths(ratio), hundredths, "ratio of {id}");
    }
}

#[test]
fn allocation_tables() {
    let g = fixtures::ex6_graph();
    check_table(
        &g,
        &[],
        &[
            (1, 4, 200),
            (2, 3, 75),
            (3, 4, 200),
            (4, 3, 60),
            (5, 3, 100),
            (6, 3, 150),
        ],
    );
    check_table(
        &g,
        &[1],
        &[(1, 0, 0), (2, 2, 50), (3, 0, 0), (4, 2, 40), (5, 2, 66), (6, 2, 100)],
    );
    check_table(
        &g,
        &[1, 6],
        &[(1, 0, 0), (2, 0, 0), (3, 0, 0), (4, 0, 0), (5, 0, 0), (6, 0, 0)],
    );
}

/// The pricing walkthrough draws the graph with the priced winner taken out.
#[test]
fn pricing_tables_without_first_winner() {
    let edges: Vec<(u64, u64)> = EX6_EDGES.iter().copied().filter(|&(u, v)| u != 1 && v != 1).collect();
    let g = SocialGraph::from_original_edges(2..=6, &edges);
    check_table(&g, &[], &[(2, 2, 50), (3, 4, 200), (4, 2, 40), (5, 2, 66), (6, 2, 100)]);
    check_table(&g, &[3], &[(2, 1, 25), (3, 0, 0), (4, 1, 20), (5, 1, 33), (6, 1, 50)]);
    check_table(&g, &[3, 6], &[(2, 0, 0), (3, 0, 0), (4, 0, 0), (5, 0, 0), (6, 0, 0)]);
}
