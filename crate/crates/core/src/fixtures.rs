//! Small hand-checkable instances shared by tests, the acceptance suite and
//! the CLI.

use crate::ectai::{BatchPlan, PlacedPanel, ScriptedBatch, ScriptedPeaks};
use crate::graph::{NodeId, SocialGraph};
use crate::tenm::CostProfile;
use crate::wipd::{ScriptedOracle, TaskSet};

/// Six-device graph of the tier-one worked example, original ids 1..=6.
pub fn ex6_graph() -> SocialGraph {
    SocialGraph::from_original_edges(1..=6, &EX6_EDGES)
}

pub const EX6_EDGES: [(u64, u64); 10] = [
    (1, 2),
    (1, 4),
    (1, 5),
    (1, 6),
    (2, 3),
    (2, 5),
    (3, 4),
    (3, 5),
    (3, 6),
    (4, 6),
];

/// Reported costs of devices 1..=6.
pub fn ex6_costs() -> CostProfile {
    CostProfile::from_integers(&EX6_COSTS).expect("positive costs")
}

pub const EX6_COSTS: [i64; 6] = [2, 4, 2, 5, 3, 2];

/// Edge list text of [`ex6_graph`].
pub fn ex6_edge_list() -> String {
    EX6_EDGES.iter().map(|(u, v)| format!("{u} {v}\n")).collect()
}

/// Twelve devices ranked in four scripted batches of three with five
/// reviewers each; the batch medians are 0.50, 0.50, 0.45 and 0.35.
///
/// Returns the device list (`NodeId(1)..=NodeId(12)`), the batch plan and the
/// reviewer peaks.
pub fn example2() -> (Vec<NodeId>, BatchPlan, ScriptedPeaks) {
    let batch = |panel: &[(u32, f64)], reviewers: [u32; 5]| ScriptedBatch {
        panel: PlacedPanel::new(panel.iter().map(|&(d, p)| (NodeId(d), p)).collect()).expect("valid panel"),
        reviewers: reviewers.iter().map(|&r| NodeId(r)).collect(),
    };
    let plan = BatchPlan::Scripted(vec![
        batch(&[(2, 0.25), (4, 0.47), (9, 0.70)], [1, 3, 7, 8, 11]),
        batch(&[(1, 0.15), (3, 0.52), (7, 0.85)], [2, 4, 6, 8, 11]),
        batch(&[(6, 0.20), (10, 0.40), (12, 0.75)], [2, 3, 7, 9, 11]),
        batch(&[(5, 0.60), (8, 0.34), (11, 0.05)], [1, 7, 9, 10, 12]),
    ]);
    #[rustfmt::skip]
    let peaks = ScriptedPeaks::new([
        (1, 1, 0.20), (1, 3, 0.50), (1, 7, 0.35), (1, 8, 0.65), (1, 11, 0.90),
        (2, 2, 0.50), (2, 4, 0.10), (2, 6, 0.30), (2, 8, 0.70), (2, 11, 0.95),
        (3, 2, 0.45), (3, 3, 0.60), (3, 7, 0.15), (3, 9, 0.80), (3, 11, 0.40),
        (4, 1, 0.10), (4, 7, 0.55), (4, 9, 0.35), (4, 10, 0.30), (4, 12, 0.85),
    ]
    .map(|(b, r, a)| (b, NodeId(r), a)));
    ((1..=12).map(NodeId).collect(), plan, peaks)
}

/// Scripted demands for three devices over eight tasks (task `k` is `t_{k+1}`).
/// Replaying them ends in the partition `{t1,t2,t3}`, `{t4,t6,t8}`, `{t5,t7}`.
pub fn script_8x3() -> ScriptedOracle {
    let s = |tasks: &[u8]| TaskSet::of(&tasks.iter().map(|t| t - 1).collect::<Vec<_>>());
    ScriptedOracle::new([
        (1, 0, s(&[1, 2, 3])),
        (1, 1, s(&[4, 6, 8])),
        (1, 2, s(&[5])),
        (2, 0, s(&[7])),
        (2, 1, s(&[3])),
        (2, 2, s(&[3, 7])),
        (3, 0, s(&[3, 4, 6])),
        (3, 1, s(&[4, 6, 7])),
        (3, 2, s(&[3, 7])),
        (4, 0, s(&[3, 7, 8])),
        (4, 1, s(&[8])),
        (4, 2, s(&[7])),
    ])
}
