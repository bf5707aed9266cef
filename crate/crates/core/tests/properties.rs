use std::collections::BTreeSet;

use crowdmech::ectai::{median_of, Aggregation};
use crowdmech::harness::witness::{profitable_cost_deviations, profitable_peak_deviation, unit_grid, winner_counts};
use crowdmech::harness::witness::{Tier1Instance, Tier1Mechanism};
use crowdmech::prob::{at_least_one, chernoff_tail, empirical_tail, sample_notified, NotifyModel};
use crowdmech::rational::int;
use crowdmech::tenm::{self, Budget, CostProfile, TenmConfig};
use crowdmech::wipd::{self, DemandPolicy, TaskId, TaskSet, ValuationOracle, ValuationTable, WipdConfig};
use crowdmech::{NodeId, Rational, SocialGraph};
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = SocialGraph> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n as u32 {
                for v in u + 1..n as u32 {
                    if bits[k] {
                        edges.push((u, v));
                    }
                    k += 1;
                }
            }
            SocialGraph::from_dense_edges(n, edges).unwrap()
        })
    })
}

fn instance_strategy(
    max_n: usize,
    max_cost: i64,
    budgets: std::ops::RangeInclusive<i64>,
) -> impl Strategy<Value = Tier1Instance> {
    graph_strategy(max_n).prop_flat_map(move |g| {
        let n = g.node_count();
        (proptest::collection::vec(1..=max_cost, n), budgets.clone()).prop_map(move |(c, b)| Tier1Instance {
            graph: g.clone(),
            costs: CostProfile::from_integers(&c).unwrap(),
            budget: Budget::from_integer(b).unwrap(),
        })
    })
}

/// Reference coverage straight from neighbour lists.
fn naive_cover(g: &SocialGraph, set: &[NodeId]) -> usize {
    set.iter()
        .flat_map(|&v| g.neighbors(v).iter().copied())
        .collect::<BTreeSet<_>>()
        .len()
}

fn subset(g: &SocialGraph, mask: u64) -> Vec<NodeId> {
    g.nodes().filter(|v| mask >> v.0 & 1 == 1).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coverage_is_monotone_submodular(g in graph_strategy(10), a in any::<u64>(), b in any::<u64>(), j in 0u32..10) {
        let j = NodeId(j % g.node_count() as u32);
        let a = a & !(1u64 << j.0);
        let small = subset(&g, a & b);
        let big = subset(&g, a);
        let oracle = g.coverage_oracle();
        prop_assert_eq!(oracle.coverage(&big).unwrap(), naive_cover(&g, &big));
        prop_assert!(oracle.coverage(&small).unwrap() <= oracle.coverage(&big).unwrap());
        let ms = oracle.marginal(j, &small).unwrap();
        let mb = oracle.marginal(j, &big).unwrap();
        prop_assert!(ms >= mb);
        let mut with = big.clone();
        with.push(j);
        prop_assert_eq!(mb, naive_cover(&g, &with) - naive_cover(&g, &big));
    }

    #[test]
    fn tier1_payments_stay_within_budget(inst in instance_strategy(14, 50, 20..=400)) {
        for mech in [Tier1Mechanism::Tenm(TenmConfig::default()), Tier1Mechanism::Ntbfm, Tier1Mechanism::Psm] {
            let out = mech.run(&inst.graph, &inst.costs, &inst.budget).unwrap();
            out.check_invariants(&inst.costs, &inst.budget).unwrap();
            prop_assert!(&out.total_payment() <= inst.budget.amount());
        }
    }

    #[test]
    fn tenm_payments_never_exceed_budget_with_allocation_only_delta(inst in instance_strategy(12, 50, 20..=400)) {
        let cfg = TenmConfig { delta: int(2), delta_scope: tenm::DeltaScope::AllocationOnly };
        let out = tenm::tenm_run(&inst.graph, &inst.costs, &inst.budget, &cfg).unwrap();
        out.check_invariants(&inst.costs, &inst.budget).unwrap();
    }

    #[test]
    fn winner_counts_grow_with_budget(inst in instance_strategy(12, 50, 1..=1)) {
        let budgets: Vec<Rational> = (1..=40).map(|b| int(b * 15)).collect();
        for mech in [Tier1Mechanism::Tenm(TenmConfig::default()), Tier1Mechanism::Ntbfm, Tier1Mechanism::Psm] {
            let counts = winner_counts(&mech, &inst.graph, &inst.costs, &budgets).unwrap();
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{} {:?}", mech.name(), counts);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tenm_and_psm_are_truthful(inst in instance_strategy(7, 30, 10..=120)) {
        for mech in [Tier1Mechanism::Tenm(TenmConfig::default()), Tier1Mechanism::Psm] {
            let devs = profitable_cost_deviations(&mech, &inst, 1..=30).unwrap();
            prop_assert!(devs.is_empty(), "{}: {:?}", mech.name(), devs);
        }
    }

    #[test]
    fn tenm_allocation_is_monotone(inst in instance_strategy(9, 30, 10..=120)) {
        let cfg = TenmConfig::default();
        let out = tenm::tenm_run(&inst.graph, &inst.costs, &inst.budget, &cfg).unwrap();
        for &w in &out.selected {
            let c = *inst.costs.get(w).unwrap();
            let mut lower = c - int(1);
            while lower > Rational::from_integer(0) {
                let again = tenm::tenm_run(&inst.graph, &inst.costs.with_report(w, lower).unwrap(), &inst.budget, &cfg).unwrap();
                prop_assert!(again.is_selected(w));
                lower -= int(3);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn median_is_bounded(peaks in proptest::collection::vec(0.0f64..=1.0, 1..=10)) {
        let m = median_of(&peaks).unwrap();
        let lo = peaks.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = peaks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
    }

    #[test]
    fn odd_panel_median_is_strategyproof(
        peaks in (1usize..=4).prop_flat_map(|k| proptest::collection::vec(0.0f64..=1.0, 2 * k + 1))
    ) {
        let m = median_of(&peaks).unwrap();
        let lo = peaks.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = peaks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
        let grid = unit_grid(0.05);
        prop_assert!(profitable_peak_deviation(Aggregation::Median, &peaks, &grid).unwrap().is_none());
    }

    #[test]
    fn at_least_one_exact_dominates_bound(z in 1usize..200, p in 0.0f64..=1.0) {
        let a = at_least_one(&NotifyModel::new(z, p).unwrap());
        prop_assert!(a.exact >= a.bound - 1e-12);
    }
}

/// Independent simulation of the ascending auction for additive valuations
/// under the default policy: a device asks for every unheld task it values
/// strictly above the raised price.
fn simulate_additive(vals: &[Vec<i64>], m: usize) -> (Vec<Vec<usize>>, Vec<i64>) {
    let n = vals.len();
    let mut price = vec![0i64; m];
    let mut holder: Vec<Option<usize>> = vec![None; m];
    loop {
        let mut quiet = true;
        for i in 0..n {
            let want: Vec<usize> = (0..m)
                .filter(|&j| holder[j] != Some(i) && vals[i][j] > price[j] + 1)
                .collect();
            if !want.is_empty() {
                quiet = false;
                for j in want {
                    holder[j] = Some(i);
                    price[j] += 1;
                }
            }
        }
        if quiet {
            break;
        }
    }
    let alloc = (0..n)
        .map(|i| (0..m).filter(|&j| holder[j] == Some(i)).collect())
        .collect();
    (alloc, price)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wipd_matches_additive_simulation(
        (m, vals) in (1usize..=6).prop_flat_map(|m| (Just(m), proptest::collection::vec(proptest::collection::vec(0i64..=12, m), 2..=4)))
    ) {
        let table = ValuationTable::additive_integers(m, &vals).unwrap();
        let n = vals.len();
        let mut oracle = ValuationOracle::new(table.clone(), DemandPolicy::PaperLiteral);
        let out = wipd::wipd_run(m, n, &mut oracle, &WipdConfig::new(int(1))).unwrap();
        out.check_invariants(&int(1)).unwrap();
        let (alloc, price) = simulate_additive(&vals, m);
        for i in 0..n {
            let want: TaskSet = alloc[i].iter().map(|&j| TaskId(j as u8)).collect();
            prop_assert_eq!(out.allocation[i], want);
        }
        prop_assert_eq!(&out.prices, &price.iter().map(|&p| int(p)).collect::<Vec<_>>());
        prop_assert!(wipd::stability_violations(&table, &out, &int(1), DemandPolicy::PaperLiteral).is_empty());
    }
}

/// With an even count the two middle reports are averaged, so a middle
/// reviewer can drag the aggregate towards itself by pushing its report out.
#[test]
fn even_panel_median_can_be_manipulated() {
    let peaks = [0.0, 0.0, 0.46, 0.64];
    let w = profitable_peak_deviation(Aggregation::Median, &peaks, &unit_grid(0.01))
        .unwrap()
        .unwrap();
    assert_eq!(w.reviewer, 2);
    assert!((w.truthful_aggregate - 0.23).abs() < 1e-12);
    assert!((w.deviating_aggregate - w.true_peak).abs() < (w.truthful_aggregate - w.true_peak).abs());
}

#[test]
fn chernoff_dominates_binomial_tails() {
    for (z, p) in [(10usize, 0.1), (20, 0.05), (8, 0.25), (50, 0.02)] {
        let model = NotifyModel::new(z, p).unwrap();
        let e = z as f64 * p;
        let samples = sample_notified(&model, 10_000, 11);
        for kappa in [0.5, 1.0, 2.0, 3.0] {
            let bound = chernoff_tail(e, kappa).unwrap();
            let emp = empirical_tail(&samples, (1.0 + kappa) * e);
            assert!(bound >= emp, "z={z} p={p} κ={kappa}: {bound} < {emp}");
        }
    }
}
