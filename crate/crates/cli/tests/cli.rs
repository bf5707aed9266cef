use std::path::Path;
use std::process::{Command, Output};

use crowdmech::fixtures;

fn crowdmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdmech"))
        .args(args)
        .output()
        .unwrap()
}

fn write_ex6(dir: &Path) -> (String, String) {
    let graph = dir.join("ex6.txt");
    std::fs::write(&graph, fixtures::ex6_edge_list()).unwrap();
    let costs = dir.join("ex6_costs.csv");
    let rows: String = fixtures::EX6_COSTS
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{},{c}\n", i + 1))
        .collect();
    std::fs::write(&costs, format!("node_id,cost\n{rows}")).unwrap();
    (graph.to_str().unwrap().into(), costs.to_str().unwrap().into())
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn tenm_on_ex6_writes_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, costs) = write_ex6(dir.path());
    let out = dir.path().join("r.json");
    let o = crowdmech(&[
        "tenm",
        "--graph",
        &graph,
        "--costs",
        &costs,
        "--budget",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&std::fs::read(&out).unwrap());
    assert_eq!(r["selected"], serde_json::json!([1, 6]));
    assert_eq!(r["notified"], serde_json::json!([1, 2, 3, 4, 5, 6]));
    assert_eq!(r["payments"], serde_json::json!({"1": "2", "6": "3"}));
    assert_eq!(r["total_payment"], "5");
    assert_eq!(r["budget_feasible"], true);
    assert!(r.get("elapsed_ms").is_none());
}

#[test]
fn tenm_csv_lists_every_node() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, costs) = write_ex6(dir.path());
    let o = crowdmech(&[
        "tenm", "--graph", &graph, "--costs", &costs, "--budget", "12", "--format", "csv",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "node_id,cost,selected,payment");
    assert_eq!(lines[1], "1,2,true,2");
    assert_eq!(lines[2], "2,4,false,");
    assert_eq!(lines.len(), 7);
}

#[test]
fn estimate_prints_expectation() {
    let o = crowdmech(&["estimate", "--degree", "4", "--p", "0.5"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().next(), Some("2.0"));
}

#[test]
fn estimate_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = crowdmech(&[
        "estimate",
        "--degree",
        "10",
        "--p",
        "0.2",
        "--kappa",
        "1",
        "--trials",
        "2000",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("estimator,params,value\nexpected_notified,degree=10 p=0.2,2.0\n"));
    assert!(text.contains("chernoff_tail,"));
    assert!(text.contains("monte_carlo_mean,"));
}

#[test]
fn graph_info_and_id_map() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, _) = write_ex6(dir.path());
    let map = dir.path().join("map.csv");
    let o = crowdmech(&["graph-info", "--graph", &graph, "--id-map", map.to_str().unwrap()]);
    assert!(o.status.success());
    let r = json(&o.stdout);
    assert_eq!(r["nodes"], 6);
    assert_eq!(r["edges"], 10);
    assert_eq!(r["degree"]["max"], 4);
    assert_eq!(std::fs::read_to_string(&map).unwrap().lines().count(), 7);
}

#[test]
fn ranking_and_auction_commands_run() {
    for args in [
        vec!["ectai", "--devices", "12", "--seed", "1"],
        vec!["avr", "--devices", "12", "--dist", "uniform"],
        vec!["wipd", "--devices", "3", "--tasks", "4", "--policy", "paper-literal"],
        vec!["greedy", "--devices", "3", "--tasks", "4"],
    ] {
        let o = crowdmech(&args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let r = json(&o.stdout);
        assert_eq!(r["schema_version"], 1);
        assert_eq!(r["mechanism"], args[0]);
    }
}

#[test]
fn scripted_ranking_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let (_, plan, _) = fixtures::example2();
    let batches = match plan {
        crowdmech::ectai::BatchPlan::Scripted(b) => b,
        _ => unreachable!(),
    };
    let bpath = dir.path().join("batches.json");
    std::fs::write(&bpath, serde_json::to_string(&batches).unwrap()).unwrap();
    let ppath = dir.path().join("peaks.csv");
    let peaks = "batch,reviewer,alpha\n1,1,0.2\n1,3,0.5\n1,7,0.35\n1,8,0.65\n1,11,0.9\n\
                 2,2,0.5\n2,4,0.1\n2,6,0.3\n2,8,0.7\n2,11,0.95\n\
                 3,2,0.45\n3,3,0.6\n3,7,0.15\n3,9,0.8\n3,11,0.4\n\
                 4,1,0.1\n4,7,0.55\n4,9,0.35\n4,10,0.3\n4,12,0.85\n";
    std::fs::write(&ppath, peaks).unwrap();
    let o = crowdmech(&[
        "ectai",
        "--devices",
        "12",
        "--batches",
        bpath.to_str().unwrap(),
        "--peaks",
        ppath.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o.stdout)["ordered"], serde_json::json!([4, 3, 10, 8]));
}

#[test]
fn greedy_reads_bids() {
    let dir = tempfile::tempdir().unwrap();
    let bids = dir.path().join("bids.csv");
    std::fs::write(&bids, "device,tasks,bid\n0,0;1,10\n1,1,3\n2,0,4\n").unwrap();
    let o = crowdmech(&[
        "greedy",
        "--bids",
        bids.to_str().unwrap(),
        "--tasks",
        "2",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "device,allocation,payment\n0,,0\n1,1,3\n2,0,4\n"
    );
}

#[test]
fn wipd_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = crowdmech(&[
        "wipd",
        "--devices",
        "2",
        "--tasks",
        "3",
        "--seed",
        "4",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("pass,device,demanded,prices\n1,0,"));
}

#[test]
fn experiment_is_reproducible_across_workers() {
    let run = |workers: &str| {
        crowdmech(&[
            "--workers",
            workers,
            "experiment",
            "--mechanism",
            "psm",
            "--rounds",
            "5",
            "--seed",
            "7",
        ])
        .stdout
    };
    let a = run("1");
    assert!(!a.is_empty());
    assert_eq!(a, run("8"));
    assert_eq!(a, run("1"));
    let r = json(&a);
    assert_eq!(r["rounds"].as_array().unwrap().len(), 5);
    assert_eq!(r["budget_feasible"], true);
}

#[test]
fn timing_is_opt_in() {
    let base = ["experiment", "--mechanism", "tenm", "--rounds", "2", "--nodes", "10"];
    let plain = String::from_utf8(crowdmech(&base).stdout).unwrap();
    assert!(!plain.contains("elapsed_ms"));
    let mut timed = base.to_vec();
    timed.push("--timing");
    assert!(String::from_utf8(crowdmech(&timed).stdout)
        .unwrap()
        .contains("elapsed_ms"));
}

#[test]
fn exit_codes() {
    assert_eq!(crowdmech(&["--help"]).status.code(), Some(0));
    assert_eq!(crowdmech(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        crowdmech(&["tenm", "--graph", "/nonexistent", "--budget", "5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        crowdmech(&["estimate", "--degree", "3", "--p", "1.5"]).status.code(),
        Some(1)
    );
    assert_eq!(
        crowdmech(&["experiment", "--mechanism", "ectai", "--nodes", "5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        crowdmech(&["--workers", "0", "estimate", "--degree", "3", "--p", "0.5"])
            .status
            .code(),
        Some(1)
    );
    // A pass guard of one cannot hold a run with any demand: invariant exit.
    let o = crowdmech(&["wipd", "--devices", "2", "--tasks", "2", "--max-rounds", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
