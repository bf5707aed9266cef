use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{ExperimentConfig, Mechanism};
use crate::error::Result;
use crate::graph::SocialGraph;
use crate::rational::{self, Rational};

/// Bumped whenever a report field changes meaning.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Exact strings for a list of rationals.
pub mod exact_vec {
    use serde::de::Deserializer;
    use serde::{Deserialize, Serialize, Serializer};

    use crate::rational::{self, Rational};

    #[derive(Serialize, Deserialize)]
    #[serde(transparent)]
    struct Exact(#[serde(with = "rational::exact")] Rational);

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|r| Exact(*r)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Ok(Vec::<Exact>::deserialize(d)?.into_iter().map(|e| e.0).collect())
    }
}

mod exact_opt {
    use serde::Serializer;

    use crate::rational::{self, Rational};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&rational::to_exact_string(r)),
            None => s.serialize_none(),
        }
    }
}

fn exact_map<S: Serializer>(m: &BTreeMap<u64, Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, v)| (k.to_string(), rational::to_exact_string(v))))
}

/// Lowercase hex SHA-256 over the concatenated parts.
pub fn digest_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Digest of the node ids and edges, both in original ids.
pub fn graph_digest(graph: &SocialGraph) -> String {
    let mut text = String::new();
    for v in graph.nodes() {
        text.push_str(&format!("n {}\n", graph.original_id(v)));
    }
    for (u, v) in graph.edges() {
        text.push_str(&format!("e {} {}\n", graph.original_id(u), graph.original_id(v)));
    }
    digest_hex(&[text.as_bytes()])
}

/// One measured quantity. Exact values serialize as strings such as `"7/2"`.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    Count(u64),
    Exact(Rational),
    Real(f64),
    Flag(bool),
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Metric::Count(c) => s.serialize_u64(*c),
            Metric::Exact(r) => s.serialize_str(&rational::to_exact_string(r)),
            Metric::Real(x) => s.serialize_f64(*x),
            Metric::Flag(b) => s.serialize_bool(*b),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Count(c) => write!(f, "{c}"),
            Metric::Exact(r) => write!(f, "{}", rational::to_exact_string(r)),
            Metric::Real(x) => write!(f, "{x}"),
            Metric::Flag(b) => write!(f, "{b}"),
        }
    }
}

/// Metrics of one round at one budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    #[serde(with = "exact_opt", skip_serializing_if = "Option::is_none")]
    pub budget: Option<Rational>,
    pub metrics: BTreeMap<String, Metric>,
    /// Original ids, in selection order.
    pub winners: Vec<u64>,
    /// Keyed by original id.
    #[serde(serialize_with = "exact_map")]
    pub payments: BTreeMap<u64, Rational>,
}

/// A round in which the deviators together did strictly better than they
/// would have by reporting truthfully.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationWitness {
    pub round: usize,
    #[serde(with = "exact_opt", skip_serializing_if = "Option::is_none")]
    pub budget: Option<Rational>,
    pub deviators: usize,
    pub deviating_utility: Metric,
    pub truthful_utility: Metric,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MechanismReport {
    pub schema_version: u32,
    pub mechanism: Mechanism,
    /// SHA-256 of the configuration and the graph.
    pub config_digest: String,
    pub seed: u64,
    pub graph_nodes: usize,
    pub graph_edges: usize,
    pub config: ExperimentConfig,
    pub rounds: Vec<RoundRecord>,
    /// Whether every round paid within its budget; tier one only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_feasible: Option<bool>,
    pub witnesses: Vec<DeviationWitness>,
}

impl MechanismReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One row per `(round, budget, metric)`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "round,budget,mechanism,metric,value")?;
        for r in &self.rounds {
            let budget = r.budget.as_ref().map(rational::to_exact_string).unwrap_or_default();
            for (k, v) in &r.metrics {
                writeln!(out, "{},{},{},{},{}", r.round, budget, self.mechanism.name(), k, v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::{int, ratio};

    #[test]
    fn metrics_serialize_exactly() {
        assert_eq!(serde_json::to_string(&Metric::Exact(ratio(7, 2))).unwrap(), "\"7/2\"");
        assert_eq!(serde_json::to_string(&Metric::Exact(int(5))).unwrap(), "\"5\"");
        assert_eq!(serde_json::to_string(&Metric::Count(3)).unwrap(), "3");
        assert_eq!(Metric::Flag(true).to_string(), "true");
    }

    #[test]
    fn digests_are_stable_and_sensitive() {
        let g = fixtures::ex6_graph();
        assert_eq!(graph_digest(&g), graph_digest(&fixtures::ex6_graph()));
        let h = SocialGraph::from_dense_edges(6, [(0, 1)]).unwrap();
        assert_ne!(graph_digest(&g), graph_digest(&h));
        assert_eq!(digest_hex(&[b"a"]).len(), 64);
        assert_ne!(digest_hex(&[b"ab", b""]), digest_hex(&[b"a", b"b"]));
    }
}
