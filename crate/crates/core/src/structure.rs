//! Order-constrained greedy structure learning and network serialisation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdtsp::{best_parent_score, Ordering, OracleMode, DEFAULT_SUBSET_BUDGET};
use crate::scoring::{Metric, ParentSet, Scorer};

/// A network structure together with the ordering it respects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<ParentSet>,
    ordering: Ordering,
}

impl Dag {
    /// Every parent must precede its child in `ordering`.
    pub fn new(parents: Vec<ParentSet>, ordering: Ordering) -> Result<Self> {
        if parents.len() != ordering.len() {
            return Err(Error::InvalidOrdering(format!(
                "{} parent sets for an ordering of {}",
                parents.len(),
                ordering.len()
            )));
        }
        let pos = ordering.positions();
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps.members() {
                if p >= parents.len() {
                    return Err(Error::IndexOutOfRange {
                        index: p,
                        n: parents.len(),
                    });
                }
                if pos[p] >= pos[child] {
                    return Err(Error::InvalidOrdering(format!(
                        "parent {p} does not precede child {child}"
                    )));
                }
            }
        }
        Ok(Dag { parents, ordering })
    }

    /// Derives an ordering by topological sort, or fails on a cycle.
    pub fn from_parents(parents: Vec<ParentSet>) -> Result<Self> {
        let order = topological_order(&parents).ok_or(Error::Cyclic)?;
        Dag::new(parents, Ordering::new(order)?)
    }

    pub fn empty(n: usize) -> Self {
        Dag {
            parents: vec![ParentSet::empty(); n],
            ordering: Ordering::identity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self) -> &[ParentSet] {
        &self.parents
    }

    pub fn parents_of(&self, v: usize) -> &ParentSet {
        &self.parents[v]
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    /// Directed edges `(parent, child)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.members().iter().map(move |&p| (p, c)))
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Undirected edge set with each pair as `(min, max)`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect()
    }
}

/// Kahn's algorithm, lowest index first. `None` when the graph has a cycle.
pub fn topological_order(parents: &[ParentSet]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(ParentSet::len).collect();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps.members() {
            if p >= n {
                return None;
            }
            children[p].push(c);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// For each node, greedily picks parents among its predecessors in
/// `ordering` under the in-degree bound.
pub fn learn_structure(scorer: &Scorer<'_>, ordering: &Ordering, max_in_degree: usize) -> Result<Dag> {
    let n = scorer.table().n_vars();
    if ordering.len() != n {
        return Err(Error::InvalidOrdering(format!(
            "ordering has {} variables, table has {n}",
            ordering.len()
        )));
    }
    let perm = ordering.as_slice();
    let mut parents = vec![ParentSet::empty(); n];
    for (i, &v) in perm.iter().enumerate() {
        let (_, ps) = best_parent_score(
            scorer,
            v,
            &perm[..i],
            max_in_degree,
            OracleMode::Greedy,
            DEFAULT_SUBSET_BUDGET,
        )?;
        parents[v] = ps;
    }
    Dag::new(parents, ordering.clone())
}

fn dot_id(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_dot(dag: &Dag, names: &[String]) -> String {
    let mut out = String::from("digraph network {\n");
    for &v in dag.ordering().as_slice() {
        let _ = writeln!(out, "  {};", dot_id(&names[v]));
    }
    for (p, c) in dag.edges() {
        let _ = writeln!(out, "  {} -> {};", dot_id(&names[p]), dot_id(&names[c]));
    }
    out.push_str("}\n");
    out
}

pub const NETWORK_FORMAT: &str = "bntsp-network";
pub const NETWORK_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NodeRecord {
    name: String,
    cardinality: usize,
    parents: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NetworkDocument {
    format: String,
    version: u32,
    metric: Metric,
    max_in_degree: usize,
    score: f64,
    ordering: Vec<String>,
    nodes: Vec<NodeRecord>,
}

/// A learned network with the metadata written to the text format.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub dag: Dag,
    pub names: Vec<String>,
    pub cardinalities: Vec<usize>,
    pub metric: Metric,
    pub max_in_degree: usize,
    pub score: f64,
}

impl Network {
    /// TOML document with a versioned `format` header. Node records follow
    /// variable index order; parent lists follow index order.
    pub fn to_text(&self) -> Result<String> {
        let doc = NetworkDocument {
            format: NETWORK_FORMAT.to_string(),
            version: NETWORK_VERSION,
            metric: self.metric,
            max_in_degree: self.max_in_degree,
            score: self.score,
            ordering: self
                .dag
                .ordering()
                .as_slice()
                .iter()
                .map(|&v| self.names[v].clone())
                .collect(),
            nodes: (0..self.dag.n())
                .map(|v| NodeRecord {
                    name: self.names[v].clone(),
                    cardinality: self.cardinalities[v],
                    parents: self
                        .dag
                        .parents_of(v)
                        .members()
                        .iter()
                        .map(|&p| self.names[p].clone())
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&doc).map_err(|e| Error::NetworkFormat(e.to_string()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc: NetworkDocument =
            toml::from_str(text).map_err(|e| Error::NetworkFormat(e.to_string()))?;
        if doc.format != NETWORK_FORMAT || doc.version != NETWORK_VERSION {
            return Err(Error::NetworkFormat(format!(
                "unsupported header {} v{}",
                doc.format, doc.version
            )));
        }
        let names: Vec<String> = doc.nodes.iter().map(|n| n.name.clone()).collect();
        let index = |name: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::NetworkFormat(format!("unknown node `{name}`")))
        };
        let parents = doc
            .nodes
            .iter()
            .map(|node| {
                Ok(ParentSet::new(
                    node.parents.iter().map(|p| index(p)).collect::<Result<_>>()?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let ordering = Ordering::new(doc.ordering.iter().map(|n| index(n)).collect::<Result<_>>()?)?;
        Ok(Network {
            dag: Dag::new(parents, ordering)?,
            cardinalities: doc.nodes.iter().map(|n| n.cardinality).collect(),
            names,
            metric: doc.metric,
            max_in_degree: doc.max_in_degree,
            score: doc.score,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DagFormat {
    Dot,
    Text,
}

pub fn export_dag(network: &Network, format: DagFormat, path: &Path) -> Result<()> {
    let text = match format {
        DagFormat::Dot => to_dot(&network.dag, &network.names),
        DagFormat::Text => network.to_text()?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
