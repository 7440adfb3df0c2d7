//! Causal DAG over feature nodes and the model outcome.
//!
//! Graphs are supplied by the user as JSON:
//!
//! ```json
//! {"nodes": [{"name": "smoking", "role": "target", "kind": "binary"},
//!            {"name": "bp"}, {"name": "risk", "role": "outcome"}],
//!  "edges": [["smoking", "bp"], ["bp", "risk"]]}
//! ```
//!
//! Roles default to `feature` and kinds to `continuous`. The outcome node
//! stands for the model output, so an edge `v -> outcome` means "the model
//! reads `v`".

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::scalar::Scalar;

/// Default upper bound on enumerated path length, in edges.
pub const DEFAULT_MAX_PATH_LENGTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Outcome,
    #[default]
    Feature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    #[default]
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub kind: NodeKind,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, role: Role, kind: NodeKind) -> Self {
        Self {
            name: name.into(),
            role,
            kind,
        }
    }

    pub fn feature(name: impl Into<String>) -> Self {
        Self::new(name, Role::Feature, NodeKind::Continuous)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("edge {src} -> {dst} references unknown node `{missing}`")]
    UnknownEndpoint {
        src: String,
        dst: String,
        missing: String,
    },
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("expected exactly one outcome node, found {0}")]
    OutcomeCount(usize),
    #[error("expected at most one target node, found {0}")]
    TargetCount(usize),
    #[error("outcome node `{0}` must not have outgoing edges")]
    OutcomeHasChildren(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` cannot be the target")]
    InvalidTarget(String),
    #[error("no target node assigned")]
    NoTarget,
    #[error("column `{0}` missing from dataset")]
    MissingColumn(String),
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Deserialize)]
struct GraphFile {
    nodes: Vec<NodeSpec>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

#[derive(Debug, Serialize)]
struct GraphFileOut<'a> {
    nodes: &'a [NodeSpec],
    edges: &'a [(String, String)],
}

/// Validated causal DAG. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    nodes: Vec<NodeSpec>,
    edges: Vec<(String, String)>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    outcome: usize,
    target: Option<usize>,
}

impl CausalGraph {
    pub fn new(nodes: Vec<NodeSpec>, edges: Vec<(String, String)>) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.name.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(n.name.clone()));
            }
        }
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        let mut seen = BTreeSet::new();
        for (src, dst) in &edges {
            let lookup = |name: &String| {
                index.get(name).copied().ok_or_else(|| GraphError::UnknownEndpoint {
                    src: src.clone(),
                    dst: dst.clone(),
                    missing: name.clone(),
                })
            };
            let s = lookup(src)?;
            let d = lookup(dst)?;
            if s == d {
                return Err(GraphError::SelfLoop(src.clone()));
            }
            if !seen.insert((s, d)) {
                return Err(GraphError::DuplicateEdge(src.clone(), dst.clone()));
            }
            parents[d].push(s);
            children[s].push(d);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_by(|&a, &b| nodes[a].name.cmp(&nodes[b].name));
        }

        let outcomes: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].role == Role::Outcome)
            .collect();
        if outcomes.len() != 1 {
            return Err(GraphError::OutcomeCount(outcomes.len()));
        }
        let outcome = outcomes[0];
        let targets: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].role == Role::Target)
            .collect();
        if targets.len() > 1 {
            return Err(GraphError::TargetCount(targets.len()));
        }

        let graph = Self {
            nodes,
            edges,
            index,
            parents,
            children,
            outcome,
            target: targets.first().copied(),
        };
        if let Some(cycle) = graph.find_cycle() {
            return Err(GraphError::Cycle(cycle));
        }
        if !graph.children[outcome].is_empty() {
            return Err(GraphError::OutcomeHasChildren(graph.nodes[outcome].name.clone()));
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn has_edge(&self, src: &str, dst: &str) -> bool {
        match (self.index.get(src), self.index.get(dst)) {
            (Some(&s), Some(&d)) => self.children[s].contains(&d),
            _ => false,
        }
    }

    pub fn outcome(&self) -> &str {
        &self.nodes[self.outcome].name
    }

    pub fn target(&self) -> Option<&str> {
        self.target.map(|i| self.nodes[i].name.as_str())
    }

    /// Names of non-outcome nodes, in declaration order.
    pub fn feature_names(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.role != Role::Outcome)
            .map(|n| n.name.as_str())
            .collect()
    }

    /// Parents of `name`, sorted by name.
    pub fn parents(&self, name: &str) -> Vec<&str> {
        self.index
            .get(name)
            .map(|&i| self.parents[i].iter().map(|&p| self.nodes[p].name.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn children(&self, name: &str) -> Vec<&str> {
        self.index
            .get(name)
            .map(|&i| self.children[i].iter().map(|&c| self.nodes[c].name.as_str()).collect())
            .unwrap_or_default()
    }

    /// Returns a copy with the target role rebound to `name`; any previous
    /// target becomes a plain feature.
    pub fn with_target(&self, name: &str) -> Result<Self, GraphError> {
        let &idx = self
            .index
            .get(name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))?;
        if idx == self.outcome {
            return Err(GraphError::InvalidTarget(name.to_string()));
        }
        let mut g = self.clone();
        if let Some(old) = g.target {
            g.nodes[old].role = Role::Feature;
        }
        g.nodes[idx].role = Role::Target;
        g.target = Some(idx);
        Ok(g)
    }

    /// Strict descendants of `name` (excluding itself), sorted by name.
    pub fn descendants(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let Some(&start) = self.index.get(name) else {
            return out;
        };
        let mut stack = vec![start];
        let mut seen = vec![false; self.nodes.len()];
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if !seen[c] {
                    seen[c] = true;
                    out.insert(self.nodes[c].name.clone());
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Topological order with lexicographic tie-breaking.
    pub fn topological_order(&self) -> Vec<String> {
        self.kahn_order()
            .expect("validated graphs are acyclic")
            .into_iter()
            .map(|i| self.nodes[i].name.clone())
            .collect()
    }

    pub(crate) fn kahn_order(&self) -> Option<Vec<usize>> {
        kahn(&self.nodes, &self.parents, &self.children)
    }

    /// One directed cycle, as a node sequence, if any exists.
    pub fn find_cycle(&self) -> Option<Vec<String>> {
        dfs_cycle(&self.children).map(|c| c.into_iter().map(|i| self.nodes[i].name.clone()).collect())
    }

    /// All simple directed target-to-outcome paths with at most
    /// `max_length` edges, sorted by (length, node names).
    pub fn enumerate_paths(&self, max_length: usize) -> Result<PathSet, GraphError> {
        let target = self.target.ok_or(GraphError::NoTarget)?;
        let mut found = Vec::new();
        let mut stack = vec![target];
        let mut on_path = vec![false; self.nodes.len()];
        on_path[target] = true;
        self.dfs_paths(target, max_length, &mut stack, &mut on_path, &mut found);
        let mut paths: Vec<CausalPath> = found
            .into_iter()
            .map(|p| CausalPath(p.into_iter().map(|i| self.nodes[i].name.clone()).collect()))
            .collect();
        paths.sort();
        Ok(PathSet { paths })
    }

    fn dfs_paths(
        &self,
        v: usize,
        budget: usize,
        stack: &mut Vec<usize>,
        on_path: &mut [bool],
        found: &mut Vec<Vec<usize>>,
    ) {
        if v == self.outcome {
            found.push(stack.clone());
            return;
        }
        if budget == 0 {
            return;
        }
        for &c in &self.children[v] {
            if on_path[c] {
                continue;
            }
            on_path[c] = true;
            stack.push(c);
            self.dfs_paths(c, budget - 1, stack, on_path, found);
            stack.pop();
            on_path[c] = false;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphFileOut {
            nodes: &self.nodes,
            edges: &self.edges,
        })
        .expect("graph serializes")
    }
}

/// Parses and validates a graph file.
pub fn parse_graph(text: &str) -> Result<CausalGraph, GraphError> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    CausalGraph::new(file.nodes, file.edges)
}

fn kahn(nodes: &[NodeSpec], parents: &[Vec<usize>], children: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<(&str, usize)> = (0..nodes.len())
        .filter(|&i| indegree[i] == 0)
        .map(|i| (nodes[i].name.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(first) = ready.pop_first() {
        let v = first.1;
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert((nodes[c].name.as_str(), c));
            }
        }
    }
    (order.len() == nodes.len()).then_some(order)
}

fn dfs_cycle(children: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = children.len();
    let mut mark = vec![Mark::New; n];
    let mut stack: Vec<usize> = Vec::new();
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative DFS: frames of (node, next child index)
        let mut frames = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        stack.push(root);
        while let Some(&mut (v, ref mut next)) = frames.last_mut() {
            if let Some(&c) = children[v].get(*next) {
                *next += 1;
                match mark[c] {
                    Mark::Active => {
                        let start = stack.iter().position(|&x| x == c).expect("on stack");
                        let mut cycle = stack[start..].to_vec();
                        cycle.push(c);
                        return Some(cycle);
                    }
                    Mark::New => {
                        mark[c] = Mark::Active;
                        stack.push(c);
                        frames.push((c, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                stack.pop();
                frames.pop();
            }
        }
    }
    None
}

/// Simple directed path, stored as node names from target to outcome.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CausalPath(pub Vec<String>);

impl CausalPath {
    pub fn nodes(&self) -> &[String] {
        &self.0
    }

    pub fn len_edges(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.windows(2).map(|w| (w[0].as_str(), w[1].as_str()))
    }

    /// Nodes strictly between the endpoints.
    pub fn interior(&self) -> &[String] {
        if self.0.len() <= 2 {
            &[]
        } else {
            &self.0[1..self.0.len() - 1]
        }
    }

    pub fn label(&self) -> String {
        self.0.join(PATH_SEPARATOR)
    }

    pub fn parse_label(label: &str) -> Self {
        CausalPath(label.split(PATH_SEPARATOR).map(str::to_string).collect())
    }
}

pub const PATH_SEPARATOR: &str = "→";

impl fmt::Display for CausalPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathSet {
    pub paths: Vec<CausalPath>,
}

impl PathSet {
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    /// Union of path edges.
    pub fn active_edges(&self) -> BTreeSet<(String, String)> {
        self.paths
            .iter()
            .flat_map(|p| p.edges().map(|(a, b)| (a.to_string(), b.to_string())))
            .collect()
    }
}

impl Ord for CausalPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for CausalPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Path with its proxy-strength screening score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPath {
    pub path: CausalPath,
    pub strength: f64,
}

/// Ranks paths by proxy strength, the product of |Pearson correlation| over
/// consecutive non-outcome node pairs, and keeps the top `k`.
pub fn prioritize_paths<T: Scalar>(
    graph: &CausalGraph,
    paths: &PathSet,
    data: &Dataset<T>,
    k: usize,
) -> Result<Vec<ScoredPath>, GraphError> {
    if k == 0 {
        return Err(GraphError::ZeroK);
    }
    let outcome = graph.outcome();
    let mut columns: HashMap<&str, Vec<T>> = HashMap::new();
    for path in &paths.paths {
        for node in path.nodes() {
            if node == outcome || columns.contains_key(node.as_str()) {
                continue;
            }
            let col = data
                .column(node)
                .ok_or_else(|| GraphError::MissingColumn(node.clone()))?;
            columns.insert(node.as_str(), col);
        }
    }
    let mut scored: Vec<ScoredPath> = paths
        .paths
        .iter()
        .map(|path| {
            let features: Vec<&str> = path
                .nodes()
                .iter()
                .map(String::as_str)
                .filter(|&n| n != outcome)
                .collect();
            let strength = features.windows(2).fold(1.0, |acc, w| {
                acc * crate::stats::pearson(&columns[w[0]], &columns[w[1]]).as_f64().abs()
            });
            ScoredPath {
                path: path.clone(),
                strength,
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.strength
            .total_cmp(&a.strength)
            .then_with(|| a.path.label().cmp(&b.path.label()))
    });
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(name: &str, role: Role) -> NodeSpec {
        NodeSpec::new(name, role, NodeKind::Continuous)
    }

    fn edges(list: &[(&str, &str)]) -> Vec<(String, String)> {
        list.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    fn triangle() -> CausalGraph {
        CausalGraph::new(
            vec![node("Z", Role::Target), node("M", Role::Feature), node("Y", Role::Outcome)],
            edges(&[("Z", "M"), ("M", "Y"), ("Z", "Y")]),
        )
        .unwrap()
    }

    #[test]
    fn parses_minimal_graph() {
        let g = parse_graph(
            r#"{"nodes":[{"name":"Z","role":"target"},{"name":"Y","role":"outcome"}],"edges":[["Z","Y"]]}"#,
        )
        .unwrap();
        assert_eq!(g.nodes().len(), 2);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.target(), Some("Z"));
        assert_eq!(g.node("Z").unwrap().kind, NodeKind::Continuous);
    }

    #[test]
    fn parses_mediation_triangle() {
        let g = parse_graph(
            r#"{"nodes":[{"name":"Z","role":"target"},{"name":"M"},{"name":"Y","role":"outcome"}],
                "edges":[["Z","M"],["M","Y"],["Z","Y"]]}"#,
        )
        .unwrap();
        assert_eq!(g.node("M").unwrap().role, Role::Feature);
        assert_eq!(g.parents("Y"), vec!["M", "Z"]);
    }

    #[test]
    fn reports_two_cycle() {
        let err = parse_graph(
            r#"{"nodes":[{"name":"A"},{"name":"B"},{"name":"Y","role":"outcome"}],
                "edges":[["A","B"],["B","A"]]}"#,
        )
        .unwrap_err();
        match err {
            GraphError::Cycle(c) => {
                assert!(c.contains(&"A".to_string()) && c.contains(&"B".to_string()));
                assert_eq!(c.first(), c.last());
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_graph("{\n  \"nodes\": [,]\n}").unwrap_err();
        assert!(matches!(err, GraphError::Syntax { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn rejects_structural_problems() {
        let dup = CausalGraph::new(vec![node("A", Role::Feature), node("A", Role::Outcome)], vec![]);
        assert_eq!(dup.unwrap_err(), GraphError::DuplicateNode("A".into()));

        let unknown = CausalGraph::new(vec![node("Y", Role::Outcome)], edges(&[("Q", "Y")]));
        assert!(matches!(unknown.unwrap_err(), GraphError::UnknownEndpoint { missing, .. } if missing == "Q"));

        let selfloop = CausalGraph::new(
            vec![node("A", Role::Feature), node("Y", Role::Outcome)],
            edges(&[("A", "A")]),
        );
        assert_eq!(selfloop.unwrap_err(), GraphError::SelfLoop("A".into()));

        let no_outcome = CausalGraph::new(vec![node("A", Role::Feature)], vec![]);
        assert_eq!(no_outcome.unwrap_err(), GraphError::OutcomeCount(0));

        let outcome_parent = CausalGraph::new(
            vec![node("A", Role::Feature), node("Y", Role::Outcome)],
            edges(&[("Y", "A")]),
        );
        assert_eq!(outcome_parent.unwrap_err(), GraphError::OutcomeHasChildren("Y".into()));

        let two_targets = CausalGraph::new(
            vec![node("A", Role::Target), node("B", Role::Target), node("Y", Role::Outcome)],
            vec![],
        );
        assert_eq!(two_targets.unwrap_err(), GraphError::TargetCount(2));
    }

    #[test]
    fn topological_orders() {
        assert_eq!(triangle().topological_order(), vec!["Z", "M", "Y"]);

        let independent = CausalGraph::new(
            vec![node("B", Role::Feature), node("Y", Role::Outcome), node("A", Role::Feature)],
            vec![],
        )
        .unwrap();
        assert_eq!(independent.topological_order(), vec!["A", "B", "Y"]);

        let chain = CausalGraph::new(
            vec![node("X1", Role::Outcome), node("X2", Role::Feature), node("X3", Role::Feature)],
            edges(&[("X3", "X2"), ("X2", "X1")]),
        )
        .unwrap();
        assert_eq!(chain.topological_order(), vec!["X3", "X2", "X1"]);
    }

    #[test]
    fn enumerates_triangle_paths() {
        let ps = triangle().enumerate_paths(DEFAULT_MAX_PATH_LENGTH).unwrap();
        let labels: Vec<String> = ps.paths.iter().map(CausalPath::label).collect();
        assert_eq!(labels, vec!["Z→Y", "Z→M→Y"]);
        let ps1 = triangle().enumerate_paths(1).unwrap();
        assert_eq!(ps1.len(), 1);
    }

    #[test]
    fn disconnected_target_has_no_paths() {
        let g = CausalGraph::new(
            vec![node("Z", Role::Target), node("A", Role::Feature), node("Y", Role::Outcome)],
            edges(&[("A", "Y")]),
        )
        .unwrap();
        assert!(g.enumerate_paths(4).unwrap().is_empty());
    }

    #[test]
    fn enumerate_requires_target() {
        let g = triangle().with_target("M").unwrap();
        assert_eq!(g.target(), Some("M"));
        assert_eq!(g.node("Z").unwrap().role, Role::Feature);
        let no_target = CausalGraph::new(vec![node("Y", Role::Outcome)], vec![]).unwrap();
        assert_eq!(no_target.enumerate_paths(3).unwrap_err(), GraphError::NoTarget);
        assert!(matches!(triangle().with_target("Y"), Err(GraphError::InvalidTarget(_))));
    }

    #[test]
    fn active_edges_union() {
        let ps = triangle().enumerate_paths(4).unwrap();
        let active = ps.active_edges();
        assert_eq!(active.len(), 3);
        assert!(active.contains(&("Z".to_string(), "M".to_string())));
    }

    #[test]
    fn descendants_of_target() {
        let d = triangle().descendants("Z");
        assert_eq!(d.into_iter().collect::<Vec<_>>(), vec!["M", "Y"]);
    }

    #[test]
    fn json_round_trip() {
        let g = triangle();
        assert_eq!(parse_graph(&g.to_json()).unwrap(), g);
    }
}
