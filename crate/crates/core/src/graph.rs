//! Logical query graphs.
//!
//! A [`JobGraph`] lists the operators of a query (sources and sinks excluded)
//! and the edges between them. Edges may also start at the distinguished
//! [`SOURCE`] node and end at the distinguished [`SINK`] node.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the single source node.
pub const SOURCE: &str = "source";
/// Name of the sink node.
pub const SINK: &str = "sink";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorId(String);

impl OperatorId {
    pub fn new(name: impl Into<String>) -> Self {
        OperatorId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OperatorId {
    fn from(s: &str) -> Self {
        OperatorId(s.to_owned())
    }
}

/// Endpoint of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Source,
    Operator(usize),
    Sink,
}

/// A validated, acyclic operator graph with a single source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobGraph {
    operators: Vec<OperatorId>,
    edges: Vec<(Node, Node)>,
    topo: Vec<usize>,
}

impl JobGraph {
    /// Builds and validates a graph from operator names and named edges.
    pub fn new<S: AsRef<str>>(operators: Vec<OperatorId>, edges: &[(S, S)]) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, op) in operators.iter().enumerate() {
            if op.as_str().is_empty() || op.as_str() == SOURCE || op.as_str() == SINK {
                return Err(Error::InvalidParameter(format!(
                    "invalid operator name `{op}`"
                )));
            }
            if index.insert(op.as_str().to_owned(), i).is_some() {
                return Err(Error::DuplicateOperator(op.clone()));
            }
        }

        let mut resolved = Vec::with_capacity(edges.len());
        for (from, to) in edges {
            let (from, to) = (from.as_ref(), to.as_ref());
            let tail = match from {
                SOURCE => Node::Source,
                SINK => return Err(Error::UnknownNode(SINK.to_owned())),
                name => match index.get(name) {
                    Some(&i) => Node::Operator(i),
                    // An unknown node that only ever emits is a second source.
                    None if !edges.iter().any(|(_, t)| t.as_ref() == name) => {
                        return Err(Error::MultipleSources(name.to_owned()))
                    }
                    None => return Err(Error::UnknownNode(name.to_owned())),
                },
            };
            let head = match to {
                SINK => Node::Sink,
                SOURCE => return Err(Error::CyclicGraph),
                name => match index.get(name) {
                    Some(&i) => Node::Operator(i),
                    None => return Err(Error::UnknownNode(name.to_owned())),
                },
            };
            resolved.push((tail, head));
        }

        let topo = topological_order(operators.len(), &resolved)?;
        let graph = JobGraph {
            operators,
            edges: resolved,
            topo,
        };
        graph.check_connectivity()?;
        Ok(graph)
    }

    /// Convenience constructor for a linear pipeline `source -> ops... -> sink`.
    pub fn pipeline(names: &[&str]) -> Result<Self> {
        let ops: Vec<OperatorId> = names.iter().map(|n| OperatorId::new(*n)).collect();
        let mut chain = vec![SOURCE];
        chain.extend_from_slice(names);
        chain.push(SINK);
        let edges: Vec<(&str, &str)> = chain.windows(2).map(|w| (w[0], w[1])).collect();
        JobGraph::new(ops, &edges)
    }

    pub fn operators(&self) -> &[OperatorId] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn index_of(&self, id: &OperatorId) -> Option<usize> {
        self.operators.iter().position(|o| o == id)
    }

    pub fn edges(&self) -> &[(Node, Node)] {
        &self.edges
    }

    /// Operator indices in a topological order.
    pub fn topological(&self) -> &[usize] {
        &self.topo
    }

    /// Edges as `(from, to)` names, in declaration order.
    pub fn named_edges(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.node_name(a).to_owned(), self.node_name(b).to_owned()))
            .collect()
    }

    fn node_name(&self, node: Node) -> &str {
        match node {
            Node::Source => SOURCE,
            Node::Sink => SINK,
            Node::Operator(i) => self.operators[i].as_str(),
        }
    }

    /// Stable textual identity of the graph, used as a cache key.
    pub fn fingerprint(&self) -> String {
        let mut out = self
            .operators
            .iter()
            .map(|o| o.as_str())
            .collect::<Vec<_>>()
            .join(",");
        for (a, b) in self.named_edges() {
            out.push_str(&format!(";{a}>{b}"));
        }
        out
    }

    fn check_connectivity(&self) -> Result<()> {
        let n = self.operators.len();
        let mut from_source = vec![false; n];
        let mut to_sink = vec![false; n];
        for &i in &self.topo {
            from_source[i] = self.edges.iter().any(|&(a, b)| {
                b == Node::Operator(i)
                    && match a {
                        Node::Source => true,
                        Node::Operator(j) => from_source[j],
                        Node::Sink => false,
                    }
            });
        }
        for &i in self.topo.iter().rev() {
            to_sink[i] = self.edges.iter().any(|&(a, b)| {
                a == Node::Operator(i)
                    && match b {
                        Node::Sink => true,
                        Node::Operator(j) => to_sink[j],
                        Node::Source => false,
                    }
            });
        }
        for &i in &self.topo {
            if !from_source[i] || !to_sink[i] {
                return Err(Error::DisconnectedOperator(self.operators[i].clone()));
            }
        }
        Ok(())
    }
}

fn topological_order(n: usize, edges: &[(Node, Node)]) -> Result<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    for &(a, b) in edges {
        if let (Node::Operator(_), Node::Operator(j)) = (a, b) {
            indegree[j] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &(a, b) in edges {
            if let (Node::Operator(x), Node::Operator(j)) = (a, b) {
                if x == i {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    if order.len() != n {
        return Err(Error::CyclicGraph);
    }
    Ok(order)
}

/// Builds a graph from raw parts and checks acyclicity, single source and
/// source-to-sink connectivity of every operator.
pub fn validate_graph<S: AsRef<str>>(
    operators: Vec<OperatorId>,
    edges: &[(S, S)],
) -> Result<JobGraph> {
    JobGraph::new(operators, edges)
}
