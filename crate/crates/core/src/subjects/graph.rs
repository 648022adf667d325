//! Declarative dependence graphs: which predicates guard which attack
//! targets, and through what kind of dependence.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::SubjectId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateClass {
    Critical,
    NonCritical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphNode {
    Predicate {
        id: String,
        class: PredicateClass,
        /// Branch outcome that leads toward a target (critical only).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reachable_when: Option<bool>,
    },
    Statement {
        id: String,
    },
    Target {
        id: String,
    },
}

impl GraphNode {
    pub fn id(&self) -> &str {
        match self {
            GraphNode::Predicate { id, .. } | GraphNode::Statement { id } | GraphNode::Target { id } => id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepKind {
    Control,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub dep: DepKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependenceGraph {
    pub subject: SubjectId,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl DependenceGraph {
    /// Parses and validates a graph.
    pub fn from_json(text: &str) -> Result<DependenceGraph> {
        let g: DependenceGraph = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "dependence graph".into(),
            message: e.to_string(),
        })?;
        g.validate()?;
        Ok(g)
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, PredicateClass, Option<bool>)> {
        self.nodes.iter().filter_map(|n| match n {
            GraphNode::Predicate {
                id,
                class,
                reachable_when,
            } => Some((id.as_str(), *class, *reachable_when)),
            _ => None,
        })
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter_map(|n| match n {
            GraphNode::Target { id } => Some(id.as_str()),
            _ => None,
        })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n.id() == id)
    }

    fn adjacency(&self) -> HashMap<&str, Vec<(&str, DepKind)>> {
        let mut adj: HashMap<&str, Vec<(&str, DepKind)>> = HashMap::new();
        for e in &self.edges {
            adj.entry(e.from.as_str()).or_default().push((e.to.as_str(), e.dep));
        }
        adj
    }

    /// Control-flow distance: fewest control edges on any dependence path
    /// from `node` to a target. Data edges cost nothing.
    pub fn cfd(&self, node: &str) -> Option<u32> {
        let targets: HashSet<&str> = self.targets().collect();
        let adj = self.adjacency();
        let mut dist: HashMap<&str, u32> = HashMap::new();
        let mut queue = VecDeque::new();
        dist.insert(node, 0);
        queue.push_back(node);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            for &(v, dep) in adj.get(u).map(Vec::as_slice).unwrap_or(&[]) {
                let w = u32::from(dep == DepKind::Control);
                if dist.get(v).is_none_or(|&dv| du + w < dv) {
                    dist.insert(v, du + w);
                    if w == 0 {
                        queue.push_front(v);
                    } else {
                        queue.push_back(v);
                    }
                }
            }
        }
        targets.iter().filter_map(|t| dist.get(t).copied()).min()
    }

    /// True when a target is reachable from `node` over control edges only.
    pub fn control_reachable(&self, node: &str) -> bool {
        let targets: HashSet<&str> = self.targets().collect();
        let adj = self.adjacency();
        let mut seen = HashSet::new();
        let mut stack = vec![node];
        while let Some(u) = stack.pop() {
            if targets.contains(u) {
                return true;
            }
            if seen.insert(u) {
                for &(v, dep) in adj.get(u).map(Vec::as_slice).unwrap_or(&[]) {
                    if dep == DepKind::Control {
                        stack.push(v);
                    }
                }
            }
        }
        false
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Profile(format!("graph {}: {m}", self.subject)));
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id()) {
                return bad(format!("duplicate node `{}`", n.id()));
            }
        }
        if self.targets().next().is_none() {
            return bad("no target node".into());
        }
        for e in &self.edges {
            if !ids.contains(e.from.as_str()) || !ids.contains(e.to.as_str()) {
                return bad(format!("edge {} -> {} names an unknown node", e.from, e.to));
            }
        }
        for (id, class, reach) in self.predicates() {
            if self.cfd(id).is_none() {
                return bad(format!("predicate `{id}` cannot reach a target"));
            }
            let critical = self.control_reachable(id);
            match (class, critical) {
                (PredicateClass::Critical, false) => {
                    return bad(format!("`{id}` is declared critical but needs a data edge"))
                }
                (PredicateClass::NonCritical, true) => {
                    return bad(format!("`{id}` is declared non-critical but is control-reachable"))
                }
                _ => {}
            }
            if class == PredicateClass::Critical && reach.is_none() {
                return bad(format!("critical predicate `{id}` lacks `reachable_when`"));
            }
        }
        Ok(())
    }
}
