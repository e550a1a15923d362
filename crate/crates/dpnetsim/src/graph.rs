//! Attributed-graph data model.
//!
//! Graphs are simple and undirected; every node carries one category per
//! declared attribute (e.g. age group, race group). A graph is immutable
//! after construction, so statistic computations and simulations can share
//! it freely across workers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declares one categorical node attribute: its name and the full ordered
/// category list. Categories are fixed up front rather than inferred from
/// data, so empty groups stay representable and matrix shapes stay stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    pub categories: Vec<String>,
}

impl AttributeSchema {
    pub fn new(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            categories,
        }
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

/// Simple undirected graph over dense node ids `0..node_count` with
/// per-node categorical attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    node_count: usize,
    /// Canonical edge list: `(u, v)` with `u < v`, sorted ascending, no
    /// duplicates. This ordering is also the stable ordering used by the
    /// degree-truncation projection.
    edges: Vec<(u32, u32)>,
    neighbors: Vec<Vec<u32>>,
    schemas: Vec<AttributeSchema>,
    /// `labels[a][v]` = category index of node `v` for attribute `a`.
    labels: Vec<Vec<u16>>,
    /// Ids as they appeared in the source file, retained for output.
    original_ids: Vec<String>,
}

impl AttributedGraph {
    /// Builds a graph, canonicalizing the edge list: reversed duplicates
    /// collapse to one edge, self-loops are rejected.
    pub fn new(
        node_count: usize,
        schemas: Vec<AttributeSchema>,
        labels: Vec<Vec<u16>>,
        edges: Vec<(u32, u32)>,
    ) -> Result<Self> {
        if labels.len() != schemas.len() {
            return Err(Error::InvalidModelSpec(format!(
                "expected {} label vectors, got {}",
                schemas.len(),
                labels.len()
            )));
        }
        for (schema, lab) in schemas.iter().zip(&labels) {
            if lab.len() != node_count {
                return Err(Error::SchemaMismatch {
                    attr: schema.name.clone(),
                    expected: node_count,
                    actual: lab.len(),
                });
            }
            if schema.categories.is_empty() {
                return Err(Error::InvalidModelSpec(format!(
                    "attribute `{}` declares no categories",
                    schema.name
                )));
            }
            if let Some(&bad) = lab.iter().find(|&&c| c as usize >= schema.category_count()) {
                return Err(Error::InvalidModelSpec(format!(
                    "attribute `{}`: category index {} out of range (k={})",
                    schema.name,
                    bad,
                    schema.category_count()
                )));
            }
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidModelSpec(format!("self-loop at node {u}")));
            }
            if u as usize >= node_count || v as usize >= node_count {
                return Err(Error::InvalidModelSpec(format!(
                    "edge ({u},{v}) references node outside 0..{node_count}"
                )));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        canonical.dedup();

        let mut neighbors = vec![Vec::new(); node_count];
        for &(u, v) in &canonical {
            neighbors[u as usize].push(v);
            neighbors[v as usize].push(u);
        }

        let original_ids = (0..node_count).map(|i| i.to_string()).collect();
        Ok(Self {
            node_count,
            edges: canonical,
            neighbors,
            schemas,
            labels,
            original_ids,
        })
    }

    pub fn with_original_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.node_count {
            return Err(Error::GraphMismatch(format!(
                "{} original ids for {} nodes",
                ids.len(),
                self.node_count
            )));
        }
        self.original_ids = ids;
        Ok(self)
    }

    /// Same nodes, schemas and labels; different edge set.
    pub fn with_edges(&self, edges: Vec<(u32, u32)>) -> Result<Self> {
        let g = Self::new(
            self.node_count,
            self.schemas.clone(),
            self.labels.clone(),
            edges,
        )?;
        g.with_original_ids(self.original_ids.clone())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list: `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degree(&self, v: u32) -> usize {
        self.neighbors[v as usize].len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.neighbors[v as usize]
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn schemas(&self) -> &[AttributeSchema] {
        &self.schemas
    }

    pub fn attribute_index(&self, attr: &str) -> Result<usize> {
        self.schemas
            .iter()
            .position(|s| s.name == attr)
            .ok_or_else(|| Error::UnknownAttribute(attr.to_string()))
    }

    pub fn schema(&self, attr: &str) -> Result<&AttributeSchema> {
        Ok(&self.schemas[self.attribute_index(attr)?])
    }

    /// Per-node category indices for an attribute, by attribute index.
    pub fn labels_by_index(&self, attr_idx: usize) -> &[u16] {
        &self.labels[attr_idx]
    }

    pub fn labels(&self, attr: &str) -> Result<&[u16]> {
        Ok(&self.labels[self.attribute_index(attr)?])
    }

    pub fn all_labels(&self) -> &[Vec<u16>] {
        &self.labels
    }

    /// Number of nodes in each category of an attribute.
    pub fn group_sizes(&self, attr: &str) -> Result<Vec<usize>> {
        let idx = self.attribute_index(attr)?;
        let mut sizes = vec![0usize; self.schemas[idx].category_count()];
        for &c in &self.labels[idx] {
            sizes[c as usize] += 1;
        }
        Ok(sizes)
    }

    pub fn original_ids(&self) -> &[String] {
        &self.original_ids
    }

    /// True when both graphs have the same node count and declared schemas
    /// (edge sets may differ).
    pub fn same_population(&self, other: &AttributedGraph) -> bool {
        self.node_count == other.node_count && self.schemas == other.schemas
    }
}
