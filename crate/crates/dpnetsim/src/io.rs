//! CSV input/output for attributed graphs.
//!
//! Node file: header `node_id,<attr>,<attr>,...` with one category label per
//! declared attribute. Edge file: header `u,v` referencing node ids from the
//! node file. UTF-8, comma-separated. Duplicate edge rows and reversed
//! duplicates collapse to a single undirected edge.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, AttributedGraph};

/// Loads a graph from node/edge CSV files. Dense node ids are assigned in
/// file order; original ids are retained for output.
pub fn load_graph(
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
    schemas: &[AttributeSchema],
) -> Result<AttributedGraph> {
    let nodes_path = nodes_path.as_ref();
    let edges_path = edges_path.as_ref();
    let nodes = File::open(nodes_path).map_err(|e| Error::io(nodes_path.display().to_string(), e))?;
    let edges = File::open(edges_path).map_err(|e| Error::io(edges_path.display().to_string(), e))?;
    load_graph_from_readers(
        nodes,
        edges,
        schemas,
        &nodes_path.display().to_string(),
        &edges_path.display().to_string(),
    )
}

/// Reader-based variant of [`load_graph`]; the path arguments only label
/// error messages.
pub fn load_graph_from_readers(
    nodes: impl Read,
    edges: impl Read,
    schemas: &[AttributeSchema],
    nodes_label: &str,
    edges_label: &str,
) -> Result<AttributedGraph> {
    let mut reader = csv::Reader::from_reader(nodes);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv { path: nodes_label.into(), source: e })?
        .clone();
    if headers.get(0) != Some("node_id") {
        return Err(Error::invalid_input(
            nodes_label,
            1,
            "first column must be `node_id`",
        ));
    }
    let mut attr_cols = Vec::with_capacity(schemas.len());
    for schema in schemas {
        let col = headers
            .iter()
            .position(|h| h == schema.name)
            .ok_or_else(|| {
                Error::invalid_input(
                    nodes_label,
                    1,
                    format!("missing attribute column `{}`", schema.name),
                )
            })?;
        attr_cols.push(col);
    }

    let mut original_ids: Vec<String> = Vec::new();
    let mut id_index: HashMap<String, u32> = HashMap::new();
    let mut labels: Vec<Vec<u16>> = vec![Vec::new(); schemas.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: nodes_label.into(), source: e })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record
            .get(0)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::invalid_input(nodes_label, line, "empty node_id"))?;
        if id_index.contains_key(id) {
            return Err(Error::invalid_input(
                nodes_label,
                line,
                format!("duplicate node id `{id}`"),
            ));
        }
        for (schema, &col) in schemas.iter().zip(&attr_cols) {
            let value = record.get(col).unwrap_or("");
            if value.is_empty() {
                return Err(Error::invalid_input(
                    nodes_label,
                    line,
                    format!("node `{id}` missing value for attribute `{}`", schema.name),
                ));
            }
            let cat = schema.category_index(value).ok_or_else(|| {
                Error::invalid_input(
                    nodes_label,
                    line,
                    format!(
                        "node `{id}`: `{value}` is not a declared category of `{}`",
                        schema.name
                    ),
                )
            })?;
            labels[schemas.iter().position(|s| s.name == schema.name).unwrap()].push(cat as u16);
        }
        id_index.insert(id.to_string(), original_ids.len() as u32);
        original_ids.push(id.to_string());
    }

    let mut reader = csv::Reader::from_reader(edges);
    let mut edge_list: Vec<(u32, u32)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: edges_label.into(), source: e })?;
        let line = record.position().map_or(0, |p| p.line());
        let endpoint = |col: usize, name: &str| -> Result<u32> {
            let raw = record
                .get(col)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::invalid_input(edges_label, line, format!("empty `{name}`")))?;
            id_index.get(raw).copied().ok_or_else(|| {
                Error::invalid_input(edges_label, line, format!("unknown endpoint id `{raw}`"))
            })
        };
        let u = endpoint(0, "u")?;
        let v = endpoint(1, "v")?;
        if u == v {
            return Err(Error::invalid_input(
                edges_label,
                line,
                format!("self-loop at node `{}`", original_ids[u as usize]),
            ));
        }
        edge_list.push((u, v));
    }

    AttributedGraph::new(original_ids.len(), schemas.to_vec(), labels, edge_list)?
        .with_original_ids(original_ids)
}

/// Derives attribute schemas from a node file: every column after
/// `node_id` becomes an attribute with its distinct values, sorted, as the
/// category list. A declared schema is preferable when matrix shapes must
/// stay stable across files (empty groups are invisible to inference).
pub fn infer_schemas(nodes_path: impl AsRef<Path>) -> Result<Vec<AttributeSchema>> {
    let path = nodes_path.as_ref();
    let label = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(label.clone(), e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv { path: label.clone(), source: e })?
        .clone();
    if headers.get(0) != Some("node_id") {
        return Err(Error::invalid_input(&label, 1, "first column must be `node_id`"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.to_string()).collect();
    let mut values: Vec<std::collections::BTreeSet<String>> = vec![Default::default(); names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: label.clone(), source: e })?;
        for (col, set) in values.iter_mut().enumerate() {
            if let Some(v) = record.get(col + 1) {
                if !v.is_empty() {
                    set.insert(v.to_string());
                }
            }
        }
    }
    Ok(names
        .into_iter()
        .zip(values)
        .map(|(name, vals)| AttributeSchema::new(name, vals.into_iter().collect()))
        .collect())
}

/// Writes the node CSV (`node_id` plus one column per attribute).
pub fn write_nodes(g: &AttributedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut header = vec!["node_id".to_string()];
    header.extend(g.schemas().iter().map(|s| s.name.clone()));
    writeln!(out, "{}", header.join(",")).map_err(|e| Error::io(path.display().to_string(), e))?;
    for v in 0..g.node_count() {
        let mut row = vec![g.original_ids()[v].clone()];
        for (a, schema) in g.schemas().iter().enumerate() {
            row.push(schema.categories[g.labels_by_index(a)[v] as usize].clone());
        }
        writeln!(out, "{}", row.join(",")).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Writes the edge CSV (`u,v`, canonical order).
pub fn write_edges(g: &AttributedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    writeln!(out, "u,v").map_err(|e| Error::io(path.display().to_string(), e))?;
    for &(u, v) in g.edges() {
        writeln!(out, "{},{}", g.original_ids()[u as usize], g.original_ids()[v as usize])
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
