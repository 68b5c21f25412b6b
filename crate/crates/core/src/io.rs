//! Plain-text graph formats.
//!
//! - edge list: one `u v` pair per line, `#` starts a comment line;
//! - attributes: headerless CSV, row `i` holds node `i`;
//! - id map: CSV `external_id,internal_id` for graphs whose source ids are
//!   not dense integers.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::scalar::Scalar;

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| {
            line.map(|l| (i + 1, l)).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        })
}

fn two_tokens(line_no: usize, line: &str) -> Result<(&str, &str)> {
    let mut it = line.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(Error::Parse {
            line: line_no,
            message: format!("expected two node ids, got {line:?}"),
        }),
    }
}

/// Reads an edge list of integer ids. Range checking happens once the node
/// count is known.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Vec<(i64, i64)>> {
    content_lines(reader)
        .map(|r| {
            let (line_no, line) = r?;
            let (a, b) = two_tokens(line_no, &line)?;
            let parse = |tok: &str| {
                tok.parse::<i64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("not an integer node id: {tok:?}"),
                })
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

pub fn read_attributes<T: Scalar, R: BufRead>(reader: R) -> Result<Array2<T>> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for r in reader.lines().enumerate() {
        let (i, line) = r;
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a number: {tok:?}"),
            })?;
            values.push(T::of(v));
        }
        let w = values.len() - before;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {expected} columns, found {w}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    Array2::from_shape_vec((rows, width), values).map_err(|e| Error::Shape(e.to_string()))
}

fn to_dense_edges(raw: Vec<(i64, i64)>, n: usize) -> Result<Vec<(usize, usize)>> {
    raw.into_iter()
        .map(|(u, v)| {
            for id in [u, v] {
                if id < 0 || id as usize >= n {
                    return Err(Error::NodeRange { id, node_count: n });
                }
            }
            Ok((u as usize, v as usize))
        })
        .collect()
}

/// Builds a graph from an edge-list source and an attribute source.
///
/// The node count is the number of attribute rows; an edge naming a node
/// beyond it is a range error.
pub fn load_graph<T: Scalar, E: BufRead, A: BufRead>(edges: E, attributes: A) -> Result<AttributedGraph<T>> {
    let attributes = read_attributes::<T, _>(attributes)?;
    if attributes.nrows() == 0 {
        return Err(Error::Shape("attribute source has no rows".into()));
    }
    let raw = read_edge_list(edges)?;
    let edges = to_dense_edges(raw, attributes.nrows())?;
    AttributedGraph::new(edges, attributes)
}

pub fn load_graph_files<T: Scalar>(edge_path: &Path, attribute_path: &Path) -> Result<AttributedGraph<T>> {
    load_graph(open(edge_path)?, open(attribute_path)?).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}/{}: {message}", edge_path.display(), attribute_path.display()),
        },
        other => other,
    })
}

/// External-to-internal id mapping.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    to_internal: HashMap<String, usize>,
    to_external: Vec<String>,
}

impl IdMap {
    /// Assigns internal ids in order of first appearance.
    pub fn from_tokens<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let mut map = IdMap::default();
        for t in tokens {
            map.intern(t);
        }
        map
    }

    fn intern(&mut self, token: &str) -> usize {
        if let Some(&id) = self.to_internal.get(token) {
            return id;
        }
        let id = self.to_external.len();
        self.to_internal.insert(token.to_owned(), id);
        self.to_external.push(token.to_owned());
        id
    }

    pub fn len(&self) -> usize {
        self.to_external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_external.is_empty()
    }

    pub fn internal(&self, external: &str) -> Option<usize> {
        self.to_internal.get(external).copied()
    }

    pub fn external(&self, internal: usize) -> Option<&str> {
        self.to_external.get(internal).map(String::as_str)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for r in content_lines(reader) {
            let (line_no, line) = r?;
            let (ext, int) = line.split_once(',').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `external_id,internal_id`".into(),
            })?;
            let (ext, int) = (ext.trim(), int.trim());
            if ext == "external_id" && int == "internal_id" {
                continue;
            }
            let id: usize = int.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not an internal id: {int:?}"),
            })?;
            pairs.push((line_no, ext.to_owned(), id));
        }
        let n = pairs.len();
        let mut to_external = vec![None; n];
        let mut to_internal = HashMap::with_capacity(n);
        for (line_no, ext, id) in pairs {
            if id >= n {
                return Err(Error::NodeRange {
                    id: id as i64,
                    node_count: n,
                });
            }
            if to_external[id].is_some() || to_internal.contains_key(&ext) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate mapping for {ext:?} / {id}"),
                });
            }
            to_internal.insert(ext.clone(), id);
            to_external[id] = Some(ext);
        }
        Ok(IdMap {
            to_internal,
            to_external: to_external.into_iter().map(Option::unwrap).collect(),
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "external_id,internal_id")?;
        for (id, ext) in self.to_external.iter().enumerate() {
            writeln!(w, "{ext},{id}")?;
        }
        Ok(())
    }
}

/// Reads an edge list written in external ids. With `map = None` a fresh
/// map is built from first appearance; otherwise every token must be mapped.
pub fn read_external_edge_list<R: BufRead>(reader: R, map: Option<IdMap>) -> Result<(IdMap, Vec<(usize, usize)>)> {
    let frozen = map.is_some();
    let mut map = map.unwrap_or_default();
    let mut edges = Vec::new();
    for r in content_lines(reader) {
        let (line_no, line) = r?;
        let (a, b) = two_tokens(line_no, &line)?;
        let mut resolve = |tok: &str| {
            if frozen {
                map.internal(tok).ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("id {tok:?} missing from id map"),
                })
            } else {
                Ok(map.intern(tok))
            }
        };
        let u = resolve(a)?;
        let v = resolve(b)?;
        edges.push((u, v));
    }
    Ok((map, edges))
}

/// Loads a graph whose edge list uses external ids resolved through `map`.
pub fn load_graph_with_id_map<T: Scalar, E: BufRead, A: BufRead>(
    edges: E,
    attributes: A,
    map: IdMap,
) -> Result<AttributedGraph<T>> {
    let attributes = read_attributes::<T, _>(attributes)?;
    if attributes.nrows() != map.len() {
        return Err(Error::Shape(format!(
            "id map has {} entries, attribute source has {} rows",
            map.len(),
            attributes.nrows()
        )));
    }
    let (_, edges) = read_external_edge_list(edges, Some(map))?;
    AttributedGraph::new(edges, attributes)
}

pub fn write_edge_list<T: Scalar, W: Write>(graph: &AttributedGraph<T>, mut w: W) -> std::io::Result<()> {
    for &(u, v) in graph.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

/// Writes attributes with round-trip precision.
pub fn write_attributes<T: Scalar, W: Write>(attributes: &Array2<T>, mut w: W) -> std::io::Result<()> {
    for row in attributes.rows() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_graph<T: Scalar>(graph: &AttributedGraph<T>, edge_path: &Path, attribute_path: &Path) -> Result<()> {
    let mut ew = create(edge_path)?;
    write_edge_list(graph, &mut ew)
        .and_then(|_| ew.flush())
        .map_err(|e| Error::io(edge_path, e))?;
    let mut aw = create(attribute_path)?;
    write_attributes(graph.attributes(), &mut aw)
        .and_then(|_| aw.flush())
        .map_err(|e| Error::io(attribute_path, e))
}
