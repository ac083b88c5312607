//! SNAP-style plain-text edge lists: one `src dst` pair per line, whitespace
//! separated, `#` starts a comment line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{DirectedGraph, NodeMap};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    /// Drop `u u` lines. When false a self-loop is a parse error.
    pub drop_self_loops: bool,
    /// Collapse repeated edges. When false a repeat is a parse error.
    pub dedup: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            drop_self_loops: true,
            dedup: true,
        }
    }
}

pub fn load_edge_list(path: &Path, options: LoadOptions) -> Result<(DirectedGraph, NodeMap)> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_edge_list(BufReader::new(file), options).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses an edge list and re-indexes node IDs densely in increasing ID order.
///
/// Endpoints of dropped self-loops still count as nodes.
pub fn parse_edge_list<R: BufRead>(reader: R, options: LoadOptions) -> Result<(DirectedGraph, NodeMap)> {
    let mut raw: Vec<(u64, u64)> = Vec::new();
    let mut loops: Vec<u64> = Vec::new();
    let mut seen: HashSet<(u64, u64)> = HashSet::new();

    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|source| Error::Io {
            path: Default::default(),
            source,
        })?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut fields = body.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected two node IDs, got {body:?}"),
            });
        };
        let parse = |s: &str| {
            s.parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid node ID {s:?}"),
            })
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u == v {
            if !options.drop_self_loops {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("self-loop on node {u}"),
                });
            }
            loops.push(u);
            continue;
        }
        if !seen.insert((u, v)) {
            if !options.dedup {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate edge {u} -> {v}"),
                });
            }
            continue;
        }
        raw.push((u, v));
    }

    let mut ids: Vec<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).chain(loops).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let map = NodeMap::from_ids(ids);
    let edges = raw
        .iter()
        .map(|&(u, v)| (map.index_of(u).unwrap(), map.index_of(v).unwrap()));
    let graph = DirectedGraph::from_edges(map.len(), edges)?;
    Ok((graph, map))
}

/// Writes `g` with external IDs from `map`, preceded by a SNAP-style header.
pub fn write_edge_list<W: Write>(g: &DirectedGraph, map: &NodeMap, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# Nodes: {} Edges: {}", g.node_count(), g.edge_count())?;
    writeln!(out, "# FromNodeId\tToNodeId")?;
    for (u, v) in g.edges() {
        writeln!(out, "{}\t{}", map.id_of(u), map.id_of(v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(DirectedGraph, NodeMap)> {
        parse_edge_list(text.as_bytes(), LoadOptions::default())
    }

    #[test]
    fn two_cycle() {
        let (g, _) = parse("0 1\n1 0\n").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 2));
        assert_eq!(g.out_degrees(), vec![1, 1]);
        assert_eq!(g.in_degrees(), vec![1, 1]);
    }

    #[test]
    fn cleaning_rules() {
        let (g, _) = parse("0 0\n0 1\n0 1\n").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
    }

    #[test]
    fn strict_mode_reports_line() {
        let strict = LoadOptions {
            drop_self_loops: false,
            dedup: false,
        };
        let err = parse_edge_list("0 1\n2 2\n".as_bytes(), strict).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_edge_list("0 1\n# c\n0 1\n".as_bytes(), strict).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn sparse_ids_are_reindexed_in_order() {
        let (g, map) = parse("# header\n\n900 7\n7\t42\n").unwrap();
        assert_eq!(map.ids(), &[7, 42, 900]);
        assert!(g.has_edge(2, 0));
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn malformed_lines() {
        for bad in ["0 1\n1\n", "0 1\n1 2 3\n", "0 x\n", "-1 2\n"] {
            assert!(matches!(parse(bad), Err(Error::Parse { .. })), "{bad:?}");
        }
        assert!(matches!(parse("# only comments\n"), Err(Error::EmptyGraph)));
    }

    #[test]
    fn write_then_read_back() {
        let (g, map) = parse("5 9\n9 5\n9 11\n").unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &map, &mut buf).unwrap();
        let (g2, map2) = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(g, g2);
        assert_eq!(map, map2);
    }

    #[test]
    fn missing_file() {
        let err = load_edge_list(Path::new("/definitely/not/here.txt"), LoadOptions::default());
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
