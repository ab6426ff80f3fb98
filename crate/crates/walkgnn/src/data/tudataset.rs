//! Reader and writer for the multi-file plain-text dataset convention:
//! `{name}_A.txt` (directed edge entries "i, j", 1-based global node ids),
//! `{name}_graph_indicator.txt` (per node, 1-based owning graph id),
//! `{name}_graph_labels.txt` (per graph, integer class),
//! `{name}_node_labels.txt` (per node, integer label; optional).
//!
//! Parse errors carry the offending file and 1-based line; line 0 marks a
//! file-level problem such as a missing file.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeFeatureMatrix};

use super::{GraphDataset, MotifAnnotation};

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::parse(path.display().to_string(), 0, format!("cannot read file: {e}"))
    })?;
    Ok(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
}

fn parse_int(path: &Path, line_no: usize, token: &str, what: &str) -> Result<i64> {
    token.trim().parse::<i64>().map_err(|_| {
        Error::parse(
            path.display().to_string(),
            line_no,
            format!("expected integer {what}, got {token:?}"),
        )
    })
}

/// Loads the dataset `{dir}/{name}_*.txt`. Node ids become 0-based and
/// contiguous per graph; duplicate directed edge entries collapse to one
/// undirected edge; class labels are remapped onto `0..C` preserving their
/// sorted original order; node labels are one-hot encoded over the global
/// alphabet. A missing node-label file degrades to constant single-column
/// features with a warning.
pub fn parse_tudataset(dir: &Path, name: &str) -> Result<GraphDataset> {
    let a_path = dir.join(format!("{name}_A.txt"));
    let indicator_path = dir.join(format!("{name}_graph_indicator.txt"));
    let labels_path = dir.join(format!("{name}_graph_labels.txt"));
    let node_labels_path = dir.join(format!("{name}_node_labels.txt"));

    let label_lines = read_lines(&labels_path)?;
    let raw_labels: Vec<i64> = label_lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_int(&labels_path, i + 1, l, "graph label"))
        .collect::<Result<_>>()?;
    let num_graphs = raw_labels.len();
    if num_graphs == 0 {
        return Err(Error::parse(
            labels_path.display().to_string(),
            0,
            "no graph labels".to_string(),
        ));
    }

    // node -> owning graph (0-based), and node -> local id within it.
    let indicator_lines = read_lines(&indicator_path)?;
    let mut owner = Vec::new();
    let mut local_id = Vec::new();
    let mut node_counts = vec![0usize; num_graphs];
    for (i, line) in indicator_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let gid = parse_int(&indicator_path, i + 1, line, "graph id")?;
        if gid < 1 || gid as usize > num_graphs {
            return Err(Error::parse(
                indicator_path.display().to_string(),
                i + 1,
                format!("graph id {gid} outside 1..={num_graphs}"),
            ));
        }
        let g = (gid - 1) as usize;
        owner.push(g);
        local_id.push(node_counts[g]);
        node_counts[g] += 1;
    }
    let num_nodes = owner.len();

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    let a_lines = read_lines(&a_path)?;
    for (i, line) in a_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let (u_tok, v_tok) = match (parts.next(), parts.next()) {
            (Some(u), Some(v)) => (u, v),
            _ => {
                return Err(Error::parse(
                    a_path.display().to_string(),
                    i + 1,
                    format!("expected \"i, j\", got {line:?}"),
                ))
            }
        };
        let u = parse_int(&a_path, i + 1, u_tok, "node id")?;
        let v = parse_int(&a_path, i + 1, v_tok, "node id")?;
        for id in [u, v] {
            if id < 1 || id as usize > num_nodes {
                return Err(Error::parse(
                    a_path.display().to_string(),
                    i + 1,
                    format!("node id {id} outside 1..={num_nodes}"),
                ));
            }
        }
        let (u, v) = ((u - 1) as usize, (v - 1) as usize);
        if u == v {
            return Err(Error::parse(
                a_path.display().to_string(),
                i + 1,
                format!("self-loop on node {}", u + 1),
            ));
        }
        if owner[u] != owner[v] {
            return Err(Error::parse(
                a_path.display().to_string(),
                i + 1,
                format!(
                    "edge ({}, {}) crosses graphs {} and {}",
                    u + 1,
                    v + 1,
                    owner[u] + 1,
                    owner[v] + 1
                ),
            ));
        }
        edges[owner[u]].push((local_id[u], local_id[v]));
    }

    let graphs: Vec<Graph> = edges
        .iter()
        .enumerate()
        .map(|(g, e)| Graph::from_edges(node_counts[g], e))
        .collect::<Result<_>>()?;

    let features = if node_labels_path.exists() {
        let nl_lines = read_lines(&node_labels_path)?;
        let raw: Vec<i64> = nl_lines
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| parse_int(&node_labels_path, i + 1, l, "node label"))
            .collect::<Result<_>>()?;
        if raw.len() != num_nodes {
            return Err(Error::parse(
                node_labels_path.display().to_string(),
                0,
                format!("{} node labels for {num_nodes} nodes", raw.len()),
            ));
        }
        let alphabet: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let index_of = |x: i64| alphabet.binary_search(&x).unwrap();
        let mut per_graph: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
        for (node, &l) in raw.iter().enumerate() {
            per_graph[owner[node]].push(index_of(l));
        }
        per_graph
            .iter()
            .map(|ls| NodeFeatureMatrix::one_hot(ls, alphabet.len()))
            .collect::<Result<_>>()?
    } else {
        log::warn!(
            "{}: no node-label file, falling back to constant single-column features",
            node_labels_path.display()
        );
        node_counts.iter().map(|&n| NodeFeatureMatrix::constant(n)).collect()
    };

    let classes: Vec<i64> = raw_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();

    GraphDataset::new(name.to_string(), graphs, features, labels)
}

/// Writes `ds` back out in the four-file format, plus
/// `{name}_motif_nodes.txt` (comma-separated 0-based ids, one line per
/// graph) when annotations are given. Each undirected edge is emitted as
/// both directed entries. Node labels are recovered as the one-hot column
/// index of each feature row.
pub fn export_tudataset(
    ds: &GraphDataset,
    dir: &Path,
    annotations: Option<&[MotifAnnotation]>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let name = &ds.name;

    let mut a = String::new();
    let mut indicator = String::new();
    let mut node_labels = String::new();
    let mut offset = 0usize;
    for (gi, (g, f)) in ds.graphs.iter().zip(&ds.features).enumerate() {
        for (u, v) in g.edges() {
            a.push_str(&format!("{}, {}\n", offset + u + 1, offset + v + 1));
            a.push_str(&format!("{}, {}\n", offset + v + 1, offset + u + 1));
        }
        for v in 0..g.node_count() {
            indicator.push_str(&format!("{}\n", gi + 1));
            let row = f.row(v);
            let label = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            node_labels.push_str(&format!("{label}\n"));
        }
        offset += g.node_count();
    }
    let mut labels = String::new();
    for &l in &ds.labels {
        labels.push_str(&format!("{l}\n"));
    }

    write_file(&dir.join(format!("{name}_A.txt")), &a)?;
    write_file(&dir.join(format!("{name}_graph_indicator.txt")), &indicator)?;
    write_file(&dir.join(format!("{name}_graph_labels.txt")), &labels)?;
    write_file(&dir.join(format!("{name}_node_labels.txt")), &node_labels)?;

    if let Some(annotations) = annotations {
        if annotations.len() != ds.len() {
            return Err(Error::contract(format!(
                "{} annotations for {} graphs",
                annotations.len(),
                ds.len()
            )));
        }
        let mut motif = String::new();
        for ann in annotations {
            let ids: Vec<String> = ann.nodes.iter().map(|v| v.to_string()).collect();
            motif.push_str(&ids.join(", "));
            motif.push('\n');
        }
        write_file(&dir.join(format!("{name}_motif_nodes.txt")), &motif)?;
    }
    Ok(())
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

/// Reads `{name}_motif_nodes.txt` written by [`export_tudataset`].
pub fn parse_motif_nodes(dir: &Path, name: &str) -> Result<Vec<Vec<usize>>> {
    let path = dir.join(format!("{name}_motif_nodes.txt"));
    let lines = read_lines(&path)?;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ids: Vec<usize> = line
            .split(',')
            .map(|t| parse_int(&path, i + 1, t, "node id").map(|x| x as usize))
            .collect::<Result<_>>()?;
        out.push(ids);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(dir: &Path, name: &str, a: &str, ind: &str, gl: &str, nl: Option<&str>) {
        std::fs::write(dir.join(format!("{name}_A.txt")), a).unwrap();
        std::fs::write(dir.join(format!("{name}_graph_indicator.txt")), ind).unwrap();
        std::fs::write(dir.join(format!("{name}_graph_labels.txt")), gl).unwrap();
        if let Some(nl) = nl {
            std::fs::write(dir.join(format!("{name}_node_labels.txt")), nl).unwrap();
        }
    }

    #[test]
    fn four_line_fixture_hand_trace() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "fix",
            "1, 2\n2, 1\n3, 4\n4, 3\n",
            "1\n1\n2\n2\n",
            "1\n-1\n",
            Some("0\n1\n0\n1\n"),
        );
        let ds = parse_tudataset(dir.path(), "fix").unwrap();
        assert_eq!(ds.len(), 2);
        for g in &ds.graphs {
            assert_eq!(g.node_count(), 2);
            assert_eq!(g.edge_count(), 1);
        }
        // Original labels {-1, 1} map onto {0, 1} in sorted order.
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(ds.feature_dim, 2);
        assert_eq!(ds.features[0].row(0), &[1.0, 0.0]);
        assert_eq!(ds.features[0].row(1), &[0.0, 1.0]);
    }

    #[test]
    fn empty_edge_file_yields_edgeless_graphs() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "fix", "", "1\n1\n2\n2\n", "0\n1\n", Some("0\n0\n0\n0\n"));
        let ds = parse_tudataset(dir.path(), "fix").unwrap();
        assert_eq!(ds.graphs[0].edge_count(), 0);
        assert_eq!(ds.graphs[1].edge_count(), 0);
    }

    #[test]
    fn self_loop_line_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "fix", "1, 1\n", "1\n1\n2\n", "0\n1\n", None);
        let err = parse_tudataset(dir.path(), "fix").unwrap_err();
        match err {
            Error::Parse { file, line, message } => {
                assert!(file.ends_with("fix_A.txt"));
                assert_eq!(line, 1);
                assert!(message.contains("self-loop"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn cross_graph_edge_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "fix", "1, 2\n2, 1\n2, 3\n", "1\n1\n2\n2\n", "0\n1\n", None);
        let err = parse_tudataset(dir.path(), "fix").unwrap_err();
        match err {
            Error::Parse { file, line, message } => {
                assert!(file.ends_with("fix_A.txt"));
                assert_eq!(line, 3);
                assert!(message.contains("crosses graphs"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn bad_token_is_a_parse_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "fix", "1, 2\nx, 1\n", "1\n1\n2\n2\n", "0\n1\n", None);
        let err = parse_tudataset(dir.path(), "fix").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("expected integer"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_required_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = parse_tudataset(dir.path(), "nope").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 0, .. }));
    }

    #[test]
    fn indicator_out_of_range_graph_id() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "fix", "", "1\n3\n", "0\n1\n", None);
        let err = parse_tudataset(dir.path(), "fix").unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert!(file.ends_with("fix_graph_indicator.txt"));
                assert_eq!(line, 2);
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_node_labels_falls_back_to_constant_features() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "fix", "1, 2\n", "1\n1\n2\n2\n", "0\n1\n", None);
        let ds = parse_tudataset(dir.path(), "fix").unwrap();
        assert_eq!(ds.feature_dim, 1);
        assert_eq!(ds.features[0].row(0), &[1.0]);
    }

    #[test]
    fn crlf_line_endings_accepted() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "fix",
            "1, 2\r\n2, 1\r\n",
            "1\r\n1\r\n2\r\n2\r\n",
            "0\r\n1\r\n",
            Some("0\r\n1\r\n0\r\n1\r\n"),
        );
        let ds = parse_tudataset(dir.path(), "fix").unwrap();
        assert_eq!(ds.graphs[0].edge_count(), 1);
    }

    #[test]
    fn export_then_reparse_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "fix",
            "1, 2\n2, 1\n2, 3\n3, 2\n4, 5\n5, 4\n",
            "1\n1\n1\n2\n2\n",
            "5\n-2\n",
            Some("7\n7\n9\n9\n7\n"),
        );
        let ds = parse_tudataset(dir.path(), "fix").unwrap();
        let out = dir.path().join("roundtrip");
        export_tudataset(&ds, &out, None).unwrap();
        let ds2 = parse_tudataset(&out, "fix").unwrap();
        assert_eq!(ds.labels, ds2.labels);
        assert_eq!(ds.feature_dim, ds2.feature_dim);
        assert_eq!(ds.graphs.len(), ds2.graphs.len());
        for i in 0..ds.len() {
            assert_eq!(ds.graphs[i], ds2.graphs[i]);
            assert_eq!(ds.features[i], ds2.features[i]);
        }
    }
}
