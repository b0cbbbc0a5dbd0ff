//! Undirected simple graphs and edge-list I/O.
//!
//! Adjacency is held as one bitset row per node, which keeps neighbourhood
//! intersections cheap for clique search while still giving O(1) edge lookup.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How node tokens in an edge list are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Indexing {
    #[default]
    Zero,
    One,
    Labeled,
}

impl std::str::FromStr for Indexing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" | "0" => Ok(Indexing::Zero),
            "one" | "1" => Ok(Indexing::One),
            "labeled" | "labelled" | "label" => Ok(Indexing::Labeled),
            other => Err(Error::invalid(format!("unknown indexing '{other}'"))),
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
    labels: Option<Vec<String>>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edge_count())
            .finish()
    }
}

impl Graph {
    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            words,
            rows: vec![0; n * words],
            labels: None,
        }
    }

    /// Builds a graph from an edge list. Self-loops are dropped and repeated
    /// edges collapse to one.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            g.insert(i, j);
        }
        Ok(g)
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.insert(i, j);
            }
        }
        g
    }

    pub(crate) fn insert(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.rows[i * self.words + j / 64] |= 1 << (j % 64);
        self.rows[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Bitset row of node `i`, `ceil(n / 64)` words long.
    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        BitIter::new(self.row(i))
    }

    /// Edges `(i, j)` with `i < j` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::invalid(format!(
                "{} labels supplied for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Induced subgraph on `nodes`; node `nodes[k]` becomes node `k`.
    pub fn subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut seen = vec![false; self.n];
        for &v in nodes {
            if v >= self.n {
                return Err(Error::NodeOutOfRange { index: v, n: self.n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::invalid(format!("node {v} listed twice")));
            }
        }
        let mut sub = Graph::empty(nodes.len());
        for (a, &u) in nodes.iter().enumerate() {
            for (b, &v) in nodes.iter().enumerate().skip(a + 1) {
                if self.has_edge(u, v) {
                    sub.insert(a, b);
                }
            }
        }
        if let Some(labels) = &self.labels {
            sub.labels = Some(nodes.iter().map(|&v| labels[v].clone()).collect());
        }
        Ok(sub)
    }

    /// Parses edge-list text. See [`load_edge_list`] for the format.
    pub fn parse_edge_list(text: &str, indexing: Indexing) -> Result<Graph> {
        let mut declared_n: Option<usize> = None;
        let mut raw: Vec<(usize, String, String)> = Vec::new();
        let mut first_data = true;

        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if first_data {
                first_data = false;
                if let Some(rest) = line.strip_prefix("n=") {
                    let n = rest.trim().parse::<usize>().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad node-count header '{line}'"),
                    })?;
                    declared_n = Some(n);
                    continue;
                }
            }
            let tokens: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .collect();
            match tokens.len() {
                2 => raw.push((lineno, tokens[0].to_string(), tokens[1].to_string())),
                3.. => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "expected two tokens; weighted or directed edge lists are not supported".into(),
                    })
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected two tokens, found '{line}'"),
                    })
                }
            }
        }

        let (n, pairs, labels) = match indexing {
            Indexing::Zero | Indexing::One => {
                let offset = usize::from(indexing == Indexing::One);
                let mut pairs = Vec::with_capacity(raw.len());
                let mut max_idx = None;
                for (lineno, a, b) in &raw {
                    let mut ends = [0usize; 2];
                    for (slot, tok) in ends.iter_mut().zip([a, b]) {
                        let v = tok.parse::<usize>().map_err(|_| Error::Parse {
                            line: *lineno,
                            msg: format!("'{tok}' is not a node index"),
                        })?;
                        if v < offset {
                            return Err(Error::Parse {
                                line: *lineno,
                                msg: format!("index {v} invalid for one-based input"),
                            });
                        }
                        *slot = v - offset;
                    }
                    max_idx = max_idx.max(Some(ends[0].max(ends[1])));
                    pairs.push((*lineno, ends[0], ends[1]));
                }
                let seen_n = max_idx.map_or(0, |m| m + 1);
                let n = match declared_n {
                    Some(d) if d < seen_n => {
                        return Err(Error::invalid(format!(
                            "header declares n={d} but node index {} appears",
                            seen_n - 1 + offset
                        )))
                    }
                    Some(d) => d,
                    None => seen_n,
                };
                (n, pairs, None)
            }
            Indexing::Labeled => {
                let mut index: HashMap<String, usize> = HashMap::new();
                let mut labels = Vec::new();
                let mut pairs = Vec::with_capacity(raw.len());
                for (lineno, a, b) in raw {
                    let mut ends = [0usize; 2];
                    for (slot, tok) in ends.iter_mut().zip([a, b]) {
                        let next = labels.len();
                        let id = *index.entry(tok.clone()).or_insert_with(|| {
                            labels.push(tok);
                            next
                        });
                        *slot = id;
                    }
                    pairs.push((lineno, ends[0], ends[1]));
                }
                let n = labels.len();
                if let Some(d) = declared_n {
                    if d < n {
                        return Err(Error::invalid(format!("header declares n={d} but {n} labels appear")));
                    }
                    for k in n..d {
                        labels.push(format!("_isolated{k}"));
                    }
                }
                (labels.len(), pairs, Some(labels))
            }
        };

        let mut g = Graph::empty(n);
        for (_, i, j) in pairs {
            g.insert(i, j);
        }
        if g.edge_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        g.labels = labels;
        Ok(g)
    }

    /// Edge-list text with an `n=` header. Labeled graphs write their labels.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n={}", self.n);
        for (i, j) in self.edges() {
            match &self.labels {
                Some(l) => {
                    let _ = writeln!(out, "{} {}", l[i], l[j]);
                }
                None => {
                    let _ = writeln!(out, "{i} {j}");
                }
            }
        }
        out
    }
}

/// Reads an edge list from `path`.
///
/// One edge per line as two whitespace- or comma-separated tokens. Lines
/// starting with `#` are ignored and an optional first line `n=<int>`
/// declares the node count (otherwise it is inferred from the tokens).
pub fn load_edge_list(path: impl AsRef<Path>, indexing: Indexing) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Graph::parse_edge_list(&text, indexing)
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, g.to_edge_list()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) struct BitIter<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl<'a> BitIter<'a> {
    pub(crate) fn new(words: &'a [u64]) -> Self {
        BitIter {
            words,
            idx: 0,
            cur: words.first().copied().unwrap_or(0),
        }
    }
}

impl Iterator for BitIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let b = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * 64 + b);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge_set(g: &Graph) -> Vec<(usize, usize)> {
        g.edges().collect()
    }

    #[test]
    fn zero_indexed_path() {
        let g = Graph::parse_edge_list("0 1\n1 2", Indexing::Zero).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(edge_set(&g), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn one_indexed_dedup_and_self_loop() {
        let g = Graph::parse_edge_list("1 2\n2 1\n1 1", Indexing::One).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(edge_set(&g), vec![(0, 1)]);
    }

    #[test]
    fn labeled_triangle() {
        let g = Graph::parse_edge_list("a b\nb c\nc a", Indexing::Labeled).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.labels().unwrap(), &["a", "b", "c"]);
    }

    #[test]
    fn comments_header_and_csv() {
        let g = Graph::parse_edge_list("# comment\nn=5\n0,1\n# more\n3, 4\n", Indexing::Zero).unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(edge_set(&g), vec![(0, 1), (3, 4)]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = Graph::parse_edge_list("0 1\n2\n", Indexing::Zero).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = Graph::parse_edge_list("0 1\n1 x\n", Indexing::Zero).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn weighted_rejected() {
        let err = Graph::parse_edge_list("0 1 0.5\n", Indexing::Zero).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(
            Graph::parse_edge_list("# nothing\n", Indexing::Zero),
            Err(Error::EmptyGraph)
        ));
        assert!(matches!(Graph::parse_edge_list("3 3\n", Indexing::Zero), Err(Error::EmptyGraph)));
    }

    #[test]
    fn zero_index_in_one_based_input() {
        assert!(Graph::parse_edge_list("0 1\n", Indexing::One).is_err());
    }

    #[test]
    fn header_smaller_than_indices() {
        assert!(Graph::parse_edge_list("n=2\n0 5\n", Indexing::Zero).is_err());
    }

    #[test]
    fn subgraph_cases() {
        let tri = Graph::complete(3);
        let s = tri.subgraph(&[0, 1]).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(edge_set(&s), vec![(0, 1)]);

        assert_eq!(tri.subgraph(&[0, 1, 2]).unwrap(), tri);

        let c4 = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let s = c4.subgraph(&[0, 2]).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.edge_count(), 0);

        assert!(matches!(c4.subgraph(&[0, 9]), Err(Error::NodeOutOfRange { index: 9, n: 4 })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let g = Graph::from_edges(6, [(0, 5), (1, 2), (2, 3)]).unwrap();
        save_edge_list(&g, &path).unwrap();
        assert_eq!(load_edge_list(&path, Indexing::Zero).unwrap(), g);
        assert!(matches!(
            load_edge_list(dir.path().join("missing"), Indexing::Zero),
            Err(Error::Io { .. })
        ));
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..10).prop_flat_map(|n| {
            proptest::collection::vec(proptest::bool::ANY, n * (n - 1) / 2).prop_map(move |bits| {
                let mut g = Graph::empty(n);
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if bits[k] {
                            g.insert(i, j);
                        }
                        k += 1;
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(g in arb_graph()) {
            prop_assume!(g.edge_count() > 0);
            let back = Graph::parse_edge_list(&g.to_edge_list(), Indexing::Zero).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn subgraph_matches_brute_force(g in arb_graph(), mask in proptest::collection::vec(proptest::bool::ANY, 10)) {
            let nodes: Vec<usize> = (0..g.n()).filter(|&v| mask[v]).collect();
            let s = g.subgraph(&nodes).unwrap();
            for (a, &u) in nodes.iter().enumerate() {
                for (b, &v) in nodes.iter().enumerate() {
                    prop_assert_eq!(s.has_edge(a, b), u != v && g.has_edge(u, v));
                }
            }
        }

        #[test]
        fn adjacency_symmetric_no_loops(g in arb_graph()) {
            for i in 0..g.n() {
                prop_assert!(!g.has_edge(i, i));
                for j in 0..g.n() {
                    prop_assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
                }
            }
        }
    }
}
