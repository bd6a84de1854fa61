//! Undirected graphs and L-hop computational graphs.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Undirected, unweighted graph over nodes `0..num_nodes`.
///
/// Adjacency lists are sorted and deduplicated; self-loops are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from (possibly directed, possibly duplicated) edge pairs.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            for idx in [u, v] {
                if idx >= num_nodes {
                    return Err(Error::NodeOutOfRange {
                        index: idx,
                        num_nodes,
                    });
                }
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency })
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); num_nodes],
        }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    #[inline]
    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        let n = self.num_nodes();
        for idx in [u, v] {
            if idx >= n {
                return Err(Error::NodeOutOfRange {
                    index: idx,
                    num_nodes: n,
                });
            }
        }
        if u == v || self.has_edge(u, v) {
            return Ok(false);
        }
        for (a, b) in [(u, v), (v, u)] {
            let pos = self.adjacency[a].binary_search(&b).unwrap_err();
            self.adjacency[a].insert(pos, b);
        }
        Ok(true)
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        if !self.has_edge(u, v) {
            return false;
        }
        for (a, b) in [(u, v), (v, u)] {
            let pos = self.adjacency[a].binary_search(&b).unwrap();
            self.adjacency[a].remove(pos);
        }
        true
    }

    /// Nodes at distance `<= hops` from `node` with their distances, in BFS order.
    pub fn bfs_within(&self, node: usize, hops: usize) -> Result<Vec<(usize, usize)>> {
        self.check_node(node)?;
        let mut dist = vec![usize::MAX; self.num_nodes()];
        let mut order = vec![(node, 0)];
        let mut queue = VecDeque::from([node]);
        dist[node] = 0;
        while let Some(u) = queue.pop_front() {
            if dist[u] == hops {
                continue;
            }
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    order.push((v, dist[v]));
                    queue.push_back(v);
                }
            }
        }
        Ok(order)
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.num_nodes() {
            return Err(Error::NodeOutOfRange {
                index: node,
                num_nodes: self.num_nodes(),
            });
        }
        Ok(())
    }

    /// Parses the edge-list text format: an optional `nodes=<N>` header, then
    /// one whitespace-separated `u v` pair per line. `#` starts a comment.
    pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut edges = Vec::new();
        let mut max_index: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("nodes=") {
                if declared.is_some() || !edges.is_empty() {
                    return Err(Error::parse(origin, lineno, "`nodes=` header must come first"));
                }
                let n = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::parse(origin, lineno, format!("bad node count: {e}")))?;
                declared = Some(n);
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next_index = |what: &str| -> Result<usize> {
                let tok = parts
                    .next()
                    .ok_or_else(|| Error::parse(origin, lineno, format!("missing {what} endpoint")))?;
                tok.parse::<usize>()
                    .map_err(|e| Error::parse(origin, lineno, format!("bad {what} endpoint `{tok}`: {e}")))
            };
            let u = next_index("first")?;
            let v = next_index("second")?;
            if parts.next().is_some() {
                return Err(Error::parse(origin, lineno, "expected exactly two endpoints"));
            }
            if let Some(n) = declared {
                if u >= n || v >= n {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("dangling index {} for nodes={n}", u.max(v)),
                    ));
                }
            }
            max_index = Some(max_index.map_or(u.max(v), |m: usize| m.max(u).max(v)));
            edges.push((u, v));
        }
        let num_nodes = declared.unwrap_or_else(|| max_index.map_or(0, |m| m + 1));
        Graph::new(num_nodes, edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_edge_list(&text, path)
    }

    /// Serializes in the edge-list format, always writing the header.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("nodes={}\n", self.num_nodes());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// The subgraph induced on the L-hop neighbourhood of a query node.
///
/// Local node `i` corresponds to global node `local_nodes[i]`; local nodes are
/// sorted by ascending global index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationalGraph {
    query_node: usize,
    query_local: usize,
    num_hops: usize,
    local_nodes: Vec<usize>,
    hop_distance: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

impl ComputationalGraph {
    /// Extracts the graph induced on all nodes within `hops` of `node`.
    pub fn extract(graph: &Graph, node: usize, hops: usize) -> Result<Self> {
        if hops == 0 {
            return Err(Error::InvalidParameter("hop count must be at least 1".into()));
        }
        let mut reached = graph.bfs_within(node, hops)?;
        reached.sort_unstable();
        let local_nodes: Vec<usize> = reached.iter().map(|&(g, _)| g).collect();
        let hop_distance: Vec<usize> = reached.iter().map(|&(_, d)| d).collect();
        let adjacency = local_nodes
            .iter()
            .map(|&g| {
                graph
                    .neighbors(g)
                    .iter()
                    .filter_map(|nb| local_nodes.binary_search(nb).ok())
                    .collect()
            })
            .collect();
        let query_local = local_nodes.binary_search(&node).expect("query node is reached");
        Ok(Self {
            query_node: node,
            query_local,
            num_hops: hops,
            local_nodes,
            hop_distance,
            adjacency,
        })
    }

    #[inline]
    pub fn query_node(&self) -> usize {
        self.query_node
    }

    #[inline]
    pub fn query_local_index(&self) -> usize {
        self.query_local
    }

    #[inline]
    pub fn num_hops(&self) -> usize {
        self.num_hops
    }

    pub fn local_nodes(&self) -> &[usize] {
        &self.local_nodes
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.local_nodes.len()
    }

    /// Hop distance of each local node from the query node.
    pub fn hop_distance(&self) -> &[usize] {
        &self.hop_distance
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn local_index_of(&self, global: usize) -> Option<usize> {
        self.local_nodes.binary_search(&global).ok()
    }

    /// Induced edges in local indices, `(u, v)` with `u < v`.
    pub fn local_edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }
}
