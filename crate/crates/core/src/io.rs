//! Dataset bundles, explanation files and metric tables.
//!
//! A dataset directory holds
//! - `graph.txt`: edge list (`nodes=<N>` header, one `u v` pair per line),
//! - `features.csv`: one comma-separated row of reals per node,
//! - `labels.csv`: header `node,label`, one row per node,
//! - `split.csv`: header `node,split`, split is `train` or `test`,
//! - optionally `ground_truth.csv`: header `node,members`, members
//!   space-separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineOutput;
use crate::error::{Error, Result};
use crate::explanation::{Explanation, SoftMask};
use crate::features::{FeatureMatrix};
use crate::graph::{ComputationalGraph, Graph};
use crate::metrics::MetricRecord;
use crate::synth::SynthDataset;
use crate::zorro::{Element, ZorroExplanation};

pub const GRAPH_FILE: &str = "graph.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub train_nodes: Vec<usize>,
    pub test_nodes: Vec<usize>,
    /// Ground-truth explanation nodes, for nodes that have one.
    pub ground_truth: Option<Vec<Option<Vec<usize>>>>,
}

impl From<&SynthDataset> for Dataset {
    fn from(d: &SynthDataset) -> Self {
        Dataset {
            graph: d.graph.clone(),
            features: d.features.clone(),
            labels: d.labels.clone(),
            train_nodes: d.train_nodes.clone(),
            test_nodes: d.test_nodes.clone(),
            ground_truth: Some((0..d.labels.len()).map(|v| d.ground_truth(v).map(|h| h.to_vec())).collect()),
        }
    }
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Cross-file consistency: equal node counts and a disjoint split.
    pub fn check(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.features.rows() != n {
            return Err(Error::Inconsistent(format!("graph has {n} nodes, features {} rows", self.features.rows())));
        }
        if self.labels.len() != n {
            return Err(Error::Inconsistent(format!("graph has {n} nodes, {} labels", self.labels.len())));
        }
        let mut seen = vec![false; n];
        for &v in self.train_nodes.iter().chain(&self.test_nodes) {
            if v >= n {
                return Err(Error::NodeOutOfRange { index: v, num_nodes: n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Inconsistent(format!("node {v} appears twice in the split")));
            }
        }
        if let Some(gt) = &self.ground_truth {
            if gt.len() != n {
                return Err(Error::Inconsistent(format!("ground truth for {} of {n} nodes", gt.len())));
            }
            if let Some(&bad) = gt.iter().flatten().flatten().find(|&&v| v >= n) {
                return Err(Error::NodeOutOfRange { index: bad, num_nodes: n });
            }
        }
        Ok(())
    }
}

/// Rows of a two-column CSV with the given header, keyed by node.
fn parse_node_table(text: &str, origin: &Path, header: &str) -> Result<Vec<(usize, String, usize)>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line.replace(' ', "") != header {
                return Err(Error::parse(origin, lineno + 1, format!("expected header `{header}`")));
            }
            saw_header = true;
            continue;
        }
        let (node, value) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(origin, lineno + 1, "expected two comma-separated fields"))?;
        let node = node
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::parse(origin, lineno + 1, format!("bad node index `{node}`: {e}")))?;
        rows.push((node, value.trim().to_string(), lineno + 1));
    }
    if !saw_header {
        return Err(Error::parse(origin, 1, format!("missing header `{header}`")));
    }
    Ok(rows)
}

/// Labels indexed by node; every node in `0..num_nodes` must appear once.
pub fn parse_labels(text: &str, origin: &Path, num_nodes: usize) -> Result<Vec<usize>> {
    let mut labels = vec![None; num_nodes];
    let rows = parse_node_table(text, origin, "node,label")?;
    if rows.len() != num_nodes {
        return Err(Error::Inconsistent(format!(
            "{}: {} labels for {num_nodes} nodes",
            origin.display(),
            rows.len()
        )));
    }
    for (node, value, line) in rows {
        let label = value
            .parse::<usize>()
            .map_err(|e| Error::parse(origin, line, format!("bad label `{value}`: {e}")))?;
        let slot = labels
            .get_mut(node)
            .ok_or(Error::NodeOutOfRange { index: node, num_nodes })?;
        if slot.replace(label).is_some() {
            return Err(Error::parse(origin, line, format!("node {node} labelled twice")));
        }
    }
    Ok(labels.into_iter().map(|l| l.expect("count checked")).collect())
}

pub fn parse_split(text: &str, origin: &Path) -> Result<(Vec<usize>, Vec<usize>)> {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (node, value, line) in parse_node_table(text, origin, "node,split")? {
        match value.as_str() {
            "train" => train.push(node),
            "test" => test.push(node),
            other => return Err(Error::parse(origin, line, format!("split must be train or test, got `{other}`"))),
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn parse_ground_truth(text: &str, origin: &Path, num_nodes: usize) -> Result<Vec<Option<Vec<usize>>>> {
    let mut gt = vec![None; num_nodes];
    for (node, value, line) in parse_node_table(text, origin, "node,members")? {
        let members = value
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::parse(origin, line, format!("bad member `{t}`: {e}"))))
            .collect::<Result<Vec<usize>>>()?;
        *gt.get_mut(node).ok_or(Error::NodeOutOfRange { index: node, num_nodes })? = Some(members);
    }
    Ok(gt)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

pub fn load_labels(path: &Path, num_nodes: usize) -> Result<Vec<usize>> {
    parse_labels(&read(path)?, path, num_nodes)
}

pub fn load_split(path: &Path) -> Result<(Vec<usize>, Vec<usize>)> {
    parse_split(&read(path)?, path)
}

/// Loads a dataset directory (see the module docs for the layout).
pub fn load_planetoid_style(dir: &Path) -> Result<Dataset> {
    let graph = Graph::load(dir.join(GRAPH_FILE))?;
    let features_path = dir.join(FEATURES_FILE);
    let features = FeatureMatrix::new(FeatureMatrix::parse_csv(&read(&features_path)?, &features_path)?);
    let n = graph.num_nodes();
    if features.rows() != n {
        return Err(Error::Inconsistent(format!(
            "{} has {n} nodes but {} has {} rows",
            GRAPH_FILE,
            FEATURES_FILE,
            features.rows()
        )));
    }
    let labels = load_labels(&dir.join(LABELS_FILE), n)?;
    let (train_nodes, test_nodes) = load_split(&dir.join(SPLIT_FILE))?;
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let ground_truth = if gt_path.exists() {
        Some(parse_ground_truth(&read(&gt_path)?, &gt_path, n)?)
    } else {
        None
    };
    let d = Dataset {
        graph,
        features,
        labels,
        train_nodes,
        test_nodes,
        ground_truth,
    };
    d.check()?;
    Ok(d)
}

/// Writes a dataset directory and returns the written paths.
pub fn save_dataset(dir: &Path, d: &Dataset) -> Result<Vec<PathBuf>> {
    d.check()?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    put(GRAPH_FILE, d.graph.to_edge_list())?;
    put(FEATURES_FILE, FeatureMatrix::to_csv(d.features.values()))?;
    let mut labels = String::from("node,label\n");
    for (v, l) in d.labels.iter().enumerate() {
        let _ = writeln!(labels, "{v},{l}");
    }
    put(LABELS_FILE, labels)?;
    let mut split = String::from("node,split\n");
    let mut rows: Vec<(usize, &str)> = d.train_nodes.iter().map(|&v| (v, "train")).chain(d.test_nodes.iter().map(|&v| (v, "test"))).collect();
    rows.sort_unstable();
    for (v, s) in rows {
        let _ = writeln!(split, "{v},{s}");
    }
    put(SPLIT_FILE, split)?;
    if let Some(gt) = &d.ground_truth {
        let mut text = String::from("node,members\n");
        for (v, members) in gt.iter().enumerate() {
            if let Some(m) = members {
                let joined: Vec<String> = m.iter().map(usize::to_string).collect();
                let _ = writeln!(text, "{v},{}", joined.join(" "));
            }
        }
        put(GROUND_TRUTH_FILE, text)?;
    }
    Ok(written)
}

pub const EXPLANATION_FORMAT_VERSION: u32 = 1;

/// One greedy step with node indices in global numbering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub element: Element,
    pub fidelity: f64,
}

/// A hard mask in global node numbering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub nodes: Vec<usize>,
    pub features: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRecord>,
}

/// Soft scores; `node_scores` follows `graph_nodes` of the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftRecord {
    pub node_scores: Option<Vec<f64>>,
    pub feature_scores: Option<Vec<f64>>,
}

/// On-disk explanation of one query node: zero or more hard masks (several
/// for multi-explanations) or one soft mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationFile {
    pub format_version: u32,
    pub node: usize,
    pub explainer: String,
    pub hops: usize,
    pub num_features: usize,
    /// Global ids of the computational graph's nodes, in local order.
    pub graph_nodes: Vec<usize>,
    #[serde(default)]
    pub masks: Vec<MaskRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft: Option<SoftRecord>,
    /// Run parameters (threshold, samples, seed, ...).
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

fn global_element(cg: &ComputationalGraph, e: Element) -> Element {
    match e {
        Element::Node(v) => Element::Node(cg.local_nodes()[v]),
        f => f,
    }
}

impl MaskRecord {
    pub fn from_zorro(cg: &ComputationalGraph, z: &ZorroExplanation) -> Self {
        MaskRecord {
            nodes: z.explanation.selected_nodes().into_iter().map(|v| cg.local_nodes()[v]).collect(),
            features: z.explanation.selected_features(),
            fidelity: Some(z.fidelity),
            trace: z
                .trace
                .iter()
                .map(|s| TraceRecord {
                    element: global_element(cg, s.element),
                    fidelity: s.fidelity,
                })
                .collect(),
        }
    }

    pub fn from_explanation(cg: &ComputationalGraph, e: &Explanation) -> Self {
        MaskRecord {
            nodes: e.selected_nodes().into_iter().map(|v| cg.local_nodes()[v]).collect(),
            features: e.selected_features(),
            fidelity: None,
            trace: Vec::new(),
        }
    }
}

impl ExplanationFile {
    pub fn new(cg: &ComputationalGraph, num_features: usize, explainer: &str) -> Self {
        ExplanationFile {
            format_version: EXPLANATION_FORMAT_VERSION,
            node: cg.query_node(),
            explainer: explainer.to_string(),
            hops: cg.num_hops(),
            num_features,
            graph_nodes: cg.local_nodes().to_vec(),
            masks: Vec::new(),
            soft: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_baseline(mut self, cg: &ComputationalGraph, out: &BaselineOutput) -> Self {
        match out {
            BaselineOutput::Hard(e) => self.masks.push(MaskRecord::from_explanation(cg, e)),
            BaselineOutput::Soft(m) => {
                self.soft = Some(SoftRecord {
                    node_scores: m.node_scores.clone(),
                    feature_scores: m.feature_scores.clone(),
                })
            }
        }
        self
    }

    /// Checks that the file belongs to `cg` (same node set and order).
    pub fn check_against(&self, cg: &ComputationalGraph) -> Result<()> {
        if self.format_version != EXPLANATION_FORMAT_VERSION {
            return Err(Error::Version {
                found: self.format_version,
                expected: EXPLANATION_FORMAT_VERSION,
            });
        }
        if self.node != cg.query_node() || self.graph_nodes != cg.local_nodes() {
            return Err(Error::Inconsistent(format!(
                "explanation of node {} does not match its computational graph",
                self.node
            )));
        }
        Ok(())
    }

    /// Hard masks in local numbering of `cg`.
    pub fn hard_masks(&self, cg: &ComputationalGraph) -> Result<Vec<Explanation>> {
        self.check_against(cg)?;
        self.masks
            .iter()
            .map(|m| {
                let local = m
                    .nodes
                    .iter()
                    .map(|&v| {
                        cg.local_index_of(v)
                            .ok_or_else(|| Error::Inconsistent(format!("node {v} outside the computational graph of {}", self.node)))
                    })
                    .collect::<Result<Vec<usize>>>()?;
                Explanation::from_sets(cg.query_node(), cg.num_nodes(), self.num_features, local, m.features.iter().copied())
            })
            .collect()
    }

    pub fn soft_mask(&self) -> Result<Option<SoftMask>> {
        self.soft
            .as_ref()
            .map(|s| SoftMask::new(s.node_scores.clone(), s.feature_scores.clone()))
            .transpose()
    }

    /// Feature importance of the file's first mask: 0/1 flags for hard
    /// masks, scores for soft masks.
    pub fn feature_importance(&self) -> Option<Vec<f64>> {
        if let Some(m) = self.masks.first() {
            let mut flags = vec![0.0; self.num_features];
            for &f in &m.features {
                if let Some(slot) = flags.get_mut(f) {
                    *slot = 1.0;
                }
            }
            return Some(flags);
        }
        let soft = self.soft.as_ref()?;
        Some(soft.feature_scores.clone().unwrap_or_else(|| vec![1.0; self.num_features]))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ExplanationFile = serde_json::from_str(&read(path)?)?;
        if file.format_version != EXPLANATION_FORMAT_VERSION {
            return Err(Error::Version {
                found: file.format_version,
                expected: EXPLANATION_FORMAT_VERSION,
            });
        }
        Ok(file)
    }

    pub fn file_name(node: usize) -> String {
        format!("node-{node}.json")
    }
}

/// Metric table with a header row; missing values are empty fields.
pub fn metric_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from(MetricRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}
