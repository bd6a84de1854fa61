//! Greedy search for sparse explanations that reach a fidelity threshold, and
//! its recursive variant returning several disjoint explanations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::Explanation;
use crate::features::FeatureMatrix;
use crate::fidelity::{FidelityEvaluator, NoiseBatch, NoiseSeed};
use crate::gnn::NodeClassifier;
use crate::graph::ComputationalGraph;
use crate::rng::label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZorroConfig {
    pub tau: f64,
    pub top_k: usize,
    pub samples: usize,
    pub seed: u64,
    /// Stop with [`Error::ExplanationIncomplete`] after this many elements.
    pub max_elements: Option<usize>,
    pub max_explanations: usize,
    pub max_depth: usize,
}

impl Default for ZorroConfig {
    fn default() -> Self {
        Self {
            tau: 0.85,
            top_k: 10,
            samples: 100,
            seed: 0,
            max_elements: None,
            max_explanations: 32,
            max_depth: 16,
        }
    }
}

impl ZorroConfig {
    pub fn with_tau(tau: f64) -> Self {
        Self {
            tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        if self.max_explanations == 0 {
            return Err(Error::InvalidParameter("max_explanations must be at least 1".into()));
        }
        Ok(())
    }
}

/// One selectable element: a local node (row) or a feature (column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "index")]
pub enum Element {
    Node(usize),
    Feature(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub element: Element,
    /// Fidelity of the explanation right after adding `element`.
    pub fidelity: f64,
    /// Every candidate evaluated in this step with its fidelity. Empty for
    /// the initial element, which is chosen from the rankings.
    pub candidates: Vec<(Element, f64)>,
}

/// Static candidate orderings computed once per search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidates {
    /// `(node, F({v}, F_p))`, best first.
    pub nodes: Vec<(usize, f64)>,
    /// `(feature, F(V_p, {f}))`, best first.
    pub features: Vec<(usize, f64)>,
}

impl RankedCandidates {
    pub fn node_ranking(&self) -> Vec<usize> {
        self.nodes.iter().map(|&(v, _)| v).collect()
    }

    pub fn feature_ranking(&self) -> Vec<usize> {
        self.features.iter().map(|&(f, _)| f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZorroExplanation {
    pub explanation: Explanation,
    /// Fidelity estimate of `explanation` on a noise draw that played no
    /// part in choosing its elements.
    pub fidelity: f64,
    pub samples: usize,
    pub tau: f64,
    pub trace: Vec<TraceStep>,
    pub rankings: RankedCandidates,
}

impl ZorroExplanation {
    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.trace.iter().map(|s| s.element)
    }

    /// Shortest prefix of the search whose recorded fidelity reached
    /// `tau`, i.e. the explanation a run with threshold `tau` would return.
    pub fn truncate_to(&self, tau: f64) -> Option<ZorroExplanation> {
        let end = self.trace.iter().position(|s| s.fidelity >= tau)?;
        let e = &self.explanation;
        let mut explanation = Explanation::empty(e.query_node(), e.num_nodes(), e.num_features());
        for step in &self.trace[..=end] {
            match step.element {
                Element::Node(v) => explanation.insert_node(v),
                Element::Feature(f) => explanation.insert_feature(f),
            }
        }
        Some(ZorroExplanation {
            explanation,
            fidelity: self.trace[end].fidelity,
            samples: self.samples,
            tau,
            trace: self.trace[..=end].to_vec(),
            rankings: self.rankings.clone(),
        })
    }
}

/// Sorts descending by score, ties by ascending index.
fn rank(mut scored: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Highest fidelity among evaluated candidates, lowest index on ties.
fn best(scored: &[(usize, f64)]) -> Option<(usize, f64)> {
    scored
        .iter()
        .copied()
        .fold(None, |acc, (i, s)| match acc {
            Some((bi, bs)) if bs > s || (bs == s && bi < i) => Some((bi, bs)),
            _ => Some((i, s)),
        })
}

struct Search<'e, 'a, M: NodeClassifier + ?Sized> {
    ev: &'e FidelityEvaluator<'a, M>,
    config: &'e ZorroConfig,
    call: u64,
}

impl<M: NodeClassifier + ?Sized> Search<'_, '_, M> {
    fn batch(&self, step: u64) -> NoiseBatch {
        let seed = NoiseSeed::new(self.config.seed, &[label::NOISE, self.call, step]);
        self.ev.noise_batch(seed, self.config.samples, true)
    }

    fn fidelity(&self, e: &Explanation, batch: &NoiseBatch) -> Result<f64> {
        Ok(self.ev.count_matches(e, batch)? as f64 / self.config.samples as f64)
    }

    fn mask(&self, nodes: &[usize], features: &[usize]) -> Result<Explanation> {
        let f = self.ev.features();
        Explanation::from_sets(self.ev.cg().query_node(), f.rows(), f.cols(), nodes.iter().copied(), features.iter().copied())
    }

    /// Greedy search restricted to candidate nodes `vp` and features `fp`.
    fn run(&self, vp: &[usize], fp: &[usize]) -> Result<ZorroExplanation> {
        let batch = self.batch(0);
        let mut node_scores = Vec::with_capacity(vp.len());
        for &v in vp {
            node_scores.push((v, self.fidelity(&self.mask(&[v], fp)?, &batch)?));
        }
        let mut feature_scores = Vec::with_capacity(fp.len());
        for &f in fp {
            feature_scores.push((f, self.fidelity(&self.mask(vp, &[f])?, &batch)?));
        }
        let rankings = RankedCandidates {
            nodes: rank(node_scores),
            features: rank(feature_scores),
        };

        let mut current = self.mask(&[], &[])?;
        let first = if vp.len() == 1 {
            Element::Node(vp[0])
        } else {
            match (rankings.nodes.first(), rankings.features.first()) {
                (Some(&(v, sv)), Some(&(f, sf))) => {
                    if sv <= sf {
                        Element::Feature(f)
                    } else {
                        Element::Node(v)
                    }
                }
                (Some(&(v, _)), None) => Element::Node(v),
                (None, Some(&(f, _))) => Element::Feature(f),
                (None, None) => return Err(Error::InvalidParameter("no candidate nodes or features".into())),
            }
        };
        insert(&mut current, first);
        // The stop rule is checked on the batch the next step will use, never
        // on the batch that picked the element: the maximum over candidates
        // on one draw overstates the winner's fidelity.
        let mut step = 1u64;
        let mut batch = self.batch(step);
        let mut fidelity = self.fidelity(&current, &batch)?;
        let mut trace = vec![TraceStep {
            element: first,
            fidelity,
            candidates: Vec::new(),
        }];

        let node_order = rankings.node_ranking();
        let feature_order = rankings.feature_ranking();
        while fidelity < self.config.tau {
            if self.config.max_elements.is_some_and(|m| trace.len() >= m) {
                return Err(self.incomplete(current, fidelity, trace, rankings));
            }
            let nodes: Vec<usize> = node_order.iter().copied().filter(|&v| !current.has_node(v)).take(self.config.top_k).collect();
            let features: Vec<usize> =
                feature_order.iter().copied().filter(|&f| !current.has_feature(f)).take(self.config.top_k).collect();
            if nodes.is_empty() && features.is_empty() {
                return Err(self.incomplete(current, fidelity, trace, rankings));
            }
            let mut node_fids = Vec::with_capacity(nodes.len());
            for &v in &nodes {
                let mut e = current.clone();
                e.insert_node(v);
                node_fids.push((v, self.fidelity(&e, &batch)?));
            }
            let mut feature_fids = Vec::with_capacity(features.len());
            for &f in &features {
                let mut e = current.clone();
                e.insert_feature(f);
                feature_fids.push((f, self.fidelity(&e, &batch)?));
            }
            let (element, _) = match (best(&node_fids), best(&feature_fids)) {
                (Some((v, sv)), Some((f, sf))) => {
                    if sv <= sf {
                        (Element::Feature(f), sf)
                    } else {
                        (Element::Node(v), sv)
                    }
                }
                (Some((v, sv)), None) => (Element::Node(v), sv),
                (None, Some((f, sf))) => (Element::Feature(f), sf),
                (None, None) => unreachable!("candidates checked above"),
            };
            insert(&mut current, element);
            step += 1;
            batch = self.batch(step);
            fidelity = self.fidelity(&current, &batch)?;
            let candidates = node_fids
                .iter()
                .map(|&(v, s)| (Element::Node(v), s))
                .chain(feature_fids.iter().map(|&(f, s)| (Element::Feature(f), s)))
                .collect();
            trace.push(TraceStep {
                element,
                fidelity,
                candidates,
            });
        }
        Ok(ZorroExplanation {
            explanation: current,
            fidelity,
            samples: self.config.samples,
            tau: self.config.tau,
            trace,
            rankings,
        })
    }

    fn incomplete(&self, explanation: Explanation, fidelity: f64, trace: Vec<TraceStep>, rankings: RankedCandidates) -> Error {
        Error::ExplanationIncomplete {
            tau: self.config.tau,
            partial: Box::new(ZorroExplanation {
                explanation,
                fidelity,
                samples: self.config.samples,
                tau: self.config.tau,
                trace,
                rankings,
            }),
        }
    }
}

fn insert(e: &mut Explanation, element: Element) {
    match element {
        Element::Node(v) => e.insert_node(v),
        Element::Feature(f) => e.insert_feature(f),
    }
}

fn check_input(cg: &ComputationalGraph, features: &FeatureMatrix, config: &ZorroConfig) -> Result<()> {
    config.validate()?;
    if cg.num_nodes() == 0 || features.cols() == 0 {
        return Err(Error::InvalidParameter("empty computational graph or feature set".into()));
    }
    Ok(())
}

/// Greedy explanation of the query node of `cg`. `features` holds the rows of
/// the computational graph's nodes (see [`FeatureMatrix::restrict`]).
pub fn zorro_explain<M: NodeClassifier + ?Sized>(
    model: &M,
    cg: &ComputationalGraph,
    features: &FeatureMatrix,
    config: &ZorroConfig,
) -> Result<ZorroExplanation> {
    check_input(cg, features, config)?;
    let ev = FidelityEvaluator::new(model, cg, features)?;
    let all_nodes: Vec<usize> = (0..cg.num_nodes()).collect();
    let all_features: Vec<usize> = (0..features.cols()).collect();
    Search {
        ev: &ev,
        config,
        call: 0,
    }
    .run(&all_nodes, &all_features)
}

/// Several explanations such that any two pin disjoint sets of entries
/// (their node sets or their feature sets are disjoint).
///
/// After each explanation the search recurses on the remaining features with
/// all candidate nodes, and on the remaining nodes with all candidate
/// features. A branch is pruned when pinning every candidate entry does not
/// reach `tau`. Explanations that overlap one found earlier are dropped.
pub fn zorro_multi<M: NodeClassifier + ?Sized>(
    model: &M,
    cg: &ComputationalGraph,
    features: &FeatureMatrix,
    config: &ZorroConfig,
) -> Result<Vec<ZorroExplanation>> {
    check_input(cg, features, config)?;
    let ev = FidelityEvaluator::new(model, cg, features)?;
    let mut state = MultiState {
        ev: &ev,
        config,
        found: Vec::new(),
        calls: 0,
    };
    let all_nodes: Vec<usize> = (0..cg.num_nodes()).collect();
    let all_features: Vec<usize> = (0..features.cols()).collect();
    state.recurse(&all_nodes, &all_features, 0)?;
    Ok(state.found)
}

/// Noise step label for the pruning check of a recursive call.
const PRUNE_STEP: u64 = u64::MAX;

struct MultiState<'e, 'a, M: NodeClassifier + ?Sized> {
    ev: &'e FidelityEvaluator<'a, M>,
    config: &'e ZorroConfig,
    found: Vec<ZorroExplanation>,
    calls: u64,
}

impl<M: NodeClassifier + ?Sized> MultiState<'_, '_, M> {
    fn recurse(&mut self, vp: &[usize], fp: &[usize], depth: usize) -> Result<()> {
        if vp.is_empty() || fp.is_empty() || depth > self.config.max_depth || self.found.len() >= self.config.max_explanations {
            return Ok(());
        }
        let search = Search {
            ev: self.ev,
            config: self.config,
            call: self.calls,
        };
        self.calls += 1;
        let reachable = search.fidelity(&search.mask(vp, fp)?, &search.batch(PRUNE_STEP))?;
        if reachable < self.config.tau {
            return Ok(());
        }
        let found = match search.run(vp, fp) {
            Ok(z) => z,
            Err(Error::ExplanationIncomplete { .. }) => return Ok(()),
            Err(e) => return Err(e),
        };
        let selected_nodes = found.explanation.node_flags().to_vec();
        let selected_features = found.explanation.feature_flags().to_vec();
        if self.found.iter().all(|z| z.explanation.is_disjoint_from(&found.explanation)) {
            self.found.push(found);
        }
        let fr: Vec<usize> = fp.iter().copied().filter(|&f| !selected_features[f]).collect();
        let vr: Vec<usize> = vp.iter().copied().filter(|&v| !selected_nodes[v]).collect();
        if fr.len() < fp.len() {
            self.recurse(vp, &fr, depth + 1)?;
        }
        if vr.len() < vp.len() {
            self.recurse(&vr, fp, depth + 1)?;
        }
        Ok(())
    }
}

/// Indices of the nodes selected by `e`, mapped to global node ids.
pub fn global_nodes(cg: &ComputationalGraph, e: &Explanation) -> Vec<usize> {
    e.selected_nodes().into_iter().map(|v| cg.local_nodes()[v]).collect()
}
