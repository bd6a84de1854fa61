use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Threshold rule on the summed features of a node's `hops`-neighbourhood:
/// class 1 iff the sum is at least `threshold`, class 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSum {
    pub threshold: f64,
    pub hops: usize,
}

impl RuleSum {
    pub fn new(threshold: f64, hops: usize) -> Self {
        Self { threshold, hops }
    }

    fn decide(&self, sum: f64) -> usize {
        usize::from(sum >= self.threshold)
    }

    pub(crate) fn query_class(&self, hop_distance: &[usize], x: &Matrix) -> usize {
        let sum: f64 = hop_distance
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= self.hops)
            .map(|(i, _)| x.row(i).iter().sum::<f64>())
            .sum();
        self.decide(sum)
    }

    /// Class of every node, each using its own neighbourhood in `adjacency`.
    pub(crate) fn classes(&self, adjacency: &[Vec<usize>], x: &Matrix) -> Vec<usize> {
        let n = adjacency.len();
        let row_sums: Vec<f64> = (0..n).map(|i| x.row(i).iter().sum()).collect();
        let mut dist = vec![usize::MAX; n];
        let mut frontier = Vec::new();
        let mut touched = Vec::new();
        (0..n)
            .map(|src| {
                for &t in &touched {
                    dist[t] = usize::MAX;
                }
                touched.clear();
                frontier.clear();
                dist[src] = 0;
                touched.push(src);
                frontier.push(src);
                let mut sum = row_sums[src];
                for depth in 1..=self.hops {
                    let mut next = Vec::new();
                    for &u in &frontier {
                        for &v in &adjacency[u] {
                            if dist[v] == usize::MAX {
                                dist[v] = depth;
                                touched.push(v);
                                next.push(v);
                                sum += row_sums[v];
                            }
                        }
                    }
                    frontier = next;
                }
                self.decide(sum)
            })
            .collect()
    }
}
