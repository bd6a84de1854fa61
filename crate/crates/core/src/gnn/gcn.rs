//! Graph convolutional networks with symmetric normalisation and manual
//! reverse-mode differentiation.
//!
//! A layer computes `Z = Â H W` with `Â = D^{-1/2} (A + I) D^{-1/2}`, where the
//! self-loops and degrees come from whatever adjacency the caller passes in
//! (the computational graph during explanation, the full graph in training).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{axpy, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GcnArch {
    /// ReLU between layers, logits are the last layer's output.
    Plain,
    /// ReLU after every layer; all layer outputs are concatenated and fed to
    /// a linear classifier.
    Stacked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gcn {
    arch: GcnArch,
    convs: Vec<Matrix>,
    head: Option<Linear>,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone)]
pub struct GcnGrads {
    pub convs: Vec<Matrix>,
    pub head: Option<Linear>,
}

/// Intermediate values of a full forward pass, kept for backpropagation.
pub(crate) struct ForwardCache {
    /// `Â H_{l-1}` for every layer.
    aggregated: Vec<Matrix>,
    /// Pre-activations `Z_l`.
    pre: Vec<Matrix>,
    /// Layer outputs `H_l` (post-activation where one applies).
    out: Vec<Matrix>,
    pub logits: Matrix,
}

pub(crate) fn inv_sqrt_degrees(adjacency: &[Vec<usize>]) -> Vec<f64> {
    adjacency.iter().map(|ns| 1.0 / ((ns.len() + 1) as f64).sqrt()).collect()
}

/// `Â H` over all rows.
pub(crate) fn propagate(adjacency: &[Vec<usize>], norm: &[f64], h: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for (i, ns) in adjacency.iter().enumerate() {
        aggregate_row(i, ns, norm, h, out.row_mut(i));
    }
    out
}

#[inline]
fn aggregate_row(i: usize, neighbors: &[usize], norm: &[f64], h: &Matrix, dst: &mut [f64]) {
    let ci = norm[i];
    axpy(ci * ci, h.row(i), dst);
    for &j in neighbors {
        axpy(ci * norm[j], h.row(j), dst);
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    // NaN passes through so divergence stays visible
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-a..a)).collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("shape")
}

impl Gcn {
    pub fn new(arch: GcnArch, convs: Vec<Matrix>, head: Option<Linear>) -> Result<Self> {
        if convs.is_empty() {
            return Err(Error::InvalidParameter("a GCN needs at least one layer".into()));
        }
        for pair in convs.windows(2) {
            if pair[0].cols() != pair[1].rows() {
                return Err(Error::Dimension(format!(
                    "layer output width {} feeds layer input width {}",
                    pair[0].cols(),
                    pair[1].rows()
                )));
            }
        }
        match (arch, &head) {
            (GcnArch::Plain, None) => {}
            (GcnArch::Stacked, Some(h)) => {
                let concat: usize = convs.iter().map(Matrix::cols).sum();
                if h.weights.rows() != concat || h.bias.len() != h.weights.cols() {
                    return Err(Error::Dimension(format!(
                        "head is {}x{} with {} biases, expected {concat} inputs",
                        h.weights.rows(),
                        h.weights.cols(),
                        h.bias.len()
                    )));
                }
            }
            (GcnArch::Plain, Some(_)) => {
                return Err(Error::InvalidParameter("plain GCN has no classifier head".into()))
            }
            (GcnArch::Stacked, None) => {
                return Err(Error::InvalidParameter("stacked GCN needs a classifier head".into()))
            }
        }
        Ok(Self { arch, convs, head })
    }

    /// Glorot-uniform initialisation; the head bias starts at zero.
    pub fn init(
        arch: GcnArch,
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        num_layers: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if num_layers == 0 {
            return Err(Error::InvalidParameter("a GCN needs at least one layer".into()));
        }
        let mut convs = Vec::with_capacity(num_layers);
        let mut fan_in = input_dim;
        for l in 0..num_layers {
            let fan_out = if arch == GcnArch::Plain && l + 1 == num_layers {
                num_classes
            } else {
                hidden_dim
            };
            convs.push(glorot(rng, fan_in, fan_out));
            fan_in = fan_out;
        }
        let head = match arch {
            GcnArch::Plain => None,
            GcnArch::Stacked => Some(Linear {
                weights: glorot(rng, hidden_dim * num_layers, num_classes),
                bias: vec![0.0; num_classes],
            }),
        };
        Self::new(arch, convs, head)
    }

    pub fn arch(&self) -> GcnArch {
        self.arch
    }

    pub fn convs(&self) -> &[Matrix] {
        &self.convs
    }

    pub fn head(&self) -> Option<&Linear> {
        self.head.as_ref()
    }

    pub fn num_layers(&self) -> usize {
        self.convs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.convs[0].rows()
    }

    pub fn num_classes(&self) -> usize {
        match &self.head {
            Some(h) => h.weights.cols(),
            None => self.convs.last().unwrap().cols(),
        }
    }

    fn activates(&self, layer: usize) -> bool {
        self.arch == GcnArch::Stacked || layer + 1 < self.convs.len()
    }

    pub(crate) fn check_input(&self, x: &Matrix, n: usize) -> Result<()> {
        if x.cols() != self.input_dim() || x.rows() != n {
            return Err(Error::Dimension(format!(
                "features are {}x{}, model expects {n}x{}",
                x.rows(),
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Full forward pass over every node of `adjacency`.
    pub(crate) fn forward_cached(&self, adjacency: &[Vec<usize>], x: &Matrix) -> ForwardCache {
        let norm = inv_sqrt_degrees(adjacency);
        let mut aggregated = Vec::with_capacity(self.convs.len());
        let mut pre = Vec::with_capacity(self.convs.len());
        let mut out: Vec<Matrix> = Vec::with_capacity(self.convs.len());
        for (l, w) in self.convs.iter().enumerate() {
            let input = if l == 0 { x } else { &out[l - 1] };
            let agg = propagate(adjacency, &norm, input);
            let z = agg.matmul(w);
            let mut h = z.clone();
            if self.activates(l) {
                h.map_inplace(relu);
            }
            aggregated.push(agg);
            pre.push(z);
            out.push(h);
        }
        let logits = match &self.head {
            None => out.last().unwrap().clone(),
            Some(head) => {
                let n = x.rows();
                let mut logits = Matrix::zeros(n, head.weights.cols());
                for i in 0..n {
                    let dst = logits.row_mut(i);
                    dst.copy_from_slice(&head.bias);
                    let mut offset = 0;
                    for h in &out {
                        for (k, &v) in h.row(i).iter().enumerate() {
                            if v != 0.0 {
                                axpy(v, head.weights.row(offset + k), dst);
                            }
                        }
                        offset += h.cols();
                    }
                }
                logits
            }
        };
        ForwardCache {
            aggregated,
            pre,
            out,
            logits,
        }
    }

    pub fn logits(&self, adjacency: &[Vec<usize>], x: &Matrix) -> Result<Matrix> {
        self.check_input(x, adjacency.len())?;
        Ok(self.forward_cached(adjacency, x).logits)
    }

    /// Back-propagates `d_logits` through a cached forward pass. Returns the
    /// parameter gradients and, if requested, the gradient w.r.t. the input.
    pub(crate) fn backward(
        &self,
        adjacency: &[Vec<usize>],
        cache: &ForwardCache,
        d_logits: &Matrix,
        want_input_grad: bool,
    ) -> (GcnGrads, Option<Matrix>) {
        let norm = inv_sqrt_degrees(adjacency);
        let num_layers = self.convs.len();
        let n = d_logits.rows();
        // gradient w.r.t. each layer output H_l
        let mut d_out: Vec<Matrix> = self
            .convs
            .iter()
            .map(|w| Matrix::zeros(n, w.cols()))
            .collect();
        let head_grad = match &self.head {
            None => {
                d_out[num_layers - 1] = d_logits.clone();
                None
            }
            Some(head) => {
                let mut dw = Matrix::zeros(head.weights.rows(), head.weights.cols());
                let mut db = vec![0.0; head.bias.len()];
                for i in 0..n {
                    let g = d_logits.row(i);
                    if g.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    axpy(1.0, g, &mut db);
                    let mut offset = 0;
                    for (l, h) in cache.out.iter().enumerate() {
                        for (k, &v) in h.row(i).iter().enumerate() {
                            if v != 0.0 {
                                axpy(v, g, dw.row_mut(offset + k));
                            }
                        }
                        let dh = d_out[l].row_mut(i);
                        for (k, dst) in dh.iter_mut().enumerate() {
                            *dst += crate::matrix::dot(head.weights.row(offset + k), g);
                        }
                        offset += h.cols();
                    }
                }
                Some(Linear {
                    weights: dw,
                    bias: db,
                })
            }
        };

        let mut conv_grads: Vec<Matrix> = self
            .convs
            .iter()
            .map(|w| Matrix::zeros(w.rows(), w.cols()))
            .collect();
        let mut d_input = None;
        for l in (0..num_layers).rev() {
            let mut dz = std::mem::replace(&mut d_out[l], Matrix::zeros(0, 0));
            if self.activates(l) {
                for (g, &z) in dz.as_mut_slice().iter_mut().zip(cache.pre[l].as_slice()) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            conv_grads[l] = cache.aggregated[l].t_matmul(&dz);
            if l == 0 && !want_input_grad {
                break;
            }
            // Â is symmetric, so the input gradient is Â (dZ Wᵀ).
            let d_agg = dz.matmul_t(&self.convs[l]);
            let d_prev = propagate(adjacency, &norm, &d_agg);
            if l == 0 {
                d_input = Some(d_prev);
            } else {
                d_out[l - 1].add_assign(&d_prev);
            }
        }
        (
            GcnGrads {
                convs: conv_grads,
                head: head_grad,
            },
            d_input,
        )
    }

    /// Logits of the query node only, computing each layer just on the nodes
    /// that can still reach the query (hop distance `<= L - l`).
    pub fn query_logits(
        &self,
        adjacency: &[Vec<usize>],
        hop_distance: &[usize],
        query: usize,
        x: &Matrix,
    ) -> Vec<f64> {
        let n = adjacency.len();
        let num_layers = self.convs.len();
        let norm = inv_sqrt_degrees(adjacency);
        let mut h_prev: Option<Matrix> = None;
        let mut query_outputs: Vec<Vec<f64>> = Vec::with_capacity(num_layers);
        let mut agg = Vec::new();
        for (l, w) in self.convs.iter().enumerate() {
            let input = h_prev.as_ref().unwrap_or(x);
            let reach = num_layers - 1 - l;
            let mut h = Matrix::zeros(n, w.cols());
            for i in 0..n {
                if hop_distance[i] > reach {
                    continue;
                }
                agg.clear();
                agg.resize(input.cols(), 0.0);
                aggregate_row(i, &adjacency[i], &norm, input, &mut agg);
                let dst = h.row_mut(i);
                for (k, &a) in agg.iter().enumerate() {
                    if a != 0.0 {
                        axpy(a, w.row(k), dst);
                    }
                }
                if self.activates(l) {
                    for v in dst.iter_mut() {
                        *v = relu(*v);
                    }
                }
            }
            query_outputs.push(h.row(query).to_vec());
            h_prev = Some(h);
        }
        match &self.head {
            None => query_outputs.pop().unwrap(),
            Some(head) => {
                let mut logits = head.bias.clone();
                let mut offset = 0;
                for hq in &query_outputs {
                    for (k, &v) in hq.iter().enumerate() {
                        if v != 0.0 {
                            axpy(v, head.weights.row(offset + k), &mut logits);
                        }
                    }
                    offset += hq.len();
                }
                logits
            }
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.convs.iter_mut().map(Matrix::as_mut_slice).collect();
        if let Some(h) = &mut self.head {
            out.push(h.weights.as_mut_slice());
            out.push(&mut h.bias);
        }
        out
    }

    pub(crate) fn param_sum_sq(&self) -> f64 {
        let mut s: f64 = self.convs.iter().map(Matrix::sum_sq).sum();
        if let Some(h) = &self.head {
            s += h.weights.sum_sq() + h.bias.iter().map(|b| b * b).sum::<f64>();
        }
        s
    }
}

impl GcnGrads {
    pub(crate) fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.convs.iter_mut().map(Matrix::as_mut_slice).collect();
        if let Some(h) = &mut self.head {
            out.push(h.weights.as_mut_slice());
            out.push(&mut h.bias);
        }
        out
    }
}
