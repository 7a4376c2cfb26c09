//! Network parameters, symmetric initialization, forward and backward passes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::FeatureVector;
use crate::error::{Error, Result};

/// Flattened weights of the scoring network.
///
/// Layout of the flat parameter vector, in fixed layer order:
/// `W_1` (`m x d`, row-major), then `W_2 ... W_{L-1}` (`m x m` each), then
/// `W_L` (`1 x m`). The total length is `p = m*d + m^2*(L-2) + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    input_dim: usize,
    width: usize,
    depth: usize,
    theta: Vec<f64>,
}

impl NetworkParams {
    /// Reassembles parameters from a flat vector in the documented layout.
    pub fn from_flat(input_dim: usize, width: usize, depth: usize, theta: Vec<f64>) -> Result<Self> {
        if depth < 2 {
            return Err(Error::InvalidArgument("network depth must be >= 2".into()));
        }
        let expected = total_params(input_dim, width, depth);
        if theta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: theta.len(),
            });
        }
        Ok(NetworkParams {
            input_dim,
            width,
            depth,
            theta,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total number of parameters `p = m + m*d + m^2*(L-2)`.
    pub fn total_params(&self) -> usize {
        self.theta.len()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.theta
    }

    pub(crate) fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Range of the flat vector occupied by `W_1`.
    fn w1(&self) -> &[f64] {
        &self.theta[..self.width * self.input_dim]
    }

    /// Range occupied by hidden layer `l` (2-based, `2 <= l <= L-1`).
    fn middle(&self, l: usize) -> &[f64] {
        let start = self.width * self.input_dim + (l - 2) * self.width * self.width;
        &self.theta[start..start + self.width * self.width]
    }

    /// Range occupied by the output layer `W_L`.
    fn output(&self) -> &[f64] {
        &self.theta[self.theta.len() - self.width..]
    }
}

pub(crate) fn total_params(input_dim: usize, width: usize, depth: usize) -> usize {
    width * input_dim + width * width * (depth - 2) + width
}

/// Flattened gradient of the network output with respect to all parameters,
/// in the same layout as [`NetworkParams::as_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(pub Vec<f64>);

impl TangentVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Elementwise difference `self - other`.
    pub fn sub(&self, other: &TangentVector) -> TangentVector {
        TangentVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// Draws the symmetric initialization.
///
/// Hidden layers have the block-diagonal form `(W, 0; 0, W)` with `W` entries
/// from `N(0, 4/m)`; the output layer is `(w^T, -w^T)` with `w` entries from
/// `N(0, 2/m)`. On inputs whose halves are duplicated, the two halves of
/// every hidden activation coincide, so the antisymmetric output layer scores
/// exactly zero.
pub fn init_params(input_dim: usize, width: usize, depth: usize, seed: u64) -> Result<NetworkParams> {
    if width % 2 != 0 || width == 0 {
        return Err(Error::InvalidArgument(format!(
            "network width must be even and positive, got {width}"
        )));
    }
    if input_dim % 2 != 0 || input_dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "input dimension must be even and positive, got {input_dim}"
        )));
    }
    if depth < 2 {
        return Err(Error::InvalidArgument("network depth must be >= 2".into()));
    }

    let m = width;
    let d = input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden_dist = Normal::new(0.0, (4.0 / m as f64).sqrt()).expect("positive std");
    let output_dist = Normal::new(0.0, (2.0 / m as f64).sqrt()).expect("positive std");

    let mut theta = vec![0.0; total_params(d, m, depth)];

    // W_1: (m/2) x (d/2) block repeated on the diagonal.
    {
        let (rows, cols) = (m / 2, d / 2);
        for i in 0..rows {
            for j in 0..cols {
                let v = hidden_dist.sample(&mut rng);
                theta[i * d + j] = v;
                theta[(i + rows) * d + (j + cols)] = v;
            }
        }
    }
    // Middle layers: (m/2) x (m/2) block repeated on the diagonal.
    for l in 2..depth {
        let base = m * d + (l - 2) * m * m;
        let half = m / 2;
        for i in 0..half {
            for j in 0..half {
                let v = hidden_dist.sample(&mut rng);
                theta[base + i * m + j] = v;
                theta[base + (i + half) * m + (j + half)] = v;
            }
        }
    }
    // Output layer: (w^T, -w^T).
    {
        let base = m * d + (depth - 2) * m * m;
        let half = m / 2;
        for j in 0..half {
            let v = output_dist.sample(&mut rng);
            theta[base + j] = v;
            theta[base + half + j] = -v;
        }
    }

    NetworkParams::from_flat(d, m, depth, theta)
}

/// Reusable buffers for forward and backward passes.
///
/// `pre` holds the pre-activation of every hidden layer; the post-ReLU
/// activation is recovered as `max(pre, 0)` and the ReLU subgradient at
/// exactly zero is taken to be zero.
pub(crate) struct Workspace {
    pub(crate) pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(width: usize, depth: usize) -> Self {
        Workspace {
            pre: vec![vec![0.0; width]; depth - 1],
            delta: vec![0.0; width],
            delta_next: vec![0.0; width],
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let mut acc = [0.0f64; 4];
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Forward pass writing hidden pre-activations into the workspace.
pub(crate) fn forward_into(params: &NetworkParams, x: &[f64], ws: &mut Workspace) -> f64 {
    let m = params.width;
    let d = params.input_dim;
    debug_assert_eq!(x.len(), d);

    {
        let w1 = params.w1();
        let pre = &mut ws.pre[0];
        for i in 0..m {
            pre[i] = dot(&w1[i * d..(i + 1) * d], x);
        }
    }
    for l in 2..params.depth {
        let wl = params.middle(l);
        let (prev_slice, cur_slice) = ws.pre.split_at_mut(l - 1);
        let prev = &prev_slice[l - 2];
        let cur = &mut cur_slice[0];
        for i in 0..m {
            let row = &wl[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (w, &p) in row.iter().zip(prev.iter()) {
                acc += w * relu(p);
            }
            cur[i] = acc;
        }
    }

    let out_w = params.output();
    let last = &ws.pre[params.depth - 2];
    let mut out = 0.0;
    for (w, &p) in out_w.iter().zip(last.iter()) {
        out += w * relu(p);
    }
    (m as f64).sqrt() * out
}

/// Accumulates `coef * grad_theta f(x; theta)` into `grad`, reusing the
/// pre-activations cached by [`forward_into`] for the same `x`.
pub(crate) fn backward_accumulate(
    params: &NetworkParams,
    x: &[f64],
    ws: &mut Workspace,
    coef: f64,
    grad: &mut [f64],
) {
    let m = params.width;
    let d = params.input_dim;
    let depth = params.depth;
    let sqrt_m = (m as f64).sqrt();

    // Output layer: d f / d W_L[i] = sqrt(m) * relu(pre_last[i]).
    {
        let base = m * d + (depth - 2) * m * m;
        let last = &ws.pre[depth - 2];
        let gw = &mut grad[base..base + m];
        for i in 0..m {
            gw[i] += coef * sqrt_m * relu(last[i]);
        }
        let out_w = params.output();
        for i in 0..m {
            ws.delta[i] = if last[i] > 0.0 {
                coef * sqrt_m * out_w[i]
            } else {
                0.0
            };
        }
    }

    // Middle layers, walking backwards.
    for l in (2..depth).rev() {
        let base = m * d + (l - 2) * m * m;
        let wl = params.middle(l);
        let prev = &ws.pre[l - 2];
        ws.delta_next[..m].fill(0.0);
        for i in 0..m {
            let di = ws.delta[i];
            if di == 0.0 {
                continue;
            }
            let row = &wl[i * m..(i + 1) * m];
            let grow = &mut grad[base + i * m..base + (i + 1) * m];
            for j in 0..m {
                let act = relu(prev[j]);
                grow[j] += di * act;
                ws.delta_next[j] += di * row[j];
            }
        }
        for j in 0..m {
            ws.delta[j] = if prev[j] > 0.0 { ws.delta_next[j] } else { 0.0 };
        }
    }

    // Input layer: d f / d W_1[i][j] = delta[i] * x[j].
    for i in 0..m {
        let di = ws.delta[i];
        if di == 0.0 {
            continue;
        }
        let grow = &mut grad[i * d..(i + 1) * d];
        for (g, &xv) in grow.iter_mut().zip(x.iter()) {
            *g += di * xv;
        }
    }
}

/// Scores a document: `f(x; theta) = sqrt(m) W_L relu(... relu(W_1 x))`.
pub fn forward(params: &NetworkParams, x: &FeatureVector) -> Result<f64> {
    if x.dim() != params.input_dim {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim,
            got: x.dim(),
        });
    }
    let mut ws = Workspace::new(params.width, params.depth);
    Ok(forward_into(params, &x.values, &mut ws))
}

/// Exact backpropagated tangent feature `g(x; theta) = grad_theta f(x; theta)`.
pub fn gradient(params: &NetworkParams, x: &FeatureVector) -> Result<TangentVector> {
    Ok(score_and_gradient(params, x)?.1)
}

/// Computes the score and tangent feature in one pass.
pub fn score_and_gradient(params: &NetworkParams, x: &FeatureVector) -> Result<(f64, TangentVector)> {
    if x.dim() != params.input_dim {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim,
            got: x.dim(),
        });
    }
    let mut ws = Workspace::new(params.width, params.depth);
    let score = forward_into(params, &x.values, &mut ws);
    let mut grad = vec![0.0; params.total_params()];
    backward_accumulate(params, &x.values, &mut ws, 1.0, &mut grad);
    Ok((score, TangentVector(grad)))
}
