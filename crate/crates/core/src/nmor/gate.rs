use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::store::{gate_layer_shapes, GateCheckpoint};

/// Pointwise (1×1) layer: `out × in` weights and `out` biases shared across
/// all positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub out_channels: usize,
    pub in_channels: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Layer {
            out_channels,
            in_channels,
            weights: vec![0.0; out_channels * in_channels],
            bias: vec![0.0; out_channels],
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_channels..(o + 1) * self.in_channels];
            *y = self.bias[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Soft-gate network over the three item channels (v, c, r): channel plan
/// `3 → H → H → 3`, ReLU after the two hidden layers, softmax over the
/// final three logits at each position.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub hidden: usize,
    pub layers: [Layer; 3],
}

/// Per-position weights for the v, c and r channels.
#[derive(Debug, Clone, PartialEq)]
pub struct GateWeights {
    pub v: Vec<f64>,
    pub c: Vec<f64>,
    pub r: Vec<f64>,
}

impl GateWeights {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn means(&self) -> [f64; 3] {
        let n = self.dim().max(1) as f64;
        [
            self.v.iter().sum::<f64>() / n,
            self.c.iter().sum::<f64>() / n,
            self.r.iter().sum::<f64>() / n,
        ]
    }

    /// Same weight triple at every one of `dim` positions.
    pub fn constant(dim: usize, v: f64, c: f64, r: f64) -> Self {
        GateWeights {
            v: vec![v; dim],
            c: vec![c; dim],
            r: vec![r; dim],
        }
    }
}

/// Forward values at one position, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct PositionTrace {
    pub input: [f64; 3],
    pub pre1: Vec<f64>,
    pub act1: Vec<f64>,
    pub pre2: Vec<f64>,
    pub act2: Vec<f64>,
    pub weights: [f64; 3],
}

fn relu_inplace(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

pub(crate) fn softmax3(logits: [f64; 3]) -> [f64; 3] {
    let m = logits[0].max(logits[1]).max(logits[2]);
    let e = logits.map(|l| (l - m).exp());
    let s = e[0] + e[1] + e[2];
    e.map(|x| x / s)
}

impl GateParams {
    /// Hidden layers uniform in `±sqrt(6 / fan_in)`, final layer zero so a
    /// fresh gate outputs exactly 1/3 per channel.
    pub fn init(hidden: usize, rng: &mut Rng) -> Self {
        let mut dense = |out: usize, inp: usize| {
            let bound = (6.0 / inp as f64).sqrt();
            Layer {
                out_channels: out,
                in_channels: inp,
                weights: (0..out * inp).map(|_| rng.random_range(-bound..bound)).collect(),
                bias: vec![0.0; out],
            }
        };
        let l1 = dense(hidden, 3);
        let l2 = dense(hidden, hidden);
        GateParams {
            hidden,
            layers: [l1, l2, Layer::zeros(3, hidden)],
        }
    }

    /// All-zero parameters of the right shape (used as gradient buffers).
    pub fn zeros_like(&self) -> Self {
        let [a, b, c] = &self.layers;
        GateParams {
            hidden: self.hidden,
            layers: [
                Layer::zeros(a.out_channels, a.in_channels),
                Layer::zeros(b.out_channels, b.in_channels),
                Layer::zeros(c.out_channels, c.in_channels),
            ],
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    /// Flat views in layer order: weights then bias of each layer.
    pub fn flat_mut(&mut self) -> Vec<&mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub(crate) fn trace_position(&self, input: [f64; 3]) -> PositionTrace {
        let h = self.hidden;
        let mut pre1 = vec![0.0; h];
        self.layers[0].apply(&input, &mut pre1);
        let mut act1 = pre1.clone();
        relu_inplace(&mut act1);
        let mut pre2 = vec![0.0; h];
        self.layers[1].apply(&act1, &mut pre2);
        let mut act2 = pre2.clone();
        relu_inplace(&mut act2);
        let mut logits = [0.0; 3];
        self.layers[2].apply(&act2, &mut logits);
        PositionTrace {
            input,
            pre1,
            act1,
            pre2,
            act2,
            weights: softmax3(logits),
        }
    }

    /// Gate weights at one position.
    pub fn position_weights(&self, v: f64, c: f64, r: f64) -> [f64; 3] {
        self.trace_position([v, c, r]).weights
    }

    /// Backpropagates `d loss / d weights` at one position into `grads`.
    pub(crate) fn backward_position(&self, trace: &PositionTrace, d_weights: [f64; 3], grads: &mut GateParams) {
        let h = self.hidden;
        let w = trace.weights;
        let dot = w[0] * d_weights[0] + w[1] * d_weights[1] + w[2] * d_weights[2];
        let d_logits = [0, 1, 2].map(|s| w[s] * (d_weights[s] - dot));

        let [g1, g2, g3] = &mut grads.layers;
        let [_, l2, l3] = &self.layers;
        let mut d_act2 = vec![0.0; h];
        for (s, &dl) in d_logits.iter().enumerate() {
            g3.bias[s] += dl;
            let row = &l3.weights[s * h..(s + 1) * h];
            let grow = &mut g3.weights[s * h..(s + 1) * h];
            for k in 0..h {
                grow[k] += dl * trace.act2[k];
                d_act2[k] += dl * row[k];
            }
        }
        let d_pre2: Vec<f64> = d_act2
            .iter()
            .zip(&trace.pre2)
            .map(|(d, &p)| if p > 0.0 { *d } else { 0.0 })
            .collect();
        let mut d_act1 = vec![0.0; h];
        for (o, &dp) in d_pre2.iter().enumerate() {
            if dp == 0.0 {
                continue;
            }
            g2.bias[o] += dp;
            let row = &l2.weights[o * h..(o + 1) * h];
            let grow = &mut g2.weights[o * h..(o + 1) * h];
            for k in 0..h {
                grow[k] += dp * trace.act1[k];
                d_act1[k] += dp * row[k];
            }
        }
        for (o, (&da, &p)) in d_act1.iter().zip(&trace.pre1).enumerate() {
            if p <= 0.0 {
                continue;
            }
            g1.bias[o] += da;
            for k in 0..3 {
                g1.weights[o * 3 + k] += da * trace.input[k];
            }
        }
    }

    pub fn to_checkpoint(&self, dim: usize) -> GateCheckpoint {
        let f32s = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
        GateCheckpoint {
            dim,
            hidden: self.hidden,
            layers: self.layers.iter().map(|l| (f32s(&l.weights), f32s(&l.bias))).collect(),
        }
    }

    pub fn from_checkpoint(ck: &GateCheckpoint) -> Result<Self> {
        let shapes = gate_layer_shapes(ck.hidden);
        if ck.layers.len() != 3 {
            return Err(Error::InvalidArgument("gate checkpoint needs three layers".into()));
        }
        let mut layers = Vec::with_capacity(3);
        for ((w, b), (o, i)) in ck.layers.iter().zip(shapes) {
            if w.len() != o * i || b.len() != o {
                return Err(Error::InvalidArgument("gate layer shape mismatch".into()));
            }
            layers.push(Layer {
                out_channels: o,
                in_channels: i,
                weights: w.iter().map(|&x| x as f64).collect(),
                bias: b.iter().map(|&x| x as f64).collect(),
            });
        }
        let layers: [Layer; 3] = layers.try_into().expect("three layers");
        Ok(GateParams {
            hidden: ck.hidden,
            layers,
        })
    }
}
