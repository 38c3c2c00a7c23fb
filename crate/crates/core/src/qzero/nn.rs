//! Dense feed-forward networks with hand-written backpropagation.

use rand::Rng as _;

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// One fully connected layer. Weights are stored output-major:
/// `weights[o * inputs + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero bias.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Self {
        let bound = (inputs as f64).sqrt().recip();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect(),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    fn forward_into(&self, x: &[f64], pre: &mut Vec<f64>, out: &mut Vec<f64>) {
        pre.clear();
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let z = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            pre.push(z);
            out.push(self.activation.apply(z));
        }
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer values recorded during a forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl MlpGrad {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrad {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            v.extend_from_slice(w);
            v.extend_from_slice(b);
        }
        v
    }
}

impl Mlp {
    /// `sizes` lists every layer width after the input. Hidden layers use
    /// `hidden`, the last layer `output`.
    pub fn new(
        input: usize,
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        zero_last: bool,
        rng: &mut Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(sizes.len());
        let mut fan_in = input;
        for (i, &width) in sizes.iter().enumerate() {
            let last = i + 1 == sizes.len();
            let act = if last { output } else { hidden };
            layers.push(if last && zero_last {
                Dense::zeros(fan_in, width, act)
            } else {
                Dense::init(fan_in, width, act, rng)
            });
            fan_in = width;
        }
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty network").outputs
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_tape(x).outputs.pop().unwrap_or_default()
    }

    pub fn forward_tape(&self, x: &[f64]) -> Tape {
        let mut tape = Tape::default();
        let mut input = x.to_vec();
        for layer in &self.layers {
            let mut pre = Vec::with_capacity(layer.outputs);
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(&input, &mut pre, &mut out);
            tape.inputs.push(std::mem::replace(&mut input, out.clone()));
            tape.pre.push(pre);
            tape.outputs.push(out);
        }
        tape
    }

    /// Accumulate `scale * d(loss)/d(theta)` into `grad`, given
    /// `d_out = d(loss)/d(output)`.
    pub fn backward(&self, tape: &Tape, d_out: &[f64], scale: f64, grad: &mut MlpGrad) {
        let mut delta: Vec<f64> = d_out.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            // through the activation
            for ((d, &x), &y) in delta.iter_mut().zip(&tape.pre[li]).zip(&tape.outputs[li]) {
                *d *= layer.activation.derivative(x, y);
            }
            let input = &tape.inputs[li];
            let gw = &mut grad.weights[li];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad.bias[li][o] += scale * d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, &v) in row.iter_mut().zip(input) {
                    *g += scale * d * v;
                }
            }
            if li == 0 {
                break;
            }
            let mut next = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, &w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            delta = next;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weights.iter().map(|w| w * w).sum::<f64>() + l.bias.iter().map(|b| b * b).sum::<f64>()
            })
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in the same order as [`MlpGrad::flat`].
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// `theta -= lr * (grad + 2 lambda theta)`.
    pub fn apply_gradient(&mut self, grad: &MlpGrad, lr: f64, lambda: f64) {
        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grad.weights[li]) {
                *w -= lr * (g + 2.0 * lambda * *w);
            }
            for (b, g) in layer.bias.iter_mut().zip(&grad.bias[li]) {
                *b -= lr * (g + 2.0 * lambda * *b);
            }
        }
    }
}
