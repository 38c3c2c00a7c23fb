//! Policy and value networks conditioned on the instance encoding.
//!
//! Both networks read the same input: the partial schedule
//! `(x_1, .., x_k, 0, .., 0)` followed by the flattened clause matrix.
//! The policy network emits `M * (2l/delta + 1)` logits, one block per
//! level; at level `k` only block `k` is used and it is normalised with a
//! softmax. The value network ends in `tanh`, so `v` lies in `[-1, 1]`.
//!
//! The training loss for a batch `B` is
//!
//! ```text
//! L = 1/|B| sum_b [ (z_b - v_b)^2 - pi_b . log p_b ] + lambda |theta|^2
//! ```
//!
//! with `theta` all weights and biases of both networks.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::nn::{Activation, Dense, Mlp, MlpGrad};
use crate::rng::rng_from_seed;
use crate::schedule::ScheduleGrid;
use crate::{Error, Result};

/// A partial schedule plus the instance it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct QzState {
    /// Grid indices chosen so far (`level` of them).
    pub prefix: Vec<usize>,
    pub h_info: Arc<Vec<f64>>,
}

impl QzState {
    pub fn root(h_info: Arc<Vec<f64>>) -> Self {
        QzState {
            prefix: Vec::new(),
            h_info,
        }
    }

    pub fn level(&self) -> usize {
        self.prefix.len()
    }

    pub fn child(&self, action: usize) -> Self {
        let mut prefix = self.prefix.clone();
        prefix.push(action);
        QzState {
            prefix,
            h_info: Arc::clone(&self.h_info),
        }
    }

    /// Network input: coefficient values padded with zeros to length `M`,
    /// then the clause matrix.
    pub fn input(&self, grid: &ScheduleGrid) -> Result<Vec<f64>> {
        let m = grid.components();
        if self.prefix.len() > m {
            return Err(Error::Shape(format!(
                "prefix of length {} on a {m}-component grid",
                self.prefix.len()
            )));
        }
        let mut v = Vec::with_capacity(m + self.h_info.len());
        for &i in &self.prefix {
            v.push(grid.value(i)?);
        }
        v.resize(m, 0.0);
        v.extend_from_slice(&self.h_info);
        Ok(v)
    }
}

/// Layer widths after the input. The defaults are `{256, 128, P_out}` for
/// the policy and `{256, 128, 64, 1}` for the value network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    /// Width of the policy output; `None` means `M * (2l/delta + 1)`.
    #[serde(default)]
    pub policy_outputs: Option<usize>,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            policy_hidden: vec![256, 128],
            value_hidden: vec![256, 128, 64],
            policy_outputs: None,
        }
    }
}

/// One supervised example: state, target distribution over the level's
/// actions, and target value.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub state: QzState,
    /// Length `2l/delta + 1`, sums to one.
    pub policy: Vec<f64>,
    pub value: f64,
}

/// Loss split into its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    /// Mean `(z - v)^2`.
    pub value: f64,
    /// Mean `-pi . log p`.
    pub policy: f64,
    /// `lambda |theta|^2`.
    pub regularization: f64,
}

impl Loss {
    pub fn total(&self) -> f64 {
        self.value + self.policy + self.regularization
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNet {
    pub policy: Mlp,
    pub value: Mlp,
    pub grid: ScheduleGrid,
    /// Length of the flattened clause matrix this network was built for.
    pub info_len: usize,
    /// Regularisation strength `lambda`.
    pub lambda: f64,
}

/// Gradients of both networks.
#[derive(Debug, Clone)]
pub struct NetGrad {
    pub policy: MlpGrad,
    pub value: MlpGrad,
}

impl NetGrad {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.policy.flat();
        v.extend(self.value.flat());
        v
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl PolicyValueNet {
    pub fn new(
        grid: ScheduleGrid,
        info_len: usize,
        shape: &NetworkShape,
        lambda: f64,
        seed: u64,
    ) -> Self {
        Self::build(grid, info_len, shape, lambda, seed, false)
    }

    /// Like [`PolicyValueNet::new`] but with zeroed output layers, so every
    /// state gets uniform priors and `v = 0`.
    pub fn new_zero_output(
        grid: ScheduleGrid,
        info_len: usize,
        shape: &NetworkShape,
        lambda: f64,
        seed: u64,
    ) -> Self {
        Self::build(grid, info_len, shape, lambda, seed, true)
    }

    fn build(
        grid: ScheduleGrid,
        info_len: usize,
        shape: &NetworkShape,
        lambda: f64,
        seed: u64,
        zero_last: bool,
    ) -> Self {
        let mut rng = rng_from_seed(seed);
        let input = grid.components() + info_len;
        let p_out = shape
            .policy_outputs
            .unwrap_or(grid.components() * grid.choices());
        let mut policy_sizes = shape.policy_hidden.clone();
        policy_sizes.push(p_out);
        let mut value_sizes = shape.value_hidden.clone();
        value_sizes.push(1);
        PolicyValueNet {
            policy: Mlp::new(
                input,
                &policy_sizes,
                Activation::Relu,
                Activation::Identity,
                zero_last,
                &mut rng,
            ),
            value: Mlp::new(
                input,
                &value_sizes,
                Activation::Relu,
                Activation::Tanh,
                zero_last,
                &mut rng,
            ),
            grid,
            info_len,
            lambda,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.grid.components() + self.info_len
    }

    fn check(&self, state: &QzState) -> Result<()> {
        let expect = self.grid.components() * self.grid.choices();
        if self.policy.output_dim() != expect {
            return Err(Error::Shape(format!(
                "policy head has {} outputs, grid needs {expect}",
                self.policy.output_dim()
            )));
        }
        if state.h_info.len() != self.info_len {
            return Err(Error::Shape(format!(
                "instance encoding has length {}, network expects {}",
                state.h_info.len(),
                self.info_len
            )));
        }
        if state.level() >= self.grid.components() {
            return Err(Error::Shape("no action left at a complete schedule".into()));
        }
        Ok(())
    }

    fn block(&self, level: usize) -> std::ops::Range<usize> {
        let p = self.grid.choices();
        level * p..(level + 1) * p
    }

    /// Priors over the current level's actions and the value estimate.
    pub fn evaluate(&self, state: &QzState) -> Result<(Vec<f64>, f64)> {
        self.check(state)?;
        let input = state.input(&self.grid)?;
        let logits = self.policy.forward(&input);
        let priors = softmax(&logits[self.block(state.level())]);
        let v = self.value.forward(&input)[0];
        Ok((priors, v))
    }

    /// Full-width policy vector with zeros outside the current level's block.
    pub fn masked_policy(&self, state: &QzState) -> Result<Vec<f64>> {
        let (priors, _) = self.evaluate(state)?;
        let mut full = vec![0.0; self.policy.output_dim()];
        full[self.block(state.level())].copy_from_slice(&priors);
        Ok(full)
    }

    pub fn squared_norm(&self) -> f64 {
        self.policy.squared_norm() + self.value.squared_norm()
    }

    pub fn param_count(&self) -> usize {
        self.policy.param_count() + self.value.param_count()
    }

    /// Policy then value parameters, matching [`NetGrad::flat`].
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.policy.params_mut().chain(self.value.params_mut())
    }

    /// Loss and the gradient of its data terms (the regulariser's gradient
    /// is added when the update is applied).
    fn loss_and_grad(&self, batch: &[TrainingSample], want_grad: bool) -> Result<(Loss, NetGrad)> {
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        let mut grad = NetGrad {
            policy: MlpGrad::zeros_like(&self.policy),
            value: MlpGrad::zeros_like(&self.value),
        };
        let scale = 1.0 / batch.len() as f64;
        let (mut value_sum, mut policy_sum) = (0.0, 0.0);
        for sample in batch {
            self.check(&sample.state)?;
            if sample.policy.len() != self.grid.choices() {
                return Err(Error::Shape(format!(
                    "policy target has {} entries, level has {} actions",
                    sample.policy.len(),
                    self.grid.choices()
                )));
            }
            let input = sample.state.input(&self.grid)?;
            let block = self.block(sample.state.level());

            let ptape = self.policy.forward_tape(&input);
            let probs = softmax(&ptape.output()[block.clone()]);
            let mut ce = 0.0;
            for (&pi, &p) in sample.policy.iter().zip(&probs) {
                if pi > 0.0 {
                    ce -= pi * p.ln();
                }
            }
            policy_sum += ce;

            let vtape = self.value.forward_tape(&input);
            let v = vtape.output()[0];
            value_sum += (sample.value - v).powi(2);

            if want_grad {
                let pi_mass: f64 = sample.policy.iter().sum();
                let mut d_logits = vec![0.0; self.policy.output_dim()];
                for ((d, &p), &pi) in d_logits[block].iter_mut().zip(&probs).zip(&sample.policy) {
                    *d = p * pi_mass - pi;
                }
                self.policy.backward(&ptape, &d_logits, scale, &mut grad.policy);
                let d_v = -2.0 * (sample.value - v);
                self.value.backward(&vtape, &[d_v], scale, &mut grad.value);
            }
        }
        let loss = Loss {
            value: value_sum * scale,
            policy: policy_sum * scale,
            regularization: self.lambda * self.squared_norm(),
        };
        Ok((loss, grad))
    }

    pub fn loss(&self, batch: &[TrainingSample]) -> Result<Loss> {
        Ok(self.loss_and_grad(batch, false)?.0)
    }

    /// Analytic gradient of the full loss, regulariser included.
    pub fn gradient(&self, batch: &[TrainingSample]) -> Result<NetGrad> {
        let (_, mut grad) = self.loss_and_grad(batch, true)?;
        let two_lambda = 2.0 * self.lambda;
        for (net, g) in [(&self.policy, &mut grad.policy), (&self.value, &mut grad.value)] {
            for (li, layer) in net.layers.iter().enumerate() {
                for (gw, w) in g.weights[li].iter_mut().zip(&layer.weights) {
                    *gw += two_lambda * w;
                }
                for (gb, b) in g.bias[li].iter_mut().zip(&layer.bias) {
                    *gb += two_lambda * b;
                }
            }
        }
        Ok(grad)
    }

    /// One gradient-descent step on the mean batch loss. Returns the loss
    /// at the parameters before the step; on a non-finite loss the
    /// parameters are left untouched.
    pub fn train_step(&mut self, batch: &[TrainingSample], lr: f64) -> Result<Loss> {
        let (loss, grad) = self.loss_and_grad(batch, true)?;
        if !loss.total().is_finite() {
            return Err(Error::NonFiniteLoss {
                loss: loss.total(),
                value_term: loss.value,
                policy_term: loss.policy,
            });
        }
        self.policy.apply_gradient(&grad.policy, lr, self.lambda);
        self.value.apply_gradient(&grad.value, lr, self.lambda);
        Ok(loss)
    }

    /// Binary checkpoint, all integers and floats little-endian:
    ///
    /// ```text
    /// b"QZNN" | version: u32 = 1
    /// components: u32 | bound: f64 | step: f64 | info_len: u32 | lambda: f64
    /// then for the policy network and the value network:
    ///   layer_count: u32
    ///   per layer: inputs: u32 | outputs: u32 | activation: u8
    ///              weights: outputs*inputs f64 (output-major) | bias: outputs f64
    /// ```
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"QZNN")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.grid.components() as u32).to_le_bytes())?;
        w.write_all(&self.grid.bound().to_le_bytes())?;
        w.write_all(&self.grid.step().to_le_bytes())?;
        w.write_all(&(self.info_len as u32).to_le_bytes())?;
        w.write_all(&self.lambda.to_le_bytes())?;
        for net in [&self.policy, &self.value] {
            w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
            for l in &net.layers {
                w.write_all(&(l.inputs as u32).to_le_bytes())?;
                w.write_all(&(l.outputs as u32).to_le_bytes())?;
                w.write_all(&[l.activation.code()])?;
                for x in l.weights.iter().chain(&l.bias) {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"QZNN" {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != 1 {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let components = read_u32(&mut r)? as usize;
        let bound = read_f64(&mut r)?;
        let step = read_f64(&mut r)?;
        let grid = ScheduleGrid::new(components, bound, step)?;
        let info_len = read_u32(&mut r)? as usize;
        let lambda = read_f64(&mut r)?;
        let mut nets = Vec::with_capacity(2);
        for _ in 0..2 {
            let count = read_u32(&mut r)? as usize;
            let mut layers = Vec::with_capacity(count);
            for _ in 0..count {
                let inputs = read_u32(&mut r)? as usize;
                let outputs = read_u32(&mut r)? as usize;
                let mut code = [0u8; 1];
                r.read_exact(&mut code)?;
                let activation = Activation::from_code(code[0])
                    .ok_or_else(|| Error::Checkpoint(format!("unknown activation {}", code[0])))?;
                let mut layer = Dense::zeros(inputs, outputs, activation);
                for x in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                    *x = read_f64(&mut r)?;
                }
                layers.push(layer);
            }
            if layers.is_empty() || layers[0].inputs != components + info_len {
                return Err(Error::Checkpoint("input width does not match header".into()));
            }
            nets.push(Mlp { layers });
        }
        let value = nets.pop().expect("two networks");
        let policy = nets.pop().expect("two networks");
        Ok(PolicyValueNet {
            policy,
            value,
            grid,
            info_len,
            lambda,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
