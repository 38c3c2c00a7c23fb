//! Supervised samples from instances whose schedule is already known.
//!
//! A solved instance with coefficients `x*` yields `M` samples: the prefix
//! state at level `j - 1` paired with a one-hot label of length
//! `M * P` (`P = 2l/delta + 1`) whose single `1` sits at
//! `k = (x*_j + l)/delta + P (j - 1)`, and value label `1`.

use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{PolicyValueNet, QzState, TrainingSample};
use crate::rng::rng_from_seed;
use crate::sat::{build_h_info, SatInstance};
use crate::schedule::{ScheduleGrid, ScheduleParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainSample {
    pub state: QzState,
    /// Position of the `1` in the full-width label.
    pub index: usize,
    /// Full-width one-hot label.
    pub label: Vec<f64>,
    pub value: f64,
}

impl PretrainSample {
    /// The label restricted to the state's level, as used by the loss.
    pub fn to_training(&self, grid: &ScheduleGrid) -> TrainingSample {
        let p = grid.choices();
        let level = self.state.level();
        TrainingSample {
            state: self.state.clone(),
            policy: self.label[level * p..(level + 1) * p].to_vec(),
            value: self.value,
        }
    }
}

/// Line format of [`write_jsonl`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub instance: usize,
    pub level: usize,
    /// Prefix padded with zeros to length `M`.
    pub prefix: Vec<f64>,
    pub index: usize,
    pub value: f64,
}

pub fn build_pretrain_dataset(
    solved: &[(&SatInstance, ScheduleParams)],
    grid: &ScheduleGrid,
) -> Result<Vec<PretrainSample>> {
    let m = grid.components();
    let p = grid.choices();
    let mut out = Vec::with_capacity(solved.len() * m);
    for (inst, x) in solved {
        if x.len() != m {
            return Err(Error::Shape(format!(
                "schedule has {} coefficients, grid has {m}",
                x.len()
            )));
        }
        let indices = grid.indices_of(x)?;
        let h_info = Arc::new(build_h_info(inst).to_vec());
        for (j, &idx) in indices.iter().enumerate() {
            let k = idx + p * j;
            let mut label = vec![0.0; m * p];
            label[k] = 1.0;
            out.push(PretrainSample {
                state: QzState {
                    prefix: indices[..j].to_vec(),
                    h_info: Arc::clone(&h_info),
                },
                index: k,
                label,
                value: 1.0,
            });
        }
    }
    Ok(out)
}

/// One JSON object per sample; `instance` numbers samples in groups of `M`.
pub fn write_jsonl<W: Write>(samples: &[PretrainSample], grid: &ScheduleGrid, mut w: W) -> Result<()> {
    let m = grid.components().max(1);
    for (i, s) in samples.iter().enumerate() {
        let mut prefix = s
            .state
            .prefix
            .iter()
            .map(|&k| grid.value(k))
            .collect::<Result<Vec<_>>>()?;
        prefix.resize(m, 0.0);
        let rec = PretrainRecord {
            instance: i / m,
            level: s.state.level(),
            prefix,
            index: s.index,
            value: s.value,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Minibatch gradient descent over `samples` for `epochs` passes, shuffled
/// each pass. Returns the mean batch loss of every epoch.
pub fn pretrain(
    net: &mut PolicyValueNet,
    samples: &[TrainingSample],
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<TrainingSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            total += net.train_step(&batch, lr)?.total();
            batches += 1;
        }
        history.push(if batches == 0 { 0.0 } else { total / batches as f64 });
    }
    Ok(history)
}
