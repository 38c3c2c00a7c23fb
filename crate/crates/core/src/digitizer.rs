//! Digitised annealing and QAOA parameter export.
//!
//! The continuous schedule is cut into `K` equal slices. Slice `j` holds
//! `s_j = s(t_mid)` and duration `dt_j = T / K`, and becomes the layer
//! `exp(-i beta_j H_init) exp(-i gamma_j H_final)` with
//! `gamma_j = s_j dt_j` and `beta_j = (1 - s_j) dt_j`. The layers are
//! applied in time order, which is exactly a depth-`K` QAOA circuit.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Splitter, StateVector};
use crate::sat::DiagonalHamiltonian;
use crate::schedule::{Protocol, Schedule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub s: f64,
    pub dt: f64,
    pub gamma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitizedSchedule {
    pub slices: Vec<Slice>,
    pub total_time: f64,
    /// SHA-256 of the source schedule, hex encoded.
    pub source_hash: String,
}

impl DigitizedSchedule {
    pub fn depth(&self) -> usize {
        self.slices.len()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.gamma).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.beta).collect()
    }
}

/// Stable fingerprint of a schedule's exact parameters.
pub fn schedule_hash(schedule: &Schedule) -> String {
    let mut h = Sha256::new();
    h.update(schedule.total_time().to_bits().to_le_bytes());
    h.update([u8::from(schedule.clamped())]);
    for x in &schedule.params().x {
        h.update(x.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn digitize(schedule: &Schedule, slices: usize) -> Result<DigitizedSchedule> {
    let mut dig = digitize_protocol(schedule, slices)?;
    dig.source_hash = schedule_hash(schedule);
    Ok(dig)
}

/// Midpoint digitisation of any protocol (no source hash).
pub fn digitize_protocol(protocol: &dyn Protocol, slices: usize) -> Result<DigitizedSchedule> {
    if slices == 0 {
        return Err(Error::InvalidConfig("need at least one slice".into()));
    }
    let total = protocol.total_time();
    let dt = total / slices as f64;
    let slices = (0..slices)
        .map(|j| {
            let s = protocol.s_at((j as f64 + 0.5) * dt);
            Slice {
                s,
                dt,
                gamma: s * dt,
                beta: (1.0 - s) * dt,
            }
        })
        .collect();
    Ok(DigitizedSchedule {
        slices,
        total_time: total,
        source_hash: String::new(),
    })
}

/// Apply the layers `exp(-i beta_j H_init) exp(-i gamma_j H_final)` for
/// `j = 1..K` to `psi0`.
pub fn apply_digitized(
    dig: &DigitizedSchedule,
    h_final: &DiagonalHamiltonian,
    psi0: &StateVector,
) -> Result<StateVector> {
    apply_layers(&dig.gammas(), &dig.betas(), h_final, psi0)
}

pub fn apply_layers(
    gammas: &[f64],
    betas: &[f64],
    h_final: &DiagonalHamiltonian,
    psi0: &StateVector,
) -> Result<StateVector> {
    if gammas.len() != betas.len() {
        return Err(Error::Shape(format!(
            "{} gammas but {} betas",
            gammas.len(),
            betas.len()
        )));
    }
    if psi0.num_qubits() != h_final.num_qubits() {
        return Err(Error::Shape("state and Hamiltonian sizes differ".into()));
    }
    let split = Splitter::new(h_final);
    let mut amps = psi0.amplitudes().to_vec();
    for (&g, &b) in gammas.iter().zip(betas) {
        split.final_phase(&mut amps, g);
        split.driver_phase(&mut amps, b);
    }
    StateVector::from_amplitudes(psi0.num_qubits(), amps)
}

/// QAOA parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    #[serde(rename = "P")]
    pub depth: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub source_hash: String,
}

pub fn export_qaoa(dig: &DigitizedSchedule) -> QaoaParams {
    QaoaParams {
        depth: dig.depth(),
        gamma: dig.gammas(),
        beta: dig.betas(),
        total_time: dig.total_time,
        source_hash: dig.source_hash.clone(),
    }
}

impl QaoaParams {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: QaoaParams = serde_json::from_str(text)?;
        if p.gamma.len() != p.depth || p.beta.len() != p.depth {
            return Err(Error::Shape(format!(
                "P={} but {} gammas and {} betas",
                p.depth,
                p.gamma.len(),
                p.beta.len()
            )));
        }
        Ok(p)
    }
}
