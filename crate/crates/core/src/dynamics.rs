//! State-vector evolution under `H(s) = (1 - s) H_init + s H_final`.
//!
//! `H_init = 1/2 sum_i (1 - X_i)` is diagonal in the Hadamard basis, with
//! eigenvalue equal to the Hamming weight of the x-basis label. `H_final` is
//! diagonal in the computational basis. Each step of length `h` applies the
//! symmetric (Strang) product
//!
//! ```text
//! exp(-i b/2 H_final) · W exp(-i a D_x) W · exp(-i b/2 H_final)
//! ```
//!
//! with `a = (1 - s_mid) h`, `b = s_mid h`, `W` the normalised
//! Walsh-Hadamard transform and `s_mid` the schedule at the step midpoint.
//! Adjacent `H_final` half-phases are fused, so a step costs two transforms
//! and two diagonal multiplies.

use std::fmt::Write as _;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::sat::DiagonalHamiltonian;
use crate::schedule::Protocol;
use crate::{Error, Result};

/// Largest register simulated by default.
pub const MAX_QUBITS: usize = 14;
/// Largest register accepted by the dense spectral routines.
pub const MAX_SPECTRAL_QUBITS: usize = 12;
pub const DEFAULT_DT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Uniform superposition, the ground state of `H_init`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::uniform_with_limit(n, MAX_QUBITS)
    }

    pub fn uniform_with_limit(n: usize, max_qubits: usize) -> Result<Self> {
        if n == 0 || n > max_qubits {
            return Err(Error::SizeExceeded {
                what: "qubit count",
                got: n,
                max: max_qubits,
            });
        }
        let dim = 1usize << n;
        let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(StateVector {
            n,
            amps: vec![a; dim],
        })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let mut psi = Self::uniform(n)?;
        if index >= psi.amps.len() {
            return Err(Error::IndexOutOfRange {
                index,
                max: psi.amps.len() - 1,
            });
        }
        psi.amps.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        psi.amps[index] = Complex64::new(1.0, 0.0);
        Ok(psi)
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(Error::Shape(format!(
                "{} amplitudes for {n} qubits",
                amps.len()
            )));
        }
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    /// Binary dump: `b"QSV1"`, `n` as little-endian `u32`, then `2^n` pairs
    /// of little-endian `f64` (real, imaginary).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"QSV1")?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"QSV1" {
            return Err(Error::Shape("not a state-vector dump".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        if n == 0 || n > 30 {
            return Err(Error::Shape(format!("implausible qubit count {n}")));
        }
        let mut amps = Vec::with_capacity(1 << n);
        let mut buf = [0u8; 8];
        for _ in 0..1usize << n {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            amps.push(Complex64::new(re, im));
        }
        Ok(StateVector { n, amps })
    }
}

pub fn initial_state(n: usize) -> Result<StateVector> {
    StateVector::uniform(n)
}

/// In-place normalised Walsh-Hadamard transform (self-inverse).
pub(crate) fn walsh_hadamard(amps: &mut [Complex64]) {
    walsh_hadamard_unnormalised(amps);
    let scale = (amps.len() as f64).sqrt().recip();
    amps.iter_mut().for_each(|a| *a *= scale);
}

fn walsh_hadamard_unnormalised(amps: &mut [Complex64]) {
    let dim = amps.len();
    let mut half = 1;
    while half < dim {
        for chunk in amps.chunks_exact_mut(2 * half) {
            let (lo, hi) = chunk.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let t = *a;
                *a = t + *b;
                *b = t - *b;
            }
        }
        half *= 2;
    }
}

/// `<psi| H_init |psi>`.
pub fn driver_energy(psi: &StateVector) -> f64 {
    let mut tmp = psi.amps.clone();
    walsh_hadamard(&mut tmp);
    tmp.iter()
        .enumerate()
        .map(|(k, a)| f64::from(k.count_ones()) * a.norm_sqr())
        .sum()
}

/// `<psi| H_final |psi>`.
pub fn final_energy(psi: &StateVector, h_final: &DiagonalHamiltonian) -> f64 {
    psi.amps
        .iter()
        .zip(h_final.violations())
        .map(|(a, &v)| f64::from(v) * a.norm_sqr())
        .sum()
}

/// Total probability on the given basis states.
pub fn success_probability(psi: &StateVector, solutions: &[usize]) -> f64 {
    solutions.iter().map(|&z| psi.amps[z].norm_sqr()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Record every `stride` steps (plus both endpoints); `0` disables the
    /// trace entirely.
    pub stride: usize,
    /// Also diagonalise `H(s)` at each recorded point.
    pub spectral: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            stride: 0,
            spectral: false,
        }
    }
}

pub struct AnnealSpec<'a> {
    pub h_final: &'a DiagonalHamiltonian,
    pub protocol: &'a dyn Protocol,
    pub dt: f64,
    pub trace: TraceOptions,
}

impl<'a> AnnealSpec<'a> {
    pub fn new(h_final: &'a DiagonalHamiltonian, protocol: &'a dyn Protocol) -> Self {
        AnnealSpec {
            h_final,
            protocol,
            dt: DEFAULT_DT,
            trace: TraceOptions::default(),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_trace(mut self, trace: TraceOptions) -> Self {
        self.trace = trace;
        self
    }

    /// `ceil(T / dt)`.
    pub fn steps(&self) -> usize {
        let total = self.protocol.total_time();
        ((total / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    fn validate(&self) -> Result<()> {
        let total = self.protocol.total_time();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidAnneal(format!("T must be positive, got {total}")));
        }
        if !(self.dt > 0.0 && self.dt <= total) {
            return Err(Error::InvalidAnneal(format!(
                "dt must lie in (0, T], got dt={} with T={total}",
                self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub s: f64,
    /// `<psi(t)| H(s(t)) |psi(t)>`.
    pub energy: f64,
    pub ground_energy: Option<f64>,
    pub gap: Option<f64>,
}

impl TracePoint {
    /// Excess energy above the instantaneous ground state, when known.
    pub fn excess_energy(&self) -> Option<f64> {
        self.ground_energy.map(|e0| self.energy - e0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionTrace {
    pub points: Vec<TracePoint>,
}

impl EvolutionTrace {
    /// Columns `t,s,energy,e0,gap`; spectral columns are empty when absent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,energy,e0,gap\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.t,
                p.s,
                p.energy,
                opt(p.ground_energy),
                opt(p.gap)
            );
        }
        out
    }
}

/// Precomputed pieces of the two-term Hamiltonian.
pub(crate) struct Splitter {
    n: usize,
    violations: Vec<u32>,
    max_violation: u32,
    // popcount of each x-basis label
    weights: Vec<u32>,
}

impl Splitter {
    pub(crate) fn new(h: &DiagonalHamiltonian) -> Self {
        Splitter {
            n: h.num_qubits(),
            violations: h.violations().to_vec(),
            max_violation: h.max_value(),
            weights: (0..h.dim()).map(|k| (k as u32).count_ones()).collect(),
        }
    }

    pub(crate) fn final_phase(&self, amps: &mut [Complex64], tau: f64) {
        if tau == 0.0 {
            return;
        }
        let table = phase_table(self.max_violation as usize, tau, 1.0);
        for (a, &v) in amps.iter_mut().zip(&self.violations) {
            *a *= table[v as usize];
        }
    }

    pub(crate) fn driver_phase(&self, amps: &mut [Complex64], tau: f64) {
        if tau == 0.0 {
            return;
        }
        // both transform normalisations folded into the phase table
        walsh_hadamard_unnormalised(amps);
        let scale = (amps.len() as f64).recip();
        let table = phase_table(self.n, tau, scale);
        for (a, &w) in amps.iter_mut().zip(&self.weights) {
            *a *= table[w as usize];
        }
        walsh_hadamard_unnormalised(amps);
    }
}

/// `scale * exp(-i tau k)` for `k = 0..=max`.
fn phase_table(max: usize, tau: f64, scale: f64) -> Vec<Complex64> {
    let unit = Complex64::from_polar(1.0, -tau);
    let mut table = Vec::with_capacity(max + 1);
    let mut acc = Complex64::new(scale, 0.0);
    for _ in 0..=max {
        table.push(acc);
        acc *= unit;
    }
    table
}

/// Propagate `psi0` from `t = 0` to `t = T`.
pub fn evolve(spec: &AnnealSpec<'_>, psi0: &StateVector) -> Result<(StateVector, EvolutionTrace)> {
    spec.validate()?;
    if psi0.n != spec.h_final.num_qubits() {
        return Err(Error::Shape(format!(
            "state has {} qubits, Hamiltonian {}",
            psi0.n,
            spec.h_final.num_qubits()
        )));
    }
    let total = spec.protocol.total_time();
    let steps = spec.steps();
    let h = total / steps as f64;
    let split = Splitter::new(spec.h_final);
    let mut psi = psi0.clone();
    let mut trace = EvolutionTrace::default();
    let stride = spec.trace.stride;

    let record = |psi: &StateVector, t: f64, trace: &mut EvolutionTrace| {
        let s = spec.protocol.s_at(t);
        let energy = (1.0 - s) * driver_energy(psi) + s * final_energy(psi, spec.h_final);
        let (ground_energy, gap) = if spec.trace.spectral {
            let (e0, e1) = lowest_two(spec.h_final, s);
            (Some(e0), Some(e1 - e0))
        } else {
            (None, None)
        };
        trace.points.push(TracePoint {
            t,
            s,
            energy,
            ground_energy,
            gap,
        });
    };

    if stride > 0 {
        record(&psi, 0.0, &mut trace);
    }
    // H_final phase not yet applied
    let mut pending = 0.0;
    for k in 0..steps {
        let s_mid = spec.protocol.s_at((k as f64 + 0.5) * h);
        let b = s_mid * h;
        split.final_phase(&mut psi.amps, pending + 0.5 * b);
        split.driver_phase(&mut psi.amps, (1.0 - s_mid) * h);
        pending = 0.5 * b;
        let done = k + 1 == steps;
        if stride > 0 && ((k + 1) % stride == 0 || done) {
            split.final_phase(&mut psi.amps, pending);
            pending = 0.0;
            let t = if done { total } else { (k + 1) as f64 * h };
            record(&psi, t, &mut trace);
        }
    }
    split.final_phase(&mut psi.amps, pending);
    Ok((psi, trace))
}

/// Halve `dt` until the final `H_final` energy moves by less than `tol`.
/// Returns the final state and the step that achieved it.
pub fn evolve_converged(
    spec: &AnnealSpec<'_>,
    psi0: &StateVector,
    tol: f64,
    max_halvings: usize,
) -> Result<(StateVector, f64)> {
    let mut dt = spec.dt;
    let run = |dt: f64| {
        let s = AnnealSpec {
            h_final: spec.h_final,
            protocol: spec.protocol,
            dt,
            trace: TraceOptions::default(),
        };
        evolve(&s, psi0).map(|(psi, _)| psi)
    };
    let mut prev = run(dt)?;
    for _ in 0..max_halvings {
        dt *= 0.5;
        let next = run(dt)?;
        let change = (final_energy(&next, spec.h_final) - final_energy(&prev, spec.h_final)).abs();
        prev = next;
        if change < tol {
            return Ok((prev, dt));
        }
    }
    Err(Error::InvalidAnneal(format!(
        "energy not converged to {tol} after {max_halvings} halvings (dt={dt})"
    )))
}

/// Dense real-symmetric matrix of `(1 - s) H_init + s H_final`.
pub fn dense_hamiltonian(h_final: &DiagonalHamiltonian, s: f64) -> DMatrix<f64> {
    let n = h_final.num_qubits();
    let dim = h_final.dim();
    let mut mat = DMatrix::zeros(dim, dim);
    let drive = 1.0 - s;
    for z in 0..dim {
        mat[(z, z)] = drive * 0.5 * n as f64 + s * f64::from(h_final.violations()[z]);
        for q in 0..n {
            mat[(z, z ^ (1 << q))] = -0.5 * drive;
        }
    }
    mat
}

/// Two lowest eigenvalues (counted with multiplicity).
fn lowest_two(h_final: &DiagonalHamiltonian, s: f64) -> (f64, f64) {
    let mut ev: Vec<f64> = dense_hamiltonian(h_final, s)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    (ev[0], ev[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPoint {
    pub s: f64,
    pub e0: f64,
    pub e1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumScan {
    pub points: Vec<SpectrumPoint>,
    pub min_gap: f64,
    pub s_at_min_gap: f64,
}

/// Ground and first excited energies of `H(s)` on each `s` in `grid`.
pub fn spectrum_scan(h_final: &DiagonalHamiltonian, grid: &[f64]) -> Result<SpectrumScan> {
    let n = h_final.num_qubits();
    if n > MAX_SPECTRAL_QUBITS {
        return Err(Error::SizeExceeded {
            what: "qubit count for dense diagonalisation",
            got: n,
            max: MAX_SPECTRAL_QUBITS,
        });
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty s grid".into()));
    }
    let points: Vec<SpectrumPoint> = grid
        .par_iter()
        .map(|&s| {
            let (e0, e1) = lowest_two(h_final, s);
            SpectrumPoint { s, e0, e1 }
        })
        .collect();
    let best = points
        .iter()
        .min_by(|a, b| (a.e1 - a.e0).total_cmp(&(b.e1 - b.e0)))
        .expect("non-empty grid");
    Ok(SpectrumScan {
        min_gap: best.e1 - best.e0,
        s_at_min_gap: best.s,
        points,
    })
}

/// `count + 1` evenly spaced points on `[0, 1]`.
pub fn uniform_s_grid(count: usize) -> Vec<f64> {
    let count = count.max(1);
    (0..=count).map(|k| k as f64 / count as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::{encode_hamiltonian, Clause, Literal, SatInstance};
    use crate::schedule::{Schedule, ScheduleParams};
    use approx::assert_abs_diff_eq;

    fn single_clause() -> DiagonalHamiltonian {
        let c = Clause([Literal::pos(0), Literal::pos(1), Literal::pos(2)]);
        encode_hamiltonian(&SatInstance::new(3, vec![c]).unwrap())
    }

    #[test]
    fn uniform_state_amplitudes() {
        let psi = initial_state(1).unwrap();
        for a in psi.amplitudes() {
            assert_abs_diff_eq!(a.re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        }
        let psi = initial_state(3).unwrap();
        for a in psi.amplitudes() {
            assert_abs_diff_eq!(a.re, 1.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-15);
        assert!(driver_energy(&psi).abs() < 1e-12);
        assert!(initial_state(0).is_err());
        assert!(initial_state(15).is_err());
    }

    #[test]
    fn hadamard_is_involutive() {
        let mut v: Vec<Complex64> = (0..16)
            .map(|k| Complex64::new(k as f64, -(k as f64) * 0.5))
            .collect();
        let orig = v.clone();
        walsh_hadamard(&mut v);
        walsh_hadamard(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn driver_energy_matches_dense_matrix() {
        let h = single_clause();
        let amps: Vec<Complex64> = (0..8)
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = StateVector::from_amplitudes(3, amps.iter().map(|a| a / norm).collect()).unwrap();
        let m = dense_hamiltonian(&h, 0.0);
        let mut expect = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                expect += (psi.amps[i].conj() * psi.amps[j]).re * m[(i, j)];
            }
        }
        assert_abs_diff_eq!(driver_energy(&psi), expect, epsilon = 1e-12);
    }

    #[test]
    fn energies_and_success() {
        let h = single_clause();
        let psi = initial_state(3).unwrap();
        assert_abs_diff_eq!(final_energy(&psi, &h), 0.125, epsilon = 1e-15);
        assert_eq!(final_energy(&StateVector::basis(3, 5).unwrap(), &h), 0.0);
        assert_eq!(final_energy(&StateVector::basis(3, 0).unwrap(), &h), 1.0);
        assert_eq!(success_probability(&StateVector::basis(3, 5).unwrap(), &[5]), 1.0);
        let psi7 = initial_state(7).unwrap();
        assert_abs_diff_eq!(success_probability(&psi7, &[3]), 1.0 / 128.0, epsilon = 1e-15);
    }

    #[test]
    fn frozen_driver_keeps_ground_state() {
        let h = single_clause();
        let proto = Schedule::frozen(0.0, 13.0).unwrap();
        let psi0 = initial_state(3).unwrap();
        let (psi, _) = evolve(&AnnealSpec::new(&h, &proto), &psi0).unwrap();
        assert!((psi0.inner(&psi).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_problem_rotates_basis_phase() {
        let h = single_clause();
        let total = 3.7;
        let proto = Schedule::frozen(1.0, total).unwrap();
        for z in [0usize, 6] {
            let psi0 = StateVector::basis(3, z).unwrap();
            let (psi, _) = evolve(&AnnealSpec::new(&h, &proto), &psi0).unwrap();
            let expect = Complex64::from_polar(1.0, -f64::from(h.violations()[z]) * total);
            assert!((psi.amps[z] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_has_endpoints_and_increasing_times() {
        let h = single_clause();
        let s = Schedule::new(ScheduleParams::new(vec![0.1, -0.05]), 5.0).unwrap();
        let spec = AnnealSpec::new(&h, &s).with_dt(0.1).with_trace(TraceOptions {
            stride: 7,
            spectral: true,
        });
        let (psi, trace) = evolve(&spec, &initial_state(3).unwrap()).unwrap();
        let pts = &trace.points;
        assert_eq!(pts.first().unwrap().t, 0.0);
        assert_eq!(pts.last().unwrap().t, 5.0);
        assert!(pts.windows(2).all(|w| w[1].t > w[0].t));
        assert!(pts.iter().all(|p| p.gap.unwrap() >= -1e-12));
        assert!(pts[0].excess_energy().unwrap().abs() < 1e-12);
        // the trace must not perturb the final state
        let plain = AnnealSpec::new(&h, &s).with_dt(0.1);
        let (psi2, _) = evolve(&plain, &initial_state(3).unwrap()).unwrap();
        assert!((psi.inner(&psi2).norm() - 1.0).abs() < 1e-12);
        assert_abs_diff_eq!(
            pts.last().unwrap().energy,
            final_energy(&psi, &h),
            epsilon = 1e-12
        );
        assert!(trace.to_csv().starts_with("t,s,energy,e0,gap\n"));
    }

    #[test]
    fn invalid_specs_rejected() {
        let h = single_clause();
        let s = Schedule::linear(1.0).unwrap();
        let psi = initial_state(3).unwrap();
        assert!(evolve(&AnnealSpec::new(&h, &s).with_dt(2.0), &psi).is_err());
        assert!(evolve(&AnnealSpec::new(&h, &s).with_dt(0.0), &psi).is_err());
        assert!(evolve(&AnnealSpec::new(&h, &s), &initial_state(4).unwrap()).is_err());
    }

    #[test]
    fn spectrum_endpoints() {
        let h = single_clause();
        let scan = spectrum_scan(&h, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(scan.points[0].e0, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(scan.points[0].e1, 1.0, epsilon = 1e-10);
        // seven solutions at s = 1: degenerate ground space
        assert_abs_diff_eq!(scan.points[1].e0, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(scan.points[1].e1, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn binary_dump_round_trip() {
        let h = single_clause();
        let s = Schedule::linear(2.0).unwrap();
        let (psi, _) = evolve(&AnnealSpec::new(&h, &s), &initial_state(3).unwrap()).unwrap();
        let mut buf = Vec::new();
        psi.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 * 16);
        assert_eq!(&buf[..4], b"QSV1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), psi.amps[0].re);
        assert_eq!(StateVector::read_binary(&buf[..]).unwrap(), psi);
    }
}
