//! 3-SAT instances and their problem Hamiltonians.
//!
//! Basis convention used throughout the crate: variable `0` is the most
//! significant bit of a computational-basis index, and boolean `true` is bit
//! `1`. For `n = 3` the index `0b100` therefore assigns `b0 = true`,
//! `b1 = b2 = false`.

mod dimacs;

pub use dimacs::{emit_dimacs, parse_dimacs};

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Largest `n` accepted by [`brute_force_solve`].
pub const MAX_ENUMERATION_VARS: usize = 24;
/// Largest `n` accepted by [`generate_unique_instance`].
pub const MAX_GENERATOR_VARS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, negated: false }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, negated: true }
    }

    /// Signed 1-based DIMACS form.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }

    pub fn from_dimacs(lit: i64) -> Option<Self> {
        if lit == 0 {
            return None;
        }
        Some(Literal {
            var: (lit.unsigned_abs() - 1) as usize,
            negated: lit < 0,
        })
    }
}

/// A disjunction of three literals over distinct variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause(pub [Literal; 3]);

impl Clause {
    pub fn new(a: Literal, b: Literal, c: Literal) -> Self {
        Clause([a, b, c])
    }

    pub fn literals(&self) -> &[Literal; 3] {
        &self.0
    }

    /// Literals sorted by variable; two clauses with the same sorted form are
    /// the same clause.
    pub fn canonical(&self) -> [Literal; 3] {
        let mut lits = self.0;
        lits.sort();
        lits
    }

    /// `(mask, pattern)` such that basis index `z` violates the clause iff
    /// `z & mask == pattern`.
    pub fn violation_pattern(&self, n: usize) -> (usize, usize) {
        let mut mask = 0;
        let mut pattern = 0;
        for lit in &self.0 {
            let bit = 1usize << (n - 1 - lit.var);
            mask |= bit;
            // a negated literal is false when the variable is true
            if lit.negated {
                pattern |= bit;
            }
        }
        (mask, pattern)
    }
}

/// A 3-SAT formula in conjunctive normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatInstance {
    n: usize,
    clauses: Vec<Clause>,
}

impl SatInstance {
    pub fn new(n: usize, clauses: Vec<Clause>) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInstance(format!("need n >= 3, got {n}")));
        }
        if clauses.is_empty() {
            return Err(Error::InvalidInstance("need at least one clause".into()));
        }
        for (i, c) in clauses.iter().enumerate() {
            let [a, b, d] = c.0;
            if a.var >= n || b.var >= n || d.var >= n {
                return Err(Error::InvalidInstance(format!(
                    "clause {i} references a variable >= n={n}"
                )));
            }
            if a.var == b.var || a.var == d.var || b.var == d.var {
                return Err(Error::InvalidInstance(format!(
                    "clause {i} repeats a variable"
                )));
            }
        }
        Ok(SatInstance { n, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clause multiset in canonical form, for order-insensitive comparison.
    pub fn canonical_clauses(&self) -> Vec<[Literal; 3]> {
        let mut v: Vec<_> = self.clauses.iter().map(Clause::canonical).collect();
        v.sort();
        v
    }
}

/// `H_final` in the computational basis: the number of violated clauses for
/// each of the `2^n` assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalHamiltonian {
    n: usize,
    violations: Vec<u32>,
}

impl DiagonalHamiltonian {
    pub fn from_violations(n: usize, violations: Vec<u32>) -> Result<Self> {
        if violations.len() != 1 << n {
            return Err(Error::Shape(format!(
                "expected {} diagonal entries, got {}",
                1usize << n,
                violations.len()
            )));
        }
        Ok(DiagonalHamiltonian { n, violations })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.violations.len()
    }

    pub fn violations(&self) -> &[u32] {
        &self.violations
    }

    pub fn max_value(&self) -> u32 {
        self.violations.iter().copied().max().unwrap_or(0)
    }

    pub fn ground_energy(&self) -> u32 {
        self.violations.iter().copied().min().unwrap_or(0)
    }

    /// Sorted distinct eigenvalues.
    pub fn spectrum(&self) -> Vec<u32> {
        let mut v = self.violations.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Sum of clause projectors onto each clause's unique violating assignment.
pub fn encode_hamiltonian(inst: &SatInstance) -> DiagonalHamiltonian {
    let n = inst.n;
    let mut violations = vec![0u32; 1 << n];
    for clause in &inst.clauses {
        let (mask, pattern) = clause.violation_pattern(n);
        for (z, v) in violations.iter_mut().enumerate() {
            if z & mask == pattern {
                *v += 1;
            }
        }
    }
    DiagonalHamiltonian { n, violations }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub satisfiable: bool,
    /// Basis indices of the minimum-violation assignments, ascending.
    pub solutions: Vec<usize>,
    /// Minimum number of violated clauses (ground energy of `H_final`).
    pub ground_energy: u32,
}

pub fn brute_force_solve(inst: &SatInstance) -> Result<SolveResult> {
    if inst.n > MAX_ENUMERATION_VARS {
        return Err(Error::SizeExceeded {
            what: "variable count",
            got: inst.n,
            max: MAX_ENUMERATION_VARS,
        });
    }
    Ok(solve_hamiltonian(&encode_hamiltonian(inst)))
}

pub(crate) fn solve_hamiltonian(h: &DiagonalHamiltonian) -> SolveResult {
    let ground_energy = h.ground_energy();
    let solutions = h
        .violations
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == ground_energy)
        .map(|(z, _)| z)
        .collect();
    SolveResult {
        satisfiable: ground_energy == 0,
        solutions,
        ground_energy,
    }
}

/// Render a basis index as the assignment string `b0 b1 ... b_{n-1}`.
pub fn bitstring(z: usize, n: usize) -> String {
    (0..n)
        .map(|var| if z >> (n - 1 - var) & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorOptions {
    pub max_attempts: usize,
    pub allow_duplicate_clauses: bool,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            max_attempts: 100_000,
            allow_duplicate_clauses: true,
        }
    }
}

/// Rejection-sample random 3-SAT formulas until one has exactly one
/// satisfying assignment.
pub fn generate_unique_instance(
    n: usize,
    m: usize,
    seed: u64,
    opts: GeneratorOptions,
) -> Result<SatInstance> {
    if n > MAX_GENERATOR_VARS {
        return Err(Error::SizeExceeded {
            what: "variable count",
            got: n,
            max: MAX_GENERATOR_VARS,
        });
    }
    if n < 3 || m == 0 {
        return Err(Error::InvalidInstance(format!(
            "cannot generate with n={n}, m={m}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut violations = vec![0u32; 1 << n];
    for _ in 0..opts.max_attempts {
        let mut clauses = Vec::with_capacity(m);
        while clauses.len() < m {
            let vars = sample(&mut rng, n, 3);
            let mut lits = [Literal::pos(0); 3];
            for (slot, var) in lits.iter_mut().zip(vars.iter()) {
                *slot = Literal {
                    var,
                    negated: rng.gen_bool(0.5),
                };
            }
            let clause = Clause(lits);
            if !opts.allow_duplicate_clauses
                && clauses
                    .iter()
                    .any(|c: &Clause| c.canonical() == clause.canonical())
            {
                continue;
            }
            clauses.push(clause);
        }

        violations.iter_mut().for_each(|v| *v = 0);
        for clause in &clauses {
            let (mask, pattern) = clause.violation_pattern(n);
            for (z, v) in violations.iter_mut().enumerate() {
                if z & mask == pattern {
                    *v += 1;
                }
            }
        }
        if violations.iter().filter(|&&v| v == 0).count() == 1 {
            return SatInstance::new(n, clauses);
        }
    }
    Err(Error::GenerationExhausted {
        n,
        m,
        attempts: opts.max_attempts,
    })
}

/// Clause-information matrix: row `s` holds `+1` at positive literals and
/// `-1` at negated literals of clause `s`, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HInfoMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl HInfoMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, clause: usize, var: usize) -> i8 {
        self.entries[clause * self.cols + var]
    }

    pub fn row(&self, clause: usize) -> &[i8] {
        &self.entries[clause * self.cols..(clause + 1) * self.cols]
    }

    /// Row-major (clause-major) flattening, length `m * n`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.entries.iter().map(|&e| f64::from(e)).collect()
    }
}

pub fn build_h_info(inst: &SatInstance) -> HInfoMatrix {
    let (rows, cols) = (inst.num_clauses(), inst.num_vars());
    let mut entries = vec![0i8; rows * cols];
    for (s, clause) in inst.clauses.iter().enumerate() {
        for lit in clause.literals() {
            entries[s * cols + lit.var] = if lit.negated { -1 } else { 1 };
        }
    }
    HInfoMatrix {
        rows,
        cols,
        entries,
    }
}

/// JSON instance record: clause list in signed DIMACS literals plus the
/// provenance needed to regenerate and check it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub n: usize,
    pub m: usize,
    pub clauses: Vec<[i64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Satisfying assignment(s) as `b0..b_{n-1}` bitstrings.
    #[serde(default)]
    pub solutions: Vec<String>,
}

impl InstanceRecord {
    pub fn from_instance(inst: &SatInstance, seed: Option<u64>) -> Result<Self> {
        let solved = brute_force_solve(inst)?;
        let solutions = if solved.satisfiable {
            solved
                .solutions
                .iter()
                .map(|&z| bitstring(z, inst.n))
                .collect()
        } else {
            Vec::new()
        };
        Ok(InstanceRecord {
            n: inst.n,
            m: inst.num_clauses(),
            clauses: inst
                .clauses
                .iter()
                .map(|c| c.0.map(Literal::to_dimacs))
                .collect(),
            seed,
            solutions,
        })
    }

    pub fn to_instance(&self) -> Result<SatInstance> {
        if self.clauses.len() != self.m {
            return Err(Error::InvalidInstance(format!(
                "record says m={} but lists {} clauses",
                self.m,
                self.clauses.len()
            )));
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| {
                let mut lits = [Literal::pos(0); 3];
                for (slot, &raw) in lits.iter_mut().zip(c) {
                    *slot = Literal::from_dimacs(raw).ok_or_else(|| {
                        Error::InvalidInstance("literal 0 in clause".into())
                    })?;
                }
                Ok(Clause(lits))
            })
            .collect::<Result<Vec<_>>>()?;
        SatInstance::new(self.n, clauses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clause(a: i64, b: i64, c: i64) -> Clause {
        Clause([a, b, c].map(|l| Literal::from_dimacs(l).unwrap()))
    }

    /// Independent evaluation: a clause is satisfied when any literal is true.
    fn count_violated(inst: &SatInstance, z: usize) -> u32 {
        let n = inst.num_vars();
        let value = |var: usize| (z >> (n - 1 - var)) & 1 == 1;
        inst.clauses()
            .iter()
            .filter(|c| !c.literals().iter().any(|l| value(l.var) != l.negated))
            .count() as u32
    }

    #[test]
    fn single_clause_violated_only_by_all_false() {
        let inst = SatInstance::new(3, vec![clause(1, 2, 3)]).unwrap();
        let h = encode_hamiltonian(&inst);
        assert_eq!(h.violations(), &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(h.ground_energy(), 0);
    }

    #[test]
    fn opposite_clauses_violated_at_both_corners() {
        let inst = SatInstance::new(3, vec![clause(1, 2, 3), clause(-1, -2, -3)]).unwrap();
        assert_eq!(encode_hamiltonian(&inst).violations(), &[1, 0, 0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn basis_convention_variable_zero_is_msb() {
        // (b0 v b1 v ~b2) is violated only by b0=0, b1=0, b2=1 -> index 0b001
        let inst = SatInstance::new(3, vec![clause(1, 2, -3)]).unwrap();
        let h = encode_hamiltonian(&inst);
        assert_eq!(h.violations()[0b001], 1);
        assert_eq!(h.violations().iter().sum::<u32>(), 1);
        assert_eq!(bitstring(0b001, 3), "001");
        assert_eq!(bitstring(0b100, 3), "100");
    }

    #[test]
    fn rejects_degenerate_instances() {
        assert!(SatInstance::new(3, vec![]).is_err());
        assert!(SatInstance::new(2, vec![clause(1, 2, 2)]).is_err());
        assert!(SatInstance::new(3, vec![clause(1, 1, 2)]).is_err());
        assert!(SatInstance::new(3, vec![clause(1, 2, 4)]).is_err());
    }

    #[test]
    fn single_clause_has_seven_solutions() {
        let inst = SatInstance::new(3, vec![clause(1, 2, 3)]).unwrap();
        let r = brute_force_solve(&inst).unwrap();
        assert!(r.satisfiable);
        assert_eq!(r.solutions.len(), 7);
        assert_eq!(r.ground_energy, 0);
    }

    #[test]
    fn all_eight_sign_patterns_are_unsatisfiable() {
        let mut clauses = Vec::new();
        for signs in 0..8 {
            let s = |bit: i64, v: i64| if signs >> bit & 1 == 1 { -v } else { v };
            clauses.push(clause(s(0, 1), s(1, 2), s(2, 3)));
        }
        let inst = SatInstance::new(3, clauses).unwrap();
        let r = brute_force_solve(&inst).unwrap();
        assert!(!r.satisfiable);
        assert_eq!(r.ground_energy, 1);
        let h = encode_hamiltonian(&inst);
        for &z in &r.solutions {
            assert_eq!(h.violations()[z], r.ground_energy);
        }
    }

    #[test]
    fn enumeration_bound_is_enforced() {
        let inst = SatInstance::new(25, vec![clause(1, 2, 3)]).unwrap();
        assert!(matches!(
            brute_force_solve(&inst),
            Err(Error::SizeExceeded { .. })
        ));
    }

    #[test]
    fn generated_instances_have_one_solution() {
        for (n, m) in [(7, 21), (7, 18), (7, 23)] {
            let inst = generate_unique_instance(n, m, 0, GeneratorOptions::default()).unwrap();
            assert_eq!(inst.num_clauses(), m);
            let r = brute_force_solve(&inst).unwrap();
            assert_eq!(r.solutions.len(), 1);
            // independent recount
            let zeros: Vec<usize> = (0..1 << n).filter(|&z| count_violated(&inst, z) == 0).collect();
            assert_eq!(zeros, r.solutions);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_unique_instance(7, 21, 42, GeneratorOptions::default()).unwrap();
        let b = generate_unique_instance(7, 21, 42, GeneratorOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_free_generation() {
        let opts = GeneratorOptions {
            allow_duplicate_clauses: false,
            ..Default::default()
        };
        let inst = generate_unique_instance(7, 21, 3, opts).unwrap();
        let mut canon = inst.canonical_clauses();
        canon.dedup();
        assert_eq!(canon.len(), 21);
    }

    #[test]
    fn exhaustion_is_reported() {
        let opts = GeneratorOptions {
            max_attempts: 1,
            ..Default::default()
        };
        // a single clause over many variables never has a unique solution
        assert!(matches!(
            generate_unique_instance(6, 1, 0, opts),
            Err(Error::GenerationExhausted { .. })
        ));
    }

    #[test]
    fn h_info_rows() {
        let inst = SatInstance::new(5, vec![clause(1, -3, 5), clause(2, 3, 4)]).unwrap();
        let h = build_h_info(&inst);
        assert_eq!(h.row(0), &[1, 0, -1, 0, 1]);
        assert_eq!(h.row(1).iter().map(|&e| i32::from(e)).sum::<i32>(), 3);
        let inst = generate_unique_instance(7, 21, 0, GeneratorOptions::default()).unwrap();
        let h = build_h_info(&inst);
        assert_eq!(h.to_vec().len(), 147);
        for s in 0..h.rows() {
            assert_eq!(h.row(s).iter().filter(|&&e| e != 0).count(), 3);
        }
    }

    #[test]
    fn json_record_round_trip() {
        let inst = generate_unique_instance(7, 21, 5, GeneratorOptions::default()).unwrap();
        let rec = InstanceRecord::from_instance(&inst, Some(5)).unwrap();
        assert_eq!(rec.solutions.len(), 1);
        let text = serde_json::to_string(&rec).unwrap();
        let back: InstanceRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_instance().unwrap(), inst);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_instance() -> impl Strategy<Value = SatInstance> {
            (3usize..=10).prop_flat_map(|n| {
                let lit = (0..n, any::<bool>());
                let cl = proptest::collection::vec(lit, 3)
                    .prop_filter("distinct vars", |v| {
                        v[0].0 != v[1].0 && v[0].0 != v[2].0 && v[1].0 != v[2].0
                    })
                    .prop_map(|v| {
                        Clause(std::array::from_fn(|i| Literal {
                            var: v[i].0,
                            negated: v[i].1,
                        }))
                    });
                proptest::collection::vec(cl, 1..=30)
                    .prop_map(move |cs| SatInstance::new(n, cs).unwrap())
            })
        }

        proptest! {
            #[test]
            fn encoding_matches_direct_evaluation(inst in arb_instance()) {
                let h = encode_hamiltonian(&inst);
                for z in 0..h.dim() {
                    prop_assert_eq!(h.violations()[z], count_violated(&inst, z));
                }
                let m = inst.num_clauses() as u32;
                let spec = h.spectrum();
                prop_assert!(spec.iter().all(|&e| e <= m));
                prop_assert!(spec.windows(2).all(|w| w[1] - w[0] >= 1));
            }

            #[test]
            fn h_info_rows_have_three_signed_entries(inst in arb_instance()) {
                let h = build_h_info(&inst);
                for s in 0..h.rows() {
                    let nz: Vec<i8> = h.row(s).iter().copied().filter(|&e| e != 0).collect();
                    prop_assert_eq!(nz.len(), 3);
                    prop_assert!(nz.iter().all(|&e| e == 1 || e == -1));
                }
            }

            #[test]
            fn dimacs_round_trip(inst in arb_instance()) {
                let back = parse_dimacs(&emit_dimacs(&inst)).unwrap();
                prop_assert_eq!(back.canonical_clauses(), inst.canonical_clauses());
                prop_assert_eq!(back.num_vars(), inst.num_vars());
            }
        }
    }
}
