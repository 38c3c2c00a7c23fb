//! DIMACS CNF reading and writing, restricted to width-3 clauses.

use std::fmt::Write as _;

use super::{Clause, Literal, SatInstance};
use crate::{Error, Result};

pub fn parse_dimacs(text: &str) -> Result<SatInstance> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<(i64, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        // some generators terminate the file with "%"
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(dimacs_err(line_no, "duplicate problem line"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(dimacs_err(line_no, "expected `p cnf <vars> <clauses>`"));
            }
            let n = parts[2]
                .parse()
                .map_err(|_| dimacs_err(line_no, "bad variable count"))?;
            let m = parts[3]
                .parse()
                .map_err(|_| dimacs_err(line_no, "bad clause count"))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| dimacs_err(line_no, "clause before problem line"))?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok
                .parse()
                .map_err(|_| dimacs_err(line_no, &format!("bad literal `{tok}`")))?;
            if lit == 0 {
                clauses.push(finish_clause(&pending, n)?);
                pending.clear();
                continue;
            }
            if lit.unsigned_abs() as usize > n {
                return Err(dimacs_err(
                    line_no,
                    &format!("literal {lit} out of range for {n} variables"),
                ));
            }
            pending.push((lit, line_no));
        }
    }

    let (n, m) = header.ok_or_else(|| dimacs_err(0, "missing problem line"))?;
    if let Some(&(_, line)) = pending.first() {
        return Err(dimacs_err(line, "unterminated clause"));
    }
    if clauses.len() != m {
        return Err(dimacs_err(
            0,
            &format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    SatInstance::new(n, clauses)
}

fn finish_clause(lits: &[(i64, usize)], n: usize) -> Result<Clause> {
    let line = lits.last().map_or(0, |&(_, l)| l);
    if lits.len() != 3 {
        return Err(dimacs_err(
            line,
            &format!("clause has width {}, expected 3", lits.len()),
        ));
    }
    let clause = Clause(std::array::from_fn(|i| {
        Literal::from_dimacs(lits[i].0).expect("zero handled by caller")
    }));
    let [a, b, c] = clause.0;
    if a.var == b.var || a.var == c.var || b.var == c.var {
        return Err(dimacs_err(line, "clause repeats a variable"));
    }
    debug_assert!(clause.0.iter().all(|l| l.var < n));
    Ok(clause)
}

fn dimacs_err(line: usize, msg: &str) -> Error {
    Error::Dimacs {
        line,
        msg: msg.to_string(),
    }
}

pub fn emit_dimacs(inst: &SatInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p cnf {} {}", inst.num_vars(), inst.num_clauses());
    for c in inst.clauses() {
        let [a, b, d] = c.0.map(Literal::to_dimacs);
        let _ = writeln!(out, "{a} {b} {d} 0");
    }
    out
}
