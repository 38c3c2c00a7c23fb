//! Result rows shared by every experiment, and their CSV / JSON-lines
//! output.
//!
//! Wall-clock times are kept out of `results.csv` and `results.jsonl` so
//! that identical configurations produce byte-identical files; they go to
//! `timings.csv` instead.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qzero_core::schedule::ScheduleParams;
use qzero_core::Annealer;

/// Tolerance of the stored-versus-recomputed success check.
pub const RECHECK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub optimizer: String,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub energy: f64,
    pub success_probability: f64,
    pub queries: usize,
    /// Mean and standard deviation over restarts or seeds, where
    /// meaningful.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_spread: Option<f64>,
    pub x: Vec<f64>,
    /// `"ok"` or the error that failed the cell.
    pub status: String,
    #[serde(skip)]
    pub wall_time: f64,
}

impl ResultRow {
    pub fn failed(instance: &str, optimizer: &str, total_time: f64, err: &anyhow::Error) -> Self {
        ResultRow {
            instance: instance.to_string(),
            optimizer: optimizer.to_string(),
            total_time,
            energy: f64::NAN,
            success_probability: f64::NAN,
            queries: 0,
            success_mean: None,
            success_spread: None,
            x: Vec::new(),
            status: format!("error: {err:#}"),
            wall_time: 0.0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn join(x: &[f64]) -> String {
    x.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

impl ResultTable {
    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    /// Order rows by (instance, T, optimizer) so that output does not
    /// depend on the order cells finished in.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.instance
                .cmp(&b.instance)
                .then(a.total_time.total_cmp(&b.total_time))
                .then(a.optimizer.cmp(&b.optimizer))
        });
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn select<'a>(&'a self, optimizer: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.optimizer == optimizer && r.is_ok())
    }

    /// Re-run the evolution for every successful row and mark rows whose
    /// stored success probability disagrees with the recomputed one.
    pub fn recheck<F>(&mut self, mut annealer_for: F)
    where
        F: FnMut(&ResultRow) -> Option<Annealer>,
    {
        for row in self.rows.iter_mut().filter(|r| r.status == "ok") {
            let Some(a) = annealer_for(row) else { continue };
            match a.anneal(&ScheduleParams::new(row.x.clone())) {
                Ok(ev) => {
                    let diff = (ev.success_probability - row.success_probability).abs();
                    if !(diff <= RECHECK_TOLERANCE) {
                        row.status = format!("error: recheck differs by {diff:e}");
                    }
                }
                Err(e) => row.status = format!("error: recheck failed: {e}"),
            }
        }
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "instance",
            "optimizer",
            "T",
            "energy",
            "success_probability",
            "queries",
            "success_mean",
            "success_spread",
            "x",
            "status",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.instance.clone(),
                r.optimizer.clone(),
                r.total_time.to_string(),
                r.energy.to_string(),
                r.success_probability.to_string(),
                r.queries.to_string(),
                fmt_opt(r.success_mean),
                fmt_opt(r.success_spread),
                join(&r.x),
                r.status.clone(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn to_jsonl(&self) -> anyhow::Result<String> {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn timings_csv(&self) -> String {
        let mut s = String::from("instance,optimizer,T,wall_time_s\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.instance, r.optimizer, r.total_time, r.wall_time));
        }
        s
    }

    /// Write `results.csv`, `results.jsonl` and `timings.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.to_csv()?)?;
        std::fs::write(dir.join("results.jsonl"), self.to_jsonl()?)?;
        let mut f = std::fs::File::create(dir.join("timings.csv"))?;
        f.write_all(self.timings_csv().as_bytes())?;
        Ok(())
    }
}

/// Median of the finite values, `None` if there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation.
pub fn spread(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    Some((values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt())
}

/// Counts of `values` in `bins` equal bins over `[0, 1]`; 1.0 lands in the
/// last bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let bins = bins.max(1);
    let mut h = vec![0; bins];
    for &v in values {
        if v.is_finite() {
            let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
            h[b] += 1;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use qzero_core::sat::{generate_unique_instance, GeneratorOptions};

    fn row(instance: &str, opt: &str, t: f64) -> ResultRow {
        ResultRow {
            instance: instance.into(),
            optimizer: opt.into(),
            total_time: t,
            energy: 0.5,
            success_probability: 0.5,
            queries: 3,
            success_mean: None,
            success_spread: Some(0.1),
            x: vec![0.0, 0.01],
            status: "ok".into(),
            wall_time: 1.5,
        }
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(mean(&[1.0, 3.0]), Some(2.0));
        assert_eq!(spread(&[1.0, 3.0]), Some(1.0));
        assert_eq!(histogram(&[0.0, 0.05, 0.5, 1.0], 10), vec![2, 0, 0, 0, 0, 1, 0, 0, 0, 1]);
    }

    #[test]
    fn csv_is_sorted_and_excludes_wall_time() {
        let mut t = ResultTable::default();
        t.push(row("b", "sd", 60.0));
        t.push(row("a", "sd", 80.0));
        t.push(row("a", "mcts", 80.0));
        t.push(row("a", "sd", 25.0));
        t.sort();
        let order: Vec<_> = t.rows.iter().map(|r| (r.instance.as_str(), r.total_time, r.optimizer.as_str())).collect();
        assert_eq!(order, vec![("a", 25.0, "sd"), ("a", 80.0, "mcts"), ("a", 80.0, "sd"), ("b", 60.0, "sd")]);
        let csv = t.to_csv().unwrap();
        assert!(!csv.contains("1.5"));
        assert!(csv.contains("0;0.01"));
        let jsonl = t.to_jsonl().unwrap();
        assert_eq!(jsonl.lines().count(), 4);
        assert!(!jsonl.contains("wall"));
    }

    #[test]
    fn recheck_flags_tampered_rows() {
        let inst = generate_unique_instance(5, 15, 3, GeneratorOptions::default()).unwrap();
        let a = Annealer::new(&inst, 10.0).unwrap();
        let x = vec![0.05, 0.0, -0.02, 0.0, 0.0];
        let ev = a.anneal(&ScheduleParams::new(x.clone())).unwrap();
        let mut good = row("i", "mcts", 10.0);
        good.x = x;
        good.success_probability = ev.success_probability;
        let mut bad = good.clone();
        bad.success_probability += 1e-6;
        let mut t = ResultTable { rows: vec![good, bad] };
        t.recheck(|_| Some(a.clone()));
        assert!(t.rows[0].is_ok());
        assert!(!t.rows[1].is_ok());
        assert_eq!(t.failures(), 1);
    }
}
