//! Per-iteration records for the ascent solvers and their CSV forms.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    /// Dual objective at iterate `t` (`I` for two marginals, `D` for barycenters).
    pub value: f64,
    /// `Ḣ¹` norm of the Sobolev gradient at iterate `t`.
    pub grad_h1: f64,
    /// Step size applied to leave iterate `t`.
    pub eta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceLog {
    records: Vec<IterRecord>,
    best: Option<usize>,
}

impl ConvergenceLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record and returns true when it becomes the best iterate.
    /// Ties keep the earlier iterate.
    pub fn push(&mut self, rec: IterRecord) -> bool {
        debug_assert!(self.records.last().is_none_or(|r| r.t < rec.t));
        self.records.push(rec);
        let idx = self.records.len() - 1;
        let improved = match self.best {
            None => true,
            Some(b) => rec.value > self.records[b].value,
        };
        if improved {
            self.best = Some(idx);
        }
        improved
    }

    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best(&self) -> Option<&IterRecord> {
        self.best.map(|b| &self.records[b])
    }

    pub fn best_value(&self) -> f64 {
        self.best().map_or(f64::NEG_INFINITY, |r| r.value)
    }

    /// Running maximum of the objective, one entry per record.
    pub fn running_best(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.max(r.value);
                best
            })
            .collect()
    }

    /// Largest logged gradient norm.
    pub fn max_grad(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.grad_h1))
    }

    /// `t,<value_name>,grad_h1,eta,best_flag` with exactly one flagged row.
    pub fn to_csv(&self, value_name: &str) -> String {
        let mut out = format!("t,{value_name},grad_h1,eta,best_flag\n");
        for (i, r) in self.records.iter().enumerate() {
            let flag = u8::from(Some(i) == self.best);
            let _ = writeln!(out, "{},{:.17e},{:.17e},{:.17e},{}", r.t, r.value, r.grad_h1, r.eta, flag);
        }
        out
    }

    /// `(t, ln(best − value_t))` for every record strictly below the best.
    pub fn log_gaps(&self) -> Vec<(usize, f64)> {
        let best = self.best_value();
        self.records
            .iter()
            .filter(|r| r.value < best)
            .map(|r| (r.t, (best - r.value).ln()))
            .collect()
    }

    pub fn rate_csv(&self) -> String {
        let mut out = String::from("t,log_gap\n");
        for (t, g) in self.log_gaps() {
            let _ = writeln!(out, "{t},{g:.17e}");
        }
        out
    }
}
