//! Per-iteration records and their CSV form.

use std::io::Write;

use crate::data::fmt17;
use crate::error::Result;

pub const TRACE_HEADER: &str =
    "iter,epoch,f_at_mean,L_estimate,grad_norm,step_norm,trace_sigma,samples_used,wallclock_ns";

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iter: usize,
    /// Passes over the data so far.
    pub epoch: f64,
    /// Full objective at the new mean (or point).
    pub f_at_mean: f64,
    /// Estimated loss at the distribution the step started from; NaN if unavailable.
    pub l_estimate: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    /// `tr Σ` after the step; zero for point methods.
    pub trace_sigma: f64,
    pub samples_used: usize,
    /// Elapsed time since the run started; zero unless timing is enabled.
    pub wallclock_ns: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iter,
                fmt17(r.epoch),
                fmt17(r.f_at_mean),
                fmt17(r.l_estimate),
                fmt17(r.grad_norm),
                fmt17(r.step_norm),
                fmt17(r.trace_sigma),
                r.samples_used,
                r.wallclock_ns
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
