//! Build objectives from a [`RunSpec`] and execute them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::{DMatrix, DVector};
use van::active::{active_loop, ActiveOutcome};
use van::data::{
    fmt17, make_synthetic_blobs, make_synthetic_regression, read_libsvm, standardize, Dataset, SplitName, Splits,
    Task,
};
use van::objectives::{
    make_lasso, make_logistic, make_quadratic, make_sinc, make_vi_objective, test_log_loss, Objective,
};
use van::optim::{run, RunOutcome, StopReason};

use crate::spec::{Problem, RunSpec};

pub enum Report {
    Optim {
        outcome: RunOutcome,
        test_loss: Option<f64>,
    },
    Active(ActiveOutcome),
}

impl Report {
    pub fn converged(&self) -> bool {
        match self {
            Report::Optim { outcome, .. } => outcome.stop.converged(),
            Report::Active(_) => true,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            Report::Optim { outcome, .. } => outcome.trace.len(),
            Report::Active(a) => a.curve.len().saturating_sub(1),
        }
    }

    pub fn final_value(&self) -> Option<f64> {
        match self {
            Report::Optim { outcome, .. } => outcome.trace.last().map(|r| r.f_at_mean),
            Report::Active(a) => a.curve.last().map(|r| r.test_loss),
        }
    }

    pub fn test_loss(&self) -> Option<f64> {
        match self {
            Report::Optim { test_loss, .. } => *test_loss,
            Report::Active(a) => a.curve.last().map(|r| r.test_loss),
        }
    }

    pub fn stop_name(&self) -> &'static str {
        match self {
            Report::Optim { outcome, .. } => match outcome.stop {
                StopReason::GradTolerance => "grad_tolerance",
                StopReason::StepTolerance => "step_tolerance",
                StopReason::MaxIters => "max_iters",
            },
            Report::Active(_) => "rounds",
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self {
            Report::Optim { outcome, .. } => outcome.trace.write_csv(out)?,
            Report::Active(a) => {
                writeln!(out, "round,examples_seen,test_loss")?;
                for r in &a.curve {
                    writeln!(out, "{},{},{}", r.round, r.examples_seen, fmt17(r.test_loss))?;
                }
            }
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// One `key=value` line for standard output.
    pub fn summary(&self, spec: &RunSpec) -> String {
        let mut line = format!(
            "problem={} method={} iters={} stop={}",
            spec.problem,
            spec.method.name(),
            self.iterations(),
            self.stop_name()
        );
        if let Report::Optim { outcome, .. } = self {
            if let Some(f) = self.final_value() {
                line += &format!(" f_at_mean={}", fmt17(f));
            }
            let mean = outcome.solution.mean();
            if mean.len() <= 10 {
                let parts: Vec<String> = mean.iter().map(|v| fmt17(*v)).collect();
                line += &format!(" mean={}", parts.join(","));
            }
        }
        if let Some(loss) = self.test_loss() {
            line += &format!(" test_loss={}", fmt17(loss));
        }
        line
    }
}

fn load(spec: &RunSpec, task: Task) -> Result<Dataset> {
    let data = match &spec.data {
        Some(path) => {
            let d = read_libsvm(path, task).with_context(|| format!("reading {}", path.display()))?;
            let n = d.len();
            d.with_splits(Splits::shuffled(n, spec.data_seed))?
        }
        None => match task {
            Task::Regression => make_synthetic_regression(spec.n, spec.dim, spec.sparsity, spec.noise, spec.data_seed)?.0,
            Task::Classification => make_synthetic_blobs(spec.n, spec.dim, spec.separation, spec.data_seed)?,
        },
    };
    if spec.standardize {
        Ok(standardize(&data, SplitName::Train)?.0)
    } else {
        Ok(data)
    }
}

/// `½(θ − 1)ᵀA(θ − 1)` with eigenvalues spread evenly over `[1, condition]`.
fn quadratic(spec: &RunSpec) -> Result<Box<dyn Objective>> {
    let d = spec.dim;
    let eig = DVector::from_fn(d, |i, _| {
        if d == 1 {
            1.0
        } else {
            1.0 + (spec.condition - 1.0) * i as f64 / (d - 1) as f64
        }
    });
    Ok(Box::new(make_quadratic(DMatrix::from_diagonal(&eig), DVector::from_element(d, 1.0))?))
}

pub fn execute(spec: &RunSpec) -> Result<Report> {
    let mut test = None;
    let obj: Box<dyn Objective> = match spec.problem {
        Problem::Sinc => Box::new(make_sinc()),
        Problem::Quadratic => quadratic(spec)?,
        Problem::Lasso => Box::new(make_lasso(&load(spec, Task::Regression)?.split(SplitName::Train)?, spec.reg)?),
        Problem::Logistic | Problem::ViLogistic => {
            let data = load(spec, Task::Classification)?;
            test = Some(data.split(SplitName::Test)?);
            let f = make_logistic(&data.split(SplitName::Train)?, spec.reg)?;
            if spec.problem == Problem::ViLogistic {
                Box::new(make_vi_objective(Box::new(f))?)
            } else {
                Box::new(f)
            }
        }
        Problem::ActiveLogistic => {
            let data = load(spec, Task::Classification)?;
            let pool = data.split(SplitName::Train)?;
            let test = data.split(SplitName::Test)?;
            return Ok(Report::Active(active_loop(&pool, &test, &spec.active_config())?));
        }
    };
    let mut config = spec.optimizer_config();
    config.mean0 = spec.start(obj.dim())?;
    let outcome = run(obj.as_ref(), &config)?;
    let test_loss = match &test {
        Some(t) => Some(test_log_loss(outcome.solution.mean(), t)?),
        None => None,
    };
    Ok(Report::Optim { outcome, test_loss })
}
