//! Datasets: LIBSVM ingestion, synthetic generators, standardization and splits.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Regression,
    /// Labels in `{-1, +1}`.
    Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Seeded 70/10/20 shuffle of `0..n`.
    pub fn shuffled(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut RngStream::new(seed, 0x5b1d).rng(0));
        let n_train = (0.7 * n as f64).round() as usize;
        let n_val = ((0.1 * n as f64).round() as usize).min(n - n_train);
        let test = idx.split_off(n_train + n_val);
        let validation = idx.split_off(n_train);
        Self {
            train: idx,
            validation,
            test,
        }
    }

    pub fn get(&self, name: SplitName) -> &[usize] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Validation => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.validation).chain(&self.test) {
            if i >= n {
                return Err(Error::BadParams(format!("split index {i} out of range 0..{n}")));
            }
            if seen[i] {
                return Err(Error::BadParams(format!("row {i} appears in two splits")));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    task: Task,
    feature_names: Vec<String>,
    splits: Splits,
}

impl Dataset {
    /// Validates shapes, finiteness and the label domain; assigns the default split.
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>, task: Task) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("dataset"));
        }
        if task == Task::Classification {
            if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::BadLabels {
                    index: i,
                    value: labels[i],
                });
            }
        }
        let n = features.nrows();
        let feature_names = (1..=features.ncols()).map(|j| format!("f{j}")).collect();
        Ok(Self {
            features,
            labels,
            task,
            feature_names,
            splits: Splits::shuffled(n, 0),
        })
    }

    pub fn with_splits(mut self, splits: Splits) -> Result<Self> {
        splits.validate(self.len())?;
        self.splits = splits;
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    /// Rows `indices`, in that order. All of them form the new train split.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::BadParams(format!("row {bad} out of range")));
        }
        let features = self.features.select_rows(indices);
        let labels = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.labels[i]));
        Ok(Self {
            features,
            labels,
            task: self.task,
            feature_names: self.feature_names.clone(),
            splits: Splits {
                train: (0..indices.len()).collect(),
                ..Splits::default()
            },
        })
    }

    /// The rows of one split as a dataset of their own.
    pub fn split(&self, name: SplitName) -> Result<Self> {
        let idx = self.splits.get(name);
        if idx.is_empty() {
            return Err(Error::EmptySplit(name.as_str()));
        }
        self.subset(idx)
    }

    /// CSV view: `split,label,<feature names>` with one line per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut owner = vec!["none"; self.len()];
        for name in [SplitName::Train, SplitName::Validation, SplitName::Test] {
            for &i in self.splits.get(name) {
                owner[i] = name.as_str();
            }
        }
        write!(out, "split,label")?;
        for name in &self.feature_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            let mut line = format!("{},{}", owner[i], fmt17(self.labels[i]));
            for j in 0..self.dim() {
                let _ = write!(line, ",{}", fmt17(self.features[(i, j)]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_libsvm<P: AsRef<Path>>(path: P, expect: Task) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, expect)
}

/// Parse LIBSVM text: `<label> <index>:<value> ...` with 1-based, strictly
/// increasing indices. Classification labels may be `{0, 1}` or `{-1, +1}`.
pub fn parse_libsvm(text: &str, expect: Task) -> Result<Dataset> {
    let mut rows: Vec<(usize, f64, Vec<(usize, f64)>)> = Vec::new();
    let mut dim = 0;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = tokens_with_columns(line);
        let (col, tok) = tokens.next().expect("non-empty line has a token");
        let label: f64 = tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            column: col,
            reason: format!("label `{tok}` is not a number"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                column: col,
                reason: "label is not finite".into(),
            });
        }
        let mut entries = Vec::new();
        let mut last = 0usize;
        for (col, tok) in tokens {
            let err = |reason: String| Error::Parse {
                line: lineno,
                column: col,
                reason,
            };
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected `index:value`, found `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("index `{idx}` is not a positive integer")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("index {idx} does not increase after {last}")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("value `{val}` is not a number")))?;
            if !val.is_finite() {
                return Err(err("value is not finite".into()));
            }
            last = idx;
            entries.push((idx, val));
        }
        dim = dim.max(last);
        rows.push((lineno, label, entries));
    }

    let labels = match expect {
        Task::Regression => rows.iter().map(|r| r.1).collect::<Vec<_>>(),
        Task::Classification => {
            let zero_one = rows.iter().all(|r| r.1 == 0.0 || r.1 == 1.0);
            rows.iter()
                .map(|&(line, y, _)| match y {
                    y if y == 1.0 => Ok(1.0),
                    y if y == -1.0 && !zero_one => Ok(-1.0),
                    y if y == 0.0 && zero_one => Ok(-1.0),
                    value => Err(Error::LabelDomain { line, value }),
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut features = DMatrix::zeros(rows.len(), dim);
    for (i, (_, _, entries)) in rows.iter().enumerate() {
        for &(j, v) in entries {
            features[(i, j - 1)] = v;
        }
    }
    Dataset::new(features, DVector::from_vec(labels), expect)
}

pub fn write_libsvm<P: AsRef<Path>>(data: &Dataset, path: P) -> Result<()> {
    fs::write(path, format_libsvm(data))?;
    Ok(())
}

/// LIBSVM text with 17 significant digits. Zero entries are omitted, except
/// that the last column is written explicitly once if it would otherwise be
/// invisible, so the dimension survives a round trip.
pub fn format_libsvm(data: &Dataset) -> String {
    let d = data.dim();
    let last_col_seen = d == 0 || (0..data.len()).any(|i| data.features[(i, d - 1)] != 0.0);
    let mut out = String::new();
    for i in 0..data.len() {
        let y = data.labels[i];
        match data.task {
            Task::Classification => out.push_str(if y > 0.0 { "1" } else { "-1" }),
            Task::Regression => out.push_str(&fmt17(y)),
        }
        for j in 0..d {
            let v = data.features[(i, j)];
            if v != 0.0 || (i == 0 && j == d - 1 && !last_col_seen) {
                let _ = write!(out, " {}:{}", j + 1, fmt17(v));
            }
        }
        out.push('\n');
    }
    out
}

fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut pos = 0;
    line.split_ascii_whitespace().map(move |tok| {
        let start = pos + line[pos..].find(tok).unwrap_or(0);
        pos = start + tok.len();
        (start + 1, tok)
    })
}

/// Per-feature affine map fitted on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl Standardization {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: data.dim(),
            });
        }
        let mut out = data.clone();
        for (j, mut col) in out.features.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        Ok(out)
    }
}

/// Center and scale every feature using statistics of `stats_from` only.
/// Constant columns are centered and keep scale 1.
pub fn standardize(data: &Dataset, stats_from: SplitName) -> Result<(Dataset, Standardization)> {
    let idx = data.splits.get(stats_from);
    if idx.is_empty() {
        return Err(Error::EmptySplit(stats_from.as_str()));
    }
    let n = idx.len() as f64;
    let d = data.dim();
    let mut mean = DVector::zeros(d);
    let mut scale = DVector::from_element(d, 1.0);
    for j in 0..d {
        let m = idx.iter().map(|&i| data.features[(i, j)]).sum::<f64>() / n;
        let var = idx
            .iter()
            .map(|&i| (data.features[(i, j)] - m).powi(2))
            .sum::<f64>()
            / n;
        mean[j] = m;
        if var > 0.0 {
            scale[j] = var.sqrt();
        }
    }
    let stats = Standardization { mean, scale };
    Ok((stats.apply(data)?, stats))
}

/// `y = Xθ + noise` with standard-normal features and `⌈sparsity·D⌉` nonzero
/// coefficients of magnitude in `[1, 3]` and random sign.
pub fn make_synthetic_regression(
    n: usize,
    d: usize,
    sparsity: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset, DVector<f64>)> {
    if n == 0 || d == 0 {
        return Err(Error::BadParams("N and D must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&sparsity) || !(noise_sd >= 0.0) {
        return Err(Error::BadParams(format!(
            "sparsity {sparsity} must lie in [0, 1] and noise_sd {noise_sd} must be non-negative"
        )));
    }
    let stream = RngStream::new(seed, 0x4e67);
    let x = stream.split(0).standard_normals(n, d);
    let mut rng = stream.split(1).rng(0);
    let k = (sparsity * d as f64).ceil() as usize;
    let mut support: Vec<usize> = (0..d).collect();
    support.shuffle(&mut rng);
    let mut theta = DVector::zeros(d);
    for &j in &support[..k] {
        let mag: f64 = rng.random_range(1.0..3.0);
        theta[j] = if rng.random::<bool>() { mag } else { -mag };
    }
    let noise = stream.split(2).standard_normals(n, 1).column(0).into_owned();
    let y = &x * &theta + noise * noise_sd;
    let data = Dataset::new(x, y, Task::Regression)?.with_splits(Splits::shuffled(n, seed))?;
    Ok((data, theta))
}

/// Two unit-variance Gaussian classes centered at `±separation/2` along a
/// random unit direction. Labels are balanced and alternate in expectation.
pub fn make_synthetic_blobs(n: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::BadParams("N and D must be at least 1".into()));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::BadParams(format!("separation {separation} must be non-negative")));
    }
    let stream = RngStream::new(seed, 0xb10b);
    let mut rng = stream.split(0).rng(0);
    let mut dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = dir.norm();
    if norm > 0.0 {
        dir /= norm;
    } else {
        dir[0] = 1.0;
    }
    let labels = DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    let mut x = stream.split(1).standard_normals(n, d);
    for i in 0..n {
        let shift = &dir * (labels[i] * separation / 2.0);
        for j in 0..d {
            x[(i, j)] += shift[j];
        }
    }
    Dataset::new(x, labels, Task::Classification)?.with_splits(Splits::shuffled(n, seed))
}
