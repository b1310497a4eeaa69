//! Run configurations: a flat `key = value` table shared by config files
//! and command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use van::active::{Acquisition, ActiveConfig};
use van::optim::{BatchSize, EstimatorChoice, Method, OptimizerConfig, Safeguard, Schedule};

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const KEYS: &[Key] = &[
    key("problem", "quadratic", "sinc, quadratic, lasso, logistic, vi-logistic or active-logistic"),
    key("method", "van", "van, van-natural, vag, van-d, vag-d, vsgd, newton, adagrad or iridge"),
    key("step", "auto", "initial step size (auto picks the method default)"),
    key("schedule", "constant", "constant or decay"),
    key("decay_power", "0.55", "exponent of the decaying schedule"),
    key("estimator", "auto", "auto, mc, exact or quadrature"),
    key("quadrature_order", "20", "Gauss-Hermite order for the quadrature estimator"),
    key("samples", "1", "Monte-Carlo draws per iteration"),
    key("max_iters", "10000", "iteration budget"),
    key("tol_grad", "1e-6", "stop when the averaged gradient norm drops below this"),
    key("tol_step", "1e-10", "stop when the mean moves less than this"),
    key("seed", "0", "random seed (falls back to VAN_SEED)"),
    key("batch_size", "full", "full or a minibatch size"),
    key("safeguard", "backtrack", "backtrack or eigen-floor"),
    key("eigen_floor", "1e-8", "eigenvalue floor for the eigen-floor safeguard"),
    key("mu0", "zeros", "starting mean: zeros, one value, or a comma-separated vector"),
    key("sigma0", "1", "starting standard deviation"),
    key("record_wallclock", "false", "record wallclock time in the trace"),
    key("adagrad_eps", "1e-8", "AdaGrad denominator offset"),
    key("iridge_floor", "1e-8", "iRidge weight floor"),
    key("data", "synthetic", "LIBSVM file, or synthetic"),
    key("standardize", "false", "standardize features with training statistics"),
    key("n", "500", "synthetic example count"),
    key("dim", "10", "dimension of synthetic and quadratic problems"),
    key("sparsity", "0.3", "fraction of nonzero synthetic regression coefficients"),
    key("noise", "1", "synthetic regression noise standard deviation"),
    key("separation", "2", "distance between synthetic class centers"),
    key("condition", "10", "condition number of the quadratic problem"),
    key("data_seed", "0", "seed of the synthetic generator and the split"),
    key("reg", "1", "regularization strength"),
    key("trace", "trace.csv", "output CSV path"),
    key("rounds", "10", "active learning rounds"),
    key("acquire", "10", "points acquired per active learning round"),
    key("steps_per_round", "1", "VAN steps per active learning round"),
    key("predictive_samples", "100", "draws for predictive probabilities"),
    key("acquisition", "entropy", "entropy or uniform"),
    key("replace", "false", "keep acquired points in the pool"),
];

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// Raw settings, one optional string per entry of [`KEYS`].
#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: Vec<Option<String>>,
}

impl Settings {
    pub fn new() -> Self {
        Self {
            values: vec![None; KEYS.len()],
        }
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let idx = KEYS
            .iter()
            .position(|k| k.name == name)
            .ok_or_else(|| anyhow!("unknown key `{name}`"))?;
        self.values[idx] = Some(value.trim().to_string());
        Ok(())
    }

    pub fn is_set(&self, name: &str) -> bool {
        KEYS.iter()
            .position(|k| k.name == name)
            .is_some_and(|i| self.values[i].is_some())
    }

    fn get(&self, name: &str) -> &str {
        let i = KEYS.iter().position(|k| k.name == name).expect("known key");
        self.values[i].as_deref().unwrap_or(KEYS[i].default)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (line, k, v) in parse_config(&text).with_context(|| format!("in {}", path.display()))? {
            self.set(&k, &v).with_context(|| format!("{}:{line}", path.display()))?;
        }
        Ok(())
    }
}

/// `(line, key, value)` for every assignment in a config file.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Sinc,
    Quadratic,
    Lasso,
    Logistic,
    ViLogistic,
    ActiveLogistic,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Sinc => "sinc",
            Problem::Quadratic => "quadratic",
            Problem::Lasso => "lasso",
            Problem::Logistic => "logistic",
            Problem::ViLogistic => "vi-logistic",
            Problem::ActiveLogistic => "active-logistic",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Problem::Sinc,
            Problem::Quadratic,
            Problem::Lasso,
            Problem::Logistic,
            Problem::ViLogistic,
            Problem::ActiveLogistic,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub problem: Problem,
    pub method: Method,
    pub step: f64,
    pub schedule: Schedule,
    pub estimator: EstimatorChoice,
    pub samples: usize,
    pub max_iters: usize,
    pub tol_grad: f64,
    pub tol_step: f64,
    pub seed: u64,
    pub batch_size: BatchSize,
    pub safeguard: Safeguard,
    pub mu0: Option<Vec<f64>>,
    pub sigma0: f64,
    pub record_wallclock: bool,
    pub adagrad_eps: f64,
    pub iridge_floor: f64,
    pub data: Option<PathBuf>,
    pub standardize: bool,
    pub n: usize,
    pub dim: usize,
    pub sparsity: f64,
    pub noise: f64,
    pub separation: f64,
    pub condition: f64,
    pub data_seed: u64,
    pub reg: f64,
    pub trace: PathBuf,
    pub rounds: usize,
    pub acquire: usize,
    pub steps_per_round: usize,
    pub predictive_samples: usize,
    pub acquisition: Acquisition,
    pub replace: bool,
}

fn num<T: std::str::FromStr>(s: &Settings, name: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    let raw = s.get(name);
    raw.parse()
        .map_err(|e| anyhow!("invalid value `{raw}` for {name}: {e}"))
}

fn boolean(s: &Settings, name: &str) -> Result<bool> {
    match s.get(name) {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => bail!("invalid value `{other}` for {name}: expected true or false"),
    }
}

fn choice<T>(s: &Settings, name: &str, options: &[(&str, T)]) -> Result<T>
where
    T: Copy,
{
    let raw = s.get(name);
    options
        .iter()
        .find(|(n, _)| *n == raw)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            anyhow!("invalid value `{raw}` for {name}: expected one of {}", names.join(", "))
        })
}

impl RunSpec {
    /// Resolve settings against defaults; `env_seed` is used when no seed was given.
    pub fn resolve(s: &Settings, env_seed: Option<&str>) -> Result<Self> {
        let problem = Problem::parse(s.get("problem")).ok_or_else(|| anyhow!("unknown problem `{}`", s.get("problem")))?;
        let method = Method::parse(s.get("method")).ok_or_else(|| anyhow!("unknown method `{}`", s.get("method")))?;
        let step = match s.get("step") {
            "auto" => method.default_step(),
            _ => num(s, "step")?,
        };
        let schedule = match choice(s, "schedule", &[("constant", false), ("decay", true)])? {
            false => Schedule::Constant(step),
            true => Schedule::Decay {
                beta0: step,
                power: num(s, "decay_power")?,
            },
        };
        let order: usize = num(s, "quadrature_order")?;
        let estimator = match s.get("estimator") {
            "auto" if problem == Problem::ActiveLogistic => EstimatorChoice::Quadrature { order },
            "auto" => OptimizerConfig::new(method).estimator,
            "mc" => EstimatorChoice::MonteCarlo,
            "exact" => EstimatorChoice::Exact,
            "quadrature" => EstimatorChoice::Quadrature { order },
            other => bail!("invalid value `{other}` for estimator: expected auto, mc, exact or quadrature"),
        };
        let seed = if s.is_set("seed") {
            num(s, "seed")?
        } else if let Some(v) = env_seed {
            v.trim()
                .parse()
                .map_err(|e| anyhow!("invalid VAN_SEED `{v}`: {e}"))?
        } else {
            num(s, "seed")?
        };
        let batch_size = match s.get("batch_size") {
            "full" => BatchSize::Full,
            _ => BatchSize::Size(num(s, "batch_size")?),
        };
        let safeguard = match s.get("safeguard") {
            "backtrack" => Safeguard::Backtrack,
            "eigen-floor" => Safeguard::EigenFloor(num(s, "eigen_floor")?),
            other => bail!("invalid value `{other}` for safeguard: expected backtrack or eigen-floor"),
        };
        let mu0 = match s.get("mu0") {
            "zeros" => None,
            raw => Some(
                raw.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| anyhow!("invalid value `{raw}` for mu0: {e}")))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let data = match s.get("data") {
            "synthetic" => None,
            path => Some(PathBuf::from(path)),
        };
        let spec = Self {
            problem,
            method,
            step,
            schedule,
            estimator,
            samples: num(s, "samples")?,
            max_iters: num(s, "max_iters")?,
            tol_grad: num(s, "tol_grad")?,
            tol_step: num(s, "tol_step")?,
            seed,
            batch_size,
            safeguard,
            mu0,
            sigma0: num(s, "sigma0")?,
            record_wallclock: boolean(s, "record_wallclock")?,
            adagrad_eps: num(s, "adagrad_eps")?,
            iridge_floor: num(s, "iridge_floor")?,
            data,
            standardize: boolean(s, "standardize")?,
            n: num(s, "n")?,
            dim: num(s, "dim")?,
            sparsity: num(s, "sparsity")?,
            noise: num(s, "noise")?,
            separation: num(s, "separation")?,
            condition: num(s, "condition")?,
            data_seed: num(s, "data_seed")?,
            reg: num(s, "reg")?,
            trace: PathBuf::from(s.get("trace")),
            rounds: num(s, "rounds")?,
            acquire: num(s, "acquire")?,
            steps_per_round: num(s, "steps_per_round")?,
            predictive_samples: num(s, "predictive_samples")?,
            acquisition: choice(s, "acquisition", &[("entropy", Acquisition::Entropy), ("uniform", Acquisition::Uniform)])?,
            replace: boolean(s, "replace")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(path) = &self.data {
            if !path.is_file() {
                bail!("data file {} does not exist", path.display());
            }
            if matches!(self.problem, Problem::Sinc | Problem::Quadratic) {
                bail!("problem {} does not read data", self.problem);
            }
        }
        if self.problem == Problem::ActiveLogistic && self.method != Method::Van {
            bail!("active learning runs van, not {}", self.method.name());
        }
        if !(self.condition >= 1.0) {
            bail!("condition must be at least 1");
        }
        self.optimizer_config().validate()?;
        Ok(())
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            method: self.method,
            schedule: self.schedule,
            mc_samples: self.samples,
            estimator: self.estimator,
            max_iters: self.max_iters,
            tol_grad: self.tol_grad,
            tol_step: self.tol_step,
            seed: self.seed,
            minibatch: self.batch_size,
            safeguard: self.safeguard,
            adagrad_eps: self.adagrad_eps,
            iridge_floor: self.iridge_floor,
            record_wallclock: self.record_wallclock,
            mean0: None,
            sigma0: self.sigma0,
        }
    }

    /// Starting mean for a problem of dimension `d`.
    pub fn start(&self, d: usize) -> Result<Option<DVector<f64>>> {
        match &self.mu0 {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(DVector::from_element(d, v[0]))),
            Some(v) if v.len() == d => Ok(Some(DVector::from_column_slice(v))),
            Some(v) => bail!("mu0 has {} entries but the problem has dimension {d}", v.len()),
        }
    }

    pub fn active_config(&self) -> ActiveConfig {
        ActiveConfig {
            reg_strength: self.reg,
            beta: self.step,
            estimator: self.estimator,
            mc_samples: self.samples,
            batch_size: self.acquire,
            rounds: self.rounds,
            steps_per_round: self.steps_per_round,
            predictive_samples: self.predictive_samples,
            replace: self.replace,
            acquisition: self.acquisition,
            seed: self.seed,
            sigma0: self.sigma0,
        }
    }

    /// Fully resolved `key = value` lines, readable back as a config file.
    pub fn dump(&self) -> String {
        let (schedule, power) = match self.schedule {
            Schedule::Constant(_) => ("constant", Schedule::DEFAULT_POWER),
            Schedule::Decay { power, .. } => ("decay", power),
        };
        let (estimator, order) = match self.estimator {
            EstimatorChoice::MonteCarlo => ("mc", 20),
            EstimatorChoice::Exact => ("exact", 20),
            EstimatorChoice::Quadrature { order } => ("quadrature", order),
        };
        let (safeguard, floor) = match self.safeguard {
            Safeguard::Backtrack => ("backtrack", 1e-8),
            Safeguard::EigenFloor(f) => ("eigen-floor", f),
        };
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let values: Vec<(&str, String)> = vec![
            ("problem", self.problem.name().into()),
            ("method", self.method.name().into()),
            ("step", self.step.to_string()),
            ("schedule", schedule.into()),
            ("decay_power", power.to_string()),
            ("estimator", estimator.into()),
            ("quadrature_order", order.to_string()),
            ("samples", self.samples.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("tol_grad", self.tol_grad.to_string()),
            ("tol_step", self.tol_step.to_string()),
            ("seed", self.seed.to_string()),
            (
                "batch_size",
                match self.batch_size {
                    BatchSize::Full => "full".into(),
                    BatchSize::Size(m) => m.to_string(),
                },
            ),
            ("safeguard", safeguard.into()),
            ("eigen_floor", floor.to_string()),
            ("mu0", self.mu0.as_deref().map_or("zeros".into(), join)),
            ("sigma0", self.sigma0.to_string()),
            ("record_wallclock", self.record_wallclock.to_string()),
            ("adagrad_eps", self.adagrad_eps.to_string()),
            ("iridge_floor", self.iridge_floor.to_string()),
            ("data", self.data.as_ref().map_or("synthetic".into(), |p| p.display().to_string())),
            ("standardize", self.standardize.to_string()),
            ("n", self.n.to_string()),
            ("dim", self.dim.to_string()),
            ("sparsity", self.sparsity.to_string()),
            ("noise", self.noise.to_string()),
            ("separation", self.separation.to_string()),
            ("condition", self.condition.to_string()),
            ("data_seed", self.data_seed.to_string()),
            ("reg", self.reg.to_string()),
            ("trace", self.trace.display().to_string()),
            ("rounds", self.rounds.to_string()),
            ("acquire", self.acquire.to_string()),
            ("steps_per_round", self.steps_per_round.to_string()),
            ("predictive_samples", self.predictive_samples.to_string()),
            (
                "acquisition",
                match self.acquisition {
                    Acquisition::Entropy => "entropy".into(),
                    Acquisition::Uniform => "uniform".into(),
                },
            ),
            ("replace", self.replace.to_string()),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let parsed = parse_config("# header\n\nmethod = newton # inline\n  step=0.5\n").unwrap();
        assert_eq!(
            parsed,
            vec![(3, "method".into(), "newton".into()), (4, "step".into(), "0.5".into())]
        );
        assert!(parse_config("method newton\n").is_err());
    }

    #[test]
    fn dump_lists_every_key_in_order() {
        let spec = RunSpec::resolve(&Settings::new(), None).unwrap();
        let dumped = spec.dump();
        let keys: Vec<String> = parse_config(&dumped).unwrap().into_iter().map(|(_, k, _)| k).collect();
        let expected: Vec<&str> = KEYS.iter().map(|k| k.name).collect();
        assert_eq!(keys, expected);
    }

    #[test]
    fn dump_round_trips() {
        let mut s = Settings::new();
        for (k, v) in [("problem", "lasso"), ("schedule", "decay"), ("mu0", "0.5,-1"), ("safeguard", "eigen-floor"), ("batch_size", "32")] {
            s.set(k, v).unwrap();
        }
        s.set("dim", "2").unwrap();
        let spec = RunSpec::resolve(&s, None).unwrap();
        let mut again = Settings::new();
        for (_, k, v) in parse_config(&spec.dump()).unwrap() {
            again.set(&k, &v).unwrap();
        }
        assert_eq!(RunSpec::resolve(&again, None).unwrap(), spec);
    }

    #[test]
    fn seed_fallback_only_when_unset() {
        let mut s = Settings::new();
        assert_eq!(RunSpec::resolve(&s, Some("41")).unwrap().seed, 41);
        s.set("seed", "3").unwrap();
        assert_eq!(RunSpec::resolve(&s, Some("41")).unwrap().seed, 3);
        assert!(RunSpec::resolve(&Settings::new(), Some("x")).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(Settings::new().set("colour", "red").is_err());
        let mut s = Settings::new();
        s.set("method", "lbfgs").unwrap();
        assert!(RunSpec::resolve(&s, None).is_err());
    }
}
