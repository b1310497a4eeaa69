use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Arg, ArgAction, ArgMatches, Command};
use rayon::prelude::*;
use van::data::fmt17;

use crate::plot::plot_files;
use crate::problem::execute;
use crate::spec::{flag_name, RunSpec, Settings, KEYS};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_MAX_ITERS: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

fn with_keys(mut cmd: Command) -> Command {
    cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("`key = value` file; flags override it"),
    );
    for k in KEYS {
        cmd = cmd.arg(
            Arg::new(k.name)
                .long(flag_name(k.name))
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .help(format!("{} [default: {}]", k.help, k.default)),
        );
    }
    cmd
}

pub fn command() -> Command {
    Command::new("van")
        .about("Variational adaptive-Newton optimizers: runs, comparisons and plots")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            with_keys(Command::new("run").about("Run one configuration and write its trace")).arg(
                Arg::new("dump-config")
                    .long("dump-config")
                    .action(ArgAction::SetTrue)
                    .help("print the resolved configuration and exit"),
            ),
        )
        .subcommand(
            with_keys(Command::new("compare").about("Run several methods on one problem"))
                .arg(
                    Arg::new("methods")
                        .long("methods")
                        .value_name("LIST")
                        .required(true)
                        .help("comma-separated methods"),
                )
                .arg(
                    Arg::new("seeds")
                        .long("seeds")
                        .value_name("LIST")
                        .help("comma-separated seeds (default: the configured seed)"),
                )
                .arg(
                    Arg::new("out-dir")
                        .long("out-dir")
                        .value_name("DIR")
                        .required(true)
                        .help("directory for traces and summary.csv"),
                ),
        )
        .subcommand(
            Command::new("plot")
                .about("Draw trace columns as an SVG line plot")
                .arg(Arg::new("traces").value_name("CSV").num_args(1..).required(true))
                .arg(
                    Arg::new("column")
                        .long("column")
                        .value_name("NAME")
                        .action(ArgAction::Append)
                        .help("column to plot, repeatable [default: f_at_mean]"),
                )
                .arg(Arg::new("log-y").long("log-y").action(ArgAction::SetTrue))
                .arg(Arg::new("out").long("out").value_name("SVG").required(true)),
        )
}

fn settings(m: &ArgMatches) -> Result<Settings> {
    let mut s = Settings::new();
    if let Some(path) = m.get_one::<String>("config") {
        s.merge_file(Path::new(path))?;
    }
    for k in KEYS {
        if let Some(v) = m.get_one::<String>(k.name) {
            s.set(k.name, v)?;
        }
    }
    Ok(s)
}

fn env_seed() -> Option<String> {
    std::env::var("VAN_SEED").ok()
}

fn cmd_run(m: &ArgMatches) -> Result<u8> {
    let spec = RunSpec::resolve(&settings(m)?, env_seed().as_deref())?;
    if m.get_flag("dump-config") {
        print!("{}", spec.dump());
        return Ok(EXIT_OK);
    }
    let report = execute(&spec)?;
    report.write_file(&spec.trace)?;
    println!("{}", report.summary(&spec));
    Ok(if report.converged() { EXIT_OK } else { EXIT_MAX_ITERS })
}

fn list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|e| anyhow::anyhow!("invalid {what} `{t}`: {e}"))
        })
        .collect()
}

struct Row {
    method: String,
    seed: String,
    status: &'static str,
    iters: String,
    stop: String,
    final_value: String,
    test_loss: String,
    wallclock_ns: String,
    error: String,
}

fn compare_one(base: &Settings, method: &str, seed: u64, out_dir: &Path) -> Row {
    let start = Instant::now();
    let trace = out_dir.join(format!("{method}-seed{seed}.csv"));
    let result = (|| {
        let mut s = base.clone();
        s.set("method", method)?;
        s.set("seed", &seed.to_string())?;
        s.set("trace", &trace.display().to_string())?;
        let spec = RunSpec::resolve(&s, None)?;
        let report = execute(&spec)?;
        report.write_file(&spec.trace)?;
        Ok::<_, anyhow::Error>(report)
    })();
    let wallclock_ns = start.elapsed().as_nanos().to_string();
    let mut row = Row {
        method: method.to_string(),
        seed: seed.to_string(),
        status: "ok",
        iters: String::new(),
        stop: String::new(),
        final_value: String::new(),
        test_loss: String::new(),
        wallclock_ns,
        error: String::new(),
    };
    match result {
        Ok(report) => {
            row.iters = report.iterations().to_string();
            row.stop = report.stop_name().to_string();
            row.final_value = report.final_value().map(fmt17).unwrap_or_default();
            row.test_loss = report.test_loss().map(fmt17).unwrap_or_default();
        }
        Err(e) => {
            row.status = "error";
            row.error = format!("{e:#}");
        }
    }
    row
}

fn cmd_compare(m: &ArgMatches) -> Result<u8> {
    let base = settings(m)?;
    let methods: Vec<String> = list(m.get_one::<String>("methods").expect("required"), "method")?;
    let seeds: Vec<u64> = match m.get_one::<String>("seeds") {
        Some(raw) => list(raw, "seed")?,
        None => vec![RunSpec::resolve(&base, env_seed().as_deref())?.seed],
    };
    if methods.len() * seeds.len() < 2 {
        bail!("compare needs at least two runs");
    }
    let out_dir = PathBuf::from(m.get_one::<String>("out-dir").expect("required"));
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let jobs: Vec<(&str, u64)> = methods
        .iter()
        .flat_map(|meth| seeds.iter().map(move |&s| (meth.as_str(), s)))
        .collect();
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(meth, seed)| compare_one(&base, meth, seed, &out_dir))
        .collect();

    let path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "method",
        "seed",
        "status",
        "iters",
        "stop",
        "final_f_at_mean",
        "test_loss",
        "wallclock_ns",
        "error",
    ])?;
    for r in &rows {
        w.write_record([
            &r.method,
            &r.seed,
            r.status,
            &r.iters,
            &r.stop,
            &r.final_value,
            &r.test_loss,
            &r.wallclock_ns,
            &r.error,
        ])?;
        let detail = if r.status == "ok" {
            format!("iters={} stop={} f_at_mean={}", r.iters, r.stop, r.final_value)
        } else {
            format!("error: {}", r.error)
        };
        println!("method={} seed={} {detail}", r.method, r.seed);
    }
    w.flush()?;
    Ok(if rows.iter().any(|r| r.status != "ok") { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_plot(m: &ArgMatches) -> Result<u8> {
    let traces: Vec<PathBuf> = m.get_many::<String>("traces").expect("required").map(PathBuf::from).collect();
    let columns: Vec<String> = match m.get_many::<String>("column") {
        Some(c) => c.cloned().collect(),
        None => vec!["f_at_mean".to_string()],
    };
    let svg = plot_files(&traces, &columns, m.get_flag("log-y"))?;
    let out = m.get_one::<String>("out").expect("required");
    fs::write(out, svg).with_context(|| format!("writing {out}"))?;
    Ok(EXIT_OK)
}

/// Parse `args` and dispatch; usage errors exit with 1.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    let result = match matches.subcommand() {
        Some(("run", m)) => cmd_run(m),
        Some(("compare", m)) => cmd_compare(m),
        Some(("plot", m)) => cmd_plot(m),
        _ => unreachable!("subcommand is required"),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
