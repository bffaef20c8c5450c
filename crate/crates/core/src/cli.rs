//! The `scenario-cert` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure. Every command that writes files writes them atomically inside
//! `--out` and records a `manifest.json` from which `replay` re-runs it.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::aggregative::AggregativeError;
use crate::certificates::{epsilon_explicit, sample_size, Certificate, CertificateError, CertificateKind};
use crate::evstudy::{run_cost_cell, run_feasibility_experiment, EVCostConfig, EVFeasibilityConfig, EvError};
use crate::geometry::Polytope;
use crate::scenario::{assemble, certify_set, estimate_set_violation_blocks, ScenarioError, ThresholdSampler};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "SCENARIO_CERT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<CertificateError> for CliError {
    fn from(e: CertificateError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Certificate(c) => c.into(),
            ScenarioError::DimensionMismatch { .. } | ScenarioError::UnboundedBase | ScenarioError::Sampler(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<EvError> for CliError {
    fn from(e: EvError) -> Self {
        match e {
            EvError::InfeasibleSampleConfig(_) | EvError::Domain(_) => CliError::Usage(e.to_string()),
            EvError::Certificate(c) => c.into(),
            EvError::Scenario(s) => s.into(),
            EvError::Aggregative(a) => match a {
                AggregativeError::DimensionMismatch { .. } | AggregativeError::InvalidCost(_) => {
                    CliError::Usage(a.to_string())
                }
                other => CliError::Numeric(other.to_string()),
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "scenario-cert", version, about = "Scenario-approach feasibility certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Posteriori,
    Apriori,
    Explicit,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a certificate for given (M, beta, k | dim).
    Epsilon {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long = "M")]
        m: u64,
        #[arg(long)]
        beta: f64,
        /// Support cardinality (posteriori mode).
        #[arg(long)]
        k: Option<u64>,
        /// Support-rank bound (apriori and explicit modes).
        #[arg(long)]
        dim: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble scenario sets, certify them and estimate their violation.
    CertifySet {
        #[arg(long)]
        config: PathBuf,
        /// One or more sample sizes, comma separated.
        #[arg(long = "M", value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long = "M-test")]
        m_test: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "k-override")]
        k_override: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve minimax charging programs and measure cost deterioration.
    CertifySolution {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "N-list", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "M-test")]
        m_test: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample sizes under the rank bound (dim = n) and the naive bound (dim = nN).
    SampleSize {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n: u64,
        #[arg(long = "N-list", value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Write into this directory instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
    /// Arguments after the program name, verbatim.
    pub args: Vec<String>,
}

/// Collects files and commits them atomically into the output directory.
struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_owned(), bytes));
    }

    fn add_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Numeric(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
        self.add(name, bytes);
        Ok(())
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    fn commit(mut self, mut manifest: RunManifest, started: Instant) -> Result<(), CliError> {
        manifest.outputs = self.files.iter().map(|f| f.0.clone()).collect();
        manifest.duration_secs = started.elapsed().as_secs_f64();
        let m = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
        self.files.push(("manifest.json".into(), m));
        fs::create_dir_all(&self.dir)?;
        for (name, bytes) in &self.files {
            write_atomic(&self.dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn check_beta(beta: f64) -> Result<(), CliError> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--beta must lie in (0,1), got {beta}")))
    }
}

fn read_config(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))
}

/// A raw sampler config: deterministic base set plus threshold constraints.
#[derive(Debug, Deserialize)]
struct RawSetConfig {
    base: Polytope,
    sampler: ThresholdSampler,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Serialize)]
struct RawSetRow {
    #[serde(rename = "M")]
    m: usize,
    k_used: usize,
    epsilon_theory: f64,
    epsilon_empirical: f64,
    hits: u64,
    trials: u64,
    beta: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct BlockRow {
    #[serde(rename = "M")]
    m: usize,
    trial_block: usize,
    hits: u64,
    trials: u64,
    frequency: f64,
    seed: u64,
    namespace: String,
}

#[derive(Debug, Serialize)]
struct SolutionRow {
    #[serde(rename = "N")]
    agents: usize,
    repeat: usize,
    empirical_violation: Option<f64>,
    epsilon_theory: f64,
    hits: Option<u64>,
    trials: u64,
    value: Option<f64>,
    gap: Option<f64>,
    seed: u64,
    status: String,
}

#[derive(Debug, Serialize)]
struct SampleSizeRow {
    #[serde(rename = "N")]
    agents: u64,
    #[serde(rename = "M_rank_bound")]
    m_rank_bound: u64,
    #[serde(rename = "M_naive")]
    m_naive: u64,
}

fn manifest(command: &str, config: Option<&Path>, seed: Option<u64>, args: &[String]) -> RunManifest {
    RunManifest {
        command: command.to_owned(),
        config: config.map(|p| p.display().to_string()),
        seed,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        outputs: Vec::new(),
        duration_secs: 0.0,
        args: args.to_vec(),
    }
}

fn cmd_epsilon(mode: Mode, m: u64, beta: f64, k: Option<u64>, dim: Option<u64>) -> Result<Certificate, CliError> {
    check_beta(beta)?;
    match mode {
        Mode::Posteriori => {
            let k = k.ok_or_else(|| CliError::Usage("--k is required in posteriori mode".into()))?;
            Ok(Certificate::posteriori(m, k, beta)?)
        }
        Mode::Apriori => {
            let d = dim.ok_or_else(|| CliError::Usage("--dim is required in apriori mode".into()))?;
            Ok(Certificate::apriori(m, d, beta)?)
        }
        Mode::Explicit => {
            let d = dim.ok_or_else(|| CliError::Usage("--dim is required in explicit mode".into()))?;
            if m == 0 {
                return Err(CliError::Usage("--M must be positive".into()));
            }
            let epsilon = epsilon_explicit(m, beta, d);
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(CliError::Usage(format!("explicit bound {epsilon} lies outside [0,1]")));
            }
            Ok(Certificate {
                kind: CertificateKind::APrioriPoint,
                m,
                k: d,
                epsilon,
                beta,
            })
        }
    }
}

fn run_command(cmd: Command, args: &[String], stdout: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    match cmd {
        Command::Epsilon { mode, m, beta, k, dim, out } => {
            let cert = cmd_epsilon(mode, m, beta, k, dim)?;
            let json = serde_json::to_string(&cert).map_err(|e| CliError::Numeric(e.to_string()))?;
            writeln!(stdout, "{json}")?;
            if let Some(dir) = out {
                let mut o = OutputSet::new(&dir);
                o.add_json("certificate.json", &cert)?;
                o.commit(manifest("epsilon", None, None, args), started)?;
            }
            Ok(())
        }
        Command::CertifySet {
            config,
            m,
            m_test,
            beta,
            seed,
            k_override,
            out,
        } => {
            check_beta(beta)?;
            let value = read_config(&config)?;
            let mut o = OutputSet::new(&out);
            let mut certs = Vec::new();
            let mut block_rows = Vec::new();
            let used_seed;
            if value.get("sampler").is_some() {
                let raw: RawSetConfig =
                    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
                used_seed = seed.unwrap_or(raw.seed);
                let mut rows = Vec::new();
                for &mm in &m {
                    let sfs = assemble(&raw.base, &raw.sampler, mm, used_seed)?;
                    let cert = certify_set(&sfs, beta, k_override)?;
                    let run = estimate_set_violation_blocks(&sfs, &raw.sampler, m_test, used_seed)?;
                    rows.push(RawSetRow {
                        m: mm,
                        k_used: cert.k as usize,
                        epsilon_theory: cert.epsilon,
                        epsilon_empirical: run.estimate.frequency,
                        hits: run.estimate.hits,
                        trials: run.estimate.trials,
                        beta,
                        seed: used_seed,
                    });
                    block_rows.extend(run.blocks.into_iter().map(|b| block_row(mm, b)));
                    certs.push(cert);
                }
                o.add_csv("rows.csv", &rows)?;
            } else {
                let mut cfg: EVFeasibilityConfig =
                    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                used_seed = cfg.seed;
                let run = run_feasibility_experiment(&cfg, &m, m_test, beta, k_override)?;
                for r in &run.rows {
                    certs.push(Certificate {
                        kind: CertificateKind::APosterioriSet,
                        m: r.m as u64,
                        k: r.k_used as u64,
                        epsilon: r.epsilon_theory,
                        beta,
                    });
                }
                for (mm, blocks) in run.blocks {
                    block_rows.extend(blocks.into_iter().map(|b| block_row(mm, b)));
                }
                o.add_csv("rows.csv", &run.rows)?;
            }
            o.add_csv("blocks.csv", &block_rows)?;
            o.add_json("certificates.json", &certs)?;
            o.commit(manifest("certify-set", Some(&config), Some(used_seed), args), started)
        }
        Command::CertifySolution {
            config,
            n_list,
            m,
            m_test,
            beta,
            repeats,
            seed,
            out,
        } => {
            check_beta(beta)?;
            if m == 0 {
                return Err(CliError::Usage("--M must be positive".into()));
            }
            let value = read_config(&config)?;
            let mut cfg: EVCostConfig =
                serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let cells: Vec<(usize, usize)> = n_list
                .iter()
                .flat_map(|&a| (0..repeats).map(move |r| (a, r)))
                .collect();
            use rayon::prelude::*;
            let results: Vec<_> = cells
                .par_iter()
                .map(|&(a, r)| (a, r, run_cost_cell(&cfg, a, r, m, m_test, beta)))
                .collect();
            let theory = epsilon_explicit(m as u64, beta, cfg.n as u64);
            let mut rows = Vec::new();
            let mut failure: Option<CliError> = None;
            for (a, r, res) in results {
                match res {
                    Ok((row, _)) => rows.push(SolutionRow {
                        agents: a,
                        repeat: r,
                        empirical_violation: Some(row.empirical_violation),
                        epsilon_theory: row.epsilon_theory,
                        hits: Some(row.hits),
                        trials: row.trials,
                        value: Some(row.value),
                        gap: Some(row.gap),
                        seed: row.seed,
                        status: "ok".into(),
                    }),
                    Err(EvError::Aggregative(AggregativeError::IterationLimit { .. })) => {
                        rows.push(SolutionRow {
                            agents: a,
                            repeat: r,
                            empirical_violation: None,
                            epsilon_theory: theory,
                            hits: None,
                            trials: m_test as u64,
                            value: None,
                            gap: None,
                            seed: crate::evstudy::cell_seed(cfg.seed, a, r),
                            status: "iteration_limit".into(),
                        });
                        failure.get_or_insert(CliError::Numeric(format!("iteration limit in cell N={a}, repeat={r}")));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let mut o = OutputSet::new(&out);
            o.add_csv("rows.csv", &rows)?;
            o.commit(manifest("certify-solution", Some(&config), Some(cfg.seed), args), started)?;
            match failure {
                Some(e) => Err(e),
                None => Ok(()),
            }
        }
        Command::SampleSize {
            eps,
            beta,
            n,
            n_list,
            out,
        } => {
            check_beta(beta)?;
            if !(eps > 0.0 && eps < 1.0) {
                return Err(CliError::Usage(format!("--eps must lie in (0,1), got {eps}")));
            }
            let red = sample_size(eps, beta, n)?;
            let rows: Vec<SampleSizeRow> = n_list
                .iter()
                .map(|&a| {
                    Ok(SampleSizeRow {
                        agents: a,
                        m_rank_bound: red,
                        m_naive: sample_size(eps, beta, n * a)?,
                    })
                })
                .collect::<Result<_, CliError>>()?;
            let mut o = OutputSet::new(out.as_deref().unwrap_or(Path::new(".")));
            o.add_csv("sample_size.csv", &rows)?;
            stdout.write_all(&o.files[0].1)?;
            if out.is_some() {
                o.commit(manifest("sample-size", None, None, args), started)?;
            }
            Ok(())
        }
        Command::Replay { manifest: path, out } => {
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
            let man: RunManifest =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid manifest: {e}")))?;
            let mut args = man.args.clone();
            if let Some(dir) = out {
                let dir = dir.display().to_string();
                match args.iter().position(|a| a == "--out") {
                    Some(i) if i + 1 < args.len() => args[i + 1] = dir,
                    _ => {
                        if let Some(a) = args.iter_mut().find(|a| a.starts_with("--out=")) {
                            *a = format!("--out={dir}");
                        } else {
                            args.push("--out".into());
                            args.push(dir);
                        }
                    }
                }
            }
            let mut argv = vec!["scenario-cert".to_owned()];
            argv.extend(args.iter().cloned());
            let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(e.to_string()))?;
            if matches!(cli.command, Command::Replay { .. }) {
                return Err(CliError::Usage("a manifest cannot replay another replay".into()));
            }
            run_command(cli.command, &args, stdout)
        }
    }
}

fn block_row(m: usize, b: crate::scenario::TrialBlock) -> BlockRow {
    BlockRow {
        m,
        trial_block: b.trial_block,
        hits: b.hits,
        trials: b.trials,
        frequency: b.frequency,
        seed: b.seed,
        namespace: b.namespace,
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Usage(format!("{THREADS_ENV} must be positive")));
        }
        // a second initialization (e.g. in tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(stderr, "error: {e}");
        return e.exit_code();
    }
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run_command(cli.command, &args, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["scenario-cert"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn explicit_epsilon() {
        let (code, out, _) = run_capture(&["epsilon", "--mode", "explicit", "--M", "500", "--beta", "1e-6", "--dim", "12"]);
        assert_eq!(code, 0);
        let c: Certificate = serde_json::from_str(out.trim()).unwrap();
        assert!((c.epsilon - 0.0885).abs() < 1e-4);
    }

    #[test]
    fn posteriori_full_support() {
        let (code, out, _) = run_capture(&["epsilon", "--mode", "posteriori", "--M", "40", "--beta", "0.01", "--k", "40"]);
        assert_eq!(code, 0);
        assert!(out.contains(r#""epsilon":1.0"#));
    }

    #[test]
    fn apriori_dim_zero() {
        let (code, out, _) = run_capture(&["epsilon", "--mode", "apriori", "--M", "100", "--beta", "0.01", "--dim", "0"]);
        assert_eq!(code, 0);
        let c: Certificate = serde_json::from_str(out.trim()).unwrap();
        assert!((c.epsilon - 0.045007).abs() < 1e-6);
    }

    #[test]
    fn domain_errors_exit_two() {
        let (code, _, err) = run_capture(&["epsilon", "--mode", "posteriori", "--M", "10", "--beta", "2", "--k", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("beta"));
        let (code, _, _) = run_capture(&["epsilon", "--mode", "posteriori", "--M", "10", "--beta", "0.1", "--k", "11"]);
        assert_eq!(code, 2);
        let (code, _, _) = run_capture(&["sample-size", "--eps", "1", "--beta", "0.1", "--n", "2", "--N-list", "1"]);
        assert_eq!(code, 2);
        let (code, _, _) = run_capture(&["no-such-command"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn sample_size_single_agent_columns_coincide() {
        let (code, out, _) = run_capture(&["sample-size", "--eps", "0.1", "--beta", "0.01", "--n", "3", "--N-list", "1,2"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "N,M_rank_bound,M_naive");
        let f: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(f[1], f[2]);
    }

    #[test]
    fn missing_config_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let (code, _, _) = run_capture(&[
            "certify-set",
            "--config",
            dir.path().join("absent.json").to_str().unwrap(),
            "--M",
            "10",
            "--M-test",
            "10",
            "--beta",
            "0.1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
        assert!(!out.exists());
    }
}
