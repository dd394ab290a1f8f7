//! The work behind each subcommand. Every command writes its outputs and a
//! `manifest.json` into its output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rodsim_core::trace::Trace;
use rodsim_fling::train::{append_jsonl, quartile_means, write_atomic, write_curve_csv};
use rodsim_fling::{evaluate, train_from, FlingEnv, TrainConfig, TrainState};
use rodsim_validation::report::{strictly_decreasing, write_buckling_summary_csv, write_envelope_csv, write_michell_csv};
use rodsim_validation::{run_helical_buckling, run_michell, BucklingConfig, MichellConfig};

use crate::bench::{run_bench, write_bench_csv, BenchConfig};
use crate::manifest::ManifestBuilder;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid configuration, I/O trouble.
    #[error("{0}")]
    Usage(String),
    /// A run finished but missed a threshold, or could not produce a result.
    #[error("{0}")]
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Gate(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<rodsim_fling::FlingError> for CliError {
    fn from(e: rodsim_fling::FlingError) -> Self {
        match e {
            rodsim_fling::FlingError::Config(_) | rodsim_fling::FlingError::Io(_) => CliError::Usage(e.to_string()),
            other => CliError::Gate(other.to_string()),
        }
    }
}

impl From<rodsim_validation::ValidationError> for CliError {
    fn from(e: rodsim_validation::ValidationError) -> Self {
        use rodsim_validation::ValidationError as V;
        match e {
            V::Config(_) | V::Io(_) => CliError::Usage(e.to_string()),
            other => CliError::Gate(other.to_string()),
        }
    }
}

impl From<rodsim_core::RodError> for CliError {
    fn from(e: rodsim_core::RodError) -> Self {
        match e {
            rodsim_core::RodError::Config(_) | rodsim_core::RodError::Io(_) => CliError::Usage(e.to_string()),
            other => CliError::Gate(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads a JSON configuration; absent path means all defaults.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))
        }
    }
}

fn prepare_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", out.display())))
}

fn create(path: &Path, m: &mut ManifestBuilder) -> CliResult<BufWriter<File>> {
    m.output(path);
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSummary {
    pub passed: bool,
    pub checks: Vec<GateCheck>,
}

impl GateSummary {
    fn new(checks: Vec<GateCheck>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    fn write(&self, out: &Path, m: &mut ManifestBuilder) -> CliResult<()> {
        let path = out.join("summary.json");
        m.output(&path);
        write_atomic(&path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok(())
    }

    pub fn print(&self) {
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            println!("{verdict} {}: {:.6} (threshold {:.6})", c.name, c.value, c.threshold);
        }
    }
}

fn finish(m: ManifestBuilder, out: &Path, config: &impl Serialize, seed: Option<u64>) -> CliResult<()> {
    let manifest = m.finish(serde_json::to_value(config)?, seed);
    manifest.write(&out.join("manifest.json"))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucklingRun {
    #[serde(flatten)]
    pub config: BucklingConfig,
    /// Largest admissible envelope error at the finest resolution.
    pub max_final_error: f64,
}

impl Default for BucklingRun {
    fn default() -> Self {
        Self {
            config: BucklingConfig::default(),
            max_final_error: 0.004,
        }
    }
}

pub fn validate_buckling(run: &BucklingRun, out: &Path, argv: Vec<String>) -> CliResult<GateSummary> {
    prepare_dir(out)?;
    let mut m = ManifestBuilder::start(argv);
    let results = run_helical_buckling(&run.config)?;
    write_envelope_csv(&results, create(&out.join("envelope.csv"), &mut m)?)?;
    write_buckling_summary_csv(&results, create(&out.join("buckling_summary.csv"), &mut m)?)?;
    let errors: Vec<f64> = results.iter().map(|r| r.avg_error).collect();
    let last = results.last().ok_or_else(|| CliError::Usage("no resolutions configured".into()))?;
    let summary = GateSummary::new(vec![
        GateCheck {
            name: "envelope error strictly decreasing with n".into(),
            value: if strictly_decreasing(&errors) { 1.0 } else { 0.0 },
            threshold: 1.0,
            passed: strictly_decreasing(&errors),
        },
        GateCheck {
            name: format!("envelope error at n = {}", last.n),
            value: last.avg_error,
            threshold: run.max_final_error,
            passed: last.avg_error <= run.max_final_error,
        },
    ]);
    summary.write(out, &mut m)?;
    finish(m, out, run, None)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MichellRun {
    #[serde(flatten)]
    pub config: MichellConfig,
    pub ratios: Vec<f64>,
    /// Largest admissible deviation from the closed form (%).
    pub max_deviation_pct: f64,
}

impl Default for MichellRun {
    fn default() -> Self {
        Self {
            config: MichellConfig::default(),
            ratios: vec![0.5, 1.0, 1.5],
            max_deviation_pct: 5.0,
        }
    }
}

pub fn validate_michell(run: &MichellRun, out: &Path, argv: Vec<String>) -> CliResult<GateSummary> {
    prepare_dir(out)?;
    if run.ratios.is_empty() {
        return Err(CliError::Usage("no stiffness ratios configured".into()));
    }
    let mut m = ManifestBuilder::start(argv);
    let results = run_michell(&run.ratios, &run.config)?;
    write_michell_csv(&results, create(&out.join("michell.csv"), &mut m)?)?;
    let summary = GateSummary::new(
        results
            .iter()
            .map(|r| GateCheck {
                name: format!("critical twist deviation at beta/alpha = {}", r.beta_over_alpha),
                value: r.deviation_pct,
                threshold: run.max_deviation_pct,
                passed: r.deviation_pct <= run.max_deviation_pct,
            })
            .collect(),
    );
    summary.write(out, &mut m)?;
    finish(m, out, run, Some(run.config.seed))?;
    Ok(summary)
}

pub fn bench(cfg: &BenchConfig, out: &Path, argv: Vec<String>) -> CliResult<Vec<crate::bench::BenchRow>> {
    if cfg.n_values.is_empty() {
        return Err(CliError::Usage("no rod sizes given".into()));
    }
    prepare_dir(out)?;
    let mut m = ManifestBuilder::start(argv);
    let rows = run_bench(cfg)?;
    write_bench_csv(&rows, create(&out.join("bench.csv"), &mut m)?)?;
    finish(m, out, cfg, None)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FlingRun {
    pub env: FlingEnv,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub episodes: usize,
    pub batches: usize,
    pub best_eval_reward: Option<f64>,
    pub first_quartile_mean: Option<f64>,
    pub final_quartile_mean: Option<f64>,
    pub episode_errors: usize,
}

pub fn fling_train(run: &FlingRun, resume: Option<&Path>, out: &Path, argv: Vec<String>) -> CliResult<TrainSummary> {
    run.env.validate()?;
    run.train.validate()?;
    prepare_dir(out)?;
    let mut m = ManifestBuilder::start(argv);
    let state = match resume {
        Some(p) => TrainState::load(p).map_err(|e| CliError::Usage(format!("cannot resume from {}: {e}", p.display())))?,
        None => TrainState::new(&run.env, &run.train),
    };
    let ckpt = out.join("checkpoint.json");
    let log = out.join("episodes.jsonl");
    if resume.is_none() && log.exists() {
        std::fs::remove_file(&log)?;
    }
    m.output(&ckpt);
    m.output(&log);
    let output = train_from(&run.env, &run.train, state, &mut |s, records| {
        append_jsonl(records, &log)?;
        s.save(&ckpt)
    })?;
    output.state.save(&ckpt)?;
    let curve = out.join("learning_curve.csv");
    m.output(&curve);
    write_curve_csv(&output.state.curve, &curve)?;
    let q = quartile_means(&output.state.curve);
    let summary = TrainSummary {
        episodes: output.state.episodes_done,
        batches: output.state.curve.len(),
        best_eval_reward: output.state.best_eval_reward,
        first_quartile_mean: q.map(|q| q.0),
        final_quartile_mean: q.map(|q| q.1),
        episode_errors: output.state.episode_errors,
    };
    let path = out.join("train_summary.json");
    m.output(&path);
    write_atomic(&path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    finish(m, out, run, Some(run.train.seed))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub export_traces: bool,
    /// Exit with a gate failure below this success rate.
    pub min_success: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub success_rate: f64,
    pub mean_reward: f64,
    pub episodes: Vec<EvalLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalLine {
    pub alpha: f64,
    pub beta: f64,
    pub reward: f64,
    pub min_d_err: f64,
    pub success: bool,
    pub diverged: bool,
    pub trace: Option<PathBuf>,
}

pub fn fling_eval(
    run: &FlingRun,
    checkpoint: &Path,
    opts: &EvalOptions,
    out: &Path,
    argv: Vec<String>,
) -> CliResult<EvalSummary> {
    run.env.validate()?;
    if let Some(f) = opts.min_success {
        if !(0.0..=1.0).contains(&f) {
            return Err(CliError::Usage(format!("success floor {f} is not in [0, 1]")));
        }
    }
    let state = TrainState::load(checkpoint)
        .map_err(|e| CliError::Usage(format!("cannot read checkpoint {}: {e}", checkpoint.display())))?;
    prepare_dir(out)?;
    let mut m = ManifestBuilder::start(argv);
    let report = evaluate(
        &state.best_policy,
        &run.env,
        &run.train,
        opts.episodes,
        opts.deterministic,
        opts.seed,
        opts.export_traces,
    )?;
    let trace_dir = out.join("traces");
    if opts.export_traces {
        prepare_dir(&trace_dir)?;
    }
    let mut lines = Vec::new();
    for (i, e) in report.episodes.iter().enumerate() {
        let trace = if opts.export_traces {
            let path = trace_dir.join(format!("episode_{i:03}.csv"));
            e.result.trace.save_csv(&path)?;
            m.output(&path);
            Some(path)
        } else {
            None
        };
        lines.push(EvalLine {
            alpha: e.alpha,
            beta: e.beta,
            reward: e.result.reward,
            min_d_err: e.result.min_d_err,
            success: e.result.success,
            diverged: e.result.diverged,
            trace,
        });
    }
    let summary = EvalSummary {
        success_rate: report.success_rate,
        mean_reward: report.mean_reward,
        episodes: lines,
    };
    let path = out.join("eval.json");
    m.output(&path);
    write_atomic(&path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    #[derive(Serialize)]
    struct Snapshot<'a> {
        run: &'a FlingRun,
        checkpoint: &'a Path,
        options: &'a EvalOptions,
    }
    finish(
        m,
        out,
        &Snapshot {
            run,
            checkpoint,
            options: opts,
        },
        Some(opts.seed),
    )?;
    if let Some(floor) = opts.min_success {
        if summary.success_rate < floor {
            return Err(CliError::Gate(format!(
                "success rate {:.3} below the floor {floor:.3}",
                summary.success_rate
            )));
        }
    }
    Ok(summary)
}

/// Converts a CSV trace to `format` (`csv` or `obj`) in `out`; returns the
/// written file.
pub fn export(trace: &Path, format: &str, out: &Path, argv: Vec<String>) -> CliResult<PathBuf> {
    let ext = match format {
        "csv" | "obj" => format,
        other => return Err(CliError::Usage(format!("unknown export format '{other}' (expected csv or obj)"))),
    };
    let t = Trace::load_csv(trace).map_err(|e| CliError::Usage(format!("cannot read trace {}: {e}", trace.display())))?;
    prepare_dir(out)?;
    let mut m = ManifestBuilder::start(argv);
    let stem = trace.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
    let path = out.join(format!("{stem}.{ext}"));
    if ext == "csv" {
        t.save_csv(&path)?;
    } else {
        t.save_obj(&path)?;
    }
    m.output(&path);
    #[derive(Serialize)]
    struct Snapshot<'a> {
        trace: &'a Path,
        format: &'a str,
        frames: usize,
    }
    finish(
        m,
        out,
        &Snapshot {
            trace,
            format,
            frames: t.len(),
        },
        None,
    )?;
    Ok(path)
}
