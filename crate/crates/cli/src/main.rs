//! `ssvep`: synthesize datasets, run and grid-search pipeline
//! configurations, and render reports.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime error
//! or failed fold.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssvep_core::eval::{
    grid_search_welch, parse_json_lines, render_json_lines, render_table, run_experiment_with,
    EvalOptions, PipelineConfig, WelchGrid,
};
use ssvep_core::signal::{
    load_dataset, save_dataset, synthesize, Dataset, DatasetFormat, DatasetParams, LoadOptions,
    SynthSpec,
};
use ssvep_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ssvep", version, about = "SSVEP classification pipeline")]
struct Cli {
    /// Repeat for more logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset from a `key = value` spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "binary")]
        format: String,
    },
    /// Evaluate one configuration.
    Run(RunArgs),
    /// Rank Welch parameter combinations.
    Grid {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated FFT lengths.
        #[arg(long, value_delimiter = ',')]
        nfft: Option<Vec<usize>>,
        /// Comma-separated segment lengths in samples.
        #[arg(long, value_delimiter = ',')]
        segment_len: Option<Vec<usize>>,
        /// Comma-separated overlap fractions.
        #[arg(long, value_delimiter = ',')]
        overlap: Option<Vec<f64>>,
    },
    /// Render a saved JSON-lines report as a table.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
    /// Summarize a dataset.
    Inspect {
        #[arg(long)]
        dataset: PathBuf,
        /// `binary` or `csv`; inferred from the path when omitted.
        #[arg(long)]
        format: Option<String>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// `binary` or `csv`; inferred from the path when omitted.
    #[arg(long)]
    format: Option<String>,
    /// `key = value` overrides applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "default")]
    preset: String,
    /// Single `key=value` override, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = "loso")]
    protocol: String,
    /// Structured output path (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

/// Configuration and input errors are usage errors; everything else is a
/// runtime failure.
fn classify(e: Error) -> Failure {
    match e {
        Error::Config { .. }
        | Error::InvalidParameter { .. }
        | Error::Io(_)
        | Error::Format(_)
        | Error::InvalidTrial { .. } => Failure::Usage(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn usage(context: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{context}: {e}"))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(&path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn dataset_format(path: &Path, explicit: Option<&str>) -> Result<DatasetFormat, Failure> {
    match explicit {
        Some(f) => f.parse().map_err(|e| usage("--format", e)),
        None if path.is_dir() => Ok(DatasetFormat::Csv),
        None => Ok(DatasetFormat::Binary),
    }
}

fn load(path: &Path, format: Option<&str>) -> Result<Dataset, Failure> {
    let fmt = dataset_format(path, format)?;
    load_dataset(path, fmt, LoadOptions::default())
        .map_err(|e| usage(&format!("dataset {}", path.display()), e))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, Failure> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(key, format!("cannot parse `{s}`"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Failure> {
    v.trim().parse().map_err(|_| usage(key, format!("cannot parse `{v}`")))
}

/// Synthetic spec file: `key = value` lines over the generator settings.
/// `ssvep_channel` is 1-based.
fn parse_synth_spec(text: &str) -> Result<(SynthSpec, DatasetParams), Failure> {
    let mut spec = SynthSpec::default();
    let mut params = DatasetParams::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(&format!("spec line {}", no + 1), "expected key = value"))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "n_subjects" => spec.n_subjects = parse_one(k, v)?,
            "n_trials_per_freq" => spec.n_trials_per_freq = parse_one(k, v)?,
            "snr_db" => spec.snr_db = parse_list(k, v)?,
            "n_harmonics" => spec.n_harmonics = parse_one(k, v)?,
            "blink_rate" => spec.blink_rate = parse_one(k, v)?,
            "seed" => spec.seed = parse_one(k, v)?,
            "channel_count" => spec.channel_count = parse_one(k, v)?,
            "ssvep_channel" => {
                let c: usize = parse_one(k, v)?;
                spec.ssvep_channel = c.checked_sub(1).ok_or_else(|| usage(k, "channels are numbered from 1"))?;
            }
            "amplitude_uv" => spec.amplitude_uv = parse_one(k, v)?,
            "blink_amplitude_uv" => spec.blink_amplitude_uv = parse_one(k, v)?,
            "stimuli" => params.stimulus_frequencies = parse_list(k, v)?,
            "sample_rate" => params.sample_rate = parse_one(k, v)?,
            "duration" => params.duration_s = parse_one(k, v)?,
            _ => return Err(usage(k, "unknown spec key")),
        }
    }
    Ok((spec, params))
}

fn cmd_synth(spec: &Path, out: &Path, seed: Option<u64>, format: &str) -> Result<(), Failure> {
    let (mut s, p) = parse_synth_spec(&read_text(spec)?)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let fmt: DatasetFormat = format.parse().map_err(|e| usage("--format", e))?;
    let ds = synthesize(&s, &p).map_err(classify)?;
    save_dataset(&ds, out, fmt).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    println!(
        "wrote {} trials ({} subjects, {} channels, {} Hz) to {}",
        ds.len(),
        ds.subjects().len(),
        ds.channel_count(),
        ds.sample_rate(),
        out.display()
    );
    println!("stimulus frequencies (Hz): {:?}", ds.stimulus_frequencies());
    Ok(())
}

fn build_config(a: &RunArgs) -> Result<PipelineConfig, Failure> {
    let mut c = PipelineConfig::preset(&a.preset).map_err(classify)?;
    if let Some(path) = &a.config {
        c.apply_text(&read_text(path)?).map_err(classify)?;
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage("--set", format!("expected KEY=VALUE, got `{kv}`")))?;
        c.set(k, v).map_err(classify)?;
    }
    if let Some(seed) = a.seed {
        c.seed = seed;
    }
    Ok(c)
}

fn options(a: &RunArgs) -> Result<EvalOptions, Failure> {
    if a.jobs == 0 {
        return Err(usage("--jobs", "must be at least 1"));
    }
    Ok(EvalOptions {
        protocol: a.protocol.parse().map_err(classify)?,
        jobs: a.jobs,
    })
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let config = build_config(a)?;
    let opts = options(a)?;
    let ds = load(&a.dataset, a.format.as_deref())?;
    log::info!("{}", config.summary());
    let report = run_experiment_with(&config, &ds, &opts).map_err(classify)?;
    print!("{}", render_table(&report));
    if let Some(out) = &a.out {
        write_text(out, &render_json_lines(&report))?;
    }
    if report.has_failures() {
        let n = report.failed_folds().count();
        return Err(Failure::Runtime(format!("{n} fold(s) failed")));
    }
    Ok(())
}

fn cmd_grid(
    a: &RunArgs,
    nfft: &Option<Vec<usize>>,
    seg: &Option<Vec<usize>>,
    overlap: &Option<Vec<f64>>,
) -> Result<(), Failure> {
    let config = build_config(a)?;
    let opts = options(a)?;
    let ds = load(&a.dataset, a.format.as_deref())?;
    let mut grid = WelchGrid::default();
    if let Some(v) = nfft {
        grid.nfft = v.clone();
    }
    if let Some(v) = seg {
        grid.segment_len = v.clone();
    }
    if let Some(v) = overlap {
        grid.overlap = v.clone();
    }
    let result = grid_search_welch(&ds, &config, &grid, &opts).map_err(classify)?;
    print!("{}", result.render());
    for s in &result.skipped {
        eprintln!(
            "skipped nfft={} segment_len={} overlap={}: {}",
            s.nfft, s.segment_len, s.overlap, s.reason
        );
    }
    if let Some(out) = &a.out {
        let mut text = String::new();
        for r in &result.rows {
            let line = serde_json::json!({
                "record": "row",
                "nfft": r.nfft,
                "segment_len": r.segment_len,
                "overlap": r.overlap,
                "mean_accuracy": r.mean_accuracy,
                "mean_latency_ms": r.mean_latency_ms,
            });
            let _ = writeln!(text, "{line}");
        }
        for s in &result.skipped {
            let line = serde_json::json!({
                "record": "skipped",
                "nfft": s.nfft,
                "segment_len": s.segment_len,
                "overlap": s.overlap,
                "reason": s.reason,
            });
            let _ = writeln!(text, "{line}");
        }
        write_text(out, &text)?;
    }
    if result.rows.is_empty() {
        return Err(Failure::Runtime(format!(
            "all {} combinations were skipped",
            result.skipped.len()
        )));
    }
    Ok(())
}

fn cmd_report(input: &Path) -> Result<(), Failure> {
    let report = parse_json_lines(&read_text(input)?).map_err(classify)?;
    println!("protocol: {}", report.protocol);
    println!("config:   {}", report.config.summary());
    print!("{}", render_table(&report));
    Ok(())
}

fn cmd_inspect(path: &Path, format: Option<&str>) -> Result<(), Failure> {
    let ds = load(path, format)?;
    println!("trials:      {}", ds.len());
    println!("channels:    {}", ds.channel_count());
    println!("sample rate: {} Hz", ds.sample_rate());
    println!("stimuli:     {:?}", ds.stimulus_frequencies());
    if let Some(t) = ds.trials().first() {
        println!("samples:     {} ({} s)", t.n_samples(), t.duration_s());
    }
    let classes = ds.class_indices();
    for (i, f) in ds.stimulus_frequencies().iter().enumerate() {
        println!("  {f:>7.2} Hz: {} trials", classes.iter().filter(|&&c| c == i).count());
    }
    for s in ds.subjects() {
        let trials: Vec<_> = ds.trials().iter().filter(|t| t.subject_id() == s).collect();
        let mut sessions: Vec<u16> = trials.iter().map(|t| t.session_id()).collect();
        sessions.sort_unstable();
        sessions.dedup();
        println!("  S{s:03}: {} trials, sessions {sessions:?}", trials.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    let result = match &cli.command {
        Command::Synth {
            spec,
            out,
            seed,
            format,
        } => cmd_synth(spec, out, *seed, format),
        Command::Run(a) => cmd_run(a),
        Command::Grid {
            run,
            nfft,
            segment_len,
            overlap,
        } => cmd_grid(run, nfft, segment_len, overlap),
        Command::Report { input } => cmd_report(input),
        Command::Inspect { dataset, format } => cmd_inspect(dataset, format.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
