//! Command-line front end: `simulate`, `analyze`, `certify`, `predict` and
//! `bounds`.
//!
//! Exit codes: 0 on success, 2 for bad input, 3 for numerical or solver
//! failures.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::certify::{
    self, report, BoundError, CertificationBounds, CertificationVerdict, CertifyError, Level,
};
use crate::coincidence::{self, Analysis, AnalysisConfig, AnalysisError, Analyzer, Diagnostics, PathClass};
use crate::simulate::{self, EventGenerator, EventReader, ExperimentConfig, SimulationError};
use crate::witness::{self, CountTable, WitnessError, WitnessValue};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<WitnessError> for CliError {
    fn from(e: WitnessError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> Self {
        match e {
            CertifyError::Bound(b) => b.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "multipair", version, about = "Simulate, analyze and certify two-pair storage experiments")]
pub struct Cli {
    /// Worker threads for simulation and solvers (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a time-tagged event stream.
    Simulate(SimulateArgs),
    /// Reduce an event stream to histograms, count tables and the witness.
    Analyze(AnalyzeArgs),
    /// Decide the certification level for a count table or a measured T.
    Certify(CertifyArgs),
    /// Predicted T for a Werner-pair model.
    Predict(PredictArgs),
    /// Print the separable and one-pair bounds.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output event CSV.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long, conflicts_with = "target_twofold_hz")]
    pub mean_pairs: Option<f64>,
    /// Choose the pair rate so the stored two-fold rate hits this value.
    #[arg(long)]
    pub target_twofold_hz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Event CSV written by `simulate`.
    pub stream: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Four-fold signal-idler window (full width).
    #[arg(long)]
    pub window_ns: Option<f64>,
    #[arg(long)]
    pub twofold_window_ns: Option<f64>,
    #[arg(long)]
    pub min_delay_ns: Option<f64>,
    #[arg(long)]
    pub max_delay_ns: Option<f64>,
    /// Memory delay; read from the stream's config echo when present.
    #[arg(long)]
    pub storage_ns: Option<f64>,
    /// Recompute the bounds instead of using the shipped constants.
    #[arg(long)]
    pub recompute: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["table", "t"])))]
pub struct CertifyArgs {
    /// Count table CSV (`x,y,a,b,count`).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Measured T; requires `--sigma`.
    #[arg(long, requires = "sigma", allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub recompute: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("model").required(true).args(["visibility", "chsh"])))]
pub struct PredictArgs {
    #[arg(long)]
    pub visibility: Option<f64>,
    #[arg(long)]
    pub chsh: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Solve the SDPs and run the see-saw instead of printing constants.
    #[arg(long)]
    pub recompute: bool,
    /// See-saw seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long)]
    pub json: bool,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // The global pool can be set once per process; later calls keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Certify(a) => cmd_certify(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Bounds(a) => cmd_bounds(&a, out),
    }
}

fn write_json<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(out, "{text}").map_err(|e| CliError::Input(format!("stdout: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// `<stream>.config.toml`, written next to every event file.
pub fn config_echo_path(stream: &Path) -> PathBuf {
    let mut s = stream.as_os_str().to_owned();
    s.push(".config.toml");
    PathBuf::from(s)
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            ExperimentConfig::from_toml(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
    }
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    schema_version: u32,
    out: String,
    events: u64,
    pulses: u64,
    rng_seed: u64,
    mean_pairs_per_pulse: f64,
    expected_stored_twofold_rate_hz: f64,
    warnings: Vec<String>,
}

pub fn cmd_simulate<W: Write>(args: &SimulateArgs, out: &mut W) -> Result<(), CliError> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(d) = args.duration_s {
        config.duration_s = d;
    }
    if let Some(mu) = args.mean_pairs {
        config.mean_pairs_per_pulse = mu;
    }
    if let Some(hz) = args.target_twofold_hz {
        config.mean_pairs_per_pulse = simulate::calibrate_mean_pairs(&config, hz);
    }
    let warnings = config.validate()?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let file = File::create(&args.out).map_err(|e| io_err(&args.out, e))?;
    let mut w = BufWriter::new(file);
    let write_err = |e: std::io::Error| io_err(&args.out, e);
    writeln!(w, "{}", simulate::EVENT_CSV_HEADER).map_err(write_err)?;
    let mut events = 0u64;
    for chunk in EventGenerator::new(&config)? {
        for e in &chunk {
            simulate::write_event(&mut w, e).map_err(write_err)?;
        }
        events += chunk.len() as u64;
    }
    w.flush().map_err(write_err)?;
    write_file(&config_echo_path(&args.out), &config.to_toml())?;

    write_json(
        out,
        &SimulateSummary {
            schema_version: SCHEMA_VERSION,
            out: args.out.display().to_string(),
            events,
            pulses: config.total_pulses(),
            rng_seed: config.rng_seed,
            mean_pairs_per_pulse: config.mean_pairs_per_pulse,
            expected_stored_twofold_rate_hz: simulate::expected_stored_twofold_rate(&config),
            warnings,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub class: PathClass,
    pub fourfolds: u64,
    /// Columns `00, 01, 10, 11`, each ordered `(++), (--), (+-), (-+)`.
    pub columns: [[u64; 4]; 4],
    pub witness: Option<WitnessValue>,
    pub witness_error: Option<String>,
}

fn class_report(class: PathClass, table: &CountTable) -> ClassReport {
    let w = witness::witness_statistic(table);
    ClassReport {
        class,
        fourfolds: table.total(),
        columns: table.to_columns(),
        witness_error: w.as_ref().err().map(|e| e.to_string()),
        witness: w.ok(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub stream: String,
    /// Config echo of the simulation that produced the stream, if found.
    pub experiment: Option<ExperimentConfig>,
    pub rng_seed: Option<u64>,
    pub analysis: AnalysisConfig,
    pub events: u64,
    pub span_s: f64,
    pub stored_twofolds: u64,
    pub transmitted_twofolds: u64,
    pub stored_twofold_rate_hz: f64,
    pub diagnostics: Diagnostics,
    pub classes: Vec<ClassReport>,
    pub mode_capacity: usize,
    pub capacity_envelope_decreasing: bool,
    pub verdict: Option<CertificationVerdict>,
    pub histograms: Vec<String>,
}

/// Streams the event file through the analyzer.
pub fn analyze_file(path: &Path, config: AnalysisConfig) -> Result<Analysis, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = EventReader::new(BufReader::new(file))
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut an = Analyzer::new(config)?;
    for e in reader {
        let e = e.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        an.push(e)?;
    }
    Ok(an.finish())
}

pub fn build_report(
    stream: &Path,
    analysis: &Analysis,
    experiment: Option<ExperimentConfig>,
    bounds: &CertificationBounds,
) -> Result<RunReport, CliError> {
    let classes: Vec<ClassReport> = PathClass::ALL.iter().map(|&k| class_report(k, &analysis.count_table(k))).collect();
    let stored = &classes[0];
    let verdict = match &stored.witness {
        Some(w) => Some(certify::certify(w, bounds)?),
        None => None,
    };
    let capacity = analysis.capacity_histogram();
    let duration = experiment.as_ref().map(|c| c.duration_s).unwrap_or_else(|| analysis.span_s());
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        stream: stream.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        rng_seed: experiment.as_ref().map(|c| c.rng_seed),
        experiment,
        analysis: analysis.config,
        events: analysis.event_count,
        span_s: analysis.span_s(),
        stored_twofolds: analysis.stored_twofolds,
        transmitted_twofolds: analysis.transmitted_twofolds,
        stored_twofold_rate_hz: if duration > 0.0 { analysis.stored_twofolds as f64 / duration } else { 0.0 },
        diagnostics: analysis.diagnostics,
        classes,
        mode_capacity: coincidence::mode_capacity(&capacity),
        capacity_envelope_decreasing: capacity.is_decreasing_envelope(),
        verdict,
        histograms: Vec::new(),
    })
}

pub fn cmd_analyze<W: Write>(args: &AnalyzeArgs, out: &mut W) -> Result<(), CliError> {
    let started = Instant::now();
    let echo = config_echo_path(&args.stream);
    let experiment = if echo.exists() { Some(load_config(Some(&echo))?) } else { None };

    let mut config = AnalysisConfig::default();
    if let Some(c) = &experiment {
        config.storage_time_ns = c.storage_time_ns;
    }
    if let Some(v) = args.window_ns {
        config.fourfold_window_ns = v;
    }
    if let Some(v) = args.twofold_window_ns {
        config.twofold_window_ns = v;
    }
    if let Some(v) = args.min_delay_ns {
        config.min_delay_ns = v;
    }
    if let Some(v) = args.max_delay_ns {
        config.max_delay_ns = v;
        config.extended_max_delay_ns = config.extended_max_delay_ns.max(v);
    }
    if let Some(v) = args.storage_ns {
        config.storage_time_ns = v;
    }

    let analysis = analyze_file(&args.stream, config)?;
    if analysis.event_count == 0 {
        return Err(WitnessError::EmptyData.into());
    }
    let bounds = if args.recompute { CertificationBounds::recompute()? } else { CertificationBounds::cached() };
    let mut report = build_report(&args.stream, &analysis, experiment, &bounds)?;

    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let mut files: Vec<(String, String)> = vec![
        ("twofold.csv".into(), analysis.twofold.to_csv()),
        ("capacity.csv".into(), analysis.capacity_histogram().to_csv()),
    ];
    for k in PathClass::ALL {
        files.push((format!("delay_{}.csv", k.as_str()), analysis.delay_histogram(k).to_csv()));
    }
    report.histograms = files.iter().map(|(n, _)| n.clone()).collect();
    files.push(("stored.csv".into(), analysis.count_table(PathClass::StoredStored).to_csv()));
    files.push(("transmitted.csv".into(), analysis.count_table(PathClass::TransmittedTransmitted).to_csv()));
    files.push((
        "diagnostics.json".into(),
        serde_json::to_string_pretty(&analysis.diagnostics).expect("diagnostics serialize") + "\n",
    ));
    for (name, contents) in &files {
        write_file(&args.out_dir.join(name), contents)?;
    }
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(&args.out_dir.join("report.json"), &report_json)?;
    write_file(
        &args.out_dir.join("run.log"),
        &format!("command = \"analyze\"\nwall_time_s = {:.3}\n", started.elapsed().as_secs_f64()),
    )?;
    write!(out, "{report_json}").map_err(|e| CliError::Input(format!("stdout: {e}")))
}

#[derive(Debug, Serialize)]
struct CertifyOutput {
    schema_version: u32,
    verdict: CertificationVerdict,
    witness: Option<WitnessValue>,
}

pub fn cmd_certify<W: Write>(args: &CertifyArgs, out: &mut W) -> Result<(), CliError> {
    let (t, sigma, witness) = match (&args.table, args.t, args.sigma) {
        (Some(path), _, _) => {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            let table = CountTable::read_csv(BufReader::new(file))
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let w = witness::witness_statistic(&table)?;
            (w.t, w.sigma_t, Some(w))
        }
        (None, Some(t), Some(s)) => (t, s, None),
        _ => return Err(CliError::Input("give --table or both --t and --sigma".into())),
    };
    let bounds = if args.recompute { CertificationBounds::recompute()? } else { CertificationBounds::cached() };
    let verdict = certify::certify_t(t, sigma, &bounds)?;
    write_json(out, &CertifyOutput { schema_version: SCHEMA_VERSION, verdict, witness })
}

#[derive(Debug, Serialize)]
struct PredictOutput {
    schema_version: u32,
    visibility: Option<f64>,
    chsh: f64,
    predicted_t: f64,
    min_certifying_visibility: f64,
    level: Level,
}

pub fn cmd_predict<W: Write>(args: &PredictArgs, out: &mut W) -> Result<(), CliError> {
    let (visibility, chsh, t) = match (args.visibility, args.chsh) {
        (Some(v), None) => (Some(v), witness::chsh_from_visibility(v)?, witness::predict_t_from_visibility(v)?),
        (None, Some(s)) => (None, s, witness::predict_t_from_chsh(s)?),
        _ => return Err(CliError::Input("give exactly one of --visibility and --chsh".into())),
    };
    let level = certify::certify_t(t, 1.0, &CertificationBounds::cached())?.level;
    write_json(
        out,
        &PredictOutput {
            schema_version: SCHEMA_VERSION,
            visibility,
            chsh,
            predicted_t: t,
            min_certifying_visibility: witness::min_certifying_visibility(),
            level,
        },
    )
}

pub fn cmd_bounds<W: Write>(args: &BoundsArgs, out: &mut W) -> Result<(), CliError> {
    let rows = if args.recompute {
        report::bounds_report(&report::ReportOptions { seesaw_restarts: args.restarts, seed: args.seed })?
    } else {
        let cached = CertificationBounds::cached();
        vec![
            report::BoundReport {
                constraint: "ppt".into(),
                bound: cached.separable,
                gap: 0.0,
                method: "cached".into(),
                iterations: 0,
            },
            report::BoundReport {
                constraint: "schmidt_2".into(),
                bound: cached.one_pair,
                gap: 0.0,
                method: "cached".into(),
                iterations: 0,
            },
        ]
    };
    if args.json {
        #[derive(Serialize)]
        struct BoundsOutput<'a> {
            schema_version: u32,
            rows: &'a [report::BoundReport],
        }
        write_json(out, &BoundsOutput { schema_version: SCHEMA_VERSION, rows: &rows })
    } else {
        write!(out, "{}", report::render(&rows)).map_err(|e| CliError::Input(format!("stdout: {e}")))
    }
}
