//! `nongauss` command line: parameter scans, self-verification, time-tag
//! analysis, source simulation and boundary p-values.
//!
//! Exit codes: 0 success, 1 analysis or verification failure, 2 input error.

pub mod config;
pub mod scan;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nongauss_core::bounds::criterion;
use nongauss_core::stats::{ln_p_tilde, max_p_over_boundary_with, CountModel, PValueResult};
use nongauss_core::verify::{self, VerifyOptions, VerifyReport};
use nongauss_core::CorrelationPoint64;
use nongauss_timetag::source_sim::CASCADE_SPLIT;
use nongauss_timetag::{
    count_coincidences, estimate_g2, estimate_g3, jacobi_histogram, parse_stream, simulate, write_stream, CoincidenceSet,
    Format, JacobiHistogram, SourceConfig, TimetagError, TripleSelection,
};
use serde::Serialize;

use config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

/// Bad flags, paths or configuration.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "input error: {}", self.0)
    }
}

impl std::error::Error for InputError {}

/// A failed check that produced a report; the report is already written.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

#[derive(Debug, Parser)]
#[command(name = "nongauss", version, about = "Gaussian-boundary certification of photon correlations")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML file with [analysis], [source], [scan] and [jacobi] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub period_ps: Option<u64>,
    #[arg(long, global = true)]
    pub window_ps: Option<u64>,
    /// Normalization delay in pulses.
    #[arg(long, global = true)]
    pub norm_delay: Option<u64>,
    /// Click-stream format; inferred from the file extension when absent.
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (scan, analyze) or file (simulate, verify, pvalue).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Binary,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Binary => Format::Binary,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correlations of pure Gaussian states on an (alpha, r, theta) grid.
    Scan(ScanArgs),
    /// Closed forms against the number-basis oracle and property checks.
    Verify(VerifyArgs),
    /// g2, g3 and the criterion from a click stream.
    Analyze(AnalyzeArgs),
    /// Synthetic click stream from the source model.
    Simulate(SimulateArgs),
    /// p-value of the Gaussian-boundary hypothesis for observed counts.
    Pvalue(PvalueArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub alpha_n: Option<usize>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub r_n: Option<usize>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub theta_n: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    /// Fixed Fock dimension instead of one chosen per point.
    #[arg(long)]
    pub oracle_dim: Option<usize>,
    #[arg(long, default_value_t = 60)]
    pub containment_grid: usize,
    #[arg(long, default_value_t = 2000)]
    pub mixture_samples: usize,
    /// Flip the sign of one third-order term to check the checks.
    #[arg(long, hide = true)]
    pub inject_g3_sign_error: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    /// Also compute the boundary p-value.
    #[arg(long)]
    pub pvalue: bool,
    /// Shot count instead of last pulse + 1.
    #[arg(long)]
    pub n_shots: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Built-in defaults.
    Default,
    /// Strong narrow laser leakage next to a slow emitter.
    Leakage,
    /// Routing through two beam splitters, 0.5/0.25/0.25.
    Cascade,
    /// g2 ≈ 0.0033 with no three-photon events over 1e7 pulses.
    Headline,
}

impl Preset {
    pub fn source(self) -> SourceConfig {
        match self {
            Preset::Default => SourceConfig::default(),
            Preset::Leakage => SourceConfig::leakage_preset(),
            Preset::Cascade => SourceConfig { split: CASCADE_SPLIT, ..SourceConfig::default() },
            Preset::Headline => {
                let emit_prob = 0.3;
                SourceConfig {
                    n_pulses: 10_000_000,
                    emit_prob,
                    two_photon_prob: SourceConfig::two_photon_prob_for_g2(emit_prob, 0.0033),
                    ..SourceConfig::default()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// Replaces the [source] table of the config file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub n_pulses: Option<u64>,
    /// Also write the summary JSON here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PvalueArgs {
    /// Observed two-photon events.
    #[arg(long)]
    pub n2: u64,
    /// Observed three-photon events.
    #[arg(long)]
    pub n3: u64,
    /// Total singles; with --n-shots.
    #[arg(long, requires = "n_shots")]
    pub n1: Option<f64>,
    #[arg(long, requires = "n1")]
    pub n_shots: Option<f64>,
    /// Delayed pair peak; with --triple-norm, instead of --n1/--n-shots.
    #[arg(long, requires = "triple_norm", conflicts_with = "n1")]
    pub pair_norm: Option<f64>,
    #[arg(long, requires = "pair_norm")]
    pub triple_norm: Option<f64>,
    /// Evaluate at this point instead of maximizing over the boundary.
    #[arg(long, requires = "g3")]
    pub g2: Option<f64>,
    #[arg(long, requires = "g2")]
    pub g3: Option<f64>,
}

/// Maps an error chain onto the exit-code contract.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() || cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return EXIT_INPUT;
        }
        if cause.is::<CheckFailed>() {
            return EXIT_FAILURE;
        }
        if let Some(e) = cause.downcast_ref::<TimetagError>() {
            return match e {
                TimetagError::NoNormalization(_) => EXIT_FAILURE,
                _ => EXIT_INPUT,
            };
        }
        if let Some(e) = cause.downcast_ref::<nongauss_core::Error>() {
            return match e {
                nongauss_core::Error::ZeroIntensity => EXIT_FAILURE,
                _ => EXIT_INPUT,
            };
        }
    }
    EXIT_FAILURE
}

fn effective_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut c = RunConfig::load(common.config.as_deref())?;
    if let Some(p) = common.period_ps {
        c.analysis.period_ps = p;
        c.source.period_ps = p;
    }
    if let Some(w) = common.window_ps {
        c.analysis.window_ps = w;
    }
    if let Some(d) = common.norm_delay {
        c.analysis.norm_delay_pulses = d;
        c.analysis.max_pulse_lag = c.analysis.max_pulse_lag.max(2 * d);
    }
    if let Some(s) = common.seed {
        c.source.seed = s;
    }
    Ok(c)
}

fn stream_format(flag: Option<FormatArg>, path: &Path) -> Format {
    match flag {
        Some(f) => f.into(),
        None if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => Format::Csv,
        None => Format::Binary,
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| InputError(format!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn out_dir(common: &Common) -> anyhow::Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| InputError(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// CSV preceded by a `#` line with tool version, config hash and seed.
pub fn write_csv_file<S: Serialize>(
    path: &Path,
    hash: &str,
    seed: Option<u64>,
    rows: impl IntoIterator<Item = S>,
) -> anyhow::Result<u64> {
    let mut w = create(path)?;
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    writeln!(w, "# nongauss {VERSION} config_sha256={hash} seed={seed}")?;
    let n = scan::write_rows(&mut w, rows)?;
    w.flush()?;
    Ok(n)
}

fn emit_json<T: Serialize>(stdout: &mut dyn Write, file: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(p) = file {
        let mut w = create(p)?;
        writeln!(w, "{text}")?;
        w.flush()?;
    }
    writeln!(stdout, "{text}")?;
    Ok(())
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::Scan(a) => cmd_scan(&cli.common, a, stdout),
        Command::Verify(a) => cmd_verify(&cli.common, a, stdout),
        Command::Analyze(a) => cmd_analyze(&cli.common, a, stdout),
        Command::Simulate(a) => cmd_simulate(&cli.common, a, stdout),
        Command::Pvalue(a) => cmd_pvalue(&cli.common, a, stdout),
    }
}

#[derive(Debug, Serialize)]
struct ScanSummary {
    version: &'static str,
    config_sha256: String,
    rows: u64,
    scan_csv: PathBuf,
    boundary_csv: PathBuf,
    min_curve_csv: PathBuf,
}

fn cmd_scan(common: &Common, a: &ScanArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut c = effective_config(common)?;
    let g = &mut c.scan;
    g.alpha_max = a.alpha_max.unwrap_or(g.alpha_max);
    g.alpha_n = a.alpha_n.unwrap_or(g.alpha_n);
    g.r_max = a.r_max.unwrap_or(g.r_max);
    g.r_n = a.r_n.unwrap_or(g.r_n);
    g.theta_max = a.theta_max.unwrap_or(g.theta_max);
    g.theta_n = a.theta_n.unwrap_or(g.theta_n);
    g.validate()?;
    let dir = out_dir(common)?;
    let hash = c.hash();
    let grid = &c.scan;

    let scan_csv = dir.join("scan.csv");
    let mut failure = None;
    let rows = scan::scan_rows(grid).map_while(|r| r.map_err(|e| failure = Some(e)).ok());
    let n = write_csv_file(&scan_csv, &hash, None, rows)?;
    if let Some(e) = failure {
        return Err(e).context("scan grid point");
    }
    let boundary_csv = dir.join("boundary.csv");
    write_csv_file(&boundary_csv, &hash, None, scan::boundary_curves(grid.curve_points)?)?;
    let min_curve_csv = dir.join("min_curve.csv");
    write_csv_file(&min_curve_csv, &hash, None, scan::min_curve(scan::grid_g1_max(grid), grid.curve_points)?)?;

    emit_json(
        stdout,
        None,
        &ScanSummary { version: VERSION, config_sha256: hash, rows: n, scan_csv, boundary_csv, min_curve_csv },
    )
}

fn cmd_verify(common: &Common, a: &VerifyArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut opts = VerifyOptions {
        oracle_dim: a.oracle_dim,
        containment_grid: a.containment_grid,
        mixture_samples: a.mixture_samples,
        ..Default::default()
    };
    if a.inject_g3_sign_error {
        opts.moments = verify::moments_with_g3_sign_error;
    }
    let report: VerifyReport = verify::run(&opts).context("verification")?;
    emit_json(stdout, common.out.as_deref(), &report)?;
    if !report.passed {
        let failed: Vec<_> = report.groups.iter().filter(|g| !g.passed).map(|g| g.name).collect();
        return Err(CheckFailed(format!("verification failed: {}", failed.join(", "))).into());
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PValueInputs {
    pub n2: u64,
    pub n3: u64,
    pub model: CountModel,
    /// Fixed hypothesis; `None` when maximized over the boundary.
    pub hypothesis: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PValueReport {
    pub log10_p: f64,
    pub argmax_g2: f64,
    pub argmax_g3: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub inputs: PValueInputs,
}

pub fn pvalue_report(n2: u64, n3: u64, model: CountModel, hypothesis: Option<(f64, f64)>) -> anyhow::Result<PValueReport> {
    let r = match hypothesis {
        Some((g2, g3)) => {
            let pp = model.expected(g2, g3)?;
            PValueResult { log10_p: ln_p_tilde(n2, n3, pp) / std::f64::consts::LN_10, argmax_g2: g2, argmax_g3: g3 }
        }
        None => max_p_over_boundary_with(n2, n3, model)?,
    };
    let pp = model.expected(r.argmax_g2, r.argmax_g3)?;
    Ok(PValueReport {
        log10_p: r.log10_p,
        argmax_g2: r.argmax_g2,
        argmax_g3: r.argmax_g3,
        lambda2: pp.lambda2,
        lambda3: pp.lambda3,
        inputs: PValueInputs { n2, n3, model, hypothesis },
    })
}

fn cmd_pvalue(common: &Common, a: &PvalueArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let model = match (a.n1, a.n_shots, a.pair_norm, a.triple_norm) {
        (Some(n1), Some(n_shots), None, None) => CountModel::Singles { n1, n_shots },
        (None, None, Some(pair_norm), Some(triple_norm)) => CountModel::Normalization { pair_norm, triple_norm },
        _ => return Err(InputError("give either --n1 and --n-shots or --pair-norm and --triple-norm".into()).into()),
    };
    let hypothesis = a.g2.zip(a.g3);
    let report = pvalue_report(a.n2, a.n3, model, hypothesis)?;
    emit_json(stdout, common.out.as_deref(), &report)
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub version: &'static str,
    pub config_sha256: String,
    pub clicks: usize,
    pub n_shots: u64,
    pub singles: [u64; 3],
    pub pair_zero: u64,
    pub pair_norm: u64,
    pub triple_same: u64,
    pub triple_separate: u64,
    pub separate_orderings: u64,
    pub g2: f64,
    pub g2_sigma: f64,
    pub g3: f64,
    pub g3_sigma_or_upper: f64,
    pub is_upper_limit: bool,
    pub criterion_value: f64,
    pub sigma_distance: Option<f64>,
    pub non_gaussian: bool,
    pub pvalue: Option<PValueReport>,
}

/// Estimates and criterion from counted coincidences.
pub fn summarize(c: &CoincidenceSet, cfg: &RunConfig, clicks: usize, with_pvalue: bool) -> anyhow::Result<AnalyzeSummary> {
    let a = &cfg.analysis;
    let e2 = estimate_g2(c, a)?;
    let e3 = estimate_g3(c, a)?;
    let point = CorrelationPoint64::new(e2.g2, e3.g3).with_sigmas(e2.sigma, e3.sigma_or_upper);
    let v = criterion(&point);
    let pair_zero = c.pair(0);
    let pair_norm = c.pair(a.norm_delay_pulses as i64);
    let pvalue = if with_pvalue {
        let model = CountModel::Normalization { pair_norm: pair_norm as f64, triple_norm: c.triple_norm() };
        Some(pvalue_report(pair_zero, c.triple_same, model, None)?)
    } else {
        None
    };
    Ok(AnalyzeSummary {
        version: VERSION,
        config_sha256: cfg.hash(),
        clicks,
        n_shots: c.n_shots,
        singles: c.singles,
        pair_zero,
        pair_norm,
        triple_same: c.triple_same,
        triple_separate: c.triple_separate,
        separate_orderings: c.separate_orderings,
        g2: e2.g2,
        g2_sigma: e2.sigma,
        g3: e3.g3,
        g3_sigma_or_upper: e3.sigma_or_upper,
        is_upper_limit: e3.is_upper_limit,
        criterion_value: v.criterion_value,
        sigma_distance: v.sigma_distance,
        non_gaussian: v.non_gaussian,
        pvalue,
    })
}

#[derive(Serialize)]
struct JacobiRow {
    j1_ns: f64,
    j2_ns: f64,
    count: u64,
}

fn jacobi_rows(h: &JacobiHistogram) -> impl Iterator<Item = JacobiRow> + '_ {
    (0..h.n_bins).flat_map(move |i| {
        (0..h.n_bins).filter_map(move |j| {
            let count = h.count_at(i, j);
            (count > 0).then(|| JacobiRow { j1_ns: h.bin_center(i), j2_ns: h.bin_center(j), count })
        })
    })
}

#[derive(Serialize)]
struct PairRow {
    lag: i64,
    count: u64,
}

fn cmd_analyze(common: &Common, a: &AnalyzeArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = effective_config(common)?;
    if a.n_shots.is_some() {
        cfg.analysis.n_shots = a.n_shots;
    }
    cfg.analysis.validate()?;
    let file = File::open(&a.input).map_err(|e| InputError(format!("cannot open {}: {e}", a.input.display())))?;
    let dir = common.out.as_ref().map(|_| out_dir(common)).transpose()?;
    let stream = parse_stream(BufReader::new(file), stream_format(common.format, &a.input))
        .with_context(|| format!("reading {}", a.input.display()))?;
    let counts = count_coincidences(&stream, &cfg.analysis)?;
    let summary = summarize(&counts, &cfg, stream.len(), a.pvalue)?;

    if let Some(dir) = dir {
        let hash = &summary.config_sha256;
        let m = counts.max_pulse_lag as i64;
        let pairs = (-m..=m).map(|lag| PairRow { lag, count: counts.pair(lag) });
        write_csv_file(&dir.join("pair_hist.csv"), hash, None, pairs)?;
        for (name, sel) in [
            ("same_pulse", TripleSelection::SamePulse),
            ("pair_lag", TripleSelection::PairLag),
            ("separate", TripleSelection::Separate),
        ] {
            let h = jacobi_histogram(&stream, &cfg.analysis, sel, cfg.jacobi)?;
            write_csv_file(&dir.join(format!("jacobi_{name}.csv")), hash, None, jacobi_rows(&h))?;
        }
        let mut w = create(&dir.join("summary.json"))?;
        writeln!(w, "{}", serde_json::to_string_pretty(&summary)?)?;
        w.flush()?;
    }
    emit_json(stdout, None, &summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub n_pulses: u64,
    pub output: PathBuf,
    pub format: String,
    pub clicks: usize,
    pub singles: [u64; 3],
    pub expected_singles: [f64; 3],
    pub intrinsic_g2: Option<f64>,
    pub intrinsic_g3: Option<f64>,
}

fn cmd_simulate(common: &Common, a: &SimulateArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = effective_config(common)?;
    if let Some(p) = a.preset {
        let (seed, period) = (cfg.source.seed, cfg.source.period_ps);
        cfg.source = SourceConfig { seed, period_ps: period, ..p.source() };
    }
    if let Some(n) = a.n_pulses {
        cfg.source.n_pulses = n;
    }
    let out = common.out.clone().ok_or_else(|| InputError("simulate needs --out <file>".into()))?;
    let format = stream_format(common.format, &out);
    cfg.source.validate()?;
    let w = create(&out)?;

    let stream = simulate(&cfg.source)?;
    write_stream(w, &stream, format)?;
    let src = &cfg.source;
    let intrinsic = src.intrinsic_correlations().ok();
    let summary = SimulateSummary {
        version: VERSION,
        config_sha256: cfg.hash(),
        seed: src.seed,
        n_pulses: src.n_pulses,
        output: out,
        format: match format {
            Format::Binary => "binary".into(),
            Format::Csv => "csv".into(),
        },
        clicks: stream.len(),
        singles: stream.singles(),
        expected_singles: src.expected_singles_per_pulse().map(|x| x * src.n_pulses as f64),
        intrinsic_g2: intrinsic.map(|c| c.g2),
        intrinsic_g3: intrinsic.map(|c| c.g3),
    };
    emit_json(stdout, a.summary.as_deref(), &summary)
}
