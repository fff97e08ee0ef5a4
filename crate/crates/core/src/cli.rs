//! Command-line front end: `curve`, `optimize`, `gap`, `simulate`, `oracle`.
//!
//! Every command writes one JSON document (with `"schema": 1`) or CSV to
//! `--out` (atomically) or to stdout. Exit status is 0 on success, 1 on a
//! validation error and 2 when a scheme breaks its own guarantees.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::centralized::{self, greedy_optimize, IntegerAllocation};
use crate::decentralized::{self, kkt_optimize, FractionalAllocation};
use crate::error::{Error, Result};
use crate::numeric::format_significant;
use crate::popularity::{PopularityProfile, PopularitySpec};
use crate::request::{RequestVector, DEFAULT_WORST_CASE_BUDGET};
use crate::simulator::{
    self, ergodic_rate_oracle, padded_file_bits, DeliveryTranscript, OracleOptions, OracleScheme, SimulatedNetwork,
    DEFAULT_SEED,
};
use crate::tradeoff::{
    build_curve, gap_constants, gap_ergodic, gap_static, static_bound_chain, GapReport, Provenance, Scheme,
    TradeoffCurve, DEFAULT_GAP_GRID,
};

/// Environment variable read for the worker thread count when `--threads` is absent.
pub const THREADS_ENV: &str = "CODED_CACHING_THREADS";

pub const SCHEMA_VERSION: u32 = 1;

const COMMANDS: [&str; 5] = ["curve", "optimize", "gap", "simulate", "oracle"];

#[derive(Debug, Parser)]
#[command(
    name = "coded-caching",
    version,
    about = "Rate vs. cache-memory tradeoffs for multi-user file selection networks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Worker threads (default: $CODED_CACHING_THREADS, else one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// key=value file (one per line, `#` comments) merged under the flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file, or directory for `curve --figure` in CSV; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Centralized,
    Decentralized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GapModel {
    Ergodic,
    Static,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate vs. cache curve of one scheme, or every curve of a figure preset.
    #[command(args_override_self = true)]
    Curve(CurveArgs),
    /// Optimal allocation at one cache size.
    #[command(args_override_self = true)]
    Optimize(OptimizeArgs),
    /// Multiplicative gap between an inner bound and the lower bound.
    #[command(args_override_self = true)]
    Gap(GapArgs),
    /// Bit-level placement and delivery for a static request.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Ergodic rate by exhaustive expectation, next to the closed form.
    #[command(args_override_self = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub files: Option<usize>,
    #[arg(long)]
    pub users: Option<usize>,
    /// `uniform`, `zipf:<alpha>` or a file with one probability per line.
    #[arg(long, default_value = "uniform")]
    pub popularity: PopularitySpec,
}

impl ProfileArgs {
    fn resolve(&self) -> Result<(PopularityProfile, usize)> {
        let profile = self.popularity.resolve(self.files)?;
        let users = self
            .users
            .ok_or_else(|| Error::invalid("--users is required"))?;
        if users == 0 {
            return Err(Error::invalid("--users must be at least 1"));
        }
        Ok((profile, users))
    }
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, default_value = "centralized")]
    pub scheme: Scheme,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Cache grid step (default N/1000).
    #[arg(long)]
    pub step: Option<f64>,
    /// Replace the curve by its lower convex envelope.
    #[arg(long)]
    pub convexify: bool,
    /// Attach the allocation behind each point (JSON only).
    #[arg(long)]
    pub provenance: bool,
    /// Regenerate a figure's parameter set (2 to 7).
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=7))]
    pub figure: Option<u8>,
    /// Zipf exponent override for figures 5 and 6.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "centralized")]
    pub scheme: Strategy,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long)]
    pub cache: f64,
    /// Also report the static worst-case and average rates of the allocation.
    #[arg(long = "static")]
    pub with_static: bool,
    /// Request evaluations allowed for the static rates.
    #[arg(long, default_value_t = DEFAULT_WORST_CASE_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long, value_enum, default_value = "ergodic")]
    pub model: GapModel,
    #[arg(long)]
    pub files: usize,
    #[arg(long)]
    pub users: usize,
    /// Uniform grid points on [0, N), in addition to the corner points.
    #[arg(long, default_value_t = DEFAULT_GAP_GRID)]
    pub grid: usize,
    /// Certify every (n, l) in [1, files] x [1, users].
    #[arg(long)]
    pub sweep: bool,
    /// Include the scalar constants used by the certificates.
    #[arg(long)]
    pub constants: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AllocationArgs {
    #[arg(long, value_enum, default_value = "centralized")]
    pub scheme: Strategy,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Cache size; the allocation is then the optimized one.
    #[arg(long, conflicts_with = "levels")]
    pub cache: Option<f64>,
    /// Explicit per-file levels in original file order (integers for
    /// centralized, fractions for decentralized).
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
}

enum Allocation {
    Integer(IntegerAllocation),
    Fractional(FractionalAllocation),
}

impl AllocationArgs {
    fn resolve(&self) -> Result<(PopularityProfile, Allocation)> {
        let (profile, users) = self.profile.resolve()?;
        let alloc = match (&self.levels, self.cache, self.scheme) {
            (Some(levels), _, Strategy::Centralized) => {
                let r = levels
                    .iter()
                    .map(|&v| {
                        if v >= 0.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(Error::invalid(format!("centralized levels must be integers, got {v}")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let record = centralized::AllocationRecord { users, r };
                Allocation::Integer(IntegerAllocation::from_record(&record, &profile)?)
            }
            (Some(levels), _, Strategy::Decentralized) => {
                let record = centralized::AllocationRecord {
                    users,
                    r: levels.clone(),
                };
                Allocation::Fractional(FractionalAllocation::from_record(&record, &profile)?)
            }
            (None, Some(cache), Strategy::Centralized) => {
                Allocation::Integer(greedy_optimize(&profile, users, cache)?.allocation)
            }
            (None, Some(cache), Strategy::Decentralized) => {
                Allocation::Fractional(kkt_optimize(&profile, users, cache)?.allocation)
            }
            (None, None, _) => return Err(Error::invalid("give either --cache or --levels")),
        };
        Ok((profile, alloc))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub allocation: AllocationArgs,
    /// Comma-separated requested files, one per user, numbered from 1 in the
    /// original file order.
    #[arg(long, value_delimiter = ',', required = true)]
    pub requests: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub file_bits: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Binary dump of the first trial's delivery transcript.
    #[arg(long, value_name = "PATH")]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub allocation: AllocationArgs,
    /// Largest number of request vectors enumerated exactly.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    /// Sample request vectors when exact enumeration exceeds the budget.
    #[arg(long)]
    pub monte_carlo: bool,
    #[arg(long, default_value_t = 20_000)]
    pub samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| Error::Io(format!("cannot write {}: {e}", path.display()));
    if let Ok(meta) = std::fs::metadata(path) {
        if meta.is_dir() {
            return Err(Error::Io(format!("{} is a directory", path.display())));
        }
        // Devices and pipes are written in place, never replaced.
        if !meta.is_file() {
            let mut f = std::fs::OpenOptions::new().write(true).open(path).map_err(fail)?;
            return f.write_all(bytes).map_err(fail);
        }
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Reads `key=value` lines into `--key value` arguments (`key=true` becomes a
/// bare flag, `key=false` is dropped).
fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidInput {
            index: Some(i + 1),
            reason: format!("expected key=value in {}, got {line:?}", path.display()),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(Error::InvalidInput {
                index: Some(i + 1),
                reason: "config files cannot include other config files".into(),
            });
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Splices the config file's arguments in right after the subcommand, so
/// that later (command-line) occurrences override them.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let extra = config_args(&path)?;
    let Some(pos) = args
        .iter()
        .position(|a| COMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let mut merged = args[..=pos].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("{THREADS_ENV} must be a thread count, got {v:?}"))),
        _ => Ok(None),
    }
}

/// Parses `args` (including the program name) and runs the command; returns
/// the process exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors.
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_invariant_violation() {
                2
            } else {
                1
            }
        }
    }
}

/// Runs a parsed command line inside a thread pool of the requested size.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.global.threads)? {
        if n == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Configuration(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Curve(a) => curve(&cli.global, a),
        Command::Optimize(a) => optimize(&cli.global, a),
        Command::Gap(a) => gap(&cli.global, a),
        Command::Simulate(a) => simulate(&cli.global, a),
        Command::Oracle(a) => oracle(&cli.global, a),
    })
}

fn emit(global: &GlobalArgs, bytes: &[u8]) -> Result<()> {
    match &global.out {
        Some(path) => write_atomic(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json(global: &GlobalArgs, mut value: Value) -> Result<()> {
    if let Value::Object(map) = &mut value {
        map.insert("schema".into(), json!(SCHEMA_VERSION));
    }
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    emit(global, text.as_bytes())
}

fn csv_row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|&v| format_significant(v, 12)).collect();
    cells.join(",") + "\n"
}

struct FigurePreset {
    n_files: usize,
    users: usize,
    alpha: f64,
    schemes: &'static [Scheme],
}

const ZIPF_FIGURE: &[Scheme] = &[Scheme::Centralized, Scheme::Decentralized, Scheme::Lower, Scheme::Hpf];

fn figure_preset(figure: u8, alpha: Option<f64>) -> Result<FigurePreset> {
    let fixed = |a: f64| {
        if alpha.is_some() {
            Err(Error::invalid(format!("--alpha only applies to figures 5 and 6, not {figure}")))
        } else {
            Ok(a)
        }
    };
    Ok(match figure {
        2 => FigurePreset {
            n_files: 10,
            users: 5,
            alpha: fixed(0.0)?,
            schemes: &[Scheme::MemorySharing, Scheme::Centralized, Scheme::Lower],
        },
        3 => FigurePreset {
            n_files: 20,
            users: 300,
            alpha: fixed(0.0)?,
            schemes: &[
                Scheme::Centralized,
                Scheme::Decentralized,
                Scheme::MnCentralized,
                Scheme::MnDecentralized,
            ],
        },
        4 => FigurePreset {
            n_files: 1000,
            users: 10,
            alpha: fixed(0.0)?,
            schemes: ZIPF_FIGURE,
        },
        5 => FigurePreset {
            n_files: 1000,
            users: 10,
            alpha: alpha.unwrap_or(0.7),
            schemes: ZIPF_FIGURE,
        },
        6 => FigurePreset {
            n_files: 10,
            users: 1000,
            alpha: alpha.unwrap_or(0.7),
            schemes: ZIPF_FIGURE,
        },
        _ => return Err(Error::invalid(format!("no preset for figure {figure}"))),
    })
}

fn provenance_json(profile: &PopularityProfile, p: &Provenance) -> Value {
    match p {
        Provenance::Formula => json!({"kind": "formula"}),
        Provenance::LowerBound { users_term } => json!({"kind": "lower_bound", "users_term": users_term}),
        Provenance::Integer(a) => json!({"kind": "integer", "r": a.to_record(profile).r}),
        Provenance::Shared { low, high, weight_high } => json!({
            "kind": "shared",
            "low": low.to_record(profile).r,
            "high": high.to_record(profile).r,
            "weight_high": weight_high,
        }),
        Provenance::Fractional(a) => json!({"kind": "fractional", "r": a.to_record(profile).r}),
        Provenance::Uncoded { files } => json!({"kind": "uncoded", "files": files}),
    }
}

fn curve_json(curve: &TradeoffCurve, profile: &PopularityProfile, provenance: bool) -> Value {
    let points: Vec<Value> = curve
        .points
        .iter()
        .map(|p| {
            let mut v = json!({"r_c": p.cache, "r_u": p.rate});
            if provenance {
                v["provenance"] = provenance_json(profile, &p.provenance);
            }
            v
        })
        .collect();
    json!({"scheme": curve.label, "convexified": curve.convexified, "points": points})
}

fn make_curve(scheme: Scheme, profile: &PopularityProfile, users: usize, step: f64, convexify: bool) -> Result<TradeoffCurve> {
    let curve = build_curve(scheme, profile, users, step)?;
    if convexify {
        curve.convexified()
    } else {
        Ok(curve)
    }
}

fn curve(global: &GlobalArgs, args: &CurveArgs) -> Result<()> {
    if let Some(figure) = args.figure {
        return figure_curves(global, args, figure);
    }
    if args.alpha.is_some() {
        return Err(Error::invalid("--alpha needs --figure; use --popularity zipf:<alpha> otherwise"));
    }
    let (profile, users) = args.profile.resolve()?;
    let step = args.step.unwrap_or(profile.n_files() as f64 / 1000.0);
    let curve = make_curve(args.scheme, &profile, users, step, args.convexify)?;
    match global.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            if args.provenance {
                return Err(Error::invalid("--provenance needs --format json"));
            }
            emit(global, curve.to_csv().as_bytes())
        }
        Format::Json => {
            let mut v = curve_json(&curve, &profile, args.provenance);
            v["files"] = json!(profile.n_files());
            v["users"] = json!(users);
            v["popularity"] = json!(args.profile.popularity.to_string());
            emit_json(global, v)
        }
    }
}

fn figure_curves(global: &GlobalArgs, args: &CurveArgs, figure: u8) -> Result<()> {
    if args.profile.files.is_some() || args.profile.users.is_some() {
        return Err(Error::invalid("--figure fixes --files and --users; drop them"));
    }
    let format = global.format.unwrap_or(Format::Csv);
    if format == Format::Csv && global.out.is_none() {
        return Err(Error::invalid("--figure with CSV output writes one file per curve; pass --out <DIR>"));
    }
    if figure == 7 {
        return figure_chain(global, args, format);
    }
    let preset = figure_preset(figure, args.alpha)?;
    let profile = PopularityProfile::from_zipf(preset.n_files, preset.alpha)?;
    let step = args.step.unwrap_or(preset.n_files as f64 / 1000.0);
    let curves = preset
        .schemes
        .iter()
        .map(|&s| make_curve(s, &profile, preset.users, step, args.convexify))
        .collect::<Result<Vec<_>>>()?;
    match format {
        Format::Csv => {
            let dir = global.out.as_deref().expect("checked above");
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
            for c in &curves {
                write_atomic(&dir.join(format!("fig{figure}_{}.csv", c.label)), c.to_csv().as_bytes())?;
            }
            Ok(())
        }
        Format::Json => {
            let list: Vec<Value> = curves
                .iter()
                .map(|c| curve_json(c, &profile, args.provenance))
                .collect();
            emit_json(
                global,
                json!({
                    "figure": figure,
                    "files": preset.n_files,
                    "users": preset.users,
                    "alpha": preset.alpha,
                    "curves": list,
                }),
            )
        }
    }
}

/// Static bound chain for 10 files, 15 users on `R_c ∈ [0, 5]`.
fn figure_chain(global: &GlobalArgs, args: &CurveArgs, format: Format) -> Result<()> {
    if args.alpha.is_some() {
        return Err(Error::invalid("--alpha only applies to figures 5 and 6, not 7"));
    }
    let (n_files, users, max_cache) = (10, 15, 5.0);
    let step = args.step.unwrap_or(max_cache / 1000.0);
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("grid step must be positive, got {step}")));
    }
    let count = (max_cache / step).round() as usize;
    let xs: Vec<f64> = (0..=count).map(|k| (k as f64 * step).min(max_cache)).collect();
    let chain: Vec<_> = static_bound_chain(n_files, users, &xs)?
        .into_iter()
        .filter(|p| p.r_c <= max_cache)
        .collect();
    match format {
        Format::Csv => {
            let dir = global.out.as_deref().expect("checked by caller");
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
            let mut text = String::from("r_c,lower,achievable,upper\n");
            for p in &chain {
                text.push_str(&csv_row(&[p.r_c, p.lower, p.achievable, p.upper]));
            }
            write_atomic(&dir.join("fig7_chain.csv"), text.as_bytes())
        }
        Format::Json => emit_json(
            global,
            json!({"figure": 7, "files": n_files, "users": users, "chain": chain}),
        ),
    }
}

fn request_json(profile: &PopularityProfile, request: &RequestVector) -> Value {
    json!(request.to_original_numbering(profile))
}

fn optimize(global: &GlobalArgs, args: &OptimizeArgs) -> Result<()> {
    let (profile, users) = args.profile.resolve()?;
    let (record, rate, extra): (Value, f64, Value) = match args.scheme {
        Strategy::Centralized => {
            let res = greedy_optimize(&profile, users, args.cache)?;
            let mut extra = json!({});
            if args.with_static {
                let worst = centralized::static_worst_case_rate(&profile, &res.allocation, args.budget)?;
                let average = centralized::static_average_rate(&profile, &res.allocation)?;
                extra = json!({
                    "worst_case": worst.rate,
                    "worst_request": request_json(&profile, &worst.request),
                    "worst_case_exact": worst.exact,
                    "average": average,
                    "average_exact": true,
                });
            }
            (json!(res.allocation.to_record(&profile)), res.rate, extra)
        }
        Strategy::Decentralized => {
            let sol = kkt_optimize(&profile, users, args.cache)?;
            let mut extra = json!({});
            if args.with_static {
                let worst = decentralized::static_worst_case_rate(&profile, &sol.allocation, args.budget)?;
                let average = decentralized::static_average_rate(&profile, &sol.allocation, args.budget)?;
                extra = json!({
                    "worst_case": worst.rate,
                    "worst_request": request_json(&profile, &worst.request),
                    "worst_case_exact": worst.exact,
                    "average": average.value,
                    "average_std_error": average.std_error,
                    "average_exact": average.exact,
                });
            }
            let mut record = json!(sol.allocation.to_record(&profile));
            record["certificate"] = json!(sol.certificate);
            (record, sol.rate, extra)
        }
    };
    match global.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = json!({
                "scheme": format!("{:?}", args.scheme).to_lowercase(),
                "files": profile.n_files(),
                "users": users,
                "popularity": args.profile.popularity.to_string(),
                "cache": args.cache,
                "rate": rate,
                "allocation": record,
            });
            if args.with_static {
                v["static"] = extra;
            }
            emit_json(global, v)
        }
        Format::Csv => {
            let levels = record["r"].as_array().cloned().unwrap_or_default();
            let probs = profile.to_original_order(profile.probs());
            let mut text = String::from("file,probability,level\n");
            for (i, (p, r)) in probs.iter().zip(levels).enumerate() {
                let r = r.as_f64().unwrap_or(f64::NAN);
                text.push_str(&format!("{},{}", i + 1, csv_row(&[*p, r])));
            }
            emit(global, text.as_bytes())
        }
    }
}

fn gap_one(model: GapModel, n: usize, l: usize, grid: usize) -> Result<GapReport> {
    match model {
        GapModel::Ergodic => gap_ergodic(n, l, grid),
        GapModel::Static => gap_static(n, l, grid),
    }
}

fn gap(global: &GlobalArgs, args: &GapArgs) -> Result<()> {
    if args.files == 0 || args.users == 0 {
        return Err(Error::invalid("--files and --users must be at least 1"));
    }
    if args.grid == 0 {
        return Err(Error::invalid("--grid must be at least 1"));
    }
    let reports = if args.sweep {
        use rayon::prelude::*;
        let pairs: Vec<(usize, usize)> = (1..=args.files)
            .flat_map(|n| (1..=args.users).map(move |l| (n, l)))
            .collect();
        pairs
            .into_par_iter()
            .map(|(n, l)| gap_one(args.model, n, l, args.grid))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![gap_one(args.model, args.files, args.users, args.grid)?]
    };
    let breach = reports.iter().find(|r| !r.holds()).cloned();
    match global.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = if args.sweep {
                let worst = reports
                    .iter()
                    .max_by(|a, b| a.max_ratio.total_cmp(&b.max_ratio))
                    .expect("nonempty sweep");
                json!({"reports": reports, "worst": worst})
            } else {
                json!(reports[0])
            };
            v["model"] = json!(format!("{:?}", args.model).to_lowercase());
            v["holds"] = json!(breach.is_none());
            if args.constants {
                v["constants"] = json!(gap_constants());
            }
            emit_json(global, v)?;
        }
        Format::Csv => {
            let mut text = String::from("n,l,max_ratio,argmax_rc,certified_bound\n");
            for r in &reports {
                text.push_str(&format!("{},{},{}", r.n, r.l, csv_row(&[r.max_ratio, r.argmax_rc, r.certified_bound])));
            }
            emit(global, text.as_bytes())?;
        }
    }
    match breach {
        Some(r) => Err(Error::InvariantViolation(format!(
            "gap {} at N={}, L={} (R_c = {}) exceeds the certified bound {}",
            r.max_ratio, r.n, r.l, r.argmax_rc, r.certified_bound
        ))),
        None => Ok(()),
    }
}

fn simulate(global: &GlobalArgs, args: &SimulateArgs) -> Result<()> {
    let (profile, alloc) = args.allocation.resolve()?;
    let request = RequestVector::from_original_numbering(&profile, &args.requests)?;
    let (summary, formula, record) = match &alloc {
        Allocation::Integer(a) => (
            simulator::simulate_centralized(a, &request, args.file_bits, args.trials, args.seed)?,
            centralized::static_rate_for_request(a, &request)?,
            json!(a.to_record(&profile)),
        ),
        Allocation::Fractional(a) => (
            simulator::simulate_decentralized(a, &request, args.file_bits, args.trials, args.seed)?,
            decentralized::static_rate_for_request(a, &request)?,
            json!(a.to_record(&profile)),
        ),
    };
    if let Some(path) = &args.transcript {
        first_transcript(&alloc, &request, args, summary.file_bits)?.dump(path)?;
    }
    match global.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(
            global,
            json!({
                "scheme": format!("{:?}", args.allocation.scheme).to_lowercase(),
                "files": profile.n_files(),
                "users": request.users(),
                "requests": request_json(&profile, &request),
                "seed": args.seed,
                "allocation": record,
                "formula_rate": formula,
                "summary": summary,
            }),
        )?,
        Format::Csv => {
            let mut text = String::from("trial,rate\n");
            for (t, r) in summary.rates.iter().enumerate() {
                text.push_str(&format!("{t},{}", csv_row(&[*r])));
            }
            emit(global, text.as_bytes())?;
        }
    }
    if !summary.decode_ok {
        return Err(Error::InvariantViolation(
            "at least one user failed to reconstruct its requested file".into(),
        ));
    }
    Ok(())
}

fn first_transcript(
    alloc: &Allocation,
    request: &RequestVector,
    args: &SimulateArgs,
    file_bits: usize,
) -> Result<DeliveryTranscript> {
    let seed = simulator::trial_seed(args.seed, 0);
    match alloc {
        Allocation::Integer(a) => {
            let net = SimulatedNetwork::new(a.n_files(), a.users(), padded_file_bits(file_bits, a)?, seed)?;
            simulator::deliver_centralized(&net, a, request)
        }
        Allocation::Fractional(a) => {
            let net = SimulatedNetwork::new(a.n_files(), a.users(), file_bits, seed)?;
            let caches = simulator::place_decentralized(&net, a)?;
            simulator::deliver_decentralized(&net, &caches, a, request)
        }
    }
}

fn oracle(global: &GlobalArgs, args: &OracleArgs) -> Result<()> {
    let (profile, alloc) = args.allocation.resolve()?;
    let options = OracleOptions {
        budget: args.budget,
        monte_carlo: args.monte_carlo,
        samples: args.samples,
        seed: args.seed,
    };
    let (estimate, closed, record) = match &alloc {
        Allocation::Integer(a) => (
            ergodic_rate_oracle(&profile, OracleScheme::Centralized(a), options)?,
            centralized::ergodic_rate(&profile, a)?,
            json!(a.to_record(&profile)),
        ),
        Allocation::Fractional(a) => (
            ergodic_rate_oracle(&profile, OracleScheme::Decentralized(a), options)?,
            decentralized::ergodic_rate(&profile, a)?,
            json!(a.to_record(&profile)),
        ),
    };
    let diff = (estimate.value - closed).abs();
    let agrees = if estimate.exact {
        diff <= 1e-9 * closed.abs().max(1.0)
    } else {
        diff <= 4.0 * estimate.std_error + 1e-12
    };
    match global.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(
            global,
            json!({
                "scheme": format!("{:?}", args.allocation.scheme).to_lowercase(),
                "files": profile.n_files(),
                "allocation": record,
                "closed_form": closed,
                "oracle": estimate.value,
                "std_error": estimate.std_error,
                "exact": estimate.exact,
                "evaluated": estimate.evaluated,
                "abs_diff": diff,
                "agrees": agrees,
            }),
        )?,
        Format::Csv => {
            let text = format!(
                "closed_form,oracle,std_error,exact\n{},{}\n",
                csv_row(&[closed, estimate.value, estimate.std_error]).trim_end(),
                estimate.exact
            );
            emit(global, text.as_bytes())?;
        }
    }
    if estimate.exact && !agrees {
        return Err(Error::InvariantViolation(format!(
            "closed form {closed} and exact expectation {} disagree",
            estimate.value
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(std::iter::once("coded-caching").chain(args.iter().copied()))
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/x"), b"").is_err());
    }

    #[test]
    fn config_merges_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "# gap settings\nfiles = 3\nusers=2\ngrid=100\nconstants=true\n").unwrap();
        let out = dir.path().join("gap.json");
        let code = run_args(&[
            "gap",
            "--config",
            cfg.to_str().unwrap(),
            "--users",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["n"], 3);
        assert_eq!(v["l"], 4);
        assert!(v["constants"].is_object());

        std::fs::write(&cfg, "files 3\n").unwrap();
        assert_eq!(run_args(&["gap", "--config", cfg.to_str().unwrap(), "--users", "2"]), 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_args(&["gap", "--files", "2"]), 1);
        assert_eq!(run_args(&["frobnicate"]), 1);
        assert_eq!(run_args(&["optimize", "--files", "2", "--users", "2", "--cache", "0.3"]), 1);
    }

    #[test]
    fn requests_use_original_numbering() {
        let dir = tempfile::tempdir().unwrap();
        let prof = dir.path().join("p.txt");
        std::fs::write(&prof, "0.1\n0.6\n0.3\n").unwrap();
        let out = dir.path().join("sim.json");
        let code = run_args(&[
            "simulate",
            "--popularity",
            prof.to_str().unwrap(),
            "--users",
            "2",
            "--levels",
            "0,2,1",
            "--requests",
            "2,1",
            "--file-bits",
            "60",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
        assert_eq!(v["requests"], json!([2, 1]));
        assert_eq!(v["allocation"]["r"], json!([0, 2, 1]));
        // User 1 holds file 2 entirely; user 2 needs all of file 1.
        assert_eq!(v["formula_rate"], json!(1.0));
        assert_eq!(v["summary"]["decode_ok"], json!(true));
    }

    #[test]
    fn output_is_independent_of_thread_count() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        for (threads, path) in [("1", &a), ("3", &b)] {
            let code = run_args(&[
                "curve",
                "--scheme",
                "decentralized",
                "--files",
                "6",
                "--users",
                "4",
                "--popularity",
                "zipf:0.9",
                "--step",
                "0.25",
                "--threads",
                threads,
                "--out",
                path.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
        }
        let text = std::fs::read(&a).unwrap();
        assert_eq!(text, std::fs::read(&b).unwrap());
        assert!(text.starts_with(b"r_c,r_u\n"));
    }
}
