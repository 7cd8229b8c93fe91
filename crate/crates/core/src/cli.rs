//! The `fockcheck` command line: reads scenario files, runs one command, and
//! writes a deterministic report.
//!
//! Reports are JSON lines (a `config` record, then one record per result) or
//! CSV (flattened results; the config goes to `<out>.config.json`).

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::carleson::{classify_carleson, CarlesonOptions};
use crate::compop::{classify_compop, CompopOptions, InfinityTarget, SymbolRecord};
use crate::error::FockError;
use crate::funcspace::{
    derivative_norm, fock_sobolev_norm, shifted_weight_norm, EntireFunction, Exponent,
    FunctionRecord, NormTarget, Params, SobolevWeight,
};
use crate::geometry::{make_lattice, verify_lattice, Point};
use crate::measures::MeasureRecord;
use crate::quadrature::{integrate_gaussian, QuadratureScheme};
use crate::suite::{run_suite, SuiteOptions};

#[derive(Parser, Debug)]
#[command(name = "fockcheck", version, about = "Fock–Carleson and composition-operator checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(clap::Args, Debug, Clone)]
pub struct CommonArgs {
    /// Report path; stdout when absent (JSON lines only).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::JsonLines)]
    pub format: Format,
    /// Cells per axis of the tensor quadrature.
    #[arg(long, global = true)]
    pub cells: Option<usize>,
    #[arg(long = "tail-tol", global = true, default_value_t = 1e-12)]
    pub tail_tol: f64,
    /// Fixed half-width of the integration cube, overriding the tail bound.
    #[arg(long = "truncation-radius", global = true)]
    pub truncation_radius: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an r/2-lattice and verify separation and covering.
    Lattice {
        #[arg(long)]
        dim: usize,
        #[arg(long = "domain-radius")]
        domain_radius: f64,
        #[arg(long)]
        separation: f64,
        #[arg(long, default_value_t = 100_000)]
        probes: usize,
    },
    /// Classify a measure as (p,q) Fock–Carleson.
    Carleson {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Berezin parameter; defaults to q.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
    },
    /// Classify a weighted composition operator.
    Compop {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        symbol: PathBuf,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = TargetArg::FockInfinity)]
        target: TargetArg,
    },
    /// Fock–Sobolev norms of functions, against closed forms where known.
    VerifyNorms {
        #[arg(long)]
        params: PathBuf,
        /// A function record or a list of them; a built-in set when absent.
        #[arg(long)]
        function: Option<PathBuf>,
    },
    /// The built-in composition-operator suite.
    Suite {
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Skip the pull-back Carleson cross-check.
        #[arg(long = "no-pullback")]
        no_pullback: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    JsonLines,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    FockInfinity,
    LittleOh,
}

/// Failure of a run, with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> Value {
        match self {
            CliError::Config { field, reason } => {
                json!({"error": "config", "field": field, "message": reason})
            }
            CliError::Io { path, reason } => json!({"error": "io", "path": path, "message": reason}),
            CliError::Numerical(msg) => json!({"error": "numerical", "message": msg}),
        }
    }

    fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<FockError> for CliError {
    fn from(e: FockError) -> Self {
        match e {
            FockError::InvalidParameter { field, reason } => CliError::Config { field, reason },
            FockError::DimensionMismatch { .. } => CliError::config("n", e.to_string()),
            FockError::Unsupported(_) => CliError::config("config", e.to_string()),
            FockError::Overflow { .. }
            | FockError::NonIntegrable(_)
            | FockError::Divergent(_)
            | FockError::ZeroNorm => CliError::Numerical(e.to_string()),
        }
    }
}

/// Results of one command: the resolved config and the result records.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub config: Value,
    pub records: Vec<Value>,
}

fn read_json<T: DeserializeOwned>(path: &Path, field: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

fn scheme(common: &CommonArgs) -> Result<QuadratureScheme, CliError> {
    let scheme = QuadratureScheme {
        tail_tolerance: common.tail_tol,
        cells_per_axis: common.cells,
        truncation_radius: common.truncation_radius,
    };
    scheme.validate()?;
    Ok(scheme)
}

fn base_config(cli: &Cli, command: &str, scheme: &QuadratureScheme) -> Map<String, Value> {
    let mut config = Map::new();
    config.insert("record".into(), json!("config"));
    config.insert("command".into(), json!(command));
    config.insert("scheme".into(), to_value(scheme));
    config.insert("format".into(), to_value(&cli.common.format));
    config.insert("seed".into(), json!(cli.common.seed));
    config
}

fn tagged(kind: &str, value: Value) -> Value {
    let mut map = Map::new();
    map.insert("record".into(), json!(kind));
    match value {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("value".into(), other);
        }
    }
    Value::Object(map)
}

/// Functions with closed-form norms at `m = 0`, and the constant at every `m`.
fn builtin_functions(params: &Params) -> Vec<(EntireFunction, Option<f64>)> {
    let n = params.n;
    let along = |x: f64| {
        let mut reals = vec![0.0; 2 * n];
        reals[0] = x;
        Point::from_reals(&reals).expect("finite coordinates")
    };
    let m0 = params.m == 0;
    let mut out = vec![(EntireFunction::constant(n, 1.0), Some(1.0))];
    for x in [0.0, 1.0, 2.0] {
        out.push((EntireFunction::normalized_kernel(along(x)), m0.then_some(1.0)));
    }
    for x in [1.0, 2.0] {
        out.push((
            EntireFunction::kernel(along(x)),
            m0.then(|| (params.alpha * x * x / 2.0).exp()),
        ));
    }
    out
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let scheme = scheme(&cli.common)?;
    let seed = cli.common.seed;
    match &cli.command {
        Command::Lattice {
            dim,
            domain_radius,
            separation,
            probes,
        } => {
            let mut config = base_config(cli, "lattice", &scheme);
            config.insert(
                "lattice".into(),
                json!({"dim": dim, "domain_radius": domain_radius, "separation": separation, "probes": probes}),
            );
            let lat = make_lattice(*domain_radius, *separation, *dim)?;
            let report = verify_lattice(&lat, *probes, seed)?;
            let mut record = to_value(&report);
            record["valid"] = json!(report.is_valid(*separation));
            Ok(Report {
                config: Value::Object(config),
                records: vec![tagged("lattice", record)],
            })
        }
        Command::Carleson {
            params,
            measure,
            radii,
            t,
            r,
        } => {
            let params: Params = read_json(params, "params")?;
            params.validate()?;
            let record: MeasureRecord = read_json(measure, "measure")?;
            let mu = record.to_measure(params.n)?;
            let mut opts = CarlesonOptions::defaults(&params, seed)?;
            if let Some(radii) = radii {
                opts.radii = radii.clone();
            }
            if let Some(t) = t {
                opts.t = *t;
            }
            if let Some(r) = r {
                opts.r = *r;
            }
            opts.validate()?;
            let mut config = base_config(cli, "carleson", &scheme);
            config.insert("params".into(), to_value(&params));
            config.insert("measure".into(), to_value(&record));
            config.insert("options".into(), to_value(&opts));
            let lattice = make_lattice(
                (mu.support_radius() + opts.r).max(2.0 * opts.r),
                opts.r,
                params.n,
            )?;
            let verdict = classify_carleson(&mu, &params, &opts, &lattice, &scheme)?;
            Ok(Report {
                config: Value::Object(config),
                records: vec![tagged("carleson", to_value(&verdict))],
            })
        }
        Command::Compop {
            params,
            symbol,
            radii,
            target,
        } => {
            let params: Params = read_json(params, "params")?;
            params.validate()?;
            let record: SymbolRecord = read_json(symbol, "symbol")?;
            let sym = record.to_symbol(params.n)?;
            let mut opts = CompopOptions::defaults(params.n, seed);
            if let Some(radii) = radii {
                opts.radii = radii.clone();
            }
            opts.infinity_target = match target {
                TargetArg::FockInfinity => InfinityTarget::FockInfinity,
                TargetArg::LittleOh => InfinityTarget::LittleOh,
            };
            opts.validate()?;
            let mut config = base_config(cli, "compop", &scheme);
            config.insert("params".into(), to_value(&params));
            config.insert("symbol".into(), to_value(&record));
            config.insert("options".into(), to_value(&opts));
            let verdict = classify_compop(&sym, &params, &opts, &scheme)?;
            Ok(Report {
                config: Value::Object(config),
                records: vec![tagged("compop", to_value(&verdict))],
            })
        }
        Command::VerifyNorms { params, function } => {
            let params: Params = read_json(params, "params")?;
            params.validate()?;
            let functions: Vec<(EntireFunction, Option<f64>)> = match function {
                Some(path) => {
                    let value: Value = read_json(path, "function")?;
                    let records: Vec<FunctionRecord> = match value {
                        Value::Array(_) => serde_json::from_value(value),
                        single => serde_json::from_value(single).map(|r| vec![r]),
                    }
                    .map_err(|e| CliError::config("function", e.to_string()))?;
                    records
                        .iter()
                        .map(|r| Ok((r.to_function(params.n)?, None)))
                        .collect::<Result<_, CliError>>()?
                }
                None => builtin_functions(&params),
            };
            let mut config = base_config(cli, "verify-norms", &scheme);
            config.insert("params".into(), to_value(&params));
            config.insert(
                "functions".into(),
                to_value(&functions.iter().map(|(f, _)| FunctionRecord::from_function(f)).collect::<Vec<_>>()),
            );
            let mut records = Vec::with_capacity(functions.len());
            for (f, expected) in &functions {
                let norm = fock_sobolev_norm(f, &params, &scheme)?;
                let shifted = shifted_weight_norm(f, &params, &scheme)?;
                let integral_error = match params.p {
                    Exponent::Finite(_) => {
                        let field = NormTarget::from_function(f, &params)?.weighted_field(
                            &params,
                            params.p,
                            SobolevWeight::Modulus,
                        )?;
                        Some(integrate_gaussian(&field, &scheme)?.error_estimate)
                    }
                    Exponent::Infinite => None,
                };
                let derivative = match (f, params.p.finite()) {
                    (EntireFunction::Polynomial(_), Some(_)) => Some(derivative_norm(f, &params, &scheme)?),
                    _ => None,
                };
                records.push(tagged(
                    "norm",
                    json!({
                        "function": FunctionRecord::from_function(f),
                        "norm": norm,
                        "shifted_norm": shifted,
                        "derivative_norm": derivative,
                        "integral_error_estimate": integral_error,
                        "expected": expected,
                        "relative_error": expected.map(|e| (norm - e).abs() / e),
                    }),
                ));
            }
            Ok(Report {
                config: Value::Object(config),
                records,
            })
        }
        Command::Suite { radii, no_pullback } => {
            let mut opts = SuiteOptions::defaults(seed);
            if let Some(radii) = radii {
                opts.compop.radii = radii.clone();
            }
            opts.pullback = !no_pullback;
            opts.compop.validate()?;
            let mut config = base_config(cli, "suite", &scheme);
            config.insert("options".into(), to_value(&opts));
            let records = run_suite(&opts, &scheme)?
                .iter()
                .map(|r| tagged("scenario", to_value(r)))
                .collect();
            Ok(Report {
                config: Value::Object(config),
                records,
            })
        }
    }
}

/// Flattens nested objects and arrays into dotted keys.
fn flatten(prefix: &str, value: &Value, out: &mut BTreeMap<String, Value>, order: &mut Vec<String>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out, order);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out, order);
            }
        }
        leaf => {
            if out.insert(prefix.to_string(), leaf.clone()).is_none() {
                order.push(prefix.to_string());
            }
        }
    }
}

fn cell(value: Option<&Value>) -> String {
    match value {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

/// Serializes results: one JSON object per line, or a CSV table whose columns
/// are the flattened keys in order of first appearance.
pub fn emit_report(records: &[Value], format: Format) -> Vec<u8> {
    match format {
        Format::JsonLines => {
            let mut out = Vec::new();
            for r in records {
                serde_json::to_writer(&mut out, r).expect("JSON values serialize");
                out.push(b'\n');
            }
            out
        }
        Format::Csv => {
            let mut columns: Vec<String> = Vec::new();
            let rows: Vec<BTreeMap<String, Value>> = records
                .iter()
                .map(|r| {
                    let mut flat = BTreeMap::new();
                    let mut order = Vec::new();
                    flatten("", r, &mut flat, &mut order);
                    for k in order {
                        if !columns.contains(&k) {
                            columns.push(k);
                        }
                    }
                    flat
                })
                .collect();
            if columns.is_empty() {
                columns.push("record".into());
            }
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(&columns).expect("in-memory CSV");
            for row in &rows {
                writer
                    .write_record(columns.iter().map(|c| cell(row.get(c))))
                    .expect("in-memory CSV");
            }
            writer.into_inner().expect("in-memory CSV")
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Writes the report where the flags say.
pub fn write_report(report: &Report, common: &CommonArgs) -> Result<(), CliError> {
    match (common.format, &common.out) {
        (Format::JsonLines, out) => {
            let mut all = vec![report.config.clone()];
            all.extend(report.records.iter().cloned());
            let bytes = emit_report(&all, Format::JsonLines);
            match out {
                Some(path) => write_file(path, &bytes),
                None => io::stdout().write_all(&bytes).map_err(|e| CliError::Io {
                    path: "<stdout>".into(),
                    reason: e.to_string(),
                }),
            }
        }
        (Format::Csv, Some(path)) => {
            write_file(path, &emit_report(&report.records, Format::Csv))?;
            let mut sidecar = path.as_os_str().to_owned();
            sidecar.push(".config.json");
            let mut config = serde_json::to_vec_pretty(&report.config).expect("JSON values serialize");
            config.push(b'\n');
            write_file(Path::new(&sidecar), &config)
        }
        (Format::Csv, None) => Err(CliError::config("out", "csv output needs --out for the config sidecar")),
    }
}

/// Parses, runs, and reports; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::config("arguments", e.to_string().trim().to_string());
            eprintln!("{}", err.record());
            return err.exit_code();
        }
    };
    match execute(&cli).and_then(|report| write_report(&report, &cli.common)) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.record());
            err.exit_code()
        }
    }
}
