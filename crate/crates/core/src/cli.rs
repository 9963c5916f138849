//! Command-line front end.
//!
//! Every command reads its parameters from flags and, optionally, from a
//! JSON file given with `--config` whose keys are the flag names (for
//! example `{"alpha": 0.6, "tmax": 10, "n-paths": 500}`). Flags win over the
//! file. Tables are CSV with a header row and floats written with 17
//! significant digits; JSON documents carry `schema_version`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::kernels::{self, KernelSpec, Model, ProcessParams, SpectralQuadrature};
use crate::mlf::{self, MlSpec};
use crate::sampling::{self, AnyKernel, BrownianRep, SamplePath};
use crate::shotnoise::{self, ShotNoiseSpec};
use crate::subord::{BernsteinSpec, CustomTriplet, GeneralizedKernelSpec, GeneralizedModel, NamedTail, TimeScale};
use crate::verify;
use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "FRACOU_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "fracou", version, about = "Long-memory Gaussian processes: kernels, spectra, samplers, shot noise, residual checks")]
pub struct Cli {
    /// JSON file of parameters keyed by flag name; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for the samplers (output does not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file. Defaults to `$FRACOU_OUT_DIR/<command>.<ext>`, else stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a covariance kernel.
    Kernel(KernelArgs),
    /// Spectral density of the stationary kernel.
    Spectrum(SpectrumArgs),
    /// Draw Gaussian sample paths.
    Sample(SampleArgs),
    /// Simulate rescaled shot noise and compare with its Gaussian limit.
    Shotnoise(ShotnoiseArgs),
    /// Residual checks and special-function evaluation, reported as JSON.
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Spectrum(_) => "spectrum",
            Command::Sample(_) => "sample",
            Command::Shotnoise(_) => "shotnoise",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelModel {
    /// Stationary fractional OU, one-lag `r(s)`.
    Stationary,
    /// Fractional OU started at zero.
    FractionalOu,
    /// OU on the deterministic clock.
    TimeChangedOu,
    /// Stationary OU on the deterministic clock.
    TimeChangedStationaryOu,
    Xg,
    /// One-lag `r_g(s)`.
    Ybarg,
    Yg,
    /// `W(t^α)`; sampling only.
    ScaledBm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Stable,
    Cpe,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockArg {
    Natural,
    Doubled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Factorization,
    Brownian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteArg {
    FpResidual,
    CgfResidual,
    GfpResidual,
    Mlf,
}

/// Lévy tail pieces as JSON, e.g. `[{"kind":"power","alpha":0.5,"weight":1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TailList(pub Vec<NamedTail>);

impl FromStr for TailList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map(TailList).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ProcessArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Default 1.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Default 1.
    #[arg(long)]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GridArgs {
    /// Default 0.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Default 1.
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Number of intervals; default 100.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Jump rate of the compound-Poisson-exponential family.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub kill: Option<f64>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub tail: Option<TailList>,
    /// Clock of `xg`; default doubled.
    #[arg(long, value_enum)]
    pub time_scale: Option<ClockArg>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub model: Option<KernelModel>,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Fixed first time for two-time kernels; the diagonal when absent.
    #[arg(long)]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
    /// Comma-separated frequencies; default 1.
    #[arg(long, value_delimiter = ',')]
    pub omega: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub model: Option<KernelModel>,
    #[arg(long, value_enum)]
    pub sampler: Option<Sampler>,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Default 1000.
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Default 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ShotnoiseArgs {
    /// Default 1.
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Default 1.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Default 0.1.
    #[arg(long)]
    pub xi0: Option<f64>,
    /// Comma-separated rescaling indices; default 1,100.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Node used for the KS test; default the last.
    #[arg(long)]
    pub ref_node: Option<usize>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub family: FamilyArgs,
    /// Fourier variable; default 1.
    #[arg(long)]
    pub xi: Option<f64>,
    /// CGF argument; defaults to `xi`.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Default 256.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Mittag-Leffler parameters for the `mlf` suite.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gam: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
}

fn config_error(what: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        what: what.into(),
        message: message.into(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Flags override file values key by key; unknown file keys are rejected.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: &serde_json::Map<String, Value>) -> Result<T, Error> {
    let mut map = match serde_json::to_value(flags) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("argument structs serialize to objects"),
    };
    for (k, v) in file {
        match map.get_mut(k) {
            Some(slot) if slot.is_null() => *slot = v.clone(),
            Some(_) => {}
            None => return Err(config_error("config", format!("unknown key {k:?}"))),
        }
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| config_error("config", e.to_string()))
}

const GLOBAL_KEYS: [&str; 4] = ["command", "threads", "out", "format"];

fn read_config(path: &Path) -> Result<serde_json::Map<String, Value>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(config_error(path.display().to_string(), "expected a JSON object")),
        Err(e) => Err(config_error(path.display().to_string(), e.to_string())),
    }
}

fn required<T>(name: &str, v: Option<T>) -> Result<T, Error> {
    v.ok_or_else(|| config_error(name, "missing required parameter"))
}

fn process(p: &ProcessArgs) -> Result<ProcessParams, Error> {
    Ok(ProcessParams::new(
        required("alpha", p.alpha)?,
        p.gamma.unwrap_or(1.0),
        p.theta.unwrap_or(1.0),
    )?)
}

fn bernstein(f: &FamilyArgs, alpha: Option<f64>) -> Result<BernsteinSpec, Error> {
    let spec = match required("family", f.family)? {
        Family::Stable => BernsteinSpec::Stable {
            alpha: required("alpha", alpha)?,
        },
        Family::Cpe => BernsteinSpec::CompoundPoissonExp { a: required("a", f.a)? },
        Family::Custom => BernsteinSpec::Custom(CustomTriplet {
            kill: f.kill.unwrap_or(0.0),
            drift: f.drift.unwrap_or(0.0),
            tail: f.tail.clone().map(|t| t.0).unwrap_or_default(),
        }),
    };
    spec.validate()?;
    Ok(spec)
}

fn generalized(model: GeneralizedModel, f: &FamilyArgs, p: &ProcessArgs) -> Result<GeneralizedKernelSpec, Error> {
    let scale = match f.time_scale {
        Some(ClockArg::Natural) => TimeScale::Natural,
        Some(ClockArg::Doubled) | None => TimeScale::Doubled,
    };
    Ok(GeneralizedKernelSpec::new(
        model,
        bernstein(f, p.alpha)?,
        p.gamma.unwrap_or(1.0),
        p.theta.unwrap_or(1.0),
        scale,
    )?)
}

fn any_kernel(model: KernelModel, f: &FamilyArgs, p: &ProcessArgs) -> Result<AnyKernel, Error> {
    let fractional = |m: Model| -> Result<AnyKernel, Error> { Ok(KernelSpec::new(m, process(p)?)?.into()) };
    match model {
        KernelModel::Stationary => fractional(Model::FractionalStationaryOu),
        KernelModel::FractionalOu => fractional(Model::FractionalOu),
        KernelModel::TimeChangedOu => fractional(Model::TimeChangedOu),
        KernelModel::TimeChangedStationaryOu => fractional(Model::TimeChangedStationaryOu),
        KernelModel::Xg => Ok(generalized(GeneralizedModel::Xg, f, p)?.into()),
        KernelModel::Ybarg => Ok(generalized(GeneralizedModel::YbarG, f, p)?.into()),
        KernelModel::Yg => Ok(generalized(GeneralizedModel::Yg, f, p)?.into()),
        KernelModel::ScaledBm => Err(config_error("model", "scaled-bm has no covariance table; use `sample --sampler brownian`")),
    }
}

fn grid_nodes(g: &GridArgs) -> Result<Vec<f64>, Error> {
    let t0 = g.t0.unwrap_or(0.0);
    let tmax = g.tmax.unwrap_or(1.0);
    let steps = g.steps.unwrap_or(100);
    if !(t0.is_finite() && t0 >= 0.0) {
        return Err(config_error("t0", format!("t0 = {t0} violates >= 0")));
    }
    if !(tmax.is_finite() && tmax > t0) {
        return Err(config_error("tmax", format!("tmax = {tmax} violates > t0")));
    }
    if steps < 1 {
        return Err(config_error("steps", "steps = 0 violates >= 1"));
    }
    let h = (tmax - t0) / steps as f64;
    Ok((0..=steps)
        .map(|k| if k == steps { tmax } else { t0 + k as f64 * h })
        .collect())
}

/// A numeric table; integer-valued columns are listed in `integer`.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub integer: Vec<usize>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            integer: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                if self.integer.contains(&j) {
                    let _ = write!(out, "{}", *v as i64);
                } else {
                    let _ = write!(out, "{v:.16e}");
                }
            }
            out.push('\n');
        }
        out
    }

    fn to_json(&self, command: &str) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "columns": self.columns,
            "rows": self.rows,
        })
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// What a command produced: the main document and an optional JSON sidecar.
pub struct Output {
    pub main: String,
    pub extension: &'static str,
    pub sidecar: Option<Value>,
}

fn table_output(t: Table, command: &str, format: Format) -> Output {
    match format {
        Format::Csv => Output {
            main: t.to_csv(),
            extension: "csv",
            sidecar: None,
        },
        Format::Json => Output {
            main: pretty(&t.to_json(command)),
            extension: "json",
            sidecar: None,
        },
    }
}

fn kernel_cmd(a: &KernelArgs, format: Format) -> Result<Output, Error> {
    let model = required("model", a.model)?;
    let k = any_kernel(model, &a.family, &a.process)?;
    let nodes = grid_nodes(&a.grid)?;
    let one_lag = matches!(model, KernelModel::Stationary | KernelModel::Ybarg);
    let mut t = if one_lag { Table::new(&["s", "r"]) } else { Table::new(&["s", "t", "cov"]) };
    for &x in &nodes {
        if one_lag {
            t.rows.push(vec![x, k.cov(0.0, x)?]);
        } else {
            let s = a.s.unwrap_or(x);
            t.rows.push(vec![s, x, k.cov(s, x)?]);
        }
    }
    Ok(table_output(t, "kernel", format))
}

fn spectrum_cmd(a: &SpectrumArgs, format: Format) -> Result<Output, Error> {
    let p = process(&a.process)?;
    let q = SpectralQuadrature::default();
    let mut t = Table::new(&["omega", "S"]);
    for &w in a.omega.as_deref().unwrap_or(&[1.0]) {
        t.rows.push(vec![w, kernels::spectral_density(w, &p, &q)?]);
    }
    Ok(table_output(t, "spectrum", format))
}

fn parse_source(sp: &SamplePath) -> Value {
    serde_json::from_str(&sp.source).unwrap_or(Value::String(sp.source.clone()))
}

fn sample_cmd(a: &SampleArgs, format: Format) -> Result<Output, Error> {
    let model = required("model", a.model)?;
    let times = grid_nodes(&a.grid)?;
    let n_paths = a.n_paths.unwrap_or(1000);
    let seed = a.seed.unwrap_or(0);
    let sampler = a.sampler.unwrap_or(if model == KernelModel::ScaledBm {
        Sampler::Brownian
    } else {
        Sampler::Factorization
    });
    let sp = match sampler {
        Sampler::Factorization => sampling::sample_gaussian(&any_kernel(model, &a.family, &a.process)?, &times, n_paths, seed)?,
        Sampler::Brownian => {
            let rep = match model {
                KernelModel::TimeChangedOu => BrownianRep::TimeChangedOu(process(&a.process)?),
                KernelModel::Xg => BrownianRep::Generalized(generalized(GeneralizedModel::Xg, &a.family, &a.process)?),
                KernelModel::ScaledBm => BrownianRep::PowerClock {
                    alpha: required("alpha", a.process.alpha)?,
                },
                _ => {
                    return Err(config_error(
                        "sampler",
                        "the brownian sampler supports time-changed-ou, xg and scaled-bm",
                    ))
                }
            };
            sampling::sample_brownian_rep(&rep, &times, n_paths, seed)?
        }
    };
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "sample",
        "seed": seed,
        "n_paths": n_paths,
        "sampler": sampler,
        "kernel": parse_source(&sp),
        "jitter": sp.jitter,
    });
    match format {
        Format::Csv => {
            let mut cols = vec!["t".to_string()];
            cols.extend((0..n_paths).map(|i| format!("path_{i}")));
            let t = Table {
                columns: cols,
                rows: sp
                    .times
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| std::iter::once(t).chain(sp.paths.iter().map(|p| p[j])).collect())
                    .collect(),
                integer: Vec::new(),
            };
            Ok(Output {
                main: t.to_csv(),
                extension: "csv",
                sidecar: Some(meta),
            })
        }
        Format::Json => {
            let mut doc = meta;
            doc["times"] = json!(sp.times);
            doc["paths"] = json!(sp.paths);
            Ok(Output {
                main: pretty(&doc),
                extension: "json",
                sidecar: None,
            })
        }
    }
}

fn shotnoise_cmd(a: &ShotnoiseArgs, format: Format) -> Result<Output, Error> {
    let ns = a.n.clone().unwrap_or_else(|| vec![1, 100]);
    if ns.is_empty() {
        return Err(config_error("n", "at least one value required"));
    }
    let base = ShotNoiseSpec::new(
        a.lambda0.unwrap_or(1.0),
        required("alpha", a.alpha)?,
        a.gamma.unwrap_or(1.0),
        a.xi0.unwrap_or(0.1),
        1,
    )?;
    let mut grid = a.grid.clone();
    if grid.t0.is_none() {
        // U_n(0) = 0; start one step in
        let tmax = grid.tmax.unwrap_or(1.0);
        grid.t0 = Some(tmax / grid.steps.unwrap_or(100) as f64);
        grid.steps = Some(grid.steps.unwrap_or(100).saturating_sub(1).max(1));
    }
    let times = grid_nodes(&grid)?;
    let ref_node = a.ref_node.unwrap_or(times.len() - 1);
    let pairs: Vec<(usize, usize)> = (0..times.len()).filter(|&j| j != ref_node).map(|j| (j, ref_node)).collect();
    let report = shotnoise::convergence_report(&base, &ns, &times, ref_node, &pairs, a.n_paths.unwrap_or(1000), a.seed.unwrap_or(0))?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "shotnoise",
        "spec": base,
        "seed": a.seed.unwrap_or(0),
        "n_paths": a.n_paths.unwrap_or(1000),
        "report": report,
    });
    match format {
        Format::Csv => {
            let mut t = Table::new(&["n", "t", "mean", "var", "var_se", "theory_var"]);
            t.integer = vec![0];
            for e in &report.entries {
                for m in &e.nodes {
                    t.rows.push(vec![e.n as f64, m.t, m.mean, m.variance, m.variance_se, m.theory_variance]);
                }
            }
            Ok(Output {
                main: t.to_csv(),
                extension: "csv",
                sidecar: Some(doc),
            })
        }
        Format::Json => Ok(Output {
            main: pretty(&doc),
            extension: "json",
            sidecar: None,
        }),
    }
}

fn verify_cmd(a: &VerifyArgs) -> Result<Output, Error> {
    let suite = required("suite", a.suite)?;
    let steps = a.steps.unwrap_or(256);
    let xi = a.xi.unwrap_or(1.0);
    let report = match suite {
        SuiteArg::FpResidual => serde_json::to_value(verify::fp_residual(&process(&a.process)?, xi, steps)?),
        SuiteArg::CgfResidual => serde_json::to_value(verify::cgf_residual(&process(&a.process)?, a.eta.unwrap_or(xi), steps)?),
        SuiteArg::GfpResidual => serde_json::to_value(verify::gfp_residual(
            &bernstein(&a.family, a.process.alpha)?,
            a.process.gamma.unwrap_or(1.0),
            a.process.theta.unwrap_or(1.0),
            xi,
            steps,
        )?),
        SuiteArg::Mlf => {
            let spec = MlSpec::new(required("beta", a.beta)?, a.gam.unwrap_or(1.0), required("x", a.x)?)?;
            serde_json::to_value(mlf::mittag_leffler(&spec)?)
        }
    }
    .expect("reports serialize");
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "suite": suite,
        "report": report,
    });
    Ok(Output {
        main: pretty(&doc),
        extension: "json",
        sidecar: None,
    })
}

fn dispatch(cmd: &Command, file: &serde_json::Map<String, Value>, format: Format) -> Result<Output, Error> {
    match cmd {
        Command::Kernel(a) => kernel_cmd(&merge(a, file)?, format),
        Command::Spectrum(a) => spectrum_cmd(&merge(a, file)?, format),
        Command::Sample(a) => sample_cmd(&merge(a, file)?, format),
        Command::Shotnoise(a) => shotnoise_cmd(&merge(a, file)?, format),
        Command::Verify(a) => verify_cmd(&merge(a, file)?),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Runs one command; output goes to a file or stdout.
pub fn run(cli: &Cli) -> Result<(), Error> {
    let mut file = match &cli.config {
        Some(p) => read_config(p)?,
        None => serde_json::Map::new(),
    };
    if let Some(c) = file.get("command").and_then(Value::as_str) {
        if c != cli.command.name() {
            return Err(config_error("config", format!("file is for command {c:?}, not {:?}", cli.command.name())));
        }
    }
    let pick = |k: &str| file.get(k).cloned().filter(|v| !v.is_null());
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => pick("threads").map(serde_json::from_value).transpose().map_err(|e| config_error("threads", e.to_string()))?,
    };
    let out: Option<PathBuf> = match &cli.out {
        Some(p) => Some(p.clone()),
        None => pick("out").map(serde_json::from_value).transpose().map_err(|e| config_error("out", e.to_string()))?,
    };
    let format = match cli.format {
        Some(f) => f,
        None => pick("format")
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| config_error("format", e.to_string()))?
            .unwrap_or(Format::Csv),
    };
    for k in GLOBAL_KEYS {
        file.remove(k);
    }
    if threads == Some(0) {
        return Err(config_error("threads", "threads = 0 violates >= 1"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| config_error("threads", e.to_string()))?;
    let output = pool.install(|| dispatch(&cli.command, &file, format))?;

    let target = out.or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{}.{}", cli.command.name(), output.extension)))
    });
    match target {
        Some(path) => {
            write_file(&path, &output.main)?;
            if let Some(meta) = &output.sidecar {
                let side = if path.extension().is_some_and(|e| e == "json") {
                    path.with_extension("meta.json")
                } else {
                    path.with_extension("json")
                };
                write_file(&side, &pretty(meta))?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.main.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_error(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}

/// JSON record written to stderr on failure.
pub fn error_record(e: &Error) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "error": {
            "module": e.module(),
            "code": e.code(),
            "message": e.to_string(),
            "exit_code": e.exit_code(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("fracou").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn csv_floats_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.integer = vec![0];
        t.rows.push(vec![3.0, 0.1]);
        t.rows.push(vec![4.0, 1.0 / 3.0]);
        let csv = t.to_csv();
        assert!(csv.starts_with("a,b\n3,1.0000000000000001e-1\n"));
        let last: f64 = csv.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(last, 1.0 / 3.0);
    }

    #[test]
    fn stationary_kernel_table() {
        let cli = parse(&["kernel", "--model", "stationary", "--alpha", "0.6", "--tmax", "10", "--steps", "100"]);
        let Command::Kernel(a) = &cli.command else { panic!() };
        let out = kernel_cmd(a, Format::Csv).unwrap();
        let mut lines = out.main.lines();
        assert_eq!(lines.next(), Some("s,r"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 1.0]);
        assert_eq!(out.main.lines().count(), 102);
    }

    #[test]
    fn flags_override_config() {
        let file: serde_json::Map<String, Value> =
            serde_json::from_str(r#"{"alpha": 0.3, "gamma": 2.0, "n-paths": 7, "tail": [{"kind":"exponential","rate":1,"weight":1}]}"#).unwrap();
        let a = SampleArgs {
            process: ProcessArgs {
                alpha: Some(0.6),
                ..Default::default()
            },
            ..Default::default()
        };
        let m = merge(&a, &file).unwrap();
        assert_eq!(m.process.alpha, Some(0.6));
        assert_eq!(m.process.gamma, Some(2.0));
        assert_eq!(m.n_paths, Some(7));
        assert_eq!(m.family.tail.unwrap().0.len(), 1);
        let bad: serde_json::Map<String, Value> = serde_json::from_str(r#"{"alhpa": 1}"#).unwrap();
        assert!(merge(&a, &bad).is_err());
    }

    #[test]
    fn spectrum_at_alpha_one() {
        let cli = parse(&["spectrum", "--alpha", "1", "--gamma", "1", "--theta", "1", "--omega", "1"]);
        let Command::Spectrum(a) = &cli.command else { panic!() };
        let out = spectrum_cmd(a, Format::Csv).unwrap();
        let v: f64 = out.main.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-8);
    }

    #[test]
    fn verify_fp_json() {
        let cli = parse(&["verify", "--suite", "fp-residual", "--alpha", "0.7", "--xi", "1", "--steps", "256"]);
        let Command::Verify(a) = &cli.command else { panic!() };
        let doc: Value = serde_json::from_str(&verify_cmd(a).unwrap().main).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert!(doc["report"]["max_norm"].as_f64().unwrap() < 1e-3);
        assert!(doc["report"]["order_estimate"].as_f64().is_some());
    }

    #[test]
    fn errors_carry_module_and_bound() {
        let cli = parse(&["kernel", "--model", "stationary", "--alpha", "1.5"]);
        let Command::Kernel(a) = &cli.command else { panic!() };
        let e = kernel_cmd(a, Format::Csv).err().unwrap();
        assert_eq!(e.exit_code(), 2);
        let r = error_record(&e);
        assert_eq!(r["error"]["module"], "kernels");
        assert!(r["error"]["message"].as_str().unwrap().contains("alpha"));
        assert!(r["error"]["message"].as_str().unwrap().contains("(0, 1]"));
        let cli = parse(&["kernel", "--model", "ybarg"]);
        let Command::Kernel(a) = &cli.command else { panic!() };
        assert_eq!(kernel_cmd(a, Format::Csv).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn generalized_kernels_tabulate() {
        for (model, fam) in [("xg", "cpe"), ("ybarg", "cpe"), ("yg", "stable")] {
            let cli = parse(&["kernel", "--model", model, "--family", fam, "--a", "1", "--alpha", "0.5", "--tmax", "2", "--steps", "4"]);
            let Command::Kernel(a) = &cli.command else { panic!() };
            assert_eq!(kernel_cmd(a, Format::Json).unwrap().extension, "json");
        }
    }
}
