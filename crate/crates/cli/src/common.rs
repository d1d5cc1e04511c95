use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use regulus_core::config_graph::Params;
use regulus_core::exploration::ActivePolicy;
use regulus_core::mc_harness::{CiMethod, TailMode};
use regulus_core::stats::sig12;
use regulus_core::theory::{EnvelopeMode, ExponentVariant};
use serde::Serialize;
use serde_json::{json, Value};

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Serialize)]
pub struct Global {
    /// Worker threads for the harness; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Master seed.
    #[arg(long, global = true, env = "REGULUS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write machine-readable output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Record elapsed_s as 0 so outputs are byte-comparable.
    #[arg(long, global = true)]
    pub no_timing: bool,
}

impl Global {
    pub fn timing(&self) -> bool {
        !self.no_timing
    }
}

/// Graph size and percolation level: exactly one of --p and --lambda.
#[derive(Args, Clone, Debug, Serialize)]
pub struct GraphArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    /// Retention probability.
    #[arg(long, conflicts_with = "lambda", required_unless_present = "lambda")]
    pub p: Option<f64>,
    /// Critical window offset; p = (1 + lambda n^{-1/3}) / (d - 1).
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
}

impl GraphArgs {
    pub fn params(&self) -> Result<Params> {
        Ok(match (self.p, self.lambda) {
            (Some(p), None) => Params::new(self.n, self.d, p)?,
            (None, Some(l)) => Params::critical(self.n, self.d, l)?,
            _ => {
                return Err(regulus_core::Error::InvalidParams(
                    "give exactly one of --p and --lambda".into(),
                )
                .into())
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Fifo,
    Lifo,
}

impl From<PolicyArg> for ActivePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Fifo => ActivePolicy::Fifo,
            PolicyArg::Lifo => ActivePolicy::Lifo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Vertex,
    Max,
    Simple,
}

impl From<ModeArg> for TailMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Vertex => TailMode::Vertex,
            ModeArg::Max => TailMode::Max,
            ModeArg::Simple => TailMode::Simple,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiArg {
    Wilson,
    ClopperPearson,
}

impl From<CiArg> for CiMethod {
    fn from(c: CiArg) -> Self {
        match c {
            CiArg::Wilson => CiMethod::Wilson,
            CiArg::ClopperPearson => CiMethod::ClopperPearson,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    #[default]
    Theorem11,
    Abstract,
}

impl From<VariantArg> for ExponentVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Theorem11 => ExponentVariant::Theorem11,
            VariantArg::Abstract => ExponentVariant::Abstract,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeArg {
    Vertex,
    Max,
}

impl From<EnvelopeArg> for EnvelopeMode {
    fn from(m: EnvelopeArg) -> Self {
        match m {
            EnvelopeArg::Vertex => EnvelopeMode::Vertex,
            EnvelopeArg::Max => EnvelopeMode::Max,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    #[default]
    Csv,
    Json,
}

/// Resolved configuration of a run: subcommand flags, shared flags and derived values.
pub fn config(
    command: &str,
    args: &impl Serialize,
    global: &Global,
    resolved: Value,
) -> Result<Value> {
    Ok(json!({
        "command": command,
        "args": round_floats(serde_json::to_value(args)?),
        "seed": global.seed,
        "threads": global.threads,
        "timing": global.timing(),
        "resolved": round_floats(resolved),
    }))
}

/// `# config: {...}` line that precedes CSV output.
pub fn config_line(config: &Value) -> String {
    format!("# config: {config}\n")
}

/// Rounds every float in a JSON value to 12 significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(num) if num.is_f64() => num
            .as_f64()
            .map(|f| json!(sig12(f)))
            .unwrap_or(Value::Number(num)),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => {
            Value::Object(o.into_iter().map(|(k, x)| (k, round_floats(x))).collect())
        }
        other => other,
    }
}

/// Writes `text` to --out (replacing it) or stdout.
pub fn emit(global: &Global, text: &str) -> Result<()> {
    match &global.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Appends a CSV block to --out, dropping the header row when the file
/// already holds records; writes the whole block to stdout otherwise.
pub fn emit_csv_append(global: &Global, config: &Value, csv_text: &str) -> Result<()> {
    let block = format!("{}{}", config_line(config), csv_text);
    let Some(path) = &global.out else {
        return emit(global, &block);
    };
    let has_records = std::fs::metadata(path)
        .map(|m| m.len() > 0)
        .unwrap_or(false);
    let body = if has_records {
        csv_text.split_once('\n').map_or("", |(_, rest)| rest)
    } else {
        csv_text
    };
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    f.write_all(config_line(config).as_bytes())?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn json_text(v: &Value) -> Result<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(v)?))
}
