use anyhow::{bail, Result};
use clap::{Args, Subcommand};
use num_rational::BigRational;
use regulus_core::oracles::{self, Barrier, EndAt};
use regulus_core::theory::parse_rational;
use serde::Serialize;
use serde_json::{json, Value};

use crate::common::{emit, json_text, round_floats, Global};

#[derive(Subcommand, Clone, Debug)]
pub enum OracleOp {
    /// Exact component-size laws by enumerating every matching and mask.
    SmallGraph(SmallGraph),
    /// Exact probability that a lattice walk stays above a constant barrier.
    Walk(Walk),
    /// Binomial pmf or upper tail.
    Binomial(BinomialArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SmallGraph {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Retention probability, as a fraction or decimal.
    #[arg(long)]
    pub p: String,
    /// Restrict to simple matchings.
    #[arg(long)]
    pub simple: bool,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Walk {
    #[arg(long)]
    pub t: u64,
    #[arg(long, allow_hyphen_values = true)]
    pub start: i64,
    /// Step and its probability as `value:prob`; repeat for each step.
    #[arg(long = "step", required = true, allow_hyphen_values = true)]
    pub steps: Vec<String>,
    /// End level, or `any`.
    #[arg(long, default_value = "any", allow_hyphen_values = true)]
    pub end: String,
    /// The walk must stay strictly above this level.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    pub barrier: i64,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct BinomialArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: u64,
    #[arg(long = "P")]
    #[serde(rename = "P")]
    pub big_p: f64,
    #[arg(long)]
    pub j: u64,
    /// P(X >= j) instead of P(X = j).
    #[arg(long)]
    pub tail: bool,
}

fn parse_step(s: &str) -> Result<(i64, BigRational)> {
    let Some((v, q)) = s.split_once(':') else {
        bail!(regulus_core::Error::Parse(format!(
            "step `{s}` is not value:prob"
        )));
    };
    let v: i64 = v
        .trim()
        .parse()
        .map_err(|_| regulus_core::Error::Parse(format!("bad step value in `{s}`")))?;
    Ok((v, parse_rational(q)?))
}

pub fn run(op: &OracleOp, global: &Global) -> Result<u8> {
    let (name, args, value): (&str, Value, Value) = match op {
        OracleOp::SmallGraph(a) => {
            let counts = oracles::exhaustive_small_graph(a.n, a.d)?;
            let dist = counts.evaluate_exact(&parse_rational(&a.p)?, a.simple)?;
            eprintln!(
                "P(simple) = {} over {} matchings",
                dist.p_simple_exact,
                counts.matchings()
            );
            (
                "small-graph",
                serde_json::to_value(a)?,
                serde_json::to_value(dist)?,
            )
        }
        OracleOp::Walk(a) => {
            let law = a
                .steps
                .iter()
                .map(|s| parse_step(s))
                .collect::<Result<Vec<_>>>()?;
            let end = match a.end.as_str() {
                "any" | "ANY" => EndAt::Any,
                k => EndAt::Level(
                    k.parse()
                        .map_err(|_| regulus_core::Error::Parse(format!("bad end level {k}")))?,
                ),
            };
            let w = oracles::walk_stay_positive_exact(
                a.t,
                a.start,
                &law,
                end,
                &Barrier::Constant(a.barrier),
            )?;
            if w.downgraded {
                eprintln!(
                    "horizon above {}: evaluated in floating point",
                    oracles::EXACT_HORIZON
                );
            }
            let v = json!({
                "value": w.value,
                "exact": w.exact.map(|q| q.to_string()),
                "downgraded": w.downgraded,
            });
            ("walk", serde_json::to_value(a)?, v)
        }
        OracleOp::Binomial(a) => {
            let v = if a.tail {
                oracles::binomial_tail(a.big_n, a.big_p, a.j)?
            } else {
                oracles::binomial_pmf(a.big_n, a.big_p, a.j)?
            };
            ("binomial", serde_json::to_value(a)?, json!(v))
        }
    };
    let out = json!({ "op": name, "args": round_floats(args), "value": round_floats(value) });
    emit(global, &json_text(&out)?)?;
    Ok(0)
}
