use anyhow::Result;
use clap::{Args, Subcommand};
use num_rational::BigRational;
use regulus_core::theory::{self, Scalar, StepLaw};
use serde::Serialize;
use serde_json::{json, Value};

use crate::common::{json_text, round_floats, EnvelopeArg, Global, VariantArg};

#[derive(Subcommand, Clone, Debug)]
pub enum TheoryOp {
    /// G_lambda(A, d).
    GExponent(GExponent),
    /// q(T) = p (1 - 2/d) T (T - 1) / (2n).
    QUpper(QArgs),
    /// Curve the gap D - delta is compared with.
    QLower(QLower),
    /// Horizon floor((d-1) A n^{2/3}) - ceil(n^{1/2}) - 1.
    TUpper(Horizon),
    /// Horizon floor((d-1) A n^{2/3}) + 1.
    TLower(Horizon),
    /// Endpoint offset (k + d - 4 - lambda (T + 2) n^{-1/3}) / (d - 1).
    XOffset(XOffset),
    /// Ballot bound for a two-point step law, in exact rationals.
    BallotGeneric(BallotGeneric),
    /// Ballot bound for the xi walk, in exact rationals.
    BallotRegular(BallotRegular),
    /// P(d + sum of `steps` xi increments = level), in exact rationals.
    XiSumPmf(XiSumPmf),
    /// Point bound on P(Bin(N, P) = x).
    BinomialPoint(Binomial),
    /// Chernoff bound on P(Bin(N, P) >= x).
    Chernoff(Binomial),
    /// Density at z of Brownian motion from x that stays above y + mu s up to t.
    ReflectionDensity(Reflection),
    /// Tilt parameter nu.
    TiltNu(TiltNu),
    /// Tilt parameter gamma.
    TiltGamma(TiltGamma),
    /// Times, slopes and curves of the lower-bound construction.
    BrownianGeometry(Geometry),
    /// Tail envelope c A^{-s} e^{-G}.
    Envelope(Envelope),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct GExponent {
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantArg,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct QArgs {
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct QLower {
    #[command(flatten)]
    #[serde(flatten)]
    pub q: QArgs,
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: f64,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Horizon {
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct XOffset {
    #[arg(long, allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct BallotGeneric {
    #[arg(long)]
    pub t: u64,
    #[arg(long)]
    pub k: i64,
    #[arg(long)]
    pub h: i64,
    /// Up step of the two-point law.
    #[arg(long)]
    pub up: i64,
    /// Down step of the two-point law.
    #[arg(long, allow_hyphen_values = true, default_value_t = -1)]
    pub down: i64,
    /// Probability of the up step, as a fraction or decimal.
    #[arg(long)]
    pub p: String,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct BallotRegular {
    #[arg(long)]
    pub t: u64,
    #[arg(long)]
    pub k: i64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub p: String,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct XiSumPmf {
    #[arg(long)]
    pub steps: u64,
    #[arg(long, allow_hyphen_values = true)]
    pub level: i64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub p: String,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Binomial {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: u64,
    #[arg(long = "P")]
    #[serde(rename = "P")]
    pub big_p: f64,
    #[arg(long)]
    pub x: f64,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Reflection {
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub y: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub z: f64,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct TiltNu {
    #[arg(long = "t-prime")]
    pub t_prime: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub d: usize,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct TiltGamma {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub d: usize,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Geometry {
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub lambda: f64,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Envelope {
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = EnvelopeArg::Max)]
    pub mode: EnvelopeArg,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantArg,
}

impl TheoryOp {
    fn name(&self) -> &'static str {
        match self {
            TheoryOp::GExponent(_) => "g-exponent",
            TheoryOp::QUpper(_) => "q-upper",
            TheoryOp::QLower(_) => "q-lower",
            TheoryOp::TUpper(_) => "t-upper",
            TheoryOp::TLower(_) => "t-lower",
            TheoryOp::XOffset(_) => "x-offset",
            TheoryOp::BallotGeneric(_) => "ballot-generic",
            TheoryOp::BallotRegular(_) => "ballot-regular",
            TheoryOp::XiSumPmf(_) => "xi-sum-pmf",
            TheoryOp::BinomialPoint(_) => "binomial-point",
            TheoryOp::Chernoff(_) => "chernoff",
            TheoryOp::ReflectionDensity(_) => "reflection-density",
            TheoryOp::TiltNu(_) => "tilt-nu",
            TheoryOp::TiltGamma(_) => "tilt-gamma",
            TheoryOp::BrownianGeometry(_) => "brownian-geometry",
            TheoryOp::Envelope(_) => "envelope",
        }
    }

    fn args(&self) -> Result<Value> {
        Ok(match self {
            TheoryOp::GExponent(a) => serde_json::to_value(a)?,
            TheoryOp::QUpper(a) => serde_json::to_value(a)?,
            TheoryOp::QLower(a) => serde_json::to_value(a)?,
            TheoryOp::TUpper(a) | TheoryOp::TLower(a) => serde_json::to_value(a)?,
            TheoryOp::XOffset(a) => serde_json::to_value(a)?,
            TheoryOp::BallotGeneric(a) => serde_json::to_value(a)?,
            TheoryOp::BallotRegular(a) => serde_json::to_value(a)?,
            TheoryOp::XiSumPmf(a) => serde_json::to_value(a)?,
            TheoryOp::BinomialPoint(a) | TheoryOp::Chernoff(a) => serde_json::to_value(a)?,
            TheoryOp::ReflectionDensity(a) => serde_json::to_value(a)?,
            TheoryOp::TiltNu(a) => serde_json::to_value(a)?,
            TheoryOp::TiltGamma(a) => serde_json::to_value(a)?,
            TheoryOp::BrownianGeometry(a) => serde_json::to_value(a)?,
            TheoryOp::Envelope(a) => serde_json::to_value(a)?,
        })
    }
}

/// Exact value as `num/den` alongside its float.
fn exact(q: BigRational) -> (Value, Option<String>) {
    (json!(q.to_f64_lossy()), Some(q.to_string()))
}

fn evaluate(op: &TheoryOp) -> Result<(Value, Option<String>)> {
    Ok(match op {
        TheoryOp::GExponent(a) => (
            json!(theory::g_exponent(a.a, a.lambda, a.d, a.variant.into())?),
            None,
        ),
        TheoryOp::QUpper(a) => (json!(theory::q_upper(a.t, a.p, a.d, a.n)), None),
        TheoryOp::QLower(a) => (
            json!(theory::q_lower_curve(a.q.t, a.q.p, a.q.d, a.q.n, a.a)),
            None,
        ),
        TheoryOp::TUpper(a) => (json!(theory::t_upper(a.a, a.n, a.d)), None),
        TheoryOp::TLower(a) => (json!(theory::t_lower(a.a, a.n, a.d)), None),
        TheoryOp::XOffset(a) => (json!(theory::x_offset(a.k, a.lambda, a.t, a.d, a.n)), None),
        TheoryOp::BallotGeneric(a) => {
            let law = StepLaw::two_point(a.up, a.down, theory::parse_rational(&a.p)?);
            exact(theory::ballot_bound_generic(a.t, a.k, a.h, &law)?)
        }
        TheoryOp::BallotRegular(a) => exact(theory::ballot_bound_regular(
            a.t,
            a.k,
            a.d,
            &theory::parse_rational(&a.p)?,
        )?),
        TheoryOp::XiSumPmf(a) => exact(theory::xi_sum_pmf(
            a.steps,
            a.level,
            a.d,
            &theory::parse_rational(&a.p)?,
        )),
        TheoryOp::BinomialPoint(a) => (
            json!(theory::binomial_point_bound(a.big_n, a.big_p, a.x)?),
            None,
        ),
        TheoryOp::Chernoff(a) => (json!(theory::chernoff_bound(a.big_n, a.big_p, a.x)?), None),
        TheoryOp::ReflectionDensity(a) => (
            json!(theory::reflection_density(a.x, a.y, a.mu, a.t, a.z)?),
            None,
        ),
        TheoryOp::TiltNu(a) => (json!(theory::tilt_nu(a.t_prime, a.n, a.p, a.d)?), None),
        TheoryOp::TiltGamma(a) => (json!(theory::tilt_gamma(a.p, a.d)?), None),
        TheoryOp::BrownianGeometry(a) => (
            serde_json::to_value(theory::brownian_geometry(
                a.a, a.n, a.d, a.epsilon, a.lambda,
            )?)?,
            None,
        ),
        TheoryOp::Envelope(a) => (
            json!(theory::envelope(
                a.a,
                a.n,
                a.d,
                a.lambda,
                a.mode.into(),
                a.c,
                a.variant.into()
            )?),
            None,
        ),
    })
}

pub fn run(op: &TheoryOp, global: &Global) -> Result<u8> {
    let (value, exact) = evaluate(op)?;
    let mut out =
        json!({ "op": op.name(), "args": round_floats(op.args()?), "value": round_floats(value) });
    if let Some(q) = exact {
        out["exact"] = json!(q);
    }
    crate::common::emit(global, &json_text(&out)?)?;
    eprintln!("{} = {}", op.name(), out["value"]);
    Ok(0)
}
