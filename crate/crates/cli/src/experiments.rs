use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use regulus_core::config_graph::{
    parse_dump, sample_mask, sample_matching, sample_simple_matching, write_dump, Matching,
};
use regulus_core::exploration::{explore, max_component_size, ExploreOptions, PhaseStats, Source};
use regulus_core::mc_harness::{
    calibrate, estimate_simple_prob, identity_suite, lemma_audit, run_tail, scaling_diagnostic,
    write_records, LemmaId, SuiteConfig, TailSpec, Tunables, Verdict,
};
use regulus_core::rng::RandomStream;
use serde::Serialize;
use serde_json::json;

use crate::common::{
    config, config_line, emit, emit_csv_append, json_text, round_floats, CiArg, FormatArg, Global,
    GraphArgs, ModeArg, PolicyArg, VariantArg,
};

#[derive(Args, Clone, Debug, Serialize)]
pub struct Simulate {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = PolicyArg::Fifo)]
    pub policy: PolicyArg,
    /// Explore every component instead of stopping after the first.
    #[arg(long)]
    pub full: bool,
    /// Sample a simple matching by rejection and explore it.
    #[arg(long)]
    pub simple: bool,
    /// Replay a matching dump instead of sampling.
    #[arg(long)]
    pub matching: Option<PathBuf>,
    /// Write the per-step trace as CSV.
    #[arg(long)]
    pub dump_trace: Option<PathBuf>,
    /// Write the explored matching with its mask.
    #[arg(long)]
    pub dump_matching: Option<PathBuf>,
}

pub fn simulate(a: &Simulate, global: &Global) -> Result<u8> {
    let params = a.graph.params()?;
    let (n, d) = (params.n, params.d);
    let mut rng = RandomStream::new(global.seed, 0);
    let fixed: Option<Matching> = if let Some(path) = &a.matching {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Some(parse_dump(&text)?.matching)
    } else if a.simple {
        let (m, draws) = sample_simple_matching(n, d, 1_000_000, &mut rng)?;
        eprintln!("simple matching after {draws} draws");
        Some(sample_mask(m, params.p, &mut rng)?)
    } else if a.dump_matching.is_some() {
        Some(sample_mask(
            sample_matching(n, d, &mut rng)?,
            params.p,
            &mut rng,
        )?)
    } else {
        None
    };
    let base = if a.full {
        ExploreOptions::full_graph()
    } else {
        ExploreOptions::default()
    };
    let opts = ExploreOptions {
        policy: a.policy.into(),
        ..base
    };
    let trace = match &fixed {
        Some(m) => explore(Source::Fixed(m), m.n(), m.d(), opts, &mut rng)?,
        None => explore(Source::Lazy { p: params.p }, n, d, opts, &mut rng)?,
    };
    if let Some(path) = &a.dump_trace {
        std::fs::write(path, trace.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.dump_matching {
        let m = match fixed {
            Some(m) => m,
            None => trace.revealed_matching()?,
        };
        std::fs::write(path, write_dump(&m, params.p, global.seed))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let sizes: Vec<u64> = trace
        .phases
        .iter()
        .map(PhaseStats::component_size)
        .collect();
    let max = if trace.exhausted {
        Some(max_component_size(&trace)?)
    } else {
        None
    };
    let cfg = config("simulate", a, global, json!({ "p": params.p }))?;
    let out = json!({
        "config": cfg,
        "result": {
            "start_vertex": trace.start_vertex,
            "steps": trace.steps.len(),
            "component_size": sizes[0],
            "phase_one": trace.phase_one(),
            "phase_sizes": sizes,
            "max_component_size": max,
            "exhausted": trace.exhausted,
        }
    });
    emit(global, &json_text(&round_floats(out))?)?;
    eprintln!(
        "|C({})| = {} after {} steps",
        trace.start_vertex,
        sizes[0],
        trace.steps.len()
    );
    Ok(0)
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Tail {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Max)]
    pub mode: ModeArg,
    /// Success when the component exceeds A n^{2/3}.
    #[arg(long = "A", conflicts_with = "threshold")]
    #[serde(rename = "A")]
    pub a: Option<f64>,
    /// Success when the component exceeds this size.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Condition on a simple graph, by rejection before percolation.
    #[arg(long)]
    pub simple: bool,
    #[arg(long, value_enum, default_value_t = CiArg::Wilson)]
    pub ci: CiArg,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Rejection budget per trial under --simple.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_draws: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: FormatArg,
}

pub fn tail(a: &Tail, global: &Global) -> Result<u8> {
    let params = a.graph.params()?;
    let (record, threshold) = if a.mode == ModeArg::Simple {
        (
            estimate_simple_prob(params.n, params.d, a.trials, global.seed, global.timing())?,
            None,
        )
    } else {
        let mut spec = match (a.a, a.threshold) {
            (Some(av), None) => TailSpec::new(
                params.clone().with_a(av),
                a.mode.into(),
                a.trials,
                global.seed,
            )?,
            (None, Some(t)) => {
                TailSpec::with_threshold(params.clone(), a.mode.into(), t, a.trials, global.seed)
            }
            _ => {
                return Err(regulus_core::Error::InvalidParams(
                    "give one of --A and --threshold".into(),
                )
                .into())
            }
        };
        spec = spec.simple(a.simple).timing(global.timing());
        spec.ci = a.ci.into();
        spec.confidence = a.confidence;
        spec.max_draws = a.max_draws;
        let t = spec.threshold;
        (run_tail(&spec)?, Some(t))
    };
    let cfg = config(
        "tail",
        a,
        global,
        json!({ "p": params.p, "threshold": threshold }),
    )?;
    match a.format {
        FormatArg::Csv => {
            emit_csv_append(global, &cfg, &write_records(std::slice::from_ref(&record))?)?
        }
        FormatArg::Json => emit(
            global,
            &json_text(&json!({ "config": cfg, "records": [record] }))?,
        )?,
    }
    eprintln!(
        "p_hat = {} ({} / {}), CI [{}, {}]",
        record.p_hat, record.successes, record.trials, record.ci_lo, record.ci_hi
    );
    Ok(0)
}

#[derive(Subcommand, Clone, Debug)]
pub enum VerifyOp {
    /// Replay exploration traces and check the counter identities.
    Lemma21(SuiteArgs),
    /// Replay traces and check the ordering of the coupled walks.
    Coupling(SuiteArgs),
    /// Event frequency of a concentration statement against its bound.
    Audit(AuditArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SuiteArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct AuditArgs {
    /// Statement to audit, e.g. 3.1, 4.5, 4.6, C4.7, 4.8, P4.1.
    #[arg(long)]
    pub lemma: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Horizon; defaults to the statement's own T.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Tune the primary constant until the bound equals this value.
    #[arg(long)]
    pub calibrate: Option<f64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn suite(a: &SuiteArgs, global: &Global, coupling: bool) -> Result<u8> {
    let params = a.graph.params()?;
    let cfgs = [SuiteConfig {
        d: params.d,
        n: params.n,
        p: params.p,
    }];
    let report = identity_suite(&cfgs, a.trials, global.seed)?;
    let (name, checks, violations) = if coupling {
        (
            "coupling",
            report.rows[0].coupling_checks,
            report.coupling_violations(),
        )
    } else {
        (
            "lemma21",
            report.rows[0].counter_checks,
            report.counter_violations(),
        )
    };
    let examples = if coupling {
        &report.coupling_examples
    } else {
        &report.counter_examples
    };
    let verdict = verdict_word(violations == 0);
    let cfg = config(
        &format!("verify {name}"),
        a,
        global,
        json!({ "p": params.p }),
    )?;
    let out = json!({
        "config": cfg,
        "check": name,
        "verdict": verdict,
        "traces": report.traces(),
        "checks": checks,
        "violations": violations,
        "examples": examples,
    });
    emit(global, &json_text(&out)?)?;
    eprintln!(
        "{name}: {verdict} ({checks} checks over {} traces, {violations} violations)",
        report.traces()
    );
    Ok(if violations == 0 { 0 } else { 2 })
}

fn audit(a: &AuditArgs, global: &Global) -> Result<u8> {
    let lemma: LemmaId = a.lemma.parse()?;
    let params = a.graph.params()?.with_a(a.a);
    let mut tun = Tunables {
        m: a.m,
        h: a.h,
        l: a.l,
        omega: a.omega,
        theta: a.theta,
        t: a.horizon,
    };
    if let Some(target) = a.calibrate {
        tun = calibrate(lemma, &params, &tun, target)?;
    }
    let report = lemma_audit(lemma, &params, a.trials, &tun, global.seed)?;
    let cfg = config(
        "verify audit",
        a,
        global,
        json!({ "p": params.p, "lemma": lemma.label() }),
    )?;
    match a.format {
        FormatArg::Json => emit(
            global,
            &json_text(&json!({ "config": cfg, "report": report }))?,
        )?,
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(&report)?;
            let body = String::from_utf8(w.into_inner()?)?;
            emit(global, &format!("{}{}", config_line(&cfg), body))?;
        }
    }
    let word = match report.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Vacuous => "VACUOUS",
    };
    eprintln!(
        "{}: {word} (freq = {} over {} traces, RHS = {})",
        lemma.label(),
        report.freq,
        report.trials,
        report.rhs
    );
    Ok(if report.verdict == Verdict::Fail {
        2
    } else {
        0
    })
}

pub fn verify(op: &VerifyOp, global: &Global) -> Result<u8> {
    match op {
        VerifyOp::Lemma21(a) => suite(a, global, false),
        VerifyOp::Coupling(a) => suite(a, global, true),
        VerifyOp::Audit(a) => audit(a, global),
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Scaling {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub lambda: f64,
    /// Comma-separated increasing A values.
    #[arg(long = "A-grid", value_delimiter = ',', default_value = "2,2.5,3,3.5")]
    #[serde(rename = "A_grid")]
    pub a_grid: Vec<f64>,
    #[arg(long, default_value_t = 200_000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

pub fn scaling(a: &Scaling, global: &Global) -> Result<u8> {
    let report = scaling_diagnostic(
        a.d,
        a.n,
        a.lambda,
        &a.a_grid,
        a.trials,
        global.seed,
        a.variant.into(),
        global.timing(),
    )?;
    let cfg = config("scaling", a, global, json!({ "p": report.p }))?;
    match a.format {
        FormatArg::Json => emit(
            global,
            &json_text(&json!({ "config": cfg, "report": report }))?,
        )?,
        FormatArg::Csv => emit_csv_append(global, &cfg, &write_records(&report.records())?)?,
    }
    for pt in &report.points {
        let flag = if pt.flagged { " (few successes)" } else { "" };
        eprintln!(
            "A = {}: p_hat = {} [{}, {}]{flag}",
            pt.a, pt.p_hat, pt.ci_lo, pt.ci_hi
        );
    }
    match report.slope {
        Some(s) => eprintln!("slope = {s}, monotone = {}", report.monotone),
        None => eprintln!("too few non-zero estimates for a fit"),
    }
    Ok(0)
}
