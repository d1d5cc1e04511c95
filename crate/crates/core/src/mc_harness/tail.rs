use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_graph::{sample_mask, sample_matching, sample_simple_matching, Params};
use crate::error::{invalid, Error, Result};
use crate::exploration::{
    ExploreOptions, Explorer, PhaseStats, Source, StepRecord, StepSink, StopRule,
};
use crate::rng::RandomStream;
use crate::stats::{clopper_pearson, sig12, wilson};

use super::elapsed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TailMode {
    /// Component of a uniform vertex.
    Vertex,
    /// Largest component.
    Max,
    /// Simplicity of the sampled multigraph.
    Simple,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CiMethod {
    #[default]
    Wilson,
    ClopperPearson,
}

impl CiMethod {
    pub fn interval(self, k: u64, n: u64, confidence: f64) -> (f64, f64) {
        match self {
            CiMethod::Wilson => wilson(k, n, confidence),
            CiMethod::ClopperPearson => clopper_pearson(k, n, confidence),
        }
    }
}

/// One estimated probability. Field names are the CSV header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub d: usize,
    pub n: usize,
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    pub mode: TailMode,
    pub simple: bool,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
    pub elapsed_s: f64,
}

impl TailEstimate {
    #[allow(clippy::too_many_arguments)]
    fn build(
        d: usize,
        n: usize,
        p: Option<f64>,
        lambda: Option<f64>,
        a: Option<f64>,
        mode: TailMode,
        simple: bool,
        trials: u64,
        successes: u64,
        seed: u64,
        ci: (CiMethod, f64),
        elapsed_s: f64,
    ) -> Self {
        let (lo, hi) = ci.0.interval(successes, trials, ci.1);
        let p_hat = successes as f64 / trials as f64;
        Self {
            d,
            n,
            p: p.map(sig12),
            lambda: lambda.map(sig12),
            a: a.map(sig12),
            mode,
            simple,
            trials,
            successes,
            p_hat: sig12(p_hat),
            ci_lo: sig12(lo).min(sig12(p_hat)),
            ci_hi: sig12(hi).max(sig12(p_hat)),
            seed,
            elapsed_s,
        }
    }
}

/// Writes records as CSV with the standard header.
pub fn write_records(records: &[TailEstimate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "d",
            "n",
            "p",
            "lambda",
            "A",
            "mode",
            "simple",
            "trials",
            "successes",
            "p_hat",
            "ci_lo",
            "ci_hi",
            "seed",
            "elapsed_s",
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses records written by [`write_records`]; lines starting with `#` are skipped.
pub fn read_records(text: &str) -> Result<Vec<TailEstimate>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailSpec {
    pub params: Params,
    pub mode: TailMode,
    /// Success means the component size exceeds this.
    pub threshold: f64,
    pub condition_on_simple: bool,
    pub trials: u64,
    pub seed: u64,
    pub ci: CiMethod,
    pub confidence: f64,
    pub timing: bool,
    /// Rejection budget per trial when conditioning on simplicity.
    pub max_draws: u64,
}

impl TailSpec {
    /// Threshold A n^{2/3} taken from `params`.
    pub fn new(params: Params, mode: TailMode, trials: u64, seed: u64) -> Result<Self> {
        let Some(threshold) = params.threshold() else {
            return invalid("params carry no A; use with_threshold");
        };
        Ok(Self::with_threshold(params, mode, threshold, trials, seed))
    }

    pub fn with_threshold(
        params: Params,
        mode: TailMode,
        threshold: f64,
        trials: u64,
        seed: u64,
    ) -> Self {
        Self {
            params,
            mode,
            threshold,
            condition_on_simple: false,
            trials,
            seed,
            ci: CiMethod::Wilson,
            confidence: 0.95,
            timing: true,
            max_draws: 1_000_000,
        }
    }

    pub fn simple(mut self, on: bool) -> Self {
        self.condition_on_simple = on;
        self
    }

    pub fn timing(mut self, on: bool) -> Self {
        self.timing = on;
        self
    }
}

/// Stops a full-graph run once some component is known to exceed the threshold.
struct ExceedStop {
    threshold: f64,
}

impl StepSink for ExceedStop {
    fn on_step(&mut self, _s: &StepRecord, phase: &PhaseStats) -> bool {
        (phase.sigma_ur + 1) as f64 <= self.threshold
    }
}

/// Component size of one trial: that of the start vertex (VERTEX), or the
/// largest, capped at the first phase found above `stop_above` (MAX).
pub(crate) fn trial_size(
    ex: &mut Explorer,
    params: &Params,
    mode: TailMode,
    simple: bool,
    max_draws: u64,
    stop_above: f64,
    rng: &mut RandomStream,
) -> Result<u64> {
    let (n, d) = (params.n, params.d);
    let opts = match mode {
        TailMode::Vertex => ExploreOptions::default(),
        TailMode::Max => ExploreOptions::full_graph(),
        TailMode::Simple => return invalid("SIMPLE is not a component mode"),
    };
    let mut sink = ExceedStop {
        threshold: if mode == TailMode::Max {
            stop_above
        } else {
            f64::INFINITY
        },
    };
    let summary = if simple {
        let (m, _) = sample_simple_matching(n, d, max_draws, rng)?;
        let m = sample_mask(m, params.p, rng)?;
        ex.run(Source::Fixed(&m), opts, rng, &mut sink)?
    } else {
        ex.run(Source::Lazy { p: params.p }, opts, rng, &mut sink)?
    };
    Ok(match opts.stop {
        StopRule::FirstComponent => summary.first_phase_size,
        StopRule::FullGraph => summary.max_phase_size,
    })
}

fn check_threshold(params: &Params, threshold: f64) -> Result<()> {
    if !threshold.is_finite() || threshold >= params.n as f64 {
        return Err(Error::Infeasible(format!(
            "threshold {threshold} is not below n = {}",
            params.n
        )));
    }
    Ok(())
}

/// Estimates P(|C| > threshold) for the chosen component.
pub fn run_tail(spec: &TailSpec) -> Result<TailEstimate> {
    if spec.trials == 0 {
        return invalid("trials must be >= 1");
    }
    if spec.mode == TailMode::Simple {
        return invalid("use estimate_simple_prob for SIMPLE");
    }
    check_threshold(&spec.params, spec.threshold)?;
    let start = Instant::now();
    let (n, d) = (spec.params.n, spec.params.d);
    Explorer::new(n, d)?;
    let successes = (0..spec.trials)
        .into_par_iter()
        .map_init(
            || Explorer::new(n, d).expect("dimensions checked"),
            |ex, i| {
                let mut rng = RandomStream::new(spec.seed, i);
                let size = trial_size(
                    ex,
                    &spec.params,
                    spec.mode,
                    spec.condition_on_simple,
                    spec.max_draws,
                    spec.threshold,
                    &mut rng,
                )?;
                Ok::<u64, Error>(u64::from(size as f64 > spec.threshold))
            },
        )
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(TailEstimate::build(
        d,
        n,
        Some(spec.params.p),
        spec.params.lambda,
        spec.params
            .a
            .or(Some(spec.threshold / crate::theory::n23(n))),
        spec.mode,
        spec.condition_on_simple,
        spec.trials,
        successes,
        spec.seed,
        (spec.ci, spec.confidence),
        elapsed(start, spec.timing),
    ))
}

/// Counts of component sizes over `trials` runs, indexed by size.
pub fn size_distribution(
    params: &Params,
    mode: TailMode,
    condition_on_simple: bool,
    trials: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    let (n, d) = (params.n, params.d);
    Explorer::new(n, d)?;
    (0..trials)
        .into_par_iter()
        .map_init(
            || Explorer::new(n, d).expect("dimensions checked"),
            |ex, i| {
                let mut rng = RandomStream::new(seed, i);
                let size = trial_size(
                    ex,
                    params,
                    mode,
                    condition_on_simple,
                    1_000_000,
                    f64::INFINITY,
                    &mut rng,
                )?;
                let mut v = vec![0u64; n + 1];
                v[size as usize] += 1;
                Ok(v)
            },
        )
        .try_reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// Fraction of configuration-model matchings that are simple.
pub fn estimate_simple_prob(
    n: usize,
    d: usize,
    trials: u64,
    seed: u64,
    timing: bool,
) -> Result<TailEstimate> {
    if trials == 0 {
        return invalid("trials must be >= 1");
    }
    if !(n * d).is_multiple_of(2) || n == 0 || d == 0 {
        return invalid(format!("no configuration model with n={n}, d={d}"));
    }
    let start = Instant::now();
    let successes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(seed, i);
            let m = sample_matching(n, d, &mut rng)?;
            Ok::<u64, Error>(u64::from(m.is_simple()?))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(TailEstimate::build(
        d,
        n,
        None,
        None,
        None,
        TailMode::Simple,
        false,
        trials,
        successes,
        seed,
        (CiMethod::Wilson, 0.95),
        elapsed(start, timing),
    ))
}
