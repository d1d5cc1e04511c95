use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_graph::{sample_mask, sample_matching};
use crate::coupled_walks::{check_coupling, default_slack, default_t_prime, AuxRandomness};
use crate::error::{invalid, Result};
use crate::exploration::{check_lemma21, explore, ActivePolicy, ExploreOptions, Source, Violation};
use crate::rng::{RandomStream, LANE_AUX};
use crate::stats::sig12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub d: usize,
    pub n: usize,
    pub p: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub traces: u64,
    pub counter_checks: u64,
    pub counter_violations: u64,
    pub coupling_checks: u64,
    pub coupling_violations: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    /// Up to ten counter violations, in trace order.
    pub counter_examples: Vec<Violation>,
    /// Up to ten coupling violations, in trace order.
    pub coupling_examples: Vec<Violation>,
}

impl SuiteReport {
    pub fn traces(&self) -> u64 {
        self.rows.iter().map(|r| r.traces).sum()
    }

    pub fn counter_violations(&self) -> u64 {
        self.rows.iter().map(|r| r.counter_violations).sum()
    }

    pub fn coupling_violations(&self) -> u64 {
        self.rows.iter().map(|r| r.coupling_violations).sum()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| crate::Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| crate::Error::Parse(e.to_string()))
    }
}

struct TraceOutcome {
    counter: (u64, Vec<Violation>),
    coupling: (u64, Vec<Violation>),
}

fn keep_examples(into: &mut Vec<Violation>, from: Vec<Violation>) {
    let room = 10usize.saturating_sub(into.len());
    into.extend(from.into_iter().take(room));
}

/// Pathwise identity checks on `traces_per_config` traces for every config.
///
/// Each trace explores a sampled matching with mask, so the component of the
/// start vertex can be checked against a union-find count of the same graph.
/// Odd-numbered traces use the LIFO active policy.
pub fn identity_suite(
    configs: &[SuiteConfig],
    traces_per_config: u64,
    seed: u64,
) -> Result<SuiteReport> {
    if traces_per_config == 0 {
        return invalid("traces_per_config must be >= 1");
    }
    let mut report = SuiteReport::default();
    for (ci, cfg) in configs.iter().enumerate() {
        let base = ci as u64 * traces_per_config;
        let outcomes: Vec<TraceOutcome> = (0..traces_per_config)
            .into_par_iter()
            .map(|i| {
                let mut rng = RandomStream::new(seed, base + i);
                let m = sample_mask(sample_matching(cfg.n, cfg.d, &mut rng)?, cfg.p, &mut rng)?;
                let policy = if i % 2 == 1 {
                    ActivePolicy::Lifo
                } else {
                    ActivePolicy::Fifo
                };
                let opts = ExploreOptions {
                    policy,
                    ..ExploreOptions::default()
                };
                let trace = explore(Source::Fixed(&m), cfg.n, cfg.d, opts, &mut rng)?;
                let reference = m.components()?.size_of[trace.start_vertex as usize];
                let c = check_lemma21(&trace, Some(reference as u64));
                let mut aux_rng = RandomStream::with_lane(seed, LANE_AUX, base + i);
                let aux = AuxRandomness::coupled(
                    &trace,
                    default_slack(cfg.n, 1.0),
                    default_t_prime(cfg.n, 1.0),
                    &mut aux_rng,
                );
                let k = check_coupling(&trace, &aux)?;
                Ok(TraceOutcome {
                    counter: (c.checks, c.violations),
                    coupling: (k.checks, k.violations),
                })
            })
            .collect::<Result<_>>()?;
        let mut row = SuiteRow {
            d: cfg.d,
            n: cfg.n,
            p: sig12(cfg.p),
            traces: traces_per_config,
            ..Default::default()
        };
        for o in outcomes {
            row.counter_checks += o.counter.0;
            row.counter_violations += o.counter.1.len() as u64;
            row.coupling_checks += o.coupling.0;
            row.coupling_violations += o.coupling.1.len() as u64;
            keep_examples(&mut report.counter_examples, o.counter.1);
            keep_examples(&mut report.coupling_examples, o.coupling.1);
        }
        report.rows.push(row);
    }
    Ok(report)
}
