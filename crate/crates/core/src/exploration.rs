//! Stub-level exploration of a percolated configuration model.
//!
//! Stubs are active, unseen or explored. Each step takes an active stub `e`,
//! reveals its partner `h` and the retention flag `R`, and updates the
//! statuses. In lazy mode the partner is drawn uniformly from the other
//! unexplored stubs as the step happens; in fixed mode it is read from a
//! complete matching with mask.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config_graph::Matching;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum StubStatus {
    Active,
    Unseen,
    Explored,
}

#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    Lazy { p: f64 },
    Fixed(&'a Matching),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartRule {
    Uniform,
    Vertex(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopRule {
    FirstComponent,
    FullGraph,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivePolicy {
    #[default]
    Fifo,
    Lifo,
}

/// Class of the revealed stub `h_t`, judged by the unseen count of its vertex before the step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HitClass {
    Active,
    /// All d stubs unseen.
    Fresh,
    /// d - 1 stubs unseen.
    UnseenDm1,
    /// Between 1 and d - 2 stubs unseen.
    UnseenLow,
}

impl HitClass {
    pub fn label(self) -> &'static str {
        match self {
            HitClass::Active => "ACTIVE",
            HitClass::Fresh => "UNSEEN-FRESH",
            HitClass::UnseenDm1 => "UNSEEN-DM1",
            HitClass::UnseenLow => "UNSEEN-LOW",
        }
    }

    pub fn is_fresh(self) -> bool {
        self == HitClass::Fresh
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Global step number, starting at 1.
    pub t: u32,
    pub e: u32,
    pub h: u32,
    pub class: HitClass,
    /// Unseen stubs of v(h) before the step; 0 when h was active.
    pub m: u32,
    pub retained: bool,
    /// |A_t| after the step.
    pub active: u32,
    /// Fresh vertices after the step.
    pub fresh: u32,
    /// Vertices with exactly d - 1 unseen stubs after the step.
    pub dm1: u32,
    /// Vertices with between 1 and d - 2 unseen stubs after the step.
    pub low: u32,
    /// Phase index, starting at 0.
    pub phase: u32,
    /// Whether rule (b) fired at the start of this step.
    pub reseed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub start_vertex: u32,
    /// Index into the step list of the first step of the phase.
    pub first_step: usize,
    /// Active stubs at the start of the phase.
    pub initial_active: u32,
    /// Steps in the phase; equals the emptying time when `complete`.
    pub tau: u64,
    pub sigma_ur: u64,
    pub sigma_unr: u64,
    pub sigma_a: u64,
    pub sigma_nf: u64,
    /// Retained unseen hits by unseen count m, indexed 0..=d (index 0 unused).
    pub n_m: Vec<u64>,
    /// False when the run stopped before the active set emptied.
    pub complete: bool,
}

impl PhaseStats {
    fn new(start_vertex: u32, first_step: usize, initial_active: u32, d: usize) -> Self {
        Self {
            start_vertex,
            first_step,
            initial_active,
            tau: 0,
            sigma_ur: 0,
            sigma_unr: 0,
            sigma_a: 0,
            sigma_nf: 0,
            n_m: vec![0; d + 1],
            complete: false,
        }
    }

    pub fn component_size(&self) -> u64 {
        self.sigma_ur + 1
    }
}

/// Receives steps as they happen; returning false stops the run.
pub trait StepSink {
    fn on_step(&mut self, _step: &StepRecord, _phase: &PhaseStats) -> bool {
        true
    }
    fn on_phase_end(&mut self, _phase: &PhaseStats) -> bool {
        true
    }
}

/// Sink that keeps nothing.
pub struct Discard;
impl StepSink for Discard {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub n: usize,
    pub d: usize,
    pub start_vertex: u32,
    pub steps: Vec<StepRecord>,
    pub phases: Vec<PhaseStats>,
    /// True when the run ended by rule (c); false when stopped earlier.
    pub exhausted: bool,
}

impl ExplorationTrace {
    pub fn phase_one(&self) -> &PhaseStats {
        &self.phases[0]
    }

    /// Steps of phase one.
    pub fn phase_one_steps(&self) -> &[StepRecord] {
        let end = self
            .phases
            .get(1)
            .map_or(self.steps.len(), |p| p.first_step);
        &self.steps[..end]
    }

    /// Fresh count before step `i` (1-based) of phase one.
    pub fn fresh_before(&self, i: usize) -> u32 {
        if i <= 1 {
            self.n as u32 - 1
        } else {
            self.steps[i - 2].fresh
        }
    }

    /// CSV with columns t,e_t,h_t,class,R_t,A_t,fresh_t.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,e_t,h_t,class,R_t,A_t,fresh_t\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.t,
                s.e,
                s.h,
                s.class.label(),
                s.retained as u8,
                s.active,
                s.fresh
            ));
        }
        out
    }

    /// The pairs revealed by the run, with their retention flags.
    pub fn revealed_matching(&self) -> Result<Matching> {
        let pairs: Vec<(u32, u32)> = self.steps.iter().map(|s| (s.e, s.h)).collect();
        let mask: Vec<bool> = self.steps.iter().map(|s| s.retained).collect();
        Matching::from_pairs(self.n, self.d, &pairs, Some(&mask))
    }
}

struct Recorder {
    steps: Vec<StepRecord>,
    phases: Vec<PhaseStats>,
}

impl StepSink for Recorder {
    fn on_step(&mut self, step: &StepRecord, _phase: &PhaseStats) -> bool {
        self.steps.push(*step);
        true
    }
    fn on_phase_end(&mut self, phase: &PhaseStats) -> bool {
        self.phases.push(phase.clone());
        true
    }
}

/// Run outcome when steps are not recorded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub start_vertex: u32,
    pub steps: u64,
    pub phases: u64,
    pub first_phase_size: u64,
    pub max_phase_size: u64,
    pub exhausted: bool,
    pub stopped_by_sink: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ExploreOptions {
    pub start: StartRule,
    pub stop: StopRule,
    pub policy: ActivePolicy,
    pub max_steps: Option<u64>,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self {
            start: StartRule::Uniform,
            stop: StopRule::FirstComponent,
            policy: ActivePolicy::Fifo,
            max_steps: None,
        }
    }
}

impl ExploreOptions {
    pub fn full_graph() -> Self {
        Self {
            stop: StopRule::FullGraph,
            ..Self::default()
        }
    }
}

/// Reusable exploration state; buffers are kept between runs.
pub struct Explorer {
    n: usize,
    d: usize,
    status: Vec<StubStatus>,
    unseen: Vec<u32>,
    bucket: Vec<u32>,
    pool: Vec<u32>,
    pos: Vec<u32>,
    queue: VecDeque<u32>,
    active: u32,
}

impl Explorer {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 || !(n * d).is_multiple_of(2) {
            return invalid(format!("no configuration model with n={n}, d={d}"));
        }
        let m = n * d;
        Ok(Self {
            n,
            d,
            status: vec![StubStatus::Unseen; m],
            unseen: vec![d as u32; n],
            bucket: vec![0; d + 1],
            pool: Vec::with_capacity(m),
            pos: vec![0; m],
            queue: VecDeque::with_capacity(m),
            active: 0,
        })
    }

    fn reset(&mut self) {
        let m = self.n * self.d;
        self.status.fill(StubStatus::Unseen);
        self.unseen.fill(self.d as u32);
        self.bucket.fill(0);
        self.bucket[self.d] = self.n as u32;
        self.pool.clear();
        self.pool.extend(0..m as u32);
        for (i, p) in self.pos.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.queue.clear();
        self.active = 0;
    }

    fn remove_from_pool(&mut self, x: u32) {
        let i = self.pos[x as usize] as usize;
        let last = self.pool.pop().expect("unexplored pool not empty");
        if last != x {
            self.pool[i] = last;
            self.pos[last as usize] = i as u32;
        }
    }

    fn set_unseen(&mut self, v: u32, k: u32) {
        let old = self.unseen[v as usize];
        self.bucket[old as usize] -= 1;
        self.bucket[k as usize] += 1;
        self.unseen[v as usize] = k;
    }

    /// Makes every unseen stub of v active; returns how many.
    fn activate_vertex(&mut self, v: u32) -> u32 {
        let d = self.d as u32;
        let mut k = 0;
        for s in v * d..(v + 1) * d {
            if self.status[s as usize] == StubStatus::Unseen {
                self.status[s as usize] = StubStatus::Active;
                self.queue.push_back(s);
                k += 1;
            }
        }
        self.set_unseen(v, 0);
        self.active += k;
        k
    }

    fn pop_active(&mut self, policy: ActivePolicy) -> u32 {
        loop {
            let s = match policy {
                ActivePolicy::Fifo => self.queue.pop_front(),
                ActivePolicy::Lifo => self.queue.pop_back(),
            }
            .expect("active queue holds the active stubs");
            if self.status[s as usize] == StubStatus::Active {
                return s;
            }
        }
    }

    /// Counts |A|, |U|, |E| from the status array.
    pub fn status_counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for s in &self.status {
            match s {
                StubStatus::Active => c.0 += 1,
                StubStatus::Unseen => c.1 += 1,
                StubStatus::Explored => c.2 += 1,
            }
        }
        c
    }

    pub fn run<R: Rng + ?Sized, S: StepSink>(
        &mut self,
        source: Source<'_>,
        opts: ExploreOptions,
        rng: &mut R,
        sink: &mut S,
    ) -> Result<RunSummary> {
        let (n, d) = (self.n, self.d);
        let d32 = d as u32;
        match source {
            Source::Lazy { p } if !(0.0..=1.0).contains(&p) => {
                return invalid(format!("p={p} outside [0,1]"))
            }
            Source::Fixed(m) => {
                if m.n() != n || m.d() != d {
                    return invalid("matching dimensions differ from the explorer");
                }
                if !m.is_complete() {
                    return Err(Error::Incomplete(m.unmatched()));
                }
                if m.mask().is_none() {
                    return invalid("fixed mode needs a percolation mask");
                }
            }
            _ => {}
        }
        self.reset();
        let start = match opts.start {
            StartRule::Uniform => rng.random_range(0..n as u32),
            StartRule::Vertex(v) if (v as usize) < n => v,
            StartRule::Vertex(v) => return invalid(format!("start vertex {v} out of range")),
        };
        let k0 = self.activate_vertex(start);
        let mut phase = PhaseStats::new(start, 0, k0, d);
        let mut phase_idx = 0u32;
        let mut phase_open = true;
        let mut summary = RunSummary {
            start_vertex: start,
            steps: 0,
            phases: 0,
            first_phase_size: 0,
            max_phase_size: 0,
            exhausted: false,
            stopped_by_sink: false,
        };
        let mut t = 0u32;
        loop {
            if opts.max_steps.is_some_and(|cap| u64::from(t) >= cap) {
                break;
            }
            let mut reseed = false;
            if self.active == 0 {
                if self.pool.is_empty() {
                    summary.exhausted = true;
                    break;
                }
                if opts.stop == StopRule::FirstComponent {
                    break;
                }
                // rule (b): every unexplored stub is unseen here
                let s = self.pool[rng.random_range(0..self.pool.len())];
                let v = s / d32;
                phase_idx += 1;
                let before = self.activate_vertex(v);
                phase = PhaseStats::new(v, t as usize, before, d);
                phase_open = true;
                reseed = true;
            }
            t += 1;
            let e = self.pop_active(opts.policy);
            self.active -= 1;
            self.status[e as usize] = StubStatus::Explored;
            self.remove_from_pool(e);
            let (h, r) = match source {
                Source::Lazy { p } => {
                    let h = self.pool[rng.random_range(0..self.pool.len())];
                    (h, rng.random::<f64>() < p)
                }
                Source::Fixed(m) => {
                    let h = m.partner(e);
                    (h, m.retained_pair(m.pair_of(e) as usize).unwrap_or(false))
                }
            };
            self.remove_from_pool(h);
            let v = h / d32;
            let (class, m) = match self.status[h as usize] {
                StubStatus::Active => {
                    self.active -= 1;
                    phase.sigma_a += 1;
                    (HitClass::Active, 0)
                }
                StubStatus::Unseen => {
                    let m = self.unseen[v as usize];
                    let class = if m == d32 {
                        HitClass::Fresh
                    } else if m + 1 == d32 {
                        HitClass::UnseenDm1
                    } else {
                        HitClass::UnseenLow
                    };
                    if m < d32 {
                        phase.sigma_nf += 1;
                    }
                    if r {
                        phase.sigma_ur += 1;
                        phase.n_m[m as usize] += 1;
                        self.status[h as usize] = StubStatus::Explored;
                        self.set_unseen(v, m - 1);
                        self.activate_vertex(v);
                    } else {
                        phase.sigma_unr += 1;
                        self.set_unseen(v, m - 1);
                    }
                    (class, m)
                }
                StubStatus::Explored => {
                    return invalid(format!("stub {h} revealed twice; matching is inconsistent"));
                }
            };
            self.status[h as usize] = StubStatus::Explored;
            phase.tau += 1;
            let low = (1..d.saturating_sub(1)).map(|k| self.bucket[k]).sum();
            let rec = StepRecord {
                t,
                e,
                h,
                class,
                m,
                retained: r,
                active: self.active,
                fresh: self.bucket[d],
                dm1: if d >= 2 { self.bucket[d - 1] } else { 0 },
                low,
                phase: phase_idx,
                reseed,
            };
            let go_on = sink.on_step(&rec, &phase);
            if self.active == 0 {
                phase.complete = true;
                phase_open = false;
                summary.phases += 1;
                self.note_phase(&mut summary, &phase);
                if !sink.on_phase_end(&phase) {
                    summary.stopped_by_sink = true;
                    break;
                }
            }
            if !go_on {
                summary.stopped_by_sink = true;
                break;
            }
        }
        summary.steps = u64::from(t);
        if phase_open {
            summary.phases += 1;
            self.note_phase(&mut summary, &phase);
            sink.on_phase_end(&phase);
        }
        Ok(summary)
    }

    fn note_phase(&self, summary: &mut RunSummary, phase: &PhaseStats) {
        let size = phase.component_size();
        if summary.phases == 1 {
            summary.first_phase_size = size;
        }
        summary.max_phase_size = summary.max_phase_size.max(size);
    }
}

/// Runs an exploration and records every step.
pub fn explore<R: Rng + ?Sized>(
    source: Source<'_>,
    n: usize,
    d: usize,
    opts: ExploreOptions,
    rng: &mut R,
) -> Result<ExplorationTrace> {
    let mut ex = Explorer::new(n, d)?;
    let mut rec = Recorder {
        steps: Vec::new(),
        phases: Vec::new(),
    };
    let summary = ex.run(source, opts, rng, &mut rec)?;
    Ok(ExplorationTrace {
        n,
        d,
        start_vertex: summary.start_vertex,
        steps: rec.steps,
        phases: rec.phases,
        exhausted: summary.exhausted,
    })
}

pub fn component_size_of_start(trace: &ExplorationTrace) -> u64 {
    trace.phase_one().component_size()
}

/// Largest phase component; needs a full-graph trace.
pub fn max_component_size(trace: &ExplorationTrace) -> Result<u64> {
    if !trace.exhausted {
        return invalid("max component size needs a full-graph trace");
    }
    Ok(trace
        .phases
        .iter()
        .map(PhaseStats::component_size)
        .max()
        .unwrap_or(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub step: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: u64,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn check(
        &mut self,
        ok: bool,
        name: &str,
        step: Option<usize>,
        detail: impl FnOnce() -> String,
    ) {
        self.checks += 1;
        if !ok {
            self.violations.push(Violation {
                check: name.to_string(),
                step,
                detail: detail(),
            });
        }
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.checks += other.checks;
        self.violations.extend(other.violations);
    }
}

/// Counter identities and bounds for phase one. `reference_size` is an
/// independently computed |C(V_n)|, when available.
pub fn check_lemma21(trace: &ExplorationTrace, reference_size: Option<u64>) -> CheckReport {
    let mut rep = CheckReport::default();
    let ph = trace.phase_one();
    let d = trace.d as f64;
    let (tau, ur, unr, a, nf) = (
        ph.tau as f64,
        ph.sigma_ur as f64,
        ph.sigma_unr as f64,
        ph.sigma_a as f64,
        ph.sigma_nf as f64,
    );
    rep.check(ph.complete, "phase one complete", None, || {
        "run stopped before the active set emptied".into()
    });
    if let Some(size) = reference_size {
        rep.check(ph.component_size() == size, "component size", None, || {
            format!(
                "sigma_UR + 1 = {} but reference size {size}",
                ph.component_size()
            )
        });
    }
    rep.check(
        ph.tau == ph.sigma_ur + ph.sigma_unr + ph.sigma_a,
        "tau decomposition",
        None,
        || {
            format!(
                "tau={} sigma_UR={} sigma_UNR={} sigma_A={}",
                ph.tau, ph.sigma_ur, ph.sigma_unr, ph.sigma_a
            )
        },
    );
    let balance: i64 = trace.d as i64 - 2 * ph.sigma_a as i64 - ph.sigma_unr as i64
        + (1..=trace.d)
            .map(|m| (m as i64 - 2) * ph.n_m[m] as i64)
            .sum::<i64>();
    rep.check(!ph.complete || balance == 0, "active balance", None, || {
        format!("d - 2A - UNR + sum(m-2)N_m = {balance}")
    });
    rep.check(
        ph.n_m.iter().sum::<u64>() == ph.sigma_ur,
        "N_m total",
        None,
        || "sum N_m differs from sigma_UR".into(),
    );
    if ph.complete && trace.d >= 2 {
        let lo1 = (tau - d) / (d - 1.0);
        let lo2 = (tau + a - d) / (d - 1.0);
        let hi = (tau + a) / (d - 1.0) + nf;
        rep.check(lo1 <= lo2, "chain lower", None, || format!("{lo1} > {lo2}"));
        rep.check(lo2 <= ur, "chain middle", None, || {
            format!("{lo2} > sigma_UR={ur}")
        });
        rep.check(ur <= hi, "chain upper", None, || {
            format!("sigma_UR={ur} > {hi}")
        });
    }
    let _ = unr;
    // replay of phase one, step by step
    let mut active = ph.initial_active as i64;
    let mut nonfresh_hits = 0u64;
    let steps = trace.phase_one_steps();
    for (i, s) in steps.iter().enumerate() {
        let eta = match s.class {
            HitClass::Active => -2,
            _ if s.retained => s.m as i64 - 2,
            _ => -1,
        };
        active += eta;
        rep.check(
            active == s.active as i64,
            "active recursion",
            Some(i + 1),
            || format!("d + sum eta = {active}, recorded {}", s.active),
        );
        if !s.class.is_fresh() {
            nonfresh_hits += 1;
        }
        let expect = trace.n as i64 - 1 - (i as i64 + 1) + nonfresh_hits as i64;
        rep.check(
            expect == s.fresh as i64,
            "fresh identity",
            Some(i + 1),
            || format!("n-1-i+sum 1(F^c) = {expect}, recorded {}", s.fresh),
        );
    }
    rep
}
