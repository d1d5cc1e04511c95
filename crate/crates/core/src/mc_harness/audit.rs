use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_graph::Params;
use crate::coupled_walks::{a_n, first_hit, series, theta, AuxRandomness, SeriesKind};
use crate::error::{invalid, Error, Result};
use crate::exploration::{explore, ExplorationTrace, ExploreOptions, HitClass, Source};
use crate::rng::{RandomStream, LANE_AUX};
use crate::stats::sig12;
use crate::theory::{q_lower_curve, q_upper, t_lower, t_upper};

/// Concentration statements that can be audited against simulated traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LemmaId {
    /// Fresh-vertex count stays below a_n(i) + m.
    L31,
    /// The sum of mu' is not far below q(T).
    L33,
    /// Few vertices with between 1 and d - 2 unseen stubs.
    L45,
    /// The active set stays below omega.
    L46,
    /// Few retained low hits and active hits.
    C47,
    /// Retained non-fresh hits follow the deterministic curve.
    L48,
    /// The gap between D and delta stays below the lower curve.
    P41,
}

impl LemmaId {
    pub const ALL: [LemmaId; 7] = [
        LemmaId::L31,
        LemmaId::L33,
        LemmaId::L45,
        LemmaId::L46,
        LemmaId::C47,
        LemmaId::L48,
        LemmaId::P41,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LemmaId::L31 => "lemma3.1",
            LemmaId::L33 => "lemma3.3",
            LemmaId::L45 => "lemma4.5",
            LemmaId::L46 => "lemma4.6",
            LemmaId::C47 => "corollary4.7",
            LemmaId::L48 => "lemma4.8",
            LemmaId::P41 => "prop4.1",
        }
    }

    fn uses_upper_horizon(self) -> bool {
        matches!(self, LemmaId::L31 | LemmaId::L33)
    }
}

impl FromStr for LemmaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_digit())
            .collect();
        match key.as_str() {
            "31" => Ok(LemmaId::L31),
            "33" => Ok(LemmaId::L33),
            "45" => Ok(LemmaId::L45),
            "46" => Ok(LemmaId::L46),
            "47" => Ok(LemmaId::C47),
            "48" => Ok(LemmaId::L48),
            "41" => Ok(LemmaId::P41),
            _ => Err(Error::InvalidParams(format!("unknown lemma id {s}"))),
        }
    }
}

/// Free constants of the audited statements; unset values take defaults
/// derived from A (m = h = A n^{4/15}, l = T h / n^{1/2}, omega = T^{1/2} h,
/// theta = 2 A n^{4/15} / 3 - 2 T^3 / n^2, t = T).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tunables {
    pub m: Option<f64>,
    pub h: Option<f64>,
    pub l: Option<f64>,
    pub omega: Option<f64>,
    pub theta: Option<f64>,
    /// Horizon; defaults to the T convention of the statement.
    pub t: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Resolved {
    horizon: u64,
    m: f64,
    h: f64,
    l: f64,
    omega: f64,
    theta: f64,
}

fn resolve(lemma: LemmaId, params: &Params, tun: &Tunables) -> Result<Resolved> {
    let Some(a) = params.a else {
        return invalid("audits need A to fix the horizon");
    };
    if params.d < 3 {
        return invalid("audits need d >= 3");
    }
    let (n, d) = (params.n, params.d);
    let horizon = match tun.t {
        Some(t) => t,
        None => {
            let t = if lemma.uses_upper_horizon() {
                t_upper(a, n, d)
            } else {
                t_lower(a, n, d)
            };
            if t < 2 {
                return Err(Error::Infeasible(format!(
                    "horizon {t} is too short at n={n}, A={a}"
                )));
            }
            t as u64
        }
    };
    let nf = n as f64;
    let tf = horizon as f64;
    let slack = a * nf.powf(4.0 / 15.0);
    let h = tun.h.unwrap_or(slack);
    Ok(Resolved {
        horizon,
        m: tun.m.unwrap_or(slack),
        h,
        l: tun.l.unwrap_or(tf * h / nf.sqrt()),
        omega: tun.omega.unwrap_or(tf.sqrt() * h),
        theta: tun
            .theta
            .unwrap_or(2.0 * slack / 3.0 - 2.0 * tf.powi(3) / (nf * nf)),
    })
}

/// Log-spaced exponents over which the Chernoff bounds are minimised.
fn r_grid() -> Vec<f64> {
    let (lo, hi, k) = (1e-4f64, 40.0f64, 400);
    (0..k)
        .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
        .collect()
}

/// log(1 + b (e^r - 1)) for b >= 0.
fn ln_mgf(b: f64, r: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    if r < 30.0 {
        (b * r.exp_m1()).ln_1p()
    } else {
        r + (b + (1.0 - b) * (-r).exp()).ln()
    }
}

/// For each i, min(1, inf_r exp(sum_{j<=i} log(1 + b_j (e^r - 1)) - r x_i)).
fn prefix_chernoff(b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut best = vec![0.0f64; x.len()];
    for r in r_grid() {
        let mut acc = 0.0;
        for (i, (bi, xi)) in b.iter().zip(x).enumerate() {
            acc += ln_mgf(*bi, r);
            best[i] = best[i].min(acc - r * xi);
        }
    }
    best.into_iter().map(f64::exp).collect()
}

fn dn_minus(n: usize, d: usize, j: f64) -> f64 {
    (d * n) as f64 - 2.0 * j - 1.0
}

fn rhs_l31(n: usize, d: usize, horizon: u64, m: f64) -> f64 {
    let steps = horizon.saturating_sub(1) as usize;
    let (nf, df) = (n as f64, d as f64);
    let b: Vec<f64> = (1..=steps)
        .map(|j| df * j as f64 / dn_minus(n, d, j as f64 - 1.0))
        .collect();
    let x: Vec<f64> = (1..=steps)
        .map(|i| (i * i) as f64 / (2.0 * nf) + m)
        .collect();
    prefix_chernoff(&b, &x).iter().sum()
}

fn rhs_l33(params: &Params, horizon: u64, m: f64, h: f64) -> f64 {
    let (n, d, p) = (params.n, params.d, params.p);
    let q = q_upper(horizon as f64, p, d, n);
    let c: Vec<f64> = (1..=horizon as usize)
        .map(|i| p * (1.0 - theta(i, n, d, m)).max(0.0))
        .collect();
    r_grid()
        .into_iter()
        .map(|r| {
            let damp = -(-r).exp_m1();
            (r * (q - h) + c.iter().map(|ci| (-ci * damp).ln_1p()).sum::<f64>()).exp()
        })
        .fold(1.0, f64::min)
}

fn rhs_l45(n: usize, d: usize, horizon: u64, l: f64) -> f64 {
    let steps = horizon.saturating_sub(1) as usize;
    let nf = n as f64;
    let b: Vec<f64> = (0..steps)
        .map(|j| {
            if j == 0 {
                0.0
            } else {
                (d - 1) as f64 * j as f64 / dn_minus(n, d, j as f64)
            }
        })
        .collect();
    let x: Vec<f64> = (1..=steps).map(|i| (i * i) as f64 / nf + l).collect();
    prefix_chernoff(&b, &x).iter().sum()
}

fn rhs_l46(p: f64, d: usize, t: u64, omega: f64) -> f64 {
    let df = d as f64;
    r_grid()
        .into_iter()
        .map(|r| {
            let lm = (p * (r * (df - 2.0)).exp() + (1.0 - p) * (-r).exp()).ln();
            (-r * (omega - df) + t as f64 * lm.max(0.0)).exp()
        })
        .fold(1.0, f64::min)
}

/// Chernoff bound for retained low hits plus active hits exceeding `thr(t)`
/// on the event that the low count and active set obey (l, omega).
fn low_active_bound(
    params: &Params,
    horizon: u64,
    l: f64,
    omega: f64,
    thr: impl Fn(f64) -> f64,
) -> f64 {
    let (n, d, p) = (params.n, params.d, params.p);
    let nf = n as f64;
    let w = omega.max(d as f64);
    let b: Vec<f64> = (1..=horizon as usize)
        .map(|i| {
            let j = i as f64 - 1.0;
            (p * (d as f64 - 2.0) * (j * j / nf + l) + w) / dn_minus(n, d, j)
        })
        .collect();
    let x: Vec<f64> = (1..=horizon).map(|t| thr(t as f64)).collect();
    let main: f64 = prefix_chernoff(&b, &x).iter().sum();
    main + rhs_l45(n, d, horizon, l).min(1.0) + rhs_l46(p, d, horizon, omega)
}

fn c47_threshold(n: usize, d: usize, horizon: u64, h: f64) -> impl Fn(f64) -> f64 {
    let nf = n as f64;
    let ts = (horizon as f64).sqrt();
    move |t: f64| 4.0 * t.powi(3) / (3.0 * d as f64 * nf * nf) + (8.0 * ts * t / nf + 1.0) * h
}

fn l48_threshold(params: &Params, horizon: u64, theta: f64) -> impl Fn(f64) -> f64 {
    let (nf, df, p) = (params.n as f64, params.d as f64, params.p);
    let tf = horizon as f64;
    move |t: f64| p * (1.0 - 2.0 / df) * t * t / (2.0 * nf) + 2.0 * tf.powi(3) / (nf * nf) + theta
}

fn rhs_l48(params: &Params, horizon: u64, theta: f64) -> f64 {
    let (n, d, p) = (params.n, params.d, params.p);
    let b: Vec<f64> = (0..horizon as usize)
        .map(|j| {
            let jf = j as f64;
            (p * (1.0 - d as f64 * (n as f64 - 1.0 - jf) / dn_minus(n, d, jf))).max(0.0)
        })
        .collect();
    let thr = l48_threshold(params, horizon, theta);
    let x: Vec<f64> = (1..=horizon).map(|t| thr(t as f64)).collect();
    prefix_chernoff(&b, &x).iter().sum()
}

fn p41_slack(params: &Params) -> f64 {
    params.a.unwrap_or(0.0) * (params.n as f64).powf(4.0 / 15.0)
}

fn rhs_resolved(lemma: LemmaId, params: &Params, r: &Resolved) -> f64 {
    let (n, d) = (params.n, params.d);
    match lemma {
        LemmaId::L31 => rhs_l31(n, d, r.horizon, r.m),
        LemmaId::L33 => rhs_l33(params, r.horizon, r.m, r.h),
        LemmaId::L45 => rhs_l45(n, d, r.horizon, r.l),
        LemmaId::L46 => rhs_l46(params.p, d, r.horizon, r.omega),
        LemmaId::C47 => low_active_bound(
            params,
            r.horizon,
            r.l,
            r.omega,
            c47_threshold(n, d, r.horizon, r.h),
        ),
        LemmaId::L48 => rhs_l48(params, r.horizon, r.theta),
        LemmaId::P41 => {
            let slack = p41_slack(params);
            let nf = n as f64;
            let theta = 2.0 * slack / 3.0 - 2.0 * (r.horizon as f64).powi(3) / (nf * nf);
            let c0 = slack / (3.0 * (d as f64 - 1.0));
            rhs_l48(params, r.horizon, theta)
                + low_active_bound(params, r.horizon, r.l, r.omega, |_| c0)
        }
    }
}

/// Right-hand side of the audited bound at the resolved tunables.
pub fn audit_rhs(lemma: LemmaId, params: &Params, tunables: &Tunables) -> Result<f64> {
    let r = resolve(lemma, params, tunables)?;
    Ok(rhs_resolved(lemma, params, &r))
}

fn set_primary(lemma: LemmaId, base: &Tunables, v: f64) -> Tunables {
    let mut t = *base;
    match lemma {
        LemmaId::L31 => t.m = Some(v),
        LemmaId::L33 | LemmaId::C47 | LemmaId::P41 => t.h = Some(v),
        LemmaId::L45 => t.l = Some(v),
        LemmaId::L46 => t.omega = Some(v),
        LemmaId::L48 => t.theta = Some(v),
    }
    t
}

/// Smallest value of the statement's main tunable (m, h, l, omega or theta)
/// at which the bound drops to `target`, found by doubling then bisection.
pub fn calibrate(
    lemma: LemmaId,
    params: &Params,
    base: &Tunables,
    target: f64,
) -> Result<Tunables> {
    if !(0.0..1.0).contains(&target) || target == 0.0 {
        return invalid("target must lie in (0,1)");
    }
    let f = |v: f64| audit_rhs(lemma, params, &set_primary(lemma, base, v));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut doublings = 0;
    while f(hi)? > target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Infeasible(format!(
                "{} bound never reaches {target}",
                lemma.label()
            )));
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(set_primary(lemma, base, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub lemma: LemmaId,
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub lambda: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    pub horizon: u64,
    pub m: f64,
    pub h: f64,
    pub l: f64,
    pub omega: f64,
    pub theta: f64,
    pub trials: u64,
    pub exceedances: u64,
    pub freq: f64,
    pub se: f64,
    pub rhs: f64,
    pub verdict: Verdict,
    pub seed: u64,
}

fn class_low(c: HitClass) -> bool {
    c == HitClass::UnseenLow
}

fn exceeds(
    lemma: LemmaId,
    params: &Params,
    r: &Resolved,
    trace: &ExplorationTrace,
    aux: Option<&AuxRandomness>,
) -> Result<bool> {
    let (n, d) = (params.n, params.d);
    let nf = n as f64;
    let steps = trace.phase_one_steps();
    let cap = |k: u64| (k as usize).min(steps.len());
    Ok(match lemma {
        LemmaId::L31 => {
            let h = cap(r.horizon.saturating_sub(1));
            steps[..h]
                .iter()
                .enumerate()
                .any(|(k, s)| s.fresh as f64 > a_n((k + 1) as f64, n) + r.m)
        }
        LemmaId::L33 => {
            let u = &aux.expect("aux drawn for this audit").u;
            let all = &trace.steps;
            if all.len() < r.horizon as usize {
                return Err(Error::Horizon {
                    horizon: r.horizon as usize,
                    available: all.len(),
                });
            }
            let total: u64 = all[..r.horizon as usize]
                .iter()
                .enumerate()
                .map(|(k, s)| u64::from(s.retained && u[k] > theta(k + 1, n, d, r.m)))
                .sum();
            total as f64 <= q_upper(r.horizon as f64, params.p, d, n) - r.h
        }
        LemmaId::L45 => {
            let h = cap(r.horizon.saturating_sub(1));
            steps[..h].iter().enumerate().any(|(k, s)| {
                let i = (k + 1) as f64;
                s.low as f64 > i * i / nf + r.l
            })
        }
        LemmaId::L46 => steps[..cap(r.horizon)]
            .iter()
            .any(|s| s.active as f64 > r.omega),
        LemmaId::C47 => {
            let thr = c47_threshold(n, d, r.horizon, r.h);
            let mut acc = 0u64;
            steps[..cap(r.horizon)].iter().enumerate().any(|(k, s)| {
                acc += u64::from((s.retained && class_low(s.class)) || s.class == HitClass::Active);
                acc as f64 > thr((k + 1) as f64)
            })
        }
        LemmaId::L48 => {
            let thr = l48_threshold(params, r.horizon, r.theta);
            let mut acc = 0u64;
            steps[..cap(r.horizon)].iter().enumerate().any(|(k, s)| {
                acc += u64::from(s.retained && !s.class.is_fresh());
                acc as f64 > thr((k + 1) as f64)
            })
        }
        LemmaId::P41 => {
            let h = cap(r.horizon);
            let delta = series(trace, SeriesKind::Delta, None, h)?;
            let big_d = series(trace, SeriesKind::D, None, h)?;
            let stop = first_hit(&delta, d as f64).unwrap_or(h).min(h);
            let a = params.a.unwrap_or(0.0);
            let mut gap = 0i64;
            (0..stop).any(|k| {
                gap += (big_d.values[k] - delta.values[k]) as i64;
                gap as f64 > q_lower_curve((k + 1) as f64, params.p, d, n, a)
            })
        }
    })
}

/// Exceedance frequency of the statement's event over `trials` lazy traces,
/// restricted to the first exploration phase, against the bound.
pub fn lemma_audit(
    lemma: LemmaId,
    params: &Params,
    trials: u64,
    tunables: &Tunables,
    seed: u64,
) -> Result<AuditReport> {
    if trials == 0 {
        return invalid("trials must be >= 1");
    }
    let r = resolve(lemma, params, tunables)?;
    let rhs = rhs_resolved(lemma, params, &r);
    let (n, d) = (params.n, params.d);
    let opts = if lemma == LemmaId::L33 {
        ExploreOptions {
            max_steps: Some(r.horizon),
            ..ExploreOptions::full_graph()
        }
    } else {
        ExploreOptions {
            max_steps: Some(r.horizon),
            ..ExploreOptions::default()
        }
    };
    let exceedances = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(seed, i);
            let trace = explore(Source::Lazy { p: params.p }, n, d, opts, &mut rng)?;
            let aux = if lemma == LemmaId::L33 {
                let mut ar = RandomStream::with_lane(seed, LANE_AUX, i);
                Some(AuxRandomness::independent(
                    r.horizon as usize,
                    r.m,
                    0.0,
                    &mut ar,
                ))
            } else {
                None
            };
            Ok::<u64, Error>(u64::from(exceeds(lemma, params, &r, &trace, aux.as_ref())?))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let freq = exceedances as f64 / trials as f64;
    let se = (freq * (1.0 - freq) / trials as f64).sqrt();
    let verdict = if rhs >= 1.0 {
        Verdict::Vacuous
    } else if freq <= rhs + 3.0 * se {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(AuditReport {
        lemma,
        n,
        d,
        p: sig12(params.p),
        lambda: params.lambda.map(sig12),
        a: params.a.map(sig12),
        horizon: r.horizon,
        m: sig12(r.m),
        h: sig12(r.h),
        l: sig12(r.l),
        omega: sig12(r.omega),
        theta: sig12(r.theta),
        trials,
        exceedances,
        freq: sig12(freq),
        se: sig12(se),
        rhs: sig12(rhs),
        verdict,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params {
        Params::critical(2000, 3, 0.0).unwrap().with_a(1.0)
    }

    #[test]
    fn ids_parse() {
        assert_eq!("lemma3.1".parse::<LemmaId>().unwrap(), LemmaId::L31);
        assert_eq!("C4.7".parse::<LemmaId>().unwrap(), LemmaId::C47);
        assert!("lemma9.9".parse::<LemmaId>().is_err());
    }

    #[test]
    fn bounds_decrease_in_their_tunable() {
        let p = params();
        for lemma in LemmaId::ALL {
            if lemma == LemmaId::P41 {
                continue;
            }
            let lo = audit_rhs(lemma, &p, &set_primary(lemma, &Tunables::default(), 5.0)).unwrap();
            let hi = audit_rhs(lemma, &p, &set_primary(lemma, &Tunables::default(), 80.0)).unwrap();
            assert!(hi <= lo, "{lemma:?}: {hi} > {lo}");
        }
    }

    #[test]
    fn tiny_tunable_is_vacuous() {
        let rep = lemma_audit(
            LemmaId::L46,
            &params(),
            20,
            &Tunables {
                omega: Some(1.0),
                ..Default::default()
            },
            4,
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Vacuous);
    }

    #[test]
    fn calibration_meets_target() {
        let p = params();
        for lemma in [LemmaId::L31, LemmaId::L45, LemmaId::L46] {
            let t = calibrate(lemma, &p, &Tunables::default(), 1e-2).unwrap();
            let v = audit_rhs(lemma, &p, &t).unwrap();
            assert!(v <= 1e-2 && v > 1e-3, "{lemma:?}: {v}");
        }
    }
}
