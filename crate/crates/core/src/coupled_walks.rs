//! Comparison walks evaluated pathwise on one exploration trace.
//!
//! Every series is a deterministic function of the recorded step flags
//! (retention, class of the hit vertex, active hit) and of a shared vector of
//! auxiliary uniforms, so orderings between series become per-path facts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exploration::{CheckReport, ExplorationTrace, HitClass, StepRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeriesKind {
    Eta,
    EtaPrime,
    Mu,
    MuPrime,
    Xi,
    Delta,
    DeltaPrime,
    Delta2Prime,
    DeltaCap2Prime,
    D,
    DPrime,
    D2Prime,
}

impl SeriesKind {
    pub const ALL: [SeriesKind; 12] = [
        SeriesKind::Eta,
        SeriesKind::EtaPrime,
        SeriesKind::Mu,
        SeriesKind::MuPrime,
        SeriesKind::Xi,
        SeriesKind::Delta,
        SeriesKind::DeltaPrime,
        SeriesKind::Delta2Prime,
        SeriesKind::DeltaCap2Prime,
        SeriesKind::D,
        SeriesKind::DPrime,
        SeriesKind::D2Prime,
    ];

    pub fn needs_aux(self) -> bool {
        matches!(
            self,
            SeriesKind::Mu | SeriesKind::MuPrime | SeriesKind::DeltaCap2Prime | SeriesKind::D2Prime
        )
    }
}

/// How the auxiliary uniforms relate to the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxMode {
    /// Drawn independently of the trace.
    Independent,
    /// U_i drawn from its conditional law given whether v(h_i) was fresh, so
    /// that U_i <= P(F_i | past) exactly on F_i. Each U_i is still uniform and
    /// independent of everything before step i.
    TraceCoupled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxRandomness {
    pub u: Vec<f64>,
    /// Fresh-count slack m.
    pub m: f64,
    /// Short horizon T'.
    pub t_prime: f64,
    pub mode: AuxMode,
}

/// m = A n^{4/15}.
pub fn default_slack(n: usize, a: f64) -> f64 {
    a * (n as f64).powf(4.0 / 15.0)
}

/// T' = floor(n^{2/3} / A^2).
pub fn default_t_prime(n: usize, a: f64) -> f64 {
    (crate::theory::n23(n) / (a * a)).floor()
}

impl AuxRandomness {
    pub fn independent<R: Rng + ?Sized>(len: usize, m: f64, t_prime: f64, rng: &mut R) -> Self {
        let u = (0..len).map(|_| rng.random::<f64>()).collect();
        Self {
            u,
            m,
            t_prime,
            mode: AuxMode::Independent,
        }
    }

    /// Uniforms coupled to the fresh indicators of phase one.
    pub fn coupled<R: Rng + ?Sized>(
        trace: &ExplorationTrace,
        m: f64,
        t_prime: f64,
        rng: &mut R,
    ) -> Self {
        let steps = trace.phase_one_steps();
        let u = steps
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let pi = fresh_hit_probability(trace, k + 1);
                let v = rng.random::<f64>();
                if s.class.is_fresh() {
                    v * pi
                } else {
                    pi + v * (1.0 - pi)
                }
            })
            .collect();
        Self {
            u,
            m,
            t_prime,
            mode: AuxMode::TraceCoupled,
        }
    }
}

/// a_n(i) = n - 1 - i + i^2 / (2n).
pub fn a_n(i: f64, n: usize) -> f64 {
    let n = n as f64;
    n - 1.0 - i + i * i / (2.0 * n)
}

/// d |V^(d)_{i-1}| / (dn - 2(i-1) - 1): conditional chance that step i of phase one hits a fresh vertex.
pub fn fresh_hit_probability(trace: &ExplorationTrace, i: usize) -> f64 {
    let (n, d) = (trace.n as f64, trace.d as f64);
    d * trace.fresh_before(i) as f64 / (d * n - 2.0 * (i as f64 - 1.0) - 1.0)
}

/// theta_i = d (a_n(i-1) + m) / (dn - 2(i-1) - 1).
pub fn theta(i: usize, n: usize, d: usize, m: f64) -> f64 {
    let (nf, df, j) = (n as f64, d as f64, i as f64 - 1.0);
    df * (a_n(j, n) + m) / (df * nf - 2.0 * j - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementSeries {
    pub kind: SeriesKind,
    /// Integer increments; the real increment is `values[i] * scale`.
    pub values: Vec<i32>,
    pub scale: f64,
}

impl IncrementSeries {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i] as f64 * self.scale
    }

    pub fn partial_sums(&self) -> Vec<f64> {
        let mut acc = 0i64;
        self.values
            .iter()
            .map(|&v| {
                acc += v as i64;
                acc as f64 * self.scale
            })
            .collect()
    }
}

fn increment(
    kind: SeriesKind,
    s: &StepRecord,
    i: usize,
    n: usize,
    d: usize,
    aux: Option<&AuxRandomness>,
) -> i32 {
    let d = d as i32;
    let r = s.retained as i32;
    let fresh = s.class.is_fresh() as i32;
    let dm1 = (s.class == HitClass::UnseenDm1) as i32;
    let act = (s.class == HitClass::Active) as i32;
    let unseen = 1 - act;
    let u = || aux.expect("aux checked").u[i - 1];
    match kind {
        SeriesKind::Eta => unseen * r * (s.m as i32 - 1) - act - 1,
        SeriesKind::EtaPrime => r * (d - 2) + r * fresh - 1,
        SeriesKind::Mu => {
            let below = (u() <= theta(i, n, d as usize, aux.expect("aux checked").m)) as i32;
            r * (d - 2) + r * below - 1
        }
        SeriesKind::MuPrime => {
            r * (u() > theta(i, n, d as usize, aux.expect("aux checked").m)) as i32
        }
        SeriesKind::Xi | SeriesKind::D | SeriesKind::DPrime => (d - 1) * r - 1,
        SeriesKind::Delta => r * fresh * (d - 1) + r * dm1 * (d - 2) - act - 1,
        SeriesKind::DeltaPrime => r * fresh * (d - 1) - act - 1,
        SeriesKind::Delta2Prime => r * fresh * (d - 1) - 1,
        SeriesKind::DeltaCap2Prime | SeriesKind::D2Prime => {
            let cut = 1.0 - aux.expect("aux checked").t_prime / n as f64;
            r * (u() <= cut) as i32 * (d - 1) - 1
        }
    }
}

/// Evaluates one series over the first `horizon` steps of phase one.
pub fn series(
    trace: &ExplorationTrace,
    kind: SeriesKind,
    aux: Option<&AuxRandomness>,
    horizon: usize,
) -> Result<IncrementSeries> {
    let steps = trace.phase_one_steps();
    if horizon > steps.len() {
        return Err(Error::Horizon {
            horizon,
            available: steps.len(),
        });
    }
    if kind.needs_aux() {
        match aux {
            None => return invalid(format!("{kind:?} needs auxiliary uniforms")),
            Some(a) if a.u.len() < horizon => {
                return Err(Error::Horizon {
                    horizon,
                    available: a.u.len(),
                });
            }
            _ => {}
        }
    }
    if kind == SeriesKind::DPrime && trace.d < 3 {
        return invalid("the rescaled walk needs d >= 3");
    }
    let values = steps[..horizon]
        .iter()
        .enumerate()
        .map(|(k, s)| increment(kind, s, k + 1, trace.n, trace.d, aux))
        .collect();
    let scale = if kind == SeriesKind::DPrime {
        1.0 / ((trace.d - 2) as f64).sqrt()
    } else {
        1.0
    };
    Ok(IncrementSeries {
        kind,
        values,
        scale,
    })
}

/// First time `start + partial sum <= 0`, or `None` within the horizon.
pub fn first_hit(series: &IncrementSeries, start: f64) -> Option<usize> {
    series
        .partial_sums()
        .iter()
        .position(|&s| start + s <= 0.0)
        .map(|i| i + 1)
}

/// Compares first-hit times with `None` meaning beyond the horizon.
fn hit_le(a: Option<usize>, b: Option<usize>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x <= y,
        (Some(_), None) | (None, None) => true,
        (None, Some(_)) => false,
    }
}

/// Pathwise orderings of the comparison walks over phase one.
pub fn check_coupling(trace: &ExplorationTrace, aux: &AuxRandomness) -> Result<CheckReport> {
    let mut rep = CheckReport::default();
    let len = trace.phase_one_steps().len();
    let get = |k| series(trace, k, Some(aux), len);
    let eta = get(SeriesKind::Eta)?;
    let eta_p = get(SeriesKind::EtaPrime)?;
    let mu = get(SeriesKind::Mu)?;
    let mu_p = get(SeriesKind::MuPrime)?;
    let xi = get(SeriesKind::Xi)?;
    let delta = get(SeriesKind::Delta)?;
    let delta_p = get(SeriesKind::DeltaPrime)?;
    let dd = get(SeriesKind::D)?;
    let d = trace.d as i32;
    for i in 0..len {
        let (e, ep, x, de, dp) = (
            eta.values[i],
            eta_p.values[i],
            xi.values[i],
            delta.values[i],
            delta_p.values[i],
        );
        let at = Some(i + 1);
        rep.check(dp <= de && de <= e, "delta' <= delta <= eta", at, || {
            format!("{dp}, {de}, {e}")
        });
        rep.check(e <= ep && ep <= x, "eta <= eta' <= xi", at, || {
            format!("{e}, {ep}, {x}")
        });
        rep.check(
            mu.values[i] + mu_p.values[i] == x,
            "xi = mu + mu'",
            at,
            || format!("{} + {} != {x}", mu.values[i], mu_p.values[i]),
        );
        rep.check(matches!(mu_p.values[i], 0 | 1), "mu' in {0,1}", at, || {
            mu_p.values[i].to_string()
        });
        rep.check(dd.values[i] >= de, "D >= delta", at, || {
            format!("{} < {de}", dd.values[i])
        });
        rep.check(x == -1 || x == d - 2, "xi support", at, || x.to_string());
        rep.check((-2..=d - 2).contains(&e), "eta support", at, || {
            e.to_string()
        });
        if aux.mode == AuxMode::TraceCoupled {
            let fresh_ok = trace.fresh_before(i + 1) as f64 <= a_n(i as f64, trace.n) + aux.m;
            rep.check(
                !fresh_ok || mu.values[i] >= ep,
                "mu >= eta' on the fresh event",
                at,
                || format!("{} < {ep}", mu.values[i]),
            );
        }
    }
    let start = trace.d as f64;
    let (h_dp, h_d, h_e) = (
        first_hit(&delta_p, start),
        first_hit(&delta, start),
        first_hit(&eta, start),
    );
    rep.check(
        hit_le(h_dp, h_d) && hit_le(h_d, h_e),
        "first-hit ordering",
        None,
        || format!("delta' {h_dp:?}, delta {h_d:?}, eta {h_e:?}"),
    );
    let ph = trace.phase_one();
    if ph.complete {
        rep.check(
            h_e == Some(ph.tau as usize),
            "eta first hit is tau",
            None,
            || format!("{h_e:?} vs {}", ph.tau),
        );
    }
    Ok(rep)
}
