use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_graph::Params;
use crate::error::{invalid, Error, Result};
use crate::exploration::Explorer;
use crate::rng::RandomStream;
use crate::stats::{linear_fit, sig12, wilson};
use crate::theory::{g_exponent, ExponentVariant};

use super::elapsed;
use super::tail::{trial_size, TailEstimate, TailMode};

/// Points with fewer successes than this are flagged.
pub const MIN_SUCCESSES: u64 = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    #[serde(rename = "A")]
    pub a: f64,
    pub threshold: f64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// -G_lambda(A, d).
    pub x: f64,
    /// log p_hat + (3/2) log A; absent when there were no successes.
    pub y: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub d: usize,
    pub n: usize,
    pub lambda: f64,
    pub p: f64,
    pub trials: u64,
    pub seed: u64,
    pub variant: ExponentVariant,
    pub points: Vec<ScalingPoint>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub slope_se: Option<f64>,
    pub residuals: Vec<f64>,
    /// Slope refitted on the upper half of the grid.
    pub upper_half_slope: Option<f64>,
    /// p_hat strictly decreasing along the grid.
    pub monotone: bool,
    pub elapsed_s: f64,
}

impl RegressionReport {
    /// One MAX-mode record per grid point.
    pub fn records(&self) -> Vec<TailEstimate> {
        self.points
            .iter()
            .map(|pt| TailEstimate {
                d: self.d,
                n: self.n,
                p: Some(self.p),
                lambda: Some(self.lambda),
                a: Some(pt.a),
                mode: TailMode::Max,
                simple: false,
                trials: self.trials,
                successes: pt.successes,
                p_hat: pt.p_hat,
                ci_lo: pt.ci_lo,
                ci_hi: pt.ci_hi,
                seed: self.seed,
                elapsed_s: 0.0,
            })
            .collect()
    }
}

/// Estimates P(|C_max| > A n^{2/3}) along `a_grid` from one set of trials
/// and regresses log p_hat + (3/2) log A on -G_lambda(A, d).
///
/// Each trial explores until some component exceeds the largest threshold
/// or the graph is exhausted, and its largest component is compared with
/// every threshold, so the estimates share their randomness.
#[allow(clippy::too_many_arguments)]
pub fn scaling_diagnostic(
    d: usize,
    n: usize,
    lambda: f64,
    a_grid: &[f64],
    trials: u64,
    seed: u64,
    variant: ExponentVariant,
    timing: bool,
) -> Result<RegressionReport> {
    if a_grid.is_empty() || trials == 0 {
        return invalid("need a non-empty A grid and trials >= 1");
    }
    if a_grid.windows(2).any(|w| w[0] >= w[1]) || a_grid[0] <= 0.0 {
        return invalid("A grid must be positive and strictly increasing");
    }
    let params = Params::critical(n, d, lambda)?;
    let n23 = crate::theory::n23(n);
    let thresholds: Vec<f64> = a_grid.iter().map(|a| a * n23).collect();
    let top = *thresholds.last().expect("non-empty");
    if top >= n as f64 {
        return Err(Error::Infeasible(format!(
            "threshold {top} is not below n = {n}"
        )));
    }
    let start = Instant::now();
    Explorer::new(n, d)?;
    let k = thresholds.len();
    let successes = (0..trials)
        .into_par_iter()
        .map_init(
            || Explorer::new(n, d).expect("dimensions checked"),
            |ex, i| {
                let mut rng = RandomStream::new(seed, i);
                let size = trial_size(ex, &params, TailMode::Max, false, 0, top, &mut rng)? as f64;
                Ok::<_, Error>(
                    thresholds
                        .iter()
                        .map(|t| u64::from(size > *t))
                        .collect::<Vec<u64>>(),
                )
            },
        )
        .try_reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let mut points = Vec::with_capacity(k);
    for ((&a, &thr), &s) in a_grid.iter().zip(&thresholds).zip(&successes) {
        let p_hat = s as f64 / trials as f64;
        let (lo, hi) = wilson(s, trials, 0.95);
        let g = g_exponent(a, lambda, d, variant)?;
        points.push(ScalingPoint {
            a: sig12(a),
            threshold: sig12(thr),
            successes: s,
            p_hat: sig12(p_hat),
            ci_lo: sig12(lo),
            ci_hi: sig12(hi),
            x: sig12(-g),
            y: (s > 0).then(|| sig12(p_hat.ln() + 1.5 * a.ln())),
            flagged: s < MIN_SUCCESSES,
        });
    }
    let fit_on = |pts: &[ScalingPoint]| {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            pts.iter().filter_map(|p| p.y.map(|y| (p.x, y))).unzip();
        linear_fit(&xs, &ys)
    };
    let fit = fit_on(&points);
    let upper = fit_on(&points[k / 2..]);
    let monotone = points.windows(2).all(|w| w[1].p_hat < w[0].p_hat);
    Ok(RegressionReport {
        d,
        n,
        lambda: sig12(lambda),
        p: sig12(params.p),
        trials,
        seed,
        variant,
        slope: fit.as_ref().map(|f| sig12(f.slope)),
        intercept: fit.as_ref().map(|f| sig12(f.intercept)),
        slope_se: fit
            .as_ref()
            .map(|f| sig12(f.slope_se))
            .filter(|v| v.is_finite()),
        residuals: fit
            .map(|f| f.residuals.into_iter().map(sig12).collect())
            .unwrap_or_default(),
        upper_half_slope: upper.map(|f| sig12(f.slope)),
        points,
        monotone,
        elapsed_s: elapsed(start, timing),
    })
}
