//! Closed-form exponents, curves, horizons and bounds.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{invalid, Error, Result};

fn need_d3(d: usize) -> Result<()> {
    if d < 3 {
        return invalid(format!("d={d}; these formulas need d >= 3"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentVariant {
    /// lambda A^2 coefficient (d-1)/(2d).
    #[default]
    Theorem11,
    /// lambda A^2 coefficient (d-2)^2/(2d(d-1)).
    Abstract,
}

/// G_lambda(A, d).
pub fn g_exponent(a: f64, lambda: f64, d: usize, variant: ExponentVariant) -> Result<f64> {
    need_d3(d)?;
    if a < 0.0 {
        return invalid("A must be non-negative");
    }
    let d = d as f64;
    let cubic = a.powi(3) * (d - 1.0) * (d - 2.0) / (8.0 * d * d);
    let quad = match variant {
        ExponentVariant::Theorem11 => (d - 1.0) / (2.0 * d),
        ExponentVariant::Abstract => (d - 2.0) * (d - 2.0) / (2.0 * d * (d - 1.0)),
    };
    let lin = lambda * lambda * a * (d - 1.0) / (2.0 * (d - 2.0));
    Ok(cubic - lambda * a * a * quad + lin)
}

/// q(T) = p (1 - 2/d) T (T - 1) / (2n).
pub fn q_upper(t: f64, p: f64, d: usize, n: usize) -> f64 {
    p * (1.0 - 2.0 / d as f64) * t * (t - 1.0) / (2.0 * n as f64)
}

/// q(t) = p (1 - 2/d) t^2 / (2n) + A n^{4/15}.
pub fn q_lower_curve(t: f64, p: f64, d: usize, n: usize, a: f64) -> f64 {
    let nf = n as f64;
    p * (1.0 - 2.0 / d as f64) * t * t / (2.0 * nf) + a * nf.powf(4.0 / 15.0)
}

/// n^{2/3} through the cube root, exact for perfect cubes.
pub fn n23(n: usize) -> f64 {
    (n as f64).cbrt().powi(2)
}

/// floor((d-1) A n^{2/3}) - ceil(n^{1/2}) - 1.
pub fn t_upper(a: f64, n: usize, d: usize) -> i64 {
    let nf = n as f64;
    ((d as f64 - 1.0) * a * n23(n)).floor() as i64 - nf.sqrt().ceil() as i64 - 1
}

/// floor((d-1) A n^{2/3}) + 1.
pub fn t_lower(a: f64, n: usize, d: usize) -> i64 {
    ((d as f64 - 1.0) * a * n23(n)).floor() as i64 + 1
}

/// (k + d - 4 - lambda (T+2) n^{-1/3}) / (d - 1).
pub fn x_offset(k: f64, lambda: f64, t: f64, d: usize, n: usize) -> f64 {
    let d = d as f64;
    (k + d - 4.0 - lambda * (t + 2.0) * (n as f64).powf(-1.0 / 3.0)) / (d - 1.0)
}

/// Number type for the ballot bounds: `f64` or exact `BigRational`.
pub trait Scalar: Clone + PartialOrd + Num {
    fn from_i64(k: i64) -> Self;
    fn binom_pmf(n: u64, j: u64, p: &Self) -> Self;
    fn to_f64_lossy(&self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(k: i64) -> Self {
        k as f64
    }

    fn binom_pmf(n: u64, j: u64, p: &Self) -> Self {
        if j > n {
            return 0.0;
        }
        if *p == 0.0 {
            return if j == 0 { 1.0 } else { 0.0 };
        }
        if *p == 1.0 {
            return if j == n { 1.0 } else { 0.0 };
        }
        (ln_binomial(n, j) + j as f64 * p.ln() + (n - j) as f64 * (-p).ln_1p()).exp()
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

fn binomial_coefficient(n: u64, k: u64) -> BigInt {
    let k = k.min(n - k);
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

fn rpow(x: &BigRational, e: u64) -> BigRational {
    num_traits::pow(x.clone(), e as usize)
}

impl Scalar for BigRational {
    fn from_i64(k: i64) -> Self {
        BigRational::from_integer(BigInt::from(k))
    }

    fn binom_pmf(n: u64, j: u64, p: &Self) -> Self {
        if j > n {
            return BigRational::zero();
        }
        let c = BigRational::from_integer(binomial_coefficient(n, j));
        c * rpow(p, j) * rpow(&(BigRational::one() - p), n - j)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Law of an integer-valued step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLaw<T> {
    pub values: Vec<i64>,
    pub probs: Vec<T>,
}

impl<T: Scalar> StepLaw<T> {
    pub fn new(values: Vec<i64>, probs: Vec<T>) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return invalid("step law needs matching, non-empty value and probability lists");
        }
        if probs.iter().any(|q| *q < T::zero()) {
            return invalid("negative step probability");
        }
        Ok(Self { values, probs })
    }

    /// The two-point law P(up) = p, P(down) = 1 - p.
    pub fn two_point(up: i64, down: i64, p: T) -> Self {
        Self {
            values: vec![up, down],
            probs: vec![p.clone(), T::one() - p],
        }
    }

    pub fn prob_of(&self, v: i64) -> T {
        self.values
            .iter()
            .zip(&self.probs)
            .filter(|(x, _)| **x == v)
            .fold(T::zero(), |acc, (_, q)| acc + q.clone())
    }

    /// Law of the sum of `steps` independent copies, by repeated convolution.
    pub fn sum_law(&self, steps: u64) -> BTreeMap<i64, T> {
        let mut cur = BTreeMap::from([(0i64, T::one())]);
        for _ in 0..steps {
            let mut next: BTreeMap<i64, T> = BTreeMap::new();
            for (s, w) in &cur {
                for (v, q) in self.values.iter().zip(&self.probs) {
                    if q.is_zero() {
                        continue;
                    }
                    let e = next.entry(s + v).or_insert_with(T::zero);
                    *e = e.clone() + w.clone() * q.clone();
                }
            }
            cur = next;
        }
        cur
    }
}

/// (1 / P(X = h)) (k / (t+1)) P(S_{t+1} = k).
pub fn ballot_bound_generic<T: Scalar>(t: u64, k: i64, h: i64, law: &StepLaw<T>) -> Result<T> {
    if t < 1 || k < 1 {
        return invalid("ballot bound needs t, k >= 1");
    }
    let ph = law.prob_of(h);
    if ph.is_zero() {
        return Err(Error::Hypothesis(format!("P(X = {h}) = 0")));
    }
    let end = law.sum_law(t + 1).get(&k).cloned().unwrap_or_else(T::zero);
    Ok(T::from_i64(k) / T::from_i64(t as i64 + 1) * end / ph)
}

/// P(sum of `steps` xi = level) with xi = (d-1) 1_R - 1, via the binomial identity.
pub fn xi_sum_pmf<T: Scalar>(steps: u64, level: i64, d: usize, p: &T) -> T {
    let num = steps as i64 + level;
    let dm1 = d as i64 - 1;
    if num < 0 || num % dm1 != 0 || num / dm1 > steps as i64 {
        return T::zero();
    }
    T::binom_pmf(steps, (num / dm1) as u64, p)
}

/// Upper bound on P(d + xi partial sums stay positive on [t], end at k).
pub fn ballot_bound_regular<T: Scalar>(t: u64, k: i64, d: usize, p: &T) -> Result<T> {
    need_d3(d)?;
    if k < 1 {
        return invalid("k must be >= 1");
    }
    if p.is_zero() {
        return Err(Error::Hypothesis("p = 0".into()));
    }
    let pp = p.clone() * p.clone();
    if d >= 4 {
        let level = k + d as i64 - 4;
        let tt = T::from_i64(t as i64 + 2);
        Ok(T::from_i64(level) / (pp * tt) * xi_sum_pmf(t + 2, level, d, p))
    } else {
        let tt = T::from_i64(t as i64 + 3);
        Ok(T::from_i64(k) / (pp * p.clone() * tt) * xi_sum_pmf(t + 3, k, d, p))
    }
}

/// Point bound on P(Bin(N, P) = j) for j >= PN + x.
pub fn binomial_point_bound(big_n: u64, big_p: f64, x: f64) -> Result<f64> {
    let n = big_n as f64;
    if !(0.0 < big_p && big_p < 1.0) {
        return invalid("P must lie in (0,1)");
    }
    if big_p * n < 1.0 {
        return Err(Error::Hypothesis(format!("PN = {} < 1", big_p * n)));
    }
    if x * (1.0 - big_p) * n / 3.0 < 1.0 {
        return Err(Error::Hypothesis(format!(
            "x(1-P)N/3 = {} < 1",
            x * (1.0 - big_p) * n / 3.0
        )));
    }
    let v = big_p * (1.0 - big_p) * n;
    let expo = -x * x / (2.0 * v) + x / ((1.0 - big_p) * n) + x.powi(3) / (big_p * big_p * n * n);
    Ok(expo.exp() / (2.0 * std::f64::consts::PI * v).sqrt())
}

/// exp(-x^2 / (2(NP + x/3))), bounding P(Bin(N,P) >= NP + x).
pub fn chernoff_bound(big_n: u64, big_p: f64, x: f64) -> Result<f64> {
    if x < 0.0 {
        return invalid("x must be >= 0");
    }
    if !(0.0..=1.0).contains(&big_p) {
        return invalid("P must lie in [0,1]");
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok((-x * x / (2.0 * (big_n as f64 * big_p + x / 3.0))).exp())
}

/// Density at z of Brownian motion from x at time t, killed on first touching y + mu s.
pub fn reflection_density(x: f64, y: f64, mu: f64, t: f64, z: f64) -> Result<f64> {
    if t <= 0.0 {
        return invalid("t must be positive");
    }
    if x < y {
        return invalid("start below the barrier");
    }
    if z <= y + mu * t {
        return invalid("endpoint not above the barrier");
    }
    if x == y {
        return Ok(0.0);
    }
    let gauss = (-(z - x) * (z - x) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
    Ok(gauss * -(2.0 * (x - y) * (mu * t + y - z) / t).exp_m1())
}

fn ln_pos(v: f64, what: &str) -> Result<f64> {
    if v <= 0.0 || !v.is_finite() {
        return invalid(format!("{what} = {v} is not a positive log argument"));
    }
    Ok(v.ln())
}

/// nu = (log(1 - p(1-T'/n)) - log((d-2) p (1-T'/n))) / (d-1).
pub fn tilt_nu(t_prime: f64, n: usize, p: f64, d: usize) -> Result<f64> {
    need_d3(d)?;
    let q = p * (1.0 - t_prime / n as f64);
    let df = d as f64;
    Ok(
        (ln_pos(1.0 - q, "1 - p(1-T'/n)")? - ln_pos((df - 2.0) * q, "(d-2)p(1-T'/n)")?)
            / (df - 1.0),
    )
}

/// gamma = log((1-p) / (p (d-2))) / (d-1).
pub fn tilt_gamma(p: f64, d: usize) -> Result<f64> {
    need_d3(d)?;
    let df = d as f64;
    Ok(ln_pos((1.0 - p) / (p * (df - 2.0)), "(1-p)/(p(d-2))")? / (df - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownianGeometry {
    pub a: f64,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub t: f64,
    pub t_prime: f64,
    pub t_2prime: f64,
    /// Slopes of the chords on [0, T''/2] and [T''/2, T''].
    pub slope1: f64,
    pub slope2: f64,
    pub i1: (f64, f64),
    pub i2: (f64, f64),
    pub phi_end: f64,
}

impl BrownianGeometry {
    fn c(&self) -> f64 {
        (self.d as f64 - 2.0) / (self.d as f64 * (self.d as f64 - 1.0))
    }

    fn shift(&self) -> f64 {
        self.epsilon * (self.n as f64).powf(1.0 / 3.0) / self.a
    }

    /// f(t) = (d-2)/(d(d-1)) (t^2 + 2tT') / (2n) - eps n^{1/3} / (2A).
    pub fn f(&self, t: f64) -> f64 {
        self.c() * (t * t + 2.0 * t * self.t_prime) / (2.0 * self.n as f64) - self.shift() / 2.0
    }

    /// phi(t) = f(t)/sqrt(d-2) + eps n^{1/3} / (4A sqrt(d-2)).
    pub fn phi(&self, t: f64) -> f64 {
        let s = (self.d as f64 - 2.0).sqrt();
        self.f(t) / s + self.shift() / (4.0 * s)
    }

    pub fn l1(&self, s: f64) -> f64 {
        self.phi(0.0) + self.slope1 * s
    }

    /// Second chord, with s measured from T''/2.
    pub fn l2(&self, s: f64) -> f64 {
        self.phi(self.t_2prime / 2.0) + self.slope2 * s
    }
}

pub fn brownian_geometry(
    a: f64,
    n: usize,
    d: usize,
    epsilon: f64,
    lambda: f64,
) -> Result<BrownianGeometry> {
    need_d3(d)?;
    if a <= 0.0 || epsilon <= 0.0 {
        return invalid("A and epsilon must be positive");
    }
    let nf = n as f64;
    let t = t_lower(a, n, d) as f64;
    let t_prime = (n23(n) / (a * a)).floor();
    let mut g = BrownianGeometry {
        a,
        n,
        d,
        epsilon,
        lambda,
        t,
        t_prime,
        t_2prime: t - t_prime,
        slope1: 0.0,
        slope2: 0.0,
        i1: (0.0, 0.0),
        i2: (0.0, 0.0),
        phi_end: 0.0,
    };
    let half = g.t_2prime / 2.0;
    g.slope1 = (g.phi(half) - g.phi(0.0)) / half;
    g.slope2 = (g.phi(g.t_2prime) - g.phi(half)) / half;
    let n13 = nf.powf(1.0 / 3.0);
    let end = g.phi(g.t_2prime);
    g.i1 = (
        end / 2.0 + n13 / (8.0 * a) - a.sqrt() * n13,
        end / 2.0 + n13 / (8.0 * a),
    );
    g.i2 = (end + n13 / (8.0 * a), end + n13 / (4.0 * a));
    g.phi_end = end + n13 / (4.0 * a);
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeMode {
    Vertex,
    Max,
}

/// c A^{-1/2} n^{-1/3} e^{-G} for a fixed vertex, c A^{-3/2} e^{-G} for the maximum.
pub fn envelope(
    a: f64,
    n: usize,
    d: usize,
    lambda: f64,
    mode: EnvelopeMode,
    c: f64,
    variant: ExponentVariant,
) -> Result<f64> {
    if c <= 0.0 || a <= 0.0 {
        return invalid("c and A must be positive");
    }
    let g = g_exponent(a, lambda, d, variant)?;
    Ok(match mode {
        EnvelopeMode::Vertex => c * a.powf(-0.5) * (n as f64).powf(-1.0 / 3.0) * (-g).exp(),
        EnvelopeMode::Max => c * a.powf(-1.5) * (-g).exp(),
    })
}

/// Exact rational from a decimal or fraction string such as "1/3" or "0.2".
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a rational: {s}"));
    if let Some((a, b)) = s.split_once('/') {
        let num: BigInt = a.trim().parse().map_err(|_| bad())?;
        let den: BigInt = b.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let s = s.trim();
    let (neg, body) = s.strip_prefix('-').map_or((false, s), |r| (true, r));
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(num, den);
    Ok(if neg { -r } else { r.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rat(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn exponent_fixtures() {
        assert_relative_eq!(
            g_exponent(2.0, 0.0, 3, ExponentVariant::Theorem11).unwrap(),
            2.0 / 9.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            g_exponent(1.0, 1.0, 4, ExponentVariant::Theorem11).unwrap(),
            0.421875,
            epsilon = 1e-15
        );
        for v in [ExponentVariant::Theorem11, ExponentVariant::Abstract] {
            assert_eq!(g_exponent(0.0, 0.7, 3, v).unwrap(), 0.0);
        }
        assert!(g_exponent(1.0, 0.0, 2, ExponentVariant::Theorem11).is_err());
        let t = g_exponent(1.5, 0.0, 5, ExponentVariant::Theorem11).unwrap();
        let a = g_exponent(1.5, 0.0, 5, ExponentVariant::Abstract).unwrap();
        assert_eq!(t, a);
    }

    #[test]
    fn q_curves() {
        assert_eq!(q_upper(1.0, 0.3, 3, 100), 0.0);
        assert_relative_eq!(q_upper(10.0, 0.5, 3, 100), 0.075, epsilon = 1e-15);
        assert_eq!(q_upper(10.0, 0.5, 2, 100), 0.0);
        let n = 1000usize;
        let a = 2.0;
        assert_relative_eq!(
            q_lower_curve(0.0, 0.5, 3, n, a),
            a * (n as f64).powf(4.0 / 15.0)
        );
        let t = (n as f64).powf(2.0 / 3.0);
        assert_relative_eq!(
            q_lower_curve(t, 0.5, 3, n, a),
            (n as f64).powf(1.0 / 3.0) / 12.0 + a * (n as f64).powf(4.0 / 15.0),
            max_relative = 1e-12
        );
        for t in [0.0, 1.0, 17.0, 400.0] {
            let gap = q_lower_curve(t, 0.4, 4, n, a) - q_upper(t, 0.4, 4, n);
            let expect = a * (n as f64).powf(4.0 / 15.0) + 0.4 * 0.5 * t / (2.0 * n as f64);
            assert_relative_eq!(gap, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn ballot_two_point_equality() {
        for p in ["1/2", "1/3", "3/5"] {
            let p = rat(p);
            let law = StepLaw::two_point(1, -1, p.clone());
            let b = ballot_bound_generic(3, 2, 1, &law).unwrap();
            let two = BigRational::from_i64(2);
            assert_eq!(b, two * p.clone() * p.clone() * (BigRational::one() - p));
        }
        let law = StepLaw::two_point(1, -1, 0.5f64);
        assert_eq!(ballot_bound_generic(3, 2, 1, &law).unwrap(), 0.25);
        assert_eq!(ballot_bound_generic(3, 5, 1, &law).unwrap(), 0.0);
        assert!(matches!(
            ballot_bound_generic(3, 2, 2, &law),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn ballot_regular_support() {
        let p = rat("1/3");
        let far = ballot_bound_regular(2, 100, 4, &p).unwrap();
        assert!(far.is_zero());
        assert!(ballot_bound_regular(2, 2, 4, &p).unwrap() > BigRational::zero());
    }

    #[test]
    fn xi_sum_matches_convolution() {
        let p = rat("2/7");
        for d in 3..=5 {
            let law = StepLaw::two_point(d as i64 - 2, -1, p.clone());
            let conv = law.sum_law(6);
            for level in -8..=20 {
                let direct = xi_sum_pmf(6, level, d, &p);
                assert_eq!(
                    direct,
                    conv.get(&level).cloned().unwrap_or_else(BigRational::zero),
                    "d={d} level={level}"
                );
            }
        }
    }

    #[test]
    fn chernoff_fixtures() {
        assert_eq!(chernoff_bound(100, 0.5, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            chernoff_bound(100, 0.5, 10.0).unwrap(),
            (-0.9375f64).exp(),
            max_relative = 1e-14
        );
        assert!(chernoff_bound(100, 0.5, -1.0).is_err());
    }

    #[test]
    fn point_bound_hypotheses() {
        assert!(binomial_point_bound(100, 0.5, 10.0).is_ok());
        assert!(matches!(
            binomial_point_bound(100, 0.5, 0.01),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(
            binomial_point_bound(10, 0.05, 5.0),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn reflection_fixtures() {
        let v = reflection_density(1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(
            v,
            (1.0 - (-2.0f64).exp()) / (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-14
        );
        assert_eq!(reflection_density(0.3, 0.3, 0.1, 1.0, 2.0).unwrap(), 0.0);
        assert!(reflection_density(-0.1, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(reflection_density(1.0, 0.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn reflection_is_subprobability() {
        let (x, y, mu, t) = (0.7, 0.0, 0.3, 2.0);
        let lo = y + mu * t;
        let h = 1e-3;
        let mass: f64 = (0..20_000)
            .map(|k| lo + (k as f64 + 0.5) * h)
            .map(|z| reflection_density(x, y, mu, t, z).unwrap() * h)
            .sum();
        assert!(mass > 0.0 && mass <= 1.0);
    }

    #[test]
    fn tilts_vanish_at_criticality() {
        for d in 3..=6 {
            let p = 1.0 / (d as f64 - 1.0);
            assert!(tilt_nu(0.0, 1000, p, d).unwrap().abs() < 1e-15);
            assert!(tilt_gamma(p, d).unwrap().abs() < 1e-15);
        }
        assert!(tilt_gamma(0.5, 2).is_err());
        assert!(tilt_gamma(1.0, 3).is_err());
    }

    #[test]
    fn nu_asymptotics() {
        let n = 1_000_000_000usize;
        let (d, lambda) = (3, 1.0);
        let nf = n as f64;
        let t_prime = nf.powf(2.0 / 3.0) / 4.0;
        let p = (1.0 + lambda * nf.powf(-1.0 / 3.0)) / 2.0;
        let nu = tilt_nu(t_prime, n, p, d).unwrap();
        let approx = t_prime / nf - lambda / nf.powf(1.0 / 3.0);
        assert!(
            ((nu - approx) / approx).abs() < 1e-2,
            "nu={nu} approx={approx}"
        );
    }

    #[test]
    fn geometry_fixtures() {
        let g = brownian_geometry(2.0, 1_000_000, 4, 0.5, 0.0).unwrap();
        let s = 2.0f64.sqrt();
        assert!(g.phi(0.0) < 0.0);
        assert_relative_eq!(
            g.phi(0.0),
            -0.5 * 100.0 / (4.0 * 2.0 * s),
            max_relative = 1e-12
        );
        assert_relative_eq!(g.l1(0.0), g.phi(0.0), max_relative = 1e-12);
        assert_relative_eq!(
            g.l1(g.t_2prime / 2.0),
            g.phi(g.t_2prime / 2.0),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            g.l2(g.t_2prime / 2.0),
            g.phi(g.t_2prime),
            max_relative = 1e-12
        );
        let t = 1234.0;
        let second_f = g.f(t + 1.0) - 2.0 * g.f(t) + g.f(t - 1.0);
        assert_relative_eq!(second_f, 2.0 / (12.0 * 1e6), max_relative = 1e-6);
        let second_phi = g.phi(t + 1.0) - 2.0 * g.phi(t) + g.phi(t - 1.0);
        assert_relative_eq!(second_phi, second_f / s, max_relative = 1e-6);
        assert!(g.i2.0 > g.phi(g.t_2prime) && g.i2.1 > g.i2.0);
        assert_eq!(g.phi_end, g.i2.1);
    }

    #[test]
    fn envelope_fixtures() {
        let v = envelope(
            3.0,
            1000,
            3,
            0.0,
            EnvelopeMode::Max,
            1.0,
            ExponentVariant::Theorem11,
        )
        .unwrap();
        assert_relative_eq!(
            v,
            3f64.powf(-1.5) * (-27.0f64 / 36.0).exp(),
            max_relative = 1e-14
        );
        assert!((v - 0.0909).abs() < 1e-3);
        let vert = envelope(
            3.0,
            1000,
            3,
            0.0,
            EnvelopeMode::Vertex,
            1.0,
            ExponentVariant::Theorem11,
        )
        .unwrap();
        assert_relative_eq!(v / vert, 10.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn offset_affine_in_k() {
        let (lambda, t, d, n) = (0.8, 50.0, 4, 1000);
        let x1 = x_offset(1.0, lambda, t, d, n);
        let x2 = x_offset(7.0, lambda, t, d, n);
        assert_relative_eq!((x2 - x1) / 6.0, 1.0 / 3.0, max_relative = 1e-12);
        let p = (1.0 + lambda * (n as f64).powf(-1.0 / 3.0)) / 3.0;
        for k in [1.0, 5.0] {
            let lhs = (t + 2.0) * p + x_offset(k, lambda, t, d, n);
            assert_relative_eq!(
                lhs,
                (t + 2.0 + k + d as f64 - 4.0) / 3.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn horizons() {
        assert_eq!(t_lower(1.0, 1000, 3), 201);
        assert_eq!(t_upper(1.0, 1000, 3), 200 - 32 - 1);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(rat("1/3"), BigRational::new(1.into(), 3.into()));
        assert_eq!(rat("0.2"), BigRational::new(1.into(), 5.into()));
        assert_eq!(rat("3"), BigRational::from_i64(3));
        assert!(parse_rational("1/0").is_err());
    }
}
