//! Exact small-scale computations used as references: lattice-path dynamic
//! programming, binomial probabilities and exhaustive enumeration of stub
//! matchings with percolation masks.
//!
//! Nothing here calls into the graph, exploration or walk modules.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest horizon evaluated in exact rationals.
pub const EXACT_HORIZON: u64 = 30;

/// Largest number of stubs accepted by the exhaustive enumeration.
pub const MAX_STUBS: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub support: Vec<i64>,
    pub probs: Vec<f64>,
    /// Exact probabilities as `a/b` strings, when computed in rationals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Vec<String>>,
    pub mass: f64,
}

impl ExactDistribution {
    pub fn from_rational(map: &BTreeMap<i64, BigRational>) -> Self {
        let support: Vec<i64> = map.keys().copied().collect();
        let probs: Vec<f64> = map.values().map(to_f64).collect();
        let total: BigRational = map.values().fold(BigRational::zero(), |a, b| a + b);
        Self {
            support,
            probs,
            exact: Some(map.values().map(|q| q.to_string()).collect()),
            mass: to_f64(&total),
        }
    }

    pub fn from_f64(map: &BTreeMap<i64, f64>) -> Self {
        Self {
            support: map.keys().copied().collect(),
            probs: map.values().copied().collect(),
            exact: None,
            mass: map.values().sum(),
        }
    }

    pub fn rational(&self) -> Option<Vec<BigRational>> {
        self.exact
            .as_ref()?
            .iter()
            .map(|s| s.parse().ok())
            .collect()
    }

    pub fn prob(&self, v: i64) -> f64 {
        self.support
            .iter()
            .position(|&s| s == v)
            .map_or(0.0, |i| self.probs[i])
    }

    /// P(X > x).
    pub fn tail_above(&self, x: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| **s as f64 > x)
            .map(|(_, q)| q)
            .sum()
    }
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndAt {
    Level(i64),
    Any,
}

pub enum Barrier<'a> {
    Constant(i64),
    /// Barrier height at each time j.
    Curve(&'a dyn Fn(u64) -> f64),
}

impl Barrier<'_> {
    fn clears(&self, j: u64, s: i64) -> bool {
        match self {
            Barrier::Constant(b) => s > *b,
            Barrier::Curve(f) => s as f64 > f(j),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkProbability {
    pub exact: Option<BigRational>,
    pub value: f64,
    /// True when the horizon forced a floating point evaluation.
    pub downgraded: bool,
}

/// One DP step: mass at time `j` that cleared the barrier at every earlier time.
fn dp_step<T>(
    cur: &BTreeMap<i64, T>,
    j: u64,
    law: &[(i64, T)],
    barrier: &Barrier,
) -> BTreeMap<i64, T>
where
    T: Clone + Zero + std::ops::Mul<Output = T>,
{
    let mut next: BTreeMap<i64, T> = BTreeMap::new();
    for (s, w) in cur {
        for (step, q) in law {
            if q.is_zero() {
                continue;
            }
            let s2 = s + step;
            if !barrier.clears(j, s2) {
                continue;
            }
            let slot = next.entry(s2).or_insert_with(T::zero);
            *slot = slot.clone() + w.clone() * q.clone();
        }
    }
    next
}

fn walk_dp<T>(t: u64, start: i64, law: &[(i64, T)], end: EndAt, barrier: &Barrier) -> T
where
    T: Clone + Zero + One + std::ops::Mul<Output = T>,
{
    if !barrier.clears(0, start) {
        return T::zero();
    }
    let mut cur: BTreeMap<i64, T> = BTreeMap::from([(start, T::one())]);
    for j in 1..=t {
        cur = dp_step(&cur, j, law, barrier);
    }
    match end {
        EndAt::Level(k) => cur.get(&k).cloned().unwrap_or_else(T::zero),
        EndAt::Any => cur.into_values().fold(T::zero(), |a, b| a + b),
    }
}

/// Probability that `start` plus the partial sums of i.i.d. steps stays
/// strictly above the barrier at every time 0..=t, optionally ending at a level.
pub fn walk_stay_positive_exact(
    t: u64,
    start: i64,
    law: &[(i64, BigRational)],
    end: EndAt,
    barrier: &Barrier,
) -> Result<WalkProbability> {
    if law.is_empty() {
        return invalid("empty step law");
    }
    if law.iter().any(|(_, q)| *q < BigRational::zero()) {
        return invalid("negative step probability");
    }
    if t <= EXACT_HORIZON {
        let q = walk_dp(t, start, law, end, barrier);
        Ok(WalkProbability {
            value: to_f64(&q),
            exact: Some(q),
            downgraded: false,
        })
    } else {
        let fl: Vec<(i64, f64)> = law.iter().map(|(v, q)| (*v, to_f64(q))).collect();
        Ok(WalkProbability {
            exact: None,
            value: walk_dp(t, start, &fl, end, barrier),
            downgraded: true,
        })
    }
}

/// Surviving mass by level at every time 0..=t: entry `j` maps k to the
/// probability of clearing the barrier at times 0..=j and sitting at k at j.
pub fn walk_survival_profile(
    t: u64,
    start: i64,
    law: &[(i64, BigRational)],
    barrier: &Barrier,
) -> Result<Vec<BTreeMap<i64, BigRational>>> {
    if t > EXACT_HORIZON {
        return Err(Error::Horizon {
            horizon: t as usize,
            available: EXACT_HORIZON as usize,
        });
    }
    if law.is_empty() || law.iter().any(|(_, q)| *q < BigRational::zero()) {
        return invalid("step law must be non-empty with non-negative probabilities");
    }
    let mut out = Vec::with_capacity(t as usize + 1);
    let first = if barrier.clears(0, start) {
        BTreeMap::from([(start, BigRational::one())])
    } else {
        BTreeMap::new()
    };
    out.push(first);
    for j in 1..=t {
        let next = dp_step(&out[j as usize - 1], j, law, barrier);
        out.push(next);
    }
    Ok(out)
}

/// Floating point variant of [`walk_stay_positive_exact`].
pub fn walk_stay_positive_f64(
    t: u64,
    start: i64,
    law: &[(i64, f64)],
    end: EndAt,
    barrier: &Barrier,
) -> f64 {
    walk_dp(t, start, law, end, barrier)
}

/// The Bin(N, P) law, with log weights accumulated from term ratios and
/// normalised by a log-sum-exp pass.
#[derive(Clone, Debug)]
pub struct BinomialLaw {
    pmf: Vec<f64>,
    upper: Vec<f64>,
}

impl BinomialLaw {
    pub fn new(big_n: u64, big_p: f64) -> Result<Self> {
        if big_n > 1_000_000 {
            return Err(Error::SizeCap(format!("N = {big_n} exceeds 10^6")));
        }
        if !(0.0..=1.0).contains(&big_p) {
            return invalid("P must lie in [0,1]");
        }
        let len = big_n as usize + 1;
        let mut pmf = vec![0.0; len];
        if big_p == 0.0 {
            pmf[0] = 1.0;
        } else if big_p == 1.0 {
            pmf[len - 1] = 1.0;
        } else {
            let odds = big_p.ln() - (-big_p).ln_1p();
            let mut ln = vec![0.0; len];
            for j in 1..len {
                ln[j] = ln[j - 1] + ((big_n - j as u64 + 1) as f64 / j as f64).ln() + odds;
            }
            let top = ln.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = ln.iter().map(|l| (l - top).exp()).sum();
            let lz = top + z.ln();
            for j in 0..len {
                pmf[j] = (ln[j] - lz).exp();
            }
        }
        let mut upper = vec![0.0; len + 1];
        for j in (0..len).rev() {
            upper[j] = upper[j + 1] + pmf[j];
        }
        Ok(Self { pmf, upper })
    }

    pub fn pmf(&self, j: u64) -> f64 {
        self.pmf.get(j as usize).copied().unwrap_or(0.0)
    }

    /// P(X >= j).
    pub fn tail(&self, j: u64) -> f64 {
        self.upper.get(j as usize).map_or(0.0, |v| v.min(1.0))
    }
}

/// P(Bin(N, P) = j).
pub fn binomial_pmf(big_n: u64, big_p: f64, j: u64) -> Result<f64> {
    Ok(BinomialLaw::new(big_n, big_p)?.pmf(j))
}

/// P(Bin(N, P) >= j).
pub fn binomial_tail(big_n: u64, big_p: f64, j: u64) -> Result<f64> {
    Ok(BinomialLaw::new(big_n, big_p)?.tail(j))
}

/// Calls `visit` once per perfect matching of `0..2k` stubs, each given as a
/// partner array, using the pair-the-lowest-unmatched-stub recursion.
pub fn enumerate_matchings(stubs: usize, mut visit: impl FnMut(&[usize])) -> Result<()> {
    if stubs % 2 == 1 {
        return invalid("odd number of stubs");
    }
    if stubs > MAX_STUBS {
        return Err(Error::SizeCap(format!("{stubs} stubs exceeds {MAX_STUBS}")));
    }
    let mut partner = vec![usize::MAX; stubs];
    recurse(&mut partner, &mut visit);
    Ok(())
}

fn recurse(partner: &mut [usize], visit: &mut impl FnMut(&[usize])) {
    let Some(lo) = partner.iter().position(|&x| x == usize::MAX) else {
        visit(partner);
        return;
    };
    for hi in lo + 1..partner.len() {
        if partner[hi] != usize::MAX {
            continue;
        }
        partner[lo] = hi;
        partner[hi] = lo;
        recurse(partner, visit);
        partner[lo] = usize::MAX;
        partner[hi] = usize::MAX;
    }
}

/// Integer counts behind the exhaustive distributions: for each retained-edge
/// count r, how many (matching, mask, vertex) triples give each component
/// size for the vertex, and how many (matching, mask) pairs give each
/// largest-component size.
#[derive(Clone, Debug, Default, PartialEq)]
struct Tally {
    matchings: u64,
    vertex: Vec<Vec<u64>>,
    max: Vec<Vec<u64>>,
}

impl Tally {
    fn new(pairs: usize, n: usize) -> Self {
        Self {
            matchings: 0,
            vertex: vec![vec![0; n + 1]; pairs + 1],
            max: vec![vec![0; n + 1]; pairs + 1],
        }
    }

    fn add(mut self, o: &Tally) -> Self {
        self.matchings += o.matchings;
        for (a, b) in self.vertex.iter_mut().zip(&o.vertex) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.max.iter_mut().zip(&o.max) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn tally_matching(partner: &[usize], d: usize, n: usize, tally: &mut Tally) {
    let edges: Vec<(usize, usize)> = (0..partner.len())
        .filter(|&s| s < partner[s])
        .map(|s| (s / d, partner[s] / d))
        .collect();
    tally.matchings += 1;
    let mut parent = vec![0usize; n];
    let mut size = vec![0u64; n];
    for mask in 0u32..(1u32 << edges.len()) {
        parent.iter_mut().enumerate().for_each(|(i, p)| *p = i);
        size.iter_mut().for_each(|s| *s = 0);
        for (b, &(u, v)) in edges.iter().enumerate() {
            if mask >> b & 1 == 1 {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru] = rv;
                }
            }
        }
        for v in 0..n {
            let r = find(&mut parent, v);
            size[r] += 1;
        }
        let r = mask.count_ones() as usize;
        let mut biggest = 0;
        for v in 0..n {
            let r0 = find(&mut parent, v);
            let s = size[r0] as usize;
            tally.vertex[r][s] += 1;
            biggest = biggest.max(s);
        }
        tally.max[r][biggest] += 1;
    }
}

fn is_simple(partner: &[usize], d: usize) -> bool {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for (s, &t) in partner.iter().enumerate() {
        if s > t {
            continue;
        }
        let (u, v) = (s / d, t / d);
        if u == v {
            return false;
        }
        seen.push((u.min(v), u.max(v)));
    }
    seen.sort_unstable();
    seen.windows(2).all(|w| w[0] != w[1])
}

/// Exact enumeration over every matching and mask of a small configuration model.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallGraphCounts {
    pub n: usize,
    pub d: usize,
    all: Tally,
    simple: Tally,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallGraphDistribution {
    pub n: usize,
    pub d: usize,
    pub p: String,
    pub condition_on_simple: bool,
    /// Law of the component size of a uniform vertex.
    pub vertex: ExactDistribution,
    /// Law of the largest component size.
    pub max: ExactDistribution,
    pub p_simple: f64,
    pub p_simple_exact: String,
}

/// Enumerates all (dn-1)!! matchings and 2^{dn/2} masks for dn <= 14.
pub fn exhaustive_small_graph(n: usize, d: usize) -> Result<SmallGraphCounts> {
    let stubs = n * d;
    if n == 0 || d == 0 || stubs % 2 == 1 {
        return invalid("need n, d >= 1 and dn even");
    }
    if stubs > MAX_STUBS {
        return Err(Error::SizeCap(format!("dn = {stubs} exceeds {MAX_STUBS}")));
    }
    let pairs = stubs / 2;
    let (all, simple) = (1..stubs)
        .into_par_iter()
        .map(|first| {
            let mut all = Tally::new(pairs, n);
            let mut simple = Tally::new(pairs, n);
            let mut partner = vec![usize::MAX; stubs];
            partner[0] = first;
            partner[first] = 0;
            recurse(&mut partner, &mut |m: &[usize]| {
                tally_matching(m, d, n, &mut all);
                if is_simple(m, d) {
                    tally_matching(m, d, n, &mut simple);
                }
            });
            (all, simple)
        })
        .reduce(
            || (Tally::new(pairs, n), Tally::new(pairs, n)),
            |(a, b), (c, e)| (a.add(&c), b.add(&e)),
        );
    Ok(SmallGraphCounts { n, d, all, simple })
}

impl SmallGraphCounts {
    pub fn matchings(&self) -> u64 {
        self.all.matchings
    }

    pub fn simple_matchings(&self) -> u64 {
        self.simple.matchings
    }

    pub fn p_simple(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.simple.matchings),
            BigInt::from(self.all.matchings),
        )
    }

    fn weights(&self, p: &BigRational) -> Vec<BigRational> {
        let pairs = self.all.vertex.len() - 1;
        let q = BigRational::one() - p;
        (0..=pairs)
            .map(|r| num_traits::pow(p.clone(), r) * num_traits::pow(q.clone(), pairs - r))
            .collect()
    }

    fn law(rows: &[Vec<u64>], weights: &[BigRational], denom: u64) -> BTreeMap<i64, BigRational> {
        let mut out = BTreeMap::new();
        let den = BigRational::from_integer(BigInt::from(denom));
        for s in 1..rows[0].len() {
            let total = rows
                .iter()
                .zip(weights)
                .fold(BigRational::zero(), |acc, (row, w)| {
                    acc + w * BigRational::from_integer(BigInt::from(row[s]))
                });
            if !total.is_zero() {
                out.insert(s as i64, total / den.clone());
            }
        }
        out
    }

    /// Exact laws at a rational retention probability.
    pub fn evaluate_exact(
        &self,
        p: &BigRational,
        condition_on_simple: bool,
    ) -> Result<SmallGraphDistribution> {
        if *p < BigRational::zero() || *p > BigRational::one() {
            return invalid("p must lie in [0,1]");
        }
        let t = if condition_on_simple {
            &self.simple
        } else {
            &self.all
        };
        if t.matchings == 0 {
            return Err(Error::Infeasible(format!(
                "no simple {}-regular multigraph on {} vertices",
                self.d, self.n
            )));
        }
        let w = self.weights(p);
        let ps = self.p_simple();
        Ok(SmallGraphDistribution {
            n: self.n,
            d: self.d,
            p: p.to_string(),
            condition_on_simple,
            vertex: ExactDistribution::from_rational(&Self::law(
                &t.vertex,
                &w,
                t.matchings * self.n as u64,
            )),
            max: ExactDistribution::from_rational(&Self::law(&t.max, &w, t.matchings)),
            p_simple: to_f64(&ps),
            p_simple_exact: ps.to_string(),
        })
    }

    /// Floating point laws at any p in [0,1].
    pub fn evaluate(&self, p: f64, condition_on_simple: bool) -> Result<SmallGraphDistribution> {
        if !(0.0..=1.0).contains(&p) {
            return invalid("p must lie in [0,1]");
        }
        let t = if condition_on_simple {
            &self.simple
        } else {
            &self.all
        };
        if t.matchings == 0 {
            return Err(Error::Infeasible(format!(
                "no simple {}-regular multigraph on {} vertices",
                self.d, self.n
            )));
        }
        let pairs = t.vertex.len() - 1;
        let w: Vec<f64> = (0..=pairs)
            .map(|r| p.powi(r as i32) * (1.0 - p).powi((pairs - r) as i32))
            .collect();
        let law = |rows: &[Vec<u64>], denom: f64| {
            let mut out = BTreeMap::new();
            for s in 1..rows[0].len() {
                let v: f64 = rows
                    .iter()
                    .zip(&w)
                    .map(|(row, wr)| wr * row[s] as f64)
                    .sum::<f64>()
                    / denom;
                if v > 0.0 {
                    out.insert(s as i64, v);
                }
            }
            out
        };
        let ps = self.p_simple();
        Ok(SmallGraphDistribution {
            n: self.n,
            d: self.d,
            p: p.to_string(),
            condition_on_simple,
            vertex: ExactDistribution::from_f64(&law(
                &t.vertex,
                (t.matchings * self.n as u64) as f64,
            )),
            max: ExactDistribution::from_f64(&law(&t.max, t.matchings as f64)),
            p_simple: to_f64(&ps),
            p_simple_exact: ps.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn dp_fixtures() {
        let law = [(1, r(1, 2)), (-1, r(1, 2))];
        let w =
            walk_stay_positive_exact(3, 1, &law, EndAt::Level(2), &Barrier::Constant(0)).unwrap();
        assert_eq!(w.exact, Some(r(1, 4)));
        let w = walk_stay_positive_exact(3, 0, &law, EndAt::Any, &Barrier::Constant(0)).unwrap();
        assert_eq!(w.exact, Some(r(0, 1)));
        let up = [(1, r(1, 1)), (-1, r(0, 1))];
        let w = walk_stay_positive_exact(10, 1, &up, EndAt::Any, &Barrier::Constant(0)).unwrap();
        assert_eq!(w.exact, Some(r(1, 1)));
    }

    #[test]
    fn profile_matches_single_endpoints() {
        let law = [(2, r(1, 3)), (-1, r(2, 3))];
        let prof = walk_survival_profile(8, 3, &law, &Barrier::Constant(0)).unwrap();
        for (j, level) in prof.iter().enumerate() {
            for k in -2..20 {
                let w = walk_stay_positive_exact(
                    j as u64,
                    3,
                    &law,
                    EndAt::Level(k),
                    &Barrier::Constant(0),
                )
                .unwrap();
                assert_eq!(
                    level.get(&k).cloned().unwrap_or_else(BigRational::zero),
                    w.exact.unwrap()
                );
            }
        }
        assert!(walk_survival_profile(31, 3, &law, &Barrier::Constant(0)).is_err());
    }

    #[test]
    fn dp_downgrades_beyond_exact_horizon() {
        let law = [(1, r(1, 2)), (-1, r(1, 2))];
        let w = walk_stay_positive_exact(40, 1, &law, EndAt::Any, &Barrier::Constant(0)).unwrap();
        assert!(w.downgraded && w.exact.is_none());
        assert!(w.value > 0.0 && w.value < 1.0);
    }

    #[test]
    fn curved_barrier() {
        let law = [(1, r(1, 2)), (-1, r(1, 2))];
        let f = |j: u64| j as f64 - 0.5;
        let w = walk_stay_positive_exact(4, 1, &law, EndAt::Any, &Barrier::Curve(&f)).unwrap();
        assert_eq!(w.exact, Some(r(1, 16)));
    }

    #[test]
    fn binomial_fixtures() {
        assert!((binomial_pmf(4, 0.5, 2).unwrap() - 0.375).abs() < 1e-15);
        assert!((binomial_tail(4, 0.5, 4).unwrap() - 0.0625).abs() < 1e-15);
        let law = BinomialLaw::new(10_000, 0.3).unwrap();
        let total: f64 = (0..=10_000).map(|j| law.pmf(j)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((law.tail(0) - 1.0).abs() < 1e-12);
        assert_eq!(binomial_pmf(5, 0.0, 0).unwrap(), 1.0);
        assert_eq!(binomial_pmf(5, 1.0, 4).unwrap(), 0.0);
        let exact = 1.0 - 0.7f64.powi(20) - 20.0 * 0.3 * 0.7f64.powi(19);
        assert!((binomial_tail(20, 0.3, 2).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn matching_count_is_double_factorial() {
        for stubs in [2usize, 4, 6, 8, 10] {
            let mut c = 0u64;
            enumerate_matchings(stubs, |_| c += 1).unwrap();
            let df: u64 = (1..stubs as u64).step_by(2).product();
            assert_eq!(c, df);
        }
        assert!(matches!(
            enumerate_matchings(16, |_| {}),
            Err(Error::SizeCap(_))
        ));
    }

    #[test]
    fn small_graph_fixtures() {
        let c = exhaustive_small_graph(4, 3).unwrap();
        assert_eq!(c.matchings(), 10395);
        assert_eq!(c.p_simple(), r(1296, 10395));
        let zero = c.evaluate_exact(&r(0, 1), false).unwrap();
        assert_eq!(zero.max.support, vec![1]);
        let full = c.evaluate_exact(&r(1, 1), true).unwrap();
        assert_eq!(full.max.support, vec![4]);
        let half = c.evaluate_exact(&r(1, 2), false).unwrap();
        let sum: BigRational = half.vertex.rational().unwrap().into_iter().sum();
        assert_eq!(sum, BigRational::one());
        let sum: BigRational = half.max.rational().unwrap().into_iter().sum();
        assert_eq!(sum, BigRational::one());
        assert!(matches!(
            exhaustive_small_graph(6, 3),
            Err(Error::SizeCap(_))
        ));
    }

    #[test]
    fn no_simple_graph_on_two_vertices() {
        let c = exhaustive_small_graph(2, 3).unwrap();
        assert_eq!(c.simple_matchings(), 0);
        assert!(matches!(c.evaluate(0.5, true), Err(Error::Infeasible(_))));
    }

    #[test]
    fn float_and_exact_agree() {
        let c = exhaustive_small_graph(4, 3).unwrap();
        let e = c.evaluate_exact(&r(3, 10), false).unwrap();
        let f = c.evaluate(0.3, false).unwrap();
        for (a, b) in e.max.probs.iter().zip(&f.max.probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
