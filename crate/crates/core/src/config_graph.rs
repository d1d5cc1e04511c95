//! Configuration model multigraphs with a per-edge percolation mask.

use petgraph::unionfind::UnionFind;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const UNMATCHED: u32 = u32::MAX;

/// Percolation regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub lambda: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
}

impl Params {
    pub fn new(n: usize, d: usize, p: f64) -> Result<Self> {
        if n == 0 || d == 0 {
            return invalid(format!("n and d must be positive (n={n}, d={d})"));
        }
        if !(n * d).is_multiple_of(2) {
            return invalid(format!("d*n must be even (n={n}, d={d})"));
        }
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("p={p} outside [0,1]"));
        }
        if n * d >= UNMATCHED as usize {
            return invalid("too many stubs for 32-bit stub ids");
        }
        Ok(Self {
            n,
            d,
            p,
            lambda: None,
            a: None,
        })
    }

    /// p = (1 + lambda n^{-1/3}) / (d - 1).
    pub fn critical(n: usize, d: usize, lambda: f64) -> Result<Self> {
        if d < 2 {
            return invalid("critical scaling needs d >= 2");
        }
        let p = critical_p(n, d, lambda);
        let mut params = Self::new(n, d, p)?;
        params.lambda = Some(lambda);
        Ok(params)
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn stubs(&self) -> usize {
        self.n * self.d
    }

    /// A n^{2/3}, if A is set.
    pub fn threshold(&self) -> Option<f64> {
        self.a.map(|a| a * crate::theory::n23(self.n))
    }
}

pub fn critical_p(n: usize, d: usize, lambda: f64) -> f64 {
    (1.0 + lambda * (n as f64).powf(-1.0 / 3.0)) / (d as f64 - 1.0)
}

/// Stub `(vertex, slot)` with flat code `vertex * d + slot`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StubId {
    pub vertex: u32,
    pub slot: u32,
}

impl StubId {
    pub fn from_flat(code: u32, d: usize) -> Self {
        Self {
            vertex: code / d as u32,
            slot: code % d as u32,
        }
    }

    pub fn flat(self, d: usize) -> u32 {
        self.vertex * d as u32 + self.slot
    }
}

/// A (possibly partial) pairing of the dn stubs with an optional retention mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    n: usize,
    d: usize,
    partner: Vec<u32>,
    pair_of: Vec<u32>,
    pairs: Vec<(u32, u32)>,
    mask: Option<Vec<bool>>,
}

impl Matching {
    pub fn empty(n: usize, d: usize) -> Result<Self> {
        Params::new(n, d, 0.0)?;
        let m = n * d;
        Ok(Self {
            n,
            d,
            partner: vec![UNMATCHED; m],
            pair_of: vec![UNMATCHED; m],
            pairs: Vec::with_capacity(m / 2),
            mask: None,
        })
    }

    /// Builds a matching from an explicit pair list; `retained`, when given, is indexed like `pairs`.
    pub fn from_pairs(
        n: usize,
        d: usize,
        pairs: &[(u32, u32)],
        retained: Option<&[bool]>,
    ) -> Result<Self> {
        let mut m = Self::empty(n, d)?;
        for &(a, b) in pairs {
            m.join(a, b)?;
        }
        if let Some(r) = retained {
            if r.len() != m.pairs.len() {
                return invalid("mask length differs from pair count");
            }
            m.mask = Some(r.to_vec());
        }
        Ok(m)
    }

    /// Pairs two unmatched stubs and returns the pair index.
    pub fn join(&mut self, a: u32, b: u32) -> Result<usize> {
        let m = self.partner.len() as u32;
        if a >= m || b >= m {
            return invalid(format!("stub out of range in pair ({a},{b})"));
        }
        if a == b {
            return invalid(format!("stub {a} paired with itself"));
        }
        if self.partner[a as usize] != UNMATCHED || self.partner[b as usize] != UNMATCHED {
            return invalid(format!("stub reused in pair ({a},{b})"));
        }
        let idx = self.pairs.len();
        self.partner[a as usize] = b;
        self.partner[b as usize] = a;
        self.pair_of[a as usize] = idx as u32;
        self.pair_of[b as usize] = idx as u32;
        self.pairs.push((a.min(b), a.max(b)));
        if let Some(mask) = &mut self.mask {
            mask.push(false);
        }
        Ok(idx)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_stubs(&self) -> usize {
        self.partner.len()
    }

    pub fn vertex(&self, stub: u32) -> u32 {
        stub / self.d as u32
    }

    /// Partner of a stub, or `UNMATCHED`.
    pub fn partner(&self, stub: u32) -> u32 {
        self.partner[stub as usize]
    }

    pub fn partners(&self) -> &[u32] {
        &self.partner
    }

    /// Pair index of a stub, or `UNMATCHED`.
    pub fn pair_of(&self, stub: u32) -> u32 {
        self.pair_of[stub as usize]
    }

    /// Pairs in creation order, each as (lower stub, higher stub).
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn unmatched(&self) -> usize {
        self.partner.len() - 2 * self.pairs.len()
    }

    pub fn is_complete(&self) -> bool {
        self.unmatched() == 0
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn set_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.pairs.len() {
            return invalid("mask length differs from pair count");
        }
        self.mask = Some(mask);
        Ok(())
    }

    pub fn retained_pair(&self, pair: usize) -> Option<bool> {
        self.mask.as_ref().map(|m| m[pair])
    }

    pub fn retained_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(0, |m| m.iter().filter(|&&r| r).count())
    }

    fn require_complete(&self) -> Result<()> {
        match self.unmatched() {
            0 => Ok(()),
            k => Err(Error::Incomplete(k)),
        }
    }

    /// No self-loops and no repeated vertex pairs.
    pub fn is_simple(&self) -> Result<bool> {
        self.require_complete()?;
        let mut edges = Vec::with_capacity(self.pairs.len());
        for &(a, b) in &self.pairs {
            let (u, v) = (self.vertex(a), self.vertex(b));
            if u == v {
                return Ok(false);
            }
            edges.push((u.min(v), u.max(v)));
        }
        edges.sort_unstable();
        Ok(edges.windows(2).all(|w| w[0] != w[1]))
    }

    /// Retained-edge components, computed by union-find.
    pub fn components(&self) -> Result<ComponentSummary> {
        self.require_complete()?;
        let mask = self
            .mask
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("components need a percolation mask".into()))?;
        let mut uf = UnionFind::<u32>::new(self.n);
        for (&(a, b), &keep) in self.pairs.iter().zip(mask) {
            if keep {
                uf.union(self.vertex(a), self.vertex(b));
            }
        }
        let labels = uf.into_labeling();
        let mut count = vec![0usize; self.n];
        for &l in &labels {
            count[l as usize] += 1;
        }
        let size_of: Vec<usize> = labels.iter().map(|&l| count[l as usize]).collect();
        let mut sizes: Vec<usize> = count.into_iter().filter(|&c| c > 0).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        Ok(ComponentSummary {
            max_size: sizes[0],
            sizes,
            size_of,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSummary {
    /// Component sizes, largest first.
    pub sizes: Vec<usize>,
    pub max_size: usize,
    pub size_of: Vec<usize>,
}

/// Uniform perfect matching: repeatedly pair the lowest unmatched stub with a
/// uniformly chosen other unmatched stub.
pub fn sample_matching<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Matching> {
    let mut matching = Matching::empty(n, d)?;
    let m = n * d;
    let mut pool: Vec<u32> = (0..m as u32).collect();
    let mut pos: Vec<u32> = (0..m as u32).collect();
    let remove = |pool: &mut Vec<u32>, pos: &mut Vec<u32>, x: u32| {
        let i = pos[x as usize] as usize;
        let last = pool.pop().expect("pool not empty");
        if last != x {
            pool[i] = last;
            pos[last as usize] = i as u32;
        }
    };
    for s in 0..m as u32 {
        if matching.partner[s as usize] != UNMATCHED {
            continue;
        }
        remove(&mut pool, &mut pos, s);
        let t = pool[rng.random_range(0..pool.len())];
        remove(&mut pool, &mut pos, t);
        matching.join(s, t)?;
    }
    Ok(matching)
}

/// Retains each pair independently with probability p.
pub fn sample_mask<R: Rng + ?Sized>(
    mut matching: Matching,
    p: f64,
    rng: &mut R,
) -> Result<Matching> {
    matching.require_complete()?;
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("p={p} outside [0,1]"));
    }
    let mask = (0..matching.pairs.len())
        .map(|_| rng.random::<f64>() < p)
        .collect();
    matching.mask = Some(mask);
    Ok(matching)
}

/// Rejection sampling of a simple matching; returns it with the number of draws used.
pub fn sample_simple_matching<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    max_draws: u64,
    rng: &mut R,
) -> Result<(Matching, u64)> {
    if n < d + 1 {
        return Err(Error::Infeasible(format!(
            "no simple {d}-regular graph on {n} vertices"
        )));
    }
    for draw in 1..=max_draws {
        let m = sample_matching(n, d, rng)?;
        if m.is_simple()? {
            return Ok((m, draw));
        }
    }
    Err(Error::Infeasible(format!(
        "no simple matching in {max_draws} draws"
    )))
}

/// A matching dump together with its header values.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingDump {
    pub p: f64,
    pub seed: u64,
    pub matching: Matching,
}

/// Text dump: header `n d p seed`, then one `u.i v.j r` line per pair.
pub fn write_dump(matching: &Matching, p: f64, seed: u64) -> String {
    let d = matching.d;
    let mut out = format!("{} {} {} {}\n", matching.n, d, p, seed);
    for (k, &(a, b)) in matching.pairs.iter().enumerate() {
        let (sa, sb) = (StubId::from_flat(a, d), StubId::from_flat(b, d));
        let r = matching.retained_pair(k).unwrap_or(false) as u8;
        out.push_str(&format!(
            "{}.{} {}.{} {}\n",
            sa.vertex, sa.slot, sb.vertex, sb.slot, r
        ));
    }
    out
}

pub fn parse_dump(text: &str) -> Result<MatchingDump> {
    let perr = |m: &str| Error::Parse(m.to_string());
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| perr("empty dump"))?
        .split_whitespace()
        .collect();
    if header.len() != 4 {
        return Err(perr("header must be `n d p seed`"));
    }
    let n: usize = header[0].parse().map_err(|_| perr("bad n"))?;
    let d: usize = header[1].parse().map_err(|_| perr("bad d"))?;
    let p: f64 = header[2].parse().map_err(|_| perr("bad p"))?;
    let seed: u64 = header[3].parse().map_err(|_| perr("bad seed"))?;
    let stub = |tok: &str| -> Result<u32> {
        let (v, s) = tok
            .split_once('.')
            .ok_or_else(|| perr("stub must be v.i"))?;
        let vertex: u32 = v.parse().map_err(|_| perr("bad vertex"))?;
        let slot: u32 = s.parse().map_err(|_| perr("bad slot"))?;
        if vertex as usize >= n || slot as usize >= d {
            return Err(perr("stub out of range"));
        }
        Ok(StubId { vertex, slot }.flat(d))
    };
    let mut pairs = Vec::new();
    let mut mask = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(perr("pair line must be `u.i v.j r`"));
        }
        pairs.push((stub(tok[0])?, stub(tok[1])?));
        mask.push(match tok[2] {
            "0" => false,
            "1" => true,
            _ => return Err(perr("retention flag must be 0 or 1")),
        });
    }
    let matching = Matching::from_pairs(n, d, &pairs, Some(&mask))?;
    Ok(MatchingDump { p, seed, matching })
}
