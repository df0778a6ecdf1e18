//! Brute-force ground truth over commuting tuples of permutations.
//!
//! `A(l, n, k)` counts `l`-tuples of pairwise commuting permutations of
//! `[n] = {1..n}` whose generated subgroup has exactly `k` orbits. The
//! enumerator walks `pi_1` over all of `S_n` and restricts every later entry
//! to the common centralizer of the prefix. Orbits are the connected
//! components of the union of the generators' functional graphs, which a
//! union-find over the edges `j ~ pi_i(j)` finds exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::abundancy::b_via_flags;
use crate::arith::{factorial, int_to_rational, rational_to_int, ExactInt, ExactRational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("not a permutation of [{n}]: {reason}")]
    InvalidPermutation { n: usize, reason: String },
    #[error("permutations act on different sets ({0} vs {1} points)")]
    SizeMismatch(usize, usize),
    #[error(
        "enumerating (l = {ell}, n = {n}) needs n!^l = {work} steps, over the budget of {budget}"
    )]
    OverBudget {
        ell: u32,
        n: u32,
        work: String,
        budget: u128,
    },
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("{what} is not an integer: {value}")]
    NonIntegral { what: String, value: String },
}

/// A bijection of `[n]`, stored 1-based: `image[j - 1] = pi(j)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation {
    image: Vec<u32>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (1..=n as u32).collect(),
        }
    }

    /// The cycle `j -> j + 1` (mod n) on `[n]`.
    pub fn rotation(n: usize) -> Self {
        Permutation {
            image: (1..=n as u32).map(|j| j % n as u32 + 1).collect(),
        }
    }

    pub fn from_images(image: Vec<u32>) -> Result<Self, OracleError> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &x in &image {
            if x == 0 || x as usize > n {
                return Err(OracleError::InvalidPermutation {
                    n,
                    reason: format!("image {x} out of range"),
                });
            }
            if std::mem::replace(&mut seen[x as usize - 1], true) {
                return Err(OracleError::InvalidPermutation {
                    n,
                    reason: format!("image {x} repeated"),
                });
            }
        }
        Ok(Permutation { image })
    }

    /// Builds a permutation from disjoint cycles written 1-based.
    pub fn from_cycles(n: usize, cycles: &[&[u32]]) -> Result<Self, OracleError> {
        let mut image: Vec<u32> = (1..=n as u32).collect();
        for cycle in cycles {
            for (i, &x) in cycle.iter().enumerate() {
                let y = cycle[(i + 1) % cycle.len()];
                if x == 0 || x as usize > n {
                    return Err(OracleError::InvalidPermutation {
                        n,
                        reason: format!("point {x} out of range"),
                    });
                }
                image[x as usize - 1] = y;
            }
        }
        Self::from_images(image)
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn images(&self) -> &[u32] {
        &self.image
    }

    #[inline]
    pub fn apply(&self, j: u32) -> u32 {
        self.image[j as usize - 1]
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation {
            image: other.image.iter().map(|&j| self.apply(j)).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u32; self.len()];
        for (j, &x) in self.image.iter().enumerate() {
            inv[x as usize - 1] = j as u32 + 1;
        }
        Permutation { image: inv }
    }

    pub fn pow(&self, k: u64) -> Permutation {
        let mut out = Permutation::identity(self.len());
        for _ in 0..k {
            out = self.compose(&out);
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.image
            .iter()
            .enumerate()
            .all(|(j, &x)| x as usize == j + 1)
    }

    #[inline]
    pub fn commutes_with(&self, other: &Permutation) -> bool {
        self.image
            .iter()
            .zip(&other.image)
            .all(|(&a, &b)| other.apply(a) == self.apply(b))
    }

    /// `sigma ∘ self ∘ sigma^{-1}`, i.e. `self` with points relabelled by `sigma`.
    pub fn conjugate_by(&self, sigma: &Permutation) -> Permutation {
        let mut image = vec![0u32; self.len()];
        for (j, &x) in self.image.iter().enumerate() {
            image[sigma.apply(j as u32 + 1) as usize - 1] = sigma.apply(x);
        }
        Permutation { image }
    }

    /// All of `S_n` in lexicographic order of image vectors.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut cur: Vec<u32> = (1..=n as u32).collect();
        let mut out = Vec::new();
        loop {
            out.push(Permutation { image: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else {
                break;
            };
            let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
        }
        out
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, x) in self.image.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "]")
    }
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.components -= 1;
        }
    }
}

/// Number of orbits of the group generated by `perms` on `[n]`.
pub fn orbit_count(n: usize, perms: &[&Permutation]) -> usize {
    let mut uf = UnionFind::new(n);
    for p in perms {
        for (j, &x) in p.image.iter().enumerate() {
            uf.union(j, x as usize - 1);
        }
    }
    uf.components
}

/// An `l`-tuple of permutations of one `[n]` with its orbit count cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermTuple {
    n: usize,
    perms: Vec<Permutation>,
    orbit_count: usize,
}

impl PermTuple {
    pub fn new(n: usize, perms: Vec<Permutation>) -> Result<Self, OracleError> {
        if let Some(p) = perms.iter().find(|p| p.len() != n) {
            return Err(OracleError::SizeMismatch(n, p.len()));
        }
        let refs: Vec<&Permutation> = perms.iter().collect();
        let orbit_count = orbit_count(n, &refs);
        Ok(PermTuple {
            n,
            perms,
            orbit_count,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perms(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn into_perms(self) -> Vec<Permutation> {
        self.perms
    }

    pub fn orbit_count(&self) -> usize {
        self.orbit_count
    }

    pub fn pairwise_commuting(&self) -> bool {
        self.perms
            .iter()
            .enumerate()
            .all(|(i, a)| self.perms[i + 1..].iter().all(|b| a.commutes_with(b)))
    }

    /// Relabels every entry by `sigma`.
    pub fn conjugate_by(&self, sigma: &Permutation) -> PermTuple {
        PermTuple {
            n: self.n,
            perms: self.perms.iter().map(|p| p.conjugate_by(sigma)).collect(),
            orbit_count: self.orbit_count,
        }
    }
}

/// `A(l, n, k)` for every `k` in `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ATable {
    pub ell: u32,
    pub n: u32,
    #[serde(serialize_with = "ser_counts")]
    pub counts: BTreeMap<u32, ExactInt>,
}

fn ser_counts<S: serde::Serializer>(
    counts: &BTreeMap<u32, ExactInt>,
    s: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(counts.len()))?;
    for (k, v) in counts {
        map.serialize_entry(&k.to_string(), &v.to_string())?;
    }
    map.end()
}

impl ATable {
    fn zeroed(ell: u32, n: u32) -> Self {
        ATable {
            ell,
            n,
            counts: (1..=n).map(|k| (k, ExactInt::zero())).collect(),
        }
    }

    pub fn count(&self, k: u32) -> ExactInt {
        self.counts.get(&k).cloned().unwrap_or_default()
    }

    /// `|A(l, n)|`, all commuting tuples.
    pub fn total(&self) -> ExactInt {
        self.counts.values().sum()
    }
}

/// Limit on the nominal `n!^l` workload of brute-force enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_work: u128,
}

impl Default for OracleBudget {
    /// Admits `l = 2` up to `n = 7` and `l = 3` up to `n = 5`.
    fn default() -> Self {
        OracleBudget {
            max_work: 30_000_000,
        }
    }
}

impl OracleBudget {
    pub fn check(&self, ell: u32, n: u32) -> Result<(), OracleError> {
        let work = num_traits::pow(factorial(n as u64), ell as usize);
        match work.to_u128() {
            Some(w) if w <= self.max_work => Ok(()),
            _ => Err(OracleError::OverBudget {
                ell,
                n,
                work: work.to_string(),
                budget: self.max_work,
            }),
        }
    }
}

fn check_args(ell: u32, n: u32) -> Result<(), OracleError> {
    if ell < 1 || n < 1 {
        return Err(OracleError::InvalidArgs(format!(
            "need l >= 1 and n >= 1 (got l = {ell}, n = {n})"
        )));
    }
    Ok(())
}

// Depth-first over the common centralizer of the chosen prefix.
fn walk<'a, F: FnMut(&[&'a Permutation])>(
    chosen: &mut Vec<&'a Permutation>,
    candidates: &[&'a Permutation],
    remaining: u32,
    visit: &mut F,
) {
    if remaining == 0 {
        visit(chosen);
        return;
    }
    for &p in candidates {
        let narrowed: Vec<&Permutation> = if remaining > 1 {
            candidates
                .iter()
                .copied()
                .filter(|c| c.commutes_with(p))
                .collect()
        } else {
            Vec::new()
        };
        chosen.push(p);
        walk(chosen, &narrowed, remaining - 1, visit);
        chosen.pop();
    }
}

/// Calls `visit` once for every pairwise commuting `l`-tuple in `S_n^l`.
pub fn for_each_commuting_tuple<F: FnMut(&[&Permutation])>(
    ell: u32,
    n: u32,
    budget: &OracleBudget,
    mut visit: F,
) -> Result<(), OracleError> {
    check_args(ell, n)?;
    budget.check(ell, n)?;
    let all = Permutation::all(n as usize);
    let refs: Vec<&Permutation> = all.iter().collect();
    walk(&mut Vec::new(), &refs, ell, &mut visit);
    Ok(())
}

/// Brute-force `A(l, n, .)`; parallel over `pi_1`, merged by exact addition.
pub fn enumerate_a(ell: u32, n: u32, budget: &OracleBudget) -> Result<ATable, OracleError> {
    check_args(ell, n)?;
    budget.check(ell, n)?;
    let all = Permutation::all(n as usize);
    let refs: Vec<&Permutation> = all.iter().collect();
    let partial: Vec<Vec<u64>> = refs
        .par_iter()
        .map(|&first| {
            let mut local = vec![0u64; n as usize + 1];
            let centralizer: Vec<&Permutation> = refs
                .iter()
                .copied()
                .filter(|c| c.commutes_with(first))
                .collect();
            let mut chosen = vec![first];
            walk(&mut chosen, &centralizer, ell - 1, &mut |tuple| {
                local[orbit_count(n as usize, tuple)] += 1;
            });
            local
        })
        .collect();
    let mut table = ATable::zeroed(ell, n);
    for local in partial {
        for (k, c) in local.into_iter().enumerate().skip(1) {
            *table.counts.get_mut(&(k as u32)).expect("k in 1..=n") += c;
        }
    }
    Ok(table)
}

/// The set of transitive (`kappa = 1`) commuting tuples.
pub fn transitive_tuples(
    ell: u32,
    n: u32,
    budget: &OracleBudget,
) -> Result<BTreeSet<Vec<Permutation>>, OracleError> {
    let mut out = BTreeSet::new();
    for_each_commuting_tuple(ell, n, budget, |tuple| {
        if orbit_count(n as usize, tuple) == 1 {
            out.insert(tuple.iter().map(|&p| p.clone()).collect());
        }
    })?;
    Ok(out)
}

/// `A(l, nu, 1) = (nu - 1)! B(l, nu)` for `nu = 1..=n`, from the flag route.
pub fn one_orbit_row(ell: u32, n: u32) -> Vec<ExactInt> {
    (1..=n as u64)
        .map(|nu| factorial(nu - 1) * b_via_flags(ell, nu).expect("valid arguments"))
        .collect()
}

/// Exponential formula over ordered compositions:
/// `A(l, n, k) = (n!/k!) sum_{nu_1 + ... + nu_k = n} prod_r A(l, nu_r, 1) / nu_r!`.
///
/// `one_orbit[nu - 1]` must hold `A(l, nu, 1)`.
pub fn bell_transform(ell: u32, n: u32, one_orbit: &[ExactInt]) -> Result<ATable, OracleError> {
    check_args(ell, n)?;
    let n_us = n as usize;
    if one_orbit.len() < n_us {
        return Err(OracleError::InvalidArgs(format!(
            "need A(l, nu, 1) for nu = 1..={n}, got {} values",
            one_orbit.len()
        )));
    }
    for (i, a) in one_orbit.iter().take(n_us).enumerate() {
        let rem = a % factorial(i as u64);
        if !rem.is_zero() {
            return Err(OracleError::NonIntegral {
                what: format!("A(l, {}, 1) / {}!", i + 1, i),
                value: int_to_rational(a).to_string(),
            });
        }
    }
    // weights[nu] = A(l, nu, 1) / nu!
    let mut weights = vec![ExactRational::zero(); n_us + 1];
    for nu in 1..=n_us {
        weights[nu] = int_to_rational(&one_orbit[nu - 1]) / int_to_rational(&factorial(nu as u64));
    }
    let n_fact = int_to_rational(&factorial(n as u64));
    let mut power = weights.clone();
    let mut table = ATable::zeroed(ell, n);
    for k in 1..=n_us {
        if k > 1 {
            let mut next = vec![ExactRational::zero(); n_us + 1];
            for (i, pi) in power.iter().enumerate().skip(k - 1) {
                if pi.is_zero() {
                    continue;
                }
                for (j, wj) in weights.iter().enumerate().skip(1).take(n_us - i) {
                    next[i + j] += pi * wj;
                }
            }
            power = next;
        }
        let value = &n_fact / int_to_rational(&factorial(k as u64)) * &power[n_us];
        let count = rational_to_int(&value).ok_or_else(|| OracleError::NonIntegral {
            what: format!("A({ell}, {n}, {k})"),
            value: value.to_string(),
        })?;
        table.counts.insert(k as u32, count);
    }
    Ok(table)
}

/// `B(l, n) = A(l, n, 1) / (n - 1)!` from brute-force enumeration.
pub fn b_from_bruteforce(ell: u32, n: u32, budget: &OracleBudget) -> Result<ExactInt, OracleError> {
    let table = enumerate_a(ell, n, budget)?;
    let a1 = table.count(1);
    let fact = factorial(n as u64 - 1);
    if !(&a1 % &fact).is_zero() {
        return Err(OracleError::NonIntegral {
            what: format!("A({ell}, {n}, 1) / ({n} - 1)!"),
            value: (int_to_rational(&a1) / int_to_rational(&fact)).to_string(),
        });
    }
    Ok(a1 / fact)
}
