//! Twisted discrete tori realizing transitive commuting tuples.
//!
//! Vertices are coordinate vectors `(i_1, ..., i_l)` with `1 <= i_r <= f_r`,
//! numbered `1..=n` in mixed radix with `i_1` varying fastest. Direction `r`
//! steps `i_r` up by one; from the face `i_r = f_r` it wraps to `i_r = 1`
//! after moving the first `r - 1` coordinates by the twist of direction `r`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arith::divisors;
use crate::perm_oracle::{transitive_tuples, OracleBudget, OracleError, PermTuple, Permutation};

#[derive(Debug, Error)]
pub enum ToriError {
    #[error("malformed torus spec: {0}")]
    Malformed(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Dimensions `f_1..f_l` and, for each direction `r >= 2`, a twist vector in
/// `[f_1] x ... x [f_{r-1}]` (`twists[r - 2]`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TorusSpec {
    pub dims: Vec<u32>,
    pub twists: Vec<Vec<u32>>,
}

impl TorusSpec {
    pub fn new(dims: Vec<u32>, twists: Vec<Vec<u32>>) -> Result<Self, ToriError> {
        let spec = TorusSpec { dims, twists };
        spec.check()?;
        Ok(spec)
    }

    /// All twists set to `(1, ..., 1)`.
    pub fn untwisted(dims: Vec<u32>) -> Result<Self, ToriError> {
        let twists = (1..dims.len()).map(|r| vec![1; r]).collect();
        TorusSpec::new(dims, twists)
    }

    pub fn ell(&self) -> u32 {
        self.dims.len() as u32
    }

    pub fn n(&self) -> u64 {
        self.dims.iter().map(|&f| f as u64).product()
    }

    fn check(&self) -> Result<(), ToriError> {
        let bad = |m: String| Err(ToriError::Malformed(m));
        if self.dims.is_empty() {
            return bad("at least one dimension is required".into());
        }
        if self.dims.contains(&0) {
            return bad("dimensions must be positive".into());
        }
        if self.twists.len() + 1 != self.dims.len() {
            return bad(format!(
                "{} dimensions need {} twist vectors, got {}",
                self.dims.len(),
                self.dims.len() - 1,
                self.twists.len()
            ));
        }
        for (k, phi) in self.twists.iter().enumerate() {
            let r = k + 2;
            if phi.len() != r - 1 {
                return bad(format!(
                    "twist for direction {r} must have length {}",
                    r - 1
                ));
            }
            for (s, &v) in phi.iter().enumerate() {
                if v < 1 || v > self.dims[s] {
                    return bad(format!(
                        "twist component {} of direction {r} is {v}, outside 1..={}",
                        s + 1,
                        self.dims[s]
                    ));
                }
            }
        }
        if self.n() > u32::MAX as u64 {
            return bad("torus too large".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TorusEdge {
    /// Vertex numbers in `1..=n`.
    pub from: u32,
    pub to: u32,
    /// 1-based direction.
    pub direction: u32,
    pub wrap: bool,
}

#[derive(Debug, Clone)]
pub struct TorusRealization {
    pub spec: TorusSpec,
    pub perms: PermTuple,
    /// One edge per vertex and direction, from `v` to `pi_r(v)`.
    pub edges: Vec<TorusEdge>,
}

impl TorusRealization {
    pub fn n(&self) -> usize {
        self.perms.n()
    }

    /// 1-based coordinates of vertex `v`.
    pub fn coords(&self, v: u32) -> Vec<u32> {
        let mut rest = v - 1;
        self.spec
            .dims
            .iter()
            .map(|&f| {
                let c = rest % f + 1;
                rest /= f;
                c
            })
            .collect()
    }

    pub fn vertex(&self, coords: &[u32]) -> u32 {
        coords
            .iter()
            .zip(&self.spec.dims)
            .rev()
            .fold(0, |acc, (&c, &f)| acc * f + (c - 1))
            + 1
    }

    /// Reroutes one wrap edge `u -> t` in the highest direction where it
    /// moves to `sigma(t)` and makes `t` a fixed point. A non-identity
    /// generator with a fixed point cannot act regularly, so the result always
    /// fails [`validate`]. Returns false when every wrap edge is a loop.
    pub fn corrupt_wrap(&mut self) -> bool {
        let n = self.n();
        let mut perms = self.perms.perms().to_vec();
        for r in (0..perms.len()).rev() {
            let dir = r as u32 + 1;
            let Some(a) = self
                .edges
                .iter()
                .position(|e| e.wrap && e.direction == dir && e.from != e.to)
            else {
                continue;
            };
            let t = self.edges[a].to;
            let b = self
                .edges
                .iter()
                .position(|e| e.direction == dir && e.from == t)
                .expect("one edge per vertex and direction");
            let s = self.edges[b].to;
            self.edges[a].to = s;
            self.edges[b].to = t;
            let mut image = perms[r].images().to_vec();
            image[self.edges[a].from as usize - 1] = s;
            image[t as usize - 1] = t;
            perms[r] = Permutation::from_images(image).expect("still a bijection");
            self.perms = PermTuple::new(n, perms).expect("sizes unchanged");
            return true;
        }
        false
    }
}

// rho_s as a table on prefix indices 0..f_1 ... f_s, zero-based.
fn rho_tables(spec: &TorusSpec) -> Vec<Vec<u32>> {
    let mut tables: Vec<Vec<u32>> = Vec::with_capacity(spec.dims.len());
    let mut sizes = vec![1u32];
    for (r, &f) in spec.dims.iter().enumerate() {
        let below = sizes[r];
        let wrap = |mut x: u32| {
            if r > 0 {
                for (s, &phi) in spec.twists[r - 1].iter().enumerate() {
                    let (lo, hi) = (x % sizes[s + 1], x / sizes[s + 1]);
                    let mut lo = lo;
                    for _ in 1..phi {
                        lo = tables[s][lo as usize];
                    }
                    x = lo + sizes[s + 1] * hi;
                }
            }
            x
        };
        let table = (0..below * f)
            .map(|idx| {
                let (lo, step) = (idx % below, idx / below);
                if step + 1 < f {
                    lo + below * (step + 1)
                } else {
                    wrap(lo)
                }
            })
            .collect();
        tables.push(table);
        sizes.push(below * f);
    }
    tables
}

pub fn build_torus(spec: &TorusSpec) -> Result<TorusRealization, ToriError> {
    spec.check()?;
    let n = spec.n() as u32;
    let tables = rho_tables(spec);
    let mut prefix = 1u32;
    let mut perms = Vec::with_capacity(spec.dims.len());
    let mut edges = Vec::with_capacity(spec.dims.len() * n as usize);
    for (r, (&f, table)) in spec.dims.iter().zip(&tables).enumerate() {
        let size = prefix * f;
        let image: Vec<u32> = (0..n)
            .map(|v| table[(v % size) as usize] + size * (v / size) + 1)
            .collect();
        for v in 0..n {
            edges.push(TorusEdge {
                from: v + 1,
                to: image[v as usize],
                direction: r as u32 + 1,
                wrap: (v % size) / prefix == f - 1,
            });
        }
        perms.push(Permutation::from_images(image)?);
        prefix = size;
    }
    Ok(TorusRealization {
        spec: spec.clone(),
        perms: PermTuple::new(n as usize, perms)?,
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub commutes: bool,
    pub transitive: bool,
    pub group_order_n: bool,
    pub basepoint_bijective: bool,
}

impl Validation {
    pub fn all(&self) -> bool {
        self.commutes && self.transitive && self.group_order_n && self.basepoint_bijective
    }
}

// Size of the generated group, stopping once it exceeds `cap`.
fn group_order(gens: &[Permutation], n: usize, cap: usize) -> usize {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    let id = Permutation::identity(n);
    seen.insert(id.clone());
    queue.push_back(id);
    while let Some(g) = queue.pop_front() {
        for s in gens {
            let h = s.compose(&g);
            if seen.insert(h.clone()) {
                if seen.len() > cap {
                    return seen.len();
                }
                queue.push_back(h);
            }
        }
    }
    seen.len()
}

pub fn validate(real: &TorusRealization) -> Validation {
    let n = real.n();
    let perms = real.perms.perms();
    // pi_1^{phi_1 - 1} ... pi_l^{phi_l - 1} applied to vertex (1, ..., 1) = 1
    let mut hits = vec![false; n];
    let mut reached = 0usize;
    let mut phi = vec![1u32; perms.len()];
    'outer: loop {
        let mut v = 1u32;
        for (p, &e) in perms.iter().zip(&phi).rev() {
            for _ in 1..e {
                v = p.apply(v);
            }
        }
        if !std::mem::replace(&mut hits[v as usize - 1], true) {
            reached += 1;
        }
        for (k, c) in phi.iter_mut().enumerate() {
            if *c < real.spec.dims[k] {
                *c += 1;
                continue 'outer;
            }
            *c = 1;
        }
        break;
    }
    Validation {
        commutes: real.perms.pairwise_commuting(),
        transitive: real.perms.orbit_count() == 1,
        group_order_n: group_order(perms, n, n) == n,
        basepoint_bijective: reached == n,
    }
}

/// Every spec with `f_1 ... f_l = n`, in lexicographic order.
pub fn enumerate_specs(ell: u32, n: u64) -> Result<Vec<TorusSpec>, ToriError> {
    if ell < 1 || n < 1 {
        return Err(ToriError::Malformed("need l >= 1 and n >= 1".into()));
    }
    let mut dim_choices = Vec::new();
    factorizations(n, ell as usize, &mut Vec::new(), &mut dim_choices);
    let mut out = Vec::new();
    for dims in dim_choices {
        let mut twists: Vec<Vec<u32>> = (1..dims.len()).map(|r| vec![1; r]).collect();
        loop {
            out.push(TorusSpec {
                dims: dims.clone(),
                twists: twists.clone(),
            });
            if !advance(&mut twists, &dims) {
                break;
            }
        }
    }
    Ok(out)
}

fn factorizations(n: u64, slots: usize, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if slots == 1 {
        acc.push(n as u32);
        out.push(acc.clone());
        acc.pop();
        return;
    }
    for d in divisors(n).expect("n >= 1") {
        acc.push(d as u32);
        factorizations(n / d, slots - 1, acc, out);
        acc.pop();
    }
}

// Odometer over all twist vectors; false once every combination is used.
fn advance(twists: &mut [Vec<u32>], dims: &[u32]) -> bool {
    for phi in twists.iter_mut().rev() {
        for (s, c) in phi.iter_mut().enumerate().rev() {
            if *c < dims[s] {
                *c += 1;
                return true;
            }
            *c = 1;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DoubleCount {
    pub ell: u32,
    pub n: u32,
    /// Number of specs, which equals `B(l, n)`.
    pub specs: u64,
    /// Distinct relabeled tuples.
    pub count: u64,
    /// Size of the brute-force set of transitive tuples.
    pub brute_force: u64,
    /// How many (spec, relabeling) pairs give each tuple, if uniform.
    pub multiplicity: Option<u64>,
    #[serde(rename = "match")]
    pub matches: bool,
    /// Whether every realization passed [`validate`].
    pub all_valid: bool,
}

/// Nominal-work budget for [`double_count_check`]: `n!^l <= 10^6`.
pub fn default_double_count_budget() -> OracleBudget {
    OracleBudget {
        max_work: 1_000_000,
    }
}

/// Relabels every realization by all of `S_n` and compares the resulting set
/// with the brute-force transitive tuples.
pub fn double_count_check(
    ell: u32,
    n: u32,
    budget: &OracleBudget,
) -> Result<DoubleCount, ToriError> {
    budget.check(ell, n)?;
    let specs = enumerate_specs(ell, n as u64)?;
    let sigmas = Permutation::all(n as usize);
    let mut all_valid = true;
    let mut tallies: BTreeMap<Vec<Permutation>, u64> = BTreeMap::new();
    for spec in &specs {
        let real = build_torus(spec)?;
        all_valid &= validate(&real).all();
        let relabeled: Vec<Vec<Permutation>> = sigmas
            .par_iter()
            .map(|s| real.perms.conjugate_by(s).into_perms())
            .collect();
        for t in relabeled {
            *tallies.entry(t).or_insert(0) += 1;
        }
    }
    let brute = transitive_tuples(ell, n, budget)?;
    let matches = tallies.len() == brute.len() && tallies.keys().eq(brute.iter());
    let first = tallies.values().next().copied();
    let multiplicity = first.filter(|&m| tallies.values().all(|&c| c == m));
    Ok(DoubleCount {
        ell,
        n,
        specs: specs.len() as u64,
        count: tallies.len() as u64,
        brute_force: brute.len() as u64,
        multiplicity,
        matches,
        all_valid,
    })
}

/// Graphviz rendering. Parallel edges of one direction between the same pair
/// are merged with a `mult` attribute; edges involving a wrap are dashed.
pub fn to_dot(real: &TorusRealization) -> String {
    let mut out = String::from("graph torus {\n");
    let dims: Vec<String> = real.spec.dims.iter().map(u32::to_string).collect();
    writeln!(out, "  label=\"dims {}\";", dims.join("x")).unwrap();
    for v in 1..=real.n() as u32 {
        let c: Vec<String> = real.coords(v).iter().map(u32::to_string).collect();
        writeln!(out, "  {v} [label=\"({})\"];", c.join(",")).unwrap();
    }
    let mut merged: BTreeMap<(u32, u32, u32), (u32, bool)> = BTreeMap::new();
    for e in &real.edges {
        let (a, b) = (e.from.min(e.to), e.from.max(e.to));
        let slot = merged.entry((a, b, e.direction)).or_insert((0, false));
        slot.0 += 1;
        slot.1 |= e.wrap;
    }
    for ((a, b, dir), (mult, wrap)) in merged {
        let mut attrs = vec![format!("direction={dir}")];
        if mult > 1 {
            attrs.push(format!("mult={mult}"));
        }
        if wrap {
            attrs.push("style=dashed".into());
        }
        writeln!(out, "  {a} -- {b} [{}];", attrs.join(", ")).unwrap();
    }
    out.push_str("}\n");
    out
}

pub fn export_dot(real: &TorusRealization, path: &Path) -> Result<(), ToriError> {
    std::fs::write(path, to_dot(real)).map_err(|source| ToriError::Io {
        path: path.display().to_string(),
        source,
    })
}
