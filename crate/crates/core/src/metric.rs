//! The word metric on G_A: breadth-first ball enumeration, exact word
//! lengths inside the explored radius, set diameters and N-neighbourhoods.
//!
//! The generating set is `{±e_1, …, ±e_d, z, z^{-1}}`, i.e. every lattice
//! vector of Euclidean norm one plus `z^{±1}`.

use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};
use crate::group::{GroupContext, GroupElement};

/// Default cap on the number of table entries a BFS may hold.
pub const DEFAULT_ELEMENT_BUDGET: usize = 50_000_000;

/// One generator of G_A.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `sign · e_axis` in H.
    Lattice { axis: usize, sign: i8 },
    /// `z^sign`.
    Z { sign: i8 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratingSet {
    dim: usize,
    generators: Vec<Generator>,
}

impl GeneratingSet {
    /// All norm-one lattice vectors together with `z` and `z^{-1}`.
    pub fn standard(dim: usize) -> Self {
        let mut generators = Vec::with_capacity(2 * dim + 2);
        for axis in 0..dim {
            generators.push(Generator::Lattice { axis, sign: 1 });
            generators.push(Generator::Lattice { axis, sign: -1 });
        }
        generators.push(Generator::Z { sign: 1 });
        generators.push(Generator::Z { sign: -1 });
        Self { dim, generators }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn h_generators(&self) -> Vec<Vec<i64>> {
        self.generators
            .iter()
            .filter_map(|g| match g {
                Generator::Lattice { axis, sign } => {
                    let mut v = vec![0; self.dim];
                    v[*axis] = i64::from(*sign);
                    Some(v)
                }
                Generator::Z { .. } => None,
            })
            .collect()
    }

    pub fn as_elements(&self) -> Vec<GroupElement> {
        self.generators.iter().map(|g| self.element(g)).collect()
    }

    pub fn element(&self, g: &Generator) -> GroupElement {
        match g {
            Generator::Lattice { axis, sign } => {
                let mut x = vec![BigInt::zero(); self.dim];
                x[*axis] = BigInt::from(*sign);
                GroupElement::new(x, 0)
            }
            Generator::Z { sign } => GroupElement::z_power(self.dim, i64::from(*sign)),
        }
    }

    /// `g · s` for a generator `s`, using `(x·z^k)·e = (x + A^k e)·z^k`.
    pub fn right_multiply(&self, ctx: &GroupContext, g: &GroupElement, s: &Generator) -> GroupElement {
        match s {
            Generator::Lattice { axis, sign } => {
                let mut x = g.x.clone();
                if g.k == 0 {
                    x[*axis] += BigInt::from(*sign);
                } else {
                    let power = ctx.matrix_power(g.k);
                    for (i, xi) in x.iter_mut().enumerate() {
                        if *sign > 0 {
                            *xi += power.get(i, *axis);
                        } else {
                            *xi -= power.get(i, *axis);
                        }
                    }
                }
                GroupElement::new(x, g.k)
            }
            Generator::Z { sign } => GroupElement::new(g.x.clone(), g.k + i64::from(*sign)),
        }
    }
}

/// Compact key for elements whose coordinates fit in i64: `x_1..x_d, k`.
pub(crate) type PackedKey = SmallVec<[i64; 4]>;

pub(crate) fn pack(g: &GroupElement) -> Option<PackedKey> {
    let mut key = PackedKey::with_capacity(g.dim() + 1);
    for c in &g.x {
        key.push(c.to_i64()?);
    }
    key.push(g.k);
    Some(key)
}

pub(crate) fn unpack(key: &[i64]) -> GroupElement {
    let (x, k) = key.split_at(key.len() - 1);
    GroupElement::from_i64(x, k[0])
}

/// i64 copies of `A^j` for a window of exponents, with checked arithmetic.
pub(crate) struct CompactPowers {
    dim: usize,
    min_exp: i64,
    mats: Vec<Vec<i64>>,
}

impl CompactPowers {
    pub(crate) fn new(ctx: &GroupContext, min_exp: i64, max_exp: i64) -> Option<Self> {
        let mats = (min_exp..=max_exp).map(|j| ctx.matrix_power(j).to_i64()).collect::<Option<Vec<_>>>()?;
        Some(Self { dim: ctx.dim(), min_exp, mats })
    }

    fn get(&self, j: i64) -> Option<&[i64]> {
        let idx = usize::try_from(j - self.min_exp).ok()?;
        self.mats.get(idx).map(Vec::as_slice)
    }

    /// `A^j y`, or `None` on overflow / exponent outside the window.
    fn apply(&self, j: i64, y: &[i64]) -> Option<SmallVec<[i64; 4]>> {
        let m = self.get(j)?;
        let d = self.dim;
        let mut out = SmallVec::with_capacity(d);
        for i in 0..d {
            let mut acc: i128 = 0;
            for l in 0..d {
                acc += i128::from(m[i * d + l]) * i128::from(y[l]);
            }
            out.push(i64::try_from(acc).ok()?);
        }
        Some(out)
    }
}

fn packed_neighbors(key: &PackedKey, powers: &CompactPowers, gens: &GeneratingSet) -> Option<Vec<PackedKey>> {
    let d = gens.dim();
    let k = key[d];
    let mut out = Vec::with_capacity(gens.len());
    for g in gens.generators() {
        let mut n = key.clone();
        match g {
            Generator::Lattice { axis, sign } => {
                let m = powers.get(k)?;
                for i in 0..d {
                    let delta = m[i * d + axis].checked_mul(i64::from(*sign))?;
                    n[i] = n[i].checked_add(delta)?;
                }
            }
            Generator::Z { sign } => n[d] = k.checked_add(i64::from(*sign))?,
        }
        out.push(n);
    }
    Some(out)
}

/// Result of a word-length query against a finite oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WordLength {
    Exact(u32),
    /// Length is certified to exceed the explored radius.
    ExceedsRadius(u32),
}

impl WordLength {
    pub fn exact(self) -> Option<u32> {
        match self {
            WordLength::Exact(n) => Some(n),
            WordLength::ExceedsRadius(_) => None,
        }
    }
}

/// Diameter of a finite set, exact or certified lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Diameter {
    Exact(u64),
    AtLeast(u64),
}

impl Diameter {
    pub fn value(self) -> u64 {
        match self {
            Diameter::Exact(v) | Diameter::AtLeast(v) => v,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Diameter::Exact(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CensusRow {
    pub radius: u32,
    pub ball_size: usize,
    pub sphere_size: usize,
}

/// Exact word lengths for every element of length at most `radius`.
#[derive(Clone, Debug)]
pub struct WordLengthOracle {
    dim: usize,
    radius: u32,
    table: FxHashMap<PackedKey, u32>,
    sphere_sizes: Vec<usize>,
}

/// Breadth-first enumeration of the ball of radius `radius` about the identity.
///
/// Each frontier is expanded in parallel; candidates are sorted and
/// deduplicated before insertion, so the table does not depend on the
/// thread schedule.
pub fn word_ball(ctx: &GroupContext, gens: &GeneratingSet, radius: u32, budget: usize) -> Result<WordLengthOracle> {
    if gens.dim() != ctx.dim() {
        return invalid("generating set and group dimensions differ");
    }
    let r = i64::from(radius);
    let powers = CompactPowers::new(ctx, -r - 1, r + 1)
        .ok_or_else(|| Error::InvalidArgument(format!("radius {radius} too large for 64-bit tables")))?;
    let origin = pack(&ctx.identity()).expect("identity packs");
    let mut table = FxHashMap::default();
    table.insert(origin.clone(), 0u32);
    let mut sphere_sizes = vec![1usize];
    let mut frontier = vec![origin];
    for level in 1..=radius {
        let expanded: Option<Vec<Vec<PackedKey>>> = frontier
            .par_iter()
            .map(|key| {
                packed_neighbors(key, &powers, gens)
                    .map(|ns| ns.into_iter().filter(|n| !table.contains_key(n)).collect())
            })
            .collect();
        let mut next: Vec<PackedKey> = expanded
            .ok_or_else(|| Error::InvalidArgument("64-bit overflow during ball enumeration".into()))?
            .into_iter()
            .flatten()
            .collect();
        next.par_sort_unstable();
        next.dedup();
        if table.len() + next.len() > budget {
            return Err(Error::BudgetExceeded {
                limit: budget,
                during: format!("enumerating the word ball at radius {level}"),
                completed: Some(level - 1),
            });
        }
        table.reserve(next.len());
        for key in &next {
            table.insert(key.clone(), level);
        }
        sphere_sizes.push(next.len());
        frontier = next;
    }
    Ok(WordLengthOracle { dim: ctx.dim(), radius, table, sphere_sizes })
}

impl WordLengthOracle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn word_length(&self, g: &GroupElement) -> WordLength {
        match pack(g).and_then(|key| self.table.get(&key).copied()) {
            Some(n) => WordLength::Exact(n),
            None => WordLength::ExceedsRadius(self.radius),
        }
    }

    pub(crate) fn lookup_packed(&self, key: &[i64]) -> Option<u32> {
        self.table.get(key).copied()
    }

    pub fn ball_size(&self, r: u32) -> usize {
        self.sphere_sizes.iter().take(r as usize + 1).sum()
    }

    pub fn census(&self) -> Vec<CensusRow> {
        let mut total = 0;
        self.sphere_sizes
            .iter()
            .enumerate()
            .map(|(r, &s)| {
                total += s;
                CensusRow { radius: r as u32, ball_size: total, sphere_size: s }
            })
            .collect()
    }

    /// All table entries with their lengths, in canonical (sorted) order.
    pub fn entries(&self) -> Vec<(GroupElement, u32)> {
        let mut keys: Vec<(&PackedKey, &u32)> = self.table.iter().collect();
        keys.sort_unstable();
        keys.into_iter().map(|(k, &n)| (unpack(k), n)).collect()
    }

    /// Elements of word length at most `r`, sorted.
    pub fn ball(&self, r: u32) -> ElementSet {
        self.table.iter().filter(|(_, &n)| n <= r).map(|(k, _)| unpack(k)).collect()
    }

    /// Writes a versioned text snapshot: a header followed by one
    /// `x_1 … x_d k length` line per entry in sorted order.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "unstretch-oracle v1")?;
        writeln!(out, "dim {}", self.dim)?;
        writeln!(out, "radius {}", self.radius)?;
        writeln!(out, "entries {}", self.table.len())?;
        let mut keys: Vec<(&PackedKey, &u32)> = self.table.iter().collect();
        keys.sort_unstable();
        for (key, n) in keys {
            for c in key.iter() {
                write!(out, "{c} ")?;
            }
            writeln!(out, "{n}")?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(input: R) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("oracle snapshot: {msg}"));
        let mut lines = input.lines();
        let mut next_line = || -> Result<String> {
            lines.next().ok_or_else(|| bad("unexpected end of file"))?.map_err(|e| bad(&e.to_string()))
        };
        if next_line()?.trim() != "unstretch-oracle v1" {
            return Err(bad("unsupported header"));
        }
        let mut field = |name: &str| -> Result<usize> {
            let line = next_line()?;
            let rest = line.strip_prefix(name).ok_or_else(|| bad(&format!("missing `{name}`")))?;
            rest.trim().parse().map_err(|_| bad(&format!("bad `{name}` value")))
        };
        let dim = field("dim")?;
        let radius = field("radius")? as u32;
        let count = field("entries")?;
        let mut table = FxHashMap::default();
        let mut sphere_sizes = vec![0usize; radius as usize + 1];
        for _ in 0..count {
            let line = next_line()?;
            let nums: Vec<i64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("non-integer entry")))
                .collect::<Result<_>>()?;
            if nums.len() != dim + 2 {
                return Err(bad("wrong number of fields"));
            }
            let n = u32::try_from(nums[dim + 1]).map_err(|_| bad("negative length"))?;
            if n > radius {
                return Err(bad("length exceeds radius"));
            }
            sphere_sizes[n as usize] += 1;
            table.insert(PackedKey::from_slice(&nums[..=dim]), n);
        }
        Ok(Self { dim, radius, table, sphere_sizes })
    }
}

/// A finite set of group elements, deduplicated on normal form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ElementSet {
    elements: FxHashSet<GroupElement>,
}

impl ElementSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn insert(&mut self, g: GroupElement) -> bool {
        self.elements.insert(g)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.elements.contains(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroupElement> {
        self.elements.iter()
    }

    pub fn sorted(&self) -> Vec<GroupElement> {
        let mut v: Vec<GroupElement> = self.elements.iter().cloned().collect();
        v.sort_unstable();
        v
    }

    pub fn is_subset(&self, other: &ElementSet) -> bool {
        self.elements.is_subset(&other.elements)
    }
}

impl FromIterator<GroupElement> for ElementSet {
    fn from_iter<I: IntoIterator<Item = GroupElement>>(iter: I) -> Self {
        Self { elements: iter.into_iter().collect() }
    }
}

impl IntoIterator for ElementSet {
    type Item = GroupElement;
    type IntoIter = std::collections::hash_set::IntoIter<GroupElement>;

    fn into_iter(self) -> Self::IntoIter {
        self.elements.into_iter()
    }
}

/// `U_N(S) = S·B_N`, computed as `N` rounds of right multiplication by the
/// generators. Only the newest layer is expanded each round, which is
/// enough because `U_{n+1}(S) = U_1(U_n(S))`.
pub fn neighborhood(
    ctx: &GroupContext,
    gens: &GeneratingSet,
    set: &ElementSet,
    n: u32,
    budget: usize,
) -> Result<ElementSet> {
    let mut result = set.clone();
    let mut frontier = set.sorted();
    for round in 1..=n {
        let mut next: Vec<GroupElement> = frontier
            .par_iter()
            .flat_map_iter(|g| {
                gens.generators()
                    .iter()
                    .map(|s| gens.right_multiply(ctx, g, s))
                    .filter(|h| !result.contains(h))
                    .collect::<Vec<_>>()
            })
            .collect();
        next.par_sort_unstable();
        next.dedup();
        if result.len() + next.len() > budget {
            return Err(Error::BudgetExceeded {
                limit: budget,
                during: format!("expanding neighbourhood round {round}"),
                completed: Some(round - 1),
            });
        }
        for g in &next {
            result.insert(g.clone());
        }
        frontier = next;
    }
    Ok(result)
}

/// Word-metric diameter of a finite set, `max |g^{-1} h|` over pairs.
///
/// Returns `AtLeast(R + 1)` as soon as one pair is certified to lie
/// farther apart than the oracle radius `R`.
pub fn set_diameter(ctx: &GroupContext, oracle: &WordLengthOracle, set: &ElementSet) -> Result<Diameter> {
    if set.is_empty() {
        return invalid("diameter of an empty set");
    }
    let beyond = Diameter::AtLeast(u64::from(oracle.radius()) + 1);
    // A set of diameter ≤ R sits inside a translate of the R-ball.
    if set.len() > oracle.len() {
        return Ok(beyond);
    }
    let elements = set.sorted();
    match diameter_packed(ctx, oracle, &elements) {
        Some(d) => Ok(d),
        None => diameter_exact(ctx, oracle, &elements),
    }
}

fn diameter_packed(ctx: &GroupContext, oracle: &WordLengthOracle, elements: &[GroupElement]) -> Option<Diameter> {
    let packed: Vec<PackedKey> = elements.iter().map(pack).collect::<Option<_>>()?;
    let d = ctx.dim();
    let kmin = packed.iter().map(|p| p[d]).min()?;
    let kmax = packed.iter().map(|p| p[d]).max()?;
    let powers = CompactPowers::new(ctx, -kmax, -kmin)?;
    let beyond = Some(Diameter::AtLeast(u64::from(oracle.radius()) + 1));
    // |g^{-1} h| looked up in the oracle; None once it leaves the explored ball.
    let dist = |g: &PackedKey, h: &PackedKey| -> Option<u32> {
        let diff: SmallVec<[i64; 4]> = (0..d).map(|c| h[c].checked_sub(g[c])).collect::<Option<_>>()?;
        let mut key = powers.apply(-g[d], &diff)?;
        key.push(h[d] - g[d]);
        oracle.lookup_packed(&key)
    };

    // Distances from a fixed member bound every pair: |g^{-1}h| ≤ r_g + r_h.
    let center = &packed[0];
    let mut by_radius: Vec<(u32, usize)> = Vec::with_capacity(packed.len());
    for (i, g) in packed.iter().enumerate() {
        match dist(center, g) {
            Some(r) => by_radius.push((r, i)),
            None => return beyond,
        }
    }
    by_radius.sort_unstable_by(|a, b| b.cmp(a));
    let r_max = by_radius[0].0;
    let best = AtomicU32::new(r_max);
    let escaped = AtomicBool::new(false);
    by_radius.par_iter().enumerate().for_each(|(pos, &(r_g, gi))| {
        if r_g + r_max <= best.load(Ordering::Relaxed) {
            return;
        }
        let g = &packed[gi];
        for &(r_h, hi) in &by_radius[..pos] {
            if escaped.load(Ordering::Relaxed) || r_g + r_h <= best.load(Ordering::Relaxed) {
                return;
            }
            match dist(g, &packed[hi]) {
                Some(n) => {
                    best.fetch_max(n, Ordering::Relaxed);
                }
                None => {
                    escaped.store(true, Ordering::Relaxed);
                    return;
                }
            }
        }
    });
    if escaped.load(Ordering::Relaxed) {
        beyond
    } else {
        Some(Diameter::Exact(u64::from(best.into_inner())))
    }
}

fn diameter_exact(ctx: &GroupContext, oracle: &WordLengthOracle, elements: &[GroupElement]) -> Result<Diameter> {
    let mut best = 0u32;
    for (i, g) in elements.iter().enumerate() {
        let gi = ctx.inverse(g)?;
        for h in &elements[i + 1..] {
            match oracle.word_length(&ctx.multiply(&gi, h)?) {
                WordLength::Exact(n) => best = best.max(n),
                WordLength::ExceedsRadius(r) => return Ok(Diameter::AtLeast(u64::from(r) + 1)),
            }
        }
    }
    Ok(Diameter::Exact(u64::from(best)))
}
