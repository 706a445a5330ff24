//! Finite causal sets: the order, its links, and order-theoretic queries.
//!
//! Elements are always stored in a natural labelling, so `y ≺ x` implies
//! `y < x` as integers and every relation matrix is strictly lower triangular.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitmatrix::{BitMatrix, BitSet};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which coordinates the embedding stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordSystem {
    /// Null coordinates `u = t - x`, `v = t + x`.
    Uv,
    /// Inertial coordinates `(t, x)`.
    Tx,
}

/// Points of a causal set embedded in two-dimensional Minkowski space.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub system: CoordSystem,
    pub points: Vec<[f64; 2]>,
}

impl Embedding {
    /// Null coordinates of element `i`.
    pub fn uv(&self, i: usize) -> [f64; 2] {
        let [a, b] = self.points[i];
        match self.system {
            CoordSystem::Uv => [a, b],
            CoordSystem::Tx => [a - b, a + b],
        }
    }

    /// Inertial coordinates of element `i`.
    pub fn tx(&self, i: usize) -> [f64; 2] {
        let [a, b] = self.points[i];
        match self.system {
            CoordSystem::Tx => [a, b],
            CoordSystem::Uv => [0.5 * (a + b), 0.5 * (b - a)],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Past,
    Future,
}

/// Minimal number of links on a path; `Infinite` when no path exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rank {
    Finite(u32),
    Infinite,
}

/// All pairwise ranks. `get(x, y)` is the rank of `y` below `x`.
#[derive(Clone, Debug)]
pub struct RankMatrix {
    n: usize,
    data: Vec<u32>,
}

impl RankMatrix {
    const NONE: u32 = u32::MAX;

    pub fn get(&self, x: usize, y: usize) -> Rank {
        match self.data[x * self.n + y] {
            Self::NONE => Rank::Infinite,
            r => Rank::Finite(r),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// An `n`-layer past or future infinity together with its projection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Infinity {
    pub members: Vec<usize>,
    pub indicator: Vec<bool>,
}

impl Infinity {
    fn from_indicator(indicator: Vec<bool>) -> Self {
        let members = indicator.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        Infinity { members, indicator }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indicator[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Diagonal projection matrix onto the region.
    pub fn projection<R: Real + nalgebra::Scalar>(&self) -> DMatrix<R> {
        let n = self.indicator.len();
        DMatrix::from_fn(n, n, |i, j| if i == j && self.indicator[i] { R::one() } else { R::zero() })
    }
}

#[derive(Clone, Debug)]
pub struct CausalSet {
    n: usize,
    past: BitMatrix,
    future: BitMatrix,
    links: BitMatrix,
    links_below: Vec<Vec<usize>>,
    links_above: Vec<Vec<usize>>,
    original: Vec<usize>,
    embedding: Option<Embedding>,
    length_scale: Option<f64>,
}

impl PartialEq for CausalSet {
    fn eq(&self, other: &Self) -> bool {
        self.past == other.past
            && self.original == other.original
            && self.embedding == other.embedding
            && self.length_scale == other.length_scale
    }
}

impl CausalSet {
    /// Builds the order generated by `covers`, where `(a, b)` means `a ≺ b`.
    pub fn from_relations(n: usize, covers: &[(usize, usize)]) -> Result<Self> {
        for &(a, b) in covers {
            for i in [a, b] {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, size: n });
                }
            }
        }
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(a, b) in covers {
            if a == b {
                return Err(Error::Cycle { cycle: vec![a] });
            }
            preds[b].push(a);
            succs[a].push(b);
        }
        let topo = topological_order(n, &preds, &succs)?;
        let mut past = BitMatrix::new(n);
        for &x in &topo {
            let mut row = BitSet::new(n);
            for &y in &preds[x] {
                row.union_with(past.row(y));
                row.set(y);
            }
            *past.row_mut(x) = row;
        }
        Ok(Self::from_closed(past, None, None))
    }

    /// Builds a set from a relation that is already transitive and acyclic.
    /// `precedes(a, b)` answers `a ≺ b` in the input indexing.
    pub fn from_order_fn(
        n: usize,
        precedes: impl Fn(usize, usize) -> bool + Sync,
        embedding: Option<Embedding>,
        length_scale: Option<f64>,
    ) -> Self {
        use rayon::prelude::*;
        let rows: Vec<BitSet> = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut row = BitSet::new(n);
                for y in 0..n {
                    if y != x && precedes(y, x) {
                        row.set(y);
                    }
                }
                row
            })
            .collect();
        Self::from_closed(BitMatrix::from_rows(rows), embedding, length_scale)
    }

    /// Relabels a closed relation naturally and derives its links.
    fn from_closed(past: BitMatrix, embedding: Option<Embedding>, length_scale: Option<f64>) -> Self {
        let n = past.n();
        // A strict predecessor has a strictly smaller past, so sorting by past
        // size is a topological order.
        let mut topo: Vec<usize> = (0..n).collect();
        topo.sort_by_key(|&x| (past.row(x).count(), x));
        let mut height = vec![0usize; n];
        for &x in &topo {
            height[x] = past.row(x).iter().map(|y| height[y] + 1).max().unwrap_or(0);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&x| (height[x], x));
        let mut label = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            label[old] = new;
        }
        let mut relabelled = BitMatrix::new(n);
        for (new, &old) in order.iter().enumerate() {
            for y in past.row(old).iter() {
                relabelled.set(new, label[y]);
            }
        }
        let embedding = embedding.map(|e| Embedding {
            system: e.system,
            points: order.iter().map(|&old| e.points[old]).collect(),
        });
        Self::assemble(relabelled, order, embedding, length_scale)
    }

    fn assemble(past: BitMatrix, original: Vec<usize>, embedding: Option<Embedding>, length_scale: Option<f64>) -> Self {
        let n = past.n();
        let mut links = BitMatrix::new(n);
        for x in 0..n {
            let mut covered = BitSet::new(n);
            for y in past.row(x).iter().rev() {
                if !covered.get(y) {
                    links.set(x, y);
                    covered.union_with(past.row(y));
                }
            }
        }
        let future = past.transpose();
        let links_below = (0..n).map(|x| links.row(x).iter().collect()).collect();
        let lt = links.transpose();
        let links_above = (0..n).map(|x| lt.row(x).iter().collect()).collect();
        CausalSet { n, past, future, links, links_below, links_above, original, embedding, length_scale }
    }

    pub fn empty() -> Self {
        Self::assemble(BitMatrix::new(0), Vec::new(), None, None)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `C[x][y]`: true iff `y ≺ x`.
    pub fn c(&self, x: usize, y: usize) -> bool {
        self.past.get(x, y)
    }

    /// `L[x][y]`: true iff `y ≺* x`.
    pub fn l(&self, x: usize, y: usize) -> bool {
        self.links.get(x, y)
    }

    pub fn precedes(&self, y: usize, x: usize) -> bool {
        self.past.get(x, y)
    }

    pub fn causal_matrix(&self) -> &BitMatrix {
        &self.past
    }

    pub fn link_matrix(&self) -> &BitMatrix {
        &self.links
    }

    /// Strict past of `x` as a bit row.
    pub fn past_of(&self, x: usize) -> &BitSet {
        self.past.row(x)
    }

    /// Strict future of `x` as a bit row.
    pub fn future_of(&self, x: usize) -> &BitSet {
        self.future.row(x)
    }

    pub fn links_below(&self, x: usize) -> &[usize] {
        &self.links_below[x]
    }

    pub fn links_above(&self, x: usize) -> &[usize] {
        &self.links_above[x]
    }

    /// Index of each element in the input that built the set.
    pub fn original_indices(&self) -> &[usize] {
        &self.original
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    pub fn length_scale(&self) -> Option<f64> {
        self.length_scale
    }

    pub fn with_length_scale(mut self, ell: f64) -> Self {
        self.length_scale = Some(ell);
        self
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Result<Self> {
        if embedding.points.len() != self.n {
            return Err(Error::Dimension(format!("{} coordinates for {} elements", embedding.points.len(), self.n)));
        }
        self.embedding = Some(embedding);
        Ok(self)
    }

    /// Covering pairs `(a, b)` with `a ≺* b`, sorted.
    pub fn covers(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for x in 0..self.n {
            for &y in &self.links_below[x] {
                out.push((y, x));
            }
        }
        out.sort_unstable();
        out
    }

    /// `I(y, x) = {z : y ⪯ z ⪯ x}`.
    pub fn interval(&self, x: usize, y: usize) -> Vec<usize> {
        if x == y {
            return vec![x];
        }
        if !self.c(x, y) {
            return Vec::new();
        }
        let mut out = vec![y];
        out.extend(self.past.row(x).and(self.future.row(y)).iter());
        out.push(x);
        out
    }

    /// `|I(y, x)| - 1` for `y ≺ x`.
    pub fn proximity(&self, x: usize, y: usize) -> Result<usize> {
        if !self.c(x, y) {
            return Err(Error::NotRelated { x, y });
        }
        Ok(self.proximity_unchecked(x, y))
    }

    #[inline]
    fn proximity_unchecked(&self, x: usize, y: usize) -> usize {
        self.past.row(x).and_count(self.future.row(y)) + 1
    }

    /// Elements in the `i`-th layer below (past) or above (future) `x`.
    pub fn layers(&self, x: usize, i: usize, direction: Direction) -> Vec<usize> {
        match direction {
            Direction::Past => self.past.row(x).iter().filter(|&y| self.proximity_unchecked(x, y) == i).collect(),
            Direction::Future => self.future.row(x).iter().filter(|&y| self.proximity_unchecked(y, x) == i).collect(),
        }
    }

    /// Shortest link paths between all pairs.
    pub fn rank_matrix(&self) -> RankMatrix {
        let n = self.n;
        let mut data = vec![RankMatrix::NONE; n * n];
        let mut queue = VecDeque::new();
        for x in 0..n {
            let row = &mut data[x * n..(x + 1) * n];
            row[x] = 0;
            queue.push_back(x);
            while let Some(z) = queue.pop_front() {
                let d = row[z] + 1;
                for &w in &self.links_below[z] {
                    if row[w] == RankMatrix::NONE {
                        row[w] = d;
                        queue.push_back(w);
                    }
                }
            }
        }
        RankMatrix { n, data }
    }

    /// Elements of rank exactly two below `p`.
    pub fn rank_two_below(&self, p: usize) -> Vec<usize> {
        let mut set = BitSet::new(self.n);
        for &w in &self.links_below[p] {
            for &y in &self.links_below[w] {
                set.set(y);
            }
        }
        for &w in &self.links_below[p] {
            set.clear(w);
        }
        set.iter().collect()
    }

    /// The `n`-layer past or future infinity `C_n^∓`.
    pub fn infinity(&self, n: usize, direction: Direction) -> Infinity {
        let indicator = (0..self.n)
            .map(|x| match direction {
                Direction::Past => self.past.row(x).iter().all(|y| self.proximity_unchecked(x, y) < n),
                Direction::Future => self.future.row(x).iter().all(|y| self.proximity_unchecked(y, x) < n),
            })
            .collect();
        Infinity::from_indicator(indicator)
    }

    /// `C_2^-` computed without proximities: only links below.
    pub fn two_layer_past_infinity(&self) -> Infinity {
        let indicator = (0..self.n).map(|x| self.past.row(x).count() == self.links_below[x].len()).collect();
        Infinity::from_indicator(indicator)
    }

    /// The rank-based region `R_n^∓`: every related element has rank below `n`.
    pub fn rank_infinity(&self, ranks: &RankMatrix, n: usize, direction: Direction) -> Infinity {
        let n32 = n as u32;
        let below = |r: Rank| matches!(r, Rank::Finite(k) if k < n32);
        let indicator = (0..self.n)
            .map(|x| match direction {
                Direction::Past => self.past.row(x).iter().all(|y| below(ranks.get(x, y))),
                Direction::Future => self.future.row(x).iter().all(|y| below(ranks.get(y, x))),
            })
            .collect();
        Infinity::from_indicator(indicator)
    }

    /// True when every relation points from a lower to a higher label.
    pub fn is_naturally_labelled(&self) -> bool {
        (0..self.n).all(|x| self.past.row(x).iter().all(|y| y < x))
    }

    /// FNV-1a 64-bit hash of the row-major bits of `C`, as lowercase hex.
    pub fn c_checksum(&self) -> String {
        fnv1a_hex(&self.past.row_major_bytes())
    }
}

pub(crate) fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn topological_order(n: usize, preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Result<Vec<usize>> {
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&x| indeg[x] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(x) = queue.pop_front() {
        topo.push(x);
        for &s in &succs[x] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                queue.push_back(s);
            }
        }
    }
    if topo.len() == n {
        return Ok(topo);
    }
    // Every leftover vertex has a leftover predecessor; walking back must repeat.
    let start = (0..n).find(|&x| indeg[x] > 0).expect("leftover vertex");
    let mut seen = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut x = start;
    while seen[x] == usize::MAX {
        seen[x] = path.len();
        path.push(x);
        x = *preds[x].iter().find(|&&p| indeg[p] > 0).expect("leftover predecessor");
    }
    let mut cycle = path[seen[x]..].to_vec();
    cycle.reverse();
    Err(Error::Cycle { cycle })
}

/// How a preferred past is picked among the rank-2 predecessors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PastRule {
    /// Largest proximity, ties to the lowest label.
    MaxLayer,
    /// Uniform choice from a ChaCha8 stream with this seed.
    SeededRandom(u64),
}

/// A preferred 2-step past structure and its interval data.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferredPast {
    map: Vec<Option<usize>>,
    omega: Vec<Vec<usize>>,
    admissible: Vec<usize>,
}

impl PreferredPast {
    pub fn choose(cs: &CausalSet, rule: PastRule) -> Result<Self> {
        let n = cs.len();
        let boundary = cs.two_layer_past_infinity();
        let mut rng = match rule {
            PastRule::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            PastRule::MaxLayer => None,
        };
        let mut map = vec![None; n];
        let mut omega = vec![Vec::new(); n];
        let mut admissible = vec![0; n];
        for p in 0..n {
            if boundary.contains(p) {
                continue;
            }
            let candidates = cs.rank_two_below(p);
            if candidates.is_empty() {
                return Err(Error::NoRankTwoPredecessor(p));
            }
            let chosen = match rng.as_mut() {
                Some(rng) => {
                    admissible[p] = candidates.len();
                    candidates[rng.gen_range(0..candidates.len())]
                }
                None => {
                    let layer: Vec<usize> = candidates.iter().map(|&y| cs.proximity_unchecked(p, y)).collect();
                    let best = *layer.iter().max().unwrap();
                    admissible[p] = layer.iter().filter(|&&l| l == best).count();
                    candidates[layer.iter().position(|&l| l == best).unwrap()]
                }
            };
            map[p] = Some(chosen);
            omega[p] = cs.past_of(p).and(cs.future_of(chosen)).iter().collect();
        }
        Ok(PreferredPast { map, omega, admissible })
    }

    /// Builds a structure from an explicit map, checking that each image has rank 2.
    pub fn from_map(cs: &CausalSet, map: Vec<Option<usize>>) -> Result<Self> {
        let n = cs.len();
        if map.len() != n {
            return Err(Error::Dimension(format!("map of length {} for {} elements", map.len(), n)));
        }
        let boundary = cs.two_layer_past_infinity();
        let mut omega = vec![Vec::new(); n];
        let mut admissible = vec![0; n];
        for p in 0..n {
            match map[p] {
                Some(q) => {
                    if boundary.contains(p) || !cs.rank_two_below(p).contains(&q) {
                        return Err(Error::Precondition { what: "preferred past must have rank 2".into(), indices: vec![p, q] });
                    }
                    omega[p] = cs.past_of(p).and(cs.future_of(q)).iter().collect();
                    admissible[p] = 1;
                }
                None if !boundary.contains(p) => return Err(Error::NoRankTwoPredecessor(p)),
                None => {}
            }
        }
        Ok(PreferredPast { map, omega, admissible })
    }

    /// `Λ(p)`, defined exactly off `C_2^-`.
    pub fn get(&self, p: usize) -> Option<usize> {
        self.map[p]
    }

    pub fn map(&self) -> &[Option<usize>] {
        &self.map
    }

    /// Elements strictly between `Λ(p)` and `p`.
    pub fn omega_row(&self, p: usize) -> &[usize] {
        &self.omega[p]
    }

    /// Number of equally admissible choices the rule had at `p`.
    pub fn admissible_choices(&self, p: usize) -> usize {
        self.admissible[p]
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Diagonal entry of the mean weight matrix `M_W`.
    pub fn mean_weight<R: Real>(&self, p: usize) -> R {
        match self.map[p] {
            Some(_) => R::one() / R::of_usize(self.omega[p].len()),
            None => R::zero(),
        }
    }

    pub fn lambda_matrix<R: Real + nalgebra::Scalar>(&self) -> DMatrix<R> {
        let n = self.len();
        let mut m = DMatrix::from_element(n, n, R::zero());
        for (p, q) in self.map.iter().enumerate() {
            if let Some(q) = q {
                m[(p, *q)] = R::one();
            }
        }
        m
    }

    pub fn omega_matrix<R: Real + nalgebra::Scalar>(&self) -> DMatrix<R> {
        let n = self.len();
        let mut m = DMatrix::from_element(n, n, R::zero());
        for p in 0..n {
            for &q in &self.omega[p] {
                m[(p, q)] = R::one();
            }
        }
        m
    }
}
