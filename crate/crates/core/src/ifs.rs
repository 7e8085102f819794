//! Non-autonomous grid iterated function systems on the unit `d`-cube.
//!
//! A system subdivides `[0,1]^d` into `n_1 × … × n_d` congruent boxes and
//! keeps a non-empty subset of them at every level. Levels are stored up to a
//! finite horizon; a [`Tail`] policy defines the rest of the infinite
//! sequence. All cell geometry is carried on integer lattices (axis `k` at
//! depth `m` uses the scale `n_k^m`), so intersection and containment tests
//! are exact.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Flattened index of a digit tuple inside `I = ∏_k {0..n_k-1}`.
pub type DigitId = u16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IfsError {
    #[error("dimension must be positive")]
    EmptyDimension,
    #[error("dimension {got} exceeds the supported maximum of 8")]
    DimensionTooLarge { got: usize },
    #[error("subdivision count on axis {axis} must be at least 2, got {got}")]
    SubdivisionTooSmall { axis: usize, got: u32 },
    #[error("the index set I = ∏ n_k is too large")]
    IndexSetTooLarge,
    #[error("no levels stored")]
    NoLevels,
    #[error("level {level} has an empty index set")]
    EmptyLevel { level: usize },
    #[error("digit {digit:?} at level {level} is out of range")]
    DigitOutOfRange { level: usize, digit: Vec<u32> },
    #[error("tail period {period} must lie in 1..={horizon}")]
    InvalidPeriod { period: usize, horizon: usize },
    #[error("word uses level {level} beyond the horizon {horizon} of a truncated system")]
    BeyondHorizon { level: usize, horizon: usize },
    #[error("digit at level {level} is not in that level's index set")]
    DigitNotInLevel { level: usize },
    #[error("removal count r={r} out of range 1..={max}")]
    RemovalOutOfRange { r: usize, max: usize },
    #[error("lattice coordinates overflow at depth {depth}")]
    DepthOverflow { depth: usize },
    #[error("start level must be at least 1")]
    LevelZero,
}

/// Policy for levels beyond the stored horizon `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// `I^(t) = I` for every `t > H`.
    Full,
    /// Levels repeat with this period: the last `p` stored levels cycle
    /// forever. The period must satisfy `1 <= p <= H`.
    Periodic(usize),
    /// Nothing is known beyond the horizon; `J_{H+1}` is treated as the whole
    /// cube, so all answers beyond the horizon are outer approximations.
    Truncate,
}

/// One level's index set, kept both as a membership mask over `I` and as a
/// sorted digit list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSet {
    present: Vec<bool>,
    digits: Vec<DigitId>,
}

impl LevelSet {
    fn from_ids(mut ids: Vec<DigitId>, index_count: usize) -> Self {
        ids.sort_unstable();
        ids.dedup();
        let mut present = vec![false; index_count];
        for &id in &ids {
            present[id as usize] = true;
        }
        LevelSet {
            present,
            digits: ids,
        }
    }

    fn full(index_count: usize) -> Self {
        LevelSet {
            present: vec![true; index_count],
            digits: (0..index_count as u16).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn contains(&self, id: DigitId) -> bool {
        self.present[id as usize]
    }

    /// Sorted digit ids of the level.
    pub fn digits(&self) -> &[DigitId] {
        &self.digits
    }

    /// Digit ids of `I` missing from this level.
    pub fn removed(&self) -> impl Iterator<Item = DigitId> + '_ {
        self.present
            .iter()
            .enumerate()
            .filter(|(_, p)| !**p)
            .map(|(id, _)| id as DigitId)
    }
}

/// Identifies which stored table a level uses; levels beyond a `Full` tail
/// all share the synthetic full set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevelToken {
    Stored(usize),
    Full,
}

/// The eventually periodic sequence of levels seen from a given start level:
/// a finite prefix followed by a repeating cycle. An empty cycle means the
/// sequence stops at the horizon (`Truncate`).
#[derive(Debug, Clone)]
pub struct LevelSchedule {
    pub prefix: Vec<LevelToken>,
    pub cycle: Vec<LevelToken>,
}

/// A finite coding `(i_j, …, i_{k-1})`: digits starting at `start_level`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    pub start_level: usize,
    pub digits: Vec<DigitId>,
}

impl Word {
    pub fn new(start_level: usize, digits: Vec<DigitId>) -> Self {
        Word {
            start_level,
            digits,
        }
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }
}

/// The exact lattice box of a word's image of the unit cube: axis `k` spans
/// `[corner_k, corner_k + 1] / n_k^depth`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cell {
    pub depth: usize,
    pub corner: Vec<i64>,
}

/// Digit stream for one axis: `prefix` then `cycle` repeated forever. An
/// empty cycle marks a stream truncated at the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisStream {
    pub prefix: Vec<u32>,
    pub cycle: Vec<u32>,
}

impl AxisStream {
    /// Exact value of `Σ digit_t / n^t`; for a truncated stream this is the
    /// left endpoint of the surviving interval.
    pub fn value(&self, n: u32) -> BigRational {
        let n_big = BigInt::from(n);
        let mut acc = BigRational::zero();
        let mut scale = BigRational::one();
        for &d in &self.prefix {
            scale /= BigRational::from(n_big.clone());
            acc += &scale * BigRational::from(BigInt::from(d));
        }
        if !self.cycle.is_empty() {
            let mut num = BigInt::zero();
            for &d in &self.cycle {
                num = num * n_big.clone() + BigInt::from(d);
            }
            let den = n_big.pow(self.cycle.len() as u32) - BigInt::one();
            acc += scale * BigRational::new(num, den);
        }
        acc
    }
}

/// Witness produced by the core-line and core-slab searches: the fixed
/// coordinates, one digit stream per fixed axis.
#[derive(Debug, Clone)]
pub struct CoreWitness {
    /// The free axis (the direction of the line, or the normal of the slab).
    pub axis: usize,
    /// `(axis, stream)` for every fixed coordinate.
    pub fixed: Vec<(usize, AxisStream)>,
}

impl CoreWitness {
    pub fn coordinate(&self, axis: usize, n: u32) -> Option<BigRational> {
        self.fixed
            .iter()
            .find(|(a, _)| *a == axis)
            .map(|(_, s)| s.value(n))
    }
}

/// A reproducible batch of uniform draws from `𝒫_r(I)`.
#[derive(Debug, Clone)]
pub struct LevelSample {
    pub r: usize,
    pub seed: u64,
    pub levels: Vec<Vec<DigitId>>,
}

/// A validated non-autonomous grid system.
#[derive(Debug, Clone)]
pub struct GridIfs {
    subdiv: Vec<u32>,
    strides: Vec<u32>,
    index_count: usize,
    levels: Vec<LevelSet>,
    tail: Tail,
    full_level: LevelSet,
}

impl GridIfs {
    /// Builds a system from digit tuples, one list per level.
    pub fn new(subdiv: Vec<u32>, levels: Vec<Vec<Vec<u32>>>, tail: Tail) -> Result<Self, IfsError> {
        let proto = Self::validate_shape(&subdiv, levels.len(), tail)?;
        let mut id_levels = Vec::with_capacity(levels.len());
        for (li, level) in levels.iter().enumerate() {
            let mut ids = Vec::with_capacity(level.len());
            for digit in level {
                let id = proto
                    .digit_id_checked(digit)
                    .ok_or(IfsError::DigitOutOfRange {
                        level: li + 1,
                        digit: digit.clone(),
                    })?;
                ids.push(id);
            }
            id_levels.push(ids);
        }
        Self::from_digit_ids(subdiv, id_levels, tail)
    }

    /// Builds a system from flattened digit ids, one sorted-or-not list per
    /// level.
    pub fn from_digit_ids(
        subdiv: Vec<u32>,
        levels: Vec<Vec<DigitId>>,
        tail: Tail,
    ) -> Result<Self, IfsError> {
        let mut ifs = Self::validate_shape(&subdiv, levels.len(), tail)?;
        for (li, ids) in levels.into_iter().enumerate() {
            if ids.is_empty() {
                return Err(IfsError::EmptyLevel { level: li + 1 });
            }
            if let Some(&bad) = ids.iter().find(|&&id| (id as usize) >= ifs.index_count) {
                return Err(IfsError::DigitOutOfRange {
                    level: li + 1,
                    digit: vec![bad as u32],
                });
            }
            ifs.levels.push(LevelSet::from_ids(ids, ifs.index_count));
        }
        Ok(ifs)
    }

    fn validate_shape(subdiv: &[u32], horizon: usize, tail: Tail) -> Result<Self, IfsError> {
        if subdiv.is_empty() {
            return Err(IfsError::EmptyDimension);
        }
        if subdiv.len() > 8 {
            return Err(IfsError::DimensionTooLarge { got: subdiv.len() });
        }
        for (axis, &n) in subdiv.iter().enumerate() {
            if n < 2 {
                return Err(IfsError::SubdivisionTooSmall { axis, got: n });
            }
        }
        let mut count: usize = 1;
        for &n in subdiv {
            count = count
                .checked_mul(n as usize)
                .ok_or(IfsError::IndexSetTooLarge)?;
        }
        if count > u16::MAX as usize {
            return Err(IfsError::IndexSetTooLarge);
        }
        if horizon == 0 {
            return Err(IfsError::NoLevels);
        }
        if let Tail::Periodic(p) = tail {
            if p == 0 || p > horizon {
                return Err(IfsError::InvalidPeriod { period: p, horizon });
            }
        }
        let mut strides = vec![1u32; subdiv.len()];
        for axis in (0..subdiv.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * subdiv[axis + 1];
        }
        Ok(GridIfs {
            subdiv: subdiv.to_vec(),
            strides,
            index_count: count,
            levels: Vec::new(),
            tail,
            full_level: LevelSet::full(count),
        })
    }

    /// The autonomous full system: every level keeps all of `I`.
    pub fn full(subdiv: Vec<u32>) -> Result<Self, IfsError> {
        let count: usize = subdiv.iter().map(|&n| n as usize).product();
        Self::from_digit_ids(subdiv, vec![(0..count as u16).collect()], Tail::Full)
    }

    /// The autonomous system that repeats one level set forever.
    pub fn autonomous(subdiv: Vec<u32>, level: Vec<Vec<u32>>) -> Result<Self, IfsError> {
        Self::new(subdiv, vec![level], Tail::Periodic(1))
    }

    pub fn dim(&self) -> usize {
        self.subdiv.len()
    }

    pub fn subdiv(&self) -> &[u32] {
        &self.subdiv
    }

    /// Number of stored levels `H`.
    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// `#I`.
    pub fn index_count(&self) -> usize {
        self.index_count
    }

    /// Smallest subdivision count; the uniform contraction bound is its
    /// reciprocal.
    pub fn min_subdivision(&self) -> u32 {
        *self.subdiv.iter().min().unwrap()
    }

    /// `c^e` as an exact rational, where `c = 1/min_k n_k`.
    pub fn contraction_pow(&self, e: u32) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(self.min_subdivision()).pow(e))
    }

    pub fn digit_id(&self, components: &[u32]) -> Option<DigitId> {
        self.digit_id_checked(components)
    }

    fn digit_id_checked(&self, components: &[u32]) -> Option<DigitId> {
        if components.len() != self.subdiv.len() {
            return None;
        }
        let mut id = 0u32;
        for (axis, &c) in components.iter().enumerate() {
            if c >= self.subdiv[axis] {
                return None;
            }
            id += c * self.strides[axis];
        }
        Some(id as DigitId)
    }

    pub fn digit_components(&self, id: DigitId) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.subdiv.len());
        let mut rest = id as u32;
        for axis in 0..self.subdiv.len() {
            out.push(rest / self.strides[axis]);
            rest %= self.strides[axis];
        }
        out
    }

    /// Component of a digit id along one axis.
    pub fn digit_component(&self, id: DigitId, axis: usize) -> u32 {
        (id as u32 / self.strides[axis]) % self.subdiv[axis]
    }

    fn stored_index(&self, t: usize) -> Option<usize> {
        debug_assert!(t >= 1);
        let h = self.horizon();
        if t <= h {
            return Some(t - 1);
        }
        match self.tail {
            Tail::Full => None,
            Tail::Truncate => None,
            Tail::Periodic(p) => Some(h - p + (t - h - 1) % p),
        }
    }

    /// Level token for `t >= 1`, or `None` beyond a truncated horizon.
    pub fn level_token(&self, t: usize) -> Option<LevelToken> {
        match self.stored_index(t) {
            Some(i) => Some(LevelToken::Stored(i)),
            None => match self.tail {
                Tail::Full => Some(LevelToken::Full),
                _ => None,
            },
        }
    }

    pub fn level_set(&self, token: LevelToken) -> &LevelSet {
        match token {
            LevelToken::Stored(i) => &self.levels[i],
            LevelToken::Full => &self.full_level,
        }
    }

    /// The index set at level `t` (1-based), or `None` beyond a truncated
    /// horizon.
    pub fn level(&self, t: usize) -> Option<&LevelSet> {
        self.level_token(t).map(|tok| self.level_set(tok))
    }

    /// The eventually periodic level sequence seen from level `from` on.
    pub fn schedule_from(&self, from: usize) -> LevelSchedule {
        debug_assert!(from >= 1);
        let h = self.horizon();
        let prefix: Vec<LevelToken> = (from..=h).map(|t| LevelToken::Stored(t - 1)).collect();
        let cycle = match self.tail {
            Tail::Full => vec![LevelToken::Full],
            Tail::Truncate => Vec::new(),
            Tail::Periodic(p) => {
                let offset = if from > h { (from - h - 1) % p } else { 0 };
                (0..p)
                    .map(|i| LevelToken::Stored(h - p + (offset + i) % p))
                    .collect()
            }
        };
        LevelSchedule { prefix, cycle }
    }

    /// Number of vertices of the nerve `N_{j,k}`, i.e. `∏_{t=j}^{k-1} #I^(t)`.
    pub fn word_count(&self, j: usize, k: usize) -> Result<u128, IfsError> {
        let mut count: u128 = 1;
        for t in j..k {
            let level = self.level(t).ok_or(IfsError::BeyondHorizon {
                level: t,
                horizon: self.horizon(),
            })?;
            count = count.saturating_mul(level.len() as u128);
        }
        Ok(count)
    }

    /// Exact lattice box of `f_word(X)` by Horner evaluation of the digits.
    pub fn word_cell(&self, word: &Word) -> Result<Cell, IfsError> {
        if word.start_level == 0 {
            return Err(IfsError::LevelZero);
        }
        let d = self.dim();
        let mut corner = vec![0i64; d];
        for (pos, &id) in word.digits.iter().enumerate() {
            let t = word.start_level + pos;
            let level = self.level(t).ok_or(IfsError::BeyondHorizon {
                level: t,
                horizon: self.horizon(),
            })?;
            if (id as usize) >= self.index_count || !level.contains(id) {
                return Err(IfsError::DigitNotInLevel { level: t });
            }
            for axis in 0..d {
                let digit = self.digit_component(id, axis) as i64;
                corner[axis] = corner[axis]
                    .checked_mul(self.subdiv[axis] as i64)
                    .and_then(|v| v.checked_add(digit))
                    .ok_or(IfsError::DepthOverflow {
                        depth: word.depth(),
                    })?;
            }
        }
        Ok(Cell {
            depth: word.depth(),
            corner,
        })
    }

    /// Per-axis scale `n_k^depth` of depth-`m` cells.
    pub fn cell_scale(&self, depth: usize) -> Result<Vec<i64>, IfsError> {
        self.subdiv
            .iter()
            .map(|&n| {
                (0..depth).try_fold(1i64, |acc, _| {
                    acc.checked_mul(n as i64)
                        .ok_or(IfsError::DepthOverflow { depth })
                })
            })
            .collect()
    }

    /// All depth-`m` cells of the approximation of `J_j`: the boxes of every
    /// word over levels `j..j+m-1`.
    pub fn approximation_cells(&self, j: usize, m: usize) -> Result<Vec<Cell>, IfsError> {
        if j == 0 {
            return Err(IfsError::LevelZero);
        }
        let d = self.dim();
        let mut cells = vec![Cell {
            depth: 0,
            corner: vec![0i64; d],
        }];
        for t in j..j + m {
            let level = self.level(t).ok_or(IfsError::BeyondHorizon {
                level: t,
                horizon: self.horizon(),
            })?;
            let mut next = Vec::with_capacity(cells.len() * level.len());
            for cell in &cells {
                for &id in level.digits() {
                    let mut corner = Vec::with_capacity(d);
                    for axis in 0..d {
                        let v = cell.corner[axis]
                            .checked_mul(self.subdiv[axis] as i64)
                            .and_then(|v| v.checked_add(self.digit_component(id, axis) as i64))
                            .ok_or(IfsError::DepthOverflow { depth: m })?;
                        corner.push(v);
                    }
                    next.push(Cell {
                        depth: t - j + 1,
                        corner,
                    });
                }
            }
            cells = next;
        }
        Ok(cells)
    }

    /// Whether the constant coding of a cube corner lies in `∏_{t>=j} I^(t)`.
    ///
    /// `corner` has one entry per axis, each 0 or 1. Under a `Truncate` tail
    /// the answer only reflects the stored levels (an outer statement).
    pub fn corner_membership(&self, j: usize, corner: &[u8]) -> bool {
        let digit: Vec<u32> = corner
            .iter()
            .zip(&self.subdiv)
            .map(|(&c, &n)| if c == 0 { 0 } else { n - 1 })
            .collect();
        let id = match self.digit_id(&digit) {
            Some(id) => id,
            None => return false,
        };
        for t in j..=self.horizon() {
            if let Some(level) = self.level(t) {
                if !level.contains(id) {
                    return false;
                }
            }
        }
        match self.tail {
            Tail::Full | Tail::Truncate => true,
            Tail::Periodic(p) => {
                let h = self.horizon();
                (h - p..h).all(|i| self.levels[i].contains(id))
            }
        }
    }

    /// Whether no `J_j` contains any of the `2^d` cube corners.
    ///
    /// Only a `Periodic` tail can certify this: under `Full` the sets beyond
    /// the horizon are the whole cube and under `Truncate` the outer sets
    /// contain every corner, so both return `false`.
    pub fn no_corner_check(&self) -> bool {
        match self.tail {
            Tail::Full | Tail::Truncate => false,
            Tail::Periodic(_) => {
                let d = self.dim();
                for mask in 0..(1u32 << d) {
                    let corner: Vec<u8> = (0..d).map(|a| ((mask >> a) & 1) as u8).collect();
                    for j in 1..=self.horizon() {
                        if self.corner_membership(j, &corner) {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }

    /// Smallest digit of the given axis missing from the level's projection,
    /// i.e. the cut of Def-style gap strips, if any.
    pub fn detect_cut(&self, level: &LevelSet, axis: usize) -> Option<u32> {
        let n = self.subdiv[axis];
        let mut present = vec![false; n as usize];
        for &id in level.digits() {
            present[self.digit_component(id, axis) as usize] = true;
        }
        present.iter().position(|p| !p).map(|d| d as u32)
    }

    /// Cut detection for a stored level index `t` (1-based).
    pub fn detect_cut_at(&self, t: usize, axis: usize) -> Option<u32> {
        self.level(t).and_then(|l| self.detect_cut(l, axis))
    }

    /// Indices (0-based) of the stored levels that every level `t >= j` maps
    /// to under the tail policy, or `None` when a `Full` tail contributes
    /// levels with no stored index.
    fn relevant_stored_indices(&self, j: usize) -> Vec<usize> {
        let h = self.horizon();
        let mut idx: Vec<usize> = if j <= h {
            (j - 1..h).collect()
        } else {
            Vec::new()
        };
        if let Tail::Periodic(p) = self.tail {
            for i in h - p..h {
                if !idx.contains(&i) {
                    idx.push(i);
                }
            }
        }
        idx.sort_unstable();
        idx
    }

    /// Witness for a full line segment in direction `axis` inside `J_j`.
    ///
    /// Gated on the sufficient hypothesis `#(I \ I^(t)) < ∏_{l≠axis} n_l` for
    /// every `t >= j`; when it holds, one valid coordinate tuple is chosen
    /// greedily per level (lexicographically smallest tuple untouched by the
    /// removals).
    pub fn core_line_witness(&self, j: usize, axis: usize) -> Option<CoreWitness> {
        let d = self.dim();
        let other_axes: Vec<usize> = (0..d).filter(|&a| a != axis).collect();
        let other_prod: usize = other_axes
            .iter()
            .map(|&a| self.subdiv[a] as usize)
            .product();
        let check = |level: &LevelSet| self.index_count - level.len() < other_prod;
        if !self.levels_satisfy(j, check) {
            return None;
        }
        let choose = |level: &LevelSet| -> Vec<u32> {
            let mut blocked = vec![false; other_prod];
            for id in level.removed() {
                blocked[self.project_away(id, axis, &other_axes)] = true;
            }
            let slot = blocked
                .iter()
                .position(|b| !b)
                .expect("counting guarantees a free tuple");
            self.unproject(slot, &other_axes)
        };
        let streams = self.witness_streams(j, &other_axes, choose);
        Some(CoreWitness {
            axis,
            fixed: other_axes.iter().cloned().zip(streams).collect(),
        })
    }

    /// Witness point `x̃` so that the slab `{x_axis = x̃}` (times full cubes on
    /// the other axes) lies in `J_j`.
    ///
    /// Uses the per-level projection test: a digit of the axis works at level
    /// `t` iff no removed index of `I^(t)` carries it; `None` only when some
    /// relevant level blocks every digit.
    pub fn core_slab_witness(&self, j: usize, axis: usize) -> Option<CoreWitness> {
        let n = self.subdiv[axis] as usize;
        let free_digit = |level: &LevelSet| -> Option<u32> {
            let mut blocked = vec![false; n];
            for id in level.removed() {
                blocked[self.digit_component(id, axis) as usize] = true;
            }
            blocked.iter().position(|b| !b).map(|d| d as u32)
        };
        if !self.levels_satisfy(j, |l| free_digit(l).is_some()) {
            return None;
        }
        let choose = |level: &LevelSet| -> Vec<u32> { vec![free_digit(level).unwrap()] };
        let streams = self.witness_streams(j, &[axis], choose);
        Some(CoreWitness {
            axis,
            fixed: vec![(axis, streams.into_iter().next().unwrap())],
        })
    }

    fn levels_satisfy(&self, j: usize, check: impl Fn(&LevelSet) -> bool) -> bool {
        for i in self.relevant_stored_indices(j) {
            if !check(&self.levels[i]) {
                return false;
            }
        }
        // A full tail never removes anything, a truncated tail has nothing to
        // check beyond the horizon.
        true
    }

    /// Greedy per-level digit choice turned into per-axis streams
    /// (prefix = levels `j..=H`, cycle from the tail policy).
    fn witness_streams(
        &self,
        j: usize,
        axes: &[usize],
        choose: impl Fn(&LevelSet) -> Vec<u32>,
    ) -> Vec<AxisStream> {
        let h = self.horizon();
        let mut streams: Vec<AxisStream> = axes
            .iter()
            .map(|_| AxisStream {
                prefix: Vec::new(),
                cycle: Vec::new(),
            })
            .collect();
        for t in j..=h {
            let tuple = choose(self.level(t).unwrap());
            for (s, &v) in streams.iter_mut().zip(&tuple) {
                s.prefix.push(v);
            }
        }
        match self.tail {
            Tail::Full => {
                for s in &mut streams {
                    s.cycle = vec![0];
                }
            }
            Tail::Periodic(p) => {
                for i in h - p..h {
                    let tuple = choose(&self.levels[i]);
                    for (s, &v) in streams.iter_mut().zip(&tuple) {
                        s.cycle.push(v);
                    }
                }
            }
            Tail::Truncate => {}
        }
        streams
    }

    /// Flattened index of a digit over the `other_axes` coordinate tuple.
    fn project_away(&self, id: DigitId, _axis: usize, other_axes: &[usize]) -> usize {
        let mut out = 0usize;
        for &a in other_axes {
            out = out * self.subdiv[a] as usize + self.digit_component(id, a) as usize;
        }
        out
    }

    fn unproject(&self, mut slot: usize, other_axes: &[usize]) -> Vec<u32> {
        let mut rev = vec![0u32; other_axes.len()];
        for (i, &a) in other_axes.iter().enumerate().rev() {
            rev[i] = (slot % self.subdiv[a] as usize) as u32;
            slot /= self.subdiv[a] as usize;
        }
        rev
    }
}

/// `count` independent uniform draws from `𝒫_r(I)`, reproducible from the
/// seed.
pub fn sample_levels(
    subdiv: &[u32],
    r: usize,
    count: usize,
    seed: u64,
) -> Result<LevelSample, IfsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = sample_level_sets(subdiv, r, count, &mut rng)?;
    Ok(LevelSample { r, seed, levels })
}

/// Uniform draws from `𝒫_r(I)` using the caller's generator state.
pub fn sample_level_sets<R: RngCore>(
    subdiv: &[u32],
    r: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<DigitId>>, IfsError> {
    let total: usize = subdiv.iter().map(|&n| n as usize).product();
    if r == 0 || r >= total {
        return Err(IfsError::RemovalOutOfRange { r, max: total - 1 });
    }
    let mut levels = Vec::with_capacity(count);
    for _ in 0..count {
        let removed = rand::seq::index::sample(rng, total, r);
        let mut removed_mask = vec![false; total];
        for i in removed {
            removed_mask[i] = true;
        }
        let kept: Vec<DigitId> = (0..total as u16)
            .filter(|&id| !removed_mask[id as usize])
            .collect();
        levels.push(kept);
    }
    Ok(levels)
}
