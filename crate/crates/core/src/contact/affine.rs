//! Certified three-valued intersection oracle for one-dimensional systems of
//! rational affine contractions `x ↦ a x + b`.
//!
//! Pieces are refined as exact rational interval unions; separation at any
//! depth certifies emptiness. Non-emptiness is certified only by a common
//! point all of whose codings are found as eventually periodic digit streams
//! (a lasso in the `(point, level-phase)` graph), evaluated exactly. Fat
//! overlaps whose common points all have aperiodic codings stay `Unknown` by
//! design.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::ifs::Word;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AffineError {
    #[error("slope of symbol {symbol} at level {level} must lie strictly between 0 and 1")]
    SlopeOutOfRange { level: usize, symbol: usize },
    #[error("offset of symbol {symbol} at level {level} must keep the image inside [0,1]")]
    OffsetOutOfRange { level: usize, symbol: usize },
    #[error("level {level} has no maps")]
    EmptyLevel { level: usize },
    #[error("no levels stored")]
    NoLevels,
    #[error("tail period {period} must lie in 1..={horizon}")]
    InvalidPeriod { period: usize, horizon: usize },
    #[error("level {level} is beyond the horizon {horizon}")]
    BeyondHorizon { level: usize, horizon: usize },
    #[error("symbol out of range at level {level}")]
    SymbolOutOfRange { level: usize },
    #[error("tuple is empty")]
    EmptyTuple,
    #[error("words have mismatched depths")]
    MismatchedDepths,
    #[error("word starts at level {got}, expected {expected}")]
    MismatchedStart { expected: usize, got: usize },
}

/// `x ↦ slope·x + offset` with rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap {
    pub slope: BigRational,
    pub offset: BigRational,
}

impl AffineMap {
    pub fn new(slope_num: i64, slope_den: i64, offset_num: i64, offset_den: i64) -> Self {
        AffineMap {
            slope: BigRational::new(BigInt::from(slope_num), BigInt::from(slope_den)),
            offset: BigRational::new(BigInt::from(offset_num), BigInt::from(offset_den)),
        }
    }

    pub fn identity() -> Self {
        AffineMap {
            slope: BigRational::one(),
            offset: BigRational::zero(),
        }
    }

    pub fn apply(&self, x: &BigRational) -> BigRational {
        &self.slope * x + &self.offset
    }

    pub fn invert(&self, y: &BigRational) -> BigRational {
        (y - &self.offset) / &self.slope
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            slope: &self.slope * &inner.slope,
            offset: &self.slope * &inner.offset + &self.offset,
        }
    }

    /// Image of `[0,1]`.
    fn unit_image(&self) -> (BigRational, BigRational) {
        (self.offset.clone(), &self.slope + &self.offset)
    }

    /// Unique fixed point of a contraction.
    fn fixed_point(&self) -> BigRational {
        &self.offset / (BigRational::one() - &self.slope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffineTail {
    Periodic(usize),
    Truncate,
}

/// A one-dimensional non-autonomous system of affine contractions, with a
/// finite horizon of stored levels and a periodic or truncated tail.
#[derive(Debug, Clone)]
pub struct Affine1dSystem {
    levels: Vec<Vec<AffineMap>>,
    tail: AffineTail,
}

impl Affine1dSystem {
    pub fn new(levels: Vec<Vec<AffineMap>>, tail: AffineTail) -> Result<Self, AffineError> {
        if levels.is_empty() {
            return Err(AffineError::NoLevels);
        }
        for (li, maps) in levels.iter().enumerate() {
            if maps.is_empty() {
                return Err(AffineError::EmptyLevel { level: li + 1 });
            }
            for (si, m) in maps.iter().enumerate() {
                if m.slope <= BigRational::zero() || m.slope >= BigRational::one() {
                    return Err(AffineError::SlopeOutOfRange {
                        level: li + 1,
                        symbol: si,
                    });
                }
                if m.offset < BigRational::zero() || &m.offset + &m.slope > BigRational::one() {
                    return Err(AffineError::OffsetOutOfRange {
                        level: li + 1,
                        symbol: si,
                    });
                }
            }
        }
        if let AffineTail::Periodic(p) = tail {
            if p == 0 || p > levels.len() {
                return Err(AffineError::InvalidPeriod {
                    period: p,
                    horizon: levels.len(),
                });
            }
        }
        Ok(Affine1dSystem { levels, tail })
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    pub fn tail(&self) -> AffineTail {
        self.tail
    }

    /// Canonical position of a level: itself inside the horizon, otherwise
    /// folded into the repeating suffix. `None` beyond a truncated horizon.
    fn canonical_pos(&self, t: usize) -> Option<usize> {
        let h = self.horizon();
        if t <= h {
            return Some(t);
        }
        match self.tail {
            AffineTail::Truncate => None,
            AffineTail::Periodic(p) => Some(h - p + 1 + (t - h - 1) % p),
        }
    }

    pub fn level(&self, t: usize) -> Option<&[AffineMap]> {
        self.canonical_pos(t)
            .map(|pos| self.levels[pos - 1].as_slice())
    }

    pub fn symbols_at(&self, t: usize) -> Option<usize> {
        self.level(t).map(|maps| maps.len())
    }

    /// Composition `f_{i_j} ∘ … ∘ f_{i_{k-1}}` of a word's maps.
    pub fn word_map(&self, word: &Word) -> Result<AffineMap, AffineError> {
        let mut acc = AffineMap::identity();
        for (pos, &sym) in word.digits.iter().enumerate() {
            let t = word.start_level + pos;
            let maps = self.level(t).ok_or(AffineError::BeyondHorizon {
                level: t,
                horizon: self.horizon(),
            })?;
            let map = maps
                .get(sym as usize)
                .ok_or(AffineError::SymbolOutOfRange { level: t })?;
            acc = acc.compose(map);
        }
        Ok(acc)
    }
}

/// Digit stream for one word: the word's own symbols, the membership path,
/// then the cycle repeated forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolStream {
    pub start_level: usize,
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

impl SymbolStream {
    /// Exact value of the coded point.
    pub fn value(&self, sys: &Affine1dSystem) -> Option<BigRational> {
        let mut prefix_map = AffineMap::identity();
        let mut t = self.start_level;
        for &sym in &self.prefix {
            prefix_map = prefix_map.compose(sys.level(t)?.get(sym)?);
            t += 1;
        }
        if self.cycle.is_empty() {
            return Some(prefix_map.apply(&BigRational::zero()));
        }
        let mut cycle_map = AffineMap::identity();
        let mut tt = t;
        for &sym in &self.cycle {
            cycle_map = cycle_map.compose(sys.level(tt)?.get(sym)?);
            tt += 1;
        }
        Some(prefix_map.apply(&cycle_map.fixed_point()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AffineVerdict {
    /// A common point with verified eventually periodic codings on all sides.
    Nonempty {
        point: BigRational,
        streams: Vec<SymbolStream>,
    },
    /// Outer interval approximations separate at this refinement depth.
    Empty { certified_depth: usize },
    /// Neither certificate found within the budgets.
    Unknown { refined_to_depth: usize },
}

impl AffineVerdict {
    pub fn is_nonempty(&self) -> bool {
        matches!(self, AffineVerdict::Nonempty { .. })
    }
}

type Interval = (BigRational, BigRational);

fn touches(a: &Interval, b: &Interval) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Decides whether the pieces `f_{w_p}(J_k)` share a point, three-valued.
///
/// `depth_budget` bounds the interval refinement; `period_budget` bounds the
/// length of candidate coding paths in the witness search.
pub fn affine1d_oracle(
    sys: &Affine1dSystem,
    j: usize,
    words: &[Word],
    depth_budget: usize,
    period_budget: usize,
) -> Result<AffineVerdict, AffineError> {
    if words.is_empty() {
        return Err(AffineError::EmptyTuple);
    }
    let depth = words[0].depth();
    for w in words {
        if w.start_level != j {
            return Err(AffineError::MismatchedStart {
                expected: j,
                got: w.start_level,
            });
        }
        if w.depth() != depth {
            return Err(AffineError::MismatchedDepths);
        }
    }
    let start = j + depth;

    // Distinct pieces; duplicates are trivially satisfied.
    let mut uniq: Vec<&Word> = Vec::new();
    for w in words {
        if !uniq.contains(&w) {
            uniq.push(w);
        }
    }
    let maps: Vec<AffineMap> = uniq
        .iter()
        .map(|w| sys.word_map(w))
        .collect::<Result<_, _>>()?;

    if uniq.len() == 1 {
        // A single piece is non-empty; code it by the all-zeros continuation.
        let mut prefix: Vec<usize> = words[0].digits.iter().map(|&d| d as usize).collect();
        for _ in start..=sys.horizon() {
            prefix.push(0);
        }
        let cycle = match sys.tail {
            AffineTail::Periodic(p) => vec![0usize; p],
            AffineTail::Truncate => Vec::new(),
        };
        let stream = SymbolStream {
            start_level: j,
            prefix,
            cycle,
        };
        let point = stream.value(sys).expect("greedy stream uses valid symbols");
        let streams = words.iter().map(|_| stream.clone()).collect();
        return Ok(AffineVerdict::Nonempty { point, streams });
    }

    // Refine each piece as interval unions, pruning intervals that touch no
    // interval of some other piece.
    let mut sets: Vec<Vec<(AffineMap, Interval)>> = maps
        .iter()
        .map(|m| vec![(m.clone(), m.unit_image())])
        .collect();
    let mut candidates: Vec<BigRational> = Vec::new();
    for m in 0..=depth_budget {
        let pruned = prune(&mut sets);
        if let Some(_empty_piece) = pruned {
            return Ok(AffineVerdict::Empty { certified_depth: m });
        }
        collect_candidates(&sets, &mut candidates);
        if m == depth_budget {
            break;
        }
        let t = start + m;
        let level = match sys.level(t) {
            Some(l) => l,
            None => {
                // Truncated horizon: still touching, nothing more to refine.
                return finish_with_witness(
                    sys,
                    j,
                    words,
                    &uniq,
                    &maps,
                    candidates,
                    start,
                    period_budget,
                    m,
                );
            }
        };
        for set in &mut sets {
            let mut next = Vec::with_capacity(set.len() * level.len());
            for (map, _) in set.iter() {
                for g in level {
                    let comp = map.compose(g);
                    let iv = comp.unit_image();
                    next.push((comp, iv));
                }
            }
            *set = next;
        }
    }
    finish_with_witness(
        sys,
        j,
        words,
        &uniq,
        &maps,
        candidates,
        start,
        period_budget,
        depth_budget,
    )
}

/// Removes intervals that fail to touch every other piece; reports `Some` if
/// a piece becomes empty.
fn prune(sets: &mut [Vec<(AffineMap, Interval)>]) -> Option<usize> {
    loop {
        let mut changed = false;
        for p in 0..sets.len() {
            let others: Vec<Vec<Interval>> = sets
                .iter()
                .enumerate()
                .filter(|(q, _)| *q != p)
                .map(|(_, s)| s.iter().map(|(_, iv)| iv.clone()).collect())
                .collect();
            let before = sets[p].len();
            sets[p].retain(|(_, iv)| others.iter().all(|os| os.iter().any(|o| touches(iv, o))));
            if sets[p].len() != before {
                changed = true;
            }
            if sets[p].is_empty() {
                return Some(p);
            }
        }
        if !changed {
            return None;
        }
    }
}

/// Candidate witness points: endpoints and midpoints of the common overlap
/// of one interval from each piece.
fn collect_candidates(sets: &[Vec<(AffineMap, Interval)>], out: &mut Vec<BigRational>) {
    const CAP: usize = 512;
    let push = |x: BigRational, out: &mut Vec<BigRational>| {
        if out.len() < CAP && !out.contains(&x) {
            out.push(x);
        }
    };
    // Pairwise overlaps already carry the right endpoints in dimension one.
    for p in 0..sets.len() {
        for q in p + 1..sets.len() {
            for (_, a) in &sets[p] {
                for (_, b) in &sets[q] {
                    if touches(a, b) {
                        let lo = if a.0 >= b.0 { a.0.clone() } else { b.0.clone() };
                        let hi = if a.1 <= b.1 { a.1.clone() } else { b.1.clone() };
                        let two = BigRational::from(BigInt::from(2));
                        let mid = (&lo + &hi) / two;
                        push(lo, out);
                        push(hi, out);
                        push(mid, out);
                    }
                }
            }
        }
    }
}

struct Lasso {
    prefix: Vec<usize>,
    cycle: Vec<usize>,
}

enum Membership {
    Yes(Lasso),
    No,
    Unknown,
}

/// Searches for an eventually periodic coding of `x` inside the piece given
/// by `map` (so the coding of `map⁻¹(x)` from level `start`). A lasso is a
/// repeated `(point, canonical level)` state on the search path.
fn chase_membership(
    sys: &Affine1dSystem,
    x: &BigRational,
    start: usize,
    map: &AffineMap,
    period_budget: usize,
) -> Membership {
    let y0 = map.invert(x);
    if y0 < BigRational::zero() || y0 > BigRational::one() {
        return Membership::No;
    }
    let mut path: Vec<(BigRational, usize, usize)> = Vec::new(); // (y, canon pos, symbol taken)
    let mut truncated = false;

    fn dfs(
        sys: &Affine1dSystem,
        y: BigRational,
        t: usize,
        path: &mut Vec<(BigRational, usize, usize)>,
        budget: usize,
        truncated: &mut bool,
    ) -> Option<usize> {
        let pos = match sys.canonical_pos(t) {
            Some(p) => p,
            None => {
                *truncated = true;
                return None;
            }
        };
        if let Some(i) = path
            .iter()
            .position(|(py, ppos, _)| *ppos == pos && *py == y)
        {
            return Some(i);
        }
        if path.len() >= budget {
            *truncated = true;
            return None;
        }
        let maps = sys.level(t).expect("canonical_pos implies a level");
        for (sym, f) in maps.iter().enumerate() {
            let child = f.invert(&y);
            if child < BigRational::zero() || child > BigRational::one() {
                continue;
            }
            path.push((y.clone(), pos, sym));
            if let Some(cut) = dfs(sys, child, t + 1, path, budget, truncated) {
                return Some(cut);
            }
            path.pop();
        }
        None
    }

    match dfs(sys, y0, start, &mut path, period_budget, &mut truncated) {
        Some(cut) => {
            let prefix = path[..cut].iter().map(|(_, _, s)| *s).collect();
            let cycle = path[cut..].iter().map(|(_, _, s)| *s).collect();
            Membership::Yes(Lasso { prefix, cycle })
        }
        None if truncated => Membership::Unknown,
        None => Membership::No,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_with_witness(
    sys: &Affine1dSystem,
    j: usize,
    words: &[Word],
    uniq: &[&Word],
    maps: &[AffineMap],
    mut candidates: Vec<BigRational>,
    start: usize,
    period_budget: usize,
    refined_depth: usize,
) -> Result<AffineVerdict, AffineError> {
    candidates.sort();
    candidates.dedup();
    'candidate: for x in &candidates {
        let mut lassos: Vec<Lasso> = Vec::with_capacity(uniq.len());
        for map in maps {
            match chase_membership(sys, x, start, map, period_budget) {
                Membership::Yes(l) => lassos.push(l),
                _ => continue 'candidate,
            }
        }
        let streams: Vec<SymbolStream> = words
            .iter()
            .map(|w| {
                let u = uniq.iter().position(|uw| **uw == *w).unwrap();
                let mut prefix: Vec<usize> = w.digits.iter().map(|&d| d as usize).collect();
                prefix.extend(lassos[u].prefix.iter().copied());
                SymbolStream {
                    start_level: j,
                    prefix,
                    cycle: lassos[u].cycle.clone(),
                }
            })
            .collect();
        // Every stream must evaluate back to the candidate point.
        debug_assert!(streams.iter().all(|s| s.value(sys).as_ref() == Some(x)));
        return Ok(AffineVerdict::Nonempty {
            point: x.clone(),
            streams,
        });
    }
    Ok(AffineVerdict::Unknown {
        refined_to_depth: refined_depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The alternating 5/7–2/5 two-symbol system.
    fn two_symbol() -> Affine1dSystem {
        let odd = vec![AffineMap::new(5, 7, 0, 1), AffineMap::new(5, 7, 2, 7)];
        let even = vec![AffineMap::new(2, 5, 0, 1), AffineMap::new(2, 5, 3, 5)];
        Affine1dSystem::new(vec![odd, even], AffineTail::Periodic(2)).unwrap()
    }

    fn w(start: usize, symbols: &[usize]) -> Word {
        Word::new(start, symbols.iter().map(|&s| s as u16).collect())
    }

    #[test]
    fn validation() {
        let bad = Affine1dSystem::new(
            vec![vec![AffineMap::new(3, 2, 0, 1)]],
            AffineTail::Periodic(1),
        );
        assert!(matches!(bad, Err(AffineError::SlopeOutOfRange { .. })));
        let bad = Affine1dSystem::new(
            vec![vec![AffineMap::new(1, 2, 3, 4)]],
            AffineTail::Periodic(1),
        );
        assert!(matches!(bad, Err(AffineError::OffsetOutOfRange { .. })));
    }

    #[test]
    fn touching_depth_one_pieces_meet_at_two_sevenths() {
        let sys = two_symbol();
        let verdict = affine1d_oracle(&sys, 1, &[w(1, &[0, 0]), w(1, &[1, 0])], 6, 24).unwrap();
        match verdict {
            AffineVerdict::Nonempty { point, streams } => {
                assert_eq!(point, BigRational::new(BigInt::from(2), BigInt::from(7)));
                for s in &streams {
                    assert_eq!(s.value(&sys).unwrap(), point);
                }
            }
            v => panic!("expected Nonempty, got {v:?}"),
        }
    }

    #[test]
    fn level_two_pieces_separate_at_depth_zero() {
        let sys = two_symbol();
        let verdict = affine1d_oracle(&sys, 2, &[w(2, &[0]), w(2, &[1])], 6, 24).unwrap();
        assert_eq!(verdict, AffineVerdict::Empty { certified_depth: 0 });
    }

    #[test]
    fn identical_words_trivially_nonempty() {
        let sys = two_symbol();
        let verdict = affine1d_oracle(&sys, 1, &[w(1, &[0]), w(1, &[0])], 6, 24).unwrap();
        assert!(verdict.is_nonempty());
    }

    #[test]
    fn fat_overlap_without_periodic_witness_is_unknown() {
        // The pieces (b,a) and (a,b) of the third-stage covering overlap on
        // [3/7, 4/7], but every common point needs an aperiodic coding on one
        // side, so the oracle honestly answers Unknown.
        let sys = two_symbol();
        let verdict = affine1d_oracle(&sys, 1, &[w(1, &[1, 0]), w(1, &[0, 1])], 6, 24).unwrap();
        assert!(matches!(verdict, AffineVerdict::Unknown { .. }));
    }

    #[test]
    fn last_pair_of_stage_three_meets_at_five_sevenths() {
        let sys = two_symbol();
        let verdict = affine1d_oracle(&sys, 1, &[w(1, &[0, 1]), w(1, &[1, 1])], 6, 24).unwrap();
        match verdict {
            AffineVerdict::Nonempty { point, .. } => {
                assert_eq!(point, BigRational::new(BigInt::from(5), BigInt::from(7)));
            }
            v => panic!("expected Nonempty, got {v:?}"),
        }
    }

    #[test]
    fn stream_value_evaluates_geometric_series() {
        let sys = two_symbol();
        // Constant-b coding from level 1 codes the fixed point 1.
        let s = SymbolStream {
            start_level: 1,
            prefix: vec![],
            cycle: vec![1, 1],
        };
        assert_eq!(s.value(&sys).unwrap(), BigRational::one());
    }
}
