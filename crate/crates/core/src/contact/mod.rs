//! Exact decision of whether a tuple of limit-set pieces `f_{v_0}(J_k) ∩ … ∩
//! f_{v_q}(J_k)` is non-empty.
//!
//! Equal-depth grid cells intersect iff their lattice offsets differ by at
//! most one per axis, so a surviving contact is a run of a finite automaton
//! whose states are translation-normalized offset tuples and whose
//! transitions pick one digit per piece at the next level. Over a `Full` or
//! `Periodic` tail the level sequence is eventually periodic and emptiness of
//! the automaton is decided by greatest-fixed-point pruning on the product of
//! states and cycle phases: repeatedly delete states with no successor; a
//! contact survives forever iff its state survives the pruning. Runs convert
//! to eventually periodic digit streams, which are the witnesses.

pub mod affine;

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::ifs::{DigitId, GridIfs, IfsError, LevelSchedule, LevelSet, LevelToken, Tail, Word};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContactError {
    #[error(transparent)]
    Ifs(#[from] IfsError),
    #[error("tuple is empty")]
    EmptyTuple,
    #[error("words have mismatched depths")]
    MismatchedDepths,
    #[error("word starts at level {got}, expected {expected}")]
    MismatchedStart { expected: usize, got: usize },
    #[error(
        "tuple arity {arity} exceeds the geometric cap {cap} (at most 2^d cells share a point)"
    )]
    ArityAboveCap { arity: usize, cap: usize },
}

/// Relative positions of a tuple of equal-depth cells, normalized so the
/// first is at the origin. Valid states have every pairwise difference in
/// `{-1,0,1}` per axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OffsetState {
    pub offsets: Vec<Vec<i32>>,
}

impl OffsetState {
    /// Offsets of the given cells relative to the first, or `None` when some
    /// pair is already separated.
    pub fn from_corners(corners: &[&[i64]]) -> Option<OffsetState> {
        let d = corners[0].len();
        let mut offsets = Vec::with_capacity(corners.len());
        for c in corners {
            let o: Vec<i32> = (0..d).map(|a| (c[a] - corners[0][a]) as i32).collect();
            offsets.push(o);
        }
        for i in 0..offsets.len() {
            for j in i + 1..offsets.len() {
                for a in 0..d {
                    if (offsets[i][a] - offsets[j][a]).abs() > 1 {
                        return None;
                    }
                }
            }
        }
        Some(OffsetState { offsets })
    }
}

/// Offset state of a tuple of words' cells, or `None` if the cells are
/// already pairwise separated (the tuple is empty upstream).
pub fn initial_state(ifs: &GridIfs, words: &[Word]) -> Result<Option<OffsetState>, ContactError> {
    let cells = tuple_cells(ifs, words)?;
    let refs: Vec<&[i64]> = cells.iter().map(|c| c.corner.as_slice()).collect();
    Ok(OffsetState::from_corners(&refs))
}

fn tuple_cells(ifs: &GridIfs, words: &[Word]) -> Result<Vec<crate::ifs::Cell>, ContactError> {
    if words.is_empty() {
        return Err(ContactError::EmptyTuple);
    }
    let depth = words[0].depth();
    let start = words[0].start_level;
    for w in words {
        if w.depth() != depth {
            return Err(ContactError::MismatchedDepths);
        }
        if w.start_level != start {
            return Err(ContactError::MismatchedStart {
                expected: start,
                got: w.start_level,
            });
        }
    }
    words
        .iter()
        .map(|w| ifs.word_cell(w).map_err(ContactError::from))
        .collect()
}

/// All states reachable from `state` in one refinement step over the given
/// level: choose one digit per piece, renormalize, keep the tuples whose
/// pairwise differences stay within one cell.
pub fn transitions(ifs: &GridIfs, state: &OffsetState, level: &LevelSet) -> Vec<OffsetState> {
    let d = ifs.dim();
    let arity = state.offsets.len();
    let mut out: Vec<OffsetState> = Vec::new();
    let mut digits = vec![0 as DigitId; arity];
    enumerate_digit_tuples(ifs, level, state, 0, &mut digits, &mut |digits| {
        let mut offsets = Vec::with_capacity(arity);
        let base: Vec<i32> = (0..d)
            .map(|a| {
                state.offsets[0][a] * ifs.subdiv()[a] as i32
                    + ifs.digit_component(digits[0], a) as i32
            })
            .collect();
        for (p, &id) in digits.iter().enumerate() {
            let o: Vec<i32> = (0..d)
                .map(|a| {
                    state.offsets[p][a] * ifs.subdiv()[a] as i32 + ifs.digit_component(id, a) as i32
                        - base[a]
                })
                .collect();
            offsets.push(o);
        }
        let st = OffsetState { offsets };
        if !out.contains(&st) {
            out.push(st);
        }
    });
    out
}

/// Enumerates digit assignments keeping all child positions within a unit
/// window, with per-axis min/max pruning as slots are filled.
fn enumerate_digit_tuples(
    ifs: &GridIfs,
    level: &LevelSet,
    state: &OffsetState,
    slot: usize,
    digits: &mut [DigitId],
    emit: &mut dyn FnMut(&[DigitId]),
) {
    fn rec(
        ifs: &GridIfs,
        level: &LevelSet,
        state: &OffsetState,
        slot: usize,
        digits: &mut [DigitId],
        mins: &mut [i32],
        maxs: &mut [i32],
        emit: &mut dyn FnMut(&[DigitId]),
    ) {
        if slot == digits.len() {
            emit(digits);
            return;
        }
        let d = ifs.dim();
        'digit: for &id in level.digits() {
            let mut pos = [0i32; 8];
            for a in 0..d {
                pos[a] = state.offsets[slot][a] * ifs.subdiv()[a] as i32
                    + ifs.digit_component(id, a) as i32;
                let lo = if slot == 0 {
                    pos[a]
                } else {
                    mins[a].min(pos[a])
                };
                let hi = if slot == 0 {
                    pos[a]
                } else {
                    maxs[a].max(pos[a])
                };
                if hi - lo > 1 {
                    continue 'digit;
                }
            }
            let saved_min: Vec<i32> = mins.to_vec();
            let saved_max: Vec<i32> = maxs.to_vec();
            for a in 0..d {
                if slot == 0 {
                    mins[a] = pos[a];
                    maxs[a] = pos[a];
                } else {
                    mins[a] = mins[a].min(pos[a]);
                    maxs[a] = maxs[a].max(pos[a]);
                }
            }
            digits[slot] = id;
            rec(ifs, level, state, slot + 1, digits, mins, maxs, emit);
            mins.copy_from_slice(&saved_min);
            maxs.copy_from_slice(&saved_max);
        }
    }
    let d = ifs.dim();
    let mut mins = vec![0i32; d];
    let mut maxs = vec![0i32; d];
    rec(ifs, level, state, slot, digits, &mut mins, &mut maxs, emit);
}

/// Canonical automaton state: positions translated so the per-axis minimum is
/// zero (hence all in `{0,1}^d`, packed as bitmasks) and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CanonState {
    masks: Vec<u8>,
}

/// Canonicalizes integer positions; returns the state and, for each input
/// slot, its slot in the sorted canonical order. `None` if some axis spans
/// more than one cell.
fn canonicalize(positions: &[Vec<i32>]) -> Option<(CanonState, Vec<u8>)> {
    let d = positions[0].len();
    let mut mins = positions[0].clone();
    let mut maxs = positions[0].clone();
    for p in positions.iter().skip(1) {
        for a in 0..d {
            mins[a] = mins[a].min(p[a]);
            maxs[a] = maxs[a].max(p[a]);
            if maxs[a] - mins[a] > 1 {
                return None;
            }
        }
    }
    let masks_raw: Vec<u8> = positions
        .iter()
        .map(|p| {
            let mut m = 0u8;
            for a in 0..d {
                if p[a] - mins[a] == 1 {
                    m |= 1 << a;
                }
            }
            m
        })
        .collect();
    let mut order: Vec<u8> = (0..masks_raw.len() as u8).collect();
    order.sort_by_key(|&i| masks_raw[i as usize]);
    let mut perm = vec![0u8; masks_raw.len()];
    for (sorted_slot, &orig) in order.iter().enumerate() {
        perm[orig as usize] = sorted_slot as u8;
    }
    let masks: Vec<u8> = order.iter().map(|&i| masks_raw[i as usize]).collect();
    Some((CanonState { masks }, perm))
}

#[derive(Debug, Clone)]
struct Transition {
    child: u32,
    /// Digit per parent canonical slot.
    digits: Vec<DigitId>,
    /// Child canonical slot of each parent slot.
    perm: Vec<u8>,
}

/// Survival classification of a state at the start of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateOutcome {
    /// An infinite run exists: the tuple intersection is non-empty.
    Runs,
    /// Survives to the truncated horizon; nothing more can be said.
    PersistsToHorizon,
    /// All runs die: the outer approximations separate at a finite depth.
    Dies,
}

struct ArityTable {
    arity: usize,
    ids: HashMap<CanonState, u32>,
    /// Transitions per level token, indexed `[state]`.
    trans: HashMap<LevelToken, Vec<Vec<Transition>>>,
    /// `[phase][state]` survival on the cycle (empty for `Truncate`).
    cycle_alive: Vec<Vec<bool>>,
    /// `[pos][state]` survival through the prefix; index `prefix.len()` is the
    /// cycle entry (or the horizon marker under `Truncate`).
    prefix_alive: Vec<Vec<bool>>,
}

/// Shared read-only decision tables for all tuples of pieces `f_w(J_start)`,
/// for one system and one start level.
pub struct IntersectionEngine<'a> {
    ifs: &'a GridIfs,
    start: usize,
    schedule: LevelSchedule,
    tables: Vec<Option<ArityTable>>,
}

impl<'a> IntersectionEngine<'a> {
    /// Builds tables for tuple arities `2..=max_arity`. The arity cap is
    /// `2^d`; requests beyond it fail.
    pub fn new(ifs: &'a GridIfs, start: usize, max_arity: usize) -> Result<Self, ContactError> {
        let cap = 1usize << ifs.dim();
        if max_arity > cap {
            return Err(ContactError::ArityAboveCap {
                arity: max_arity,
                cap,
            });
        }
        let schedule = ifs.schedule_from(start);
        let mut engine = IntersectionEngine {
            ifs,
            start,
            schedule,
            tables: Vec::new(),
        };
        engine.tables = (0..=max_arity)
            .map(|a| {
                if a >= 2 {
                    Some(engine.build_table(a))
                } else {
                    None
                }
            })
            .collect();
        Ok(engine)
    }

    pub fn start_level(&self) -> usize {
        self.start
    }

    fn build_table(&self, arity: usize) -> ArityTable {
        let d = self.ifs.dim();
        // All sorted arity-subsets of {0,1}^d whose per-axis minimum is zero.
        let mut states = Vec::new();
        let mut ids = HashMap::new();
        let total = 1u16 << d;
        let mut subset: Vec<u8> = Vec::new();
        fn gen(
            from: u8,
            total: u8,
            left: usize,
            subset: &mut Vec<u8>,
            d: usize,
            states: &mut Vec<CanonState>,
            ids: &mut HashMap<CanonState, u32>,
        ) {
            if left == 0 {
                for a in 0..d {
                    if subset.iter().all(|m| m & (1 << a) != 0) {
                        return;
                    }
                }
                let st = CanonState {
                    masks: subset.clone(),
                };
                ids.insert(st.clone(), states.len() as u32);
                states.push(st);
                return;
            }
            for m in from..total {
                subset.push(m);
                gen(m + 1, total, left - 1, subset, d, states, ids);
                subset.pop();
            }
        }
        gen(0, total as u8, arity, &mut subset, d, &mut states, &mut ids);

        // Transition lists per distinct level token in the schedule.
        let mut trans: HashMap<LevelToken, Vec<Vec<Transition>>> = HashMap::new();
        for tok in self
            .schedule
            .prefix
            .iter()
            .chain(self.schedule.cycle.iter())
        {
            if trans.contains_key(tok) {
                continue;
            }
            let level = self.ifs.level_set(*tok);
            let per_state: Vec<Vec<Transition>> = states
                .iter()
                .map(|st| self.state_transitions(st, level, &ids))
                .collect();
            trans.insert(*tok, per_state);
        }

        let nstates = states.len();
        let p = self.schedule.cycle.len();
        let mut cycle_alive: Vec<Vec<bool>> = vec![vec![true; nstates]; p];
        if p > 0 {
            loop {
                let mut changed = false;
                for phase in 0..p {
                    let tok = self.schedule.cycle[phase];
                    let next = (phase + 1) % p;
                    for s in 0..nstates {
                        if !cycle_alive[phase][s] {
                            continue;
                        }
                        let alive = trans[&tok][s]
                            .iter()
                            .any(|t| cycle_alive[next][t.child as usize]);
                        if !alive {
                            cycle_alive[phase][s] = false;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }

        let plen = self.schedule.prefix.len();
        let base = if p > 0 {
            cycle_alive[0].clone()
        } else {
            // Truncated horizon: everything that reaches this point persists.
            vec![true; nstates]
        };
        let mut prefix_alive = vec![vec![false; nstates]; plen + 1];
        prefix_alive[plen] = base;
        for pos in (0..plen).rev() {
            let tok = self.schedule.prefix[pos];
            for s in 0..nstates {
                prefix_alive[pos][s] = trans[&tok][s]
                    .iter()
                    .any(|t| prefix_alive[pos + 1][t.child as usize]);
            }
        }

        ArityTable {
            arity,
            ids,
            trans,
            cycle_alive,
            prefix_alive,
        }
    }

    fn state_transitions(
        &self,
        state: &CanonState,
        level: &LevelSet,
        ids: &HashMap<CanonState, u32>,
    ) -> Vec<Transition> {
        let d = self.ifs.dim();
        let arity = state.masks.len();
        let as_offsets = OffsetState {
            offsets: state
                .masks
                .iter()
                .map(|&m| (0..d).map(|a| ((m >> a) & 1) as i32).collect())
                .collect(),
        };
        let mut out: Vec<Transition> = Vec::new();
        let mut seen: HashMap<u32, ()> = HashMap::new();
        let mut digits = vec![0 as DigitId; arity];
        enumerate_digit_tuples(
            self.ifs,
            level,
            &as_offsets,
            0,
            &mut digits,
            &mut |digits| {
                let positions: Vec<Vec<i32>> = (0..arity)
                    .map(|p| {
                        (0..d)
                            .map(|a| {
                                as_offsets.offsets[p][a] * self.ifs.subdiv()[a] as i32
                                    + self.ifs.digit_component(digits[p], a) as i32
                            })
                            .collect()
                    })
                    .collect();
                let (canon, perm) = canonicalize(&positions).expect("enumeration keeps the window");
                let child = ids[&canon];
                if seen.insert(child, ()).is_none() {
                    out.push(Transition {
                        child,
                        digits: digits.to_vec(),
                        perm,
                    });
                }
            },
        );
        out
    }

    fn table(&self, arity: usize) -> Option<&ArityTable> {
        self.tables.get(arity).and_then(|t| t.as_ref())
    }

    /// Survival outcome for a tuple of distinct equal-depth cells given by
    /// their corners, or `None` when they are separated outright.
    pub fn outcome_for_corners(&self, corners: &[&[i64]]) -> Option<StateOutcome> {
        let positions: Vec<Vec<i32>> = {
            let d = corners[0].len();
            corners
                .iter()
                .map(|c| (0..d).map(|a| (c[a] - corners[0][a]) as i32).collect())
                .collect()
        };
        let (canon, _) = canonicalize(&positions)?;
        let table = self
            .table(corners.len())
            .expect("table built for this arity");
        let id = table.ids[&canon] as usize;
        Some(self.state_outcome(table, id))
    }

    fn state_outcome(&self, table: &ArityTable, state: usize) -> StateOutcome {
        let exact = !matches!(self.ifs.tail(), Tail::Truncate);
        if table.prefix_alive[0][state] {
            if exact {
                StateOutcome::Runs
            } else {
                StateOutcome::PersistsToHorizon
            }
        } else {
            StateOutcome::Dies
        }
    }

    /// Outcome for a tuple already in window form: sorted position bitmasks
    /// with per-axis minimum zero (as produced by window enumeration).
    pub fn outcome_for_masks(&self, masks: &[u8]) -> StateOutcome {
        let table = self.table(masks.len()).expect("table built for this arity");
        let id = table.ids[&CanonState {
            masks: masks.to_vec(),
        }] as usize;
        self.state_outcome(table, id)
    }

    /// Per-offset pair outcomes, indexed by the offset of the second cell
    /// relative to the first (each coordinate in `{-1,0,1}`).
    pub fn pair_lookup(&self) -> PairLookup {
        let d = self.ifs.dim();
        let size = 3usize.pow(d as u32);
        let mut outcomes = vec![None; size];
        for code in 0..size {
            let mut rest = code;
            let mut delta = vec![0i32; d];
            for a in 0..d {
                delta[a] = (rest % 3) as i32 - 1;
                rest /= 3;
            }
            if delta.iter().all(|&x| x == 0) {
                continue;
            }
            let positions = vec![vec![0; d], delta];
            if let Some((canon, _)) = canonicalize(&positions) {
                let table = self.table(2).expect("pair table");
                let id = table.ids[&canon] as usize;
                outcomes[code] = Some(self.state_outcome(table, id));
            }
        }
        PairLookup { dim: d, outcomes }
    }

    /// Smallest extension depth at which the outer approximations of a dead
    /// tuple separate (one more than the longest surviving run).
    fn death_depth(&self, table: &ArityTable, state: usize) -> usize {
        let mut memo: HashMap<(u32, u32), u32> = HashMap::new();
        // Longest finite run from (state, pos); positions >= plen wrap in the
        // cycle. Dead states cannot revisit a (state, phase) pair, so this
        // recursion is well-founded.
        fn longest(
            engine: &IntersectionEngine<'_>,
            table: &ArityTable,
            state: usize,
            pos: usize,
            memo: &mut HashMap<(u32, u32), u32>,
        ) -> u32 {
            let plen = engine.schedule.prefix.len();
            let p = engine.schedule.cycle.len();
            let key = (state as u32, pos as u32);
            if let Some(&v) = memo.get(&key) {
                return v;
            }
            let tok = if pos < plen {
                engine.schedule.prefix[pos]
            } else if p > 0 {
                engine.schedule.cycle[(pos - plen) % p]
            } else {
                return 0; // truncated horizon
            };
            let next_pos = if pos < plen {
                pos + 1
            } else {
                plen + ((pos - plen) + 1) % p
            };
            let mut best = 0u32;
            for t in &table.trans[&tok][state] {
                let len = 1 + longest(engine, table, t.child as usize, next_pos, memo);
                best = best.max(len);
            }
            memo.insert(key, best);
            best
        }
        1 + longest(self, table, state, 0, &mut memo) as usize
    }
}

/// Pair survival outcomes indexed by lattice offset.
pub struct PairLookup {
    dim: usize,
    outcomes: Vec<Option<StateOutcome>>,
}

impl PairLookup {
    /// Outcome for the offset `delta` (second corner minus first); `None`
    /// when already separated.
    pub fn outcome(&self, delta: &[i64]) -> Option<StateOutcome> {
        let mut code = 0usize;
        let mut mul = 1usize;
        for a in 0..self.dim {
            if delta[a].abs() > 1 {
                return None;
            }
            code += ((delta[a] + 1) as usize) * mul;
            mul *= 3;
        }
        self.outcomes[code]
    }
}

/// Eventually periodic digit stream coding one word's side of a witness,
/// starting at `start_level`. An empty cycle marks truncation at the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessStream {
    pub start_level: usize,
    pub prefix: Vec<DigitId>,
    pub cycle: Vec<DigitId>,
}

impl WitnessStream {
    /// Exact coordinates of the coded point.
    pub fn coordinates(&self, ifs: &GridIfs) -> Vec<BigRational> {
        let d = ifs.dim();
        (0..d)
            .map(|a| {
                let n = BigInt::from(ifs.subdiv()[a]);
                let mut acc = BigRational::zero();
                let mut scale = BigRational::one();
                for &id in &self.prefix {
                    scale /= BigRational::from(n.clone());
                    acc += &scale * BigRational::from(BigInt::from(ifs.digit_component(id, a)));
                }
                if !self.cycle.is_empty() {
                    let mut num = BigInt::zero();
                    for &id in &self.cycle {
                        num = num * n.clone() + BigInt::from(ifs.digit_component(id, a));
                    }
                    let den = n.pow(self.cycle.len() as u32) - BigInt::one();
                    acc += scale * BigRational::new(num, den);
                }
                acc
            })
            .collect()
    }

    /// Checks every digit against its level's index set.
    pub fn digits_valid(&self, ifs: &GridIfs) -> bool {
        let mut t = self.start_level;
        for &id in &self.prefix {
            match ifs.level(t) {
                Some(level) if level.contains(id) => t += 1,
                _ => return false,
            }
        }
        for round in 0..2 {
            let mut tt = t + round * self.cycle.len();
            for &id in &self.cycle {
                match ifs.level(tt) {
                    Some(level) if level.contains(id) => tt += 1,
                    _ => return false,
                }
            }
        }
        true
    }
}

/// A common point of the tuple, one full coding per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactWitness {
    pub streams: Vec<WitnessStream>,
}

/// Three-valued intersection verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// The pieces share a point; the witness codes one.
    Nonempty(ContactWitness),
    /// The depth-`certified_depth` outer boxes are already disjoint.
    Empty { certified_depth: usize },
    /// Still touching at the truncated horizon.
    Unknown { persisted_depth: usize },
}

impl Verdict {
    pub fn is_nonempty(&self) -> bool {
        matches!(self, Verdict::Nonempty(_))
    }
}

/// Decides `⋂_p f_{w_p}(J_{j+depth}) ≠ ∅` for words starting at level `j`.
///
/// Exact under `Full` and `Periodic` tails. Under `Truncate`, tuples that
/// survive to the horizon come back `Unknown`.
pub fn decide_tuple_intersection(
    ifs: &GridIfs,
    j: usize,
    words: &[Word],
) -> Result<Verdict, ContactError> {
    if words.is_empty() {
        return Err(ContactError::EmptyTuple);
    }
    for w in words {
        if w.start_level != j {
            return Err(ContactError::MismatchedStart {
                expected: j,
                got: w.start_level,
            });
        }
    }
    let cells = tuple_cells(ifs, words)?;
    let depth = words[0].depth();
    let start = j + depth;

    // Distinct pieces only; duplicates share their witness stream.
    let mut uniq: Vec<usize> = Vec::new();
    let mut owner: Vec<usize> = Vec::with_capacity(words.len());
    for (i, w) in words.iter().enumerate() {
        match uniq.iter().position(|&u| words[u] == *w) {
            Some(pos) => owner.push(pos),
            None => {
                owner.push(uniq.len());
                uniq.push(i);
            }
        }
    }
    let cap = 1usize << ifs.dim();
    if uniq.len() > cap {
        return Err(ContactError::ArityAboveCap {
            arity: uniq.len(),
            cap,
        });
    }

    if uniq.len() == 1 {
        let stream = greedy_stream(ifs, words[0].clone());
        let streams = owner.iter().map(|_| stream.clone()).collect();
        return Ok(Verdict::Nonempty(ContactWitness { streams }));
    }

    let positions: Vec<Vec<i32>> = {
        let d = ifs.dim();
        uniq.iter()
            .map(|&i| {
                (0..d)
                    .map(|a| (cells[i].corner[a] - cells[uniq[0]].corner[a]) as i32)
                    .collect()
            })
            .collect()
    };
    let (canon, perm) = match canonicalize(&positions) {
        Some(v) => v,
        None => return Ok(Verdict::Empty { certified_depth: 0 }),
    };

    let engine = IntersectionEngine::new(ifs, start, uniq.len())?;
    let table = engine.table(uniq.len()).unwrap();
    let id = table.ids[&canon] as usize;
    match engine.state_outcome(table, id) {
        StateOutcome::Dies => Ok(Verdict::Empty {
            certified_depth: engine.death_depth(table, id),
        }),
        StateOutcome::PersistsToHorizon => Ok(Verdict::Unknown {
            persisted_depth: engine.schedule.prefix.len(),
        }),
        StateOutcome::Runs => {
            let streams_uniq = extract_witness(&engine, table, id, &perm, words, &uniq);
            let streams = owner.iter().map(|&o| streams_uniq[o].clone()).collect();
            Ok(Verdict::Nonempty(ContactWitness { streams }))
        }
    }
}

/// Lexicographically smallest eventually periodic coding of a point in
/// `f_word(J)`; used for the trivial single-piece verdict.
fn greedy_stream(ifs: &GridIfs, word: Word) -> WitnessStream {
    let start = word.start_level + word.depth();
    let schedule = ifs.schedule_from(start);
    let mut prefix = word.digits.clone();
    for tok in &schedule.prefix {
        prefix.push(ifs.level_set(*tok).digits()[0]);
    }
    let cycle: Vec<DigitId> = schedule
        .cycle
        .iter()
        .map(|tok| ifs.level_set(*tok).digits()[0])
        .collect();
    WitnessStream {
        start_level: word.start_level,
        prefix,
        cycle,
    }
}

/// Walks alive states greedily, splitting the walk into a lasso once a
/// `(state, phase, slot-assignment)` triple repeats inside the cycle region.
fn extract_witness(
    engine: &IntersectionEngine<'_>,
    table: &ArityTable,
    initial: usize,
    initial_perm: &[u8],
    words: &[Word],
    uniq: &[usize],
) -> Vec<WitnessStream> {
    let plen = engine.schedule.prefix.len();
    let p = engine.schedule.cycle.len();
    debug_assert!(p > 0, "witnesses require an eventually periodic tail");
    let arity = table.arity;

    // slot_of[u] = canonical slot currently carrying unique piece u.
    let mut slot_of: Vec<u8> = initial_perm.to_vec();
    let mut state = initial;
    let mut pos = 0usize;
    let mut steps: Vec<Vec<DigitId>> = Vec::new(); // digits per unique piece
    let mut seen: HashMap<(usize, usize, Vec<u8>), usize> = HashMap::new();
    let cut;
    loop {
        if pos >= plen {
            let phase = (pos - plen) % p;
            let key = (state, phase, slot_of.clone());
            if let Some(&first) = seen.get(&key) {
                cut = first;
                break;
            }
            seen.insert(key, steps.len());
        }
        let tok = if pos < plen {
            engine.schedule.prefix[pos]
        } else {
            engine.schedule.cycle[(pos - plen) % p]
        };
        let next_alive: &[bool] = if pos + 1 < plen {
            &table.prefix_alive[pos + 1]
        } else if pos + 1 == plen {
            &table.prefix_alive[plen]
        } else {
            &table.cycle_alive[((pos - plen) + 1) % p]
        };
        let tr = table.trans[&tok][state]
            .iter()
            .find(|t| next_alive[t.child as usize])
            .expect("alive state has an alive successor");
        steps.push((0..arity).map(|u| tr.digits[slot_of[u] as usize]).collect());
        for u in 0..arity {
            slot_of[u] = tr.perm[slot_of[u] as usize];
        }
        state = tr.child as usize;
        pos += 1;
    }

    (0..arity)
        .map(|u| {
            let w = &words[uniq[u]];
            let mut prefix = w.digits.clone();
            for step in &steps[..cut] {
                prefix.push(step[u]);
            }
            let cycle: Vec<DigitId> = steps[cut..].iter().map(|s| s[u]).collect();
            WitnessStream {
                start_level: w.start_level,
                prefix,
                cycle,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::Tail;

    fn word(ifs: &GridIfs, start: usize, digits: &[&[u32]]) -> Word {
        Word::new(
            start,
            digits.iter().map(|d| ifs.digit_id(d).unwrap()).collect(),
        )
    }

    #[test]
    fn initial_state_cases() {
        let ifs = GridIfs::full(vec![3]).unwrap();
        let s = initial_state(&ifs, &[word(&ifs, 1, &[&[0]]), word(&ifs, 1, &[&[1]])])
            .unwrap()
            .unwrap();
        assert_eq!(s.offsets, vec![vec![0], vec![1]]);

        let none = initial_state(&ifs, &[word(&ifs, 1, &[&[0]]), word(&ifs, 1, &[&[2]])]).unwrap();
        assert!(none.is_none());

        let sq = GridIfs::full(vec![2, 2]).unwrap();
        let s = initial_state(&sq, &[word(&sq, 1, &[&[0, 0]]), word(&sq, 1, &[&[1, 1]])])
            .unwrap()
            .unwrap();
        assert_eq!(s.offsets[1], vec![1, 1]);
    }

    #[test]
    fn transition_enumeration_matches_hand_count() {
        // d=1, n=3, state (0;+1): of the 9 digit pairs only (2,0) keeps the
        // offset within one cell, giving (0;+1) again.
        let ifs = GridIfs::full(vec![3]).unwrap();
        let state = OffsetState {
            offsets: vec![vec![0], vec![1]],
        };
        let succ = transitions(&ifs, &state, ifs.level(1).unwrap());
        assert_eq!(
            succ,
            vec![OffsetState {
                offsets: vec![vec![0], vec![1]]
            }]
        );

        // Digit 2 unavailable: no successor.
        let restricted = GridIfs::autonomous(vec![3], vec![vec![0], vec![1]]).unwrap();
        let succ = transitions(&restricted, &state, restricted.level(1).unwrap());
        assert!(succ.is_empty());

        // d=2 full, corner contact state survives via the unique digit pair.
        let sq = GridIfs::full(vec![2, 2]).unwrap();
        let corner = OffsetState {
            offsets: vec![vec![0, 0], vec![1, 1]],
        };
        let succ = transitions(&sq, &corner, sq.level(1).unwrap());
        assert_eq!(succ, vec![corner.clone()]);
    }

    #[test]
    fn touching_thirds_meet() {
        let ifs = GridIfs::full(vec![3]).unwrap();
        let verdict =
            decide_tuple_intersection(&ifs, 1, &[word(&ifs, 1, &[&[0]]), word(&ifs, 1, &[&[1]])])
                .unwrap();
        match verdict {
            Verdict::Nonempty(w) => {
                let a = w.streams[0].coordinates(&ifs);
                let b = w.streams[1].coordinates(&ifs);
                assert_eq!(a, b);
                assert_eq!(a[0], BigRational::new(BigInt::from(1), BigInt::from(3)));
                assert!(w.streams[0].digits_valid(&ifs));
                assert!(w.streams[1].digits_valid(&ifs));
            }
            v => panic!("expected Nonempty, got {v:?}"),
        }
    }

    #[test]
    fn cantor_gap_is_empty_at_depth_zero() {
        let ifs = GridIfs::autonomous(vec![3], vec![vec![0], vec![2]]).unwrap();
        let verdict =
            decide_tuple_intersection(&ifs, 1, &[word(&ifs, 1, &[&[0]]), word(&ifs, 1, &[&[2]])])
                .unwrap();
        assert_eq!(verdict, Verdict::Empty { certified_depth: 0 });
    }

    #[test]
    fn corner_meeting_point_in_half_grid() {
        // 2×2 with (0,0) removed: the cells (1,0) and (0,1) still meet at the
        // center, witnessed by 0.0111…₂ = 0.1₂ per coordinate.
        let ifs =
            GridIfs::autonomous(vec![2, 2], vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let verdict = decide_tuple_intersection(
            &ifs,
            1,
            &[word(&ifs, 1, &[&[1, 0]]), word(&ifs, 1, &[&[0, 1]])],
        )
        .unwrap();
        match verdict {
            Verdict::Nonempty(w) => {
                let a = w.streams[0].coordinates(&ifs);
                let b = w.streams[1].coordinates(&ifs);
                assert_eq!(a, b);
                let half = BigRational::new(BigInt::from(1), BigInt::from(2));
                assert_eq!(a, vec![half.clone(), half]);
            }
            v => panic!("expected Nonempty, got {v:?}"),
        }
    }

    #[test]
    fn cantor_adjacent_pieces_separate_at_positive_depth() {
        // In the middle-thirds system the pieces [0,1/3] and [2/3,1] of J are
        // cells 0 and 2; cells 0 and 1 touch as boxes but the digit needed to
        // hold the contact is missing, so the automaton certifies emptiness
        // one level down.
        let ifs = GridIfs::autonomous(vec![3], vec![vec![0], vec![1]]).unwrap();
        let verdict =
            decide_tuple_intersection(&ifs, 1, &[word(&ifs, 1, &[&[0]]), word(&ifs, 1, &[&[1]])])
                .unwrap();
        assert_eq!(verdict, Verdict::Empty { certified_depth: 1 });
    }

    #[test]
    fn quadruple_center_contact_in_full_square() {
        let ifs = GridIfs::full(vec![2, 2]).unwrap();
        let words: Vec<Word> = [[0u32, 0], [1, 0], [0, 1], [1, 1]]
            .iter()
            .map(|d| word(&ifs, 1, &[&d[..]]))
            .collect();
        let verdict = decide_tuple_intersection(&ifs, 1, &words).unwrap();
        match verdict {
            Verdict::Nonempty(w) => {
                let half = BigRational::new(BigInt::from(1), BigInt::from(2));
                for s in &w.streams {
                    assert_eq!(s.coordinates(&ifs), vec![half.clone(), half.clone()]);
                }
            }
            v => panic!("expected Nonempty, got {v:?}"),
        }
    }

    #[test]
    fn arity_cap_enforced() {
        let ifs = GridIfs::full(vec![3]).unwrap();
        let words: Vec<Word> = (0..3).map(|i| word(&ifs, 1, &[&[i]])).collect();
        let err = decide_tuple_intersection(&ifs, 1, &words).unwrap_err();
        assert_eq!(err, ContactError::ArityAboveCap { arity: 3, cap: 2 });
    }

    #[test]
    fn truncate_reports_unknown() {
        let ifs = GridIfs::new(
            vec![2],
            vec![vec![vec![0], vec![1]], vec![vec![0], vec![1]]],
            Tail::Truncate,
        )
        .unwrap();
        let verdict =
            decide_tuple_intersection(&ifs, 1, &[word(&ifs, 1, &[&[0]]), word(&ifs, 1, &[&[1]])])
                .unwrap();
        assert_eq!(verdict, Verdict::Unknown { persisted_depth: 1 });
    }

    #[test]
    fn phase_dependent_contact_dies_at_the_right_depth() {
        // Levels alternate full / {0,1}. Holding the contact between cells 0
        // and 1 requires the digit pair (2,0) at every step, so the run dies
        // exactly when the lean level arrives: depth 1 from an odd start,
        // depth 2 from an even start.
        let ifs = GridIfs::new(
            vec![3],
            vec![vec![vec![0], vec![1], vec![2]], vec![vec![0], vec![1]]],
            Tail::Periodic(2),
        )
        .unwrap();
        let pair = |j: usize| {
            let words = [Word::new(j, vec![0]), Word::new(j, vec![1])];
            decide_tuple_intersection(&ifs, j, &words).unwrap()
        };
        assert_eq!(pair(1), Verdict::Empty { certified_depth: 1 });
        assert_eq!(pair(2), Verdict::Empty { certified_depth: 2 });
    }

    #[test]
    fn identical_words_trivially_nonempty() {
        let ifs = GridIfs::autonomous(vec![3], vec![vec![0], vec![2]]).unwrap();
        let w = word(&ifs, 1, &[&[2]]);
        let verdict = decide_tuple_intersection(&ifs, 1, &[w.clone(), w]).unwrap();
        assert!(verdict.is_nonempty());
    }

    #[test]
    fn pruning_is_monotone() {
        // Reference greatest-fixed-point on the product of offset states and
        // cycle phases, using the public transition enumeration: the alive
        // set must shrink monotonically to the fixpoint.
        let ifs = GridIfs::new(
            vec![2, 2],
            vec![
                vec![vec![1, 0], vec![0, 1], vec![1, 1]],
                vec![vec![0, 0], vec![0, 1], vec![1, 1]],
            ],
            Tail::Periodic(2),
        )
        .unwrap();
        // Collect all pair states reachable from all initial offsets.
        let mut states: Vec<OffsetState> = Vec::new();
        for dx in -1i32..=1 {
            for dy in -1i32..=1 {
                if (dx, dy) == (0, 0) {
                    continue;
                }
                states.push(OffsetState {
                    offsets: vec![vec![0, 0], vec![dx, dy]],
                });
            }
        }
        let mut frontier = states.clone();
        while let Some(s) = frontier.pop() {
            for t in 1..=2 {
                for succ in transitions(&ifs, &s, ifs.level(t).unwrap()) {
                    if !states.contains(&succ) {
                        states.push(succ.clone());
                        frontier.push(succ);
                    }
                }
            }
        }
        let phases = 2usize;
        let mut alive: Vec<Vec<bool>> = vec![vec![true; states.len()]; phases];
        let mut sizes = Vec::new();
        loop {
            let count: usize = alive.iter().map(|v| v.iter().filter(|b| **b).count()).sum();
            sizes.push(count);
            let mut changed = false;
            for phase in 0..phases {
                let level = ifs.level(phase + 1).unwrap();
                for (si, s) in states.iter().enumerate() {
                    if !alive[phase][si] {
                        continue;
                    }
                    let ok = transitions(&ifs, s, level).into_iter().any(|succ| {
                        let id = states.iter().position(|x| *x == succ).unwrap();
                        alive[(phase + 1) % phases][id]
                    });
                    if !ok {
                        alive[phase][si] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for w in sizes.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // Cross-check a few verdicts against the engine.
        let engine = IntersectionEngine::new(&ifs, 1, 2).unwrap();
        let lookup = engine.pair_lookup();
        for (si, s) in states.iter().enumerate() {
            if s.offsets[0] != vec![0, 0] {
                continue;
            }
            let delta: Vec<i64> = s.offsets[1].iter().map(|&x| x as i64).collect();
            if let Some(outcome) = lookup.outcome(&delta) {
                let expected = if alive[0][si] {
                    StateOutcome::Runs
                } else {
                    StateOutcome::Dies
                };
                assert_eq!(outcome, expected, "offset {delta:?}");
            }
        }
    }
}
