//! Nerve complexes of the level-`j..k` coverings, the digit-dropping and
//! prefix-embedding simplicial maps, prefix subcomplexes, and component
//! bookkeeping.
//!
//! Vertices of `N_{j,k}` are the words over levels `j..k-1`, kept implicitly:
//! a vertex index is the mixed-radix number of its digit positions, so no
//! per-vertex storage is needed. Candidate simplices are found by spatial
//! hashing on depth-`k-j` lattice corners (cells can only meet when their
//! offsets are within one per axis), and each candidate is settled by the
//! offset automaton.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use num_rational::BigRational;

use crate::contact::affine::{affine1d_oracle, Affine1dSystem, AffineError, AffineVerdict};
use crate::contact::{ContactError, IntersectionEngine, StateOutcome};
use crate::ifs::{DigitId, GridIfs, IfsError, Tail, Word};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NerveError {
    #[error(transparent)]
    Ifs(#[from] IfsError),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error("invalid level range j={j}, k={k}")]
    InvalidRange { j: usize, k: usize },
    #[error("nerve would have {cells} cells, over the budget {budget}")]
    BudgetExceeded { cells: u128, budget: u64 },
    #[error("requested dimension {requested} exceeds the geometric cap {cap}")]
    DimAboveCap { requested: usize, cap: usize },
    #[error("complexes are not at matching levels")]
    LevelMismatch,
    #[error("prefix word is not valid for the system")]
    InvalidPrefix,
    #[error("map is not simplicial")]
    NotSimplicial,
}

/// How unresolved intersection verdicts are treated when a truncated tail
/// makes exactness impossible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownPolicy {
    /// Include possibly-empty contacts: an outer nerve.
    Outer,
    /// Drop them: an inner nerve.
    Inner,
}

/// What the simplex set of a built complex means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictMode {
    /// Every simplex decision was exact.
    Exact,
    /// Unknown contacts were included.
    Outer,
    /// Unknown contacts were dropped.
    Inner,
}

#[derive(Debug, Clone)]
pub struct NerveOptions {
    /// Largest simplex dimension to compute; defaults to the geometric cap
    /// `2^d - 1`.
    pub maxdim: Option<usize>,
    pub unknown_policy: UnknownPolicy,
    /// Upper bound on the vertex count.
    pub cell_budget: u64,
    /// Cap the dimension at 1 automatically when `d = 2` and the no-corner
    /// condition is proved (nerves are then graphs).
    pub auto_no_corner_cap: bool,
}

impl Default for NerveOptions {
    fn default() -> Self {
        NerveOptions {
            maxdim: None,
            unknown_policy: UnknownPolicy::Outer,
            cell_budget: 5_000_000,
            auto_no_corner_cap: true,
        }
    }
}

/// Simplices of one dimension, flattened with stride `arity`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimplexList {
    pub arity: usize,
    pub flat: Vec<u32>,
}

impl SimplexList {
    fn new(arity: usize) -> Self {
        SimplexList {
            arity,
            flat: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        if self.arity == 0 {
            0
        } else {
            self.flat.len() / self.arity
        }
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.flat.chunks_exact(self.arity.max(1))
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.flat[i * self.arity..(i + 1) * self.arity]
    }

    fn push(&mut self, simplex: &[u32]) {
        debug_assert_eq!(simplex.len(), self.arity);
        self.flat.extend_from_slice(simplex);
    }

    /// Sorts the tuples lexicographically (each tuple is already sorted).
    fn normalize(&mut self) {
        let arity = self.arity;
        let mut tuples: Vec<&[u32]> = self.flat.chunks_exact(arity).collect();
        tuples.sort_unstable();
        tuples.dedup();
        let mut flat = Vec::with_capacity(tuples.len() * arity);
        for t in tuples {
            flat.extend_from_slice(t);
        }
        self.flat = flat;
    }

    pub fn contains(&self, simplex: &[u32]) -> bool {
        if simplex.len() != self.arity || self.arity == 0 {
            return false;
        }
        let n = self.len();
        let mut lo = 0usize;
        let mut hi = n;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.get(mid) < simplex {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo < n && self.get(lo) == simplex
    }
}

/// An abstract simplicial complex over the words of levels `j..k-1`, closed
/// under faces by construction.
#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    pub j: usize,
    pub k: usize,
    /// Axis subdivisions of the grid system (empty for affine systems).
    pub subdiv: Vec<u32>,
    /// Digit ids available at each level position, in vertex enumeration
    /// order.
    pub level_digits: Vec<Vec<DigitId>>,
    vertex_count: usize,
    /// `simplices[q-1]` holds the q-simplices, q >= 1.
    simplices: Vec<SimplexList>,
    pub verdict_mode: VerdictMode,
    pub unknown_included: usize,
    pub unknown_excluded: usize,
    /// Whether the no-corner dimension cap was proved and applied.
    pub no_corner_capped: bool,
    pub maxdim_built: usize,
}

impl SimplicialComplex {
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Largest dimension with at least one simplex.
    pub fn dim(&self) -> usize {
        let mut dim = 0;
        for (i, list) in self.simplices.iter().enumerate() {
            if !list.is_empty() {
                dim = i + 1;
            }
        }
        dim
    }

    pub fn simplex_count(&self, q: usize) -> usize {
        if q == 0 {
            self.vertex_count
        } else {
            self.simplices.get(q - 1).map(|l| l.len()).unwrap_or(0)
        }
    }

    pub fn simplices(&self, q: usize) -> Option<&SimplexList> {
        if q == 0 {
            None
        } else {
            self.simplices.get(q - 1)
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = [u32; 2]> + '_ {
        self.simplices
            .first()
            .into_iter()
            .flat_map(|l| l.iter().map(|s| [s[0], s[1]]))
    }

    pub fn edge_count(&self) -> usize {
        self.simplex_count(1)
    }

    /// Σ (-1)^q (#q-simplices).
    pub fn euler_characteristic(&self) -> i64 {
        let mut chi = self.vertex_count as i64;
        for (i, list) in self.simplices.iter().enumerate() {
            let sign = if (i + 1) % 2 == 1 { -1 } else { 1 };
            chi += sign * list.len() as i64;
        }
        chi
    }

    /// Digit-list positions of a vertex, most significant (level `j`) first.
    pub fn vertex_positions(&self, v: u32) -> Vec<usize> {
        let mut rest = v as usize;
        self.level_digits
            .iter()
            .rev()
            .map(|digits| {
                let p = rest % digits.len();
                rest /= digits.len();
                p
            })
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect()
    }

    pub fn vertex_digits(&self, v: u32) -> Vec<DigitId> {
        self.vertex_positions(v)
            .into_iter()
            .zip(&self.level_digits)
            .map(|(p, digits)| digits[p])
            .collect()
    }

    pub fn word(&self, v: u32) -> Word {
        Word::new(self.j, self.vertex_digits(v))
    }

    /// First-level digit of a vertex (prefix of length one).
    pub fn first_digit(&self, v: u32) -> DigitId {
        let stride: usize = self.level_digits[1..].iter().map(|d| d.len()).product();
        self.level_digits[0][v as usize / stride]
    }

    /// Lattice corner of the vertex's cell; requires a grid complex.
    pub fn grid_corner(&self, v: u32) -> Vec<i64> {
        let d = self.subdiv.len();
        let mut corner = vec![0i64; d];
        for (&p, digits) in self.vertex_positions(v).iter().zip(&self.level_digits) {
            let id = digits[p];
            for (a, c) in corner.iter_mut().enumerate() {
                let stride: u32 = self.subdiv[a + 1..].iter().product();
                let comp = (id as u32 / stride) % self.subdiv[a];
                *c = *c * self.subdiv[a] as i64 + comp as i64;
            }
        }
        corner
    }

    pub fn contains_simplex(&self, sorted_vertices: &[u32]) -> bool {
        match sorted_vertices.len() {
            0 => false,
            1 => (sorted_vertices[0] as usize) < self.vertex_count,
            q1 => self
                .simplices
                .get(q1 - 2)
                .map(|l| l.contains(sorted_vertices))
                .unwrap_or(false),
        }
    }

    /// Verifies closure under faces; quadratic in the simplex count, meant
    /// for tests and audits.
    pub fn faces_closed(&self) -> bool {
        for q1 in (2..=self.simplices.len() + 1).rev() {
            if let Some(list) = self.simplices.get(q1 - 2) {
                for s in list.iter() {
                    if q1 == 2 {
                        continue;
                    }
                    let mut face = Vec::with_capacity(q1 - 1);
                    for drop in 0..q1 {
                        face.clear();
                        face.extend(
                            s.iter()
                                .enumerate()
                                .filter(|(i, _)| *i != drop)
                                .map(|(_, &v)| v),
                        );
                        if !self.contains_simplex(&face) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Occupancy index from lattice corners to vertex ids. Uses a direct array
/// when the lattice is small enough, a hash map otherwise.
enum Occupancy {
    Direct {
        strides: Vec<i64>,
        slots: Vec<u32>,
    },
    Sparse {
        strides: Vec<i64>,
        map: HashMap<i64, u32>,
    },
}

const NO_VERTEX: u32 = u32::MAX;

impl Occupancy {
    fn strides(&self) -> &[i64] {
        match self {
            Occupancy::Direct { strides, .. } => strides,
            Occupancy::Sparse { strides, .. } => strides,
        }
    }

    #[inline]
    fn get_linear(&self, index: i64) -> u32 {
        match self {
            Occupancy::Direct { slots, .. } => slots[index as usize],
            Occupancy::Sparse { map, .. } => *map.get(&index).unwrap_or(&NO_VERTEX),
        }
    }

    fn build(scale: &[i64], corners: &[i64], d: usize, count: usize) -> Occupancy {
        let mut strides = vec![1i64; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * scale[a + 1];
        }
        let lattice: i128 = scale.iter().map(|&s| s as i128).product();
        let direct_limit = (count as i128 * 16).max(1 << 20);
        if lattice <= direct_limit && lattice <= (1 << 25) {
            let mut slots = vec![NO_VERTEX; lattice as usize];
            for v in 0..count {
                let idx: i64 = (0..d).map(|a| corners[v * d + a] * strides[a]).sum();
                slots[idx as usize] = v as u32;
            }
            Occupancy::Direct { strides, slots }
        } else {
            let mut map = HashMap::with_capacity(count * 2);
            for v in 0..count {
                let idx: i64 = (0..d).map(|a| corners[v * d + a] * strides[a]).sum();
                map.insert(idx, v as u32);
            }
            Occupancy::Sparse { strides, map }
        }
    }

    #[inline]
    fn get(&self, corner: &[i64]) -> u32 {
        match self {
            Occupancy::Direct { strides, slots } => {
                let idx: i64 = corner.iter().zip(strides).map(|(&c, &s)| c * s).sum();
                slots[idx as usize]
            }
            Occupancy::Sparse { strides, map } => {
                let idx: i64 = corner.iter().zip(strides).map(|(&c, &s)| c * s).sum();
                *map.get(&idx).unwrap_or(&NO_VERTEX)
            }
        }
    }
}

/// Builds the nerve `N_{j,k}` of a grid system.
pub fn build_nerve(
    ifs: &GridIfs,
    j: usize,
    k: usize,
    options: &NerveOptions,
) -> Result<SimplicialComplex, NerveError> {
    if j == 0 || k <= j {
        return Err(NerveError::InvalidRange { j, k });
    }
    let d = ifs.dim();
    let m = k - j;
    let cells = ifs.word_count(j, k)?;
    if cells > options.cell_budget as u128 {
        return Err(NerveError::BudgetExceeded {
            cells,
            budget: options.cell_budget,
        });
    }
    let count = cells as usize;

    let geometric_cap = (1usize << d) - 1;
    let mut maxdim = options.maxdim.unwrap_or(geometric_cap);
    if maxdim > geometric_cap {
        return Err(NerveError::DimAboveCap {
            requested: maxdim,
            cap: geometric_cap,
        });
    }
    let mut no_corner_capped = false;
    if options.auto_no_corner_cap && d == 2 && maxdim > 1 && ifs.no_corner_check() {
        maxdim = 1;
        no_corner_capped = true;
    }

    let level_digits: Vec<Vec<DigitId>> = (j..k)
        .map(|t| {
            ifs.level(t)
                .expect("checked by word_count")
                .digits()
                .to_vec()
        })
        .collect();

    // Corners in vertex enumeration order: an odometer over digit positions
    // with incremental Horner evaluation (only levels past the lowest
    // changed position are recomputed).
    let mut corners = vec![0i64; count * d];
    {
        // Per level, per digit position, the d digit components.
        let comp_table: Vec<Vec<i64>> = level_digits
            .iter()
            .map(|digits| {
                let mut t = Vec::with_capacity(digits.len() * d);
                for &id in digits {
                    for a in 0..d {
                        t.push(ifs.digit_component(id, a) as i64);
                    }
                }
                t
            })
            .collect();
        let mut pos = vec![0usize; m];
        let mut stack = vec![0i64; (m + 1) * d];
        let mut dirty = 0usize;
        for v in 0..count {
            for t in dirty..m {
                let comp = &comp_table[t][pos[t] * d..(pos[t] + 1) * d];
                for a in 0..d {
                    stack[(t + 1) * d + a] = stack[t * d + a] * ifs.subdiv()[a] as i64 + comp[a];
                }
            }
            corners[v * d..(v + 1) * d].copy_from_slice(&stack[m * d..(m + 1) * d]);
            dirty = m;
            let mut t = m;
            while t > 0 {
                t -= 1;
                pos[t] += 1;
                if pos[t] < level_digits[t].len() {
                    dirty = t;
                    break;
                }
                pos[t] = 0;
                dirty = t;
            }
        }
    }

    let scale = ifs.cell_scale(m)?;
    let exact = !matches!(ifs.tail(), Tail::Truncate);
    let mode = if exact {
        VerdictMode::Exact
    } else {
        match options.unknown_policy {
            UnknownPolicy::Outer => VerdictMode::Outer,
            UnknownPolicy::Inner => VerdictMode::Inner,
        }
    };

    let mut simplices: Vec<SimplexList> = (1..=maxdim.max(1))
        .map(|q| SimplexList::new(q + 1))
        .collect();
    let mut unknown_included = 0usize;
    let mut unknown_excluded = 0usize;

    if maxdim >= 1 && count > 1 {
        let occupancy = Occupancy::build(&scale, &corners, d, count);
        let engine = IntersectionEngine::new(ifs, k, (maxdim + 1).max(2))?;
        let lookup = engine.pair_lookup();

        // Lexicographically positive offsets: each unordered pair is probed
        // from its lexicographically smaller corner.
        let deltas: Vec<Vec<i64>> = positive_deltas(d);
        let resolve = |outcome: Option<StateOutcome>,
                       unknown_included: &mut usize,
                       unknown_excluded: &mut usize| {
            match outcome {
                Some(StateOutcome::Runs) => true,
                Some(StateOutcome::PersistsToHorizon) => match options.unknown_policy {
                    UnknownPolicy::Outer => {
                        *unknown_included += 1;
                        true
                    }
                    UnknownPolicy::Inner => {
                        *unknown_excluded += 1;
                        false
                    }
                },
                _ => false,
            }
        };

        // Outcomes and linear lattice displacements resolved once per offset.
        let strides = occupancy.strides().to_vec();
        let delta_dots: Vec<i64> = deltas
            .iter()
            .map(|delta| delta.iter().zip(&strides).map(|(&x, &s)| x * s).sum())
            .collect();
        let delta_outcomes: Vec<Option<StateOutcome>> =
            deltas.iter().map(|delta| lookup.outcome(delta)).collect();

        for v in 0..count {
            let base = &corners[v * d..(v + 1) * d];
            let base_index: i64 = base.iter().zip(&strides).map(|(&c, &s)| c * s).sum();
            'delta: for (di, delta) in deltas.iter().enumerate() {
                for a in 0..d {
                    let c = base[a] + delta[a];
                    if c < 0 || c >= scale[a] {
                        continue 'delta;
                    }
                }
                let u = occupancy.get_linear(base_index + delta_dots[di]);
                if u == NO_VERTEX {
                    continue;
                }
                if resolve(
                    delta_outcomes[di],
                    &mut unknown_included,
                    &mut unknown_excluded,
                ) {
                    let (a, b) = if (v as u32) < u {
                        (v as u32, u)
                    } else {
                        (u, v as u32)
                    };
                    simplices[0].push(&[a, b]);
                }
            }
        }

        // Higher simplices live inside 2^d-cell windows anchored at the
        // per-axis minimum corner of the tuple.
        if maxdim >= 2 {
            let mut windows: HashSet<Vec<i64>> = HashSet::new();
            for v in 0..count {
                let base = &corners[v * d..(v + 1) * d];
                for eps in 0..(1u32 << d) {
                    let w: Vec<i64> = (0..d).map(|a| base[a] - ((eps >> a) & 1) as i64).collect();
                    windows.insert(w);
                }
            }
            let mut windows: Vec<Vec<i64>> = windows.into_iter().collect();
            windows.sort_unstable();

            let mut probe = vec![0i64; d];
            for w in &windows {
                // Present cells in the window, as (mask, vertex).
                let mut present: Vec<(u8, u32)> = Vec::new();
                for eps in 0..(1u32 << d) {
                    let mut ok = true;
                    for a in 0..d {
                        probe[a] = w[a] + ((eps >> a) & 1) as i64;
                        if probe[a] < 0 || probe[a] >= scale[a] {
                            ok = false;
                            break;
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let u = occupancy.get(&probe);
                    if u != NO_VERTEX {
                        present.push((eps as u8, u));
                    }
                }
                if present.len() < 3 {
                    continue;
                }
                let top = present.len().min(maxdim + 1);
                let mut subset: Vec<usize> = Vec::new();
                enumerate_subsets(present.len(), 3, top, &mut subset, &mut |idx| {
                    // The subset must touch the window corner on every axis,
                    // otherwise it belongs to a different window.
                    for a in 0..d {
                        if idx.iter().all(|&i| present[i].0 & (1 << a) != 0) {
                            return;
                        }
                    }
                    let masks: Vec<u8> = idx.iter().map(|&i| present[i].0).collect();
                    let outcome = engine.outcome_for_masks(&masks);
                    if resolve(Some(outcome), &mut unknown_included, &mut unknown_excluded) {
                        let mut verts: Vec<u32> = idx.iter().map(|&i| present[i].1).collect();
                        verts.sort_unstable();
                        simplices[idx.len() - 2].push(&verts);
                    }
                });
            }
        }
    }

    for list in &mut simplices {
        list.normalize();
    }

    Ok(SimplicialComplex {
        j,
        k,
        subdiv: ifs.subdiv().to_vec(),
        level_digits,
        vertex_count: count,
        simplices,
        verdict_mode: mode,
        unknown_included,
        unknown_excluded,
        no_corner_capped,
        maxdim_built: maxdim,
    })
}

fn positive_deltas(d: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let total = 3usize.pow(d as u32);
    for code in 0..total {
        let mut rest = code;
        let mut delta = vec![0i64; d];
        for a in 0..d {
            delta[a] = (rest % 3) as i64 - 1;
            rest /= 3;
        }
        if delta.iter().all(|&x| x == 0) {
            continue;
        }
        if *delta.iter().find(|&&x| x != 0).unwrap() > 0 {
            out.push(delta);
        }
    }
    out
}

fn enumerate_subsets(
    n: usize,
    min_size: usize,
    max_size: usize,
    current: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    fn rec(
        start: usize,
        n: usize,
        min_size: usize,
        max_size: usize,
        current: &mut Vec<usize>,
        emit: &mut dyn FnMut(&[usize]),
    ) {
        if current.len() >= min_size {
            emit(current);
        }
        if current.len() == max_size {
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, min_size, max_size, current, emit);
            current.pop();
        }
    }
    rec(0, n, min_size, max_size, current, emit);
}

/// Builds the nerve of a one-dimensional affine system via the three-valued
/// oracle; `Unknown` contacts follow the policy and are counted.
pub fn build_affine_nerve(
    sys: &Affine1dSystem,
    j: usize,
    k: usize,
    maxdim: usize,
    depth_budget: usize,
    period_budget: usize,
    policy: UnknownPolicy,
) -> Result<SimplicialComplex, NerveError> {
    if j == 0 || k <= j {
        return Err(NerveError::InvalidRange { j, k });
    }
    let m = k - j;
    let mut level_digits: Vec<Vec<DigitId>> = Vec::with_capacity(m);
    for t in j..k {
        let nsym = sys.symbols_at(t).ok_or(AffineError::BeyondHorizon {
            level: t,
            horizon: sys.horizon(),
        })?;
        level_digits.push((0..nsym as DigitId).collect());
    }
    let count: usize = level_digits.iter().map(|l| l.len()).product();

    let words: Vec<Word> = (0..count)
        .map(|v| {
            let mut rest = v;
            let mut digits = vec![0 as DigitId; m];
            for t in (0..m).rev() {
                digits[t] = level_digits[t][rest % level_digits[t].len()];
                rest /= level_digits[t].len();
            }
            Word::new(j, digits)
        })
        .collect();

    let mut simplices: Vec<SimplexList> = (1..=maxdim.max(1))
        .map(|q| SimplexList::new(q + 1))
        .collect();
    let mut unknown_included = 0usize;
    let mut unknown_excluded = 0usize;
    let mut any_unknown = false;

    let mut subset: Vec<usize> = Vec::new();
    let mut results: Vec<(Vec<u32>, bool)> = Vec::new();
    enumerate_subsets(count, 2, maxdim + 1, &mut subset, &mut |idx| {
        let tuple: Vec<Word> = idx.iter().map(|&i| words[i].clone()).collect();
        let verdict =
            affine1d_oracle(sys, j, &tuple, depth_budget, period_budget).expect("validated words");
        let present = match verdict {
            AffineVerdict::Nonempty { .. } => true,
            AffineVerdict::Empty { .. } => false,
            AffineVerdict::Unknown { .. } => {
                any_unknown = true;
                match policy {
                    UnknownPolicy::Outer => {
                        unknown_included += 1;
                        true
                    }
                    UnknownPolicy::Inner => {
                        unknown_excluded += 1;
                        false
                    }
                }
            }
        };
        let verts: Vec<u32> = idx.iter().map(|&i| i as u32).collect();
        results.push((verts, present));
    });

    // A tuple is a simplex only if every sub-pair intersects, which the
    // oracle guarantees for Nonempty; for Unknown-included tuples enforce
    // face closure explicitly.
    for (verts, present) in &results {
        if !present {
            continue;
        }
        if verts.len() > 2 {
            let all_faces = verts.iter().enumerate().all(|(drop, _)| {
                let face: Vec<u32> = verts
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != drop)
                    .map(|(_, &v)| v)
                    .collect();
                results.iter().any(|(f, p)| *p && f == &face)
            });
            if !all_faces {
                continue;
            }
        }
        simplices[verts.len() - 2].push(verts);
    }
    for list in &mut simplices {
        list.normalize();
    }

    let mode = if !any_unknown {
        VerdictMode::Exact
    } else {
        match policy {
            UnknownPolicy::Outer => VerdictMode::Outer,
            UnknownPolicy::Inner => VerdictMode::Inner,
        }
    };

    Ok(SimplicialComplex {
        j,
        k,
        subdiv: Vec::new(),
        level_digits,
        vertex_count: count,
        simplices,
        verdict_mode: mode,
        unknown_included,
        unknown_excluded,
        no_corner_capped: false,
        maxdim_built: maxdim,
    })
}

/// A vertex assignment that maps simplices to simplices.
#[derive(Debug, Clone)]
pub struct SimplicialMap {
    pub vertex_map: Vec<u32>,
}

impl SimplicialMap {
    /// Sorted deduplicated image of a simplex.
    pub fn image(&self, simplex: &[u32]) -> Vec<u32> {
        let mut img: Vec<u32> = simplex
            .iter()
            .map(|&v| self.vertex_map[v as usize])
            .collect();
        img.sort_unstable();
        img.dedup();
        img
    }

    fn validate(&self, domain: &SimplicialComplex, codomain: &SimplicialComplex) -> bool {
        for q in 1..=domain.dim() {
            if let Some(list) = domain.simplices(q) {
                for s in list.iter() {
                    let img = self.image(s);
                    if img.len() >= 2 && !codomain.contains_simplex(&img) {
                        return false;
                    }
                    if img.len() == 1 && (img[0] as usize) >= codomain.vertex_count() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// The digit-dropping projection from `N_{j,k+1}` onto `N_{j,k}`.
pub fn projection_phi(
    domain: &SimplicialComplex,
    codomain: &SimplicialComplex,
) -> Result<SimplicialMap, NerveError> {
    if domain.j != codomain.j || domain.k != codomain.k + 1 || codomain.k <= domain.j {
        return Err(NerveError::LevelMismatch);
    }
    let last = domain.level_digits.last().map(|l| l.len()).unwrap_or(1);
    let vertex_map: Vec<u32> = (0..domain.vertex_count() as u32)
        .map(|v| v / last as u32)
        .collect();
    let map = SimplicialMap { vertex_map };
    if !map.validate(domain, codomain) {
        return Err(NerveError::NotSimplicial);
    }
    Ok(map)
}

/// The prefix embedding `ξ_u : N_{k,ℓ} → N_{j,ℓ}` for a word `u` over levels
/// `j..k-1`.
pub fn embed_xi(
    prefix: &Word,
    domain: &SimplicialComplex,
    codomain: &SimplicialComplex,
) -> Result<SimplicialMap, NerveError> {
    let j = codomain.j;
    let k = domain.j;
    if prefix.start_level != j || prefix.depth() != k - j || domain.k != codomain.k || k <= j {
        return Err(NerveError::LevelMismatch);
    }
    // Position of the prefix in the codomain's leading levels.
    let mut offset: usize = 0;
    for (t, &id) in prefix.digits.iter().enumerate() {
        let pos = codomain.level_digits[t]
            .iter()
            .position(|&x| x == id)
            .ok_or(NerveError::InvalidPrefix)?;
        offset = offset * codomain.level_digits[t].len() + pos;
    }
    let suffix_size: usize = codomain.level_digits[k - j..]
        .iter()
        .map(|l| l.len())
        .product();
    debug_assert_eq!(suffix_size, domain.vertex_count());
    let base = (offset * suffix_size) as u32;
    let vertex_map: Vec<u32> = (0..domain.vertex_count() as u32)
        .map(|v| base + v)
        .collect();
    let map = SimplicialMap { vertex_map };
    if !map.validate(domain, codomain) {
        return Err(NerveError::NotSimplicial);
    }
    Ok(map)
}

/// The `(j,k,ℓ)`-subcomplex of `N_{j,ℓ}`: the union of the prefix embeddings
/// of `N_{k,ℓ}`, i.e. exactly the simplices whose vertices share their level
/// `j..k-1` prefix.
pub fn subcomplex_m(nerve: &SimplicialComplex, k: usize) -> Result<SimplicialComplex, NerveError> {
    let j = nerve.j;
    let ell = nerve.k;
    if k <= j || k >= ell {
        return Err(NerveError::InvalidRange { j: k, k: ell });
    }
    let suffix_size: usize = nerve.level_digits[k - j..]
        .iter()
        .map(|l| l.len())
        .product::<usize>()
        .max(1);
    let mut simplices: Vec<SimplexList> = nerve
        .simplices
        .iter()
        .map(|l| SimplexList::new(l.arity))
        .collect();
    for (qi, list) in nerve.simplices.iter().enumerate() {
        for s in list.iter() {
            let prefix = s[0] as usize / suffix_size;
            if s.iter().all(|&v| v as usize / suffix_size == prefix) {
                simplices[qi].push(s);
            }
        }
    }
    Ok(SimplicialComplex {
        j,
        k: ell,
        subdiv: nerve.subdiv.clone(),
        level_digits: nerve.level_digits.clone(),
        vertex_count: nerve.vertex_count,
        simplices,
        verdict_mode: nerve.verdict_mode,
        unknown_included: 0,
        unknown_excluded: 0,
        no_corner_capped: nerve.no_corner_capped,
        maxdim_built: nerve.maxdim_built,
    })
}

/// Whether `sub`'s simplices all appear in `sup` (same vertex indexing).
pub fn is_subcomplex(sub: &SimplicialComplex, sup: &SimplicialComplex) -> bool {
    if sub.vertex_count() != sup.vertex_count() {
        return false;
    }
    for q in 1..=sub.dim() {
        if let Some(list) = sub.simplices(q) {
            for s in list.iter() {
                if !sup.contains_simplex(s) {
                    return false;
                }
            }
        }
    }
    true
}

/// Connected components under the relation generated by 1-simplices.
#[derive(Debug, Clone)]
pub struct ComponentPartition {
    /// Component id per vertex, ids dense in `0..count`.
    pub comp: Vec<u32>,
    pub sizes: Vec<u32>,
    pub count: usize,
}

impl ComponentPartition {
    pub fn max_size(&self) -> u32 {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        self.count == 1
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
    }
}

pub fn components(complex: &SimplicialComplex) -> ComponentPartition {
    let n = complex.vertex_count();
    let mut uf = UnionFind::new(n);
    for [a, b] in complex.edges() {
        uf.union(a, b);
    }
    let mut ids: HashMap<u32, u32> = HashMap::new();
    let mut comp = vec![0u32; n];
    let mut sizes: Vec<u32> = Vec::new();
    for v in 0..n as u32 {
        let root = uf.find(v);
        let next = ids.len() as u32;
        let id = *ids.entry(root).or_insert(next);
        if id as usize == sizes.len() {
            sizes.push(0);
        }
        sizes[id as usize] += 1;
        comp[v as usize] = id;
    }
    ComponentPartition {
        comp,
        count: sizes.len(),
        sizes,
    }
}

/// The map on components induced by a simplicial map, with surjectivity and
/// bijectivity flags.
#[derive(Debug, Clone)]
pub struct ComponentMapReport {
    /// Codomain component id per domain component id.
    pub mapping: Vec<u32>,
    pub surjective: bool,
    pub bijective: bool,
}

pub fn component_map(
    map: &SimplicialMap,
    dom_parts: &ComponentPartition,
    cod_parts: &ComponentPartition,
) -> ComponentMapReport {
    let mut mapping = vec![u32::MAX; dom_parts.count];
    for (v, &img) in map.vertex_map.iter().enumerate() {
        let dc = dom_parts.comp[v] as usize;
        let cc = cod_parts.comp[img as usize];
        debug_assert!(
            mapping[dc] == u32::MAX || mapping[dc] == cc,
            "map not well-defined"
        );
        mapping[dc] = cc;
    }
    let mut hit = vec![false; cod_parts.count];
    for &cc in &mapping {
        hit[cc as usize] = true;
    }
    let surjective = hit.iter().all(|&h| h);
    let bijective = surjective && dom_parts.count == cod_parts.count;
    ComponentMapReport {
        mapping,
        surjective,
        bijective,
    }
}

/// Per-stage connectivity data for `k = 2..=kmax`.
#[derive(Debug, Clone)]
pub struct ConnectivityStage {
    pub k: usize,
    pub head_connected: bool,
    pub head_components: usize,
    /// Connectivity of the one-level nerve `N_{k-1,k}`.
    pub level_connected: bool,
}

#[derive(Debug, Clone)]
pub struct ConnectivityReport {
    pub stages: Vec<ConnectivityStage>,
    /// All `N_{1,k}` connected over the checked range; the limit set is
    /// connected exactly when this holds for every k.
    pub all_stages_connected: bool,
    /// Number of checked one-level systems that are connected; evidence for
    /// local connectedness when all are.
    pub local_connectedness_evidence: usize,
}

pub fn connectivity_report(
    ifs: &GridIfs,
    kmax: usize,
    options: &NerveOptions,
) -> Result<ConnectivityReport, NerveError> {
    let mut opts = options.clone();
    opts.maxdim = Some(1);
    let mut stages = Vec::new();
    for k in 2..=kmax {
        let head = build_nerve(ifs, 1, k, &opts)?;
        let head_parts = components(&head);
        let level = build_nerve(ifs, k - 1, k, &opts)?;
        let level_parts = components(&level);
        stages.push(ConnectivityStage {
            k,
            head_connected: head_parts.is_connected(),
            head_components: head_parts.count,
            level_connected: level_parts.is_connected(),
        });
    }
    let all_connected = stages.iter().all(|s| s.head_connected);
    let evidence = stages.iter().filter(|s| s.level_connected).count();
    Ok(ConnectivityReport {
        stages,
        all_stages_connected: all_connected,
        local_connectedness_evidence: evidence,
    })
}

/// `c^{k-1} ·` (largest component vertex count) for `N_{1,k}`: a sequence of
/// these decreasing to zero certifies total disconnectedness.
pub fn disconnection_certificate(
    ifs: &GridIfs,
    k: usize,
    parts: &ComponentPartition,
) -> BigRational {
    let max = parts.max_size();
    ifs.contraction_pow((k - 1) as u32) * BigRational::from(crate::BigInt::from(max))
}

/// Checks every component of `N_{1,m}` against the cut bound: with a cut
/// normal to `axis` at level `cut_level`, each component's axis-projection
/// may span at most `(n-1)/n^cut_level + 2/n^{m-1}`.
#[derive(Debug, Clone)]
pub struct CutAudit {
    pub cut_digit: Option<u32>,
    /// `(span numerator over n^{m-1}, allowed numerator over n^{m-1})` per
    /// component would lose exactness; spans are kept as exact rationals.
    pub bound: BigRational,
    pub worst_span: BigRational,
    pub violations: usize,
    pub components: usize,
}

pub fn cut_projection_audit(
    ifs: &GridIfs,
    m: usize,
    cut_level: usize,
    axis: usize,
    options: &NerveOptions,
) -> Result<CutAudit, NerveError> {
    use crate::BigInt;
    let cut_digit = ifs.detect_cut_at(cut_level, axis);
    let mut opts = options.clone();
    opts.maxdim = Some(1);
    let nerve = build_nerve(ifs, 1, m, &opts)?;
    let parts = components(&nerve);
    let n = BigInt::from(ifs.subdiv()[axis]);
    let depth = m - 1;
    let bound = if cut_digit.is_some() {
        BigRational::new(n.clone() - BigInt::from(1), n.pow(cut_level as u32))
            + BigRational::new(BigInt::from(2), n.pow(depth as u32))
    } else {
        BigRational::from(BigInt::from(2)) // vacuous: spans never exceed 1
    };
    let mut lo = vec![i64::MAX; parts.count];
    let mut hi = vec![i64::MIN; parts.count];
    for v in 0..nerve.vertex_count() as u32 {
        let c = nerve.grid_corner(v)[axis];
        let id = parts.comp[v as usize] as usize;
        lo[id] = lo[id].min(c);
        hi[id] = hi[id].max(c + 1);
    }
    let scale = n.pow(depth as u32);
    let mut violations = 0usize;
    let mut worst = BigRational::from(BigInt::from(0));
    for id in 0..parts.count {
        let span = BigRational::new(BigInt::from(hi[id] - lo[id]), scale.clone());
        if span > bound && cut_digit.is_some() {
            violations += 1;
        }
        if span > worst {
            worst = span;
        }
    }
    Ok(CutAudit {
        cut_digit,
        bound,
        worst_span: worst,
        violations,
        components: parts.count,
    })
}
