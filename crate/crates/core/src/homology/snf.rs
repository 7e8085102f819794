//! Sparse integer Smith normal form by pivoting elimination.
//!
//! Pivots are chosen with smallest absolute value first (so ±1 entries of
//! boundary matrices are preferred) and Markowitz fill-in cost as the tie
//! break. Elimination runs over `i64` with checked arithmetic and restarts
//! over `BigInt` if anything overflows. The diagonal is normalized into the
//! divisor chain afterwards by pairwise gcd/lcm exchanges.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Sparse integer matrix in coordinate form.
#[derive(Debug, Clone, Default)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(u32, u32, i64)>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: u32, col: u32, val: i64) {
        if val != 0 {
            self.entries.push((row, col, val));
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// Rank and elementary divisors (in divisibility order, including ones).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnfOutcome {
    pub rank: usize,
    pub divisors: Vec<BigInt>,
}

impl SnfOutcome {
    /// Divisors different from one: the torsion part of the cokernel.
    pub fn nontrivial_divisors(&self) -> Vec<BigInt> {
        self.divisors
            .iter()
            .filter(|d| !d.is_one())
            .cloned()
            .collect()
    }
}

trait Scalar: Clone + Ord + Integer + Signed {
    fn from_i64(v: i64) -> Self;
    /// `a - q*b`, or `None` on overflow.
    fn mul_sub(a: &Self, q: &Self, b: &Self) -> Option<Self>;
}

impl Scalar for i64 {
    fn from_i64(v: i64) -> Self {
        v
    }
    fn mul_sub(a: &Self, q: &Self, b: &Self) -> Option<Self> {
        q.checked_mul(*b).and_then(|p| a.checked_sub(p))
    }
}

impl Scalar for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn mul_sub(a: &Self, q: &Self, b: &Self) -> Option<Self> {
        Some(a - q * b)
    }
}

struct Workspace<T> {
    row_data: Vec<BTreeMap<u32, T>>,
    col_rows: Vec<BTreeSet<u32>>,
}

impl<T: Scalar> Workspace<T> {
    fn new(m: &SparseMatrix) -> Self {
        let mut ws = Workspace {
            row_data: vec![BTreeMap::new(); m.rows],
            col_rows: vec![BTreeSet::new(); m.cols],
        };
        for &(r, c, v) in &m.entries {
            let cell = ws.row_data[r as usize].entry(c).or_insert_with(T::zero);
            *cell = cell.clone() + T::from_i64(v);
        }
        for r in 0..m.rows {
            let zero_cols: Vec<u32> = ws.row_data[r]
                .iter()
                .filter(|(_, v)| v.is_zero())
                .map(|(c, _)| *c)
                .collect();
            for c in zero_cols {
                ws.row_data[r].remove(&c);
            }
            for &c in ws.row_data[r].keys() {
                ws.col_rows[c as usize].insert(r as u32);
            }
        }
        ws
    }

    fn set(&mut self, r: u32, c: u32, v: T) {
        if v.is_zero() {
            if self.row_data[r as usize].remove(&c).is_some() {
                self.col_rows[c as usize].remove(&r);
            }
        } else {
            self.row_data[r as usize].insert(c, v);
            self.col_rows[c as usize].insert(r);
        }
    }

    fn get(&self, r: u32, c: u32) -> Option<&T> {
        self.row_data[r as usize].get(&c)
    }

    /// `row_target -= q * row_source`.
    fn row_op(&mut self, target: u32, source: u32, q: &T) -> Result<(), Overflow> {
        let src: Vec<(u32, T)> = self.row_data[source as usize]
            .iter()
            .map(|(c, v)| (*c, v.clone()))
            .collect();
        for (c, sv) in src {
            let cur = self.get(target, c).cloned().unwrap_or_else(T::zero);
            let next = T::mul_sub(&cur, q, &sv).ok_or(Overflow)?;
            self.set(target, c, next);
        }
        Ok(())
    }

    /// `col_target -= q * col_source`.
    fn col_op(&mut self, target: u32, source: u32, q: &T) -> Result<(), Overflow> {
        let rows: Vec<u32> = self.col_rows[source as usize].iter().copied().collect();
        for r in rows {
            let sv = self.get(r, source).cloned().unwrap_or_else(T::zero);
            let cur = self.get(r, target).cloned().unwrap_or_else(T::zero);
            let next = T::mul_sub(&cur, &q.clone(), &sv).ok_or(Overflow)?;
            self.set(r, target, next);
        }
        Ok(())
    }

    /// Pivot with smallest |value|, Markowitz tie-break.
    fn find_pivot(&self, active_rows: &BTreeSet<u32>) -> Option<(u32, u32, T)> {
        let mut best: Option<(u32, u32, T, usize)> = None;
        for &r in active_rows {
            for (&c, v) in &self.row_data[r as usize] {
                let cost =
                    (self.row_data[r as usize].len() - 1) * (self.col_rows[c as usize].len() - 1);
                let abs = v.abs();
                let better = match &best {
                    None => true,
                    Some((_, _, bv, bcost)) => abs < *bv || (abs == *bv && cost < *bcost),
                };
                if better {
                    let is_unit = abs.is_one();
                    best = Some((r, c, abs, cost));
                    if is_unit && cost == 0 {
                        // Cannot do better than a unit pivot with no fill-in.
                        let (r, c, v, _) = best.unwrap();
                        return Some((r, c, v));
                    }
                }
            }
        }
        best.map(|(r, c, v, _)| (r, c, v))
    }
}

struct Overflow;

fn eliminate<T: Scalar>(m: &SparseMatrix) -> Result<Vec<T>, Overflow> {
    let mut ws: Workspace<T> = Workspace::new(m);
    let mut active_rows: BTreeSet<u32> = (0..m.rows as u32)
        .filter(|&r| !ws.row_data[r as usize].is_empty())
        .collect();
    let mut diagonal: Vec<T> = Vec::new();
    loop {
        active_rows.retain(|&r| !ws.row_data[r as usize].is_empty());
        let (pr, pc, _) = match ws.find_pivot(&active_rows) {
            Some(p) => p,
            None => break,
        };
        let v = ws.get(pr, pc).cloned().unwrap();

        // Clear the pivot column with row operations (truncated quotients
        // shrink remainders, so repeating from pivot selection terminates).
        let others: Vec<u32> = ws.col_rows[pc as usize]
            .iter()
            .copied()
            .filter(|&r| r != pr)
            .collect();
        let mut residue = false;
        for r in others {
            let w = ws.get(r, pc).cloned().unwrap();
            let q = w.div_rem(&v).0;
            if !q.is_zero() {
                ws.row_op(r, pr, &q)?;
            }
            if ws.get(r, pc).is_some() {
                residue = true;
            }
        }
        if residue {
            continue;
        }
        let other_cols: Vec<u32> = ws.row_data[pr as usize]
            .keys()
            .copied()
            .filter(|&c| c != pc)
            .collect();
        let mut residue = false;
        for c in other_cols {
            let w = ws.get(pr, c).cloned().unwrap();
            let q = w.div_rem(&v).0;
            if !q.is_zero() {
                ws.col_op(c, pc, &q)?;
            }
            if ws.get(pr, c).is_some() {
                residue = true;
            }
        }
        if residue {
            continue;
        }
        diagonal.push(v.abs());
        ws.set(pr, pc, T::zero());
        active_rows.remove(&pr);
    }
    Ok(diagonal)
}

/// Exact rank and elementary divisors of an integer matrix.
pub fn smith_ranks(m: &SparseMatrix) -> SnfOutcome {
    let diagonal: Vec<BigInt> = match eliminate::<i64>(m) {
        Ok(d) => d.into_iter().map(BigInt::from).collect(),
        Err(Overflow) => eliminate::<BigInt>(m).unwrap_or_else(|_| unreachable!()),
    };
    SnfOutcome {
        rank: diagonal.len(),
        divisors: divisor_chain(diagonal),
    }
}

/// Turns any unimodular diagonalization into the divisor chain: a pair
/// `(a, b)` on the diagonal is equivalent to `(gcd(a,b), lcm(a,b))`.
fn divisor_chain(mut diag: Vec<BigInt>) -> Vec<BigInt> {
    let n = diag.len();
    for i in 0..n {
        for j in i + 1..n {
            if (&diag[j] % &diag[i]).is_zero() {
                continue;
            }
            let g = diag[i].gcd(&diag[j]);
            let l = (&diag[i] / &g) * &diag[j];
            diag[i] = g;
            diag[j] = l;
        }
    }
    diag.sort();
    diag
}
