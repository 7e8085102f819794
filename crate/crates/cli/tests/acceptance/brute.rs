//! Independent brute-force intersection oracle: refines every piece into its
//! absolute lattice boxes level by level, keeps the tuples of boxes (one per
//! piece) that still pairwise touch, and reports the exact depth at which the
//! outer approximations separate. No offset normalization, no automaton — a
//! direct geometric breadth-first search used to check the engine.

use std::collections::HashSet;

use fractal_nerve_core::contact::ContactWitness;
use fractal_nerve_core::ifs::{GridIfs, Word};
use fractal_nerve_core::{BigInt, BigRational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteOutcome {
    /// No tuple of depth-`m` refinement boxes touches pairwise.
    SeparatedAt(usize),
    /// Touching tuples survive through this refinement depth.
    TouchingAt(usize),
}

fn pairwise_touching(flat: &[i64], arity: usize, d: usize) -> bool {
    for i in 0..arity {
        for j in i + 1..arity {
            for a in 0..d {
                if (flat[i * d + a] - flat[j * d + a]).abs() > 1 {
                    return false;
                }
            }
        }
    }
    true
}

pub fn box_refinement_oracle(ifs: &GridIfs, words: &[Word], budget: usize) -> BruteOutcome {
    let d = ifs.dim();
    let arity = words.len();
    let k = words[0].start_level + words[0].depth();
    let start: Vec<i64> = words
        .iter()
        .flat_map(|w| ifs.word_cell(w).unwrap().corner)
        .collect();
    if !pairwise_touching(&start, arity, d) {
        return BruteOutcome::SeparatedAt(0);
    }
    let mut frontier: Vec<Vec<i64>> = vec![start];
    for m in 1..=budget {
        let level = match ifs.level(k + m - 1) {
            Some(l) => l,
            None => return BruteOutcome::TouchingAt(m - 1),
        };
        let digit_comps: Vec<Vec<i64>> = level
            .digits()
            .iter()
            .map(|&id| (0..d).map(|a| ifs.digit_component(id, a) as i64).collect())
            .collect();
        let mut next: HashSet<Vec<i64>> = HashSet::new();
        for tuple in &frontier {
            expand(tuple, arity, d, ifs.subdiv(), &digit_comps, &mut next);
        }
        if next.is_empty() {
            return BruteOutcome::SeparatedAt(m);
        }
        assert!(next.len() < 500_000, "brute frontier blew up at depth {m}");
        frontier = next.into_iter().collect();
        frontier.sort();
    }
    BruteOutcome::TouchingAt(budget)
}

/// Assigns one digit to each piece, pruning as soon as a pair separates.
fn expand(
    tuple: &[i64],
    arity: usize,
    d: usize,
    subdiv: &[u32],
    digit_comps: &[Vec<i64>],
    out: &mut HashSet<Vec<i64>>,
) {
    fn rec(
        slot: usize,
        tuple: &[i64],
        child: &mut Vec<i64>,
        arity: usize,
        d: usize,
        subdiv: &[u32],
        digit_comps: &[Vec<i64>],
        out: &mut HashSet<Vec<i64>>,
    ) {
        if slot == arity {
            out.insert(child.clone());
            return;
        }
        'digit: for comps in digit_comps {
            let base = child.len();
            for a in 0..d {
                child.push(tuple[slot * d + a] * subdiv[a] as i64 + comps[a]);
            }
            for prev in 0..slot {
                for a in 0..d {
                    if (child[base + a] - child[prev * d + a]).abs() > 1 {
                        child.truncate(base);
                        continue 'digit;
                    }
                }
            }
            rec(slot + 1, tuple, child, arity, d, subdiv, digit_comps, out);
            child.truncate(base);
        }
    }
    let mut child = Vec::with_capacity(arity * d);
    rec(0, tuple, &mut child, arity, d, subdiv, digit_comps, out);
}

/// Checks a claimed non-emptiness witness by direct digit-stream arithmetic:
/// every stream must use digits of its levels, all streams must evaluate to
/// the same rational point, and that point must lie in each word's closed
/// cell box.
pub fn validate_witness(ifs: &GridIfs, words: &[Word], witness: &ContactWitness) -> bool {
    if witness.streams.len() != words.len() {
        return false;
    }
    let mut common: Option<Vec<BigRational>> = None;
    for (word, stream) in words.iter().zip(&witness.streams) {
        if stream.start_level != word.start_level {
            return false;
        }
        if stream.prefix[..word.depth()] != word.digits[..] {
            return false;
        }
        if !stream.digits_valid(ifs) {
            return false;
        }
        let coords = stream.coordinates(ifs);
        match &common {
            None => common = Some(coords.clone()),
            Some(c) if *c != coords => return false,
            _ => {}
        }
        // The point must lie in the word's closed lattice box.
        let cell = ifs.word_cell(word).unwrap();
        let scale = ifs.cell_scale(cell.depth).unwrap();
        for a in 0..ifs.dim() {
            let lo = BigRational::new(BigInt::from(cell.corner[a]), BigInt::from(scale[a]));
            let hi = BigRational::new(BigInt::from(cell.corner[a] + 1), BigInt::from(scale[a]));
            if coords[a] < lo || coords[a] > hi {
                return false;
            }
        }
    }
    true
}
