//! Exact combinatorial machinery for non-autonomous grid iterated function
//! systems: lattice cell geometry, a finite-automaton intersection decider,
//! Čech-style nerve complexes, and integral simplicial homology via Smith
//! normal form.
//!
//! All geometry lives on integer lattices (one scale per axis), so every
//! intersection and containment question is decided exactly. Systems carry an
//! explicit finite horizon together with a tail policy; under `Full` and
//! `Periodic` tails every verdict is exact, under `Truncate` the engine is
//! honest about what it cannot know and reports `Unknown`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod contact;
pub mod homology;
pub mod ifs;
pub mod nerve;
pub mod render;

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
