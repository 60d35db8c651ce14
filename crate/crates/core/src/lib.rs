//! Construction, verification, and protocol simulation for absolutely
//! maximally entangled (AME) qudit states.
//!
//! The crate is organized around a small dense state-vector simulator
//! ([`qstate`]) and a finite-field/coding layer ([`gf`], [`codes`]) that
//! feeds the MDS-code state construction in [`ame`]. On top of those sit
//! three protocol families: quantum secret sharing ([`qss`]),
//! open-destination teleportation ([`teleport`]), and entanglement
//! swapping ([`swap`]).
//!
//! Everything here is `no_std + alloc`; file formats, parallel scans, and
//! the command-line front end live in the companion `ame-lab` crate.
//!
//! Conventions used throughout:
//!
//! * Parties are 1-based. Party 1 is the most significant digit of the
//!   base-`d` amplitude index, so `|k_1 k_2 … k_n⟩` sits at index
//!   `k_1·d^(n-1) + … + k_n`.
//! * Entropies are reported in dits (logarithm base `d`), so a maximally
//!   mixed `k`-party reduction has entropy exactly `k`.
//! * Algebraic identities are checked to 1e-10, entropies to 1e-9 unless
//!   a caller overrides them; the entropy eigenvalue cutoff is 1e-12.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod ame;
pub mod codes;
pub mod gf;
pub mod qss;
pub mod qstate;
pub mod swap;
pub mod teleport;

mod linalg;

pub use num_complex::Complex64;
