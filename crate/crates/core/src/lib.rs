//! Privacy-preserving approval voting by secure multiparty summation.
//!
//! Two schemes are implemented side by side. [`sun_liu`] packs each ballot
//! into a binary integer and tallies by additive secret sharing.
//! [`goedel_scheme`] encodes each ballot as a product of candidate primes and
//! tallies by multiplicative sharing, either over exact exponent vectors or in
//! a prime field. [`protocol_sim`] runs either scheme as a deterministic
//! multi-party simulation.

pub mod cli;
pub mod godel_core;
pub mod goedel_scheme;
pub mod protocol_sim;
pub mod sun_liu;
pub mod worked_examples;
