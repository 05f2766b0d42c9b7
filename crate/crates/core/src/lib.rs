//! Homomorphically encrypted Elo ratings.
//!
//! The crate is layered bottom-up:
//!
//! - [`ring`]: negacyclic polynomial arithmetic over an RNS modulus chain
//!   (NTT, sampling, limb operations, wire format).
//! - [`ckks`]: an approximate-arithmetic RNS-CKKS engine on top of `ring`
//!   (keygen, encrypt/decrypt, leveled ops, Chebyshev kernel evaluation,
//!   key-custodian refresh, noise budget accounting).
//! - [`elo`]: the plaintext rating oracle every encrypted result is checked
//!   against, plus the rank ladder and Chebyshev coefficient generation.
//! - [`prims`]: Pedersen commitments, Schnorr signatures, and the Fiat–Shamir
//!   transcript shared by the proof layer.
//! - [`zkrp`]: zero-knowledge rank range proofs (bit decomposition with
//!   per-bit OR-proofs) and the commitment↔ciphertext consistency binding.
//! - [`protocol`]: the three-role matchmaking protocol (service provider,
//!   key custodian, users) as explicit state machines over typed messages.
//! - [`harness`]: experiment drivers (accuracy, benchmarks, fairness and
//!   rating-hiding games) and their report formats.

pub mod ckks;
pub mod elo;
pub mod harness;
pub mod prims;
pub mod protocol;
pub mod ring;
pub mod zkrp;
