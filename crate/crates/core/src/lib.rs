//! Flexible web PKI toolkit.
//!
//! Map servers keep every certificate, policy and revocation for the
//! domains of their supported CAs in nested sparse Merkle trees and hand
//! out presence/absence proofs. Clients combine those proofs with a
//! name-dependent set of highly trusted CAs to resolve domain policies and
//! reject certificates that conflict with them.
//!
//! The numeric pieces (map-server costs, proof-inflation estimates) are
//! generic over the scalar type; [`Cost`] and [`Real`] are the concrete
//! choices used by the rest of the crate.

pub mod certmodel;
pub mod client;
pub mod harness;
pub mod mapserver;
pub mod merkle;
pub mod naming;
pub mod transport;
pub mod trustcalc;

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Scalar usable as a map-server cost: exact rationals or floats.
pub trait Scalar: Num + PartialOrd + Clone + Debug + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where T: Num + PartialOrd + Clone + Debug + FromPrimitive + ToPrimitive {}

/// Exact cost of querying a map server.
pub type Cost = num_rational::Rational64;

/// Floating-point type used for estimates and benchmark statistics.
pub type Real = f64;
