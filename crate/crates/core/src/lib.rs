//! Quasi-fixed points of polynomial self-maps of affine space over finite
//! fields, and finite-quotient certificates of residual finiteness for
//! mapping tori of injective free-group endomorphisms.
//!
//! Module map:
//! - [`gf`]: exact arithmetic in `F_{p^m}`, Frobenius, embeddings.
//! - [`poly`]: multivariate polynomials over `F_p`, polynomial maps, and the
//!   rewriting system `x_i^Q -> f_i` modulo the ideal `I_Q`.
//! - [`freegroup`]: words, endomorphisms, Stallings folding, Sanov matrices.
//! - [`matrep`]: 2x2 matrices over `F_{p^m}`, the adjugate word map, the lift
//!   of an endomorphism to matrix tuples, and `PGL_2` dynamics.
//! - [`dynamics`]: enumeration of quasi-fixed points and density searches.
//! - [`certify`]: certificate search, wreath-product quotient, verifier.
//! - [`cli`]: the `quasifix` command line.

pub mod certify;
pub mod cli;
pub mod dynamics;
pub mod freegroup;
pub mod gf;
pub mod matrep;
pub mod poly;

pub use gf::{FqElement, FqField};
