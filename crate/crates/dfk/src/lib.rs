//! Puncturable encryption built from delegatable fully key-homomorphic
//! encryption (DFKHE) over plain LWE lattices.
//!
//! Layering, bottom to top:
//!
//! * [`zq_core`] — exact modular linear algebra, the gadget matrix and its
//!   bit-decomposition inverse, Gram-Schmidt and operator-norm utilities.
//! * [`gauss`] — discrete Gaussian sampling over the integers and over
//!   lattice cosets (Klein's randomized nearest-plane).
//! * [`trapdoor`] — trapdoor lattice algebra: TrapGen, ExtBasisLeft,
//!   ExtBasisRight, SampleD, RandBasis, and the public gadget trapdoor.
//! * [`circuit`] — arithmetic circuits over Z_q with the three
//!   key-homomorphic evaluators (public-key, ciphertext, simulation) and
//!   builders for equality-test functions.
//! * [`dfkhe`] — the DFKHE scheme: KGen, KHom, KDel, Enc, ExtEval, Dec.
//! * [`pe`] — puncturable encryption derived from DFKHE with equality-test
//!   circuits over bit-decomposed tags.
//! * [`params`] — parameter profiles, noise-budget checks, size accounting,
//!   and automated profile search.
//! * [`container`] — the DFK1 binary container format used by the CLI.

pub mod circuit;
pub mod container;
pub mod dfkhe;
pub mod gauss;
pub mod params;
pub mod pe;
pub mod trapdoor;
pub mod zq_core;

pub use params::Profile;
pub use zq_core::{IntMatrix, Modulus, ZqMatrix};
