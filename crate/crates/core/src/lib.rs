//! Baxter permutations, plane bipolar orientations, tandem walks and coalescent-walk
//! processes, with exact samplers, brute-force oracles, permuton estimates and a
//! simulator for the limiting coalescing flow.

pub mod bipolar;
pub mod coal;
pub mod continuum;
pub mod error;
pub mod perm;
pub mod permuton;
pub mod rng;
pub mod walk;

pub use error::{Error, Result};
pub use perm::Permutation;
pub use walk::{LatticeWalk, Step, TandemWalk};
