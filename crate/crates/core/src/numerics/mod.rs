//! Matrices, sparse products, reverse-mode differentiation, and the
//! optimizer used by every model computation.

mod adam;
mod dense;
mod init;
mod sparse;
pub mod tape;

pub use adam::Adam;
pub use dense::Matrix;
pub use init::glorot_uniform;
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};

use rand::SeedableRng;

/// The generator behind every random draw in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
