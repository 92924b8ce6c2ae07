//! Block-sparse recovery with verifiable accuracy certificates.
//!
//! A representation structure splits `Bx` into blocks measured by their own
//! norms. Contrast matrices `H` are synthesized so that a recovery condition
//! can be checked numerically; the certificate then yields explicit error
//! bounds for regular and penalized `ℓ₁` recovery and for a greedy matching
//! pursuit. The `harness` module reproduces a seeded comparison protocol.

pub mod blockmodel;
pub mod conditions;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod recovery;
pub mod synthesis;
pub mod tolerances;

pub use blockmodel::{operator_norm, BlockNorm, BlockVector, Exponent, RepresentationStructure};
pub use conditions::{verify_certificate, Certificate, Verification};
pub use error::{Error, Result};
pub use recovery::{ErrorBound, Observation, RecoveryResult};
pub use synthesis::NoiseModel;
