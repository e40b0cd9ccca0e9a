//! Construction, validation and activation of EPR-steering assemblages.
//!
//! The central object is the [`assemblage::Assemblage`]: a family of
//! subnormalized positive operators describing the conditional states a pair
//! of remote measurements steers a characterized quantum system into. This
//! crate builds such assemblages from explicit quantum models, validates
//! their constraints, embeds them in a four-party network next to a
//! self-tested Pauli reference resource, and evaluates the resulting network
//! Bell functional. A negative value certifies that the input assemblage has
//! no quantum realization.
//!
//! Modules:
//! - [`mat`]: dense complex matrices (Kronecker, partial trace, Hermitian
//!   eigensolver, PSD calculus).
//! - [`assemblage`]: the assemblage data model, validation, persistence.
//! - [`quantum`]: quantum models, Born-rule assemblages, the Pauli reference
//!   assemblage, GHJW realizations, Haar-random sampling.
//! - [`functionals`]: steering/Bell functionals, the Pauli-basis
//!   decomposition, correlation tables.
//! - [`activation`]: the entangled readout and the activation pipeline.
//! - [`certify`]: self-testing, classical bounds, extremality and
//!   independence certificates, randomized non-negativity sweeps.
//! - [`seesaw`]: alternating optimization over quantum models.

pub mod activation;
pub mod assemblage;
pub mod certify;
pub mod error;
pub mod functionals;
pub mod mat;
pub mod quantum;
pub mod seesaw;

pub use error::{Error, Result};
pub use mat::{ComplexMatrix, C64};
