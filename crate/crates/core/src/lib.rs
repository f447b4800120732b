//! Contour dynamics for 2D Euler vortex patches, together with the
//! singular-integral machinery the evolution rests on: spectral and
//! principal-value Hilbert transforms, difference-quotient operators, and
//! moduli-of-continuity norms. Every operator identity used by the evolution
//! has a second, independent evaluation path and the crate exposes the
//! residuals between them.

pub mod contour;
pub mod evolve;
pub mod field;
pub mod hilbert;
pub mod moduli;

mod error;

pub use error::{Error, Result};
pub use field::{LineField, PeriodicField, TwoPointField};
