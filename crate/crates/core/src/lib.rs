//! Classical and perturbative quantum scalar field theory on finite causal sets.
//!
//! The scalar type is generic: floating point (`f32`, `f64`) for numerics and
//! [`Exact`] rationals for identities that must hold exactly. The aliases
//! below fix the common choices.

pub mod bitmatrix;
pub mod causet;
pub mod classical;
pub mod discrete;
pub mod error;
pub mod functional;
pub mod generators;
pub mod interacting;
pub mod io;
pub mod linalg;
pub mod quantum;
pub mod scalar;

pub use causet::CausalSet;
pub use error::{Error, Result};

/// Exact rational scalar.
pub type Exact = num_rational::BigRational;

pub type WaveOperatorF64 = discrete::WaveOperator<f64>;
pub type WaveOperatorExact = discrete::WaveOperator<Exact>;
pub type GreenSetF64 = discrete::GreenSet<f64>;
pub type GreenSetExact = discrete::GreenSet<Exact>;
pub type PolyF64 = functional::PolyFunctional<f64>;
pub type PolyExact = functional::PolyFunctional<Exact>;
pub type SeriesF64 = functional::FormalSeries<f64>;
pub type SeriesExact = functional::FormalSeries<Exact>;
pub type InteractionF64 = classical::Interaction<f64>;
pub type TwoPointF64 = quantum::TwoPoint<f64>;
