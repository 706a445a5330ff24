//! Polynomial observables, the contraction engine behind every bracket and
//! star product, and truncated formal power series in `ℏ` and `λ`.

mod contract;
mod poly;
mod series;

pub use contract::{contract, derivatives_of_order, laplacian, permanent};
pub use poly::{Monomial, PolyFunctional, SymTensor};
pub use series::{compose, compose_series, Exponential, FormalSeries, Orders, Pointwise, Product};
