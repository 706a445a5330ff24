//! Discrete wave operators, Green operators and the Cauchy problem.

mod cauchy;
mod continuum;
mod green;
mod operator;

pub use cauchy::{cauchy_evolution, order_preserving_pairs, rce, solve_cauchy, CauchyEvolution, Rce};
pub use continuum::{continuum_residual, level_residual, refinement_levels, Residual};
pub use green::{greens, GreenSet};
pub use operator::{build_plambda, build_plambda_lattice, build_sorkin, k_variant, KVariant, OperatorKind, SparseLower, WaveOperator};
