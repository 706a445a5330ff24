use crate::causet::{PastRule, PreferredPast};
use crate::error::Result;
use crate::generators::{diamond_lattice, pullback_field, DiamondLattice, LatticeSpec, Point};

use super::operator::{build_plambda, WaveOperator};

/// Worst interior deviation at one refinement level.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Residual {
    pub refinement: usize,
    pub delta: f64,
    pub points: usize,
    pub max_residual: f64,
}

/// Lattices covering the same null-coordinate square with spacing `δ₀ / r`.
pub fn refinement_levels(points_per_side: usize, delta0: f64, refinements: &[usize]) -> Vec<(usize, DiamondLattice)> {
    refinements
        .iter()
        .map(|&r| {
            let side = (points_per_side - 1) * r + 1;
            let ell = delta0 / r as f64 / std::f64::consts::SQRT_2;
            (r, diamond_lattice(LatticeSpec::square(side, ell)))
        })
        .collect()
}

/// `max |ℓ^{d-2} (P φ)(p) - ½ □f(p)|` over points whose unit diamond lies
/// in the lattice, for a field of length dimension `d`. `box_f` is the
/// analytic `□f = 4 ∂_u ∂_v f`.
pub fn level_residual(
    lattice: &DiamondLattice,
    w: &WaveOperator<f64>,
    f: &impl Fn(Point) -> f64,
    box_f: &impl Fn(Point) -> f64,
    d: i32,
) -> Result<(usize, f64)> {
    let cs = lattice.causet();
    let ell = lattice.spec.ell;
    let phi = pullback_field(cs, f, d)?;
    let pphi = w.apply_p(&phi);
    let scale = ell.powi(d - 2);
    let emb = cs.embedding().expect("lattices carry coordinates");
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in (0..cs.len()).filter(|&p| lattice.has_full_diamond(p)) {
        let [u, v] = emb.uv(p);
        let [t, x] = emb.tx(p);
        let target = 0.5 * box_f(Point { u, v, t, x });
        worst = worst.max((scale * pphi[p] - target).abs());
        count += 1;
    }
    Ok((count, worst))
}

/// Residuals of the max-layer preferred-past operator on each level.
pub fn continuum_residual(
    levels: &[(usize, DiamondLattice)],
    f: impl Fn(Point) -> f64,
    box_f: impl Fn(Point) -> f64,
    d: i32,
) -> Result<Vec<Residual>> {
    levels
        .iter()
        .map(|(r, lattice)| {
            let pp = PreferredPast::choose(lattice.causet(), PastRule::MaxLayer)?;
            let w = build_plambda::<f64>(lattice.causet(), &pp);
            let (points, max_residual) = level_residual(lattice, &w, &f, &box_f, d)?;
            Ok(Residual { refinement: *r, delta: lattice.spec.delta(), points, max_residual })
        })
        .collect()
}
