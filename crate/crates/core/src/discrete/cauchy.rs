use nalgebra::DMatrix;

use super::green::GreenSet;
use super::operator::WaveOperator;
use crate::causet::{CausalSet, Infinity};
use crate::error::{Error, Result};
use crate::functional::PolyFunctional;
use crate::linalg;
use crate::scalar::Real;

/// Solves `Pφ = K(f + φ⁻)` by forward substitution, for a source vanishing on
/// `C_k^-` and data supported there. The solution equals `E⁺(f + φ⁻)`.
pub fn solve_cauchy<R: Real + nalgebra::Scalar>(w: &WaveOperator<R>, f: &[R], data: &[R]) -> Result<Vec<R>> {
    let n = w.n();
    if f.len() != n || data.len() != n {
        return Err(Error::Dimension(format!("vectors of length {} and {} for size {n}", f.len(), data.len())));
    }
    let boundary = w.past_boundary();
    let bad_f: Vec<usize> = boundary.members.iter().copied().filter(|&p| !f[p].is_zero()).collect();
    if !bad_f.is_empty() {
        return Err(Error::Precondition { what: "source must vanish on the past infinity".into(), indices: bad_f });
    }
    let bad_d: Vec<usize> = (0..n).filter(|&p| !boundary.contains(p) && !data[p].is_zero()).collect();
    if !bad_d.is_empty() {
        return Err(Error::Precondition { what: "Cauchy data must vanish off the past infinity".into(), indices: bad_d });
    }
    let rhs: Vec<R> = f.iter().zip(data).map(|(a, b)| a.clone() + b.clone()).collect();
    w.p().forward_solve(&w.apply_k(&rhs))
}

/// The map from data on `C_k^-` to values on `C_k^+`.
#[derive(Clone, Debug)]
pub struct CauchyEvolution<R: nalgebra::Scalar> {
    /// `|C_k^+| × |C_k^-|` matrix of `S_k^+ E⁺` restricted to past data.
    pub alpha: DMatrix<R>,
    pub past: Vec<usize>,
    pub future: Vec<usize>,
    pub rank: usize,
    /// Ratio of extreme singular values; infinite when singular.
    pub condition: f64,
    pub invertible: bool,
}

pub fn cauchy_evolution<R: Real + nalgebra::Scalar>(w: &WaveOperator<R>, g: &GreenSet<R>) -> CauchyEvolution<R> {
    let past = w.past_boundary().members.clone();
    let future = w.future_boundary().members.clone();
    let alpha = DMatrix::from_fn(future.len(), past.len(), |i, j| g.ret[(future[i], past[j])].clone());
    let tol = if R::EXACT { R::zero() } else { R::from_f64_lossy(1e-10) * (linalg::max_abs(&alpha) + R::one()) };
    let rank = linalg::rank(&alpha, &tol);
    let square = past.len() == future.len();
    let sv = linalg::to_f64(&alpha).singular_values();
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let invertible = square && rank == past.len();
    let condition = if invertible && smin > 0.0 { smax / smin } else { f64::INFINITY };
    CauchyEvolution { alpha, past, future, rank, condition, invertible }
}

/// Pairs the elements of two regions in label order, or by equal
/// coordinates when both sets carry embeddings, and checks that the pairing
/// preserves the order in both directions.
pub fn order_preserving_pairs(
    cs: &CausalSet,
    region: &Infinity,
    other: &CausalSet,
    other_region: &Infinity,
) -> Result<Vec<(usize, usize)>> {
    if region.len() != other_region.len() {
        return Err(Error::Dimension(format!("regions of size {} and {}", region.len(), other_region.len())));
    }
    let pairs: Vec<(usize, usize)> = match (cs.embedding(), other.embedding()) {
        (Some(a), Some(b)) => region
            .members
            .iter()
            .map(|&x| {
                let ux = a.uv(x);
                other_region
                    .members
                    .iter()
                    .copied()
                    .find(|&y| {
                        let uy = b.uv(y);
                        (ux[0] - uy[0]).abs() < 1e-9 && (ux[1] - uy[1]).abs() < 1e-9
                    })
                    .map(|y| (x, y))
                    .ok_or(Error::Invalid(format!("no partner with equal coordinates for element {x}")))
            })
            .collect::<Result<_>>()?,
        _ => region.members.iter().copied().zip(other_region.members.iter().copied()).collect(),
    };
    check_pairs(cs, other, &pairs)?;
    Ok(pairs)
}

fn check_pairs(cs: &CausalSet, other: &CausalSet, pairs: &[(usize, usize)]) -> Result<()> {
    for &(a, x) in pairs {
        for &(b, y) in pairs {
            if cs.c(a, b) != other.c(x, y) {
                return Err(Error::Precondition { what: "identification is not order preserving".into(), indices: vec![a, b] });
            }
        }
    }
    Ok(())
}

/// Relative Cauchy evolution on the solution space of the unperturbed set.
#[derive(Clone, Debug)]
pub struct Rce<R: nalgebra::Scalar> {
    /// `E⁺ (ι⁻)⁻¹ (α̃⁺)⁻¹ ι⁺ S_k^+` as an `N × N` matrix.
    pub matrix: DMatrix<R>,
    /// Columns `E⁺ e_q`, `q ∈ C_k^-`, spanning the solution space.
    pub basis: DMatrix<R>,
    pub alpha: DMatrix<R>,
    pub alpha_perturbed: DMatrix<R>,
}

impl<R: Real + nalgebra::Scalar> Rce<R> {
    pub fn apply(&self, phi: &[R]) -> Vec<R> {
        let n = self.matrix.nrows();
        (0..n).map(|p| (0..n).fold(R::zero(), |acc, q| acc + self.matrix[(p, q)].clone() * phi[q].clone())).collect()
    }

    /// `F ↦ F ∘ rce`.
    pub fn pullback(&self, f: &PolyFunctional<R>) -> PolyFunctional<R> {
        f.linear_substitute(&self.matrix)
    }

    /// `max |rce·B - B|` over the solution basis.
    pub fn deviation_from_identity(&self) -> R {
        linalg::max_abs_diff(&(&self.matrix * &self.basis), &self.basis)
    }
}

/// Compares the dynamics on `cs` and a perturbed `other` whose `k`-layer
/// infinities are identified by `iota_minus` and `iota_plus`, given as
/// `(element of cs, element of other)` pairs.
#[allow(clippy::too_many_arguments)]
pub fn rce<R: Real + nalgebra::Scalar>(
    cs: &CausalSet,
    other: &CausalSet,
    iota_minus: &[(usize, usize)],
    iota_plus: &[(usize, usize)],
    w: &WaveOperator<R>,
    w_other: &WaveOperator<R>,
    g: &GreenSet<R>,
    g_other: &GreenSet<R>,
) -> Result<Rce<R>> {
    check_pairs(cs, other, iota_minus)?;
    check_pairs(cs, other, iota_plus)?;
    let ev = cauchy_evolution(w, g);
    let ev_other = cauchy_evolution(w_other, g_other);
    if !ev.invertible {
        return Err(Error::NotInvertible { side: "unperturbed" });
    }
    if !ev_other.invertible {
        return Err(Error::NotInvertible { side: "perturbed" });
    }
    let pos = |list: &[usize], x: usize, what: &str| {
        list.iter().position(|&y| y == x).ok_or_else(|| Error::Invalid(format!("element {x} is not in the {what}")))
    };
    let m = ev.past.len();
    if iota_minus.len() != m || iota_plus.len() != ev.future.len() {
        return Err(Error::Dimension("identifications must cover both infinities".into()));
    }
    // ι⁺ : E(C⁺) → E(C̃⁺) and ι⁻ : E(C⁻) → E(C̃⁻) as permutation matrices.
    let mut iota_p = DMatrix::from_element(m, m, R::zero());
    for &(a, b) in iota_plus {
        iota_p[(pos(&ev_other.future, b, "perturbed future infinity")?, pos(&ev.future, a, "future infinity")?)] = R::one();
    }
    let mut iota_m_inv = DMatrix::from_element(m, m, R::zero());
    for &(a, b) in iota_minus {
        iota_m_inv[(pos(&ev.past, a, "past infinity")?, pos(&ev_other.past, b, "perturbed past infinity")?)] = R::one();
    }
    let tol = if R::EXACT { R::zero() } else { R::from_f64_lossy(1e-13) };
    let alpha_inv = linalg::inverse(&ev_other.alpha, &tol).ok_or(Error::NotInvertible { side: "perturbed" })?;
    let n = cs.len();
    let basis = DMatrix::from_fn(n, m, |p, j| g.ret[(p, ev.past[j])].clone());
    let s_plus = DMatrix::from_fn(m, n, |i, q| if ev.future[i] == q { R::one() } else { R::zero() });
    let matrix = &basis * (iota_m_inv * alpha_inv * iota_p * s_plus);
    Ok(Rce { matrix, basis, alpha: ev.alpha, alpha_perturbed: ev_other.alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causet::{PastRule, PreferredPast};
    use crate::discrete::{build_plambda, greens};
    use crate::generators::{diamond_lattice, LatticeSpec};

    #[test]
    fn zero_inputs_give_zero() {
        let lat = diamond_lattice(LatticeSpec::square(3, 1.0));
        let cs = lat.causet();
        let pp = PreferredPast::choose(cs, PastRule::MaxLayer).unwrap();
        let w = build_plambda::<f64>(cs, &pp);
        let g = greens(&w).unwrap();
        let zero = vec![0.0; cs.len()];
        assert_eq!(solve_cauchy(&w, &zero, &zero).unwrap(), zero);
        let mut f = zero.clone();
        let mut data = zero.clone();
        f[lat.at(2, 2)] = 1.5;
        data[lat.at(1, 0)] = -0.5;
        let phi = solve_cauchy(&w, &f, &data).unwrap();
        for p in 0..cs.len() {
            let want = g.ret[(p, lat.at(2, 2))] * 1.5 - 0.5 * g.ret[(p, lat.at(1, 0))];
            assert!((phi[p] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn source_on_boundary_is_rejected() {
        let lat = diamond_lattice(LatticeSpec::square(3, 1.0));
        let cs = lat.causet();
        let pp = PreferredPast::choose(cs, PastRule::MaxLayer).unwrap();
        let w = build_plambda::<f64>(cs, &pp);
        let mut f = vec![0.0; cs.len()];
        f[lat.at(0, 0)] = 1.0;
        match solve_cauchy(&w, &f, &vec![0.0; cs.len()]) {
            Err(Error::Precondition { indices, .. }) => assert_eq!(indices, vec![lat.at(0, 0)]),
            other => panic!("{other:?}"),
        }
    }
}
