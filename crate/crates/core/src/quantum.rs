//! Free deformation quantization: Moyal and Wick star products, normal
//! ordering, the SJ two-point function and quasifree states.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;
use serde::Serialize;

use crate::discrete::GreenSet;
use crate::error::{Error, Result};
use crate::functional::{laplacian, Exponential, FormalSeries, Orders, PolyFunctional, Pointwise};
use crate::linalg;
use crate::scalar::{c_from_f64, c_i, c_real, c_to_f64, factorial, Real, C};

/// A two-point function `W = (i/2)E + H` with `H` real symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPoint<R: Real> {
    pub w: DMatrix<C<R>>,
    pub h: DMatrix<R>,
    pub e: DMatrix<R>,
}

impl<R: Real> TwoPoint<R> {
    /// Assembles `W` from `E` and a symmetric `H`.
    pub fn from_parts(e: DMatrix<R>, h: DMatrix<R>) -> Result<Self> {
        if e.shape() != h.shape() || e.nrows() != e.ncols() {
            return Err(Error::Dimension("E and H must be square of equal size".into()));
        }
        let n = e.nrows();
        for i in 0..n {
            for j in 0..i {
                if h[(i, j)] != h[(j, i)] {
                    return Err(Error::Invalid(format!("H is not symmetric at ({i}, {j})")));
                }
            }
        }
        let half = R::half();
        let w = DMatrix::from_fn(n, n, |i, j| C::new(h[(i, j)].clone(), half.clone() * e[(i, j)].clone()));
        Ok(TwoPoint { w, h, e })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// `fᵀ W g`.
    pub fn pair(&self, f: &[R], g: &[R]) -> C<R> {
        let mut acc = c_real(R::zero());
        for (i, fi) in f.iter().enumerate() {
            if fi.is_zero() {
                continue;
            }
            for (j, gj) in g.iter().enumerate() {
                acc += self.w[(i, j)].clone() * (fi.clone() * gj.clone());
            }
        }
        acc
    }

    /// `H` with complex entries, for self-contractions.
    pub fn h_complex(&self) -> DMatrix<C<R>> {
        self.h.map(c_real)
    }
}

/// How well a two-point function meets the state axioms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TwoPointReport {
    /// `max |W − W̄ − iE|`.
    pub commutator: f64,
    /// `min eig W / max eig W`.
    pub min_eig_ratio: f64,
    /// `‖W̄W‖ / ‖W‖²` in the Frobenius norm.
    pub conjugate_product: f64,
    /// Largest `‖E v‖` over unit kernel vectors `v` of `W`.
    pub kernel_leak: f64,
}

impl TwoPoint<f64> {
    pub fn report(&self) -> TwoPointReport {
        let n = self.n();
        let ie = self.e.map(|x| Complex::new(0.0, x));
        let commutator = (&self.w - self.w.conjugate() - ie).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let eig = nalgebra::SymmetricEigen::new(self.w.clone());
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let min_eig_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        let wn = self.w.norm();
        let conjugate_product = if wn > 0.0 { (self.w.conjugate() * &self.w).norm() / (wn * wn) } else { 0.0 };
        let ec = self.e.map(c_real);
        let cut = 1e-10 * hi.max(f64::MIN_POSITIVE);
        let kernel_leak = (0..n)
            .filter(|&k| eig.eigenvalues[k].abs() <= cut)
            .map(|k| (&ec * eig.eigenvectors.column(k)).norm())
            .fold(0.0, f64::max);
        TwoPointReport { commutator, min_eig_ratio, conjugate_product, kernel_leak }
    }
}

/// The SJ two-point function: the positive spectral part of `iE`.
///
/// Eigenvalues within `1e-12 · max|μ|` of zero are treated as kernel. `H` is
/// taken as the symmetrized real part, so `W − W̄ = iE` holds exactly.
pub fn sj_two_point(gs: &GreenSet<f64>) -> Result<TwoPoint<f64>> {
    let e = linalg::to_f64(&gs.e);
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("non-finite commutator entries".into()));
    }
    let (values, vectors) = linalg::spectrum_of_ie(&e);
    let tau = 1e-12 * values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let n = e.nrows();
    let mut pos = DMatrix::<Complex<f64>>::zeros(n, n);
    for (k, &mu) in values.iter().enumerate() {
        if mu > tau {
            let v = vectors.column(k);
            pos += (v * v.adjoint()) * Complex::new(mu, 0.0);
        }
    }
    let h = DMatrix::from_fn(n, n, |i, j| 0.5 * (pos[(i, j)].re + pos[(j, i)].re));
    TwoPoint::from_parts(e, h)
}

/// `½(iE + √(EᵀE))` with the square root from a real symmetric
/// eigendecomposition: an independent route to the SJ function.
///
/// Rounding noise of size `ε‖E‖²` in the eigenvalues of `EᵀE` would become
/// `√ε‖E‖` after the square root, so eigenvalues below `1e-14` of the largest
/// are taken as kernel.
pub fn sj_via_square_root(gs: &GreenSet<f64>) -> DMatrix<Complex<f64>> {
    let e = linalg::to_f64(&gs.e);
    let ete = e.transpose() * &e;
    let eig = nalgebra::SymmetricEigen::new(ete);
    let cut = 1e-14 * eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x));
    let roots = eig.eigenvalues.map(|x| if x > cut { x.sqrt() } else { 0.0 });
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    DMatrix::from_fn(e.nrows(), e.ncols(), |i, j| Complex::new(0.5 * root[(i, j)], 0.5 * e[(i, j)]))
}

/// `M = (i/2)E`, the Moyal contraction matrix.
pub fn moyal_product<R: Real>(gs: &GreenSet<R>) -> Exponential<R> {
    let half_i = c_i::<R>() * R::half();
    Exponential::new(gs.e.map(|x| half_i.clone() * x))
}

pub fn wick_product<R: Real>(tp: &TwoPoint<R>) -> Exponential<R> {
    Exponential::new(tp.w.clone())
}

fn exact_orders<R: Real>(f: &PolyFunctional<R>, g: &PolyFunctional<R>) -> Orders {
    Orders::new(f.degree().min(g.degree()) as i32, 0)
}

/// `F ⋆ G = Σ (ℏⁿ/n!) (i/2)ⁿ ⟨∂ⁿF, Eⁿ ∂ⁿG⟩`, summed to the last nonzero order.
pub fn moyal_star<R: Real>(f: &PolyFunctional<R>, g: &PolyFunctional<R>, gs: &GreenSet<R>) -> Result<FormalSeries<R>> {
    let o = exact_orders(f, g);
    FormalSeries::from_poly(f.clone(), o)?.mul(&FormalSeries::from_poly(g.clone(), o)?, &moyal_product(gs))
}

/// `F ⋆_H G = Σ (ℏⁿ/n!) ⟨∂ⁿF, Wⁿ ∂ⁿG⟩`.
pub fn wick_star<R: Real>(f: &PolyFunctional<R>, g: &PolyFunctional<R>, tp: &TwoPoint<R>) -> Result<FormalSeries<R>> {
    let o = exact_orders(f, g);
    FormalSeries::from_poly(f.clone(), o)?.mul(&FormalSeries::from_poly(g.clone(), o)?, &wick_product(tp))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `α_H = e^{(ℏ/2)𝒟_H}`.
    Forward,
    /// `α_H⁻¹ = e^{−(ℏ/2)𝒟_H}`, normal ordering.
    Inverse,
}

/// `α_H^{±1}` applied to a series; each coefficient's expansion terminates.
pub fn alpha_h<R: Real>(s: &FormalSeries<R>, h: &DMatrix<C<R>>, direction: Direction) -> Result<FormalSeries<R>> {
    let sign = match direction {
        Direction::Forward => R::one(),
        Direction::Inverse => -R::one(),
    };
    let step = sign * R::half();
    let mut out = FormalSeries::zero(s.n(), s.orders());
    if s.is_truncated() {
        out.mark_truncated();
    }
    for (&(hp, m), p) in s.terms() {
        let mut cur = p.clone();
        let mut k = 0usize;
        let mut coeff = R::one();
        while !cur.is_zero() {
            out.add_scaled_at(hp + k as i32, m, &cur, &c_real(coeff.clone()))?;
            k += 1;
            coeff = coeff * step.clone() / R::of_usize(k);
            cur = laplacian(&cur, h);
        }
    }
    Ok(out)
}

/// `α_H^{±1} F` for a polynomial, exactly.
pub fn alpha_h_poly<R: Real>(f: &PolyFunctional<R>, h: &DMatrix<C<R>>, direction: Direction) -> Result<FormalSeries<R>> {
    alpha_h(&FormalSeries::from_poly(f.clone(), Orders::new((f.degree() / 2) as i32, 0))?, h, direction)
}

/// `ω₀(F) = F(0)`, coefficient by coefficient.
pub fn omega0<R: Real>(s: &FormalSeries<R>) -> BTreeMap<(i32, u32), C<R>> {
    s.terms().map(|(k, p)| (*k, p.constant_term())).filter(|(_, c)| !c.is_zero()).collect()
}

/// `Σ_{h,m} ℏ^h λ^m ω₀(F)_{h,m}` at numerical `ℏ`, `λ`.
pub fn omega0_at<R: Real>(s: &FormalSeries<R>, hbar: f64, lambda: f64) -> Complex<f64> {
    omega0(s).iter().map(|(&(h, m), c)| c_to_f64(c) * hbar.powi(h) * lambda.powi(m as i32)).sum()
}

/// `Σ_{matchings} Π_{(s<t)} f_sᵀ W f_t` at `ℏ = 1`.
pub fn quasifree_npoint<R: Real>(fs: &[Vec<R>], tp: &TwoPoint<R>) -> Result<C<R>> {
    if fs.len() % 2 == 1 {
        return Err(Error::OddCorrelator(fs.len()));
    }
    let k = fs.len();
    let pairs: Vec<Vec<C<R>>> = (0..k).map(|a| (0..k).map(|b| if a < b { tp.pair(&fs[a], &fs[b]) } else { c_real(R::zero()) }).collect()).collect();
    fn rec<R: Real>(left: &[usize], pairs: &[Vec<C<R>>]) -> C<R> {
        let Some((&first, rest)) = left.split_first() else {
            return c_real(R::one());
        };
        let mut total = c_real(R::zero());
        for (pos, &partner) in rest.iter().enumerate() {
            let mut remaining = rest.to_vec();
            remaining.remove(pos);
            total += pairs[first][partner].clone() * rec(&remaining, pairs);
        }
        total
    }
    Ok(rec(&(0..k).collect::<Vec<_>>(), &pairs))
}

/// `ω₀(Φ_{f₁} ⋆_H ⋯ ⋆_H Φ_{f_n})` at `ℏ = 1`, via the star product.
pub fn npoint_by_star<R: Real>(fs: &[Vec<R>], tp: &TwoPoint<R>) -> Result<C<R>> {
    let n = tp.n();
    let o = Orders::new(fs.len() as i32, 0);
    let rule = wick_product(tp);
    let mut acc = FormalSeries::one(n, o);
    for f in fs {
        acc = acc.mul(&FormalSeries::from_poly(PolyFunctional::linear_real(f), o)?, &rule)?;
    }
    Ok(omega0(&acc).into_values().fold(c_real(R::zero()), |a, b| a + b))
}

/// `Re ω₀(F* ⋆_H F)` at `ℏ = 1`.
pub fn positivity<R: Real>(f: &PolyFunctional<R>, tp: &TwoPoint<R>) -> Result<f64> {
    Ok(omega0_at(&wick_star(&f.conj(), f, tp)?, 1.0, 1.0).re)
}

/// `Σ_{k ≤ m} (iΦ_g)^k / k!`, with the `λ` slot counting powers of `g`.
pub fn weyl_functional<R: Real>(g: &[R], order: u32, orders: Orders) -> Result<FormalSeries<R>> {
    let n = g.len();
    let ig = PolyFunctional::linear(&g.iter().map(|x| c_i::<R>() * x.clone()).collect::<Vec<_>>());
    let mut out = FormalSeries::zero(n, orders);
    let mut power = PolyFunctional::one(n);
    for k in 0..=order {
        out.add_scaled_at(0, k, &power, &c_real(R::one() / factorial::<R>(k as usize)))?;
        power = power.mul(&ig);
    }
    Ok(out)
}

/// `Σ_{j} (c ℏ t²)^j / j!` truncated at `t^m`.
fn exp_scalar<R: Real>(n: usize, c: &C<R>, m: u32, orders: Orders) -> Result<FormalSeries<R>> {
    let mut out = FormalSeries::zero(n, orders);
    let mut power = c_real(R::one());
    for j in 0..=m / 2 {
        out.add_scaled_at(j as i32, 2 * j, &PolyFunctional::one(n), &(power.clone() / c_real(factorial::<R>(j as usize))))?;
        power *= c.clone();
    }
    Ok(out)
}

/// Largest coefficient discrepancy in
/// `𝒲(g) ⋆ 𝒲(g̃) = e^{−(iℏ/2)σ(g,g̃)} 𝒲(g+g̃)`, with both sides expanded
/// to total order `m` in the field strengths.
pub fn weyl_check<R: Real>(g: &[R], gt: &[R], gs: &GreenSet<R>, m: u32) -> Result<f64> {
    let n = g.len();
    let orders = Orders { min_hbar: 0, ..Orders::new(m as i32, m) };
    let lhs = weyl_functional(g, m, orders)?.mul(&weyl_functional(gt, m, orders)?, &moyal_product(gs))?;
    let sigma = (0..n).fold(R::zero(), |acc, i| {
        acc + (0..n).fold(R::zero(), |a, j| a + g[i].clone() * gs.e[(i, j)].clone() * gt[j].clone())
    });
    let phase = exp_scalar(n, &(c_i::<R>() * (-R::half() * sigma)), m, orders)?;
    let sum: Vec<R> = g.iter().zip(gt).map(|(a, b)| a.clone() + b.clone()).collect();
    let rhs = phase.mul(&weyl_functional(&sum, m, orders)?, &Pointwise)?;
    Ok(lhs.distance(&rhs))
}

/// Discrepancy in `ω₀(α_H 𝒲(g)) = e^{−(ℏ/2)⟨g, Hg⟩}` to order `m`.
pub fn covariance_check<R: Real>(g: &[R], tp: &TwoPoint<R>, m: u32) -> Result<f64> {
    let n = g.len();
    let orders = Orders { min_hbar: 0, ..Orders::new(m as i32, m) };
    let lifted = alpha_h(&weyl_functional(g, m, orders)?, &tp.h_complex(), Direction::Forward)?;
    let ghg = (0..n).fold(R::zero(), |acc, i| acc + (0..n).fold(R::zero(), |a, j| a + g[i].clone() * tp.h[(i, j)].clone() * g[j].clone()));
    let want = exp_scalar(n, &c_real(-R::half() * ghg), m, orders)?;
    let got = omega0(&lifted);
    let keys: std::collections::BTreeSet<(i32, u32)> = got.keys().copied().chain(omega0(&want).keys().copied()).collect();
    let want = omega0(&want);
    let zero = c_real(R::zero());
    Ok(keys
        .into_iter()
        .map(|k| crate::scalar::c_norm_f64(&(got.get(&k).unwrap_or(&zero).clone() - want.get(&k).unwrap_or(&zero).clone())))
        .fold(0.0, f64::max))
}

/// Real symmetric part of a two-point function given in `f64`, converted.
pub fn convert_two_point<R: Real>(tp: &TwoPoint<f64>) -> TwoPoint<R> {
    TwoPoint {
        w: tp.w.map(c_from_f64),
        h: tp.h.map(R::from_f64_lossy),
        e: tp.e.map(R::from_f64_lossy),
    }
}
