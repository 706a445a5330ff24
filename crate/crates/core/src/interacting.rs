//! Perturbative interacting quantum theory: time-ordered products, the
//! formal S-matrix, the quantum Møller operator and the interacting star
//! product and correlators.

use nalgebra::DMatrix;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::classical::Interaction;
use crate::discrete::GreenSet;
use crate::error::{Error, Result};
use crate::functional::{Exponential, FormalSeries, Orders, PolyFunctional};
use crate::quantum::{omega0, wick_product, TwoPoint};
use crate::scalar::{c_i, c_real, factorial, Real, C};

/// Which Green function the quantum Møller operator reduces to at `ℏ = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `ΔF = H − (i/2)(E⁺ + E⁻)`, so `ΔF − W = −iE⁻` and `R_{λV}` tends to
    /// the retarded classical Møller map.
    #[default]
    Retarded,
    /// `ΔF = H + (i/2)(E⁺ + E⁻)`, so `ΔF − W = iE⁺` and `R_{λV}` tends to
    /// the advanced one.
    Advanced,
}

/// A symmetric Feynman-like propagator built from a two-point function.
#[derive(Clone, Debug, PartialEq)]
pub struct FeynmanPropagator<R: Real> {
    pub df: DMatrix<C<R>>,
    pub orientation: Orientation,
}

pub fn feynman<R: Real>(tp: &TwoPoint<R>, gs: &GreenSet<R>, orientation: Orientation) -> Result<FeynmanPropagator<R>> {
    if tp.e != gs.e {
        return Err(Error::Invalid("two-point function was built over a different commutator".into()));
    }
    let half = match orientation {
        Orientation::Retarded => -R::half(),
        Orientation::Advanced => R::half(),
    };
    let n = tp.n();
    let df = DMatrix::from_fn(n, n, |i, j| {
        C::new(tp.h[(i, j)].clone(), half.clone() * (gs.ret[(i, j)].clone() + gs.adv[(i, j)].clone()))
    });
    Ok(FeynmanPropagator { df, orientation })
}

impl<R: Real> FeynmanPropagator<R> {
    pub fn product(&self) -> Exponential<R> {
        Exponential::new(self.df.clone())
    }
}

/// `F ·_T G = Σ (ℏⁿ/n!) ⟨∂ⁿF, ΔFⁿ ∂ⁿG⟩`, summed to the last nonzero order.
pub fn time_ordered<R: Real>(f: &PolyFunctional<R>, g: &PolyFunctional<R>, fp: &FeynmanPropagator<R>) -> Result<FormalSeries<R>> {
    let o = Orders::new(f.degree().min(g.degree()) as i32, 0);
    FormalSeries::from_poly(f.clone(), o)?.mul(&FormalSeries::from_poly(g.clone(), o)?, &fp.product())
}

/// `𝒮(λV) = Σ_{n ≤ O_λ} (iλ/ℏ)ⁿ/n! · V ·_T ⋯ ·_T V`.
pub fn smatrix<R: Real>(v: &Interaction<R>, orders: Orders, fp: &FeynmanPropagator<R>) -> Result<FormalSeries<R>> {
    let n = v.n();
    let rule = fp.product();
    let mut vertex = FormalSeries::zero(n, orders);
    vertex.add_scaled_at(-1, 1, v.potential(), &c_i::<R>())?;
    let mut out = FormalSeries::one(n, orders);
    let mut power = FormalSeries::one(n, orders);
    for k in 1..=orders.lambda as usize {
        power = power.mul(&vertex, &rule)?;
        out.add_scaled(&power, &c_real(R::one() / factorial::<R>(k)))?;
    }
    Ok(out)
}

/// `T` with `T ⋆_H S = 1` through the `λ` order of `S`, built from
/// `t_n = −s_n − Σ_{0<j<n} t_j ⋆_H s_{n−j}`.
pub fn smatrix_inverse<R: Real>(s: &FormalSeries<R>, tp: &TwoPoint<R>) -> Result<FormalSeries<R>> {
    let n = s.n();
    let orders = s.orders();
    if s.lambda_part(0).sub(&FormalSeries::one(n, orders))?.terms().next().is_some() {
        return Err(Error::NonUnitLeading);
    }
    let rule = wick_product(tp);
    let parts: Vec<FormalSeries<R>> = (0..=orders.lambda).map(|m| s.lambda_part(m)).collect();
    let mut ts: Vec<FormalSeries<R>> = vec![FormalSeries::one(n, orders)];
    for m in 1..=orders.lambda as usize {
        let mut t = parts[m].scale(&c_real(-R::one()));
        for j in 1..m {
            t.add_scaled(&ts[j].mul(&parts[m - j], &rule)?, &c_real(-R::one()))?;
        }
        ts.push(t);
    }
    let mut out = FormalSeries::zero(n, orders);
    for t in &ts {
        out.add_scaled(t, &c_real(R::one()))?;
    }
    if s.is_truncated() {
        out.mark_truncated();
    }
    Ok(out)
}

/// Checks that no negative power of `ℏ` survives beyond `tol` and drops the
/// rounding residue that does.
pub fn physical<R: Real>(s: &FormalSeries<R>, tol: f64) -> Result<FormalSeries<R>> {
    let mut out = FormalSeries::zero(s.n(), s.orders());
    if s.is_truncated() {
        out.mark_truncated();
    }
    for (&(h, m), p) in s.terms() {
        if h < 0 {
            let size = p.max_norm_f64();
            if size > tol {
                return Err(Error::Unphysical { hbar: h, lambda: m, size });
            }
            continue;
        }
        out.add_at(h, m, p)?;
    }
    Ok(out)
}

pub const PHYSICALITY_TOL: f64 = 1e-10;

/// The perturbative interacting theory for one interaction, state and
/// propagator at fixed truncation orders.
#[derive(Clone, Debug)]
pub struct InteractingTheory<R: Real> {
    n: usize,
    orders: Orders,
    internal: Orders,
    wick: Exponential<R>,
    time: Exponential<R>,
    s: FormalSeries<R>,
    s_inv: FormalSeries<R>,
}

impl<R: Real> InteractingTheory<R> {
    pub fn new(v: &Interaction<R>, tp: &TwoPoint<R>, fp: &FeynmanPropagator<R>, orders: Orders) -> Result<Self> {
        let orders = orders.external();
        let internal = orders.internal();
        let s = smatrix(v, internal, fp)?;
        let s_inv = smatrix_inverse(&s, tp)?;
        Ok(InteractingTheory { n: v.n(), orders, internal, wick: wick_product(tp), time: fp.product(), s, s_inv })
    }

    pub fn orders(&self) -> Orders {
        self.orders
    }

    pub fn smatrix(&self) -> &FormalSeries<R> {
        &self.s
    }

    pub fn smatrix_inverse(&self) -> &FormalSeries<R> {
        &self.s_inv
    }

    fn lift(&self, f: &PolyFunctional<R>) -> Result<FormalSeries<R>> {
        FormalSeries::from_poly(f.clone(), self.internal)
    }

    fn finish(&self, s: &FormalSeries<R>) -> Result<FormalSeries<R>> {
        physical(&s.finalize()?, PHYSICALITY_TOL)
    }

    /// `R_{λV}(X) = 𝒮⁻¹ ⋆_H (𝒮 ·_T X)` on an internal series.
    pub fn apply_moller(&self, x: &FormalSeries<R>) -> Result<FormalSeries<R>> {
        self.s_inv.mul(&self.s.mul(x, &self.time)?, &self.wick)
    }

    /// `R_{λV}⁻¹`, by iterating `X ← Y − (R − id)X`: since `R − id` raises
    /// the `λ` order, each pass fixes one more order.
    pub fn apply_moller_inverse(&self, y: &FormalSeries<R>) -> Result<FormalSeries<R>> {
        let mut x = y.clone();
        for _ in 0..self.internal.lambda {
            let rx = self.apply_moller(&x)?;
            x = y.sub(&rx.sub(&x)?)?;
        }
        Ok(x)
    }

    /// `R_{λV}(F)` truncated to the external orders.
    pub fn moller(&self, f: &PolyFunctional<R>) -> Result<FormalSeries<R>> {
        self.finish(&self.apply_moller(&self.lift(f)?)?)
    }

    fn star_int_internal(&self, a: &FormalSeries<R>, b: &FormalSeries<R>) -> Result<FormalSeries<R>> {
        let prod = self.apply_moller(a)?.mul(&self.apply_moller(b)?, &self.wick)?;
        self.apply_moller_inverse(&prod)
    }

    /// `F ⋆_{H,int} G = R⁻¹(R F ⋆_H R G)`.
    pub fn star_int(&self, f: &PolyFunctional<R>, g: &PolyFunctional<R>) -> Result<FormalSeries<R>> {
        self.finish(&self.star_int_internal(&self.lift(f)?, &self.lift(g)?)?)
    }

    /// `ω₀(R Φ_{g₁} ⋆_H ⋯ ⋆_H R Φ_{g_n})`, as a series with constant coefficients.
    pub fn npoint(&self, smearings: &[Vec<R>]) -> Result<FormalSeries<R>> {
        let mut acc = FormalSeries::one(self.n, self.internal);
        for g in smearings {
            let rg = self.apply_moller(&self.lift(&PolyFunctional::linear_real(g))?)?;
            acc = acc.mul(&rg, &self.wick)?;
        }
        self.finish(&at_zero(&acc))
    }

    /// The same correlator through the interacting product and state:
    /// `ω₀ ∘ R` applied to `Φ_{g₁} ⋆_int ⋯ ⋆_int Φ_{g_n}`.
    pub fn npoint_via_star_int(&self, smearings: &[Vec<R>]) -> Result<FormalSeries<R>> {
        let mut acc = FormalSeries::one(self.n, self.internal);
        for g in smearings {
            acc = self.star_int_internal(&acc, &self.lift(&PolyFunctional::linear_real(g))?)?;
        }
        self.finish(&at_zero(&self.apply_moller(&acc)?))
    }
}

/// Keeps only the value at `φ = 0` of every coefficient.
fn at_zero<R: Real>(s: &FormalSeries<R>) -> FormalSeries<R> {
    let mut out = FormalSeries::zero(s.n(), s.orders());
    if s.is_truncated() {
        out.mark_truncated();
    }
    for ((h, m), c) in omega0(s) {
        if !c.is_zero() {
            out.add_at(h, m, &PolyFunctional::constant(s.n(), c)).expect("constants fit");
        }
    }
    out
}

/// Correlator coefficients keyed `"h<p>_l<q>"` as `[re, im]` pairs.
pub fn correlator_json<R: Real>(s: &FormalSeries<R>) -> serde_json::Value {
    let orders: serde_json::Map<String, serde_json::Value> = omega0(s)
        .into_iter()
        .map(|((h, m), c)| {
            let z = crate::scalar::c_to_f64(&c);
            (format!("h{h}_l{m}"), serde_json::json!([z.re, z.im]))
        })
        .collect();
    let o = s.orders();
    serde_json::json!({
        "orders": orders,
        "truncation": { "hbar": o.hbar, "lambda": o.lambda, "truncated": s.is_truncated() },
        "physical": s.terms().all(|((h, _), _)| *h >= 0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{build_plambda_lattice, greens};
    use crate::generators::{diamond_lattice, LatticeSpec};
    use crate::quantum::sj_two_point;

    fn setup() -> (GreenSet<f64>, TwoPoint<f64>) {
        let lat = diamond_lattice(LatticeSpec::square(2, 1.0));
        let g = greens(&build_plambda_lattice::<f64>(&lat)).unwrap();
        let tp = sj_two_point(&g).unwrap();
        (g, tp)
    }

    #[test]
    fn propagator_identities() {
        let (g, tp) = setup();
        let ret = feynman(&tp, &g, Orientation::Retarded).unwrap();
        let adv = feynman(&tp, &g, Orientation::Advanced).unwrap();
        assert_eq!(ret.df, ret.df.transpose());
        let i = c_i::<f64>();
        let d1 = &ret.df - &tp.w + g.adv.map(|x| i * x);
        let d2 = &adv.df - &tp.w - g.ret.map(|x| i * x);
        assert!(d1.norm() < 1e-14 && d2.norm() < 1e-14);
        let zero = GreenSet::from_retarded(DMatrix::<f64>::zeros(2, 2));
        let tz = TwoPoint::from_parts(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(feynman(&tz, &zero, Orientation::Retarded).unwrap().df, DMatrix::zeros(2, 2));
    }

    #[test]
    fn time_ordering_of_linear_pair() {
        let (g, tp) = setup();
        let fp = feynman(&tp, &g, Orientation::Retarded).unwrap();
        let f = [1.0, 0.0, 0.5, 0.0];
        let h = [0.0, 1.0, 0.0, -1.0];
        let t = time_ordered(&PolyFunctional::linear_real(&f), &PolyFunctional::linear_real(&h), &fp).unwrap();
        let want = (0..4).fold(c_real(0.0), |a, i| a + (0..4).fold(c_real(0.0), |b, j| b + fp.df[(i, j)] * f[i] * h[j]));
        assert!((t.coefficient(1, 0).constant_term() - want).norm() < 1e-15);
    }

    #[test]
    fn smatrix_low_orders_and_inverse() {
        let (g, tp) = setup();
        let fp = feynman(&tp, &g, Orientation::Retarded).unwrap();
        let v = Interaction::unrestricted(PolyFunctional::hadamard_monomial(&[c_real(0.0), c_real(1.0), c_real(0.5), c_real(1.0)], 4)).unwrap();
        let o = Orders::new(2, 2).internal();
        let s = smatrix(&v, o, &fp).unwrap();
        assert_eq!(s.coefficient(0, 0), PolyFunctional::one(4));
        assert_eq!(s.coefficient(-1, 1), v.potential().scale(&c_i()));
        let vv = time_ordered(v.potential(), v.potential(), &fp).unwrap();
        for k in 0..=4 {
            let want = vv.coefficient(k, 0).scale_real(&-0.5);
            if o.keeps(k - 2, 2) {
                assert!(s.coefficient(k - 2, 2).distance(&want) < 1e-12);
            }
        }
        let t = smatrix_inverse(&s, &tp).unwrap();
        let rule = wick_product(&tp);
        for prod in [t.mul(&s, &rule).unwrap(), s.mul(&t, &rule).unwrap()] {
            assert!(prod.distance(&FormalSeries::one(4, o)) < 1e-12);
        }
        let unit = FormalSeries::one(4, o);
        assert_eq!(smatrix_inverse(&unit, &tp).unwrap(), unit);
        let bad = unit.scale(&c_real(2.0));
        assert!(matches!(smatrix_inverse(&bad, &tp), Err(Error::NonUnitLeading)));
    }

    #[test]
    fn moller_reduces_to_free_field_at_lambda_zero() {
        let (g, tp) = setup();
        let fp = feynman(&tp, &g, Orientation::Retarded).unwrap();
        let v = Interaction::unrestricted(PolyFunctional::hadamard_monomial(&[c_real(0.0), c_real(1.0), c_real(1.0), c_real(1.0)], 3)).unwrap();
        let th = InteractingTheory::new(&v, &tp, &fp, Orders::new(2, 1)).unwrap();
        let fv = [0.2, 0.0, 1.0, -0.3];
        let f = PolyFunctional::linear_real(&fv);
        let r = th.moller(&f).unwrap();
        assert!(r.lambda_part(0).distance(&FormalSeries::from_poly(f.clone(), th.orders()).unwrap()) < 1e-14);
        // At first order R(Φ_f) = Φ_f + λ fᵀE⁺V'(φ) + quantum corrections.
        let kick: Vec<PolyFunctional<f64>> = (0..4)
            .map(|j| {
                let mut acc = PolyFunctional::zero(4);
                for i in 0..4 {
                    acc.add_scaled(&v.first_poly()[j], &c_real(fv[i] * g.ret[(i, j)]));
                }
                acc
            })
            .collect();
        let want = kick.iter().fold(PolyFunctional::zero(4), |a, k| a.add(k));
        assert!(r.coefficient(0, 1).distance(&want) < 1e-12);
    }
}
