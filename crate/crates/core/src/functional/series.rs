use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::contract::contract;
use super::poly::{PolyFunctional, PolyJson};
use crate::error::{Error, Result};
use crate::scalar::{c_real, factorial, Real, C};

/// Truncation orders of a formal series in `ℏ` and `λ`.
///
/// A coefficient `ℏ^h λ^m` is kept iff `m ≤ lambda` and `h ≤ hbar`, except
/// that internal series carry `lambda − m` extra powers of `ℏ` as headroom:
/// every further power of `λ` can bring at most one `ℏ⁻¹`, so a term that is
/// dropped with headroom could never have come back down to order `hbar`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orders {
    pub hbar: i32,
    pub lambda: u32,
    pub min_hbar: i32,
    pub degree_cap: usize,
    pub headroom: bool,
}

pub const DEFAULT_DEGREE_CAP: usize = 12;

impl Orders {
    pub fn new(hbar: i32, lambda: u32) -> Self {
        Orders { hbar, lambda, min_hbar: -(lambda as i32), degree_cap: DEFAULT_DEGREE_CAP, headroom: false }
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    pub fn internal(mut self) -> Self {
        self.headroom = true;
        self
    }

    pub fn external(mut self) -> Self {
        self.headroom = false;
        self
    }

    /// Highest kept power of `ℏ` at `λ^m`, `None` when `m` is past the `λ` order.
    pub fn max_hbar(&self, m: u32) -> Option<i32> {
        if m > self.lambda {
            return None;
        }
        Some(self.hbar + if self.headroom { (self.lambda - m) as i32 } else { 0 })
    }

    pub fn keeps(&self, h: i32, m: u32) -> bool {
        self.max_hbar(m).is_some_and(|top| h <= top)
    }
}

/// A bilinear product on polynomial functionals that may raise the power of `ℏ`.
pub trait Product<R: Real> {
    /// `(k, P_k)` with `F ∘ G = Σ_k ℏᵏ P_k`, up to `k ≤ max_shift`. The flag
    /// reports whether nonzero terms beyond `max_shift` may exist.
    fn expand(&self, f: &PolyFunctional<R>, g: &PolyFunctional<R>, max_shift: i32) -> (Vec<(i32, PolyFunctional<R>)>, bool);
}

/// The commutative pointwise product.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pointwise;

impl<R: Real> Product<R> for Pointwise {
    fn expand(&self, f: &PolyFunctional<R>, g: &PolyFunctional<R>, max_shift: i32) -> (Vec<(i32, PolyFunctional<R>)>, bool) {
        if max_shift < 0 {
            return (Vec::new(), !(f.is_zero() || g.is_zero()));
        }
        (vec![(0, f.mul(g))], false)
    }
}

/// `F ⋆ G = Σ_k ℏᵏ/k! · contract(F, G, M, k)`.
///
/// `M = (i/2)E` gives the Moyal product, `M = W` the Wick product for a
/// two-point function `W`, and a Feynman propagator gives the time-ordered
/// product.
#[derive(Clone, Debug)]
pub struct Exponential<R: Real> {
    pub matrix: DMatrix<C<R>>,
}

impl<R: Real> Exponential<R> {
    pub fn new(matrix: DMatrix<C<R>>) -> Self {
        Exponential { matrix }
    }
}

impl<R: Real> Product<R> for Exponential<R> {
    fn expand(&self, f: &PolyFunctional<R>, g: &PolyFunctional<R>, max_shift: i32) -> (Vec<(i32, PolyFunctional<R>)>, bool) {
        let top = f.degree().min(g.degree());
        let mut out = Vec::new();
        if f.is_zero() || g.is_zero() {
            return (out, false);
        }
        for k in 0..=top {
            if k as i32 > max_shift {
                return (out, true);
            }
            let p = contract(f, g, &self.matrix, k);
            if !p.is_zero() {
                out.push((k as i32, p.scale_real(&(R::one() / factorial::<R>(k)))));
            }
        }
        (out, false)
    }
}

/// A truncated formal power series `Σ ℏ^h λ^m F_{h,m}` with polynomial
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalSeries<R: Real> {
    n: usize,
    orders: Orders,
    terms: BTreeMap<(i32, u32), PolyFunctional<R>>,
    truncated: bool,
}

impl<R: Real> FormalSeries<R> {
    pub fn zero(n: usize, orders: Orders) -> Self {
        FormalSeries { n, orders, terms: BTreeMap::new(), truncated: false }
    }

    /// `F` placed at `ℏ⁰ λ⁰`.
    pub fn from_poly(f: PolyFunctional<R>, orders: Orders) -> Result<Self> {
        Self::term(f, 0, 0, orders)
    }

    /// `ℏ^h λ^m F`.
    pub fn term(f: PolyFunctional<R>, h: i32, m: u32, orders: Orders) -> Result<Self> {
        let mut s = Self::zero(f.n(), orders);
        s.add_at(h, m, &f)?;
        Ok(s)
    }

    pub fn one(n: usize, orders: Orders) -> Self {
        let mut s = Self::zero(n, orders);
        s.terms.insert((0, 0), PolyFunctional::one(n));
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn orders(&self) -> Orders {
        self.orders
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn mark_truncated(&mut self) {
        self.truncated = true;
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i32, u32), &PolyFunctional<R>)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, h: i32, m: u32) -> PolyFunctional<R> {
        self.terms.get(&(h, m)).cloned().unwrap_or_else(|| PolyFunctional::zero(self.n))
    }

    /// The `λ^m` part as a series in `ℏ` alone.
    pub fn lambda_part(&self, m: u32) -> Self {
        let mut s = Self::zero(self.n, self.orders);
        s.truncated = self.truncated;
        s.terms = self.terms.iter().filter(|(k, _)| k.1 == m).map(|(k, p)| (*k, p.clone())).collect();
        s
    }

    /// Largest coefficient degree.
    pub fn degree(&self) -> usize {
        self.terms.values().map(PolyFunctional::degree).max().unwrap_or(0)
    }

    /// `self += ℏ^h λ^m F`, honouring truncation, the `ℏ` floor and the degree cap.
    pub fn add_at(&mut self, h: i32, m: u32, f: &PolyFunctional<R>) -> Result<()> {
        self.add_scaled_at(h, m, f, &c_real(R::one()))
    }

    pub fn add_scaled_at(&mut self, h: i32, m: u32, f: &PolyFunctional<R>, s: &C<R>) -> Result<()> {
        if f.is_zero() || s.is_zero() {
            return Ok(());
        }
        if !self.orders.keeps(h, m) {
            self.truncated = true;
            return Ok(());
        }
        if h < self.orders.min_hbar {
            return Err(Error::HbarUnderflow { power: h, min: self.orders.min_hbar });
        }
        if f.degree() > self.orders.degree_cap {
            return Err(Error::DegreeCap { degree: f.degree(), cap: self.orders.degree_cap });
        }
        let slot = self.terms.entry((h, m)).or_insert_with(|| PolyFunctional::zero(self.n));
        slot.add_scaled(f, s);
        if slot.is_zero() {
            self.terms.remove(&(h, m));
        }
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &Self, s: &C<R>) -> Result<()> {
        self.truncated |= other.truncated;
        for (&(h, m), f) in &other.terms {
            self.add_scaled_at(h, m, f, s)?;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(other, &c_real(R::one()))?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(other, &c_real(-R::one()))?;
        Ok(out)
    }

    pub fn scale(&self, s: &C<R>) -> Self {
        let mut out = self.clone();
        out.terms = self.terms.iter().map(|(k, f)| (*k, f.scale(s))).filter(|(_, f)| !f.is_zero()).collect();
        out
    }

    /// Multiplies by `ℏ^dh λ^dm`.
    pub fn shift(&self, dh: i32, dm: u32) -> Result<Self> {
        let mut out = Self::zero(self.n, self.orders);
        out.truncated = self.truncated;
        for (&(h, m), f) in &self.terms {
            out.add_at(h + dh, m + dm, f)?;
        }
        Ok(out)
    }

    /// Applies a linear map to every coefficient.
    pub fn map_coefficients(&self, f: impl Fn(&PolyFunctional<R>) -> PolyFunctional<R>) -> Result<Self> {
        let mut out = Self::zero(self.n, self.orders);
        out.truncated = self.truncated;
        for (&(h, m), p) in &self.terms {
            out.add_at(h, m, &f(p))?;
        }
        Ok(out)
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.terms = self.terms.iter().map(|(k, f)| (*k, f.conj())).collect();
        out
    }

    /// Product under `rule`, truncated to this series' orders.
    pub fn mul(&self, other: &Self, rule: &impl Product<R>) -> Result<Self> {
        let mut out = Self::zero(self.n, self.orders);
        out.truncated = self.truncated || other.truncated;
        for (&(h1, m1), f) in &self.terms {
            for (&(h2, m2), g) in &other.terms {
                let Some(top) = out.orders.max_hbar(m1 + m2) else {
                    out.truncated = true;
                    continue;
                };
                let (parts, cut) = rule.expand(f, g, top - h1 - h2);
                out.truncated |= cut;
                for (k, p) in parts {
                    out.add_at(h1 + h2 + k, m1 + m2, &p)?;
                }
            }
        }
        Ok(out)
    }

    /// `k`-th power under `rule`.
    pub fn pow(&self, k: usize, rule: &impl Product<R>) -> Result<Self> {
        let mut acc = Self::one(self.n, self.orders);
        for _ in 0..k {
            acc = acc.mul(self, rule)?;
        }
        Ok(acc)
    }

    /// Reinterprets the series under new orders, dropping what no longer fits.
    pub fn with_orders(&self, orders: Orders) -> Result<Self> {
        let mut out = Self::zero(self.n, orders);
        out.truncated = self.truncated;
        for (&(h, m), f) in &self.terms {
            out.add_at(h, m, f)?;
        }
        Ok(out)
    }

    /// Drops the internal `ℏ` headroom.
    pub fn finalize(&self) -> Result<Self> {
        self.with_orders(self.orders.external())
    }

    /// Coefficients evaluated at a configuration.
    pub fn evaluate(&self, phi: &[R]) -> BTreeMap<(i32, u32), C<R>> {
        self.terms.iter().map(|(k, f)| (*k, f.evaluate(phi))).collect()
    }

    /// `max_{h,m} ‖F_{h,m} − G_{h,m}‖` over coefficients.
    pub fn distance(&self, other: &Self) -> f64 {
        let keys: std::collections::BTreeSet<_> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|&(h, m)| self.coefficient(h, m).distance(&other.coefficient(h, m)))
            .fold(0.0, f64::max)
    }

    pub fn max_norm_f64(&self) -> f64 {
        self.terms.values().map(PolyFunctional::max_norm_f64).fold(0.0, f64::max)
    }

    /// Coefficients keyed `"h<p>_l<q>"`.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .terms
            .iter()
            .map(|(&(h, m), f)| (format!("h{h}_l{m}"), serde_json::to_value(f.to_json()).expect("plain data serializes")))
            .collect();
        serde_json::json!({
            "n": self.n,
            "hbar_order": self.orders.hbar,
            "lambda_order": self.orders.lambda,
            "truncated": self.truncated,
            "coefficients": map,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |what: &str| Error::Invalid(format!("series json: {what}"));
        let n = v["n"].as_u64().ok_or_else(|| bad("missing n"))? as usize;
        let hbar = v["hbar_order"].as_i64().ok_or_else(|| bad("missing hbar_order"))? as i32;
        let lambda = v["lambda_order"].as_u64().ok_or_else(|| bad("missing lambda_order"))? as u32;
        let mut s = Self::zero(n, Orders::new(hbar, lambda));
        s.truncated = v["truncated"].as_bool().unwrap_or(false);
        let coeffs = v["coefficients"].as_object().ok_or_else(|| bad("missing coefficients"))?;
        for (key, val) in coeffs {
            let (h, m) = parse_key(key).ok_or_else(|| bad(key))?;
            let pj: PolyJson = serde_json::from_value(val.clone())?;
            s.add_at(h, m, &PolyFunctional::from_json(&pj)?)?;
        }
        Ok(s)
    }
}

fn parse_key(key: &str) -> Option<(i32, u32)> {
    let (h, m) = key.strip_prefix('h')?.split_once("_l")?;
    Some((h.parse().ok()?, m.parse().ok()?))
}

/// `F(s₁, …, s_N)` for series `s_i`, using pointwise products.
pub fn compose<R: Real>(f: &PolyFunctional<R>, subs: &[FormalSeries<R>], orders: Orders) -> Result<FormalSeries<R>> {
    if subs.len() != f.n() {
        return Err(Error::Dimension(format!("composition needs {} series, got {}", f.n(), subs.len())));
    }
    let n = subs.first().map_or(0, FormalSeries::n);
    let subs: Vec<FormalSeries<R>> = subs.iter().map(|s| s.with_orders(orders)).collect::<Result<_>>()?;
    let mut out = FormalSeries::zero(n, orders);
    // Monomials are sorted, so consecutive terms share prefixes; memoize them.
    let mut cache: BTreeMap<Vec<u32>, FormalSeries<R>> = BTreeMap::new();
    for (idx, c) in f.terms() {
        let mut prefix = Vec::new();
        let mut acc = FormalSeries::one(n, orders);
        for &i in idx {
            prefix.push(i);
            acc = match cache.get(&prefix) {
                Some(hit) => hit.clone(),
                None => {
                    let next = acc.mul(&subs[i as usize], &Pointwise)?;
                    cache.insert(prefix.clone(), next.clone());
                    next
                }
            };
        }
        out.add_scaled(&acc, c)?;
    }
    Ok(out)
}

/// `X(s₁, …, s_N)` for a series `X`, composing coefficientwise.
pub fn compose_series<R: Real>(x: &FormalSeries<R>, subs: &[FormalSeries<R>], orders: Orders) -> Result<FormalSeries<R>> {
    let n = subs.first().map_or(0, FormalSeries::n);
    let mut out = FormalSeries::zero(n, orders);
    out.truncated = x.truncated;
    for (&(h, m), p) in &x.terms {
        if !orders.keeps(h, m) {
            out.truncated = true;
            continue;
        }
        let part = compose(p, subs, orders)?.shift(h, m)?;
        out.add_scaled(&part, &c_real(R::one()))?;
    }
    Ok(out)
}
