use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c_abs1, c_from_f64, c_norm_f64, c_real, c_to_f64, Real, C};

/// Sorted multi-index `i₁ ≤ … ≤ i_k` naming the monomial `φ_{i₁} ⋯ φ_{i_k}`.
pub type Monomial = Vec<u32>;

/// A complex polynomial on `ℝᴺ`, stored as monomial coefficients:
/// `F(φ) = Σ_α c_α φ^α`. The empty monomial holds the constant term.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFunctional<R> {
    n: usize,
    terms: BTreeMap<Monomial, C<R>>,
}

impl<R: Real> PolyFunctional<R> {
    pub fn zero(n: usize) -> Self {
        PolyFunctional { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: C<R>) -> Self {
        let mut f = Self::zero(n);
        f.add_term(Vec::new(), c);
        f
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, c_real(R::one()))
    }

    /// `Φ_g(φ) = gᵀφ`.
    pub fn linear(g: &[C<R>]) -> Self {
        let mut f = Self::zero(g.len());
        for (i, gi) in g.iter().enumerate() {
            f.add_term(vec![i as u32], gi.clone());
        }
        f
    }

    pub fn linear_real(g: &[R]) -> Self {
        Self::linear(&g.iter().cloned().map(c_real).collect::<Vec<_>>())
    }

    /// `Σ_i g_i φ_i^m`, the Hadamard power paired with `g`.
    pub fn hadamard_monomial(g: &[C<R>], m: usize) -> Self {
        let mut f = Self::zero(g.len());
        for (i, gi) in g.iter().enumerate() {
            f.add_term(vec![i as u32; m], gi.clone());
        }
        f
    }

    /// `φᵀ A φ` for a real matrix.
    pub fn quadratic(a: &DMatrix<R>) -> Self
    where
        R: nalgebra::Scalar,
    {
        let n = a.nrows();
        let mut f = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                let (lo, hi) = (i.min(j) as u32, i.max(j) as u32);
                f.add_term(vec![lo, hi], c_real(a[(i, j)].clone()));
            }
        }
        f
    }

    pub fn monomial(n: usize, idx: &[u32], c: C<R>) -> Self {
        let mut f = Self::zero(n);
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        f.add_term(idx, c);
        f
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Monomial, C<R>)>) -> Result<Self> {
        let mut f = Self::zero(n);
        for (mut idx, c) in terms {
            idx.sort_unstable();
            if let Some(&i) = idx.iter().find(|&&i| i as usize >= n) {
                return Err(Error::IndexOutOfRange { index: i as usize, size: n });
            }
            f.add_term(idx, c);
        }
        Ok(f)
    }

    /// Adds `c φ^idx`; `idx` must already be sorted.
    pub fn add_term(&mut self, idx: Monomial, c: C<R>) {
        debug_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        if c.is_zero() {
            return;
        }
        match self.terms.entry(idx) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C<R>)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, idx: &[u32]) -> C<R> {
        self.terms.get(idx).cloned().unwrap_or_else(|| c_real(R::zero()))
    }

    pub fn constant_term(&self) -> C<R> {
        self.coefficient(&[])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest monomial degree, zero for constants and the zero functional.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Lowest monomial degree present.
    pub fn min_degree(&self) -> usize {
        self.terms.keys().map(Vec::len).min().unwrap_or(0)
    }

    /// Homogeneous part of degree `k`.
    pub fn homogeneous(&self, k: usize) -> Self {
        PolyFunctional { n: self.n, terms: self.terms.iter().filter(|(m, _)| m.len() == k).map(|(m, c)| (m.clone(), c.clone())).collect() }
    }

    pub fn evaluate(&self, phi: &[R]) -> C<R> {
        self.terms.iter().fold(c_real(R::zero()), |acc, (idx, c)| {
            let mono = idx.iter().fold(R::one(), |p, &i| p * phi[i as usize].clone());
            acc + c.clone() * mono
        })
    }

    pub fn evaluate_complex(&self, phi: &[C<R>]) -> C<R> {
        self.terms.iter().fold(c_real(R::zero()), |acc, (idx, c)| {
            let mono = idx.iter().fold(c_real(R::one()), |p, &i| p * phi[i as usize].clone());
            acc + c.clone() * mono
        })
    }

    pub fn scale(&self, s: &C<R>) -> Self {
        let mut out = Self::zero(self.n);
        if s.is_zero() {
            return out;
        }
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.clone() * s.clone());
        }
        out
    }

    pub fn scale_real(&self, s: &R) -> Self {
        self.scale(&c_real(s.clone()))
    }

    /// In-place `self += s·other`.
    pub fn add_scaled(&mut self, other: &Self, s: &C<R>) {
        assert_eq!(self.n, other.n, "functionals over different configuration spaces");
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone() * s.clone());
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, &c_real(R::one()));
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, &c_real(-R::one()));
        out
    }

    /// Complex conjugate functional `F*`, which for real `φ` is `φ ↦ conj F(φ)`.
    pub fn conj(&self) -> Self {
        PolyFunctional { n: self.n, terms: self.terms.iter().map(|(m, c)| (m.clone(), c.conj())).collect() }
    }

    /// Pointwise product `(FG)(φ) = F(φ) G(φ)`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "functionals over different configuration spaces");
        let mut out = Self::zero(self.n);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(merge(a, b), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::one(self.n), |acc, _| acc.mul(self))
    }

    /// `∂F / ∂φ_i` as a functional.
    pub fn partial(&self, i: usize) -> Self {
        let i = i as u32;
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            let mult = m.iter().filter(|&&k| k == i).count();
            if mult == 0 {
                continue;
            }
            let mut rest = m.clone();
            let pos = rest.iter().position(|&k| k == i).unwrap();
            rest.remove(pos);
            out.add_term(rest, c.clone() * R::of_usize(mult));
        }
        out
    }

    /// Gradient functionals `(∂_1 F, …, ∂_N F)`.
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.n).map(|i| self.partial(i)).collect()
    }

    /// `F^{(k)}(φ)` as a dense symmetric tensor.
    pub fn derivative(&self, order: usize, phi: &[R]) -> SymTensor<R> {
        let n = self.n;
        let mut data = Vec::with_capacity(n.pow(order as u32));
        let mut idx = vec![0usize; order];
        loop {
            let mut d = self.clone();
            for &i in &idx {
                d = d.partial(i);
            }
            data.push(d.evaluate(phi));
            // Odometer over all index tuples.
            let mut k = order;
            loop {
                if k == 0 {
                    return SymTensor { n, order, data };
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Points where the functional depends on the field: the indices that
    /// occur in a monomial with nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.keys().flat_map(|m| m.iter().map(|&i| i as usize)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// `φ ↦ F(Mφ)`.
    pub fn linear_substitute(&self, m: &DMatrix<R>) -> Self
    where
        R: nalgebra::Scalar,
    {
        let n = m.ncols();
        let rows: Vec<Self> = (0..m.nrows())
            .map(|i| Self::linear(&(0..n).map(|j| c_real(m[(i, j)].clone())).collect::<Vec<_>>()))
            .collect();
        let mut out = Self::zero(n);
        for (idx, c) in &self.terms {
            let prod = idx.iter().fold(Self::one(n), |acc, &i| acc.mul(&rows[i as usize]));
            out.add_scaled(&prod, c);
        }
        out
    }

    /// Largest `|re| + |im|` over the coefficients.
    pub fn max_abs(&self) -> R {
        self.terms.values().map(c_abs1).fold(R::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn max_norm_f64(&self) -> f64 {
        self.terms.values().map(c_norm_f64).fold(0.0, f64::max)
    }

    /// Coefficientwise maximum distance as `f64`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).max_norm_f64()
    }

    pub fn map_scalar<S: Real>(&self, f: impl Fn(&C<R>) -> C<S>) -> PolyFunctional<S> {
        let mut out = PolyFunctional::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    pub fn to_json(&self) -> PolyJson {
        PolyJson {
            n: self.n,
            constant: pair(c_to_f64(&self.constant_term())),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| !m.is_empty())
                .map(|(m, c)| TermJson { idx: m.clone(), c: pair(c_to_f64(c)) })
                .collect(),
        }
    }

    pub fn from_json(j: &PolyJson) -> Result<Self> {
        let mut terms = vec![(Vec::new(), c_from_f64(Complex::new(j.constant[0], j.constant[1])))];
        terms.extend(j.terms.iter().map(|t| (t.idx.clone(), c_from_f64(Complex::new(t.c[0], t.c[1])))));
        Self::from_terms(j.n, terms)
    }
}

fn pair(z: Complex<f64>) -> [f64; 2] {
    [z.re, z.im]
}

/// Serialized form: monomial coefficients keyed by sorted index lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub n: usize,
    pub constant: [f64; 2],
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub idx: Vec<u32>,
    pub c: [f64; 2],
}

pub(crate) fn merge(a: &[u32], b: &[u32]) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Dense order-`k` tensor over `N` indices, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor<R> {
    pub n: usize,
    pub order: usize,
    pub data: Vec<C<R>>,
}

impl<R: Real> SymTensor<R> {
    pub fn get(&self, idx: &[usize]) -> C<R> {
        let flat = idx.iter().fold(0, |acc, &i| acc * self.n + i);
        self.data[flat].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C<f64> {
        c_real(x)
    }

    #[test]
    fn linear_evaluation() {
        let f = PolyFunctional::linear(&[c(1.0), c(0.0)]);
        assert_eq!(f.evaluate(&[3.0, 7.0]), c(3.0));
        assert_eq!(PolyFunctional::constant(2, c(5.0)).evaluate(&[1.0, 2.0]), c(5.0));
    }

    #[test]
    fn local_square() {
        let f = PolyFunctional::hadamard_monomial(&[c(0.0), c(1.0)], 2);
        assert_eq!(f.evaluate(&[9.0, 2.0]), c(4.0));
        assert_eq!(f.coefficient(&[1, 1]), c(1.0));
        assert_eq!(f.support(), vec![1]);
    }

    #[test]
    fn derivatives_of_linear_and_quadratic() {
        let g = [c(1.0), c(-2.0)];
        let f = PolyFunctional::linear(&g);
        assert_eq!(f.derivative(1, &[0.3, 0.4]).data, g.to_vec());
        assert!(f.derivative(2, &[0.3, 0.4]).data.iter().all(|z| z.is_zero()));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]);
        let q = PolyFunctional::quadratic(&a);
        let d2 = q.derivative(2, &[0.7, -1.1]);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(d2.get(&[i, j]), c(2.0 * a[(i, j)]));
            }
        }
    }

    #[test]
    fn product_with_unit_and_evaluation() {
        let f = PolyFunctional::linear(&[c(1.0), c(2.0)]);
        let g = PolyFunctional::linear(&[c(-1.0), c(3.0)]);
        let phi = [0.5, 1.5];
        assert_eq!(f.mul(&PolyFunctional::one(2)), f);
        assert_eq!(f.mul(&g).evaluate(&phi), f.evaluate(&phi) * g.evaluate(&phi));
    }

    #[test]
    fn json_roundtrip() {
        let f = PolyFunctional::from_terms(3, [(vec![], c(1.0)), (vec![2, 0], Complex::new(0.5, -1.0))]).unwrap();
        let back = PolyFunctional::<f64>::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        assert_eq!(f.coefficient(&[0, 2]), Complex::new(0.5, -1.0));
    }

    #[test]
    fn substitution_matches_evaluation() {
        let f = PolyFunctional::from_terms(2, [(vec![0, 1], c(2.0)), (vec![1], c(1.0))]).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let phi = [0.3, -0.8];
        let mphi = [m[(0, 0)] * phi[0] + m[(0, 1)] * phi[1], m[(1, 0)] * phi[0] + m[(1, 1)] * phi[1]];
        let lhs = f.linear_substitute(&m).evaluate(&phi);
        assert!((lhs - f.evaluate(&mphi)).norm() < 1e-14);
    }
}
