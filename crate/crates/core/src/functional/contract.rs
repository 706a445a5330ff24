use num_traits::Zero;

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::poly::{Monomial, PolyFunctional};
use crate::scalar::{c_real, factorial, Real, C};

/// All nonzero order-`k` derivatives of `F`, keyed by the sorted multi-index
/// `γ`: the entry for `γ` is `∂_{γ₁} ⋯ ∂_{γ_k} F`.
pub fn derivatives_of_order<R: Real>(f: &PolyFunctional<R>, k: usize) -> BTreeMap<Monomial, PolyFunctional<R>> {
    let mut out: BTreeMap<Monomial, PolyFunctional<R>> = BTreeMap::new();
    let n = f.n();
    for (alpha, c) in f.terms() {
        if alpha.len() < k {
            continue;
        }
        let groups = group(alpha);
        for_each_submultiset(&groups, k, &mut |take: &[usize]| {
            let mut gamma = Vec::with_capacity(k);
            let mut rest = Vec::with_capacity(alpha.len() - k);
            // α!/(α−γ)! = Π falling factorials.
            let mut w = R::one();
            for (&(idx, mult), &t) in groups.iter().zip(take) {
                for j in 0..t {
                    w *= R::of_usize(mult - j);
                }
                gamma.extend(std::iter::repeat(idx).take(t));
                rest.extend(std::iter::repeat(idx).take(mult - t));
            }
            out.entry(gamma).or_insert_with(|| PolyFunctional::zero(n)).add_term(rest, c.clone() * w);
        });
    }
    out.retain(|_, p| !p.is_zero());
    out
}

fn group(m: &[u32]) -> Vec<(u32, usize)> {
    let mut g: Vec<(u32, usize)> = Vec::new();
    for &i in m {
        match g.last_mut() {
            Some((j, c)) if *j == i => *c += 1,
            _ => g.push((i, 1)),
        }
    }
    g
}

fn multiplicity_factorial<R: Real>(m: &[u32]) -> R {
    group(m).iter().fold(R::one(), |acc, &(_, c)| acc * factorial::<R>(c))
}

fn for_each_submultiset(groups: &[(u32, usize)], k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(groups: &[(u32, usize)], pos: usize, left: usize, take: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if pos == groups.len() {
            if left == 0 {
                f(take);
            }
            return;
        }
        let remaining: usize = groups[pos + 1..].iter().map(|g| g.1).sum();
        let lo = left.saturating_sub(remaining);
        for t in lo..=groups[pos].1.min(left) {
            take.push(t);
            rec(groups, pos + 1, left - t, take, f);
            take.pop();
        }
    }
    rec(groups, 0, k, &mut Vec::new(), f);
}

/// Permanent of a square complex matrix by Ryser's inclusion-exclusion formula.
pub fn permanent<R: Real>(m: &DMatrix<C<R>>) -> C<R> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "permanent of a non-square matrix");
    if n == 0 {
        return c_real(R::one());
    }
    if n == 1 {
        return m[(0, 0)].clone();
    }
    let mut total = c_real(R::zero());
    for subset in 1u64..(1u64 << n) {
        let mut prod = c_real(R::one());
        for i in 0..n {
            let mut row = c_real(R::zero());
            for j in 0..n {
                if subset >> j & 1 == 1 {
                    row += m[(i, j)].clone();
                }
            }
            prod *= row;
        }
        if (n - subset.count_ones() as usize) % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    total
}

/// The order-`k` contraction
/// `Σ_{i,j} ∂_{i₁…i_k}F · M_{i₁j₁}⋯M_{i_kj_k} · ∂_{j₁…j_k}G`.
///
/// Index tuples are grouped into multisets `γ, δ`, which collapses the
/// `N^{2k}` sum to `Σ_{γ,δ} perm(M[γ;δ]) / (γ! δ!) · k! · ∂^γF ∂^δG`.
pub fn contract<R: Real>(f: &PolyFunctional<R>, g: &PolyFunctional<R>, m: &DMatrix<C<R>>, k: usize) -> PolyFunctional<R> {
    let n = f.n();
    if k == 0 {
        return f.mul(g);
    }
    let df = derivatives_of_order(f, k);
    let dg = derivatives_of_order(g, k);
    let kfact = factorial::<R>(k);
    let mut out = PolyFunctional::zero(n);
    for (gamma, a) in &df {
        let gf = multiplicity_factorial::<R>(gamma);
        for (delta, b) in &dg {
            let sub = DMatrix::from_fn(k, k, |r, c| m[(gamma[r] as usize, delta[c] as usize)].clone());
            let p = permanent(&sub);
            if p.is_zero() {
                continue;
            }
            let w = p * (kfact.clone() / (gf.clone() * multiplicity_factorial::<R>(delta)));
            out.add_scaled(&a.mul(b), &w);
        }
    }
    out
}

/// `𝒟_H F = Σ_{ij} H_{ij} ∂_i ∂_j F`.
pub fn laplacian<R: Real>(f: &PolyFunctional<R>, h: &DMatrix<C<R>>) -> PolyFunctional<R> {
    let mut out = PolyFunctional::zero(f.n());
    for (gamma, d) in derivatives_of_order(f, 2) {
        let (a, b) = (gamma[0] as usize, gamma[1] as usize);
        let w = if a == b { h[(a, a)].clone() } else { h[(a, b)].clone() + h[(b, a)].clone() };
        out.add_scaled(&d, &w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    /// Direct `N^{2k}` sum over ordered index tuples.
    fn brute<R: Real>(f: &PolyFunctional<R>, g: &PolyFunctional<R>, m: &DMatrix<C<R>>, k: usize, phi: &[R]) -> C<R> {
        let n = f.n();
        let mut total = c_real(R::zero());
        let count = n.pow(2 * k as u32);
        for flat in 0..count {
            let mut rest = flat;
            let mut is = vec![0; k];
            let mut js = vec![0; k];
            for t in 0..k {
                is[t] = rest % n;
                rest /= n;
                js[t] = rest % n;
                rest /= n;
            }
            let mut df = f.clone();
            let mut dg = g.clone();
            let mut w = c_real(R::one());
            for t in 0..k {
                df = df.partial(is[t]);
                dg = dg.partial(js[t]);
                w *= m[(is[t], js[t])].clone();
            }
            total += df.evaluate(phi) * w * dg.evaluate(phi);
        }
        total
    }

    #[test]
    fn ryser_matches_expansion() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0]).map(c_real::<f64>);
        // Sum over all 6 permutations by hand.
        let expected = 1.0 * 5.0 * 10.0 + 1.0 * 6.0 * 8.0 + 2.0 * 4.0 * 10.0 + 2.0 * 6.0 * 7.0 + 3.0 * 4.0 * 8.0 + 3.0 * 5.0 * 7.0;
        assert!((permanent(&m).re - expected).abs() < 1e-12);
    }

    #[test]
    fn contraction_matches_tuple_sum() {
        let f = PolyFunctional::from_terms(3, [(vec![0, 0, 1], c_real(q(1, 1))), (vec![2, 2], c_real(q(-2, 3))), (vec![1], c_real(q(5, 1)))]).unwrap();
        let g = PolyFunctional::from_terms(3, [(vec![0, 1, 2], c_real(q(3, 2))), (vec![1, 1], c_real(q(1, 1)))]).unwrap();
        let m = DMatrix::from_fn(3, 3, |i, j| C::new(q(i as i64 + 1, 1), q(j as i64 - i as i64, 2)));
        let phi = [q(1, 3), q(-2, 1), q(3, 4)];
        for k in 0..=3 {
            let lhs = contract(&f, &g, &m, k).evaluate(&phi);
            assert_eq!(lhs, brute(&f, &g, &m, k, &phi), "order {k}");
        }
    }

    #[test]
    fn contraction_is_symmetric_under_transpose() {
        let f = PolyFunctional::from_terms(2, [(vec![0, 1, 1], c_real(q(2, 1))), (vec![0], c_real(q(1, 3)))]).unwrap();
        let g = PolyFunctional::from_terms(2, [(vec![0, 0], c_real(q(1, 1))), (vec![1], c_real(q(-1, 1)))]).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[q(1, 2), q(3, 1), q(-1, 5), q(7, 3)]).map(c_real);
        for k in 0..=2 {
            assert_eq!(contract(&f, &g, &m, k), contract(&g, &f, &m.transpose(), k));
        }
    }

    #[test]
    fn laplacian_of_quadratic() {
        let f = PolyFunctional::from_terms(2, [(vec![0, 1], c_real(1.0)), (vec![0, 0], c_real(3.0))]).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 5.0, 0.0]).map(c_real::<f64>);
        // ∂₀∂₁ f = 1 paired with H₀₁ + H₁₀, ∂₀∂₀ f = 6 with H₀₀.
        assert_eq!(laplacian(&f, &h).constant_term(), c_real(7.0 + 6.0));
    }
}
