use nalgebra::DMatrix;
use rayon::prelude::*;

use super::operator::WaveOperator;
use crate::causet::CausalSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Retarded and advanced Green operators and their commutator
/// `E = E⁻ - E⁺`.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenSet<R: nalgebra::Scalar> {
    pub ret: DMatrix<R>,
    pub adv: DMatrix<R>,
    pub e: DMatrix<R>,
}

impl<R: Real + nalgebra::Scalar> GreenSet<R> {
    /// Completes a retarded operator into the full set.
    pub fn from_retarded(ret: DMatrix<R>) -> Self {
        let adv = ret.transpose();
        let e = &adv - &ret;
        GreenSet { ret, adv, e }
    }

    pub fn n(&self) -> usize {
        self.ret.nrows()
    }

    /// `max |P E⁺ - K|`.
    pub fn residual(&self, w: &WaveOperator<R>) -> R {
        let n = self.n();
        let mut worst = R::zero();
        for p in 0..n {
            for q in 0..n {
                let pe = w.p().row(p).iter().fold(R::zero(), |acc, (r, v)| acc + v.clone() * self.ret[(*r, q)].clone());
                let d = (pe - w.k().get(p, q)).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// True when `E⁺[p][q] ≠ 0` only for `q ⪯ p`.
    pub fn is_retarded(&self, cs: &CausalSet) -> bool {
        let n = self.n();
        (0..n).all(|p| (0..n).all(|q| self.ret[(p, q)].is_zero() || p == q || cs.c(p, q)))
    }

    pub fn map<S: Real + nalgebra::Scalar>(&self, f: impl Fn(&R) -> S) -> GreenSet<S> {
        GreenSet::from_retarded(self.ret.map(|x| f(&x)))
    }
}

/// `E⁺ = P⁻¹ K` by forward substitution, one column per source point.
pub fn greens<R: Real + nalgebra::Scalar>(w: &WaveOperator<R>) -> Result<GreenSet<R>> {
    let n = w.n();
    if let Some(p) = (0..n).find(|&p| w.p().diagonal(p).is_zero()) {
        return Err(Error::SingularOperator(p));
    }
    let columns: Vec<Vec<R>> = (0..n)
        .into_par_iter()
        .map(|q| {
            let mut x = vec![R::zero(); n];
            for p in q..n {
                let mut acc = w.k().get(p, q);
                let mut diag = R::zero();
                for (r, v) in w.p().row(p) {
                    if *r == p {
                        diag = v.clone();
                    } else if *r >= q {
                        acc -= v.clone() * x[*r].clone();
                    }
                }
                if !acc.is_zero() {
                    x[p] = acc / diag;
                }
            }
            x
        })
        .collect();
    let ret = DMatrix::from_fn(n, n, |p, q| columns[q][p].clone());
    Ok(GreenSet::from_retarded(ret))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{build_plambda_lattice, build_sorkin, KVariant};
    use crate::generators::{diamond_lattice, LatticeSpec};
    use num_rational::BigRational;

    #[test]
    fn lattice_green_is_half_one_plus_c_exactly() {
        let lat = diamond_lattice(LatticeSpec::square(5, 1.0));
        let cs = lat.causet();
        let g = greens(&build_plambda_lattice::<BigRational>(&lat)).unwrap();
        let half = BigRational::half();
        for p in 0..cs.len() {
            for q in 0..cs.len() {
                let want = if p == q || cs.c(p, q) { half.clone() } else { BigRational::ratio(0, 1) };
                assert_eq!(g.ret[(p, q)], want);
            }
        }
    }

    #[test]
    fn dsx_gives_half_c() {
        let lat = diamond_lattice(LatticeSpec::square(4, 1.0));
        let cs = lat.causet();
        let w = build_plambda_lattice::<BigRational>(&lat).with_k_variant(KVariant::Dsx).unwrap();
        let g = greens(&w).unwrap();
        for p in 0..cs.len() {
            for q in 0..cs.len() {
                let want = if cs.c(p, q) { BigRational::half() } else { BigRational::ratio(0, 1) };
                assert_eq!(g.ret[(p, q)], want);
            }
        }
    }

    #[test]
    fn two_chain_sorkin_green() {
        let cs = CausalSet::from_relations(2, &[(0, 1)]).unwrap();
        let g = greens(&build_sorkin::<f64>(&cs, 3)).unwrap();
        assert_eq!(g.ret, DMatrix::identity(2, 2));
        assert_eq!(g.e, DMatrix::zeros(2, 2));
    }
}
