use nalgebra::DMatrix;

use crate::causet::{CausalSet, Direction, Infinity, PreferredPast};
use crate::error::{Error, Result};
use crate::generators::DiamondLattice;
use crate::scalar::Real;

/// Lower-triangular matrix stored as sorted `(column, value)` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseLower<R> {
    rows: Vec<Vec<(usize, R)>>,
}

impl<R: Real> SparseLower<R> {
    /// Builds from rows, merging duplicate columns and dropping zeros.
    pub fn from_rows(rows: Vec<Vec<(usize, R)>>) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (p, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, R)> = Vec::with_capacity(row.len());
            for (q, v) in row {
                if q > p {
                    return Err(Error::Precondition { what: "entry above the diagonal".into(), indices: vec![p, q] });
                }
                match merged.last_mut() {
                    Some(last) if last.0 == q => last.1 += v,
                    _ => merged.push((q, v)),
                }
            }
            merged.retain(|e| !e.1.is_zero());
            out.push(merged);
        }
        Ok(SparseLower { rows: out })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, p: usize) -> &[(usize, R)] {
        &self.rows[p]
    }

    pub fn get(&self, p: usize, q: usize) -> R {
        self.rows[p].iter().find(|e| e.0 == q).map(|e| e.1.clone()).unwrap_or_else(R::zero)
    }

    pub fn diagonal(&self, p: usize) -> R {
        self.get(p, p)
    }

    pub fn apply(&self, x: &[R]) -> Vec<R> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(R::zero(), |acc, (q, v)| acc + v.clone() * x[*q].clone()))
            .collect()
    }

    /// Solves `L x = b` by forward substitution.
    pub fn forward_solve(&self, b: &[R]) -> Result<Vec<R>> {
        let mut x: Vec<R> = Vec::with_capacity(b.len());
        for (p, row) in self.rows.iter().enumerate() {
            let mut acc = b[p].clone();
            let mut diag = R::zero();
            for (q, v) in row {
                if *q == p {
                    diag = v.clone();
                } else {
                    acc -= v.clone() * x[*q].clone();
                }
            }
            if diag.is_zero() {
                return Err(Error::SingularOperator(p));
            }
            x.push(acc / diag);
        }
        Ok(x)
    }

    pub fn to_dense(&self) -> DMatrix<R>
    where
        R: nalgebra::Scalar,
    {
        let n = self.n();
        let mut m = DMatrix::from_element(n, n, R::zero());
        for (p, row) in self.rows.iter().enumerate() {
            for (q, v) in row {
                m[(p, *q)] = v.clone();
            }
        }
        m
    }

    /// True when every entry `(p, q)` has `q ⪯ p`.
    pub fn is_retarded(&self, cs: &CausalSet) -> bool {
        self.rows.iter().enumerate().all(|(p, row)| row.iter().all(|&(q, _)| q == p || cs.c(p, q)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Sorkin,
    PreferredPast,
    /// The lattice operator `1 - L + Λ` with `Λ` the diagonal lattice step,
    /// cut out of the infinite lattice with zero extension.
    LatticeBulk,
}

/// Source matrix choices for the preferred-past operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KVariant {
    /// `½ 1`: samples the source at the top of each diamond.
    Half,
    /// `½ (L - Λ)`: retarded Green function `½ C` on the lattice.
    Dsx,
    /// `⅛ (1 + L + Λ)`: trapezium rule over the diamond.
    Trap,
}

/// A retarded wave equation `P φ = K f` with a `k`-layer Cauchy problem.
#[derive(Clone, Debug)]
pub struct WaveOperator<R> {
    p: SparseLower<R>,
    k: SparseLower<R>,
    depth: usize,
    kind: OperatorKind,
    past: Infinity,
    future: Infinity,
    lambda: Vec<Option<usize>>,
    links: Vec<Vec<usize>>,
}

impl<R: Real> WaveOperator<R> {
    pub fn p(&self) -> &SparseLower<R> {
        &self.p
    }

    pub fn k(&self) -> &SparseLower<R> {
        &self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// `C_k^-`, whose rows are identity rows.
    pub fn past_boundary(&self) -> &Infinity {
        &self.past
    }

    /// `C_k^+`, the target of the Cauchy evolution.
    pub fn future_boundary(&self) -> &Infinity {
        &self.future
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    /// Replaces `K`, keeping identity rows on the past boundary.
    pub fn with_k(mut self, k: SparseLower<R>) -> Result<Self> {
        if k.n() != self.n() {
            return Err(Error::Dimension(format!("K of size {} for an operator of size {}", k.n(), self.n())));
        }
        let bad: Vec<usize> = self
            .past
            .members
            .iter()
            .copied()
            .filter(|&p| k.row(p).len() != 1 || k.row(p)[0].0 != p || !k.row(p)[0].1.is_one())
            .collect();
        if !bad.is_empty() {
            return Err(Error::Precondition { what: "K must act as the identity on past-infinity rows".into(), indices: bad });
        }
        self.k = k;
        Ok(self)
    }

    /// Switches the source matrix of a preferred-past operator.
    pub fn with_k_variant(self, variant: KVariant) -> Result<Self> {
        if self.kind == OperatorKind::Sorkin && variant != KVariant::Half {
            return Err(Error::Invalid("K variants other than half need a preferred past".into()));
        }
        let k = k_rows(self.n(), &self.past, &self.lambda, variant, |p| self.links[p].clone());
        self.with_k(k)
    }

    pub fn apply_p(&self, x: &[R]) -> Vec<R> {
        self.p.apply(x)
    }

    pub fn apply_k(&self, x: &[R]) -> Vec<R> {
        self.k.apply(x)
    }
}

fn identity_rows<R: Real>(n: usize, boundary: &Infinity) -> Vec<Vec<(usize, R)>> {
    (0..n).map(|p| if boundary.contains(p) { vec![(p, R::one())] } else { Vec::new() }).collect()
}

/// Sorkin's two-dimensional operator with coefficients `1, -2, 4, -2` by
/// layer and identity rows on `C_k^-`.
pub fn build_sorkin<R: Real>(cs: &CausalSet, k: usize) -> WaveOperator<R> {
    let n = cs.len();
    let past = cs.infinity(k, Direction::Past);
    let future = cs.infinity(k, Direction::Future);
    let mut rows = identity_rows::<R>(n, &past);
    let mut krows = identity_rows::<R>(n, &past);
    let coeff = [R::zero(), R::ratio(-2, 1), R::ratio(4, 1), R::ratio(-2, 1)];
    for p in (0..n).filter(|&p| !past.contains(p)) {
        let mut row: Vec<(usize, R)> = Vec::new();
        for q in cs.past_of(p).iter() {
            let layer = cs.proximity(p, q).expect("q precedes p");
            if layer <= 3 {
                row.push((q, coeff[layer].clone()));
            }
        }
        row.push((p, R::one()));
        rows[p] = row;
        krows[p] = vec![(p, R::half())];
    }
    WaveOperator {
        p: SparseLower::from_rows(rows).expect("retarded rows"),
        k: SparseLower::from_rows(krows).expect("diagonal"),
        depth: k,
        kind: OperatorKind::Sorkin,
        past,
        future,
        lambda: vec![None; n],
        links: Vec::new(),
    }
}

/// `P_Λ = 1 + Λ - 2 M_W Ω` with identity rows on `C_2^-` and `K = ½` off it.
pub fn build_plambda<R: Real>(cs: &CausalSet, pp: &PreferredPast) -> WaveOperator<R> {
    let n = cs.len();
    let past = cs.two_layer_past_infinity();
    let future = cs.infinity(2, Direction::Future);
    let mut rows = identity_rows::<R>(n, &past);
    for p in (0..n).filter(|&p| !past.contains(p)) {
        let lam = pp.get(p).expect("preferred past defined off C_2^-");
        let w: R = pp.mean_weight(p);
        let mut row: Vec<(usize, R)> = vec![(p, R::one()), (lam, R::one())];
        let two_w = R::ratio(-2, 1) * w;
        row.extend(pp.omega_row(p).iter().map(|&q| (q, two_w.clone())));
        rows[p] = row;
    }
    let lambda = pp.map().to_vec();
    let p = SparseLower::from_rows(rows).expect("retarded rows");
    let k = k_rows(n, &past, &lambda, KVariant::Half, |_| Vec::new());
    let links = (0..n).map(|p| cs.links_below(p).to_vec()).collect();
    WaveOperator { p, k, depth: 2, kind: OperatorKind::PreferredPast, past, future, lambda, links }
}

/// `1 - L + Λ` on a diamond lattice, `Λ` the diagonal step `(u-δ, v-δ)`
/// wherever it stays inside the lattice. There are no Cauchy rows.
pub fn build_plambda_lattice<R: Real>(lattice: &DiamondLattice) -> WaveOperator<R> {
    let cs = lattice.causet();
    let n = cs.len();
    let lambda: Vec<Option<usize>> = (0..n).map(|p| lattice.diagonal_past(p)).collect();
    let rows = (0..n)
        .map(|p| {
            let mut row: Vec<(usize, R)> = vec![(p, R::one())];
            row.extend(cs.links_below(p).iter().map(|&q| (q, -R::one())));
            if let Some(q) = lambda[p] {
                row.push((q, R::one()));
            }
            row
        })
        .collect();
    let none = Infinity { members: Vec::new(), indicator: vec![false; n] };
    let k = k_rows(n, &none, &lambda, KVariant::Half, |p| cs.links_below(p).to_vec());
    WaveOperator {
        p: SparseLower::from_rows(rows).expect("retarded rows"),
        k,
        depth: 0,
        kind: OperatorKind::LatticeBulk,
        past: none.clone(),
        future: none,
        lambda,
        links: (0..n).map(|p| cs.links_below(p).to_vec()).collect(),
    }
}

fn k_rows<R: Real>(
    n: usize,
    boundary: &Infinity,
    lambda: &[Option<usize>],
    variant: KVariant,
    links: impl Fn(usize) -> Vec<usize>,
) -> SparseLower<R> {
    let rows = (0..n)
        .map(|p| {
            if boundary.contains(p) {
                return vec![(p, R::one())];
            }
            match variant {
                KVariant::Half => vec![(p, R::half())],
                KVariant::Dsx => {
                    let mut row: Vec<(usize, R)> = links(p).into_iter().map(|q| (q, R::half())).collect();
                    if let Some(l) = lambda[p] {
                        row.push((l, -R::half()));
                    }
                    row
                }
                KVariant::Trap => {
                    let e = R::ratio(1, 8);
                    let mut row = vec![(p, e.clone())];
                    row.extend(links(p).into_iter().map(|q| (q, e.clone())));
                    if let Some(l) = lambda[p] {
                        row.push((l, e.clone()));
                    }
                    row
                }
            }
        })
        .collect();
    SparseLower::from_rows(rows).expect("retarded rows")
}

/// The named source matrix for a causal set with a preferred past; rows on
/// `C_2^-` are identity rows as in [`build_plambda`].
pub fn k_variant<R: Real>(cs: &CausalSet, pp: &PreferredPast, variant: KVariant) -> SparseLower<R> {
    let past = cs.two_layer_past_infinity();
    k_rows(cs.len(), &past, pp.map(), variant, |p| cs.links_below(p).to_vec())
}
