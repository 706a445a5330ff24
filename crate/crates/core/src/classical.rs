//! Free and interacting Peierls brackets, classical Møller maps and the
//! interacting retarded Green function.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;

use crate::causet::Infinity;
use crate::discrete::{solve_cauchy, GreenSet, WaveOperator};
use crate::error::{Error, Result};
use crate::functional::{compose, contract, FormalSeries, Orders, PolyFunctional};
use crate::linalg::{self, mat_vec};
use crate::scalar::{c_real, Real, C};

/// A real polynomial interaction `V` with its first three derivatives.
#[derive(Clone, Debug)]
pub struct Interaction<R: Real> {
    v: PolyFunctional<R>,
    first: Vec<PolyFunctional<R>>,
    second: Vec<Vec<PolyFunctional<R>>>,
    /// Nonzero `(i, j, ∂_l ∂_i ∂_j V)` grouped by `l`.
    third: Vec<Vec<(usize, usize, PolyFunctional<R>)>>,
}

impl<R: Real> Interaction<R> {
    /// Checks that `V` has real coefficients and does not touch `boundary`.
    pub fn new(v: PolyFunctional<R>, boundary: &Infinity) -> Result<Self> {
        let bad: Vec<usize> = v.support().into_iter().filter(|&i| boundary.contains(i)).collect();
        if !bad.is_empty() {
            return Err(Error::SupportOnBoundary(bad));
        }
        Self::unrestricted(v)
    }

    /// Skips the support check; used where no Cauchy problem is posed.
    pub fn unrestricted(v: PolyFunctional<R>) -> Result<Self> {
        if v.terms().any(|(_, c)| !c.im.is_zero()) {
            return Err(Error::ComplexInteraction);
        }
        let n = v.n();
        let first = v.gradient();
        let second: Vec<Vec<PolyFunctional<R>>> = first.iter().map(PolyFunctional::gradient).collect();
        let mut third = vec![Vec::new(); n];
        for (i, row) in second.iter().enumerate() {
            for (j, vij) in row.iter().enumerate() {
                for l in vij.support() {
                    third[l].push((i, j, vij.partial(l)));
                }
            }
        }
        Ok(Interaction { v, first, second, third })
    }

    /// `Σ_i c_i φ_i^power`.
    pub fn local(couplings: &[R], power: usize, boundary: &Infinity) -> Result<Self> {
        let g: Vec<C<R>> = couplings.iter().cloned().map(c_real).collect();
        Self::new(PolyFunctional::hadamard_monomial(&g, power), boundary)
    }

    pub fn potential(&self) -> &PolyFunctional<R> {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn first_poly(&self) -> &[PolyFunctional<R>] {
        &self.first
    }

    pub fn second_poly(&self, i: usize, j: usize) -> &PolyFunctional<R> {
        &self.second[i][j]
    }

    /// `V^{(1)}(φ)`.
    pub fn first(&self, phi: &[R]) -> Vec<R> {
        self.first.iter().map(|p| p.evaluate(phi).re).collect()
    }

    /// `V^{(2)}(φ)`.
    pub fn second(&self, phi: &[R]) -> DMatrix<R> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.second[i][j].evaluate(phi).re)
    }

    /// The matrix `(V_{,lij}(φ))_{ij}` for fixed `l`.
    pub fn third(&self, phi: &[R], l: usize) -> DMatrix<R> {
        let n = self.n();
        let mut m = DMatrix::from_element(n, n, R::zero());
        for (i, j, p) in &self.third[l] {
            m[(*i, *j)] = p.evaluate(phi).re;
        }
        m
    }

    pub fn has_third(&self, l: usize) -> bool {
        !self.third[l].is_empty()
    }
}

/// `E` with complex entries, ready for contraction.
pub fn commutator<R: Real>(gs: &GreenSet<R>) -> DMatrix<C<R>> {
    gs.e.map(c_real)
}

/// The Peierls bracket `{F, G} = F_{,i} E^{ij} G_{,j}`.
pub fn peierls<R: Real>(f: &PolyFunctional<R>, g: &PolyFunctional<R>, gs: &GreenSet<R>) -> PolyFunctional<R> {
    contract(f, g, &commutator(gs), 1)
}

/// `hᵀ E⁺ g`, measured by solving the Cauchy problem with and without the
/// perturbing source `g` on top of a background (`source`, `data`).
pub fn retarded_response<R: Real>(
    w: &WaveOperator<R>,
    g_pert: &[R],
    h_obs: &[R],
    source: &[R],
    data: &[R],
) -> Result<R> {
    let base = solve_cauchy(w, source, data)?;
    let shifted: Vec<R> = source.iter().zip(g_pert).map(|(a, b)| a.clone() + b.clone()).collect();
    let moved = solve_cauchy(w, &shifted, data)?;
    Ok(h_obs
        .iter()
        .zip(moved.iter().zip(&base))
        .fold(R::zero(), |acc, (h, (a, b))| acc + h.clone() * (a.clone() - b.clone())))
}

/// `hᵀ E⁻ g = gᵀ E⁺ h`: the response of `Φ_g` to the source `h`, which
/// therefore has to vanish on the past infinity.
pub fn advanced_response<R: Real>(
    w: &WaveOperator<R>,
    g_pert: &[R],
    h_obs: &[R],
    source: &[R],
    data: &[R],
) -> Result<R> {
    retarded_response(w, h_obs, g_pert, source, data)
}

/// Spectrum of `iE` and the numerical kernel of `E`.
#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    /// Eigenvalues of `iE`, ascending.
    pub eigenvalues: Vec<f64>,
    /// `|μ|`, ascending.
    pub magnitudes: Vec<f64>,
    pub max_abs: f64,
    /// Relative threshold: `|μ| ≤ tol · max|μ|` counts as kernel.
    pub tol: f64,
    pub kernel_dim: usize,
    #[serde(skip)]
    pub kernel: Vec<Vec<Complex<f64>>>,
}

pub fn kernel_diagnostics<R: Real>(gs: &GreenSet<R>, tol: f64) -> KernelReport {
    let e = linalg::to_f64(&gs.e);
    let (values, vectors) = linalg::spectrum_of_ie(&e);
    let max_abs = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = tol * max_abs;
    let kernel: Vec<Vec<Complex<f64>>> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= cut)
        .map(|(k, _)| vectors.column(k).iter().copied().collect())
        .collect();
    let mut magnitudes: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    magnitudes.sort_by(f64::total_cmp);
    KernelReport { eigenvalues: values, magnitudes, max_abs, tol, kernel_dim: kernel.len(), kernel }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MollerMode {
    /// Fixed-point iteration of `r = φ + λE⁺V^{(1)}(r)`, undamped.
    Picard { max_iterations: usize, tolerance: f64 },
    /// The `λ`-polynomial truncated after the given order.
    LambdaOrder(u32),
}

impl MollerMode {
    pub fn picard() -> Self {
        MollerMode::Picard { max_iterations: 200, tolerance: 1e-12 }
    }
}

/// The retarded Møller map `r_{λV}(φ)`, sending free solutions to
/// interacting ones.
pub fn moller_classical<R: Real>(v: &Interaction<R>, lambda: &R, gs: &GreenSet<R>, phi: &[R], mode: MollerMode) -> Result<Vec<R>> {
    match mode {
        MollerMode::Picard { max_iterations, tolerance } => {
            let step = |x: &[R]| -> Vec<R> {
                let kick = mat_vec(&gs.ret, &v.first(x));
                phi.iter().zip(kick).map(|(p, k)| p.clone() + lambda.clone() * k).collect()
            };
            let mut x = phi.to_vec();
            let mut residual = f64::INFINITY;
            for _ in 0..max_iterations {
                let next = step(&x);
                let scale = next.iter().fold(1.0f64, |a, y| a.max(y.to_f64_lossy().abs()));
                residual = next.iter().zip(&x).fold(0.0f64, |a, (p, q)| a.max((p.clone() - q.clone()).to_f64_lossy().abs())) / scale;
                x = next;
                if !residual.is_finite() {
                    break;
                }
                if residual <= tolerance {
                    return Ok(x);
                }
            }
            Err(Error::NoConvergence { iterations: max_iterations, residual })
        }
        MollerMode::LambdaOrder(m) => {
            let coeffs = moller_coefficients(v, gs, phi, m as usize);
            let mut out = vec![R::zero(); phi.len()];
            let mut power = R::one();
            for c in coeffs {
                for (o, ci) in out.iter_mut().zip(c) {
                    *o += power.clone() * ci;
                }
                power *= lambda.clone();
            }
            Ok(out)
        }
    }
}

/// `r_{λV}^{-1}(ψ) = ψ − λE⁺V^{(1)}(ψ)`.
pub fn moller_inverse<R: Real>(v: &Interaction<R>, lambda: &R, gs: &GreenSet<R>, psi: &[R]) -> Vec<R> {
    let kick = mat_vec(&gs.ret, &v.first(psi));
    psi.iter().zip(kick).map(|(p, k)| p.clone() - lambda.clone() * k).collect()
}

/// Taylor coefficients `r_0 = φ, r_1, …, r_m` of `λ ↦ r_{λV}(φ)`.
pub fn moller_coefficients<R: Real>(v: &Interaction<R>, gs: &GreenSet<R>, phi: &[R], order: usize) -> Vec<Vec<R>> {
    let n = phi.len();
    // xs[i][k] is the λ^k coefficient of the i-th component.
    let mut xs: Vec<Vec<R>> = phi.iter().map(|p| vec![p.clone()]).collect();
    for k in 1..=order {
        let force: Vec<R> = v.first.iter().map(|p| series_coefficient(p, &xs, k - 1)).collect();
        let kick = mat_vec(&gs.ret, &force);
        for (x, c) in xs.iter_mut().zip(kick) {
            x.push(c);
        }
    }
    (0..=order).map(|k| (0..n).map(|i| xs[i][k].clone()).collect()).collect()
}

/// The `λ^k` coefficient of the real part of `p(x(λ))`, for component series
/// known through order `k`.
fn series_coefficient<R: Real>(p: &PolyFunctional<R>, xs: &[Vec<R>], k: usize) -> R {
    let mut total = R::zero();
    for (idx, c) in p.terms() {
        let mut prod = vec![R::zero(); k + 1];
        prod[0] = R::one();
        for &i in idx {
            let x = &xs[i as usize];
            let mut next = vec![R::zero(); k + 1];
            for (a, pa) in prod.iter().enumerate() {
                if pa.is_zero() {
                    continue;
                }
                for (b, xb) in x.iter().enumerate().take(k + 1 - a) {
                    next[a + b] += pa.clone() * xb.clone();
                }
            }
            prod = next;
        }
        total += c.re.clone() * prod[k].clone();
    }
    total
}

/// `r_{λV}` as a `λ`-series of polynomial maps, one series per component.
pub fn moller_series<R: Real>(v: &Interaction<R>, gs: &GreenSet<R>, order: u32) -> Result<Vec<FormalSeries<R>>> {
    let n = v.n();
    let orders = Orders::new(0, order);
    let base: Vec<FormalSeries<R>> = (0..n)
        .map(|i| FormalSeries::from_poly(PolyFunctional::monomial(n, &[i as u32], c_real(R::one())), orders))
        .collect::<Result<_>>()?;
    let mut r = base.clone();
    for k in 1..=order {
        let lower = Orders::new(0, k - 1);
        let force: Vec<FormalSeries<R>> = v.first.iter().map(|p| compose(p, &r, lower)).collect::<Result<_>>()?;
        r = (0..n)
            .map(|i| {
                let mut s = base[i].clone();
                for (j, fj) in force.iter().enumerate() {
                    let e = gs.ret[(i, j)].clone();
                    if !e.is_zero() {
                        s.add_scaled(&fj.with_orders(orders)?.shift(0, 1)?, &c_real(e))?;
                    }
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
    }
    Ok(r)
}

/// `r_{λV}^{-1}` as polynomial maps `ψ_i − λ(E⁺V^{(1)}(ψ))_i`.
pub fn moller_inverse_series<R: Real>(v: &Interaction<R>, gs: &GreenSet<R>, order: u32) -> Result<Vec<FormalSeries<R>>> {
    let n = v.n();
    let orders = Orders::new(0, order);
    (0..n)
        .map(|i| {
            let mut s = FormalSeries::from_poly(PolyFunctional::monomial(n, &[i as u32], c_real(R::one())), orders)?;
            let mut kick = PolyFunctional::zero(n);
            for (j, fj) in v.first.iter().enumerate() {
                kick.add_scaled(fj, &c_real(gs.ret[(i, j)].clone()));
            }
            s.add_scaled_at(0, 1, &kick, &c_real(-R::one()))?;
            Ok(s)
        })
        .collect()
}

/// Neumann terms `R_k = E⁺(V^{(2)}(φ)E⁺)^k`, `k = 0..=order`, so that
/// `E⁺_{λV}(φ) = Σ λ^k R_k`.
pub fn interacting_green<R: Real>(v: &Interaction<R>, order: usize, gs: &GreenSet<R>, phi: &[R]) -> Vec<DMatrix<R>> {
    let v2 = v.second(phi);
    let mut out = vec![gs.ret.clone()];
    for k in 1..=order {
        let next = &gs.ret * (&v2 * &out[k - 1]);
        out.push(next);
    }
    out
}

/// `E_k = R_kᵀ − R_k` for each Neumann term.
pub fn interacting_commutators<R: Real>(greens: &[DMatrix<R>]) -> Vec<DMatrix<R>> {
    greens.iter().map(|r| r.transpose() - r).collect()
}

/// The interacting bracket with `E_{λV}` frozen at `φ`: entry `k` is the
/// `λ^k` coefficient.
pub fn interacting_bracket<R: Real>(
    f: &PolyFunctional<R>,
    g: &PolyFunctional<R>,
    v: &Interaction<R>,
    order: usize,
    gs: &GreenSet<R>,
    phi: &[R],
) -> Vec<PolyFunctional<R>> {
    interacting_commutators(&interacting_green(v, order, gs, phi))
        .iter()
        .map(|e| contract(f, g, &e.map(c_real), 1))
        .collect()
}

/// A matrix of polynomial functionals.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix<R: Real> {
    rows: usize,
    cols: usize,
    entries: Vec<PolyFunctional<R>>,
}

impl<R: Real> PolyMatrix<R> {
    pub fn constant(m: &DMatrix<R>, vars: usize) -> Self {
        let entries = m.transpose().iter().map(|x| PolyFunctional::constant(vars, c_real(x.clone()))).collect();
        PolyMatrix { rows: m.nrows(), cols: m.ncols(), entries }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> PolyFunctional<R>) -> Self {
        let entries = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        PolyMatrix { rows, cols, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> &PolyFunctional<R> {
        &self.entries[i * self.cols + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        PolyMatrix::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = PolyFunctional::zero(self.get(0, 0).n());
            for k in 0..self.cols {
                let (a, b) = (self.get(i, k), other.get(k, j));
                if !a.is_zero() && !b.is_zero() {
                    acc = acc.add(&a.mul(b));
                }
            }
            acc
        })
    }

    pub fn transpose(&self) -> Self {
        PolyMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        PolyMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).sub(other.get(i, j)))
    }

    pub fn evaluate(&self, phi: &[R]) -> DMatrix<C<R>> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).evaluate(phi))
    }
}

/// Peierls brackets with a field-dependent commutator `E_{λV}(φ) = Σ λ^k E_k(φ)`.
#[derive(Clone, Debug)]
pub struct PeierlsAlgebra<R: Real> {
    n: usize,
    commutators: Vec<PolyMatrix<R>>,
}

impl<R: Real> PeierlsAlgebra<R> {
    pub fn free(gs: &GreenSet<R>) -> Self {
        let n = gs.n();
        PeierlsAlgebra { n, commutators: vec![PolyMatrix::constant(&gs.e, n)] }
    }

    /// Keeps `V^{(2)}` symbolic, so brackets can be differentiated again.
    pub fn interacting(v: &Interaction<R>, gs: &GreenSet<R>, order: u32) -> Self {
        let n = gs.n();
        let ret = PolyMatrix::constant(&gs.ret, n);
        let v2 = PolyMatrix::from_fn(n, n, |i, j| v.second[i][j].clone());
        let mut greens = vec![ret.clone()];
        for k in 1..=order as usize {
            let next = ret.mul(&v2.mul(&greens[k - 1]));
            greens.push(next);
        }
        let commutators = greens.iter().map(|r| r.transpose().sub(r)).collect();
        PeierlsAlgebra { n, commutators }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `E_k` as polynomial matrices.
    pub fn commutators(&self) -> &[PolyMatrix<R>] {
        &self.commutators
    }

    /// `{A, B}` for `λ`-series, truncated to `A`'s orders.
    pub fn bracket(&self, a: &FormalSeries<R>, b: &FormalSeries<R>) -> Result<FormalSeries<R>> {
        let orders = a.orders();
        let mut out = FormalSeries::zero(self.n, orders);
        if a.is_truncated() || b.is_truncated() {
            out.mark_truncated();
        }
        let grads_b: Vec<((i32, u32), Vec<PolyFunctional<R>>)> = b.terms().map(|(k, p)| (*k, p.gradient())).collect();
        for (&(h1, m1), pa) in a.terms() {
            let ga = pa.gradient();
            for ((h2, m2), gb) in &grads_b {
                for (c, e) in self.commutators.iter().enumerate() {
                    let m = m1 + m2 + c as u32;
                    if !orders.keeps(h1 + h2, m) {
                        out.mark_truncated();
                        continue;
                    }
                    let mut acc = PolyFunctional::zero(self.n);
                    for (i, gai) in ga.iter().enumerate().filter(|(_, g)| !g.is_zero()) {
                        for (j, gbj) in gb.iter().enumerate().filter(|(_, g)| !g.is_zero()) {
                            let eij = e.get(i, j);
                            if !eij.is_zero() {
                                acc = acc.add(&gai.mul(eij).mul(gbj));
                            }
                        }
                    }
                    out.add_at(h1 + h2, m, &acc)?;
                }
            }
        }
        Ok(out)
    }

    pub fn bracket_poly(&self, f: &PolyFunctional<R>, g: &PolyFunctional<R>, orders: Orders) -> Result<FormalSeries<R>> {
        self.bracket(&FormalSeries::from_poly(f.clone(), orders)?, &FormalSeries::from_poly(g.clone(), orders)?)
    }
}

/// `Σ_cyc {F, {G, H}}` at `φ`, per `λ` order, relative to the largest
/// individual term. Uses the derivative rule
/// `∂_l E⁺_{λV} = λ E⁺_{λV} V_{,l··} E⁺_{λV}` for the field dependence of the
/// interacting commutator; `v = None` gives the free bracket.
pub fn jacobi_residual(
    f: &PolyFunctional<f64>,
    g: &PolyFunctional<f64>,
    h: &PolyFunctional<f64>,
    v: Option<&Interaction<f64>>,
    order: usize,
    gs: &GreenSet<f64>,
    phi: &[f64],
) -> Vec<f64> {
    let n = phi.len();
    let order = if v.is_some() { order } else { 0 };
    let greens = match v {
        Some(v) => interacting_green(v, order, gs, phi),
        None => vec![gs.ret.clone()],
    };
    let es: Vec<DMatrix<Complex<f64>>> = interacting_commutators(&greens).iter().map(|e| e.map(c_real)).collect();
    // dE[k][l] = ∂_l E_k.
    let zero = DMatrix::<Complex<f64>>::zeros(n, n);
    let de: Vec<Vec<DMatrix<Complex<f64>>>> = (0..=order)
        .map(|k| {
            (0..n)
                .map(|l| match v {
                    Some(v) if k > 0 && v.has_third(l) => {
                        let v3 = v.third(phi, l);
                        let mut dr = DMatrix::<f64>::zeros(n, n);
                        for a in 0..k {
                            dr += &greens[a] * &v3 * &greens[k - 1 - a];
                        }
                        (dr.transpose() - dr).map(c_real)
                    }
                    _ => zero.clone(),
                })
                .collect()
        })
        .collect();
    let jet = |x: &PolyFunctional<f64>| {
        let d1 = x.derivative(1, phi);
        let d2 = x.derivative(2, phi);
        (nalgebra::DVector::from_vec(d1.data), DMatrix::from_row_slice(n, n, &d2.data))
    };
    let jets = [jet(f), jet(g), jet(h)];
    let mut out = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut total = Complex::new(0.0, 0.0);
        let mut scale = 0.0f64;
        for c in 0..3 {
            let (gx, _) = &jets[c];
            let (gy, hy) = &jets[(c + 1) % 3];
            let (gz, hz) = &jets[(c + 2) % 3];
            for a in 0..=k {
                let b = k - a;
                let left = gx.transpose() * &es[a];
                let pieces = [
                    (&left * (hy * (&es[b] * gz)))[(0, 0)],
                    (&left * (hz * (es[b].transpose() * gy)))[(0, 0)],
                    (0..n).fold(Complex::new(0.0, 0.0), |acc, l| acc + left[(0, l)] * (gy.transpose() * &de[b][l] * gz)[(0, 0)]),
                ];
                for p in pieces {
                    scale = scale.max(p.norm());
                    total += p;
                }
            }
        }
        out.push(if scale == 0.0 { 0.0 } else { total.norm() / scale });
    }
    out
}
