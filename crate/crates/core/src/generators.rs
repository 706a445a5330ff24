//! Benchmark causal sets: regular diamond lattices and Poisson sprinklings
//! into two-dimensional Minkowski space.
//!
//! Sprinklings draw from ChaCha8 seeded with `seed_from_u64`: first the
//! point count, then `(a, b)` uniforms for each point in turn. ChaCha8 is a
//! counter-based stream cipher with a fixed output on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::causet::{CausalSet, CoordSystem, Embedding};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub ell: f64,
}

impl LatticeSpec {
    pub fn new(rows: usize, cols: usize, ell: f64) -> Self {
        LatticeSpec { rows, cols, ell }
    }

    pub fn square(n: usize, ell: f64) -> Self {
        Self::new(n, n, ell)
    }

    /// Lattice spacing in null coordinates, `ℓ√2`.
    pub fn delta(&self) -> f64 {
        self.ell * std::f64::consts::SQRT_2
    }
}

/// A diamond lattice with the grid position of every element.
#[derive(Clone, Debug)]
pub struct DiamondLattice {
    pub spec: LatticeSpec,
    causet: CausalSet,
    label_of: Vec<usize>,
    cell_of: Vec<(usize, usize)>,
}

impl DiamondLattice {
    pub fn causet(&self) -> &CausalSet {
        &self.causet
    }

    pub fn into_causet(self) -> CausalSet {
        self.causet
    }

    /// Label of the element at `(i δ, j δ)` in null coordinates.
    pub fn at(&self, i: usize, j: usize) -> usize {
        self.label_of[i * self.spec.cols + j]
    }

    /// Grid position of a label.
    pub fn cell(&self, label: usize) -> (usize, usize) {
        self.cell_of[label]
    }

    pub fn len(&self) -> usize {
        self.causet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.causet.is_empty()
    }

    /// True when both grid indices are at least one, so the unit diamond
    /// below the element lies inside the lattice.
    pub fn has_full_diamond(&self, label: usize) -> bool {
        let (i, j) = self.cell_of[label];
        i >= 1 && j >= 1
    }

    /// The diagonal predecessor `(u - δ, v - δ)` where it exists.
    pub fn diagonal_past(&self, label: usize) -> Option<usize> {
        let (i, j) = self.cell_of[label];
        (i >= 1 && j >= 1).then(|| self.at(i - 1, j - 1))
    }

    /// Interior in the sense of the bulk stencil and a full future step.
    pub fn is_interior(&self, label: usize) -> bool {
        let (i, j) = self.cell_of[label];
        i >= 1 && j >= 1 && i + 1 < self.spec.rows && j + 1 < self.spec.cols
    }
}

pub fn diamond_lattice(spec: LatticeSpec) -> DiamondLattice {
    let LatticeSpec { rows, cols, ell } = spec;
    let delta = spec.delta();
    let n = rows * cols;
    let grid = |k: usize| (k / cols, k % cols);
    let points = (0..n)
        .map(|k| {
            let (i, j) = grid(k);
            [i as f64 * delta, j as f64 * delta]
        })
        .collect();
    let embedding = Embedding { system: CoordSystem::Uv, points };
    let causet = CausalSet::from_order_fn(
        n,
        |a, b| {
            let (ia, ja) = grid(a);
            let (ib, jb) = grid(b);
            ia <= ib && ja <= jb
        },
        Some(embedding),
        Some(ell),
    );
    let mut label_of = vec![0; n];
    let mut cell_of = vec![(0, 0); n];
    for (label, &orig) in causet.original_indices().iter().enumerate() {
        label_of[orig] = label;
        cell_of[label] = grid(orig);
    }
    DiamondLattice { spec, causet, label_of, cell_of }
}

/// Adds the five midpoints of the unit cell with bottom corner `(i, j)`,
/// splitting it into four diamonds. The order is read off null coordinates.
pub fn subdivide_cell(lattice: &DiamondLattice, i: usize, j: usize) -> Result<CausalSet> {
    let LatticeSpec { rows, cols, ell } = lattice.spec;
    if i + 1 >= rows || j + 1 >= cols {
        return Err(Error::Invalid(format!("cell ({i},{j}) is not inside a {rows}x{cols} lattice")));
    }
    // Work on the doubled grid so comparisons stay exact.
    let mut pts: Vec<(usize, usize)> = (0..rows * cols).map(|k| (2 * (k / cols), 2 * (k % cols))).collect();
    let (a, b) = (2 * i, 2 * j);
    pts.extend([(a + 1, b), (a, b + 1), (a + 1, b + 1), (a + 2, b + 1), (a + 1, b + 2)]);
    let half = 0.5 * lattice.spec.delta();
    let embedding = Embedding {
        system: CoordSystem::Uv,
        points: pts.iter().map(|&(p, q)| [p as f64 * half, q as f64 * half]).collect(),
    };
    Ok(CausalSet::from_order_fn(
        pts.len(),
        |x, y| pts[x].0 <= pts[y].0 && pts[x].1 <= pts[y].1,
        Some(embedding),
        Some(ell),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// `t0 ≤ t ≤ t1`, `x0 ≤ x ≤ x1`.
    Rectangle { t0: f64, t1: f64, x0: f64, x1: f64 },
    /// Causal diamond between two timelike related points given as `(t, x)`.
    Diamond { bottom: [f64; 2], top: [f64; 2] },
}

impl Region {
    pub fn volume(&self) -> f64 {
        match *self {
            Region::Rectangle { t0, t1, x0, x1 } => (t1 - t0) * (x1 - x0),
            Region::Diamond { bottom, top } => {
                let du = (top[0] - top[1]) - (bottom[0] - bottom[1]);
                let dv = (top[0] + top[1]) - (bottom[0] + bottom[1]);
                0.5 * du * dv
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Region::Rectangle { t0, t1, x0, x1 } => t1 > t0 && x1 > x0,
            Region::Diamond { bottom, top } => top[0] - bottom[0] > (top[1] - bottom[1]).abs(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("sprinkling region has no volume".into()))
        }
    }

    /// Maps a pair of unit uniforms to a point `(t, x)` of the region.
    fn sample(&self, a: f64, b: f64) -> [f64; 2] {
        match *self {
            Region::Rectangle { t0, t1, x0, x1 } => [t0 + a * (t1 - t0), x0 + b * (x1 - x0)],
            Region::Diamond { bottom, top } => {
                let (ub, vb) = (bottom[0] - bottom[1], bottom[0] + bottom[1]);
                let (ut, vt) = (top[0] - top[1], top[0] + top[1]);
                let u = ub + a * (ut - ub);
                let v = vb + b * (vt - vb);
                [0.5 * (u + v), 0.5 * (v - u)]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SprinklingSpec {
    pub region: Region,
    pub density: f64,
    pub seed: u64,
}

/// Poisson sprinkling with the closed light-cone order.
pub fn sprinkle(spec: &SprinklingSpec) -> Result<CausalSet> {
    spec.region.validate()?;
    if !(spec.density > 0.0) {
        return Err(Error::Invalid("density must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = poisson(&mut rng, spec.density * spec.region.volume()) as usize;
    let points: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = rng.gen();
            let b: f64 = rng.gen();
            spec.region.sample(a, b)
        })
        .collect();
    let uv: Vec<(f64, f64)> = points.iter().map(|p| (p[0] - p[1], p[0] + p[1])).collect();
    let precedes = |x: usize, y: usize| {
        let (p, q) = (uv[x], uv[y]);
        p.0 <= q.0 && p.1 <= q.1 && (p != q || x < y)
    };
    let ell = spec.density.powf(-0.5);
    Ok(CausalSet::from_order_fn(n, precedes, Some(Embedding { system: CoordSystem::Tx, points }), Some(ell)))
}

/// Poisson variate: inversion for small means, otherwise a rounded normal
/// draw, redrawn while negative.
pub fn poisson(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean <= 50.0 {
        let u: f64 = rng.gen();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 && cdf < u {
                break;
            }
        }
        return k;
    }
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        let k = (mean + mean.sqrt() * z).round();
        if k >= 0.0 {
            return k as u64;
        }
    }
}

/// Coordinates of a point in both null and inertial form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub u: f64,
    pub v: f64,
    pub t: f64,
    pub x: f64,
}

/// `p ↦ ℓ^{-d} f(p)`: a continuum field of length dimension `d` sampled on
/// the causal set.
pub fn pullback_field(cs: &CausalSet, f: impl Fn(Point) -> f64, d: i32) -> Result<Vec<f64>> {
    let emb = cs.embedding().ok_or(Error::MissingCoordinates)?;
    let ell = cs.length_scale().ok_or(Error::MissingLengthScale)?;
    let scale = ell.powi(-d);
    Ok((0..cs.len())
        .map(|i| {
            let [u, v] = emb.uv(i);
            let [t, x] = emb.tx(i);
            scale * f(Point { u, v, t, x })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_diamond() {
        let lat = diamond_lattice(LatticeSpec::square(2, 1.0));
        let cs = lat.causet();
        assert_eq!(cs.len(), 4);
        assert_eq!(cs.link_matrix().count_ones(), 4);
        let (bot, top) = (lat.at(0, 0), lat.at(1, 1));
        assert!(cs.c(lat.at(1, 0), bot) && cs.c(top, lat.at(0, 1)));
        assert!(!cs.c(lat.at(1, 0), lat.at(0, 1)) && !cs.c(lat.at(0, 1), lat.at(1, 0)));
    }

    #[test]
    fn interior_point_has_two_links_below() {
        let lat = diamond_lattice(LatticeSpec::square(3, 1.0));
        let links = lat.causet().links_below(lat.at(1, 1));
        let mut cells: Vec<_> = links.iter().map(|&l| lat.cell(l)).collect();
        cells.sort();
        assert_eq!(cells, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn same_seed_same_set() {
        let spec = SprinklingSpec { region: Region::Rectangle { t0: 0.0, t1: 2.0, x0: 0.0, x1: 2.0 }, density: 5.0, seed: 9 };
        assert_eq!(sprinkle(&spec).unwrap(), sprinkle(&spec).unwrap());
    }

    #[test]
    fn diamond_volume() {
        let r = Region::Diamond { bottom: [0.0, 0.0], top: [2.0, 0.0] };
        assert!((r.volume() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pullback_scaling() {
        let cs = diamond_lattice(LatticeSpec::square(2, 2.0)).into_causet();
        let phi = pullback_field(&cs, |_| 1.0, -2).unwrap();
        assert!(phi.iter().all(|&x| x == 4.0));
        let plain = pullback_field(&cs, |p| p.u + p.v, 0).unwrap();
        assert_eq!(plain.len(), 4);
    }

    #[test]
    fn subdivided_cell_has_five_more_points() {
        let lat = diamond_lattice(LatticeSpec::square(4, 1.0));
        let cs = subdivide_cell(&lat, 1, 1).unwrap();
        assert_eq!(cs.len(), 21);
        assert!(cs.is_naturally_labelled());
    }
}
