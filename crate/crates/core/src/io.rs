//! Causal-set files and matrix export.
//!
//! A causal-set file stores the covering relation, never the full order:
//! `{"n": N, "covers": [[a, b], ...], "coords": [[u, v], ...], "length_scale": ℓ}`
//! with `(a, b)` meaning `a ≺ b`. The closure is recomputed on load and
//! compared with the optional `c_checksum` and `relations` fields.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bitmatrix::BitMatrix;
use crate::causet::{fnv1a_hex, CausalSet, CoordSystem, Embedding};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausetFile {
    pub n: usize,
    pub covers: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord_system: Option<CoordSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_checksum: Option<String>,
    /// Optional claim of the full order as `[a, b]` pairs with `a ≺ b`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<[usize; 2]>>,
}

impl CausetFile {
    pub fn from_causet(cs: &CausalSet) -> Self {
        let emb = cs.embedding();
        CausetFile {
            n: cs.len(),
            covers: cs.covers().into_iter().map(|(a, b)| [a, b]).collect(),
            coords: emb.map(|e| e.points.clone()),
            coord_system: emb.map(|e| e.system),
            length_scale: cs.length_scale(),
            c_checksum: Some(cs.c_checksum()),
            relations: None,
        }
    }

    /// Loads the set, relabelling naturally, and rejects checksum or
    /// relation-claim mismatches.
    pub fn to_causet(&self) -> Result<CausalSet> {
        let report = self.validate();
        if let Some(err) = report.error {
            return Err(err);
        }
        if !report.violations.is_empty() {
            return Err(Error::Invalid(report.violations.join("; ")));
        }
        self.build()
    }

    fn build(&self) -> Result<CausalSet> {
        let covers: Vec<(usize, usize)> = self.covers.iter().map(|&[a, b]| (a, b)).collect();
        let mut cs = CausalSet::from_relations(self.n, &covers)?;
        if let Some(coords) = &self.coords {
            if coords.len() != self.n {
                return Err(Error::Dimension(format!("{} coordinates for {} elements", coords.len(), self.n)));
            }
            let points = cs.original_indices().iter().map(|&old| coords[old]).collect();
            cs = cs.with_embedding(Embedding { system: self.coord_system.unwrap_or(CoordSystem::Uv), points })?;
        }
        if let Some(ell) = self.length_scale {
            cs = cs.with_length_scale(ell);
        }
        Ok(cs)
    }

    /// Checks acyclicity, index ranges, the checksum and any relation claim.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let cs = match self.build() {
            Ok(cs) => cs,
            Err(e) => {
                violations.push(e.to_string());
                return ValidationReport { ok: false, violations, naturally_labelled: false, checksum: None, error: Some(e) };
            }
        };
        let naturally_labelled = self.covers.iter().all(|&[a, b]| a < b);
        let c = &causal_matrix_in_file_labels(&cs);
        let checksum = fnv1a_hex(&c.row_major_bytes());
        if let Some(claim) = &self.c_checksum {
            if !claim.eq_ignore_ascii_case(&checksum) {
                violations.push(format!("checksum mismatch: file says {claim}, closure gives {checksum}"));
            }
        }
        if let Some(rel) = &self.relations {
            let claimed: BTreeSet<(usize, usize)> = rel.iter().map(|&[a, b]| (a, b)).collect();
            let actual: BTreeSet<(usize, usize)> =
                (0..self.n).flat_map(|x| (0..self.n).filter(move |&y| c.get(x, y)).map(move |y| (y, x))).collect();
            let missing: Vec<_> = actual.difference(&claimed).collect();
            let extra: Vec<_> = claimed.difference(&actual).collect();
            if !missing.is_empty() || !extra.is_empty() {
                violations.push(format!("closure mismatch: claimed relations omit {missing:?} and add {extra:?}"));
            }
        }
        ValidationReport { ok: violations.is_empty(), violations, naturally_labelled, checksum: Some(checksum), error: None }
    }
}

/// `C` indexed by the labels of the file the set was read from.
fn causal_matrix_in_file_labels(cs: &CausalSet) -> BitMatrix {
    let n = cs.len();
    let orig = cs.original_indices();
    let mut m = BitMatrix::new(n);
    for x in 0..n {
        for y in cs.past_of(x).iter() {
            m.set(orig[x], orig[y]);
        }
    }
    m
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<String>,
    pub naturally_labelled: bool,
    pub checksum: Option<String>,
    #[serde(skip)]
    pub error: Option<Error>,
}

pub fn read_causet(path: impl AsRef<Path>) -> Result<CausalSet> {
    read_causet_file(path)?.to_causet()
}

pub fn read_causet_file(path: impl AsRef<Path>) -> Result<CausetFile> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn write_causet(path: impl AsRef<Path>, cs: &CausalSet) -> Result<()> {
    std::fs::write(path, causet_json(cs))?;
    Ok(())
}

pub fn causet_json(cs: &CausalSet) -> String {
    serde_json::to_string_pretty(&CausetFile::from_causet(cs)).expect("plain data serializes")
}

/// `x` formatted like C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Row-major CSV with full precision.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_g17(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Row-major nested arrays for JSON.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{diamond_lattice, LatticeSpec};

    #[test]
    fn roundtrip_preserves_order_and_coordinates() {
        let lat = diamond_lattice(LatticeSpec::square(3, 0.5));
        let cs = lat.causet();
        let back: CausetFile = serde_json::from_str(&causet_json(cs)).unwrap();
        let loaded = back.to_causet().unwrap();
        assert_eq!(loaded.causal_matrix(), cs.causal_matrix());
        assert_eq!(loaded.embedding(), cs.embedding());
        assert_eq!(loaded.length_scale(), Some(0.5));
    }

    #[test]
    fn cycle_and_closure_violations() {
        let cyc = CausetFile { n: 3, covers: vec![[0, 1], [1, 2], [2, 0]], coords: None, coord_system: None, length_scale: None, c_checksum: None, relations: None };
        let rep = cyc.validate();
        assert!(!rep.ok && rep.violations[0].contains("cycle"));
        let claim = CausetFile { relations: Some(vec![[0, 1], [1, 2]]), covers: vec![[0, 1], [1, 2]], ..cyc };
        let rep = claim.validate();
        assert!(rep.violations.iter().any(|v| v.contains("closure mismatch") && v.contains("(0, 2)")));
    }

    #[test]
    fn checksum_uses_file_labels() {
        let f = CausetFile { n: 2, covers: vec![[1, 0]], coords: None, coord_system: None, length_scale: None, c_checksum: None, relations: None };
        let rep = f.validate();
        assert!(!rep.naturally_labelled);
        // C[1][0] = 0, C[0][1] = 1: bit 1 of the first byte.
        assert_eq!(rep.checksum.unwrap(), fnv1a_hex(&[0b10]));
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(format_g17(-3.0), "-3");
        assert_eq!(format_g17(1e20), "1e+20");
    }
}
