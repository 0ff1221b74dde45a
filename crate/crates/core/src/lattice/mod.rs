//! Crystal lattices described as cells with an `r`-site basis and a finite
//! hopping table, plus real-space assembly on periodic `l^d` tori.

mod assemble;
mod builtin;
mod file;

pub use assemble::{
    assemble_dense, assemble_sparse, connected_components, neighbors, AssembleOptions, Adjacency,
};
pub use builtin::{
    build_decoupled_component, build_dirac_square, build_honeycomb, build_kagome,
    build_staggered_hypercubic, builtin, BUILTIN_NAMES,
};
pub use file::{HoppingRecord, LatticeFile};

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// Tolerance for the `h_{δσσ'} = conj(h_{-δσ'σ})` consistency check.
const HERMITIAN_TOL: f64 = 1e-12;

/// Key of one hopping amplitude: `h_{δσσ'} = <x+δ, σ'| H0 |x, σ>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct HopKey {
    pub delta: Vec<i64>,
    pub from: usize,
    pub to: usize,
}

impl HopKey {
    pub fn new(delta: impl Into<Vec<i64>>, from: usize, to: usize) -> Self {
        HopKey {
            delta: delta.into(),
            from,
            to,
        }
    }

    /// Key of the Hermitian partner `(-δ, σ', σ)`.
    pub fn partner(&self) -> HopKey {
        HopKey {
            delta: self.delta.iter().map(|x| -x).collect(),
            from: self.to,
            to: self.from,
        }
    }
}

/// Sparse table of hopping amplitudes keyed by `(δ, σ, σ')`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HoppingTable {
    entries: BTreeMap<HopKey, C64>,
}

impl HoppingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `amp` to the entry (entries accumulate).
    pub fn add(&mut self, delta: &[i64], from: usize, to: usize, amp: C64) {
        *self
            .entries
            .entry(HopKey::new(delta.to_vec(), from, to))
            .or_insert(ZERO) += amp;
    }

    /// Adds `amp` at `(δ, σ, σ')` and its conjugate at `(-δ, σ', σ)`.
    /// Self-partnered keys (`δ = 0`, `σ = σ'`) get `Re(amp)` once.
    pub fn add_pair(&mut self, delta: &[i64], from: usize, to: usize, amp: C64) {
        let key = HopKey::new(delta.to_vec(), from, to);
        if key == key.partner() {
            self.add(delta, from, to, C64::new(amp.re, 0.0));
        } else {
            let p = key.partner();
            self.add(delta, from, to, amp);
            self.add(&p.delta, p.from, p.to, amp.conj());
        }
    }

    pub fn get(&self, delta: &[i64], from: usize, to: usize) -> C64 {
        self.entries
            .get(&HopKey::new(delta.to_vec(), from, to))
            .copied()
            .unwrap_or(ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HopKey, &C64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn prune_zeros(&mut self) {
        self.entries.retain(|_, v| *v != ZERO);
    }

    /// Inserts missing Hermitian partners.
    pub fn complete_hermitian(&mut self) {
        let missing: Vec<(HopKey, C64)> = self
            .entries
            .iter()
            .filter(|(k, _)| !self.entries.contains_key(&k.partner()))
            .map(|(k, v)| (k.partner(), v.conj()))
            .collect();
        self.entries.extend(missing);
    }

    /// Largest `|h_{δσσ'} - conj(h_{-δσ'σ})|`, with absent entries read as 0.
    pub fn hermiticity_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|(k, v)| {
                let p = self.entries.get(&k.partner()).copied().unwrap_or(ZERO);
                (*v - p.conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Offsets `Δ` with at least one nonzero amplitude.
    pub fn offsets(&self) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = self.entries.keys().map(|k| k.delta.clone()).collect();
        out.dedup();
        out.sort();
        out.dedup();
        out
    }

    pub fn max_offset(&self) -> i64 {
        self.entries
            .keys()
            .flat_map(|k| k.delta.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }
}

/// A crystal: dimension `d`, basis size `r`, hopping table.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub name: String,
    pub d: usize,
    pub r: usize,
    hoppings: HoppingTable,
}

impl LatticeSpec {
    /// Validates the table and wraps it.
    ///
    /// With `strict` every Hermitian partner must be present; otherwise
    /// missing partners are filled in. Present partners must agree either way.
    pub fn new(
        name: impl Into<String>,
        d: usize,
        r: usize,
        mut hoppings: HoppingTable,
        strict: bool,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidSpec("dimension d must be at least 1".into()));
        }
        if r == 0 {
            return Err(Error::InvalidSpec("basis size r must be at least 1".into()));
        }
        hoppings.prune_zeros();
        for (k, v) in hoppings.iter() {
            if k.delta.len() != d {
                return Err(Error::InvalidSpec(format!(
                    "offset {:?} has {} components, expected {d}",
                    k.delta,
                    k.delta.len()
                )));
            }
            if k.from >= r || k.to >= r {
                return Err(Error::InvalidSpec(format!(
                    "site index out of range in ({:?}, {}, {}) for r = {r}",
                    k.delta, k.from, k.to
                )));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidSpec(format!("non-finite amplitude at {k:?}")));
            }
        }
        if strict {
            if let Some((k, _)) = hoppings
                .iter()
                .find(|(k, _)| hoppings.get(&k.partner().delta, k.to, k.from) == ZERO)
            {
                return Err(Error::InvalidSpec(format!(
                    "strict mode: missing Hermitian partner of ({:?}, {}, {})",
                    k.delta, k.from, k.to
                )));
            }
        } else {
            hoppings.complete_hermitian();
        }
        let defect = hoppings.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidSpec(format!(
                "hopping table is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(LatticeSpec {
            name: name.into(),
            d,
            r,
            hoppings,
        })
    }

    pub fn hoppings(&self) -> &HoppingTable {
        &self.hoppings
    }

    /// The same crystal with every on-site energy shifted by `-shift`, so that
    /// an energy `shift` of the original becomes 0.
    pub fn with_energy_shift(&self, shift: f64) -> LatticeSpec {
        let mut h = self.hoppings.clone();
        let zero = vec![0i64; self.d];
        for s in 0..self.r {
            h.add(&zero, s, s, C64::new(-shift, 0.0));
        }
        h.prune_zeros();
        LatticeSpec {
            name: self.name.clone(),
            d: self.d,
            r: self.r,
            hoppings: h,
        }
    }

    pub fn geometry(&self, l: usize) -> Geometry {
        Geometry::new(self.d, self.r, l)
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (d={}, r={}, {} hoppings)",
            self.name,
            self.d,
            self.r,
            self.hoppings.len()
        )
    }
}

/// Site labelling of a periodic `l^d` torus with an `r`-site basis.
///
/// Flat index order is `σ + r·(x₁ + l·x₂ + …)`, so each cell is contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub d: usize,
    pub r: usize,
    pub l: usize,
}

impl Geometry {
    pub fn new(d: usize, r: usize, l: usize) -> Self {
        assert!(l >= 1, "linear size must be positive");
        Geometry { d, r, l }
    }

    /// Number of cells `n = l^d`.
    pub fn cells(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Number of vertices `N = n·r`.
    pub fn sites(&self) -> usize {
        self.cells() * self.r
    }

    /// Wraps each component into `[0, l)`.
    pub fn normalize(&self, x: &[i64]) -> Vec<usize> {
        let l = self.l as i64;
        x.iter().map(|&c| c.rem_euclid(l) as usize).collect()
    }

    pub fn cell_index(&self, x: &[usize]) -> usize {
        debug_assert_eq!(x.len(), self.d);
        x.iter().rev().fold(0, |acc, &c| acc * self.l + c)
    }

    pub fn cell_of_index(&self, mut c: usize) -> Vec<usize> {
        let mut x = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            x.push(c % self.l);
            c /= self.l;
        }
        x
    }

    pub fn flat(&self, x: &[usize], sigma: usize) -> usize {
        debug_assert!(sigma < self.r);
        sigma + self.r * self.cell_index(x)
    }

    pub fn unflat(&self, v: usize) -> (Vec<usize>, usize) {
        (self.cell_of_index(v / self.r), v % self.r)
    }

    /// Index of cell `x + δ` (periodic).
    pub fn shifted_cell(&self, x: &[usize], delta: &[i64]) -> usize {
        let l = self.l as i64;
        x.iter()
            .zip(delta)
            .rev()
            .fold(0usize, |acc, (&c, &dd)| {
                acc * self.l + (c as i64 + dd).rem_euclid(l) as usize
            })
    }
}

/// A marked vertex `|w, α>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Vertex {
    pub cell: Vec<usize>,
    pub alpha: usize,
}

impl Vertex {
    pub fn new(cell: impl Into<Vec<usize>>, alpha: usize) -> Self {
        Vertex {
            cell: cell.into(),
            alpha,
        }
    }

    pub fn origin(d: usize, alpha: usize) -> Self {
        Vertex::new(vec![0; d], alpha)
    }

    pub fn validate(&self, g: &Geometry) -> Result<()> {
        if self.cell.len() != g.d || self.cell.iter().any(|&c| c >= g.l) || self.alpha >= g.r {
            return Err(Error::InvalidConfig(format!(
                "marked vertex {:?}/{} outside the l={} torus with r={}",
                self.cell, self.alpha, g.l, g.r
            )));
        }
        Ok(())
    }

    pub fn flat(&self, g: &Geometry) -> usize {
        g.flat(&self.cell, self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partners_are_completed_unless_strict() {
        let mut t = HoppingTable::new();
        t.add(&[1], 0, 1, C64::new(0.0, 2.0));
        let spec = LatticeSpec::new("t", 1, 2, t.clone(), false).unwrap();
        assert_eq!(spec.hoppings().get(&[-1], 1, 0), C64::new(0.0, -2.0));
        assert!(matches!(
            LatticeSpec::new("t", 1, 2, t, true),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn inconsistent_partner_is_rejected() {
        let mut t = HoppingTable::new();
        t.add(&[1], 0, 1, C64::new(1.0, 0.0));
        t.add(&[-1], 1, 0, C64::new(2.0, 0.0));
        assert!(LatticeSpec::new("bad", 1, 2, t, false).is_err());
    }

    #[test]
    fn bad_site_or_offset_rejected() {
        let mut t = HoppingTable::new();
        t.add(&[0, 0], 0, 3, C64::new(1.0, 0.0));
        assert!(LatticeSpec::new("bad", 2, 2, t, false).is_err());
        let mut t = HoppingTable::new();
        t.add(&[0], 0, 1, C64::new(1.0, 0.0));
        assert!(LatticeSpec::new("bad", 2, 2, t, false).is_err());
    }

    #[test]
    fn energy_shift_moves_diagonal() {
        let s = build_kagome().with_energy_shift(-1.0);
        assert_eq!(s.hoppings().get(&[0, 0], 1, 1), ZERO);
    }

    proptest! {
        #[test]
        fn flat_index_round_trips(d in 1usize..4, r in 1usize..5, l in 1usize..6, seed in 0usize..10_000) {
            let g = Geometry::new(d, r, l);
            let v = seed % g.sites();
            let (x, s) = g.unflat(v);
            prop_assert!(x.iter().all(|&c| c < l));
            prop_assert_eq!(g.flat(&x, s), v);
        }

        #[test]
        fn shifted_cell_matches_normalize(l in 1usize..7, a in -20i64..20, b in -20i64..20, x0 in 0usize..7, x1 in 0usize..7) {
            let g = Geometry::new(2, 1, l);
            let x = [x0 % l, x1 % l];
            let want = g.cell_index(&g.normalize(&[x[0] as i64 + a, x[1] as i64 + b]));
            prop_assert_eq!(g.shifted_cell(&x, &[a, b]), want);
        }
    }
}
