use super::{Geometry, LatticeSpec};
use crate::error::{Error, Result};
use crate::linalg::{SparseOperator, C64, ZERO};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssembleOptions {
    /// Allow `l < 3·max|δ_i|` and sum offsets that wrap onto each other.
    pub sum_aliases: bool,
}

impl AssembleOptions {
    pub fn summing() -> Self {
        AssembleOptions { sum_aliases: true }
    }
}

fn check_aliasing(spec: &LatticeSpec, l: usize, opts: AssembleOptions) -> Result<()> {
    let max_offset = spec.hoppings().max_offset();
    let required = (3 * max_offset).max(1) as usize;
    if !opts.sum_aliases && l < required {
        return Err(Error::Aliasing {
            l,
            max_offset,
            required,
        });
    }
    Ok(())
}

fn triplets(spec: &LatticeSpec, g: &Geometry) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::with_capacity(g.cells() * spec.hoppings().len());
    for c in 0..g.cells() {
        let x = g.cell_of_index(c);
        for (key, &amp) in spec.hoppings().iter() {
            let target = g.shifted_cell(&x, &key.delta);
            out.push((key.to + g.r * target, key.from + g.r * c, amp));
        }
    }
    out
}

/// Real-space `H0` on the periodic `l^d` torus, in CSR form.
pub fn assemble_sparse(spec: &LatticeSpec, l: usize, opts: AssembleOptions) -> Result<SparseOperator> {
    check_aliasing(spec, l, opts)?;
    let g = spec.geometry(l);
    Ok(SparseOperator::from_triplets(g.sites(), triplets(spec, &g)))
}

/// Dense real-space `H0`, `M[(x+δ, σ'), (x, σ)] += h_{δσσ'}`.
pub fn assemble_dense(spec: &LatticeSpec, l: usize, opts: AssembleOptions) -> Result<DMatrix<C64>> {
    check_aliasing(spec, l, opts)?;
    let g = spec.geometry(l);
    let n = g.sites();
    let mut m = DMatrix::from_element(n, n, ZERO);
    for (i, j, v) in triplets(spec, &g) {
        m[(i, j)] += v;
    }
    Ok(m)
}

/// Column `v` of `H0`: the on-site amplitude and every other vertex `u` with
/// `<u|H0|v> != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub onsite: C64,
    pub neighbors: Vec<(usize, C64)>,
}

impl Adjacency {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

/// Neighbours of flat vertex `v` on the `l` torus. Coincident wrapped offsets
/// are summed.
pub fn neighbors(spec: &LatticeSpec, l: usize, v: usize) -> Adjacency {
    let g = spec.geometry(l);
    assert!(v < g.sites(), "vertex {v} out of range");
    let (x, sigma) = g.unflat(v);
    let mut acc: Vec<(usize, C64)> = Vec::new();
    for (key, &amp) in spec.hoppings().iter().filter(|(k, _)| k.from == sigma) {
        let u = key.to + g.r * g.shifted_cell(&x, &key.delta);
        match acc.iter_mut().find(|(w, _)| *w == u) {
            Some(e) => e.1 += amp,
            None => acc.push((u, amp)),
        }
    }
    let onsite = acc
        .iter()
        .find(|(u, _)| *u == v)
        .map(|e| e.1)
        .unwrap_or(ZERO);
    let mut nb: Vec<(usize, C64)> = acc
        .into_iter()
        .filter(|&(u, a)| u != v && a != ZERO)
        .collect();
    nb.sort_by_key(|e| e.0);
    Adjacency {
        onsite,
        neighbors: nb,
    }
}

/// Connected components of the graph of nonzero off-diagonal entries, each
/// sorted, ordered by smallest vertex.
pub fn connected_components(h: &SparseOperator) -> Vec<Vec<usize>> {
    let n = h.dim();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        label[start] = id;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for (u, _) in h.row(v) {
                if label[u] == usize::MAX {
                    label[u] = id;
                    members.push(u);
                    stack.push(u);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        build_dirac_square, build_honeycomb, build_kagome, build_staggered_hypercubic,
    };
    use crate::linalg::hermiticity_defect;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn staggered_d1_l2_is_signed_four_cycle() {
        // Vertices v = 0..4 along the line with H0|v> = (-1)^v (|v+1> - |v-1>),
        // which in (cell, σ) order is just v itself.
        let m = assemble_dense(&build_staggered_hypercubic(1), 2, AssembleOptions::summing()).unwrap();
        let mut want = DMatrix::from_element(4, 4, ZERO);
        for v in 0..4usize {
            let s = if v % 2 == 0 { 1.0 } else { -1.0 };
            want[((v + 1) % 4, v)] += re(s);
            want[((v + 3) % 4, v)] -= re(s);
        }
        assert_eq!(m, want);
    }

    #[test]
    fn aliasing_rejected_by_default() {
        let err = assemble_sparse(&build_staggered_hypercubic(2), 2, AssembleOptions::default());
        assert!(matches!(err, Err(Error::Aliasing { required: 3, .. })));
    }

    #[test]
    fn staggered_d2_torus_degrees() {
        let h = assemble_sparse(&build_staggered_hypercubic(2), 2, AssembleOptions::summing()).unwrap();
        assert_eq!(h.dim(), 16);
        for v in 0..16 {
            assert_eq!(h.row(v).count(), 4);
            assert!(h.row(v).all(|(_, a)| a.norm() == 1.0));
        }
        assert_eq!(connected_components(&h).len(), 1);
    }

    #[test]
    fn honeycomb_rows_have_three_entries() {
        let m = assemble_dense(&build_honeycomb(), 3, AssembleOptions::default()).unwrap();
        assert_eq!(m.nrows(), 18);
        assert_eq!(hermiticity_defect(&m), 0.0);
        for i in 0..18 {
            let off = (0..18).filter(|&j| j != i && m[(i, j)] != ZERO).count();
            assert_eq!(off, 3);
        }
    }

    #[test]
    fn neighbour_counts() {
        let k = neighbors(&build_kagome(), 4, 5);
        assert_eq!(k.degree(), 4);
        assert_eq!(k.onsite, re(-1.0));
        assert_eq!(neighbors(&build_honeycomb(), 4, 3).degree(), 3);
        assert_eq!(neighbors(&build_staggered_hypercubic(2), 4, 7).degree(), 4);
    }

    #[test]
    fn gapless_dirac_square_splits_in_two() {
        let h = assemble_sparse(&build_dirac_square(0.0, 1.0), 4, AssembleOptions::default()).unwrap();
        assert_eq!(connected_components(&h).len(), 2);
        let h = assemble_sparse(&build_dirac_square(1.0, 1.0), 4, AssembleOptions::default()).unwrap();
        assert_eq!(connected_components(&h).len(), 1);
    }

    #[test]
    fn commutes_with_cell_translations() {
        for spec in [build_kagome(), build_honeycomb(), build_staggered_hypercubic(2)] {
            let l = 4;
            let m = assemble_dense(&spec, l, AssembleOptions::default()).unwrap();
            let g = spec.geometry(l);
            for axis in 0..2 {
                let mut e = vec![0i64; 2];
                e[axis] = 1;
                let n = g.sites();
                let perm: Vec<usize> = (0..n)
                    .map(|v| {
                        let (x, s) = g.unflat(v);
                        s + g.r * g.shifted_cell(&x, &e)
                    })
                    .collect();
                for i in 0..n {
                    for j in 0..n {
                        assert_eq!(m[(perm[i], perm[j])], m[(i, j)]);
                    }
                }
            }
        }
    }
}
