//! Momentum-space blocks `H0(k)`, band structures and Dirac-point analysis.

mod dirac;

pub(crate) use dirac::lcm;

pub use dirac::{
    find_dirac_points, verify_assumptions, AssumptionCheck, AssumptionReport, DiracOptions,
    DiracPoint, DiracSearch, Rational,
};

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::lattice::LatticeSpec;
use crate::linalg::{eigh, C64, ZERO};

/// Eigenvalues closer than this are one degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Maps an angle into `(-π, π]`.
pub fn canonical_angle(k: f64) -> f64 {
    let mut x = k.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Momentum {
    pub k: Vec<f64>,
}

impl Momentum {
    pub fn new(k: impl Into<Vec<f64>>) -> Self {
        Momentum {
            k: k.into().into_iter().map(canonical_angle).collect(),
        }
    }

    /// `k_i = 2π m_i / l`.
    pub fn from_grid(m: &[usize], l: usize) -> Self {
        Momentum::new(
            m.iter()
                .map(|&mi| 2.0 * PI * mi as f64 / l as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn zero(d: usize) -> Self {
        Momentum { k: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn dot(&self, x: &[i64]) -> f64 {
        self.k.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
    }

    /// Grid coordinates `m` with `k = 2π m / l`, if `k` lies on the grid.
    pub fn grid_coords(&self, l: usize, tol: f64) -> Option<Vec<usize>> {
        self.k
            .iter()
            .map(|&ki| {
                let m = ki * l as f64 / (2.0 * PI);
                let r = m.round();
                ((m - r).abs() <= tol).then(|| (r as i64).rem_euclid(l as i64) as usize)
            })
            .collect()
    }
}

/// All `l^d` grid momenta, `m_1` varying fastest.
pub fn momentum_grid(d: usize, l: usize) -> Vec<Momentum> {
    assert!(l >= 1);
    let total = l.pow(d as u32);
    (0..total)
        .map(|mut c| {
            let m: Vec<usize> = (0..d)
                .map(|_| {
                    let x = c % l;
                    c /= l;
                    x
                })
                .collect();
            Momentum::from_grid(&m, l)
        })
        .collect()
}

/// Hopping table flattened for repeated Fourier sums.
#[derive(Debug, Clone)]
pub struct BlochKernel {
    r: usize,
    terms: Vec<(Vec<f64>, usize, usize, C64)>,
}

impl BlochKernel {
    pub fn new(spec: &LatticeSpec) -> Self {
        BlochKernel {
            r: spec.r,
            terms: spec
                .hoppings()
                .iter()
                .map(|(key, &v)| {
                    (
                        key.delta.iter().map(|&x| x as f64).collect(),
                        key.from,
                        key.to,
                        v,
                    )
                })
                .collect(),
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `[H0(k)]_{σσ'} = Σ_δ h_{δσσ'} e^{-ik·δ}`.
    pub fn matrix(&self, k: &[f64]) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.r, self.r, ZERO);
        for (delta, from, to, amp) in &self.terms {
            let phase: f64 = -delta.iter().zip(k).map(|(a, b)| a * b).sum::<f64>();
            m[(*from, *to)] += amp * C64::from_polar(1.0, phase);
        }
        m
    }

    /// Action of `H0` on the plane waves: `H0 |k,σ> = Σ_σ' A[σ',σ] |k,σ'>`,
    /// i.e. the transpose of [`BlochKernel::matrix`].
    pub fn operator(&self, k: &[f64]) -> DMatrix<C64> {
        self.matrix(k).transpose()
    }

    /// Sorted band energies at `k`.
    pub fn energies(&self, k: &[f64]) -> Vec<f64> {
        let mut e: Vec<f64> = self.operator(k).symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// One diagonalised Bloch block.
///
/// `matrix` follows the hopping-table convention `[H0(k)]_{σσ'}`. Column `j`
/// of `eigenvectors` holds the coefficients `v_σ` of the eigenstate
/// `Σ_σ v_σ |k,σ>`, `|k,σ> = n^{-1/2} Σ_x e^{ik·x} |x,σ>`, so the vectors
/// diagonalise `matrixᵀ`.
#[derive(Debug, Clone)]
pub struct BlochBlock {
    pub k: Momentum,
    pub matrix: DMatrix<C64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl BlochBlock {
    /// Projector onto the eigenvectors listed in `bands`, in the `|k,σ>` basis.
    pub fn projector(&self, bands: &[usize]) -> DMatrix<C64> {
        let r = self.matrix.nrows();
        let mut p = DMatrix::from_element(r, r, ZERO);
        for &b in bands {
            let v = self.eigenvectors.column(b);
            p += &v * v.adjoint();
        }
        p
    }

    /// Groups band indices whose energies agree within [`DEGENERACY_TOL`].
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        cluster_indices(&self.eigenvalues)
    }
}

pub(crate) fn cluster_indices(sorted: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, &e) in sorted.iter().enumerate() {
        match out.last_mut() {
            Some(c) if (e - sorted[*c.last().unwrap()]).abs() <= DEGENERACY_TOL => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

pub fn block_matrix(spec: &LatticeSpec, k: &Momentum) -> BlochBlock {
    block_from_kernel(&BlochKernel::new(spec), k)
}

pub fn block_from_kernel(kernel: &BlochKernel, k: &Momentum) -> BlochBlock {
    let matrix = kernel.matrix(&k.k);
    let eig = eigh(&matrix.transpose());
    BlochBlock {
        k: k.clone(),
        matrix,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
    }
}

/// Bands on a momentum grid.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub d: usize,
    pub r: usize,
    pub momenta: Vec<Momentum>,
    /// `bands[p][i]` is `E_{i+1}` at `momenta[p]`, ascending in `i`.
    pub bands: Vec<Vec<f64>>,
}

impl BandStructure {
    pub fn compute(spec: &LatticeSpec, l: usize) -> Self {
        let kernel = BlochKernel::new(spec);
        let momenta = momentum_grid(spec.d, l);
        let bands = momenta.par_iter().map(|k| kernel.energies(&k.k)).collect();
        BandStructure {
            d: spec.d,
            r: spec.r,
            momenta,
            bands,
        }
    }

    /// Smallest `|E_i(k)|` over the grid.
    pub fn min_abs_energy(&self) -> f64 {
        self.bands
            .iter()
            .flatten()
            .map(|e| e.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `k1..kd,E1..Er`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header: Vec<String> = (1..=self.d).map(|i| format!("k{i}")).collect();
        header.extend((1..=self.r).map(|i| format!("E{i}")));
        writeln!(out, "{}", header.join(","))?;
        for (k, e) in self.momenta.iter().zip(&self.bands) {
            let row: Vec<String> = k.k.iter().chain(e).map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        build_decoupled_component, build_dirac_square, build_honeycomb, build_kagome,
        build_staggered_hypercubic,
    };
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_sizes_and_ranges() {
        let g = momentum_grid(1, 2);
        assert_eq!(g.len(), 2);
        assert!(close(&g[0].k, &[0.0], 0.0) && close(&g[1].k, &[PI], 0.0));
        assert_eq!(momentum_grid(2, 2).len(), 4);
        let g = momentum_grid(3, 4);
        assert_eq!(g.len(), 64);
        for k in &g {
            for &x in &k.k {
                assert!([-PI / 2.0, 0.0, PI / 2.0, PI].iter().any(|y| (x - y).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn honeycomb_blocks() {
        let h = build_honeycomb();
        let b = block_matrix(&h, &Momentum::zero(2));
        assert!((b.matrix[(0, 1)] - c(3.0, 0.0)).norm() < 1e-14);
        assert!((b.matrix[(1, 0)] - c(3.0, 0.0)).norm() < 1e-14);
        let b = block_matrix(&h, &Momentum::new([2.0 * PI / 3.0, 2.0 * PI / 3.0]));
        assert!(b.matrix.norm() < 1e-14);
        let b = block_matrix(&h, &Momentum::new([PI, 0.0]));
        assert!((b.matrix[(1, 0)] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((b.matrix[(0, 1)] - c(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn kagome_blocks() {
        let s = build_kagome();
        let b = block_matrix(&s, &Momentum::zero(2));
        assert!(close(&b.eigenvalues, &[-3.0, -3.0, 3.0], 1e-12));
        let b = block_matrix(&s, &Momentum::new([2.0 * PI / 3.0, -2.0 * PI / 3.0]));
        assert!(close(&b.eigenvalues, &[-3.0, 0.0, 0.0], 1e-12));
    }

    #[test]
    fn dirac_square_blocks() {
        let s = build_dirac_square(1.0, 1.0);
        assert!(block_matrix(&s, &Momentum::zero(2)).matrix.norm() < 1e-14);
        let b = block_matrix(&s, &Momentum::new([PI, PI]));
        assert!((b.matrix[(0, 0)] - c(4.0, 0.0)).norm() < 1e-14);
        assert!((b.matrix[(1, 1)] - c(-4.0, 0.0)).norm() < 1e-14);
        assert!(b.matrix[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn decoupled_component_has_two_zeros() {
        let s = build_decoupled_component();
        let zeros = momentum_grid(2, 8)
            .iter()
            .filter(|k| block_matrix(&s, k).eigenvalues.iter().all(|e| e.abs() < 1e-12))
            .count();
        assert_eq!(zeros, 2);
    }

    #[test]
    fn band_csv_header() {
        let bs = BandStructure::compute(&build_honeycomb(), 3);
        let mut buf = Vec::new();
        bs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k1,k2,E1,E2\n"));
        assert_eq!(text.lines().count(), 10);
    }

    fn staggered_e(k: &[f64]) -> f64 {
        k.iter()
            .map(|x| x.sin().powi(2) + (1.0 - x.cos()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn closed_forms_hold(kx in -PI..PI, ky in -PI..PI, g in -2.0f64..2.0, w in -2.0f64..2.0) {
            let k = Momentum::new([kx, ky]);
            let i = C64::new(0.0, 1.0);

            let h = block_matrix(&build_honeycomb(), &k).matrix;
            let hk = C64::new(1.0, 0.0) + (-i * kx).exp() + (-i * (kx + ky)).exp();
            prop_assert!((h[(1, 0)] - hk).norm() < 1e-12);
            prop_assert!((h[(0, 1)] - hk.conj()).norm() < 1e-12);
            prop_assert!(h[(0, 0)].norm() < 1e-12);

            let gf = |q: f64| C64::new(1.0, 0.0) + (i * q).exp();
            let kg = block_matrix(&build_kagome(), &k).matrix;
            let want = [
                [C64::new(-1.0, 0.0), gf(ky), gf(ky - kx)],
                [gf(-ky), C64::new(-1.0, 0.0), gf(-kx)],
                [gf(kx - ky), gf(kx), C64::new(-1.0, 0.0)],
            ];
            for a in 0..3 {
                for b in 0..3 {
                    prop_assert!((kg[(a, b)] - want[a][b]).norm() < 1e-12);
                }
            }

            let ds = block_matrix(&build_dirac_square(g, w), &k).matrix;
            let s = C64::new(kx.sin(), -ky.sin());
            let cc = 2.0 - kx.cos() - ky.cos();
            prop_assert!((ds[(0, 0)] - C64::new(g * cc, 0.0)).norm() < 1e-12);
            prop_assert!((ds[(1, 1)] + C64::new(g * cc, 0.0)).norm() < 1e-12);
            prop_assert!((ds[(1, 0)] - s * w).norm() < 1e-12);
            prop_assert!((ds[(0, 1)] - s.conj() * w).norm() < 1e-12);

            let hb = block_matrix(&build_honeycomb(), &k);
            let e = (3.0 + 2.0 * (kx.cos() + ky.cos() + (kx + ky).cos())).max(0.0).sqrt();
            prop_assert!(close(&hb.eigenvalues, &[-e, e], 1e-7));
        }

        #[test]
        fn staggered_blocks_square_to_dispersion(d in 1usize..5, seed in proptest::collection::vec(-PI..PI, 4)) {
            let k = Momentum::new(seed[..d].to_vec());
            let b = block_matrix(&build_staggered_hypercubic(d), &k);
            let e = staggered_e(&k.k);
            let half = 1usize << (d - 1);
            let mut want = vec![-e; half];
            want.extend(vec![e; half]);
            prop_assert!(close(&b.eigenvalues, &want, 1e-10));
            let sq = &b.matrix * &b.matrix;
            let r = b.matrix.nrows();
            for a in 0..r {
                prop_assert!(b.matrix[(a, a)].norm() < 1e-14);
                for c2 in 0..r {
                    let want = if a == c2 { e * e } else { 0.0 };
                    prop_assert!((sq[(a, c2)] - C64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn blocks_are_2pi_periodic(kx in -PI..PI, ky in -PI..PI, sx in -2i32..3, sy in -2i32..3) {
            let spec = build_kagome();
            let kernel = BlochKernel::new(&spec);
            let a = kernel.matrix(&[kx, ky]);
            let b = kernel.matrix(&[kx + 2.0 * PI * sx as f64, ky + 2.0 * PI * sy as f64]);
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
