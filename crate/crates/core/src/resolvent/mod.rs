//! The resolvent element `F(E) = <w,α|(γH0 - E)^{-1}|w,α>` from exact Bloch
//! eigendecompositions, its roots, and the derived search predictions.

mod extrapolate;
mod roots;

pub use extrapolate::{
    default_ladder, extrapolate_sums, limit_integrals, log_fit, power_fit, richardson, Estimate, I2Limit,
    IntegralOptions, LimitIntegrals,
};
pub use roots::{
    f_gamma, find_roots, gamma_analysis, predict, predict_from_measure, write_prediction_csv,
    GammaTuning, RootMode, RootTarget, SpectralPrediction, PREDICTION_HEADER,
};

use std::io::Write;

use rayon::prelude::*;

use crate::bloch::{block_from_kernel, momentum_grid, BlochKernel};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Vertex};
use crate::linalg::KahanSum;

/// Eigenvalues with `|E|` at most this are zero modes of `H0`.
pub const KERNEL_TOL: f64 = 1e-9;
/// Fraction of `1/n` below which a spectral weight is treated as zero.
const WEIGHT_CUTOFF: f64 = 1e-12;
const CHUNK: usize = 4096;
const POLE_TOL: f64 = 1e-12;

/// The spectral measure of `|w,α>` under `H0`: the distinct eigenvalues
/// `E` (per momentum, degenerate clusters merged) with weights
/// `|<w,α|P_E|w,α>|`.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    pub d: usize,
    pub l: usize,
    pub n: usize,
    pub r: usize,
    pub alpha: usize,
    /// Nonzero energies, grid order.
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
    /// Total weight in the kernel of `H0`, `χ_α / n` when every Dirac point
    /// is on the grid.
    pub kernel_weight: f64,
    /// Smallest `|E_i(k)|` outside the kernel, weighted or not.
    pub min_nonzero_energy: f64,
}

fn chunked_sum(len: usize, term: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let hi = ((c + 1) * CHUNK).min(len);
            (c * CHUNK..hi).map(&term).collect::<KahanSum>().value()
        })
        .collect();
    partials.into_iter().collect::<KahanSum>().value()
}

impl SpectralMeasure {
    pub fn new(spec: &LatticeSpec, l: usize, marked: &Vertex) -> Result<Self> {
        let g = spec.geometry(l);
        marked.validate(&g)?;
        let kernel = BlochKernel::new(spec);
        let n = g.cells();
        let w: Vec<i64> = marked.cell.iter().map(|&x| x as i64).collect();
        let alpha = marked.alpha;
        let per_k: Vec<(Vec<(f64, f64)>, f64, f64)> = momentum_grid(spec.d, l)
            .par_iter()
            .map(|k| {
                let b = block_from_kernel(&kernel, k);
                let phase = crate::linalg::C64::from_polar(1.0, k.dot(&w));
                let mut entries = Vec::new();
                let mut kern = 0.0;
                let mut min_e = f64::INFINITY;
                for cluster in b.clusters() {
                    let e = cluster.iter().map(|&i| b.eigenvalues[i]).sum::<f64>()
                        / cluster.len() as f64;
                    let wt: f64 = cluster
                        .iter()
                        .map(|&i| (phase * b.eigenvectors[(alpha, i)]).norm_sqr())
                        .sum::<f64>()
                        / n as f64;
                    if e.abs() <= KERNEL_TOL {
                        kern += wt;
                    } else {
                        min_e = min_e.min(e.abs());
                        if wt * n as f64 > WEIGHT_CUTOFF {
                            entries.push((e, wt));
                        }
                    }
                }
                (entries, kern, min_e)
            })
            .collect();
        let mut energies = Vec::new();
        let mut weights = Vec::new();
        let mut kernel_weight = KahanSum::default();
        let mut min_nonzero_energy = f64::INFINITY;
        for (entries, kern, min_e) in per_k {
            for (e, wt) in entries {
                energies.push(e);
                weights.push(wt);
            }
            kernel_weight.add(kern);
            min_nonzero_energy = min_nonzero_energy.min(min_e);
        }
        Ok(SpectralMeasure {
            d: spec.d,
            l,
            n,
            r: spec.r,
            alpha,
            energies,
            weights,
            kernel_weight: kernel_weight.value(),
            min_nonzero_energy,
        })
    }

    /// Number of vertices `N = n·r`.
    pub fn sites(&self) -> usize {
        self.n * self.r
    }

    fn check_gamma(gamma: f64) -> Result<()> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
        }
        Ok(())
    }

    fn check_poles(&self, e: f64, gamma: f64) -> Result<()> {
        let scale = e.abs().max(1.0);
        if self.kernel_weight > 0.0 && e.abs() <= POLE_TOL * scale {
            return Err(Error::PoleProximity {
                energy: e,
                eigenvalue: 0.0,
                distance: e.abs(),
            });
        }
        let (dist, eig) = self
            .energies
            .par_chunks(CHUNK)
            .map(|c| {
                c.iter()
                    .map(|&x| ((gamma * x - e).abs(), gamma * x))
                    .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
            })
            .reduce(|| (f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        if dist <= POLE_TOL * scale {
            return Err(Error::PoleProximity {
                energy: e,
                eigenvalue: eig,
                distance: dist,
            });
        }
        Ok(())
    }

    /// `F(E) = Σ p / (γE_i - E)`, including the kernel pole `-p_0/E`.
    pub fn f(&self, e: f64, gamma: f64) -> Result<f64> {
        Self::check_gamma(gamma)?;
        self.check_poles(e, gamma)?;
        let bulk = chunked_sum(self.energies.len(), |i| {
            self.weights[i] / (gamma * self.energies[i] - e)
        });
        let kern = if self.kernel_weight > 0.0 {
            -self.kernel_weight / e
        } else {
            0.0
        };
        Ok(bulk + kern)
    }

    /// `F'(E) = Σ p / (γE_i - E)^2 = <w,α|(γH0 - E)^{-2}|w,α>`.
    pub fn f_prime(&self, e: f64, gamma: f64) -> Result<f64> {
        Self::check_gamma(gamma)?;
        self.check_poles(e, gamma)?;
        let bulk = chunked_sum(self.energies.len(), |i| {
            self.weights[i] / (gamma * self.energies[i] - e).powi(2)
        });
        let kern = if self.kernel_weight > 0.0 {
            self.kernel_weight / (e * e)
        } else {
            0.0
        };
        Ok(bulk + kern)
    }

    /// `<w̃|H̃0^{-m}|w̃>`: the sum over nonzero energies of `p E^{-m}`.
    /// Negative `m` gives plain moments, e.g. `m = -2` is `<w,α|H0²|w,α>`.
    pub fn moment(&self, m: i32) -> f64 {
        chunked_sum(self.energies.len(), |i| {
            self.weights[i] * self.energies[i].powi(-m)
        })
    }

    /// Smallest weighted `γE_i` on each side of zero: the poles bounding the
    /// two central roots.
    pub fn nearest_poles(&self, gamma: f64) -> (Option<f64>, Option<f64>) {
        let mut neg: Option<f64> = None;
        let mut pos: Option<f64> = None;
        for &e in &self.energies {
            let x = gamma * e;
            if x > 0.0 {
                pos = Some(pos.map_or(x, |p| p.min(x)));
            } else {
                neg = Some(neg.map_or(x, |p| p.max(x)));
            }
        }
        (neg, pos)
    }
}

/// Finite-lattice moments at one size.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LatticeSums {
    pub l: usize,
    pub n: usize,
    /// `(m, <w̃|H̃0^{-m}|w̃>)` for `m = 1..=m_max`.
    pub moments: Vec<(u32, f64)>,
    pub min_nonzero_energy: f64,
    pub kernel_weight: f64,
}

impl LatticeSums {
    pub fn moment(&self, m: u32) -> Option<f64> {
        self.moments.iter().find(|x| x.0 == m).map(|x| x.1)
    }

    pub fn from_measure(mu: &SpectralMeasure, m_max: u32) -> Self {
        LatticeSums {
            l: mu.l,
            n: mu.n,
            moments: (1..=m_max).map(|m| (m, mu.moment(m as i32))).collect(),
            min_nonzero_energy: mu.min_nonzero_energy,
            kernel_weight: mu.kernel_weight,
        }
    }
}

pub fn lattice_moments(
    spec: &LatticeSpec,
    l: usize,
    marked: &Vertex,
    m_max: u32,
) -> Result<LatticeSums> {
    Ok(LatticeSums::from_measure(
        &SpectralMeasure::new(spec, l, marked)?,
        m_max,
    ))
}

/// Moments CSV, columns `l,m,value`.
pub fn write_moments_csv<W: Write>(sums: &[LatticeSums], mut out: W) -> std::io::Result<()> {
    writeln!(out, "l,m,value")?;
    for s in sums {
        for (m, v) in &s.moments {
            writeln!(out, "{},{},{:.16e}", s.l, m, v)?;
        }
    }
    Ok(())
}
