use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{block_matrix, canonical_angle, BlochKernel, Momentum};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

/// Tunables for [`find_dirac_points`] and [`verify_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiracOptions {
    /// Scan points per axis; `None` picks 64, reduced for large `d·r`.
    pub resolution: Option<usize>,
    /// A refined minimum counts as a zero when `min_i |E_i| <= zero_tol`.
    pub zero_tol: f64,
    /// Bands with `|E_i(k̃)| <= band_tol` belong to the Dirac point.
    pub band_tol: f64,
    pub linearity_threshold: f64,
    /// Largest denominator accepted for `k̃_i / 2π`.
    pub max_denominator: i64,
    pub gap_threshold: f64,
    pub chi_tol: f64,
    pub max_seeds: usize,
    pub seed: u64,
}

impl Default for DiracOptions {
    fn default() -> Self {
        DiracOptions {
            resolution: None,
            zero_tol: 1e-8,
            band_tol: 1e-6,
            linearity_threshold: 0.1,
            max_denominator: 24,
            gap_threshold: 1e-2,
            chi_tol: 1e-6,
            max_seeds: 64,
            seed: 0x5eed,
        }
    }
}

const SCAN_BUDGET: usize = 1 << 27;
const SNAP_TOL: f64 = 1e-6;
const DEDUP_TOL: f64 = 1e-5;

impl DiracOptions {
    pub fn scan_resolution(&self, d: usize, r: usize) -> usize {
        if let Some(res) = self.resolution {
            return res.max(2);
        }
        let cost = |res: usize| (res as f64).powi(d as i32) * (r as f64).powi(3);
        let mut res = 64;
        while res > 4 && cost(res) > SCAN_BUDGET as f64 {
            res -= 2;
        }
        res
    }
}

/// `k̃_i / 2π = p / q` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rational {
    pub p: i64,
    pub q: i64,
}

impl Rational {
    fn snap(x: f64, max_q: i64) -> Option<Rational> {
        (1..=max_q).find_map(|q| {
            let p = (x * q as f64).round();
            ((x - p / q as f64).abs() <= SNAP_TOL).then(|| Rational { p: p as i64, q })
        })
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiracPoint {
    pub k: Momentum,
    /// `k̃_i / 2π` as fractions, when every component is rational.
    pub rational: Option<Vec<Rational>>,
    pub band_indices: Vec<usize>,
    /// Smallest sampled `|E_i(k̃ + δ)| / |δ|` at `|δ| = 1e-3`.
    pub linearity: f64,
    /// The same ratio at `|δ| = 1e-2`.
    pub linearity_coarse: f64,
    /// `χ_σ = <k̃,σ| P |k̃,σ>` for the kernel projector `P`.
    pub chi: Vec<f64>,
}

impl DiracPoint {
    pub fn multiplicity(&self) -> usize {
        self.band_indices.len()
    }

    /// Least common multiple of the denominators of `k̃ / 2π`.
    pub fn period(&self) -> Option<i64> {
        self.rational
            .as_ref()
            .map(|r| r.iter().fold(1, |acc, x| lcm(acc, x.q)))
    }

    /// Whether `k̃` is a momentum of the `l^d` grid.
    pub fn on_grid(&self, l: usize) -> bool {
        self.k.grid_coords(l, 1e-9).is_some()
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

/// Outcome of the Dirac-point search.
#[derive(Debug, Clone, Serialize)]
pub struct DiracSearch {
    /// Constant subtracted from every on-site energy so the Dirac energy is 0.
    pub energy_shift: f64,
    pub resolution: usize,
    pub points: Vec<DiracPoint>,
    #[serde(skip)]
    scan: Vec<Vec<f64>>,
}

impl DiracSearch {
    /// The spec with the recorded energy shift applied.
    pub fn shifted(&self, spec: &LatticeSpec) -> LatticeSpec {
        if self.energy_shift == 0.0 {
            spec.clone()
        } else {
            spec.with_energy_shift(self.energy_shift)
        }
    }

    /// `lcm` of all denominators, i.e. the period of `w ↦ e^{-ik̃·w}`.
    pub fn phase_period(&self) -> Option<i64> {
        self.points
            .iter()
            .map(|p| p.period())
            .try_fold(1, |acc, q| q.map(|q| lcm(acc, q)))
    }

    /// Total `χ_σ` summed over Dirac points.
    pub fn chi_total(&self, sigma: usize) -> f64 {
        self.points.iter().map(|p| p.chi[sigma]).sum()
    }

    /// Fails with [`Error::OffGrid`] unless every Dirac point is a grid momentum.
    pub fn check_grid(&self, l: usize) -> Result<()> {
        match self.points.iter().find(|p| !p.on_grid(l)) {
            Some(p) => Err(Error::OffGrid { k: p.k.k.clone(), l }),
            None => Ok(()),
        }
    }

    /// Rounds `l` up to the next size whose grid contains every Dirac point.
    pub fn compatible_size(&self, l: usize) -> usize {
        let q = self.phase_period().unwrap_or(1) as usize;
        l.div_ceil(q) * q
    }
}

/// Derivative-free minimiser used to refine scan seeds.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < 1e-14 || vals[n] - vals[0] <= 1e-32 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let x: Vec<f64> = simplex[i]
                        .iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| b + 0.5 * (a - b))
                        .collect();
                    vals[i] = f(&x);
                    simplex[i] = x;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (simplex[best].clone(), vals[best])
}

struct Scan {
    res: usize,
    d: usize,
    energies: Vec<Vec<f64>>,
}

impl Scan {
    fn run(kernel: &BlochKernel, d: usize, res: usize) -> Self {
        let total = res.pow(d as u32);
        let energies = (0..total)
            .into_par_iter()
            .map(|c| kernel.energies(&Self::point(c, d, res)))
            .collect();
        Scan { res, d, energies }
    }

    fn point(mut c: usize, d: usize, res: usize) -> Vec<f64> {
        (0..d)
            .map(|_| {
                let m = c % res;
                c /= res;
                2.0 * PI * m as f64 / res as f64
            })
            .collect()
    }

    fn neighbours(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let d = self.d;
        let res = self.res;
        let coords: Vec<usize> = (0..d).map(|i| (c / res.pow(i as u32)) % res).collect();
        (0..3usize.pow(d as u32)).filter_map(move |mut code| {
            let mut idx = 0;
            let mut stride = 1;
            let mut centre = true;
            for &x in &coords {
                let off = code % 3;
                code /= 3;
                centre &= off == 1;
                idx += ((x + res + off - 1) % res) * stride;
                stride *= res;
            }
            (!centre).then_some(idx)
        })
    }

    /// Periodic local minima of `score`, lowest first, at most `cap`.
    fn seeds(&self, score: &[f64], cap: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..score.len())
            .filter(|&c| self.neighbours(c).all(|u| score[c] <= score[u]))
            .collect();
        out.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
        out.truncate(cap);
        out
    }
}

fn min_abs(e: &[f64]) -> f64 {
    e.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
}

fn min_gap_adjacent(e: &[f64]) -> f64 {
    e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn periodic_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| canonical_angle(x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn snap_momentum(k: &[f64], max_q: i64) -> (Vec<f64>, Option<Vec<Rational>>) {
    let fr: Option<Vec<Rational>> = k
        .iter()
        .map(|&x| Rational::snap(canonical_angle(x) / (2.0 * PI), max_q))
        .collect();
    match fr {
        Some(r) => (r.iter().map(|q| canonical_angle(2.0 * PI * q.value())).collect(), Some(r)),
        None => (k.iter().map(|&x| canonical_angle(x)).collect(), None),
    }
}

/// Refines seeds of `objective` and returns the deduplicated minimisers with
/// objective value at most `tol`.
fn refine(
    scan: &Scan,
    score: &[f64],
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
    opts: &DiracOptions,
) -> (Vec<(Vec<f64>, Option<Vec<Rational>>)>, f64) {
    let step = PI / scan.res as f64;
    let seeds = scan.seeds(score, opts.max_seeds);
    let refined: Vec<(Vec<f64>, f64)> = seeds
        .par_iter()
        .map(|&c| {
            let x0 = Scan::point(c, scan.d, scan.res);
            if objective(&x0) == 0.0 {
                return (x0, 0.0);
            }
            let (x, v) = nelder_mead(|x| objective(x).powi(2), &x0, step, 4000 * scan.d);
            (x, v.sqrt())
        })
        .collect();
    let best = refined.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let mut out: Vec<(Vec<f64>, Option<Vec<Rational>>)> = Vec::new();
    for (x, v) in refined {
        let (snapped, rational) = snap_momentum(&x, opts.max_denominator);
        let (k, rational) = if rational.is_some() && objective(&snapped) <= v.max(opts.zero_tol) {
            (snapped, rational)
        } else {
            (x.iter().map(|&a| canonical_angle(a)).collect(), None)
        };
        if objective(&k) > opts.zero_tol {
            continue;
        }
        if out.iter().all(|(y, _)| periodic_distance(&k, y) > DEDUP_TOL) {
            out.push((k, rational));
        }
    }
    out.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    (out, best)
}

fn unit_rays(d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rays = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            rays.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while rays.len() < 2 * d + 8 {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            rays.push(v.iter().map(|x| x / n).collect());
        }
    }
    rays
}

fn linearity(kernel: &BlochKernel, k: &[f64], bands: &[usize], delta: f64, seed: u64) -> f64 {
    unit_rays(k.len(), seed)
        .iter()
        .map(|u| {
            let q: Vec<f64> = k.iter().zip(u).map(|(a, b)| a + delta * b).collect();
            let e = kernel.energies(&q);
            bands.iter().map(|&b| e[b].abs() / delta).fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

fn analyse_zeros(
    spec: &LatticeSpec,
    opts: &DiracOptions,
    res: usize,
) -> (Scan, Vec<(Vec<f64>, Option<Vec<Rational>>)>, f64) {
    let kernel = BlochKernel::new(spec);
    let scan = Scan::run(&kernel, spec.d, res);
    let score: Vec<f64> = scan.energies.iter().map(|e| min_abs(e)).collect();
    let objective = |k: &[f64]| min_abs(&kernel.energies(k));
    let (mut zeros, best) = refine(&scan, &score, &objective, opts);
    // A single band crossing zero is a Fermi surface, not a cone.
    zeros.retain(|(k, _)| {
        kernel
            .energies(k)
            .iter()
            .filter(|e| e.abs() <= opts.band_tol)
            .count()
            >= 2
    });
    (scan, zeros, best)
}

/// Locates the Dirac points of `spec`.
///
/// Zeros of the band energies are searched first. If none exist, touchings of
/// adjacent bands are located instead and the spectrum is shifted so that
/// their common energy becomes zero; the shift is recorded in the result and
/// must be applied (see [`DiracSearch::shifted`]) before further analysis.
pub fn find_dirac_points(spec: &LatticeSpec, opts: &DiracOptions) -> Result<DiracSearch> {
    let res = opts.scan_resolution(spec.d, spec.r);
    let (mut scan, mut zeros, mut best) = analyse_zeros(spec, opts, res);
    let mut shift = 0.0;
    let mut shifted = spec.clone();

    if zeros.is_empty() && spec.r > 1 {
        let kernel = BlochKernel::new(spec);
        let score: Vec<f64> = scan.energies.iter().map(|e| min_gap_adjacent(e)).collect();
        let objective = |k: &[f64]| min_gap_adjacent(&kernel.energies(k));
        let (touch, _) = refine(&scan, &score, &objective, opts);
        if let Some((k, _)) = touch.first() {
            let e = kernel.energies(k);
            let i = (0..e.len() - 1)
                .min_by(|&a, &b| (e[a + 1] - e[a]).total_cmp(&(e[b + 1] - e[b])))
                .unwrap();
            shift = 0.5 * (e[i] + e[i + 1]);
            shifted = spec.with_energy_shift(shift);
            (scan, zeros, best) = analyse_zeros(&shifted, opts, res);
        }
    }
    if zeros.is_empty() {
        return Err(Error::NoDiracPoint { min_gap: best });
    }

    let kernel = BlochKernel::new(&shifted);
    let mut points = Vec::with_capacity(zeros.len());
    for (k, rational) in zeros {
        let momentum = Momentum { k: k.clone() };
        let block = block_matrix(&shifted, &momentum);
        let bands: Vec<usize> = (0..spec.r)
            .filter(|&i| block.eigenvalues[i].abs() <= opts.band_tol)
            .collect();
        let fine = linearity(&kernel, &k, &bands, 1e-3, opts.seed);
        let coarse = linearity(&kernel, &k, &bands, 1e-2, opts.seed);
        if fine < opts.linearity_threshold {
            return Err(Error::QuadraticTouching {
                k,
                slope: fine,
                threshold: opts.linearity_threshold,
            });
        }
        let p = block.projector(&bands);
        points.push(DiracPoint {
            k: momentum,
            rational,
            chi: (0..spec.r).map(|s| p[(s, s)].re).collect(),
            band_indices: bands,
            linearity: fine,
            linearity_coarse: coarse,
        });
    }
    Ok(DiracSearch {
        energy_shift: shift,
        resolution: res,
        points,
        scan: scan.energies,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    pub evidence: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub dirac_count: usize,
    pub band_count: usize,
    pub energy_shift: f64,
    pub phase_period: Option<i64>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, index: usize) -> &AssumptionCheck {
        &self.checks[index - 1]
    }
}

/// Runs checks 1–5 on a completed search. `spec` is the unshifted input.
pub fn verify_assumptions(
    spec: &LatticeSpec,
    search: &DiracSearch,
    opts: &DiracOptions,
) -> AssumptionReport {
    let shifted = search.shifted(spec);
    let kernel = BlochKernel::new(&shifted);
    let pts = &search.points;
    let m = pts.first().map_or(0, |p| p.multiplicity());

    let worst_energy = pts
        .iter()
        .flat_map(|p| {
            let e = kernel.energies(&p.k.k);
            p.band_indices.iter().map(move |&b| e[b].abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let same_m = pts.iter().all(|p| p.multiplicity() == m);
    let c1 = AssumptionCheck {
        index: 1,
        name: "common Dirac energy",
        passed: worst_energy <= opts.zero_tol && same_m && m > 0,
        evidence: worst_energy,
        detail: format!(
            "max |E_i(k̃)| over Dirac bands after shift {:.6e}; multiplicities {:?}",
            search.energy_shift,
            pts.iter().map(|p| p.multiplicity()).collect::<Vec<_>>()
        ),
    };

    let res = search.resolution;
    let d = spec.d;
    let radius = 2.0 * 2.0 * PI / res as f64;
    let dirac_bands: Vec<usize> = {
        let mut b: Vec<usize> = pts.iter().flat_map(|p| p.band_indices.clone()).collect();
        b.sort_unstable();
        b.dedup();
        b
    };
    let (far_min, other_min) = search
        .scan
        .par_iter()
        .enumerate()
        .map(|(c, e)| {
            let k = Scan::point(c, d, res);
            let far = pts.iter().all(|p| periodic_distance(&k, &p.k.k) >= radius);
            let a = if far { min_abs(e) } else { f64::INFINITY };
            let b = (0..e.len())
                .filter(|i| !dirac_bands.contains(i))
                .map(|i| e[i].abs())
                .fold(f64::INFINITY, f64::min);
            (a, b)
        })
        .reduce(
            || (f64::INFINITY, f64::INFINITY),
            |x, y| (x.0.min(y.0), x.1.min(y.1)),
        );
    let c2 = AssumptionCheck {
        index: 2,
        name: "no other zeros",
        passed: far_min > opts.gap_threshold,
        evidence: far_min,
        detail: format!(
            "min_i |E_i| on the {res}^{d} scan farther than {radius:.3} from every Dirac point"
        ),
    };
    let c3 = AssumptionCheck {
        index: 3,
        name: "remaining bands gapped",
        passed: other_min > opts.gap_threshold,
        evidence: other_min,
        detail: format!("min |E_i| over the scan for bands outside {dirac_bands:?}"),
    };

    let residue = pts
        .iter()
        .map(|p| match &p.rational {
            Some(r) => p
                .k
                .k
                .iter()
                .zip(r)
                .map(|(k, q)| (canonical_angle(k - 2.0 * PI * q.value())).abs())
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    let period = search.phase_period();
    let c4 = AssumptionCheck {
        index: 4,
        name: "rational Dirac momenta",
        passed: period.is_some(),
        evidence: residue,
        detail: match period {
            Some(q) => format!("k̃/2π on the 1/{q} lattice (denominators <= {})", opts.max_denominator),
            None => format!("some k̃/2π has no denominator <= {}", opts.max_denominator),
        },
    };

    let min_chi = pts
        .iter()
        .flat_map(|p| p.chi.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let c5 = AssumptionCheck {
        index: 5,
        name: "positive chi weights",
        passed: min_chi > opts.chi_tol,
        evidence: min_chi,
        detail: "min over sites and Dirac points of χ_σ".into(),
    };

    AssumptionReport {
        checks: vec![c1, c2, c3, c4, c5],
        dirac_count: pts.len(),
        band_count: m,
        energy_shift: search.energy_shift,
        phase_period: period,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        build_decoupled_component, build_dirac_square, build_honeycomb, build_kagome,
        build_staggered_hypercubic, HoppingTable,
    };
    use crate::linalg::C64;

    fn has_point(s: &DiracSearch, k: [f64; 2]) -> bool {
        s.points
            .iter()
            .any(|p| periodic_distance(&p.k.k, &k) < 1e-6)
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, v) = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2), &[0.0, 0.0], 0.3, 5000);
        assert!((x[0] - 1.0).abs() < 1e-7 && (x[1] + 0.5).abs() < 1e-7);
        assert!(v < 1e-14);
    }

    #[test]
    fn rational_snapping() {
        assert_eq!(Rational::snap(1.0 / 3.0 + 1e-9, 24), Some(Rational { p: 1, q: 3 }));
        assert_eq!(Rational::snap(-0.25, 24), Some(Rational { p: -1, q: 4 }));
        assert_eq!(Rational::snap(0.1234567, 24), None);
    }

    #[test]
    fn staggered_single_point_at_origin() {
        for d in 1..=3 {
            let spec = build_staggered_hypercubic(d);
            let s = find_dirac_points(&spec, &DiracOptions::default()).unwrap();
            assert_eq!(s.points.len(), 1);
            let p = &s.points[0];
            assert!(p.k.k.iter().all(|&x| x == 0.0));
            assert_eq!(p.multiplicity(), 1 << d);
            assert!(p.chi.iter().all(|&c| (c - 1.0).abs() < 1e-12));
            let rep = verify_assumptions(&spec, &s, &DiracOptions::default());
            assert!(rep.all_passed(), "{rep:?}");
            assert_eq!(rep.band_count, 1 << d);
        }
    }

    #[test]
    fn honeycomb_two_points() {
        let spec = build_honeycomb();
        let s = find_dirac_points(&spec, &DiracOptions::default()).unwrap();
        assert_eq!(s.points.len(), 2);
        let t = 2.0 * PI / 3.0;
        assert!(has_point(&s, [t, t]) && has_point(&s, [-t, -t]));
        assert_eq!(s.phase_period(), Some(3));
        assert!(verify_assumptions(&spec, &s, &DiracOptions::default()).all_passed());
    }

    #[test]
    fn kagome_points_exclude_flat_band() {
        let spec = build_kagome();
        let s = find_dirac_points(&spec, &DiracOptions::default()).unwrap();
        assert_eq!(s.points.len(), 2);
        let t = 2.0 * PI / 3.0;
        assert!(has_point(&s, [t, -t]) && has_point(&s, [-t, t]));
        for p in &s.points {
            assert_eq!(p.band_indices, vec![1, 2]);
            let total: f64 = p.chi.iter().sum();
            assert!((total - 2.0).abs() < 1e-10);
        }
        let rep = verify_assumptions(&spec, &s, &DiracOptions::default());
        assert!(rep.all_passed(), "{rep:?}");
        assert!((rep.check(3).evidence - 3.0).abs() < 1e-9);
    }

    #[test]
    fn dirac_square_point_counts() {
        let s = find_dirac_points(&build_dirac_square(1.0, 1.0), &DiracOptions::default()).unwrap();
        assert_eq!(s.points.len(), 1);
        let s = find_dirac_points(&build_dirac_square(0.0, 1.0), &DiracOptions::default()).unwrap();
        assert_eq!(s.points.len(), 4);
        let s = find_dirac_points(&build_decoupled_component(), &DiracOptions::default()).unwrap();
        assert_eq!(s.points.len(), 2);
    }

    #[test]
    fn quadratic_touching_is_reported() {
        // E(k) = ±(2 - 2 cos k): a touching at k = 0 with zero slope.
        let mut t = HoppingTable::new();
        t.add(&[0], 0, 0, C64::new(2.0, 0.0));
        t.add(&[1], 0, 0, C64::new(-1.0, 0.0));
        t.add(&[-1], 0, 0, C64::new(-1.0, 0.0));
        t.add(&[0], 1, 1, C64::new(-2.0, 0.0));
        t.add(&[1], 1, 1, C64::new(1.0, 0.0));
        t.add(&[-1], 1, 1, C64::new(1.0, 0.0));
        let spec = LatticeSpec::new("quad", 1, 2, t, true).unwrap();
        let err = find_dirac_points(&spec, &DiracOptions::default()).unwrap_err();
        assert!(matches!(err, Error::QuadraticTouching { .. }), "{err}");
    }

    #[test]
    fn gapped_chain_has_no_dirac_point() {
        let mut t = HoppingTable::new();
        t.add(&[0], 0, 0, C64::new(1.0, 0.0));
        t.add(&[0], 1, 1, C64::new(-1.0, 0.0));
        t.add_pair(&[0], 0, 1, C64::new(0.5, 0.0));
        let spec = LatticeSpec::new("gapped", 1, 2, t, true).unwrap();
        assert!(matches!(
            find_dirac_points(&spec, &DiracOptions::default()),
            Err(Error::NoDiracPoint { .. })
        ));
    }

    #[test]
    fn shifted_dirac_energy_is_found() {
        let spec = build_honeycomb().with_energy_shift(-0.75);
        let s = find_dirac_points(&spec, &DiracOptions::default()).unwrap();
        assert!((s.energy_shift - 0.75).abs() < 1e-8);
        assert_eq!(s.points.len(), 2);
        assert!(verify_assumptions(&spec, &s, &DiracOptions::default()).all_passed());
    }

    #[test]
    fn grid_compatibility() {
        let s = find_dirac_points(&build_honeycomb(), &DiracOptions::default()).unwrap();
        assert!(s.check_grid(6).is_ok());
        assert!(matches!(s.check_grid(8), Err(Error::OffGrid { .. })));
        assert_eq!(s.compatible_size(16), 18);
    }
}
