//! Invariant suite: every check compares a fast path against an independent
//! dense computation, or tests an exact identity, on small instances.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bloch::{find_dirac_points, momentum_grid, BandStructure, BlochKernel, DiracOptions};
use crate::dynamics::{
    enumerate_starting_states, evolve, gamma_state, matching_start, prepare, run_search,
    search_hamiltonian, time_grid, OracleKind, Prepared, Propagator, PropagatorKind, SearchOptions,
    StateVector, SuccessRule,
};
use crate::error::Result;
use crate::lattice::{assemble_dense, builtin, AssembleOptions, LatticeSpec, Vertex};
use crate::linalg::{eigh, hermiticity_defect, solve_dense, vdot, C64, ZERO};
use crate::resolvent::{find_roots, predict_from_measure, SpectralMeasure};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest observed deviation.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, worst: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: worst.is_finite() && worst <= tolerance,
            worst,
            tolerance,
            detail: detail.into(),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            worst: if passed { 0.0 } else { 1.0 },
            tolerance: 0.0,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Check::flag(name, false, format!("error: {err}"))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for c in &self.checks {
            writeln!(
                out,
                "{} {} worst={:.3e} tol={:.1e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.worst,
                c.tolerance,
                c.detail
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub resolvent_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 7,
            resolvent_samples: 24,
        }
    }
}

/// Built-in lattices with sizes small enough for dense checks (`N ≤ 512`).
pub fn small_cases() -> Vec<(LatticeSpec, Vec<usize>)> {
    [
        ("staggered-hypercubic-1", vec![8, 16, 32, 64]),
        ("staggered-hypercubic-2", vec![4, 6, 8, 12, 16]),
        ("staggered-hypercubic-3", vec![4]),
        ("honeycomb", vec![3, 6, 9, 12]),
        ("kagome", vec![3, 6, 9, 12]),
        ("dirac-square", vec![4, 6, 8, 12]),
        ("decoupled-square", vec![4, 6, 8]),
    ]
    .into_iter()
    .map(|(name, ls)| (builtin(name).expect("built-in lattice"), ls))
    .collect()
}

fn dense_h0(spec: &LatticeSpec, l: usize) -> Result<DMatrix<C64>> {
    assemble_dense(spec, l, AssembleOptions::summing())
}

/// `<w|(γH0 - E)^{-1}|w>` by a dense LU solve.
pub fn dense_resolvent(spec: &LatticeSpec, l: usize, marked: &Vertex, e: f64, gamma: f64) -> Result<f64> {
    let g = spec.geometry(l);
    let w = marked.flat(&g);
    let mut m = dense_h0(spec, l)? * C64::new(gamma, 0.0);
    for i in 0..g.sites() {
        m[(i, i)] -= C64::new(e, 0.0);
    }
    let mut b = DVector::from_element(g.sites(), ZERO);
    b[w] = C64::new(1.0, 0.0);
    let x = solve_dense(&m, &b).ok_or_else(|| {
        crate::Error::Unsupported(format!("singular resolvent at E = {e}"))
    })?;
    Ok(x[w].re)
}

/// Random `(lattice, l, w, γ, E)` instances; `F` against a dense solve.
pub fn resolvent_equivalence(opts: &VerifyOptions) -> Check {
    let name = "resolvent_vs_dense";
    let cases = small_cases();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut attempts = 0;
    while done < opts.resolvent_samples && attempts < 20 * opts.resolvent_samples.max(1) {
        attempts += 1;
        let (spec, ls) = &cases[done % cases.len()];
        let l = ls[rng.gen_range(0..ls.len())];
        let g = spec.geometry(l);
        let cell: Vec<usize> = (0..spec.d).map(|_| rng.gen_range(0..l)).collect();
        let marked = Vertex::new(cell, rng.gen_range(0..spec.r));
        let gamma = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.7..1.3) };
        let e: f64 = rng.gen_range(-4.0..4.0);
        let bands = BandStructure::compute(spec, l);
        let gap = bands
            .bands
            .iter()
            .flatten()
            .map(|&x| (gamma * x - e).abs())
            .fold(f64::INFINITY, f64::min);
        if gap < 0.05 || e.abs() < 0.05 || g.sites() > 512 {
            continue;
        }
        let fast = SpectralMeasure::new(spec, l, &marked).and_then(|mu| mu.f(e, gamma));
        let slow = dense_resolvent(spec, l, &marked, e, gamma);
        match (fast, slow) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b).abs() / b.abs().max(1.0)),
            (Err(err), _) | (_, Err(err)) => return Check::failed(name, err),
        }
        done += 1;
    }
    Check::new(name, worst, 1e-10, format!("{done} random instances, relative error"))
}

/// Conjugating the dense `H0` by the plane-wave basis gives the direct sum
/// of Bloch blocks; everything off the blocks vanishes.
pub fn block_structure(spec: &LatticeSpec, l: usize) -> Check {
    let name = format!("block_structure[{} l={l}]", spec.name);
    let h = match dense_h0(spec, l) {
        Ok(h) => h,
        Err(e) => return Check::failed(name, e),
    };
    let g = spec.geometry(l);
    let (n, r) = (g.cells(), spec.r);
    let momenta = momentum_grid(spec.d, l);
    let norm = 1.0 / (n as f64).sqrt();
    let u = DMatrix::from_fn(g.sites(), g.sites(), |row, col| {
        let (x, s) = g.unflat(row);
        let (p, sigma) = (col / r, col % r);
        if s != sigma {
            return ZERO;
        }
        let x: Vec<i64> = x.iter().map(|&c| c as i64).collect();
        C64::from_polar(norm, momenta[p].dot(&x))
    });
    let t = u.adjoint() * h * &u;
    let kernel = BlochKernel::new(spec);
    let mut worst = 0.0f64;
    for (p, k) in momenta.iter().enumerate() {
        let a = kernel.operator(&k.k);
        for s1 in 0..r {
            for s2 in 0..r {
                worst = worst.max((t[(p * r + s1, p * r + s2)] - a[(s1, s2)]).norm());
            }
        }
    }
    for i in 0..g.sites() {
        for j in 0..g.sites() {
            if i / r != j / r {
                worst = worst.max(t[(i, j)].norm());
            }
        }
    }
    Check::new(name, worst, 1e-10, format!("N = {}", g.sites()))
}

/// `H0(k)^2 = E(k)^2 I` with each of `±E` of multiplicity `2^{d-1}`.
pub fn staggered_square(d: usize, samples: usize, seed: u64) -> Check {
    let name = format!("staggered_square[d={d}]");
    let spec = crate::lattice::build_staggered_hypercubic(d);
    let kernel = BlochKernel::new(&spec);
    let r = spec.r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut bad_mult = 0;
    for _ in 0..samples {
        let k: Vec<f64> = (0..d).map(|_| rng.gen_range(-PI..PI)).collect();
        let a = kernel.operator(&k);
        let sq = &a * &a;
        let e2 = sq[(0, 0)].re;
        let diff = sq - DMatrix::from_diagonal_element(r, r, C64::new(e2, 0.0));
        worst = worst.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
        let e = e2.sqrt();
        let ev = eigh(&a).values;
        let plus = ev.iter().filter(|&&x| (x - e).abs() < 1e-9).count();
        let minus = ev.iter().filter(|&&x| (x + e).abs() < 1e-9).count();
        if e > 1e-6 && (plus != r / 2 || minus != r / 2) {
            bad_mult += 1;
        }
    }
    if bad_mult > 0 {
        return Check::flag(name, false, format!("{bad_mult} momenta with wrong multiplicity"));
    }
    Check::new(name, worst, 1e-12, format!("{samples} random momenta, multiplicity {}", r / 2))
}

/// Case-auto instance marked at the origin on the site with the largest
/// kernel weight; `l` is rounded up to a multiple of the phase period.
pub fn prepare_small(spec: &LatticeSpec, l: usize) -> Result<Prepared> {
    let opts = DiracOptions::default();
    let search = find_dirac_points(spec, &opts)?;
    let l = search.compatible_size(l);
    // Mark the site with the largest kernel weight so a starting state exists.
    let alpha = (0..spec.r)
        .max_by(|&a, &b| search.chi_total(a).total_cmp(&search.chi_total(b)))
        .unwrap_or(0);
    prepare(spec, l, Vertex::origin(spec.d, alpha), None, 1.0, &opts)
}

/// Both roots of the eigenvalue condition against the dense spectrum of
/// `H`, and `H|w> = 0` for the projector oracle.
pub fn roots_are_eigenvalues(spec: &LatticeSpec, l: usize) -> Vec<Check> {
    let base = format!("{} l={l}", spec.name);
    let run = || -> Result<Vec<Check>> {
        let p = prepare_small(spec, l)?;
        let inst = &p.instance;
        let base = format!("{} l={}", spec.name, inst.l);
        let mu = SpectralMeasure::new(&inst.spec, inst.l, &inst.marked)?;
        let (em, ep) = find_roots(&mu, &inst.oracle, inst.gamma)?;
        let h = search_hamiltonian(inst)?.to_dense();
        let ev = eigh(&h).values;
        let dist = |x: f64| ev.iter().map(|&y| (y - x).abs()).fold(f64::INFINITY, f64::min);
        let worst = dist(em).max(dist(ep));
        let mut out = vec![Check::new(
            format!("roots_are_eigenvalues[{base}]"),
            worst,
            1e-9,
            format!("oracle {}, E- = {em:.6e}, E+ = {ep:.6e}", inst.oracle.label()),
        )];
        if inst.oracle == OracleKind::BipartiteProjector {
            let w = inst.marked_index();
            let col = h.column(w).iter().map(|z| z.norm()).fold(0.0, f64::max);
            out.push(Check::new(format!("marked_vertex_decoupled[{base}]"), col, 1e-14, "max |H|w>|"));
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![Check::failed(format!("roots_are_eigenvalues[{base}]"), e)])
}

/// Dense and Krylov propagation agree, conserve the norm and the energy.
pub fn propagation_hygiene(spec: &LatticeSpec, l: usize, points: usize) -> Vec<Check> {
    let base = format!("{} l={l}", spec.name);
    let run = || -> Result<Vec<Check>> {
        let p = prepare_small(spec, l)?;
        let inst = &p.instance;
        let base = format!("{} l={}", spec.name, inst.l);
        let mu = SpectralMeasure::new(&inst.spec, inst.l, &inst.marked)?;
        let pred = predict_from_measure(&inst.spec.name, &mu, &inst.oracle, inst.gamma)?;
        let times = time_grid(2.0 * pred.run_time, points);
        let h = search_hamiltonian(inst)?;
        let starts = enumerate_starting_states(&inst.spec, inst.l, &inst.diracs, usize::MAX)?;
        let start = &starts[matching_start(&starts, &inst.marked, &inst.diracs).unwrap_or(0)].state;
        let target = match inst.oracle {
            OracleKind::BipartiteProjector => gamma_state(inst)?,
            OracleKind::OnSitePotential { .. } => StateVector::basis(h.dim(), inst.marked_index()),
        };
        let rule = SuccessRule::for_instance(inst);
        let tk = inst.oracle.target();
        let dense = evolve(&Propagator::new(&h, PropagatorKind::Dense), start, &times, (&target, tk), &rule)?;
        let krylov = evolve(&Propagator::new(&h, PropagatorKind::Krylov), start, &times, (&target, tk), &rule)?;
        let agree = dense
            .overlap_sq
            .iter()
            .zip(&krylov.overlap_sq)
            .chain(dense.success_prob.iter().zip(&krylov.success_prob))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(vec![
            Check::new(format!("dense_vs_krylov[{base}]"), agree, 1e-7, format!("N = {}", h.dim())),
            Check::new(
                format!("unitarity[{base}]"),
                dense.max_norm_drift().max(krylov.max_norm_drift()),
                1e-9,
                "max |‖ψ(t)‖ - 1| over both paths",
            ),
            Check::new(
                format!("energy_conservation[{base}]"),
                dense.energy_drift().max(krylov.energy_drift()),
                1e-8,
                "max |<H>(t) - <H>(0)|",
            ),
        ])
    };
    run().unwrap_or_else(|e| vec![Check::failed(format!("propagation[{base}]"), e)])
}

/// Success curves do not depend on which cell is marked.
pub fn translation_symmetry(spec: &LatticeSpec, l: usize) -> Check {
    let name = format!("translation_symmetry[{} l={l}]", spec.name);
    let run = || -> Result<Check> {
        let p = prepare_small(spec, l)?;
        let inst = p.instance;
        let mut other = inst.clone();
        other.marked.cell = (0..spec.d).map(|i| (2 * i + 1) % inst.l).collect();
        let opts = SearchOptions {
            points: 60,
            ..SearchOptions::default()
        };
        let a = run_search(&inst, &opts)?;
        let b = run_search(&other, &opts)?;
        let worst = a
            .trace
            .success_prob
            .iter()
            .zip(&b.trace.success_prob)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        Ok(Check::new(name.clone(), worst, 1e-9, format!("cells {:?} vs {:?}", inst.marked.cell, other.marked.cell)))
    };
    run().unwrap_or_else(|e| Check::failed(name.clone(), e))
}

/// Weight of the matching starting state outside the span of the two
/// eigenvectors at `E±`; it is conserved, so one number covers all times.
pub fn two_level_leakage(spec: &LatticeSpec, l: usize) -> Result<f64> {
    let p = prepare_small(spec, l)?;
    let inst = &p.instance;
    let mu = SpectralMeasure::new(&inst.spec, inst.l, &inst.marked)?;
    let (em, ep) = find_roots(&mu, &inst.oracle, inst.gamma)?;
    let h = search_hamiltonian(inst)?.to_dense();
    let eig = eigh(&h);
    let starts = enumerate_starting_states(&inst.spec, inst.l, &inst.diracs, usize::MAX)?;
    let s = &starts[matching_start(&starts, &inst.marked, &inst.diracs).unwrap_or(0)].state;
    let mut inside = 0.0;
    for (j, &lam) in eig.values.iter().enumerate() {
        if (lam - em).abs() < 1e-8 || (lam - ep).abs() < 1e-8 {
            let v: Vec<C64> = eig.vectors.column(j).iter().copied().collect();
            inside += vdot(&v, &s.amplitudes).norm_sqr();
        }
    }
    Ok(1.0 - inside)
}

pub fn two_level_reduction(spec: &LatticeSpec, l: usize) -> Check {
    let name = format!("two_level_reduction[{} l={l}]", spec.name);
    match two_level_leakage(spec, l) {
        Ok(x) => Check::new(name, x, 0.1, "starting-state weight outside span{ψ-, ψ+}"),
        Err(e) => Check::failed(name, e),
    }
}

/// Dirac points of the reference lattices.
pub fn dirac_detection() -> Vec<Check> {
    let opts = DiracOptions::default();
    let t = 2.0 * PI / 3.0;
    let close = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .all(|(x, y)| crate::bloch::canonical_angle(x - y).abs() < 1e-6)
    };
    let expect: Vec<(&str, Vec<Vec<f64>>)> = vec![
        ("staggered-hypercubic-1", vec![vec![0.0]]),
        ("staggered-hypercubic-2", vec![vec![0.0, 0.0]]),
        ("staggered-hypercubic-3", vec![vec![0.0; 3]]),
        ("staggered-hypercubic-4", vec![vec![0.0; 4]]),
        ("honeycomb", vec![vec![t, t], vec![-t, -t]]),
        ("kagome", vec![vec![t, -t], vec![-t, t]]),
    ];
    expect
        .into_iter()
        .map(|(name, want)| {
            let check = format!("dirac_points[{name}]");
            let spec = builtin(name).expect("built-in lattice");
            let s = match find_dirac_points(&spec, &opts) {
                Ok(s) => s,
                Err(e) => return Check::failed(check, e),
            };
            let found: Vec<Vec<f64>> = s.points.iter().map(|p| p.k.k.clone()).collect();
            let matched = found.len() == want.len()
                && want.iter().all(|w| found.iter().any(|f| close(f, w)));
            let report = crate::bloch::verify_assumptions(&spec, &s, &opts);
            let mut ok = matched && report.all_passed();
            let mut detail = format!("found {found:.4?}");
            if name == "kagome" {
                // The flat band (index 0, E = -3) must not be a Dirac band.
                let flat_excluded = s.points.iter().all(|p| !p.band_indices.contains(&0));
                ok &= flat_excluded && report.check(3).passed;
                detail += &format!(", bands {:?}", s.points.first().map(|p| &p.band_indices));
            }
            Check::flag(check, ok, detail)
        })
        .collect()
}

pub fn hermiticity(spec: &LatticeSpec, l: usize) -> Check {
    let name = format!("hermiticity[{} l={l}]", spec.name);
    match prepare_small(spec, l).and_then(|p| search_hamiltonian(&p.instance)) {
        Ok(h) => Check::new(name, hermiticity_defect(&h.to_dense()), 1e-14, "‖H - H†‖ max entry"),
        Err(e) => Check::failed(name, e),
    }
}

/// The whole suite, as run by `diracwalk verify`.
pub fn run_suite(opts: &VerifyOptions) -> VerifyReport {
    let mut checks = vec![resolvent_equivalence(opts)];
    for (spec, ls) in small_cases() {
        let l = ls[0].max(4);
        checks.push(block_structure(&spec, l));
        checks.push(hermiticity(&spec, l));
        checks.extend(roots_are_eigenvalues(&spec, l));
    }
    for d in 1..=4 {
        checks.push(staggered_square(d, 16, opts.seed ^ d as u64));
    }
    for name in ["staggered-hypercubic-2", "honeycomb", "kagome"] {
        let spec = builtin(name).expect("built-in lattice");
        checks.extend(propagation_hygiene(&spec, 6, 40));
        checks.push(translation_symmetry(&spec, 6));
    }
    checks.push(two_level_reduction(&builtin("staggered-hypercubic-3").expect("built-in"), 4));
    checks.extend(dirac_detection());
    VerifyReport { checks }
}
