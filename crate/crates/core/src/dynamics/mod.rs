//! Search Hamiltonians, starting states, time evolution and measurement.

mod propagate;
mod search;

pub use propagate::{
    evolve, EvolutionTrace, Propagator, PropagatorKind, TargetKind, DENSE_BUDGET, TRACE_HEADER,
};
pub use search::{run_search, simulate_matching, time_grid, RunSummary, SearchOptions, SearchReport};

use std::f64::consts::PI;

use serde::Serialize;

use crate::bloch::{
    block_matrix, find_dirac_points, verify_assumptions, AssumptionReport, DiracOptions, DiracPoint,
    DiracSearch,
};
use crate::error::{Error, Result};
use crate::lattice::{assemble_sparse, neighbors, AssembleOptions, Geometry, LatticeSpec, Vertex};
use crate::linalg::{norm, vdot, SparseOperator, C64, ZERO};
use crate::resolvent::SpectralMeasure;

/// The marking term added to `γH0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    /// `-(H0|w><w| + |w><w|H0)`, for lattices whose first moment vanishes.
    BipartiteProjector,
    /// `-(1/I1)|w><w|`.
    OnSitePotential { i1: f64 },
}

/// `|I1|` below this selects the projector oracle.
pub const AUTO_CASE_TOL: f64 = 1e-6;

impl OracleKind {
    pub fn auto(i1: f64) -> Self {
        if i1.abs() < AUTO_CASE_TOL {
            OracleKind::BipartiteProjector
        } else {
            OracleKind::OnSitePotential { i1 }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OracleKind::BipartiteProjector => "projector",
            OracleKind::OnSitePotential { .. } => "onsite",
        }
    }

    pub fn target(&self) -> TargetKind {
        match self {
            OracleKind::BipartiteProjector => TargetKind::Gamma,
            OracleKind::OnSitePotential { .. } => TargetKind::MarkedVertex,
        }
    }
}

/// A normalised (or nearly so) state on the `N` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        StateVector {
            amplitudes: vec![ZERO; n],
        }
    }

    pub fn basis(n: usize, v: usize) -> Self {
        let mut s = Self::zeros(n);
        s.amplitudes[v] = C64::new(1.0, 0.0);
        s
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        vdot(&self.amplitudes, &other.amplitudes)
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        for a in &mut self.amplitudes {
            *a /= n;
        }
        self
    }
}

/// Everything needed to run one search.
#[derive(Debug, Clone)]
pub struct SearchInstance {
    /// The lattice with its Dirac energy already shifted to zero.
    pub spec: LatticeSpec,
    pub l: usize,
    pub marked: Vertex,
    pub oracle: OracleKind,
    pub gamma: f64,
    pub diracs: Vec<DiracPoint>,
}

impl SearchInstance {
    pub fn new(
        spec: LatticeSpec,
        l: usize,
        marked: Vertex,
        oracle: OracleKind,
        gamma: f64,
        diracs: Vec<DiracPoint>,
    ) -> Result<Self> {
        marked.validate(&spec.geometry(l))?;
        if let OracleKind::OnSitePotential { i1 } = oracle {
            if !(i1.is_finite() && i1 != 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "on-site oracle needs a finite nonzero I1, got {i1}"
                )));
            }
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
        }
        Ok(SearchInstance {
            spec,
            l,
            marked,
            oracle,
            gamma,
            diracs,
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.spec.geometry(self.l)
    }

    pub fn marked_index(&self) -> usize {
        self.marked.flat(&self.geometry())
    }

    pub fn h0(&self) -> Result<SparseOperator> {
        assemble_sparse(&self.spec, self.l, AssembleOptions::default())
    }
}

fn h0_column(h0: &SparseOperator, w: usize) -> Vec<(usize, C64)> {
    // Hermitian: column w is the conjugate of row w.
    h0.row(w).map(|(u, v)| (u, v.conj())).collect()
}

/// The oracle term alone, as a sparse Hermitian operator.
pub fn oracle_hamiltonian(inst: &SearchInstance) -> Result<SparseOperator> {
    let h0 = inst.h0()?;
    let n = h0.dim();
    let w = inst.marked_index();
    let triplets = match inst.oracle {
        OracleKind::BipartiteProjector => {
            let mut t = Vec::new();
            for (u, a) in h0_column(&h0, w) {
                // -H0|w><w| contributes at (u, w); -|w><w|H0 at (w, u).
                t.push((u, w, -a));
                t.push((w, u, -a.conj()));
            }
            t
        }
        OracleKind::OnSitePotential { i1 } => vec![(w, w, C64::new(-1.0 / i1, 0.0))],
    };
    Ok(SparseOperator::from_triplets(n, triplets))
}

/// `H = γH0 + H_oracle`.
pub fn search_hamiltonian(inst: &SearchInstance) -> Result<SparseOperator> {
    let h0 = inst.h0()?;
    let oracle = oracle_hamiltonian(inst)?;
    let n = h0.dim();
    let mut t: Vec<(usize, usize, C64)> = Vec::with_capacity(h0.nnz() + oracle.nnz());
    for i in 0..n {
        t.extend(h0.row(i).map(|(j, v)| (i, j, v * inst.gamma)));
        t.extend(oracle.row(i).map(|(j, v)| (i, j, v)));
    }
    Ok(SparseOperator::from_triplets(n, t))
}

/// `|Γ> = H0|w,α> / ||H0|w,α>||`.
pub fn gamma_state(inst: &SearchInstance) -> Result<StateVector> {
    let h0 = inst.h0()?;
    let w = inst.marked_index();
    let mut s = StateVector::zeros(h0.dim());
    for (u, a) in h0_column(&h0, w) {
        s.amplitudes[u] = a;
    }
    if s.norm() == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "marked vertex {} is isolated; |Γ> is the zero vector",
            w
        )));
    }
    Ok(s.normalized())
}

/// Measurement rule: measure in the vertex basis, then guess the measured
/// vertex's neighbour uniformly at random (a direct hit on the marked vertex
/// counts as success).
#[derive(Debug, Clone)]
pub struct SuccessRule {
    marked: usize,
    neighbours: Vec<(usize, f64)>,
}

impl SuccessRule {
    pub fn new(spec: &LatticeSpec, l: usize, marked: usize) -> Self {
        let neighbours = neighbors(spec, l, marked)
            .neighbors
            .into_iter()
            .map(|(u, _)| (u, 1.0 / neighbors(spec, l, u).degree() as f64))
            .collect();
        SuccessRule { marked, neighbours }
    }

    pub fn for_instance(inst: &SearchInstance) -> Self {
        Self::new(&inst.spec, inst.l, inst.marked_index())
    }

    pub fn probability(&self, psi: &[C64]) -> f64 {
        psi[self.marked].norm_sqr()
            + self
                .neighbours
                .iter()
                .map(|&(u, inv_deg)| psi[u].norm_sqr() * inv_deg)
                .sum::<f64>()
    }

    pub fn marked(&self) -> usize {
        self.marked
    }

    pub fn neighbours(&self) -> impl Iterator<Item = usize> + '_ {
        self.neighbours.iter().map(|e| e.0)
    }
}

pub fn success_probability(psi: &StateVector, inst: &SearchInstance) -> f64 {
    SuccessRule::for_instance(inst).probability(&psi.amplitudes)
}

/// One candidate starting state.
#[derive(Debug, Clone)]
pub struct StartingState {
    pub alpha: usize,
    /// Cell `w` modulo the phase period whose phases this state carries.
    pub residue: Vec<usize>,
    pub state: StateVector,
}

pub const DEFAULT_ENUMERATION_CAP: usize = 256;
const DEDUP_FIDELITY: f64 = 1.0 - 1e-10;

/// Enumerates the kernel starting states
/// `χ_α^{-1/2} Σ_j e^{-ik̃_j·w} P_j|k̃_j, α>` over every site `α` and every
/// residue of `w` modulo the phase period, merging states equal up to a
/// global phase.
pub fn enumerate_starting_states(
    spec: &LatticeSpec,
    l: usize,
    diracs: &[DiracPoint],
    cap: usize,
) -> Result<Vec<StartingState>> {
    if diracs.is_empty() {
        return Err(Error::InvalidConfig("no Dirac points to build starting states from".into()));
    }
    if let Some(p) = diracs.iter().find(|p| !p.on_grid(l)) {
        return Err(Error::OffGrid { k: p.k.k.clone(), l });
    }
    let period = diracs
        .iter()
        .map(|p| p.period())
        .try_fold(1i64, |acc, q| q.map(|q| crate::bloch::lcm(acc, q)))
        .ok_or_else(|| {
            Error::Unsupported("irrational Dirac momenta: phase residues are not finite".into())
        })? as usize;
    let g = spec.geometry(l);
    let d = spec.d;
    let chi: Vec<f64> = (0..spec.r)
        .map(|s| diracs.iter().map(|p| p.chi[s]).sum())
        .collect();
    let alphas: Vec<usize> = (0..spec.r).filter(|&s| chi[s] > 1e-12).collect();
    let residues = period.pow(d as u32);
    let count = alphas.len() * residues;
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }

    let projectors: Vec<_> = diracs
        .iter()
        .map(|p| block_matrix(spec, &p.k).projector(&p.band_indices))
        .collect();
    let scale = 1.0 / (g.cells() as f64).sqrt();
    let mut out: Vec<StartingState> = Vec::new();
    for &alpha in &alphas {
        for code in 0..residues {
            let w: Vec<usize> = (0..d)
                .map(|i| (code / period.pow(i as u32)) % period)
                .collect();
            let mut s = StateVector::zeros(g.sites());
            for c in 0..g.cells() {
                let x = g.cell_of_index(c);
                for (p, proj) in diracs.iter().zip(&projectors) {
                    let theta: f64 = p
                        .k
                        .k
                        .iter()
                        .zip(x.iter().zip(&w))
                        .map(|(k, (&xi, &wi))| k * (xi as f64 - wi as f64))
                        .sum();
                    let ph = C64::from_polar(scale / chi[alpha].sqrt(), theta);
                    for sp in 0..spec.r {
                        s.amplitudes[sp + spec.r * c] += ph * proj[(sp, alpha)];
                    }
                }
            }
            let nrm = s.norm();
            if (nrm - 1.0).abs() > 1e-6 {
                return Err(Error::Unsupported(format!(
                    "starting state for α={alpha} has norm {nrm}; Dirac projectors overlap"
                )));
            }
            let s = s.normalized();
            if out
                .iter()
                .all(|o| o.state.inner(&s).norm_sqr() <= DEDUP_FIDELITY)
            {
                out.push(StartingState {
                    alpha,
                    residue: w,
                    state: s,
                });
            }
        }
    }
    Ok(out)
}

/// Index of the enumerated state carrying the phases of `marked`, if any.
pub fn matching_start(states: &[StartingState], marked: &Vertex, diracs: &[DiracPoint]) -> Option<usize> {
    let period = diracs
        .iter()
        .map(|p| p.period())
        .try_fold(1i64, |acc, q| q.map(|q| crate::bloch::lcm(acc, q)))? as usize;
    let w: Vec<usize> = marked.cell.iter().map(|&x| x % period).collect();
    // Deduplication may have merged the exact residue into an earlier state.
    states
        .iter()
        .position(|s| s.alpha == marked.alpha && s.residue == w)
        .or_else(|| {
            let target_phase: Vec<f64> = diracs
                .iter()
                .map(|p| p.k.dot(&w.iter().map(|&x| x as i64).collect::<Vec<_>>()))
                .collect();
            states.iter().position(|s| {
                s.alpha == marked.alpha
                    && diracs.iter().zip(&target_phase).all(|(p, t)| {
                        let own = p.k.dot(&s.residue.iter().map(|&x| x as i64).collect::<Vec<_>>());
                        let diff = (own - t).rem_euclid(2.0 * PI);
                        diff < 1e-9 || 2.0 * PI - diff < 1e-9
                    })
            })
        })
}

/// A search instance built from an unshifted lattice: Dirac points are
/// located, the Dirac energy is shifted to zero and the assumptions checked.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub instance: SearchInstance,
    pub search: DiracSearch,
    pub assumptions: AssumptionReport,
}

/// `oracle = None` picks the case from the finite-size first moment
/// `<w|H0^+|w>`, which also serves as `I1` for the on-site oracle.
pub fn prepare(
    spec: &LatticeSpec,
    l: usize,
    marked: Vertex,
    oracle: Option<OracleKind>,
    gamma: f64,
    opts: &DiracOptions,
) -> Result<Prepared> {
    let search = find_dirac_points(spec, opts)?;
    prepare_with(spec, search, l, marked, oracle, gamma, opts)
}

/// [`prepare`] with the Dirac search already done.
pub fn prepare_with(
    spec: &LatticeSpec,
    search: DiracSearch,
    l: usize,
    marked: Vertex,
    oracle: Option<OracleKind>,
    gamma: f64,
    opts: &DiracOptions,
) -> Result<Prepared> {
    if l == 0 {
        return Err(Error::InvalidConfig("l must be at least 1".into()));
    }
    let assumptions = verify_assumptions(spec, &search, opts);
    if let Some(c) = assumptions.checks.iter().find(|c| !c.passed) {
        return Err(Error::InvalidSpec(format!(
            "assumption {} ({}) fails: {}",
            c.index, c.name, c.detail
        )));
    }
    search.check_grid(l)?;
    let shifted = search.shifted(spec);
    let oracle = match oracle {
        Some(o) => o,
        None => {
            let mu = SpectralMeasure::new(&shifted, l, &marked)?;
            OracleKind::auto(mu.moment(1))
        }
    };
    let instance = SearchInstance::new(shifted, l, marked, oracle, gamma, search.points.clone())?;
    Ok(Prepared {
        instance,
        search,
        assumptions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{find_dirac_points, DiracOptions};
    use crate::lattice::{assemble_dense, build_honeycomb, build_kagome, build_staggered_hypercubic};

    fn instance(spec: LatticeSpec, l: usize, marked: Vertex, oracle: OracleKind) -> SearchInstance {
        let diracs = find_dirac_points(&spec, &DiracOptions::default()).unwrap().points;
        SearchInstance::new(spec, l, marked, oracle, 1.0, diracs).unwrap()
    }

    #[test]
    fn projector_oracle_decouples_marked_vertex() {
        let inst = instance(
            build_staggered_hypercubic(2),
            4,
            Vertex::new([1, 2], 3),
            OracleKind::BipartiteProjector,
        );
        let h = search_hamiltonian(&inst).unwrap();
        let w = inst.marked_index();
        assert_eq!(h.row(w).count(), 0);
        for u in 0..h.dim() {
            assert_eq!(h.get(u, w), ZERO);
        }
    }

    #[test]
    fn projector_oracle_matches_hand_assembly() {
        let inst = instance(
            build_staggered_hypercubic(2),
            4,
            Vertex::origin(2, 0),
            OracleKind::BipartiteProjector,
        );
        let h0 = assemble_dense(&inst.spec, 4, AssembleOptions::default()).unwrap();
        let n = h0.nrows();
        let w = inst.marked_index();
        let mut p = nalgebra::DMatrix::from_element(n, n, ZERO);
        p[(w, w)] = C64::new(1.0, 0.0);
        let want = &h0 - &h0 * &p - &p * &h0;
        let got = search_hamiltonian(&inst).unwrap().to_dense();
        assert!((got - &want).norm() < 1e-14);
        for (u, _) in neighbors(&inst.spec, 4, w).neighbors {
            assert_eq!(want[(u, u)], ZERO);
        }
    }

    #[test]
    fn onsite_oracle_single_entry() {
        let spec = build_kagome();
        let inst = instance(spec, 6, Vertex::origin(2, 1), OracleKind::OnSitePotential { i1: -4.39 });
        let o = oracle_hamiltonian(&inst).unwrap();
        assert_eq!(o.nnz(), 1);
        let w = inst.marked_index();
        assert!((o.get(w, w).re - 1.0 / 4.39).abs() < 1e-15);
        assert!(SearchInstance::new(
            build_kagome(),
            6,
            Vertex::origin(2, 0),
            OracleKind::OnSitePotential { i1: 0.0 },
            1.0,
            vec![]
        )
        .is_err());
    }

    #[test]
    fn gamma_state_supports() {
        let inst = instance(build_staggered_hypercubic(2), 4, Vertex::origin(2, 0), OracleKind::BipartiteProjector);
        let g = gamma_state(&inst).unwrap();
        let nz: Vec<f64> = g.amplitudes.iter().filter(|a| a.norm() > 0.0).map(|a| a.norm()).collect();
        assert_eq!(nz.len(), 4);
        assert!(nz.iter().all(|a| (a - 0.5).abs() < 1e-15));

        let inst = instance(build_honeycomb(), 6, Vertex::origin(2, 1), OracleKind::BipartiteProjector);
        let g = gamma_state(&inst).unwrap();
        let nz: Vec<f64> = g.amplitudes.iter().filter(|a| a.norm() > 0.0).map(|a| a.norm()).collect();
        assert_eq!(nz.len(), 3);
        assert!(nz.iter().all(|a| (a - 1.0 / 3f64.sqrt()).abs() < 1e-15));

        // Kagome: the on-site term makes H0|w> include |w> itself.
        let inst = instance(build_kagome(), 6, Vertex::origin(2, 0), OracleKind::OnSitePotential { i1: -1.0 / 9.0 });
        let g = gamma_state(&inst).unwrap();
        let w = inst.marked_index();
        assert!((g.amplitudes[w].re + 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(g.amplitudes.iter().filter(|a| a.norm() > 0.0).count(), 5);
    }

    #[test]
    fn success_rule_examples() {
        let inst = instance(build_staggered_hypercubic(2), 4, Vertex::origin(2, 0), OracleKind::BipartiteProjector);
        let n = inst.geometry().sites();
        let w = inst.marked_index();
        assert_eq!(success_probability(&StateVector::basis(n, w), &inst), 1.0);
        let g = gamma_state(&inst).unwrap();
        assert!((success_probability(&g, &inst) - 0.25).abs() < 1e-15);
        let uniform = StateVector {
            amplitudes: vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n],
        };
        assert!((success_probability(&uniform, &inst) - 2.0 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn staggered_d2_has_four_uniform_starts() {
        let spec = build_staggered_hypercubic(2);
        let diracs = find_dirac_points(&spec, &DiracOptions::default()).unwrap().points;
        let states = enumerate_starting_states(&spec, 4, &diracs, 256).unwrap();
        assert_eq!(states.len(), 4);
        let g = spec.geometry(4);
        for s in &states {
            for v in 0..g.sites() {
                let want = if v % 4 == s.alpha { 0.25 } else { 0.0 };
                assert!((s.state.amplitudes[v].norm() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn honeycomb_phase_enumeration() {
        let spec = build_honeycomb();
        let diracs = find_dirac_points(&spec, &DiracOptions::default()).unwrap().points;
        let states = enumerate_starting_states(&spec, 6, &diracs, 256).unwrap();
        assert!(states.len() <= 18);
        assert_eq!(states.len(), 6);
        let h0 = assemble_sparse(&spec, 6, AssembleOptions::default()).unwrap();
        for s in &states {
            assert!((s.state.norm() - 1.0).abs() < 1e-12);
            let mut y = vec![ZERO; h0.dim()];
            h0.apply(&s.state.amplitudes, &mut y);
            assert!(norm(&y) < 1e-12);
        }
        let marked = Vertex::new([4, 2], 1);
        let i = matching_start(&states, &marked, &diracs).unwrap();
        let g = spec.geometry(6);
        let amp = states[i].state.amplitudes[marked.flat(&g)];
        let chi = 2.0;
        assert!((amp.re - (chi / 36.0f64).sqrt()).abs() < 1e-12 && amp.im.abs() < 1e-12);
        assert!(matches!(
            enumerate_starting_states(&spec, 6, &diracs, 10),
            Err(Error::EnumerationCap { count: 18, cap: 10 })
        ));
        assert!(matches!(
            enumerate_starting_states(&spec, 8, &diracs, 256),
            Err(Error::OffGrid { .. })
        ));
    }
}
