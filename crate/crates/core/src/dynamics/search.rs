use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    enumerate_starting_states, evolve, gamma_state, matching_start, search_hamiltonian,
    EvolutionTrace, OracleKind, Propagator, PropagatorKind, SearchInstance, StateVector,
    SuccessRule, DEFAULT_ENUMERATION_CAP,
};
use crate::error::Result;
use crate::resolvent::{predict_from_measure, SpectralMeasure, SpectralPrediction};

/// `points` evenly spaced times on `[0, span]`.
pub fn time_grid(span: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| span * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    pub points: usize,
    /// The grid covers `[0, horizon·T]`.
    pub horizon: f64,
    pub propagator: PropagatorKind,
    pub enumeration_cap: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            points: 200,
            horizon: 2.0,
            propagator: PropagatorKind::Auto,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub alpha: usize,
    pub residue: Vec<usize>,
    pub max_success: f64,
    pub max_overlap_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub prediction: SpectralPrediction,
    pub propagator: PropagatorKind,
    /// Number of enumerated starting states, i.e. the repetition overhead.
    pub runs: Vec<RunSummary>,
    pub best_run: usize,
    /// Index of the run whose phases match the marked vertex.
    pub matching_run: Option<usize>,
    pub best_time: f64,
    pub best_success: f64,
    /// Whether the marked vertex is the most likely vertex, or one of its
    /// neighbours, at the best time.
    pub recovered: bool,
    /// Amplitude-amplification rounds `⌈π / (4 asin √p)⌉` in `d = 2`.
    pub amplification_rounds: Option<usize>,
    #[serde(skip)]
    pub trace: EvolutionTrace,
}

/// Predicts `T`, then evolves every enumerated starting state over
/// `[0, horizon·T]` and keeps the run with the highest success probability.
pub fn run_search(inst: &SearchInstance, opts: &SearchOptions) -> Result<SearchReport> {
    let mu = SpectralMeasure::new(&inst.spec, inst.l, &inst.marked)?;
    let prediction = predict_from_measure(&inst.spec.name, &mu, &inst.oracle, inst.gamma)?;
    let times = time_grid(opts.horizon * prediction.run_time, opts.points);

    let h = search_hamiltonian(inst)?;
    let prop = Propagator::new(&h, opts.propagator);
    let target_kind = inst.oracle.target();
    let target = match inst.oracle {
        OracleKind::BipartiteProjector => gamma_state(inst)?,
        OracleKind::OnSitePotential { .. } => {
            StateVector::basis(inst.geometry().sites(), inst.marked_index())
        }
    };
    let rule = SuccessRule::for_instance(inst);
    let starts = enumerate_starting_states(&inst.spec, inst.l, &inst.diracs, opts.enumeration_cap)?;

    let traces: Vec<EvolutionTrace> = starts
        .par_iter()
        .map(|s| evolve(&prop, &s.state, &times, (&target, target_kind), &rule))
        .collect::<Result<_>>()?;

    let runs: Vec<RunSummary> = starts
        .iter()
        .zip(&traces)
        .map(|(s, t)| RunSummary {
            alpha: s.alpha,
            residue: s.residue.clone(),
            max_success: t.success_prob[t.best_index()],
            max_overlap_sq: t.max_overlap_sq(),
        })
        .collect();
    let best_run = (0..runs.len()).fold(0, |b, i| {
        if runs[i].max_success > runs[b].max_success {
            i
        } else {
            b
        }
    });
    let trace = traces.into_iter().nth(best_run).expect("at least one run");
    let bi = trace.best_index();
    let best_success = trace.success_prob[bi];
    let peak = trace.peak_vertex[bi];
    let w = inst.marked_index();
    let recovered = peak == w || rule.neighbours().any(|u| u == peak);
    let amplification_rounds = (inst.spec.d == 2 && best_success > 0.0)
        .then(|| (PI / (4.0 * best_success.sqrt().asin())).ceil() as usize);
    Ok(SearchReport {
        prediction,
        propagator: prop.kind(),
        matching_run: matching_start(&starts, &inst.marked, &inst.diracs),
        runs,
        best_run,
        best_time: trace.times[bi],
        best_success,
        recovered,
        amplification_rounds,
        trace,
    })
}

/// Evolves only the starting state whose phases match the marked vertex,
/// over `[0, span]` (defaults to `horizon·T`).
pub fn simulate_matching(
    inst: &SearchInstance,
    opts: &SearchOptions,
    span: Option<f64>,
) -> Result<(SpectralPrediction, EvolutionTrace)> {
    let mu = SpectralMeasure::new(&inst.spec, inst.l, &inst.marked)?;
    let prediction = predict_from_measure(&inst.spec.name, &mu, &inst.oracle, inst.gamma)?;
    let times = time_grid(span.unwrap_or(opts.horizon * prediction.run_time), opts.points);
    let h = search_hamiltonian(inst)?;
    let prop = Propagator::new(&h, opts.propagator);
    let target = match inst.oracle {
        OracleKind::BipartiteProjector => gamma_state(inst)?,
        OracleKind::OnSitePotential { .. } => {
            StateVector::basis(inst.geometry().sites(), inst.marked_index())
        }
    };
    let starts = enumerate_starting_states(&inst.spec, inst.l, &inst.diracs, opts.enumeration_cap)?;
    let i = matching_start(&starts, &inst.marked, &inst.diracs).ok_or_else(|| {
        crate::Error::Unsupported("no starting state matches the marked vertex".into())
    })?;
    let rule = SuccessRule::for_instance(inst);
    let trace = evolve(&prop, &starts[i].state, &times, (&target, inst.oracle.target()), &rule)?;
    Ok((prediction, trace))
}
