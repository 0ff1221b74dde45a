use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{StateVector, SuccessRule};
use crate::error::{Error, Result};
use crate::linalg::{eigh, eigh_real, norm, vdot, SparseOperator, C64, ZERO};

/// Largest dimension diagonalised densely by [`PropagatorKind::Auto`].
pub const DENSE_BUDGET: usize = 1024;
const KRYLOV_DIM: usize = 30;
const KRYLOV_TOL: f64 = 1e-10;
const DRIFT_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorKind {
    Auto,
    Dense,
    Krylov,
}

enum Engine {
    DenseReal { values: Vec<f64>, vectors: DMatrix<f64> },
    DenseComplex { values: Vec<f64>, vectors: DMatrix<C64> },
    Krylov,
}

/// `e^{-iHt}` for one Hamiltonian, reusable across initial states.
pub struct Propagator<'a> {
    h: &'a SparseOperator,
    engine: Engine,
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a SparseOperator, kind: PropagatorKind) -> Self {
        let dense = match kind {
            PropagatorKind::Auto => h.dim() <= DENSE_BUDGET,
            PropagatorKind::Dense => true,
            PropagatorKind::Krylov => false,
        };
        let engine = if !dense {
            Engine::Krylov
        } else if h.is_real() {
            let (values, vectors) = eigh_real(h.to_dense().map(|z| z.re));
            Engine::DenseReal { values, vectors }
        } else {
            let e = eigh(&h.to_dense());
            Engine::DenseComplex {
                values: e.values,
                vectors: e.vectors,
            }
        };
        Propagator { h, engine }
    }

    pub fn kind(&self) -> PropagatorKind {
        match self.engine {
            Engine::Krylov => PropagatorKind::Krylov,
            _ => PropagatorKind::Dense,
        }
    }

    /// Calls `observe(i, t_i, ψ(t_i))` for every time in the sorted grid.
    pub fn run(
        &self,
        psi0: &[C64],
        times: &[f64],
        mut observe: impl FnMut(usize, f64, &[C64]) -> Result<()>,
    ) -> Result<()> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("time grid must be sorted".into()));
        }
        match &self.engine {
            Engine::DenseReal { values, vectors } => {
                let n = values.len();
                let re = DVector::from_iterator(n, psi0.iter().map(|z| z.re));
                let im = DVector::from_iterator(n, psi0.iter().map(|z| z.im));
                let cr = vectors.tr_mul(&re);
                let ci = vectors.tr_mul(&im);
                for (i, &t) in times.iter().enumerate() {
                    // V diag(e^{-iλt}) Vᵀ ψ0, split into real and imaginary parts.
                    let mut ar = DVector::zeros(n);
                    let mut ai = DVector::zeros(n);
                    for j in 0..n {
                        let (s, c) = (values[j] * t).sin_cos();
                        ar[j] = c * cr[j] + s * ci[j];
                        ai[j] = c * ci[j] - s * cr[j];
                    }
                    let pr = vectors * ar;
                    let pi = vectors * ai;
                    let psi: Vec<C64> = (0..n).map(|k| C64::new(pr[k], pi[k])).collect();
                    observe(i, t, &psi)?;
                }
            }
            Engine::DenseComplex { values, vectors } => {
                let n = values.len();
                let c = vectors.ad_mul(&DVector::from_column_slice(psi0));
                for (i, &t) in times.iter().enumerate() {
                    let a = DVector::from_iterator(
                        n,
                        (0..n).map(|j| c[j] * C64::from_polar(1.0, -values[j] * t)),
                    );
                    let psi = vectors * a;
                    observe(i, t, psi.as_slice())?;
                }
            }
            Engine::Krylov => {
                let mut psi = psi0.to_vec();
                let mut now = times.first().copied().unwrap_or(0.0);
                if now != 0.0 {
                    psi = krylov_evolve(self.h, &psi, now)?;
                }
                for (i, &t) in times.iter().enumerate() {
                    if t > now {
                        psi = krylov_evolve(self.h, &psi, t - now)?;
                        now = t;
                    }
                    observe(i, t, &psi)?;
                }
            }
        }
        Ok(())
    }
}

/// Lanczos basis with full reorthogonalisation.
struct Lanczos {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    beta0: f64,
    /// The residual `β_m` after the last vector; zero on happy breakdown.
    tail: f64,
}

impl Lanczos {
    fn build(h: &SparseOperator, v: &[C64], tau: f64) -> Lanczos {
        let n = v.len();
        let beta0 = norm(v);
        let mut basis = vec![v.iter().map(|z| z / beta0).collect::<Vec<_>>()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![ZERO; n];
        let scale = h.norm_bound().max(1.0);
        let mut tail = 0.0;
        for j in 0..KRYLOV_DIM {
            h.apply(&basis[j], &mut w);
            let a = vdot(&basis[j], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = vdot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let b = norm(&w);
            tail = b;
            if b <= 1e-13 * scale {
                tail = 0.0;
                break;
            }
            let lz = Lanczos {
                basis: Vec::new(),
                alpha: alpha.clone(),
                beta: beta.clone(),
                beta0,
                tail: b,
            };
            if j >= 3 && j + 1 < KRYLOV_DIM && lz.coefficients(tau).1 <= KRYLOV_TOL * beta0 {
                break;
            }
            if j + 1 < KRYLOV_DIM {
                beta.push(b);
                basis.push(w.iter().map(|z| z / b).collect());
            }
        }
        Lanczos {
            basis,
            alpha,
            beta,
            beta0,
            tail,
        }
    }

    /// Coefficients of `e^{-iHτ}v` in the basis and the a-posteriori error
    /// `β_m |e_mᵀ e^{-iT_mτ} e_1| β_0`.
    fn coefficients(&self, tau: f64) -> (Vec<C64>, f64) {
        let m = self.alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        let (theta, q) = eigh_real(t);
        let y: Vec<C64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| C64::from_polar(q[(i, j)] * q[(0, j)] * self.beta0, -theta[j] * tau))
                    .sum()
            })
            .collect();
        let err = self.tail * y[m - 1].norm();
        (y, err)
    }

    fn combine(&self, y: &[C64]) -> Vec<C64> {
        let n = self.basis[0].len();
        let mut out = vec![ZERO; n];
        for (q, c) in self.basis.iter().zip(y) {
            for (o, qi) in out.iter_mut().zip(q) {
                *o += c * qi;
            }
        }
        out
    }
}

/// `e^{-iHt} v` by adaptive Lanczos steps.
fn krylov_evolve(h: &SparseOperator, v: &[C64], t: f64) -> Result<Vec<C64>> {
    let mut psi = v.to_vec();
    let mut remaining = t;
    let mut tau = t;
    let mut guard = 0usize;
    while remaining > 0.0 {
        tau = tau.min(remaining);
        let lz = Lanczos::build(h, &psi, tau);
        let beta0 = lz.beta0;
        loop {
            let (y, err) = lz.coefficients(tau);
            if err <= KRYLOV_TOL * beta0 || lz.tail == 0.0 {
                psi = lz.combine(&y);
                remaining -= tau;
                if remaining < 1e-14 * t {
                    remaining = 0.0;
                }
                tau *= 1.5;
                break;
            }
            tau *= 0.5;
            guard += 1;
            if guard > 10_000 || tau < 1e-12 * t {
                return Err(Error::NormDrift {
                    time: t - remaining,
                    drift: f64::NAN,
                });
            }
        }
    }
    Ok(psi)
}

/// What the squared overlap in a trace is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Gamma,
    MarkedVertex,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionTrace {
    pub target: TargetKind,
    pub times: Vec<f64>,
    pub overlap_sq: Vec<f64>,
    pub success_prob: Vec<f64>,
    pub norms: Vec<f64>,
    pub energies: Vec<f64>,
    /// Most likely vertex at each time.
    pub peak_vertex: Vec<usize>,
}

pub const TRACE_HEADER: &str = "t,overlapSq,successProb,norm,energy";

impl EvolutionTrace {
    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energies.first().copied().unwrap_or(0.0);
        self.energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    fn argmax(xs: &[f64]) -> usize {
        (0..xs.len()).fold(0, |b, i| if xs[i] > xs[b] { i } else { b })
    }

    /// Index of the largest success probability (earliest on ties).
    pub fn best_index(&self) -> usize {
        Self::argmax(&self.success_prob)
    }

    pub fn max_overlap_sq(&self) -> f64 {
        self.overlap_sq.iter().copied().fold(0.0, f64::max)
    }

    /// First local maximum of the squared overlap reaching at least half
    /// of its global maximum.
    pub fn first_overlap_peak(&self) -> usize {
        let v = &self.overlap_sq;
        let cut = 0.5 * self.max_overlap_sq();
        (1..v.len().saturating_sub(1))
            .find(|&i| v[i] >= cut && v[i] >= v[i - 1] && v[i] > v[i + 1])
            .unwrap_or_else(|| Self::argmax(v))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.overlap_sq[i], self.success_prob[i], self.norms[i], self.energies[i]
            )?;
        }
        Ok(())
    }
}

/// Evolves `psi0` and records overlap, success probability, norm and energy.
pub fn evolve(
    prop: &Propagator<'_>,
    psi0: &StateVector,
    times: &[f64],
    target: (&StateVector, TargetKind),
    rule: &SuccessRule,
) -> Result<EvolutionTrace> {
    let n0 = psi0.norm();
    if (n0 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("initial state has norm {n0}")));
    }
    let h = prop.h;
    let mut tr = EvolutionTrace {
        target: target.1,
        times: times.to_vec(),
        overlap_sq: Vec::with_capacity(times.len()),
        success_prob: Vec::with_capacity(times.len()),
        norms: Vec::with_capacity(times.len()),
        energies: Vec::with_capacity(times.len()),
        peak_vertex: Vec::with_capacity(times.len()),
    };
    prop.run(&psi0.amplitudes, times, |_, t, psi| {
        let nrm = norm(psi);
        if (nrm - 1.0).abs() > DRIFT_LIMIT {
            return Err(Error::NormDrift {
                time: t,
                drift: (nrm - 1.0).abs(),
            });
        }
        tr.overlap_sq.push(vdot(&target.0.amplitudes, psi).norm_sqr());
        tr.success_prob.push(rule.probability(psi));
        tr.norms.push(nrm);
        tr.energies.push(h.expectation(psi));
        let peak = (0..psi.len()).fold(0, |b, i| if psi[i].norm_sqr() > psi[b].norm_sqr() { i } else { b });
        tr.peak_vertex.push(peak);
        Ok(())
    })?;
    Ok(tr)
}
