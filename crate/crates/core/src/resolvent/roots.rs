use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use super::SpectralMeasure;
use crate::dynamics::OracleKind;
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Vertex};

const BRACKET_MARGIN: f64 = 1e-9;
const ROOT_RTOL: f64 = 1e-12;

/// `f(γ) = (γ - 1)^2 / (2γ - 1)`.
pub fn f_gamma(gamma: f64) -> Result<f64> {
    if (2.0 * gamma - 1.0).abs() < 1e-12 {
        return Err(Error::InvalidConfig("f(γ) has a pole at γ = 1/2".into()));
    }
    Ok((gamma - 1.0).powi(2) / (2.0 * gamma - 1.0))
}

/// Right-hand side of the eigenvalue condition `F(E) = target(E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootTarget {
    /// `f(γ)/E`; zero at `γ = 1`.
    Projector { f: f64 },
    /// The constant `I1` of the on-site oracle `-(1/I1)|w><w|`.
    Constant(f64),
}

impl RootTarget {
    pub fn new(kind: &OracleKind, gamma: f64) -> Result<Self> {
        Ok(match kind {
            OracleKind::BipartiteProjector => RootTarget::Projector { f: f_gamma(gamma)? },
            OracleKind::OnSitePotential { i1 } => RootTarget::Constant(*i1),
        })
    }

    fn at(&self, e: f64) -> f64 {
        match *self {
            RootTarget::Projector { f } => f / e,
            RootTarget::Constant(c) => c,
        }
    }
}

fn bisect(mu: &SpectralMeasure, target: RootTarget, gamma: f64, a: f64, b: f64) -> Result<f64> {
    let g = |e: f64| -> Result<f64> { Ok(mu.f(e, gamma)? - target.at(e)) };
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_RTOL * mid.abs() {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The two roots of the eigenvalue condition on either side of the kernel
/// pole, each bracketed by zero and the nearest weighted pole of `F`.
pub fn find_roots(mu: &SpectralMeasure, kind: &OracleKind, gamma: f64) -> Result<(f64, f64)> {
    let target = RootTarget::new(kind, gamma)?;
    let (neg, pos) = mu.nearest_poles(gamma);
    let reach = mu
        .energies
        .iter()
        .map(|e| (gamma * e).abs())
        .fold(1.0, f64::max);
    let pos = pos.unwrap_or(2.0 * reach);
    let neg = neg.unwrap_or(-2.0 * reach);
    let plus = bisect(mu, target, gamma, pos * BRACKET_MARGIN, pos * (1.0 - BRACKET_MARGIN))?;
    let minus = bisect(mu, target, gamma, neg * (1.0 - BRACKET_MARGIN), neg * BRACKET_MARGIN)?;
    Ok((minus, plus))
}

/// One eigenvector `ψ ∝ A (γH0 - E)^{-1}|w> + B|w>` of the perturbed
/// Hamiltonian, reduced to its overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootMode {
    pub energy: f64,
    pub f_prime: f64,
    /// `<target|ψ>`.
    pub target_overlap: f64,
    /// `<ψ|s>` for the matching starting state.
    pub start_overlap: f64,
}

fn root_mode(mu: &SpectralMeasure, kind: &OracleKind, gamma: f64, e: f64) -> Result<RootMode> {
    let f = mu.f(e, gamma)?;
    let fp = mu.f_prime(e, gamma)?;
    let start = mu.kernel_weight.sqrt();
    Ok(match kind {
        OracleKind::BipartiteProjector => {
            // Normalised so that <w|H0|ψ> = 1 before the overall norm.
            let u = 1.0 + e * f;
            let b = (gamma - u) * gamma / (e * u);
            let a = 1.0 + b * e / gamma;
            let bb = b / gamma;
            let norm = (a * a * fp + 2.0 * a * bb * f + bb * bb).sqrt();
            let h0w = mu.moment(-2).sqrt();
            RootMode {
                energy: e,
                f_prime: fp,
                target_overlap: a * u / (gamma * h0w) / norm,
                start_overlap: (-a / e + bb) * start / norm,
            }
        }
        OracleKind::OnSitePotential { .. } => {
            let norm = fp.sqrt();
            RootMode {
                energy: e,
                f_prime: fp,
                target_overlap: f / norm,
                start_overlap: -start / e / norm,
            }
        }
    })
}

/// Closed-form predictions for one search instance.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralPrediction {
    pub lattice: String,
    pub d: usize,
    pub l: usize,
    pub n: usize,
    pub sites: usize,
    pub oracle: String,
    pub gamma: f64,
    pub i1: f64,
    /// Finite-size `<w̃|H̃0^{-2}|w̃>` at this `l`.
    pub i2: f64,
    pub e_minus: f64,
    pub e_plus: f64,
    pub f_prime_minus: f64,
    pub f_prime_plus: f64,
    /// `π / (2|E+|)`.
    pub run_time: f64,
    /// `(π/2)·sqrt(I2·N)`, the vertex-count form of the run time.
    pub run_time_vertex_form: f64,
    /// `|<ψ+|s>|`.
    pub overlap_start: f64,
    /// Two-level `|<target|e^{-iHT}|s>|` at `T = run_time`.
    pub success_amplitude: f64,
    pub modes: [RootMode; 2],
}

impl SpectralPrediction {
    /// Two-level estimate of `|<target|e^{-iHt}|s>|`.
    pub fn amplitude_at(&self, t: f64) -> f64 {
        let (re, im) = self.modes.iter().fold((0.0, 0.0), |acc, m| {
            let c = m.target_overlap * m.start_overlap;
            (acc.0 + c * (m.energy * t).cos(), acc.1 - c * (m.energy * t).sin())
        });
        re.hypot(im)
    }
}

pub fn predict(
    spec: &LatticeSpec,
    l: usize,
    marked: &Vertex,
    kind: &OracleKind,
    gamma: f64,
) -> Result<SpectralPrediction> {
    let mu = SpectralMeasure::new(spec, l, marked)?;
    predict_from_measure(&spec.name, &mu, kind, gamma)
}

pub fn predict_from_measure(
    name: &str,
    mu: &SpectralMeasure,
    kind: &OracleKind,
    gamma: f64,
) -> Result<SpectralPrediction> {
    let (e_minus, e_plus) = find_roots(mu, kind, gamma)?;
    let minus = root_mode(mu, kind, gamma, e_minus)?;
    let plus = root_mode(mu, kind, gamma, e_plus)?;
    let i2 = mu.moment(2);
    let i1 = match kind {
        OracleKind::OnSitePotential { i1 } => *i1,
        OracleKind::BipartiteProjector => mu.moment(1),
    };
    let run_time = PI / (2.0 * e_plus.abs());
    let mut p = SpectralPrediction {
        lattice: name.to_string(),
        d: mu.d,
        l: mu.l,
        n: mu.n,
        sites: mu.sites(),
        oracle: kind.label().to_string(),
        gamma,
        i1,
        i2,
        e_minus,
        e_plus,
        f_prime_minus: minus.f_prime,
        f_prime_plus: plus.f_prime,
        run_time,
        run_time_vertex_form: 0.5 * PI * (i2 * mu.sites() as f64).sqrt(),
        overlap_start: plus.start_overlap.abs(),
        success_amplitude: 0.0,
        modes: [minus, plus],
    };
    p.success_amplitude = p.amplitude_at(run_time);
    Ok(p)
}

pub const PREDICTION_HEADER: &str =
    "lattice,d,l,n,N,oracle,gamma,I1,I2,Eminus,Eplus,Fprime,T,overlapStart,successAmplitude";

pub fn write_prediction_csv<W: Write>(rows: &[SpectralPrediction], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PREDICTION_HEADER}")?;
    for p in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.lattice,
            p.d,
            p.l,
            p.n,
            p.sites,
            p.oracle,
            p.gamma,
            p.i1,
            p.i2,
            p.e_minus,
            p.e_plus,
            p.f_prime_plus,
            p.run_time,
            p.overlap_start,
            p.success_amplitude
        )?;
    }
    Ok(())
}

/// Detuned-`γ` analysis of the projector oracle.
#[derive(Debug, Clone, Serialize)]
pub struct GammaTuning {
    pub gamma: f64,
    pub f: f64,
    /// `±sqrt(γ²(χ_α/n + f)/I2)`, which reads `±sqrt(γ²(1 + n f)/(n I2))`
    /// when `χ_α = 1`.
    pub predicted_roots: (f64, f64),
    /// Roots of `F(E) = f(γ)/E` by bisection.
    pub roots: (f64, f64),
    /// Largest relative deviation between the two pairs.
    pub relative_error: f64,
}

pub fn gamma_analysis(mu: &SpectralMeasure, gamma: f64) -> Result<GammaTuning> {
    let f = f_gamma(gamma)?;
    let i2 = mu.moment(2);
    let radicand = gamma * gamma * (mu.kernel_weight + f) / i2;
    if !(radicand > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "closed-form roots undefined at γ = {gamma} (radicand {radicand:e})"
        )));
    }
    let e = radicand.sqrt();
    let roots = find_roots(mu, &OracleKind::BipartiteProjector, gamma)?;
    let relative_error = ((roots.0 + e) / roots.0)
        .abs()
        .max(((roots.1 - e) / roots.1).abs());
    Ok(GammaTuning {
        gamma,
        f,
        predicted_roots: (-e, e),
        roots,
        relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_kagome, build_staggered_hypercubic};

    #[test]
    fn f_gamma_values() {
        assert_eq!(f_gamma(1.0).unwrap(), 0.0);
        assert!(f_gamma(0.5).is_err());
        let n = 1000.0;
        let f = f_gamma(1.0 + 1.0 / n).unwrap();
        assert!((f * n * n - 1.0).abs() < 1e-2);
    }

    #[test]
    fn staggered_roots_are_symmetric() {
        let spec = build_staggered_hypercubic(3);
        let mu = SpectralMeasure::new(&spec, 4, &Vertex::origin(3, 0)).unwrap();
        let (m, p) = find_roots(&mu, &OracleKind::BipartiteProjector, 1.0).unwrap();
        assert!((m + p).abs() < 1e-12 * p);
        // Leading-order estimate 1/sqrt(n·I2) with the finite-size sum.
        let approx = 1.0 / (mu.n as f64 * mu.moment(2)).sqrt();
        assert!((p / approx - 1.0).abs() < 0.1, "{p} vs {approx}");
        assert!(mu.f(p, 1.0).unwrap().abs() < 1e-8);
    }

    #[test]
    fn gamma_one_matches_plain_condition() {
        let spec = build_staggered_hypercubic(2);
        let mu = SpectralMeasure::new(&spec, 8, &Vertex::origin(2, 1)).unwrap();
        let t = gamma_analysis(&mu, 1.0).unwrap();
        let r = find_roots(&mu, &OracleKind::BipartiteProjector, 1.0).unwrap();
        assert_eq!(t.roots, r);
        assert_eq!(t.f, 0.0);
    }

    #[test]
    fn two_level_start_overlap_near_half() {
        let spec = build_staggered_hypercubic(3);
        let p = predict(&spec, 6, &Vertex::origin(3, 0), &OracleKind::BipartiteProjector, 1.0).unwrap();
        assert!((p.overlap_start - 0.5f64.sqrt()).abs() < 0.05, "{}", p.overlap_start);
        assert!(p.f_prime_plus > 0.0 && p.f_prime_minus > 0.0);
        assert!((p.e_minus + p.e_plus).abs() < 1e-12);
    }

    #[test]
    fn onsite_oracle_roots() {
        let spec = build_kagome();
        let mu = SpectralMeasure::new(&spec, 6, &Vertex::origin(2, 0)).unwrap();
        let i1 = mu.moment(1);
        let kind = OracleKind::OnSitePotential { i1 };
        let (m, p) = find_roots(&mu, &kind, 1.0).unwrap();
        assert!(m < 0.0 && p > 0.0);
        assert!((mu.f(m, 1.0).unwrap() - i1).abs() < 1e-8);
        assert!((mu.f(p, 1.0).unwrap() - i1).abs() < 1e-8);
    }

    #[test]
    fn prediction_csv_has_header() {
        let spec = build_staggered_hypercubic(2);
        let p = predict(&spec, 8, &Vertex::origin(2, 0), &OracleKind::BipartiteProjector, 1.0).unwrap();
        let mut buf = Vec::new();
        write_prediction_csv(&[p], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(PREDICTION_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 15);
    }
}
