use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;

use super::{LatticeSums, SpectralMeasure};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: f64,
}

fn three_term(ls: &[usize], vals: &[f64], p: f64) -> f64 {
    let row = |l: usize| {
        let x = l as f64;
        [1.0, x.powf(-p), x.powf(-(p + 2.0))]
    };
    let (a, b, c) = (row(ls[0]), row(ls[1]), row(ls[2]));
    let m = Matrix3::new(a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2]);
    m.lu()
        .solve(&Vector3::new(vals[0], vals[1], vals[2]))
        .map_or(f64::NAN, |s| s[0])
}

fn two_term(ls: &[usize], vals: &[f64], p: f64) -> f64 {
    let x0 = (ls[0] as f64).powf(-p);
    let x1 = (ls[1] as f64).powf(-p);
    let m = Matrix2::new(1.0, x0, 1.0, x1);
    m.lu()
        .solve(&Vector2::new(vals[0], vals[1]))
        .map_or(f64::NAN, |s| s[0])
}

/// Extrapolates `v(l) = I + c1 l^{-p} + c2 l^{-(p+2)}` to `l → ∞` from the
/// last three rungs. The uncertainty is the change from the previous
/// three-rung window, or from the one-term fit when only three rungs exist.
pub fn richardson(ls: &[usize], vals: &[f64], p: f64) -> Estimate {
    assert_eq!(ls.len(), vals.len());
    let k = ls.len();
    match k {
        0 => Estimate {
            value: f64::NAN,
            uncertainty: f64::INFINITY,
        },
        1 => Estimate {
            value: vals[0],
            uncertainty: f64::INFINITY,
        },
        2 => {
            let v = two_term(ls, vals, p);
            Estimate {
                value: v,
                uncertainty: (v - vals[1]).abs(),
            }
        }
        _ => {
            let v = three_term(&ls[k - 3..], &vals[k - 3..], p);
            let prev = if k >= 4 {
                three_term(&ls[k - 4..k - 1], &vals[k - 4..k - 1], p)
            } else {
                two_term(&ls[k - 2..], &vals[k - 2..], p)
            };
            Estimate {
                value: v,
                uncertainty: (v - prev).abs(),
            }
        }
    }
}

/// Least-squares `y = slope·ln x + intercept`.
pub fn log_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    linear_fit(&lx, ys)
}

/// Least-squares `ln y = exponent·ln x + c`; returns `(exponent, e^c)`.
pub fn power_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (s, c) = linear_fit(&lx, &ly);
    (s, c.exp())
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Default `l` ladders for the moment extrapolations.
pub fn default_ladder(d: usize) -> Vec<usize> {
    match d {
        1 => vec![64, 128, 256, 512],
        2 => vec![16, 32, 64, 128],
        3 => vec![16, 32, 64],
        4 => vec![8, 12, 16],
        5 => vec![4, 6, 8],
        _ => vec![3, 4, 5],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralOptions {
    /// Largest accepted extrapolation uncertainty.
    pub threshold: f64,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        IntegralOptions { threshold: 1e-3 }
    }
}

/// `I2` in the thermodynamic limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum I2Limit {
    Finite(Estimate),
    /// `I2(N) ≈ slope·ln N + intercept` (`d = 2`).
    Logarithmic { slope: f64, intercept: f64 },
    /// `I2(N) ∝ N^exponent` (`d = 1`).
    PowerLaw { exponent: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitIntegrals {
    pub ladder: Vec<usize>,
    pub sums: Vec<LatticeSums>,
    pub i1: Estimate,
    pub i2: I2Limit,
}

/// Extrapolates the first two moments over `ladder`, at the marked site
/// `alpha` of the origin cell.
pub fn limit_integrals(
    spec: &LatticeSpec,
    alpha: usize,
    ladder: &[usize],
    opts: &IntegralOptions,
) -> Result<LimitIntegrals> {
    if ladder.is_empty() {
        return Err(Error::InvalidConfig("empty ladder".into()));
    }
    let marked = Vertex::origin(spec.d, alpha);
    let sums: Vec<LatticeSums> = ladder
        .iter()
        .map(|&l| Ok(LatticeSums::from_measure(&SpectralMeasure::new(spec, l, &marked)?, 2)))
        .collect::<Result<_>>()?;
    extrapolate_sums(spec, sums, opts)
}

/// Extrapolates precomputed lattice sums (ascending `l`, moments 1 and 2).
pub fn extrapolate_sums(
    spec: &LatticeSpec,
    sums: Vec<LatticeSums>,
    opts: &IntegralOptions,
) -> Result<LimitIntegrals> {
    if sums.is_empty() || sums.iter().any(|s| s.moment(2).is_none()) {
        return Err(Error::InvalidConfig("need moments 1 and 2 on a nonempty ladder".into()));
    }
    let ladder: Vec<usize> = sums.iter().map(|s| s.l).collect();
    let ladder = &ladder[..];
    let m1: Vec<f64> = sums.iter().map(|s| s.moment(1).unwrap()).collect();
    let m2: Vec<f64> = sums.iter().map(|s| s.moment(2).unwrap()).collect();
    let d = spec.d as f64;
    let i1 = if spec.d >= 2 {
        richardson(ladder, &m1, d - 1.0)
    } else {
        Estimate {
            value: *m1.last().unwrap(),
            uncertainty: f64::INFINITY,
        }
    };
    let sites: Vec<f64> = sums.iter().map(|s| (s.n * spec.r) as f64).collect();
    let i2 = match spec.d {
        1 => I2Limit::PowerLaw {
            exponent: power_fit(&sites, &m2).0,
        },
        2 => {
            let (slope, intercept) = log_fit(&sites, &m2);
            I2Limit::Logarithmic { slope, intercept }
        }
        _ => I2Limit::Finite(richardson(ladder, &m2, d - 2.0)),
    };
    for est in [Some(i1).filter(|_| spec.d >= 2), match i2 {
        I2Limit::Finite(e) => Some(e),
        _ => None,
    }]
    .into_iter()
    .flatten()
    {
        if !(est.uncertainty <= opts.threshold) {
            return Err(Error::NonConvergent {
                uncertainty: est.uncertainty,
                threshold: opts.threshold,
            });
        }
    }
    Ok(LimitIntegrals {
        ladder: ladder.to_vec(),
        sums,
        i1,
        i2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_staggered_hypercubic;

    #[test]
    fn richardson_is_exact_on_model() {
        let f = |l: usize| 0.25 + 3.0 / l as f64 - 7.0 / (l as f64).powi(3);
        let ls = [4, 8, 16, 32];
        let vals: Vec<f64> = ls.iter().map(|&l| f(l)).collect();
        let e = richardson(&ls, &vals, 1.0);
        assert!((e.value - 0.25).abs() < 1e-12);
        assert!(e.uncertainty < 1e-12);
    }

    #[test]
    fn three_rung_uncertainty_is_against_one_term() {
        let f = |l: usize| 1.0 + 1.0 / (l as f64).powi(2) + 1.0 / (l as f64).powi(4);
        let ls = [4, 8, 16];
        let vals: Vec<f64> = ls.iter().map(|&l| f(l)).collect();
        let e = richardson(&ls, &vals, 2.0);
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!(e.uncertainty > 1e-6);
    }

    #[test]
    fn fits_recover_coefficients() {
        let xs = [10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 0.5 * x.ln() - 2.0).collect();
        let (s, c) = log_fit(&xs, &ys);
        assert!((s - 0.5).abs() < 1e-12 && (c + 2.0).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        let (e, a) = power_fit(&xs, &ys);
        assert!((e + 0.5).abs() < 1e-12 && (a - 3.0).abs() < 1e-10);
    }

    #[test]
    fn non_convergent_ladder_is_reported() {
        let spec = build_staggered_hypercubic(3);
        let err = limit_integrals(&spec, 0, &[4, 6], &IntegralOptions { threshold: 1e-6 });
        assert!(matches!(err, Err(Error::NonConvergent { .. })));
    }
}
