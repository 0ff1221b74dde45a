use super::{HoppingTable, LatticeSpec};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Canonical names accepted by [`builtin`]. `staggered-hypercubic-<d>` takes
/// any `d >= 1`; `dirac-square` accepts an optional `:<gamma>:<omega>` suffix.
pub const BUILTIN_NAMES: &[&str] = &[
    "staggered-hypercubic-<d>",
    "honeycomb",
    "kagome",
    "dirac-square[:gamma:omega]",
    "decoupled-square",
];

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn unit(d: usize, i: usize, sign: i64) -> Vec<i64> {
    let mut e = vec![0; d];
    e[i] = sign;
    e
}

fn finish(name: String, d: usize, r: usize, t: HoppingTable) -> LatticeSpec {
    LatticeSpec::new(name, d, r, t, true).expect("built-in lattice tables are Hermitian")
}

/// Hypercubic lattice with the staggered signs `(-1)^{v_1+…+v_i}` along axis
/// `i`, grouped into `2^d`-site hypercube cells.
///
/// Site `σ ∈ Z_2^d` is stored as the integer with bit `i-1` equal to `σ_i`.
pub fn build_staggered_hypercubic(d: usize) -> LatticeSpec {
    assert!(d >= 1, "dimension must be positive");
    let r = 1usize << d;
    let zero = vec![0i64; d];
    let mut t = HoppingTable::new();
    for sigma in 0..r {
        for i in 0..d {
            let lower = sigma & ((1 << i) - 1);
            let sign = if lower.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let flipped = sigma ^ (1 << i);
            t.add(&zero, sigma, flipped, re(sign));
            if sigma & (1 << i) != 0 {
                t.add(&unit(d, i, 1), sigma, flipped, re(-sign));
            } else {
                t.add(&unit(d, i, -1), sigma, flipped, re(-sign));
            }
        }
    }
    finish(format!("staggered-hypercubic-{d}"), d, r, t)
}

/// Honeycomb lattice as a two-site square crystal with
/// `h(k) = 1 + e^{-i k_x} + e^{-i(k_x + k_y)}`.
pub fn build_honeycomb() -> LatticeSpec {
    let mut t = HoppingTable::new();
    for delta in [[0, 0], [1, 0], [1, 1]] {
        t.add_pair(&delta, 1, 0, re(1.0));
    }
    finish("honeycomb".into(), 2, 2, t)
}

/// Kagome lattice with three sites per cell and the constant `-1` on-site term,
/// which puts the flat band at `-3` and the Dirac points at zero energy.
pub fn build_kagome() -> LatticeSpec {
    let mut t = HoppingTable::new();
    // g(q) = 1 + e^{iq}; each pair below realises one upper-triangle entry.
    let pairs: [(usize, usize, [i64; 2]); 3] = [(0, 1, [0, -1]), (0, 2, [1, -1]), (1, 2, [1, 0])];
    for (a, b, delta) in pairs {
        t.add_pair(&[0, 0], a, b, re(1.0));
        t.add_pair(&delta, a, b, re(1.0));
    }
    for s in 0..3 {
        t.add(&[0, 0], s, s, re(-1.0));
    }
    finish("kagome".into(), 2, 3, t)
}

/// Two-site square crystal with Bloch block
/// `[[γ c(k), ω s(k)*], [ω s(k), -γ c(k)]]`, `s = sin k_x - i sin k_y`,
/// `c = 2 - cos k_x - cos k_y`.
pub fn build_dirac_square(gamma: f64, omega: f64) -> LatticeSpec {
    let mut t = HoppingTable::new();
    for (s, sign) in [(0usize, 1.0), (1, -1.0)] {
        t.add(&[0, 0], s, s, re(sign * 2.0 * gamma));
        for delta in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            t.add(&delta, s, s, re(-sign * gamma / 2.0));
        }
    }
    t.add_pair(&[1, 0], 1, 0, C64::new(0.0, omega / 2.0));
    t.add_pair(&[-1, 0], 1, 0, C64::new(0.0, -omega / 2.0));
    t.add_pair(&[0, 1], 1, 0, re(omega / 2.0));
    t.add_pair(&[0, -1], 1, 0, re(-omega / 2.0));
    finish("dirac-square".into(), 2, 2, t)
}

/// One connected component of the `γ = 0` Dirac-square graph:
/// `H0|v> = i(-1)^y (|v+e_x> - |v-e_x>) + (-1)^y (|v+e_y> - |v-e_y>)`.
///
/// The signs alternate along `y`, so cells hold two vertices stacked in `y`
/// (`σ = y mod 2`).
pub fn build_decoupled_component() -> LatticeSpec {
    let mut t = HoppingTable::new();
    let i = C64::new(0.0, 1.0);
    // even row
    t.add(&[1, 0], 0, 0, i);
    t.add(&[-1, 0], 0, 0, -i);
    t.add(&[0, 0], 0, 1, re(1.0));
    t.add(&[0, -1], 0, 1, re(-1.0));
    // odd row
    t.add(&[1, 0], 1, 1, -i);
    t.add(&[-1, 0], 1, 1, i);
    t.add(&[0, 1], 1, 0, re(-1.0));
    t.add(&[0, 0], 1, 0, re(1.0));
    finish("decoupled-square".into(), 2, 2, t)
}

/// Looks up a built-in lattice by canonical name.
pub fn builtin(name: &str) -> Result<LatticeSpec> {
    if let Some(d) = name.strip_prefix("staggered-hypercubic-") {
        let d: usize = d
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad dimension in {name:?}")))?;
        if d == 0 || d > 8 {
            return Err(Error::InvalidConfig(format!(
                "staggered hypercubic dimension must be 1..=8, got {d}"
            )));
        }
        return Ok(build_staggered_hypercubic(d));
    }
    if let Some(rest) = name.strip_prefix("dirac-square") {
        if rest.is_empty() {
            return Ok(build_dirac_square(1.0, 1.0));
        }
        let parts: Vec<&str> = rest.trim_start_matches(':').split(':').collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad parameter {s:?} in {name:?}")))
        };
        return match parts.as_slice() {
            [g] => Ok(build_dirac_square(parse(g)?, 1.0)),
            [g, w] => Ok(build_dirac_square(parse(g)?, parse(w)?)),
            _ => Err(Error::InvalidConfig(format!("bad dirac-square name {name:?}"))),
        };
    }
    match name {
        "honeycomb" => Ok(build_honeycomb()),
        "kagome" => Ok(build_kagome()),
        "decoupled-square" => Ok(build_decoupled_component()),
        _ => Err(Error::InvalidConfig(format!(
            "unknown lattice {name:?}; built-ins: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
