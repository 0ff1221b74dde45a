//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any fail.

use std::f64::consts::PI;
use std::process::ExitCode;

use diracwalk::bloch::DiracOptions;
use diracwalk::dynamics::{prepare, simulate_matching, EvolutionTrace, OracleKind, SearchInstance, SearchOptions};
use diracwalk::lattice::builtin;
use diracwalk::resolvent::{
    default_ladder, gamma_analysis, limit_integrals, log_fit, power_fit, I2Limit, IntegralOptions,
    SpectralMeasure,
};
use diracwalk::verify::{
    block_structure, dirac_detection, propagation_hygiene, resolvent_equivalence, roots_are_eigenvalues,
    small_cases, staggered_square, Check, VerifyOptions,
};
use diracwalk::{Result, Vertex};

fn staggered(d: usize, l: usize, gamma: f64) -> Result<SearchInstance> {
    let spec = builtin(&format!("staggered-hypercubic-{d}"))?;
    let p = prepare(
        &spec,
        l,
        Vertex::origin(d, 0),
        Some(OracleKind::BipartiteProjector),
        gamma,
        &DiracOptions::default(),
    )?;
    Ok(p.instance)
}

fn first_peak(trace: &EvolutionTrace) -> (f64, f64) {
    let k = trace.first_overlap_peak();
    (trace.times[k], trace.overlap_sq[k])
}

fn summarize(checks: &[Check]) -> (bool, String) {
    let bad: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let worst = checks.iter().map(|c| c.worst).fold(0.0, f64::max);
    let detail = if bad.is_empty() {
        format!("{} checks, worst deviation {worst:.2e}", checks.len())
    } else {
        format!("{} of {} checks failed: {bad:?}", bad.len(), checks.len())
    };
    (bad.is_empty(), detail)
}

fn table_one() -> Result<(bool, String)> {
    let want = [(3, 0.2527), (4, 0.1549), (5, 0.1156), (6, 0.0931)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, expected) in want {
        let spec = builtin(&format!("staggered-hypercubic-{d}"))?;
        let li = limit_integrals(&spec, 0, &default_ladder(d), &IntegralOptions::default())?;
        let I2Limit::Finite(est) = li.i2 else { unreachable!("d >= 3 has a finite I2") };
        let good = (est.value - expected).abs() <= 5e-4;
        ok &= good;
        parts.push(format!("d={d}: {:.5} (want {expected})", est.value));
    }
    Ok((ok, parts.join(", ")))
}

fn kagome_i1() -> Result<(bool, String)> {
    let spec = builtin("kagome")?;
    let li = limit_integrals(&spec, 0, &[12, 24, 48], &IntegralOptions::default())?;
    let v = li.i1.value;
    Ok(((v + 4.39).abs() <= 0.02, format!("I1 = {v:.5} (want -4.39 ± 0.02)")))
}

fn log_law() -> Result<(bool, String)> {
    let spec = builtin("staggered-hypercubic-2")?;
    let ls = [16usize, 32, 64, 128];
    let mut sites = Vec::new();
    let mut m2 = Vec::new();
    for &l in &ls {
        let mu = SpectralMeasure::new(&spec, l, &Vertex::origin(2, 0))?;
        sites.push(mu.sites() as f64);
        m2.push(mu.moment(2));
    }
    let (slope, _) = log_fit(&sites, &m2);
    let want = 1.0 / (4.0 * PI);
    let rel = (slope - want).abs() / want;
    Ok((rel <= 0.05, format!("slope {slope:.5} vs 1/4π = {want:.5} ({:.2}% off)", 100.0 * rel)))
}

fn cubic_dynamics(traces: &mut Vec<EvolutionTrace>) -> Result<(bool, String)> {
    let inst = staggered(3, 4, 1.0)?;
    let (pred, trace) = simulate_matching(&inst, &SearchOptions::default(), None)?;
    let (t, peak) = first_peak(&trace);
    let want = 1.0 / (8.0 * 0.2527);
    let overlap_ok = (peak - want).abs() <= 0.2 * want;
    let time_ok = (t - pred.run_time).abs() <= 0.15 * pred.run_time;
    traces.push(trace);
    Ok((
        overlap_ok && time_ok,
        format!(
            "first max {peak:.4} vs {want:.4} ±20% [{}], at t = {t:.3} vs π/(2E+) = {:.3} ±15% [{}]",
            if overlap_ok { "ok" } else { "out" },
            pred.run_time,
            if time_ok { "ok" } else { "out" }
        ),
    ))
}

fn square_scaling(traces: &mut Vec<EvolutionTrace>) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    // Vertex side L = 2l.
    for l in [8usize, 16, 32, 64] {
        let inst = staggered(2, l, 1.0)?;
        let (pred, trace) = simulate_matching(&inst, &SearchOptions::default(), None)?;
        let scaled = trace.max_overlap_sq() * (pred.sites as f64).ln();
        ok &= (0.3..=3.0).contains(&scaled);
        parts.push(format!("L={}: {scaled:.3}", 2 * l));
        traces.push(trace);
    }
    Ok((ok, format!("max overlapSq·ln N: {} (band [0.3, 3])", parts.join(", "))))
}

fn fine_tuning(traces: &mut Vec<EvolutionTrace>) -> Result<(bool, String)> {
    let l = 8;
    let base = staggered(3, l, 1.0)?;
    let mu = SpectralMeasure::new(&base.spec, l, &base.marked)?;
    let sqrt_n = (mu.n as f64).sqrt();
    let near = gamma_analysis(&mu, 1.0 + 0.2 / sqrt_n)?;
    let closed_ok = near.relative_error <= 0.01;

    let far_gamma = 1.0 + 10.0 / sqrt_n;
    let far = staggered(3, l, far_gamma)?;
    let opts = SearchOptions::default();
    let t_base = simulate_matching(&base, &opts, None)?.0.run_time;
    let t_far = simulate_matching(&far, &SearchOptions { points: 2, ..opts }, None)?.0.run_time;
    let span = 2.0 * t_base.max(t_far);
    let (_, tr1) = simulate_matching(&base, &opts, Some(span))?;
    let (_, tr2) = simulate_matching(&far, &opts, Some(span))?;
    let (o1, o2) = (tr1.max_overlap_sq(), tr2.max_overlap_sq());
    let max_succ = |t: &EvolutionTrace| t.success_prob.iter().copied().fold(0.0, f64::max);
    let (s1, s2) = (max_succ(&tr1), max_succ(&tr2));
    let detuned_ok = o2 < 0.5 * o1;
    traces.push(tr1);
    traces.push(tr2);
    Ok((
        closed_ok && detuned_ok,
        format!(
            "closed form off by {:.3}% at γ = {:.4}; max overlapSq {o1:.4} (γ=1) -> {o2:.4} (γ = {far_gamma:.4}), \
             success prob {s1:.4} -> {s2:.4}",
            100.0 * near.relative_error,
            near.gamma
        ),
    ))
}

fn time_exponent(traces: &mut Vec<EvolutionTrace>) -> Result<(bool, String)> {
    let mut xs = Vec::new();
    let mut ts = Vec::new();
    for l in [4usize, 6, 8] {
        let inst = staggered(3, l, 1.0)?;
        let (pred, trace) = simulate_matching(&inst, &SearchOptions::default(), None)?;
        xs.push(pred.n as f64 * pred.i2);
        ts.push(first_peak(&trace).0);
        traces.push(trace);
    }
    let (p, _) = power_fit(&xs, &ts);
    Ok(((p - 0.5).abs() <= 0.05, format!("t_first ∝ (n·I2)^{p:.4}, times {ts:.3?}")))
}

fn hygiene(traces: &[EvolutionTrace]) -> (bool, String) {
    let mut checks = Vec::new();
    for (name, l) in [("staggered-hypercubic-2", 16), ("staggered-hypercubic-3", 4), ("honeycomb", 12), ("kagome", 12)] {
        checks.extend(propagation_hygiene(&builtin(name).expect("built-in"), l, 80));
    }
    let drift = traces.iter().map(|t| t.max_norm_drift()).fold(0.0, f64::max);
    checks.push(Check::new("norm over acceptance traces", drift, 1e-9, ""));
    let (ok, detail) = summarize(&checks);
    (ok, format!("{detail}; max norm drift over {} simulated traces {drift:.2e}", traces.len()))
}

fn main() -> ExitCode {
    let mut traces = Vec::new();
    let mut out: Vec<(&'static str, bool)> = Vec::new();
    let mut record = |id: &'static str, r: Result<(bool, String)>| {
        let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("{} criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
        out.push((id, passed));
    };

    record("1 (I2 table)", table_one());
    record("2 (kagome I1)", kagome_i1());
    record("3 (2D log law)", log_law());
    record("4 (8x8x8 dynamics)", cubic_dynamics(&mut traces));
    record("5 (2D scaling)", square_scaling(&mut traces));
    record("6 (resolvent vs dense)", {
        let c = resolvent_equivalence(&VerifyOptions { seed: 2024, resolvent_samples: 32 });
        Ok((c.passed, format!("{}, worst {:.2e}", c.detail, c.worst)))
    });
    record("7 (roots are eigenvalues)", {
        let checks: Vec<Check> = small_cases()
            .into_iter()
            .flat_map(|(spec, ls)| roots_are_eigenvalues(&spec, ls[0].max(4)))
            .collect();
        Ok(summarize(&checks))
    });
    record("8 (block structure)", {
        let mut checks: Vec<Check> = small_cases()
            .into_iter()
            .map(|(spec, ls)| block_structure(&spec, ls[0]))
            .collect();
        checks.extend((1..=4).map(|d| staggered_square(d, 32, 11 + d as u64)));
        Ok(summarize(&checks))
    });
    record("9 (Dirac detection)", Ok(summarize(&dirac_detection())));
    record("10 (fine tuning)", fine_tuning(&mut traces));
    record("T (time exponent)", time_exponent(&mut traces));
    record("11 (propagation hygiene)", Ok(hygiene(&traces)));

    let failed: Vec<&str> = out.iter().filter(|o| !o.1).map(|o| o.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        out.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join("; ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
