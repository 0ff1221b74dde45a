use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use diracwalk::bloch::{find_dirac_points, verify_assumptions, BandStructure, DiracOptions, DiracSearch};
use diracwalk::dynamics::{
    prepare_with, run_search, OracleKind, SearchOptions, SearchReport, DEFAULT_ENUMERATION_CAP,
};
use diracwalk::lattice::{assemble_sparse, connected_components, AssembleOptions};
use diracwalk::resolvent::{
    default_ladder, extrapolate_sums, lattice_moments, write_moments_csv, write_prediction_csv,
    IntegralOptions, SpectralMeasure,
};
use diracwalk::verify::{run_suite, VerifyOptions};
use diracwalk::{LatticeSpec, Vertex};

use crate::config::{ExperimentConfig, MarkedChoice, OracleChoice};
use crate::{plots, CliError};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let mut f = create(dir, name)?;
    f.write_all(text.as_bytes())?;
    Ok(f.flush()?)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(dir, name, &(text + "\n"))
}

fn dirac_options(cfg: &ExperimentConfig) -> DiracOptions {
    DiracOptions {
        seed: cfg.seed,
        ..DiracOptions::default()
    }
}

pub fn bands(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let bs = BandStructure::compute(spec, cfg.l);
    let mut f = create(&cfg.out, "bands.csv")?;
    bs.write_csv(&mut f)?;
    f.flush()?;
    write_text(&cfg.out, "plot_bands.py", plots::BANDS)?;
    println!(
        "{}: {} momenta x {} bands, min |E| = {:.3e}; wrote {}",
        spec.name,
        bs.momenta.len(),
        bs.r,
        bs.min_abs_energy(),
        cfg.out.join("bands.csv").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Components {
    l: usize,
    count: usize,
    sizes: Vec<usize>,
}

#[derive(Serialize)]
struct DiracOutput<'a> {
    lattice: &'a str,
    search: &'a DiracSearch,
    assumptions: &'a diracwalk::bloch::AssumptionReport,
    components: Components,
}

pub fn dirac(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let opts = dirac_options(cfg);
    let search = find_dirac_points(spec, &opts)?;
    let report = verify_assumptions(spec, &search, &opts);
    let l = search.compatible_size(cfg.l);
    let h = assemble_sparse(&search.shifted(spec), l, AssembleOptions::summing())?;
    let comps = connected_components(&h);
    let components = Components {
        l,
        count: comps.len(),
        sizes: comps.iter().map(Vec::len).collect(),
    };

    println!(
        "{}: {} Dirac point(s), energy shift {:.6}, scan resolution {}",
        spec.name,
        search.points.len(),
        search.energy_shift,
        search.resolution
    );
    for p in &search.points {
        println!(
            "  k = {:.6?}  bands {:?}  slope {:.4}  chi {:.4?}",
            p.k.k, p.band_indices, p.linearity, p.chi
        );
    }
    for c in &report.checks {
        println!("  assumption {} {}: {}", c.index, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    if components.count > 1 {
        println!(
            "  diagnostic: H0 splits into {} connected components at l = {l} (sizes {:?}); \
             the walk cannot reach across them, so search each component separately",
            components.count, components.sizes
        );
    }
    write_json(
        &cfg.out,
        "dirac.json",
        &DiracOutput {
            lattice: &spec.name,
            search: &search,
            assumptions: &report,
            components,
        },
    )?;
    Ok(())
}

fn marked_alpha(cfg: &ExperimentConfig, spec: &LatticeSpec, search: &DiracSearch, l: usize) -> Vertex {
    match &cfg.marked {
        MarkedChoice::Vertex(v) => v.clone(),
        MarkedChoice::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ l as u64);
            let alphas: Vec<usize> = (0..spec.r).filter(|&a| search.chi_total(a) > 1e-12).collect();
            let alpha = alphas[rng.gen_range(0..alphas.len().max(1)).min(alphas.len().saturating_sub(1))];
            let cell: Vec<usize> = (0..spec.d).map(|_| rng.gen_range(0..l)).collect();
            Vertex::new(cell, alpha)
        }
    }
}

pub fn integrals(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let search = find_dirac_points(spec, &dirac_options(cfg))?;
    let shifted = search.shifted(spec);
    let ladder = cfg.ladder.clone().unwrap_or_else(|| default_ladder(spec.d));
    let alpha = match &cfg.marked {
        MarkedChoice::Vertex(v) => v.alpha,
        MarkedChoice::Random => marked_alpha(cfg, spec, &search, ladder[0]).alpha,
    };
    let marked = Vertex::origin(spec.d, alpha);
    let sums = ladder
        .iter()
        .map(|&l| lattice_moments(&shifted, l, &marked, 2))
        .collect::<Result<Vec<_>, _>>()?;
    let mut f = create(&cfg.out, "moments.csv")?;
    write_moments_csv(&sums, &mut f)?;
    f.flush()?;
    write_text(&cfg.out, "plot_moments.py", plots::MOMENTS)?;
    for s in &sums {
        println!(
            "  l = {:4}  N = {:8}  moment1 = {:.10}  moment2 = {:.10}",
            s.l,
            s.n * spec.r,
            s.moment(1).unwrap_or(f64::NAN),
            s.moment(2).unwrap_or(f64::NAN)
        );
    }
    let limits = extrapolate_sums(&shifted, sums, &IntegralOptions::default())?;
    println!(
        "{} (alpha = {alpha}): I1 = {:.6} ± {:.1e}, I2: {}",
        spec.name,
        limits.i1.value,
        limits.i1.uncertainty,
        serde_json::to_string(&limits.i2).unwrap_or_default()
    );
    write_json(&cfg.out, "integrals.json", &limits)?;
    Ok(())
}

#[derive(Serialize)]
struct ScalingRow {
    l: usize,
    sites: usize,
    run_time: f64,
    max_overlap_sq: f64,
    best_success: f64,
    best_time: f64,
    runs: usize,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let opts = dirac_options(cfg);
    let search = find_dirac_points(spec, &opts)?;
    let ls = cfg.ladder.clone().unwrap_or_else(|| vec![cfg.l]);
    let laddered = cfg.ladder.is_some();
    let search_opts = SearchOptions {
        points: cfg.points,
        horizon: cfg.horizon,
        propagator: cfg.propagator,
        enumeration_cap: DEFAULT_ENUMERATION_CAP,
    };
    let mut predictions = Vec::new();
    let mut rows = Vec::new();
    for &l in &ls {
        let marked = marked_alpha(cfg, spec, &search, l);
        let oracle = match cfg.oracle {
            OracleChoice::OnSite(None) => {
                let mu = SpectralMeasure::new(&search.shifted(spec), l, &marked)?;
                Some(OracleKind::OnSitePotential { i1: mu.moment(1) })
            }
            other => other.resolve(),
        };
        let prepared = prepare_with(spec, search.clone(), l, marked, oracle, cfg.gamma, &opts)?;
        let report = run_search(&prepared.instance, &search_opts)?;
        let suffix = if laddered { format!("_l{l}") } else { String::new() };
        write_run(&cfg.out, &suffix, &report)?;
        let p = &report.prediction;
        let matching = report.matching_run.unwrap_or(report.best_run);
        println!(
            "{} l = {l} N = {}: oracle {}, E± = ({:.6}, {:.6}), T = {:.4}; {} runs, best success {:.4} at t = {:.4} \
             (alpha {}), max overlapSq {:.4}, marked vertex {}",
            p.lattice,
            p.sites,
            p.oracle,
            p.e_minus,
            p.e_plus,
            p.run_time,
            report.runs.len(),
            report.best_success,
            report.best_time,
            report.runs[report.best_run].alpha,
            report.runs[matching].max_overlap_sq,
            if report.recovered { "recovered" } else { "not recovered" }
        );
        if let Some(k) = report.amplification_rounds {
            println!("  amplitude amplification: {k} rounds");
        }
        rows.push(ScalingRow {
            l,
            sites: p.sites,
            run_time: p.run_time,
            max_overlap_sq: report.runs[matching].max_overlap_sq,
            best_success: report.best_success,
            best_time: report.best_time,
            runs: report.runs.len(),
        });
        predictions.push(report.prediction);
    }
    let mut f = create(&cfg.out, "predictions.csv")?;
    write_prediction_csv(&predictions, &mut f)?;
    f.flush()?;
    if laddered {
        let mut f = create(&cfg.out, "scaling.csv")?;
        writeln!(f, "l,N,T,maxOverlapSq,bestSuccess,bestTime,runs")?;
        for r in &rows {
            writeln!(
                f,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.l, r.sites, r.run_time, r.max_overlap_sq, r.best_success, r.best_time, r.runs
            )?;
        }
        f.flush()?;
        write_text(&cfg.out, "plot_scaling.py", plots::SCALING)?;
    }
    Ok(())
}

fn write_run(out: &Path, suffix: &str, report: &SearchReport) -> Result<(), CliError> {
    let trace = format!("trace{suffix}.csv");
    let mut f = create(out, &trace)?;
    report.trace.write_csv(&mut f)?;
    f.flush()?;
    let mut f = create(out, &format!("runs{suffix}.csv"))?;
    writeln!(f, "alpha,residue,maxSuccess,maxOverlapSq")?;
    for r in &report.runs {
        let residue: Vec<String> = r.residue.iter().map(usize::to_string).collect();
        writeln!(
            f,
            "{},{},{:.16e},{:.16e}",
            r.alpha,
            residue.join(";"),
            r.max_success,
            r.max_overlap_sq
        )?;
    }
    f.flush()?;
    write_json(out, &format!("summary{suffix}.json"), report)?;
    write_text(
        out,
        &format!("plot_trace{suffix}.py"),
        &plots::trace_script(&trace, report.prediction.run_time),
    )
}

/// Returns whether every check passed.
pub fn verify(cfg: &ExperimentConfig) -> Result<bool, CliError> {
    let report = run_suite(&VerifyOptions {
        seed: cfg.seed,
        ..VerifyOptions::default()
    });
    report.write_text(std::io::stdout().lock())?;
    let mut f = create(&cfg.out, "verify.txt")?;
    report.write_text(&mut f)?;
    f.flush()?;
    let failed = report.failures().count();
    println!(
        "verify: {} checks, {} failed",
        report.checks.len(),
        failed
    );
    Ok(failed == 0)
}
