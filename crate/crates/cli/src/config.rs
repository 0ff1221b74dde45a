use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use diracwalk::dynamics::{OracleKind, PropagatorKind};
use diracwalk::lattice::{builtin, LatticeFile};
use diracwalk::{LatticeSpec, Vertex};

use crate::CliError;

/// Experiment file. Every key is optional here; flags override the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lattice: Option<String>,
    pub l: Option<usize>,
    pub ladder: Option<Vec<usize>>,
    pub marked: Option<String>,
    pub oracle: Option<String>,
    pub gamma: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub time: Option<TimeSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub points: Option<usize>,
    pub horizon: Option<f64>,
    pub propagator: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML experiment file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in lattice name or path to a lattice TOML file.
    #[arg(long, global = true)]
    pub lattice: Option<String>,
    /// Cells per axis.
    #[arg(long, global = true)]
    pub l: Option<usize>,
    /// Comma-separated list of l values.
    #[arg(long, global = true, value_delimiter = ',')]
    pub ladder: Option<Vec<usize>>,
    /// Marked vertex as `x1,..,xd:alpha`, or `random`.
    #[arg(long, global = true)]
    pub marked: Option<String>,
    /// `auto`, `projector`, `onsite` or `onsite:<I1>`.
    #[arg(long, global = true)]
    pub oracle: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Time-grid points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// The grid spans `[0, horizon·T]`.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// `auto`, `dense` or `krylov`.
    #[arg(long, global = true)]
    pub propagator: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarkedChoice {
    Vertex(Vertex),
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleChoice {
    Auto,
    Projector,
    /// `None` takes `I1` from the finite-size first moment.
    OnSite(Option<f64>),
}

/// Fully defaulted configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Absent only for commands that do not need a lattice.
    pub spec: Option<LatticeSpec>,
    pub l: usize,
    pub ladder: Option<Vec<usize>>,
    pub marked: MarkedChoice,
    pub oracle: OracleChoice,
    pub gamma: f64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub seed: u64,
    pub points: usize,
    pub horizon: f64,
    pub propagator: PropagatorKind,
}

pub const DEFAULT_L: usize = 8;
pub const DEFAULT_SEED: u64 = 1;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn parse_marked(s: &str, d: usize) -> Result<MarkedChoice, CliError> {
    if s.trim() == "random" {
        return Ok(MarkedChoice::Random);
    }
    let (cell, alpha) = s
        .split_once(':')
        .ok_or_else(|| bad(format!("marked vertex `{s}` must look like x1,..,xd:alpha")))?;
    let cell: Vec<usize> = cell
        .split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(format!("marked cell `{cell}`: {e}")))?;
    if cell.len() != d {
        return Err(bad(format!("marked cell has {} coordinates, lattice has d = {d}", cell.len())));
    }
    let alpha = alpha.trim().parse().map_err(|e| bad(format!("marked site `{alpha}`: {e}")))?;
    Ok(MarkedChoice::Vertex(Vertex::new(cell, alpha)))
}

pub fn parse_oracle(s: &str) -> Result<OracleChoice, CliError> {
    match s.trim() {
        "auto" => Ok(OracleChoice::Auto),
        "projector" => Ok(OracleChoice::Projector),
        "onsite" => Ok(OracleChoice::OnSite(None)),
        other => match other.strip_prefix("onsite:") {
            Some(v) => v
                .parse::<f64>()
                .map(|x| OracleChoice::OnSite(Some(x)))
                .map_err(|e| bad(format!("oracle I1 `{v}`: {e}"))),
            None => Err(bad(format!("unknown oracle `{other}`"))),
        },
    }
}

pub fn parse_propagator(s: &str) -> Result<PropagatorKind, CliError> {
    match s.trim() {
        "auto" => Ok(PropagatorKind::Auto),
        "dense" => Ok(PropagatorKind::Dense),
        "krylov" => Ok(PropagatorKind::Krylov),
        other => Err(bad(format!("unknown propagator `{other}`"))),
    }
}

/// Built-in name first, then a lattice file (relative paths resolve against
/// `base`, the config file's directory).
pub fn resolve_lattice(name: &str, base: &Path) -> Result<LatticeSpec, CliError> {
    if let Ok(spec) = builtin(name) {
        return Ok(spec);
    }
    let path = base.join(name);
    if !path.exists() {
        return Err(bad(format!("`{name}` is neither a built-in lattice nor a file")));
    }
    Ok(LatticeFile::load(&path)?.into_spec()?)
}

impl OracleChoice {
    /// The explicit oracle, or `None` to select the case automatically.
    pub fn resolve(self) -> Option<OracleKind> {
        match self {
            OracleChoice::Auto | OracleChoice::OnSite(None) => None,
            OracleChoice::Projector => Some(OracleKind::BipartiteProjector),
            OracleChoice::OnSite(Some(i1)) => Some(OracleKind::OnSitePotential { i1 }),
        }
    }
}

impl ExperimentConfig {
    pub fn spec(&self) -> Result<&LatticeSpec, CliError> {
        self.spec
            .as_ref()
            .ok_or_else(|| bad("no lattice given (use --lattice or `lattice = ...`)"))
    }

    pub fn load(flags: &Flags) -> Result<Self, CliError> {
        let (file, base) = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| bad(format!("cannot read {}: {e}", p.display())))?;
                let f: ConfigFile =
                    toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", p.display())))?;
                (f, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        let time = file.time.clone().unwrap_or_default();
        let spec = match (&flags.lattice, &file.lattice) {
            (Some(x), _) => Some(resolve_lattice(x, Path::new(""))?),
            (None, Some(x)) => Some(resolve_lattice(x, &base)?),
            (None, None) => None,
        };
        let d = spec.as_ref().map_or(0, |s| s.d);
        let l = flags.l.or(file.l).unwrap_or(DEFAULT_L);
        if l == 0 {
            return Err(bad("l must be at least 1"));
        }
        let ladder = flags.ladder.clone().or(file.ladder);
        if let Some(ls) = &ladder {
            if ls.is_empty() || ls[0] == 0 || ls.windows(2).any(|w| w[1] <= w[0]) {
                return Err(bad("ladder must be a nonempty increasing list"));
            }
        }
        let marked = match flags.marked.as_ref().or(file.marked.as_ref()) {
            Some(s) if spec.is_some() => parse_marked(s, d)?,
            _ => MarkedChoice::Vertex(Vertex::origin(d, 0)),
        };
        let oracle = match flags.oracle.as_ref().or(file.oracle.as_ref()) {
            Some(s) => parse_oracle(s)?,
            None => OracleChoice::Auto,
        };
        let gamma = flags.gamma.or(file.gamma).unwrap_or(1.0);
        if !gamma.is_finite() {
            return Err(bad("gamma must be finite"));
        }
        let points = flags.points.or(time.points).unwrap_or(200);
        let horizon = flags.horizon.or(time.horizon).unwrap_or(2.0);
        if points < 2 || !(horizon > 0.0) {
            return Err(bad("time grid needs points >= 2 and horizon > 0"));
        }
        let propagator = match flags.propagator.as_ref().or(time.propagator.as_ref()) {
            Some(s) => parse_propagator(s)?,
            None => PropagatorKind::Auto,
        };
        Ok(ExperimentConfig {
            spec,
            l,
            ladder,
            marked,
            oracle,
            gamma,
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            threads: flags.threads.or(file.threads),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            points,
            horizon,
            propagator,
        })
    }
}
