//! JSON run configuration.
//!
//! ```json
//! {
//!   "domain": {"kind": "disk", "center": [0, 0], "radius": 1},
//!   "resolution": 17,
//!   "exponents": {"s": 0.55, "s1": 0.6, "s2": 0.5, "p": 3, "q": 2.5},
//!   "f": {"gamma": 0.3, "c1": 1, "c2": 1, "r": 1.2, "family": "singular"},
//!   "g": {"c3": 0.1, "zeta": 1.5},
//!   "solver": {"tolerance": 1e-10, "outer": {"theta": 0.5, "tolerance": 1e-9}}
//! }
//! ```
//!
//! Omitted fields take defaults; each default is logged when applied.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{BuildOptions, Instance, OuterOptions};
use crate::frozen::{Method, MinimizerOptions};
use crate::gagliardo::DEFAULT_NODE_CAP;
use crate::grid::{build_grid, Domain};
use crate::reaction::{check_hypotheses, ConvectiveReaction, HypothesisReport, ProblemExponents, ReactionFamily, SingularReaction, Weight};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExponents {
    s: f64,
    s1: f64,
    s2: f64,
    p: f64,
    q: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReaction {
    gamma: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    r: Option<f64>,
    family: Option<ReactionFamily>,
    weight: Option<Weight>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConvection {
    c3: Option<f64>,
    zeta: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOuter {
    theta: Option<f64>,
    min_theta: Option<f64>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    ball_monitor: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<Method>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    armijo: Option<f64>,
    shrink: Option<f64>,
    initial_step: Option<f64>,
    epsilon: Option<f64>,
    node_cap: Option<usize>,
    padding: Option<usize>,
    outer: Option<RawOuter>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: Domain,
    resolution: Option<usize>,
    exponents: RawExponents,
    f: Option<RawReaction>,
    g: Option<RawConvection>,
    solver: Option<RawSolver>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
}

/// Fully populated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: Domain,
    pub resolution: usize,
    pub exponents: ProblemExponents,
    pub f: SingularReaction,
    pub g: ConvectiveReaction,
    pub minimizer: MinimizerOptions,
    pub outer: OuterOptions,
    pub epsilon: Option<f64>,
    pub node_cap: usize,
    pub padding: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    /// `field = value` for every default that was applied.
    #[serde(skip)]
    pub defaults_applied: Vec<String>,
}

fn fill<T: std::fmt::Debug>(slot: Option<T>, default: T, name: &str, log: &mut Vec<String>) -> T {
    match slot {
        Some(v) => v,
        None => {
            let line = format!("{name} = {default:?}");
            log::info!("default applied: {line}");
            log.push(line);
            default
        }
    }
}

fn positive(value: f64, field: &str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {value}")))
    }
}

impl RunConfig {
    /// Parses and fills defaults; reports schema errors with their field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::config(if field == "." { "<root>".to_string() } else { field }, e.inner().to_string())
        })?;
        Self::from_raw(raw)
    }

    /// Reads a file and applies [`RunConfig::from_json`]; hypotheses are not checked.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let mut log = Vec::new();
        raw.domain.validate().map_err(|e| Error::config("domain", e.to_string()))?;
        let dim = raw.domain.dim();
        let resolution = fill(raw.resolution, 17, "resolution", &mut log);
        if resolution < 3 {
            return Err(Error::config("resolution", "must be at least 3"));
        }
        let x = raw.exponents;
        for (v, name) in [(x.s, "exponents.s"), (x.s1, "exponents.s1"), (x.s2, "exponents.s2"), (x.p, "exponents.p"), (x.q, "exponents.q")] {
            positive(v, name)?;
        }
        let exponents = ProblemExponents { dim, s: x.s, s1: x.s1, s2: x.s2, p: x.p, q: x.q };

        let rf = raw.f.unwrap_or_default();
        let f = SingularReaction {
            gamma: fill(rf.gamma, 0.3, "f.gamma", &mut log),
            c1: fill(rf.c1, 1.0, "f.c1", &mut log),
            c2: fill(rf.c2, 1.0, "f.c2", &mut log),
            r: fill(rf.r, 0.5 * x.q, "f.r", &mut log),
            family: fill(rf.family, ReactionFamily::Singular, "f.family", &mut log),
            weight: fill(rf.weight, Weight::Uniform, "f.weight", &mut log),
        };
        f.weight.validate()?;
        let rg = raw.g.unwrap_or_default();
        let g = ConvectiveReaction {
            c3: fill(rg.c3, 0.1, "g.c3", &mut log),
            zeta: fill(rg.zeta, 0.5 * x.p, "g.zeta", &mut log),
        };

        let rs = raw.solver.unwrap_or_default();
        let base = MinimizerOptions::default();
        let default_tol = if dim == 1 { 1e-6 } else { 1e-5 };
        let minimizer = MinimizerOptions {
            method: fill(rs.method, base.method, "solver.method", &mut log),
            max_iterations: fill(rs.max_iterations, base.max_iterations, "solver.max_iterations", &mut log),
            tolerance: fill(rs.tolerance, default_tol, "solver.tolerance", &mut log),
            armijo: fill(rs.armijo, base.armijo, "solver.armijo", &mut log),
            shrink: fill(rs.shrink, base.shrink, "solver.shrink", &mut log),
            initial_step: fill(rs.initial_step, base.initial_step, "solver.initial_step", &mut log),
        };
        minimizer.validate()?;
        let ro = rs.outer.unwrap_or_default();
        let ob = OuterOptions::default();
        let outer = OuterOptions {
            theta: fill(ro.theta, ob.theta, "solver.outer.theta", &mut log),
            min_theta: fill(ro.min_theta, ob.min_theta, "solver.outer.min_theta", &mut log),
            tolerance: fill(ro.tolerance, ob.tolerance, "solver.outer.tolerance", &mut log),
            max_iterations: fill(ro.max_iterations, ob.max_iterations, "solver.outer.max_iterations", &mut log),
            ball_monitor: fill(ro.ball_monitor, ob.ball_monitor, "solver.outer.ball_monitor", &mut log),
        };
        outer.validate()?;
        if let Some(eps) = rs.epsilon {
            positive(eps, "solver.epsilon")?;
        }
        let node_cap = fill(rs.node_cap, DEFAULT_NODE_CAP, "solver.node_cap", &mut log);
        let padding = fill(rs.padding, 2, "solver.padding", &mut log);
        if padding < 1 {
            return Err(Error::config("solver.padding", "must be at least 1"));
        }
        let seed = fill(raw.seed, 0, "seed", &mut log);
        Ok(Self {
            domain: raw.domain,
            resolution,
            exponents,
            f,
            g,
            minimizer,
            outer,
            epsilon: rs.epsilon,
            node_cap,
            padding,
            seed,
            output_dir: raw.output_dir,
            cache_dir: raw.cache_dir,
            defaults_applied: log,
        })
    }

    pub fn hypotheses(&self) -> HypothesisReport {
        check_hypotheses(&self.exponents, &self.f, &self.g)
    }

    /// Cache directory: the config entry, else `FRACSOLVE_CACHE`.
    pub fn effective_cache_dir(&self) -> Option<PathBuf> {
        self.cache_dir
            .clone()
            .or_else(|| std::env::var_os("FRACSOLVE_CACHE").map(PathBuf::from))
    }

    /// Builds the grid, operators and sub-solution for this configuration.
    pub fn build_instance(&self) -> Result<Instance> {
        let grid = build_grid(&self.domain, self.resolution)?;
        if grid.interior_count() > self.node_cap {
            return Err(Error::MemoryBudget { nodes: grid.interior_count(), cap: self.node_cap });
        }
        Instance::build(
            grid,
            self.exponents,
            self.f.clone(),
            self.g,
            self.minimizer,
            self.outer,
            &BuildOptions {
                node_cap: Some(self.node_cap),
                padding: Some(self.padding),
                epsilon: self.epsilon,
                cache_dir: self.effective_cache_dir(),
            },
        )
    }
}

/// Reads, fills defaults, and rejects configurations that violate a
/// required hypothesis.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let cfg = RunConfig::from_file(path)?;
    let report = cfg.hypotheses();
    for w in report.warnings() {
        log::warn!("{}: {}", w.name, w.detail);
    }
    report.into_result()?;
    Ok(cfg)
}
