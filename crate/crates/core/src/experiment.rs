//! Configuration-driven experiments: reference solve, multiscale solve,
//! error report and on-disk artifacts.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! method = "melod"        # fem | lod | melod
//! k = 2
//! tau = 0.02
//! n_steps = 10
//! seed = 0                # added to every generator seed below
//!
//! [grid]
//! fine_level = 6
//! coarse_level = 3
//!
//! [problem]
//! kind = "test2"
//!
//! [coefficients.lambda]
//! kind = "periodic"
//! cells_per_side = 16
//! inclusion_fraction = 0.5
//! background = 1.0
//! contrast = 1000.0
//! # ... mu, kappa and alpha likewise
//! ```

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{self, BlockSystem};
use crate::coeffs::{CoefficientField, CoefficientSpecs, FieldSpec};
use crate::fem::{self, Trajectory};
use crate::grid::{build_nested_grid, NestedGrid, MAX_LEVEL};
use crate::metrics::{self, ErrorMeta, ErrorReport};
use crate::mslod::{self, Method};
use crate::msstepper;
use crate::problem::{Problem, ProblemSpec};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub fine_level: u32,
    pub coarse_level: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Fem,
    Lod,
    Melod,
}

impl MethodChoice {
    pub fn multiscale(self) -> Option<Method> {
        match self {
            MethodChoice::Fem => None,
            MethodChoice::Lod => Some(Method::Lod),
            MethodChoice::Melod => Some(Method::MeLod),
        }
    }
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodChoice::Fem => "fem",
            MethodChoice::Lod => "lod",
            MethodChoice::Melod => "melod",
        })
    }
}

fn default_k() -> usize {
    2
}

fn default_gamma() -> f64 {
    1.0
}

fn default_tau() -> f64 {
    0.02
}

fn default_steps() -> usize {
    10
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub method: MethodChoice,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_gamma")]
    pub gamma1: f64,
    #[serde(default = "default_gamma")]
    pub gamma2: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    pub coefficients: CoefficientSpecs,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Dump every time level of the reference and multiscale solutions.
    #[serde(default = "default_true")]
    pub write_trajectories: bool,
}

/// A list of experiments, written as `[[experiment]]` tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub experiment: Vec<ExperimentConfig>,
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configurations always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let GridConfig {
            fine_level,
            coarse_level,
        } = self.grid;
        if coarse_level < 1 || coarse_level > fine_level || fine_level > MAX_LEVEL {
            return Err(Error::InvalidGridLevels {
                fine: fine_level,
                coarse: coarse_level,
            });
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidTimeStep(self.tau));
        }
        let ok = |g: f64| g > 0.0 && g <= 1.0;
        if !(ok(self.gamma1) && ok(self.gamma2)) {
            return Err(Error::InvalidGamma(self.gamma1, self.gamma2));
        }
        for spec in self.specs().iter() {
            spec.validate()?;
        }
        Problem::from_spec(&self.problem)?;
        Ok(())
    }

    fn specs(&self) -> [&FieldSpec; 4] {
        let c = &self.coefficients;
        [&c.lambda, &c.mu, &c.kappa, &c.alpha]
    }

    /// Coefficient specs with `seed` added to every generator seed.
    pub fn seeded_coefficients(&self) -> CoefficientSpecs {
        let shift = |s: &FieldSpec| match s.clone() {
            FieldSpec::LogGaussian { sigma2, ell, b0, seed } => FieldSpec::LogGaussian {
                sigma2,
                ell,
                b0,
                seed: seed.wrapping_add(self.seed),
            },
            FieldSpec::HighContrast {
                pattern_seed,
                contrast,
                background,
            } => FieldSpec::HighContrast {
                pattern_seed: pattern_seed.wrapping_add(self.seed),
                contrast,
                background,
            },
            other => other,
        };
        let c = &self.coefficients;
        CoefficientSpecs {
            lambda: shift(&c.lambda),
            mu: shift(&c.mu),
            kappa: shift(&c.kappa),
            alpha: shift(&c.alpha),
        }
    }

    pub fn meta(&self) -> ErrorMeta {
        ErrorMeta {
            method: self.method.to_string(),
            k: if self.method == MethodChoice::Fem { 0 } else { self.k },
            contrast: self.coefficients.nominal_contrast(),
            seed: self.seed,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text, origin)?;
        for (i, e) in cfg.experiment.iter().enumerate() {
            e.validate()
                .map_err(|err| Error::Config(format!("{origin}: experiment {}: {err}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configurations always serialize")
    }
}

/// Everything an experiment computes, kept in memory.
#[derive(Debug)]
pub struct Outcome {
    pub config: ExperimentConfig,
    pub grid: NestedGrid,
    pub field: CoefficientField,
    pub system: BlockSystem,
    pub reference: Trajectory,
    /// Equal to `reference` for `method = "fem"`.
    pub solution: Trajectory,
    pub basis: Option<mslod::MultiscaleBasis>,
    pub report: ErrorReport,
}

/// Runs an experiment without touching the file system. `workers` bounds
/// the threads used for basis construction.
pub fn compute(config: &ExperimentConfig, workers: usize) -> Result<Outcome> {
    config.validate()?;
    let grid = build_nested_grid(config.grid.fine_level, config.grid.coarse_level)?;
    let field = CoefficientField::generate(&grid, &config.seeded_coefficients())?;
    let system = assembly::assemble_block_system(&grid, &field)?;
    let problem = Problem::from_spec(&config.problem)?;
    let mut reference = fem::run(&grid, &system, &problem, config.tau, config.n_steps)?;
    reference.meta.coefficient_provenance = field.provenance.clone();
    let (solution, basis) = match config.method.multiscale() {
        None => (reference.clone(), None),
        Some(method) => {
            let basis = mslod::build_basis_with_workers(
                &grid,
                &system,
                method,
                config.k,
                config.gamma1,
                config.gamma2,
                workers,
            )?;
            let (a, b) = assembly::compose_time_operators(&system, config.tau)?;
            let reduced = msstepper::reduce(&basis, &a, &b)?;
            let mut sol = msstepper::ms_run(&reduced, &grid, &system, &problem, config.tau, config.n_steps)?;
            sol.meta.coefficient_provenance = field.provenance.clone();
            (sol, Some(basis))
        }
    };
    let report = metrics::energy_errors(&solution, &reference, &system, None)?.with_meta(config.meta());
    Ok(Outcome {
        config: config.clone(),
        grid,
        field,
        system,
        reference,
        solution,
        basis,
        report,
    })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

impl Outcome {
    /// Writes `errors.csv`, `fields.csv` and, if enabled, the trajectories
    /// under `reference/` and `solution/`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = create(&dir.join("errors.csv"))?;
        metrics::write_errors_csv(std::slice::from_ref(&self.report), &mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("fields.csv"))?;
        self.field.write_csv(&self.grid, &mut w)?;
        w.flush()?;
        if self.config.write_trajectories {
            fem::write_trajectory(&self.grid.fine, &self.reference, &dir.join("reference"), "step")?;
            if self.basis.is_some() {
                fem::write_trajectory(&self.grid.fine, &self.solution, &dir.join("solution"), "step")?;
            }
        }
        Ok(())
    }
}

/// Computes an experiment and writes its artifacts to `out_dir`, falling
/// back to the configured `output_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>, workers: usize) -> Result<ErrorReport> {
    let outcome = compute(config, workers)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory given".into()))?;
    outcome.write_artifacts(&dir)?;
    Ok(outcome.report)
}

/// Runs independent experiments and returns their reports in input order.
/// A failing experiment yields an `Err` in its slot and does not affect the
/// others.
pub fn sweep(configs: &[ExperimentConfig], workers: usize) -> Vec<Result<ErrorReport>> {
    par::map(workers, configs, |c| compute(c, 1).map(|o| o.report))
}

/// Aggregated CSV of the successful experiments, in input order.
pub fn sweep_csv(results: &[Result<ErrorReport>]) -> String {
    let ok: Vec<ErrorReport> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let mut buf = Vec::new();
    metrics::write_errors_csv(&ok, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Named experiment families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Log-Gaussian random coefficients, convergence in `H`.
    Test1,
    /// Periodic inclusions with contrast 10³, varying patch size.
    Test2,
    /// High-contrast inclusions, varying contrast.
    Test3,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test1" => Ok(Preset::Test1),
            "test2" => Ok(Preset::Test2),
            "test3" => Ok(Preset::Test3),
            _ => Err(Error::Config(format!("unknown preset {s:?}, expected test1, test2 or test3"))),
        }
    }
}

/// Background values of `lambda`, `mu`, `kappa`, `alpha`.
pub const BACKGROUND: [f64; 4] = [1.0, 1.0, 1.0, 1.0];

/// Variance and correlation length of the log-Gaussian fields.
pub const GP_SIGMA2: f64 = 1.0;
pub const GP_ELL: f64 = 0.1;

/// Periodic microstructure: cells per side and inclusion side fraction.
pub const PERIODIC_CELLS: usize = 16;
pub const PERIODIC_FRACTION: f64 = 0.5;

pub const PERIODIC_CONTRAST: f64 = 1e3;

/// Contrasts of the robustness sweep at desk and paper scale.
pub const DESK_CONTRASTS: [f64; 6] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6];
pub const PAPER_CONTRASTS: [f64; 8] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];

/// Patch size and `gamma2` of the test3 family. With `gamma2 = 1` the
/// thermal row of the corrector operator picks up the rough `A3` coupling
/// and ME-LOD degrades as the contrast grows.
pub const TEST3_K: usize = 5;
pub const TEST3_GAMMA2: f64 = 1e-4;

fn specs_from(make: impl Fn(usize, f64) -> FieldSpec) -> CoefficientSpecs {
    CoefficientSpecs {
        lambda: make(0, BACKGROUND[0]),
        mu: make(1, BACKGROUND[1]),
        kappa: make(2, BACKGROUND[2]),
        alpha: make(3, BACKGROUND[3]),
    }
}

/// Log-Gaussian specs whose fields have mean equal to the backgrounds;
/// coefficient `i` uses seed `seed + i`.
pub fn log_gaussian_specs(seed: u64) -> CoefficientSpecs {
    specs_from(|i, bg| FieldSpec::LogGaussian {
        sigma2: GP_SIGMA2,
        ell: GP_ELL,
        b0: bg.ln() - 0.5 * GP_SIGMA2,
        seed: seed + i as u64,
    })
}

pub fn periodic_specs(contrast: f64) -> CoefficientSpecs {
    specs_from(|_, bg| FieldSpec::Periodic {
        cells_per_side: PERIODIC_CELLS,
        inclusion_fraction: PERIODIC_FRACTION,
        background: bg,
        contrast,
    })
}

/// Inclusion specs sharing one geometry across all four coefficients.
pub fn inclusion_specs(pattern_seed: u64, contrast: f64) -> CoefficientSpecs {
    specs_from(|_, bg| FieldSpec::HighContrast {
        pattern_seed,
        contrast,
        background: bg,
    })
}

fn fine_level(paper_scale: bool) -> u32 {
    if paper_scale {
        7
    } else {
        6
    }
}

/// The single representative configuration of a preset.
pub fn preset(p: Preset, paper_scale: bool) -> ExperimentConfig {
    let fine = fine_level(paper_scale);
    let base = |coarse: u32, k: usize, coefficients: CoefficientSpecs, problem: ProblemSpec| ExperimentConfig {
        grid: GridConfig {
            fine_level: fine,
            coarse_level: coarse,
        },
        method: MethodChoice::Melod,
        k,
        gamma1: 1.0,
        gamma2: 1.0,
        tau: 0.02,
        n_steps: 10,
        coefficients,
        problem,
        seed: 0,
        output_dir: None,
        write_trajectories: true,
    };
    match p {
        Preset::Test1 => base(3, 2, log_gaussian_specs(0), ProblemSpec::Test1 {}),
        Preset::Test2 => base(if paper_scale { 4 } else { 3 }, 2, periodic_specs(PERIODIC_CONTRAST), ProblemSpec::Test2 {}),
        Preset::Test3 => ExperimentConfig {
            gamma2: TEST3_GAMMA2,
            ..base(if paper_scale { 4 } else { 3 }, TEST3_K, inclusion_specs(0, 1e5), ProblemSpec::Test3 {})
        },
    }
}

/// The family of configurations behind a preset's table or plot.
///
/// - test1: ME-LOD for coarse levels 2, 3, 4 (5 at paper scale) with
///   `k = coarse_level - 1`.
/// - test2: LOD and ME-LOD for `k = 2, 3, 4` (up to 5 at paper scale).
/// - test3: LOD and ME-LOD over the contrast list.
pub fn preset_sweep(p: Preset, paper_scale: bool) -> Vec<ExperimentConfig> {
    let one = preset(p, paper_scale);
    let both = |c: &ExperimentConfig| {
        [MethodChoice::Melod, MethodChoice::Lod].map(|m| ExperimentConfig {
            method: m,
            ..c.clone()
        })
    };
    match p {
        Preset::Test1 => {
            let top = if paper_scale { 5 } else { 4 };
            (2..=top)
                .map(|coarse| ExperimentConfig {
                    grid: GridConfig {
                        coarse_level: coarse,
                        ..one.grid
                    },
                    k: coarse as usize - 1,
                    ..one.clone()
                })
                .collect()
        }
        Preset::Test2 => {
            let top = if paper_scale { 5 } else { 4 };
            (2..=top)
                .flat_map(|k| both(&ExperimentConfig { k, ..one.clone() }))
                .collect()
        }
        Preset::Test3 => {
            let contrasts: &[f64] = if paper_scale { &PAPER_CONTRASTS } else { &DESK_CONTRASTS };
            contrasts
                .iter()
                .flat_map(|&c| {
                    both(&ExperimentConfig {
                        coefficients: inclusion_specs(0, c),
                        ..one.clone()
                    })
                })
                .collect()
        }
    }
}
