//! Heterogeneous material coefficients, piecewise constant on fine triangles.

use std::io::Write;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::grid::NestedGrid;
use crate::{Error, Result};

/// Generator for one coefficient field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `exp(G)` with `G` Gaussian, mean `b0`, covariance `sigma2 * exp(-|x1-x2|^2 / ell^2)`.
    LogGaussian {
        sigma2: f64,
        ell: f64,
        b0: f64,
        seed: u64,
    },
    /// Square inclusions centred in each of `cells_per_side^2` periodic cells.
    Periodic {
        cells_per_side: usize,
        inclusion_fraction: f64,
        background: f64,
        contrast: f64,
    },
    /// Seeded pattern of separated rectangular inclusions taking the value
    /// `background * contrast`, `background` elsewhere.
    HighContrast {
        pattern_seed: u64,
        contrast: f64,
        #[serde(default = "one")]
        background: f64,
    },
    Constant {
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidFieldSpec(msg));
        match *self {
            FieldSpec::LogGaussian { sigma2, ell, b0, .. } => {
                if !(sigma2 >= 0.0 && sigma2.is_finite()) {
                    return bad(format!("sigma2 must be >= 0, got {sigma2}"));
                }
                if !(ell > 0.0 && ell.is_finite()) {
                    return bad(format!("ell must be > 0, got {ell}"));
                }
                if !b0.is_finite() {
                    return bad("b0 must be finite".into());
                }
            }
            FieldSpec::Periodic {
                cells_per_side,
                inclusion_fraction,
                background,
                contrast,
            } => {
                if cells_per_side == 0 {
                    return bad("cells_per_side must be positive".into());
                }
                if !(inclusion_fraction > 0.0 && inclusion_fraction < 1.0) {
                    return bad(format!("inclusion_fraction must lie in (0,1), got {inclusion_fraction}"));
                }
                check_background_contrast(background, contrast)?;
            }
            FieldSpec::HighContrast {
                contrast, background, ..
            } => check_background_contrast(background, contrast)?,
            FieldSpec::Constant { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return bad(format!("constant value must be positive, got {value}"));
                }
            }
        }
        Ok(())
    }

    /// Nominal max/min ratio of the field (1 for smooth generators).
    pub fn nominal_contrast(&self) -> f64 {
        match *self {
            FieldSpec::Periodic { contrast, .. } | FieldSpec::HighContrast { contrast, .. } => contrast,
            _ => 1.0,
        }
    }

    pub fn generate(&self, grid: &NestedGrid) -> Result<Vec<f64>> {
        self.validate()?;
        match *self {
            FieldSpec::LogGaussian { sigma2, ell, b0, seed } => gen_log_gaussian(grid, sigma2, ell, b0, seed),
            FieldSpec::Periodic {
                cells_per_side,
                inclusion_fraction,
                background,
                contrast,
            } => gen_periodic(grid, cells_per_side, inclusion_fraction, background, contrast),
            FieldSpec::HighContrast {
                pattern_seed,
                contrast,
                background,
            } => Ok(gen_high_contrast(grid, pattern_seed, contrast, background)),
            FieldSpec::Constant { value } => Ok(vec![value; grid.fine.n_triangles()]),
        }
    }
}

fn check_background_contrast(background: f64, contrast: f64) -> Result<()> {
    if !(background > 0.0 && background.is_finite()) {
        return Err(Error::InvalidFieldSpec(format!("background must be positive, got {background}")));
    }
    if !(contrast >= 1.0 && contrast.is_finite()) {
        return Err(Error::InvalidFieldSpec(format!("contrast must be >= 1, got {contrast}")));
    }
    Ok(())
}

/// Side length of the lattice on which Gaussian fields are sampled.
pub fn gp_lattice_side(fine_level: u32) -> usize {
    (1usize << fine_level).min(32)
}

/// Lower Cholesky factor of the squared-exponential covariance on a uniform
/// cell-centred `side x side` lattice. A nugget of `1e-10 * sigma2` is added
/// if the first attempt fails.
pub fn gp_cholesky(side: usize, sigma2: f64, ell: f64) -> Result<Mat<f64>> {
    let n = side * side;
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|p| {
            let (i, j) = (p % side, p / side);
            [(i as f64 + 0.5) / side as f64, (j as f64 + 0.5) / side as f64]
        })
        .collect();
    let cov = Mat::<f64>::from_fn(n, n, |a, b| {
        let dx = pts[a][0] - pts[b][0];
        let dy = pts[a][1] - pts[b][1];
        sigma2 * (-(dx * dx + dy * dy) / (ell * ell)).exp()
    });
    if let Ok(llt) = cov.llt(Side::Lower) {
        return Ok(llt.L().to_owned());
    }
    let nugget = 1e-10 * sigma2;
    let jittered = Mat::<f64>::from_fn(n, n, |a, b| cov[(a, b)] + if a == b { nugget } else { 0.0 });
    jittered
        .llt(Side::Lower)
        .map(|llt| llt.L().to_owned())
        .map_err(|_| Error::CovarianceFactorization(side))
}

/// One draw of the Gaussian field (not exponentiated) on the lattice.
pub fn gp_lattice_sample(chol: &Mat<f64>, b0: f64, seed: u64) -> Vec<f64> {
    let n = chol.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (0..n)
        .map(|i| b0 + (0..=i).map(|j| chol[(i, j)] * z[j]).sum::<f64>())
        .collect()
}

pub fn gen_log_gaussian(grid: &NestedGrid, sigma2: f64, ell: f64, b0: f64, seed: u64) -> Result<Vec<f64>> {
    let nt = grid.fine.n_triangles();
    if sigma2 == 0.0 {
        return Ok(vec![b0.exp(); nt]);
    }
    let side = gp_lattice_side(grid.fine.level);
    let chol = gp_cholesky(side, sigma2, ell)?;
    let g = gp_lattice_sample(&chol, b0, seed);
    Ok((0..nt)
        .map(|t| {
            let c = grid.fine.centroid(t);
            let i = ((c[0] * side as f64) as usize).min(side - 1);
            let j = ((c[1] * side as f64) as usize).min(side - 1);
            g[j * side + i].exp()
        })
        .collect())
}

pub fn gen_periodic(
    grid: &NestedGrid,
    cells_per_side: usize,
    inclusion_fraction: f64,
    background: f64,
    contrast: f64,
) -> Result<Vec<f64>> {
    if cells_per_side == 0 || grid.fine.n % cells_per_side != 0 {
        return Err(Error::InvalidFieldSpec(format!(
            "cells_per_side {cells_per_side} does not divide {}",
            grid.fine.n
        )));
    }
    let c = cells_per_side as f64;
    let half = 0.5 * inclusion_fraction;
    Ok((0..grid.fine.n_triangles())
        .map(|t| {
            let p = grid.fine.centroid(t);
            let lx = (p[0] * c).fract() - 0.5;
            let ly = (p[1] * c).fract() - 0.5;
            if lx.abs() < half && ly.abs() < half {
                background * contrast
            } else {
                background
            }
        })
        .collect())
}

/// Indicator (per fine cell, row-major) of the seeded inclusion pattern.
///
/// Rectangles with sides in `[1/32, 3/32]` are dropped at random positions
/// and kept if they stay `1/64` away from every earlier rectangle, until
/// they cover 20% of the domain. A cell belongs to an inclusion when its
/// centre does, so the geometry is the same on every fine level.
pub fn inclusion_pattern(fine_n: usize, pattern_seed: u64) -> Vec<bool> {
    const GAP: f64 = 1.0 / 64.0;
    let mut rng = ChaCha8Rng::seed_from_u64(pattern_seed);
    let side = Uniform::new(1.0 / 32.0, 3.0 / 32.0).expect("valid range");
    let mut rects: Vec<[f64; 4]> = Vec::new();
    let mut area = 0.0;
    for _ in 0..100_000 {
        if area >= 0.2 {
            break;
        }
        let (w, h) = (rng.sample(side), rng.sample(side));
        let x0 = rng.random::<f64>() * (1.0 - w);
        let y0 = rng.random::<f64>() * (1.0 - h);
        let r = [x0, y0, x0 + w, y0 + h];
        let clear = rects
            .iter()
            .all(|q| r[0] > q[2] + GAP || q[0] > r[2] + GAP || r[1] > q[3] + GAP || q[1] > r[3] + GAP);
        if clear {
            area += w * h;
            rects.push(r);
        }
    }
    let h = 1.0 / fine_n as f64;
    let mut mask = vec![false; fine_n * fine_n];
    for j in 0..fine_n {
        for i in 0..fine_n {
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            mask[j * fine_n + i] = rects.iter().any(|q| x > q[0] && x < q[2] && y > q[1] && y < q[3]);
        }
    }
    mask
}

pub fn gen_high_contrast(grid: &NestedGrid, pattern_seed: u64, contrast: f64, background: f64) -> Vec<f64> {
    let mask = inclusion_pattern(grid.fine.n, pattern_seed);
    (0..grid.fine.n_triangles())
        .map(|t| if mask[t / 2] { background * contrast } else { background })
        .collect()
}

/// `(lambda, mu)` from Young's modulus and Poisson ratio.
pub fn lame_from_young(e: f64, nu: f64) -> (f64, f64) {
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    (lambda, mu)
}

/// Generator specs for all four coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpecs {
    pub lambda: FieldSpec,
    pub mu: FieldSpec,
    pub kappa: FieldSpec,
    pub alpha: FieldSpec,
}

impl CoefficientSpecs {
    pub fn nominal_contrast(&self) -> f64 {
        [&self.lambda, &self.mu, &self.kappa, &self.alpha]
            .iter()
            .map(|s| s.nominal_contrast())
            .fold(1.0, f64::max)
    }
}

/// Per-fine-element `lambda`, `mu`, `kappa`, `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub kappa: Vec<f64>,
    pub alpha: Vec<f64>,
    pub provenance: String,
}

impl CoefficientField {
    pub fn uniform(grid: &NestedGrid, lambda: f64, mu: f64, kappa: f64, alpha: f64) -> Self {
        let n = grid.fine.n_triangles();
        Self {
            lambda: vec![lambda; n],
            mu: vec![mu; n],
            kappa: vec![kappa; n],
            alpha: vec![alpha; n],
            provenance: format!("uniform(lambda={lambda}, mu={mu}, kappa={kappa}, alpha={alpha})"),
        }
    }

    pub fn generate(grid: &NestedGrid, specs: &CoefficientSpecs) -> Result<Self> {
        let field = Self {
            lambda: specs.lambda.generate(grid)?,
            mu: specs.mu.generate(grid)?,
            kappa: specs.kappa.generate(grid)?,
            alpha: specs.alpha.generate(grid)?,
            provenance: format!("{specs:?}"),
        };
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Checks positivity and finiteness. `allow_zero_alpha` admits the
    /// decoupled case `alpha = 0`.
    pub fn validate(&self, n_elements: usize, allow_zero_alpha: bool) -> Result<()> {
        for (name, v) in [
            ("lambda", &self.lambda),
            ("mu", &self.mu),
            ("kappa", &self.kappa),
            ("alpha", &self.alpha),
        ] {
            if v.len() != n_elements {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {} values for {n_elements} elements",
                    v.len()
                )));
            }
            let zero_ok = allow_zero_alpha && name == "alpha";
            if let Some(element) = v
                .iter()
                .position(|&x| !x.is_finite() || x < 0.0 || (x == 0.0 && !zero_ok))
            {
                return Err(Error::NonPositiveCoefficient { name, element });
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, grid: &NestedGrid, mut w: W) -> std::io::Result<()> {
        writeln!(w, "element_index,centroid_x,centroid_y,lambda,mu,kappa,alpha")?;
        for t in 0..self.len() {
            let c = grid.fine.centroid(t);
            writeln!(
                w,
                "{t},{},{},{},{},{},{}",
                c[0], c[1], self.lambda[t], self.mu[t], self.kappa[t], self.alpha[t]
            )?;
        }
        Ok(())
    }
}
