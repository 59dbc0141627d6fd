//! Browser bindings: coefficient preview, ME-LOD vs LOD error curves and a
//! single multiscale basis function. Grids are capped at fine level 5 so
//! every call stays interactive.

use melod::experiment::{
    compute, inclusion_specs, log_gaussian_specs, periodic_specs, ExperimentConfig, GridConfig, MethodChoice,
};
use melod::grid::{build_nested_grid, Component, Mesh};
use melod::mslod::{build_basis_with_workers, Method};
use melod::problem::ProblemSpec;
use melod::{assembly, coeffs, Error};
use wasm_bindgen::prelude::*;

pub const MAX_FINE_LEVEL: u32 = 5;

/// Piecewise constant data on the triangles of the fine mesh.
#[wasm_bindgen]
pub struct TriangleField {
    coords: Vec<f64>,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl TriangleField {
    /// Vertex coordinates, six numbers `x0 y0 x1 y1 x2 y2` per triangle.
    #[wasm_bindgen(getter)]
    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }

    /// One value per triangle.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}

/// Per-step relative energy errors of both multiscale methods.
#[wasm_bindgen]
pub struct Comparison {
    melod: Vec<f64>,
    lod: Vec<f64>,
}

#[wasm_bindgen]
impl Comparison {
    #[wasm_bindgen(getter)]
    pub fn melod(&self) -> Vec<f64> {
        self.melod.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn lod(&self) -> Vec<f64> {
        self.lod.clone()
    }
}

/// Error type of the plain Rust entry points.
#[derive(Debug)]
pub struct DemoError(pub String);

impl From<Error> for DemoError {
    fn from(e: Error) -> Self {
        DemoError(e.to_string())
    }
}

impl From<DemoError> for JsValue {
    fn from(e: DemoError) -> Self {
        JsValue::from_str(&e.0)
    }
}

fn config(kind: &str, contrast: f64, seed: u64, fine: u32, coarse: u32, k: usize, n_steps: usize) -> Result<ExperimentConfig, DemoError> {
    if fine > MAX_FINE_LEVEL {
        return Err(DemoError(format!("fine level {fine} exceeds the demo limit {MAX_FINE_LEVEL}")));
    }
    let (coefficients, problem, gamma2) = match kind {
        "periodic" => (periodic_specs(contrast), ProblemSpec::Test2 {}, 1.0),
        "inclusions" => (inclusion_specs(seed, contrast), ProblemSpec::Test3 {}, melod::experiment::TEST3_GAMMA2),
        "log-gaussian" => (log_gaussian_specs(seed), ProblemSpec::Test1 {}, 1.0),
        _ => return Err(DemoError(format!("unknown coefficient kind {kind:?}"))),
    };
    let cfg = ExperimentConfig {
        grid: GridConfig { fine_level: fine, coarse_level: coarse },
        method: MethodChoice::Melod,
        k,
        gamma1: 1.0,
        gamma2,
        tau: 0.02,
        n_steps,
        coefficients,
        problem,
        seed: 0,
        output_dir: None,
        write_trajectories: false,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn triangle_coords(mesh: &Mesh) -> Vec<f64> {
    mesh.triangles
        .iter()
        .flat_map(|t| t.iter().flat_map(|&v| mesh.nodes[v]))
        .collect()
}

/// `alpha` (shared geometry for every coefficient) of a coefficient family.
pub fn coefficient_field(kind: &str, contrast: f64, seed: u64, fine_level: u32) -> Result<TriangleField, DemoError> {
    let cfg = config(kind, contrast, seed, fine_level, 1, 1, 1)?;
    let grid = build_nested_grid(fine_level, 1)?;
    let field = coeffs::CoefficientField::generate(&grid, &cfg.seeded_coefficients())?;
    Ok(TriangleField {
        coords: triangle_coords(&grid.fine),
        values: field.alpha,
    })
}

/// Per-step total energy errors of ME-LOD and LOD against the fine
/// reference.
pub fn compare(
    kind: &str,
    contrast: f64,
    seed: u64,
    fine_level: u32,
    coarse_level: u32,
    k: usize,
    n_steps: usize,
) -> Result<Comparison, DemoError> {
    let base = config(kind, contrast, seed, fine_level, coarse_level, k, n_steps)?;
    let series = |method| -> Result<Vec<f64>, DemoError> {
        let o = compute(&ExperimentConfig { method, ..base.clone() }, 1)?;
        Ok(o.report.series.iter().map(|s| s.e_w_energy.unwrap_or(f64::NAN)).collect())
    };
    Ok(Comparison {
        melod: series(MethodChoice::Melod)?,
        lod: series(MethodChoice::Lod)?,
    })
}

/// The ME-LOD basis function of the coarse node nearest the centre, for one
/// coarse component. Each triangle gets the mean of the `shown` component
/// over its vertices.
#[allow(clippy::too_many_arguments)]
pub fn basis_function(
    kind: &str,
    contrast: f64,
    seed: u64,
    fine_level: u32,
    coarse_level: u32,
    k: usize,
    attached: &str,
    shown: &str,
) -> Result<TriangleField, DemoError> {
    let cfg = config(kind, contrast, seed, fine_level, coarse_level, k, 1)?;
    let parse = |s: &str| match s {
        "ux" => Ok(Component::Ux),
        "uy" => Ok(Component::Uy),
        "theta" => Ok(Component::Theta),
        _ => Err(DemoError(format!("unknown component {s:?}"))),
    };
    let (attached, shown) = (parse(attached)?, parse(shown)?);
    let grid = build_nested_grid(fine_level, coarse_level)?;
    let field = coeffs::CoefficientField::generate(&grid, &cfg.seeded_coefficients())?;
    let bs = assembly::assemble_block_system(&grid, &field)?;
    let basis = build_basis_with_workers(&grid, &bs, Method::MeLod, k, cfg.gamma1, cfg.gamma2, 1)?;
    let coarse = &grid.coarse;
    let dist = |v: usize| (coarse.nodes[v][0] - 0.5).powi(2) + (coarse.nodes[v][1] - 0.5).powi(2);
    let centre = (0..coarse.interior_nodes.len())
        .min_by(|&a, &b| dist(coarse.interior_nodes[a]).total_cmp(&dist(coarse.interior_nodes[b])))
        .ok_or_else(|| DemoError("the coarse grid has no interior node".into()))?;
    let row = basis.rows[basis.coarse_layout.index(centre, attached)].to_dense(basis.n_fine());
    let mesh = &grid.fine;
    let nodal = |v: usize| mesh.interior_index[v].map_or(0.0, |p| row[basis.fine_layout.index(p, shown)]);
    let values = mesh
        .triangles
        .iter()
        .map(|t| t.iter().map(|&v| nodal(v)).sum::<f64>() / 3.0)
        .collect();
    Ok(TriangleField {
        coords: triangle_coords(mesh),
        values,
    })
}

#[wasm_bindgen(js_name = coefficientField)]
pub fn coefficient_field_js(kind: &str, contrast: f64, seed: u32, fine_level: u32) -> Result<TriangleField, JsValue> {
    Ok(coefficient_field(kind, contrast, seed as u64, fine_level)?)
}

#[wasm_bindgen(js_name = compare)]
pub fn compare_js(
    kind: &str,
    contrast: f64,
    seed: u32,
    fine_level: u32,
    coarse_level: u32,
    k: u32,
    n_steps: u32,
) -> Result<Comparison, JsValue> {
    Ok(compare(kind, contrast, seed as u64, fine_level, coarse_level, k as usize, n_steps as usize)?)
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = basisFunction)]
pub fn basis_function_js(
    kind: &str,
    contrast: f64,
    seed: u32,
    fine_level: u32,
    coarse_level: u32,
    k: u32,
    attached: &str,
    shown: &str,
) -> Result<TriangleField, JsValue> {
    Ok(basis_function(kind, contrast, seed as u64, fine_level, coarse_level, k as usize, attached, shown)?)
}
