//! Relative energy and L² errors of a trajectory against a reference.
//!
//! With `e = w - w_ref`,
//!
//! ```text
//! E_u       = sqrt(e_u' A1 e_u / u' A1 u)
//! E_theta   = sqrt(e_θ' A4 e_θ / θ' A4 θ)
//! E_w       = sqrt((e_u' A1 e_u + e_θ' A4 e_θ) / (u' A1 u + θ' A4 θ))
//! E_w (L²)  = sqrt(Σ_c e_c' M0 e_c / Σ_c w_c' M0 w_c)
//! ```
//!
//! where `M0` is the unweighted mass matrix and `c` runs over `u_x, u_y, θ`.
//! A ratio whose denominator vanishes is undefined (`None`).

use std::io::Write;

use serde::Serialize;

use crate::assembly::BlockSystem;
use crate::fem::Trajectory;
use crate::linalg::{self, SparseMat};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "method,k,contrast,seed,E_u,E_theta,E_w_energy,E_w_L2";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepErrors {
    pub n: usize,
    pub e_u: Option<f64>,
    pub e_theta: Option<f64>,
    pub e_w_energy: Option<f64>,
    pub e_w_l2: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorMeta {
    pub method: String,
    pub k: usize,
    pub contrast: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub meta: ErrorMeta,
    /// Time level the headline values refer to.
    pub at: usize,
    /// Errors at every level `0..=N`.
    pub series: Vec<StepErrors>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| (num / den).sqrt())
}

/// `Σ_c x_c' M0 y_c` over the three components of block-layout vectors.
fn mass_form(mass: &SparseMat, n_u: usize, x: &[f64], y: &[f64]) -> f64 {
    let ux: Vec<f64> = x[..n_u].iter().step_by(2).copied().collect();
    let uy: Vec<f64> = x[1..n_u].iter().step_by(2).copied().collect();
    let vx: Vec<f64> = y[..n_u].iter().step_by(2).copied().collect();
    let vy: Vec<f64> = y[1..n_u].iter().step_by(2).copied().collect();
    linalg::bilinear(mass, &ux, &vx) + linalg::bilinear(mass, &uy, &vy) + linalg::bilinear(mass, &x[n_u..], &y[n_u..])
}

/// Errors of one state against its reference.
pub fn state_errors(w: &[f64], w_ref: &[f64], bs: &BlockSystem, n: usize) -> StepErrors {
    let nu = bs.n_u();
    let e: Vec<f64> = w.iter().zip(w_ref).map(|(a, b)| a - b).collect();
    let eu = linalg::bilinear(&bs.a1, &e[..nu], &e[..nu]);
    let et = linalg::bilinear(&bs.a4, &e[nu..], &e[nu..]);
    let ru = linalg::bilinear(&bs.a1, &w_ref[..nu], &w_ref[..nu]);
    let rt = linalg::bilinear(&bs.a4, &w_ref[nu..], &w_ref[nu..]);
    StepErrors {
        n,
        e_u: ratio(eu, ru),
        e_theta: ratio(et, rt),
        e_w_energy: ratio(eu + et, ru + rt),
        e_w_l2: ratio(mass_form(&bs.mass, nu, &e, &e), mass_form(&bs.mass, nu, w_ref, w_ref)),
    }
}

/// Error report of `sol` against `reference`, headline values at level `at`
/// (the final level when `None`).
pub fn energy_errors(sol: &Trajectory, reference: &Trajectory, bs: &BlockSystem, at: Option<usize>) -> Result<ErrorReport> {
    if sol.states.len() != reference.states.len() || sol.tau != reference.tau {
        return Err(Error::DimensionMismatch(format!(
            "trajectories differ in time grid: {} levels (tau {}) vs {} levels (tau {})",
            sol.states.len(),
            sol.tau,
            reference.states.len(),
            reference.tau
        )));
    }
    let last = reference.n_steps();
    let at = at.unwrap_or(last);
    if at > last {
        return Err(Error::DimensionMismatch(format!("time level {at} beyond final level {last}")));
    }
    let mut series = Vec::with_capacity(sol.states.len());
    for (s, r) in sol.states.iter().zip(&reference.states) {
        if s.w.len() != bs.len() || r.w.len() != bs.len() {
            return Err(Error::DimensionMismatch(format!(
                "state lengths {} and {} for {} fine dofs",
                s.w.len(),
                r.w.len(),
                bs.len()
            )));
        }
        series.push(state_errors(&s.w, &r.w, bs, r.n));
    }
    Ok(ErrorReport {
        meta: ErrorMeta::default(),
        at,
        series,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:e}"))
}

impl ErrorReport {
    pub fn with_meta(mut self, meta: ErrorMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn headline(&self) -> &StepErrors {
        &self.series[self.at]
    }

    pub fn final_total_energy(&self) -> Option<f64> {
        self.headline().e_w_energy
    }

    /// One CSV line matching [`CSV_HEADER`], without a trailing newline.
    pub fn csv_row(&self) -> String {
        let h = self.headline();
        format!(
            "{},{},{:e},{},{},{},{},{}",
            self.meta.method,
            self.meta.k,
            self.meta.contrast,
            self.meta.seed,
            fmt_opt(h.e_u),
            fmt_opt(h.e_theta),
            fmt_opt(h.e_w_energy),
            fmt_opt(h.e_w_l2)
        )
    }
}

pub fn write_errors_csv<W: Write>(reports: &[ErrorReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}
