//! Fine-grid backward-Euler reference solver.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::assembly::{self, BlockSystem};
use crate::grid::{Mesh, NestedGrid};
use crate::linalg::{self, SparseLu, SparseMat};
use crate::problem::Problem;
use crate::{Error, Result};

/// Stacked interior dofs `(u_x, u_y)*, theta*` at time level `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub w: Vec<f64>,
    pub n: usize,
    pub tau: f64,
}

impl StateVector {
    pub fn time(&self) -> f64 {
        self.n as f64 * self.tau
    }

    /// Displacement part, given the number of displacement dofs.
    pub fn u(&self, n_u: usize) -> &[f64] {
        &self.w[..n_u]
    }

    pub fn theta(&self, n_u: usize) -> &[f64] {
        &self.w[n_u..]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub fine_level: u32,
    pub coarse_level: u32,
    /// Which solver produced the states, e.g. `fem` or `melod(k=2)`.
    pub label: String,
    pub coefficient_provenance: String,
}

/// States `w^0, ..., w^N` with a uniform time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub states: Vec<StateVector>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("a trajectory holds at least the initial state")
    }
}

/// Consistent initial state: `theta` interpolates `theta0` and `u` solves
/// `A1 u = F(0) + A2 theta`.
pub fn initial_state(mesh: &Mesh, bs: &BlockSystem, problem: &Problem, tau: f64) -> Result<StateVector> {
    let theta = problem.theta0_interpolant(mesh);
    let loads = problem.loads(mesh, 0.0);
    let mut rhs = loads.f;
    linalg::matvec_acc(&bs.a2, &theta, 1.0, &mut rhs);
    let lu = SparseLu::new(&bs.a1, "elasticity block A1")?;
    lu.solve_in_place(&mut rhs);
    rhs.extend_from_slice(&theta);
    Ok(StateVector { w: rhs, n: 0, tau })
}

/// Factorized backward-Euler operators `A w^n = B w^{n-1} + F^n`.
#[derive(Debug)]
pub struct Stepper {
    a: SparseMat,
    b: SparseMat,
    lu: SparseLu,
    tau: f64,
}

/// Largest number of refinement sweeps before a step is declared inaccurate.
const MAX_REFINEMENTS: usize = 3;
const RESIDUAL_TOL: f64 = 1e-10;

impl Stepper {
    pub fn new(bs: &BlockSystem, tau: f64) -> Result<Self> {
        let (a, b) = assembly::compose_time_operators(bs, tau)?;
        let lu = match SparseLu::new(&a, "backward-Euler operator A") {
            Ok(lu) => lu,
            Err(e) => return Err(diagnose_breakdown(bs, tau).unwrap_or(e)),
        };
        Ok(Self { a, b, lu, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advances one level; `f_total` is `[F^n; tau G^n]`.
    pub fn step(&self, prev: &StateVector, f_total: &[f64]) -> Result<StateVector> {
        let bw = linalg::matvec(&self.b, &prev.w);
        let scale = linalg::norm(&bw) + linalg::norm(f_total);
        let rhs: Vec<f64> = bw.iter().zip(f_total).map(|(p, q)| p + q).collect();
        let mut x = self.lu.solve(&rhs);
        let mut res = f64::INFINITY;
        for _ in 0..=MAX_REFINEMENTS {
            let mut r = rhs.clone();
            linalg::matvec_acc(&self.a, &x, -1.0, &mut r);
            res = linalg::norm(&r);
            if res <= RESIDUAL_TOL * scale {
                return Ok(StateVector {
                    w: x,
                    n: prev.n + 1,
                    tau: self.tau,
                });
            }
            self.lu.solve_in_place(&mut r);
            x.iter_mut().zip(&r).for_each(|(xi, di)| *xi += di);
        }
        Err(Error::Factorization {
            context: format!("time step {}", prev.n + 1),
            reason: format!("residual {res:.3e} exceeds {RESIDUAL_TOL:e} x {scale:.3e}"),
        })
    }
}

/// Names the diagonal block of `A` whose factorization breaks down.
fn diagnose_breakdown(bs: &BlockSystem, tau: f64) -> Option<Error> {
    if let Err(e) = SparseLu::new(&bs.a1, "elasticity block A1") {
        return Some(e);
    }
    let heat = linalg::compose_blocks(
        bs.n_theta(),
        bs.n_theta(),
        &[(&bs.mprime, 0, 0, 1.0), (&bs.a4, 0, 0, tau)],
    );
    SparseLu::new(&heat, "heat block M' + tau A4").err()
}

/// Right-hand side `[F^n; tau G^n]` at `t = n tau`.
pub fn forcing(mesh: &Mesh, problem: &Problem, tau: f64, n: usize) -> Vec<f64> {
    assembly::time_rhs(&problem.loads(mesh, n as f64 * tau), tau)
}

/// Reference trajectory with `n_steps` backward-Euler steps.
pub fn run(grid: &NestedGrid, bs: &BlockSystem, problem: &Problem, tau: f64, n_steps: usize) -> Result<Trajectory> {
    let stepper = Stepper::new(bs, tau)?;
    let mut states = vec![initial_state(&grid.fine, bs, problem, tau)?];
    for n in 1..=n_steps {
        let next = stepper.step(&states[n - 1], &forcing(&grid.fine, problem, tau, n))?;
        states.push(next);
    }
    Ok(Trajectory {
        tau,
        states,
        meta: TrajectoryMeta {
            fine_level: grid.fine.level,
            coarse_level: grid.coarse.level,
            label: "fem".into(),
            coefficient_provenance: String::new(),
        },
    })
}

/// One time level as CSV over all mesh nodes, boundary values included.
pub fn write_state_csv<W: Write>(mesh: &Mesh, state: &StateVector, mut w: W) -> std::io::Result<()> {
    let layout = mesh.layout();
    writeln!(w, "node,x,y,u_x,u_y,theta")?;
    for (v, p) in mesh.nodes.iter().enumerate() {
        let (ux, uy, th) = match mesh.interior_index[v] {
            Some(i) => (
                state.w[2 * i],
                state.w[2 * i + 1],
                state.w[layout.n_u() + i],
            ),
            None => (0.0, 0.0, 0.0),
        };
        writeln!(w, "{v},{},{},{ux:e},{uy:e},{th:e}", p[0], p[1])?;
    }
    Ok(())
}

/// Writes `{prefix}_{n:04}.csv` for every level and returns the paths.
pub fn write_trajectory(mesh: &Mesh, traj: &Trajectory, dir: &Path, prefix: &str) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        let path = dir.join(format!("{prefix}_{:04}.csv", s.n));
        let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        write_state_csv(mesh, s, file)?;
        paths.push(path);
    }
    Ok(paths)
}
