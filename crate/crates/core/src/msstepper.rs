//! Backward-Euler stepping of the reduced coarse system.
//!
//! With the reduction matrix `R` (one basis function per row) the coarse
//! operators are `A_c = R A R^T` and `B_c = R B R^T`, the coarse load is
//! `R F`, and a coarse state `w_c` lifts to the fine field `R^T w_c`.

use crate::assembly::BlockSystem;
use crate::fem::{self, StateVector, Trajectory, TrajectoryMeta};
use crate::grid::NestedGrid;
use crate::linalg::{self, DenseLu, SparseLu, SparseMat};
use crate::mslod::MultiscaleBasis;
use crate::problem::Problem;
use crate::{Error, Result};

/// Coarse systems up to this size are factorized densely.
pub const DENSE_LIMIT: usize = 5000;

#[derive(Debug)]
enum Solver {
    Dense(DenseLu),
    Sparse(SparseLu),
}

impl Solver {
    fn new(a: &SparseMat, context: &str) -> Result<Self> {
        if a.nrows() <= DENSE_LIMIT {
            Ok(Solver::Dense(DenseLu::new(&a.to_dense(), context)?))
        } else {
            Ok(Solver::Sparse(SparseLu::new(a, context)?))
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Solver::Dense(lu) => lu.solve(b),
            Solver::Sparse(lu) => lu.solve(b),
        }
    }
}

/// Coarse operators with a cached factorization of `A_c`.
#[derive(Debug)]
pub struct ReducedSystem {
    pub basis: MultiscaleBasis,
    pub a_c: SparseMat,
    pub b_c: SparseMat,
    solver: Solver,
}

/// `R X R^T` for a fine operator `X`.
pub fn triple_product(r: &SparseMat, rt: &SparseMat, x: &SparseMat) -> SparseMat {
    linalg::matmul(r, &linalg::matmul(x, rt))
}

pub fn reduce(basis: &MultiscaleBasis, a: &SparseMat, b: &SparseMat) -> Result<ReducedSystem> {
    let n = basis.n_fine();
    for (name, m) in [("A", a), ("B", b)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, basis has {n} fine dofs",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let r = basis.to_sparse();
    let rt = linalg::transpose(&r);
    let a_c = triple_product(&r, &rt, a);
    let b_c = triple_product(&r, &rt, b);
    let solver = Solver::new(&a_c, "coarse operator A_c")?;
    Ok(ReducedSystem {
        basis: basis.clone(),
        a_c,
        b_c,
        solver,
    })
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.a_c.nrows()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.solver, Solver::Dense(_))
    }

    /// `w_c^n` from `w_c^{n-1}` and the fine right-hand side `[F^n; τG^n]`.
    pub fn step(&self, prev: &[f64], fine_rhs: &[f64]) -> Vec<f64> {
        let mut rhs = self.basis.apply(fine_rhs);
        linalg::matvec_acc(&self.b_c, prev, 1.0, &mut rhs);
        self.solver.solve(&rhs)
    }

    /// `w_c^T A_c w_c`.
    pub fn energy(&self, wc: &[f64]) -> f64 {
        linalg::bilinear(&self.a_c, wc, wc)
    }
}

/// Coarse initial state from the Galerkin system
///
/// ```text
/// R [A1, -A2; 0, I] R^T w_c = R [F(0); I_h theta0]
/// ```
///
/// Tested against displacement rows it is the reduced static equation
/// `a(u, v) - b(v, θ) = (f, v)`; tested against temperature rows it is the
/// l² projection of the interpolated `theta0`. With a block-diagonal `R`
/// the temperature part is exactly `(R_θ R_θ^T)⁻¹ R_θ I_h theta0`.
pub fn ms_initial_state(rs: &ReducedSystem, grid: &NestedGrid, bs: &BlockSystem, problem: &Problem) -> Result<Vec<f64>> {
    let (nu, n) = (bs.n_u(), bs.len());
    let identity = linalg::from_triplets(
        bs.n_theta(),
        bs.n_theta(),
        &(0..bs.n_theta()).map(|i| (i, i, 1.0)).collect::<Vec<_>>(),
    );
    let s = linalg::compose_blocks(
        n,
        n,
        &[(&bs.a1, 0, 0, 1.0), (&bs.a2, 0, nu, -1.0), (&identity, nu, nu, 1.0)],
    );
    let r = rs.basis.to_sparse();
    let rt = linalg::transpose(&r);
    let g = triple_product(&r, &rt, &s);
    let solver = Solver::new(&g, "coarse initial-state system")?;
    let mut rhs = problem.loads(&grid.fine, 0.0).f;
    rhs.extend(problem.theta0_interpolant(&grid.fine));
    Ok(solver.solve(&rs.basis.apply(&rhs)))
}

/// Reduced trajectory with `n_steps` steps, lifted to the fine grid.
pub fn ms_run(
    rs: &ReducedSystem,
    grid: &NestedGrid,
    bs: &BlockSystem,
    problem: &Problem,
    tau: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTimeStep(tau));
    }
    let mut wc = ms_initial_state(rs, grid, bs, problem)?;
    let lift = |wc: &[f64], n: usize| StateVector {
        w: rs.basis.lift(wc),
        n,
        tau,
    };
    let mut states = vec![lift(&wc, 0)];
    for n in 1..=n_steps {
        wc = rs.step(&wc, &fem::forcing(&grid.fine, problem, tau, n));
        states.push(lift(&wc, n));
    }
    Ok(Trajectory {
        tau,
        states,
        meta: TrajectoryMeta {
            fine_level: grid.fine.level,
            coarse_level: grid.coarse.level,
            label: format!("{}(k={})", rs.basis.method, rs.basis.k),
            coefficient_provenance: String::new(),
        },
    })
}
