//! Multiscale bases from patch-local saddle-point problems.
//!
//! Every interior coarse dof `m` gets one basis function `psi_m`, computed on
//! the patch `ω_k(x_m)` by minimizing the patch operator subject to the
//! constraints `q_j(psi_m) = δ_jm` for every coarse dof `j` whose hat support
//! meets the patch. Here `q_j(v)` is the L² product of the coarse hat of `j`
//! with the component of `v` that `j` carries.
//!
//! The bordered system
//!
//! ```text
//! [ K  M ] [ psi ]   [ 0   ]
//! [ M' 0 ] [ lam ] = [ e_m ]
//! ```
//!
//! is solved through its Schur complement: `Y = K⁻¹ M`, `S = M' Y`,
//! `psi = Y S⁻¹ e_m`, `lam = -S⁻¹ e_m`. One factorization of `K` on a patch
//! serves all targets at the patch centre.
//!
//! - [`Method::Lod`] uses the elasticity block `A1` for the displacement dofs
//!   and the conductivity block `A4` for the temperature, so basis functions
//!   are purely mechanical or purely thermal.
//! - [`Method::MeLod`] uses the coupled operator `K_γ` and constrains all three
//!   components at once, so every basis function is a full `(u, θ)` field.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::assembly::BlockSystem;
use crate::grid::{BlockLayout, Component, Mesh, NestedGrid, Patch};
use crate::linalg::{self, DenseLu, SparseLu, SparseMat, SparseVec};
use crate::{par, Error, Result};

/// Largest tolerated `|q_j(psi_m) - δ_jm|`.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lod,
    #[serde(rename = "melod")]
    MeLod,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lod => "lod",
            Method::MeLod => "melod",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lod" => Ok(Method::Lod),
            "melod" => Ok(Method::MeLod),
            _ => Err(Error::Config(format!("unknown method {s:?}, expected lod or melod"))),
        }
    }
}

/// `K_γ = [A1, -γ1 A2; γ2 A3, A4]` over the fine block layout.
#[derive(Clone, Debug)]
pub struct CoupledOperator {
    pub gamma1: f64,
    pub gamma2: f64,
    pub matrix: SparseMat,
}

pub fn build_coupled_operator(bs: &BlockSystem, gamma1: f64, gamma2: f64) -> Result<CoupledOperator> {
    let ok = |g: f64| g > 0.0 && g <= 1.0;
    if !(ok(gamma1) && ok(gamma2)) {
        return Err(Error::InvalidGamma(gamma1, gamma2));
    }
    let (nu, n) = (bs.n_u(), bs.len());
    let matrix = linalg::compose_blocks(
        n,
        n,
        &[
            (&bs.a1, 0, 0, 1.0),
            (&bs.a2, 0, nu, -gamma1),
            (&bs.a3, nu, 0, gamma2),
            (&bs.a4, nu, nu, 1.0),
        ],
    );
    Ok(CoupledOperator {
        gamma1,
        gamma2,
        matrix,
    })
}

/// Scalar constraint functionals: entry `j` holds `q_j` over fine interior
/// nodes for the `j`-th interior coarse node. Since the coarse hat is itself
/// a fine P1 function, `q_j = M0 · hat_j` with the unweighted mass `M0`.
pub fn constraint_functionals(grid: &NestedGrid, bs: &BlockSystem) -> Vec<SparseVec> {
    let n = bs.n_theta();
    grid.coarse
        .interior_nodes
        .iter()
        .map(|&node| {
            let mut hat = vec![0.0; n];
            for (p, v) in grid.coarse_hat_on_fine(node) {
                hat[p] = v;
            }
            let q = linalg::matvec(&bs.mass, &hat);
            let (idx, val) = q.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).unzip();
            SparseVec { idx, val }
        })
        .collect()
}

/// Block constraint matrix `C` (coarse dofs x fine dofs) with
/// `(C v)_(j, c) = q_j(v_c)`.
pub fn constraint_matrix(grid: &NestedGrid, bs: &BlockSystem) -> SparseMat {
    let q = constraint_functionals(grid, bs);
    let cl = grid.coarse.layout();
    let fl = bs.layout;
    let mut t = Vec::new();
    for (j, row) in q.iter().enumerate() {
        for c in Component::ALL {
            for (&p, &v) in row.idx.iter().zip(&row.val) {
                t.push((cl.index(j, c), fl.index(p, c), v));
            }
        }
    }
    linalg::from_triplets(cl.len(), fl.len(), &t)
}

/// The operator a corrector minimizes together with the components it acts
/// on. `offset` is the position of the operator's first row in the fine
/// block layout.
#[derive(Clone, Copy, Debug)]
pub struct PatchOperator<'a> {
    pub matrix: &'a SparseMat,
    pub components: &'static [Component],
    pub offset: usize,
}

const ALL: &[Component] = &Component::ALL;
const DISPLACEMENT: &[Component] = &[Component::Ux, Component::Uy];
const TEMPERATURE: &[Component] = &[Component::Theta];

impl<'a> PatchOperator<'a> {
    pub fn coupled(op: &'a CoupledOperator) -> Self {
        Self {
            matrix: &op.matrix,
            components: ALL,
            offset: 0,
        }
    }

    pub fn elastic(bs: &'a BlockSystem) -> Self {
        Self {
            matrix: &bs.a1,
            components: DISPLACEMENT,
            offset: 0,
        }
    }

    pub fn thermal(bs: &'a BlockSystem) -> Self {
        Self {
            matrix: &bs.a4,
            components: TEMPERATURE,
            offset: bs.n_u(),
        }
    }
}

/// One basis function and its Lagrange multipliers.
#[derive(Clone, Debug, PartialEq)]
pub struct Corrector {
    /// Coarse dof the function is attached to.
    pub component: Component,
    /// Values over fine block-layout indices.
    pub psi: SparseVec,
    /// One multiplier per entry of `constraints`.
    pub multipliers: Vec<f64>,
    /// Constrained `(coarse interior index, component)` pairs.
    pub constraints: Vec<(usize, Component)>,
    /// Largest `|q_j(psi) - δ_jm|` over the constrained dofs.
    pub constraint_residual: f64,
}

/// Factorized saddle-point system of one patch and one operator. Nodes whose
/// patches have the same elements share it.
pub struct PatchFactor {
    comps: &'static [Component],
    local_to_global: Vec<usize>,
    constraints: Vec<(usize, Component)>,
    m: Mat<f64>,
    y: Mat<f64>,
    s_lu: DenseLu,
    k: usize,
    n_fine: usize,
}

impl PatchFactor {
    pub fn new(
        grid: &NestedGrid,
        fine_layout: BlockLayout,
        functionals: &[SparseVec],
        op: PatchOperator<'_>,
        patch: &Patch,
    ) -> Result<Self> {
        let fine = &grid.fine;
        let comps = op.components;
        let nc = comps.len();
        let kkt_error = || Error::SingularKkt {
            node: patch.center_node,
            k: patch.k,
            n_fine: patch.fine_nodes.len() * nc,
            n_constraints: patch.constrained_nodes.len() * nc,
        };
        if patch.fine_nodes.is_empty() {
            return Err(kkt_error());
        }

        // Local numbering: fine node-major, then component.
        let mut node_slot = vec![None; fine.n_interior()];
        let mut local_to_global = Vec::with_capacity(patch.fine_nodes.len() * nc);
        let mut op_map = vec![None; op.matrix.nrows()];
        for (q, &v) in patch.fine_nodes.iter().enumerate() {
            let p = fine.interior_index[v].expect("patch nodes are interior");
            node_slot[p] = Some(q);
            for (ci, &c) in comps.iter().enumerate() {
                let g = fine_layout.index(p, c);
                op_map[g - op.offset] = Some(q * nc + ci);
                local_to_global.push(g);
            }
        }
        let n = local_to_global.len();
        let k_local = linalg::restrict(op.matrix, &op_map, n, &op_map, n);

        let constraints: Vec<(usize, Component)> = patch
            .constrained_nodes
            .iter()
            .flat_map(|&node| {
                let j = grid.coarse.interior_index[node].expect("constrained nodes are interior");
                comps.iter().map(move |&c| (j, c))
            })
            .collect();
        let ncon = constraints.len();
        let mut m = Mat::<f64>::zeros(n, ncon);
        for (l, &(j, c)) in constraints.iter().enumerate() {
            let ci = comps.iter().position(|&x| x == c).expect("component of op");
            let q = &functionals[j];
            for (&p, &v) in q.idx.iter().zip(&q.val) {
                if let Some(slot) = node_slot[p] {
                    m[(slot * nc + ci, l)] = v;
                }
            }
        }

        let lu = SparseLu::new(&k_local, &format!("patch operator of coarse node {}", patch.center_node))?;
        let mut y = m.clone();
        lu.solve_many_in_place(&mut y);
        let s = m.transpose() * &y;
        let s_lu = DenseLu::new(&s, "constraint Schur complement").map_err(|_| kkt_error())?;
        Ok(Self {
            comps,
            local_to_global,
            constraints,
            m,
            y,
            s_lu,
            k: patch.k,
            n_fine: patch.fine_nodes.len() * nc,
        })
    }

    /// Basis functions of every component at coarse node `centre`, which
    /// must be constrained on the patch.
    pub fn solve(&self, grid: &NestedGrid, centre_node: usize) -> Result<Vec<Corrector>> {
        let kkt_error = || Error::SingularKkt {
            node: centre_node,
            k: self.k,
            n_fine: self.n_fine,
            n_constraints: self.constraints.len(),
        };
        let centre = grid.coarse.interior_index[centre_node].ok_or(Error::InvalidNode(centre_node))?;
        let (n, ncon) = (self.local_to_global.len(), self.constraints.len());
        let mut out = Vec::with_capacity(self.comps.len());
        for &c in self.comps {
            let t = self
                .constraints
                .iter()
                .position(|&jc| jc == (centre, c))
                .ok_or(Error::InvalidNode(centre_node))?;
            let mut e = vec![0.0; ncon];
            e[t] = 1.0;
            let mut x = self.s_lu.solve(&e);
            let mut psi = vec![0.0; n];
            let mut residual = f64::INFINITY;
            // The Schur complement can be poorly scaled; a couple of refinement
            // sweeps on the constraint equations restore full accuracy.
            for _ in 0..3 {
                let col = &self.y * faer::ColRef::from_slice(&x);
                psi = (0..n).map(|i| col[i]).collect();
                let qpsi = self.m.transpose() * faer::ColRef::from_slice(&psi);
                let r: Vec<f64> = (0..ncon).map(|l| e[l] - qpsi[l]).collect();
                residual = linalg::max_abs(&r);
                if residual <= 0.01 * CONSTRAINT_TOL {
                    break;
                }
                let dx = self.s_lu.solve(&r);
                x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            }
            if !(residual <= CONSTRAINT_TOL) {
                return Err(kkt_error());
            }
            let mut pairs: Vec<(usize, f64)> = self.local_to_global.iter().copied().zip(psi.iter().copied()).collect();
            pairs.sort_unstable_by_key(|&(g, _)| g);
            let (idx, val) = pairs.into_iter().unzip();
            out.push(Corrector {
                component: c,
                psi: SparseVec { idx, val },
                multipliers: x.iter().map(|v| -v).collect(),
                constraints: self.constraints.clone(),
                constraint_residual: residual,
            });
        }
        Ok(out)
    }
}

/// Solves the saddle-point problems on `patch` for every component of `op`
/// at the patch centre.
pub fn solve_corrector(
    grid: &NestedGrid,
    fine_layout: BlockLayout,
    functionals: &[SparseVec],
    op: PatchOperator<'_>,
    patch: &Patch,
) -> Result<Vec<Corrector>> {
    PatchFactor::new(grid, fine_layout, functionals, op, patch)?.solve(grid, patch.center_node)
}

/// Provenance of one basis row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowInfo {
    pub coarse_node: usize,
    pub component: Component,
    pub patch_elements: usize,
    pub patch_fine_nodes: usize,
    pub n_constraints: usize,
}

/// Rows of the reduction matrix `R`, indexed by the coarse block layout.
#[derive(Clone, Debug)]
pub struct MultiscaleBasis {
    pub method: Method,
    pub k: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub coarse_layout: BlockLayout,
    pub fine_layout: BlockLayout,
    pub rows: Vec<SparseVec>,
    pub info: Vec<RowInfo>,
    /// Largest constraint residual over all rows.
    pub max_constraint_residual: f64,
}

pub fn build_basis(
    grid: &NestedGrid,
    bs: &BlockSystem,
    method: Method,
    k: usize,
    gamma1: f64,
    gamma2: f64,
) -> Result<MultiscaleBasis> {
    build_basis_with_workers(grid, bs, method, k, gamma1, gamma2, par::default_workers())
}

/// [`build_basis`] with an explicit worker count. The result does not depend
/// on `workers`.
pub fn build_basis_with_workers(
    grid: &NestedGrid,
    bs: &BlockSystem,
    method: Method,
    k: usize,
    gamma1: f64,
    gamma2: f64,
    workers: usize,
) -> Result<MultiscaleBasis> {
    if bs.layout != grid.fine.layout() {
        return Err(Error::DimensionMismatch("block system does not belong to the fine grid".into()));
    }
    let coupled = match method {
        Method::MeLod => Some(build_coupled_operator(bs, gamma1, gamma2)?),
        Method::Lod => None,
    };
    let ops: Vec<PatchOperator<'_>> = match &coupled {
        Some(op) => vec![PatchOperator::coupled(op)],
        None => vec![PatchOperator::elastic(bs), PatchOperator::thermal(bs)],
    };
    let functionals = constraint_functionals(grid, bs);
    let fine_layout = bs.layout;
    let patches: Vec<Patch> = grid
        .coarse
        .interior_nodes
        .iter()
        .map(|&node| grid.node_patch(node, k))
        .collect::<Result<_>>()?;
    // Nodes with identical patches (saturated ones) share one factorization.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut by_elements: HashMap<&[usize], usize> = HashMap::new();
    for (j, p) in patches.iter().enumerate() {
        let g = *by_elements.entry(&p.coarse_elements[..]).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(j);
    }
    let per_group = par::map(workers, &groups, |members| -> Result<Vec<(usize, Corrector, RowInfo)>> {
        let mut rows = Vec::with_capacity(3 * members.len());
        for op in &ops {
            let factor = PatchFactor::new(grid, fine_layout, &functionals, *op, &patches[members[0]])?;
            for &j in members {
                let patch = &patches[j];
                for c in factor.solve(grid, patch.center_node)? {
                    let info = RowInfo {
                        coarse_node: patch.center_node,
                        component: c.component,
                        patch_elements: patch.coarse_elements.len(),
                        patch_fine_nodes: patch.fine_nodes.len(),
                        n_constraints: c.constraints.len(),
                    };
                    rows.push((j, c, info));
                }
            }
        }
        Ok(rows)
    });

    let coarse_layout = grid.coarse.layout();
    let mut rows = vec![SparseVec::default(); coarse_layout.len()];
    let mut info: Vec<Option<RowInfo>> = vec![None; coarse_layout.len()];
    let mut max_res = 0.0f64;
    for res in per_group {
        for (j, c, i) in res? {
            let r = coarse_layout.index(j, c.component);
            max_res = max_res.max(c.constraint_residual);
            rows[r] = c.psi;
            info[r] = Some(i);
        }
    }
    Ok(MultiscaleBasis {
        method,
        k,
        gamma1,
        gamma2,
        coarse_layout,
        fine_layout,
        rows,
        info: info.into_iter().map(|i| i.expect("every coarse dof gets a row")).collect(),
        max_constraint_residual: max_res,
    })
}

impl MultiscaleBasis {
    pub fn n_coarse(&self) -> usize {
        self.rows.len()
    }

    pub fn n_fine(&self) -> usize {
        self.fine_layout.len()
    }

    /// `R` as a sparse `n_coarse x n_fine` matrix.
    pub fn to_sparse(&self) -> SparseMat {
        let mut t = Vec::with_capacity(self.rows.iter().map(SparseVec::nnz).sum());
        for (i, r) in self.rows.iter().enumerate() {
            t.extend(r.idx.iter().zip(&r.val).map(|(&j, &v)| (i, j, v)));
        }
        linalg::from_triplets(self.n_coarse(), self.n_fine(), &t)
    }

    /// Fine field `R^T w_c`.
    pub fn lift(&self, wc: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n_fine()];
        for (r, &s) in self.rows.iter().zip(wc) {
            r.axpy_into(s, &mut w);
        }
        w
    }

    /// Coarse vector `R w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.dot_dense(w)).collect()
    }

    pub fn write_coo<W: Write>(&self, w: W) -> std::io::Result<()> {
        crate::assembly::write_coo(&self.to_sparse(), w)
    }

    /// One basis function as CSV over all fine nodes.
    pub fn write_row_csv<W: Write>(&self, mesh: &Mesh, row: usize, mut w: W) -> std::io::Result<()> {
        let dense = self.rows[row].to_dense(self.n_fine());
        writeln!(w, "node,x,y,u_x,u_y,theta")?;
        for (v, p) in mesh.nodes.iter().enumerate() {
            let vals = match mesh.interior_index[v] {
                Some(i) => Component::ALL.map(|c| dense[self.fine_layout.index(i, c)]),
                None => [0.0; 3],
            };
            writeln!(w, "{v},{},{},{:e},{:e},{:e}", p[0], p[1], vals[0], vals[1], vals[2])?;
        }
        Ok(())
    }
}
