//! P1 assembly of the thermoelastic block operators.
//!
//! Matrices act on interior dofs only (homogeneous Dirichlet data is
//! eliminated). Displacement dofs are ordered `(u_x, u_y)` per interior node,
//! temperature dofs one per interior node, see [`BlockLayout`].
//!
//! | block    | form                          | shape       |
//! |----------|-------------------------------|-------------|
//! | `a1`     | `∫ σ(u):ε(v)`                 | `2n x 2n`   |
//! | `a2`     | `∫ α θ div v`                 | `2n x n`    |
//! | `a3`     | `a2^T`                        | `n x 2n`    |
//! | `a4`     | `∫ κ ∇θ·∇φ`                   | `n x n`     |
//! | `mprime` | `∫ α θ φ`                     | `n x n`     |
//! | `mass`   | `∫ θ φ`                       | `n x n`     |

use std::io::Write;

use crate::coeffs::CoefficientField;
use crate::grid::{BlockLayout, Mesh, NestedGrid};
use crate::linalg::{self, SparseMat};
use crate::{Error, Result};

/// Element operators on one triangle with constant coefficients.
///
/// Local displacement dofs are ordered `2 * vertex + component`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementMatrices {
    pub a1: [[f64; 6]; 6],
    pub a2: [[f64; 3]; 6],
    pub a4: [[f64; 3]; 3],
    pub mprime: [[f64; 3]; 3],
    pub mass: [[f64; 3]; 3],
}

/// Area and barycentric gradients of a triangle.
pub fn shape_gradients(v: &[[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        g[a] = [(v[b][1] - v[c][1]) / det, (v[c][0] - v[b][0]) / det];
    }
    (0.5 * det, g)
}

pub fn element_matrices(v: &[[f64; 2]; 3], lambda: f64, mu: f64, kappa: f64, alpha: f64) -> ElementMatrices {
    let (area, g) = shape_gradients(v);
    let mut e = ElementMatrices {
        a1: [[0.0; 6]; 6],
        a2: [[0.0; 3]; 6],
        a4: [[0.0; 3]; 3],
        mprime: [[0.0; 3]; 3],
        mass: [[0.0; 3]; 3],
    };
    for a in 0..3 {
        for b in 0..3 {
            let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
            for c in 0..2 {
                for d in 0..2 {
                    let delta = if c == d { gg } else { 0.0 };
                    e.a1[2 * a + c][2 * b + d] =
                        area * (mu * (delta + g[a][d] * g[b][c]) + lambda * g[a][c] * g[b][d]);
                }
                e.a2[2 * a + c][b] = alpha * g[a][c] * area / 3.0;
            }
            e.a4[a][b] = kappa * area * gg;
            let m = area / 12.0 * if a == b { 2.0 } else { 1.0 };
            e.mass[a][b] = m;
            e.mprime[a][b] = alpha * m;
        }
    }
    e
}

/// Assembled block operators over interior fine dofs.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub layout: BlockLayout,
    pub a1: SparseMat,
    pub a2: SparseMat,
    pub a3: SparseMat,
    pub a4: SparseMat,
    pub mprime: SparseMat,
    /// Unweighted P1 mass matrix.
    pub mass: SparseMat,
}

impl BlockSystem {
    pub fn n_u(&self) -> usize {
        self.layout.n_u()
    }

    pub fn n_theta(&self) -> usize {
        self.layout.n_theta()
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }
}

pub fn assemble_block_system(grid: &NestedGrid, coeffs: &CoefficientField) -> Result<BlockSystem> {
    assemble_on_mesh(&grid.fine, coeffs)
}

pub fn assemble_on_mesh(mesh: &Mesh, coeffs: &CoefficientField) -> Result<BlockSystem> {
    // alpha = 0 is admitted: it switches the coupling off.
    coeffs.validate(mesh.n_triangles(), true)?;
    let layout = mesh.layout();
    let ni = layout.n_interior;
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    let mut t4 = Vec::new();
    let mut tm = Vec::new();
    let mut t0 = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let e = element_matrices(
            &mesh.vertices(t),
            coeffs.lambda[t],
            coeffs.mu[t],
            coeffs.kappa[t],
            coeffs.alpha[t],
        );
        let idx = tri.map(|v| mesh.interior_index[v]);
        for a in 0..3 {
            let Some(pa) = idx[a] else { continue };
            for b in 0..3 {
                let Some(pb) = idx[b] else { continue };
                for c in 0..2 {
                    for d in 0..2 {
                        t1.push((2 * pa + c, 2 * pb + d, e.a1[2 * a + c][2 * b + d]));
                    }
                    t2.push((2 * pa + c, pb, e.a2[2 * a + c][b]));
                }
                t4.push((pa, pb, e.a4[a][b]));
                tm.push((pa, pb, e.mprime[a][b]));
                t0.push((pa, pb, e.mass[a][b]));
            }
        }
    }
    let a2 = linalg::from_triplets(2 * ni, ni, &t2);
    let a3 = linalg::transpose(&a2);
    Ok(BlockSystem {
        layout,
        a1: linalg::from_triplets(2 * ni, 2 * ni, &t1),
        a2,
        a3,
        a4: linalg::from_triplets(ni, ni, &t4),
        mprime: linalg::from_triplets(ni, ni, &tm),
        mass: linalg::from_triplets(ni, ni, &t0),
    })
}

/// Body force and heat source load vectors over interior dofs.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadVectors {
    /// Length `2 * n_interior`, `(f_x, f_y)` interleaved.
    pub f: Vec<f64>,
    /// Length `n_interior`.
    pub g: Vec<f64>,
}

/// Loads by vertex quadrature: each triangle contributes `area / 3` times
/// the source value at each of its vertices.
pub fn assemble_loads(
    mesh: &Mesh,
    f: &dyn Fn(f64, f64, f64) -> [f64; 2],
    g: &dyn Fn(f64, f64, f64) -> f64,
    t: f64,
) -> LoadVectors {
    let ni = mesh.n_interior();
    let fv: Vec<[f64; 2]> = mesh.nodes.iter().map(|p| f(p[0], p[1], t)).collect();
    let gv: Vec<f64> = mesh.nodes.iter().map(|p| g(p[0], p[1], t)).collect();
    let mut lf = vec![0.0; 2 * ni];
    let mut lg = vec![0.0; ni];
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let w = mesh.signed_area(k) / 3.0;
        for &v in tri {
            if let Some(p) = mesh.interior_index[v] {
                lf[2 * p] += w * fv[v][0];
                lf[2 * p + 1] += w * fv[v][1];
                lg[p] += w * gv[v];
            }
        }
    }
    LoadVectors { f: lf, g: lg }
}

/// Backward-Euler operators `A = [A1 -A2; A3 M'+τA4]`, `B = [0 0; A3 M']`.
pub fn compose_time_operators(bs: &BlockSystem, tau: f64) -> Result<(SparseMat, SparseMat)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTimeStep(tau));
    }
    let (nu, n) = (bs.n_u(), bs.len());
    let a = linalg::compose_blocks(
        n,
        n,
        &[
            (&bs.a1, 0, 0, 1.0),
            (&bs.a2, 0, nu, -1.0),
            (&bs.a3, nu, 0, 1.0),
            (&bs.mprime, nu, nu, 1.0),
            (&bs.a4, nu, nu, tau),
        ],
    );
    let b = linalg::compose_blocks(n, n, &[(&bs.a3, nu, 0, 1.0), (&bs.mprime, nu, nu, 1.0)]);
    Ok((a, b))
}

/// Right-hand side `[F; τ G]`.
pub fn time_rhs(loads: &LoadVectors, tau: f64) -> Vec<f64> {
    loads.f.iter().copied().chain(loads.g.iter().map(|g| tau * g)).collect()
}

/// Writes a matrix as `nrows ncols nnz` followed by `row col value` lines.
pub fn write_coo<W: Write>(a: &SparseMat, mut w: W) -> std::io::Result<()> {
    let t = linalg::triplets(a);
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), t.len())?;
    for (i, j, v) in t {
        writeln!(w, "{i} {j} {v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_nested_grid;

    #[test]
    fn reference_triangle_elasticity_matrix() {
        // Symbolic integration of σ(u):ε(v) on the unit right triangle, λ = μ = 1.
        let expect = [
            [2.0, 1.0, -1.5, -0.5, -0.5, -0.5],
            [1.0, 2.0, -0.5, -0.5, -0.5, -1.5],
            [-1.5, -0.5, 1.5, 0.0, 0.0, 0.5],
            [-0.5, -0.5, 0.0, 0.5, 0.5, 0.0],
            [-0.5, -0.5, 0.0, 0.5, 0.5, 0.0],
            [-0.5, -1.5, 0.5, 0.0, 0.0, 1.5],
        ];
        let e = element_matrices(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 1.0, 1.0, 1.0, 1.0);
        for i in 0..6 {
            for j in 0..6 {
                assert!((e.a1[i][j] - expect[i][j]).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn zero_alpha_kills_coupling() {
        let g = build_nested_grid(3, 1).unwrap();
        let c = CoefficientField::uniform(&g, 1.0, 1.0, 1.0, 0.0);
        let bs = assemble_block_system(&g, &c).unwrap();
        for m in [&bs.a2, &bs.a3, &bs.mprime] {
            assert!(linalg::triplets(m).iter().all(|&(_, _, v)| v == 0.0));
        }
    }

    #[test]
    fn rejects_nonpositive_coefficients() {
        let g = build_nested_grid(2, 1).unwrap();
        let mut c = CoefficientField::uniform(&g, 1.0, 1.0, 1.0, 1.0);
        c.mu[0] = -1.0;
        assert!(assemble_block_system(&g, &c).is_err());
    }

    #[test]
    fn translations_are_in_interior_kernel() {
        let g = build_nested_grid(4, 1).unwrap();
        let c = CoefficientField::uniform(&g, 2.0, 0.7, 1.0, 1.0);
        let bs = assemble_block_system(&g, &c).unwrap();
        let mesh = &g.fine;
        let u = vec![1.0; bs.n_u()];
        let r = linalg::matvec(&bs.a1, &u);
        let t = vec![1.0; bs.n_theta()];
        let r4 = linalg::matvec(&bs.a4, &t);
        for (p, &v) in mesh.interior_nodes.iter().enumerate() {
            // rows whose stencil avoids the boundary
            let deep = mesh.node_triangles[v]
                .iter()
                .flat_map(|&k| mesh.triangles[k])
                .all(|w| !mesh.boundary[w]);
            if deep {
                assert!(r[2 * p].abs() < 1e-12 && r[2 * p + 1].abs() < 1e-12);
                assert!(r4[p].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_heat_source_loads() {
        let g = build_nested_grid(3, 1).unwrap();
        let mesh = &g.fine;
        let l = assemble_loads(mesh, &|_, _, _| [0.0, 0.0], &|_, _, _| 10.0, 0.0);
        assert!(l.f.iter().all(|&x| x == 0.0));
        let area = 0.5 / (mesh.n * mesh.n) as f64;
        for (p, &v) in mesh.interior_nodes.iter().enumerate() {
            let support = mesh.node_triangles[v].len() as f64 * area;
            assert!((l.g[p] - 10.0 * support / 3.0).abs() < 1e-14);
        }
        // Including boundary nodes the vertex rule integrates g exactly.
        let total: f64 = (0..mesh.n_triangles()).map(|t| 3.0 * 10.0 * mesh.signed_area(t) / 3.0).sum();
        assert!((total - 10.0).abs() < 1e-12);
        let zero = assemble_loads(mesh, &|_, _, _| [0.0, 0.0], &|_, _, _| 0.0, 0.0);
        assert!(zero.g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_source_peaks_near_its_centre() {
        let g = build_nested_grid(5, 1).unwrap();
        let src = |x: f64, y: f64, _t: f64| 10.0 * (-((x - 0.2).powi(2) + (y - 0.8).powi(2)) / (2.0 * 0.04)).exp();
        let l = assemble_loads(&g.fine, &|_, _, _| [0.0, 0.0], &src, 0.3);
        assert!(l.g.iter().all(|&x| x >= 0.0));
        let (pmax, _) = l
            .g
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let p = g.fine.nodes[g.fine.interior_nodes[pmax]];
        assert!((p[0] - 0.2).abs() <= 1.0 / 32.0 + 1e-12 && (p[1] - 0.8).abs() <= 1.0 / 32.0 + 1e-12);
    }

    #[test]
    fn time_operator_blocks() {
        let g = build_nested_grid(3, 1).unwrap();
        let mut c = CoefficientField::uniform(&g, 1.0, 1.0, 2.0, 0.5);
        c.alpha[3] = 1.5;
        let bs = assemble_block_system(&g, &c).unwrap();
        let tau = 0.05;
        let (a, b) = compose_time_operators(&bs, tau).unwrap();
        let nu = bs.n_u();
        let ad = a.to_dense();
        let (m, k) = (bs.mprime.to_dense(), bs.a4.to_dense());
        for i in 0..bs.n_theta() {
            for j in 0..bs.n_theta() {
                let want = m[(i, j)] + tau * k[(i, j)];
                assert!((ad[(nu + i, nu + j)] - want).abs() < 1e-15);
            }
        }
        for (i, _, v) in linalg::triplets(&b) {
            assert!(i >= nu || v == 0.0);
        }
        assert!(compose_time_operators(&bs, 0.0).is_err());
    }

    #[test]
    fn decoupled_when_alpha_zero() {
        let g = build_nested_grid(3, 1).unwrap();
        let c = CoefficientField::uniform(&g, 1.0, 1.0, 1.0, 0.0);
        let bs = assemble_block_system(&g, &c).unwrap();
        let (a, _) = compose_time_operators(&bs, 0.1).unwrap();
        let nu = bs.n_u();
        for (i, j, v) in linalg::triplets(&a) {
            if (i < nu) != (j < nu) {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn coo_export_lists_entries() {
        let a = linalg::from_triplets(2, 3, &[(0, 1, 2.5), (1, 2, -1.0)]);
        let mut buf = Vec::new();
        write_coo(&a, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "2 3 2\n0 1 2.5e0\n1 2 -1e0\n");
    }
}
