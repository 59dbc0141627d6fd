//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use melod::coeffs::CoefficientField;
use melod::grid::Mesh;

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

/// Coefficients `(a, b, c)` of the affine functions `a + b x + c y` that are
/// 1 at one vertex and 0 at the others, by Gaussian elimination on the
/// 3x3 Vandermonde system.
fn affine_basis(v: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, basis) in out.iter_mut().enumerate() {
        let mut m: Vec<[f64; 4]> = (0..3)
            .map(|r| [1.0, v[r][0], v[r][1], if r == i { 1.0 } else { 0.0 }])
            .collect();
        *basis = solve3(&mut m);
    }
    out
}

fn solve3(m: &mut [[f64; 4]]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for c in col..4 {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][3] - s) / m[r][r];
    }
    x
}

fn area(v: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs()
}

/// Edge-midpoint rule, exact for quadratics on a triangle.
fn midpoint_rule(v: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let mid = |a: usize, b: usize| [(v[a][0] + v[b][0]) / 2.0, (v[a][1] + v[b][1]) / 2.0];
    [mid(0, 1), mid(1, 2), mid(2, 0)]
}

fn eval(basis: &[f64; 3], p: [f64; 2]) -> f64 {
    basis[0] + basis[1] * p[0] + basis[2] * p[1]
}

/// Dense global blocks assembled element by element with Voigt strains and
/// the edge-midpoint rule. Layout: `u` dof `2p + c`, `θ` dof `p` for the
/// interior index `p`.
pub struct OracleBlocks {
    pub a1: Dense,
    pub a2: Dense,
    pub a4: Dense,
    pub mprime: Dense,
    pub mass: Dense,
}

pub fn oracle_blocks(mesh: &Mesh, c: &CoefficientField) -> OracleBlocks {
    let n = mesh.interior_nodes.len();
    let mut o = OracleBlocks {
        a1: zeros(2 * n, 2 * n),
        a2: zeros(2 * n, n),
        a4: zeros(n, n),
        mprime: zeros(n, n),
        mass: zeros(n, n),
    };
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = tri.map(|i| mesh.nodes[i]);
        let phi = affine_basis(&v);
        let ar = area(&v);
        let (lam, mu, kap, alp) = (c.lambda[t], c.mu[t], c.kappa[t], c.alpha[t]);
        let d = [[lam + 2.0 * mu, lam, 0.0], [lam, lam + 2.0 * mu, 0.0], [0.0, 0.0, mu]];
        // Strain of the vector hat (vertex a, component comp) in Voigt form.
        let strain = |a: usize, comp: usize| -> [f64; 3] {
            let (gx, gy) = (phi[a][1], phi[a][2]);
            if comp == 0 {
                [gx, 0.0, gy]
            } else {
                [0.0, gy, gx]
            }
        };
        let qp = midpoint_rule(&v);
        for a in 0..3 {
            let Some(pa) = mesh.interior_index[tri[a]] else { continue };
            for b in 0..3 {
                let Some(pb) = mesh.interior_index[tri[b]] else { continue };
                for ca in 0..2 {
                    let ea = strain(a, ca);
                    for cb in 0..2 {
                        let eb = strain(b, cb);
                        let mut s = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                s += ea[i] * d[i][j] * eb[j];
                            }
                        }
                        o.a1[2 * pa + ca][2 * pb + cb] += ar * s;
                    }
                    let div = phi[a][1 + ca];
                    let int_theta: f64 = qp.iter().map(|&p| eval(&phi[b], p)).sum::<f64>() * ar / 3.0;
                    o.a2[2 * pa + ca][pb] += alp * div * int_theta;
                }
                let grad = phi[a][1] * phi[b][1] + phi[a][2] * phi[b][2];
                o.a4[pa][pb] += kap * ar * grad;
                let m: f64 = qp.iter().map(|&p| eval(&phi[a], p) * eval(&phi[b], p)).sum::<f64>() * ar / 3.0;
                o.mass[pa][pb] += m;
                o.mprime[pa][pb] += alp * m;
            }
        }
    }
    o
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Dense = a.iter().zip(b).map(|(r, &bi)| r.iter().copied().chain([bi]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

pub fn dense_matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Scalar heat equation `c θ_t - div(κ ∇θ) = g` with backward Euler,
/// homogeneous Dirichlet data and per-element `kappa`, `capacity`:
/// `(C + τK) θ^n = C θ^{n-1} + τ G^n`. Loads use the vertex rule.
pub fn heat_backward_euler(
    mesh: &Mesh,
    kappa: &[f64],
    capacity: &[f64],
    g: &dyn Fn(f64, f64, f64) -> f64,
    theta0: &dyn Fn(f64, f64) -> f64,
    tau: f64,
    n_steps: usize,
) -> Vec<Vec<f64>> {
    let n = mesh.interior_nodes.len();
    let mut k = zeros(n, n);
    let mut c = zeros(n, n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = tri.map(|i| mesh.nodes[i]);
        let phi = affine_basis(&v);
        let ar = area(&v);
        let qp = midpoint_rule(&v);
        for a in 0..3 {
            let Some(pa) = mesh.interior_index[tri[a]] else { continue };
            for b in 0..3 {
                let Some(pb) = mesh.interior_index[tri[b]] else { continue };
                k[pa][pb] += kappa[t] * ar * (phi[a][1] * phi[b][1] + phi[a][2] * phi[b][2]);
                let m: f64 = qp.iter().map(|&p| eval(&phi[a], p) * eval(&phi[b], p)).sum::<f64>() * ar / 3.0;
                c[pa][pb] += capacity[t] * m;
            }
        }
    }
    let lhs: Dense = (0..n).map(|i| (0..n).map(|j| c[i][j] + tau * k[i][j]).collect()).collect();
    let mut theta: Vec<f64> = mesh
        .interior_nodes
        .iter()
        .map(|&v| theta0(mesh.nodes[v][0], mesh.nodes[v][1]))
        .collect();
    let mut out = vec![theta.clone()];
    for step in 1..=n_steps {
        let t = step as f64 * tau;
        let mut rhs = dense_matvec(&c, &theta);
        for tri in &mesh.triangles {
            let v = tri.map(|i| mesh.nodes[i]);
            let w = area(&v) / 3.0;
            for (a, &node) in tri.iter().enumerate() {
                if let Some(p) = mesh.interior_index[node] {
                    rhs[p] += tau * w * g(v[a][0], v[a][1], t);
                }
            }
        }
        theta = dense_solve(&lhs, &rhs);
        out.push(theta.clone());
    }
    out
}

/// Relative energy and L² errors from element integrals:
/// `(E_u, E_theta, E_w, E_w_L2)`, each `None` when the reference norm is 0.
pub fn brute_force_errors(
    mesh: &Mesh,
    c: &CoefficientField,
    w: &[f64],
    w_ref: &[f64],
) -> [Option<f64>; 4] {
    let n = mesh.interior_nodes.len();
    let nodal = |x: &[f64], node: usize| -> [f64; 3] {
        match mesh.interior_index[node] {
            Some(p) => [x[2 * p], x[2 * p + 1], x[2 * n + p]],
            None => [0.0; 3],
        }
    };
    let (mut eu, mut ru, mut et, mut rt, mut el, mut rl) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let err: Vec<f64> = w.iter().zip(w_ref).map(|(a, b)| a - b).collect();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = tri.map(|i| mesh.nodes[i]);
        let phi = affine_basis(&v);
        let ar = area(&v);
        let qp = midpoint_rule(&v);
        let (lam, mu, kap) = (c.lambda[t], c.mu[t], c.kappa[t]);
        let parts = |x: &[f64]| -> (f64, f64, f64) {
            let vals = tri.map(|node| nodal(x, node));
            let mut grad = [[0.0; 2]; 3];
            for (a, val) in vals.iter().enumerate() {
                for comp in 0..3 {
                    grad[comp][0] += val[comp] * phi[a][1];
                    grad[comp][1] += val[comp] * phi[a][2];
                }
            }
            let (exx, eyy, exy) = (grad[0][0], grad[1][1], 0.5 * (grad[0][1] + grad[1][0]));
            let elastic = 2.0 * mu * (exx * exx + eyy * eyy + 2.0 * exy * exy) + lam * (exx + eyy).powi(2);
            let thermal = kap * (grad[2][0].powi(2) + grad[2][1].powi(2));
            let l2: f64 = qp
                .iter()
                .map(|&p| {
                    (0..3)
                        .map(|comp| {
                            let s: f64 = (0..3).map(|a| vals[a][comp] * eval(&phi[a], p)).sum();
                            s * s
                        })
                        .sum::<f64>()
                })
                .sum::<f64>()
                / 3.0;
            (ar * elastic, ar * thermal, ar * l2)
        };
        let (a, b, l) = parts(&err);
        let (ra, rb, rl2) = parts(w_ref);
        eu += a;
        et += b;
        el += l;
        ru += ra;
        rt += rb;
        rl += rl2;
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { Some((num / den).sqrt()) } else { None };
    [ratio(eu, ru), ratio(et, rt), ratio(eu + et, ru + rt), ratio(el, rl)]
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn sparse_to_dense(a: &melod::linalg::SparseMat) -> Dense {
    let mut d = zeros(a.nrows(), a.ncols());
    for (i, j, v) in melod::linalg::triplets(a) {
        d[i][j] += v;
    }
    d
}

/// Cholesky succeeds with positive pivots.
pub fn is_spd(a: &Dense) -> bool {
    let n = a.len();
    let mut l = zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return false;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

pub fn is_symmetric(a: &Dense, tol: f64) -> bool {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    (0..a.len()).all(|i| (0..i).all(|j| (a[i][j] - a[j][i]).abs() <= tol * scale))
}

/// Largest entrywise relative mismatch, relative to the larger magnitude of
/// the two entries or, for entries near zero, to the matrix scale.
pub fn max_rel_mismatch(a: &Dense, b: &Dense) -> f64 {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        for (&x, &y) in ra.iter().zip(rb) {
            let den = x.abs().max(y.abs()).max(1e-12 * scale);
            if den > 0.0 {
                worst = worst.max((x - y).abs() / den);
            }
        }
    }
    worst
}

/// Per-element coefficients drawn uniformly from `[0.5, 2)`.
pub fn random_field(n_elements: usize, seed: u64) -> CoefficientField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || (0..n_elements).map(|_| rng.random_range(0.5..2.0)).collect::<Vec<f64>>();
    CoefficientField {
        lambda: draw(),
        mu: draw(),
        kappa: draw(),
        alpha: draw(),
        provenance: format!("random({seed})"),
    }
}

/// Checks of one basis row on its own patch.
#[derive(Debug, Clone, Copy)]
pub struct RowCheck {
    /// Largest `|q_j(psi) - δ_jm|` over coarse dofs whose hat meets the patch.
    pub constraint: f64,
    /// `sup |l(psi, v)| / (|psi| |v|)` over patch vectors `v` with
    /// `q_j(v) = 0` for every constrained `j`.
    pub stationarity: f64,
}

pub fn check_row(
    grid: &melod::grid::NestedGrid,
    bs: &melod::assembly::BlockSystem,
    basis: &melod::mslod::MultiscaleBasis,
    row: usize,
) -> RowCheck {
    use melod::grid::Component;
    use melod::mslod::{build_coupled_operator, constraint_functionals, Method};

    let info = &basis.info[row];
    let patch = grid.node_patch(info.coarse_node, basis.k).unwrap();
    let psi_full = basis.rows[row].to_dense(basis.n_fine());
    let comps: Vec<Component> = match basis.method {
        Method::MeLod => Component::ALL.to_vec(),
        Method::Lod if info.component.is_displacement() => vec![Component::Ux, Component::Uy],
        Method::Lod => vec![Component::Theta],
    };
    // Operator applied to the full row, then read on the patch dofs.
    let k_psi: Vec<f64> = match basis.method {
        Method::MeLod => {
            let op = build_coupled_operator(bs, basis.gamma1, basis.gamma2).unwrap();
            linalg_matvec(&op.matrix, &psi_full)
        }
        Method::Lod if info.component.is_displacement() => {
            let mut y = linalg_matvec(&bs.a1, &psi_full[..bs.n_u()]);
            y.resize(bs.len(), 0.0);
            y
        }
        Method::Lod => {
            let mut y = vec![0.0; bs.n_u()];
            y.extend(linalg_matvec(&bs.a4, &psi_full[bs.n_u()..]));
            y
        }
    };
    let layout = basis.fine_layout;
    let local: Vec<usize> = patch
        .fine_nodes
        .iter()
        .flat_map(|&v| {
            let p = grid.fine.interior_index[v].unwrap();
            comps.iter().map(move |&c| layout.index(p, c))
        })
        .collect();
    // Constrained coarse nodes: interior vertices of the patch elements.
    let mut overlap: Vec<usize> = patch
        .coarse_elements
        .iter()
        .flat_map(|&t| grid.coarse.triangles[t])
        .filter(|&v| !grid.coarse.boundary[v])
        .collect();
    overlap.sort_unstable();
    overlap.dedup();
    let q = constraint_functionals(grid, bs);
    let centre = grid.coarse.interior_index[info.coarse_node].unwrap();
    let mut constraint = 0.0f64;
    let mut m_cols: Vec<Vec<f64>> = Vec::new();
    for &node in &overlap {
        let j = grid.coarse.interior_index[node].unwrap();
        for &c in &comps {
            let qj = &q[j];
            let value: f64 = qj.idx.iter().zip(&qj.val).map(|(&p, &w)| w * psi_full[layout.index(p, c)]).sum();
            let want = if j == centre && c == info.component { 1.0 } else { 0.0 };
            constraint = constraint.max((value - want).abs());
            let mut col = vec![0.0; basis.n_fine()];
            for (&p, &w) in qj.idx.iter().zip(&qj.val) {
                col[layout.index(p, c)] = w;
            }
            m_cols.push(local.iter().map(|&g| col[g]).collect());
        }
    }
    let r: Vec<f64> = local.iter().map(|&g| k_psi[g]).collect();
    let psi: Vec<f64> = local.iter().map(|&g| psi_full[g]).collect();
    let mtm: Dense = m_cols.iter().map(|a| m_cols.iter().map(|b| dot(a, b)).collect()).collect();
    let mtr: Vec<f64> = m_cols.iter().map(|a| dot(a, &r)).collect();
    let y = dense_solve(&mtm, &mtr);
    let mut pr = r.clone();
    for (col, yi) in m_cols.iter().zip(&y) {
        for (p, c) in pr.iter_mut().zip(col) {
            *p -= yi * c;
        }
    }
    RowCheck {
        constraint,
        stationarity: dot(&pr, &pr).sqrt() / dot(&psi, &psi).sqrt(),
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn linalg_matvec(a: &melod::linalg::SparseMat, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (i, j, v) in melod::linalg::triplets(a) {
        y[i] += v * x[j];
    }
    y
}
