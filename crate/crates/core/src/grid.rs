//! Nested uniform triangulations of the unit square and node-centred patches.
//!
//! Every square cell is split along its lower-left to upper-right diagonal, so
//! a coarse mesh and any uniform refinement of it are nested: each coarse
//! triangle is tiled exactly by `4^(fine_level - coarse_level)` fine triangles.

use std::collections::BTreeSet;

use crate::{Error, Result};

/// Largest supported refinement level.
pub const MAX_LEVEL: u32 = 10;

/// Field component carried by a degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Ux,
    Uy,
    Theta,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Ux, Component::Uy, Component::Theta];

    pub fn offset(self) -> usize {
        match self {
            Component::Ux => 0,
            Component::Uy => 1,
            Component::Theta => 2,
        }
    }

    pub fn is_displacement(self) -> bool {
        !matches!(self, Component::Theta)
    }
}

/// Degree-of-freedom id in the node-major numbering `3 * node + component`.
pub fn node_major_dof(node: usize, comp: Component) -> usize {
    3 * node + comp.offset()
}

/// Maps interior nodes to positions in a block-ordered state vector:
/// all `(u_x, u_y)` pairs first, then all temperatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub n_interior: usize,
}

impl BlockLayout {
    pub fn new(n_interior: usize) -> Self {
        Self { n_interior }
    }

    pub fn n_u(&self) -> usize {
        2 * self.n_interior
    }

    pub fn n_theta(&self) -> usize {
        self.n_interior
    }

    pub fn len(&self) -> usize {
        3 * self.n_interior
    }

    pub fn is_empty(&self) -> bool {
        self.n_interior == 0
    }

    pub fn index(&self, interior: usize, comp: Component) -> usize {
        match comp {
            Component::Ux => 2 * interior,
            Component::Uy => 2 * interior + 1,
            Component::Theta => 2 * self.n_interior + interior,
        }
    }

    /// Inverse of [`BlockLayout::index`].
    pub fn locate(&self, index: usize) -> (usize, Component) {
        if index < 2 * self.n_interior {
            let comp = if index % 2 == 0 { Component::Ux } else { Component::Uy };
            (index / 2, comp)
        } else {
            (index - 2 * self.n_interior, Component::Theta)
        }
    }
}

/// Uniform triangulation of the unit square with `2^level` cells per side.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub level: u32,
    /// Cells per side.
    pub n: usize,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Interior node ids in increasing order.
    pub interior_nodes: Vec<usize>,
    /// Position of each node within `interior_nodes`, `None` on the boundary.
    pub interior_index: Vec<Option<usize>>,
    /// Triangles incident to each node.
    pub node_triangles: Vec<Vec<usize>>,
}

impl Mesh {
    pub fn uniform(level: u32) -> Self {
        let n = 1usize << level;
        let side = n + 1;
        let mut nodes = Vec::with_capacity(side * side);
        let mut boundary = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * side + i;
                let v10 = v00 + 1;
                let v01 = v00 + side;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut interior_nodes = Vec::new();
        let mut interior_index = vec![None; nodes.len()];
        for (v, &b) in boundary.iter().enumerate() {
            if !b {
                interior_index[v] = Some(interior_nodes.len());
                interior_nodes.push(v);
            }
        }
        let mut node_triangles = vec![Vec::new(); nodes.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                node_triangles[v].push(t);
            }
        }
        Self {
            level,
            n,
            nodes,
            triangles,
            boundary,
            interior_nodes,
            interior_index,
            node_triangles,
        }
    }

    /// Diameter of every triangle, `sqrt(2) * 2^-level`.
    pub fn mesh_size(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout::new(self.n_interior())
    }

    pub fn vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.vertices(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [p0, p1, p2] = self.vertices(t);
        [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
    }

    /// Triangle containing a point strictly inside some triangle.
    pub fn locate(&self, p: [f64; 2]) -> usize {
        let n = self.n as f64;
        let i = ((p[0] * n).floor() as usize).min(self.n - 1);
        let j = ((p[1] * n).floor() as usize).min(self.n - 1);
        let (lx, ly) = (p[0] * n - i as f64, p[1] * n - j as f64);
        let cell = j * self.n + i;
        if lx >= ly {
            2 * cell
        } else {
            2 * cell + 1
        }
    }

    /// Value at `p` of the piecewise-linear hat function of `node`.
    pub fn hat(&self, node: usize, p: [f64; 2]) -> f64 {
        let n = self.n as f64;
        let c = self.nodes[node];
        let dx = (p[0] - c[0]) * n;
        let dy = (p[1] - c[1]) * n;
        (1.0 - dx.abs().max(dy.abs()).max((dx - dy).abs())).max(0.0)
    }
}

/// A fine mesh together with the coarse mesh it refines.
#[derive(Clone, Debug)]
pub struct NestedGrid {
    pub fine: Mesh,
    pub coarse: Mesh,
    pub coarse_to_fine: Vec<Vec<usize>>,
    pub fine_to_coarse: Vec<usize>,
}

/// Node-centred oversampling patch `ω_k(x_m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    pub center_node: usize,
    pub k: usize,
    pub coarse_elements: Vec<usize>,
    /// Fine nodes interior to the patch and to the domain, increasing.
    pub fine_nodes: Vec<usize>,
    /// Node-major fine dofs of `fine_nodes`.
    pub fine_dofs: Vec<usize>,
    /// Interior coarse nodes whose hat support meets the patch, increasing.
    pub constrained_nodes: Vec<usize>,
    /// Node-major coarse dofs of `constrained_nodes`.
    pub constrained_coarse_dofs: Vec<usize>,
}

pub fn build_nested_grid(fine_level: u32, coarse_level: u32) -> Result<NestedGrid> {
    if coarse_level < 1 || coarse_level > fine_level || fine_level > MAX_LEVEL {
        return Err(Error::InvalidGridLevels {
            fine: fine_level,
            coarse: coarse_level,
        });
    }
    let fine = Mesh::uniform(fine_level);
    let coarse = Mesh::uniform(coarse_level);
    let fine_to_coarse: Vec<usize> = (0..fine.n_triangles())
        .map(|t| coarse.locate(fine.centroid(t)))
        .collect();
    let mut coarse_to_fine = vec![Vec::new(); coarse.n_triangles()];
    for (t, &c) in fine_to_coarse.iter().enumerate() {
        coarse_to_fine[c].push(t);
    }
    Ok(NestedGrid {
        fine,
        coarse,
        coarse_to_fine,
        fine_to_coarse,
    })
}

impl NestedGrid {
    /// Fine-to-coarse refinement ratio per side.
    pub fn ratio(&self) -> usize {
        self.fine.n / self.coarse.n
    }

    /// Fine node sitting on top of a coarse node.
    pub fn fine_node_of_coarse(&self, coarse_node: usize) -> usize {
        let side_c = self.coarse.n + 1;
        let side_f = self.fine.n + 1;
        let r = self.ratio();
        let (i, j) = (coarse_node % side_c, coarse_node / side_c);
        j * r * side_f + i * r
    }

    /// Values of a coarse hat at the interior fine nodes it touches, as
    /// `(fine interior index, value)` pairs in increasing index order.
    pub fn coarse_hat_on_fine(&self, coarse_node: usize) -> Vec<(usize, f64)> {
        let r = self.ratio() as isize;
        let side_f = (self.fine.n + 1) as isize;
        let centre = self.fine_node_of_coarse(coarse_node) as isize;
        let (ci, cj) = (centre % side_f, centre / side_f);
        let mut out = Vec::new();
        for dj in -r..=r {
            for di in -r..=r {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= side_f || j >= side_f {
                    continue;
                }
                let v = (j * side_f + i) as usize;
                let Some(p) = self.fine.interior_index[v] else {
                    continue;
                };
                let w = self.coarse.hat(coarse_node, self.fine.nodes[v]);
                if w > 0.0 {
                    out.push((p, w));
                }
            }
        }
        out.sort_by_key(|&(p, _)| p);
        out
    }

    /// Coarse elements sharing a vertex with any element of `set`.
    fn dilate(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = set.clone();
        for &t in set {
            for &v in &self.coarse.triangles[t] {
                out.extend(self.coarse.node_triangles[v].iter().copied());
            }
        }
        out
    }

    pub fn node_patch(&self, m: usize, k: usize) -> Result<Patch> {
        if m >= self.coarse.n_nodes() || self.coarse.boundary[m] {
            return Err(Error::InvalidNode(m));
        }
        let mut set: BTreeSet<usize> = self.coarse.node_triangles[m].iter().copied().collect();
        for _ in 0..k {
            let next = self.dilate(&set);
            if next.len() == set.len() {
                break;
            }
            set = next;
        }
        let mut in_patch = vec![false; self.coarse.n_triangles()];
        for &t in &set {
            in_patch[t] = true;
        }
        let fine_nodes: Vec<usize> = self
            .fine
            .interior_nodes
            .iter()
            .copied()
            .filter(|&v| {
                self.fine.node_triangles[v]
                    .iter()
                    .all(|&t| in_patch[self.fine_to_coarse[t]])
            })
            .collect();
        let mut constrained: BTreeSet<usize> = BTreeSet::new();
        for &t in &set {
            for &v in &self.coarse.triangles[t] {
                if !self.coarse.boundary[v] {
                    constrained.insert(v);
                }
            }
        }
        let constrained_nodes: Vec<usize> = constrained.into_iter().collect();
        let fine_dofs = fine_nodes
            .iter()
            .flat_map(|&v| Component::ALL.map(|c| node_major_dof(v, c)))
            .collect();
        let constrained_coarse_dofs = constrained_nodes
            .iter()
            .flat_map(|&v| Component::ALL.map(|c| node_major_dof(v, c)))
            .collect();
        Ok(Patch {
            center_node: m,
            k,
            coarse_elements: set.into_iter().collect(),
            fine_nodes,
            fine_dofs,
            constrained_nodes,
            constrained_coarse_dofs,
        })
    }
}
