//! Structured meshes on intervals and rectangles, nodal fields, per-cell
//! gradients and one-point quadrature.
//!
//! Every cell carries a single quadrature point (midpoint in 1D, centroid in
//! 2D). Nodal fields are averaged to that point before integration, and
//! gradients are piecewise constant (forward differences in 1D, the gradient
//! of the linear interpolant on each triangle in 2D). Reductions always run
//! over cells in index order.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{ExprError, ScalarExpr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: Domain,
    dim: usize,
    nx: usize,
    ny: usize,
    nodes: Vec<[f64; 2]>,
    /// Flat connectivity, `dim + 1` node indices per cell.
    cells: Vec<usize>,
    /// Flat gradients of the nodal basis functions on each cell.
    basis_grads: Vec<[f64; 2]>,
    boundary: Vec<bool>,
    measures: Vec<f64>,
    quad_points: Vec<[f64; 2]>,
    interior: Vec<usize>,
    interior_index: Vec<Option<usize>>,
}

impl Mesh {
    /// Uniform partition of `[a, b]` into `n_cells` segments.
    pub fn interval(a: f64, b: f64, n_cells: usize) -> Result<Arc<Mesh>> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::DegenerateDomain(format!("interval ({a}, {b})")));
        }
        if n_cells < 2 {
            return Err(Error::TooCoarse(n_cells));
        }
        let h = (b - a) / n_cells as f64;
        let nodes: Vec<[f64; 2]> = (0..=n_cells)
            .map(|j| {
                let x = if j == n_cells { b } else { a + j as f64 * h };
                [x, 0.0]
            })
            .collect();
        let mut cells = Vec::with_capacity(2 * n_cells);
        let mut basis_grads = Vec::with_capacity(2 * n_cells);
        let mut measures = Vec::with_capacity(n_cells);
        let mut quad_points = Vec::with_capacity(n_cells);
        for j in 0..n_cells {
            let (x0, x1) = (nodes[j][0], nodes[j + 1][0]);
            let len = x1 - x0;
            cells.extend_from_slice(&[j, j + 1]);
            basis_grads.extend_from_slice(&[[-1.0 / len, 0.0], [1.0 / len, 0.0]]);
            measures.push(len);
            quad_points.push([0.5 * (x0 + x1), 0.0]);
        }
        let mut boundary = vec![false; n_cells + 1];
        boundary[0] = true;
        boundary[n_cells] = true;
        Ok(Arc::new(Self::finish(
            Domain::Interval { a, b },
            1,
            n_cells,
            0,
            nodes,
            cells,
            basis_grads,
            boundary,
            measures,
            quad_points,
        )))
    }

    /// Tensor grid on `[ax, bx] x [ay, by]`, each quad split into two
    /// triangles along the diagonal from its lower-left to upper-right
    /// corner. Nodes are numbered row by row (x fastest).
    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64, nx: usize, ny: usize) -> Result<Arc<Mesh>> {
        let finite = [ax, bx, ay, by].iter().all(|v| v.is_finite());
        if !finite || ax >= bx || ay >= by {
            return Err(Error::DegenerateDomain(format!("rectangle ({ax}, {bx}) x ({ay}, {by})")));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::TooCoarse(nx.min(ny)));
        }
        let hx = (bx - ax) / nx as f64;
        let hy = (by - ay) / ny as f64;
        let coord = |i: usize, n: usize, lo: f64, hi: f64, h: f64| if i == n { hi } else { lo + i as f64 * h };
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([coord(i, nx, ax, bx, hx), coord(j, ny, ay, by, hy)]);
                boundary.push(i == 0 || j == 0 || i == nx || j == ny);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(6 * nx * ny);
        let mut basis_grads = Vec::with_capacity(6 * nx * ny);
        let mut measures = Vec::with_capacity(2 * nx * ny);
        let mut quad_points = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let tris = [
                    [id(i, j), id(i + 1, j), id(i + 1, j + 1)],
                    [id(i, j), id(i + 1, j + 1), id(i, j + 1)],
                ];
                for tri in tris {
                    let [p0, p1, p2] = tri.map(|k| nodes[k]);
                    let (e1, e2) = ([p1[0] - p0[0], p1[1] - p0[1]], [p2[0] - p0[0], p2[1] - p0[1]]);
                    let det = e1[0] * e2[1] - e1[1] * e2[0];
                    // Rows of the inverse Jacobian give the barycentric gradients.
                    let g1 = [e2[1] / det, -e2[0] / det];
                    let g2 = [-e1[1] / det, e1[0] / det];
                    let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
                    cells.extend_from_slice(&tri);
                    basis_grads.extend_from_slice(&[g0, g1, g2]);
                    measures.push(0.5 * det.abs());
                    quad_points.push([(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]);
                }
            }
        }
        Ok(Arc::new(Self::finish(
            Domain::Rectangle { ax, bx, ay, by },
            2,
            nx,
            ny,
            nodes,
            cells,
            basis_grads,
            boundary,
            measures,
            quad_points,
        )))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        domain: Domain,
        dim: usize,
        nx: usize,
        ny: usize,
        nodes: Vec<[f64; 2]>,
        cells: Vec<usize>,
        basis_grads: Vec<[f64; 2]>,
        boundary: Vec<bool>,
        measures: Vec<f64>,
        quad_points: Vec<[f64; 2]>,
    ) -> Mesh {
        let mut interior = Vec::new();
        let mut interior_index = vec![None; nodes.len()];
        for (k, &b) in boundary.iter().enumerate() {
            if !b {
                interior_index[k] = Some(interior.len());
                interior.push(k);
            }
        }
        Mesh {
            domain,
            dim,
            nx,
            ny,
            nodes,
            cells,
            basis_grads,
            boundary,
            measures,
            quad_points,
            interior,
            interior_index,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cell counts per axis; the second entry is 0 for interval meshes.
    pub fn resolution(&self) -> [usize; 2] {
        [self.nx, self.ny]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.measures.len()
    }

    pub fn verts_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> [f64; 2] {
        self.nodes[k]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let v = self.dim + 1;
        &self.cells[c * v..(c + 1) * v]
    }

    pub fn basis_grads(&self, c: usize) -> &[[f64; 2]] {
        let v = self.dim + 1;
        &self.basis_grads[c * v..(c + 1) * v]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn quad_points(&self) -> &[[f64; 2]] {
        &self.quad_points
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    /// Interior nodes in increasing index order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_index(&self, k: usize) -> Option<usize> {
        self.interior_index[k]
    }

    /// Half bandwidth of any nodal coupling matrix restricted to interior
    /// nodes in [`Mesh::interior_nodes`] order.
    pub fn interior_half_bandwidth(&self) -> usize {
        match self.dim {
            1 => 1,
            _ => self.nx,
        }
    }

    /// |Ω| as the sum of cell measures.
    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Weight of a vertex value in the cell's quadrature-point average.
    pub fn quad_weight(&self) -> f64 {
        1.0 / (self.dim + 1) as f64
    }

    /// Average of nodal `values` over the vertices of cell `c`.
    #[inline]
    pub fn cell_average(&self, values: &[f64], c: usize) -> f64 {
        let verts = self.cell(c);
        verts.iter().map(|&k| values[k]).sum::<f64>() * self.quad_weight()
    }

    /// Constant gradient of the nodal interpolant of `values` on cell `c`.
    #[inline]
    pub fn cell_gradient(&self, values: &[f64], c: usize) -> [f64; 2] {
        let verts = self.cell(c);
        let grads = self.basis_grads(c);
        if self.dim == 1 {
            // Written as a difference quotient so affine data stays exact.
            return [(values[verts[1]] - values[verts[0]]) * grads[1][0], 0.0];
        }
        let mut g = [0.0; 2];
        for (&k, bg) in verts.iter().zip(grads) {
            g[0] += values[k] * bg[0];
            g[1] += values[k] * bg[1];
        }
        g
    }

    /// Per-cell quadrature-point averages of a nodal array.
    pub fn to_cells(&self, values: &[f64]) -> Vec<f64> {
        (0..self.n_cells()).map(|c| self.cell_average(values, c)).collect()
    }

    /// Σ value·measure over cells, in cell order.
    pub fn integrate_cells(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n_cells() {
            return Err(Error::SizeMismatch { expected: self.n_cells(), found: values.len() });
        }
        Ok(values.iter().zip(&self.measures).map(|(v, m)| v * m).sum())
    }

    /// Integral of a nodal field via the quadrature-point average.
    pub fn integrate_nodal(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n_nodes() {
            return Err(Error::SizeMismatch { expected: self.n_nodes(), found: values.len() });
        }
        Ok((0..self.n_cells()).map(|c| self.cell_average(values, c) * self.measures[c]).sum())
    }

    /// Nearest interior node and its distance for a boundary node.
    pub fn inward_neighbor(&self, k: usize) -> Option<(usize, f64)> {
        if !self.boundary[k] {
            return None;
        }
        let target = match self.dim {
            1 => {
                if k == 0 {
                    1
                } else {
                    k - 1
                }
            }
            _ => {
                let (i, j) = (k % (self.nx + 1), k / (self.nx + 1));
                let ci = i.clamp(1, self.nx - 1);
                let cj = j.clamp(1, self.ny - 1);
                cj * (self.nx + 1) + ci
            }
        };
        let (p, q) = (self.nodes[k], self.nodes[target]);
        Some((target, ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()))
    }

    /// Sample an expression at every node.
    pub fn interpolate(self: &Arc<Self>, f: &ScalarExpr) -> Result<NodeField> {
        if self.dim == 1 && f.uses_y() {
            return Err(Error::Expr(ExprError::new(
                "expression references `y` on a one-dimensional mesh",
                f.span_of_y().unwrap_or(0..0),
            )));
        }
        let values = self.nodes.iter().map(|p| f.eval(p[0], p[1])).collect::<std::result::Result<Vec<_>, _>>()?;
        NodeField::new(self, values)
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Mesh>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// One scalar per mesh node.
#[derive(Debug, Clone)]
pub struct NodeField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl PartialEq for NodeField {
    fn eq(&self, other: &Self) -> bool {
        self.mesh.same_as(&other.mesh) && self.values == other.values
    }
}

impl NodeField {
    pub fn new(mesh: &Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::SizeMismatch { expected: mesh.n_nodes(), found: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("node {k} holds {}", values[k])));
        }
        Ok(NodeField { mesh: Arc::clone(mesh), values })
    }

    pub fn constant(mesh: &Arc<Mesh>, value: f64) -> Self {
        NodeField { mesh: Arc::clone(mesh), values: vec![value; mesh.n_nodes()] }
    }

    pub fn from_fn(mesh: &Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.nodes.iter().map(|&p| f(p)).collect())
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(&self.mesh, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &NodeField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_mesh(other)?;
        Self::new(&self.mesh, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    /// α·self + β·other.
    pub fn lin_comb(&self, alpha: f64, other: &NodeField, beta: f64) -> Result<Self> {
        self.zip_map(other, |a, b| alpha * a + beta * b)
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        self.map(|v| s * v)
    }

    pub fn check_same_mesh(&self, other: &NodeField) -> Result<()> {
        if self.mesh.same_as(&other.mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// Per-cell gradients of the nodal interpolant.
    pub fn gradient(&self) -> CellVectorField {
        let vectors = (0..self.mesh.n_cells()).map(|c| self.mesh.cell_gradient(&self.values, c)).collect();
        CellVectorField { mesh: Arc::clone(&self.mesh), vectors }
    }

    pub fn integrate(&self) -> f64 {
        self.mesh.integrate_nodal(&self.values).expect("field length matches its mesh")
    }

    /// Largest nodal |difference| to `other`.
    pub fn max_distance(&self, other: &NodeField) -> Result<f64> {
        self.check_same_mesh(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// One N-vector per cell (the value at the cell's quadrature point).
#[derive(Debug, Clone)]
pub struct CellVectorField {
    mesh: Arc<Mesh>,
    vectors: Vec<[f64; 2]>,
}

impl CellVectorField {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    /// Cellwise dot product with another vector field.
    pub fn dot(&self, other: &CellVectorField) -> Result<Vec<f64>> {
        if !self.mesh.same_as(&other.mesh) {
            return Err(Error::MeshMismatch);
        }
        Ok(self.vectors.iter().zip(&other.vectors).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).collect())
    }
}
