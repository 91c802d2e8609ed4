//! Integer incidence operators and the projection onto free degrees of freedom.
//!
//! `curl` maps edges to facets, `div` maps facets to cells and `dual_div` maps
//! edges (dual facets) to points (dual cells). The gradients are never assembled
//! independently: `G = −dual_divᵀ`, the dual gradient is `−divᵀ` and the dual curl
//! is `curlᵀ`.

use crate::error::{Error, Result};
use crate::grid::{Axis, EntityKind, Grid};
use crate::linsolve::SparseMatrix;

/// Sparse matrix with small integer entries, stored in CSR layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntSparse {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<i64>,
}

impl IntSparse {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, i64)]) -> Self {
        let mut rows: Vec<Vec<(usize, i64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            rows[r].push((c, v));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[i64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0)
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// Exact integer product.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut t = Vec::new();
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                t.extend(cb.iter().zip(vb).map(|(&j, &b)| (i, j, a * b)));
            }
        }
        Self::from_triplets(self.nrows, other.ncols, &t)
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            let (c, v) = self.row(r);
            for (&j, &x) in c.iter().zip(v) {
                if col_map[j] != usize::MAX {
                    t.push((ri, col_map[j], x));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &t)
    }

    pub fn to_f64(&self) -> SparseMatrix {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (i, j, v as f64)).collect();
        SparseMatrix::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }
}

/// Unprojected incidence operators over all entity slots of a grid.
#[derive(Debug, Clone)]
pub struct TopoOps {
    /// Facets × edges.
    pub curl: IntSparse,
    /// Cells × facets.
    pub div: IntSparse,
    /// Points × edges (dual cells × dual facets).
    pub dual_div: IntSparse,
}

impl TopoOps {
    pub fn build(grid: &Grid) -> Self {
        Self { curl: build_curl(grid), div: build_div(grid), dual_div: build_dual_div(grid) }
    }

    /// Primal gradient, points → edges.
    pub fn grad(&self) -> IntSparse {
        self.dual_div.transpose().neg()
    }

    /// Dual curl, dual edges (facets) → dual facets (edges).
    pub fn dual_curl(&self) -> IntSparse {
        self.curl.transpose()
    }

    /// Dual gradient, dual points (cells) → dual edges (facets).
    pub fn dual_grad(&self) -> IntSparse {
        self.div.transpose().neg()
    }
}

/// Curl matrix. The row of facet `A_w(p)` with `(u, v)` the cyclic successors of
/// `w` holds `+e_u(p), +e_v(p+k_u), −e_u(p+k_v), −e_v(p)`. Phantom facets give empty rows.
pub fn build_curl(grid: &Grid) -> IntSparse {
    let n = grid.n_points();
    let k = grid.strides();
    let mut t = Vec::with_capacity(4 * grid.n_dof());
    for f in 0..grid.n_dof() {
        if grid.phantom_facet[f] {
            continue;
        }
        let (w, p) = grid.split_slot(f);
        let (u, v) = w.others();
        let (ku, kv) = (k[u.index()], k[v.index()]);
        let eu = |q: usize| u.index() * n + q;
        let ev = |q: usize| v.index() * n + q;
        t.push((f, eu(p), 1));
        t.push((f, ev(p + ku), 1));
        t.push((f, eu(p + kv), -1));
        t.push((f, ev(p), -1));
    }
    IntSparse::from_triplets(grid.n_dof(), grid.n_dof(), &t)
}

/// Divergence matrix, one row of six entries per non-phantom cell.
pub fn build_div(grid: &Grid) -> IntSparse {
    let k = grid.strides();
    let mut t = Vec::with_capacity(6 * grid.n_points());
    for c in 0..grid.n_points() {
        if grid.phantom_cell[c] {
            continue;
        }
        for w in Axis::ALL {
            t.push((c, grid.facet(w, c), -1));
            t.push((c, grid.facet(w, c + k[w.index()]), 1));
        }
    }
    IntSparse::from_triplets(grid.n_points(), grid.n_dof(), &t)
}

/// Dual divergence: net flux through the dual facets around each point.
pub fn build_dual_div(grid: &Grid) -> IntSparse {
    let k = grid.strides();
    let dims = grid.dims();
    let mut t = Vec::with_capacity(6 * grid.n_points());
    for p in 0..grid.n_points() {
        let c = grid.point_coords(p);
        for w in Axis::ALL {
            let i = w.index();
            if c[i] + 1 < dims[i] {
                t.push((p, grid.edge(w, p), 1));
            }
            if c[i] > 0 {
                t.push((p, grid.edge(w, p - k[i]), -1));
            }
        }
    }
    IntSparse::from_triplets(grid.n_points(), grid.n_dof(), &t)
}

/// Selection of the free entities of one kind.
#[derive(Debug, Clone)]
pub struct Projection {
    pub kind: EntityKind,
    /// Global slot of every free entity, ascending.
    pub free: Vec<usize>,
    /// Local index of each global slot, `None` when not free.
    pub local: Vec<Option<usize>>,
}

impl Projection {
    fn new(kind: EntityKind, n_slots: usize, is_free: impl Fn(usize) -> bool) -> Self {
        let free: Vec<usize> = (0..n_slots).filter(|&s| is_free(s)).collect();
        let mut local = vec![None; n_slots];
        for (i, &s) in free.iter().enumerate() {
            local[s] = Some(i);
        }
        Self { kind, free, local }
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn n_slots(&self) -> usize {
        self.local.len()
    }

    /// Rectangular 0/1 selection matrix (free × slots).
    pub fn selection(&self) -> IntSparse {
        let t: Vec<_> = self.free.iter().enumerate().map(|(i, &s)| (i, s, 1)).collect();
        IntSparse::from_triplets(self.free.len(), self.local.len(), &t)
    }

    pub fn restrict(&self, global: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&s| global[s]).collect()
    }

    pub fn extend(&self, local: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.local.len()];
        for (i, &s) in self.free.iter().enumerate() {
            g[s] = local[i];
        }
        g
    }
}

/// Operators restricted to the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct ProjectedOps {
    pub points: Projection,
    pub edges: Projection,
    pub facets: Projection,
    pub cells: Projection,
    /// Points on electric boundary faces; they carry prescribed potentials.
    pub fixed_points: Projection,
    /// Free facets × free edges.
    pub curl: IntSparse,
    /// Cells × free facets.
    pub div: IntSparse,
    /// Free points × free edges.
    pub dual_div: IntSparse,
    /// Free edges × fixed points: gradient columns of the prescribed potentials.
    pub grad_fixed: IntSparse,
}

impl ProjectedOps {
    pub fn grad(&self) -> IntSparse {
        self.dual_div.transpose().neg()
    }

    pub fn dual_curl(&self) -> IntSparse {
        self.curl.transpose()
    }

    pub fn dual_grad(&self) -> IntSparse {
        self.div.transpose().neg()
    }

    pub fn projection(&self, kind: EntityKind) -> &Projection {
        match kind {
            EntityKind::Point => &self.points,
            EntityKind::Edge => &self.edges,
            EntityKind::Facet => &self.facets,
            EntityKind::Volume => &self.cells,
        }
    }

    /// True when the projected gradient has a trivial kernel, i.e. every connected
    /// set of free points touches a prescribed potential.
    pub fn gradient_is_injective(&self) -> bool {
        let n = self.points.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let g = self.grad();
        let gf = &self.grad_fixed;
        let mut anchored = vec![false; n];
        for e in 0..g.nrows() {
            let (c, _) = g.row(e);
            if c.len() == 2 {
                let (a, b) = (find(&mut parent, c[0]), find(&mut parent, c[1]));
                parent[a] = b;
            }
        }
        for e in 0..g.nrows() {
            let (c, _) = g.row(e);
            if c.len() == 1 || gf.row_nnz(e) > 0 {
                for &p in c {
                    let r = find(&mut parent, p);
                    anchored[r] = true;
                }
            }
        }
        (0..n).all(|p| {
            let r = find(&mut parent, p);
            anchored[r]
        })
    }
}

/// Removes phantom entities and the entities fixed by electric boundary faces.
pub fn project_free(ops: &TopoOps, grid: &Grid) -> Result<ProjectedOps> {
    let n = grid.n_points();
    let points = Projection::new(EntityKind::Point, n, |p| !grid.is_constrained_point(p));
    let fixed_points = Projection::new(EntityKind::Point, n, |p| grid.is_constrained_point(p));
    let edges = Projection::new(EntityKind::Edge, 3 * n, |e| !grid.phantom_edge[e] && !grid.is_constrained_edge(e));
    let facets =
        Projection::new(EntityKind::Facet, 3 * n, |f| !grid.phantom_facet[f] && !grid.is_constrained_facet(f));
    let cells = Projection::new(EntityKind::Volume, n, |c| !grid.phantom_cell[c]);
    if edges.is_empty() {
        return Err(Error::DegenerateProblem("no free edges remain after applying the boundary".into()));
    }
    let curl = ops.curl.select(&facets.free, &edges.free);
    let div = ops.div.select(&cells.free, &facets.free);
    let dual_div = ops.dual_div.select(&points.free, &edges.free);
    let grad_fixed = ops.dual_div.select(&fixed_points.free, &edges.free).transpose().neg();
    Ok(ProjectedOps { points, edges, facets, cells, fixed_points, curl, div, dual_div, grad_fixed })
}
