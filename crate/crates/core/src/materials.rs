//! Material matrices, discrete Laplacians, the nodal scaling matrix and
//! stranded-winding discretisations.
//!
//! Edge-based matrices (permittivity, conductivity, permeability) integrate the
//! cell values over the four quadrants of the dual facet; facet-based matrices
//! (reluctivity, resistivity) add the cell values in series along the dual edge.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, BoxRegion, Grid, SubdomainMap};
use crate::linsolve::{cg_solve, is_positive_definite, norm2, SparseMatrix};
use crate::topology::ProjectedOps;

/// Dense scaling matrices are refused above this many nodes.
pub const DENSE_MODE_NODE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    /// Edge-based, F.
    Permittivity,
    /// Edge-based, S.
    Conductivity,
    /// Edge-based, H. Used when the primal edges carry magnetic voltages.
    Permeability,
    /// Facet-based, 1/H.
    Reluctivity,
    /// Facet-based, Ω, restricted to the conducting cells.
    Resistivity,
}

/// Diagonal of the material matrix of `property` over all slots; phantom slots are zero.
pub fn assemble_hodge(grid: &Grid, sub: &SubdomainMap, property: Property) -> Result<Vec<f64>> {
    let n = grid.n_dof();
    let mut out = vec![0.0; n];
    for (c, (&eps, &mu)) in sub.eps.iter().zip(&sub.mu).enumerate() {
        if grid.phantom_cell[c] {
            continue;
        }
        if !(eps > 0.0) || !(mu > 0.0) {
            return Err(Error::MaterialError(format!("cell {c} has eps = {eps}, mu = {mu}")));
        }
        if !(sub.sigma[c] >= 0.0) {
            return Err(Error::MaterialError(format!("cell {c} has sigma = {}", sub.sigma[c])));
        }
    }
    match property {
        Property::Permittivity | Property::Conductivity | Property::Permeability => {
            let value = |c: usize| match property {
                Property::Permittivity => sub.eps[c],
                Property::Conductivity => sub.sigma[c],
                _ => sub.mu[c],
            };
            for (e, v) in out.iter_mut().enumerate() {
                if grid.phantom_edge[e] {
                    continue;
                }
                let flux: f64 = grid.edge_quadrants(e).iter().map(|&(c, a)| value(c) * a).sum();
                *v = flux / grid.edge_lengths[e];
            }
        }
        Property::Reluctivity | Property::Resistivity => {
            let value = |c: usize| match property {
                Property::Reluctivity => 1.0 / sub.mu[c],
                _ if sub.sigma[c] > 0.0 => 1.0 / sub.sigma[c],
                _ => 0.0,
            };
            for (f, v) in out.iter_mut().enumerate() {
                if grid.phantom_facet[f] {
                    continue;
                }
                let drop: f64 = grid.facet_halves(f).iter().map(|&(c, l)| value(c) * l).sum();
                *v = drop / grid.facet_areas[f];
            }
        }
    }
    Ok(out)
}

/// Node Laplacian `S̃ diag(w) S̃ᵀ` (equal to `−S̃ diag(w) G`) over the free points.
pub fn laplacian(ops: &ProjectedOps, w: &[f64]) -> SparseMatrix {
    let sd = ops.dual_div.to_f64();
    sd.scale_cols(w).matmul(&sd.transpose())
}

/// Permittivity and conductivity Laplacians. The former must be positive definite.
pub fn laplacians(ops: &ProjectedOps, eps: &[f64], sigma: &[f64]) -> Result<(SparseMatrix, SparseMatrix)> {
    let l_eps = laplacian(ops, eps);
    if l_eps.nrows() > 0 && !is_positive_definite(&l_eps) {
        return Err(Error::AssemblyBug("permittivity Laplacian failed the Cholesky test".into()));
    }
    Ok((l_eps, laplacian(ops, sigma)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    /// Dense `D L⁻¹ D`.
    Dense,
    /// `D diag(L)⁻¹ D`: positive and well scaled also for floating conductors, where
    /// the exact inverse has very large entries.
    #[default]
    Diagonal,
}

/// Per-node averages of the edge weights over the incident free edges and of the
/// reluctivity entries over the free facets having the node as a corner.
pub fn nodal_lumps(ops: &ProjectedOps, edge_w: &[f64], nu: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let curl_t = ops.dual_curl();
    let n = ops.points.len();
    let mut me = vec![0.0; n];
    let mut mn = vec![0.0; n];
    let mut seen = vec![usize::MAX; ops.facets.len()];
    for (i, (me_i, mn_i)) in me.iter_mut().zip(mn.iter_mut()).enumerate() {
        let (edges, _) = ops.dual_div.row(i);
        *me_i = edges.iter().map(|&e| edge_w[e]).sum::<f64>() / edges.len() as f64;
        let mut count = 0;
        for &e in edges {
            for &f in curl_t.row(e).0 {
                if seen[f] != i {
                    seen[f] = i;
                    *mn_i += nu[f];
                    count += 1;
                }
            }
        }
        if count > 0 {
            *mn_i /= count as f64;
        }
    }
    (me, mn)
}

/// Scaling matrix `D L⁻¹ D` with `D = diag(sqrt(ν-lump / w-lump))`, where `l` is the
/// Laplacian built from the edge weights `edge_w`.
pub fn scaling_matrix(
    mode: ScalingMode,
    ops: &ProjectedOps,
    edge_w: &[f64],
    nu: &[f64],
    l: &SparseMatrix,
) -> Result<SparseMatrix> {
    let n = l.nrows();
    let (me, mn) = nodal_lumps(ops, edge_w, nu);
    let d: Vec<f64> = me.iter().zip(&mn).map(|(e, v)| (v / e).sqrt()).collect();
    if let Some(i) = d.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::MaterialError(format!("node {i} has no usable material lumps")));
    }
    match mode {
        ScalingMode::Dense => {
            if n > DENSE_MODE_NODE_LIMIT {
                return Err(Error::SizeLimit(format!(
                    "dense scaling matrix requested for {n} nodes (limit {DENSE_MODE_NODE_LIMIT})"
                )));
            }
            let inv = l
                .to_dense()
                .try_inverse()
                .ok_or_else(|| Error::SingularLaplacian("Laplacian is not invertible".into()))?;
            let m = DMatrix::from_fn(n, n, |i, j| d[i] * 0.5 * (inv[(i, j)] + inv[(j, i)]) * d[j]);
            Ok(SparseMatrix::from_dense(&m))
        }
        ScalingMode::Diagonal => {
            let diag: Vec<f64> = l.diagonal().iter().zip(&d).map(|(lii, di)| di * di / lii).collect();
            Ok(SparseMatrix::diag(&diag))
        }
    }
}

/// Material matrices projected onto the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct MaterialSet {
    /// Permittivity over free edges (F).
    pub eps: Vec<f64>,
    /// Conductivity over free edges (S).
    pub sigma: Vec<f64>,
    /// Reluctivity over free facets (1/H).
    pub nu: Vec<f64>,
    pub l_eps: SparseMatrix,
    pub l_sigma: SparseMatrix,
    pub mode: ScalingMode,
    /// Every free node is connected to a prescribed potential, so `l_eps` is definite.
    pub anchored: bool,
    scaling: OnceLock<SparseMatrix>,
}

impl MaterialSet {
    /// Assembles the projected matrices. The Laplacians are checked only when an
    /// electric boundary anchors the potentials; the scaling matrix is built on first use.
    pub fn assemble(grid: &Grid, sub: &SubdomainMap, ops: &ProjectedOps, mode: ScalingMode) -> Result<Self> {
        let eps = ops.edges.restrict(&assemble_hodge(grid, sub, Property::Permittivity)?);
        let sigma = ops.edges.restrict(&assemble_hodge(grid, sub, Property::Conductivity)?);
        let nu = ops.facets.restrict(&assemble_hodge(grid, sub, Property::Reluctivity)?);
        let anchored = !ops.points.is_empty() && ops.gradient_is_injective();
        let (l_eps, l_sigma) = if anchored {
            laplacians(ops, &eps, &sigma)?
        } else {
            (laplacian(ops, &eps), laplacian(ops, &sigma))
        };
        Ok(Self { eps, sigma, nu, l_eps, l_sigma, mode, anchored, scaling: OnceLock::new() })
    }

    pub fn m_eps(&self) -> SparseMatrix {
        SparseMatrix::diag(&self.eps)
    }

    pub fn m_sigma(&self) -> SparseMatrix {
        SparseMatrix::diag(&self.sigma)
    }

    pub fn m_nu(&self) -> SparseMatrix {
        SparseMatrix::diag(&self.nu)
    }

    /// Fails with `SingularLaplacian` when no electric boundary fixes the potentials.
    pub fn require_anchored(&self) -> Result<()> {
        if self.anchored {
            Ok(())
        } else {
            Err(Error::SingularLaplacian("no electric boundary anchors the potentials".into()))
        }
    }

    /// Scaling matrix built from the permittivity Laplacian.
    pub fn scaling(&self, ops: &ProjectedOps) -> Result<&SparseMatrix> {
        self.require_anchored()?;
        if let Some(m) = self.scaling.get() {
            return Ok(m);
        }
        let m = scaling_matrix(self.mode, ops, &self.eps, &self.nu, &self.l_eps)?;
        Ok(self.scaling.get_or_init(|| m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum WindingShape {
    /// Straight bundle along `axis` filling the box.
    Straight {
        #[serde(rename = "box")]
        bbox: BoxRegion,
        axis: Axis,
    },
    /// Rectangular coil around `axis`: the region between `outer` and `inner`,
    /// restricted to the axial extent of `outer`. Current circulates counter-clockwise
    /// seen from the positive axis.
    Loop { outer: BoxRegion, inner: BoxRegion, axis: Axis },
}

/// Stranded conductor with `turns` turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    #[serde(default)]
    pub name: String,
    pub turns: f64,
    #[serde(flatten)]
    pub shape: WindingShape,
}

impl Winding {
    /// Cross-section the turns are distributed over (m²).
    pub fn cross_section(&self) -> f64 {
        match &self.shape {
            WindingShape::Straight { bbox, axis } => {
                let (u, v) = axis.others();
                extent(bbox, u) * extent(bbox, v)
            }
            WindingShape::Loop { outer, inner, axis } => {
                let (_, v) = axis.others();
                (inner.min[v.index()] - outer.min[v.index()]) * extent(outer, *axis)
            }
        }
    }
}

fn extent(b: &BoxRegion, a: Axis) -> f64 {
    b.max[a.index()] - b.min[a.index()]
}

/// Part of the dual cell around grid line `i` of `axis` that lies inside `[lo, hi]`.
fn dual_overlap(grid: &Grid, axis: Axis, i: usize, lo: f64, hi: f64) -> f64 {
    let c = grid.spec.coords(axis);
    let a = if i > 0 { 0.5 * (c[i - 1] + c[i]) } else { c[i] };
    let b = if i + 1 < c.len() { 0.5 * (c[i] + c[i + 1]) } else { c[i] };
    (b.min(hi) - a.max(lo)).max(0.0)
}

fn snap_required(grid: &Grid, axis: Axis, x: f64, what: &str) -> Result<usize> {
    grid.snap(axis, x)
        .ok_or_else(|| Error::InvalidSpec(format!("winding {what} bound {x} on {axis:?} is not a grid plane")))
}

fn point_at(grid: &Grid, axes: [Axis; 3], idx: [usize; 3]) -> usize {
    let mut c = [0; 3];
    for (a, i) in axes.iter().zip(idx) {
        c[a.index()] = i;
    }
    grid.point(c[0], c[1], c[2])
}

struct LoopFrame {
    axes: [Axis; 3],
    /// Grid-line indices `[u_outer_min, u_outer_max, v_outer_min, v_outer_max]`.
    outer: [usize; 4],
    /// Number of cells across the wall.
    wall: usize,
    /// Cell widths across the wall, from the outside in.
    widths: Vec<f64>,
    axial: (f64, f64),
}

fn loop_frame(grid: &Grid, outer: &BoxRegion, inner: &BoxRegion, axis: Axis) -> Result<LoopFrame> {
    let (u, v) = axis.others();
    let s = |a: Axis, x: f64| snap_required(grid, a, x, "loop");
    let o = [
        s(u, outer.min[u.index()])?,
        s(u, outer.max[u.index()])?,
        s(v, outer.min[v.index()])?,
        s(v, outer.max[v.index()])?,
    ];
    let inn = [
        s(u, inner.min[u.index()])?,
        s(u, inner.max[u.index()])?,
        s(v, inner.min[v.index()])?,
        s(v, inner.max[v.index()])?,
    ];
    s(axis, outer.min[axis.index()])?;
    s(axis, outer.max[axis.index()])?;
    let walls = [inn[0].checked_sub(o[0]), o[1].checked_sub(inn[1]), inn[2].checked_sub(o[2]), o[3].checked_sub(inn[3])];
    let wall = walls[2].filter(|&w| w > 0).ok_or_else(|| Error::InvalidSpec("loop inner box not inside outer".into()))?;
    if walls.iter().any(|&w| w != Some(wall)) || inn[0] >= inn[1] || inn[2] >= inn[3] {
        return Err(Error::InvalidSpec("loop winding walls must span equally many cells on every side".into()));
    }
    let mut widths = Vec::with_capacity(wall);
    for i in 0..wall {
        let side = [grid.spacing(u, o[0] + i), grid.spacing(u, o[1] - 1 - i), grid.spacing(v, o[2] + i), grid.spacing(v, o[3] - 1 - i)];
        if side.iter().any(|&w| (w - side[0]).abs() > 1e-9 * side[0]) {
            return Err(Error::InvalidSpec("loop winding walls must have equal cell widths on every side".into()));
        }
        widths.push(side[0]);
    }
    Ok(LoopFrame { axes: [u, v, axis], outer: o, wall, widths, axial: (outer.min[axis.index()], outer.max[axis.index()]) })
}

/// Winding function on the dual facets: entry `(N/A)·|Ã ∩ Ω|` for each edge slot.
pub fn discretise_winding(grid: &Grid, w: &Winding) -> Result<Vec<f64>> {
    let mut x = vec![0.0; grid.n_dof()];
    let density = w.turns / w.cross_section();
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::InvalidSpec(format!("winding '{}' has no cross-section or turns", w.name)));
    }
    match &w.shape {
        WindingShape::Straight { bbox, axis } => {
            let (u, v) = axis.others();
            let lo = snap_required(grid, *axis, bbox.min[axis.index()], "straight")?;
            let hi = snap_required(grid, *axis, bbox.max[axis.index()], "straight")?;
            let dims = grid.dims();
            for iw in lo..hi {
                for iu in 0..dims[u.index()] {
                    let au = dual_overlap(grid, u, iu, bbox.min[u.index()], bbox.max[u.index()]);
                    for iv in 0..dims[v.index()] {
                        let av = dual_overlap(grid, v, iv, bbox.min[v.index()], bbox.max[v.index()]);
                        if au * av > 0.0 {
                            let p = point_at(grid, [*axis, u, v], [iw, iu, iv]);
                            x[grid.edge(*axis, p)] = density * au * av;
                        }
                    }
                }
            }
        }
        WindingShape::Loop { outer, inner, axis } => {
            let fr = loop_frame(grid, outer, inner, *axis)?;
            let [u, v, a] = fr.axes;
            let [u0, u1, v0, v1] = fr.outer;
            for i in 0..=fr.wall {
                let mut radial = 0.0;
                if i > 0 {
                    radial += 0.5 * fr.widths[i - 1];
                }
                if i < fr.wall {
                    radial += 0.5 * fr.widths[i];
                }
                for k in 0..grid.dims()[a.index()] {
                    let val = density * radial * dual_overlap(grid, a, k, fr.axial.0, fr.axial.1);
                    if val == 0.0 {
                        continue;
                    }
                    for m in (u0 + i)..(u1 - i) {
                        x[grid.edge(u, point_at(grid, [u, v, a], [m, v0 + i, k]))] = val;
                        x[grid.edge(u, point_at(grid, [u, v, a], [m, v1 - i, k]))] = -val;
                    }
                    for m in (v0 + i)..(v1 - i) {
                        x[grid.edge(v, point_at(grid, [u, v, a], [u1 - i, m, k]))] = val;
                        x[grid.edge(v, point_at(grid, [u, v, a], [u0 + i, m, k]))] = -val;
                    }
                }
            }
        }
    }
    Ok(x)
}

/// Winding function on the primal facets, used when the primal grid carries the
/// magnetic quantities. Loop windings are discretised as closed rings of cells.
pub fn discretise_winding_facets(grid: &Grid, w: &Winding) -> Result<Vec<f64>> {
    let mut x = vec![0.0; grid.n_dof()];
    let density = w.turns / w.cross_section();
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::InvalidSpec(format!("winding '{}' has no cross-section or turns", w.name)));
    }
    match &w.shape {
        WindingShape::Straight { bbox, axis } => {
            let (u, v) = axis.others();
            let s = |a: Axis, x: f64| snap_required(grid, a, x, "straight");
            let (w0, w1) = (s(*axis, bbox.min[axis.index()])?, s(*axis, bbox.max[axis.index()])?);
            let (u0, u1) = (s(u, bbox.min[u.index()])?, s(u, bbox.max[u.index()])?);
            let (v0, v1) = (s(v, bbox.min[v.index()])?, s(v, bbox.max[v.index()])?);
            for iw in w0..=w1 {
                for iu in u0..u1 {
                    for iv in v0..v1 {
                        let p = point_at(grid, [*axis, u, v], [iw, iu, iv]);
                        x[grid.facet(*axis, p)] = density * grid.facet_areas[grid.facet(*axis, p)];
                    }
                }
            }
        }
        WindingShape::Loop { outer, inner, axis } => {
            let fr = loop_frame(grid, outer, inner, *axis)?;
            let [u, v, a] = fr.axes;
            let [u0, u1, v0, v1] = fr.outer;
            let k0 = snap_required(grid, a, fr.axial.0, "loop")?;
            let k1 = snap_required(grid, a, fr.axial.1, "loop")?;
            for i in 0..fr.wall {
                for k in k0..k1 {
                    let val = density * fr.widths[i] * grid.spacing(a, k);
                    for m in (u0 + i + 1)..(u1 - i) {
                        x[grid.facet(u, point_at(grid, [u, v, a], [m, v0 + i, k]))] = val;
                        x[grid.facet(u, point_at(grid, [u, v, a], [m, v1 - 1 - i, k]))] = -val;
                    }
                    for m in (v0 + i + 1)..(v1 - i) {
                        x[grid.facet(v, point_at(grid, [u, v, a], [u1 - 1 - i, m, k]))] = val;
                        x[grid.facet(v, point_at(grid, [u, v, a], [u0 + i, m, k]))] = -val;
                    }
                }
            }
        }
    }
    Ok(x)
}

/// Fails when two winding functions share a nonzero entry.
pub fn check_disjoint(columns: &[Vec<f64>]) -> Result<()> {
    for i in 0..columns.len() {
        for j in (i + 1)..columns.len() {
            if let Some(k) = columns[i].iter().zip(&columns[j]).position(|(a, b)| a * b != 0.0) {
                return Err(Error::IntersectionViolation(format!("windings {i} and {j} share slot {k}")));
            }
        }
    }
    Ok(())
}

/// Winding functions of a scene restricted to the free edges.
#[derive(Debug, Clone, Default)]
pub struct WindingSet {
    pub names: Vec<String>,
    pub turns: Vec<f64>,
    pub areas: Vec<f64>,
    /// One column per winding, over free edges (A per ampere).
    pub columns: Vec<Vec<f64>>,
}

impl WindingSet {
    pub fn assemble(grid: &Grid, ops: &ProjectedOps, windings: &[Winding]) -> Result<Self> {
        let full: Vec<Vec<f64>> = windings.iter().map(|w| discretise_winding(grid, w)).collect::<Result<_>>()?;
        check_disjoint(&full)?;
        Ok(Self {
            names: windings.iter().map(|w| w.name.clone()).collect(),
            turns: windings.iter().map(|w| w.turns).collect(),
            areas: windings.iter().map(Winding::cross_section).collect(),
            columns: full.iter().map(|c| ops.edges.restrict(c)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// `Σ_k X_k i_k`.
    pub fn current_density(&self, currents: &[f64]) -> Vec<f64> {
        let n = self.columns.first().map_or(0, Vec::len);
        let mut j = vec![0.0; n];
        for (col, &i) in self.columns.iter().zip(currents) {
            j.iter_mut().zip(col).for_each(|(j, x)| *j += x * i);
        }
        j
    }
}

/// Field `h = Bᵀy` with `B h = x`, found by conjugate gradients on `B Bᵀ`. The
/// source must be annihilated by `div`, the operator with `div·B = 0`.
pub fn curl_preimage(b: &SparseMatrix, div: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let xn = norm2(x);
    if xn == 0.0 {
        return Ok(vec![0.0; b.ncols()]);
    }
    let d = div.matvec(x);
    let scale = xn * div.norm_inf();
    if norm2(&d) > 1e-12 * scale {
        return Err(Error::SourceInconsistent(format!(
            "source has discrete divergence {:e} (relative)",
            norm2(&d) / scale
        )));
    }
    let bt = b.transpose();
    let normal = b.matmul(&bt);
    let y = cg_solve(&normal, x, 1e-13, 20 * normal.nrows().max(100))?;
    let h = bt.matvec(&y);
    let r: Vec<f64> = b.matvec(&h).iter().zip(x).map(|(a, b)| a - b).collect();
    if norm2(&r) > 1e-10 * xn {
        return Err(Error::SourceInconsistent(format!("curl residual {:e} (relative)", norm2(&r) / xn)));
    }
    Ok(h)
}

/// Source magnetic voltage on the free facets with `C̃ h_s = x`.
pub fn source_h_field(ops: &ProjectedOps, x: &[f64]) -> Result<Vec<f64>> {
    curl_preimage(&ops.dual_curl().to_f64(), &ops.dual_div.to_f64(), x)
}
