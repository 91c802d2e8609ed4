//! Structured tensor-product grids: canonical numbering, primal and dual measures,
//! phantom entities, boundary classes and cell labelling.
//!
//! Points are numbered `n = ix + iy·nx + iz·nx·ny` (0-based internally). Edges and
//! facets are stored in three directional blocks of `N` slots each, ordered x, y, z;
//! the slot of an edge or facet is the index of its smallest point. Slots whose
//! span leaves the domain are phantom entities and carry zero measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permittivity in F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Axis {
        Self::ALL[i]
    }

    /// The two remaining axes in cyclic order.
    pub fn others(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::Z, Axis::X),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityKind {
    Point,
    Edge,
    Facet,
    Volume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax];

    pub fn axis(self) -> Axis {
        Axis::from_index(self as usize / 2)
    }

    pub fn is_max(self) -> bool {
        self as usize % 2 == 1
    }

    pub fn name(self) -> &'static str {
        ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"][self as usize]
    }
}

/// Boundary class of a domain face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BoundaryCondition {
    /// Tangential electric field vanishes.
    #[default]
    #[serde(rename = "ebc")]
    Electric,
    /// Tangential magnetic field vanishes.
    #[serde(rename = "mbc")]
    Magnetic,
}

/// Boundary class per face, indexed by [`Face`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Boundary(pub [BoundaryCondition; 6]);

impl Boundary {
    pub fn all(bc: BoundaryCondition) -> Self {
        Self([bc; 6])
    }

    pub fn with(mut self, face: Face, bc: BoundaryCondition) -> Self {
        self.0[face as usize] = bc;
        self
    }

    pub fn get(&self, face: Face) -> BoundaryCondition {
        self.0[face as usize]
    }

    pub fn is_electric(&self, face: Face) -> bool {
        self.get(face) == BoundaryCondition::Electric
    }

    pub fn any_electric(&self) -> bool {
        self.0.iter().any(|&b| b == BoundaryCondition::Electric)
    }
}

/// Axis coordinate arrays of a tensor-product grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl GridSpec {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let spec = Self { x, y, z };
        spec.validate()?;
        Ok(spec)
    }

    /// Equidistant grid with `cells[a]` cells of width `h[a]` along each axis, starting at the origin.
    pub fn uniform(cells: [usize; 3], h: [f64; 3]) -> Result<Self> {
        let ax = |n: usize, h: f64| (0..=n).map(|i| i as f64 * h).collect::<Vec<_>>();
        Self::new(ax(cells[0], h[0]), ax(cells[1], h[1]), ax(cells[2], h[2]))
    }

    pub fn coords(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for axis in Axis::ALL {
            let c = self.coords(axis);
            if c.len() < 2 {
                return Err(Error::InvalidSpec(format!("{axis:?} axis needs at least 2 points, got {}", c.len())));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("{axis:?} axis has non-finite coordinates")));
            }
            if let Some(i) = c.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::InvalidSpec(format!(
                    "{axis:?} coordinates not strictly increasing at position {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Grid with all primal and dual measures precomputed.
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub boundary: Boundary,
    dims: [usize; 3],
    strides: [usize; 3],
    n: usize,
    pub edge_lengths: Vec<f64>,
    pub facet_areas: Vec<f64>,
    /// Length of the dual edge crossing each facet, truncated at the boundary.
    pub dual_edge_lengths: Vec<f64>,
    /// Area of the dual facet crossed by each edge, truncated at the boundary.
    pub dual_facet_areas: Vec<f64>,
    pub cell_volumes: Vec<f64>,
    pub dual_cell_volumes: Vec<f64>,
    pub phantom_edge: Vec<bool>,
    pub phantom_facet: Vec<bool>,
    pub phantom_cell: Vec<bool>,
}

impl Grid {
    pub fn build(spec: GridSpec, boundary: Boundary) -> Result<Self> {
        spec.validate()?;
        let dims = [spec.x.len(), spec.y.len(), spec.z.len()];
        let strides = [1, dims[0], dims[0] * dims[1]];
        let n = dims[0] * dims[1] * dims[2];
        let mut g = Self {
            spec,
            boundary,
            dims,
            strides,
            n,
            edge_lengths: vec![0.0; 3 * n],
            facet_areas: vec![0.0; 3 * n],
            dual_edge_lengths: vec![0.0; 3 * n],
            dual_facet_areas: vec![0.0; 3 * n],
            cell_volumes: vec![0.0; n],
            dual_cell_volumes: vec![0.0; n],
            phantom_edge: vec![true; 3 * n],
            phantom_facet: vec![true; 3 * n],
            phantom_cell: vec![true; n],
        };
        for p in 0..n {
            let c = g.point_coords(p);
            let mut cell_inside = true;
            let mut dual_vol = 1.0;
            for a in Axis::ALL {
                dual_vol *= g.dual_width(a, c[a.index()]);
                if c[a.index()] + 1 >= dims[a.index()] {
                    cell_inside = false;
                }
            }
            g.dual_cell_volumes[p] = dual_vol;
            if cell_inside {
                g.phantom_cell[p] = false;
                g.cell_volumes[p] = Axis::ALL.iter().map(|&a| g.spacing(a, c[a.index()])).product();
            }
            for w in Axis::ALL {
                let (u, v) = w.others();
                let (iw, iu, iv) = (c[w.index()], c[u.index()], c[v.index()]);
                let e = g.edge(w, p);
                if iw + 1 < dims[w.index()] {
                    g.phantom_edge[e] = false;
                    g.edge_lengths[e] = g.spacing(w, iw);
                    g.dual_facet_areas[e] = g.dual_width(u, iu) * g.dual_width(v, iv);
                }
                let f = g.facet(w, p);
                if iu + 1 < dims[u.index()] && iv + 1 < dims[v.index()] {
                    g.phantom_facet[f] = false;
                    g.facet_areas[f] = g.spacing(u, iu) * g.spacing(v, iv);
                    g.dual_edge_lengths[f] = g.dual_width(w, iw);
                }
            }
        }
        Ok(g)
    }

    /// Points per axis `(nx, ny, nz)`.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Index strides `(kx, ky, kz) = (1, nx, nx·ny)`.
    pub fn strides(&self) -> [usize; 3] {
        self.strides
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    /// Number of edge (and facet) slots, `3N`.
    pub fn n_dof(&self) -> usize {
        3 * self.n
    }

    pub fn n_cells(&self) -> usize {
        self.phantom_cell.iter().filter(|&&p| !p).count()
    }

    pub fn point(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + iy * self.strides[1] + iz * self.strides[2]
    }

    pub fn point_coords(&self, p: usize) -> [usize; 3] {
        [p % self.dims[0], (p / self.dims[0]) % self.dims[1], p / (self.dims[0] * self.dims[1])]
    }

    pub fn edge(&self, axis: Axis, p: usize) -> usize {
        axis.index() * self.n + p
    }

    pub fn facet(&self, axis: Axis, p: usize) -> usize {
        axis.index() * self.n + p
    }

    /// Splits an edge or facet slot into its direction and base point.
    pub fn split_slot(&self, slot: usize) -> (Axis, usize) {
        (Axis::from_index(slot / self.n), slot % self.n)
    }

    /// 1-based canonical index of an entity given 1-based point coordinates.
    pub fn entity_index(&self, ix: usize, iy: usize, iz: usize, axis: Axis, kind: EntityKind) -> Result<usize> {
        let c = [ix, iy, iz];
        for a in 0..3 {
            if c[a] == 0 || c[a] > self.dims[a] {
                return Err(Error::IndexOutOfRange(format!(
                    "coordinate {} = {} outside 1..={}",
                    ["ix", "iy", "iz"][a],
                    c[a],
                    self.dims[a]
                )));
            }
        }
        let n = ix + (iy - 1) * self.strides[1] + (iz - 1) * self.strides[2];
        Ok(match kind {
            EntityKind::Point | EntityKind::Volume => n,
            EntityKind::Edge | EntityKind::Facet => axis.index() * self.n + n,
        })
    }

    pub fn spacing(&self, axis: Axis, i: usize) -> f64 {
        let c = self.spec.coords(axis);
        c[i + 1] - c[i]
    }

    /// Extent of the dual cell around point line `i` along `axis`: half the
    /// adjacent spacings, truncated at the boundary.
    pub fn dual_width(&self, axis: Axis, i: usize) -> f64 {
        let n = self.dims[axis.index()];
        let mut w = 0.0;
        if i > 0 {
            w += 0.5 * self.spacing(axis, i - 1);
        }
        if i + 1 < n {
            w += 0.5 * self.spacing(axis, i);
        }
        w
    }

    pub fn point_position(&self, p: usize) -> [f64; 3] {
        let c = self.point_coords(p);
        [self.spec.x[c[0]], self.spec.y[c[1]], self.spec.z[c[2]]]
    }

    /// Centre of the cell whose smallest corner is `p` (its dual point).
    pub fn cell_center(&self, p: usize) -> [f64; 3] {
        let c = self.point_coords(p);
        let mut x = [0.0; 3];
        for a in Axis::ALL {
            let co = self.spec.coords(a);
            x[a.index()] = 0.5 * (co[c[a.index()]] + co[c[a.index()] + 1]);
        }
        x
    }

    pub fn domain_volume(&self) -> f64 {
        Axis::ALL
            .iter()
            .map(|&a| {
                let c = self.spec.coords(a);
                c[c.len() - 1] - c[0]
            })
            .product()
    }

    pub fn on_face(&self, p: usize, face: Face) -> bool {
        let a = face.axis().index();
        let c = self.point_coords(p)[a];
        if face.is_max() {
            c + 1 == self.dims[a]
        } else {
            c == 0
        }
    }

    /// Point lies on an electric boundary face.
    pub fn is_constrained_point(&self, p: usize) -> bool {
        Face::ALL.iter().any(|&f| self.boundary.is_electric(f) && self.on_face(p, f))
    }

    /// Non-phantom edge lying inside an electric boundary face.
    pub fn is_constrained_edge(&self, e: usize) -> bool {
        let (w, p) = self.split_slot(e);
        let (u, v) = w.others();
        Face::ALL
            .iter()
            .filter(|f| f.axis() == u || f.axis() == v)
            .any(|&f| self.boundary.is_electric(f) && self.on_face(p, f))
    }

    /// Non-phantom facet lying inside an electric boundary face.
    pub fn is_constrained_facet(&self, f: usize) -> bool {
        let (w, p) = self.split_slot(f);
        Face::ALL
            .iter()
            .filter(|face| face.axis() == w)
            .any(|&face| self.boundary.is_electric(face) && self.on_face(p, face))
    }

    /// Cells adjacent to edge `e` together with the area each contributes to its dual facet.
    pub fn edge_quadrants(&self, e: usize) -> Vec<(usize, f64)> {
        let (w, p) = self.split_slot(e);
        let (u, v) = w.others();
        let c = self.point_coords(p);
        let mut out = Vec::with_capacity(4);
        for du in [0usize, 1] {
            for dv in [0usize, 1] {
                let (iu, iv) = (c[u.index()], c[v.index()]);
                if (du == 1 && iu == 0) || (dv == 1 && iv == 0) {
                    continue;
                }
                let cu = iu - du;
                let cv = iv - dv;
                if cu + 1 >= self.dims[u.index()] || cv + 1 >= self.dims[v.index()] {
                    continue;
                }
                let cell = p - du * self.strides[u.index()] - dv * self.strides[v.index()];
                let area = 0.5 * self.spacing(u, cu) * 0.5 * self.spacing(v, cv);
                out.push((cell, area));
            }
        }
        out
    }

    /// Cells adjacent to facet `f` together with the part of its dual edge inside each.
    pub fn facet_halves(&self, f: usize) -> Vec<(usize, f64)> {
        let (w, p) = self.split_slot(f);
        let iw = self.point_coords(p)[w.index()];
        let mut out = Vec::with_capacity(2);
        if iw > 0 {
            out.push((p - self.strides[w.index()], 0.5 * self.spacing(w, iw - 1)));
        }
        if iw + 1 < self.dims[w.index()] {
            out.push((p, 0.5 * self.spacing(w, iw)));
        }
        out
    }

    /// Index of the grid line at coordinate `x` along `axis`, if it coincides with one.
    pub fn snap(&self, axis: Axis, x: f64) -> Option<usize> {
        let c = self.spec.coords(axis);
        let tol = 1e-9 * (c[c.len() - 1] - c[0]);
        c.iter().position(|&ci| (ci - x).abs() <= tol)
    }
}

/// Axis-aligned box `[x0, x1] × [y0, y1] × [z0, z1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxRegion {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|a| x[a] >= self.min[a] && x[a] <= self.max[a])
    }

    /// Measure of the intersection with the box `[lo, hi]` along the axes in `axes`.
    pub fn overlap(&self, lo: [f64; 3], hi: [f64; 3], axes: &[Axis]) -> f64 {
        axes.iter()
            .map(|&a| {
                let i = a.index();
                (hi[i].min(self.max[i]) - lo[i].max(self.min[i])).max(0.0)
            })
            .product()
    }
}

/// Material region of a scene. Values are relative to the scene's base constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(default)]
    pub name: String,
    #[serde(rename = "box")]
    pub bbox: BoxRegion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_r: Option<f64>,
    /// Conductivity in S/m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Marks the region as the body of the given stranded winding; its conductivity
    /// does not enter the conductance matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winding: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellLabel {
    Air,
    Conductor { sigma: f64 },
    Source { winding: usize },
    Dielectric { eps_r: f64 },
    Magnetic { mu_r: f64 },
    Composite,
}

/// Per-cell material values and labels. Indexed by the cell's smallest point.
#[derive(Debug, Clone)]
pub struct SubdomainMap {
    pub labels: Vec<CellLabel>,
    /// Absolute permittivity (F/m).
    pub eps: Vec<f64>,
    /// Absolute permeability (H/m).
    pub mu: Vec<f64>,
    /// Conductivity entering the conductance matrix (S/m).
    pub sigma: Vec<f64>,
    pub source: Vec<Option<usize>>,
}

impl SubdomainMap {
    pub fn conductor_cells(&self, grid: &Grid) -> Vec<usize> {
        (0..grid.n_points()).filter(|&c| !grid.phantom_cell[c] && self.sigma[c] > 0.0).collect()
    }

    /// Total volume of cells satisfying `pred`.
    pub fn volume_where(&self, grid: &Grid, pred: impl Fn(CellLabel) -> bool) -> f64 {
        (0..grid.n_points())
            .filter(|&c| !grid.phantom_cell[c] && pred(self.labels[c]))
            .map(|c| grid.cell_volumes[c])
            .sum()
    }
}

/// Labels every cell from the region list; later regions override earlier ones.
/// `eps0` and `mu0` are the base constants the relative values refer to.
pub fn label_subdomains(grid: &Grid, regions: &[Region], eps0: f64, mu0: f64) -> Result<SubdomainMap> {
    for r in regions {
        for a in Axis::ALL {
            let c = grid.spec.coords(a);
            for x in [r.bbox.min[a.index()], r.bbox.max[a.index()]] {
                let inside = x > c[0] && x < c[c.len() - 1];
                if inside && grid.snap(a, x).is_none() {
                    return Err(Error::InvalidSpec(format!(
                        "region '{}' bound {x} on {a:?} is not a grid plane",
                        r.name
                    )));
                }
            }
            if r.bbox.max[a.index()] < r.bbox.min[a.index()] {
                return Err(Error::InvalidSpec(format!("region '{}' has an inverted box", r.name)));
            }
        }
        for (what, v) in [("eps_r", r.eps_r), ("mu_r", r.mu_r)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::MaterialError(format!("region '{}' has {what} = {v}", r.name)));
                }
            }
        }
        if let Some(s) = r.sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::MaterialError(format!("region '{}' has sigma = {s}", r.name)));
            }
        }
    }
    let n = grid.n_points();
    let mut map = SubdomainMap {
        labels: vec![CellLabel::Air; n],
        eps: vec![eps0; n],
        mu: vec![mu0; n],
        sigma: vec![0.0; n],
        source: vec![None; n],
    };
    for c in 0..n {
        if grid.phantom_cell[c] {
            continue;
        }
        let x = grid.cell_center(c);
        let (mut eps_r, mut mu_r, mut sigma, mut winding) = (1.0, 1.0, 0.0, None);
        let mut in_conductor = None;
        for r in regions.iter().filter(|r| r.bbox.contains(x)) {
            if let Some(v) = r.eps_r {
                eps_r = v;
            }
            if let Some(v) = r.mu_r {
                mu_r = v;
            }
            if let Some(w) = r.winding {
                winding = Some(w);
            } else if let Some(s) = r.sigma {
                sigma = s;
                if s > 0.0 {
                    in_conductor = Some(r.name.clone());
                }
            }
        }
        if let (Some(w), Some(name)) = (winding, &in_conductor) {
            if sigma > 0.0 {
                return Err(Error::DisjointnessViolation(format!(
                    "cell at {x:?} belongs to conductor '{name}' and winding {w}"
                )));
            }
        }
        map.eps[c] = eps_r * eps0;
        map.mu[c] = mu_r * mu0;
        map.sigma[c] = sigma;
        map.source[c] = winding;
        let special = [sigma > 0.0, winding.is_some(), eps_r != 1.0, mu_r != 1.0];
        map.labels[c] = match special.iter().filter(|&&s| s).count() {
            0 => CellLabel::Air,
            1 if sigma > 0.0 => CellLabel::Conductor { sigma },
            1 if winding.is_some() => CellLabel::Source { winding: winding.unwrap() },
            1 if eps_r != 1.0 => CellLabel::Dielectric { eps_r },
            1 => CellLabel::Magnetic { mu_r },
            _ => CellLabel::Composite,
        };
    }
    Ok(map)
}
