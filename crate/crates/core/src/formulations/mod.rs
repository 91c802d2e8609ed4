//! Discrete formulations of the field problem as DAE systems.
//!
//! Every assembler reads a [`FitProblem`] (grid, projected operators, material
//! matrices, windings and driven contacts) and returns a [`DaeSystem`].

mod darwin;
mod fullwave;
mod potentials;
mod quasistatic;
mod system;
mod tree_cotree;

use serde::{Deserialize, Serialize};

pub use darwin::{darwin_a, darwin_b};
pub use fullwave::{fullwave_eh, transformed_stiffness};
pub use potentials::{aphi_coulomb, aphi_lorenz, continuity_residual, wave_pair, ContinuityCheck};
pub use quasistatic::{eqs_mixed, eqs_phi, grad_div_gauge, mqs_astar};
pub use system::{
    Block, DaeSystem, FieldMap, Formulation, Observable, Predicate, Reduce, SourceTerm, Waveform,
};
pub use tree_cotree::{build_tree_cotree, mqs_tomega, TreeCotree};

use crate::error::{Error, Result};
use crate::grid::{label_subdomains, Axis, Face, Grid, Region, SubdomainMap, EPS0, MU0};
use crate::linsolve::SparseMatrix;
use crate::materials::{MaterialSet, ScalingMode, Winding, WindingSet};
use crate::topology::{project_free, ProjectedOps, TopoOps};

/// Gauge added to the vector-potential formulations without a scalar potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    None,
    #[default]
    Graddiv,
}

/// Electric boundary face held at the potential `waveform(t)` (volts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub face: Face,
    pub waveform: Waveform,
}

/// Prescribed node charges `vector·w(t)` over the free points.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeSource {
    pub vector: Vec<f64>,
    pub waveform: Waveform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    /// Base permittivity the relative region values refer to.
    pub eps0: f64,
    pub mu0: f64,
    pub scaling: ScalingMode,
    pub gauge: Gauge,
    /// Weight of the permittivity term in the regularised conductance of the grad-div gauge,
    /// relative to the fastest conductor relaxation rate.
    pub theta: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { eps0: EPS0, mu0: MU0, scaling: ScalingMode::Diagonal, gauge: Gauge::Graddiv, theta: 1e-3 }
    }
}

/// Everything the assemblers need, built once per scene.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub grid: Grid,
    pub sub: SubdomainMap,
    pub topo: TopoOps,
    pub ops: ProjectedOps,
    pub mats: MaterialSet,
    pub windings: Vec<Winding>,
    pub winding_set: WindingSet,
    /// Current waveform per winding (A).
    pub currents: Vec<Waveform>,
    pub contacts: Vec<Contact>,
    pub charge: Option<ChargeSource>,
    pub settings: Settings,
}

impl FitProblem {
    pub fn new(
        grid: Grid,
        regions: &[Region],
        windings: Vec<Winding>,
        currents: Vec<Waveform>,
        contacts: Vec<Contact>,
        settings: Settings,
    ) -> Result<Self> {
        if currents.len() != windings.len() {
            return Err(Error::InvalidSpec(format!(
                "{} windings but {} current waveforms",
                windings.len(),
                currents.len()
            )));
        }
        for c in &contacts {
            if !grid.boundary.is_electric(c.face) {
                return Err(Error::InvalidSpec(format!("contact on {} needs an electric boundary", c.face.name())));
            }
        }
        let sub = label_subdomains(&grid, regions, settings.eps0, settings.mu0)?;
        let topo = TopoOps::build(&grid);
        let ops = project_free(&topo, &grid)?;
        let mats = MaterialSet::assemble(&grid, &sub, &ops, settings.scaling)?;
        let winding_set = WindingSet::assemble(&grid, &ops, &windings)?;
        Ok(Self { grid, sub, topo, ops, mats, windings, winding_set, currents, contacts, charge: None, settings })
    }

    pub fn with_charge(mut self, charge: ChargeSource) -> Result<Self> {
        if charge.vector.len() != self.ops.points.len() {
            return Err(Error::InvalidSpec("charge vector must cover the free points".into()));
        }
        self.charge = Some(charge);
        Ok(self)
    }

    pub fn curl(&self) -> SparseMatrix {
        self.ops.curl.to_f64()
    }

    pub fn dual_div(&self) -> SparseMatrix {
        self.ops.dual_div.to_f64()
    }

    pub fn grad(&self) -> SparseMatrix {
        self.ops.grad().to_f64()
    }

    /// `CᵀM_νC` over the free edges.
    pub fn curl_curl(&self) -> SparseMatrix {
        let c = self.curl();
        c.transpose().scale_cols(&self.mats.nu).matmul(&c)
    }

    /// Unit potential pattern of every contact over the fixed points. A point shared by
    /// several contacts belongs to the last one listed.
    pub fn contact_patterns(&self) -> Vec<(Vec<f64>, Waveform)> {
        let fixed = &self.ops.fixed_points.free;
        let mut owner: Vec<Option<usize>> = vec![None; fixed.len()];
        for (ci, c) in self.contacts.iter().enumerate() {
            for (k, &p) in fixed.iter().enumerate() {
                if self.grid.on_face(p, c.face) {
                    owner[k] = Some(ci);
                }
            }
        }
        self.contacts
            .iter()
            .enumerate()
            .map(|(ci, c)| (owner.iter().map(|o| if *o == Some(ci) { 1.0 } else { 0.0 }).collect(), c.waveform))
            .collect()
    }

    /// Gradient of each contact pattern over the free edges: `G_fixed φ_c`.
    pub fn contact_gradients(&self) -> Vec<(Vec<f64>, Waveform)> {
        let gf = self.ops.grad_fixed.to_f64();
        self.contact_patterns().into_iter().map(|(phi, w)| (gf.matvec(&phi), w)).collect()
    }

    /// `Σ_k X_k i_k(t)` as separate terms, over the free edges.
    pub fn current_sources(&self) -> Vec<(Vec<f64>, Waveform)> {
        self.winding_set.columns.iter().cloned().zip(self.currents.iter().copied()).collect()
    }

    /// Weights turning the electric field into the conduction current through the
    /// layer of `axis`-directed edges starting at grid line `layer`.
    pub fn plane_current_weights(&self, axis: Axis, layer: usize) -> Vec<f64> {
        self.ops
            .edges
            .free
            .iter()
            .zip(&self.mats.sigma)
            .map(|(&e, &s)| {
                let (a, p) = self.grid.split_slot(e);
                if a == axis && self.grid.point_coords(p)[axis.index()] == layer {
                    s
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn has_conductivity(&self) -> bool {
        self.mats.sigma.iter().any(|&s| s > 0.0)
    }

    pub fn assemble(&self, f: Formulation) -> Result<DaeSystem> {
        match f {
            Formulation::FullwaveEh => fullwave_eh(self),
            Formulation::AphiLorenz => aphi_lorenz(self),
            Formulation::AphiCoulomb => aphi_coulomb(self),
            Formulation::WavePair => wave_pair(self),
            Formulation::Eqs => eqs_phi(self),
            Formulation::EqsMixed => eqs_mixed(self),
            Formulation::MqsAstar => mqs_astar(self, self.settings.gauge),
            Formulation::MqsTomega => mqs_tomega(self),
            Formulation::DarwinA => darwin_a(self),
            Formulation::DarwinB => darwin_b(self),
        }
    }
}

/// Stacks sparse blocks; `None` marks a zero block.
pub(crate) fn blocks(rows: &[Vec<Option<&SparseMatrix>>], row_sizes: &[usize], col_sizes: &[usize]) -> SparseMatrix {
    SparseMatrix::block(rows, row_sizes, col_sizes)
}

pub(crate) fn neg(a: &SparseMatrix) -> SparseMatrix {
    a.scale(-1.0)
}

/// `−S̃ diag(w) G_fixed`: coupling of the prescribed potentials into the node equations.
pub(crate) fn fixed_laplacian(p: &FitProblem, w: &[f64]) -> SparseMatrix {
    let gf = p.ops.grad_fixed.to_f64();
    p.dual_div().scale_cols(w).matmul(&gf).scale(-1.0)
}
