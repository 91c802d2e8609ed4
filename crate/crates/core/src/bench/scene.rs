use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{Contact, FitProblem, Formulation, Settings, Waveform};
use crate::grid::{Axis, Boundary, BoundaryCondition, Face, Grid, GridSpec, Region};
use crate::materials::Winding;

/// Current fixture format version.
pub const SCENE_VERSION: u32 = 1;

/// Boundary class per domain face; faces left out are electric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundarySpec {
    pub xmin: BoundaryCondition,
    pub xmax: BoundaryCondition,
    pub ymin: BoundaryCondition,
    pub ymax: BoundaryCondition,
    pub zmin: BoundaryCondition,
    pub zmax: BoundaryCondition,
}

impl BoundarySpec {
    pub fn all(bc: BoundaryCondition) -> Self {
        Self { xmin: bc, xmax: bc, ymin: bc, ymax: bc, zmin: bc, zmax: bc }
    }

    pub fn to_boundary(self) -> Boundary {
        Boundary([self.xmin, self.xmax, self.ymin, self.ymax, self.zmin, self.zmax])
    }

    pub fn with(self, face: Face, bc: BoundaryCondition) -> Self {
        let b = self.to_boundary().with(face, bc).0;
        Self { xmin: b[0], xmax: b[1], ymin: b[2], ymax: b[3], zmin: b[4], zmax: b[5] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ImplicitEuler,
    Leapfrog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub method: Method,
    /// Fixed step (s). When absent the step is `cfl_fraction` times the CFL estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_fraction: Option<f64>,
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
}

/// Extra scalar recorded per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Probe {
    /// Conduction current through the layer of `axis` edges starting at grid line `layer`.
    PlaneCurrent { name: String, axis: Axis, layer: usize },
}

/// Reference values a run is compared against.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Expected {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// Unknown count per formulation tag.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub dofs: BTreeMap<String, usize>,
    /// Named reference scalars (units as named).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkScene {
    pub id: String,
    pub version: u32,
    #[serde(default)]
    pub description: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub regions: Vec<Region>,
    #[serde(default)]
    pub windings: Vec<Winding>,
    #[serde(default)]
    pub currents: Vec<Waveform>,
    #[serde(default)]
    pub contacts: Vec<Contact>,
    pub formulation: Formulation,
    pub integrator: Integrator,
    #[serde(default)]
    pub probes: Vec<Probe>,
    #[serde(default)]
    pub expected: Expected,
}

impl BenchmarkScene {
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(text)?;
        if scene.version != SCENE_VERSION {
            return Err(Error::Parse(format!("scene version {} is not supported", scene.version)));
        }
        Ok(scene)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn cell_count(&self) -> usize {
        (self.grid.x.len() - 1) * (self.grid.y.len() - 1) * (self.grid.z.len() - 1)
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::build(self.grid.clone(), self.boundary.to_boundary())
    }

    pub fn problem(&self) -> Result<FitProblem> {
        FitProblem::new(
            self.build_grid()?,
            &self.regions,
            self.windings.clone(),
            self.currents.clone(),
            self.contacts.clone(),
            self.settings,
        )
        .map_err(|e| e.context(&format!("scene {}", self.id)))
    }

    /// Same scene with every region conductivity removed.
    pub fn without_conductivity(&self) -> Self {
        let mut s = self.clone();
        s.regions.iter_mut().for_each(|r| r.sigma = None);
        s
    }
}
