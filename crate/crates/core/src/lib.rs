//! Finite integration technique kernel: staggered-grid operators, material
//! matrices, differential-algebraic formulations of Maxwell's equations, time
//! integration and structural index analysis.

pub mod bench;
pub mod daekit;
pub mod error;
pub mod formulations;
pub mod grid;
pub mod linsolve;
pub mod materials;
pub mod timeint;
pub mod topology;

pub use daekit::{index_probe, PencilReport};
pub use error::{Error, Result};
pub use formulations::{DaeSystem, FitProblem, Formulation, Settings, Waveform};
pub use grid::{Axis, Boundary, BoundaryCondition, EntityKind, Face, Grid, GridSpec};
pub use linsolve::SparseMatrix;
pub use materials::{MaterialSet, ScalingMode, Winding, WindingSet, WindingShape};
pub use timeint::{TimeGrid, TimeSeries};
pub use topology::{project_free, IntSparse, ProjectedOps, Projection, TopoOps};
