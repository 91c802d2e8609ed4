use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scene::{BenchmarkScene, Method, Probe};
use crate::daekit::{index_probe, PencilReport};
use crate::error::{Error, Result};
use crate::formulations::{Formulation, Observable, Reduce};
use crate::timeint::{cfl_timestep, implicit_euler, leapfrog, TimeGrid, TimeSeries};

/// Largest system the summary runs the dense index probe on.
pub const PROBE_LIMIT: usize = 600;

/// Command-line adjustments of a scene's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub formulation: Option<Formulation>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    /// Run the index probe when the system is small enough (default true).
    pub probe_index: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scene: String,
    pub formulation: Formulation,
    pub cells: usize,
    pub free_points: usize,
    pub free_edges: usize,
    pub dofs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_dofs: Option<usize>,
    pub method: Method,
    pub dt: f64,
    pub steps: usize,
    pub t_end: f64,
    pub expected_index: Option<usize>,
    pub index_probe: Option<PencilReport>,
    pub extrema: BTreeMap<String, Extremum>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub series: TimeSeries,
    pub summary: Summary,
}

/// Assembles the scene's system, integrates it and summarises the series.
pub fn run_benchmark(scene: &BenchmarkScene, overrides: &Overrides) -> Result<BenchmarkRun> {
    run(scene, overrides).map_err(|e| e.context(&format!("scene {}", scene.id)))
}

fn run(scene: &BenchmarkScene, ov: &Overrides) -> Result<BenchmarkRun> {
    let formulation = ov.formulation.unwrap_or(scene.formulation);
    let p = scene.problem()?;
    let mut sys = p.assemble(formulation)?;
    for probe in &scene.probes {
        match probe {
            Probe::PlaneCurrent { name, axis, layer } => {
                let field = sys.field_index("e").ok_or_else(|| {
                    Error::InvalidSpec(format!("probe {name} needs the electric field, which {formulation} lacks"))
                })?;
                let w = p.plane_current_weights(*axis, *layer);
                sys.observables.push(Observable { name: name.clone(), field, reduce: Reduce::Weighted(w) });
            }
        }
    }
    let method = if formulation == Formulation::FullwaveEh { scene.integrator.method } else { Method::ImplicitEuler };
    let dt = match ov.dt.or(scene.integrator.dt) {
        Some(dt) => dt,
        None => scene.integrator.cfl_fraction.unwrap_or(0.95) * cfl_timestep(&p.grid, &p.sub),
    };
    let tg = TimeGrid::new(scene.integrator.t0, ov.t_end.unwrap_or(scene.integrator.t_end), dt)?;
    let series = match method {
        Method::ImplicitEuler => implicit_euler(&sys, &tg)?,
        Method::Leapfrog => {
            let h = sys.block("h").map_or(0, |b| b.len);
            let e = sys.block("e").map_or(0, |b| b.len);
            leapfrog(&sys, &tg, &vec![0.0; e], &vec![0.0; h])?
        }
    };
    let index = if ov.probe_index.unwrap_or(true) && sys.dim() <= PROBE_LIMIT {
        Some(index_probe(&sys.m, &sys.k, None)?)
    } else {
        None
    };
    let extrema = series
        .names
        .iter()
        .zip(&series.values)
        .map(|(n, v)| {
            let finite = v.iter().copied().filter(|x| x.is_finite());
            let min = finite.clone().fold(f64::INFINITY, f64::min);
            let max = finite.fold(f64::NEG_INFINITY, f64::max);
            (n.clone(), Extremum { min, max })
        })
        .collect();
    let summary = Summary {
        scene: scene.id.clone(),
        formulation,
        cells: scene.cell_count(),
        free_points: p.ops.points.len(),
        free_edges: p.ops.edges.len(),
        dofs: sys.dim(),
        expected_dofs: scene.expected.dofs.get(formulation.tag()).copied(),
        method,
        dt,
        steps: tg.steps(),
        t_end: tg.time(tg.steps()),
        expected_index: sys.expected_index,
        index_probe: index,
        extrema,
    };
    Ok(BenchmarkRun { series, summary })
}
