//! Built-in benchmark scenes.

use std::collections::BTreeMap;

use super::scene::{BenchmarkScene, BoundarySpec, Expected, Integrator, Method, Probe, SCENE_VERSION};
use crate::error::{Error, Result};
use crate::formulations::{Contact, Formulation, Settings, Waveform};
use crate::grid::{Axis, BoundaryCondition, BoxRegion, Face, GridSpec, Region};
use crate::materials::{Winding, WindingShape};

pub const BUILTIN_IDS: [&str; 6] =
    ["copper-bar", "inductor-core-a", "inductor-core-t", "eqs-layered", "spiral-mini", "index-reference"];

pub fn builtin(id: &str) -> Result<BenchmarkScene> {
    match id {
        "copper-bar" => Ok(scene_copper_bar()),
        "inductor-core-a" => Ok(scene_inductor(Formulation::MqsAstar)),
        "inductor-core-t" => Ok(scene_inductor(Formulation::MqsTomega)),
        "eqs-layered" => Ok(scene_eqs_layered()),
        "spiral-mini" => Ok(scene_spiral_mini()),
        "index-reference" => Ok(scene_index_reference()),
        other => Err(Error::SceneNotFound(other.to_string())),
    }
}

fn uniform(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn region(name: &str, min: [f64; 3], max: [f64; 3]) -> Region {
    Region {
        name: name.into(),
        bbox: BoxRegion::new(min, max),
        eps_r: None,
        mu_r: None,
        sigma: None,
        winding: None,
    }
}

/// Copper bar of 0.5 mm × 0.5 mm cross-section and 3 m length in air, 5 × 5 × 13 cells.
/// The bottom face is driven with `sin(2πt)` volts; the top face and the lateral walls
/// are grounded so the bar current has a return path.
pub fn scene_copper_bar() -> BenchmarkScene {
    let l0 = (3.0 + 1.5f64.sqrt()) * 1e-3;
    let lc = (1.0 + 1.5f64.sqrt()) * 1e-3;
    let xy = vec![-l0 / 2.0, -lc / 2.0, -0.25e-3, 0.25e-3, lc / 2.0, l0 / 2.0];
    let length = 3.0;
    let mut bar = region("bar", [-0.25e-3, -0.25e-3, 0.0], [0.25e-3, 0.25e-3, length]);
    bar.sigma = Some(5.7e7);
    BenchmarkScene {
        id: "copper-bar".into(),
        version: SCENE_VERSION,
        description: "copper bar in air between a driven and a grounded contact".into(),
        grid: GridSpec { x: xy.clone(), y: xy, z: uniform(13, 0.0, length) },
        boundary: BoundarySpec::all(BoundaryCondition::Electric),
        settings: Settings::default(),
        regions: vec![bar],
        windings: vec![],
        currents: vec![],
        contacts: vec![Contact { face: Face::ZMin, waveform: Waveform::Sine { amplitude: 1.0, frequency: 1.0 } }],
        formulation: Formulation::AphiLorenz,
        integrator: Integrator { method: Method::ImplicitEuler, dt: Some(1e-4), cfl_fraction: None, t0: 0.0, t_end: 2.0 },
        probes: vec![Probe::PlaneCurrent { name: "i_bar".into(), axis: Axis::Z, layer: 6 }],
        expected: Expected {
            cells: Some(325),
            dofs: BTreeMap::new(),
            metrics: BTreeMap::from([("dc_current_a".to_string(), 1.0 / (length / (5.7e7 * 0.25e-6)))]),
        },
    }
}

/// Aluminium core inside a 120-turn stranded coil, 14 × 14 × 18 cells of 1 mm, driven
/// with `sin(2π·500 Hz·t)` amperes.
pub fn scene_inductor(formulation: Formulation) -> BenchmarkScene {
    let mm = 1e-3;
    let mut core = region("core", [5.0 * mm, 5.0 * mm, 5.0 * mm], [9.0 * mm, 9.0 * mm, 13.0 * mm]);
    core.sigma = Some(35e6);
    let coil = Winding {
        name: "coil".into(),
        turns: 120.0,
        shape: WindingShape::Loop {
            outer: BoxRegion::new([3.0 * mm, 3.0 * mm, 3.0 * mm], [11.0 * mm, 11.0 * mm, 15.0 * mm]),
            inner: BoxRegion::new([4.0 * mm, 4.0 * mm, 3.0 * mm], [10.0 * mm, 10.0 * mm, 15.0 * mm]),
            axis: Axis::Z,
        },
    };
    let (id, dofs) = match formulation {
        Formulation::MqsTomega => ("inductor-core-t", 4610),
        _ => ("inductor-core-a", 9958),
    };
    BenchmarkScene {
        id: id.into(),
        version: SCENE_VERSION,
        description: "metal-core inductor with a stranded coil".into(),
        grid: GridSpec { x: uniform(14, 0.0, 14.0 * mm), y: uniform(14, 0.0, 14.0 * mm), z: uniform(18, 0.0, 18.0 * mm) },
        boundary: BoundarySpec::all(BoundaryCondition::Electric)
            .with(Face::ZMin, BoundaryCondition::Magnetic)
            .with(Face::ZMax, BoundaryCondition::Magnetic),
        settings: Settings::default(),
        regions: vec![core],
        windings: vec![coil],
        currents: vec![Waveform::Sine { amplitude: 1.0, frequency: 500.0 }],
        contacts: vec![],
        formulation,
        integrator: Integrator { method: Method::ImplicitEuler, dt: Some(2e-5), cfl_fraction: None, t0: 0.0, t_end: 2e-3 },
        probes: vec![],
        expected: Expected {
            cells: Some(3528),
            dofs: BTreeMap::from([(formulation.tag().to_string(), dofs)]),
            metrics: BTreeMap::new(),
        },
    }
}

/// Lossy insulating layer (σ = 1 S/m, ε = 6ε₀) under an air layer in a 4 × 4 × 10 cell
/// column. Grounded bottom, ramped potential on top, magnetic lateral faces.
pub fn scene_eqs_layered() -> BenchmarkScene {
    let mm = 1e-3;
    let mut insulator = region("insulator", [0.0, 0.0, 0.0], [4.0 * mm, 4.0 * mm, 5.0 * mm]);
    insulator.sigma = Some(1.0);
    insulator.eps_r = Some(6.0);
    BenchmarkScene {
        id: "eqs-layered".into(),
        version: SCENE_VERSION,
        description: "two-layer lossy dielectric column under a ramped potential".into(),
        grid: GridSpec { x: uniform(4, 0.0, 4.0 * mm), y: uniform(4, 0.0, 4.0 * mm), z: uniform(10, 0.0, 10.0 * mm) },
        boundary: BoundarySpec::all(BoundaryCondition::Magnetic)
            .with(Face::ZMin, BoundaryCondition::Electric)
            .with(Face::ZMax, BoundaryCondition::Electric),
        settings: Settings::default(),
        regions: vec![insulator],
        windings: vec![],
        currents: vec![],
        contacts: vec![Contact { face: Face::ZMax, waveform: Waveform::Ramp { amplitude: 1e3, rise_time: 1e-3 } }],
        formulation: Formulation::Eqs,
        integrator: Integrator { method: Method::ImplicitEuler, dt: Some(1e-5), cfl_fraction: None, t0: 0.0, t_end: 2e-3 },
        probes: vec![],
        expected: Expected::default(),
    }
}

/// Single-turn rectangular coil on a dielectric substrate (ε_r = 12) above an electric
/// ground plane, driven at 50 GHz and integrated with leapfrog at 0.95 of the CFL step.
pub fn scene_spiral_mini() -> BenchmarkScene {
    let um = 1e-6;
    let mut substrate = region("substrate", [0.0, 0.0, 0.0], [700.0 * um, 475.0 * um, 25.0 * um]);
    substrate.eps_r = Some(12.0);
    let mut z = uniform(5, 0.0, 25.0 * um);
    z.extend(uniform(7, 25.0 * um, 60.0 * um).into_iter().skip(1));
    let coil = Winding {
        name: "coil".into(),
        turns: 1.0,
        shape: WindingShape::Loop {
            outer: BoxRegion::new([150.0 * um, 100.0 * um, 25.0 * um], [550.0 * um, 375.0 * um, 30.0 * um]),
            inner: BoxRegion::new([175.0 * um, 125.0 * um, 25.0 * um], [525.0 * um, 350.0 * um, 30.0 * um]),
            axis: Axis::Z,
        },
    };
    BenchmarkScene {
        id: "spiral-mini".into(),
        version: SCENE_VERSION,
        description: "current-driven coil on a substrate, lossless full-wave".into(),
        grid: GridSpec { x: uniform(28, 0.0, 700.0 * um), y: uniform(19, 0.0, 475.0 * um), z },
        boundary: BoundarySpec::all(BoundaryCondition::Magnetic).with(Face::ZMin, BoundaryCondition::Electric),
        settings: Settings::default(),
        regions: vec![substrate],
        windings: vec![coil],
        currents: vec![Waveform::Sine { amplitude: 1.0, frequency: 50e9 }],
        contacts: vec![],
        formulation: Formulation::FullwaveEh,
        integrator: Integrator { method: Method::Leapfrog, dt: None, cfl_fraction: Some(0.95), t0: 0.0, t_end: 4e-11 },
        probes: vec![],
        expected: Expected::default(),
    }
}

/// Three cells per axis with unit spacing and unit base constants, all faces electric:
/// a conducting centre cell, a dielectric bottom layer and a magnetic corner cell.
pub fn scene_index_reference() -> BenchmarkScene {
    let mut dielectric = region("dielectric", [0.0, 0.0, 0.0], [3.0, 3.0, 1.0]);
    dielectric.eps_r = Some(4.0);
    let mut magnetic = region("magnetic", [2.0, 2.0, 2.0], [3.0, 3.0, 3.0]);
    magnetic.mu_r = Some(5.0);
    let mut conductor = region("conductor", [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]);
    conductor.sigma = Some(1.0);
    BenchmarkScene {
        id: "index-reference".into(),
        version: SCENE_VERSION,
        description: "heterogeneous three-cell cube for index analysis".into(),
        grid: GridSpec { x: uniform(3, 0.0, 3.0), y: uniform(3, 0.0, 3.0), z: uniform(3, 0.0, 3.0) },
        boundary: BoundarySpec::all(BoundaryCondition::Electric),
        settings: Settings { eps0: 1.0, mu0: 1.0, ..Settings::default() },
        regions: vec![dielectric, magnetic, conductor],
        windings: vec![],
        currents: vec![],
        contacts: vec![],
        formulation: Formulation::AphiLorenz,
        integrator: Integrator { method: Method::ImplicitEuler, dt: Some(0.01), cfl_fraction: None, t0: 0.0, t_end: 0.1 },
        probes: vec![],
        expected: Expected::default(),
    }
}
