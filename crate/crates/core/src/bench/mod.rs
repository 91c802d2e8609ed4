//! Benchmark scenes, their JSON fixtures and the driver that runs them.

mod builtin;
mod run;
mod scene;

use std::path::Path;

pub use builtin::{
    builtin, scene_copper_bar, scene_eqs_layered, scene_index_reference, scene_inductor, scene_spiral_mini, BUILTIN_IDS,
};
pub use run::{run_benchmark, BenchmarkRun, Extremum, Overrides, Summary, PROBE_LIMIT};
pub use scene::{BenchmarkScene, BoundarySpec, Expected, Integrator, Method, Probe, SCENE_VERSION};

use crate::error::Result;

/// Resolves a scene argument: an existing JSON file, otherwise a built-in id.
pub fn load_scene(arg: &str) -> Result<BenchmarkScene> {
    let path = Path::new(arg);
    if path.is_file() {
        BenchmarkScene::load(path)
    } else {
        builtin(arg)
    }
}
