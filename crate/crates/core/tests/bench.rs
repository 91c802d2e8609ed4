use std::path::PathBuf;

use fitdae::bench::{
    builtin, load_scene, run_benchmark, scene_copper_bar, scene_eqs_layered, scene_index_reference, BenchmarkScene,
    Method, Overrides, BUILTIN_IDS,
};
use fitdae::{Error, Formulation, Waveform};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenes")
}

fn quick(t_end: f64) -> Overrides {
    Overrides { t_end: Some(t_end), probe_index: Some(false), ..Default::default() }
}

#[test]
fn unknown_scene_is_reported() {
    assert!(matches!(builtin("no-such-scene"), Err(Error::SceneNotFound(id)) if id == "no-such-scene"));
    assert!(matches!(load_scene("no-such-scene"), Err(Error::SceneNotFound(_))));
}

#[test]
fn scenes_round_trip_through_json() {
    for id in BUILTIN_IDS {
        let scene = builtin(id).unwrap();
        let back = BenchmarkScene::from_json(&scene.to_json().unwrap()).unwrap();
        assert_eq!(back, scene, "{id}");
    }
}

#[test]
fn fixtures_match_the_builtin_scenes() {
    for id in BUILTIN_IDS {
        let path = fixture_dir().join(format!("{id}.json"));
        let scene = BenchmarkScene::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(scene, builtin(id).unwrap(), "{id}");
        assert_eq!(load_scene(path.to_str().unwrap()).unwrap(), scene);
    }
}

#[test]
fn unsupported_scene_version_is_rejected() {
    let mut scene = scene_index_reference();
    scene.version += 1;
    assert!(matches!(BenchmarkScene::from_json(&scene.to_json().unwrap()), Err(Error::Parse(_))));
}

#[test]
fn reference_cell_and_unknown_counts() {
    assert_eq!(scene_copper_bar().cell_count(), 325);
    for id in ["inductor-core-a", "inductor-core-t"] {
        let scene = builtin(id).unwrap();
        assert_eq!(scene.cell_count(), 3528);
        let run = run_benchmark(&scene, &quick(1e-4)).unwrap();
        assert_eq!(Some(run.summary.dofs), run.summary.expected_dofs, "{id}");
    }
    let dc = scene_copper_bar().expected.metrics["dc_current_a"];
    assert!((3.0f64 / (5.7e7 * 0.25e-6) - 0.2105).abs() < 1e-4);
    assert!((dc - 4.75).abs() < 1e-3);
}

#[test]
fn zero_excitation_keeps_the_column_uncharged() {
    let mut scene = scene_eqs_layered();
    scene.contacts[0].waveform = Waveform::Ramp { amplitude: 0.0, rise_time: 1e-3 };
    let run = run_benchmark(&scene, &Overrides::default()).unwrap();
    assert!(run.series.column("E_elec").unwrap().iter().all(|&w| w == 0.0));
}

#[test]
fn lossless_uniform_column_holds_its_energy_after_the_ramp() {
    let mut scene = scene_eqs_layered().without_conductivity();
    scene.regions.iter_mut().for_each(|r| r.eps_r = None);
    let run = run_benchmark(&scene, &Overrides::default()).unwrap();
    let energy = run.series.column("E_elec").unwrap();
    let after: Vec<f64> =
        run.series.times.iter().zip(energy).filter(|(t, _)| **t >= 1e-3 + 1e-12).map(|(_, w)| *w).collect();
    assert!(after.len() > 50);
    assert!(after[0] > 0.0);
    for w in &after {
        assert!((w - after[0]).abs() <= 1e-9 * after[0], "{w} vs {}", after[0]);
    }
}

#[test]
fn reruns_are_bit_identical() {
    for (scene, t_end) in [(scene_copper_bar(), 5e-3), (builtin("inductor-core-t").unwrap(), 2e-4)] {
        let a = run_benchmark(&scene, &quick(t_end)).unwrap();
        let b = run_benchmark(&scene, &quick(t_end)).unwrap();
        assert_eq!(a.series.values, b.series.values, "{}", scene.id);
        assert_eq!(a.series.final_state, b.series.final_state, "{}", scene.id);
        assert_eq!(a.summary, b.summary);
    }
}

#[test]
fn inductor_energy_dips_where_the_drive_current_vanishes() {
    let run = run_benchmark(&builtin("inductor-core-a").unwrap(), &quick(2e-3)).unwrap();
    let t = &run.series.times;
    let e = run.series.column("E_mag").unwrap();
    let peak = e.iter().cloned().fold(0.0, f64::max);
    let dip = (0..t.len())
        .filter(|&n| t[n] > 0.6e-3 && t[n] < 1.4e-3)
        .min_by(|&a, &b| e[a].total_cmp(&e[b]))
        .unwrap();
    // The current crosses zero at 1 ms; eddy currents in the core shift the dip slightly.
    assert!((t[dip] - 1e-3).abs() <= 0.1e-3, "dip at {}", t[dip]);
    assert!(e[dip] < 0.2 * peak);
    let first_half_peak = (0..t.len()).filter(|&n| t[n] <= 1e-3).map(|n| e[n]).fold(0.0, f64::max);
    assert!(first_half_peak > 0.5 * peak);
}

#[test]
fn coulomb_copper_bar_tracks_lorenz() {
    let scene = scene_copper_bar();
    let lorenz = run_benchmark(&scene, &quick(0.05)).unwrap();
    let coulomb = run_benchmark(&scene, &Overrides { formulation: Some(Formulation::AphiCoulomb), ..quick(0.05) }).unwrap();
    for name in ["i_bar", "E_elec", "E_mag"] {
        let (l, c) = (lorenz.series.column(name).unwrap(), coulomb.series.column(name).unwrap());
        let diff: f64 = l.iter().zip(c).skip(11).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm: f64 = l.iter().skip(11).map(|a| a * a).sum();
        assert!((diff / norm).sqrt() < 0.01, "{name}: rms {}", (diff / norm).sqrt());
    }
}

#[test]
fn summary_reports_probe_extrema_and_dofs() {
    let run = run_benchmark(&scene_index_reference(), &Overrides::default()).unwrap();
    let s = &run.summary;
    assert_eq!(s.index_probe.as_ref().unwrap().index, 1);
    assert_eq!(s.expected_index, Some(1));
    assert_eq!(s.steps, 10);
    assert!(s.extrema.contains_key("E_elec") && s.extrema.contains_key("E_mag"));
    let json: serde_json::Value = serde_json::to_value(s).unwrap();
    assert_eq!(json["formulation"], "aphi-lorenz");
    assert!(json["dofs"].as_u64().unwrap() > 0);

    let mut csv = Vec::new();
    run.series.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().next().unwrap().starts_with('t'));
}

#[test]
fn spiral_mini_runs_leapfrog_at_desk_scale() {
    let scene = builtin("spiral-mini").unwrap();
    let dims = [&scene.grid.x, &scene.grid.y, &scene.grid.z].map(|a| a.len() - 1);
    assert!(dims.iter().all(|&n| n <= 40));
    let run = run_benchmark(&scene, &quick(1e-11)).unwrap();
    assert_eq!(run.summary.method, Method::Leapfrog);
    let w = run.series.column("W").unwrap();
    assert!(w.iter().all(|v| v.is_finite()));
    assert!(w.last().unwrap() > &0.0);
}

#[test]
fn formulation_override_errors_carry_the_scene() {
    let err = run_benchmark(&scene_copper_bar(), &Overrides { formulation: Some(Formulation::FullwaveEh), ..quick(1e-3) })
        .unwrap_err();
    assert!(err.to_string().contains("copper-bar"), "{err}");
}
