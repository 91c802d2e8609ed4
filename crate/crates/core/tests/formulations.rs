use fitdae::bench::{scene_index_reference, BenchmarkScene, BoundarySpec};
use fitdae::daekit::pencil_definiteness;
use fitdae::formulations::{
    build_tree_cotree, continuity_residual, transformed_stiffness, ChargeSource, Contact, ContinuityCheck, Gauge,
};
use fitdae::grid::{BoxRegion, Region};
use fitdae::linsolve::{factor_solve, is_positive_definite, norm2, LuFactor, SparseMatrix};
use fitdae::materials::{assemble_hodge, curl_preimage, discretise_winding_facets, Property};
use fitdae::timeint::{consistent_init, euler_steps, implicit_euler, implicit_euler_from};
use fitdae::{Axis, BoundaryCondition, Error, Face, FitProblem, Formulation, GridSpec, TimeGrid, Waveform, Winding, WindingShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> FitProblem {
    scene_index_reference().problem().unwrap()
}

fn lossless_reference() -> FitProblem {
    scene_index_reference().without_conductivity().problem().unwrap()
}

fn region(name: &str, min: [f64; 3], max: [f64; 3]) -> Region {
    Region { name: name.into(), bbox: BoxRegion::new(min, max), eps_r: None, mu_r: None, sigma: None, winding: None }
}

fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_diff(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.sub(b).max_abs()
}

fn assert_zero(a: &SparseMatrix, what: &str) {
    assert_eq!(a.max_abs(), 0.0, "{what} should be a zero block");
}

#[test]
fn fullwave_mass_is_positive_definite() {
    let sys = lossless_reference().assemble(Formulation::FullwaveEh).unwrap();
    assert!(is_positive_definite(&sys.m_block("faraday", "h")));
    assert!(is_positive_definite(&sys.m_block("ampere", "e")));
}

#[test]
fn fullwave_transformed_stiffness_is_skew() {
    let sys = lossless_reference().assemble(Formulation::FullwaveEh).unwrap();
    let kbar = transformed_stiffness(&sys);
    let sym = kbar.add(&kbar.transpose()).norm_fro();
    assert!(sym <= 1e-13, "‖K̄+K̄ᵀ‖ = {sym:e}");
    assert!(kbar.norm_fro() > 1.0);
}

#[test]
fn fullwave_rejects_conductors() {
    let err = reference().assemble(Formulation::FullwaveEh).unwrap_err();
    assert!(matches!(err, Error::FormulationMisuse(_)));
}

#[test]
fn zero_sources_keep_zero_state() {
    let tg = TimeGrid::new(0.0, 0.05, 0.01).unwrap();
    let lossy = reference();
    let lossless = lossless_reference();
    for f in [Formulation::FullwaveEh, Formulation::AphiLorenz, Formulation::AphiCoulomb, Formulation::WavePair, Formulation::Eqs, Formulation::EqsMixed, Formulation::MqsAstar, Formulation::MqsTomega] {
        let p = if f == Formulation::FullwaveEh { &lossless } else { &lossy };
        let sys = p.assemble(f).unwrap();
        let series = implicit_euler(&sys, &tg).unwrap();
        assert!(series.final_state.iter().all(|&v| v == 0.0), "{f}");
        assert!(series.values.iter().flatten().all(|&v| v == 0.0), "{f}");
    }
}

#[test]
fn lorenz_blocks_follow_the_printed_system() {
    let p = reference();
    let sys = p.assemble(Formulation::AphiLorenz).unwrap();
    let mats = &p.mats;
    let (g, sd) = (p.grad(), p.dual_div());
    let ne = p.ops.edges.len();
    let np = p.ops.points.len();
    let sd_eps = sd.matmul(&mats.m_eps());
    let scaled = mats.l_eps.matmul(mats.scaling(&p.ops).unwrap()).matmul(&sd_eps);

    assert_eq!(max_diff(&sys.m_block("gauge", "phi"), &mats.l_eps), 0.0);
    assert_eq!(max_diff(&sys.k_block("gauge", "phi"), &mats.l_sigma), 0.0);
    assert!(max_diff(&sys.k_block("gauge", "a"), &scaled) <= 1e-12 * scaled.max_abs());
    assert!(max_diff(&sys.m_block("ampere", "phi"), &mats.m_eps().matmul(&g)) <= 1e-15 * mats.m_eps().max_abs());
    assert_eq!(max_diff(&sys.m_block("ampere", "pi"), &mats.m_eps()), 0.0);
    assert!(max_diff(&sys.k_block("ampere", "phi"), &mats.m_sigma().matmul(&g)) <= 1e-15);
    assert!(max_diff(&sys.k_block("ampere", "a"), &p.curl_curl()) <= 1e-15 * p.curl_curl().max_abs());
    assert_eq!(max_diff(&sys.k_block("ampere", "pi"), &mats.m_sigma()), 0.0);
    assert_eq!(max_diff(&sys.k_block("gauss", "q"), &SparseMatrix::identity(np)), 0.0);
    assert_eq!(max_diff(&sys.k_block("gauss", "phi"), &mats.l_eps.scale(-1.0)), 0.0);
    assert!(max_diff(&sys.k_block("gauss", "pi"), &sd_eps) <= 1e-15);
    assert_eq!(max_diff(&sys.m_block("velocity", "a"), &SparseMatrix::identity(ne)), 0.0);
    assert_eq!(max_diff(&sys.k_block("velocity", "pi"), &SparseMatrix::identity(ne).scale(-1.0)), 0.0);

    for (row, col) in [("gauge", "q"), ("gauge", "a"), ("gauge", "pi"), ("ampere", "q"), ("ampere", "a"), ("gauss", "q"), ("gauss", "phi"), ("gauss", "a"), ("gauss", "pi"), ("velocity", "q"), ("velocity", "phi"), ("velocity", "pi")] {
        assert_zero(&sys.m_block(row, col), &format!("M[{row},{col}]"));
    }
    for (row, col) in [("gauge", "q"), ("gauge", "pi"), ("ampere", "q"), ("gauss", "a"), ("velocity", "q"), ("velocity", "phi"), ("velocity", "a")] {
        assert_zero(&sys.k_block(row, col), &format!("K[{row},{col}]"));
    }
}

#[test]
fn coulomb_differs_from_lorenz_only_in_the_gauge_row() {
    let p = reference();
    let lorenz = p.assemble(Formulation::AphiLorenz).unwrap();
    let coulomb = p.assemble(Formulation::AphiCoulomb).unwrap();
    let sd_eps = p.dual_div().matmul(&p.mats.m_eps());
    for col in ["q", "phi", "a", "pi"] {
        assert_zero(&coulomb.m_block("gauge", col), &format!("M[gauge,{col}]"));
        for row in ["ampere", "gauss", "velocity"] {
            assert_eq!(max_diff(&coulomb.m_block(row, col), &lorenz.m_block(row, col)), 0.0);
            assert_eq!(max_diff(&coulomb.k_block(row, col), &lorenz.k_block(row, col)), 0.0);
        }
    }
    assert!(max_diff(&coulomb.k_block("gauge", "a"), &sd_eps) <= 1e-15);
    for col in ["q", "phi", "pi"] {
        assert_zero(&coulomb.k_block("gauge", col), &format!("K[gauge,{col}]"));
    }
}

#[test]
fn lorenz_accepts_charge_built_from_potentials() {
    let p = reference();
    let sys = p.assemble(Formulation::AphiLorenz).unwrap();
    assert!(consistent_init(&sys, &vec![0.0; sys.dim()]).consistent);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = |n: &str| sys.block(n).unwrap().clone();
    let (np, ne) = (b("q").len, b("a").len);
    for _ in 0..5 {
        let phi = random(np, &mut rng);
        let a = random(ne, &mut rng);
        let pi = random(ne, &mut rng);
        let eps_pi: Vec<f64> = pi.iter().zip(&p.mats.eps).map(|(v, e)| v * e).collect();
        let q: Vec<f64> = p
            .mats
            .l_eps
            .matvec(&phi)
            .iter()
            .zip(p.dual_div().matvec(&eps_pi))
            .map(|(l, s)| l - s)
            .collect();
        let x = [q.clone(), phi.clone(), a.clone(), pi.clone()].concat();
        let report = consistent_init(&sys, &x);
        assert!(report.consistent, "{report:?}");

        let mut bad = x.clone();
        let i = rng.gen_range(0..np);
        bad[b("q").start + i] += 1e-3;
        let report = consistent_init(&sys, &bad);
        assert!(!report.consistent);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].predicate, "charge");
        assert!((report.violations[0].residual - 1e-3).abs() < 1e-12, "{report:?}");
    }
}

/// Removes the component of `a` outside `ker(B)` by least squares.
fn project_onto_kernel(b: &SparseMatrix, a: &[f64]) -> Vec<f64> {
    let bbt = b.matmul(&b.transpose());
    let y = factor_solve(&bbt, &b.matvec(a)).unwrap();
    let corr = b.matvec_t(&y);
    a.iter().zip(&corr).map(|(a, c)| a - c).collect()
}

#[test]
fn coulomb_predicates_flag_and_accept() {
    let p = reference();
    let sys = p.assemble(Formulation::AphiCoulomb).unwrap();
    let names: Vec<&str> = sys.predicates.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["charge", "coulomb-a", "coulomb-pi"]);
    assert!(consistent_init(&sys, &vec![0.0; sys.dim()]).consistent);

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let b = |n: &str| sys.block(n).unwrap().clone();
    let mut x = vec![0.0; sys.dim()];
    let a0 = random(b("a").len, &mut rng);
    x[b("a").range()].copy_from_slice(&a0);
    let report = consistent_init(&sys, &x);
    let flagged: Vec<&str> = report.violations.iter().map(|v| v.predicate.as_str()).collect();
    assert_eq!(flagged, ["coulomb-a"]);

    let sd_eps = p.dual_div().matmul(&p.mats.m_eps());
    let a = project_onto_kernel(&sd_eps, &a0);
    let pi = project_onto_kernel(&sd_eps, &random(b("pi").len, &mut rng));
    let phi = random(b("phi").len, &mut rng);
    let q = p.mats.l_eps.matvec(&phi);
    let x = [q, phi, a, pi].concat();
    let report = consistent_init(&sys, &x);
    assert!(report.consistent, "{report:?}");

    for (pred, block) in [("coulomb-a", "a"), ("coulomb-pi", "pi")] {
        let mut bad = x.clone();
        bad[b(block).start] += 1e-3;
        let report = consistent_init(&sys, &bad);
        let flagged: Vec<&str> = report.violations.iter().map(|v| v.predicate.as_str()).collect();
        assert!(flagged.contains(&pred), "{pred}: {report:?}");
        let v = report.violations.iter().find(|v| v.predicate == pred).unwrap();
        let col = sd_eps.matvec(&{
            let mut e = vec![0.0; sd_eps.ncols()];
            e[0] = 1e-3;
            e
        });
        assert!((v.residual - norm2(&col)).abs() <= 1e-12 * norm2(&col));
    }
}

#[test]
fn eqs_mixed_reduces_to_eqs() {
    let mut scene = scene_index_reference();
    scene.contacts = vec![Contact { face: Face::ZMax, waveform: Waveform::Ramp { amplitude: 2.0, rise_time: 0.5 } }];
    let p = scene.problem().unwrap();
    let eqs = p.assemble(Formulation::Eqs).unwrap();
    let mixed = p.assemble(Formulation::EqsMixed).unwrap();
    let np = p.ops.points.len();
    // Algebraic row: K_gq q + K_gφ Φ = r_g, with K_gq = I, so q = r_g − K_gφ Φ and
    // q̇ = ṙ_g − K_gφ Φ̇. Substituting into the continuity row gives the reduced pencil.
    assert_eq!(max_diff(&mixed.k_block("gauss", "q"), &SparseMatrix::identity(np)), 0.0);
    let k_gphi = mixed.k_block("gauss", "phi");
    let m_cq = mixed.m_block("continuity", "q");
    let m_red = m_cq.matmul(&k_gphi).scale(-1.0).add(&mixed.m_block("continuity", "phi"));
    let k_red = mixed.k_block("continuity", "phi");
    assert_eq!(max_diff(&m_red, &eqs.m), 0.0);
    assert_eq!(max_diff(&k_red, &eqs.k), 0.0);
    assert_zero(&mixed.k_block("continuity", "q"), "K[continuity,q]");

    let cont = mixed.row("continuity").unwrap().range();
    let gauss = mixed.row("gauss").unwrap().range();
    for t in [0.1, 0.3, 0.7] {
        let h = 1e-6;
        let rg_dot: Vec<f64> = mixed.rhs(t + h)[gauss.clone()]
            .iter()
            .zip(&mixed.rhs(t - h)[gauss.clone()])
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let reduced: Vec<f64> =
            mixed.rhs(t)[cont.clone()].iter().zip(m_cq.matvec(&rg_dot)).map(|(r, c)| r - c).collect();
        let direct = eqs.rhs(t);
        let err = norm2(&reduced.iter().zip(&direct).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err <= 1e-6 * norm2(&direct), "t = {t}: {err:e}");
    }
}

fn layered_column(sigma_top: f64, contact: Waveform) -> BenchmarkScene {
    let mut scene = scene_index_reference();
    let mut bottom = region("bottom", [0.0, 0.0, 0.0], [2.0, 2.0, 5.0]);
    bottom.sigma = Some(1.0);
    bottom.eps_r = Some(6.0);
    let mut top = region("top", [0.0, 0.0, 5.0], [2.0, 2.0, 10.0]);
    top.sigma = Some(sigma_top);
    scene.grid = GridSpec::uniform([2, 2, 10], [1.0; 3]).unwrap();
    scene.boundary = BoundarySpec::all(BoundaryCondition::Magnetic)
        .with(Face::ZMin, BoundaryCondition::Electric)
        .with(Face::ZMax, BoundaryCondition::Electric);
    scene.regions = vec![bottom, top];
    scene.contacts = vec![Contact { face: Face::ZMax, waveform: contact }];
    scene
}

/// Potential of each free point, grouped by grid plane z.
fn potential_by_layer(p: &FitProblem, phi: &[f64]) -> Vec<(usize, f64)> {
    p.ops.points.free.iter().zip(phi).map(|(&pt, &v)| (p.grid.point_coords(pt)[2], v)).collect()
}

#[test]
fn eqs_steady_state_is_a_resistive_divider() {
    let v = 2.0;
    let p = layered_column(3.0, Waveform::Constant { value: v }).problem().unwrap();
    let sys = p.assemble(Formulation::Eqs).unwrap();
    assert!(is_positive_definite(&sys.m));
    let phi = factor_solve(&sys.k, &sys.rhs(1.0)).unwrap();
    // Layer resistances 5/σ per unit area: 5 and 5/3, so the interface sits at 3/4 of v.
    let oracle = |z: usize| {
        let zf = z as f64;
        if zf <= 5.0 {
            0.75 * v * zf / 5.0
        } else {
            0.75 * v + 0.25 * v * (zf - 5.0) / 5.0
        }
    };
    for (z, value) in potential_by_layer(&p, &phi) {
        assert!((value - oracle(z)).abs() < 1e-10, "z = {z}: {value} vs {}", oracle(z));
    }
}

#[test]
fn eqs_relaxes_with_the_two_layer_time_constant() {
    let v = 1.0;
    let p = layered_column(3.0, Waveform::Constant { value: v }).problem().unwrap();
    let sys = p.assemble(Formulation::Eqs).unwrap();
    // Capacitive start: the potential distribution of the pure dielectric problem.
    let l_eps_fixed = p.dual_div().scale_cols(&p.mats.eps).matmul(&p.ops.grad_fixed.to_f64()).scale(-1.0);
    let patterns = p.contact_patterns();
    let rhs0: Vec<f64> = l_eps_fixed.matvec(&patterns[0].0).iter().map(|x| -x * v).collect();
    let phi0 = factor_solve(&p.mats.l_eps, &rhs0).unwrap();
    // Per unit area: C = ε/d, G = σ/d with d = 5 for both layers.
    let (c1, c2, g1, g2) = (6.0 / 5.0, 1.0 / 5.0, 1.0 / 5.0, 3.0 / 5.0);
    let tau = (c1 + c2) / (g1 + g2);
    let (v_start, v_end) = (v * c2 / (c1 + c2), v * g2 / (g1 + g2));
    let interface = |phi: &[f64]| -> f64 {
        let layer: Vec<f64> = potential_by_layer(&p, phi).into_iter().filter(|(z, _)| *z == 5).map(|(_, v)| v).collect();
        layer.iter().sum::<f64>() / layer.len() as f64
    };
    assert!((interface(&phi0) - v_start).abs() < 1e-12);

    let dt = tau / 400.0;
    let tg = TimeGrid::new(0.0, 6.0 * tau, dt).unwrap();
    let series = implicit_euler_from(&sys, &tg, &phi0).unwrap();
    let e = series.column("E_elec").unwrap();
    let e_end = {
        let phi_inf = factor_solve(&sys.k, &sys.rhs(1.0)).unwrap();
        let x: Vec<f64> = phi_inf;
        let field = sys.fields[sys.observables[0].field].eval(&x, 1.0);
        sys.observables[0].reduce(&field)
    };
    let at = |t: f64| (t / dt).round() as usize;
    let (n1, n2) = (at(3.0 * tau), at(5.0 * tau));
    let fitted = (series.times[n2] - series.times[n1]) / ((e[n1] - e_end).abs() / (e[n2] - e_end).abs()).ln();
    assert!((fitted / tau - 1.0).abs() < 0.15, "fitted {fitted} vs {tau}");

    let tg_short = TimeGrid::new(0.0, tau, dt).unwrap();
    let mut worst: f64 = 0.0;
    euler_steps(&sys.m, &sys.k, |t| sys.rhs(t), &phi0, &tg_short, |_, t, x| {
        let exact = v_end + (v_start - v_end) * (-t / tau).exp();
        worst = worst.max((interface(x) - exact).abs());
        Ok(())
    })
    .unwrap();
    assert!(worst < 0.01 * v, "interface deviation {worst}");
}

#[test]
fn eqs_needs_a_grounded_face() {
    let mut scene = scene_index_reference();
    scene.boundary = BoundarySpec::all(BoundaryCondition::Magnetic);
    let err = scene.problem().and_then(|p| p.assemble(Formulation::Eqs)).unwrap_err();
    assert!(matches!(err, Error::SingularLaplacian(_)), "{err:?}");
}

fn coil_scene() -> BenchmarkScene {
    let mut scene = scene_index_reference();
    scene.grid = GridSpec::uniform([6, 6, 6], [1.0; 3]).unwrap();
    let mut conductor = region("conductor", [2.0, 2.0, 2.0], [4.0, 4.0, 4.0]);
    conductor.sigma = Some(1.0);
    let mut dielectric = region("dielectric", [0.0, 0.0, 0.0], [6.0, 6.0, 1.0]);
    dielectric.eps_r = Some(3.0);
    scene.regions = vec![dielectric, conductor];
    scene.windings = vec![Winding {
        name: "coil".into(),
        turns: 4.0,
        shape: WindingShape::Loop {
            outer: BoxRegion::new([1.0, 1.0, 2.0], [5.0, 5.0, 4.0]),
            inner: BoxRegion::new([2.0, 2.0, 2.0], [4.0, 4.0, 4.0]),
            axis: Axis::Z,
        },
    }];
    scene.currents = vec![Waveform::Sine { amplitude: 1.0, frequency: 0.5 }];
    scene
}

#[test]
fn lorenz_trajectory_satisfies_continuity() {
    let mut scene = coil_scene();
    scene.contacts = vec![Contact { face: Face::ZMax, waveform: Waveform::Sine { amplitude: 0.5, frequency: 0.7 } }];
    let p = scene.problem().unwrap();
    let sys = p.assemble(Formulation::AphiLorenz).unwrap();
    let check = ContinuityCheck::new(&p.ops, &p.mats).unwrap();
    let blocks = |n: &str| sys.block(n).unwrap().range();
    let sources = p.current_sources();
    let patterns = p.contact_patterns();
    let dt = 0.01;
    let tg = TimeGrid::new(0.0, 0.5, dt).unwrap();
    let mut prev = sys.x0.clone();
    let mut worst: f64 = 0.0;
    euler_steps(&sys.m, &sys.k, |t| sys.rhs_backward(t, dt), &sys.x0, &tg, |n, t, x| {
        let mut js = vec![0.0; blocks("a").len()];
        for (col, w) in &sources {
            js.iter_mut().zip(col).for_each(|(j, c)| *j += w.value(t) * c);
        }
        let mut phi_fixed = vec![0.0; patterns[0].0.len()];
        for (pat, w) in &patterns {
            phi_fixed.iter_mut().zip(pat).for_each(|(f, v)| *f += w.value(t) * v);
        }
        let rate = |r: std::ops::Range<usize>| -> Vec<f64> { r.map(|i| (x[i] - prev[i]) / dt).collect() };
        let (r, scale) =
            check.residual(&js, &x[blocks("q")], &rate(blocks("q")), &rate(blocks("a")), &phi_fixed).unwrap();
        if n > 0 {
            worst = worst.max(r / scale);
        }
        prev = x.to_vec();
        Ok(())
    })
    .unwrap();
    assert!(worst <= 1e-8, "relative continuity residual {worst:e}");
}

#[test]
fn continuity_residual_detects_mismatch() {
    let p = reference();
    let (np, ne) = (p.ops.points.len(), p.ops.edges.len());
    assert_eq!(continuity_residual(&p.ops, &p.mats, &vec![0.0; ne], &vec![0.0; np], &vec![0.0; np], &vec![0.0; ne]).unwrap(), 0.0);
    let mut q_dot = vec![0.0; np];
    q_dot[0] = 1.0;
    let r = continuity_residual(&p.ops, &p.mats, &vec![0.0; ne], &vec![0.0; np], &q_dot, &vec![0.0; ne]).unwrap();
    assert!(r > 0.5);
}

#[test]
fn wave_pair_checks_source_continuity() {
    let p = lossless_reference();
    let np = p.ops.points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let q = random(np, &mut rng);
    let steady = p.clone().with_charge(ChargeSource { vector: q.clone(), waveform: Waveform::Constant { value: 1.0 } }).unwrap();
    let sys = steady.assemble(Formulation::WavePair).unwrap();
    assert!(is_positive_definite(&sys.m));
    let varying = p.with_charge(ChargeSource { vector: q, waveform: Waveform::Sine { amplitude: 1.0, frequency: 1.0 } }).unwrap();
    let err = varying.assemble(Formulation::WavePair).unwrap_err();
    assert!(matches!(err, Error::SourceInconsistent(_)), "{err:?}");
}

#[test]
fn wave_pair_rejects_contacts() {
    let mut scene = scene_index_reference();
    scene.contacts = vec![Contact { face: Face::ZMax, waveform: Waveform::Constant { value: 1.0 } }];
    let err = scene.problem().unwrap().assemble(Formulation::WavePair).unwrap_err();
    assert!(matches!(err, Error::FormulationMisuse(_)));
}

#[test]
fn gauged_vector_potential_is_definite_and_ungauged_is_not() {
    let p = reference();
    let gauged = p.assemble(Formulation::MqsAstar).unwrap();
    assert!(pencil_definiteness(&gauged.m, &gauged.k, &[1.0]).positive_definite);
    let mut scene = scene_index_reference();
    scene.settings.gauge = Gauge::None;
    let ungauged = scene.problem().unwrap().assemble(Formulation::MqsAstar).unwrap();
    let report = pencil_definiteness(&ungauged.m, &ungauged.k, &[1.0]);
    assert!(!report.positive_definite, "{report:?}");

    // A gradient supported in air is invisible to both the conductance and the curl-curl term.
    let mut scene = coil_scene();
    scene.settings.gauge = Gauge::None;
    let p = scene.problem().unwrap();
    let ungauged = p.assemble(Formulation::MqsAstar).unwrap();
    let g = p.grad();
    let sigma = p.mats.m_sigma().diagonal();
    let air = (0..g.ncols())
        .find(|&j| (0..g.nrows()).all(|i| g.get(i, j) == 0.0 || sigma[i] == 0.0))
        .expect("a free point away from the conductor");
    let mut phi = vec![0.0; g.ncols()];
    phi[air] = 1.0;
    let a = g.matvec(&phi);
    assert!(norm2(&a) > 0.0);
    assert!(ungauged.m.add(&ungauged.k).quad_form(&a).abs() <= 1e-12 * norm2(&a).powi(2) * ungauged.k.max_abs());
    let gauged = coil_scene().problem().unwrap().assemble(Formulation::MqsAstar).unwrap();
    assert!(gauged.m.add(&gauged.k).quad_form(&a) > 0.0);
    assert!(is_positive_definite(&gauged.m.add(&gauged.k)));
}

#[test]
fn tree_cotree_counts_match_graph_enumeration() {
    for cells in [vec![[1.0, 1.0, 1.0]], vec![[1.0, 1.0, 1.0], [2.0, 1.0, 1.0]], vec![[1.0, 1.0, 1.0], [2.0, 1.0, 1.0], [2.0, 2.0, 1.0]]] {
        let mut scene = scene_index_reference();
        scene.grid = GridSpec::uniform([4, 4, 3], [1.0; 3]).unwrap();
        scene.regions = cells
            .iter()
            .map(|c| {
                let mut r = region("c", *c, [c[0] + 1.0, c[1] + 1.0, c[2] + 1.0]);
                r.sigma = Some(1.0);
                r
            })
            .collect();
        let p = scene.problem().unwrap();
        let tc = build_tree_cotree(&p.grid, &p.sub).unwrap();
        // Oracle: corner points and unit-length segments of the union of conductor cells.
        let mut corners = std::collections::BTreeSet::new();
        for c in &cells {
            for d in 0..8 {
                corners.insert([c[0] as i32 + (d & 1), c[1] as i32 + ((d >> 1) & 1), c[2] as i32 + ((d >> 2) & 1)]);
            }
        }
        let mut segments = std::collections::BTreeSet::new();
        for c in &cells {
            let o = [c[0] as i32, c[1] as i32, c[2] as i32];
            for a in 0..3 {
                for du in 0..2 {
                    for dv in 0..2 {
                        let mut s = o;
                        s[(a + 1) % 3] += du;
                        s[(a + 2) % 3] += dv;
                        segments.insert((a, s));
                    }
                }
            }
        }
        assert_eq!(tc.nodes.len(), corners.len());
        assert_eq!(tc.edges.len(), segments.len());
        assert_eq!(tc.tree.len(), corners.len() - 1);
        assert_eq!(tc.cotree.len(), segments.len() - corners.len() + 1);
    }
}

#[test]
fn tree_needs_a_connected_conductor() {
    let mut scene = scene_index_reference();
    scene.grid = GridSpec::uniform([5, 3, 3], [1.0; 3]).unwrap();
    let mut a = region("a", [0.0, 1.0, 1.0], [1.0, 2.0, 2.0]);
    a.sigma = Some(1.0);
    let mut b = region("b", [3.0, 1.0, 1.0], [4.0, 2.0, 2.0]);
    b.sigma = Some(1.0);
    scene.regions = vec![a, b];
    let err = scene.problem().unwrap().assemble(Formulation::MqsTomega).unwrap_err();
    assert!(matches!(err, Error::TreeError(_)), "{err:?}");
    scene.regions.clear();
    let err = scene.problem().unwrap().assemble(Formulation::MqsTomega).unwrap_err();
    assert!(matches!(err, Error::TreeError(_)));
}

#[test]
fn cotree_stiffness_is_nonsingular() {
    let sys = reference().assemble(Formulation::MqsTomega).unwrap();
    let k11 = sys.k_block("faraday", "t");
    assert!(k11.nrows() > 0);
    assert!(is_positive_definite(&k11));
}

fn shielded_block_scene(waveform: Waveform) -> BenchmarkScene {
    let mut scene = scene_index_reference();
    scene.grid = GridSpec::uniform([8, 8, 8], [1.0; 3]).unwrap();
    let mut conductor = region("conductor", [2.0, 2.0, 2.0], [6.0, 6.0, 6.0]);
    conductor.sigma = Some(1.0);
    scene.regions = vec![conductor];
    scene.windings = vec![Winding {
        name: "coil".into(),
        turns: 4.0,
        shape: WindingShape::Loop {
            outer: BoxRegion::new([1.0, 1.0, 3.0], [7.0, 7.0, 5.0]),
            inner: BoxRegion::new([2.0, 2.0, 3.0], [6.0, 6.0, 5.0]),
            axis: Axis::Z,
        },
    }];
    scene.currents = vec![waveform];
    scene
}

#[test]
fn tomega_basis_spans_interior_conductor_fields() {
    let mut scene = scene_index_reference();
    scene.grid = GridSpec::uniform([5, 5, 5], [1.0; 3]).unwrap();
    let mut conductor = region("conductor", [1.0, 1.0, 1.0], [4.0, 4.0, 4.0]);
    conductor.sigma = Some(1.0);
    scene.regions = vec![conductor];
    let p = scene.problem().unwrap();
    let sys = p.assemble(Formulation::MqsTomega).unwrap();
    let basis = sys.fields[sys.field_index("h").unwrap()].map.to_dense();
    let edges: Vec<usize> = (0..p.grid.n_dof()).filter(|&e| !p.grid.phantom_edge[e]).collect();
    // Edges strictly inside the conducting block, away from its surface.
    let inner: Vec<usize> = (0..edges.len())
        .filter(|&i| {
            let (w, q) = p.grid.split_slot(edges[i]);
            let c = [q % 6, q / 6 % 6, q / 36];
            (0..3).all(|a| if a == w.index() { (1..4).contains(&c[a]) } else { (2..4).contains(&c[a]) })
        })
        .collect();
    assert_eq!(inner.len(), 3 * 3 * 2 * 2);
    let mut extended = nalgebra::DMatrix::zeros(basis.nrows(), basis.ncols() + inner.len());
    extended.columns_mut(0, basis.ncols()).copy_from(&basis);
    for (j, &i) in inner.iter().enumerate() {
        extended[(i, basis.ncols() + j)] = 1.0;
    }
    assert_eq!(extended.rank(1e-9), basis.rank(1e-9));
}

#[test]
fn tomega_follows_an_edge_field_oracle_with_insulating_air() {
    let dt = 0.02;
    let scene = shielded_block_scene(Waveform::Ramp { amplitude: 1.0, rise_time: dt });
    let p = scene.problem().unwrap();
    let tg = TimeGrid::new(0.0, 30.0 * dt, dt).unwrap();
    let energy = implicit_euler(&p.assemble(Formulation::MqsTomega).unwrap(), &tg).unwrap().column("E_mag").unwrap().to_vec();

    // Oracle: magnetic voltage on every edge, Faraday's law on every edge, air facets
    // made strongly resistive so that no current leaves the conductor.
    let grid = &p.grid;
    let edges: Vec<usize> = (0..grid.n_dof()).filter(|&e| !grid.phantom_edge[e]).collect();
    let facets: Vec<usize> = (0..grid.n_dof()).filter(|&f| !grid.phantom_facet[f]).collect();
    let cells: Vec<usize> = (0..grid.n_points()).filter(|&c| !grid.phantom_cell[c]).collect();
    let c = p.topo.curl.select(&facets, &edges).to_f64();
    let div = p.topo.div.select(&cells, &facets).to_f64();
    let mu_all = assemble_hodge(grid, &p.sub, Property::Permeability).unwrap();
    let mu: Vec<f64> = edges.iter().map(|&e| mu_all[e]).collect();
    let rho_all = assemble_hodge(grid, &p.sub, Property::Resistivity).unwrap();
    let rho: Vec<f64> = facets
        .iter()
        .map(|&f| if grid.facet_halves(f).iter().any(|&(c, _)| p.sub.sigma[c] == 0.0) { 1e8 } else { rho_all[f] })
        .collect();
    let m = SparseMatrix::diag(&mu);
    let k = c.transpose().scale_cols(&rho).matmul(&c);
    let x_all = discretise_winding_facets(grid, &p.windings[0]).unwrap();
    let x: Vec<f64> = facets.iter().map(|&f| x_all[f]).collect();
    let hs = curl_preimage(&c, &div, &x).unwrap();
    let w = &p.currents[0];
    let lu = LuFactor::new(&m.scale(1.0 / dt).add(&k)).unwrap();
    let mut h = vec![0.0; edges.len()];
    for n in 1..=tg.steps() {
        let t = tg.time(n);
        let di = (w.value(t) - w.value(t - dt)) / dt;
        let rhs: Vec<f64> = (0..h.len()).map(|i| mu[i] * (h[i] / dt - hs[i] * di)).collect();
        h = lu.solve(&rhs).unwrap();
        let oracle: f64 = (0..h.len()).map(|i| 0.5 * mu[i] * (h[i] + hs[i] * w.value(t)).powi(2)).sum();
        assert!((energy[n] - oracle).abs() <= 0.02 * oracle, "step {n}: {} vs {oracle}", energy[n]);
    }
    // The eddy currents hold the energy well below its static value at first.
    assert!(energy[1] < 0.95 * energy[tg.steps()]);
}

#[test]
fn astar_energy_stays_below_tomega_while_current_is_large() {
    let waveform = Waveform::Sine { amplitude: 1.0, frequency: 0.5 };
    let p = shielded_block_scene(waveform).problem().unwrap();
    let tg = TimeGrid::new(0.0, 2.0, 0.02).unwrap();
    let a = implicit_euler(&p.assemble(Formulation::MqsAstar).unwrap(), &tg).unwrap();
    let t = implicit_euler(&p.assemble(Formulation::MqsTomega).unwrap(), &tg).unwrap();
    let (ea, et) = (a.column("E_mag").unwrap(), t.column("E_mag").unwrap());
    let mut checked = 0;
    for n in 0..=tg.steps() {
        if waveform.value(tg.time(n)).abs() >= 0.5 {
            assert!(ea[n] <= 1.05 * et[n], "step {n}: {} vs {}", ea[n], et[n]);
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn darwin_a_needs_charges_and_has_the_printed_pattern() {
    let p = reference();
    let err = p.assemble(Formulation::DarwinA).unwrap_err();
    assert!(matches!(err, Error::MissingCharge(_)));
    let np = p.ops.points.len();
    let p = p.with_charge(ChargeSource { vector: vec![0.0; np], waveform: Waveform::Zero }).unwrap();
    let sys = p.assemble(Formulation::DarwinA).unwrap();
    assert_eq!(sys.expected_index, None);
    let pattern = |a: &SparseMatrix| -> Vec<(usize, usize)> {
        let mut v: Vec<_> = a.triplets().filter(|t| t.2 != 0.0).map(|(i, j, _)| (i, j)).collect();
        v.sort_unstable();
        v
    };
    let g = p.grad();
    let sd = p.dual_div();
    assert_eq!(pattern(&sys.m_block("ampere", "a")), pattern(&p.mats.m_sigma()));
    assert_eq!(pattern(&sys.m_block("ampere", "phi")), pattern(&g.scale_rows(&p.mats.eps)));
    assert_eq!(pattern(&sys.m_block("gauss", "a")), pattern(&sd.scale_cols(&p.mats.eps)));
    assert_zero(&sys.m_block("gauss", "phi"), "M[gauss,phi]");
    assert_eq!(pattern(&sys.k_block("ampere", "a")), pattern(&p.curl_curl()));
    assert_eq!(pattern(&sys.k_block("ampere", "phi")), pattern(&g.scale_rows(&p.mats.sigma)));
    assert_zero(&sys.k_block("gauss", "a"), "K[gauss,a]");
    assert_eq!(pattern(&sys.k_block("gauss", "phi")), pattern(&p.mats.l_eps));
}

#[test]
fn darwin_b_runs_without_charges() {
    let sys = reference().assemble(Formulation::DarwinB).unwrap();
    assert_eq!(sys.expected_index, None);
    let tg = TimeGrid::new(0.0, 0.05, 0.01).unwrap();
    let series = implicit_euler(&sys, &tg).unwrap();
    assert!(series.final_state.iter().all(|&v| v == 0.0));
}
