//! Darwin approximations in `[a; Φ]`. No index result is asserted for these systems.

use super::{blocks, fixed_laplacian, grad_div_gauge, DaeSystem, FieldMap, FitProblem, Formulation, Gauge, Observable, Reduce};
use crate::error::{Error, Result};
use crate::linsolve::SparseMatrix;

struct Parts {
    ne: usize,
    np: usize,
    m_sigma: SparseMatrix,
    eps_g: SparseMatrix,
    sigma_g: SparseMatrix,
    sd_eps: SparseMatrix,
    sd_sigma: SparseMatrix,
}

fn parts(p: &FitProblem) -> Result<Parts> {
    p.mats.require_anchored()?;
    let g = p.grad();
    let sd = p.dual_div();
    Ok(Parts {
        ne: p.ops.edges.len(),
        np: p.ops.points.len(),
        m_sigma: p.mats.m_sigma(),
        eps_g: g.scale_rows(&p.mats.eps),
        sigma_g: g.scale_rows(&p.mats.sigma),
        sd_eps: sd.scale_cols(&p.mats.eps),
        sd_sigma: sd.scale_cols(&p.mats.sigma),
    })
}

/// Currents and the Ampère-row terms of the prescribed potentials.
fn ampere_sources(p: &FitProblem, sys: &mut DaeSystem) {
    for (x, w) in p.current_sources() {
        sys.add_source("ampere", x, w, false);
    }
    for (gphi, w) in p.contact_gradients() {
        sys.add_source("ampere", gphi.iter().zip(&p.mats.eps).map(|(g, e)| -g * e).collect(), w, true);
        sys.add_source("ampere", gphi.iter().zip(&p.mats.sigma).map(|(g, s)| -g * s).collect(), w, false);
    }
}

fn magnetic_energy(p: &FitProblem, sys: &mut DaeSystem) {
    let c = p.curl();
    let np = p.ops.points.len();
    let map = blocks(&[vec![Some(&c), None]], &[c.nrows()], &[p.ops.edges.len(), np]);
    let fb = sys.add_field(FieldMap { name: "b".into(), map, lift: vec![], rate: false });
    sys.observables.push(Observable { name: "E_mag".into(), field: fb, reduce: Reduce::Energy(p.mats.nu.clone()) });
}

/// `CᵀM_νC a + M_σ ȧ + M_σ G Φ + M_ε G Φ̇ = j_s` and `S̃M_ε ȧ + L_ε Φ = q`.
pub fn darwin_a(p: &FitProblem) -> Result<DaeSystem> {
    let q = p
        .charge
        .as_ref()
        .ok_or_else(|| Error::MissingCharge("the charge-driven Darwin system needs node charges".into()))?;
    let d = parts(p)?;
    let kcc = p.curl_curl();
    let sizes = [d.ne, d.np];
    let m = blocks(&[vec![Some(&d.m_sigma), Some(&d.eps_g)], vec![Some(&d.sd_eps), None]], &sizes, &sizes);
    let k = blocks(&[vec![Some(&kcc), Some(&d.sigma_g)], vec![None, Some(&p.mats.l_eps)]], &sizes, &sizes);
    let mut sys = DaeSystem::new(Formulation::DarwinA, m, k, &[("a", d.ne), ("phi", d.np)], &[("ampere", d.ne), ("gauss", d.np)]);
    ampere_sources(p, &mut sys);
    sys.add_source("gauss", q.vector.clone(), q.waveform, false);
    let l_eps_fixed = fixed_laplacian(p, &p.mats.eps);
    for (phi, w) in p.contact_patterns() {
        sys.add_source("gauss", l_eps_fixed.matvec(&phi).iter().map(|v| -v).collect(), w, false);
    }
    magnetic_energy(p, &mut sys);
    Ok(sys)
}

/// Same Ampère row as [`darwin_a`] (plus the grad-div gauge when selected) with the
/// charge eliminated through the continuity equation:
/// `S̃M_σ ȧ + L_σ Φ + L_ε Φ̇ = 0`.
pub fn darwin_b(p: &FitProblem) -> Result<DaeSystem> {
    let d = parts(p)?;
    let mut kcc = p.curl_curl();
    if p.settings.gauge == Gauge::Graddiv {
        kcc = kcc.add(&grad_div_gauge(p)?);
    }
    let sizes = [d.ne, d.np];
    let m = blocks(
        &[vec![Some(&d.m_sigma), Some(&d.eps_g)], vec![Some(&d.sd_sigma), Some(&p.mats.l_eps)]],
        &sizes,
        &sizes,
    );
    let k = blocks(&[vec![Some(&kcc), Some(&d.sigma_g)], vec![None, Some(&p.mats.l_sigma)]], &sizes, &sizes);
    let mut sys =
        DaeSystem::new(Formulation::DarwinB, m, k, &[("a", d.ne), ("phi", d.np)], &[("ampere", d.ne), ("continuity", d.np)]);
    ampere_sources(p, &mut sys);
    let l_eps_fixed = fixed_laplacian(p, &p.mats.eps);
    let l_sigma_fixed = fixed_laplacian(p, &p.mats.sigma);
    for (phi, w) in p.contact_patterns() {
        sys.add_source("continuity", l_eps_fixed.matvec(&phi).iter().map(|v| -v).collect(), w, true);
        sys.add_source("continuity", l_sigma_fixed.matvec(&phi).iter().map(|v| -v).collect(), w, false);
    }
    magnetic_energy(p, &mut sys);
    Ok(sys)
}
