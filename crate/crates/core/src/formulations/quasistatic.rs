//! Electroquasistatic scalar-potential systems and the magnetoquasistatic
//! vector-potential system with optional grad-div gauge.

use super::{blocks, fixed_laplacian, neg, DaeSystem, FieldMap, FitProblem, Formulation, Gauge, Observable, Reduce, SourceTerm};
use crate::error::{Error, Result};
use crate::linsolve::{is_positive_definite, SparseMatrix};
use crate::materials::scaling_matrix;

/// Electric field `−GΦ − G_fixed φ(t)` as a field map over a state whose block
/// `phi_start..phi_start+np` holds the free potentials.
fn potential_field(p: &FitProblem, n: usize, phi_start: usize) -> FieldMap {
    let g = p.grad();
    let t: Vec<_> = g.triplets().map(|(i, j, v)| (i, j + phi_start, -v)).collect();
    let map = SparseMatrix::from_triplets(g.nrows(), n, &t);
    let lift = p
        .contact_gradients()
        .into_iter()
        .map(|(gphi, w)| SourceTerm::new(gphi.iter().map(|v| -v).collect(), w))
        .collect();
    FieldMap { name: "e".into(), map, lift, rate: false }
}

fn add_contact_sources(p: &FitProblem, sys: &mut DaeSystem, row: &str) {
    let l_eps_fixed = fixed_laplacian(p, &p.mats.eps);
    let l_sigma_fixed = fixed_laplacian(p, &p.mats.sigma);
    for (phi, w) in p.contact_patterns() {
        sys.add_source(row, l_eps_fixed.matvec(&phi).iter().map(|v| -v).collect(), w, true);
        sys.add_source(row, l_sigma_fixed.matvec(&phi).iter().map(|v| -v).collect(), w, false);
    }
}

/// `L_ε Φ̇ + L_σ Φ = −(L_ε,fixed φ ẇ + L_σ,fixed φ w)` over the free potentials.
pub fn eqs_phi(p: &FitProblem) -> Result<DaeSystem> {
    p.mats.require_anchored()?;
    let np = p.ops.points.len();
    let mut sys = DaeSystem::new(
        Formulation::Eqs,
        p.mats.l_eps.clone(),
        p.mats.l_sigma.clone(),
        &[("phi", np)],
        &[("charge", np)],
    );
    sys.expected_index = Some(0);
    add_contact_sources(p, &mut sys, "charge");
    let fe = sys.add_field(potential_field(p, np, 0));
    sys.observables.push(Observable { name: "E_elec".into(), field: fe, reduce: Reduce::Energy(p.mats.eps.clone()) });
    Ok(sys)
}

/// Mixed potential and charge unknowns `[Φ; q]`:
/// `L_σΦ + q̇ = −L_σ,fixed φ w` and `q − L_εΦ = L_ε,fixed φ w`.
pub fn eqs_mixed(p: &FitProblem) -> Result<DaeSystem> {
    p.mats.require_anchored()?;
    let np = p.ops.points.len();
    let eye = SparseMatrix::identity(np);
    let neg_l = neg(&p.mats.l_eps);
    let sizes = [np, np];
    let m = blocks(&[vec![None, Some(&eye)], vec![None, None]], &sizes, &sizes);
    let k = blocks(&[vec![Some(&p.mats.l_sigma), None], vec![Some(&neg_l), Some(&eye)]], &sizes, &sizes);
    let mut sys = DaeSystem::new(Formulation::EqsMixed, m, k, &[("phi", np), ("q", np)], &[("continuity", np), ("gauss", np)]);
    sys.expected_index = Some(1);
    let l_eps_fixed = fixed_laplacian(p, &p.mats.eps);
    let l_sigma_fixed = fixed_laplacian(p, &p.mats.sigma);
    for (phi, w) in p.contact_patterns() {
        sys.add_source("continuity", l_sigma_fixed.matvec(&phi).iter().map(|v| -v).collect(), w, false);
        sys.add_source("gauss", l_eps_fixed.matvec(&phi), w, false);
    }
    let fe = sys.add_field(potential_field(p, 2 * np, 0));
    sys.observables.push(Observable { name: "E_elec".into(), field: fe, reduce: Reduce::Energy(p.mats.eps.clone()) });
    Ok(sys)
}

/// Grad-div gauge matrix `M₁ S̃ᵀ M_N,1 S̃ M₁` with the regularised conductance
/// `M₁ = M_σ + θ·r·M_ε`, where `r = max M_σ / max M_ε` is the fastest relaxation rate
/// (1 s⁻¹ without conductors). The scaling matrix is built from `M₁` so the gauge
/// carries the units of the curl-curl matrix in conductors and in air alike.
pub fn grad_div_gauge(p: &FitProblem) -> Result<SparseMatrix> {
    p.mats.require_anchored()?;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let (s_max, e_max) = (max(&p.mats.sigma), max(&p.mats.eps));
    let rate = if s_max > 0.0 && e_max > 0.0 { s_max / e_max } else { 1.0 };
    let theta = p.settings.theta * rate;
    let m1: Vec<f64> = p.mats.sigma.iter().zip(&p.mats.eps).map(|(s, e)| s + theta * e).collect();
    let sd = p.dual_div();
    let l1 = sd.scale_cols(&m1).matmul(&sd.transpose());
    let scaling = scaling_matrix(p.settings.scaling, &p.ops, &m1, &p.mats.nu, &l1)?;
    let b = sd.scale_cols(&m1);
    Ok(b.transpose().matmul(&scaling).matmul(&b))
}

/// `M_σ ȧ + (CᵀM_νC + Z) a = Σ X_k i_k(t)`.
pub fn mqs_astar(p: &FitProblem, gauge: Gauge) -> Result<DaeSystem> {
    if !p.contacts.is_empty() {
        return Err(Error::FormulationMisuse("the vector-potential formulation has no scalar potential for contacts".into()));
    }
    let ne = p.ops.edges.len();
    let m = p.mats.m_sigma();
    let mut k = p.curl_curl();
    if gauge == Gauge::Graddiv {
        k = k.add(&grad_div_gauge(p)?);
        if !is_positive_definite(&m.add(&k)) {
            return Err(Error::GaugeInsufficient("M_sigma + K is not positive definite".into()));
        }
    }
    let mut sys = DaeSystem::new(Formulation::MqsAstar, m, k, &[("a", ne)], &[("ampere", ne)]);
    sys.expected_index = Some(1);
    for (x, w) in p.current_sources() {
        sys.add_source("ampere", x, w, false);
    }
    let c = p.curl();
    let fb = sys.add_field(FieldMap { name: "b".into(), map: c, lift: vec![], rate: false });
    sys.observables.push(Observable { name: "E_mag".into(), field: fb, reduce: Reduce::Energy(p.mats.nu.clone()) });
    let fa = sys.add_field(FieldMap { name: "a_dot".into(), map: SparseMatrix::identity(ne), lift: vec![], rate: true });
    for (name, x) in p.winding_set.names.iter().zip(&p.winding_set.columns) {
        sys.observables.push(Observable { name: format!("u_{name}"), field: fa, reduce: Reduce::Weighted(x.clone()) });
    }
    Ok(sys)
}
