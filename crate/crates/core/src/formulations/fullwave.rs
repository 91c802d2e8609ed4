//! Lossless full-wave system in the field unknowns `[h; e]`.

use super::{blocks, neg, DaeSystem, FieldMap, FitProblem, Formulation, Observable, Reduce};
use crate::error::{Error, Result};
use crate::linsolve::SparseMatrix;

/// `M = blockdiag(M_ν⁻¹, M_ε)`, `K = [[0, C], [−Cᵀ, 0]]`, `r = [0; −j_s]`.
pub fn fullwave_eh(p: &FitProblem) -> Result<DaeSystem> {
    if p.has_conductivity() {
        return Err(Error::FormulationMisuse("the field formulation is for lossless problems (sigma = 0)".into()));
    }
    if !p.contacts.is_empty() {
        return Err(Error::FormulationMisuse("driven contacts need a scalar potential formulation".into()));
    }
    let (nf, ne) = (p.ops.facets.len(), p.ops.edges.len());
    let reluct_inv: Vec<f64> = p.mats.nu.iter().map(|v| 1.0 / v).collect();
    let m = SparseMatrix::diag(&[reluct_inv.clone(), p.mats.eps.clone()].concat());
    let c = p.curl();
    let ct = neg(&c.transpose());
    let k = blocks(&[vec![None, Some(&c)], vec![Some(&ct), None]], &[nf, ne], &[nf, ne]);
    let mut sys = DaeSystem::new(Formulation::FullwaveEh, m, k, &[("h", nf), ("e", ne)], &[("faraday", nf), ("ampere", ne)]);
    sys.expected_index = Some(0);
    for (x, w) in p.current_sources() {
        sys.add_source("ampere", x.iter().map(|v| -v).collect(), w, false);
    }
    let n = nf + ne;
    let sel = |start: usize, len: usize| {
        let t: Vec<_> = (0..len).map(|i| (i, start + i, 1.0)).collect();
        SparseMatrix::from_triplets(len, n, &t)
    };
    let fe = sys.add_field(FieldMap { name: "e".into(), map: sel(nf, ne), lift: vec![], rate: false });
    let fh = sys.add_field(FieldMap { name: "h".into(), map: sel(0, nf), lift: vec![], rate: false });
    sys.observables.push(Observable { name: "E_elec".into(), field: fe, reduce: Reduce::Energy(p.mats.eps.clone()) });
    sys.observables.push(Observable { name: "E_mag".into(), field: fh, reduce: Reduce::Energy(reluct_inv) });
    Ok(sys)
}

/// Stiffness of the system in the scaled unknowns `M^{1/2} x`: `M^{−1/2} K M^{−1/2}`.
/// Requires a diagonal positive `M`.
pub fn transformed_stiffness(sys: &DaeSystem) -> SparseMatrix {
    let d: Vec<f64> = sys.m.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
    sys.k.scale_rows_cols(&d, &d)
}
