//! Potential formulations of the full Maxwell system: the four-block `[q; Φ; a; π]`
//! systems under the Lorenz and Coulomb gauges, the damped wave pair, and the
//! discrete continuity residual that couples their sources.

use super::{
    blocks, fixed_laplacian, neg, DaeSystem, FieldMap, FitProblem, Formulation, Observable, Predicate, Reduce,
    SourceTerm,
};
use crate::error::{Error, Result};
use crate::linsolve::{norm2, LuFactor, SparseMatrix};
use crate::materials::MaterialSet;
use crate::topology::ProjectedOps;

#[derive(Clone, Copy, PartialEq, Eq)]
enum FullGauge {
    Lorenz,
    Coulomb,
}

fn four_block(p: &FitProblem, gauge: FullGauge) -> Result<DaeSystem> {
    p.mats.require_anchored()?;
    let (np, ne) = (p.ops.points.len(), p.ops.edges.len());
    let mats = &p.mats;
    let sd = p.dual_div();
    let g = p.grad();
    let m_eps = mats.m_eps();
    let m_sigma = mats.m_sigma();
    let sd_eps = sd.scale_cols(&mats.eps);
    let eps_g = g.scale_rows(&mats.eps);
    let sigma_g = g.scale_rows(&mats.sigma);
    let kcc = p.curl_curl();
    let eye_e = SparseMatrix::identity(ne);
    let eye_p = SparseMatrix::identity(np);
    let neg_eye_e = neg(&eye_e);
    let neg_l_eps = neg(&mats.l_eps);
    let gauge_a = match gauge {
        FullGauge::Lorenz => mats.l_eps.matmul(mats.scaling(&p.ops)?).matmul(&sd_eps),
        FullGauge::Coulomb => sd_eps.clone(),
    };
    let sizes_rows = [np, ne, np, ne];
    let sizes_cols = [np, np, ne, ne];
    let m_row1 = match gauge {
        FullGauge::Lorenz => vec![None, Some(&mats.l_eps), None, None],
        FullGauge::Coulomb => vec![None, None, None, None],
    };
    let m = blocks(
        &[m_row1, vec![None, Some(&eps_g), None, Some(&m_eps)], vec![None, None, None, None], vec![None, None, Some(&eye_e), None]],
        &sizes_rows,
        &sizes_cols,
    );
    let k_row1 = match gauge {
        FullGauge::Lorenz => vec![None, Some(&mats.l_sigma), Some(&gauge_a), None],
        FullGauge::Coulomb => vec![None, None, Some(&gauge_a), None],
    };
    let k = blocks(
        &[
            k_row1,
            vec![None, Some(&sigma_g), Some(&kcc), Some(&m_sigma)],
            vec![Some(&eye_p), Some(&neg_l_eps), None, Some(&sd_eps)],
            vec![None, None, None, Some(&neg_eye_e)],
        ],
        &sizes_rows,
        &sizes_cols,
    );
    let (tag, index) = match gauge {
        FullGauge::Lorenz => (Formulation::AphiLorenz, 1),
        FullGauge::Coulomb => (Formulation::AphiCoulomb, 2),
    };
    let mut sys = DaeSystem::new(
        tag,
        m,
        k,
        &[("q", np), ("phi", np), ("a", ne), ("pi", ne)],
        &[("gauge", np), ("ampere", ne), ("gauss", np), ("velocity", ne)],
    );
    sys.expected_index = Some(index);

    for (x, w) in p.current_sources() {
        sys.add_source("ampere", x, w, false);
    }
    let l_eps_fixed = fixed_laplacian(p, &mats.eps);
    let l_sigma_fixed = fixed_laplacian(p, &mats.sigma);
    let gf = p.ops.grad_fixed.to_f64();
    let mut charge_offset = vec![0.0; np];
    let mut e_lift = Vec::new();
    for (phi, w) in p.contact_patterns() {
        let le = l_eps_fixed.matvec(&phi);
        let ls = l_sigma_fixed.matvec(&phi);
        let gphi = gf.matvec(&phi);
        if gauge == FullGauge::Lorenz {
            sys.add_source("gauge", neg_vec(&le), w, true);
            sys.add_source("gauge", neg_vec(&ls), w, false);
        }
        let ge: Vec<f64> = gphi.iter().zip(&mats.eps).map(|(g, e)| -g * e).collect();
        let gs: Vec<f64> = gphi.iter().zip(&mats.sigma).map(|(g, s)| -g * s).collect();
        sys.add_source("ampere", ge, w, true);
        sys.add_source("ampere", gs, w, false);
        sys.add_source("gauss", le.clone(), w, false);
        let w0 = w.value(0.0);
        charge_offset.iter_mut().zip(&le).for_each(|(o, l)| *o += l * w0);
        e_lift.push(SourceTerm::new(neg_vec(&gphi), w));
    }

    let n = sys.dim();
    let stack = |parts: [Option<&SparseMatrix>; 4], rows: usize| {
        blocks(&[parts.to_vec()], &[rows], &sizes_cols)
    };
    sys.predicates.push(Predicate {
        name: "charge".into(),
        matrix: stack([Some(&eye_p), Some(&neg_l_eps), None, Some(&sd_eps)], np),
        offset: charge_offset,
    });
    if gauge == FullGauge::Coulomb {
        sys.predicates.push(Predicate {
            name: "coulomb-a".into(),
            matrix: stack([None, None, Some(&sd_eps), None], np),
            offset: vec![0.0; np],
        });
        sys.predicates.push(Predicate {
            name: "coulomb-pi".into(),
            matrix: stack([None, None, None, Some(&sd_eps)], np),
            offset: vec![0.0; np],
        });
    }

    let neg_g = neg(&g);
    let e_map = stack([None, Some(&neg_g), None, Some(&neg_eye_e)], ne);
    let c = p.curl();
    let b_map = stack([None, None, Some(&c), None], p.ops.facets.len());
    debug_assert_eq!(e_map.ncols(), n);
    let fe = sys.add_field(FieldMap { name: "e".into(), map: e_map, lift: e_lift, rate: false });
    let fb = sys.add_field(FieldMap { name: "b".into(), map: b_map, lift: vec![], rate: false });
    sys.observables.push(Observable { name: "E_elec".into(), field: fe, reduce: Reduce::Energy(mats.eps.clone()) });
    sys.observables.push(Observable { name: "E_mag".into(), field: fb, reduce: Reduce::Energy(mats.nu.clone()) });
    Ok(sys)
}

fn neg_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

/// Potentials `[q; Φ; a; π]` under the generalised Lorenz gauge.
pub fn aphi_lorenz(p: &FitProblem) -> Result<DaeSystem> {
    four_block(p, FullGauge::Lorenz)
}

/// Potentials `[q; Φ; a; π]` under the Coulomb gauge `S̃M_ε a = 0`.
pub fn aphi_coulomb(p: &FitProblem) -> Result<DaeSystem> {
    four_block(p, FullGauge::Coulomb)
}

/// Evaluates the discrete continuity equation for given sources and potential rates.
pub struct ContinuityCheck {
    sd: SparseMatrix,
    eps: Vec<f64>,
    sigma: Vec<f64>,
    l_sigma: SparseMatrix,
    l_eps: LuFactor,
    l_eps_fixed: SparseMatrix,
    l_sigma_fixed: SparseMatrix,
}

impl ContinuityCheck {
    pub fn new(ops: &ProjectedOps, mats: &MaterialSet) -> Result<Self> {
        mats.require_anchored()?;
        let sd = ops.dual_div.to_f64();
        let gf = ops.grad_fixed.to_f64();
        let fixed = |w: &[f64]| sd.scale_cols(w).matmul(&gf).scale(-1.0);
        Ok(Self {
            l_eps_fixed: fixed(&mats.eps),
            l_sigma_fixed: fixed(&mats.sigma),
            sd,
            eps: mats.eps.clone(),
            sigma: mats.sigma.clone(),
            l_sigma: mats.l_sigma.clone(),
            l_eps: LuFactor::new(&mats.l_eps)?,
        })
    }

    /// Returns `(‖residual‖, scale)` of
    /// `S̃j_s + L_σL_ε⁻¹q + q̇ − [S̃M_σ − L_σL_ε⁻¹S̃M_ε]ȧ`, extended by the terms of the
    /// prescribed potentials `phi_fixed` (empty when there are none). The scale is the
    /// sum of the norms of the individual terms, with the divergences taken of the
    /// entrywise magnitudes so that cancellation inside a term does not shrink it.
    pub fn residual(&self, js: &[f64], q: &[f64], q_dot: &[f64], a_dot: &[f64], phi_fixed: &[f64]) -> Result<(f64, f64)> {
        let div_j = self.sd.matvec(js);
        let mut inner = q.to_vec();
        let mut terms = vec![self.abs_div(js.iter().map(|v| v.abs())), q_dot.to_vec()];
        let eps_a: Vec<f64> = a_dot.iter().zip(&self.eps).map(|(a, e)| a * e).collect();
        let sig_a: Vec<f64> = a_dot.iter().zip(&self.sigma).map(|(a, s)| a * s).collect();
        let sd_eps_a = self.sd.matvec(&eps_a);
        let sd_sig_a = self.sd.matvec(&sig_a);
        inner.iter_mut().zip(&sd_eps_a).for_each(|(i, v)| *i += v);
        let mut fixed_sigma = vec![0.0; q.len()];
        if !phi_fixed.is_empty() {
            let le = self.l_eps_fixed.matvec(phi_fixed);
            inner.iter_mut().zip(&le).for_each(|(i, v)| *i -= v);
            fixed_sigma = self.l_sigma_fixed.matvec(phi_fixed);
        }
        let coupled = self.l_sigma.matvec(&self.l_eps.solve(&inner)?);
        let r: Vec<f64> = (0..q.len())
            .map(|i| div_j[i] + q_dot[i] + coupled[i] + fixed_sigma[i] - sd_sig_a[i])
            .collect();
        terms.push(coupled);
        terms.push(fixed_sigma);
        terms.push(self.abs_div(sig_a.iter().map(|v| v.abs())));
        Ok((norm2(&r), terms.iter().map(|t| norm2(t)).sum()))
    }

    fn abs_div(&self, v: impl Iterator<Item = f64>) -> Vec<f64> {
        let v: Vec<f64> = v.collect();
        let mut out = vec![0.0; self.sd.nrows()];
        for (i, j, s) in self.sd.triplets() {
            out[i] += s.abs() * v[j];
        }
        out
    }
}

/// One-shot evaluation of the continuity residual without prescribed potentials.
pub fn continuity_residual(
    ops: &ProjectedOps,
    mats: &MaterialSet,
    js: &[f64],
    q: &[f64],
    q_dot: &[f64],
    a_dot: &[f64],
) -> Result<f64> {
    Ok(ContinuityCheck::new(ops, mats)?.residual(js, q, q_dot, a_dot, &[])?.0)
}

/// Damped wave equations for `a` and `Φ` with prescribed charges, in first-order
/// companion form over `[a; ȧ; Φ; Φ̇]`. The scalar equation is multiplied by
/// `L_ε M_N` so that no inverse enters the matrices.
pub fn wave_pair(p: &FitProblem) -> Result<DaeSystem> {
    p.mats.require_anchored()?;
    if !p.contacts.is_empty() {
        return Err(Error::FormulationMisuse("the wave pair takes prescribed charges, not driven contacts".into()));
    }
    let (np, ne) = (p.ops.points.len(), p.ops.edges.len());
    let mats = &p.mats;
    let sd = p.dual_div();
    let g = p.grad();
    let scaling = mats.scaling(&p.ops)?;
    let sd_eps = sd.scale_cols(&mats.eps);
    let eps_g = g.scale_rows(&mats.eps);
    let l_nu = p.curl_curl().sub(&eps_g.matmul(scaling).matmul(&sd_eps));
    let l_scaled = mats.l_eps.matmul(scaling);
    let l_phi = l_scaled.matmul(&mats.l_eps);
    check_wave_sources(p)?;

    let eye_e = SparseMatrix::identity(ne);
    let eye_p = SparseMatrix::identity(np);
    let neg_eye_e = neg(&eye_e);
    let neg_eye_p = neg(&eye_p);
    let m_eps = mats.m_eps();
    let m_sigma = mats.m_sigma();
    let rs = [ne, ne, np, np];
    let m = blocks(
        &[
            vec![Some(&eye_e), None, None, None],
            vec![None, Some(&m_eps), None, None],
            vec![None, None, Some(&eye_p), None],
            vec![None, None, None, Some(&mats.l_eps)],
        ],
        &rs,
        &rs,
    );
    let k = blocks(
        &[
            vec![None, Some(&neg_eye_e), None, None],
            vec![Some(&l_nu), Some(&m_sigma), None, None],
            vec![None, None, None, Some(&neg_eye_p)],
            vec![None, None, Some(&l_phi), Some(&mats.l_sigma)],
        ],
        &rs,
        &rs,
    );
    let mut sys = DaeSystem::new(
        Formulation::WavePair,
        m,
        k,
        &[("a", ne), ("a_dot", ne), ("phi", np), ("phi_dot", np)],
        &[("a-velocity", ne), ("wave-a", ne), ("phi-velocity", np), ("wave-phi", np)],
    );
    sys.expected_index = Some(0);
    for (x, w) in p.current_sources() {
        sys.add_source("wave-a", x, w, false);
    }
    if let Some(q) = &p.charge {
        sys.add_source("wave-phi", l_scaled.matvec(&q.vector), q.waveform, false);
    }
    let neg_g = neg(&g);
    let e_map = blocks(&[vec![None, Some(&neg_eye_e), Some(&neg_g), None]], &[ne], &rs);
    let c = p.curl();
    let b_map = blocks(&[vec![Some(&c), None, None, None]], &[p.ops.facets.len()], &rs);
    let fe = sys.add_field(FieldMap { name: "e".into(), map: e_map, lift: vec![], rate: false });
    let fb = sys.add_field(FieldMap { name: "b".into(), map: b_map, lift: vec![], rate: false });
    sys.observables.push(Observable { name: "E_elec".into(), field: fe, reduce: Reduce::Energy(mats.eps.clone()) });
    sys.observables.push(Observable { name: "E_mag".into(), field: fb, reduce: Reduce::Energy(mats.nu.clone()) });
    Ok(sys)
}

/// The prescribed current and charge must satisfy the continuity equation at rest.
fn check_wave_sources(p: &FitProblem) -> Result<()> {
    let sources = p.current_sources();
    if sources.is_empty() && p.charge.is_none() {
        return Ok(());
    }
    let check = ContinuityCheck::new(&p.ops, &p.mats)?;
    let (np, ne) = (p.ops.points.len(), p.ops.edges.len());
    let mut scales: Vec<f64> = sources.iter().map(|(_, w)| w.time_scale()).collect();
    if let Some(q) = &p.charge {
        scales.push(q.waveform.time_scale());
    }
    for &ts in &scales {
        for frac in [0.137, 0.291, 0.613] {
            let t = frac * ts;
            let mut js = vec![0.0; ne];
            for (x, w) in &sources {
                let c = w.value(t);
                js.iter_mut().zip(x).for_each(|(j, x)| *j += c * x);
            }
            let (q, q_dot) = match &p.charge {
                Some(ch) => (
                    ch.vector.iter().map(|v| v * ch.waveform.value(t)).collect(),
                    ch.vector.iter().map(|v| v * ch.waveform.derivative(t)).collect(),
                ),
                None => (vec![0.0; np], vec![0.0; np]),
            };
            let (r, scale) = check.residual(&js, &q, &q_dot, &vec![0.0; ne], &[])?;
            if r > 1e-8 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::SourceInconsistent(format!(
                    "continuity residual {:e} relative at t = {t:e}",
                    r / scale
                )));
            }
        }
    }
    Ok(())
}
