//! Numerical analysis of linear DAE pencils `(M, K)`: index estimation through the
//! Wong subspace sequence, the high-frequency perturbation experiment for the
//! index-2 toy problem, and definiteness checks of `λM + K`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulations::Waveform;
use crate::linsolve::{is_positive_definite, norm2, LuFactor, SparseMatrix};
use crate::timeint::{euler_steps, TimeGrid};

/// Largest pencil handled by the dense path.
pub const DENSE_LIMIT: usize = 3000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PencilReport {
    pub n: usize,
    pub index: usize,
    /// Dimensions of the nested subspaces `W_0 = {0} ⊂ W_1 ⊂ …` up to stagnation.
    pub subspace_dims: Vec<usize>,
    pub rank_m: usize,
    /// Relative rank tolerance: singular values below `tol·‖M‖₂` count as zero.
    pub rank_tol: f64,
    /// Shift `λ0` for which `λ0 M + K` was found nonsingular (equilibrated units).
    pub lambda0: f64,
    pub regular: bool,
}

/// Default relative rank tolerance `max(m, n)·ε·100`.
pub fn default_rank_tol(n: usize) -> f64 {
    n as f64 * f64::EPSILON * 100.0
}

/// Kronecker index of the regular pencil `(M, K)`.
///
/// The pencil is equilibrated, a shift `λ0` with `A = λ0 M + K` nonsingular is picked,
/// and the chain `W_1 = ker M`, `W_{i+1} = {x : M x ∈ A W_i}` is followed until it
/// stops growing. The number of strict increases is the index.
pub fn index_probe(m: &SparseMatrix, k: &SparseMatrix, rank_tol: Option<f64>) -> Result<PencilReport> {
    let n = m.nrows();
    if m.shape() != (n, n) || k.shape() != (n, n) {
        return Err(Error::InvalidSpec("pencil matrices must be square and of equal size".into()));
    }
    if n > DENSE_LIMIT {
        return Err(Error::SizeLimit(format!("{n} unknowns exceed the dense probe limit {DENSE_LIMIT}")));
    }
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(n));
    let (m, k) = equilibrate(&m.to_dense(), &k.to_dense());
    let m_norm = m.clone().singular_values().max();
    let rank_m = n - null_space(&m, tol, m_norm).ncols();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut shift = None;
    for _ in 0..3 {
        let lambda: f64 = rng.gen_range(0.5..2.0);
        let a = &m * lambda + &k;
        if null_space(&a, tol, a.clone().singular_values().max()).ncols() == 0 {
            shift = Some((lambda, a));
            break;
        }
    }
    let (lambda0, a) =
        shift.ok_or_else(|| Error::IrregularPencil("λM + K is singular for every sampled λ".into()))?;

    let mut w = null_space(&m, tol, m_norm);
    let mut dims = vec![0];
    while w.ncols() > *dims.last().unwrap() {
        dims.push(w.ncols());
        if w.ncols() == n {
            break;
        }
        let q = orth(&(&a * &w), tol);
        let proj = DMatrix::<f64>::identity(n, n) - &q * q.transpose();
        w = null_space(&(proj * &m), tol, m_norm);
    }
    Ok(PencilReport { n, index: dims.len() - 1, subspace_dims: dims, rank_m, rank_tol: tol, lambda0, regular: true })
}

/// Common row and column scaling of both matrices, then each normalised to unit max entry.
fn equilibrate(m: &DMatrix<f64>, k: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut m = m.clone();
    let mut k = k.clone();
    for i in 0..n {
        let r = (0..n).map(|j| m[(i, j)].abs().max(k[(i, j)].abs())).fold(0.0, f64::max);
        if r > 0.0 {
            m.row_mut(i).scale_mut(1.0 / r);
            k.row_mut(i).scale_mut(1.0 / r);
        }
    }
    for j in 0..n {
        let c = (0..n).map(|i| m[(i, j)].abs().max(k[(i, j)].abs())).fold(0.0, f64::max);
        if c > 0.0 {
            m.column_mut(j).scale_mut(1.0 / c);
            k.column_mut(j).scale_mut(1.0 / c);
        }
    }
    for a in [&mut m, &mut k] {
        let s = a.amax();
        if s > 0.0 {
            *a /= s;
        }
    }
    (m, k)
}

/// Orthonormal basis of the null space of a square matrix, as columns. Singular values
/// up to `tol·scale` count as zero.
fn null_space(a: &DMatrix<f64>, tol: f64, scale: f64) -> DMatrix<f64> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let cut = tol * scale;
    let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= cut).collect();
    let mut out = DMatrix::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        out.set_column(c, &v_t.row(i).transpose());
    }
    out
}

/// Orthonormal basis of the column space.
fn orth(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let cut = tol * smax;
    let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| smax > 0.0 && svd.singular_values[i] > cut).collect();
    let mut out = DMatrix::zeros(a.nrows(), cols.len());
    for (c, &i) in cols.iter().enumerate() {
        out.set_column(c, &u.column(i));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub k: u32,
    pub dt: f64,
    /// `max |x2_perturbed − x2_clean|` over one perturbation period.
    pub amplification: f64,
    /// Amplitude `10^k` of the perturbation in the exact solution.
    pub analytic: f64,
    /// Analytic amplitude times the damping factor `1/sqrt(1 + (ω Δt)²)` of implicit Euler.
    pub damped_bound: f64,
}

/// Runs the index-2 toy `ẋ1 = x2`, `x1 = sin t + δ(t)` with `δ = 10^{−k} sin(10^{2k} t)`
/// and with `δ = 0` under implicit Euler and compares `x2`.
pub fn perturbation_experiment(k: u32, dt: f64) -> Result<PerturbationReport> {
    perturbation_experiment_with(k, dt, 10f64.powi(-(k as i32)))
}

/// As [`perturbation_experiment`] with an explicit perturbation amplitude.
pub fn perturbation_experiment_with(k: u32, dt: f64, amplitude: f64) -> Result<PerturbationReport> {
    let omega = 10f64.powi(2 * k as i32);
    let period = 2.0 * std::f64::consts::PI / omega;
    if !(dt > 0.0) || dt > period / 40.0 * (1.0 + 1e-12) {
        return Err(Error::ResolutionError(format!(
            "dt = {dt:e} exceeds period/40 = {:e} of the perturbation",
            period / 40.0
        )));
    }
    let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]);
    let kk = SparseMatrix::from_triplets(2, 2, &[(0, 1, -1.0), (1, 0, 1.0)]);
    let base = Waveform::Sine { amplitude: 1.0, frequency: 1.0 / (2.0 * std::f64::consts::PI) };
    let pert = Waveform::Sine { amplitude, frequency: omega / (2.0 * std::f64::consts::PI) };
    let tg = TimeGrid::new(0.0, 2.0 * period, dt)?;
    let run = |with: bool| -> Result<Vec<(f64, f64)>> {
        let mut x2 = Vec::new();
        let rhs = |t: f64| vec![0.0, base.value(t) + if with { pert.value(t) } else { 0.0 }];
        euler_steps(&m, &kk, rhs, &[0.0, 1.0], &tg, |_, t, x| {
            x2.push((t, x[1]));
            Ok(())
        })?;
        Ok(x2)
    };
    let clean = run(false)?;
    let perturbed = run(true)?;
    let amplification = clean
        .iter()
        .zip(&perturbed)
        .filter(|((t, _), _)| *t >= period - 1e-15 && *t <= 2.0 * period + 1e-15)
        .map(|((_, a), (_, b))| (a - b).abs())
        .fold(0.0, f64::max);
    let analytic = amplitude * omega;
    Ok(PerturbationReport {
        k,
        dt,
        amplification,
        analytic,
        damped_bound: analytic / (1.0 + (omega * dt).powi(2)).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefinitenessSample {
    pub lambda: f64,
    /// Smallest eigenvalue estimate of the symmetric `λM + K` from inverse iteration.
    pub min_eig: f64,
    pub cholesky: bool,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefinitenessReport {
    pub samples: Vec<DefinitenessSample>,
    pub positive_definite: bool,
}

/// Checks `λM + K` at each sample `λ` with a Cholesky attempt and an inverse-iteration
/// estimate of the smallest eigenvalue. A sample is positive when the factorisation
/// succeeds and the estimate exceeds `1e-12·‖λM + K‖_∞`.
pub fn pencil_definiteness(m: &SparseMatrix, k: &SparseMatrix, lambdas: &[f64]) -> DefinitenessReport {
    let samples: Vec<DefinitenessSample> = lambdas
        .iter()
        .map(|&lambda| {
            let a = m.scale(lambda).add(k);
            let cholesky = is_positive_definite(&a);
            let min_eig = min_eigenvalue(&a);
            let positive = cholesky && min_eig > 1e-12 * a.norm_inf();
            DefinitenessSample { lambda, min_eig, cholesky, positive }
        })
        .collect();
    let positive_definite = !samples.is_empty() && samples.iter().all(|s| s.positive);
    DefinitenessReport { samples, positive_definite }
}

/// Eigenvalue of smallest magnitude of a symmetric matrix by inverse iteration;
/// zero when the matrix cannot be factorised.
pub fn min_eigenvalue(a: &SparseMatrix) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let Ok(lu) = LuFactor::new(a) else {
        return 0.0;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut rayleigh = f64::NAN;
    for _ in 0..500 {
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let Ok(y) = lu.solve(&x) else {
            return 0.0;
        };
        let ny = norm2(&y);
        if !ny.is_finite() || ny == 0.0 {
            return 0.0;
        }
        x = y.iter().map(|v| v / ny).collect();
        let next = a.quad_form(&x);
        if (next - rayleigh).abs() <= 1e-10 * next.abs() {
            return next;
        }
        rayleigh = next;
    }
    rayleigh
}
