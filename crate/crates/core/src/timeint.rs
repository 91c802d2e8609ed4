//! Fixed-step time integration: implicit Euler for the assembled DAEs, the
//! staggered leapfrog scheme for the lossless field system, a CFL estimate and
//! initial-value consistency checks.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulations::{DaeSystem, Formulation};
use crate::grid::{Axis, Grid, SubdomainMap};
use crate::linsolve::{LuFactor, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidSpec(format!("time step must be positive, got {dt}")));
        }
        if !(t_end > t0) {
            return Err(Error::InvalidSpec(format!("end time {t_end} must exceed start time {t0}")));
        }
        Ok(Self { t0, t_end, dt })
    }

    /// Number of steps; the last step lands on `t_end` up to rounding.
    pub fn steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }
}

/// Named scalar series sampled at `times`, plus the final state.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[k][n]` is scalar `names[k]` at `times[n]`.
    pub values: Vec<Vec<f64>>,
    #[serde(skip)]
    pub final_state: Vec<f64>,
}

impl TimeSeries {
    pub fn new(names: Vec<String>) -> Self {
        let values = vec![Vec::new(); names.len()];
        Self { names, values, ..Default::default() }
    }

    pub fn push(&mut self, t: f64, row: &[f64]) {
        assert_eq!(row.len(), self.names.len(), "row length must match the series names");
        self.times.push(t);
        self.values.iter_mut().zip(row).for_each(|(col, &v)| col.push(v));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.values[k].as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t")?;
        for n in &self.names {
            write!(out, ",{n}")?;
        }
        writeln!(out)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(out, "{t:.9e}")?;
            for col in &self.values {
                write!(out, ",{:.12e}", col[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Implicit Euler on `M ẋ + K x = r(t)` with a single factorisation of `M/Δt + K`.
/// `observe(n, t_n, x_n)` is called for the initial state and after every step.
/// Returns the final state.
pub fn euler_steps<R, O>(m: &SparseMatrix, k: &SparseMatrix, rhs: R, x0: &[f64], tg: &TimeGrid, mut observe: O) -> Result<Vec<f64>>
where
    R: Fn(f64) -> Vec<f64>,
    O: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    let inv_dt = 1.0 / tg.dt;
    let step_matrix = m.scale(inv_dt).add(k);
    let lu = LuFactor::new(&step_matrix).map_err(|e| Error::StepMatrixSingular(e.to_string()))?;
    let mut x = x0.to_vec();
    observe(0, tg.t0, &x)?;
    for n in 1..=tg.steps() {
        let t = tg.time(n);
        let mut b = rhs(t);
        let mx = m.matvec(&x);
        b.iter_mut().zip(&mx).for_each(|(b, v)| *b += inv_dt * v);
        x = lu.solve(&b).map_err(|e| Error::SolveError { step: n, message: e.to_string() })?;
        observe(n, t, &x)?;
    }
    Ok(x)
}

/// Values of every observable of `sys` at state `x`. Rate fields use the backward
/// difference to `x_prev`.
pub fn observe(sys: &DaeSystem, x: &[f64], x_prev: &[f64], t: f64, dt: f64) -> Vec<f64> {
    let rate: Vec<f64> = x.iter().zip(x_prev).map(|(a, b)| (a - b) / dt).collect();
    let fields: Vec<Option<Vec<f64>>> = sys
        .fields
        .iter()
        .enumerate()
        .map(|(i, f)| sys.observables.iter().any(|o| o.field == i).then(|| {
            if f.rate {
                f.map.matvec(&rate)
            } else {
                f.eval(x, t)
            }
        }))
        .collect();
    sys.observables
        .iter()
        .map(|o| o.reduce(fields[o.field].as_deref().expect("observed field evaluated")))
        .collect()
}

/// Implicit Euler from `sys.x0`, recording every observable of the system. Waveform
/// derivatives in the sources enter as backward differences.
pub fn implicit_euler(sys: &DaeSystem, tg: &TimeGrid) -> Result<TimeSeries> {
    implicit_euler_from(sys, tg, &sys.x0)
}

pub fn implicit_euler_from(sys: &DaeSystem, tg: &TimeGrid, x0: &[f64]) -> Result<TimeSeries> {
    let mut series = TimeSeries::new(sys.observables.iter().map(|o| o.name.clone()).collect());
    let mut prev = x0.to_vec();
    let final_state = euler_steps(&sys.m, &sys.k, |t| sys.rhs_backward(t, tg.dt), x0, tg, |_, t, x| {
        series.push(t, &observe(sys, x, &prev, t, tg.dt));
        prev.copy_from_slice(x);
        Ok(())
    })?;
    series.final_state = final_state;
    Ok(series)
}

/// Leapfrog for the lossless field system `[h; e]`:
/// `e⁺ = e + Δt M_ε⁻¹(Cᵀh − j)` at the half step, then `h⁺ = h − Δt M_ν C e⁺`.
/// `h_half` is the magnetic state at `t0 + Δt/2`. The series holds the energy
/// functional `½eᵀM_εe + ½h⁻ᵀM_ν⁻¹h⁺` (column `W`) with the magnetic states
/// half a step before and after. Steps beyond the CFL limit are not rejected.
pub fn leapfrog(sys: &DaeSystem, tg: &TimeGrid, e0: &[f64], h_half: &[f64]) -> Result<TimeSeries> {
    if sys.formulation != Formulation::FullwaveEh {
        return Err(Error::FormulationMisuse(format!("leapfrog needs the field system, got {}", sys.formulation)));
    }
    let hb = sys.block("h").expect("field system has an h block").clone();
    let eb = sys.block("e").expect("field system has an e block").clone();
    let c = sys.k_block("faraday", "e");
    let ct = c.transpose();
    let diag = sys.m.diagonal();
    let nu: Vec<f64> = diag[hb.range()].iter().map(|v| 1.0 / v).collect();
    let eps = diag[eb.range()].to_vec();
    let ampere = sys.row("ampere").expect("field system has an ampere row").clone();
    let current = |t: f64| -> Vec<f64> { sys.rhs(t)[ampere.range()].iter().map(|v| -v).collect() };
    let dt = tg.dt;
    let curl_update = |e: &[f64]| -> Vec<f64> { c.matvec(e).iter().zip(&nu).map(|(v, n)| dt * n * v).collect() };

    let mut e = e0.to_vec();
    let mut h = h_half.to_vec();
    let mut h_prev: Vec<f64> = h.iter().zip(curl_update(&e)).map(|(h, d)| h + d).collect();
    let energy = |e: &[f64], hm: &[f64], hp: &[f64]| -> f64 {
        let we: f64 = e.iter().zip(&eps).map(|(e, w)| w * e * e).sum();
        let wh: f64 = hm.iter().zip(hp).zip(&nu).map(|((a, b), n)| a * b / n).sum();
        0.5 * (we + wh)
    };
    let mut series = TimeSeries::new(vec!["W".into()]);
    series.push(tg.t0, &[energy(&e, &h_prev, &h)]);
    for n in 1..=tg.steps() {
        let j = current(tg.time(n - 1) + 0.5 * dt);
        let cth = ct.matvec(&h);
        for i in 0..e.len() {
            e[i] += dt / eps[i] * (cth[i] - j[i]);
        }
        let dh = curl_update(&e);
        let h_next: Vec<f64> = h.iter().zip(&dh).map(|(h, d)| h - d).collect();
        h_prev = std::mem::replace(&mut h, h_next);
        series.push(tg.time(n), &[energy(&e, &h_prev, &h)]);
    }
    series.final_state = [h, e].concat();
    Ok(series)
}

/// Largest stable leapfrog step estimate `1/(c_max·sqrt(Σ_axes Δ_min⁻²))` with the
/// fastest cell wave speed and the smallest spacing of each axis.
pub fn cfl_timestep(grid: &Grid, sub: &SubdomainMap) -> f64 {
    let c_max = (0..grid.n_points())
        .filter(|&c| !grid.phantom_cell[c])
        .map(|c| 1.0 / (sub.eps[c] * sub.mu[c]).sqrt())
        .fold(0.0, f64::max);
    let dims = grid.dims();
    let inv_sq: f64 = Axis::ALL
        .iter()
        .map(|&a| {
            let h = (0..dims[a.index()] - 1).map(|i| grid.spacing(a, i)).fold(f64::INFINITY, f64::min);
            1.0 / (h * h)
        })
        .sum();
    1.0 / (c_max * inv_sq.sqrt())
}

pub const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub predicate: String,
    /// Absolute residual `‖P x − offset‖`.
    pub residual: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub violations: Vec<Violation>,
}

/// Checks `x0` against every stored predicate of the system at relative tolerance 1e-10.
pub fn consistent_init(sys: &DaeSystem, x0: &[f64]) -> ConsistencyReport {
    let violations: Vec<Violation> = sys
        .predicates
        .iter()
        .filter_map(|p| {
            let (residual, scale) = p.residual(x0);
            let relative = if scale > 0.0 { residual / scale } else { residual };
            (relative > CONSISTENCY_TOL).then(|| Violation { predicate: p.name.clone(), residual, relative })
        })
        .collect();
    ConsistencyReport { consistent: violations.is_empty(), violations }
}
