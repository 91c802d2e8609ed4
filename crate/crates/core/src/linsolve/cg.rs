//! Jacobi-preconditioned conjugate gradients for symmetric positive (semi)definite systems.

use super::sparse::{dot, norm2, SparseMatrix};
use crate::error::{Error, Result};

/// Solves `A x = b` to relative residual `tol`. For a semidefinite `A` the right-hand
/// side must lie in the range of `A`.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cg requires a square matrix");
    assert_eq!(b.len(), n, "rhs dimension mismatch");
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let d = a.diagonal();
    let inv_d: Vec<f64> = d.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NoConvergence { iterations: it, residual: norm2(&r) / bnorm });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        z = r.iter().zip(&inv_d).map(|(r, d)| r * d).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: norm2(&r) / bnorm })
}
