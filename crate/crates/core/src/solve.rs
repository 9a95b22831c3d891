//! Small dense Newton solver with a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Absolute tolerance on the Euclidean norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step, scaled per component by `1 + |x_i|`.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 50,
            fd_step: 1e-7,
        }
    }
}

pub(crate) fn fd_jacobian<F>(f: &F, x: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.clone();
    for i in 0..n {
        let d = step * (1.0 + x[i].abs());
        xp[i] = x[i] + d;
        let fp = f(&xp);
        xp[i] = x[i] - d;
        let fm = f(&xp);
        xp[i] = x[i];
        cols.push((fp - fm) / (2.0 * d));
    }
    DMatrix::from_columns(&cols)
}

/// Solves `f(x) = 0` from `x0`. Returns the root and the number of Newton
/// corrections taken. Once the tolerance is met one extra correction is
/// attempted and kept only if it lowers the residual further.
pub(crate) fn newton<F>(
    solver: &'static str,
    f: F,
    x0: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<(DVector<f64>, usize)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0;
    let mut r = f(&x);
    let mut rn = r.norm();
    if rn == 0.0 {
        return Ok((x, 0));
    }
    let mut polishing = false;
    for it in 0..opts.max_iter {
        if rn <= opts.tol {
            if polishing {
                return Ok((x, it));
            }
            polishing = true;
        }
        let jac = fd_jacobian(&f, &x, opts.fd_step);
        let Some(dx) = jac.clone().lu().solve(&(-&r)) else {
            if polishing {
                return Ok((x, it));
            }
            // Rank-deficient directions carry no residual at the current
            // point; fall back to a least-squares correction.
            let pinv = jac
                .pseudo_inverse(1e-12)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            let dx = pinv * (-&r);
            let xc = &x + dx;
            let rc = f(&xc);
            if rc.norm() >= rn {
                break;
            }
            x = xc;
            r = rc;
            rn = r.norm();
            continue;
        };
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-10 {
            let xc = &x + &dx * step;
            let rc = f(&xc);
            let rcn = rc.norm();
            if rcn < rn || (rcn == 0.0 && rn == 0.0) {
                x = xc;
                r = rc;
                rn = rcn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if polishing {
                return Ok((x, it));
            }
            break;
        }
    }
    if rn <= opts.tol {
        return Ok((x, opts.max_iter));
    }
    Err(Error::NoConvergence {
        solver,
        iterations: opts.max_iter,
        residual: rn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonlinear_system() {
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[0] * x[0] - 2.0, x[1] - x[0]]);
        let (x, _) = newton("test", f, DVector::from_vec(vec![1.0, 0.0]), &NewtonOptions::default()).unwrap();
        assert!((x[0] - 2f64.sqrt()).abs() < 1e-14);
        assert!((x[1] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn exact_guess_takes_no_correction() {
        let f = |x: &DVector<f64>| x.map(|v| v - 3.0);
        let (x, it) = newton("test", f, DVector::from_element(2, 3.0), &NewtonOptions::default()).unwrap();
        assert_eq!(it, 0);
        assert_eq!(x, DVector::from_element(2, 3.0));
    }

    #[test]
    fn reports_failure() {
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[0] * x[0] + 1.0]);
        let err = newton("test", f, DVector::from_vec(vec![0.5]), &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }
}
