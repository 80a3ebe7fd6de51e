//! Continuous algebraic Riccati equation solver.
//!
//! Solves A'X + XA - XBR^-1B'X + Q = 0 for the stabilizing X by extracting
//! the stable invariant subspace of the Hamiltonian with the matrix sign
//! function (Newton iteration with determinant scaling), then polishing with
//! two Newton-Kleinman steps so the residual sits at machine precision.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::poly::{balance_in_place, complex_eigenvalues};

#[derive(Debug, Clone)]
pub struct CareProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl CareProblem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if a.ncols() != n {
            return Err(Error::Dimension("A must be square".into()));
        }
        if b.nrows() != n {
            return Err(Error::Dimension("B row count must match A".into()));
        }
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Dimension("Q must be n x n".into()));
        }
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::Dimension("R must be m x m".into()));
        }
        let sym_tol = 1e-12;
        let q_scale = q.iter().map(|x| x.abs()).fold(1.0f64, f64::max);
        let r_scale = r.iter().map(|x| x.abs()).fold(1.0f64, f64::max);
        if (&q - q.transpose()).iter().any(|x| x.abs() > sym_tol * q_scale) {
            return Err(Error::Dimension("Q must be symmetric".into()));
        }
        if (&r - r.transpose()).iter().any(|x| x.abs() > sym_tol * r_scale) {
            return Err(Error::Dimension("R must be symmetric".into()));
        }
        if r.clone().lu().try_inverse().is_none() {
            return Err(Error::Riccati("R is singular".into()));
        }
        Ok(Self { a, b, q, r })
    }
}

/// Frobenius norm.
fn fro(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residual of the CARE at a candidate solution.
pub fn care_residual(p: &CareProblem, x: &DMatrix<f64>) -> f64 {
    let r_inv = p.r.clone().lu().try_inverse().expect("R invertible");
    let s = &p.b * r_inv * p.b.transpose();
    let res = p.a.transpose() * x + x * &p.a - x * s * x + &p.q;
    fro(&res)
}

/// Scale used by the residual acceptance bound.
pub fn care_residual_scale(p: &CareProblem, x: &DMatrix<f64>) -> f64 {
    (fro(x) * fro(&p.a)).max(1.0)
}

fn hamiltonian(p: &CareProblem) -> Result<DMatrix<f64>> {
    let n = p.a.nrows();
    let r_inv = p
        .r
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Riccati("R is singular".into()))?;
    let s = &p.b * r_inv * p.b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&p.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&p.q));
    h.view_mut((n, n), (n, n)).copy_from(&(-p.a.transpose()));
    Ok(h)
}

/// Matrix sign function by Newton iteration with determinant scaling.
fn matrix_sign(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n2 = h.nrows();
    let mut z = h.clone();
    for _ in 0..120 {
        let lu = z.clone().lu();
        // Scale from log |det| to avoid overflow on wide eigenvalue spreads.
        let mut log_det = 0.0f64;
        for i in 0..n2 {
            let u = lu.u()[(i, i)].abs();
            if u == 0.0 {
                return Err(Error::Riccati("singular iterate in sign iteration".into()));
            }
            log_det += u.ln();
        }
        let c = (-log_det / n2 as f64).exp();
        let z_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Riccati("singular iterate in sign iteration".into()))?;
        let z_new = 0.5 * (c * &z + z_inv / c);
        let delta = fro(&(&z_new - &z)) / fro(&z_new).max(1e-300);
        z = z_new;
        if delta < 1e-14 {
            return Ok(z);
        }
    }
    Err(Error::Riccati("sign iteration did not converge".into()))
}

/// Lyapunov solve A'P + PA + W = 0 by Kronecker vectorization; fine for the
/// small state dimensions used here.
pub fn solve_lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let k = ident.kronecker(&at) + at.kronecker(&ident);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-w).as_slice());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Riccati("Lyapunov operator is singular".into()))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(0.5 * (&p + p.transpose()))
}

/// Stabilizing solution of the CARE.
pub fn solve_care(p: &CareProblem) -> Result<DMatrix<f64>> {
    let n = p.a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let h = hamiltonian(p)?;

    // The sign method needs the Hamiltonian spectrum off the imaginary axis;
    // an axis eigenvalue also means no stabilizing solution exists.
    let mut h_bal = h.clone();
    balance_in_place(&mut h_bal);
    let eigs = complex_eigenvalues(&h_bal)?;
    if let Some(bad) = eigs.iter().find(|e| e.re.abs() <= 1e-9 * (1.0 + e.norm())) {
        return Err(Error::Riccati(format!(
            "Hamiltonian has an imaginary-axis eigenvalue near {bad}; \
             the pair (A, B) is not stabilizable or the problem is singular"
        )));
    }

    let w = matrix_sign(&h)?;
    // Stable subspace satisfies (W + I) [u; Xu] = 0.
    let ident = DMatrix::<f64>::identity(n, n);
    let w11 = w.view((0, 0), (n, n)).into_owned();
    let w12 = w.view((0, n), (n, n)).into_owned();
    let w21 = w.view((n, 0), (n, n)).into_owned();
    let w22 = w.view((n, n), (n, n)).into_owned();
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(&w22 + &ident));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(&w11 + &ident)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-&w21));
    let svd = lhs.svd(true, true);
    let x0 = svd
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::Riccati(format!("subspace solve failed: {e}")))?;
    let mut x = 0.5 * (&x0 + x0.transpose());

    // Newton-Kleinman polish.
    let r_inv = p.r.clone().lu().try_inverse().expect("validated");
    let s = &p.b * r_inv * p.b.transpose();
    for _ in 0..3 {
        let a_cl = &p.a - &s * &x;
        let w_term = &p.q + &x * &s * &x;
        match solve_lyapunov(&a_cl, &w_term) {
            Ok(next) => {
                let delta = fro(&(&next - &x)) / fro(&next).max(1.0);
                x = next;
                if delta < 1e-15 {
                    break;
                }
            }
            Err(_) => break, // keep the sign-method solution
        }
    }

    // Contract checks: stabilizing and small residual.
    let a_cl = &p.a - &s * &x;
    let cl_eigs = complex_eigenvalues(&a_cl)?;
    if cl_eigs.iter().any(|e| e.re >= 0.0) {
        return Err(Error::Riccati(
            "computed solution is not stabilizing; (A, B) may not be stabilizable".into(),
        ));
    }
    let res = care_residual(p, &x);
    if res > 1e-8 * care_residual_scale(p, &x) {
        return Err(Error::Riccati(format!(
            "residual {res:.3e} exceeds tolerance"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_care_stable_plant() {
        // A=-1, B=Q=R=1: x^2 + 2x - 1 = 0, stabilizing root sqrt(2)-1.
        let p = CareProblem::new(m1(-1.0), m1(1.0), m1(1.0), m1(1.0)).unwrap();
        let x = solve_care(&p).unwrap();
        assert!((x[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn scalar_care_integrator() {
        // A=0: -x^2 + 1 = 0, stabilizing root +1.
        let p = CareProblem::new(m1(0.0), m1(1.0), m1(1.0), m1(1.0)).unwrap();
        let x = solve_care(&p).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_q_hurwitz_gives_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let p = CareProblem::new(a, b, DMatrix::zeros(2, 2), m1(1.0)).unwrap();
        let x = solve_care(&p).unwrap();
        assert!(fro(&x) < 1e-10);
    }

    #[test]
    fn axis_eigenvalue_is_reported() {
        // A=0, B=0 (not stabilizable), Q=1: Hamiltonian eigenvalues are 0.
        let p = CareProblem {
            a: m1(0.0),
            b: m1(0.0),
            q: m1(1.0),
            r: m1(1.0),
        };
        let err = solve_care(&p).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("imaginary-axis"), "got: {msg}");
    }

    #[test]
    fn asymmetric_q_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(CareProblem::new(a, b, q, m1(1.0)).is_err());
    }

    #[test]
    fn lyapunov_scalar() {
        // -2p + w = 0 with a = -1, w = 4 -> p = 2... A'P+PA+W=0: -2p+4=0.
        let p = solve_lyapunov(&m1(-1.0), &m1(4.0)).unwrap();
        assert!((p[(0, 0)] - 2.0).abs() < 1e-12);
    }
}
