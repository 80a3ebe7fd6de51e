//! Normalized coprime factorization margins, the central loop-shaping
//! controller, and the achieved four-block stability margin.
//!
//! Negative feedback is the convention everywhere: the controller acts on
//! e = r - y. The margin of a plant/controller pair is
//! b(P, K) = || [I; K] (I + P K)^-1 [I, P] ||_inf^-1
//! when the loop is internally stable, and 0 otherwise.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::care::{solve_care, CareProblem};
use super::hinf::{hinf_norm, HinfNorm};
use crate::error::{Error, Result};
use crate::lti::poly::complex_eigenvalues;
use crate::lti::{Polynomial, StateSpace, TransferFunction};

/// Strict threshold on closed-loop pole real parts; anything to the right
/// counts as unstable so marginal loops are never declared stable.
pub const STABILITY_THRESHOLD: f64 = -1e-9;

#[derive(Debug, Clone)]
pub struct NcfData {
    /// Control Riccati solution.
    pub x: DMatrix<f64>,
    /// Filter Riccati solution.
    pub z: DMatrix<f64>,
    /// Smallest achievable four-block norm, sqrt(1 + lambda_max(XZ)).
    pub gamma_min: f64,
    /// Optimal stability margin, 1/gamma_min.
    pub b_opt: f64,
}

/// Fixed-structure proper controller: numerator a_m .. a_0 over a monic
/// denominator s^n + b_{n-1} s^{n-1} + ... + b_0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedStructureController {
    pub num: Vec<f64>,
    pub den_tail: Vec<f64>,
}

impl FixedStructureController {
    pub fn new(num: Vec<f64>, den_tail: Vec<f64>) -> Result<Self> {
        if num.len() > den_tail.len() + 1 {
            return Err(Error::Improper {
                num_deg: num.len().saturating_sub(1),
                den_deg: den_tail.len(),
            });
        }
        if num.iter().chain(den_tail.iter()).any(|c| !c.is_finite()) {
            return Err(Error::Dimension("controller coefficients must be finite".into()));
        }
        Ok(Self { num, den_tail })
    }

    pub fn to_tf(&self) -> Result<TransferFunction> {
        let mut den = Vec::with_capacity(self.den_tail.len() + 1);
        den.push(1.0);
        den.extend_from_slice(&self.den_tail);
        TransferFunction::new(Polynomial::new(self.num.clone()), Polynomial::new(den))
    }
}

/// Square-root of a symmetric PSD matrix via its eigendecomposition.
/// Slightly negative eigenvalues from rounding are clamped to zero.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = 0.5 * (m + m.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = eig.eigenvalues[i].max(0.0).sqrt();
    }
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Largest eigenvalue of X Z computed through the symmetric form
/// Z^{1/2} X Z^{1/2}.
fn lambda_max_product(x: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    if n == 0 {
        return 0.0;
    }
    let zh = psd_sqrt(z);
    let m = 0.5 * (&zh * x * &zh + (&zh * x * &zh).transpose());
    let eig = nalgebra::SymmetricEigen::new(m);
    eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max)
}

/// Normalized-coprime-factor Riccati data and optimal margin of a plant.
pub fn ncf(shaped: &StateSpace) -> Result<NcfData> {
    let n = shaped.n_states();
    if n == 0 {
        return Ok(NcfData {
            x: DMatrix::zeros(0, 0),
            z: DMatrix::zeros(0, 0),
            gamma_min: 1.0,
            b_opt: 1.0,
        });
    }
    let m = shaped.n_inputs();
    let p = shaped.n_outputs();
    let s = DMatrix::<f64>::identity(m, m) + shaped.d.transpose() * &shaped.d;
    let r = DMatrix::<f64>::identity(p, p) + &shaped.d * shaped.d.transpose();
    let s_inv = s.clone().lu().try_inverse().expect("S = I + D'D is PD");
    let r_inv = r.clone().lu().try_inverse().expect("R = I + DD' is PD");
    let a_bar = &shaped.a - &shaped.b * &s_inv * shaped.d.transpose() * &shaped.c;

    let x = solve_care(&CareProblem::new(
        a_bar.clone(),
        shaped.b.clone(),
        shaped.c.transpose() * &r_inv * &shaped.c,
        s.clone(),
    )?)?;
    let z = solve_care(&CareProblem::new(
        a_bar.transpose(),
        shaped.c.transpose(),
        &shaped.b * &s_inv * shaped.b.transpose(),
        r.clone(),
    )?)?;

    let lam = lambda_max_product(&x, &z);
    let gamma_min = (1.0 + lam).sqrt();
    Ok(NcfData {
        x,
        z,
        gamma_min,
        b_opt: 1.0 / gamma_min,
    })
}

/// Central suboptimal controller for the shaped plant at a given gamma,
/// returned in the negative-feedback convention used across the crate.
pub fn central_controller(shaped: &StateSpace, gamma: f64) -> Result<StateSpace> {
    let data = ncf(shaped)?;
    central_controller_with(shaped, &data, gamma)
}

/// Same as [`central_controller`] but reuses precomputed Riccati data.
pub fn central_controller_with(
    shaped: &StateSpace,
    data: &NcfData,
    gamma: f64,
) -> Result<StateSpace> {
    if gamma <= data.gamma_min {
        return Err(Error::GammaTooSmall {
            gamma,
            gamma_min: data.gamma_min,
        });
    }
    let n = shaped.n_states();
    let m = shaped.n_inputs();
    if n == 0 {
        // Zero-state plant: the optimal controller is the plant gain itself.
        return StateSpace::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, shaped.n_outputs()),
            DMatrix::zeros(m, 0),
            shaped.d.transpose(),
        );
    }
    let g2 = gamma * gamma;
    let s = DMatrix::<f64>::identity(m, m) + shaped.d.transpose() * &shaped.d;
    let s_inv = s.lu().try_inverse().expect("S PD");
    let f = -(&s_inv * (shaped.d.transpose() * &shaped.c + shaped.b.transpose() * &data.x));
    let l = DMatrix::<f64>::identity(n, n) * (1.0 - g2) + &data.x * &data.z;
    let lt_inv = l
        .transpose()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Riccati("central controller L matrix is singular".into()))?;
    let bc = g2 * &lt_inv * &data.z * shaped.c.transpose();
    let ac = &shaped.a + &shaped.b * &f + &bc * (&shaped.c + &shaped.d * &f);
    let cc = shaped.b.transpose() * &data.x;
    let dc = -shaped.d.transpose();
    // Literature formula assumes positive feedback; negate the output map
    // for the negative-feedback convention.
    StateSpace::new(ac, bc, -cc, -dc)
}

/// Closed-loop state matrix of the negative-feedback interconnection of a
/// plant and controller, together with the full four-block realization
/// [S, SP; KS, KSP] (up to column signs, which do not affect norms).
fn four_block(plant: &StateSpace, k: &StateSpace) -> Result<StateSpace> {
    let (np, nk) = (plant.n_states(), k.n_states());
    let m = plant.n_inputs();
    let p = plant.n_outputs();
    if k.n_inputs() != p || k.n_outputs() != m {
        return Err(Error::Dimension(
            "controller dimensions do not match the plant".into(),
        ));
    }
    let dp = &plant.d;
    let dk = &k.d;
    let phi = (DMatrix::<f64>::identity(p, p) + dp * dk)
        .lu()
        .try_inverse()
        .ok_or(Error::IllPosed)?;
    let ip = DMatrix::<f64>::identity(p, p);

    // Signals: y = phi (Cp xp + Dp Ck xk + Dp Dk w1 + Dp w2), e = w1 - y,
    // u = Ck xk + Dk e; outputs z1 = e, z2 = u.
    let e_xp = -(&phi * &plant.c);
    let e_xk = -(&phi * dp * &k.c);
    let e_w1 = &ip - &phi * dp * dk;
    let e_w2 = -(&phi * dp);

    let u_xp = dk * &e_xp;
    let u_xk = &k.c + dk * &e_xk;
    let u_w1 = dk * &e_w1;
    let u_w2 = dk * &e_w2;

    let n = np + nk;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (np, np)).copy_from(&(&plant.a + &plant.b * &u_xp));
    a.view_mut((0, np), (np, nk)).copy_from(&(&plant.b * &u_xk));
    a.view_mut((np, 0), (nk, np)).copy_from(&(&k.b * &e_xp));
    a.view_mut((np, np), (nk, nk)).copy_from(&(&k.a + &k.b * &e_xk));

    let mut b = DMatrix::zeros(n, p + m);
    b.view_mut((0, 0), (np, p)).copy_from(&(&plant.b * &u_w1));
    b.view_mut((0, p), (np, m))
        .copy_from(&(&plant.b * (&u_w2 + DMatrix::<f64>::identity(m, m))));
    b.view_mut((np, 0), (nk, p)).copy_from(&(&k.b * &e_w1));
    b.view_mut((np, p), (nk, m)).copy_from(&(&k.b * &e_w2));

    let mut c = DMatrix::zeros(p + m, n);
    c.view_mut((0, 0), (p, np)).copy_from(&e_xp);
    c.view_mut((0, np), (p, nk)).copy_from(&e_xk);
    c.view_mut((p, 0), (m, np)).copy_from(&u_xp);
    c.view_mut((p, np), (m, nk)).copy_from(&u_xk);

    let mut d = DMatrix::zeros(p + m, p + m);
    d.view_mut((0, 0), (p, p)).copy_from(&e_w1);
    d.view_mut((0, p), (p, m)).copy_from(&e_w2);
    d.view_mut((p, 0), (m, p)).copy_from(&u_w1);
    d.view_mut((p, p), (m, m)).copy_from(&u_w2);

    StateSpace::new(a, b, c, d)
}

/// Internal stability of the negative-feedback loop: every eigenvalue of
/// the interconnection state matrix lies strictly left of the threshold.
pub fn is_internally_stable(plant: &StateSpace, k: &StateSpace) -> Result<bool> {
    let cl = match four_block(plant, k) {
        Ok(cl) => cl,
        Err(Error::IllPosed) => return Ok(false),
        Err(e) => return Err(e),
    };
    let eigs = complex_eigenvalues(&cl.a)?;
    Ok(eigs.iter().all(|e| e.re < STABILITY_THRESHOLD))
}

/// Achieved stability margin b(P, K); zero when the loop is not internally
/// stable (including ill-posed interconnections).
pub fn achieved_margin(plant: &StateSpace, k: &StateSpace) -> Result<f64> {
    let cl = match four_block(plant, k) {
        Ok(cl) => cl,
        Err(Error::IllPosed) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let eigs = complex_eigenvalues(&cl.a)?;
    if !eigs.iter().all(|e| e.re < STABILITY_THRESHOLD) {
        return Ok(0.0);
    }
    match hinf_norm(&cl)? {
        HinfNorm::Finite(n) if n > 0.0 => Ok(1.0 / n),
        HinfNorm::Finite(_) => Ok(1.0),
        HinfNorm::Infinite => Ok(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{tf_to_ss, TransferFunction};

    fn integrator() -> StateSpace {
        tf_to_ss(&TransferFunction::from_coeffs(vec![1.0], vec![1.0, 0.0]).unwrap()).unwrap()
    }

    #[test]
    fn integrator_ncf_closed_form() {
        let d = ncf(&integrator()).unwrap();
        assert!((d.x[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((d.z[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((d.gamma_min - 2f64.sqrt()).abs() < 1e-10);
        assert!((d.b_opt - 1.0 / 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn static_plant_has_unit_margin() {
        let sys = StateSpace::from_static_gain(1, 1, &[3.0]).unwrap();
        let d = ncf(&sys).unwrap();
        assert_eq!(d.b_opt, 1.0);
        assert_eq!(d.gamma_min, 1.0);
        // The zero-state central controller achieves margin exactly 1.
        let k = central_controller(&sys, 1.5).unwrap();
        assert!((k.d[(0, 0)] - 3.0).abs() < 1e-14);
        let b = achieved_margin(&sys, &k).unwrap();
        assert!((b - 1.0).abs() < 1e-6, "margin {b}");
    }

    #[test]
    fn stable_lag_beats_integrator_margin() {
        let lag =
            tf_to_ss(&TransferFunction::from_coeffs(vec![1.0], vec![1.0, 1.0]).unwrap()).unwrap();
        let d_lag = ncf(&lag).unwrap();
        let d_int = ncf(&integrator()).unwrap();
        assert!(d_lag.b_opt > d_int.b_opt);
        assert!(d_lag.b_opt > 0.70711 && d_lag.b_opt <= 1.0);
    }

    #[test]
    fn central_controller_margin_bracket() {
        let plant = integrator();
        let gamma = 1.05 * 2f64.sqrt();
        let k = central_controller(&plant, gamma).unwrap();
        let b = achieved_margin(&plant, &k).unwrap();
        assert!(b >= 1.0 / gamma - 1e-6, "margin {b} below 1/gamma");
        assert!(b <= 1.0 / 2f64.sqrt() + 1e-6, "margin {b} above b_opt");
    }

    #[test]
    fn gamma_below_minimum_rejected() {
        let plant = integrator();
        assert!(matches!(
            central_controller(&plant, 1.0),
            Err(Error::GammaTooSmall { .. })
        ));
    }

    #[test]
    fn zero_plant_zero_controller() {
        let p = StateSpace::from_static_gain(1, 1, &[0.0]).unwrap();
        let k = StateSpace::from_static_gain(1, 1, &[0.0]).unwrap();
        let b = achieved_margin(&p, &k).unwrap();
        assert!((b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unstable_loop_margin_is_zero() {
        // P = 1/(s-1) with K = 0 is not stabilized.
        let p = tf_to_ss(&TransferFunction::from_coeffs(vec![1.0], vec![1.0, -1.0]).unwrap())
            .unwrap();
        let k = StateSpace::from_static_gain(1, 1, &[0.0]).unwrap();
        assert_eq!(achieved_margin(&p, &k).unwrap(), 0.0);
    }

    #[test]
    fn fixed_structure_to_tf() {
        let k = FixedStructureController::new(vec![10.0], vec![11.0]).unwrap();
        let tf = k.to_tf().unwrap();
        assert_eq!(tf.den().coeffs(), &[1.0, 11.0]);
        assert_eq!(tf.num().coeffs(), &[10.0]);
        assert!(FixedStructureController::new(vec![1.0, 2.0, 3.0], vec![1.0]).is_err());
    }
}
