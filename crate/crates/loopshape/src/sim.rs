//! Closed-loop time-domain simulation with exact zero-order-hold
//! discretization, plus step-response performance metrics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{expm, StateSpace};

/// Uniformly sampled signal starting at t = 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| i as f64 * self.dt)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Step-response metrics. `max_rate` is the largest absolute first-difference
/// slope of whatever series it was computed on; the reporting pipeline fills
/// it from the control channel.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepMetrics {
    pub overshoot_time: f64,
    pub overshoot: f64,
    pub steady_state_error: f64,
    pub max_rate: f64,
}

/// Unit-step response of every output channel via exact ZOH discretization
/// of (A, B, C, D) at step `dt`.
pub fn step_response(sys: &StateSpace, t_final: f64, dt: f64) -> Result<Vec<TimeSeries>> {
    if !(dt > 0.0) || !(t_final > 0.0) {
        return Err(Error::Config("step response needs dt > 0 and t_final > 0".into()));
    }
    if sys.n_inputs() != 1 {
        return Err(Error::NotSiso {
            inputs: sys.n_inputs(),
            outputs: sys.n_outputs(),
        });
    }
    let n = sys.n_states();
    let steps = (t_final / dt).round() as usize;
    let p = sys.n_outputs();

    // Discretize [[A, B], [0, 0]]: the exponential's top blocks are Ad, Bd.
    let (ad, bd) = if n == 0 {
        (DMatrix::zeros(0, 0), DMatrix::zeros(0, 1))
    } else {
        let mut block = DMatrix::zeros(n + 1, n + 1);
        block.view_mut((0, 0), (n, n)).copy_from(&sys.a);
        block.view_mut((0, n), (n, 1)).copy_from(&sys.b);
        let e = expm(&(block * dt))?;
        (
            e.view((0, 0), (n, n)).into_owned(),
            e.view((0, n), (n, 1)).into_owned(),
        )
    };

    let mut outputs = vec![Vec::with_capacity(steps + 1); p];
    let mut x = DMatrix::<f64>::zeros(n, 1);
    for _ in 0..=steps {
        let y = &sys.c * &x + &sys.d;
        for (ch, out) in outputs.iter_mut().enumerate() {
            out.push(y[(ch, 0)]);
        }
        x = &ad * x + &bd;
    }
    Ok(outputs
        .into_iter()
        .map(|values| TimeSeries { dt, values })
        .collect())
}

/// Largest absolute first-difference rate of the series.
pub fn max_rate(ts: &TimeSeries) -> f64 {
    ts.values
        .windows(2)
        .map(|w| ((w[1] - w[0]) / ts.dt).abs())
        .fold(0.0, f64::max)
}

/// Step metrics against a nonzero reference. The steady-state value is the
/// mean of the final 10% of samples; the series must already be settled
/// (every sample in that window within 2% of the window mean).
pub fn compute_metrics(ts: &TimeSeries, reference: f64) -> Result<StepMetrics> {
    if reference == 0.0 {
        return Err(Error::Config("metrics need a nonzero reference".into()));
    }
    if ts.len() < 20 {
        return Err(Error::Unsettled("series too short for metrics".into()));
    }
    let tail_start = ts.len() - ts.len() / 10;
    let tail = &ts.values[tail_start..];
    let y_final = tail.iter().sum::<f64>() / tail.len() as f64;
    let band = 0.02 * y_final.abs();
    if tail.iter().any(|&y| (y - y_final).abs() > band) {
        return Err(Error::Unsettled(format!(
            "final 10% window strays outside the 2% band around its mean {y_final:.6}"
        )));
    }

    let mut peak = f64::NEG_INFINITY;
    let mut peak_idx = 0;
    for (i, &y) in ts.values.iter().enumerate() {
        if y > peak {
            peak = y;
            peak_idx = i;
        }
    }
    let overshoot = ((peak - y_final) / reference.abs()).max(0.0);
    Ok(StepMetrics {
        overshoot,
        overshoot_time: peak_idx as f64 * ts.dt,
        steady_state_error: (reference - y_final).abs() / reference.abs(),
        max_rate: max_rate(ts),
    })
}

/// Negative-feedback closed loop driven by the reference: one input r, two
/// outputs [y, u]. The control-rate channel is obtained by differencing the
/// u series, since a step reference makes du/dt improper.
pub fn closed_loop(plant: &StateSpace, controller: &StateSpace) -> Result<StateSpace> {
    let (np, nk) = (plant.n_states(), controller.n_states());
    let m = plant.n_inputs();
    let p = plant.n_outputs();
    if controller.n_inputs() != p || controller.n_outputs() != m {
        return Err(Error::Dimension(
            "controller dimensions do not match the plant".into(),
        ));
    }
    let dp = &plant.d;
    let dk = &controller.d;
    let phi = (DMatrix::<f64>::identity(p, p) + dp * dk)
        .lu()
        .try_inverse()
        .ok_or(Error::IllPosed)?;
    let ip = DMatrix::<f64>::identity(p, p);

    // y = phi (Cp xp + Dp Ck xk + Dp Dk r); e = r - y; u = Ck xk + Dk e.
    let y_xp = &phi * &plant.c;
    let y_xk = &phi * dp * &controller.c;
    let y_r = &phi * dp * dk;
    let e_xp = -&y_xp;
    let e_xk = -&y_xk;
    let e_r = &ip - &y_r;
    let u_xp = dk * &e_xp;
    let u_xk = &controller.c + dk * &e_xk;
    let u_r = dk * &e_r;

    let n = np + nk;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (np, np))
        .copy_from(&(&plant.a + &plant.b * &u_xp));
    a.view_mut((0, np), (np, nk)).copy_from(&(&plant.b * &u_xk));
    a.view_mut((np, 0), (nk, np))
        .copy_from(&(&controller.b * &e_xp));
    a.view_mut((np, np), (nk, nk))
        .copy_from(&(&controller.a + &controller.b * &e_xk));

    let mut b = DMatrix::zeros(n, p);
    b.view_mut((0, 0), (np, p)).copy_from(&(&plant.b * &u_r));
    b.view_mut((np, 0), (nk, p)).copy_from(&(&controller.b * &e_r));

    let mut c = DMatrix::zeros(p + m, n);
    c.view_mut((0, 0), (p, np)).copy_from(&y_xp);
    c.view_mut((0, np), (p, nk)).copy_from(&y_xk);
    c.view_mut((p, 0), (m, np)).copy_from(&u_xp);
    c.view_mut((p, np), (m, nk)).copy_from(&u_xk);

    let mut d = DMatrix::zeros(p + m, p);
    d.view_mut((0, 0), (p, p)).copy_from(&y_r);
    d.view_mut((p, 0), (m, p)).copy_from(&u_r);

    StateSpace::new(a, b, c, d)
}
