//! Design report assembly, envelope certification, and file emission.
//!
//! The certificate compares the achieved margin of the shaped nominal loop
//! against the worst nu-gap between the shaped nominal and every other
//! shaped envelope plant; margin > worst gap guarantees envelope-wide
//! stability, which is cross-checked by closed-loop pole tests per point.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::log_grid;
use crate::lti::{series, ss_to_tf, tf_to_ss, StateSpace, TransferFunction};
use crate::par::par_map;
use crate::pso::{DesignHistoryRecord, SwarmDesign};
use crate::shaping::{
    check_bounds, check_rolloff, fit_minimum_phase, geomean_fit_target, shape, BoundsReport,
    FrequencyBounds, ShapedPlant,
};
use crate::sim::{compute_metrics, max_rate, step_response, StepMetrics};
use crate::synthesis::{achieved_margin, central_controller_with, is_internally_stable, ncf};
use crate::vgap::{default_grid, vgap_metric};

pub const SCHEMA_VERSION: u32 = 1;

/// Serializable transfer function (highest-first coefficients over a monic
/// denominator).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TfJson {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl TfJson {
    pub fn from_tf(tf: &TransferFunction) -> Self {
        Self {
            num: tf.num().coeffs().to_vec(),
            den: tf.den().coeffs().to_vec(),
        }
    }

    pub fn to_tf(&self) -> Result<TransferFunction> {
        TransferFunction::from_coeffs(self.num.clone(), self.den.clone())
    }
}

/// Margin record for one plant/controller pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginRecord {
    pub plant_id: String,
    pub b_opt: f64,
    pub b_achieved: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRecord {
    pub id: String,
    /// Gap between this shaped plant and the shaped nominal.
    pub vgap_from_nominal: f64,
    pub winding_ok: bool,
    /// Closed-loop pole check of this plant against the designed loop.
    pub stable: bool,
    /// Achieved margin of this plant in the designed loop.
    pub b_achieved: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSummary {
    pub pass: bool,
    pub pass_fraction: f64,
    pub worst_violation_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloffSummary {
    pub omega_rad_s: f64,
    pub reduction_db: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub mode: String,
    pub nominal_id: String,
    pub nominal_index: usize,
    /// Min-max radius of the raw-plant gap matrix used for selection.
    pub r_star_selection: f64,
    /// Certificate radius: worst shaped-plant gap from the nominal.
    pub r_star: f64,
    pub b_opt: f64,
    pub b_achieved: f64,
    pub gamma: f64,
    pub envelope_certified: bool,
    pub no_stabilizing_candidate: bool,
    pub bound_compliance: BoundSummary,
    pub rolloff: Option<RolloffSummary>,
    pub fit_rms_db_error: Option<f64>,
    pub w1: TfJson,
    pub w2: TfJson,
    /// Controller acting on the shaped plant.
    pub controller: TfJson,
    /// Controller acting on the raw plant: W1 * K * W2.
    pub total_controller: TfJson,
    pub per_point: Vec<PointRecord>,
}

/// Everything produced by one design pass, still in richly-typed form.
#[derive(Debug, Clone)]
pub struct DesignArtifacts {
    pub shaped: ShapedPlant,
    pub controller: TransferFunction,
    pub total_controller: TransferFunction,
    pub b_opt: f64,
    pub b_achieved: f64,
    pub gamma: f64,
    pub bounds_report: BoundsReport,
    pub rolloff_pass: Option<bool>,
    pub fit_rms_db_error: Option<f64>,
    pub no_stabilizing_candidate: bool,
    pub history: Vec<DesignHistoryRecord>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Fit100Options {
    pub order: usize,
    pub points: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub gamma_factor: f64,
}

impl Default for Fit100Options {
    fn default() -> Self {
        Self {
            order: 2,
            points: 100,
            grid_lo: 1e-2,
            grid_hi: 1e4,
            gamma_factor: 1.05,
        }
    }
}

/// Fixed-weight workflow: W1 = 1, W2 fitted to center the shaped loop
/// between the bounds, controller from the coprime-factor central formula
/// at gamma = gamma_factor * gamma_min.
pub fn design_fit100(
    plant: &TransferFunction,
    bounds: &FrequencyBounds,
    rolloff: Option<(f64, f64)>,
    opts: &Fit100Options,
) -> Result<DesignArtifacts> {
    let grid = log_grid(opts.grid_lo, opts.grid_hi, opts.points);
    let target = geomean_fit_target(plant, bounds, &grid);
    let fit = fit_minimum_phase(&target, opts.order)?;
    let w1 = TransferFunction::constant(1.0);
    let shaped = shape(plant, &w1, &fit.tf)?;
    let shaped_ss = tf_to_ss(&shaped.shaped)?;
    let ncf_data = ncf(&shaped_ss)?;
    let gamma = opts.gamma_factor * ncf_data.gamma_min;
    let k_ss = central_controller_with(&shaped_ss, &ncf_data, gamma)?;
    let b_achieved = achieved_margin(&shaped_ss, &k_ss)?;
    let controller = ss_to_tf(&k_ss)?;
    let total_controller = series(&shaped.w2, &series(&controller, &shaped.w1)?)?;
    let bounds_report = check_bounds(&shaped.shaped, bounds);
    let rolloff_pass =
        rolloff.map(|(omega, db)| check_rolloff(&shaped.shaped, plant, omega, db));
    Ok(DesignArtifacts {
        shaped,
        controller,
        total_controller,
        b_opt: ncf_data.b_opt,
        b_achieved,
        gamma,
        bounds_report,
        rolloff_pass,
        fit_rms_db_error: Some(fit.rms_db_error),
        no_stabilizing_candidate: b_achieved <= 0.0,
        history: Vec::new(),
    })
}

/// Swarm workflow wrapper: converts the swarm winner into the same artifact
/// shape as the fixed-weight path.
pub fn artifacts_from_swarm(
    plant: &TransferFunction,
    bounds: &FrequencyBounds,
    rolloff: Option<(f64, f64)>,
    swarm: &SwarmDesign,
) -> Result<DesignArtifacts> {
    let (w1, w2) = crate::shaping::make_weights(&swarm.weights)?;
    let shaped = shape(plant, &w1, &w2)?;
    let controller = swarm.controller.to_tf()?;
    let total_controller = series(&w2, &series(&controller, &w1)?)?;
    let shaped_ss = tf_to_ss(&shaped.shaped)?;
    let b_opt = ncf(&shaped_ss).map(|d| d.b_opt).unwrap_or(f64::NAN);
    let bounds_report = check_bounds(&shaped.shaped, bounds);
    let rolloff_pass =
        rolloff.map(|(omega, db)| check_rolloff(&shaped.shaped, plant, omega, db));
    Ok(DesignArtifacts {
        shaped,
        controller,
        total_controller,
        b_opt,
        b_achieved: swarm.margin,
        gamma: if swarm.margin > 0.0 {
            1.0 / swarm.margin
        } else {
            f64::INFINITY
        },
        bounds_report,
        rolloff_pass,
        fit_rms_db_error: None,
        no_stabilizing_candidate: swarm.no_stabilizing_candidate,
        history: swarm.history.clone(),
    })
}

/// Per-point certification data for an envelope under a designed loop.
#[derive(Debug, Clone)]
pub struct Certification {
    pub r_star: f64,
    pub per_point: Vec<PointRecord>,
    pub certified: bool,
    /// True when the certificate claims stability but a pole check fails;
    /// this indicates a bug and is surfaced loudly by verification.
    pub disagreement: bool,
}

/// Checks every envelope plant against the designed weights/controller:
/// shaped-plant gap from the nominal, closed-loop pole test, and achieved
/// margin. The envelope is certified when the nominal's achieved margin
/// exceeds the worst gap.
pub fn certify_envelope(
    plants: &[(String, TransferFunction)],
    nominal_index: usize,
    artifacts: &DesignArtifacts,
) -> Result<Certification> {
    if nominal_index >= plants.len() {
        return Err(Error::Config("nominal index out of range".into()));
    }
    let w1 = &artifacts.shaped.w1;
    let w2 = &artifacts.shaped.w2;
    let shaped_nominal = &artifacts.shaped.shaped;
    let k_ss = tf_to_ss(&artifacts.controller)?;
    let grid = default_grid();

    let shaped_all: Vec<(String, TransferFunction)> = plants
        .iter()
        .map(|(id, p)| Ok((id.clone(), shape(p, w1, w2)?.shaped)))
        .collect::<Result<_>>()?;

    let records: Vec<Result<PointRecord>> = par_map(&shaped_all, |(id, shaped_i)| {
        let gap = if *id == plants[nominal_index].0 {
            crate::vgap::VgapResult {
                value: 0.0,
                winding_ok: true,
                argmax_omega: None,
            }
        } else {
            vgap_metric(shaped_nominal, shaped_i, &grid)?
        };
        let sys_i = tf_to_ss(shaped_i)?;
        let stable = is_internally_stable(&sys_i, &k_ss)?;
        let b_i = achieved_margin(&sys_i, &k_ss)?;
        Ok(PointRecord {
            id: id.clone(),
            vgap_from_nominal: gap.value,
            winding_ok: gap.winding_ok,
            stable,
            b_achieved: b_i,
        })
    });
    let per_point: Vec<PointRecord> = records.into_iter().collect::<Result<_>>()?;

    let r_star = per_point
        .iter()
        .map(|p| p.vgap_from_nominal)
        .fold(0.0, f64::max);
    let cert_ok = artifacts.b_achieved > r_star;
    let pole_ok = per_point.iter().all(|p| p.stable);
    Ok(Certification {
        r_star,
        certified: cert_ok && pole_ok,
        disagreement: cert_ok && !pole_ok,
        per_point,
    })
}

/// Verification verdict for a finished design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub pass: bool,
    /// Margin-versus-gap certificate.
    pub cert_ok: bool,
    /// Exhaustive per-point pole checks.
    pub pole_ok: bool,
    /// Certificate and pole checks disagree (margin certificate claims
    /// stability that the pole check refutes) - indicates a bug.
    pub disagreement: bool,
    pub r_star: f64,
    pub b_achieved: f64,
    pub per_point: Vec<PointRecord>,
}

/// Re-derives the certificate from the report's weights and controller and
/// cross-checks it with per-point pole tests.
pub fn verify_report(
    report: &DesignReport,
    plants: &[(String, TransferFunction)],
) -> Result<VerifyOutcome> {
    let w1 = report.w1.to_tf()?;
    let w2 = report.w2.to_tf()?;
    let controller = report.controller.to_tf()?;
    let nominal = plants
        .get(report.nominal_index)
        .ok_or_else(|| Error::Config("report nominal index out of range".into()))?;
    let shaped = shape(&nominal.1, &w1, &w2)?;
    let artifacts = DesignArtifacts {
        shaped,
        controller,
        total_controller: report.total_controller.to_tf()?,
        b_opt: report.b_opt,
        b_achieved: report.b_achieved,
        gamma: report.gamma,
        bounds_report: BoundsReport {
            rows: Vec::new(),
            pass: report.bound_compliance.pass,
            pass_fraction: report.bound_compliance.pass_fraction,
            worst_violation_db: report.bound_compliance.worst_violation_db,
        },
        rolloff_pass: report.rolloff.as_ref().map(|r| r.pass),
        fit_rms_db_error: report.fit_rms_db_error,
        no_stabilizing_candidate: report.no_stabilizing_candidate,
        history: Vec::new(),
    };
    let cert = certify_envelope(plants, report.nominal_index, &artifacts)?;
    let pole_ok = cert.per_point.iter().all(|p| p.stable);
    let cert_ok = report.b_achieved > cert.r_star;
    Ok(VerifyOutcome {
        pass: cert_ok && pole_ok,
        cert_ok,
        pole_ok,
        disagreement: cert_ok && !pole_ok,
        r_star: cert.r_star,
        b_achieved: report.b_achieved,
        per_point: cert.per_point,
    })
}

/// Step simulation of one plant under the total controller: returns the
/// output/control series and metrics (max_rate taken from the control
/// channel).
pub fn simulate_point(
    plant: &TransferFunction,
    total_controller: &TransferFunction,
    t_final: f64,
    dt: f64,
) -> Result<(crate::sim::TimeSeries, crate::sim::TimeSeries, StepMetrics)> {
    let cl = crate::sim::closed_loop(&tf_to_ss(plant)?, &tf_to_ss(total_controller)?)?;
    let mut series = step_response(&cl, t_final, dt)?;
    let u = series.pop().expect("two output channels");
    let y = series.pop().expect("two output channels");
    let mut metrics = compute_metrics(&y, 1.0)?;
    metrics.max_rate = max_rate(&u);
    Ok((y, u, metrics))
}

/// Extends the horizon until the slowest closed-loop mode has settled.
pub fn settling_horizon(cl: &StateSpace, fallback: f64) -> Result<f64> {
    let eigs = cl.eigenvalues()?;
    let slowest = eigs
        .iter()
        .map(|e| e.re.abs())
        .filter(|&r| r > 1e-12)
        .fold(f64::INFINITY, f64::min);
    if slowest.is_finite() {
        Ok((12.0 / slowest).max(fallback))
    } else {
        Ok(fallback)
    }
}

// ---------------------------------------------------------------------------
// File emission
// ---------------------------------------------------------------------------

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Frequency-response CSV: omega_rad_s, re, im, mag_db, phase_deg.
pub fn write_freq_response_csv(
    path: &Path,
    tf: &TransferFunction,
    omegas: &[f64],
) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "omega_rad_s,re,im,mag_db,phase_deg")?;
    for s in tf.freq_response(omegas) {
        writeln!(
            f,
            "{},{},{},{},{}",
            s.omega,
            s.re,
            s.im,
            s.mag_db(),
            s.phase_deg()
        )?;
    }
    Ok(())
}

/// Gap-matrix CSV with operating-point ids as row/column labels.
pub fn write_vgap_csv(path: &Path, ids: &[String], m: &crate::vgap::VgapMatrix) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "id,{}", ids.join(","))?;
    for (i, id) in ids.iter().enumerate() {
        let row: Vec<String> = (0..ids.len()).map(|j| m.value(i, j).to_string()).collect();
        writeln!(f, "{id},{}", row.join(","))?;
    }
    Ok(())
}

/// Bound-compliance CSV: omega_rad_s, loop_db, low_db, high_db, pass.
pub fn write_bounds_csv(path: &Path, report: &BoundsReport) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "omega_rad_s,loop_db,low_db,high_db,pass")?;
    for r in &report.rows {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.omega_rad_s, r.loop_db, r.low_db, r.high_db, r.pass
        )?;
    }
    Ok(())
}

/// Optimizer-history CSV: iteration, gbest_cost, gbest_margin,
/// worst_violation_db.
pub fn write_history_csv(path: &Path, history: &[DesignHistoryRecord]) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "iteration,gbest_cost,gbest_margin,worst_violation_db")?;
    for h in history {
        writeln!(
            f,
            "{},{},{},{}",
            h.iteration, h.gbest_cost, h.gbest_margin, h.worst_violation_db
        )?;
    }
    Ok(())
}

/// Time-series CSV: t, y_ref, y_out, u, u_rate (u_rate by first
/// differences, first row zero).
pub fn write_timeseries_csv(
    path: &Path,
    y: &crate::sim::TimeSeries,
    u: &crate::sim::TimeSeries,
) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "t,y_ref,y_out,u,u_rate")?;
    let mut prev_u = u.values.first().copied().unwrap_or(0.0);
    for (i, (&yv, &uv)) in y.values.iter().zip(&u.values).enumerate() {
        let t = i as f64 * y.dt;
        let rate = if i == 0 { 0.0 } else { (uv - prev_u) / u.dt };
        prev_u = uv;
        writeln!(f, "{t},1,{yv},{uv},{rate}")?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Hex-encoded SHA-256 of arbitrary bytes, used to stamp reports with the
/// exact configuration they came from.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
