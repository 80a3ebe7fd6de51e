//! Particle swarm optimization over box constraints, and the
//! margin-maximizing design cost for weights plus a fixed-structure
//! controller.
//!
//! Reproducibility contract: one seed feeds independent per-particle random
//! streams, and the swarm update is a single synchronization point per
//! iteration, so results are bit-identical regardless of how many worker
//! threads evaluate the cost function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{tf_to_ss, TransferFunction};
use crate::par::par_map;
use crate::shaping::{check_bounds, check_rolloff, make_weights, shape, FrequencyBounds, WeightParams};
use crate::synthesis::{achieved_margin, FixedStructureController};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub particle_count: usize,
    pub iterations: usize,
    /// Inertia weight w.
    pub inertia: f64,
    /// Cognitive acceleration c1.
    pub cognitive: f64,
    /// Social acceleration c2.
    pub social: f64,
    /// Per-dimension (min, max) box.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl SwarmConfig {
    /// Standard constriction-equivalent defaults: w = 0.729,
    /// c1 = c2 = 1.49445, 40 particles, 300 iterations.
    pub fn with_bounds(bounds: Vec<(f64, f64)>, seed: u64) -> Self {
        Self {
            particle_count: 40,
            iterations: 300,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            bounds,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particle_count < 2 {
            return Err(Error::SwarmConfig("particle_count must be >= 2".into()));
        }
        if self.iterations < 1 {
            return Err(Error::SwarmConfig("iterations must be >= 1".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::SwarmConfig("bounds must be nonempty".into()));
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::SwarmConfig(format!(
                    "bounds[{i}] must satisfy min < max, got ({lo}, {hi})"
                )));
            }
        }
        if self.cognitive < 0.0 || self.social < 0.0 {
            return Err(Error::SwarmConfig("c1 and c2 must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gbest_cost: f64,
    pub gbest_position: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoOutcome {
    pub best_position: Vec<f64>,
    pub best_cost: f64,
    /// Global best after initialization (iteration 0) and after every
    /// update; monotone non-increasing in cost.
    pub history: Vec<IterationRecord>,
}

fn sanitize(c: f64) -> f64 {
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}

/// Minimizes `cost` over the configured box.
///
/// Velocity update v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x) with
/// per-dimension uniform r1, r2; positions clamp to the box with the
/// clamped velocity component zeroed.
pub fn pso_minimize<F>(cost: F, config: &SwarmConfig) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = config.bounds.len();
    let master = ChaCha12Rng::seed_from_u64(config.seed);

    // Independent per-particle streams off the one seeded generator.
    let mut rngs: Vec<ChaCha12Rng> = (0..config.particle_count)
        .map(|i| {
            let mut r = master.clone();
            r.set_stream(i as u64 + 1);
            r
        })
        .collect();

    let mut particles: Vec<Particle> = rngs
        .iter_mut()
        .map(|rng| {
            let position: Vec<f64> = config
                .bounds
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                .collect();
            Particle {
                velocity: vec![0.0; dim],
                best_position: position.clone(),
                best_cost: f64::INFINITY,
                position,
            }
        })
        .collect();

    let costs = par_map(&particles, |p| sanitize(cost(&p.position)));
    for (p, &c) in particles.iter_mut().zip(&costs) {
        p.best_cost = c;
    }

    let mut gbest_cost = f64::INFINITY;
    let mut gbest = vec![0.0; dim];
    for p in &particles {
        if p.best_cost < gbest_cost {
            gbest_cost = p.best_cost;
            gbest = p.best_position.clone();
        }
    }
    let mut history = Vec::with_capacity(config.iterations + 1);
    history.push(IterationRecord {
        iteration: 0,
        gbest_cost,
        gbest_position: gbest.clone(),
    });

    for iter in 1..=config.iterations {
        // Move every particle using its own stream; order independent.
        for (p, rng) in particles.iter_mut().zip(rngs.iter_mut()) {
            for d in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                p.velocity[d] = config.inertia * p.velocity[d]
                    + config.cognitive * r1 * (p.best_position[d] - p.position[d])
                    + config.social * r2 * (gbest[d] - p.position[d]);
                p.position[d] += p.velocity[d];
                let (lo, hi) = config.bounds[d];
                if p.position[d] < lo {
                    p.position[d] = lo;
                    p.velocity[d] = 0.0;
                } else if p.position[d] > hi {
                    p.position[d] = hi;
                    p.velocity[d] = 0.0;
                }
            }
        }

        let costs = par_map(&particles, |p| sanitize(cost(&p.position)));
        for (p, &c) in particles.iter_mut().zip(&costs) {
            if c < p.best_cost {
                p.best_cost = c;
                p.best_position = p.position.clone();
            }
        }
        for p in &particles {
            if p.best_cost < gbest_cost {
                gbest_cost = p.best_cost;
                gbest = p.best_position.clone();
            }
        }
        history.push(IterationRecord {
            iteration: iter,
            gbest_cost,
            gbest_position: gbest.clone(),
        });
    }

    Ok(PsoOutcome {
        best_position: gbest,
        best_cost: gbest_cost,
        history,
    })
}

/// Controller order specification for the fixed-structure search:
/// numerator degree m and (monic) denominator degree n, with m <= n.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControllerStructure {
    pub num_order: usize,
    pub den_order: usize,
}

impl ControllerStructure {
    pub fn validate(&self) -> Result<()> {
        if self.num_order > self.den_order {
            return Err(Error::SwarmConfig(format!(
                "controller numerator order {} exceeds denominator order {}",
                self.num_order, self.den_order
            )));
        }
        Ok(())
    }

    /// Total search dimension: 6 weight parameters, m+1 numerator and n
    /// denominator coefficients.
    pub fn param_len(&self) -> usize {
        6 + self.num_order + 1 + self.den_order
    }
}

/// Penalty weighting for the design cost.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostOptions {
    /// Penalty per dB of worst bound violation.
    pub penalty_per_db: f64,
    /// Flat penalty when the roll-off requirement fails.
    pub rolloff_penalty: f64,
    /// Roll-off requirement (frequency, required reduction in dB), if any.
    pub rolloff: Option<(f64, f64)>,
}

impl Default for CostOptions {
    fn default() -> Self {
        Self {
            penalty_per_db: 0.05,
            rolloff_penalty: 0.5,
            rolloff: Some((300.0, 25.0)),
        }
    }
}

/// Margin/penalty decomposition of one candidate; total = -margin + penalty.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DesignCost {
    pub margin: f64,
    pub penalty: f64,
    pub total: f64,
}

/// Decodes a parameter vector as weight parameters followed by controller
/// coefficients (numerator a_m..a_0, then denominator b_{n-1}..b_0).
pub fn decode_params(
    params: &[f64],
    structure: &ControllerStructure,
) -> Result<(WeightParams, FixedStructureController)> {
    structure.validate()?;
    let expected = structure.param_len();
    if params.len() != expected {
        return Err(Error::ParamLength {
            got: params.len(),
            expected,
        });
    }
    let wp = WeightParams {
        k1: params[0],
        alpha1: params[1],
        beta1: params[2],
        k2: params[3],
        alpha2: params[4],
        beta2: params[5],
    };
    let m = structure.num_order;
    let num = params[6..6 + m + 1].to_vec();
    let den_tail = params[6 + m + 1..].to_vec();
    Ok((wp, FixedStructureController::new(num, den_tail)?))
}

/// Cost of one candidate: builds the weights, shaped plant, and controller,
/// then combines the achieved margin with bound and roll-off penalties.
/// Candidates whose weights violate the template invariants are infeasible
/// (infinite total).
pub fn margin_cost(
    params: &[f64],
    plant: &TransferFunction,
    bounds: &FrequencyBounds,
    structure: &ControllerStructure,
    opts: &CostOptions,
) -> Result<DesignCost> {
    let (wp, fixed) = decode_params(params, structure)?;
    let infeasible = DesignCost {
        margin: 0.0,
        penalty: f64::INFINITY,
        total: f64::INFINITY,
    };
    let (w1, w2) = match make_weights(&wp) {
        Ok(w) => w,
        Err(_) => return Ok(infeasible),
    };
    let shaped = shape(plant, &w1, &w2)?;
    let (shaped_ss, k_ss) = match (tf_to_ss(&shaped.shaped), fixed.to_tf().and_then(|k| tf_to_ss(&k))) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Ok(infeasible),
    };
    let margin = achieved_margin(&shaped_ss, &k_ss).unwrap_or(0.0);

    let report = check_bounds(&shaped.shaped, bounds);
    let mut penalty = opts.penalty_per_db * report.worst_violation_db;
    if let Some((omega, db)) = opts.rolloff {
        if !check_rolloff(&shaped.shaped, plant, omega, db) {
            penalty += opts.rolloff_penalty;
        }
    }
    Ok(DesignCost {
        margin,
        penalty,
        total: -margin + penalty,
    })
}

/// Outcome of the swarm-based design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignHistoryRecord {
    pub iteration: usize,
    pub gbest_cost: f64,
    pub gbest_margin: f64,
    pub worst_violation_db: f64,
}

#[derive(Debug, Clone)]
pub struct SwarmDesign {
    pub weights: WeightParams,
    pub controller: FixedStructureController,
    pub margin: f64,
    pub cost: DesignCost,
    pub history: Vec<DesignHistoryRecord>,
    /// True when the optimum failed to stabilize the loop.
    pub no_stabilizing_candidate: bool,
}

/// Runs the swarm over the margin cost and decodes the winner.
pub fn design(
    plant: &TransferFunction,
    bounds: &FrequencyBounds,
    structure: &ControllerStructure,
    config: &SwarmConfig,
    opts: &CostOptions,
) -> Result<SwarmDesign> {
    structure.validate()?;
    if config.bounds.len() != structure.param_len() {
        return Err(Error::SwarmConfig(format!(
            "swarm dimension {} does not match the parameter layout {}",
            config.bounds.len(),
            structure.param_len()
        )));
    }
    let cost_fn = |p: &[f64]| -> f64 {
        margin_cost(p, plant, bounds, structure, opts)
            .map(|c| c.total)
            .unwrap_or(f64::INFINITY)
    };
    let outcome = pso_minimize(cost_fn, config)?;

    let history = outcome
        .history
        .iter()
        .map(|rec| {
            let c = margin_cost(&rec.gbest_position, plant, bounds, structure, opts);
            let (margin, violation) = match c {
                Ok(dc) => {
                    let (wp, _) = decode_params(&rec.gbest_position, structure)?;
                    let violation = match make_weights(&wp) {
                        Ok((w1, w2)) => {
                            let sp = shape(plant, &w1, &w2)?;
                            check_bounds(&sp.shaped, bounds).worst_violation_db
                        }
                        Err(_) => f64::INFINITY,
                    };
                    (dc.margin, violation)
                }
                Err(_) => (0.0, f64::INFINITY),
            };
            Ok(DesignHistoryRecord {
                iteration: rec.iteration,
                gbest_cost: rec.gbest_cost,
                gbest_margin: margin,
                worst_violation_db: violation,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = margin_cost(&outcome.best_position, plant, bounds, structure, opts)?;
    let (weights, controller) = decode_params(&outcome.best_position, structure)?;
    Ok(SwarmDesign {
        weights,
        controller,
        margin: best.margin,
        cost: best,
        no_stabilizing_candidate: best.margin <= 0.0,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_config(seed: u64) -> SwarmConfig {
        SwarmConfig {
            particle_count: 40,
            iterations: 200,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            bounds: vec![(-5.0, 5.0); 5],
            seed,
        }
    }

    #[test]
    fn sphere_converges() {
        let out = pso_minimize(|x| x.iter().map(|v| v * v).sum(), &sphere_config(7)).unwrap();
        assert!(out.best_cost < 1e-6, "best cost {}", out.best_cost);
    }

    #[test]
    fn rosenbrock_converges() {
        let rosen = |x: &[f64]| {
            100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
        };
        let config = SwarmConfig {
            particle_count: 60,
            iterations: 500,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            bounds: vec![(-2.0, 2.0); 2],
            seed: 11,
        };
        let out = pso_minimize(rosen, &config).unwrap();
        assert!(out.best_cost < 1e-3, "best cost {}", out.best_cost);
        assert!((out.best_position[0] - 1.0).abs() < 0.05);
        assert!((out.best_position[1] - 1.0).abs() < 0.1);
    }

    #[test]
    fn constant_cost_keeps_initial_best() {
        let out = pso_minimize(|_| 3.25, &sphere_config(3)).unwrap();
        assert_eq!(out.best_cost, 3.25);
        assert!(out.history.iter().all(|h| h.gbest_cost == 3.25));
    }

    #[test]
    fn history_monotone_and_positions_bounded() {
        let out = pso_minimize(
            |x| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2),
            &SwarmConfig {
                particle_count: 10,
                iterations: 50,
                inertia: 0.9, // larger inertia exercises clamping
                cognitive: 2.0,
                social: 2.0,
                bounds: vec![(-1.0, 1.0), (-1.0, 1.0)],
                seed: 5,
            },
        )
        .unwrap();
        for w in out.history.windows(2) {
            assert!(w[1].gbest_cost <= w[0].gbest_cost);
        }
        assert!(out
            .best_position
            .iter()
            .all(|&x| (-1.0..=1.0).contains(&x)));
    }

    #[test]
    fn non_finite_costs_treated_as_infinite() {
        let out = pso_minimize(
            |x| {
                if x[0] < 0.0 {
                    f64::NAN
                } else {
                    x[0]
                }
            },
            &SwarmConfig {
                particle_count: 8,
                iterations: 30,
                inertia: 0.729,
                cognitive: 1.49445,
                social: 1.49445,
                bounds: vec![(-1.0, 1.0)],
                seed: 1,
            },
        )
        .unwrap();
        assert!(out.best_cost.is_finite());
        assert!(out.best_position[0] >= 0.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = sphere_config(1);
        c.particle_count = 1;
        assert!(pso_minimize(|_| 0.0, &c).is_err());
        let mut c = sphere_config(1);
        c.bounds[2] = (1.0, 1.0);
        assert!(pso_minimize(|_| 0.0, &c).is_err());
    }

    #[test]
    fn seeded_runs_identical() {
        let a = pso_minimize(|x| x.iter().map(|v| v * v).sum(), &sphere_config(9)).unwrap();
        let b = pso_minimize(|x| x.iter().map(|v| v * v).sum(), &sphere_config(9)).unwrap();
        assert_eq!(
            serde_json::to_string(&a.history).unwrap(),
            serde_json::to_string(&b.history).unwrap()
        );
    }

    #[test]
    fn decode_layout_and_total_identity() {
        let structure = ControllerStructure {
            num_order: 0,
            den_order: 1,
        };
        // 6 weight params + a0 + b0
        let params = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 10.7, 11.8];
        let (wp, k) = decode_params(&params, &structure).unwrap();
        assert_eq!(wp.k2, 1.0);
        assert_eq!(k.num, vec![10.7]);
        assert_eq!(k.den_tail, vec![11.8]);
        assert!(matches!(
            decode_params(&params[..7], &structure),
            Err(Error::ParamLength { .. })
        ));

        // total + margin == penalty, and a destabilizing candidate has
        // margin zero.
        let plant = TransferFunction::from_coeffs(vec![1.0], vec![1.0, 0.0]).unwrap();
        let bounds = crate::shaping::reference_bounds();
        let opts = CostOptions {
            rolloff: None,
            ..CostOptions::default()
        };
        let c = margin_cost(&params, &plant, &bounds, &structure, &opts).unwrap();
        assert!((c.total + c.margin - c.penalty).abs() < 1e-12);
        let destab = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -5.0, 0.1];
        let c = margin_cost(&destab, &plant, &bounds, &structure, &opts).unwrap();
        assert_eq!(c.margin, 0.0);
        assert!(c.total >= 0.0);
    }

    #[test]
    fn integrator_with_central_like_controller_margin() {
        // W1 = W2 = 1 and K = 10.756/(s + 11.756), the central controller
        // for 1/s at gamma = 1.05 sqrt(2) rounded to the structure.
        let structure = ControllerStructure {
            num_order: 0,
            den_order: 1,
        };
        let params = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 10.756, 11.756];
        let plant = TransferFunction::from_coeffs(vec![1.0], vec![1.0, 0.0]).unwrap();
        let bounds = crate::shaping::reference_bounds();
        let opts = CostOptions {
            rolloff: None,
            ..CostOptions::default()
        };
        let c = margin_cost(&params, &plant, &bounds, &structure, &opts).unwrap();
        assert!(
            c.margin > 0.62 && c.margin <= 0.70711 + 1e-9,
            "margin {}",
            c.margin
        );
    }
}
