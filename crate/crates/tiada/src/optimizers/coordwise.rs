use super::{
    build_diagnostics, effective_step, Optimizer, OptimizerError, StepError, StepInfo,
    TiAdaParams,
};
use crate::diagnostics::StepDiagnostics;
use crate::problems::{DomainSpec, GradientOracle, Iterate};

/// Per-coordinate second moments plus their global sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordState {
    pub iterate: Iterate,
    /// Per-coordinate primal second moments, each seeded with `v0_x`.
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    /// Global sums of the per-coordinate entries, recomputed exactly.
    pub vx_sum: f64,
    pub vy_sum: f64,
    pub t: u64,
}

impl CoordState {
    pub fn new(start: Iterate, params: &TiAdaParams) -> Self {
        let vx = vec![params.v0_x; start.x.len()];
        let vy = vec![params.v0_y; start.y.len()];
        let vx_sum = vx.iter().sum();
        let vy_sum = vy.iter().sum();
        Self {
            iterate: start,
            vx,
            vy,
            vx_sum,
            vy_sum,
            t: 0,
        }
    }
}

/// The global damping factor `(vx / max(vx, vy))^alpha` applied to every
/// primal coordinate. Always in `(0, 1]`, and exactly one whenever the
/// primal moment dominates.
pub fn damping_factor(vx_sum: f64, vy_sum: f64, alpha: f64) -> f64 {
    if vx_sum >= vy_sum {
        1.0
    } else {
        vx_sum.powf(alpha) / vy_sum.powf(alpha)
    }
}

/// Coordinate-wise time-scale adaptive step.
///
/// Each coordinate scales by its own accumulated moment, while the global
/// moment sums decide a shared damping of the primal update: coordinate `i`
/// of `x` moves by `(vx/max(vx,vy))^alpha * eta_x / vx_i^alpha` times its
/// gradient. With one coordinate per variable this is exactly the
/// norm-based update.
pub fn coordwise_tiada_step(
    state: &mut CoordState,
    params: &TiAdaParams,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
) -> Result<StepDiagnostics, StepError> {
    let grads = oracle.pair(&state.iterate)?;
    if !grads.is_finite() {
        return Err(StepError::NonFinite {
            step: state.t,
            what: "gradient",
        });
    }
    let vx_new: Vec<f64> = state
        .vx
        .iter()
        .zip(&grads.gx)
        .map(|(v, g)| v + g * g)
        .collect();
    let vy_new: Vec<f64> = state
        .vy
        .iter()
        .zip(&grads.gy)
        .map(|(v, g)| v + g * g)
        .collect();
    let vx_sum: f64 = vx_new.iter().sum();
    let vy_sum: f64 = vy_new.iter().sum();
    if !(vx_sum.is_finite() && vy_sum.is_finite()) {
        return Err(StepError::NonFinite {
            step: state.t,
            what: "second moment",
        });
    }
    // Global scale eta_x / max^alpha, then a per-coordinate correction
    // (vx_sum / vx_i)^alpha; the product equals the damped per-coordinate
    // stepsize and collapses to the global scale when d1 = 1.
    let global_step_x = effective_step(params.eta_x, vx_sum.max(vy_sum), params.alpha);
    let x_next: Vec<f64> = state
        .iterate
        .x
        .iter()
        .zip(&grads.gx)
        .zip(&vx_new)
        .map(|((xi, gi), vi)| {
            let step = global_step_x * (vx_sum / vi).powf(params.alpha);
            xi - step * gi
        })
        .collect();
    let y_candidate: Vec<f64> = state
        .iterate
        .y
        .iter()
        .zip(&grads.gy)
        .zip(&vy_new)
        .map(|((yi, gi), vi)| yi + effective_step(params.eta_y, *vi, params.beta) * gi)
        .collect();
    let next = Iterate::new(x_next, domain.project(&y_candidate));
    if !next.is_finite() {
        return Err(StepError::NonFinite {
            step: state.t,
            what: "iterate",
        });
    }
    let diag = build_diagnostics(
        oracle,
        StepInfo {
            t: state.t,
            at: &state.iterate,
            grads: &grads,
            eff_step_x: global_step_x,
            eff_step_y: effective_step(params.eta_y, vy_sum, params.beta),
            vx: vx_sum,
            vy: vy_sum,
        },
    )?;
    state.iterate = next;
    state.vx = vx_new;
    state.vy = vy_new;
    state.vx_sum = vx_sum;
    state.vy_sum = vy_sum;
    state.t += 1;
    Ok(diag)
}

/// Coordinate-wise variant of the time-scale adaptive optimizer.
pub struct CoordTiAda {
    state: CoordState,
    params: TiAdaParams,
}

impl CoordTiAda {
    pub fn new(start: Iterate, params: TiAdaParams) -> Result<Self, OptimizerError> {
        params.validate_separated()?;
        Ok(Self {
            state: CoordState::new(start, &params),
            params,
        })
    }

    pub fn state(&self) -> &CoordState {
        &self.state
    }
}

impl Optimizer for CoordTiAda {
    fn step(
        &mut self,
        oracle: &mut dyn GradientOracle,
        domain: &DomainSpec,
    ) -> Result<StepDiagnostics, StepError> {
        coordwise_tiada_step(&mut self.state, &self.params, oracle, domain)
    }

    fn iterate(&self) -> &Iterate {
        &self.state.iterate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{tiada_step, TiAdaState};
    use crate::problems::{
        mccormick_problem, quadratic_problem, DeterministicOracle, MinimaxProblem,
    };
    use std::sync::Arc;

    fn quad_oracle(coupling: f64) -> DeterministicOracle {
        let problem: Arc<dyn MinimaxProblem> = Arc::new(quadratic_problem(coupling).unwrap());
        DeterministicOracle::new(problem)
    }

    fn params() -> TiAdaParams {
        TiAdaParams {
            eta_x: 1.0,
            eta_y: 0.2,
            alpha: 0.6,
            beta: 0.4,
            v0_x: 1.0,
            v0_y: 1.0,
        }
    }

    #[test]
    fn single_coordinate_matches_the_norm_based_update_bit_for_bit() {
        let start = Iterate::new(vec![1.0], vec![0.01]);
        let p = params();
        let mut norm_based = TiAdaState::new(start.clone(), &p);
        let mut coord = CoordState::new(start, &p);
        let (mut oa, mut ob) = (quad_oracle(2.0), quad_oracle(2.0));
        for _ in 0..200 {
            let da =
                tiada_step(&mut norm_based, &p, &mut oa, &DomainSpec::Unconstrained).unwrap();
            let db =
                coordwise_tiada_step(&mut coord, &p, &mut ob, &DomainSpec::Unconstrained)
                    .unwrap();
            assert_eq!(norm_based.iterate, coord.iterate);
            assert_eq!(da, db);
            assert_eq!(norm_based.vx, coord.vx_sum);
            assert_eq!(norm_based.vy, coord.vy_sum);
        }
    }

    #[test]
    fn damping_factor_stays_in_unit_interval() {
        assert_eq!(damping_factor(5.0, 3.0, 0.6), 1.0);
        assert_eq!(damping_factor(3.0, 3.0, 0.6), 1.0);
        let d = damping_factor(3.0, 5.0, 0.6);
        assert!(d > 0.0 && d < 1.0);
    }

    #[test]
    fn global_sums_track_the_coordinate_entries_exactly() {
        let problem: Arc<dyn MinimaxProblem> = Arc::new(mccormick_problem());
        let mut oracle = DeterministicOracle::new(problem);
        let p = params();
        let start = Iterate::new(vec![1.0, -1.0], vec![0.5, 0.5]);
        let mut state = CoordState::new(start, &p);
        let mut prev_vx = state.vx.clone();
        let mut prev_vy = state.vy.clone();
        for _ in 0..300 {
            coordwise_tiada_step(&mut state, &p, &mut oracle, &DomainSpec::Unconstrained)
                .unwrap();
            assert_eq!(state.vx_sum, state.vx.iter().sum::<f64>());
            assert_eq!(state.vy_sum, state.vy.iter().sum::<f64>());
            for (now, before) in state.vx.iter().zip(&prev_vx) {
                assert!(now >= before && *now > 0.0);
            }
            for (now, before) in state.vy.iter().zip(&prev_vy) {
                assert!(now >= before && *now > 0.0);
            }
            prev_vx = state.vx.clone();
            prev_vy = state.vy.clone();
        }
        assert!(state.iterate.is_finite());
    }

    #[test]
    fn dominant_primal_moment_reduces_to_per_coordinate_scaling() {
        // Coupling 2 keeps vx ahead of vy, so the damping factor is one and
        // each coordinate moves by eta_x / vx_i^alpha times its gradient.
        let p = params();
        let start = Iterate::new(vec![1.0], vec![0.01]);
        let mut state = CoordState::new(start.clone(), &p);
        let mut oracle = quad_oracle(2.0);
        let g = quad_oracle(2.0).pair(&start).unwrap();
        coordwise_tiada_step(&mut state, &p, &mut oracle, &DomainSpec::Unconstrained).unwrap();
        assert!(state.vx_sum >= state.vy_sum);
        assert_eq!(damping_factor(state.vx_sum, state.vy_sum, p.alpha), 1.0);
        let expected = 1.0 - (p.eta_x / state.vx[0].powf(p.alpha)) * g.gx[0];
        assert!((state.iterate.x[0] - expected).abs() < 1e-15);
    }
}
