use super::{
    ascend, build_diagnostics, descend, effective_step, Optimizer, OptimizerError, StepError,
    StepInfo, TiAdaParams,
};
use crate::diagnostics::StepDiagnostics;
use crate::problems::{norm_sq, DomainSpec, GradientOracle, Iterate};

/// State of the time-scale adaptive update: the iterate plus the two
/// accumulated squared-gradient-norm sums.
#[derive(Debug, Clone, PartialEq)]
pub struct TiAdaState {
    pub iterate: Iterate,
    pub vx: f64,
    pub vy: f64,
    pub t: u64,
}

impl TiAdaState {
    pub fn new(start: Iterate, params: &TiAdaParams) -> Self {
        Self {
            iterate: start,
            vx: params.v0_x,
            vy: params.v0_y,
            t: 0,
        }
    }
}

/// One time-scale adaptive step.
///
/// Both second moments absorb the fresh gradients first; the primal update
/// then divides by `max(vx, vy)^alpha` while the dual divides by
/// `vy^beta`, followed by projection. The max-coupling is what lets the
/// primal stepsize react to dual progress.
pub fn tiada_step(
    state: &mut TiAdaState,
    params: &TiAdaParams,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
) -> Result<StepDiagnostics, StepError> {
    step_impl(state, params, oracle, domain, true)
}

/// The ablation variant without the max: the primal denominator is
/// `vx^alpha` alone, so the primal stepsize never sees dual progress.
pub fn tiada_nomax_step(
    state: &mut TiAdaState,
    params: &TiAdaParams,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
) -> Result<StepDiagnostics, StepError> {
    step_impl(state, params, oracle, domain, false)
}

fn step_impl(
    state: &mut TiAdaState,
    params: &TiAdaParams,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
    couple_max: bool,
) -> Result<StepDiagnostics, StepError> {
    let grads = oracle.pair(&state.iterate)?;
    if !grads.is_finite() {
        return Err(StepError::NonFinite {
            step: state.t,
            what: "gradient",
        });
    }
    let vx_new = state.vx + norm_sq(&grads.gx);
    let vy_new = state.vy + norm_sq(&grads.gy);
    if !(vx_new.is_finite() && vy_new.is_finite()) {
        return Err(StepError::NonFinite {
            step: state.t,
            what: "second moment",
        });
    }
    let denom_x = if couple_max { vx_new.max(vy_new) } else { vx_new };
    let eff_step_x = effective_step(params.eta_x, denom_x, params.alpha);
    let eff_step_y = effective_step(params.eta_y, vy_new, params.beta);
    let next = Iterate::new(
        descend(&state.iterate.x, eff_step_x, &grads.gx),
        domain.project(&ascend(&state.iterate.y, eff_step_y, &grads.gy)),
    );
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
            eff_step_x,
            eff_step_y,
            vx: vx_new,
            vy: vy_new,
        },
    )?;
    state.iterate = next;
    state.vx = vx_new;
    state.vy = vy_new;
    state.t += 1;
    Ok(diag)
}

/// The time-scale adaptive optimizer, with or without the max-coupling.
pub struct TiAda {
    state: TiAdaState,
    params: TiAdaParams,
    couple_max: bool,
}

impl TiAda {
    pub fn new(start: Iterate, params: TiAdaParams) -> Result<Self, OptimizerError> {
        params.validate_separated()?;
        Ok(Self {
            state: TiAdaState::new(start, &params),
            params,
            couple_max: true,
        })
    }

    pub fn without_max(start: Iterate, params: TiAdaParams) -> Result<Self, OptimizerError> {
        params.validate_separated()?;
        Ok(Self {
            state: TiAdaState::new(start, &params),
            params,
            couple_max: false,
        })
    }

    pub fn state(&self) -> &TiAdaState {
        &self.state
    }
}

impl Optimizer for TiAda {
    fn step(
        &mut self,
        oracle: &mut dyn GradientOracle,
        domain: &DomainSpec,
    ) -> Result<StepDiagnostics, StepError> {
        step_impl(&mut self.state, &self.params, oracle, domain, self.couple_max)
    }

    fn iterate(&self) -> &Iterate {
        &self.state.iterate
    }
}
