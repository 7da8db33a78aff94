use super::{
    ascend, build_diagnostics, descend, effective_step, run_optimizer, Optimizer, OptimizerError,
    RunOutcome, StepError, StepInfo, TiAdaParams,
};
use crate::diagnostics::StepDiagnostics;
use crate::problems::{norm, norm_sq, DomainSpec, GradientOracle, GradientPair, Iterate};

/// Parameters of the nested adaptive baseline: the usual stepsizes plus a
/// hard cap on inner ascent steps per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeAdaParams {
    pub base: TiAdaParams,
    pub inner_cap: u64,
}

/// State of the two-loop baseline. `outer` counts completed outer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NeAdaState {
    pub iterate: Iterate,
    pub vx: f64,
    pub vy: f64,
    pub outer: u64,
}

impl NeAdaState {
    pub fn new(start: Iterate, params: &NeAdaParams) -> Self {
        Self {
            iterate: start,
            vx: params.base.v0_x,
            vy: params.base.v0_y,
            outer: 0,
        }
    }
}

/// One outer iteration of the nested baseline.
///
/// The dual variable first runs an adaptive ascent subroutine: with exact
/// gradients it ascends until `||gy|| <= 1/(k+1)` for outer counter `k`
/// (capped at `inner_cap` steps); with noisy gradients it takes exactly
/// `min(k, inner_cap)` steps. One adaptive descent step on the primal
/// variable follows. Every inner check and step costs one oracle query,
/// so the per-call accounting stays comparable with single-loop methods.
pub fn neada_step(
    state: &mut NeAdaState,
    params: &NeAdaParams,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
) -> Result<StepDiagnostics, StepError> {
    let k = state.outer + 1;
    let base = &params.base;
    let non_finite = |what: &'static str| StepError::NonFinite {
        step: state.outer,
        what,
    };

    let mut y = state.iterate.y.clone();
    let mut vy = state.vy;
    let mut last_gy: Option<Vec<f64>> = None;
    let mut last_eff_y: Option<f64> = None;
    let ascend_with = |y: &mut Vec<f64>,
                       vy: &mut f64,
                       gy: Vec<f64>|
     -> Result<(Vec<f64>, f64), StepError> {
        let vy_new = *vy + norm_sq(&gy);
        if !vy_new.is_finite() {
            return Err(non_finite("second moment"));
        }
        let eff = effective_step(base.eta_y, vy_new, base.beta);
        let next = domain.project(&ascend(y, eff, &gy));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("iterate"));
        }
        *y = next;
        *vy = vy_new;
        Ok((gy, eff))
    };

    if oracle.is_exact() {
        let tolerance = 1.0 / (k as f64 + 1.0);
        let mut inner = 0;
        loop {
            if inner == params.inner_cap {
                break;
            }
            let point = Iterate::new(state.iterate.x.clone(), y.clone());
            let gy = oracle.grad_y(&point)?;
            if gy.iter().any(|v| !v.is_finite()) {
                return Err(non_finite("gradient"));
            }
            if norm(&gy) <= tolerance {
                last_gy = Some(gy);
                break;
            }
            let (gy, eff) = ascend_with(&mut y, &mut vy, gy)?;
            last_gy = Some(gy);
            last_eff_y = Some(eff);
            inner += 1;
        }
    } else {
        for _ in 0..k.min(params.inner_cap) {
            let point = Iterate::new(state.iterate.x.clone(), y.clone());
            let gy = oracle.grad_y(&point)?;
            if gy.iter().any(|v| !v.is_finite()) {
                return Err(non_finite("gradient"));
            }
            let (gy, eff) = ascend_with(&mut y, &mut vy, gy)?;
            last_gy = Some(gy);
            last_eff_y = Some(eff);
        }
    }

    // One adaptive descent step on x from the refined dual point.
    let point = Iterate::new(state.iterate.x.clone(), y.clone());
    let gx = oracle.grad_x(&point)?;
    if gx.iter().any(|v| !v.is_finite()) {
        return Err(non_finite("gradient"));
    }
    let vx_new = state.vx + norm_sq(&gx);
    if !vx_new.is_finite() {
        return Err(non_finite("second moment"));
    }
    let eff_step_x = effective_step(base.eta_x, vx_new, base.alpha);
    let x_next = descend(&state.iterate.x, eff_step_x, &gx);
    if x_next.iter().any(|v| !v.is_finite()) {
        return Err(non_finite("iterate"));
    }

    let grads = GradientPair {
        gx,
        // The subroutine always issues at least one dual query.
        gy: last_gy.expect("inner loop queries the dual gradient"),
    };
    let eff_step_y = last_eff_y.unwrap_or_else(|| effective_step(base.eta_y, vy, base.beta));
    let diag = build_diagnostics(
        oracle,
        StepInfo {
            t: state.outer,
            at: &point,
            grads: &grads,
            eff_step_x,
            eff_step_y,
            vx: vx_new,
            vy,
        },
    )?;
    state.iterate = Iterate::new(x_next, y);
    state.vx = vx_new;
    state.vy = vy;
    state.outer += 1;
    Ok(diag)
}

/// Runs the nested baseline for `outer_steps` outer iterations from
/// `start` (or the problem's default start), producing one diagnostics row
/// per outer iteration with cumulative oracle-call counts.
pub fn neada_run(
    params: &NeAdaParams,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
    outer_steps: u64,
    start: Option<Iterate>,
) -> Result<RunOutcome, StepError> {
    let start = start.unwrap_or_else(|| oracle.problem().default_start());
    let mut optimizer = NeAda::new(start, *params)?;
    run_optimizer(&mut optimizer, oracle, domain, outer_steps, 1, None)
}

/// The nested adaptive baseline as a step-per-outer-iteration optimizer.
pub struct NeAda {
    state: NeAdaState,
    params: NeAdaParams,
}

impl NeAda {
    pub fn new(start: Iterate, params: NeAdaParams) -> Result<Self, OptimizerError> {
        params.base.validate()?;
        if params.inner_cap < 1 {
            return Err(OptimizerError::InvalidParams(
                "inner_cap must be at least 1".to_string(),
            ));
        }
        Ok(Self {
            state: NeAdaState::new(start, &params),
            params,
        })
    }

    pub fn state(&self) -> &NeAdaState {
        &self.state
    }
}

impl Optimizer for NeAda {
    fn step(
        &mut self,
        oracle: &mut dyn GradientOracle,
        domain: &DomainSpec,
    ) -> Result<StepDiagnostics, StepError> {
        neada_step(&mut self.state, &self.params, oracle, domain)
    }

    fn iterate(&self) -> &Iterate {
        &self.state.iterate
    }
}
