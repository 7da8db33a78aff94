use super::moments::next_first_moment;
use super::{
    ascend, build_diagnostics, descend, effective_step, MomentScheme, Optimizer, OptimizerError,
    StepError, StepInfo, TiAdaParams,
};
use crate::diagnostics::StepDiagnostics;
use crate::problems::{norm_sq, DomainSpec, GradientOracle, Iterate};
use crate::optimizers::SecondMomentState;

/// State for the generalized moment updates: first-moment buffers plus one
/// second-moment accumulator per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub iterate: Iterate,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
    pub vx: SecondMomentState,
    pub vy: SecondMomentState,
    pub t: u64,
}

impl MomentState {
    pub fn new(start: Iterate, scheme: &MomentScheme, params: &TiAdaParams) -> Self {
        let mx = vec![0.0; start.x.len()];
        let my = vec![0.0; start.y.len()];
        Self {
            mx,
            my,
            vx: SecondMomentState::new(scheme.second, params.v0_x),
            vy: SecondMomentState::new(scheme.second, params.v0_y),
            iterate: start,
            t: 0,
        }
    }
}

/// Generalized time-scale adaptive step: the scheme supplies the moments,
/// the primal denominator keeps the max-coupling.
///
/// With zero momentum and cumulative-sum moments this reproduces
/// [`super::tiada_step`] bit for bit.
pub fn generalized_tiada_step(
    state: &mut MomentState,
    scheme: &MomentScheme,
    params: &TiAdaParams,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
) -> Result<StepDiagnostics, StepError> {
    step_impl(state, scheme, params, oracle, domain, true)
}

/// Plain adaptive GDA step: each variable scales by its own second moment
/// only. This is the family that cannot adjust a bad initial stepsize
/// ratio, since neither denominator ever sees the other variable.
pub fn adaptive_gda_step(
    state: &mut MomentState,
    scheme: &MomentScheme,
    params: &TiAdaParams,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
) -> Result<StepDiagnostics, StepError> {
    step_impl(state, scheme, params, oracle, domain, false)
}

fn step_impl(
    state: &mut MomentState,
    scheme: &MomentScheme,
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
    // Second moments always consume the raw (pre-momentum) squared norms.
    let vx_new = state.vx.updated(norm_sq(&grads.gx));
    let vy_new = state.vy.updated(norm_sq(&grads.gy));
    let (psi_x, psi_y) = (vx_new.value(), vy_new.value());
    if !(psi_x.is_finite() && psi_y.is_finite() && psi_x > 0.0 && psi_y > 0.0) {
        return Err(StepError::NonFinite {
            step: state.t,
            what: "second moment",
        });
    }
    let momentum = scheme.first.coefficient();
    let mx_new = next_first_moment(&state.mx, &grads.gx, momentum);
    let my_new = next_first_moment(&state.my, &grads.gy, momentum);
    let denom_x = if couple_max { psi_x.max(psi_y) } else { psi_x };
    let eff_step_x = effective_step(params.eta_x, denom_x, params.alpha);
    let eff_step_y = effective_step(params.eta_y, psi_y, params.beta);
    let next = Iterate::new(
        descend(&state.iterate.x, eff_step_x, &mx_new),
        domain.project(&ascend(&state.iterate.y, eff_step_y, &my_new)),
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
            vx: psi_x,
            vy: psi_y,
        },
    )?;
    state.iterate = next;
    state.mx = mx_new;
    state.my = my_new;
    state.vx = vx_new;
    state.vy = vy_new;
    state.t += 1;
    Ok(diag)
}

/// Optimizer over a [`MomentScheme`], either max-coupled (time-scale
/// adaptive) or with independent denominators (the plain GDA family).
pub struct MomentGda {
    state: MomentState,
    scheme: MomentScheme,
    params: TiAdaParams,
    couple_max: bool,
}

impl MomentGda {
    /// Max-coupled variant; requires the separation regime `beta < alpha`.
    pub fn max_coupled(
        start: Iterate,
        scheme: MomentScheme,
        params: TiAdaParams,
    ) -> Result<Self, OptimizerError> {
        params.validate_separated()?;
        scheme.validate()?;
        Ok(Self {
            state: MomentState::new(start, &scheme, &params),
            scheme,
            params,
            couple_max: true,
        })
    }

    /// Independent denominators; equal exponents are allowed.
    pub fn uncoupled(
        start: Iterate,
        scheme: MomentScheme,
        params: TiAdaParams,
    ) -> Result<Self, OptimizerError> {
        params.validate()?;
        scheme.validate()?;
        Ok(Self {
            state: MomentState::new(start, &scheme, &params),
            scheme,
            params,
            couple_max: false,
        })
    }

    pub fn state(&self) -> &MomentState {
        &self.state
    }
}

impl Optimizer for MomentGda {
    fn step(
        &mut self,
        oracle: &mut dyn GradientOracle,
        domain: &DomainSpec,
    ) -> Result<StepDiagnostics, StepError> {
        step_impl(
            &mut self.state,
            &self.scheme,
            &self.params,
            oracle,
            domain,
            self.couple_max,
        )
    }

    fn iterate(&self) -> &Iterate {
        &self.state.iterate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{tiada_step, TiAdaState};
    use crate::problems::{quadratic_problem, DeterministicOracle, MinimaxProblem};
    use std::sync::Arc;

    fn oracle() -> DeterministicOracle {
        let problem: Arc<dyn MinimaxProblem> = Arc::new(quadratic_problem(2.0).unwrap());
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
    fn adagrad_scheme_reduces_to_the_direct_update_bit_for_bit() {
        let start = Iterate::new(vec![1.0], vec![0.01]);
        let p = params();
        let scheme = MomentScheme::adagrad();
        let mut direct = TiAdaState::new(start.clone(), &p);
        let mut general = MomentState::new(start, &scheme, &p);
        let (mut oa, mut ob) = (oracle(), oracle());
        for _ in 0..200 {
            let da =
                tiada_step(&mut direct, &p, &mut oa, &DomainSpec::Unconstrained).unwrap();
            let db = generalized_tiada_step(
                &mut general,
                &scheme,
                &p,
                &mut ob,
                &DomainSpec::Unconstrained,
            )
            .unwrap();
            assert_eq!(direct.iterate, general.iterate);
            assert_eq!(da, db);
        }
    }

    #[test]
    fn constant_one_scheme_is_fixed_stepsize_gda() {
        let start = Iterate::new(vec![0.3], vec![-0.4]);
        let p = TiAdaParams {
            eta_x: 0.05,
            eta_y: 0.1,
            alpha: 0.5,
            beta: 0.5,
            v0_x: 1.0,
            v0_y: 1.0,
        };
        let scheme = MomentScheme::fixed();
        let mut state = MomentState::new(start.clone(), &scheme, &p);
        let mut o = oracle();

        // Independent naive reference: x -= eta_x * gx; y += eta_y * gy.
        let (mut rx, mut ry) = (start.x.clone(), start.y.clone());
        let mut reference = oracle();
        for _ in 0..200 {
            let diag =
                adaptive_gda_step(&mut state, &scheme, &p, &mut o, &DomainSpec::Unconstrained)
                    .unwrap();
            assert_eq!(diag.eff_step_x, 0.05);
            assert_eq!(diag.eff_step_y, 0.1);

            let g = reference.pair(&Iterate::new(rx.clone(), ry.clone())).unwrap();
            for (xi, gi) in rx.iter_mut().zip(&g.gx) {
                *xi -= 0.05 * gi;
            }
            for (yi, gi) in ry.iter_mut().zip(&g.gy) {
                *yi += 0.1 * gi;
            }
            assert_eq!(state.iterate.x, rx);
            assert_eq!(state.iterate.y, ry);
        }
    }

    #[test]
    fn adagrad_gda_keeps_its_stepsize_ratio_on_the_quadratic() {
        // With gradient norms locked in a 2:1 ratio, both cumulative sums
        // grow proportionally and the effective ratio freezes near
        // eta_x / (2 eta_y).
        let p = TiAdaParams {
            eta_x: 1.0,
            eta_y: 0.2,
            alpha: 0.5,
            beta: 0.5,
            v0_x: 1.0,
            v0_y: 1.0,
        };
        let scheme = MomentScheme::adagrad();
        let mut state = MomentState::new(Iterate::new(vec![1.0], vec![0.01]), &scheme, &p);
        let mut o = oracle();
        let mut ratios = Vec::new();
        for _ in 0..1001 {
            let diag =
                adaptive_gda_step(&mut state, &scheme, &p, &mut o, &DomainSpec::Unconstrained)
                    .unwrap();
            ratios.push(diag.ratio);
        }
        let reference = ratios[10];
        for r in &ratios[10..=1000] {
            assert!((r - reference).abs() / reference < 0.05);
        }
    }

    #[test]
    fn momentum_buffers_follow_the_blend_rule() {
        let p = params();
        let scheme = MomentScheme::adam(0.9, 0.999);
        let start = Iterate::new(vec![1.0], vec![0.01]);
        let mut state = MomentState::new(start.clone(), &scheme, &p);
        let mut o = oracle();
        let g0 = oracle().pair(&start).unwrap();
        generalized_tiada_step(&mut state, &scheme, &p, &mut o, &DomainSpec::Unconstrained)
            .unwrap();
        // m_0 = 0.9 * 0 + 0.1 * g_0.
        assert!((state.mx[0] - 0.1 * g0.gx[0]).abs() < 1e-15);
        assert!((state.my[0] - 0.1 * g0.gy[0]).abs() < 1e-15);
    }
}
