//! Self-check suite behind the `check` subcommand: gradient verification,
//! projection properties, the stepsize-ratio bound, and the reduction
//! identities, each reported as a pass/fail line.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{
    classify_stage, compute_summary, finite_difference_gradient, ratio_upper_bound,
    ratio_upper_bound_factored,
};
use crate::optimizers::{
    adaptive_gda_step, coordwise_tiada_step, generalized_tiada_step, tiada_step, CoordState,
    MomentScheme, MomentState, TiAdaParams, TiAdaState,
};
use crate::problems::{
    make_stochastic, mccormick_problem, norm, quadratic_problem, DeterministicOracle, DomainSpec,
    GradientOracle, Iterate, MinimaxProblem,
};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            detail,
        }
    }
}

fn problems() -> Vec<Arc<dyn MinimaxProblem>> {
    vec![
        Arc::new(quadratic_problem(2.0).expect("valid coupling")),
        Arc::new(mccormick_problem()),
    ]
}

fn check_gradients() -> CheckResult {
    const NAME: &str = "finite-difference gradients";
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for problem in problems() {
        for _ in 0..100 {
            let p = Iterate::new(
                (0..problem.primal_dim())
                    .map(|_| rng.gen_range(-5.0..5.0))
                    .collect(),
                (0..problem.dual_dim())
                    .map(|_| rng.gen_range(-5.0..5.0))
                    .collect(),
            );
            let exact = problem.gradient(&p).expect("dims match");
            let fd = finite_difference_gradient(problem.as_ref(), &p, 1e-6).expect("dims");
            let diff: Vec<f64> = exact
                .gx
                .iter()
                .chain(&exact.gy)
                .zip(fd.gx.iter().chain(&fd.gy))
                .map(|(a, b)| a - b)
                .collect();
            let full: Vec<f64> = exact.gx.iter().chain(&exact.gy).copied().collect();
            worst = worst.max(norm(&diff) / norm(&full).max(1e-9));
        }
    }
    if worst < 1e-6 {
        CheckResult::pass(NAME, format!("max relative error {worst:.3e} over 200 points"))
    } else {
        CheckResult::fail(NAME, format!("relative error {worst:.3e} >= 1e-6"))
    }
}

fn check_projections() -> CheckResult {
    const NAME: &str = "projection idempotence and nonexpansiveness";
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let domains = [
        DomainSpec::Unconstrained,
        DomainSpec::Box {
            lower: vec![-1.0, -0.5],
            upper: vec![0.5, 2.0],
        },
        DomainSpec::Ball {
            center: vec![0.25, -0.75],
            radius: 1.5,
        },
    ];
    for trial in 0..10_000 {
        let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.gen_range(-10.0..10.0)).collect();
        for domain in &domains {
            let pa = domain.project(&a);
            let pb = domain.project(&b);
            if domain.project(&pa) != pa {
                return CheckResult::fail(
                    NAME,
                    format!("projection not idempotent on trial {trial}"),
                );
            }
            let din: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
            let dout: Vec<f64> = pa.iter().zip(&pb).map(|(u, v)| u - v).collect();
            if norm(&dout) > norm(&din) + 1e-12 {
                return CheckResult::fail(
                    NAME,
                    format!("projection expanded a pair on trial {trial}"),
                );
            }
        }
    }
    CheckResult::pass(NAME, "10000 random pairs on 3 domains".to_string())
}

fn tiada_config_list() -> Vec<(&'static str, f64, TiAdaParams, f64)> {
    // (problem id, coupling, params, noise)
    let p = |eta_x, eta_y, alpha, beta| TiAdaParams {
        eta_x,
        eta_y,
        alpha,
        beta,
        v0_x: 1.0,
        v0_y: 1.0,
    };
    vec![
        ("quadratic", 2.0, p(1.0, 0.2, 0.6, 0.4), 0.0),
        ("quadratic", 2.0, p(0.2, 0.2, 0.6, 0.4), 0.0),
        ("quadratic", 2.0, p(0.05, 0.2, 0.7, 0.3), 0.0),
        ("quadratic", 4.0, p(1.0, 0.1, 0.6, 0.4), 0.0),
        ("quadratic", 2.0, p(4.0, 0.2, 0.59, 0.41), 0.0),
        ("quadratic", 2.0, p(1.0, 0.2, 0.6, 0.4), 0.1),
        ("mccormick", 0.0, p(1.0, 0.01, 0.6, 0.4), 0.0),
        ("mccormick", 0.0, p(0.33, 0.01, 0.6, 0.4), 0.1),
        ("mccormick", 0.0, p(0.2, 0.01, 0.62, 0.38), 0.1),
        ("mccormick", 0.0, p(1.0, 0.05, 0.7, 0.3), 0.0),
    ]
}

fn check_ratio_bound() -> CheckResult {
    const NAME: &str = "stepsize-ratio upper bound";
    let mut checked = 0u64;
    for (pid, coupling, params, noise) in tiada_config_list() {
        let problem: Arc<dyn MinimaxProblem> = if pid == "quadratic" {
            Arc::new(quadratic_problem(coupling).expect("valid"))
        } else {
            Arc::new(mccormick_problem())
        };
        let start = problem.default_start();
        let mut oracle: Box<dyn GradientOracle> = if noise == 0.0 {
            Box::new(DeterministicOracle::new(problem))
        } else {
            Box::new(make_stochastic(problem, noise, 1))
        };
        let mut state = TiAdaState::new(start, &params);
        let mut prev_bound = f64::INFINITY;
        for t in 0..2000 {
            let diag = match tiada_step(
                &mut state,
                &params,
                oracle.as_mut(),
                &DomainSpec::Unconstrained,
            ) {
                Ok(d) => d,
                Err(e) => {
                    return CheckResult::fail(NAME, format!("step {t} failed: {e}"));
                }
            };
            let loose =
                ratio_upper_bound_factored(params.eta_x, params.eta_y, params.alpha, params.beta, diag.vy);
            let bound = ratio_upper_bound(params.eta_x, params.eta_y, params.alpha, params.beta, diag.vy);
            if diag.ratio > loose {
                return CheckResult::fail(
                    NAME,
                    format!("ratio {} above bound {loose} at step {t}", diag.ratio),
                );
            }
            if bound > prev_bound {
                return CheckResult::fail(
                    NAME,
                    format!("bound increased from {prev_bound} to {bound} at step {t}"),
                );
            }
            prev_bound = bound;
            checked += 1;
        }
    }
    CheckResult::pass(NAME, format!("{checked} steps across 10 configs"))
}

fn check_reductions() -> CheckResult {
    const NAME: &str = "reduction identities";
    let params = TiAdaParams {
        eta_x: 1.0,
        eta_y: 0.2,
        alpha: 0.6,
        beta: 0.4,
        v0_x: 1.0,
        v0_y: 1.0,
    };
    let problem: Arc<dyn MinimaxProblem> = Arc::new(quadratic_problem(2.0).expect("valid"));
    let start = problem.default_start();
    let domain = DomainSpec::Unconstrained;

    let mut direct = TiAdaState::new(start.clone(), &params);
    let scheme = MomentScheme::adagrad();
    let mut general = MomentState::new(start.clone(), &scheme, &params);
    let mut coord = CoordState::new(start.clone(), &params);
    let mut oracle_a = DeterministicOracle::new(problem.clone());
    let mut oracle_b = DeterministicOracle::new(problem.clone());
    let mut oracle_c = DeterministicOracle::new(problem.clone());
    for t in 0..1000 {
        let da = tiada_step(&mut direct, &params, &mut oracle_a, &domain);
        let db = generalized_tiada_step(&mut general, &scheme, &params, &mut oracle_b, &domain);
        let dc = coordwise_tiada_step(&mut coord, &params, &mut oracle_c, &domain);
        match (da, db, dc) {
            (Ok(da), Ok(db), Ok(dc)) => {
                if da != db || direct.iterate != general.iterate {
                    return CheckResult::fail(
                        NAME,
                        format!("generalized update diverged from the direct one at step {t}"),
                    );
                }
                if da != dc || direct.iterate != coord.iterate {
                    return CheckResult::fail(
                        NAME,
                        format!("coordinate-wise update diverged at step {t}"),
                    );
                }
            }
            _ => return CheckResult::fail(NAME, format!("a step failed at {t}")),
        }
    }

    // Constant-one second moments against a hand-rolled fixed-step loop.
    let fixed = MomentScheme::fixed();
    let gda_params = TiAdaParams {
        eta_x: 0.05,
        eta_y: 0.1,
        alpha: 0.5,
        beta: 0.5,
        v0_x: 1.0,
        v0_y: 1.0,
    };
    let mut state = MomentState::new(start.clone(), &fixed, &gda_params);
    let mut oracle = DeterministicOracle::new(problem.clone());
    let mut reference_oracle = DeterministicOracle::new(problem);
    let (mut rx, mut ry) = (start.x.clone(), start.y.clone());
    for t in 0..1000 {
        if adaptive_gda_step(&mut state, &fixed, &gda_params, &mut oracle, &domain).is_err() {
            return CheckResult::fail(NAME, format!("fixed-step run failed at {t}"));
        }
        let g = reference_oracle
            .pair(&Iterate::new(rx.clone(), ry.clone()))
            .expect("dims");
        for (xi, gi) in rx.iter_mut().zip(&g.gx) {
            *xi -= 0.05 * gi;
        }
        for (yi, gi) in ry.iter_mut().zip(&g.gy) {
            *yi += 0.1 * gi;
        }
        if state.iterate.x != rx || state.iterate.y != ry {
            return CheckResult::fail(
                NAME,
                format!("constant-one run diverged from plain updates at step {t}"),
            );
        }
    }
    CheckResult::pass(NAME, "3 identities over 1000 steps each".to_string())
}

fn check_summary_recompute() -> CheckResult {
    const NAME: &str = "stage labels and summary recomputation";
    let params = TiAdaParams {
        eta_x: 1.0,
        eta_y: 0.2,
        alpha: 0.6,
        beta: 0.4,
        v0_x: 1.0,
        v0_y: 1.0,
    };
    let problem: Arc<dyn MinimaxProblem> = Arc::new(quadratic_problem(2.0).expect("valid"));
    let kappa = problem.constants().kappa;
    let mut oracle = DeterministicOracle::new(problem);
    let mut state = TiAdaState::new(Iterate::new(vec![1.0], vec![0.01]), &params);
    let mut steps = Vec::new();
    for _ in 0..1500 {
        match tiada_step(&mut state, &params, &mut oracle, &DomainSpec::Unconstrained) {
            Ok(d) => steps.push(d),
            Err(e) => return CheckResult::fail(NAME, format!("step failed: {e}")),
        }
    }
    for s in &steps {
        if s.stage != classify_stage(s.ratio, kappa) {
            return CheckResult::fail(NAME, format!("stage label mismatch at step {}", s.t));
        }
        let recomputed = s.eff_step_x / s.eff_step_y;
        if recomputed != s.ratio {
            return CheckResult::fail(NAME, format!("stored ratio mismatch at step {}", s.t));
        }
    }
    let summary = compute_summary(&steps, kappa).expect("nonempty");
    let naive_avg = steps
        .iter()
        .rev()
        .map(|s| s.det_grad_x_norm * s.det_grad_x_norm)
        .sum::<f64>()
        / steps.len() as f64;
    if (summary.avg_sq_det_grad_x - naive_avg).abs()
        > 1e-12 * summary.avg_sq_det_grad_x.abs().max(1.0)
    {
        return CheckResult::fail(NAME, "running average not recomputable".to_string());
    }
    CheckResult::pass(NAME, format!("1500 steps, kappa {kappa}"))
}

fn check_oracle_determinism() -> CheckResult {
    const NAME: &str = "seeded oracle determinism";
    let problem: Arc<dyn MinimaxProblem> = Arc::new(mccormick_problem());
    let p = Iterate::new(vec![0.3, -0.7], vec![0.1, 0.2]);
    let mut a = make_stochastic(problem.clone(), 0.1, 99);
    let mut b = make_stochastic(problem, 0.1, 99);
    for i in 0..500 {
        let (ga, gb) = (a.pair(&p).expect("dims"), b.pair(&p).expect("dims"));
        if ga != gb {
            return CheckResult::fail(NAME, format!("streams diverged at query {i}"));
        }
    }
    CheckResult::pass(NAME, "500 identical paired queries".to_string())
}

/// Runs the whole verification suite.
pub fn run_all_checks() -> Vec<CheckResult> {
    vec![
        check_gradients(),
        check_projections(),
        check_ratio_bound(),
        check_reductions(),
        check_summary_recompute(),
        check_oracle_determinism(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_whole_suite_passes() {
        for result in run_all_checks() {
            assert!(result.passed, "{}: {}", result.name, result.detail);
        }
    }
}
