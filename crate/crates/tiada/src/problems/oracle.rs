use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GradientPair, Iterate, MinimaxProblem, ProblemError};

/// Source of (possibly noisy) partial gradients, with a query counter.
///
/// The primal and dual gradients are queried separately so that multi-step
/// inner loops are charged per gradient evaluation. `pair` issues one query
/// of each, drawing independent noise for the two.
pub trait GradientOracle {
    fn problem(&self) -> &Arc<dyn MinimaxProblem>;

    /// Stochastic gradient with respect to the primal variable.
    fn grad_x(&mut self, p: &Iterate) -> Result<Vec<f64>, ProblemError>;

    /// Stochastic gradient with respect to the dual variable.
    fn grad_y(&mut self, p: &Iterate) -> Result<Vec<f64>, ProblemError>;

    /// One primal query followed by one dual query.
    fn pair(&mut self, p: &Iterate) -> Result<GradientPair, ProblemError> {
        let gx = self.grad_x(p)?;
        let gy = self.grad_y(p)?;
        Ok(GradientPair { gx, gy })
    }

    /// Number of gradient queries served so far.
    fn calls(&self) -> u64;

    /// True when queries return the exact gradient.
    fn is_exact(&self) -> bool;
}

/// Noise-free oracle: returns exact gradients and counts queries.
pub struct DeterministicOracle {
    problem: Arc<dyn MinimaxProblem>,
    calls: u64,
}

impl DeterministicOracle {
    pub fn new(problem: Arc<dyn MinimaxProblem>) -> Self {
        Self { problem, calls: 0 }
    }
}

impl GradientOracle for DeterministicOracle {
    fn problem(&self) -> &Arc<dyn MinimaxProblem> {
        &self.problem
    }

    fn grad_x(&mut self, p: &Iterate) -> Result<Vec<f64>, ProblemError> {
        self.calls += 1;
        Ok(self.problem.gradient(p)?.gx)
    }

    fn grad_y(&mut self, p: &Iterate) -> Result<Vec<f64>, ProblemError> {
        self.calls += 1;
        Ok(self.problem.gradient(p)?.gy)
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Oracle adding fresh i.i.d. zero-mean Gaussian noise per component on
/// every query. Identical seeds reproduce identical gradient streams.
pub struct StochasticOracle {
    problem: Arc<dyn MinimaxProblem>,
    noise_stddev: f64,
    rng: ChaCha8Rng,
    calls: u64,
}

impl StochasticOracle {
    pub fn new(problem: Arc<dyn MinimaxProblem>, noise_stddev: f64, seed: u64) -> Self {
        assert!(
            noise_stddev >= 0.0 && noise_stddev.is_finite(),
            "noise_stddev must be nonnegative, got {noise_stddev}"
        );
        Self {
            problem,
            noise_stddev,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calls: 0,
        }
    }

    fn perturb(&mut self, mut g: Vec<f64>) -> Vec<f64> {
        if self.noise_stddev > 0.0 {
            let normal = Normal::new(0.0, self.noise_stddev).expect("valid stddev");
            for v in &mut g {
                *v += normal.sample(&mut self.rng);
            }
        }
        g
    }
}

impl GradientOracle for StochasticOracle {
    fn problem(&self) -> &Arc<dyn MinimaxProblem> {
        &self.problem
    }

    fn grad_x(&mut self, p: &Iterate) -> Result<Vec<f64>, ProblemError> {
        self.calls += 1;
        let gx = self.problem.gradient(p)?.gx;
        Ok(self.perturb(gx))
    }

    fn grad_y(&mut self, p: &Iterate) -> Result<Vec<f64>, ProblemError> {
        self.calls += 1;
        let gy = self.problem.gradient(p)?.gy;
        Ok(self.perturb(gy))
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn is_exact(&self) -> bool {
        self.noise_stddev == 0.0
    }
}
