use super::{GradientPair, Iterate, MinimaxProblem, ProblemConstants, ProblemError};

/// One-dimensional quadratic saddle objective
/// `f(x, y) = -y^2/2 + L*x*y - L^2*x^2/2` with coupling constant `L > 0`.
///
/// The stationary set is the line `y = L*x`, so `y*(x) = L*x` and the primal
/// function is identically zero. The gradients satisfy `gx = -L * gy`
/// everywhere, which makes the problem a sharp probe for stepsize-ratio
/// behavior: the primal gradient history is always `L^2` times the dual one.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    coupling: f64,
}

impl Quadratic {
    pub fn new(coupling: f64) -> Result<Self, ProblemError> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(ProblemError::InvalidParam {
                problem: "quadratic".to_string(),
                message: format!("L must be a positive finite number, got {coupling}"),
            });
        }
        Ok(Self { coupling })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

impl MinimaxProblem for Quadratic {
    fn id(&self) -> &'static str {
        "quadratic"
    }

    fn primal_dim(&self) -> usize {
        1
    }

    fn dual_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &Iterate) -> Result<f64, ProblemError> {
        self.check_dims(p)?;
        let (x, y) = (p.x[0], p.y[0]);
        let l = self.coupling;
        Ok(-0.5 * y * y + l * x * y - 0.5 * l * l * x * x)
    }

    fn gradient(&self, p: &Iterate) -> Result<GradientPair, ProblemError> {
        self.check_dims(p)?;
        let (x, y) = (p.x[0], p.y[0]);
        let l = self.coupling;
        Ok(GradientPair {
            gx: vec![l * y - l * l * x],
            gy: vec![-y + l * x],
        })
    }

    fn inner_solution(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        if x.len() != 1 {
            return Err(ProblemError::DimensionMismatch {
                expected: (1, 1),
                got: (x.len(), 1),
            });
        }
        Ok(vec![self.coupling * x[0]])
    }

    fn primal_value(&self, _x: &[f64]) -> Option<f64> {
        // f(x, L*x) collapses to zero for every x.
        Some(0.0)
    }

    fn constants(&self) -> ProblemConstants {
        // Spectral norm of the constant Hessian [[-L^2, L], [L, -1]], whose
        // eigenvalues are 0 and -(L^2 + 1). Strong concavity in y is 1.
        let l = self.coupling;
        ProblemConstants::new(l * l + 1.0, 1.0)
            .with_coupling(l)
            .with_second_order(0.0)
    }

    fn default_start(&self) -> Iterate {
        Iterate::new(vec![1.0], vec![0.01])
    }
}
