use super::{GradientPair, Iterate, MinimaxProblem, ProblemConstants, ProblemError};

/// Two-dimensional test objective built from the McCormick function:
///
/// `f(x, y) = sin(x1 + x2) + (x1 - x2)^2 - 3/2 x1 + 5/2 x2 + 1
///            + x1 y1 + x2 y2 - (y1^2 + y2^2) / 2`
///
/// The dual part is 1-strongly concave with inner maximizer `y*(x) = x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct McCormick;

impl McCormick {
    pub fn new() -> Self {
        Self
    }
}

impl MinimaxProblem for McCormick {
    fn id(&self) -> &'static str {
        "mccormick"
    }

    fn primal_dim(&self) -> usize {
        2
    }

    fn dual_dim(&self) -> usize {
        2
    }

    fn evaluate(&self, p: &Iterate) -> Result<f64, ProblemError> {
        self.check_dims(p)?;
        let (x1, x2) = (p.x[0], p.x[1]);
        let (y1, y2) = (p.y[0], p.y[1]);
        Ok((x1 + x2).sin() + (x1 - x2) * (x1 - x2) - 1.5 * x1 + 2.5 * x2 + 1.0
            + x1 * y1
            + x2 * y2
            - 0.5 * (y1 * y1 + y2 * y2))
    }

    fn gradient(&self, p: &Iterate) -> Result<GradientPair, ProblemError> {
        self.check_dims(p)?;
        let (x1, x2) = (p.x[0], p.x[1]);
        let (y1, y2) = (p.y[0], p.y[1]);
        let c = (x1 + x2).cos();
        Ok(GradientPair {
            gx: vec![
                c + 2.0 * (x1 - x2) - 1.5 + y1,
                c - 2.0 * (x1 - x2) + 2.5 + y2,
            ],
            gy: vec![x1 - y1, x2 - y2],
        })
    }

    fn inner_solution(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        if x.len() != 2 {
            return Err(ProblemError::DimensionMismatch {
                expected: (2, 2),
                got: (x.len(), 2),
            });
        }
        Ok(x.to_vec())
    }

    fn primal_value(&self, x: &[f64]) -> Option<f64> {
        if x.len() != 2 {
            return None;
        }
        let (x1, x2) = (x[0], x[1]);
        // f(x, x): the bilinear term contributes |x|^2 and the concave term
        // -|x|^2/2, leaving the McCormick part plus |x|^2/2.
        Some(
            (x1 + x2).sin() + (x1 - x2) * (x1 - x2) - 1.5 * x1 + 2.5 * x2 + 1.0
                + 0.5 * (x1 * x1 + x2 * x2),
        )
    }

    fn constants(&self) -> ProblemConstants {
        // The Hessian splits under a fixed rotation into the 2x2 blocks
        // [[4, 1], [1, -1]] and [[-2 sin(x1+x2), 1], [1, -1]]. The first is
        // point-independent and always dominates, so the spectral norm is
        // the constant (3 + sqrt(29)) / 2.
        ProblemConstants::new(0.5 * (3.0 + 29.0f64.sqrt()), 1.0).with_second_order(0.0)
    }

    fn default_start(&self) -> Iterate {
        Iterate::new(vec![0.0, 0.0], vec![0.0, 0.0])
    }
}
