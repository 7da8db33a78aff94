use super::OptimizerError;

/// First-moment rule: the per-step momentum coefficient applied to the
/// gradient buffer. Zero leaves the raw gradient untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstMoment {
    Zero,
    Constant(f64),
}

impl FirstMoment {
    pub fn coefficient(&self) -> f64 {
        match self {
            FirstMoment::Zero => 0.0,
            FirstMoment::Constant(c) => *c,
        }
    }
}

/// Second-moment function over the history of squared gradient norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecondMomentKind {
    /// `v0 + sum of squared norms`; nondecreasing.
    CumulativeSum,
    /// Always one: recovers fixed stepsizes.
    ConstantOne,
    /// Exponential moving average seeded with `gamma^(t+1) v0`.
    Ema { gamma: f64 },
    /// Running maximum of the moving average; nondecreasing.
    MaxEma { gamma: f64 },
}

/// A (first moment, second moment) pair describing one adaptive scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentScheme {
    pub first: FirstMoment,
    pub second: SecondMomentKind,
}

impl MomentScheme {
    /// Raw gradients over a cumulative sum: the norm-based AdaGrad scheme.
    pub fn adagrad() -> Self {
        Self {
            first: FirstMoment::Zero,
            second: SecondMomentKind::CumulativeSum,
        }
    }

    /// Raw gradients over a constant denominator: fixed stepsizes.
    pub fn fixed() -> Self {
        Self {
            first: FirstMoment::Zero,
            second: SecondMomentKind::ConstantOne,
        }
    }

    /// Momentum over an exponential moving average.
    pub fn adam(beta1: f64, gamma: f64) -> Self {
        Self {
            first: FirstMoment::Constant(beta1),
            second: SecondMomentKind::Ema { gamma },
        }
    }

    /// Momentum over the running max of the moving average.
    pub fn amsgrad(beta1: f64, gamma: f64) -> Self {
        Self {
            first: FirstMoment::Constant(beta1),
            second: SecondMomentKind::MaxEma { gamma },
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if let FirstMoment::Constant(c) = self.first {
            if !(c > 0.0 && c < 1.0) {
                return Err(OptimizerError::InvalidParams(format!(
                    "first-moment coefficient must lie in (0, 1), got {c}"
                )));
            }
        }
        match self.second {
            SecondMomentKind::Ema { gamma } | SecondMomentKind::MaxEma { gamma } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(OptimizerError::InvalidParams(format!(
                        "second-moment decay must lie in (0, 1), got {gamma}"
                    )));
                }
            }
            SecondMomentKind::CumulativeSum | SecondMomentKind::ConstantOne => {}
        }
        Ok(())
    }
}

/// Running second-moment value for one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum SecondMomentState {
    CumulativeSum { value: f64 },
    ConstantOne,
    Ema { gamma: f64, value: f64 },
    MaxEma { gamma: f64, ema: f64, max_value: f64 },
}

impl SecondMomentState {
    pub fn new(kind: SecondMomentKind, v0: f64) -> Self {
        match kind {
            SecondMomentKind::CumulativeSum => SecondMomentState::CumulativeSum { value: v0 },
            SecondMomentKind::ConstantOne => SecondMomentState::ConstantOne,
            SecondMomentKind::Ema { gamma } => SecondMomentState::Ema { gamma, value: v0 },
            SecondMomentKind::MaxEma { gamma } => SecondMomentState::MaxEma {
                gamma,
                ema: v0,
                max_value: f64::NEG_INFINITY,
            },
        }
    }

    /// Absorbs one squared gradient norm. Call before reading [`value`].
    pub fn update(&mut self, sq_norm: f64) {
        match self {
            SecondMomentState::CumulativeSum { value } => *value += sq_norm,
            SecondMomentState::ConstantOne => {}
            SecondMomentState::Ema { gamma, value } => {
                *value = *gamma * *value + (1.0 - *gamma) * sq_norm;
            }
            SecondMomentState::MaxEma {
                gamma,
                ema,
                max_value,
            } => {
                *ema = *gamma * *ema + (1.0 - *gamma) * sq_norm;
                *max_value = max_value.max(*ema);
            }
        }
    }

    /// The denominator value after the updates so far.
    pub fn value(&self) -> f64 {
        match self {
            SecondMomentState::CumulativeSum { value } => *value,
            SecondMomentState::ConstantOne => 1.0,
            SecondMomentState::Ema { value, .. } => *value,
            SecondMomentState::MaxEma { max_value, .. } => *max_value,
        }
    }

    /// `value`: second moment after absorbing this step's squared norm.
    pub fn updated(&self, sq_norm: f64) -> Self {
        let mut next = self.clone();
        next.update(sq_norm);
        next
    }
}

/// `beta * m + (1 - beta) * g`; with `beta = 0` the buffer becomes exactly
/// the raw gradient.
pub(crate) fn next_first_moment(m: &[f64], g: &[f64], beta: f64) -> Vec<f64> {
    if beta == 0.0 {
        g.to_vec()
    } else {
        m.iter()
            .zip(g)
            .map(|(mi, gi)| beta * mi + (1.0 - beta) * gi)
            .collect()
    }
}
