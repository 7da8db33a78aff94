use serde::{Deserialize, Serialize};

/// Closed convex domain for the dual variable, with Euclidean projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    Unconstrained,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec::Unconstrained
    }
}

impl DomainSpec {
    /// Validates shape constraints against the dual dimension.
    pub fn validate(&self, dual_dim: usize) -> Result<(), String> {
        match self {
            DomainSpec::Unconstrained => Ok(()),
            DomainSpec::Box { lower, upper } => {
                if lower.len() != dual_dim || upper.len() != dual_dim {
                    return Err(format!(
                        "box bounds must have length {dual_dim}, got {} and {}",
                        lower.len(),
                        upper.len()
                    ));
                }
                for (lo, hi) in lower.iter().zip(upper) {
                    if !(lo.is_finite() && hi.is_finite()) {
                        return Err("box bounds must be finite".to_string());
                    }
                    if lo > hi {
                        return Err(format!("box lower bound {lo} exceeds upper bound {hi}"));
                    }
                }
                Ok(())
            }
            DomainSpec::Ball { center, radius } => {
                if center.len() != dual_dim {
                    return Err(format!(
                        "ball center must have length {dual_dim}, got {}",
                        center.len()
                    ));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(format!("ball radius must be positive, got {radius}"));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err("ball center must be finite".to_string());
                }
                Ok(())
            }
        }
    }

    /// Euclidean projection of `y` onto the domain.
    ///
    /// Points already inside come back bitwise unchanged, so projecting twice
    /// gives exactly the same vector.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        match self {
            DomainSpec::Unconstrained => y.to_vec(),
            DomainSpec::Box { lower, upper } => y
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
            DomainSpec::Ball { center, radius } => {
                let dist_sq: f64 = y
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum();
                let radius_sq = radius * radius;
                if dist_sq <= radius_sq {
                    return y.to_vec();
                }
                let mut scale = radius / dist_sq.sqrt();
                loop {
                    let candidate: Vec<f64> = y
                        .iter()
                        .zip(center)
                        .map(|(v, c)| c + (v - c) * scale)
                        .collect();
                    let cand_sq: f64 = candidate
                        .iter()
                        .zip(center)
                        .map(|(v, c)| (v - c) * (v - c))
                        .sum();
                    // Rounding can leave the rescaled point an ulp outside;
                    // nudge the scale inward until it lands inside so that a
                    // second projection is a bitwise no-op.
                    if cand_sq <= radius_sq {
                        return candidate;
                    }
                    scale *= 1.0 - f64::EPSILON;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn unconstrained_is_identity() {
        let d = DomainSpec::Unconstrained;
        assert_eq!(d.project(&[3.0, -7.0]), vec![3.0, -7.0]);
    }

    #[test]
    fn box_projection_clamps() {
        let d = DomainSpec::Box {
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
        };
        assert_eq!(d.project(&[2.0, 0.5]), vec![1.0, 0.5]);
        assert_eq!(d.project(&[-3.0, 4.0]), vec![-1.0, 1.0]);
    }

    #[test]
    fn ball_projection_rescales_radially() {
        let d = DomainSpec::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let p = d.project(&[3.0, 4.0]);
        assert!((p[0] - 0.6).abs() < 1e-15);
        assert!((p[1] - 0.8).abs() < 1e-15);
        // Interior points are untouched.
        assert_eq!(d.project(&[0.1, -0.2]), vec![0.1, -0.2]);
    }

    #[test]
    fn validation_catches_bad_shapes() {
        assert!(DomainSpec::Box {
            lower: vec![0.0],
            upper: vec![-1.0],
        }
        .validate(1)
        .is_err());
        assert!(DomainSpec::Box {
            lower: vec![0.0],
            upper: vec![1.0],
        }
        .validate(2)
        .is_err());
        assert!(DomainSpec::Ball {
            center: vec![0.0],
            radius: 0.0,
        }
        .validate(1)
        .is_err());
        assert!(DomainSpec::Ball {
            center: vec![0.0],
            radius: 2.0,
        }
        .validate(1)
        .is_ok());
    }

    proptest! {
        #[test]
        fn projections_are_idempotent_and_nonexpansive(
            a in proptest::collection::vec(-10.0f64..10.0, 3),
            b in proptest::collection::vec(-10.0f64..10.0, 3),
            radius in 0.5f64..3.0,
        ) {
            let domains = [
                DomainSpec::Unconstrained,
                DomainSpec::Box { lower: vec![-1.0, -2.0, 0.0], upper: vec![1.0, 0.5, 4.0] },
                DomainSpec::Ball { center: vec![0.5, -0.5, 1.0], radius },
            ];
            for d in &domains {
                let pa = d.project(&a);
                let pb = d.project(&b);
                prop_assert_eq!(&d.project(&pa), &pa);
                prop_assert_eq!(&d.project(&pb), &pb);
                let dist_in: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
                let dist_out: Vec<f64> = pa.iter().zip(&pb).map(|(u, v)| u - v).collect();
                prop_assert!(norm(&dist_out) <= norm(&dist_in) + 1e-12);
            }
        }
    }
}
