use crate::math::softplus;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-12;

/// `-y ln p - (1 - y) ln(1 - p)` on the clamped probability.
pub fn logloss(prob: f64, label: u8) -> f64 {
    let p = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Derivative of `logloss(sigmoid(z), y)` with respect to the logit `z`.
pub fn logloss_grad(prob: f64, label: u8) -> f64 {
    prob - f64::from(label)
}

/// `logloss(sigmoid(z), y)` computed without forming the probability, so it
/// stays smooth for large `|z|`. This is what the gradient checker
/// differentiates.
pub fn logloss_from_logit(logit: f64, label: u8) -> f64 {
    if label == 1 {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{sigmoid, Rng};

    #[test]
    #[allow(clippy::approx_constant)]
    fn half_costs_ln2() {
        assert!((logloss(0.5, 1) - 0.693_147_180_559_945_3).abs() < 1e-15);
    }

    #[test]
    fn label_symmetry() {
        for p in [0.01, 0.3, 0.77, 0.999] {
            assert!((logloss(p, 1) - logloss(1.0 - p, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn clamp_keeps_loss_finite() {
        assert!(logloss(0.0, 1).is_finite());
        assert!(logloss(1.0, 0).is_finite());
        assert!(logloss(1.0, 1) > 0.0);
    }

    #[test]
    fn grad_values() {
        assert_eq!(logloss_grad(0.5, 1), -0.5);
        assert_eq!(logloss_grad(1.0, 1), 0.0);
        assert_eq!(logloss_grad(0.0, 0), 0.0);
    }

    #[test]
    fn grad_matches_finite_difference_through_sigmoid() {
        let mut rng = Rng::new(4);
        for _ in 0..200 {
            let z = rng.uniform_range(-6.0, 6.0);
            let y = u8::from(rng.bernoulli(0.5));
            let h = 1e-5;
            let numeric = (logloss(sigmoid(z + h), y) - logloss(sigmoid(z - h), y)) / (2.0 * h);
            assert!((numeric - logloss_grad(sigmoid(z), y)).abs() < 1e-7);
        }
    }

    #[test]
    fn logit_form_agrees_with_probability_form() {
        // 1 - sigmoid(z) cancels for large z, so stay in a moderate range
        for z in [-5.0, -3.0, 0.0, 0.4, 5.0] {
            for y in [0, 1] {
                assert!((logloss_from_logit(z, y) - logloss(sigmoid(z), y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_mean_matches_direct_sum() {
        let toy = [(0.9, 1u8), (0.1, 0u8), (0.6, 1u8), (0.4, 1u8)];
        let mean: f64 = toy.iter().map(|&(p, y)| logloss(p, y)).sum::<f64>() / 4.0;
        let hand = -(0.9f64.ln() + 0.9f64.ln() + 0.6f64.ln() + 0.4f64.ln()) / 4.0;
        assert!((mean - hand).abs() < 1e-12);
    }
}
