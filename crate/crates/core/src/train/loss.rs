use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Binary cross entropy for one prediction; returns `(loss, dloss/de)`.
pub fn bce_loss(e: f64, target: f64) -> Result<(f64, f64)> {
    if target != 0.0 && target != 1.0 {
        return Err(Error::invalid(format!("BCE target must be 0 or 1, got {target}")));
    }
    if !e.is_finite() {
        return Err(Error::Numerical(format!("prediction {e} is not finite")));
    }
    let p = e.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let loss = -(target * p.ln() + (1.0 - target) * (1.0 - p).ln());
    let grad = -target / p + (1.0 - target) / (1.0 - p);
    Ok((loss, grad))
}

/// Mean BCE over a batch of `(prediction, target)` pairs.
pub fn batch_bce(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut total = 0.0;
    for &(e, t) in pairs {
        total += bce_loss(e, t)?.0;
    }
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_probability() {
        for t in [0.0, 1.0] {
            let (l, _) = bce_loss(0.5, t).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn near_perfect() {
        let (l, _) = bce_loss(1.0 - 1e-7, 1.0).unwrap();
        assert!((l - 1e-7).abs() < 1e-12);
        let (l, _) = bce_loss(1.0, 1.0).unwrap();
        assert!(l > 0.0 && l < 2e-7);
    }

    #[test]
    fn rejects_soft_targets() {
        assert!(matches!(bce_loss(0.3, 0.5), Err(Error::InvalidInput(_))));
        assert!(bce_loss(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn batch_mean() {
        let l = batch_bce(&[(0.5, 1.0), (0.5, 0.0)]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(batch_bce(&[]).is_err());
    }
}
