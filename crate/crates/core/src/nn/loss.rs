use super::Tensor;
use crate::{Error, Result};

/// Probability floor/ceiling applied before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-7;

// largest f64 strictly below 1.0
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Numerically stable logistic function, kept strictly inside (0, 1).
pub fn sigmoid_scalar(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

pub fn sigmoid(z: &Tensor) -> Tensor {
    z.map(sigmoid_scalar)
}

/// Mean binary cross-entropy of probabilities against {0,1} labels, plus the
/// fused sigmoid+BCE gradient with respect to the logits, `(ŷ − y) / n`.
pub fn bce_loss(predictions: &Tensor, labels: &[f64]) -> Result<(f64, Tensor)> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Shape("BCE over an empty batch".into()));
    }
    let n = labels.len() as f64;
    let mut total = 0.0;
    for (&p, &y) in predictions.data().iter().zip(labels) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        total += -y * p.ln() - (1.0 - y) * (1.0 - p).ln();
    }
    let grad = Tensor::from_parts(
        predictions.shape().to_vec(),
        predictions.data().iter().zip(labels).map(|(p, y)| (p - y) / n).collect(),
    );
    let loss = total / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("bce_loss"));
    }
    Ok((loss, grad))
}

/// Mean over rows of the squared Euclidean distance `‖a_i − b_i‖²`; `b` is a
/// constant target, so only `∂/∂a = 2(a − b)/n` is returned.
pub fn mse_loss(a: &Tensor, b: &Tensor) -> Result<(f64, Tensor)> {
    a.expect_same_shape(b, "mse_loss")?;
    let n = a.rows();
    if n == 0 {
        return Err(Error::Shape("MSE over an empty batch".into()));
    }
    let diff = a.sub(b)?;
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("mse_loss"));
    }
    Ok((loss, diff.scale(2.0 / n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        for z in [0.3, 2.0, 7.5, 40.0] {
            assert!((sigmoid_scalar(z) + sigmoid_scalar(-z) - 1.0).abs() < 1e-15);
        }
        assert!((sigmoid_scalar(2.0) - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-16);
        assert!((sigmoid_scalar(2.0) - 0.8807970779778823).abs() < 1e-15);
        let hi = sigmoid_scalar(1e4);
        let lo = sigmoid_scalar(-1e4);
        assert!(hi < 1.0 && hi > 0.0 && lo > 0.0 && lo < 1.0);
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let p = Tensor::filled(&[4], 0.5);
        let (loss, _) = bce_loss(&p, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_is_finite_on_saturated_predictions() {
        let p = Tensor::vector(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let (perfect, _) = bce_loss(&p, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(perfect <= 1e-6);
        let (worst, _) = bce_loss(&p, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(worst.is_finite() && worst > 10.0);
    }

    #[test]
    fn bce_length_mismatch_is_shape_error() {
        assert!(matches!(bce_loss(&Tensor::filled(&[2], 0.5), &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn mse_identical_and_offset() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap().0, 0.0);
        let b = a.sub(&Tensor::from_rows(&[vec![3.0, 4.0], vec![3.0, 4.0]]).unwrap()).unwrap();
        assert!((mse_loss(&a, &b).unwrap().0 - 25.0).abs() < 1e-12);
        assert!(matches!(mse_loss(&a, &Tensor::zeros(&[2, 3])), Err(Error::Shape(_))));
    }
}
