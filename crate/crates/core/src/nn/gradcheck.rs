use super::{GradientSet, Parameterized};

/// Largest relative disagreement between `analytic` and a central-difference
/// estimate of `loss`, over every scalar parameter of `model`.
///
/// Relative error is `|a − n| / max(1, |a|, |n|)`. The model is restored to
/// its original values before returning.
pub fn grad_check<M, F>(model: &mut M, analytic: &GradientSet, mut loss: F, epsilon: f64) -> f64
where
    M: Parameterized + ?Sized,
    F: FnMut(&M) -> f64,
{
    let sizes: Vec<usize> = model.parameters().iter().map(|t| t.len()).collect();
    assert_eq!(sizes.len(), analytic.len(), "gradient set does not match model");
    let mut worst: f64 = 0.0;
    for (p, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let original = model.parameters()[p].data()[k];
            model.parameters_mut()[p].data_mut()[k] = original + epsilon;
            let plus = loss(model);
            model.parameters_mut()[p].data_mut()[k] = original - epsilon;
            let minus = loss(model);
            model.parameters_mut()[p].data_mut()[k] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.tensors()[p].data()[k];
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(rel);
        }
    }
    worst
}
