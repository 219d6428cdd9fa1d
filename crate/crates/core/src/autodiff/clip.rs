use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// L2 norm over the concatenation of all gradient buffers.
pub fn global_grad_norm<'a, S: Scalar + 'a>(params: impl IntoIterator<Item = &'a Tensor<S>>) -> f64 {
    params
        .into_iter()
        .filter_map(|p| p.grad())
        .flat_map(|g| g.iter())
        .map(|&v| {
            let v = v.as_f64();
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the factor applied (1.0 when no clipping was needed).
pub fn clip_grad_global_norm<'a, S: Scalar + 'a>(
    params: impl IntoIterator<Item = &'a mut Tensor<S>>,
    max_norm: f64,
) -> f64 {
    let mut params: Vec<&mut Tensor<S>> = params.into_iter().collect();
    let norm = global_grad_norm(params.iter().map(|p| &**p));
    if !(norm > max_norm) {
        return 1.0;
    }
    let scale = max_norm / norm;
    let s = S::from_f64(scale);
    for p in params.iter_mut() {
        if let Some(g) = p.grad_mut() {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
    scale
}
