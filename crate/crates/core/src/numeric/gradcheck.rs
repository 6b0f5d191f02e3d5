use crate::numeric::tensor::Tensor;
use crate::scalar::Scalar;

/// Central-difference gradient of a scalar function, one coordinate at a time.
pub fn finite_difference_grad<S: Scalar>(mut f: impl FnMut(&Tensor<S>) -> S, x: &Tensor<S>, h: S) -> Tensor<S> {
    assert!(h > S::zero(), "finite-difference step must be positive");
    let mut probe = x.clone();
    let two_h = h + h;
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - h;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        out.push((fp - fm) / two_h);
    }
    Tensor::new(x.shape().to_vec(), out).expect("same shape as input")
}

/// `|a − b| / max(|a|, |b|, floor)`, the floor keeping near-zero gradients
/// from turning rounding noise into huge ratios.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_relative_error<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, floor: f64) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| relative_error(x.as_f64(), y.as_f64(), floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_has_unit_gradient() {
        let x = Tensor::<f64>::new(vec![3], vec![0.3, -2.0, 7.5]).unwrap();
        let g = finite_difference_grad(|t| t.sum(), &x, 1e-5);
        for v in g.data() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn square_at_three() {
        let x = Tensor::<f64>::scalar(3.0);
        let g = finite_difference_grad(|t| t.data()[0] * t.data()[0], &x, 1e-5);
        assert!((g.data()[0] - 6.0).abs() < 1e-6);
    }
}
