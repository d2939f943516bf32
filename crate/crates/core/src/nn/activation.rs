//! Elementwise activations. `sin_pi(x) = sin(πx)`, `cos_pi(x) = cos(πx)`.

use std::f64::consts::PI;

use super::{Scalar, Tensor};
use crate::error::{shape_err, Result};

#[inline]
pub fn pi<T: Scalar>() -> T {
    T::lit(PI)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// The derivative at 0 is taken as 0.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    zip_grad(x, upstream, |v, g| if v > T::zero() { g } else { T::zero() })
}

pub fn sin_pi<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| (pi::<T>() * v).sin())
}

pub fn sin_pi_backward<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    zip_grad(x, upstream, |v, g| pi::<T>() * (pi::<T>() * v).cos() * g)
}

pub fn cos_pi<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| (pi::<T>() * v).cos())
}

pub fn cos_pi_backward<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    zip_grad(x, upstream, |v, g| -pi::<T>() * (pi::<T>() * v).sin() * g)
}

fn zip_grad<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    if x.shape() != upstream.shape() {
        return Err(shape_err(
            "activation",
            format!("{:?} vs upstream {:?}", x.shape(), upstream.shape()),
        ));
    }
    let data = x.data().iter().zip(upstream.data()).map(|(&v, &g)| f(v, g)).collect();
    Tensor::new(x.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let x = Tensor::new(&[3], vec![-1.0f64, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&x, &Tensor::from_fn(&[3], |_| 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);

        let half = Tensor::new(&[1], vec![0.5f64]).unwrap();
        assert!((sin_pi(&half).data()[0] - 1.0).abs() < 1e-15);
        assert!(cos_pi(&half).data()[0].abs() < 1e-15);
        let one = Tensor::new(&[1], vec![1.0f64]).unwrap();
        assert!((cos_pi(&one).data()[0] + 1.0).abs() < 1e-15);
    }
}
