use super::{Scalar, Tensor};
use crate::error::{shape_err, Result};

pub struct LinearGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

fn check<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>) -> Result<(usize, usize, usize)> {
    if x.shape().len() != 2 || w.shape().len() != 2 || x.dim(1) != w.dim(1) {
        return Err(shape_err(
            "linear",
            format!("input {:?} vs weight {:?}", x.shape(), w.shape()),
        ));
    }
    Ok((x.dim(0), x.dim(1), w.dim(0)))
}

/// `y = x · wᵀ + b` for `x` (rows × in), `w` (out × in), `b` (out).
pub fn linear<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (rows, fan_in, fan_out) = check(x, w)?;
    if b.len() != fan_out {
        return Err(shape_err("linear", format!("bias has {} entries, need {fan_out}", b.len())));
    }
    let mut y = Tensor::zeros(&[rows, fan_out]);
    for row in y.data_mut().chunks_mut(fan_out.max(1)) {
        row.copy_from_slice(b.data());
    }
    T::gemm(rows, fan_in, fan_out, x.data(), false, w.data(), true, y.data_mut(), true);
    Ok(y)
}

pub fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<LinearGrads<T>> {
    let (rows, fan_in, fan_out) = check(x, w)?;
    if upstream.shape() != [rows, fan_out] {
        return Err(shape_err(
            "linear_backward",
            format!("upstream {:?}, expected {:?}", upstream.shape(), [rows, fan_out]),
        ));
    }
    let mut dx = Tensor::zeros(&[rows, fan_in]);
    let mut dw = Tensor::zeros(&[fan_out, fan_in]);
    T::gemm(rows, fan_out, fan_in, upstream.data(), false, w.data(), false, dx.data_mut(), false);
    T::gemm(fan_out, rows, fan_in, upstream.data(), true, x.data(), false, dw.data_mut(), false);
    let mut db = Tensor::zeros(&[fan_out]);
    for row in upstream.data().chunks(fan_out.max(1)) {
        for (acc, &g) in db.data_mut().iter_mut().zip(row) {
            *acc += g;
        }
    }
    Ok(LinearGrads { dx, dw, db })
}
