use super::{ModelWeights, Scalar, Tensor};
use crate::error::{Error, Result};

/// Bias-corrected Adam over a [`ModelWeights`] collection.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ModelWeights<T>, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.iter().map(|(_, t)| Tensor::zeros_like(t)).collect(),
            v: params.iter().map(|(_, t)| Tensor::zeros_like(t)).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update. Gradients are checked for NaN/Inf before any
    /// parameter is touched.
    pub fn update(&mut self, params: &mut ModelWeights<T>, grads: &ModelWeights<T>) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Shape {
                op: "adam",
                detail: format!("{} params, state for {}", params.len(), self.m.len()),
            });
        }
        for (name, p) in params.iter() {
            let g = grads.get(name)?;
            if g.shape() != p.shape() {
                return Err(Error::Shape {
                    op: "adam",
                    detail: format!("gradient of `{name}` is {:?}, param {:?}", g.shape(), p.shape()),
                });
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of `{name}`")));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(t));
        let c2 = T::lit(1.0 - self.beta2.powi(t));
        let (lr, eps, one) = (T::lit(self.lr), T::lit(self.eps), T::one());
        for (i, (name, p)) in params.iter_mut().enumerate() {
            let g = grads.get(name)?.data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                m[k] = b1 * m[k] + (one - b1) * g[k];
                v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_model(v: f64) -> ModelWeights<f64> {
        let mut w = ModelWeights::new();
        w.insert("p", Tensor::new(&[1], vec![v]).unwrap()).unwrap();
        w
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_model(0.7);
        let g = p.zeros_like();
        let mut opt = Adam::new(&p, 1e-3);
        for _ in 0..5 {
            opt.update(&mut p, &g).unwrap();
        }
        assert_eq!(p.get("p").unwrap().data()[0], 0.7);
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        let mut p = scalar_model(0.0);
        let g = scalar_model(1.0);
        let mut opt = Adam::new(&p, 1e-3);
        opt.update(&mut p, &g).unwrap();
        assert!((p.get("p").unwrap().data()[0] + 1e-3).abs() < 1e-9);
        // Constant gradients keep the step size at lr.
        opt.update(&mut p, &g).unwrap();
        assert!((p.get("p").unwrap().data()[0] + 2e-3).abs() < 1e-9);
    }

    #[test]
    fn minimizes_a_parabola() {
        let mut p = scalar_model(1.0);
        let mut opt = Adam::new(&p, 0.1);
        for _ in 0..100 {
            let x = p.get("p").unwrap().data()[0];
            let g = scalar_model(2.0 * x);
            opt.update(&mut p, &g).unwrap();
        }
        assert!(p.get("p").unwrap().data()[0].abs() < 0.5);
    }

    #[test]
    fn nan_gradient_names_the_tensor() {
        let mut p = scalar_model(1.0);
        let g = scalar_model(f64::NAN);
        let mut opt = Adam::new(&p, 0.1);
        match opt.update(&mut p, &g) {
            Err(Error::NonFinite(msg)) => assert!(msg.contains("`p`")),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p.get("p").unwrap().data()[0], 1.0);
        assert_eq!(opt.step_count(), 0);
    }
}
