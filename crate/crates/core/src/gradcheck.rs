//! Central finite-difference checks of every hand-written gradient, in `f64`.
//!
//! Layer checks use the scalar `L = Σ r ⊙ f(θ)` with random `r`, so the
//! upstream gradient is `r`. The numeric derivative differences the outputs
//! element-wise before weighting, which keeps cancellation error small.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{NormalizedCoord, ShapeVector, Size};
use crate::model::{LtewConfig, LtewNet, Query};
use crate::nn::{
    conv3x3, conv3x3_backward, cos_pi, cos_pi_backward, linear, linear_backward, relu, relu_backward, sin_pi,
    sin_pi_backward, Tensor,
};
use crate::raster::ImageBuffer;
use crate::training::loss_l1;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Relative-error bound for single layers.
pub const LAYER_TOL: f64 = 1e-6;
/// Relative-error bound for the whole model.
pub const END_TO_END_TOL: f64 = 1e-5;
/// Random instances per layer.
pub const INSTANCES: usize = 10;
/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub instances: usize,
    /// Number of gradient entries compared.
    pub entries: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<12} {} ({} instances, {} entries, max rel err {:.3e}, tol {:.0e})",
            self.name,
            if self.passed() { "ok" } else { "FAILED" },
            self.instances,
            self.entries,
            self.max_rel_err,
            self.tolerance
        )
    }
}

type Forward<'a> = dyn Fn(&[Tensor<f64>]) -> Result<Tensor<f64>> + 'a;

/// Max relative error between `analytic[k]` and the numeric gradient of
/// `Σ r ⊙ f(inputs)` with respect to `inputs[k]`, over all entries.
fn compare(inputs: &[Tensor<f64>], f: &Forward, r: &Tensor<f64>, analytic: &[&Tensor<f64>]) -> Result<(f64, usize)> {
    let mut worst = 0.0f64;
    let mut entries = 0;
    let mut work = inputs.to_vec();
    for (k, grad) in analytic.iter().enumerate() {
        for i in 0..work[k].len() {
            let x0 = work[k].data()[i];
            work[k].data_mut()[i] = x0 + STEP;
            let plus = f(&work)?;
            work[k].data_mut()[i] = x0 - STEP;
            let minus = f(&work)?;
            work[k].data_mut()[i] = x0;
            let numeric: f64 = plus
                .data()
                .iter()
                .zip(minus.data())
                .zip(r.data())
                .map(|((p, m), w)| w * (p - m))
                .sum::<f64>()
                / (2.0 * STEP);
            worst = worst.max(rel_err(grad.data()[i], numeric));
            entries += 1;
        }
    }
    Ok((worst, entries))
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Uniform in `±[margin, bound)`, keeping samples off a kink at zero.
fn off_zero(shape: &[usize], bound: f64, margin: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(margin..bound);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

fn layer_report(name: &'static str, rng: &mut ChaCha8Rng, mut one: impl FnMut(&mut ChaCha8Rng) -> Result<(f64, usize)>) -> Result<CheckReport> {
    let mut max_rel_err = 0.0f64;
    let mut entries = 0;
    for _ in 0..INSTANCES {
        let (e, n) = one(rng)?;
        max_rel_err = max_rel_err.max(e);
        entries += n;
    }
    Ok(CheckReport {
        name,
        instances: INSTANCES,
        entries,
        max_rel_err,
        tolerance: LAYER_TOL,
    })
}

pub fn check_conv3x3(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    layer_report("conv3x3", rng, |rng| {
        let (n, c, o) = (rng.random_range(1..3), rng.random_range(1..4), rng.random_range(1..4));
        let (h, w) = (rng.random_range(1..6), rng.random_range(1..6));
        let inputs = [
            uniform(&[n, c, h, w], -1.0, 1.0, rng),
            uniform(&[o, c, 3, 3], -1.0, 1.0, rng),
            uniform(&[o], -1.0, 1.0, rng),
        ];
        let r = uniform(&[n, o, h, w], -1.0, 1.0, rng);
        let g = conv3x3_backward(&inputs[0], &inputs[1], &r)?;
        compare(&inputs, &|t| conv3x3(&t[0], &t[1], &t[2]), &r, &[&g.dx, &g.dw, &g.db])
    })
}

pub fn check_linear(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    layer_report("linear", rng, |rng| {
        let (rows, fan_in, fan_out) = (rng.random_range(1..6), rng.random_range(1..8), rng.random_range(1..8));
        let inputs = [
            uniform(&[rows, fan_in], -1.0, 1.0, rng),
            uniform(&[fan_out, fan_in], -1.0, 1.0, rng),
            uniform(&[fan_out], -1.0, 1.0, rng),
        ];
        let r = uniform(&[rows, fan_out], -1.0, 1.0, rng);
        let g = linear_backward(&inputs[0], &inputs[1], &r)?;
        compare(&inputs, &|t| linear(&t[0], &t[1], &t[2]), &r, &[&g.dx, &g.dw, &g.db])
    })
}

type Activation = (fn(&Tensor<f64>) -> Tensor<f64>, fn(&Tensor<f64>, &Tensor<f64>) -> Result<Tensor<f64>>);

fn check_activation(name: &'static str, (f, df): Activation, margin: f64, rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    layer_report(name, rng, |rng| {
        let shape = [rng.random_range(1..5), rng.random_range(1..9)];
        let x = off_zero(&shape, 2.0, margin, rng);
        let r = uniform(&shape, -1.0, 1.0, rng);
        // relu_backward takes the layer output; sin/cos take the input.
        let at = if name == "relu" { f(&x) } else { x.clone() };
        let dx = df(&at, &r)?;
        compare(&[x], &|t| Ok(f(&t[0])), &r, &[&dx])
    })
}

pub fn check_relu(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    check_activation("relu", (relu, relu_backward), 1e-3, rng)
}

pub fn check_sin_pi(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    check_activation("sin_pi", (sin_pi, sin_pi_backward), 0.0, rng)
}

pub fn check_cos_pi(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    check_activation("cos_pi", (cos_pi, cos_pi_backward), 0.0, rng)
}

pub fn check_loss_l1(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    layer_report("loss_l1", rng, |rng| {
        let n = 3 * rng.random_range(1..9);
        let gt = uniform(&[n], 0.0, 1.0, rng);
        let d = off_zero(&[n], 0.5, 1e-3, rng);
        let pred = Tensor::from_fn(&[n], |i| gt.data()[i] + d.data()[i]);
        let (_, g) = loss_l1(pred.data(), gt.data())?;
        let g = Tensor::new(&[n], g)?;
        let one = Tensor::from_fn(&[1], |_| 1.0);
        compare(
            &[pred],
            &|t| Ok(Tensor::from_fn(&[1], |_| loss_l1(t[0].data(), gt.data()).map(|v| v.0).unwrap_or(f64::NAN))),
            &one,
            &[&g],
        )
    })
}

/// Model used by the end-to-end check.
pub const END_TO_END_MODEL: LtewConfig = LtewConfig {
    channels: 4,
    freq_pairs: 3,
    hidden: 8,
};
/// Queries per end-to-end instance.
pub const END_TO_END_QUERIES: usize = 8;
const RELU_MARGIN: f64 = 1e-4;
const L1_MARGIN: f64 = 1e-3;
const MAX_ATTEMPTS: usize = 200;

fn random_query(rng: &mut ChaCha8Rng) -> Query {
    let x = NormalizedCoord::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut jac = [0.0; 4];
    for (i, j) in jac.iter_mut().enumerate() {
        *j = if i == 0 || i == 3 {
            rng.random_range(0.3..2.0)
        } else {
            rng.random_range(-0.5..0.5)
        };
    }
    let hess = std::array::from_fn(|_| rng.random_range(-0.2..0.2));
    Query {
        x,
        shape: ShapeVector { jac, hess },
    }
}

/// Total L1 loss of a tiny model against random targets, differentiated with
/// respect to every parameter.
pub fn check_end_to_end(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    for _ in 0..MAX_ATTEMPTS {
        let net = LtewNet::<f64>::init(END_TO_END_MODEL, rng)?;
        let img = ImageBuffer::from_fn(Size::new(6, 5), |_, _| {
            std::array::from_fn(|_| rng.random_range(0.0..1.0))
        });
        let queries: Vec<Query> = (0..END_TO_END_QUERIES).map(|_| random_query(rng)).collect();
        let gt: Vec<f64> = (0..3 * END_TO_END_QUERIES).map(|_| rng.random_range(0.0..1.0)).collect();

        let fwd = net.forward_train(&img, &queries)?;
        let ties = fwd.pred.iter().zip(&gt).any(|(p, g)| (p - g).abs() < L1_MARGIN);
        if ties || fwd.relu_margin(&net)? < RELU_MARGIN {
            continue;
        }
        let (_, dpred) = loss_l1(&fwd.pred, &gt)?;
        let mut grads = net.weights().zeros_like();
        net.backward(&fwd, &dpred, &mut grads)?;

        let loss = |n: &LtewNet<f64>| -> Result<f64> { Ok(loss_l1(&n.forward_train(&img, &queries)?.pred, &gt)?.0) };
        let mut probe = net.clone();
        let mut worst = 0.0f64;
        let mut entries = 0;
        let names: Vec<String> = net.weights().iter().map(|(n, _)| n.to_string()).collect();
        for name in &names {
            for i in 0..net.weights().get(name)?.len() {
                let x0 = net.weights().get(name)?.data()[i];
                probe.weights_mut().get_mut(name)?.data_mut()[i] = x0 + STEP;
                let plus = loss(&probe)?;
                probe.weights_mut().get_mut(name)?.data_mut()[i] = x0 - STEP;
                let minus = loss(&probe)?;
                probe.weights_mut().get_mut(name)?.data_mut()[i] = x0;
                let numeric = (plus - minus) / (2.0 * STEP);
                worst = worst.max(rel_err(grads.get(name)?.data()[i], numeric));
                entries += 1;
            }
        }
        return Ok(CheckReport {
            name: "end-to-end",
            instances: 1,
            entries,
            max_rel_err: worst,
            tolerance: END_TO_END_TOL,
        });
    }
    Err(Error::NonFinite("no kink-free end-to-end instance found".into()))
}

/// Every layer check followed by the end-to-end check.
pub fn run_suite(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        check_conv3x3(&mut rng)?,
        check_linear(&mut rng)?,
        check_relu(&mut rng)?,
        check_sin_pi(&mut rng)?,
        check_cos_pi(&mut rng)?,
        check_loss_l1(&mut rng)?,
        check_end_to_end(&mut rng)?,
    ])
}
