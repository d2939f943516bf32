use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{draw_sample, loss_l1, lr_at_epoch, TrainConfig};
use crate::error::{Error, Result};
use crate::model::LtewNet;
use crate::nn::{Adam, ModelWeights};
use crate::raster::ImageBuffer;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

pub struct TrainOutcome {
    pub net: LtewNet<f32>,
    pub trace: Vec<TraceRow>,
}

/// Loss trace as CSV with header `step,lr,loss`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,lr,loss\n");
    for r in trace {
        out.push_str(&format!("{},{:e},{:.9}\n", r.step, r.lr, r.loss));
    }
    out
}

/// Independent random stream for (`tag`, `a`, `b`) under `seed`.
fn stream(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 60) ^ (a << 20) ^ b);
    rng
}

/// The network `run_training` starts from under `cfg`.
pub fn initial_net(cfg: &TrainConfig) -> Result<LtewNet<f32>> {
    LtewNet::init(cfg.model, &mut stream(cfg.seed, 0, 0, 0))
}

/// Train on `images`, calling `on_step` after every optimizer step. Results
/// depend only on the config, the images and the seed.
pub fn run_training(
    cfg: &TrainConfig,
    images: &[ImageBuffer],
    mut on_step: impl FnMut(&TraceRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let mut net = initial_net(cfg)?;
    let mut adam = Adam::new(net.weights(), cfg.lr);
    let mut trace = Vec::new();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        adam.lr = lr_at_epoch(cfg.lr, &cfg.lr_decay_epochs, cfg.lr_decay_factor, epoch);
        let mut order: Vec<usize> = (0..cfg.repeat).flat_map(|_| 0..images.len()).collect();
        order.shuffle(&mut stream(cfg.seed, 1, epoch as u64, 0));
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f32;
            let results: Vec<Result<(f32, ModelWeights<f32>)>> = batch
                .par_iter()
                .enumerate()
                .map(|(b, &img)| {
                    let mut rng = stream(cfg.seed, 2, step as u64, b as u64);
                    let sample = draw_sample(&images[img], cfg, &mut rng)?;
                    let fwd = net.forward_train(&sample.input, &sample.queries)?;
                    let gt: Vec<f32> = sample.gt.iter().flatten().copied().collect();
                    let (loss, mut dpred) = loss_l1(&fwd.pred, &gt)?;
                    dpred.iter_mut().for_each(|g| *g *= scale);
                    let mut grads = net.weights().zeros_like();
                    net.backward(&fwd, &dpred, &mut grads)?;
                    Ok((loss, grads))
                })
                .collect();
            let mut grads = net.weights().zeros_like();
            let mut loss = 0.0f64;
            for r in results {
                let (l, g) = r?;
                loss += l as f64 / batch.len() as f64;
                grads.accumulate(&g)?;
            }
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    lr: adam.lr,
                    detail: format!("loss is {loss}"),
                });
            }
            adam.update(net.weights_mut(), &grads).map_err(|e| match e {
                Error::NonFinite(what) => Error::Diverged {
                    step,
                    lr: adam.lr,
                    detail: what,
                },
                other => other,
            })?;
            let row = TraceRow { step, lr: adam.lr, loss };
            on_step(&row);
            trace.push(row);
            step += 1;
        }
    }
    if let Some(path) = &cfg.trace {
        std::fs::write(path, trace_csv(&trace))?;
    }
    Ok(TrainOutcome { net, trace })
}
