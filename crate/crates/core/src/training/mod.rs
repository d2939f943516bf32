//! Desk-scale trainer: batch preparation, L1 objective, Adam with step decay.

mod batch;
mod config;
mod run;

pub use batch::{draw_sample, prepare_pair, sample_transform, void_free_windows, TrainSample, MAX_RESAMPLES};
pub use config::{DatasetSpec, GtPolicy, TrainConfig, TrainRegime};
pub use run::{initial_net, run_training, trace_csv, TraceRow, TrainOutcome};

use crate::error::{shape_err, Result};
use crate::nn::Scalar;

/// Mean absolute error and its gradient. The subgradient at ties is 0.
pub fn loss_l1<T: Scalar>(pred: &[T], gt: &[T]) -> Result<(T, Vec<T>)> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(shape_err("loss_l1", format!("{} predictions, {} targets", pred.len(), gt.len())));
    }
    let n = T::lit(pred.len() as f64);
    let mut sum = T::zero();
    let grad = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let d = p - g;
            sum += d.abs();
            if d > T::zero() {
                T::one() / n
            } else if d < T::zero() {
                -T::one() / n
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((sum / n, grad))
}

/// Learning rate in effect during `epoch` (0-based): the base rate times
/// `factor` for every decay epoch already reached.
pub fn lr_at_epoch(base: f64, decay_epochs: &[usize], factor: f64, epoch: usize) -> f64 {
    let k = decay_epochs.iter().filter(|&&e| epoch >= e).count();
    base * factor.powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_values() {
        let gt = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(loss_l1(&gt, &gt).unwrap(), (0.0, vec![0.0; 4]));
        let pred: Vec<f64> = gt.iter().map(|v| v + 0.5).collect();
        let (l, g) = loss_l1(&pred, &gt).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        assert_eq!(g, vec![0.25; 4]);
        assert!(loss_l1(&pred[..3], &gt).is_err());
    }

    #[test]
    fn l1_gradient_matches_differences() {
        let gt = [0.3f64, -0.1, 0.7, 0.2, 0.05];
        let pred = [0.1f64, 0.4, 0.9, -0.3, 0.5];
        let (_, g) = loss_l1(&pred, &gt).unwrap();
        let h = 1e-5;
        for i in 0..pred.len() {
            let (mut a, mut b) = (pred, pred);
            a[i] += h;
            b[i] -= h;
            let n = (loss_l1(&a, &gt).unwrap().0 - loss_l1(&b, &gt).unwrap().0) / (2.0 * h);
            assert!((n - g[i]).abs() / g[i].abs() < 1e-6);
        }
    }

    #[test]
    fn desk_schedule() {
        let lrs: Vec<f64> = [0, 19, 20, 39, 40, 60, 80, 99]
            .iter()
            .map(|&e| lr_at_epoch(1e-4, &[20, 40, 60, 80], 0.5, e))
            .collect();
        assert_eq!(lrs, vec![1e-4, 1e-4, 5e-5, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6, 6.25e-6]);
    }
}
