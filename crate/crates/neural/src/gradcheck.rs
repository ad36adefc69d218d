//! Central finite-difference gradient checking. Only forward passes are used
//! to form the numerical estimate, so the result is independent of the
//! hand-written backward code it is compared against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::Layer;
use crate::loss::softmax_cross_entropy;
use crate::network::Network;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;
/// Magnitude below which gradients are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic.iter().zip(numeric).map(|(&a, &n)| rel_error(a, n)).fold(0.0, f64::max)
}

/// Central differences of a scalar function at `x`.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let plus = f(&probe);
            probe[i] = orig - step;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    /// Worst relative error over input gradients.
    pub input_error: f64,
    /// Worst relative error over parameter gradients, per parameter name.
    pub param_errors: Vec<(String, f64)>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.param_errors.iter().map(|(_, e)| *e).fold(self.input_error, f64::max)
    }
}

fn projected(layer: &mut dyn Layer, x: &Tensor, proj: &[f64], seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = layer.forward_train(x, &mut rng)?;
    Ok(out.data().iter().zip(proj).map(|(a, b)| a * b).sum())
}

/// Checks input and parameter gradients of a layer in training mode under the
/// scalar loss `sum(output * R)` for a random projection `R`.
pub fn check_layer(layer: &mut dyn Layer, x: &Tensor, seed: u64, step: f64) -> Result<GradCheckReport> {
    let fwd_seed = seed ^ 0x5eed;
    let mut rng = ChaCha8Rng::seed_from_u64(fwd_seed);
    let out = layer.forward_train(x, &mut rng)?;
    let mut proj_rng = ChaCha8Rng::seed_from_u64(seed);
    let proj: Vec<f64> = (0..out.len()).map(|_| proj_rng.random_range(-1.0..1.0)).collect();
    for p in layer.params_mut() {
        p.zero_grad();
    }
    let dx = layer.backward(&Tensor::new(out.shape().to_vec(), proj.clone())?)?;
    let analytic_params: Vec<(String, Vec<f64>)> =
        layer.params().iter().map(|p| (p.name.clone(), p.grad.clone())).collect();

    let mut failed = None;
    let numeric_dx = numeric_gradient(
        |probe| {
            let t = Tensor::new(x.shape().to_vec(), probe.to_vec()).expect("same shape");
            projected(layer, &t, &proj, fwd_seed).unwrap_or_else(|e| {
                failed = Some(e);
                f64::NAN
            })
        },
        x.data(),
        step,
    );
    if let Some(e) = failed {
        return Err(e);
    }
    let mut report = GradCheckReport {
        input_error: max_rel_error(dx.data(), &numeric_dx),
        checked: numeric_dx.len(),
        ..Default::default()
    };

    for (pi, (name, analytic)) in analytic_params.iter().enumerate() {
        let base = layer.params()[pi].value.clone();
        let mut numeric = Vec::with_capacity(base.len());
        for j in 0..base.len() {
            let mut eval = |v: f64| -> Result<f64> {
                layer.params_mut()[pi].value[j] = v;
                projected(layer, x, &proj, fwd_seed)
            };
            let plus = eval(base[j] + step)?;
            let minus = eval(base[j] - step)?;
            eval(base[j])?;
            numeric.push((plus - minus) / (2.0 * step));
        }
        report.checked += numeric.len();
        report.param_errors.push((name.clone(), max_rel_error(analytic, &numeric)));
    }
    Ok(report)
}

/// Checks softmax cross-entropy gradients w.r.t. the logits.
pub fn check_softmax_xent(logits: &Tensor, labels: &[usize], step: f64) -> Result<f64> {
    let (_, grad) = softmax_cross_entropy(logits, labels)?;
    let numeric = numeric_gradient(
        |probe| {
            let t = Tensor::new(logits.shape().to_vec(), probe.to_vec()).expect("same shape");
            softmax_cross_entropy(&t, labels).map(|(l, _)| l).unwrap_or(f64::NAN)
        },
        logits.data(),
        step,
    );
    Ok(max_rel_error(grad.data(), &numeric))
}

/// Checks every parameter gradient of a whole network under the
/// cross-entropy loss in training mode.
pub fn check_network(net: &mut Network, x: &Tensor, labels: &[usize], seed: u64, step: f64) -> Result<GradCheckReport> {
    let loss_at = |net: &mut Network| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = net.forward_train(x, &mut rng)?;
        Ok(softmax_cross_entropy(&logits, labels)?.0)
    };
    net.zero_grad();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = net.forward_train(x, &mut rng)?;
    let (_, g) = softmax_cross_entropy(&logits, labels)?;
    let dx = net.backward(&g)?;
    let analytic: Vec<(String, Vec<f64>)> = net.params().iter().map(|p| (p.name.clone(), p.grad.clone())).collect();

    let mut report = GradCheckReport::default();
    let mut numeric_dx = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut probe = x.clone();
        probe.data_mut()[i] += step;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = softmax_cross_entropy(&net.forward_train(&probe, &mut rng)?, labels)?.0;
        probe.data_mut()[i] -= 2.0 * step;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lm = softmax_cross_entropy(&net.forward_train(&probe, &mut rng)?, labels)?.0;
        numeric_dx.push((lp - lm) / (2.0 * step));
    }
    report.input_error = max_rel_error(dx.data(), &numeric_dx);
    report.checked = numeric_dx.len();

    for (pi, (name, grad)) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grad.len());
        for j in 0..grad.len() {
            let orig = net.params()[pi].value[j];
            net.params_mut()[pi].value[j] = orig + step;
            let lp = loss_at(net)?;
            net.params_mut()[pi].value[j] = orig - step;
            let lm = loss_at(net)?;
            net.params_mut()[pi].value[j] = orig;
            numeric.push((lp - lm) / (2.0 * step));
        }
        report.checked += numeric.len();
        report.param_errors.push((name.clone(), max_rel_error(grad, &numeric)));
    }
    Ok(report)
}

/// Uniform random tensor in `[-1, 1)`.
pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("sized")
}
