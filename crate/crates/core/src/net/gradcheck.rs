//! Central finite-difference verification of network gradients.

use super::model::{backward, forward, ForwardOutputs, NetworkSpec, NetworkState, OutputGrads};
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    /// Maximum allowed `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub tolerance: f64,
    pub floor: f64,
    /// Coordinates whose one-sided differences disagree by more than this
    /// (relative) straddle a kink (ReLU, max, argmax, |.|) and are skipped.
    pub kink_tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            kink_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst_failure().is_none()
    }

    /// Name of the tensor with the largest error above tolerance.
    pub fn worst_failure(&self) -> Option<&str> {
        self.tensors
            .iter()
            .filter(|t| t.max_rel_error > self.tolerance)
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
            .map(|t| t.name.as_str())
    }

    pub fn into_result(self) -> Result<Self> {
        match self.worst_failure() {
            Some(name) => Err(Error::InvalidArgument(format!(
                "gradient check failed for {name} (max relative error {:.3e})",
                self.max_rel_error()
            ))),
            None => Ok(self),
        }
    }
}

/// Compares analytic gradients of `loss` against central differences for
/// every scalar parameter. `loss` maps network outputs to a value and the
/// upstream output gradients.
pub fn gradcheck<F>(
    spec: &NetworkSpec,
    state: &NetworkState<f64>,
    image: &Grid<f64>,
    loss: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&ForwardOutputs<f64>) -> Result<(f64, OutputGrads<f64>)>,
{
    let outputs = forward(spec, state, image, true)?;
    let (_, grads_out) = loss(&outputs)?;
    let analytic = backward(spec, state, &outputs, &grads_out)?;

    let eval = |s: &NetworkState<f64>| -> Result<f64> {
        let out = forward(spec, s, image, false)?;
        Ok(loss(&out)?.0)
    };
    let base = eval(state)?;

    let mut probe = state.clone();
    let names: Vec<String> = state.tensors().into_iter().map(|(n, _)| n).collect();
    let analytic_tensors: Vec<Vec<f64>> = analytic.tensors().into_iter().map(|(_, t)| t.data().to_vec()).collect();
    let mut tensors = Vec::with_capacity(names.len());
    for (ti, name) in names.iter().enumerate() {
        let len = analytic_tensors[ti].len();
        let mut check = TensorCheck {
            name: name.clone(),
            max_rel_error: 0.0,
            checked: 0,
            skipped_kinks: 0,
        };
        for idx in 0..len {
            let orig = state.tensors()[ti].1.data()[idx];
            let set = |p: &mut NetworkState<f64>, v: f64| {
                p.tensors_mut().swap_remove(ti).1.data_mut()[idx] = v;
            };
            set(&mut probe, orig + cfg.epsilon);
            let plus = eval(&probe)?;
            set(&mut probe, orig - cfg.epsilon);
            let minus = eval(&probe)?;
            set(&mut probe, orig);

            let fwd = (plus - base) / cfg.epsilon;
            let bwd = (base - minus) / cfg.epsilon;
            let scale = fwd.abs().max(bwd.abs()).max(cfg.floor);
            if (fwd - bwd).abs() / scale > cfg.kink_tolerance {
                check.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * cfg.epsilon);
            let a = analytic_tensors[ti][idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            check.max_rel_error = check.max_rel_error.max(rel);
            check.checked += 1;
        }
        tensors.push(check);
    }
    Ok(GradCheckReport {
        tensors,
        tolerance: cfg.tolerance,
    })
}
