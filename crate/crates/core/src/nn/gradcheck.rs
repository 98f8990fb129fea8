use crate::error::{Error, Result};

use super::ParamSet;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor so that entries whose true gradient is ~0 are compared
/// on an absolute scale instead of blowing up the ratio.
const REL_FLOOR: f64 = 1e-8;

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Compares the gradients already stored in `model`'s parameters with central
/// differences of `loss`. Every value is perturbed in place and restored.
pub fn grad_check<M, F>(model: &mut M, mut loss: F, tolerance: f64) -> Result<GradCheckReport>
where
    M: ParamSet<f64>,
    F: FnMut(&M) -> Result<f64>,
{
    let count = model.params().len();
    let mut report = GradCheckReport {
        tolerance,
        params: Vec::with_capacity(count),
    };
    let base = loss(model)?;
    if !base.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss {base} at unperturbed parameters"
        )));
    }

    for pi in 0..count {
        let (name, len) = {
            let p = model.params()[pi];
            (p.name.clone(), p.value.len())
        };
        let mut check = ParamCheck {
            name,
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for j in 0..len {
            let original = model.params()[pi].value.data()[j];
            model.params_mut()[pi].value.data_mut()[j] = original + FD_STEP;
            let plus = loss(model)?;
            model.params_mut()[pi].value.data_mut()[j] = original - FD_STEP;
            let minus = loss(model)?;
            model.params_mut()[pi].value.data_mut()[j] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing {}[{j}]",
                    check.name
                )));
            }
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = model.params()[pi].grad.data()[j];
            let err = relative_error(analytic, numeric);
            if err > check.max_rel_error || j == 0 {
                check.max_rel_error = err;
                check.worst_index = j;
                check.analytic = analytic;
                check.numeric = numeric;
            }
        }
        report.params.push(check);
    }
    Ok(report)
}
