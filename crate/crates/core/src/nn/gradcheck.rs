//! Central finite-difference gradient checking.

use super::Module;

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    /// `max_i |a_i - n_i| / max(|a_i|, |n_i|, REL_FLOOR)`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst_index: usize,
    pub n_checked: usize,
}

impl GradReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance
    }

    pub fn merge(self, other: GradReport) -> GradReport {
        if other.max_rel_err > self.max_rel_err {
            GradReport {
                n_checked: self.n_checked + other.n_checked,
                max_abs_err: self.max_abs_err.max(other.max_abs_err),
                ..other
            }
        } else {
            GradReport {
                n_checked: self.n_checked + other.n_checked,
                max_abs_err: self.max_abs_err.max(other.max_abs_err),
                ..self
            }
        }
    }
}

impl Default for GradReport {
    fn default() -> Self {
        Self {
            max_rel_err: 0.0,
            max_abs_err: 0.0,
            worst_index: 0,
            n_checked: 0,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare the analytic gradient returned by `f` at `x0` with central
/// differences of its value.
pub fn grad_check<F>(x0: &[f64], mut f: F) -> GradReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(x0);
    assert_eq!(analytic.len(), x0.len(), "gradient length mismatch");
    let mut x = x0.to_vec();
    let mut report = GradReport {
        n_checked: x0.len(),
        ..Default::default()
    };
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let up = f(&x).0;
        x[i] = orig - FD_STEP;
        let down = f(&x).0;
        x[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = relative_error(analytic[i], numeric);
        report.max_abs_err = report.max_abs_err.max((analytic[i] - numeric).abs());
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    report
}

/// Check parameter gradients of a module. `f` must zero the gradients,
/// run forward and backward, and return the scalar loss.
pub fn check_module<M, F>(mut m: M, mut f: F) -> GradReport
where
    M: Module,
    F: FnMut(&mut M) -> f64,
{
    let x0 = m.flat_values();
    grad_check(&x0, |x| {
        m.set_flat_values(x);
        let val = f(&mut m);
        (val, m.flat_grads())
    })
}

/// Check an input gradient.
pub fn check_input<F>(x0: &[f64], f: F) -> GradReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    grad_check(x0, f)
}
