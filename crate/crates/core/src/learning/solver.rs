//! Accelerated proximal gradient with backtracking and monotone restarts.

use crate::error::{FusionError, Result};
use crate::learning::objective::Penalized;
use crate::model::Diagnostics;

/// Soft-thresholding, the proximal operator of `τ|x|`.
#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

pub(crate) struct SolverSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub step_size: f64,
}

/// Minimize `problem` starting from `x0`.
///
/// Every accepted iterate decreases the full objective, so the returned point
/// is never worse than `x0`. Stops when the relative decrease of an accepted
/// step falls below `tol`.
pub(crate) fn minimize(
    problem: &Penalized<'_>,
    x0: Vec<f64>,
    settings: &SolverSettings,
) -> Result<(Vec<f64>, Diagnostics)> {
    let feats = problem.feature_range();
    let l1 = problem.l1;
    let full = |smooth: f64, x: &[f64]| smooth + problem.l1_term(x);

    let mut x = x0;
    let (fx_smooth, gx) = problem.smooth_value_grad(&x);
    check_finite(fx_smooth, &gx)?;
    let mut fx = full(fx_smooth, &x);
    if settings.max_iters == 0 {
        return Ok((
            x,
            Diagnostics {
                iterations: 0,
                objective: fx,
                converged: false,
            },
        ));
    }

    let mut y = x.clone();
    let mut y_eval = Some((fx_smooth, gx));
    let mut theta = 1.0_f64;
    let mut t = settings.step_size;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iters {
        iterations += 1;
        let (fy, gy) = match y_eval.take() {
            Some(e) => e,
            None => problem.smooth_value_grad(&y),
        };
        check_finite(fy, &gy)?;

        let mut z = vec![0.0; y.len()];
        let mut fz;
        let mut gz;
        loop {
            for i in 0..y.len() {
                let step = y[i] - t * gy[i];
                z[i] = if feats.contains(&i) && problem.is_free(i) {
                    soft_threshold(step, t * l1)
                } else {
                    step
                };
            }
            (fz, gz) = problem.smooth_value_grad(&z);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..y.len() {
                let d = z[i] - y[i];
                lin += gy[i] * d;
                sq += d * d;
            }
            let bound = fy + lin + sq / (2.0 * t);
            if fz.is_finite() && fz <= bound + 1e-12 * fy.abs().max(1.0) {
                break;
            }
            t *= 0.5;
            if t < 1e-30 {
                return Err(FusionError::NonFinite(
                    "step size underflow in proximal gradient".into(),
                ));
            }
        }
        check_finite(fz, &gz)?;
        let f_new = full(fz, &z);

        if f_new > fx || (f_new == fx && z == x) {
            // momentum overshoot: restart from the last accepted point
            if y == x {
                converged = true;
                break;
            }
            theta = 1.0;
            y = x.clone();
            continue;
        }

        let decrease = fx - f_new;
        let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        let beta = (theta - 1.0) / theta_next;
        let mut y_next = z.clone();
        if beta != 0.0 {
            for i in 0..y_next.len() {
                y_next[i] += beta * (z[i] - x[i]);
            }
            y_eval = None;
        } else {
            y_eval = Some((fz, gz));
        }
        x = z;
        fx = f_new;
        y = y_next;
        theta = theta_next;
        t = (t * 1.25).min(settings.step_size);
        if decrease <= settings.tol * fx.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok((
        x,
        Diagnostics {
            iterations,
            objective: fx,
            converged,
        },
    ))
}

fn check_finite(value: f64, grad: &[f64]) -> Result<()> {
    if !value.is_finite() {
        return Err(FusionError::NonFinite(format!("objective value {value}")));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(FusionError::NonFinite(format!(
            "gradient component {i} is {}",
            grad[i]
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_shrinks() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-1.0, 1.0), 0.0);
    }
}
