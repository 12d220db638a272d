//! Adaptive Dormand-Prince 5(4) integration for flow generation and leaf
//! tracing. Deterministic: step-size control depends only on the field
//! values, never on timing or thread interleaving.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Integrator controls: mixed absolute/relative tolerance, initial step,
/// and a hard cap on accepted plus rejected steps.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub tol: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { tol: 1e-10, h_init: 1e-2, max_steps: 100_000 }
    }
}

const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;
const SAFETY: f64 = 0.9;

/// Integrate y' = f(t, y) from t0 to t1 (either direction) and return
/// y(t1). Errors if the step count cap is reached or the state stops being
/// finite.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y0: &DVector<f64>, opts: &OdeOptions) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    if t1 == t0 {
        return Ok(y0.clone());
    }
    let direction = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = direction * opts.h_init.min(span).max(span * 1e-12);
    let mut k1 = f(t, &y);

    for _ in 0..opts.max_steps {
        if ((t1 - t) * direction) <= 0.0 {
            return Ok(y);
        }
        if (h * direction) > ((t1 - t) * direction) {
            h = t1 - t;
        }

        // Dormand-Prince stages.
        let k2 = f(t + h / 5.0, &(&y + h / 5.0 * &k1));
        let k3 = f(t + 3.0 / 10.0 * h, &(&y + h * (3.0 / 40.0 * &k1 + 9.0 / 40.0 * &k2)));
        let k4 = f(
            t + 4.0 / 5.0 * h,
            &(&y + h * (44.0 / 45.0 * &k1 - 56.0 / 15.0 * &k2 + 32.0 / 9.0 * &k3)),
        );
        let k5 = f(
            t + 8.0 / 9.0 * h,
            &(&y
                + h * (19372.0 / 6561.0 * &k1 - 25360.0 / 2187.0 * &k2 + 64448.0 / 6561.0 * &k3
                    - 212.0 / 729.0 * &k4)),
        );
        let k6 = f(
            t + h,
            &(&y
                + h * (9017.0 / 3168.0 * &k1 - 355.0 / 33.0 * &k2 + 46732.0 / 5247.0 * &k3
                    + 49.0 / 176.0 * &k4
                    - 5103.0 / 18656.0 * &k5)),
        );
        // Fifth-order solution (its final stage doubles as the error probe).
        let y5 = &y
            + h * (35.0 / 384.0 * &k1 + 500.0 / 1113.0 * &k3 + 125.0 / 192.0 * &k4
                - 2187.0 / 6784.0 * &k5
                + 11.0 / 84.0 * &k6);
        let k7 = f(t + h, &y5);
        let y4 = &y
            + h * (5179.0 / 57600.0 * &k1 + 7571.0 / 16695.0 * &k3 + 393.0 / 640.0 * &k4
                - 92097.0 / 339200.0 * &k5
                + 187.0 / 2100.0 * &k6
                + 1.0 / 40.0 * &k7);

        let scale = opts.tol + opts.tol * y.amax().max(y5.amax());
        let err = (&y5 - &y4).amax() / scale;
        if !err.is_finite() {
            return Err(Error::Integration(format!("non-finite state near t = {t}")));
        }

        if err <= 1.0 {
            t += h;
            y = y5;
            k1 = k7;
        }
        let grow = if err == 0.0 { MAX_SCALE } else { SAFETY * err.powf(-0.2) };
        h *= grow.clamp(MIN_SCALE, MAX_SCALE);
        if h.abs() < 1e-14 * span {
            return Err(Error::Integration(format!("step size underflow near t = {t}")));
        }
    }
    Err(Error::Integration(format!(
        "step cap {} reached at t = {t} (target {t1})",
        opts.max_steps
    )))
}

/// Classical fixed-step fourth-order integration. Used as an independent
/// cross-check of the adaptive integrator in tests; exposed for oracles.
pub fn integrate_rk4<F>(f: F, t0: f64, t1: f64, y0: &DVector<f64>, steps: usize) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.clone();
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + h / 2.0, &(&y + h / 2.0 * &k1));
        let k3 = f(t + h / 2.0, &(&y + h / 2.0 * &k2));
        let k4 = f(t + h, &(&y + h * &k3));
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_matches_closed_form() {
        let y0 = DVector::from_vec(vec![1.0]);
        let y = integrate(|_, y| y.clone(), 0.0, 1.0, &y0, &OdeOptions::default()).unwrap();
        assert!((y[0] - std::f64::consts::E).abs() < 1e-9, "{}", y[0]);
    }

    #[test]
    fn harmonic_oscillator_round_trip() {
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let f = |_: f64, y: &DVector<f64>| DVector::from_vec(vec![y[1], -y[0]]);
        let y = integrate(f, 0.0, std::f64::consts::TAU, &y0, &OdeOptions::default()).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y}");
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let f = |t: f64, y: &DVector<f64>| DVector::from_vec(vec![(y[0] * 0.3).sin() + t]);
        let y0 = DVector::from_vec(vec![0.7]);
        let opts = OdeOptions::default();
        let y1 = integrate(f, 0.0, 1.0, &y0, &opts).unwrap();
        let back = integrate(f, 1.0, 0.0, &y1, &opts).unwrap();
        assert!((back[0] - y0[0]).abs() < 1e-9, "{back}");
    }

    #[test]
    fn adaptive_and_fixed_step_agree() {
        let f = |t: f64, y: &DVector<f64>| {
            DVector::from_vec(vec![y[1], -y[0] * (1.0 + 0.3 * t)])
        };
        let y0 = DVector::from_vec(vec![0.2, -0.1]);
        let a = integrate(&f, 0.0, 2.0, &y0, &OdeOptions::default()).unwrap();
        let b = integrate_rk4(&f, 0.0, 2.0, &y0, 20_000);
        assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn step_cap_is_an_error() {
        let opts = OdeOptions { max_steps: 3, ..OdeOptions::default() };
        let y0 = DVector::from_vec(vec![1.0]);
        let out = integrate(|_, y| y.clone(), 0.0, 50.0, &y0, &opts);
        assert!(matches!(out, Err(Error::Integration(_))));
    }
}
