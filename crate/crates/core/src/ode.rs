//! Fixed-step explicit integration.

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// One classical Runge-Kutta 4 step of size `h` for autonomous dynamics.
///
/// `deriv` is evaluated four times; any non-finite component in a stage
/// derivative aborts with a simulation error carrying the state at which
/// the derivative was requested.
pub fn rk4_step<F>(deriv: F, x: &[f64], h: f64) -> Result<Vector>
where
    F: Fn(&[f64]) -> Vector,
{
    if !(h > 0.0) {
        return Err(Error::Config(format!("rk4_step requires h > 0, got {h}")));
    }
    let n = x.len();
    let eval = |point: &[f64]| -> Result<Vector> {
        let d = deriv(point);
        debug_assert_eq!(d.len(), n, "derivative dimension mismatch");
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation {
                message: "non-finite derivative".to_string(),
                state: point.to_vec(),
            });
        }
        Ok(d)
    };

    let k1 = eval(x)?;
    let mut stage = vec![0.0; n];
    for i in 0..n {
        stage[i] = x[i] + 0.5 * h * k1[i];
    }
    let k2 = eval(&stage)?;
    for i in 0..n {
        stage[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = eval(&stage)?;
    for i in 0..n {
        stage[i] = x[i] + h * k3[i];
    }
    let k4 = eval(&stage)?;

    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(x: &[f64]) -> Vector {
        x.iter().map(|v| -v).collect()
    }

    #[test]
    fn single_step_matches_hand_computed_value() {
        // dx/dt = -x from x = 1 with h = 0.1: the RK4 update equals the
        // fourth-order Taylor truncation 1 - h + h^2/2 - h^3/6 + h^4/24.
        let x = rk4_step(decay, &[1.0], 0.1).unwrap();
        assert!((x[0] - 0.90483750).abs() < 1e-7, "got {}", x[0]);
    }

    #[test]
    fn step_halving_shows_fourth_order() {
        // Reaching t = 0.1 with one step of h versus two steps of h/2:
        // the global error contracts by roughly 2^4.
        let exact = (-0.1f64).exp();
        let one = rk4_step(decay, &[1.0], 0.1).unwrap();
        let half = rk4_step(decay, &[1.0], 0.05).unwrap();
        let two = rk4_step(decay, &half, 0.05).unwrap();
        let err_coarse = (one[0] - exact).abs();
        let err_fine = (two[0] - exact).abs();
        let ratio = err_coarse / err_fine;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "error ratio {ratio} outside [12, 20]"
        );
    }

    #[test]
    fn rejects_non_positive_step() {
        assert!(matches!(
            rk4_step(decay, &[1.0], 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            rk4_step(decay, &[1.0], -0.1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn non_finite_derivative_reports_offending_state() {
        let bad = |p: &[f64]| vec![if p[0] > 1.05 { f64::NAN } else { 10.0 }];
        let err = rk4_step(bad, &[1.0], 0.1).unwrap_err();
        match err {
            Error::Simulation { state, .. } => {
                // The failure happens at a stage point, not the start state.
                assert!(state[0] > 1.05);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
