//! Discrete-time LQR baseline on a finite-difference linearization.
//!
//! The plant is linearized about the origin by central differences on
//! its derivative queries (the same black-box access the learner gets),
//! discretized with a forward-Euler step matching the simulator, and the
//! discrete algebraic Riccati equation is solved by fixed-point
//! iteration. The resulting state feedback is clamped to the plant's
//! input bound when applied.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::plants::{InputBound, Plant};

/// Central-difference linearization `dx/dt ~ A x + B u` about `(0, 0)`.
pub fn linearize(plant: &dyn Plant, step: f64) -> Result<(Matrix, Matrix)> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let n = plant.state_dim();
    let m = plant.input_dim();
    let zero_x = vec![0.0; n];
    let zero_u = vec![0.0; m];
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        let mut xp = zero_x.clone();
        xp[i] = step;
        let mut xm = zero_x.clone();
        xm[i] = -step;
        let fp = plant.deriv(&xp, &zero_u);
        let fm = plant.deriv(&xm, &zero_u);
        for r in 0..n {
            a.set(r, i, (fp[r] - fm[r]) / (2.0 * step));
        }
    }
    let mut b = Matrix::zeros(n, m);
    for j in 0..m {
        let mut up = zero_u.clone();
        up[j] = step;
        let mut um = zero_u.clone();
        um[j] = -step;
        let fp = plant.deriv(&zero_x, &up);
        let fm = plant.deriv(&zero_x, &um);
        for r in 0..n {
            b.set(r, j, (fp[r] - fm[r]) / (2.0 * step));
        }
    }
    Ok((a, b))
}

/// Solves the discrete algebraic Riccati equation
/// `P = Q + A^T (P - P B (R + B^T P B)^{-1} B^T P) A`
/// by fixed-point iteration from `P = Q`.
pub fn solve_dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let m = b.cols();
    if a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n {
        return Err(Error::Config("Riccati dimensions disagree".to_string()));
    }
    if r.rows() != m || r.cols() != m {
        return Err(Error::Config(format!(
            "input weight is {}x{}, expected {}x{}",
            r.rows(),
            r.cols(),
            m,
            m
        )));
    }
    const TOL: f64 = 1e-10;
    const MAX_ITERS: usize = 100_000;
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    for _ in 0..MAX_ITERS {
        let pa = p.matmul(a);
        let pb = p.matmul(b);
        let btpb = bt.matmul(&pb);
        let gain_lhs = r.add(&btpb);
        let btpa = bt.matmul(&pa);
        let k = gain_lhs.solve_mat(&btpa).map_err(|_| {
            Error::Baseline("Riccati gain system is singular".to_string())
        })?;
        let mut next = q.add(&at.matmul(&pa)).sub(&btpa.transpose().matmul(&k));
        // Symmetrize to stop round-off drift across iterations.
        next = next.add(&next.transpose()).scale(0.5);
        if !next.data().iter().all(|v| v.is_finite()) {
            return Err(Error::Baseline(
                "Riccati iteration diverged".to_string(),
            ));
        }
        let delta = next.max_abs_diff(&p);
        p = next;
        if delta < TOL {
            return Ok(p);
        }
    }
    Err(Error::Baseline(format!(
        "Riccati iteration did not converge within {MAX_ITERS} iterations"
    )))
}

/// A clamped linear state-feedback baseline `u = clamp(-K x)`.
#[derive(Debug, Clone)]
pub struct LqrGain {
    k: Matrix,
    p: Matrix,
    bound: InputBound,
}

impl LqrGain {
    pub fn gain(&self) -> &Matrix {
        &self.k
    }

    pub fn riccati(&self) -> &Matrix {
        &self.p
    }

    /// The feedback law, projected into the admissible input set.
    pub fn control(&self, x: &[f64]) -> Vector {
        let kx = self.k.matvec(x);
        let raw: Vector = kx.iter().map(|v| -v).collect();
        self.bound.clamp(&raw)
    }
}

/// Designs the baseline: linearize, discretize at the simulator step,
/// solve the Riccati equation, and wrap the gain with the plant's input
/// clamp.
pub fn lqr_gain(
    plant: &dyn Plant,
    q: &Matrix,
    r: &Matrix,
    fd_step: f64,
    dt: f64,
) -> Result<LqrGain> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let n = plant.state_dim();
    if q.rows() != n || q.cols() != n {
        return Err(Error::Config(format!(
            "state weight is {}x{} for an {}-state plant",
            q.rows(),
            q.cols(),
            n
        )));
    }
    let (ac, bc) = linearize(plant, fd_step)?;
    let ad = Matrix::identity(n).add(&ac.scale(dt));
    let bd = bc.scale(dt);
    let p = solve_dare(&ad, &bd, q, r)?;
    let bt = bd.transpose();
    let gain_lhs = r.add(&bt.matmul(&p.matmul(&bd)));
    let k = gain_lhs
        .solve_mat(&bt.matmul(&p.matmul(&ad)))
        .map_err(|_| Error::Baseline("Riccati gain system is singular".to_string()))?;
    Ok(LqrGain {
        k,
        p,
        bound: plant.input_bound().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::sim::{simulate_closed_loop, SimConfig};
    use crate::linalg::norm;
    use crate::plants::PendulumNLink;
    use crate::stability::StabilityConfig;

    #[test]
    fn scalar_riccati_hits_the_golden_ratio() {
        // a = b = q = r = 1 gives p^2 = p + 1, so p is the golden ratio
        // and the gain is its reciprocal.
        let one = Matrix::identity(1);
        let p = solve_dare(&one, &one, &one, &one).unwrap();
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((p.at(0, 0) - phi).abs() < 1e-9, "p = {}", p.at(0, 0));
        let k = p.at(0, 0) / (1.0 + p.at(0, 0));
        assert!((k - (5.0f64.sqrt() - 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn dare_reports_non_convergence_for_uncontrollable_growth() {
        // a = 2 with no input authority: P blows up.
        let a = Matrix::from_vec(1, 1, vec![2.0]);
        let b = Matrix::zeros(1, 1);
        let q = Matrix::identity(1);
        let r = Matrix::identity(1);
        let err = solve_dare(&a, &b, &q, &r).unwrap_err();
        assert!(matches!(err, Error::Baseline(_)), "{err}");
    }

    #[test]
    fn linearization_recovers_the_pendulum_jacobian() {
        // One link, unit mass and length: about the upright origin,
        // d(omega')/d(theta) = g and d(omega')/du = 1.
        let plant = PendulumNLink::standard(1).unwrap();
        let (a, b) = linearize(&plant, 1e-5).unwrap();
        assert!((a.at(0, 0)).abs() < 1e-8);
        assert!((a.at(0, 1) - 1.0).abs() < 1e-8);
        assert!((a.at(1, 0) - 9.81).abs() < 1e-6);
        assert!((a.at(1, 1)).abs() < 1e-8);
        assert!((b.at(0, 0)).abs() < 1e-8);
        assert!((b.at(1, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lqr_stabilizes_the_inverted_pendulum() {
        let plant = PendulumNLink::standard(1).unwrap();
        let gain = lqr_gain(
            &plant,
            &Matrix::identity(2),
            &Matrix::identity(1),
            1e-5,
            0.01,
        )
        .unwrap();
        let stab = StabilityConfig::diagonal(&[0.9, 0.1], 0.5, 1e-12).unwrap();
        let cfg = SimConfig { horizon: 8.0, dt: 0.01 };
        let mut policy = |x: &[f64]| gain.control(x);
        let traj =
            simulate_closed_loop(&plant, &mut policy, &[0.5, 0.0], &stab, &cfg).unwrap();
        assert!(!traj.left_domain);
        assert!(
            norm(traj.final_state()) < 1e-3,
            "final state {:?}",
            traj.final_state()
        );
    }

    #[test]
    fn control_is_clamped_to_the_input_bound() {
        let plant = PendulumNLink::standard(1).unwrap();
        let gain = lqr_gain(
            &plant,
            &Matrix::identity(2).scale(100.0),
            &Matrix::identity(1).scale(1e-4),
            1e-5,
            0.01,
        )
        .unwrap();
        // An aggressive design saturates far from the origin.
        let u = gain.control(&[3.0, 3.0]);
        assert!(plant.input_bound().contains(&u));
        assert!((norm(&u) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_checks() {
        let plant = PendulumNLink::standard(1).unwrap();
        assert!(lqr_gain(&plant, &Matrix::identity(3), &Matrix::identity(1), 1e-5, 0.01).is_err());
        assert!(linearize(&plant, 0.0).is_err());
        let a = Matrix::identity(2);
        let b = Matrix::zeros(1, 1);
        assert!(solve_dare(&a, &b, &Matrix::identity(2), &Matrix::identity(1)).is_err());
    }
}
