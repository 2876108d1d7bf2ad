//! Fully actuated n-link pendulum balancing at the upright posture.
//!
//! Each link is a massless rod of length `l_i` with a point mass `m_i`
//! at its tip. Angles are absolute and measured from the upright
//! direction, so the origin of the state
//! `x = (theta_1..theta_n, omega_1..omega_n)` is the balanced posture.
//! With `c_jk = sum of m_i over i >= max(j,k)` the manipulator equations
//! `M(q) qdd + C(q, qd) + G(q) = tau` have
//!
//! ```text
//! M_jk = c_jk l_j l_k cos(theta_j - theta_k)
//! C_j  = sum_k c_jk l_j l_k sin(theta_j - theta_k) omega_k^2
//! G_j  = -g a_j l_j sin(theta_j),   a_j = c_jj
//! ```
//!
//! One torque acts on each angle coordinate (`m = n`), bounded in norm.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::plants::{DomainBox, InputBound, Plant};

#[derive(Debug, Clone)]
pub struct PendulumNLink {
    links: usize,
    masses: Vector,
    lengths: Vector,
    gravity: f64,
    domain: DomainBox,
    bound: InputBound,
    name: String,
    /// c[j][k] = sum of masses at or beyond link max(j, k).
    mass_tails: Matrix,
}

impl PendulumNLink {
    /// Standard benchmark instance: unit masses and lengths,
    /// `g = 9.81`, domain `[-1, 1]^(2n)`, torque norm bound `10 sqrt(n)`.
    pub fn standard(links: usize) -> Result<Self> {
        if !(1..=3).contains(&links) {
            return Err(Error::Config(format!(
                "pendulum supports 1 to 3 links, got {links}"
            )));
        }
        PendulumNLink::new(
            links,
            vec![1.0; links],
            vec![1.0; links],
            9.81,
            DomainBox::symmetric(1.0, 2 * links),
            InputBound::Norm(10.0 * (links as f64).sqrt()),
        )
    }

    pub fn new(
        links: usize,
        masses: Vector,
        lengths: Vector,
        gravity: f64,
        domain: DomainBox,
        bound: InputBound,
    ) -> Result<Self> {
        if !(1..=3).contains(&links) {
            return Err(Error::Config(format!(
                "pendulum supports 1 to 3 links, got {links}"
            )));
        }
        if masses.len() != links || lengths.len() != links {
            return Err(Error::Config(format!(
                "pendulum with {links} links needs {links} masses and lengths, got {} and {}",
                masses.len(),
                lengths.len()
            )));
        }
        if masses.iter().chain(lengths.iter()).any(|&v| !(v > 0.0)) {
            return Err(Error::Config(
                "pendulum masses and lengths must be positive".to_string(),
            ));
        }
        if !(gravity > 0.0) {
            return Err(Error::Config(format!("gravity must be positive, got {gravity}")));
        }
        if domain.dim() != 2 * links {
            return Err(Error::Config(format!(
                "pendulum state has dimension {}, domain has {}",
                2 * links,
                domain.dim()
            )));
        }
        bound.validate(links)?;
        let mut mass_tails = Matrix::zeros(links, links);
        for j in 0..links {
            for k in 0..links {
                let tail: f64 = masses[j.max(k)..].iter().sum();
                mass_tails.set(j, k, tail);
            }
        }
        Ok(PendulumNLink {
            links,
            masses,
            lengths,
            gravity,
            domain,
            bound,
            name: format!("pendulum{links}"),
            mass_tails,
        })
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    fn mass_matrix(&self, theta: &[f64]) -> Matrix {
        let n = self.links;
        let mut m = Matrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let v = self.mass_tails.at(j, k)
                    * self.lengths[j]
                    * self.lengths[k]
                    * (theta[j] - theta[k]).cos();
                m.set(j, k, v);
            }
        }
        m
    }

    /// Kinetic plus potential energy with the potential zero at the
    /// hanging-down posture, so the value is non-negative. Useful as a
    /// conservation oracle for the unforced system.
    pub fn mechanical_energy(&self, x: &[f64]) -> f64 {
        let n = self.links;
        let (theta, omega) = x.split_at(n);
        let m = self.mass_matrix(theta);
        let mut kinetic = 0.0;
        for j in 0..n {
            for k in 0..n {
                kinetic += 0.5 * m.at(j, k) * omega[j] * omega[k];
            }
        }
        let mut potential = 0.0;
        for j in 0..n {
            potential +=
                self.gravity * self.mass_tails.at(j, j) * self.lengths[j] * (1.0 + theta[j].cos());
        }
        kinetic + potential
    }
}

impl Plant for PendulumNLink {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        2 * self.links
    }

    fn input_dim(&self) -> usize {
        self.links
    }

    fn deriv(&self, x: &[f64], u: &[f64]) -> Vector {
        debug_assert_eq!(x.len(), 2 * self.links);
        debug_assert_eq!(u.len(), self.links);
        let n = self.links;
        let (theta, omega) = x.split_at(n);
        let m = self.mass_matrix(theta);
        let mut rhs = vec![0.0; n];
        for j in 0..n {
            let mut coriolis = 0.0;
            for k in 0..n {
                coriolis += self.mass_tails.at(j, k)
                    * self.lengths[j]
                    * self.lengths[k]
                    * (theta[j] - theta[k]).sin()
                    * omega[k]
                    * omega[k];
            }
            let gravity_term =
                -self.gravity * self.mass_tails.at(j, j) * self.lengths[j] * theta[j].sin();
            rhs[j] = u[j] - coriolis - gravity_term;
        }
        // M is positive definite for distinct-point-mass chains over the
        // whole state space; the solve cannot encounter a zero pivot.
        let acc = m
            .solve(&rhs)
            .expect("pendulum mass matrix is positive definite");
        let mut dx = Vec::with_capacity(2 * n);
        dx.extend_from_slice(omega);
        dx.extend_from_slice(&acc);
        dx
    }

    fn state_domain(&self) -> &DomainBox {
        &self.domain
    }

    fn input_bound(&self) -> &InputBound {
        &self.bound
    }

    /// Last link's angle and velocity.
    fn plot_coords(&self) -> (usize, usize) {
        (self.links - 1, 2 * self.links - 1)
    }
}
