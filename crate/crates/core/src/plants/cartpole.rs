//! Cart-pole balancing at the upright pole position.
//!
//! State `x = (p, theta, v, omega)`: cart position and velocity, pole
//! angle from upright and angular velocity. A point mass `m` sits at the
//! tip of a massless pole of length `l` on a cart of mass `M`; the input
//! is a horizontal force on the cart. With `s = sin(theta)`,
//! `c = cos(theta)`:
//!
//! ```text
//! vdot     = (u + m l omega^2 s - m g s c) / (M + m s^2)
//! omegadot = (g s - vdot c) / l
//! ```

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::plants::{DomainBox, InputBound, Plant};

#[derive(Debug, Clone)]
pub struct CartPole {
    cart_mass: f64,
    pole_mass: f64,
    pole_length: f64,
    gravity: f64,
    domain: DomainBox,
    bound: InputBound,
}

impl CartPole {
    /// Benchmark instance: 1 kg cart, 0.3 kg pole mass, 0.5 m pole,
    /// force bound 50 N, domain `p in [-2,2], theta in [-0.8,0.8],
    /// v in [-2,2], omega in [-2,2]`.
    pub fn standard() -> Self {
        CartPole::new(
            1.0,
            0.3,
            0.5,
            9.81,
            DomainBox::new(vec![-2.0, -0.8, -2.0, -2.0], vec![2.0, 0.8, 2.0, 2.0]).unwrap(),
            InputBound::Norm(50.0),
        )
        .unwrap()
    }

    pub fn new(
        cart_mass: f64,
        pole_mass: f64,
        pole_length: f64,
        gravity: f64,
        domain: DomainBox,
        bound: InputBound,
    ) -> Result<Self> {
        if !(cart_mass > 0.0) || !(pole_mass > 0.0) || !(pole_length > 0.0) || !(gravity > 0.0) {
            return Err(Error::Config(
                "cart-pole masses, length and gravity must be positive".to_string(),
            ));
        }
        if domain.dim() != 4 {
            return Err(Error::Config(format!(
                "cart-pole state has dimension 4, domain has {}",
                domain.dim()
            )));
        }
        bound.validate(1)?;
        Ok(CartPole {
            cart_mass,
            pole_mass,
            pole_length,
            gravity,
            domain,
            bound,
        })
    }

    pub fn cart_mass(&self) -> f64 {
        self.cart_mass
    }

    pub fn pole_mass(&self) -> f64 {
        self.pole_mass
    }

    pub fn pole_length(&self) -> f64 {
        self.pole_length
    }
}

impl Plant for CartPole {
    fn name(&self) -> &str {
        "cartpole"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn deriv(&self, x: &[f64], u: &[f64]) -> Vector {
        debug_assert_eq!(x.len(), 4);
        debug_assert_eq!(u.len(), 1);
        let (theta, v, omega) = (x[1], x[2], x[3]);
        let (m, l, g) = (self.pole_mass, self.pole_length, self.gravity);
        let s = theta.sin();
        let c = theta.cos();
        let vdot =
            (u[0] + m * l * omega * omega * s - m * g * s * c) / (self.cart_mass + m * s * s);
        let omegadot = (g * s - vdot * c) / l;
        vec![v, omega, vdot, omegadot]
    }

    fn state_domain(&self) -> &DomainBox {
        &self.domain
    }

    fn input_bound(&self) -> &InputBound {
        &self.bound
    }

    /// Only the pole must come to rest; the cart may settle anywhere.
    fn convergence_mask(&self) -> Vec<bool> {
        vec![false, true, false, true]
    }

    /// Pole angle and angular velocity.
    fn plot_coords(&self) -> (usize, usize) {
        (1, 3)
    }
}
