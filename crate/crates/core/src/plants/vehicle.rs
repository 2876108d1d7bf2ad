//! Wheeled vehicle tracking a straight reference path.
//!
//! Error coordinates `x = (d_e, theta_e)`: front-axle crosstrack distance
//! and heading error. The vehicle moves at constant speed `v0` with
//! wheelbase `L`; the input is the steering angle:
//!
//! ```text
//! d_e_dot     = v0 sin(theta_e + u)
//! theta_e_dot = (v0 / L) sin(u)
//! ```
//!
//! Perfect tracking is the origin, which is an equilibrium under zero
//! steering (though not an attracting one: the plant needs feedback).

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::plants::{DomainBox, InputBound, Plant};

#[derive(Debug, Clone)]
pub struct WheeledVehicle {
    speed: f64,
    wheelbase: f64,
    domain: DomainBox,
    bound: InputBound,
}

impl WheeledVehicle {
    /// Benchmark instance: `v0 = 2 m/s`, `L = 1 m`, steering bound
    /// `pi/6`, domain `d_e in [-2,2], theta_e in [-1,1]`.
    pub fn standard() -> Self {
        WheeledVehicle::new(
            2.0,
            1.0,
            DomainBox::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap(),
            InputBound::Norm(std::f64::consts::PI / 6.0),
        )
        .unwrap()
    }

    pub fn new(speed: f64, wheelbase: f64, domain: DomainBox, bound: InputBound) -> Result<Self> {
        if !(speed > 0.0) || !(wheelbase > 0.0) {
            return Err(Error::Config(
                "vehicle speed and wheelbase must be positive".to_string(),
            ));
        }
        if domain.dim() != 2 {
            return Err(Error::Config(format!(
                "vehicle state has dimension 2, domain has {}",
                domain.dim()
            )));
        }
        bound.validate(1)?;
        Ok(WheeledVehicle {
            speed,
            wheelbase,
            domain,
            bound,
        })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn wheelbase(&self) -> f64 {
        self.wheelbase
    }
}

impl Plant for WheeledVehicle {
    fn name(&self) -> &str {
        "vehicle"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn deriv(&self, x: &[f64], u: &[f64]) -> Vector {
        debug_assert_eq!(x.len(), 2);
        debug_assert_eq!(u.len(), 1);
        let theta_e = x[1];
        vec![
            self.speed * (theta_e + u[0]).sin(),
            self.speed / self.wheelbase * u[0].sin(),
        ]
    }

    fn state_domain(&self) -> &DomainBox {
        &self.domain
    }

    fn input_bound(&self) -> &InputBound {
        &self.bound
    }
}
