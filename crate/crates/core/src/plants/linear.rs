//! Synthetic linear plant `dx/dt = A x + B u` for tests and examples.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::plants::{DomainBox, InputBound, Plant};

#[derive(Debug, Clone)]
pub struct LinearPlant {
    a: Matrix,
    b: Matrix,
    domain: DomainBox,
    bound: InputBound,
    name: String,
}

impl LinearPlant {
    pub fn new(a: Matrix, b: Matrix, domain: DomainBox, bound: InputBound) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Config("state matrix must be square".to_string()));
        }
        if b.rows() != a.rows() {
            return Err(Error::Config(format!(
                "input matrix has {} rows for a {}-dimensional state",
                b.rows(),
                a.rows()
            )));
        }
        if domain.dim() != a.rows() {
            return Err(Error::Config(format!(
                "domain dimension {} does not match state dimension {}",
                domain.dim(),
                a.rows()
            )));
        }
        bound.validate(b.cols())?;
        Ok(LinearPlant {
            name: format!("linear{}", a.rows()),
            a,
            b,
            domain,
            bound,
        })
    }

    /// The scalar contraction `dx/dt = -x` with an unused input channel.
    pub fn pure_decay(dim: usize) -> Self {
        let a = Matrix::identity(dim).scale(-1.0);
        let b = Matrix::zeros(dim, 1);
        LinearPlant::new(
            a,
            b,
            DomainBox::symmetric(10.0, dim),
            InputBound::Norm(1.0),
        )
        .unwrap()
    }
}

impl Plant for LinearPlant {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        self.a.rows()
    }

    fn input_dim(&self) -> usize {
        self.b.cols()
    }

    fn deriv(&self, x: &[f64], u: &[f64]) -> Vector {
        let mut dx = self.a.matvec(x);
        let bu = self.b.matvec(u);
        for (d, v) in dx.iter_mut().zip(bu.iter()) {
            *d += v;
        }
        dx
    }

    fn state_domain(&self) -> &DomainBox {
        &self.domain
    }

    fn input_bound(&self) -> &InputBound {
        &self.bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_decay_ignores_input() {
        let p = LinearPlant::pure_decay(2);
        assert_eq!(p.deriv(&[1.0, -3.0], &[0.7]), vec![-1.0, 3.0]);
        assert_eq!(p.deriv(&[1.0, -3.0], &[0.0]), vec![-1.0, 3.0]);
    }

    #[test]
    fn affine_structure() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let b = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let p = LinearPlant::new(
            a,
            b,
            DomainBox::symmetric(5.0, 2),
            InputBound::Norm(2.0),
        )
        .unwrap();
        assert_eq!(p.deriv(&[1.0, 2.0], &[0.5]), vec![2.0, -0.5]);
    }
}
