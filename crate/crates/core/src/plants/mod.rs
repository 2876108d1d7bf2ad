//! Benchmark plants and dataset generation.
//!
//! A plant is a black box from the learner's point of view: the only
//! query is the derivative `f(x, u)`. Every plant here places its target
//! equilibrium at the origin of the (already shifted) state coordinates,
//! so `f(0, 0) = 0`.

mod cartpole;
mod dataset;
mod linear;
mod pendulum;
mod vehicle;

pub use cartpole::CartPole;
pub use dataset::{generate_dataset, generate_dataset_with, load_dataset, save_dataset};
pub use linear::LinearPlant;
pub use pendulum::PendulumNLink;
pub use vehicle::WheeledVehicle;

use crate::error::{Error, Result};
use crate::linalg::{norm, Vector};
use crate::rng::Rng;

/// Axis-aligned state box.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lo: Vector,
    hi: Vector,
}

impl DomainBox {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config(format!(
                "domain bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&l, &h)) in lo.iter().zip(hi.iter()).enumerate() {
            if !(l <= h) || !l.is_finite() || !h.is_finite() {
                return Err(Error::Config(format!(
                    "domain coordinate {i} has invalid bounds [{l}, {h}]"
                )));
            }
        }
        Ok(DomainBox { lo, hi })
    }

    /// Symmetric box `[-r, r]^n`.
    pub fn symmetric(r: f64, n: usize) -> Self {
        DomainBox::new(vec![-r; n], vec![r; n]).expect("positive radius")
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    pub fn sample(&self, rng: &mut Rng) -> Vector {
        rng.uniform_box(&self.lo, &self.hi)
    }

    /// Box scaled by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> DomainBox {
        let lo = self
            .lo
            .iter()
            .zip(self.hi.iter())
            .map(|(&l, &h)| {
                let c = 0.5 * (l + h);
                c + factor * (l - c)
            })
            .collect();
        let hi = self
            .lo
            .iter()
            .zip(self.hi.iter())
            .map(|(&l, &h)| {
                let c = 0.5 * (l + h);
                c + factor * (h - c)
            })
            .collect();
        DomainBox { lo, hi }
    }

    /// Euclidean norm of the half-widths restricted to `mask`.
    pub fn radius(&self, mask: &[bool]) -> f64 {
        debug_assert_eq!(mask.len(), self.dim());
        let half: Vector = self
            .lo
            .iter()
            .zip(self.hi.iter())
            .zip(mask.iter())
            .map(|((&l, &h), &m)| if m { 0.5 * (h - l) } else { 0.0 })
            .collect();
        norm(&half)
    }

    /// Axis-aligned bounding box of a point set, shrunk inward by
    /// `shrink` times the side length on each side. Empty input or a
    /// degenerate box is an error.
    pub fn bounding_box(points: &[Vector], shrink: f64) -> Result<DomainBox> {
        if points.is_empty() {
            return Err(Error::Eval(
                "cannot build a bounding box from zero points".to_string(),
            ));
        }
        let n = points[0].len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in points {
            debug_assert_eq!(p.len(), n);
            for i in 0..n {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        for i in 0..n {
            let w = hi[i] - lo[i];
            lo[i] += shrink * w;
            hi[i] -= shrink * w;
        }
        DomainBox::new(lo, hi)
    }
}

/// Admissible-input description.
#[derive(Debug, Clone, PartialEq)]
pub enum InputBound {
    /// `|u|_2 <= cap`.
    Norm(f64),
    /// `|u_i| <= caps[i]` per axis.
    PerAxis(Vector),
}

impl InputBound {
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            InputBound::Norm(c) => {
                if !(c > &0.0) {
                    return Err(Error::Config(format!("input bound must be positive, got {c}")));
                }
            }
            InputBound::PerAxis(caps) => {
                if caps.len() != m {
                    return Err(Error::Config(format!(
                        "per-axis input bound has {} entries for {} inputs",
                        caps.len(),
                        m
                    )));
                }
                if caps.iter().any(|&c| !(c > 0.0)) {
                    return Err(Error::Config("input bound entries must be positive".to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            InputBound::Norm(c) => norm(u) <= *c,
            InputBound::PerAxis(caps) => u
                .iter()
                .zip(caps.iter())
                .all(|(&ui, &ci)| ui.abs() <= ci),
        }
    }

    /// Projects `u` into the admissible set (norm scale or per-axis clamp).
    pub fn clamp(&self, u: &[f64]) -> Vector {
        match self {
            InputBound::Norm(c) => {
                let n = norm(u);
                if n > *c {
                    let s = c / n;
                    u.iter().map(|&v| v * s).collect()
                } else {
                    u.to_vec()
                }
            }
            InputBound::PerAxis(caps) => u
                .iter()
                .zip(caps.iter())
                .map(|(&v, &cap)| v.clamp(-cap, cap))
                .collect(),
        }
    }

    /// Per-component caps for a tanh-bounded controller with `m` outputs.
    /// A norm bound `c` splits evenly: per-component `c / sqrt(m)` keeps
    /// the output norm strictly below `c`.
    pub fn per_axis_caps(&self, m: usize) -> Vector {
        match self {
            InputBound::Norm(c) => vec![c / (m as f64).sqrt(); m],
            InputBound::PerAxis(caps) => caps.clone(),
        }
    }

    /// Uniform draw from the admissible set: rejection sampling from the
    /// enclosing cube for a norm bound, independent uniforms per axis
    /// otherwise.
    pub fn sample(&self, m: usize, rng: &mut Rng) -> Vector {
        match self {
            InputBound::Norm(c) => loop {
                let u: Vector = (0..m).map(|_| rng.uniform(-c, *c)).collect();
                if norm(&u) <= *c {
                    return u;
                }
            },
            InputBound::PerAxis(caps) => caps.iter().map(|&cap| rng.uniform(-cap, cap)).collect(),
        }
    }
}

/// A dynamical system exposed only through derivative queries.
pub trait Plant: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// `dx/dt = f(x, u)`. The equilibrium is always the origin: `f(0,0) = 0`.
    fn deriv(&self, x: &[f64], u: &[f64]) -> Vector;
    /// Operating region; simulations stop when the state leaves it.
    fn state_domain(&self) -> &DomainBox;
    fn input_bound(&self) -> &InputBound;
    /// Which state coordinates count in convergence norms. Defaults to all.
    fn convergence_mask(&self) -> Vec<bool> {
        vec![true; self.state_dim()]
    }
    /// Two coordinates used for 2-D plots and grid slices.
    fn plot_coords(&self) -> (usize, usize) {
        (0, 1)
    }
}

/// One derivative query pair: the plant evaluated at `(x, u)` and at `(x, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSample {
    pub x: Vector,
    pub u: Vector,
    pub dxdt_u: Vector,
    pub dxdt_0: Vector,
}

/// Which role a dataset plays in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            _ => None,
        }
    }
}

/// A set of derivative samples with its provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<DynamicsSample>,
    pub plant: String,
    pub domain: DomainBox,
    pub input_bound: InputBound,
    pub seed: u64,
    pub split: Split,
}

impl Dataset {
    pub fn state_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.u.len())
    }
}
