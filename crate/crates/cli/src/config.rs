//! The experiment configuration: one TOML document drives every command.
//!
//! Parsing is strict. Unknown keys are rejected so a typo cannot silently
//! fall back to a default, the document must carry the expected schema
//! tag, and every reported problem names the offending field path.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use lyapctl_core::{
    CartPole, DomainBox, InputBound, PendulumNLink, Plant, RoaThresholds, SimConfig,
    StabilityConfig, TrainConfig, Vector, WheeledVehicle,
};

use crate::error::{io_err, CliError, Result};

pub const CONFIG_SCHEMA: &str = "lyapctl-config-v1";

/// Top-level document. Sections `lqr`, `simulate`, `mc`, `iterate` and
/// `portrait` are optional; the commands that need them say so when they
/// are absent.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub schema: String,
    pub plant: PlantSection,
    pub stability: StabilitySection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub roa: RoaSection,
    pub lqr: Option<LqrSection>,
    pub simulate: Option<SimulateSection>,
    pub mc: Option<McSection>,
    pub iterate: Option<IterateSection>,
    pub portrait: Option<PortraitSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// One of "pendulum", "cartpole", "vehicle".
    pub kind: String,
    /// Pendulum only: number of links, 1 through 3.
    pub links: Option<usize>,
    /// Replaces the plant's state box with a symmetric box of this radius.
    pub domain_radius: Option<f64>,
    /// Replaces the input bound with a Euclidean-norm cap.
    pub u_max: Option<f64>,
    /// Replaces the input bound with per-axis caps.
    pub u_max_per_axis: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    /// Diagonal of the Lyapunov weight matrix; one entry per state.
    pub q_diag: Vec<f64>,
    /// Minimum exponential decay rate of the hypothesis.
    pub alpha: f64,
    #[serde(default = "default_eps_grad")]
    pub eps_grad: f64,
    /// Rows of the rectangular factor of the hypothesis matrix;
    /// defaults to the state dimension.
    pub a_rows: Option<usize>,
}

fn default_eps_grad() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub n_train: usize,
    pub n_val: usize,
    /// Fraction of the state domain (per side, about its center) that
    /// samples are drawn from. 1.0 covers the whole domain; smaller
    /// values collect data from a safe region around the equilibrium.
    pub sample_frac: f64,
    pub seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            n_train: 10_000,
            n_val: 5_000,
            sample_frac: 1.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub hidden: Vec<usize>,
    pub dropout_p: f64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        TrainSection {
            epochs: base.epochs,
            batch_size: base.batch_size,
            lr: base.lr,
            lr_decay: base.lr_decay,
            hidden: base.hidden,
            dropout_p: base.dropout_p,
            grad_clip: base.grad_clip,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub horizon: f64,
    pub dt: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let base = SimConfig::default();
        SimSection { horizon: base.horizon, dt: base.dt }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoaSection {
    /// Random starts scored by the roa command.
    pub n_starts: usize,
    pub seed: u64,
    /// Points per side of the plot-plane verdict grid; 0 disables it.
    pub grid: usize,
    /// Fraction of the state box the starts are drawn from (1 = whole box).
    pub sample_frac: f64,
    pub tau_v_factor: f64,
    pub tail_frac: f64,
    pub final_norm_frac: f64,
    pub min_converged_frac: f64,
}

impl Default for RoaSection {
    fn default() -> Self {
        let th = RoaThresholds::default();
        RoaSection {
            n_starts: 500,
            seed: 3,
            grid: 41,
            sample_frac: 1.0,
            tau_v_factor: th.tau_v_factor,
            tail_frac: th.tail_frac,
            final_norm_frac: th.final_norm_frac,
            min_converged_frac: th.min_converged_frac,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqrSection {
    /// State cost diagonal; defaults to all ones.
    pub q_diag: Option<Vec<f64>>,
    /// Input cost diagonal; defaults to all ones.
    pub r_diag: Option<Vec<f64>>,
    pub fd_step: f64,
    pub dt: f64,
}

impl Default for LqrSection {
    fn default() -> Self {
        LqrSection {
            q_diag: None,
            r_diag: None,
            fd_step: 1e-5,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Initial states, one inner array per rollout.
    pub x0: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_mc: usize,
    pub dropout_p: f64,
    /// Points per side of the failure-probability grid.
    pub grid: usize,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            n_mc: 50,
            dropout_p: 0.2,
            grid: 11,
            seed: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterateSection {
    pub rounds: usize,
    /// Per-side shrink of the resampling box between rounds.
    pub shrink: f64,
    pub seed: u64,
}

impl Default for IterateSection {
    fn default() -> Self {
        IterateSection {
            rounds: 2,
            shrink: 0.1,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortraitSection {
    /// Radii of the start rings, as fractions of the domain half-widths.
    pub rings: Vec<f64>,
    /// Starts per ring.
    pub per_ring: usize,
}

impl Default for PortraitSection {
    fn default() -> Self {
        PortraitSection {
            rings: vec![0.9, 0.55],
            per_ring: 16,
        }
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

/// Reads, parses and fully validates a configuration document, then
/// builds the plant it describes. Everything a command needs starts here.
pub fn load_experiment(path: &Path) -> Result<(ConfigDoc, Box<dyn Plant>, StabilityConfig)> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let doc: ConfigDoc = toml::from_str(&text)
        .map_err(|e| bad(&path.display().to_string(), e.message()))?;
    if doc.schema != CONFIG_SCHEMA {
        return Err(bad(
            "schema",
            format!("expected \"{CONFIG_SCHEMA}\", got \"{}\"", doc.schema),
        ));
    }
    let plant = doc.build_plant()?;
    doc.validate(plant.as_ref())?;
    let stab = doc.stability_config()?;
    Ok((doc, plant, stab))
}

/// A plant with its state box or input bound swapped out; everything
/// else delegates to the wrapped dynamics.
struct OverriddenPlant {
    inner: Box<dyn Plant>,
    domain: DomainBox,
    bound: InputBound,
}

impl Plant for OverriddenPlant {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn deriv(&self, x: &[f64], u: &[f64]) -> Vector {
        self.inner.deriv(x, u)
    }
    fn state_domain(&self) -> &DomainBox {
        &self.domain
    }
    fn input_bound(&self) -> &InputBound {
        &self.bound
    }
    fn convergence_mask(&self) -> Vec<bool> {
        self.inner.convergence_mask()
    }
    fn plot_coords(&self) -> (usize, usize) {
        self.inner.plot_coords()
    }
}

impl ConfigDoc {
    pub fn build_plant(&self) -> Result<Box<dyn Plant>> {
        let p = &self.plant;
        let base: Box<dyn Plant> = match p.kind.as_str() {
            "pendulum" => {
                let links = p.links.unwrap_or(1);
                Box::new(
                    PendulumNLink::standard(links)
                        .map_err(|_| bad("plant.links", "must be 1, 2, or 3"))?,
                )
            }
            "cartpole" => {
                if p.links.is_some() {
                    return Err(bad("plant.links", "only meaningful for kind = \"pendulum\""));
                }
                Box::new(CartPole::standard())
            }
            "vehicle" => {
                if p.links.is_some() {
                    return Err(bad("plant.links", "only meaningful for kind = \"pendulum\""));
                }
                Box::new(WheeledVehicle::standard())
            }
            other => {
                return Err(bad(
                    "plant.kind",
                    format!("unknown kind \"{other}\" (expected pendulum, cartpole or vehicle)"),
                ))
            }
        };

        let domain = match p.domain_radius {
            Some(r) => {
                positive("plant.domain_radius", r)?;
                DomainBox::symmetric(r, base.state_dim())
            }
            None => base.state_domain().clone(),
        };
        let bound = match (&p.u_max, &p.u_max_per_axis) {
            (Some(_), Some(_)) => {
                return Err(bad(
                    "plant.u_max",
                    "mutually exclusive with plant.u_max_per_axis",
                ))
            }
            (Some(c), None) => {
                positive("plant.u_max", *c)?;
                InputBound::Norm(*c)
            }
            (None, Some(caps)) => {
                if caps.len() != base.input_dim() {
                    return Err(bad(
                        "plant.u_max_per_axis",
                        format!("{} entries for {} inputs", caps.len(), base.input_dim()),
                    ));
                }
                for (i, c) in caps.iter().enumerate() {
                    positive(&format!("plant.u_max_per_axis[{i}]"), *c)?;
                }
                InputBound::PerAxis(caps.clone())
            }
            (None, None) => base.input_bound().clone(),
        };

        let untouched = p.domain_radius.is_none() && p.u_max.is_none() && p.u_max_per_axis.is_none();
        if untouched {
            Ok(base)
        } else {
            Ok(Box::new(OverriddenPlant { inner: base, domain, bound }))
        }
    }

    /// Cross-field checks that need the plant's dimensions.
    pub fn validate(&self, plant: &dyn Plant) -> Result<()> {
        let n = plant.state_dim();
        let m = plant.input_dim();

        let s = &self.stability;
        if s.q_diag.len() != n {
            return Err(bad(
                "stability.q_diag",
                format!("{} entries for a plant with {n} states", s.q_diag.len()),
            ));
        }
        for (i, q) in s.q_diag.iter().enumerate() {
            positive(&format!("stability.q_diag[{i}]"), *q)?;
        }
        positive("stability.alpha", s.alpha)?;
        positive("stability.eps_grad", s.eps_grad)?;
        if let Some(l) = s.a_rows {
            if l < 1 {
                return Err(bad("stability.a_rows", "must be at least 1"));
            }
        }

        if self.data.n_train == 0 {
            return Err(bad("data.n_train", "must be at least 1"));
        }
        if self.data.n_val == 0 {
            return Err(bad("data.n_val", "must be at least 1"));
        }
        if !(self.data.sample_frac > 0.0 && self.data.sample_frac <= 1.0) {
            return Err(bad("data.sample_frac", "must lie in (0, 1]"));
        }

        let t = &self.train;
        if t.epochs == 0 {
            return Err(bad("train.epochs", "must be at least 1"));
        }
        if t.batch_size == 0 {
            return Err(bad("train.batch_size", "must be at least 1"));
        }
        positive("train.lr", t.lr)?;
        if !(t.lr_decay > 0.0 && t.lr_decay <= 1.0) {
            return Err(bad("train.lr_decay", "must lie in (0, 1]"));
        }
        if t.hidden.is_empty() || t.hidden.iter().any(|w| *w == 0) {
            return Err(bad("train.hidden", "needs at least one nonzero layer width"));
        }
        if !(0.0..1.0).contains(&t.dropout_p) {
            return Err(bad("train.dropout_p", "must lie in [0, 1)"));
        }
        positive("train.grad_clip", t.grad_clip)?;

        positive("sim.horizon", self.sim.horizon)?;
        positive("sim.dt", self.sim.dt)?;
        if self.sim.dt > self.sim.horizon {
            return Err(bad("sim.dt", "must not exceed sim.horizon"));
        }

        let r = &self.roa;
        if r.n_starts == 0 {
            return Err(bad("roa.n_starts", "must be at least 1"));
        }
        if r.grid == 1 {
            return Err(bad("roa.grid", "must be 0 (disabled) or at least 2"));
        }
        if !(r.sample_frac > 0.0 && r.sample_frac <= 1.0) {
            return Err(bad("roa.sample_frac", "must lie in (0, 1]"));
        }
        self.thresholds().validate().map_err(|e| match e {
            lyapctl_core::Error::Config(m) => bad("roa", m),
            other => CliError::Core(other),
        })?;

        if let Some(l) = &self.lqr {
            if let Some(q) = &l.q_diag {
                if q.len() != n {
                    return Err(bad("lqr.q_diag", format!("{} entries for {n} states", q.len())));
                }
                for (i, v) in q.iter().enumerate() {
                    positive(&format!("lqr.q_diag[{i}]"), *v)?;
                }
            }
            if let Some(rd) = &l.r_diag {
                if rd.len() != m {
                    return Err(bad("lqr.r_diag", format!("{} entries for {m} inputs", rd.len())));
                }
                for (i, v) in rd.iter().enumerate() {
                    positive(&format!("lqr.r_diag[{i}]"), *v)?;
                }
            }
            positive("lqr.fd_step", l.fd_step)?;
            positive("lqr.dt", l.dt)?;
        }

        if let Some(sim) = &self.simulate {
            if sim.x0.is_empty() {
                return Err(bad("simulate.x0", "needs at least one start"));
            }
            for (k, x0) in sim.x0.iter().enumerate() {
                if x0.len() != n {
                    return Err(bad(
                        &format!("simulate.x0[{k}]"),
                        format!("{} entries for {n} states", x0.len()),
                    ));
                }
                if x0.iter().any(|v| !v.is_finite()) {
                    return Err(bad(&format!("simulate.x0[{k}]"), "entries must be finite"));
                }
            }
        }

        if let Some(mc) = &self.mc {
            if mc.n_mc == 0 {
                return Err(bad("mc.n_mc", "must be at least 1"));
            }
            if !(mc.dropout_p > 0.0 && mc.dropout_p < 1.0) {
                return Err(bad("mc.dropout_p", "must lie strictly in (0, 1)"));
            }
            if mc.grid < 2 {
                return Err(bad("mc.grid", "must be at least 2"));
            }
        }

        if let Some(it) = &self.iterate {
            if it.rounds == 0 {
                return Err(bad("iterate.rounds", "must be at least 1"));
            }
            if !(0.0..0.5).contains(&it.shrink) {
                return Err(bad("iterate.shrink", "must lie in [0, 0.5)"));
            }
        }

        if let Some(p) = &self.portrait {
            if p.rings.is_empty() {
                return Err(bad("portrait.rings", "needs at least one ring"));
            }
            for (i, f) in p.rings.iter().enumerate() {
                if !(f.is_finite() && *f > 0.0 && *f <= 1.0) {
                    return Err(bad(&format!("portrait.rings[{i}]"), "must lie in (0, 1]"));
                }
            }
            if p.per_ring == 0 {
                return Err(bad("portrait.per_ring", "must be at least 1"));
            }
        }

        Ok(())
    }

    pub fn stability_config(&self) -> Result<StabilityConfig> {
        let s = &self.stability;
        let mut q = lyapctl_core::Matrix::zeros(s.q_diag.len(), s.q_diag.len());
        for (i, v) in s.q_diag.iter().enumerate() {
            q.set(i, i, *v);
        }
        StabilityConfig::new(q, s.alpha, s.eps_grad, s.a_rows).map_err(|e| match e {
            lyapctl_core::Error::Config(m) => bad("stability", m),
            other => CliError::Core(other),
        })
    }

    pub fn train_config(&self, seed_override: Option<u64>) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            lr_decay: t.lr_decay,
            hidden: t.hidden.clone(),
            dropout_p: t.dropout_p,
            grad_clip: t.grad_clip,
            seed: seed_override.unwrap_or(t.seed),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            horizon: self.sim.horizon,
            dt: self.sim.dt,
        }
    }

    pub fn thresholds(&self) -> RoaThresholds {
        RoaThresholds {
            tau_v_factor: self.roa.tau_v_factor,
            tail_frac: self.roa.tail_frac,
            final_norm_frac: self.roa.final_norm_frac,
            min_converged_frac: self.roa.min_converged_frac,
        }
    }

    pub fn lqr_section(&self) -> LqrSection {
        self.lqr.clone().unwrap_or_default()
    }
}
