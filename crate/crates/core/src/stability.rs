//! Lyapunov-constrained stable dynamics hypotheses.
//!
//! The Lyapunov candidate is the quadratic form `V(x) = x^T Q x` with
//! `Q` symmetric positive definite, so `grad V(x) = 2 Q x` and
//! `lambda_min(Q) |x|^2 <= V(x) <= lambda_max(Q) |x|^2`.
//!
//! A network head emits, at each state `x`, matrices `A(x)` (shape
//! `l x n`) and `B(x)` (shape `n x n`), assembled into
//!
//! ```text
//! P(x) = A(x)^T A(x) + B(x) - B(x)^T
//! ```
//!
//! whose symmetric part is positive semi-definite by construction. The
//! stable hypothesis is
//!
//! ```text
//! f_s(x) = -P(x) grad V(x)
//!          - relu(-W(x) + alpha V(x)) / max(|grad V(x)|^2, eps) * grad V(x)
//! ```
//!
//! with `W(x) = grad V(x)^T P(x) grad V(x)`. Along `f_s` the decay is
//! `dV/dt = -W` when `W >= alpha V` and `-alpha V` otherwise, i.e.
//! `dV/dt = -max(W, alpha V) <= -alpha V`: every hypothesis in this
//! family is exponentially stable regardless of the head's weights. The
//! origin is pinned exactly: `f_s(0) = 0`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq, quad_form_unchecked, Matrix, Vector};
use crate::nn::{Cache, DropoutSpec, Gradients, Mlp};
use crate::rng::Rng;

/// Lyapunov weights and decay parameters for one experiment.
#[derive(Debug, Clone)]
pub struct StabilityConfig {
    q: Matrix,
    /// Exponential decay rate demanded of the hypothesis.
    pub alpha: f64,
    /// Floor for the squared gradient norm in the correction term.
    pub eps_grad: f64,
    /// Row count `l` of the head's `A(x)` factor.
    pub a_rows: usize,
}

impl StabilityConfig {
    /// Validates `Q` (symmetric positive definite), `alpha > 0`,
    /// `eps_grad > 0`. `a_rows` defaults to the state dimension.
    pub fn new(q: Matrix, alpha: f64, eps_grad: f64, a_rows: Option<usize>) -> Result<Self> {
        if q.rows() != q.cols() || q.rows() == 0 {
            return Err(Error::Config(format!(
                "Q must be square and non-empty, got {}x{}",
                q.rows(),
                q.cols()
            )));
        }
        if !q.is_symmetric(1e-12) {
            return Err(Error::Config("Q must be symmetric".to_string()));
        }
        if !q.is_positive_definite() {
            return Err(Error::Config("Q must be positive definite".to_string()));
        }
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        if !(eps_grad > 0.0) {
            return Err(Error::Config(format!(
                "eps_grad must be positive, got {eps_grad}"
            )));
        }
        let a_rows = a_rows.unwrap_or(q.rows());
        if a_rows == 0 {
            return Err(Error::Config("a_rows must be positive".to_string()));
        }
        Ok(StabilityConfig {
            q,
            alpha,
            eps_grad,
            a_rows,
        })
    }

    /// Diagonal-`Q` convenience constructor.
    pub fn diagonal(q_diag: &[f64], alpha: f64, eps_grad: f64) -> Result<Self> {
        StabilityConfig::new(Matrix::diag(q_diag), alpha, eps_grad, None)
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    /// Output width the head network must have: `l*n` for `A` plus `n*n` for `B`.
    pub fn head_output_dim(&self) -> usize {
        self.a_rows * self.dim() + self.dim() * self.dim()
    }
}

/// The network head that parameterizes `P(x)`.
#[derive(Debug, Clone)]
pub struct StabilityHead {
    net: Mlp,
    n: usize,
    l: usize,
}

impl StabilityHead {
    /// Wraps an existing network; its input must be `n` and its output
    /// `l*n + n*n`.
    pub fn from_net(net: Mlp, cfg: &StabilityConfig) -> Result<Self> {
        if net.input_dim() != cfg.dim() {
            return Err(Error::Config(format!(
                "head input dimension {} does not match state dimension {}",
                net.input_dim(),
                cfg.dim()
            )));
        }
        if net.output_dim() != cfg.head_output_dim() {
            return Err(Error::Config(format!(
                "head output dimension {} does not match l*n + n*n = {}",
                net.output_dim(),
                cfg.head_output_dim()
            )));
        }
        Ok(StabilityHead {
            net,
            n: cfg.dim(),
            l: cfg.a_rows,
        })
    }

    /// Fresh Glorot-initialized head with the given hidden widths.
    pub fn init(cfg: &StabilityConfig, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(cfg.dim());
        dims.extend_from_slice(hidden);
        dims.push(cfg.head_output_dim());
        StabilityHead {
            net: Mlp::glorot(&dims, rng),
            n: cfg.dim(),
            l: cfg.a_rows,
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn a_rows(&self) -> usize {
        self.l
    }

    /// Splits a raw head output into `A` (first `l*n` entries, row-major)
    /// and `B` (remaining `n*n`).
    pub fn split_output(&self, out: &[f64]) -> (Matrix, Matrix) {
        debug_assert_eq!(out.len(), self.l * self.n + self.n * self.n);
        let a = Matrix::from_vec(self.l, self.n, out[..self.l * self.n].to_vec());
        let b = Matrix::from_vec(self.n, self.n, out[self.l * self.n..].to_vec());
        (a, b)
    }
}

/// `V(x) = x^T Q x`.
pub fn lyapunov_value(cfg: &StabilityConfig, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), cfg.dim());
    quad_form_unchecked(&cfg.q, x)
}

/// `grad V(x) = 2 Q x`.
pub fn lyapunov_grad(cfg: &StabilityConfig, x: &[f64]) -> Vector {
    debug_assert_eq!(x.len(), cfg.dim());
    let mut g = cfg.q.matvec(x);
    for v in &mut g {
        *v *= 2.0;
    }
    g
}

/// Evaluates `P(x) = A^T A + B - B^T` from the head (deterministic pass).
pub fn assemble_p(head: &StabilityHead, x: &[f64]) -> Matrix {
    let out = head.net.forward(x);
    let (a, b) = head.split_output(&out);
    assemble_p_from_parts(&a, &b)
}

/// Assembles `P` from explicit factors.
pub fn assemble_p_from_parts(a: &Matrix, b: &Matrix) -> Matrix {
    let ata = a.transpose().matmul(a);
    ata.add(&b.sub(&b.transpose()))
}

/// The stable hypothesis `f_s(x)` (deterministic pass). `f_s(0) = 0` exactly.
pub fn stable_hypothesis(cfg: &StabilityConfig, head: &StabilityHead, x: &[f64]) -> Vector {
    debug_assert_eq!(x.len(), cfg.dim());
    if x.iter().all(|&v| v == 0.0) {
        return vec![0.0; x.len()];
    }
    let p = assemble_p(head, x);
    fs_from_p(cfg, &p, x).0
}

/// Core formula given an already-assembled `P`; returns `(f_s, W)`.
fn fs_from_p(cfg: &StabilityConfig, p: &Matrix, x: &[f64]) -> (Vector, f64) {
    let g = lyapunov_grad(cfg, x);
    let v = lyapunov_value(cfg, x);
    let pg = p.matvec(&g);
    let w = dot(&g, &pg);
    let denom = norm_sq(&g).max(cfg.eps_grad);
    let c = relu(-w + cfg.alpha * v) / denom;
    let fs = g
        .iter()
        .zip(pg.iter())
        .map(|(&gi, &pgi)| -pgi - c * gi)
        .collect();
    (fs, w)
}

#[inline]
fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// `dV/dt` along the hypothesis: `grad V(x)^T f_s(x)`.
///
/// Undefined at the origin (the hypothesis is pinned there); any other
/// state is fine.
pub fn decay_rate(cfg: &StabilityConfig, head: &StabilityHead, x: &[f64]) -> Result<f64> {
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain(
            "decay rate is undefined at the origin".to_string(),
        ));
    }
    let fs = stable_hypothesis(cfg, head, x);
    let g = lyapunov_grad(cfg, x);
    Ok(dot(&g, &fs))
}

/// Forward evaluation of `f_s` that records everything the backward pass
/// needs. Supports dropout on the head network during training.
#[derive(Debug)]
pub struct FsEval {
    pub fs: Vector,
    pub w: f64,
    pub v: f64,
    cache: Cache,
    a: Matrix,
    b_skew: Matrix,
    grad_v: Vector,
    denom: f64,
    relu_arg: f64,
}

/// Training-path forward pass of the stable hypothesis.
///
/// Unlike [`stable_hypothesis`] there is no special case at the origin:
/// `grad V(0) = 0` makes every term vanish there anyway, and keeping one
/// smooth code path keeps gradients consistent.
pub fn fs_forward(
    cfg: &StabilityConfig,
    head: &StabilityHead,
    x: &[f64],
    dropout: &DropoutSpec,
    rng: Option<&mut Rng>,
) -> FsEval {
    let cache = head.net.forward_with(x, dropout, rng);
    let (a, b) = head.split_output(cache.output());
    let p = assemble_p_from_parts(&a, &b);
    let g = lyapunov_grad(cfg, x);
    let v = lyapunov_value(cfg, x);
    let pg = p.matvec(&g);
    let w = dot(&g, &pg);
    let denom = norm_sq(&g).max(cfg.eps_grad);
    let relu_arg = -w + cfg.alpha * v;
    let c = relu(relu_arg) / denom;
    let fs = g
        .iter()
        .zip(pg.iter())
        .map(|(&gi, &pgi)| -pgi - c * gi)
        .collect();
    FsEval {
        fs,
        w,
        v,
        cache,
        a,
        b_skew: b,
        grad_v: g,
        denom,
        relu_arg,
    }
}

/// Backward pass for [`fs_forward`]: maps `upstream = dL/d f_s` to
/// gradients of the head network's parameters.
///
/// With `g = grad V`, `s = upstream`, and `D = max(|g|^2, eps)`:
///
/// ```text
/// dL/dP = -s g^T + [relu'(-W + alpha V) / D] (s^T g) g g^T
/// dL/dA = A (dL/dP + dL/dP^T)        dL/dB = dL/dP - dL/dP^T
/// ```
///
/// which are then flattened in the head's `[A | B]` output order and
/// pushed through the network.
pub fn fs_backward(head: &StabilityHead, eval: &FsEval, upstream: &[f64]) -> Gradients {
    let n = head.n;
    let l = head.l;
    let g = &eval.grad_v;
    let s = upstream;
    debug_assert_eq!(s.len(), n);

    // relu'(z) with the z = 0 subgradient taken as 0.
    let gate = if eval.relu_arg > 0.0 { 1.0 } else { 0.0 };
    let sg = dot(s, g);
    let coef = gate * sg / eval.denom;

    // dL/dP.
    let mut dp = Matrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            dp.set(j, k, -s[j] * g[k] + coef * g[j] * g[k]);
        }
    }
    // dL/dA = A (dP + dP^T), dL/dB = dP - dP^T.
    let dp_sym = dp.add(&dp.transpose());
    let da = eval.a.matmul(&dp_sym);
    let db = dp.sub(&dp.transpose());
    debug_assert_eq!(da.rows(), l);
    let _ = &eval.b_skew;

    let mut flat = Vec::with_capacity(l * n + n * n);
    flat.extend_from_slice(da.data());
    flat.extend_from_slice(db.data());
    let (grads, _) = head.net.backward(&eval.cache, &flat);
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    // Explicit import so the proptest prelude's `Rng` trait cannot
    // shadow the crate's generator.
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn cfg_2d() -> StabilityConfig {
        StabilityConfig::diagonal(&[0.6, 0.4], 0.5, 1e-12).unwrap()
    }

    /// Head whose network always outputs zero: `P(x) = 0`.
    fn zero_head(cfg: &StabilityConfig) -> StabilityHead {
        let n = cfg.dim();
        let out = cfg.head_output_dim();
        let net = Mlp::from_layers(vec![Layer {
            weight: Matrix::zeros(out, n),
            bias: vec![0.0; out],
            activation: Activation::Identity,
        }]);
        StabilityHead::from_net(net, cfg).unwrap()
    }

    fn random_head(cfg: &StabilityConfig, seed: u64) -> StabilityHead {
        StabilityHead::init(cfg, &[64, 64, 64], &mut Rng::new(seed))
    }

    #[test]
    fn config_rejects_bad_q() {
        assert!(StabilityConfig::diagonal(&[1.0, 0.0], 0.5, 1e-12).is_err());
        assert!(StabilityConfig::diagonal(&[1.0, -1.0], 0.5, 1e-12).is_err());
        let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
        assert!(StabilityConfig::new(asym, 0.5, 1e-12, None).is_err());
        assert!(StabilityConfig::diagonal(&[1.0], 0.0, 1e-12).is_err());
        assert!(StabilityConfig::diagonal(&[1.0], 0.5, 0.0).is_err());
    }

    #[test]
    fn lyapunov_value_and_grad_match_hand_computation() {
        let cfg = cfg_2d();
        let x = [1.0, -2.0];
        // V = 0.6*1 + 0.4*4 = 2.2; grad = (1.2, -1.6).
        assert!((lyapunov_value(&cfg, &x) - 2.2).abs() < 1e-15);
        let g = lyapunov_grad(&cfg, &x);
        assert!((g[0] - 1.2).abs() < 1e-15);
        assert!((g[1] + 1.6).abs() < 1e-15);
        assert_eq!(lyapunov_value(&cfg, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn lyapunov_sandwich_bounds_hold() {
        // For diagonal Q the eigenvalues are the entries.
        let cfg = cfg_2d();
        let mut rng = Rng::new(3);
        for _ in 0..200 {
            let x = rng.uniform_box(&[-3.0, -3.0], &[3.0, 3.0]);
            let v = lyapunov_value(&cfg, &x);
            let n2 = norm_sq(&x);
            assert!(v >= 0.4 * n2 - 1e-12);
            assert!(v <= 0.6 * n2 + 1e-12);
        }
    }

    #[test]
    fn assembled_p_has_psd_symmetric_part() {
        let cfg = StabilityConfig::diagonal(&[0.5, 0.25, 0.125], 0.5, 1e-12).unwrap();
        let head = random_head(&cfg, 11);
        let mut rng = Rng::new(4);
        for _ in 0..100 {
            let x = rng.uniform_box(&[-1.0; 3], &[1.0; 3]);
            let p = assemble_p(&head, &x);
            for _ in 0..10 {
                let v = rng.uniform_box(&[-1.0; 3], &[1.0; 3]);
                let pv = p.matvec(&v);
                assert!(dot(&v, &pv) >= -1e-12, "v^T P v = {}", dot(&v, &pv));
            }
        }
    }

    #[test]
    fn symmetric_part_equals_ata() {
        let cfg = StabilityConfig::diagonal(&[1.0, 1.0], 0.5, 1e-12).unwrap();
        let head = random_head(&cfg, 12);
        let x = [0.3, -0.9];
        let out = head.net().forward(&x);
        let (a, b) = head.split_output(&out);
        let p = assemble_p_from_parts(&a, &b);
        let sym = p.add(&p.transpose()).scale(0.5);
        let ata = a.transpose().matmul(&a);
        assert!(sym.max_abs_diff(&ata) < 1e-12);
    }

    #[test]
    fn zero_head_reduces_to_pure_correction() {
        // With P = 0 and alpha = 1: W = 0, so
        // f_s = -relu(V) / |grad V|^2 * grad V. In one dimension with
        // Q = [0.5] and x = 2: V = 2, grad V = 2, f_s = -(2/4)*2 = -1.
        let cfg = StabilityConfig::new(Matrix::diag(&[0.5]), 1.0, 1e-12, None).unwrap();
        let head = zero_head(&cfg);
        let fs = stable_hypothesis(&cfg, &head, &[2.0]);
        assert!((fs[0] + 1.0).abs() < 1e-14, "got {}", fs[0]);
    }

    #[test]
    fn origin_is_pinned() {
        let cfg = cfg_2d();
        let head = random_head(&cfg, 5);
        assert_eq!(stable_hypothesis(&cfg, &head, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert!(matches!(
            decay_rate(&cfg, &head, &[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn decay_equals_negative_max_of_w_and_alpha_v() {
        let cfg = cfg_2d();
        let mut rng = Rng::new(8);
        for trial in 0..300 {
            let head = random_head(&cfg, 1000 + trial);
            let x = rng.uniform_box(&[-2.0, -2.0], &[2.0, 2.0]);
            if x.iter().all(|&v| v == 0.0) {
                continue;
            }
            let v = lyapunov_value(&cfg, &x);
            let p = assemble_p(&head, &x);
            let g = lyapunov_grad(&cfg, &x);
            let w = dot(&g, &p.matvec(&g));
            let dv = decay_rate(&cfg, &head, &x).unwrap();
            let expected = -w.max(cfg.alpha * v);
            let rel = (dv - expected).abs() / expected.abs().max(1e-300);
            assert!(rel < 1e-9, "dv {dv} vs expected {expected}");
            assert!(dv <= -cfg.alpha * v + 1e-9 * (1.0 + v.abs()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn decay_bound_holds_for_random_states(
            seed in 0u64..1_000_000,
            x0 in -2.0f64..2.0,
            x1 in -2.0f64..2.0,
            alpha in 0.05f64..2.0,
        ) {
            prop_assume!(x0 != 0.0 || x1 != 0.0);
            let cfg = StabilityConfig::diagonal(&[0.7, 0.2], alpha, 1e-12).unwrap();
            let head = StabilityHead::init(&cfg, &[16, 16], &mut Rng::new(seed));
            let x = [x0, x1];
            let v = lyapunov_value(&cfg, &x);
            let dv = decay_rate(&cfg, &head, &x).unwrap();
            prop_assert!(dv <= -alpha * v + 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn hypothesis_rollouts_always_converge() {
        // Fresh random heads, 20 rollouts of dx/dt = f_s(x) from the unit
        // box: V decays at least as fast as exp(-alpha t), so after 20 s
        // with alpha = 0.5 the ratio V(T)/V(0) sits far below 1e-3.
        let cfg = cfg_2d();
        let mut rng = Rng::new(42);
        for trial in 0..20 {
            let head = random_head(&cfg, 7000 + trial);
            let x0 = rng.uniform_box(&[-1.0, -1.0], &[1.0, 1.0]);
            if lyapunov_value(&cfg, &x0) < 1e-12 {
                continue;
            }
            let mut x = x0.clone();
            for _ in 0..2000 {
                x = crate::ode::rk4_step(|p| stable_hypothesis(&cfg, &head, p), &x, 0.01)
                    .unwrap();
            }
            let ratio = lyapunov_value(&cfg, &x) / lyapunov_value(&cfg, &x0);
            assert!(ratio < 1e-3, "trial {trial}: V ratio {ratio}");
        }
    }

    #[test]
    fn fs_gradients_match_finite_differences() {
        // L = c^T f_s(x); d L / d(head params) checked against central
        // differences. Probes near the relu kink or a relu preactivation
        // boundary are skipped.
        let cfg = cfg_2d();
        let mut rng = Rng::new(2);
        let mut probes = 0;
        let mut attempts = 0;
        while probes < 8 && attempts < 64 {
            attempts += 1;
            let mut head = StabilityHead::init(&cfg, &[12, 12], &mut Rng::new(300 + attempts));
            let x = rng.uniform_box(&[-1.5, -1.5], &[1.5, 1.5]);
            if norm_sq(&x) < 1e-3 {
                continue;
            }
            let eval = fs_forward(&cfg, &head, &x, &DropoutSpec::OFF, None);
            if eval.relu_arg.abs() < 1e-4 {
                continue;
            }
            if eval
                .cache
                .preacts
                .iter()
                .any(|pre| pre.iter().any(|z| z.abs() < 1e-6))
            {
                continue;
            }
            let c = [0.7, -1.3];
            let grads = fs_backward(&head, &eval, &c);
            let mut flat_grads = Vec::new();
            for (gw, gb) in grads.weights.iter().zip(grads.biases.iter()) {
                flat_grads.extend_from_slice(gw.data());
                flat_grads.extend_from_slice(gb);
            }
            let flat = head.net().params_flat();
            let h = 1e-6;
            let loss = |head: &StabilityHead| {
                let fs = stable_hypothesis(&cfg, head, &x);
                dot(&c, &fs)
            };
            for i in (0..flat.len()).step_by(7) {
                let mut p = flat.clone();
                p[i] += h;
                head.net_mut().set_params_flat(&p);
                let fp = loss(&head);
                p[i] -= 2.0 * h;
                head.net_mut().set_params_flat(&p);
                let fm = loss(&head);
                let fd = (fp - fm) / (2.0 * h);
                let an = flat_grads[i];
                if fd.abs() < 1e-10 && an.abs() < 1e-10 {
                    continue;
                }
                let rel = (fd - an).abs() / fd.abs().max(an.abs());
                assert!(rel < 1e-3, "probe {probes} param {i}: fd {fd} vs {an}");
            }
            head.net_mut().set_params_flat(&flat);
            probes += 1;
        }
        assert!(probes >= 8, "only {probes} usable probes");
    }

    #[test]
    fn head_dimension_validation() {
        let cfg = cfg_2d();
        let wrong = Mlp::glorot(&[2, 8, 7], &mut Rng::new(1));
        assert!(StabilityHead::from_net(wrong, &cfg).is_err());
        let wrong_in = Mlp::glorot(&[3, 8, cfg.head_output_dim()], &mut Rng::new(1));
        assert!(StabilityHead::from_net(wrong_in, &cfg).is_err());
    }
}
