//! Closed-form minimizers of the two regularized factorization objectives.
//!
//! Both objectives fit `X ≈ X·A·Bᵀ` with `A, B ∈ ℝ^{p×k}`:
//!
//! * [`Objective::ProductReg`]: `‖X − XABᵀ‖²_F + λ‖ABᵀ‖²_F`. Only the product
//!   `ABᵀ` is pinned down, so `(A·D, B·D⁻¹)` is optimal for any invertible
//!   diagonal `D`.
//! * [`Objective::SplitReg`]: `‖X − XABᵀ‖²_F + λ(‖XA‖²_F + ‖B‖²_F)`. Unique up to
//!   a joint rotation.
//!
//! With `X = U·Σ·Vᵀ` the minimizers are
//!
//! ```text
//! ProductReg:  A = B = V_k · dMat(1 / (1 + λ/σ_i²))^{1/2}
//! SplitReg:    A = V_k · dMat(√((1/σ_i)(1 − λ/σ_i)_+)),  B = V_k · dMat(√(σ_i (1 − λ/σ_i)_+))
//! ```
//!
//! [`gradient_descent_oracle`] minimizes the same losses numerically and is
//! used to cross-check the closed forms.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{svd, DataMatrix, SvdFactors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ObjectiveRepr")]
pub enum Objective {
    /// Regularizes `‖ABᵀ‖²`.
    ProductReg,
    /// Regularizes `‖XA‖² + ‖B‖²`.
    SplitReg,
}

impl Objective {
    /// 1 for `ProductReg`, 2 for `SplitReg`.
    pub fn number(self) -> u8 {
        match self {
            Objective::ProductReg => 1,
            Objective::SplitReg => 2,
        }
    }
}

/// Accepts `1`, `2`, `"1"`, `"2"` or a variant name.
#[derive(Deserialize)]
#[serde(untagged)]
enum ObjectiveRepr {
    Number(u64),
    Name(String),
}

impl TryFrom<ObjectiveRepr> for Objective {
    type Error = Error;

    fn try_from(repr: ObjectiveRepr) -> Result<Self> {
        match repr {
            ObjectiveRepr::Number(n) => n.to_string().parse(),
            ObjectiveRepr::Name(s) => s.parse(),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "ProductReg" | "product" => Ok(Objective::ProductReg),
            "2" | "SplitReg" | "split" => Ok(Objective::SplitReg),
            other => Err(Error::InvalidArgument(format!("unknown objective `{other}`"))),
        }
    }
}

/// Fitted item-side factors `A`, `B` (both p×k) and how they were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPair {
    pub a: DataMatrix,
    pub b: DataMatrix,
    pub lambda: f64,
    pub rank: usize,
    pub objective: Objective,
    /// Top-k singular values of the training matrix.
    pub sigma: Vec<f64>,
    /// Set once a diagonal rescaling has been applied.
    #[serde(default)]
    pub scaled: bool,
    /// Set once a rotation has been applied.
    #[serde(default)]
    pub rotated: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EmbeddingPair {
    pub fn new(
        a: DataMatrix,
        b: DataMatrix,
        lambda: f64,
        objective: Objective,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{} but B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        if sigma.len() != a.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} singular values for rank {}",
                sigma.len(),
                a.cols()
            )));
        }
        Ok(Self {
            rank: a.cols(),
            a,
            b,
            lambda,
            objective,
            sigma,
            scaled: false,
            rotated: false,
            warnings: Vec::new(),
        })
    }

    pub fn n_items(&self) -> usize {
        self.a.rows()
    }

    /// `A·Bᵀ`, the part of the model every gauge choice agrees on.
    pub fn product(&self) -> DataMatrix {
        self.a
            .matmul_transpose(&self.b)
            .expect("A and B share their shape")
    }
}

fn check_rank_and_lambda(x: &DataMatrix, k: usize, lambda: f64) -> Result<()> {
    let max = x.rows().min(x.cols());
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

// Per-dimension column weights for A and B; numerically-zero singular values
// get zero columns plus a warning.
fn closed_form(
    factors: &SvdFactors,
    k: usize,
    lambda: f64,
    objective: Objective,
) -> Result<EmbeddingPair> {
    let top = factors.truncate(k)?;
    let threshold = factors.zero_threshold();
    let mut a_weights = Vec::with_capacity(k);
    let mut b_weights = Vec::with_capacity(k);
    let mut padded = Vec::new();
    for (i, &s) in top.singular_values.iter().enumerate() {
        if s <= threshold {
            padded.push(i);
            a_weights.push(0.0);
            b_weights.push(0.0);
            continue;
        }
        match objective {
            Objective::ProductReg => {
                let w = (1.0 / (1.0 + lambda / (s * s))).sqrt();
                a_weights.push(w);
                b_weights.push(w);
            }
            Objective::SplitReg => {
                let keep = (1.0 - lambda / s).max(0.0);
                a_weights.push((keep / s).sqrt());
                b_weights.push((s * keep).sqrt());
            }
        }
    }
    let a = top.right.scale_columns(&a_weights)?;
    let b = top.right.scale_columns(&b_weights)?;
    let mut pair = EmbeddingPair::new(a, b, lambda, objective, top.singular_values)?;
    if !padded.is_empty() {
        pair.warnings.push(format!(
            "training matrix has only {} positive singular values; dimensions {:?} padded with zero columns",
            k - padded.len(),
            padded
        ));
    }
    Ok(pair)
}

/// Closed-form minimizer of the product-regularized objective.
pub fn solve_objective1(x: &DataMatrix, k: usize, lambda: f64) -> Result<EmbeddingPair> {
    check_rank_and_lambda(x, k, lambda)?;
    closed_form(&svd(x, k)?, k, lambda, Objective::ProductReg)
}

/// Closed-form minimizer of the split-regularized objective.
pub fn solve_objective2(x: &DataMatrix, k: usize, lambda: f64) -> Result<EmbeddingPair> {
    check_rank_and_lambda(x, k, lambda)?;
    closed_form(&svd(x, k)?, k, lambda, Objective::SplitReg)
}

pub fn solve(x: &DataMatrix, k: usize, lambda: f64, objective: Objective) -> Result<EmbeddingPair> {
    check_rank_and_lambda(x, k, lambda)?;
    closed_form(&svd(x, k)?, k, lambda, objective)
}

/// Same as [`solve`] but reuses an SVD of the training matrix computed with
/// rank at least `k`.
pub fn solve_from_svd(
    factors: &SvdFactors,
    k: usize,
    lambda: f64,
    objective: Objective,
) -> Result<EmbeddingPair> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    closed_form(factors, k, lambda, objective)
}

fn check_factor_shapes(x: &DataMatrix, a: &DataMatrix, b: &DataMatrix) -> Result<()> {
    if a.rows() != x.cols() || b.rows() != x.cols() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{}, A is {}x{}, B is {}x{}",
            x.rows(),
            x.cols(),
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// `‖X − XABᵀ‖²_F + λ‖ABᵀ‖²_F`.
pub fn objective1_loss(x: &DataMatrix, a: &DataMatrix, b: &DataMatrix, lambda: f64) -> Result<f64> {
    check_factor_shapes(x, a, b)?;
    let w = a.matmul_transpose(b)?;
    let fit = x.matmul(&w)?;
    Ok(x.frobenius_distance(&fit)?.powi(2) + lambda * w.frobenius_norm_sq())
}

/// `‖X − XABᵀ‖²_F + λ(‖XA‖²_F + ‖B‖²_F)`.
pub fn objective2_loss(x: &DataMatrix, a: &DataMatrix, b: &DataMatrix, lambda: f64) -> Result<f64> {
    check_factor_shapes(x, a, b)?;
    let xa = x.matmul(a)?;
    let fit = xa.matmul_transpose(b)?;
    Ok(x.frobenius_distance(&fit)?.powi(2)
        + lambda * (xa.frobenius_norm_sq() + b.frobenius_norm_sq()))
}

pub fn loss(
    x: &DataMatrix,
    a: &DataMatrix,
    b: &DataMatrix,
    lambda: f64,
    objective: Objective,
) -> Result<f64> {
    match objective {
        Objective::ProductReg => objective1_loss(x, a, b, lambda),
        Objective::SplitReg => objective2_loss(x, a, b, lambda),
    }
}

/// n×p scores `X·A·Bᵀ`.
pub fn predicted_scores(x: &DataMatrix, pair: &EmbeddingPair) -> Result<DataMatrix> {
    check_factor_shapes(x, &pair.a, &pair.b)?;
    x.matmul(&pair.a)?.matmul_transpose(&pair.b)
}

/// Loss plus its gradients with respect to `A` and `B`.
///
/// ```text
/// R = X − XABᵀ
/// ProductReg: G = −2XᵀR + 2λABᵀ,       ∂A = G·B,                ∂B = Gᵀ·A
/// SplitReg:   ∂A = −2Xᵀ(R·B) + 2λXᵀXA, ∂B = −2Rᵀ(XA) + 2λB
/// ```
pub fn loss_and_gradients(
    x: &DataMatrix,
    a: &DataMatrix,
    b: &DataMatrix,
    lambda: f64,
    objective: Objective,
) -> Result<(f64, DataMatrix, DataMatrix)> {
    check_factor_shapes(x, a, b)?;
    let dense = Dense::from(x);
    let (n, p, k) = (x.rows(), x.cols(), a.cols());
    let mut grad_a = vec![0.0; p * k];
    let mut grad_b = vec![0.0; p * k];
    let value = dense_loss_and_gradients(
        &dense,
        a.values(),
        b.values(),
        k,
        lambda,
        objective,
        &mut Workspace::new(n, p, k),
        &mut grad_a,
        &mut grad_b,
    );
    Ok((
        value,
        DataMatrix::from_parts(p, k, grad_a),
        DataMatrix::from_parts(p, k, grad_b),
    ))
}

/// Settings for [`gradient_descent_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub iters: usize,
    pub step: f64,
    pub seed: u64,
    /// Standard deviation of the Gaussian initialization.
    pub init_scale: f64,
    /// Stop once the gradient norm falls below `tol · (1 + ‖X‖²_F)`.
    pub tol: f64,
    /// Record the loss every this many iterations.
    pub checkpoint_every: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            iters: 200_000,
            step: 1e-3,
            seed: 0,
            init_scale: 1e-2,
            tol: 1e-13,
            checkpoint_every: 1_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub pair: EmbeddingPair,
    pub final_loss: f64,
    pub iterations: usize,
    /// Loss at every checkpoint; non-increasing.
    pub checkpoints: Vec<f64>,
    pub final_step: f64,
}

/// Full-batch gradient descent on either objective from a seeded small random
/// start. A step that would increase the loss is rejected and the step size
/// halved, so the recorded losses never increase.
pub fn gradient_descent_oracle(
    x: &DataMatrix,
    k: usize,
    lambda: f64,
    objective: Objective,
    config: &OracleConfig,
) -> Result<OracleOutcome> {
    check_rank_and_lambda(x, k, lambda)?;
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {}",
            config.step
        )));
    }
    let (n, p) = x.shape();
    let dense = Dense::from(x);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut draw = |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        config.init_scale * z
    };
    let mut a: Vec<f64> = (0..p * k).map(&mut draw).collect();
    let mut b: Vec<f64> = (0..p * k).map(&mut draw).collect();

    let mut ws = Workspace::new(n, p, k);
    let mut grad_a = vec![0.0; p * k];
    let mut grad_b = vec![0.0; p * k];
    let mut trial_a = vec![0.0; p * k];
    let mut trial_b = vec![0.0; p * k];
    let mut trial_grad_a = vec![0.0; p * k];
    let mut trial_grad_b = vec![0.0; p * k];

    let mut current = dense_loss_and_gradients(
        &dense, &a, &b, k, lambda, objective, &mut ws, &mut grad_a, &mut grad_b,
    );
    if !current.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            last_finite_loss: f64::NAN,
        });
    }
    let stop_norm = config.tol * (1.0 + x.frobenius_norm_sq());
    let mut step = config.step;
    let mut checkpoints = vec![current];
    let mut iterations = 0;
    while iterations < config.iters {
        let grad_norm = grad_a
            .iter()
            .chain(&grad_b)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        if grad_norm <= stop_norm {
            break;
        }
        iterations += 1;
        for ((t, v), g) in trial_a.iter_mut().zip(&a).zip(&grad_a) {
            *t = v - step * g;
        }
        for ((t, v), g) in trial_b.iter_mut().zip(&b).zip(&grad_b) {
            *t = v - step * g;
        }
        let candidate = dense_loss_and_gradients(
            &dense,
            &trial_a,
            &trial_b,
            k,
            lambda,
            objective,
            &mut ws,
            &mut trial_grad_a,
            &mut trial_grad_b,
        );
        if !candidate.is_finite() {
            return Err(Error::Diverged {
                iteration: iterations,
                last_finite_loss: current,
            });
        }
        if candidate > current {
            step *= 0.5;
            if step < f64::MIN_POSITIVE {
                break;
            }
        } else {
            std::mem::swap(&mut a, &mut trial_a);
            std::mem::swap(&mut b, &mut trial_b);
            std::mem::swap(&mut grad_a, &mut trial_grad_a);
            std::mem::swap(&mut grad_b, &mut trial_grad_b);
            current = candidate;
        }
        if iterations % config.checkpoint_every.max(1) == 0 {
            checkpoints.push(current);
        }
    }
    if checkpoints.last() != Some(&current) {
        checkpoints.push(current);
    }

    let sigma = svd(x, k)?.singular_values;
    let pair = EmbeddingPair::new(
        DataMatrix::new(p, k, a)?,
        DataMatrix::new(p, k, b)?,
        lambda,
        objective,
        sigma,
    )?;
    Ok(OracleOutcome {
        pair,
        final_loss: current,
        iterations,
        checkpoints,
        final_step: step,
    })
}

// Single-threaded row-major kernels for the oracle's tiny problems.
struct Dense<'a> {
    x: &'a [f64],
    n: usize,
    p: usize,
}

impl<'a> From<&'a DataMatrix> for Dense<'a> {
    fn from(m: &'a DataMatrix) -> Self {
        Dense {
            x: m.values(),
            n: m.rows(),
            p: m.cols(),
        }
    }
}

struct Workspace {
    xa: Vec<f64>,  // n×k
    r: Vec<f64>,   // n×p
    rb: Vec<f64>,  // n×k
    w: Vec<f64>,   // p×p
    g: Vec<f64>,   // p×p
    xtp: Vec<f64>, // p×k
}

impl Workspace {
    fn new(n: usize, p: usize, k: usize) -> Self {
        Workspace {
            xa: vec![0.0; n * k],
            r: vec![0.0; n * p],
            rb: vec![0.0; n * k],
            w: vec![0.0; p * p],
            g: vec![0.0; p * p],
            xtp: vec![0.0; p * k],
        }
    }
}

// out (m×c) = lhs (m×inner) · rhs (inner×c)
fn mm(lhs: &[f64], rhs: &[f64], m: usize, inner: usize, c: usize, out: &mut [f64]) {
    for i in 0..m {
        let o = &mut out[i * c..(i + 1) * c];
        o.fill(0.0);
        for t in 0..inner {
            let l = lhs[i * inner + t];
            for (oj, r) in o.iter_mut().zip(&rhs[t * c..(t + 1) * c]) {
                *oj += l * r;
            }
        }
    }
}

// out (m×c) = lhsᵀ · rhs, lhs is inner×m, rhs is inner×c
fn mtm(lhs: &[f64], rhs: &[f64], inner: usize, m: usize, c: usize, out: &mut [f64]) {
    out.fill(0.0);
    for t in 0..inner {
        for i in 0..m {
            let l = lhs[t * m + i];
            let o = &mut out[i * c..(i + 1) * c];
            for (oj, r) in o.iter_mut().zip(&rhs[t * c..(t + 1) * c]) {
                *oj += l * r;
            }
        }
    }
}

// out (m×c) = lhs · rhsᵀ, lhs is m×inner, rhs is c×inner
fn mmt(lhs: &[f64], rhs: &[f64], m: usize, inner: usize, c: usize, out: &mut [f64]) {
    for i in 0..m {
        for j in 0..c {
            out[i * c + j] = lhs[i * inner..(i + 1) * inner]
                .iter()
                .zip(&rhs[j * inner..(j + 1) * inner])
                .map(|(x, y)| x * y)
                .sum();
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dense_loss_and_gradients(
    d: &Dense<'_>,
    a: &[f64],
    b: &[f64],
    k: usize,
    lambda: f64,
    objective: Objective,
    ws: &mut Workspace,
    grad_a: &mut [f64],
    grad_b: &mut [f64],
) -> f64 {
    let (n, p) = (d.n, d.p);
    mm(d.x, a, n, p, k, &mut ws.xa);
    // R = X − (XA)·Bᵀ
    mmt(&ws.xa, b, n, k, p, &mut ws.r);
    for (r, x) in ws.r.iter_mut().zip(d.x) {
        *r = x - *r;
    }
    let fit: f64 = ws.r.iter().map(|v| v * v).sum();
    match objective {
        Objective::ProductReg => {
            mmt(a, b, p, k, p, &mut ws.w);
            // G = −2XᵀR + 2λW
            mtm(d.x, &ws.r, n, p, p, &mut ws.g);
            for (g, w) in ws.g.iter_mut().zip(&ws.w) {
                *g = -2.0 * *g + 2.0 * lambda * w;
            }
            mm(&ws.g, b, p, p, k, grad_a);
            mtm(&ws.g, a, p, p, k, grad_b);
            fit + lambda * ws.w.iter().map(|v| v * v).sum::<f64>()
        }
        Objective::SplitReg => {
            // ∂A = −2Xᵀ(RB) + 2λXᵀ(XA)
            mm(&ws.r, b, n, p, k, &mut ws.rb);
            for (rb, xa) in ws.rb.iter_mut().zip(&ws.xa) {
                *rb = -2.0 * *rb + 2.0 * lambda * xa;
            }
            mtm(d.x, &ws.rb, n, p, k, grad_a);
            // ∂B = −2Rᵀ(XA) + 2λB
            mtm(&ws.r, &ws.xa, n, p, k, &mut ws.xtp);
            for ((g, v), bb) in grad_b.iter_mut().zip(&ws.xtp).zip(b) {
                *g = -2.0 * v + 2.0 * lambda * bb;
            }
            let reg = ws.xa.iter().map(|v| v * v).sum::<f64>() + b.iter().map(|v| v * v).sum::<f64>();
            fit + lambda * reg
        }
    }
}
