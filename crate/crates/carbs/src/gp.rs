//! Gaussian-process regression: hyperparameter fitting by marginal-likelihood
//! maximization (Nelder-Mead in log space with random restarts), posterior
//! prediction, joint Thompson sampling, and conditioning on extra data at
//! fixed hyperparameters.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{kernel_value, GramScratch, HyperParams, KernelSpec, PairwiseCache};
use crate::linalg::{cholesky, cholesky_reusing, dot, CholeskyFactor};

/// Lower bound on the fitted observation-noise variance.
pub const NOISE_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("inputs and targets disagree in length ({inputs} vs {targets})")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("input dimension mismatch: expected {want}, got {got}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("Gram matrix not positive definite after jitter escalation up to {max_jitter}")]
    NotPositiveDefinite { max_jitter: f64 },
}

/// Per-point Gaussian predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

/// Controls for the marginal-likelihood search.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { restarts: 4, max_iters: 100, tolerance: 1e-5, seed: 0 }
    }
}

/// A fitted Gaussian process. Immutable after construction; prediction and
/// sampling never mutate the model.
#[derive(Debug, Clone)]
pub struct GPModel {
    kernel: KernelSpec,
    hyper: HyperParams,
    dim: usize,
    n: usize,
    /// Training inputs, flat row-major n×dim.
    x: Vec<f64>,
    /// Raw targets (including the mean offset).
    y: Vec<f64>,
    chol: CholeskyFactor,
    /// (K + σ²I)⁻¹ (y − offset)
    alpha: Vec<f64>,
    log_marginal: f64,
    jitter: f64,
}

impl GPModel {
    /// Fit hyperparameters by maximizing the log marginal likelihood with
    /// iterative local search: one default start plus `restarts` random
    /// restarts, each a Nelder-Mead run in log-parameter space.
    pub fn fit(
        inputs: &[Vec<f64>],
        targets: &[f64],
        kernel: KernelSpec,
        opts: &FitOptions,
    ) -> Result<GPModel, GpError> {
        let (x, n, dim) = flatten_inputs(inputs, targets)?;
        if n < 2 {
            return Err(GpError::TooFewObservations { need: 2, got: n });
        }

        let cache = PairwiseCache::new(&x, n, dim, kernel.uses_linear());
        let mut objective = MarginalLikelihood {
            cache: &cache,
            kernel,
            dim,
            n,
            targets,
            gram: vec![0.0; n * n],
            scratch: GramScratch::default(),
            chol_buf: Vec::new(),
            ay: Vec::new(),
            a1: Vec::new(),
        };

        // race the starts: a coarse ascent from the default start and each
        // random restart, then spend the full iteration budget only on the
        // winner, plus a polish pass from a fresh simplex. Small data sets
        // are cheap enough (and multimodal enough) that every start gets the
        // full budget there.
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let n_ls = kernel.lengthscale_count(dim);
        let coarse_iters = if n <= 40 { opts.max_iters } else { (opts.max_iters / 5).max(1) };
        let mut best_theta: Option<(Vec<f64>, f64)> = None;
        for start_idx in 0..=opts.restarts {
            let theta0 = if start_idx == 0 {
                default_start(&kernel, n_ls)
            } else {
                random_start(&kernel, n_ls, &mut rng)
            };
            let (theta, value) =
                nelder_mead(|t| objective.eval(t), &theta0, coarse_iters, opts.tolerance);
            match &best_theta {
                Some((_, best)) if *best >= value => {}
                _ => best_theta = Some((theta, value)),
            }
        }

        let (mut theta, mut value) = best_theta.expect("at least one start");
        let polish_passes = if n > 100 { 1 } else { 2 };
        for _ in 0..polish_passes {
            let (polished, polished_value) =
                nelder_mead(|t| objective.eval(t), &theta, opts.max_iters, opts.tolerance);
            let gain = polished_value - value;
            if polished_value > value {
                theta = polished;
                value = polished_value;
            }
            if gain <= opts.tolerance * value.abs().max(1.0) {
                break;
            }
        }

        // recover the profiled constant mean at the chosen hyperparameters
        let mut hyper = decode_theta(&kernel, n_ls, &theta, 0.0);
        let mut gram = vec![0.0; n * n];
        cache.fill_gram(&kernel, &hyper, &mut gram, &mut GramScratch::default());
        let (chol, _) = factor_with_jitter(&mut gram, n)?;
        hyper.mean_offset = gls_offset(&chol, targets);
        Self::condition(kernel, hyper, x, n, dim, targets.to_vec())
    }

    /// Build a model from explicit hyperparameters (no likelihood search).
    pub fn with_hyperparams(
        inputs: &[Vec<f64>],
        targets: &[f64],
        kernel: KernelSpec,
        hyper: HyperParams,
    ) -> Result<GPModel, GpError> {
        let (x, n, dim) = flatten_inputs(inputs, targets)?;
        if n == 0 {
            return Err(GpError::TooFewObservations { need: 1, got: 0 });
        }
        if hyper.lengthscales.len() != kernel.lengthscale_count(dim) {
            return Err(GpError::DimensionMismatch {
                want: kernel.lengthscale_count(dim),
                got: hyper.lengthscales.len(),
            });
        }
        Self::condition(kernel, hyper, x, n, dim, targets.to_vec())
    }

    /// Condition the kernel + hyperparameters on a data set: factor the Gram
    /// matrix (escalating jitter from 1e-8 to 1e-4 if needed) and precompute
    /// the prediction weights.
    fn condition(
        kernel: KernelSpec,
        hyper: HyperParams,
        x: Vec<f64>,
        n: usize,
        dim: usize,
        y: Vec<f64>,
    ) -> Result<GPModel, GpError> {
        let mut gram = vec![0.0; n * n];
        let cache = PairwiseCache::new(&x, n, dim, kernel.uses_linear());
        cache.fill_gram(&kernel, &hyper, &mut gram, &mut GramScratch::default());

        let (chol, jitter) = factor_with_jitter(&mut gram, n)?;
        let resid: Vec<f64> = y.iter().map(|t| t - hyper.mean_offset).collect();
        let alpha = chol.solve(&resid);
        let fit = -0.5 * dot(&resid, &alpha);
        let log_marginal = fit - 0.5 * chol.log_det() - 0.5 * n as f64 * LN_2PI;

        Ok(GPModel { kernel, hyper, dim, n, x, y, chol, alpha, log_marginal, jitter })
    }

    /// Return a model conditioned on the union of the original and extra
    /// data, hyperparameters (and mean offset) held fixed.
    pub fn condition_on(
        &self,
        extra_inputs: &[Vec<f64>],
        extra_targets: &[f64],
    ) -> Result<GPModel, GpError> {
        if extra_inputs.len() != extra_targets.len() {
            return Err(GpError::LengthMismatch {
                inputs: extra_inputs.len(),
                targets: extra_targets.len(),
            });
        }
        if extra_inputs.is_empty() {
            return Ok(self.clone());
        }
        let mut x = self.x.clone();
        let mut y = self.y.clone();
        for (xi, &ti) in extra_inputs.iter().zip(extra_targets.iter()) {
            if xi.len() != self.dim {
                return Err(GpError::DimensionMismatch { want: self.dim, got: xi.len() });
            }
            if !ti.is_finite() || xi.iter().any(|v| !v.is_finite()) {
                return Err(GpError::NonFinite);
            }
            x.extend_from_slice(xi);
            y.push(ti);
        }
        let n = self.n + extra_inputs.len();
        Self::condition(self.kernel, self.hyper.clone(), x, n, self.dim, y)
    }

    /// Standard GP predictive mean and (latent, noise-free) variance.
    pub fn predict(&self, query: &[f64]) -> Posterior {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        let kstar = self.cross_covariance(query);
        let mean = self.hyper.mean_offset + dot(&kstar, &self.alpha);
        let v = self.chol.solve_lower(&kstar);
        let kss = kernel_value(&self.kernel, &self.hyper, query, query);
        let variance = (kss - dot(&v, &v)).max(0.0);
        Posterior { mean, variance }
    }

    /// One joint draw from the posterior over `queries` (full covariance).
    /// Deterministic given the rng state.
    pub fn thompson_sample<R: Rng>(&self, queries: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
        assert!(!queries.is_empty(), "thompson_sample needs at least one query");
        let m = queries.len();
        // cross-covariance columns, whitened through the training factor
        let mut whitened: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut means = Vec::with_capacity(m);
        for q in queries {
            assert_eq!(q.len(), self.dim, "query dimension mismatch");
            let kstar = self.cross_covariance(q);
            means.push(self.hyper.mean_offset + dot(&kstar, &self.alpha));
            whitened.push(self.chol.solve_lower(&kstar));
        }
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let kij = kernel_value(&self.kernel, &self.hyper, &queries[i], &queries[j]);
                let c = kij - dot(&whitened[i], &whitened[j]);
                cov[i * m + j] = c;
                cov[j * m + i] = c;
            }
        }
        let factor = factor_with_jitter(&mut cov, m)
            .map(|(f, _)| f)
            .unwrap_or_else(|_| {
                // fully degenerate covariance: fall back to a diagonal of
                // tiny independent noise so sampling stays well defined
                let mut diag = vec![0.0; m * m];
                for i in 0..m {
                    diag[i * m + i] = 1e-12;
                }
                cholesky(&diag, m).expect("diagonal is positive definite")
            });
        let eps: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        (0..m)
            .map(|i| means[i] + dot(&factor.row(i)[..=i], &eps[..=i]))
            .collect()
    }

    fn cross_covariance(&self, query: &[f64]) -> Vec<f64> {
        let mut kstar = Vec::new();
        self.cross_covariance_into(query, &mut kstar);
        kstar
    }

    fn cross_covariance_into(&self, query: &[f64], kstar: &mut Vec<f64>) {
        kstar.clear();
        kstar.extend((0..self.n).map(|i| {
            kernel_value(
                &self.kernel,
                &self.hyper,
                &self.x[i * self.dim..(i + 1) * self.dim],
                query,
            )
        }));
    }

    /// A prediction cursor that reuses its intermediate buffers; equivalent
    /// to repeated [`GPModel::predict`] calls but cheaper in tight loops.
    pub fn predictor(&self) -> Predictor<'_> {
        Predictor { model: self, kstar: Vec::new() }
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal
    }

    pub fn hyperparams(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn input_dim(&self) -> usize {
        self.dim
    }

    /// Jitter added to the Gram diagonal to reach a positive-definite factor.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

/// See [`GPModel::predictor`].
pub struct Predictor<'m> {
    model: &'m GPModel,
    kstar: Vec<f64>,
}

impl Predictor<'_> {
    pub fn predict(&mut self, query: &[f64]) -> Posterior {
        let m = self.model;
        assert_eq!(query.len(), m.dim, "query dimension mismatch");
        m.cross_covariance_into(query, &mut self.kstar);
        let mean = m.hyper.mean_offset + dot(&self.kstar, &m.alpha);
        m.chol.solve_lower_in_place(&mut self.kstar);
        let kss = kernel_value(&m.kernel, &m.hyper, query, query);
        let variance = (kss - dot(&self.kstar, &self.kstar)).max(0.0);
        Posterior { mean, variance }
    }
}

fn flatten_inputs(inputs: &[Vec<f64>], targets: &[f64]) -> Result<(Vec<f64>, usize, usize), GpError> {
    if inputs.len() != targets.len() {
        return Err(GpError::LengthMismatch { inputs: inputs.len(), targets: targets.len() });
    }
    let n = inputs.len();
    let dim = inputs.first().map(|v| v.len()).unwrap_or(0);
    let mut x = Vec::with_capacity(n * dim);
    for row in inputs {
        if row.len() != dim {
            return Err(GpError::DimensionMismatch { want: dim, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite);
        }
        x.extend_from_slice(row);
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(GpError::NonFinite);
    }
    Ok((x, n, dim))
}

/// Factor `a + jitter I`, escalating jitter 1e-8 → 1e-4 (×10 steps) on
/// failure. `a` is clobbered.
fn factor_with_jitter(a: &mut [f64], n: usize) -> Result<(CholeskyFactor, f64), GpError> {
    if let Ok(f) = cholesky(a, n) { return Ok((f, 0.0)) }
    let mut jitter = 1e-8;
    while jitter <= 1e-4 {
        for i in 0..n {
            a[i * n + i] += jitter;
        }
        if let Ok(f) = cholesky(a, n) {
            return Ok((f, jitter));
        }
        // remove before escalating so the total stays at the nominal level
        for i in 0..n {
            a[i * n + i] -= jitter;
        }
        jitter *= 10.0;
    }
    Err(GpError::NotPositiveDefinite { max_jitter: 1e-4 })
}

// --- log-marginal-likelihood objective over log-space hyperparameters ------

/// θ layout: [ln linear_variance]? , ln signal_variance, ln ℓ_1..ℓ_L,
/// ln (noise_variance − NOISE_FLOOR offset term). The constant mean is
/// profiled out analytically at each evaluation.
struct MarginalLikelihood<'a> {
    cache: &'a PairwiseCache,
    kernel: KernelSpec,
    dim: usize,
    n: usize,
    targets: &'a [f64],
    gram: Vec<f64>,
    scratch: GramScratch,
    chol_buf: Vec<f64>,
    ay: Vec<f64>,
    a1: Vec<f64>,
}

impl MarginalLikelihood<'_> {
    fn eval(&mut self, theta: &[f64]) -> f64 {
        let n_ls = self.kernel.lengthscale_count(self.dim);
        let hyper = decode_theta(&self.kernel, n_ls, theta, 0.0);
        self.cache.fill_gram(&self.kernel, &hyper, &mut self.gram, &mut self.scratch);
        let chol = match cholesky_reusing(&self.gram, self.n, std::mem::take(&mut self.chol_buf)) {
            Ok(f) => f,
            Err((_, buf)) => {
                self.chol_buf = buf;
                return f64::NEG_INFINITY;
            }
        };
        self.ay.clear();
        self.ay.extend_from_slice(self.targets);
        chol.solve_in_place(&mut self.ay);
        self.a1.clear();
        self.a1.resize(self.n, 1.0);
        chol.solve_in_place(&mut self.a1);
        let denom: f64 = self.a1.iter().sum();
        let offset =
            if denom.abs() > 1e-300 { self.ay.iter().sum::<f64>() / denom } else { 0.0 };
        // alpha for the residual, by linearity of the solve
        let fit: f64 = -0.5
            * self
                .targets
                .iter()
                .zip(self.ay.iter().zip(self.a1.iter()))
                .map(|(&y, (&ayi, &a1i))| (y - offset) * (ayi - offset * a1i))
                .sum::<f64>();
        let value = fit - 0.5 * chol.log_det() - 0.5 * self.n as f64 * LN_2PI;
        self.chol_buf = chol.into_buffer();
        if value.is_finite() {
            value
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Generalized-least-squares estimate of a constant mean under the
/// factored covariance: `1ᵀ A⁻¹ y / 1ᵀ A⁻¹ 1`.
fn gls_offset(chol: &CholeskyFactor, targets: &[f64]) -> f64 {
    let ones = vec![1.0; targets.len()];
    let a1 = chol.solve(&ones);
    let ay = chol.solve(targets);
    let denom: f64 = a1.iter().sum();
    if denom.abs() > 1e-300 {
        ay.iter().sum::<f64>() / denom
    } else {
        targets.iter().sum::<f64>() / targets.len() as f64
    }
}

fn theta_len(kernel: &KernelSpec, n_ls: usize) -> usize {
    usize::from(kernel.uses_linear()) + 1 + n_ls + 1
}

fn decode_theta(kernel: &KernelSpec, n_ls: usize, theta: &[f64], offset: f64) -> HyperParams {
    debug_assert_eq!(theta.len(), theta_len(kernel, n_ls));
    let clamp = |t: f64| t.clamp(-20.0, 20.0).exp();
    let mut it = theta.iter().copied();
    let linear_variance = if kernel.uses_linear() { clamp(it.next().unwrap()) } else { 0.0 };
    let signal_variance = clamp(it.next().unwrap());
    let lengthscales: Vec<f64> = (0..n_ls).map(|_| clamp(it.next().unwrap())).collect();
    let noise_variance = NOISE_FLOOR + clamp(it.next().unwrap());
    HyperParams {
        linear_variance,
        signal_variance,
        lengthscales,
        noise_variance,
        mean_offset: offset,
    }
}

fn default_start(kernel: &KernelSpec, n_ls: usize) -> Vec<f64> {
    let mut theta = Vec::with_capacity(theta_len(kernel, n_ls));
    if kernel.uses_linear() {
        theta.push(0.0); // linear variance 1
    }
    theta.push(0.0); // signal variance 1
    theta.extend(std::iter::repeat_n(0.0, n_ls)); // lengthscales 1
    theta.push((0.01f64).ln()); // noise 0.01
    theta
}

/// Random restart draw: variances log-uniform on [1e-2, 10], lengthscales on
/// [0.1, 10], noise on [1e-6, 1].
pub(crate) fn random_start<R: Rng>(kernel: &KernelSpec, n_ls: usize, rng: &mut R) -> Vec<f64> {
    let mut theta = Vec::with_capacity(theta_len(kernel, n_ls));
    let unif = |rng: &mut R, lo: f64, hi: f64| rng.gen_range(lo.ln()..hi.ln());
    if kernel.uses_linear() {
        theta.push(unif(rng, 1e-2, 10.0));
    }
    theta.push(unif(rng, 1e-2, 10.0));
    for _ in 0..n_ls {
        theta.push(unif(rng, 0.1, 10.0));
    }
    theta.push(unif(rng, 1e-6, 1.0));
    theta
}

/// Draw a full random hyperparameter set from the restart distribution
/// (exposed so tests can compare fitted likelihoods against random draws).
pub fn random_hyperparams<R: Rng>(
    kernel: &KernelSpec,
    dim: usize,
    offset: f64,
    rng: &mut R,
) -> HyperParams {
    let n_ls = kernel.lengthscale_count(dim);
    let theta = random_start(kernel, n_ls, rng);
    decode_theta(kernel, n_ls, &theta, offset)
}

// --- Nelder-Mead maximization ----------------------------------------------

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    max_iters: usize,
    tolerance: f64,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    // maximize f by minimizing -f
    let mut eval = |x: &[f64]| -f(x);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += 0.5;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    for _ in 0..max_iters {
        // order ascending (best first)
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        // tolerance scales with the objective magnitude: log marginals grow
        // with the data size and an absolute spread would never be met there
        if (values[worst] - values[best]).abs()
            < tolerance * values[best].abs().max(1.0)
        {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for k in 0..dim {
                centroid[k] += simplex[i][k];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let reflect: Vec<f64> = (0..dim)
            .map(|k| centroid[k] + (centroid[k] - simplex[worst][k]))
            .collect();
        let f_reflect = eval(&reflect);

        if f_reflect < values[best] {
            let expand: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + 2.0 * (centroid[k] - simplex[worst][k]))
                .collect();
            let f_expand = eval(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + 0.5 * (simplex[worst][k] - centroid[k]))
                .collect();
            let f_contract = eval(&contract);
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                // shrink toward the best vertex
                let best_point = simplex[best].clone();
                for i in 0..=dim {
                    if i == best {
                        continue;
                    }
                    for k in 0..dim {
                        simplex[i][k] = best_point[k] + 0.5 * (simplex[i][k] - best_point[k]);
                    }
                    values[i] = eval(&simplex[i]);
                }
            }
        }
    }

    let mut best_idx = 0;
    for i in 1..=dim {
        if values[i] < values[best_idx] {
            best_idx = i;
        }
    }
    (simplex[best_idx].clone(), -values[best_idx])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_hyper(d: usize) -> HyperParams {
        HyperParams {
            linear_variance: 1.0,
            signal_variance: 1.0,
            lengthscales: vec![1.0; d],
            noise_variance: 1e-4,
            mean_offset: 0.0,
        }
    }

    #[test]
    fn nelder_mead_finds_quadratic_maximum() {
        let (x, v) = nelder_mead(
            |t| -(t[0] - 2.0).powi(2) - (t[1] + 1.0).powi(2),
            &[0.0, 0.0],
            200,
            1e-10,
        );
        assert!((x[0] - 2.0).abs() < 1e-3, "{x:?}");
        assert!((x[1] + 1.0).abs() < 1e-3, "{x:?}");
        assert!(v > -1e-5);
    }

    #[test]
    fn duplicate_inputs_with_different_targets_need_noise() {
        let inputs = vec![vec![0.3, -0.2], vec![0.3, -0.2], vec![1.0, 0.5], vec![-1.0, 0.2]];
        let targets = vec![1.0, 3.0, 0.0, -1.0];
        let model = GPModel::fit(
            &inputs,
            &targets,
            KernelSpec::linear_plus_matern(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(model.hyperparams().noise_variance > 1e-4);
        let p = model.predict(&[0.3, -0.2]);
        assert!((p.mean - 2.0).abs() < 0.9, "mean at duplicate {p:?}");
    }

    #[test]
    fn interpolates_linear_function() {
        // noiseless samples from a linear function with a linear+Matérn kernel
        let inputs: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64 / 3.0 - 1.5, (i as f64 * 0.7).sin()])
            .collect();
        let targets: Vec<f64> = inputs.iter().map(|x| 2.0 * x[0] - 0.5 * x[1] + 0.3).collect();
        let model = GPModel::fit(
            &inputs,
            &targets,
            KernelSpec::linear_plus_matern(),
            &FitOptions::default(),
        )
        .unwrap();
        for (x, &t) in inputs.iter().zip(targets.iter()) {
            let p = model.predict(x);
            assert!((p.mean - t).abs() < 1e-4, "predict {p:?} vs target {t}");
        }
    }

    #[test]
    fn single_point_model_predicts_its_target() {
        let model = GPModel::with_hyperparams(
            &[vec![0.0]],
            &[0.0],
            KernelSpec::linear_plus_matern(),
            HyperParams { noise_variance: NOISE_FLOOR, ..default_hyper(1) },
        )
        .unwrap();
        let p = model.predict(&[0.0]);
        assert!(p.mean.abs() < 1e-12);
        assert!(p.variance < 2.0 * NOISE_FLOOR, "variance {p:?}");
    }

    #[test]
    fn conditioning_on_own_prediction_shrinks_variance() {
        let inputs = vec![vec![-1.0], vec![0.0], vec![1.0], vec![2.0]];
        let targets = vec![0.5, 0.0, -0.5, 0.3];
        let model = GPModel::with_hyperparams(
            &inputs,
            &targets,
            KernelSpec::linear_plus_matern(),
            HyperParams { noise_variance: 0.01, ..default_hyper(1) },
        )
        .unwrap();
        let q = vec![0.6];
        let before = model.predict(&q);
        let cond = model.condition_on(std::slice::from_ref(&q), &[before.mean]).unwrap();
        let after = cond.predict(&q);
        assert!((after.mean - before.mean).abs() < 1e-6);
        assert!(after.variance < before.variance);
    }

    #[test]
    fn condition_on_empty_is_identity() {
        let model = GPModel::with_hyperparams(
            &[vec![0.0], vec![1.0]],
            &[0.0, 1.0],
            KernelSpec::rbf(),
            default_hyper(1),
        )
        .unwrap();
        let same = model.condition_on(&[], &[]).unwrap();
        let p0 = model.predict(&[0.4]);
        let p1 = same.predict(&[0.4]);
        assert_eq!(p0, p1);
    }

    #[test]
    fn condition_on_matches_scratch_fit_at_fixed_hyperparams() {
        let hyper = HyperParams {
            linear_variance: 0.5,
            signal_variance: 1.2,
            lengthscales: vec![0.8, 1.3],
            noise_variance: 0.05,
            mean_offset: 0.2,
        };
        let base_x = vec![vec![0.0, 0.0], vec![1.0, -0.5], vec![-0.3, 0.4]];
        let base_y = vec![0.1, 0.9, -0.2];
        let extra_x = vec![vec![0.5, 0.5], vec![-1.0, 1.0]];
        let extra_y = vec![0.4, -0.6];

        let model = GPModel::with_hyperparams(
            &base_x,
            &base_y,
            KernelSpec::linear_plus_matern(),
            hyper.clone(),
        )
        .unwrap();
        let conditioned = model.condition_on(&extra_x, &extra_y).unwrap();

        let mut all_x = base_x.clone();
        all_x.extend(extra_x.iter().cloned());
        let mut all_y = base_y.clone();
        all_y.extend(extra_y.iter().copied());
        let scratch = GPModel::with_hyperparams(
            &all_x,
            &all_y,
            KernelSpec::linear_plus_matern(),
            hyper,
        )
        .unwrap();

        for q in [[0.2, 0.2], [-0.8, 0.9], [2.0, -2.0]] {
            let a = conditioned.predict(&q);
            let b = scratch.predict(&q);
            assert!((a.mean - b.mean).abs() < 1e-6, "{a:?} vs {b:?}");
            assert!((a.variance - b.variance).abs() < 1e-6, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn thompson_draws_are_seed_deterministic() {
        let model = GPModel::with_hyperparams(
            &[vec![0.0], vec![1.0], vec![-1.0]],
            &[0.0, 1.0, -0.5],
            KernelSpec::linear_plus_matern(),
            HyperParams { noise_variance: 0.01, ..default_hyper(1) },
        )
        .unwrap();
        let queries = vec![vec![0.2], vec![0.8], vec![1.5]];
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let d1 = model.thompson_sample(&queries, &mut r1);
        let d2 = model.thompson_sample(&queries, &mut r2);
        assert_eq!(d1, d2);
    }

    #[test]
    fn thompson_coincident_queries_draw_identical_values() {
        let model = GPModel::with_hyperparams(
            &[vec![0.0], vec![1.0]],
            &[0.0, 1.0],
            KernelSpec::linear_plus_matern(),
            HyperParams { noise_variance: 0.01, ..default_hyper(1) },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = model.thompson_sample(&[vec![0.4], vec![0.4]], &mut rng);
        // duplicates separate only by the sqrt of the 1e-8 jitter
        assert!((draws[0] - draws[1]).abs() < 1e-3, "{draws:?}");
    }

    #[test]
    fn thompson_moments_match_posterior() {
        let model = GPModel::with_hyperparams(
            &[vec![-1.0], vec![0.2], vec![1.3]],
            &[0.4, -0.1, 0.9],
            KernelSpec::linear_plus_matern(),
            HyperParams { noise_variance: 0.05, ..default_hyper(1) },
        )
        .unwrap();
        let queries = vec![vec![-0.5], vec![0.6], vec![2.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let mut sums = vec![0.0; queries.len()];
        let mut sq_sums = vec![0.0; queries.len()];
        for _ in 0..n {
            let draw = model.thompson_sample(&queries, &mut rng);
            for (k, v) in draw.iter().enumerate() {
                sums[k] += v;
                sq_sums[k] += v * v;
            }
        }
        for (k, q) in queries.iter().enumerate() {
            let post = model.predict(q);
            let mc_mean = sums[k] / n as f64;
            let mc_var = sq_sums[k] / n as f64 - mc_mean * mc_mean;
            // mean within 3 standard errors of the Monte-Carlo estimate
            let se = (post.variance / n as f64).sqrt();
            assert!(
                (mc_mean - post.mean).abs() < 3.0 * se.max(1e-12),
                "query {k}: mc mean {mc_mean} vs posterior {}",
                post.mean
            );
            // per-point draw variance within 10% of the predictive variance
            assert!(
                (mc_var - post.variance).abs() <= 0.1 * post.variance.max(1e-12),
                "query {k}: mc var {mc_var} vs posterior {}",
                post.variance
            );
        }
    }

    #[test]
    fn fit_rejects_tiny_or_malformed_data() {
        let k = KernelSpec::linear_plus_matern();
        assert!(matches!(
            GPModel::fit(&[vec![0.0]], &[1.0], k, &FitOptions::default()),
            Err(GpError::TooFewObservations { .. })
        ));
        assert!(matches!(
            GPModel::fit(&[vec![0.0], vec![f64::NAN]], &[1.0, 2.0], k, &FitOptions::default()),
            Err(GpError::NonFinite)
        ));
        assert!(matches!(
            GPModel::fit(&[vec![0.0], vec![1.0, 2.0]], &[1.0, 2.0], k, &FitOptions::default()),
            Err(GpError::DimensionMismatch { .. })
        ));
    }
}
