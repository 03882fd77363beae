//! Covariance functions for the GP surrogates: the sum of a linear and a
//! Matérn-5/2 kernel (output, cost, and failure models) and an RBF kernel
//! (Pareto-front model).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `σ²_lin ⟨x, x'⟩ + σ²_mat · Matérn_{5/2}(r)`
    LinearPlusMatern,
    /// `σ²_rbf · exp(−r² / 2)`
    Rbf,
}

/// Kernel configuration. Matérn smoothness is fixed at 5/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// One lengthscale per input dimension when true, a single shared
    /// lengthscale otherwise.
    pub ard: bool,
}

impl KernelSpec {
    pub fn linear_plus_matern() -> Self {
        KernelSpec { kind: KernelKind::LinearPlusMatern, ard: true }
    }

    pub fn rbf() -> Self {
        KernelSpec { kind: KernelKind::Rbf, ard: true }
    }

    /// Number of lengthscale hyperparameters for `dim` input dimensions.
    pub fn lengthscale_count(&self, dim: usize) -> usize {
        if self.ard {
            dim
        } else {
            1
        }
    }

    pub fn uses_linear(&self) -> bool {
        self.kind == KernelKind::LinearPlusMatern
    }
}

/// Kernel hyperparameters (plus the constant mean offset fitted alongside
/// them). Variances are non-negative; lengthscales strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Variance of the linear component; 0 and unused for RBF kernels.
    pub linear_variance: f64,
    /// Amplitude of the stationary component (Matérn or RBF).
    pub signal_variance: f64,
    /// Per-dimension (ARD) or shared lengthscales.
    pub lengthscales: Vec<f64>,
    /// Observation noise variance, floored at [`crate::gp::NOISE_FLOOR`].
    pub noise_variance: f64,
    /// Constant mean, set to the empirical target mean at fit time.
    pub mean_offset: f64,
}

const SQRT_5: f64 = 2.236_067_977_499_79;

#[inline]
fn matern52(r: f64) -> f64 {
    let a = SQRT_5 * r;
    (1.0 + a + a * a / 3.0) * (-a).exp()
}

/// Scaled squared distance `Σ_k ((x_k − z_k) / ℓ_k)²`.
#[inline]
fn scaled_sq_dist(spec: &KernelSpec, hyper: &HyperParams, x: &[f64], z: &[f64]) -> f64 {
    let mut r2 = 0.0;
    if spec.ard {
        for k in 0..x.len() {
            let d = (x[k] - z[k]) / hyper.lengthscales[k];
            r2 += d * d;
        }
    } else {
        let l = hyper.lengthscales[0];
        for k in 0..x.len() {
            let d = (x[k] - z[k]) / l;
            r2 += d * d;
        }
    }
    r2
}

/// Kernel value between two points.
pub fn kernel_value(spec: &KernelSpec, hyper: &HyperParams, x: &[f64], z: &[f64]) -> f64 {
    let r2 = scaled_sq_dist(spec, hyper, x, z);
    match spec.kind {
        KernelKind::LinearPlusMatern => {
            let dot: f64 = x.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            hyper.linear_variance * dot + hyper.signal_variance * matern52(r2.sqrt())
        }
        KernelKind::Rbf => hyper.signal_variance * (-0.5 * r2).exp(),
    }
}

/// Reusable buffers for [`PairwiseCache::fill_gram`].
#[derive(Debug, Default)]
pub struct GramScratch {
    r2: Vec<f64>,
    arg: Vec<f64>,
    values: Vec<f64>,
}

/// Precomputed pairwise statistics for one training set, reused across the
/// many Gram evaluations of the hyperparameter search.
pub struct PairwiseCache {
    n: usize,
    dim: usize,
    /// Lower triangle (row-major, i >= j) of per-dimension squared
    /// differences, laid out per dimension.
    sq_diff: Vec<f64>,
    /// Lower triangle of dot products ⟨x_i, x_j⟩ (only for linear kernels).
    dots: Vec<f64>,
}

impl PairwiseCache {
    pub fn new(x: &[f64], n: usize, dim: usize, needs_dots: bool) -> Self {
        let tri = n * (n + 1) / 2;
        let mut sq_diff = vec![0.0; tri * dim];
        let mut dots = vec![0.0; if needs_dots { tri } else { 0 }];
        let mut idx = 0;
        for i in 0..n {
            let xi = &x[i * dim..(i + 1) * dim];
            for j in 0..=i {
                let xj = &x[j * dim..(j + 1) * dim];
                for k in 0..dim {
                    let d = xi[k] - xj[k];
                    sq_diff[k * tri + idx] = d * d;
                }
                if needs_dots {
                    dots[idx] = crate::linalg::dot(xi, xj);
                }
                idx += 1;
            }
        }
        PairwiseCache { n, dim, sq_diff, dots }
    }

    /// Fill `gram` (dense row-major n×n, both triangles) with
    /// `K + noise_variance · I` under `hyper`. `scratch` holds reusable
    /// intermediate buffers.
    pub fn fill_gram(
        &self,
        spec: &KernelSpec,
        hyper: &HyperParams,
        gram: &mut [f64],
        scratch: &mut GramScratch,
    ) {
        let n = self.n;
        let tri = n * (n + 1) / 2;
        debug_assert_eq!(gram.len(), n * n);

        // accumulate scaled squared distances into the lower triangle
        scratch.r2.clear();
        scratch.r2.resize(tri, 0.0);
        let r2 = &mut scratch.r2;
        if spec.ard {
            for k in 0..self.dim {
                let w = 1.0 / (hyper.lengthscales[k] * hyper.lengthscales[k]);
                let col = &self.sq_diff[k * tri..(k + 1) * tri];
                for (acc, &d2) in r2.iter_mut().zip(col.iter()) {
                    *acc = d2.mul_add(w, *acc);
                }
            }
        } else {
            let w = 1.0 / (hyper.lengthscales[0] * hyper.lengthscales[0]);
            for k in 0..self.dim {
                let col = &self.sq_diff[k * tri..(k + 1) * tri];
                for (acc, &d2) in r2.iter_mut().zip(col.iter()) {
                    *acc = d2.mul_add(w, *acc);
                }
            }
        }

        // batch-evaluate the stationary component over the triangle
        let values = &mut scratch.values;
        values.clear();
        values.resize(tri, 0.0);
        match spec.kind {
            KernelKind::LinearPlusMatern => {
                let arg = &mut scratch.arg;
                arg.clear();
                arg.resize(tri, 0.0);
                for (a, &d2) in arg.iter_mut().zip(r2.iter()) {
                    *a = -SQRT_5 * d2.sqrt();
                }
                values.copy_from_slice(arg);
                crate::math::exp_in_place(values);
                let sig = hyper.signal_variance;
                for (v, &a) in values.iter_mut().zip(arg.iter()) {
                    // a = -sqrt(5) r, so the polynomial factor is 1 - a + a²/3
                    *v *= sig * (a * a).mul_add(1.0 / 3.0, 1.0 - a);
                }
            }
            KernelKind::Rbf => {
                for (v, &d2) in values.iter_mut().zip(r2.iter()) {
                    *v = -0.5 * d2;
                }
                crate::math::exp_in_place(values);
                let sig = hyper.signal_variance;
                for v in values.iter_mut() {
                    *v *= sig;
                }
            }
        }
        if spec.uses_linear() {
            let lin = hyper.linear_variance;
            for (v, &d) in values.iter_mut().zip(self.dots.iter()) {
                *v = d.mul_add(lin, *v);
            }
        }

        let mut idx = 0;
        for i in 0..n {
            for j in 0..=i {
                let mut v = values[idx];
                if i == j {
                    v += hyper.noise_variance;
                }
                gram[i * n + j] = v;
                gram[j * n + i] = v;
                idx += 1;
            }
        }
    }
}
