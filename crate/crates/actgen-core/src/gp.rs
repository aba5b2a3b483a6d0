//! Gaussian-process surrogate over sequences with a categorical
//! automatic-relevance-determination kernel, Cholesky-backed posterior
//! queries, and the probability-of-improvement acquisition.
//!
//! The kernel is k(x, x') = scale * exp(-(1/M) sum_m 1[x_m != x'_m] / l_m);
//! the mismatch indicator makes identical sequences maximally correlated.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::seq::Sequence;

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalKernel {
    scale: f64,
    lengthscales: Vec<f64>,
}

impl CategoricalKernel {
    pub fn new(scale: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParam("kernel scale must be positive"));
        }
        if lengthscales.is_empty() || lengthscales.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParam("lengthscales must be positive"));
        }
        Ok(CategoricalKernel { scale, lengthscales })
    }

    /// Shared lengthscale across all positions.
    pub fn isotropic(scale: f64, lengthscale: f64, seq_len: usize) -> Result<Self> {
        Self::new(scale, vec![lengthscale; seq_len])
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seq_len(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn eval(&self, a: &Sequence, b: &Sequence) -> Result<f64> {
        let m = self.lengthscales.len();
        if a.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: a.len() });
        }
        if b.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: b.len() });
        }
        let mut acc = 0.0;
        for i in 0..m {
            if a.token(i) != b.token(i) {
                acc += 1.0 / self.lengthscales[i];
            }
        }
        Ok(self.scale * math::exp(-acc / m as f64))
    }
}

/// Fitted GP: training inputs, the packed lower Cholesky factor of
/// K + noise*I, and the solved weights alpha = (K + noise*I)^-1 y.
#[derive(Clone, Debug)]
pub struct GpModel {
    kernel: CategoricalKernel,
    noise_var: f64,
    x: Vec<Sequence>,
    y: Vec<f64>,
    /// Row-packed lower triangle: row i occupies i(i+1)/2 .. i(i+1)/2 + i + 1.
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

impl GpModel {
    /// Fit from scratch; an empty dataset yields the prior.
    pub fn fit(
        kernel: CategoricalKernel,
        noise_var: f64,
        x: Vec<Sequence>,
        y: Vec<f64>,
    ) -> Result<Self> {
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidParam("noise variance must be positive"));
        }
        if x.len() != y.len() {
            return Err(Error::ShapeMismatch { expected: x.len(), got: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        let mut model =
            GpModel { kernel, noise_var, x: Vec::new(), y: Vec::new(), chol: Vec::new(), alpha: Vec::new() };
        for (xi, yi) in x.into_iter().zip(y) {
            model.extend(xi, yi)?;
        }
        Ok(model)
    }

    pub fn prior(kernel: CategoricalKernel, noise_var: f64) -> Result<Self> {
        Self::fit(kernel, noise_var, Vec::new(), Vec::new())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn kernel(&self) -> &CategoricalKernel {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn train_x(&self) -> &[Sequence] {
        &self.x
    }

    /// Append one observation with a rank-one Cholesky extension.
    pub fn extend(&mut self, x: Sequence, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::NonFinite("observation"));
        }
        let n = self.x.len();
        let mut row = vec![0.0; n + 1];
        for i in 0..n {
            row[i] = self.kernel.eval(&self.x[i], &x)?;
        }
        row[n] = self.kernel.eval(&x, &x)? + self.noise_var;
        // Forward substitution against the existing factor.
        for i in 0..n {
            let off = i * (i + 1) / 2;
            let mut s = row[i];
            for j in 0..i {
                s -= self.chol[off + j] * row[j];
            }
            row[i] = s / self.chol[off + i];
        }
        let mut diag = row[n];
        for j in 0..n {
            diag -= row[j] * row[j];
        }
        if diag <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        row[n] = math::sqrt(diag);
        self.chol.extend_from_slice(&row);
        self.x.push(x);
        self.y.push(y);
        self.refresh_alpha();
        Ok(())
    }

    fn refresh_alpha(&mut self) {
        let n = self.x.len();
        let mut a = self.y.clone();
        // Solve L u = y.
        for i in 0..n {
            let off = i * (i + 1) / 2;
            let mut s = a[i];
            for j in 0..i {
                s -= self.chol[off + j] * a[j];
            }
            a[i] = s / self.chol[off + i];
        }
        // Solve L^T alpha = u.
        for i in (0..n).rev() {
            let mut s = a[i];
            for k in i + 1..n {
                s -= self.chol[k * (k + 1) / 2 + i] * a[k];
            }
            a[i] = s / self.chol[i * (i + 1) / 2 + i];
        }
        self.alpha = a;
    }

    /// Posterior predictive mean and variance at x. With no data this is the
    /// prior (0, k(x, x)). Variance is clamped at zero from below.
    pub fn posterior(&self, x: &Sequence) -> Result<(f64, f64)> {
        let n = self.x.len();
        let kxx = self.kernel.eval(x, x)?;
        if n == 0 {
            return Ok((0.0, kxx));
        }
        let mut k = vec![0.0; n];
        for i in 0..n {
            k[i] = self.kernel.eval(&self.x[i], x)?;
        }
        let mut mean = 0.0;
        for i in 0..n {
            mean += k[i] * self.alpha[i];
        }
        // v = L^-1 k; variance = k(x,x) - v.v
        let mut explained = 0.0;
        for i in 0..n {
            let off = i * (i + 1) / 2;
            let mut s = k[i];
            for j in 0..i {
                s -= self.chol[off + j] * k[j];
            }
            let v = s / self.chol[off + i];
            k[i] = v;
            explained += v * v;
        }
        Ok((mean, (kxx - explained).max(0.0)))
    }

    /// Probability of (noisy) improvement over tau:
    /// Phi((mu - tau) / sqrt(var + noise_var)). `include_noise = false`
    /// restores the noiseless form with sqrt(var) in the denominator.
    pub fn pi_with(&self, x: &Sequence, tau: f64, include_noise: bool) -> Result<f64> {
        let (mean, var) = self.posterior(x)?;
        let denom2 = if include_noise { var + self.noise_var } else { var };
        if denom2 <= 0.0 {
            return Ok(if mean > tau { 1.0 } else { 0.0 });
        }
        Ok(math::norm_cdf((mean - tau) / math::sqrt(denom2)))
    }

    pub fn pi_acquisition(&self, x: &Sequence, tau: f64) -> Result<f64> {
        self.pi_with(x, tau, true)
    }

    /// log of the PI acquisition, stable deep in the tails.
    pub fn log_pi_with(&self, x: &Sequence, tau: f64, include_noise: bool) -> Result<f64> {
        let (mean, var) = self.posterior(x)?;
        let denom2 = if include_noise { var + self.noise_var } else { var };
        if denom2 <= 0.0 {
            return Ok(if mean > tau { 0.0 } else { f64::NEG_INFINITY });
        }
        Ok(math::log_norm_cdf((mean - tau) / math::sqrt(denom2)))
    }

    /// Log marginal likelihood of the training data under the current
    /// hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.x.len();
        let mut fit = 0.0;
        for i in 0..n {
            fit += self.y[i] * self.alpha[i];
        }
        let mut logdet = 0.0;
        for i in 0..n {
            logdet += math::ln(self.chol[i * (i + 1) / 2 + i]);
        }
        -0.5 * fit - logdet - n as f64 * math::LN_SQRT_2PI
    }
}

/// Fit one model per candidate shared lengthscale and keep the one with the
/// highest log marginal likelihood.
pub fn fit_grid_search(
    scale: f64,
    candidates: &[f64],
    seq_len: usize,
    noise_var: f64,
    x: &[Sequence],
    y: &[f64],
) -> Result<GpModel> {
    if candidates.is_empty() {
        return Err(Error::InvalidParam("no lengthscale candidates"));
    }
    let mut best: Option<(f64, GpModel)> = None;
    for &l in candidates {
        let kernel = CategoricalKernel::isotropic(scale, l, seq_len)?;
        let model = GpModel::fit(kernel, noise_var, x.to_vec(), y.to_vec())?;
        let lml = model.log_marginal_likelihood();
        if best.as_ref().map_or(true, |(b, _)| lml > *b) {
            best = Some((lml, model));
        }
    }
    Ok(best.unwrap().1)
}

/// Default lengthscale grid for `fit_grid_search`.
pub const LENGTHSCALE_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Check the worst-case repeat-count bound on the posterior variance:
/// var_N(x) <= noise * k(x,x) / (noise + n_at_x * k(x,x)), up to 1e-9 slack.
/// `n_at_x` must be the exact number of training copies of x.
pub fn variance_bound_check(model: &GpModel, x: &Sequence, n_at_x: usize) -> Result<bool> {
    let (_, var) = model.posterior(x)?;
    let prior_var = model.kernel.eval(x, x)?;
    let noise = model.noise_var;
    let bound = noise * prior_var / (noise + n_at_x as f64 * prior_var);
    Ok(var <= bound + 1e-9)
}
