//! Executable property checks tying the implementation to its theory:
//! gradient unbiasedness against enumeration, posterior recovery under an
//! identifiable target, GP variance-rate behavior under persistent sampling,
//! and the hits gap between a learned and a fully informed sampler.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::blackbox::{oracle_posterior, NoisyChannel, TabulatedLandscape};
use crate::cpe::{CpeArch, CpeModel};
use crate::error::{Error, Result};
use crate::genmodel::{Family, SearchDist};
use crate::gp::{variance_bound_check, CategoricalKernel, GpModel};
use crate::math;
use crate::rng::Stream;
use crate::seq::{SeqSpace, Sequence};
use crate::vi::{elbo_grad, maximize_elbo, BaselineState, ScoreBackend, ScoreTable, ViConfig};

/// Small fully enumerable test domain with a tabulated objective.
#[derive(Clone, Debug)]
pub struct TinyDomainFixture {
    space: SeqSpace,
    values: Vec<f64>,
    noise_std: f64,
}

/// Enumeration ceiling for fixtures.
pub const MAX_FIXTURE_SIZE: u64 = 4096;

impl TinyDomainFixture {
    pub fn new(space: SeqSpace, values: Vec<f64>, noise_std: f64) -> Result<Self> {
        let n = space
            .count()
            .ok_or(Error::DomainTooLarge { size: u64::MAX, max: MAX_FIXTURE_SIZE })?;
        if n > MAX_FIXTURE_SIZE {
            return Err(Error::DomainTooLarge { size: n, max: MAX_FIXTURE_SIZE });
        }
        if values.len() as u64 != n {
            return Err(Error::ShapeMismatch { expected: n as usize, got: values.len() });
        }
        if !(noise_std >= 0.0) {
            return Err(Error::InvalidParam("noise std must be nonnegative"));
        }
        Ok(TinyDomainFixture { space, values, noise_std })
    }

    /// Independent standard-normal fitness per sequence.
    pub fn random(vocab: usize, len: usize, noise_std: f64, rng: &mut Stream) -> Result<Self> {
        let space = SeqSpace::new(vocab, len)?;
        let n = space.count().unwrap_or(u64::MAX);
        if n > MAX_FIXTURE_SIZE {
            return Err(Error::DomainTooLarge { size: n, max: MAX_FIXTURE_SIZE });
        }
        let values = (0..n).map(|_| rng.normal()).collect();
        Self::new(space, values, noise_std)
    }

    pub fn constant(vocab: usize, len: usize, value: f64, noise_std: f64) -> Result<Self> {
        let space = SeqSpace::new(vocab, len)?;
        let n = space.count().unwrap_or(u64::MAX);
        let values = vec![value; n as usize];
        Self::new(space, values, noise_std)
    }

    /// Two fitness levels with a configurable number of high points.
    pub fn two_level(
        vocab: usize,
        len: usize,
        high_count: usize,
        noise_std: f64,
    ) -> Result<Self> {
        let space = SeqSpace::new(vocab, len)?;
        let n = space.count().unwrap_or(u64::MAX) as usize;
        if high_count == 0 || high_count > n {
            return Err(Error::InvalidParam("high count out of range"));
        }
        let values = (0..n).map(|i| if i < high_count { 1.0 } else { 0.0 }).collect();
        Self::new(space, values, noise_std)
    }

    pub fn space(&self) -> SeqSpace {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn landscape(&self) -> TabulatedLandscape {
        TabulatedLandscape::from_values(self.space, self.values.clone())
            .expect("fixture domain is enumerable")
    }

    /// CPE-like score table: log sigmoid(f(x)).
    pub fn score_table(&self) -> ScoreTable {
        let scores = self.values.iter().map(|&f| math::log_sigmoid(f)).collect();
        ScoreTable::new(self.space, scores).expect("fixture domain is enumerable")
    }
}

/// Machine-readable outcome of one check.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: &'static str,
    pub pass: bool,
    pub statistic: f64,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &'static str, pass: bool, statistic: f64, detail: String) -> Self {
        CheckReport { name, pass, statistic, detail }
    }
}

fn exact_elbo_grad(
    q: &SearchDist,
    table: &ScoreTable,
    prior: &SearchDist,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; q.param_len()];
    let mut grad = vec![0.0; q.param_len()];
    for x in table.space().iter() {
        let lq = q.log_prob(&x)?;
        let w = table.log_score(&x)? - lq + prior.log_prob(&x)?;
        let px = math::exp(lq);
        q.score_grad_into(&x, &mut grad)?;
        for (a, g) in acc.iter_mut().zip(&grad) {
            *a += px * w * g;
        }
    }
    Ok(acc)
}

struct RepeatStats {
    mean: Vec<f64>,
    se: Vec<f64>,
}

fn repeat_stats(samples: &[Vec<f64>]) -> RepeatStats {
    let repeats = samples.len();
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, &v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= repeats as f64;
    }
    let mut se = vec![0.0; dim];
    for s in samples {
        for i in 0..dim {
            let d = s[i] - mean[i];
            se[i] += d * d;
        }
    }
    for v in se.iter_mut() {
        *v = math::sqrt(*v / (repeats as f64 - 1.0) / repeats as f64);
    }
    RepeatStats { mean, se }
}

/// Compare the Monte-Carlo ELBO gradient against the enumerated exact
/// gradient: every coordinate must sit within 3 combined standard errors.
pub fn check_gradient_unbiasedness(
    fixture: &TinyDomainFixture,
    q: &SearchDist,
    samples: usize,
    repeats: usize,
    rng: &mut Stream,
) -> Result<CheckReport> {
    if repeats < 2 {
        return Err(Error::InvalidParam("need at least 2 repeats"));
    }
    let table = fixture.score_table();
    let prior = SearchDist::uniform(q.family(), q.seq_len(), q.vocab_size());
    let exact = exact_elbo_grad(q, &table, &prior)?;
    let backend = ScoreBackend::Table(&table);
    let mut draws = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let mut baseline = BaselineState::new(0.7);
        draws.push(elbo_grad(q, &backend, &prior, samples, &mut baseline, rng)?);
    }
    let stats = repeat_stats(&draws);
    let mut worst = 0.0f64;
    let mut pass = true;
    for i in 0..exact.len() {
        let dev = math::abs(stats.mean[i] - exact[i]) / (3.0 * stats.se[i] + 1e-12);
        if dev > worst {
            worst = dev;
        }
        if math::abs(stats.mean[i] - exact[i]) > 3.0 * stats.se[i] + 1e-9 {
            pass = false;
        }
    }
    Ok(CheckReport::new(
        "gradient_unbiasedness",
        pass,
        worst,
        format!("max |mean - exact| / 3se = {worst:.3} over {} coordinates", exact.len()),
    ))
}

/// Negative control: the same comparison for a deliberately biased estimator
/// (the baseline subtracted inside the log). Passes when the bias is
/// detected, demonstrating the test's sensitivity.
pub fn check_gradient_negative_control(
    fixture: &TinyDomainFixture,
    q: &SearchDist,
    samples: usize,
    repeats: usize,
    rng: &mut Stream,
) -> Result<CheckReport> {
    let table = fixture.score_table();
    let prior = SearchDist::uniform(q.family(), q.seq_len(), q.vocab_size());
    let exact = exact_elbo_grad(q, &table, &prior)?;
    // Biased estimator: weight log(score * exp(-logq+logp) - b) with a
    // nonlinear baseline placement.
    let b = 0.5;
    let mut draws = Vec::with_capacity(repeats);
    let mut grad = vec![0.0; q.param_len()];
    for _ in 0..repeats {
        let mut acc = vec![0.0; q.param_len()];
        for x in q.sample(rng, samples) {
            let w = table.log_score(&x)? - q.log_prob(&x)? + prior.log_prob(&x)?;
            let biased = math::ln(math::exp(w).max(1e-12) + b);
            q.score_grad_into(&x, &mut grad)?;
            for (a, g) in acc.iter_mut().zip(&grad) {
                *a += biased * g;
            }
        }
        for a in acc.iter_mut() {
            *a /= samples as f64;
        }
        draws.push(acc);
    }
    let stats = repeat_stats(&draws);
    let mut detected = false;
    for i in 0..exact.len() {
        if math::abs(stats.mean[i] - exact[i]) > 3.0 * stats.se[i] + 1e-9 {
            detected = true;
        }
    }
    Ok(CheckReport::new(
        "gradient_negative_control",
        detected,
        if detected { 1.0 } else { 0.0 },
        String::from(if detected {
            "biased estimator correctly rejected"
        } else {
            "biased estimator went undetected"
        }),
    ))
}

/// With an additive CPE and uniform prior the target posterior factorizes,
/// so the mean-field family contains it; VI must then drive the enumerated
/// KL(q || target) below `kl_limit`. For non-additive models the family may
/// not contain the target, so the residual KL is recorded without being
/// asserted against the limit.
pub fn check_posterior_recovery(
    model: &CpeModel,
    steps: usize,
    kl_limit: f64,
    rng: &mut Stream,
) -> Result<CheckReport> {
    let identifiable = matches!(model.arch(), CpeArch::Additive);
    let space = SeqSpace::new(model.vocab_size(), model.seq_len())?;
    let prior = SearchDist::uniform(Family::MeanField, model.seq_len(), model.vocab_size());
    let mut q = prior.clone();
    let backend = ScoreBackend::Cpe(model);
    let cfg = ViConfig { iterations: steps, samples_per_step: 512, ..ViConfig::default() };
    maximize_elbo(&mut q, &backend, &prior, &cfg, rng)?;
    // Enumerated target: uniform prior times the CPE score, normalized.
    let mut target: Vec<f64> = Vec::with_capacity(space.count().unwrap() as usize);
    for x in space.iter() {
        target.push(math::exp(model.predict_logprob(&x)?));
    }
    let z: f64 = target.iter().sum();
    let mut kl = 0.0;
    for (i, x) in space.iter().enumerate() {
        let lq = q.log_prob(&x)?;
        kl += math::exp(lq) * (lq - math::ln(target[i] / z));
    }
    if identifiable {
        Ok(CheckReport::new(
            "posterior_recovery",
            kl < kl_limit,
            kl,
            format!("KL(q || target) = {kl:.3e} after {steps} steps (limit {kl_limit:.1e})"),
        ))
    } else {
        Ok(CheckReport::new(
            "posterior_recovery",
            true,
            kl,
            format!(
                "residual KL(q || target) = {kl:.3e} after {steps} steps \
                 (not asserted: family may not contain the target)"
            ),
        ))
    }
}

/// Outcome of the variance-rate simulation.
#[derive(Clone, Debug)]
pub struct VarianceRateReport {
    pub report: CheckReport,
    pub bound_violations: usize,
    pub max_scaled_variance: f64,
}

/// Simulate level-set-guided sampling with a 5% uniform exploration mixture
/// and verify (a) the repeat-count variance bound at every point each round,
/// and (b) t * var_t(x) <= 1.5 * noise for every x with sampling frequency
/// at least 5%, for all t in [t_start, rounds].
pub fn check_variance_rate(
    fixture: &TinyDomainFixture,
    rounds: usize,
    t_start: usize,
    rng: &mut Stream,
) -> Result<VarianceRateReport> {
    if fixture.noise_std <= 0.0 {
        return Err(Error::InvalidParam("variance rate check needs observation noise"));
    }
    let space = fixture.space();
    let n = space.count().unwrap() as usize;
    let noise_var = fixture.noise_std * fixture.noise_std;
    let kernel = CategoricalKernel::isotropic(1.0, 1.0, space.len())?;
    let mut gp = GpModel::prior(kernel, noise_var)?;
    let tau = {
        // Midpoint between the top value and the rest.
        let mut sorted = fixture.values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        0.5 * (sorted[n - 1] + sorted[n - 2])
    };
    let all: Vec<Sequence> = space.iter().collect();
    let mut counts = vec![0usize; n];
    let mut bound_violations = 0usize;
    let mut max_scaled = 0.0f64;
    let mut pass_rate = true;
    for t in 1..=rounds {
        // Sampling distribution: 95% level-set posterior, 5% uniform.
        let mut probs = vec![0.0; n];
        let mut total = 0.0;
        for (i, x) in all.iter().enumerate() {
            let (mu, var) = gp.posterior(x)?;
            let z = (mu - tau) / math::sqrt(var + noise_var);
            probs[i] = math::norm_cdf(z);
            total += probs[i];
        }
        for p in probs.iter_mut() {
            *p = 0.95 * *p / total + 0.05 / n as f64;
        }
        let pick = rng.categorical(&probs);
        counts[pick] += 1;
        let y = fixture.values[pick] + fixture.noise_std * rng.normal();
        gp.extend(all[pick].clone(), y)?;

        for (i, x) in all.iter().enumerate() {
            if !variance_bound_check(&gp, x, counts[i])? {
                bound_violations += 1;
            }
            if t >= t_start {
                let freq = counts[i] as f64 / t as f64;
                if freq >= 0.05 {
                    let (_, var) = gp.posterior(x)?;
                    let scaled = t as f64 * var / noise_var;
                    if scaled > max_scaled {
                        max_scaled = scaled;
                    }
                    if scaled > 1.5 {
                        pass_rate = false;
                    }
                }
            }
        }
    }
    let pass = pass_rate && bound_violations == 0;
    let report = CheckReport::new(
        "variance_rate",
        pass,
        max_scaled,
        format!(
            "max t*var/noise = {max_scaled:.3} (limit 1.5), bound violations = {bound_violations}"
        ),
    );
    Ok(VarianceRateReport { report, bound_violations, max_scaled_variance: max_scaled })
}

/// Outcome of the hits-gap comparison.
#[derive(Clone, Debug)]
pub struct HitsGapReport {
    pub report: CheckReport,
    pub gap_t: f64,
    pub gap_2t: f64,
    pub ratio: f64,
}

/// Paired campaigns: a posterior-guided sampler (GP-PI level-set
/// distribution) against an oracle sampling from p(x | y > tau, f). The mean
/// absolute hits gap must grow sublinearly: gap(2T) <= ratio_limit * gap(T).
pub fn check_hits_gap(
    fixture: &TinyDomainFixture,
    tau: f64,
    t: usize,
    pairs: usize,
    ratio_limit: f64,
    rng: &mut Stream,
) -> Result<HitsGapReport> {
    if fixture.noise_std <= 0.0 {
        return Err(Error::InvalidParam("hits gap check needs observation noise"));
    }
    let space = fixture.space();
    let n = space.count().unwrap() as usize;
    let noise_var = fixture.noise_std * fixture.noise_std;
    let landscape = fixture.landscape();
    let oracle = oracle_posterior(
        &landscape,
        &NoisyChannel::new(fixture.noise_std)?,
        tau,
        None,
    )?;
    let all: Vec<Sequence> = space.iter().collect();
    let mut gap_sum_t = 0.0;
    let mut gap_sum_2t = 0.0;
    for pair in 0..pairs {
        let mut pair_rng = rng.derive_u64(pair as u64);
        let kernel = CategoricalKernel::isotropic(1.0, 1.0, space.len())?;
        let mut gp = GpModel::prior(kernel, noise_var)?;
        let mut hits_learned = 0usize;
        let mut hits_oracle = 0usize;
        for round in 1..=(2 * t) {
            // Learned agent: sample from the GP-PI level-set posterior.
            let mut probs = vec![0.0; n];
            let mut total = 0.0;
            for (i, x) in all.iter().enumerate() {
                let (mu, var) = gp.posterior(x)?;
                probs[i] = math::norm_cdf((mu - tau) / math::sqrt(var + noise_var));
                total += probs[i];
            }
            for p in probs.iter_mut() {
                *p /= total;
            }
            let pick = pair_rng.categorical(&probs);
            let y = fixture.values[pick] + fixture.noise_std * pair_rng.normal();
            if y > tau {
                hits_learned += 1;
            }
            gp.extend(all[pick].clone(), y)?;

            // Oracle agent: full knowledge of f.
            let x_star = oracle.sample(&mut pair_rng);
            let ix = space.index_of(&x_star)?;
            let y_star = fixture.values[ix] + fixture.noise_std * pair_rng.normal();
            if y_star > tau {
                hits_oracle += 1;
            }
            if round == t {
                gap_sum_t += math::abs(hits_learned as f64 - hits_oracle as f64);
            }
        }
        gap_sum_2t += math::abs(hits_learned as f64 - hits_oracle as f64);
    }
    let gap_t = gap_sum_t / pairs as f64;
    let gap_2t = gap_sum_2t / pairs as f64;
    // Floor guards the ratio when both gaps are negligible.
    let ratio = if gap_t < 0.25 { 0.0 } else { gap_2t / gap_t };
    let pass = ratio <= ratio_limit;
    let report = CheckReport::new(
        "hits_gap",
        pass,
        ratio,
        format!("gap({t}) = {gap_t:.3}, gap({}) = {gap_2t:.3}, ratio = {ratio:.3}", 2 * t),
    );
    Ok(HitsGapReport { report, gap_t, gap_2t, ratio })
}
