//! Round-level search strategies and the full campaign loop: fit models at
//! the round's threshold, update the search distribution per the method's
//! weighted-gradient row, sample a batch, evaluate it through the noisy
//! channel, and append to the dataset.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::blackbox::{evaluate, FitnessFn, NoisyChannel};
use crate::cpe::{fit_logloss_sized, CpeArch, TrainConfig};
use crate::error::{Error, Result};
use crate::genmodel::{fit_ml, Family, SearchDist};
use crate::gp::{fit_grid_search, CategoricalKernel, GpModel, LENGTHSCALE_GRID};
use crate::rng::Stream;
use crate::seq::{empirical_quantile, relabel, LabeledDataset, QuerySet, SeqSpace, Sequence};
use crate::vi::{
    maximize_elbo, optimize, AdamState, BaselineState, OptimizeStep, ScoreBackend, ScoreTable,
    TraceRow, ViConfig,
};

/// Per-round threshold rule. The annealed form tightens the quantile level
/// via p_t = p_{t-1}^eta, which is strictly increasing toward 1 for
/// p_0, eta in (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub enum ThresholdSchedule {
    Fixed(f64),
    Quantile { gamma: f64 },
    Annealed { p: f64, eta: f64 },
}

impl ThresholdSchedule {
    pub fn annealed(p0: f64, eta: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidParam("annealing start must lie in (0, 1)"));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParam("annealing exponent must lie in (0, 1]"));
        }
        Ok(ThresholdSchedule::Annealed { p: p0, eta })
    }

    /// Compute this round's threshold and advance any internal state.
    pub fn next_threshold(&mut self, observed: &[f64]) -> Result<f64> {
        match self {
            ThresholdSchedule::Fixed(tau) => Ok(*tau),
            ThresholdSchedule::Quantile { gamma } => empirical_quantile(observed, *gamma),
            ThresholdSchedule::Annealed { p, eta } => {
                let next = crate::math::powf(*p, *eta);
                let tau = empirical_quantile(observed, next)?;
                *p = next;
                Ok(tau)
            }
        }
    }

    /// Threshold for the terminal refit: the last quantile level used, with
    /// no further advancement.
    pub fn final_threshold(&self, observed: &[f64]) -> Result<f64> {
        match self {
            ThresholdSchedule::Fixed(tau) => Ok(*tau),
            ThresholdSchedule::Quantile { gamma } => empirical_quantile(observed, *gamma),
            ThresholdSchedule::Annealed { p, .. } => empirical_quantile(observed, *p),
        }
    }

    /// Current annealing level, if any.
    pub fn level(&self) -> Option<f64> {
        match self {
            ThresholdSchedule::Fixed(_) => None,
            ThresholdSchedule::Quantile { gamma } => Some(*gamma),
            ThresholdSchedule::Annealed { p, .. } => Some(*p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Vsd,
    Dbas,
    Cbas,
    Bore,
    Random,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Vsd, Method::Dbas, Method::Cbas, Method::Bore, Method::Random];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Vsd => "vsd",
            Method::Dbas => "dbas",
            Method::Cbas => "cbas",
            Method::Bore => "bore",
            Method::Random => "random",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Cpe,
    GpPi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpeSettings {
    pub arch: CpeArch,
    pub train: TrainConfig,
}

impl Default for CpeSettings {
    fn default() -> Self {
        CpeSettings { arch: CpeArch::Hidden { width: 32 }, train: TrainConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpSettings {
    pub scale: f64,
    pub lengthscale: f64,
    pub noise_var: f64,
    pub noisy_pi: bool,
    pub grid_search: bool,
}

impl Default for GpSettings {
    fn default() -> Self {
        GpSettings {
            scale: 1.0,
            lengthscale: 1.0,
            noise_var: 0.1,
            noisy_pi: true,
            grid_search: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorSpec {
    Uniform,
    /// Maximum-likelihood fit to the initial sequences, fitness ignored.
    FitToInitial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyConfig {
    pub method: Method,
    pub backend: BackendKind,
    pub family: Family,
    pub batch_size: usize,
    pub rounds: usize,
    pub seed: u64,
    pub schedule: ThresholdSchedule,
    pub prior: PriorSpec,
    pub vi: ViConfig,
    pub cpe: CpeSettings,
    pub gp: GpSettings,
    /// Weighted-ML gradient steps per round for the frozen-batch methods.
    pub weighted_steps: usize,
    /// Keep the per-iteration optimizer trace in each round log.
    pub record_trace: bool,
}

impl StrategyConfig {
    pub fn new(method: Method, schedule: ThresholdSchedule) -> Self {
        StrategyConfig {
            method,
            backend: BackendKind::Cpe,
            family: Family::MeanField,
            batch_size: 128,
            rounds: 10,
            seed: 0,
            schedule,
            prior: PriorSpec::Uniform,
            vi: ViConfig::default(),
            cpe: CpeSettings::default(),
            gp: GpSettings::default(),
            weighted_steps: 500,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParam("batch size must be at least 1"));
        }
        if self.weighted_steps == 0 {
            return Err(Error::InvalidParam("weighted steps must be at least 1"));
        }
        Ok(())
    }
}

/// What happened in one round: the threshold, the evaluated batch with its
/// novelty flags, and audit counters distinguishing live resampling from
/// frozen-batch reuse.
#[derive(Clone, Debug)]
pub struct RoundLog {
    pub round: usize,
    pub tau: f64,
    pub batch: Vec<Sequence>,
    pub fitness: Vec<f64>,
    /// Candidate was unqueried at its own evaluation time, counting earlier
    /// members of the same batch.
    pub novel: Vec<bool>,
    /// Novel candidates whose measured fitness cleared this round's tau.
    pub unique_hits: usize,
    /// Fresh sample batches drawn from the live distribution while fitting.
    pub sample_draws: usize,
    /// Gradient steps that consumed the round's frozen batch.
    pub frozen_reuses: usize,
    /// The search distribution the batch was sampled from.
    pub q_snapshot: SearchDist,
    /// Optimizer trace, populated when the config asks for it. Derived
    /// data: not part of the deterministic digest.
    pub vi_trace: Vec<TraceRow>,
    /// Not part of the deterministic digest.
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct CampaignResult {
    pub provenance: String,
    pub seed: u64,
    pub initial_size: usize,
    pub rounds: Vec<RoundLog>,
    pub final_tau: f64,
    pub final_q: SearchDist,
}

impl CampaignResult {
    /// Deterministic byte digest of every semantic field (wall times are
    /// excluded): two runs with the same config and seed must agree exactly.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(self.provenance.as_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.initial_size as u64).to_le_bytes());
        let push_dist = |out: &mut Vec<u8>, q: &SearchDist| {
            out.push(match q {
                SearchDist::MeanField(_) => 0,
                SearchDist::Ar(_) => 1,
            });
            for p in q.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        };
        for log in &self.rounds {
            out.extend_from_slice(&(log.round as u64).to_le_bytes());
            out.extend_from_slice(&log.tau.to_le_bytes());
            for x in &log.batch {
                for &t in x.tokens() {
                    out.extend_from_slice(&t.to_le_bytes());
                }
            }
            for y in &log.fitness {
                out.extend_from_slice(&y.to_le_bytes());
            }
            for &n in &log.novel {
                out.push(n as u8);
            }
            out.extend_from_slice(&(log.unique_hits as u64).to_le_bytes());
            out.extend_from_slice(&(log.sample_draws as u64).to_le_bytes());
            out.extend_from_slice(&(log.frozen_reuses as u64).to_le_bytes());
            push_dist(&mut out, &log.q_snapshot);
        }
        out.extend_from_slice(&self.final_tau.to_le_bytes());
        push_dist(&mut out, &self.final_q);
        out
    }
}

/// A live campaign. Rounds share warm-started variational parameters; the
/// query set covers the initial data, so novelty means new to the whole
/// history of the experiment.
pub struct Campaign<'a> {
    config: StrategyConfig,
    f: &'a dyn FitnessFn,
    channel: NoisyChannel,
    dataset: LabeledDataset,
    queryset: QuerySet,
    prior: SearchDist,
    q: SearchDist,
    schedule: ThresholdSchedule,
    root: Stream,
    logs: Vec<RoundLog>,
    initial_size: usize,
}

impl<'a> Campaign<'a> {
    pub fn new(
        config: StrategyConfig,
        initial: LabeledDataset,
        f: &'a dyn FitnessFn,
        channel: NoisyChannel,
    ) -> Result<Self> {
        config.validate()?;
        if initial.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let seq_len = initial.seq_len().expect("nonempty dataset");
        if seq_len != f.seq_len() {
            return Err(Error::LengthMismatch { expected: f.seq_len(), got: seq_len });
        }
        let vocab = f.vocab_size();
        let prior = match config.prior {
            PriorSpec::Uniform => SearchDist::uniform(config.family, seq_len, vocab),
            PriorSpec::FitToInitial => {
                let seqs: Vec<Sequence> = initial.sequences().cloned().collect();
                fit_ml(&seqs, config.family, vocab)?
            }
        };
        let mut queryset = QuerySet::new();
        for x in initial.sequences() {
            queryset.insert(x);
        }
        let root = Stream::new(config.seed).derive(b"campaign");
        let initial_size = initial.len();
        let schedule = config.schedule.clone();
        Ok(Campaign {
            q: prior.clone(),
            prior,
            config,
            f,
            channel,
            dataset: initial,
            queryset,
            schedule,
            root,
            logs: Vec::new(),
            initial_size,
        })
    }

    pub fn dataset(&self) -> &LabeledDataset {
        &self.dataset
    }

    pub fn queryset(&self) -> &QuerySet {
        &self.queryset
    }

    pub fn search_dist(&self) -> &SearchDist {
        &self.q
    }

    pub fn prior(&self) -> &SearchDist {
        &self.prior
    }

    pub fn logs(&self) -> &[RoundLog] {
        &self.logs
    }

    pub fn rounds_run(&self) -> usize {
        self.logs.len()
    }

    /// Execute one round. A black-box failure aborts atomically: dataset,
    /// query set, distribution, and schedule all keep their pre-round state.
    pub fn run_round(&mut self) -> Result<&RoundLog> {
        let q_backup = self.q.clone();
        let schedule_backup = self.schedule.clone();
        match self.round_inner() {
            Ok(log) => {
                self.logs.push(log);
                Ok(self.logs.last().expect("just pushed"))
            }
            Err(e) => {
                self.q = q_backup;
                self.schedule = schedule_backup;
                Err(e)
            }
        }
    }

    fn round_inner(&mut self) -> Result<RoundLog> {
        let t = self.logs.len() + 1;
        #[cfg(feature = "std")]
        let started = std::time::Instant::now();
        let rng = self.root.derive_u64(t as u64);
        let observed = self.dataset.fitness_values();
        let tau = self.schedule.next_threshold(&observed)?;

        let mut sample_draws = 0usize;
        let mut frozen_reuses = 0usize;
        let mut vi_trace = Vec::new();
        if self.config.method != Method::Random {
            let (draws, reuses, trace) =
                self.update_distribution(tau, rng.derive(b"fit"))?;
            sample_draws = draws;
            frozen_reuses = reuses;
            if self.config.record_trace {
                vi_trace = trace;
            }
        }

        let sampler = if self.config.method == Method::Random { &self.prior } else { &self.q };
        let mut batch_rng = rng.derive(b"batch");
        let batch = sampler.sample(&mut batch_rng, self.config.batch_size);

        let mut novel = Vec::with_capacity(batch.len());
        let mut within = QuerySet::new();
        for x in &batch {
            novel.push(!self.queryset.contains(x) && !within.contains(x));
            within.insert(x);
        }

        let mut noise_rng = rng.derive(b"noise");
        let fitness = evaluate(self.f, &self.channel, &batch, &mut noise_rng)?;

        // Black box succeeded for the whole batch: commit.
        for (x, &y) in batch.iter().zip(&fitness) {
            self.dataset.push(x.clone(), y)?;
            self.queryset.insert(x);
        }
        let unique_hits = novel
            .iter()
            .zip(&fitness)
            .filter(|&(&n, &y)| n && y > tau)
            .count();

        #[cfg(feature = "std")]
        let wall_time_s = started.elapsed().as_secs_f64();
        #[cfg(not(feature = "std"))]
        let wall_time_s = 0.0;

        Ok(RoundLog {
            round: t,
            tau,
            batch,
            fitness,
            novel,
            unique_hits,
            sample_draws,
            frozen_reuses,
            q_snapshot: sampler.clone(),
            vi_trace,
            wall_time_s,
        })
    }

    /// Fit the score model at tau and update q per the method's estimator
    /// row. Returns (fresh sample draws, frozen-batch reuses, trace).
    fn update_distribution(
        &mut self,
        tau: f64,
        rng: Stream,
    ) -> Result<(usize, usize, Vec<TraceRow>)> {
        let mut model_rng = rng.derive(b"model");
        let seq_len = self.f.seq_len();
        let vocab = self.f.vocab_size();
        let (cpe_model, gp_model) = match self.config.backend {
            BackendKind::Cpe => {
                let binary = relabel(&self.dataset, tau)?;
                let fit = fit_logloss_sized(
                    &binary,
                    self.config.cpe.arch,
                    seq_len,
                    vocab,
                    &self.config.cpe.train,
                    &mut model_rng,
                )?;
                (Some(fit.model), None)
            }
            BackendKind::GpPi => {
                let xs: Vec<Sequence> = self.dataset.sequences().cloned().collect();
                let ys = self.dataset.fitness_values();
                let gp = if self.config.gp.grid_search {
                    fit_grid_search(
                        self.config.gp.scale,
                        &LENGTHSCALE_GRID,
                        seq_len,
                        self.config.gp.noise_var,
                        &xs,
                        &ys,
                    )?
                } else {
                    let kernel = CategoricalKernel::isotropic(
                        self.config.gp.scale,
                        self.config.gp.lengthscale,
                        seq_len,
                    )?;
                    GpModel::fit(kernel, self.config.gp.noise_var, xs, ys)?
                };
                (None, Some(gp))
            }
        };
        let backend = match (&cpe_model, &gp_model) {
            (Some(model), _) => ScoreBackend::Cpe(model),
            (_, Some(model)) => ScoreBackend::GpPi { model, tau },
            _ => unreachable!(),
        };
        // Tiny domains: precompute the scores once instead of re-evaluating
        // the GP posterior per sample.
        let space = SeqSpace::new(vocab, seq_len)?;
        let table;
        let backend = if gp_model.is_some() && space.count().is_some_and(|n| n <= 4096) {
            table = ScoreTable::tabulate(space, &backend)?;
            ScoreBackend::Table(&table)
        } else {
            backend
        };

        let mut opt_rng = rng.derive(b"opt");
        match self.config.method {
            Method::Vsd => {
                let trace = maximize_elbo(
                    &mut self.q,
                    &backend,
                    &self.prior,
                    &self.config.vi,
                    &mut opt_rng,
                )?;
                Ok((self.config.vi.iterations, 0, trace))
            }
            Method::Bore => {
                // Live resampling keeps the smoothed-average control variate
                // unbiased here, unlike for the frozen-batch methods.
                let s = self.config.vi.samples_per_step;
                let mut baseline = BaselineState::new(self.config.vi.baseline_decay);
                let mut adam = AdamState::new(self.q.param_len());
                let mut scratch = vec![0.0; self.q.param_len()];
                let trace = optimize(
                    &mut self.q,
                    |q, _| {
                        let b = baseline.value();
                        let mut grad = vec![0.0; q.param_len()];
                        let mut mean_w = 0.0;
                        for x in q.sample(&mut opt_rng, s) {
                            let w = backend.score(&x)?;
                            mean_w += w;
                            q.score_grad_into(&x, &mut scratch)?;
                            for (g, sg) in grad.iter_mut().zip(&scratch) {
                                *g += (w - b) * sg;
                            }
                        }
                        let inv = 1.0 / s as f64;
                        for g in grad.iter_mut() {
                            *g *= inv;
                        }
                        baseline.observe(mean_w * inv);
                        Ok(OptimizeStep { grad, elbo: mean_w * inv, baseline: b })
                    },
                    &mut adam,
                    self.config.vi.learning_rate,
                    self.config.vi.iterations,
                )?;
                Ok((self.config.vi.iterations, 0, trace))
            }
            Method::Dbas | Method::Cbas => {
                let s = self.config.vi.samples_per_step;
                let mut freeze_rng = rng.derive(b"freeze");
                let frozen = self.q.sample(&mut freeze_rng, s);
                // Weights are fixed at freeze time: the sampling distribution
                // of the batch does not move with the inner optimization.
                let mut weights = Vec::with_capacity(frozen.len());
                for x in &frozen {
                    let w = match self.config.method {
                        Method::Dbas => backend.score(x)?,
                        Method::Cbas => {
                            let ratio = crate::math::exp(
                                self.prior.log_prob(x)? - self.q.log_prob(x)?,
                            );
                            backend.score(x)? * ratio
                        }
                        _ => unreachable!(),
                    };
                    weights.push(w);
                }
                if self.config.method == Method::Cbas {
                    // Self-normalized importance weights.
                    let total: f64 = weights.iter().sum();
                    if total > 0.0 {
                        let scale = weights.len() as f64 / total;
                        for w in weights.iter_mut() {
                            *w *= scale;
                        }
                    }
                }
                let mut adam = AdamState::new(self.q.param_len());
                let mut scratch = vec![0.0; self.q.param_len()];
                let trace = optimize(
                    &mut self.q,
                    |q, _| {
                        let mut grad = vec![0.0; q.param_len()];
                        let mut mean_w = 0.0;
                        for (x, &w) in frozen.iter().zip(&weights) {
                            mean_w += w;
                            q.score_grad_into(x, &mut scratch)?;
                            for (g, sg) in grad.iter_mut().zip(&scratch) {
                                *g += w * sg;
                            }
                        }
                        let inv = 1.0 / frozen.len() as f64;
                        for g in grad.iter_mut() {
                            *g *= inv;
                        }
                        Ok(OptimizeStep { grad, elbo: mean_w * inv, baseline: 0.0 })
                    },
                    &mut adam,
                    self.config.vi.learning_rate,
                    self.config.weighted_steps,
                )?;
                Ok((1, self.config.weighted_steps, trace))
            }
            Method::Random => Ok((0, 0, Vec::new())),
        }
    }

    /// Terminal refit at the final threshold, consuming the campaign.
    pub fn finish(mut self, provenance: String) -> Result<CampaignResult> {
        let observed = self.dataset.fitness_values();
        let final_tau = self.schedule.final_threshold(&observed)?;
        if self.config.method != Method::Random {
            let t = self.logs.len() as u64 + 1;
            let rng = self.root.derive(b"final").derive_u64(t);
            self.update_distribution(final_tau, rng)?;
        }
        Ok(CampaignResult {
            provenance,
            seed: self.config.seed,
            initial_size: self.initial_size,
            rounds: self.logs,
            final_tau,
            final_q: self.q,
        })
    }
}

/// Run the full loop: T rounds plus the terminal refit.
pub fn run_campaign(
    config: StrategyConfig,
    initial: LabeledDataset,
    f: &dyn FitnessFn,
    channel: NoisyChannel,
    provenance: String,
) -> Result<CampaignResult> {
    let rounds = config.rounds;
    let mut campaign = Campaign::new(config, initial, f, channel)?;
    for _ in 0..rounds {
        campaign.run_round()?;
    }
    campaign.finish(provenance)
}
