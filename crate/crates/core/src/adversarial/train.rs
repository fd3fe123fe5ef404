use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::critic::{encode_fake, encode_real, gradient_penalty, Critic, CriticConfig, Discriminator, WalkInput};
use crate::error::{Error, Result};
use crate::generator::{generate_graph, GenConfig, Generator, GradIn, TokenValue};
use crate::graph::{AssemblySpec, Dataset, TemporalGraphSample, TruncatedWalk};
use crate::metrics::{average_degree_mmd, EvalConfig};
use crate::nn::{Adam, Module};
use crate::sampler::{SamplerConfig, WalkSampler};

/// Step of the central difference used for the penalty's parameter gradient.
pub const GP_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStop {
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub eval_every: usize,
    /// Generated graphs per evaluation.
    pub n_eval_samples: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            patience: 10,
            eval_every: 10,
            n_eval_samples: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub n_critic: usize,
    pub gp_lambda: f64,
    pub l2_disc: f64,
    pub l2_gen: f64,
    pub max_epochs: usize,
    pub early_stop: EarlyStop,
    pub seed: u64,
    /// Share of samples used for training; the rest validates.
    pub split_ratio: f64,
    /// Feed generated categorical tokens to the critic as hard indicators
    /// (gradients reach the relaxed samples straight through) instead of
    /// their relaxed samples.
    pub hard_fake_inputs: bool,
    /// Weight of a new batch in the running minimax statistics.
    pub minimax_momentum: f64,
    /// Drop generated walks whose edges do not chain when assembling
    /// evaluation graphs.
    pub require_connected: bool,
    pub eval: EvalConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.003,
            beta1: 0.5,
            beta2: 0.9,
            batch_size: 32,
            n_critic: 5,
            gp_lambda: 10.0,
            l2_disc: 5e-5,
            l2_gen: 1e-7,
            max_epochs: 200,
            early_stop: EarlyStop::default(),
            seed: 0,
            split_ratio: 0.8,
            hard_fake_inputs: true,
            minimax_momentum: 0.1,
            require_connected: true,
            eval: EvalConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if self.batch_size == 0 || self.n_critic == 0 {
            return bad("batch_size and n_critic must be positive".into());
        }
        if !(self.gp_lambda >= 0.0 && self.l2_disc >= 0.0 && self.l2_gen >= 0.0) {
            return bad("penalty weights must be non-negative".into());
        }
        let es = &self.early_stop;
        if es.patience == 0 || es.eval_every == 0 || es.n_eval_samples == 0 {
            return bad("early stopping needs positive patience, eval_every and n_eval_samples".into());
        }
        if !(0.0..=1.0).contains(&self.minimax_momentum) {
            return bad("minimax_momentum must lie in [0, 1]".into());
        }
        self.eval.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticStats {
    /// `mean D(fake) - mean D(real) + lambda * GP + l2 * |theta|^2`.
    pub loss: f64,
    /// Mean gradient penalty before weighting.
    pub gp: f64,
}

/// Critic loss and its parameter gradient for one pair of batches. Fake and
/// real inputs are paired for interpolation.
pub fn critic_gradients<D: Discriminator, R: Rng + ?Sized>(
    d: &mut D,
    real: &[WalkInput],
    fake: &[WalkInput],
    cfg: &TrainConfig,
    rng: &mut R,
) -> CriticStats {
    assert_eq!(real.len(), fake.len(), "critic batches must have equal size");
    let b = real.len() as f64;
    let mut loss = 0.0;
    for x in fake {
        loss += d.score(x) / b;
        d.backprop(x, 1.0 / b, true);
    }
    for x in real {
        loss -= d.score(x) / b;
        d.backprop(x, -1.0 / b, true);
    }
    let mut gp = 0.0;
    if cfg.gp_lambda > 0.0 {
        for (r, f) in real.iter().zip(fake) {
            let eps: f64 = rng.random();
            let x_hat: WalkInput = r
                .iter()
                .zip(f)
                .map(|(a, c)| a.iter().zip(c).map(|(p, q)| eps * p + (1.0 - eps) * q).collect())
                .collect();
            gp += gradient_penalty(d, &x_hat, cfg.gp_lambda / b, GP_FD_STEP) / b;
        }
    }
    d.add_l2_grad(cfg.l2_disc);
    CriticStats {
        loss: loss + cfg.gp_lambda * gp + cfg.l2_disc * d.sq_norm(),
        gp,
    }
}

/// One critic update against a fresh generated batch.
pub fn critic_step<R: Rng + ?Sized>(
    critic: &mut Critic,
    gen: &Generator,
    real: &[TruncatedWalk],
    tau: f64,
    cfg: &TrainConfig,
    opt: &mut Adam,
    rng: &mut R,
) -> Result<CriticStats> {
    let (n, l) = (critic.n_nodes(), critic.max_len());
    let real: Vec<WalkInput> = real.iter().map(|w| encode_real(w, n, l)).collect::<Result<_>>()?;
    let (walks, _) = gen.sample_batch(real.len(), tau, rng);
    let fake: Vec<WalkInput> = walks.iter().map(|w| encode_fake(w, n, cfg.hard_fake_inputs)).collect();
    critic.zero_grad();
    let stats = critic_gradients(critic, &real, &fake, cfg, rng);
    opt.step(critic);
    Ok(stats)
}

/// Generator loss `-mean D(fake) + l2 * |theta|^2` and its gradient; the
/// critic's parameters are left untouched.
pub fn generator_gradients<R: Rng + ?Sized>(
    critic: &mut Critic,
    gen: &mut Generator,
    batch_size: usize,
    tau: f64,
    cfg: &TrainConfig,
    rng: &mut R,
) -> (f64, Vec<Option<crate::generator::MinimaxStats>>) {
    let n = critic.n_nodes();
    let (walks, tape) = gen.sample_batch(batch_size, tau, rng);
    let b = batch_size as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(walks.len());
    for w in &walks {
        let x = encode_fake(w, n, cfg.hard_fake_inputs);
        loss -= critic.score(&x) / b;
        let dx = critic.backprop(&x, -1.0 / b, false);
        grads.push(
            w.tokens
                .iter()
                .zip(dx)
                .map(|(t, d)| match t.value {
                    _ if t.forced => GradIn::None,
                    TokenValue::Time(_) => GradIn::Time(d[0]),
                    TokenValue::Cat(_) => GradIn::Cat(d),
                })
                .collect(),
        );
    }
    gen.backward(&tape, &grads, true);
    gen.add_l2_grad(cfg.l2_gen);
    (loss + cfg.l2_gen * gen.sq_norm(), tape.batch_stats)
}

/// One generator update through a frozen critic.
pub fn generator_step<R: Rng + ?Sized>(
    critic: &mut Critic,
    gen: &mut Generator,
    batch_size: usize,
    tau: f64,
    cfg: &TrainConfig,
    opt: &mut Adam,
    rng: &mut R,
) -> f64 {
    gen.zero_grad();
    let (loss, stats) = generator_gradients(critic, gen, batch_size, tau, cfg, rng);
    opt.step(gen);
    gen.update_minimax_stats(&stats, cfg.minimax_momentum);
    loss
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    /// Mean over the epoch's critic updates; NaN before training.
    pub critic_loss: f64,
    pub gen_loss: f64,
    pub gp: f64,
    pub mmd_avg_degree: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
    pub critic_updates: usize,
    pub gen_updates: usize,
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,critic_loss,gen_loss,gp,mmd_avg_degree,tau\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.critic_loss, r.gen_loss, r.gp, r.mmd_avg_degree, r.tau
            ));
        }
        out
    }

    pub fn best_metric(&self) -> Option<f64> {
        let e = self.best_epoch?;
        self.rows.iter().find(|r| r.epoch == e).map(|r| r.mmd_avg_degree)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best evaluation.
    pub generator: Generator,
    pub critic: Critic,
    pub history: TrainHistory,
    pub train: Dataset,
    pub validation: Dataset,
}

/// Assembly target used when generating graphs that mimic `data`.
pub fn assembly_spec(data: &Dataset, require_connected: bool) -> AssemblySpec {
    AssemblySpec {
        n_nodes: data.n_nodes,
        t_end_raw: data.t_end_raw,
        target_edges: Some((data.mean_edge_count().round() as usize).max(1)),
        require_connected,
    }
}

/// Generate `n` graphs, each from as many walks as its edge target. A graph
/// whose walks are all discarded is empty.
pub fn generate_samples<R: Rng + ?Sized>(
    gen: &Generator,
    n: usize,
    spec: &AssemblySpec,
    rng: &mut R,
) -> Result<Vec<TemporalGraphSample>> {
    let n_walks = spec.target_edges.unwrap_or(1);
    (0..n)
        .map(|_| match generate_graph(gen, n_walks, spec, rng) {
            Ok(g) => Ok(g.assembly.sample),
            Err(Error::AllWalksDiscarded { .. }) => Ok(TemporalGraphSample::empty(spec.n_nodes, spec.t_end_raw)),
            Err(e) => Err(e),
        })
        .collect()
}

const EVAL_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Train with early stopping; `on_eval` sees every evaluation together with
/// the current parameters.
pub fn train_with<F>(
    dataset: &Dataset,
    gcfg: &GenConfig,
    ccfg: &CriticConfig,
    tcfg: &TrainConfig,
    scfg: &SamplerConfig,
    mut on_eval: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&HistoryRow, &Generator, &Critic),
{
    tcfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training needs at least one sample".into()));
    }
    if scfg.max_len != gcfg.max_len {
        return Err(Error::Config(format!(
            "sampler walk length {} differs from generator walk length {}",
            scfg.max_len, gcfg.max_len
        )));
    }
    let (train, validation) = dataset.split(tcfg.split_ratio, tcfg.seed)?;
    let sampler = WalkSampler::new(&train, *scfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut gen = Generator::new(gcfg.clone(), dataset.n_nodes, &mut rng)?;
    let mut critic = Critic::new(ccfg.clone(), dataset.n_nodes, gcfg.max_len, &mut rng)?;
    let mut opt_g = Adam::with_betas(tcfg.lr, tcfg.beta1, tcfg.beta2, 1e-8);
    let mut opt_d = Adam::with_betas(tcfg.lr, tcfg.beta1, tcfg.beta2, 1e-8);
    let spec = assembly_spec(&train, tcfg.require_connected);
    let mut history = TrainHistory::default();
    let mut best = (gen.clone(), critic.clone());

    let evaluate = |g: &Generator| -> Result<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(tcfg.seed ^ EVAL_STREAM);
        let fake = generate_samples(g, tcfg.early_stop.n_eval_samples, &spec, &mut r)?;
        average_degree_mmd(&validation.samples, &fake, &tcfg.eval)
    };

    if tcfg.max_epochs > 0 {
        let row = HistoryRow {
            epoch: 0,
            critic_loss: f64::NAN,
            gen_loss: f64::NAN,
            gp: f64::NAN,
            mmd_avg_degree: evaluate(&gen)?,
            tau: gcfg.tau_at(0),
        };
        on_eval(&row, &gen, &critic);
        history.rows.push(row);
        history.best_epoch = Some(0);
    }
    let mut best_metric = history.rows.first().map_or(f64::INFINITY, |r| r.mmd_avg_degree);
    let mut stale = 0;
    for epoch in 1..=tcfg.max_epochs {
        let tau = gcfg.tau_at(epoch - 1);
        let (mut c_loss, mut gp) = (0.0, 0.0);
        for _ in 0..tcfg.n_critic {
            let real = sampler.sample_batch(tcfg.batch_size, &mut rng);
            let s = critic_step(&mut critic, &gen, &real, tau, tcfg, &mut opt_d, &mut rng)?;
            c_loss += s.loss / tcfg.n_critic as f64;
            gp += s.gp / tcfg.n_critic as f64;
            history.critic_updates += 1;
        }
        let g_loss = generator_step(&mut critic, &mut gen, tcfg.batch_size, tau, tcfg, &mut opt_g, &mut rng);
        history.gen_updates += 1;
        if !(c_loss.is_finite() && g_loss.is_finite()) {
            return Err(Error::NonFinite(format!(
                "epoch {epoch}: critic loss {c_loss}, generator loss {g_loss}, gradient penalty {gp}"
            )));
        }
        if epoch % tcfg.early_stop.eval_every != 0 && epoch != tcfg.max_epochs {
            continue;
        }
        let metric = evaluate(&gen)?;
        let row = HistoryRow {
            epoch,
            critic_loss: c_loss,
            gen_loss: g_loss,
            gp,
            mmd_avg_degree: metric,
            tau,
        };
        log::info!("epoch {epoch}: critic {c_loss:.4} gen {g_loss:.4} gp {gp:.4} mmd {metric:.3e} tau {tau:.3}");
        on_eval(&row, &gen, &critic);
        history.rows.push(row);
        if metric < best_metric {
            best_metric = metric;
            best = (gen.clone(), critic.clone());
            history.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= tcfg.early_stop.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        generator: best.0,
        critic: best.1,
        history,
        train,
        validation,
    })
}

pub fn train(
    dataset: &Dataset,
    gcfg: &GenConfig,
    ccfg: &CriticConfig,
    tcfg: &TrainConfig,
    scfg: &SamplerConfig,
) -> Result<TrainOutcome> {
    train_with(dataset, gcfg, ccfg, tcfg, scfg, |_, _, _| {})
}
